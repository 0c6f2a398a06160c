//! The continuous-time disturbed linear plant, its trajectories under
//! piecewise-constant inputs, sampled-time stepping, and the analytic
//! inter-sample deviation bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::matrix::{vec_add, zoh_substep, Matrix, Vector};
use crate::numerics::{dist, Polytope};

/// Default substep count for piecewise-constant input signals.
pub const DEFAULT_SUBSTEPS: usize = 8;
/// Default dense sample count per sampling period.
pub const DEFAULT_DENSE: usize = 64;

/// dx/dt = A x + B u + G v with x in X, u in U, v in V.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearSystem {
    pub a: Matrix,
    pub b: Matrix,
    pub g: Matrix,
    pub x_space: Polytope,
    pub u_space: Polytope,
    pub v_space: Polytope,
    #[serde(skip)]
    stability_checked: bool,
}

impl LinearSystem {
    pub fn new(
        a: Matrix,
        b: Matrix,
        g: Matrix,
        x_space: Polytope,
        u_space: Polytope,
        v_space: Polytope,
    ) -> Result<LinearSystem> {
        let n = a.rows();
        if !a.is_square() {
            return Err(Error::Dimension("A must be square".into()));
        }
        if b.rows() != n || g.rows() != n {
            return Err(Error::Dimension("B and G must have as many rows as A".into()));
        }
        if x_space.dim() != n || u_space.dim() != b.cols() || v_space.dim() != g.cols() {
            return Err(Error::Dimension("polytope dimensions inconsistent with matrices".into()));
        }
        if !x_space.contains(&vec![0.0; n]) {
            return Err(Error::Invalid("state space must contain the origin".into()));
        }
        Ok(LinearSystem { a, b, g, x_space, u_space, v_space, stability_checked: false })
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn stability_checked(&self) -> bool {
        self.stability_checked
    }
}

/// Piecewise-constant signal on [0, tau): value `values[j]` is held on the
/// j-th of the equally long substeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSignal {
    pub tau: f64,
    pub values: Vec<Vector>,
}

impl InputSignal {
    pub fn new(tau: f64, values: Vec<Vector>) -> Result<InputSignal> {
        if !(tau > 0.0) {
            return Err(Error::Invalid(format!("signal horizon must be positive, got {tau}")));
        }
        if values.is_empty() {
            return Err(Error::Invalid("signal needs at least one substep".into()));
        }
        Ok(InputSignal { tau, values })
    }

    pub fn constant(tau: f64, value: Vector, n_substeps: usize) -> Result<InputSignal> {
        InputSignal::new(tau, vec![value; n_substeps.max(1)])
    }

    pub fn zero(tau: f64, dim: usize, n_substeps: usize) -> Result<InputSignal> {
        InputSignal::constant(tau, vec![0.0; dim], n_substeps)
    }

    pub fn substeps(&self) -> usize {
        self.values.len()
    }

    /// Every substep value must lie inside the given input polytope.
    pub fn validate_in(&self, space: &Polytope) -> Result<()> {
        for (j, v) in self.values.iter().enumerate() {
            if v.len() != space.dim() {
                return Err(Error::Dimension(format!("substep {j} has dimension {}", v.len())));
            }
            if !space.contains_tol(v, 1e-7) {
                return Err(Error::Invalid(format!("substep {j} value outside its polytope")));
            }
        }
        Ok(())
    }
}

/// Densely sampled trajectory on [0, t_end], uniform step `h`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub h: f64,
    /// Sampling period that produced the trajectory; used to scale the
    /// tipping-point tolerance downstream.
    pub period: f64,
    /// Set if some sample left the configured guard box around X.
    pub left_guard: bool,
}

impl DenseTrajectory {
    pub fn final_state(&self) -> &Vector {
        self.states.last().expect("trajectory is nonempty")
    }

    pub fn span(&self) -> f64 {
        *self.times.last().expect("trajectory is nonempty")
    }

    /// Piecewise-linear interpolation between dense samples.
    pub fn interpolate(&self, t: f64) -> Vector {
        let n = self.states.len();
        if t <= self.times[0] {
            return self.states[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.states[n - 1].clone();
        }
        let idx = ((t - self.times[0]) / self.h).floor() as usize;
        let idx = idx.min(n - 2);
        let (t0, t1) = (self.times[idx], self.times[idx + 1]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        self.states[idx]
            .iter()
            .zip(&self.states[idx + 1])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    /// Concatenate a follow-on trajectory that starts where this one ends.
    pub fn extend_with(&mut self, other: &DenseTrajectory) {
        let offset = self.span();
        debug_assert!(dist(self.final_state(), &other.states[0]) < 1e-7);
        for (t, s) in other.times.iter().zip(&other.states).skip(1) {
            self.times.push(offset + t);
            self.states.push(s.clone());
        }
        self.left_guard |= other.left_guard;
    }
}

/// Precomputed exact per-substep propagation matrices for a fixed (tau, N).
pub struct Stepper {
    pub tau: f64,
    pub n_substeps: usize,
    pub phi: Matrix,     // e^{A h}
    pub gamma_b: Matrix, // control gain per substep
    pub gamma_g: Matrix, // disturbance gain per substep
}

impl Stepper {
    pub fn new(sys: &LinearSystem, tau: f64, n_substeps: usize) -> Result<Stepper> {
        if !(tau > 0.0) || n_substeps == 0 {
            return Err(Error::Invalid("stepper needs tau > 0 and at least one substep".into()));
        }
        let h = tau / n_substeps as f64;
        let (phi, gamma_b) = zoh_substep(&sys.a, &sys.b, h)?;
        let (_, gamma_g) = zoh_substep(&sys.a, &sys.g, h)?;
        Ok(Stepper { tau, n_substeps, phi, gamma_b, gamma_g })
    }

    fn check_signals(&self, u: &InputSignal, v: &InputSignal) -> Result<()> {
        if (u.tau - self.tau).abs() > 1e-9 * self.tau.max(1.0)
            || (v.tau - self.tau).abs() > 1e-9 * self.tau.max(1.0)
        {
            return Err(Error::HorizonMismatch(u.tau, v.tau));
        }
        if u.substeps() != self.n_substeps || v.substeps() != self.n_substeps {
            return Err(Error::Invalid(format!(
                "signals must use {} substeps, got {} and {}",
                self.n_substeps,
                u.substeps(),
                v.substeps()
            )));
        }
        Ok(())
    }

    /// x(tau, x0, u, v) via exact propagation of each substep.
    pub fn step(&self, x0: &[f64], u: &InputSignal, v: &InputSignal) -> Result<Vector> {
        self.check_signals(u, v)?;
        let mut x = x0.to_vec();
        for j in 0..self.n_substeps {
            let drift = self.phi.mul_vec(&x);
            let du = self.gamma_b.mul_vec(&u.values[j]);
            let dv = self.gamma_g.mul_vec(&v.values[j]);
            x = vec_add(&vec_add(&drift, &du), &dv);
        }
        Ok(x)
    }

    /// Dense sampling at >= `dense` points per period; the grid refines each
    /// input substep uniformly so every dense step is still exact.
    pub fn dense_simulate(
        &self,
        sys: &LinearSystem,
        x0: &[f64],
        u: &InputSignal,
        v: &InputSignal,
        dense: usize,
    ) -> Result<DenseTrajectory> {
        self.check_signals(u, v)?;
        let refine = dense.div_ceil(self.n_substeps).max(1);
        let hd = self.tau / (self.n_substeps * refine) as f64;
        let (phi_d, gb_d) = zoh_substep(&sys.a, &sys.b, hd)?;
        let (_, gg_d) = zoh_substep(&sys.a, &sys.g, hd)?;

        // guard box: bounding box of X inflated by 10% of its radius
        let guard: Vec<(f64, f64)> = sys
            .x_space
            .bbox()
            .iter()
            .map(|(lo, hi)| {
                let pad = 0.1 * sys.x_space.radius().max(1e-9);
                (lo - pad, hi + pad)
            })
            .collect();

        let mut times = vec![0.0];
        let mut states = vec![x0.to_vec()];
        let mut left_guard = !in_box(x0, &guard);
        let mut x = x0.to_vec();
        for j in 0..self.n_substeps {
            for r in 0..refine {
                let drift = phi_d.mul_vec(&x);
                let du = gb_d.mul_vec(&u.values[j]);
                let dv = gg_d.mul_vec(&v.values[j]);
                x = vec_add(&vec_add(&drift, &du), &dv);
                left_guard |= !in_box(&x, &guard);
                times.push(((j * refine + r + 1) as f64) * hd);
                states.push(x.clone());
            }
        }
        Ok(DenseTrajectory { times, states, h: hd, period: self.tau, left_guard })
    }
}

fn in_box(x: &[f64], b: &[(f64, f64)]) -> bool {
    x.iter().zip(b).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
}

/// One sampled transition of the plant: x(tau, x0, u, v).
pub fn step(sys: &LinearSystem, x0: &[f64], u: &InputSignal, v: &InputSignal) -> Result<Vector> {
    if (u.tau - v.tau).abs() > 1e-9 * u.tau.max(1.0) {
        return Err(Error::HorizonMismatch(u.tau, v.tau));
    }
    Stepper::new(sys, u.tau, u.substeps())?.step(x0, u, v)
}

/// Dense trajectory whose final state matches `step` up to integrator error.
pub fn dense_simulate(
    sys: &LinearSystem,
    x0: &[f64],
    u: &InputSignal,
    v: &InputSignal,
    dense: usize,
) -> Result<DenseTrajectory> {
    Stepper::new(sys, u.tau, u.substeps())?.dense_simulate(sys, x0, u, v, dense)
}

/// Report of the numeric stability surrogate check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub norms: Vec<(f64, f64)>,
    pub passed: bool,
    pub reason: String,
}

/// Default geometric grid of horizons for `check_stability`.
pub fn default_tau_grid() -> Vec<f64> {
    (0..28).map(|k| 0.05 * 1.3f64.powi(k)).collect()
}

/// Numeric surrogate for forward completeness + asymptotic stability:
/// |e^{A tau}| < 1 for some grid horizon and the norm profile is eventually
/// non-increasing along the grid. Sets the system's `stability_checked` flag
/// on success.
pub fn check_stability(sys: &mut LinearSystem, tau_grid: &[f64]) -> Result<StabilityReport> {
    if tau_grid.len() < 3 {
        return Err(Error::Invalid("stability grid needs at least 3 horizons".into()));
    }
    let mut norms = Vec::with_capacity(tau_grid.len());
    for &t in tau_grid {
        norms.push((t, sys.a.exp(t)?.inf_norm()));
    }
    let contracting = norms.iter().any(|(_, n)| *n < 1.0);
    // eventually decreasing: some suffix of length >= 2 is non-increasing
    let mut suffix_start = None;
    'outer: for i in 0..norms.len() - 1 {
        for w in norms[i..].windows(2) {
            if w[1].1 > w[0].1 * (1.0 + 1e-12) {
                continue 'outer;
            }
        }
        suffix_start = Some(i);
        break;
    }
    let passed = contracting && suffix_start.is_some();
    let reason = if passed {
        format!(
            "contraction at tau={:.6}, non-increasing from grid index {}",
            norms.iter().find(|(_, n)| *n < 1.0).unwrap().0,
            suffix_start.unwrap()
        )
    } else if !contracting {
        "no grid horizon with |e^{A tau}| < 1".into()
    } else {
        "norm profile never becomes non-increasing".into()
    };
    let report = StabilityReport { norms, passed, reason };
    if report.passed {
        sys.stability_checked = true;
        Ok(report)
    } else {
        Err(Error::Stability(report.reason))
    }
}

/// Upper bound on the inter-sample deviation and how it was obtained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaReport {
    pub delta: f64,
    pub grid_max: f64,
    pub lipschitz_inflation: f64,
    pub grid_points: usize,
}

/// Analytic bound delta on max_{t in [0, tau]} |x(t) - x(0)| over all
/// trajectories that stay in X:
///
///   delta(t) = |e^{At} - I| R_X + integral(0..t) |e^{As}| ds (|B| R_U + |G| R_V)
///
/// evaluated on a refining time grid; the returned value inflates the grid
/// maximum by a Lipschitz error term so it upper-bounds the true supremum.
pub fn delta_bound(sys: &LinearSystem, tau: f64) -> Result<DeltaReport> {
    if !sys.stability_checked {
        return Err(Error::Stability("delta_bound requires a stability-checked system".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::Invalid(format!("delta_bound needs tau > 0, got {tau}")));
    }
    let n = sys.dim();
    let r_x = sys.x_space.radius();
    let r_u = sys.u_space.radius();
    let r_v = sys.v_space.radius();
    let gain = sys.b.inf_norm() * r_u + sys.g.inf_norm() * r_v;
    let na = sys.a.inf_norm();

    let grid_points = 256usize;
    let h = tau / grid_points as f64;
    let id = Matrix::identity(n);

    let mut grid_max: f64 = 0.0;
    let mut integral_upper = 0.0; // rigorous upper bound of the norm integral
    let mut prev_norm = 1.0; // |e^{A*0}| = 1
    for k in 0..=grid_points {
        let t = k as f64 * h;
        let e = sys.a.exp(t)?;
        if k > 0 {
            // |e^{A(s)}| <= prev_norm * e^{|A| h} on the cell
            let cell = if na > 0.0 {
                prev_norm * ((na * h).exp() - 1.0) / na
            } else {
                prev_norm * h
            };
            integral_upper += cell;
        }
        let value = e.sub(&id).inf_norm() * r_x + integral_upper * gain;
        grid_max = grid_max.max(value);
        prev_norm = e.inf_norm();
    }
    // Lipschitz constant of delta(t): |A| e^{|A| tau} R_X + e^{|A| tau} gain
    let lip = (na * tau).exp() * (na * r_x + gain);
    let inflation = lip * h;
    Ok(DeltaReport {
        delta: grid_max + inflation,
        grid_max,
        lipschitz_inflation: inflation,
        grid_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{inf_norm, vec_sub};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_sys() -> LinearSystem {
        LinearSystem::new(
            Matrix::new(1, 1, vec![-1.0]).unwrap(),
            Matrix::new(1, 1, vec![1.0]).unwrap(),
            Matrix::new(1, 1, vec![1.0]).unwrap(),
            Polytope::interval(-2.0, 2.0).unwrap(),
            Polytope::interval(-1.0, 1.0).unwrap(),
            Polytope::interval(-0.1, 0.1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn step_scalar_forced_response() {
        let sys = scalar_sys();
        let tau = std::f64::consts::LN_2;
        let u = InputSignal::constant(tau, vec![1.0], 16).unwrap();
        let v = InputSignal::zero(tau, 1, 16).unwrap();
        let x = step(&sys, &[0.0], &u, &v).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-10, "got {}", x[0]);
    }

    #[test]
    fn step_scalar_free_decay() {
        let sys = scalar_sys();
        let tau = std::f64::consts::LN_2;
        let u = InputSignal::zero(tau, 1, 8).unwrap();
        let v = InputSignal::zero(tau, 1, 8).unwrap();
        let x = step(&sys, &[1.0], &u, &v).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-10);
        let z = step(&sys, &[0.0], &u, &v).unwrap();
        assert_eq!(z[0], 0.0);
    }

    #[test]
    fn step_rejects_horizon_mismatch() {
        let sys = scalar_sys();
        let u = InputSignal::zero(1.0, 1, 4).unwrap();
        let v = InputSignal::zero(2.0, 1, 4).unwrap();
        assert!(step(&sys, &[0.0], &u, &v).is_err());
    }

    #[test]
    fn dense_endpoints_match_step_on_random_instances() {
        let sys = scalar_sys();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let tau = rng.gen_range(0.1..1.0);
            let n = rng.gen_range(1..6);
            let u = InputSignal::new(tau, (0..n).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect()).unwrap();
            let v = InputSignal::new(tau, (0..n).map(|_| vec![rng.gen_range(-0.1..0.1)]).collect()).unwrap();
            let x0 = vec![rng.gen_range(-2.0..2.0)];
            let direct = step(&sys, &x0, &u, &v).unwrap();
            let traj = dense_simulate(&sys, &x0, &u, &v, 64).unwrap();
            assert!(dist(&direct, traj.final_state()) < 1e-9);
        }
    }

    #[test]
    fn dense_constant_zero_dynamics() {
        let sys = LinearSystem::new(
            Matrix::zeros(1, 1),
            Matrix::new(1, 1, vec![1.0]).unwrap(),
            Matrix::new(1, 1, vec![1.0]).unwrap(),
            Polytope::interval(-2.0, 2.0).unwrap(),
            Polytope::interval(-1.0, 1.0).unwrap(),
            Polytope::interval(-0.1, 0.1).unwrap(),
        )
        .unwrap();
        let u = InputSignal::zero(1.0, 1, 4).unwrap();
        let v = InputSignal::zero(1.0, 1, 4).unwrap();
        let traj = dense_simulate(&sys, &[0.7], &u, &v, 32).unwrap();
        for s in &traj.states {
            assert_eq!(s[0], 0.7);
        }
    }

    #[test]
    fn superposition_of_three_parts() {
        let sys = scalar_sys();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let tau = rng.gen_range(0.2..0.8);
            let n = 4;
            let u = InputSignal::new(tau, (0..n).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect()).unwrap();
            let v = InputSignal::new(tau, (0..n).map(|_| vec![rng.gen_range(-0.1..0.1)]).collect()).unwrap();
            let zero_u = InputSignal::zero(tau, 1, n).unwrap();
            let x0 = vec![rng.gen_range(-2.0..2.0)];
            let full = step(&sys, &x0, &u, &v).unwrap();
            let free = step(&sys, &x0, &zero_u, &zero_u).unwrap();
            let forced_u = step(&sys, &[0.0], &u, &zero_u).unwrap();
            let forced_v = step(&sys, &[0.0], &zero_u, &v).unwrap();
            let sum = vec_add(&vec_add(&free, &forced_u), &forced_v);
            assert!(dist(&full, &sum) <= 1e-8);
        }
    }

    #[test]
    fn step_affine_in_initial_state() {
        // finite-difference check of the e^{A tau} factor
        let sys = scalar_sys();
        let tau = 0.4;
        let u = InputSignal::zero(tau, 1, 8).unwrap();
        let v = InputSignal::zero(tau, 1, 8).unwrap();
        let e = sys.a.exp(tau).unwrap();
        let x1 = step(&sys, &[1.0], &u, &v).unwrap();
        let x2 = step(&sys, &[1.5], &u, &v).unwrap();
        let diff = vec_sub(&x2, &x1);
        assert!((diff[0] / 0.5 - e.get(0, 0)).abs() < 1e-10);
    }

    #[test]
    fn stability_check_examples() {
        let mut sys = scalar_sys();
        let rep = check_stability(&mut sys, &default_tau_grid()).unwrap();
        assert!(rep.passed);
        assert!(sys.stability_checked());

        let mut marginal = LinearSystem::new(
            Matrix::zeros(1, 1),
            Matrix::new(1, 1, vec![1.0]).unwrap(),
            Matrix::new(1, 1, vec![1.0]).unwrap(),
            Polytope::interval(-2.0, 2.0).unwrap(),
            Polytope::interval(-1.0, 1.0).unwrap(),
            Polytope::interval(-0.1, 0.1).unwrap(),
        )
        .unwrap();
        assert!(check_stability(&mut marginal, &default_tau_grid()).is_err());
        assert!(!marginal.stability_checked());

        // eigenvalues -1 and -2, but the matrix is non-normal
        let mut planar = LinearSystem::new(
            Matrix::from_rows(&[vec![0.0, 1.0], vec![-2.0, -3.0]]).unwrap(),
            Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
            Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
            Polytope::bounding(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap(),
            Polytope::interval(-1.0, 1.0).unwrap(),
            Polytope::interval(-0.1, 0.1).unwrap(),
        )
        .unwrap();
        let rep = check_stability(&mut planar, &default_tau_grid()).unwrap();
        assert!(rep.passed);
    }

    #[test]
    fn delta_bound_scalar_closed_form() {
        let mut sys = scalar_sys();
        check_stability(&mut sys, &default_tau_grid()).unwrap();
        let rep = delta_bound(&sys, 0.1).unwrap();
        // closed form: (1 - e^{-0.1}) * 2 + (1 - e^{-0.1}) * 1.1
        let exact = (1.0 - (-0.1f64).exp()) * 2.0 + (1.0 - (-0.1f64).exp()) * 1.1;
        assert!(rep.delta >= exact - 1e-9, "bound {} below exact {exact}", rep.delta);
        assert!(rep.delta <= exact * 1.02, "bound {} too loose vs {exact}", rep.delta);
    }

    #[test]
    fn delta_bound_vanishes_with_tau() {
        let mut sys = scalar_sys();
        check_stability(&mut sys, &default_tau_grid()).unwrap();
        let mut prev = f64::INFINITY;
        for tau in [0.4, 0.2, 0.1, 0.05, 0.01] {
            let d = delta_bound(&sys, tau).unwrap().delta;
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn delta_bound_dominates_empirical_deviation() {
        let mut sys = scalar_sys();
        check_stability(&mut sys, &default_tau_grid()).unwrap();
        let tau = 0.3;
        let delta = delta_bound(&sys, tau).unwrap().delta;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let x0 = vec![rng.gen_range(-2.0..2.0)];
            let n = 4;
            let u = InputSignal::new(tau, (0..n).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect()).unwrap();
            let v = InputSignal::new(tau, (0..n).map(|_| vec![rng.gen_range(-0.1..0.1)]).collect()).unwrap();
            let traj = dense_simulate(&sys, &x0, &u, &v, 32).unwrap();
            for s in &traj.states {
                worst = worst.max(dist(s, &x0));
            }
        }
        assert!(worst <= delta, "empirical {worst} exceeds bound {delta}");
        // zero dynamics stay at zero
        let u = InputSignal::zero(tau, 1, 4).unwrap();
        let traj = dense_simulate(&sys, &[0.0], &u, &u, 32).unwrap();
        for s in &traj.states {
            assert!(inf_norm(s) <= delta);
        }
    }
}
