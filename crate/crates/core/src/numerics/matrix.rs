use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column vector, stored as a plain slice of reals.
pub type Vector = Vec<f64>;

/// Relative tolerance of the matrix exponential.
pub const EXP_TOL: f64 = 1e-12;

/// Max over entries of |x_i|.
pub fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Sum of |x_i| (the dual norm of the infinity norm).
pub fn l1_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn vec_add(a: &[f64], b: &[f64]) -> Vector {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn vec_sub(a: &[f64], b: &[f64]) -> Vector {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vec_scale(a: &[f64], s: f64) -> Vector {
    a.iter().map(|x| x * s).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Distance in the infinity norm.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("matrix {rows}x{cols} is empty")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("matrix entry not finite".into()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
        let r = rows.len();
        let c = rows.first().map(|v| v.len()).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        Matrix::new(r, c, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Induced infinity norm: max absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| l1_norm(self.row(i)))
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vector {
        debug_assert_eq!(self.cols, x.len());
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// e^{At} for square A and t >= 0, by scaling-and-squaring around a
    /// truncated Taylor core. Relative accuracy is governed by `EXP_TOL`.
    pub fn exp(&self, t: f64) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::Dimension(format!(
                "matrix exponential needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !(t >= 0.0) {
            return Err(Error::Invalid(format!("matrix exponential needs t >= 0, got {t}")));
        }
        let n = self.rows;
        let norm = self.inf_norm() * t;
        // Scale so the Taylor argument has norm <= 0.5.
        let mut squarings = 0u32;
        let mut scaled_norm = norm;
        while scaled_norm > 0.5 {
            scaled_norm *= 0.5;
            squarings += 1;
        }
        let h = t / f64::powi(2.0, squarings as i32);
        let a_h = self.scale(h);

        let mut sum = Matrix::identity(n);
        let mut term = Matrix::identity(n);
        for k in 1..=40 {
            term = term.mul(&a_h).scale(1.0 / k as f64);
            sum = sum.add(&term);
            if term.inf_norm() <= 1e-18 * sum.inf_norm().max(1.0) {
                break;
            }
        }
        for _ in 0..squarings {
            sum = sum.mul(&sum);
        }
        Ok(sum)
    }
}

/// Solve A z = b for square A by Gaussian elimination with partial
/// pivoting. Returns None when the pivot degenerates.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Option<Vector> {
    let n = a.rows();
    if !a.is_square() || b.len() != n {
        return None;
    }
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a.row(i).to_vec();
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()
        })?;
        if m[pivot][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, pivot);
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..=n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// Per-substep zero-order-hold pair: x+ = phi x + gamma u for a constant u
/// held over one substep of length h. Computed from the exponential of the
/// augmented matrix [[A, B], [0, 0]], so the substep integral carries only
/// exponential-level error.
pub fn zoh_substep(a: &Matrix, b: &Matrix, h: f64) -> Result<(Matrix, Matrix)> {
    let n = a.rows();
    let m = b.cols();
    if !a.is_square() || b.rows() != n {
        return Err(Error::Dimension(format!(
            "zoh needs A {n}x{n} and B {n}xm, got A {}x{} B {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let mut aug = Matrix::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..n {
            aug.set(i, j, a.get(i, j));
        }
        for j in 0..m {
            aug.set(i, n + j, b.get(i, j));
        }
    }
    let e = aug.exp(h)?;
    let mut phi = Matrix::zeros(n, n);
    let mut gamma = Matrix::zeros(n, m);
    for i in 0..n {
        for j in 0..n {
            phi.set(i, j, e.get(i, j));
        }
        for j in 0..m {
            gamma.set(i, j, e.get(i, n + j));
        }
    }
    Ok((phi, gamma))
}

/// Matrix mapping a constant input u on [0, tau) to the reached state
/// integral(0..tau) e^{A(tau-s)} B ds * u, accumulated over N substeps.
///
/// Substep integrals come from `zoh_substep`, so the dominant error of the
/// overall pipeline is the piecewise-constant signal class itself; the
/// conservative envelope O(tau^2/N) * |A| * |B| * e^{|A| tau} of a generic
/// N-substep quadrature also covers this computation.
pub fn zoh_gain(a: &Matrix, b: &Matrix, tau: f64, n_substeps: usize) -> Result<Matrix> {
    if !(tau > 0.0) {
        return Err(Error::Invalid(format!("zoh_gain needs tau > 0, got {tau}")));
    }
    if n_substeps == 0 {
        return Err(Error::Invalid("zoh_gain needs at least one substep".into()));
    }
    let h = tau / n_substeps as f64;
    let (phi, gamma) = zoh_substep(a, b, h)?;
    // sum_{j=0}^{N-1} phi^j gamma
    let mut acc = Matrix::zeros(a.rows(), b.cols());
    let mut p = Matrix::identity(a.rows());
    for _ in 0..n_substeps {
        acc = acc.add(&p.mul(&gamma));
        p = phi.mul(&p);
    }
    Ok(acc)
}

/// Conservative bound on the reachable-point gap between an arbitrary
/// measurable input of radius `input_radius` and its N-substep
/// piecewise-constant surrogate: (tau^2 / N) * |A| * |B| * e^{|A| tau} * r.
pub fn zoh_refinement_bound(a: &Matrix, b: &Matrix, tau: f64, n_substeps: usize, input_radius: f64) -> f64 {
    let na = a.inf_norm();
    (tau * tau / n_substeps as f64) * na * b.inf_norm() * (na * tau).exp() * input_radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Truncated power-series oracle, independent of the scaling-and-squaring path.
    fn exp_series(a: &Matrix, t: f64, terms: usize) -> Matrix {
        let n = a.rows();
        let at = a.scale(t);
        let mut sum = Matrix::identity(n);
        let mut term = Matrix::identity(n);
        for k in 1..=terms {
            term = term.mul(&at).scale(1.0 / k as f64);
            sum = sum.add(&term);
        }
        sum
    }

    #[test]
    fn inf_norm_vector_definition() {
        assert_eq!(inf_norm(&[1.0, -3.0, 2.0]), 3.0);
    }

    #[test]
    fn inf_norm_matrix_row_sum() {
        let m = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(m.inf_norm(), 3.0);
        assert_eq!(Matrix::zeros(3, 2).inf_norm(), 0.0);
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let z = Matrix::zeros(3, 3);
        let e = z.exp(5.0).unwrap();
        assert_eq!(e, Matrix::identity(3));
    }

    #[test]
    fn exp_scalar_decay_matches_series_oracle() {
        let a = Matrix::new(1, 1, vec![-1.0]).unwrap();
        let t = std::f64::consts::LN_2;
        let got = a.exp(t).unwrap().get(0, 0);
        let oracle = exp_series(&a, t, 35).get(0, 0);
        assert!((got - 0.5).abs() < 1e-12, "got {got}");
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn exp_nilpotent_terminates_exactly() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let e = a.exp(1.0).unwrap();
        let want = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((e.get(i, j) - want.get(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn exp_rejects_non_square() {
        let a = Matrix::zeros(2, 3);
        assert!(a.exp(1.0).is_err());
    }

    #[test]
    fn zoh_gain_scalar_closed_form() {
        let a = Matrix::new(1, 1, vec![-1.0]).unwrap();
        let b = Matrix::new(1, 1, vec![1.0]).unwrap();
        let tau = std::f64::consts::LN_2;
        let g = zoh_gain(&a, &b, tau, 64).unwrap();
        // closed form: 1 - e^{-tau} = 0.5
        assert!((g.get(0, 0) - 0.5).abs() < 1e-10, "got {}", g.get(0, 0));

        // quadrature oracle: fine Riemann sum of e^{A(tau-s)} B
        let steps = 20000;
        let h = tau / steps as f64;
        let mut acc = 0.0;
        for i in 0..steps {
            let s = (i as f64 + 0.5) * h;
            acc += (-(tau - s)).exp() * h;
        }
        assert!((g.get(0, 0) - acc).abs() < 1e-7);
    }

    #[test]
    fn zoh_gain_zero_dynamics_integrates_identity() {
        let a = Matrix::zeros(2, 2);
        let b = Matrix::identity(2);
        let g = zoh_gain(&a, &b, 2.0, 8).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 2.0 } else { 0.0 };
                assert!((g.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zoh_gain_zero_input_matrix() {
        let a = Matrix::new(1, 1, vec![-0.3]).unwrap();
        let b = Matrix::new(1, 1, vec![0.0]).unwrap();
        let g = zoh_gain(&a, &b, 1.0, 4).unwrap();
        assert_eq!(g.get(0, 0), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exp_semigroup(entries in proptest::collection::vec(-1.5f64..1.5, 4),
                         s in 0.01f64..1.0, t in 0.01f64..1.0) {
            let a = Matrix::new(2, 2, entries).unwrap();
            let est = a.exp(s + t).unwrap();
            let prod = a.exp(s).unwrap().mul(&a.exp(t).unwrap());
            let err = est.sub(&prod).inf_norm();
            prop_assert!(err <= 10.0 * EXP_TOL * est.inf_norm().max(1.0) + 1e-13);
        }
    }
}
