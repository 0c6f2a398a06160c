//! Dense two-phase simplex for the small linear programs this crate needs:
//! infinity-norm distances to vertex hulls and minimum-residual input
//! realization. Problems have tens of variables, so a tableau method with
//! Bland's rule is adequate and fully deterministic.

use crate::error::{Error, Result};
use crate::numerics::matrix::{Matrix, Vector};

const PIVOT_EPS: f64 = 1e-10;
const FEAS_EPS: f64 = 1e-7;

/// Minimize c^T z subject to A z = b, z >= 0.
/// Rows of `a` must all have length `c.len()`.
pub fn solve_min(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = a.len();
    let n = c.len();
    debug_assert_eq!(b.len(), m);

    // Tableau columns: n structural + m artificial + rhs.
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m];
    for (i, row) in a.iter().enumerate() {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = flip * row[j];
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = flip * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Phase 1: minimize the sum of artificials.
    let mut cost1 = vec![0.0; width];
    for j in n..n + m {
        cost1[j] = 1.0;
    }
    let obj1 = run_simplex(&mut t, &mut basis, &cost1, n + m)?;
    if obj1 > FEAS_EPS {
        return Err(Error::Infeasible(format!("phase-1 objective {obj1}")));
    }
    // Drive remaining artificials out of the basis where possible.
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[i][j].abs() > PIVOT_EPS) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }

    // Phase 2 over structural columns only.
    let mut cost2 = vec![0.0; width];
    cost2[..n].copy_from_slice(c);
    let obj2 = run_simplex(&mut t, &mut basis, &cost2, n)?;

    let mut z = vec![0.0; n];
    for (i, &bj) in basis.iter().enumerate() {
        if bj < n {
            z[bj] = t[i][width - 1];
        }
    }
    Ok((z, obj2))
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let width = t[0].len();
    let p = t[row][col];
    for v in t[row].iter_mut() {
        *v /= p;
    }
    for i in 0..t.len() {
        if i == row {
            continue;
        }
        let f = t[i][col];
        if f == 0.0 {
            continue;
        }
        for j in 0..width {
            t[i][j] -= f * t[row][j];
        }
    }
    basis[row] = col;
}

/// Simplex iterations with Bland's rule over the first `active` columns.
/// Returns the final objective value.
fn run_simplex(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], active: usize) -> Result<f64> {
    let m = t.len();
    let width = t[0].len();
    let reduced = |t: &[Vec<f64>], basis: &[usize], j: usize| -> f64 {
        let mut r = cost[j];
        for i in 0..m {
            r -= cost[basis[i]] * t[i][j];
        }
        r
    };
    let max_iter = 200 * (m + active + 1);
    for _ in 0..max_iter {
        // Bland: entering column = smallest index with negative reduced cost.
        let mut entering = None;
        for j in 0..active {
            if basis.contains(&j) {
                continue;
            }
            if reduced(t, basis, j) < -PIVOT_EPS {
                entering = Some(j);
                break;
            }
        }
        let Some(col) = entering else {
            let mut obj = 0.0;
            for i in 0..m {
                obj += cost[basis[i]] * t[i][width - 1];
            }
            return Ok(obj);
        };
        // Ratio test; ties broken by smallest basis index (Bland).
        let mut row: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][col] > PIVOT_EPS {
                let ratio = t[i][width - 1] / t[i][col];
                let better = ratio < best - 1e-12
                    || ((ratio - best).abs() <= 1e-12
                        && row.map_or(true, |r| basis[i] < basis[r]));
                if better {
                    best = ratio;
                    row = Some(i);
                }
            }
        }
        let Some(row) = row else {
            return Err(Error::Infeasible("unbounded linear program".into()));
        };
        pivot(t, basis, row, col);
    }
    Err(Error::Infeasible("simplex iteration cap reached".into()))
}

/// Infinity-norm distance from `x` to the convex hull of `verts`.
///
/// LP formulation over hull weights lambda and radius t:
///   sum_j lambda_j v_j[i] + t - s1_i = x_i
///   sum_j lambda_j v_j[i] - t + s2_i = x_i
///   sum_j lambda_j = 1,   lambda, t, s1, s2 >= 0,  minimize t.
pub fn dist_inf_to_hull(x: &[f64], verts: &[Vector]) -> Result<f64> {
    let dim = x.len();
    let m = verts.len();
    if m == 0 {
        return Err(Error::Geometry("distance to empty vertex set".into()));
    }
    // variables: lambda (m), t (1), s1 (dim), s2 (dim)
    let nvars = m + 1 + 2 * dim;
    let mut a = Vec::with_capacity(2 * dim + 1);
    let mut b = Vec::with_capacity(2 * dim + 1);
    for i in 0..dim {
        let mut r1 = vec![0.0; nvars];
        let mut r2 = vec![0.0; nvars];
        for (j, v) in verts.iter().enumerate() {
            r1[j] = v[i];
            r2[j] = v[i];
        }
        r1[m] = 1.0;
        r1[m + 1 + i] = -1.0;
        r2[m] = -1.0;
        r2[m + 1 + dim + i] = 1.0;
        a.push(r1);
        b.push(x[i]);
        a.push(r2);
        b.push(x[i]);
    }
    let mut simplex_row = vec![0.0; nvars];
    simplex_row[..m].iter_mut().for_each(|v| *v = 1.0);
    a.push(simplex_row);
    b.push(1.0);

    let mut cost = vec![0.0; nvars];
    cost[m] = 1.0;
    let (_, obj) = solve_min(&cost, &a, &b)?;
    Ok(obj.max(0.0))
}

/// Point of conv(verts) nearest to `x` in the infinity norm, with the
/// distance. Same program as `dist_inf_to_hull`, keeping the hull weights.
pub fn nearest_in_hull(x: &[f64], verts: &[Vector]) -> Result<(Vector, f64)> {
    let dim = x.len();
    let m = verts.len();
    if m == 0 {
        return Err(Error::Geometry("projection onto empty vertex set".into()));
    }
    let nvars = m + 1 + 2 * dim;
    let mut a = Vec::with_capacity(2 * dim + 1);
    let mut b = Vec::with_capacity(2 * dim + 1);
    for i in 0..dim {
        let mut r1 = vec![0.0; nvars];
        let mut r2 = vec![0.0; nvars];
        for (j, v) in verts.iter().enumerate() {
            r1[j] = v[i];
            r2[j] = v[i];
        }
        r1[m] = 1.0;
        r1[m + 1 + i] = -1.0;
        r2[m] = -1.0;
        r2[m + 1 + dim + i] = 1.0;
        a.push(r1);
        b.push(x[i]);
        a.push(r2);
        b.push(x[i]);
    }
    let mut simplex_row = vec![0.0; nvars];
    simplex_row[..m].iter_mut().for_each(|v| *v = 1.0);
    a.push(simplex_row);
    b.push(1.0);
    let mut cost = vec![0.0; nvars];
    cost[m] = 1.0;
    let (z, obj) = solve_min(&cost, &a, &b)?;
    let mut y = vec![0.0; dim];
    for (j, v) in verts.iter().enumerate() {
        for i in 0..dim {
            y[i] += z[j] * v[i];
        }
    }
    Ok((y, obj.max(0.0)))
}

/// Choose per-substep inputs u_j in conv(u_verts) minimizing
/// || sum_j maps[j] u_j - target ||_inf. Returns the substep inputs and the
/// achieved residual.
pub fn min_residual_signal(
    maps: &[Matrix],
    u_verts: &[Vector],
    target: &[f64],
) -> Result<(Vec<Vector>, f64)> {
    let dim = target.len();
    let n_sub = maps.len();
    let k = u_verts.len();
    if n_sub == 0 || k == 0 {
        return Err(Error::Geometry("empty signal realization problem".into()));
    }
    // Images of each vertex under each substep map.
    let images: Vec<Vec<Vector>> = maps
        .iter()
        .map(|m| u_verts.iter().map(|v| m.mul_vec(v)).collect())
        .collect();

    // variables: lambda_{j,k} (n_sub*k), t, s1 (dim), s2 (dim)
    let nvars = n_sub * k + 1 + 2 * dim;
    let t_idx = n_sub * k;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..dim {
        let mut r1 = vec![0.0; nvars];
        let mut r2 = vec![0.0; nvars];
        for j in 0..n_sub {
            for l in 0..k {
                r1[j * k + l] = images[j][l][i];
                r2[j * k + l] = images[j][l][i];
            }
        }
        r1[t_idx] = 1.0;
        r1[t_idx + 1 + i] = -1.0;
        r2[t_idx] = -1.0;
        r2[t_idx + 1 + dim + i] = 1.0;
        a.push(r1);
        b.push(target[i]);
        a.push(r2);
        b.push(target[i]);
    }
    for j in 0..n_sub {
        let mut row = vec![0.0; nvars];
        for l in 0..k {
            row[j * k + l] = 1.0;
        }
        a.push(row);
        b.push(1.0);
    }
    let mut cost = vec![0.0; nvars];
    cost[t_idx] = 1.0;
    let (z, obj) = solve_min(&cost, &a, &b)?;

    let u_dim = u_verts[0].len();
    let mut inputs = Vec::with_capacity(n_sub);
    for j in 0..n_sub {
        let mut u = vec![0.0; u_dim];
        for l in 0..k {
            let w = z[j * k + l];
            for d in 0..u_dim {
                u[d] += w * u_verts[l][d];
            }
        }
        inputs.push(u);
    }
    Ok((inputs, obj.max(0.0)))
}
