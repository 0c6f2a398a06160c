use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::lp::dist_inf_to_hull;
use crate::numerics::matrix::{dist, dot, l1_norm, Vector};

/// Absolute tolerance for membership and boundary tests.
pub const GEOM_TOL: f64 = 1e-9;

/// Half-space row c^T x + d <= 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub c: Vector,
    pub d: f64,
}

/// Bounded convex polytope, vertex-first. The half-space form is derived at
/// construction for dimensions 1 and 2 (the scales this toolchain targets);
/// higher dimensions answer membership through hull linear programs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polytope {
    dim: usize,
    vertices: Vec<Vector>,
    #[serde(skip)]
    hrep: Option<Vec<HalfSpace>>,
}

impl<'de> Deserialize<'de> for Polytope {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            dim: usize,
            vertices: Vec<Vector>,
        }
        let raw = Raw::deserialize(deserializer)?;
        if raw.vertices.iter().any(|v| v.len() != raw.dim) {
            return Err(serde::de::Error::custom("polytope vertex dimension mismatch"));
        }
        Polytope::new(raw.vertices).map_err(serde::de::Error::custom)
    }
}

impl Polytope {
    pub fn new(vertices: Vec<Vector>) -> Result<Polytope> {
        let dim = vertices.first().map(|v| v.len()).unwrap_or(0);
        if vertices.is_empty() || dim == 0 {
            return Err(Error::Geometry("polytope needs at least one vertex".into()));
        }
        if vertices.iter().any(|v| v.len() != dim) {
            return Err(Error::Geometry("polytope vertices have mixed dimensions".into()));
        }
        if vertices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Geometry("polytope vertex not finite".into()));
        }
        let hrep = derive_hrep(dim, &vertices);
        Ok(Polytope { dim, vertices, hrep })
    }

    /// Axis-aligned box given per-dimension (lo, hi) bounds.
    pub fn bounding(bounds: &[(f64, f64)]) -> Result<Polytope> {
        let dim = bounds.len();
        if bounds.iter().any(|(lo, hi)| lo > hi) {
            return Err(Error::Geometry("box with lo > hi".into()));
        }
        let mut verts = Vec::with_capacity(1 << dim);
        for mask in 0..(1usize << dim) {
            let v: Vector = (0..dim)
                .map(|i| if mask >> i & 1 == 1 { bounds[i].1 } else { bounds[i].0 })
                .collect();
            verts.push(v);
        }
        Polytope::new(verts)
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Polytope> {
        Polytope::bounding(&[(lo, hi)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }

    pub fn hrep(&self) -> Option<&[HalfSpace]> {
        self.hrep.as_deref()
    }

    /// Max infinity norm over vertices; equals sup_{x in P} |x| by convexity.
    pub fn radius(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.iter().fold(0.0f64, |m, x| m.max(x.abs())))
            .fold(0.0, f64::max)
    }

    pub fn bbox(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|i| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for v in &self.vertices {
                    lo = lo.min(v[i]);
                    hi = hi.max(v[i]);
                }
                (lo, hi)
            })
            .collect()
    }

    /// Closed membership with `tol` slack.
    pub fn contains_tol(&self, x: &[f64], tol: f64) -> bool {
        debug_assert_eq!(x.len(), self.dim);
        match (&self.hrep, self.dim) {
            (_, 1) => {
                let (lo, hi) = self.bbox()[0];
                x[0] >= lo - tol && x[0] <= hi + tol
            }
            (Some(rows), _) => rows.iter().all(|h| dot(&h.c, x) + h.d <= tol),
            (None, _) => self.distance(x).map(|d| d <= tol).unwrap_or(false),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_tol(x, GEOM_TOL)
    }

    /// Infinity-norm distance from x to the polytope.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        if self.dim == 1 {
            let (lo, hi) = self.bbox()[0];
            let v = x[0];
            return Ok(if v < lo {
                lo - v
            } else if v > hi {
                v - hi
            } else {
                0.0
            });
        }
        dist_inf_to_hull(x, &self.vertices)
    }

    /// Vertices of the negated set -P.
    pub fn negated(&self) -> Polytope {
        let verts = self.vertices.iter().map(|v| v.iter().map(|x| -x).collect()).collect();
        Polytope::new(verts).expect("negation preserves validity")
    }
}

/// H-representation for 1-D intervals and full-dimensional 2-D hulls.
fn derive_hrep(dim: usize, vertices: &[Vector]) -> Option<Vec<HalfSpace>> {
    match dim {
        1 => {
            let lo = vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
            let hi = vertices.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
            Some(vec![
                HalfSpace { c: vec![1.0], d: -hi },
                HalfSpace { c: vec![-1.0], d: lo },
            ])
        }
        2 => {
            let hull = convex_hull_2d(vertices);
            if hull.len() < 3 {
                return None; // degenerate, fall back to LP membership
            }
            let mut rows = Vec::with_capacity(hull.len());
            for i in 0..hull.len() {
                let a = &hull[i];
                let b = &hull[(i + 1) % hull.len()];
                // outward normal of CCW edge a->b
                let c = vec![b[1] - a[1], a[0] - b[0]];
                let d = -(c[0] * a[0] + c[1] * a[1]);
                let scale = l1_norm(&c);
                if scale < GEOM_TOL {
                    continue;
                }
                rows.push(HalfSpace {
                    c: c.iter().map(|v| v / scale).collect(),
                    d: d / scale,
                });
            }
            Some(rows)
        }
        _ => None,
    }
}

/// Andrew's monotone chain, counter-clockwise orientation. Collapses
/// duplicate and collinear points within GEOM_TOL.
pub fn convex_hull_2d(points: &[Vector]) -> Vec<Vector> {
    let mut pts: Vec<Vector> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup_by(|a, b| dist(a, b) <= GEOM_TOL);
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: &Vector, a: &Vector, b: &Vector| -> f64 {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<Vector> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 1e-12 {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Vector> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 1e-12 {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Quantization grid of pitch mu (or eta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub pitch: f64,
    pub dim: usize,
}

impl GridSpec {
    pub fn new(pitch: f64, dim: usize) -> Result<GridSpec> {
        if !(pitch > 0.0) {
            return Err(Error::Invalid(format!("grid pitch must be positive, got {pitch}")));
        }
        if dim == 0 {
            return Err(Error::Dimension("grid dimension must be positive".into()));
        }
        Ok(GridSpec { pitch, dim })
    }

    pub fn point(&self, key: &[i64]) -> Vector {
        key.iter().map(|&k| k as f64 * self.pitch).collect()
    }

    pub fn nearest_key(&self, x: &[f64]) -> Vec<i64> {
        x.iter().map(|v| (v / self.pitch).round() as i64).collect()
    }
}

/// Integer keys of the lattice points of pitch `pitch` inside `p`
/// (closed membership at GEOM_TOL), ascending lexicographic order.
pub fn grid_keys(p: &Polytope, pitch: f64) -> Result<Vec<Vec<i64>>> {
    if !(pitch > 0.0) {
        return Err(Error::Invalid(format!("grid pitch must be positive, got {pitch}")));
    }
    let bbox = p.bbox();
    let ranges: Vec<(i64, i64)> = bbox
        .iter()
        .map(|(lo, hi)| {
            (
                ((lo - GEOM_TOL) / pitch).ceil() as i64,
                ((hi + GEOM_TOL) / pitch).floor() as i64,
            )
        })
        .collect();
    if ranges.iter().any(|(a, b)| a > b) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut key: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    'outer: loop {
        let x: Vector = key.iter().map(|&k| k as f64 * pitch).collect();
        if p.contains(&x) {
            out.push(key.clone());
        }
        // odometer increment, last coordinate fastest => lexicographic order
        for i in (0..key.len()).rev() {
            if key[i] < ranges[i].1 {
                key[i] += 1;
                for (j, k) in key.iter_mut().enumerate().skip(i + 1) {
                    *k = ranges[j].0;
                }
                continue 'outer;
            }
        }
        break;
    }
    Ok(out)
}

/// Lattice points of pitch `pitch` inside `p`, ascending lexicographic order.
pub fn grid_points(p: &Polytope, pitch: f64) -> Result<Vec<Vector>> {
    Ok(grid_keys(p, pitch)?
        .iter()
        .map(|k| k.iter().map(|&i| i as f64 * pitch).collect())
        .collect())
}

/// Hausdorff pseudo-metric between nonempty finite sets under the
/// infinity-norm metric: max of the two directed sup-inf distances.
pub fn hausdorff(s1: &[Vector], s2: &[Vector]) -> Result<f64> {
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::Geometry("hausdorff distance of an empty set".into()));
    }
    let directed = |a: &[Vector], b: &[Vector]| -> f64 {
        a.iter()
            .map(|x| b.iter().map(|y| dist(x, y)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(directed(s1, s2).max(directed(s2, s1)))
}

/// Closed infinity-ball inclusion in the open half-space {x : c^T x + d < 0}:
/// B_r(x) subset of p iff c^T x + d + r |c|_1 < 0.
pub fn ball_in_halfspace(x: &[f64], r: f64, c: &[f64], d: f64) -> bool {
    debug_assert!(r >= 0.0);
    dot(c, x) + d + r * l1_norm(c) < 0.0
}

/// Disjointness of the closed infinity-ball from the open half-space:
/// B_r(x) disjoint from p iff c^T x + d - r |c|_1 >= 0.
pub fn ball_disjoint_halfspace(x: &[f64], r: f64, c: &[f64], d: f64) -> bool {
    debug_assert!(r >= 0.0);
    dot(c, x) + d - r * l1_norm(c) >= 0.0
}

/// Signed boundary margin of the ball predicate pair; values within GEOM_TOL
/// of zero are knife-edge and get flagged as marginal by report layers.
pub fn ball_margin(x: &[f64], r: f64, c: &[f64], d: f64, negated: bool) -> f64 {
    if negated {
        dot(c, x) + d - r * l1_norm(c)
    } else {
        -(dot(c, x) + d + r * l1_norm(c))
    }
}

/// Keep only the extreme points of a finite point set (the vertices of its
/// convex hull). Dimensions 1 and 2 use direct hulls; higher dimensions use
/// per-point hull-membership linear programs.
pub fn extreme_points(points: &[Vector]) -> Result<Vec<Vector>> {
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let dim = points[0].len();
    let mut pts: Vec<Vector> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup_by(|a, b| dist(a, b) <= GEOM_TOL);
    match dim {
        1 => {
            let lo = pts.first().unwrap().clone();
            let hi = pts.last().unwrap().clone();
            Ok(if dist(&lo, &hi) <= GEOM_TOL { vec![lo] } else { vec![lo, hi] })
        }
        2 => {
            let mut hull = convex_hull_2d(&pts);
            if hull.is_empty() {
                hull = pts;
            }
            hull.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
            Ok(hull)
        }
        _ => {
            let mut keep = Vec::new();
            for (i, p) in pts.iter().enumerate() {
                let others: Vec<Vector> = pts
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, v)| v.clone())
                    .collect();
                if others.is_empty() || dist_inf_to_hull(p, &others)? > GEOM_TOL {
                    keep.push(p.clone());
                }
            }
            Ok(keep)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_points_interval() {
        let p = Polytope::interval(-1.0, 1.0).unwrap();
        let pts = grid_points(&p, 1.0).unwrap();
        assert_eq!(pts, vec![vec![-1.0], vec![0.0], vec![1.0]]);
    }

    #[test]
    fn grid_points_square_count() {
        let p = Polytope::bounding(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let pts = grid_points(&p, 1.0).unwrap();
        assert_eq!(pts.len(), 9);
        // lexicographic order
        assert_eq!(pts[0], vec![-1.0, -1.0]);
        assert_eq!(pts[8], vec![1.0, 1.0]);
    }

    #[test]
    fn grid_points_empty_when_no_multiples_inside() {
        let p = Polytope::interval(0.1, 0.9).unwrap();
        assert!(grid_points(&p, 1.0).unwrap().is_empty());
    }

    #[test]
    fn hausdorff_examples() {
        let z = vec![vec![0.0]];
        assert_eq!(hausdorff(&z, &z).unwrap(), 0.0);
        assert!((hausdorff(&z, &[vec![0.3]]).unwrap() - 0.3).abs() < 1e-15);
        // directed terms: sup over {0,1} of dist to {0} = 1; other direction 0
        let s1 = vec![vec![0.0], vec![1.0]];
        assert_eq!(hausdorff(&s1, &z).unwrap(), 1.0);
        assert!(hausdorff(&[], &z).is_err());
    }

    #[test]
    fn ball_halfspace_examples() {
        // half-space x < 1 encoded as c=1, d=-1
        assert!(ball_in_halfspace(&[0.4], 0.5, &[1.0], -1.0));
        assert!(!ball_in_halfspace(&[0.6], 0.5, &[1.0], -1.0));
        // radius 0 reduces to strict membership
        assert!(ball_in_halfspace(&[0.999], 0.0, &[1.0], -1.0));
        assert!(!ball_in_halfspace(&[1.0], 0.0, &[1.0], -1.0));
        assert!(ball_disjoint_halfspace(&[1.5], 0.5, &[1.0], -1.0));
        assert!(!ball_disjoint_halfspace(&[1.4], 0.5, &[1.0], -1.0));
    }

    #[test]
    fn hrep_matches_vrep_on_samples() {
        let p = Polytope::new(vec![
            vec![0.0, 0.0],
            vec![2.0, 0.0],
            vec![2.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        assert!(p.hrep().is_some());
        assert!(p.contains(&[1.0, 0.5]));
        assert!(p.contains(&[0.0, 0.0]));
        assert!(!p.contains(&[2.1, 0.5]));
        assert!(!p.contains(&[1.0, -0.1]));
    }

    #[test]
    fn degenerate_polytope_membership_via_lp() {
        // collinear 2-D vertices: a segment
        let p = Polytope::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(p.hrep().is_none());
        assert!(p.contains(&[0.5, 0.5]));
        assert!(!p.contains(&[0.5, 0.6]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn grid_symmetric_under_negation(hw in 0.2f64..2.0, pitch in 0.05f64..0.5) {
            // symmetric box: grid of -P is the negation of the grid of P
            let p = Polytope::bounding(&[(-hw, hw), (-hw, hw)]).unwrap();
            let q = p.negated();
            let mut a = grid_points(&p, pitch).unwrap();
            let mut b: Vec<Vector> = grid_points(&q, pitch).unwrap()
                .into_iter()
                .map(|v| v.iter().map(|x| -x).collect())
                .collect();
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(dist(x, y) < 1e-9);
            }
        }

        #[test]
        fn hausdorff_symmetry_and_triangle(
            s1 in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 2), 1..6),
            s2 in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 2), 1..6),
            s3 in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 2), 1..6),
        ) {
            let d12 = hausdorff(&s1, &s2).unwrap();
            let d21 = hausdorff(&s2, &s1).unwrap();
            prop_assert!((d12 - d21).abs() < 1e-12);
            let d13 = hausdorff(&s1, &s3).unwrap();
            let d32 = hausdorff(&s3, &s2).unwrap();
            prop_assert!(d12 <= d13 + d32 + 1e-12);
        }

        #[test]
        fn ball_inclusion_matches_corner_enumeration(
            x in proptest::collection::vec(-1.0f64..1.0, 2),
            c in proptest::collection::vec(-1.0f64..1.0, 2),
            d in -1.0f64..1.0,
            r in 0.0f64..0.8,
        ) {
            prop_assume!(l1_norm(&c) > 1e-6);
            // linear functional attains extremes at the 2^n ball corners
            let mut max_v = f64::NEG_INFINITY;
            let mut min_v = f64::INFINITY;
            for mask in 0..4u32 {
                let corner: Vec<f64> = (0..2)
                    .map(|i| x[i] + if mask >> i & 1 == 1 { r } else { -r })
                    .collect();
                let v = dot(&c, &corner) + d;
                max_v = max_v.max(v);
                min_v = min_v.min(v);
            }
            prop_assert_eq!(ball_in_halfspace(&x, r, &c, d), max_v < 0.0);
            prop_assert_eq!(ball_disjoint_halfspace(&x, r, &c, d), min_v >= 0.0);
        }
    }
}
