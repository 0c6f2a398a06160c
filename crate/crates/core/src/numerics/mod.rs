//! Linear algebra and computational geometry primitives shared by the rest
//! of the crate. Everything here is pure and immutable after construction.

pub mod geometry;
pub mod lp;
pub mod matrix;

pub use geometry::{
    ball_disjoint_halfspace, ball_in_halfspace, ball_margin, extreme_points, grid_keys,
    grid_points, hausdorff, GridSpec, HalfSpace, Polytope, GEOM_TOL,
};
pub use matrix::{
    dist, dot, inf_norm, l1_norm, vec_add, vec_scale, vec_sub, zoh_gain, zoh_refinement_bound,
    zoh_substep, Matrix, Vector, EXP_TOL,
};
