//! Temporal-logic formulas over half-space atoms, the two radius
//! transforms, discrete evaluation on lasso and finite words, and
//! continuous-trajectory satisfaction via word extraction.

pub mod eval;
pub mod parser;
pub mod word;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ball_disjoint_halfspace, ball_in_halfspace, ball_margin, Vector};

/// One possibly-negated half-space literal with a robustness radius.
/// Radius 0 is the plain literal; radius r > 0 reads "the closed r-ball is
/// inside p" (or disjoint from p, when negated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub name: String,
    /// Half-space {x : c^T x + d < 0}.
    pub c: Vector,
    pub d: f64,
    pub negated: bool,
    pub radius: f64,
}

impl Atom {
    pub fn new(name: impl Into<String>, c: Vector, d: f64) -> Result<Atom> {
        if c.iter().all(|v| v.abs() == 0.0) {
            return Err(Error::Invalid("atom normal vector must be nonzero".into()));
        }
        Ok(Atom { name: name.into(), c, d, negated: false, radius: 0.0 })
    }

    pub fn negate(mut self) -> Atom {
        self.negated = !self.negated;
        self
    }

    pub fn sat(&self, x: &[f64]) -> bool {
        if self.negated {
            ball_disjoint_halfspace(x, self.radius, &self.c, self.d)
        } else {
            ball_in_halfspace(x, self.radius, &self.c, self.d)
        }
    }

    /// Signed distance to the decision boundary of `sat`; near-zero values
    /// flag knife-edge evaluations.
    pub fn margin(&self, x: &[f64]) -> f64 {
        ball_margin(x, self.radius, &self.c, self.d, self.negated)
    }
}

/// Negation-normal temporal formula: literals, conjunction, disjunction,
/// until, and release.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    Atom(Atom),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Release(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn until(a: Formula, b: Formula) -> Formula {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn release(a: Formula, b: Formula) -> Formula {
        Formula::Release(Box::new(a), Box::new(b))
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |a| out.push(a));
        out
    }

    fn visit_atoms<'a>(&'a self, f: &mut impl FnMut(&'a Atom)) {
        match self {
            Formula::Atom(a) => f(a),
            Formula::And(l, r)
            | Formula::Or(l, r)
            | Formula::Until(l, r)
            | Formula::Release(l, r) => {
                l.visit_atoms(f);
                r.visit_atoms(f);
            }
        }
    }

    fn map_atoms(&self, f: &impl Fn(&Atom) -> Atom) -> Formula {
        match self {
            Formula::Atom(a) => Formula::Atom(f(a)),
            Formula::And(l, r) => Formula::and(l.map_atoms(f), r.map_atoms(f)),
            Formula::Or(l, r) => Formula::or(l.map_atoms(f), r.map_atoms(f)),
            Formula::Until(l, r) => Formula::until(l.map_atoms(f), r.map_atoms(f)),
            Formula::Release(l, r) => Formula::release(l.map_atoms(f), r.map_atoms(f)),
        }
    }

    /// Tree shape and literal identity, ignoring radii.
    pub fn same_shape(&self, other: &Formula) -> bool {
        match (self, other) {
            (Formula::Atom(a), Formula::Atom(b)) => {
                a.name == b.name && a.negated == b.negated && a.c == b.c && a.d == b.d
            }
            (Formula::And(a, b), Formula::And(c, d))
            | (Formula::Or(a, b), Formula::Or(c, d))
            | (Formula::Until(a, b), Formula::Until(c, d))
            | (Formula::Release(a, b), Formula::Release(c, d)) => {
                a.same_shape(c) && b.same_shape(d)
            }
            _ => false,
        }
    }

    /// Uniform atom radius, if there is one.
    pub fn uniform_radius(&self) -> Option<f64> {
        let atoms = self.atoms();
        let first = atoms.first()?.radius;
        atoms.iter().all(|a| a.radius == first).then_some(first)
    }

    /// Depth of nesting of boolean/temporal connectives.
    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom(_) => 0,
            Formula::And(l, r)
            | Formula::Or(l, r)
            | Formula::Until(l, r)
            | Formula::Release(l, r) => 1 + l.depth().max(r.depth()),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(a) => {
                if a.radius > 0.0 {
                    write!(f, "[{}]", a.radius)?;
                }
                if a.negated {
                    write!(f, "!")?;
                }
                write!(f, "{}", a.name)
            }
            Formula::And(l, r) => write!(f, "({l} & {r})"),
            Formula::Or(l, r) => write!(f, "({l} | {r})"),
            Formula::Until(l, r) => write!(f, "({l} U {r})"),
            Formula::Release(l, r) => write!(f, "({l} R {r})"),
        }
    }
}

/// Annotate every plain literal with radius `delta`, preserving the tree.
pub fn tr_delta(formula: &Formula, delta: f64) -> Result<Formula> {
    if !(delta > 0.0) {
        return Err(Error::Invalid(format!("tr_delta needs delta > 0, got {delta}")));
    }
    if formula.atoms().iter().any(|a| a.radius != 0.0) {
        return Err(Error::Invalid("tr_delta input already carries a radius".into()));
    }
    Ok(formula.map_atoms(&|a| {
        let mut a = a.clone();
        a.radius = delta;
        a
    }))
}

/// Inflate every atom radius by `eps`, preserving the tree.
pub fn tr_eps(formula: &Formula, eps: f64) -> Result<Formula> {
    if !(eps > 0.0) {
        return Err(Error::Invalid(format!("tr_eps needs eps > 0, got {eps}")));
    }
    if formula.atoms().iter().any(|a| a.radius == 0.0) {
        return Err(Error::Invalid("tr_eps input must already carry a positive radius".into()));
    }
    Ok(formula.map_atoms(&|a| {
        let mut a = a.clone();
        a.radius += eps;
        a
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parser::{parse, PropositionTable};

    fn props() -> PropositionTable {
        let mut t = PropositionTable::new();
        t.bind("p1", vec![1.0], -1.0).unwrap();
        t.bind("p2", vec![-1.0], 0.5).unwrap();
        t
    }

    #[test]
    fn transform_annotates_atoms() {
        let f = parse("p1", &props()).unwrap();
        let g = tr_delta(&f, 0.25).unwrap();
        match &g {
            Formula::Atom(a) => {
                assert_eq!(a.radius, 0.25);
                assert!(!a.negated);
            }
            _ => panic!("shape changed"),
        }
        let neg = parse("!p1", &props()).unwrap();
        let gneg = tr_delta(&neg, 0.25).unwrap();
        match &gneg {
            Formula::Atom(a) => assert!(a.negated && a.radius == 0.25),
            _ => panic!("shape changed"),
        }
    }

    #[test]
    fn transform_preserves_until_shape() {
        let f = parse("(p1 & !p2) U (p2 | p1)", &props()).unwrap();
        let g = tr_delta(&f, 0.1).unwrap();
        assert!(g.same_shape(&f));
        let h = tr_eps(&g, 0.2).unwrap();
        assert!(h.same_shape(&f));
        for a in h.atoms() {
            assert!((a.radius - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn transform_preconditions() {
        let f = parse("p1", &props()).unwrap();
        let g = tr_delta(&f, 0.1).unwrap();
        assert!(tr_delta(&g, 0.1).is_err(), "double annotation rejected");
        assert!(tr_eps(&f, 0.1).is_err(), "tr_eps needs a radius");
        assert!(tr_eps(&g, 0.0).is_err(), "eps = 0 disallowed");
    }

    #[test]
    fn radius_monotonicity_on_atoms() {
        // satisfaction at radius r implies satisfaction at r' < r
        let a = Atom::new("p", vec![1.0, 2.0], -1.0).unwrap();
        let x = vec![0.1, 0.05];
        for r in [0.25, 0.2, 0.1, 0.0] {
            let mut big = a.clone();
            big.radius = r + 0.05;
            let mut small = a.clone();
            small.radius = r;
            if big.sat(&x) {
                assert!(small.sat(&x));
            }
            let mut big_n = big.clone().negate();
            let mut small_n = small.clone().negate();
            big_n.radius = r + 0.05;
            small_n.radius = r;
            if big_n.sat(&x) {
                assert!(small_n.sat(&x));
            }
        }
    }
}
