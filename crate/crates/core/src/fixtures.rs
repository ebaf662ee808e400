//! Bundled fixture cones and diagrams.
//!
//! Each `.cone` file describes its model in the `notes` field. The oracles
//! used by the tests come from those models:
//!
//! * `E1` is `[0, ∞]`: elements are `t·u + 0` for `t ∈ [0, ∞)` or the point
//!   `∞`, and every function is multiplication by a scalar.
//! * `E2` is `[0, ∞]²` with coordinatewise arithmetic. The element
//!   `(p1, {e2: 3})` is the pair `(∞, 3)`.
//! * `Elex` consists of the additive maps on the lexicographic positive cone
//!   of `ℤ²`. Writing `λ_t(a, b) = t·a` and `μ_s(a, b) = ∞·a + s·b`, the
//!   element `(bot, {x1: t})` is `λ_t` and `(w, {x2: s})` is `μ_s`. Sums are
//!   pointwise, so `λ_t + μ_s = μ_s`.
//!
//! The diagram `car.bd` has one vertex per level and edges of multiplicity
//! two, so every connecting map of its dimension-group system is `[2]` and
//! its composites are powers of two. `two_components.bd` has two vertices per
//! level joined by identity matrices; its order ideals at depth `k` are the
//! four subsets of the two columns.

use crate::cone::Cone;
use crate::io::{load_cone, parse_diagram};
use crate::limits::BratteliDiagram;

pub const E1: &str = include_str!("../fixtures/e1.cone");
pub const E2: &str = include_str!("../fixtures/e2.cone");
pub const ELEX: &str = include_str!("../fixtures/elex.cone");
pub const CAR: &str = include_str!("../fixtures/car.bd");
pub const TWO_COMPONENTS: &str = include_str!("../fixtures/two_components.bd");

pub fn e1() -> Cone {
    load_cone(E1).expect("bundled fixture is valid")
}

pub fn e2() -> Cone {
    load_cone(E2).expect("bundled fixture is valid")
}

pub fn elex() -> Cone {
    load_cone(ELEX).expect("bundled fixture is valid")
}

/// The three fixture cones in the order E1, E2, Elex.
pub fn all() -> Vec<Cone> {
    vec![e1(), e2(), elex()]
}

pub fn car() -> BratteliDiagram {
    parse_diagram(CAR).expect("bundled fixture is valid")
}

pub fn two_components() -> BratteliDiagram {
    parse_diagram(TWO_COMPONENTS).expect("bundled fixture is valid")
}
