//! Seeded random instances for property suites.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::afun::{self, AffineFn, LscFn};
use crate::cone::{Cone, Element, Gen, Idem};
use crate::riesz::{self, RieszVector};
use crate::xreal::{ExtScalar, ExtVector, Rational};

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A positive rational `p/q` with `1 ≤ p ≤ 8` and `1 ≤ q ≤ 4`.
pub fn positive_rational(rng: &mut impl Rng) -> Rational {
    Rational::new(BigInt::from(rng.gen_range(1..=8)), BigInt::from(rng.gen_range(1..=4)))
}

/// A dyadic in `[0, 4]` with denominator at most 8.
pub fn dyadic(rng: &mut impl Rng) -> Rational {
    Rational::new(BigInt::from(rng.gen_range(0..=32)), BigInt::from(8))
}

/// A dyadic vector entry or `∞` with probability 1/5; zero is frequent.
pub fn ext_scalar(rng: &mut impl Rng) -> ExtScalar {
    match rng.gen_range(0..10) {
        0 | 1 => ExtScalar::Infinite,
        2 | 3 | 4 => ExtScalar::zero(),
        _ => ExtScalar::Finite(dyadic(rng)),
    }
}

pub fn ext_vector(rng: &mut impl Rng, n: usize) -> ExtVector {
    ExtVector((0..n).map(|_| ext_scalar(rng)).collect())
}

pub fn idem(cone: &Cone, rng: &mut impl Rng) -> Idem {
    let all: Vec<Idem> = cone.idems().collect();
    *all.choose(rng).expect("a cone has at least one idempotent")
}

/// A canonical element: a random support and a random positive coefficient
/// on about half of its rays.
pub fn element(cone: &Cone, rng: &mut impl Rng) -> Element {
    let w = idem(cone, rng);
    let mut coeffs = BTreeMap::new();
    for r in cone.rays(w) {
        if rng.gen_bool(0.5) {
            coeffs.insert(*r, positive_rational(rng));
        }
    }
    cone.element(w, coeffs).expect("rays of w with positive coefficients")
}

/// A raw sum `Σ c_x x + w` over arbitrary generators, with some zero
/// coefficients.
pub fn raw_sum(cone: &Cone, rng: &mut impl Rng) -> (Idem, BTreeMap<Gen, Rational>) {
    let w = idem(cone, rng);
    let raw = cone
        .gens()
        .filter_map(|x| match rng.gen_range(0..3) {
            0 => None,
            1 => Some((x, Rational::zero())),
            _ => Some((x, positive_rational(rng))),
        })
        .collect();
    (w, raw)
}

fn function_on(cone: &Cone, rng: &mut impl Rng, support: Idem, infinite: f64) -> LscFn {
    let values = cone
        .rays(support)
        .iter()
        .map(|r| {
            let v = if rng.gen_bool(infinite) { ExtScalar::Infinite } else { ExtScalar::Finite(positive_rational(rng)) };
            (*r, v)
        })
        .collect();
    LscFn::new(cone, support, values).expect("values given on exactly the rays")
}

pub fn affine(cone: &Cone, rng: &mut impl Rng) -> AffineFn {
    let w = idem(cone, rng);
    AffineFn::new(function_on(cone, rng, w, 0.0)).expect("finite values")
}

/// An affine function that is nonzero unless the cone has only one
/// idempotent.
pub fn nonzero_affine(cone: &Cone, rng: &mut impl Rng) -> AffineFn {
    let candidates: Vec<Idem> = cone.idems().filter(|&w| w != cone.top()).collect();
    match candidates.choose(rng) {
        Some(&w) => AffineFn::new(function_on(cone, rng, w, 0.0)).expect("finite values"),
        None => afun::zero(cone),
    }
}

pub fn lsc(cone: &Cone, rng: &mut impl Rng) -> LscFn {
    let w = idem(cone, rng);
    function_on(cone, rng, w, 0.2)
}

/// A function `f ◁ g` obtained by scaling `g` down and perturbing.
pub fn lhd_below(cone: &Cone, rng: &mut impl Rng, g: &AffineFn) -> AffineFn {
    let t = Rational::new(BigInt::from(rng.gen_range(1..=3)), BigInt::from(4));
    let perturbed = g
        .values()
        .iter()
        .map(|(r, v)| {
            let jitter = Rational::new(BigInt::from(rng.gen_range(0..=4)), BigInt::from(20));
            let v = v.finite().expect("affine").clone();
            let factor = (&t + jitter).min(Rational::new(BigInt::from(19), BigInt::from(20)));
            (*r, ExtScalar::Finite(&v * factor))
        })
        .collect();
    let f = LscFn::new(cone, g.support(), perturbed).expect("positive values on the rays of g");
    let f = AffineFn::new(f).expect("finite");
    if afun::lhd(cone, &f, g) {
        f
    } else {
        afun::scale_affine(cone, &Rational::new(BigInt::one(), BigInt::from(2)), g)
    }
}

/// A random Riesz vector with entries `p/q`, `|p| ≤ 4`, `q ≤ 2`.
pub fn riesz_vector(cone: &Cone, rng: &mut impl Rng) -> RieszVector {
    let values =
        cone.gens().map(|_| Rational::new(BigInt::from(rng.gen_range(-4..=4)), BigInt::from(rng.gen_range(1..=2)))).collect();
    RieszVector::new(cone, values).expect("one value per generator")
}

/// A positive Riesz vector with support `w`: zero below `w`, positive on
/// `P_w`, arbitrary elsewhere.
pub fn positive_vector(cone: &Cone, rng: &mut impl Rng, w: Idem) -> RieszVector {
    let p = riesz::p_set(cone, w);
    let values = cone
        .gens()
        .map(|x| {
            if cone.below(x, w) {
                Rational::zero()
            } else if p.contains(&x) {
                positive_rational(rng)
            } else {
                Rational::new(BigInt::from(rng.gen_range(-4..=4)), BigInt::from(rng.gen_range(1..=2)))
            }
        })
        .collect();
    RieszVector::new(cone, values).expect("one value per generator")
}

/// A valid interpolation instance: `f1, f2 ≤ g1, g2`.
pub fn interpolation_instance(cone: &Cone, rng: &mut impl Rng) -> ([RieszVector; 2], [RieszVector; 2]) {
    let base = riesz_vector(cone, rng);
    let up = |rng: &mut _| {
        let w = idem(cone, rng);
        &base + &positive_vector(cone, rng, w)
    };
    let down = |rng: &mut _| {
        let w = idem(cone, rng);
        &base - &positive_vector(cone, rng, w)
    };
    ([down(rng), down(rng)], [up(rng), up(rng)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn instances_are_valid() {
        let mut r = rng(7);
        for cone in fixtures::all() {
            for _ in 0..50 {
                let g = nonzero_affine(&cone, &mut r);
                assert!(afun::lhd(&cone, &lhd_below(&cone, &mut r, &g), &g));
                let w = idem(&cone, &mut r);
                let p = positive_vector(&cone, &mut r, w);
                assert_eq!(riesz::is_positive(&cone, &p).map(|w| w.0), Some(w));
                let (fs, gs) = interpolation_instance(&cone, &mut r);
                for f in &fs {
                    for g in &gs {
                        assert!(riesz::leq(&cone, f, g));
                    }
                }
            }
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let c = fixtures::e2();
        let draw = |seed| {
            let mut r = rng(seed);
            (0..5).map(|_| element(&c, &mut r)).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
    }
}
