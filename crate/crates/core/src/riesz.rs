//! The ordered vector space `(V_C, V_C⁺)` of rational functions on the
//! generator set, its positive cone, Riesz interpolation, and the pairing
//! with cone elements.
//!
//! For an idempotent `w`:
//! * `O_w` is the set of generators not below `w`,
//! * `P_w` those generators of `O_w` whose support is below `w`,
//! * `P̃_w = P_w ∪ (X \ O_w)`.
//!
//! A vector `f` is positive with support `w` when it vanishes off `O_w` and
//! is strictly positive on `P_w`.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Neg, Sub};

use num_traits::{One, Signed, Zero};

use crate::afun::AffineFn;
use crate::cone::{Cone, Element, Gen, Idem};
use crate::error::{Error, Result};
use crate::feasibility::{LinearSystem, Rel};
use crate::xreal::{ExtScalar, Rational};

pub type GenSet = BTreeSet<Gen>;

/// A rational-valued function on the generators, indexed by [`Gen`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RieszVector(Vec<Rational>);

/// The support of a positive vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PositivityWitness(pub Idem);

/// A positive vector together with its support.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PositiveVector {
    vector: RieszVector,
    support: Idem,
}

impl RieszVector {
    pub fn new(cone: &Cone, values: Vec<Rational>) -> Result<Self> {
        if values.len() != cone.gen_count() {
            return Err(Error::LengthMismatch { expected: cone.gen_count(), found: values.len() });
        }
        Ok(RieszVector(values))
    }

    pub fn zero(cone: &Cone) -> Self {
        RieszVector(vec![Rational::zero(); cone.gen_count()])
    }

    /// The indicator of a set of generators.
    pub fn indicator(cone: &Cone, set: &GenSet) -> Self {
        RieszVector(
            cone.gens()
                .map(|x| if set.contains(&x) { Rational::one() } else { Rational::zero() })
                .collect(),
        )
    }

    pub fn get(&self, x: Gen) -> &Rational {
        &self.0[x.index()]
    }

    pub fn values(&self) -> &[Rational] {
        &self.0
    }

    pub fn scale(&self, t: &Rational) -> Self {
        RieszVector(self.0.iter().map(|v| v * t).collect())
    }

    /// The vector of an affine function: its value on generators below its
    /// support, zero elsewhere.
    pub fn from_affine(cone: &Cone, f: &AffineFn) -> Self {
        RieszVector(
            cone.gens()
                .map(|x| match crate::afun::gen_value(cone, f, x) {
                    ExtScalar::Finite(q) => q,
                    ExtScalar::Infinite => Rational::zero(),
                })
                .collect(),
        )
    }
}

impl Add for &RieszVector {
    type Output = RieszVector;
    fn add(self, rhs: &RieszVector) -> RieszVector {
        RieszVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &RieszVector {
    type Output = RieszVector;
    fn sub(self, rhs: &RieszVector) -> RieszVector {
        RieszVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &RieszVector {
    type Output = RieszVector;
    fn neg(self) -> RieszVector {
        RieszVector(self.0.iter().map(|a| -a).collect())
    }
}

impl PositiveVector {
    pub fn vector(&self) -> &RieszVector {
        &self.vector
    }

    pub fn support(&self) -> Idem {
        self.support
    }
}

/// `O_w`: generators not below `w`.
pub fn o_set(cone: &Cone, w: Idem) -> GenSet {
    cone.gens().filter(|&x| !cone.below(x, w)).collect()
}

/// `P_w`: generators of `O_w` whose support is below `w`.
pub fn p_set(cone: &Cone, w: Idem) -> GenSet {
    cone.gens()
        .filter(|&x| !cone.below(x, w) && cone.idem_leq(cone.supp(x), w))
        .collect()
}

/// `P̃_w = P_w ∪ (X \ O_w)`.
pub fn p_tilde_set(cone: &Cone, w: Idem) -> GenSet {
    cone.gens()
        .filter(|&x| cone.below(x, w) || cone.idem_leq(cone.supp(x), w))
        .collect()
}

/// `(O_w, P_w, P̃_w)`.
pub fn support_sets(cone: &Cone, w: Idem) -> (GenSet, GenSet, GenSet) {
    (o_set(cone, w), p_set(cone, w), p_tilde_set(cone, w))
}

fn positive_with_support(cone: &Cone, f: &RieszVector, w: Idem) -> bool {
    cone.gens().all(|x| {
        let v = f.get(x);
        if cone.below(x, w) {
            v.is_zero()
        } else if cone.idem_leq(cone.supp(x), w) {
            v.is_positive()
        } else {
            true
        }
    })
}

/// Every idempotent that witnesses positivity of `f`; a valid presentation
/// admits at most one.
pub fn positivity_witnesses(cone: &Cone, f: &RieszVector) -> Vec<Idem> {
    cone.idems().filter(|&w| positive_with_support(cone, f, w)).collect()
}

pub fn is_positive(cone: &Cone, f: &RieszVector) -> Option<PositivityWitness> {
    positivity_witnesses(cone, f).first().copied().map(PositivityWitness)
}

pub fn positive(cone: &Cone, f: &RieszVector) -> Result<PositiveVector> {
    match is_positive(cone, f) {
        Some(PositivityWitness(support)) => Ok(PositiveVector { vector: f.clone(), support }),
        None => Err(Error::precondition("vector is not positive")),
    }
}

/// `a ≤ b` iff `b − a` is positive.
pub fn leq(cone: &Cone, a: &RieszVector, b: &RieszVector) -> bool {
    is_positive(cone, &(b - a)).is_some()
}

/// Finds `h` with `f_i ≤ h ≤ g_j` for all `i, j`.
///
/// The unknown supports `s_i` of `h − f_i` and `t_j` of `g_j − h` are
/// enumerated, keeping only quadruples with `s_i ∧ t_j = supp(g_j − f_i)`.
/// Each fixed quadruple turns positivity into equalities and strict
/// inequalities on single coordinates of `h`, solved exactly.
pub fn interpolate(cone: &Cone, fs: [&RieszVector; 2], gs: [&RieszVector; 2]) -> Result<RieszVector> {
    let mut diff_support = [[cone.top(); 2]; 2];
    for (i, f) in fs.iter().enumerate() {
        for (j, g) in gs.iter().enumerate() {
            diff_support[i][j] = is_positive(cone, &(*g - *f))
                .ok_or_else(|| Error::precondition(format!("f{} ≤ g{} fails", i + 1, j + 1)))?
                .0;
        }
    }
    let idems: Vec<Idem> = cone.idems().collect();
    for &s1 in &idems {
        for &s2 in &idems {
            for &t1 in &idems {
                for &t2 in &idems {
                    let (s, t) = ([s1, s2], [t1, t2]);
                    let consistent = (0..2)
                        .all(|i| (0..2).all(|j| cone.meet(s[i], t[j]) == diff_support[i][j]));
                    if !consistent {
                        continue;
                    }
                    if let Some(h) = interpolate_at(cone, fs, gs, s, t)? {
                        return Ok(h);
                    }
                }
            }
        }
    }
    Err(Error::invariant(
        "no interpolant found although one must exist; the presentation is not a valid model",
    ))
}

fn interpolate_at(
    cone: &Cone,
    fs: [&RieszVector; 2],
    gs: [&RieszVector; 2],
    s: [Idem; 2],
    t: [Idem; 2],
) -> Result<Option<RieszVector>> {
    let n = cone.gen_count();
    let mut sys = LinearSystem::new(n);
    for x in cone.gens() {
        let i = x.index();
        for k in 0..2 {
            // h − f_k has support s_k.
            if cone.below(x, s[k]) {
                sys.add_terms(&[(i, Rational::one())], Rel::Eq, fs[k].get(x).clone());
            } else if cone.idem_leq(cone.supp(x), s[k]) {
                sys.add_terms(&[(i, -Rational::one())], Rel::Lt, -fs[k].get(x).clone());
            }
            // g_k − h has support t_k.
            if cone.below(x, t[k]) {
                sys.add_terms(&[(i, Rational::one())], Rel::Eq, gs[k].get(x).clone());
            } else if cone.idem_leq(cone.supp(x), t[k]) {
                sys.add_terms(&[(i, Rational::one())], Rel::Lt, gs[k].get(x).clone());
            }
        }
    }
    let Some(point) = sys.solve()? else {
        return Ok(None);
    };
    let h = RieszVector(point);
    let ok = fs.iter().all(|f| leq(cone, f, &h)) && gs.iter().all(|g| leq(cone, &h, g));
    if !ok {
        return Err(Error::invariant("interpolant failed verification"));
    }
    Ok(Some(h))
}

/// `(y, f) = Σ α_x f(x)` when `supp(y) ≤ supp(f)`, and `∞` otherwise.
pub fn pairing(cone: &Cone, y: &Element, f: &PositiveVector) -> ExtScalar {
    if !cone.idem_leq(y.support(), f.support) {
        return ExtScalar::Infinite;
    }
    let total = y
        .coeffs()
        .iter()
        .fold(Rational::zero(), |acc, (x, c)| acc + c * f.vector.get(*x));
    ExtScalar::Finite(total)
}

/// `Σ_{x ∈ P_w} λ_x x + w`.
pub fn reconstruct(cone: &Cone, w: Idem, lambda: &BTreeMap<Gen, Rational>) -> Result<Element> {
    let p = p_set(cone, w);
    if let Some(x) = lambda.keys().find(|x| !p.contains(x)) {
        return Err(Error::precondition(format!(
            "{} is not in P_{}",
            cone.gen_name(*x),
            cone.idem_name(w)
        )));
    }
    cone.canonicalize(w, lambda)
}

/// The positive vectors `1_{P_w}` and `1_{P_w} + 1_x` for `x ∈ P_w`, over all
/// idempotents `w`. Pairing against this family separates cone elements.
pub fn separating_family(cone: &Cone) -> Vec<PositiveVector> {
    let mut out = Vec::new();
    for w in cone.idems() {
        let p = p_set(cone, w);
        let base = RieszVector::indicator(cone, &p);
        out.push(PositiveVector { vector: base.clone(), support: w });
        for x in &p {
            let v = &base + &RieszVector::indicator(cone, &[*x].into());
            out.push(PositiveVector { vector: v, support: w });
        }
    }
    out
}

/// Recovers the functional table `λ(1_x)` for `x ∈ R_w` of an element of
/// support `w` by pairing against `1_{P_w} + 1_x` and `1_{P_w}`.
pub fn functional_table(cone: &Cone, y: &Element) -> BTreeMap<Gen, Rational> {
    let w = y.support();
    let p = p_set(cone, w);
    let base = PositiveVector { vector: RieszVector::indicator(cone, &p), support: w };
    let at_base = pairing(cone, y, &base);
    let mut out = BTreeMap::new();
    for x in cone.rays(w) {
        let v = PositiveVector {
            vector: &base.vector + &RieszVector::indicator(cone, &[*x].into()),
            support: w,
        };
        let d = match (pairing(cone, y, &v), &at_base) {
            (ExtScalar::Finite(a), ExtScalar::Finite(b)) => a - b,
            _ => unreachable!("supp(y) = w keeps both pairings finite"),
        };
        if !d.is_zero() {
            out.insert(*x, d);
        }
    }
    out
}
