//! Linear functions on a presented cone.
//!
//! A lower semicontinuous linear function `f: C → [0, ∞]` with σ-compact
//! support is stored as its support idempotent `v` together with its values
//! on the rays `R_v`. Every such function vanishes on `v`, is determined on
//! the stratum `C_v` by its ray values, and is `∞` on every element whose
//! support is not below `v`. Functions whose ray values are all finite are
//! the continuous ones and are wrapped in [`AffineFn`].

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;

use num_traits::{One, Signed, Zero};

use crate::cone::{Cone, Element, Gen, Idem};
use crate::error::{Error, Result};
use crate::feasibility::{LinearSystem, Optimum, Rel};
use crate::xreal::{ExtScalar, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LscFn {
    support: Idem,
    values: BTreeMap<Gen, ExtScalar>,
}

/// An [`LscFn`] whose ray values are all finite.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AffineFn(LscFn);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    Leq,
    Lhd,
    WayBelow,
}

impl LscFn {
    /// Checks that the keys are exactly `R_v` and every value is positive.
    pub fn new(cone: &Cone, support: Idem, values: BTreeMap<Gen, ExtScalar>) -> Result<Self> {
        let rays = cone.rays(support);
        if values.len() != rays.len() || !rays.iter().all(|r| values.contains_key(r)) {
            let want: Vec<&str> = rays.iter().map(|r| cone.gen_name(*r)).collect();
            return Err(Error::precondition(format!(
                "values must be given exactly on the rays [{}] of {}",
                want.join(", "),
                cone.idem_name(support)
            )));
        }
        if let Some((r, _)) = values.iter().find(|(_, v)| v.is_zero()) {
            return Err(Error::precondition(format!(
                "value at {} must be strictly positive",
                cone.gen_name(*r)
            )));
        }
        Ok(LscFn { support, values })
    }

    pub fn support(&self) -> Idem {
        self.support
    }

    pub fn values(&self) -> &BTreeMap<Gen, ExtScalar> {
        &self.values
    }

    pub fn is_affine(&self) -> bool {
        self.values.values().all(|v| !v.is_infinite())
    }

    pub fn display<'a>(&'a self, cone: &'a Cone) -> impl fmt::Display + 'a {
        FnDisplay { cone, f: self }
    }
}

struct FnDisplay<'a> {
    cone: &'a Cone,
    f: &'a LscFn,
}

impl fmt::Display for FnDisplay<'_> {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(fm, "({}, {{", self.cone.idem_name(self.f.support))?;
        for (i, (r, v)) in self.f.values.iter().enumerate() {
            if i > 0 {
                fm.write_str(", ")?;
            }
            write!(fm, "{}: {v}", self.cone.gen_name(*r))?;
        }
        fm.write_str("})")
    }
}

impl AffineFn {
    pub fn new(f: LscFn) -> Result<Self> {
        if f.is_affine() {
            Ok(AffineFn(f))
        } else {
            Err(Error::precondition("function takes the value inf on a ray"))
        }
    }

    pub fn into_inner(self) -> LscFn {
        self.0
    }

    /// The value at ray `r` of the support, as a rational.
    pub fn ray_value(&self, r: Gen) -> Option<&Rational> {
        self.0.values.get(&r).and_then(ExtScalar::finite)
    }
}

impl Deref for AffineFn {
    type Target = LscFn;
    fn deref(&self) -> &LscFn {
        &self.0
    }
}

impl TryFrom<LscFn> for AffineFn {
    type Error = Error;
    fn try_from(f: LscFn) -> Result<Self> {
        AffineFn::new(f)
    }
}

impl From<AffineFn> for LscFn {
    fn from(f: AffineFn) -> LscFn {
        f.0
    }
}

/// The zero function, supported on the top idempotent.
pub fn zero(cone: &Cone) -> AffineFn {
    AffineFn(LscFn { support: cone.top(), values: BTreeMap::new() })
}

/// `χ_w`: zero below `w`, infinite elsewhere.
pub fn chi(cone: &Cone, w: Idem) -> LscFn {
    LscFn {
        support: w,
        values: cone.rays(w).iter().map(|r| (*r, ExtScalar::Infinite)).collect(),
    }
}

/// The value of `f` at a generator.
pub fn gen_value(cone: &Cone, f: &LscFn, x: Gen) -> ExtScalar {
    match cone.red(x, f.support) {
        None => ExtScalar::Infinite,
        Some(red) => red
            .iter()
            .map(|(r, c)| f.values[r].scale(c))
            .sum(),
    }
}

pub fn eval(cone: &Cone, f: &LscFn, y: &Element) -> ExtScalar {
    if !cone.idem_leq(y.support(), f.support) {
        return ExtScalar::Infinite;
    }
    y.coeffs().iter().map(|(x, c)| gen_value(cone, f, *x).scale(c)).sum()
}

/// The function with the given support whose ray values are read off `value`.
fn tabulate(cone: &Cone, support: Idem, mut value: impl FnMut(Gen) -> ExtScalar) -> LscFn {
    let values = cone.rays(support).iter().map(|r| (*r, value(*r))).collect();
    LscFn { support, values }
}

pub fn add(cone: &Cone, f: &LscFn, g: &LscFn) -> LscFn {
    let v = cone.meet(f.support, g.support);
    tabulate(cone, v, |r| gen_value(cone, f, r) + gen_value(cone, g, r))
}

pub fn sum<'a>(cone: &Cone, fs: impl IntoIterator<Item = &'a LscFn>) -> LscFn {
    fs.into_iter().fold(zero(cone).into_inner(), |acc, f| add(cone, &acc, f))
}

pub fn add_affine(cone: &Cone, f: &AffineFn, g: &AffineFn) -> AffineFn {
    AffineFn(add(cone, f, g))
}

/// `t · f` for a finite `t ≥ 0`, with `0 · f` the zero function.
pub fn scale(cone: &Cone, t: &Rational, f: &LscFn) -> LscFn {
    if t.is_zero() {
        return zero(cone).into_inner();
    }
    LscFn {
        support: f.support,
        values: f.values.iter().map(|(r, v)| (*r, v.scale(t))).collect(),
    }
}

pub fn scale_affine(cone: &Cone, t: &Rational, f: &AffineFn) -> AffineFn {
    AffineFn(scale(cone, t, f))
}

/// `∞ · f = χ_{supp f}`.
pub fn infty_scale(cone: &Cone, f: &LscFn) -> LscFn {
    chi(cone, f.support)
}

/// The generators on which order relations against `g` are decided.
fn index_set<'a>(cone: &'a Cone, g: &LscFn) -> impl Iterator<Item = Gen> + 'a {
    let v = g.support;
    cone.gens().filter(move |&x| cone.idem_leq(cone.supp(x), v))
}

pub fn leq(cone: &Cone, f: &LscFn, g: &LscFn) -> bool {
    cone.idem_leq(g.support, f.support)
        && index_set(cone, g).all(|x| gen_value(cone, f, x) <= gen_value(cone, g, x))
}

/// `f ≪ g`: on every generator below the support of `g`, `f` is finite and
/// either strictly below `g` or both vanish.
pub fn way_below(cone: &Cone, f: &LscFn, g: &LscFn) -> bool {
    cone.idem_leq(g.support, f.support)
        && index_set(cone, g).all(|x| {
            let (a, b) = (gen_value(cone, f, x), gen_value(cone, g, x));
            !a.is_infinite() && a.way_below(&b)
        })
}

/// `f ◁ g`, defined for continuous `f`. On a presented cone it coincides
/// with `f ≪ g`.
pub fn lhd(cone: &Cone, f: &AffineFn, g: &LscFn) -> bool {
    way_below(cone, f, g)
}

pub fn compare(cone: &Cone, f: &LscFn, g: &LscFn, kind: Comparison) -> Result<bool> {
    Ok(match kind {
        Comparison::Leq => leq(cone, f, g),
        Comparison::WayBelow => way_below(cone, f, g),
        Comparison::Lhd => {
            let f = AffineFn::new(f.clone())
                .map_err(|_| Error::precondition("the left side of ◁ must be continuous"))?;
            lhd(cone, &f, g)
        }
    })
}

/// The `n`-th member of the canonical increasing sequence with supremum `g`:
/// same support, values `(1 − 2⁻ⁿ)·min(value, 2ⁿ)`.
pub fn approximant(cone: &Cone, g: &LscFn, n: u32) -> AffineFn {
    let _ = cone;
    let two_n = Rational::from_integer(num_bigint::BigInt::from(2).pow(n));
    let factor = Rational::one() - Rational::one() / &two_n;
    let values = g
        .values
        .iter()
        .map(|(r, v)| {
            let capped = match v {
                ExtScalar::Finite(q) if *q < two_n => q.clone(),
                _ => two_n.clone(),
            };
            (*r, ExtScalar::Finite(capped * &factor))
        })
        .collect();
    AffineFn(LscFn { support: g.support, values })
}

/// Given `f ◁ g`, returns `h` with `f + h = g` and the largest `ε ≤ 1` such
/// that `h ≥ ε g`.
pub fn subtract(cone: &Cone, f: &AffineFn, g: &LscFn) -> Result<(LscFn, Rational)> {
    if !lhd(cone, f, g) {
        return Err(Error::precondition("subtraction requires f ◁ g"));
    }
    let mut eps = Rational::one();
    let h = tabulate(cone, g.support, |r| {
        let (a, b) = (gen_value(cone, f, r), gen_value(cone, g, r));
        let d = b.checked_sub(&a).expect("f < g on the rays of g");
        if let (ExtScalar::Finite(dq), ExtScalar::Finite(bq)) = (&d, &b) {
            let ratio = dq / bq;
            if ratio < eps {
                eps = ratio;
            }
        }
        d
    });
    if add(cone, f, &h) != *g || !leq(cone, &scale(cone, &eps, g), &h) || !eps.is_positive() {
        return Err(Error::invariant("subtraction failed its own postcondition"));
    }
    Ok((h, eps))
}

pub fn subtract_affine(cone: &Cone, f: &AffineFn, g: &AffineFn) -> Result<AffineFn> {
    Ok(AffineFn(subtract(cone, f, g)?.0))
}

/// Splits `f ◁ g1 + g2` as `f = f1 + f2` with `f1 ◁ g1` and `f2 ◁ g2`.
///
/// Candidate supports `(v1, v2)` with `v1 ∧ v2 = supp f` are tried in order;
/// for each, the ray values of `f1` and `f2` are unknowns of an exact strict
/// feasibility problem.
pub fn riesz_decompose(
    cone: &Cone,
    f: &AffineFn,
    g1: &AffineFn,
    g2: &AffineFn,
) -> Result<(AffineFn, AffineFn)> {
    if !lhd(cone, f, &add(cone, g1, g2)) {
        return Err(Error::precondition("decomposition requires f ◁ g1 + g2"));
    }
    let z = zero(cone);
    if lhd(cone, f, g1) && lhd(cone, &z, g2) {
        return Ok((f.clone(), z));
    }
    if lhd(cone, f, g2) && lhd(cone, &z, g1) {
        return Ok((z, f.clone()));
    }
    let vf = f.support;
    for v1 in cone.idems() {
        if !cone.idem_leq(g1.support, v1) {
            continue;
        }
        for v2 in cone.idems() {
            if !cone.idem_leq(g2.support, v2) || cone.meet(v1, v2) != vf {
                continue;
            }
            if let Some(pair) = split_at(cone, f, [g1, g2], [v1, v2])? {
                return Ok(pair);
            }
        }
    }
    Err(Error::invariant(
        "no Riesz decomposition found although one must exist; the presentation is not a valid model",
    ))
}

fn split_at(
    cone: &Cone,
    f: &AffineFn,
    gs: [&AffineFn; 2],
    vs: [Idem; 2],
) -> Result<Option<(AffineFn, AffineFn)>> {
    let rays = [cone.rays(vs[0]), cone.rays(vs[1])];
    let offset = [0, rays[0].len()];
    let nvars = rays[0].len() + rays[1].len();
    let mut sys = LinearSystem::new(nvars);
    for i in 0..nvars {
        sys.add_terms(&[(i, -Rational::one())], Rel::Lt, Rational::zero());
    }
    // Linear form of f_k at generator x (supp x ≤ v_k).
    let form = |k: usize, x: Gen| -> Vec<(usize, Rational)> {
        cone.red(x, vs[k])
            .expect("supp(x) ≤ v_k")
            .iter()
            .map(|(r, c)| {
                let pos = rays[k].iter().position(|q| q == r).expect("reductions land on rays");
                (offset[k] + pos, c.clone())
            })
            .collect()
    };
    for r in cone.rays(f.support) {
        let mut terms = form(0, *r);
        terms.extend(form(1, *r));
        let target = f.ray_value(*r).expect("affine").clone();
        sys.add_terms(&terms, Rel::Eq, target);
    }
    for k in 0..2 {
        for x in index_set(cone, gs[k]) {
            if let ExtScalar::Finite(bound) = gen_value(cone, gs[k], x) {
                if bound.is_positive() {
                    sys.add_terms(&form(k, x), Rel::Lt, bound);
                }
            }
        }
    }
    let Some(point) = sys.solve()? else {
        return Ok(None);
    };
    let build = |k: usize| {
        let values = rays[k]
            .iter()
            .enumerate()
            .map(|(i, r)| (*r, ExtScalar::Finite(point[offset[k] + i].clone())))
            .collect();
        AffineFn(LscFn { support: vs[k], values })
    };
    let (f1, f2) = (build(0), build(1));
    if add(cone, &f1, &f2) != **f || !lhd(cone, &f1, gs[0]) || !lhd(cone, &f2, gs[1]) {
        return Err(Error::invariant("decomposition failed its postcondition"));
    }
    Ok(Some((f1, f2)))
}

/// Splits `f ◁ Σ g_k` as `Σ f_k` with `f_k ◁ g_k`, by repeated two-way splits.
///
/// When `f ◁ g_k` for a single `k` the split puts all of `f` there and zero
/// elsewhere, which keeps as many parts zero as possible.
pub fn riesz_decompose_many(cone: &Cone, f: &AffineFn, gs: &[AffineFn]) -> Result<Vec<AffineFn>> {
    let z = zero(cone);
    if gs.len() > 1 && gs.iter().all(|g| lhd(cone, &z, g)) {
        if let Some(k) = gs.iter().position(|g| lhd(cone, f, g)) {
            return Ok((0..gs.len()).map(|i| if i == k { f.clone() } else { z.clone() }).collect());
        }
    }
    match gs {
        [] => {
            if **f == *zero(cone) {
                Ok(Vec::new())
            } else {
                Err(Error::precondition("only the zero function is ◁ the empty sum"))
            }
        }
        [g] => {
            if lhd(cone, f, g) {
                Ok(vec![f.clone()])
            } else {
                Err(Error::precondition("decomposition requires f ◁ g"))
            }
        }
        [g, rest @ ..] => {
            let tail = AffineFn(sum(cone, rest.iter().map(|g| &g.0)));
            let (head, remainder) = riesz_decompose(cone, f, g, &tail)?;
            let mut out = vec![head];
            out.extend(riesz_decompose_many(cone, &remainder, rest)?);
            Ok(out)
        }
    }
}

/// The greatest lower bound of `f` and `g`.
///
/// The candidate lives on `supp f ∨ supp g` and takes the smaller of the two
/// values on each ray. It is cross-checked against the exact infimal
/// convolution `inf { f(y₁) + g(y₂) : y₁ + y₂ = r + v }` solved as a linear
/// program for each ray `r`; on disagreement the convolution values win.
pub fn meet(cone: &Cone, f: &LscFn, g: &LscFn) -> Result<LscFn> {
    let v = cone.join(f.support, g.support);
    let candidate = tabulate(cone, v, |r| {
        std::cmp::min(gen_value(cone, f, r), gen_value(cone, g, r))
    });
    let mut convolved = BTreeMap::new();
    for r in cone.rays(v) {
        convolved.insert(*r, inf_convolution(cone, f, g, *r)?);
    }
    let result = if convolved == candidate.values {
        candidate
    } else {
        LscFn::new(cone, v, convolved)
            .map_err(|e| Error::Verification(format!("infimal convolution is degenerate: {e}")))?
    };
    verify_meet(cone, f, g, &result)?;
    Ok(result)
}

fn inf_convolution(cone: &Cone, f: &LscFn, g: &LscFn, target: Gen) -> Result<ExtScalar> {
    let v = cone.join(f.support, g.support);
    let mut best = ExtScalar::Infinite;
    for u1 in cone.idems().filter(|&u| cone.idem_leq(u, f.support)) {
        for u2 in cone.idems().filter(|&u| cone.idem_leq(u, g.support)) {
            if cone.join(u1, u2) != v {
                continue;
            }
            // Variables: finite-cost rays of u1 (for f) then of u2 (for g).
            let mut vars: Vec<(Gen, Rational)> = Vec::new();
            for (h, u) in [(f, u1), (g, u2)] {
                for r in cone.rays(u) {
                    if let ExtScalar::Finite(c) = gen_value(cone, h, *r) {
                        vars.push((*r, c));
                    }
                }
            }
            let n = vars.len();
            let mut sys = LinearSystem::new(n);
            for i in 0..n {
                sys.add_terms(&[(i, -Rational::one())], Rel::Le, Rational::zero());
            }
            for r2 in cone.rays(v) {
                let terms: Vec<(usize, Rational)> = vars
                    .iter()
                    .enumerate()
                    .filter_map(|(i, (r, _))| {
                        let red = cone.red(*r, v).expect("supp(r) ≤ v");
                        red.iter().find(|(q, _)| q == r2).map(|(_, c)| (i, c.clone()))
                    })
                    .collect();
                let rhs = if *r2 == target { Rational::one() } else { Rational::zero() };
                sys.add_terms(&terms, Rel::Eq, rhs);
            }
            let objective: Vec<Rational> = vars.iter().map(|(_, c)| -c).collect();
            if let Optimum::Attained { value, .. } = sys.maximize(&objective)? {
                let cost = ExtScalar::Finite(-value);
                if cost < best {
                    best = cost;
                }
            }
        }
    }
    Ok(best)
}

fn verify_meet(cone: &Cone, f: &LscFn, g: &LscFn, m: &LscFn) -> Result<()> {
    if !(leq(cone, m, f) && leq(cone, m, g)) {
        return Err(Error::Verification("meet is not below both arguments".into()));
    }
    let half = Rational::new(1.into(), 2.into());
    for u in cone.idems() {
        let h = tabulate(cone, u, |r| {
            std::cmp::min(gen_value(cone, f, r), gen_value(cone, g, r))
        });
        for cand in [scale(cone, &half, &h), h] {
            if leq(cone, &cand, f) && leq(cone, &cand, g) && !leq(cone, &cand, m) {
                return Err(Error::Verification(
                    "a sampled common lower bound is not below the meet".into(),
                ));
            }
        }
    }
    Ok(())
}
