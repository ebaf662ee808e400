//! Factorizations of morphisms `[0, ∞]ⁿ → A(C)` through powers of `[0, ∞]`.
//!
//! [`core_triangle`] turns `φ(x) ≪ φ(y)` for integer vectors into an integer
//! matrix `Q` and a morphism `ψ` with `ψ ∘ Q = φ` and `Qx ≤ Qy`. It works by
//! degree descent: each step removes one extreme coordinate using a Riesz
//! split and replaces it by a few new coordinates, and the degree
//! `(M, n₁, n₂, n)` strictly decreases in lexicographic order. [`triangle`]
//! applies it to rational pairs after sandwiching them, and
//! [`build_inductive_system`] strings rounds of [`triangle`] into a chain of
//! stages.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::afun::{self, AffineFn, LscFn};
use crate::cone::Cone;
use crate::error::{Error, Result};
use crate::limits::{CuMatrix, Direction, System};
use crate::xreal::{format_rational, ExtVector, Rational};

pub const DEFAULT_BUDGET: usize = 1_000_000;

/// The images `φ(E_1), …, φ(E_n)` of the canonical generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CuMorphismToA(Vec<AffineFn>);

impl CuMorphismToA {
    pub fn new(gens: Vec<AffineFn>) -> Self {
        CuMorphismToA(gens)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn gens(&self) -> &[AffineFn] {
        &self.0
    }

    /// `φ(x) = Σ x_i φ(E_i)` for a finite nonnegative vector.
    pub fn image(&self, cone: &Cone, x: &[Rational]) -> Result<AffineFn> {
        if x.len() != self.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), found: x.len() });
        }
        if x.iter().any(Signed::is_negative) {
            return Err(Error::precondition("vectors must be nonnegative"));
        }
        Ok(combine(cone, &self.0, x))
    }

    /// `φ(x)` for a vector that may have infinite entries, using
    /// `φ(∞ E_i) = ∞ · φ(E_i)`.
    pub fn image_ext(&self, cone: &Cone, x: &ExtVector) -> Result<LscFn> {
        if x.len() != self.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), found: x.len() });
        }
        let parts: Vec<LscFn> = self
            .0
            .iter()
            .zip(&x.0)
            .map(|(f, t)| match t.finite() {
                Some(q) => afun::scale(cone, q, f),
                None => afun::infty_scale(cone, f),
            })
            .collect();
        Ok(afun::sum(cone, &parts))
    }
}

fn combine(cone: &Cone, fs: &[AffineFn], x: &[Rational]) -> AffineFn {
    fs.iter()
        .zip(x)
        .filter(|(_, t)| !t.is_zero())
        .fold(afun::zero(cone), |acc, (f, t)| afun::add_affine(cone, &acc, &afun::scale_affine(cone, t, f)))
}

fn combine_int(cone: &Cone, fs: &[AffineFn], x: &[BigInt]) -> AffineFn {
    let x: Vec<Rational> = x.iter().map(|v| Rational::from_integer(v.clone())).collect();
    combine(cone, fs, &x)
}

/// `(M, n₁, n₂, n)`, ordered lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Degree {
    pub m: BigInt,
    pub n1: usize,
    pub n2: usize,
    pub n: usize,
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.m, self.n1, self.n2, self.n)
    }
}

/// `M = max |x_i − y_i|`, `n₁ = #{x_i − y_i = M}`, `n₂ = #{y_i − x_i = M}`.
pub fn degree(x: &[BigInt], y: &[BigInt]) -> Result<Degree> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), found: y.len() });
    }
    if x.iter().chain(y).any(Signed::is_negative) {
        return Err(Error::precondition("degree is defined for nonnegative vectors"));
    }
    let m = x.iter().zip(y).map(|(a, b)| (a - b).abs()).max().unwrap_or_else(BigInt::zero);
    let n1 = x.iter().zip(y).filter(|(a, b)| *a - *b == m).count();
    let n2 = x.iter().zip(y).filter(|(a, b)| *b - *a == m).count();
    Ok(Degree { m, n1, n2, n: x.len() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    /// `M₁ ≥ M₂`: split the pivot with the largest excess of `x`.
    ExcessOfX,
    /// `M₂ > M₁`: split the pivot with the largest excess of `y` against a
    /// gap function.
    ExcessOfY,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LogEntry {
    Step { degree: Degree, case: Case, pivot: usize },
    /// A use of weak cancellation: `f + h ≪ g + h′` was checked and `f ≪ g`
    /// re-verified.
    Cancellation { f: LscFn, h: LscFn, g: LscFn, h2: LscFn },
    Gap { eps: Rational },
    Sandwich { pair: (usize, usize), eps: Rational, denom: BigInt },
}

impl LogEntry {
    pub fn render(&self, cone: &Cone) -> String {
        match self {
            LogEntry::Step { degree, case, pivot } => {
                let case = match case {
                    Case::ExcessOfX => "M1>=M2",
                    Case::ExcessOfY => "M2>M1",
                };
                format!("step degree={degree} case={case} pivot={pivot}")
            }
            LogEntry::Cancellation { f, h, g, h2 } => format!(
                "cancel f={} h={} g={} h'={}",
                f.display(cone),
                h.display(cone),
                g.display(cone),
                h2.display(cone)
            ),
            LogEntry::Gap { eps } => format!("gap eps={}", format_rational(eps)),
            LogEntry::Sandwich { pair, eps, denom } => {
                format!("pair ({}, {}) eps={} denom={denom}", pair.0, pair.1, format_rational(eps))
            }
        }
    }
}

/// `Q: [0, ∞]ⁿ → [0, ∞]^N` together with `ψ` on `[0, ∞]^N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factorization {
    q: Vec<Vec<BigInt>>,
    psi: Vec<AffineFn>,
    source_dim: usize,
    log: Vec<LogEntry>,
}

impl Factorization {
    pub fn identity(phi: &CuMorphismToA) -> Self {
        let n = phi.dim();
        Factorization { q: identity(n), psi: phi.0.clone(), source_dim: n, log: Vec::new() }
    }

    /// Rows indexed by target coordinates, columns by source coordinates.
    pub fn q(&self) -> &[Vec<BigInt>] {
        &self.q
    }

    pub fn q_matrix(&self) -> CuMatrix {
        CuMatrix::from_integers(self.target_dim(), self.source_dim, &self.q).expect("entries are nonnegative")
    }

    pub fn psi(&self) -> &[AffineFn] {
        &self.psi
    }

    pub fn psi_morphism(&self) -> CuMorphismToA {
        CuMorphismToA(self.psi.clone())
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn target_dim(&self) -> usize {
        self.psi.len()
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn log_lines(&self, cone: &Cone) -> Vec<String> {
        self.log.iter().map(|e| e.render(cone)).collect()
    }

    /// The degrees recorded at each descent step, in order.
    pub fn degrees(&self) -> Vec<Degree> {
        self.log
            .iter()
            .filter_map(|e| match e {
                LogEntry::Step { degree, .. } => Some(degree.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn apply(&self, x: &[Rational]) -> Vec<Rational> {
        self.q
            .iter()
            .map(|row| row.iter().zip(x).fold(Rational::zero(), |acc, (q, v)| acc + v * Rational::from_integer(q.clone())))
            .collect()
    }

    /// Checks `ψ ∘ Q = φ` on each generator.
    pub fn commutes(&self, cone: &Cone, phi: &CuMorphismToA) -> bool {
        phi.dim() == self.source_dim
            && (0..self.source_dim).all(|e| {
                let column: Vec<BigInt> = self.q.iter().map(|row| row[e].clone()).collect();
                combine_int(cone, &self.psi, &column) == phi.0[e]
            })
    }
}

fn identity(n: usize) -> Vec<Vec<BigInt>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect()
}

fn internal(e: Error) -> Error {
    match e {
        Error::Invariant(_) | Error::Budget(_) => e,
        e => Error::invariant(format!("internal step failed, the presentation is likely invalid: {e}")),
    }
}

struct State {
    psi: Vec<AffineFn>,
    x: Vec<BigInt>,
    y: Vec<BigInt>,
    q: Vec<Vec<BigInt>>,
}

impl State {
    /// Replaces the coordinates by new ones: old coordinate `k` maps to the
    /// sum of the new coordinates listed in `images[k]`.
    fn apply(&mut self, cone: &Cone, new_psi: Vec<AffineFn>, images: &[Vec<usize>]) -> Result<()> {
        let n = new_psi.len();
        let cols = self.q.first().map_or(0, Vec::len);
        let mut x = vec![BigInt::zero(); n];
        let mut y = vec![BigInt::zero(); n];
        let mut q = vec![vec![BigInt::zero(); cols]; n];
        for (k, image) in images.iter().enumerate() {
            let parts: Vec<&LscFn> = image.iter().map(|&l| &*new_psi[l]).collect();
            if afun::sum(cone, parts) != *self.psi[k] {
                return Err(Error::invariant(format!("new generators do not add up to old generator {k}")));
            }
            for &l in image {
                x[l] += &self.x[k];
                y[l] += &self.y[k];
                for (c, v) in q[l].iter_mut().zip(&self.q[k]) {
                    *c += v;
                }
            }
        }
        // Coordinates carrying the zero function contribute nothing to ψ ∘ Q
        // and are dropped. Coordinates agreeing in x, y and their row of Q are
        // merged into one carrying the sum of their functions; this keeps
        // ψ ∘ Q, Qx ≤ x, Qy = y and the value of ψ at x and y.
        let z = afun::zero(cone);
        let mut merged: Vec<(AffineFn, BigInt, BigInt, Vec<BigInt>)> = Vec::new();
        let mut slot: BTreeMap<(BigInt, BigInt, Vec<BigInt>), usize> = BTreeMap::new();
        for (((f, xv), yv), row) in new_psi.into_iter().zip(x).zip(y).zip(q) {
            if f == z {
                continue;
            }
            let key = (xv.clone(), yv.clone(), row.clone());
            match slot.get(&key) {
                Some(&i) => merged[i].0 = afun::add_affine(cone, &merged[i].0, &f),
                None => {
                    slot.insert(key, merged.len());
                    merged.push((f, xv, yv, row));
                }
            }
        }
        self.psi = merged.iter().map(|m| m.0.clone()).collect();
        self.x = merged.iter().map(|m| m.1.clone()).collect();
        self.y = merged.iter().map(|m| m.2.clone()).collect();
        self.q = merged.into_iter().map(|m| m.3).collect();
        Ok(())
    }
}

/// Records a weak cancellation: given `Σ a_k ψ_k ≪ Σ b_k ψ_k`, removes the
/// common part `Σ min(a_k, b_k) ψ_k` and re-verifies the remainder.
fn cancel(
    cone: &Cone,
    fns: &[&AffineFn],
    a: &[Rational],
    b: &[Rational],
    log: &mut Vec<LogEntry>,
) -> Result<()> {
    let lhs = combine(cone, &fns.iter().map(|f| (*f).clone()).collect::<Vec<_>>(), a);
    let rhs = combine(cone, &fns.iter().map(|f| (*f).clone()).collect::<Vec<_>>(), b);
    if !afun::way_below(cone, &lhs, &rhs) {
        return Err(Error::invariant("cancellation premise f + h ≪ g + h′ fails"));
    }
    let owned: Vec<AffineFn> = fns.iter().map(|f| (*f).clone()).collect();
    let c: Vec<Rational> = a.iter().zip(b).map(|(p, q)| p.clone().min(q.clone())).collect();
    let f: Vec<Rational> = a.iter().zip(&c).map(|(p, m)| p - m).collect();
    let g: Vec<Rational> = b.iter().zip(&c).map(|(p, m)| p - m).collect();
    let (f, g, h) = (combine(cone, &owned, &f), combine(cone, &owned, &g), combine(cone, &owned, &c));
    let ok = afun::way_below(cone, &f, &g);
    log.push(LogEntry::Cancellation {
        f: f.into_inner(),
        h: h.clone().into_inner(),
        g: g.into_inner(),
        h2: h.into_inner(),
    });
    if !ok {
        return Err(Error::invariant("weak cancellation failed: f + h ≪ g + h but not f ≪ g"));
    }
    Ok(())
}

fn int_rat(v: &BigInt) -> Rational {
    Rational::from_integer(v.clone())
}

pub fn core_triangle(cone: &Cone, phi: &CuMorphismToA, x: &[BigInt], y: &[BigInt]) -> Result<Factorization> {
    core_triangle_with_budget(cone, phi, x, y, DEFAULT_BUDGET)
}

/// The degree-descent factorization. Fails with [`Error::Budget`] if more
/// than `budget` steps are taken.
pub fn core_triangle_with_budget(
    cone: &Cone,
    phi: &CuMorphismToA,
    x: &[BigInt],
    y: &[BigInt],
    budget: usize,
) -> Result<Factorization> {
    let n = phi.dim();
    for v in [x, y] {
        if v.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: v.len() });
        }
    }
    if x.iter().chain(y).any(Signed::is_negative) {
        return Err(Error::precondition("x and y must be nonnegative"));
    }
    if !afun::way_below(cone, &combine_int(cone, &phi.0, x), &combine_int(cone, &phi.0, y)) {
        return Err(Error::precondition("φ(x) ≪ φ(y) is required"));
    }

    let mut st = State { psi: phi.0.clone(), x: x.to_vec(), y: y.to_vec(), q: identity(n) };
    let mut log = Vec::new();
    let mut previous: Option<Degree> = None;
    let mut steps = 0usize;

    loop {
        let active: Vec<usize> = (0..st.psi.len()).filter(|&k| st.x[k] != st.y[k]).collect();
        if active.iter().all(|&k| st.x[k] <= st.y[k]) {
            break;
        }
        steps += 1;
        if steps > budget {
            return Err(Error::Budget(budget));
        }

        let frozen = st.psi.len() > active.len();
        let pick = |v: &[BigInt]| -> Vec<BigInt> { active.iter().map(|&k| v[k].clone()).collect() };
        let fa: Vec<AffineFn> = active.iter().map(|&k| st.psi[k].clone()).collect();
        let (xa, ya) = (pick(&st.x), pick(&st.y));
        let (phi_x, phi_y) = (combine_int(cone, &fa, &xa), combine_int(cone, &fa, &ya));
        if frozen {
            let all: Vec<&AffineFn> = st.psi.iter().collect();
            let common: Vec<Rational> = (0..st.psi.len())
                .map(|k| if active.contains(&k) { Rational::zero() } else { int_rat(&st.x[k]) })
                .collect();
            let a: Vec<Rational> =
                (0..st.psi.len()).map(|k| if active.contains(&k) { int_rat(&st.x[k]) } else { common[k].clone() }).collect();
            let b: Vec<Rational> =
                (0..st.psi.len()).map(|k| if active.contains(&k) { int_rat(&st.y[k]) } else { common[k].clone() }).collect();
            cancel(cone, &all, &a, &b, &mut log)?;
        } else if !afun::way_below(cone, &phi_x, &phi_y) {
            return Err(Error::invariant("φ(x) ≪ φ(y) lost during descent"));
        }

        let deg = degree(&xa, &ya)?;
        if let Some(p) = &previous {
            if deg >= *p {
                return Err(Error::invariant(format!("degree did not decrease: {p} then {deg}")));
            }
        }
        previous = Some(deg.clone());

        let diff = |k: usize| &st.x[k] - &st.y[k];
        let excess_x: Vec<usize> = active.iter().copied().filter(|&k| diff(k).is_positive()).collect();
        let excess_y: Vec<usize> = active.iter().copied().filter(|&k| diff(k).is_negative()).collect();
        let m1 = excess_x.iter().map(|&k| diff(k)).max().unwrap_or_else(BigInt::zero);
        let m2 = excess_y.iter().map(|&k| -diff(k)).max().unwrap_or_else(BigInt::zero);
        let all_fns: Vec<&AffineFn> = active.iter().map(|&k| &st.psi[k]).collect();

        if m1 >= m2 {
            let i1 = *excess_x.iter().find(|&&k| diff(k) == m1).expect("some coordinate has excess M1");
            log.push(LogEntry::Step { degree: deg, case: Case::ExcessOfX, pivot: i1 });
            cancel(cone, &all_fns, &xa.iter().map(int_rat).collect::<Vec<_>>(), &ya.iter().map(int_rat).collect::<Vec<_>>(), &mut log)?;

            let targets: Vec<AffineFn> = excess_y.iter().map(|&j| st.psi[j].clone()).collect();
            let target_sum = afun::sum(cone, targets.iter().map(|f| &**f));
            if !afun::lhd(cone, &st.psi[i1], &target_sum) {
                return Err(Error::invariant(format!("generator {i1} is not ◁ the sum of the y-excess generators")));
            }
            let parts = afun::riesz_decompose_many(cone, &st.psi[i1], &targets).map_err(internal)?;

            let kept: Vec<usize> = (0..st.psi.len()).filter(|&k| k != i1).collect();
            let mut new_psi = Vec::new();
            let mut position = BTreeMap::new();
            for &k in &kept {
                position.insert(k, new_psi.len());
                new_psi.push(st.psi[k].clone());
            }
            let mut g_position = BTreeMap::new();
            for (&j, g) in excess_y.iter().zip(&parts) {
                new_psi[position[&j]] = afun::subtract_affine(cone, g, &st.psi[j]).map_err(internal)?;
                g_position.insert(j, new_psi.len());
                new_psi.push(g.clone());
            }
            let images: Vec<Vec<usize>> = (0..st.psi.len())
                .map(|k| {
                    if k == i1 {
                        excess_y.iter().map(|j| g_position[j]).collect()
                    } else if let Some(&g) = g_position.get(&k) {
                        vec![position[&k], g]
                    } else {
                        vec![position[&k]]
                    }
                })
                .collect();
            st.apply(cone, new_psi, &images)?;
        } else {
            let j1 = *excess_y.iter().find(|&&k| -diff(k) == m2).expect("some coordinate has excess M2");
            log.push(LogEntry::Step { degree: deg, case: Case::ExcessOfY, pivot: j1 });

            let eps = gap_epsilon(cone, &phi_x, &phi_y, &xa, &ya)?;
            log.push(LogEntry::Gap { eps: eps.clone() });
            let shrunk = afun::scale_affine(cone, &(Rational::one() - &eps), &phi_y);
            let h = afun::subtract_affine(cone, &phi_x, &shrunk).map_err(internal)?;

            let mut with_h = all_fns.clone();
            with_h.push(&h);
            let two_eps = &eps + &eps;
            let mut a: Vec<Rational> = ya.iter().map(|v| int_rat(v) * (Rational::one() - &two_eps)).collect();
            a.push(Rational::zero());
            let mut b: Vec<Rational> = xa.iter().map(int_rat).collect();
            b.push(Rational::one());
            cancel(cone, &with_h, &a, &b, &mut log)?;

            let h_index = st.psi.len();
            st.psi.push(h.clone());
            st.x.push(BigInt::one());
            st.y.push(BigInt::zero());
            let cols = st.q.first().map_or(0, Vec::len);
            st.q.push(vec![BigInt::zero(); cols]);

            let mut targets = vec![h.clone()];
            targets.extend(excess_x.iter().map(|&i| st.psi[i].clone()));
            let target_sum = afun::sum(cone, targets.iter().map(|f| &**f));
            if !afun::lhd(cone, &st.psi[j1], &target_sum) {
                return Err(Error::invariant(format!("generator {j1} is not ◁ h plus the x-excess generators")));
            }
            let parts = afun::riesz_decompose_many(cone, &st.psi[j1], &targets).map_err(internal)?;
            let h_prime = parts[0].clone();

            let kept: Vec<usize> = (0..h_index).filter(|&k| k != j1).collect();
            let mut new_psi = Vec::new();
            let mut position = BTreeMap::new();
            for &k in &kept {
                position.insert(k, new_psi.len());
                new_psi.push(st.psi[k].clone());
            }
            let mut g_position = BTreeMap::new();
            for (&i, g) in excess_x.iter().zip(&parts[1..]) {
                new_psi[position[&i]] = afun::subtract_affine(cone, g, &st.psi[i]).map_err(internal)?;
                g_position.insert(i, new_psi.len());
                new_psi.push(g.clone());
            }
            let h_pos = new_psi.len();
            new_psi.push(afun::subtract_affine(cone, &h_prime, &h).map_err(internal)?);
            let h_prime_pos = new_psi.len();
            new_psi.push(h_prime);

            let images: Vec<Vec<usize>> = (0..=h_index)
                .map(|k| {
                    if k == j1 {
                        let mut v = vec![h_prime_pos];
                        v.extend(excess_x.iter().map(|i| g_position[i]));
                        v
                    } else if k == h_index {
                        vec![h_pos, h_prime_pos]
                    } else if let Some(&g) = g_position.get(&k) {
                        vec![position[&k], g]
                    } else {
                        vec![position[&k]]
                    }
                })
                .collect();
            st.apply(cone, new_psi, &images)?;
        }
    }

    let f = Factorization { q: st.q, psi: st.psi, source_dim: n, log };
    if !f.commutes(cone, phi) {
        return Err(Error::invariant("ψ ∘ Q ≠ φ"));
    }
    let (qx, qy) = (f.apply(&to_rat(x)), f.apply(&to_rat(y)));
    if qx.iter().zip(&qy).any(|(a, b)| a > b) {
        return Err(Error::invariant("Qx ≤ Qy fails"));
    }
    Ok(f)
}

fn to_rat(v: &[BigInt]) -> Vec<Rational> {
    v.iter().map(int_rat).collect()
}

/// Dyadic gaps are searched down to `2^-MAX_HALVINGS`.
const MAX_HALVINGS: u32 = 64;

fn dyadic(k: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << k)
}

/// The largest `2⁻ᵏ` with `k ≥ first` satisfying a predicate that is
/// monotone in `ε` (once true, true for every smaller `ε`). Doubling finds a
/// bracket and bisection narrows it.
fn largest_dyadic(first: u32, holds: impl Fn(&Rational) -> bool) -> Option<Rational> {
    if holds(&dyadic(first)) {
        return Some(dyadic(first));
    }
    let (mut bad, mut step) = (first, 1);
    let good = loop {
        let k = (first + step).min(MAX_HALVINGS);
        if holds(&dyadic(k)) {
            break k;
        }
        if k == MAX_HALVINGS {
            return None;
        }
        bad = k;
        step *= 2;
    };
    let mut good = good;
    while good - bad > 1 {
        let mid = bad + (good - bad) / 2;
        if holds(&dyadic(mid)) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Some(dyadic(good))
}

/// The largest `ε = 2⁻ᵏ` with `φ(x) ≪ (1 − ε) φ(y)` and
/// `ε < 1/(4 v)` for every nonzero entry `v` of `x` and `y`.
fn gap_epsilon(cone: &Cone, phi_x: &AffineFn, phi_y: &AffineFn, x: &[BigInt], y: &[BigInt]) -> Result<Rational> {
    let bound = x
        .iter()
        .chain(y)
        .filter(|v| v.is_positive())
        .map(|v| Rational::new(BigInt::one(), BigInt::from(4) * v))
        .min();
    largest_dyadic(0, |eps| {
        bound.as_ref().is_none_or(|b| eps < b)
            && afun::way_below(cone, phi_x, &afun::scale(cone, &(Rational::one() - eps), phi_y))
    })
    .ok_or_else(|| Error::invariant("no dyadic ε ≥ 2^-64 separates φ(x) from φ(y)"))
}

fn sandwich_epsilon(cone: &Cone, fx: &AffineFn, fy: &AffineFn) -> Result<Rational> {
    largest_dyadic(1, |eps| {
        let lo = afun::scale(cone, &(Rational::one() + eps), fx);
        let hi = afun::scale(cone, &(Rational::one() - eps), fy);
        afun::way_below(cone, &lo, &hi)
    })
    .ok_or_else(|| Error::invariant("no dyadic ε ≥ 2^-64 fits between φ(x) and φ(y)"))
}

/// The smallest power of two `D` such that rounding `x` up and `y` down to
/// multiples of `1/D` stays within the `(1 ± ε)` band. Returns `D` and the
/// integer vectors `D x′`, `D y′`.
fn sandwich(x: &[Rational], y: &[Rational], eps: &Rational) -> Result<(BigInt, Vec<BigInt>, Vec<BigInt>)> {
    let mut d = BigInt::one();
    for _ in 0..=256 {
        let dr = int_rat(&d);
        let xs: Vec<BigInt> =
            x.iter().map(|v| if v.is_zero() { BigInt::zero() } else { (v * &dr).floor().to_integer() + 1 }).collect();
        let ys: Vec<BigInt> =
            y.iter().map(|v| if v.is_zero() { BigInt::zero() } else { (v * &dr).ceil().to_integer() - 1 }).collect();
        let x_ok = x.iter().zip(&xs).all(|(v, s)| int_rat(s) / &dr <= v * (Rational::one() + eps));
        let y_ok = y.iter().zip(&ys).all(|(v, s)| int_rat(s) / &dr >= v * (Rational::one() - eps));
        if x_ok && y_ok {
            return Ok((d, xs, ys));
        }
        d *= 2;
    }
    Err(Error::invariant("no denominator up to 2^256 fits the sandwich"))
}

fn ext(v: &[Rational]) -> ExtVector {
    ExtVector::from_rationals(v)
}

fn mat_mul(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols).map(|j| row.iter().zip(b).fold(BigInt::zero(), |acc, (p, brow)| acc + p * &brow[j])).collect()
        })
        .collect()
}

pub fn triangle(cone: &Cone, phi: &CuMorphismToA, points: &[Vec<Rational>]) -> Result<Factorization> {
    triangle_with_budget(cone, phi, points, DEFAULT_BUDGET)
}

/// A factorization with `Qx ≪ Qy` for every ordered pair of `points` with
/// `φ(x) ≪ φ(y)`. Pairs are processed once in lexicographic order and every
/// previously fixed pair is re-checked after each step.
pub fn triangle_with_budget(
    cone: &Cone,
    phi: &CuMorphismToA,
    points: &[Vec<Rational>],
    budget: usize,
) -> Result<Factorization> {
    let images = points.iter().map(|p| phi.image(cone, p)).collect::<Result<Vec<_>>>()?;
    let mut current = Factorization::identity(phi);
    let mut fixed: Vec<(usize, usize)> = Vec::new();
    for a in 0..points.len() {
        for b in 0..points.len() {
            if !afun::way_below(cone, &images[a], &images[b]) {
                continue;
            }
            fixed.push((a, b));
            let (qx, qy) = (current.apply(&points[a]), current.apply(&points[b]));
            if ext(&qx).way_below(&ext(&qy))? {
                continue;
            }
            let psi = current.psi_morphism();
            let eps = sandwich_epsilon(cone, &images[a], &images[b])?;
            let (denom, xs, ys) = sandwich(&qx, &qy, &eps)?;
            current.log.push(LogEntry::Sandwich { pair: (a, b), eps, denom });
            let step = core_triangle_with_budget(cone, &psi, &xs, &ys, budget)?;
            current = Factorization {
                q: mat_mul(&step.q, &current.q),
                psi: step.psi,
                source_dim: current.source_dim,
                log: [current.log, step.log].concat(),
            };
            for &(c, d) in &fixed {
                let (qc, qd) = (current.apply(&points[c]), current.apply(&points[d]));
                if !ext(&qc).way_below(&ext(&qd))? {
                    return Err(Error::invariant(format!("pair ({c}, {d}) was not preserved")));
                }
            }
        }
    }
    if !current.commutes(cone, phi) {
        return Err(Error::invariant("ψ ∘ Q ≠ φ"));
    }
    Ok(current)
}

/// Settings for [`build_inductive_system`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildOptions {
    pub rounds: usize,
    /// At most this many probe vectors are used per round.
    pub probe_cap: usize,
    pub budget: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { rounds: 2, probe_cap: 4, budget: DEFAULT_BUDGET }
    }
}

/// A chain of stages `[0, ∞]^{n_k}` with morphisms `ψ_k` into `A(C)` and
/// integer connecting matrices.
#[derive(Clone, Debug)]
pub struct InductiveSystem {
    pub system: System,
    pub psi: Vec<CuMorphismToA>,
}

impl InductiveSystem {
    /// Checks `ψ_j ∘ M_{i,j} = ψ_i` on the generators of every stage `i`.
    pub fn commutes(&self, cone: &Cone) -> bool {
        self.system.maps().iter().all(|(&(i, j), m)| {
            (0..m.cols()).all(|e| {
                let column: Vec<Rational> = (0..m.rows()).map(|l| m.entry(l, e).clone()).collect();
                combine(cone, self.psi[j].gens(), &column) == self.psi[i].gens()[e]
            })
        })
    }
}

/// Probe vectors from the grid `{0, 1/2, 1, …, k}ⁿ`, ordered by coordinate
/// sum and then lexicographically, truncated to `cap` entries.
pub fn probe_grid(n: usize, k: u32, cap: usize) -> Vec<Vec<Rational>> {
    let steps = 2 * k as usize + 1;
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    let mut out: Vec<Vec<usize>> = Vec::new();
    // Enumerate by increasing total number of half steps; within a total,
    // lexicographic order is the natural recursive order.
    let max_total = n * (steps - 1);
    for total in 0..=max_total {
        let mut current = Vec::with_capacity(n);
        fill(n, total, steps - 1, &mut current, &mut out, cap);
        if out.len() >= cap {
            break;
        }
    }
    out.truncate(cap);
    out.into_iter().map(|v| v.into_iter().map(|s| &half * Rational::from_integer(s.into())).collect()).collect()
}

fn fill(n: usize, remaining: usize, max: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, cap: usize) {
    if out.len() >= cap {
        return;
    }
    if current.len() == n {
        if remaining == 0 {
            out.push(current.clone());
        }
        return;
    }
    let slots_left = n - current.len() - 1;
    for s in 0..=max.min(remaining) {
        if remaining - s > slots_left * max {
            continue;
        }
        current.push(s);
        fill(n, remaining - s, max, current, out, cap);
        current.pop();
    }
}

/// Builds the chain of stages obtained by absorbing one sample function per
/// round. Stage 0 is `[0, ∞]` with `ψ_0(1) = sample[0]`; round `r` appends
/// `sample[r mod len]` as a new coordinate and factors through [`triangle`]
/// on a probe grid.
pub fn build_inductive_system(cone: &Cone, sample: &[AffineFn], opts: BuildOptions) -> Result<InductiveSystem> {
    if sample.is_empty() {
        return Err(Error::precondition("the sample must be nonempty"));
    }
    let mut psi = vec![CuMorphismToA::new(vec![sample[0].clone()])];
    let mut steps: Vec<Vec<Vec<BigInt>>> = Vec::new();
    for r in 1..=opts.rounds {
        let prev = psi.last().expect("at least one stage");
        let mut gens = prev.gens().to_vec();
        gens.push(sample[r % sample.len()].clone());
        let phi = CuMorphismToA::new(gens);
        let probes = probe_grid(phi.dim(), r as u32, opts.probe_cap);
        let f = triangle_with_budget(cone, &phi, &probes, opts.budget)?;
        let n_prev = prev.dim();
        steps.push(f.q().iter().map(|row| row[..n_prev].to_vec()).collect());
        psi.push(f.psi_morphism());
    }
    let dims: Vec<usize> = psi.iter().map(CuMorphismToA::dim).collect();
    let mut maps = BTreeMap::new();
    for i in 0..dims.len() {
        let mut acc = identity(dims[i]);
        for j in i + 1..dims.len() {
            acc = mat_mul(&steps[j - 1], &acc);
            maps.insert((i, j), CuMatrix::from_integers(dims[j], dims[i], &acc)?);
        }
    }
    let indices = (0..dims.len()).map(|k| format!("stage{k}")).collect();
    let system = System::new(Direction::Inductive, indices, dims, maps)?;
    let built = InductiveSystem { system, psi };
    if !built.commutes(cone) {
        return Err(Error::invariant("stage morphisms do not commute with the connecting maps"));
    }
    Ok(built)
}

/// Converts a small nonnegative integer vector.
pub fn int_vector(v: &[u64]) -> Vec<BigInt> {
    v.iter().map(|&e| BigInt::from(e)).collect()
}

/// The entries of an integer vector as `u64`, when they fit.
pub fn to_u64(v: &[BigInt]) -> Option<Vec<u64>> {
    v.iter().map(ToPrimitive::to_u64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::xreal::{int, rat};

    fn b(v: &[u64]) -> Vec<BigInt> {
        int_vector(v)
    }

    fn unit(cone: &Cone, gen: &str, value: Rational) -> AffineFn {
        let x = cone.gen(gen).unwrap();
        let f = LscFn::new(cone, cone.supp(x), [(x, value.into())].into()).unwrap();
        AffineFn::new(f).unwrap()
    }

    #[test]
    fn degree_examples() {
        let d = degree(&b(&[1, 0]), &b(&[0, 2])).unwrap();
        assert_eq!(d, Degree { m: 2.into(), n1: 0, n2: 1, n: 2 });
        let d = degree(&b(&[4, 1, 7]), &b(&[4, 1, 7])).unwrap();
        assert_eq!(d, Degree { m: 0.into(), n1: 3, n2: 3, n: 3 });
        let d = degree(&b(&[3, 0, 1]), &b(&[0, 3, 1])).unwrap();
        assert_eq!(d, Degree { m: 3.into(), n1: 1, n2: 1, n: 3 });
        assert!(degree(&b(&[1]), &b(&[1, 2])).is_err());
    }

    #[test]
    fn identity_when_already_ordered() {
        let c = fixtures::e1();
        let u = unit(&c, "u", int(1));
        let phi = CuMorphismToA::new(vec![u.clone(), u]);
        let f = core_triangle(&c, &phi, &b(&[1, 1]), &b(&[2, 1])).unwrap();
        assert_eq!(f.q(), identity(2).as_slice());
        assert_eq!(f.psi(), phi.gens());
    }

    #[test]
    fn e1_identity_pair() {
        let c = fixtures::e1();
        let u = unit(&c, "u", int(1));
        let phi = CuMorphismToA::new(vec![u.clone(), u]);
        let (x, y) = (b(&[1, 0]), b(&[0, 2]));
        let f = core_triangle(&c, &phi, &x, &y).unwrap();
        assert!(f.commutes(&c, &phi));
        let (qx, qy) = (f.apply(&to_rat(&x)), f.apply(&to_rat(&y)));
        assert!(qx.iter().zip(&qy).all(|(a, b)| a <= b));
        let degrees = f.degrees();
        assert!(degrees.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn compact_single_coordinate_is_zero() {
        let c = fixtures::e1();
        let phi = CuMorphismToA::new(vec![afun::zero(&c)]);
        let f = core_triangle(&c, &phi, &b(&[2]), &b(&[1])).unwrap();
        assert_eq!(f.target_dim(), 0);
        let nonzero = CuMorphismToA::new(vec![unit(&c, "u", int(1))]);
        assert!(matches!(core_triangle(&c, &nonzero, &b(&[2]), &b(&[1])), Err(Error::Precondition(_))));
    }

    #[test]
    fn wrapper_fixes_related_pairs() {
        let c = fixtures::e1();
        let u = unit(&c, "u", int(1));
        let phi = CuMorphismToA::new(vec![u.clone(), u]);
        let pts = vec![vec![int(1), int(0)], vec![int(0), int(2)]];
        let f = triangle(&c, &phi, &pts).unwrap();
        let (qx, qy) = (f.apply(&pts[0]), f.apply(&pts[1]));
        assert!(ext(&qx).way_below(&ext(&qy)).unwrap());
        assert!(f.commutes(&c, &phi));

        let unrelated = vec![vec![int(1), int(0)]];
        assert_eq!(triangle(&c, &phi, &unrelated).unwrap().q(), identity(2).as_slice());
    }

    #[test]
    fn elex_inductive_system() {
        let c = fixtures::elex();
        let sample = vec![unit(&c, "x1", int(1)), unit(&c, "x2", int(1))];
        let s = build_inductive_system(&c, &sample, BuildOptions { rounds: 2, ..Default::default() }).unwrap();
        assert_eq!(s.system.len(), 3);
        assert!(s.commutes(&c));
        assert!(s.system.is_coherent());

        let single = build_inductive_system(&c, &sample[..1], BuildOptions { rounds: 0, ..Default::default() })
            .unwrap();
        assert_eq!(single.system.len(), 1);
        assert!(single.system.maps().is_empty());
        assert_eq!(single.psi[0].gens(), &sample[..1]);
    }

    #[test]
    fn probe_grid_order() {
        let g = probe_grid(2, 1, 5);
        let half = rat(1, 2);
        assert_eq!(
            g,
            vec![
                vec![int(0), int(0)],
                vec![int(0), half.clone()],
                vec![half.clone(), int(0)],
                vec![int(0), int(1)],
                vec![half.clone(), half],
            ]
        );
    }
}
