//! Seeded invariant suites over the bundled fixtures.
//!
//! Every suite draws its instances from its own generator seeded with the
//! run seed and the suite name, so a failure can be reproduced from the
//! reported seed alone.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde_json::{json, Value};

use crate::afun::{self, AffineFn};
use crate::cone::Cone;
use crate::ehs::{self, CuMorphismToA};
use crate::error::Result;
use crate::fixtures;
use crate::limits::{self, BratteliDiagram, CuMatrix, RoundtripOptions};
use crate::riesz;
use crate::sample::{self, SampleRng};
use crate::xreal::{ExtScalar, ExtVector, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub seed: u64,
    pub first_failure: Option<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub seed: u64,
    pub samples: usize,
    pub suites: Vec<SuiteResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    pub fn to_value(&self) -> Value {
        json!({
            "kind": "selftest",
            "seed": self.seed,
            "samples": self.samples,
            "passed": self.passed(),
            "suites": self.suites.iter().map(|s| json!({
                "name": s.name,
                "cases": s.cases,
                "failures": s.failures,
                "seed": s.seed,
                "first_failure": s.first_failure,
            })).collect::<Vec<_>>(),
        })
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.suites {
            let status = if s.passed() { "pass" } else { "FAIL" };
            writeln!(f, "{status} {:<32} {:>6} cases {:>4} failures  seed {}", s.name, s.cases, s.failures, s.seed)?;
            if let Some(msg) = &s.first_failure {
                writeln!(f, "     first failure: {msg}")?;
            }
        }
        Ok(())
    }
}

/// Derives a per-suite seed from the run seed and the suite name (FNV-1a).
pub fn suite_seed(seed: u64, name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325 ^ seed, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

struct Suite {
    result: SuiteResult,
    rng: SampleRng,
}

impl Suite {
    fn new(name: String, seed: u64) -> Self {
        let s = suite_seed(seed, &name);
        Suite {
            result: SuiteResult { name, cases: 0, failures: 0, seed: s, first_failure: None },
            rng: sample::rng(s),
        }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.result.cases += 1;
        if !ok {
            self.result.failures += 1;
            if self.result.first_failure.is_none() {
                self.result.first_failure = Some(format!("case {}: {}", self.result.cases - 1, describe()));
            }
        }
    }

    fn check(&mut self, outcome: Result<bool>, describe: impl FnOnce() -> String) {
        match outcome {
            Ok(ok) => self.record(ok, describe),
            Err(e) => self.record(false, || format!("{}: {e}", describe())),
        }
    }
}

/// Runs every suite on the bundled fixtures.
pub fn run(samples: usize, seed: u64) -> Report {
    run_on(&fixtures::all(), &[("car", fixtures::car(), 6), ("two_components", fixtures::two_components(), 2)], samples, seed)
}

/// Runs every suite on the given cones and diagrams (with their depths).
pub fn run_on(cones: &[Cone], diagrams: &[(&str, BratteliDiagram, usize)], samples: usize, seed: u64) -> Report {
    let mut suites = vec![way_below_suite(samples, seed), matrix_suite(samples, seed)];
    for cone in cones {
        suites.push(canonical_suite(cone, samples, seed));
        suites.push(index_set_suite(cone, seed));
        suites.push(interpolation_suite(cone, samples, seed));
        suites.push(cancellation_suite(cone, samples, seed));
        suites.push(subtraction_suite(cone, samples, seed));
        suites.extend(triangle_suites(cone, samples.div_ceil(50).clamp(1, 20), seed));
        suites.push(roundtrip_suite(cone, samples, seed));
    }
    for (name, d, depth) in diagrams {
        suites.push(bratteli_suite(name, d, *depth, seed));
    }
    Report { seed, samples, suites }
}

/// `a ≪ b` in `[0, ∞]ⁿ` iff `a ≤ b_k` for some member `b_k` of the sequence
/// `(1 − 2⁻ᵏ)·min(b, 2ᵏ)` increasing to `b`.
pub fn way_below_by_approximants(a: &ExtVector, b: &ExtVector, depth: u32) -> bool {
    (1..=depth).any(|k| {
        let two_k = Rational::from_integer(BigInt::from(2).pow(k));
        let factor = Rational::one() - Rational::one() / &two_k;
        a.0.iter().zip(&b.0).all(|(ai, bi)| {
            let capped = match bi {
                ExtScalar::Finite(q) if *q < two_k => q.clone(),
                _ => two_k.clone(),
            };
            *ai <= ExtScalar::Finite(capped * &factor)
        })
    })
}

fn way_below_suite(samples: usize, seed: u64) -> SuiteResult {
    let mut s = Suite::new("xreal.way_below".into(), seed);
    for _ in 0..samples * 10 {
        let n = s.rng.gen_range(1..=5);
        let a = sample::ext_vector(&mut s.rng, n);
        let b = sample::ext_vector(&mut s.rng, n);
        let expected = way_below_by_approximants(&a, &b, 12);
        s.check(a.way_below(&b).map(|got| got == expected), || format!("{a} vs {b}"));
    }
    s.result
}

fn matrix_suite(samples: usize, seed: u64) -> SuiteResult {
    let mut s = Suite::new("limits.matrix_preserves_way_below".into(), seed);
    for _ in 0..samples {
        let (rows, cols) = (s.rng.gen_range(1..=4), s.rng.gen_range(1..=4));
        let entries =
            (0..rows).map(|_| (0..cols).map(|_| Rational::from_integer(s.rng.gen_range(0..=3).into())).collect()).collect();
        let m = CuMatrix::new(rows, cols, entries).expect("nonnegative entries");
        let b = sample::ext_vector(&mut s.rng, cols);
        let a = ExtVector(
            b.0.iter()
                .map(|v| match v {
                    ExtScalar::Finite(q) => ExtScalar::Finite(q / Rational::from_integer(2.into())),
                    ExtScalar::Infinite => ExtScalar::from_int(s.rng.gen_range(0..=5)),
                })
                .collect(),
        );
        let ok = (|| -> Result<bool> { Ok(!a.way_below(&b)? || m.apply(&a)?.way_below(&m.apply(&b)?)?) })();
        s.check(ok, || format!("{m} on {a} ≪ {b}"));
    }
    s.result
}

fn canonical_suite(cone: &Cone, samples: usize, seed: u64) -> SuiteResult {
    let mut s = Suite::new(format!("cone.canonical[{}]", cone.name()), seed);
    let family = riesz::separating_family(cone);
    let mut previous = None;
    for _ in 0..samples {
        let (w, raw) = sample::raw_sum(cone, &mut s.rng);
        let y = match cone.canonicalize(w, &raw) {
            Ok(y) => y,
            Err(e) => {
                s.record(false, || format!("canonicalize failed: {e}"));
                continue;
            }
        };
        let again = cone.canonicalize(y.support(), y.coeffs());
        s.check(again.map(|z| z == y), || format!("not a fixed point: {}", cone.format_element(&y)));
        if let Some(prev) = previous.replace(y.clone()) {
            if prev != y {
                let separated = family.iter().any(|f| riesz::pairing(cone, &prev, f) != riesz::pairing(cone, &y, f));
                s.record(separated, || {
                    format!("{} and {} are not separated", cone.format_element(&prev), cone.format_element(&y))
                });
            }
        }
    }
    s.result
}

fn index_set_suite(cone: &Cone, seed: u64) -> SuiteResult {
    let mut s = Suite::new(format!("riesz.index_sets[{}]", cone.name()), seed);
    for w1 in cone.idems() {
        for w2 in cone.idems() {
            let (o1, o2) = (riesz::o_set(cone, w1), riesz::o_set(cone, w2));
            let name = || format!("{}, {}", cone.idem_name(w1), cone.idem_name(w2));
            s.record(&o1 | &o2 == riesz::o_set(cone, cone.meet(w1, w2)), || format!("union at {}", name()));
            s.record(&o1 & &o2 == riesz::o_set(cone, cone.join(w1, w2)), || format!("intersection at {}", name()));
            s.record(o1.is_subset(&o2) == cone.idem_leq(w2, w1), || format!("inclusion at {}", name()));
            let pt = &riesz::p_tilde_set(cone, w1) & &riesz::p_tilde_set(cone, w2);
            s.record(pt == riesz::p_tilde_set(cone, cone.meet(w1, w2)), || format!("tilde sets at {}", name()));
            if !cone.idem_leq(w2, w1) {
                let diff = &riesz::p_set(cone, w1) - &o2;
                s.record(!diff.is_empty(), || format!("empty difference at {}", name()));
            }
        }
    }
    s.result
}

fn interpolation_suite(cone: &Cone, samples: usize, seed: u64) -> SuiteResult {
    let mut s = Suite::new(format!("riesz.interpolation[{}]", cone.name()), seed);
    for _ in 0..samples {
        let ([f1, f2], [g1, g2]) = sample::interpolation_instance(cone, &mut s.rng);
        let outcome = riesz::interpolate(cone, [&f1, &f2], [&g1, &g2]).map(|h| {
            [&f1, &f2].iter().all(|f| riesz::leq(cone, f, &h)) && [&g1, &g2].iter().all(|g| riesz::leq(cone, &h, g))
        });
        s.check(outcome, || format!("f = {:?}, {:?}; g = {:?}, {:?}", f1.values(), f2.values(), g1.values(), g2.values()));
    }
    s.result
}

fn cancellation_suite(cone: &Cone, samples: usize, seed: u64) -> SuiteResult {
    let mut s = Suite::new(format!("afun.weak_cancellation[{}]", cone.name()), seed);
    for _ in 0..samples {
        let g = sample::lsc(cone, &mut s.rng);
        let h = sample::affine(cone, &mut s.rng);
        let f = if s.rng.gen_bool(0.5) {
            match AffineFn::new(g.clone()) {
                Ok(ga) => sample::lhd_below(cone, &mut s.rng, &ga).into_inner(),
                Err(_) => sample::affine(cone, &mut s.rng).into_inner(),
            }
        } else {
            sample::affine(cone, &mut s.rng).into_inner()
        };
        let premise = afun::way_below(cone, &afun::add(cone, &f, &h), &afun::add(cone, &g, &h));
        s.record(!premise || afun::way_below(cone, &f, &g), || {
            format!("f = {}, g = {}, h = {}", f.display(cone), g.display(cone), h.display(cone))
        });
    }
    s.result
}

fn subtraction_suite(cone: &Cone, samples: usize, seed: u64) -> SuiteResult {
    let mut s = Suite::new(format!("afun.subtract_decompose[{}]", cone.name()), seed);
    for _ in 0..samples {
        let g = sample::nonzero_affine(cone, &mut s.rng);
        let f = sample::lhd_below(cone, &mut s.rng, &g);
        let outcome = afun::subtract(cone, &f, &g).map(|(h, eps)| {
            afun::add(cone, &f, &h) == *g && eps.is_positive() && afun::leq(cone, &afun::scale(cone, &eps, &g), &h)
        });
        s.check(outcome, || format!("subtract {} from {}", f.display(cone), g.display(cone)));

        let g1 = sample::affine(cone, &mut s.rng);
        let g2 = sample::affine(cone, &mut s.rng);
        let total = afun::add_affine(cone, &g1, &g2);
        let f = sample::lhd_below(cone, &mut s.rng, &total);
        let outcome = afun::riesz_decompose(cone, &f, &g1, &g2).map(|(f1, f2)| {
            afun::add(cone, &f1, &f2) == *f && afun::lhd(cone, &f1, &g1) && afun::lhd(cone, &f2, &g2)
        });
        s.check(outcome, || format!("split {} over {} + {}", f.display(cone), g1.display(cone), g2.display(cone)));
    }
    s.result
}

/// A random triangle instance: `φ` of dimension 2 to 4, integer vectors
/// with entries at most 8 and `φ(x) ≪ φ(y)`.
pub fn triangle_instance(cone: &Cone, rng: &mut SampleRng) -> (CuMorphismToA, Vec<BigInt>, Vec<BigInt>) {
    loop {
        let n = rng.gen_range(2..=4);
        let phi = CuMorphismToA::new((0..n).map(|_| sample::nonzero_affine(cone, rng)).collect());
        let y: Vec<u64> = (0..n).map(|_| rng.gen_range(0..=8)).collect();
        for _ in 0..20 {
            let x: Vec<u64> = (0..n).map(|_| rng.gen_range(0..=8)).collect();
            let (xb, yb) = (ehs::int_vector(&x), ehs::int_vector(&y));
            let fx = phi.image(cone, &to_rat(&xb)).expect("dimensions agree");
            let fy = phi.image(cone, &to_rat(&yb)).expect("dimensions agree");
            if x.iter().zip(&y).any(|(a, b)| a > b) && afun::way_below(cone, &fx, &fy) {
                return (phi, xb, yb);
            }
        }
    }
}

fn to_rat(v: &[BigInt]) -> Vec<Rational> {
    v.iter().map(|e| Rational::from_integer(e.clone())).collect()
}

/// Checks a core factorization: `ψ ∘ Q = φ`, `Qx ≤ Qy`, nonnegative integer
/// entries and a strictly decreasing degree log.
pub fn check_core(cone: &Cone, phi: &CuMorphismToA, x: &[BigInt], y: &[BigInt], f: &ehs::Factorization) -> bool {
    let (qx, qy) = (f.apply(&to_rat(x)), f.apply(&to_rat(y)));
    f.commutes(cone, phi)
        && qx.iter().zip(&qy).all(|(a, b)| a <= b)
        && f.q().iter().flatten().all(|e| *e >= BigInt::zero())
        && f.degrees().windows(2).all(|w| w[0] > w[1])
}

/// The core lemma and the wrapper on the same random instances, reported
/// as two suites.
fn triangle_suites(cone: &Cone, instances: usize, seed: u64) -> [SuiteResult; 2] {
    let mut core = Suite::new(format!("ehs.triangle[{}]", cone.name()), seed);
    let mut wrapper = Suite::new(format!("ehs.wrapper[{}]", cone.name()), seed);
    if cone.idem_count() < 2 {
        return [core.result, wrapper.result];
    }
    for _ in 0..instances {
        let (phi, x, y) = triangle_instance(cone, &mut core.rng);
        let outcome = ehs::core_triangle(cone, &phi, &x, &y).map(|f| check_core(cone, &phi, &x, &y, &f));
        core.check(outcome, || format!("x = {x:?}, y = {y:?}"));

        let points = vec![to_rat(&x), to_rat(&y)];
        let outcome = ehs::triangle(cone, &phi, &points).and_then(|f| check_wrapper(cone, &phi, &points, &f));
        wrapper.check(outcome, || format!("x = {x:?}, y = {y:?}"));
    }
    [core.result, wrapper.result]
}

/// Checks a wrapper factorization: `ψ ∘ Q = φ`, integral `Q` and `Qa ≪ Qb`
/// for every pair of points with `φ(a) ≪ φ(b)`.
pub fn check_wrapper(cone: &Cone, phi: &CuMorphismToA, points: &[Vec<Rational>], f: &ehs::Factorization) -> Result<bool> {
    let images = points.iter().map(|p| phi.image(cone, p)).collect::<Result<Vec<_>>>()?;
    for (a, pa) in points.iter().enumerate() {
        for (b, pb) in points.iter().enumerate() {
            if afun::way_below(cone, &images[a], &images[b])
                && !ExtVector::from_rationals(&f.apply(pa)).way_below(&ExtVector::from_rationals(&f.apply(pb)))?
            {
                return Ok(false);
            }
        }
    }
    Ok(f.commutes(cone, phi) && f.q().iter().flatten().all(|e| *e >= BigInt::zero()))
}

fn roundtrip_suite(cone: &Cone, samples: usize, seed: u64) -> SuiteResult {
    let mut s = Suite::new(format!("limits.roundtrip[{}]", cone.name()), seed);
    let opts = RoundtripOptions { functions: 3, rounds: 2, pairings: samples.min(100), seed: s.result.seed };
    match limits::roundtrip_check(cone, opts) {
        Ok(r) => {
            for _ in 0..r.pairings - r.mismatches.len().min(r.pairings) {
                s.record(true, String::new);
            }
            for m in r.mismatches {
                s.record(false, || m);
            }
        }
        Err(e) => s.record(false, || e.to_string()),
    }
    s.result
}

fn bratteli_suite(name: &str, d: &BratteliDiagram, depth: usize, seed: u64) -> SuiteResult {
    let mut s = Suite::new(format!("limits.bratteli[{name}]"), seed);
    match limits::bratteli_import(d, depth) {
        Ok((ind, proj)) => {
            s.record(ind.is_coherent() && proj.is_coherent(), || "incoherent system".into());
            s.record(proj.dualize() == ind, || "dualizing twice changed the system".into());
            let counts = limits::stage_idempotent_counts(&proj);
            for k in 1..=depth {
                let brute = limits::order_ideal_count(d, k);
                let ok = matches!(&brute, Ok(c) if BigInt::from(*c) == BigInt::from(counts[k - 1].clone()));
                s.record(ok, || format!("depth {k}: {} idempotents, brute force {brute:?}", counts[k - 1]));
            }
        }
        Err(e) => s.record(false, || e.to_string()),
    }
    s.result
}

/// Totals per suite family, e.g. `ehs.triangle` across all cones.
pub fn family_totals(report: &Report) -> BTreeMap<String, (usize, usize)> {
    let mut out: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for s in &report.suites {
        let family = s.name.split('[').next().unwrap_or(&s.name).to_string();
        let e = out.entry(family).or_default();
        e.0 += s.cases;
        e.1 += s.failures;
    }
    out
}
