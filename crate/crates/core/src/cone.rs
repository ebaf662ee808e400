//! Finite presentations of finitely generated extended Choquet cones.
//!
//! A presentation lists a finite lattice `W` of idempotents, a finite set `X`
//! of generators with their support idempotents and the predicate
//! `below(x, w)` (meaning `x ≤ w`), for every idempotent `v` a set `R_v` of
//! extreme-ray representatives of the stratum `C_v`, and the reduction table
//! `red(x, v)` giving the coordinates of `x + v` in `C_v`.
//!
//! An element is stored canonically as `Σ α_r r + w` with `w ∈ W` and
//! strictly positive `α_r` on `R_w`.
//!
//! Reductions default to the empty map when `x ≤ v` and to `{x: 1}` when
//! `x ∈ R_v`; only other entries need to be listed.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::feasibility::{LinearSystem, Optimum, Rel};
use crate::xreal::{format_rational, ExtScalar, Rational};

/// An idempotent of a presented cone, by position in its lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Idem(usize);

/// A generator of a presented cone, by position in the id-sorted generator list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Gen(usize);

impl Idem {
    pub fn index(self) -> usize {
        self.0
    }
}

impl Gen {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub id: String,
    pub support: String,
    pub below: Vec<String>,
}

/// An explicit entry `red(generator, at) = coeffs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionSpec {
    pub generator: String,
    pub at: String,
    pub coeffs: BTreeMap<String, Rational>,
}

/// A presentation as written in a `.cone` file, before any checking.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Presentation {
    pub name: String,
    pub notes: Vec<String>,
    pub idempotents: Vec<String>,
    /// Pairs `(a, b)` meaning `a ≤ b`; reflexive pairs are implicit.
    pub order: Vec<(String, String)>,
    pub generators: Vec<GeneratorSpec>,
    pub rays: BTreeMap<String, Vec<String>>,
    pub reductions: Vec<ReductionSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    Lattice,
    Below,
    Rays,
    Reduction,
    Coherence,
    StrongConnectedness,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::Lattice => "lattice",
            ViolationKind::Below => "below",
            ViolationKind::Rays => "rays",
            ViolationKind::Reduction => "reduction",
            ViolationKind::Coherence => "coherence",
            ViolationKind::StrongConnectedness => "strong-connectedness",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.kind, self.message)
    }
}

/// The outcome of validating a presentation; empty means valid.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, message: String) {
        self.violations.push(Violation { kind, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

type Reduction = Vec<(Gen, Rational)>;

/// Index tables resolved from a presentation. Built for any syntactically
/// well-formed presentation, valid or not.
#[derive(Clone, Debug)]
struct Tables {
    idems: Vec<String>,
    gens: Vec<String>,
    leq: Vec<Vec<bool>>,
    supp: Vec<usize>,
    below: Vec<Vec<bool>>,
    rays: Vec<Vec<Gen>>,
    explicit: BTreeMap<(usize, usize), Reduction>,
}

impl Tables {
    fn build(p: &Presentation) -> Result<Self> {
        let idems = p.idempotents.clone();
        if idems.is_empty() {
            return Err(Error::Malformed("no idempotents".into()));
        }
        let idem_ix = index_of(&idems, "idempotent")?;
        let find_idem = |s: &str| -> Result<usize> {
            idem_ix.get(s).copied().ok_or_else(|| Error::UnknownIdempotent(s.to_string()))
        };

        let mut specs: Vec<&GeneratorSpec> = p.generators.iter().collect();
        specs.sort_by(|a, b| a.id.cmp(&b.id));
        let gens: Vec<String> = specs.iter().map(|g| g.id.clone()).collect();
        let gen_ix = index_of(&gens, "generator")?;
        let find_gen = |s: &str| -> Result<usize> {
            gen_ix.get(s).copied().ok_or_else(|| Error::UnknownGenerator(s.to_string()))
        };

        let n = idems.len();
        let mut leq = vec![vec![false; n]; n];
        for (i, row) in leq.iter_mut().enumerate() {
            row[i] = true;
        }
        for (a, b) in &p.order {
            leq[find_idem(a)?][find_idem(b)?] = true;
        }

        let mut supp = Vec::with_capacity(gens.len());
        let mut below = vec![vec![false; n]; gens.len()];
        for (gi, g) in specs.iter().enumerate() {
            supp.push(find_idem(&g.support)?);
            for w in &g.below {
                below[gi][find_idem(w)?] = true;
            }
        }

        let mut rays = vec![Vec::new(); n];
        for (w, list) in &p.rays {
            let wi = find_idem(w)?;
            let mut set = BTreeSet::new();
            for x in list {
                if !set.insert(Gen(find_gen(x)?)) {
                    return Err(Error::Malformed(format!("generator `{x}` listed twice in rays of `{w}`")));
                }
            }
            rays[wi] = set.into_iter().collect();
        }

        let mut explicit = BTreeMap::new();
        for r in &p.reductions {
            let key = (find_gen(&r.generator)?, find_idem(&r.at)?);
            let mut coeffs = Vec::new();
            for (x, c) in &r.coeffs {
                coeffs.push((Gen(find_gen(x)?), c.clone()));
            }
            if explicit.insert(key, coeffs).is_some() {
                return Err(Error::Malformed(format!(
                    "reduction of `{}` at `{}` given twice",
                    r.generator, r.at
                )));
            }
        }

        Ok(Tables { idems, gens, leq, supp, below, rays, explicit })
    }

    fn n(&self) -> usize {
        self.idems.len()
    }

    fn greatest(&self, candidates: impl Iterator<Item = usize> + Clone) -> Option<usize> {
        candidates.clone().find(|&c| candidates.clone().all(|d| self.leq[d][c]))
    }

    fn least(&self, candidates: impl Iterator<Item = usize> + Clone) -> Option<usize> {
        candidates.clone().find(|&c| candidates.clone().all(|d| self.leq[c][d]))
    }

    fn meet(&self, a: usize, b: usize) -> Option<usize> {
        self.greatest((0..self.n()).filter(move |&c| self.leq[c][a] && self.leq[c][b]))
    }

    fn join(&self, a: usize, b: usize) -> Option<usize> {
        self.least((0..self.n()).filter(move |&c| self.leq[a][c] && self.leq[b][c]))
    }

    /// The reduction `red(x, v)`, `None` when `supp(x) ≰ v` or when the
    /// entry is required but missing.
    fn red(&self, x: usize, v: usize) -> Option<Reduction> {
        if !self.leq[self.supp[x]][v] {
            return None;
        }
        if let Some(r) = self.explicit.get(&(x, v)) {
            return Some(r.iter().filter(|(_, c)| !c.is_zero()).cloned().collect());
        }
        if self.below[x][v] {
            Some(Vec::new())
        } else if self.rays[v].contains(&Gen(x)) {
            Some(vec![(Gen(x), Rational::one())])
        } else {
            None
        }
    }

    fn validate(&self) -> ValidationReport {
        use ViolationKind::*;
        let mut report = ValidationReport::default();
        let n = self.n();
        let name = |i: usize| &self.idems[i];

        // Lattice laws.
        for a in 0..n {
            for b in 0..n {
                if a != b && self.leq[a][b] && self.leq[b][a] {
                    report.push(Lattice, format!("antisymmetry fails: {} and {} are mutually ≤", name(a), name(b)));
                }
                for c in 0..n {
                    if self.leq[a][b] && self.leq[b][c] && !self.leq[a][c] {
                        report.push(Lattice, format!(
                            "transitivity fails: {} ≤ {} ≤ {} but not {} ≤ {}",
                            name(a), name(b), name(c), name(a), name(c)
                        ));
                    }
                }
            }
        }
        if self.greatest(0..n).is_none() {
            report.push(Lattice, "no top element".into());
        }
        if self.least(0..n).is_none() {
            report.push(Lattice, "no bottom element".into());
        }
        let mut lattice_ok = !report.has(Lattice);
        for a in 0..n {
            for b in a + 1..n {
                if self.meet(a, b).is_none() {
                    report.push(Lattice, format!("no meet of {} and {}", name(a), name(b)));
                    lattice_ok = false;
                }
                if self.join(a, b).is_none() {
                    report.push(Lattice, format!("no join of {} and {}", name(a), name(b)));
                    lattice_ok = false;
                }
            }
        }
        if lattice_ok {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let lhs = self.join(a, self.meet(b, c).unwrap()).unwrap();
                        let rhs = self
                            .meet(self.join(a, b).unwrap(), self.join(a, c).unwrap())
                            .unwrap();
                        if lhs != rhs {
                            report.push(Lattice, format!(
                                "distributivity fails at ({}, {}, {})",
                                name(a), name(b), name(c)
                            ));
                        }
                    }
                }
            }
        }

        // The below predicate.
        let top = self.greatest(0..n);
        for (x, gname) in self.gens.iter().enumerate() {
            let s = self.supp[x];
            if self.below[x][s] {
                report.push(Below, format!("{gname} lies below its own support {}, so it is idempotent", name(s)));
            }
            if let Some(t) = top {
                if !self.below[x][t] {
                    report.push(Below, format!("{gname} is not below the top element"));
                }
            }
            for w in 0..n {
                if self.below[x][w] && !self.leq[s][w] {
                    report.push(Below, format!("{gname} ≤ {} but its support {} is not", name(w), name(s)));
                }
                for w2 in 0..n {
                    if self.below[x][w] && self.leq[w][w2] && !self.below[x][w2] {
                        report.push(Below, format!("below({gname}, ·) not upward closed at {} ≤ {}", name(w), name(w2)));
                    }
                    if !lattice_ok || w2 <= w {
                        continue;
                    }
                    let m = self.meet(w, w2).unwrap();
                    let j = self.join(w, w2).unwrap();
                    if self.below[x][w] && self.below[x][w2] && !self.below[x][m] {
                        report.push(Below, format!("{gname} is below {} and {} but not their meet", name(w), name(w2)));
                    }
                    if self.below[x][j] && !self.below[x][w] && !self.below[x][w2] {
                        report.push(Below, format!(
                            "{gname} is below {} ∨ {} but below neither",
                            name(w), name(w2)
                        ));
                    }
                }
            }
        }

        // Rays.
        for v in 0..n {
            for r in &self.rays[v] {
                let x = r.0;
                if self.below[x][v] || !self.leq[self.supp[x]][v] {
                    report.push(Rays, format!("ray {} of {} is not in P_{}", self.gens[x], name(v), name(v)));
                }
            }
        }

        // Reductions.
        for (&(x, v), coeffs) in &self.explicit {
            let (g, w) = (&self.gens[x], name(v));
            if !self.leq[self.supp[x]][v] {
                report.push(Reduction, format!("red({g}, {w}) given but supp({g}) ≰ {w}"));
            }
            if self.below[x][v] && coeffs.iter().any(|(_, c)| !c.is_zero()) {
                report.push(Reduction, format!("red({g}, {w}) must be empty since {g} ≤ {w}"));
            }
            if !self.below[x][v] && coeffs.iter().all(|(_, c)| c.is_zero()) {
                report.push(Reduction, format!("red({g}, {w}) is empty but {g} ≰ {w}"));
            }
            for (r, c) in coeffs {
                if !self.rays[v].contains(r) {
                    report.push(Reduction, format!("red({g}, {w}) uses {} which is not a ray of {w}", self.gens[r.0]));
                }
                if c.is_negative() {
                    report.push(Reduction, format!("red({g}, {w}) has a negative coefficient"));
                }
            }
            if self.rays[v].contains(&Gen(x)) && *coeffs != vec![(Gen(x), Rational::one())] {
                report.push(Reduction, format!("red({g}, {w}) must be the unit vector since {g} is a ray of {w}"));
            }
        }
        let mut red_ok = !report.has(Reduction);
        for x in 0..self.gens.len() {
            for v in 0..n {
                if self.leq[self.supp[x]][v] && self.red(x, v).is_none() {
                    report.push(Reduction, format!("red({}, {}) is required but missing", self.gens[x], name(v)));
                    red_ok = false;
                }
            }
        }
        if red_ok && !report.has(Lattice) {
            for x in 0..self.gens.len() {
                for v in 0..n {
                    let Some(base) = self.red(x, v) else { continue };
                    for v2 in 0..n {
                        if !self.leq[v][v2] {
                            continue;
                        }
                        let mut composed: BTreeMap<Gen, Rational> = BTreeMap::new();
                        for (r, c) in &base {
                            for (r2, c2) in self.red(r.0, v2).expect("supp(r) ≤ v ≤ v2") {
                                *composed.entry(r2).or_insert_with(Rational::zero) += c * c2;
                            }
                        }
                        composed.retain(|_, c| !c.is_zero());
                        let direct: BTreeMap<Gen, Rational> =
                            self.red(x, v2).expect("supp(x) ≤ v2").into_iter().collect();
                        if composed != direct {
                            report.push(Coherence, format!(
                                "reducing {} at {} then at {} differs from reducing at {} directly",
                                self.gens[x], name(v), name(v2), name(v2)
                            ));
                        }
                    }
                }
            }
        }

        // Finite witness condition for strong connectedness: for w1 ≱ w2 some
        // generator lies in P_{w1} but not in O_{w2}.
        for w1 in 0..n {
            for w2 in 0..n {
                if self.leq[w2][w1] {
                    continue;
                }
                let witness = (0..self.gens.len()).any(|x| {
                    self.leq[self.supp[x]][w1] && !self.below[x][w1] && self.below[x][w2]
                });
                if !witness {
                    report.push(StrongConnectedness, format!(
                        "no generator in P_{} \\ O_{} although {} ≱ {}",
                        name(w1), name(w2), name(w1), name(w2)
                    ));
                }
            }
        }
        report
    }
}

fn index_of(names: &[String], what: &str) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::new();
    for (i, s) in names.iter().enumerate() {
        if map.insert(s.clone(), i).is_some() {
            return Err(Error::Malformed(format!("duplicate {what} id `{s}`")));
        }
    }
    Ok(map)
}

impl Presentation {
    /// Lists every violated invariant. Structural problems (unknown or
    /// duplicate ids) are reported as a single malformation entry.
    pub fn validate(&self) -> ValidationReport {
        match Tables::build(self) {
            Ok(t) => t.validate(),
            Err(e) => ValidationReport {
                violations: vec![Violation { kind: ViolationKind::Lattice, message: e.to_string() }],
            },
        }
    }
}

/// A validated presented cone.
#[derive(Clone, Debug)]
pub struct Cone {
    presentation: Presentation,
    t: Tables,
    meet: Vec<Vec<usize>>,
    join: Vec<Vec<usize>>,
    top: usize,
    bottom: usize,
    red: Vec<Vec<Option<Reduction>>>,
}

/// A cone element `Σ α_r r + w` in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element {
    support: Idem,
    coeffs: BTreeMap<Gen, Rational>,
}

impl Element {
    pub fn support(&self) -> Idem {
        self.support
    }

    pub fn coeffs(&self) -> &BTreeMap<Gen, Rational> {
        &self.coeffs
    }

    pub fn coeff(&self, r: Gen) -> Rational {
        self.coeffs.get(&r).cloned().unwrap_or_else(Rational::zero)
    }
}

impl Cone {
    /// Builds a cone, failing with [`Error::Invalid`] if validation reports
    /// any violation.
    pub fn new(presentation: Presentation) -> Result<Self> {
        let t = Tables::build(&presentation).map_err(|e| Error::Invalid(e.to_string()))?;
        let report = t.validate();
        if !report.is_valid() {
            return Err(Error::Invalid(report.to_string()));
        }
        let n = t.n();
        let meet = (0..n).map(|a| (0..n).map(|b| t.meet(a, b).unwrap()).collect()).collect();
        let join = (0..n).map(|a| (0..n).map(|b| t.join(a, b).unwrap()).collect()).collect();
        let top = t.greatest(0..n).unwrap();
        let bottom = t.least(0..n).unwrap();
        let red = (0..t.gens.len()).map(|x| (0..n).map(|v| t.red(x, v)).collect()).collect();
        Ok(Cone { presentation, t, meet, join, top, bottom, red })
    }

    pub fn presentation(&self) -> &Presentation {
        &self.presentation
    }

    pub fn name(&self) -> &str {
        &self.presentation.name
    }

    // ----- idempotents -----

    pub fn idems(&self) -> impl Iterator<Item = Idem> + Clone {
        (0..self.t.n()).map(Idem)
    }

    pub fn idem_count(&self) -> usize {
        self.t.n()
    }

    pub fn idem(&self, name: &str) -> Result<Idem> {
        self.t
            .idems
            .iter()
            .position(|s| s == name)
            .map(Idem)
            .ok_or_else(|| Error::UnknownIdempotent(name.to_string()))
    }

    pub fn idem_name(&self, w: Idem) -> &str {
        &self.t.idems[w.0]
    }

    pub fn top(&self) -> Idem {
        Idem(self.top)
    }

    pub fn bottom(&self) -> Idem {
        Idem(self.bottom)
    }

    pub fn idem_leq(&self, u: Idem, v: Idem) -> bool {
        self.t.leq[u.0][v.0]
    }

    pub fn meet(&self, u: Idem, v: Idem) -> Idem {
        Idem(self.meet[u.0][v.0])
    }

    pub fn join(&self, u: Idem, v: Idem) -> Idem {
        Idem(self.join[u.0][v.0])
    }

    // ----- generators -----

    pub fn gens(&self) -> impl Iterator<Item = Gen> + Clone {
        (0..self.t.gens.len()).map(Gen)
    }

    pub fn gen_count(&self) -> usize {
        self.t.gens.len()
    }

    pub fn gen(&self, name: &str) -> Result<Gen> {
        self.t
            .gens
            .iter()
            .position(|s| s == name)
            .map(Gen)
            .ok_or_else(|| Error::UnknownGenerator(name.to_string()))
    }

    pub fn gen_name(&self, x: Gen) -> &str {
        &self.t.gens[x.0]
    }

    pub fn supp(&self, x: Gen) -> Idem {
        Idem(self.t.supp[x.0])
    }

    /// Whether `x ≤ w`.
    pub fn below(&self, x: Gen, w: Idem) -> bool {
        self.t.below[x.0][w.0]
    }

    /// The rays `R_w`, sorted by generator id.
    pub fn rays(&self, w: Idem) -> &[Gen] {
        &self.t.rays[w.0]
    }

    /// `red(x, v)`, defined exactly when `supp(x) ≤ v`.
    pub fn red(&self, x: Gen, v: Idem) -> Option<&[(Gen, Rational)]> {
        self.red[x.0][v.0].as_deref()
    }

    fn check_gen(&self, x: Gen) -> Result<()> {
        if x.0 < self.gen_count() {
            Ok(())
        } else {
            Err(Error::UnknownGenerator(format!("#{}", x.0)))
        }
    }

    // ----- elements -----

    pub fn zero(&self) -> Element {
        self.idem_element(self.bottom())
    }

    pub fn idem_element(&self, w: Idem) -> Element {
        Element { support: w, coeffs: BTreeMap::new() }
    }

    /// Builds an element from data already in canonical form.
    pub fn element(&self, support: Idem, coeffs: BTreeMap<Gen, Rational>) -> Result<Element> {
        for (r, c) in &coeffs {
            self.check_gen(*r)?;
            if !self.rays(support).contains(r) {
                return Err(Error::precondition(format!(
                    "{} is not a ray of {}",
                    self.gen_name(*r),
                    self.idem_name(support)
                )));
            }
            if !c.is_positive() {
                return Err(Error::precondition(format!(
                    "coefficient of {} must be positive",
                    self.gen_name(*r)
                )));
            }
        }
        Ok(Element { support, coeffs })
    }

    /// Rewrites `Σ raw(x)·x + w` in canonical form.
    pub fn canonicalize(&self, w: Idem, raw: &BTreeMap<Gen, Rational>) -> Result<Element> {
        let mut support = w;
        for (x, c) in raw {
            self.check_gen(*x)?;
            if c.is_negative() {
                return Err(Error::precondition(format!(
                    "negative coefficient for {}",
                    self.gen_name(*x)
                )));
            }
            if c.is_positive() {
                support = self.join(support, self.supp(*x));
            }
        }
        let mut coeffs: BTreeMap<Gen, Rational> = BTreeMap::new();
        for (x, c) in raw.iter().filter(|(_, c)| c.is_positive()) {
            let red = self.red(*x, support).expect("supp(x) ≤ support after the join");
            for (r, k) in red {
                *coeffs.entry(*r).or_insert_with(Rational::zero) += c * k;
            }
        }
        coeffs.retain(|_, c| !c.is_zero());
        Ok(Element { support, coeffs })
    }

    pub fn add(&self, y: &Element, z: &Element) -> Element {
        let mut raw = y.coeffs.clone();
        for (r, c) in &z.coeffs {
            *raw.entry(*r).or_insert_with(Rational::zero) += c;
        }
        self.canonicalize(self.join(y.support, z.support), &raw)
            .expect("canonical inputs have known generators and positive coefficients")
    }

    /// `t · y` for `t > 0`; `∞ · y` is the least idempotent above `y`.
    pub fn scale(&self, t: &ExtScalar, y: &Element) -> Result<Element> {
        match t {
            ExtScalar::Finite(t) if t.is_positive() => Ok(Element {
                support: y.support,
                coeffs: y.coeffs.iter().map(|(r, c)| (*r, c * t)).collect(),
            }),
            ExtScalar::Finite(_) => Err(Error::precondition("scalar must be positive or inf")),
            ExtScalar::Infinite => {
                let above = self.idems().filter(|&v| self.leq(y, &self.idem_element(v)));
                let least = above
                    .fold(None, |acc: Option<Idem>, v| Some(acc.map_or(v, |a| self.meet(a, v))))
                    .expect("top lies above every element");
                Ok(self.idem_element(least))
            }
        }
    }

    /// The algebraic order: `supp(y) ≤ supp(z)` and the coordinates of `y`
    /// absorbed into the stratum of `z` are dominated by those of `z`.
    pub fn leq(&self, y: &Element, z: &Element) -> bool {
        if !self.idem_leq(y.support, z.support) {
            return false;
        }
        let moved = self.reduce_to(&y.coeffs, y.support, z.support);
        moved.iter().all(|(r, c)| *c <= z.coeff(*r))
    }

    /// Coordinates on `R_to` of `Σ coeffs + to`, for coefficients living on `R_from` with `from ≤ to`.
    fn reduce_to(&self, coeffs: &BTreeMap<Gen, Rational>, from: Idem, to: Idem) -> BTreeMap<Gen, Rational> {
        debug_assert!(self.idem_leq(from, to));
        let mut out: BTreeMap<Gen, Rational> = BTreeMap::new();
        for (x, c) in coeffs {
            for (r, k) in self.red(*x, to).expect("supp(x) ≤ from ≤ to") {
                *out.entry(*r).or_insert_with(Rational::zero) += c * k;
            }
        }
        out.retain(|_, c| !c.is_zero());
        out
    }

    /// The greatest lower bound of `y` and `z`.
    ///
    /// Any lower bound `m` has `supp(m) ≤ u = supp(y) ∧ supp(z)` and `m + u`
    /// is again a lower bound, so the meet lives in the stratum of `u`. There
    /// it is the greatest feasible point of a bounded polyhedron, found one
    /// coordinate at a time and then checked to be feasible as a whole.
    pub fn element_meet(&self, y: &Element, z: &Element) -> Result<Element> {
        let u = self.meet(y.support, z.support);
        let rays = self.rays(u).to_vec();
        let k = rays.len();
        let mut sys = LinearSystem::new(k);
        for i in 0..k {
            sys.add_terms(&[(i, -Rational::one())], Rel::Le, Rational::zero());
        }
        for target in [y, z] {
            for r2 in self.rays(target.support) {
                let terms: Vec<(usize, Rational)> = rays
                    .iter()
                    .enumerate()
                    .filter_map(|(i, r)| {
                        let red = self.red(*r, target.support).expect("supp(r) ≤ u ≤ target");
                        red.iter().find(|(g, _)| g == r2).map(|(_, c)| (i, c.clone()))
                    })
                    .collect();
                if !terms.is_empty() {
                    sys.add_terms(&terms, Rel::Le, target.coeff(*r2));
                }
            }
        }
        let mut best = Vec::with_capacity(k);
        for i in 0..k {
            let mut obj = vec![Rational::zero(); k];
            obj[i] = Rational::one();
            match sys.maximize(&obj)? {
                Optimum::Attained { value, .. } => best.push(value),
                Optimum::Unbounded => {
                    return Err(Error::Verification("meet problem is unbounded".into()))
                }
                Optimum::Infeasible => {
                    return Err(Error::Verification("meet problem is infeasible".into()))
                }
            }
        }
        if !sys.satisfied_by(&best) {
            return Err(Error::Verification("coordinatewise maxima do not form a lower bound".into()));
        }
        let coeffs = rays.into_iter().zip(best).filter(|(_, c)| c.is_positive()).collect();
        let m = Element { support: u, coeffs };
        self.verify_meet(y, z, &m)?;
        Ok(m)
    }

    /// The least upper bound of `y` and `z`: for each candidate support
    /// `u ≥ supp(y) ∨ supp(z)` the least upper bound inside the stratum of `u`
    /// is the coordinatewise maximum, and the join is the least candidate.
    pub fn element_join(&self, y: &Element, z: &Element) -> Result<Element> {
        let base = self.join(y.support, z.support);
        let candidates: Vec<Element> = self
            .idems()
            .filter(|&u| self.idem_leq(base, u))
            .map(|u| {
                let a = self.reduce_to(&y.coeffs, y.support, u);
                let b = self.reduce_to(&z.coeffs, z.support, u);
                let mut coeffs = a;
                for (r, c) in b {
                    let e = coeffs.entry(r).or_insert_with(Rational::zero);
                    if c > *e {
                        *e = c;
                    }
                }
                Element { support: u, coeffs }
            })
            .collect();
        let least = candidates
            .iter()
            .find(|c| candidates.iter().all(|d| self.leq(c, d)))
            .cloned()
            .ok_or_else(|| Error::Verification("no least upper bound among candidates".into()))?;
        if !(self.leq(y, &least) && self.leq(z, &least)) {
            return Err(Error::Verification("join candidate is not an upper bound".into()));
        }
        for r in least.coeffs.keys() {
            let mut smaller = least.clone();
            let c = smaller.coeffs.get_mut(r).unwrap();
            *c -= witness_step().min(c.clone());
            smaller.coeffs.retain(|_, c| !c.is_zero());
            if self.leq(y, &smaller) && self.leq(z, &smaller) {
                return Err(Error::Verification("join is not least in its stratum".into()));
            }
        }
        Ok(least)
    }

    /// Checks a computed meet against the inputs and a finite witness set:
    /// every common idempotent lower bound lies below it, and raising any
    /// coordinate loses the lower-bound property.
    fn verify_meet(&self, y: &Element, z: &Element, m: &Element) -> Result<()> {
        if !(self.leq(m, y) && self.leq(m, z)) {
            return Err(Error::Verification("meet candidate is not a lower bound".into()));
        }
        for w in self.idems() {
            let e = self.idem_element(w);
            if self.leq(&e, y) && self.leq(&e, z) && !self.leq(&e, m) {
                return Err(Error::Verification(format!(
                    "idempotent {} is a lower bound not below the meet",
                    self.idem_name(w)
                )));
            }
        }
        for r in self.rays(m.support) {
            let mut bigger = m.clone();
            *bigger.coeffs.entry(*r).or_insert_with(Rational::zero) += witness_step();
            if self.leq(&bigger, y) && self.leq(&bigger, z) {
                return Err(Error::Verification("meet is not greatest in its stratum".into()));
            }
        }
        Ok(())
    }

    pub fn format_element(&self, y: &Element) -> String {
        let inner: Vec<String> = y
            .coeffs
            .iter()
            .map(|(r, c)| format!("{}: {}", self.gen_name(*r), format_rational(c)))
            .collect();
        format!("({}, {{{}}})", self.idem_name(y.support), inner.join(", "))
    }
}

fn witness_step() -> Rational {
    Rational::new(1.into(), (1u64 << 16).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::xreal::int;

    fn el(c: &Cone, w: &str, coeffs: &[(&str, i64)]) -> Element {
        let raw = coeffs.iter().map(|(g, v)| (c.gen(g).unwrap(), int(*v))).collect();
        c.canonicalize(c.idem(w).unwrap(), &raw).unwrap()
    }

    #[test]
    fn fixtures_validate() {
        for c in fixtures::all() {
            assert!(c.presentation().validate().is_valid(), "{}", c.name());
        }
    }

    #[test]
    fn removing_an_order_edge_breaks_the_lattice() {
        let mut p = fixtures::e2().presentation().clone();
        p.order.retain(|(a, b)| !(a == "bot" && b == "top"));
        let report = p.validate();
        assert!(report.has(ViolationKind::Lattice), "{report}");
    }

    #[test]
    fn deleting_x2_breaks_strong_connectedness_at_w_top() {
        let mut p = fixtures::elex().presentation().clone();
        p.generators.retain(|g| g.id != "x2");
        for rays in p.rays.values_mut() {
            rays.retain(|x| x != "x2");
        }
        let report = p.validate();
        let sc: Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.kind == ViolationKind::StrongConnectedness)
            .collect();
        assert_eq!(sc.len(), 1, "{report}");
        assert!(sc[0].message.contains("P_w \\ O_top"));
    }

    #[test]
    fn trivial_cone_is_accepted() {
        let p = Presentation {
            name: "trivial".into(),
            idempotents: vec!["o".into()],
            ..Default::default()
        };
        let c = Cone::new(p).unwrap();
        assert_eq!(c.top(), c.bottom());
        assert_eq!(c.zero(), c.add(&c.zero(), &c.zero()));
    }

    #[test]
    fn canonicalize_examples() {
        let lex = fixtures::elex();
        assert_eq!(el(&lex, "bot", &[("x1", 2), ("x2", 3)]), el(&lex, "w", &[("x2", 3)]));
        let e2 = fixtures::e2();
        assert_eq!(el(&e2, "bot", &[("e1", 0)]), e2.zero());
        assert_eq!(el(&e2, "p1", &[("e1", 5)]), e2.idem_element(e2.idem("p1").unwrap()));
    }

    #[test]
    fn add_examples() {
        let e2 = fixtures::e2();
        assert_eq!(
            e2.add(&el(&e2, "bot", &[("e1", 1)]), &el(&e2, "bot", &[("e2", 2)])),
            el(&e2, "bot", &[("e1", 1), ("e2", 2)])
        );
        let lex = fixtures::elex();
        assert_eq!(
            lex.add(&el(&lex, "bot", &[("x1", 1)]), &el(&lex, "w", &[("x2", 1)])),
            el(&lex, "w", &[("x2", 1)])
        );
    }

    #[test]
    fn scale_examples() {
        let e2 = fixtures::e2();
        let inf = ExtScalar::Infinite;
        assert_eq!(
            e2.scale(&inf, &el(&e2, "bot", &[("e1", 1)])).unwrap(),
            e2.idem_element(e2.idem("p1").unwrap())
        );
        let lex = fixtures::elex();
        assert_eq!(
            lex.scale(&ExtScalar::from_int(3), &el(&lex, "bot", &[("x1", 2)])).unwrap(),
            el(&lex, "bot", &[("x1", 6)])
        );
        assert_eq!(lex.scale(&inf, &el(&lex, "w", &[("x2", 1)])).unwrap(), lex.idem_element(lex.top()));
        assert!(lex.scale(&ExtScalar::zero(), &lex.zero()).is_err());
    }

    #[test]
    fn leq_examples() {
        let e2 = fixtures::e2();
        assert!(e2.leq(&el(&e2, "bot", &[("e1", 1)]), &el(&e2, "p1", &[("e2", 2)])));
        assert!(!e2.leq(&el(&e2, "bot", &[("e2", 1)]), &el(&e2, "p1", &[])));
        let lex = fixtures::elex();
        assert!(lex.leq(&el(&lex, "bot", &[("x1", 2)]), &el(&lex, "w", &[("x2", 3)])));
    }

    #[test]
    fn idempotent_lattice_examples() {
        let e2 = fixtures::e2();
        let (p1, p2) = (e2.idem("p1").unwrap(), e2.idem("p2").unwrap());
        assert_eq!(e2.meet(p1, p2), e2.bottom());
        assert_eq!(e2.join(p1, p2), e2.top());
        assert_eq!(e2.add(&e2.idem_element(p1), &e2.idem_element(p2)), e2.idem_element(e2.top()));
        let lex = fixtures::elex();
        assert_eq!(lex.join(lex.bottom(), lex.idem("w").unwrap()), lex.idem("w").unwrap());
    }

    #[test]
    fn element_meet_examples() {
        let e2 = fixtures::e2();
        let a = el(&e2, "bot", &[("e1", 1)]);
        assert_eq!(e2.element_meet(&a, &el(&e2, "bot", &[("e1", 2)])).unwrap(), a);
        assert_eq!(
            e2.element_meet(&el(&e2, "bot", &[("e1", 1), ("e2", 1)]), &el(&e2, "bot", &[("e1", 2)])).unwrap(),
            a
        );
        let lex = fixtures::elex();
        let l1 = el(&lex, "bot", &[("x1", 1)]);
        assert_eq!(lex.element_meet(&el(&lex, "w", &[("x2", 1)]), &l1).unwrap(), l1);
    }

    #[test]
    fn element_join_in_the_plane() {
        // (1, 0) ∨ (0, 2) = (1, 2); (∞, 0) ∨ (1, 3) = (∞, 3)
        let e2 = fixtures::e2();
        assert_eq!(
            e2.element_join(&el(&e2, "bot", &[("e1", 1)]), &el(&e2, "bot", &[("e2", 2)])).unwrap(),
            el(&e2, "bot", &[("e1", 1), ("e2", 2)])
        );
        assert_eq!(
            e2.element_join(&el(&e2, "p1", &[]), &el(&e2, "bot", &[("e1", 1), ("e2", 3)])).unwrap(),
            el(&e2, "p1", &[("e2", 3)])
        );
    }
}
