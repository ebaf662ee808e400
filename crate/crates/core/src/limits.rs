//! Matrices acting on powers of `[0, ∞]`, directed systems of such powers,
//! their transposed duals, finite-depth threads, and Bratteli diagrams.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

use rand::Rng;

use crate::afun::{self, AffineFn};
use crate::cone::Cone;
use crate::ehs::{build_inductive_system, BuildOptions};
use crate::error::{Error, Result};
use crate::sample;
use crate::xreal::{format_rational, ExtScalar, ExtVector, Rational};

/// A matrix with finite nonnegative rational entries, acting on column
/// vectors of `[0, ∞]^cols` with `0 · ∞ = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CuMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<Rational>>,
}

impl CuMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Vec<Rational>>) -> Result<Self> {
        if entries.len() != rows || entries.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch(format!("expected a {rows}×{cols} matrix")));
        }
        if entries.iter().flatten().any(Signed::is_negative) {
            return Err(Error::precondition("matrix entries must be nonnegative"));
        }
        Ok(CuMatrix { rows, cols, entries })
    }

    pub fn from_integers(rows: usize, cols: usize, entries: &[Vec<BigInt>]) -> Result<Self> {
        let entries =
            entries.iter().map(|r| r.iter().map(|e| Rational::from_integer(e.clone())).collect()).collect();
        CuMatrix::new(rows, cols, entries)
    }

    pub fn identity(n: usize) -> Self {
        let entries = (0..n)
            .map(|i| (0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect())
            .collect();
        CuMatrix { rows: n, cols: n, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Vec<Rational>] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i][j]
    }

    pub fn is_integral(&self) -> bool {
        self.entries.iter().flatten().all(|e| e.is_integer())
    }

    /// `M v` with the rule `0 · ∞ = 0`.
    pub fn apply(&self, v: &ExtVector) -> Result<ExtVector> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "matrix has {} columns but the vector has length {}",
                self.cols,
                v.len()
            )));
        }
        Ok(ExtVector(
            self.entries
                .iter()
                .map(|row| row.iter().zip(&v.0).map(|(m, x)| x.scale(m)).sum())
                .collect(),
        ))
    }

    /// The product `self · other`.
    pub fn compose(&self, other: &CuMatrix) -> Result<CuMatrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}×{} by {}×{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let entries = (0..self.rows)
            .map(|i| {
                (0..other.cols)
                    .map(|j| {
                        (0..self.cols)
                            .fold(Rational::zero(), |acc, k| acc + &self.entries[i][k] * &other.entries[k][j])
                    })
                    .collect()
            })
            .collect();
        Ok(CuMatrix { rows: self.rows, cols: other.cols, entries })
    }

    pub fn transpose(&self) -> CuMatrix {
        let entries = (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.entries[i][j].clone()).collect())
            .collect();
        CuMatrix { rows: self.cols, cols: self.rows, entries }
    }
}

impl fmt::Display for CuMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, row) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            let cells: Vec<String> = row.iter().map(format_rational).collect();
            write!(f, "[{}]", cells.join(", "))?;
        }
        f.write_str("]")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// The map for `(i, j)`, `i < j`, goes from stage `i` to stage `j`.
    Inductive,
    /// The map for `(i, j)`, `i < j`, goes from stage `j` to stage `i`.
    Projective,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Inductive => "inductive",
            Direction::Projective => "projective",
        })
    }
}

/// A system of powers of `[0, ∞]` over a finite chain of indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct System {
    direction: Direction,
    indices: Vec<String>,
    dims: Vec<usize>,
    maps: BTreeMap<(usize, usize), CuMatrix>,
}

impl System {
    pub fn new(
        direction: Direction,
        indices: Vec<String>,
        dims: Vec<usize>,
        maps: BTreeMap<(usize, usize), CuMatrix>,
    ) -> Result<Self> {
        if indices.len() != dims.len() {
            return Err(Error::ShapeMismatch("one dimension per index is required".into()));
        }
        for (&(i, j), m) in &maps {
            if i >= j || j >= dims.len() {
                return Err(Error::ShapeMismatch(format!("map ({i}, {j}) is not between increasing stages")));
            }
            let (rows, cols) = match direction {
                Direction::Inductive => (dims[j], dims[i]),
                Direction::Projective => (dims[i], dims[j]),
            };
            if m.rows != rows || m.cols != cols {
                return Err(Error::ShapeMismatch(format!(
                    "map ({i}, {j}) should be {rows}×{cols}, found {}×{}",
                    m.rows, m.cols
                )));
            }
        }
        Ok(System { direction, indices, dims, maps })
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn indices(&self) -> &[String] {
        &self.indices
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn maps(&self) -> &BTreeMap<(usize, usize), CuMatrix> {
        &self.maps
    }

    pub fn map(&self, i: usize, j: usize) -> Option<&CuMatrix> {
        self.maps.get(&(i, j))
    }

    /// Lists every triple `i < j < k` with all three maps present where the
    /// composite disagrees with the direct map.
    pub fn coherence_failures(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        let n = self.len();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let (Some(ij), Some(jk), Some(ik)) = (self.map(i, j), self.map(j, k), self.map(i, k)) else {
                        continue;
                    };
                    let composite = match self.direction {
                        Direction::Inductive => jk.compose(ij),
                        Direction::Projective => ij.compose(jk),
                    };
                    if composite.as_ref() != Ok(ik) {
                        out.push((i, j, k));
                    }
                }
            }
        }
        out
    }

    pub fn is_coherent(&self) -> bool {
        self.coherence_failures().is_empty()
    }

    /// Transposes every map and flips the direction, so that stages are
    /// read in the opposite order.
    pub fn dualize(&self) -> System {
        System {
            direction: match self.direction {
                Direction::Inductive => Direction::Projective,
                Direction::Projective => Direction::Inductive,
            },
            indices: self.indices.clone(),
            dims: self.dims.clone(),
            maps: self.maps.iter().map(|(k, m)| (*k, m.transpose())).collect(),
        }
    }
}

pub fn dualize(s: &System) -> System {
    s.dualize()
}

/// Checks the thread condition `x_i = M_{i,j} x_j` for every map of a
/// projective system whose two stages are both assigned.
pub fn thread_eval(s: &System, assignments: &BTreeMap<usize, ExtVector>) -> Result<bool> {
    if s.direction != Direction::Projective {
        return Err(Error::precondition("threads are evaluated on projective systems"));
    }
    for (k, v) in assignments {
        match s.dims.get(*k) {
            Some(&d) if d == v.len() => {}
            Some(&d) => return Err(Error::ShapeMismatch(format!("stage {k} has dimension {d}, got {}", v.len()))),
            None => return Err(Error::ShapeMismatch(format!("no stage {k}"))),
        }
    }
    for (&(i, j), m) in &s.maps {
        if let (Some(xi), Some(xj)) = (assignments.get(&i), assignments.get(&j)) {
            if m.apply(xj)? != *xi {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The functional on `[0, ∞]^n` determined by its values on the canonical
/// generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Functional(ExtVector);

impl Functional {
    pub fn table(&self) -> &ExtVector {
        &self.0
    }

    /// `λ(v) = Σ λ(E_i) v_i` with `0 · ∞ = 0`.
    pub fn eval(&self, v: &ExtVector) -> Result<ExtScalar> {
        self.0.dot(v)
    }
}

/// Identifies a functional on `[0, ∞]^n` with its table of generator values.
pub fn functional_iso(table: &[ExtScalar], n: usize) -> Result<Functional> {
    if table.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: table.len() });
    }
    Ok(Functional(ExtVector(table.to_vec())))
}

/// A Bratteli diagram truncated to finitely many levels. `matrices[k]` has
/// one row per vertex of level `k + 1` and one column per vertex of level `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BratteliDiagram {
    levels: Vec<Vec<u64>>,
    matrices: Vec<Vec<Vec<u64>>>,
}

impl BratteliDiagram {
    pub fn new(levels: Vec<Vec<u64>>, matrices: Vec<Vec<Vec<u64>>>) -> Result<Self> {
        let bad = |m: String| Err(Error::Malformed(m));
        if levels.iter().any(|l| l.is_empty() || l.contains(&0)) {
            return bad("every level needs at least one vertex with positive multiplicity".into());
        }
        if matrices.len() + 1 != levels.len() && !(levels.is_empty() && matrices.is_empty()) {
            return bad(format!("{} levels need {} matrices", levels.len(), levels.len().saturating_sub(1)));
        }
        for (k, m) in matrices.iter().enumerate() {
            let (rows, cols) = (levels[k + 1].len(), levels[k].len());
            if m.len() != rows || m.iter().any(|r| r.len() != cols) {
                return bad(format!("matrix {k} should be {rows}×{cols}"));
            }
        }
        Ok(BratteliDiagram { levels, matrices })
    }

    pub fn levels(&self) -> &[Vec<u64>] {
        &self.levels
    }

    pub fn matrices(&self) -> &[Vec<Vec<u64>>] {
        &self.matrices
    }

    fn matrix(&self, k: usize) -> CuMatrix {
        let rows = self.levels[k + 1].len();
        let cols = self.levels[k].len();
        let entries = self.matrices[k]
            .iter()
            .map(|r| r.iter().map(|&e| Rational::from_integer(e.into())).collect())
            .collect();
        CuMatrix::new(rows, cols, entries).expect("shapes checked on construction")
    }
}

/// Builds the dimension-group system `ℤ^{n_0} → ℤ^{n_1} → …` of the first
/// `depth` levels and its dual system of cones `[0, ∞]^{n_k}`.
pub fn bratteli_import(d: &BratteliDiagram, depth: usize) -> Result<(System, System)> {
    if depth > d.levels.len() {
        return Err(Error::precondition(format!(
            "depth {depth} exceeds the {} available levels",
            d.levels.len()
        )));
    }
    let dims: Vec<usize> = d.levels[..depth].iter().map(Vec::len).collect();
    let indices: Vec<String> = (0..depth).map(|k| format!("level{k}")).collect();
    let mut maps = BTreeMap::new();
    for i in 0..depth {
        let mut acc = CuMatrix::identity(dims[i]);
        for j in i + 1..depth {
            acc = d.matrix(j - 1).compose(&acc)?;
            maps.insert((i, j), acc.clone());
        }
    }
    let inductive = System::new(Direction::Inductive, indices, dims, maps)?;
    let projective = inductive.dualize();
    Ok((inductive, projective))
}

/// The number of idempotents of each stage cone `[0, ∞]^{n_k}`, namely `2^{n_k}`.
pub fn stage_idempotent_counts(s: &System) -> Vec<BigUint> {
    s.dims.iter().map(|&n| BigUint::one() << n).collect()
}

/// Counts order ideals of the diagram truncated to `depth` levels by brute
/// force: vertex sets that contain every child of a member (hereditary) and
/// contain every vertex of a non-final level all of whose children are members
/// (saturated).
pub fn order_ideal_count(d: &BratteliDiagram, depth: usize) -> Result<u64> {
    if depth > d.levels.len() {
        return Err(Error::precondition("depth exceeds the number of levels"));
    }
    if depth == 0 {
        return Ok(1);
    }
    let offsets: Vec<usize> = d.levels[..depth]
        .iter()
        .scan(0, |acc, l| {
            let o = *acc;
            *acc += l.len();
            Some(o)
        })
        .collect();
    let total: usize = d.levels[..depth].iter().map(Vec::len).sum();
    if total > 24 {
        return Err(Error::precondition("brute-force enumeration limited to 24 vertices"));
    }
    let children = |k: usize, v: usize| -> Vec<usize> {
        if k + 1 >= depth {
            return Vec::new();
        }
        d.matrices[k]
            .iter()
            .enumerate()
            .filter(|(_, row)| row[v] > 0)
            .map(|(c, _)| offsets[k + 1] + c)
            .collect()
    };
    let mut count = 0u64;
    for mask in 0u32..(1u32 << total) {
        let member = |i: usize| mask & (1 << i) != 0;
        let ok = (0..depth).all(|k| {
            (0..d.levels[k].len()).all(|v| {
                let me = offsets[k] + v;
                let ch = children(k, v);
                let hereditary = !member(me) || ch.iter().all(|&c| member(c));
                let saturated = k + 1 >= depth || !ch.iter().all(|&c| member(c)) || member(me);
                hereditary && saturated
            })
        });
        if ok {
            count += 1;
        }
    }
    Ok(count)
}

/// Converts a nonnegative integer matrix.
pub fn integer_matrix(entries: &[Vec<BigInt>], cols: usize) -> Result<CuMatrix> {
    CuMatrix::from_integers(entries.len(), cols, entries)
}

/// Sizes for [`roundtrip_check`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundtripOptions {
    pub functions: usize,
    pub rounds: usize,
    pub pairings: usize,
    pub seed: u64,
}

impl Default for RoundtripOptions {
    fn default() -> Self {
        RoundtripOptions { functions: 4, rounds: 2, pairings: 100, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundtripReport {
    pub stages: Vec<usize>,
    pub pairings: usize,
    pub mismatches: Vec<String>,
}

impl RoundtripReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Builds an inductive system from sampled functions, dualizes it, and
/// compares evaluation through the dual system with direct evaluation.
///
/// For a sampled element `y`, the thread `x_k = (ψ_k(E_i)(y))_i` must be
/// compatible with the transposed maps, and for a sampled integer vector
/// `s` at stage `k` the functional with table `x_k` must give
/// `(Σ s_i ψ_k(E_i))(y)`.
pub fn roundtrip_check(cone: &Cone, opts: RoundtripOptions) -> Result<RoundtripReport> {
    let mut rng = sample::rng(opts.seed);
    let functions: Vec<AffineFn> =
        (0..opts.functions.max(1)).map(|_| sample::nonzero_affine(cone, &mut rng)).collect();
    let built = build_inductive_system(cone, &functions, BuildOptions { rounds: opts.rounds, ..Default::default() })?;
    let dual = built.system.dualize();
    let mut mismatches = Vec::new();
    if !dual.is_coherent() {
        mismatches.push("dual system is not coherent".to_string());
    }
    for p in 0..opts.pairings {
        let y = sample::element(cone, &mut rng);
        let thread: BTreeMap<usize, ExtVector> = built
            .psi
            .iter()
            .enumerate()
            .map(|(k, psi)| (k, ExtVector(psi.gens().iter().map(|f| afun::eval(cone, f, &y)).collect())))
            .collect();
        if !thread_eval(&dual, &thread)? {
            mismatches.push(format!("pairing {p}: thread of {} is incompatible", cone.format_element(&y)));
            continue;
        }
        let k = rng.gen_range(0..built.psi.len());
        let n = built.psi[k].dim();
        let s: Vec<u64> = (0..n).map(|_| rng.gen_range(0..=3)).collect();
        let through = functional_iso(&thread[&k].0, n)?.eval(&ExtVector::from_ints(&s))?;
        let direct = built.psi[k].image_ext(cone, &ExtVector::from_ints(&s))?;
        let direct = afun::eval(cone, &direct, &y);
        if through != direct {
            mismatches.push(format!(
                "pairing {p}: stage {k}, s = {s:?}, y = {}: {through} through the system, {direct} directly",
                cone.format_element(&y)
            ));
        }
    }
    Ok(RoundtripReport { stages: built.system.dims().to_vec(), pairings: opts.pairings, mismatches })
}
