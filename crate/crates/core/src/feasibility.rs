//! Exact rational linear feasibility and optimization by Fourier–Motzkin
//! elimination.
//!
//! Equalities are substituted away first. Strict rows are handled by adding a
//! slack variable `s ≤ 1` to each of them and maximizing `s`; the system is
//! strictly feasible iff the optimum is positive. Every returned point is
//! checked against the original rows before it leaves this module.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::xreal::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Le,
    Lt,
    Eq,
}

/// One row `coeffs · x  rel  rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub rel: Rel,
    pub rhs: Rational,
}

impl Constraint {
    fn holds(&self, x: &[Rational]) -> bool {
        let lhs = dot(&self.coeffs, x);
        match self.rel {
            Rel::Le => lhs <= self.rhs,
            Rel::Lt => lhs < self.rhs,
            Rel::Eq => lhs == self.rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Optimum {
    Infeasible,
    Unbounded,
    Attained { value: Rational, point: Vec<Rational> },
}

#[derive(Clone, Debug, Default)]
pub struct LinearSystem {
    nvars: usize,
    rows: Vec<Constraint>,
}

fn dot(a: &[Rational], x: &[Rational]) -> Rational {
    a.iter().zip(x).fold(Rational::zero(), |acc, (p, q)| acc + p * q)
}

/// `a · x ≤ b`.
#[derive(Clone, Debug)]
struct Ineq {
    a: Vec<Rational>,
    b: Rational,
}

/// `x_var = constant + coeffs · x`, with `coeffs[var] = 0`.
struct Substitution {
    var: usize,
    coeffs: Vec<Rational>,
    constant: Rational,
}

impl LinearSystem {
    pub fn new(nvars: usize) -> Self {
        LinearSystem { nvars, rows: Vec::new() }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn add(&mut self, coeffs: Vec<Rational>, rel: Rel, rhs: Rational) -> Result<()> {
        if coeffs.len() != self.nvars {
            return Err(Error::LengthMismatch { expected: self.nvars, found: coeffs.len() });
        }
        self.rows.push(Constraint { coeffs, rel, rhs });
        Ok(())
    }

    /// Adds a row given as `(variable, coefficient)` terms; repeated
    /// variables accumulate.
    pub fn add_terms(&mut self, terms: &[(usize, Rational)], rel: Rel, rhs: Rational) {
        let mut coeffs = vec![Rational::zero(); self.nvars];
        for (v, c) in terms {
            coeffs[*v] += c;
        }
        self.rows.push(Constraint { coeffs, rel, rhs });
    }

    pub fn satisfied_by(&self, x: &[Rational]) -> bool {
        x.len() == self.nvars && self.rows.iter().all(|r| r.holds(x))
    }

    /// Maximizes `objective · x` over a system without strict rows.
    pub fn maximize(&self, objective: &[Rational]) -> Result<Optimum> {
        if objective.len() != self.nvars {
            return Err(Error::LengthMismatch { expected: self.nvars, found: objective.len() });
        }
        if self.rows.iter().any(|r| r.rel == Rel::Lt) {
            return Err(Error::invariant("maximize called on a system with strict rows"));
        }
        let n = self.nvars;
        // Variable n is t, constrained by t − c·x ≤ 0.
        let mut rows: Vec<Constraint> = self
            .rows
            .iter()
            .map(|r| {
                let mut coeffs = r.coeffs.clone();
                coeffs.push(Rational::zero());
                Constraint { coeffs, rel: r.rel, rhs: r.rhs.clone() }
            })
            .collect();
        let mut obj_row: Vec<Rational> = objective.iter().map(|c| -c).collect();
        obj_row.push(Rational::one());
        rows.push(Constraint { coeffs: obj_row, rel: Rel::Le, rhs: Rational::zero() });

        let Some(point) = optimize_last(n + 1, rows)? else {
            return Ok(Optimum::Infeasible);
        };
        let Some(mut point) = point else {
            return Ok(Optimum::Unbounded);
        };
        let t = point.pop().expect("objective variable present");
        if !self.satisfied_by(&point) || dot(objective, &point) != t {
            return Err(Error::invariant("elimination returned a point that fails verification"));
        }
        Ok(Optimum::Attained { value: t, point })
    }

    /// Returns a point satisfying every row, strict ones included, or `None`
    /// when the system is infeasible.
    pub fn solve(&self) -> Result<Option<Vec<Rational>>> {
        let n = self.nvars;
        if !self.rows.iter().any(|r| r.rel == Rel::Lt) {
            return match self.maximize(&vec![Rational::zero(); n])? {
                Optimum::Attained { point, .. } => Ok(Some(point)),
                Optimum::Infeasible => Ok(None),
                Optimum::Unbounded => Err(Error::invariant("zero objective reported unbounded")),
            };
        }
        let mut relaxed = LinearSystem::new(n + 1);
        for r in &self.rows {
            let mut coeffs = r.coeffs.clone();
            let rel = match r.rel {
                Rel::Lt => {
                    coeffs.push(Rational::one());
                    Rel::Le
                }
                rel => {
                    coeffs.push(Rational::zero());
                    rel
                }
            };
            relaxed.rows.push(Constraint { coeffs, rel, rhs: r.rhs.clone() });
        }
        let mut cap = vec![Rational::zero(); n + 1];
        cap[n] = Rational::one();
        relaxed.rows.push(Constraint { coeffs: cap.clone(), rel: Rel::Le, rhs: Rational::one() });
        match relaxed.maximize(&cap)? {
            Optimum::Attained { value, mut point } if value.is_positive() => {
                point.pop();
                if !self.satisfied_by(&point) {
                    return Err(Error::invariant("slack solution violates a strict row"));
                }
                Ok(Some(point))
            }
            Optimum::Attained { .. } | Optimum::Infeasible => Ok(None),
            Optimum::Unbounded => Err(Error::invariant("bounded slack reported unbounded")),
        }
    }
}

/// Eliminates every variable, keeping the last one (`nvars − 1`) for the end,
/// and returns `None` if infeasible, `Some(None)` if the last variable is
/// unbounded above, and otherwise a point where it is maximal.
fn optimize_last(nvars: usize, rows: Vec<Constraint>) -> Result<Option<Option<Vec<Rational>>>> {
    let target = nvars - 1;
    let mut subs: Vec<Substitution> = Vec::new();
    let mut eqs: Vec<Constraint> = Vec::new();
    let mut ineqs: Vec<Ineq> = Vec::new();
    for r in rows {
        match r.rel {
            Rel::Eq => eqs.push(r),
            Rel::Le => ineqs.push(Ineq { a: r.coeffs, b: r.rhs }),
            Rel::Lt => unreachable!("strict rows are relaxed before elimination"),
        }
    }

    // Substitute equalities away, preferring variables other than the target.
    while let Some(eq) = eqs.pop() {
        let pivot = (0..nvars)
            .find(|&v| v != target && !eq.coeffs[v].is_zero())
            .or_else(|| (!eq.coeffs[target].is_zero()).then_some(target));
        let Some(var) = pivot else {
            if eq.rhs.is_zero() {
                continue;
            }
            return Ok(None);
        };
        let a = eq.coeffs[var].clone();
        let mut coeffs: Vec<Rational> = eq.coeffs.iter().map(|c| -c / &a).collect();
        coeffs[var] = Rational::zero();
        let constant = &eq.rhs / &a;
        let sub = Substitution { var, coeffs, constant };
        for other in eqs.iter_mut() {
            substitute_row(&mut other.coeffs, &mut other.rhs, &sub);
        }
        for other in ineqs.iter_mut() {
            substitute_row(&mut other.a, &mut other.b, &sub);
        }
        subs.push(sub);
    }

    let substituted: Vec<bool> = {
        let mut s = vec![false; nvars];
        for sub in &subs {
            s[sub.var] = true;
        }
        s
    };

    let mut levels: Vec<(usize, Vec<Ineq>)> = Vec::new();
    let mut current = match tidy(ineqs) {
        Some(rows) => rows,
        None => return Ok(None),
    };
    let mut remaining: Vec<usize> =
        (0..nvars).filter(|&v| v != target && !substituted[v]).collect();
    while !remaining.is_empty() {
        let (idx, _) = remaining
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let pos = current.iter().filter(|r| r.a[v].is_positive()).count();
                let neg = current.iter().filter(|r| r.a[v].is_negative()).count();
                (i, pos * neg)
            })
            .min_by_key(|&(_, cost)| cost)
            .expect("nonempty");
        let var = remaining.remove(idx);
        let next = eliminate(&current, var);
        levels.push((var, current));
        current = match tidy(next) {
            Some(rows) => rows,
            None => return Ok(None),
        };
    }
    let target_free = substituted[target];
    if !target_free {
        let next = eliminate(&current, target);
        levels.push((target, current));
        if tidy(next).is_none() {
            return Ok(None);
        }
    } else if tidy(current).is_none() {
        return Ok(None);
    }

    let mut x = vec![Rational::zero(); nvars];
    let mut assigned = vec![false; nvars];
    for (var, rows) in levels.iter().rev() {
        let (lo, hi) = bounds(rows, *var, &x, &assigned);
        let value = if *var == target {
            match hi {
                Some(h) => h,
                None => return Ok(Some(None)),
            }
        } else {
            match (lo, hi) {
                (Some(l), Some(h)) => (l + h) / Rational::from_integer(2.into()),
                (Some(l), None) => l,
                (None, Some(h)) => h,
                (None, None) => Rational::zero(),
            }
        };
        x[*var] = value;
        assigned[*var] = true;
    }
    for sub in subs.iter().rev() {
        let value = &sub.constant + dot(&sub.coeffs, &x);
        x[sub.var] = value;
    }
    Ok(Some(Some(x)))
}

fn substitute_row(a: &mut [Rational], b: &mut Rational, sub: &Substitution) {
    let c = std::mem::take(&mut a[sub.var]);
    if c.is_zero() {
        return;
    }
    for (ai, si) in a.iter_mut().zip(&sub.coeffs) {
        *ai += &c * si;
    }
    *b -= &c * &sub.constant;
}

/// Normalizes rows, drops duplicates keeping the tightest right-hand side,
/// and checks constant rows. Returns `None` on a contradiction.
fn tidy(rows: Vec<Ineq>) -> Option<Vec<Ineq>> {
    let mut best: HashMap<Vec<Rational>, Rational> = HashMap::new();
    let mut order: Vec<Vec<Rational>> = Vec::new();
    for Ineq { a, b } in rows {
        let Some(lead) = a.iter().find(|c| !c.is_zero()).map(|c| c.abs()) else {
            if b.is_negative() {
                return None;
            }
            continue;
        };
        let a: Vec<Rational> = a.iter().map(|c| c / &lead).collect();
        let b = b / &lead;
        match best.get_mut(&a) {
            Some(existing) => {
                if b < *existing {
                    *existing = b;
                }
            }
            None => {
                order.push(a.clone());
                best.insert(a, b);
            }
        }
    }
    Some(
        order
            .into_iter()
            .map(|a| {
                let b = best[&a].clone();
                Ineq { a, b }
            })
            .collect(),
    )
}

fn eliminate(rows: &[Ineq], var: usize) -> Vec<Ineq> {
    let (mut pos, mut neg, mut out) = (Vec::new(), Vec::new(), Vec::new());
    for r in rows {
        if r.a[var].is_positive() {
            pos.push(r);
        } else if r.a[var].is_negative() {
            neg.push(r);
        } else {
            out.push(r.clone());
        }
    }
    for p in &pos {
        for q in &neg {
            let (cp, cq) = (p.a[var].clone(), -q.a[var].clone());
            let a: Vec<Rational> =
                p.a.iter().zip(&q.a).map(|(x, y)| x * &cq + y * &cp).collect();
            let b = &p.b * &cq + &q.b * &cp;
            out.push(Ineq { a, b });
        }
    }
    out
}

fn bounds(
    rows: &[Ineq],
    var: usize,
    x: &[Rational],
    assigned: &[bool],
) -> (Option<Rational>, Option<Rational>) {
    let mut lo: Option<Rational> = None;
    let mut hi: Option<Rational> = None;
    for r in rows {
        let c = &r.a[var];
        if c.is_zero() {
            continue;
        }
        let rest = r
            .a
            .iter()
            .enumerate()
            .filter(|&(v, _)| v != var && assigned[v])
            .fold(Rational::zero(), |acc, (v, a)| acc + a * &x[v]);
        let bound = (&r.b - rest) / c;
        if c.is_positive() {
            hi = Some(match hi {
                Some(h) if h <= bound => h,
                _ => bound,
            });
        } else {
            lo = Some(match lo {
                Some(l) if l >= bound => l,
                _ => bound,
            });
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xreal::{int, rat};

    fn r(n: i64) -> Rational {
        int(n)
    }

    #[test]
    fn maximizes_a_small_lp() {
        // max x + y  s.t.  x + 2y ≤ 4, 3x + y ≤ 6, x, y ≥ 0  →  optimum 14/5 at (8/5, 6/5)
        let mut s = LinearSystem::new(2);
        s.add(vec![r(1), r(2)], Rel::Le, r(4)).unwrap();
        s.add(vec![r(3), r(1)], Rel::Le, r(6)).unwrap();
        s.add(vec![r(-1), r(0)], Rel::Le, r(0)).unwrap();
        s.add(vec![r(0), r(-1)], Rel::Le, r(0)).unwrap();
        match s.maximize(&[r(1), r(1)]).unwrap() {
            Optimum::Attained { value, point } => {
                assert_eq!(value, rat(14, 5));
                assert_eq!(point, vec![rat(8, 5), rat(6, 5)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detects_unbounded_and_infeasible() {
        let mut s = LinearSystem::new(1);
        s.add(vec![r(-1)], Rel::Le, r(0)).unwrap();
        assert_eq!(s.maximize(&[r(1)]).unwrap(), Optimum::Unbounded);
        s.add(vec![r(1)], Rel::Le, r(-1)).unwrap();
        assert_eq!(s.maximize(&[r(1)]).unwrap(), Optimum::Infeasible);
    }

    #[test]
    fn equalities_are_substituted() {
        // x + y = 3, x − y = 1  →  (2, 1)
        let mut s = LinearSystem::new(2);
        s.add(vec![r(1), r(1)], Rel::Eq, r(3)).unwrap();
        s.add(vec![r(1), r(-1)], Rel::Eq, r(1)).unwrap();
        assert_eq!(s.solve().unwrap(), Some(vec![r(2), r(1)]));
        s.add(vec![r(1), r(0)], Rel::Eq, r(5)).unwrap();
        assert_eq!(s.solve().unwrap(), None);
    }

    #[test]
    fn strict_rows_need_positive_slack() {
        // 0 < x < 1 is feasible; 0 < x, x < 0 is not; x ≤ 0, 0 < x is not.
        let mut s = LinearSystem::new(1);
        s.add(vec![r(-1)], Rel::Lt, r(0)).unwrap();
        s.add(vec![r(1)], Rel::Lt, r(1)).unwrap();
        let x = s.solve().unwrap().unwrap();
        assert!(x[0] > r(0) && x[0] < r(1));

        let mut t = LinearSystem::new(1);
        t.add(vec![r(-1)], Rel::Lt, r(0)).unwrap();
        t.add(vec![r(1)], Rel::Le, r(0)).unwrap();
        assert_eq!(t.solve().unwrap(), None);
    }

    #[test]
    fn strict_with_equality() {
        // a + b = 1, a > 0, b > 0, a < 1/3
        let mut s = LinearSystem::new(2);
        s.add(vec![r(1), r(1)], Rel::Eq, r(1)).unwrap();
        s.add(vec![r(-1), r(0)], Rel::Lt, r(0)).unwrap();
        s.add(vec![r(0), r(-1)], Rel::Lt, r(0)).unwrap();
        s.add(vec![r(1), r(0)], Rel::Lt, rat(1, 3)).unwrap();
        let p = s.solve().unwrap().unwrap();
        assert!(s.satisfied_by(&p));
    }

    #[test]
    fn pinned_target_is_attained() {
        // maximize x subject to x = 2
        let mut s = LinearSystem::new(1);
        s.add(vec![r(1)], Rel::Eq, r(2)).unwrap();
        match s.maximize(&[r(1)]).unwrap() {
            Optimum::Attained { value, .. } => assert_eq!(value, r(2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn brute_force_agreement_on_boxes() {
        // Random two-variable systems: compare the optimum against vertex
        // enumeration over all pairs of tight rows.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let mut s = LinearSystem::new(2);
            let mut rows = vec![(r(-1), r(0), r(0)), (r(0), r(-1), r(0))];
            rows.push((r(1), r(0), r(10)));
            rows.push((r(0), r(1), r(10)));
            for _ in 0..3 {
                rows.push((
                    r(rng.gen_range(-4..=4)),
                    r(rng.gen_range(-4..=4)),
                    r(rng.gen_range(-3..=12)),
                ));
            }
            for (a, b, c) in &rows {
                s.add(vec![a.clone(), b.clone()], Rel::Le, c.clone()).unwrap();
            }
            let obj = [r(rng.gen_range(-3..=3)), r(rng.gen_range(-3..=3))];
            let mut best: Option<Rational> = None;
            for i in 0..rows.len() {
                for j in i + 1..rows.len() {
                    let (a1, b1, c1) = &rows[i];
                    let (a2, b2, c2) = &rows[j];
                    let det = a1 * b2 - a2 * b1;
                    if det.is_zero() {
                        continue;
                    }
                    let p = vec![(c1 * b2 - c2 * b1) / &det, (a1 * c2 - a2 * c1) / &det];
                    if s.satisfied_by(&p) {
                        let v = dot(&obj, &p);
                        if best.as_ref().map_or(true, |b| v > *b) {
                            best = Some(v);
                        }
                    }
                }
            }
            match (s.maximize(&obj).unwrap(), best) {
                (Optimum::Attained { value, .. }, Some(b)) => assert_eq!(value, b),
                (Optimum::Infeasible, None) => {}
                (got, want) => panic!("{got:?} vs {want:?}"),
            }
        }
    }
}
