//! JSON documents for cones, elements, functions, vectors, diagrams,
//! systems and factorizations.
//!
//! Rationals are written as strings `"p/q"` or `"p"` and infinity as
//! `"inf"`. Unknown fields are rejected, and schema errors name the
//! offending field by its path.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde_json::{json, Map, Value};

use crate::afun::{AffineFn, LscFn};
use crate::cone::{Cone, Element, Gen, GeneratorSpec, Idem, Presentation, ReductionSpec};
use crate::ehs::Factorization;
use crate::error::{Error, Result};
use crate::limits::{BratteliDiagram, CuMatrix, Direction, System};
use crate::riesz::RieszVector;
use crate::xreal::{format_rational, parse_rational, ExtScalar, ExtVector, Rational};

/// Parses JSON text, reporting syntax errors with line and column.
pub fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Syntax { line: e.line(), column: e.column(), msg: e.to_string() })
}

/// Pretty-prints a document with a trailing newline.
pub fn to_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values always serialize");
    s.push('\n');
    s
}

struct Obj<'a> {
    map: &'a Map<String, Value>,
    path: String,
}

impl<'a> Obj<'a> {
    fn new(v: &'a Value, path: &str, allowed: &[&str]) -> Result<Self> {
        let map = v.as_object().ok_or_else(|| Error::schema(path_or_root(path), "expected an object"))?;
        if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::schema(join(path, k), "unknown field"));
        }
        Ok(Obj { map, path: path.to_string() })
    }

    fn path(&self, key: &str) -> String {
        join(&self.path, key)
    }

    fn get(&self, key: &str) -> Result<&'a Value> {
        self.map.get(key).ok_or_else(|| Error::schema(self.path(key), "missing field"))
    }

    fn opt(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key)
    }

    fn str(&self, key: &str) -> Result<&'a str> {
        as_str(self.get(key)?, &self.path(key))
    }

    fn array(&self, key: &str) -> Result<&'a [Value]> {
        as_array(self.get(key)?, &self.path(key))
    }

    fn object(&self, key: &str) -> Result<&'a Map<String, Value>> {
        self.get(key)?.as_object().ok_or_else(|| Error::schema(self.path(key), "expected an object"))
    }
}

fn path_or_root(path: &str) -> String {
    if path.is_empty() {
        "<root>".into()
    } else {
        path.into()
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn index(path: &str, i: usize) -> String {
    format!("{}[{i}]", path_or_root(path))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| Error::schema(path_or_root(path), "expected a string"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a [Value]> {
    v.as_array().map(Vec::as_slice).ok_or_else(|| Error::schema(path_or_root(path), "expected an array"))
}

fn as_u64(v: &Value, path: &str) -> Result<u64> {
    v.as_u64().ok_or_else(|| Error::schema(path_or_root(path), "expected a nonnegative integer"))
}

fn strings(v: &Value, path: &str) -> Result<Vec<String>> {
    as_array(v, path)?.iter().enumerate().map(|(i, s)| as_str(s, &index(path, i)).map(str::to_string)).collect()
}

fn rational(v: &Value, path: &str) -> Result<Rational> {
    parse_rational(as_str(v, path)?).map_err(|e| match e {
        Error::Schema { msg, .. } => Error::schema(path, msg),
        e => e,
    })
}

fn nonneg_rational(v: &Value, path: &str) -> Result<Rational> {
    let r = rational(v, path)?;
    if r.is_negative() {
        return Err(Error::schema(path, "must be nonnegative"));
    }
    Ok(r)
}

fn scalar(v: &Value, path: &str) -> Result<ExtScalar> {
    if as_str(v, path)? == "inf" {
        Ok(ExtScalar::Infinite)
    } else {
        Ok(ExtScalar::Finite(nonneg_rational(v, path)?))
    }
}

fn rat_value(r: &Rational) -> Value {
    Value::String(format_rational(r))
}

fn scalar_value(s: &ExtScalar) -> Value {
    Value::String(s.to_string())
}

fn rat_map(m: &Map<String, Value>, path: &str) -> Result<BTreeMap<String, Rational>> {
    m.iter().map(|(k, v)| Ok((k.clone(), rational(v, &join(path, k))?))).collect()
}

fn idem(cone: &Cone, v: &Value, path: &str) -> Result<Idem> {
    let name = as_str(v, path)?;
    cone.idem(name).map_err(|_| Error::schema(path, format!("unknown idempotent `{name}`")))
}

fn gen(cone: &Cone, name: &str, path: &str) -> Result<Gen> {
    cone.gen(name).map_err(|_| Error::schema(path, format!("unknown generator `{name}`")))
}

// ----- cones -----

pub fn parse_presentation(text: &str) -> Result<Presentation> {
    presentation_from_value(&parse_json(text)?)
}

pub fn presentation_from_value(v: &Value) -> Result<Presentation> {
    let o = Obj::new(v, "", &["name", "notes", "idempotents", "order", "generators", "rays", "reductions"])?;
    let name = match o.opt("name") {
        Some(n) => as_str(n, "name")?.to_string(),
        None => String::new(),
    };
    let notes = match o.opt("notes") {
        Some(n) => strings(n, "notes")?,
        None => Vec::new(),
    };
    let idempotents = strings(o.get("idempotents")?, "idempotents")?;
    let mut order = Vec::new();
    for (i, pair) in o.array("order")?.iter().enumerate() {
        let p = index("order", i);
        let items = strings(pair, &p)?;
        let [a, b]: [String; 2] =
            items.try_into().map_err(|_| Error::schema(p.clone(), "expected a pair [lower, upper]"))?;
        order.push((a, b));
    }
    let mut generators = Vec::new();
    for (i, g) in o.array("generators")?.iter().enumerate() {
        let p = index("generators", i);
        let go = Obj::new(g, &p, &["id", "support", "below"])?;
        generators.push(GeneratorSpec {
            id: go.str("id")?.to_string(),
            support: go.str("support")?.to_string(),
            below: strings(go.get("below")?, &go.path("below"))?,
        });
    }
    let mut rays = BTreeMap::new();
    for (w, list) in o.object("rays")? {
        rays.insert(w.clone(), strings(list, &join("rays", w))?);
    }
    let mut reductions = Vec::new();
    if let Some(rs) = o.opt("reductions") {
        for (i, r) in as_array(rs, "reductions")?.iter().enumerate() {
            let p = index("reductions", i);
            let ro = Obj::new(r, &p, &["generator", "at", "coeffs"])?;
            reductions.push(ReductionSpec {
                generator: ro.str("generator")?.to_string(),
                at: ro.str("at")?.to_string(),
                coeffs: rat_map(ro.object("coeffs")?, &ro.path("coeffs"))?,
            });
        }
    }
    Ok(Presentation { name, notes, idempotents, order, generators, rays, reductions })
}

pub fn presentation_to_value(p: &Presentation) -> Value {
    let mut m = Map::new();
    m.insert("name".into(), json!(p.name));
    if !p.notes.is_empty() {
        m.insert("notes".into(), json!(p.notes));
    }
    m.insert("idempotents".into(), json!(p.idempotents));
    m.insert("order".into(), Value::Array(p.order.iter().map(|(a, b)| json!([a, b])).collect()));
    m.insert(
        "generators".into(),
        Value::Array(
            p.generators.iter().map(|g| json!({"id": g.id, "support": g.support, "below": g.below})).collect(),
        ),
    );
    m.insert("rays".into(), Value::Object(p.rays.iter().map(|(w, l)| (w.clone(), json!(l))).collect()));
    if !p.reductions.is_empty() {
        m.insert(
            "reductions".into(),
            Value::Array(
                p.reductions
                    .iter()
                    .map(|r| {
                        let coeffs: Map<String, Value> =
                            r.coeffs.iter().map(|(k, c)| (k.clone(), rat_value(c))).collect();
                        json!({"generator": r.generator, "at": r.at, "coeffs": coeffs})
                    })
                    .collect(),
            ),
        );
    }
    Value::Object(m)
}

pub fn load_cone(text: &str) -> Result<Cone> {
    Cone::new(parse_presentation(text)?)
}

// ----- elements -----

/// Reads `{"support": w, "coeffs": {gen: "p/q"}}` with strictly positive
/// coefficients on arbitrary generators, without canonicalizing.
pub fn raw_element_from_value(cone: &Cone, v: &Value) -> Result<(Idem, BTreeMap<Gen, Rational>)> {
    let o = Obj::new(v, "", &["support", "coeffs"])?;
    let support = idem(cone, o.get("support")?, "support")?;
    let mut coeffs = BTreeMap::new();
    for (k, c) in o.object("coeffs")? {
        let p = join("coeffs", k);
        let x = gen(cone, k, &p)?;
        let c = rational(c, &p)?;
        if !c.is_positive() {
            return Err(Error::schema(p, "coefficients must be strictly positive"));
        }
        coeffs.insert(x, c);
    }
    Ok((support, coeffs))
}

/// Reads an element already in canonical form.
pub fn element_from_value(cone: &Cone, v: &Value) -> Result<Element> {
    let (support, coeffs) = raw_element_from_value(cone, v)?;
    cone.element(support, coeffs).map_err(|e| Error::schema("coeffs", e.to_string()))
}

pub fn parse_element(cone: &Cone, text: &str) -> Result<Element> {
    element_from_value(cone, &parse_json(text)?)
}

pub fn element_to_value(cone: &Cone, y: &Element) -> Value {
    let coeffs: Map<String, Value> =
        y.coeffs().iter().map(|(r, c)| (cone.gen_name(*r).to_string(), rat_value(c))).collect();
    json!({"support": cone.idem_name(y.support()), "coeffs": coeffs})
}

// ----- functions -----

pub fn function_from_value(cone: &Cone, v: &Value, path: &str) -> Result<LscFn> {
    let o = Obj::new(v, path, &["support", "values"])?;
    let support = idem(cone, o.get("support")?, &o.path("support"))?;
    let mut values = BTreeMap::new();
    for (k, s) in o.object("values")? {
        let p = join(&o.path("values"), k);
        values.insert(gen(cone, k, &p)?, scalar(s, &p)?);
    }
    LscFn::new(cone, support, values).map_err(|e| Error::schema(o.path("values"), e.to_string()))
}

pub fn function_to_value(cone: &Cone, f: &LscFn) -> Value {
    let values: Map<String, Value> =
        f.values().iter().map(|(r, s)| (cone.gen_name(*r).to_string(), scalar_value(s))).collect();
    json!({"support": cone.idem_name(f.support()), "values": values})
}

/// Reads either a single function or `{"functions": [...]}`.
pub fn functions_from_value(cone: &Cone, v: &Value) -> Result<Vec<LscFn>> {
    if v.get("functions").is_some() {
        let o = Obj::new(v, "", &["functions"])?;
        o.array("functions")?
            .iter()
            .enumerate()
            .map(|(i, f)| function_from_value(cone, f, &index("functions", i)))
            .collect()
    } else {
        Ok(vec![function_from_value(cone, v, "")?])
    }
}

pub fn parse_functions(cone: &Cone, text: &str) -> Result<Vec<LscFn>> {
    functions_from_value(cone, &parse_json(text)?)
}

pub fn affine_functions(fs: Vec<LscFn>) -> Result<Vec<AffineFn>> {
    fs.into_iter()
        .enumerate()
        .map(|(i, f)| AffineFn::new(f).map_err(|_| Error::schema(index("functions", i), "values must be finite")))
        .collect()
}

pub fn functions_to_value(cone: &Cone, fs: &[LscFn]) -> Value {
    json!({"functions": fs.iter().map(|f| function_to_value(cone, f)).collect::<Vec<_>>()})
}

// ----- vectors -----

fn riesz_from_value(cone: &Cone, v: &Value, path: &str) -> Result<RieszVector> {
    let o = Obj::new(v, path, &["values"])?;
    let mut values = vec![Rational::zero(); cone.gen_count()];
    for (k, s) in o.object("values")? {
        let p = join(&o.path("values"), k);
        values[gen(cone, k, &p)?.index()] = rational(s, &p)?;
    }
    RieszVector::new(cone, values)
}

/// Reads `{"values": {...}}` or `{"riesz": [{"values": {...}}, ...]}`.
pub fn riesz_vectors_from_value(cone: &Cone, v: &Value) -> Result<Vec<RieszVector>> {
    if v.get("riesz").is_some() {
        let o = Obj::new(v, "", &["riesz"])?;
        o.array("riesz")?.iter().enumerate().map(|(i, r)| riesz_from_value(cone, r, &index("riesz", i))).collect()
    } else {
        Ok(vec![riesz_from_value(cone, v, "")?])
    }
}

pub fn riesz_to_value(cone: &Cone, f: &RieszVector) -> Value {
    let values: Map<String, Value> =
        cone.gens().map(|x| (cone.gen_name(x).to_string(), rat_value(f.get(x)))).collect();
    json!({"values": values})
}

/// Reads `{"vectors": [["1", "inf"], ...]}`.
pub fn ext_vectors_from_value(v: &Value) -> Result<Vec<ExtVector>> {
    let o = Obj::new(v, "", &["vectors"])?;
    o.array("vectors")?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let p = index("vectors", i);
            as_array(row, &p)?
                .iter()
                .enumerate()
                .map(|(j, s)| scalar(s, &index(&p, j)))
                .collect::<Result<Vec<_>>>()
                .map(ExtVector)
        })
        .collect()
}

pub fn ext_vectors_to_value(vs: &[ExtVector]) -> Value {
    json!({"vectors": vs.iter().map(|v| v.0.iter().map(scalar_value).collect::<Vec<_>>()).collect::<Vec<_>>()})
}

// ----- diagrams and systems -----

pub fn diagram_from_value(v: &Value) -> Result<BratteliDiagram> {
    let o = Obj::new(v, "", &["levels", "matrices"])?;
    let levels = o
        .array("levels")?
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let p = index("levels", i);
            as_array(l, &p)?.iter().enumerate().map(|(j, e)| as_u64(e, &index(&p, j))).collect()
        })
        .collect::<Result<Vec<Vec<u64>>>>()?;
    let matrices = o
        .array("matrices")?
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let p = index("matrices", i);
            as_array(m, &p)?
                .iter()
                .enumerate()
                .map(|(r, row)| {
                    let pr = index(&p, r);
                    as_array(row, &pr)?.iter().enumerate().map(|(c, e)| as_u64(e, &index(&pr, c))).collect()
                })
                .collect()
        })
        .collect::<Result<Vec<Vec<Vec<u64>>>>>()?;
    BratteliDiagram::new(levels, matrices)
}

pub fn parse_diagram(text: &str) -> Result<BratteliDiagram> {
    diagram_from_value(&parse_json(text)?)
}

pub fn diagram_to_value(d: &BratteliDiagram) -> Value {
    json!({"levels": d.levels(), "matrices": d.matrices()})
}

fn matrix_value(m: &CuMatrix) -> Value {
    Value::Array(m.entries().iter().map(|r| Value::Array(r.iter().map(rat_value).collect())).collect())
}

fn matrix_from_value(v: &Value, path: &str) -> Result<Vec<Vec<Rational>>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let p = index(path, i);
            as_array(row, &p)?.iter().enumerate().map(|(j, e)| nonneg_rational(e, &index(&p, j))).collect()
        })
        .collect()
}

pub fn system_to_value(s: &System) -> Value {
    let maps: Vec<Value> = s
        .maps()
        .iter()
        .map(|(&(i, j), m)| json!({"pair": [i, j], "matrix": matrix_value(m)}))
        .collect();
    json!({
        "direction": s.direction().to_string(),
        "indices": s.indices(),
        "dims": s.dims(),
        "maps": maps,
    })
}

pub fn system_from_value(v: &Value) -> Result<System> {
    let o = Obj::new(v, "", &["direction", "indices", "dims", "maps"])?;
    let direction = match o.str("direction")? {
        "inductive" => Direction::Inductive,
        "projective" => Direction::Projective,
        _ => return Err(Error::schema("direction", "expected \"inductive\" or \"projective\"")),
    };
    let indices = strings(o.get("indices")?, "indices")?;
    let dims = o
        .array("dims")?
        .iter()
        .enumerate()
        .map(|(i, d)| as_u64(d, &index("dims", i)).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut maps = BTreeMap::new();
    for (k, m) in o.array("maps")?.iter().enumerate() {
        let p = index("maps", k);
        let mo = Obj::new(m, &p, &["pair", "matrix"])?;
        let pair = mo.array("pair")?;
        let (i, j) = match pair {
            [i, j] => (as_u64(i, &mo.path("pair"))? as usize, as_u64(j, &mo.path("pair"))? as usize),
            _ => return Err(Error::schema(mo.path("pair"), "expected [i, j]")),
        };
        let entries = matrix_from_value(mo.get("matrix")?, &mo.path("matrix"))?;
        let rows = entries.len();
        let cols = entries.first().map_or(0, Vec::len);
        let (rows, cols) = if rows == 0 {
            match (direction, dims.get(i), dims.get(j)) {
                (Direction::Inductive, Some(&a), Some(&b)) => (b, a),
                (Direction::Projective, Some(&a), Some(&b)) => (a, b),
                _ => (0, 0),
            }
        } else {
            (rows, cols)
        };
        maps.insert((i, j), CuMatrix::new(rows, cols, entries).map_err(|e| Error::schema(mo.path("matrix"), e.to_string()))?);
    }
    System::new(direction, indices, dims, maps)
}

// ----- factorizations -----

pub fn factorization_to_value(cone: &Cone, f: &Factorization) -> Value {
    let q: Vec<Value> =
        f.q().iter().map(|r| Value::Array(r.iter().map(|e| Value::String(e.to_string())).collect())).collect();
    json!({
        "q": q,
        "generators": f.psi().iter().map(|g| function_to_value(cone, g)).collect::<Vec<_>>(),
        "stages": [f.source_dim(), f.target_dim()],
        "log": f.log_lines(cone),
    })
}

/// Reads back the matrix, generators and dimensions of a factorization
/// document. The log is returned as plain lines.
pub fn factorization_from_value(
    cone: &Cone,
    v: &Value,
) -> Result<(Vec<Vec<BigInt>>, Vec<AffineFn>, [usize; 2], Vec<String>)> {
    let o = Obj::new(v, "", &["q", "generators", "stages", "log"])?;
    let q = o
        .array("q")?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let p = index("q", i);
            as_array(row, &p)?
                .iter()
                .enumerate()
                .map(|(j, e)| {
                    let pe = index(&p, j);
                    as_str(e, &pe)?
                        .parse::<BigInt>()
                        .ok()
                        .filter(|b| !b.is_negative())
                        .ok_or_else(|| Error::schema(pe, "expected a nonnegative integer string"))
                })
                .collect()
        })
        .collect::<Result<Vec<Vec<BigInt>>>>()?;
    let gens = o
        .array("generators")?
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let p = index("generators", i);
            AffineFn::new(function_from_value(cone, g, &p)?).map_err(|_| Error::schema(p, "values must be finite"))
        })
        .collect::<Result<Vec<_>>>()?;
    let stages = o.array("stages")?;
    let stages = match stages {
        [a, b] => [as_u64(a, "stages")? as usize, as_u64(b, "stages")? as usize],
        _ => return Err(Error::schema("stages", "expected [n, N]")),
    };
    if q.len() != stages[1] || q.iter().any(|r| r.len() != stages[0]) || gens.len() != stages[1] {
        return Err(Error::schema("q", "dimensions disagree with stages"));
    }
    let log = strings(o.get("log")?, "log")?;
    Ok((q, gens, stages, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::xreal::rat;

    #[test]
    fn e2_round_trip() {
        let p = fixtures::e2().presentation().clone();
        let text = to_text(&presentation_to_value(&p));
        assert_eq!(parse_presentation(&text).unwrap(), p);
    }

    #[test]
    fn element_document() {
        let c = fixtures::elex();
        let y = parse_element(&c, r#"{"support":"w","coeffs":{"x2":"3/2"}}"#).unwrap();
        assert_eq!(y.support(), c.idem("w").unwrap());
        assert_eq!(y.coeff(c.gen("x2").unwrap()), rat(3, 2));
        let v = element_to_value(&c, &y);
        assert_eq!(element_from_value(&c, &v).unwrap(), y);
    }

    #[test]
    fn zero_coefficient_is_a_schema_violation() {
        let c = fixtures::elex();
        let err = parse_element(&c, r#"{"support":"w","coeffs":{"x2":"0"}}"#).unwrap_err();
        assert!(matches!(err, Error::Schema { ref field, .. } if field == "coeffs.x2"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_json("{\n  \"a\": ,\n}").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 2, .. }), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = parse_presentation(r#"{"idempotents":["a"],"order":[],"generators":[],"rays":{},"extra":1}"#)
            .unwrap_err();
        assert_eq!(err, Error::schema("extra", "unknown field"));
        let c = fixtures::e1();
        let err = parse_functions(&c, r#"{"support":"bot","values":{"u":"1"},"colour":"red"}"#).unwrap_err();
        assert!(matches!(err, Error::Schema { ref field, .. } if field == "colour"));
    }

    #[test]
    fn function_and_vector_round_trip() {
        let c = fixtures::e2();
        let fs = parse_functions(&c, r#"{"support":"bot","values":{"e1":"inf","e2":"2/3"}}"#).unwrap();
        let v = functions_to_value(&c, &fs);
        assert_eq!(functions_from_value(&c, &v).unwrap(), fs);
        let vs = ext_vectors_from_value(&parse_json(r#"{"vectors":[["1","inf"],["0","5/2"]]}"#).unwrap()).unwrap();
        assert_eq!(ext_vectors_from_value(&ext_vectors_to_value(&vs)).unwrap(), vs);
        let r = riesz_vectors_from_value(&c, &parse_json(r#"{"values":{"e1":"-1/2"}}"#).unwrap()).unwrap();
        assert_eq!(riesz_vectors_from_value(&c, &riesz_to_value(&c, &r[0])).unwrap(), r);
    }

    #[test]
    fn diagram_and_system_round_trip() {
        let d = fixtures::car();
        assert_eq!(diagram_from_value(&diagram_to_value(&d)).unwrap(), d);
        let (ind, proj) = crate::limits::bratteli_import(&d, 3).unwrap();
        assert_eq!(system_from_value(&system_to_value(&ind)).unwrap(), ind);
        assert_eq!(system_from_value(&system_to_value(&proj)).unwrap(), proj);
    }
}
