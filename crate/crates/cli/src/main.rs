use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use extcone::afun::{self, AffineFn, LscFn};
use extcone::cone::{Cone, Element};
use extcone::ehs::{self, BuildOptions, CuMorphismToA};
use extcone::io;
use extcone::limits::{self, RoundtripOptions};
use extcone::riesz;
use extcone::selftest;
use extcone::xreal::{ExtVector, Rational};
use extcone::{Error, Result};

#[derive(Parser)]
#[command(name = "extcone", version, about = "Exact computation with finitely generated extended Choquet cones")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Cone presentation file (.cone).
    #[arg(long, global = true)]
    cone: Option<PathBuf>,

    /// Input document; repeat for several.
    #[arg(long = "in", global = true)]
    inputs: Vec<PathBuf>,

    /// Write the result document here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Rounds for `factor-system` and `roundtrip`, levels for `bratteli`.
    #[arg(long, global = true)]
    depth: Option<usize>,

    /// Pairings for `roundtrip`, sample size for `selftest`.
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Seed for every sampled instance.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Check a presentation and list every violated invariant.
    Validate,
    /// Bring a raw sum `Σ c_x x + w` into canonical form.
    Canon,
    /// Add two elements or two functions.
    Add,
    /// Compare two elements, or two functions (≤ and ≪).
    Leq,
    /// Greatest lower bound of two elements or two functions.
    Meet,
    /// Evaluate a function at an element.
    Eval,
    /// Pair a positive Riesz vector with an element.
    Pair,
    /// Riesz interpolation: `f1, f2 ≤ h ≤ g1, g2`.
    Interpolate,
    /// Split `f ◁ g1 + … + gk` as `f1 + … + fk` with `fi ◁ gi`.
    Decompose,
    /// Factor a morphism `[0, ∞]ⁿ → A(C)` so that related points become ≪ in a power of `[0, ∞]`.
    Triangle,
    /// Build an inductive system of powers of `[0, ∞]` from sample functions.
    FactorSystem,
    /// Transpose every connecting map of a system.
    Dualize,
    /// Import a Bratteli diagram as an inductive and a projective system.
    Bratteli,
    /// Check evaluation through a dualized system against direct evaluation.
    Roundtrip,
    /// Run every invariant suite.
    Selftest,
}

/// The document to emit and whether the run counts as a failure.
struct Outcome {
    doc: Value,
    report: String,
    code: u8,
}

impl Outcome {
    fn ok(doc: Value) -> Self {
        Outcome { doc, report: String::new(), code: 0 }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

impl Cli {
    fn cone(&self) -> Result<Cone> {
        let path = self.cone.as_ref().ok_or_else(|| Error::Precondition("--cone is required".into()))?;
        io::load_cone(&read(path)?)
    }

    fn input(&self, k: usize) -> Result<Value> {
        let path = self
            .inputs
            .get(k)
            .ok_or_else(|| Error::Precondition(format!("at least {} --in file(s) are required", k + 1)))?;
        io::parse_json(&read(path)?)
    }

    fn inputs(&self) -> Result<Vec<Value>> {
        self.inputs.iter().map(|p| io::parse_json(&read(p)?)).collect()
    }
}

fn is_element(v: &Value) -> bool {
    v.get("coeffs").is_some()
}

fn function(cone: &Cone, v: &Value) -> Result<LscFn> {
    io::function_from_value(cone, v, "")
}

/// Two operands, both elements or both functions.
enum Pair {
    Elements(Element, Element),
    Functions(LscFn, LscFn),
}

fn operands(cli: &Cli, cone: &Cone) -> Result<Pair> {
    let (a, b) = (cli.input(0)?, cli.input(1)?);
    match (is_element(&a), is_element(&b)) {
        (true, true) => Ok(Pair::Elements(io::element_from_value(cone, &a)?, io::element_from_value(cone, &b)?)),
        (false, false) => Ok(Pair::Functions(function(cone, &a)?, function(cone, &b)?)),
        _ => Err(Error::Precondition("operands must both be elements or both be functions".into())),
    }
}

fn finite_points(vs: &[ExtVector]) -> Result<Vec<Vec<Rational>>> {
    vs.iter()
        .map(|v| {
            v.0.iter()
                .map(|s| s.finite().cloned().ok_or_else(|| Error::Precondition("points must be finite".into())))
                .collect()
        })
        .collect()
}

fn run(cli: &Cli) -> Result<Outcome> {
    match cli.command {
        Command::Validate => {
            let path = cli.cone.as_ref().ok_or_else(|| Error::Precondition("--cone is required".into()))?;
            let report = io::parse_presentation(&read(path)?)?.validate();
            let violations: Vec<Value> =
                report.violations.iter().map(|v| json!({"kind": v.kind.to_string(), "message": v.message})).collect();
            Ok(Outcome {
                doc: json!({"valid": report.is_valid(), "violations": violations}),
                report: report.to_string(),
                code: if report.is_valid() { 0 } else { 1 },
            })
        }
        Command::Canon => {
            let cone = cli.cone()?;
            let (w, raw) = io::raw_element_from_value(&cone, &cli.input(0)?)?;
            Ok(Outcome::ok(io::element_to_value(&cone, &cone.canonicalize(w, &raw)?)))
        }
        Command::Add => {
            let cone = cli.cone()?;
            Ok(Outcome::ok(match operands(cli, &cone)? {
                Pair::Elements(y, z) => io::element_to_value(&cone, &cone.add(&y, &z)),
                Pair::Functions(f, g) => io::function_to_value(&cone, &afun::add(&cone, &f, &g)),
            }))
        }
        Command::Leq => {
            let cone = cli.cone()?;
            Ok(Outcome::ok(match operands(cli, &cone)? {
                Pair::Elements(y, z) => json!({"leq": cone.leq(&y, &z)}),
                Pair::Functions(f, g) => {
                    json!({"leq": afun::leq(&cone, &f, &g), "way_below": afun::way_below(&cone, &f, &g)})
                }
            }))
        }
        Command::Meet => {
            let cone = cli.cone()?;
            Ok(Outcome::ok(match operands(cli, &cone)? {
                Pair::Elements(y, z) => io::element_to_value(&cone, &cone.element_meet(&y, &z)?),
                Pair::Functions(f, g) => io::function_to_value(&cone, &afun::meet(&cone, &f, &g)?),
            }))
        }
        Command::Eval => {
            let cone = cli.cone()?;
            let f = function(&cone, &cli.input(0)?)?;
            let y = io::element_from_value(&cone, &cli.input(1)?)?;
            Ok(Outcome::ok(json!({"value": afun::eval(&cone, &f, &y).to_string()})))
        }
        Command::Pair => {
            let cone = cli.cone()?;
            let f = riesz::positive(&cone, &single(io::riesz_vectors_from_value(&cone, &cli.input(0)?)?)?)?;
            let y = io::element_from_value(&cone, &cli.input(1)?)?;
            Ok(Outcome::ok(json!({"value": riesz::pairing(&cone, &y, &f).to_string()})))
        }
        Command::Interpolate => {
            let cone = cli.cone()?;
            let mut vs = Vec::new();
            for v in cli.inputs()? {
                vs.extend(io::riesz_vectors_from_value(&cone, &v)?);
            }
            let [f1, f2, g1, g2] = <[_; 4]>::try_from(vs)
                .map_err(|_| Error::Precondition("interpolation needs exactly four vectors f1, f2, g1, g2".into()))?;
            let h = riesz::interpolate(&cone, [&f1, &f2], [&g1, &g2])?;
            Ok(Outcome::ok(io::riesz_to_value(&cone, &h)))
        }
        Command::Decompose => {
            let cone = cli.cone()?;
            let mut fs = Vec::new();
            for v in cli.inputs()? {
                fs.extend(io::functions_from_value(&cone, &v)?);
            }
            let fs = io::affine_functions(fs)?;
            let (f, gs) = fs
                .split_first()
                .filter(|(_, gs)| !gs.is_empty())
                .ok_or_else(|| Error::Precondition("decomposition needs f followed by at least one g".into()))?;
            let parts: Vec<LscFn> =
                afun::riesz_decompose_many(&cone, f, gs)?.into_iter().map(AffineFn::into_inner).collect();
            Ok(Outcome::ok(io::functions_to_value(&cone, &parts)))
        }
        Command::Triangle => {
            let cone = cli.cone()?;
            let phi = CuMorphismToA::new(io::affine_functions(io::functions_from_value(&cone, &cli.input(0)?)?)?);
            let points = finite_points(&io::ext_vectors_from_value(&cli.input(1)?)?)?;
            let f = ehs::triangle(&cone, &phi, &points)?;
            Ok(Outcome { doc: io::factorization_to_value(&cone, &f), report: f.log_lines(&cone).join("\n"), code: 0 })
        }
        Command::FactorSystem => {
            let cone = cli.cone()?;
            let sample = io::affine_functions(io::functions_from_value(&cone, &cli.input(0)?)?)?;
            let rounds = cli.depth.unwrap_or(BuildOptions::default().rounds);
            let built = ehs::build_inductive_system(&cone, &sample, BuildOptions { rounds, ..Default::default() })?;
            let stages: Vec<Value> = built
                .psi
                .iter()
                .map(|p| io::functions_to_value(&cone, &p.gens().iter().map(|g| (**g).clone()).collect::<Vec<_>>()))
                .collect();
            Ok(Outcome::ok(json!({"system": io::system_to_value(&built.system), "stages": stages})))
        }
        Command::Dualize => {
            let s = io::system_from_value(&cli.input(0)?)?;
            Ok(Outcome::ok(io::system_to_value(&limits::dualize(&s))))
        }
        Command::Bratteli => {
            let d = io::diagram_from_value(&cli.input(0)?)?;
            let depth = cli.depth.unwrap_or(6);
            let (ind, proj) = limits::bratteli_import(&d, depth)?;
            let counts: Vec<String> = limits::stage_idempotent_counts(&proj).iter().map(ToString::to_string).collect();
            Ok(Outcome::ok(json!({
                "inductive": io::system_to_value(&ind),
                "projective": io::system_to_value(&proj),
                "idempotent_counts": counts,
            })))
        }
        Command::Roundtrip => {
            let cone = cli.cone()?;
            let defaults = RoundtripOptions::default();
            let opts = RoundtripOptions {
                rounds: cli.depth.unwrap_or(defaults.rounds),
                pairings: cli.samples.unwrap_or(defaults.pairings),
                seed: cli.seed,
                ..defaults
            };
            let r = limits::roundtrip_check(&cone, opts)?;
            Ok(Outcome {
                doc: json!({"stages": r.stages, "pairings": r.pairings, "mismatches": r.mismatches}),
                report: r.mismatches.join("\n"),
                code: if r.passed() { 0 } else { 3 },
            })
        }
        Command::Selftest => {
            let samples = cli.samples.unwrap_or(1000);
            let report = match &cli.cone {
                Some(path) => selftest::run_on(&[io::load_cone(&read(path)?)?], &[], samples, cli.seed),
                None => selftest::run(samples, cli.seed),
            };
            Ok(Outcome { doc: report.to_value(), report: report.to_string(), code: if report.passed() { 0 } else { 3 } })
        }
    }
}

fn single<T>(mut v: Vec<T>) -> Result<T> {
    if v.len() == 1 {
        Ok(v.remove(0))
    } else {
        Err(Error::Precondition(format!("expected one vector, found {}", v.len())))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            let text = io::to_text(&outcome.doc);
            let written = match &cli.out {
                Some(path) => fs::write(path, &text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if !outcome.report.is_empty() {
                eprintln!("{}", outcome.report.trim_end());
            }
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
