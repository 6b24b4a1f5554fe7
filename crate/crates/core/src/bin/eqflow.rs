use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use eqflow::analysis::{flow_decompose, DEFAULT_PRICE_BOX};
use eqflow::assembly::{diagnose, reduce_to_bipartite, solve, verify_equilibrium, SolveOptions};
use eqflow::io::{
    error_json, export_dot, from_json, parse_dimacs, parse_problem, to_json, BipartiteDocument,
    DecompositionDocument, OutcomeDocument, ProblemDocument,
};
use eqflow::{
    EquilibriumOutcome, Error, ExitFlow, FlowProblem, InternalFlow, DEFAULT_TOL, EPS_MASS,
};

#[derive(Parser)]
#[command(
    name = "eqflow",
    version,
    about = "Equilibrium flows on networks with monotone connection functions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone, Copy)]
struct Tol {
    /// Certificate tolerance.
    #[arg(long, env = "EQFLOW_TOL", default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Check balance, target reachability, loops and transportability.
    Check { problem: PathBuf },
    /// Compute an equilibrium outcome.
    Solve {
        /// Problem file (omit with --batch).
        #[arg(required_unless_present = "batch")]
        problem: Option<PathBuf>,
        #[command(flatten)]
        tol: Tol,
        /// Node whose price is fixed at 0.
        #[arg(long)]
        ground: Option<String>,
        /// Output file, or output directory with --batch.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report every failed assumption, not just the first.
        #[arg(long)]
        all_diagnostics: bool,
        /// Skip comparing the feasibility verdict with Hall's condition.
        #[arg(long)]
        skip_cross_check: bool,
        /// Solve every `*.json` problem in a directory.
        #[arg(long, conflicts_with_all = ["problem", "ground"])]
        batch: Option<PathBuf>,
    },
    /// Check an outcome's equilibrium certificate.
    Verify {
        problem: PathBuf,
        outcome: PathBuf,
        #[command(flatten)]
        tol: Tol,
    },
    /// Emit the associated bipartite problem.
    Reduce {
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split an outcome's flow into paths and loops.
    Decompose { problem: PathBuf, outcome: PathBuf },
    /// Render the network in Graphviz DOT.
    ExportDot {
        problem: PathBuf,
        /// Annotate arcs with flows and rents from this outcome.
        #[arg(long)]
        outcome: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a DIMACS min-cost-flow file into a problem file.
    ImportDimacs {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// An error plus the node names needed to render its witness.
struct Failure {
    err: Error,
    names: Vec<String>,
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure {
            err,
            names: Vec::new(),
        }
    }
}

fn named(names: &[String]) -> impl Fn(Error) -> Failure + '_ {
    move |err| Failure {
        err,
        names: names.to_vec(),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_)
        | Error::Validation { .. }
        | Error::Io(_)
        | Error::DimensionMismatch { .. } => 2,
        _ => 1,
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn load_problem(path: &Path) -> Result<FlowProblem, Error> {
    parse_problem(&read(path)?).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn load_outcome(path: &Path) -> Result<OutcomeDocument, Error> {
    from_json(&read(path)?).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("{}", error_json(&f.err, &f.names));
            ExitCode::from(exit_code(&f.err))
        }
    }
}

fn run(cmd: Command) -> Result<u8, Failure> {
    match cmd {
        Command::Check { problem } => {
            let fp = load_problem(&problem)?;
            let names = fp.net.names();
            let d = diagnose(&fp, DEFAULT_PRICE_BOX);
            let verdict = |r: Result<(), &Error>| match r {
                Ok(()) => json!({ "pass": true }),
                Err(e) => json!({ "pass": false, "detail": error_json(e, names) }),
            };
            let dead: Vec<&str> = d
                .assumption2
                .as_ref()
                .map_or(Vec::new(), |v| v.iter().map(|&z| fp.net.name(z)).collect());
            let mut a2 = verdict(d.assumption2.as_ref().map(|_| ()));
            a2["dead_nodes"] = json!(dead);
            let report = json!({
                "balance": verdict(d.balance.as_ref().copied()),
                "reachability": a2,
                "loops": verdict(d.assumption3.as_ref().copied()),
                "transportability": match &d.assumption1 {
                    None => json!({ "pass": false, "skipped": true }),
                    Some(r) => verdict(r.as_ref().copied()),
                },
                "pass": d.ok(),
            });
            emit(None, &to_json(&report))?;
            for e in d.errors() {
                eprintln!("{}", error_json(e, names));
            }
            Ok(if d.ok() { 0 } else { 1 })
        }
        Command::Solve {
            problem,
            tol,
            ground,
            out,
            all_diagnostics,
            skip_cross_check,
            batch,
        } => {
            let opts = SolveOptions {
                tol: tol.tol,
                skip_cross_check,
                ..SolveOptions::default()
            };
            if let Some(dir) = batch {
                return run_batch(&dir, out.as_deref(), &opts, all_diagnostics)
                    .map_err(Failure::from);
            }
            let path = problem.expect("clap requires a problem without --batch");
            let fp = load_problem(&path)?;
            let names = fp.net.names().to_vec();
            let ground = match ground {
                None => None,
                Some(g) => Some(fp.net.index_of(&g).ok_or_else(|| Error::Validation {
                    field: "ground".into(),
                    message: format!("unknown node {g:?}"),
                })?),
            };
            let opts = SolveOptions { ground, ..opts };
            match solve(&fp, &opts) {
                Ok(outcome) => {
                    emit(
                        out.as_deref(),
                        &to_json(&OutcomeDocument::new(&fp, &outcome)),
                    )
                    .map_err(named(&names))?;
                    Ok(0)
                }
                Err(e) if all_diagnostics => {
                    let d = diagnose(&fp, opts.price_box);
                    let mut all: Vec<Value> = d
                        .errors()
                        .into_iter()
                        .map(|e| error_json(e, &names))
                        .collect();
                    if all.is_empty() {
                        all.push(error_json(&e, &names));
                    }
                    eprintln!("{}", Value::Array(all));
                    Ok(exit_code(&e))
                }
                Err(e) => Err(named(&names)(e)),
            }
        }
        Command::Verify {
            problem,
            outcome,
            tol,
        } => {
            let fp = load_problem(&problem)?;
            let names = fp.net.names().to_vec();
            let doc = load_outcome(&outcome)?;
            let (q, mu, p) = doc.values(&fp).map_err(named(&names))?;
            let scale = fp.q.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
            let q_mismatch = q
                .iter()
                .zip(fp.q.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let negative: Vec<Value> = fp
                .net
                .arcs()
                .iter()
                .zip(&mu)
                .filter(|(_, f)| **f < 0.0)
                .map(|(&(x, y), _)| json!([names[x], names[y]]))
                .collect();
            let mut report = json!({});
            let mut pass = true;
            if q_mismatch > EPS_MASS * scale {
                report["q_mismatch"] = json!(q_mismatch);
                pass = false;
            }
            if !negative.is_empty() {
                report["negative_flow"] = Value::Array(negative);
                pass = false;
            } else {
                let outcome = EquilibriumOutcome {
                    q: ExitFlow::new(q).map_err(named(&names))?,
                    mu: InternalFlow::new(mu).map_err(named(&names))?,
                    p,
                    certificate: doc.to_outcome(&fp).map_err(named(&names))?.certificate,
                    meta: Default::default(),
                };
                let c = verify_equilibrium(&fp, &outcome, tol.tol).map_err(named(&names))?;
                report["balance_residual"] = json!(c.balance_residual);
                report["max_positive_rent"] = json!(c.max_positive_rent);
                report["cs_residual"] = json!(c.cs_residual);
                pass &= c.pass;
            }
            report["tol"] = json!(tol.tol);
            report["pass"] = json!(pass);
            emit(None, &to_json(&report))?;
            if !pass {
                eprintln!(
                    "{}",
                    json!({ "error": "certificate", "message": "outcome is not an equilibrium", "witness": report })
                );
            }
            Ok(if pass { 0 } else { 1 })
        }
        Command::Reduce { problem, out } => {
            let fp = load_problem(&problem)?;
            let names = fp.net.names().to_vec();
            let bp = reduce_to_bipartite(&fp).map_err(named(&names))?;
            emit(
                out.as_deref(),
                &to_json(&BipartiteDocument::new(&fp.net, &bp)),
            )?;
            Ok(0)
        }
        Command::Decompose { problem, outcome } => {
            let fp = load_problem(&problem)?;
            let names = fp.net.names().to_vec();
            let out = load_outcome(&outcome)?
                .to_outcome(&fp)
                .map_err(named(&names))?;
            let d = flow_decompose(&fp.net, &out.mu, &out.q).map_err(named(&names))?;
            emit(None, &to_json(&DecompositionDocument::new(&fp.net, &d)))?;
            Ok(0)
        }
        Command::ExportDot {
            problem,
            outcome,
            out,
        } => {
            let fp = load_problem(&problem)?;
            let outcome = match outcome {
                None => None,
                Some(path) => Some(load_outcome(&path)?.to_outcome(&fp)?),
            };
            emit(out.as_deref(), &export_dot(&fp, outcome.as_ref()))?;
            Ok(0)
        }
        Command::ImportDimacs { input, out } => {
            let doc: ProblemDocument = parse_dimacs(&read(&input)?)?;
            doc.to_problem()?;
            emit(out.as_deref(), &to_json(&doc))?;
            Ok(0)
        }
    }
}

fn run_batch(
    dir: &Path,
    out_dir: Option<&Path>,
    opts: &SolveOptions,
    all_diagnostics: bool,
) -> Result<u8, Error> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".json") && !name.ends_with(".outcome.json")
        })
        .collect();
    files.sort();
    let out_dir = out_dir.unwrap_or(dir);
    fs::create_dir_all(out_dir)?;
    let results: Vec<(PathBuf, Result<(), Value>, u8)> = files
        .par_iter()
        .map(|path| {
            let run = || -> Result<(), (Value, u8)> {
                let fp = load_problem(path).map_err(|e| (error_json(&e, &[]), exit_code(&e)))?;
                let names = fp.net.names();
                let outcome = solve(&fp, opts).map_err(|e| {
                    let v = if all_diagnostics {
                        Value::Array(
                            diagnose(&fp, opts.price_box)
                                .errors()
                                .into_iter()
                                .map(|d| error_json(d, names))
                                .collect(),
                        )
                    } else {
                        error_json(&e, names)
                    };
                    (v, exit_code(&e))
                })?;
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
                let target = out_dir.join(format!("{stem}.outcome.json"));
                fs::write(&target, to_json(&OutcomeDocument::new(&fp, &outcome)))
                    .map_err(|e| (json!({ "error": "io", "message": e.to_string() }), 2))
            };
            match run() {
                Ok(()) => (path.clone(), Ok(()), 0),
                Err((v, code)) => (path.clone(), Err(v), code),
            }
        })
        .collect();
    let mut code = 0;
    for (path, r, c) in results {
        match r {
            Ok(()) => println!("ok {}", path.display()),
            Err(v) => {
                println!("fail {}", path.display());
                eprintln!("{}: {v}", path.display());
            }
        }
        code = code.max(c);
    }
    Ok(code)
}
