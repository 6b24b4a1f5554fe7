//! JSON documents, the DIMACS importer and DOT export.
//!
//! Problem files look like
//!
//! ```json
//! {
//!   "nodes": ["a", "b"],
//!   "arcs": [{"from": "a", "to": "b", "g": {"kind": "affine", "slope": 1.0, "intercept": -1.0}}],
//!   "q": {"a": -1.0, "b": 1.0}
//! }
//! ```
//!
//! Connection descriptors are `affine` (`slope`, `intercept`), `cost`
//! (`c`, meaning `p - c`), `pwl` (`points` as `[p, G(p)]` pairs plus
//! `left_slope` and `right_slope`) and `penalty` (`n`, meaning `p - n`).
//! Nodes missing from `q` have zero exit flow.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::analysis::FlowDecomposition;
use crate::assembly::{Certificate, EquilibriumOutcome, FlowProblem, SolverMeta};
use crate::bipartite::BipartiteProblem;
use crate::connections::Connection;
use crate::error::{Error, Result};
use crate::network::{ExitFlow, InternalFlow, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConnectionDoc {
    Affine {
        slope: f64,
        intercept: f64,
    },
    Cost {
        c: f64,
    },
    Pwl {
        points: Vec<[f64; 2]>,
        left_slope: f64,
        right_slope: f64,
    },
    Penalty {
        n: f64,
    },
}

impl ConnectionDoc {
    /// Validates the descriptor; errors name fields below `field`.
    pub fn to_connection(&self, field: &str) -> Result<Connection> {
        let r = match self {
            ConnectionDoc::Affine { slope, intercept } => Connection::affine(*slope, *intercept),
            ConnectionDoc::Cost { c } => {
                if c.is_finite() {
                    Ok(Connection::cost(*c))
                } else {
                    Err(Error::validation("c", "cost must be finite"))
                }
            }
            ConnectionDoc::Pwl {
                points,
                left_slope,
                right_slope,
            } => Connection::piecewise(
                points.iter().map(|&[p, g]| (p, g)).collect(),
                *left_slope,
                *right_slope,
            ),
            ConnectionDoc::Penalty { n } => Connection::penalty(*n),
        };
        r.map_err(|e| prefix(e, field))
    }
}

impl From<&Connection> for ConnectionDoc {
    fn from(g: &Connection) -> Self {
        match g {
            Connection::Affine { slope, intercept } => ConnectionDoc::Affine {
                slope: *slope,
                intercept: *intercept,
            },
            Connection::PiecewiseLinear(pw) => ConnectionDoc::Pwl {
                points: pw.points().iter().map(|&(p, v)| [p, v]).collect(),
                left_slope: pw.left_slope(),
                right_slope: pw.right_slope(),
            },
            Connection::Penalty { n } => ConnectionDoc::Penalty { n: *n },
        }
    }
}

fn prefix(e: Error, field: &str) -> Error {
    match e {
        Error::Validation { field: f, message } => Error::Validation {
            field: format!("{field}.{f}"),
            message,
        },
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcDoc {
    pub from: String,
    pub to: String,
    pub g: ConnectionDoc,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<MetaDoc>,
    pub nodes: Vec<String>,
    pub arcs: Vec<ArcDoc>,
    #[serde(default)]
    pub q: Map<String, Value>,
}

/// Deserializes JSON, reporting the path of the offending field.
pub fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse(format!("{path}: {}", e.into_inner()))
    })
}

pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

/// Values of a node-keyed map in node order; absent nodes get `default`.
fn node_values(
    net: &Network,
    map: &Map<String, Value>,
    field: &str,
    default: Option<f64>,
) -> Result<Vec<f64>> {
    let mut out: Vec<Option<f64>> = vec![default; net.node_count()];
    for (key, v) in map {
        let z = net
            .index_of(key)
            .ok_or_else(|| Error::validation(format!("{field}.{key}"), "unknown node"))?;
        let x = v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| {
            Error::validation(format!("{field}.{key}"), "expected a finite number")
        })?;
        out[z] = Some(x);
    }
    out.into_iter()
        .enumerate()
        .map(|(z, v)| {
            v.ok_or_else(|| Error::validation(format!("{field}.{}", net.name(z)), "missing value"))
        })
        .collect()
}

fn node_map(net: &Network, values: &[f64]) -> Map<String, Value> {
    net.names()
        .iter()
        .zip(values)
        .map(|(name, &v)| (name.clone(), number(v)))
        .collect()
}

fn number(v: f64) -> Value {
    // Avoid "-0.0" in output.
    let v = if v == 0.0 { 0.0 } else { v };
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

impl ProblemDocument {
    pub fn to_problem(&self) -> Result<FlowProblem> {
        for (i, name) in self.nodes.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::validation(
                    format!("nodes[{i}]"),
                    "node names must be nonempty",
                ));
            }
        }
        let net0 = Network::new(self.nodes.clone(), Vec::new())?;
        let mut arcs = Vec::with_capacity(self.arcs.len());
        let mut g = Vec::with_capacity(self.arcs.len());
        for (i, arc) in self.arcs.iter().enumerate() {
            let look = |name: &str, end: &str| {
                net0.index_of(name).ok_or_else(|| {
                    Error::validation(format!("arcs[{i}].{end}"), format!("unknown node {name:?}"))
                })
            };
            arcs.push((look(&arc.from, "from")?, look(&arc.to, "to")?));
            g.push(arc.g.to_connection(&format!("arcs[{i}].g"))?);
        }
        let net = Network::new(self.nodes.clone(), arcs)?;
        let q = node_values(&net, &self.q, "q", Some(0.0))?;
        let q = ExitFlow::new(q).map_err(|e| prefix(e, "q"))?;
        FlowProblem::new(net, g, q).map_err(|e| match e {
            Error::Unbalanced { sum } => {
                Error::validation("q", format!("exit flows sum to {sum:e}, not 0"))
            }
            other => other,
        })
    }

    pub fn from_problem(fp: &FlowProblem) -> Self {
        ProblemDocument {
            meta: None,
            nodes: fp.net.names().to_vec(),
            arcs: fp
                .net
                .arcs()
                .iter()
                .zip(&fp.g)
                .map(|(&(x, y), g)| ArcDoc {
                    from: fp.net.name(x).to_string(),
                    to: fp.net.name(y).to_string(),
                    g: g.into(),
                })
                .collect(),
            q: node_map(&fp.net, &fp.q),
        }
    }
}

/// Parses and validates a problem file.
pub fn parse_problem(text: &str) -> Result<FlowProblem> {
    from_json::<ProblemDocument>(text)?.to_problem()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowDoc {
    pub from: String,
    pub to: String,
    pub flow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateDoc {
    pub balance_residual: f64,
    pub max_positive_rent: f64,
    pub cs_residual: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverMetaDoc {
    pub ground: Option<String>,
    pub penalty_n: Option<f64>,
    pub blocks: usize,
    pub iterations: usize,
    #[serde(default)]
    pub doublings: usize,
    #[serde(default)]
    pub extension_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeDocument {
    pub q: Map<String, Value>,
    pub mu: Vec<FlowDoc>,
    pub p: Map<String, Value>,
    pub certificate: CertificateDoc,
    #[serde(default)]
    pub solver_meta: SolverMetaDoc,
}

impl OutcomeDocument {
    pub fn new(fp: &FlowProblem, out: &EquilibriumOutcome) -> Self {
        let c = &out.certificate;
        OutcomeDocument {
            q: node_map(&fp.net, &out.q),
            mu: fp
                .net
                .arcs()
                .iter()
                .zip(out.mu.iter())
                .map(|(&(x, y), &f)| FlowDoc {
                    from: fp.net.name(x).to_string(),
                    to: fp.net.name(y).to_string(),
                    flow: if f == 0.0 { 0.0 } else { f },
                })
                .collect(),
            p: node_map(&fp.net, &out.p),
            certificate: CertificateDoc {
                balance_residual: c.balance_residual,
                max_positive_rent: c.max_positive_rent,
                cs_residual: c.cs_residual,
                tol: c.tol,
                pass: c.pass,
            },
            solver_meta: SolverMetaDoc {
                ground: out.meta.ground.map(|z| fp.net.name(z).to_string()),
                penalty_n: out.meta.penalty_n,
                blocks: out.meta.blocks,
                iterations: out.meta.iterations,
                doublings: out.meta.doublings,
                extension_sweeps: out.meta.extension_sweeps,
            },
        }
    }

    /// Exit flows, arc flows (possibly negative) and prices in the node and
    /// arc order of `fp`. Arcs not listed carry no flow.
    pub fn values(&self, fp: &FlowProblem) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let q = node_values(&fp.net, &self.q, "q", Some(0.0))?;
        let p = node_values(&fp.net, &self.p, "p", None)?;
        let mut mu = vec![0.0; fp.net.arc_count()];
        let mut seen = vec![false; fp.net.arc_count()];
        for (i, f) in self.mu.iter().enumerate() {
            let look = |name: &str, end: &str| {
                fp.net.index_of(name).ok_or_else(|| {
                    Error::validation(format!("mu[{i}].{end}"), format!("unknown node {name:?}"))
                })
            };
            let (x, y) = (look(&f.from, "from")?, look(&f.to, "to")?);
            let a = fp
                .net
                .find_arc(x, y)
                .ok_or_else(|| Error::validation(format!("mu[{i}]"), "no such arc"))?;
            if seen[a] {
                return Err(Error::validation(format!("mu[{i}]"), "arc listed twice"));
            }
            if !f.flow.is_finite() {
                return Err(Error::validation(
                    format!("mu[{i}].flow"),
                    "expected a finite number",
                ));
            }
            seen[a] = true;
            mu[a] = f.flow;
        }
        Ok((q, mu, p))
    }

    /// The outcome as solver types; fails on negative flows.
    pub fn to_outcome(&self, fp: &FlowProblem) -> Result<EquilibriumOutcome> {
        let (q, mu, p) = self.values(fp)?;
        let c = &self.certificate;
        Ok(EquilibriumOutcome {
            q: ExitFlow::new(q)?,
            mu: InternalFlow::new(mu).map_err(|e| prefix(e, "mu"))?,
            p,
            certificate: Certificate {
                balance_residual: c.balance_residual,
                max_positive_rent: c.max_positive_rent,
                cs_residual: c.cs_residual,
                tol: c.tol,
                pass: c.pass,
            },
            meta: SolverMeta {
                ground: self
                    .solver_meta
                    .ground
                    .as_deref()
                    .and_then(|g| fp.net.index_of(g)),
                penalty_n: self.solver_meta.penalty_n,
                blocks: self.solver_meta.blocks,
                iterations: self.solver_meta.iterations,
                doublings: self.solver_meta.doublings,
                extension_sweeps: self.solver_meta.extension_sweeps,
                ..SolverMeta::default()
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginDoc {
    pub node: String,
    pub mass: f64,
}

/// The bipartite problem, with sources and targets named after their nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteDocument {
    pub sources: Vec<MarginDoc>,
    pub targets: Vec<MarginDoc>,
    pub arcs: Vec<ArcDoc>,
}

impl BipartiteDocument {
    /// `bp` must be labelled with node indices of `net`.
    pub fn new(net: &Network, bp: &BipartiteProblem) -> Self {
        let margins = |labels: &[usize], mass: &[f64]| {
            labels
                .iter()
                .zip(mass)
                .map(|(&z, &m)| MarginDoc {
                    node: net.name(z).to_string(),
                    mass: m,
                })
                .collect()
        };
        BipartiteDocument {
            sources: margins(bp.sources(), bp.n()),
            targets: margins(bp.targets(), bp.m()),
            arcs: bp
                .arcs()
                .iter()
                .map(|a| ArcDoc {
                    from: net.name(bp.sources()[a.x]).to_string(),
                    to: net.name(bp.targets()[a.y]).to_string(),
                    g: (&a.g).into(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDoc {
    pub nodes: Vec<String>,
    pub flow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionDocument {
    pub paths: Vec<PathDoc>,
    pub loops: Vec<PathDoc>,
    pub loop_mass: f64,
}

impl DecompositionDocument {
    pub fn new(net: &Network, d: &FlowDecomposition) -> Self {
        let conv = |list: &[(Vec<usize>, f64)]| {
            list.iter()
                .map(|(nodes, m)| PathDoc {
                    nodes: nodes.iter().map(|&z| net.name(z).to_string()).collect(),
                    flow: *m,
                })
                .collect()
        };
        DecompositionDocument {
            paths: conv(&d.path_flows),
            loops: conv(&d.loop_flows),
            loop_mass: d.loop_mass(),
        }
    }
}

/// Machine-readable description of an error, with node witnesses named.
pub fn error_json(e: &Error, names: &[String]) -> Value {
    let name = |z: &usize| Value::String(names.get(*z).cloned().unwrap_or_else(|| z.to_string()));
    let list = |v: &[usize]| Value::Array(v.iter().map(name).collect());
    let (kind, witness) = match e {
        Error::Validation { field, .. } => ("validation", serde_json::json!({ "field": field })),
        Error::DimensionMismatch { .. } => ("dimension", Value::Null),
        Error::Unbalanced { sum } => ("unbalanced", serde_json::json!({ "sum": sum })),
        Error::Infeasible {
            violating_set,
            deficit,
        } => (
            "infeasible",
            serde_json::json!({ "violating_set": list(violating_set), "deficit": deficit }),
        ),
        Error::DeadSource { node, q } => (
            "dead_source",
            serde_json::json!({ "node": name(node), "q": q }),
        ),
        Error::ProfitableLoop {
            cycle,
            price,
            profit,
        } => (
            "profitable_loop",
            serde_json::json!({ "loop": list(cycle), "price": number(*price), "profit": number(*profit) }),
        ),
        Error::EnumerationGuard { .. } => ("enumeration_guard", Value::Null),
        Error::HallViolated { sources, shortfall } => (
            "hall_violated",
            serde_json::json!({ "sources": list(sources), "shortfall": shortfall }),
        ),
        Error::NonConvergence { .. } => ("non_convergence", Value::Null),
        Error::PenaltyEscalation { .. } => ("penalty_escalation", Value::Null),
        Error::ExtensionCap { .. } => ("extension_cap", Value::Null),
        Error::Reconstruction(_) => ("reconstruction", Value::Null),
        Error::BadBounds { .. } => ("bad_bounds", Value::Null),
        Error::Certificate {
            balance,
            rent,
            cs,
            tol,
        } => (
            "certificate",
            serde_json::json!({
                "balance_residual": number(*balance),
                "max_positive_rent": number(*rent),
                "cs_residual": number(*cs),
                "tol": tol,
            }),
        ),
        Error::NegativeScale(_) => ("negative_scale", Value::Null),
        Error::CrossCheck { feasible, hall } => (
            "cross_check",
            serde_json::json!({ "feasible": feasible, "hall": hall }),
        ),
        Error::MonotoneResponse { .. } => ("monotone_response", Value::Null),
        Error::Ground(_) => ("ground", Value::Null),
        Error::Io(_) => ("io", Value::Null),
        Error::Parse(_) => ("parse", Value::Null),
    };
    let mut obj = Map::new();
    obj.insert("error".into(), kind.into());
    obj.insert("message".into(), e.to_string().into());
    if !witness.is_null() {
        obj.insert("witness".into(), witness);
    }
    Value::Object(obj)
}

/// Reads a DIMACS min-cost-flow file (`p min`, `n id supply`,
/// `a from to low cap cost`). Supplies become `q = -supply`, each arc gets
/// `G(p) = p - cost`. Capacities are ignored; nonzero lower bounds are
/// rejected.
pub fn parse_dimacs(text: &str) -> Result<ProblemDocument> {
    let bad = |line: usize, msg: &str| Error::Parse(format!("line {line}: {msg}"));
    let mut n_nodes = None;
    let mut supply: Vec<f64> = Vec::new();
    let mut arcs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut it = raw.split_whitespace();
        match it.next() {
            None | Some("c") => {}
            Some("p") => {
                if it.next() != Some("min") {
                    return Err(bad(line, "expected `p min <nodes> <arcs>`"));
                }
                let n: usize = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad(line, "bad node count"))?;
                n_nodes = Some(n);
                supply = vec![0.0; n];
            }
            Some(tag @ ("n" | "a")) => {
                let n = n_nodes.ok_or_else(|| bad(line, "descriptor before the problem line"))?;
                let fields: Vec<&str> = it.collect();
                let node = |t: &str| -> Result<usize> {
                    let k: usize = t.parse().map_err(|_| bad(line, "bad node id"))?;
                    if k == 0 || k > n {
                        return Err(bad(line, "node id out of range"));
                    }
                    Ok(k - 1)
                };
                let num = |t: &str| -> Result<f64> {
                    t.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| bad(line, "bad number"))
                };
                if tag == "n" {
                    if fields.len() != 2 {
                        return Err(bad(line, "expected `n <id> <supply>`"));
                    }
                    supply[node(fields[0])?] = num(fields[1])?;
                } else {
                    if fields.len() != 5 {
                        return Err(bad(line, "expected `a <from> <to> <low> <cap> <cost>`"));
                    }
                    if num(fields[2])? != 0.0 {
                        return Err(bad(line, "nonzero lower bounds are not supported"));
                    }
                    num(fields[3])?;
                    arcs.push((node(fields[0])?, node(fields[1])?, num(fields[4])?));
                }
            }
            Some(other) => return Err(bad(line, &format!("unknown descriptor {other:?}"))),
        }
    }
    let n = n_nodes.ok_or_else(|| Error::Parse("missing problem line".into()))?;
    let names: Vec<String> = (1..=n).map(|k| k.to_string()).collect();
    Ok(ProblemDocument {
        meta: None,
        arcs: arcs
            .into_iter()
            .map(|(x, y, c)| ArcDoc {
                from: names[x].clone(),
                to: names[y].clone(),
                g: ConnectionDoc::Affine {
                    slope: 1.0,
                    intercept: if c == 0.0 { 0.0 } else { -c },
                },
            })
            .collect(),
        q: names
            .iter()
            .zip(&supply)
            .filter(|(_, s)| **s != 0.0)
            .map(|(name, s)| (name.clone(), number(-s)))
            .collect(),
        nodes: names,
    })
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\\\""))
}

/// Graphviz rendering; arcs are labelled with their connection and, given
/// an outcome, with flow and rent.
pub fn export_dot(fp: &FlowProblem, outcome: Option<&EquilibriumOutcome>) -> String {
    let mut s = String::from("digraph eqflow {\n  rankdir=LR;\n");
    for (z, name) in fp.net.names().iter().enumerate() {
        let mut label = format!("{name}\\nq={}", fp.q[z]);
        if let Some(out) = outcome {
            let _ = write!(label, "\\np={}", out.p[z]);
        }
        let _ = writeln!(s, "  {} [label={}];", dot_id(name), dot_id(&label));
    }
    let rents = outcome.map(|out| fp.rents(&out.p));
    for (a, &(x, y)) in fp.net.arcs().iter().enumerate() {
        let mut label = fp.g[a].to_string();
        if let (Some(out), Some(r)) = (outcome, &rents) {
            let _ = write!(label, "\\nflow={} rent={}", out.mu[a], r[a]);
        }
        let _ = writeln!(
            s,
            "  {} -> {} [label={}];",
            dot_id(fp.net.name(x)),
            dot_id(fp.net.name(y)),
            dot_id(&label)
        );
    }
    s.push_str("}\n");
    s
}
