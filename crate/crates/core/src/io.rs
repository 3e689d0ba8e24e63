//! JSON instances and reports, CSV convergence tables.
//!
//! Output is canonical: object keys are sorted, arrays keep their order and
//! every float is written with 17 significant digits (C's `%.17g`), which
//! round-trips any `f64`. Identical values therefore give identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::Value;

use crate::approx::{conditional_mean_given_y, ApproximationResult};
use crate::barycenter::BarycenterResult;
use crate::decomposition::DecompositionReport;
use crate::error::{Error, Result};
use crate::measure::{Atom, ConditionedVariable, DiscreteMeasure, Vector, WeightedPoint};
use crate::ot::TransportResult;
use crate::verify::{all_passed, CheckResult, TOLERANCES};

/// Formats like C's `%.17g`.
pub fn format_g17(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let fixed = format!("{:.*}", (16 - exp) as usize, x);
        strip_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", strip_zeros(mantissa), sign, exp.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A JSON document built for canonical output.
#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(BTreeMap<String, Json>),
}

impl Json {
    pub fn obj<const N: usize>(fields: [(&str, Json); N]) -> Json {
        Json::Obj(fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    /// Adds a field to an object.
    pub fn with(mut self, key: &str, value: Json) -> Json {
        if let Json::Obj(fields) = &mut self {
            fields.insert(key.to_string(), value);
        }
        self
    }

    fn nums(values: &[f64]) -> Json {
        Json::Arr(values.iter().map(|&v| Json::Num(v)).collect())
    }

    /// Pretty-printed with two-space indentation and a trailing newline.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, depth: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => {
                let _ = write!(out, "{i}");
            }
            // JSON has no non-finite numbers.
            Json::Num(v) if !v.is_finite() => out.push_str("null"),
            Json::Num(v) => out.push_str(&format_g17(*v)),
            Json::Str(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
            Json::Arr(items) if items.is_empty() => out.push_str("[]"),
            // Arrays of scalars stay on one line.
            Json::Arr(items) if items.iter().all(Json::is_scalar) => {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    item.write(out, depth);
                }
                out.push(']');
            }
            Json::Arr(items) => {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    out.push_str(if k > 0 { ",\n" } else { "\n" });
                    indent(out, depth + 1);
                    item.write(out, depth + 1);
                }
                out.push('\n');
                indent(out, depth);
                out.push(']');
            }
            Json::Obj(fields) if fields.is_empty() => out.push_str("{}"),
            Json::Obj(fields) => {
                out.push('{');
                for (k, (key, value)) in fields.iter().enumerate() {
                    out.push_str(if k > 0 { ",\n" } else { "\n" });
                    indent(out, depth + 1);
                    out.push_str(&serde_json::to_string(key).expect("strings serialize"));
                    out.push_str(": ");
                    value.write(out, depth + 1);
                }
                out.push('\n');
                indent(out, depth);
                out.push('}');
            }
        }
    }

    fn is_scalar(&self) -> bool {
        !matches!(self, Json::Arr(_) | Json::Obj(_))
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn schema(msg: String) -> Error {
    Error::Input(format!("schema violation: {msg}"))
}

fn field<'a>(v: &'a Value, key: &str, ctx: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| schema(format!("{ctx}: missing field `{key}`")))
}

fn number(v: &Value, ctx: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| schema(format!("{ctx}: expected a number, found {v}")))
}

fn array<'a>(v: &'a Value, ctx: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| schema(format!("{ctx}: expected an array")))
}

fn dimension(v: &Value) -> Result<usize> {
    let d = field(v, "dimension", "document")?;
    d.as_u64()
        .filter(|&d| d >= 1)
        .map(|d| d as usize)
        .ok_or_else(|| schema(format!("document: `dimension` must be a positive integer, found {d}")))
}

fn points(v: &Value, ctx: &str) -> Result<Vec<WeightedPoint>> {
    array(field(v, "points", ctx)?, ctx)?
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let pctx = format!("{ctx}, point {k}");
            let x = array(field(p, "x", &pctx)?, &pctx)?
                .iter()
                .map(|c| number(c, &pctx))
                .collect::<Result<Vec<f64>>>()?;
            let w = number(field(p, "w", &pctx)?, &pctx)?;
            Ok(WeightedPoint::new(x, w))
        })
        .collect()
}

fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Input(format!("malformed JSON: {e}")))
}

/// Parses `{"dimension": m, "atoms": [{"id", "weight", "points": [{"x", "w"}]}]}`.
pub fn parse_instance(text: &str) -> Result<ConditionedVariable> {
    let doc = parse_json(text)?;
    let dim = dimension(&doc)?;
    let atoms = array(field(&doc, "atoms", "document")?, "atoms")?
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let id = field(a, "id", &format!("atom {k}"))?
                .as_str()
                .ok_or_else(|| schema(format!("atom {k}: `id` must be a string")))?
                .to_string();
            let ctx = format!("atom {k} (`{id}`)");
            let weight = number(field(a, "weight", &ctx)?, &ctx)?;
            let law = DiscreteMeasure::from_parts(dim, points(a, &ctx)?, &ctx)?.canonicalize()?;
            Ok(Atom { id, weight, law })
        })
        .collect::<Result<Vec<_>>>()?;
    ConditionedVariable::new(dim, atoms)
}

/// Parses `{"dimension": m, "points": [{"x", "w"}]}`.
pub fn parse_measure(text: &str) -> Result<DiscreteMeasure> {
    let doc = parse_json(text)?;
    let dim = dimension(&doc)?;
    DiscreteMeasure::from_parts(dim, points(&doc, "measure")?, "measure")?.canonicalize()
}

fn vector_json(v: &Vector) -> Json {
    Json::nums(v)
}

fn points_json(m: &DiscreteMeasure) -> Json {
    Json::Arr(m.points().iter().map(|p| Json::obj([("w", Json::Num(p.w)), ("x", vector_json(&p.x))])).collect())
}

pub fn measure_json(m: &DiscreteMeasure) -> Json {
    Json::obj([("dimension", Json::Int(m.dim() as i64)), ("points", points_json(m))])
}

pub fn instance_json(cv: &ConditionedVariable) -> Json {
    let atoms = cv
        .atoms()
        .iter()
        .map(|a| Json::obj([("id", Json::Str(a.id.clone())), ("points", points_json(&a.law)), ("weight", Json::Num(a.weight))]))
        .collect();
    Json::obj([("atoms", Json::Arr(atoms)), ("dimension", Json::Int(cv.dim() as i64))])
}

pub fn serialize_instance(cv: &ConditionedVariable) -> String {
    instance_json(cv).render()
}

/// Plan entries as `[i, j, mass]` triples.
pub fn ot_json(r: &TransportResult) -> Json {
    let c = &r.coupling;
    let plan =
        c.entries.iter().map(|e| Json::Arr(vec![Json::Int(e.i as i64), Json::Int(e.j as i64), Json::Num(e.mass)])).collect();
    Json::obj([
        ("cost", Json::Num(r.cost)),
        ("mu", measure_json(&c.source)),
        ("nu", measure_json(&c.target)),
        ("plan", Json::Arr(plan)),
    ])
}

pub fn barycenter_json(r: &BarycenterResult) -> Json {
    Json::obj([
        ("converged", Json::Bool(r.converged)),
        ("iterations", Json::Int(r.iterations as i64)),
        ("nu0", measure_json(&r.nu0)),
        ("objective", Json::Num(r.objective)),
    ])
}

pub fn approx_json(r: &ApproximationResult, emit_cells: bool) -> Json {
    let cond = conditional_mean_given_y(&r.refined)
        .into_iter()
        .map(|c| Json::obj([("deviation", Json::Num(c.deviation)), ("meanX", vector_json(&c.mean_x)), ("y", vector_json(&c.y))]))
        .collect();
    let out = Json::obj([
        ("barycenterConverged", Json::Bool(r.barycenter_converged)),
        ("barycenterIterations", Json::Int(r.barycenter_iterations as i64)),
        ("barycenterObjective", Json::Num(r.barycenter_objective)),
        ("meanNegPartXY", Json::Num(r.mean_neg_part_xy)),
        ("meanXY", Json::Num(r.mean_xy)),
        ("normResidualSq", Json::Num(r.norm_residual_sq)),
        ("normXSq", Json::Num(r.norm_x_sq)),
        ("normYSq", Json::Num(r.norm_y_sq)),
        ("nu0", measure_json(&r.nu0)),
        ("conditionalMeans", Json::Arr(cond)),
    ]);
    if !emit_cells {
        return out;
    }
    let atoms = r
            .refined
            .atoms
            .iter()
            .map(|a| {
                let cells = a
                    .cells
                    .iter()
                    .map(|c| Json::obj([("mass", Json::Num(c.mass)), ("x", vector_json(&c.x)), ("y", vector_json(&c.y))]))
                    .collect();
                Json::obj([("cells", Json::Arr(cells)), ("id", Json::Str(a.id.clone())), ("weight", Json::Num(a.weight))])
            })
            .collect();
    out.with("cells", Json::Arr(atoms))
}

pub fn decomposition_json(r: &DecompositionReport) -> Json {
    let terms = r
        .terms
        .iter()
        .enumerate()
        .map(|(k, t)| Json::obj([("n", Json::Int(k as i64 + 1)), ("normYSq", Json::Num(t.norm_y_sq)), ("nu0", measure_json(&t.nu0))]))
        .collect();
    Json::obj([
        ("compressionLoss", Json::nums(&r.compression_loss)),
        ("converged", Json::Bool(r.converged)),
        ("epsStop", Json::Num(r.eps_stop)),
        ("maxTelescopeSlack", Json::Num(crate::decomposition::telescope_check(r))),
        ("maxTerms", Json::Int(r.max_terms as i64)),
        ("normX1Sq", Json::Num(r.norm_x1_sq())),
        ("residualNormsSq", Json::nums(&r.residual_norms_sq)),
        ("telescopeSlack", Json::nums(&r.telescope_slack)),
        ("terms", Json::Arr(terms)),
    ])
}

pub fn checks_json(checks: &[CheckResult]) -> Json {
    Json::Arr(
        checks
            .iter()
            .map(|c| {
                Json::obj([
                    ("asserted", Json::Bool(c.asserted)),
                    ("detail", Json::Str(c.detail.clone())),
                    ("name", Json::Str(c.name.clone())),
                    ("passed", Json::Bool(c.passed)),
                    ("slack", Json::Num(c.slack)),
                    ("tag", c.tag.clone().map_or(Json::Null, Json::Str)),
                    ("tolerance", Json::Num(c.tolerance)),
                ])
            })
            .collect(),
    )
}

/// The verification ledger; `decomposition` is present for full runs.
pub fn verify_json(approximation: &[CheckResult], decomposition: Option<&[CheckResult]>) -> Json {
    let passed = all_passed(approximation) && decomposition.is_none_or(all_passed);
    let tolerances = Json::Obj(TOLERANCES.iter().map(|(n, t)| (n.to_string(), Json::Num(*t))).collect());
    Json::obj([
        ("allPassed", Json::Bool(passed)),
        ("approximation", checks_json(approximation)),
        ("decomposition", decomposition.map_or(Json::Null, checks_json)),
        ("tolerances", tolerances),
    ])
}

/// Fixed-width table of check results for terminals.
pub fn checks_table(checks: &[CheckResult]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(4).max(5);
    let mut out = format!("{:<width$}  {:<6}  {:>24}  {:>24}  tag\n", "check", "status", "slack", "tolerance");
    for c in checks {
        let status = match (c.passed, c.asserted) {
            (true, _) => "pass",
            (false, true) => "FAIL",
            (false, false) => "info",
        };
        let _ = writeln!(
            out,
            "{:<width$}  {:<6}  {:>24}  {:>24}  {}",
            c.name,
            status,
            format_g17(c.slack),
            format_g17(c.tolerance),
            c.tag.as_deref().unwrap_or("")
        );
    }
    out
}

pub const CSV_HEADER: &str = "n,normXnSq,normYnSq,cumSumYsq,telescopeSlack";

/// One row per term: ‖Xₙ‖², ‖Yₙ‖², Σ_(k≤n)‖Yₖ‖², telescoping slack.
pub fn emit_convergence_csv(r: &DecompositionReport) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for (k, cum) in r.cumulative_norms().into_iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            k + 1,
            format_g17(r.residual_norms_sq[k]),
            format_g17(r.terms[k].norm_y_sq),
            format_g17(cum),
            format_g17(r.telescope_slack[k])
        );
    }
    out
}
