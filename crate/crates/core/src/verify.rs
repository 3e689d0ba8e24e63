//! Named checks of the identities and inequalities satisfied by a best
//! independent approximation and by a decomposition.
//!
//! Every check reports a signed slack (positive means satisfied) and passes
//! when `slack ≥ −tolerance`. Checks that are only reported, not asserted,
//! carry a tag explaining why; they never make a run fail.

use crate::approx::{conditional_mean_given_y, independence_defect, ApproximationResult};
use crate::decomposition::DecompositionReport;
use crate::measure::ConditionedVariable;
use crate::ot::{min_monotone_product, scalar_product_stats};

/// Base tolerance of every check. Entries marked "× ‖X‖²" (or similar) are
/// scaled by that quantity before use.
pub mod tolerance {
    /// × ‖X‖².
    pub const PYTHAGORAS: f64 = 1e-8;
    pub const CONDITIONAL_MEAN_Y: f64 = 1e-8;
    pub const MEAN_NU_ZERO: f64 = 1e-9;
    /// × ‖Y‖².
    pub const INNER_PRODUCT_EQUALS_NORM_Y: f64 = 1e-8;
    pub const NEG_PART_BOUND: f64 = 1e-9;
    pub const POINTWISE_NEG_PART_BOUND: f64 = 1e-9;
    pub const ATOM_NEG_PART_BOUND: f64 = 1e-9;
    pub const LOWER_BOUND_HALF_2M: f64 = 1e-9;
    pub const QUARTER_BOUND_1D: f64 = 1e-9;
    pub const MONOTONE_SUPPORT: f64 = 1e-9;
    pub const INDEPENDENCE_MARGINAL: f64 = 1e-10;
    pub const RESIDUAL_CENTERED: f64 = 1e-9;
    /// × ‖X₁‖².
    pub const RESIDUAL_DECAY: f64 = 1e-12;
    /// × ‖X₁‖².
    pub const PREFIX_BOUND: f64 = 1e-9;
    /// × ‖X₁‖².
    pub const TELESCOPE: f64 = 1e-7;
    pub const RECONSTRUCTION: f64 = 1e-8;
}

/// Check names with their base tolerances, in name order.
pub const TOLERANCES: &[(&str, f64)] = &[
    ("atomNegPartBound", tolerance::ATOM_NEG_PART_BOUND),
    ("conditionalMeanY", tolerance::CONDITIONAL_MEAN_Y),
    ("converged", 0.0),
    ("convergenceFlag", 0.0),
    ("independenceMarginal", tolerance::INDEPENDENCE_MARGINAL),
    ("innerProductEqualsNormY", tolerance::INNER_PRODUCT_EQUALS_NORM_Y),
    ("lowerBoundHalf2m", tolerance::LOWER_BOUND_HALF_2M),
    ("meanNuZero", tolerance::MEAN_NU_ZERO),
    ("monotoneSupport", tolerance::MONOTONE_SUPPORT),
    ("negPartBound", tolerance::NEG_PART_BOUND),
    ("pointwiseNegPartBound", tolerance::POINTWISE_NEG_PART_BOUND),
    ("prefixBound", tolerance::PREFIX_BOUND),
    ("pythagoras", tolerance::PYTHAGORAS),
    ("quarterBound1d", tolerance::QUARTER_BOUND_1D),
    ("reconstruction", tolerance::RECONSTRUCTION),
    ("residualCentered", tolerance::RESIDUAL_CENTERED),
    ("residualDecay", tolerance::RESIDUAL_DECAY),
    ("telescope", tolerance::TELESCOPE),
];

/// Tag for checks whose proof needs the global barycenter, which the
/// free-support solver does not certify in dimension ≥ 2.
pub const GLOBAL_OPTIMUM_REQUIRED: &str = "global-optimum-required";
/// Tag for the quarter bound in dimension ≥ 2, where it is only conjectural.
pub const OPEN_QUESTION: &str = "open-question";
/// Tag for a decomposition stopped by the term cap.
pub const TRUNCATION_ALLOWED: &str = "truncation-allowed";

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Signed margin; positive means satisfied.
    pub slack: f64,
    /// Effective (scaled) tolerance.
    pub tolerance: f64,
    /// Whether a failure counts as a violation.
    pub asserted: bool,
    pub tag: Option<String>,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, slack: f64, tolerance: f64, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            passed: slack >= -tolerance,
            slack,
            tolerance,
            asserted: true,
            tag: None,
            detail,
        }
    }

    fn informational(mut self, tag: &str) -> Self {
        self.asserted = false;
        self.tag = Some(tag.to_string());
        self
    }

    /// True unless this is an asserted check that failed.
    pub fn ok(&self) -> bool {
        self.passed || !self.asserted
    }
}

/// True when every asserted check passed.
pub fn all_passed(checks: &[CheckResult]) -> bool {
    checks.iter().all(CheckResult::ok)
}

fn sorted(mut checks: Vec<CheckResult>) -> Vec<CheckResult> {
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    checks
}

/// Runs every approximation check. `result` must come from `cv`.
pub fn verify_approximation(cv: &ConditionedVariable, result: &ApproximationResult) -> Vec<CheckResult> {
    let m = cv.dim();
    let mut out = Vec::new();

    let defect = result.norm_x_sq - result.norm_residual_sq - result.norm_y_sq;
    out.push(CheckResult::new(
        "pythagoras",
        -defect.abs(),
        tolerance::PYTHAGORAS * result.norm_x_sq,
        format!("‖X‖² − ‖X−Y‖² − ‖Y‖² = {defect:e}"),
    ));

    let cond = conditional_mean_given_y(&result.refined);
    let worst = cond.iter().map(|c| c.deviation).fold(0.0, f64::max);
    out.push(CheckResult::new(
        "conditionalMeanY",
        -worst,
        tolerance::CONDITIONAL_MEAN_Y,
        format!("max |E[X|Y=y] − y| = {worst:e} over {} support points", cond.len()),
    ));

    let mean = result.nu0.mean().max_abs();
    out.push(CheckResult::new("meanNuZero", -mean, tolerance::MEAN_NU_ZERO, format!("max |∫y dν₀| = {mean:e}")));

    let gap = result.mean_xy - result.norm_y_sq;
    let scale = result.norm_y_sq.max(1e-8 * result.norm_x_sq);
    out.push(CheckResult::new(
        "innerProductEqualsNormY",
        -gap.abs(),
        tolerance::INNER_PRODUCT_EQUALS_NORM_Y * scale,
        format!("E[X·Y] − ‖Y‖² = {gap:e}"),
    ));

    out.push(CheckResult::new(
        "negPartBound",
        result.mean_xy - result.mean_neg_part_xy,
        tolerance::NEG_PART_BOUND,
        format!("E[X·Y] = {:e}, E[(X·Y)⁻] = {:e}", result.mean_xy, result.mean_neg_part_xy),
    ));

    let stats: Vec<_> = result.plans.iter().map(scalar_product_stats).collect();
    let pointwise = stats
        .iter()
        .map(|s| s.mean_xy - (-s.min_support_xy).max(0.0))
        .fold(f64::INFINITY, f64::min);
    out.push(CheckResult::new(
        "pointwiseNegPartBound",
        pointwise,
        tolerance::POINTWISE_NEG_PART_BOUND,
        "min over atoms of ∫x·y dκ − max (x·y)⁻ on the support".to_string(),
    ));
    let per_atom = stats.iter().map(|s| s.mean_xy - s.mean_neg_part).fold(f64::INFINITY, f64::min);
    out.push(CheckResult::new(
        "atomNegPartBound",
        per_atom,
        tolerance::ATOM_NEG_PART_BOUND,
        "min over atoms of ∫x·y dκ − ∫(x·y)⁻ dκ".to_string(),
    ));

    let norm_y = result.norm_y_sq.max(0.0).sqrt();
    let bound = cv.norm_l1() / (2.0 * m as f64);
    let lower = CheckResult::new(
        "lowerBoundHalf2m",
        norm_y - bound,
        tolerance::LOWER_BOUND_HALF_2M,
        format!("‖Y‖ = {norm_y:e}, ‖X‖₁/(2m) = {bound:e}"),
    );
    out.push(if m == 1 { lower } else { lower.informational(GLOBAL_OPTIMUM_REQUIRED) });

    let nu_abs = result.nu0.first_abs_moment();
    let quarter = cv
        .atoms()
        .iter()
        .zip(&stats)
        .map(|(a, s)| 0.25 * a.law.first_abs_moment() * nu_abs - s.mean_neg_part)
        .fold(f64::INFINITY, f64::min);
    let quarter = CheckResult::new(
        "quarterBound1d",
        quarter,
        tolerance::QUARTER_BOUND_1D,
        "min over atoms of ¼E|x|E|y| + ∫_{x·y<0} x·y dκ".to_string(),
    );
    out.push(if m == 1 { quarter } else { quarter.informational(OPEN_QUESTION) });

    let monotone = result.plans.iter().map(min_monotone_product).fold(0.0, f64::min);
    out.push(CheckResult::new(
        "monotoneSupport",
        monotone,
        tolerance::MONOTONE_SUPPORT,
        format!("min (x₁−x₂)·(y₁−y₂) over support pairs = {monotone:e}"),
    ));

    let (tv, detail) = match independence_defect(&result.refined, &result.nu0) {
        Ok(tv) => (tv, format!("max TV(law of Y on atom, ν₀) = {tv:e}")),
        Err(e) => (f64::INFINITY, format!("could not form the Y marginals: {e}")),
    };
    out.push(CheckResult::new("independenceMarginal", -tv, tolerance::INDEPENDENCE_MARGINAL, detail));

    let centered = result
        .refined
        .atoms
        .iter()
        .map(|a| {
            let mut s = vec![0.0; m];
            for c in &a.cells {
                for (k, (x, y)) in c.x.iter().zip(c.y.iter()).enumerate() {
                    s[k] += c.mass * (x - y);
                }
            }
            s.into_iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
        })
        .fold(0.0, f64::max);
    out.push(CheckResult::new(
        "residualCentered",
        -centered,
        tolerance::RESIDUAL_CENTERED,
        format!("max |E[X−Y | atom]| = {centered:e}"),
    ));

    sorted(out)
}

/// Runs every decomposition check.
pub fn verify_decomposition(report: &DecompositionReport) -> Vec<CheckResult> {
    let norms = &report.residual_norms_sq;
    let n1 = report.norm_x1_sq();
    let mut out = Vec::new();

    let decay = norms.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    let decay = if decay.is_finite() { decay } else { 0.0 };
    out.push(CheckResult::new(
        "residualDecay",
        decay,
        tolerance::RESIDUAL_DECAY * n1,
        format!("min ‖Xₙ‖² − ‖Xₙ₊₁‖² = {decay:e}"),
    ));

    let prefix = report.cumulative_norms().last().copied().unwrap_or(0.0);
    out.push(CheckResult::new(
        "prefixBound",
        n1 - prefix,
        tolerance::PREFIX_BOUND * n1,
        format!("‖X₁‖² − Σ‖Yₖ‖² = {:e}", n1 - prefix),
    ));

    // Recomputed from the norms so that a tampered report is caught.
    let mut acc = 0.0;
    let mut telescope = 0.0f64;
    for (k, t) in report.terms.iter().enumerate() {
        acc += t.norm_y_sq;
        telescope = telescope.max((n1 - acc - norms[k + 1]).abs());
    }
    out.push(CheckResult::new(
        "telescope",
        -telescope,
        tolerance::TELESCOPE * n1,
        format!("max |‖X₁‖² − Σ_(k≤n)‖Yₖ‖² − ‖Xₙ₊₁‖²| = {telescope:e}"),
    ));

    let last = norms.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    let target = report.eps_stop * n1.max(0.0).sqrt();
    let reached = last <= target;
    out.push(CheckResult::new(
        "convergenceFlag",
        if reached == report.converged { 0.0 } else { -1.0 },
        0.0,
        format!("flag {} with ‖Xₙ₊₁‖ = {last:e}, threshold {target:e}", report.converged),
    ));
    out.push(
        CheckResult::new(
            "converged",
            target - last,
            0.0,
            format!("{} terms of at most {}", report.terms.len(), report.max_terms),
        )
        .informational(TRUNCATION_ALLOWED),
    );

    if let Some(joint) = &report.joint {
        let (dist, detail) = match joint.reconstruction_distance() {
            Ok(d) => (d, format!("max per-atom W₂(law of ΣYₖ + Xₙ₊₁, law of X₁) = {d:e}")),
            Err(e) => (f64::INFINITY, format!("reconstruction failed: {e}")),
        };
        out.push(CheckResult::new("reconstruction", -dist, tolerance::RECONSTRUCTION, detail));
    }

    sorted(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::{best_approximation, ApproxOptions};
    use crate::decomposition::{decompose, DecompositionOptions};
    use crate::generate::{generate, GeneratorKind, GeneratorSpec};
    use crate::measure::{Atom, DiscreteMeasure, WeightedPoint};
    use crate::ot::PlanEntry;

    fn two_scales() -> ConditionedVariable {
        generate(&GeneratorSpec { kind: GeneratorKind::ScaledSign, dim: 1, atoms: 2, points: 2, seed: 0 }).unwrap()
    }

    fn find<'a>(checks: &'a [CheckResult], name: &str) -> &'a CheckResult {
        checks.iter().find(|c| c.name == name).unwrap()
    }

    #[test]
    fn two_scales_approximation_passes_everything() {
        let cv = two_scales();
        let r = best_approximation(&cv, &ApproxOptions::default()).unwrap();
        let checks = verify_approximation(&cv, &r);
        assert!(checks.iter().all(|c| c.passed && c.asserted), "{checks:#?}");
        assert!((find(&checks, "lowerBoundHalf2m").slack - 0.75).abs() < 1e-12);
        let names: Vec<&str> = checks.iter().map(|c| c.name.as_str()).collect();
        let mut expected = names.clone();
        expected.sort();
        assert_eq!(names, expected);
    }

    #[test]
    fn every_check_name_has_a_tolerance() {
        let cv = two_scales();
        let r = best_approximation(&cv, &ApproxOptions::default()).unwrap();
        let report = decompose(&cv, &DecompositionOptions::default()).unwrap();
        for c in verify_approximation(&cv, &r).iter().chain(&verify_decomposition(&report)) {
            assert!(TOLERANCES.iter().any(|(n, _)| *n == c.name), "{}", c.name);
        }
        assert!(TOLERANCES.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn independent_input_has_zero_residual_slacks() {
        let law = DiscreteMeasure::new(
            1,
            vec![WeightedPoint::new(vec![-1.0], 0.25), WeightedPoint::new(vec![0.0], 0.5), WeightedPoint::new(vec![1.0], 0.25)],
        )
        .unwrap();
        let cv = ConditionedVariable::new(
            1,
            vec![Atom { id: "a".into(), weight: 0.3, law: law.clone() }, Atom { id: "b".into(), weight: 0.7, law }],
        )
        .unwrap();
        let r = best_approximation(&cv, &ApproxOptions::default()).unwrap();
        let checks = verify_approximation(&cv, &r);
        assert!(all_passed(&checks));
        for name in ["pythagoras", "conditionalMeanY", "independenceMarginal", "residualCentered"] {
            assert!(find(&checks, name).slack.abs() < 1e-15, "{name}");
        }
    }

    #[test]
    fn swapped_plan_fails_monotone_support() {
        let cv = two_scales();
        let mut r = best_approximation(&cv, &ApproxOptions::default()).unwrap();
        r.plans[0].entries = vec![PlanEntry { i: 0, j: 1, mass: 0.5 }, PlanEntry { i: 1, j: 0, mass: 0.5 }];
        let checks = verify_approximation(&cv, &r);
        let c = find(&checks, "monotoneSupport");
        assert!(!c.passed);
        assert_eq!(c.slack, -6.0);
        assert!(!all_passed(&checks));
    }

    #[test]
    fn dimension_two_downgrades_global_checks() {
        let cv = generate(&GeneratorSpec { kind: GeneratorKind::Cross, dim: 2, atoms: 2, points: 2, seed: 0 }).unwrap();
        let r = best_approximation(&cv, &ApproxOptions { support_size: Some(2), ..Default::default() }).unwrap();
        let checks = verify_approximation(&cv, &r);
        let lower = find(&checks, "lowerBoundHalf2m");
        assert!(!lower.asserted);
        assert_eq!(lower.tag.as_deref(), Some(GLOBAL_OPTIMUM_REQUIRED));
        assert_eq!(find(&checks, "quarterBound1d").tag.as_deref(), Some(OPEN_QUESTION));
        assert!(all_passed(&checks), "{checks:#?}");
    }

    #[test]
    fn verification_is_pure() {
        let cv = two_scales();
        let r = best_approximation(&cv, &ApproxOptions::default()).unwrap();
        assert_eq!(verify_approximation(&cv, &r), verify_approximation(&cv, &r));
    }

    #[test]
    fn two_scales_decomposition_passes() {
        let report = decompose(&two_scales(), &DecompositionOptions::default()).unwrap();
        let checks = verify_decomposition(&report);
        assert!(checks.iter().all(|c| c.passed), "{checks:#?}");
        assert!(checks.iter().any(|c| c.name == "reconstruction"));
    }

    #[test]
    fn truncated_run_reports_without_failing() {
        let opts = DecompositionOptions { max_terms: 1, ..Default::default() };
        let report = decompose(&two_scales(), &opts).unwrap();
        assert!(!report.converged);
        let checks = verify_decomposition(&report);
        assert!(find(&checks, "residualDecay").passed);
        assert!(find(&checks, "telescope").passed);
        let conv = find(&checks, "converged");
        assert!(!conv.passed && !conv.asserted);
        assert!(all_passed(&checks));
    }

    #[test]
    fn inflated_term_fails_telescope() {
        let mut report = decompose(&two_scales(), &DecompositionOptions::default()).unwrap();
        report.terms[0].norm_y_sq += 1e-3;
        let checks = verify_decomposition(&report);
        assert!(!find(&checks, "telescope").passed);
        assert!(!all_passed(&checks));
    }
}
