//! Iterated best approximation: `X₁ = X`, `Yₙ` the best independent
//! approximation of `Xₙ`, `Xₙ₊₁ = Xₙ − Yₙ`, so that
//! `X₁ = Y₁ + … + Yₙ + Xₙ₊₁` and `‖X₁‖² = Σ‖Yₖ‖² + ‖Xₙ₊₁‖²`.

use crate::approx::{best_approximation, residual_with_maps, ApproxOptions, ApproximationResult};
use crate::compress::compress;
use crate::error::{Error, Result};
use crate::measure::{Atom, ConditionedVariable, DiscreteMeasure, Vector, WeightedPoint};
use crate::ot::solve_w2;

/// Joint cells across steps are kept only while their total count stays
/// within this bound.
pub const DEFAULT_JOINT_CELL_LIMIT: usize = 10_000;
/// Residual supports larger than this are compressed.
pub const DEFAULT_COMPRESS_ABOVE: usize = 512;
/// Per-step compression loss allowed, relative to ‖X₁‖².
pub const DEFAULT_COMPRESSION_BUDGET: f64 = 5e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionOptions {
    /// Stop once ‖Xₙ₊₁‖ ≤ eps_stop · ‖X₁‖.
    pub eps_stop: f64,
    pub max_terms: usize,
    pub approx: ApproxOptions,
    pub joint_cell_limit: usize,
    /// Keep every step's [`ApproximationResult`] in the report.
    pub retain_steps: bool,
    /// Compress residual atom laws with more points than this (see
    /// [`crate::compress`]); `None` keeps the recursion exact.
    pub compress_above: Option<usize>,
    /// Largest second-moment loss per step from compression, relative to ‖X₁‖².
    pub compression_budget: f64,
}

impl Default for DecompositionOptions {
    fn default() -> Self {
        DecompositionOptions {
            eps_stop: 1e-6,
            max_terms: 100,
            approx: ApproxOptions::default(),
            joint_cell_limit: DEFAULT_JOINT_CELL_LIMIT,
            retain_steps: false,
            compress_above: Some(DEFAULT_COMPRESS_ABOVE),
            compression_budget: DEFAULT_COMPRESSION_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    /// Law of `Yₖ`.
    pub nu0: DiscreteMeasure,
    /// ‖Yₖ‖².
    pub norm_y_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub terms: Vec<Term>,
    /// ‖Xₙ‖² for n = 1..=N+1.
    pub residual_norms_sq: Vec<f64>,
    /// |‖X₁‖² − Σ_{k≤n}‖Yₖ‖² − ‖Xₙ₊₁‖²| for n = 1..=N.
    pub telescope_slack: Vec<f64>,
    /// ‖·‖² removed by support compression after each step (zero when exact).
    pub compression_loss: Vec<f64>,
    pub converged: bool,
    pub eps_stop: f64,
    pub max_terms: usize,
    pub final_residual: ConditionedVariable,
    pub steps: Vec<ApproximationResult>,
    pub joint: Option<JointRefinement>,
}

impl DecompositionReport {
    pub fn norm_x1_sq(&self) -> f64 {
        self.residual_norms_sq[0]
    }

    /// Σ_{k≤n} ‖Yₖ‖² for every prefix.
    pub fn cumulative_norms(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.terms
            .iter()
            .map(|t| {
                acc += t.norm_y_sq;
                acc
            })
            .collect()
    }
}

/// Largest telescoping-identity slack over all prefixes.
pub fn telescope_check(report: &DecompositionReport) -> f64 {
    report.telescope_slack.iter().copied().fold(0.0, f64::max)
}

/// One path through every step: the original value, the running sum of the
/// `Yₖ` it received and its index in the current residual law.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCell {
    pub x1: Vector,
    pub partial_sum: Vector,
    pub residual_point: usize,
    pub mass: f64,
}

/// The joint refinement of `(X₁, Y₁, …, Yₙ, Xₙ₊₁)` per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct JointRefinement {
    pub original: ConditionedVariable,
    pub residual: ConditionedVariable,
    pub cells: Vec<Vec<JointCell>>,
}

impl JointRefinement {
    fn start(cv: &ConditionedVariable) -> Self {
        let cells = cv
            .atoms()
            .iter()
            .map(|a| {
                a.law
                    .points()
                    .iter()
                    .enumerate()
                    .map(|(k, p)| JointCell {
                        x1: p.x.clone(),
                        partial_sum: Vector::zeros(cv.dim()),
                        residual_point: k,
                        mass: p.w,
                    })
                    .collect()
            })
            .collect();
        JointRefinement { original: cv.clone(), residual: cv.clone(), cells }
    }

    pub fn total_cells(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    /// Splits every path along this step's couplings.
    fn advance(&mut self, step: &ApproximationResult, next: &ConditionedVariable, maps: &[Vec<Option<usize>>]) {
        for (((cells, plan), map), atom) in self.cells.iter_mut().zip(&step.plans).zip(maps).zip(self.residual.atoms()) {
            let mut by_source: Vec<Vec<usize>> = vec![Vec::new(); atom.law.len()];
            for (c, e) in plan.entries.iter().enumerate() {
                by_source[e.i].push(c);
            }
            let mut split = Vec::with_capacity(cells.len());
            for cell in cells.iter() {
                let source_mass = atom.law.points()[cell.residual_point].w;
                for &c in &by_source[cell.residual_point] {
                    let e = plan.entries[c];
                    let Some(point) = map[c] else { continue };
                    let y = plan.target_point(&e);
                    split.push(JointCell {
                        x1: cell.x1.clone(),
                        partial_sum: Vector(cell.partial_sum.iter().zip(y.iter()).map(|(s, v)| s + v).collect()),
                        residual_point: point,
                        mass: cell.mass * e.mass / source_mass,
                    });
                }
            }
            *cells = split;
        }
        self.residual = next.clone();
    }

    /// Largest pathwise |X₁ − (Σ Yₖ + Xₙ₊₁)| over all cells.
    pub fn pathwise_defect(&self) -> f64 {
        self.cells
            .iter()
            .zip(self.residual.atoms())
            .flat_map(|(cells, atom)| {
                cells.iter().map(move |c| {
                    let r = &atom.law.points()[c.residual_point].x;
                    c.x1.iter()
                        .zip(c.partial_sum.iter().zip(r.iter()))
                        .map(|(x, (s, r))| (x - s - r).abs())
                        .fold(0.0, f64::max)
                })
            })
            .fold(0.0, f64::max)
    }

    /// Largest per-atom W₂ distance between the law of Σ Yₖ + Xₙ₊₁ and the
    /// law of X₁.
    pub fn reconstruction_distance(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for ((cells, atom), orig) in self.cells.iter().zip(self.residual.atoms()).zip(self.original.atoms()) {
            let points = cells
                .iter()
                .map(|c| {
                    let r = &atom.law.points()[c.residual_point].x;
                    WeightedPoint {
                        x: Vector(c.partial_sum.iter().zip(r.iter()).map(|(s, r)| s + r).collect()),
                        w: c.mass,
                    }
                })
                .collect();
            let rebuilt = DiscreteMeasure::from_parts(self.original.dim(), points, "reconstruction")?.canonicalize()?;
            worst = worst.max(solve_w2(&rebuilt, &orig.law)?.cost.max(0.0).sqrt());
        }
        Ok(worst)
    }
}

/// Compresses oversized atom laws; `budget` bounds the weighted loss.
fn compress_residual(
    cv: ConditionedVariable,
    maps: &mut [Vec<Option<usize>>],
    limit: usize,
    budget: f64,
) -> Result<(ConditionedVariable, f64)> {
    if cv.atoms().iter().all(|a| a.law.len() <= limit) {
        return Ok((cv, 0.0));
    }
    let mut loss = 0.0;
    let mut atoms = Vec::with_capacity(cv.atoms().len());
    for (atom, map) in cv.atoms().iter().zip(maps.iter_mut()) {
        // Atom weights sum to one, so per-atom budgets keep the total in budget.
        let c = compress(&atom.law, limit, budget)?;
        loss += atom.weight * c.loss;
        for slot in map.iter_mut() {
            *slot = slot.map(|k| c.map[k]);
        }
        atoms.push(Atom { id: atom.id.clone(), weight: atom.weight, law: c.law });
    }
    Ok((ConditionedVariable::from_canonical(cv.dim(), atoms)?, loss))
}

/// Runs the recursion until ‖Xₙ₊₁‖ ≤ eps_stop·‖X₁‖ or `max_terms` terms.
pub fn decompose(cv: &ConditionedVariable, opts: &DecompositionOptions) -> Result<DecompositionReport> {
    if !(opts.eps_stop > 0.0) {
        return Err(Error::Input(format!("eps_stop must be positive, got {}", opts.eps_stop)));
    }
    if opts.max_terms < 1 {
        return Err(Error::Input("max_terms must be at least 1".into()));
    }
    let norm1 = cv.norm_l2_sq();
    let threshold = opts.eps_stop * norm1.sqrt();
    let mut report = DecompositionReport {
        terms: Vec::new(),
        residual_norms_sq: vec![norm1],
        telescope_slack: Vec::new(),
        compression_loss: Vec::new(),
        converged: norm1 == 0.0,
        eps_stop: opts.eps_stop,
        max_terms: opts.max_terms,
        final_residual: cv.clone(),
        steps: Vec::new(),
        joint: None,
    };
    if report.converged {
        report.joint = Some(JointRefinement::start(cv));
        return Ok(report);
    }

    let mut joint = Some(JointRefinement::start(cv)).filter(|j| j.total_cells() <= opts.joint_cell_limit);
    let mut current = cv.clone();
    let mut cumulative = 0.0;
    for _ in 0..opts.max_terms {
        let step = best_approximation(&current, &opts.approx)?;
        let (exact, mut maps) = residual_with_maps(&step.refined)?;
        let (next, loss) = match opts.compress_above {
            Some(limit) => compress_residual(exact, &mut maps, limit, opts.compression_budget * norm1)?,
            None => (exact, 0.0),
        };
        let norm_next = next.norm_l2_sq();
        cumulative += step.norm_y_sq;
        report.terms.push(Term { nu0: step.nu0.clone(), norm_y_sq: step.norm_y_sq });
        report.residual_norms_sq.push(norm_next);
        report.telescope_slack.push((norm1 - cumulative - norm_next).abs());
        report.compression_loss.push(loss);

        // The joint paths are only exact while nothing has been compressed.
        if loss > 0.0 {
            joint = None;
        }
        if let Some(j) = joint.as_mut() {
            j.advance(&step, &next, &maps);
        }
        joint = joint.filter(|j| j.total_cells() <= opts.joint_cell_limit);
        if opts.retain_steps {
            report.steps.push(step);
        }
        current = next;
        if norm_next.sqrt() <= threshold {
            report.converged = true;
            break;
        }
    }
    report.final_residual = current;
    report.joint = joint;
    Ok(report)
}
