//! The best approximation `Y` of `X` independent of the atoms.
//!
//! Each atom's law is coupled optimally to the barycenter ν₀. Splitting a
//! source point along its coupling row gives cells `(x, y, mass)`; on every
//! atom the `y`-marginal of the cells is ν₀, which is exactly independence of
//! `Y` from the σ-algebra. The auxiliary uniform variable that randomizes `Y`
//! given `X` in the continuous setting is never materialized: the mass split
//! carries the same information.

use rayon::prelude::*;

use crate::barycenter::{BarycenterMode, BarycenterProblem};
use crate::error::{Error, Result};
use crate::measure::{dot, Atom, ConditionedVariable, DiscreteMeasure, Vector, WeightedPoint, CENTER_TOL};
use crate::ot::Coupling;

pub const DEFAULT_MAX_CELLS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxOptions {
    /// Free-support barycenter size (m ≥ 2); defaults to the largest atom support.
    pub support_size: Option<usize>,
    pub seed: u64,
    /// Upper bound on refined cells per atom.
    pub max_cells: usize,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions { support_size: None, seed: 0, max_cells: DEFAULT_MAX_CELLS }
    }
}

/// One cell of the refined sample space.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub x: Vector,
    pub y: Vector,
    /// Conditional mass within the atom.
    pub mass: f64,
    /// Index of `x` in the atom law.
    pub source: usize,
    /// Index of `y` in ν₀.
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinedAtom {
    pub id: String,
    pub weight: f64,
    pub cells: Vec<Cell>,
}

/// The pair `(X, Y)` on the refined finite space.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedVariable {
    pub dim: usize,
    pub atoms: Vec<RefinedAtom>,
}

impl RefinedVariable {
    fn expect(&self, f: impl Fn(&Cell) -> f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight * a.cells.iter().map(|c| c.mass * f(c)).sum::<f64>())
            .sum()
    }

    /// Per-atom law of `Y`.
    pub fn y_marginal(&self, atom: usize) -> Result<DiscreteMeasure> {
        let cells = &self.atoms[atom].cells;
        let points = cells.iter().map(|c| WeightedPoint { x: c.y.clone(), w: c.mass }).collect();
        DiscreteMeasure::from_parts(self.dim, points, "y-marginal")?.canonicalize()
    }

    /// E[Y].
    pub fn mean_y(&self) -> Vector {
        let mut acc = vec![0.0; self.dim];
        for a in &self.atoms {
            for c in &a.cells {
                for (s, v) in acc.iter_mut().zip(c.y.iter()) {
                    *s += a.weight * c.mass * v;
                }
            }
        }
        Vector(acc)
    }
}

/// `E[X | Y = y_j]` for one support point of ν₀.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMean {
    pub y: Vector,
    pub mean_x: Vector,
    /// |E[X | Y = y] − y|.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationResult {
    pub refined: RefinedVariable,
    pub nu0: DiscreteMeasure,
    /// Optimal plan per atom, μₐ → ν₀.
    pub plans: Vec<Coupling>,
    pub barycenter_objective: f64,
    pub barycenter_converged: bool,
    pub barycenter_iterations: usize,
    /// ‖X‖².
    pub norm_x_sq: f64,
    /// ‖Y‖².
    pub norm_y_sq: f64,
    /// ‖X − Y‖².
    pub norm_residual_sq: f64,
    /// E[X·Y].
    pub mean_xy: f64,
    /// E[(X·Y)⁻].
    pub mean_neg_part_xy: f64,
}

/// Computes ν₀, the per-atom optimal couplings and the refined pair `(X, Y)`.
/// The input must be centered per atom.
pub fn best_approximation(cv: &ConditionedVariable, opts: &ApproxOptions) -> Result<ApproximationResult> {
    let (deviation, worst) = cv.max_conditional_mean();
    if deviation > CENTER_TOL {
        return Err(Error::NotCentered { atom: cv.atoms()[worst].id.clone(), deviation });
    }
    let mut problem = BarycenterProblem::from_variable(cv);
    problem.support_size = opts.support_size;
    problem.seed = opts.seed;
    if cv.dim() == 1 {
        problem.mode = BarycenterMode::Exact1d;
    }
    let bary = problem.solve()?;

    for (atom, plan) in cv.atoms().iter().zip(&bary.plans) {
        if plan.entries.len() > opts.max_cells {
            return Err(Error::SupportGrowth { atom: atom.id.clone(), cells: plan.entries.len(), limit: opts.max_cells });
        }
    }
    let atoms: Vec<RefinedAtom> = cv
        .atoms()
        .par_iter()
        .zip(&bary.plans)
        .map(|(atom, plan)| refine_atom(atom, plan))
        .collect();
    let refined = RefinedVariable { dim: cv.dim(), atoms };

    let norm_x_sq = cv.norm_l2_sq();
    let norm_y_sq = refined.expect(|c| c.y.norm_sq());
    let norm_residual_sq = refined.expect(|c| c.x.dist_sq(&c.y));
    let mean_xy = refined.expect(|c| c.x.dot(&c.y));
    let mean_neg_part_xy = refined.expect(|c| (-dot(&c.x, &c.y)).max(0.0));

    Ok(ApproximationResult {
        refined,
        nu0: bary.nu0,
        plans: bary.plans,
        barycenter_objective: bary.objective,
        barycenter_converged: bary.converged,
        barycenter_iterations: bary.iterations,
        norm_x_sq,
        norm_y_sq,
        norm_residual_sq,
        mean_xy,
        mean_neg_part_xy,
    })
}

fn refine_atom(atom: &Atom, plan: &Coupling) -> RefinedAtom {
    let cells = plan
        .entries
        .iter()
        .map(|e| Cell {
            x: plan.source_point(e).clone(),
            y: plan.target_point(e).clone(),
            mass: e.mass,
            source: e.i,
            target: e.j,
        })
        .collect();
    RefinedAtom { id: atom.id.clone(), weight: atom.weight, cells }
}

/// The law of `X − Y` on each atom, canonicalized.
pub fn residual(r: &RefinedVariable) -> Result<ConditionedVariable> {
    residual_with_maps(r).map(|(cv, _)| cv)
}

/// [`residual`] plus, per atom, the index each cell's residual value took in
/// the canonical residual law (`None` when pruned).
pub(crate) fn residual_with_maps(r: &RefinedVariable) -> Result<(ConditionedVariable, Vec<Vec<Option<usize>>>)> {
    let mut atoms = Vec::with_capacity(r.atoms.len());
    let mut maps = Vec::with_capacity(r.atoms.len());
    for a in &r.atoms {
        let points = a.cells.iter().map(|c| WeightedPoint { x: c.x.sub(&c.y), w: c.mass }).collect();
        let raw = DiscreteMeasure::from_parts(r.dim, points, &format!("residual of atom `{}`", a.id))?;
        let (law, map) = raw.canonicalize_with_map()?;
        atoms.push(Atom { id: a.id.clone(), weight: a.weight, law });
        maps.push(map);
    }
    Ok((ConditionedVariable::from_canonical(r.dim, atoms)?, maps))
}

/// `E[X | Y = y_j]` for every support point of ν₀, in ν₀ order.
pub fn conditional_mean_given_y(r: &RefinedVariable) -> Vec<ConditionalMean> {
    let targets = r.atoms.iter().flat_map(|a| a.cells.iter().map(|c| c.target + 1)).max().unwrap_or(0);
    let mut ys: Vec<Option<Vector>> = vec![None; targets];
    let mut num = vec![vec![0.0; r.dim]; targets];
    let mut den = vec![0.0; targets];
    for a in &r.atoms {
        for c in &a.cells {
            let m = a.weight * c.mass;
            den[c.target] += m;
            for (s, v) in num[c.target].iter_mut().zip(c.x.iter()) {
                *s += m * v;
            }
            ys[c.target].get_or_insert_with(|| c.y.clone());
        }
    }
    ys.into_iter()
        .zip(num)
        .zip(den)
        .filter_map(|((y, s), d)| {
            let y = y?;
            let mean_x = Vector(s.into_iter().map(|v| v / d).collect());
            let deviation = mean_x.sub(&y).norm();
            Some(ConditionalMean { y, mean_x, deviation })
        })
        .collect()
}

/// Largest total-variation distance between an atom's `Y`-law and ν₀.
pub fn independence_defect(r: &RefinedVariable, nu0: &DiscreteMeasure) -> Result<f64> {
    (0..r.atoms.len()).try_fold(0.0f64, |acc, k| Ok(acc.max(r.y_marginal(k)?.tv_distance(nu0))))
}
