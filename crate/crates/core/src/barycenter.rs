//! Wasserstein-2 barycenters of the per-atom conditional laws.
//!
//! ν₀ minimizes `Σₐ weightₐ · W²(μₐ, ν)`. On the line the minimizer is the
//! quantile average of the atom laws and is computed exactly. In higher
//! dimension an alternating scheme with a fixed number of uniform-mass support
//! points is used: solve every atom's transport to the current support, then
//! move each support point to the barycenter of the mass it receives.

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generate::SeededRng;
use crate::measure::{dist_sq, ConditionedVariable, DiscreteMeasure, Vector, WeightedPoint, MASS_SUM_TOL};
use crate::ot::{solve_w2, solve_w2_1d, Coupling, PlanEntry, PLAN_EPS};

pub const MAX_ITERATIONS: usize = 500;
/// Relative objective decrease below which the alternating scheme may stop.
pub const DECREASE_TOL: f64 = 1e-10;
/// Support displacement (relative to the support radius) certifying an exact
/// fixed point of the barycentric update.
pub const FIXED_POINT_TOL: f64 = 1e-12;
/// Looser displacement bound accepted once the objective has stalled.
pub const STALLED_FIXED_POINT_TOL: f64 = 1e-9;
/// Cumulative-mass breakpoints closer than this share one grid cell.
const GRID_EPS: f64 = 1e-15;

/// One conditional law with its atom weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLaw {
    pub weight: f64,
    pub law: DiscreteMeasure,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BarycenterMode {
    /// Quantile averaging; one dimension only.
    Exact1d,
    /// Alternating minimization with `support_size` points of mass 1/N.
    FreeSupport,
    /// Optimal masses on a frozen support.
    FixedSupport(Vec<Vector>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterProblem {
    pub atoms: Vec<WeightedLaw>,
    /// Number of free support points; defaults to the largest atom support.
    pub support_size: Option<usize>,
    pub seed: u64,
    pub mode: BarycenterMode,
}

impl BarycenterProblem {
    /// Exact mode for m = 1, free support otherwise.
    pub fn from_variable(cv: &ConditionedVariable) -> Self {
        let atoms = cv.atoms().iter().map(|a| WeightedLaw { weight: a.weight, law: a.law.clone() }).collect();
        let mode = if cv.dim() == 1 { BarycenterMode::Exact1d } else { BarycenterMode::FreeSupport };
        BarycenterProblem { atoms, support_size: None, seed: 0, mode }
    }

    pub fn default_support_size(&self) -> usize {
        self.atoms.iter().map(|a| a.law.len()).max().unwrap_or(1)
    }

    pub fn solve(&self) -> Result<BarycenterResult> {
        match &self.mode {
            BarycenterMode::Exact1d => barycenter_1d(&self.atoms),
            BarycenterMode::FreeSupport => barycenter_free_support(
                &self.atoms,
                self.support_size.unwrap_or_else(|| self.default_support_size()),
                self.seed,
            ),
            BarycenterMode::FixedSupport(support) => barycenter_fixed_support(support, &self.atoms),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterResult {
    pub nu0: DiscreteMeasure,
    /// One optimal plan μₐ → ν₀ per atom, in atom order.
    pub plans: Vec<Coupling>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after every transport solve.
    pub history: Vec<f64>,
}

fn validate(atoms: &[WeightedLaw]) -> Result<usize> {
    let first = atoms.first().ok_or_else(|| Error::Input("barycenter of zero measures".into()))?;
    let dim = first.law.dim();
    for (k, a) in atoms.iter().enumerate() {
        if a.law.dim() != dim {
            return Err(Error::Dimension { context: format!("barycenter atom {k}"), expected: dim, found: a.law.dim() });
        }
        if !(a.weight > 0.0) {
            return Err(Error::Input(format!("barycenter atom {k}: weight must be positive")));
        }
    }
    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    if (total - 1.0).abs() > MASS_SUM_TOL {
        return Err(Error::MassSum { context: "barycenter weights".into(), total });
    }
    Ok(dim)
}

fn weighted_cost(atoms: &[WeightedLaw], plans: &[Coupling]) -> f64 {
    atoms.iter().zip(plans).map(|(a, p)| a.weight * p.cost()).sum()
}

fn solve_all(atoms: &[WeightedLaw], nu: &DiscreteMeasure) -> Result<Vec<Coupling>> {
    atoms
        .par_iter()
        .map(|a| solve_w2(&a.law, nu).map(|r| r.coupling))
        .collect()
}

/// Σₐ weightₐ · W²(μₐ, ν).
pub fn objective(nu: &DiscreteMeasure, atoms: &[WeightedLaw]) -> Result<f64> {
    validate(atoms)?;
    let costs: Vec<f64> = atoms
        .par_iter()
        .map(|a| solve_w2(&a.law, nu).map(|r| r.cost))
        .collect::<Result<_>>()?;
    Ok(atoms.iter().zip(costs).map(|(a, c)| a.weight * c).sum())
}

/// Exact barycenter on the line by quantile averaging.
pub fn barycenter_1d(atoms: &[WeightedLaw]) -> Result<BarycenterResult> {
    let dim = validate(atoms)?;
    if dim != 1 {
        return Err(Error::Dimension { context: "one-dimensional barycenter".into(), expected: 1, found: dim });
    }

    // Per atom: values in increasing order and the cumulative mass after each.
    let quantiles: Vec<(Vec<f64>, Vec<f64>)> = atoms
        .iter()
        .map(|a| {
            let mut pts: Vec<(f64, f64)> = a.law.points().iter().map(|p| (p.x[0], p.w)).collect();
            pts.sort_by(|l, r| l.0.total_cmp(&r.0));
            let mut acc = 0.0;
            let cum = pts.iter().map(|p| {
                acc += p.1;
                acc
            });
            let cum: Vec<f64> = cum.collect();
            (pts.into_iter().map(|p| p.0).collect(), cum)
        })
        .collect();

    let mut breaks: Vec<f64> = quantiles
        .iter()
        .flat_map(|(_, cum)| cum[..cum.len() - 1].iter().copied())
        .collect();
    breaks.sort_by(f64::total_cmp);
    let mut grid = vec![0.0];
    for t in breaks {
        if t - grid[grid.len() - 1] > GRID_EPS && t < 1.0 - GRID_EPS {
            grid.push(t);
        }
    }
    grid.push(1.0);

    let mut cursor = vec![0usize; atoms.len()];
    let mut cells = Vec::with_capacity(grid.len() - 1);
    for win in grid.windows(2) {
        let mid = 0.5 * (win[0] + win[1]);
        let mut y = 0.0;
        for ((a, (values, cum)), pos) in atoms.iter().zip(&quantiles).zip(cursor.iter_mut()) {
            while *pos + 1 < values.len() && cum[*pos] <= mid {
                *pos += 1;
            }
            y += a.weight * values[*pos];
        }
        cells.push(WeightedPoint::new(vec![y], win[1] - win[0]));
    }
    let nu0 = DiscreteMeasure::from_parts(1, cells, "barycenter")?.canonicalize()?;

    let plans: Vec<Coupling> = atoms
        .par_iter()
        .map(|a| solve_w2_1d(&a.law, &nu0).map(|r| r.coupling))
        .collect::<Result<_>>()?;
    let objective = weighted_cost(atoms, &plans);
    Ok(BarycenterResult { nu0, plans, objective, converged: true, iterations: 1, history: vec![objective] })
}

/// Deterministic farthest-point initialization over the pooled atom clouds.
/// The first point is drawn with probability proportional to its pooled mass.
fn farthest_point_init(atoms: &[WeightedLaw], n: usize, seed: u64) -> Vec<Vector> {
    let pooled: Vec<(&Vector, f64)> = atoms
        .iter()
        .flat_map(|a| a.law.points().iter().map(move |p| (&p.x, a.weight * p.w)))
        .collect();
    let total: f64 = pooled.iter().map(|p| p.1).sum();
    let target = SeededRng::new(seed).unit() * total;
    let mut acc = 0.0;
    let first = pooled
        .iter()
        .position(|p| {
            acc += p.1;
            acc > target
        })
        .unwrap_or(pooled.len() - 1);

    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = pooled.iter().map(|p| dist_sq(p.0, pooled[first].0)).collect();
    while chosen.len() < n {
        let next = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &d)| if d > best.1 { (k, d) } else { best })
            .0;
        chosen.push(next);
        for (d, p) in nearest.iter_mut().zip(&pooled) {
            *d = d.min(dist_sq(p.0, pooled[next].0));
        }
    }
    chosen.into_iter().map(|k| pooled[k].0.clone()).collect()
}

fn uniform_support(dim: usize, support: &[Vector]) -> Result<DiscreteMeasure> {
    let w = 1.0 / support.len() as f64;
    DiscreteMeasure::from_parts(dim, support.iter().map(|x| WeightedPoint { x: x.clone(), w }).collect(), "support")
}

/// Moves each support point to the mean of the mass it receives; points
/// receiving nothing stay put.
fn barycentric_update(atoms: &[WeightedLaw], plans: &[Coupling], support: &[Vector]) -> Vec<Vector> {
    let dim = support[0].dim();
    let mut num = vec![vec![0.0; dim]; support.len()];
    let mut den = vec![0.0; support.len()];
    for (a, plan) in atoms.iter().zip(plans) {
        for e in &plan.entries {
            let m = a.weight * e.mass;
            den[e.j] += m;
            for (acc, x) in num[e.j].iter_mut().zip(plan.source_point(e).iter()) {
                *acc += m * x;
            }
        }
    }
    num.into_iter()
        .zip(den)
        .zip(support)
        .map(|((s, d), old)| if d > 0.0 { Vector(s.into_iter().map(|v| v / d).collect()) } else { old.clone() })
        .collect()
}

/// Re-indexes plans onto the canonical form of their common target.
fn canonicalize_target(plans: Vec<Coupling>, target: &DiscreteMeasure) -> Result<(DiscreteMeasure, Vec<Coupling>)> {
    let (nu0, map) = target.canonicalize_with_map()?;
    let plans = plans
        .into_iter()
        .map(|p| {
            let mut entries: Vec<PlanEntry> = Vec::with_capacity(p.entries.len());
            let mut remapped: Vec<PlanEntry> =
                p.entries.iter().filter_map(|e| map[e.j].map(|j| PlanEntry { j, ..*e })).collect();
            remapped.sort_by_key(|e| (e.i, e.j));
            for e in remapped {
                match entries.last_mut() {
                    Some(last) if last.i == e.i && last.j == e.j => last.mass += e.mass,
                    _ => entries.push(e),
                }
            }
            Coupling { source: p.source, target: nu0.clone(), entries }
        })
        .collect();
    Ok((nu0, plans))
}

/// Alternating free-support barycenter with `n` points of mass 1/n.
pub fn barycenter_free_support(atoms: &[WeightedLaw], n: usize, seed: u64) -> Result<BarycenterResult> {
    let dim = validate(atoms)?;
    if n < 1 {
        return Err(Error::Input("support size must be at least 1".into()));
    }
    let mut support = farthest_point_init(atoms, n, seed);
    let mut plans = solve_all(atoms, &uniform_support(dim, &support)?)?;
    let mut obj = weighted_cost(atoms, &plans);
    let mut history = vec![obj];
    let mut last_decrease = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=MAX_ITERATIONS {
        iterations = it;
        let next = barycentric_update(atoms, &plans, &support);
        let radius = 1.0 + support.iter().map(Vector::max_abs).fold(0.0, f64::max);
        let shift = next.iter().zip(&support).map(|(a, b)| a.sub(b).max_abs()).fold(0.0, f64::max);
        let stalled = last_decrease < DECREASE_TOL * (1.0 + obj);
        if shift <= FIXED_POINT_TOL * radius || (stalled && shift <= STALLED_FIXED_POINT_TOL * radius) {
            converged = true;
            break;
        }
        support = next;
        plans = solve_all(atoms, &uniform_support(dim, &support)?)?;
        let new_obj = weighted_cost(atoms, &plans);
        history.push(new_obj);
        last_decrease = obj - new_obj;
        obj = new_obj;
    }

    let (nu0, plans) = canonicalize_target(plans, &uniform_support(dim, &support)?)?;
    let objective = weighted_cost(atoms, &plans);
    Ok(BarycenterResult { nu0, plans, objective, converged, iterations, history })
}

/// Globally optimal masses on a frozen support, found by one joint linear
/// program over all atom plans with a shared column marginal.
pub fn barycenter_fixed_support(support: &[Vector], atoms: &[WeightedLaw]) -> Result<BarycenterResult> {
    let dim = validate(atoms)?;
    if support.is_empty() {
        return Err(Error::Input("fixed-support barycenter needs a nonempty support".into()));
    }
    if let Some(bad) = support.iter().find(|y| y.dim() != dim) {
        return Err(Error::Dimension { context: "barycenter support".into(), expected: dim, found: bad.dim() });
    }

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<Vec<minilp::Variable>>> = atoms
        .iter()
        .map(|a| {
            a.law
                .points()
                .iter()
                .map(|p| support.iter().map(|y| lp.add_var(a.weight * dist_sq(&p.x, y), (0.0, f64::INFINITY))).collect())
                .collect()
        })
        .collect();
    for (a, rows) in atoms.iter().zip(&vars) {
        for (p, row) in a.law.points().iter().zip(rows) {
            let mut expr = LinearExpr::empty();
            for &v in row {
                expr.add(v, 1.0);
            }
            lp.add_constraint(expr, ComparisonOp::Eq, p.w);
        }
    }
    // Every atom's column marginal equals the first atom's.
    for rows in &vars[1..] {
        for j in 0..support.len() {
            let mut expr = LinearExpr::empty();
            for row in rows {
                expr.add(row[j], 1.0);
            }
            for row in &vars[0] {
                expr.add(row[j], -1.0);
            }
            lp.add_constraint(expr, ComparisonOp::Eq, 0.0);
        }
    }
    let solution = lp.solve().map_err(|e| Error::Solver(format!("fixed-support mass LP: {e}")))?;

    let masses: Vec<f64> = (0..support.len())
        .map(|j| vars[0].iter().map(|row| solution[row[j]]).sum::<f64>().max(0.0))
        .collect();
    let total: f64 = masses.iter().sum();
    let points = support
        .iter()
        .zip(&masses)
        .filter(|(_, &w)| w >= PLAN_EPS)
        .map(|(y, &w)| WeightedPoint { x: y.clone(), w: w / total })
        .collect();
    let nu0 = DiscreteMeasure::from_parts(dim, points, "barycenter")?.canonicalize()?;
    let plans = solve_all(atoms, &nu0)?;
    let objective = weighted_cost(atoms, &plans);
    Ok(BarycenterResult { nu0, plans, objective, converged: true, iterations: 1, history: vec![objective] })
}
