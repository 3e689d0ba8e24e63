//! Finitely supported probability measures on ℝᵐ and the finite model of a
//! random vector disintegrated along the atoms of a σ-algebra.
//!
//! A [`ConditionedVariable`] is a list of atoms, each carrying its probability
//! and the conditional law of `X` on that atom. Every `(atom, point)` pair is
//! one cell of the disintegration, so no separate product-space machinery is
//! needed.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Coordinatewise tolerance under which two support points are the same point.
pub const MERGE_TOL: f64 = 1e-12;
/// Masses below this are dropped by [`DiscreteMeasure::canonicalize`].
pub const PRUNE_TOL: f64 = 1e-15;
/// Largest total-mass deviation accepted.
pub const MASS_SUM_TOL: f64 = 1e-9;
/// Totals further than this from one are renormalized (as is anything that
/// lost pruned mass). Smaller deviations are rounding noise; leaving them
/// makes canonical values fixed points.
pub const RENORM_TOL: f64 = 1e-10;
/// Per-coordinate bound on `|E[X | atom]|` for a variable to count as centered.
pub const CENTER_TOL: f64 = 1e-9;

/// A point of ℝᵐ.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn dist_sq(&self, other: &Vector) -> f64 {
        dist_sq(&self.0, &other.0)
    }

    /// Largest absolute coordinate; the sup-norm.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Lexicographic order on coordinates under `f64::total_cmp`.
    pub fn lex_cmp(&self, other: &Vector) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One support atom of a discrete measure.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoint {
    pub x: Vector,
    pub w: f64,
}

impl WeightedPoint {
    pub fn new(x: impl Into<Vector>, w: f64) -> Self {
        WeightedPoint { x: x.into(), w }
    }
}

/// A finitely supported probability measure on ℝᵐ.
///
/// Values built through [`DiscreteMeasure::new`] are canonical: sorted
/// lexicographically, duplicate locations merged, negligible masses pruned
/// and total mass renormalized up to [`RENORM_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<WeightedPoint>,
}

impl DiscreteMeasure {
    /// Validates and canonicalizes.
    pub fn new(dim: usize, points: Vec<WeightedPoint>) -> Result<Self> {
        Self::from_parts(dim, points, "measure")?.canonicalize()
    }

    /// Validates without canonicalizing, so duplicate locations are kept.
    pub(crate) fn from_parts(dim: usize, points: Vec<WeightedPoint>, context: &str) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input(format!("{context}: dimension must be at least 1")));
        }
        if points.is_empty() {
            return Err(Error::Input(format!("{context}: measure has no support points")));
        }
        for (k, p) in points.iter().enumerate() {
            if p.x.dim() != dim {
                return Err(Error::Dimension {
                    context: format!("{context}, point {k}"),
                    expected: dim,
                    found: p.x.dim(),
                });
            }
            if !p.x.is_finite() {
                return Err(Error::Input(format!("{context}, point {k}: non-finite coordinate")));
            }
            if !(p.w.is_finite() && p.w >= 0.0) {
                return Err(Error::Input(format!("{context}, point {k}: mass {} is not a nonnegative number", p.w)));
            }
        }
        let total: f64 = points.iter().map(|p| p.w).sum();
        if (total - 1.0).abs() > MASS_SUM_TOL {
            return Err(Error::MassSum { context: context.to_string(), total });
        }
        Ok(DiscreteMeasure { dim, points })
    }

    /// Point mass at `x`.
    pub fn dirac(x: impl Into<Vector>) -> Self {
        let x = x.into();
        DiscreteMeasure { dim: x.dim(), points: vec![WeightedPoint { x, w: 1.0 }] }
    }

    /// Uniform measure on the given locations (duplicates merged).
    pub fn uniform(dim: usize, locations: Vec<Vector>) -> Result<Self> {
        let n = locations.len().max(1);
        let w = 1.0 / n as f64;
        Self::new(dim, locations.into_iter().map(|x| WeightedPoint { x, w }).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[WeightedPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.w)
    }

    pub fn total_mass(&self) -> f64 {
        self.masses().sum()
    }

    /// Σᵢ wᵢ xᵢ.
    pub fn mean(&self) -> Vector {
        let mut m = vec![0.0; self.dim];
        for p in &self.points {
            for (acc, v) in m.iter_mut().zip(p.x.iter()) {
                *acc += p.w * v;
            }
        }
        Vector(m)
    }

    /// Σᵢ wᵢ |xᵢ|².
    pub fn second_moment(&self) -> f64 {
        self.points.iter().map(|p| p.w * p.x.norm_sq()).sum()
    }

    /// Σᵢ wᵢ |xᵢ|.
    pub fn first_abs_moment(&self) -> f64 {
        self.points.iter().map(|p| p.w * p.x.norm()).sum()
    }

    /// Translates every support point by `-shift`.
    pub fn translate(&self, shift: &Vector) -> DiscreteMeasure {
        let points = self
            .points
            .iter()
            .map(|p| WeightedPoint { x: p.x.sub(shift), w: p.w })
            .collect();
        DiscreteMeasure { dim: self.dim, points }
    }

    pub fn is_uniform(&self, tol: f64) -> bool {
        let target = 1.0 / self.len() as f64;
        self.masses().all(|w| (w - target).abs() <= tol)
    }

    /// Merges points within [`MERGE_TOL`], prunes masses below [`PRUNE_TOL`],
    /// renormalizes and sorts lexicographically.
    pub fn canonicalize(&self) -> Result<DiscreteMeasure> {
        self.canonicalize_with_map().map(|(m, _)| m)
    }

    /// Like [`canonicalize`](Self::canonicalize), also returning for each input
    /// point its index in the output (`None` when pruned).
    pub fn canonicalize_with_map(&self) -> Result<(DiscreteMeasure, Vec<Option<usize>>)> {
        let (mut points, mut map) = canonicalize_points(self.dim, &self.points, "measure")?;
        // Merged centroids can land within tolerance of each other; repeat
        // until a pass merges nothing. Without merges no point moved, so
        // nothing new can come within tolerance.
        let mut merged = map.iter().flatten().count() > points.len();
        while merged {
            let before = points.len();
            let (next, step) = canonicalize_points(self.dim, &points, "measure")?;
            merged = next.len() < before;
            points = next;
            for slot in map.iter_mut() {
                *slot = slot.and_then(|k| step[k]);
            }
        }
        Ok((DiscreteMeasure { dim: self.dim, points }, map))
    }

    /// Total-variation distance to `other`, matching support points within
    /// [`MERGE_TOL`].
    pub fn tv_distance(&self, other: &DiscreteMeasure) -> f64 {
        let mut matched = vec![false; other.len()];
        let mut diff = 0.0;
        for p in &self.points {
            let hit = other
                .points
                .iter()
                .enumerate()
                .find(|(k, q)| !matched[*k] && same_location(&p.x, &q.x));
            match hit {
                Some((k, q)) => {
                    matched[k] = true;
                    diff += (p.w - q.w).abs();
                }
                None => diff += p.w,
            }
        }
        diff += other
            .points
            .iter()
            .zip(&matched)
            .filter(|(_, m)| !**m)
            .map(|(q, _)| q.w)
            .sum::<f64>();
        0.5 * diff
    }
}

fn same_location(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= MERGE_TOL)
}

fn canonicalize_points(
    dim: usize,
    points: &[WeightedPoint],
    context: &str,
) -> Result<(Vec<WeightedPoint>, Vec<Option<usize>>)> {
    let total: f64 = points.iter().map(|p| p.w).sum();
    if points.iter().any(|p| !(p.w >= 0.0)) {
        return Err(Error::Input(format!("{context}: negative or NaN mass")));
    }
    if (total - 1.0).abs() > MASS_SUM_TOL {
        return Err(Error::MassSum { context: context.to_string(), total });
    }

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].x.lex_cmp(&points[b].x).then(a.cmp(&b)));

    // Greedy clustering in sorted order. Every point within MERGE_TOL of a
    // group's leader joins it; the first coordinate bounds the scan window.
    let mut group_of = vec![usize::MAX; points.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (pos, &lead) in order.iter().enumerate() {
        if group_of[lead] != usize::MAX {
            continue;
        }
        let g = groups.len();
        group_of[lead] = g;
        let mut members = vec![lead];
        for &other in &order[pos + 1..] {
            if points[other].x[0] - points[lead].x[0] > MERGE_TOL {
                break;
            }
            if group_of[other] == usize::MAX && same_location(&points[lead].x, &points[other].x) {
                group_of[other] = g;
                members.push(other);
            }
        }
        groups.push(members);
    }

    let mut merged: Vec<(WeightedPoint, usize)> = Vec::with_capacity(groups.len());
    for (g, members) in groups.iter().enumerate() {
        let mass: f64 = members.iter().map(|&k| points[k].w).sum();
        if mass < PRUNE_TOL {
            continue;
        }
        let x = if members.len() == 1 {
            points[members[0]].x.clone()
        } else {
            let mut acc = vec![0.0; dim];
            for &k in members {
                for (a, v) in acc.iter_mut().zip(points[k].x.iter()) {
                    *a += points[k].w * v;
                }
            }
            Vector(acc.into_iter().map(|a| a / mass).collect())
        };
        merged.push((WeightedPoint { x, w: mass }, g));
    }
    if merged.is_empty() {
        return Err(Error::Input(format!("{context}: every support point has negligible mass")));
    }

    let kept: f64 = merged.iter().map(|(p, _)| p.w).sum();
    let renormalize = merged.len() < groups.len() || (kept - 1.0).abs() > RENORM_TOL;
    for (p, _) in merged.iter_mut() {
        if renormalize {
            p.w /= kept;
        }
        // -0.0 would make serialized output depend on arithmetic history.
        for v in p.x.iter_mut() {
            *v += 0.0;
        }
    }
    merged.sort_by(|a, b| a.0.x.lex_cmp(&b.0.x));

    let mut new_index = vec![None; groups.len()];
    for (k, (_, g)) in merged.iter().enumerate() {
        new_index[*g] = Some(k);
    }
    let map = group_of.iter().map(|&g| new_index[g]).collect();
    Ok((merged.into_iter().map(|(p, _)| p).collect(), map))
}

/// One atom of the conditioning σ-algebra with the conditional law of `X` on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub id: String,
    pub weight: f64,
    pub law: DiscreteMeasure,
}

/// The finite model of a pair `(X, 𝒜)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedVariable {
    dim: usize,
    atoms: Vec<Atom>,
}

impl ConditionedVariable {
    /// Validates atom weights and laws. Weight totals within [`MASS_SUM_TOL`]
    /// of one are accepted and renormalized as in [`RENORM_TOL`]; laws are
    /// canonicalized.
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        let scale = Self::validate(dim, &atoms)?;
        let atoms = atoms
            .into_iter()
            .map(|a| {
                let law = a.law.canonicalize()?;
                Ok(Atom { id: a.id, weight: a.weight / scale, law })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConditionedVariable { dim, atoms })
    }

    /// [`new`](Self::new) for laws that are already canonical.
    pub(crate) fn from_canonical(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        let scale = Self::validate(dim, &atoms)?;
        let atoms = atoms.into_iter().map(|a| Atom { weight: a.weight / scale, ..a }).collect();
        Ok(ConditionedVariable { dim, atoms })
    }

    /// Checks everything but the laws themselves; returns the factor weights
    /// are divided by.
    fn validate(dim: usize, atoms: &[Atom]) -> Result<f64> {
        if dim == 0 {
            return Err(Error::Input("dimension must be at least 1".into()));
        }
        if atoms.is_empty() {
            return Err(Error::Input("variable has no atoms".into()));
        }
        let mut seen = HashSet::new();
        for atom in atoms {
            if !seen.insert(atom.id.as_str()) {
                return Err(Error::Input(format!("duplicate atom id `{}`", atom.id)));
            }
            if !(atom.weight.is_finite() && atom.weight > 0.0) {
                return Err(Error::Input(format!("atom `{}`: weight {} must be positive", atom.id, atom.weight)));
            }
            if atom.law.dim() != dim {
                return Err(Error::Dimension {
                    context: format!("atom `{}`", atom.id),
                    expected: dim,
                    found: atom.law.dim(),
                });
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > MASS_SUM_TOL {
            return Err(Error::MassSum { context: "atom weights".into(), total });
        }
        Ok(if (total - 1.0).abs() > RENORM_TOL { total } else { 1.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// ‖X‖² = Σₐ weightₐ Σᵢ wᵢ |xᵢ|².
    pub fn norm_l2_sq(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.law.second_moment()).sum()
    }

    /// ‖X‖₁ = Σₐ weightₐ Σᵢ wᵢ |xᵢ|.
    pub fn norm_l1(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.law.first_abs_moment()).sum()
    }

    /// Per-atom conditional means, i.e. `E[X | 𝒜]`.
    pub fn conditional_means(&self) -> Vec<Vector> {
        self.atoms.iter().map(|a| a.law.mean()).collect()
    }

    /// Largest per-coordinate `|E[X | atom]|` and the atom attaining it.
    pub fn max_conditional_mean(&self) -> (f64, usize) {
        self.atoms
            .iter()
            .enumerate()
            .map(|(k, a)| (a.law.mean().max_abs(), k))
            .fold((0.0, 0), |best, cur| if cur.0 > best.0 { cur } else { best })
    }

    pub fn is_centered(&self) -> bool {
        self.max_conditional_mean().0 <= CENTER_TOL
    }

    /// Subtracts `E[X | 𝒜]` atom by atom. Returns the centered variable and
    /// the removed conditional means.
    pub fn center(&self) -> Result<(ConditionedVariable, Vec<Vector>)> {
        let means = self.conditional_means();
        let atoms = self
            .atoms
            .iter()
            .zip(&means)
            .map(|(a, m)| {
                Ok(Atom { id: a.id.clone(), weight: a.weight, law: a.law.translate(m).canonicalize()? })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((ConditionedVariable { dim: self.dim, atoms }, means))
    }
}
