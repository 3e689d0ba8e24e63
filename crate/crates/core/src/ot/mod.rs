//! Exact discrete optimal transport for the squared Euclidean cost.
//!
//! [`solve_w2`] is the entry point: it runs the comonotone sweep in one
//! dimension and the transportation simplex otherwise. [`brute_force_w2`]
//! enumerates permutations and exists to cross-check the other two.

mod brute;
mod one_d;
mod simplex;

pub use brute::brute_force_w2;
pub use one_d::solve_w2_1d;
pub use simplex::{transport_lp, MAX_PIVOTS};

use crate::error::{Error, Result};
use crate::measure::{dist_sq, dot, DiscreteMeasure, Vector};

/// Plan entries lighter than this are dropped from returned couplings.
pub(crate) const PLAN_EPS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    /// Source support index.
    pub i: usize,
    /// Target support index.
    pub j: usize,
    pub mass: f64,
}

/// A transport plan between two discrete measures, stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub source: DiscreteMeasure,
    pub target: DiscreteMeasure,
    pub entries: Vec<PlanEntry>,
}

impl Coupling {
    pub fn source_point(&self, e: &PlanEntry) -> &Vector {
        &self.source.points()[e.i].x
    }

    pub fn target_point(&self, e: &PlanEntry) -> &Vector {
        &self.target.points()[e.j].x
    }

    /// Σ mass · |x − y|².
    pub fn cost(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.mass * dist_sq(self.source_point(e), self.target_point(e)))
            .sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut rows = vec![0.0; self.source.len()];
        for e in &self.entries {
            rows[e.i] += e.mass;
        }
        rows
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut cols = vec![0.0; self.target.len()];
        for e in &self.entries {
            cols[e.j] += e.mass;
        }
        cols
    }

    /// Largest absolute deviation of a row or column sum from its marginal.
    pub fn marginal_residual(&self) -> f64 {
        let rows = self.row_sums().into_iter().zip(self.source.masses());
        let cols = self.col_sums().into_iter().zip(self.target.masses());
        rows.chain(cols).fold(0.0, |acc, (s, w)| acc.max((s - w).abs()))
    }
}

/// An optimal plan together with its cost, W² of the two marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    pub coupling: Coupling,
    pub cost: f64,
}

impl TransportResult {
    pub(crate) fn from_entries(mu: &DiscreteMeasure, nu: &DiscreteMeasure, mut entries: Vec<PlanEntry>) -> Self {
        entries.sort_by_key(|e| (e.i, e.j));
        let coupling = Coupling { source: mu.clone(), target: nu.clone(), entries };
        let cost = coupling.cost();
        TransportResult { coupling, cost }
    }
}

pub(crate) fn check_same_dim(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::Dimension { context: "transport".into(), expected: mu.dim(), found: nu.dim() });
    }
    Ok(())
}

/// Exact W² transport between `mu` and `nu`.
pub fn solve_w2(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<TransportResult> {
    check_same_dim(mu, nu)?;
    if mu.dim() == 1 {
        solve_w2_1d(mu, nu)
    } else {
        transport_lp(mu, nu)
    }
}

/// A pair of plan entries whose support points break monotonicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneViolation {
    pub first: usize,
    pub second: usize,
    /// (x₁ − x₂)·(y₁ − y₂), negative.
    pub product: f64,
}

/// All entry pairs with `(x₁ − x₂)·(y₁ − y₂) < −tol`. Quadratic in the
/// number of entries.
pub fn check_monotone_support(c: &Coupling, tol: f64) -> Vec<MonotoneViolation> {
    let mut out = Vec::new();
    for (a, ea) in c.entries.iter().enumerate() {
        for (b, eb) in c.entries.iter().enumerate().skip(a + 1) {
            let product = monotone_product(c, ea, eb);
            if product < -tol {
                out.push(MonotoneViolation { first: a, second: b, product });
            }
        }
    }
    out
}

/// Smallest `(x₁ − x₂)·(y₁ − y₂)` over entry pairs; zero for plans with a
/// single entry.
pub fn min_monotone_product(c: &Coupling) -> f64 {
    let mut min = 0.0f64;
    for (a, ea) in c.entries.iter().enumerate() {
        for eb in &c.entries[a + 1..] {
            min = min.min(monotone_product(c, ea, eb));
        }
    }
    min
}

fn monotone_product(c: &Coupling, ea: &PlanEntry, eb: &PlanEntry) -> f64 {
    let (x1, y1) = (c.source_point(ea), c.target_point(ea));
    let (x2, y2) = (c.source_point(eb), c.target_point(eb));
    x1.iter()
        .zip(x2.iter())
        .zip(y1.iter().zip(y2.iter()))
        .map(|((a1, a2), (b1, b2))| (a1 - a2) * (b1 - b2))
        .sum()
}

/// Scalar-product statistics of a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarProductStats {
    /// ∫ x·y dκ.
    pub mean_xy: f64,
    /// ∫ (x·y)⁻ dκ.
    pub mean_neg_part: f64,
    /// min of x·y over the support.
    pub min_support_xy: f64,
}

pub fn scalar_product_stats(c: &Coupling) -> ScalarProductStats {
    let mut mean_xy = 0.0;
    let mut mean_neg_part = 0.0;
    let mut min_support_xy = f64::INFINITY;
    for e in &c.entries {
        let xy = dot(c.source_point(e), c.target_point(e));
        mean_xy += e.mass * xy;
        mean_neg_part += e.mass * (-xy).max(0.0);
        min_support_xy = min_support_xy.min(xy);
    }
    ScalarProductStats { mean_xy, mean_neg_part, min_support_xy }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::WeightedPoint;

    fn m1(points: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(1, points.iter().map(|&(x, w)| WeightedPoint::new(vec![x], w)).collect()).unwrap()
    }

    fn swapped_plan() -> Coupling {
        let mu = m1(&[(-1.0, 0.5), (1.0, 0.5)]);
        let nu = m1(&[(-1.5, 0.5), (1.5, 0.5)]);
        Coupling {
            source: mu,
            target: nu,
            entries: vec![PlanEntry { i: 0, j: 1, mass: 0.5 }, PlanEntry { i: 1, j: 0, mass: 0.5 }],
        }
    }

    #[test]
    fn solve_w2_two_scales_atom_pair() {
        let r = solve_w2(&m1(&[(-1.0, 0.5), (1.0, 0.5)]), &m1(&[(-1.5, 0.5), (1.5, 0.5)])).unwrap();
        assert!((r.cost - 0.25).abs() < 1e-15);
        assert_eq!(r.coupling.entries, vec![PlanEntry { i: 0, j: 0, mass: 0.5 }, PlanEntry { i: 1, j: 1, mass: 0.5 }]);
    }

    #[test]
    fn solve_w2_identity() {
        let mu = DiscreteMeasure::new(
            2,
            vec![
                WeightedPoint::new(vec![0.0, 1.0], 0.2),
                WeightedPoint::new(vec![1.0, -1.0], 0.3),
                WeightedPoint::new(vec![-2.0, 0.5], 0.5),
            ],
        )
        .unwrap();
        let r = solve_w2(&mu, &mu).unwrap();
        assert_eq!(r.cost, 0.0);
        assert!(r.coupling.entries.iter().all(|e| e.i == e.j));
    }

    #[test]
    fn solve_w2_three_point_plane() {
        let mu = DiscreteMeasure::uniform(2, vec![vec![0.0, 0.0].into(), vec![1.0, 0.0].into(), vec![0.0, 1.0].into()])
            .unwrap();
        let nu = DiscreteMeasure::uniform(2, vec![vec![0.0, 0.0].into(), vec![2.0, 0.0].into(), vec![0.0, 2.0].into()])
            .unwrap();
        let r = solve_w2(&mu, &nu).unwrap();
        assert!((r.cost - 2.0 / 3.0).abs() < 1e-12);
        assert!(r.coupling.entries.len() < mu.len() + nu.len());
    }

    #[test]
    fn solve_w2_rejects_dimension_mismatch() {
        let err = solve_w2(&DiscreteMeasure::dirac(vec![0.0]), &DiscreteMeasure::dirac(vec![0.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn monotone_examples() {
        let ok = solve_w2(&m1(&[(-1.0, 0.5), (1.0, 0.5)]), &m1(&[(-1.5, 0.5), (1.5, 0.5)])).unwrap();
        assert!(check_monotone_support(&ok.coupling, 1e-9).is_empty());

        let bad = check_monotone_support(&swapped_plan(), 1e-9);
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].product, -6.0);

        let mu = m1(&[(-1.0, 0.5), (1.0, 0.5)]);
        assert!(check_monotone_support(&solve_w2(&mu, &mu).unwrap().coupling, 1e-9).is_empty());
    }

    #[test]
    fn scalar_product_examples() {
        let opt = solve_w2(&m1(&[(-1.0, 0.5), (1.0, 0.5)]), &m1(&[(-1.5, 0.5), (1.5, 0.5)])).unwrap();
        let s = scalar_product_stats(&opt.coupling);
        assert_eq!((s.mean_xy, s.mean_neg_part, s.min_support_xy), (1.5, 0.0, 1.5));

        let mu = m1(&[(-1.0, 0.5), (1.0, 0.5)]);
        let s = scalar_product_stats(&solve_w2(&mu, &mu).unwrap().coupling);
        assert_eq!((s.mean_xy, s.mean_neg_part), (1.0, 0.0));

        let s = scalar_product_stats(&swapped_plan());
        assert_eq!((s.mean_xy, s.mean_neg_part), (-1.5, 1.5));
    }

    #[test]
    fn marginal_residual_of_swapped_plan_is_zero() {
        assert_eq!(swapped_plan().marginal_residual(), 0.0);
        assert_eq!(min_monotone_product(&swapped_plan()), -6.0);
    }
}
