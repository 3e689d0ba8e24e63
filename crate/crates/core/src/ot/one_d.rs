use super::{check_same_dim, PlanEntry, TransportResult};
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

/// Leftover mass below this counts as exhausted during the sweep.
const SWEEP_SNAP: f64 = 1e-14;

/// Comonotone (quantile-aligned) plan between two measures on the line.
///
/// Both supports are walked in increasing order and mass is split at the
/// union of the cumulative-mass breakpoints. Optimal for any convex cost.
pub fn solve_w2_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<TransportResult> {
    check_same_dim(mu, nu)?;
    if mu.dim() != 1 {
        return Err(Error::Dimension { context: "one-dimensional transport".into(), expected: 1, found: mu.dim() });
    }
    let src = sorted_order(mu);
    let dst = sorted_order(nu);
    let (pm, pn) = (mu.points(), nu.points());

    let mut entries = Vec::with_capacity(src.len() + dst.len() - 1);
    let (mut a, mut b) = (0usize, 0usize);
    let mut left_src = pm[src[0]].w;
    let mut left_dst = pn[dst[0]].w;
    while a < src.len() && b < dst.len() {
        let q = left_src.min(left_dst);
        if q > 0.0 {
            entries.push(PlanEntry { i: src[a], j: dst[b], mass: q });
        }
        left_src -= q;
        left_dst -= q;
        if left_src <= SWEEP_SNAP {
            a += 1;
            if a < src.len() {
                left_src = pm[src[a]].w;
            }
        }
        if left_dst <= SWEEP_SNAP {
            b += 1;
            if b < dst.len() {
                left_dst = pn[dst[b]].w;
            }
        }
    }
    Ok(TransportResult::from_entries(mu, nu, entries))
}

fn sorted_order(m: &DiscreteMeasure) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by(|&a, &b| m.points()[a].x[0].total_cmp(&m.points()[b].x[0]).then(a.cmp(&b)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::WeightedPoint;

    fn m1(points: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(1, points.iter().map(|&(x, w)| WeightedPoint::new(vec![x], w)).collect()).unwrap()
    }

    #[test]
    fn symmetric_pairs() {
        let r = solve_w2_1d(&m1(&[(-2.0, 0.5), (2.0, 0.5)]), &m1(&[(-1.5, 0.5), (1.5, 0.5)])).unwrap();
        assert_eq!(r.cost, 0.25);
    }

    #[test]
    fn point_masses() {
        let d = DiscreteMeasure::dirac(vec![0.0]);
        assert_eq!(solve_w2_1d(&d, &d).unwrap().cost, 0.0);
    }

    #[test]
    fn split_at_cumulative_breakpoints() {
        let r = solve_w2_1d(&m1(&[(0.0, 0.25), (4.0, 0.75)]), &m1(&[(1.0, 0.5), (3.0, 0.5)])).unwrap();
        assert_eq!(
            r.coupling.entries,
            vec![
                PlanEntry { i: 0, j: 0, mass: 0.25 },
                PlanEntry { i: 1, j: 0, mass: 0.25 },
                PlanEntry { i: 1, j: 1, mass: 0.5 },
            ]
        );
        assert_eq!(r.cost, 3.0);
    }

    #[test]
    fn rejects_plane_measures() {
        let d = DiscreteMeasure::dirac(vec![0.0, 0.0]);
        assert!(solve_w2_1d(&d, &d).is_err());
    }

    #[test]
    fn unsorted_input_is_handled() {
        let mu = DiscreteMeasure::from_parts(
            1,
            vec![WeightedPoint::new(vec![1.0], 0.5), WeightedPoint::new(vec![-1.0], 0.5)],
            "t",
        )
        .unwrap();
        let nu = m1(&[(-2.0, 0.5), (2.0, 0.5)]);
        let r = solve_w2_1d(&mu, &nu).unwrap();
        assert_eq!(r.cost, 1.0);
        assert_eq!(r.coupling.entries[0], PlanEntry { i: 0, j: 1, mass: 0.5 });
    }
}
