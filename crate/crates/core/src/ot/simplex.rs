//! Transportation simplex on the dense cost matrix.
//!
//! The basis is a spanning tree of the bipartite row/column graph with
//! exactly `n + m − 1` cells, seeded by the northwest-corner rule. Pricing uses
//! the most negative reduced cost (ties to the smallest `(i, j)`); after a
//! long run of degenerate pivots it switches to Bland's first-index rule
//! until progress resumes, which rules out cycling.

use super::{check_same_dim, PlanEntry, TransportResult, PLAN_EPS};
use crate::error::{Error, Result};
use crate::measure::{dist_sq, DiscreteMeasure};

pub const MAX_PIVOTS: usize = 1_000_000;
/// Reduced costs above `-OPTIMALITY_TOL · mean cost` certify optimality.
const OPTIMALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct BasicCell {
    i: usize,
    j: usize,
    flow: f64,
}

struct Tableau<'a> {
    n: usize,
    m: usize,
    cost: &'a [f64],
    basis: Vec<BasicCell>,
    in_basis: Vec<bool>,
}

/// Exact W² plan by the transportation simplex, for any dimension.
pub fn transport_lp(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<TransportResult> {
    check_same_dim(mu, nu)?;
    let (n, m) = (mu.len(), nu.len());
    let mut cost = Vec::with_capacity(n * m);
    for p in mu.points() {
        for q in nu.points() {
            cost.push(dist_sq(&p.x, &q.x));
        }
    }
    let supply: Vec<f64> = mu.masses().collect();
    let demand: Vec<f64> = nu.masses().collect();

    let mut tableau = Tableau::northwest(&cost, &supply, &demand);
    let scale = cost.iter().sum::<f64>() / cost.len() as f64;
    tableau.optimize(OPTIMALITY_TOL * scale)?;

    let entries = tableau
        .basis
        .iter()
        .filter(|c| c.flow >= PLAN_EPS)
        .map(|c| PlanEntry { i: c.i, j: c.j, mass: c.flow })
        .collect();
    Ok(TransportResult::from_entries(mu, nu, entries))
}

impl<'a> Tableau<'a> {
    fn northwest(cost: &'a [f64], supply: &[f64], demand: &[f64]) -> Self {
        let (n, m) = (supply.len(), demand.len());
        let mut basis = Vec::with_capacity(n + m - 1);
        let (mut i, mut j) = (0, 0);
        let (mut left_row, mut left_col) = (supply[0], demand[0]);
        loop {
            let q = left_row.min(left_col).max(0.0);
            basis.push(BasicCell { i, j, flow: q });
            left_row -= q;
            left_col -= q;
            if i == n - 1 && j == m - 1 {
                break;
            }
            // Advance exactly one index per cell so the basis stays a tree.
            if (left_row <= left_col && i < n - 1) || j == m - 1 {
                i += 1;
                left_row = supply[i];
            } else {
                j += 1;
                left_col = demand[j];
            }
        }
        let mut in_basis = vec![false; n * m];
        for c in &basis {
            in_basis[c.i * m + c.j] = true;
        }
        Tableau { n, m, cost, basis, in_basis }
    }

    fn optimize(&mut self, tol: f64) -> Result<()> {
        let degenerate_limit = 2 * (self.n + self.m);
        let mut degenerate_run = 0usize;
        for _ in 0..MAX_PIVOTS {
            let adjacency = self.adjacency();
            let (u, v) = self.potentials(&adjacency);
            let entering = if degenerate_run > degenerate_limit {
                self.first_improving(&u, &v, tol)
            } else {
                self.most_improving(&u, &v, tol)
            };
            let Some((ei, ej)) = entering else {
                return Ok(());
            };
            let theta = self.pivot(ei, ej, &adjacency)?;
            if theta > 0.0 {
                degenerate_run = 0;
            } else {
                degenerate_run += 1;
            }
        }
        Err(Error::PivotLimit(MAX_PIVOTS))
    }

    /// Node `k < n` is row `k`; node `n + j` is column `j`.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n + self.m];
        for (b, c) in self.basis.iter().enumerate() {
            adj[c.i].push(b);
            adj[self.n + c.j].push(b);
        }
        adj
    }

    /// Dual potentials with `u[0] = 0` and `u_i + v_j = c_ij` on the basis.
    fn potentials(&self, adj: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
        let mut u = vec![f64::NAN; self.n];
        let mut v = vec![f64::NAN; self.m];
        u[0] = 0.0;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            for &b in &adj[node] {
                let c = self.basis[b];
                let cij = self.cost[c.i * self.m + c.j];
                if node < self.n {
                    if v[c.j].is_nan() {
                        v[c.j] = cij - u[c.i];
                        stack.push(self.n + c.j);
                    }
                } else if u[c.i].is_nan() {
                    u[c.i] = cij - v[c.j];
                    stack.push(c.i);
                }
            }
        }
        (u, v)
    }

    fn reduced_cost(&self, i: usize, j: usize, u: &[f64], v: &[f64]) -> f64 {
        self.cost[i * self.m + j] - u[i] - v[j]
    }

    fn most_improving(&self, u: &[f64], v: &[f64], tol: f64) -> Option<(usize, usize)> {
        let mut best = None;
        let mut best_rc = -tol;
        for i in 0..self.n {
            for j in 0..self.m {
                if self.in_basis[i * self.m + j] {
                    continue;
                }
                let rc = self.reduced_cost(i, j, u, v);
                if rc < best_rc {
                    best_rc = rc;
                    best = Some((i, j));
                }
            }
        }
        best
    }

    fn first_improving(&self, u: &[f64], v: &[f64], tol: f64) -> Option<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| (0..self.m).map(move |j| (i, j)))
            .find(|&(i, j)| !self.in_basis[i * self.m + j] && self.reduced_cost(i, j, u, v) < -tol)
    }

    /// Tree path from column `j` to row `i`, as basis indices in walk order.
    fn cycle_path(&self, i: usize, j: usize, adj: &[Vec<usize>]) -> Result<Vec<usize>> {
        let nodes = self.n + self.m;
        let mut via = vec![usize::MAX; nodes];
        let mut visited = vec![false; nodes];
        let mut stack = vec![i];
        visited[i] = true;
        let goal = self.n + j;
        while let Some(node) = stack.pop() {
            if node == goal {
                break;
            }
            for &b in &adj[node] {
                let c = self.basis[b];
                let next = if node < self.n { self.n + c.j } else { c.i };
                if !visited[next] {
                    visited[next] = true;
                    via[next] = b;
                    stack.push(next);
                }
            }
        }
        if !visited[goal] {
            return Err(Error::Solver("transport basis is not a spanning tree".into()));
        }
        let mut path = Vec::new();
        let mut node = goal;
        while node != i {
            let b = via[node];
            path.push(b);
            let c = self.basis[b];
            node = if node < self.n { self.n + c.j } else { c.i };
        }
        Ok(path)
    }

    /// Brings `(i, j)` into the basis; returns the step length θ.
    fn pivot(&mut self, i: usize, j: usize, adj: &[Vec<usize>]) -> Result<f64> {
        let path = self.cycle_path(i, j, adj)?;
        // Walking from column j, the first cell loses flow, then signs alternate.
        let mut leaving = None;
        let mut theta = f64::INFINITY;
        for &b in path.iter().step_by(2) {
            let c = self.basis[b];
            let better = match leaving {
                None => true,
                Some(l) => {
                    let lc: BasicCell = self.basis[l];
                    c.flow < theta || (c.flow == theta && (c.i, c.j) < (lc.i, lc.j))
                }
            };
            if better {
                theta = c.flow;
                leaving = Some(b);
            }
        }
        let leaving = leaving.ok_or_else(|| Error::Solver("empty pivot cycle".into()))?;
        let theta = theta.max(0.0);

        for (k, &b) in path.iter().enumerate() {
            let cell = &mut self.basis[b];
            if k % 2 == 0 {
                cell.flow = (cell.flow - theta).max(0.0);
            } else {
                cell.flow += theta;
            }
        }
        let old = self.basis[leaving];
        self.in_basis[old.i * self.m + old.j] = false;
        self.in_basis[i * self.m + j] = true;
        self.basis[leaving] = BasicCell { i, j, flow: theta };
        Ok(theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::WeightedPoint;

    fn measure(dim: usize, points: &[(&[f64], f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(dim, points.iter().map(|(x, w)| WeightedPoint::new(x.to_vec(), *w)).collect()).unwrap()
    }

    #[test]
    fn northwest_basis_is_a_tree() {
        let cost = vec![0.0; 12];
        let t = Tableau::northwest(&cost, &[0.5, 0.25, 0.25], &[0.25, 0.25, 0.25, 0.25]);
        assert_eq!(t.basis.len(), 6);
        let adj = t.adjacency();
        let (u, v) = t.potentials(&adj);
        assert!(u.iter().chain(&v).all(|x| !x.is_nan()));
    }

    #[test]
    fn matches_one_dimensional_sweep() {
        let mu = measure(1, &[(&[0.0], 0.25), (&[4.0], 0.75)]);
        let nu = measure(1, &[(&[1.0], 0.5), (&[3.0], 0.5)]);
        let r = transport_lp(&mu, &nu).unwrap();
        assert!((r.cost - 3.0).abs() < 1e-14);
        assert!(r.coupling.marginal_residual() < 1e-15);
    }

    #[test]
    fn degenerate_square_instance() {
        // Uniform 4-point measures create many zero-flow basic cells.
        let pts: [&[f64]; 4] = [&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]];
        let mu = measure(2, &pts.iter().map(|p| (*p, 0.25)).collect::<Vec<_>>());
        let shifted: Vec<Vec<f64>> = pts.iter().map(|p| vec![p[1] + 0.1, p[0] - 0.2]).collect();
        let nu = measure(2, &shifted.iter().map(|p| (p.as_slice(), 0.25)).collect::<Vec<_>>());
        let r = transport_lp(&mu, &nu).unwrap();
        let brute = super::super::brute_force_w2(&mu, &nu).unwrap();
        assert!((r.cost - brute.cost).abs() < 1e-12);
        assert!(r.coupling.entries.len() <= 7);
    }

    #[test]
    fn unbalanced_sizes() {
        let mu = measure(2, &[(&[0.0, 0.0], 0.1), (&[1.0, 2.0], 0.6), (&[-1.0, 0.5], 0.3)]);
        let nu = measure(2, &[(&[0.5, 0.5], 0.5), (&[-0.5, 1.0], 0.5)]);
        let r = transport_lp(&mu, &nu).unwrap();
        assert!(r.coupling.marginal_residual() < 1e-12);
        assert!(r.coupling.entries.len() <= 4);
    }
}
