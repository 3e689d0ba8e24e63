use super::{check_same_dim, PlanEntry, TransportResult};
use crate::error::{Error, Result};
use crate::measure::{dist_sq, DiscreteMeasure};

const MAX_BRUTE_SIZE: usize = 8;
const UNIFORM_TOL: f64 = 1e-12;

/// Exhaustive minimum over permutation plans for two uniform measures of the
/// same size (n ≤ 8). Ties keep the lexicographically first permutation.
pub fn brute_force_w2(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<TransportResult> {
    check_same_dim(mu, nu)?;
    let n = mu.len();
    if nu.len() != n {
        return Err(Error::Input(format!("brute force needs equal support sizes, got {n} and {}", nu.len())));
    }
    if n > MAX_BRUTE_SIZE {
        return Err(Error::Input(format!("brute force limited to {MAX_BRUTE_SIZE} points, got {n}")));
    }
    if !mu.is_uniform(UNIFORM_TOL) || !nu.is_uniform(UNIFORM_TOL) {
        return Err(Error::Input("brute force needs uniform masses".into()));
    }

    let cost: Vec<Vec<f64>> = mu
        .points()
        .iter()
        .map(|p| nu.points().iter().map(|q| dist_sq(&p.x, &q.x)).collect())
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = f64::INFINITY;
    loop {
        let c: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let w = 1.0 / n as f64;
    let entries = best.iter().enumerate().map(|(i, &j)| PlanEntry { i, j, mass: w }).collect();
    Ok(TransportResult::from_entries(mu, nu, entries))
}

/// Advances to the next permutation in lexicographic order.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(k) = (1..p.len()).rev().find(|&k| p[k - 1] < p[k]) else {
        return false;
    };
    let pivot = k - 1;
    let swap = (k..p.len()).rev().find(|&s| p[s] > p[pivot]).unwrap();
    p.swap(pivot, swap);
    p[k..].reverse();
    true
}
