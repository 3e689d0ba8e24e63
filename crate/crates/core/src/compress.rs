//! Support compression for residual laws.
//!
//! Each exact step multiplies the residual support by roughly the number of
//! atoms, so long decompositions need bounded supports. Neighbouring points
//! (lexicographic order) are merged greedily by smallest Ward cost: merging
//! clusters of masses `a`, `b` at distance `d` replaces them by their
//! mass-weighted centroid and lowers the second moment by `ab/(a+b)·d²`. The
//! mean is preserved, so centered laws stay centered, and the second-moment
//! loss is returned so callers can account for it exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::Result;
use crate::measure::{DiscreteMeasure, Vector, WeightedPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct Compressed {
    pub law: DiscreteMeasure,
    /// Second-moment loss, Σ wᵢ|xᵢ|² before minus after.
    pub loss: f64,
    /// For each input point, its index in `law`.
    pub map: Vec<usize>,
}

struct Candidate {
    cost: f64,
    left: usize,
    version: (u32, u32),
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // Reversed: BinaryHeap is a max-heap and we want the cheapest merge.
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then(other.left.cmp(&self.left))
    }
}

struct Cluster {
    mass: f64,
    centroid: Vec<f64>,
    prev: Option<usize>,
    next: Option<usize>,
    alive: bool,
    version: u32,
}

fn ward_cost(a: &Cluster, b: &Cluster) -> f64 {
    let d2: f64 = a.centroid.iter().zip(&b.centroid).map(|(x, y)| (x - y) * (x - y)).sum();
    a.mass * b.mass / (a.mass + b.mass) * d2
}

/// Merges neighbouring points until at most `target` remain or the next merge
/// would push the total loss above `budget`. `law` must be canonical.
pub fn compress(law: &DiscreteMeasure, target: usize, budget: f64) -> Result<Compressed> {
    let n = law.len();
    let identity = || Compressed { law: law.clone(), loss: 0.0, map: (0..n).collect() };
    if n <= target.max(1) {
        return Ok(identity());
    }

    let mut clusters: Vec<Cluster> = law
        .points()
        .iter()
        .enumerate()
        .map(|(k, p)| Cluster {
            mass: p.w,
            centroid: p.x.0.clone(),
            prev: k.checked_sub(1),
            next: (k + 1 < n).then_some(k + 1),
            alive: true,
            version: 0,
        })
        .collect();
    let mut owner: Vec<usize> = (0..n).collect();
    let mut heap = BinaryHeap::with_capacity(n);
    for k in 0..n - 1 {
        heap.push(Candidate { cost: ward_cost(&clusters[k], &clusters[k + 1]), left: k, version: (0, 0) });
    }

    let mut alive = n;
    let mut loss = 0.0;
    while alive > target.max(1) {
        let Some(c) = heap.pop() else { break };
        let left = c.left;
        let Some(right) = clusters[left].next else { continue };
        if !clusters[left].alive || (clusters[left].version, clusters[right].version) != c.version {
            continue;
        }
        if loss + c.cost > budget {
            break;
        }
        loss += c.cost;
        let (lm, rm) = (clusters[left].mass, clusters[right].mass);
        let merged: Vec<f64> = clusters[left]
            .centroid
            .iter()
            .zip(&clusters[right].centroid)
            .map(|(a, b)| (lm * a + rm * b) / (lm + rm))
            .collect();
        let after = clusters[right].next;
        clusters[right].alive = false;
        owner[right] = left;
        let l = &mut clusters[left];
        l.mass = lm + rm;
        l.centroid = merged;
        l.next = after;
        l.version += 1;
        if let Some(a) = after {
            clusters[a].prev = Some(left);
        }
        alive -= 1;

        if let Some(p) = clusters[left].prev {
            let cost = ward_cost(&clusters[p], &clusters[left]);
            heap.push(Candidate { cost, left: p, version: (clusters[p].version, clusters[left].version) });
        }
        if let Some(a) = after {
            let cost = ward_cost(&clusters[left], &clusters[a]);
            heap.push(Candidate { cost, left, version: (clusters[left].version, clusters[a].version) });
        }
    }
    if alive == n {
        return Ok(identity());
    }

    // Clusters only absorb their right neighbour, so owners point leftwards.
    let mut root: Vec<usize> = (0..n).collect();
    for k in 0..n {
        root[k] = if owner[k] == k { k } else { root[owner[k]] };
    }
    let survivors: Vec<usize> = (0..n).filter(|&k| clusters[k].alive).collect();
    let points = survivors
        .iter()
        .map(|&k| WeightedPoint { x: Vector(clusters[k].centroid.clone()), w: clusters[k].mass })
        .collect();
    let raw = DiscreteMeasure::from_parts(law.dim(), points, "compressed law")?;
    let (canonical, canon_map) = raw.canonicalize_with_map()?;
    let mut slot = vec![usize::MAX; n];
    for (s, &k) in survivors.iter().enumerate() {
        slot[k] = s;
    }
    let map = root
        .iter()
        .map(|&r| canon_map[slot[r]].expect("compressed clusters carry positive mass"))
        .collect();
    Ok(Compressed { law: canonical, loss, map })
}
