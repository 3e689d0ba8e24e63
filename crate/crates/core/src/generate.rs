//! Seeded synthetic instances.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), whose output stream is fixed
//! by its algorithm. Uniform and Gaussian variates are derived here from raw
//! 64-bit words (53-bit mantissa fill, Box–Muller) so generated instances do
//! not depend on the sampling code of any particular `rand` release.

use std::fmt;
use std::str::FromStr;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measure::{Atom, ConditionedVariable, DiscreteMeasure, WeightedPoint};

pub(crate) struct SeededRng(ChaCha8Rng);

impl SeededRng {
    pub(crate) fn new(seed: u64) -> Self {
        SeededRng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform on [0, 1).
    pub(crate) fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on [lo, hi).
    pub(crate) fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Standard normal by Box–Muller (one draw per call).
    pub(crate) fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    /// Atom k holds `points` equally spaced values of k·t·(1,…,1), t ∈ [−1, 1].
    ScaledSign,
    /// Gaussian samples around a random center per atom, then centered.
    GaussMixtureSampled,
    /// Atom k is uniform on ±e_(k mod m).
    Cross,
    /// Uniform points on [−1, 1]ᵐ with random masses, then centered.
    RandomUniform,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 4] =
        [GeneratorKind::ScaledSign, GeneratorKind::GaussMixtureSampled, GeneratorKind::Cross, GeneratorKind::RandomUniform];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::ScaledSign => "scaled-sign",
            GeneratorKind::GaussMixtureSampled => "gauss-mixture-sampled",
            GeneratorKind::Cross => "cross",
            GeneratorKind::RandomUniform => "random-uniform",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        GeneratorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown generator kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub dim: usize,
    pub atoms: usize,
    pub points: usize,
    pub seed: u64,
}

pub fn generate(spec: &GeneratorSpec) -> Result<ConditionedVariable> {
    if spec.dim < 1 || spec.atoms < 1 || spec.points < 1 {
        return Err(Error::Input(format!(
            "generator counts must be at least 1 (dim {}, atoms {}, points {})",
            spec.dim, spec.atoms, spec.points
        )));
    }
    let mut rng = SeededRng::new(spec.seed);
    match spec.kind {
        GeneratorKind::ScaledSign => scaled_sign(spec),
        GeneratorKind::Cross => cross(spec),
        GeneratorKind::GaussMixtureSampled => {
            let weights = random_weights(&mut rng, spec.atoms);
            let laws = (0..spec.atoms)
                .map(|_| {
                    let center: Vec<f64> = (0..spec.dim).map(|_| rng.normal()).collect();
                    let spread = rng.range(0.5, 2.0);
                    let pts = (0..spec.points)
                        .map(|_| {
                            let x: Vec<f64> = center.iter().map(|c| c + spread * rng.normal()).collect();
                            WeightedPoint::new(x, 1.0 / spec.points as f64)
                        })
                        .collect();
                    DiscreteMeasure::new(spec.dim, pts)
                })
                .collect::<Result<Vec<_>>>()?;
            centered(spec.dim, weights, laws)
        }
        GeneratorKind::RandomUniform => {
            let weights = random_weights(&mut rng, spec.atoms);
            let laws = (0..spec.atoms)
                .map(|_| {
                    let raw: Vec<(Vec<f64>, f64)> = (0..spec.points)
                        .map(|_| ((0..spec.dim).map(|_| rng.range(-1.0, 1.0)).collect(), rng.range(0.5, 1.5)))
                        .collect();
                    let total: f64 = raw.iter().map(|p| p.1).sum();
                    DiscreteMeasure::new(spec.dim, raw.into_iter().map(|(x, w)| WeightedPoint::new(x, w / total)).collect())
                })
                .collect::<Result<Vec<_>>>()?;
            centered(spec.dim, weights, laws)
        }
    }
}

fn atom_id(k: usize) -> String {
    format!("a{}", k + 1)
}

fn random_weights(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.range(0.5, 1.5)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn centered(dim: usize, weights: Vec<f64>, laws: Vec<DiscreteMeasure>) -> Result<ConditionedVariable> {
    let atoms = weights
        .into_iter()
        .zip(laws)
        .enumerate()
        .map(|(k, (weight, law))| Atom { id: atom_id(k), weight, law })
        .collect();
    Ok(ConditionedVariable::new(dim, atoms)?.center()?.0)
}

fn scaled_sign(spec: &GeneratorSpec) -> Result<ConditionedVariable> {
    let p = spec.points;
    let atoms = (0..spec.atoms)
        .map(|k| {
            let scale = (k + 1) as f64;
            let pts = (0..p)
                .map(|i| {
                    let t = if p == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (p - 1) as f64 };
                    WeightedPoint::new(vec![scale * t; spec.dim], 1.0 / p as f64)
                })
                .collect();
            Ok(Atom { id: atom_id(k), weight: 1.0 / spec.atoms as f64, law: DiscreteMeasure::new(spec.dim, pts)? })
        })
        .collect::<Result<Vec<_>>>()?;
    ConditionedVariable::new(spec.dim, atoms)
}

fn cross(spec: &GeneratorSpec) -> Result<ConditionedVariable> {
    let atoms = (0..spec.atoms)
        .map(|k| {
            let mut e = vec![0.0; spec.dim];
            e[k % spec.dim] = 1.0;
            let neg: Vec<f64> = e.iter().map(|v| -v).collect();
            let law = DiscreteMeasure::uniform(spec.dim, vec![e.into(), neg.into()])?;
            Ok(Atom { id: atom_id(k), weight: 1.0 / spec.atoms as f64, law })
        })
        .collect::<Result<Vec<_>>>()?;
    ConditionedVariable::new(spec.dim, atoms)
}
