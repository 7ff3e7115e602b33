//! Dyadic Muckenhoupt weight diagnostics: the `A_p` characteristic, the
//! fair-share exponent ratio, and the self-improvement scan.
//!
//! A finite tree cannot witness `A_p` failure (every supremum over its
//! cubes is finite), so everything here reports characteristics to be
//! compared across depths, never membership booleans.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::stepfn::StepFunction;

/// A weight: positive scalar step function on positive-mass leaves.
#[derive(Debug, Clone)]
pub struct WeightFn {
    w: StepFunction,
}

impl WeightFn {
    pub fn new(w: StepFunction) -> Result<Self> {
        if w.dim() != 1 {
            return Err(Error::InvalidParameter("weights must be scalar".into()));
        }
        let tree = w.tree();
        for leaf in 0..tree.leaf_count() {
            if tree.leaf_mass()[leaf] > 0.0 && w.values()[leaf] <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "weight must be positive on positive-mass leaves, got {} at leaf {leaf}",
                    w.values()[leaf]
                )));
            }
        }
        Ok(WeightFn { w })
    }

    pub fn as_fn(&self) -> &StepFunction {
        &self.w
    }

    /// `w(E)` for a set of leaves: `Σ mass·w`.
    fn measure_leaves(&self, leaves: impl Iterator<Item = usize>) -> f64 {
        let tree = self.w.tree();
        leaves.map(|l| tree.leaf_mass()[l] * self.w.values()[l]).sum()
    }

    fn cube_measure(&self, level: usize, index: usize) -> f64 {
        self.w.integral(level, index)[0]
    }
}

/// The dyadic `A_p` characteristic
/// `sup_Q ⟨w⟩_Q (⟨w^{1-p'}⟩_Q)^{p-1}`, exact on the finite tree.
pub fn ap_characteristic(weight: &WeightFn, p: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "A_p requires p in (1, inf), got {p}"
        )));
    }
    let w = &weight.w;
    let tree = w.tree().clone();
    // conjugate-power weight w^{1-p'} = w^{-1/(p-1)}
    let exponent = -1.0 / (p - 1.0);
    let dual_values: Vec<f64> = (0..tree.leaf_count())
        .map(|l| {
            if tree.leaf_mass()[l] > 0.0 {
                w.values()[l].powf(exponent)
            } else {
                0.0
            }
        })
        .collect();
    let dual = StepFunction::scalar(tree.clone(), dual_values)?;
    let mut sup = 0.0f64;
    for level in 0..=tree.depth() {
        for i in 0..tree.cubes_at(level) {
            let mass = tree.cube_mass(level, i);
            if mass == 0.0 {
                continue;
            }
            let a = w.integral(level, i)[0] / mass;
            let b = dual.integral(level, i)[0] / mass;
            let c = a * b.powf(p - 1.0);
            if c > sup {
                sup = c;
            }
        }
    }
    Ok(sup)
}

/// One fair-share sample: `E ⊆ Q` a union of same-level descendants.
#[derive(Debug, Clone, Copy)]
pub struct FairShareSample {
    pub ratio: f64,
}

/// Max of `(w(E)/w(Q)) / (|E|/|Q|)^γ` over seeded random pairs `E ⊆ Q`,
/// with `E` a union of descendant cubes of `Q` at one level.
pub fn fair_share_sampled(weight: &WeightFn, gamma: f64, samples: usize, seed: u64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter("gamma must be positive".into()));
    }
    let tree = weight.w.tree().clone();
    if tree.depth() == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..samples {
        let q_level = rng.gen_range(0..tree.depth());
        let q_index = rng.gen_range(0..tree.cubes_at(q_level));
        if tree.cube_mass(q_level, q_index) == 0.0 || weight.cube_measure(q_level, q_index) == 0.0
        {
            continue;
        }
        let e_level = rng.gen_range((q_level + 1)..=tree.depth());
        let fan = 1usize << (tree.dim() * (e_level - q_level));
        let base = q_index << (tree.dim() * (e_level - q_level));
        let mut chosen = Vec::new();
        for j in 0..fan {
            if rng.gen_bool(0.5) {
                chosen.push(base + j);
            }
        }
        if chosen.is_empty() {
            continue;
        }
        if let Some(r) = fair_share_ratio_for(weight, gamma, q_level, q_index, e_level, &chosen) {
            best = best.max(r);
        }
    }
    Ok(best)
}

/// Exhaustive fair-share scan over every cube and every nonempty union of
/// same-level descendants; feasible only on small trees.
pub fn fair_share_exhaustive(weight: &WeightFn, gamma: f64, subset_cap: u128) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter("gamma must be positive".into()));
    }
    let tree = weight.w.tree().clone();
    // count subsets first
    let mut work: u128 = 0;
    for q_level in 0..tree.depth() {
        for e_level in (q_level + 1)..=tree.depth() {
            let fan = 1u128 << (tree.dim() * (e_level - q_level));
            work = work.saturating_add(
                (tree.cubes_at(q_level) as u128).saturating_mul(1u128 << fan.min(64)),
            );
        }
    }
    if work > subset_cap {
        return Err(Error::CapExceeded {
            what: "fair-share subset enumeration",
            required: work,
            cap: subset_cap,
        });
    }
    let mut best = 0.0f64;
    for q_level in 0..tree.depth() {
        for q_index in 0..tree.cubes_at(q_level) {
            if tree.cube_mass(q_level, q_index) == 0.0
                || weight.cube_measure(q_level, q_index) == 0.0
            {
                continue;
            }
            for e_level in (q_level + 1)..=tree.depth() {
                let fan = 1usize << (tree.dim() * (e_level - q_level));
                let base = q_index << (tree.dim() * (e_level - q_level));
                for mask in 1u64..(1u64 << fan) {
                    let chosen: Vec<usize> = (0..fan)
                        .filter(|j| (mask >> j) & 1 == 1)
                        .map(|j| base + j)
                        .collect();
                    if let Some(r) =
                        fair_share_ratio_for(weight, gamma, q_level, q_index, e_level, &chosen)
                    {
                        best = best.max(r);
                    }
                }
            }
        }
    }
    Ok(best)
}

fn fair_share_ratio_for(
    weight: &WeightFn,
    gamma: f64,
    q_level: usize,
    q_index: usize,
    e_level: usize,
    chosen: &[usize],
) -> Option<f64> {
    let tree = weight.w.tree();
    let wq = weight.cube_measure(q_level, q_index);
    if wq == 0.0 {
        return None;
    }
    let we: f64 = chosen.iter().map(|&i| weight.cube_measure(e_level, i)).sum();
    // Lebesgue proportions: same-level cubes have equal volume
    let frac = chosen.len() as f64 / (1usize << (tree.dim() * (e_level - q_level))) as f64;
    Some((we / wq) / frac.powf(gamma))
}

/// `A_{p/q}` characteristics across a grid of `q ∈ (1, p)`: the
/// self-improvement scan. Finite trees keep every entry finite, so the
/// table reports growth rather than a cutoff.
pub fn self_improvement_scan(
    weight: &WeightFn,
    p: f64,
    q_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if q_grid.is_empty() {
        return Err(Error::InvalidParameter("empty q grid".into()));
    }
    let mut out = Vec::with_capacity(q_grid.len());
    for &q in q_grid {
        if !(q > 1.0 && q < p) {
            return Err(Error::InvalidParameter(format!(
                "scan grid entries must lie in (1, p); got q={q} for p={p}"
            )));
        }
        out.push((q, ap_characteristic(weight, p / q)?));
    }
    Ok(out)
}
