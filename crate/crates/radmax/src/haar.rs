//! Haar decompositions on the unit cube.
//!
//! The Lebesgue case uses the tensor Haar basis: for each cube `Q` and
//! `θ ∈ {0,1}^n \ {0}`, the function `h_Q^θ` is supported in `Q`, has
//! zero integral, and satisfies `|h_Q^θ| = |Q|^{-1/2}` on `Q`. The sign
//! on the child with offset bits `δ` is `(-1)^{popcount(θ & δ)}`; bit
//! `n-1-i` of both `θ` and `δ` belongs to coordinate `i`, matching the
//! Morton layout.
//!
//! For a general measure the decomposition is kept in martingale form
//! `f = A_{N₀}f + Σ_k (A_{k+1}f − A_kf)`, stored as full difference
//! fields rather than an orthonormalized adapted basis.

use std::sync::Arc;

use crate::dyadic::{Cube, DyadicTree};
use crate::error::Result;
use crate::space::NormedSpace;
use crate::stepfn::StepFunction;

/// Tensor Haar coefficients of a step function, plus the root average.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarCoeffs {
    tree: Arc<DyadicTree>,
    space: NormedSpace,
    /// Lebesgue average over the root.
    level0: Vec<f64>,
    /// `coeffs[k]` holds, per level-`k` cube and per `θ ∈ 1..2^n`, a
    /// `d`-vector: index `(cube·(2^n − 1) + θ − 1)·d`.
    coeffs: Vec<Vec<f64>>,
}

fn haar_sign(theta: usize, child: usize) -> f64 {
    if (theta & child).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl HaarCoeffs {
    pub fn zero(tree: Arc<DyadicTree>, space: NormedSpace) -> Self {
        let d = space.dim();
        let fan = 1usize << tree.dim();
        let coeffs = (0..tree.depth())
            .map(|k| vec![0.0; tree.cubes_at(k) * (fan - 1) * d])
            .collect();
        HaarCoeffs {
            tree,
            space,
            level0: vec![0.0; d],
            coeffs,
        }
    }

    pub fn tree(&self) -> &Arc<DyadicTree> {
        &self.tree
    }

    pub fn space(&self) -> &NormedSpace {
        &self.space
    }

    pub fn level0(&self) -> &[f64] {
        &self.level0
    }

    pub fn set_level0(&mut self, v: &[f64]) {
        self.level0.copy_from_slice(v);
    }

    /// `⟨f, h_Q^θ⟩` for the level-`k` cube with Morton index `i`,
    /// `θ ∈ 1..2^n`.
    pub fn coeff(&self, level: usize, index: usize, theta: usize) -> &[f64] {
        let d = self.space.dim();
        let fan = 1usize << self.tree.dim();
        debug_assert!(theta >= 1 && theta < fan);
        let base = (index * (fan - 1) + theta - 1) * d;
        &self.coeffs[level][base..base + d]
    }

    pub fn coeff_mut(&mut self, level: usize, index: usize, theta: usize) -> &mut [f64] {
        let d = self.space.dim();
        let fan = 1usize << self.tree.dim();
        debug_assert!(theta >= 1 && theta < fan);
        let base = (index * (fan - 1) + theta - 1) * d;
        &mut self.coeffs[level][base..base + d]
    }

    /// Iterates `(level, cube, θ)` for all stored coefficients.
    pub fn keys(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let fan = 1usize << self.tree.dim();
        (0..self.tree.depth()).flat_map(move |k| {
            (0..self.tree.cubes_at(k)).flat_map(move |i| (1..fan).map(move |t| (k, i, t)))
        })
    }
}

/// Lebesgue tensor Haar coefficients of `f`.
pub fn haar_decompose(f: &StepFunction) -> HaarCoeffs {
    let tree = f.tree().clone();
    let d = f.dim();
    let n = tree.dim();
    let fan = 1usize << n;
    let depth = tree.depth();
    // Lebesgue integrals per cube, bottom-up
    let leaf_vol = tree.cube_volume(depth);
    let mut sums: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
    sums[depth] = f.values().iter().map(|&v| v * leaf_vol).collect();
    for k in (0..depth).rev() {
        let mut up = vec![0.0; tree.cubes_at(k) * d];
        for cube in 0..tree.cubes_at(k) {
            for c in 0..fan {
                for i in 0..d {
                    up[cube * d + i] += sums[k + 1][((cube << n) + c) * d + i];
                }
            }
        }
        sums[k] = up;
    }
    let mut out = HaarCoeffs::zero(tree.clone(), *f.space());
    for i in 0..d {
        out.level0[i] = sums[0][i]; // root volume is 1
    }
    for k in 0..depth {
        let scale = 1.0 / tree.cube_volume(k).sqrt(); // |Q|^{-1/2}
        for cube in 0..tree.cubes_at(k) {
            for theta in 1..fan {
                let mut acc = vec![0.0; d];
                for c in 0..fan {
                    let s = haar_sign(theta, c);
                    for i in 0..d {
                        acc[i] += s * sums[k + 1][((cube << n) + c) * d + i];
                    }
                }
                let slot = out.coeff_mut(k, cube, theta);
                for i in 0..d {
                    slot[i] = scale * acc[i];
                }
            }
        }
    }
    out
}

/// Rebuilds the step function from its tensor Haar coefficients.
pub fn haar_reconstruct(coeffs: &HaarCoeffs) -> StepFunction {
    let tree = coeffs.tree.clone();
    let d = coeffs.space.dim();
    let n = tree.dim();
    let fan = 1usize << n;
    let depth = tree.depth();
    let mut cur = vec![coeffs.level0.clone()];
    for k in 0..depth {
        let scale = 1.0 / tree.cube_volume(k).sqrt();
        let mut next = vec![vec![0.0; d]; tree.cubes_at(k + 1)];
        for (cube, base) in cur.iter().enumerate() {
            for c in 0..fan {
                let child = (cube << n) + c;
                let slot = &mut next[child];
                slot.copy_from_slice(base);
                for theta in 1..fan {
                    let s = haar_sign(theta, c) * scale;
                    let co = coeffs.coeff(k, cube, theta);
                    for i in 0..d {
                        slot[i] += s * co[i];
                    }
                }
            }
        }
        cur = next;
    }
    let mut values = Vec::with_capacity(tree.leaf_count() * d);
    for leaf in cur {
        values.extend_from_slice(&leaf);
    }
    StepFunction::new(tree, coeffs.space, values).unwrap()
}

/// The single Haar function `h_Q^θ` as a scalar step function.
pub fn haar_function(tree: &Arc<DyadicTree>, cube: &Cube, theta: usize) -> Result<StepFunction> {
    let n = tree.dim();
    let fan = 1usize << n;
    assert!(theta >= 1 && theta < fan, "theta must be in 1..2^n");
    assert!(cube.level() < tree.depth(), "cube must be above the leaves");
    let scale = 1.0 / cube.volume().sqrt();
    let mut values = vec![0.0; tree.leaf_count()];
    let k = cube.level();
    let idx = cube.morton() as usize;
    for c in 0..fan {
        let child = (idx << n) + c;
        let s = haar_sign(theta, c) * scale;
        for leaf in tree.leaf_range(k + 1, child) {
            values[leaf] = s;
        }
    }
    StepFunction::scalar(tree.clone(), values)
}

/// Martingale-difference decomposition adapted to the tree's measure:
/// `f = A_{N₀}f + Σ_{k=N₀}^{N-1} (A_{k+1}f − A_kf)`.
#[derive(Debug, Clone)]
pub struct MartingaleDecomposition {
    pub base_level: usize,
    pub base: StepFunction,
    pub diffs: Vec<StepFunction>,
}

pub fn martingale_decompose(f: &StepFunction, base_level: usize) -> MartingaleDecomposition {
    assert!(base_level <= f.tree().depth());
    let base = f.averaging_operator(base_level);
    let mut diffs = Vec::new();
    let mut prev = base.clone();
    for k in base_level..f.tree().depth() {
        let next = f.averaging_operator(k + 1);
        diffs.push(next.sub(&prev));
        prev = next;
    }
    MartingaleDecomposition {
        base_level,
        base,
        diffs,
    }
}

pub fn martingale_reconstruct(parts: &MartingaleDecomposition) -> StepFunction {
    let mut acc = parts.base.clone();
    for dk in &parts.diffs {
        acc = acc.add(dk);
    }
    acc
}
