//! Maximal operators on step functions: the dyadic maximal function `M`
//! and its `q`-mean variants, the Rademacher maximal function as a
//! per-leaf two-sided estimate, the dyadic square function, and the
//! paraproduct.
//!
//! Rademacher estimates are computed once per cube over the root-first
//! chain of averages, with the parent's witness passed down as a warm
//! start. Leaf values of that per-cube field are the RMF field, so
//! good-λ containment and the BMO sandwich hold by construction at the
//! certificate level.

use std::sync::Arc;

use crate::dyadic::DyadicTree;
use crate::error::Result;
use crate::haar::{haar_decompose, haar_reconstruct, HaarCoeffs};
use crate::rademacher::{self, EstimatorConfig, Selection};
use crate::stepfn::StepFunction;

/// Per-leaf lower and upper values of a maximal-type operator, plus the
/// configuration fingerprint that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxField {
    pub tree: Arc<DyadicTree>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub fingerprint: String,
}

impl MaxField {
    pub fn lower_fn(&self) -> StepFunction {
        StepFunction::scalar(self.tree.clone(), self.lower.clone()).unwrap()
    }

    pub fn upper_fn(&self) -> StepFunction {
        StepFunction::scalar(self.tree.clone(), self.upper.clone()).unwrap()
    }
}

/// Chain estimates for every cube at levels ≥ `min_level`: the R-bound
/// estimate of `{⟨f⟩_R : R ⊇ Q, level(R) ≥ min_level}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainField {
    pub tree: Arc<DyadicTree>,
    pub min_level: usize,
    /// `lower[k - min_level][i]` for the level-`k` cube with Morton index `i`.
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
}

impl ChainField {
    pub fn lower_at(&self, level: usize, index: usize) -> f64 {
        self.lower[level - self.min_level][index]
    }

    pub fn upper_at(&self, level: usize, index: usize) -> f64 {
        self.upper[level - self.min_level][index]
    }
}

/// The dyadic maximal function. With `q = None` this is
/// `Mf(x) = sup_{Q ∋ x} ‖⟨f⟩_Q‖`; with `q = Some(q)` it is the `q`-mean
/// `M_q f(x) = sup_{Q ∋ x} (⟨‖f‖^q⟩_Q)^{1/q}`.
pub fn dyadic_maximal(f: &StepFunction, q: Option<f64>) -> StepFunction {
    let tree = f.tree().clone();
    let mut field = vec![0.0f64; tree.leaf_count()];
    match q {
        None => {
            let d = f.dim();
            let mut avg = vec![0.0; d];
            for level in 0..=tree.depth() {
                for cube in 0..tree.cubes_at(level) {
                    f.average_at(level, cube, &mut avg);
                    let nv = f.space().norm(&avg);
                    for leaf in tree.leaf_range(level, cube) {
                        if nv > field[leaf] {
                            field[leaf] = nv;
                        }
                    }
                }
            }
        }
        Some(q) => {
            assert!(q >= 1.0 && q.is_finite(), "q must be in [1, inf)");
            let powers: Vec<f64> = (0..tree.leaf_count())
                .map(|leaf| f.space().norm(f.value(leaf)).powf(q))
                .collect();
            let g = StepFunction::scalar(tree.clone(), powers).unwrap();
            for level in 0..=tree.depth() {
                for cube in 0..tree.cubes_at(level) {
                    let mass = tree.cube_mass(level, cube);
                    if mass == 0.0 {
                        continue;
                    }
                    let mean = g.integral(level, cube)[0] / mass;
                    let nv = mean.powf(1.0 / q);
                    for leaf in tree.leaf_range(level, cube) {
                        if nv > field[leaf] {
                            field[leaf] = nv;
                        }
                    }
                }
            }
        }
    }
    StepFunction::scalar(tree, field).unwrap()
}

fn cube_seed(base: u64, depth: usize, level: usize, index: usize) -> u64 {
    base ^ (index as u64) ^ ((depth - level) as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Rademacher estimates over ancestor chains for every cube at levels in
/// `[min_level, N]`, root-first, warm-starting each child with its
/// parent's witness. Chain estimates are therefore nondecreasing down
/// every chain.
pub fn chain_estimates(
    f: &StepFunction,
    cfg: &EstimatorConfig,
    min_level: usize,
) -> Result<ChainField> {
    let tree = f.tree().clone();
    let depth = tree.depth();
    assert!(min_level <= depth, "min_level beyond tree depth");
    let mut out = ChainField {
        tree: tree.clone(),
        min_level,
        lower: (min_level..=depth).map(|k| vec![0.0; tree.cubes_at(k)]).collect(),
        upper: (min_level..=depth).map(|k| vec![0.0; tree.cubes_at(k)]).collect(),
    };
    let mut chain: Vec<Vec<f64>> = Vec::with_capacity(depth - min_level + 1);
    for top in 0..tree.cubes_at(min_level) {
        descend(f, cfg, min_level, min_level, top, &mut chain, None, &mut out)?;
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn descend(
    f: &StepFunction,
    cfg: &EstimatorConfig,
    min_level: usize,
    level: usize,
    index: usize,
    chain: &mut Vec<Vec<f64>>,
    warm: Option<&Selection>,
    out: &mut ChainField,
) -> Result<()> {
    let tree = f.tree();
    let depth = tree.depth();
    let mut avg = vec![0.0; f.dim()];
    f.average_at(level, index, &mut avg);
    chain.push(avg);
    let local = EstimatorConfig {
        seed: cube_seed(cfg.seed, depth, level, index),
        ..cfg.clone()
    };
    let est = rademacher::estimate(f.space(), chain, &local, warm, true)?;
    out.lower[level - min_level][index] = est.lower;
    out.upper[level - min_level][index] = est.upper;
    if level < depth {
        let n = tree.dim();
        for c in 0..(1usize << n) {
            descend(
                f,
                cfg,
                min_level,
                level + 1,
                (index << n) + c,
                chain,
                Some(&est.lower_witness),
                out,
            )?;
        }
    }
    chain.pop();
    Ok(())
}

/// The Rademacher maximal function of `f` as a per-leaf estimate over the
/// chain `{⟨f⟩_Q : Q ∋ x, level(Q) ≥ min_level}`.
pub fn rmf(f: &StepFunction, cfg: &EstimatorConfig, min_level: usize) -> Result<MaxField> {
    let field = chain_estimates(f, cfg, min_level)?;
    Ok(field_from_chain(&field, cfg))
}

/// Leaf slice of a chain field, packaged as a [`MaxField`].
pub fn field_from_chain(field: &ChainField, cfg: &EstimatorConfig) -> MaxField {
    let depth = field.tree.depth();
    MaxField {
        tree: field.tree.clone(),
        lower: field.lower[depth - field.min_level].clone(),
        upper: field.upper[depth - field.min_level].clone(),
        fingerprint: cfg.fingerprint(),
    }
}

/// Root-first chain of averages of `f` along the ancestors of a leaf.
pub fn chain_averages(f: &StepFunction, leaf: usize, min_level: usize) -> Vec<Vec<f64>> {
    let tree = f.tree();
    let mut out = Vec::new();
    for level in min_level..=tree.depth() {
        let mut avg = vec![0.0; f.dim()];
        f.average_at(level, tree.ancestor_index(leaf, level), &mut avg);
        out.push(avg);
    }
    out
}

/// The dyadic square function `Sf` as a per-leaf two-sided estimate.
///
/// For scalar functions and for `p = 2` the square expands exactly into
/// `Σ |⟨f,h⟩ h(x)|²`; otherwise the randomized sum is enumerated exactly
/// up to the sign-pattern cap, and beyond it the largest terms give a
/// certified lower bound while the sequence sum bounds from above.
pub fn square_function(f: &StepFunction, cfg: &EstimatorConfig) -> Result<MaxField> {
    let tree = f.tree().clone();
    let n = tree.dim();
    let d = f.dim();
    let depth = tree.depth();
    let fan = 1usize << n;
    let hc = haar_decompose(f);
    let space = *f.space();
    let scalar_like = d == 1 || space.is_hilbert();
    let mut lower = vec![0.0f64; tree.leaf_count()];
    let mut upper = vec![0.0f64; tree.leaf_count()];
    let mut term = vec![0.0; d];
    for leaf in 0..tree.leaf_count() {
        let mut terms: Vec<Vec<f64>> = Vec::with_capacity(depth * (fan - 1));
        for k in 0..depth {
            let cube = tree.ancestor_index(leaf, k);
            let child = tree.ancestor_index(leaf, k + 1) & (fan - 1);
            let scale = 1.0 / tree.cube_volume(k).sqrt();
            for theta in 1..fan {
                let sign = if (theta & child).count_ones() % 2 == 0 {
                    scale
                } else {
                    -scale
                };
                let co = hc.coeff(k, cube, theta);
                for i in 0..d {
                    term[i] = sign * co[i];
                }
                terms.push(term.clone());
            }
        }
        if terms.is_empty() {
            continue;
        }
        if scalar_like {
            let mut acc = 0.0;
            for t in &terms {
                for &x in t {
                    acc += x * x;
                }
            }
            let v = acc.sqrt();
            lower[leaf] = v;
            upper[leaf] = v;
        } else if terms.len() as u32 <= cfg.enum_cap {
            let ones = vec![1.0; terms.len()];
            let v = rademacher::rademacher_norm(&space, &terms, &ones, cfg.enum_cap)?;
            lower[leaf] = v;
            upper[leaf] = v;
        } else {
            // certified bracket: exact enumeration of the largest terms
            // from below, sequence sum from above
            let mut order: Vec<usize> = (0..terms.len()).collect();
            order.sort_by(|&a, &b| {
                space
                    .norm(&terms[b])
                    .total_cmp(&space.norm(&terms[a]))
                    .then(a.cmp(&b))
            });
            let take = cfg.enum_cap as usize;
            let sub: Vec<Vec<f64>> = order[..take].iter().map(|&i| terms[i].clone()).collect();
            let ones = vec![1.0; sub.len()];
            lower[leaf] = rademacher::rademacher_norm(&space, &sub, &ones, cfg.enum_cap)?;
            upper[leaf] = terms.iter().map(|t| space.norm(t)).sum();
        }
    }
    Ok(MaxField {
        tree,
        lower,
        upper,
        fingerprint: cfg.fingerprint(),
    })
}

/// Lebesgue averages of `f` per cube: `lebesgue[k][i·d..]`.
fn lebesgue_averages(f: &StepFunction) -> Vec<Vec<f64>> {
    let tree = f.tree();
    let n = tree.dim();
    let d = f.dim();
    let depth = tree.depth();
    let mut sums: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
    sums[depth] = f.values().to_vec();
    for k in (0..depth).rev() {
        let mut up = vec![0.0; tree.cubes_at(k) * d];
        for cube in 0..tree.cubes_at(k) {
            for c in 0..(1usize << n) {
                let child = (cube << n) + c;
                for i in 0..d {
                    up[cube * d + i] += sums[k + 1][child * d + i];
                }
            }
        }
        // children carry equal volume, so the mean is the plain average
        for x in up.iter_mut() {
            *x /= (1usize << n) as f64;
        }
        sums[k] = up;
    }
    sums
}

/// The paraproduct `Π_b f = Σ_{Q,θ} ⟨f⟩_Q ⟨b, h_Q^θ⟩ h_Q^θ` for a scalar
/// symbol `b`. Averages and Haar coefficients are Lebesgue ones.
pub fn paraproduct(b: &StepFunction, f: &StepFunction) -> StepFunction {
    assert_eq!(b.dim(), 1, "paraproduct symbol must be scalar");
    assert!(Arc::ptr_eq(b.tree(), f.tree()) || b.tree() == f.tree());
    let tree = f.tree().clone();
    let n = tree.dim();
    let fan = 1usize << n;
    let d = f.dim();
    let bc = haar_decompose(b);
    let favg = lebesgue_averages(f);
    let mut out = HaarCoeffs::zero(tree.clone(), *f.space());
    for k in 0..tree.depth() {
        for cube in 0..tree.cubes_at(k) {
            for theta in 1..fan {
                let bco = bc.coeff(k, cube, theta)[0];
                let slot = out.coeff_mut(k, cube, theta);
                for i in 0..d {
                    slot[i] = favg[k][cube * d + i] * bco;
                }
            }
        }
    }
    haar_reconstruct(&out)
}
