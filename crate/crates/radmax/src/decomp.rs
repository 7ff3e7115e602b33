//! Constructive decompositions with checkable postconditions:
//! Calderón–Zygmund at a height, Gundy's three-part splitting for
//! general measures, and the atomic decomposition of mean-zero
//! functions.

use crate::dyadic::Cube;
use crate::error::{Error, Result};
use crate::stepfn::StepFunction;

/// Output of the Calderón–Zygmund decomposition at height `λ`:
/// `f = g + Σ_Q b_Q` with `b_Q = (f − ⟨f⟩_Q) 1_Q` over the maximal
/// stopping cubes where `⟨‖f‖⟩_Q > λ`.
#[derive(Debug, Clone)]
pub struct CzResult {
    pub lambda: f64,
    pub stopping: Vec<Cube>,
    pub good: StepFunction,
    pub bad: Vec<(Cube, StepFunction)>,
}

impl CzResult {
    /// Total mass of the union of stopping cubes.
    pub fn stopping_mass(&self, f: &StepFunction) -> f64 {
        self.stopping
            .iter()
            .map(|q| f.tree().cube_mass(q.level(), q.morton() as usize))
            .sum()
    }

    /// `g + Σ b_Q`, for checking the reconstruction.
    pub fn reassemble(&self) -> StepFunction {
        let mut acc = self.good.clone();
        for (_, b) in &self.bad {
            acc = acc.add(b);
        }
        acc
    }
}

pub fn calderon_zygmund(f: &StepFunction, lambda: f64) -> Result<CzResult> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "height must be positive, got {lambda}"
        )));
    }
    let tree = f.tree().clone();
    let norms = f.norm_field();
    let marked = |q: &Cube| {
        let (level, idx) = (q.level(), q.morton() as usize);
        let mass = tree.cube_mass(level, idx);
        mass > 0.0 && norms.integral(level, idx)[0] / mass > lambda
    };
    let stopping = tree.maximal_cubes(marked, 0);
    let d = f.dim();
    let mut good_values = f.values().to_vec();
    let mut bad = Vec::with_capacity(stopping.len());
    for q in &stopping {
        let avg = f.average(q);
        for leaf in tree.leaf_range(q.level(), q.morton() as usize) {
            good_values[leaf * d..(leaf + 1) * d].copy_from_slice(&avg);
        }
        bad.push((q.clone(), f.centered_restriction(q)));
    }
    let good = StepFunction::new(tree, *f.space(), good_values)?;
    Ok(CzResult {
        lambda,
        stopping,
        good,
        bad,
    })
}

/// Output of the Gundy decomposition `f = g + h + b` at height `λ` over
/// levels `N₀..N`.
///
/// The stopping time is the first level `k ≥ N₀` with `‖A_k f(x)‖ > λ`;
/// `b` carries the post-stopping differences `f − A_τ f`, `h` the
/// stopping-level jumps larger than `2λ`, and `g` the rest.
#[derive(Debug, Clone)]
pub struct GundyResult {
    pub lambda: f64,
    pub base_level: usize,
    pub good: StepFunction,
    pub jump: StepFunction,
    pub bad: StepFunction,
    /// Per leaf: the stopping level, or `None` when the process never
    /// crosses `λ`.
    pub stopping_level: Vec<Option<usize>>,
}

impl GundyResult {
    pub fn reassemble(&self) -> StepFunction {
        self.good.add(&self.jump).add(&self.bad)
    }

    /// Mass of `{τ < ∞}`, which contains `{Mb > 0}`.
    pub fn stopped_mass(&self) -> f64 {
        let tree = self.bad.tree();
        self.stopping_level
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_some())
            .map(|(leaf, _)| tree.leaf_mass()[leaf])
            .sum()
    }

    /// `‖A_{N₀}h‖₁ + Σ_k ‖A_{k+1}h − A_kh‖₁`: the martingale variation
    /// controlling the truncated maximal function of `h`.
    pub fn jump_variation(&self) -> f64 {
        let mut total = self
            .jump
            .averaging_operator(self.base_level)
            .lp_norm(1.0, None);
        for k in self.base_level..self.jump.tree().depth() {
            total += self.jump.martingale_difference(k).lp_norm(1.0, None);
        }
        total
    }
}

pub fn gundy(f: &StepFunction, lambda: f64, base_level: usize) -> Result<GundyResult> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "height must be positive, got {lambda}"
        )));
    }
    let tree = f.tree().clone();
    let depth = tree.depth();
    if base_level > depth {
        return Err(Error::InvalidParameter(format!(
            "base level {base_level} beyond tree depth {depth}"
        )));
    }
    let d = f.dim();
    let space = *f.space();
    let leaves = tree.leaf_count();
    let mut stopping_level = vec![None; leaves];
    let mut bad_values = vec![0.0; leaves * d];
    let mut jump_values = vec![0.0; leaves * d];
    let mut avg = vec![0.0; d];
    let mut prev = vec![0.0; d];
    for leaf in 0..leaves {
        let mut tau = None;
        prev.fill(0.0);
        for level in base_level..=depth {
            let idx = tree.ancestor_index(leaf, level);
            f.average_at(level, idx, &mut avg);
            if space.norm(&avg) > lambda {
                tau = Some(level);
                break;
            }
            prev.copy_from_slice(&avg);
        }
        stopping_level[leaf] = tau;
        if let Some(k) = tau {
            // b = f − A_τ f beyond the stopping level
            for i in 0..d {
                bad_values[leaf * d + i] = f.value(leaf)[i] - avg[i];
            }
            // the jump d_τ = A_τ f − A_{τ−1} f (whole average at the base)
            let jump: Vec<f64> = if k == base_level {
                avg.clone()
            } else {
                avg.iter().zip(&prev).map(|(a, p)| a - p).collect()
            };
            if space.norm(&jump) > 2.0 * lambda {
                jump_values[leaf * d..(leaf + 1) * d].copy_from_slice(&jump);
            }
        }
    }
    let bad = StepFunction::new(tree.clone(), space, bad_values)?;
    let jump = StepFunction::new(tree.clone(), space, jump_values)?;
    let good = f.sub(&bad).sub(&jump);
    Ok(GundyResult {
        lambda,
        base_level,
        good,
        jump,
        bad,
        stopping_level,
    })
}

/// One term of an atomic decomposition: a normalized `q`-atom and its
/// supporting cube.
#[derive(Debug, Clone)]
pub struct Atom {
    pub cube: Cube,
    pub fun: StepFunction,
}

#[derive(Debug, Clone)]
pub struct AtomicDecomposition {
    pub q: f64,
    /// `(λ_k, a_k)` with `f = Σ λ_k a_k`.
    pub terms: Vec<(f64, Atom)>,
}

impl AtomicDecomposition {
    pub fn coefficient_sum(&self) -> f64 {
        self.terms.iter().map(|(l, _)| l.abs()).sum()
    }

    pub fn reassemble(&self, like: &StepFunction) -> StepFunction {
        let mut acc = like.scale(0.0);
        for (l, atom) in &self.terms {
            acc = acc.add(&atom.fun.scale(*l));
        }
        acc
    }
}

/// Violations of the three atom conditions: `(support leak, mean norm,
/// q-norm excess)`; all three are ≈ 0 for a genuine atom.
pub fn atom_violations(a: &StepFunction, cube: &Cube, q: f64) -> (f64, f64, f64) {
    let tree = a.tree();
    let range = tree.leaf_range(cube.level(), cube.morton() as usize);
    let mut leak = 0.0f64;
    for leaf in 0..tree.leaf_count() {
        if !range.contains(&leaf) {
            leak = leak.max(a.space().norm(a.value(leaf)));
        }
    }
    let mean = a.space().norm(&a.total_integral());
    let inv_qp = if q.is_finite() { 1.0 - 1.0 / q } else { 1.0 };
    let bound = cube.volume().powf(-inv_qp);
    let excess = (a.lp_norm(q, None) - bound).max(0.0);
    (leak, mean, excess)
}

/// Atomic decomposition of a mean-zero function by iterated
/// Calderón–Zygmund stopping at geometric heights `2^j`. Exact at finite
/// depth: the pieces telescope back to `f`, and every piece normalizes
/// into a `q`-atom on its stopping cube.
pub fn atomic_decompose(f: &StepFunction, q: f64) -> Result<AtomicDecomposition> {
    if !(q > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "atoms require q in (1, inf], got {q}"
        )));
    }
    if !f.tree().is_uniform() {
        return Err(Error::InvalidParameter(
            "atomic decomposition requires the uniform tree".into(),
        ));
    }
    let mean = f.space().norm(&f.total_integral());
    let scale = f.lp_norm(f64::INFINITY, None);
    if mean > 1e-12 * (1.0 + scale) {
        return Err(Error::InvalidParameter(format!(
            "atomic decomposition requires zero mean, got {mean}"
        )));
    }
    let mut terms = Vec::new();
    if scale == 0.0 {
        return Ok(AtomicDecomposition { q, terms });
    }
    let norms = f.norm_field();
    let tree = f.tree().clone();
    // height range: 2^{j_lo} strictly below the root average (so the root
    // stops and the good part is the zero mean), 2^{j_hi} at or above the
    // largest cube average (so nothing stops)
    let root_avg = norms.integral(0, 0)[0] / tree.total_mass();
    let mut top = 0.0f64;
    for level in 0..=tree.depth() {
        for i in 0..tree.cubes_at(level) {
            top = top.max(norms.integral(level, i)[0] / tree.cube_mass(level, i));
        }
    }
    let j_lo = (root_avg.log2().floor() as i32) - 1;
    let mut j_hi = top.log2().ceil() as i32;
    if (2.0f64).powi(j_hi) < top {
        j_hi += 1;
    }
    let inv_qp = if q.is_finite() { 1.0 - 1.0 / q } else { 1.0 };
    let mut prev = calderon_zygmund(f, (2.0f64).powi(j_lo))?;
    for j in j_lo..j_hi {
        let next_good = if j + 1 == j_hi {
            f.clone()
        } else {
            calderon_zygmund(f, (2.0f64).powi(j + 1))?.good
        };
        let diff = next_good.sub(&prev.good);
        for cube in &prev.stopping {
            let d = f.dim();
            let mut values = vec![0.0; f.values().len()];
            for leaf in tree.leaf_range(cube.level(), cube.morton() as usize) {
                values[leaf * d..(leaf + 1) * d].copy_from_slice(diff.value(leaf));
            }
            let piece = StepFunction::new(tree.clone(), *f.space(), values)?;
            let qn = piece.lp_norm(q, None);
            if qn == 0.0 {
                continue;
            }
            let coeff = qn * cube.volume().powf(inv_qp);
            terms.push((
                coeff,
                Atom {
                    cube: cube.clone(),
                    fun: piece.scale(1.0 / coeff),
                },
            ));
        }
        if j + 1 < j_hi {
            prev = calderon_zygmund(f, (2.0f64).powi(j + 1))?;
        }
    }
    Ok(AtomicDecomposition { q, terms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{random_dyadic_tree, rational_values};
    use crate::dyadic::DyadicTree;
    use crate::haar::haar_function;
    use crate::maximal::{dyadic_maximal, rmf};
    use crate::rademacher::EstimatorConfig;
    use crate::space::NormedSpace;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn lp(p: f64, d: usize) -> NormedSpace {
        NormedSpace::lp(p, d).unwrap()
    }

    #[test]
    fn cz_worked_example() {
        // f = 4·1_{[0,1/4)} at depth 2, λ = 3/2: the averages along the
        // leftmost chain are 1, 2, 4, so the stopping family is {[0,1/2)}
        let tree = DyadicTree::uniform(1, 2);
        let f = StepFunction::scalar(tree.clone(), vec![4.0, 0.0, 0.0, 0.0]).unwrap();
        let cz = calderon_zygmund(&f, 1.5).unwrap();
        assert_eq!(cz.stopping, vec![Cube::new(1, 1, vec![0])]);
        assert_eq!(cz.good.values(), &[2.0, 2.0, 0.0, 0.0]);
        assert_eq!(cz.bad.len(), 1);
        assert_eq!(cz.bad[0].1.values(), &[2.0, -2.0, 0.0, 0.0]);
        assert_eq!(cz.stopping_mass(&f), 0.5);
        assert!(cz.stopping_mass(&f) <= f.lp_norm(1.0, None) / 1.5);
    }

    #[test]
    fn cz_with_no_stopping_cubes() {
        let tree = DyadicTree::uniform(1, 2);
        let f = StepFunction::scalar(tree, vec![0.5, -0.25, 0.25, 0.0]).unwrap();
        let cz = calderon_zygmund(&f, 10.0).unwrap();
        assert!(cz.stopping.is_empty());
        assert_eq!(cz.good.values(), f.values());
        assert!(cz.bad.is_empty());
    }

    #[test]
    fn cz_rejects_nonpositive_height() {
        let tree = DyadicTree::uniform(1, 1);
        let f = StepFunction::scalar(tree, vec![1.0, 0.0]).unwrap();
        assert!(calderon_zygmund(&f, 0.0).is_err());
        assert!(calderon_zygmund(&f, -1.0).is_err());
    }

    #[test]
    fn cz_postconditions_on_rational_corpus() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..40 {
            let n = 1 + (trial % 2);
            let depth = 2 + (trial % 4);
            let tree = DyadicTree::uniform(n, depth);
            let space = lp(if trial % 2 == 0 { 1.0 } else { 2.0 }, 2);
            let f = StepFunction::new(
                tree.clone(),
                space,
                rational_values(tree.leaf_count(), 2, &mut rng),
            )
            .unwrap();
            let m1 = dyadic_maximal(&f, Some(1.0));
            let top = m1.values().iter().cloned().fold(0.0, f64::max);
            let lambda = top * rng.gen_range(0.2..0.9);
            if lambda <= 0.0 {
                continue;
            }
            let cz = calderon_zygmund(&f, lambda).unwrap();
            // exact reconstruction on the dyadic-rational corpus
            assert_eq!(cz.reassemble().values(), f.values());
            // zero mean per bad piece, exactly
            for (q, b) in &cz.bad {
                for x in b.integral(q.level(), q.morton() as usize) {
                    assert_eq!(*x, 0.0);
                }
            }
            assert!(cz.stopping_mass(&f) <= f.lp_norm(1.0, None) / lambda);
            // uniform-mass L^∞ bound on the good part
            let fan = (1usize << n) as f64;
            assert!(cz.good.lp_norm(f64::INFINITY, None) <= fan * lambda + 1e-12);
            assert!(cz.good.lp_norm(1.0, None) <= f.lp_norm(1.0, None) + 1e-12);
            // g = f outside the stopping region, bitwise
            let mut inside = vec![false; tree.leaf_count()];
            for q in &cz.stopping {
                for leaf in tree.leaf_range(q.level(), q.morton() as usize) {
                    inside[leaf] = true;
                }
            }
            for leaf in 0..tree.leaf_count() {
                if !inside[leaf] {
                    assert_eq!(cz.good.value(leaf), f.value(leaf));
                }
            }
        }
    }

    #[test]
    fn cz_bad_part_invisible_to_rmf_outside() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let tree = DyadicTree::uniform(1, 4);
        let space = lp(1.0, 2);
        let f = StepFunction::new(
            tree.clone(),
            space,
            rational_values(tree.leaf_count(), 2, &mut rng),
        )
        .unwrap();
        let lambda = 0.75;
        let cz = calderon_zygmund(&f, lambda).unwrap();
        let mut b = f.scale(0.0);
        for (_, piece) in &cz.bad {
            b = b.add(piece);
        }
        let field = rmf(&b, &EstimatorConfig::default().with_seed(1), 0).unwrap();
        let mut inside = vec![false; tree.leaf_count()];
        for q in &cz.stopping {
            for leaf in tree.leaf_range(q.level(), q.morton() as usize) {
                inside[leaf] = true;
            }
        }
        for leaf in 0..tree.leaf_count() {
            if !inside[leaf] {
                assert_eq!(field.lower[leaf], 0.0);
                assert_eq!(field.upper[leaf], 0.0);
            }
        }
    }

    #[test]
    fn gundy_without_stopping() {
        let tree = DyadicTree::uniform(1, 3);
        let f = StepFunction::constant(tree, lp(2.0, 2), &[0.3, 0.4]).unwrap();
        let g = gundy(&f, 1.0, 0).unwrap();
        assert!(g.stopping_level.iter().all(|t| t.is_none()));
        assert_eq!(g.good.values(), f.values());
        assert!(g.jump.values().iter().all(|&v| v == 0.0));
        assert!(g.bad.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gundy_absorbs_non_doubling_jumps() {
        // mass (1/16, 15/16): the spike's average jumps from 1/16 to 1,
        // far beyond 2λ, and lands in h rather than g
        let tree = DyadicTree::with_leaf_mass(1, 1, vec![1.0 / 16.0, 15.0 / 16.0]).unwrap();
        let f = StepFunction::scalar(tree, vec![1.0, 0.0]).unwrap();
        let lambda = 0.3;
        let g = gundy(&f, lambda, 0).unwrap();
        assert_eq!(g.stopping_level, vec![Some(1), None]);
        assert!(g.jump.values()[0] > 0.0, "the big jump must land in h");
        assert!(g.good.lp_norm(f64::INFINITY, None) <= 3.0 * lambda + 1e-12);
        assert_eq!(g.reassemble().values(), f.values());
    }

    #[test]
    fn gundy_postconditions_on_random_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(4096);
        for trial in 0..60u64 {
            let n = 1 + (trial % 2) as usize;
            let depth = 2 + (trial % 3) as usize;
            let tree = if trial % 3 == 0 {
                DyadicTree::uniform(n, depth)
            } else {
                random_dyadic_tree(n, depth, 900 + trial, true)
            };
            let space = lp(if trial % 2 == 0 { 1.0 } else { 2.0 }, 2);
            let f = StepFunction::new(
                tree.clone(),
                space,
                rational_values(tree.leaf_count(), 2, &mut rng),
            )
            .unwrap();
            let m = dyadic_maximal(&f, None);
            let top = m.values().iter().cloned().fold(0.0, f64::max);
            if top == 0.0 {
                continue;
            }
            let lambda = top * rng.gen_range(0.15..0.8);
            let base = (trial % 2) as usize;
            let g = gundy(&f, lambda, base).unwrap();
            let f1 = f.lp_norm(1.0, None);
            assert!(g.good.lp_norm(f64::INFINITY, None) <= 3.0 * lambda + 1e-12);
            assert!(g.good.lp_norm(1.0, None) <= 3.0 * f1 + 1e-12);
            assert!(g.jump_variation() <= 4.0 * f1 + 1e-12, "trial {trial}");
            // {Mb > 0} ⊆ {τ < ∞}, exactly on this corpus
            let mb = dyadic_maximal(&g.bad, None);
            let mut mb_mass = 0.0;
            for leaf in 0..tree.leaf_count() {
                if mb.values()[leaf] > 0.0 {
                    assert!(g.stopping_level[leaf].is_some(), "trial {trial} leaf {leaf}");
                    mb_mass += tree.leaf_mass()[leaf];
                }
            }
            assert!(mb_mass <= f1 / lambda);
            assert!(g.stopped_mass() <= f1 / lambda + 1e-12);
            // A_j b = 0 on {τ ≥ j}, exactly
            for j in base..=tree.depth() {
                let ab = g.bad.averaging_operator(j);
                for leaf in 0..tree.leaf_count() {
                    let tau_ge_j = g.stopping_level[leaf].map_or(true, |t| t >= j);
                    if tau_ge_j && tree.leaf_mass()[leaf] > 0.0 {
                        for &x in ab.value(leaf) {
                            assert_eq!(x, 0.0, "trial {trial} level {j} leaf {leaf}");
                        }
                    }
                }
            }
            // exact reconstruction
            assert_eq!(g.reassemble().values(), f.values());
        }
    }

    #[test]
    fn gundy_rejects_nonpositive_height() {
        let tree = DyadicTree::uniform(1, 1);
        let f = StepFunction::scalar(tree, vec![1.0, 0.0]).unwrap();
        assert!(gundy(&f, 0.0, 0).is_err());
    }

    #[test]
    fn atomic_single_haar_gives_one_unit_atom() {
        let tree = DyadicTree::uniform(1, 3);
        let f = haar_function(&tree, &Cube::root(1), 1).unwrap();
        // scale to ±1 values: the root Haar function at volume 1
        let dec = atomic_decompose(&f, f64::INFINITY).unwrap();
        assert_eq!(dec.terms.len(), 1);
        let (l, atom) = &dec.terms[0];
        assert!((l - 1.0).abs() < 1e-12);
        assert_eq!(atom.cube, Cube::root(1));
        let (leak, mean, excess) = atom_violations(&atom.fun, &atom.cube, f64::INFINITY);
        assert!(leak == 0.0 && mean <= 1e-12 && excess <= 1e-12);
    }

    #[test]
    fn atomic_decomposition_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(31337);
        for trial in 0..20 {
            let depth = 3 + trial % 3;
            let tree = DyadicTree::uniform(1, depth);
            let space = lp(2.0, 2);
            let raw = StepFunction::new(
                tree.clone(),
                space,
                rational_values(tree.leaf_count(), 2, &mut rng),
            )
            .unwrap();
            let f = raw.centered_restriction(&Cube::root(1));
            for q in [2.0, f64::INFINITY] {
                let dec = atomic_decompose(&f, q).unwrap();
                let back = dec.reassemble(&f);
                let scale = f.lp_norm(f64::INFINITY, None);
                for (a, b) in back.values().iter().zip(f.values()) {
                    assert!((a - b).abs() <= 1e-10 * (1.0 + scale));
                }
                for (_, atom) in &dec.terms {
                    let (leak, mean, excess) = atom_violations(&atom.fun, &atom.cube, q);
                    assert_eq!(leak, 0.0);
                    assert!(mean <= 1e-12);
                    assert!(excess <= 1e-12 * (1.0 + scale));
                }
                assert!(dec.coefficient_sum().is_finite());
            }
        }
    }

    #[test]
    fn atomic_rejects_bad_inputs() {
        let tree = DyadicTree::uniform(1, 2);
        let f = StepFunction::scalar(tree.clone(), vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(atomic_decompose(&f, 2.0).is_err(), "nonzero mean");
        let g = StepFunction::scalar(tree, vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        assert!(atomic_decompose(&g, 1.0).is_err(), "q must exceed 1");
        let skewed = Arc::clone(&random_dyadic_tree(1, 2, 5, true));
        let h = StepFunction::scalar(skewed, vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        assert!(atomic_decompose(&h, 2.0).is_err(), "non-uniform tree");
    }

    #[test]
    fn atoms_nest_in_their_height_stopping_cubes() {
        let mut rng = ChaCha8Rng::seed_from_u64(505);
        let tree = DyadicTree::uniform(1, 4);
        let raw = StepFunction::new(
            tree.clone(),
            lp(1.0, 1),
            rational_values(tree.leaf_count(), 1, &mut rng),
        )
        .unwrap();
        let f = raw.centered_restriction(&Cube::root(1));
        let dec = atomic_decompose(&f, f64::INFINITY).unwrap();
        // every atom is supported where its cube's own CZ run stopped
        for (_, atom) in &dec.terms {
            let (leak, _, _) = atom_violations(&atom.fun, &atom.cube, f64::INFINITY);
            assert_eq!(leak, 0.0);
        }
    }
}
