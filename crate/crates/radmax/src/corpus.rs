//! Seeded corpus generation: random functions, Haar-sparse functions,
//! atoms, the `ℓ¹` partial-sum family, and random non-doubling trees.
//!
//! Trees built here split each cube's mass into powers of two (or zero),
//! so every cube mass divides exactly in f64 and the decomposition
//! identities that hold in exact arithmetic hold bit-exactly on these
//! corpora. Functions with `rational` values take dyadic-rational values
//! `k/64` for the same reason.

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::dyadic::{Cube, DyadicTree};
use crate::error::{Error, Result};
use crate::haar::{haar_reconstruct, HaarCoeffs};
use crate::space::NormedSpace;
use crate::stepfn::StepFunction;

/// Standard normal via Box–Muller, driven by the supplied generator.
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// A random tree whose cube masses are powers of two or zero: at each
/// binary split the mass goes half/half, all left, or all right. The
/// resulting measures are typically far from doubling.
pub fn random_dyadic_tree(
    n: usize,
    depth: usize,
    seed: u64,
    allow_zero: bool,
) -> Arc<DyadicTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masses = vec![1.0f64];
    // one cube level = n binary splits
    for _ in 0..(n * depth) {
        let mut next = Vec::with_capacity(masses.len() * 2);
        for &m in &masses {
            let roll: f64 = rng.gen_range(0.0..1.0);
            if m == 0.0 {
                next.extend([0.0, 0.0]);
            } else if !allow_zero || roll < 0.5 {
                next.extend([m / 2.0, m / 2.0]);
            } else if roll < 0.75 {
                next.extend([m, 0.0]);
            } else {
                next.extend([0.0, m]);
            }
        }
        masses = next;
    }
    DyadicTree::with_leaf_mass(n, depth, masses).unwrap()
}

/// Dyadic-rational values `k/64`, `k ∈ [-128, 128]`, exact in f64.
pub fn rational_values(leaves: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..leaves * d)
        .map(|_| rng.gen_range(-128i32..=128) as f64 / 64.0)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorpusFamily {
    RandomGaussian,
    HaarSparse,
    Atoms { q: f64 },
    L1PartialSum,
}

impl CorpusFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "random-gaussian" => Ok(CorpusFamily::RandomGaussian),
            "haar-sparse" => Ok(CorpusFamily::HaarSparse),
            "atoms" => Ok(CorpusFamily::Atoms { q: f64::INFINITY }),
            "l1-partial-sum" => Ok(CorpusFamily::L1PartialSum),
            other => Err(Error::InvalidParameter(format!(
                "unknown corpus family: {other}"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CorpusFamily::RandomGaussian => "random-gaussian",
            CorpusFamily::HaarSparse => "haar-sparse",
            CorpusFamily::Atoms { .. } => "atoms",
            CorpusFamily::L1PartialSum => "l1-partial-sum",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub f: StepFunction,
    pub tag: String,
}

/// Deterministic corpus of `count` functions on a uniform tree.
pub fn gen_corpus(
    family: &CorpusFamily,
    count: usize,
    n: usize,
    depth: usize,
    space: NormedSpace,
    seed: u64,
) -> Result<Vec<CorpusItem>> {
    let mut out = Vec::with_capacity(count);
    for item in 0..count {
        let item_seed = seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(item as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(item_seed);
        let f = match family {
            CorpusFamily::RandomGaussian => {
                let tree = DyadicTree::uniform(n, depth);
                let values = (0..tree.leaf_count() * space.dim())
                    .map(|_| gaussian(&mut rng))
                    .collect();
                StepFunction::new(tree, space, values)?
            }
            CorpusFamily::HaarSparse => {
                let tree = DyadicTree::uniform(n, depth);
                let fan = 1usize << n;
                let mut hc = HaarCoeffs::zero(tree.clone(), space);
                let total: usize = (0..depth).map(|k| tree.cubes_at(k) * (fan - 1)).sum();
                let k_sparse = (total / 4).clamp(1, 24);
                for _ in 0..k_sparse {
                    let level = rng.gen_range(0..depth);
                    let cube = rng.gen_range(0..tree.cubes_at(level));
                    let theta = rng.gen_range(1..fan);
                    let slot = hc.coeff_mut(level, cube, theta);
                    for x in slot.iter_mut() {
                        *x = gaussian(&mut rng);
                    }
                }
                haar_reconstruct(&hc)
            }
            CorpusFamily::Atoms { q } => {
                let tree = DyadicTree::uniform(n, depth);
                let (atom, _) = random_atom(&tree, space, *q, &mut rng)?;
                atom
            }
            CorpusFamily::L1PartialSum => l1_partial_sum(depth)?,
        };
        out.push(CorpusItem {
            f,
            tag: format!("{}[{}]", family.name(), item),
        });
    }
    Ok(out)
}

/// A random `q`-atom: mean-zero on a random cube, normalized so that
/// `‖a‖_{L^q} = |Q|^{-1/q'}` exactly. Returns the atom and its cube.
pub fn random_atom(
    tree: &Arc<DyadicTree>,
    space: NormedSpace,
    q: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(StepFunction, Cube)> {
    assert!(q > 1.0, "atoms require q in (1, inf]");
    let level = if tree.depth() == 0 {
        0
    } else {
        rng.gen_range(0..tree.depth())
    };
    let index = rng.gen_range(0..tree.cubes_at(level));
    let cube = Cube::from_morton(tree.dim(), level, index as u64);
    let d = space.dim();
    let mut values = vec![0.0; tree.leaf_count() * d];
    for leaf in tree.leaf_range(level, index) {
        for i in 0..d {
            values[leaf * d + i] = gaussian(rng);
        }
    }
    let raw = StepFunction::new(tree.clone(), space, values)?;
    let centered = raw.centered_restriction(&cube);
    let qn = centered.lp_norm(if q.is_finite() { q } else { f64::INFINITY }, None);
    if qn == 0.0 {
        return Err(Error::InvalidParameter("degenerate zero atom".into()));
    }
    // ‖a‖_q ≤ |Q|^{-1/q'} with equality after this scaling
    let inv_qp = if q.is_finite() { 1.0 - 1.0 / q } else { 1.0 };
    let target = cube.volume().powf(-inv_qp);
    Ok((centered.scale(target / qn), cube))
}

/// The `ℓ¹` partial-sum family: a depth-`m` interval tree with values in
/// `ℓ¹_{m+1}` arranged so that the averages along the leftmost chain are
/// exactly the partial sums `s_k = e_1 + … + e_{k+1}`.
pub fn l1_partial_sum(m: usize) -> Result<StepFunction> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "partial-sum family needs depth >= 1".into(),
        ));
    }
    let d = m + 1;
    let tree = DyadicTree::uniform(1, m);
    let space = NormedSpace::lp(1.0, d)?;
    let mut values = vec![0.0; tree.leaf_count() * d];
    let s = |k: usize| -> Vec<f64> {
        let mut v = vec![0.0; d];
        for e in v.iter_mut().take(k + 1) {
            *e = 1.0;
        }
        v
    };
    // leftmost leaf carries s_m
    values[..d].copy_from_slice(&s(m));
    // the sibling of Q_{k+1} inside Q_k is constant u_k = 2 s_k − s_{k+1}
    for k in 0..m {
        let mut u = s(k + 1);
        u.iter_mut().for_each(|x| *x = -*x);
        for (i, sv) in s(k).iter().enumerate() {
            u[i] += 2.0 * sv;
        }
        let lo = 1usize << (m - k - 1);
        let hi = 1usize << (m - k);
        for leaf in lo..hi {
            values[leaf * d..(leaf + 1) * d].copy_from_slice(&u);
        }
    }
    StepFunction::new(tree, space, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rademacher;

    #[test]
    fn corpus_is_deterministic() {
        let space = NormedSpace::lp(2.0, 2).unwrap();
        for family in [
            CorpusFamily::RandomGaussian,
            CorpusFamily::HaarSparse,
            CorpusFamily::Atoms { q: f64::INFINITY },
        ] {
            let a = gen_corpus(&family, 3, 1, 3, space, 42).unwrap();
            let b = gen_corpus(&family, 3, 1, 3, space, 42).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.f.values(), y.f.values(), "{}", family.name());
            }
        }
    }

    #[test]
    fn atoms_pass_the_three_conditions() {
        let space = NormedSpace::lp(2.0, 2).unwrap();
        let tree = DyadicTree::uniform(1, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for q in [2.0, 4.0, f64::INFINITY] {
            for _ in 0..20 {
                let (a, cube) = random_atom(&tree, space, q, &mut rng).unwrap();
                // support
                for leaf in 0..tree.leaf_count() {
                    if !tree
                        .leaf_range(cube.level(), cube.morton() as usize)
                        .contains(&leaf)
                    {
                        assert!(a.value(leaf).iter().all(|&v| v == 0.0));
                    }
                }
                // mean zero
                for x in a.total_integral() {
                    assert!(x.abs() <= 1e-12);
                }
                // q-norm bound with equality
                let inv_qp = if q.is_finite() { 1.0 - 1.0 / q } else { 1.0 };
                let bound = cube.volume().powf(-inv_qp);
                let qn = a.lp_norm(q, None);
                assert!(qn <= bound * (1.0 + 1e-12));
                assert!(qn >= bound * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn partial_sum_chain_averages_are_exact() {
        let m = 4;
        let f = l1_partial_sum(m).unwrap();
        for k in 0..=m {
            let avg = f.average(&Cube::from_morton(1, k, 0));
            for (j, &v) in avg.iter().enumerate() {
                let want = if j <= k { 1.0 } else { 0.0 };
                assert_eq!(v, want, "level {k} coord {j}");
            }
        }
    }

    #[test]
    fn partial_sum_equal_coefficient_enumeration() {
        // m = 4: the chain has 5 averages; enumerate the 2^4 sign patterns
        let m = 4;
        let f = l1_partial_sum(m).unwrap();
        let chain = crate::maximal::chain_averages(&f, 0, 0);
        let coeffs = vec![1.0 / (chain.len() as f64).sqrt(); chain.len()];
        let v = rademacher::rademacher_norm(f.space(), &chain, &coeffs, 24).unwrap();
        // brute force the same quantity
        let mut acc = 0.0;
        let k = chain.len();
        for pat in 0..(1u32 << k) {
            let mut sum = vec![0.0; f.dim()];
            for j in 0..k {
                let s = if (pat >> j) & 1 == 0 { 1.0 } else { -1.0 };
                for i in 0..f.dim() {
                    sum[i] += s * coeffs[j] * chain[j][i];
                }
            }
            let n = f.space().norm(&sum);
            acc += n * n;
        }
        let brute = (acc / (1u64 << k) as f64).sqrt();
        assert!((v - brute).abs() < 1e-12);
    }

    #[test]
    fn random_trees_have_power_of_two_masses() {
        for seed in 0..10u64 {
            let tree = random_dyadic_tree(2, 3, seed, true);
            assert_eq!(tree.total_mass(), 1.0);
            for level in 0..=3 {
                for i in 0..tree.cubes_at(level) {
                    let m = tree.cube_mass(level, i);
                    if m > 0.0 {
                        // a power of two has a single mantissa bit
                        assert_eq!(m.to_bits() & ((1u64 << 52) - 1), 0, "mass {m}");
                    }
                }
            }
        }
    }

    #[test]
    fn unknown_family_is_rejected() {
        assert!(CorpusFamily::parse("bogus").is_err());
        assert!(CorpusFamily::parse("haar-sparse").is_ok());
    }
}
