//! Vector-valued step functions on a dyadic tree: averages, averaging
//! operators, martingale differences, and the `L^p`, weak-`L¹`, BMO and
//! `H¹` norms.
//!
//! Averages are taken with respect to the tree's measure and are zero on
//! zero-mass cubes. Per-cube integrals are accumulated bottom-up once at
//! construction, so averages along chains and `A_k` sweeps reuse the same
//! sums; reductions always run in Morton order.

use std::sync::Arc;

use crate::dyadic::{Cube, DyadicTree};
use crate::error::{Error, Result};
use crate::space::NormedSpace;

#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    tree: Arc<DyadicTree>,
    space: NormedSpace,
    /// Leaf-major storage: `values[leaf * d .. (leaf + 1) * d]`.
    values: Vec<f64>,
    /// `level_integral[k]` holds `Σ mass·value` per level-`k` cube, `d` entries each.
    level_integral: Vec<Vec<f64>>,
}

impl StepFunction {
    pub fn new(tree: Arc<DyadicTree>, space: NormedSpace, values: Vec<f64>) -> Result<Self> {
        let d = space.dim();
        if values.len() != tree.leaf_count() * d {
            return Err(Error::DimensionMismatch {
                expected: tree.leaf_count() * d,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite value entry".into()));
        }
        let level_integral = integrate_levels(&tree, d, &values);
        Ok(StepFunction {
            tree,
            space,
            values,
            level_integral,
        })
    }

    /// Scalar function; the norm is the absolute value.
    pub fn scalar(tree: Arc<DyadicTree>, values: Vec<f64>) -> Result<Self> {
        let space = NormedSpace::lp(1.0, 1)?;
        Self::new(tree, space, values)
    }

    pub fn constant(tree: Arc<DyadicTree>, space: NormedSpace, v: &[f64]) -> Result<Self> {
        assert_eq!(v.len(), space.dim());
        let mut values = Vec::with_capacity(tree.leaf_count() * v.len());
        for _ in 0..tree.leaf_count() {
            values.extend_from_slice(v);
        }
        Self::new(tree, space, values)
    }

    pub fn tree(&self) -> &Arc<DyadicTree> {
        &self.tree
    }

    pub fn space(&self) -> &NormedSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, leaf: usize) -> &[f64] {
        let d = self.dim();
        &self.values[leaf * d..(leaf + 1) * d]
    }

    /// `Σ mass·value` over the leaves of the level-`k` cube with Morton
    /// index `i`.
    pub fn integral(&self, level: usize, index: usize) -> &[f64] {
        let d = self.dim();
        &self.level_integral[level][index * d..(index + 1) * d]
    }

    /// `⟨f⟩_Q` for the cube at `(level, index)`; the zero vector when
    /// `μ(Q) = 0`.
    pub fn average_at(&self, level: usize, index: usize, out: &mut [f64]) {
        let mass = self.tree.cube_mass(level, index);
        let integral = self.integral(level, index);
        if mass == 0.0 {
            out.fill(0.0);
        } else {
            for (o, &x) in out.iter_mut().zip(integral) {
                *o = x / mass;
            }
        }
    }

    /// `⟨f⟩_Q`, the measure-theoretic average over a cube.
    pub fn average(&self, cube: &Cube) -> Vec<f64> {
        assert_eq!(cube.dim(), self.tree.dim());
        assert!(cube.level() <= self.tree.depth());
        let mut out = vec![0.0; self.dim()];
        self.average_at(cube.level(), cube.morton() as usize, &mut out);
        out
    }

    /// `A_k f = Σ_{Q at level k} ⟨f⟩_Q 1_Q`.
    pub fn averaging_operator(&self, k: usize) -> StepFunction {
        assert!(k <= self.tree.depth(), "level out of range");
        let d = self.dim();
        let mut values = vec![0.0; self.values.len()];
        let mut avg = vec![0.0; d];
        for cube in 0..self.tree.cubes_at(k) {
            self.average_at(k, cube, &mut avg);
            for leaf in self.tree.leaf_range(k, cube) {
                values[leaf * d..(leaf + 1) * d].copy_from_slice(&avg);
            }
        }
        StepFunction::new(self.tree.clone(), self.space, values).unwrap()
    }

    /// `D_k f = A_{k+1} f − A_k f`.
    pub fn martingale_difference(&self, k: usize) -> StepFunction {
        assert!(k < self.tree.depth());
        self.averaging_operator(k + 1).sub(&self.averaging_operator(k))
    }

    pub fn add(&self, other: &StepFunction) -> StepFunction {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &StepFunction) -> StepFunction {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> StepFunction {
        let values = self.values.iter().map(|&v| c * v).collect();
        StepFunction::new(self.tree.clone(), self.space, values).unwrap()
    }

    fn zip(&self, other: &StepFunction, op: impl Fn(f64, f64) -> f64) -> StepFunction {
        assert!(Arc::ptr_eq(&self.tree, &other.tree) || self.tree == other.tree);
        assert_eq!(self.space, other.space);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| op(a, b))
            .collect();
        StepFunction::new(self.tree.clone(), self.space, values).unwrap()
    }

    /// `(f − ⟨f⟩_Q) 1_Q`: the mean-centered restriction to a cube.
    pub fn centered_restriction(&self, cube: &Cube) -> StepFunction {
        let d = self.dim();
        let avg = self.average(cube);
        let mut values = vec![0.0; self.values.len()];
        for leaf in self.tree.leaf_range(cube.level(), cube.morton() as usize) {
            for i in 0..d {
                values[leaf * d + i] = self.values[leaf * d + i] - avg[i];
            }
        }
        StepFunction::new(self.tree.clone(), self.space, values).unwrap()
    }

    /// Scalar field of pointwise norms `‖f(x)‖`.
    pub fn norm_field(&self) -> StepFunction {
        let values = (0..self.tree.leaf_count())
            .map(|leaf| self.space.norm(self.value(leaf)))
            .collect();
        StepFunction::scalar(self.tree.clone(), values).unwrap()
    }

    /// `L^p` norm, optionally weighted by a positive scalar function on
    /// the same tree; `p = ∞` is the essential supremum.
    pub fn lp_norm(&self, p: f64, weight: Option<&StepFunction>) -> f64 {
        assert!(p >= 1.0, "p must be at least 1");
        if let Some(w) = weight {
            assert_eq!(w.dim(), 1, "weight must be scalar");
            assert!(
                w.values.iter().all(|&x| x >= 0.0),
                "weight must be nonnegative"
            );
        }
        let masses = self.tree.leaf_mass();
        if p.is_infinite() {
            let mut sup = 0.0f64;
            for leaf in 0..self.tree.leaf_count() {
                if masses[leaf] == 0.0 {
                    continue;
                }
                if let Some(w) = weight {
                    if w.values[leaf] == 0.0 {
                        continue;
                    }
                }
                sup = sup.max(self.space.norm(self.value(leaf)));
            }
            return sup;
        }
        let mut acc = 0.0;
        for leaf in 0..self.tree.leaf_count() {
            let mut m = masses[leaf];
            if let Some(w) = weight {
                m *= w.values[leaf];
            }
            if m == 0.0 {
                continue;
            }
            let n = self.space.norm(self.value(leaf));
            acc += m * n.powf(p);
        }
        acc.powf(1.0 / p)
    }

    /// Integral `∫ f dμ` over the whole tree.
    pub fn total_integral(&self) -> Vec<f64> {
        self.integral(0, 0).to_vec()
    }

    /// Dyadic BMO norm by averages: `sup_Q (⟨‖f − ⟨f⟩_Q‖^p⟩_Q)^{1/p}`.
    pub fn bmo_norm_average(&self, p: f64) -> f64 {
        assert!(p >= 1.0 && p.is_finite());
        let d = self.dim();
        let mut sup = 0.0f64;
        let mut avg = vec![0.0; d];
        let mut diff = vec![0.0; d];
        for level in 0..=self.tree.depth() {
            for cube in 0..self.tree.cubes_at(level) {
                let mass = self.tree.cube_mass(level, cube);
                if mass == 0.0 {
                    continue;
                }
                self.average_at(level, cube, &mut avg);
                let mut acc = 0.0;
                for leaf in self.tree.leaf_range(level, cube) {
                    let m = self.tree.leaf_mass()[leaf];
                    if m == 0.0 {
                        continue;
                    }
                    for i in 0..d {
                        diff[i] = self.values[leaf * d + i] - avg[i];
                    }
                    acc += m * self.space.norm(&diff).powf(p);
                }
                sup = sup.max((acc / mass).powf(1.0 / p));
            }
        }
        sup
    }

    /// Dyadic BMO norm with optimal constants: `sup_Q inf_c ⟨|f − c|⟩_Q`,
    /// the infimum attained at a μ-weighted median. Scalar functions only.
    pub fn bmo_norm_optimal(&self) -> f64 {
        assert_eq!(self.dim(), 1, "optimal-constant BMO requires scalar input");
        let mut sup = 0.0f64;
        for level in 0..=self.tree.depth() {
            for cube in 0..self.tree.cubes_at(level) {
                let mass = self.tree.cube_mass(level, cube);
                if mass == 0.0 {
                    continue;
                }
                let mut pairs: Vec<(f64, f64)> = self
                    .tree
                    .leaf_range(level, cube)
                    .filter(|&l| self.tree.leaf_mass()[l] > 0.0)
                    .map(|l| (self.values[l], self.tree.leaf_mass()[l]))
                    .collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                let c = weighted_median(&pairs, mass);
                let mut acc = 0.0;
                for &(v, m) in &pairs {
                    acc += m * (v - c).abs();
                }
                sup = sup.max(acc / mass);
            }
        }
        sup
    }

    /// Hardy space norm `‖Mf‖_{L¹}` with the norm-of-average maximal
    /// function.
    pub fn h1_norm(&self) -> f64 {
        crate::maximal::dyadic_maximal(self, None).lp_norm(1.0, None)
    }
}

/// μ-weighted median of sorted `(value, mass)` pairs; ties resolve to the
/// midpoint of the median interval.
fn weighted_median(sorted: &[(f64, f64)], total: f64) -> f64 {
    debug_assert!(total > 0.0);
    let half = total / 2.0;
    let mut cum = 0.0;
    for (i, &(v, m)) in sorted.iter().enumerate() {
        cum += m;
        if cum > half {
            return v;
        }
        if cum == half {
            // exact split: any point between this value and the next works
            let next = sorted[i + 1..].iter().find(|&&(_, m)| m > 0.0);
            return match next {
                Some(&(w, _)) => (v + w) / 2.0,
                None => v,
            };
        }
    }
    sorted.last().map(|&(v, _)| v).unwrap_or(0.0)
}

/// Exact weak-`L¹` quasinorm `sup_λ λ·μ{g ≥ λ}` of a nonnegative scalar
/// step function: the supremum is attained just below one of the finitely
/// many values.
pub fn weak_l1(g: &StepFunction) -> f64 {
    assert_eq!(g.dim(), 1);
    assert!(
        g.values().iter().all(|&x| x >= 0.0),
        "weak-L1 input must be nonnegative"
    );
    let tree = g.tree();
    let mut pairs: Vec<(f64, f64)> = (0..tree.leaf_count())
        .filter(|&l| tree.leaf_mass()[l] > 0.0 && g.values()[l] > 0.0)
        .map(|l| (g.values()[l], tree.leaf_mass()[l]))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = 0.0f64;
    let mut cum = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == v {
            cum += pairs[i].1;
            i += 1;
        }
        best = best.max(v * cum);
    }
    best
}

fn integrate_levels(tree: &Arc<DyadicTree>, d: usize, values: &[f64]) -> Vec<Vec<f64>> {
    let depth = tree.depth();
    let n = tree.dim();
    let mut levels = vec![Vec::new(); depth + 1];
    let mut leaf_level = vec![0.0; values.len()];
    for leaf in 0..tree.leaf_count() {
        let m = tree.leaf_mass()[leaf];
        for i in 0..d {
            leaf_level[leaf * d + i] = m * values[leaf * d + i];
        }
    }
    levels[depth] = leaf_level;
    for k in (0..depth).rev() {
        let fan = 1usize << n;
        let mut upper = vec![0.0; tree.cubes_at(k) * d];
        for cube in 0..tree.cubes_at(k) {
            for j in 0..fan {
                let child = (cube << n) + j;
                for i in 0..d {
                    upper[cube * d + i] += levels[k + 1][child * d + i];
                }
            }
        }
        levels[k] = upper;
    }
    levels
}
