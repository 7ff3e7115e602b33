//! Dyadic cubes of the unit cube `[0,1)^n`, depth-limited trees with a
//! nonnegative mass per leaf, maximal-cube selection, and the
//! measure-preserving interleaving map between dimensions.
//!
//! Leaves are stored in Morton (Z-)order: a cube at level `k` with
//! coordinates `m = (m_1, …, m_n)` has index `Σ δ_1 2^{n-1} + … + δ_n 2^0`
//! accumulated over the bit groups of its coordinates, most significant
//! scale first. Under this layout the level-`k` cubes of `[0,1)^n`
//! correspond to dyadic intervals of `[0,1)` of length `2^{-nk}` by plain
//! index reinterpretation, which is exactly the interleaving map.

use std::sync::Arc;

use crate::error::{Error, Result};

/// A dyadic cube `2^{-k}([0,1)^n + m)` inside the unit cube.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cube {
    n: usize,
    level: usize,
    coords: Vec<u64>,
}

impl Cube {
    pub fn new(n: usize, level: usize, coords: Vec<u64>) -> Self {
        assert_eq!(coords.len(), n);
        assert!(level < 64, "level too deep for 64-bit coordinates");
        for &c in &coords {
            assert!(c < (1u64 << level) || level == 0 && c == 0, "coordinate outside the unit cube");
        }
        Cube { n, level, coords }
    }

    pub fn root(n: usize) -> Self {
        Cube {
            n,
            level: 0,
            coords: vec![0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    /// Lebesgue measure `2^{-nk}`.
    pub fn volume(&self) -> f64 {
        (0.5f64).powi((self.n * self.level) as i32)
    }

    /// Sidelength `2^{-k}`.
    pub fn side(&self) -> f64 {
        (0.5f64).powi(self.level as i32)
    }

    /// Morton index among the `2^{nk}` cubes of its level.
    pub fn morton(&self) -> u64 {
        morton_encode(self.n, self.level, &self.coords)
    }

    pub fn from_morton(n: usize, level: usize, index: u64) -> Self {
        Cube {
            n,
            level,
            coords: morton_decode(n, level, index),
        }
    }

    /// The `2^n` children, in Morton order.
    pub fn children(&self) -> Vec<Cube> {
        let mut out = Vec::with_capacity(1 << self.n);
        for offset in 0..(1u64 << self.n) {
            let mut coords = Vec::with_capacity(self.n);
            for (i, &c) in self.coords.iter().enumerate() {
                // bit for coordinate i sits at position n-1-i of the offset
                let delta = (offset >> (self.n - 1 - i)) & 1;
                coords.push(2 * c + delta);
            }
            out.push(Cube {
                n: self.n,
                level: self.level + 1,
                coords,
            });
        }
        out
    }

    /// The parent cube; errors at the root.
    pub fn parent(&self) -> Result<Cube> {
        if self.level == 0 {
            return Err(Error::InvalidParameter(
                "the root cube has no parent".into(),
            ));
        }
        Ok(Cube {
            n: self.n,
            level: self.level - 1,
            coords: self.coords.iter().map(|c| c / 2).collect(),
        })
    }

    /// Dyadic inclusion: either disjoint or nested.
    pub fn contains(&self, other: &Cube) -> bool {
        if other.level < self.level {
            return false;
        }
        let shift = other.level - self.level;
        self.coords
            .iter()
            .zip(&other.coords)
            .all(|(&a, &b)| (b >> shift) == a)
    }

    /// The image under the interleaving map: the dyadic interval of
    /// `[0,1)` at level `nk` whose index is the Morton index.
    pub fn interleave(&self) -> Cube {
        Cube {
            n: 1,
            level: self.n * self.level,
            coords: vec![self.morton()],
        }
    }

    /// Inverse of [`Cube::interleave`]; the interval level must be a
    /// multiple of `n`.
    pub fn uninterleave(interval: &Cube, n: usize) -> Result<Cube> {
        if interval.n != 1 {
            return Err(Error::InvalidParameter(
                "uninterleave expects an interval".into(),
            ));
        }
        if interval.level % n != 0 {
            return Err(Error::InvalidParameter(format!(
                "interval level {} is not a multiple of {n}",
                interval.level
            )));
        }
        let level = interval.level / n;
        Ok(Cube::from_morton(n, level, interval.coords[0]))
    }
}

impl std::fmt::Display for Cube {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}<{}>:{}", self.n, self.level, self.morton())
    }
}

/// Interleaves coordinate bits, first coordinate most significant in
/// each group of `n` bits.
pub fn morton_encode(n: usize, level: usize, coords: &[u64]) -> u64 {
    assert_eq!(coords.len(), n);
    let mut index = 0u64;
    for b in (0..level).rev() {
        for &c in coords.iter() {
            index = (index << 1) | ((c >> b) & 1);
        }
    }
    index
}

pub fn morton_decode(n: usize, level: usize, index: u64) -> Vec<u64> {
    let mut coords = vec![0u64; n];
    for b in 0..level {
        for (i, c) in coords.iter_mut().enumerate() {
            let pos = b * n + (n - 1 - i);
            *c |= ((index >> pos) & 1) << b;
        }
    }
    coords
}

/// Depth-`N` dyadic partition of `[0,1)^n` with a nonnegative mass per
/// leaf. Cube masses at every level are accumulated bottom-up once, so
/// `μ(parent) = Σ μ(children)` holds bit-exactly by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicTree {
    n: usize,
    depth: usize,
    /// `level_mass[k][i]` is the mass of the level-`k` cube with Morton
    /// index `i`; `level_mass[depth]` is the leaf mass array.
    level_mass: Vec<Vec<f64>>,
}

impl DyadicTree {
    /// Uniform mass `2^{-nN}` per leaf: Lebesgue measure.
    pub fn uniform(n: usize, depth: usize) -> Arc<Self> {
        let leaves = 1usize << (n * depth);
        Self::with_leaf_mass(n, depth, vec![1.0 / leaves as f64; leaves]).unwrap()
    }

    pub fn with_leaf_mass(n: usize, depth: usize, leaf_mass: Vec<f64>) -> Result<Arc<Self>> {
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if n * depth >= 48 {
            return Err(Error::InvalidParameter(format!(
                "tree with 2^{} leaves is beyond desk scale",
                n * depth
            )));
        }
        let leaves = 1usize << (n * depth);
        if leaf_mass.len() != leaves {
            return Err(Error::DimensionMismatch {
                expected: leaves,
                got: leaf_mass.len(),
            });
        }
        for &m in &leaf_mass {
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "leaf masses must be finite and nonnegative, got {m}"
                )));
            }
        }
        let mut level_mass = vec![Vec::new(); depth + 1];
        level_mass[depth] = leaf_mass;
        for k in (0..depth).rev() {
            let fan = 1usize << n;
            let mut upper = vec![0.0; 1 << (n * k)];
            for (i, u) in upper.iter_mut().enumerate() {
                let mut s = 0.0;
                for j in 0..fan {
                    s += level_mass[k + 1][(i << n) + j];
                }
                *u = s;
            }
            level_mass[k] = upper;
        }
        Ok(Arc::new(DyadicTree {
            n,
            depth,
            level_mass,
        }))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaf_count(&self) -> usize {
        1 << (self.n * self.depth)
    }

    pub fn cubes_at(&self, level: usize) -> usize {
        1 << (self.n * level)
    }

    pub fn leaf_mass(&self) -> &[f64] {
        &self.level_mass[self.depth]
    }

    /// Mass of the level-`k` cube with Morton index `i`.
    pub fn cube_mass(&self, level: usize, index: usize) -> f64 {
        self.level_mass[level][index]
    }

    pub fn total_mass(&self) -> f64 {
        self.level_mass[0][0]
    }

    pub fn is_uniform(&self) -> bool {
        let m = 1.0 / self.leaf_count() as f64;
        self.leaf_mass().iter().all(|&x| x == m)
    }

    /// Lebesgue volume of a level-`k` cube.
    pub fn cube_volume(&self, level: usize) -> f64 {
        (0.5f64).powi((self.n * level) as i32)
    }

    /// Morton index of the level-`k` ancestor of a leaf.
    pub fn ancestor_index(&self, leaf: usize, level: usize) -> usize {
        leaf >> (self.n * (self.depth - level))
    }

    /// Leaf range (half-open) below the level-`k` cube with index `i`.
    pub fn leaf_range(&self, level: usize, index: usize) -> std::ops::Range<usize> {
        let w = self.n * (self.depth - level);
        (index << w)..((index + 1) << w)
    }

    /// The chain `Q_0 ⊃ Q_1 ⊃ … ⊃ Q_N` of cubes containing a leaf,
    /// root first, by Morton-prefix truncation.
    pub fn chain(&self, leaf: usize) -> Vec<Cube> {
        assert!(leaf < self.leaf_count(), "leaf index out of range");
        (0..=self.depth)
            .map(|k| Cube::from_morton(self.n, k, self.ancestor_index(leaf, k) as u64))
            .collect()
    }

    /// Maximal marked cubes: marked cubes with no marked strict ancestor
    /// at level ≥ `min_level`. Pairwise disjoint, emitted in Morton order.
    pub fn maximal_cubes<F>(&self, marked: F, min_level: usize) -> Vec<Cube>
    where
        F: Fn(&Cube) -> bool,
    {
        let mut out = Vec::new();
        let min_level = min_level.min(self.depth);
        for i in 0..self.cubes_at(min_level) {
            let top = Cube::from_morton(self.n, min_level, i as u64);
            self.collect_maximal(&top, &marked, &mut out);
        }
        out
    }

    fn collect_maximal<F>(&self, cube: &Cube, marked: &F, out: &mut Vec<Cube>)
    where
        F: Fn(&Cube) -> bool,
    {
        if marked(cube) {
            out.push(cube.clone());
            return;
        }
        if cube.level() == self.depth {
            return;
        }
        for child in cube.children() {
            self.collect_maximal(&child, marked, out);
        }
    }
}
