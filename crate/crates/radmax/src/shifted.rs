//! Shifted dyadic systems on a finite window grid.
//!
//! A shift parameter assigns to each scale `j` a vector `β_j ∈ {0,1}^n`;
//! the level-`k` cubes of the shifted system are the standard ones
//! translated by `Σ_{j>k} 2^{-j} β_j`. With finitely supported `β` and a
//! grid of resolution `2^{-M}`, all shifts are exact cell counts, so the
//! conjugation identity `A^β_k = τ_N^{-1} A_k τ_N` is a literal cell
//! permutation here.
//!
//! The window is `[-1,1)^n`: functions supported in the unit cube stay
//! inside it under every shift that occurs at levels `k ≥ 0`. Averages
//! use the zero extension and full cube volume, and cube cells are summed
//! in ascending row-major order on both sides of every identity.

use crate::error::{Error, Result};
use crate::rademacher::{self, EstimatorConfig};
use crate::space::NormedSpace;
use crate::stepfn::StepFunction;

/// A function on the window grid `[-1,1)^n` at resolution `2^{-res}`,
/// zero-extended outside.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFn {
    pub n: usize,
    pub res: usize,
    pub d: usize,
    /// Row-major over shifted coordinates `c_i + 2^res`, `d` entries per cell.
    pub values: Vec<f64>,
}

impl WindowFn {
    pub fn zero(n: usize, res: usize, d: usize) -> Self {
        let cells = (1usize << (res + 1)).pow(n as u32);
        WindowFn {
            n,
            res,
            d,
            values: vec![0.0; cells * d],
        }
    }

    pub fn cells_per_axis(&self) -> usize {
        1 << (self.res + 1)
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_axis().pow(self.n as u32)
    }

    /// Linear index of a cell, or `None` outside the window.
    pub fn index(&self, coords: &[i64]) -> Option<usize> {
        let half = 1i64 << self.res;
        let mut idx = 0usize;
        for &c in coords {
            ifc_outside(c, half) {
                return None;
            }
            idx = idx * self.cells_per_axis() + (c + half) as usize;
        }
        Some(idx)
    }

    pub fn coords_of(&self, mut idx: usize) -> Vec<i64> {
        let half = 1i64 << self.res;
        let mut coords = vec![0i64; self.n];
        for i in (0..self.n).rev() {
            coords[i] = (idx % self.cells_per_axis()) as i64 - half;
            idx /= self.cells_per_axis();
        }
        coords
    }

    pub fn cell(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.d..(idx + 1) * self.d]
    }

    /// Embeds a step function on the unit cube at grid resolution `res`.
    pub fn from_step(f: &StepFunction, res: usize) -> Result<WindowFn> {
        let tree = f.tree();
        let n = tree.dim();
        let depth = tree.depth();
        if res < depth {
            return Err(Error::InvalidParameter(format!(
                "grid resolution {res} does not resolve depth {depth}"
            )));
        }
        let d = f.dim();
        let mut out = WindowFn::zero(n, res, d);
        let cells = out.cell_count();
        for idx in 0..cells {
            let coords = out.coords_of(idx);
            if coords.iter().any(|&c| c < 0 || c >= (1i64 << res)) {
                continue;
            }
            let leaf_coords: Vec<u64> = coords
                .iter()
                .map(|&c| (c >> (res - depth)) as u64)
                .collect();
            let leaf = crate::dyadic::morton_encode(n, depth, &leaf_coords) as usize;
            out.values[idx * d..(idx + 1) * d].copy_from_slice(f.value(leaf));
        }
        Ok(out)
    }
}

fn ic_outside(c: i64, half: i64) -> bool {
    c < -half || c >= half
}
use ic_outside as if_outside;
use if_outside as ifc_outside;
use ifc_outside as ic_out;
use ic_out as if_out;

fn if_outside_unused() {}

fn c_outside(c: i64, half: i64) -> bool {
    c < -half || c >= half
}

fn ifc(c: i64, half: i64) -> bool {
    c_outside(c, half)
}

/// A finitely supported shift parameter with all scales resolved by the
/// grid: entries `(j, β_j)` with `1 ≤ j ≤ res` and `β_j ∈ {0,1}^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedSystem {
    pub n: usize,
    pub res: usize,
    entries: Vec<(usize, Vec<u8>)>,
}

impl ShiftedSystem {
    pub fn standard(n: usize, res: usize) -> Self {
        ShiftedSystem {
            n,
            res,
            entries: Vec::new(),
        }
    }

    pub fn new(n: usize, res: usize, mut entries: Vec<(usize, Vec<u8>)>) -> Result<Self> {
        for (j, beta) in &entries {
            if *j == 0 || *j > res {
                return Err(Error::InvalidParameter(format!(
                    "shift scale {j} not resolved by grid resolution {res}"
                )));
            }
            if beta.len() != n || beta.iter().any(|&b| b > 1) {
                return Err(Error::InvalidParameter(
                    "shift vectors must lie in {0,1}^n".into(),
                ));
            }
        }
        entries.sort_by_key(|(j, _)| *j);
        Ok(ShiftedSystem { n, res, entries })
    }

    /// The level-`k` shift `Σ_{j>k} 2^{-j} β_j`, in cells.
    pub fn shift_cells(&self, k: usize) -> Vec<i64> {
        let mut t = vec![0i64; self.n];
        for (j, beta) in &self.entries {
            if *j > k {
                let unit = 1i64 << (self.res - *j);
                for i in 0..self.n {
                    t[i] += unit * beta[i] as i64;
                }
            }
        }
        t
    }

    /// The single-scale shift `2^{-j} β_j`, in cells.
    pub fn single_shift_cells(&self, j: usize) -> Vec<i64> {
        let mut t = vec![0i64; self.n];
        if let Some((_, beta)) = self.entries.iter().find(|(jj, _)| *jj == j) {
            let unit = 1i64 << (self.res - j);
            for i in 0..self.n {
                t[i] = unit * beta[i] as i64;
            }
        }
        t
    }
}

/// The translation `τ f(x) = f(x + t)`, zero-extended.
pub fn translate(f: &WindowFn, t: &[i64]) -> WindowFn {
    assert_eq!(t.len(), f.n);
    let mut out = WindowFn::zero(f.n, f.res, f.d);
    for idx in 0..f.cell_count() {
        let mut coords = f.coords_of(idx);
        for (c, &s) in coords.iter_mut().zip(t) {
            *c += s;
        }
        if let Some(src) = f.index(&coords) {
            let (d, lo) = (f.d, idx * f.d);
            out.values[lo..lo + d].copy_from_slice(f.cell(src));
        }
    }
    out
}

/// The inverse translation `τ^{-1} f(x) = f(x − t)`.
pub fn translate_back(f: &WindowFn, t: &[i64]) -> WindowFn {
    let neg: Vec<i64> = t.iter().map(|&x| -x).collect();
    translate(f, &neg)
}

/// The averaging operator of the shifted system at level `k`:
/// per shifted cube, the mean of the zero-extended function over the
/// full cube volume.
pub fn shifted_average(sys: &ShiftedSystem, k: usize, f: &WindowFn) -> Result<WindowFn> {
    if k > f.res {
        return Err(Error::InvalidParameter(format!(
            "level {k} below the grid resolution {}",
            f.res
        )));
    }
    assert_eq!(sys.n, f.n);
    let t = sys.shift_cells(k);
    Ok(average_with_anchor(f, k, &t))
}

/// The standard averaging operator `A_k` on the window.
pub fn standard_average(f: &WindowFn, k: usize) -> Result<WindowFn> {
    if k > f.res {
        return Err(Error::InvalidParameter(format!(
            "level {k} below the grid resolution {}",
            f.res
        )));
    }
    Ok(average_with_anchor(f, k, &vec![0i64; f.n]))
}

fn average_with_anchor(f: &WindowFn, k: usize, t: &[i64]) -> WindowFn {
    let n = f.n;
    let d = f.d;
    let w = 1i64 << (f.res - k); // cells per cube side
    let half = 1i64 << f.res;
    let mut out = WindowFn::zero(n, f.res, d);
    // cube ids whose translate intersects the window
    let lo_hi: Vec<(i64, i64)> = (0..n)
        .map(|i| {
            let lo = (-half - t[i]).div_euclid(w);
            let hi = (half - 1 - t[i]).div_euclid(w);
            (lo, hi)
        })
        .collect();
    let mut id: Vec<i64> = lo_hi.iter().map(|&(lo, _)| lo).collect();
    let vol = (w as f64).powi(n as i32);
    let mut sum = vec![0.0; d];
    let mut coords = vec![0i64; n];
    'outer: loop {
        sum.fill(0.0);
        // ascending row-major sweep over the cube's cells
        let base: Vec<i64> = (0..n).map(|i| id[i] * w + t[i]).collect();
        let mut off = vec![0i64; n];
        loop {
            for i in 0..n {
                coords[i] = base[i] + off[i];
            }
            if let Some(src) = f.index(&coords) {
                for i in 0..d {
                    sum[i] += f.values[src * d + i];
                }
            }
            let mut axis = n;
            while axis > 0 {
                axis -= 1;
                off[axis] += 1;
                if off[axis] < w {
                    break;
                }
                off[axis] = 0;
                if axis == 0 {
                    off.clear();
                }
            }
            if off.is_empty() {
                break;
            }
        }
        let avg: Vec<f64> = sum.iter().map(|&s| s / vol).collect();
        // write to the in-window cells
        let mut off = vec![0i64; n];
        loop {
            for i in 0..n {
                coords[i] = base[i] + off[i];
            }
            if let Some(dst) = f.index(&coords) {
                out.values[dst * d..(dst + 1) * d].copy_from_slice(&avg);
            }
            let mut axis = n;
            while axis > 0 {
                axis -= 1;
                off[axis] += 1;
                if off[axis] < w {
                    break;
                }
                off[axis] = 0;
                if axis == 0 {
                    off.clear();
                }
            }
            if off.is_empty() {
                break;
            }
        }
        // next cube id
        let mut axis = n;
        while axis > 0 {
            axis -= 1;
            id[axis] += 1;
            if id[axis] <= lo_hi[axis].1 {
                continue 'outer;
            }
            id[axis] = lo_hi[axis].0;
        }
        break;
    }
    out
}

/// Truncated Rademacher maximal field over the shifted system: per cell,
/// the estimate over the chain `A^β_k f` for `k = base_level..=res`,
/// coarse scale first. The per-cell seed comes from `seed_of_cell`, so a
/// caller can align seeds across translated runs.
pub fn truncated_rmf(
    sys: &ShiftedSystem,
    f: &WindowFn,
    space: &NormedSpace,
    base_level: usize,
    cfg: &EstimatorConfig,
    seed_of_cell: &dyn Fn(usize) -> u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    assert_eq!(space.dim(), f.d);
    let levels: Vec<WindowFn> = (base_level..=f.res)
        .map(|k| shifted_average(sys, k, f))
        .collect::<Result<_>>()?;
    let cells = f.cell_count();
    let mut lower = vec![0.0; cells];
    let mut upper = vec![0.0; cells];
    for idx in 0..cells {
        let chain: Vec<Vec<f64>> = levels.iter().map(|a| a.cell(idx).to_vec()).collect();
        let local = EstimatorConfig {
            seed: seed_of_cell(idx),
            ..cfg.clone()
        };
        let est = rademacher::estimate(space, &chain, &local, None, true)?;
        lower[idx] = est.lower;
        upper[idx] = est.upper;
    }
    Ok((lower, upper))
}
