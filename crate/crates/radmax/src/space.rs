//! Finite-dimensional `ℓ^p_d` spaces: the value space of every function
//! and vector set in the crate.
//!
//! The exponent is a runtime value so experiments can sweep over spaces;
//! `p = ∞` is a dedicated branch, never a large finite exponent.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The exponent of an `ℓ^p` norm, `p ∈ [1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }
}

/// A finite-dimensional real vector space with an `ℓ^p` norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormedSpace {
    dim: usize,
    exponent: Exponent,
}

impl NormedSpace {
    /// `ℓ^p` in dimension `dim`; `p` must be ≥ 1 and finite.
    pub fn lp(p: f64, dim: usize) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lp exponent must be a finite real >= 1, got {p}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(NormedSpace {
            dim,
            exponent: Exponent::Finite(p),
        })
    }

    /// `ℓ^∞` in dimension `dim`.
    pub fn linf(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(NormedSpace {
            dim,
            exponent: Exponent::Infinity,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn exponent(&self) -> Exponent {
        self.exponent
    }

    /// True exactly for `p = 2`, where R-bounds collapse to uniform bounds.
    pub fn is_hilbert(&self) -> bool {
        matches!(self.exponent, Exponent::Finite(p) if p == 2.0)
    }

    /// The `ℓ^p` norm of `v`. Panics on length mismatch or non-finite entries.
    pub fn norm(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.dim, "vector length does not match dimension");
        match self.exponent {
            Exponent::Finite(p) if p == 1.0 => {
                let mut s = 0.0;
                for &x in v {
                    assert!(x.is_finite(), "non-finite entry in vector");
                    s += x.abs();
                }
                s
            }
            Exponent::Finite(p) if p == 2.0 => {
                let mut s = 0.0;
                for &x in v {
                    assert!(x.is_finite(), "non-finite entry in vector");
                    s += x * x;
                }
                s.sqrt()
            }
            Exponent::Finite(p) => {
                let mut s = 0.0;
                let mut max = 0.0f64;
                for &x in v {
                    assert!(x.is_finite(), "non-finite entry in vector");
                    max = max.max(x.abs());
                }
                if max == 0.0 {
                    return 0.0;
                }
                // scale by the max to keep powf in a well-conditioned range
                for &x in v {
                    s += (x.abs() / max).powf(p);
                }
                max * s.powf(1.0 / p)
            }
            Exponent::Infinity => {
                let mut m = 0.0f64;
                for &x in v {
                    assert!(x.is_finite(), "non-finite entry in vector");
                    m = m.max(x.abs());
                }
                m
            }
        }
    }

    /// A subgradient of `v ↦ ‖v‖` at `v`, written into `out`.
    /// Zero vector at the origin; for `p = ∞` the first maximal coordinate
    /// is chosen, for `p = 1` the sign vector.
    pub fn norm_subgradient(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        let n = self.norm(v);
        if n == 0.0 {
            out.fill(0.0);
            return;
        }
        match self.exponent {
            Exponent::Finite(p) if p == 1.0 => {
                for i in 0..self.dim {
                    out[i] = if v[i] > 0.0 {
                        1.0
                    } else if v[i] < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                }
            }
            Exponent::Finite(p) if p == 2.0 => {
                for i in 0..self.dim {
                    out[i] = v[i] / n;
                }
            }
            Exponent::Finite(p) => {
                for i in 0..self.dim {
                    out[i] = v[i].signum() * (v[i].abs() / n).powf(p - 1.0);
                    if v[i] == 0.0 {
                        out[i] = 0.0;
                    }
                }
            }
            Exponent::Infinity => {
                out.fill(0.0);
                let mut arg = 0;
                let mut best = -1.0;
                for i in 0..self.dim {
                    if v[i].abs() > best {
                        best = v[i].abs();
                        arg = i;
                    }
                }
                out[arg] = v[arg].signum();
            }
        }
    }
}

impl fmt::Display for NormedSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exponent {
            Exponent::Finite(p) => write!(f, "lp:{p}"),
            Exponent::Infinity => write!(f, "lp:inf"),
        }
    }
}

/// Parses the `lp:<p>` / `lp:inf` spelling used in configs and on the CLI.
/// The dimension is supplied separately.
pub fn parse_space(spec: &str, dim: usize) -> Result<NormedSpace> {
    let rest = spec
        .strip_prefix("lp:")
        .ok_or_else(|| Error::InvalidParameter(format!("space spec must start with 'lp:': {spec}")))?;
    if rest == "inf" {
        return NormedSpace::linf(dim);
    }
    let p = f64::from_str(rest)
        .map_err(|_| Error::InvalidParameter(format!("bad exponent in space spec: {spec}")))?;
    NormedSpace::lp(p, dim)
}
