//! Prime-field scalars, additive characters and the linear layout of `[0, p)^dims`.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted modulus (exclusive). Keeps every product of two residues
/// and every short sum of such products inside `u64`.
pub const PRIME_LIMIT: u64 = 1 << 31;

/// A verified prime modulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Prime(u64);

impl Prime {
    pub fn new(p: u64) -> Result<Self> {
        if p >= PRIME_LIMIT {
            return Err(Error::PrimeTooLarge(p));
        }
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Ok(Prime(p))
    }

    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }

    /// Reduces a signed integer to its residue in `[0, p)`.
    #[inline]
    pub fn reduce(self, t: i64) -> u64 {
        t.rem_euclid(self.0 as i64) as u64
    }

    /// Least absolute residue of `t`, in `[-(p-1)/2, (p-1)/2]` for odd `p`.
    pub fn least_abs_residue(self, t: i64) -> i64 {
        let p = self.0 as i64;
        let r = t.rem_euclid(p);
        if r > p / 2 {
            r - p
        } else {
            r
        }
    }

    /// `self^exp` as a `u64`, or `None` on overflow.
    pub fn checked_pow(self, exp: usize) -> Option<u64> {
        u32::try_from(exp).ok().and_then(|e| self.0.checked_pow(e))
    }

    #[inline]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        a * b % self.0
    }

    #[inline]
    pub fn add(self, a: u64, b: u64) -> u64 {
        (a + b) % self.0
    }

    pub fn pow(self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.0;
        base %= self.0;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse of a nonzero residue.
    pub fn inv(self, a: u64) -> Option<u64> {
        let a = a % self.0;
        (a != 0).then(|| self.pow(a, self.0 - 2))
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl<'de> Deserialize<'de> for Prime {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let p = u64::deserialize(d)?;
        Prime::new(p).map_err(serde::de::Error::custom)
    }
}

/// Trial division; desk-scale moduli only.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// An element of F_p, stored as its canonical residue.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldElement(u64);

impl FieldElement {
    pub fn new(value: i64, p: Prime) -> Self {
        FieldElement(p.reduce(value))
    }

    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }
}

/// `e_p(t) = exp(2 pi i t / p)` evaluated directly from the reduced residue.
pub fn ep_phase(t: i64, p: Prime) -> Complex64 {
    phase_of_residue(p.reduce(t), p.get())
}

#[inline]
fn phase_of_residue(k: u64, p: u64) -> Complex64 {
    let (s, c) = (TAU * k as f64 / p as f64).sin_cos();
    Complex64::new(c, s)
}

/// The `p` roots of unity `e_p(0), ..., e_p(p-1)`.
#[derive(Clone, Debug)]
pub struct PhaseTable {
    p: Prime,
    roots: Vec<Complex64>,
}

impl PhaseTable {
    pub fn new(p: Prime) -> Self {
        let roots = (0..p.get()).map(|k| phase_of_residue(k, p.get())).collect();
        PhaseTable { p, roots }
    }

    pub fn prime(&self) -> Prime {
        self.p
    }

    #[inline]
    pub fn phase(&self, t: i64) -> Complex64 {
        self.roots[self.p.reduce(t) as usize]
    }

    /// Phase of an already reduced residue.
    #[inline]
    pub fn of_residue(&self, k: u64) -> Complex64 {
        self.roots[k as usize]
    }
}

/// Shape of the grid `[0, p)^dims` in row-major order, last axis fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridShape {
    p: Prime,
    dims: usize,
    cells: usize,
}

impl GridShape {
    pub fn new(p: Prime, dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        let cells = p
            .checked_pow(dims)
            .and_then(|c| usize::try_from(c).ok())
            .ok_or(Error::GridOverflow(p.get(), dims))?;
        Ok(GridShape { p, dims, cells })
    }

    #[inline]
    pub fn prime(&self) -> Prime {
        self.p
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.dims
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Distance in the flat array between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        (self.p.get() as usize).pow((self.dims - 1 - axis) as u32)
    }

    pub fn grid_index(&self, coords: &[u64]) -> Result<usize> {
        if coords.len() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                found: coords.len(),
            });
        }
        let p = self.p.get();
        let mut idx = 0usize;
        for &c in coords {
            debug_assert!(c < p);
            idx = idx * p as usize + (c % p) as usize;
        }
        Ok(idx)
    }

    pub fn grid_coords(&self, mut index: usize) -> Vec<u64> {
        debug_assert!(index < self.cells);
        let p = self.p.get() as usize;
        let mut coords = vec![0u64; self.dims];
        for c in coords.iter_mut().rev() {
            *c = (index % p) as u64;
            index /= p;
        }
        coords
    }
}

/// Upper bound on the number of grid cells an operation may allocate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellBudget {
    limit: Option<u64>,
}

impl CellBudget {
    pub const DEFAULT_LIMIT: u64 = 1 << 27;
    pub const ENV_VAR: &'static str = "BOXLATTICE_MAX_CELLS";

    pub fn new(limit: u64) -> Self {
        CellBudget { limit: Some(limit) }
    }

    pub fn unlimited() -> Self {
        CellBudget { limit: None }
    }

    /// Default limit, overridden by `BOXLATTICE_MAX_CELLS` when set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(Self::ENV_VAR) {
            Ok(v) => v.trim().parse::<u64>().map(CellBudget::new).map_err(|_| {
                Error::InvalidConfig(format!("{} must be an integer, got `{v}`", Self::ENV_VAR))
            }),
            Err(_) => Ok(CellBudget::default()),
        }
    }

    pub fn limit(&self) -> Option<u64> {
        self.limit
    }

    pub fn check(&self, what: &'static str, p: Prime, dims: usize) -> Result<()> {
        let cells = (p.get() as u128)
            .checked_pow(dims as u32)
            .unwrap_or(u128::MAX);
        self.check_cells(what, cells)
    }

    pub fn check_cells(&self, what: &'static str, cells: u128) -> Result<()> {
        match self.limit {
            Some(limit) if cells > limit as u128 => {
                Err(Error::GuardExceeded { what, cells, limit })
            }
            _ => Ok(()),
        }
    }
}

impl Default for CellBudget {
    fn default() -> Self {
        CellBudget::new(Self::DEFAULT_LIMIT)
    }
}
