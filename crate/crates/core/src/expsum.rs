//! Complete character sums over a variety, interval sums, and the Fourier
//! expansion of a box count into a main term and an error term.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::accum::{pairwise_sum, CompensatedSum, ComplexSum};
use crate::boxes::{count_in_box, CyclicBox, CyclicInterval};
use crate::error::{Error, Result};
use crate::ffgrid::{CellBudget, GridShape, PhaseTable, Prime};
use crate::polymap::{graph_points, joint_count, PolyMap};
use crate::variety::{PointSet, VarietySpec};

/// Limit on `p^(r+s)` frequencies visited by [`fourier_count`].
pub const FOURIER_MAX_FREQUENCIES: u64 = 1 << 24;

/// The functional `u . x + v . g(x)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LinearFunctional {
    pub u: Vec<u64>,
    pub v: Vec<u64>,
}

impl LinearFunctional {
    pub fn new(u: &[i64], v: &[i64], p: Prime) -> Self {
        LinearFunctional {
            u: u.iter().map(|&a| p.reduce(a)).collect(),
            v: v.iter().map(|&a| p.reduce(a)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.u.iter().chain(&self.v).all(|&a| a == 0)
    }

    pub fn negated(&self, p: Prime) -> Self {
        let neg = |a: &u64| (p.get() - a) % p.get();
        LinearFunctional {
            u: self.u.iter().map(neg).collect(),
            v: self.v.iter().map(neg).collect(),
        }
    }
}

/// `sum_{z in V} e_p(u . z + v . g(z))`.
///
/// Phases are binned by residue first, so the complex accumulation runs over
/// at most `p` integer-weighted roots of unity in a fixed order.
pub fn variety_char_sum(
    points: &PointSet,
    func: &LinearFunctional,
    map: Option<&PolyMap>,
    table: &PhaseTable,
) -> Result<Complex64> {
    let p = points.prime();
    if table.prime() != p {
        return Err(Error::InvalidParam(format!(
            "phase table over F_{} used with points over F_{p}",
            table.prime()
        )));
    }
    if func.u.len() != points.dims() {
        return Err(Error::DimensionMismatch {
            expected: points.dims(),
            found: func.u.len(),
        });
    }
    let compiled = match map {
        Some(g) => {
            if g.ambient() != points.dims() {
                return Err(Error::DimensionMismatch {
                    expected: points.dims(),
                    found: g.ambient(),
                });
            }
            if g.len() != func.v.len() {
                return Err(Error::DimensionMismatch {
                    expected: g.len(),
                    found: func.v.len(),
                });
            }
            Some(g.compile(p))
        }
        None if !func.v.is_empty() => {
            return Err(Error::InvalidMap("v given without a map".into()));
        }
        None => None,
    };
    let mut bins = vec![0u64; p.get() as usize];
    let mut image = Vec::new();
    for z in points.iter() {
        let mut t = dot(p, &func.u, z);
        if let Some(g) = &compiled {
            g.apply_into(z, &mut image);
            t = p.add(t, dot(p, &func.v, &image));
        }
        bins[t as usize] += 1;
    }
    Ok(weighted_phase_sum(&bins, table))
}

fn weighted_phase_sum(bins: &[u64], table: &PhaseTable) -> Complex64 {
    let mut acc = ComplexSum::new();
    for (t, &k) in bins.iter().enumerate() {
        if k != 0 {
            acc.add_scaled(k as f64, table.of_residue(t as u64));
        }
    }
    acc.value()
}

#[inline]
fn dot(p: Prime, a: &[u64], b: &[u64]) -> u64 {
    a.iter()
        .zip(b)
        .fold(0, |acc, (&x, &y)| p.add(acc, p.mul(x, y)))
}

/// `(4d + 9)^(n + r) p^((n + 1 + delta) / 2)`; pass `r + s` for joint sums.
pub fn katz_bound(d: u32, n: usize, r_plus_s: usize, delta: i32, p: Prime) -> f64 {
    let base = (4 * d + 9) as f64;
    base.powi((n + r_plus_s) as i32) * (p.get() as f64).powf((n as f64 + 1.0 + delta as f64) / 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpSumReport {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
    pub katz_bound: f64,
    pub satisfied: bool,
    /// Curves are covered by Bombieri's estimate rather than Katz's; the same
    /// numeric bound is applied.
    pub bombieri_regime: bool,
}

impl ExpSumReport {
    pub fn new(value: Complex64, katz_bound: f64, n: usize) -> Self {
        let modulus = value.norm();
        ExpSumReport {
            re: value.re,
            im: value.im,
            modulus,
            katz_bound,
            satisfied: modulus <= katz_bound,
            bombieri_regime: n == 1,
        }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Evaluates the sum for a nonzero functional and compares it with the
/// Katz bound, taking `d` as the largest degree among `V` and `g`.
pub fn char_sum_report(
    spec: &VarietySpec,
    points: &PointSet,
    func: &LinearFunctional,
    map: Option<&PolyMap>,
    table: &PhaseTable,
) -> Result<ExpSumReport> {
    if func.is_zero() {
        return Err(Error::InvalidParam(
            "the functional (u, v) must be nonzero".into(),
        ));
    }
    let value = variety_char_sum(points, func, map, table)?;
    let d = map
        .into_iter()
        .flat_map(|g| g.components().iter().map(|c| c.total_degree()))
        .fold(spec.d, u32::max);
    let s = map.map_or(0, PolyMap::len);
    let bound = katz_bound(d, spec.n, spec.r + s, spec.delta(), points.prime());
    Ok(ExpSumReport::new(value, bound, spec.n))
}

/// `sum_{m in I} e_p(t m)` by the geometric-series closed form.
pub fn interval_sum(interval: &CyclicInterval, t: i64, table: &PhaseTable) -> Complex64 {
    let p = interval.prime();
    let t = p.reduce(t);
    if t == 0 {
        return Complex64::new(interval.length() as f64, 0.0);
    }
    let one = Complex64::new(1.0, 0.0);
    let lead = table.of_residue(p.mul(t, interval.start()));
    let num = one - table.of_residue(p.mul(t, interval.length() % p.get()));
    let den = one - table.of_residue(t);
    lead * num / den
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma2Report {
    pub p: u64,
    pub start: u64,
    pub length: u64,
    /// `sum_{t != 0} |sum_{m in I} e_p(t m)|`.
    pub total: f64,
    /// `2 p ln p`.
    pub bound: f64,
    pub satisfied: bool,
    /// Every term obeys `|sum| <= p / |s|`, `s` the least absolute residue of `t`.
    pub terms_satisfied: bool,
    /// Largest `|sum| |s| / p` over `t != 0`.
    pub worst_term_ratio: f64,
}

/// Total modulus of all nontrivial interval sums. Defined for `p >= 5`,
/// where the sine estimate behind the bound holds.
pub fn lemma2_total(interval: &CyclicInterval, table: &PhaseTable) -> Result<Lemma2Report> {
    let p = interval.prime();
    if p.get() < 5 {
        return Err(Error::InvalidParam(format!(
            "interval-sum total is only checked for p >= 5, got {p}"
        )));
    }
    let q = p.get() as f64;
    let mut total = CompensatedSum::new();
    let mut worst = 0.0f64;
    for t in 1..p.get() as i64 {
        let m = interval_sum(interval, t, table).norm();
        total.add(m);
        let s = p.least_abs_residue(t).unsigned_abs() as f64;
        worst = worst.max(m * s / q);
    }
    let total = total.value();
    let bound = 2.0 * q * q.ln();
    Ok(Lemma2Report {
        p: p.get(),
        start: interval.start(),
        length: interval.length(),
        total,
        bound,
        satisfied: total <= bound,
        terms_satisfied: worst <= 1.0 + 1e-9,
        worst_term_ratio: worst,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FourierCount {
    /// Zero-frequency term `N(V) vol / p^dims`.
    pub main: f64,
    /// Sum of all nonzero-frequency terms (imaginary part dropped).
    pub error: f64,
    /// Imaginary residue of the expansion; zero up to rounding.
    pub error_im: f64,
    pub reconstructed: f64,
    pub direct: u64,
}

impl FourierCount {
    /// `|reconstructed - direct|`.
    pub fn deviation(&self) -> f64 {
        (self.reconstructed - self.direct as f64).abs()
    }
}

/// Expands `N_B` over all frequencies `w in F_p^dims`:
/// `N_B = p^-dims sum_w prod_i (sum_{m in I_i} e_p(-m w_i)) sum_{z} e_p(w . z)`.
pub fn fourier_count(points: &PointSet, bx: &CyclicBox) -> Result<FourierCount> {
    let dims = points.dims();
    if bx.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            found: bx.dims(),
        });
    }
    let p = points.prime();
    CellBudget::new(FOURIER_MAX_FREQUENCIES).check("Fourier expansion", p, dims)?;
    let shape = GridShape::new(p, dims)?;
    let table = PhaseTable::new(p);
    let q = p.get() as usize;
    // per-axis interval factors A_i(w) = sum_{m in I_i} e_p(-m w)
    let factors: Vec<Vec<Complex64>> = bx
        .intervals()
        .iter()
        .map(|i| (0..q as i64).map(|w| interval_sum(i, -w, &table)).collect())
        .collect();
    let cells = shape.cells();
    let scale = 1.0 / cells as f64;

    let terms: Vec<Complex64> = (1..cells)
        .into_par_iter()
        .with_min_len(256)
        .map_init(
            || vec![0u64; q],
            |bins, idx| {
                let w = shape.grid_coords(idx);
                bins.iter_mut().for_each(|b| *b = 0);
                for z in points.iter() {
                    bins[dot(p, &w, z) as usize] += 1;
                }
                let character = weighted_phase_sum(bins, &table);
                let weight: Complex64 = w
                    .iter()
                    .zip(&factors)
                    .map(|(&wi, f)| f[wi as usize])
                    .product();
                weight * character * scale
            },
        )
        .collect();
    let error = pairwise_sum(&terms);
    let main = points.len() as f64 * bx.volume() as f64 * scale;
    Ok(FourierCount {
        main,
        error: error.re,
        error_im: error.im,
        reconstructed: main + error.re,
        direct: count_in_box(points, bx),
    })
}

/// Joint version: expands `N_{B,B'}(V, g)` over `F_p^(r+s)`.
pub fn fourier_count_joint(
    points: &PointSet,
    map: &PolyMap,
    bx: &CyclicBox,
    bx2: &CyclicBox,
) -> Result<FourierCount> {
    let budget = CellBudget::new(FOURIER_MAX_FREQUENCIES);
    let graph = graph_points(points, map, &budget)?;
    let mut fc = fourier_count(&graph, &bx.product(bx2)?)?;
    let direct = joint_count(points, map, bx, bx2)?;
    debug_assert_eq!(direct, fc.direct);
    fc.direct = direct;
    Ok(fc)
}
