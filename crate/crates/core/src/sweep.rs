//! All-translate count fields `x -> N_{x+B}(V)` and their statistics.

use std::collections::BTreeMap;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::accum::{u128_parts, CompensatedSum};
use crate::boxes::{count_in_box, expected_count, CyclicBox};
use crate::error::{Error, Result};
use crate::ffgrid::{CellBudget, GridShape, Prime};
use crate::variety::{PointSet, VarietySpec};

/// Cell limit for the brute-force oracle sweep.
pub const BRUTEFORCE_MAX_CELLS: u64 = 1 << 20;

/// One integer per cell of `[0, p)^dims`, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountField {
    shape: GridShape,
    counts: Vec<u64>,
}

impl CountField {
    pub fn zeros(shape: GridShape) -> Self {
        let counts = vec![0; shape.cells()];
        CountField { shape, counts }
    }

    pub fn from_counts(shape: GridShape, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != shape.cells() {
            return Err(Error::DimensionMismatch {
                expected: shape.cells(),
                found: counts.len(),
            });
        }
        Ok(CountField { shape, counts })
    }

    /// The 0/1 indicator grid of a point set.
    pub fn indicator(points: &PointSet, budget: &CellBudget) -> Result<Self> {
        budget.check("indicator grid", points.prime(), points.dims())?;
        let shape = GridShape::new(points.prime(), points.dims())?;
        let mut field = CountField::zeros(shape);
        for z in points.iter() {
            let idx = field.shape.grid_index(z)?;
            field.counts[idx] = 1;
        }
        Ok(field)
    }

    #[inline]
    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn at(&self, coords: &[u64]) -> Result<u64> {
        Ok(self.counts[self.shape.grid_index(coords)?])
    }

    pub fn total(&self) -> u128 {
        self.counts.iter().map(|&c| c as u128).sum()
    }

    pub fn sum_of_squares(&self) -> u128 {
        self.counts.iter().map(|&c| (c as u128) * (c as u128)).sum()
    }

    pub fn is_indicator(&self) -> bool {
        self.counts.iter().all(|&c| c <= 1)
    }

    /// Number of cells holding each count value.
    pub fn histogram(&self) -> BTreeMap<u64, u64> {
        let mut h = BTreeMap::new();
        for &c in &self.counts {
            *h.entry(c).or_insert(0) += 1;
        }
        h
    }
}

/// Entry at `x` is `sum_{m in B} indicator(x + m)`, computed by one cyclic
/// sliding-window pass per axis.
pub fn sweep_counts(
    indicator: &CountField,
    bx: &CyclicBox,
    budget: &CellBudget,
) -> Result<CountField> {
    let shape = indicator.shape().clone();
    if bx.dims() != shape.dims() {
        return Err(Error::DimensionMismatch {
            expected: shape.dims(),
            found: bx.dims(),
        });
    }
    if bx.prime() != shape.prime() {
        return Err(Error::InvalidBox(format!(
            "box over F_{} applied to a grid over F_{}",
            bx.prime(),
            shape.prime()
        )));
    }
    budget.check("count field", shape.prime(), shape.dims())?;
    let p = shape.prime().get() as usize;
    let mut src = indicator.counts.clone();
    let mut dst = vec![0u64; shape.cells()];
    for (axis, interval) in bx.intervals().iter().enumerate() {
        slide_axis(
            &src,
            &mut dst,
            p,
            shape.stride(axis),
            interval.start() as usize,
            interval.length() as usize,
        );
        std::mem::swap(&mut src, &mut dst);
    }
    Ok(CountField { shape, counts: src })
}

fn slide_axis(src: &[u64], dst: &mut [u64], p: usize, stride: usize, start: usize, len: usize) {
    let block = p * stride;
    if stride == 1 {
        dst.par_chunks_mut(block)
            .zip(src.par_chunks(block))
            .with_min_len(64)
            .for_each(|(d, s)| {
                let mut window: u64 = (0..len).map(|k| s[(start + k) % p]).sum();
                for x in 0..p {
                    d[x] = window;
                    window = window + s[(x + start + len) % p] - s[(x + start) % p];
                }
            });
        return;
    }
    // Lines along this axis are the columns of each (p x stride) block; slide
    // all columns of a block together, one row at a time.
    dst.par_chunks_mut(block)
        .zip(src.par_chunks(block))
        .for_each(|(d, s)| {
            let row = |i: usize| &s[i * stride..(i + 1) * stride];
            let mut window = vec![0u64; stride];
            for k in 0..len {
                for (w, &v) in window.iter_mut().zip(row((start + k) % p)) {
                    *w += v;
                }
            }
            for x in 0..p {
                d[x * stride..(x + 1) * stride].copy_from_slice(&window);
                let incoming = row((x + start + len) % p);
                let outgoing = row((x + start) % p);
                for ((w, &a), &b) in window.iter_mut().zip(incoming).zip(outgoing) {
                    *w = *w + a - b;
                }
            }
        });
}

/// Reference sweep: counts the points of every translate directly.
pub fn sweep_counts_bruteforce(points: &PointSet, bx: &CyclicBox) -> Result<CountField> {
    if bx.dims() != points.dims() {
        return Err(Error::DimensionMismatch {
            expected: points.dims(),
            found: bx.dims(),
        });
    }
    CellBudget::new(BRUTEFORCE_MAX_CELLS).check(
        "brute-force sweep",
        points.prime(),
        points.dims(),
    )?;
    let shape = GridShape::new(points.prime(), points.dims())?;
    let counts = (0..shape.cells())
        .into_par_iter()
        .map(|idx| {
            let x = shape.grid_coords(idx);
            bx.translate(&x).map(|t| count_in_box(points, &t))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CountField { shape, counts })
}

/// `sum_x (N_x - expected)^2`, with the integer power sums taken exactly and
/// the remaining float terms combined in compensated arithmetic.
pub fn second_moment(field: &CountField, expected: f64) -> f64 {
    let (sq_hi, sq_lo) = u128_parts(field.sum_of_squares());
    let (tot_hi, tot_lo) = u128_parts(field.total());
    let cells = field.shape.cells() as f64;
    let mut s = CompensatedSum::new();
    s.add(sq_hi);
    s.add(sq_lo);
    s.add_product(-2.0 * expected, tot_hi);
    s.add_product(-2.0 * expected, tot_lo);
    let e2 = expected * expected;
    let e2_err = expected.mul_add(expected, -e2);
    s.add_product(cells, e2);
    s.add_product(cells, e2_err);
    s.value().max(0.0)
}

/// Second moment about the field's own mean as an exact rational,
/// `(P sum N^2 - (sum N)^2) / P` with `P` the number of cells.
pub fn second_moment_exact(field: &CountField) -> Option<Ratio<u128>> {
    let cells = field.shape.cells() as u128;
    let total = field.total();
    let num = cells
        .checked_mul(field.sum_of_squares())?
        .checked_sub(total.checked_mul(total)?)?;
    Some(Ratio::new(num, cells))
}

/// The definition `sum_x (N_x - expected)^2`, cell by cell.
pub fn second_moment_direct(field: &CountField, expected: f64) -> f64 {
    field
        .counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d
        })
        .collect::<CompensatedSum>()
        .value()
}

/// `S / (p^(n+1+delta) vol)`; for joint fields pass `vol(B) vol(B')`.
pub fn moment_ratio(second_moment: f64, p: Prime, n: usize, delta: i32, volume: u64) -> f64 {
    let exp = n as i32 + 1 + delta;
    second_moment / ((p.get() as f64).powi(exp) * volume as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExceptionalSet {
    pub count: u64,
    pub fraction: f64,
}

/// Translates with `|N_x - expected| > epsilon expected`; when `expected` is 0
/// every nonempty translate counts as exceptional.
pub fn exceptional_set(field: &CountField, expected: f64, epsilon: f64) -> ExceptionalSet {
    let count = if expected == 0.0 {
        field.counts.iter().filter(|&&c| c > 0).count()
    } else {
        let tol = epsilon * expected;
        field
            .counts
            .iter()
            .filter(|&&c| (c as f64 - expected).abs() > tol)
            .count()
    } as u64;
    ExceptionalSet {
        count,
        fraction: count as f64 / field.shape.cells() as f64,
    }
}

pub fn zero_fraction(field: &CountField) -> f64 {
    let zeros = field.counts.iter().filter(|&&c| c == 0).count();
    zeros as f64 / field.shape.cells() as f64
}

pub fn nonempty_translate_count(field: &CountField) -> u64 {
    field.counts.iter().filter(|&&c| c > 0).count() as u64
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticePoint {
    pub coords: Vec<u64>,
    /// Some `a_i` equals `floor(p / L_i)`; such boxes may wrap onto `a_i = 0`.
    pub boundary: bool,
}

/// Offsets `a_i L_i`, `0 <= a_i <= floor(p / L_i)`, at which translates of
/// the box tile the grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranslateLattice {
    pub steps: Vec<u64>,
    pub points: Vec<LatticePoint>,
}

pub fn lattice_sample(bx: &CyclicBox) -> TranslateLattice {
    let p = bx.prime().get();
    let steps = bx.lengths();
    // per axis: (offset, is_boundary); offsets equal to p coincide with 0 and are dropped
    let axes: Vec<Vec<(u64, bool)>> = steps
        .iter()
        .map(|&l| {
            let top = p / l;
            (0..=top)
                .filter(|a| a * l < p)
                .map(|a| (a * l, a == top))
                .collect()
        })
        .collect();
    let mut points = vec![LatticePoint {
        coords: Vec::new(),
        boundary: false,
    }];
    for axis in &axes {
        points = points
            .iter()
            .flat_map(|lp| {
                axis.iter().map(move |&(x, b)| {
                    let mut coords = lp.coords.clone();
                    coords.push(x);
                    LatticePoint {
                        coords,
                        boundary: lp.boundary || b,
                    }
                })
            })
            .collect();
    }
    TranslateLattice { steps, points }
}

impl TranslateLattice {
    /// Number of lattice translates of `bx` containing `z`.
    pub fn coverage(&self, bx: &CyclicBox, z: &[u64]) -> usize {
        self.points
            .iter()
            .filter(|lp| bx.translate(&lp.coords).is_ok_and(|t| t.contains(z)))
            .count()
    }
}

/// Summary statistics of one count field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub p: u64,
    pub r: usize,
    pub n: usize,
    pub delta: i32,
    pub n_v: u64,
    pub vol_b: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vol_b2: Option<u64>,
    pub expected: f64,
    pub second_moment: f64,
    pub bound_ratio: f64,
    pub epsilon: f64,
    pub exceptional_count: u64,
    pub exceptional_fraction: f64,
    pub zero_fraction: f64,
    pub nonempty_translates: u64,
}

impl MomentReport {
    /// Statistics of `field`, the sweep of `V` (or of its graph, when `vol_b2`
    /// is set) by a box of volume `vol_b` (times `vol_b2`).
    pub fn from_field(
        field: &CountField,
        spec: &VarietySpec,
        n_v: u64,
        vol_b: u64,
        vol_b2: Option<u64>,
        epsilon: f64,
    ) -> Self {
        let p = field.shape().prime();
        let volume = vol_b * vol_b2.unwrap_or(1);
        let expected = expected_count(n_v, volume, p, field.shape().dims());
        let s = second_moment(field, expected);
        let exc = exceptional_set(field, expected, epsilon);
        MomentReport {
            p: p.get(),
            r: spec.r,
            n: spec.n,
            delta: spec.delta(),
            n_v,
            vol_b,
            vol_b2,
            expected,
            second_moment: s,
            bound_ratio: moment_ratio(s, p, spec.n, spec.delta(), volume),
            epsilon,
            exceptional_count: exc.count,
            exceptional_fraction: exc.fraction,
            zero_fraction: zero_fraction(field),
            nonempty_translates: nonempty_translate_count(field),
        }
    }
}

/// Checks `sum_x N_x = N(V) vol`.
pub fn check_mass(field: &CountField, n_v: u64, volume: u64) -> Result<()> {
    let want = n_v as u128 * volume as u128;
    let got = field.total();
    if got != want {
        return Err(Error::InvariantViolation(format!(
            "mass conservation: field sums to {got}, expected N(V) vol = {want}"
        )));
    }
    Ok(())
}
