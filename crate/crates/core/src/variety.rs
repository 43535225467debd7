//! Polynomial systems over F_p, their point sets, and declared invariants.
//!
//! Dimension `n`, degree `d` and the singular-locus dimension `delta` are
//! carried as metadata supplied by the catalog or the spec file; nothing here
//! attempts to compute them.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ffgrid::{CellBudget, Prime};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialTerm {
    pub coeff: i64,
    pub exps: Vec<u32>,
}

impl MonomialTerm {
    pub fn new(coeff: i64, exps: Vec<u32>) -> Self {
        MonomialTerm { coeff, exps }
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    pub terms: Vec<MonomialTerm>,
}

impl Polynomial {
    pub fn new(terms: Vec<MonomialTerm>) -> Self {
        Polynomial { terms }
    }

    /// Degree over the integers, ignoring terms with zero coefficient.
    pub fn total_degree(&self) -> u32 {
        self.terms
            .iter()
            .filter(|t| t.coeff != 0)
            .map(MonomialTerm::degree)
            .max()
            .unwrap_or(0)
    }

    /// Checks that every term lives in `r` variables.
    pub fn check_arity(&self, r: usize) -> Result<()> {
        for t in &self.terms {
            if t.exps.len() != r {
                return Err(Error::DimensionMismatch {
                    expected: r,
                    found: t.exps.len(),
                });
            }
        }
        Ok(())
    }

    /// Reduces coefficients mod `p` for repeated evaluation.
    pub fn compile(&self, p: Prime) -> CompiledPoly {
        let terms = self
            .terms
            .iter()
            .map(|t| (p.reduce(t.coeff), t.exps.clone()))
            .filter(|(c, _)| *c != 0)
            .collect();
        CompiledPoly { p, terms }
    }
}

/// A polynomial with coefficients already reduced mod `p`.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    p: Prime,
    terms: Vec<(u64, Vec<u32>)>,
}

impl CompiledPoly {
    /// Evaluates at a point whose length has already been validated.
    #[inline]
    pub fn eval_unchecked(&self, point: &[u64]) -> u64 {
        let p = self.p;
        let mut acc = 0u64;
        for (c, exps) in &self.terms {
            let mut m = *c;
            for (&x, &e) in point.iter().zip(exps) {
                if e != 0 {
                    m = p.mul(m, p.pow(x, e as u64));
                }
            }
            acc = p.add(acc, m);
        }
        acc
    }
}

pub fn evaluate_poly(poly: &Polynomial, point: &[u64], p: Prime) -> Result<u64> {
    poly.check_arity(point.len())?;
    Ok(poly.compile(p).eval_unchecked(point))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarietySpec {
    pub name: String,
    pub r: usize,
    pub n: usize,
    pub d: u32,
    /// Declared singular-locus dimension; `None` reads as the always-valid
    /// upper bound `n - 2` (which is `-1` for curves).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<i32>,
    pub polys: Vec<Polynomial>,
}

impl VarietySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidVariety(format!("{}: {msg}", self.name)));
        if self.r < 2 {
            return bad(format!("ambient dimension r={} must be at least 2", self.r));
        }
        if self.n == 0 || self.n >= self.r {
            return bad(format!(
                "dimension n={} must satisfy 0 < n < r={}",
                self.n, self.r
            ));
        }
        if self.d == 0 {
            return bad("degree d must be positive".into());
        }
        if let Some(delta) = self.delta {
            let max = self.n as i32 - 2;
            if delta < -1 || (delta > max && delta != -1) {
                return bad(format!("delta={delta} must be -1 or at most n-2={max}"));
            }
        }
        if self.polys.is_empty() {
            return bad("defining system is empty".into());
        }
        for (i, poly) in self.polys.iter().enumerate() {
            if poly.terms.is_empty() {
                return bad(format!("polynomial {i} has no terms"));
            }
            poly.check_arity(self.r)
                .or_else(|e| bad(format!("polynomial {i}: {e}")))?;
            if poly.total_degree() == 0 {
                return bad(format!("polynomial {i} is constant"));
            }
        }
        Ok(())
    }

    pub fn delta(&self) -> i32 {
        self.delta.unwrap_or(self.n as i32 - 2)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: VarietySpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("variety spec serializes")
    }
}

/// The F_p-points of a variety, flat and sorted lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointSet {
    p: Prime,
    r: usize,
    coords: Vec<u64>,
}

impl PointSet {
    pub fn empty(p: Prime, r: usize) -> Self {
        PointSet {
            p,
            r,
            coords: Vec::new(),
        }
    }

    /// Builds a point set from arbitrary tuples: reduces, sorts and removes duplicates.
    pub fn from_points(
        p: Prime,
        r: usize,
        points: impl IntoIterator<Item = Vec<u64>>,
    ) -> Result<Self> {
        let mut pts: Vec<Vec<u64>> = Vec::new();
        for pt in points {
            if pt.len() != r {
                return Err(Error::DimensionMismatch {
                    expected: r,
                    found: pt.len(),
                });
            }
            pts.push(pt.into_iter().map(|c| c % p.get()).collect());
        }
        pts.sort_unstable();
        pts.dedup();
        Ok(PointSet {
            p,
            r,
            coords: pts.concat(),
        })
    }

    pub(crate) fn from_sorted_flat(p: Prime, r: usize, coords: Vec<u64>) -> Self {
        debug_assert_eq!(coords.len() % r, 0);
        PointSet { p, r, coords }
    }

    #[inline]
    pub fn prime(&self) -> Prime {
        self.p
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.r
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, u64> {
        self.coords.chunks_exact(self.r)
    }

    pub fn point(&self, i: usize) -> &[u64] {
        &self.coords[i * self.r..(i + 1) * self.r]
    }

    pub fn to_vecs(&self) -> Vec<Vec<u64>> {
        self.iter().map(<[u64]>::to_vec).collect()
    }
}

/// All common zeros mod `p`, by exhaustion over `[0, p)^r`.
pub fn enumerate_points(spec: &VarietySpec, p: Prime, budget: &CellBudget) -> Result<PointSet> {
    spec.validate()?;
    budget.check("variety enumeration", p, spec.r)?;
    let polys: Vec<CompiledPoly> = spec.polys.iter().map(|f| f.compile(p)).collect();
    let r = spec.r;
    let q = p.get();

    // Partition on the first coordinate; rayon's ordered collect keeps the
    // lexicographic order of the merged list.
    let chunks: Vec<Vec<u64>> = (0..q)
        .into_par_iter()
        .map(|x0| {
            let mut found = Vec::new();
            let mut pt = vec![0u64; r];
            pt[0] = x0;
            loop {
                if polys.iter().all(|f| f.eval_unchecked(&pt) == 0) {
                    found.extend_from_slice(&pt);
                }
                // odometer over coordinates 1..r, last fastest
                let mut axis = r - 1;
                loop {
                    if axis == 0 {
                        return found;
                    }
                    pt[axis] += 1;
                    if pt[axis] < q {
                        break;
                    }
                    pt[axis] = 0;
                    axis -= 1;
                }
            }
        })
        .collect();
    let points = PointSet::from_sorted_flat(p, r, chunks.concat());
    if let Some(msg) = lang_weil_warning(spec, points.len() as u64, p) {
        log::warn!("{msg}");
    }
    Ok(points)
}

pub fn point_count(spec: &VarietySpec, p: Prime, budget: &CellBudget) -> Result<u64> {
    enumerate_points(spec, p, budget).map(|pts| pts.len() as u64)
}

/// `(N(V) - p^n)` normalised by the Lang-Weil error scale.
///
/// The scale is `(d-1)(d-2) p^(n-1/2)` for `d > 2` and `p^(n-1/2)` otherwise.
pub fn lang_weil_residual(spec: &VarietySpec, n_v: u64, p: Prime) -> f64 {
    let q = p.get() as f64;
    let main = q.powi(spec.n as i32);
    (n_v as f64 - main) / lang_weil_scale(spec, p)
}

fn lang_weil_scale(spec: &VarietySpec, p: Prime) -> f64 {
    let q = p.get() as f64;
    let d = spec.d as f64;
    let genus_factor = if spec.d > 2 {
        (d - 1.0) * (d - 2.0)
    } else {
        1.0
    };
    genus_factor * q.powf(spec.n as f64 - 0.5)
}

/// Deviation of `N(V)` from `p^n` beyond ten error scales usually means the
/// declared `n` or `d` is wrong, or the system is reducible.
pub fn lang_weil_warning(spec: &VarietySpec, n_v: u64, p: Prime) -> Option<String> {
    let res = lang_weil_residual(spec, n_v, p);
    (res.abs() > 10.0).then(|| {
        format!(
            "{} over F_{p}: N(V)={n_v} is {res:.2} Lang-Weil scales from p^{}; check declared n={} d={} (or a reducible system)",
            spec.name, spec.n, spec.n, spec.d
        )
    })
}
