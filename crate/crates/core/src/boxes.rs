//! Cyclic boxes `I_1 x ... x I_r` in `(Z/p)^r`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ffgrid::Prime;
use crate::variety::PointSet;

/// `{start, start+1, ..., start+length-1}` taken mod `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CyclicInterval {
    p: Prime,
    start: u64,
    length: u64,
}

impl CyclicInterval {
    pub fn new(start: u64, length: u64, p: Prime) -> Result<Self> {
        if length == 0 || length > p.get() {
            return Err(Error::InvalidBox(format!(
                "interval length {length} outside [1, {p}]"
            )));
        }
        Ok(CyclicInterval {
            p,
            start: start % p.get(),
            length,
        })
    }

    /// The closed integer range `[lo, hi]`, which must not wrap.
    pub fn closed(lo: u64, hi: u64, p: Prime) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidBox(format!("empty range [{lo}, {hi}]")));
        }
        Self::new(lo, hi - lo + 1, p)
    }

    pub fn full(p: Prime) -> Self {
        CyclicInterval {
            p,
            start: 0,
            length: p.get(),
        }
    }

    #[inline]
    pub fn start(&self) -> u64 {
        self.start
    }

    #[inline]
    pub fn length(&self) -> u64 {
        self.length
    }

    #[inline]
    pub fn prime(&self) -> Prime {
        self.p
    }

    #[inline]
    pub fn contains(&self, m: u64) -> bool {
        let q = self.p.get();
        (m % q + q - self.start) % q < self.length
    }

    pub fn shifted(&self, by: u64) -> Self {
        CyclicInterval {
            start: (self.start + by % self.p.get()) % self.p.get(),
            ..*self
        }
    }

    pub fn members(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.length).map(move |k| (self.start + k) % self.p.get())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CyclicBox {
    p: Prime,
    intervals: Vec<CyclicInterval>,
}

impl CyclicBox {
    pub fn new(intervals: Vec<CyclicInterval>) -> Result<Self> {
        let p = intervals
            .first()
            .ok_or_else(|| Error::InvalidBox("box needs at least one axis".into()))?
            .prime();
        if intervals.iter().any(|i| i.prime() != p) {
            return Err(Error::InvalidBox("intervals over different primes".into()));
        }
        let vol = intervals
            .iter()
            .try_fold(1u64, |acc, i| acc.checked_mul(i.length()));
        if vol.is_none() {
            return Err(Error::InvalidBox("volume overflows u64".into()));
        }
        Ok(CyclicBox { p, intervals })
    }

    /// `[0, L_1) x ... x [0, L_r)`.
    pub fn from_lengths(lengths: &[u64], p: Prime) -> Result<Self> {
        Self::new(
            lengths
                .iter()
                .map(|&l| CyclicInterval::new(0, l, p))
                .collect::<Result<_>>()?,
        )
    }

    pub fn full(p: Prime, dims: usize) -> Self {
        CyclicBox {
            p,
            intervals: vec![CyclicInterval::full(p); dims],
        }
    }

    /// `B x B'` over `r + s` axes.
    pub fn product(&self, other: &CyclicBox) -> Result<Self> {
        let mut intervals = self.intervals.clone();
        intervals.extend_from_slice(&other.intervals);
        Self::new(intervals)
    }

    #[inline]
    pub fn prime(&self) -> Prime {
        self.p
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[CyclicInterval] {
        &self.intervals
    }

    pub fn lengths(&self) -> Vec<u64> {
        self.intervals.iter().map(CyclicInterval::length).collect()
    }

    pub fn volume(&self) -> u64 {
        self.intervals.iter().map(CyclicInterval::length).product()
    }

    /// `x + B`, componentwise mod `p`.
    pub fn translate(&self, x: &[u64]) -> Result<Self> {
        if x.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: x.len(),
            });
        }
        Ok(CyclicBox {
            p: self.p,
            intervals: self
                .intervals
                .iter()
                .zip(x)
                .map(|(i, &xi)| i.shifted(xi))
                .collect(),
        })
    }

    pub fn contains(&self, point: &[u64]) -> bool {
        point.len() == self.dims()
            && self
                .intervals
                .iter()
                .zip(point)
                .all(|(i, &m)| i.contains(m))
    }
}

impl fmt::Display for CyclicBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, i) in self.intervals.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", i.start(), i.length())?;
        }
        Ok(())
    }
}

/// `N_B(V)`.
pub fn count_in_box(points: &PointSet, bx: &CyclicBox) -> u64 {
    if points.dims() != bx.dims() {
        return 0;
    }
    points.iter().filter(|z| bx.contains(z)).count() as u64
}

/// `N(V) vol(B) / p^dims`.
pub fn expected_count(n_v: u64, volume: u64, p: Prime, dims: usize) -> f64 {
    n_v as f64 * volume as f64 / (p.get() as f64).powi(dims as i32)
}

/// A side length that may depend on the prime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthSpec {
    Fixed(u64),
    /// The full axis, `p`.
    Full,
    /// `ceil(sqrt(p))`.
    Sqrt,
    /// `max(1, floor(p / k))`.
    Fraction(u64),
}

impl LengthSpec {
    pub fn resolve(self, p: Prime) -> u64 {
        let q = p.get();
        match self {
            LengthSpec::Fixed(l) => l,
            LengthSpec::Full => q,
            LengthSpec::Sqrt => {
                let mut s = (q as f64).sqrt() as u64;
                while s * s < q {
                    s += 1;
                }
                while s > 0 && (s - 1) * (s - 1) >= q {
                    s -= 1;
                }
                s
            }
            LengthSpec::Fraction(k) => (q / k).max(1),
        }
    }
}

impl FromStr for LengthSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidBox(format!("bad length `{s}` (use N, p, sqrt or p/K)"));
        match s {
            "p" => Ok(LengthSpec::Full),
            "sqrt" => Ok(LengthSpec::Sqrt),
            _ => {
                if let Some(k) = s.strip_prefix("p/") {
                    let k: u64 = k.parse().map_err(|_| bad())?;
                    if k == 0 {
                        return Err(bad());
                    }
                    Ok(LengthSpec::Fraction(k))
                } else {
                    s.parse().map(LengthSpec::Fixed).map_err(|_| bad())
                }
            }
        }
    }
}

impl fmt::Display for LengthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LengthSpec::Fixed(l) => write!(f, "{l}"),
            LengthSpec::Full => f.write_str("p"),
            LengthSpec::Sqrt => f.write_str("sqrt"),
            LengthSpec::Fraction(k) => write!(f, "p/{k}"),
        }
    }
}

/// Prime-independent box description, `start1:len1,start2:len2,...`
/// with `start:` optional.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxSpec {
    axes: Vec<(u64, LengthSpec)>,
}

impl BoxSpec {
    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn resolve(&self, p: Prime) -> Result<CyclicBox> {
        CyclicBox::new(
            self.axes
                .iter()
                .map(|&(start, len)| CyclicInterval::new(start, len.resolve(p), p))
                .collect::<Result<_>>()?,
        )
    }
}

impl FromStr for BoxSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let axes = s
            .split(',')
            .map(|axis| {
                let axis = axis.trim();
                match axis.split_once(':') {
                    Some((start, len)) => {
                        let start = start
                            .trim()
                            .parse::<u64>()
                            .map_err(|_| Error::InvalidBox(format!("bad start in `{axis}`")))?;
                        Ok((start, len.parse()?))
                    }
                    None => Ok((0, axis.parse()?)),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if axes.is_empty() {
            return Err(Error::InvalidBox("empty box".into()));
        }
        Ok(BoxSpec { axes })
    }
}

impl fmt::Display for BoxSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (start, len)) in self.axes.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{start}:{len}")?;
        }
        Ok(())
    }
}

impl Serialize for BoxSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BoxSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}
