//! CSV and JSON emission. Column order is part of the file format, versioned
//! by the leading `#boxlattice-v1` comment line.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::catalog::CatalogEntry;
use crate::error::Result;
use crate::expsum::{ExpSumReport, Lemma2Report};
use crate::sweep::{CountField, MomentReport};

pub const FORMAT_VERSION: &str = "boxlattice-v1";

pub const MOMENT_COLUMNS: [&str; 13] = [
    "p",
    "r",
    "n",
    "delta",
    "vol_B",
    "N_V",
    "expected",
    "second_moment",
    "bound_ratio",
    "epsilon",
    "exceptional_fraction",
    "zero_fraction",
    "nonempty_translates",
];

pub const LEMMA2_COLUMNS: [&str; 8] = [
    "p",
    "start",
    "length",
    "total",
    "bound",
    "satisfied",
    "terms_satisfied",
    "worst_term_ratio",
];

/// Fixed 9-decimal rendering used for every float in text output.
pub fn fmt_f64(x: f64) -> String {
    let s = format!("{x:.9}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

/// Rounds to 9 decimals for JSON output.
pub fn round9(x: f64) -> f64 {
    let r = (x * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn header<W: Write>(out: &mut W) -> Result<()> {
    writeln!(out, "#{FORMAT_VERSION}")?;
    Ok(())
}

/// One row per report; joint reports put `vol(B) vol(B')` in `vol_B`.
pub fn write_moment_csv<W: Write>(mut out: W, rows: &[MomentReport]) -> Result<()> {
    header(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MOMENT_COLUMNS)?;
    for r in rows {
        let vol = r.vol_b * r.vol_b2.unwrap_or(1);
        w.write_record([
            r.p.to_string(),
            r.r.to_string(),
            r.n.to_string(),
            r.delta.to_string(),
            vol.to_string(),
            r.n_v.to_string(),
            fmt_f64(r.expected),
            fmt_f64(r.second_moment),
            fmt_f64(r.bound_ratio),
            fmt_f64(r.epsilon),
            fmt_f64(r.exceptional_fraction),
            fmt_f64(r.zero_fraction),
            r.nonempty_translates.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_lemma2_csv<W: Write>(mut out: W, rows: &[Lemma2Report]) -> Result<()> {
    header(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LEMMA2_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.p.to_string(),
            r.start.to_string(),
            r.length.to_string(),
            fmt_f64(r.total),
            fmt_f64(r.bound),
            r.satisfied.to_string(),
            r.terms_satisfied.to_string(),
            fmt_f64(r.worst_term_ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_expsum_csv<W: Write>(mut out: W, rows: &[(u64, ExpSumReport)]) -> Result<()> {
    header(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "p",
        "re",
        "im",
        "modulus",
        "katz_bound",
        "satisfied",
        "bombieri_regime",
    ])?;
    for (p, r) in rows {
        w.write_record([
            p.to_string(),
            fmt_f64(round9(r.re)),
            fmt_f64(round9(r.im)),
            fmt_f64(r.modulus),
            fmt_f64(r.katz_bound),
            r.satisfied.to_string(),
            r.bombieri_regime.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table with the version comment line.
pub fn write_table_csv<W: Write>(mut out: W, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    header(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_catalog_csv<W: Write>(mut out: W, entries: &[CatalogEntry]) -> Result<()> {
    header(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "equation", "n", "d", "delta", "min_prime", "params"])?;
    for e in entries {
        w.write_record([
            e.name.to_string(),
            e.equation.to_string(),
            e.n.to_string(),
            e.d.to_string(),
            e.delta.to_string(),
            e.min_prime.to_string(),
            e.params.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Full count field, one row per cell in row-major order.
pub fn write_field_csv<W: Write>(mut out: W, field: &CountField) -> Result<()> {
    header(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    let dims = field.shape().dims();
    let mut cols: Vec<String> = (1..=dims).map(|i| format!("x{i}")).collect();
    cols.push("count".into());
    w.write_record(&cols)?;
    for (idx, &c) in field.counts().iter().enumerate() {
        let mut rec: Vec<String> = field
            .shape()
            .grid_coords(idx)
            .iter()
            .map(u64::to_string)
            .collect();
        rec.push(c.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    format: &'a str,
    #[serde(flatten)]
    body: T,
}

/// Pretty JSON wrapped with the format version.
pub fn write_json<W: Write, T: Serialize>(mut out: W, body: T) -> Result<()> {
    serde_json::to_writer_pretty(
        &mut out,
        &Versioned {
            format: FORMAT_VERSION,
            body,
        },
    )?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
pub struct FieldJson<'a> {
    pub p: u64,
    pub dims: usize,
    pub histogram: BTreeMap<u64, u64>,
    pub counts: &'a [u64],
}

impl<'a> FieldJson<'a> {
    pub fn new(field: &'a CountField) -> Self {
        FieldJson {
            p: field.shape().prime().get(),
            dims: field.shape().dims(),
            histogram: field.histogram(),
            counts: field.counts(),
        }
    }
}
