//! Batch experiments over several primes and boxes, driven by a JSON config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boxes::{BoxSpec, CyclicBox};
use crate::catalog::{catalog_instantiate, CatalogParams};
use crate::error::{Error, Result};
use crate::expsum::{lemma2_total, Lemma2Report};
use crate::ffgrid::{CellBudget, PhaseTable, Prime};
use crate::polymap::{graph_points, joint_sweep, PolyMap};
use crate::sweep::{
    check_mass, sweep_counts, sweep_counts_bruteforce, CountField, MomentReport,
    BRUTEFORCE_MAX_CELLS,
};
use crate::variety::{enumerate_points, PointSet, VarietySpec};

pub const DEFAULT_EPSILON: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    #[default]
    Moment,
    Lemma2,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidConfig(format!(
                "unknown format `{s}` (csv or json)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
enum ParamValue {
    Int(i64),
    Str(String),
}

fn params_from_json<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<CatalogParams, D::Error> {
    let raw: BTreeMap<String, ParamValue> = BTreeMap::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|(k, v)| {
            let v = match v {
                ParamValue::Int(i) => i.to_string(),
                ParamValue::Str(s) => s,
            };
            (k, v)
        })
        .collect())
}

/// Where the variety comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum VarietySource {
    File(VarietySpec),
    Catalog { name: String, params: CatalogParams },
}

impl VarietySource {
    pub fn instantiate(&self, p: Prime) -> Result<VarietySpec> {
        match self {
            VarietySource::File(spec) => Ok(spec.clone()),
            VarietySource::Catalog { name, params } => catalog_instantiate(name, p, params),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: ExperimentKind,
    #[serde(default)]
    pub variety: Option<PathBuf>,
    #[serde(default)]
    pub catalog: Option<String>,
    #[serde(default, deserialize_with = "params_from_json")]
    pub params: CatalogParams,
    pub primes: Vec<u64>,
    /// Box specs (`start:len,...`; lengths may be `p`, `sqrt` or `p/K`).
    /// For `lemma2` runs each entry is a single interval.
    pub boxes: Vec<BoxSpec>,
    #[serde(default)]
    pub map: Option<PathBuf>,
    #[serde(default)]
    pub box2: Vec<BoxSpec>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub oracle: bool,
    #[serde(default)]
    pub force: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl ExperimentConfig {
    /// Reads a config; relative `variety`, `map` and `output` paths resolve
    /// against the config file's directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.variety, &mut cfg.map, &mut cfg.output]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.primes.is_empty() {
            return bad("at least one prime is required");
        }
        if self.boxes.is_empty() {
            return bad("at least one box is required");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        match self.kind {
            ExperimentKind::Lemma2 => {
                if self.boxes.iter().any(|b| b.dims() != 1) {
                    return bad("lemma2 boxes must be single intervals");
                }
            }
            ExperimentKind::Moment => {
                if self.variety.is_some() == self.catalog.is_some() {
                    return bad("give exactly one of `variety` or `catalog`");
                }
                if self.map.is_some() && self.box2.is_empty() {
                    return bad("`map` needs at least one `box2`");
                }
                if self.map.is_none() && !self.box2.is_empty() {
                    return bad("`box2` given without `map`");
                }
            }
        }
        Ok(())
    }

    pub fn variety_source(&self) -> Result<VarietySource> {
        match (&self.variety, &self.catalog) {
            (Some(path), None) => Ok(VarietySource::File(VarietySpec::from_path(path)?)),
            (None, Some(name)) => Ok(VarietySource::Catalog {
                name: name.clone(),
                params: self.params.clone(),
            }),
            _ => Err(Error::InvalidConfig(
                "give exactly one of `variety` or `catalog`".into(),
            )),
        }
    }
}

/// One (prime, box) row of a moment experiment.
#[derive(Clone, Debug, Serialize)]
pub struct MomentRow {
    pub variety: String,
    #[serde(rename = "box")]
    pub box_spec: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box2: Option<String>,
    #[serde(flatten)]
    pub report: MomentReport,
    pub oracle_checked: bool,
    pub histogram: BTreeMap<u64, u64>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", content = "rows", rename_all = "lowercase")]
pub enum ExperimentOutcome {
    Moment(Vec<MomentRow>),
    Lemma2(Vec<Lemma2Report>),
}

impl ExperimentOutcome {
    pub fn moment_reports(&self) -> Vec<MomentReport> {
        match self {
            ExperimentOutcome::Moment(rows) => rows.iter().map(|r| r.report.clone()).collect(),
            ExperimentOutcome::Lemma2(_) => Vec::new(),
        }
    }
}

/// Sweeps `V` (or its graph) by `bx` (or `bx x bx2`) and checks the hard
/// invariants: mass conservation always, brute-force equality when `oracle`
/// is set and the grid is small enough.
pub fn measure(
    spec: &VarietySpec,
    points: &PointSet,
    bx: &CyclicBox,
    joint: Option<(&PolyMap, &CyclicBox)>,
    epsilon: f64,
    oracle: bool,
    budget: &CellBudget,
) -> Result<(MomentReport, CountField, bool)> {
    let n_v = points.len() as u64;
    let (field, vol_b2, oracle_checked) = match joint {
        None => {
            let ind = CountField::indicator(points, budget)?;
            let field = sweep_counts(&ind, bx, budget)?;
            let checked = oracle && run_oracle(points, bx, &field)?;
            (field, None, checked)
        }
        Some((map, bx2)) => {
            let graph = graph_points(points, map, budget)?;
            let field = joint_sweep(&graph, bx, bx2, budget)?;
            let checked = oracle && run_oracle(&graph, &bx.product(bx2)?, &field)?;
            (field, Some(bx2.volume()), checked)
        }
    };
    check_mass(&field, n_v, bx.volume() * vol_b2.unwrap_or(1))?;
    let report = MomentReport::from_field(&field, spec, n_v, bx.volume(), vol_b2, epsilon);
    Ok((report, field, oracle_checked))
}

fn run_oracle(points: &PointSet, bx: &CyclicBox, field: &CountField) -> Result<bool> {
    let cells = (points.prime().get() as u128).pow(points.dims() as u32);
    if cells > BRUTEFORCE_MAX_CELLS as u128 {
        log::warn!("oracle skipped: {cells} cells exceeds the brute-force limit");
        return Ok(false);
    }
    let brute = sweep_counts_bruteforce(points, bx)?;
    if &brute != field {
        return Err(Error::InvariantViolation(format!(
            "sliding-window sweep disagrees with brute force for box {bx} over F_{}",
            points.prime()
        )));
    }
    Ok(true)
}

pub fn run_experiment(cfg: &ExperimentConfig, budget: &CellBudget) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let budget = if cfg.force {
        CellBudget::unlimited()
    } else {
        *budget
    };
    let primes = cfg
        .primes
        .iter()
        .map(|&p| Prime::new(p).map_err(|e| Error::InvalidConfig(e.to_string())))
        .collect::<Result<Vec<_>>>()?;

    if cfg.kind == ExperimentKind::Lemma2 {
        let mut rows = Vec::new();
        for &p in &primes {
            let table = PhaseTable::new(p);
            for b in &cfg.boxes {
                let interval = b.resolve(p)?.intervals()[0];
                rows.push(lemma2_total(&interval, &table)?);
            }
        }
        return Ok(ExperimentOutcome::Lemma2(rows));
    }

    let source = cfg.variety_source()?;
    let map = match &cfg.map {
        Some(path) => {
            let probe = source.instantiate(primes[0])?;
            Some(PolyMap::from_path(path, probe.r)?)
        }
        None => None,
    };
    let mut rows = Vec::new();
    for &p in &primes {
        let spec = source.instantiate(p)?;
        let dims = spec.r + map.as_ref().map_or(0, PolyMap::len);
        budget.check("variety", p, dims)?;
        let points = enumerate_points(&spec, p, &budget)?;
        for b in &cfg.boxes {
            if b.dims() != spec.r {
                return Err(Error::InvalidConfig(format!(
                    "box `{b}` has {} axes, variety has r={}",
                    b.dims(),
                    spec.r
                )));
            }
            let bx = b.resolve(p)?;
            let second: Vec<Option<&BoxSpec>> = if map.is_some() {
                cfg.box2.iter().map(Some).collect()
            } else {
                vec![None]
            };
            for b2 in second {
                let resolved2 = b2.map(|s| s.resolve(p)).transpose()?;
                let joint = match (&map, &resolved2) {
                    (Some(m), Some(bx2)) => {
                        if bx2.dims() != m.len() {
                            return Err(Error::InvalidConfig(format!(
                                "box2 has {} axes, map has s={}",
                                bx2.dims(),
                                m.len()
                            )));
                        }
                        Some((m, bx2))
                    }
                    _ => None,
                };
                let (report, field, oracle_checked) =
                    measure(&spec, &points, &bx, joint, cfg.epsilon, cfg.oracle, &budget)?;
                rows.push(MomentRow {
                    variety: spec.name.clone(),
                    box_spec: bx.to_string(),
                    box2: resolved2.map(|b| b.to_string()),
                    report,
                    oracle_checked,
                    histogram: field.histogram(),
                });
            }
        }
    }
    Ok(ExperimentOutcome::Moment(rows))
}

/// True when `bound_ratio` never increases along the given rows (in order).
pub fn ratio_non_increasing(rows: &[MomentReport]) -> bool {
    rows.windows(2)
        .all(|w| w[1].bound_ratio <= w[0].bound_ratio)
}
