use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use boxlattice::boxes::count_in_box;
use boxlattice::catalog::{CatalogParams, CATALOG};
use boxlattice::experiment::{
    ratio_non_increasing, run_experiment, ExperimentConfig, ExperimentKind, ExperimentOutcome,
    OutputFormat, VarietySource, DEFAULT_EPSILON,
};
use boxlattice::expsum::{char_sum_report, lemma2_total, LinearFunctional};
use boxlattice::polymap::{
    graph_points, independence_rank, joint_count, joint_sweep, witness_vanishes,
};
use boxlattice::report::{
    fmt_f64, write_catalog_csv, write_expsum_csv, write_field_csv, write_json, write_lemma2_csv,
    write_moment_csv, write_table_csv, FieldJson,
};
use boxlattice::sweep::{check_mass, sweep_counts, CountField};
use boxlattice::variety::enumerate_points;
use boxlattice::{
    BoxSpec, CellBudget, CyclicInterval, Error, LengthSpec, PhaseTable, PolyMap, Prime, VarietySpec,
};

#[derive(Parser)]
#[command(
    name = "boxlattice",
    version,
    about = "Point counts of varieties over F_p in boxes and their translates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in varieties.
    Catalog(OutputArgs),
    /// List the points of V over F_p.
    Enumerate(Common),
    /// Count points of V in one box (or V with g in B x B').
    Count(Common),
    /// Full all-translate count field.
    Sweep(Common),
    /// Second-moment statistics per (prime, box).
    Moment(Common),
    /// Character sum over V against the Katz bound.
    Expsum(ExpsumArgs),
    /// Sum over nonzero frequencies of interval sums against 2p ln p.
    Lemma2(Lemma2Args),
    /// Joint second-moment statistics for a map g and second box B'.
    MapSweep(Common),
    /// Rank of (1, x, g(x)) evaluated on V.
    Indep(Common),
    /// Run a JSON experiment config.
    Run(RunArgs),
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args)]
struct VarietyArgs {
    /// Variety spec JSON.
    #[arg(long, conflicts_with = "catalog", required_unless_present = "catalog")]
    variety: Option<PathBuf>,
    /// Catalog entry name.
    #[arg(long)]
    catalog: Option<String>,
    /// Catalog parameter, `key=value`.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, String)>,
}

#[derive(Args)]
struct Common {
    #[command(flatten)]
    variety: VarietyArgs,
    /// Primes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    prime: Vec<u64>,
    /// Box `start:len,...`; lengths may be `p`, `sqrt` or `p/K`. Repeatable.
    #[arg(long = "box")]
    boxes: Vec<BoxSpec>,
    #[arg(long = "box2")]
    box2: Vec<BoxSpec>,
    /// Map spec JSON (`{"map": [...]}`).
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Re-check sweeps against brute force where the grid is small enough.
    #[arg(long)]
    oracle: bool,
    /// Ignore the memory guard.
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct ExpsumArgs {
    #[command(flatten)]
    common: Common,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    u: Vec<i64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    v: Vec<i64>,
}

#[derive(Args)]
struct Lemma2Args {
    #[arg(long, value_delimiter = ',', required = true)]
    prime: Vec<u64>,
    #[arg(long, default_value_t = 0)]
    start: u64,
    /// Interval length; `p`, `sqrt` and `p/K` are accepted.
    #[arg(long)]
    length: LengthSpec,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Overrides the config's output path.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
    #[arg(long)]
    force: bool,
}

fn parse_param(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}

impl VarietyArgs {
    fn source(&self) -> anyhow::Result<VarietySource> {
        match (&self.variety, &self.catalog) {
            (Some(path), None) => Ok(VarietySource::File(VarietySpec::from_path(path)?)),
            (None, Some(name)) => Ok(VarietySource::Catalog {
                name: name.clone(),
                params: self.params.iter().cloned().collect(),
            }),
            _ => Err(
                Error::InvalidConfig("give exactly one of --variety or --catalog".into()).into(),
            ),
        }
    }
}

impl Common {
    fn budget(&self) -> anyhow::Result<CellBudget> {
        Ok(if self.force {
            CellBudget::unlimited()
        } else {
            CellBudget::from_env()?
        })
    }

    fn primes(&self) -> anyhow::Result<Vec<Prime>> {
        Ok(self
            .prime
            .iter()
            .map(|&p| Prime::new(p))
            .collect::<boxlattice::Result<_>>()?)
    }

    fn map(&self, r: usize) -> anyhow::Result<Option<PolyMap>> {
        Ok(match &self.map {
            Some(path) => Some(PolyMap::from_path(path, r)?),
            None => None,
        })
    }

    fn one_box(&self) -> anyhow::Result<&BoxSpec> {
        match self.boxes.as_slice() {
            [b] => Ok(b),
            [] => Err(Error::InvalidConfig("--box is required".into()).into()),
            _ => Err(Error::InvalidConfig("this subcommand takes a single --box".into()).into()),
        }
    }

    fn one_box2(&self) -> anyhow::Result<Option<&BoxSpec>> {
        match (self.box2.as_slice(), &self.map) {
            ([], None) => Ok(None),
            ([b], Some(_)) => Ok(Some(b)),
            (_, None) => Err(Error::InvalidConfig("--box2 needs --map".into()).into()),
            _ => Err(Error::InvalidConfig("--map needs a single --box2".into()).into()),
        }
    }

    fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            kind: ExperimentKind::Moment,
            variety: self.variety.variety.clone(),
            catalog: self.variety.catalog.clone(),
            params: self
                .variety
                .params
                .iter()
                .cloned()
                .collect::<CatalogParams>(),
            primes: self.prime.clone(),
            boxes: self.boxes.clone(),
            map: self.map.clone(),
            box2: self.box2.clone(),
            epsilon: self.epsilon,
            oracle: self.oracle,
            force: self.force,
            output: self.out.output.clone(),
            format: self.out.format,
        }
    }
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match output {
        Some(path) => {
            std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?
        }
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn plain_csv(header: &[&str], rows: Vec<Vec<String>>) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_table_csv(&mut buf, header, &rows)?;
    Ok(buf)
}

fn json_bytes(body: serde_json::Value) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_json(&mut buf, body)?;
    Ok(buf)
}

fn cmd_catalog(args: &OutputArgs) -> anyhow::Result<Vec<u8>> {
    match args.format {
        OutputFormat::Json => json_bytes(serde_json::json!({ "catalog": CATALOG })),
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_catalog_csv(&mut buf, CATALOG)?;
            Ok(buf)
        }
    }
}

fn cmd_enumerate(args: &Common) -> anyhow::Result<Vec<u8>> {
    let source = args.variety.source()?;
    let budget = args.budget()?;
    let mut rows = Vec::new();
    let mut json = Vec::new();
    let mut r = 0;
    for p in args.primes()? {
        let spec = source.instantiate(p)?;
        r = spec.r;
        let points = enumerate_points(&spec, p, &budget)?;
        for z in points.iter() {
            let mut row = vec![p.to_string()];
            row.extend(z.iter().map(u64::to_string));
            rows.push(row);
        }
        json.push(serde_json::json!({ "p": p, "N_V": points.len(), "points": points.to_vecs() }));
    }
    match args.out.format {
        OutputFormat::Json => json_bytes(serde_json::json!({ "rows": json })),
        OutputFormat::Csv => {
            let mut header = vec!["p".to_string()];
            header.extend((1..=r).map(|i| format!("x{i}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            plain_csv(&header, rows)
        }
    }
}

fn cmd_count(args: &Common) -> anyhow::Result<Vec<u8>> {
    let source = args.variety.source()?;
    let budget = args.budget()?;
    let spec_box = args.one_box()?;
    let spec_box2 = args.one_box2()?;
    let mut rows = Vec::new();
    let mut json = Vec::new();
    for p in args.primes()? {
        let spec = source.instantiate(p)?;
        let points = enumerate_points(&spec, p, &budget)?;
        let bx = spec_box.resolve(p)?;
        let (count, vol, dims, b2) = match (args.map(spec.r)?, spec_box2) {
            (Some(g), Some(b2)) => {
                let bx2 = b2.resolve(p)?;
                let c = joint_count(&points, &g, &bx, &bx2)?;
                (
                    c,
                    bx.volume() * bx2.volume(),
                    spec.r + g.len(),
                    Some(bx2.to_string()),
                )
            }
            _ => (count_in_box(&points, &bx), bx.volume(), spec.r, None),
        };
        let expected = boxlattice::boxes::expected_count(points.len() as u64, vol, p, dims);
        rows.push(vec![
            p.to_string(),
            points.len().to_string(),
            bx.to_string(),
            b2.clone().unwrap_or_default(),
            vol.to_string(),
            count.to_string(),
            fmt_f64(expected),
        ]);
        json.push(serde_json::json!({
            "p": p, "N_V": points.len(), "box": bx.to_string(), "box2": b2,
            "vol_B": vol, "count": count, "expected": expected,
        }));
    }
    match args.out.format {
        OutputFormat::Json => json_bytes(serde_json::json!({ "rows": json })),
        OutputFormat::Csv => plain_csv(
            &["p", "N_V", "box", "box2", "vol_B", "count", "expected"],
            rows,
        ),
    }
}

fn cmd_sweep(args: &Common) -> anyhow::Result<Vec<u8>> {
    let source = args.variety.source()?;
    let budget = args.budget()?;
    let p = match args.primes()?.as_slice() {
        [p] => *p,
        _ => bail!(Error::InvalidConfig("sweep takes a single --prime".into())),
    };
    let spec = source.instantiate(p)?;
    let points = enumerate_points(&spec, p, &budget)?;
    let bx = args.one_box()?.resolve(p)?;
    let field: CountField = match (args.map(spec.r)?, args.one_box2()?) {
        (Some(g), Some(b2)) => {
            let bx2 = b2.resolve(p)?;
            let graph = graph_points(&points, &g, &budget)?;
            let f = joint_sweep(&graph, &bx, &bx2, &budget)?;
            check_mass(&f, points.len() as u64, bx.volume() * bx2.volume())?;
            f
        }
        _ => {
            let f = sweep_counts(&CountField::indicator(&points, &budget)?, &bx, &budget)?;
            check_mass(&f, points.len() as u64, bx.volume())?;
            f
        }
    };
    match args.out.format {
        OutputFormat::Json => json_bytes(serde_json::to_value(FieldJson::new(&field))?),
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_field_csv(&mut buf, &field)?;
            Ok(buf)
        }
    }
}

fn format_outcome(
    outcome: &ExperimentOutcome,
    format: OutputFormat,
    primes: usize,
) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    match outcome {
        ExperimentOutcome::Lemma2(rows) => match format {
            OutputFormat::Csv => write_lemma2_csv(&mut buf, rows)?,
            OutputFormat::Json => write_json(&mut buf, outcome)?,
        },
        ExperimentOutcome::Moment(_) => {
            let reports = outcome.moment_reports();
            let trends = trends(&reports, primes);
            match format {
                OutputFormat::Csv => {
                    write_moment_csv(&mut buf, &reports)?;
                    if let Some(t) = &trends {
                        writeln!(buf, "#bound_ratio_non_increasing={}", join(t))?;
                    }
                }
                OutputFormat::Json => {
                    let mut v = serde_json::to_value(outcome)?;
                    if let Some(t) = trends {
                        v["bound_ratio_non_increasing"] = serde_json::json!(t);
                    }
                    write_json(&mut buf, v)?;
                }
            }
        }
    }
    Ok(buf)
}

fn join(flags: &[bool]) -> String {
    flags
        .iter()
        .map(bool::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

/// Per box series across primes; `None` for single-prime runs.
fn trends(reports: &[boxlattice::MomentReport], primes: usize) -> Option<Vec<bool>> {
    if primes < 2 || reports.is_empty() || !reports.len().is_multiple_of(primes) {
        return None;
    }
    let per_prime = reports.len() / primes;
    Some(
        (0..per_prime)
            .map(|k| {
                let series: Vec<_> = reports.iter().skip(k).step_by(per_prime).cloned().collect();
                ratio_non_increasing(&series)
            })
            .collect(),
    )
}

fn cmd_moment(args: &Common, joint: bool) -> anyhow::Result<Vec<u8>> {
    if joint && (args.map.is_none() || args.box2.is_empty()) {
        bail!(Error::InvalidConfig(
            "map-sweep needs --map and --box2".into()
        ));
    }
    if !joint && args.map.is_some() {
        bail!(Error::InvalidConfig(
            "use map-sweep for joint statistics".into()
        ));
    }
    if args.boxes.is_empty() {
        bail!(Error::InvalidConfig("--box is required".into()));
    }
    let cfg = args.experiment();
    let outcome = run_experiment(&cfg, &args.budget()?)?;
    format_outcome(&outcome, args.out.format, cfg.primes.len())
}

fn cmd_expsum(args: &ExpsumArgs) -> anyhow::Result<Vec<u8>> {
    let c = &args.common;
    let source = c.variety.source()?;
    let budget = c.budget()?;
    let mut rows = Vec::new();
    for p in c.primes()? {
        let spec = source.instantiate(p)?;
        let map = c.map(spec.r)?;
        if args.u.len() != spec.r {
            bail!(Error::DimensionMismatch {
                expected: spec.r,
                found: args.u.len()
            });
        }
        let s = map.as_ref().map_or(0, PolyMap::len);
        if args.v.len() != s {
            bail!(Error::DimensionMismatch {
                expected: s,
                found: args.v.len()
            });
        }
        let points = enumerate_points(&spec, p, &budget)?;
        let func = LinearFunctional::new(&args.u, &args.v, p);
        let report = char_sum_report(&spec, &points, &func, map.as_ref(), &PhaseTable::new(p))?;
        rows.push((p.get(), report));
    }
    match c.out.format {
        OutputFormat::Json => {
            let rows: Vec<_> = rows
                .iter()
                .map(|(p, r)| {
                    let mut v = serde_json::to_value(r).expect("report serializes");
                    v["p"] = serde_json::json!(p);
                    v["re"] = serde_json::json!(boxlattice::report::round9(r.re));
                    v["im"] = serde_json::json!(boxlattice::report::round9(r.im));
                    v
                })
                .collect();
            json_bytes(serde_json::json!({ "rows": rows }))
        }
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_expsum_csv(&mut buf, &rows)?;
            Ok(buf)
        }
    }
}

fn cmd_lemma2(args: &Lemma2Args) -> anyhow::Result<Vec<u8>> {
    let mut rows = Vec::new();
    for &p in &args.prime {
        let p = Prime::new(p)?;
        let length = args.length.resolve(p);
        let interval = CyclicInterval::new(args.start % p.get(), length, p)?;
        rows.push(lemma2_total(&interval, &PhaseTable::new(p))?);
    }
    format_outcome(
        &ExperimentOutcome::Lemma2(rows),
        args.out.format,
        args.prime.len(),
    )
}

fn cmd_indep(args: &Common) -> anyhow::Result<Vec<u8>> {
    let source = args.variety.source()?;
    let budget = args.budget()?;
    let mut rows = Vec::new();
    let mut json = Vec::new();
    for p in args.primes()? {
        let spec = source.instantiate(p)?;
        let map = args.map(spec.r)?;
        let points = enumerate_points(&spec, p, &budget)?;
        let report = independence_rank(&points, map.as_ref())?;
        let verified = report
            .witness
            .as_ref()
            .map(|w| witness_vanishes(&points, map.as_ref(), w));
        let witness = report
            .witness_signed(p)
            .map(|w| w.iter().map(i64::to_string).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        rows.push(vec![
            p.to_string(),
            points.len().to_string(),
            report.rank.to_string(),
            report.columns.to_string(),
            report.independent.to_string(),
            witness,
            verified.map_or(String::new(), |v| v.to_string()),
        ]);
        json.push(serde_json::json!({
            "p": p, "N_V": points.len(), "rank": report.rank, "columns": report.columns,
            "independent": report.independent, "witness": report.witness_signed(p),
            "witness_vanishes": verified,
        }));
        if verified == Some(false) {
            bail!(Error::InvariantViolation(format!(
                "kernel witness does not vanish on V over F_{p}"
            )));
        }
    }
    match args.out.format {
        OutputFormat::Json => json_bytes(serde_json::json!({ "rows": json })),
        OutputFormat::Csv => plain_csv(
            &[
                "p",
                "N_V",
                "rank",
                "columns",
                "independent",
                "witness",
                "witness_vanishes",
            ],
            rows,
        ),
    }
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<(Vec<u8>, Option<PathBuf>)> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if let Some(out) = &args.output {
        cfg.output = Some(out.clone());
    }
    if let Some(f) = args.format {
        cfg.format = f;
    }
    cfg.force |= args.force;
    let outcome = run_experiment(&cfg, &CellBudget::from_env()?)?;
    Ok((
        format_outcome(&outcome, cfg.format, cfg.primes.len())?,
        cfg.output,
    ))
}

fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    let (bytes, output) = match &cli.command {
        Command::Catalog(a) => (cmd_catalog(a)?, a.output.clone()),
        Command::Enumerate(a) => (cmd_enumerate(a)?, a.out.output.clone()),
        Command::Count(a) => (cmd_count(a)?, a.out.output.clone()),
        Command::Sweep(a) => (cmd_sweep(a)?, a.out.output.clone()),
        Command::Moment(a) => (cmd_moment(a, false)?, a.out.output.clone()),
        Command::MapSweep(a) => (cmd_moment(a, true)?, a.out.output.clone()),
        Command::Expsum(a) => (cmd_expsum(a)?, a.common.out.output.clone()),
        Command::Lemma2(a) => (cmd_lemma2(a)?, a.out.output.clone()),
        Command::Indep(a) => (cmd_indep(a)?, a.out.output.clone()),
        Command::Run(a) => cmd_run(a)?,
    };
    emit(output.as_deref(), &bytes)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::GuardExceeded { .. }) => 2,
        Some(Error::InvariantViolation(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
