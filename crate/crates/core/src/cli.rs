//! Command-line driver: a JSON experiment manifest plus flag overrides,
//! fixed-schema CSV (or JSON) output, and exit codes 0 / 1 / 2 for success,
//! failed invariant or computation, and invalid input.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::coeffs::{CoefficientModel, Family, Radius};
use crate::error::{Error, Result};
use crate::growth::{normality_diagnostics, verify_integral_relation, GrowthProfile, InequalityMargins};
use crate::holeprob::{
    adapt_proposal, certificate_log_prob, compare_vs_s, estimate_direct, estimate_importance, AdaptSettings, EstimateResult, Method,
    ProposalSpec, SamplerSettings,
};
use crate::sampling::DEFAULT_LOG_EPS;
use crate::verify::{run_suite, SuiteReport, SuiteSettings};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_INVALID: u8 = 2;

pub const ANALYZE_HEADER: &[&str] = &[
    "r",
    "log_mu",
    "nu",
    "n1",
    "s",
    "n1_prime",
    "log_m",
    "integral_residual",
    "c_emp",
    "nu_ratio",
    "margin_s_lower",
    "margin_s_upper",
    "margin_n_x",
    "margin_bands",
    "margin_n1_nu",
    "margin_nu_lower",
];
pub const ESTIMATE_HEADER: &[&str] =
    &["r", "method", "log_p", "log_ci_low", "log_ci_high", "n_samples", "ess", "uncertain", "n_hole", "log10_p"];
pub const VERIFY_HEADER: &[&str] = &["check", "margin", "recorded_constant", "status"];
pub const COMPARE_HEADER: &[&str] = &["r", "s", "neg_log_p", "neg_certificate", "n1_log_n1", "ratio"];

/// First field of the row appended when a command stops early.
pub const FAILURE_MARKER: &str = "FAILED";

/// Residual of the integral relation above which `analyze` fails.
const INTEGRAL_TOL: f64 = 1e-9;

#[derive(Parser, Debug)]
#[command(name = "holescope", version, about = "Growth functionals and hole probabilities of Gaussian entire functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandKind,
}

#[derive(Subcommand, Debug)]
pub enum CommandKind {
    /// Growth functionals and inequality margins on the radius grid.
    Analyze(Options),
    /// Lemma-level numerical checks.
    Verify(Options),
    /// Hole-probability estimates.
    Estimate(Options),
    /// -log P_H against S(r).
    Compare(Options),
    /// Every command listed in the configuration file.
    Run(Options),
}

#[derive(Args, Debug, Default, Clone)]
pub struct Options {
    /// JSON experiment manifest; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelName>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Table of `n log_a_n` lines for `--model table`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Comma-separated radii; accepts `e`, `e^k` and `exp(k)`.
    #[arg(long, value_delimiter = ',')]
    pub r: Option<Vec<String>>,
    /// Geometric grid `start:stop:count`.
    #[arg(long = "r-grid")]
    pub r_grid: Option<String>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated deltas for the determinant checks.
    #[arg(long, value_delimiter = ',')]
    pub delta: Option<Vec<f64>>,
    /// Smallest point count of the discretization check.
    #[arg(long)]
    pub points: Option<usize>,
    /// Output directory; one `<command>.csv` per command. Stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit JSON instead of CSV.
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ModelName {
    Gef,
    MittagLeffler,
    GaussianDecay,
    ExpExp,
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Direct,
    Importance,
    Certificate,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Direct => Method::Direct,
            MethodArg::Importance => Method::Importance,
            MethodArg::Certificate => Method::Certificate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    Analyze,
    Verify,
    Estimate,
    Compare,
}

impl CommandName {
    fn as_str(&self) -> &'static str {
        match self {
            CommandName::Analyze => "analyze",
            CommandName::Verify => "verify",
            CommandName::Estimate => "estimate",
            CommandName::Compare => "compare",
        }
    }

    fn is_stochastic(&self) -> bool {
        !matches!(self, CommandName::Analyze)
    }
}

/// Model block of the manifest. `log_values` or `table` (a file) supply a
/// table model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Option<ModelName>,
    pub alpha: Option<f64>,
    pub c: Option<f64>,
    pub log_values: Option<Vec<f64>>,
    pub table: Option<PathBuf>,
}

/// A list of radii (numbers or strings such as `"e^2"`) or a geometric range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RGrid {
    List(Vec<RadiusValue>),
    Geometric { start: f64, stop: f64, count: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiusValue {
    Number(f64),
    Text(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub method: Option<Method>,
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,
    pub log_eps: Option<f64>,
    /// Used as given instead of the adaptively tuned proposal.
    pub proposal: Option<ProposalSpec>,
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub deltas: Option<Vec<f64>>,
    pub points: Option<usize>,
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub json: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub r_grid: Option<RGrid>,
    pub commands: Vec<CommandName>,
    pub estimator: EstimatorConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Flags win over the manifest.
    pub fn apply(&mut self, o: &Options) -> Result<()> {
        if let Some(m) = o.model {
            self.model.family = Some(m);
        }
        if o.alpha.is_some() {
            self.model.alpha = o.alpha;
        }
        if o.c.is_some() {
            self.model.c = o.c;
        }
        if let Some(t) = &o.table {
            self.model.table = Some(t.clone());
        }
        match (&o.r, &o.r_grid) {
            (Some(_), Some(_)) => return Err(Error::InvalidParameter("give either --r or --r-grid, not both".into())),
            (Some(list), None) => self.r_grid = Some(RGrid::List(list.iter().cloned().map(RadiusValue::Text).collect())),
            (None, Some(spec)) => self.r_grid = Some(parse_geometric(spec)?),
            (None, None) => {}
        }
        if let Some(m) = o.method {
            self.estimator.method = Some(m.into());
        }
        if o.samples.is_some() {
            self.estimator.n_samples = o.samples;
            self.verify.samples = o.samples;
        }
        if o.seed.is_some() {
            self.estimator.seed = o.seed;
        }
        if let Some(d) = &o.delta {
            self.verify.deltas = Some(d.clone());
        }
        if o.points.is_some() {
            self.verify.points = o.points;
        }
        if let Some(dir) = &o.out {
            self.output.dir = Some(dir.clone());
        }
        self.output.json |= o.json;
        Ok(())
    }

    pub fn build_model(&self) -> Result<CoefficientModel> {
        let spec = &self.model;
        match spec.family.unwrap_or(ModelName::Gef) {
            ModelName::Gef => Ok(CoefficientModel::gef()),
            ModelName::ExpExp => Ok(CoefficientModel::exp_exp()),
            ModelName::MittagLeffler => {
                let alpha = spec.alpha.ok_or_else(|| Error::InvalidParameter("mittag_leffler needs --alpha".into()))?;
                CoefficientModel::new(Family::MittagLeffler { alpha })
            }
            ModelName::GaussianDecay => {
                let c = spec.c.ok_or_else(|| Error::InvalidParameter("gaussian_decay needs --c".into()))?;
                CoefficientModel::new(Family::GaussianDecay { c })
            }
            ModelName::Table => match (&spec.log_values, &spec.table) {
                (Some(values), None) => CoefficientModel::table(values.clone()),
                (None, Some(path)) => CoefficientModel::load_table(path),
                _ => Err(Error::InvalidParameter("table model needs exactly one of log_values or --table".into())),
            },
        }
    }

    /// The radius grid; strictly increasing and `>= 1` unless
    /// `allow_below_one` (hole probabilities make sense for any `r > 0`).
    pub fn radii(&self, allow_below_one: bool) -> Result<Vec<Radius>> {
        let grid = self.r_grid.as_ref().ok_or_else(|| Error::InvalidParameter("no radii given (--r or --r-grid)".into()))?;
        let radii: Vec<Radius> = match grid {
            RGrid::List(values) => values
                .iter()
                .map(|v| match v {
                    RadiusValue::Number(x) => Radius::new(*x),
                    RadiusValue::Text(s) => s.parse(),
                })
                .collect::<Result<_>>()?,
            RGrid::Geometric { start, stop, count } => geometric(*start, *stop, *count)?,
        };
        if radii.is_empty() {
            return Err(Error::InvalidParameter("empty radius grid".into()));
        }
        if radii.windows(2).any(|w| w[1].value() <= w[0].value()) {
            return Err(Error::InvalidParameter("radius grid must be strictly increasing".into()));
        }
        if !allow_below_one {
            if let Some(r) = radii.iter().find(|r| r.value() < 1.0) {
                return Err(Error::InvalidParameter(format!("growth functionals need r >= 1, got {r}")));
            }
        }
        Ok(radii)
    }

    fn seed(&self) -> Result<u64> {
        self.estimator
            .seed
            .ok_or_else(|| Error::InvalidParameter("stochastic commands need a seed (--seed)".into()))
    }

    fn sampler(&self, default_samples: usize) -> Result<SamplerSettings> {
        Ok(SamplerSettings {
            n_samples: self.estimator.n_samples.unwrap_or(default_samples),
            seed: self.seed()?,
            log_eps: self.estimator.log_eps.unwrap_or(DEFAULT_LOG_EPS),
            threads: self.estimator.threads,
        })
    }
}

fn parse_geometric(spec: &str) -> Result<RGrid> {
    let bad = || Error::InvalidParameter(format!("--r-grid expects start:stop:count, got '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok(RGrid::Geometric {
        start: parts[0].trim().parse().map_err(|_| bad())?,
        stop: parts[1].trim().parse().map_err(|_| bad())?,
        count: parts[2].trim().parse().map_err(|_| bad())?,
    })
}

fn geometric(start: f64, stop: f64, count: usize) -> Result<Vec<Radius>> {
    if !(start > 0.0 && stop > start) || count < 2 {
        return Err(Error::InvalidParameter(format!("geometric grid needs 0 < start < stop and count >= 2, got {start}:{stop}:{count}")));
    }
    let (a, b) = (start.ln(), stop.ln());
    Ok((0..count)
        .map(|i| if i + 1 == count { Radius::from_log(b) } else { Radius::from_log(a + (b - a) * i as f64 / (count - 1) as f64) })
        .collect())
}

/// Rows written so far, whether an asserted invariant failed, and the error
/// that stopped the command early.
struct Table {
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
    json: serde_json::Value,
    invariant_failed: bool,
    error: Option<Error>,
}

impl Table {
    fn new(header: &'static [&'static str]) -> Self {
        Self { header, rows: Vec::new(), json: serde_json::Value::Array(Vec::new()), invariant_failed: false, error: None }
    }

    fn push<T: Serialize>(&mut self, row: Vec<String>, record: &T) {
        self.rows.push(row);
        if let serde_json::Value::Array(items) = &mut self.json {
            items.push(serde_json::to_value(record).unwrap_or(serde_json::Value::Null));
        }
    }
}

/// Shortest round-trip form, exponent notation for very small or large
/// magnitudes, and no negative zero.
fn num(x: f64) -> String {
    format!("{:?}", if x == 0.0 { 0.0 } else { x })
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Serialize)]
struct AnalyzeRecord {
    r: f64,
    log_mu: f64,
    nu: usize,
    n1: usize,
    s: f64,
    n1_prime: f64,
    log_m: f64,
    integral_residual: f64,
    c_emp: Option<f64>,
    nu_ratio: Option<f64>,
    margin_s_lower: f64,
    margin_s_upper: f64,
    margin_n_x: f64,
    margin_bands: f64,
    margin_n1_nu: f64,
    margin_nu_lower: Option<f64>,
}

fn analyze_row(model: &CoefficientModel, r: Radius) -> Result<AnalyzeRecord> {
    let profile = GrowthProfile::compute(model, r)?;
    let margins = InequalityMargins::compute(model, &profile)?;
    let normality = normality_diagnostics(model, r)?;
    Ok(AnalyzeRecord {
        r: r.value(),
        log_mu: profile.log_mu,
        nu: profile.nu,
        n1: profile.n1,
        s: profile.s,
        n1_prime: profile.n1_prime,
        log_m: normality.log_max_modulus,
        integral_residual: verify_integral_relation(model, r)?,
        c_emp: normality.c_emp,
        nu_ratio: normality.nu_ratio,
        margin_s_lower: margins.s_lower,
        margin_s_upper: margins.s_upper,
        margin_n_x: margins.n_x,
        margin_bands: margins.bands,
        margin_n1_nu: margins.n1_nu,
        margin_nu_lower: margins.nu_lower,
    })
}

fn analyze(config: &ExperimentConfig, model: &CoefficientModel) -> Result<Table> {
    let radii = config.radii(false)?;
    let mut table = Table::new(ANALYZE_HEADER);
    for r in radii {
        match analyze_row(model, r) {
            Ok(a) => {
                let margins = [a.margin_s_lower, a.margin_s_upper, a.margin_n_x, a.margin_bands, a.margin_n1_nu, a.margin_nu_lower.unwrap_or(0.0)];
                if margins.iter().any(|m| *m < 0.0) || a.integral_residual.abs() >= INTEGRAL_TOL {
                    table.invariant_failed = true;
                }
                let row = vec![
                    num(a.r),
                    num(a.log_mu),
                    a.nu.to_string(),
                    a.n1.to_string(),
                    num(a.s),
                    num(a.n1_prime),
                    num(a.log_m),
                    num(a.integral_residual),
                    opt(a.c_emp),
                    opt(a.nu_ratio),
                    num(a.margin_s_lower),
                    num(a.margin_s_upper),
                    num(a.margin_n_x),
                    num(a.margin_bands),
                    num(a.margin_n1_nu),
                    opt(a.margin_nu_lower),
                ];
                table.push(row, &a);
            }
            Err(e) => {
                table.error = Some(e);
                break;
            }
        }
    }
    Ok(table)
}

fn estimate_one(config: &ExperimentConfig, model: &CoefficientModel, r: Radius, method: Method) -> Result<EstimateResult> {
    match method {
        Method::Certificate => certificate_log_prob(model, r),
        Method::Direct => estimate_direct(model, r, &config.sampler(100_000)?),
        Method::Importance => {
            let settings = config.sampler(10_000)?;
            let proposal = match &config.estimator.proposal {
                Some(p) => p.clone(),
                None => adapt_proposal(model, r, &settings, &AdaptSettings::default())?,
            };
            estimate_importance(model, r, &proposal, &settings)
        }
    }
}

#[derive(Serialize)]
struct EstimateRecord<'a> {
    r: f64,
    #[serde(flatten)]
    result: &'a EstimateResult,
}

fn estimate(config: &ExperimentConfig, model: &CoefficientModel) -> Result<Table> {
    let radii = config.radii(true)?;
    let method = config.estimator.method.unwrap_or(Method::Importance);
    if method != Method::Certificate {
        config.seed()?;
    }
    let mut table = Table::new(ESTIMATE_HEADER);
    for r in radii {
        match estimate_one(config, model, r, method) {
            Ok(e) => {
                let row = vec![
                    num(r.value()),
                    e.method.to_string(),
                    num(e.log_p),
                    num(e.log_ci_low),
                    num(e.log_ci_high),
                    e.n_samples.to_string(),
                    opt(e.ess),
                    e.n_uncertain.to_string(),
                    e.n_hole.to_string(),
                    num(e.log10_p()),
                ];
                table.push(row, &EstimateRecord { r: r.value(), result: &e });
            }
            Err(e) => {
                table.error = Some(e);
                break;
            }
        }
    }
    Ok(table)
}

fn compare(config: &ExperimentConfig, model: &CoefficientModel) -> Result<Table> {
    let radii = config.radii(true)?;
    let method = config.estimator.method.unwrap_or(Method::Importance);
    let settings = config.sampler(if method == Method::Direct { 100_000 } else { 10_000 })?;
    let mut table = Table::new(COMPARE_HEADER);
    // one radius at a time so that a failure keeps the rows before it
    for r in radii {
        match compare_vs_s(model, &[r], method, &settings) {
            Ok(rows) => {
                for c in rows {
                    let row = vec![num(c.r), num(c.s), opt(c.neg_log_p), opt(c.neg_certificate), num(c.n1_log_n1), opt(c.ratio)];
                    table.push(row, &c);
                }
            }
            Err(e) => {
                table.error = Some(e);
                break;
            }
        }
    }
    Ok(table)
}

fn verify(config: &ExperimentConfig, model: &CoefficientModel) -> Result<(Table, Option<SuiteReport>)> {
    let defaults = SuiteSettings::default();
    let settings = SuiteSettings {
        r_grid: config.radii(false)?,
        deltas: config.verify.deltas.clone().unwrap_or(defaults.deltas),
        base_points: config.verify.points.unwrap_or(defaults.base_points),
        samples: config.verify.samples.unwrap_or(defaults.samples),
        seed: config.seed()?,
        threads: config.estimator.threads,
    };
    if let Some(d) = settings.deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {d}")));
    }
    if settings.base_points == 0 || settings.samples == 0 {
        return Err(Error::InvalidParameter("--points and --samples must be positive".into()));
    }
    let mut table = Table::new(VERIFY_HEADER);
    match run_suite(model, &settings) {
        Ok(report) => {
            for c in &report.checks {
                table.rows.push(vec![c.check.clone(), opt(c.margin), opt(c.recorded_constant), c.status.as_str().to_string()]);
            }
            table.invariant_failed = !report.passed();
            table.json = serde_json::to_value(&report)?;
            Ok((table, Some(report)))
        }
        Err(e) => {
            table.error = Some(e);
            Ok((table, None))
        }
    }
}

fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidParameter(_) | Error::BadNormalization(_) | Error::NotLogConcave { .. } | Error::Parse { .. } | Error::Json(_) | Error::Io(_)
    )
}

fn write_csv(table: &Table, sink: Box<dyn Write>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(sink);
    let failed = |e: csv::Error| Error::Io(io::Error::other(e));
    w.write_record(table.header).map_err(failed)?;
    for row in &table.rows {
        w.write_record(row).map_err(failed)?;
    }
    if let Some(e) = &table.error {
        let mut marker = vec![FAILURE_MARKER.to_string(), e.to_string()];
        marker.resize(table.header.len().max(2), String::new());
        w.write_record(&marker).map_err(failed)?;
    }
    w.flush()?;
    Ok(())
}

fn emit(config: &ExperimentConfig, name: CommandName, table: &Table) -> Result<()> {
    let json = config.output.json;
    let sink: Box<dyn Write> = match &config.output.dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let ext = if json { "json" } else { "csv" };
            Box::new(io::BufWriter::new(fs::File::create(dir.join(format!("{}.{ext}", name.as_str())))?))
        }
        None => Box::new(io::stdout().lock()),
    };
    if json {
        let mut sink = sink;
        let value = match &table.error {
            Some(e) => serde_json::json!({ "rows": table.json, "failed": e.to_string() }),
            None => table.json.clone(),
        };
        serde_json::to_writer_pretty(&mut sink, &value)?;
        writeln!(sink)?;
        sink.flush()?;
        Ok(())
    } else {
        write_csv(table, sink)
    }
}

/// Runs one command and writes its output; returns the exit code.
fn run_command(config: &ExperimentConfig, model: &CoefficientModel, name: CommandName) -> u8 {
    let table = match name {
        CommandName::Analyze => analyze(config, model),
        CommandName::Estimate => estimate(config, model),
        CommandName::Compare => compare(config, model),
        CommandName::Verify => verify(config, model).map(|(t, report)| {
            // also keep the JSON report next to the CSV
            if let (Some(dir), Some(report), false) = (&config.output.dir, report, config.output.json) {
                let written = fs::create_dir_all(dir).and_then(|_| {
                    let text = serde_json::to_string_pretty(&report).map_err(io::Error::other)?;
                    fs::write(dir.join("verify.json"), text + "\n")
                });
                if let Err(e) = written {
                    eprintln!("warning: cannot write verify.json: {e}");
                }
            }
            t
        }),
    };
    let table = match table {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return if is_input_error(&e) { EXIT_INVALID } else { EXIT_FAILED };
        }
    };
    if let Err(e) = emit(config, name, &table) {
        eprintln!("error: cannot write output: {e}");
        return EXIT_FAILED;
    }
    match &table.error {
        Some(e) => {
            eprintln!("error: {} stopped early: {e}", name.as_str());
            if is_input_error(e) {
                EXIT_INVALID
            } else {
                EXIT_FAILED
            }
        }
        None if table.invariant_failed => {
            eprintln!("{}: asserted invariant failed", name.as_str());
            EXIT_FAILED
        }
        None => EXIT_OK,
    }
}

/// Resolves the manifest and flags, then runs the requested commands.
pub fn run(cli: Cli) -> u8 {
    let (options, commands) = match &cli.command {
        CommandKind::Analyze(o) => (o, Some(CommandName::Analyze)),
        CommandKind::Verify(o) => (o, Some(CommandName::Verify)),
        CommandKind::Estimate(o) => (o, Some(CommandName::Estimate)),
        CommandKind::Compare(o) => (o, Some(CommandName::Compare)),
        CommandKind::Run(o) => (o, None),
    };
    let prepared = (|| -> Result<(ExperimentConfig, CoefficientModel, Vec<CommandName>)> {
        let mut config = match &options.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        config.apply(options)?;
        let commands = match commands {
            Some(c) => vec![c],
            None => config.commands.clone(),
        };
        if commands.is_empty() {
            return Err(Error::InvalidParameter("no commands selected".into()));
        }
        if commands.iter().any(|c| c.is_stochastic() && !(matches!(c, CommandName::Estimate) && config.estimator.method == Some(Method::Certificate))) {
            config.seed()?;
        }
        let model = config.build_model()?;
        Ok((config, model, commands))
    })();
    let (config, model, commands) = match prepared {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    commands.iter().map(|&c| run_command(&config, &model, c)).max().unwrap_or(EXIT_OK)
}
