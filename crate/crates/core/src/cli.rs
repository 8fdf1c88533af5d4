//! Command-line front end: config files, CSV output and subcommands.
//!
//! Config files are flat `key = value` text under `[section]` headers;
//! `#` starts a comment. Unknown sections and keys are rejected. CSV output
//! starts with `# key: value` metadata lines, then a header row; floats are
//! written with 17 significant digits so they read back exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::detectors::{energy, fisher_ratio, fixed_test, FixedVerdict, HypothesisModel};
use crate::distributions::{required_sample_size, Family, TestStrength};
use crate::error::Error;
use crate::fisher_asn::{asn_ratio_curve, SeriesOrder};
use crate::montecarlo::{
    calibrated_model, chain_for_snr, increment_stream, prediction_histograms, rse_sweep,
    run_trials, summarize, trial_rng, ExperimentConfig, Mode,
};
use crate::sequential::{sprt_run, wald_boundaries};
use crate::signal_chain::{estimate_snr, generate_observation, ChainParams};
use crate::Hypothesis;

use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Parser)]
#[command(
    name = "oscar-sprt",
    version,
    about = "Fixed-size and sequential variance-change detection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; overrides `[experiment] seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output CSV path; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Number of trials; overrides `[experiment] trials`.
    #[arg(long, global = true)]
    pub trials: Option<u64>,

    /// Suppress the summary on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Filtered (in-phase, quadrature) samples from the chain.
    Simulate,
    /// Fixed-size tests at the required sample size.
    Fixed,
    /// Untruncated SPRT, on a fixture or on simulated trials.
    Sprt,
    /// Truncated SPRT with stopping-time prediction.
    Tsprt,
    /// Fixed-size versus sequential sample numbers over a grid.
    RseSweep,
    /// Predicted versus observed stopping numbers.
    PredictHist,
    /// Fisher-F versus energy detector ASN.
    FisherAsn,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fixed => "fixed",
            Command::Sprt => "sprt",
            Command::Tsprt => "tsprt",
            Command::RseSweep => "rse-sweep",
            Command::PredictHist => "predict-hist",
            Command::FisherAsn => "fisher-asn",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ALL_COMMANDS.iter().copied().find(|c| c.name() == name)
    }
}

const ALL_COMMANDS: [Command; 7] = [
    Command::Simulate,
    Command::Fixed,
    Command::Sprt,
    Command::Tsprt,
    Command::RseSweep,
    Command::PredictHist,
    Command::FisherAsn,
];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Parse(String),
    #[error(transparent)]
    Domain(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    (
        "chain",
        &[
            "carrier_freq",
            "amplitude",
            "phase",
            "freq_shift",
            "skip_period",
            "relax_rate",
            "sample_period",
            "noise_var",
            "signal_var",
            "cutoff",
        ],
    ),
    ("model", &["noise_var", "snr"]),
    ("test", &["alpha", "beta", "family", "hypothesis"]),
    (
        "experiment",
        &[
            "trials",
            "n_max",
            "mode",
            "seed",
            "n_max_short",
            "n_max_long",
            "samples",
        ],
    ),
    ("sweep", &["snr_grid", "strengths"]),
    (
        "fisher",
        &["snr_grid", "outer_order", "inner_order", "hypothesis"],
    ),
    ("sprt", &["increments"]),
];

/// Parsed configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<(String, String), String>,
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        let mut section: Option<&str> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| {
                        CliError::Parse(format!("line {line_no}: malformed section header"))
                    })?
                    .trim();
                let known = KNOWN_KEYS.iter().find(|(s, _)| *s == name).ok_or_else(|| {
                    CliError::Parse(format!("line {line_no}: unknown section [{name}]"))
                })?;
                section = Some(known.0);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Parse(format!("line {line_no}: expected key = value")))?;
            let key = key.trim();
            let sec = section.ok_or_else(|| {
                CliError::Parse(format!("line {line_no}: key '{key}' outside any section"))
            })?;
            let allowed = KNOWN_KEYS.iter().find(|(s, _)| *s == sec).unwrap().1;
            if !allowed.contains(&key) {
                return Err(CliError::Parse(format!(
                    "line {line_no}: unknown key '{sec}.{key}'"
                )));
            }
            if values
                .insert((sec.to_string(), key.to_string()), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::Parse(format!(
                    "line {line_no}: duplicate key '{sec}.{key}'"
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.values
            .get(&(section.to_string(), key.to_string()))
            .map(String::as_str)
    }

    pub fn get<T: std::str::FromStr>(&self, section: &str, key: &str) -> CliResult<Option<T>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Parse(format!("bad value '{v}' for '{section}.{key}'"))),
        }
    }

    fn get_or<T: std::str::FromStr>(&self, section: &str, key: &str, default: T) -> CliResult<T> {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    pub fn list_f64(&self, section: &str, key: &str) -> CliResult<Option<Vec<f64>>> {
        let Some(v) = self.raw(section, key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    CliError::Parse(format!("bad list entry '{s}' in '{section}.{key}'"))
                })
            })
            .collect::<CliResult<Vec<_>>>()
            .map(Some)
    }
}

/// Resolved settings for a run.
#[derive(Debug, Clone)]
struct Settings {
    experiment: ExperimentConfig,
    family: Family,
    hypothesis: Hypothesis,
    samples: usize,
    n_max_short: u64,
    n_max_long: u64,
    n_max_given: bool,
}

fn chain_from(cfg: &Config) -> CliResult<ChainParams> {
    let d = ChainParams::default();
    let chain = ChainParams {
        carrier_freq: cfg.get_or("chain", "carrier_freq", d.carrier_freq)?,
        amplitude: cfg.get_or("chain", "amplitude", d.amplitude)?,
        phase: cfg.get_or("chain", "phase", d.phase)?,
        freq_shift: cfg.get_or("chain", "freq_shift", d.freq_shift)?,
        skip_period: cfg.get_or("chain", "skip_period", d.skip_period)?,
        relax_rate: cfg.get_or("chain", "relax_rate", d.relax_rate)?,
        sample_period: cfg.get_or("chain", "sample_period", d.sample_period)?,
        noise_var: cfg.get_or("chain", "noise_var", d.noise_var)?,
        signal_var: cfg.get_or("chain", "signal_var", d.signal_var)?,
        cutoff: cfg.get_or("chain", "cutoff", d.cutoff)?,
    };
    chain.validate()?;
    Ok(chain)
}

fn settings(cfg: &Config, cli: &Cli) -> CliResult<Settings> {
    let mode: Mode = cfg.get_or("experiment", "mode", Mode::DirectGaussian)?;
    let mut chain = chain_from(cfg)?;
    let snr: Option<f64> = cfg.get("model", "snr")?;
    let model = match mode {
        Mode::DirectGaussian => {
            HypothesisModel::new(cfg.get_or("model", "noise_var", 1.0)?, snr.unwrap_or(0.1))?
        }
        Mode::FullChain => {
            if cfg.raw("model", "noise_var").is_some() {
                return Err(CliError::Parse(
                    "'model.noise_var' is derived from the chain in full_chain mode".into(),
                ));
            }
            if let Some(s) = snr {
                chain = chain_for_snr(&chain, s)?;
            }
            calibrated_model(&chain)?
        }
    };
    let strength = TestStrength::new(
        cfg.get_or("test", "alpha", 0.02)?,
        cfg.get_or("test", "beta", 0.02)?,
    )?;
    let n_max: Option<u64> = cfg.get("experiment", "n_max")?;
    let experiment = ExperimentConfig {
        chain,
        model,
        strength,
        n_trials: cli
            .trials
            .unwrap_or(cfg.get_or("experiment", "trials", 1000)?),
        n_max: n_max.unwrap_or(100_000),
        master_seed: cli.seed.unwrap_or(cfg.get_or("experiment", "seed", 0)?),
        mode,
    };
    experiment.validate()?;
    Ok(Settings {
        experiment,
        family: cfg.get_or("test", "family", Family::Chi2)?,
        hypothesis: cfg.get_or("test", "hypothesis", Hypothesis::H1)?,
        samples: cfg.get_or("experiment", "samples", 1000)?,
        n_max_short: cfg.get_or("experiment", "n_max_short", 1000)?,
        n_max_long: cfg.get_or("experiment", "n_max_long", 5000)?,
        n_max_given: n_max.is_some(),
    })
}

/// A CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Empty,
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

/// `%.17g`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-5..17).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mant}e{sign}{:02}", exp.abs());
    }
    let decimals = (16 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A CSV table with metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(command: Command, header: &[&str]) -> Self {
        Self {
            meta: vec![
                ("command".into(), command.name().into()),
                ("version".into(), env!("CARGO_PKG_VERSION").into()),
            ],
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn meta(&mut self, key: &str, value: impl std::fmt::Display) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    fn meta_f(&mut self, key: &str, value: f64) {
        self.meta(key, format_float(value));
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(v) => v.to_string(),
                    Cell::Float(v) => format_float(*v),
                    Cell::Text(s) => s.clone(),
                    Cell::Empty => String::new(),
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColType {
    Int,
    Float,
    OptFloat,
    Text,
}

fn schema(command: Command) -> &'static [(&'static str, ColType)] {
    use ColType::*;
    match command {
        Command::Simulate => &[("index", Int), ("inphase", Float), ("quadrature", Float)],
        Command::Fixed => &[
            ("trial", Int),
            ("n", Int),
            ("statistic", Float),
            ("threshold", Float),
            ("decision", Text),
        ],
        Command::Sprt => &[
            ("trial", Int),
            ("decision", Text),
            ("n_stop", Int),
            ("final_llr", Float),
        ],
        Command::Tsprt => &[
            ("trial", Int),
            ("decision", Text),
            ("n_stop", Int),
            ("final_llr", Float),
            ("predicted_n", OptFloat),
        ],
        Command::RseSweep => &[
            ("snr", Float),
            ("alpha", Float),
            ("beta", Float),
            ("n_fixed", Int),
            ("asn_h0", Float),
            ("asn_h0_stderr", Float),
            ("rse_h0", Float),
            ("asn_h1", Float),
            ("asn_h1_stderr", Float),
            ("rse_h1", Float),
            ("wald_rse_h0", Float),
            ("wald_rse_h1", Float),
            ("n_truncated", Int),
        ],
        Command::PredictHist => &[("trial", Int), ("predicted", Float), ("observed", Float)],
        Command::FisherAsn => &[
            ("snr", Float),
            ("asn_chi2", Float),
            ("asn_fisher", Float),
            ("ratio", Float),
            ("residual_estimate", Float),
        ],
    }
}

fn table_for(command: Command) -> Table {
    let header: Vec<&str> = schema(command).iter().map(|(n, _)| *n).collect();
    Table::new(command, &header)
}

/// Reads a CSV produced by [`run`] and checks it against the schema named
/// in its `command` metadata line.
pub fn read_csv(text: &str) -> CliResult<Table> {
    let bad = |m: String| CliError::Parse(m);
    let mut meta = Vec::new();
    let mut lines = text.lines();
    let header = loop {
        let line = lines
            .next()
            .ok_or_else(|| bad("missing header row".into()))?;
        match line.strip_prefix("# ") {
            Some(m) => {
                let (k, v) = m
                    .split_once(": ")
                    .ok_or_else(|| bad(format!("malformed metadata line '{line}'")))?;
                meta.push((k.to_string(), v.to_string()));
            }
            None => break line,
        }
    };
    let command = meta
        .iter()
        .find(|(k, _)| k == "command")
        .and_then(|(_, v)| Command::from_name(v))
        .ok_or_else(|| bad("missing or unknown command metadata".into()))?;
    let cols = schema(command);
    let names: Vec<&str> = header.split(',').collect();
    if names.len() != cols.len() || names.iter().zip(cols).any(|(a, (b, _))| a != b) {
        return Err(bad(format!(
            "header '{header}' does not match the {} schema",
            command.name()
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(bad(format!(
                "row {}: expected {} fields",
                i + 1,
                cols.len()
            )));
        }
        let row = fields
            .iter()
            .zip(cols)
            .map(|(f, (name, ty))| {
                let err = || bad(format!("row {}: bad {name} value '{f}'", i + 1));
                Ok(match ty {
                    ColType::Int => Cell::Int(f.parse().map_err(|_| err())?),
                    ColType::Float => Cell::Float(f.parse().map_err(|_| err())?),
                    ColType::OptFloat if f.is_empty() => Cell::Empty,
                    ColType::OptFloat => Cell::Float(f.parse().map_err(|_| err())?),
                    ColType::Text => Cell::Text(f.to_string()),
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table {
        meta,
        header: names.iter().map(|s| s.to_string()).collect(),
        rows,
    })
}

fn experiment_meta(t: &mut Table, s: &Settings) {
    let e = &s.experiment;
    t.meta("mode", e.mode.name());
    t.meta("seed", e.master_seed);
    t.meta("trials", e.n_trials);
    t.meta("n_max", e.n_max);
    t.meta_f("alpha", e.strength.alpha());
    t.meta_f("beta", e.strength.beta());
    t.meta_f("snr", e.model.snr());
    t.meta_f("noise_var", e.model.noise_var());
    t.meta("hypothesis", s.hypothesis.label());
    if e.mode == Mode::FullChain {
        t.meta_f("pre_filter_snr", e.chain.pre_filter_snr());
    }
}

/// Variance-ratio snr of the chain's filtered output, for the metadata.
fn empirical_chain_snr(chain: &ChainParams, seed: u64) -> CliResult<f64> {
    let (i, q) = generate_observation(chain, Hypothesis::H1, 20_000, seed)?;
    Ok(estimate_snr(&i, &q)?)
}

fn cmd_simulate(s: &Settings) -> CliResult<(Table, String)> {
    let e = &s.experiment;
    let (i, q) = generate_observation(&e.chain, s.hypothesis, s.samples, e.master_seed)?;
    let mut t = table_for(Command::Simulate);
    t.meta("seed", e.master_seed);
    t.meta("hypothesis", s.hypothesis.label());
    t.meta("samples", s.samples);
    t.meta_f("pre_filter_snr", e.chain.pre_filter_snr());
    let calibrated = calibrated_model(&e.chain)?;
    t.meta_f("post_filter_snr", calibrated.snr());
    t.meta_f("post_filter_noise_var", calibrated.noise_var());
    for (k, (a, b)) in i.iter().zip(&q).enumerate() {
        t.push(vec![(k as u64).into(), (*a).into(), (*b).into()]);
    }
    let summary = format!(
        "simulated {} samples under {}; energy ratio {:.4}",
        s.samples,
        s.hypothesis.label(),
        fisher_ratio(&i, &q)?
    );
    Ok((t, summary))
}

fn cmd_fixed(s: &Settings) -> CliResult<(Table, String)> {
    let e = &s.experiment;
    let model = e.model;
    let n = required_sample_size(e.strength, model.snr(), s.family)?;
    let sd_i = model.variance_under(s.hypothesis).sqrt();
    let sd_q = model.noise_var().sqrt();
    let mut t = table_for(Command::Fixed);
    experiment_meta(&mut t, s);
    t.meta("family", s.family.name());
    t.meta("n_required", n);
    let rows: Vec<(f64, FixedVerdict, f64)> = (0..e.n_trials)
        .map(|trial| {
            let mut rng = trial_rng(e.master_seed, trial);
            let mut draw = |sd: f64| -> Vec<f64> {
                (0..n)
                    .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            };
            let xi = draw(sd_i);
            let statistic = match s.family {
                Family::Chi2 => energy(&xi),
                Family::Fisher => fisher_ratio(&xi, &draw(sd_q))?,
            };
            let d = fixed_test(statistic, e.strength, n, s.family, &model)?;
            Ok((d.statistic, d.decision, d.threshold))
        })
        .collect::<crate::Result<_>>()?;
    let mut h1 = 0u64;
    for (trial, (stat, dec, thr)) in rows.into_iter().enumerate() {
        let label = match dec {
            FixedVerdict::AcceptH0 => "accept_H0",
            FixedVerdict::AcceptH1 => {
                h1 += 1;
                "accept_H1"
            }
        };
        t.push(vec![
            (trial as u64).into(),
            n.into(),
            stat.into(),
            thr.into(),
            label.into(),
        ]);
    }
    let summary = format!(
        "{} test, N = {n}: accepted H1 in {h1} of {} trials",
        s.family.name(),
        e.n_trials
    );
    Ok((t, summary))
}

fn cmd_sprt(cfg: &Config, s: &Settings) -> CliResult<(Table, String)> {
    let e = &s.experiment;
    let bounds = wald_boundaries(e.strength)?;
    let n_max = s.n_max_given.then_some(e.n_max);
    let mut t = table_for(Command::Sprt);
    t.meta_f("log_upper", bounds.log_upper());
    t.meta_f("log_lower", bounds.log_lower());
    if let Some(inc) = cfg.list_f64("sprt", "increments")? {
        t.meta("source", "fixture");
        let out = sprt_run(inc, &bounds, n_max)?;
        t.push(vec![
            0u64.into(),
            out.decision.label().into(),
            out.n_stop.into(),
            out.final_llr.into(),
        ]);
        let summary = format!("{} at n = {}", out.decision.label(), out.n_stop);
        return Ok((t, summary));
    }
    experiment_meta(&mut t, s);
    let cap = n_max.unwrap_or(u64::MAX);
    let outcomes: Vec<_> = (0..e.n_trials)
        .map(|trial| {
            let inc = increment_stream(e, s.hypothesis, trial)?.take(cap as usize);
            sprt_run(inc, &bounds, n_max)
        })
        .collect::<crate::Result<_>>()?;
    let mut total = 0u64;
    for (trial, out) in outcomes.iter().enumerate() {
        total += out.n_stop;
        t.push(vec![
            (trial as u64).into(),
            out.decision.label().into(),
            out.n_stop.into(),
            out.final_llr.into(),
        ]);
    }
    let summary = format!(
        "mean stopping number {:.3} over {} trials",
        total as f64 / e.n_trials as f64,
        e.n_trials
    );
    Ok((t, summary))
}

fn cmd_tsprt(s: &Settings) -> CliResult<(Table, String)> {
    let e = &s.experiment;
    let records = run_trials(e, s.hypothesis)?;
    let mut t = table_for(Command::Tsprt);
    experiment_meta(&mut t, s);
    if e.mode == Mode::FullChain {
        t.meta_f(
            "empirical_post_filter_snr",
            empirical_chain_snr(&e.chain, e.master_seed)?,
        );
    }
    let est = summarize(
        &records.iter().map(|r| Ok(*r)).collect::<Vec<_>>(),
        s.hypothesis,
    )?;
    t.meta_f("asn", est.mean_n);
    t.meta_f("asn_stderr", est.stderr);
    t.meta("n_truncated", est.n_truncated);
    for r in &records {
        let b = r.outcome.base;
        t.push(vec![
            r.trial.into(),
            b.decision.label().into(),
            b.n_stop.into(),
            b.final_llr.into(),
            r.outcome.predicted_n.into(),
        ]);
    }
    let summary = format!(
        "ASN {:.3} +- {:.3}, {} of {} truncated",
        est.mean_n, est.stderr, est.n_truncated, est.n_trials
    );
    Ok((t, summary))
}

fn parse_strengths(raw: &str) -> CliResult<Vec<TestStrength>> {
    raw.split(',')
        .map(|item| {
            let (a, b) = item
                .trim()
                .split_once(':')
                .ok_or_else(|| CliError::Parse(format!("strength '{item}' is not alpha:beta")))?;
            let p = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Parse(format!("bad strength value '{v}'")))
            };
            Ok(TestStrength::new(p(a)?, p(b)?)?)
        })
        .collect()
}

fn cmd_rse_sweep(cfg: &Config, s: &Settings) -> CliResult<(Table, String)> {
    let e = &s.experiment;
    let grid = cfg
        .list_f64("sweep", "snr_grid")?
        .ok_or_else(|| CliError::Parse("missing key 'sweep.snr_grid'".into()))?;
    let strengths = match cfg.raw("sweep", "strengths") {
        Some(raw) => parse_strengths(raw)?,
        None => vec![e.strength],
    };
    let rows = rse_sweep(e, &grid, &strengths)?;
    let mut t = table_for(Command::RseSweep);
    experiment_meta(&mut t, s);
    for r in &rows {
        t.push(vec![
            r.snr.into(),
            r.alpha.into(),
            r.beta.into(),
            r.n_fixed.into(),
            r.h0.mean_n.into(),
            r.h0.stderr.into(),
            r.rse(Hypothesis::H0).into(),
            r.h1.mean_n.into(),
            r.h1.stderr.into(),
            r.rse(Hypothesis::H1).into(),
            r.wald_rse(Hypothesis::H0).into(),
            r.wald_rse(Hypothesis::H1).into(),
            (r.h0.n_truncated + r.h1.n_truncated).into(),
        ]);
    }
    Ok((t, format!("{} sweep rows", rows.len())))
}

fn cmd_predict_hist(s: &Settings) -> CliResult<(Table, String)> {
    let e = &s.experiment;
    let pairs = prediction_histograms(e, s.n_max_short, s.n_max_long, s.hypothesis)?;
    let mut t = table_for(Command::PredictHist);
    experiment_meta(&mut t, s);
    t.meta("n_max_short", s.n_max_short);
    t.meta("n_max_long", s.n_max_long);
    t.meta("truncated_short", pairs.truncated_short);
    t.meta("truncated_long", pairs.truncated_long);
    for (k, (p, o)) in pairs.predicted.iter().zip(&pairs.observed).enumerate() {
        t.push(vec![(k as u64).into(), (*p).into(), (*o).into()]);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let summary = format!(
        "predicted mean {:.2}, observed mean {:.2}",
        mean(&pairs.predicted),
        mean(&pairs.observed)
    );
    Ok((t, summary))
}

fn cmd_fisher_asn(cfg: &Config, s: &Settings) -> CliResult<(Table, String)> {
    let grid = cfg
        .list_f64("fisher", "snr_grid")?
        .ok_or_else(|| CliError::Parse("missing key 'fisher.snr_grid'".into()))?;
    let d = SeriesOrder::default();
    let order = SeriesOrder::new(
        cfg.get_or("fisher", "outer_order", d.outer())?,
        cfg.get_or("fisher", "inner_order", d.inner())?,
    )?;
    let hyp = cfg.get_or("fisher", "hypothesis", s.hypothesis)?;
    let strength = s.experiment.strength;
    let rows = asn_ratio_curve(strength, &grid, hyp, order)?;
    let mut t = table_for(Command::FisherAsn);
    t.meta_f("alpha", strength.alpha());
    t.meta_f("beta", strength.beta());
    t.meta("hypothesis", hyp.label());
    t.meta("outer_order", order.outer());
    t.meta("inner_order", order.inner());
    for r in &rows {
        t.push(vec![
            r.snr.into(),
            r.asn_chi2.into(),
            r.asn_fisher.into(),
            r.ratio.into(),
            r.residual_estimate.into(),
        ]);
    }
    Ok((t, format!("{} snr points", rows.len())))
}

/// Runs a parsed command line and returns the CSV text written.
pub fn run(cli: &Cli) -> CliResult<String> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let s = settings(&cfg, cli)?;
    let (table, summary) = match cli.command {
        Command::Simulate => cmd_simulate(&s)?,
        Command::Fixed => cmd_fixed(&s)?,
        Command::Sprt => cmd_sprt(&cfg, &s)?,
        Command::Tsprt => cmd_tsprt(&s)?,
        Command::RseSweep => cmd_rse_sweep(&cfg, &s)?,
        Command::PredictHist => cmd_predict_hist(&s)?,
        Command::FisherAsn => cmd_fisher_asn(&cfg, &s)?,
    };
    let text = table.render();
    match &cli.out {
        Some(p) => std::fs::write(p, &text)?,
        None => print!("{text}"),
    }
    if !cli.quiet {
        eprintln!("{summary}");
    }
    Ok(text)
}
