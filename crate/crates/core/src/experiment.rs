//! Experiment configuration files, Monte-Carlo sweeps and CSV output.
//!
//! Config files are flat `key = value` lines grouped under `[scenario]`,
//! `[params]` and `[experiment]` headers. `#` and `;` start comments. Every
//! key is optional:
//!
//! ```text
//! [scenario]
//! n_antennas = 4        # N
//! n_ris = 4             # M
//! elements = 20         # K
//! ris_columns = 5       # K_x, must divide K; omit for the default rule
//! kappa = 3             # Rician factor
//!
//! [params]
//! p_dbm = 34
//! sigma2_dbw = -80
//! chi = 0.8
//! mu = 1e-6             # W per element
//! r_th = 1.5            # bits/s/Hz
//! aa_power_dbm = 20     # per-ST budget of the active-antenna benchmark
//!
//! [experiment]
//! schemes = proposed, sud, tdma, proposed_2bit, aa_noma
//! sweep = K             # K, P_dbm, N, M, r_th or none
//! values = 8, 16
//! n_drops = 20
//! master_seed = 0
//! output = results.csv
//! record_timing = false # wall_ms is 0 unless true, so reruns are byte-identical
//! max_outer = 50
//! ```

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::baselines::{self, SchemeId, AA_ANTENNAS};
use crate::bcd::{self, BcdConfig, RunReport, RunStatus};
use crate::channel::{dbm_to_watts, db_to_linear, draw_active_channels, draw_channels, draw_scenario, ScenarioTemplate};
use crate::error::Error;
use crate::system::SystemParams;

pub const CSV_HEADER: &str =
    "scheme,sweep_var,sweep_value,drop,seed,wsse_bps_hz,pu_rate_bps_hz,status,outer_iters,wall_ms";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    K,
    PDbm,
    N,
    M,
    RTh,
    None,
}

impl SweepVar {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVar::K => "K",
            SweepVar::PDbm => "P_dbm",
            SweepVar::N => "N",
            SweepVar::M => "M",
            SweepVar::RTh => "r_th",
            SweepVar::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "K" => SweepVar::K,
            "P_dbm" => SweepVar::PDbm,
            "N" => SweepVar::N,
            "M" => SweepVar::M,
            "r_th" => SweepVar::RTh,
            "none" => SweepVar::None,
            _ => return None,
        })
    }

    fn is_count(&self) -> bool {
        matches!(self, SweepVar::K | SweepVar::N | SweepVar::M)
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Physical parameters in the units used by config files.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSettings {
    pub p_dbm: f64,
    pub sigma2_dbw: f64,
    pub chi: f64,
    pub mu: f64,
    pub r_th: f64,
    pub aa_power_dbm: f64,
}

impl Default for ParamSettings {
    fn default() -> Self {
        Self { p_dbm: 34.0, sigma2_dbw: -80.0, chi: 0.8, mu: 1e-6, r_th: 1.5, aa_power_dbm: 20.0 }
    }
}

impl ParamSettings {
    /// Watts-based parameters with unit weights for `n_ris` RIS.
    pub fn to_params(&self, n_ris: usize) -> SystemParams {
        SystemParams {
            power_budget: dbm_to_watts(self.p_dbm),
            noise_power: db_to_linear(self.sigma2_dbw),
            eh_efficiency: self.chi,
            element_power: self.mu,
            rate_threshold: self.r_th,
            weights: vec![1.0; n_ris],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub template: ScenarioTemplate,
    pub params: ParamSettings,
    pub schemes: Vec<SchemeId>,
    pub sweep_var: SweepVar,
    /// One entry (ignored) when `sweep_var` is `None`.
    pub sweep_values: Vec<f64>,
    pub n_drops: usize,
    pub master_seed: u64,
    pub output_path: PathBuf,
    pub record_timing: bool,
    pub bcd: BcdConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let params = ParamSettings::default();
        let aa = dbm_to_watts(params.aa_power_dbm);
        Self {
            template: ScenarioTemplate::default(),
            params,
            schemes: vec![
                SchemeId::Proposed,
                SchemeId::Sud,
                SchemeId::Tdma,
                SchemeId::Proposed2bit,
                SchemeId::AaNoma(aa),
            ],
            sweep_var: SweepVar::None,
            sweep_values: vec![0.0],
            n_drops: 20,
            master_seed: 0,
            output_path: PathBuf::from("results.csv"),
            record_timing: false,
            bcd: BcdConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Replaces the sweep, e.g. from command-line flags.
    pub fn with_sweep(mut self, var: SweepVar, values: Vec<f64>) -> Result<Self, ConfigError> {
        self.sweep_var = var;
        self.sweep_values = if var == SweepVar::None { vec![0.0] } else { values };
        self.validate()?;
        Ok(self)
    }

    /// Scenario template and parameters at one sweep point.
    pub fn point(&self, value: f64) -> (ScenarioTemplate, SystemParams) {
        let mut t = self.template.clone();
        let mut p = self.params.clone();
        match self.sweep_var {
            SweepVar::K => t.elements_per_ris = value as usize,
            SweepVar::N => t.n_pt_antennas = value as usize,
            SweepVar::M => t.n_ris = value as usize,
            SweepVar::PDbm => p.p_dbm = value,
            SweepVar::RTh => p.r_th = value,
            SweepVar::None => {}
        }
        let params = p.to_params(t.n_ris);
        (t, params)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        if self.n_drops == 0 {
            problems.push("n_drops must be at least 1".to_string());
        }
        if self.schemes.is_empty() {
            problems.push("at least one scheme is required".to_string());
        }
        for s in &self.schemes {
            if let Err(e) = s.validate() {
                problems.push(e.to_string());
            }
        }
        if self.sweep_values.is_empty() {
            problems.push(format!("sweep over {} needs at least one value", self.sweep_var));
        }
        for &v in &self.sweep_values {
            if !v.is_finite() {
                problems.push(format!("sweep value {v} is not finite"));
                continue;
            }
            if self.sweep_var.is_count() && (v < 1.0 || v.fract() != 0.0) {
                problems.push(format!("{} must be a positive integer, got {v}", self.sweep_var));
                continue;
            }
            let (t, p) = self.point(v);
            if t.n_ris == 0 || t.n_pt_antennas == 0 {
                problems.push("N and M must be positive".to_string());
            }
            if let Err(e) = t.ris_layout() {
                problems.push(e.to_string());
            }
            if let Err(e) = p.validate(t.n_ris) {
                problems.push(e.to_string());
            }
        }
        if let Err(e) = self.bcd.validate() {
            problems.push(e.to_string());
        }
        problems.dedup();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Validation(problems))
        }
    }

    /// Seed of every drop index; shared across sweep points and schemes so
    /// comparisons are paired.
    pub fn drop_seeds(&self) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        (0..self.n_drops).map(|_| rng.random()).collect()
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut section = String::new();
    let mut schemes: Option<(usize, Vec<String>)> = None;
    let mut sweep_values: Option<Vec<f64>> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| ConfigError::Parse { line, message };
        let content = raw.split(['#', ';']).next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| err("unterminated section header".into()))?.trim();
            if !matches!(name, "scenario" | "params" | "experiment") {
                return Err(err(format!("unknown section [{name}]")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| err(format!("expected key = value, got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let real = || value.parse::<f64>().map_err(|_| err(format!("{key}: '{value}' is not a number")));
        let count = || value.parse::<usize>().map_err(|_| err(format!("{key}: '{value}' is not a count")));
        let list = || value.split(',').map(str::trim).filter(|s| !s.is_empty());

        match (section.as_str(), key) {
            ("scenario", "n_antennas") => cfg.template.n_pt_antennas = count()?,
            ("scenario", "n_ris") => cfg.template.n_ris = count()?,
            ("scenario", "elements") => cfg.template.elements_per_ris = count()?,
            ("scenario", "ris_columns") => cfg.template.ris_columns = Some(count()?),
            ("scenario", "kappa") => cfg.template.rician_kappa = real()?,
            ("params", "p_dbm") => cfg.params.p_dbm = real()?,
            ("params", "sigma2_dbw") => cfg.params.sigma2_dbw = real()?,
            ("params", "chi") => cfg.params.chi = real()?,
            ("params", "mu") => cfg.params.mu = real()?,
            ("params", "r_th") => cfg.params.r_th = real()?,
            ("params", "aa_power_dbm") => cfg.params.aa_power_dbm = real()?,
            ("experiment", "schemes") => schemes = Some((line, list().map(String::from).collect())),
            ("experiment", "sweep") => {
                cfg.sweep_var = SweepVar::parse(value).ok_or_else(|| {
                    err(format!("unknown sweep variable '{value}' (expected K, P_dbm, N, M, r_th or none)"))
                })?
            }
            ("experiment", "values") => {
                let parsed: Result<Vec<f64>, _> = list().map(str::parse::<f64>).collect();
                sweep_values = Some(parsed.map_err(|_| err(format!("values: '{value}' is not a number list")))?);
            }
            ("experiment", "n_drops") => cfg.n_drops = count()?,
            ("experiment", "master_seed") => {
                cfg.master_seed = value.parse().map_err(|_| err(format!("master_seed: '{value}' is not a u64")))?
            }
            ("experiment", "output") => cfg.output_path = PathBuf::from(value),
            ("experiment", "record_timing") => {
                cfg.record_timing = value.parse().map_err(|_| err(format!("record_timing: '{value}' is not a bool")))?
            }
            ("experiment", "max_outer") => cfg.bcd.max_outer = count()?,
            ("", _) => return Err(err(format!("key '{key}' appears before any section header"))),
            (s, _) => return Err(err(format!("unknown key '{key}' in [{s}]"))),
        }
    }

    let aa_w = dbm_to_watts(cfg.params.aa_power_dbm);
    if let Some((line, names)) = schemes {
        cfg.schemes = names
            .iter()
            .map(|n| SchemeId::from_name(n, aa_w).map_err(|e| ConfigError::Parse { line, message: e.to_string() }))
            .collect::<Result<_, _>>()?;
    } else {
        for s in &mut cfg.schemes {
            if let SchemeId::AaNoma(p) = s {
                *p = aa_w;
            }
        }
    }
    cfg.sweep_values = match (cfg.sweep_var, sweep_values) {
        (SweepVar::None, _) => vec![0.0],
        (_, Some(v)) => v,
        (var, None) => return Err(ConfigError::Validation(vec![format!("sweep over {var} needs values")])),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Converged,
    MaxOuter,
    /// Closed-form scheme, no iterations.
    ClosedForm,
    InitInfeasible,
    QosInfeasible,
    Failed,
}

impl RowStatus {
    pub fn name(&self) -> &'static str {
        match self {
            RowStatus::Converged => "converged",
            RowStatus::MaxOuter => "max_outer",
            RowStatus::ClosedForm => "closed_form",
            RowStatus::InitInfeasible => "init_infeasible",
            RowStatus::QosInfeasible => "qos_infeasible",
            RowStatus::Failed => "failed",
        }
    }

    /// Whether the row carries a valid WSSE.
    pub fn is_success(&self) -> bool {
        matches!(self, RowStatus::Converged | RowStatus::MaxOuter | RowStatus::ClosedForm)
    }

    fn from_error(e: &Error) -> Self {
        match e {
            Error::InitInfeasible => RowStatus::InitInfeasible,
            Error::QosInfeasible => RowStatus::QosInfeasible,
            _ => RowStatus::Failed,
        }
    }
}

impl From<RunStatus> for RowStatus {
    fn from(s: RunStatus) -> Self {
        match s {
            RunStatus::Converged => RowStatus::Converged,
            RunStatus::MaxOuter => RowStatus::MaxOuter,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: SchemeId,
    pub sweep_var: SweepVar,
    pub sweep_value: f64,
    pub drop: usize,
    pub seed: u64,
    /// 0 for failed rows.
    pub wsse: f64,
    pub pu_rate: f64,
    pub status: RowStatus,
    pub outer_iters: usize,
    pub wall_ms: u64,
}

impl ResultRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.scheme.name(),
            self.sweep_var,
            self.sweep_value,
            self.drop,
            self.seed,
            self.wsse,
            self.pu_rate,
            self.status.name(),
            self.outer_iters,
            self.wall_ms
        )
    }
}

struct Outcome {
    wsse: f64,
    pu_rate: f64,
    status: RowStatus,
    outer_iters: usize,
}

impl Outcome {
    fn failed(e: &Error) -> Self {
        Self { wsse: 0.0, pu_rate: 0.0, status: RowStatus::from_error(e), outer_iters: 0 }
    }

    fn from_run(rep: &RunReport) -> Self {
        Self { wsse: rep.final_wsse(), pu_rate: rep.pu_rate, status: rep.status.into(), outer_iters: rep.counts.outer }
    }
}

/// Every scheme of the config on one drop at one sweep point.
pub fn run_drop(cfg: &ExperimentConfig, sweep_value: f64, drop: usize, seed: u64) -> Vec<ResultRow> {
    let (template, params) = cfg.point(sweep_value);
    let drawn = draw_scenario(&template, seed).and_then(|s| Ok((draw_channels(&s, seed)?, s)));
    // The continuous run is shared by the proposed and 2-bit schemes.
    let mut continuous: Option<(Result<RunReport, Error>, u64)> = None;

    let mut rows = Vec::with_capacity(cfg.schemes.len());
    for &scheme in &cfg.schemes {
        let start = Instant::now();
        let outcome = match &drawn {
            Err(e) => Outcome::failed(e),
            Ok((ch, scenario)) => {
                let mut proposed = || {
                    continuous
                        .get_or_insert_with(|| {
                            let t = Instant::now();
                            let r = bcd::run(ch, &params, &cfg.bcd);
                            (r, t.elapsed().as_millis() as u64)
                        })
                        .clone()
                };
                match scheme {
                    SchemeId::Proposed => match proposed().0 {
                        Ok(rep) => Outcome::from_run(&rep),
                        Err(e) => Outcome::failed(&e),
                    },
                    SchemeId::Proposed2bit => {
                        match proposed().0.and_then(|rep| baselines::quantize_run(rep, ch, &params, &cfg.bcd)) {
                            Ok(q) => Outcome {
                                wsse: q.wsse,
                                pu_rate: q.pu_rate,
                                status: q.continuous.status.into(),
                                outer_iters: q.continuous.counts.outer,
                            },
                            Err(e) => Outcome::failed(&e),
                        }
                    }
                    SchemeId::Sud => match baselines::run_sud(ch, &params, &cfg.bcd) {
                        Ok(rep) => Outcome::from_run(&rep),
                        Err(e) => Outcome::failed(&e),
                    },
                    SchemeId::Tdma => match baselines::tdma(ch, &params, &cfg.bcd) {
                        Ok(t) => Outcome {
                            wsse: t.wsse,
                            pu_rate: t.pu_rate,
                            status: if t.all_converged { RowStatus::Converged } else { RowStatus::MaxOuter },
                            outer_iters: t.outer_iterations,
                        },
                        Err(e) => Outcome::failed(&e),
                    },
                    SchemeId::AaNoma(p_st) => {
                        match draw_active_channels(scenario, seed, AA_ANTENNAS)
                            .and_then(|act| baselines::aa_noma(ch, &act, &params, p_st))
                        {
                            Ok(r) => Outcome {
                                wsse: r.wsse,
                                pu_rate: r.pu_rate,
                                status: RowStatus::ClosedForm,
                                outer_iters: 0,
                            },
                            Err(e) => Outcome::failed(&e),
                        }
                    }
                }
            }
        };
        let wall_ms = if cfg.record_timing { start.elapsed().as_millis() as u64 } else { 0 };
        rows.push(ResultRow {
            scheme,
            sweep_var: cfg.sweep_var,
            sweep_value,
            drop,
            seed,
            wsse: outcome.wsse,
            pu_rate: outcome.pu_rate,
            status: outcome.status,
            outer_iters: outcome.outer_iters,
            wall_ms,
        });
    }
    rows
}

/// All rows of the experiment, ordered by sweep value, drop and the
/// config's scheme order. `jobs = 0` uses every available core.
pub fn run_rows(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<ResultRow>, ConfigError> {
    cfg.validate()?;
    let seeds = cfg.drop_seeds();
    let tasks: Vec<(f64, usize)> =
        cfg.sweep_values.iter().flat_map(|&v| (0..cfg.n_drops).map(move |d| (v, d))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ConfigError::Validation(vec![format!("cannot start {jobs} workers: {e}")]))?;
    let rows = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(v, d)| run_drop(cfg, v, d, seeds[d]))
            .collect::<Vec<_>>()
    });
    Ok(rows.into_iter().flatten().collect())
}

pub fn write_csv<W: Write>(rows: &[ResultRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_line())?;
    }
    out.flush()
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Runs the experiment and writes the CSV to `cfg.output_path`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<ResultRow>, ExperimentError> {
    let rows = run_rows(cfg, jobs)?;
    let io_err = |source| ExperimentError::Io { path: cfg.output_path.clone(), source };
    if let Some(dir) = cfg.output_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let file = fs::File::create(&cfg.output_path).map_err(io_err)?;
    write_csv(&rows, io::BufWriter::new(file)).map_err(io_err)?;
    Ok(rows)
}

/// Median WSSE of successful rows per (scheme, sweep value), in row order.
pub fn median_wsse(rows: &[ResultRow]) -> Vec<(String, f64, f64)> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in rows {
        let k = (r.scheme.name().to_string(), r.sweep_value);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(name, v)| {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.scheme.name() == name && r.sweep_value == v && r.status.is_success())
                .map(|r| r.wsse)
                .collect();
            (name, v, median(&vals))
        })
        .collect()
}

/// Median of a sample (NaN when empty).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
