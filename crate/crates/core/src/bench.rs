//! Monte-Carlo comparison harness.
//!
//! One experiment fixes a probe (hence the training matrix) and a sparse
//! time-varying channel; trial `t` estimates channel block `t` under every
//! noise condition with every selected solver. Noise seeds depend only on
//! the base seed and the trial index, so all conditions of a trial share
//! impulse positions and differ only in the impulse variance.
//!
//! CSV outputs never contain wall-clock values, so they are a deterministic
//! function of the config. Runtimes go to `summary.json` and `timings.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{self, AdmmConfig};
use crate::baselines::{self, lambda_inf, FistaConfig, OmpConfig};
use crate::channel::{
    generate_channel, generate_gmn_labeled, generate_probe, mean_power, snr_accounting,
    synthesize_with_matrix, training_matrix, ChannelConfig, ChannelRealization, NoiseConfig,
    ProbeConfig, SnrReport,
};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector};
use crate::metrics::{aggregate, nmsd, SummaryRow, TrialRecord};
use crate::model::MeasurementModel;
use crate::solver::{SolveResult, SolverKind};

/// The reference configuration: SNR 15 dB with white noise only and with
/// impulsive noise at INR 40 and 50 dB.
pub const REFERENCE_TOML: &str = include_str!("../configs/reference.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_trials: usize,
    /// Number of observations M.
    pub m_obs: usize,
    /// Base seed; probe, channel and noise seeds are derived from it.
    pub seed: u64,
    #[serde(default = "all_solvers")]
    pub solvers: Vec<SolverKind>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub probe: ProbeSettings,
    pub channel: ChannelSettings,
    pub noise: Vec<NoiseCondition>,
    #[serde(default)]
    pub admm: AdmmSettings,
    #[serde(default)]
    pub fista: FistaSettings,
    #[serde(default)]
    pub omp: OmpSettings,
    #[serde(default)]
    pub output: OutputSettings,
}

fn all_solvers() -> Vec<SolverKind> {
    SolverKind::ALL.to_vec()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSettings {
    /// Probe length in chips; defaults to `m_obs + n_taps - 1`, the
    /// shortest probe that fills the delay line for every observation.
    pub length: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSettings {
    pub n_taps: usize,
    pub sparsity: usize,
    pub amplitude_decay: f64,
    pub fading_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseCondition {
    pub name: String,
    pub snr_db: f64,
    /// Impulse-to-white-noise ratio; absent for white noise only.
    #[serde(default)]
    pub inr_db: Option<f64>,
    #[serde(default = "default_q")]
    pub q: f64,
}

fn default_q() -> f64 {
    0.002
}

impl NoiseCondition {
    pub fn noise_config(&self, sigma_s2: f64, seed: u64) -> NoiseConfig {
        NoiseConfig::from_db(sigma_s2, self.snr_db, self.inr_db, self.q, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmSettings {
    /// `tau = 1 / (tau_factor * lambda_inf)`.
    pub tau_factor: f64,
    pub rho0: f64,
    pub t0: f64,
    pub eta: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub xi: f64,
    pub max_iter: usize,
    pub max_backtrack: usize,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        let d = AdmmConfig::with_tau(1.0);
        Self {
            tau_factor: 0.04,
            rho0: d.rho0,
            t0: d.t0,
            eta: d.eta,
            eps_abs: d.eps_abs,
            eps_rel: d.eps_rel,
            xi: d.xi,
            max_iter: d.max_iter,
            max_backtrack: d.max_backtrack,
        }
    }
}

impl AdmmSettings {
    pub fn config_for(&self, model: &MeasurementModel) -> Result<AdmmConfig> {
        let li = lambda_inf(model)?;
        if li <= 0.0 {
            return Err(Error::InvalidParameter("A^H y is zero".into()));
        }
        let mut cfg = AdmmConfig::with_tau(1.0 / (self.tau_factor * li));
        cfg.rho0 = self.rho0;
        cfg.t0 = self.t0;
        cfg.eta = self.eta;
        cfg.eps_abs = self.eps_abs;
        cfg.eps_rel = self.eps_rel;
        cfg.xi = self.xi;
        cfg.max_iter = self.max_iter;
        cfg.max_backtrack = self.max_backtrack;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FistaSettings {
    /// `lambda = lambda_factor * lambda_inf`.
    pub lambda_factor: f64,
    pub t0: f64,
    pub eta: f64,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for FistaSettings {
    fn default() -> Self {
        let d = FistaConfig::with_lambda(1.0);
        Self {
            lambda_factor: 0.01,
            t0: d.t0,
            eta: d.eta,
            max_iter: d.max_iter,
            rel_tol: d.rel_tol,
        }
    }
}

impl FistaSettings {
    pub fn config_for(&self, model: &MeasurementModel) -> Result<FistaConfig> {
        let li = lambda_inf(model)?;
        if li <= 0.0 {
            return Err(Error::InvalidParameter("A^H y is zero".into()));
        }
        Ok(FistaConfig {
            lambda: self.lambda_factor * li,
            t0: self.t0,
            eta: self.eta,
            max_iter: self.max_iter,
            rel_tol: self.rel_tol,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OmpSettings {
    /// Greedy steps; defaults to the true channel sparsity.
    pub num_iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    /// Trials whose full estimated CIRs are written to `cir_estimates.csv`.
    pub cir_snapshot_trials: usize,
    /// Write per-iteration NMSD and ADMM residual traces.
    pub traces: bool,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            cir_snapshot_trials: 10,
            traces: true,
        }
    }
}

impl ExperimentConfig {
    pub fn reference() -> Self {
        Self::from_toml_str(REFERENCE_TOML).expect("bundled config parses")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads TOML, or JSON when the extension is `.json` or TOML parsing
    /// fails on a document that looks like JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            return Self::from_json_str(&text);
        }
        match Self::from_toml_str(&text) {
            Ok(cfg) => Ok(cfg),
            Err(e) if text.trim_start().starts_with('{') => Self::from_json_str(&text).map_err(|_| e),
            Err(e) => Err(e),
        }
    }

    pub fn probe_length(&self) -> usize {
        self.probe
            .length
            .unwrap_or(self.m_obs + self.channel.n_taps - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::InvalidParameter("n_trials must be >= 1".into()));
        }
        if self.m_obs == 0 {
            return Err(Error::InvalidParameter("m_obs must be >= 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::InvalidParameter("at least one solver is required".into()));
        }
        if self.noise.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one noise condition is required".into(),
            ));
        }
        for (i, a) in self.noise.iter().enumerate() {
            if self.noise[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate noise condition name '{}'",
                    a.name
                )));
            }
        }
        self.channel_config().validate()?;
        if let Some(k) = self.omp.num_iterations {
            if k == 0 || k > self.m_obs.min(self.channel.n_taps) {
                return Err(Error::InvalidParameter(format!(
                    "omp.num_iterations must be in 1..={}",
                    self.m_obs.min(self.channel.n_taps)
                )));
            }
        }
        Ok(())
    }

    pub fn probe_config(&self) -> ProbeConfig {
        ProbeConfig {
            length: self.probe_length(),
            seed: derive_seed(self.seed, 0, 0),
        }
    }

    pub fn channel_config(&self) -> ChannelConfig {
        ChannelConfig {
            n_taps: self.channel.n_taps,
            sparsity: self.channel.sparsity,
            amplitude_decay: self.channel.amplitude_decay,
            fading_rate: self.channel.fading_rate,
            seed: derive_seed(self.seed, 1, 0),
        }
    }

    /// Noise seed of trial `t`, shared by all noise conditions.
    pub fn noise_seed(&self, trial: usize) -> u64 {
        derive_seed(self.seed, 2, trial as u64)
    }
}

/// SplitMix64 finalizer over (base, stream, index).
fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Shared, read-only pieces of one experiment.
pub struct Scenario {
    pub probe: ComplexVector,
    pub a: ComplexMatrix,
    pub channel: ChannelRealization,
    /// Measured probe power.
    pub sigma_s2: f64,
}

impl Scenario {
    pub fn build(cfg: &ExperimentConfig, n_blocks: usize) -> Result<Self> {
        cfg.validate()?;
        let probe = generate_probe(&cfg.probe_config())?;
        let a = training_matrix(&probe, cfg.channel.n_taps, cfg.m_obs)?;
        let channel = generate_channel(&cfg.channel_config(), n_blocks)?;
        let sigma_s2 = mean_power(&probe);
        Ok(Self {
            probe,
            a,
            channel,
            sigma_s2,
        })
    }
}

pub fn run_solver(
    kind: SolverKind,
    model: &MeasurementModel,
    cfg: &ExperimentConfig,
    observer: impl FnMut(usize, &ComplexVector),
) -> Result<SolveResult> {
    match kind {
        SolverKind::Admm => admm::solve_with_observer(model, &cfg.admm.config_for(model)?, observer),
        SolverKind::Omp => {
            let k = cfg.omp.num_iterations.unwrap_or(cfg.channel.sparsity);
            baselines::omp_solve_with_observer(model, &OmpConfig { num_iterations: k }, observer)
        }
        SolverKind::Fista => {
            baselines::fista_solve_with_observer(model, &cfg.fista.config_for(model)?, observer)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    pub noise_condition: String,
    pub solver: String,
    pub seed: u64,
    pub nmsd_db: f64,
    pub iterations: usize,
    pub converged: bool,
    pub impulses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NmsdTraceRow {
    pub trial: usize,
    pub noise_condition: String,
    pub solver: String,
    pub iteration: usize,
    pub nmsd_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualTraceRow {
    pub trial: usize,
    pub noise_condition: String,
    pub iteration: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CirRow {
    pub trial: usize,
    pub noise_condition: String,
    pub solver: String,
    pub tap: usize,
    pub true_re: f64,
    pub true_im: f64,
    pub est_re: f64,
    pub est_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryCsvRow {
    pub noise_condition: String,
    pub solver: String,
    pub n_trials: usize,
    pub mean_nmsd_db: f64,
    pub mean_iterations: f64,
    pub converged_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionRow {
    pub noise_condition: String,
    pub snr_db: f64,
    pub inr_db: Option<f64>,
    pub q: f64,
    pub sigma_s2: f64,
    pub sinr_db: f64,
}

/// Everything one grid produces, in deterministic order.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub trial_rows: Vec<TrialRow>,
    pub nmsd_traces: Vec<NmsdTraceRow>,
    pub residual_traces: Vec<ResidualTraceRow>,
    pub cir_rows: Vec<CirRow>,
    pub conditions: Vec<ConditionRow>,
    /// ADMM runs that stopped on the residual test, kept for inspection.
    pub admm_results: Vec<(usize, String, SolveResult)>,
}

impl ExperimentOutput {
    pub fn summary(&self) -> Result<Vec<SummaryRow>> {
        aggregate(&self.records)
    }
}

/// Output of one (trial, condition) cell.
#[derive(Default)]
struct Cell {
    out: ExperimentOutput,
}

fn run_cell(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    trial: usize,
    cond: &NoiseCondition,
) -> Result<Cell> {
    let seed = cfg.noise_seed(trial);
    let noise_cfg = cond.noise_config(scenario.sigma_s2, seed);
    let x_true = &scenario.channel.blocks[trial];
    let inst = synthesize_with_matrix(scenario.a.clone(), x_true, &noise_cfg)?;
    let impulses = if noise_cfg.q > 0.0 {
        generate_gmn_labeled(cfg.m_obs, &noise_cfg)?
            .1
            .iter()
            .filter(|&&b| b)
            .count()
    } else {
        0
    };
    let mut cell = Cell::default();

    for &kind in &cfg.solvers {
        let mut trace = Vec::new();
        let started = Instant::now();
        let solved = run_solver(kind, &inst.model, cfg, |k, x| {
            if cfg.output.traces {
                if let Ok(v) = nmsd(x_true, x) {
                    trace.push((k, v));
                }
            }
        });
        let runtime_s = started.elapsed().as_secs_f64();
        // a failed solve is scored as the all-zero estimate
        let (x_hat, iterations, converged) = match &solved {
            Ok(r) => (r.x_hat.clone(), r.iterations, r.converged),
            Err(_) => (ComplexVector::zeros(x_true.len()), 0, false),
        };
        let nmsd_db = nmsd(x_true, &x_hat)?;
        let name = kind.name().to_string();

        cell.out.records.push(TrialRecord {
            trial,
            noise_condition: cond.name.clone(),
            solver_name: name.clone(),
            seed,
            nmsd_db,
            iterations,
            converged,
            runtime_s,
        });
        cell.out.trial_rows.push(TrialRow {
            trial,
            noise_condition: cond.name.clone(),
            solver: name.clone(),
            seed,
            nmsd_db,
            iterations,
            converged,
            impulses,
        });
        cell.out
            .nmsd_traces
            .extend(trace.into_iter().map(|(iteration, v)| NmsdTraceRow {
                trial,
                noise_condition: cond.name.clone(),
                solver: name.clone(),
                iteration,
                nmsd_db: v,
            }));
        if trial < cfg.output.cir_snapshot_trials {
            cell.out
                .cir_rows
                .extend(x_true.iter().zip(x_hat.iter()).enumerate().map(|(tap, (t, e))| CirRow {
                    trial,
                    noise_condition: cond.name.clone(),
                    solver: name.clone(),
                    tap,
                    true_re: t.re,
                    true_im: t.im,
                    est_re: e.re,
                    est_im: e.im,
                }));
        }
        if let (SolverKind::Admm, Ok(r)) = (kind, solved) {
            if cfg.output.traces {
                cell.out
                    .residual_traces
                    .extend((0..r.iterations).map(|i| ResidualTraceRow {
                        trial,
                        noise_condition: cond.name.clone(),
                        iteration: i + 1,
                        objective: r.objective_history[i],
                        primal_residual: r.primal_residual_history[i],
                        dual_residual: r.dual_residual_history[i],
                        eps_primal: r.primal_tolerance_history[i],
                        eps_dual: r.dual_tolerance_history[i],
                        rho: r.rho_history[i],
                    }));
            }
            cell.out.admm_results.push((trial, cond.name.clone(), r));
        }
    }
    Ok(cell)
}

/// Runs the full grid in memory. Cells run in parallel; the output is
/// ordered by (trial, condition, solver) regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let scenario = Scenario::build(cfg, cfg.n_trials)?;
    let cells: Vec<(usize, usize)> = (0..cfg.n_trials)
        .flat_map(|t| (0..cfg.noise.len()).map(move |c| (t, c)))
        .collect();
    let mut results: Vec<((usize, usize), Result<Cell>)> = cells
        .par_iter()
        .map(|&(t, c)| ((t, c), run_cell(cfg, &scenario, t, &cfg.noise[c])))
        .collect();
    results.sort_by_key(|(key, _)| *key);

    let mut out = ExperimentOutput::default();
    for cond in &cfg.noise {
        let nc = cond.noise_config(scenario.sigma_s2, 0);
        let SnrReport { snr_db, sinr_db, .. } = snr_accounting(scenario.sigma_s2, &nc)?;
        out.conditions.push(ConditionRow {
            noise_condition: cond.name.clone(),
            snr_db,
            inr_db: cond.inr_db,
            q: nc.q,
            sigma_s2: scenario.sigma_s2,
            sinr_db,
        });
    }
    for (_, cell) in results {
        let cell = cell?.out;
        out.records.extend(cell.records);
        out.trial_rows.extend(cell.trial_rows);
        out.nmsd_traces.extend(cell.nmsd_traces);
        out.residual_traces.extend(cell.residual_traces);
        out.cir_rows.extend(cell.cir_rows);
        out.admm_results.extend(cell.admm_results);
    }
    Ok(out)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    noise_condition: &'a str,
    solver: &'a str,
    n_trials: usize,
    mean_nmsd_db: f64,
    mean_iterations: f64,
    mean_runtime_s: f64,
    converged_fraction: f64,
}

#[derive(Serialize)]
struct TimingJson<'a> {
    trial: usize,
    noise_condition: &'a str,
    solver: &'a str,
    runtime_s: f64,
}

pub const ARTIFACT_FILES: [&str; 8] = [
    "trials.csv",
    "summary.csv",
    "conditions.csv",
    "nmsd_traces.csv",
    "admm_residuals.csv",
    "cir_estimates.csv",
    "summary.json",
    "timings.json",
];

/// Writes every artifact of `out` into `dir`, creating it if needed.
pub fn write_artifacts(out: &ExperimentOutput, dir: &Path) -> Result<Vec<SummaryRow>> {
    fs::create_dir_all(dir)?;
    let summary = out.summary()?;

    write_csv(&dir.join("trials.csv"), &out.trial_rows)?;
    let summary_rows: Vec<SummaryCsvRow> = summary
        .iter()
        .map(|s| SummaryCsvRow {
            noise_condition: s.noise_condition.clone(),
            solver: s.solver.clone(),
            n_trials: s.n_trials,
            mean_nmsd_db: s.mean_nmsd_db,
            mean_iterations: s.mean_iterations,
            converged_fraction: s.converged_fraction,
        })
        .collect();
    write_csv(&dir.join("summary.csv"), &summary_rows)?;
    write_csv(&dir.join("conditions.csv"), &out.conditions)?;
    write_csv(&dir.join("nmsd_traces.csv"), &out.nmsd_traces)?;
    write_csv(&dir.join("admm_residuals.csv"), &out.residual_traces)?;
    write_csv(&dir.join("cir_estimates.csv"), &out.cir_rows)?;

    let json: Vec<SummaryJson> = summary
        .iter()
        .map(|s| SummaryJson {
            noise_condition: &s.noise_condition,
            solver: &s.solver,
            n_trials: s.n_trials,
            mean_nmsd_db: s.mean_nmsd_db,
            mean_iterations: s.mean_iterations,
            mean_runtime_s: s.mean_runtime_s,
            converged_fraction: s.converged_fraction,
        })
        .collect();
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&json)?)?;
    let timings: Vec<TimingJson> = out
        .records
        .iter()
        .map(|r| TimingJson {
            trial: r.trial,
            noise_condition: &r.noise_condition,
            solver: &r.solver_name,
            runtime_s: r.runtime_s,
        })
        .collect();
    fs::write(dir.join("timings.json"), serde_json::to_string_pretty(&timings)?)?;
    Ok(summary)
}

/// Runs the grid and writes all artifacts to `cfg.output_dir`.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<(ExperimentOutput, Vec<SummaryRow>)> {
    cfg.validate()?;
    // fail on an unwritable directory before spending time on the grid
    fs::create_dir_all(&cfg.output_dir)?;
    let out = run_experiment(cfg)?;
    let summary = write_artifacts(&out, &cfg.output_dir)?;
    Ok((out, summary))
}

/// Parameters `sweep` can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// INR in dB of a single impulsive condition.
    Inr,
    /// SNR in dB of every condition.
    Snr,
    /// Impulse probability of every impulsive condition.
    Q,
    /// `tau = 1 / (value * lambda_inf)`.
    TauFactor,
    /// `lambda = value * lambda_inf`.
    LambdaFactor,
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "inr" => Ok(Self::Inr),
            "snr" => Ok(Self::Snr),
            "q" => Ok(Self::Q),
            "tau" | "tau-factor" => Ok(Self::TauFactor),
            "lambda" | "lambda-factor" => Ok(Self::LambdaFactor),
            other => Err(format!(
                "unknown sweep parameter '{other}' (expected inr, snr, q, tau-factor or lambda-factor)"
            )),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::Inr => "inr",
            Self::Snr => "snr",
            Self::Q => "q",
            Self::TauFactor => "tau-factor",
            Self::LambdaFactor => "lambda-factor",
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &ExperimentConfig, value: f64) -> ExperimentConfig {
        let mut cfg = base.clone();
        match self {
            Self::Inr => {
                let template = base
                    .noise
                    .iter()
                    .find(|c| c.inr_db.is_some())
                    .or(base.noise.first())
                    .cloned()
                    .expect("validated config has a noise condition");
                cfg.noise = vec![NoiseCondition {
                    name: format!("inr{value}"),
                    inr_db: Some(value),
                    q: if template.inr_db.is_some() { template.q } else { default_q() },
                    ..template
                }];
            }
            Self::Snr => cfg.noise.iter_mut().for_each(|c| c.snr_db = value),
            Self::Q => cfg
                .noise
                .iter_mut()
                .filter(|c| c.inr_db.is_some())
                .for_each(|c| c.q = value),
            Self::TauFactor => cfg.admm.tau_factor = value,
            Self::LambdaFactor => cfg.fista.lambda_factor = value,
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub noise_condition: String,
    pub solver: String,
    pub n_trials: usize,
    pub mean_nmsd_db: f64,
    pub mean_iterations: f64,
}

/// Runs the grid once per value and writes `sweep.csv` into `cfg.output_dir`.
pub fn run_sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Empty("sweep values"));
    }
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let mut rows = Vec::new();
    for &value in values {
        let point = param.apply(cfg, value);
        let out = run_experiment(&point)?;
        for s in out.summary()? {
            rows.push(SweepRow {
                param: param.name().to_string(),
                value,
                noise_condition: s.noise_condition,
                solver: s.solver,
                n_trials: s.n_trials,
                mean_nmsd_db: s.mean_nmsd_db,
                mean_iterations: s.mean_iterations,
            });
        }
    }
    write_csv(&cfg.output_dir.join("sweep.csv"), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelTapRow {
    pub block: usize,
    pub delay: usize,
    pub re: f64,
    pub im: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseSampleRow {
    pub noise_condition: String,
    pub sample: usize,
    pub re: f64,
    pub im: f64,
    pub impulsive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub chip: usize,
    pub value: f64,
}

/// Writes the probe, `n_blocks` channel blocks (active taps only) and the
/// first trial's noise for every condition. Returns the per-condition
/// power accounting, including the measured noise power.
pub fn run_simulate(cfg: &ExperimentConfig, n_blocks: usize) -> Result<Vec<(ConditionRow, f64)>> {
    cfg.validate()?;
    if n_blocks == 0 {
        return Err(Error::InvalidParameter("blocks must be >= 1".into()));
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let scenario = Scenario::build(cfg, n_blocks)?;

    let probe_rows: Vec<ProbeRow> = scenario
        .probe
        .iter()
        .enumerate()
        .map(|(chip, c)| ProbeRow { chip, value: c.re })
        .collect();
    write_csv(&cfg.output_dir.join("probe.csv"), &probe_rows)?;

    let mut taps = Vec::new();
    for (block, h) in scenario.channel.blocks.iter().enumerate() {
        for &d in &scenario.channel.delays {
            taps.push(ChannelTapRow {
                block,
                delay: d,
                re: h[d].re,
                im: h[d].im,
                power: h[d].norm_sqr(),
            });
        }
    }
    write_csv(&cfg.output_dir.join("channel_taps.csv"), &taps)?;

    let mut samples = Vec::new();
    let mut report = Vec::new();
    for cond in &cfg.noise {
        let nc = cond.noise_config(scenario.sigma_s2, cfg.noise_seed(0));
        let (noise, labels) = generate_gmn_labeled(cfg.m_obs, &nc)?;
        samples.extend(noise.iter().zip(&labels).enumerate().map(|(i, (n, &imp))| {
            NoiseSampleRow {
                noise_condition: cond.name.clone(),
                sample: i,
                re: n.re,
                im: n.im,
                impulsive: imp,
            }
        }));
        let acct = snr_accounting(scenario.sigma_s2, &nc)?;
        report.push((
            ConditionRow {
                noise_condition: cond.name.clone(),
                snr_db: acct.snr_db,
                inr_db: cond.inr_db,
                q: nc.q,
                sigma_s2: scenario.sigma_s2,
                sinr_db: acct.sinr_db,
            },
            mean_power(&noise),
        ));
    }
    write_csv(&cfg.output_dir.join("noise.csv"), &samples)?;
    Ok(report)
}

/// Single-instance result for `estimate`.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub solver: SolverKind,
    pub noise_condition: String,
    pub nmsd_db: f64,
    pub result: SolveResult,
}

/// Solves trial 0 of the named condition (the first when `None`).
pub fn run_estimate(cfg: &ExperimentConfig, solver: SolverKind, condition: Option<&str>) -> Result<EstimateReport> {
    cfg.validate()?;
    let cond = match condition {
        Some(name) => cfg
            .noise
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::InvalidParameter(format!("no noise condition named '{name}'")))?,
        None => &cfg.noise[0],
    };
    let scenario = Scenario::build(cfg, 1)?;
    let nc = cond.noise_config(scenario.sigma_s2, cfg.noise_seed(0));
    let x_true = &scenario.channel.blocks[0];
    let inst = synthesize_with_matrix(scenario.a.clone(), x_true, &nc)?;
    let result = run_solver(solver, &inst.model, cfg, |_, _| {})?;
    Ok(EstimateReport {
        solver,
        noise_condition: cond.name.clone(),
        nmsd_db: nmsd(x_true, &result.x_hat)?,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::reference();
        cfg.n_trials = 3;
        cfg.m_obs = 60;
        cfg.channel.n_taps = 80;
        cfg.channel.sparsity = 4;
        cfg.output.cir_snapshot_trials = 1;
        cfg
    }

    #[test]
    fn bundled_config_matches_reference_setting() {
        let cfg = ExperimentConfig::reference();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_trials, 100);
        assert_eq!((cfg.m_obs, cfg.channel.n_taps, cfg.channel.sparsity), (300, 500, 15));
        assert_eq!(cfg.noise.len(), 3);
        assert_eq!(cfg.noise[0].inr_db, None);
        assert_eq!(cfg.noise[1].inr_db, Some(40.0));
        assert_eq!(cfg.noise[2].inr_db, Some(50.0));
        assert!(cfg.noise.iter().all(|c| c.snr_db == 15.0));
        assert!(cfg.noise[1..].iter().all(|c| c.q == 0.002));
        assert_eq!(cfg.admm, AdmmSettings::default());
        assert_eq!(cfg.fista, FistaSettings::default());
    }

    #[test]
    fn json_and_toml_agree() {
        let cfg = ExperimentConfig::reference();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json_str(&json).unwrap(), cfg);
    }

    #[test]
    fn config_validation() {
        let mut cfg = small();
        cfg.solvers.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = small();
        cfg.noise.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = small();
        cfg.noise[1].name = cfg.noise[0].name.clone();
        assert!(cfg.validate().is_err());
        let mut cfg = small();
        cfg.n_trials = 0;
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_toml_str("n_trials = 1\nbogus = 2").is_err());
    }

    #[test]
    fn record_cardinality() {
        let mut cfg = small();
        cfg.solvers = vec![SolverKind::Admm];
        cfg.noise.truncate(2);
        cfg.n_trials = 5;
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.records.len(), 10);
        let summary = out.summary().unwrap();
        assert_eq!(summary.len(), 2);
        assert!(summary.iter().all(|s| s.n_trials == 5));
    }

    #[test]
    fn output_is_ordered_by_trial_condition_solver() {
        let out = run_experiment(&small()).unwrap();
        let keys: Vec<(usize, String, String)> = out
            .records
            .iter()
            .map(|r| (r.trial, r.noise_condition.clone(), r.solver_name.clone()))
            .collect();
        assert_eq!(keys.len(), 3 * 3 * 3);
        assert_eq!(keys[0], (0, "awgn".into(), "admm".into()));
        assert_eq!(keys[1], (0, "awgn".into(), "omp".into()));
        assert_eq!(keys[3], (0, "inr40".into(), "admm".into()));
        assert_eq!(keys[9], (1, "awgn".into(), "admm".into()));
    }

    #[test]
    fn conditions_share_impulse_positions() {
        let out = run_experiment(&small()).unwrap();
        for t in 0..3 {
            let imp: Vec<usize> = out
                .trial_rows
                .iter()
                .filter(|r| r.trial == t && r.noise_condition != "awgn")
                .map(|r| r.impulses)
                .collect();
            assert!(imp.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn sweep_param_application() {
        let base = ExperimentConfig::reference();
        let p = SweepParam::Inr.apply(&base, 30.0);
        assert_eq!(p.noise.len(), 1);
        assert_eq!(p.noise[0].inr_db, Some(30.0));
        assert_eq!(p.noise[0].q, 0.002);
        let p = SweepParam::TauFactor.apply(&base, 0.1);
        assert_eq!(p.admm.tau_factor, 0.1);
        let p = SweepParam::Q.apply(&base, 0.01);
        assert_eq!(p.noise[0].q, 0.002);
        assert_eq!(p.noise[1].q, 0.01);
        assert!("bogus".parse::<SweepParam>().is_err());
        assert_eq!("tau".parse::<SweepParam>().unwrap(), SweepParam::TauFactor);
    }

    #[test]
    fn seeds_are_distinct_across_streams() {
        let cfg = ExperimentConfig::reference();
        let a = cfg.probe_config().seed;
        let b = cfg.channel_config().seed;
        let c = cfg.noise_seed(0);
        let d = cfg.noise_seed(1);
        assert!(a != b && a != c && b != c && c != d);
    }
}
