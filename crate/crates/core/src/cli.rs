//! Experiment configuration and the runner behind the `vardiss` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channels::{NoiseKind, NoiseLocation, NoiseSpec};
use crate::circuits::DissipativeAnsatz;
use crate::diagnostics::{descent_check, median, pl_ratio, task_grad_norm_at_init, DescentMonitor, PlMonitor};
use crate::engine::{make_loss, DvqeConfig, RecoveryConfig, TaskConfig};
use crate::error::{Error, Result};
use crate::hamiltonian::{ground_energy, BenchmarkModel, PauliHamiltonian};
use crate::optim::{init_params, train, GradientMethod, Monitor, Objective, TrainingTrace};
use crate::states::{default_dressed_cluster_state, plus_state, w_state, PureState};

/// Environment variable that replaces `output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "VARDISS_OUTPUT_DIR";

pub const TRACE_HEADER: &str = "iteration,loss,energy_or_fidelity,gap_to_E0_or_infidelity,grad_norm";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    Dvqe,
    Recover,
    ScanAncilla,
    ScanRounds,
    ScanNoise,
    Eig,
    Diag,
}

/// Which single-run section a scan or diagnostic builds on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseTask {
    Dvqe,
    Recover,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetState {
    W,
    Plus,
    DressedCluster,
}

impl TargetState {
    pub fn build(self, n: usize) -> Result<PureState> {
        match self {
            TargetState::W => w_state(n),
            TargetState::Plus => plus_state(n),
            TargetState::DressedCluster => default_dressed_cluster_state(n),
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_reset_q() -> f64 {
    1.0
}
fn default_rounds() -> usize {
    3
}
fn default_vqe_layers() -> usize {
    2
}
fn default_dvqe_lr() -> f64 {
    0.2
}
fn default_recover_lr() -> f64 {
    0.8
}
fn default_iterations() -> usize {
    100
}
fn default_three() -> usize {
    3
}
fn default_init_samples() -> usize {
    16
}

/// Hamiltonian by benchmark name or from a Pauli-string text file.
#[derive(Clone, Copy, Debug)]
pub struct HamiltonianSource<'a> {
    pub model: Option<BenchmarkModel>,
    pub hamiltonian_file: Option<&'a Path>,
}

impl HamiltonianSource<'_> {
    fn check(&self, prefix: &str, base: &Path, problems: &mut Vec<String>) {
        match (self.model, self.hamiltonian_file) {
            (Some(_), Some(_)) => problems.push(format!("{prefix}: set only one of model and hamiltonian_file")),
            (None, None) => problems.push(format!("{prefix}: one of model or hamiltonian_file is required")),
            (None, Some(p)) if !base.join(p).is_file() => {
                problems.push(format!("{prefix}.hamiltonian_file: {} does not exist", p.display()))
            }
            _ => {}
        }
    }

    pub fn load(&self, n: usize, base: &Path) -> Result<PauliHamiltonian> {
        match (self.model, self.hamiltonian_file) {
            (Some(model), None) => model.build(n),
            (None, Some(path)) => {
                let h: PauliHamiltonian = fs::read_to_string(base.join(path))?.parse()?;
                if h.qubit_count() != n {
                    return Err(Error::Config(vec![format!(
                        "{} acts on {} qubits, n = {n}",
                        path.display(),
                        h.qubit_count()
                    )]));
                }
                Ok(h)
            }
            _ => Err(Error::Config(vec!["ambiguous Hamiltonian source".into()])),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DvqeSection {
    pub n: usize,
    #[serde(default)]
    pub m: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_vqe_layers")]
    pub vqe_layers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<BenchmarkModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian_file: Option<PathBuf>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub ansatz: DissipativeAnsatz,
    #[serde(default)]
    pub gradient: GradientMethod,
    #[serde(default = "default_dvqe_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

impl DvqeSection {
    pub fn source(&self) -> HamiltonianSource<'_> {
        HamiltonianSource { model: self.model, hamiltonian_file: self.hamiltonian_file.as_deref() }
    }
}

/// Preparation noise; always applied once to the input state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepNoise {
    #[serde(default)]
    pub kind: NoiseKind,
    #[serde(default)]
    pub p: f64,
}

impl PrepNoise {
    pub fn spec(self) -> NoiseSpec {
        NoiseSpec { kind: self.kind, p: self.p, location: NoiseLocation::InputOnly }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverSection {
    #[serde(default = "default_three")]
    pub n: usize,
    #[serde(default = "default_three")]
    pub m: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    pub target: TargetState,
    #[serde(default)]
    pub noise_prep: PrepNoise,
    #[serde(default)]
    pub noise_run: NoiseSpec,
    #[serde(default)]
    pub ansatz: DissipativeAnsatz,
    #[serde(default)]
    pub gradient: GradientMethod,
    #[serde(default = "default_recover_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub base: BaseTask,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m_values: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rounds_values: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigSection {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<BenchmarkModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian_file: Option<PathBuf>,
}

impl EigSection {
    pub fn source(&self) -> HamiltonianSource<'_> {
        HamiltonianSource { model: self.model, hamiltonian_file: self.hamiltonian_file.as_deref() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagSection {
    pub base: BaseTask,
    #[serde(default = "default_init_samples")]
    pub init_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskName,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Ancilla reset probability between rounds.
    #[serde(default = "default_reset_q")]
    pub reset_q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dvqe: Option<DvqeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recover: Option<RecoverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eig: Option<EigSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag: Option<DiagSection>,
    /// Directory relative paths are resolved against; not part of the document.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_in(text, Path::new("."))
}

pub fn parse_config_in(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    cfg.base_dir = base_dir.to_path_buf();
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    parse_config_in(&text, base)
}

pub fn serialize_config(cfg: &RunConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::InvalidArgument(format!("cannot serialize config: {e}")))
}

fn check_lr(prefix: &str, lr: f64, problems: &mut Vec<String>) {
    if !(lr > 0.0 && lr.is_finite()) {
        problems.push(format!("{prefix}.learning_rate: must be > 0, got {lr}"));
    }
}

fn check_p(field: &str, p: f64, problems: &mut Vec<String>) {
    if !(0.0..=1.0).contains(&p) {
        problems.push(format!("{field}: must lie in [0, 1], got {p}"));
    }
}

impl RunConfig {
    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.seeds.is_empty() {
            problems.push("seeds: must be nonempty".to_string());
        }
        if !(self.reset_q > 0.0 && self.reset_q <= 1.0) {
            problems.push(format!("reset_q: must lie in (0, 1], got {}", self.reset_q));
        } else if self.reset_q != 1.0 {
            problems.push(format!("reset_q: only full reset (1) is supported, got {}", self.reset_q));
        }
        let needs = |name: &str, present: bool, problems: &mut Vec<String>| {
            if !present {
                problems.push(format!("[{name}] section is required for task {:?}", self.task));
            }
        };
        match self.task {
            TaskName::Dvqe => needs("dvqe", self.dvqe.is_some(), &mut problems),
            TaskName::Recover => needs("recover", self.recover.is_some(), &mut problems),
            TaskName::Eig => needs("eig", self.eig.is_some(), &mut problems),
            TaskName::Diag => match &self.diag {
                None => needs("diag", false, &mut problems),
                Some(d) => {
                    self.check_base(d.base, &mut problems);
                    if d.init_samples < 2 {
                        problems.push("diag.init_samples: must be >= 2".into());
                    }
                }
            },
            TaskName::ScanAncilla | TaskName::ScanRounds | TaskName::ScanNoise => match &self.scan {
                None => needs("scan", false, &mut problems),
                Some(s) => {
                    self.check_base(s.base, &mut problems);
                    self.check_scan(s, &mut problems);
                }
            },
        }
        if let Some(d) = &self.dvqe {
            d.source().check("dvqe", &self.base_dir, &mut problems);
            check_lr("dvqe", d.learning_rate, &mut problems);
            check_p("dvqe.noise.p", d.noise.p, &mut problems);
            if d.n < 2 {
                problems.push(format!("dvqe.n: must be >= 2, got {}", d.n));
            }
            if d.vqe_layers == 0 {
                problems.push("dvqe.vqe_layers: must be >= 1".into());
            }
            if d.iterations == 0 {
                problems.push("dvqe.iterations: must be >= 1".into());
            }
            if d.m == 0 && d.rounds > 0 && self.task != TaskName::ScanAncilla {
                problems.push("dvqe.m: m = 0 requires rounds = 0".into());
            }
            if d.n + d.m > 12 {
                problems.push(format!("dvqe: n + m = {} exceeds 12 qubits", d.n + d.m));
            }
        }
        if let Some(r) = &self.recover {
            check_lr("recover", r.learning_rate, &mut problems);
            check_p("recover.noise_prep.p", r.noise_prep.p, &mut problems);
            check_p("recover.noise_run.p", r.noise_run.p, &mut problems);
            if r.n == 0 {
                problems.push("recover.n: must be >= 1".into());
            }
            if r.rounds == 0 && self.task != TaskName::ScanRounds {
                problems.push("recover.rounds: must be >= 1".into());
            }
            if r.m == 0 && self.task != TaskName::ScanAncilla {
                problems.push("recover.m: must be >= 1".into());
            }
            if r.iterations == 0 {
                problems.push("recover.iterations: must be >= 1".into());
            }
            if r.noise_run.location == NoiseLocation::InputOnly && !r.noise_run.is_trivial() {
                problems.push("recover.noise_run.location: input_only is reserved for noise_prep".into());
            }
            if r.n + r.m > 12 {
                problems.push(format!("recover: n + m = {} exceeds 12 qubits", r.n + r.m));
            }
        }
        if let Some(e) = &self.eig {
            e.source().check("eig", &self.base_dir, &mut problems);
            if e.n == 0 || e.n > 12 {
                problems.push(format!("eig.n: must lie in 1..=12, got {}", e.n));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    fn check_base(&self, base: BaseTask, problems: &mut Vec<String>) {
        match base {
            BaseTask::Dvqe if self.dvqe.is_none() => problems.push("[dvqe] section is required as base".into()),
            BaseTask::Recover if self.recover.is_none() => {
                problems.push("[recover] section is required as base".into())
            }
            _ => {}
        }
    }

    fn check_scan(&self, s: &ScanSection, problems: &mut Vec<String>) {
        let increasing = |v: &[usize]| v.windows(2).all(|w| w[0] < w[1]);
        match self.task {
            TaskName::ScanAncilla => {
                if s.m_values.is_empty() || !increasing(&s.m_values) {
                    problems.push("scan.m_values: must be nonempty and strictly increasing".into());
                }
                if s.base == BaseTask::Recover && s.m_values.contains(&0) {
                    problems.push("scan.m_values: recovery needs m >= 1".into());
                }
            }
            TaskName::ScanRounds => {
                if s.rounds_values.is_empty() || !increasing(&s.rounds_values) {
                    problems.push("scan.rounds_values: must be nonempty and strictly increasing".into());
                }
                if s.base == BaseTask::Recover && s.rounds_values.contains(&0) {
                    problems.push("scan.rounds_values: recovery needs rounds >= 1".into());
                }
            }
            TaskName::ScanNoise => {
                if s.p_values.is_empty() || s.p_values.windows(2).any(|w| w[0] >= w[1]) {
                    problems.push("scan.p_values: must be nonempty and strictly increasing".into());
                }
                for &p in &s.p_values {
                    check_p("scan.p_values", p, problems);
                }
                let kind = match s.base {
                    BaseTask::Dvqe => self.dvqe.as_ref().map(|d| d.noise.kind),
                    BaseTask::Recover => self.recover.as_ref().map(|r| r.noise_prep.kind),
                };
                if kind == Some(NoiseKind::None) {
                    problems.push("scan: noise scan needs a noise kind other than none".into());
                }
            }
            _ => {}
        }
    }

    /// Output directory after applying the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.base_dir.join(&self.output_dir),
        }
    }

    fn dvqe_task(&self, d: &DvqeSection, seed: u64) -> Result<TaskConfig> {
        let hamiltonian = d.source().load(d.n, &self.base_dir)?;
        Ok(TaskConfig::Dvqe(DvqeConfig {
            n: d.n,
            m: d.m,
            rounds: if d.m == 0 { 0 } else { d.rounds },
            vqe_layers: d.vqe_layers,
            hamiltonian,
            noise: d.noise,
            ansatz: d.ansatz,
            gradient: d.gradient,
            seed,
            learning_rate: d.learning_rate,
            iterations: d.iterations,
        }))
    }

    fn recover_task(&self, r: &RecoverSection, seed: u64) -> Result<TaskConfig> {
        Ok(TaskConfig::Recovery(RecoveryConfig {
            n: r.n,
            m: r.m,
            rounds: r.rounds,
            target: r.target.build(r.n)?,
            noise_prep: r.noise_prep.spec(),
            noise_run: r.noise_run,
            ansatz: r.ansatz,
            gradient: r.gradient,
            seed,
            learning_rate: r.learning_rate,
            iterations: r.iterations,
        }))
    }

    fn base_task(&self, base: BaseTask, seed: u64) -> Result<TaskConfig> {
        match base {
            BaseTask::Dvqe => self.dvqe_task(self.dvqe.as_ref().expect("validated"), seed),
            BaseTask::Recover => self.recover_task(self.recover.as_ref().expect("validated"), seed),
        }
    }

    /// Every `(variant, task)` pair the run will train, seed-major within a variant.
    pub fn variants(&self) -> Result<RunPlan> {
        let per_seed = |f: &dyn Fn(u64) -> Result<TaskConfig>| -> Result<Vec<(u64, TaskConfig)>> {
            self.seeds.iter().map(|&s| f(s).map(|t| (s, t))).collect()
        };
        let mut out = Vec::new();
        match self.task {
            TaskName::Dvqe => out.push(("dvqe".to_string(), per_seed(&|s| self.base_task(BaseTask::Dvqe, s))?)),
            TaskName::Recover => {
                out.push(("recover".to_string(), per_seed(&|s| self.base_task(BaseTask::Recover, s))?))
            }
            TaskName::Diag => {
                let base = self.diag.as_ref().expect("validated").base;
                out.push(("diag".to_string(), per_seed(&|s| self.base_task(base, s))?));
            }
            TaskName::ScanAncilla | TaskName::ScanRounds | TaskName::ScanNoise => {
                let scan = self.scan.as_ref().expect("validated");
                let keys: Vec<(String, ScanValue)> = match self.task {
                    TaskName::ScanAncilla => {
                        scan.m_values.iter().map(|&m| (format!("m{m}"), ScanValue::Ancillas(m))).collect()
                    }
                    TaskName::ScanRounds => {
                        scan.rounds_values.iter().map(|&t| (format!("T{t}"), ScanValue::Rounds(t))).collect()
                    }
                    _ => scan.p_values.iter().map(|&p| (format!("p{p}"), ScanValue::Noise(p))).collect(),
                };
                for (key, value) in keys {
                    let runs = per_seed(&|s| Ok(value.apply(self.base_task(scan.base, s)?)))?;
                    out.push((key, runs));
                }
            }
            TaskName::Eig => {}
        }
        Ok(out)
    }
}

/// Variant key with its `(seed, task)` runs.
pub type RunPlan = Vec<(String, Vec<(u64, TaskConfig)>)>;

#[derive(Clone, Copy)]
enum ScanValue {
    Ancillas(usize),
    Rounds(usize),
    Noise(f64),
}

impl ScanValue {
    fn apply(self, task: TaskConfig) -> TaskConfig {
        match (self, task) {
            (ScanValue::Ancillas(m), TaskConfig::Dvqe(c)) => {
                // The ancilla-free point of a scan is the plain VQE baseline.
                let rounds = if m == 0 { 0 } else { c.rounds };
                TaskConfig::Dvqe(DvqeConfig { m, rounds, ..c })
            }
            (ScanValue::Ancillas(m), TaskConfig::Recovery(c)) => TaskConfig::Recovery(RecoveryConfig { m, ..c }),
            (ScanValue::Rounds(t), TaskConfig::Dvqe(c)) => TaskConfig::Dvqe(DvqeConfig { rounds: t, ..c }),
            (ScanValue::Rounds(t), TaskConfig::Recovery(c)) => TaskConfig::Recovery(RecoveryConfig { rounds: t, ..c }),
            (ScanValue::Noise(p), TaskConfig::Dvqe(c)) => {
                TaskConfig::Dvqe(DvqeConfig { noise: NoiseSpec { p, ..c.noise }, ..c })
            }
            (ScanValue::Noise(p), TaskConfig::Recovery(c)) => {
                TaskConfig::Recovery(RecoveryConfig { noise_prep: NoiseSpec { p, ..c.noise_prep }, ..c })
            }
        }
    }
}

/// Trace CSV text; extra columns come from the trace's monitors.
pub fn trace_csv(trace: &TrainingTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    for name in &trace.monitor_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for r in &trace.records {
        let _ = write!(out, "{},{},{},{},{}", r.iteration, r.loss, r.metric, r.gap, r.grad_norm);
        for v in &r.monitors {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: String,
    pub seed: u64,
    pub final_metric: Option<f64>,
    pub final_gap: Option<f64>,
    /// Fidelity gain over the noisy input (recovery) or energy decrease from
    /// initialization (ground-state search).
    pub gain: Option<f64>,
    /// Exact ground energy or untreated input fidelity.
    pub reference: f64,
    pub abort: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub median_final_metric: Option<f64>,
    pub median_gain: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagSummary {
    pub variant: String,
    pub seed: u64,
    pub pl_min: Option<f64>,
    pub pl_median: Option<f64>,
    pub descent_fraction: f64,
    pub init_grad_norm_sq_mean: f64,
    pub init_grad_norm_sq_variance: f64,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: Option<TaskName>,
    /// Exact ground energy of the task Hamiltonian.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qubits: Option<usize>,
    pub runs: Vec<RunSummary>,
    pub variants: Vec<VariantSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<DiagSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub saturation_point: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunError {
    pub variant: String,
    pub seed: Option<u64>,
    pub message: String,
}

/// What [`run`] produced: the report, the failures and where files went.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub errors: Vec<RunError>,
    pub output_dir: PathBuf,
}

impl RunOutcome {
    pub fn success(&self) -> bool {
        self.errors.is_empty()
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("cannot encode {}: {e}", path.display())))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Saturation tolerance on successive median fidelities.
const PLATEAU_TOL: f64 = 0.02;

/// Runs the configured task and writes traces, summaries and timings.
///
/// Sub-run failures do not stop the run; they are collected into
/// `errors.json` and reported through [`RunOutcome::success`].
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let dir = cfg.resolved_output_dir();
    fs::create_dir_all(&dir)?;
    let _ = fs::remove_file(dir.join("errors.json"));
    let mut report = RunReport { task: Some(cfg.task), ..Default::default() };
    let mut errors = Vec::new();

    if cfg.task == TaskName::Eig {
        let e = cfg.eig.as_ref().expect("validated");
        let h = e.source().load(e.n, &cfg.base_dir)?;
        report.e0 = Some(ground_energy(&h)?.0);
        report.qubits = Some(e.n);
        write_json(&dir.join("summary.json"), &report)?;
        return Ok(RunOutcome { report, errors, output_dir: dir });
    }

    let variants = match cfg.variants() {
        Ok(v) => v,
        Err(e) => {
            errors.push(RunError { variant: "setup".into(), seed: None, message: e.to_string() });
            write_json(&dir.join("errors.json"), &errors)?;
            return Ok(RunOutcome { report, errors, output_dir: dir });
        }
    };
    let mut summary_csv = String::from("variant,seed,final_metric,final_gap,gain\n");
    let mut timing_csv = String::from("variant,seed,wall_seconds\n");
    let diag = cfg.task == TaskName::Diag;
    for (variant, runs) in &variants {
        let mut finals = Vec::new();
        let mut gains = Vec::new();
        for (seed, task) in runs {
            let started = Instant::now();
            match run_one(variant, *seed, task, diag, cfg) {
                Ok((summary, trace, diag_summary)) => {
                    fs::write(dir.join(format!("trace_{variant}_seed{seed}.csv")), trace_csv(&trace))?;
                    if let TaskConfig::Dvqe(_) = task {
                        report.e0 = Some(summary.reference);
                    }
                    if let Some(reason) = &summary.abort {
                        errors.push(RunError { variant: variant.clone(), seed: Some(*seed), message: reason.clone() });
                    }
                    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                    let _ = writeln!(
                        summary_csv,
                        "{variant},{seed},{},{},{}",
                        fmt(summary.final_metric),
                        fmt(summary.final_gap),
                        fmt(summary.gain)
                    );
                    finals.extend(summary.final_metric);
                    gains.extend(summary.gain);
                    report.runs.push(summary);
                    report.diagnostics.extend(diag_summary);
                }
                Err(e) => errors.push(RunError { variant: variant.clone(), seed: Some(*seed), message: e.to_string() }),
            }
            let _ = writeln!(timing_csv, "{variant},{seed},{:.3}", started.elapsed().as_secs_f64());
        }
        report.variants.push(VariantSummary {
            variant: variant.clone(),
            median_final_metric: median(&finals),
            median_gain: median(&gains),
        });
    }
    if cfg.task == TaskName::ScanAncilla && cfg.scan.as_ref().map(|s| s.base) == Some(BaseTask::Recover) {
        let medians: Vec<f64> = report.variants.iter().filter_map(|v| v.median_final_metric).collect();
        let ms = &cfg.scan.as_ref().expect("validated").m_values;
        if medians.len() == ms.len() {
            report.saturation_point = (0..ms.len())
                .find(|&i| medians[i..].windows(2).all(|w| (w[1] - w[0]).abs() < PLATEAU_TOL))
                .map(|i| ms[i]);
        }
    }
    fs::write(dir.join("summary.csv"), summary_csv)?;
    fs::write(dir.join("timing.csv"), timing_csv)?;
    write_json(&dir.join("summary.json"), &report)?;
    if !errors.is_empty() {
        write_json(&dir.join("errors.json"), &errors)?;
    }
    Ok(RunOutcome { report, errors, output_dir: dir })
}

type RunResult = (RunSummary, TrainingTrace, Option<DiagSummary>);

fn run_one(variant: &str, seed: u64, task: &TaskConfig, diag: bool, cfg: &RunConfig) -> Result<RunResult> {
    let loss = make_loss(task)?;
    let reference = match task {
        TaskConfig::Dvqe(_) => loss.reference_energy().expect("ground-state search has E0"),
        TaskConfig::Recovery(r) => r.input_fidelity()?,
    };
    let c_star = loss.reference_energy().unwrap_or(0.0);
    let mut monitors: Vec<Box<dyn Monitor>> = if diag {
        vec![Box::new(PlMonitor::new(c_star)), Box::new(DescentMonitor::new(task.learning_rate()))]
    } else {
        Vec::new()
    };
    let theta0 = init_params(loss.param_count(), seed);
    let trace = train(&loss, theta0, task.learning_rate(), task.iterations(), &mut monitors)?;
    let gain = match task {
        TaskConfig::Dvqe(_) => trace.final_loss.zip(trace.records.first()).map(|(f, r)| r.loss - f),
        TaskConfig::Recovery(_) => trace.final_metric.map(|f| f - reference),
    };
    let diag_summary = if diag {
        let pl = pl_ratio(&trace, c_star);
        let samples = cfg.diag.as_ref().map(|d| d.init_samples).unwrap_or(16);
        let (mean, var) = task_grad_norm_at_init(task, samples, seed)?;
        let noisy = match task {
            TaskConfig::Dvqe(c) => !c.noise.is_trivial(),
            TaskConfig::Recovery(_) => false,
        };
        Some(DiagSummary {
            variant: variant.to_string(),
            seed,
            pl_min: pl.min,
            pl_median: pl.median,
            descent_fraction: descent_check(&trace, task.learning_rate()),
            init_grad_norm_sq_mean: mean,
            init_grad_norm_sq_variance: var,
            note: noisy.then(|| "gap lower-bounded by E0".to_string()),
        })
    } else {
        None
    };
    let summary = RunSummary {
        variant: variant.to_string(),
        seed,
        final_metric: trace.final_metric,
        final_gap: trace.final_gap,
        gain,
        reference,
        abort: trace.abort.clone(),
    };
    Ok((summary, trace, diag_summary))
}

/// Ground energy of a Pauli-string Hamiltonian file.
pub fn eig_file(path: &Path) -> Result<(usize, f64)> {
    let h: PauliHamiltonian = fs::read_to_string(path)?.parse()?;
    Ok((h.qubit_count(), ground_energy(&h)?.0))
}
