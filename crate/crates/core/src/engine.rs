//! Ground-state search and state recovery pipelines built from system blocks
//! and trainable ancilla-assisted channels.
//!
//! Both tasks compile to a [`Pipeline`]: an input density matrix, a sequence of
//! stages (parameterized blocks, ancilla attachment, ancilla trace-out) and a
//! linear readout. The loss is linear in the final state, so the pipeline can
//! be differentiated exactly by a reverse sweep of dual maps.

use serde::{Deserialize, Serialize};

use crate::channels::{NoiseAction, NoiseLocation, NoiseSite, NoiseSpec};
use crate::circuits::{build_vqe_block, conjugate_gate, DissipativeAnsatz, ParamCircuit};
use crate::error::{Error, Result};
use crate::hamiltonian::{ground_energy, to_dense, Pauli, PauliHamiltonian, PauliMasks};
use crate::optim::{gradient_param_shift, init_params, train, GradientMethod, Monitor, Objective, TrainingTrace};
use crate::qmath::{
    attach_zero_qubits, extend_identity, partial_trace, project_zero_qubits, CMatrix, DropPosition, RegisterShape, C64,
    ZERO,
};
use crate::states::{expectation, fidelity_pure, zero_state, DensityMatrix, PureState};

/// Settings for dissipative ground-state search.
#[derive(Clone, Debug, PartialEq)]
pub struct DvqeConfig {
    pub n: usize,
    pub m: usize,
    pub rounds: usize,
    pub vqe_layers: usize,
    pub hamiltonian: PauliHamiltonian,
    pub noise: NoiseSpec,
    pub ansatz: DissipativeAnsatz,
    pub gradient: GradientMethod,
    pub seed: u64,
    pub learning_rate: f64,
    pub iterations: usize,
}

impl DvqeConfig {
    pub fn new(n: usize, m: usize, rounds: usize, hamiltonian: PauliHamiltonian) -> Self {
        Self {
            n,
            m,
            rounds,
            vqe_layers: 2,
            hamiltonian,
            noise: NoiseSpec::NONE,
            ansatz: DissipativeAnsatz::default(),
            gradient: GradientMethod::default(),
            seed: 1,
            learning_rate: 0.2,
            iterations: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n == 0 {
            problems.push("n must be >= 1".to_string());
        }
        if self.vqe_layers == 0 {
            problems.push("vqe_layers must be >= 1".to_string());
        }
        if self.rounds >= 1 && self.m == 0 {
            problems.push("m = 0 is only allowed with rounds = 0 (ancilla-free baseline)".to_string());
        }
        if self.hamiltonian.qubit_count() != self.n {
            problems.push(format!("Hamiltonian acts on {} qubits, n = {}", self.hamiltonian.qubit_count(), self.n));
        }
        if let Err(e) = self.noise.validate() {
            problems.push(e.to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.n + self.m > 12 {
            problems.push(format!("n + m = {} exceeds 12 qubits", self.n + self.m));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// `2 n L (T + 1)` system parameters plus `T` dissipative blocks.
    pub fn param_count(&self) -> usize {
        2 * self.n * self.vqe_layers * (self.rounds + 1) + self.rounds * self.ansatz.param_count(self.n, self.m)
    }
}

/// Settings for dissipative state recovery.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryConfig {
    pub n: usize,
    pub m: usize,
    pub rounds: usize,
    pub target: PureState,
    /// Applied once to every qubit of the ideal target to form the input.
    pub noise_prep: NoiseSpec,
    /// Applied inside the dissipative blocks.
    pub noise_run: NoiseSpec,
    pub ansatz: DissipativeAnsatz,
    pub gradient: GradientMethod,
    pub seed: u64,
    pub learning_rate: f64,
    pub iterations: usize,
}

impl RecoveryConfig {
    pub fn new(m: usize, rounds: usize, target: PureState, noise_prep: NoiseSpec) -> Self {
        Self {
            n: target.qubit_count(),
            m,
            rounds,
            target,
            noise_prep,
            noise_run: NoiseSpec::NONE,
            ansatz: DissipativeAnsatz::default(),
            gradient: GradientMethod::default(),
            seed: 1,
            learning_rate: 0.8,
            iterations: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.rounds == 0 {
            problems.push("rounds must be >= 1".to_string());
        }
        if self.m == 0 {
            problems.push("m must be >= 1".to_string());
        }
        if self.target.qubit_count() != self.n {
            problems.push(format!("target has {} qubits, n = {}", self.target.qubit_count(), self.n));
        }
        if self.noise_prep.location != NoiseLocation::InputOnly && !self.noise_prep.is_trivial() {
            problems.push("preparation noise must use location input_only".to_string());
        }
        for spec in [&self.noise_prep, &self.noise_run] {
            if let Err(e) = spec.validate() {
                problems.push(e.to_string());
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.n + self.m > 12 {
            problems.push(format!("n + m = {} exceeds 12 qubits", self.n + self.m));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn param_count(&self) -> usize {
        self.rounds * self.ansatz.param_count(self.n, self.m)
    }

    /// Noisy input: the preparation channel applied once to every target qubit.
    pub fn noisy_input(&self) -> Result<DensityMatrix> {
        let mut rho = self.target.projector();
        if let Some(action) = NoiseAction::resolve(&self.noise_prep)? {
            let qubits: Vec<usize> = (0..self.n).collect();
            if self.noise_prep.applies_at(NoiseSite::InputPreparation) {
                action.apply(rho.matrix_mut(), self.n, &qubits, false);
            }
        }
        Ok(rho)
    }

    /// Fidelity of the untreated input with the target.
    pub fn input_fidelity(&self) -> Result<f64> {
        fidelity_pure(&self.noisy_input()?, &self.target)
    }
}

#[derive(Clone, Debug)]
pub enum TaskConfig {
    Dvqe(DvqeConfig),
    Recovery(RecoveryConfig),
}

impl TaskConfig {
    pub fn seed(&self) -> u64 {
        match self {
            TaskConfig::Dvqe(c) => c.seed,
            TaskConfig::Recovery(c) => c.seed,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match self {
            TaskConfig::Dvqe(c) => c.learning_rate,
            TaskConfig::Recovery(c) => c.learning_rate,
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            TaskConfig::Dvqe(c) => c.iterations,
            TaskConfig::Recovery(c) => c.iterations,
        }
    }

    pub fn with_seed(&self, seed: u64) -> TaskConfig {
        let mut out = self.clone();
        match &mut out {
            TaskConfig::Dvqe(c) => c.seed = seed,
            TaskConfig::Recovery(c) => c.seed = seed,
        }
        out
    }
}

#[derive(Clone, Debug)]
enum Stage {
    Block(ParamCircuit),
    /// Append `m` ancillas in `|0>`.
    Attach(usize),
    /// Trace out the trailing `m` ancillas.
    Discard(usize),
}

#[derive(Clone, Debug)]
enum Readout {
    /// `Tr[H rho]`; the dense matrix is the dual observable.
    Energy { hamiltonian: PauliHamiltonian, dense: CMatrix },
    /// `1 - <psi|rho|psi>`.
    Infidelity(PureState),
}

/// Compiled forward map `theta -> loss` of one task.
#[derive(Clone, Debug)]
pub struct Pipeline {
    input: DensityMatrix,
    stages: Vec<Stage>,
    noise: NoiseSpec,
    param_count: usize,
    readout: Readout,
}

/// Which task a trace or loss belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Dvqe,
    Recovery,
}

impl Pipeline {
    /// Blocks `[U_vqe(0) | U_vqe(1) | U_dis(1) | ... | U_vqe(T) | U_dis(T)]`.
    pub fn dvqe(cfg: &DvqeConfig) -> Result<Self> {
        cfg.validate()?;
        let mut stages = Vec::new();
        let mut offset = 0;
        for t in 0..=cfg.rounds {
            let vqe = build_vqe_block(cfg.n, cfg.vqe_layers, offset)?;
            offset += vqe.param_count();
            stages.push(Stage::Block(vqe));
            if t == 0 {
                continue;
            }
            let dis = cfg.ansatz.build(cfg.n, cfg.m, offset)?;
            offset += dis.param_count();
            stages.push(Stage::Attach(cfg.m));
            stages.push(Stage::Block(dis));
            stages.push(Stage::Discard(cfg.m));
        }
        debug_assert_eq!(offset, cfg.param_count());
        let dense = to_dense(&cfg.hamiltonian)?;
        Ok(Self {
            input: zero_state(cfg.n)?,
            stages,
            noise: cfg.noise,
            param_count: offset,
            readout: Readout::Energy { hamiltonian: cfg.hamiltonian.clone(), dense },
        })
    }

    pub fn recovery(cfg: &RecoveryConfig) -> Result<Self> {
        cfg.validate()?;
        let mut stages = Vec::new();
        let mut offset = 0;
        for _ in 0..cfg.rounds {
            let dis = cfg.ansatz.build(cfg.n, cfg.m, offset)?;
            offset += dis.param_count();
            stages.push(Stage::Attach(cfg.m));
            stages.push(Stage::Block(dis));
            stages.push(Stage::Discard(cfg.m));
        }
        Ok(Self {
            input: cfg.noisy_input()?,
            stages,
            noise: cfg.noise_run,
            param_count: offset,
            readout: Readout::Infidelity(cfg.target.clone()),
        })
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn input(&self) -> &DensityMatrix {
        &self.input
    }

    pub fn task(&self) -> TaskKind {
        match self.readout {
            Readout::Energy { .. } => TaskKind::Dvqe,
            Readout::Infidelity(_) => TaskKind::Recovery,
        }
    }

    fn check_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_count {
            return Err(Error::ParameterCount { expected: self.param_count, got: theta.len() });
        }
        Ok(())
    }

    fn noise_for(&self, block: &ParamCircuit) -> Result<Option<NoiseAction>> {
        if self.noise.applies_at(block.role().noise_site()) {
            NoiseAction::resolve(&self.noise)
        } else {
            Ok(None)
        }
    }

    /// Runs the stages; `tape` receives the post-gate, pre-noise state of every rotation.
    fn run(
        &self,
        theta: &[f64],
        mut tape: Option<&mut Vec<CMatrix>>,
        mut snapshots: Option<&mut Vec<DensityMatrix>>,
    ) -> Result<CMatrix> {
        self.check_params(theta)?;
        let mut state = self.input.matrix().clone();
        let mut qubits = self.input.qubit_count();
        for stage in &self.stages {
            match stage {
                Stage::Block(block) => {
                    let local = block.slice(theta);
                    let noise = self.noise_for(block)?;
                    for g in block.gates() {
                        conjugate_gate(&mut state, qubits, g, block.angle(g, local), false);
                        if g.kind.is_rotation() {
                            if let Some(t) = tape.as_deref_mut() {
                                t.push(state.clone());
                            }
                        }
                        if let Some(a) = &noise {
                            a.apply(&mut state, qubits, &g.targets, false);
                        }
                    }
                }
                Stage::Attach(m) => {
                    state = attach_zero_qubits(&state, *m);
                    qubits += m;
                }
                Stage::Discard(m) => {
                    qubits -= m;
                    state = partial_trace(
                        &state,
                        RegisterShape::new(qubits)?,
                        RegisterShape::new(*m)?,
                        DropPosition::Back,
                    )?;
                }
            }
            if let Some(s) = snapshots.as_deref_mut() {
                s.push(DensityMatrix::from_matrix_unchecked(RegisterShape::new(qubits)?, state.clone())?);
            }
        }
        if !state.is_finite() {
            return Err(Error::Numerical("non-finite state after pipeline".into()));
        }
        Ok(state)
    }

    fn read(&self, state: &DensityMatrix) -> Result<f64> {
        match &self.readout {
            Readout::Energy { hamiltonian, .. } => expectation(hamiltonian, state),
            Readout::Infidelity(target) => Ok(1.0 - fidelity_pure(state, target)?),
        }
    }

    /// Loss and final system state.
    pub fn forward(&self, theta: &[f64]) -> Result<(f64, DensityMatrix)> {
        let state = self.run(theta, None, None)?;
        let rho = DensityMatrix::from_matrix_unchecked(self.input.shape(), state)?;
        Ok((self.read(&rho)?, rho))
    }

    pub fn loss(&self, theta: &[f64]) -> Result<f64> {
        self.forward(theta).map(|(l, _)| l)
    }

    /// State after every stage, for invariant checks.
    pub fn trajectory(&self, theta: &[f64]) -> Result<Vec<DensityMatrix>> {
        let mut snaps = vec![self.input.clone()];
        self.run(theta, None, Some(&mut snaps))?;
        Ok(snaps)
    }

    /// Exact gradient by a reverse sweep of dual maps.
    pub fn adjoint_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut tape = Vec::new();
        let state = self.run(theta, Some(&mut tape), None)?;
        let rho = DensityMatrix::from_matrix_unchecked(self.input.shape(), state)?;
        let loss = self.read(&rho)?;

        // Dual observable: d loss / d rho.
        let mut lambda = match &self.readout {
            Readout::Energy { dense, .. } => dense.clone(),
            Readout::Infidelity(target) => CMatrix::outer(target.amplitudes()).scale(C64::new(-1.0, 0.0)),
        };
        let mut qubits = self.input.qubit_count();
        let mut grad = vec![0.0; self.param_count];
        for stage in self.stages.iter().rev() {
            match stage {
                Stage::Discard(m) => {
                    lambda = extend_identity(&lambda, *m);
                    qubits += m;
                }
                Stage::Attach(m) => {
                    lambda = project_zero_qubits(&lambda, *m);
                    qubits -= m;
                }
                Stage::Block(block) => {
                    let local = block.slice(theta);
                    let noise = self.noise_for(block)?;
                    for g in block.gates().iter().rev() {
                        if let Some(a) = &noise {
                            a.apply(&mut lambda, qubits, &g.targets, true);
                        }
                        if let (Some(k), Some(p)) = (g.param_index, g.kind.generator()) {
                            let sigma = tape.pop().expect("tape entry per rotation");
                            let z = commutator_trace(&lambda, &sigma, qubits, g.targets[0], p);
                            grad[block.param_offset() + k] = z.im / 2.0;
                        }
                        conjugate_gate(&mut lambda, qubits, g, block.angle(g, local), true);
                    }
                }
            }
        }
        debug_assert!(tape.is_empty());
        Ok((loss, grad))
    }
}

/// `Tr[[mu, P] sigma]` for a single-qubit Pauli `P` on qubit `q`.
fn commutator_trace(mu: &CMatrix, sigma: &CMatrix, n: usize, q: usize, p: Pauli) -> C64 {
    let mut paulis = vec![Pauli::I; n];
    paulis[q] = p;
    let masks = PauliMasks::new(&paulis);
    let f = masks.flip();
    let d = mu.rows();
    let (mu, sigma) = (mu.data(), sigma.data());
    let mut acc = ZERO;
    for i in 0..d {
        let ph_if = masks.phase(i ^ f);
        for j in 0..d {
            // (mu P)_ij = mu_{i, j^f} ph(j);  (P mu)_ij = ph(i^f) mu_{i^f, j}
            let c = mu[i * d + (j ^ f)] * masks.phase(j) - ph_if * mu[(i ^ f) * d + j];
            acc += c * sigma[j * d + i];
        }
    }
    acc
}

/// Differentiable task loss fed to the optimizer.
#[derive(Clone, Debug)]
pub struct TaskLoss {
    pipeline: Pipeline,
    gradient: GradientMethod,
    /// Exact ground energy for ground-state search.
    reference_energy: Option<f64>,
}

impl TaskLoss {
    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn reference_energy(&self) -> Option<f64> {
        self.reference_energy
    }

    pub fn with_gradient(mut self, gradient: GradientMethod) -> Self {
        self.gradient = gradient;
        self
    }
}

impl Objective for TaskLoss {
    fn param_count(&self) -> usize {
        self.pipeline.param_count
    }

    fn loss(&self, theta: &[f64]) -> Result<f64> {
        self.pipeline.loss(theta)
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.loss_and_gradient(theta).map(|(_, g)| g)
    }

    fn loss_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self.gradient {
            GradientMethod::Adjoint => self.pipeline.adjoint_gradient(theta),
            GradientMethod::ParameterShift => {
                let loss = self.pipeline.loss(theta)?;
                let grad = gradient_param_shift(|t| self.pipeline.loss(t), theta)?;
                Ok((loss, grad))
            }
        }
    }

    fn metrics(&self, loss: f64) -> (f64, f64) {
        match self.reference_energy {
            Some(e0) => (loss, loss - e0),
            None => (1.0 - loss, loss),
        }
    }
}

pub fn dvqe_forward(cfg: &DvqeConfig, theta: &[f64]) -> Result<(f64, DensityMatrix)> {
    Pipeline::dvqe(cfg)?.forward(theta)
}

pub fn recovery_forward(cfg: &RecoveryConfig, theta: &[f64]) -> Result<(f64, DensityMatrix)> {
    Pipeline::recovery(cfg)?.forward(theta)
}

pub fn make_loss(task: &TaskConfig) -> Result<TaskLoss> {
    match task {
        TaskConfig::Dvqe(cfg) => {
            let pipeline = Pipeline::dvqe(cfg)?;
            let (e0, _) = ground_energy(&cfg.hamiltonian)?;
            Ok(TaskLoss { pipeline, gradient: cfg.gradient, reference_energy: Some(e0) })
        }
        TaskConfig::Recovery(cfg) => {
            Ok(TaskLoss { pipeline: Pipeline::recovery(cfg)?, gradient: cfg.gradient, reference_energy: None })
        }
    }
}

/// Seeded initialization followed by gradient descent with the task's settings.
pub fn run_task(task: &TaskConfig, monitors: &mut [Box<dyn Monitor>]) -> Result<TrainingTrace> {
    let loss = make_loss(task)?;
    let theta0 = init_params(loss.param_count(), task.seed());
    train(&loss, theta0, task.learning_rate(), task.iterations(), monitors)
}
