//! Gradients and plain gradient-descent training.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar loss over a flat parameter vector.
pub trait Objective {
    fn param_count(&self) -> usize;

    fn loss(&self, theta: &[f64]) -> Result<f64>;

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>>;

    fn loss_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.loss(theta)?, self.gradient(theta)?))
    }

    /// `(metric, gap)` reported alongside a loss value. Defaults to the loss itself.
    fn metrics(&self, loss: f64) -> (f64, f64) {
        (loss, loss)
    }
}

/// Objective assembled from closures; handy for analytic fixtures.
pub struct FnObjective<L, G> {
    pub param_count: usize,
    pub loss: L,
    pub gradient: G,
}

impl<L, G> Objective for FnObjective<L, G>
where
    L: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn param_count(&self) -> usize {
        self.param_count
    }

    fn loss(&self, theta: &[f64]) -> Result<f64> {
        Ok((self.loss)(theta))
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok((self.gradient)(theta))
    }
}

/// How a pipeline loss is differentiated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    /// Two shifted evaluations per parameter.
    ParameterShift,
    /// One forward and one reverse sweep through the superoperator sequence.
    #[default]
    Adjoint,
}

/// Parameters drawn i.i.d. uniform on `[-pi, pi)` from a seeded ChaCha stream.
pub fn init_params(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen_range(-PI..PI)).collect()
}

/// `dC/dtheta_k = [C(theta + pi/2 e_k) - C(theta - pi/2 e_k)] / 2`.
///
/// Exact when every parameter enters through a single Pauli rotation and the
/// loss is linear in the evolved state.
pub fn gradient_param_shift<F>(loss: F, theta: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut shifted = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for k in 0..theta.len() {
        shifted[k] = theta[k] + FRAC_PI_2;
        let plus = loss(&shifted)?;
        shifted[k] = theta[k] - FRAC_PI_2;
        let minus = loss(&shifted)?;
        shifted[k] = theta[k];
        grad.push((plus - minus) / 2.0);
    }
    Ok(grad)
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One row of a training trace, evaluated at the parameters before the update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Number of updates applied so far.
    pub iteration: usize,
    pub loss: f64,
    /// Energy (ground-state search) or fidelity (recovery).
    pub metric: f64,
    /// Gap to the reference energy, or infidelity.
    pub gap: f64,
    pub grad_norm: f64,
    pub monitors: Vec<f64>,
}

/// Per-iteration observer evaluated during [`train`].
pub trait Monitor {
    fn name(&self) -> String;
    fn observe(&mut self, record: &IterationRecord) -> f64;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub learning_rate: f64,
    pub monitor_names: Vec<String>,
    pub records: Vec<IterationRecord>,
    /// Parameters after the last completed update.
    pub final_params: Vec<f64>,
    /// Loss at `final_params`; absent when the run aborted.
    pub final_loss: Option<f64>,
    pub final_metric: Option<f64>,
    pub final_gap: Option<f64>,
    /// Reason for an early stop on non-finite values.
    pub abort: Option<String>,
}

impl TrainingTrace {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn grad_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.grad_norm).collect()
    }
}

/// Fixed-step gradient descent `theta <- theta - eta * grad C(theta)`.
pub fn train(
    objective: &dyn Objective,
    theta0: Vec<f64>,
    learning_rate: f64,
    iterations: usize,
    monitors: &mut [Box<dyn Monitor>],
) -> Result<TrainingTrace> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("training needs at least one iteration".into()));
    }
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate {learning_rate} must be > 0")));
    }
    if theta0.len() != objective.param_count() {
        return Err(Error::ParameterCount { expected: objective.param_count(), got: theta0.len() });
    }
    let mut trace = TrainingTrace {
        learning_rate,
        monitor_names: monitors.iter().map(|m| m.name()).collect(),
        records: Vec::with_capacity(iterations),
        final_params: theta0.clone(),
        final_loss: None,
        final_metric: None,
        final_gap: None,
        abort: None,
    };
    let mut theta = theta0;
    for it in 0..iterations {
        let (loss, grad) = objective.loss_and_gradient(&theta)?;
        let grad_norm = l2_norm(&grad);
        if !loss.is_finite() || !grad_norm.is_finite() {
            trace.abort = Some(format!("non-finite value at iteration {it}: loss {loss}, gradient norm {grad_norm}"));
            return Ok(trace);
        }
        let (metric, gap) = objective.metrics(loss);
        let mut record = IterationRecord { iteration: it, loss, metric, gap, grad_norm, monitors: Vec::new() };
        record.monitors = monitors.iter_mut().map(|m| m.observe(&record)).collect();
        trace.records.push(record);
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= learning_rate * g;
        }
        trace.final_params.clone_from(&theta);
    }
    let loss = objective.loss(&theta)?;
    if loss.is_finite() {
        let (metric, gap) = objective.metrics(loss);
        trace.final_loss = Some(loss);
        trace.final_metric = Some(metric);
        trace.final_gap = Some(gap);
    } else {
        trace.abort = Some(format!("non-finite final loss {loss}"));
    }
    Ok(trace)
}
