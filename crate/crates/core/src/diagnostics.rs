//! Empirical monitors for optimization behaviour and ancilla resource scans.

use serde::{Deserialize, Serialize};

use crate::engine::{make_loss, run_task, RecoveryConfig, TaskConfig};
use crate::error::{Error, Result};
use crate::optim::{init_params, IterationRecord, Monitor, Objective, TrainingTrace};

pub const DEFAULT_GAP_GUARD: f64 = 1e-12;

/// Median of a finite sample; the mean of the two middle values for even sizes.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let h = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[h] } else { 0.5 * (v[h - 1] + v[h]) })
}

/// `r_t = (|grad C|^2 / 2) / max(C - C*, guard)` along a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlReport {
    pub ratios: Vec<f64>,
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub gap_guard: f64,
}

fn pl_value(grad_norm: f64, loss: f64, c_star: f64, guard: f64) -> f64 {
    0.5 * grad_norm * grad_norm / (loss - c_star).max(guard)
}

pub fn pl_ratio(trace: &TrainingTrace, c_star: f64) -> PlReport {
    pl_ratio_with_guard(trace, c_star, DEFAULT_GAP_GUARD)
}

pub fn pl_ratio_with_guard(trace: &TrainingTrace, c_star: f64, guard: f64) -> PlReport {
    let ratios: Vec<f64> = trace.records.iter().map(|r| pl_value(r.grad_norm, r.loss, c_star, guard)).collect();
    PlReport { min: ratios.iter().copied().reduce(f64::min), median: median(&ratios), ratios, gap_guard: guard }
}

/// Fraction of steps with `C_t - C_{t+1} >= (eta/2) |grad C_t|^2`.
///
/// The last record is compared with the trace's final loss when present.
pub fn descent_check(trace: &TrainingTrace, eta: f64) -> f64 {
    let mut next: Vec<f64> = trace.records.iter().skip(1).map(|r| r.loss).collect();
    if let Some(f) = trace.final_loss {
        next.push(f);
    }
    let steps: Vec<bool> = trace
        .records
        .iter()
        .zip(&next)
        .map(|(r, &after)| r.loss - after >= 0.5 * eta * r.grad_norm * r.grad_norm - 1e-12)
        .collect();
    if steps.is_empty() {
        return 1.0;
    }
    steps.iter().filter(|&&ok| ok).count() as f64 / steps.len() as f64
}

/// Mean and sample variance of `|grad C|^2` over fresh initializations.
pub fn grad_norm_at_init(objective: &dyn Objective, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::InvalidArgument("grad_norm_at_init needs at least 2 samples".into()));
    }
    let mut sq = Vec::with_capacity(samples);
    for i in 0..samples {
        let theta = init_params(objective.param_count(), seed.wrapping_add(i as u64));
        let g = objective.gradient(&theta)?;
        sq.push(g.iter().map(|x| x * x).sum::<f64>());
    }
    let mean = sq.iter().sum::<f64>() / samples as f64;
    let var = sq.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    Ok((mean, var))
}

pub fn task_grad_norm_at_init(task: &TaskConfig, samples: usize, seed: u64) -> Result<(f64, f64)> {
    grad_norm_at_init(&make_loss(task)?, samples, seed)
}

/// Recovery quality as a function of ancilla count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationScan {
    pub m_values: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Fidelity of the untreated noisy input.
    pub input_fidelity: f64,
    /// `per_seed[i][j]`: final fidelity for `m_values[i]`, `seeds[j]`.
    pub per_seed: Vec<Vec<f64>>,
    /// Median over seeds, per m.
    pub final_metrics: Vec<f64>,
    /// `F_m - F_0`.
    pub gains: Vec<f64>,
}

impl SaturationScan {
    /// Smallest m after which successive medians move by less than `tol`.
    pub fn saturation_point(&self, tol: f64) -> Option<usize> {
        (0..self.m_values.len()).find_map(|i| {
            let flat = self.final_metrics[i..].windows(2).all(|w| (w[1] - w[0]).abs() < tol);
            flat.then_some(self.m_values[i])
        })
    }
}

/// One training run per `(m, seed)` pair, in that order.
pub fn ancilla_scan(base: &RecoveryConfig, m_values: &[usize], seeds: &[u64]) -> Result<SaturationScan> {
    ancilla_scan_with(base, m_values, seeds, |_, _, _| {})
}

/// Like [`ancilla_scan`], handing every finished trace to `on_run(m, seed, trace)`.
pub fn ancilla_scan_with<F>(
    base: &RecoveryConfig,
    m_values: &[usize],
    seeds: &[u64],
    mut on_run: F,
) -> Result<SaturationScan>
where
    F: FnMut(usize, u64, &TrainingTrace),
{
    if m_values.is_empty() || m_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("m values must be nonempty and strictly increasing".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("seed list is empty".into()));
    }
    let input_fidelity = base.input_fidelity()?;
    let mut per_seed = Vec::new();
    for &m in m_values {
        let mut row = Vec::new();
        for &seed in seeds {
            let cfg = RecoveryConfig { m, seed, ..base.clone() };
            let trace = run_task(&TaskConfig::Recovery(cfg), &mut [])?;
            on_run(m, seed, &trace);
            let f = trace
                .final_metric
                .ok_or_else(|| Error::Numerical(format!("run m={m} seed={seed} aborted: {:?}", trace.abort)))?;
            row.push(f);
        }
        per_seed.push(row);
    }
    let final_metrics: Vec<f64> = per_seed.iter().map(|r| median(r).unwrap_or(f64::NAN)).collect();
    let gains = final_metrics.iter().map(|f| f - input_fidelity).collect();
    Ok(SaturationScan {
        m_values: m_values.to_vec(),
        seeds: seeds.to_vec(),
        input_fidelity,
        per_seed,
        final_metrics,
        gains,
    })
}

/// Per-iteration PL ratio.
pub struct PlMonitor {
    pub c_star: f64,
    pub guard: f64,
}

impl PlMonitor {
    pub fn new(c_star: f64) -> Self {
        Self { c_star, guard: DEFAULT_GAP_GUARD }
    }
}

impl Monitor for PlMonitor {
    fn name(&self) -> String {
        "pl_ratio".into()
    }

    fn observe(&mut self, r: &IterationRecord) -> f64 {
        pl_value(r.grad_norm, r.loss, self.c_star, self.guard)
    }
}

/// Whether the step that produced this record met the descent bound (1 or 0).
/// The first record reports 1.
pub struct DescentMonitor {
    pub eta: f64,
    prev: Option<(f64, f64)>,
}

impl DescentMonitor {
    pub fn new(eta: f64) -> Self {
        Self { eta, prev: None }
    }
}

impl Monitor for DescentMonitor {
    fn name(&self) -> String {
        "descent_ok".into()
    }

    fn observe(&mut self, r: &IterationRecord) -> f64 {
        let ok = match self.prev {
            Some((loss, g)) => loss - r.loss >= 0.5 * self.eta * g * g - 1e-12,
            None => true,
        };
        self.prev = Some((r.loss, r.grad_norm));
        if ok {
            1.0
        } else {
            0.0
        }
    }
}
