//! Optimizers and the training loop.
//!
//! Full-batch gradient descent is the Euler discretization of the
//! subgradient flow; SGD shuffles the dataset each epoch (without
//! replacement) and Adam uses the standard bias-corrected moment updates.
//! Epoch permutations are derived from `(seed, epoch index)`, not from
//! mutable RNG state, so a checkpoint can resume bit-exactly from any step.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{accumulate_grad, train_loss, Grad, NetParams};
use crate::rng;
use crate::vecops;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OptKind {
    Gd {
        lr: f64,
    },
    Sgd {
        lr: f64,
        batch_size: usize,
    },
    /// Minibatch Adam; defaults follow the usual torch hyperparameters.
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        batch_size: usize,
    },
}

impl OptKind {
    pub fn adam_default(batch_size: usize) -> Self {
        OptKind::Adam {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size,
        }
    }

    pub fn base_lr(&self) -> f64 {
        match self {
            OptKind::Gd { lr } | OptKind::Sgd { lr, .. } | OptKind::Adam { lr, .. } => *lr,
        }
    }

    fn batch_size(&self, n: usize) -> usize {
        match self {
            OptKind::Gd { .. } => n,
            OptKind::Sgd { batch_size, .. } | OptKind::Adam { batch_size, .. } => *batch_size,
        }
    }

    fn shuffles(&self) -> bool {
        !matches!(self, OptKind::Gd { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    Constant,
    /// Multiply the learning rate by `factor` every `every_steps` steps.
    Geometric { factor: f64, every_steps: u64 },
}

impl Schedule {
    pub fn lr_at(&self, base_lr: f64, step: u64) -> f64 {
        match self {
            Schedule::Constant => base_lr,
            Schedule::Geometric { factor, every_steps } => {
                base_lr * factor.powi((step / every_steps) as i32)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub kind: OptKind,
    pub schedule: Schedule,
}

impl OptimizerSpec {
    pub fn gd(lr: f64) -> Self {
        OptimizerSpec {
            kind: OptKind::Gd { lr },
            schedule: Schedule::Constant,
        }
    }

    pub fn sgd(lr: f64, batch_size: usize) -> Self {
        OptimizerSpec {
            kind: OptKind::Sgd { lr, batch_size },
            schedule: Schedule::Constant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match &self.kind {
            OptKind::Gd { lr } => *lr > 0.0,
            OptKind::Sgd { lr, batch_size } => *lr > 0.0 && *batch_size >= 1,
            OptKind::Adam {
                lr,
                beta1,
                beta2,
                eps,
                batch_size,
            } => {
                *lr > 0.0
                    && (0.0..1.0).contains(beta1)
                    && (0.0..1.0).contains(beta2)
                    && *eps > 0.0
                    && *batch_size >= 1
            }
        };
        if !ok {
            return Err(Error::InvalidSpec("optimizer hyperparameters out of range".into()));
        }
        match &self.schedule {
            Schedule::Constant => Ok(()),
            Schedule::Geometric { factor, every_steps } => {
                if *factor > 0.0 && *factor <= 1.0 && *every_steps >= 1 {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec("geometric schedule needs 0 < factor <= 1".into()))
                }
            }
        }
    }
}

/// Stopping rule: hard step cap plus a convergence test over a trailing
/// window (relative loss change and relative parameter change both below
/// tolerance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopSpec {
    pub max_steps: u64,
    pub loss_tol: f64,
    pub param_rel_change_tol: f64,
    pub window_steps: u64,
}

impl StopSpec {
    /// Desk-scale default: the reference budget of 8e6 steps at width 1e4,
    /// scaled by m.
    pub fn default_for_width(m: usize) -> Self {
        let max_steps = ((8.0e6 * m as f64 / 1.0e4) as u64).clamp(10_000, 8_000_000);
        StopSpec {
            max_steps,
            loss_tol: 1e-8,
            param_rel_change_tol: 1e-7,
            window_steps: 10_000,
        }
    }

    pub fn max_steps(max_steps: u64) -> Self {
        StopSpec {
            max_steps,
            ..StopSpec::default_for_width(10_000)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::InvalidSpec("max_steps must be >= 1".into()));
        }
        if self.loss_tol < 0.0 || self.param_rel_change_tol < 0.0 {
            return Err(Error::InvalidSpec("tolerances must be >= 0".into()));
        }
        Ok(())
    }
}

/// Adam moment estimates (empty for plain gradient methods).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OptState {
    Plain,
    Adam {
        t: u64,
        m_a: Vec<f64>,
        v_a: Vec<f64>,
        m_w: Vec<f64>,
        v_w: Vec<f64>,
    },
}

impl OptState {
    pub fn fresh(kind: &OptKind, params: &NetParams) -> OptState {
        match kind {
            OptKind::Adam { .. } => OptState::Adam {
                t: 0,
                m_a: vec![0.0; params.m],
                v_a: vec![0.0; params.m],
                m_w: vec![0.0; params.m * params.d],
                v_w: vec![0.0; params.m * params.d],
            },
            _ => OptState::Plain,
        }
    }
}

/// One optimizer step on the given batch; pure variant of the in-place core.
pub fn step(
    params: &NetParams,
    opt_state: &OptState,
    kind: &OptKind,
    lr: f64,
    dataset: &Dataset,
    batch: &[usize],
) -> Result<(NetParams, OptState)> {
    let mut p = params.clone();
    let mut s = opt_state.clone();
    let mut g = Grad {
        a: vec![0.0; p.m],
        w: vec![0.0; p.m * p.d],
    };
    let mut z = vec![0.0; p.m];
    step_in_place(&mut p, &mut s, kind, lr, dataset, batch, &mut g, &mut z, 0)?;
    Ok((p, s))
}

#[allow(clippy::too_many_arguments)]
fn step_in_place(
    params: &mut NetParams,
    opt_state: &mut OptState,
    kind: &OptKind,
    lr: f64,
    dataset: &Dataset,
    batch: &[usize],
    g: &mut Grad,
    z: &mut [f64],
    step_idx: u64,
) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    g.a.fill(0.0);
    g.w.fill(0.0);
    accumulate_grad(params, dataset, batch, g, z);
    if !g.a.iter().chain(g.w.iter()).all(|v| v.is_finite()) {
        return Err(Error::NonFiniteGradient { step: step_idx });
    }
    match (kind, opt_state) {
        (OptKind::Adam { beta1, beta2, eps, .. }, OptState::Adam { t, m_a, v_a, m_w, v_w }) => {
            *t += 1;
            let bc1 = 1.0 - beta1.powi(*t as i32);
            let bc2 = 1.0 - beta2.powi(*t as i32);
            adam_update(&mut params.a, &g.a, m_a, v_a, *beta1, *beta2, *eps, lr, bc1, bc2);
            adam_update(&mut params.w, &g.w, m_w, v_w, *beta1, *beta2, *eps, lr, bc1, bc2);
        }
        _ => {
            vecops::axpy(-lr, &g.a, &mut params.a);
            vecops::axpy(-lr, &g.w, &mut params.w);
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    bias1: f64,
    bias2: f64,
) {
    for i in 0..p.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        let mhat = m[i] / bias1;
        let vhat = v[i] / bias2;
        p[i] -= lr * mhat / (vhat.sqrt() + eps);
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Metrics are recorded every this many steps (plus step 0 and the
    /// final step).
    pub interval: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { interval: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub step: u64,
    pub lr: f64,
    pub train_loss: f64,
    pub sign_flips: usize,
    pub balancedness_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxSteps,
    Converged,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetParams,
    pub opt_state: OptState,
    pub steps: u64,
    pub stop_reason: StopReason,
    pub trajectory: Vec<ProbeRecord>,
    pub final_loss: f64,
    /// Largest sign-flip count seen at any probe (0 under dominated init).
    pub max_sign_flips: usize,
    pub seed: u64,
}

/// Train from fresh parameters. Deterministic in `(inputs, seed)`.
pub fn train(
    params: NetParams,
    dataset: &Dataset,
    opt: &OptimizerSpec,
    stop: &StopSpec,
    probes: &ProbeConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    run_loop(params, OptState::Plain, 0, dataset, opt, stop, probes, seed)
}

/// Continue a checkpointed run; together with derived epoch permutations
/// this reproduces the uninterrupted run bit for bit.
pub fn resume(
    ckpt: Checkpoint,
    dataset: &Dataset,
    opt: &OptimizerSpec,
    stop: &StopSpec,
    probes: &ProbeConfig,
) -> Result<TrainOutcome> {
    if ckpt.params.d != dataset.d {
        return Err(Error::IncompatibleCheckpoint(format!(
            "checkpoint d={} but dataset d={}",
            ckpt.params.d, dataset.d
        )));
    }
    run_loop(
        ckpt.params,
        ckpt.opt_state,
        ckpt.step,
        dataset,
        opt,
        stop,
        probes,
        ckpt.seed,
    )
}

#[allow(clippy::too_many_arguments)]
fn run_loop(
    params: NetParams,
    opt_state: OptState,
    start_step: u64,
    dataset: &Dataset,
    opt: &OptimizerSpec,
    stop: &StopSpec,
    probes: &ProbeConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    opt.validate()?;
    stop.validate()?;
    if dataset.d != params.d {
        return Err(Error::DimensionMismatch {
            context: "train dataset",
            expected: params.d,
            got: dataset.d,
        });
    }
    let n = dataset.n;
    let batch_size = opt.kind.batch_size(n).min(n);
    let batches_per_epoch = n.div_ceil(batch_size) as u64;
    let base_lr = opt.kind.base_lr();

    let mut params = params;
    let mut opt_state = if matches!(opt_state, OptState::Plain) {
        OptState::fresh(&opt.kind, &params)
    } else {
        opt_state
    };
    let reference = params.clone();

    let mut g = Grad {
        a: vec![0.0; params.m],
        w: vec![0.0; params.m * params.d],
    };
    let mut z = vec![0.0; params.m];
    let mut perm: Vec<usize> = (0..n).collect();
    let mut current_epoch = u64::MAX;

    let initial_loss = train_loss(&params, dataset)?;
    let divergence_bound = 1e6 * initial_loss.max(1e-12);

    let mut trajectory = Vec::new();
    let mut max_sign_flips = 0usize;
    let record = |step: u64,
                      lr: f64,
                      params: &NetParams,
                      trajectory: &mut Vec<ProbeRecord>,
                      max_sign_flips: &mut usize|
     -> Result<f64> {
        let loss = train_loss(params, dataset)?;
        let flips = params.sign_flips(&reference);
        *max_sign_flips = (*max_sign_flips).max(flips);
        trajectory.push(ProbeRecord {
            step,
            lr,
            train_loss: loss,
            sign_flips: flips,
            balancedness_gap: params.balancedness_gap(&reference)?,
        });
        Ok(loss)
    };

    let mut anchor_step = start_step;
    let mut anchor_loss = record(
        start_step,
        opt.schedule.lr_at(base_lr, start_step),
        &params,
        &mut trajectory,
        &mut max_sign_flips,
    )?;
    let mut anchor_params = params.clone();

    let mut step_idx = start_step;
    let stop_reason = loop {
        if step_idx >= stop.max_steps {
            break StopReason::MaxSteps;
        }
        // Assemble the batch for this step.
        let batch: &[usize] = if opt.kind.shuffles() {
            let epoch = step_idx / batches_per_epoch;
            if epoch != current_epoch {
                perm = (0..n).collect();
                if n > 1 {
                    let mut erng = rng::stream(seed, &format!("epoch/{epoch}"));
                    perm.shuffle(&mut erng);
                }
                current_epoch = epoch;
            }
            let pos = (step_idx % batches_per_epoch) as usize;
            let lo = pos * batch_size;
            let hi = (lo + batch_size).min(n);
            &perm[lo..hi]
        } else {
            &perm
        };

        let lr = opt.schedule.lr_at(base_lr, step_idx);
        step_in_place(&mut params, &mut opt_state, &opt.kind, lr, dataset, batch, &mut g, &mut z, step_idx)?;
        step_idx += 1;

        if step_idx % probes.interval == 0 || step_idx == stop.max_steps {
            let loss = record(step_idx, lr, &params, &mut trajectory, &mut max_sign_flips)?;
            if !loss.is_finite() || loss > divergence_bound {
                return Err(Error::Divergence {
                    step: step_idx,
                    loss,
                    bound: divergence_bound,
                });
            }
            if step_idx - anchor_step >= stop.window_steps {
                let loss_rel = (loss - anchor_loss).abs() / anchor_loss.abs().max(1e-300);
                let mut diff2 = 0.0;
                let mut norm2 = 0.0;
                for (now, then) in params
                    .a
                    .iter()
                    .chain(params.w.iter())
                    .zip(anchor_params.a.iter().chain(anchor_params.w.iter()))
                {
                    diff2 += (now - then) * (now - then);
                    norm2 += then * then;
                }
                let param_rel = diff2.sqrt() / norm2.sqrt().max(1e-300);
                if loss_rel <= stop.loss_tol && param_rel <= stop.param_rel_change_tol {
                    break StopReason::Converged;
                }
                anchor_step = step_idx;
                anchor_loss = loss;
                anchor_params.a.copy_from_slice(&params.a);
                anchor_params.w.copy_from_slice(&params.w);
            }
        }
    };

    // Make sure the last step is probed exactly once.
    if trajectory.last().map(|p| p.step) != Some(step_idx) {
        record(
            step_idx,
            opt.schedule.lr_at(base_lr, step_idx.saturating_sub(1)),
            &params,
            &mut trajectory,
            &mut max_sign_flips,
        )?;
    }
    let final_loss = trajectory.last().unwrap().train_loss;

    Ok(TrainOutcome {
        params,
        opt_state,
        steps: step_idx,
        stop_reason,
        trajectory,
        final_loss,
        max_sign_flips,
        seed,
    })
}

/// Write a trajectory as `step,lr,train_loss,sign_flips,balancedness_gap`.
pub fn write_trajectory_csv<W: Write>(mut w: W, trajectory: &[ProbeRecord]) -> Result<()> {
    writeln!(w, "step,lr,train_loss,sign_flips,balancedness_gap")?;
    for p in trajectory {
        writeln!(
            w,
            "{},{},{},{},{}",
            p.step, p.lr, p.train_loss, p.sign_flips, p.balancedness_gap
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: u64,
    pub seed: u64,
    pub config_fingerprint: String,
    pub params: NetParams,
    pub opt_state: OptState,
}

impl Checkpoint {
    pub fn from_outcome(outcome: &TrainOutcome, config_fingerprint: &str) -> Checkpoint {
        Checkpoint {
            step: outcome.steps,
            seed: outcome.seed,
            config_fingerprint: config_fingerprint.to_string(),
            params: outcome.params.clone(),
            opt_state: outcome.opt_state.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile<'a> {
    version: u32,
    checksum: String,
    #[serde(borrow)]
    payload: std::borrow::Cow<'a, str>,
}

/// Save as JSON with a SHA-256 checksum over the payload text.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let payload = serde_json::to_string(ckpt)?;
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        checksum: rng::sha256_hex(payload.as_bytes()),
        payload: std::borrow::Cow::Owned(payload),
    };
    let mut f = std::fs::File::create(path)?;
    f.write_all(serde_json::to_string(&file)?.as_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut text = String::new();
    std::fs::File::open(path)?.read_to_string(&mut text)?;
    let file: CheckpointFile = serde_json::from_str(&text)?;
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            expected: CHECKPOINT_VERSION,
            found: file.version,
        });
    }
    if rng::sha256_hex(file.payload.as_bytes()) != file.checksum {
        return Err(Error::ChecksumMismatch);
    }
    Ok(serde_json::from_str(&file.payload)?)
}
