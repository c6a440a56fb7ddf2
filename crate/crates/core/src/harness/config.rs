//! Experiment configuration and per-run records.

use serde::{Deserialize, Serialize};

use crate::data::{InputSpec, TeacherSpec};
use crate::error::{Error, Result};
use crate::network::{Activation, InitSpec, VarianceRule};
use crate::optim::{OptKind, OptimizerSpec, Schedule, StopSpec};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Single,
    Sweep,
    Stability,
    Concentration,
    Extremal,
    AlignProbe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub data: InputSpec,
    pub teacher: TeacherSpec,
    pub init: InitSpec,
    pub activation: Activation,
    pub optimizer: OptimizerSpec,
    pub stop: StopSpec,
    /// Sample sizes, ascending. Single-run kinds use exactly one value.
    pub n_values: Vec<usize>,
    /// Master seeds; every per-run stream is derived from these.
    pub seeds: Vec<u64>,
    pub m: usize,
    pub probe_interval: u64,
    pub n_test: usize,
    /// Worker threads for sweeps (0 = one per run, capped by CPUs). The
    /// ALIGNLAB_WORKERS environment variable overrides this.
    pub workers: usize,
    /// Sampling budget for concentration measurements.
    pub sup_budget: usize,
    /// Use exact cell enumeration in concentration runs (needs d <= 4,
    /// n <= 64).
    pub concentration_exact: bool,
    /// Random starts per seed for extremal searches (the directions
    /// +-beta*/|beta*| are always added).
    pub extremal_starts: usize,
    pub extremal_max_iter: usize,
    /// Epsilon in the alignment time tau = eps ln(1/lambda)/|Sigma beta*|.
    pub align_epsilon: f64,
}

impl Default for ExperimentConfig {
    /// The scaled main-experiment setup: d=5, m=1000, sigma^2=0.09,
    /// standard Gaussian inputs, Gaussian init of variance 1e-5/m, SGD with
    /// batch 32 and lr 0.01.
    fn default() -> Self {
        let d = 5;
        let mut beta_star = vec![0.0; d];
        beta_star[0] = 1.0;
        ExperimentConfig {
            kind: ExperimentKind::Sweep,
            data: InputSpec::StandardGaussian { d },
            teacher: TeacherSpec::linear(beta_star, 0.3),
            init: InitSpec::GaussianIid {
                variance_rule: VarianceRule::OverM,
                base_variance: 1e-5,
            },
            activation: Activation::Relu,
            optimizer: OptimizerSpec::sgd(0.01, 32),
            stop: StopSpec::default_for_width(1000),
            n_values: vec![500, 5000],
            seeds: vec![1, 2, 3],
            m: 1000,
            probe_interval: 2000,
            n_test: 100_000,
            workers: 0,
            sup_budget: 4096,
            concentration_exact: false,
            extremal_starts: 64,
            extremal_max_iter: 100,
            align_epsilon: 0.2,
        }
    }
}

impl ExperimentConfig {
    pub fn d(&self) -> usize {
        self.data.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.teacher.validate()?;
        self.init.validate()?;
        self.optimizer.validate()?;
        self.stop.validate()?;
        if self.teacher.dim() != self.d() {
            return Err(Error::DimensionMismatch {
                context: "config teacher vs data",
                expected: self.d(),
                got: self.teacher.dim(),
            });
        }
        if self.m == 0 {
            return Err(Error::InvalidSpec("m must be >= 1".into()));
        }
        if self.n_values.is_empty() {
            return Err(Error::Empty("n_values"));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec("n_values must be strictly ascending".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Empty("seeds"));
        }
        if self.probe_interval == 0 {
            return Err(Error::InvalidSpec("probe_interval must be >= 1".into()));
        }
        match self.kind {
            ExperimentKind::Single | ExperimentKind::Stability | ExperimentKind::AlignProbe => {
                if self.n_values.len() != 1 {
                    return Err(Error::InvalidSpec(format!(
                        "{:?} runs use exactly one n value",
                        self.kind
                    )));
                }
            }
            _ => {}
        }
        if self.kind == ExperimentKind::Stability
            && !matches!(self.optimizer.schedule, Schedule::Geometric { .. })
        {
            return Err(Error::InvalidSpec(
                "stability runs need a geometric learning-rate schedule".into(),
            ));
        }
        if self.kind == ExperimentKind::AlignProbe {
            if !matches!(self.init, InitSpec::Dominated { .. }) {
                return Err(Error::InvalidSpec("alignment probes use the dominated init".into()));
            }
            if !matches!(self.optimizer.kind, OptKind::Gd { .. }) {
                return Err(Error::InvalidSpec(
                    "alignment probes use full-batch gradient descent".into(),
                ));
            }
        }
        Ok(())
    }

    /// Stable digest of the full configuration.
    pub fn fingerprint(&self) -> String {
        rng::sha256_hex(
            serde_json::to_string(self)
                .expect("config serializes")
                .as_bytes(),
        )
    }

    /// Effective worker count: environment override, then the config value,
    /// then one per run capped by available parallelism.
    pub fn effective_workers(&self, runs: usize) -> usize {
        let cpus = std::thread::available_parallelism().map_or(1, |v| v.get());
        if let Ok(v) = std::env::var("ALIGNLAB_WORKERS") {
            if let Ok(k) = v.trim().parse::<usize>() {
                if k >= 1 {
                    return k;
                }
            }
        }
        if self.workers >= 1 {
            self.workers
        } else {
            runs.clamp(1, cpus)
        }
    }
}

/// Final metrics of one trained run (the analysis CSV columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub steps: u64,
    pub sigma2: f64,
    pub train_loss_half: f64,
    pub train_mse: f64,
    pub test_loss_half: Option<f64>,
    pub test_mse: Option<f64>,
    pub excess_risk: Option<f64>,
    /// Plain-MSE train loss of the full OLS estimator (reference line).
    pub ols_train_loss: f64,
    pub ols_test_mse: Option<f64>,
    /// |beta_+ - beta_-| of the sign-split OLS pair.
    pub split_ols_gap: Option<f64>,
    pub frac_cos_above_0_9: f64,
    pub effective_width: usize,
    pub interpolated: bool,
    /// Relative L2(mu_X) distance between the network and the limit
    /// predictor built from the sign-split OLS pair.
    pub l2_rel_to_limit: Option<f64>,
    pub sign_flips: usize,
    pub balancedness_gap: f64,
}

/// One row of a sweep: configuration fingerprint, run coordinates, status
/// and metrics. Wall-clock time is informational and deliberately kept out
/// of the deterministic CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_fingerprint: String,
    pub kind: ExperimentKind,
    pub n: usize,
    pub seed: u64,
    pub d: usize,
    pub m: usize,
    pub status: String,
    pub metrics: Option<RunMetrics>,
    pub trajectory_path: Option<String>,
    pub wall_clock_s: f64,
}

pub const SWEEP_CSV_SCHEMA_VERSION: u32 = 1;

pub fn sweep_csv_header() -> String {
    [
        "schema_version",
        "kind",
        "n",
        "seed",
        "d",
        "m",
        "status",
        "steps",
        "sigma2",
        "train_loss_half",
        "train_mse",
        "test_loss_half",
        "test_mse",
        "excess_risk",
        "ols_train_loss",
        "ols_test_mse",
        "split_ols_gap",
        "frac_cos_above_0.9",
        "effective_width",
        "interpolated",
        "l2_rel_to_limit",
        "sign_flips",
        "balancedness_gap",
    ]
    .join(",")
}

fn opt(v: &Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

pub fn sweep_csv_row(r: &RunRecord) -> String {
    let kind = match r.kind {
        ExperimentKind::Single => "single",
        ExperimentKind::Sweep => "sweep",
        ExperimentKind::Stability => "stability",
        ExperimentKind::Concentration => "concentration",
        ExperimentKind::Extremal => "extremal",
        ExperimentKind::AlignProbe => "align_probe",
    };
    match &r.metrics {
        Some(m) => format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            SWEEP_CSV_SCHEMA_VERSION,
            kind,
            r.n,
            r.seed,
            r.d,
            r.m,
            r.status,
            m.steps,
            m.sigma2,
            m.train_loss_half,
            m.train_mse,
            opt(&m.test_loss_half),
            opt(&m.test_mse),
            opt(&m.excess_risk),
            m.ols_train_loss,
            opt(&m.ols_test_mse),
            opt(&m.split_ols_gap),
            m.frac_cos_above_0_9,
            m.effective_width,
            m.interpolated,
            opt(&m.l2_rel_to_limit),
            m.sign_flips,
            m.balancedness_gap,
        ),
        None => format!(
            "{},{},{},{},{},{},{},,,,,,,,,,,,,,,,",
            SWEEP_CSV_SCHEMA_VERSION, kind, r.n, r.seed, r.d, r.m, r.status
        ),
    }
}
