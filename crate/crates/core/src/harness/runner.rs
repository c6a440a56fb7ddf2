//! Experiment drivers: single runs, sweeps over (n, seed), warm-restart
//! stability runs, concentration measurements, extremal searches and
//! alignment probes.
//!
//! Sweeps execute runs concurrently; each run is single-threaded and fully
//! seed-derived, and rows are emitted in (n, seed) order, so output bytes do
//! not depend on the worker count.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    cosine_histogram, effective_width, interpolation_check, l2_relative_gap, ols_dataset,
    ols_split, test_metrics, LimitPredictor, Predictor, INTERPOLATION_TOL,
};
use crate::data::{gen_dataset, Dataset, TeacherKind};
use crate::error::{Error, Result};
use crate::geometry::{
    alignment_probe, alignment_time, certify_extremal, find_extremal, sup_deviation,
    ExtremalCandidate, SupMode, Verdict, CERTIFY_TOL,
};
use crate::network::{activation_pattern, init, InitSpec, NetParams, PATTERN_ZETA};
use crate::optim::{
    load_checkpoint, train, write_trajectory_csv, Checkpoint, ProbeConfig, Schedule, StopSpec,
    TrainOutcome,
};
use crate::rng::derive_seed;
use crate::vecops::{ls_slope, median, norm2, normalize};

use super::config::{sweep_csv_header, sweep_csv_row, ExperimentConfig, RunMetrics, RunRecord};

/// Everything produced by one training run, for callers that want more than
/// the CSV row.
#[derive(Debug, Clone)]
pub struct SingleRun {
    pub record: RunRecord,
    pub outcome: Option<TrainOutcome>,
    pub dataset: Dataset,
    pub limit: Option<LimitPredictor>,
}

/// Generate data, train, analyze. All randomness is derived from
/// `(master_seed, purpose)` tags.
pub fn run_single(
    cfg: &ExperimentConfig,
    n: usize,
    master_seed: u64,
    out_dir: Option<&Path>,
) -> Result<SingleRun> {
    let started = Instant::now();
    let dataset = gen_dataset(&cfg.data, &cfg.teacher, n, derive_seed(master_seed, "data"))?;
    let params = init(
        &cfg.init,
        cfg.m,
        cfg.d(),
        cfg.activation,
        derive_seed(master_seed, "init"),
    )?;
    let probes = ProbeConfig {
        interval: cfg.probe_interval,
    };
    let fingerprint = cfg.fingerprint();

    let mut record = RunRecord {
        config_fingerprint: fingerprint,
        kind: cfg.kind,
        n,
        seed: master_seed,
        d: cfg.d(),
        m: cfg.m,
        status: "ok".into(),
        metrics: None,
        trajectory_path: None,
        wall_clock_s: 0.0,
    };

    let outcome = match train(
        params,
        &dataset,
        &cfg.optimizer,
        &cfg.stop,
        &probes,
        derive_seed(master_seed, "train"),
    ) {
        Ok(o) => o,
        Err(e) => {
            record.status = format!("error: {e}");
            record.wall_clock_s = started.elapsed().as_secs_f64();
            return Ok(SingleRun {
                record,
                outcome: None,
                dataset,
                limit: None,
            });
        }
    };

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("trajectory_n{n}_seed{master_seed}.csv"));
        let f = std::fs::File::create(&path)?;
        write_trajectory_csv(std::io::BufWriter::new(f), &outcome.trajectory)?;
        record.trajectory_path = Some(path.to_string_lossy().into_owned());
    }

    let (metrics, limit) = analyze_outcome(cfg, &dataset, &outcome, master_seed)?;
    record.metrics = Some(metrics);
    record.wall_clock_s = started.elapsed().as_secs_f64();
    Ok(SingleRun {
        record,
        outcome: Some(outcome),
        dataset,
        limit,
    })
}

/// Analysis columns for a trained network on its dataset.
pub fn analyze_outcome(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
    outcome: &TrainOutcome,
    master_seed: u64,
) -> Result<(RunMetrics, Option<LimitPredictor>)> {
    let test_seed = derive_seed(master_seed, "test");
    let net = &outcome.params;
    let full_ols = ols_dataset(dataset)?;

    // Sign split along beta* for a linear teacher, along the OLS direction
    // otherwise.
    let beta_ref: Vec<f64> = match &dataset.teacher.kind {
        TeacherKind::Linear { beta_star } if norm2(beta_star) > 0.0 => beta_star.clone(),
        _ => full_ols.beta.clone(),
    };
    let split = ols_split(dataset, &beta_ref).ok();
    let limit = split
        .as_ref()
        .map(|(p, m)| LimitPredictor::from_split(p, m));
    let split_ols_gap = split.as_ref().map(|(p, m)| {
        p.beta
            .iter()
            .zip(m.beta.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    });

    let sampleable = dataset.input_spec.is_symmetric_continuous();
    let (test_loss_half, test_mse, excess_risk, ols_test_mse, l2_rel_to_limit) = if sampleable {
        let tm = test_metrics(
            Predictor::Net(net),
            &dataset.input_spec,
            &dataset.teacher,
            cfg.n_test,
            test_seed,
        )?;
        let ols_tm = test_metrics(
            Predictor::LinearBeta(&full_ols.beta),
            &dataset.input_spec,
            &dataset.teacher,
            cfg.n_test,
            test_seed,
        )?;
        let gap = match &limit {
            Some(lp) => Some(l2_relative_gap(
                Predictor::Net(net),
                Predictor::Limit(lp),
                &dataset.input_spec,
                &dataset.teacher,
                cfg.n_test,
                test_seed,
            )?),
            None => None,
        };
        (
            Some(tm.test_loss_half),
            Some(tm.test_mse),
            Some(tm.excess_risk),
            Some(ols_tm.test_mse),
            gap,
        )
    } else {
        (None, None, None, None, None)
    };

    let hist = cosine_histogram(net, &full_ols.beta, 20)?;
    let last = outcome.trajectory.last().expect("trajectory never empty");

    Ok((
        RunMetrics {
            steps: outcome.steps,
            sigma2: dataset.sigma2(),
            train_loss_half: outcome.final_loss,
            train_mse: 2.0 * outcome.final_loss,
            test_loss_half,
            test_mse,
            excess_risk,
            ols_train_loss: full_ols.residual_mse,
            ols_test_mse,
            split_ols_gap,
            frac_cos_above_0_9: hist.fraction_above(0.9),
            effective_width: effective_width(net, 0.95),
            interpolated: interpolation_check(net, dataset, INTERPOLATION_TOL)?,
            l2_rel_to_limit,
            sign_flips: outcome.max_sign_flips,
            balancedness_gap: last.balancedness_gap,
        },
        limit,
    ))
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct SweepResult {
    /// In (n, seed) order regardless of scheduling.
    pub runs: Vec<SingleRun>,
    pub csv: String,
}

pub fn run_sweep(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<SweepResult> {
    cfg.validate()?;
    let mut pairs = Vec::new();
    for &n in &cfg.n_values {
        for &seed in &cfg.seeds {
            pairs.push((n, seed));
        }
    }
    let workers = cfg.effective_workers(pairs.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidSpec(format!("worker pool: {e}")))?;
    let runs: Vec<Result<SingleRun>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(n, seed)| run_single(cfg, n, seed, out_dir))
            .collect()
    });
    let mut out = Vec::with_capacity(runs.len());
    for r in runs {
        out.push(r?);
    }

    let mut csv = String::new();
    csv.push_str(&sweep_csv_header());
    csv.push('\n');
    for run in &out {
        csv.push_str(&sweep_csv_row(&run.record));
        csv.push('\n');
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep.csv"), &csv)?;
        let mut jl = String::new();
        for run in &out {
            jl.push_str(&serde_json::to_string(&run.record)?);
            jl.push('\n');
        }
        std::fs::write(dir.join("runs.jsonl"), jl)?;
    }
    Ok(SweepResult { runs: out, csv })
}

// ---------------------------------------------------------------------------
// Stability (warm restart with decaying learning rate)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityResult {
    pub restart_train_mse: f64,
    pub final_train_mse: f64,
    pub relative_change: f64,
    pub steps: u64,
    pub final_lr: f64,
}

/// Continue from a checkpoint with the configured geometric schedule until
/// the learning rate falls below 1e-8 of its restart value.
pub fn run_stability(
    cfg: &ExperimentConfig,
    checkpoint_path: &Path,
    out_dir: Option<&Path>,
) -> Result<StabilityResult> {
    cfg.validate()?;
    let ckpt = load_checkpoint(checkpoint_path)?;
    run_stability_from(cfg, ckpt, out_dir)
}

pub fn run_stability_from(
    cfg: &ExperimentConfig,
    ckpt: Checkpoint,
    out_dir: Option<&Path>,
) -> Result<StabilityResult> {
    let n = cfg.n_values[0];
    let dataset = gen_dataset(&cfg.data, &cfg.teacher, n, derive_seed(ckpt.seed, "data"))?;
    if ckpt.params.d != dataset.d || ckpt.params.m != cfg.m {
        return Err(Error::IncompatibleCheckpoint(format!(
            "checkpoint (m={}, d={}) vs config (m={}, d={})",
            ckpt.params.m, ckpt.params.d, cfg.m, cfg.d()
        )));
    }
    let (factor, every) = match cfg.optimizer.schedule {
        Schedule::Geometric { factor, every_steps } => (factor, every_steps),
        Schedule::Constant => unreachable!("validated"),
    };
    // Steps until factor^k < 1e-8.
    let decays = ((-8.0 * std::f64::consts::LN_10) / factor.ln()).ceil() as u64 + 1;
    let max_steps = decays * every;
    let stop = StopSpec {
        max_steps,
        loss_tol: 0.0,
        param_rel_change_tol: 0.0,
        window_steps: u64::MAX,
    };

    // Warm restart: a fresh run initialized at the checkpointed parameters.
    let outcome = train(
        ckpt.params,
        &dataset,
        &cfg.optimizer,
        &stop,
        &ProbeConfig {
            interval: cfg.probe_interval,
        },
        derive_seed(ckpt.seed, "warm-restart"),
    )?;

    let restart_train_mse = 2.0 * outcome.trajectory[0].train_loss;
    let final_train_mse = 2.0 * outcome.final_loss;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let f = std::fs::File::create(dir.join("stability_trajectory.csv"))?;
        write_trajectory_csv(std::io::BufWriter::new(f), &outcome.trajectory)?;
    }
    Ok(StabilityResult {
        restart_train_mse,
        final_train_mse,
        relative_change: (final_train_mse - restart_train_mse).abs()
            / restart_train_mse.abs().max(f64::MIN_POSITIVE),
        steps: outcome.steps,
        final_lr: outcome.trajectory.last().unwrap().lr,
    })
}

// ---------------------------------------------------------------------------
// Concentration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub sup_dev: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationResult {
    pub rows: Vec<ConcentrationRow>,
    /// Median sup deviation per n, in n order.
    pub medians: Vec<(usize, f64)>,
    /// Slope of log median against log n.
    pub loglog_slope: f64,
    pub csv: String,
}

pub fn run_concentration(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ConcentrationResult> {
    cfg.validate()?;
    let mut pairs = Vec::new();
    for &n in &cfg.n_values {
        for &seed in &cfg.seeds {
            pairs.push((n, seed));
        }
    }
    let workers = cfg.effective_workers(pairs.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidSpec(format!("worker pool: {e}")))?;
    let rows: Vec<Result<ConcentrationRow>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(n, seed)| {
                let dataset =
                    gen_dataset(&cfg.data, &cfg.teacher, n, derive_seed(seed, "data"))?;
                let mode = if cfg.concentration_exact {
                    SupMode::ExactCells
                } else {
                    SupMode::Sampled(cfg.sup_budget)
                };
                Ok(ConcentrationRow {
                    n,
                    d: cfg.d(),
                    seed,
                    sup_dev: sup_deviation(&dataset, mode)?,
                })
            })
            .collect()
    });
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        out.push(r?);
    }

    let mut medians = Vec::new();
    for &n in &cfg.n_values {
        let vals: Vec<f64> = out
            .iter()
            .filter(|r| r.n == n)
            .map(|r| r.sup_dev)
            .collect();
        medians.push((n, median(&vals)));
    }
    let xs: Vec<f64> = medians.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = medians.iter().map(|(_, v)| v.max(1e-300).ln()).collect();
    let loglog_slope = if medians.len() >= 2 {
        ls_slope(&xs, &ys)
    } else {
        f64::NAN
    };

    let mut csv = String::from("n,d,seed,sup_dev\n");
    for r in &out {
        csv.push_str(&format!("{},{},{},{}\n", r.n, r.d, r.seed, r.sup_dev));
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("concentration.csv"), &csv)?;
        let summary = serde_json::json!({
            "medians": medians,
            "loglog_slope": loglog_slope,
        });
        std::fs::write(dir.join("concentration_summary.json"), summary.to_string())?;
    }
    Ok(ConcentrationResult {
        rows: out,
        medians,
        loglog_slope,
        csv,
    })
}

// ---------------------------------------------------------------------------
// Extremal search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtremalReportRow {
    pub seed: u64,
    pub w: Vec<f64>,
    pub d_vec: Vec<f64>,
    pub pattern: Vec<i8>,
    pub eta: Vec<f64>,
    pub verdict: Verdict,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ExtremalResult {
    pub rows: Vec<ExtremalReportRow>,
    pub jsonl: String,
}

pub fn run_extremal(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExtremalResult> {
    cfg.validate()?;
    let n = *cfg.n_values.last().expect("validated nonempty");
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let dataset = gen_dataset(&cfg.data, &cfg.teacher, n, derive_seed(seed, "data"))?;
        let mut starts: Vec<Vec<f64>> = Vec::new();
        if let TeacherKind::Linear { beta_star } = &dataset.teacher.kind {
            if norm2(beta_star) > 0.0 {
                let mut u = beta_star.clone();
                normalize(&mut u);
                starts.push(u.clone());
                starts.push(u.iter().map(|v| -v).collect());
            }
        }
        let mut rng = crate::rng::stream(seed, "extremal/starts");
        use rand_distr::{Distribution, StandardNormal};
        while starts.len() < cfg.extremal_starts + 2 {
            let mut w = vec![0.0; cfg.d()];
            for v in w.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            if normalize(&mut w) > 0.0 {
                starts.push(w);
            }
        }
        for w0 in &starts {
            let cand = find_extremal(&dataset, w0, cfg.extremal_max_iter, CERTIFY_TOL);
            rows.push(report_row(seed, &dataset, cand));
        }
    }
    let mut jsonl = String::new();
    for r in &rows {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("extremal.jsonl"), &jsonl)?;
    }
    Ok(ExtremalResult { rows, jsonl })
}

fn report_row(seed: u64, dataset: &Dataset, cand: ExtremalCandidate) -> ExtremalReportRow {
    let pattern = activation_pattern(&cand.w, dataset, PATTERN_ZETA).0;
    ExtremalReportRow {
        seed,
        pattern,
        w: cand.w,
        d_vec: cand.d_vec,
        eta: cand.eta,
        verdict: cand.verdict,
        residual: cand.residual,
    }
}

/// Re-certify a reported candidate; used to check reproducibility of
/// verdicts.
pub fn recertify(dataset: &Dataset, row: &ExtremalReportRow) -> ExtremalCandidate {
    certify_extremal(dataset, &row.w, CERTIFY_TOL)
}

// ---------------------------------------------------------------------------
// Alignment probe
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignProbeResult {
    pub lambda: f64,
    pub tau: f64,
    pub steps: u64,
    /// Per seed: smallest cosine of any neuron against the target of its
    /// output sign.
    pub min_cos_by_seed: Vec<(u64, f64)>,
    pub csv: String,
}

/// Train with full-batch GD for the step count nearest the alignment time
/// tau and measure neuron cosines against +-Sigma beta*.
pub fn run_align_probe(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<AlignProbeResult> {
    cfg.validate()?;
    let lambda = match cfg.init {
        InitSpec::Dominated { lambda } => lambda,
        _ => unreachable!("validated"),
    };
    let beta_star = match &cfg.teacher.kind {
        TeacherKind::Linear { beta_star } => beta_star.clone(),
        _ => {
            return Err(Error::NoClosedForm(
                "alignment probes need a linear teacher".into(),
            ))
        }
    };
    let sigma_beta = cfg
        .data
        .covariance_times(&beta_star)
        .ok_or_else(|| Error::NoClosedForm("input law has no analytic covariance".into()))?;
    let tau = alignment_time(cfg.align_epsilon, lambda, norm2(&sigma_beta));
    let lr = cfg.optimizer.kind.base_lr();
    let steps = (tau / lr).round().max(1.0) as u64;

    let n = cfg.n_values[0];
    let mut min_cos_by_seed = Vec::new();
    let mut csv = String::from("seed,neuron,a_sign,norm,cos_to_plus,cos_to_minus\n");
    for &seed in &cfg.seeds {
        let dataset = gen_dataset(&cfg.data, &cfg.teacher, n, derive_seed(seed, "data"))?;
        let params = init(&cfg.init, cfg.m, cfg.d(), cfg.activation, derive_seed(seed, "init"))?;
        let stop = StopSpec {
            max_steps: steps,
            loss_tol: 0.0,
            param_rel_change_tol: 0.0,
            window_steps: u64::MAX,
        };
        let outcome = train(
            params,
            &dataset,
            &cfg.optimizer,
            &stop,
            &ProbeConfig {
                interval: cfg.probe_interval,
            },
            derive_seed(seed, "train"),
        )?;
        let probe = alignment_probe(&outcome.params, &cfg.data, &cfg.teacher)?;
        for (i, nr) in probe.neurons.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                seed, i, nr.a_sign, nr.norm, nr.cos_to_plus, nr.cos_to_minus
            ));
        }
        min_cos_by_seed.push((seed, probe.min_cos_to_sign_target()));
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("align_probe.csv"), &csv)?;
    }
    Ok(AlignProbeResult {
        lambda,
        tau,
        steps,
        min_cos_by_seed,
        csv,
    })
}

// ---------------------------------------------------------------------------
// Dataset / analysis entry points used by the CLI
// ---------------------------------------------------------------------------

/// Generate the dataset of a config (first n, first seed) and write CSV and
/// JSON exports.
pub fn run_gen(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    cfg.validate()?;
    let n = cfg.n_values[0];
    let seed = cfg.seeds[0];
    let dataset = gen_dataset(&cfg.data, &cfg.teacher, n, derive_seed(seed, "data"))?;
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("dataset_n{n}_seed{seed}.csv"));
    let json_path = out_dir.join(format!("dataset_n{n}_seed{seed}.json"));
    let f = std::fs::File::create(&csv_path)?;
    dataset.to_csv(std::io::BufWriter::new(f))?;
    std::fs::write(&json_path, dataset.to_json()?)?;
    Ok((csv_path, json_path))
}

/// Histogram CSV (`bin_lo,bin_hi,count`) of neuron cosines against the OLS
/// direction of the dataset, plus a one-row analysis CSV.
pub fn run_analyze(
    params: &NetParams,
    dataset: &Dataset,
    n_test: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let full_ols = ols_dataset(dataset)?;
    let hist = cosine_histogram(params, &full_ols.beta, 20)?;
    let mut f = std::fs::File::create(out_dir.join("cosine_hist.csv"))?;
    writeln!(f, "bin_lo,bin_hi,count")?;
    let bins = hist.counts.len();
    for (b, c) in hist.counts.iter().enumerate() {
        let lo = b as f64 / bins as f64;
        let hi = (b + 1) as f64 / bins as f64;
        writeln!(f, "{lo},{hi},{c}")?;
    }

    let cfg = ExperimentConfig {
        n_test,
        ..ExperimentConfig::default()
    };
    let fake_outcome = TrainOutcome {
        params: params.clone(),
        opt_state: crate::optim::OptState::Plain,
        steps: 0,
        stop_reason: crate::optim::StopReason::MaxSteps,
        trajectory: vec![crate::optim::ProbeRecord {
            step: 0,
            lr: 0.0,
            train_loss: crate::network::train_loss(params, dataset)?,
            sign_flips: 0,
            balancedness_gap: 0.0,
        }],
        final_loss: crate::network::train_loss(params, dataset)?,
        max_sign_flips: 0,
        seed,
    };
    let (metrics, _) = analyze_outcome(&cfg, dataset, &fake_outcome, seed)?;
    let record = RunRecord {
        config_fingerprint: "analyze".into(),
        kind: super::config::ExperimentKind::Single,
        n: dataset.n,
        seed,
        d: dataset.d,
        m: params.m,
        status: "ok".into(),
        metrics: Some(metrics),
        trajectory_path: None,
        wall_clock_s: 0.0,
    };
    let mut csv = String::new();
    csv.push_str(&sweep_csv_header());
    csv.push('\n');
    csv.push_str(&sweep_csv_row(&record));
    csv.push('\n');
    std::fs::write(out_dir.join("analysis.csv"), csv)?;
    Ok(())
}
