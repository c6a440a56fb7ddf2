//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them). Tolerances are pinned in code.
//!
//! The heavyweight training criteria share one lazily-computed fixture (the
//! scaled main sweep at n in {500, 5000}, three seeds), so `cargo test`
//! trains those networks once.

use std::sync::OnceLock;

use alignlab_core::analysis::*;
use alignlab_core::data::{gen_dataset, Dataset, InputSpec, TeacherSpec};
use alignlab_core::geometry::*;
use alignlab_core::harness::{runner, ExperimentConfig, ExperimentKind, SingleRun};
use alignlab_core::network::*;
use alignlab_core::optim::{
    train, Checkpoint, OptKind, OptimizerSpec, ProbeConfig, Schedule, StopSpec,
};
use alignlab_core::rng;
use alignlab_core::vecops::{dot, kahan_sum, norm2};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const SIGMA2: f64 = 0.09;

fn e1(d: usize) -> Vec<f64> {
    let mut b = vec![0.0; d];
    b[0] = 1.0;
    b
}

fn pass_line(criterion: &str, detail: String) {
    println!("criterion {criterion}: PASS — {detail}");
}

// ===========================================================================
// Criterion 1 — gradient oracle
// ===========================================================================

/// Independent loss recomputation for the finite-difference oracle:
/// direct formula, compensated summation, no shared code with `grad`.
fn oracle_loss(a: &[f64], w: &[f64], m: usize, d: usize, act: Activation, ds: &Dataset) -> f64 {
    kahan_sum((0..ds.n).map(|k| {
        let x = ds.row(k);
        let mut pred = 0.0;
        for i in 0..m {
            let z = dot(&w[i * d..(i + 1) * d], x);
            let s = match act {
                Activation::Relu => z.max(0.0),
                Activation::Gelu => z * 0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2)),
            };
            pred += a[i] * s;
        }
        let r = pred - ds.y[k];
        r * r
    })) / (2.0 * ds.n as f64)
}

#[test]
fn criterion_01_gradient_matches_finite_differences() {
    let mut seeds = rng::stream(101, "accept/grad");
    let h = 1e-6;
    let mut instances = 0;
    let mut worst: f64 = 0.0;
    let started = std::time::Instant::now();
    while instances < 100 {
        let act = if instances % 2 == 0 { Activation::Relu } else { Activation::Gelu };
        let d = 2 + (instances % 4);
        let m = 3 + (instances % 7);
        let n = 5 + (instances % 20);
        let spec = InputSpec::StandardGaussian { d };
        let teacher = TeacherSpec::linear(e1(d), 0.5);
        let ds = gen_dataset(&spec, &teacher, n, seeds.random()).unwrap();

        // Random parameters with |w_i| in [0.5, 1.5].
        let mut params = NetParams {
            m,
            d,
            a: (0..m).map(|_| seeds.random_range(-1.5..1.5)).collect(),
            w: vec![0.0; m * d],
            activation: act,
        };
        for i in 0..m {
            let row = &mut params.w[i * d..(i + 1) * d];
            for v in row.iter_mut() {
                *v = StandardNormal.sample(&mut seeds);
            }
            let norm = norm2(row);
            let target: f64 = seeds.random_range(0.5..1.5);
            for v in row.iter_mut() {
                *v *= target / norm;
            }
        }
        // Keep ReLU instances away from kinks: margin well above the FD step.
        if act == Activation::Relu {
            let min_margin = (0..n)
                .flat_map(|k| (0..m).map(move |i| (k, i)))
                .map(|(k, i)| {
                    let x = ds.row(k);
                    dot(params.w_row(i), x).abs() / (norm2(x) * norm2(params.w_row(i)))
                })
                .fold(f64::INFINITY, f64::min);
            if min_margin < 1e-4 {
                continue;
            }
        }
        instances += 1;

        let batch: Vec<usize> = (0..n).collect();
        let g = grad(&params, &ds, &batch).unwrap();
        let analytic: Vec<f64> = g.a.iter().chain(g.w.iter()).copied().collect();
        let g_scale = analytic.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-12);

        let mut fd = Vec::with_capacity(m * (d + 1));
        for idx in 0..m {
            let mut ap = params.a.clone();
            ap[idx] += h;
            let lp = oracle_loss(&ap, &params.w, m, d, act, &ds);
            ap[idx] -= 2.0 * h;
            let lm = oracle_loss(&ap, &params.w, m, d, act, &ds);
            fd.push((lp - lm) / (2.0 * h));
        }
        for idx in 0..m * d {
            let mut wp = params.w.clone();
            wp[idx] += h;
            let lp = oracle_loss(&params.a, &wp, m, d, act, &ds);
            wp[idx] -= 2.0 * h;
            let lm = oracle_loss(&params.a, &wp, m, d, act, &ds);
            fd.push((lp - lm) / (2.0 * h));
        }
        let err = analytic
            .iter()
            .zip(fd.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
            / g_scale;
        worst = worst.max(err);
        assert!(err <= 1e-5, "instance {instances}: relative error {err:.3e}");
    }
    assert!(started.elapsed().as_secs() < 60);
    pass_line("1", format!("100 instances, worst relative error {worst:.2e} <= 1e-5"));
}

// ===========================================================================
// Criteria 2 & 3 — balancedness / flow fidelity, sign preservation
// ===========================================================================

#[test]
fn criterion_02_balancedness_and_flow_fidelity() {
    let d = 2;
    let spec = InputSpec::StandardGaussian { d };
    let teacher = TeacherSpec::linear(vec![1.0, -0.5], 0.1);
    let ds = gen_dataset(&spec, &teacher, 50, 7).unwrap();
    // Fixed physical time T = 100: halving the learning rate doubles the
    // step count and should roughly halve the first-order Euler drift.
    let mut gaps = Vec::new();
    for (lr, steps) in [(1e-2, 10_000u64), (5e-3, 20_000), (2.5e-3, 40_000)] {
        let p = init(&InitSpec::Dominated { lambda: 1e-2 }, 100, d, Activation::Relu, 7).unwrap();
        let out = train(
            p,
            &ds,
            &OptimizerSpec::gd(lr),
            &StopSpec {
                max_steps: steps,
                loss_tol: 0.0,
                param_rel_change_tol: 0.0,
                window_steps: u64::MAX,
            },
            &ProbeConfig { interval: 1000 },
            7,
        )
        .unwrap();
        let gap = out.trajectory.last().unwrap().balancedness_gap;
        assert!(gap <= 50.0 * lr, "gap {gap:.3e} exceeds 50 lr = {}", 50.0 * lr);
        assert_eq!(out.max_sign_flips, 0, "sign flip under dominated init");
        gaps.push(gap);
    }
    let r1 = gaps[0] / gaps[1];
    let r2 = gaps[1] / gaps[2];
    assert!((1.5..=2.5).contains(&r1), "ratio lr->lr/2 = {r1:.3}");
    assert!((1.5..=2.5).contains(&r2), "ratio lr/2->lr/4 = {r2:.3}");
    pass_line(
        "2",
        format!(
            "gap {:.2e} <= 50 lr; halving ratios {r1:.2}, {r2:.2} in [1.5, 2.5]",
            gaps[0]
        ),
    );
}

#[test]
fn criterion_03_sign_preservation_under_dominated_init() {
    // Dominated-init runs across optimizers and activations: zero output
    // sign flips at every probe.
    let d = 3;
    let spec = InputSpec::StandardGaussian { d };
    let teacher = TeacherSpec::linear(e1(d), 0.3);
    let ds = gen_dataset(&spec, &teacher, 2000, 31).unwrap();
    let mut checked = 0;
    for (act, opt) in [
        (Activation::Relu, OptimizerSpec::sgd(0.01, 32)),
        (Activation::Relu, OptimizerSpec::gd(0.01)),
        (Activation::Gelu, OptimizerSpec::sgd(0.01, 32)),
        (
            Activation::Relu,
            OptimizerSpec {
                kind: OptKind::adam_default(32),
                schedule: Schedule::Constant,
            },
        ),
    ] {
        let p = init(&InitSpec::Dominated { lambda: 1e-3 }, 256, d, act, 31).unwrap();
        let out = train(
            p,
            &ds,
            &opt,
            &StopSpec {
                max_steps: 100_000,
                loss_tol: 0.0,
                param_rel_change_tol: 0.0,
                window_steps: u64::MAX,
            },
            &ProbeConfig { interval: 1000 },
            31,
        )
        .unwrap();
        assert_eq!(
            out.max_sign_flips, 0,
            "{act:?}/{:?}: sign flips recorded",
            opt.kind
        );
        checked += 1;
    }
    pass_line("3", format!("{checked} dominated-init runs, 0 sign flips at every probe"));
}

// ===========================================================================
// Criterion 4 — cell-count oracle
// ===========================================================================

#[test]
fn criterion_04_cell_counts_match_dense_sampling_and_bound() {
    let started = std::time::Instant::now();
    let mut total_cells = 0usize;
    for i in 0..20u64 {
        let d = if i < 10 { 2 } else { 3 };
        let n = 4 + (i as usize * 7) % 13;
        let spec = InputSpec::StandardGaussian { d };
        let teacher = TeacherSpec::linear(e1(d), 0.3);
        let ds = gen_dataset(&spec, &teacher, n, 9000 + i).unwrap();
        let exact = enumerate_cells(&ds, CellMode::Exact).unwrap();
        let budget = if d == 2 { 400_000 } else { 12_000_000 };
        let sampled = enumerate_cells(&ds, CellMode::Sampled(budget)).unwrap();
        assert_eq!(
            exact.cells.len(),
            sampled.cells.len(),
            "dataset {i} (d={d}, n={n}): exact vs dense sampling"
        );
        let sampled_pats: std::collections::BTreeSet<_> =
            sampled.cells.iter().map(|c| c.pattern.clone()).collect();
        for c in &exact.cells {
            assert!(sampled_pats.contains(&c.pattern));
        }
        assert!(exact.cells.len() as u128 <= cell_count_bound(n, d));
        total_cells += exact.cells.len();
    }
    assert!(started.elapsed().as_secs() < 120);
    pass_line(
        "4",
        format!("20 datasets, {total_cells} cells total; exact == dense sampling, bound respected"),
    );
}

// ===========================================================================
// Criterion 5 — extremal oracle on orthogonal data
// ===========================================================================

/// Brute-force oracle: orthogonal data realizes every sign pattern in
/// {-1,0,+1}^n via w = sum_k sigma_k x_k; enumerate all of them together
/// with all subgradient vertices on their zero coordinates and keep the D
/// vectors passing the pattern condition.
fn oracle_orthogonal_extremal_set(ds: &Dataset) -> std::collections::BTreeSet<Vec<i64>> {
    let n = ds.n;
    let d = ds.d;
    let mut certified = std::collections::BTreeSet::new();
    let pow3 = 3usize.pow(n as u32);
    for code in 0..pow3 {
        let mut signs = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            signs.push((c % 3) as i64 - 1); // -1, 0, +1
            c /= 3;
        }
        let mut w = vec![0.0; d];
        for k in 0..n {
            for j in 0..d {
                w[j] += signs[k] as f64 * ds.row(k)[j];
            }
        }
        let zeros: Vec<usize> = (0..n).filter(|&k| signs[k] == 0).collect();
        for mask in 0..(1usize << zeros.len()) {
            let mut dv = vec![0.0; d];
            for k in 0..n {
                let eta = if signs[k] > 0 {
                    1.0
                } else if signs[k] == 0 && (mask >> zeros.iter().position(|&z| z == k).unwrap()) & 1 == 1 {
                    1.0
                } else {
                    0.0
                };
                if eta > 0.0 {
                    for j in 0..d {
                        dv[j] += ds.y[k] * ds.row(k)[j] / n as f64;
                    }
                }
            }
            if extremal_pattern_condition(ds, &dv, &w, PATTERN_ZETA) {
                certified.insert(quantize(&dv));
            }
        }
    }
    certified
}

fn quantize(v: &[f64]) -> Vec<i64> {
    v.iter().map(|x| (x * 1e9).round() as i64).collect()
}

#[test]
fn criterion_05_orthogonal_extremal_sets() {
    let started = std::time::Instant::now();
    let mut counts = Vec::new();
    for n in [2usize, 3, 4] {
        let d = n;
        let spec = InputSpec::OrthogonalBasis { d, labels: vec![1.0; n] };
        let teacher = TeacherSpec::linear(vec![1.0; d], 0.0);
        let ds = gen_dataset(&spec, &teacher, n, 0).unwrap();

        // Implementation side: certify every strict cell.
        let cells = enumerate_cells(&ds, CellMode::Exact).unwrap();
        let mut impl_set = std::collections::BTreeSet::new();
        for c in &cells.cells {
            let cand = certify_extremal(&ds, &c.representative, CERTIFY_TOL);
            if cand.verdict == Verdict::Extremal {
                impl_set.insert(quantize(&cand.d_vec));
            }
        }
        // Certified verdicts are reproducible on re-certification.
        for c in &cells.cells {
            let cand = certify_extremal(&ds, &c.representative, CERTIFY_TOL);
            let again = certify_extremal(&ds, &cand.w, CERTIFY_TOL);
            assert_eq!(cand.verdict, again.verdict);
        }

        let oracle = oracle_orthogonal_extremal_set(&ds);
        assert_eq!(impl_set, oracle, "n = d = {n}");
        // Theta(2^n): all subsets of the data realize a certified vector.
        assert_eq!(impl_set.len(), 1 << n, "n = d = {n}");
        counts.push(impl_set.len());

        if n == 2 {
            // The exact certified set for X = {e1, e2}, y = (1,1).
            let expected: std::collections::BTreeSet<Vec<i64>> = [
                vec![0.0, 0.0],
                vec![0.5, 0.0],
                vec![0.0, 0.5],
                vec![0.5, 0.5],
            ]
            .iter()
            .map(|v| quantize(v))
            .collect();
            assert_eq!(impl_set, expected);
            // (e1 - e2)/2 satisfies the pattern condition against the (+,-)
            // cell, but is not in any subgradient set, hence not certified.
            assert!(extremal_pattern_condition(&ds, &[0.5, -0.5], &[1.0, -1.0], PATTERN_ZETA));
            assert!(!impl_set.contains(&quantize(&[0.5, -0.5])));
        }
    }
    assert!(started.elapsed().as_secs() < 60);
    pass_line(
        "5",
        format!("certified sets equal brute force; sizes {counts:?} = 2^n for n = 2, 3, 4"),
    );
}

// ===========================================================================
// Criterion 6 — concentration rate of the origin gradient field
// ===========================================================================

#[test]
fn criterion_06_sup_deviation_rate() {
    let cfg = ExperimentConfig {
        kind: ExperimentKind::Concentration,
        data: InputSpec::StandardGaussian { d: 3 },
        teacher: TeacherSpec::linear(e1(3), 0.3),
        n_values: vec![64, 128, 256, 512, 1024, 2048, 4096, 8192],
        seeds: (1..=20).collect(),
        sup_budget: 4096,
        ..ExperimentConfig::default()
    };
    let res = runner::run_concentration(&cfg, None).unwrap();
    for w in res.medians.windows(2) {
        assert!(
            w[1].1 < w[0].1,
            "median not strictly decreasing: {:?} -> {:?}",
            w[0],
            w[1]
        );
    }
    assert!(
        (-0.65..=-0.35).contains(&res.loglog_slope),
        "slope {} outside [-0.65, -0.35]",
        res.loglog_slope
    );
    pass_line(
        "6",
        format!(
            "median sup-deviation strictly decreasing over n = 64..8192, log-log slope {:.3}",
            res.loglog_slope
        ),
    );
}

// ===========================================================================
// Criterion 7 — extremal concentration on margin data
// ===========================================================================

#[test]
fn criterion_07_extremal_vectors_concentrate() {
    let d = 3;
    let eps = 0.1;
    let cfg = ExperimentConfig {
        kind: ExperimentKind::Extremal,
        data: InputSpec::Assumption1 { d, beta_star: e1(d), epsilon: eps },
        teacher: TeacherSpec::linear(e1(d), 0.3),
        n_values: vec![4096],
        seeds: (1..=10).collect(),
        extremal_starts: 20,
        ..ExperimentConfig::default()
    };
    let res = runner::run_extremal(&cfg, None).unwrap();
    let target_norm = 1.0 + eps * eps / 3.0; // |Sigma beta*|
    let half = 0.5 * target_norm;
    let tol = 0.15 * target_norm;
    let mut certified = 0;
    let mut max_dist: f64 = 0.0;
    let mut per_seed_signs: std::collections::BTreeMap<u64, (bool, bool)> = Default::default();
    for r in &res.rows {
        if r.verdict != Verdict::Extremal {
            continue;
        }
        certified += 1;
        let dp = ((r.d_vec[0] - half).powi(2) + r.d_vec[1].powi(2) + r.d_vec[2].powi(2)).sqrt();
        let dm = ((r.d_vec[0] + half).powi(2) + r.d_vec[1].powi(2) + r.d_vec[2].powi(2)).sqrt();
        let dist = dp.min(dm);
        assert!(
            dist <= tol,
            "seed {}: certified vector at distance {dist:.4} > {tol:.4}",
            r.seed
        );
        max_dist = max_dist.max(dist);
        let entry = per_seed_signs.entry(r.seed).or_default();
        if dp < dm {
            entry.0 = true;
        } else {
            entry.1 = true;
        }
    }
    assert!(certified > 0);
    for (seed, (plus, minus)) in &per_seed_signs {
        assert!(*plus && *minus, "seed {seed}: missing a sign among certified vectors");
    }
    assert_eq!(per_seed_signs.len(), 10);
    pass_line(
        "7",
        format!(
            "{certified} certified vectors over 10 seeds, all within {max_dist:.3} <= {tol:.3} of +-Sigma beta*/2"
        ),
    );
}

// ===========================================================================
// Criterion 8 — early alignment at the theoretical time
// ===========================================================================

fn align_min_cos(lambda: f64) -> f64 {
    let d = 5;
    let cfg = ExperimentConfig {
        kind: ExperimentKind::AlignProbe,
        data: InputSpec::Assumption1 { d, beta_star: e1(d), epsilon: 0.1 },
        teacher: TeacherSpec::linear(e1(d), 0.3),
        init: InitSpec::Dominated { lambda },
        optimizer: OptimizerSpec::gd(1e-3),
        n_values: vec![10_000],
        seeds: vec![3],
        m: 200,
        probe_interval: 10_000,
        align_epsilon: 0.2,
        ..ExperimentConfig::default()
    };
    let res = runner::run_align_probe(&cfg, None).unwrap();
    res.min_cos_by_seed[0].1
}

#[test]
fn criterion_08_early_alignment_at_tau() {
    let c3 = align_min_cos(1e-3);
    let c4 = align_min_cos(1e-4);
    let c5 = align_min_cos(1e-5);
    // The directional dynamics follow f' = (|Sigma b*|^2 - f^2)/2, so the
    // misalignment at tau = eps ln(1/lambda)/|Sigma b*| scales as
    // Theta(lambda^eps): measured 1 - min_cos tracks that rate, and the 0.9
    // level is reached once lambda^eps is small enough (lambda <= 1e-5 at
    // eps = 0.2).
    println!(
        "criterion 8 measurements at tau(eps = 0.2): min cos {c3:.4} (lambda 1e-3), {c4:.4} (1e-4), {c5:.4} (1e-5)"
    );
    assert!(
        c4 >= c3 && c5 >= c4,
        "alignment must tighten as lambda decreases: {c3:.4}, {c4:.4}, {c5:.4}"
    );
    assert!(
        c3 >= 0.9,
        "min cosine {c3:.4} < 0.9 at lambda = 1e-3, tau(eps = 0.2); the misalignment at tau is \
         Theta(lambda^eps) ~ 0.25 here, so the stated gate is only reached for lambda <= 1e-5 \
         (measured {c5:.4})"
    );
    pass_line("8", format!("min cos {c3:.3} >= 0.9 at lambda 1e-3; tightens to {c4:.3} at 1e-4"));
}

// ===========================================================================
// Shared fixture: the scaled main experiment (criteria 9, 10, 11, 13)
// ===========================================================================

struct Section5 {
    n500: Vec<SingleRun>,
    n5000: Vec<SingleRun>,
    cfg5000: ExperimentConfig,
}

fn section5_cfg(n: usize, max_steps: u64) -> ExperimentConfig {
    ExperimentConfig {
        kind: ExperimentKind::Sweep,
        n_values: vec![n],
        seeds: vec![1, 2, 3],
        stop: StopSpec {
            max_steps,
            loss_tol: 1e-8,
            param_rel_change_tol: 1e-7,
            window_steps: 10_000,
        },
        probe_interval: 10_000,
        ..ExperimentConfig::default()
    }
}

fn section5() -> &'static Section5 {
    static FIXTURE: OnceLock<Section5> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        // Interpolation at n = 500 is the slow phase; the non-interpolating
        // n = 5000 runs plateau within 4e5 steps.
        let cfg500 = section5_cfg(500, 4_000_000);
        let cfg5000 = section5_cfg(5000, 400_000);
        let n500 = runner::run_sweep(&cfg500, None).unwrap().runs;
        let n5000 = runner::run_sweep(&cfg5000, None).unwrap().runs;
        Section5 { n500, n5000, cfg5000 }
    })
}

#[test]
fn criterion_09_optimization_threshold() {
    let fx = section5();
    for run in &fx.n500 {
        let m = run.record.metrics.as_ref().expect("run succeeded");
        let seed = run.record.seed;
        assert!(
            m.interpolated,
            "n=500 seed {seed}: train_mse {:.4} fails interpolation",
            m.train_mse
        );
        let test_mse = m.test_mse.unwrap();
        assert!(
            test_mse >= 1.5 * SIGMA2,
            "n=500 seed {seed}: test_mse {test_mse:.4} < 1.5 sigma^2"
        );
    }
    for run in &fx.n5000 {
        let m = run.record.metrics.as_ref().expect("run succeeded");
        let seed = run.record.seed;
        assert!(!m.interpolated, "n=5000 seed {seed} interpolated");
        assert!(
            (0.7 * SIGMA2..=1.05 * SIGMA2).contains(&m.train_mse),
            "n=5000 seed {seed}: train_mse {:.4} outside [0.7, 1.05] sigma^2",
            m.train_mse
        );
        let test_mse = m.test_mse.unwrap();
        assert!(
            test_mse <= 1.2 * SIGMA2,
            "n=5000 seed {seed}: test_mse {test_mse:.4} > 1.2 sigma^2"
        );
        let gap = m.l2_rel_to_limit.unwrap();
        assert!(
            gap <= 0.10,
            "n=5000 seed {seed}: relative L2 gap to limit predictor {gap:.4} > 0.10"
        );
    }
    let worst_gap = fx
        .n5000
        .iter()
        .map(|r| r.record.metrics.as_ref().unwrap().l2_rel_to_limit.unwrap())
        .fold(0.0f64, f64::max);
    pass_line(
        "9",
        format!(
            "n=500 interpolates with test >= 1.5 sigma^2; n=5000 lands on the OLS profile (worst L2 gap {worst_gap:.3})"
        ),
    );
}

#[test]
fn criterion_10_cosine_histograms() {
    let fx = section5();
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 1.0;
    for run in &fx.n500 {
        let f = run.record.metrics.as_ref().unwrap().frac_cos_above_0_9;
        assert!(f <= 0.5, "n=500 seed {}: fraction {f:.3} > 0.5", run.record.seed);
        lo = lo.max(f);
    }
    for run in &fx.n5000 {
        let f = run.record.metrics.as_ref().unwrap().frac_cos_above_0_9;
        assert!(f >= 0.85, "n=5000 seed {}: fraction {f:.3} < 0.85", run.record.seed);
        hi = hi.min(f);
    }
    pass_line(
        "10",
        format!("fraction(|cos| >= 0.9): <= {lo:.3} at n=500, >= {hi:.3} at n=5000"),
    );
}

// ===========================================================================
// Criterion 11 — stability of the non-interpolating minimum
// ===========================================================================

#[test]
fn criterion_11_warm_restart_stability() {
    let fx = section5();
    let run = &fx.n5000[0];
    let outcome = run.outcome.as_ref().expect("run succeeded");
    let ckpt = Checkpoint::from_outcome(outcome, &fx.cfg5000.fingerprint());
    let cfg = ExperimentConfig {
        kind: ExperimentKind::Stability,
        optimizer: OptimizerSpec {
            kind: OptKind::Sgd { lr: 0.01, batch_size: 32 },
            schedule: Schedule::Geometric { factor: 0.85, every_steps: 2000 },
        },
        ..fx.cfg5000.clone()
    };
    let res = runner::run_stability_from(&cfg, ckpt, None).unwrap();
    assert!(res.final_lr <= 1e-8 * 0.01 / 0.85, "final lr {}", res.final_lr);
    assert!(
        res.relative_change <= 0.02,
        "train MSE moved {:.4} -> {:.4} ({:.2}% relative)",
        res.restart_train_mse,
        res.final_train_mse,
        100.0 * res.relative_change
    );
    pass_line(
        "11",
        format!(
            "decaying lr to {:.1e}: train MSE {:.5} -> {:.5} ({:.2}% change, within 2%)",
            res.final_lr,
            res.restart_train_mse,
            res.final_train_mse,
            100.0 * res.relative_change
        ),
    );
}

// ===========================================================================
// Criterion 12 — GeLU / Adam robustness
// ===========================================================================

#[test]
fn criterion_12_gelu_and_adam_do_not_interpolate() {
    let base = ExperimentConfig {
        kind: ExperimentKind::Sweep,
        activation: Activation::Gelu,
        n_values: vec![500, 5000],
        seeds: vec![1],
        stop: StopSpec {
            max_steps: 200_000,
            loss_tol: 1e-8,
            param_rel_change_tol: 1e-7,
            window_steps: 10_000,
        },
        probe_interval: 10_000,
        ..ExperimentConfig::default()
    };
    let mut details = Vec::new();
    for (name, opt) in [
        ("SGD", OptimizerSpec::sgd(0.01, 32)),
        (
            "Adam",
            OptimizerSpec {
                kind: OptKind::adam_default(32),
                schedule: Schedule::Constant,
            },
        ),
    ] {
        let cfg = ExperimentConfig { optimizer: opt, ..base.clone() };
        let sweep = runner::run_sweep(&cfg, None).unwrap();
        for run in &sweep.runs {
            let m = run.record.metrics.as_ref().expect("run succeeded");
            if run.record.n == 500 {
                // Reported (soft): GeLU already resists interpolation here.
                details.push(format!("GeLU+{name} n=500 train_mse {:.4}", m.train_mse));
                assert!(
                    m.train_mse >= 0.5 * SIGMA2,
                    "GeLU+{name} n=500: train_mse {:.4} < 0.5 sigma^2 (soft report)",
                    m.train_mse
                );
            } else {
                // Gate: no interpolation at n = 5000.
                assert!(
                    !m.interpolated,
                    "GeLU+{name} n=5000 interpolated (train_mse {:.4})",
                    m.train_mse
                );
                details.push(format!("GeLU+{name} n=5000 train_mse {:.4}", m.train_mse));
            }
        }
    }
    pass_line("12", details.join("; "));
}

// ===========================================================================
// Criterion 13 — 5-ReLU teacher transition ordering
// ===========================================================================

/// Generalization onset: smallest n that is simultaneously non-interpolating
/// and close to the noise floor on test data.
fn onset(rows: &[(usize, bool, f64)]) -> Option<usize> {
    rows.iter()
        .filter(|(_, interpolated, test_mse)| !interpolated && *test_mse <= 1.5 * SIGMA2)
        .map(|(n, _, _)| *n)
        .min()
}

#[test]
fn criterion_13_krelu_teacher_transition_is_later() {
    // Fixed 5-unit teacher shared across every n (same draw per seed tag).
    let d = 5;
    let mut tr = rng::stream(2024, "accept/krelu-teacher");
    let betas: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut tr)).collect())
        .collect();
    let teacher = TeacherSpec::k_relu(betas, 0.2, 0.3);

    let cfg = ExperimentConfig {
        kind: ExperimentKind::Sweep,
        teacher,
        n_values: vec![500, 5000, 17_000],
        seeds: vec![1],
        stop: StopSpec {
            max_steps: 400_000,
            loss_tol: 1e-8,
            param_rel_change_tol: 1e-7,
            window_steps: 10_000,
        },
        probe_interval: 10_000,
        ..ExperimentConfig::default()
    };
    let sweep = runner::run_sweep(&cfg, None).unwrap();
    let krelu_rows: Vec<(usize, bool, f64)> = sweep
        .runs
        .iter()
        .map(|r| {
            let m = r.record.metrics.as_ref().expect("run succeeded");
            (r.record.n, m.interpolated, m.test_mse.unwrap())
        })
        .collect();
    println!("criterion 13 measurements: {krelu_rows:?}");

    let fx = section5();
    let linear_rows: Vec<(usize, bool, f64)> = fx
        .n500
        .iter()
        .chain(fx.n5000.iter())
        .map(|r| {
            let m = r.record.metrics.as_ref().unwrap();
            (r.record.n, m.interpolated, m.test_mse.unwrap())
        })
        .collect();
    let linear_onset = onset(&linear_rows).expect("linear case generalizes at n = 5000");
    let krelu_onset = onset(&krelu_rows);
    assert!(
        krelu_onset.map_or(true, |k| k > linear_onset),
        "5-ReLU transition (onset {krelu_onset:?}) not later than linear (onset {linear_onset})"
    );
    pass_line(
        "13",
        format!(
            "generalization onset: linear at n = {linear_onset}, 5-ReLU at {:?} (later)",
            krelu_onset
        ),
    );
}

// ===========================================================================
// Extras beyond the numbered criteria
// ===========================================================================

/// The dimension-10 sweep ordering (interpolation persists to >= 3x larger n
/// than in d = 5). Training to interpolation at d = 10 takes tens of
/// minutes, which would push the default suite past its runtime budget; run
/// with `cargo test -p alignlab-core --test acceptance -- --ignored`.
#[test]
#[ignore = "long-running dimension sweep; see README"]
fn extra_dimension_sweep_ordering() {
    let d = 10;
    let cfg = ExperimentConfig {
        kind: ExperimentKind::Sweep,
        data: InputSpec::StandardGaussian { d },
        teacher: TeacherSpec::linear(e1(d), 0.3),
        n_values: vec![5000, 15_000],
        seeds: vec![1],
        stop: StopSpec {
            max_steps: 4_000_000,
            loss_tol: 1e-8,
            param_rel_change_tol: 1e-7,
            window_steps: 10_000,
        },
        probe_interval: 10_000,
        ..ExperimentConfig::default()
    };
    let sweep = runner::run_sweep(&cfg, None).unwrap();
    let interp_at = |n: usize| {
        sweep
            .runs
            .iter()
            .find(|r| r.record.n == n)
            .and_then(|r| r.record.metrics.as_ref())
            .map(|m| m.interpolated)
            .expect("run succeeded")
    };
    // d=5 stops interpolating by n = 5000 (criterion 9); at d = 10 the
    // non-interpolation onset must sit at least 3x higher.
    assert!(interp_at(5000), "d=10 should still interpolate at n = 5000");
    assert!(!interp_at(15_000), "d=10 should stop interpolating by n = 15000");
    pass_line("extra-d10", "non-interpolation onset >= 3x the d=5 onset".into());
}

/// The two-ReLU limit profile has effective width exactly 2; trained
/// networks at desk scale keep a few stray directions (reported, not gated).
#[test]
fn extra_effective_width_of_limit_profile() {
    let fx = section5();
    let run = &fx.n5000[0];
    let limit = run.limit.as_ref().expect("split OLS defined");
    let d = run.dataset.d;
    // Build the two-neuron network realizing the limit profile plus dormant
    // noise neurons.
    let mut w = limit.beta_plus.clone();
    w.extend(limit.beta_minus.iter().map(|v| -v));
    let mut params = NetParams {
        m: 2,
        d,
        a: vec![1.0, -1.0],
        w,
        activation: Activation::Relu,
    };
    let mut noise = rng::stream(5, "accept/width");
    for _ in 0..30 {
        params.a.push(1e-6);
        for _ in 0..d {
            let g: f64 = StandardNormal.sample(&mut noise);
            params.w.push(1e-6 * g);
        }
        params.m += 1;
    }
    assert_eq!(effective_width(&params, 0.95), 2);
    let trained_width = run.record.metrics.as_ref().unwrap().effective_width;
    println!("trained effective width at n=5000 (observational): {trained_width}");
    assert!(trained_width >= 2);
}

/// Interpolating-regime warm restart: decaying the learning rate keeps the
/// train loss at interpolation level.
#[test]
fn extra_stability_from_interpolating_run() {
    let fx = section5();
    let run = &fx.n500[0];
    let outcome = run.outcome.as_ref().expect("run succeeded");
    let cfg500 = section5_cfg(500, 4_000_000);
    let ckpt = Checkpoint::from_outcome(outcome, &cfg500.fingerprint());
    let cfg = ExperimentConfig {
        kind: ExperimentKind::Stability,
        optimizer: OptimizerSpec {
            kind: OptKind::Sgd { lr: 0.01, batch_size: 32 },
            schedule: Schedule::Geometric { factor: 0.85, every_steps: 2000 },
        },
        ..cfg500
    };
    let res = runner::run_stability_from(&cfg, ckpt, None).unwrap();
    assert!(
        res.final_train_mse <= SIGMA2 / 3.0,
        "interpolating restart drifted to train MSE {:.4}",
        res.final_train_mse
    );
}
