use alignlab_core::harness::{runner::run_single, ExperimentConfig, ExperimentKind};
use alignlab_core::optim::StopSpec;
use std::time::Instant;

fn main() {
    let cfg = ExperimentConfig {
        kind: ExperimentKind::Sweep,
        n_values: vec![500],
        seeds: vec![1],
        stop: StopSpec {
            max_steps: 4_000_000,
            loss_tol: 0.0,
            param_rel_change_tol: 0.0,
            window_steps: u64::MAX,
        },
        probe_interval: 10_000,
        ..ExperimentConfig::default()
    };
    let t = Instant::now();
    let run = run_single(&cfg, 500, 1, None).unwrap();
    let m = run.record.metrics.unwrap();
    println!("n=500 seed1: {:.0}s steps={} train_mse={:.5} test_mse={:?} interp={} frac={:.3}",
        t.elapsed().as_secs_f64(), m.steps, m.train_mse, m.test_mse, m.interpolated, m.frac_cos_above_0_9);
    for p in run.outcome.unwrap().trajectory.iter().step_by(25) {
        println!("  step {:>8}: mse {:.5}", p.step, 2.0 * p.train_loss);
    }
}
