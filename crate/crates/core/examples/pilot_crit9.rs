use alignlab_core::analysis::*;
use alignlab_core::harness::{runner::run_single, ExperimentConfig, ExperimentKind};
use std::time::Instant;

fn main() {
    let cfg = ExperimentConfig {
        kind: ExperimentKind::Sweep,
        n_values: vec![500, 5000],
        seeds: vec![11],
        ..ExperimentConfig::default()
    };
    for &n in &cfg.n_values {
        let t = Instant::now();
        let run = run_single(&cfg, n, 11, None).unwrap();
        let m = run.record.metrics.unwrap();
        println!("n={n}: {:.1}s steps={} train_mse={:.5} test_mse={:?} interp={} frac={:.3} width={} l2gap={:?} flips={} ols_train={:.5} ols_test={:?}",
            t.elapsed().as_secs_f64(), m.steps, m.train_mse, m.test_mse, m.interpolated,
            m.frac_cos_above_0_9, m.effective_width, m.l2_rel_to_limit, m.sign_flips, m.ols_train_loss, m.ols_test_mse);
        let traj = run.outcome.as_ref().unwrap();
        let tr = &traj.trajectory;
        let k = tr.len();
        for i in [0, k/8, k/4, k/2, 3*k/4, k.saturating_sub(2), k-1] {
            println!("   step {:>7}: L = {:.6} (mse {:.6})", tr[i].step, tr[i].train_loss, 2.0*tr[i].train_loss);
        }
    }
}
