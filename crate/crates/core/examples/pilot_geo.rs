use alignlab_core::data::{gen_dataset, InputSpec, TeacherSpec};
use alignlab_core::geometry::*;
use alignlab_core::harness::{runner, ExperimentConfig, ExperimentKind};
use alignlab_core::network::{InitSpec};
use alignlab_core::optim::OptimizerSpec;
use alignlab_core::vecops::norm2;
use std::time::Instant;

fn main() {
    // Criterion 4: exact vs sampled cell counts, frozen seeds.
    let t = Instant::now();
    let mut worst = (0usize, 0usize, 0u64, 0i64);
    for i in 0..20u64 {
        let d = if i < 10 { 2 } else { 3 };
        let n = 4 + (i as usize * 7) % 13; // 4..16
        let spec = InputSpec::StandardGaussian { d };
        let mut b = vec![0.0; d]; b[0] = 1.0;
        let teacher = TeacherSpec::linear(b, 0.3);
        let ds = gen_dataset(&spec, &teacher, n, 9000 + i).unwrap();
        let exact = enumerate_cells(&ds, CellMode::Exact).unwrap();
        let budget = if d == 2 { 400_000 } else { 2_000_000 };
        let sampled = enumerate_cells(&ds, CellMode::Sampled(budget)).unwrap();
        let diff = exact.cells.len() as i64 - sampled.cells.len() as i64;
        if diff != 0 { worst = (d, n, 9000 + i, diff); }
        assert_eq!(exact.cells.len() as u128, cell_count_bound(n, d), "bound equality d={d} n={n}");
    }
    println!("crit4: 20 datasets in {:.1}s, worst mismatch {:?}", t.elapsed().as_secs_f64(), worst);

    // Criterion 6: concentration slope.
    let t = Instant::now();
    let cfg = ExperimentConfig {
        kind: ExperimentKind::Concentration,
        data: InputSpec::StandardGaussian { d: 3 },
        teacher: TeacherSpec::linear(vec![1.0, 0.0, 0.0], 0.3),
        n_values: vec![64, 128, 256, 512, 1024, 2048, 4096, 8192],
        seeds: (1..=20).collect(),
        sup_budget: 4096,
        ..ExperimentConfig::default()
    };
    let res = runner::run_concentration(&cfg, None).unwrap();
    println!("crit6: {:.1}s slope={:.3} medians={:?}", t.elapsed().as_secs_f64(), res.loglog_slope,
             res.medians.iter().map(|(n,v)| format!("{n}:{v:.4}")).collect::<Vec<_>>());

    // Criterion 7: Assumption1 extremal concentration.
    let t = Instant::now();
    let cfg = ExperimentConfig {
        kind: ExperimentKind::Extremal,
        data: InputSpec::Assumption1 { d: 3, beta_star: vec![1.0, 0.0, 0.0], epsilon: 0.1 },
        teacher: TeacherSpec::linear(vec![1.0, 0.0, 0.0], 0.3),
        n_values: vec![4096],
        seeds: (1..=10).collect(),
        extremal_starts: 20,
        ..ExperimentConfig::default()
    };
    let res = runner::run_extremal(&cfg, None).unwrap();
    let target = 0.5 * (1.0 + 0.01 / 3.0);
    let mut nc = 0; let mut max_dist = 0.0f64; let mut amb = 0;
    for r in &res.rows {
        match r.verdict {
            Verdict::Extremal => {
                nc += 1;
                let dp = ((r.d_vec[0] - target).powi(2) + r.d_vec[1].powi(2) + r.d_vec[2].powi(2)).sqrt();
                let dm = ((r.d_vec[0] + target).powi(2) + r.d_vec[1].powi(2) + r.d_vec[2].powi(2)).sqrt();
                max_dist = max_dist.max(dp.min(dm));
            }
            Verdict::BoundaryAmbiguous => amb += 1,
            _ => {}
        }
    }
    println!("crit7: {:.1}s certified={nc}/{} ambiguous={amb} max_dist={:.4} (tol {:.4})",
             t.elapsed().as_secs_f64(), res.rows.len(), max_dist, 0.15 * 2.0 * target);

    // Criterion 8: alignment probe at tau.
    for lambda in [1e-3, 1e-4] {
        let t = Instant::now();
        let cfg = ExperimentConfig {
            kind: ExperimentKind::AlignProbe,
            data: InputSpec::Assumption1 { d: 5, beta_star: vec![1.0, 0.0, 0.0, 0.0, 0.0], epsilon: 0.1 },
            teacher: TeacherSpec::linear(vec![1.0, 0.0, 0.0, 0.0, 0.0], 0.3),
            init: InitSpec::Dominated { lambda },
            optimizer: OptimizerSpec::gd(1e-3),
            n_values: vec![10_000],
            seeds: vec![3],
            m: 200,
            probe_interval: 10_000,
            ..ExperimentConfig::default()
        };
        let res = runner::run_align_probe(&cfg, None).unwrap();
        println!("crit8 lambda={lambda}: {:.1}s tau={:.3} steps={} min_cos={:?}",
                 t.elapsed().as_secs_f64(), res.tau, res.steps, res.min_cos_by_seed);
    }
    let _ = norm2(&[0.0]);
}
