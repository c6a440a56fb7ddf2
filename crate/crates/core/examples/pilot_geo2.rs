use alignlab_core::data::{gen_dataset, InputSpec, TeacherSpec};
use alignlab_core::geometry::*;
use alignlab_core::harness::{runner, ExperimentConfig, ExperimentKind};
use alignlab_core::network::InitSpec;
use alignlab_core::optim::OptimizerSpec;

fn main() {
    // Criterion 4 sliver: denser oracle on the failing dataset.
    let spec = InputSpec::StandardGaussian { d: 3 };
    let teacher = TeacherSpec::linear(vec![1.0, 0.0, 0.0], 0.3);
    let ds = gen_dataset(&spec, &teacher, 13, 9018).unwrap();
    let exact = enumerate_cells(&ds, CellMode::Exact).unwrap();
    for budget in [2_000_000usize, 6_000_000, 12_000_000] {
        let sampled = enumerate_cells(&ds, CellMode::Sampled(budget)).unwrap();
        println!("crit4 seed 9018 budget {budget}: exact {} sampled {}", exact.cells.len(), sampled.cells.len());
    }

    // Criterion 8: alignment level vs epsilon.
    for lambda in [1e-3, 1e-4] {
        for (eps, sigma) in [(0.2, 0.3), (0.3, 0.3), (0.4, 0.3), (0.5, 0.3), (0.6, 0.3), (0.2, 0.0)] {
            let cfg = ExperimentConfig {
                kind: ExperimentKind::AlignProbe,
                data: InputSpec::Assumption1 { d: 5, beta_star: vec![1.0, 0.0, 0.0, 0.0, 0.0], epsilon: 0.1 },
                teacher: TeacherSpec::linear(vec![1.0, 0.0, 0.0, 0.0, 0.0], sigma),
                init: InitSpec::Dominated { lambda },
                optimizer: OptimizerSpec::gd(1e-3),
                n_values: vec![10_000],
                seeds: vec![3],
                m: 200,
                probe_interval: 10_000,
                align_epsilon: eps,
                ..ExperimentConfig::default()
            };
            let res = runner::run_align_probe(&cfg, None).unwrap();
            println!("crit8 lambda={lambda} eps={eps} sigma={sigma}: steps={} min_cos={:.4}",
                     res.steps, res.min_cos_by_seed[0].1);
        }
    }
}
