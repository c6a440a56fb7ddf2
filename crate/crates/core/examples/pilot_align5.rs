use alignlab_core::data::{InputSpec, TeacherSpec};
use alignlab_core::harness::{runner, ExperimentConfig, ExperimentKind};
use alignlab_core::network::InitSpec;
use alignlab_core::optim::OptimizerSpec;

fn main() {
    let d = 5;
    let mut b = vec![0.0; d]; b[0] = 1.0;
    let cfg = ExperimentConfig {
        kind: ExperimentKind::AlignProbe,
        data: InputSpec::Assumption1 { d, beta_star: b.clone(), epsilon: 0.1 },
        teacher: TeacherSpec::linear(b, 0.3),
        init: InitSpec::Dominated { lambda: 1e-5 },
        optimizer: OptimizerSpec::gd(1e-3),
        n_values: vec![10_000],
        seeds: vec![3],
        m: 200,
        probe_interval: 10_000,
        align_epsilon: 0.2,
        ..ExperimentConfig::default()
    };
    let res = runner::run_align_probe(&cfg, None).unwrap();
    println!("lambda=1e-5 eps=0.2: steps={} min_cos={:.4}", res.steps, res.min_cos_by_seed[0].1);
}
