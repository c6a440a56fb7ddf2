use alignlab_core::data::{gen_dataset, InputSpec, TeacherSpec};
use alignlab_core::network::{init, Activation, InitSpec, VarianceRule};
use alignlab_core::optim::*;
use std::time::Instant;

fn main() {
    let d = 5;
    let spec = InputSpec::StandardGaussian { d };
    let teacher = TeacherSpec::linear(vec![1.0, 0.0, 0.0, 0.0, 0.0], 0.3);
    for (m, act, steps) in [(1000usize, Activation::Relu, 20_000u64), (1000, Activation::Gelu, 4_000)] {
        let ds = gen_dataset(&spec, &teacher, 500, 1).unwrap();
        let p = init(&InitSpec::GaussianIid { variance_rule: VarianceRule::OverM, base_variance: 1e-5 }, m, d, act, 1).unwrap();
        let opt = OptimizerSpec::sgd(0.01, 32);
        let stop = StopSpec { max_steps: steps, loss_tol: 0.0, param_rel_change_tol: 0.0, window_steps: u64::MAX };
        let t = Instant::now();
        let out = train(p, &ds, &opt, &stop, &ProbeConfig { interval: 10_000 }, 1).unwrap();
        let dt = t.elapsed().as_secs_f64();
        println!("{act:?} m={m}: {} steps in {:.2}s -> {:.0} steps/s; loss(L) {:.5}", out.steps, dt, out.steps as f64 / dt, out.final_loss);
    }
}
