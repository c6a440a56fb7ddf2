use alignlab_core::data::{gen_dataset, InputSpec, TeacherSpec};
use alignlab_core::network::{init, Activation, InitSpec};
use alignlab_core::optim::*;

fn main() {
    let d = 2;
    let spec = InputSpec::StandardGaussian { d };
    let teacher = TeacherSpec::linear(vec![1.0, -0.5], 0.1);
    let ds = gen_dataset(&spec, &teacher, 50, 7).unwrap();
    let mut gaps = Vec::new();
    for (lr, steps) in [(1e-2, 10_000u64), (5e-3, 20_000), (2.5e-3, 40_000)] {
        let p = init(&InitSpec::Dominated { lambda: 1e-2 }, 100, d, Activation::Relu, 7).unwrap();
        let opt = OptimizerSpec::gd(lr);
        let stop = StopSpec { max_steps: steps, loss_tol: 0.0, param_rel_change_tol: 0.0, window_steps: u64::MAX };
        let out = train(p, &ds, &opt, &stop, &ProbeConfig { interval: steps }, 7).unwrap();
        let gap = out.trajectory.last().unwrap().balancedness_gap;
        println!("lr={lr}: steps={steps} final_loss={:.3e} gap={:.4e} flips={} bound50lr={}", out.final_loss, gap, out.max_sign_flips, 50.0*lr);
        gaps.push(gap);
    }
    println!("ratios: {:.3}, {:.3}", gaps[0]/gaps[1], gaps[1]/gaps[2]);
}
