//! Two-layer network `h(x) = sum_i a_i sigma(w_i^T x)` (no bias terms),
//! its exact gradients, activation signatures and initialization schemes.

use serde::{Deserialize, Serialize};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::vecops::{dot, norm2};

/// Default relative zero band for activation signatures.
pub const PATTERN_ZETA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Gelu,
}

impl Activation {
    /// sigma(z). GeLU is the exact erf form `z * Phi(z)`.
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Gelu => z * normal_cdf(z),
        }
    }

    /// sigma'(z). The ReLU subgradient at 0 is taken as 0, so exactly-dead
    /// neurons stay dead.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => normal_cdf(z) + z * normal_pdf(z),
        }
    }
}

#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Network parameters. `w` is row-major m*d; row i is the inner weight w_i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub m: usize,
    pub d: usize,
    pub a: Vec<f64>,
    pub w: Vec<f64>,
    pub activation: Activation,
}

impl NetParams {
    #[inline]
    pub fn w_row(&self, i: usize) -> &[f64] {
        &self.w[i * self.d..(i + 1) * self.d]
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                context: "forward input",
                expected: self.d,
                got: x.len(),
            });
        }
        let mut out = 0.0;
        for i in 0..self.m {
            out += self.a[i] * self.activation.apply(dot(self.w_row(i), x));
        }
        Ok(out)
    }

    /// Largest |a_i(t)^2 - |w_i(t)|^2 - (a_i(0)^2 - |w_i(0)|^2)|. The flow
    /// conserves each per-neuron difference exactly; discrete steps drift at
    /// first order in the learning rate.
    pub fn balancedness_gap(&self, at_init: &NetParams) -> Result<f64> {
        if self.m != at_init.m || self.d != at_init.d {
            return Err(Error::DimensionMismatch {
                context: "balancedness_gap shapes",
                expected: at_init.m * at_init.d,
                got: self.m * self.d,
            });
        }
        let mut gap: f64 = 0.0;
        for i in 0..self.m {
            let now = self.a[i] * self.a[i] - dot(self.w_row(i), self.w_row(i));
            let w0 = at_init.w_row(i);
            let then = at_init.a[i] * at_init.a[i] - dot(w0, w0);
            gap = gap.max((now - then).abs());
        }
        Ok(gap)
    }

    /// Number of output weights whose sign differs from `at_init`.
    pub fn sign_flips(&self, at_init: &NetParams) -> usize {
        self.a
            .iter()
            .zip(at_init.a.iter())
            .filter(|(now, then)| *now * *then < 0.0)
            .count()
    }
}

/// Empirical square loss `(1/2n) sum_k (h(x_k) - y_k)^2`.
pub fn train_loss(params: &NetParams, dataset: &Dataset) -> Result<f64> {
    if dataset.n == 0 {
        return Err(Error::Empty("dataset"));
    }
    if dataset.d != params.d {
        return Err(Error::DimensionMismatch {
            context: "train_loss dataset",
            expected: params.d,
            got: dataset.d,
        });
    }
    let mut s = 0.0;
    for k in 0..dataset.n {
        let r = params.forward(dataset.row(k))? - dataset.y[k];
        s += r * r;
    }
    Ok(s / (2.0 * dataset.n as f64))
}

/// Gradient of the batch loss w.r.t. (a, W).
#[derive(Debug, Clone)]
pub struct Grad {
    pub a: Vec<f64>,
    pub w: Vec<f64>,
}

/// Exact gradient of `(1/2|B|) sum_{k in B} (h(x_k) - y_k)^2`.
///
/// Per neuron this is `grad_w_i = -a_i * D_B(w_i, theta)` with
/// `D_B(w, theta) = (1/|B|) sum_k sigma'(x_k^T w)(y_k - h(x_k)) x_k`, and
/// `grad_a_i = -(1/|B|) sum_k sigma(x_k^T w_i)(y_k - h(x_k))`, which for the
/// 1-homogeneous ReLU equals `-w_i^T D_B(w_i, theta)`.
pub fn grad(params: &NetParams, dataset: &Dataset, batch: &[usize]) -> Result<Grad> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if dataset.d != params.d {
        return Err(Error::DimensionMismatch {
            context: "grad dataset",
            expected: params.d,
            got: dataset.d,
        });
    }
    let mut g = Grad {
        a: vec![0.0; params.m],
        w: vec![0.0; params.m * params.d],
    };
    let mut z = vec![0.0; params.m];
    accumulate_grad(params, dataset, batch, &mut g, &mut z);
    Ok(g)
}

/// Shared accumulation core for `grad` and the optimizer hot loop.
/// `z` is an m-sized scratch buffer. Summation order is fixed: samples in
/// batch order, neurons in index order.
pub(crate) fn accumulate_grad(
    params: &NetParams,
    dataset: &Dataset,
    batch: &[usize],
    g: &mut Grad,
    z: &mut [f64],
) {
    let d = params.d;
    let act = params.activation;
    let inv_b = 1.0 / batch.len() as f64;
    for &k in batch {
        let x = dataset.row(k);
        let mut pred = 0.0;
        for i in 0..params.m {
            let zi = dot(&params.w[i * d..(i + 1) * d], x);
            z[i] = zi;
            pred += params.a[i] * act.apply(zi);
        }
        let r = (pred - dataset.y[k]) * inv_b;
        for i in 0..params.m {
            let zi = z[i];
            g.a[i] += r * act.apply(zi);
            let c = r * params.a[i] * act.derivative(zi);
            if c != 0.0 {
                let row = &mut g.w[i * d..(i + 1) * d];
                for j in 0..d {
                    row[j] += c * x[j];
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// Base law of the unscaled inner weights for `GenericDominated`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InnerLaw {
    /// Uniform on the ball of this radius (must be <= 1 for domination).
    Ball { radius: f64 },
    /// Uniform on the sphere of this radius.
    Sphere { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VarianceRule {
    /// Per-entry variance `base_variance / m`.
    OverM,
    /// Per-entry variance `base_variance / sqrt(m)`.
    OverSqrtM,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitSpec {
    /// `w_i ~ 0.5 lambda m^{-1/2} U(ball)`, `a_i ~ lambda m^{-1/2} U{-1,+1}`;
    /// forces `|a_i| >= 2 |w_i|`.
    Dominated { lambda: f64 },
    /// `(a_i, w_i) = lambda m^{-1/2} (a~_i, w~_i)` with `a~_i = +-1` and
    /// `w~_i` from `base_law`; the domination inequalities are asserted after
    /// sampling.
    GenericDominated { lambda: f64, base_law: InnerLaw },
    /// Every entry of a and W i.i.d. centered Gaussian with variance given
    /// by the rule.
    GaussianIid {
        variance_rule: VarianceRule,
        base_variance: f64,
    },
}

impl InitSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitSpec::Dominated { lambda } => {
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return Err(Error::InvalidSpec("lambda must be positive".into()));
                }
            }
            InitSpec::GenericDominated { lambda, base_law } => {
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return Err(Error::InvalidSpec("lambda must be positive".into()));
                }
                let r = match base_law {
                    InnerLaw::Ball { radius } | InnerLaw::Sphere { radius } => *radius,
                };
                if !(r > 0.0 && r <= 1.0) {
                    return Err(Error::InvalidSpec(
                        "inner-law radius must lie in (0,1] to keep |a~| >= |w~|".into(),
                    ));
                }
            }
            InitSpec::GaussianIid { base_variance, .. } => {
                if !(base_variance.is_finite() && *base_variance > 0.0) {
                    return Err(Error::InvalidSpec("base_variance must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Draw initial parameters; deterministic in `seed`.
pub fn init(
    spec: &InitSpec,
    m: usize,
    d: usize,
    activation: Activation,
    seed: u64,
) -> Result<NetParams> {
    spec.validate()?;
    if m == 0 || d == 0 {
        return Err(Error::InvalidSpec("m and d must be >= 1".into()));
    }
    let mut rng = rng::stream(seed, "init");
    let mut params = NetParams {
        m,
        d,
        a: vec![0.0; m],
        w: vec![0.0; m * d],
        activation,
    };
    let root_m = (m as f64).sqrt();
    match spec {
        InitSpec::Dominated { lambda } => {
            for i in 0..m {
                params.a[i] = lambda / root_m * rademacher(&mut rng);
                sample_ball(&mut rng, &mut params.w[i * d..(i + 1) * d]);
                for v in &mut params.w[i * d..(i + 1) * d] {
                    *v *= 0.5 * lambda / root_m;
                }
            }
        }
        InitSpec::GenericDominated { lambda, base_law } => {
            let mut sum_a2 = 0.0;
            for i in 0..m {
                let ai = rademacher(&mut rng);
                sum_a2 += ai * ai;
                let row = &mut params.w[i * d..(i + 1) * d];
                match base_law {
                    InnerLaw::Ball { radius } => {
                        sample_ball(&mut rng, row);
                        for v in row.iter_mut() {
                            *v *= radius;
                        }
                    }
                    InnerLaw::Sphere { radius } => {
                        sample_sphere(&mut rng, row);
                        for v in row.iter_mut() {
                            *v *= radius;
                        }
                    }
                }
                // Post-hoc domination check (1e-12 slack: a unit-sphere
                // sample can normalize to 1 + eps).
                assert!(
                    ai.abs() >= norm2(row) - 1e-12,
                    "domination violated: |a~_{i}| < |w~_{i}|"
                );
                params.a[i] = lambda / root_m * ai;
                for v in row.iter_mut() {
                    *v *= lambda / root_m;
                }
            }
            assert!(sum_a2 / m as f64 <= 1.0 + 1e-12, "mean a~^2 exceeds 1");
        }
        InitSpec::GaussianIid {
            variance_rule,
            base_variance,
        } => {
            let var = match variance_rule {
                VarianceRule::OverM => base_variance / m as f64,
                VarianceRule::OverSqrtM => base_variance / root_m,
            };
            let std = var.sqrt();
            for i in 0..m {
                params.a[i] = std * sample_normal(&mut rng);
            }
            for v in params.w.iter_mut() {
                *v = std * sample_normal(&mut rng);
            }
        }
    }
    Ok(params)
}

fn rademacher(rng: &mut rng::Stream) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn sample_normal(rng: &mut rng::Stream) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform on the unit sphere.
fn sample_sphere(rng: &mut rng::Stream, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = sample_normal(rng);
        }
        let n = norm2(out);
        if n > 1e-12 {
            for v in out.iter_mut() {
                *v /= n;
            }
            return;
        }
    }
}

/// Uniform on the unit ball (direction uniform, radius ~ U^{1/d}).
fn sample_ball(rng: &mut rng::Stream, out: &mut [f64]) {
    sample_sphere(rng, out);
    let u: f64 = rng.random();
    let r = u.powf(1.0 / out.len() as f64);
    for v in out.iter_mut() {
        *v *= r;
    }
}

// ---------------------------------------------------------------------------
// Activation signatures
// ---------------------------------------------------------------------------

/// Sign vector of `w^T x_k` over a dataset, in {-1, 0, +1}^n. Entries within
/// the relative band `|w^T x_k| <= zeta |w| |x_k|` count as zero.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActivationPattern(pub Vec<i8>);

impl ActivationPattern {
    pub fn negated(&self) -> ActivationPattern {
        ActivationPattern(self.0.iter().map(|s| -s).collect())
    }

    pub fn is_strict(&self) -> bool {
        self.0.iter().all(|&s| s != 0)
    }

    /// Equality up to the zero-band slack: a 0 entry matches either sign.
    pub fn matches_loose(&self, other: &ActivationPattern) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(other.0.iter())
                .all(|(&a, &b)| a == 0 || b == 0 || a == b)
    }
}

pub fn activation_pattern(w: &[f64], dataset: &Dataset, zeta: f64) -> ActivationPattern {
    let nw = norm2(w);
    let mut signs = Vec::with_capacity(dataset.n);
    for k in 0..dataset.n {
        let x = dataset.row(k);
        let v = dot(w, x);
        let band = zeta * nw * norm2(x);
        signs.push(if v > band {
            1
        } else if v < -band {
            -1
        } else {
            0
        });
    }
    ActivationPattern(signs)
}

// ---------------------------------------------------------------------------
// Parameter checkpoints
// ---------------------------------------------------------------------------

const PARAMS_JSON_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamsRecord {
    version: u32,
    activation: Activation,
    m: usize,
    d: usize,
    a: Vec<f64>,
    w: Vec<Vec<f64>>,
    init_spec: Option<InitSpec>,
    seed: Option<u64>,
}

impl NetParams {
    pub fn to_json(&self, init_spec: Option<&InitSpec>, seed: Option<u64>) -> Result<String> {
        let rec = ParamsRecord {
            version: PARAMS_JSON_VERSION,
            activation: self.activation,
            m: self.m,
            d: self.d,
            a: self.a.clone(),
            w: (0..self.m).map(|i| self.w_row(i).to_vec()).collect(),
            init_spec: init_spec.cloned(),
            seed,
        };
        Ok(serde_json::to_string(&rec)?)
    }

    pub fn from_json(s: &str) -> Result<NetParams> {
        let rec: ParamsRecord = serde_json::from_str(s)?;
        if rec.version != PARAMS_JSON_VERSION {
            return Err(Error::VersionMismatch {
                expected: PARAMS_JSON_VERSION,
                found: rec.version,
            });
        }
        if rec.a.len() != rec.m || rec.w.len() != rec.m || rec.w.iter().any(|r| r.len() != rec.d) {
            return Err(Error::IncompatibleCheckpoint(
                "parameter shapes do not match declared (m, d)".into(),
            ));
        }
        Ok(NetParams {
            m: rec.m,
            d: rec.d,
            a: rec.a,
            w: rec.w.into_iter().flatten().collect(),
            activation: rec.activation,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_dataset, InputSpec, TeacherSpec};
    use approx::assert_relative_eq;

    fn tiny_dataset(x: Vec<f64>, y: Vec<f64>, d: usize) -> Dataset {
        let n = y.len();
        Dataset {
            n,
            d,
            x,
            y,
            teacher: TeacherSpec::linear(vec![1.0; d], 0.0),
            input_spec: InputSpec::StandardGaussian { d },
            seed: 0,
        }
    }

    #[test]
    fn forward_single_neuron_relu() {
        let p = NetParams {
            m: 1,
            d: 2,
            a: vec![1.0],
            w: vec![1.0, -1.0],
            activation: Activation::Relu,
        };
        assert_eq!(p.forward(&[2.0, 1.0]).unwrap(), 1.0);

        let dead = NetParams {
            m: 1,
            d: 2,
            a: vec![-2.0],
            w: vec![1.0, 0.0],
            activation: Activation::Relu,
        };
        assert_eq!(dead.forward(&[-3.0, 7.0]).unwrap(), 0.0);
    }

    #[test]
    fn forward_gelu_normal_cdf() {
        let p = NetParams {
            m: 1,
            d: 2,
            a: vec![1.0],
            w: vec![1.0, 0.0],
            activation: Activation::Gelu,
        };
        // Phi(1) from the high-precision normal CDF.
        assert_relative_eq!(p.forward(&[1.0, 0.0]).unwrap(), 0.841344746068543, epsilon = 1e-12);
    }

    #[test]
    fn loss_all_zero_params() {
        let ds = tiny_dataset(vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 2.0], 2);
        let p = NetParams {
            m: 3,
            d: 2,
            a: vec![0.0; 3],
            w: vec![0.0; 6],
            activation: Activation::Relu,
        };
        assert_eq!(train_loss(&p, &ds).unwrap(), 1.25);
    }

    #[test]
    fn loss_interpolating_params_is_zero() {
        // One positive and one mirrored negative neuron realize y = x1.
        let ds = tiny_dataset(vec![2.0, 0.5, -1.0, 0.3], vec![2.0, -1.0], 2);
        let p = NetParams {
            m: 2,
            d: 2,
            a: vec![1.0, -1.0],
            w: vec![1.0, 0.0, -1.0, 0.0],
            activation: Activation::Relu,
        };
        assert_eq!(train_loss(&p, &ds).unwrap(), 0.0);
    }

    #[test]
    fn loss_matches_compensated_recomputation() {
        let spec = InputSpec::StandardGaussian { d: 4 };
        let teacher = TeacherSpec::linear(vec![1.0, 0.0, 0.0, 0.0], 0.5);
        let ds = gen_dataset(&spec, &teacher, 300, 9).unwrap();
        let p = init(
            &InitSpec::GaussianIid {
                variance_rule: VarianceRule::OverM,
                base_variance: 1.0,
            },
            40,
            4,
            Activation::Relu,
            5,
        )
        .unwrap();
        let fast = train_loss(&p, &ds).unwrap();
        let slow = crate::vecops::kahan_sum((0..ds.n).map(|k| {
            let r = p.forward(ds.row(k)).unwrap() - ds.y[k];
            r * r
        })) / (2.0 * ds.n as f64);
        assert_relative_eq!(fast, slow, max_relative = 1e-12);
    }

    #[test]
    fn zero_outer_weights_zero_labels_give_zero_gradient() {
        let ds = tiny_dataset(vec![1.0, 2.0, -0.5, 0.25], vec![0.0, 0.0], 2);
        let p = NetParams {
            m: 2,
            d: 2,
            a: vec![0.0, 0.0],
            w: vec![0.3, -0.1, 0.7, 0.2],
            activation: Activation::Relu,
        };
        let g = grad(&p, &ds, &[0, 1]).unwrap();
        assert!(g.a.iter().all(|&v| v == 0.0));
        assert!(g.w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn growing_an_aligned_neuron_decreases_loss() {
        // Positive neuron active on every point of a noiseless linear
        // dataset: grad_a must be negative while the fit is still small.
        let ds = tiny_dataset(vec![1.0, 0.2, 2.0, -0.1, 0.5, 0.05], vec![1.0, 2.0, 0.5], 2);
        let p = NetParams {
            m: 1,
            d: 2,
            a: vec![1e-3],
            w: vec![1e-3, 0.0],
            activation: Activation::Relu,
        };
        let g = grad(&p, &ds, &[0, 1, 2]).unwrap();
        assert!(g.a[0] < 0.0);
    }

    #[test]
    fn dominated_init_shapes() {
        let lambda = 1e-3;
        let p = init(&InitSpec::Dominated { lambda }, 100, 3, Activation::Relu, 4).unwrap();
        let bound = lambda / (100f64).sqrt();
        for i in 0..p.m {
            assert_eq!(p.a[i].abs(), bound);
            assert!(norm2(p.w_row(i)) <= 0.5 * bound + 1e-18);
        }
    }

    #[test]
    fn dominated_sign_balance() {
        let p = init(&InitSpec::Dominated { lambda: 0.1 }, 100_000, 2, Activation::Relu, 9).unwrap();
        let frac = p.a.iter().filter(|&&a| a > 0.0).count() as f64 / p.m as f64;
        assert!((0.49..=0.51).contains(&frac), "frac = {frac}");
    }

    #[test]
    fn gaussian_init_variance() {
        let p = init(
            &InitSpec::GaussianIid {
                variance_rule: VarianceRule::OverM,
                base_variance: 1e-5,
            },
            10_000,
            5,
            Activation::Relu,
            2,
        )
        .unwrap();
        let entries: Vec<f64> = p.a.iter().chain(p.w.iter()).copied().collect();
        let var = entries.iter().map(|v| v * v).sum::<f64>() / entries.len() as f64;
        let expected = 1e-5 / 10_000f64;
        assert!(
            (var - expected).abs() <= 0.1 * expected,
            "var = {var}, expected {expected}"
        );
    }

    #[test]
    fn generic_dominated_asserts_hold() {
        let spec = InitSpec::GenericDominated {
            lambda: 1e-2,
            base_law: InnerLaw::Sphere { radius: 1.0 },
        };
        let p = init(&spec, 500, 4, Activation::Relu, 3).unwrap();
        let scale = 1e-2 / (500f64).sqrt();
        for i in 0..p.m {
            assert!(p.a[i].abs() >= norm2(p.w_row(i)) - 1e-18);
            assert_relative_eq!(p.a[i].abs(), scale, max_relative = 1e-12);
        }
    }

    #[test]
    fn pattern_signs_and_band() {
        let ds = tiny_dataset(vec![1.0, 1.0, -1.0, 1.0, 0.0, 1.0], vec![0.0; 3], 2);
        let pat = activation_pattern(&[1.0, 0.0], &ds, PATTERN_ZETA);
        assert_eq!(pat.0, vec![1, -1, 0]);
    }

    #[test]
    fn pattern_odd_symmetry_and_scale_invariance() {
        let spec = InputSpec::StandardGaussian { d: 3 };
        let teacher = TeacherSpec::linear(vec![1.0, 0.0, 0.0], 0.1);
        let mut dirs = rng::stream(12, "test/pat");
        for _ in 0..100 {
            let ds = gen_dataset(&spec, &teacher, 20, dirs.random()).unwrap();
            let mut w = [0.0; 3];
            for v in w.iter_mut() {
                *v = sample_normal(&mut dirs);
            }
            let p = activation_pattern(&w, &ds, PATTERN_ZETA);
            let neg: Vec<f64> = w.iter().map(|v| -v).collect();
            assert_eq!(activation_pattern(&neg, &ds, PATTERN_ZETA), p.negated());
            let scaled: Vec<f64> = w.iter().map(|v| 3.7 * v).collect();
            assert_eq!(activation_pattern(&scaled, &ds, PATTERN_ZETA), p);
        }
    }

    #[test]
    fn distinct_patterns_d2_n3() {
        // Generic d=2, n=3 data: exactly 6 strict patterns among random
        // directions (2 * sum_{k<=1} C(2,k)).
        let spec = InputSpec::StandardGaussian { d: 2 };
        let teacher = TeacherSpec::linear(vec![1.0, 0.0], 0.0);
        let ds = gen_dataset(&spec, &teacher, 3, 71).unwrap();
        let mut rng = rng::stream(71, "test/dirs");
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..100_000 {
            let w = [sample_normal(&mut rng), sample_normal(&mut rng)];
            let p = activation_pattern(&w, &ds, PATTERN_ZETA);
            if p.is_strict() {
                seen.insert(p);
            }
        }
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn balancedness_gap_zero_on_identical() {
        let p = init(&InitSpec::Dominated { lambda: 0.1 }, 10, 2, Activation::Relu, 1).unwrap();
        assert_eq!(p.balancedness_gap(&p).unwrap(), 0.0);
    }

    #[test]
    fn forward_homogeneity_relu() {
        // Replacing (a_i, w_i) by (c a_i, w_i / c), c > 0, preserves h.
        let ds = tiny_dataset(vec![0.3, -0.4, 1.2, 0.9], vec![0.0, 0.0], 2);
        let p = NetParams {
            m: 2,
            d: 2,
            a: vec![0.7, -1.1],
            w: vec![0.2, 0.4, -0.3, 0.8],
            activation: Activation::Relu,
        };
        let c = 2.5;
        let q = NetParams {
            a: p.a.iter().map(|a| c * a).collect(),
            w: p.w.iter().map(|w| w / c).collect(),
            ..p.clone()
        };
        for k in 0..ds.n {
            assert_relative_eq!(
                p.forward(ds.row(k)).unwrap(),
                q.forward(ds.row(k)).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn params_json_round_trip() {
        let spec = InitSpec::Dominated { lambda: 1e-2 };
        let p = init(&spec, 7, 3, Activation::Gelu, 42).unwrap();
        let js = p.to_json(Some(&spec), Some(42)).unwrap();
        let q = NetParams::from_json(&js).unwrap();
        assert_eq!(p, q);
    }
}
