//! Reference estimators and evaluation metrics: OLS (global and sign-split),
//! the two-ReLU limit predictor, Monte-Carlo test losses, cosine histograms
//! and neuron clustering.

use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::data::{split_signs, Dataset, InputSpec, TeacherSpec};
use crate::error::{Error, Result};
use crate::network::NetParams;
use crate::rng;
use crate::vecops::{cosine, dot, norm2};

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsResult {
    pub beta: Vec<f64>,
    /// Condition number of the Gram matrix X^T X (squared singular value
    /// ratio of the design).
    pub gram_condition: f64,
    /// Plain mean squared residual.
    pub residual_mse: f64,
    /// Minimum-norm solution was returned for a rank-deficient design.
    pub rank_deficient: bool,
}

/// Least squares via orthogonal factorization (SVD); rank deficiency yields
/// the minimum-norm solution plus a flag.
pub fn ols(x: &[f64], n: usize, d: usize, y: &[f64]) -> Result<OlsResult> {
    if n == 0 || d == 0 {
        return Err(Error::Empty("design"));
    }
    assert_eq!(x.len(), n * d);
    assert_eq!(y.len(), n);
    let design = DMatrix::from_fn(n, d, |k, j| x[k * d + j]);
    let rhs = DVector::from_column_slice(y);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let smin = svd.singular_values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let smin = if svd.singular_values.len() < d { 0.0 } else { smin };
    let tol = smax * 1e-12;
    let rank_deficient = smin <= tol;
    let beta = svd
        .solve(&rhs, tol)
        .map_err(|e| Error::InvalidSpec(format!("SVD solve failed: {e}")))?;
    let resid = &rhs - design * &beta;
    let residual_mse = resid.iter().map(|r| r * r).sum::<f64>() / n as f64;
    Ok(OlsResult {
        beta: beta.as_slice().to_vec(),
        gram_condition: if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY },
        residual_mse,
        rank_deficient,
    })
}

pub fn ols_dataset(dataset: &Dataset) -> Result<OlsResult> {
    ols(&dataset.x, dataset.n, dataset.d, &dataset.y)
}

/// OLS on each half of the sign split of the data along `beta_ref`.
pub fn ols_split(dataset: &Dataset, beta_ref: &[f64]) -> Result<(OlsResult, OlsResult)> {
    let split = split_signs(dataset, beta_ref)?;
    let sub = |idx: &[usize]| -> Result<OlsResult> {
        if idx.is_empty() {
            return Err(Error::Empty("sign-split half"));
        }
        let mut x = Vec::with_capacity(idx.len() * dataset.d);
        let mut y = Vec::with_capacity(idx.len());
        for &k in idx {
            x.extend_from_slice(dataset.row(k));
            y.push(dataset.y[k]);
        }
        ols(&x, idx.len(), dataset.d, &y)
    };
    Ok((sub(&split.pos_indices)?, sub(&split.neg_indices)?))
}

// ---------------------------------------------------------------------------
// Limit predictor
// ---------------------------------------------------------------------------

/// The two-ReLU limit profile `h(x) = (beta_+^T x)_+ - (-beta_-^T x)_+`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPredictor {
    pub beta_plus: Vec<f64>,
    pub beta_minus: Vec<f64>,
}

impl LimitPredictor {
    pub fn from_split(plus: &OlsResult, minus: &OlsResult) -> LimitPredictor {
        LimitPredictor {
            beta_plus: plus.beta.clone(),
            beta_minus: minus.beta.clone(),
        }
    }
}

pub fn limit_predict(lp: &LimitPredictor, x: &[f64]) -> f64 {
    dot(&lp.beta_plus, x).max(0.0) - (-dot(&lp.beta_minus, x)).max(0.0)
}

// ---------------------------------------------------------------------------
// Test metrics
// ---------------------------------------------------------------------------

/// Anything that can be scored on fresh samples.
#[derive(Debug, Clone, Copy)]
pub enum Predictor<'a> {
    Net(&'a NetParams),
    Limit(&'a LimitPredictor),
    /// A plain linear predictor, e.g. an OLS estimate.
    LinearBeta(&'a [f64]),
    /// The noise-free teacher itself.
    Teacher,
}

impl Predictor<'_> {
    fn eval(&self, x: &[f64], teacher: &TeacherSpec) -> f64 {
        match self {
            Predictor::Net(p) => p.forward(x).expect("dims checked"),
            Predictor::Limit(lp) => limit_predict(lp, x),
            Predictor::LinearBeta(b) => dot(b, x),
            Predictor::Teacher => teacher.eval(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    /// Monte-Carlo mean of `(f(x) - y)^2 / 2` (the training-loss convention).
    pub test_loss_half: f64,
    /// Monte-Carlo mean of `(f(x) - y)^2` (the convention the loss plots
    /// compare against sigma^2).
    pub test_mse: f64,
    /// `test_mse - sigma^2`.
    pub excess_risk: f64,
}

/// Monte-Carlo test metrics on `n_test` fresh samples. The sample stream
/// depends only on `(seed, input_spec, teacher)`, so scoring several
/// predictors with the same seed gives paired comparisons.
pub fn test_metrics(
    predictor: Predictor<'_>,
    input_spec: &InputSpec,
    teacher: &TeacherSpec,
    n_test: usize,
    seed: u64,
) -> Result<TestMetrics> {
    if n_test == 0 {
        return Err(Error::Empty("test set"));
    }
    let d = input_spec.dim();
    let mut rng = rng::stream(seed, "test");
    let mut x = vec![0.0; d];
    let mut sum_sq = 0.0;
    for _ in 0..n_test {
        sample_test_row(input_spec, &mut rng, &mut x)?;
        let mut y = teacher.eval(&x);
        if teacher.noise_std > 0.0 {
            let eta: f64 = StandardNormal.sample(&mut rng);
            y += teacher.noise_std * eta;
        }
        let r = predictor.eval(&x, teacher) - y;
        sum_sq += r * r;
    }
    let test_mse = sum_sq / n_test as f64;
    Ok(TestMetrics {
        test_loss_half: 0.5 * test_mse,
        test_mse,
        excess_risk: test_mse - teacher.sigma2(),
    })
}

/// Relative L2(mu_X) gap between two predictors:
/// `|f - g|_{L2} / |g|_{L2}` estimated on `n_test` fresh inputs.
pub fn l2_relative_gap(
    f: Predictor<'_>,
    g: Predictor<'_>,
    input_spec: &InputSpec,
    teacher: &TeacherSpec,
    n_test: usize,
    seed: u64,
) -> Result<f64> {
    if n_test == 0 {
        return Err(Error::Empty("test set"));
    }
    let d = input_spec.dim();
    let mut rng = rng::stream(seed, "l2gap");
    let mut x = vec![0.0; d];
    let mut num = 0.0;
    let mut den = 0.0;
    for _ in 0..n_test {
        sample_test_row(input_spec, &mut rng, &mut x)?;
        let fv = f.eval(&x, teacher);
        let gv = g.eval(&x, teacher);
        num += (fv - gv) * (fv - gv);
        den += gv * gv;
    }
    Ok((num / den.max(f64::MIN_POSITIVE)).sqrt())
}

fn sample_test_row(input_spec: &InputSpec, rng: &mut rng::Stream, x: &mut [f64]) -> Result<()> {
    match input_spec {
        InputSpec::OrthogonalBasis { .. } => Err(Error::NoClosedForm(
            "orthogonal-basis data has no sampling distribution".into(),
        )),
        _ => {
            input_spec.sample_row(rng, x);
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Cosine histogram & clustering
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineHistogram {
    /// Bin counts over [0, 1] (equal widths) of |cos(w_i, reference)|.
    pub counts: Vec<usize>,
    /// Zero-norm neurons are excluded from the histogram, counted here.
    pub zero_norm_count: usize,
    /// Absolute cosines, sorted ascending (for exact quantile queries).
    pub cosines: Vec<f64>,
}

impl CosineHistogram {
    /// Fraction of (nonzero) neurons with |cos| >= t.
    pub fn fraction_above(&self, t: f64) -> f64 {
        if self.cosines.is_empty() {
            return 0.0;
        }
        let above = self.cosines.iter().filter(|&&c| c >= t).count();
        above as f64 / self.cosines.len() as f64
    }
}

pub fn cosine_histogram(params: &NetParams, reference: &[f64], bins: usize) -> Result<CosineHistogram> {
    if norm2(reference) == 0.0 {
        return Err(Error::ZeroBeta);
    }
    assert!(bins >= 1);
    let mut counts = vec![0usize; bins];
    let mut cosines = Vec::with_capacity(params.m);
    let mut zero_norm_count = 0;
    for i in 0..params.m {
        let w = params.w_row(i);
        if norm2(w) == 0.0 {
            zero_norm_count += 1;
            continue;
        }
        let c = cosine(w, reference).abs();
        cosines.push(c);
        let b = ((c * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    cosines.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(CosineHistogram {
        counts,
        zero_norm_count,
        cosines,
    })
}

/// Number of direction clusters among active neurons: greedy leader
/// clustering at the given cosine threshold, neurons visited by decreasing
/// weight `|a_i| |w_i|`; neurons below 1e-3 of the top weight are dormant
/// and ignored.
pub fn effective_width(params: &NetParams, cos_threshold: f64) -> usize {
    assert!(cos_threshold > 0.0 && cos_threshold < 1.0);
    let mut weights: Vec<(f64, usize)> = (0..params.m)
        .map(|i| (params.a[i].abs() * norm2(params.w_row(i)), i))
        .collect();
    let max_w = weights.iter().map(|(w, _)| *w).fold(0.0, f64::max);
    if max_w == 0.0 {
        return 0;
    }
    weights.retain(|(w, _)| *w >= 1e-3 * max_w);
    weights.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    let mut leaders: Vec<&[f64]> = Vec::new();
    for (_, i) in &weights {
        let w = params.w_row(*i);
        // Signed cosine: opposite rays are distinct clusters.
        if !leaders.iter().any(|l| cosine(w, l) >= cos_threshold) {
            leaders.push(w);
        }
    }
    leaders.len()
}

/// Train loss at or below `tol * sigma^2` (plain-MSE convention); absolute
/// fallback 1e-4 for noiseless teachers.
pub fn interpolation_check(params: &NetParams, dataset: &Dataset, tol: f64) -> Result<bool> {
    let train_mse = 2.0 * crate::network::train_loss(params, dataset)?;
    let sigma2 = dataset.sigma2();
    Ok(if sigma2 > 0.0 {
        train_mse <= tol * sigma2
    } else {
        train_mse <= 1e-4
    })
}

pub const INTERPOLATION_TOL: f64 = 1.0 / 3.0;
