//! Synthetic regression datasets with analytic ground truth.
//!
//! Inputs come from one of three families:
//! * `StandardGaussian` — i.i.d. N(0, I_d) rows, covariance exactly I.
//! * `Assumption1` — the margin construction `x = s·u + sqrt(d-1)·v` with
//!   `u = beta*/|beta*|`, `s` uniform on `[-1-eps,-1+eps] ∪ [1-eps,1+eps]`
//!   and `v` uniform on the unit sphere of the complement of `u`. Every
//!   sample satisfies `|x^T beta*| >= (1-eps)|beta*|`, and the covariance is
//!   `I + (eps^2/3)·u u^T` in closed form.
//! * `OrthogonalBasis` — the first `n <= d` standard basis vectors with
//!   caller-provided labels, for the orthogonal-data toy cases.
//!
//! Labels are `teacher(x) + noise` with centered Gaussian noise of standard
//! deviation `noise_std`. Everything is deterministic in the dataset seed.

use serde::{Deserialize, Serialize};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::vecops::{dot, norm2};

/// Label-generating model. `noise_std` applies to every variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherSpec {
    pub kind: TeacherKind,
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TeacherKind {
    /// `f(x) = x^T beta_star`. A zero `beta_star` is allowed (pure-noise /
    /// zero-label datasets are used as degenerate test cases).
    Linear { beta_star: Vec<f64> },
    /// `f(x) = scale * sum_i (x^T beta_i)_+`.
    KRelu { betas: Vec<Vec<f64>>, scale: f64 },
}

impl TeacherSpec {
    pub fn linear(beta_star: Vec<f64>, noise_std: f64) -> Self {
        TeacherSpec {
            kind: TeacherKind::Linear { beta_star },
            noise_std,
        }
    }

    pub fn k_relu(betas: Vec<Vec<f64>>, scale: f64, noise_std: f64) -> Self {
        TeacherSpec {
            kind: TeacherKind::KRelu { betas, scale },
            noise_std,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            TeacherKind::Linear { beta_star } => beta_star.len(),
            TeacherKind::KRelu { betas, .. } => betas.first().map_or(0, Vec::len),
        }
    }

    /// Noise variance sigma^2.
    pub fn sigma2(&self) -> f64 {
        self.noise_std * self.noise_std
    }

    /// Noise-free teacher value at `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            TeacherKind::Linear { beta_star } => dot(beta_star, x),
            TeacherKind::KRelu { betas, scale } => {
                let mut s = 0.0;
                for b in betas {
                    s += dot(b, x).max(0.0);
                }
                scale * s
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.noise_std < 0.0 || !self.noise_std.is_finite() {
            return Err(Error::InvalidSpec("noise_std must be finite and >= 0".into()));
        }
        match &self.kind {
            TeacherKind::Linear { beta_star } => {
                if beta_star.is_empty() || beta_star.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSpec("beta_star must be nonempty and finite".into()));
                }
            }
            TeacherKind::KRelu { betas, scale } => {
                if betas.is_empty() {
                    return Err(Error::InvalidSpec("KRelu teacher needs at least one unit".into()));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::InvalidSpec("KRelu scale must be positive".into()));
                }
                let d = betas[0].len();
                if betas.iter().any(|b| b.len() != d || b.iter().any(|v| !v.is_finite())) {
                    return Err(Error::InvalidSpec("KRelu betas must be finite with equal dims".into()));
                }
            }
        }
        Ok(())
    }
}

/// Input distribution, with its analytic covariance when one exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InputSpec {
    StandardGaussian { d: usize },
    Assumption1 { d: usize, beta_star: Vec<f64>, epsilon: f64 },
    OrthogonalBasis { d: usize, labels: Vec<f64> },
}

impl InputSpec {
    pub fn dim(&self) -> usize {
        match self {
            InputSpec::StandardGaussian { d } => *d,
            InputSpec::Assumption1 { d, .. } => *d,
            InputSpec::OrthogonalBasis { d, .. } => *d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InputSpec::StandardGaussian { d } => {
                if *d == 0 {
                    return Err(Error::InvalidSpec("d must be >= 1".into()));
                }
            }
            InputSpec::Assumption1 { d, beta_star, epsilon } => {
                if *d == 0 {
                    return Err(Error::InvalidSpec("d must be >= 1".into()));
                }
                if beta_star.len() != *d {
                    return Err(Error::DimensionMismatch {
                        context: "Assumption1 beta_star",
                        expected: *d,
                        got: beta_star.len(),
                    });
                }
                if norm2(beta_star) == 0.0 {
                    return Err(Error::InvalidSpec("Assumption1 needs a nonzero beta_star".into()));
                }
                if !(*epsilon > 0.0 && *epsilon < 1.0) {
                    return Err(Error::InvalidSpec("Assumption1 epsilon must lie in (0,1)".into()));
                }
            }
            InputSpec::OrthogonalBasis { d, labels } => {
                if labels.is_empty() {
                    return Err(Error::Empty("OrthogonalBasis labels"));
                }
                if labels.len() > *d {
                    return Err(Error::InvalidSpec(format!(
                        "OrthogonalBasis requires n <= d (n={}, d={})",
                        labels.len(),
                        d
                    )));
                }
            }
        }
        Ok(())
    }

    /// Symmetric (x ~ -x) and continuous w.r.t. Lebesgue measure?
    pub fn is_symmetric_continuous(&self) -> bool {
        matches!(self, InputSpec::StandardGaussian { .. } | InputSpec::Assumption1 { .. })
    }

    /// Analytic covariance `Sigma = E[x x^T]`, row-major d*d.
    pub fn covariance(&self) -> Option<Vec<f64>> {
        let d = self.dim();
        match self {
            InputSpec::StandardGaussian { .. } => {
                let mut m = vec![0.0; d * d];
                for i in 0..d {
                    m[i * d + i] = 1.0;
                }
                Some(m)
            }
            InputSpec::Assumption1 { beta_star, epsilon, .. } => {
                let nb = norm2(beta_star);
                let u: Vec<f64> = beta_star.iter().map(|v| v / nb).collect();
                let c = epsilon * epsilon / 3.0;
                let mut m = vec![0.0; d * d];
                for i in 0..d {
                    for j in 0..d {
                        m[i * d + j] = c * u[i] * u[j];
                    }
                    m[i * d + i] += 1.0;
                }
                Some(m)
            }
            InputSpec::OrthogonalBasis { .. } => None,
        }
    }

    /// `Sigma * v` for the analytic covariance.
    pub fn covariance_times(&self, v: &[f64]) -> Option<Vec<f64>> {
        let cov = self.covariance()?;
        let d = self.dim();
        assert_eq!(v.len(), d);
        let mut out = vec![0.0; d];
        for i in 0..d {
            out[i] = dot(&cov[i * d..(i + 1) * d], v);
        }
        Some(out)
    }

    pub(crate) fn sample_row(&self, rng: &mut Stream, out: &mut [f64]) {
        match self {
            InputSpec::StandardGaussian { d } => {
                for j in 0..*d {
                    out[j] = StandardNormal.sample(rng);
                }
            }
            InputSpec::Assumption1 { d, beta_star, epsilon } => {
                let nb = norm2(beta_star);
                let side: bool = rng.random();
                let t: f64 = rng.random_range(-1.0..=1.0);
                let s = if side { 1.0 + epsilon * t } else { -1.0 - epsilon * t };
                // v: uniform on the unit sphere of the complement of beta*.
                for j in 0..*d {
                    out[j] = s * beta_star[j] / nb;
                }
                if *d > 1 {
                    let mut v = vec![0.0; *d];
                    loop {
                        for j in 0..*d {
                            v[j] = StandardNormal.sample(rng);
                        }
                        let proj = dot(&v, beta_star) / (nb * nb);
                        for j in 0..*d {
                            v[j] -= proj * beta_star[j];
                        }
                        let nv = norm2(&v);
                        if nv > 1e-12 {
                            let c = ((*d - 1) as f64).sqrt() / nv;
                            for j in 0..*d {
                                out[j] += c * v[j];
                            }
                            break;
                        }
                    }
                }
            }
            InputSpec::OrthogonalBasis { .. } => unreachable!("basis rows are not sampled"),
        }
    }
}

/// A generated dataset. `x` is row-major n*d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n: usize,
    pub d: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub teacher: TeacherSpec,
    pub input_spec: InputSpec,
    pub seed: u64,
}

impl Dataset {
    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.x[k * self.d..(k + 1) * self.d]
    }

    pub fn sigma2(&self) -> f64 {
        self.teacher.sigma2()
    }
}

/// Draw a dataset: rows i.i.d. from `input_spec`, labels `teacher(x) + eta`
/// with `eta ~ N(0, noise_std^2)`. Bit-reproducible in `seed`.
pub fn gen_dataset(
    input_spec: &InputSpec,
    teacher: &TeacherSpec,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    input_spec.validate()?;
    teacher.validate()?;
    if n == 0 {
        return Err(Error::Empty("dataset"));
    }
    let d = input_spec.dim();
    if teacher.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "teacher vs input_spec",
            expected: d,
            got: teacher.dim(),
        });
    }

    let mut x = vec![0.0; n * d];
    match input_spec {
        InputSpec::OrthogonalBasis { labels, .. } => {
            if labels.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "OrthogonalBasis labels vs n",
                    expected: n,
                    got: labels.len(),
                });
            }
            for k in 0..n {
                x[k * d + k] = 1.0;
            }
        }
        _ => {
            let mut rng = rng::stream(seed, "data/x");
            for k in 0..n {
                input_spec.sample_row(&mut rng, &mut x[k * d..(k + 1) * d]);
            }
        }
    }

    let mut y = vec![0.0; n];
    match input_spec {
        // Orthogonal-basis labels are pinned by the spec list, not the teacher.
        InputSpec::OrthogonalBasis { labels, .. } => y.copy_from_slice(labels),
        _ => {
            for k in 0..n {
                y[k] = teacher.eval(&x[k * d..(k + 1) * d]);
            }
        }
    }
    if teacher.noise_std > 0.0 {
        let mut rng = rng::stream(seed, "data/noise");
        for v in y.iter_mut() {
            let eta: f64 = StandardNormal.sample(&mut rng);
            *v += teacher.noise_std * eta;
        }
    }

    Ok(Dataset {
        n,
        d,
        x,
        y,
        teacher: teacher.clone(),
        input_spec: input_spec.clone(),
        seed,
    })
}

/// Index partition of `[n]` by the sign of `x_k^T beta`; ties go to `pos`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignSplit {
    pub pos_indices: Vec<usize>,
    pub neg_indices: Vec<usize>,
}

pub fn split_signs(dataset: &Dataset, beta: &[f64]) -> Result<SignSplit> {
    if beta.len() != dataset.d {
        return Err(Error::DimensionMismatch {
            context: "split_signs beta",
            expected: dataset.d,
            got: beta.len(),
        });
    }
    if beta.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroBeta);
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for k in 0..dataset.n {
        if dot(dataset.row(k), beta) >= 0.0 {
            pos.push(k);
        } else {
            neg.push(k);
        }
    }
    Ok(SignSplit {
        pos_indices: pos,
        neg_indices: neg,
    })
}

/// Population gradient field at the origin:
/// `D(w) = E[1{w^T x > 0} y x] = Sigma beta* / 2`, independent of `w`, for a
/// linear teacher over a symmetric continuous input law.
pub fn population_d(input_spec: &InputSpec, teacher: &TeacherSpec, w: &[f64]) -> Result<Vec<f64>> {
    let d = input_spec.dim();
    if w.len() != d {
        return Err(Error::DimensionMismatch {
            context: "population_d w",
            expected: d,
            got: w.len(),
        });
    }
    let beta_star = match &teacher.kind {
        TeacherKind::Linear { beta_star } => beta_star,
        TeacherKind::KRelu { .. } => {
            return Err(Error::NoClosedForm("KRelu teacher".into()));
        }
    };
    if !input_spec.is_symmetric_continuous() {
        return Err(Error::NoClosedForm(
            "input law must be symmetric and continuous".into(),
        ));
    }
    let mut out = input_spec
        .covariance_times(beta_star)
        .expect("symmetric specs carry a covariance");
    for v in out.iter_mut() {
        *v *= 0.5;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Import/export
// ---------------------------------------------------------------------------

const DATASET_JSON_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct DatasetRecord {
    version: u32,
    dataset: Dataset,
}

impl Dataset {
    /// CSV with header `x1,...,xd,y`. Floats are printed in shortest
    /// round-trip form, so re-importing reproduces the exact bits.
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::new();
        for j in 1..=self.d {
            header.push_str(&format!("x{j},"));
        }
        header.push('y');
        writeln!(w, "{header}")?;
        for k in 0..self.n {
            let mut line = String::new();
            for v in self.row(k) {
                line.push_str(&format!("{v},"));
            }
            line.push_str(&format!("{}", self.y[k]));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Parse a `x1,...,xd,y` CSV back into raw `(x, y, d)` arrays.
    pub fn read_csv<R: std::io::BufRead>(r: R) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedCsv("empty file".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 2 || cols[cols.len() - 1] != "y" {
            return Err(Error::MalformedCsv("expected header x1,...,xd,y".into()));
        }
        let d = cols.len() - 1;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<&str> = line.trim().split(',').collect();
            if vals.len() != d + 1 {
                return Err(Error::MalformedCsv(format!(
                    "row {} has {} fields, expected {}",
                    i + 2,
                    vals.len(),
                    d + 1
                )));
            }
            for v in &vals[..d] {
                x.push(v.parse::<f64>().map_err(|e| Error::MalformedCsv(e.to_string()))?);
            }
            y.push(
                vals[d]
                    .parse::<f64>()
                    .map_err(|e| Error::MalformedCsv(e.to_string()))?,
            );
        }
        Ok((x, y, d))
    }

    /// Versioned JSON record (spec, teacher, seed and the data itself).
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&DatasetRecord {
            version: DATASET_JSON_VERSION,
            dataset: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Dataset> {
        let rec: DatasetRecord = serde_json::from_str(s)?;
        if rec.version != DATASET_JSON_VERSION {
            return Err(Error::VersionMismatch {
                expected: DATASET_JSON_VERSION,
                found: rec.version,
            });
        }
        Ok(rec.dataset)
    }
}
