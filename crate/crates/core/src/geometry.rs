//! Activation-pattern geometry.
//!
//! The gradient field at the origin, `D_n(w) = (1/n) sum_k 1{x_k^T w > 0}
//! (y_k - h(x_k)) x_k`, is piecewise constant on the cells of the central
//! hyperplane arrangement `{w : x_k^T w = 0}`. This module evaluates `D_n`
//! and `G_n(w) = w^T D_n(w, 0)`, enumerates realizable sign patterns
//! (exactly in low dimension, by sampling otherwise), searches for extremal
//! directions by pattern-fixpoint iteration, certifies candidates against
//! the subgradient vertex set, and measures how far the empirical field sits
//! from its population value `Sigma beta*/2`.

use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::data::{population_d, Dataset};
use crate::error::{Error, Result};
use crate::network::{activation_pattern, ActivationPattern, NetParams, PATTERN_ZETA};
use crate::rng;
use crate::vecops::{cosine, dot, norm2, normalize};

/// Boundary-coordinate cap for vertex enumeration in certification.
pub const MAX_BOUNDARY_COORDS: usize = 12;

/// Default certification tolerance (relative to the natural scale of D).
pub const CERTIFY_TOL: f64 = 1e-9;

/// `D_n(w, theta) = (1/n) sum_k 1{x_k^T w > 0} (y_k - h_theta(x_k)) x_k`.
/// Passing `None` for `params` selects the origin field `D_n(w, 0)`.
pub fn d_n(w: &[f64], params: Option<&NetParams>, dataset: &Dataset) -> Vec<f64> {
    let d = dataset.d;
    debug_assert_eq!(w.len(), d);
    let mut out = vec![0.0; d];
    for k in 0..dataset.n {
        let x = dataset.row(k);
        if dot(w, x) > 0.0 {
            let resid = match params {
                Some(p) => dataset.y[k] - p.forward(x).expect("dims checked"),
                None => dataset.y[k],
            };
            for j in 0..d {
                out[j] += resid * x[j];
            }
        }
    }
    for v in out.iter_mut() {
        *v /= dataset.n as f64;
    }
    out
}

/// `G_n(w) = w^T D_n(w, 0)`, the correlation between a direction and the
/// gradient field at the origin.
pub fn g_n(w: &[f64], dataset: &Dataset) -> f64 {
    dot(w, &d_n(w, None, dataset))
}

/// Natural norm scale of D vectors: `(1/n) sum_k |y_k x_k|`.
fn d_scale(dataset: &Dataset) -> f64 {
    let mut s = 0.0;
    for k in 0..dataset.n {
        s += dataset.y[k].abs() * norm2(dataset.row(k));
    }
    (s / dataset.n as f64).max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------------------
// Cell enumeration
// ---------------------------------------------------------------------------

/// One full-dimensional cell of the arrangement: a strict sign pattern plus
/// a unit representative direction inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCell {
    pub pattern: ActivationPattern,
    pub representative: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellMode {
    /// Ray-perturbation construction; requires d <= 4 and n <= 64.
    Exact,
    /// Patterns of this many random unit directions, deduplicated.
    Sampled(usize),
}

#[derive(Debug, Clone)]
pub struct CellEnumeration {
    /// Cells sorted by pattern (lexicographic).
    pub cells: Vec<PatternCell>,
    pub exact: bool,
    pub note: Option<String>,
}

/// Upper bound on the number of strict cells of a central arrangement of n
/// hyperplanes in R^d in general position: `2 sum_{k<=d-1} C(n-1, k)`.
pub fn cell_count_bound(n: usize, d: usize) -> u128 {
    let mut total: u128 = 0;
    for k in 0..d.min(n) {
        total += binomial(n - 1, k);
    }
    2 * total
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

pub fn enumerate_cells(dataset: &Dataset, mode: CellMode) -> Result<CellEnumeration> {
    match mode {
        CellMode::Sampled(budget) => Ok(sample_cells(dataset, budget)),
        CellMode::Exact => {
            if dataset.d > 4 || dataset.n > 64 {
                return Err(Error::BudgetExceeded(format!(
                    "exact cell enumeration needs d <= 4 and n <= 64 (got d={}, n={})",
                    dataset.d, dataset.n
                )));
            }
            exact_cells(dataset)
        }
    }
}

fn sample_cells(dataset: &Dataset, budget: usize) -> CellEnumeration {
    let d = dataset.d;
    let mut rng = rng::stream(dataset.seed, "cells/sampled");
    let mut found: std::collections::BTreeMap<ActivationPattern, Vec<f64>> =
        std::collections::BTreeMap::new();
    let mut w = vec![0.0; d];
    for _ in 0..budget {
        for v in w.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        if normalize(&mut w) == 0.0 {
            continue;
        }
        let pat = activation_pattern(&w, dataset, PATTERN_ZETA);
        if pat.is_strict() {
            found.entry(pat).or_insert_with(|| w.clone());
        }
    }
    CellEnumeration {
        cells: found
            .into_iter()
            .map(|(pattern, representative)| PatternCell { pattern, representative })
            .collect(),
        exact: false,
        note: None,
    }
}

/// Exact enumeration. Every full-dimensional cone of an essential central
/// arrangement in general position has an extreme ray lying on d-1 of the
/// hyperplanes, so perturbing each such ray into the 2^(d-1) adjacent
/// orthants of its complement visits every cell.
fn exact_cells(dataset: &Dataset) -> Result<CellEnumeration> {
    let d = dataset.d;
    let n = dataset.n;
    let delta = 1e-7;
    let mut found: std::collections::BTreeMap<ActivationPattern, Vec<f64>> =
        std::collections::BTreeMap::new();
    let mut note = None;

    let push = |w: &[f64], found: &mut std::collections::BTreeMap<ActivationPattern, Vec<f64>>| {
        let mut w = w.to_vec();
        if normalize(&mut w) == 0.0 {
            return;
        }
        let pat = activation_pattern(&w, dataset, PATTERN_ZETA);
        if pat.is_strict() {
            found.entry(pat).or_insert(w);
        }
    };

    if d == 1 {
        push(&[1.0], &mut found);
        push(&[-1.0], &mut found);
        return Ok(done(found, true, note));
    }

    let x = DMatrix::from_fn(n, d, |k, j| dataset.x[k * d + j]);
    let rank = x.clone().svd(false, false).rank(1e-10 * matrix_scale(&x));

    if rank < d {
        if n <= d && rank == n {
            // Independent points spanning a proper subspace: every sign
            // vector is realizable via the minimum-norm preimage.
            let svd = x.clone().svd(true, true);
            for mask in 0..(1usize << n) {
                let s = DVector::from_fn(n, |k, _| if mask >> k & 1 == 1 { 1.0 } else { -1.0 });
                if let Ok(w) = svd.solve(&s, 1e-12) {
                    push(w.as_slice(), &mut found);
                }
            }
            return Ok(done(found, true, note));
        }
        // Degenerate (non-generic) input: exactness is not guaranteed.
        note = Some(format!(
            "data rank {rank} < d={d} with n={n}; fell back to sampling"
        ));
        let mut sampled = sample_cells(dataset, 200_000);
        sampled.note = note;
        return Ok(sampled);
    }

    // Generic essential case: rays from (d-1)-subsets.
    let mut degenerate_subsets = 0usize;
    for_each_combination(n, d - 1, |subset| {
        let a = DMatrix::from_fn(subset.len(), d, |r, j| dataset.x[subset[r] * d + j]);
        // Null direction of the subset via the spectral decomposition of A^T A.
        let gram_full = a.transpose() * &a;
        let eig = gram_full.symmetric_eigen();
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        let lam_max = eig.eigenvalues[idx[d - 1]].max(1e-300);
        if eig.eigenvalues[idx[0]] > 1e-12 * lam_max || (d >= 2 && eig.eigenvalues[idx[1]] <= 1e-12 * lam_max)
        {
            degenerate_subsets += 1;
            return;
        }
        let u: Vec<f64> = eig.eigenvalues_vectors_pair(idx[0]);

        // Dual basis within span(subset): c_j^T x_{subset[i]} = delta_ij.
        let gram = &a * a.transpose();
        let lu = gram.lu();
        let mut duals: Vec<Vec<f64>> = Vec::with_capacity(subset.len());
        for j in 0..subset.len() {
            let mut e = DVector::zeros(subset.len());
            e[j] = 1.0;
            match lu.solve(&e) {
                Some(alpha) => {
                    let c = a.transpose() * alpha;
                    duals.push(c.as_slice().to_vec());
                }
                None => {
                    degenerate_subsets += 1;
                    return;
                }
            }
        }

        let mut w = vec![0.0; d];
        for signs in 0..(1usize << subset.len()) {
            let mut v = vec![0.0; d];
            for (j, c) in duals.iter().enumerate() {
                let s = if signs >> j & 1 == 1 { 1.0 } else { -1.0 };
                for t in 0..d {
                    v[t] += s * c[t];
                }
            }
            if normalize(&mut v) == 0.0 {
                continue;
            }
            for u_sign in [1.0, -1.0] {
                for t in 0..d {
                    w[t] = u_sign * u[t] + delta * v[t];
                }
                push(&w, &mut found);
            }
        }
    });

    if degenerate_subsets > 0 {
        note = Some(format!(
            "{degenerate_subsets} degenerate (d-1)-subsets skipped; counts may be non-generic"
        ));
    }
    Ok(done(found, true, note))
}

fn done(
    found: std::collections::BTreeMap<ActivationPattern, Vec<f64>>,
    exact: bool,
    note: Option<String>,
) -> CellEnumeration {
    CellEnumeration {
        cells: found
            .into_iter()
            .map(|(pattern, representative)| PatternCell { pattern, representative })
            .collect(),
        exact,
        note,
    }
}

fn matrix_scale(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300)
}

trait EigenPair {
    fn eigenvalues_vectors_pair(&self, idx: usize) -> Vec<f64>;
}

impl EigenPair for nalgebra::SymmetricEigen<f64, nalgebra::Dyn> {
    fn eigenvalues_vectors_pair(&self, idx: usize) -> Vec<f64> {
        self.eigenvectors.column(idx).iter().copied().collect()
    }
}

/// Visit all k-subsets of 0..n in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k == 0 {
        f(&[]);
        return;
    }
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // Advance.
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Extremal vectors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Extremal,
    NotExtremal,
    BoundaryAmbiguous,
}

/// A candidate direction with the best subgradient vertex found for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalCandidate {
    pub w: Vec<f64>,
    pub d_vec: Vec<f64>,
    /// Subgradient coefficients: 1 on active coordinates, 0 on inactive,
    /// the chosen vertex bit on boundary coordinates.
    pub eta: Vec<f64>,
    pub verdict: Verdict,
    /// 0 for a clean pattern match; distance diagnostics otherwise
    /// (infinite when certification was not attempted).
    pub residual: f64,
}

/// Condition (2) of the extremality definition for a proposed pair `(D, w)`:
/// `D = 0` or the pattern of `D` matches `+-` the pattern of `w`, with
/// zero-band entries matching either sign.
pub fn extremal_pattern_condition(dataset: &Dataset, d_vec: &[f64], w: &[f64], zeta: f64) -> bool {
    if norm2(d_vec) == 0.0 {
        return true;
    }
    let pat_d = activation_pattern(d_vec, dataset, zeta);
    let pat_w = activation_pattern(w, dataset, zeta);
    pat_d.matches_loose(&pat_w) || pat_d.matches_loose(&pat_w.negated())
}

/// Certify a unit direction: enumerate the vertices of the subgradient set
/// over its boundary coordinates and test each against the pattern
/// condition.
pub fn certify_extremal(dataset: &Dataset, w: &[f64], tol: f64) -> ExtremalCandidate {
    certify_extremal_zeta(dataset, w, tol, PATTERN_ZETA)
}

pub fn certify_extremal_zeta(dataset: &Dataset, w: &[f64], tol: f64, zeta: f64) -> ExtremalCandidate {
    let d = dataset.d;
    let n = dataset.n;
    let mut w = w.to_vec();
    normalize(&mut w);

    let mut base = vec![0.0; d];
    let mut boundary: Vec<usize> = Vec::new();
    let mut eta = vec![0.0; n];
    for k in 0..n {
        let x = dataset.row(k);
        let v = dot(&w, x);
        let band = zeta * norm2(x);
        if v > band {
            eta[k] = 1.0;
            for j in 0..d {
                base[j] += dataset.y[k] * x[j];
            }
        } else if v >= -band {
            boundary.push(k);
        }
    }

    if boundary.len() > MAX_BOUNDARY_COORDS {
        return ExtremalCandidate {
            d_vec: base.iter().map(|v| v / n as f64).collect(),
            w,
            eta,
            verdict: Verdict::BoundaryAmbiguous,
            residual: f64::INFINITY,
        };
    }

    let scale = d_scale(dataset);
    let pat_w = activation_pattern(&w, dataset, zeta);
    let pat_w_neg = pat_w.negated();

    let mut best: Option<(f64, Vec<f64>, usize, bool)> = None; // (residual, D, mask, certified)
    for mask in 0..(1usize << boundary.len()) {
        let mut dv = base.clone();
        for (b, &k) in boundary.iter().enumerate() {
            if mask >> b & 1 == 1 {
                let x = dataset.row(k);
                for j in 0..d {
                    dv[j] += dataset.y[k] * x[j];
                }
            }
        }
        for v in dv.iter_mut() {
            *v /= n as f64;
        }

        let nd = norm2(&dv);
        let (residual, certified) = if nd / scale <= tol {
            // Zero branch of the definition.
            (nd / scale, true)
        } else {
            let pat_d = activation_pattern(&dv, dataset, zeta);
            if pat_d.matches_loose(&pat_w) || pat_d.matches_loose(&pat_w_neg) {
                (0.0, true)
            } else {
                (pattern_violation(dataset, &dv, &pat_w, zeta), false)
            }
        };
        let better = match &best {
            None => true,
            Some((r, _, _, c)) => (certified && !c) || (certified == *c && residual < *r),
        };
        if better {
            best = Some((residual, dv, mask, certified));
        }
    }

    let (residual, d_vec, mask, certified) = best.expect("at least the empty mask");
    for (b, &k) in boundary.iter().enumerate() {
        eta[k] = if mask >> b & 1 == 1 { 1.0 } else { 0.0 };
    }
    ExtremalCandidate {
        w,
        d_vec,
        eta,
        verdict: if certified { Verdict::Extremal } else { Verdict::NotExtremal },
        residual,
    }
}

/// Worst sign conflict between the pattern of `dv` and `+-pat_w`, measured
/// as a normalized margin (0 would mean compatible).
fn pattern_violation(dataset: &Dataset, dv: &[f64], pat_w: &ActivationPattern, zeta: f64) -> f64 {
    let pat_d = activation_pattern(dv, dataset, zeta);
    let nd = norm2(dv);
    let mut worst_plus = 0.0f64;
    let mut worst_minus = 0.0f64;
    for k in 0..dataset.n {
        let (sd, sw) = (pat_d.0[k], pat_w.0[k]);
        if sd == 0 || sw == 0 {
            continue;
        }
        let margin = dot(dv, dataset.row(k)).abs() / (nd * norm2(dataset.row(k)));
        if sd != sw {
            worst_plus = worst_plus.max(margin);
        }
        if sd != -sw {
            worst_minus = worst_minus.max(margin);
        }
    }
    worst_plus.min(worst_minus)
}

/// Pattern-fixpoint iteration `w <- +-D_n(w, 0)/|D_n(w, 0)|` (sign chosen by
/// the sign of `G_n(w0)`), stopping when the activation pattern repeats.
pub fn find_extremal(dataset: &Dataset, w0: &[f64], max_iter: usize, tol: f64) -> ExtremalCandidate {
    let mut w = w0.to_vec();
    normalize(&mut w);
    let maximize = g_n(&w, dataset) >= 0.0;
    let scale = d_scale(dataset);

    let mut seen: Vec<ActivationPattern> = Vec::new();
    for _ in 0..max_iter {
        let dv = d_n(&w, None, dataset);
        if norm2(&dv) / scale <= tol {
            // Dead direction: D = 0 is its own fixpoint.
            return certify_extremal_zeta(dataset, &w, tol, PATTERN_ZETA);
        }
        let mut dir: Vec<f64> = if maximize {
            dv.clone()
        } else {
            dv.iter().map(|v| -v).collect()
        };
        normalize(&mut dir);

        let pat_w = activation_pattern(&w, dataset, PATTERN_ZETA);
        let pat_dir = activation_pattern(&dir, dataset, PATTERN_ZETA);
        if pat_dir.matches_loose(&pat_w) {
            return certify_extremal_zeta(dataset, &dir, tol, PATTERN_ZETA);
        }
        if seen.contains(&pat_dir) {
            // Cycling between adjacent cells: on fine arrangements the
            // critical direction sits on their shared face. Certify the
            // midpoint with a band wide enough to put the disagreeing
            // coordinates on the boundary before giving up.
            if let Some(c) = certify_cycle_face(dataset, &w, &dir, &pat_w, &pat_dir, tol) {
                return c;
            }
            return ExtremalCandidate {
                w: dir,
                d_vec: dv,
                eta: Vec::new(),
                verdict: Verdict::BoundaryAmbiguous,
                residual: f64::INFINITY,
            };
        }
        seen.push(pat_w);
        w = dir;
    }
    ExtremalCandidate {
        w: w.clone(),
        d_vec: d_n(&w, None, dataset),
        eta: Vec::new(),
        verdict: Verdict::BoundaryAmbiguous,
        residual: f64::INFINITY,
    }
}

/// Midpoint certification for two cycling patterns. The disagreeing
/// coordinates have small margins around the midpoint direction; widening
/// the zero band to cover them turns the face into explicit boundary
/// coordinates for the vertex enumeration.
fn certify_cycle_face(
    dataset: &Dataset,
    w1: &[f64],
    w2: &[f64],
    pat1: &ActivationPattern,
    pat2: &ActivationPattern,
    tol: f64,
) -> Option<ExtremalCandidate> {
    let mut mid: Vec<f64> = w1.iter().zip(w2.iter()).map(|(a, b)| a + b).collect();
    if normalize(&mut mid) == 0.0 {
        return None;
    }
    let mut zeta = PATTERN_ZETA;
    for k in 0..dataset.n {
        if pat1.0[k] != pat2.0[k] {
            let x = dataset.row(k);
            zeta = zeta.max(2.0 * dot(&mid, x).abs() / norm2(x));
        }
    }
    // A wide face is a genuine ambiguity, not numerical slack.
    if zeta > 1e-2 {
        return None;
    }
    let cand = certify_extremal_zeta(dataset, &mid, tol, zeta);
    (cand.verdict == Verdict::Extremal).then_some(cand)
}

// ---------------------------------------------------------------------------
// Concentration measurement
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupMode {
    /// Maximum over exactly enumerated strict cells (small n, d).
    ExactCells,
    /// Maximum over this many sampled unit directions.
    Sampled(usize),
}

/// `sup_w |D_n(w, 0) - Sigma beta*/2|` over strict cells (boundary
/// subgradients are convex combinations of neighboring strict-cell values,
/// so the strict-cell maximum dominates).
pub fn sup_deviation(dataset: &Dataset, mode: SupMode) -> Result<f64> {
    let d = dataset.d;
    let target = population_d(&dataset.input_spec, &dataset.teacher, &vec![0.0; d])?;
    let deviation = |w: &[f64]| -> f64 {
        let dv = d_n(w, None, dataset);
        let mut s = 0.0;
        for j in 0..d {
            s += (dv[j] - target[j]) * (dv[j] - target[j]);
        }
        s.sqrt()
    };
    match mode {
        SupMode::ExactCells => {
            let cells = enumerate_cells(dataset, CellMode::Exact)?;
            Ok(cells
                .cells
                .iter()
                .map(|c| deviation(&c.representative))
                .fold(0.0, f64::max))
        }
        SupMode::Sampled(budget) => {
            let mut rng = rng::stream(dataset.seed, "supdev");
            let mut w = vec![0.0; d];
            let mut best = 0.0f64;
            for _ in 0..budget {
                for v in w.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                if normalize(&mut w) == 0.0 {
                    continue;
                }
                best = best.max(deviation(&w));
            }
            Ok(best)
        }
    }
}

// ---------------------------------------------------------------------------
// Alignment probes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronAlignment {
    pub cos_to_plus: f64,
    pub cos_to_minus: f64,
    pub norm: f64,
    pub a_sign: i8,
    pub zero_norm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentProbe {
    /// Alignment target `Sigma beta*` of the positive neurons.
    pub target: Vec<f64>,
    pub neurons: Vec<NeuronAlignment>,
}

impl AlignmentProbe {
    /// Smallest cosine of any neuron against the target of its output sign
    /// (positive neurons vs `+Sigma beta*`, negative vs `-Sigma beta*`).
    pub fn min_cos_to_sign_target(&self) -> f64 {
        self.neurons
            .iter()
            .filter(|n| !n.zero_norm && n.a_sign != 0)
            .map(|n| if n.a_sign > 0 { n.cos_to_plus } else { n.cos_to_minus })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Per-neuron cosines against `+-Sigma beta*` for a linear teacher over a
/// symmetric input law.
pub fn alignment_probe(
    params: &NetParams,
    input_spec: &crate::data::InputSpec,
    teacher: &crate::data::TeacherSpec,
) -> Result<AlignmentProbe> {
    let beta_star = match &teacher.kind {
        crate::data::TeacherKind::Linear { beta_star } => beta_star.clone(),
        _ => return Err(Error::NoClosedForm("alignment target needs a linear teacher".into())),
    };
    let target = input_spec
        .covariance_times(&beta_star)
        .ok_or_else(|| Error::NoClosedForm("input law has no analytic covariance".into()))?;
    let neurons = (0..params.m)
        .map(|i| {
            let w = params.w_row(i);
            let norm = norm2(w);
            let c = cosine(w, &target);
            NeuronAlignment {
                cos_to_plus: c,
                cos_to_minus: -c,
                norm,
                a_sign: if params.a[i] > 0.0 {
                    1
                } else if params.a[i] < 0.0 {
                    -1
                } else {
                    0
                },
                zero_norm: norm == 0.0,
            }
        })
        .collect();
    Ok(AlignmentProbe { target, neurons })
}

/// Duration of the early directional phase, `tau = eps ln(1/lambda) /
/// |Sigma beta*|`.
pub fn alignment_time(epsilon: f64, lambda: f64, sigma_beta_norm: f64) -> f64 {
    epsilon * (1.0 / lambda).ln() / sigma_beta_norm
}
