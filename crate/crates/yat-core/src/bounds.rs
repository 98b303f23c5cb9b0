//! Learning-theoretic calculators: kernel ridge regression, Rademacher
//! bounds (worst-case and data-dependent), the multiclass margin bound, MMD
//! two-sample machinery, and the RKHS-Lipschitz certified radius.
//!
//! Absolute constants the theory leaves unspecified are explicit caller
//! parameters (pass 1.0 for the bare formula) and are echoed in the report.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, YatError};
use crate::gram::{build_gram, rkhs_norm_sq, spd_solve, Expansion};
use crate::kernel::{check_finite, dot, kernel_raw, KernelFamily, KernelParams};
use crate::rng::derived_rng;
use crate::spectrum::{effective_dimension, SpectrumResult};

/// Points with real-valued labels.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl LabeledSample {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(YatError::DimensionMismatch(points.len(), labels.len()));
        }
        for p in &points {
            check_finite(p, "sample point")?;
        }
        check_finite(&labels, "labels")?;
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A bound value together with the named quantities it was assembled from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub value: f64,
    pub constituents: BTreeMap<String, f64>,
}

impl BoundReport {
    fn new(value: f64) -> Self {
        Self {
            value,
            constituents: BTreeMap::new(),
        }
    }

    fn with(mut self, name: &str, v: f64) -> Self {
        self.constituents.insert(name.to_string(), v);
        self
    }
}

/// Unbiased U-statistic result with the decision against a threshold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MmdResult {
    pub mmd2: f64,
    pub threshold: f64,
    pub reject: bool,
    pub n: usize,
}

/// Kernel ridge regression: solve `(K + n lambda I) alpha = y` and return
/// the expansion over the training points.
pub fn krr_fit(data: &LabeledSample, p: &KernelParams, ridge: f64) -> Result<Expansion> {
    if data.is_empty() {
        return Err(YatError::EmptyInput("training sample"));
    }
    if !(ridge > 0.0) {
        return Err(YatError::InvalidParameter {
            name: "ridge",
            value: ridge,
        });
    }
    let n = data.len();
    let gram = build_gram(&data.points, p)?;
    let mut system = gram.entries.clone();
    let shift = n as f64 * ridge;
    for i in 0..n {
        system[(i, i)] += shift;
    }
    let y = DVector::from_column_slice(&data.labels);
    let (alpha, _) = spd_solve(&system, &y)?;
    Expansion::new(data.points.clone(), alpha.iter().copied().collect(), *p)
}

/// Three-term KRR excess-risk bound
/// `lambda ||f*||^2 + (sigma^2/n) N(lambda) + c sigma^2 (R^4/eps) / (n^2 lambda)`.
///
/// The absolute constant `c` on the remainder is caller-supplied (the theory
/// does not pin it; use 1.0 for the bare formula).
#[allow(clippy::too_many_arguments)]
pub fn krr_bound_eval(
    norm_f_star_sq: f64,
    sigma2: f64,
    lambda: f64,
    n: usize,
    spectrum: &SpectrumResult,
    r: f64,
    eps: f64,
    c: f64,
) -> Result<BoundReport> {
    if !(lambda > 0.0) {
        return Err(YatError::InvalidParameter {
            name: "lambda",
            value: lambda,
        });
    }
    if n == 0 {
        return Err(YatError::EmptyInput("sample size"));
    }
    let eff_dim = effective_dimension(spectrum, lambda)?;
    let nf = n as f64;
    let bias = lambda * norm_f_star_sq;
    let variance = sigma2 / nf * eff_dim;
    let remainder = c * sigma2 * r.powi(4) / eps / (nf * nf * lambda);
    Ok(BoundReport::new(bias + variance + remainder)
        .with("bias_term", bias)
        .with("variance_term", variance)
        .with("remainder_term", remainder)
        .with("effective_dimension", eff_dim)
        .with("lambda", lambda)
        .with("n", nf)
        .with("sigma2", sigma2)
        .with("C", c))
}

/// Worst-case RKHS-ball Rademacher bound `B (R^2 + b) / (sqrt(n) sqrt(eps))`.
pub fn rademacher_bound(
    ball_radius: f64,
    r: f64,
    n: usize,
    p: &KernelParams,
) -> Result<BoundReport> {
    p.require_psd_mode()?;
    if n == 0 {
        return Err(YatError::EmptyInput("sample size"));
    }
    let nf = n as f64;
    let value = ball_radius * (r * r + p.b) / (nf.sqrt() * p.eps.sqrt());
    Ok(BoundReport::new(value)
        .with("B", ball_radius)
        .with("R", r)
        .with("n", nf)
        .with("b", p.b)
        .with("eps", p.eps))
}

/// Data-dependent Rademacher bound and its Monte-Carlo check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RademacherEmpirical {
    /// `B / sqrt(n eps) * sqrt((1/n) sum (||x_i||^2 + b)^2)`.
    pub bound: f64,
    /// `(B/n) E_sigma sqrt(sigma' K sigma)` estimated over the draws.
    pub mc_estimate: f64,
    pub mc_std_err: f64,
}

/// Empirical Rademacher bound with a Monte-Carlo estimate of the exact
/// sign-average via `||sum_i sigma_i k(., x_i)||^2 = sigma' K sigma`.
pub fn rademacher_empirical(
    sample: &LabeledSample,
    ball_radius: f64,
    p: &KernelParams,
    mc_draws: usize,
    seed: u64,
) -> Result<RademacherEmpirical> {
    p.require_psd_mode()?;
    if sample.is_empty() {
        return Err(YatError::EmptyInput("sample"));
    }
    if mc_draws < 1000 {
        return Err(YatError::Precondition(
            "need at least 1000 sign draws".into(),
        ));
    }
    let n = sample.len();
    let nf = n as f64;
    let diag_mean = sample
        .points
        .iter()
        .map(|x| {
            let s = dot(x, x) + p.b;
            s * s
        })
        .sum::<f64>()
        / nf;
    let bound = ball_radius / (nf * p.eps).sqrt() * diag_mean.sqrt();

    let gram = build_gram(&sample.points, p)?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut signs = vec![1.0f64; n];
    for trial in 0..mc_draws {
        let mut rng = derived_rng(seed, trial as u64);
        for s in signs.iter_mut() {
            *s = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += signs[i] * signs[j] * gram.entries[(i, j)];
            }
        }
        let v = ball_radius / nf * quad.max(0.0).sqrt();
        sum += v;
        sum_sq += v * v;
    }
    let m = mc_draws as f64;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean).max(0.0);
    Ok(RademacherEmpirical {
        bound,
        mc_estimate: mean,
        mc_std_err: (var / m).sqrt(),
    })
}

/// Multiclass margin bound
/// `2 sqrt(2) C (C-1) B kappa / (gamma sqrt(n)) + 3 (C-1) sqrt(ln(2/delta) / (2n))`
/// with `B^2 = sum_c alpha_c' K alpha_c` and `kappa = (R^2 + b) / sqrt(eps)`.
pub fn multiclass_margin_bound(
    heads: &[Expansion],
    gamma: f64,
    r: f64,
    n: usize,
    delta: f64,
) -> Result<BoundReport> {
    if heads.is_empty() {
        return Err(YatError::EmptyInput("heads"));
    }
    if !(gamma > 0.0) {
        return Err(YatError::InvalidParameter {
            name: "gamma",
            value: gamma,
        });
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(YatError::InvalidParameter {
            name: "delta",
            value: delta,
        });
    }
    if n == 0 {
        return Err(YatError::EmptyInput("sample size"));
    }
    let first = &heads[0];
    for h in heads.iter().skip(1) {
        if h.centers != first.centers || h.params != first.params {
            return Err(YatError::Precondition(
                "heads must share centers and kernel parameters".into(),
            ));
        }
    }
    let b_sq: f64 = heads.iter().map(rkhs_norm_sq).sum::<Result<f64>>()?;
    let big_b = b_sq.sqrt();
    let p = first.params;
    let kappa = (r * r + p.b) / p.eps.sqrt();
    let c = heads.len() as f64;
    let nf = n as f64;
    let complexity = 2.0 * 2f64.sqrt() * c * (c - 1.0) * big_b * kappa / (gamma * nf.sqrt());
    let confidence = 3.0 * (c - 1.0) * ((2.0 / delta).ln() / (2.0 * nf)).sqrt();
    Ok(BoundReport::new(complexity + confidence)
        .with("B", big_b)
        .with("kappa", kappa)
        .with("C", c)
        .with("gamma", gamma)
        .with("n", nf)
        .with("delta", delta)
        .with("complexity_term", complexity)
        .with("confidence_term", confidence))
}

/// Unbiased U-statistic estimate of `MMD^2` between two equal-size samples,
/// with the rejection decision against the supplied threshold.
pub fn mmd_u_statistic(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    p: &KernelParams,
    threshold: f64,
) -> Result<MmdResult> {
    let n = x.len();
    if n != y.len() {
        return Err(YatError::DimensionMismatch(n, y.len()));
    }
    if n < 2 {
        return Err(YatError::Precondition(
            "need at least two samples per side".into(),
        ));
    }
    let mut kxx = 0.0;
    let mut kyy = 0.0;
    let mut kxy = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                kxx += kernel_raw(&x[i], &x[j], p);
                kyy += kernel_raw(&y[i], &y[j], p);
            }
            kxy += kernel_raw(&x[i], &y[j], p);
        }
    }
    let nf = n as f64;
    let mmd2 = kxx / (nf * (nf - 1.0)) + kyy / (nf * (nf - 1.0)) - 2.0 * kxy / (nf * nf);
    Ok(MmdResult {
        mmd2,
        threshold,
        reject: mmd2 > threshold,
        n,
    })
}

/// Permutation-null threshold for the U-statistic at level `alpha`: the
/// `(1 - alpha)` quantile of the statistic under random relabelings of the
/// pooled sample.
pub fn mmd_permutation_threshold(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    p: &KernelParams,
    permutations: usize,
    alpha: f64,
    seed: u64,
) -> Result<f64> {
    let n = x.len();
    if n != y.len() {
        return Err(YatError::DimensionMismatch(n, y.len()));
    }
    if n < 2 {
        return Err(YatError::Precondition(
            "need at least two samples per side".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(YatError::InvalidParameter {
            name: "alpha",
            value: alpha,
        });
    }
    // Pooled Gram once; permutations only reindex it.
    let pooled: Vec<Vec<f64>> = x.iter().chain(y.iter()).cloned().collect();
    let gram = build_gram(&pooled, p)?;
    let m = 2 * n;
    let mut idx: Vec<usize> = (0..m).collect();
    let mut stats = Vec::with_capacity(permutations);
    let nf = n as f64;
    for trial in 0..permutations {
        let mut rng = derived_rng(seed, trial as u64);
        for i in (1..m).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        let (a, b) = idx.split_at(n);
        let mut kxx = 0.0;
        let mut kyy = 0.0;
        let mut kxy = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    kxx += gram.entries[(a[i], a[j])];
                    kyy += gram.entries[(b[i], b[j])];
                }
                kxy += gram.entries[(a[i], b[j])];
            }
        }
        stats.push(kxx / (nf * (nf - 1.0)) + kyy / (nf * (nf - 1.0)) - 2.0 * kxy / (nf * nf));
    }
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((1.0 - alpha) * permutations as f64).ceil() as usize;
    Ok(stats[rank.min(permutations - 1)])
}

/// Sample-size planner `n >= C (R^2 + b)^4 / (eps^2 eta^2 beta)` (ceiling).
pub fn mmd_sample_size(r: f64, p: &KernelParams, eta: f64, beta: f64, c: f64) -> Result<u64> {
    for (name, v) in [("R", r), ("eta", eta), ("beta", beta), ("C", c)] {
        if !(v > 0.0) {
            return Err(YatError::InvalidParameter { name, value: v });
        }
    }
    let diag = (r * r + p.b).powi(4);
    Ok((c * diag / (p.eps * p.eps * eta * eta * beta)).ceil() as u64)
}

/// RKHS-Lipschitz constant of the unbiased kernel on the ball of radius `R`:
/// `L(R, eps, d) = sqrt(2 R^2 (1 + d) / eps + 2 d R^4 / eps^2)`.
pub fn lipschitz_constant(r: f64, eps: f64, d: usize) -> f64 {
    let df = d as f64;
    (2.0 * r * r * (1.0 + df) / eps + 2.0 * df * r.powi(4) / (eps * eps)).sqrt()
}

/// Diagonal mixed-partial matrix of the unbiased kernel,
/// `M_ij(x) = (2 x_i x_j + 2 ||x||^2 delta_ij) / eps + 2 ||x||^4 delta_ij / eps^2`.
pub fn mixed_partial_matrix(x: &[f64], eps: f64) -> DMatrix<f64> {
    let d = x.len();
    let n2 = dot(x, x);
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = 2.0 * x[i] * x[j] / eps;
            if i == j {
                m[(i, j)] += 2.0 * n2 / eps + 2.0 * n2 * n2 / (eps * eps);
            }
        }
    }
    m
}

/// Trace of the mixed-partial matrix: `2 ||x||^2 (1 + d)/eps + 2 d ||x||^4 / eps^2`.
pub fn trace_mixed_partial(x: &[f64], eps: f64) -> f64 {
    let d = x.len() as f64;
    let n2 = dot(x, x);
    2.0 * n2 * (1.0 + d) / eps + 2.0 * d * n2 * n2 / (eps * eps)
}

/// Certified radius of a margin classifier.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CertifiedRadius {
    pub radius: f64,
    pub predicted_class: usize,
    pub margin: f64,
}

/// Certified adversarial radius `gamma(x) / (2 B L(R, eps, d))` for a
/// multi-head unbiased-kernel classifier with `B^2 = sum_c ||f_c||^2`.
///
/// The Lipschitz constant is specific to the `b = 0` kernel, so biased heads
/// are rejected.
pub fn certified_radius(heads: &[Expansion], x: &[f64], r: f64) -> Result<CertifiedRadius> {
    if heads.is_empty() {
        return Err(YatError::EmptyInput("heads"));
    }
    let p = heads[0].params;
    if p.family != KernelFamily::Yat || p.b != 0.0 {
        return Err(YatError::Precondition(
            "certified radius requires unbiased (b = 0) heads".into(),
        ));
    }
    for h in heads {
        if h.params != p {
            return Err(YatError::Precondition(
                "heads must share kernel parameters".into(),
            ));
        }
    }
    if dot(x, x).sqrt() > r * (1.0 + 1e-12) {
        return Err(YatError::Precondition(
            "input lies outside the certification ball".into(),
        ));
    }
    let scores: Vec<f64> = heads.iter().map(|h| h.eval(x)).collect::<Result<_>>()?;
    let predicted_class = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    if heads.len() == 1 {
        return Ok(CertifiedRadius {
            radius: f64::INFINITY,
            predicted_class,
            margin: f64::INFINITY,
        });
    }
    let runner_up = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != predicted_class)
        .map(|(_, s)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = scores[predicted_class] - runner_up;
    if margin <= 0.0 {
        return Ok(CertifiedRadius {
            radius: 0.0,
            predicted_class,
            margin,
        });
    }
    let b_sq: f64 = heads.iter().map(rkhs_norm_sq).sum::<Result<f64>>()?;
    let d = x.len();
    let lip = lipschitz_constant(r, p.eps, d);
    let radius = margin / (2.0 * b_sq.sqrt() * lip);
    Ok(CertifiedRadius {
        radius,
        predicted_class,
        margin,
    })
}

/// Random expansion of unit RKHS norm: up to `max_atoms` centers in the ball
/// of radius `r`, coefficients rescaled by the closed-form norm. Used by the
/// Lipschitz soundness checks.
pub fn random_unit_norm_expansion(
    d: usize,
    r: f64,
    max_atoms: usize,
    p: &KernelParams,
    rng: &mut impl Rng,
) -> Result<Expansion> {
    let m = rng.random_range(1..=max_atoms.max(1));
    let centers: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let raw: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = dot(&raw, &raw).sqrt().max(1e-9);
            let scale = rng.random_range(0.0..r) / n;
            raw.iter().map(|c| c * scale).collect()
        })
        .collect();
    let coeffs: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let e = Expansion::new(centers.clone(), coeffs.clone(), *p)?;
    let norm_sq = rkhs_norm_sq(&e)?;
    if norm_sq <= 1e-14 {
        // Degenerate draw (e.g. all centers at the origin with b = 0);
        // fall back to a single safely-normalizable atom.
        let mut center = vec![0.0; d];
        center[0] = 0.5 * r;
        let e1 = Expansion::new(vec![center.clone()], vec![1.0], *p)?;
        let n1 = rkhs_norm_sq(&e1)?;
        return Expansion::new(vec![center], vec![1.0 / n1.sqrt()], *p);
    }
    let scale = 1.0 / norm_sq.sqrt();
    Expansion::new(centers, coeffs.iter().map(|c| c * scale).collect(), *p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{norm, yat_eval, yat_grad_input};
    use crate::spectrum::{funk_hecke_eigenvalues, zonal_reduce};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut impl Rng, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-scale..scale)).collect())
            .collect()
    }

    #[test]
    fn krr_zero_labels_zero_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = KernelParams::yat(1.0, 1.0).unwrap();
        let data = LabeledSample::new(random_points(&mut rng, 6, 2, 1.0), vec![0.0; 6]).unwrap();
        let fit = krr_fit(&data, &p, 0.1).unwrap();
        assert!(fit.coefficients.iter().all(|a| a.abs() < 1e-14));
    }

    #[test]
    fn krr_single_point_scalar_solve() {
        let p = KernelParams::yat(0.5, 2.0).unwrap();
        let x0 = vec![1.0, -1.0];
        let y0 = 3.0;
        let data = LabeledSample::new(vec![x0.clone()], vec![y0]).unwrap();
        let fit = krr_fit(&data, &p, 0.3).unwrap();
        let k00 = yat_eval(&x0, &x0, &p).unwrap();
        assert_relative_eq!(fit.coefficients[0], y0 / (k00 + 0.3), max_relative = 1e-12);
    }

    #[test]
    fn krr_interpolates_in_the_small_ridge_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = KernelParams::yat(1.0, 1.0).unwrap();
        let points = random_points(&mut rng, 5, 2, 1.5);
        let labels: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let data = LabeledSample::new(points.clone(), labels.clone()).unwrap();
        let fit = krr_fit(&data, &p, 1e-12).unwrap();
        for (x, y) in points.iter().zip(&labels) {
            assert!(
                (fit.eval(x).unwrap() - y).abs() <= 1e-6,
                "interpolation residual too large"
            );
        }
    }

    #[test]
    fn krr_residual_consistent_with_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = KernelParams::yat(0.3, 0.7).unwrap();
        let points = random_points(&mut rng, 8, 3, 1.0);
        let labels: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let data = LabeledSample::new(points.clone(), labels.clone()).unwrap();
        let ridge = 0.05;
        let fit = krr_fit(&data, &p, ridge).unwrap();
        let gram = build_gram(&points, &p).unwrap();
        let alpha = DVector::from_column_slice(&fit.coefficients);
        let resid =
            &gram.entries * &alpha + 8.0 * ridge * &alpha - DVector::from_column_slice(&labels);
        assert!(resid.norm() <= 1e-10 * DVector::from_column_slice(&labels).norm().max(1.0));
    }

    #[test]
    fn krr_bound_terms_scale_as_stated() {
        let z = zonal_reduce(&KernelParams::yat(0.0, 1.0).unwrap()).unwrap();
        let spec = funk_hecke_eigenvalues(&z, 3, 80).unwrap();
        let b1 = krr_bound_eval(1.0, 0.5, 1e-3, 1000, &spec, 1.0, 1.0, 1.0).unwrap();
        let b2 = krr_bound_eval(1.0, 0.5, 1e-3, 2000, &spec, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(
            b2.constituents["variance_term"],
            b1.constituents["variance_term"] / 2.0,
            max_relative = 1e-12
        );

        // Noiseless limit: sigma^2 = 0 and lambda -> 0 sends the bound to 0.
        let tiny = krr_bound_eval(1.0, 0.0, 1e-9, 1000, &spec, 1.0, 1.0, 1.0).unwrap();
        assert!(tiny.value <= 1e-8);

        // At n = 1e4 with lambda = (log n)^2 / n and a modest target norm,
        // the effective-dimension term dominates the other two.
        let n = 10_000usize;
        let lam = (10_000f64).ln().powi(2) / 10_000.0;
        let rep = krr_bound_eval(0.1, 1.0, lam, n, &spec, 1.0, 1.0, 1.0).unwrap();
        let var = rep.constituents["variance_term"];
        assert!(var > rep.constituents["bias_term"]);
        assert!(var > rep.constituents["remainder_term"]);
    }

    #[test]
    fn rademacher_bound_examples() {
        let p = KernelParams::yat(0.0, 1.0).unwrap();
        assert_relative_eq!(
            rademacher_bound(1.0, 1.0, 1, &p).unwrap().value,
            1.0,
            epsilon = 1e-15
        );

        let b4 = rademacher_bound(1.0, 1.0, 4, &p).unwrap().value;
        let b16 = rademacher_bound(1.0, 1.0, 16, &p).unwrap().value;
        assert_relative_eq!(b16, b4 / 2.0, max_relative = 1e-14);

        // b = 0 reduces to B R^2 / (sqrt(n) sqrt(eps)).
        let p2 = KernelParams::yat(0.0, 4.0).unwrap();
        let v = rademacher_bound(2.0, 3.0, 9, &p2).unwrap().value;
        assert_relative_eq!(v, 2.0 * 9.0 / (3.0 * 2.0), max_relative = 1e-14);
    }

    #[test]
    fn rademacher_empirical_single_point_is_exact() {
        let p = KernelParams::yat(1.0, 1.0).unwrap();
        let sample = LabeledSample::new(vec![vec![0.5, 0.5]], vec![0.0]).unwrap();
        let out = rademacher_empirical(&sample, 2.0, &p, 1000, 7).unwrap();
        assert_relative_eq!(out.mc_estimate, out.bound, max_relative = 1e-12);
        assert!(out.mc_std_err <= 1e-12);
    }

    #[test]
    fn rademacher_mc_below_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = KernelParams::yat(0.0, 1.0).unwrap();
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let raw: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = norm(&raw).max(1e-9);
                let s = rng.random_range(0.0..1.0) / n;
                raw.iter().map(|c| c * s).collect()
            })
            .collect();
        let sample = LabeledSample::new(pts, vec![0.0; 50]).unwrap();
        let out = rademacher_empirical(&sample, 1.0, &p, 2000, 3).unwrap();
        assert!(
            out.mc_estimate <= out.bound + 3.0 * out.mc_std_err,
            "mc {} vs bound {} (se {})",
            out.mc_estimate,
            out.bound,
            out.mc_std_err
        );
    }

    #[test]
    fn rademacher_constant_diagonal_case() {
        // All points at the origin with b = 1: K is constant 1/eps and the
        // MC average equals (B/n) E|sum sigma| / sqrt(eps) <= bound.
        let p = KernelParams::yat(1.0, 2.0).unwrap();
        let n = 20;
        let sample = LabeledSample::new(vec![vec![0.0, 0.0]; n], vec![0.0; n]).unwrap();
        let out = rademacher_empirical(&sample, 1.5, &p, 4000, 11).unwrap();
        assert_relative_eq!(
            out.bound,
            1.5 / (n as f64 * 2.0).sqrt(),
            max_relative = 1e-13
        );
        assert!(out.mc_estimate <= out.bound + 3.0 * out.mc_std_err);
    }

    #[test]
    fn multiclass_bound_examples() {
        let p = KernelParams::yat(0.5, 1.0).unwrap();
        let centers = vec![vec![0.4, 0.1], vec![-0.2, 0.3], vec![0.0, -0.5]];
        let zero_heads: Vec<Expansion> = (0..3)
            .map(|_| Expansion::new(centers.clone(), vec![0.0; 3], p).unwrap())
            .collect();
        let rep = multiclass_margin_bound(&zero_heads, 0.5, 1.0, 100, 0.05).unwrap();
        assert_eq!(rep.constituents["B"], 0.0);
        assert_relative_eq!(
            rep.value,
            rep.constituents["confidence_term"],
            max_relative = 1e-14
        );

        // C(C-1) factor: 2 classes -> 4 classes multiplies the first term by 6.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mk_head = |rng: &mut ChaCha8Rng| {
            let coeffs: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            Expansion::new(centers.clone(), coeffs, p).unwrap()
        };
        let h: Vec<Expansion> = (0..4).map(|_| mk_head(&mut rng)).collect();
        let two = multiclass_margin_bound(&h[..2], 0.5, 1.0, 100, 0.05).unwrap();
        let four = multiclass_margin_bound(&h[..4], 0.5, 1.0, 100, 0.05).unwrap();
        let b2 = two.constituents["B"];
        let b4 = four.constituents["B"];
        let scale = b4 / b2;
        assert_relative_eq!(
            four.constituents["complexity_term"],
            6.0 * scale * two.constituents["complexity_term"],
            max_relative = 1e-12
        );

        // B matches the Gram-based norms directly.
        let expected_b: f64 = h[..4]
            .iter()
            .map(|e| rkhs_norm_sq(e).unwrap())
            .sum::<f64>()
            .sqrt();
        assert_relative_eq!(b4, expected_b, max_relative = 1e-12);
    }

    #[test]
    fn mmd_identical_lists_formula() {
        // With Y = X the cross term pairs off against the within terms:
        // value = 2 [ (1/(n(n-1))) sum_{i != j} k - (1/n^2) sum_{i,j} k ].
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = KernelParams::yat(1.0, 1.0).unwrap();
        let x = random_points(&mut rng, 4, 2, 1.0);
        let res = mmd_u_statistic(&x, &x, &p, 0.0).unwrap();
        let n = 4.0;
        let mut off = 0.0;
        let mut all = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let k = yat_eval(&x[i], &x[j], &p).unwrap();
                all += k;
                if i != j {
                    off += k;
                }
            }
        }
        let expected = 2.0 * (off / (n * (n - 1.0)) - all / (n * n));
        assert_relative_eq!(res.mmd2, expected, max_relative = 1e-12);
    }

    #[test]
    fn mmd_null_centers_on_zero_and_alternative_separates() {
        let p = KernelParams::yat(1.0, 1.0).unwrap();
        let trials = 200;
        let n = 100;
        let mut null_stats = Vec::with_capacity(trials);
        for t in 0..trials {
            let mut rng = derived_rng(100, t as u64);
            let draw = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
                (0..n)
                    .map(|_| {
                        (0..2)
                            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                            .collect()
                    })
                    .collect()
            };
            let x = draw(&mut rng);
            let y = draw(&mut rng);
            null_stats.push(mmd_u_statistic(&x, &y, &p, 0.0).unwrap().mmd2);
        }
        let m = null_stats.len() as f64;
        let mean = null_stats.iter().sum::<f64>() / m;
        let var = null_stats
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (m - 1.0);
        let se = (var / m).sqrt();
        assert!(mean.abs() <= 3.0 * se, "null mean {mean} vs se {se}");

        // Separated means: the statistic moves far from the null scatter.
        let mut rng = derived_rng(200, 0);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..2)
                    .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                    .collect()
            })
            .collect();
        let y: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut v: Vec<f64> = (0..2)
                    .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                    .collect();
                v[0] += 2.0;
                v
            })
            .collect();
        let alt = mmd_u_statistic(&x, &y, &p, 0.0).unwrap().mmd2;
        assert!(
            alt > mean + 10.0 * var.sqrt(),
            "alternative {alt} vs null spread {}",
            var.sqrt()
        );
    }

    #[test]
    fn mmd_sample_size_examples() {
        let p = KernelParams::yat(0.0, 1.0).unwrap();
        assert_eq!(mmd_sample_size(1.0, &p, 0.1, 0.05, 1.0).unwrap(), 2000);

        let n_eta = mmd_sample_size(1.0, &p, 0.2, 0.05, 1.0).unwrap();
        assert_eq!(n_eta, 500); // doubling eta divides n by 4

        let p_half = KernelParams::yat(0.0, 0.5).unwrap();
        assert_eq!(mmd_sample_size(1.0, &p_half, 0.1, 0.05, 1.0).unwrap(), 8000);
        // halving eps quadruples
    }

    #[test]
    fn lipschitz_constant_examples() {
        assert_relative_eq!(
            lipschitz_constant(1.0, 1.0, 1),
            6f64.sqrt(),
            max_relative = 1e-14
        );

        // L(2R)/L(R) -> 4 in the large R^2/eps regime.
        let ratio = lipschitz_constant(2000.0, 1.0, 8) / lipschitz_constant(1000.0, 1.0, 8);
        assert!((ratio - 4.0).abs() < 1e-4, "scaling ratio {ratio}");
    }

    #[test]
    fn mixed_partial_trace_matches_finite_differences() {
        let eps = 0.8;
        let x = vec![0.7, -0.4, 0.2];
        let d = x.len();
        let k = |a: &[f64], b: &[f64]| {
            let t = dot(a, b);
            t * t / (crate::kernel::sq_dist(a, b) + eps)
        };
        let h = 1e-4;
        let mut fd_trace = 0.0;
        for i in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let mut yp = x.clone();
            let mut ym = x.clone();
            yp[i] += h;
            ym[i] -= h;
            let fd = (k(&xp, &yp) - k(&xp, &ym) - k(&xm, &yp) + k(&xm, &ym)) / (4.0 * h * h);
            fd_trace += fd;
        }
        assert_relative_eq!(fd_trace, trace_mixed_partial(&x, eps), max_relative = 1e-5);
        let m = mixed_partial_matrix(&x, eps);
        assert_relative_eq!(
            m.trace(),
            trace_mixed_partial(&x, eps),
            max_relative = 1e-13
        );
    }

    #[test]
    fn gradient_norm_bounded_by_lipschitz_constant() {
        // 100 random unit-norm elements of the b = 0 RKHS: the sampled
        // gradient norm never exceeds L(R, eps, d).
        let (r, eps, d) = (1.0, 1.0, 2);
        let p = KernelParams::yat(0.0, eps).unwrap();
        let lip = lipschitz_constant(r, eps, d);
        for trial in 0..100 {
            let mut rng = derived_rng(42, trial);
            let f = random_unit_norm_expansion(d, r, 20, &p, &mut rng).unwrap();
            for _ in 0..50 {
                let raw: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = norm(&raw).max(1e-9);
                let s = rng.random_range(0.0..r) / n;
                let x: Vec<f64> = raw.iter().map(|c| c * s).collect();
                let mut grad = vec![0.0; d];
                for (w, a) in f.centers.iter().zip(&f.coefficients) {
                    let g = yat_grad_input(w, &x, &p).unwrap();
                    for (gi, gg) in grad.iter_mut().zip(&g) {
                        *gi += a * gg;
                    }
                }
                assert!(
                    norm(&grad) <= lip * (1.0 + 1e-10),
                    "gradient norm exceeds L"
                );
            }
        }
    }

    #[test]
    fn certified_radius_degenerate_cases() {
        let p = KernelParams::yat(0.0, 1.0).unwrap();
        let head = Expansion::new(vec![vec![0.5, 0.0]], vec![1.0], p).unwrap();

        // Single class: nothing to flip.
        let single = certified_radius(std::slice::from_ref(&head), &[0.1, 0.1], 1.0).unwrap();
        assert!(single.radius.is_infinite());

        // Tied heads: zero margin, zero radius.
        let tied = certified_radius(&[head.clone(), head.clone()], &[0.1, 0.1], 1.0).unwrap();
        assert_eq!(tied.radius, 0.0);

        // Biased heads are rejected.
        let pb = KernelParams::yat(1.0, 1.0).unwrap();
        let biased = Expansion::new(vec![vec![0.5, 0.0]], vec![1.0], pb).unwrap();
        assert!(certified_radius(&[biased.clone(), biased], &[0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn certified_radius_soundness_randomized() {
        // Random 3-class heads in d = 2: perturbations inside the certified
        // ball never change the argmax.
        let (r, eps, d) = (1.0, 1.0, 2usize);
        let p = KernelParams::yat(0.0, eps).unwrap();
        for trial in 0..10u64 {
            let mut rng = derived_rng(77, trial);
            let heads: Vec<Expansion> = (0..3)
                .map(|_| {
                    let m = rng.random_range(2..6);
                    let centers: Vec<Vec<f64>> = (0..m)
                        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                        .collect();
                    let coeffs: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
                    Expansion::new(centers, coeffs, p).unwrap()
                })
                .collect();
            let x = vec![rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
            let cert = certified_radius(&heads, &x, r).unwrap();
            if cert.radius == 0.0 || !cert.radius.is_finite() {
                continue;
            }
            for _ in 0..100 {
                let raw: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = norm(&raw).max(1e-12);
                let scale = rng.random_range(0.0..cert.radius * 0.999) / n;
                let xp: Vec<f64> = x.iter().zip(&raw).map(|(xi, ri)| xi + ri * scale).collect();
                let scores: Vec<f64> = heads.iter().map(|h| h.eval(&xp).unwrap()).collect();
                let arg = scores
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                assert_eq!(
                    arg, cert.predicted_class,
                    "prediction flipped inside certified ball"
                );
            }
        }
    }
}
