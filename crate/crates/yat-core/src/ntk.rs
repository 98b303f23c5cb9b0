//! Monte-Carlo estimation of the infinite-width tangent kernel of one
//! kernel-unit layer, plus finite-width convergence diagnostics.
//!
//! The layer `f_m(x) = m^{-1/2} sum_j alpha_j g(x; w_j, b)` with
//! `w_j ~ N(0, sigma_w^2 I)`, `alpha_j ~ N(0, 1)` has tangent kernel
//! `Theta = Theta_alpha + Theta_w`, the Gaussian averages of
//! `g(x; w) g(x'; w)` and `<grad_w g(x; w), grad_w g(x'; w)>`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, YatError};
use crate::gram::GramMatrix;
use crate::kernel::{atom_raw, check_dims, yat_grad_center, KernelParams};
use crate::rng::derived_rng;

/// Sampling configuration: initialization scale, kernel parameters, layer
/// width, Monte-Carlo budget, and the base seed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NtkConfig {
    pub sigma_w: f64,
    pub b: f64,
    pub eps: f64,
    pub width: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl NtkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_w > 0.0) {
            return Err(YatError::InvalidParameter {
                name: "sigma_w",
                value: self.sigma_w,
            });
        }
        if self.b < 0.0 {
            return Err(YatError::InvalidParameter {
                name: "b",
                value: self.b,
            });
        }
        if !(self.eps > 0.0) {
            return Err(YatError::InvalidParameter {
                name: "eps",
                value: self.eps,
            });
        }
        if self.width == 0 || self.mc_samples == 0 {
            return Err(YatError::EmptyInput("width / mc_samples"));
        }
        Ok(())
    }
}

/// Monte-Carlo estimate of one tangent-kernel entry.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NtkEstimate {
    pub theta_alpha: f64,
    pub theta_w: f64,
    /// Standard error of the summed estimate `theta_alpha + theta_w`.
    pub std_err: f64,
}

fn gaussian_center(d: usize, sigma_w: f64, rng: &mut impl Rng) -> Vec<f64> {
    (0..d)
        .map(|_| sigma_w * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Estimate `Theta(x, x')` by averaging over `mc_samples` Gaussian centers,
/// using the closed-form center gradient.
pub fn ntk_mc(x: &[f64], x2: &[f64], cfg: &NtkConfig) -> Result<NtkEstimate> {
    cfg.validate()?;
    check_dims(x, x2)?;
    let d = x.len();
    let p = KernelParams::yat(cfg.b, cfg.eps)?;
    let mut rng = derived_rng(cfg.seed, 0);
    let mut sum_a = 0.0;
    let mut sum_w = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..cfg.mc_samples {
        let w = gaussian_center(d, cfg.sigma_w, &mut rng);
        let ga = atom_raw(x, &w, cfg.b, cfg.eps) * atom_raw(x2, &w, cfg.b, cfg.eps);
        let g1 = yat_grad_center(&w, x, &p)?;
        let g2 = yat_grad_center(&w, x2, &p)?;
        let gw: f64 = g1.iter().zip(&g2).map(|(a, b)| a * b).sum();
        sum_a += ga;
        sum_w += gw;
        let s = ga + gw;
        sum_sq += s * s;
    }
    let m = cfg.mc_samples as f64;
    let mean = (sum_a + sum_w) / m;
    let var = (sum_sq / m - mean * mean).max(0.0);
    Ok(NtkEstimate {
        theta_alpha: sum_a / m,
        theta_w: sum_w / m,
        std_err: (var / m).sqrt(),
    })
}

/// Tangent-kernel Gram estimate on a point set with one shared center
/// sample for every entry.
///
/// Sharing the draws makes the estimate a finite feature-map Gram, hence
/// exactly PSD up to roundoff rather than only asymptotically.
pub fn ntk_gram(points: &[Vec<f64>], cfg: &NtkConfig) -> Result<GramMatrix> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(YatError::EmptyInput("points"));
    }
    let d = points[0].len();
    for pt in points {
        check_dims(pt, &points[0])?;
    }
    let n = points.len();
    let p = KernelParams::yat(cfg.b, cfg.eps)?;
    let mut rng = derived_rng(cfg.seed, 0);
    let mut entries = nalgebra::DMatrix::<f64>::zeros(n, n);
    let mut values = vec![0.0f64; n];
    let mut grads: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
    for _ in 0..cfg.mc_samples {
        let w = gaussian_center(d, cfg.sigma_w, &mut rng);
        for (i, pt) in points.iter().enumerate() {
            values[i] = atom_raw(pt, &w, cfg.b, cfg.eps);
            grads[i] = yat_grad_center(&w, pt, &p)?;
        }
        for i in 0..n {
            for j in i..n {
                let gw: f64 = grads[i].iter().zip(&grads[j]).map(|(a, b)| a * b).sum();
                entries[(i, j)] += values[i] * values[j] + gw;
            }
        }
    }
    let m = cfg.mc_samples as f64;
    for i in 0..n {
        for j in i..n {
            let v = entries[(i, j)] / m;
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(GramMatrix {
        entries,
        nodes: points.to_vec(),
        params: p,
    })
}

/// One row of the finite-width convergence table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub width: usize,
    /// Across-seed variance of the empirical tangent-kernel entries,
    /// averaged over the probe pairs.
    pub variance: f64,
    /// Across-seed mean entry, averaged over the probe pairs.
    pub mean: f64,
}

/// Finite-width convergence table over increasing widths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub seeds_per_width: usize,
}

impl ConvergenceTable {
    /// Log-log slope of variance against width (about -1 under 1/m scaling).
    pub fn loglog_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.variance > 0.0)
            .map(|r| ((r.width as f64).ln(), r.variance.ln()))
            .collect();
        let n = pts.len() as f64;
        if n < 2.0 {
            return f64::NAN;
        }
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("width,seed_variance,mean\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.width, r.variance, r.mean));
        }
        out
    }
}

/// Empirical tangent kernel of a width-`m` layer at one random draw:
/// `Theta_m(x, x') = (1/m) sum_j [g_j(x) g_j(x') + alpha_j^2 <grad g_j(x), grad g_j(x')>]`.
fn empirical_ntk_entries(
    points: &[Vec<f64>],
    width: usize,
    cfg: &NtkConfig,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let n = points.len();
    let d = points[0].len();
    let p = KernelParams::yat(cfg.b, cfg.eps)?;
    let mut acc = vec![0.0f64; n * (n + 1) / 2];
    let mut values = vec![0.0f64; n];
    let mut grads: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
    for _ in 0..width {
        let w = gaussian_center(d, cfg.sigma_w, rng);
        let alpha: f64 = rng.sample(StandardNormal);
        for (i, pt) in points.iter().enumerate() {
            values[i] = atom_raw(pt, &w, cfg.b, cfg.eps);
            grads[i] = yat_grad_center(&w, pt, &p)?;
        }
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                let gw: f64 = grads[i].iter().zip(&grads[j]).map(|(a, b)| a * b).sum();
                acc[k] += values[i] * values[j] + alpha * alpha * gw;
                k += 1;
            }
        }
    }
    Ok(acc.into_iter().map(|v| v / width as f64).collect())
}

/// Across-seed variance of the empirical tangent kernel at each width.
///
/// Each `(width, seed)` trial draws its own derived stream, so the table is
/// reproducible for any evaluation order.
pub fn empirical_ntk_convergence(
    points: &[Vec<f64>],
    cfg: &NtkConfig,
    widths: &[usize],
    seeds_per_width: usize,
) -> Result<ConvergenceTable> {
    cfg.validate()?;
    if points.len() < 2 {
        return Err(YatError::Precondition(
            "need at least two probe points".into(),
        ));
    }
    if widths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(YatError::Precondition(
            "widths must be strictly increasing".into(),
        ));
    }
    if seeds_per_width < 2 {
        return Err(YatError::Precondition(
            "need at least two seeds per width".into(),
        ));
    }
    let n_entries = points.len() * (points.len() + 1) / 2;
    let mut rows = Vec::with_capacity(widths.len());
    for (wi, &width) in widths.iter().enumerate() {
        let mut per_seed = Vec::with_capacity(seeds_per_width);
        for s in 0..seeds_per_width {
            let mut rng = derived_rng(cfg.seed, (wi * seeds_per_width + s) as u64 + 1);
            per_seed.push(empirical_ntk_entries(points, width, cfg, &mut rng)?);
        }
        let mut var_acc = 0.0;
        let mut mean_acc = 0.0;
        let m = seeds_per_width as f64;
        for e in 0..n_entries {
            let mean = per_seed.iter().map(|v| v[e]).sum::<f64>() / m;
            let var = per_seed
                .iter()
                .map(|v| (v[e] - mean) * (v[e] - mean))
                .sum::<f64>()
                / (m - 1.0);
            var_acc += var;
            mean_acc += mean;
        }
        rows.push(ConvergenceRow {
            width,
            variance: var_acc / n_entries as f64,
            mean: mean_acc / n_entries as f64,
        });
    }
    Ok(ConvergenceTable {
        rows,
        seeds_per_width,
    })
}
