//! Zonal reduction on the unit sphere and the Funk-Hecke spectral
//! decomposition.
//!
//! On `S^{d-1}` the squared distance collapses to `2 - 2t` with `t = u'v`,
//! so the alignment kernel becomes the zonal profile
//! `kappa(t) = (t + b)^2 / (eps + 2 - 2t)` and the IMQ becomes
//! `1 / (eps + 2 - 2t)`. Both are rational with one simple pole at
//! `t* = 1 + eps/2 > 1`, which fixes the geometric eigenvalue decay base
//! `rho* = t* + sqrt(t*^2 - 1)`.
//!
//! Eigenvalue normalization: the integral operator acts against the
//! *surface measure* on `S^{d-1}` (not the probability measure), so
//! `lambda_l = |S^{d-2}| / C_l(1) * int kappa(t) C_l(t) (1-t^2)^{(d-3)/2} dt`
//! and the trace identity `sum_l N(l,d) lambda_l = |S^{d-1}| kappa(1)` pins
//! the convention. The decay-ratio diagnostics are normalization-free.
//!
//! Numerics: the obvious route (Gauss-Jacobi quadrature against an upward
//! Gegenbauer recurrence) loses the eigenvalues to cancellation once
//! `lambda_l` falls below ~1e-16 relative to the integrand scale, which for
//! `eps = 1` happens near `l = 35`. The implementation instead splits the
//! profile as `kappa(t) = poly(t) + A / (t* - t)`; the polynomial part hits
//! only `l <= 1`, and the pole part's Gegenbauer moments satisfy the same
//! three-term recurrence as the polynomials, run *backward* (the stable
//! direction for this minimal solution) and normalized against the
//! quadrature value of the `l = 0` moment. Quadrature enters only through
//! smooth positive integrands, so every eigenvalue is accurate to near
//! machine precision relative to itself, at any order.

use serde::{Deserialize, Serialize};

use crate::error::{Result, YatError};
use crate::kernel::{KernelFamily, KernelParams};
use crate::special::{harmonic_multiplicity, ln_gamma_half, unit_sphere_area};

/// Zonal profile of a kernel restricted to the unit sphere.
#[derive(Debug, Clone, Copy)]
pub struct ZonalKernel {
    pub eps: f64,
    pub b: f64,
    pub family: KernelFamily,
}

impl ZonalKernel {
    /// Profile value `kappa(t)` for `t` in `[-1, 1]`.
    pub fn kappa(&self, t: f64) -> f64 {
        match self.family {
            KernelFamily::Yat => {
                let a = t + self.b;
                a * a / (self.eps + 2.0 - 2.0 * t)
            }
            KernelFamily::Imq => 1.0 / (self.eps + 2.0 - 2.0 * t),
            _ => unreachable!("zonal kernels are Yat or IMQ only"),
        }
    }

    /// Pole location `t* = 1 + eps/2`.
    pub fn pole(&self) -> f64 {
        1.0 + self.eps / 2.0
    }

    /// Amplitude of the simple pole in the split
    /// `kappa(t) = poly_1(t) + amp / (t* - t)`; the polynomial remainder has
    /// degree at most one and therefore only touches the `l <= 1` sectors.
    fn pole_amplitude(&self) -> f64 {
        let ts = self.pole();
        match self.family {
            // (t+b)^2 / (eps + 2 - 2t) = -(t + 2b + t*)/2 + (t* + b)^2 / (2 (t* - t))
            KernelFamily::Yat => (ts + self.b) * (ts + self.b) / 2.0,
            KernelFamily::Imq => 0.5,
            _ => unreachable!(),
        }
    }
}

/// Restrict a kernel to the unit sphere. Only the Yat and IMQ families have
/// a zonal form here.
pub fn zonal_reduce(p: &KernelParams) -> Result<ZonalKernel> {
    match p.family {
        KernelFamily::Yat | KernelFamily::Imq => Ok(ZonalKernel {
            eps: p.eps,
            b: p.b,
            family: p.family,
        }),
        other => Err(YatError::Precondition(format!(
            "no zonal reduction implemented for {other:?}"
        ))),
    }
}

/// Geometric decay base `rho* = 1 + eps/2 + sqrt(eps + eps^2/4)`.
pub fn rho_star(eps: f64) -> f64 {
    1.0 + eps / 2.0 + (eps + eps * eps / 4.0).sqrt()
}

/// Funk-Hecke eigenvalues with multiplicities and the fitted decay base.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub d: usize,
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<f64>,
    pub fitted_rho: f64,
    pub rho_star: f64,
}

impl SpectrumResult {
    pub fn max_degree(&self) -> usize {
        self.eigenvalues.len().saturating_sub(1)
    }

    /// CSV rows `l, N(l,d), lambda_l` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ell,multiplicity,eigenvalue\n");
        for (ell, (lam, mult)) in self
            .eigenvalues
            .iter()
            .zip(&self.multiplicities)
            .enumerate()
        {
            out.push_str(&format!("{ell},{mult},{lam}\n"));
        }
        out
    }
}

/// Gauss-Jacobi nodes and weights for the weight `(1 - t^2)^a` on `[-1, 1]`
/// (symmetric Jacobi), via the Golub-Welsch tridiagonal.
pub fn gauss_jacobi_symmetric(n: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "need at least two quadrature nodes");
    assert!(a > -1.0, "weight exponent must exceed -1");
    let mut tri = nalgebra::DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let off2 = if k == 1 {
            1.0 / (2.0 * a + 3.0)
        } else {
            kf * (kf + 2.0 * a) / ((2.0 * kf + 2.0 * a - 1.0) * (2.0 * kf + 2.0 * a + 1.0))
        };
        let off = off2.sqrt();
        tri[(k - 1, k)] = off;
        tri[(k, k - 1)] = off;
    }
    let eig = tri.symmetric_eigen();
    // ln mu0 = (2a+1) ln 2 + 2 ln Gamma(a+1) - ln Gamma(2a+2), with
    // a = (d-3)/2 so both gamma arguments are half-integers.
    let two_ap1 = (2.0 * a + 2.0).round() as u64; // 2*(a+1)
    let mu0 = ((2.0 * a + 1.0) * std::f64::consts::LN_2 + 2.0 * ln_gamma_half(two_ap1)
        - ln_gamma_half(2 * two_ap1))
    .exp();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            (
                eig.eigenvalues[i],
                mu0 * eig.eigenvectors[(0, i)] * eig.eigenvectors[(0, i)],
            )
        })
        .collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    pairs.into_iter().unzip()
}

/// `C_l^(nu)(1) = prod_{j<l} (2 nu + j) / (1 + j)` in log space.
fn ln_gegenbauer_at_one(ell: usize, nu: f64) -> f64 {
    (0..ell)
        .map(|j| ((2.0 * nu + j as f64) / (1.0 + j as f64)).ln())
        .sum()
}

/// Evaluate the degree-`0..=l_max` Gegenbauer (d >= 3) or Chebyshev (d = 2)
/// values at `t` by the upward three-term recurrence.
fn basis_values(t: f64, l_max: usize, d: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if l_max == 0 {
        return;
    }
    if d == 2 {
        out.push(t);
        for l in 2..=l_max {
            let v = 2.0 * t * out[l - 1] - out[l - 2];
            out.push(v);
        }
    } else {
        let nu = (d as f64 - 2.0) / 2.0;
        out.push(2.0 * nu * t);
        for l in 2..=l_max {
            let lf = l as f64;
            let v =
                (2.0 * (lf + nu - 1.0) * t * out[l - 1] - (lf + 2.0 * nu - 2.0) * out[l - 2]) / lf;
            out.push(v);
        }
    }
}

/// Direct Funk-Hecke evaluation of an arbitrary zonal profile by quadrature:
/// `lambda_l = |S^{d-2}| / C_l(1) * sum_i w_i kappa(t_i) C_l(t_i)`.
///
/// This path is exact for low degrees but loses eigenvalues below the
/// cancellation floor (~1e-16 of the integrand scale); use
/// [`funk_hecke_eigenvalues`] for the rational kernels.
pub fn funk_hecke_quadrature(
    kappa: impl Fn(f64) -> f64,
    d: usize,
    l_max: usize,
    n_nodes: usize,
) -> Result<Vec<f64>> {
    if d < 2 {
        return Err(YatError::Precondition(
            "sphere dimension requires d >= 2".into(),
        ));
    }
    let a = (d as f64 - 3.0) / 2.0;
    let (nodes, weights) = gauss_jacobi_symmetric(n_nodes, a);
    let area = unit_sphere_area(d - 1);
    let mut sums = vec![0.0f64; l_max + 1];
    let mut basis = Vec::with_capacity(l_max + 1);
    for (t, w) in nodes.iter().zip(&weights) {
        let kv = kappa(*t);
        basis_values(*t, l_max, d, &mut basis);
        for (s, c) in sums.iter_mut().zip(&basis) {
            *s += w * kv * c;
        }
    }
    let nu = (d as f64 - 2.0) / 2.0;
    Ok((0..=l_max)
        .map(|l| {
            let c1 = if d == 2 {
                1.0
            } else {
                ln_gegenbauer_at_one(l, nu).exp()
            };
            area * sums[l] / c1
        })
        .collect())
}

/// Pole moments `I_l = int C_l(t) (1-t^2)^a / (t* - t) dt` for `l = 0..=l_max`,
/// returned as natural logs (all `I_l > 0`).
///
/// Backward recurrence seeded past `l_max`, normalized by the quadrature
/// value of `I_0`; `ln_i0` is that anchor.
fn pole_moments_ln(d: usize, t_star: f64, l_max: usize, ln_i0: f64) -> Vec<f64> {
    if d == 2 {
        // Closed form: I_l = pi * rho^{-l} / sqrt(t*^2 - 1).
        let rho = t_star + (t_star * t_star - 1.0).sqrt();
        let base = std::f64::consts::PI.ln() - 0.5 * (t_star * t_star - 1.0).ln();
        return (0..=l_max).map(|l| base - l as f64 * rho.ln()).collect();
    }
    let nu = (d as f64 - 2.0) / 2.0;
    let rho = t_star + (t_star * t_star - 1.0).sqrt();
    // Enough buffer that the seed error has damped below 1e-18 by l_max.
    let buffer = (24.0 / rho.ln()).ceil() as usize + 10;
    let top = l_max + buffer;
    // Downward pass with periodic rescaling; store ln |I~_l| for l <= l_max.
    // The moment recurrence (for l >= 2, using orthogonality to constants)
    //   l I_l = 2 (l + nu - 1) t* I_{l-1} - (l + 2 nu - 2) I_{l-2}
    // is run in the stable downward direction: from (I_{l+1}, I_l) recover
    //   I_{l-1} = [2 (l + nu) t* I_l - (l + 1) I_{l+1}] / (l + 2 nu - 1).
    let mut ln_vals = vec![0.0f64; l_max + 1];
    let mut hi = 0.0f64; // I~_{l+1}
    let mut mid = 1.0f64; // I~_l
    let mut ln_scale = 0.0f64;
    let mut l = top;
    loop {
        if l <= l_max {
            ln_vals[l] = mid.abs().max(f64::MIN_POSITIVE).ln() + ln_scale;
        }
        if l == 0 {
            break;
        }
        let lf = l as f64;
        let lo = (2.0 * (lf + nu) * t_star * mid - (lf + 1.0) * hi) / (lf + 2.0 * nu - 1.0);
        hi = mid;
        mid = lo;
        if mid.abs() > 1e250 {
            hi /= 1e250;
            mid /= 1e250;
            ln_scale += 250.0 * std::f64::consts::LN_10;
        }
        l -= 1;
    }
    let ln_anchor = ln_vals[0];
    ln_vals.iter().map(|v| v - ln_anchor + ln_i0).collect()
}

fn fit_decay_base(eigenvalues: &[f64]) -> f64 {
    // The eigenvalues behave like C rho^{-l} l^p with a d-dependent
    // polynomial prefactor; a plain log-linear fit over a finite window
    // absorbs part of the prefactor into the slope (a ~1.4% bias over
    // [20, 60] at d = 3). Fit ln lambda = a + s l + p ln l instead and
    // read the base off exp(-s).
    let lo = 20usize.min(eigenvalues.len().saturating_sub(1));
    let hi = 60usize.min(eigenvalues.len().saturating_sub(1));
    let pts: Vec<(f64, f64)> = (lo.max(2)..=hi)
        .filter(|&l| eigenvalues[l] > 0.0)
        .map(|l| (l as f64, eigenvalues[l].ln()))
        .collect();
    if pts.len() < 8 {
        return f64::NAN;
    }
    let n = pts.len();
    let mut design = nalgebra::DMatrix::zeros(n, 3);
    let mut rhs = nalgebra::DVector::zeros(n);
    for (i, (l, ln_lam)) in pts.iter().enumerate() {
        design[(i, 0)] = 1.0;
        design[(i, 1)] = *l;
        design[(i, 2)] = l.ln();
        rhs[i] = *ln_lam;
    }
    match design.svd(true, true).solve(&rhs, 1e-14) {
        Ok(coeffs) => (-coeffs[1]).exp(),
        Err(_) => f64::NAN,
    }
}

fn spectrum_anchors(z: &ZonalKernel, d: usize, n_nodes: usize) -> (f64, f64, f64) {
    let a = (d as f64 - 3.0) / 2.0;
    let t_star = z.pole();
    let (nodes, weights) = gauss_jacobi_symmetric(n_nodes, a);
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut i0 = 0.0;
    for (t, w) in nodes.iter().zip(&weights) {
        let kv = z.kappa(*t);
        s0 += w * kv;
        s1 += w * kv * t;
        i0 += w / (t_star - t);
    }
    (s0, s1, i0)
}

/// Funk-Hecke eigenvalues of a zonal kernel on `S^{d-1}` up to degree `L`.
///
/// Quadrature starts at 128 nodes and doubles until the anchor integrals
/// (`lambda_0`, `lambda_1`, and the pole moment `I_0`) are stable to 1e-11
/// relative; the high-degree eigenvalues follow from the backward recurrence
/// and are therefore exactly as stable as the anchors.
pub fn funk_hecke_eigenvalues(z: &ZonalKernel, d: usize, l_max: usize) -> Result<SpectrumResult> {
    if d < 2 {
        return Err(YatError::Precondition(
            "sphere dimension requires d >= 2".into(),
        ));
    }
    let mut n_nodes = 128usize;
    let (mut prev, mut cur) = (
        spectrum_anchors(z, d, n_nodes),
        spectrum_anchors(z, d, 2 * n_nodes),
    );
    loop {
        let rel = |p: f64, c: f64| (p - c).abs() / c.abs().max(1e-300);
        let worst = rel(prev.0, cur.0)
            .max(rel(prev.1, cur.1))
            .max(rel(prev.2, cur.2));
        if worst < 1e-11 {
            break;
        }
        n_nodes *= 2;
        if n_nodes > 4096 {
            return Err(YatError::QuadratureNotConverged {
                nodes: n_nodes,
                last_change: worst,
            });
        }
        prev = cur;
        cur = spectrum_anchors(z, d, 2 * n_nodes);
    }
    spectrum_from_anchors(z, d, l_max, cur)
}

/// Same spectrum with the anchor quadrature pinned to a fixed node count;
/// lets callers run the node-doubling comparison themselves.
pub fn funk_hecke_eigenvalues_fixed(
    z: &ZonalKernel,
    d: usize,
    l_max: usize,
    n_nodes: usize,
) -> Result<SpectrumResult> {
    if d < 2 {
        return Err(YatError::Precondition(
            "sphere dimension requires d >= 2".into(),
        ));
    }
    spectrum_from_anchors(z, d, l_max, spectrum_anchors(z, d, n_nodes))
}

fn spectrum_from_anchors(
    z: &ZonalKernel,
    d: usize,
    l_max: usize,
    anchors: (f64, f64, f64),
) -> Result<SpectrumResult> {
    if l_max > 200 {
        return Err(YatError::Precondition("degree cap is L <= 200".into()));
    }
    let t_star = z.pole();
    let amp = z.pole_amplitude();
    let area = unit_sphere_area(d - 1);
    let nu = (d as f64 - 2.0) / 2.0;
    let (s0, s1, i0) = anchors;

    // lambda_0 and lambda_1 carry the polynomial remainder of the pole
    // split, so they come straight from quadrature of the full profile;
    // the C_1 normalization cancels against the C_1 inside the integral.
    let lambda0 = area * s0;
    let lambda1 = area * s1;

    let ln_i = pole_moments_ln(d, t_star, l_max, i0.ln());
    let ln_area_amp = area.ln() + amp.ln();
    let mut eigenvalues = Vec::with_capacity(l_max + 1);
    for (l, ln_il) in ln_i.iter().enumerate() {
        if l == 0 {
            eigenvalues.push(lambda0);
        } else if l == 1 {
            eigenvalues.push(lambda1);
        } else {
            let ln_c1 = if d == 2 {
                0.0
            } else {
                ln_gegenbauer_at_one(l, nu)
            };
            eigenvalues.push((ln_area_amp + ln_il - ln_c1).exp());
        }
    }

    // Mercer nonnegativity, up to quadrature roundoff on the anchors.
    let floor = -1e-12 * eigenvalues[0].abs();
    if eigenvalues.iter().any(|l| *l < floor) {
        return Err(YatError::Precondition(
            "computed spectrum has a negative eigenvalue".into(),
        ));
    }

    let multiplicities: Vec<f64> = (0..=l_max).map(|l| harmonic_multiplicity(l, d)).collect();
    let fitted_rho = fit_decay_base(&eigenvalues);
    Ok(SpectrumResult {
        d,
        eigenvalues,
        multiplicities,
        fitted_rho,
        rho_star: rho_star(z.eps),
    })
}

/// Effective dimension `N(lambda) = sum_l N(l,d) lambda_l / (lambda_l + lambda)`.
///
/// Errors when the retained spectrum is too short for the requested
/// regularization: the tail estimate `lambda_L N(L,d) / lambda` must be
/// below 1e-6.
pub fn effective_dimension(s: &SpectrumResult, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(YatError::InvalidParameter {
            name: "lambda",
            value: lambda,
        });
    }
    let l_last = s.max_degree();
    let tail = s.eigenvalues[l_last] * s.multiplicities[l_last] / lambda;
    if tail >= 1e-6 {
        return Err(YatError::TruncationInsufficient { tail, limit: 1e-6 });
    }
    Ok(s.eigenvalues
        .iter()
        .zip(&s.multiplicities)
        .map(|(l, m)| m * l / (l + lambda))
        .sum())
}
