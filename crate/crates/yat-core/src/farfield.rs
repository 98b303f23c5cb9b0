//! Exact bias finite-difference identities, the directional asymptotic trace,
//! exterior-shell bounds, the polynomial-gap residual test, and the
//! ridge-approximation constructions with their atom-count calculators.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, YatError};
use crate::gram::Expansion;
use crate::kernel::{
    atom_raw, check_dims, check_finite, dot, norm, AtomRef, KernelFamily, KernelParams,
};
use crate::special::ln_gamma_half;

/// Values of a function along one ray `r -> f(r u)`.
#[derive(Debug, Clone)]
pub struct RaySample {
    pub direction: Vec<f64>,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl RaySample {
    /// Sample `f` along the ray; the direction must be unit norm and the
    /// radii strictly increasing and positive.
    pub fn sample(direction: Vec<f64>, radii: Vec<f64>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        check_finite(&direction, "ray direction")?;
        if (norm(&direction) - 1.0).abs() > 1e-12 {
            return Err(YatError::Precondition(
                "ray direction must be unit norm".into(),
            ));
        }
        if radii.is_empty() || radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(YatError::Precondition(
                "radii must be positive and strictly increasing".into(),
            ));
        }
        let values = radii
            .iter()
            .map(|r| {
                let x: Vec<f64> = direction.iter().map(|c| c * r).collect();
                f(&x)
            })
            .collect();
        Ok(Self {
            direction,
            radii,
            values,
        })
    }
}

/// Inputs of the exterior-shell bounds: coefficient mass, center-norm cap,
/// inner shell radius, and the RBF bandwidth when applicable.
#[derive(Debug, Clone, Copy)]
pub struct ShellBoundInputs {
    pub coefficient_mass: f64,
    pub center_cap: f64,
    pub shell_radius: f64,
    pub gamma: Option<f64>,
}

/// Second-order bias finite difference recovering the IMQ atom:
/// `g(x; w, 3h) - 2 g(x; w, 2h) + g(x; w, h) = 2 h^2 / D_eps(x, w)`.
///
/// Returns `(lhs, rhs)`; the identity is exact, so the two sides agree to
/// floating-point rounding.
///
/// ```
/// use yat_core::farfield::imq_from_yat_triplet;
///
/// let (lhs, rhs) = imq_from_yat_triplet(&[0.5, -0.5], &[0.5, -0.5], 1.0, 2.0)?;
/// assert_eq!(rhs, 1.0); // 2 h^2 / eps on the diagonal
/// assert!((lhs - rhs).abs() < 1e-12);
/// # Ok::<(), yat_core::YatError>(())
/// ```
pub fn imq_from_yat_triplet(x: &[f64], w: &[f64], h: f64, eps: f64) -> Result<(f64, f64)> {
    check_dims(x, w)?;
    if !(h > 0.0) {
        return Err(YatError::InvalidParameter {
            name: "h",
            value: h,
        });
    }
    if !(eps > 0.0) {
        return Err(YatError::InvalidParameter {
            name: "eps",
            value: eps,
        });
    }
    let lhs =
        atom_raw(x, w, 3.0 * h, eps) - 2.0 * atom_raw(x, w, 2.0 * h, eps) + atom_raw(x, w, h, eps);
    let rhs = 2.0 * h * h / (crate::kernel::sq_dist(x, w) + eps);
    Ok((lhs, rhs))
}

/// Quadratic extrapolation to zero bias:
/// `3 g(x; w, h) - 3 g(x; w, 2h) + g(x; w, 3h) = g(x; w, 0)`.
pub fn unbiased_from_biased_triplet(x: &[f64], w: &[f64], h: f64, eps: f64) -> Result<(f64, f64)> {
    check_dims(x, w)?;
    if !(h > 0.0) {
        return Err(YatError::InvalidParameter {
            name: "h",
            value: h,
        });
    }
    if !(eps > 0.0) {
        return Err(YatError::InvalidParameter {
            name: "eps",
            value: eps,
        });
    }
    let lhs = 3.0 * atom_raw(x, w, h, eps) - 3.0 * atom_raw(x, w, 2.0 * h, eps)
        + atom_raw(x, w, 3.0 * h, eps);
    let rhs = atom_raw(x, w, 0.0, eps);
    Ok((lhs, rhs))
}

/// Rewrite an IMQ expansion as a biased-atom expansion with three atoms per
/// input atom (biases `h, 2h, 3h`, coefficients `a/(2h^2) * (1, -2, 1)`),
/// pointwise equal to the input.
pub fn rewrite_imq_expansion_as_yat(e: &Expansion, h: f64) -> Result<Expansion> {
    if e.params.family != KernelFamily::Imq {
        return Err(YatError::Precondition("input expansion must be IMQ".into()));
    }
    if !(h > 0.0) {
        return Err(YatError::InvalidParameter {
            name: "h",
            value: h,
        });
    }
    let mut centers = Vec::with_capacity(3 * e.len());
    let mut coefficients = Vec::with_capacity(3 * e.len());
    let mut biases = Vec::with_capacity(3 * e.len());
    let scale = 1.0 / (2.0 * h * h);
    for (w, a) in e.centers.iter().zip(&e.coefficients) {
        for (bias, sign) in [(3.0 * h, 1.0), (2.0 * h, -2.0), (h, 1.0)] {
            centers.push(w.clone());
            coefficients.push(a * scale * sign);
            biases.push(bias);
        }
    }
    let params = KernelParams::yat(0.0, e.params.eps)?;
    Expansion::with_biases(centers, coefficients, params, Some(biases))
}

/// Default probe radius for far-field estimates: large enough that the
/// O(1/r) deviation sits near 1e-6 for unit-scale centers, and still far
/// inside the f64 range for center norms up to 1e3.
pub const DEFAULT_TRACE_RADIUS: f64 = 1e6;

/// [`directional_trace`] at the default radius, cross-checked at a tenth of
/// it: the deviation from the exact limit must have shrunk by at least 5x,
/// which an O(1/r)-convergent estimate always satisfies.
pub fn directional_trace_checked(w: &[f64], b: f64, eps: f64, u: &[f64]) -> Result<(f64, f64)> {
    let (estimate, exact) = directional_trace(w, b, eps, u, DEFAULT_TRACE_RADIUS)?;
    let (tenth, _) = directional_trace(w, b, eps, u, DEFAULT_TRACE_RADIUS / 10.0)?;
    let dev = (estimate - exact).abs();
    let dev_tenth = (tenth - exact).abs();
    if dev > 0.2 * dev_tenth + 1e-12 {
        return Err(YatError::Precondition(format!(
            "far-field estimate not converging: deviation {dev:e} at r_max vs {dev_tenth:e} at r_max/10"
        )));
    }
    Ok((estimate, exact))
}

/// Far-field value of a biased atom along a ray against its exact limit
/// `(u'w)^2`. Returns `(estimate, exact)`.
pub fn directional_trace(w: &[f64], b: f64, eps: f64, u: &[f64], r_max: f64) -> Result<(f64, f64)> {
    check_dims(w, u)?;
    if (norm(u) - 1.0).abs() > 1e-12 {
        return Err(YatError::Precondition("direction must be unit norm".into()));
    }
    if !(r_max >= 1e3) {
        return Err(YatError::InvalidParameter {
            name: "r_max",
            value: r_max,
        });
    }
    let x: Vec<f64> = u.iter().map(|c| c * r_max).collect();
    let estimate = atom_raw(&x, w, b, eps);
    let a = dot(u, w);
    Ok((estimate, a * a))
}

/// Quantitative far-field bound: for `r` in `[R, 2R]` and any unit `u`,
/// `|g(r u; w, b) - (u'w)^2| <= eta_R` with
/// `eta_R = [4 R ||w|| (b + ||w||^2) + b^2 + ||w||^2 (||w||^2 + eps)] / ((R - ||w||)^2 + eps)`.
pub fn eta_r_bound(w: &[f64], b: f64, eps: f64, r: f64) -> Result<f64> {
    check_finite(w, "center w")?;
    let wn = norm(w);
    if !(r > wn) {
        return Err(YatError::Precondition(format!(
            "need R > ||w|| ({r} <= {wn})"
        )));
    }
    let num = 4.0 * r * wn * (b + wn * wn) + b * b + wn * wn * (wn * wn + eps);
    let den = (r - wn) * (r - wn) + eps;
    Ok(num / den)
}

/// Lower bound on the exterior-shell separation between one biased atom and
/// every bounded-variation IMQ expansion:
/// `(||w*||^2 - eta_R - Lambda / ((R - W)^2 + eps))_+`.
pub fn shell_separation_lower_bound(
    inputs: &ShellBoundInputs,
    w_star: &[f64],
    b: f64,
    eps: f64,
) -> Result<f64> {
    let wn = norm(w_star);
    if !(inputs.center_cap >= wn) {
        return Err(YatError::Precondition(format!(
            "need W >= ||w_star|| ({} < {wn})",
            inputs.center_cap
        )));
    }
    if !(inputs.shell_radius > inputs.center_cap) {
        return Err(YatError::Precondition(format!(
            "need R > W ({} <= {})",
            inputs.shell_radius, inputs.center_cap
        )));
    }
    if !(inputs.coefficient_mass >= 0.0) {
        return Err(YatError::InvalidParameter {
            name: "Lambda",
            value: inputs.coefficient_mass,
        });
    }
    let eta = eta_r_bound(w_star, b, eps, inputs.shell_radius)?;
    let gap = inputs.shell_radius - inputs.center_cap;
    let radial = inputs.coefficient_mass / (gap * gap + eps);
    Ok((wn * wn - eta - radial).max(0.0))
}

/// Sup-norm decay cap of a bounded-variation radial expansion on the shell
/// `[R, 2R]`: `Lambda / ((R - W)^2 + eps)` for IMQ, `Lambda exp(-gamma (R-W)^2)`
/// when an RBF bandwidth is supplied.
pub fn shell_decay_bound(inputs: &ShellBoundInputs, eps: f64) -> Result<f64> {
    if !(inputs.shell_radius > inputs.center_cap) {
        return Err(YatError::Precondition(format!(
            "need R > W ({} <= {})",
            inputs.shell_radius, inputs.center_cap
        )));
    }
    let gap = inputs.shell_radius - inputs.center_cap;
    Ok(match inputs.gamma {
        Some(gamma) => inputs.coefficient_mass * (-gamma * gap * gap).exp(),
        None => inputs.coefficient_mass / (gap * gap + eps),
    })
}

/// Sup residual of the best degree-2 polynomial fit to the atom restricted
/// to the line through `w_star`, sampled on `n_samples` uniform points.
pub fn poly_gap_residual(
    w_star: &[f64],
    b: f64,
    eps: f64,
    interval: (f64, f64),
    n_samples: usize,
) -> Result<f64> {
    let (lo, hi) = interval;
    if !(hi > lo) {
        return Err(YatError::Precondition(format!(
            "degenerate interval [{lo}, {hi}]"
        )));
    }
    let wn = norm(w_star);
    if wn == 0.0 {
        return Err(YatError::Precondition("w_star must be nonzero".into()));
    }
    if n_samples < 3 {
        return Err(YatError::Precondition(
            "need at least 3 sample points".into(),
        ));
    }
    let v: Vec<f64> = w_star.iter().map(|c| c / wn).collect();
    let ts: Vec<f64> = (0..n_samples)
        .map(|i| lo + (hi - lo) * i as f64 / (n_samples - 1) as f64)
        .collect();
    let ys: Vec<f64> = ts
        .iter()
        .map(|t| {
            let x: Vec<f64> = v.iter().map(|c| c * t).collect();
            atom_raw(&x, w_star, b, eps)
        })
        .collect();
    Ok(quadratic_fit_sup_residual(&ts, &ys))
}

/// Least-squares degree-2 fit in a rescaled coordinate, returning the sup
/// residual. Exposed for the fitter sanity tests.
pub fn quadratic_fit_sup_residual(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len();
    let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let mut design = DMatrix::zeros(n, 3);
    for (i, t) in ts.iter().enumerate() {
        let s = (2.0 * t - (lo + hi)) / span;
        design[(i, 0)] = 1.0;
        design[(i, 1)] = s;
        design[(i, 2)] = s * s;
    }
    let rhs = DVector::from_column_slice(ys);
    let coeffs = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .expect("least-squares solve on a 3-column design cannot fail");
    let fitted = design * coeffs;
    (0..n)
        .map(|i| (ys[i] - fitted[i]).abs())
        .fold(0.0, f64::max)
}

/// Single-atom approximation of the rank-one quadratic `(w*'x)^2` on
/// `[-R, R]^d`: returns the center scale
/// `alpha0 = max(8 R^3 d^{3/2} / delta, 2 sqrt(d R^2 (d R^2 + eps) / delta))`
/// and the atom at center `alpha0 w*` with bias 0.
pub fn ridge_atom(
    w_star: &[f64],
    delta: f64,
    r: f64,
    eps: f64,
    d: usize,
) -> Result<(f64, AtomRef)> {
    if d != w_star.len() {
        return Err(YatError::DimensionMismatch(d, w_star.len()));
    }
    if (norm(w_star) - 1.0).abs() > 1e-12 {
        return Err(YatError::Precondition("w_star must be unit norm".into()));
    }
    if !(delta > 0.0) {
        return Err(YatError::InvalidParameter {
            name: "delta",
            value: delta,
        });
    }
    let df = d as f64;
    let first = 8.0 * r.powi(3) * df.powf(1.5) / delta;
    let second = 2.0 * (df * r * r * (df * r * r + eps) / delta).sqrt();
    let alpha0 = first.max(second);
    let atom = AtomRef::new(w_star.iter().map(|c| alpha0 * c).collect(), 0.0)?;
    Ok((alpha0, atom))
}

/// Sampled sup of `|f(x)|` over `[-r, r]^d`: a full tensor grid for
/// `d <= 4` (denser on low dimensions, 41 points per axis at d = 3, 4),
/// otherwise `10^5` uniform points from a fixed seed.
pub fn sup_abs_on_box(d: usize, r: f64, seed: u64, f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut sup = 0.0f64;
    if d <= 4 {
        let per_axis = match d {
            1 => 10_001usize,
            2 => 101,
            _ => 41,
        };
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0f64; d];
        loop {
            for (k, i) in idx.iter().enumerate() {
                x[k] = -r + 2.0 * r * *i as f64 / (per_axis - 1) as f64;
            }
            sup = sup.max(f(&x).abs());
            // odometer increment
            let mut k = 0;
            loop {
                if k == d {
                    return sup;
                }
                idx[k] += 1;
                if idx[k] < per_axis {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0f64; d];
        for _ in 0..100_000 {
            for c in x.iter_mut() {
                *c = rng.random_range(-r..r);
            }
            sup = sup.max(f(&x).abs());
        }
        sup
    }
}

/// Approximate a symmetric quadratic form `x' A x` by one bias-zero atom per
/// retained eigendirection, each at tolerance `delta / (rank * |lambda_k|)`.
pub fn quadratic_form_expansion(
    a: &DMatrix<f64>,
    delta: f64,
    r: f64,
    eps: f64,
) -> Result<Expansion> {
    if a.nrows() != a.ncols() {
        return Err(YatError::DimensionMismatch(a.nrows(), a.ncols()));
    }
    if !(delta > 0.0) {
        return Err(YatError::InvalidParameter {
            name: "delta",
            value: delta,
        });
    }
    let d = a.nrows();
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let params = KernelParams::yat(0.0, eps)?;
    if max_abs == 0.0 {
        return Expansion::new(Vec::new(), Vec::new(), params);
    }
    let threshold = 1e-10 * max_abs;
    let retained: Vec<usize> = (0..d)
        .filter(|&k| eig.eigenvalues[k].abs() > threshold)
        .collect();
    let rank = retained.len();
    let mut centers = Vec::with_capacity(rank);
    let mut coefficients = Vec::with_capacity(rank);
    for &k in &retained {
        let lambda = eig.eigenvalues[k];
        let unit: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let per_atom_delta = delta / (rank as f64 * lambda.abs());
        let (_, atom) = ridge_atom(&unit, per_atom_delta, r, eps, d)?;
        centers.push(atom.center);
        coefficients.push(lambda);
    }
    Expansion::new(centers, coefficients, params)
}

/// Natural log of the IMQ atom-count lower bound
/// `m >= (2R)^{d-1} Gamma((d+1)/2) / (pi^{(d-1)/2} rho^{d-1})` with
/// `rho^2 = Lambda / (lambda_max R^2 - delta) - eps`.
pub fn imq_atom_count_log_lower_bound(
    lambda_max: f64,
    r: f64,
    delta: f64,
    eps: f64,
    coefficient_mass: f64,
    d: usize,
) -> Result<f64> {
    if d < 1 {
        return Err(YatError::Precondition(
            "dimension must be at least 1".into(),
        ));
    }
    let margin = lambda_max * r * r - delta;
    if !(margin > 0.0) {
        return Err(YatError::Precondition(format!(
            "need delta < lambda_max R^2 (margin {margin})"
        )));
    }
    let rho2 = coefficient_mass / margin - eps;
    if !(rho2 > 0.0) {
        return Err(YatError::Precondition(format!(
            "need Lambda > eps (lambda_max R^2 - delta) (rho^2 = {rho2})"
        )));
    }
    let dm1 = (d - 1) as f64;
    Ok(dm1 * (2.0 * r).ln() + ln_gamma_half((d + 1) as u64)
        - 0.5 * dm1 * std::f64::consts::PI.ln()
        - 0.5 * dm1 * rho2.ln())
}

/// The covering lower bound itself; saturates to `+inf` once the log form
/// exceeds the f64 range.
pub fn imq_atom_count_lower_bound(
    lambda_max: f64,
    r: f64,
    delta: f64,
    eps: f64,
    coefficient_mass: f64,
    d: usize,
) -> Result<f64> {
    Ok(imq_atom_count_log_lower_bound(lambda_max, r, delta, eps, coefficient_mass, d)?.exp())
}
