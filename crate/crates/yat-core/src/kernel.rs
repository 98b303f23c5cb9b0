//! Pointwise kernel evaluation.
//!
//! Four kernel families share one parameter struct: the rational alignment
//! kernel ("Yat"), the inverse multiquadric, the Gaussian RBF, and the
//! quadratic polynomial kernel. All math is f64; inputs are validated at
//! construction so the evaluation path stays branch-light.

use serde::{Deserialize, Serialize};

use crate::error::{Result, YatError};

/// Kernel family tag. `gamma` is the RBF bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelFamily {
    Yat,
    Imq,
    Rbf { gamma: f64 },
    Poly2,
}

/// Shared kernel parameters `(b, eps)` plus the family tag.
///
/// `eps > 0` always. `b >= 0` unless the value was constructed through
/// [`KernelParams::yat_counterexample`], which exists solely to exercise the
/// PSD failure mode at negative bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub b: f64,
    pub eps: f64,
    pub family: KernelFamily,
    #[serde(default)]
    negative_bias_allowed: bool,
}

impl KernelParams {
    fn validate(b: f64, eps: f64) -> Result<()> {
        if !b.is_finite() {
            return Err(YatError::NonFinite("bias b"));
        }
        if !eps.is_finite() || eps <= 0.0 {
            return Err(YatError::InvalidParameter {
                name: "eps",
                value: eps,
            });
        }
        Ok(())
    }

    /// Rational alignment kernel `(w'x+b)^2 / (||x-w||^2 + eps)`.
    pub fn yat(b: f64, eps: f64) -> Result<Self> {
        Self::validate(b, eps)?;
        if b < 0.0 {
            return Err(YatError::InvalidParameter {
                name: "b",
                value: b,
            });
        }
        Ok(Self {
            b,
            eps,
            family: KernelFamily::Yat,
            negative_bias_allowed: false,
        })
    }

    /// Same kernel with `b < 0` permitted. The Gram matrix is then allowed to
    /// be indefinite; only the PSD-counterexample diagnostics should use this.
    pub fn yat_counterexample(b: f64, eps: f64) -> Result<Self> {
        Self::validate(b, eps)?;
        Ok(Self {
            b,
            eps,
            family: KernelFamily::Yat,
            negative_bias_allowed: true,
        })
    }

    /// Inverse multiquadric `1 / (||x-w||^2 + eps)`.
    pub fn imq(eps: f64) -> Result<Self> {
        Self::validate(0.0, eps)?;
        Ok(Self {
            b: 0.0,
            eps,
            family: KernelFamily::Imq,
            negative_bias_allowed: false,
        })
    }

    /// Gaussian RBF `exp(-gamma ||x-w||^2)`.
    pub fn rbf(gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(YatError::InvalidParameter {
                name: "gamma",
                value: gamma,
            });
        }
        Ok(Self {
            b: 0.0,
            eps: 1.0,
            family: KernelFamily::Rbf { gamma },
            negative_bias_allowed: false,
        })
    }

    /// Quadratic polynomial kernel `(a'x + b)^2`.
    pub fn poly2(b: f64) -> Result<Self> {
        Self::validate(b, 1.0)?;
        if b < 0.0 {
            return Err(YatError::InvalidParameter {
                name: "b",
                value: b,
            });
        }
        Ok(Self {
            b,
            eps: 1.0,
            family: KernelFamily::Poly2,
            negative_bias_allowed: false,
        })
    }

    /// True when `b < 0` was explicitly permitted at construction.
    pub fn negative_bias_allowed(&self) -> bool {
        self.negative_bias_allowed
    }

    /// Re-check the constructor invariants. Deserialized values bypass the
    /// constructors, so container types call this when loading.
    pub fn revalidate(&self) -> Result<()> {
        Self::validate(self.b, self.eps)?;
        if let KernelFamily::Rbf { gamma } = self.family {
            if !gamma.is_finite() || gamma <= 0.0 {
                return Err(YatError::InvalidParameter {
                    name: "gamma",
                    value: gamma,
                });
            }
        }
        if self.b < 0.0 && !self.negative_bias_allowed {
            return Err(YatError::InvalidParameter {
                name: "b",
                value: self.b,
            });
        }
        Ok(())
    }

    /// Copy of the parameters with the bias replaced (per-atom overrides).
    pub(crate) fn with_bias(self, b: f64) -> Self {
        Self { b, ..self }
    }

    /// PSD-mode guard: operations that need a positive semidefinite kernel
    /// reject parameters built through the counterexample constructor.
    pub fn require_psd_mode(&self) -> Result<()> {
        if self.b < 0.0 {
            return Err(YatError::Precondition(format!(
                "operation requires b >= 0 (PSD mode), got b = {}",
                self.b
            )));
        }
        Ok(())
    }
}

/// One kernel atom: a center and a per-atom bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRef {
    pub center: Vec<f64>,
    pub bias: f64,
}

impl AtomRef {
    pub fn new(center: Vec<f64>, bias: f64) -> Result<Self> {
        check_finite(&center, "atom center")?;
        if !bias.is_finite() {
            return Err(YatError::NonFinite("atom bias"));
        }
        Ok(Self { center, bias })
    }
}

pub(crate) fn check_dims(x: &[f64], w: &[f64]) -> Result<()> {
    if x.len() != w.len() {
        return Err(YatError::DimensionMismatch(x.len(), w.len()));
    }
    Ok(())
}

pub(crate) fn check_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().any(|c| !c.is_finite()) {
        return Err(YatError::NonFinite(what));
    }
    Ok(())
}

/// Euclidean inner product.
#[inline]
pub fn dot(x: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// Squared Euclidean distance.
#[inline]
pub fn sq_dist(x: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Euclidean norm.
#[inline]
pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Regularised squared distance `||x-w||^2 + eps`; always `>= eps`.
pub fn regularized_sq_distance(x: &[f64], w: &[f64], eps: f64) -> Result<f64> {
    check_dims(x, w)?;
    if !(eps > 0.0) {
        return Err(YatError::InvalidParameter {
            name: "eps",
            value: eps,
        });
    }
    Ok(sq_dist(x, w) + eps)
}

/// Biased atom `g_eps(x; w, b) = (x'w + b)^2 / (||x-w||^2 + eps)`.
///
/// The raw scalar form used throughout: callers have already validated
/// dimensions and parameters.
#[inline]
pub(crate) fn atom_raw(x: &[f64], w: &[f64], b: f64, eps: f64) -> f64 {
    let a = dot(x, w) + b;
    a * a / (sq_dist(x, w) + eps)
}

/// Biased atom evaluation with dimension checking.
pub fn atom_eval(x: &[f64], w: &[f64], b: f64, eps: f64) -> Result<f64> {
    check_dims(x, w)?;
    if !(eps > 0.0) {
        return Err(YatError::InvalidParameter {
            name: "eps",
            value: eps,
        });
    }
    Ok(atom_raw(x, w, b, eps))
}

/// Yat kernel evaluation `(w'x + b)^2 / (||x-w||^2 + eps)`.
pub fn yat_eval(w: &[f64], x: &[f64], p: &KernelParams) -> Result<f64> {
    if p.family != KernelFamily::Yat {
        return Err(YatError::Precondition(format!(
            "yat_eval requires the Yat family, got {:?}",
            p.family
        )));
    }
    check_dims(x, w)?;
    Ok(atom_raw(x, w, p.b, p.eps))
}

/// Kernel evaluation dispatched over the four families.
///
/// ```
/// use yat_core::kernel::{kernel_eval, KernelParams};
///
/// let p = KernelParams::yat(1.0, 2.0)?;
/// // Diagonal value (||x||^2 + b)^2 / eps.
/// assert_eq!(kernel_eval(&[1.0, 2.0], &[1.0, 2.0], &p)?, 18.0);
/// # Ok::<(), yat_core::YatError>(())
/// ```
pub fn kernel_eval(a: &[f64], x: &[f64], p: &KernelParams) -> Result<f64> {
    check_dims(a, x)?;
    Ok(kernel_raw(a, x, p))
}

#[inline]
pub(crate) fn kernel_raw(a: &[f64], x: &[f64], p: &KernelParams) -> f64 {
    match p.family {
        KernelFamily::Yat => atom_raw(x, a, p.b, p.eps),
        KernelFamily::Imq => 1.0 / (sq_dist(x, a) + p.eps),
        KernelFamily::Rbf { gamma } => (-gamma * sq_dist(x, a)).exp(),
        KernelFamily::Poly2 => {
            let t = dot(a, x) + p.b;
            t * t
        }
    }
}

/// Global supremum of the unbiased section `x -> k_{0,eps}(w, x)`.
///
/// For `w != 0` the supremum is `||w||^4/eps + ||w||^2`, attained at
/// `(1 + eps/||w||^2) w`; the zero section has supremum 0 with no maximizer.
pub fn yat_supremum_unbiased(w: &[f64], eps: f64) -> Result<(f64, Option<Vec<f64>>)> {
    if !(eps > 0.0) {
        return Err(YatError::InvalidParameter {
            name: "eps",
            value: eps,
        });
    }
    check_finite(w, "center w")?;
    let w2 = dot(w, w);
    if w2 == 0.0 {
        return Ok((0.0, None));
    }
    let value = w2 * w2 / eps + w2;
    let scale = 1.0 + eps / w2;
    let argmax = w.iter().map(|c| scale * c).collect();
    Ok((value, Some(argmax)))
}

/// Analytic gradient of the Yat kernel with respect to the center `w`:
/// `2(w'x+b) x / D + 2(w'x+b)^2 (x-w) / D^2`.
pub fn yat_grad_center(w: &[f64], x: &[f64], p: &KernelParams) -> Result<Vec<f64>> {
    check_dims(x, w)?;
    let a = dot(x, w) + p.b;
    let d = sq_dist(x, w) + p.eps;
    let c1 = 2.0 * a / d;
    let c2 = 2.0 * a * a / (d * d);
    Ok(x.iter()
        .zip(w)
        .map(|(xi, wi)| c1 * xi + c2 * (xi - wi))
        .collect())
}

/// Analytic gradient with respect to the input `x`:
/// `2(w'x+b) w / D - 2(w'x+b)^2 (x-w) / D^2`.
pub fn yat_grad_input(w: &[f64], x: &[f64], p: &KernelParams) -> Result<Vec<f64>> {
    check_dims(x, w)?;
    let a = dot(x, w) + p.b;
    let d = sq_dist(x, w) + p.eps;
    let c1 = 2.0 * a / d;
    let c2 = 2.0 * a * a / (d * d);
    Ok(x.iter()
        .zip(w)
        .map(|(xi, wi)| c1 * wi - c2 * (xi - wi))
        .collect())
}
