//! Gram-matrix assembly, PSD certification, closed-form RKHS norms, and the
//! Loewner-order comparisons between the alignment kernel and its radial
//! (IMQ) minorant.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, YatError};
use crate::kernel::{
    check_dims, check_finite, dot, kernel_raw, sq_dist, KernelFamily, KernelParams,
};

/// Symmetric matrix of pairwise kernel evaluations at a node set.
///
/// Entries are assembled once for `i <= j` and mirrored, so the matrix is
/// symmetric to the bit.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub nodes: Vec<Vec<f64>>,
    pub params: KernelParams,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn dim(&self) -> usize {
        self.nodes.first().map_or(0, |v| v.len())
    }

    /// Row-major CSV with a header line carrying `n, d, family, b, eps`.
    pub fn to_csv(&self) -> String {
        let family = match self.params.family {
            KernelFamily::Yat => "yat".to_string(),
            KernelFamily::Imq => "imq".to_string(),
            KernelFamily::Rbf { gamma } => format!("rbf:{gamma}"),
            KernelFamily::Poly2 => "poly2".to_string(),
        };
        let mut out = format!(
            "n={},d={},family={},b={},eps={}\n",
            self.n(),
            self.dim(),
            family,
            self.params.b,
            self.params.eps
        );
        for i in 0..self.n() {
            let row: Vec<String> = (0..self.n())
                .map(|j| format!("{}", self.entries[(i, j)]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Result of a PSD check: `is_psd` iff the minimum eigenvalue clears the
/// scale-aware tolerance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub tolerance: f64,
    pub is_psd: bool,
    pub jitter_used: f64,
}

/// Finite kernel expansion `f = sum_j alpha_j k(w_j, .)`.
///
/// When `per_atom_bias` is present the atoms carry individual biases, the
/// object lives in the biased span rather than a single RKHS, and the norm
/// operations reject it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Expansion {
    pub centers: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
    pub params: KernelParams,
    pub per_atom_bias: Option<Vec<f64>>,
}

impl Expansion {
    pub fn new(
        centers: Vec<Vec<f64>>,
        coefficients: Vec<f64>,
        params: KernelParams,
    ) -> Result<Self> {
        Self::with_biases(centers, coefficients, params, None)
    }

    pub fn with_biases(
        centers: Vec<Vec<f64>>,
        coefficients: Vec<f64>,
        params: KernelParams,
        per_atom_bias: Option<Vec<f64>>,
    ) -> Result<Self> {
        params.revalidate()?;
        if centers.len() != coefficients.len() {
            return Err(YatError::DimensionMismatch(
                centers.len(),
                coefficients.len(),
            ));
        }
        if let Some(bs) = &per_atom_bias {
            if bs.len() != centers.len() {
                return Err(YatError::DimensionMismatch(bs.len(), centers.len()));
            }
            check_finite(bs, "per-atom biases")?;
        }
        for c in &centers {
            check_finite(c, "expansion center")?;
            if c.len() != centers[0].len() {
                return Err(YatError::DimensionMismatch(c.len(), centers[0].len()));
            }
        }
        check_finite(&coefficients, "expansion coefficients")?;
        Ok(Self {
            centers,
            coefficients,
            params,
            per_atom_bias,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Pointwise evaluation, honoring per-atom bias overrides.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if let Some(first) = self.centers.first() {
            check_dims(x, first)?;
        }
        let mut acc = 0.0;
        match &self.per_atom_bias {
            None => {
                for (w, a) in self.centers.iter().zip(&self.coefficients) {
                    acc += a * kernel_raw(w, x, &self.params);
                }
            }
            Some(biases) => {
                for ((w, a), b) in self.centers.iter().zip(&self.coefficients).zip(biases) {
                    let p = self.params.with_bias(*b);
                    acc += a * kernel_raw(w, x, &p);
                }
            }
        }
        Ok(acc)
    }
}

fn validate_nodes(nodes: &[Vec<f64>]) -> Result<()> {
    if nodes.is_empty() {
        return Err(YatError::EmptyInput("node list"));
    }
    let d = nodes[0].len();
    for v in nodes {
        check_finite(v, "gram node")?;
        if v.len() != d {
            return Err(YatError::DimensionMismatch(v.len(), d));
        }
    }
    Ok(())
}

fn assemble<F: Fn(&[f64], &[f64]) -> f64>(nodes: &[Vec<f64>], f: F) -> DMatrix<f64> {
    let n = nodes.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = f(&nodes[i], &nodes[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Assemble the Gram matrix of `p` at the given nodes.
pub fn build_gram(nodes: &[Vec<f64>], p: &KernelParams) -> Result<GramMatrix> {
    validate_nodes(nodes)?;
    let entries = assemble(nodes, |a, b| kernel_raw(a, b, p));
    Ok(GramMatrix {
        entries,
        nodes: nodes.to_vec(),
        params: *p,
    })
}

/// Sorted (ascending) eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut eigs: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}

/// PSD check on a raw symmetric matrix with tolerance
/// `rel_tol * max(1, lambda_max)`.
pub fn psd_check_matrix(m: &DMatrix<f64>, rel_tol: f64) -> PsdReport {
    let eigs = symmetric_eigenvalues(m);
    let min_eigenvalue = *eigs.first().unwrap_or(&0.0);
    let max_eigenvalue = *eigs.last().unwrap_or(&0.0);
    let tolerance = rel_tol * max_eigenvalue.max(1.0);
    PsdReport {
        min_eigenvalue,
        max_eigenvalue,
        tolerance,
        is_psd: min_eigenvalue >= -tolerance,
        jitter_used: 0.0,
    }
}

/// PSD check of a Gram matrix via a full symmetric eigendecomposition.
pub fn psd_check(g: &GramMatrix, rel_tol: f64) -> PsdReport {
    psd_check_matrix(&g.entries, rel_tol)
}

/// Squared RKHS norm `alpha' K alpha` of a shared-`(b, eps)` expansion.
///
/// ```
/// use yat_core::gram::{rkhs_norm_sq, Expansion};
/// use yat_core::KernelParams;
///
/// let p = KernelParams::yat(1.0, 1.0)?;
/// // One atom at the origin: the norm is the diagonal value b^2 / eps.
/// let f = Expansion::new(vec![vec![0.0, 0.0]], vec![1.0], p)?;
/// assert_eq!(rkhs_norm_sq(&f)?, 1.0);
/// # Ok::<(), yat_core::YatError>(())
/// ```
pub fn rkhs_norm_sq(e: &Expansion) -> Result<f64> {
    if e.per_atom_bias.is_some() {
        return Err(YatError::Precondition(
            "expansion carries per-atom biases; it is not a single-RKHS element".into(),
        ));
    }
    e.params.require_psd_mode()?;
    if e.is_empty() {
        return Ok(0.0);
    }
    let g = build_gram(&e.centers, &e.params)?;
    let alpha = DVector::from_column_slice(&e.coefficients);
    Ok((alpha.transpose() * &g.entries * &alpha)[(0, 0)])
}

/// The three channel Grams of the bias expansion
/// `(w'x + b)^2 h = b^2 h + 2b (w'x) h + (w'x)^2 h`.
pub fn channel_grams(
    nodes: &[Vec<f64>],
    p: &KernelParams,
) -> Result<(GramMatrix, GramMatrix, GramMatrix)> {
    p.require_psd_mode()?;
    validate_nodes(nodes)?;
    let b = p.b;
    let eps = p.eps;
    let g0 = assemble(nodes, |x, w| b * b / (sq_dist(x, w) + eps));
    let g1 = assemble(nodes, |x, w| 2.0 * b * dot(x, w) / (sq_dist(x, w) + eps));
    let g2 = assemble(nodes, |x, w| {
        let t = dot(x, w);
        t * t / (sq_dist(x, w) + eps)
    });
    let imq = KernelParams::imq(eps)?;
    Ok((
        GramMatrix {
            entries: g0,
            nodes: nodes.to_vec(),
            params: imq,
        },
        GramMatrix {
            entries: g1,
            nodes: nodes.to_vec(),
            params: *p,
        },
        GramMatrix {
            entries: g2,
            nodes: nodes.to_vec(),
            params: *p,
        },
    ))
}

/// PSD report for the Loewner difference `K_Y - b^2 K_I`.
pub fn loewner_domination_check(nodes: &[Vec<f64>], p: &KernelParams) -> Result<PsdReport> {
    p.require_psd_mode()?;
    validate_nodes(nodes)?;
    let b2 = p.b * p.b;
    let eps = p.eps;
    let diff = assemble(nodes, |x, w| {
        let a = dot(x, w) + p.b;
        let d = sq_dist(x, w) + eps;
        (a * a - b2) / d
    });
    Ok(psd_check_matrix(&diff, 1e-8))
}

/// Sorted-eigenvalue domination `lambda_j(K_Y) >= b^2 lambda_j(K_I) - tol`.
pub fn eigen_domination_check(nodes: &[Vec<f64>], p: &KernelParams, tol: f64) -> Result<bool> {
    if !(p.b > 0.0) {
        return Err(YatError::Precondition(
            "eigen_domination_check requires b > 0".into(),
        ));
    }
    validate_nodes(nodes)?;
    let ky = build_gram(nodes, p)?;
    let ki = build_gram(nodes, &KernelParams::imq(p.eps)?)?;
    let ey = symmetric_eigenvalues(&ky.entries);
    let ei = symmetric_eigenvalues(&ki.entries);
    let b2 = p.b * p.b;
    Ok(ey.iter().zip(&ei).all(|(ly, li)| *ly >= b2 * li - tol))
}

/// Solve `M x = rhs` for symmetric positive definite `M` with a single retry
/// under diagonal jitter `1e-10 * trace / n`. Returns the solution and the
/// jitter actually used.
pub fn spd_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    if let Some(chol) = m.clone().cholesky() {
        return Ok((chol.solve(rhs), 0.0));
    }
    let n = m.nrows();
    let jitter = 1e-10 * m.trace() / n as f64;
    let mut jittered = m.clone();
    for i in 0..n {
        jittered[(i, i)] += jitter;
    }
    match jittered.cholesky() {
        Some(chol) => Ok((chol.solve(rhs), jitter)),
        None => Err(YatError::FactorizationFailed { jitter }),
    }
}

/// Interpolation-norm comparison: `y' K_Y^{-1} y` against `b^{-2} y' K_I^{-1} y`.
///
/// Requires `b > 0` and distinct nodes; duplicate nodes surface as a
/// singularity error from the factorization.
pub fn interpolation_norm_compare(
    nodes: &[Vec<f64>],
    y: &[f64],
    p: &KernelParams,
) -> Result<(f64, f64)> {
    if !(p.b > 0.0) {
        return Err(YatError::Precondition(
            "interpolation_norm_compare requires b > 0".into(),
        ));
    }
    validate_nodes(nodes)?;
    if y.len() != nodes.len() {
        return Err(YatError::DimensionMismatch(y.len(), nodes.len()));
    }
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            if nodes[i] == nodes[j] {
                return Err(YatError::SingularGram(format!(
                    "nodes {i} and {j} coincide"
                )));
            }
        }
    }
    let yv = DVector::from_column_slice(y);
    let ky = build_gram(nodes, p)?;
    let ki = build_gram(nodes, &KernelParams::imq(p.eps)?)?;
    let (sy, _) = spd_solve(&ky.entries, &yv).map_err(|e| match e {
        YatError::FactorizationFailed { jitter } => {
            YatError::SingularGram(format!("alignment Gram not PD (jitter {jitter:e} failed)"))
        }
        other => other,
    })?;
    let (si, _) = spd_solve(&ki.entries, &yv).map_err(|e| match e {
        YatError::FactorizationFailed { jitter } => {
            YatError::SingularGram(format!("IMQ Gram not PD (jitter {jitter:e} failed)"))
        }
        other => other,
    })?;
    let yat_norm = yv.dot(&sy);
    let imq_norm_scaled = yv.dot(&si) / (p.b * p.b);
    Ok((yat_norm, imq_norm_scaled))
}

/// Split the squared norm into the radial part `b^2 a' G_I a` and the
/// nonnegative alignment excess `a' (G_Y - b^2 G_I) a`.
pub fn alignment_excess(e: &Expansion) -> Result<(f64, f64)> {
    if e.per_atom_bias.is_some() {
        return Err(YatError::Precondition(
            "alignment_excess requires a shared-bias expansion".into(),
        ));
    }
    e.params.require_psd_mode()?;
    if e.is_empty() {
        return Ok((0.0, 0.0));
    }
    let alpha = DVector::from_column_slice(&e.coefficients);
    let gi = build_gram(&e.centers, &KernelParams::imq(e.params.eps)?)?;
    let b2 = e.params.b * e.params.b;
    let radial = b2 * (alpha.transpose() * &gi.entries * &alpha)[(0, 0)];
    let eps = e.params.eps;
    let b = e.params.b;
    let diff = assemble(&e.centers, |x, w| {
        let a = dot(x, w) + b;
        (a * a - b2) / (sq_dist(x, w) + eps)
    });
    let excess = (alpha.transpose() * &diff * &alpha)[(0, 0)];
    Ok((radial, excess))
}
