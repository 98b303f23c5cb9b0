//! Multi-layer stacks of kernel units: forward evaluation, prefix-pullback
//! Gram bookkeeping, per-layer norm bounds, layer Lipschitz constants, and
//! perturbation propagation.

use serde::{Deserialize, Serialize};

use crate::error::{Result, YatError};
use crate::gram::{build_gram, GramMatrix};
use crate::kernel::{check_finite, kernel_raw, norm, KernelParams};

/// One layer: `m` centers of the input dimension, an `m x d_out` readout
/// matrix, and the layer's kernel parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerSpec {
    pub centers: Vec<Vec<f64>>,
    /// Row `j` holds the readout coefficients of atom `j` across the output
    /// coordinates.
    pub readout: Vec<Vec<f64>>,
    pub params: KernelParams,
}

impl LayerSpec {
    pub fn new(
        centers: Vec<Vec<f64>>,
        readout: Vec<Vec<f64>>,
        params: KernelParams,
    ) -> Result<Self> {
        let layer = Self {
            centers,
            readout,
            params,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.revalidate()?;
        self.params.require_psd_mode()?;
        if self.centers.is_empty() {
            return Err(YatError::EmptyInput("layer centers"));
        }
        if self.readout.len() != self.centers.len() {
            return Err(YatError::DimensionMismatch(
                self.readout.len(),
                self.centers.len(),
            ));
        }
        let d_in = self.centers[0].len();
        for c in &self.centers {
            check_finite(c, "layer center")?;
            if c.len() != d_in {
                return Err(YatError::DimensionMismatch(c.len(), d_in));
            }
        }
        let d_out = self.readout[0].len();
        if d_out == 0 {
            return Err(YatError::EmptyInput("readout columns"));
        }
        for row in &self.readout {
            check_finite(row, "readout row")?;
            if row.len() != d_out {
                return Err(YatError::DimensionMismatch(row.len(), d_out));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.readout[0].len()
    }

    /// `[T(z)]_c = sum_j readout[j][c] k(w_j, z)`.
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.input_dim() {
            return Err(YatError::DimensionMismatch(z.len(), self.input_dim()));
        }
        let mut out = vec![0.0; self.output_dim()];
        for (w, row) in self.centers.iter().zip(&self.readout) {
            let k = kernel_raw(w, z, &self.params);
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * k;
            }
        }
        Ok(out)
    }

    pub fn max_center_norm(&self) -> f64 {
        self.centers.iter().map(|c| norm(c)).fold(0.0, f64::max)
    }
}

/// An ordered list of layers with chained dimensions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StackSpec {
    pub layers: Vec<LayerSpec>,
}

impl StackSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let stack = Self { layers };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        for layer in &self.layers {
            layer.validate()?;
        }
        for pair in self.layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(YatError::DimensionMismatch(
                    pair[0].output_dim(),
                    pair[1].input_dim(),
                ));
            }
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stack serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let stack: StackSpec = serde_json::from_str(s)
            .map_err(|e| YatError::Precondition(format!("invalid stack JSON: {e}")))?;
        stack.validate()?;
        Ok(stack)
    }
}

/// Forward pass returning every intermediate representation `Phi_0 .. Phi_L`.
pub fn forward(stack: &StackSpec, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut reps = Vec::with_capacity(stack.depth() + 1);
    reps.push(x.to_vec());
    for layer in &stack.layers {
        let next = layer.apply(reps.last().unwrap())?;
        reps.push(next);
    }
    Ok(reps)
}

/// Gram matrix of the layer-`layer_index` kernel pulled back through the
/// prefix: entries `k_l(Phi_{l-1}(x_i), Phi_{l-1}(x_j))` at the probe
/// points. `layer_index` is 1-based; index 1 means the identity prefix.
pub fn pullback_gram(
    stack: &StackSpec,
    layer_index: usize,
    probes: &[Vec<f64>],
) -> Result<GramMatrix> {
    if layer_index == 0 || layer_index > stack.depth() {
        return Err(YatError::Precondition(format!(
            "layer index {layer_index} out of range 1..={}",
            stack.depth()
        )));
    }
    let images = prefix_images(stack, layer_index, probes)?;
    build_gram(&images, &stack.layers[layer_index - 1].params)
}

/// Probe images under the prefix `Phi_{layer_index - 1}`.
pub fn prefix_images(
    stack: &StackSpec,
    layer_index: usize,
    probes: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    probes
        .iter()
        .map(|x| {
            let mut z = x.clone();
            for layer in &stack.layers[..layer_index - 1] {
                z = layer.apply(&z)?;
            }
            Ok(z)
        })
        .collect()
}

/// Per-layer norm bounds `Tr(A_l' K_l A_l)` with `K_l` the layer Gram over
/// its own centers; the sum over output coordinates of the closed-form
/// quadratic bounds.
pub fn per_layer_norm_bounds(stack: &StackSpec) -> Result<Vec<f64>> {
    stack
        .layers
        .iter()
        .map(|layer| {
            let gram = build_gram(&layer.centers, &layer.params)?;
            let m = layer.centers.len();
            let mut total = 0.0;
            for c in 0..layer.output_dim() {
                for i in 0..m {
                    for j in 0..m {
                        total += layer.readout[i][c] * gram.entries[(i, j)] * layer.readout[j][c];
                    }
                }
            }
            Ok(total)
        })
        .collect()
}

/// Closed-form Lipschitz constant of one layer on the input ball of radius
/// `r`: each atom is `M = 2(RW+b)W/eps + 2(RW+b)^2(R+W)/eps^2`-Lipschitz
/// with `W` the center-norm cap, and the vector layer gets
/// `sqrt(sum_c (sum_j |a_jc| M)^2)`.
pub fn layer_lipschitz(layer: &LayerSpec, r: f64) -> f64 {
    let w = layer.max_center_norm();
    let b = layer.params.b;
    let eps = layer.params.eps;
    let rw = r * w + b;
    let m = 2.0 * rw * w / eps + 2.0 * rw * rw * (r + w) / (eps * eps);
    let col_sums_sq: f64 = (0..layer.output_dim())
        .map(|c| {
            let l1: f64 = layer.readout.iter().map(|row| row[c].abs()).sum();
            (l1 * m) * (l1 * m)
        })
        .sum();
    col_sums_sq.sqrt()
}

/// Perturbation-propagation certificate between two same-shape stacks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationReport {
    /// `sum_l delta_l prod_{r > l} L_r`.
    pub bound: f64,
    /// Max end-to-end deviation over the probe set.
    pub observed: f64,
    /// Per-layer deviation sups (probe-measured, inflated by the margin).
    pub deltas: Vec<f64>,
    /// Per-layer Lipschitz constants at the tracked radii.
    pub lipschitz: Vec<f64>,
    /// Tracked input radius per layer.
    pub radii: Vec<f64>,
    /// Inflation applied to the probe-measured sups.
    pub margin: f64,
}

/// Compare a stack against a perturbed copy on a probe set inside `B_{r0}`.
///
/// Per-layer deviations are probe-measured sups inflated by a 10% margin
/// (the true sups run over the whole intermediate range); the certificate
/// `bound >= observed` holds already without the margin because the same
/// probe trajectories feed both sides.
pub fn perturbation_bound(
    stack: &StackSpec,
    perturbed: &StackSpec,
    r0: f64,
    probes: &[Vec<f64>],
) -> Result<PerturbationReport> {
    if stack.depth() != perturbed.depth() {
        return Err(YatError::DimensionMismatch(
            stack.depth(),
            perturbed.depth(),
        ));
    }
    for (a, b) in stack.layers.iter().zip(&perturbed.layers) {
        if a.input_dim() != b.input_dim() || a.output_dim() != b.output_dim() {
            return Err(YatError::Precondition(
                "perturbed stack has mismatched layer shapes".into(),
            ));
        }
    }
    if probes.is_empty() {
        return Err(YatError::EmptyInput("probe set"));
    }
    for x in probes {
        if norm(x) > r0 * (1.0 + 1e-12) {
            return Err(YatError::Precondition(
                "probe outside the stated input ball".into(),
            ));
        }
    }
    let margin = 1.1;
    let depth = stack.depth();

    let base_paths: Vec<Vec<Vec<f64>>> = probes
        .iter()
        .map(|x| forward(stack, x))
        .collect::<Result<_>>()?;
    let pert_paths: Vec<Vec<Vec<f64>>> = probes
        .iter()
        .map(|x| forward(perturbed, x))
        .collect::<Result<_>>()?;

    // Tracked radius entering layer l (0-based): the input ball for l = 0,
    // and the inflated max image norm over both trajectories afterwards.
    let mut radii = Vec::with_capacity(depth);
    for l in 0..depth {
        if l == 0 {
            radii.push(r0);
        } else {
            let max_norm = base_paths
                .iter()
                .chain(&pert_paths)
                .map(|path| norm(&path[l]))
                .fold(0.0, f64::max);
            radii.push(margin * max_norm);
        }
    }

    let lipschitz: Vec<f64> = (0..depth)
        .map(|l| layer_lipschitz(&stack.layers[l], radii[l]))
        .collect();

    // delta_l: sup over the perturbed trajectory's layer inputs of the
    // pointwise layer disagreement.
    let mut deltas = Vec::with_capacity(depth);
    for l in 0..depth {
        let mut sup = 0.0f64;
        for path in &pert_paths {
            let z = &path[l];
            let a = stack.layers[l].apply(z)?;
            let bapp = perturbed.layers[l].apply(z)?;
            let diff = a
                .iter()
                .zip(&bapp)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            sup = sup.max(diff);
        }
        deltas.push(margin * sup);
    }

    let mut bound = 0.0;
    for l in 0..depth {
        let tail: f64 = lipschitz[l + 1..].iter().product();
        bound += deltas[l] * tail;
    }

    let observed = base_paths
        .iter()
        .zip(&pert_paths)
        .map(|(a, b)| {
            a[depth]
                .iter()
                .zip(&b[depth])
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);

    Ok(PerturbationReport {
        bound,
        observed,
        deltas,
        lipschitz,
        radii,
        margin,
    })
}

/// Convenience: a random stack for diagnostics and suites.
pub fn random_stack(
    dims: &[usize],
    widths: &[usize],
    b: f64,
    eps: f64,
    coeff_scale: f64,
    rng: &mut impl rand::Rng,
) -> Result<StackSpec> {
    assert_eq!(
        dims.len(),
        widths.len() + 1,
        "dims must have one more entry than widths"
    );
    let params = KernelParams::yat(b, eps)?;
    let layers = widths
        .iter()
        .enumerate()
        .map(|(l, &m)| {
            let d_in = dims[l];
            let d_out = dims[l + 1];
            let centers: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..d_in).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let readout: Vec<Vec<f64>> = (0..m)
                .map(|_| {
                    (0..d_out)
                        .map(|_| rng.random_range(-coeff_scale..coeff_scale))
                        .collect()
                })
                .collect();
            LayerSpec::new(centers, readout, params)
        })
        .collect::<Result<Vec<_>>>()?;
    StackSpec::new(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gram::{loewner_domination_check, psd_check, rkhs_norm_sq, Expansion};
    use crate::kernel::yat_eval;
    use crate::rng::derived_rng;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn probe_cloud(rng: &mut impl Rng, n: usize, d: usize, r: f64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let nn = norm(&raw).max(1e-9);
                let s = rng.random_range(0.0..r) / nn;
                raw.iter().map(|c| c * s).collect()
            })
            .collect()
    }

    #[test]
    fn forward_empty_stack_is_identity() {
        let stack = StackSpec::new(Vec::new()).unwrap();
        let x = vec![1.0, 2.0];
        let reps = forward(&stack, &x).unwrap();
        assert_eq!(reps, vec![x]);
    }

    #[test]
    fn forward_single_atom_diagonal() {
        let p = KernelParams::yat(0.5, 2.0).unwrap();
        let w = vec![1.0, -1.0];
        let layer = LayerSpec::new(vec![w.clone()], vec![vec![1.0]], p).unwrap();
        let stack = StackSpec::new(vec![layer]).unwrap();
        let reps = forward(&stack, &w).unwrap();
        let expected = yat_eval(&w, &w, &p).unwrap();
        assert_relative_eq!(reps[1][0], expected, max_relative = 1e-15);
    }

    #[test]
    fn forward_matches_manual_composition() {
        let mut rng = derived_rng(31, 0);
        let stack = random_stack(&[2, 3, 2], &[4, 3], 0.5, 1.0, 0.7, &mut rng).unwrap();
        let x = vec![0.3, -0.8];
        let reps = forward(&stack, &x).unwrap();
        let z1 = stack.layers[0].apply(&x).unwrap();
        let z2 = stack.layers[1].apply(&z1).unwrap();
        assert_eq!(reps[1], z1);
        assert_eq!(reps[2], z2);
    }

    #[test]
    fn pullback_identity_prefix_is_plain_gram() {
        let mut rng = derived_rng(32, 0);
        let stack = random_stack(&[2, 2], &[3], 0.5, 1.0, 0.7, &mut rng).unwrap();
        let probes = probe_cloud(&mut rng, 8, 2, 1.0);
        let pulled = pullback_gram(&stack, 1, &probes).unwrap();
        let direct = build_gram(&probes, &stack.layers[0].params).unwrap();
        assert_eq!(pulled.entries, direct.entries);
    }

    #[test]
    fn pullback_grams_psd_and_loewner_dominated() {
        for trial in 0..5u64 {
            let mut rng = derived_rng(33, trial);
            let stack = random_stack(&[3, 4, 3, 2], &[5, 4, 3], 0.6, 1.0, 0.5, &mut rng).unwrap();
            let probes = probe_cloud(&mut rng, 12, 3, 1.0);
            for l in 1..=stack.depth() {
                let g = pullback_gram(&stack, l, &probes).unwrap();
                assert!(
                    psd_check(&g, 1e-8).is_psd,
                    "pullback Gram not PSD at layer {l}"
                );

                let images = prefix_images(&stack, l, &probes).unwrap();
                let report =
                    loewner_domination_check(&images, &stack.layers[l - 1].params).unwrap();
                assert!(report.is_psd, "pullback Loewner violated at layer {l}");
            }
        }
    }

    #[test]
    fn norm_bounds_zero_readout() {
        let p = KernelParams::yat(0.5, 1.0).unwrap();
        let layer = LayerSpec::new(vec![vec![1.0, 0.0]], vec![vec![0.0, 0.0]], p).unwrap();
        let stack = StackSpec::new(vec![layer]).unwrap();
        assert_eq!(per_layer_norm_bounds(&stack).unwrap(), vec![0.0]);
    }

    #[test]
    fn norm_bounds_depth_one_matches_gram_norms() {
        let mut rng = derived_rng(34, 0);
        let stack = random_stack(&[2, 3], &[4], 0.5, 1.0, 0.8, &mut rng).unwrap();
        let layer = &stack.layers[0];
        let bounds = per_layer_norm_bounds(&stack).unwrap();
        let mut expected = 0.0;
        for c in 0..layer.output_dim() {
            let coeffs: Vec<f64> = layer.readout.iter().map(|row| row[c]).collect();
            let e = Expansion::new(layer.centers.clone(), coeffs, layer.params).unwrap();
            expected += rkhs_norm_sq(&e).unwrap();
        }
        assert_relative_eq!(bounds[0], expected, max_relative = 1e-12);
    }

    #[test]
    fn norm_bounds_depth_three_finite_nonnegative() {
        let mut rng = derived_rng(35, 0);
        let stack = random_stack(&[2, 4, 4, 3], &[6, 5, 4], 0.3, 0.8, 0.5, &mut rng).unwrap();
        for b in per_layer_norm_bounds(&stack).unwrap() {
            assert!(b.is_finite() && b >= -1e-12);
        }
    }

    #[test]
    fn layer_lipschitz_examples() {
        let p = KernelParams::yat(1.0, 1.0).unwrap();
        let zero = LayerSpec::new(vec![vec![1.0]], vec![vec![0.0]], p).unwrap();
        assert_eq!(layer_lipschitz(&zero, 1.0), 0.0);

        // R = W = b = eps = 1, one atom, unit coefficient: M = 4 + 16 = 20.
        let single = LayerSpec::new(vec![vec![1.0]], vec![vec![1.0]], p).unwrap();
        assert_relative_eq!(layer_lipschitz(&single, 1.0), 20.0, max_relative = 1e-14);
    }

    #[test]
    fn layer_lipschitz_bounds_empirical_ratios() {
        let mut rng = derived_rng(36, 0);
        let p = KernelParams::yat(0.5, 1.0).unwrap();
        let centers = probe_cloud(&mut rng, 5, 3, 1.2);
        let readout: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let layer = LayerSpec::new(centers, readout, p).unwrap();
        let r = 1.5;
        let konst = layer_lipschitz(&layer, r);
        for _ in 0..10_000 {
            let z1 = &probe_cloud(&mut rng, 1, 3, r)[0];
            let z2 = &probe_cloud(&mut rng, 1, 3, r)[0];
            let dz = z1
                .iter()
                .zip(z2)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dz < 1e-12 {
                continue;
            }
            let t1 = layer.apply(z1).unwrap();
            let t2 = layer.apply(z2).unwrap();
            let dt = t1
                .iter()
                .zip(&t2)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(
                dt <= konst * dz * (1.0 + 1e-10),
                "ratio {} exceeds constant {konst}",
                dt / dz
            );
        }
    }

    #[test]
    fn perturbation_identical_stacks() {
        let mut rng = derived_rng(37, 0);
        let stack = random_stack(&[2, 3, 2], &[3, 3], 0.4, 1.0, 0.5, &mut rng).unwrap();
        let probes = probe_cloud(&mut rng, 10, 2, 1.0);
        let rep = perturbation_bound(&stack, &stack.clone(), 1.0, &probes).unwrap();
        assert_eq!(rep.bound, 0.0);
        assert_eq!(rep.observed, 0.0);
    }

    #[test]
    fn perturbation_last_layer_only_has_no_lipschitz_factor() {
        let mut rng = derived_rng(38, 0);
        let stack = random_stack(&[2, 3, 2], &[3, 3], 0.4, 1.0, 0.5, &mut rng).unwrap();
        let mut perturbed = stack.clone();
        for row in perturbed.layers[1].readout.iter_mut() {
            for v in row.iter_mut() {
                *v += rng.random_range(-0.01..0.01);
            }
        }
        let probes = probe_cloud(&mut rng, 10, 2, 1.0);
        let rep = perturbation_bound(&stack, &perturbed, 1.0, &probes).unwrap();
        assert_eq!(rep.deltas[0], 0.0);
        assert_relative_eq!(rep.bound, rep.deltas[1], max_relative = 1e-14);
        assert!(rep.observed <= rep.bound);
    }

    #[test]
    fn perturbation_bound_dominates_observed() {
        for trial in 0..20u64 {
            let mut rng = derived_rng(39, trial);
            let stack = random_stack(&[2, 3, 3, 2], &[4, 3, 3], 0.3, 1.0, 0.4, &mut rng).unwrap();
            let mut perturbed = stack.clone();
            for layer in perturbed.layers.iter_mut() {
                for row in layer.readout.iter_mut() {
                    for v in row.iter_mut() {
                        *v += rng.random_range(-0.02..0.02);
                    }
                }
                for c in layer.centers.iter_mut() {
                    for v in c.iter_mut() {
                        *v += rng.random_range(-0.02..0.02);
                    }
                }
            }
            let probes = probe_cloud(&mut rng, 15, 2, 1.0);
            let rep = perturbation_bound(&stack, &perturbed, 1.0, &probes).unwrap();
            assert!(
                rep.observed <= rep.bound,
                "trial {trial}: observed {} exceeds bound {}",
                rep.observed,
                rep.bound
            );
            // Radius tracking covers the actual forward images.
            for (l, r) in rep.radii.iter().enumerate().skip(1) {
                for x in &probes {
                    let reps = forward(&stack, x).unwrap();
                    assert!(norm(&reps[l]) <= *r);
                }
            }
        }
    }

    #[test]
    fn stack_json_round_trip() {
        let mut rng = derived_rng(40, 0);
        let stack = random_stack(&[2, 3, 1], &[2, 2], 0.5, 1.5, 0.7, &mut rng).unwrap();
        let json = stack.to_json();
        let back = StackSpec::from_json(&json).unwrap();
        assert_eq!(back.depth(), 2);
        assert_eq!(back.layers[0].centers, stack.layers[0].centers);
        assert_eq!(back.layers[1].readout, stack.layers[1].readout);

        // Broken dimension chains are rejected on load.
        let mut bad = stack.clone();
        bad.layers[0].readout = vec![vec![1.0; 5]; 2];
        assert!(StackSpec::from_json(&bad.to_json()).is_err());
    }
}
