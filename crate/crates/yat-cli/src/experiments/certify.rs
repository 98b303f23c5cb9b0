//! Certification soundness: random multi-class heads, random inputs, and
//! random perturbations inside the certified radius must never flip the
//! predicted class.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use yat_core::bounds::certified_radius;
use yat_core::gram::Expansion;
use yat_core::kernel::norm;
use yat_core::rng::derived_rng;
use yat_core::KernelParams;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::record::ResultRecord;

fn random_heads(
    classes: usize,
    d: usize,
    p: &KernelParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Expansion>, CliError> {
    (0..classes)
        .map(|_| {
            let m = rng.random_range(2..6);
            let centers: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let coeffs: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            Expansion::new(centers, coeffs, *p).map_err(CliError::Numerical)
        })
        .collect()
}

/// Returns `(flips, certified_cases, mean_radius)`.
pub fn soundness_sweep(
    heads_trials: usize,
    classes: usize,
    perturbations: usize,
    d: usize,
    r: f64,
    eps: f64,
    seed: u64,
) -> Result<(usize, usize, f64), CliError> {
    let p = KernelParams::yat(0.0, eps).map_err(CliError::Numerical)?;
    let mut flips = 0usize;
    let mut certified = 0usize;
    let mut radius_sum = 0.0;
    for trial in 0..heads_trials {
        let mut rng = derived_rng(seed, trial as u64);
        let heads = random_heads(classes, d, &p, &mut rng)?;
        // Look for an input with positive margin; skip degenerate draws.
        let mut found = None;
        for _ in 0..50 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-0.6..0.6)).collect();
            if norm(&x) > 0.8 * r {
                continue;
            }
            let cert = certified_radius(&heads, &x, r)?;
            if cert.radius.is_finite() && cert.radius > 0.0 {
                found = Some((x, cert));
                break;
            }
        }
        let Some((x, cert)) = found else { continue };
        certified += 1;
        radius_sum += cert.radius;
        for _ in 0..perturbations {
            let raw: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let nn = norm(&raw).max(1e-12);
            let scale = rng.random_range(0.0..cert.radius * 0.999_999) / nn;
            let xp: Vec<f64> = x.iter().zip(&raw).map(|(a, b)| a + b * scale).collect();
            let scores: Vec<f64> = heads
                .iter()
                .map(|h| h.eval(&xp).map_err(CliError::Numerical))
                .collect::<Result<_, _>>()?;
            let arg = scores
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            if arg != cert.predicted_class {
                flips += 1;
            }
        }
    }
    let mean_radius = if certified > 0 {
        radius_sum / certified as f64
    } else {
        0.0
    };
    Ok((flips, certified, mean_radius))
}

pub fn run(cfg: &ExperimentConfig) -> Result<(ResultRecord, Option<String>), CliError> {
    let heads_trials = cfg.get_usize("heads", 20)?;
    let classes = cfg.get_usize("classes", 3)?;
    let perturbations = cfg.get_usize("perturbations", 1000)?;
    let d = cfg.get_usize("d", 2)?;
    let r = cfg.get_f64("r", 1.0)?;
    let eps = cfg.get_f64("eps", 1.0)?;
    let (flips, certified, mean_radius) =
        soundness_sweep(heads_trials, classes, perturbations, d, r, eps, cfg.seed)?;

    let mut record = ResultRecord::new(cfg);
    record.metric("flips", flips as f64);
    record.metric("certified_cases", certified as f64);
    record.metric("mean_radius", mean_radius);
    record.pass = Some(flips == 0 && certified > 0);
    Ok((record, None))
}
