//! Tangent-kernel diagnostics: PSD of the shared-sample Gram estimate and
//! the 1/width scaling of the finite-width seed variance.

use rand::Rng;

use yat_core::gram::psd_check;
use yat_core::ntk::{empirical_ntk_convergence, ntk_gram};
use yat_core::rng::derived_rng;
use yat_core::NtkConfig;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::record::ResultRecord;

pub fn run(cfg: &ExperimentConfig) -> Result<(ResultRecord, Option<String>), CliError> {
    let widths = cfg.get_usize_list("widths", &[16, 64, 256])?;
    let seeds_per_width = cfg.get_usize("seeds_per_width", 40)?;
    let n_points = cfg.get_usize("n_points", 3)?;
    let d = cfg.get_usize("d", 2)?;
    let sigma_w = cfg.get_f64("sigma_w", 1.0)?;
    let b = cfg.get_f64("b", 0.5)?;
    let eps = cfg.get_f64("eps", 1.0)?;
    let gram_mc = cfg.get_usize("gram_mc_samples", 5000)?;

    let ntk_cfg = NtkConfig {
        sigma_w,
        b,
        eps,
        width: 16,
        mc_samples: gram_mc,
        seed: cfg.seed,
    };
    let mut rng = derived_rng(cfg.seed, 9999);
    let points: Vec<Vec<f64>> = (0..n_points.max(2))
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();

    // Shared-sample Gram: PSD as a finite feature Gram.
    let gram_points: Vec<Vec<f64>> = (0..10)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let gram = ntk_gram(&gram_points, &ntk_cfg)?;
    let psd = psd_check(&gram, 1e-10);

    let table = empirical_ntk_convergence(&points, &ntk_cfg, &widths, seeds_per_width)?;
    let slope = table.loglog_slope();

    let mut record = ResultRecord::new(cfg);
    record.metric("gram_min_eig", psd.min_eigenvalue);
    record.metric("gram_max_eig", psd.max_eigenvalue);
    record.metric("variance_loglog_slope", slope);
    for row in &table.rows {
        record.metric(&format!("seed_variance_w{}", row.width), row.variance);
    }
    record.pass = Some(psd.is_psd && (slope + 1.0).abs() <= 0.2);
    Ok((record, Some(table.to_csv())))
}
