//! Two-sample testing diagnostics: Type-I calibration of the U-statistic
//! with a permutation threshold under the null, and power on a mean-shifted
//! alternative. The sample-size planner is echoed for reference.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use yat_core::bounds::{mmd_permutation_threshold, mmd_sample_size, mmd_u_statistic};
use yat_core::rng::derived_rng;
use yat_core::KernelParams;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::record::ResultRecord;

fn gaussian_cloud(n: usize, d: usize, shift: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut v: Vec<f64> = (0..d)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            v[0] += shift;
            v
        })
        .collect()
}

pub fn run(cfg: &ExperimentConfig) -> Result<(ResultRecord, Option<String>), CliError> {
    let n = cfg.get_usize("n", 50)?;
    let trials = cfg.get_usize("trials", 500)?;
    let permutations = cfg.get_usize("permutations", 500)?;
    let alpha = cfg.get_f64("alpha", 0.05)?;
    let d = cfg.get_usize("d", 2)?;
    let shift = cfg.get_f64("shift", 2.0)?;
    let b = cfg.get_f64("b", 1.0)?;
    let eps = cfg.get_f64("eps", 1.0)?;
    if n < 2 {
        return Err(CliError::Config("mmd_test needs n >= 2".into()));
    }
    let p = KernelParams::yat(b, eps).map_err(CliError::Numerical)?;

    let run_trial = |trial: u64, with_shift: f64| -> Result<bool, CliError> {
        let mut rng = derived_rng(cfg.seed, trial);
        let x = gaussian_cloud(n, d, 0.0, &mut rng);
        let y = gaussian_cloud(n, d, with_shift, &mut rng);
        let threshold =
            mmd_permutation_threshold(&x, &y, &p, permutations, alpha, cfg.seed ^ (trial << 20))?;
        Ok(mmd_u_statistic(&x, &y, &p, threshold)?.reject)
    };

    let null_rejections: usize = (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(t, 0.0).map(usize::from))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .sum();
    let power_trials = (trials / 4).max(10);
    let alt_rejections: usize = (0..power_trials as u64)
        .into_par_iter()
        .map(|t| run_trial(t + 1_000_000, shift).map(usize::from))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .sum();

    let type1 = null_rejections as f64 / trials as f64;
    let power = alt_rejections as f64 / power_trials as f64;
    let planned = mmd_sample_size(1.0, &p, 0.1, 0.05, 1.0)?;

    let mut record = ResultRecord::new(cfg);
    record.metric("type1_rate", type1);
    record.metric("nominal_alpha", alpha);
    record.metric("power_at_shift", power);
    record.metric("planned_n_example", planned as f64);
    record.pass = Some(type1 <= 1.5 * alpha);
    Ok((record, None))
}
