//! Sweep the two exact bias finite-difference identities over random
//! configurations spanning six decades of `eps` and `h`.
//!
//! Relative deviation convention: both identities cancel stencil terms of
//! size `max((x'w + kh)^2, h^2)/D` down to a possibly much smaller value,
//! so the rounding noise scales with the stencil and each deviation is
//! measured against `max(1, |rhs|, largest stencil term)` (the backward
//! error of the combination).

use rand::Rng;

use yat_core::farfield::{imq_from_yat_triplet, unbiased_from_biased_triplet};
use yat_core::kernel::atom_eval;
use yat_core::rng::derived_rng;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::record::ResultRecord;

const DIMS: [usize; 4] = [1, 2, 8, 64];

pub struct IdentitySweep {
    pub max_dev_imq: f64,
    pub max_dev_unbiased: f64,
    pub draws: usize,
}

pub fn sweep(draws: usize, seed: u64) -> Result<IdentitySweep, CliError> {
    let mut max_dev_imq = 0.0f64;
    let mut max_dev_unbiased = 0.0f64;
    for trial in 0..draws {
        let mut rng = derived_rng(seed, trial as u64);
        let d = DIMS[trial % DIMS.len()];
        let eps = 10f64.powf(rng.random_range(-3.0..3.0));
        let h = 10f64.powf(rng.random_range(-3.0..3.0));
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();

        let stencil = atom_eval(&x, &w, 3.0 * h, eps)?;

        let (lhs1, rhs1) = imq_from_yat_triplet(&x, &w, h, eps)?;
        let dev1 = (lhs1 - rhs1).abs() / rhs1.abs().max(stencil).max(1.0);
        max_dev_imq = max_dev_imq.max(dev1);

        let (lhs2, rhs2) = unbiased_from_biased_triplet(&x, &w, h, eps)?;
        let dev2 = (lhs2 - rhs2).abs() / rhs2.abs().max(stencil).max(1.0);
        max_dev_unbiased = max_dev_unbiased.max(dev2);
    }
    Ok(IdentitySweep {
        max_dev_imq,
        max_dev_unbiased,
        draws,
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<(ResultRecord, Option<String>), CliError> {
    let draws = cfg.get_usize("draws", 10_000)?;
    let out = sweep(draws, cfg.seed)?;
    let mut record = ResultRecord::new(cfg);
    record.metric("max_rel_dev_imq_identity", out.max_dev_imq);
    record.metric("max_rel_dev_unbiased_extrapolation", out.max_dev_unbiased);
    record.metric("draws", out.draws as f64);
    record.pass = Some(out.max_dev_imq <= 1e-11 && out.max_dev_unbiased <= 1e-11);
    Ok((record, None))
}
