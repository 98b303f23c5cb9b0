//! PSD suite: random Grams across sizes, dimensions, and biases must pass
//! the PSD, Loewner-domination, channel, and eigenvalue-domination checks;
//! the negative-bias two-node counterexample must fail with its exact
//! minimum eigenvalue.

use rand::Rng;

use yat_core::gram::{
    build_gram, channel_grams, eigen_domination_check, loewner_domination_check, psd_check,
};
use yat_core::rng::derived_rng;
use yat_core::KernelParams;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::record::ResultRecord;

pub fn run(cfg: &ExperimentConfig) -> Result<(ResultRecord, Option<String>), CliError> {
    let sizes = cfg.get_usize_list("sizes", &[20, 50, 200])?;
    let dims = cfg.get_usize_list("dims", &[2, 8, 64])?;
    let biases = cfg.get_f64_list("biases", &[0.0, 0.5, 2.0])?;
    let eps = cfg.get_f64("eps", 1.0)?;
    if sizes.iter().any(|&n| n == 0 || n > 200) {
        return Err(CliError::Config(
            "psd_suite sizes must lie in 1..=200".into(),
        ));
    }

    let mut record = ResultRecord::new(cfg);
    let mut csv =
        String::from("n,d,b,min_eig,max_eig,loewner_min_eig,channel_min_eig,eigen_domination\n");
    let mut pass = true;
    let mut worst_ratio = 0.0f64;
    let mut trial = 0u64;
    for &n in &sizes {
        for &d in &dims {
            for &b in &biases {
                let mut rng = derived_rng(cfg.seed, trial);
                trial += 1;
                let p = KernelParams::yat(b, eps).map_err(CliError::Numerical)?;
                let nodes: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
                    .collect();

                let gram = build_gram(&nodes, &p)?;
                let report = psd_check(&gram, 1e-8);
                pass &= report.is_psd;
                worst_ratio =
                    worst_ratio.max(-report.min_eigenvalue / report.max_eigenvalue.max(1.0));

                let loewner = loewner_domination_check(&nodes, &p)?;
                pass &= loewner.is_psd;

                let (g0, g1, g2) = channel_grams(&nodes, &p)?;
                let channel_min = psd_check(&g0, 1e-8)
                    .min_eigenvalue
                    .min(psd_check(&g1, 1e-8).min_eigenvalue)
                    .min(psd_check(&g2, 1e-8).min_eigenvalue);
                for g in [&g0, &g1, &g2] {
                    pass &= psd_check(g, 1e-8).is_psd;
                }

                let dominated = if b > 0.0 {
                    let ok = eigen_domination_check(&nodes, &p, 1e-10)?;
                    pass &= ok;
                    ok
                } else {
                    true
                };

                csv.push_str(&format!(
                    "{n},{d},{b},{},{},{},{},{}\n",
                    report.min_eigenvalue,
                    report.max_eigenvalue,
                    loewner.min_eigenvalue,
                    channel_min,
                    dominated
                ));
            }
        }
    }

    // The b = -1 counterexample at nodes e1, e2 with eps = 1 must fail PSD
    // with minimum eigenvalue exactly -1/(2 + eps) = -1/3.
    let pneg = KernelParams::yat_counterexample(-1.0, 1.0).map_err(CliError::Numerical)?;
    let counter = build_gram(&[vec![1.0, 0.0], vec![0.0, 1.0]], &pneg)?;
    let counter_report = psd_check(&counter, 1e-8);
    let counter_ok =
        !counter_report.is_psd && (counter_report.min_eigenvalue + 1.0 / 3.0).abs() <= 1e-12;
    pass &= counter_ok;

    record.metric("worst_neg_eig_ratio", worst_ratio);
    record.metric("counterexample_min_eig", counter_report.min_eigenvalue);
    record.metric("instances", trial as f64);
    record.pass = Some(pass);
    Ok((record, Some(csv)))
}
