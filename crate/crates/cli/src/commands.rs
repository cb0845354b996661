//! The table-producing subcommands.

use cvot::config::ConfigFile;
use cvot::experiment::{correlated_frame, RECON_TABLE};
use cvot::params::SHOT_NOISE_TO_NATURAL;
use cvot::rate::{security_region, LambdaTable};
use cvot::recon::{self, DecoderConfig, LdpcCode, NoiseModel, SideInfo};
use cvot::uncertainty::{
    lambda_from_renyi, lambda_iid, GaussianBound, MajorizationBound, MajorizingSequence,
};
use cvot::{Encoding, SeededRng};

use crate::output::{Csv, OutputDir};
use crate::{row, settings, CliError};

/// Secure length and rate over a (μ, ν) grid.
pub fn rate(cfg: &ConfigFile, out: &mut OutputDir) -> Result<(), CliError> {
    let mus = settings::list(cfg, "mu_grid")?;
    let nus = settings::list(cfg, "nu_grid")?;
    let n: f64 = cfg.require("n")?;
    let scheme = settings::scheme(cfg, "")?;
    let beta: f64 = cfg.require("beta")?;
    let encoding = settings::encoding(&cfg.require::<String>("encoding")?)?;
    let mut csv = Csv::new(&["nu", "mu", "rate", "ell", "lambda", "eps1", "eps2"]);
    let mut rows = Vec::new();
    for &mu in &mus {
        let base = settings::rate_at(cfg, mu, nus[0], n, scheme, beta, encoding)?;
        // A cutoff penalty above the budget makes every ν infeasible at this μ.
        let table = LambdaTable::build(&base).ok();
        for &nu in &nus {
            let inputs = settings::rate_at(cfg, mu, nu, n, scheme, beta, encoding)?;
            let r = table.as_ref().map(|t| t.evaluate(&inputs));
            let (ell, lambda, e1, e2) =
                r.map_or((0, 0.0, 0.0, 0.0), |r| (r.ell, r.lambda, r.eps_1, r.eps_2));
            rows.push((nu, mu, ell as f64 / n, ell, lambda, e1, e2));
        }
    }
    // Grouped by ν so each storage rate reads as one curve.
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    for (nu, mu, rate, ell, lambda, e1, e2) in rows {
        csv.row(row![nu, mu, rate, ell, lambda, e1, e2]);
    }
    out.write_csv("rate.csv", &csv)
}

fn encoding_prefix(e: Encoding) -> &'static str {
    match e {
        Encoding::Gaussian => "gaussian.",
        Encoding::Iid { .. } => "iid.",
        Encoding::Arbitrary => "arbitrary.",
    }
}

fn encoding_file_tag(e: Encoding) -> String {
    match e {
        Encoding::Iid { block } => format!("iid{block}"),
        other => other.to_string(),
    }
}

/// Feasible (ν, η) cells for each encoding class.
pub fn region(cfg: &ConfigFile, out: &mut OutputDir) -> Result<(), CliError> {
    let nus = settings::list(cfg, "nu_grid")?;
    let etas = settings::list(cfg, "eta_grid")?;
    let encodings = cfg
        .require::<String>("encodings")?
        .split(',')
        .map(settings::encoding)
        .collect::<Result<Vec<_>, _>>()?;
    for enc in encodings {
        let p = encoding_prefix(enc);
        let n: f64 = cfg.require(&format!("{p}n"))?;
        let beta: f64 = cfg.require(&format!("{p}beta"))?;
        let scheme = settings::scheme(cfg, p)?;
        let base = settings::rate_at(cfg, 0.0, nus[0], n, scheme, beta, enc)?;
        let mut csv = Csv::new(&["nu", "eta", "feasible", "ell"]);
        match security_region(&base, &nus, &etas) {
            Ok(cells) => {
                for c in cells {
                    csv.row(row![c.nu, c.eta, c.feasible, c.ell]);
                }
            }
            Err(cvot::rate::RateError::InfeasibleBudget { .. }) => {
                for &nu in &nus {
                    for &eta in &etas {
                        csv.row(row![nu, eta, false, 0u64]);
                    }
                }
            }
            Err(e) => return Err(CliError::Config(e.to_string())),
        }
        out.write_csv(&format!("region_{}.csv", encoding_file_tag(enc)), &csv)?;
    }
    Ok(())
}

/// The three uncertainty bounds as functions of the bin width.
pub fn bounds(cfg: &ConfigFile, out: &mut OutputDir) -> Result<(), CliError> {
    let deltas = settings::list(cfg, "delta_grid")?;
    let n: f64 = cfg.require("n")?;
    let eps: f64 = cfg.require("eps")?;
    let block: u32 = cfg.require("iid_block")?;
    let sigma = cfg.require::<f64>("sigma_a_snu")? * SHOT_NOISE_TO_NATURAL;
    let correction = settings::iid_correction(cfg)?;
    if !(eps > 0.0 && eps < 1.0) || !(n >= 1.0) {
        return Err(CliError::Config(
            "bounds need 0 < eps < 1 and n >= 1".into(),
        ));
    }
    let mut csv = Csv::new(&["delta", "lambda_maj", "lambda_iid", "lambda_gauss"]);
    for delta in deltas {
        if !(delta > 0.0) {
            return Err(CliError::Config(format!(
                "bin width must be > 0, got {delta}"
            )));
        }
        let seq = MajorizingSequence::new(delta).map_err(|e| CliError::Config(e.to_string()))?;
        let maj = lambda_from_renyi(&MajorizationBound(seq), n, eps).0;
        let iid = lambda_iid(delta, n, block, eps, sigma, correction);
        let gauss = lambda_from_renyi(&GaussianBound { delta }, n, eps).0;
        csv.row(row![delta, maj, iid, gauss]);
    }
    out.write_csv("bounds.csv", &csv)
}

/// Frame error rate of the reconciliation code for each loss setting of the
/// reference table, on simulated correlated data.
pub fn recon_bench(cfg: &ConfigFile, out: &mut OutputDir) -> Result<(), CliError> {
    let losses = settings::list(cfg, "rows")?;
    let block: usize = cfg.require("block")?;
    let frames: u64 = cfg.require("frames")?;
    let code_seed: u64 = cfg.require("code_seed")?;
    let seed: u64 = cfg.require("seed")?;
    let scheme = settings::scheme(cfg, "")?;
    let decoder = DecoderConfig {
        max_iterations: cfg.require("max_iterations")?,
        damping: cfg.require("damping")?,
    };
    let mut csv = Csv::new(&[
        "loss",
        "sigma_a_snu",
        "rho",
        "code_rate",
        "r_ec",
        "beta",
        "frames",
        "failures",
        "fer",
        "mean_iterations",
    ]);
    for loss in losses {
        let row = RECON_TABLE
            .iter()
            .find(|r| (r.channel_loss - loss).abs() < 1e-9)
            .ok_or_else(|| CliError::Config(format!("no reference row with loss {loss}")))?;
        let code = LdpcCode::build(block, row.code_rate, code_seed)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let noise = NoiseModel {
            sigma_a: row.sigma_a(),
            sigma_b: row.sigma_a(),
            rho: row.rho,
        };
        let mut rng = SeededRng::new(seed, cvot::rng::streams::SOURCE);
        let (mut failures, mut iterations) = (0u64, 0usize);
        for _ in 0..frames {
            let (z, y) = correlated_frame(&noise, &scheme, block, &mut rng);
            let (low, syn) = recon::encode_frame(&code, &z)?;
            match recon::decode_frame(
                &code,
                &scheme,
                &noise,
                SideInfo::Continuous(&y),
                &low,
                &syn,
                &decoder,
            ) {
                Ok((zh, it)) => {
                    iterations += it;
                    failures += u64::from(zh != z);
                }
                Err(_) => failures += 1,
            }
        }
        let r_ec = recon::leakage_rate(&code);
        let beta = recon::efficiency_for_source(r_ec, noise.sigma_a, noise.rho, &scheme);
        csv.row(row![
            loss,
            row.sigma_a_snu,
            row.rho,
            code.rate(),
            r_ec,
            beta,
            frames,
            failures,
            failures as f64 / frames.max(1) as f64,
            iterations as f64 / frames.max(1) as f64,
        ]);
    }
    out.write_csv("recon_bench.csv", &csv)
}
