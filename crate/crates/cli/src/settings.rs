//! Resolution of command configurations: built-in defaults, then the user's
//! file, then `--set` overrides, then the seed.

use std::collections::BTreeSet;
use std::path::Path;

use cvot::config::ConfigFile;
use cvot::experiment::{rate_inputs, Link};
use cvot::gauss::SourceModel;
use cvot::params::SHOT_NOISE_TO_NATURAL;
use cvot::rate::{LengthFormula, RateInputs};
use cvot::uncertainty::IidCorrection;
use cvot::{DiscretizationScheme, Encoding, MemoryAssumption};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 1;
pub const SEED_ENV: &str = "CVOT_SEED";

/// Source and post-processing shared by `rate`, `region` and `protocol`.
const SCENARIO: &str = "
source = fitted
squeezing_db = 12
loss_a = 0.03
loss_b = 0.06
sigma_a_snu = 4.838
rho = 0.996
delta_snu = 0.1
bits = 10
eps_a = 1e-7
eta = 0.75
n_max = 100
xi = 1
beta = 0.942
formula = full
iid_correction = log_of_square
";

const RATE: &str = "
n = 200000
encoding = gaussian
mu_grid = 0:0.4:0.01
nu_grid = 0.001,0.01
";

const REGION: &str = "
source = nominal
encodings = gaussian,iid:10,arbitrary
nu_grid = 0,0.0001,0.0002,0.0005,0.001,0.002,0.005,0.01,0.02,0.05,0.1,0.2,0.5,1
eta_grid = 0:1:0.05
gaussian.n = 200000
gaussian.beta = 0.944
gaussian.delta_snu = 0.1
gaussian.bits = 10
iid.n = 100000000
iid.beta = 0.944
iid.delta_snu = 0.1
iid.bits = 10
arbitrary.n = 100000000
arbitrary.beta = 0.98
arbitrary.delta_snu = 1.0
arbitrary.bits = 7
";

const BOUNDS: &str = "
n = 100000000
eps = 1.25e-8
delta_grid = 0.05:2:0.05
iid_block = 10
sigma_a_snu = 4.838
iid_correction = log_of_square
";

const RECON_BENCH: &str = "
block = 10000
frames = 20
rows = 0,0.03,0.06,0.09,0.12,0.15
delta_snu = 0.1
bits = 10
code_seed = 1
max_iterations = 100
damping = 0.8
";

const PROTOCOL: &str = "
encoding = gaussian
mu = 0
n = 20000
per_set = 9600
code_rate = 0.94
code_seed = 3
nu = 0.001
choice = 0
delay = 0
max_iterations = 100
damping = 0.8
ot = false
";

/// Keys a command accepts without a default value.
fn optional_keys(command: &str) -> &'static [&'static str] {
    match command {
        "protocol" => &[
            "ell",
            "bob_code_seed",
            "inject_records",
            "dump_records",
            "transcript",
        ],
        _ => &[],
    }
}

pub fn defaults(command: &str) -> ConfigFile {
    let texts: &[&str] = match command {
        "rate" => &[SCENARIO, RATE],
        "region" => &[SCENARIO, REGION],
        "bounds" => &[BOUNDS],
        "recon-bench" => &[RECON_BENCH],
        "protocol" => &[SCENARIO, PROTOCOL],
        other => unreachable!("no defaults for {other}"),
    };
    texts
        .iter()
        .map(|t| ConfigFile::parse(t).expect("built-in defaults parse"))
        .fold(ConfigFile::default(), |acc, c| acc.merged(&c))
}

/// Defaults ← file ← overrides, with the seed filled in from the environment
/// when none was given. Unknown keys are rejected.
pub fn resolve(
    command: &str,
    file: Option<&Path>,
    overrides: &[String],
) -> Result<ConfigFile, CliError> {
    let mut cfg = defaults(command);
    let allowed: BTreeSet<String> = cfg
        .keys()
        .chain(optional_keys(command).iter().copied())
        .chain(["seed"])
        .map(str::to_string)
        .collect();
    if let Some(path) = file {
        cfg = cfg.merged(&ConfigFile::load(path)?);
    }
    let mut extra = ConfigFile::default();
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {o:?}")))?;
        extra.set(k.trim(), v.trim());
    }
    cfg = cfg.merged(&extra);
    if let Some(bad) = cfg.keys().find(|k| !allowed.contains(*k)) {
        return Err(CliError::Config(format!(
            "unknown key `{bad}` for `{command}`"
        )));
    }
    if cfg.get_str("seed").is_none() {
        let seed = match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse::<u64>()
                .map_err(|e| CliError::Config(format!("{SEED_ENV}={v:?}: {e}")))?,
            Err(_) => DEFAULT_SEED,
        };
        cfg.set("seed", seed);
    }
    Ok(cfg)
}

pub fn list(cfg: &ConfigFile, key: &str) -> Result<Vec<f64>, CliError> {
    let v = cfg.get_list(key)?.unwrap_or_default();
    if v.is_empty() {
        return Err(CliError::Config(format!("`{key}` must not be empty")));
    }
    Ok(v)
}

pub fn flag(cfg: &ConfigFile, key: &str) -> Result<bool, CliError> {
    Ok(cfg.get_or(key, false)?)
}

pub fn encoding(s: &str) -> Result<Encoding, CliError> {
    s.parse()
        .map_err(|e: cvot::ParamError| CliError::Config(e.to_string()))
}

fn formula(cfg: &ConfigFile) -> Result<LengthFormula, CliError> {
    match cfg.get_str("formula").unwrap_or("full") {
        "full" => Ok(LengthFormula::Full),
        "summary" => Ok(LengthFormula::Summary),
        other => Err(CliError::Config(format!(
            "formula must be full or summary, got {other:?}"
        ))),
    }
}

pub fn iid_correction(cfg: &ConfigFile) -> Result<IidCorrection, CliError> {
    match cfg.get_str("iid_correction").unwrap_or("log_of_square") {
        "log_of_square" => Ok(IidCorrection::LogOfSquare),
        "squared_log" => Ok(IidCorrection::SquaredLog),
        other => Err(CliError::Config(format!(
            "iid_correction must be log_of_square or squared_log, got {other:?}"
        ))),
    }
}

pub fn scheme(cfg: &ConfigFile, prefix: &str) -> Result<DiscretizationScheme, CliError> {
    let s = DiscretizationScheme::from_shot_noise_units(
        cfg.require(&format!("{prefix}delta_snu"))?,
        cfg.require(&format!("{prefix}bits"))?,
    );
    s.check().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(s)
}

/// The source described by the scenario keys.
pub fn source(cfg: &ConfigFile) -> Result<SourceModel, CliError> {
    let v_sq = 0.5 * 10f64.powf(-cfg.require::<f64>("squeezing_db")? / 10.0);
    let loss_a: f64 = cfg.require("loss_a")?;
    let src = match cfg.require::<String>("source")?.as_str() {
        "fitted" => SourceModel::fit_to_marginals(
            cfg.require::<f64>("sigma_a_snu")? * SHOT_NOISE_TO_NATURAL,
            cfg.require("rho")?,
            v_sq,
            loss_a,
        ),
        "nominal" => SourceModel::two_mode_squeezed(
            cfg.require("squeezing_db")?,
            loss_a,
            cfg.require("loss_b")?,
        ),
        other => {
            return Err(CliError::Config(format!(
                "source must be fitted or nominal, got {other:?}"
            )))
        }
    };
    src.map_err(|e| CliError::Config(e.to_string()))
}

pub fn link(cfg: &ConfigFile, mu: f64) -> Result<Link, CliError> {
    Link::new(source(cfg)?, mu).map_err(|e| CliError::Config(e.to_string()))
}

pub fn memory(cfg: &ConfigFile, nu: f64, encoding: Encoding) -> Result<MemoryAssumption, CliError> {
    let mem = MemoryAssumption {
        nu,
        eta: cfg.require("eta")?,
        n_max: cfg.require("n_max")?,
        xi: cfg.require("xi")?,
        encoding,
    };
    mem.check().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(mem)
}

/// Rate inputs at channel loss `mu` with the scenario's leakage model.
#[allow(clippy::too_many_arguments)]
pub fn rate_at(
    cfg: &ConfigFile,
    mu: f64,
    nu: f64,
    n: f64,
    scheme: DiscretizationScheme,
    beta: f64,
    encoding: Encoding,
) -> Result<RateInputs, CliError> {
    let link = link(cfg, mu)?;
    let mut inputs = rate_inputs(
        &link,
        n,
        scheme,
        cfg.require("eps_a")?,
        beta,
        memory(cfg, nu, encoding)?,
    );
    inputs.formula = formula(cfg)?;
    inputs.iid_correction = iid_correction(cfg)?;
    Ok(inputs)
}
