//! Python bindings: capacity, uncertainty bounds, secure rates and desk-scale protocol runs.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cvot_core::experiment::{self, desk_run};
use cvot_core::params::SHOT_NOISE_TO_NATURAL;
use cvot_core::protocol::run_in_process;
use cvot_core::rate::{self, secure_length};
use cvot_core::recon::leakage_rate;
use cvot_core::uncertainty::{
    lambda_from_renyi, lambda_iid, GaussianBound, IidCorrection, MajorizationBound,
    MajorizingSequence,
};

fn value_error(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Classical capacity g(x) of a bosonic channel with mean photon number x.
#[pyfunction]
fn g_capacity(x: f64) -> PyResult<f64> {
    if !(x >= 0.0) {
        return Err(value_error(format!("x must be >= 0, got {x}")));
    }
    Ok(rate::g_capacity(x))
}

/// The three min-entropy rate bounds at bin width `delta` (natural units).
#[pyfunction]
#[pyo3(signature = (delta, n=1e8, eps=experiment::BOUNDS_EPS, iid_block=10, sigma_a_snu=4.838))]
fn lambda_bounds(
    py: Python<'_>,
    delta: f64,
    n: f64,
    eps: f64,
    iid_block: u32,
    sigma_a_snu: f64,
) -> PyResult<Bound<'_, PyDict>> {
    if !(delta > 0.0 && n >= 1.0 && eps > 0.0 && eps < 1.0 && iid_block >= 1) {
        return Err(value_error(
            "need delta > 0, n >= 1, 0 < eps < 1 and iid_block >= 1",
        ));
    }
    let seq = MajorizingSequence::new(delta).map_err(value_error)?;
    let d = PyDict::new(py);
    d.set_item("maj", lambda_from_renyi(&MajorizationBound(seq), n, eps).0)?;
    d.set_item(
        "iid",
        lambda_iid(
            delta,
            n,
            iid_block,
            eps,
            sigma_a_snu * SHOT_NOISE_TO_NATURAL,
            IidCorrection::LogOfSquare,
        ),
    )?;
    d.set_item(
        "gauss",
        lambda_from_renyi(&GaussianBound { delta }, n, eps).0,
    )?;
    Ok(d)
}

/// Secure length and rate of the reference experiment at channel loss `mu`
/// and storage rate `nu`.
#[pyfunction]
#[pyo3(signature = (mu, nu, n=experiment::RATE_SIGNALS))]
fn secure_rate(py: Python<'_>, mu: f64, nu: f64, n: f64) -> PyResult<Bound<'_, PyDict>> {
    if !(0.0..1.0).contains(&mu) || !(nu >= 0.0) {
        return Err(value_error("need 0 <= mu < 1 and nu >= 0"));
    }
    let mut inputs = experiment::rate_experiment(mu, nu);
    inputs.n = n;
    let r = secure_length(&inputs).map_err(value_error)?;
    let d = PyDict::new(py);
    d.set_item("ell", r.ell)?;
    d.set_item("rate", r.rate(n))?;
    d.set_item("lambda", r.lambda)?;
    d.set_item("eps1", r.eps_1)?;
    d.set_item("eps2", r.eps_2)?;
    d.set_item("feasible", r.feasible)?;
    Ok(d)
}

/// One randomized-OT run with both parties in process.
#[pyfunction]
#[pyo3(signature = (mu=0.0, signals=20_000, per_set=9_600, code_rate=0.94, code_seed=3, choice=0, nu=0.001, seed=1))]
#[allow(clippy::too_many_arguments)]
fn run_rot(
    py: Python<'_>,
    mu: f64,
    signals: usize,
    per_set: usize,
    code_rate: f64,
    code_seed: u64,
    choice: u8,
    nu: f64,
    seed: u64,
) -> PyResult<Bound<'_, PyDict>> {
    if choice > 1 || !(0.0..1.0).contains(&mu) {
        return Err(value_error("need choice in {0, 1} and 0 <= mu < 1"));
    }
    let outcome = py.detach(|| -> Result<_, String> {
        let mut inputs = experiment::rate_experiment(mu, nu);
        inputs.n = 2.0 * per_set as f64;
        let mut run =
            desk_run(mu, signals, per_set, code_rate, 0, code_seed).map_err(|e| e.to_string())?;
        inputs.r_ec = leakage_rate(&run.config.shared.code);
        run.config.shared.ell = match secure_length(&inputs) {
            Ok(r) => r.ell as usize,
            Err(rate::RateError::InfeasibleBudget { .. }) => 0,
            Err(e) => return Err(e.to_string()),
        };
        run.config.choice = choice;
        let records = run.link.sample(signals, seed);
        Ok((
            run.config.shared.ell,
            run_in_process(&run.config, &records, seed),
        ))
    });
    let (ell, out) = outcome.map_err(value_error)?;
    let status = match (&out.alice, &out.bob) {
        (Ok(_), Ok(_)) => "done".to_string(),
        (Err(e), _) | (_, Err(e)) => format!("aborted: {e}"),
    };
    let d = PyDict::new(py);
    d.set_item("ell", ell)?;
    d.set_item("status", status)?;
    d.set_item("correct", out.correct())?;
    d.set_item("frames", out.transcript.entries.len())?;
    if let Ok(b) = &out.bob {
        d.set_item("decode_iterations", b.decode_iterations)?;
    }
    Ok(d)
}

#[pymodule]
fn cvot_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(g_capacity, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(secure_rate, m)?)?;
    m.add_function(wrap_pyfunction!(run_rot, m)?)?;
    Ok(())
}
