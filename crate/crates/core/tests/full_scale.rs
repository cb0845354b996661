//! Protocol runs at the experiment's size. Slow; run with `--ignored`.

use cvot::experiment::{self, desk_run};
use cvot::protocol::run_in_process;
use cvot::rate::secure_length;
use cvot::recon::leakage_rate;

#[test]
#[ignore]
fn experiment_scale_runs_agree() {
    let (signals, per_set, runs) = (203_000, 100_000, 50);
    let mut run = desk_run(0.0, signals, per_set, 0.94, 1, 8).unwrap();
    let mut inputs = experiment::rate_experiment(0.0, 0.001);
    inputs.n = signals as f64;
    inputs.r_ec = leakage_rate(&run.config.shared.code);
    run.config.shared.ell = secure_length(&inputs).unwrap().ell as usize;
    let mut good = 0;
    for s in 0..runs {
        run.config.choice = (s % 2) as u8;
        let out = run_in_process(&run.config, &run.link.sample(signals, s), 100 + s);
        good += out.correct() as u32;
    }
    println!("{good}/{runs} correct, l = {}", run.config.shared.ell);
    assert!(good as f64 >= 0.99 * runs as f64);
}
