// Strong L1 error of the full-truncation Euler scheme at T against the fine
// drift-implicit reference, for each shipped preset, with log-log rate fits.
//
// `cargo run --release --example euler_rates -- 100000`

use heston_barrier::error_lab::{error_sweep, fit_rate, Component, SweepSpec};
use heston_barrier::model::Preset;

pub fn run_example(paths: usize) -> heston_barrier::Result<()> {
    let steps: Vec<usize> = (4..=9).map(|k| 1 << k).collect();
    for preset in Preset::ALL {
        let p = preset.params();
        let sweep = error_sweep(&p, &SweepSpec::euler(steps.clone(), 4096, paths, 1))?;
        println!("{preset} (nu = {:.3})", p.feller_index());
        println!("{:>5} {:>12} {:>12} {:>12}", "N", "err_x", "err_v", "err_l1");
        for r in &sweep.reports {
            println!("{:>5} {:>12.4e} {:>12.4e} {:>12.4e}", r.steps, r.err_x, r.err_v, r.err_l1);
        }
        for (name, c) in [("x", Component::X), ("v", Component::V), ("l1", Component::L1)] {
            let fit = fit_rate(&sweep.reports, c)?;
            println!("  order({name}) = {:.3}, r^2 = {:.4}", fit.slope, fit.r_squared);
        }
    }
    Ok(())
}

fn main() -> heston_barrier::Result<()> {
    run_example(std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000))
}
