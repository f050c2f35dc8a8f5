// The residual iterated integral of the Brownian bridge against W has the law
// of `W_1 sqrt(int |Bcirc|^2)`; its mean sits in `[1/4, 0.3257] T / sqrt(N)`.
//
// `cargo run --release --example bridge_identity -- 100000`

use heston_barrier::bridge_lab::{bridge_l2_profile, distribution_identity_test, refinement_profile, BridgeCheck};
use heston_barrier::grid_paths::make_grid;
use heston_barrier::stats::ks_critical_1pct;

pub fn run_example(paths: usize) -> heston_barrier::Result<()> {
    let prof = bridge_l2_profile(&make_grid(1.0, 8)?);
    println!(
        "int sqrt(E|Bcirc_t|^2) dt: closed form {:.15}, quadrature {:.15}",
        prof.integral_of_sqrt(),
        prof.integral_of_sqrt_quadrature()
    );
    let r = distribution_identity_test(BridgeCheck { paths, steps: 8, refine: 8, seed: 3, horizon: 1.0 })?;
    println!("KS(I, G sqrt(Q)) = {:.5}, 1% critical value {:.5}", r.ks_stat, ks_critical_1pct(paths, paths));
    println!("sqrt(N) E|I| / T = {:.5} +- {:.5}", r.scaled_mean(), r.scaled_se());
    for (m, gap, se) in refinement_profile(8, 8, paths / 10, 3, 1.0)? {
        println!("E|I^{} - I^{m}|^2 = {gap:.3e} +- {se:.1e}", m + 1);
    }
    Ok(())
}

fn main() -> heston_barrier::Result<()> {
    run_example(std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000))
}
