// Seed-addressed Brownian paths and coarse/fine coupling.
//
// Every path is a pure function of `(seed, path id)`, and aggregating fine
// increments onto a nested grid reproduces the coarse knots bit for bit.
//
// `cargo run --release --example coupled_paths`

use heston_barrier::grid_paths::{coarsen_increments, correlate, cumulative, make_grid, sample_path};
use heston_barrier::schemes::{run_euler, run_reference};
use heston_barrier::model::Preset;

pub fn run_example(paths: usize) -> heston_barrier::Result<()> {
    let fine = make_grid(1.0, 1024)?;
    let coarse = make_grid(1.0, 16)?;
    let p = Preset::Unit.params();
    let mut max_mismatch: f64 = 0.0;
    let mut corr = 0.0;
    for id in 0..paths as u64 {
        let path = sample_path(&fine, 42, id);
        assert_eq!(path, sample_path(&fine, 42, id));
        let (dw, db) = coarsen_increments(&path, coarse.steps())?;
        let w_fine = path.w_knots();
        for (k, w) in cumulative(&dw).iter().enumerate() {
            max_mismatch = max_mismatch.max((w - w_fine[k * 64]).abs());
        }
        let z: f64 = correlate(&path, p.rho()).iter().sum();
        corr += z * w_fine[1024];
        if id == 0 {
            let euler = run_euler(&p, &coarse, &dw, &db)?;
            let reference = run_reference(&p, &fine, &path.dw, &path.db)?;
            println!("path 0: Euler (N=16) terminal {:?}", euler.terminal());
            println!("path 0: reference (N_f=1024) terminal {:?}", reference.terminal());
        }
    }
    println!("max |coarse knot - fine knot| over {paths} paths: {max_mismatch:e}");
    println!("sample E[Z_1 W_1] = {:.4} (rho = {})", corr / paths as f64, p.rho());
    Ok(())
}

fn main() -> heston_barrier::Result<()> {
    run_example(std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000))
}
