// `X_T = Y_T + sqrt(1 - rho^2) (int A dB - sigma/2 int B dW)` on one fine
// path, then the reconstruction and Riemann-sum gaps over many paths.
//
// `cargo run --release --example decomposition -- 10000`

use heston_barrier::grid_paths::{make_grid, sample_path};
use heston_barrier::model::Preset;
use heston_barrier::optimal_estimators::{decompose_x, decomposition_study};
use heston_barrier::schemes::{run_euler, run_reference};

pub fn run_example(paths: usize) -> heston_barrier::Result<()> {
    let p = Preset::High.params();
    let grid = make_grid(p.horizon(), 4096)?;
    let path = sample_path(&grid, 5, 0);
    let reference = run_reference(&p, &grid, &path.dw, &path.db)?;
    let parts = decompose_x(&p, &reference, &path.dw, &path.db)?;
    let euler = run_euler(&p, &grid, &path.dw, &path.db)?;
    println!(
        "Y_T = {:.6}, int A dB = {:.6}, int B dW = {:.6}",
        parts.y_t, parts.int_a_db, parts.int_b_dw
    );
    println!(
        "reconstructed X_T = {:.6}, Euler X_T = {:.6}, reference X_T = {:.6}",
        parts.x_t_reconstructed,
        euler.terminal().x,
        reference.terminal().x
    );
    let study = decomposition_study(&p, &[256, 1024, 4096], &[16, 32, 64, 128], paths, 5)?;
    for (n, gap, se) in study.reconstruction {
        println!("N_f = {n:>5}: E|X_Euler - X_reconstructed| = {gap:.3e} +- {se:.1e}");
    }
    for (n, gap, se) in study.riemann {
        println!("N = {n:>4}: E|int A dB - Riemann sum| = {gap:.3e} +- {se:.1e}");
    }
    Ok(())
}

fn main() -> heston_barrier::Result<()> {
    run_example(std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10_000))
}
