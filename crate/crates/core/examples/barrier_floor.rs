// Euler `E|x_N - X_T|` against the lower bound `c N^{-1/2}` that holds for
// every method using N grid values of the drivers, next to the bridge
// quantity `sqrt(N) E|I| / T` that produces the constant.
//
// `cargo run --release --example barrier_floor -- 100000`

use heston_barrier::error_lab::{barrier_constant, barrier_table};
use heston_barrier::model::Preset;

pub fn run_example(paths: usize) -> heston_barrier::Result<()> {
    let p = Preset::High.params();
    let steps: Vec<usize> = (4..=9).map(|k| 1 << k).collect();
    println!("c = sigma T / 8 sqrt(1 - rho^2) = {:.6}", barrier_constant(&p));
    println!("{:>5} {:>11} {:>11} {:>7} {:>9}", "N", "floor", "err_x", "ratio", "bridge");
    for row in barrier_table(&p, &steps, 4096, paths, 7)? {
        println!(
            "{:>5} {:>11.4e} {:>11.4e} {:>7.3} {:>9.4}",
            row.steps, row.floor, row.err_x, row.ratio, row.bridge_scaled_mean
        );
    }
    Ok(())
}

fn main() -> heston_barrier::Result<()> {
    run_example(std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000))
}
