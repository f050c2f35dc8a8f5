// `dX = V dB, dV = dW`: the grid conditional expectation of `X_1 = int W dB`
// has RMS error exactly `N^{-1/2} / 2`; the left-point sum does worse.
//
// `cargo run --release --example clark_cameron -- 100000`

use heston_barrier::optimal_estimators::clark_cameron_table;

pub fn run_example(paths: usize) -> heston_barrier::Result<()> {
    println!("{:>4} {:>10} {:>10} {:>10} {:>12}", "N", "rms", "se", "target", "left-point");
    for r in clark_cameron_table(&[4, 16, 64], 4096, paths, 7)? {
        println!("{:>4} {:>10.6} {:>10.6} {:>10.6} {:>12.6}", r.steps, r.rms, r.se, r.target, r.left_point_rms);
    }
    Ok(())
}

fn main() -> heston_barrier::Result<()> {
    run_example(std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000))
}
