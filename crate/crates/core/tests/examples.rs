//! Runs the examples at small sizes so they stay in sync with the library.

macro_rules! example {
    ($module:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(coupled_paths, "coupled_paths.rs");
example!(clark_cameron, "clark_cameron.rs");
example!(cir_marginals, "cir_marginals.rs");
example!(bridge_identity, "bridge_identity.rs");
example!(decomposition, "decomposition.rs");
example!(euler_rates, "euler_rates.rs");
example!(barrier_floor, "barrier_floor.rs");

#[test]
fn coupled_paths_runs() {
    coupled_paths::run_example(50).unwrap();
}

#[test]
fn clark_cameron_runs() {
    clark_cameron::run_example(500).unwrap();
}

#[test]
fn cir_marginals_runs() {
    cir_marginals::run_example(500).unwrap();
}

#[test]
fn bridge_identity_runs() {
    bridge_identity::run_example(1000).unwrap();
}

#[test]
fn decomposition_runs() {
    decomposition::run_example(50).unwrap();
}

#[test]
fn euler_rates_runs() {
    euler_rates::run_example(1000).unwrap();
}

#[test]
fn barrier_floor_runs() {
    barrier_floor::run_example(1000).unwrap();
}
