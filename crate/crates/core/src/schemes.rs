//! Discrete-time schemes for `(X, V)`.
//!
//! * [`euler_step`]: the full-truncation Euler scheme. `v` is stored as is
//!   (it may go negative); only `v+ = max(v, 0)` enters drift and diffusion.
//! * [`DriftImplicitSqrt`]: drift-implicit Euler on `U = sqrt(V)`, which has
//!   additive noise `sigma/2 dW`. Strictly positive whenever nu > 1/2. Paired
//!   with a left-point log-Euler step for `X`, it is the fine-grid reference.
//! * [`cir_exact_transition`]: exact noncentral chi-square draw of
//!   `V_{t+dt} | V_t`, used only as a marginal-law oracle.

use rand::Rng;
use rayon::prelude::*;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid_paths::{brownian_increments, TimeGrid};
use crate::model::HestonParams;
use crate::rng::{Channel, PathRng};
use crate::stats;

/// Which recursion produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    EulerFullTruncation,
    DriftImplicitSqrt,
}

impl SchemeKind {
    pub fn tag(self) -> &'static str {
        match self {
            SchemeKind::EulerFullTruncation => "euler_full_truncation",
            SchemeKind::DriftImplicitSqrt => "drift_implicit_sqrt",
        }
    }
}

/// Log-price and variance at one knot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub x: f64,
    pub v: f64,
}

impl State {
    pub fn initial(p: &HestonParams) -> Self {
        State { x: p.x0(), v: p.v0() }
    }
}

/// Discrete states `(x_k, v_k)`, `k = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeTrajectory {
    pub grid: TimeGrid,
    pub xhat: Vec<f64>,
    pub vhat: Vec<f64>,
    pub scheme: SchemeKind,
}

impl SchemeTrajectory {
    pub fn terminal(&self) -> State {
        State { x: *self.xhat.last().unwrap(), v: *self.vhat.last().unwrap() }
    }

    /// True when a reference run had to fall back to the Euler scheme.
    pub fn is_fallback_reference(&self) -> bool {
        self.scheme == SchemeKind::EulerFullTruncation
    }
}

fn check_lengths(grid: &TimeGrid, dw: &[f64], db: &[f64]) -> Result<()> {
    for len in [dw.len(), db.len()] {
        if len != grid.steps() {
            return Err(LabError::LengthMismatch { expected: grid.steps(), actual: len });
        }
    }
    Ok(())
}

/// One step of the full-truncation Euler scheme.
#[inline]
pub fn euler_step(state: State, dw: f64, db: f64, dt: f64, p: &HestonParams) -> State {
    if dt == 0.0 {
        return state;
    }
    let vp = state.v.max(0.0);
    let sq = vp.sqrt();
    State {
        x: state.x + (p.mu() - 0.5 * vp) * dt + sq * (p.rho() * dw + p.rho_perp() * db),
        v: state.v + p.kappa() * (p.theta() - vp) * dt + p.sigma() * sq * dw,
    }
}

/// Terminal state of the Euler scheme; no trajectory is stored.
pub fn euler_terminal(p: &HestonParams, dt: f64, dw: &[f64], db: &[f64]) -> State {
    dw.iter()
        .zip(db)
        .fold(State::initial(p), |s, (&w, &b)| euler_step(s, w, b, dt, p))
}

pub fn run_euler(p: &HestonParams, grid: &TimeGrid, dw: &[f64], db: &[f64]) -> Result<SchemeTrajectory> {
    check_lengths(grid, dw, db)?;
    let n = grid.steps();
    let mut xhat = Vec::with_capacity(n + 1);
    let mut vhat = Vec::with_capacity(n + 1);
    let mut s = State::initial(p);
    xhat.push(s.x);
    vhat.push(s.v);
    for (&w, &b) in dw.iter().zip(db) {
        s = euler_step(s, w, b, grid.dt(), p);
        xhat.push(s.x);
        vhat.push(s.v);
    }
    Ok(SchemeTrajectory { grid: *grid, xhat, vhat, scheme: SchemeKind::EulerFullTruncation })
}

/// Drift-implicit Euler step for `U = sqrt(V)`:
///
/// ```text
/// u' = u + (c / u' - kappa/2 u') dt + sigma/2 dW,   c = kappa theta / 2 - sigma^2 / 8
/// ```
///
/// solved by its unique positive root. Construction fails unless nu > 1/2.
#[derive(Debug, Clone, Copy)]
pub struct DriftImplicitSqrt {
    lamperti: f64,
    half_kappa: f64,
    half_sigma: f64,
}

impl DriftImplicitSqrt {
    pub fn new(p: &HestonParams) -> Result<Self> {
        p.require_decomposable("the drift-implicit square-root scheme")?;
        Ok(DriftImplicitSqrt {
            lamperti: p.lamperti_constant(),
            half_kappa: 0.5 * p.kappa(),
            half_sigma: 0.5 * p.sigma(),
        })
    }

    #[inline]
    pub fn step(&self, u: f64, dw: f64, dt: f64) -> f64 {
        if dt == 0.0 {
            return u;
        }
        let denom = 1.0 + self.half_kappa * dt;
        let a = (u + self.half_sigma * dw) / (2.0 * denom);
        let q = self.lamperti * dt / denom;
        let root = (a * a + q).sqrt();
        // same root; the conjugate form avoids cancellation for a < 0
        if a >= 0.0 {
            a + root
        } else {
            q / (root - a)
        }
    }

    /// Residual of the implicit equation, for checking roots.
    pub fn residual(&self, u: f64, dw: f64, dt: f64, u_next: f64) -> f64 {
        u_next - u - (self.lamperti / u_next - self.half_kappa * u_next) * dt - self.half_sigma * dw
    }
}

pub fn drift_implicit_sqrt_step(u: f64, dw: f64, dt: f64, p: &HestonParams) -> Result<f64> {
    Ok(DriftImplicitSqrt::new(p)?.step(u, dw, dt))
}

#[inline]
fn log_euler_step(x: f64, v: f64, dw: f64, db: f64, dt: f64, p: &HestonParams) -> f64 {
    x + (p.mu() - 0.5 * v) * dt + v.sqrt() * (p.rho() * dw + p.rho_perp() * db)
}

/// Fine-grid strong reference. For nu > 1/2 `V` follows [`DriftImplicitSqrt`]
/// and `X` a left-point log-Euler step in `v_k = u_k^2 > 0`; otherwise the
/// full-truncation Euler scheme is used and the trajectory is tagged as such.
pub fn run_reference(p: &HestonParams, grid: &TimeGrid, dw: &[f64], db: &[f64]) -> Result<SchemeTrajectory> {
    check_lengths(grid, dw, db)?;
    let Ok(di) = DriftImplicitSqrt::new(p) else {
        return run_euler(p, grid, dw, db);
    };
    let dt = grid.dt();
    let n = grid.steps();
    let mut xhat = Vec::with_capacity(n + 1);
    let mut vhat = Vec::with_capacity(n + 1);
    let (mut x, mut u) = (p.x0(), p.v0().sqrt());
    xhat.push(x);
    vhat.push(p.v0());
    for (&w, &b) in dw.iter().zip(db) {
        x = log_euler_step(x, u * u, w, b, dt, p);
        u = di.step(u, w, dt);
        xhat.push(x);
        vhat.push(u * u);
    }
    Ok(SchemeTrajectory { grid: *grid, xhat, vhat, scheme: SchemeKind::DriftImplicitSqrt })
}

/// Terminal state of [`run_reference`] without storing the path.
pub fn reference_terminal(p: &HestonParams, dt: f64, dw: &[f64], db: &[f64]) -> (State, SchemeKind) {
    let Ok(di) = DriftImplicitSqrt::new(p) else {
        return (euler_terminal(p, dt, dw, db), SchemeKind::EulerFullTruncation);
    };
    let (mut x, mut u) = (p.x0(), p.v0().sqrt());
    for (&w, &b) in dw.iter().zip(db) {
        x = log_euler_step(x, u * u, w, b, dt, p);
        u = di.step(u, w, dt);
    }
    (State { x, v: u * u }, SchemeKind::DriftImplicitSqrt)
}

/// Exact draw of `V_{t+dt}` given `V_t = v`: a Poisson(lambda/2) mixture of
/// chi-square laws with `d + 2K` degrees of freedom, scaled by
/// `c = sigma^2 (1 - e^{-kappa dt}) / (4 kappa)`, where `d = 4 kappa theta / sigma^2`
/// and `lambda = v e^{-kappa dt} / c`.
pub fn cir_exact_transition<R: Rng + ?Sized>(v: f64, dt: f64, p: &HestonParams, rng: &mut R) -> f64 {
    debug_assert!(v >= 0.0 && dt >= 0.0);
    if dt == 0.0 {
        return v;
    }
    let decay = (-p.kappa() * dt).exp();
    let scale = p.sigma() * p.sigma() * (-(-p.kappa() * dt).exp_m1()) / (4.0 * p.kappa());
    let dof = 2.0 * p.feller_index();
    let noncentrality = v * decay / scale;
    let k = if noncentrality > 0.0 {
        Poisson::new(0.5 * noncentrality).expect("positive finite rate").sample(rng)
    } else {
        0.0
    };
    let chi2 = Gamma::new(0.5 * dof + k, 2.0).expect("positive shape").sample(rng);
    scale * chi2
}

/// Law of `V_T` under the exact sampler and under the fine reference.
#[derive(Debug, Clone, PartialEq)]
pub struct CirLawReport {
    pub paths: usize,
    pub steps_fine: usize,
    pub closed_mean: f64,
    pub closed_variance: f64,
    pub exact_mean: (f64, f64),
    pub exact_variance: (f64, f64),
    pub reference_mean: (f64, f64),
    pub reference_variance: (f64, f64),
    /// Two-sample KS distance between the exact and reference samples of `V_T`.
    pub ks: f64,
}

/// Draws `V_T` by one exact transition (auxiliary channel) and by the reference
/// scheme on `steps_fine` steps (`W` channel) for `paths` paths.
pub fn cir_law_check(p: &HestonParams, steps_fine: usize, paths: usize, seed: u64) -> Result<CirLawReport> {
    if paths < 2 {
        return Err(LabError::TooFew { what: "paths", required: 2, actual: paths });
    }
    let grid = TimeGrid::new(p.horizon(), steps_fine)?;
    let zero_b = vec![0.0; steps_fine];
    let draws: Vec<(f64, f64)> = (0..paths as u64)
        .into_par_iter()
        .map(|id| {
            let exact = cir_exact_transition(p.v0(), p.horizon(), p, &mut PathRng::new(seed, id, Channel::Aux));
            let dw = brownian_increments(&grid, seed, id, Channel::W);
            // V does not depend on B
            let (state, _) = reference_terminal(p, grid.dt(), &dw, &zero_b);
            (exact, state.v)
        })
        .collect();
    let (exact, reference): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();
    let moments = p.cir_marginal_moments(p.horizon());
    Ok(CirLawReport {
        paths,
        steps_fine,
        closed_mean: moments.mean,
        closed_variance: moments.variance,
        exact_mean: stats::mean_se(&exact),
        exact_variance: stats::variance_se(&exact),
        reference_mean: stats::mean_se(&reference),
        reference_variance: stats::variance_se(&reference),
        ks: stats::ks_two_sample(&exact, &reference),
    })
}
