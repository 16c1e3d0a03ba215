//! The reference configuration: `alpha = 4`, `u0(x) = x - 9 cos(pi x) + 5 cos(3 pi x)`,
//! windows `[0.3, 0.8)` and `[0.8, 1.3)`, unit step flux, priors `M0 = 15`, `alpha0 = 3`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::model::HeatProblem;
use crate::pipeline::{PipelineConfig, Priors};

pub const ALPHA: f64 = 4.0;
pub const T1: f64 = 0.3;
pub const T2: f64 = 0.8;
pub const T3: f64 = 1.3;
/// Cosine modes kept for both the initial state and the control series.
pub const MODES: usize = 200;

pub fn initial_state(x: f64) -> f64 {
    x - 9.0 * (PI * x).cos() + 5.0 * (3.0 * PI * x).cos()
}

/// Closed-form cosine coefficients of [`initial_state`] for `n = 0..=n_max`.
pub fn cosine_coefficients(n_max: usize) -> BTreeMap<usize, f64> {
    (0..=n_max)
        .map(|n| {
            let c = match n {
                0 => 0.5,
                _ => {
                    let nn = n as f64;
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    2.0 * (sign - 1.0) / (nn * nn * PI * PI)
                }
            };
            let extra = match n {
                1 => -9.0,
                3 => 5.0,
                _ => 0.0,
            };
            (n, c + extra)
        })
        .collect()
}

pub fn problem() -> HeatProblem {
    HeatProblem::new(ALPHA, cosine_coefficients(MODES), T1, T2, T3, 1.0)
        .expect("reference problem is valid")
        .with_control_modes(MODES)
}

pub fn config() -> PipelineConfig {
    PipelineConfig::default()
}

pub fn priors() -> Priors {
    Priors {
        m0: 15.0,
        alpha0: 3.0,
    }
}
