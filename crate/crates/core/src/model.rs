//! Forward model of the boundary-controlled heat equation
//!
//! ```text
//! u_t = alpha u_xx,  0 < x < 1,   alpha u_x(0,t) = f(t),  u_x(1,t) = 0,   y(t) = u(0,t)
//! ```
//!
//! With the initial state expanded as `u0(x) = sum_n C_n cos(n pi x)` the free boundary
//! response is the Dirichlet series `sum_n C_n exp(-lambda_n t)` with
//! `lambda_n = alpha n^2 pi^2`. A unit flux switched on at `T2` adds
//! `-1/(3 alpha) - (t - T2) + sum_{n>=1} (2/lambda_n) exp(-lambda_n (t - T2))`.
//!
//! The initial state is carried as a finite map of cosine coefficients, so every
//! observation is evaluated exactly (up to rounding) rather than by a PDE solver.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative size of the next term at which the control series is cut.
pub const SERIES_REL_TOL: f64 = 1e-16;
/// Hard cap on the number of control-series terms.
pub const SERIES_MAX_TERMS: usize = 1_000_000;
/// Absolute tolerance per cosine coefficient.
pub const QUADRATURE_TOL: f64 = 1e-10;
/// Maximum number of accepted Simpson panels per coefficient.
pub const QUADRATURE_MAX_PANELS: usize = 1 << 20;

/// Eigenvalue `alpha n^2 pi^2` of the Neumann Laplacian scaled by the diffusivity.
pub fn eigenvalue(alpha: f64, n: usize) -> f64 {
    let n = n as f64;
    alpha * n * n * PI * PI
}

/// Ground-truth problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatProblem {
    pub alpha: f64,
    /// Cosine coefficients `C_n` of the initial state, keyed by mode index.
    #[serde(rename = "u0_cosine")]
    pub u0_coeffs: BTreeMap<usize, f64>,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub control_amplitude: f64,
    /// Number of modes kept in the control series. `None` sums the tail to
    /// convergence and uses the closed form at `t = T2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_modes: Option<usize>,
}

impl HeatProblem {
    pub fn new(
        alpha: f64,
        u0_coeffs: BTreeMap<usize, f64>,
        t1: f64,
        t2: f64,
        t3: f64,
        control_amplitude: f64,
    ) -> Result<Self> {
        let p = HeatProblem {
            alpha,
            u0_coeffs,
            t1,
            t2,
            t3,
            control_amplitude,
            control_modes: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_control_modes(mut self, modes: usize) -> Self {
        self.control_modes = Some(modes);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(0.0 < self.t1 && self.t1 < self.t2 && self.t2 < self.t3) {
            return Err(Error::InvalidInput(format!(
                "window times must satisfy 0 < t1 < t2 < t3, got {} {} {}",
                self.t1, self.t2, self.t3
            )));
        }
        if !self.control_amplitude.is_finite() || self.u0_coeffs.values().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        if self.control_modes == Some(0) {
            return Err(Error::InvalidInput(
                "control_modes must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// The response of the initial state alone, `sum_n C_n exp(-lambda_n t)`.
    pub fn free_response(&self, t: f64) -> f64 {
        self.u0_coeffs
            .iter()
            .map(|(&n, &c)| c * (-eigenvalue(self.alpha, n) * t).exp())
            .sum()
    }

    /// Boundary response with the step control active since `T2`.
    pub fn step_response(&self, t: f64) -> Result<f64> {
        if t < self.t2 {
            return Err(Error::BeforeControl { t, t2: self.t2 });
        }
        Ok(self.free_response(t)
            + self.control_amplitude
                * unit_step_kernel(self.alpha, t - self.t2, self.control_modes))
    }

    /// Observation under the schedule `f = 0` on `[0, T2)`, `f = A` on `[T2, T3]`, `f = 0` after.
    pub fn observe(&self, t: f64) -> f64 {
        if t < self.t2 {
            return self.free_response(t);
        }
        let mut y = self.free_response(t)
            + self.control_amplitude
                * unit_step_kernel(self.alpha, t - self.t2, self.control_modes);
        if t > self.t3 {
            y -= self.control_amplitude
                * unit_step_kernel(self.alpha, t - self.t3, self.control_modes);
        }
        y
    }

    /// Uniform samples `y(t_start + i period)`, `i = 0..count`.
    pub fn sample(&self, t_start: f64, period: f64, count: usize) -> Result<SampleTrace> {
        if !(t_start > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sampling must start after t = 0, got {t_start}"
            )));
        }
        let values = (0..count)
            .map(|i| self.observe(t_start + i as f64 * period))
            .collect();
        SampleTrace::new(t_start, period, values)
    }

    /// `count` samples on the half-open window `[ta, tb)` with period `(tb - ta) / count`.
    pub fn sample_window(&self, ta: f64, tb: f64, count: usize) -> Result<SampleTrace> {
        if count == 0 || !(tb > ta) {
            return Err(Error::InvalidInput(format!(
                "bad window [{ta}, {tb}) with {count} samples"
            )));
        }
        self.sample(ta, (tb - ta) / count as f64, count)
    }

    /// Evaluates the (finite) cosine expansion of the initial state.
    pub fn initial_state(&self, x: f64) -> f64 {
        self.u0_coeffs
            .iter()
            .map(|(&n, &c)| c * (n as f64 * PI * x).cos())
            .sum()
    }
}

/// `-1/(3 alpha) - d + sum_{n>=1} (2/lambda_n) exp(-lambda_n d)`, the boundary response to a
/// unit flux applied for a duration `d >= 0` from a zero initial state.
///
/// With `modes = Some(k)` the series stops after `k` terms, otherwise it runs until the next
/// term falls below `SERIES_REL_TOL` of the partial sum (at most `SERIES_MAX_TERMS`). The
/// converged series telescopes to exactly zero at `d = 0`.
pub fn unit_step_kernel(alpha: f64, d: f64, modes: Option<usize>) -> f64 {
    debug_assert!(d >= 0.0);
    let constant = -1.0 / (3.0 * alpha);
    match modes {
        Some(k) => {
            let tail: f64 = (1..=k)
                .map(|n| {
                    let lam = eigenvalue(alpha, n);
                    2.0 / lam * (-lam * d).exp()
                })
                .sum();
            constant - d + tail
        }
        None if d == 0.0 => 0.0,
        None => {
            let mut sum = 0.0f64;
            for n in 1..=SERIES_MAX_TERMS {
                let lam = eigenvalue(alpha, n);
                let term = 2.0 / lam * (-lam * d).exp();
                if n > 1 && term < SERIES_REL_TOL * sum.abs() {
                    break;
                }
                sum += term;
            }
            constant - d + sum
        }
    }
}

/// Cosine coefficients `C_0 = int u0`, `C_n = 2 int u0(y) cos(n pi y) dy` for `n = 0..=n_max`.
pub fn cosine_coefficients<F>(u0: F, n_max: usize) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64,
{
    (0..=n_max)
        .map(|n| {
            let w = n as f64 * PI;
            let scale = if n == 0 { 1.0 } else { 2.0 };
            let panels = 16.max(4 * (n + 1));
            adaptive_simpson(
                |y| scale * u0(y) * (w * y).cos(),
                0.0,
                1.0,
                panels,
                QUADRATURE_TOL,
                QUADRATURE_MAX_PANELS,
            )
        })
        .collect()
}

/// Adaptive Simpson with Richardson correction over `[a, b]`, starting from `initial` equal
/// panels. Fails once more than `max_panels` panels would be needed.
pub fn adaptive_simpson<F>(
    f: F,
    a: f64,
    b: f64,
    initial: usize,
    tol: f64,
    max_panels: usize,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let simpson = |fa: f64, fm: f64, fb: f64, h: f64| h / 6.0 * (fa + 4.0 * fm + fb);
    let h0 = (b - a) / initial as f64;
    // (left, right, f(left), f(mid), f(right), whole-panel estimate, tolerance)
    let mut stack = Vec::with_capacity(initial);
    for i in (0..initial).rev() {
        let l = a + i as f64 * h0;
        let r = if i + 1 == initial { b } else { l + h0 };
        let (fl, fm, fr) = (f(l), f(0.5 * (l + r)), f(r));
        stack.push((
            l,
            r,
            fl,
            fm,
            fr,
            simpson(fl, fm, fr, r - l),
            tol / initial as f64,
        ));
    }
    let mut total = 0.0;
    let mut accepted = 0usize;
    while let Some((l, r, fl, fm, fr, whole, eps)) = stack.pop() {
        let m = 0.5 * (l + r);
        let (flm, frm) = (f(0.5 * (l + m)), f(0.5 * (m + r)));
        let left = simpson(fl, flm, fm, m - l);
        let right = simpson(fm, frm, fr, r - m);
        let diff = left + right - whole;
        if diff.abs() <= 15.0 * eps || (r - l) < 1e-12 * (b - a) {
            total += left + right + diff / 15.0;
            accepted += 1;
        } else {
            if accepted + stack.len() + 2 > max_panels {
                return Err(Error::QuadratureDiverged { tol, max_panels });
            }
            stack.push((m, r, fm, frm, fr, right, 0.5 * eps));
            stack.push((l, m, fl, flm, fm, left, 0.5 * eps));
        }
    }
    Ok(total)
}

/// Uniformly sampled observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTrace {
    pub t_start: f64,
    pub period: f64,
    pub values: Vec<f64>,
}

impl SampleTrace {
    pub fn new(t_start: f64, period: f64, values: Vec<f64>) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sampling period must be positive, got {period}"
            )));
        }
        if values.is_empty() {
            return Err(Error::InvalidInput("trace has no samples".into()));
        }
        Ok(SampleTrace {
            t_start,
            period,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.period
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }
}

/// Finite Dirichlet series `sum_k a_k exp(-r_k t)` with strictly increasing rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialModel {
    terms: Vec<(f64, f64)>,
}

impl ExponentialModel {
    /// Builds the model from `(amplitude, rate)` pairs in any order.
    pub fn new(mut terms: Vec<(f64, f64)>) -> Result<Self> {
        if terms
            .iter()
            .any(|&(a, r)| !a.is_finite() || !(r >= 0.0) || !r.is_finite())
        {
            return Err(Error::InvalidInput(
                "rates must be finite and non-negative".into(),
            ));
        }
        terms.sort_by(|a, b| a.1.total_cmp(&b.1));
        if terms.windows(2).any(|w| w[0].1 == w[1].1) {
            return Err(Error::InvalidInput(
                "rates must be pairwise distinct".into(),
            ));
        }
        Ok(ExponentialModel { terms })
    }

    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|&(a, r)| a * (-r * t).exp()).sum()
    }
}
