//! A-priori error certificate for the pencil poles and the recovered diffusivity.
//!
//! The free response sampled on `[T1, T2)` is treated as an exact `M`-term exponential sum
//! perturbed by the neglected tail `sum_{n >= M}`. Given priors `||u0||_L2 <= M0` and
//! `alpha >= alpha0`, the tail is bounded in closed form, which bounds the Frobenius norm of the
//! Hankel perturbations and, through a Bauer-Fike type argument, the pole error.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

const GOLDEN: f64 = 1.618_033_988_749_895;
/// Relative distance to `1/(L-1)` at which `m_theta_l` flags the branch jump.
pub const BREAKPOINT_FLAG: f64 = 0.01;
/// Ratio `pole_bound / z_tilde` above which the linearized eigenvalue bound is not trusted.
pub const LINEARIZATION_RATIO: f64 = 0.1;

/// Priors plus the pencil diagnostics a certificate is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub m0: f64,
    pub alpha0: f64,
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub t1: f64,
    pub ts: f64,
    pub sigma_m: f64,
    pub y1_norm: f64,
    pub y0_trunc_gap: f64,
    pub kappa_xm: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.m0 >= 0.0 && self.m0.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "M0 must be >= 0, got {}",
                self.m0
            )));
        }
        for (name, v) in [("alpha0", self.alpha0), ("T1", self.t1), ("Ts", self.ts)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.n <= 9 {
            return Err(Error::Hypothesis(format!(
                "N = {} but N > 9 is required",
                self.n
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidInput(
                "model order M must be at least 1".into(),
            ));
        }
        if self.l < 2 {
            return Err(Error::InvalidInput(format!(
                "L = {} but L >= 2 is required",
                self.l
            )));
        }
        if !(self.sigma_m > 0.0) {
            return Err(Error::RankDeficient { order: self.m });
        }
        if self.y1_norm < 0.0 || self.y0_trunc_gap < 0.0 || !(self.kappa_xm >= 1.0) {
            return Err(Error::InvalidInput(
                "norms must be nonnegative and kappa at least 1".into(),
            ));
        }
        Ok(())
    }

    fn tail_prefactor(&self) -> f64 {
        tail_bound(self.m0, self.alpha0, self.m, self.t1)
    }

    pub fn theta(&self) -> f64 {
        theta(self.alpha0, self.m, self.ts)
    }
}

/// Upper bound on `|sum_{n >= M} C_n exp(-alpha n^2 pi^2 t)|` for `||u0|| <= m0`, `alpha >= alpha0`.
pub fn tail_bound(m0: f64, alpha0: f64, m: usize, t: f64) -> f64 {
    let mm = m as f64;
    (2f64.sqrt() + 1.0 / (4.0 * mm * PI * PI * alpha0 * t))
        * m0
        * (-alpha0 * mm * mm * PI * PI * t).exp()
}

pub fn theta(alpha0: f64, m: usize, ts: f64) -> f64 {
    let mm = m as f64;
    2.0 * alpha0 * mm * mm * PI * PI * ts
}

/// Piecewise sum bound `M_{theta,L}`; the second value is true within `BREAKPOINT_FLAG`
/// (relative) of the discontinuity at `theta = 1/(L-1)`.
pub fn m_theta_l(theta: f64, l: usize) -> (f64, bool) {
    let lm1 = (l - 1) as f64;
    let bp = 1.0 / lm1;
    let near = ((theta - bp) / bp).abs() <= BREAKPOINT_FLAG;
    let value = if theta >= 1.0 {
        (-theta).exp()
    } else if theta > bp {
        2.0 / theta * (-1f64).exp()
    } else {
        lm1 * (-lm1 * theta).exp()
    };
    (value, near)
}

/// Frobenius-norm bounds on the tail perturbations of `Y0` and `Y1`.
pub fn frobenius_bounds(inputs: &BoundInputs) -> Result<(f64, f64)> {
    inputs.validate()?;
    let th = inputs.theta();
    let p = inputs.tail_prefactor();
    let (m_l, _) = m_theta_l(th, inputs.l);
    let (m_l1, _) = m_theta_l(th, inputs.l + 1);
    let y0 = p * (m_l + (1.0 + 1.0 / th).powi(2)).sqrt();
    let y1 = p * (m_l1 + (1.0 / th) * (1.0 + 1.0 / th) * (-th).exp()).sqrt();
    Ok((y0, y1))
}

pub fn rho(inputs: &BoundInputs) -> Result<f64> {
    let (frob_y0, _) = frobenius_bounds(inputs)?;
    Ok((inputs.y0_trunc_gap + frob_y0) / inputs.sigma_m)
}

/// Pole bounds in both the special and the general form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleBounds {
    /// Form valid for every `theta`.
    pub general: f64,
    /// Form valid when `theta > 1/(L-1)`; `None` otherwise.
    pub special: Option<f64>,
}

impl PoleBounds {
    /// The special form when its hypothesis holds, the general form otherwise.
    pub fn selected(&self) -> f64 {
        self.special.unwrap_or(self.general)
    }
}

pub fn pole_error_bound(inputs: &BoundInputs) -> Result<PoleBounds> {
    let (_, frob_y1) = frobenius_bounds(inputs)?;
    let r = rho(inputs)?;
    if r >= 1.0 {
        return Err(Error::CertificateUnavailable(r));
    }
    let scale = inputs.kappa_xm / (inputs.sigma_m * (1.0 - r));
    let general = scale * (GOLDEN * r * inputs.y1_norm + frob_y1);
    let special = (inputs.theta() > 1.0 / (inputs.l - 1) as f64)
        .then_some(scale * r * (GOLDEN * inputs.y1_norm + inputs.sigma_m));
    Ok(PoleBounds { general, special })
}

/// Bound on the decay-rate error of a pole `z_tilde`, and the corresponding bound on alpha
/// for mode index `n`.
pub fn alpha_error_bound(pole_bound: f64, z_tilde: f64, ts: f64, n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::ZeroModeIndex);
    }
    if !(z_tilde > 0.0 && ts > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need z_tilde > 0 and Ts > 0, got {z_tilde} and {ts}"
        )));
    }
    let eig = pole_bound / (ts * z_tilde);
    let nn = n as f64;
    Ok((eig, eig / (nn * nn * PI * PI)))
}

/// Spectral condition number `sigma_max / sigma_min` of an eigenvector matrix.
pub fn kappa(x: &DMatrix<f64>) -> Result<f64> {
    if !x.is_square() || x.is_empty() {
        return Err(Error::InvalidInput(format!(
            "kappa needs a nonempty square matrix, got {:?}",
            x.shape()
        )));
    }
    let sv = linalg::singular_values(x)?;
    let smax = sv[0];
    let smin = *sv.last().expect("nonempty");
    if !(smin >= 1e3 * f64::EPSILON * smax) {
        return Err(Error::Defective(if smax > 0.0 { smin / smax } else { 0.0 }));
    }
    Ok(smax / smin)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeBound {
    pub index: usize,
    pub z_tilde: f64,
    pub eigenvalue_bound: f64,
    pub alpha_bound: f64,
    /// `pole_bound <= 0.1 z_tilde`, so the linearized bound is trusted.
    pub linearized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCertificate {
    #[serde(rename = "M0")]
    pub m0: f64,
    pub alpha0: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(rename = "Ts")]
    pub ts: f64,
    pub theta: f64,
    #[serde(rename = "M_theta_L")]
    pub m_theta_l: f64,
    #[serde(rename = "Y1_norm_2")]
    pub y1_norm: f64,
    #[serde(rename = "sigma_M")]
    pub sigma_m: f64,
    #[serde(rename = "Y0M_gap_2")]
    pub y0_trunc_gap: f64,
    #[serde(rename = "kappa_XM")]
    pub kappa_xm: f64,
    pub rho: f64,
    pub pole_bound: f64,
    pub alpha_bound: f64,
    pub alpha_interval: (f64, f64),
    pub alpha_hat: f64,
    pub tail_bound_t1: f64,
    pub frob_y0: f64,
    pub frob_y1: f64,
    pub pole_bound_general: f64,
    pub pole_bound_special: Option<f64>,
    /// `theta > 1/(L-1)`, so the special pole bound is the one reported.
    pub special_branch: bool,
    pub near_breakpoint: bool,
    pub modes: Vec<ModeBound>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Assembles the certificate. `modes` are `(index, z_tilde)` pairs of the free-window poles;
/// the alpha bound is the tightest over modes with a nonzero index whose linearization holds.
pub fn certificate(
    inputs: &BoundInputs,
    alpha_hat: f64,
    modes: &[(usize, f64)],
) -> Result<ErrorCertificate> {
    inputs.validate()?;
    let th = inputs.theta();
    let (m_tl, near_breakpoint) = m_theta_l(th, inputs.l);
    let (frob_y0, frob_y1) = frobenius_bounds(inputs)?;
    let r = rho(inputs)?;
    let poles = pole_error_bound(inputs)?;
    let pole_bound = poles.selected();

    let mut warnings = Vec::new();
    if near_breakpoint {
        warnings.push(format!(
            "theta = {th} lies within 1% of the M_theta_L breakpoint 1/(L-1)"
        ));
    }
    let mut mode_bounds = Vec::new();
    for &(index, z_tilde) in modes.iter().filter(|(i, _)| *i > 0) {
        let (eig, ab) = alpha_error_bound(pole_bound, z_tilde, inputs.ts, index)?;
        let linearized = pole_bound <= LINEARIZATION_RATIO * z_tilde;
        if !linearized {
            warnings.push(format!(
                "pole bound {pole_bound:e} exceeds 0.1 z_tilde for mode {index}; linearized rate bound is unjustified"
            ));
        }
        mode_bounds.push(ModeBound {
            index,
            z_tilde,
            eigenvalue_bound: eig,
            alpha_bound: ab,
            linearized,
        });
    }
    let best = |pred: &dyn Fn(&ModeBound) -> bool| {
        mode_bounds
            .iter()
            .filter(|b| pred(b))
            .map(|b| b.alpha_bound)
            .min_by(f64::total_cmp)
    };
    let alpha_bound = best(&|b| b.linearized)
        .or_else(|| best(&|_| true))
        .ok_or(Error::ZeroModeIndex)?;

    Ok(ErrorCertificate {
        m0: inputs.m0,
        alpha0: inputs.alpha0,
        m: inputs.m,
        n: inputs.n,
        l: inputs.l,
        t1: inputs.t1,
        ts: inputs.ts,
        theta: th,
        m_theta_l: m_tl,
        y1_norm: inputs.y1_norm,
        sigma_m: inputs.sigma_m,
        y0_trunc_gap: inputs.y0_trunc_gap,
        kappa_xm: inputs.kappa_xm,
        rho: r,
        pole_bound,
        alpha_bound,
        alpha_interval: (alpha_hat - alpha_bound, alpha_hat + alpha_bound),
        alpha_hat,
        tail_bound_t1: inputs.tail_prefactor(),
        frob_y0,
        frob_y1,
        pole_bound_general: poles.general,
        pole_bound_special: poles.special,
        special_branch: poles.special.is_some(),
        near_breakpoint,
        modes: mode_bounds,
        warnings,
    })
}
