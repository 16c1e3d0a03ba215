//! Matrix pencil estimation of real decaying exponentials.
//!
//! A uniformly sampled signal `y_k = sum_i R_i z_i^k + n_k` is arranged into shifted Hankel
//! matrices `Y0`, `Y1` (and the combined `Y`). The model order is the number of singular values
//! of `Y` above `epsilon * sigma_max`, the poles are the eigenvalues of the `M x M` matrix
//! `Z_E = A^{-1} U_{0,M}^T Y1 V_{0,M}` built from the rank-`M` SVD of `Y0`, and the amplitudes
//! follow from a linear least-squares fit.
//!
//! Only real poles in `(0, 1]` are kept: the signals of interest are sums of decaying real
//! exponentials, so complex pairs and growing modes are dropped with a warning.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{Error, Result};
use crate::linalg::{self, LeastSquares, Svd};
use crate::model::SampleTrace;

/// Eigenvalues with `|Im z| / |z|` above this are treated as a genuine complex pair.
pub const REALNESS_TOL: f64 = 1e-6;
/// Poles in `(1, 1 + POLE_CLAMP]` are snapped to 1.
pub const POLE_CLAMP: f64 = 1e-9;
/// Rates with `|lambda| < RATE_CLAMP / period` are snapped to 0.
pub const RATE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PencilParameter {
    /// `N/3`, or `floor(N/3) + 1` when `N` is not divisible by 3.
    #[default]
    ThirdOfN,
    Explicit(usize),
}

impl PencilParameter {
    pub fn resolve(self, n: usize) -> Result<usize> {
        match self {
            PencilParameter::ThirdOfN => {
                if n < 9 {
                    return Err(Error::TraceTooShort { len: n, min: 9 });
                }
                Ok(if n.is_multiple_of(3) {
                    n / 3
                } else {
                    n / 3 + 1
                })
            }
            PencilParameter::Explicit(l) => {
                if l == 0 || l >= n {
                    return Err(Error::InvalidInput(format!(
                        "pencil parameter L = {l} must satisfy 1 <= L < N = {n}"
                    )));
                }
                Ok(l)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PencilConfig {
    pub pencil_parameter: PencilParameter,
    /// Relative singular-value threshold used for order detection.
    pub singular_threshold: f64,
    pub max_order: Option<usize>,
}

impl Default for PencilConfig {
    fn default() -> Self {
        PencilConfig {
            pencil_parameter: PencilParameter::ThirdOfN,
            singular_threshold: 1e-10,
            max_order: None,
        }
    }
}

impl PencilConfig {
    pub fn with_threshold(mut self, eps: f64) -> Self {
        self.singular_threshold = eps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.singular_threshold > 0.0 && self.singular_threshold < 1.0) {
            return Err(Error::InvalidInput(format!(
                "singular threshold must lie in (0, 1), got {}",
                self.singular_threshold
            )));
        }
        Ok(())
    }
}

/// Hankel data matrices of a trace for pencil parameter `l`.
///
/// `y0[(r, c)] = y[L-1-c+r]`, `y1[(r, c)] = y[L-c+r]`, `y[(r, c)] = y[c+r]`.
#[derive(Debug, Clone)]
pub struct HankelSet {
    pub l: usize,
    pub y0: DMatrix<f64>,
    pub y1: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

pub fn build_hankel(trace: &SampleTrace, config: &PencilConfig) -> Result<HankelSet> {
    hankel_from_values(&trace.values, config.pencil_parameter.resolve(trace.len())?)
}

pub fn hankel_from_values(values: &[f64], l: usize) -> Result<HankelSet> {
    let n = values.len();
    if l == 0 || l >= n {
        return Err(Error::InvalidInput(format!(
            "pencil parameter L = {l} must satisfy 1 <= L < N = {n}"
        )));
    }
    let rows = n - l;
    Ok(HankelSet {
        l,
        y0: DMatrix::from_fn(rows, l, |r, c| values[l - 1 - c + r]),
        y1: DMatrix::from_fn(rows, l, |r, c| values[l - c + r]),
        y: DMatrix::from_fn(rows, l + 1, |r, c| values[c + r]),
    })
}

/// Number of singular values of `y` with `sigma_i / sigma_max >= epsilon`, optionally capped.
/// A zero matrix has order 0.
pub fn detect_order(y: &DMatrix<f64>, epsilon: f64, max_order: Option<usize>) -> Result<usize> {
    Ok(order_from_singular_values(
        &linalg::singular_values(y)?,
        epsilon,
        max_order,
    ))
}

fn order_from_singular_values(sv: &[f64], epsilon: f64, max_order: Option<usize>) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    if !(smax > 0.0) {
        return 0;
    }
    let m = sv.iter().filter(|&&s| s / smax >= epsilon).count();
    max_order.map_or(m, |cap| m.min(cap))
}

/// Poles of the rank-`M` pencil together with the quantities the error bounds consume.
#[derive(Debug, Clone)]
pub struct PoleEstimate {
    /// Accepted real poles in `(0, 1]`, descending.
    pub poles: Vec<f64>,
    /// `M`-th singular value of `Y0`.
    pub sigma_m: f64,
    pub y1_norm: f64,
    /// `||Y_{0,M} - Y0||_2 = sigma_{M+1}(Y0)`.
    pub y0_trunc_gap: f64,
    /// Unit-column eigenvector matrix of `Y_{0,M}^+ Y1` (`L x L`); `None` when `Z_E` had a
    /// complex pair.
    pub eigenvectors: Option<DMatrix<f64>>,
    pub warnings: Vec<String>,
}

pub fn estimate_poles(h: &HankelSet, m: usize) -> Result<PoleEstimate> {
    let rows = h.y0.nrows();
    if m == 0 || m > rows.min(h.l) {
        return Err(Error::InvalidInput(format!(
            "order {m} must satisfy 1 <= M <= min(N-L, L) = {}",
            rows.min(h.l)
        )));
    }
    let svd = Svd::new(&h.y0)?;
    let sigma_m = svd.singular_values[m - 1];
    if !(sigma_m > 0.0) {
        return Err(Error::RankDeficient { order: m });
    }
    let y0_trunc_gap = svd.singular_values.get(m).copied().unwrap_or(0.0);
    let u_m = svd.u.columns(0, m).into_owned();
    let v_m = svd.v_t.rows(0, m).transpose();
    let ut_y1 = u_m.transpose() * &h.y1;
    let mut z_e = &ut_y1 * &v_m;
    for i in 0..m {
        z_e.row_mut(i).scale_mut(1.0 / svd.singular_values[i]);
    }

    let mut warnings = Vec::new();
    let mut real = Vec::with_capacity(m);
    let mut complex_pairs = 0usize;
    for (re, im) in linalg::eigenvalues(&z_e)? {
        let modulus = re.hypot(im);
        if modulus > 0.0 && im.abs() / modulus > REALNESS_TOL {
            complex_pairs += 1;
        } else {
            real.push(re);
        }
    }
    if complex_pairs > 0 {
        warnings.push(format!(
            "discarded {} complex pole(s); reported order reduced",
            complex_pairs
        ));
    }
    real.sort_by(|a, b| b.total_cmp(a));

    let eigenvectors = if complex_pairs == 0 {
        Some(pencil_eigenvectors(&z_e, &real, &v_m, &ut_y1)?)
    } else {
        None
    };

    let mut poles = Vec::with_capacity(real.len());
    for z in real {
        if z > 1.0 && z <= 1.0 + POLE_CLAMP {
            poles.push(1.0);
        } else if z > 0.0 && z <= 1.0 {
            poles.push(z);
        } else {
            warnings.push(format!("rejected non-physical pole {z}"));
        }
    }

    Ok(PoleEstimate {
        poles,
        sigma_m,
        y1_norm: linalg::spectral_norm(&h.y1)?,
        y0_trunc_gap,
        eigenvectors,
        warnings,
    })
}

/// Eigenvector matrix of `Y_{0,M}^+ Y1 = V_M Z_E V_M^T`-style product: the lifted eigenvectors
/// `V_M w` of the nonzero eigenvalues, completed by an orthonormal basis of the zero eigenspace
/// `null(U_M^T Y1)`. Columns have unit 2-norm.
fn pencil_eigenvectors(
    z_e: &DMatrix<f64>,
    eigenvalues: &[f64],
    v_m: &DMatrix<f64>,
    ut_y1: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let m = z_e.nrows();
    let mut cols = Vec::with_capacity(v_m.nrows());
    for &z in eigenvalues {
        let shifted = z_e - DMatrix::<f64>::identity(m, m) * z;
        let w = linalg::null_vector(&shifted)?;
        let x = v_m * w;
        cols.push(&x / x.norm());
    }
    let row_space = Svd::new(ut_y1)?.v_t.rows(0, m).transpose();
    let null = linalg::orthonormal_complement(&row_space)?;
    cols.extend(null.column_iter().map(|c| c.into_owned()));
    Ok(DMatrix::from_columns(&cols))
}

/// Decay rates `lambda_i = -ln(z_i) / period`; rates below `RATE_CLAMP / period` snap to 0.
pub fn poles_to_rates(poles: &[f64], period: f64) -> Result<Vec<f64>> {
    if !(period > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sampling period must be positive, got {period}"
        )));
    }
    poles
        .iter()
        .map(|&z| {
            if !(z > 0.0) {
                return Err(Error::NonPhysicalPole(z));
            }
            let rate = -z.ln() / period;
            Ok(if rate.abs() < RATE_CLAMP / period {
                0.0
            } else {
                rate
            })
        })
        .collect()
}

/// Least-squares amplitudes on the trace's own clock: `y_k ~ sum_i R_i exp(-rate_i k period)`.
pub fn fit_amplitudes(trace: &SampleTrace, rates: &[f64]) -> Result<Vec<f64>> {
    if rates.is_empty() {
        return Ok(Vec::new());
    }
    if trace.len() < rates.len() {
        return Err(Error::TraceTooShort {
            len: trace.len(),
            min: rates.len(),
        });
    }
    let design = DMatrix::from_fn(trace.len(), rates.len(), |k, i| {
        (-rates[i] * k as f64 * trace.period).exp()
    });
    let rhs = nalgebra::DVector::from_column_slice(&trace.values);
    match linalg::least_squares_qr(&design, &rhs) {
        LeastSquares::Solved(x) => Ok(x.iter().copied().collect()),
        LeastSquares::Deficient(_) => {
            let (a, b) = closest_pair(rates);
            Err(Error::CollinearRates(a, b))
        }
    }
}

fn closest_pair(rates: &[f64]) -> (f64, f64) {
    let mut best = (rates[0], rates[0], f64::INFINITY);
    for i in 0..rates.len() {
        for j in i + 1..rates.len() {
            let d = (rates[i] - rates[j]).abs();
            if d < best.2 {
                best = (rates[i], rates[j], d);
            }
        }
    }
    (best.0, best.1)
}

/// Converts local-clock amplitudes to absolute time: `C_i = R_i exp(rate_i t_start)`.
pub fn amplitudes_at_absolute_time(amplitudes: &[f64], rates: &[f64], t_start: f64) -> Vec<f64> {
    amplitudes
        .iter()
        .zip(rates)
        .map(|(a, r)| a * (r * t_start).exp())
        .collect()
}

/// Full pencil analysis of one trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PencilEstimate {
    pub order: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub t_start: f64,
    pub period: f64,
    pub poles: Vec<f64>,
    pub rates: Vec<f64>,
    /// Local-clock amplitudes (at `t_start`).
    pub amplitudes: Vec<f64>,
    /// Singular values of `Y`, descending.
    #[serde(rename = "sigma")]
    pub singular_values: Vec<f64>,
    #[serde(rename = "sigma_M")]
    pub sigma_m: f64,
    #[serde(rename = "y1_norm_2")]
    pub y1_norm: f64,
    #[serde(rename = "y0_trunc_gap_2")]
    pub y0_trunc_gap: f64,
    #[serde(rename = "kappa_XM")]
    pub kappa_xm: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl PencilEstimate {
    fn empty(trace: &SampleTrace, l: usize, singular_values: Vec<f64>) -> Self {
        PencilEstimate {
            order: 0,
            n: trace.len(),
            l,
            t_start: trace.t_start,
            period: trace.period,
            poles: Vec::new(),
            rates: Vec::new(),
            amplitudes: Vec::new(),
            singular_values,
            sigma_m: 0.0,
            y1_norm: 0.0,
            y0_trunc_gap: 0.0,
            kappa_xm: None,
            warnings: Vec::new(),
        }
    }

    /// `(amplitude, rate)` pairs with amplitudes moved to absolute time.
    pub fn absolute_terms(&self) -> Vec<(f64, f64)> {
        amplitudes_at_absolute_time(&self.amplitudes, &self.rates, self.t_start)
            .into_iter()
            .zip(self.rates.iter().copied())
            .collect()
    }
}

pub fn analyze(trace: &SampleTrace, config: &PencilConfig) -> Result<PencilEstimate> {
    config.validate()?;
    let h = build_hankel(trace, config)?;
    let sv = linalg::singular_values(&h.y)?;
    let detected = order_from_singular_values(&sv, config.singular_threshold, config.max_order);
    let mut est = PencilEstimate::empty(trace, h.l, sv);
    if detected == 0 {
        return Ok(est);
    }
    let n = trace.len();
    let limit = h.l.min(n - h.l);
    let m = if detected > limit {
        est.warnings.push(format!(
            "detected order {detected} exceeds min(L, N-L) = {limit}; capped"
        ));
        limit
    } else {
        detected
    };
    if !(m <= h.l && h.l <= n - m) {
        est.warnings
            .push(format!("pencil parameter L = {} outside [M, N-M]", h.l));
    }

    let poles = estimate_poles(&h, m)?;
    est.sigma_m = poles.sigma_m;
    est.y1_norm = poles.y1_norm;
    est.y0_trunc_gap = poles.y0_trunc_gap;
    est.warnings.extend(poles.warnings);
    if let Some(x) = &poles.eigenvectors {
        match bounds::kappa(x) {
            Ok(k) => est.kappa_xm = Some(k),
            Err(e) => est.warnings.push(e.to_string()),
        }
    }
    est.rates = poles_to_rates(&poles.poles, trace.period)?;
    est.amplitudes = fit_amplitudes(trace, &est.rates)?;
    est.poles = poles.poles;
    est.order = est.poles.len();
    Ok(est)
}
