//! Simultaneous identification of the diffusivity and the initial state.
//!
//! 1. The control-free window `[T1, T2)` is a Dirichlet series in the Neumann eigenvalues; the
//!    pencil gives its dominant rates and coefficients.
//! 2. On `[T2, T3)` a unit step flux is applied. After removing the free modes and the linear
//!    drift, the trace is `sum_n C'_n exp(-lambda'_n i)` with `C'_0 = -1/(3 alpha)` and
//!    `C'_n lambda'_n = 2 Ts'`, both of which determine alpha without knowing the initial state.
//! 3. With alpha known, each free rate is assigned the mode index `round(sqrt(rate/(alpha pi^2)))`.
//! 4. The cosine coefficients of the initial state solve a linear system on `[T0, T2)`,
//!    regularized by truncated SVD with the rank chosen by generalized cross-validation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundInputs, ErrorCertificate};
use crate::error::{Error, Result};
use crate::linalg::{self, Svd};
use crate::model::{HeatProblem, SampleTrace};
use crate::pencil::{self, PencilConfig, PencilEstimate, PencilParameter};

/// Allowed distance between the step trace's first sample time and `T2`.
pub const WINDOW_TOL: f64 = 1e-12;
/// Per-sample rate below which the slowest controlled-window mode is taken as the constant
/// mode. The first decaying mode has `lambda' = alpha pi^2 Ts'`, many orders larger.
pub const ZERO_MODE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Samples on the free window `[T1, T2)`.
    pub n1: usize,
    /// Samples on the controlled window `[T2, T3)`.
    pub n2: usize,
    pub epsilon: f64,
    /// Start of the reconstruction window `[T0, T2)`.
    pub t0: f64,
    /// Number of cosine modes reconstructed.
    pub m_tilde: usize,
    /// Samples on the reconstruction window.
    pub n_rec: usize,
    /// Accepted relative deviation of `C'_n lambda'_n / (2 Ts')` from 1.
    pub credibility_tol: f64,
    #[serde(default)]
    pub pencil_parameter: PencilParameter,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n1: 50,
            n2: 50,
            epsilon: 1e-10,
            t0: 0.01,
            m_tilde: 20,
            n_rec: 79,
            credibility_tol: 1e-3,
            pencil_parameter: PencilParameter::ThirdOfN,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n1 < 9 || self.n2 < 9 {
            return Err(Error::InvalidInput(format!(
                "window sample counts must be at least 9, got {} and {}",
                self.n1, self.n2
            )));
        }
        if !(self.t0 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "T0 must be positive, got {}",
                self.t0
            )));
        }
        if self.m_tilde == 0 || self.n_rec == 0 {
            return Err(Error::InvalidInput(
                "m_tilde and n_rec must be at least 1".into(),
            ));
        }
        if !(self.credibility_tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "credibility tolerance must be positive, got {}",
                self.credibility_tol
            )));
        }
        self.pencil().validate()
    }

    pub fn pencil(&self) -> PencilConfig {
        PencilConfig {
            pencil_parameter: self.pencil_parameter,
            singular_threshold: self.epsilon,
            max_order: None,
        }
    }
}

/// The three observation windows consumed by [`identify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Traces {
    pub free: SampleTrace,
    pub step: SampleTrace,
    pub rec: SampleTrace,
}

/// Samples `problem` on the standard grids: `n1` points on `[T1, T2)`, `n2` on `[T2, T3)` and
/// `n_rec` on `[T0, T2)`, each with period `window / count`.
pub fn simulate_traces(problem: &HeatProblem, cfg: &PipelineConfig) -> Result<Traces> {
    problem.validate()?;
    cfg.validate()?;
    if cfg.t0 >= problem.t2 {
        return Err(Error::InvalidInput(format!(
            "T0 = {} must precede T2 = {}",
            cfg.t0, problem.t2
        )));
    }
    Ok(Traces {
        free: problem.sample_window(problem.t1, problem.t2, cfg.n1)?,
        step: problem.sample_window(problem.t2, problem.t3, cfg.n2)?,
        rec: problem.sample_window(cfg.t0, problem.t2, cfg.n_rec)?,
    })
}

/// Rates and absolute-time coefficients of the free window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreeSpectrum {
    /// `(rate, coefficient)` with rates ascending.
    pub modes: Vec<(f64, f64)>,
    pub pencil: PencilEstimate,
}

impl FreeSpectrum {
    pub fn rates(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.0).collect()
    }
}

pub fn step1_free_spectrum(free: &SampleTrace, cfg: &PipelineConfig) -> Result<FreeSpectrum> {
    let est = pencil::analyze(free, &cfg.pencil())?;
    if est.order == 0 {
        return Err(Error::NoModes);
    }
    let mut modes: Vec<(f64, f64)> = est
        .absolute_terms()
        .into_iter()
        .map(|(c, rate)| (rate, c))
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(FreeSpectrum { modes, pencil: est })
}

/// `y'_i = y(t_i) - sum C e^{-rate t_i} + Ts' i` on the controlled window.
pub fn step3_transform(
    step: &SampleTrace,
    free_modes: &[(f64, f64)],
    t2: f64,
) -> Result<SampleTrace> {
    if (step.t_start - t2).abs() > WINDOW_TOL * t2.abs().max(1.0) {
        return Err(Error::WindowMismatch {
            expected: t2,
            found: step.t_start,
        });
    }
    let values = step
        .values
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let t = step.time(i);
            let free: f64 = free_modes.iter().map(|&(r, c)| c * (-r * t).exp()).sum();
            y - free + step.period * i as f64
        })
        .collect();
    SampleTrace::new(t2, step.period, values)
}

/// One mode of the transformed controlled trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMode {
    /// Position among the detected modes, zero mode first.
    pub index: usize,
    /// Amplitude `C'` at the first sample.
    pub c_prime: f64,
    /// Per-sample rate `lambda' = rate Ts'`.
    pub lambda_prime: f64,
    /// `C' lambda' / (2 Ts')`; 1 for an exact step-response mode.
    pub product_ratio: f64,
    pub credible: bool,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Step3Alpha {
    pub modes: Vec<StepMode>,
    /// `-1/(3 C'_0)` from the zero-rate mode.
    pub constant_alpha: Option<f64>,
    /// Median of the credible estimates.
    pub alpha: f64,
    pub pencil: PencilEstimate,
}

impl Step3Alpha {
    pub fn estimates(&self) -> Vec<f64> {
        self.modes
            .iter()
            .filter_map(|m| m.alpha)
            .chain(self.constant_alpha)
            .collect()
    }
}

pub fn step3_alpha(
    step: &SampleTrace,
    free_modes: &[(f64, f64)],
    cfg: &PipelineConfig,
) -> Result<Step3Alpha> {
    let transformed = step3_transform(step, free_modes, step.t_start)?;
    let est = pencil::analyze(&transformed, &cfg.pencil())?;
    let ts = transformed.period;
    let mut order: Vec<usize> = (0..est.order).collect();
    order.sort_by(|&a, &b| est.rates[a].total_cmp(&est.rates[b]));
    let has_zero = order
        .first()
        .is_some_and(|&i| est.rates[i] * ts <= ZERO_MODE_TOL);

    let mut modes = Vec::with_capacity(order.len());
    let mut constant_alpha = None;
    for (pos, &i) in order.iter().enumerate() {
        let c_prime = est.amplitudes[i];
        let lambda_prime = est.rates[i] * ts;
        let index = if has_zero { pos } else { pos + 1 };
        if has_zero && pos == 0 {
            if c_prime < 0.0 {
                constant_alpha = Some(-1.0 / (3.0 * c_prime));
            }
            modes.push(StepMode {
                index,
                c_prime,
                lambda_prime,
                product_ratio: 0.0,
                credible: c_prime < 0.0,
                alpha: None,
            });
            continue;
        }
        let product_ratio = c_prime * lambda_prime / (2.0 * ts);
        let credible = (product_ratio - 1.0).abs() <= cfg.credibility_tol;
        let nn = index as f64;
        let alpha = credible.then(|| lambda_prime / (nn * nn * PI * PI * ts));
        modes.push(StepMode {
            index,
            c_prime,
            lambda_prime,
            product_ratio,
            credible,
            alpha,
        });
    }
    let mut out = Step3Alpha {
        modes,
        constant_alpha,
        alpha: 0.0,
        pencil: est,
    };
    out.alpha = linalg::median(&out.estimates()).ok_or(Error::AlphaUnrecoverable)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexAssignment {
    pub indices: Vec<usize>,
    /// `rate / (n^2 pi^2)` for each nonzero index.
    pub alpha_k: Vec<Option<f64>>,
    pub alpha_hat: f64,
}

/// Nearest-integer mode indices for ascending `free_rates`, and the merged alpha estimate.
pub fn step4_assign_indices(free_rates: &[f64], alpha_step3: f64) -> Result<IndexAssignment> {
    if !(alpha_step3 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "alpha estimate must be positive, got {alpha_step3}"
        )));
    }
    let mut indices: Vec<usize> = Vec::with_capacity(free_rates.len());
    for (k, &rate) in free_rates.iter().enumerate() {
        let n = (rate.max(0.0) / (alpha_step3 * PI * PI)).sqrt().round() as usize;
        if let Some(j) = indices.iter().position(|&m| m == n) {
            return Err(Error::AmbiguousIndex(free_rates[j], free_rates[k], n));
        }
        indices.push(n);
    }
    let alpha_k: Vec<Option<f64>> = indices
        .iter()
        .zip(free_rates)
        .map(|(&n, &rate)| (n != 0).then(|| rate / ((n * n) as f64 * PI * PI)))
        .collect();
    let mut pool: Vec<f64> = alpha_k.iter().flatten().copied().collect();
    pool.push(alpha_step3);
    let alpha_hat = linalg::median(&pool).expect("pool is nonempty");
    Ok(IndexAssignment {
        indices,
        alpha_k,
        alpha_hat,
    })
}

/// `C[(i, j)] = exp(-alpha j^2 pi^2 t_i)`, `j = 0..m_tilde`.
pub fn build_design_matrix(alpha: f64, times: &[f64], m_tilde: usize) -> DMatrix<f64> {
    DMatrix::from_fn(times.len(), m_tilde, |i, j| {
        (-crate::model::eigenvalue(alpha, j) * times[i]).exp()
    })
}

fn tsvd_from(svd: &Svd, b: &DVector<f64>, k: usize) -> DVector<f64> {
    let mut x = DVector::zeros(svd.v_t.ncols());
    for i in 0..k {
        let coef = svd.u.column(i).dot(b) / svd.singular_values[i];
        x += svd.v_t.row(i).transpose() * coef;
    }
    x
}

/// Rank-`k` truncated SVD solution `sum_{i<=k} (u_i . b / sigma_i) v_i`.
pub fn tsvd_solve(c: &DMatrix<f64>, b: &DVector<f64>, k: usize) -> Result<DVector<f64>> {
    if b.len() != c.nrows() {
        return Err(Error::InvalidInput(format!(
            "right-hand side has {} entries, matrix has {} rows",
            b.len(),
            c.nrows()
        )));
    }
    let svd = Svd::new(c)?;
    let rank = svd.numerical_rank(c.nrows(), c.ncols());
    if k == 0 || k > rank {
        return Err(Error::RankExceeded { k, rank });
    }
    Ok(tsvd_from(&svd, b, k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcvSelection {
    pub k: usize,
    /// `G(k)` for `k = 1..=rank`.
    pub curve: Vec<f64>,
    pub rank: usize,
}

/// Minimizes `G(k) = ||C x_k - b||^2 / (N - k)^2` over `k = 1..=rank`, ties to the smaller `k`.
pub fn gcv_select(c: &DMatrix<f64>, b: &DVector<f64>) -> Result<GcvSelection> {
    let svd = Svd::new(c)?;
    let rank = svd.numerical_rank(c.nrows(), c.ncols());
    if rank == 0 {
        return Err(Error::InvalidInput("design matrix is zero".into()));
    }
    let n = c.nrows();
    let curve: Vec<f64> = (1..=rank)
        .map(|k| {
            if k >= n {
                return f64::INFINITY;
            }
            let residual = c * tsvd_from(&svd, b, k) - b;
            residual.norm_squared() / ((n - k) as f64).powi(2)
        })
        .collect();
    let mut best = 0;
    for (i, &g) in curve.iter().enumerate() {
        if g < curve[best] {
            best = i;
        }
    }
    Ok(GcvSelection {
        k: best + 1,
        curve,
        rank,
    })
}

/// A-priori bounds used for the error certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    #[serde(rename = "M0")]
    pub m0: f64,
    pub alpha0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeMode {
    pub n: usize,
    pub lambda: f64,
    #[serde(rename = "C")]
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaCandidates {
    /// Per-mode estimates from the controlled window, `(index, alpha)`.
    pub step3_modes: Vec<(usize, f64)>,
    pub step3_constant: Option<f64>,
    pub step3: f64,
    /// Per-mode estimates from the free rates, `(index, alpha)`.
    pub free_modes: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub free_pencil: PencilEstimate,
    pub step_pencil: PencilEstimate,
    pub step_modes: Vec<StepMode>,
    pub design_rank: usize,
    pub certificate_error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentificationResult {
    pub alpha_hat: f64,
    pub alpha_candidates: AlphaCandidates,
    pub free_modes: Vec<FreeMode>,
    pub u0_cosine_hat: Vec<f64>,
    pub gcv_k: usize,
    pub gcv_curve: Vec<f64>,
    pub certificate: Option<ErrorCertificate>,
    pub diagnostics: Diagnostics,
}

impl IdentificationResult {
    /// Reconstructed initial state `sum_n A_n cos(n pi x)`.
    pub fn initial_state(&self, x: f64) -> f64 {
        self.u0_cosine_hat
            .iter()
            .enumerate()
            .map(|(n, a)| a * (n as f64 * PI * x).cos())
            .sum()
    }

    /// Inputs for [`bounds::certificate`] derived from the free-window pencil.
    pub fn bound_inputs(&self, priors: Priors) -> Result<BoundInputs> {
        bound_inputs(&self.diagnostics.free_pencil, priors)
    }

    /// `(index, pole)` of each free mode.
    pub fn indexed_poles(&self) -> Vec<(usize, f64)> {
        self.free_modes
            .iter()
            .map(|m| (m.n, (-m.lambda * self.diagnostics.free_pencil.period).exp()))
            .collect()
    }
}

/// Certificate inputs from a free-window pencil estimate and user priors.
pub fn bound_inputs(est: &PencilEstimate, priors: Priors) -> Result<BoundInputs> {
    let kappa_xm = est.kappa_xm.ok_or_else(|| {
        Error::Hypothesis(
            "pencil eigenvector matrix unavailable (complex or defective pencil)".into(),
        )
    })?;
    Ok(BoundInputs {
        m0: priors.m0,
        alpha0: priors.alpha0,
        m: est.order,
        n: est.n,
        l: est.l,
        t1: est.t_start,
        ts: est.period,
        sigma_m: est.sigma_m,
        y1_norm: est.y1_norm,
        y0_trunc_gap: est.y0_trunc_gap,
        kappa_xm,
    })
}

const STAGE_FREE: &str = "step 1 (free-window spectrum)";
const STAGE_STEP: &str = "step 3 (controlled-window alpha)";
const STAGE_INDEX: &str = "step 4 (mode indices)";
const STAGE_RECONSTRUCT: &str = "initial-state reconstruction";

/// Runs all four steps. Errors carry the stage they came from, see [`Error::root`].
/// With `priors`, a certificate is attempted; failures to certify are reported in the
/// diagnostics rather than aborting the identification.
pub fn identify(
    traces: &Traces,
    cfg: &PipelineConfig,
    priors: Option<Priors>,
) -> Result<IdentificationResult> {
    cfg.validate()?;
    let t2 = traces.step.t_start;
    let rec_end = traces.rec.time(traces.rec.len() - 1);
    if rec_end >= t2 * (1.0 + WINDOW_TOL) || traces.rec.t_start <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "reconstruction window [{}, {}] must lie in (0, T2 = {t2})",
            traces.rec.t_start, rec_end
        )));
    }

    let free = step1_free_spectrum(&traces.free, cfg).map_err(|e| e.in_stage(STAGE_FREE))?;
    let step3 = step3_alpha(&traces.step, &free.modes, cfg).map_err(|e| e.in_stage(STAGE_STEP))?;
    let assignment =
        step4_assign_indices(&free.rates(), step3.alpha).map_err(|e| e.in_stage(STAGE_INDEX))?;
    let alpha_hat = assignment.alpha_hat;

    let c = build_design_matrix(alpha_hat, &traces.rec.times(), cfg.m_tilde);
    let b = DVector::from_column_slice(&traces.rec.values);
    let gcv = gcv_select(&c, &b).map_err(|e| e.in_stage(STAGE_RECONSTRUCT))?;
    let coeffs = tsvd_solve(&c, &b, gcv.k).map_err(|e| e.in_stage(STAGE_RECONSTRUCT))?;

    let free_modes: Vec<FreeMode> = free
        .modes
        .iter()
        .zip(&assignment.indices)
        .map(|(&(lambda, coefficient), &n)| FreeMode {
            n,
            lambda,
            coefficient,
        })
        .collect();

    let mut result = IdentificationResult {
        alpha_hat,
        alpha_candidates: AlphaCandidates {
            step3_modes: step3
                .modes
                .iter()
                .filter_map(|m| m.alpha.map(|a| (m.index, a)))
                .collect(),
            step3_constant: step3.constant_alpha,
            step3: step3.alpha,
            free_modes: assignment
                .indices
                .iter()
                .zip(&assignment.alpha_k)
                .filter_map(|(&n, a)| a.map(|a| (n, a)))
                .collect(),
        },
        free_modes,
        u0_cosine_hat: coeffs.iter().copied().collect(),
        gcv_k: gcv.k,
        gcv_curve: gcv.curve,
        certificate: None,
        diagnostics: Diagnostics {
            free_pencil: free.pencil,
            step_pencil: step3.pencil,
            step_modes: step3.modes,
            design_rank: gcv.rank,
            certificate_error: None,
        },
    };

    if let Some(priors) = priors {
        let cert = result
            .bound_inputs(priors)
            .and_then(|inp| bounds::certificate(&inp, alpha_hat, &result.indexed_poles()));
        match cert {
            Ok(c) => result.certificate = Some(c),
            Err(e) => result.diagnostics.certificate_error = Some(e.to_string()),
        }
    }
    Ok(result)
}
