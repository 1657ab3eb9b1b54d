//! Visibility fits, the singles-only concurrence estimator and the
//! parameter recovery built on it.

use alloc::vec::Vec;
use core::f64::consts::PI;

// Float supplies the libm-backed methods when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::counting::{
    derive_seed, expected_scan, poisson_count, sample_polarized_singles, sample_scan, stream_rng,
    FringeScan, ScanPlan, StreamDomain,
};
use crate::error::{Error, Result};
use crate::interferometer::{
    fringe_model, AlphaChannel, Analyzer, AnalyzerLabel, HwpConvention, InterferometerConfig,
    WavePlateSetting,
};
use crate::qstate::StateFamilyParams;

/// Weighted least-squares solution of `y ≈ a + b cos δ + c sin δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    pub offset: f64,
    pub cos_coef: f64,
    pub sin_coef: f64,
    /// Covariance of `(a, b, c)`.
    pub covariance: [[f64; 3]; 3],
    /// `sqrt(Σ w r²)`
    pub residual_norm: f64,
}

/// Fitted fringe.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VisibilityEstimate {
    /// Clamped to `[0, 1]`.
    pub visibility: f64,
    pub raw_visibility: f64,
    pub fringe_phase: f64,
    pub mean_counts: f64,
    pub se_visibility: f64,
    pub residual_norm: f64,
}

impl VisibilityEstimate {
    /// Stand-in for a calibration scan that recorded no photons.
    pub fn empty() -> Self {
        Self {
            visibility: 0.0,
            raw_visibility: 0.0,
            fringe_phase: 0.0,
            mean_counts: 0.0,
            se_visibility: 0.0,
            residual_norm: 0.0,
        }
    }
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let c = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    let diag = m[0][0] * m[1][1] * m[2][2];
    if !(det.abs() > 1e-12 * diag.abs()) {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = c(j, i) / det;
        }
    }
    Some(inv)
}

/// Largest arc covered by the phases modulo 2π.
fn circular_span(phases: &[f64]) -> f64 {
    let mut wrapped: Vec<f64> = phases.iter().map(|p| p.rem_euclid(2.0 * PI)).collect();
    wrapped.sort_by(f64::total_cmp);
    let mut max_gap = wrapped[0] + 2.0 * PI - wrapped[wrapped.len() - 1];
    for w in wrapped.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    2.0 * PI - max_gap
}

/// Linear least squares in `(a, b, c)`. With `variances` the fit is weighted
/// by their inverses and the covariance is `(XᵀWX)⁻¹`; without, the
/// covariance is scaled by the residual variance.
pub fn fit_sinusoid(phases: &[f64], values: &[f64], variances: Option<&[f64]>) -> Result<SinusoidFit> {
    let n = phases.len();
    if n != values.len() || variances.is_some_and(|v| v.len() != n) {
        return Err(Error::InvalidPlan("phases and values differ in length"));
    }
    if n < 4 {
        return Err(Error::InsufficientScan);
    }
    let mut normal = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for i in 0..n {
        let (s, c) = phases[i].sin_cos();
        let x = [1.0, c, s];
        let w = variances.map_or(1.0, |v| 1.0 / v[i]);
        for r in 0..3 {
            rhs[r] += w * x[r] * values[i];
            for k in 0..3 {
                normal[r][k] += w * x[r] * x[k];
            }
        }
    }
    let inv = invert3(&normal).ok_or(Error::DegenerateDesign)?;
    if circular_span(phases) <= PI {
        return Err(Error::InsufficientScan);
    }
    let mut beta = [0.0; 3];
    for r in 0..3 {
        beta[r] = (0..3).map(|k| inv[r][k] * rhs[k]).sum();
    }
    let mut rss = 0.0;
    for i in 0..n {
        let (s, c) = phases[i].sin_cos();
        let r = values[i] - (beta[0] + beta[1] * c + beta[2] * s);
        rss += variances.map_or(1.0, |v| 1.0 / v[i]) * r * r;
    }
    let scale = match variances {
        Some(_) => 1.0,
        None => rss / (n - 3).max(1) as f64,
    };
    let covariance = inv.map(|row| row.map(|x| x * scale));
    Ok(SinusoidFit { offset: beta[0], cos_coef: beta[1], sin_coef: beta[2], covariance, residual_norm: rss.sqrt() })
}

impl SinusoidFit {
    /// Visibility `sqrt(b² + c²)/a` and fringe phase `atan2(-c, b)` with the
    /// first-order standard error of the visibility.
    pub fn visibility(&self) -> Result<VisibilityEstimate> {
        let (a, b, c) = (self.offset, self.cos_coef, self.sin_coef);
        if !(a > 0.0) {
            return Err(Error::NonPositiveMean(a));
        }
        let amp = (b * b + c * c).sqrt();
        let raw = amp / a;
        let cov = &self.covariance;
        let var = if amp > 1e-12 * a {
            let g = [-amp / (a * a), b / (a * amp), c / (a * amp)];
            let mut v = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    v += g[i] * cov[i][j] * g[j];
                }
            }
            v
        } else {
            0.5 * (cov[1][1] + cov[2][2]) / (a * a)
        };
        Ok(VisibilityEstimate {
            visibility: raw.clamp(0.0, 1.0),
            raw_visibility: raw,
            fringe_phase: (-c).atan2(b),
            mean_counts: a,
            se_visibility: var.max(0.0).sqrt(),
            residual_norm: self.residual_norm,
        })
    }
}

/// Poisson-weighted fit of a count scan, variance proxy `counts + 1`.
pub fn fit_fringe(scan: &FringeScan) -> Result<VisibilityEstimate> {
    let values: Vec<f64> = scan.counts().iter().map(|&c| c as f64).collect();
    let variances: Vec<f64> = values.iter().map(|v| v + 1.0).collect();
    fit_sinusoid(scan.phases(), &values, Some(&variances))?.visibility()
}

/// Unweighted fit of noise-free rate samples.
pub fn fit_rates(phases: &[f64], rates: &[f64]) -> Result<VisibilityEstimate> {
    fit_sinusoid(phases, rates, None)?.visibility()
}

/// Like [`fit_fringe`], but a scan without a single count is reported as
/// zero visibility (used for calibration scans of a polarization that the
/// state never emits).
pub fn fit_calibration(scan: &FringeScan) -> Result<VisibilityEstimate> {
    if scan.total_counts() == 0 {
        Ok(VisibilityEstimate::empty())
    } else {
        fit_fringe(scan)
    }
}

/// Singles-only concurrence estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConcurrenceEstimate {
    /// Clamped to `[0, 1]`.
    pub value: f64,
    pub raw: f64,
    pub se: Option<f64>,
    /// `[V_D, V_R, V_H, V_V]` (D/R may be the A/L substitutes).
    pub inputs: [f64; 4],
}

fn check_visibility(v: f64) -> Result<f64> {
    if v.is_finite() && (0.0..=1.0 + 1e-9).contains(&v) {
        Ok(v)
    } else {
        Err(Error::InvalidVisibility(v))
    }
}

/// `C = sqrt(2 (V_D² + V_R²) / (V_H² + V_V²))` with `V_D, V_R` taken at
/// `θ = π/4` and the calibration `V_H, V_V` at `θ = 0`.
pub fn estimate_concurrence(v_d: f64, v_r: f64, v_h0: f64, v_v0: f64) -> Result<ConcurrenceEstimate> {
    let inputs = [
        check_visibility(v_d)?,
        check_visibility(v_r)?,
        check_visibility(v_h0)?,
        check_visibility(v_v0)?,
    ];
    let den = v_h0 * v_h0 + v_v0 * v_v0;
    if !(den > 0.0) {
        return Err(Error::MissingCalibration);
    }
    let raw = (2.0 * (v_d * v_d + v_r * v_r) / den).sqrt();
    Ok(ConcurrenceEstimate { value: raw.clamp(0.0, 1.0), raw, se: None, inputs })
}

/// [`estimate_concurrence`] with first-order error propagation from the
/// four visibility standard errors.
pub fn estimate_concurrence_with_se(values: [f64; 4], ses: [f64; 4]) -> Result<ConcurrenceEstimate> {
    let [v_d, v_r, v_h, v_v] = values;
    let mut est = estimate_concurrence(v_d, v_r, v_h, v_v)?;
    let den = v_h * v_h + v_v * v_v;
    let c = est.raw;
    let var = if c > 1e-12 {
        let g = [2.0 * v_d / (c * den), 2.0 * v_r / (c * den), -c * v_h / den, -c * v_v / den];
        g.iter().zip(ses.iter()).map(|(g, s)| (g * s) * (g * s)).sum::<f64>()
    } else {
        (ses[0] * ses[0] + ses[1] * ses[1]) / den
    };
    est.se = Some(var.sqrt());
    Ok(est)
}

/// Estimate with a binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FractionEstimate {
    pub value: f64,
    pub se: f64,
}

/// `I_H = N_H / (N_H + N_V)` from one-source singles.
pub fn recover_i_h(counts_h: u64, counts_v: u64) -> Result<FractionEstimate> {
    let n = counts_h + counts_v;
    if n == 0 {
        return Err(Error::ZeroCounts);
    }
    let value = counts_h as f64 / n as f64;
    Ok(FractionEstimate { value, se: (value * (1.0 - value) / n as f64).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoherenceEstimate {
    /// Clamped to `[0, 1]`.
    pub value: f64,
    pub raw: f64,
    pub se: Option<f64>,
}

/// Inverts `C = 2 ℐ sqrt(I_H (1 - I_H))` for `ℐ`.
pub fn recover_coherence(c_est: f64, i_h: f64) -> Result<CoherenceEstimate> {
    if !(i_h > 0.0 && i_h < 1.0) {
        return Err(Error::UndefinedCoherence(i_h));
    }
    let raw = c_est / (2.0 * (i_h * (1.0 - i_h)).sqrt());
    Ok(CoherenceEstimate { value: raw.clamp(0.0, 1.0), raw, se: None })
}

/// [`recover_coherence`] with the standard errors of `C` and `I_H`
/// propagated to first order.
pub fn recover_coherence_with_se(c_est: f64, se_c: f64, i_h: f64, se_i_h: f64) -> Result<CoherenceEstimate> {
    let mut est = recover_coherence(c_est, i_h)?;
    let q = i_h * (1.0 - i_h);
    let d_c = 1.0 / (2.0 * q.sqrt());
    let d_i = -c_est * (1.0 - 2.0 * i_h) / (4.0 * q * q.sqrt());
    est.se = Some(((d_c * se_c).powi(2) + (d_i * se_i_h).powi(2)).sqrt());
    Ok(est)
}

/// The two probe analyzers used at `θ = π/4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ProbePair {
    #[default]
    DiagonalRight,
    AntidiagonalLeft,
}

impl ProbePair {
    pub fn labels(self) -> (AnalyzerLabel, AnalyzerLabel) {
        match self {
            Self::DiagonalRight => (AnalyzerLabel::D, AnalyzerLabel::R),
            Self::AntidiagonalLeft => (AnalyzerLabel::A, AnalyzerLabel::L),
        }
    }
}

/// The four scans consumed by the estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanQuad {
    /// D (or A) at `θ = π/4`.
    pub linear: FringeScan,
    /// R (or L) at `θ = π/4`.
    pub circular: FringeScan,
    /// H at `θ = 0`.
    pub cal_h: FringeScan,
    /// V at `θ = 0`.
    pub cal_v: FringeScan,
}

impl ScanQuad {
    pub fn scans(&self) -> [&FringeScan; 4] {
        [&self.linear, &self.circular, &self.cal_h, &self.cal_v]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadFit {
    pub fits: [VisibilityEstimate; 4],
    pub concurrence: ConcurrenceEstimate,
}

/// Fits all four scans and applies the estimator with propagated errors.
pub fn fit_quad(quad: &ScanQuad) -> Result<QuadFit> {
    let fits = [
        fit_fringe(&quad.linear)?,
        fit_fringe(&quad.circular)?,
        fit_calibration(&quad.cal_h)?,
        fit_calibration(&quad.cal_v)?,
    ];
    let concurrence = estimate_concurrence_with_se(
        fits.map(|f| f.visibility),
        fits.map(|f| f.se_visibility),
    )?;
    Ok(QuadFit { fits, concurrence })
}

/// Concurrence from one Poisson-resampled copy of the four scans. Each
/// replicate uses its own stream, so replicates may run in any order.
pub fn bootstrap_replicate(quad: &ScanQuad, seed: u64, replicate: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, StreamDomain::Bootstrap, replicate);
    let mut resample = |scan: &FringeScan| {
        let counts = scan.counts().iter().map(|&c| poisson_count(c as f64, &mut rng)).collect();
        scan.with_counts(counts)
    };
    let resampled = ScanQuad {
        linear: resample(&quad.linear)?,
        circular: resample(&quad.circular)?,
        cal_h: resample(&quad.cal_h)?,
        cal_v: resample(&quad.cal_v)?,
    };
    Ok(fit_quad(&resampled)?.concurrence.value)
}

/// Point estimate from `point` and standard error from the sample standard
/// deviation of the replicate values.
pub fn summarize_bootstrap(point: &ConcurrenceEstimate, replicates: &[f64]) -> ConcurrenceEstimate {
    let n = replicates.len() as f64;
    let mean = replicates.iter().sum::<f64>() / n;
    let var = replicates.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    ConcurrenceEstimate { se: Some(var.sqrt()), ..*point }
}

pub const MIN_REPLICATES: usize = 100;

pub fn bootstrap_concurrence(quad: &ScanQuad, replicates: usize, seed: u64) -> Result<ConcurrenceEstimate> {
    if replicates < MIN_REPLICATES {
        return Err(Error::TooFewReplicates(replicates));
    }
    let point = fit_quad(quad)?.concurrence;
    let values = (0..replicates as u64)
        .map(|r| bootstrap_replicate(quad, seed, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_bootstrap(&point, &values))
}

/// Acquisition settings for the four-scan singles measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SinglesSettings {
    pub phases: usize,
    pub exposure: f64,
    /// Phase-averaged expected counts per point, per scan.
    pub mean_counts: f64,
    /// Expected total one-source singles for the I_H measurement.
    pub polarized_total: f64,
    pub probe: ProbePair,
    /// Use rounded expectations instead of Poisson draws.
    pub noiseless: bool,
}

impl Default for SinglesSettings {
    fn default() -> Self {
        Self {
            phases: 20,
            exposure: 1.0,
            mean_counts: 1e4,
            polarized_total: 1e6,
            probe: ProbePair::DiagonalRight,
            noiseless: false,
        }
    }
}

/// Scan seeds are `derive_seed(seed, k)` for k = 0..4 in the order
/// linear, circular, H, V; the polarized singles use `derive_seed(seed, 4)`.
pub fn quad_seed(seed: u64, k: u64) -> u64 {
    derive_seed(seed, k)
}

/// Analytic model plus acquisition plan for scan `k` of the quad.
pub fn quad_member(
    params: &StateFamilyParams,
    channel: AlphaChannel,
    convention: HwpConvention,
    settings: &SinglesSettings,
    seed: u64,
    k: usize,
) -> Result<(InterferometerConfig, Analyzer, ScanPlan, crate::interferometer::FringeModel)> {
    let (lin, circ) = settings.probe.labels();
    let (theta, label) = match k {
        0 => (WavePlateSetting::swap(), lin),
        1 => (WavePlateSetting::swap(), circ),
        2 => (WavePlateSetting::calibration(), AnalyzerLabel::H),
        _ => (WavePlateSetting::calibration(), AnalyzerLabel::V),
    };
    let config = InterferometerConfig { hwp: theta, channel, hwp_convention: convention, decoherence: None };
    let analyzer = Analyzer::named(label);
    let model = fringe_model(params, &config, &analyzer)?;
    let base = ScanPlan::uniform(settings.phases, settings.exposure, 1.0, quad_seed(seed, k as u64))?;
    // A polarization the state never emits keeps the unit scale and records
    // zero counts.
    let plan = base.normalized_to(&model, settings.mean_counts).unwrap_or(base);
    Ok((config, analyzer, plan, model))
}

/// Simulates the four scans.
pub fn simulate_quad(
    params: &StateFamilyParams,
    channel: AlphaChannel,
    convention: HwpConvention,
    settings: &SinglesSettings,
    seed: u64,
) -> Result<ScanQuad> {
    let mut scans = Vec::with_capacity(4);
    for k in 0..4 {
        let (config, analyzer, plan, model) = quad_member(params, channel, convention, settings, seed, k)?;
        let scan = if settings.noiseless { expected_scan(&model, &plan)? } else { sample_scan(&model, &plan)? };
        scans.push(scan.with_provenance(params, &config, &analyzer));
    }
    let cal_v = scans.pop().unwrap();
    let cal_h = scans.pop().unwrap();
    let circular = scans.pop().unwrap();
    let linear = scans.pop().unwrap();
    Ok(ScanQuad { linear, circular, cal_h, cal_v })
}

/// Output of the complete singles-only measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SinglesRun {
    pub quad: ScanQuad,
    pub fit: QuadFit,
    pub polarized_counts: (u64, u64),
    pub i_h: FractionEstimate,
    /// `None` when I_H is 0 or 1 and the coherence is undefined.
    pub coherence: Option<CoherenceEstimate>,
}

pub fn run_singles(
    params: &StateFamilyParams,
    channel: AlphaChannel,
    convention: HwpConvention,
    settings: &SinglesSettings,
    seed: u64,
) -> Result<SinglesRun> {
    let quad = simulate_quad(params, channel, convention, settings, seed)?;
    let fit = fit_quad(&quad)?;
    let plan = ScanPlan::uniform(2, 1.0, settings.polarized_total, quad_seed(seed, 4))?;
    let polarized_counts = if settings.noiseless {
        let t = settings.polarized_total;
        ((t * params.i_h()).round() as u64, (t * params.i_v()).round() as u64)
    } else {
        sample_polarized_singles(params, &plan)?
    };
    let i_h = recover_i_h(polarized_counts.0, polarized_counts.1)?;
    let c = &fit.concurrence;
    let coherence = recover_coherence_with_se(c.value, c.se.unwrap_or(0.0), i_h.value, i_h.se).ok();
    Ok(SinglesRun { quad, fit, polarized_counts, i_h, coherence })
}
