//! Analytic model of the two-source induced-coherence interferometer.
//!
//! Photon α from the first source passes a loss channel and a half-wave
//! plate before being aligned with the α mode of the second source. The
//! detected β photons from both sources meet at a beamsplitter, pass an
//! analyzer and are counted. The detection rate is
//! `R(δ) = (P_p + Re(e^{iδ} A_p)) / 2` with the phase-averaged level `P_p` and
//! the cross amplitude `A_p` computed below.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};
use core::fmt;
use core::str::FromStr;

// Float supplies the libm-backed methods when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{Ket, Mat2, C64, ZERO};
use crate::qstate::{StateFamilyParams, ALGEBRAIC_TOL};

/// Physical fast-axis angle of the half-wave plate, reduced to `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WavePlateSetting {
    theta: f64,
}

impl WavePlateSetting {
    pub fn new(theta: f64) -> Self {
        let mut t = theta.rem_euclid(PI);
        if t >= PI {
            t = 0.0;
        }
        Self { theta: t }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Setting used for the H/V calibration scans.
    pub fn calibration() -> Self {
        Self::new(0.0)
    }

    /// Setting that swaps H and V on the α photon.
    pub fn swap() -> Self {
        Self::new(PI / 4.0)
    }
}

/// Jones-matrix convention for the half-wave plate.
///
/// `Reflection` is the physical plate (`det = -1`); `Rotator` is the
/// `H → V, V → -H` map (`det = +1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum HwpConvention {
    #[default]
    Reflection,
    Rotator,
}

impl FromStr for HwpConvention {
    type Err = ();
    fn from_str(s: &str) -> core::result::Result<Self, ()> {
        match s {
            "reflection" => Ok(Self::Reflection),
            "rotator" => Ok(Self::Rotator),
            _ => Err(()),
        }
    }
}

/// Amplitude transmissions of the α path for H and V.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlphaChannel {
    t_h: f64,
    t_v: f64,
}

impl AlphaChannel {
    pub fn new(t_h: f64, t_v: f64) -> Result<Self> {
        for (name, value) in [("t_h", t_h), ("t_v", t_v)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ParameterOutOfRange { name, value });
            }
        }
        Ok(Self { t_h, t_v })
    }

    pub fn ideal() -> Self {
        Self { t_h: 1.0, t_v: 1.0 }
    }

    pub fn t_h(&self) -> f64 {
        self.t_h
    }

    pub fn t_v(&self) -> f64 {
        self.t_v
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::diag_real([self.t_h, self.t_v])
    }
}

impl Default for AlphaChannel {
    fn default() -> Self {
        Self::ideal()
    }
}

/// Named analyzer projections on the detected photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AnalyzerLabel {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl AnalyzerLabel {
    pub const ALL: [AnalyzerLabel; 6] = [Self::H, Self::V, Self::D, Self::A, Self::R, Self::L];

    /// `D = (H+V)/√2`, `A = (H-V)/√2`, `R = (H-iV)/√2`, `L = (H+iV)/√2`.
    pub fn ket(self) -> Ket<2> {
        let s = FRAC_1_SQRT_2;
        let r = |x: f64| C64::new(x, 0.0);
        match self {
            Self::H => [r(1.0), ZERO],
            Self::V => [ZERO, r(1.0)],
            Self::D => [r(s), r(s)],
            Self::A => [r(s), r(-s)],
            Self::R => [r(s), C64::new(0.0, -s)],
            Self::L => [r(s), C64::new(0.0, s)],
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Self::H => 'H',
            Self::V => 'V',
            Self::D => 'D',
            Self::A => 'A',
            Self::R => 'R',
            Self::L => 'L',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.as_char() == c)
    }

    /// The orthogonal partner in the same basis.
    pub fn partner(self) -> Self {
        match self {
            Self::H => Self::V,
            Self::V => Self::H,
            Self::D => Self::A,
            Self::A => Self::D,
            Self::R => Self::L,
            Self::L => Self::R,
        }
    }
}

impl fmt::Display for AnalyzerLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for AnalyzerLabel {
    type Err = ();
    fn from_str(s: &str) -> core::result::Result<Self, ()> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Self::from_char(c.to_ascii_uppercase()).ok_or(()),
            _ => Err(()),
        }
    }
}

/// Projection `|p><p|` applied to the detected photon.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Analyzer {
    ket: Ket<2>,
    label: Option<AnalyzerLabel>,
}

impl Analyzer {
    pub fn named(label: AnalyzerLabel) -> Self {
        Self { ket: label.ket(), label: Some(label) }
    }

    pub fn from_ket(ket: Ket<2>) -> Result<Self> {
        let norm = (ket[0].norm_sqr() + ket[1].norm_sqr()).sqrt();
        if (norm - 1.0).abs() > ALGEBRAIC_TOL {
            return Err(Error::UnnormalizedAnalyzer(norm));
        }
        Ok(Self { ket, label: None })
    }

    pub fn ket(&self) -> &Ket<2> {
        &self.ket
    }

    pub fn label(&self) -> Option<AnalyzerLabel> {
        self.label
    }
}

impl From<AnalyzerLabel> for Analyzer {
    fn from(label: AnalyzerLabel) -> Self {
        Self::named(label)
    }
}

/// Gaussian-spectrum overlap model for a birefringent delay between the H
/// and V emissions.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DelayDecoherence {
    /// Relative H/V delay in seconds.
    pub delay: f64,
    /// Coherence time of the detected photons in seconds.
    pub coherence_time: f64,
}

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

impl DelayDecoherence {
    /// Detection filter: 3 nm bandpass centered at 849 nm.
    pub const FILTER_CENTER: f64 = 849e-9;
    pub const FILTER_BANDWIDTH: f64 = 3e-9;

    /// `λ² / (c Δλ)` for the detection filter.
    pub fn filter_coherence_time() -> f64 {
        Self::FILTER_CENTER * Self::FILTER_CENTER / (SPEED_OF_LIGHT * Self::FILTER_BANDWIDTH)
    }

    pub fn new(delay: f64) -> Self {
        Self { delay, coherence_time: Self::filter_coherence_time() }
    }

    pub fn factor(&self) -> Result<f64> {
        coherence_from_delay(self.delay, self.coherence_time)
    }
}

/// `exp(-τ² / (2 τ_c²))`
pub fn coherence_from_delay(delay: f64, coherence_time: f64) -> Result<f64> {
    if !(coherence_time > 0.0) || !coherence_time.is_finite() {
        return Err(Error::NonPositiveCoherenceTime(coherence_time));
    }
    if !(delay >= 0.0) {
        return Err(Error::ParameterOutOfRange { name: "delay", value: delay });
    }
    let x = delay / coherence_time;
    Ok((-0.5 * x * x).exp())
}

/// Everything on the α arm between the two sources.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InterferometerConfig {
    pub hwp: WavePlateSetting,
    pub channel: AlphaChannel,
    #[cfg_attr(feature = "serde", serde(default))]
    pub hwp_convention: HwpConvention,
    /// Extra birefringent delay; scales the state's coherence when present.
    #[cfg_attr(feature = "serde", serde(default))]
    pub decoherence: Option<DelayDecoherence>,
}

impl Default for WavePlateSetting {
    fn default() -> Self {
        Self::calibration()
    }
}

impl InterferometerConfig {
    pub fn new(theta: f64, channel: AlphaChannel, hwp_convention: HwpConvention) -> Self {
        Self { hwp: WavePlateSetting::new(theta), channel, hwp_convention, decoherence: None }
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self { hwp: WavePlateSetting::new(theta), ..*self }
    }

    /// State parameters after the optional delay decoherence.
    pub fn effective_params(&self, params: &StateFamilyParams) -> Result<StateFamilyParams> {
        match self.decoherence {
            Some(d) => params.with_coherence(params.coherence() * d.factor()?),
            None => Ok(*params),
        }
    }
}

/// Fringe law for one analyzer setting.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FringeModel {
    pub mean_level: f64,
    pub cross_amplitude: C64,
    pub visibility: f64,
}

impl FringeModel {
    pub fn new(mean_level: f64, cross_amplitude: C64) -> Self {
        let visibility = if mean_level > 0.0 { cross_amplitude.norm() / mean_level } else { 0.0 };
        Self { mean_level, cross_amplitude, visibility }
    }

    /// Phase of the fringe maximum offset, `arg A_p`.
    pub fn fringe_phase(&self) -> f64 {
        self.cross_amplitude.arg()
    }
}

/// `(sin 2θ, cos 2θ)`, exact at multiples of π/4 so that the predicted
/// nulls are exactly zero rather than rounding residue.
fn double_angle_sin_cos(theta: f64) -> (f64, f64) {
    let x = 2.0 * theta;
    let quarter = x / (PI / 2.0);
    let k = quarter.round();
    if (quarter - k).abs() < 4.0 * f64::EPSILON * quarter.abs().max(1.0) {
        match (k as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        x.sin_cos()
    }
}

pub fn hwp_jones(setting: WavePlateSetting, convention: HwpConvention) -> Mat2 {
    let (s, c) = double_angle_sin_cos(setting.theta());
    let r = |x: f64| C64::new(x, 0.0);
    match convention {
        HwpConvention::Reflection => Mat2::from_rows([[r(c), r(s)], [r(s), r(-c)]]),
        HwpConvention::Rotator => Mat2::from_rows([[r(c), r(-s)], [r(s), r(c)]]),
    }
}

/// `M = J_hwp · diag(t_h, t_v)`: loss first, then the wave plate.
pub fn alpha_transfer(config: &InterferometerConfig) -> Mat2 {
    hwp_jones(config.hwp, config.hwp_convention) * config.channel.matrix()
}

fn amplitudes(params: &StateFamilyParams) -> [C64; 2] {
    [
        C64::new(params.i_h().sqrt(), 0.0),
        C64::from_polar(params.i_v().sqrt(), params.phase()),
    ]
}

/// Cross amplitude for an arbitrary α-arm transfer matrix.
///
/// `A_p = Σ_{s,s'} c_s c*_{s'} <s'|p><p|s> <s'|M|s> g(s,s')` with
/// `c_H = √I_H`, `c_V = e^{iφ} √I_V`, `g = 1` on the diagonal and `ℐ` off it.
/// The environment-overlap picture behind `g` reproduces the mixed state
/// exactly after tracing out the environment.
pub fn cross_amplitude_for_transfer(
    params: &StateFamilyParams,
    transfer: &Mat2,
    analyzer: &Analyzer,
) -> C64 {
    let c = amplitudes(params);
    let p = analyzer.ket();
    let mut acc = ZERO;
    for s in 0..2 {
        for s2 in 0..2 {
            let g = if s == s2 { 1.0 } else { params.coherence() };
            if g == 0.0 {
                continue;
            }
            // <s'|p><p|s> = p[s'] conj(p[s])
            let proj = p[s2] * p[s].conj();
            acc += c[s] * c[s2].conj() * proj * transfer[(s2, s)] * g;
        }
    }
    acc
}

pub fn cross_amplitude(
    params: &StateFamilyParams,
    config: &InterferometerConfig,
    analyzer: &Analyzer,
) -> Result<C64> {
    let eff = config.effective_params(params)?;
    Ok(cross_amplitude_for_transfer(&eff, &alpha_transfer(config), analyzer))
}

/// `P_p = I_H |<p|H>|² + I_V |<p|V>|²`
pub fn mean_level(params: &StateFamilyParams, analyzer: &Analyzer) -> f64 {
    let p = analyzer.ket();
    params.i_h() * p[0].norm_sqr() + params.i_v() * p[1].norm_sqr()
}

pub fn fringe_model(
    params: &StateFamilyParams,
    config: &InterferometerConfig,
    analyzer: &Analyzer,
) -> Result<FringeModel> {
    Ok(FringeModel::new(mean_level(params, analyzer), cross_amplitude(params, config, analyzer)?))
}

/// `R(δ) = (P_p + Re(e^{iδ} A_p)) / 2`
pub fn singles_rate(model: &FringeModel, delta: f64) -> f64 {
    let rotated = C64::from_polar(1.0, delta) * model.cross_amplitude;
    0.5 * (model.mean_level + rotated.re)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepPoint {
    /// Physical wave-plate angle.
    pub theta: f64,
    /// Polarization rotation angle `2θ`.
    pub rotation: f64,
    pub visibility: f64,
}

pub fn theta_sweep(
    params: &StateFamilyParams,
    channel: AlphaChannel,
    convention: HwpConvention,
    analyzer: &Analyzer,
    thetas: &[f64],
) -> Result<Vec<SweepPoint>> {
    thetas
        .iter()
        .map(|&theta| {
            let config = InterferometerConfig::new(theta, channel, convention);
            let model = fringe_model(params, &config, analyzer)?;
            Ok(SweepPoint { theta, rotation: 2.0 * theta, visibility: model.visibility })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{make_family_state, reduced_beta_state};
    use proptest::prelude::*;
    use AnalyzerLabel::*;

    const Q: f64 = PI / 4.0;

    fn p(i_h: f64, c: f64, phi: f64) -> StateFamilyParams {
        StateFamilyParams::new(i_h, c, phi).unwrap()
    }

    fn cfg(theta: f64, t_h: f64, t_v: f64, conv: HwpConvention) -> InterferometerConfig {
        InterferometerConfig::new(theta, AlphaChannel::new(t_h, t_v).unwrap(), conv)
    }

    fn vis(params: &StateFamilyParams, config: &InterferometerConfig, l: AnalyzerLabel) -> f64 {
        fringe_model(params, config, &l.into()).unwrap().visibility
    }

    fn mat(rows: [[f64; 2]; 2]) -> Mat2 {
        Mat2::from_rows(rows.map(|r| r.map(|x| C64::new(x, 0.0))))
    }

    #[test]
    fn wave_plate_angle_is_reduced() {
        assert!((WavePlateSetting::new(PI + 0.1).theta() - 0.1).abs() < 1e-12);
        assert!((WavePlateSetting::new(-0.1).theta() - (PI - 0.1)).abs() < 1e-12);
        assert_eq!(WavePlateSetting::new(PI).theta(), 0.0);
    }

    #[test]
    fn hwp_examples() {
        let refl = HwpConvention::Reflection;
        let rot = HwpConvention::Rotator;
        assert!(hwp_jones(WavePlateSetting::new(0.0), refl).max_abs_diff(&mat([[1.0, 0.0], [0.0, -1.0]])) < 1e-15);
        assert!(hwp_jones(WavePlateSetting::swap(), refl).max_abs_diff(&mat([[0.0, 1.0], [1.0, 0.0]])) < 1e-15);
        assert!(hwp_jones(WavePlateSetting::swap(), rot).max_abs_diff(&mat([[0.0, -1.0], [1.0, 0.0]])) < 1e-15);
    }

    #[test]
    fn alpha_transfer_examples() {
        let refl = HwpConvention::Reflection;
        let m = alpha_transfer(&cfg(0.0, 1.0, 1.0, refl));
        assert!(m.max_abs_diff(&mat([[1.0, 0.0], [0.0, -1.0]])) < 1e-15);
        let m = alpha_transfer(&cfg(Q, 0.8, 0.6, refl));
        assert!(m.max_abs_diff(&mat([[0.0, 0.6], [0.8, 0.0]])) < 1e-15);
        let s = FRAC_1_SQRT_2;
        let m = alpha_transfer(&cfg(PI / 8.0, 1.0, 1.0, refl));
        assert!(m.max_abs_diff(&mat([[s, s], [s, -s]])) < 1e-15);
    }

    #[test]
    fn cross_amplitude_examples() {
        let refl = HwpConvention::Reflection;
        for c in [0.0, 0.3, 1.0] {
            let a = cross_amplitude(&p(0.7, c, 0.4), &cfg(0.0, 0.9, 0.5, refl), &H.into()).unwrap();
            assert!((a - C64::new(0.7 * 0.9, 0.0)).norm() < 1e-15);
        }
        let a = cross_amplitude(&p(0.5, 1.0, 0.0), &cfg(Q, 1.0, 1.0, refl), &D.into()).unwrap();
        assert!((a - C64::new(0.5, 0.0)).norm() < 1e-15);
        let a = cross_amplitude(&p(0.5, 0.0, 0.3), &cfg(Q, 0.9, 0.7, refl), &D.into()).unwrap();
        assert_eq!(a, ZERO);
    }

    #[test]
    fn cross_amplitude_closed_form_at_swap() {
        let (i_h, c, phi, t_h, t_v) = (0.3, 0.8, 0.7, 0.9, 0.4);
        let a = cross_amplitude(&p(i_h, c, phi), &cfg(Q, t_h, t_v, HwpConvention::Reflection), &D.into())
            .unwrap();
        let want = (C64::from_polar(t_h, -phi) + C64::from_polar(t_v, phi))
            * (c * (i_h * (1.0 - i_h)).sqrt() / 2.0);
        assert!((a - want).norm() < 1e-15);
    }

    #[test]
    fn mean_level_examples() {
        assert!((mean_level(&p(0.5, 0.0, 0.0), &D.into()) - 0.5).abs() < 1e-15);
        assert_eq!(mean_level(&p(1.0, 0.0, 0.0), &H.into()), 1.0);
        assert!((mean_level(&p(0.96, 0.25, 0.0), &V.into()) - 0.04).abs() < 1e-15);
    }

    #[test]
    fn mean_level_matches_reduced_state() {
        let params = p(0.37, 0.6, 1.9);
        let rb = reduced_beta_state(&make_family_state(&params));
        for l in AnalyzerLabel::ALL {
            let want = rb.expectation(&l.ket());
            assert!((mean_level(&params, &l.into()) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn visibility_examples() {
        let refl = HwpConvention::Reflection;
        for params in [p(0.5, 1.0, 0.0), p(0.2, 0.4, 1.0)] {
            assert_eq!(vis(&params, &cfg(Q, 0.7, 0.9, refl), H), 0.0);
        }
        assert!((vis(&p(0.5, 1.0, 0.0), &cfg(Q, 1.0, 1.0, refl), D) - 1.0).abs() < 1e-15);
        assert!((vis(&p(0.4, 0.5, 0.0), &cfg(0.0, 0.8, 0.6, refl), H) - 0.8).abs() < 1e-15);
        assert!((vis(&p(0.4, 0.5, 0.0), &cfg(0.0, 0.8, 0.6, refl), V) - 0.6).abs() < 1e-15);
        let zero_level = fringe_model(&p(1.0, 1.0, 0.0), &cfg(0.0, 1.0, 1.0, refl), &V.into()).unwrap();
        assert_eq!(zero_level.visibility, 0.0);
    }

    #[test]
    fn singles_rate_examples() {
        let model = fringe_model(&p(0.5, 1.0, 0.0), &cfg(Q, 1.0, 1.0, HwpConvention::Reflection), &D.into())
            .unwrap();
        let dark = PI - model.fringe_phase();
        assert!(singles_rate(&model, dark).abs() < 1e-15);
        assert!((singles_rate(&model, -model.fringe_phase()) - 0.5).abs() < 1e-15);
        let flat = FringeModel::new(0.4, ZERO);
        for d in [0.0, 1.0, 2.5] {
            assert_eq!(singles_rate(&flat, d), 0.2);
        }
    }

    #[test]
    fn theta_sweep_examples() {
        let ch = AlphaChannel::new(0.85, 0.6).unwrap();
        let out = theta_sweep(&p(0.5, 1.0, 0.0), ch, HwpConvention::Reflection, &H.into(), &[0.0, Q, PI / 8.0])
            .unwrap();
        assert!((out[0].visibility - 0.85).abs() < 1e-15);
        assert!(out[1].visibility < 1e-15);
        assert!((out[2].visibility - 0.85 * FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(out[2].rotation, PI / 4.0);
    }

    #[test]
    fn coherence_from_delay_examples() {
        assert_eq!(coherence_from_delay(0.0, 1e-12).unwrap(), 1.0);
        assert!(coherence_from_delay(6e-12, 1e-12).unwrap() < 1e-6);
        assert!((coherence_from_delay(1e-12, 1e-12).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(coherence_from_delay(1.0, 0.0), Err(Error::NonPositiveCoherenceTime(0.0)));
        assert!(coherence_from_delay(-1.0, 1.0).is_err());
        let tc = DelayDecoherence::filter_coherence_time();
        assert!(tc > 7.9e-13 && tc < 8.1e-13);
    }

    #[test]
    fn delay_decoherence_scales_coherence() {
        let mut c = cfg(Q, 1.0, 1.0, HwpConvention::Reflection);
        let base = vis(&p(0.5, 1.0, 0.0), &c, D);
        let d = DelayDecoherence { delay: 1.0, coherence_time: 1.0 };
        c.decoherence = Some(d);
        let v = vis(&p(0.5, 1.0, 0.0), &c, D);
        assert!((v - base * (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn analyzer_parsing_and_validation() {
        assert_eq!("d".parse::<AnalyzerLabel>(), Ok(D));
        assert!("X".parse::<AnalyzerLabel>().is_err());
        assert!("DA".parse::<AnalyzerLabel>().is_err());
        assert!(Analyzer::from_ket([C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).is_err());
        let a = Analyzer::from_ket(D.ket()).unwrap();
        assert_eq!(a.label(), None);
        assert!(AnalyzerLabel::ALL.iter().all(|l| l.partner().partner() == *l));
    }

    #[test]
    fn loss_ordering_leaves_visibility_magnitudes_unchanged() {
        // Loss after the plate instead of before it.
        let params = p(0.35, 0.7, 0.9);
        let ch = AlphaChannel::new(0.9, 0.45).unwrap();
        for conv in [HwpConvention::Reflection, HwpConvention::Rotator] {
            for theta in [0.0, Q] {
                let c = InterferometerConfig::new(theta, ch, conv);
                let after = ch.matrix() * hwp_jones(c.hwp, conv);
                let mut sum_b = 0.0;
                let mut sum_a = 0.0;
                for l in AnalyzerLabel::ALL {
                    let pl = mean_level(&params, &l.into());
                    let va = cross_amplitude_for_transfer(&params, &alpha_transfer(&c), &l.into()).norm() / pl;
                    let vb = cross_amplitude_for_transfer(&params, &after, &l.into()).norm() / pl;
                    sum_a += va * va;
                    sum_b += vb * vb;
                    if matches!(l, H | V | D | A) {
                        assert!((va - vb).abs() < 1e-14, "{l} {theta} {conv:?}");
                    }
                }
                assert!((sum_a - sum_b).abs() < 1e-14);
            }
        }
    }

    fn arb_case() -> impl Strategy<Value = (StateFamilyParams, AlphaChannel, f64)> {
        (0.0f64..=1.0, 0.0f64..=1.0, -7.0f64..7.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..PI).prop_map(
            |(a, b, c, th, tv, theta)| (p(a, b, c), AlphaChannel::new(th, tv).unwrap(), theta),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn visibility_is_bounded((params, ch, theta) in arb_case()) {
            for conv in [HwpConvention::Reflection, HwpConvention::Rotator] {
                let c = InterferometerConfig::new(theta, ch, conv);
                for l in AnalyzerLabel::ALL {
                    let v = vis(&params, &c, l);
                    prop_assert!((0.0..=1.0 + 1e-10).contains(&v));
                }
            }
        }

        #[test]
        fn basis_partners_share_visibility((params, ch, _t) in arb_case()) {
            // Holds at the two measurement settings, where either the diagonal
            // or the coherence part of the cross amplitude vanishes.
            for theta in [0.0, Q] {
                for conv in [HwpConvention::Reflection, HwpConvention::Rotator] {
                    let c = InterferometerConfig::new(theta, ch, conv);
                    prop_assert!((vis(&params, &c, D) - vis(&params, &c, A)).abs() < 1e-12);
                    prop_assert!((vis(&params, &c, R) - vis(&params, &c, L)).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn hv_null_at_swap((params, ch, _t) in arb_case()) {
            for conv in [HwpConvention::Reflection, HwpConvention::Rotator] {
                let c = InterferometerConfig::new(Q, ch, conv);
                prop_assert_eq!(vis(&params, &c, H), 0.0);
                prop_assert_eq!(vis(&params, &c, V), 0.0);
            }
        }

        #[test]
        fn sum_rules((params, ch, _t) in arb_case()) {
            let (th, tv) = (ch.t_h(), ch.t_v());
            let ent = params.coherence().powi(2) * params.i_h() * params.i_v();
            let mut sums = [0.0; 2];
            for (k, conv) in [HwpConvention::Reflection, HwpConvention::Rotator].into_iter().enumerate() {
                let c = InterferometerConfig::new(Q, ch, conv);
                let s = vis(&params, &c, D).powi(2) + vis(&params, &c, R).powi(2);
                if params.i_h() > 0.0 && params.i_h() < 1.0 {
                    prop_assert!((s - ent * 2.0 * (th * th + tv * tv)).abs() < 1e-12);
                }
                sums[k] = s;
            }
            prop_assert!((sums[0] - sums[1]).abs() < 1e-12);
            if params.i_h() > 0.0 && params.i_h() < 1.0 {
                let c0 = InterferometerConfig::new(0.0, ch, HwpConvention::Reflection);
                let cal = vis(&params, &c0, H).powi(2) + vis(&params, &c0, V).powi(2);
                prop_assert!((cal - (th * th + tv * tv)).abs() < 1e-12);
            }
        }

        #[test]
        fn singles_rate_is_nonnegative_sinusoid((params, ch, theta) in arb_case(), delta in -10.0f64..10.0) {
            let c = InterferometerConfig::new(theta, ch, HwpConvention::Reflection);
            for l in AnalyzerLabel::ALL {
                let m = fringe_model(&params, &c, &l.into()).unwrap();
                prop_assert!(singles_rate(&m, delta) >= -1e-12);
                let hi = singles_rate(&m, -m.fringe_phase());
                let lo = singles_rate(&m, PI - m.fringe_phase());
                if hi + lo > 1e-12 {
                    prop_assert!(((hi - lo) / (hi + lo) - m.visibility).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn alpha_transfer_is_contractive((_params, ch, theta) in arb_case()) {
            for conv in [HwpConvention::Reflection, HwpConvention::Rotator] {
                let m = alpha_transfer(&InterferometerConfig::new(theta, ch, conv));
                let top = (m.adjoint() * m).hermitian_eigen().values[1];
                prop_assert!(top.sqrt() <= 1.0 + 1e-12);
                let j = hwp_jones(WavePlateSetting::new(theta), conv);
                prop_assert!((j.adjoint() * j).max_abs_diff(&Mat2::identity()) < 1e-12);
            }
        }
    }
}
