//! Scenario configuration files.

use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use icent_core::counting::ScanPlan;
use icent_core::estimation::{ProbePair, SinglesSettings};
use icent_core::interferometer::{
    AlphaChannel, Analyzer, AnalyzerLabel, DelayDecoherence, HwpConvention, InterferometerConfig,
};
use icent_core::qstate::StateFamilyParams;
use icent_core::tomography::{ComparisonBudgets, Reconstructor};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DEFAULT_SEED: u64 = 20_240_611;

fn quarter_pi() -> f64 {
    FRAC_PI_4
}
fn one() -> f64 {
    1.0
}
fn analyzer_d() -> AnalyzerLabel {
    AnalyzerLabel::D
}
fn twenty() -> usize {
    20
}
fn mean_counts() -> f64 {
    1e4
}
fn polarized_total() -> f64 {
    1e6
}
fn pairs() -> f64 {
    1e5
}
fn bootstrap() -> usize {
    200
}
fn tomo_bootstrap() -> usize {
    50
}

/// On-disk scenario. Angles are in radians, `delay` in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub label: Option<String>,
    pub i_h: f64,
    pub coherence: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default = "quarter_pi")]
    pub theta: f64,
    #[serde(default = "one")]
    pub t_h: f64,
    #[serde(default = "one")]
    pub t_v: f64,
    #[serde(default = "analyzer_d")]
    pub analyzer: AnalyzerLabel,
    #[serde(default)]
    pub hwp_convention: HwpConvention,
    #[serde(default)]
    pub delay: Option<f64>,
    #[serde(default = "twenty")]
    pub phases: usize,
    #[serde(default = "one")]
    pub exposure: f64,
    #[serde(default = "mean_counts")]
    pub mean_counts: f64,
    #[serde(default = "polarized_total")]
    pub polarized_total: f64,
    #[serde(default = "pairs")]
    pub pairs_per_setting: f64,
    #[serde(default = "bootstrap")]
    pub bootstrap_replicates: usize,
    #[serde(default = "tomo_bootstrap")]
    pub tomography_replicates: usize,
    #[serde(default)]
    pub probe: ProbePair,
    #[serde(default)]
    pub reconstructor: Reconstructor,
}

impl ScenarioConfig {
    pub fn new(i_h: f64, coherence: f64, phase: f64) -> Self {
        Self {
            label: None,
            i_h,
            coherence,
            phase,
            theta: quarter_pi(),
            t_h: 1.0,
            t_v: 1.0,
            analyzer: AnalyzerLabel::D,
            hwp_convention: HwpConvention::Reflection,
            delay: None,
            phases: twenty(),
            exposure: 1.0,
            mean_counts: mean_counts(),
            polarized_total: polarized_total(),
            pairs_per_setting: pairs(),
            bootstrap_replicates: bootstrap(),
            tomography_replicates: tomo_bootstrap(),
            probe: ProbePair::DiagonalRight,
            reconstructor: Reconstructor::Linear,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
    }
}

/// Validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    /// Source state after the optional delay decoherence.
    pub state: StateFamilyParams,
    pub interferometer: InterferometerConfig,
    pub analyzer: Analyzer,
    pub singles: SinglesSettings,
    pub pairs_per_setting: f64,
    pub bootstrap_replicates: usize,
    pub tomography_replicates: usize,
    pub reconstructor: Reconstructor,
}

impl Scenario {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let params = StateFamilyParams::new(cfg.i_h, cfg.coherence, cfg.phase)?;
        let channel = AlphaChannel::new(cfg.t_h, cfg.t_v)?;
        if !cfg.theta.is_finite() {
            return Err(CliError::BadInput(format!("theta must be finite, got {}", cfg.theta)));
        }
        let mut interferometer = InterferometerConfig::new(cfg.theta, channel, cfg.hwp_convention);
        interferometer.decoherence = cfg.delay.map(DelayDecoherence::new);
        let state = interferometer.effective_params(&params)?;
        interferometer.decoherence = None;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::BadInput(format!("{name} must be positive, got {v}")))
            }
        };
        positive("exposure", cfg.exposure)?;
        positive("mean_counts", cfg.mean_counts)?;
        positive("polarized_total", cfg.polarized_total)?;
        positive("pairs_per_setting", cfg.pairs_per_setting)?;
        if cfg.phases < 4 {
            return Err(CliError::BadInput(format!("phases must be at least 4, got {}", cfg.phases)));
        }
        Ok(Self {
            label: cfg.label.clone().unwrap_or_else(|| "scenario".into()),
            state,
            interferometer,
            analyzer: Analyzer::named(cfg.analyzer),
            singles: SinglesSettings {
                phases: cfg.phases,
                exposure: cfg.exposure,
                mean_counts: cfg.mean_counts,
                polarized_total: cfg.polarized_total,
                probe: cfg.probe,
                noiseless: false,
            },
            pairs_per_setting: cfg.pairs_per_setting,
            bootstrap_replicates: cfg.bootstrap_replicates,
            tomography_replicates: cfg.tomography_replicates,
            reconstructor: cfg.reconstructor,
        })
    }

    pub fn with_overrides(mut self, analyzer: Option<AnalyzerLabel>, theta: Option<f64>) -> Result<Self> {
        if let Some(a) = analyzer {
            self.analyzer = Analyzer::named(a);
        }
        if let Some(t) = theta {
            if !t.is_finite() {
                return Err(CliError::BadInput(format!("theta must be finite, got {t}")));
            }
            self.interferometer = self.interferometer.with_theta(t);
        }
        Ok(self)
    }

    /// Uniform plan for a single fringe, unit rate scale.
    pub fn plan(&self, seed: u64) -> Result<ScanPlan> {
        Ok(ScanPlan::uniform(self.singles.phases, self.singles.exposure, 1.0, seed)?)
    }

    pub fn comparison_budgets(&self) -> ComparisonBudgets {
        ComparisonBudgets {
            singles: self.singles,
            pairs_per_setting: self.pairs_per_setting,
            tomography_replicates: self.tomography_replicates,
            reconstructor: self.reconstructor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg: ScenarioConfig = serde_json::from_str(r#"{"i_h": 0.47, "coherence": 0.94}"#).unwrap();
        assert_eq!(cfg, ScenarioConfig::new(0.47, 0.94, 0.0));
        let s = Scenario::from_config(&cfg).unwrap();
        assert_eq!(s.analyzer.label(), Some(AnalyzerLabel::D));
        assert!((s.interferometer.hwp.theta() - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn full_config_parses() {
        let text = r#"{"i_h": 0.6, "coherence": 0.3, "phase": 0.1, "theta": 0.0,
            "t_h": 0.9, "t_v": 0.8, "analyzer": "R", "hwp_convention": "rotator"}"#;
        let s = Scenario::from_config(&serde_json::from_str(text).unwrap()).unwrap();
        assert_eq!(s.analyzer.label(), Some(AnalyzerLabel::R));
        assert_eq!(s.interferometer.hwp_convention, HwpConvention::Rotator);
        assert_eq!(s.interferometer.channel, AlphaChannel::new(0.9, 0.8).unwrap());
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(serde_json::from_str::<ScenarioConfig>(r#"{"i_h": 0.5, "coherence": 0.5, "tehta": 1}"#).is_err());
        let cfg = ScenarioConfig::new(1.5, 0.5, 0.0);
        assert!(matches!(Scenario::from_config(&cfg), Err(CliError::Core(_))));
        let cfg = ScenarioConfig { phases: 3, ..ScenarioConfig::new(0.5, 0.5, 0.0) };
        assert!(matches!(Scenario::from_config(&cfg), Err(CliError::BadInput(_))));
    }

    #[test]
    fn delay_reduces_coherence() {
        let tc = DelayDecoherence::filter_coherence_time();
        let cfg = ScenarioConfig { delay: Some(tc), ..ScenarioConfig::new(0.5, 1.0, 0.0) };
        let s = Scenario::from_config(&cfg).unwrap();
        assert!((s.state.coherence() - (-0.5f64).exp()).abs() < 1e-12);
    }
}
