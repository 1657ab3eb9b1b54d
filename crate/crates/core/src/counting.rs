//! Poisson photon counting on top of the analytic fringe model.
//!
//! Every random draw comes from a ChaCha8 stream keyed by the 64-bit seed and
//! selected by `(domain, index)`, so a scan point, a bootstrap replicate or a
//! tomography setting can be generated independently, in any order, with the
//! same result.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

// Float supplies the libm-backed methods when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::interferometer::{singles_rate, Analyzer, FringeModel, InterferometerConfig};
use crate::qstate::StateFamilyParams;

/// Recorded in scan metadata so that scans can be regenerated bit-for-bit.
pub const RNG_ALGORITHM: &str =
    "chacha8/rand_chacha-0.9/seed_from_u64;stream=domain<<48|index;poisson=rand_distr-0.5";

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum StreamDomain {
    ScanPoint = 1,
    PolarizedSingles = 2,
    Bootstrap = 3,
    Coincidence = 4,
    TomographyBootstrap = 5,
}

pub fn stream_rng(seed: u64, domain: StreamDomain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 48) ^ index);
    rng
}

/// SplitMix64 finalizer of `seed + tag`, for deriving per-scan seeds.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed.wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One Poisson draw; a non-positive mean gives zero counts.
pub fn poisson_count(mean: f64, rng: &mut ChaCha8Rng) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(d) => {
            let x: f64 = d.sample(rng);
            x as u64
        }
        // Only reachable for means beyond ~1.8e19.
        Err(_) => mean as u64,
    }
}

/// Phases, exposure and scale of one fringe acquisition.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScanPlan {
    pub phases: Vec<f64>,
    /// Seconds per point.
    pub exposure: f64,
    /// Counts per second at unit singles rate.
    pub rate_scale: f64,
    pub seed: u64,
    /// Additive background in counts per second; zero by default.
    #[cfg_attr(feature = "serde", serde(default))]
    pub background: f64,
}

impl ScanPlan {
    pub fn new(phases: Vec<f64>, exposure: f64, rate_scale: f64, seed: u64) -> Result<Self> {
        let plan = Self { phases, exposure, rate_scale, seed, background: 0.0 };
        plan.validate()?;
        Ok(plan)
    }

    /// `n` phases evenly spaced over one period, starting at zero.
    pub fn uniform(n: usize, exposure: f64, rate_scale: f64, seed: u64) -> Result<Self> {
        let phases = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
        Self::new(phases, exposure, rate_scale, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases.len() < 2 {
            return Err(Error::InvalidPlan("need at least 2 phases"));
        }
        if self.phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidPlan("non-finite phase"));
        }
        if !(self.exposure > 0.0 && self.exposure.is_finite()) {
            return Err(Error::InvalidPlan("exposure must be positive"));
        }
        if !(self.rate_scale > 0.0 && self.rate_scale.is_finite()) {
            return Err(Error::InvalidPlan("rate_scale must be positive"));
        }
        if !(self.background >= 0.0 && self.background.is_finite()) {
            return Err(Error::InvalidPlan("background must be non-negative"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Rescales `rate_scale` so the phase-averaged expectation is
    /// `mean_counts` per point for `model`.
    pub fn normalized_to(&self, model: &FringeModel, mean_counts: f64) -> Result<Self> {
        if !(mean_counts > 0.0) {
            return Err(Error::InvalidPlan("mean counts must be positive"));
        }
        if !(model.mean_level > 0.0) {
            return Err(Error::InvalidPlan("model has zero mean level"));
        }
        let plan = Self { rate_scale: mean_counts / (self.exposure * 0.5 * model.mean_level), ..self.clone() };
        plan.validate()?;
        Ok(plan)
    }

    /// Expected counts at point `index`.
    pub fn expected_counts(&self, model: &FringeModel, index: usize) -> f64 {
        let rate = singles_rate(model, self.phases[index]).max(0.0);
        self.exposure * (self.rate_scale * rate + self.background)
    }
}

/// Where a scan came from. Every field is optional so that externally
/// measured scans fit the same schema.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScanMeta {
    #[cfg_attr(feature = "serde", serde(default))]
    pub label: Option<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub params: Option<StateFamilyParams>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub config: Option<InterferometerConfig>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub analyzer: Option<Analyzer>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: Option<u64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub rate_scale: Option<f64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub background: Option<f64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub rng: Option<String>,
}

/// Counts recorded at a sequence of interferometer phases.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FringeScan {
    phases: Vec<f64>,
    counts: Vec<u64>,
    exposure: f64,
    pub meta: ScanMeta,
}

impl FringeScan {
    pub fn new(phases: Vec<f64>, counts: Vec<u64>, exposure: f64, meta: ScanMeta) -> Result<Self> {
        if phases.len() != counts.len() {
            return Err(Error::InvalidPlan("phases and counts differ in length"));
        }
        if !(exposure > 0.0) {
            return Err(Error::InvalidPlan("exposure must be positive"));
        }
        Ok(Self { phases, counts, exposure, meta })
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn exposure(&self) -> f64 {
        self.exposure
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Same phases and metadata, new counts.
    pub fn with_counts(&self, counts: Vec<u64>) -> Result<Self> {
        Self::new(self.phases.clone(), counts, self.exposure, self.meta.clone())
    }

    pub fn with_provenance(
        mut self,
        params: &StateFamilyParams,
        config: &InterferometerConfig,
        analyzer: &Analyzer,
    ) -> Self {
        self.meta.params = Some(*params);
        self.meta.config = Some(*config);
        self.meta.analyzer = Some(*analyzer);
        self
    }
}

/// Counts at a single scan point, drawn from its own stream.
pub fn sample_point(model: &FringeModel, plan: &ScanPlan, index: usize) -> u64 {
    let mut rng = stream_rng(plan.seed, StreamDomain::ScanPoint, index as u64);
    poisson_count(plan.expected_counts(model, index), &mut rng)
}

fn meta_for(plan: &ScanPlan) -> ScanMeta {
    ScanMeta {
        seed: Some(plan.seed),
        rate_scale: Some(plan.rate_scale),
        background: Some(plan.background),
        rng: Some(String::from(RNG_ALGORITHM)),
        ..ScanMeta::default()
    }
}

/// Assembles a scan from per-point counts produced by [`sample_point`],
/// possibly computed out of order.
pub fn assemble_scan(plan: &ScanPlan, counts: Vec<u64>) -> Result<FringeScan> {
    FringeScan::new(plan.phases.clone(), counts, plan.exposure, meta_for(plan))
}

pub fn sample_scan(model: &FringeModel, plan: &ScanPlan) -> Result<FringeScan> {
    plan.validate()?;
    let counts = (0..plan.phases.len()).map(|i| sample_point(model, plan, i)).collect();
    assemble_scan(plan, counts)
}

/// Scan whose counts are the rounded expectations, for noise-free checks.
pub fn expected_scan(model: &FringeModel, plan: &ScanPlan) -> Result<FringeScan> {
    plan.validate()?;
    let counts = (0..plan.phases.len())
        .map(|i| plan.expected_counts(model, i).round() as u64)
        .collect();
    assemble_scan(plan, counts)
}

/// One-source H and V singles with expected total `rate_scale * exposure`.
pub fn sample_polarized_singles(params: &StateFamilyParams, plan: &ScanPlan) -> Result<(u64, u64)> {
    plan.validate()?;
    let total = plan.rate_scale * plan.exposure;
    let mut rh = stream_rng(plan.seed, StreamDomain::PolarizedSingles, 0);
    let mut rv = stream_rng(plan.seed, StreamDomain::PolarizedSingles, 1);
    Ok((
        poisson_count(total * params.i_h(), &mut rh),
        poisson_count(total * params.i_v(), &mut rv),
    ))
}
