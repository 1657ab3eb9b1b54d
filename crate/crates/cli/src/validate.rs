//! Invariant suite behind `icent validate`.

use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt::Write as _;
use std::path::Path;

use icent_core::estimation::estimate_concurrence;
use icent_core::interferometer::{
    fringe_model, theta_sweep, AlphaChannel, Analyzer, AnalyzerLabel, HwpConvention, InterferometerConfig,
};
use icent_core::qstate::{
    family_concurrence, fixtures as reference, make_family_state, make_psi_family_state, wootters_concurrence,
    StateFamilyParams,
};
use icent_core::tomography::{linear_inversion_table, probability_table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Result};
use crate::fixtures::{self, FixtureFile};

pub const DRAWS: usize = 200;

/// Frozen Wootters concurrences of the projected fixtures.
pub const FIXTURE_CONCURRENCE: [f64; 5] = [0.0, 0.008461860892, 0.286770715432, 0.301170586688, 0.791651940504];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    fn tolerance(name: &str, err: f64, tol: f64) -> Self {
        Self::new(name, err <= tol, format!("max error {err:.2e} (tol {tol:.0e})"))
    }
}

/// Random state parameters and α-arm losses in `[0.3, 1]`.
pub fn draws(seed: u64, n: usize) -> Vec<(StateFamilyParams, AlphaChannel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let p = StateFamilyParams::new(rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0), rng.random_range(-PI..PI))
                .expect("drawn in range");
            let ch = AlphaChannel::new(rng.random_range(0.3..=1.0), rng.random_range(0.3..=1.0)).expect("drawn in range");
            (p, ch)
        })
        .collect()
}

fn visibility(p: &StateFamilyParams, theta: f64, ch: AlphaChannel, conv: HwpConvention, a: AnalyzerLabel) -> Result<f64> {
    let config = InterferometerConfig::new(theta, ch, conv);
    Ok(fringe_model(p, &config, &Analyzer::named(a))?.visibility)
}

/// The estimator applied to the model's own visibilities.
pub fn analytic_estimate(p: &StateFamilyParams, ch: AlphaChannel, conv: HwpConvention) -> Result<f64> {
    let v = |theta, a| visibility(p, theta, ch, conv, a);
    Ok(estimate_concurrence(
        v(FRAC_PI_4, AnalyzerLabel::D)?,
        v(FRAC_PI_4, AnalyzerLabel::R)?,
        v(0.0, AnalyzerLabel::H)?,
        v(0.0, AnalyzerLabel::V)?,
    )?
    .raw)
}

fn fixture_checks(path: Option<&Path>) -> Vec<Check> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p, e)),
        None if Path::new(fixtures::DEFAULT_PATH).exists() => {
            let p = Path::new(fixtures::DEFAULT_PATH);
            std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))
        }
        None => Ok(fixtures::EMBEDDED.to_string()),
    };
    let file: Result<FixtureFile> = text.and_then(|t| {
        serde_json::from_str(&t).map_err(|source| CliError::Json { path: path.unwrap_or(Path::new(fixtures::DEFAULT_PATH)).into(), source })
    });
    let file = match file {
        Ok(f) if f.basis == fixtures::BASIS => f,
        Ok(f) => return vec![Check::new("fixture file", false, format!("basis {:?}", f.basis))],
        Err(e) => return vec![Check::new("fixture file", false, e.to_string())],
    };
    let mut out = Vec::new();
    for (k, name) in reference::NAMES.iter().enumerate() {
        let check_name = format!("fixture {name}");
        let Some(entry) = file.states.iter().find(|s| s.name == *name) else {
            out.push(Check::new(check_name, false, "missing"));
            continue;
        };
        let check = match entry.to_fixture() {
            Err(e) => Check::new(check_name, false, e.to_string()),
            Ok(fx) => {
                let diff = fx.printed.max_abs_diff(&reference::printed(k));
                let c = wootters_concurrence(&fx.state);
                let c_err = (c - FIXTURE_CONCURRENCE[k]).abs();
                if diff > 1e-12 {
                    Check::new(check_name, false, format!("differs from the reference matrix by {diff:.3e}"))
                } else if c_err > 1e-9 {
                    Check::new(check_name, false, format!("concurrence {c:.12} expected {:.12}", FIXTURE_CONCURRENCE[k]))
                } else {
                    Check::new(check_name, true, format!("physical, C = {c:.6}"))
                }
            }
        };
        out.push(check);
    }
    out
}

pub fn run_checks(seed: u64, fixtures_path: Option<&Path>) -> Result<Vec<Check>> {
    let mut checks = fixture_checks(fixtures_path);
    let samples = draws(seed, DRAWS);

    for (name, make) in [
        ("oracle equivalence, phi family", make_family_state as fn(&StateFamilyParams) -> _),
        ("oracle equivalence, psi family", make_psi_family_state),
    ] {
        let err = samples
            .iter()
            .map(|(p, _)| (wootters_concurrence(&make(p)) - family_concurrence(p)).abs())
            .fold(0.0, f64::max);
        checks.push(Check::tolerance(name, err, 1e-10));
    }

    let mut by_convention = Vec::new();
    for (name, conv) in [
        ("estimator identity, reflection", HwpConvention::Reflection),
        ("estimator identity, rotator", HwpConvention::Rotator),
    ] {
        let est = samples.iter().map(|(p, ch)| analytic_estimate(p, *ch, conv)).collect::<Result<Vec<_>>>()?;
        let err = samples.iter().zip(&est).map(|((p, _), c)| (c - family_concurrence(p)).abs()).fold(0.0, f64::max);
        checks.push(Check::tolerance(name, err, 1e-10));
        by_convention.push(est);
    }
    let err = by_convention[0].iter().zip(&by_convention[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push(Check::tolerance("convention independence", err, 1e-12));

    let mut worst: f64 = 0.0;
    for (p, ch) in &samples {
        for conv in [HwpConvention::Reflection, HwpConvention::Rotator] {
            for a in [AnalyzerLabel::H, AnalyzerLabel::V] {
                worst = worst.max(visibility(p, FRAC_PI_4, *ch, conv, a)?);
            }
            for q in [p.with_coherence(0.0)?, StateFamilyParams::new(0.0, p.coherence(), p.phase())?, StateFamilyParams::new(1.0, p.coherence(), p.phase())?] {
                for a in [AnalyzerLabel::D, AnalyzerLabel::A, AnalyzerLabel::R, AnalyzerLabel::L] {
                    worst = worst.max(visibility(&q, FRAC_PI_4, *ch, conv, a)?);
                }
            }
        }
    }
    checks.push(Check::new("null visibilities", worst == 0.0, format!("max visibility {worst:e}")));

    let err = reference::all()
        .iter()
        .map(|f| linear_inversion_table(&probability_table(f)).map(|r| r.matrix().max_abs_diff(f.matrix())))
        .collect::<std::result::Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    checks.push(Check::tolerance("noiseless tomography identity", err, 1e-10));

    let thetas: Vec<f64> = (0..50).map(|k| PI / 2.0 * k as f64 / 49.0).collect();
    let mut err: f64 = 0.0;
    for (p, ch) in samples.iter().take(20) {
        let sweep = theta_sweep(p, *ch, HwpConvention::Reflection, &Analyzer::named(AnalyzerLabel::H), &thetas)?;
        for s in &sweep {
            err = err.max((s.visibility / sweep[0].visibility - s.rotation.cos().abs()).abs());
        }
    }
    checks.push(Check::tolerance("theta sweep |cos 2θ|", err, 1e-10));
    Ok(checks)
}

pub fn format_table(checks: &[Check], seed: u64) -> String {
    let width = checks.iter().map(|c| c.name.chars().count()).max().unwrap_or(0);
    let mut s = format!("seed: {seed}\n");
    for c in checks {
        let pad = width - c.name.chars().count();
        let _ = writeln!(s, "{}  {}{}  {}", if c.passed { "PASS" } else { "FAIL" }, c.name, " ".repeat(pad), c.detail);
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    let _ = writeln!(s, "{passed}/{} checks passed", checks.len());
    s
}
