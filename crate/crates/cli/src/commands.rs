//! The `fringe`, `estimate` and `compare` commands.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use icent_core::counting::{derive_seed, sample_scan, FringeScan, ScanPlan, RNG_ALGORITHM};
use icent_core::estimation::{
    fit_calibration, fit_quad, recover_coherence_with_se, recover_i_h, run_singles, ProbePair, ScanQuad,
    VisibilityEstimate,
};
use icent_core::interferometer::{fringe_model, singles_rate, AnalyzerLabel, FringeModel, InterferometerConfig};
use icent_core::qstate::{family_concurrence, make_family_state, StateFamilyParams};
use icent_core::tomography::ComparisonReport;
use serde::{Deserialize, Serialize};

use crate::config::Scenario;
use crate::error::{CliError, Result};
use crate::io;
use crate::parallel;

pub const ANALYTIC_HEADER: [&str; 2] = ["phase_rad", "rate"];
pub const ANALYTIC_POINTS: usize = 201;
pub const TOOL: &str = concat!("icent ", env!("CARGO_PKG_VERSION"));

/// Seed tags of the stages run by the commands.
pub mod tags {
    pub const FRINGE: u64 = 1;
    pub const SINGLES: u64 = 2;
    pub const BOOTSTRAP: u64 = 3;
    pub const COMPARE: u64 = 4;
}

/// Analytic fringe and a seeded scan of one analyzer setting.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeRun {
    pub model: FringeModel,
    pub plan: ScanPlan,
    pub scan: FringeScan,
    pub fit: VisibilityEstimate,
}

pub fn simulate_fringe(
    state: &StateFamilyParams,
    config: &InterferometerConfig,
    scenario: &Scenario,
    seed: u64,
) -> Result<FringeRun> {
    let model = fringe_model(state, config, &scenario.analyzer)?;
    let base = scenario.plan(seed)?;
    let plan = base.normalized_to(&model, scenario.singles.mean_counts).unwrap_or(base);
    let mut scan = sample_scan(&model, &plan)?.with_provenance(state, config, &scenario.analyzer);
    scan.meta.label = Some(scenario.label.clone());
    let fit = fit_calibration(&scan)?;
    Ok(FringeRun { model, plan, scan, fit })
}

pub fn analytic_rows(model: &FringeModel) -> Vec<Vec<String>> {
    (0..ANALYTIC_POINTS)
        .map(|k| {
            let d = 2.0 * PI * k as f64 / (ANALYTIC_POINTS - 1) as f64;
            vec![d.to_string(), singles_rate(model, d).to_string()]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeReport {
    pub label: String,
    pub analyzer: String,
    pub theta: f64,
    pub seed: u64,
    pub model_visibility: f64,
    pub model_fringe_phase: f64,
    pub fit: VisibilityEstimate,
}

/// Writes `<stem>_analytic.csv`, `<stem>_scan.csv` (+ `.json`) and
/// `<stem>_fit.json` into `out`.
pub fn write_fringe(out: &Path, stem: &str, scenario: &Scenario, run: &FringeRun, config: &InterferometerConfig, seed: u64) -> Result<FringeReport> {
    io::ensure_dir(out)?;
    io::write_table(&out.join(format!("{stem}_analytic.csv")), &ANALYTIC_HEADER, &analytic_rows(&run.model))?;
    io::write_scan(&out.join(format!("{stem}_scan.csv")), &run.scan)?;
    let report = FringeReport {
        label: scenario.label.clone(),
        analyzer: analyzer_name(scenario),
        theta: config.hwp.theta(),
        seed,
        model_visibility: run.model.visibility,
        model_fringe_phase: run.model.fringe_phase(),
        fit: run.fit,
    };
    io::write_json(&out.join(format!("{stem}_fit.json")), &report)?;
    Ok(report)
}

fn analyzer_name(scenario: &Scenario) -> String {
    scenario.analyzer.label().map_or_else(|| "custom".into(), |l| l.as_char().to_string())
}

pub fn cmd_fringe(scenario: &Scenario, seed: u64, out: &Path) -> Result<FringeReport> {
    let run = simulate_fringe(&scenario.state, &scenario.interferometer, scenario, derive_seed(seed, tags::FRINGE))?;
    write_fringe(out, "fringe", scenario, &run, &scenario.interferometer, seed)
}

pub const SCAN_FILES: [&str; 4] = ["scan_linear.csv", "scan_circular.csv", "scan_cal_h.csv", "scan_cal_v.csv"];
pub const POLARIZED_FILE: &str = "polarized.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarizedCounts {
    pub counts_h: u64,
    pub counts_v: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueSe {
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceReport {
    pub value: f64,
    /// Bootstrap standard error.
    pub se: f64,
    pub se_propagated: f64,
    pub raw: f64,
    pub bootstrap_replicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub value: f64,
    pub se: f64,
    pub raw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub concurrence: f64,
    pub i_h: f64,
    pub coherence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub source: String,
    pub seed: u64,
    pub rng: String,
    pub scenario: Option<String>,
    pub config: Option<InterferometerConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub visibilities: BTreeMap<String, VisibilityEstimate>,
    pub concurrence: ConcurrenceReport,
    pub i_h: Option<ValueSe>,
    pub coherence: Option<CoherenceReport>,
    pub truth: Option<Truth>,
    pub provenance: Provenance,
}

/// Probe labels recorded in the scans' metadata, D/R when absent.
fn probe_labels(quad: &ScanQuad) -> [String; 4] {
    let label = |s: &FringeScan, default: AnalyzerLabel| {
        s.meta.analyzer.and_then(|a| a.label()).unwrap_or(default).as_char().to_string()
    };
    let (lin, circ) = ProbePair::DiagonalRight.labels();
    [
        label(&quad.linear, lin),
        label(&quad.circular, circ),
        label(&quad.cal_h, AnalyzerLabel::H),
        label(&quad.cal_v, AnalyzerLabel::V),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadEstimate {
    pub visibilities: BTreeMap<String, VisibilityEstimate>,
    pub concurrence: ConcurrenceReport,
    pub i_h: Option<ValueSe>,
    pub coherence: Option<CoherenceReport>,
}

/// Fits, bootstraps and recovers parameters from four scans.
pub fn estimate_quad(
    quad: &ScanQuad,
    polarized: Option<PolarizedCounts>,
    replicates: usize,
    seed: u64,
) -> Result<QuadEstimate> {
    let fit = fit_quad(quad)?;
    let boot = parallel::bootstrap_concurrence(quad, replicates, derive_seed(seed, tags::BOOTSTRAP))?;
    let labels = probe_labels(quad);
    let mut visibilities = BTreeMap::new();
    for (name, f) in labels.iter().zip(fit.fits) {
        visibilities.insert(name.clone(), f);
    }
    let se = boot.se.unwrap_or(0.0);
    let concurrence = ConcurrenceReport {
        value: fit.concurrence.value,
        se,
        se_propagated: fit.concurrence.se.unwrap_or(0.0),
        raw: fit.concurrence.raw,
        bootstrap_replicates: replicates,
    };
    let i_h = polarized.map(|p| recover_i_h(p.counts_h, p.counts_v)).transpose()?;
    let coherence = i_h.and_then(|ih| {
        recover_coherence_with_se(concurrence.value, se, ih.value, ih.se)
            .ok()
            .map(|c| CoherenceReport { value: c.value, se: c.se.unwrap_or(0.0), raw: c.raw })
    });
    Ok(QuadEstimate { visibilities, concurrence, i_h: i_h.map(|x| ValueSe { value: x.value, se: x.se }), coherence })
}

/// Simulated run of the four scans plus one-source singles.
pub fn simulate_estimate(scenario: &Scenario, seed: u64) -> Result<(ScanQuad, PolarizedCounts, EstimateReport)> {
    let ifm = &scenario.interferometer;
    let run = run_singles(&scenario.state, ifm.channel, ifm.hwp_convention, &scenario.singles, derive_seed(seed, tags::SINGLES))?;
    let polarized = PolarizedCounts { counts_h: run.polarized_counts.0, counts_v: run.polarized_counts.1 };
    let QuadEstimate { visibilities, concurrence, i_h, coherence } =
        estimate_quad(&run.quad, Some(polarized), scenario.bootstrap_replicates, seed)?;
    let s = &scenario.state;
    let report = EstimateReport {
        visibilities,
        concurrence,
        i_h,
        coherence,
        truth: Some(Truth { concurrence: family_concurrence(s), i_h: s.i_h(), coherence: s.coherence() }),
        provenance: Provenance {
            tool: TOOL.into(),
            source: "simulated".into(),
            seed,
            rng: RNG_ALGORITHM.into(),
            scenario: Some(scenario.label.clone()),
            config: Some(*ifm),
        },
    };
    Ok((run.quad, polarized, report))
}

pub fn read_quad(dir: &Path) -> Result<(ScanQuad, Option<PolarizedCounts>)> {
    let [a, b, c, d] = SCAN_FILES.map(|f| dir.join(f));
    let quad = ScanQuad {
        linear: io::read_scan(&a)?,
        circular: io::read_scan(&b)?,
        cal_h: io::read_scan(&c)?,
        cal_v: io::read_scan(&d)?,
    };
    let pol = dir.join(POLARIZED_FILE);
    let polarized = if pol.exists() { Some(io::read_json(&pol)?) } else { None };
    Ok((quad, polarized))
}

pub fn write_quad(dir: &Path, quad: &ScanQuad, polarized: &PolarizedCounts) -> Result<()> {
    for (name, scan) in SCAN_FILES.iter().zip(quad.scans()) {
        io::write_scan(&dir.join(name), scan)?;
    }
    io::write_json(&dir.join(POLARIZED_FILE), polarized)
}

/// Simulates (or, with `input`, reads) the four scans and writes
/// `estimate.json` into `out`.
pub fn cmd_estimate(scenario: &Scenario, seed: u64, out: &Path, input: Option<&Path>) -> Result<EstimateReport> {
    io::ensure_dir(out)?;
    let report = match input {
        None => {
            let (quad, polarized, report) = simulate_estimate(scenario, seed)?;
            write_quad(out, &quad, &polarized)?;
            report
        }
        Some(dir) => {
            let (quad, polarized) = read_quad(dir)?;
            let QuadEstimate { visibilities, concurrence, i_h, coherence } =
                estimate_quad(&quad, polarized, scenario.bootstrap_replicates, seed)?;
            EstimateReport {
                visibilities,
                concurrence,
                i_h,
                coherence,
                truth: None,
                provenance: Provenance {
                    tool: TOOL.into(),
                    source: dir.display().to_string(),
                    seed,
                    rng: RNG_ALGORITHM.into(),
                    scenario: None,
                    config: None,
                },
            }
        }
    };
    io::write_json(&out.join("estimate.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOutput {
    pub c_singles: f64,
    pub c_tomography: f64,
    pub se_singles: f64,
    pub se_tomography: f64,
    pub fidelity_to_truth: f64,
    pub c_true: f64,
    pub difference: f64,
    pub combined_se: f64,
    pub agree_3sigma: bool,
    pub pairs_per_setting: f64,
    pub seed: u64,
}

impl CompareOutput {
    pub fn new(r: &ComparisonReport, pairs_per_setting: f64, seed: u64) -> Self {
        Self {
            c_singles: r.c_singles,
            c_tomography: r.c_tomography,
            se_singles: r.se_singles,
            se_tomography: r.se_tomography,
            fidelity_to_truth: r.fidelity_to_truth,
            c_true: r.c_true,
            difference: r.difference,
            combined_se: r.combined_se,
            agree_3sigma: r.agrees_within(3.0),
            pairs_per_setting,
            seed,
        }
    }
}

/// Writes `compare.json` and the simulated coincidences `records.csv`.
pub fn cmd_compare(scenario: &Scenario, seed: u64, out: &Path) -> Result<CompareOutput> {
    io::ensure_dir(out)?;
    let budgets = scenario.comparison_budgets();
    let s = derive_seed(seed, tags::COMPARE);
    let report = parallel::compare_methods(&scenario.state, &scenario.interferometer, &budgets, s)?;
    let records = parallel::simulate_coincidences(&make_family_state(&scenario.state), budgets.pairs_per_setting, derive_seed(s, 11))?;
    io::write_records(&out.join("records.csv"), &records)?;
    let output = CompareOutput::new(&report, budgets.pairs_per_setting, seed);
    io::write_json(&out.join("compare.json"), &output)?;
    Ok(output)
}

pub fn out_dir(out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from("out"))
}

pub fn require(flag: &str, v: Option<PathBuf>) -> Result<PathBuf> {
    v.ok_or_else(|| CliError::BadInput(format!("{flag} is required")))
}
