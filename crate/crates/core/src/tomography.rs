//! Coincidence tomography on the 36 local projector pairs: simulation,
//! linear-inversion reconstruction, likelihood refinement and the comparison
//! against the singles-only estimate.

use alloc::vec::Vec;

// Float supplies the libm-backed methods when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::counting::{derive_seed, poisson_count, stream_rng, StreamDomain};
use crate::error::{Error, Result};
use crate::estimation::{run_singles, SinglesSettings};
use crate::interferometer::{AnalyzerLabel, InterferometerConfig};
use crate::linalg::{kron, Mat2, Mat4, I, ONE, ZERO};
use crate::qstate::{fidelity, make_family_state, wootters_concurrence, DensityMatrix4, StateFamilyParams};

/// Projector pair `P_α ⊗ P_β`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TomographySetting {
    pub alpha: AnalyzerLabel,
    pub beta: AnalyzerLabel,
}

impl TomographySetting {
    pub fn new(alpha: AnalyzerLabel, beta: AnalyzerLabel) -> Self {
        Self { alpha, beta }
    }

    pub fn projector(&self) -> Mat4 {
        kron(&Mat2::outer(&self.alpha.ket()), &Mat2::outer(&self.beta.ket()))
    }

    /// Position in [`settings_36`].
    pub fn index(&self) -> usize {
        6 * label_index(self.alpha) + label_index(self.beta)
    }
}

fn label_index(l: AnalyzerLabel) -> usize {
    AnalyzerLabel::ALL.iter().position(|&x| x == l).unwrap()
}

/// All ordered pairs of `{H, V, D, A, R, L}`, α-major, starting at `(H, H)`.
pub fn settings_36() -> Vec<TomographySetting> {
    AnalyzerLabel::ALL
        .iter()
        .flat_map(|&a| AnalyzerLabel::ALL.iter().map(move |&b| TomographySetting::new(a, b)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoincidenceRecord {
    pub setting: TomographySetting,
    pub counts: u64,
    /// Expected coincidences for a projector of unit probability.
    pub pairs_budget: f64,
}

/// Values indexed `[α][β]` in [`AnalyzerLabel::ALL`] order.
pub type SettingTable = [[f64; 6]; 6];

/// Born probabilities of all 36 settings.
pub fn probability_table(rho: &DensityMatrix4) -> SettingTable {
    let mut t = [[0.0; 6]; 6];
    for s in settings_36() {
        t[label_index(s.alpha)][label_index(s.beta)] = rho.probability(&s.projector());
    }
    t
}

/// Counts for the setting at `index` in [`settings_36`], drawn from its own
/// stream.
pub fn simulate_setting(rho: &DensityMatrix4, index: usize, budget: f64, seed: u64) -> CoincidenceRecord {
    let setting = settings_36()[index];
    let mean = budget * rho.probability(&setting.projector()).max(0.0);
    let mut rng = stream_rng(seed, StreamDomain::Coincidence, index as u64);
    CoincidenceRecord { setting, counts: poisson_count(mean, &mut rng), pairs_budget: budget }
}

pub fn simulate_coincidences(rho: &DensityMatrix4, budget: f64, seed: u64) -> Result<Vec<CoincidenceRecord>> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::ParameterOutOfRange { name: "budget", value: budget });
    }
    Ok((0..36).map(|k| simulate_setting(rho, k, budget, seed)).collect())
}

/// Counts and budgets gathered into tables. Repeated settings add up.
pub fn tabulate(records: &[CoincidenceRecord]) -> Result<(SettingTable, SettingTable)> {
    let mut counts = [[0.0; 6]; 6];
    let mut budgets = [[0.0; 6]; 6];
    let mut seen = [[false; 6]; 6];
    for r in records {
        let (a, b) = (label_index(r.setting.alpha), label_index(r.setting.beta));
        counts[a][b] += r.counts as f64;
        budgets[a][b] += r.pairs_budget;
        seen[a][b] = true;
    }
    for (a, row) in seen.iter().enumerate() {
        for (b, &ok) in row.iter().enumerate() {
            if !ok {
                return Err(Error::MissingSetting {
                    alpha: AnalyzerLabel::ALL[a].as_char(),
                    beta: AnalyzerLabel::ALL[b].as_char(),
                });
            }
        }
    }
    Ok((counts, budgets))
}

fn pauli(k: usize) -> Mat2 {
    match k {
        0 => Mat2::identity(),
        1 => Mat2::from_rows([[ZERO, ONE], [ONE, ZERO]]),
        2 => Mat2::from_rows([[ZERO, -I], [I, ZERO]]),
        _ => Mat2::from_rows([[ONE, ZERO], [ZERO, -ONE]]),
    }
}

/// Row of the +1 and -1 eigenprojectors of σ_x, σ_y, σ_z in the labels'
/// table order.
const PLUS_MINUS: [(usize, usize); 3] = [(2, 3), (5, 4), (0, 1)];

/// Unprojected estimate `¼ Σᵢⱼ Sᵢⱼ σᵢ ⊗ σⱼ`. Each local Pauli basis pair is
/// normalized by its own total; single-qubit terms average over the three
/// bases of the other qubit.
pub fn pauli_estimate(table: &SettingTable) -> Result<Mat4> {
    let mut s = [[0.0; 4]; 4];
    s[0][0] = 1.0;
    for (i, &(ap, am)) in PLUS_MINUS.iter().enumerate() {
        for (j, &(bp, bm)) in PLUS_MINUS.iter().enumerate() {
            let n = [table[ap][bp], table[ap][bm], table[am][bp], table[am][bm]];
            let total: f64 = n.iter().sum();
            if !(total > 0.0) {
                return Err(Error::ZeroCounts);
            }
            let f = n.map(|x| x / total);
            s[i + 1][j + 1] = f[0] - f[1] - f[2] + f[3];
            s[i + 1][0] += (f[0] + f[1] - f[2] - f[3]) / 3.0;
            s[0][j + 1] += (f[0] - f[1] + f[2] - f[3]) / 3.0;
        }
    }
    let mut rho = Mat4::zeros();
    for (i, row) in s.iter().enumerate() {
        for (j, &sij) in row.iter().enumerate() {
            rho = rho + kron(&pauli(i), &pauli(j)).scale_real(0.25 * sij);
        }
    }
    Ok(rho)
}

/// Linear inversion followed by projection onto the physical states.
pub fn linear_inversion_table(table: &SettingTable) -> Result<DensityMatrix4> {
    DensityMatrix4::project(&pauli_estimate(table)?)
}

pub fn linear_inversion(records: &[CoincidenceRecord]) -> Result<DensityMatrix4> {
    let (counts, _) = tabulate(records)?;
    linear_inversion_table(&counts)
}

pub const MLE_MAX_ITERATIONS: usize = 20_000;
/// Frobenius norm of the likelihood gradient in the factor, log-likelihood
/// normalized by the total counts.
pub const MLE_GRADIENT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub max_iterations: usize,
    pub gradient_tol: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { max_iterations: MLE_MAX_ITERATIONS, gradient_tol: MLE_GRADIENT_TOL }
    }
}
/// Admixture of I/4 applied to a starting state that assigns zero
/// probability to an observed setting.
pub const MLE_START_MIXING: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleResult {
    pub state: DensityMatrix4,
    pub log_likelihood: f64,
    pub initial_log_likelihood: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Likelihood {
    projectors: Vec<Mat4>,
    counts: Vec<f64>,
    budgets: Vec<f64>,
}

impl Likelihood {
    fn new(counts: &SettingTable, budgets: &SettingTable) -> Result<Self> {
        let total: f64 = counts.iter().flatten().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroCounts);
        }
        let settings = settings_36();
        let idx = |s: &TomographySetting| (label_index(s.alpha), label_index(s.beta));
        Ok(Self {
            projectors: settings.iter().map(|s| s.projector()).collect(),
            counts: settings.iter().map(|s| counts[idx(s).0][idx(s).1] / total).collect(),
            budgets: settings.iter().map(|s| budgets[idx(s).0][idx(s).1] / total).collect(),
        })
    }

    /// `Σ n ln p - B p`, normalized by the total counts.
    fn value(&self, rho: &Mat4) -> f64 {
        let mut l = 0.0;
        for ((p, &n), &b) in self.projectors.iter().zip(&self.counts).zip(&self.budgets) {
            let prob = rho.trace_product(p).re;
            if n > 0.0 {
                if !(prob > 0.0) {
                    return f64::NEG_INFINITY;
                }
                l += n * prob.ln();
            }
            l -= b * prob;
        }
        l
    }

    /// Gradient with respect to `T` of the likelihood of `T T† / tr(T T†)`.
    fn gradient(&self, t: &Mat4) -> Mat4 {
        let a = *t * t.adjoint();
        let tr = a.trace().re;
        let rho = a.scale_real(1.0 / tr);
        let mut r = Mat4::zeros();
        for ((p, &n), &b) in self.projectors.iter().zip(&self.counts).zip(&self.budgets) {
            let prob = rho.trace_product(p).re;
            let w = if n > 0.0 { n / prob } else { 0.0 } - b;
            r = r + p.scale_real(w);
        }
        let shift = r.trace_product(&rho).re;
        let g = (r - Mat4::identity().scale_real(shift)).scale_real(1.0 / tr);
        (g * *t).scale_real(2.0)
    }
}

fn state_of(t: &Mat4) -> Mat4 {
    let a = *t * t.adjoint();
    a.scale_real(1.0 / a.trace().re).hermitian_part()
}

fn inner(a: &Mat4, b: &Mat4) -> f64 {
    a.rows.iter().flatten().zip(b.rows.iter().flatten()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Maximizes the Poisson log-likelihood over `ρ = T T† / tr(T T†)` by
/// gradient ascent with Barzilai-Borwein steps and Armijo backtracking.
/// The best iterate is returned, so the likelihood never falls below that of
/// `initial`; `converged` is false when the iteration cap was reached first.
pub fn mle_refine_table(
    counts: &SettingTable,
    budgets: &SettingTable,
    initial: &DensityMatrix4,
    options: &MleOptions,
) -> Result<MleResult> {
    let like = Likelihood::new(counts, budgets)?;
    let initial_log_likelihood = like.value(initial.matrix());
    let mut start = *initial.matrix();
    if !initial_log_likelihood.is_finite() {
        start = start.scale_real(1.0 - MLE_START_MIXING)
            + Mat4::identity().scale_real(MLE_START_MIXING / 4.0);
    }
    let mut t = start.sqrt_psd();
    let mut value = like.value(&state_of(&t));
    let mut grad = like.gradient(&t);
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        let gnorm2 = inner(&grad, &grad);
        if gnorm2.sqrt() < options.gradient_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut s = step;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = t + grad.scale_real(s);
            let v = like.value(&state_of(&cand));
            if v >= value + 1e-4 * s * gnorm2 {
                accepted = Some((cand, v));
                break;
            }
            s *= 0.5;
        }
        let Some((cand, v)) = accepted else { break };
        let norm = (cand * cand.adjoint()).trace().re.sqrt();
        let cand = cand.scale_real(1.0 / norm);
        let new_grad = like.gradient(&cand);
        let ds = cand - t;
        let dg = new_grad - grad;
        let curv = -inner(&ds, &dg);
        step = if curv > 0.0 { (inner(&ds, &ds) / curv).clamp(1e-6, 1e6) } else { (2.0 * s).min(1e6) };
        t = cand;
        value = v;
        grad = new_grad;
    }
    let gradient_norm = inner(&grad, &grad).sqrt();
    let refined = DensityMatrix4::project(&state_of(&t))?;
    let (state, log_likelihood) = if value >= initial_log_likelihood {
        (refined, like.value(refined.matrix()))
    } else {
        (*initial, initial_log_likelihood)
    };
    Ok(MleResult { state, log_likelihood, initial_log_likelihood, gradient_norm, iterations, converged })
}

pub fn mle_refine(records: &[CoincidenceRecord], initial: &DensityMatrix4) -> Result<MleResult> {
    let (counts, budgets) = tabulate(records)?;
    mle_refine_table(&counts, &budgets, initial, &MleOptions::default())
}

/// Reconstructor used by [`reconstruct`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Reconstructor {
    #[default]
    Linear,
    Mle,
}

pub fn reconstruct(records: &[CoincidenceRecord], method: Reconstructor) -> Result<DensityMatrix4> {
    let linear = linear_inversion(records)?;
    match method {
        Reconstructor::Linear => Ok(linear),
        Reconstructor::Mle => Ok(mle_refine(records, &linear)?.state),
    }
}

/// Records with every count redrawn as Poisson around its observed value.
pub fn resample_records(records: &[CoincidenceRecord], seed: u64, replicate: u64) -> Vec<CoincidenceRecord> {
    let mut rng = stream_rng(seed, StreamDomain::TomographyBootstrap, replicate);
    records
        .iter()
        .map(|r| CoincidenceRecord { counts: poisson_count(r.counts as f64, &mut rng), ..*r })
        .collect()
}

/// Concurrence of the reconstruction from one resampled record set.
pub fn tomography_replicate(records: &[CoincidenceRecord], method: Reconstructor, seed: u64, replicate: u64) -> Result<f64> {
    Ok(wootters_concurrence(&reconstruct(&resample_records(records, seed, replicate), method)?))
}

pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Point concurrence and its bootstrap standard error.
pub fn tomography_concurrence(
    records: &[CoincidenceRecord],
    method: Reconstructor,
    replicates: usize,
    seed: u64,
) -> Result<(DensityMatrix4, f64, f64)> {
    if replicates < 2 {
        return Err(Error::TooFewReplicates(replicates));
    }
    let rho = reconstruct(records, method)?;
    let values = (0..replicates as u64)
        .map(|r| tomography_replicate(records, method, seed, r))
        .collect::<Result<Vec<_>>>()?;
    Ok((rho, wootters_concurrence(&rho), sample_sd(&values)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonBudgets {
    pub singles: SinglesSettings,
    pub pairs_per_setting: f64,
    pub tomography_replicates: usize,
    pub reconstructor: Reconstructor,
}

impl Default for ComparisonBudgets {
    fn default() -> Self {
        Self {
            singles: SinglesSettings::default(),
            pairs_per_setting: 1e5,
            tomography_replicates: 50,
            reconstructor: Reconstructor::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonReport {
    pub c_true: f64,
    pub c_singles: f64,
    pub c_tomography: f64,
    pub se_singles: f64,
    pub se_tomography: f64,
    pub fidelity_to_truth: f64,
    pub difference: f64,
    pub combined_se: f64,
}

impl ComparisonReport {
    /// `|C_singles - C_tomography| <= k · combined_se`
    pub fn agrees_within(&self, k: f64) -> bool {
        self.difference.abs() <= k * self.combined_se
    }
}

/// Seeds: singles run `derive_seed(seed, 10)`, coincidences
/// `derive_seed(seed, 11)`, tomography bootstrap `derive_seed(seed, 12)`.
pub fn compare_methods(
    params: &StateFamilyParams,
    config: &InterferometerConfig,
    budgets: &ComparisonBudgets,
    seed: u64,
) -> Result<ComparisonReport> {
    let singles = run_singles(params, config.channel, config.hwp_convention, &budgets.singles, derive_seed(seed, 10))?;
    let truth = make_family_state(params);
    let records = simulate_coincidences(&truth, budgets.pairs_per_setting, derive_seed(seed, 11))?;
    let (rho, c_tomography, se_tomography) = tomography_concurrence(
        &records,
        budgets.reconstructor,
        budgets.tomography_replicates,
        derive_seed(seed, 12),
    )?;
    Ok(comparison_report(params, singles.fit.concurrence.value, singles.fit.concurrence.se.unwrap_or(0.0), &rho, c_tomography, se_tomography))
}

/// Assembles a report from already computed pieces.
pub fn comparison_report(
    params: &StateFamilyParams,
    c_singles: f64,
    se_singles: f64,
    rho: &DensityMatrix4,
    c_tomography: f64,
    se_tomography: f64,
) -> ComparisonReport {
    let truth = make_family_state(params);
    ComparisonReport {
        c_true: crate::qstate::family_concurrence(params),
        c_singles,
        c_tomography,
        se_singles,
        se_tomography,
        fidelity_to_truth: fidelity(rho, &truth),
        difference: c_singles - c_tomography,
        combined_se: (se_singles * se_singles + se_tomography * se_tomography).sqrt(),
    }
}
