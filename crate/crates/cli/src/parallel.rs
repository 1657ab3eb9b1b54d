//! Thread-pool versions of the replicate loops. Every replicate draws from
//! its own seeded stream, so the results equal the serial ones exactly.

use icent_core::counting::derive_seed;
use icent_core::estimation::{
    bootstrap_replicate, fit_quad, run_singles, summarize_bootstrap, ConcurrenceEstimate, ScanQuad,
    MIN_REPLICATES,
};
use icent_core::interferometer::InterferometerConfig;
use icent_core::qstate::{make_family_state, wootters_concurrence, DensityMatrix4, StateFamilyParams};
use icent_core::tomography::{
    comparison_report, reconstruct, sample_sd, simulate_setting, tomography_replicate, CoincidenceRecord,
    ComparisonBudgets, ComparisonReport, Reconstructor,
};
use icent_core::Error;
use rayon::prelude::*;

use crate::error::Result;

/// Pool with `threads` workers, or rayon's default when `None` or 0.
pub fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.filter(|&n| n > 0) {
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

pub fn bootstrap_concurrence(quad: &ScanQuad, replicates: usize, seed: u64) -> Result<ConcurrenceEstimate> {
    if replicates < MIN_REPLICATES {
        return Err(Error::TooFewReplicates(replicates).into());
    }
    let point = fit_quad(quad)?.concurrence;
    let values = (0..replicates as u64)
        .into_par_iter()
        .map(|r| bootstrap_replicate(quad, seed, r))
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(summarize_bootstrap(&point, &values))
}

pub fn simulate_coincidences(rho: &DensityMatrix4, budget: f64, seed: u64) -> Result<Vec<CoincidenceRecord>> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::ParameterOutOfRange { name: "budget", value: budget }.into());
    }
    Ok((0..36).into_par_iter().map(|k| simulate_setting(rho, k, budget, seed)).collect())
}

pub fn tomography_concurrence(
    records: &[CoincidenceRecord],
    method: Reconstructor,
    replicates: usize,
    seed: u64,
) -> Result<(DensityMatrix4, f64, f64)> {
    if replicates < 2 {
        return Err(Error::TooFewReplicates(replicates).into());
    }
    let rho = reconstruct(records, method)?;
    let values = (0..replicates as u64)
        .into_par_iter()
        .map(|r| tomography_replicate(records, method, seed, r))
        .collect::<Result<Vec<_>, Error>>()?;
    Ok((rho, wootters_concurrence(&rho), sample_sd(&values)))
}

/// Same seeds and result as the core `compare_methods`.
pub fn compare_methods(
    params: &StateFamilyParams,
    config: &InterferometerConfig,
    budgets: &ComparisonBudgets,
    seed: u64,
) -> Result<ComparisonReport> {
    let singles = run_singles(params, config.channel, config.hwp_convention, &budgets.singles, derive_seed(seed, 10))?;
    let truth = make_family_state(params);
    let records = simulate_coincidences(&truth, budgets.pairs_per_setting, derive_seed(seed, 11))?;
    let (rho, c, se) =
        tomography_concurrence(&records, budgets.reconstructor, budgets.tomography_replicates, derive_seed(seed, 12))?;
    let point = singles.fit.concurrence;
    Ok(comparison_report(params, point.value, point.se.unwrap_or(0.0), &rho, c, se))
}

/// Runs `f` over `items` in parallel, keeping the input order.
pub fn map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.par_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use icent_core::estimation::{simulate_quad, SinglesSettings};
    use icent_core::interferometer::AlphaChannel;
    use icent_core::qstate::fixtures;
    use icent_core::tomography as serial;

    #[test]
    fn parallel_equals_serial() {
        let params = StateFamilyParams::new(0.65, 0.38, 0.4).unwrap();
        let ch = AlphaChannel::new(0.9, 0.8).unwrap();
        let quad = simulate_quad(&params, ch, Default::default(), &SinglesSettings::default(), 3).unwrap();
        for threads in [1, 4] {
            let p = pool(Some(threads)).unwrap();
            let par = p.install(|| bootstrap_concurrence(&quad, 200, 9)).unwrap();
            assert_eq!(par, icent_core::estimation::bootstrap_concurrence(&quad, 200, 9).unwrap());

            let rho = fixtures::fixture(3);
            let recs = p.install(|| simulate_coincidences(&rho, 1e5, 4)).unwrap();
            assert_eq!(recs, serial::simulate_coincidences(&rho, 1e5, 4).unwrap());
            let a = p.install(|| tomography_concurrence(&recs, Reconstructor::Linear, 20, 1)).unwrap();
            assert_eq!(a, serial::tomography_concurrence(&recs, Reconstructor::Linear, 20, 1).unwrap());

            let config = InterferometerConfig::new(0.0, ch, Default::default());
            let budgets = ComparisonBudgets::default();
            let par = p.install(|| compare_methods(&params, &config, &budgets, 11)).unwrap();
            assert_eq!(par, serial::compare_methods(&params, &config, &budgets, 11).unwrap());
        }
    }
}
