//! Acceptance criteria A1-A9. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; the exit status is non-zero if any fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::time::{Duration, Instant};

use icent::figures::{self, fit_nuisance, PANELS};
use icent_core::counting::derive_seed;
use icent_core::estimation::{
    estimate_concurrence, fit_quad, recover_coherence_with_se, run_singles, simulate_quad, SinglesSettings,
};
use icent_core::interferometer::{
    fringe_model, theta_sweep, AlphaChannel, Analyzer, AnalyzerLabel, HwpConvention, InterferometerConfig,
};
use icent_core::qstate::{
    family_concurrence, fidelity, fixtures, make_family_state, make_psi_family_state, wootters_concurrence,
    StateFamilyParams,
};
use icent_core::tomography::{
    compare_methods, linear_inversion, linear_inversion_table, probability_table, simulate_coincidences,
    ComparisonBudgets,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use AnalyzerLabel::*;

const CONVENTIONS: [HwpConvention; 2] = [HwpConvention::Reflection, HwpConvention::Rotator];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn draws(seed: u64, n: usize) -> Vec<(StateFamilyParams, AlphaChannel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let p = StateFamilyParams::new(rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0), rng.random_range(-PI..PI))
                .unwrap();
            let ch = AlphaChannel::new(rng.random_range(0.3..=1.0), rng.random_range(0.3..=1.0)).unwrap();
            (p, ch)
        })
        .collect()
}

fn vis(p: &StateFamilyParams, theta: f64, ch: AlphaChannel, conv: HwpConvention, a: AnalyzerLabel) -> f64 {
    fringe_model(p, &InterferometerConfig::new(theta, ch, conv), &Analyzer::named(a)).unwrap().visibility
}

fn a1() -> Outcome {
    let mut worst: f64 = 0.0;
    for (p, ch) in draws(101, 200) {
        for conv in CONVENTIONS {
            let c = estimate_concurrence(
                vis(&p, FRAC_PI_4, ch, conv, D),
                vis(&p, FRAC_PI_4, ch, conv, R),
                vis(&p, 0.0, ch, conv, H),
                vis(&p, 0.0, ch, conv, V),
            )
            .unwrap()
            .raw;
            let want = 2.0 * p.coherence() * (p.i_h() * p.i_v()).sqrt();
            worst = worst.max((c - want).abs());
        }
    }
    outcome(worst <= 1e-10, format!("200 draws x 2 conventions, max |C_est - 2ℐ√(I_H I_V)| = {worst:.2e}"))
}

fn a2() -> Outcome {
    let mut worst: f64 = 0.0;
    for (p, _) in draws(202, 200) {
        let c = family_concurrence(&p);
        worst = worst.max((wootters_concurrence(&make_family_state(&p)) - c).abs());
        worst = worst.max((wootters_concurrence(&make_psi_family_state(&p)) - c).abs());
    }
    outcome(worst <= 1e-10, format!("200 draws, Φ and Ψ families, max |Wootters - family| = {worst:.2e}"))
}

fn a3() -> Outcome {
    let mut hv: f64 = 0.0;
    let mut probes: f64 = 0.0;
    for (p, ch) in draws(303, 200) {
        for conv in CONVENTIONS {
            hv = hv.max(vis(&p, FRAC_PI_4, ch, conv, H)).max(vis(&p, FRAC_PI_4, ch, conv, V));
            let nulls = [
                p.with_coherence(0.0).unwrap(),
                StateFamilyParams::new(0.0, p.coherence(), p.phase()).unwrap(),
                StateFamilyParams::new(1.0, p.coherence(), p.phase()).unwrap(),
            ];
            for q in &nulls {
                for a in [D, A, R, L] {
                    probes = probes.max(vis(q, FRAC_PI_4, ch, conv, a));
                }
            }
        }
    }
    outcome(
        hv == 0.0 && probes == 0.0,
        format!("max V_H,V_V at π/4 = {hv:e}; max V_D,A,R,L with ℐ=0 or I_H∈{{0,1}} = {probes:e}"),
    )
}

fn a4() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for panel in &PANELS {
        let fit = fit_nuisance(panel).unwrap();
        ok &= fit.bound_ok;
        parts.push(format!(
            "({}) {:.2} ≤ {:.3}{} t={:.3} V={:.3}",
            panel.id,
            panel.v_d,
            fit.c_model,
            if fit.bound_ok { "" } else { " EXCEEDED" },
            fit.t_h,
            fit.v_model
        ));
    }
    outcome(ok, parts.join("; "))
}

fn a5() -> Outcome {
    let reps = 500;
    let mut worst = 1.0f64;
    let mut parts = Vec::new();
    for (k, panel) in PANELS.iter().enumerate() {
        let fit = fit_nuisance(panel).unwrap();
        let params = StateFamilyParams::new(panel.i_h, panel.coherence, fit.phase).unwrap();
        let ch = AlphaChannel::new(fit.t_h, fit.t_v).unwrap();
        let truth = family_concurrence(&params);
        let settings = SinglesSettings::default();
        let mut hits = 0;
        for r in 0..reps {
            let quad = simulate_quad(&params, ch, HwpConvention::Reflection, &settings, derive_seed(5000 + k as u64, r)).unwrap();
            let c = fit_quad(&quad).unwrap().concurrence;
            if (c.value - truth).abs() <= 3.0 * c.se.unwrap() {
                hits += 1;
            }
        }
        let frac = hits as f64 / reps as f64;
        worst = worst.min(frac);
        parts.push(format!("({}) {:.1}%", panel.id, 100.0 * frac));
    }
    outcome(worst >= 0.90, format!("coverage of C within 3·se over {reps} replications: {}", parts.join(", ")))
}

fn a6() -> Outcome {
    let mut identity: f64 = 0.0;
    let mut min_fid = 1.0f64;
    let mut max_dc: f64 = 0.0;
    for (k, f) in fixtures::all().iter().enumerate() {
        let rec = linear_inversion_table(&probability_table(f)).unwrap();
        identity = identity.max(rec.matrix().max_abs_diff(f.matrix()));
        let records = simulate_coincidences(f, 1e5, 6000 + k as u64).unwrap();
        let noisy = linear_inversion(&records).unwrap();
        min_fid = min_fid.min(fidelity(&noisy, f));
        max_dc = max_dc.max((wootters_concurrence(&noisy) - wootters_concurrence(f)).abs());
    }
    outcome(
        identity <= 1e-10 && min_fid >= 0.99 && max_dc <= 0.02,
        format!("noiseless error {identity:.2e}; at 1e5 pairs/setting min fidelity {min_fid:.4}, max |ΔC| {max_dc:.4}"),
    )
}

fn a7() -> Outcome {
    let config = InterferometerConfig::new(0.0, AlphaChannel::ideal(), HwpConvention::Reflection);
    let budgets = ComparisonBudgets::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, f) in fixtures::all().iter().enumerate() {
        let params = StateFamilyParams::from_density(f);
        let r = compare_methods(&params, &config, &budgets, 7000 + k as u64).unwrap();
        let z = r.difference.abs() / r.combined_se;
        ok &= r.agrees_within(3.0);
        parts.push(format!("{} {:.4}/{:.4} z={z:.2}", fixtures::NAMES[k], r.c_singles, r.c_tomography));
    }
    outcome(ok, format!("|C_singles - C_tomography| / combined se: {}", parts.join("; ")))
}

fn a8() -> Outcome {
    let settings = SinglesSettings::default();
    let mut ok = true;
    let mut parts = Vec::new();
    let mut scenarios: Vec<(String, StateFamilyParams)> = fixtures::all()
        .iter()
        .enumerate()
        .map(|(k, f)| (fixtures::NAMES[k].to_string(), StateFamilyParams::from_density(f)))
        .collect();
    scenarios.push(("I_H=1".into(), StateFamilyParams::new(1.0, 0.5, 0.0).unwrap()));
    for (k, (name, p)) in scenarios.iter().enumerate() {
        let run = run_singles(p, AlphaChannel::ideal(), HwpConvention::Reflection, &settings, 8000 + k as u64).unwrap();
        let ih_ok = (run.i_h.value - p.i_h()).abs() <= 3.0 * run.i_h.se.max(f64::MIN_POSITIVE)
            || run.i_h.value == p.i_h();
        let c = run.fit.concurrence;
        let coh = recover_coherence_with_se(c.value, c.se.unwrap(), run.i_h.value, run.i_h.se);
        let undefined = p.i_h() == 0.0 || p.i_h() == 1.0;
        let coh_ok = match (&coh, undefined) {
            (Err(_), true) => true,
            (Ok(e), false) => (e.value - p.coherence()).abs() <= 3.0 * e.se.unwrap(),
            _ => false,
        };
        ok &= ih_ok && coh_ok;
        let coh_text = match coh {
            Ok(e) => format!("ℐ {:.4}±{:.4} (true {:.4})", e.value, e.se.unwrap(), p.coherence()),
            Err(_) => "ℐ undefined".to_string(),
        };
        parts.push(format!("{name}: I_H {:.5}±{:.5} {coh_text}", run.i_h.value, run.i_h.se));
    }
    outcome(ok, parts.join("; "))
}

fn a9() -> Outcome {
    let params = StateFamilyParams::new(0.47, 0.94, 0.0).unwrap();
    let thetas: Vec<f64> = (0..50).map(|k| FRAC_PI_2 * k as f64 / 49.0).collect();
    let mut worst: f64 = 0.0;
    for ch in [AlphaChannel::ideal(), AlphaChannel::new(0.8, 0.5).unwrap()] {
        for conv in CONVENTIONS {
            let sweep = theta_sweep(&params, ch, conv, &Analyzer::named(H), &thetas).unwrap();
            for s in &sweep {
                worst = worst.max((s.visibility / sweep[0].visibility - (2.0 * s.theta).cos().abs()).abs());
            }
        }
    }
    let dir = tempfile::tempdir().unwrap();
    figures::fig8(dir.path(), 1).unwrap();
    let table = std::fs::read_to_string(dir.path().join("fig8_theta_sweep.csv")).unwrap();
    let header = table.lines().next().unwrap_or_default().to_string();
    let rows = table.lines().count() - 1;
    let has_column = header.split(',').any(|h| h == "two_theta_rad");
    outcome(
        worst <= 1e-10 && has_column && rows == 50,
        format!("max |V_H(θ)/V_H(0) - |cos 2θ|| = {worst:.2e}; table has {rows} rows, header {header}"),
    )
}

type Criterion = (&'static str, &'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 9] = [
        ("A1", "estimator identity", a1, Some(Duration::from_secs(1))),
        ("A2", "oracle equivalence", a2, Some(Duration::from_secs(1))),
        ("A3", "null predictions", a3, None),
        ("A4", "fringe-panel bound", a4, None),
        ("A5", "statistical pipeline", a5, Some(Duration::from_secs(60))),
        ("A6", "tomography reference", a6, Some(Duration::from_secs(60))),
        ("A7", "method agreement", a7, None),
        ("A8", "parameter recovery", a8, None),
        ("A9", "theta sweep", a9, None),
    ];
    let mut failed = 0;
    println!("running {} acceptance criteria", criteria.len());
    for (id, name, f, limit) in criteria {
        let start = Instant::now();
        let mut o = f();
        let dt = start.elapsed();
        if let Some(l) = limit {
            if dt > l {
                o.passed = false;
                o.detail.push_str(&format!(" [runtime {:.2}s over limit {}s]", dt.as_secs_f64(), l.as_secs()));
            }
        }
        if !o.passed {
            failed += 1;
        }
        println!("{} {id} {name} ({:.2}s): {}", if o.passed { "PASS" } else { "FAIL" }, dt.as_secs_f64(), o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
