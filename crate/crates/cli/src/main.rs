use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use icent::commands::{self, out_dir, require};
use icent::config::{Scenario, ScenarioConfig, DEFAULT_SEED};
use icent::figures::{self, Figure};
use icent::{fixtures, io, parallel, validate, CliError, Result};
use icent_core::interferometer::AnalyzerLabel;
use icent_core::tomography::ComparisonBudgets;

#[derive(Parser)]
#[command(name = "icent", version, about = "Entanglement from induced-coherence singles: simulation, estimation and tomography cross-checks")]
struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads for bootstrap and tomography loops (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured analyzer (H, V, D, A, R or L).
    #[arg(long, value_parser = parse_analyzer)]
    analyzer: Option<AnalyzerLabel>,
    /// Overrides the configured wave-plate angle (radians).
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
}

fn parse_analyzer(s: &str) -> std::result::Result<AnalyzerLabel, String> {
    s.parse().map_err(|()| format!("expected one of H, V, D, A, R, L, got {s:?}"))
}

impl ScenarioArgs {
    fn scenario(&self) -> Result<Scenario> {
        let path = require("--config", self.config.clone())?;
        let cfg = ScenarioConfig::load(&path)?;
        Scenario::from_config(&cfg)?.with_overrides(self.analyzer, self.theta)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Analytic fringe plus a sampled scan for one analyzer.
    Fringe(ScenarioArgs),
    /// Four-scan singles estimate of C, I_H and ℐ.
    Estimate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Directory with measured scans instead of simulating them.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Singles estimate against coincidence tomography on the same state.
    Compare(ScenarioArgs),
    /// Figure tables and markdown summaries.
    Reproduce {
        /// fig3, fig4, fig6, fig8 or all.
        #[arg(long, default_value = "all")]
        figure: String,
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
    /// Runs the invariant suite; exit status 1 if any check fails.
    Validate {
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
    /// Writes the fixture file and lists the fixtures' concurrences.
    Fixtures {
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let pool = parallel::pool(cli.threads)?;
    let seed = cli.seed;
    println!("seed: {seed}");
    pool.install(|| match cli.command {
        Command::Fringe(args) => {
            let s = args.scenario()?;
            let out = out_dir(cli.out);
            let r = commands::cmd_fringe(&s, seed, &out)?;
            println!(
                "analyzer {} theta {:.6}: model V = {:.6}, fitted V = {:.6} ± {:.6}",
                r.analyzer, r.theta, r.model_visibility, r.fit.visibility, r.fit.se_visibility
            );
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Estimate { scenario, input } => {
            let s = scenario.scenario().or_else(|e| match (&e, &input, &scenario.config) {
                (CliError::BadInput(_), Some(_), None) => Scenario::from_config(&ScenarioConfig::new(0.5, 0.0, 0.0)),
                _ => Err(e),
            })?;
            let out = out_dir(cli.out);
            let r = commands::cmd_estimate(&s, seed, &out, input.as_deref())?;
            println!("C = {:.6} ± {:.6} (propagated {:.6})", r.concurrence.value, r.concurrence.se, r.concurrence.se_propagated);
            if let Some(ih) = r.i_h {
                println!("I_H = {:.6} ± {:.6}", ih.value, ih.se);
            }
            match r.coherence {
                Some(c) => println!("coherence = {:.6} ± {:.6}", c.value, c.se),
                None => println!("coherence undefined"),
            }
            println!("wrote {}", out.join("estimate.json").display());
            Ok(())
        }
        Command::Compare(args) => {
            let s = args.scenario()?;
            let out = out_dir(cli.out);
            let r = commands::cmd_compare(&s, seed, &out)?;
            println!(
                "C singles = {:.6} ± {:.6}, C tomography = {:.6} ± {:.6}, fidelity {:.6}, agree(3σ) {}",
                r.c_singles, r.se_singles, r.c_tomography, r.se_tomography, r.fidelity_to_truth, r.agree_3sigma
            );
            println!("wrote {}", out.join("compare.json").display());
            Ok(())
        }
        Command::Reproduce { figure, fixtures: path } => {
            let figs: Vec<Figure> =
                if figure == "all" { Figure::ALL.to_vec() } else { vec![figure.parse()?] };
            let fx = fixtures::load_default(path.as_deref())?;
            let out = out_dir(cli.out);
            for f in figs {
                figures::reproduce(f, &out, seed, &fx, &ComparisonBudgets::default(), 200)?;
                println!("{}: wrote {}", f.id(), out.join(format!("{}.md", f.id())).display());
            }
            Ok(())
        }
        Command::Validate { fixtures: path } => {
            let checks = validate::run_checks(seed, path.as_deref())?;
            print!("{}", validate::format_table(&checks, seed).trim_start_matches(&format!("seed: {seed}\n")));
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Validation(failed.join(", ")))
            }
        }
        Command::Fixtures { fixtures: path } => {
            let fx = fixtures::load_default(path.as_deref())?;
            for f in &fx {
                println!("{}: C = {:.6}", f.name, icent_core::qstate::wootters_concurrence(&f.state));
            }
            if let Some(out) = cli.out {
                io::ensure_dir(&out)?;
                let file = out.join("tomography_states.json");
                io::write_json(&file, &fixtures::to_file(&fx))?;
                println!("wrote {}", file.display());
            }
            Ok(())
        }
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
