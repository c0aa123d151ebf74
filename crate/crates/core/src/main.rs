//! CLI front end: scenario runs, stadium verification, Serrin scans,
//! sup-convolution checks, gradient flows, refinement studies,
//! parallel-body bounds, and the statement-to-diagnostic map.
//!
//! Exit codes: 0 all asserted diagnostics pass, 1 diagnostic failure,
//! 2 schema violation, 3 solver non-convergence.

use anyhow::Result;
use clap::{Parser, Subcommand};
use inflab::geometry::ConvexDomain;
use inflab::harness::{
    self, parallel_body_convergence, run_scenario, theorem_map, HarnessError, Scenario,
};
use inflab::solver::{convergence_study, solve_cascadic, ProblemKind, SolverConfig};
use inflab::diagnostics::{
    gradient_flow, level_set_serrin_scan, p_along_flow, sup_convolution, FlowContext,
};
use inflab::webfuncs::WebProfile;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "inflab", version, about = "verification laboratory for overdetermined infinity-Laplacian problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario JSON files
    Solve {
        /// scenario file paths
        scenarios: Vec<PathBuf>,
        /// run independent scenarios concurrently
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Built-in stadium verification campaign (Serrin witness)
    VerifyStadium {
        #[arg(long, default_value_t = 1.0 / 64.0)]
        h: f64,
        #[arg(long, default_value = "out/verify-stadium")]
        out: PathBuf,
    },
    /// Level-set Serrin scan of a normalized solve
    SerrinScan {
        /// domain as JSON, e.g. '{"shape":"disk","center":[0,0],"radius":1}'
        #[arg(long, default_value = STADIUM_JSON)]
        domain: String,
        #[arg(long, default_value_t = 1.0 / 32.0)]
        h: f64,
        /// levels as fractions of max u
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.2, 0.3, 0.4])]
        levels: Vec<f64>,
    },
    /// Sup-convolution bundle invariants for a solved field
    Supconv {
        #[arg(long, default_value = STADIUM_JSON)]
        domain: String,
        #[arg(long, default_value_t = 1.0 / 32.0)]
        h: f64,
        /// regularization parameter (default 4h)
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Gradient-flow trajectory from a start point
    Flow {
        #[arg(long, default_value = STADIUM_JSON)]
        domain: String,
        #[arg(long, default_value_t = 1.0 / 32.0)]
        h: f64,
        #[arg(long, num_args = 2, default_values_t = vec![0.3, 0.9])]
        start: Vec<f64>,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 3.0)]
        t_max: f64,
    },
    /// Refinement study against the exact web-function oracle
    Convergence {
        #[arg(long, default_value = STADIUM_JSON)]
        domain: String,
        #[arg(long, value_enum, default_value = "normalized")]
        problem: Problem,
        /// grid spacings, finest last
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0/16.0, 1.0/32.0, 1.0/64.0])]
        hs: Vec<f64>,
    },
    /// Outer-parallel-body boundary bound for the non-normalized problem
    ParallelBody {
        #[arg(long, default_value = r#"{"shape":"disk","center":[0.0,0.0],"radius":1.0}"#)]
        domain: String,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.2, 0.1, 0.05])]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 1.0 / 32.0)]
        h: f64,
    },
    /// Print the statement-to-diagnostic map
    TheoremMap,
}

const STADIUM_JSON: &str =
    r#"{"shape":"stadium","p0":[-1.0,0.0],"p1":[1.0,0.0],"radius":1.0}"#;

#[derive(Clone, Copy, clap::ValueEnum)]
enum Problem {
    Normalized,
    Nonnormalized,
}

impl From<Problem> for ProblemKind {
    fn from(p: Problem) -> Self {
        match p {
            Problem::Normalized => ProblemKind::Normalized,
            Problem::Nonnormalized => ProblemKind::NonNormalized,
        }
    }
}

fn parse_domain(json: &str) -> Result<ConvexDomain, HarnessError> {
    serde_json::from_str(json).map_err(|e| HarnessError::Schema(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Solve { scenarios, jobs } => {
            if scenarios.is_empty() {
                return Err(HarnessError::Schema("no scenario files given".into()));
            }
            let mut failed = Vec::new();
            if jobs <= 1 {
                for path in &scenarios {
                    let report = run_scenario(path)?;
                    print_report(&report);
                    failed.extend(report.failed_asserted());
                }
            } else {
                let mut results = Vec::new();
                for chunk in scenarios.chunks(jobs) {
                    let handles: Vec<_> = chunk
                        .iter()
                        .cloned()
                        .map(|path| std::thread::spawn(move || run_scenario(&path)))
                        .collect();
                    for handle in handles {
                        results.push(handle.join().expect("scenario thread panicked"));
                    }
                }
                for result in results {
                    let report = result?;
                    print_report(&report);
                    failed.extend(report.failed_asserted());
                }
            }
            if failed.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("failing diagnostics: {}", failed.join(", "));
                Ok(ExitCode::from(1))
            }
        }
        Command::VerifyStadium { h, out } => {
            let scenario: Scenario = serde_json::from_str(&format!(
                r#"{{
                    "domain": {STADIUM_JSON},
                    "problem": "normalized",
                    "h": {h},
                    "diagnostics": [
                        {{"name": "p_function", "params": {{"max_spread": 0.05}}}},
                        {{"name": "p_bounds_check"}},
                        {{"name": "boundary_gradient_stats",
                          "params": {{"expected_mean": 1.0, "mean_tol": 0.05, "max_spread": 0.05}}}},
                        {{"name": "is_stadium_like", "params": {{"expect": true}}}}
                    ],
                    "out": {}
                }}"#,
                serde_json::to_string(&out).unwrap()
            ))
            .map_err(|e| HarnessError::Schema(e.to_string()))?;
            let report = harness::run_scenario_value(&scenario, "verify-stadium")?;
            print_report(&report);
            let failed = report.failed_asserted();
            if failed.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("failing diagnostics: {}", failed.join(", "));
                Ok(ExitCode::from(1))
            }
        }
        Command::SerrinScan { domain, h, levels } => {
            let dom = parse_domain(&domain)?;
            let field = solve_cascadic(&dom, ProblemKind::Normalized, h, &SolverConfig::default())?;
            let mu = field.max_value();
            let ms: Vec<f64> = levels.iter().map(|f| f * mu).collect();
            let reports = level_set_serrin_scan(&field, &ms)
                .map_err(|e| HarnessError::Schema(e.to_string()))?;
            println!("{:>10} {:>10} {:>10} {:>10} {:>10}", "m", "target", "mean", "spread", "mismatch");
            for r in &reports {
                if r.skipped_empty {
                    println!("{:>10.5} (empty level set, skipped)", r.m);
                } else {
                    println!(
                        "{:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
                        r.m, r.target, r.grad_summary.mean, r.grad_summary.spread, r.mismatch
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Supconv { domain, h, eps } => {
            let dom = parse_domain(&domain)?;
            let field = solve_cascadic(&dom, ProblemKind::Normalized, h, &SolverConfig::default())?;
            let eps = eps.unwrap_or(4.0 * h);
            let rho = dom.inradius().0;
            let b = sup_convolution(&field, eps, rho);
            println!("eps = {eps}, lip = {}, reach = {}", b.lip, b.reach);
            println!("empty A_eps: {}", b.empty);
            println!("m_eps = {}", b.m_eps);
            println!(
                "worst second difference = {} (floor {})",
                b.worst_second_difference(),
                -h * h / eps
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Flow {
            domain,
            h,
            start,
            dt,
            t_max,
        } => {
            let dom = parse_domain(&domain)?;
            let field = solve_cascadic(&dom, ProblemKind::Normalized, h, &SolverConfig::default())?;
            let ctx = FlowContext::new(&field);
            let rho = dom.inradius().0;
            let traj = gradient_flow(&ctx, [start[0], start[1]], dt, t_max, h)
                .map_err(|e| HarnessError::Schema(e.to_string()))?;
            let law = p_along_flow(&traj, WebProfile::normalized(rho).p_constant());
            println!(
                "steps = {}, termination = {:?}, end = {:?}",
                traj.steps.len(),
                traj.termination,
                traj.end()
            );
            println!(
                "value-law residual = {}, max P deviation = {}, worst decrease = {}",
                law.ode_residual, law.max_p_deviation, law.worst_decrease
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Convergence { domain, problem, hs } => {
            let dom = parse_domain(&domain)?;
            let rows = convergence_study(&dom, problem.into(), &hs, &SolverConfig::default())?;
            println!("{:>12} {:>14} {:>8}", "h", "sup_error", "order");
            for r in &rows {
                println!("{:>12.6} {:>14.6e} {:>8.3}", r.h, r.sup_error, r.order);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ParallelBody { domain, eps, h } => {
            let dom = parse_domain(&domain)?;
            let report = parallel_body_convergence(&dom, &eps, h, &SolverConfig::default())?;
            println!("{:>8} {:>14} {:>14}", "eps", "boundary_max", "bound");
            for r in &report.rows {
                println!("{:>8.4} {:>14.6} {:>14.6}", r.eps, r.boundary_max, r.bound);
            }
            if report.pass {
                println!("bound holds and decreases along the ladder");
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("parallel-body bound violated");
                Ok(ExitCode::from(1))
            }
        }
        Command::TheoremMap => {
            for (statement, diags) in theorem_map() {
                println!("{statement}\n    -> {diags}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_report(report: &harness::CampaignReport) {
    println!(
        "scenario {}: {} ({} sweeps at h = {})",
        report.scenario,
        match report.problem {
            ProblemKind::Normalized => "normalized",
            ProblemKind::NonNormalized => "non-normalized",
        },
        report.solver_iterations,
        report.h
    );
    for v in &report.verdicts {
        let status = match v.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "info",
        };
        println!("  [{status}] {}", v.name);
    }
    for d in &report.fixture_deltas {
        println!("  fixture drift: {d}");
    }
}
