use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use kernmol::output::{summary_table, write_all, Formats};
use kernmol::{solve_adaptive, AdaptiveConfig, BdfMethod, BenchmarkId, BenchmarkOptions, ProblemDef, RunReport};

const SEED_CHECKS_ENV: &str = "KERNMOL_SEED_CHECKS";

/// Times shown in the summary table for each benchmark.
fn summary_times(id: BenchmarkId) -> Vec<f64> {
    match id {
        BenchmarkId::BurgersShock => vec![1.4, 1.8, 2.2, 2.6, 3.0],
        BenchmarkId::BurgersMovingFront => vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        BenchmarkId::AllenCahn => vec![0.0, 2.0, 4.0, 6.0, 8.0, 8.25],
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "kernmol",
    version,
    about = "Adaptive kernel method of lines for 1D evolution problems",
    allow_negative_numbers = true
)]
struct Cli {
    #[arg(long, value_parser = parse_problem)]
    problem: BenchmarkId,
    /// Refinement threshold on the LOOCV indicator.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    eps0: Option<f64>,
    #[arg(long)]
    n_init: Option<usize>,
    /// Number of output time levels, counting the initial one.
    #[arg(long)]
    m_levels: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Refine each level starting from the previous set instead of the uniform base grid.
    #[arg(long)]
    no_restart: bool,
    /// Use the reaction term u(1 + u²) for allen-cahn.
    #[arg(long)]
    literal_allen_cahn_sign: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "csv,json")]
    format: Formats,
    /// Run one solve per threshold, writing each into `<out>/tau_<value>`.
    #[arg(long, value_delimiter = ',')]
    sweep_tau: Vec<f64>,
    #[arg(long, value_parser = parse_method)]
    method: Option<BdfMethod>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    newton_tol: Option<f64>,
    #[arg(long)]
    initial_step: Option<f64>,
    #[arg(long)]
    min_step: Option<f64>,
    #[arg(long)]
    max_step: Option<f64>,
    /// Refinement budget on the number of points.
    #[arg(long)]
    max_points: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
}

fn parse_problem(s: &str) -> Result<BenchmarkId, String> {
    s.parse()
}

fn parse_method(s: &str) -> Result<BdfMethod, String> {
    match s {
        "bdf1" => Ok(BdfMethod::Bdf1),
        "bdf2" => Ok(BdfMethod::Bdf2),
        other => Err(format!("unknown method '{other}' (expected bdf1 or bdf2)")),
    }
}

impl Cli {
    fn problem_def(&self) -> ProblemDef {
        self.problem.build(&BenchmarkOptions {
            nu: self.nu,
            t_final: self.t_final,
            literal_allen_cahn_sign: self.literal_allen_cahn_sign,
        })
    }

    fn config(&self, problem: &ProblemDef, tau: f64) -> AdaptiveConfig {
        let d = self.problem.defaults();
        let mut cfg = AdaptiveConfig::new(
            problem,
            tau,
            self.eps0.unwrap_or(d.eps0),
            self.n_init.unwrap_or(d.n_init),
            self.m_levels.unwrap_or(d.m_levels),
        );
        cfg.restart_from_base = !self.no_restart;
        cfg.check_loocv = std::env::var(SEED_CHECKS_ENV).is_ok_and(|v| v == "1");
        if let Some(v) = self.max_points {
            cfg.refine.max_points = v;
        }
        if let Some(v) = self.max_iters {
            cfg.refine.max_iters = v;
        }
        let i = &mut cfg.integ;
        if let Some(m) = self.method {
            i.method = m;
        }
        for (dst, src) in [
            (&mut i.rel_tol, self.rel_tol),
            (&mut i.abs_tol, self.abs_tol),
            (&mut i.newton_tol, self.newton_tol),
            (&mut i.initial_step, self.initial_step),
            (&mut i.min_step, self.min_step),
            (&mut i.max_step, self.max_step),
        ] {
            if let Some(v) = src {
                *dst = v;
            }
        }
        cfg
    }

    fn runs(&self, problem: &ProblemDef) -> Vec<(AdaptiveConfig, PathBuf)> {
        if self.sweep_tau.is_empty() {
            let tau = self.tau.unwrap_or(self.problem.defaults().tau);
            vec![(self.config(problem, tau), self.out.clone())]
        } else {
            self.sweep_tau
                .iter()
                .map(|&tau| (self.config(problem, tau), self.out.join(format!("tau_{tau:e}"))))
                .collect()
        }
    }
}

/// Runs one configuration and writes its outputs. Returns the exit status.
fn run_one(problem: &ProblemDef, cfg: &AdaptiveConfig, dir: &Path, formats: Formats) -> (u8, RunReport) {
    let (status, report) = match solve_adaptive(problem, cfg) {
        Ok(r) => (0, r),
        Err(f) => {
            eprintln!("error: {}", f.error);
            (1, f.partial)
        }
    };
    if let Err(e) = write_all(&report, problem, dir, formats) {
        eprintln!("error: writing outputs to {}: {e}", dir.display());
        return (1, report);
    }
    (status, report)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let problem = cli.problem_def();
    let runs = cli.runs(&problem);
    for (cfg, _) in &runs {
        if let Err(e) = problem.validate().and_then(|_| cfg.validate()) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }

    let results: Vec<(u8, RunReport)> = std::thread::scope(|s| {
        let handles: Vec<_> = runs
            .iter()
            .map(|(cfg, dir)| {
                let problem = &problem;
                s.spawn(move || run_one(problem, cfg, dir, cli.format))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });

    let times = summary_times(cli.problem);
    let mut status = 0;
    for (code, report) in &results {
        print!("{}", summary_table(report, &times));
        status = status.max(*code);
    }
    if results.len() > 1 {
        println!("\n{:>10} {:>6} {:>12}", "tau", "N_fin", "final RMSE");
        for (_, r) in &results {
            if let Some(last) = r.levels.last() {
                let rmse = last.rmse.map(|v| format!("{v:.2e}")).unwrap_or_else(|| "-".into());
                println!("{:>10.0e} {:>6} {:>12}", r.config.refine.tau, last.n_fin, rmse);
            }
        }
    }
    ExitCode::from(status)
}
