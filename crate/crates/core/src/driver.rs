//! Adaptive time marching: integrate one level, re-refine the collocation
//! set against the new solution, transfer the solution, repeat.

use std::fmt;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::dae::{consistent_initialize, integrate, IntegratorConfig};
use crate::densela::cond2;
use crate::error::{Error, Result};
use crate::interp::{fit, loocv_deviation, Interpolant};
use crate::kernel::Deriv;
use crate::mol::{assemble, nodal_values, ProblemDef, SemiDiscrete};
use crate::refine::{refine_loop, PointSet, RefineConfig, RefineOutcome, RefineStatus};

/// Largest tolerated mismatch between the closed-form and brute-force LOOCV
/// errors when oracle checks are on, relative to the largest indicator.
pub const LOOCV_CHECK_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub n_init: usize,
    /// Number of time levels including the initial one.
    pub m_levels: usize,
    pub refine: RefineConfig,
    pub integ: IntegratorConfig,
    pub eps0: f64,
    /// Re-refine from the uniform base grid at every level instead of
    /// inserting into the previous level's set.
    pub restart_from_base: bool,
    /// Cross-check the LOOCV indicator against brute force at every level.
    #[serde(default)]
    pub check_loocv: bool,
}

impl AdaptiveConfig {
    pub fn new(problem: &ProblemDef, tau: f64, eps0: f64, n_init: usize, m_levels: usize) -> Self {
        AdaptiveConfig {
            n_init,
            m_levels,
            refine: RefineConfig::new(tau, problem.b - problem.a),
            integ: IntegratorConfig::default(),
            eps0,
            restart_from_base: true,
            check_loocv: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init < 3 {
            return Err(Error::invalid(format!("n_init must be >= 3, got {}", self.n_init)));
        }
        if self.m_levels < 2 {
            return Err(Error::invalid(format!(
                "m_levels counts the initial level and must be >= 2, got {}",
                self.m_levels
            )));
        }
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(Error::invalid(format!("eps0 must be positive, got {}", self.eps0)));
        }
        if self.refine.max_points < self.n_init {
            return Err(Error::invalid("max_points is below the initial point count"));
        }
        self.refine.validate()?;
        self.integ.validate()
    }

    /// `t_n = t0 + n (T − t0) / (M − 1)` for `n = 0..M`.
    pub fn time_levels(&self, problem: &ProblemDef) -> Vec<f64> {
        let m = self.m_levels - 1;
        let dt = (problem.t_final - problem.t0) / m as f64;
        let mut ts: Vec<f64> = (0..=m).map(|n| problem.t0 + n as f64 * dt).collect();
        ts[m] = problem.t_final;
        ts
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub t: f64,
    pub n_fin: usize,
    pub refine_iters: usize,
    pub refine_status: RefineStatus,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub max_indicator: f64,
    pub rmse: Option<f64>,
    /// 2-norm condition number of the interpolation matrix on the final set.
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub cond: f64,
    pub cpu_seconds: f64,
    pub integ_steps: usize,
    pub points: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    Failed { level: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    pub nu: f64,
    pub t0: f64,
    pub t_final: f64,
    pub config: AdaptiveConfig,
    pub levels: Vec<LevelRecord>,
    pub termination: Termination,
}

impl RunReport {
    /// The record whose time is closest to `t`.
    pub fn level_near(&self, t: f64) -> Option<&LevelRecord> {
        self.levels
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }

    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }
}

/// A failed run: the records gathered before the error, and the error.
#[derive(Debug)]
pub struct Failure {
    pub partial: RunReport,
    pub error: Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "run stopped after {} level(s): {}",
            self.partial.levels.len(),
            self.error
        )
    }
}

impl std::error::Error for Failure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

pub fn rmse_at(points: &[f64], approx: &[f64], exact: impl Fn(f64, f64) -> f64, t: f64) -> f64 {
    let n = points.len();
    let sum: f64 = points
        .iter()
        .zip(approx)
        .map(|(&x, &u)| (exact(x, t) - u).powi(2))
        .sum();
    (sum / n as f64).sqrt()
}

/// State carried between levels.
struct Carry {
    sd: SemiDiscrete,
    c: Vec<f64>,
}

struct Marcher<'p> {
    problem: &'p ProblemDef,
    cfg: AdaptiveConfig,
    base: PointSet,
    integ: IntegratorConfig,
}

impl Marcher<'_> {
    fn refine(&self, start: &PointSet, provider: impl FnMut(&PointSet) -> Result<Vec<f64>>) -> Result<RefineOutcome> {
        let out = refine_loop(start, provider, self.cfg.eps0, &self.cfg.refine)?;
        if out.status != RefineStatus::Converged {
            warn!(
                "refinement stopped ({:?}) with max indicator {:e} > tau {:e}",
                out.status, out.max_indicator, self.cfg.refine.tau
            );
        }
        if self.cfg.check_loocv {
            let dev = loocv_deviation(&out.interpolant, &out.values, self.cfg.eps0)?;
            if !(dev <= LOOCV_CHECK_TOL) {
                return Err(Error::OracleMismatch { deviation: dev });
            }
        }
        Ok(out)
    }

    /// Moves the refined solution onto its final set; reuses the current
    /// system untouched when the set did not change.
    fn transfer(&self, prev: Option<Carry>, out: &RefineOutcome, t: f64) -> Result<Carry> {
        if let Some(prev) = prev {
            if prev.sd.points == out.points {
                return Ok(prev);
            }
        }
        let sd = assemble(self.problem, &out.points, self.cfg.eps0)?;
        let c = consistent_initialize(&sd, self.problem, out.interpolant.alpha(), t)?;
        Ok(Carry { sd, c })
    }

    fn record(&self, level: usize, t: f64, out: &RefineOutcome, cpu: f64, steps: usize) -> LevelRecord {
        let points = out.points.as_slice().to_vec();
        let rmse = self
            .problem
            .exact
            .as_ref()
            .map(|u| rmse_at(&points, &out.values, |x, t| u(x, t), t));
        LevelRecord {
            level,
            t,
            n_fin: points.len(),
            refine_iters: out.iters,
            refine_status: out.status,
            max_indicator: out.max_indicator,
            rmse,
            cond: cond2(out.interpolant.matrix()),
            cpu_seconds: cpu,
            integ_steps: steps,
            points,
            values: out.values.clone(),
        }
    }
}

/// Runs the adaptive kernel method of lines over all time levels.
pub fn solve_adaptive(problem: &ProblemDef, cfg: &AdaptiveConfig) -> std::result::Result<RunReport, Failure> {
    let mut report = RunReport {
        problem: problem.name.clone(),
        nu: problem.nu,
        t0: problem.t0,
        t_final: problem.t_final,
        config: *cfg,
        levels: Vec::new(),
        termination: Termination::Completed,
    };
    let fail = |mut report: RunReport, level: usize, error: Error| {
        let error = error.at_level(level);
        report.termination = Termination::Failed {
            level,
            message: error.to_string(),
        };
        Failure {
            partial: report,
            error,
        }
    };
    if let Err(e) = problem.validate().and_then(|_| cfg.validate()) {
        return Err(fail(report, 0, e));
    }
    let base = match PointSet::uniform(problem.a, problem.b, cfg.n_init) {
        Ok(b) => b,
        Err(e) => return Err(fail(report, 0, e)),
    };
    let mut marcher = Marcher {
        problem,
        cfg: *cfg,
        base,
        integ: cfg.integ,
    };
    let times = cfg.time_levels(problem);

    // Level 0 refines the initial profile itself.
    let clock = Instant::now();
    let level0 = marcher
        .refine(&marcher.base, |ps| Ok(ps.iter().map(|&x| (problem.u0)(x)).collect()))
        .and_then(|out| {
            let carry = marcher.transfer(None, &out, times[0])?;
            Ok((out, carry))
        });
    let (out, mut carry) = match level0 {
        Ok(v) => v,
        Err(e) => return Err(fail(report, 0, e)),
    };
    let cpu = clock.elapsed().as_secs_f64();
    report.levels.push(marcher.record(0, times[0], &out, cpu, 0));

    for (level, w) in times.windows(2).enumerate().map(|(i, w)| (i + 1, w)) {
        let (t_prev, t_n) = (w[0], w[1]);
        let clock = Instant::now();
        let step = (|| -> Result<(RefineOutcome, Carry, usize)> {
            let res = integrate(&carry.sd, problem, &carry.c, t_prev, t_n, &marcher.integ)?;
            let u_hat = nodal_values(&carry.sd, &res.c_end);
            let s_n: Interpolant = fit(&carry.sd.points, &u_hat, cfg.eps0)?;
            let start = if cfg.restart_from_base {
                marcher.base.clone()
            } else {
                carry.sd.points.clone()
            };
            let out = marcher.refine(&start, |ps| Ok(s_n.eval_many(ps.as_slice(), Deriv::Id)))?;
            let next = Carry {
                sd: carry.sd.clone(),
                c: res.c_end,
            };
            let next = marcher.transfer(Some(next), &out, t_n)?;
            Ok((out, next, res.steps_taken))
        })();
        match step {
            Ok((out, next, steps)) => {
                let cpu = clock.elapsed().as_secs_f64();
                marcher.integ.initial_step = next_initial_step(&marcher.integ, t_n - t_prev, steps);
                carry = next;
                let rec = marcher.record(level, t_n, &out, cpu, steps);
                info!(
                    "level {level}: t={t_n:.4} N={} iters={} rmse={:?} cpu={cpu:.3}s steps={steps}",
                    rec.n_fin, rec.refine_iters, rec.rmse
                );
                report.levels.push(rec);
            }
            Err(e) => return Err(fail(report, level, e)),
        }
    }
    Ok(report)
}

/// Starting step for the next level: the average accepted step of the last
/// one, kept inside the configured bounds.
fn next_initial_step(cfg: &IntegratorConfig, span: f64, steps: usize) -> f64 {
    if cfg.is_fixed_step() || steps == 0 {
        return cfg.initial_step;
    }
    (span / steps as f64).clamp(cfg.min_step, cfg.max_step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn rmse_examples() {
        let pts = [0.0, 0.5, 1.0];
        let exact = |x: f64, t: f64| x * t;
        let vals: Vec<f64> = pts.iter().map(|&x| x * 2.0).collect();
        assert_eq!(rmse_at(&pts, &vals, exact, 2.0), 0.0);
        let off: Vec<f64> = vals.iter().map(|v| v + 0.3).collect();
        assert!((rmse_at(&pts, &off, exact, 2.0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn time_levels_include_both_ends() {
        let p = crate::problems::burgers_shock();
        let cfg = AdaptiveConfig::new(&p, 1e-4, 0.75, 13, 51);
        let ts = cfg.time_levels(&p);
        assert_eq!(ts.len(), 51);
        assert_eq!(ts[0], 1.0);
        assert_eq!(ts[50], 3.0);
        assert!((ts[10] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let p = crate::problems::burgers_shock();
        let mut cfg = AdaptiveConfig::new(&p, 1e-4, 0.75, 2, 51);
        assert!(cfg.validate().is_err());
        cfg.n_init = 13;
        cfg.m_levels = 1;
        assert!(cfg.validate().is_err());
        cfg.m_levels = 5;
        cfg.refine.tau = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn invalid_config_returns_empty_partial_report() {
        let p = crate::problems::burgers_shock();
        let cfg = AdaptiveConfig::new(&p, 0.0, 0.75, 13, 5);
        let f = solve_adaptive(&p, &cfg).unwrap_err();
        assert!(f.partial.levels.is_empty());
        assert!(matches!(f.partial.termination, Termination::Failed { level: 0, .. }));
    }

    #[test]
    fn stationary_linear_profile_stays_put() {
        // u = x + 1 is harmonic, so u_t = ν u_xx with matching Dirichlet data is static.
        let p = ProblemDef {
            name: "static".into(),
            a: 0.0,
            b: 1.0,
            t0: 0.0,
            t_final: 0.5,
            nu: 0.1,
            pde_rhs: Arc::new(|l| 0.1 * l.uxx),
            bc: [
                crate::mol::BoundaryCondition::dirichlet_const(1.0),
                crate::mol::BoundaryCondition::dirichlet_const(2.0),
            ],
            u0: Arc::new(|x| x + 1.0),
            exact: Some(Arc::new(|x, _| x + 1.0)),
        };
        let cfg = AdaptiveConfig::new(&p, 1e-3, 0.75, 9, 6);
        let report = solve_adaptive(&p, &cfg).unwrap();
        let first = &report.levels[0].points;
        for rec in &report.levels {
            assert_eq!(&rec.points, first);
            // The kernel space does not contain linear functions, so the
            // discrete steady state is only close to the true one.
            assert!(rec.rmse.unwrap() <= 2e-4, "rmse {:?}", rec.rmse);
        }
    }
}
