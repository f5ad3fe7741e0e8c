//! Implicit BDF1/BDF2 integration of `M ċ = F(t, c)` with a constant,
//! possibly singular mass matrix `M`.
//!
//! Each step solves the BDF equation by Newton's method with an LU-factorized
//! iteration matrix `(γ/h) M − ∂F/∂c`. BDF1 controls the step by step
//! doubling; BDF2 starts with one doubled BDF1 step and then estimates the
//! local error from the distance between the corrector and a quadratic
//! predictor through the last three accepted states.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::densela::{lu_factor, norm_inf, LuFactors, Matrix};
use crate::error::{Error, Result};
use crate::mol::{ProblemDef, SemiDiscrete};

/// A semi-explicit DAE `M ċ = F(t, c)`.
pub trait DaeSystem {
    fn dim(&self) -> usize;
    fn mass(&self) -> &Matrix;
    fn rhs(&self, t: f64, c: &[f64]) -> Result<Vec<f64>>;
    fn jacobian(&self, t: f64, c: &[f64]) -> Result<Matrix>;

    /// Quantities on which error and Newton tests are made. Defaults to the
    /// state itself.
    fn observe(&self, c: &[f64]) -> Vec<f64> {
        c.to_vec()
    }
}

/// The kernel MOL system of one collocation set.
pub struct MolSystem<'a> {
    pub sd: &'a SemiDiscrete,
    pub problem: &'a ProblemDef,
}

impl DaeSystem for MolSystem<'_> {
    fn dim(&self) -> usize {
        self.sd.len()
    }

    fn mass(&self) -> &Matrix {
        &self.sd.mass
    }

    fn rhs(&self, t: f64, c: &[f64]) -> Result<Vec<f64>> {
        self.sd.rhs(self.problem, t, c)
    }

    fn jacobian(&self, t: f64, c: &[f64]) -> Result<Matrix> {
        self.sd.rhs_jacobian(self.problem, t, c)
    }

    /// Nodal values `K c`: the coefficients themselves are not meaningful
    /// individually once `K` is ill-conditioned.
    fn observe(&self, c: &[f64]) -> Vec<f64> {
        self.sd.k_id.mul_vec(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BdfMethod {
    Bdf1,
    Bdf2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: BdfMethod,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Newton stops once the weighted update norm falls below this.
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: BdfMethod::Bdf2,
            rel_tol: 1e-6,
            abs_tol: 1e-8,
            newton_tol: 1e-3,
            newton_max_iters: 8,
            initial_step: 1e-4,
            min_step: 1e-12,
            max_step: 0.1,
        }
    }
}

impl IntegratorConfig {
    /// Fixed step `h` with the given method (error control disabled).
    pub fn fixed(method: BdfMethod, h: f64) -> Self {
        IntegratorConfig {
            method,
            initial_step: h,
            min_step: h,
            max_step: h,
            ..IntegratorConfig::default()
        }
    }

    pub fn is_fixed_step(&self) -> bool {
        self.min_step == self.max_step
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.min_step > 0.0
            && self.min_step <= self.initial_step
            && self.initial_step <= self.max_step
            && self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.newton_tol > 0.0
            && self.newton_max_iters > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("inconsistent integrator settings: {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub c_end: Vec<f64>,
    pub steps_taken: usize,
    pub newton_iters_total: usize,
    pub last_step: f64,
    pub rejected_steps: usize,
}

/// Advances the kernel MOL system of `sd` from `t_start` to `t_end`.
pub fn integrate(
    sd: &SemiDiscrete,
    problem: &ProblemDef,
    c_start: &[f64],
    t_start: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<StepResult> {
    integrate_system(&MolSystem { sd, problem }, c_start, t_start, t_end, cfg)
}

/// Coefficients whose interior nodal values match those of `c_guess` and
/// whose boundary rows satisfy the Dirichlet data at `t` exactly.
pub fn consistent_initialize(
    sd: &SemiDiscrete,
    problem: &ProblemDef,
    c_guess: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    let n = sd.len();
    if c_guess.len() != n {
        return Err(Error::invalid(format!(
            "guess has length {}, expected {n}",
            c_guess.len()
        )));
    }
    let [ra, rb] = sd.boundary_residuals(problem, t, c_guess);
    if ra == 0.0 && rb == 0.0 {
        return Ok(c_guess.to_vec());
    }
    // For Dirichlet rows the constraint row is the trace row of K, so the
    // system matrix is K itself with the boundary targets on the right.
    let mut u = sd.k_id.mul_vec(c_guess);
    u[0] = -problem.bc[0].g(t);
    u[n - 1] = -problem.bc[1].g(t);
    sd.k_id_factors.solve(&u)
}

struct Newton<'s, S: DaeSystem> {
    sys: &'s S,
    cfg: &'s IntegratorConfig,
    jac: Option<Matrix>,
    jac_step: f64,
    /// Newton solves started since the Jacobian was evaluated.
    jac_age: usize,
    /// Factored iteration matrix and the `γ/h` it was built for.
    iter_matrix: Option<(f64, LuFactors)>,
    iters_total: usize,
}

enum NewtonOutcome {
    Converged { c: Vec<f64>, iters: usize },
    Failed { residual: f64 },
}

impl<'s, S: DaeSystem> Newton<'s, S> {
    fn refresh_jacobian(&mut self, t: f64, c: &[f64], h: f64) -> Result<()> {
        self.jac = Some(self.sys.jacobian(t, c)?);
        self.jac_step = h;
        self.jac_age = 0;
        self.iter_matrix = None;
        Ok(())
    }

    /// Like [`Self::refresh_jacobian`], but reports overflow as `false`.
    fn try_refresh(&mut self, t: f64, c: &[f64], h: f64) -> Result<bool> {
        match self.refresh_jacobian(t, c, h) {
            Ok(()) => Ok(true),
            Err(Error::NumericOverflow { .. }) => {
                self.jac = None;
                Ok(false)
            }
            Err(e) => Err(e),
        }
    }

    fn factor(&mut self, gamma_over_h: f64) -> Result<()> {
        if let Some((g, _)) = &self.iter_matrix {
            if *g == gamma_over_h {
                return Ok(());
            }
        }
        let jac = self.jac.as_ref().expect("jacobian computed before factoring");
        let mass = self.sys.mass();
        let n = self.sys.dim();
        let m = Matrix::from_fn(n, n, |i, j| gamma_over_h * mass[(i, j)] - jac[(i, j)]);
        let lu = lu_factor(&m)?;
        self.iter_matrix = Some((gamma_over_h, lu));
        Ok(())
    }

    /// Solves `M (γ c − ψ) / h = F(t, c)` starting from `guess`. A failure
    /// with a reused Jacobian triggers one retry with a fresh one.
    fn solve(
        &mut self,
        t: f64,
        h: f64,
        gamma: f64,
        psi: &[f64],
        guess: &[f64],
        weights: &[f64],
    ) -> Result<NewtonOutcome> {
        let overflowed = NewtonOutcome::Failed {
            residual: f64::INFINITY,
        };
        let stale = self.jac.is_none() || (h / self.jac_step).max(self.jac_step / h) > 2.0;
        if stale && !self.try_refresh(t, guess, h)? {
            return Ok(overflowed);
        }
        let mut fresh = self.jac_age == 0;
        loop {
            self.jac_age += 1;
            let outcome = match self.factor(gamma / h) {
                Ok(()) => self.iterate(t, h, gamma, psi, guess, weights)?,
                // A zero pivot, or non-finite entries from an overflowing Jacobian.
                Err(Error::SingularMatrix { .. } | Error::InvalidInput(_)) => NewtonOutcome::Failed {
                    residual: f64::INFINITY,
                },
                Err(e) => return Err(e),
            };
            match outcome {
                NewtonOutcome::Converged { iters, .. } if iters > 4 => {
                    self.jac = None;
                    return Ok(outcome);
                }
                NewtonOutcome::Failed { .. } if !fresh => {
                    if !self.try_refresh(t, guess, h)? {
                        return Ok(overflowed);
                    }
                    fresh = true;
                }
                _ => return Ok(outcome),
            }
        }
    }

    fn iterate(
        &mut self,
        t: f64,
        h: f64,
        gamma: f64,
        psi: &[f64],
        guess: &[f64],
        weights: &[f64],
    ) -> Result<NewtonOutcome> {
        let mass = self.sys.mass();
        let (_, lu) = self.iter_matrix.as_ref().expect("factored");
        let mut c = guess.to_vec();
        let mut prev_norm = f64::INFINITY;
        for it in 1..=self.cfg.newton_max_iters {
            self.iters_total += 1;
            let f = match self.sys.rhs(t, &c) {
                Ok(f) => f,
                Err(Error::NumericOverflow { .. }) => {
                    return Ok(NewtonOutcome::Failed {
                        residual: f64::INFINITY,
                    })
                }
                Err(e) => return Err(e),
            };
            let z: Vec<f64> = c.iter().zip(psi).map(|(ci, pi)| gamma * ci - pi).collect();
            let mz = mass.mul_vec(&z);
            let neg_g: Vec<f64> = mz.iter().zip(&f).map(|(m, fi)| fi - m / h).collect();
            let delta = lu.solve(&neg_g)?;
            c.iter_mut().zip(&delta).for_each(|(ci, d)| *ci += d);
            if c.iter().any(|v| !v.is_finite()) {
                return Ok(NewtonOutcome::Failed {
                    residual: f64::INFINITY,
                });
            }
            let norm = weighted_norm(&self.sys.observe(&delta), weights);
            let rate = norm / prev_norm;
            if norm <= self.cfg.newton_tol
                || (it > 1 && rate < 1.0 && norm * rate / (1.0 - rate) <= self.cfg.newton_tol)
            {
                return Ok(NewtonOutcome::Converged { c, iters: it });
            }
            if it > 1 && rate > 0.9 {
                return Ok(NewtonOutcome::Failed { residual: norm });
            }
            prev_norm = norm;
        }
        Ok(NewtonOutcome::Failed {
            residual: prev_norm,
        })
    }
}

fn weighted_norm(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(x, s)| (x / s).abs()).fold(0.0, f64::max)
}

fn error_weights(cfg: &IntegratorConfig, a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| cfg.abs_tol + cfg.rel_tol * x.abs().max(y.abs()))
        .collect()
}

/// Quadratic extrapolation of `(t_i, y_i)` to `t`.
fn extrapolate(hist: &[(f64, Vec<f64>)], t: f64) -> Vec<f64> {
    let k = hist.len();
    let (t0, y0) = (&hist[k - 3].0, &hist[k - 3].1);
    let (t1, y1) = (&hist[k - 2].0, &hist[k - 2].1);
    let (t2, y2) = (&hist[k - 1].0, &hist[k - 1].1);
    let l0 = (t - t1) * (t - t2) / ((t0 - t1) * (t0 - t2));
    let l1 = (t - t0) * (t - t2) / ((t1 - t0) * (t1 - t2));
    let l2 = (t - t0) * (t - t1) / ((t2 - t0) * (t2 - t1));
    (0..y0.len())
        .map(|i| l0 * y0[i] + l1 * y1[i] + l2 * y2[i])
        .collect()
}

/// Integrates a general [`DaeSystem`] from `t_start` to exactly `t_end`.
pub fn integrate_system<S: DaeSystem>(
    sys: &S,
    c_start: &[f64],
    t_start: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<StepResult> {
    cfg.validate()?;
    if !(t_start < t_end) {
        return Err(Error::invalid(format!(
            "integration window [{t_start}, {t_end}] is empty"
        )));
    }
    if c_start.len() != sys.dim() {
        return Err(Error::invalid(format!(
            "initial state has length {}, expected {}",
            c_start.len(),
            sys.dim()
        )));
    }
    if c_start.iter().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp { t: t_start });
    }

    let fixed = cfg.is_fixed_step();
    let mut newton = Newton {
        sys,
        cfg,
        jac: None,
        jac_step: cfg.initial_step,
        jac_age: 0,
        iter_matrix: None,
        iters_total: 0,
    };
    let mut t = t_start;
    let mut c = c_start.to_vec();
    let mut obs = sys.observe(&c);
    let mut hist: Vec<(f64, Vec<f64>)> = vec![(t, c.clone())];
    let mut h = cfg.initial_step;
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut last_step = h;

    while t < t_end {
        let remaining = t_end - t;
        let h_try = if remaining - h <= 0.01 * h { remaining } else { h };
        let at_floor = h_try <= cfg.min_step;
        let use_bdf2 = cfg.method == BdfMethod::Bdf2 && hist.len() >= 3;

        let attempt = if use_bdf2 {
            bdf2_step(&mut newton, cfg, &hist, h_try, &obs)?
        } else {
            bdf1_doubling_step(&mut newton, cfg, t, &c, h_try, &obs)?
        };

        match attempt {
            Attempt::Accepted {
                states,
                err,
                order,
            } => {
                if err > 1.0 && !fixed && !at_floor {
                    rejected += 1;
                    h = shrink(h_try, err, order);
                    debug!("error test failed at t={t:e}, h={h_try:e}, err={err:.3}");
                    continue;
                }
                if err > 1.0 && !fixed {
                    return Err(Error::StiffFailure {
                        t,
                        step: h_try,
                        residual: err,
                    });
                }
                for (ts, cs) in states {
                    hist.push((ts, cs));
                }
                let keep = hist.len().saturating_sub(3);
                hist.drain(..keep);
                let (tn, cn) = hist.last().cloned().expect("history is non-empty");
                t = if tn >= t_end { t_end } else { tn };
                c = cn;
                obs = sys.observe(&c);
                if obs.iter().any(|v| !v.is_finite()) {
                    return Err(Error::BlowUp { t });
                }
                steps += 1;
                last_step = h_try;
                if !fixed {
                    h = grow(h_try, err, order).clamp(cfg.min_step, cfg.max_step);
                }
            }
            Attempt::NewtonFailed { residual } => {
                if fixed || at_floor {
                    if residual.is_infinite() {
                        return Err(Error::BlowUp { t });
                    }
                    return Err(Error::StiffFailure {
                        t,
                        step: h_try,
                        residual,
                    });
                }
                rejected += 1;
                h = (0.25 * h_try).max(cfg.min_step);
            }
        }
    }

    Ok(StepResult {
        c_end: c,
        steps_taken: steps,
        newton_iters_total: newton.iters_total,
        last_step,
        rejected_steps: rejected,
    })
}

enum Attempt {
    /// States to append to the history (time order) and the scaled error.
    Accepted {
        states: Vec<(f64, Vec<f64>)>,
        err: f64,
        order: u32,
    },
    NewtonFailed {
        residual: f64,
    },
}

fn grow(h: f64, err: f64, order: u32) -> f64 {
    let fac = if err == 0.0 {
        4.0
    } else {
        (0.9 * err.powf(-1.0 / (order as f64 + 1.0))).clamp(0.2, 4.0)
    };
    // Small increases are not worth refactoring the iteration matrix.
    if (1.0..1.2).contains(&fac) {
        h
    } else {
        h * fac
    }
}

fn shrink(h: f64, err: f64, order: u32) -> f64 {
    h * (0.9 * err.powf(-1.0 / (order as f64 + 1.0))).clamp(0.1, 0.5)
}

fn bdf1_doubling_step<S: DaeSystem>(
    newton: &mut Newton<'_, S>,
    cfg: &IntegratorConfig,
    t: f64,
    c: &[f64],
    h: f64,
    obs: &[f64],
) -> Result<Attempt> {
    let w0 = error_weights(cfg, obs, obs);
    let full = match newton.solve(t + h, h, 1.0, c, c, &w0)? {
        NewtonOutcome::Converged { c, .. } => c,
        NewtonOutcome::Failed { residual } => return Ok(Attempt::NewtonFailed { residual }),
    };
    let half = 0.5 * h;
    let mid = match newton.solve(t + half, half, 1.0, c, c, &w0)? {
        NewtonOutcome::Converged { c, .. } => c,
        NewtonOutcome::Failed { residual } => return Ok(Attempt::NewtonFailed { residual }),
    };
    let end = match newton.solve(t + h, half, 1.0, &mid, &mid, &w0)? {
        NewtonOutcome::Converged { c, .. } => c,
        NewtonOutcome::Failed { residual } => return Ok(Attempt::NewtonFailed { residual }),
    };
    let o_end = newton.sys.observe(&end);
    let o_full = newton.sys.observe(&full);
    let diff: Vec<f64> = o_end.iter().zip(&o_full).map(|(a, b)| a - b).collect();
    let err = weighted_norm(&diff, &error_weights(cfg, obs, &o_end));
    Ok(Attempt::Accepted {
        states: vec![(t + half, mid), (t + h, end)],
        err,
        order: 1,
    })
}

fn bdf2_step<S: DaeSystem>(
    newton: &mut Newton<'_, S>,
    cfg: &IntegratorConfig,
    hist: &[(f64, Vec<f64>)],
    h: f64,
    obs: &[f64],
) -> Result<Attempt> {
    let k = hist.len();
    let (t_nm2, _) = &hist[k - 3];
    let (t_nm1, c_nm1) = &hist[k - 2];
    let (t_n, c_n) = &hist[k - 1];
    let h1 = t_n - t_nm1;
    let h2 = t_nm1 - t_nm2;
    let omega = h / h1;
    let gamma = (1.0 + 2.0 * omega) / (1.0 + omega);
    let psi: Vec<f64> = c_n
        .iter()
        .zip(c_nm1)
        .map(|(a, b)| (1.0 + omega) * a - omega * omega / (1.0 + omega) * b)
        .collect();
    let t_new = t_n + h;
    let pred = extrapolate(hist, t_new);
    let w = error_weights(cfg, obs, obs);
    let corr = match newton.solve(t_new, h, gamma, &psi, &pred, &w)? {
        NewtonOutcome::Converged { c, .. } => c,
        NewtonOutcome::Failed { residual } => return Ok(Attempt::NewtonFailed { residual }),
    };
    // Local error constants of the corrector and of the predictor.
    let lte = h * h * (h + h1).powi(2) / (6.0 * (2.0 * h + h1));
    let pte = h * (h + h1) * (h + h1 + h2) / 6.0;
    let ratio = lte / (lte + pte);
    let o_corr = newton.sys.observe(&corr);
    let o_pred = newton.sys.observe(&pred);
    let diff: Vec<f64> = o_corr
        .iter()
        .zip(&o_pred)
        .map(|(a, b)| ratio * (a - b))
        .collect();
    let err = weighted_norm(&diff, &error_weights(cfg, obs, &o_corr));
    Ok(Attempt::Accepted {
        states: vec![(t_new, corr)],
        err,
        order: 2,
    })
}

/// Largest nodal Dirichlet violation of a coefficient vector.
pub fn boundary_drift(sd: &SemiDiscrete, problem: &ProblemDef, t: f64, c: &[f64]) -> f64 {
    norm_inf(&sd.boundary_residuals(problem, t, c))
}
