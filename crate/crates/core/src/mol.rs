//! Kernel method of lines: the solution is `û(x, t) = Σ_j c_j(t) κ_{ε_j}(x, x_j)`.
//!
//! Collocating the PDE at interior centers and the boundary operator at the
//! two endpoints gives the DAE `M ċ = F(t, c)` where the mass matrix `M`
//! carries the interior rows of the interpolation matrix and two zero rows.
//! Nonlinear operators are applied pointwise to nodal `u`, `u_x`, `u_xx`.

use std::fmt;
use std::sync::Arc;

use crate::densela::{LuFactors, Matrix};
use crate::error::{Error, Result};
use crate::interp::factor_checked;
use crate::kernel::{build_matrix, variable_shape, Deriv, ShapeVector};
use crate::refine::PointSet;

/// Local state handed to the pointwise right-hand side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Local {
    pub x: f64,
    pub t: f64,
    pub u: f64,
    pub ux: f64,
    pub uxx: f64,
}

/// `𝓛u + f` evaluated at one interior point.
pub type PdeRhs = Arc<dyn Fn(Local) -> f64 + Send + Sync>;
pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryCondition {
    /// `u(x_b, t) = target(t)`, i.e. `𝓑 = trace` and `g = -target`.
    Dirichlet { target: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl BoundaryCondition {
    pub fn dirichlet_const(value: f64) -> Self {
        BoundaryCondition::Dirichlet {
            target: Arc::new(move |_| value),
        }
    }

    /// `g(x_b, t)` in `0 = 𝓑u + g`.
    pub fn g(&self, t: f64) -> f64 {
        match self {
            BoundaryCondition::Dirichlet { target } => -target(t),
        }
    }

    /// `𝓑u + g` given the boundary value of `u`.
    pub fn residual(&self, u: f64, t: f64) -> f64 {
        match self {
            BoundaryCondition::Dirichlet { .. } => u + self.g(t),
        }
    }
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Dirichlet { .. } => f.write_str("Dirichlet"),
        }
    }
}

/// A 1D time-dependent BVP `u_t = 𝓛u + f`, `0 = 𝓑u + g`, `u(·, t0) = u0`.
#[derive(Clone)]
pub struct ProblemDef {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub t0: f64,
    pub t_final: f64,
    pub nu: f64,
    pub pde_rhs: PdeRhs,
    /// Conditions at `a` and `b`, in that order.
    pub bc: [BoundaryCondition; 2],
    pub u0: SpaceFn,
    pub exact: Option<SpaceTimeFn>,
}

impl fmt::Debug for ProblemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemDef")
            .field("name", &self.name)
            .field("domain", &(self.a, self.b))
            .field("time", &(self.t0, self.t_final))
            .field("nu", &self.nu)
            .field("bc", &self.bc)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

/// Tolerance for `𝓑u₀ + g(·, t0) = 0` at the endpoints.
pub const BOUNDARY_CONSISTENCY_TOL: f64 = 1e-10;

impl ProblemDef {
    pub fn validate(&self) -> Result<()> {
        if !(self.a < self.b) {
            return Err(Error::invalid(format!("empty domain [{}, {}]", self.a, self.b)));
        }
        if !(self.t0 < self.t_final) {
            return Err(Error::invalid(format!(
                "empty time window [{}, {}]",
                self.t0, self.t_final
            )));
        }
        if !(self.nu > 0.0) {
            return Err(Error::invalid(format!("nu must be positive, got {}", self.nu)));
        }
        for (bc, x) in self.bc.iter().zip([self.a, self.b]) {
            let r = bc.residual((self.u0)(x), self.t0);
            if !(r.abs() <= BOUNDARY_CONSISTENCY_TOL) {
                return Err(Error::invalid(format!(
                    "initial profile violates the boundary condition at x = {x} by {r:e}"
                )));
            }
        }
        Ok(())
    }

    pub fn exact_at(&self, x: f64, t: f64) -> Option<f64> {
        self.exact.as_ref().map(|u| u(x, t))
    }
}

/// Kernel matrices and mass matrix for one collocation set.
#[derive(Clone, Debug)]
pub struct SemiDiscrete {
    pub points: PointSet,
    pub shapes: ShapeVector,
    pub k_id: Matrix,
    pub k_dx: Matrix,
    pub k_dxx: Matrix,
    /// Interior rows of `k_id`, zero first and last rows.
    pub mass: Matrix,
    pub k_id_factors: LuFactors,
}

pub fn assemble(problem: &ProblemDef, points: &PointSet, eps0: f64) -> Result<SemiDiscrete> {
    let n = points.len();
    if n < 3 {
        return Err(Error::invalid(format!("need at least 3 collocation points, got {n}")));
    }
    if points.domain() != (problem.a, problem.b) {
        return Err(Error::invalid(format!(
            "point set spans {:?} but the problem lives on [{}, {}]",
            points.domain(),
            problem.a,
            problem.b
        )));
    }
    let shapes = variable_shape(points.as_slice(), eps0)?;
    let x = points.as_slice();
    let k_id = build_matrix(x, &shapes, Deriv::Id)?;
    let k_dx = build_matrix(x, &shapes, Deriv::Dx)?;
    let k_dxx = build_matrix(x, &shapes, Deriv::Dxx)?;
    let mut mass = k_id.clone();
    mass.row_mut(0).fill(0.0);
    mass.row_mut(n - 1).fill(0.0);
    let k_id_factors = factor_checked(&k_id)?;
    Ok(SemiDiscrete {
        points: points.clone(),
        shapes,
        k_id,
        k_dx,
        k_dxx,
        mass,
        k_id_factors,
    })
}

/// Solves `K c = u₀(X)`.
pub fn initial_coefficients(sd: &SemiDiscrete, problem: &ProblemDef) -> Result<Vec<f64>> {
    let u0: Vec<f64> = sd.points.iter().map(|&x| (problem.u0)(x)).collect();
    sd.k_id_factors.solve(&u0)
}

/// `û = K c`.
pub fn nodal_values(sd: &SemiDiscrete, c: &[f64]) -> Vec<f64> {
    sd.k_id.mul_vec(c)
}

impl SemiDiscrete {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::invalid(format!(
                "coefficient vector has length {}, expected {}",
                v.len(),
                self.len()
            )));
        }
        Ok(())
    }

    fn nodal_triplet(&self, c: &[f64], t: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        self.check_dim(c)?;
        let u = self.k_id.mul_vec(c);
        let ux = self.k_dx.mul_vec(c);
        let uxx = self.k_dxx.mul_vec(c);
        if u.iter().chain(&ux).chain(&uxx).any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow { t });
        }
        Ok((u, ux, uxx))
    }

    /// `F(t, c)`: interior rows `𝓛û + f`, boundary rows `𝓑û + g`.
    pub fn rhs(&self, problem: &ProblemDef, t: f64, c: &[f64]) -> Result<Vec<f64>> {
        let (u, ux, uxx) = self.nodal_triplet(c, t)?;
        let n = self.len();
        let x = self.points.as_slice();
        let mut f: Vec<f64> = (0..n)
            .map(|j| {
                (problem.pde_rhs)(Local {
                    x: x[j],
                    t,
                    u: u[j],
                    ux: ux[j],
                    uxx: uxx[j],
                })
            })
            .collect();
        f[0] = problem.bc[0].residual(u[0], t);
        f[n - 1] = problem.bc[1].residual(u[n - 1], t);
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow { t });
        }
        Ok(f)
    }

    /// `∂F/∂c`. The pointwise operator is differentiated by forward
    /// differences in `(u, u_x, u_xx)` and chained through the kernel matrices.
    pub fn rhs_jacobian(&self, problem: &ProblemDef, t: f64, c: &[f64]) -> Result<Matrix> {
        let (u, ux, uxx) = self.nodal_triplet(c, t)?;
        let n = self.len();
        let x = self.points.as_slice();
        let sqrt_eps = f64::EPSILON.sqrt();
        let mut jac = Matrix::zeros(n, n);
        for j in 1..n - 1 {
            let base = Local {
                x: x[j],
                t,
                u: u[j],
                ux: ux[j],
                uxx: uxx[j],
            };
            let f0 = (problem.pde_rhs)(base);
            let partial = |bump: fn(&mut Local, f64), v: f64| {
                let h = sqrt_eps * v.abs().max(1.0);
                let mut p = base;
                bump(&mut p, h);
                ((problem.pde_rhs)(p) - f0) / h
            };
            let du = partial(|p, h| p.u += h, u[j]);
            let dux = partial(|p, h| p.ux += h, ux[j]);
            let duxx = partial(|p, h| p.uxx += h, uxx[j]);
            let (r_id, r_dx, r_dxx) = (self.k_id.row(j), self.k_dx.row(j), self.k_dxx.row(j));
            for (k, out) in jac.row_mut(j).iter_mut().enumerate() {
                *out = du * r_id[k] + dux * r_dx[k] + duxx * r_dxx[k];
            }
        }
        // Dirichlet rows are the trace: ∂(u_b + g)/∂c = row b of K.
        for j in [0, n - 1] {
            jac.row_mut(j).copy_from_slice(self.k_id.row(j));
        }
        if !jac.is_finite() {
            return Err(Error::NumericOverflow { t });
        }
        Ok(jac)
    }

    /// Boundary residuals `𝓑û + g` at `a` and `b`.
    pub fn boundary_residuals(&self, problem: &ProblemDef, t: f64, c: &[f64]) -> [f64; 2] {
        let n = self.len();
        let ua = crate::densela::dot(self.k_id.row(0), c);
        let ub = crate::densela::dot(self.k_id.row(n - 1), c);
        [problem.bc[0].residual(ua, t), problem.bc[1].residual(ub, t)]
    }
}

/// Implicit residual `M ċ − F(t, c)`; zero along DAE solutions.
pub fn dae_residual(
    sd: &SemiDiscrete,
    problem: &ProblemDef,
    t: f64,
    c: &[f64],
    cdot: &[f64],
) -> Result<Vec<f64>> {
    sd.check_dim(cdot)?;
    let f = sd.rhs(problem, t, c)?;
    let mc = sd.mass.mul_vec(cdot);
    Ok(mc.iter().zip(&f).map(|(m, f)| m - f).collect())
}
