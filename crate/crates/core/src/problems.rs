//! Benchmark problems: a Burgers shock with a closed-form solution, the
//! Burgers moving front, and an Allen-Cahn problem with metastable layers.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::mol::{BoundaryCondition, Local, ProblemDef};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BenchmarkId {
    BurgersShock,
    BurgersMovingFront,
    AllenCahn,
}

impl BenchmarkId {
    pub const ALL: [BenchmarkId; 3] = [
        BenchmarkId::BurgersShock,
        BenchmarkId::BurgersMovingFront,
        BenchmarkId::AllenCahn,
    ];

    pub fn cli_name(self) -> &'static str {
        match self {
            BenchmarkId::BurgersShock => "burgers-shock",
            BenchmarkId::BurgersMovingFront => "burgers-front",
            BenchmarkId::AllenCahn => "allen-cahn",
        }
    }

    /// Reference run settings for this benchmark.
    pub fn defaults(self) -> BenchmarkDefaults {
        match self {
            BenchmarkId::BurgersShock => BenchmarkDefaults {
                tau: 1e-4,
                eps0: 0.75,
                n_init: 13,
                m_levels: 51,
            },
            BenchmarkId::BurgersMovingFront => BenchmarkDefaults {
                tau: 1e-3,
                eps0: 0.75,
                n_init: 13,
                m_levels: 51,
            },
            BenchmarkId::AllenCahn => BenchmarkDefaults {
                tau: 5e-2,
                eps0: 3.0,
                n_init: 13,
                m_levels: 34,
            },
        }
    }

    pub fn build(self, opts: &BenchmarkOptions) -> ProblemDef {
        let mut p = match self {
            BenchmarkId::BurgersShock => burgers_shock_with(opts.nu.unwrap_or(1e-3)),
            BenchmarkId::BurgersMovingFront => burgers_moving_front_with(opts.nu.unwrap_or(1e-3)),
            BenchmarkId::AllenCahn => {
                allen_cahn_with(opts.nu.unwrap_or(1e-6), opts.literal_allen_cahn_sign)
            }
        };
        if let Some(t) = opts.t_final {
            p.t_final = t;
        }
        p
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for BenchmarkId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        BenchmarkId::ALL
            .into_iter()
            .find(|b| b.cli_name() == s)
            .ok_or_else(|| format!("unknown problem '{s}'"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchmarkDefaults {
    pub tau: f64,
    pub eps0: f64,
    pub n_init: usize,
    pub m_levels: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BenchmarkOptions {
    pub nu: Option<f64>,
    pub t_final: Option<f64>,
    /// Use the reaction term `u(1 + u²)` instead of the bistable `u(1 − u²)`.
    pub literal_allen_cahn_sign: bool,
}

/// Viscous Burgers operator `ν u_xx − u u_x`.
fn burgers_rhs(nu: f64) -> Arc<dyn Fn(Local) -> f64 + Send + Sync> {
    Arc::new(move |l: Local| nu * l.uxx - l.u * l.ux)
}

/// Shock-like Burgers solution
/// `u = (x/t) / (1 + sqrt(t/c) exp(x²/(4νt)))`, `c = exp(1/(8ν))`.
///
/// The exponentials are merged before evaluation; `c` alone overflows for
/// small `ν`.
pub fn burgers_shock_exact(nu: f64, x: f64, t: f64) -> f64 {
    let expo = x * x / (4.0 * nu * t) - 1.0 / (16.0 * nu) + 0.5 * t.ln();
    (x / t) / (1.0 + expo.exp())
}

pub fn burgers_shock() -> ProblemDef {
    burgers_shock_with(1e-3)
}

pub fn burgers_shock_with(nu: f64) -> ProblemDef {
    ProblemDef {
        name: BenchmarkId::BurgersShock.cli_name().into(),
        a: 0.0,
        b: 1.0,
        t0: 1.0,
        t_final: 3.0,
        nu,
        pde_rhs: burgers_rhs(nu),
        bc: [
            BoundaryCondition::dirichlet_const(0.0),
            BoundaryCondition::dirichlet_const(0.0),
        ],
        u0: Arc::new(move |x| burgers_shock_exact(nu, x, 1.0)),
        exact: Some(Arc::new(move |x, t| burgers_shock_exact(nu, x, t))),
    }
}

pub fn burgers_moving_front() -> ProblemDef {
    burgers_moving_front_with(1e-3)
}

pub fn burgers_moving_front_with(nu: f64) -> ProblemDef {
    ProblemDef {
        name: BenchmarkId::BurgersMovingFront.cli_name().into(),
        a: 0.0,
        b: 1.0,
        t0: 0.0,
        t_final: 1.0,
        nu,
        pde_rhs: burgers_rhs(nu),
        bc: [
            BoundaryCondition::dirichlet_const(0.0),
            BoundaryCondition::dirichlet_const(0.0),
        ],
        u0: Arc::new(|x| (2.0 * PI * x).sin() + 0.5 * (PI * x).sin()),
        exact: None,
    }
}

pub fn allen_cahn_initial(x: f64) -> f64 {
    0.6 * x + 0.4 * (0.5 * PI * (x * x - 3.0 * x - 1.0)).sin()
}

/// Reaction term: bistable `u(1 − u²)`, or `u(1 + u²)` when `literal_sign`.
pub fn allen_cahn_reaction(u: f64, literal_sign: bool) -> f64 {
    if literal_sign {
        u * (1.0 + u * u)
    } else {
        u * (1.0 - u * u)
    }
}

pub fn allen_cahn() -> ProblemDef {
    allen_cahn_with(1e-6, false)
}

pub fn allen_cahn_with(nu: f64, literal_sign: bool) -> ProblemDef {
    ProblemDef {
        name: BenchmarkId::AllenCahn.cli_name().into(),
        a: -1.0,
        b: 1.0,
        t0: 0.0,
        t_final: 8.25,
        nu,
        pde_rhs: Arc::new(move |l: Local| nu * l.uxx + allen_cahn_reaction(l.u, literal_sign)),
        bc: [
            BoundaryCondition::dirichlet_const(-1.0),
            BoundaryCondition::dirichlet_const(1.0),
        ],
        u0: Arc::new(allen_cahn_initial),
        exact: None,
    }
}
