#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use kernmol::mol::{BoundaryCondition, Local, ProblemDef};

/// `u = e^{-t} sin(πx)` solves `u_t = u_xx + (π² − 1) e^{-t} sin(πx)` on
/// `[0, 1]` with homogeneous Dirichlet data.
pub fn manufactured_heat() -> ProblemDef {
    ProblemDef {
        name: "heat".into(),
        a: 0.0,
        b: 1.0,
        t0: 0.0,
        t_final: 1.0,
        nu: 1.0,
        pde_rhs: Arc::new(|l: Local| l.uxx + (PI * PI - 1.0) * (-l.t).exp() * (PI * l.x).sin()),
        bc: [
            BoundaryCondition::dirichlet_const(0.0),
            BoundaryCondition::dirichlet_const(0.0),
        ],
        u0: Arc::new(|x| (PI * x).sin()),
        exact: Some(Arc::new(|x, t| (-t).exp() * (PI * x).sin())),
    }
}
