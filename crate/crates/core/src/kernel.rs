//! Radial kernels with one shape parameter per center.
//!
//! The shape attached to center `x_j` scales with the inverse of the
//! wider of its two neighbouring gaps, so refined regions get narrower
//! basis functions. Because the shape belongs to the column (center) index,
//! kernel matrices on non-uniform grids are not symmetric.

use serde::{Deserialize, Serialize};

use crate::densela::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    /// `κ(εr) = (1 + ε²r²)^{1/2}`
    Multiquadric,
}

/// Which spatial derivative (in the evaluation point `x`) to take.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Deriv {
    Id,
    Dx,
    Dxx,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub eps0: f64,
}

impl KernelConfig {
    pub fn multiquadric(eps0: f64) -> Result<Self> {
        if !(eps0 > 0.0 && eps0.is_finite()) {
            return Err(Error::invalid(format!("eps0 must be positive, got {eps0}")));
        }
        Ok(KernelConfig {
            family: KernelFamily::Multiquadric,
            eps0,
        })
    }

    pub fn shapes(&self, points: &[f64]) -> Result<ShapeVector> {
        variable_shape(points, self.eps0)
    }

    pub fn eval(&self, deriv: Deriv, eps: f64, x: f64, xj: f64) -> f64 {
        match self.family {
            KernelFamily::Multiquadric => match deriv {
                Deriv::Id => kernel_value(eps, x, xj),
                Deriv::Dx => kernel_dx(eps, x, xj),
                Deriv::Dxx => kernel_dxx(eps, x, xj),
            },
        }
    }
}

/// Per-center shape parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeVector(Vec<f64>);

impl ShapeVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for ShapeVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `ε_j = ε₀ · min(1/left gap, 1/right gap)`, one-sided at the two ends.
pub fn variable_shape(points: &[f64], eps0: f64) -> Result<ShapeVector> {
    if points.len() < 2 {
        return Err(Error::invalid(format!(
            "variable shape needs at least 2 points, got {}",
            points.len()
        )));
    }
    if !(eps0 > 0.0) {
        return Err(Error::invalid(format!("eps0 must be positive, got {eps0}")));
    }
    let gaps: Vec<f64> = points.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(i) = gaps.iter().position(|&g| !(g > 0.0)) {
        return Err(Error::invalid(format!(
            "points must be strictly increasing (violated at index {})",
            i + 1
        )));
    }
    let n = points.len();
    let eps = (0..n)
        .map(|j| {
            let gap = match j {
                0 => gaps[0],
                _ if j == n - 1 => gaps[n - 2],
                _ => gaps[j - 1].max(gaps[j]),
            };
            eps0 / gap
        })
        .collect();
    Ok(ShapeVector(eps))
}

#[inline]
pub fn kernel_value(eps: f64, x: f64, xj: f64) -> f64 {
    let er = eps * (x - xj);
    (1.0 + er * er).sqrt()
}

#[inline]
pub fn kernel_dx(eps: f64, x: f64, xj: f64) -> f64 {
    let r = x - xj;
    let e2 = eps * eps;
    e2 * r / (1.0 + e2 * r * r).sqrt()
}

#[inline]
pub fn kernel_dxx(eps: f64, x: f64, xj: f64) -> f64 {
    let r = x - xj;
    let e2 = eps * eps;
    let s = 1.0 + e2 * r * r;
    e2 / (s * s.sqrt())
}

/// `M[i][j] = D κ_{ε_j}(x_i, x_j)` for the requested derivative `D`.
pub fn build_matrix(points: &[f64], shapes: &[f64], deriv: Deriv) -> Result<Matrix> {
    if points.len() != shapes.len() {
        return Err(Error::invalid(format!(
            "{} points but {} shapes",
            points.len(),
            shapes.len()
        )));
    }
    Ok(build_eval_matrix(points, points, shapes, deriv))
}

/// Kernel derivative matrix for evaluation sites `xs` against `centers`.
pub fn build_eval_matrix(xs: &[f64], centers: &[f64], shapes: &[f64], deriv: Deriv) -> Matrix {
    let f = match deriv {
        Deriv::Id => kernel_value,
        Deriv::Dx => kernel_dx,
        Deriv::Dxx => kernel_dxx,
    };
    Matrix::from_fn(xs.len(), centers.len(), |i, j| f(shapes[j], xs[i], centers[j]))
}
