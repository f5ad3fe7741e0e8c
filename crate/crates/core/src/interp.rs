//! Kernel interpolation of nodal values and the leave-one-out error indicator.
//!
//! For the interpolant `s(x) = Σ α_j κ_{ε_j}(x, x_j)` with `K α = û`, the
//! error made at `x_k` by the interpolant that skips datum `k` equals
//! `α_k / (K⁻¹)_kk`. The identity only needs `K` and the reduced matrix to
//! be nonsingular, so it holds for the asymmetric variable-shape matrix too.

use crate::densela::{cond1_estimate, lu_factor, norm_inf, LuFactors, Matrix};
use crate::error::{Error, Result};
use crate::kernel::{build_eval_matrix, build_matrix, variable_shape, Deriv, ShapeVector};
use crate::refine::PointSet;

/// Systems with a 1-norm condition estimate above this are rejected.
pub const MAX_CONDITION: f64 = 1e15;

/// LU-factorizes `a`, rejecting exactly singular and numerically singular input.
pub(crate) fn factor_checked(a: &Matrix) -> Result<LuFactors> {
    let f = match lu_factor(a) {
        Ok(f) => f,
        Err(Error::SingularMatrix { .. }) => {
            return Err(Error::IllConditioned {
                cond: f64::INFINITY,
            })
        }
        Err(e) => return Err(e),
    };
    let cond = cond1_estimate(a, &f);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned { cond });
    }
    Ok(f)
}

#[derive(Clone, Debug)]
pub struct Interpolant {
    points: PointSet,
    shapes: ShapeVector,
    alpha: Vec<f64>,
    matrix: Matrix,
    factors: LuFactors,
}

/// Solves `K α = û` on `points` with variable shapes built from `eps0`.
pub fn fit(points: &PointSet, values: &[f64], eps0: f64) -> Result<Interpolant> {
    let n = points.len();
    if values.len() != n {
        return Err(Error::invalid(format!(
            "{} values for {} points",
            values.len(),
            n
        )));
    }
    if n < 2 {
        return Err(Error::invalid("interpolation needs at least 2 points"));
    }
    let shapes = variable_shape(points.as_slice(), eps0)?;
    let matrix = build_matrix(points.as_slice(), &shapes, Deriv::Id)?;
    let factors = factor_checked(&matrix)?;
    let alpha = factors.solve(values)?;
    Ok(Interpolant {
        points: points.clone(),
        shapes,
        alpha,
        matrix,
        factors,
    })
}

impl Interpolant {
    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn shapes(&self) -> &ShapeVector {
        &self.shapes
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// The interpolation matrix `K`.
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn factors(&self) -> &LuFactors {
        &self.factors
    }

    pub fn eval(&self, x: f64, deriv: Deriv) -> f64 {
        let f = match deriv {
            Deriv::Id => crate::kernel::kernel_value,
            Deriv::Dx => crate::kernel::kernel_dx,
            Deriv::Dxx => crate::kernel::kernel_dxx,
        };
        self.points
            .iter()
            .zip(self.shapes.iter())
            .zip(&self.alpha)
            .map(|((&xj, &ej), &a)| a * f(ej, x, xj))
            .sum()
    }

    pub fn eval_many(&self, xs: &[f64], deriv: Deriv) -> Vec<f64> {
        build_eval_matrix(xs, self.points.as_slice(), &self.shapes, deriv).mul_vec(&self.alpha)
    }

    /// Values reproduced at the data sites, `K α`.
    pub fn nodal_values(&self) -> Vec<f64> {
        self.matrix.mul_vec(&self.alpha)
    }
}

/// `e_k = |α_k / (K⁻¹)_kk|` for every data site.
pub fn loocv_indicator(interp: &Interpolant) -> Result<Vec<f64>> {
    let diag = interp.factors.inverse_diagonal();
    interp
        .alpha
        .iter()
        .zip(&diag)
        .enumerate()
        .map(|(k, (&a, &d))| {
            if d == 0.0 || !d.is_finite() {
                Err(Error::DegenerateIndicator { index: k })
            } else {
                Ok((a / d).abs())
            }
        })
        .collect()
}

/// Leave-one-out errors computed the slow way: for each `k`, drop row and
/// column `k` of `K`, solve the reduced system and predict `û_k`.
///
/// Used to cross-check [`loocv_indicator`]; costs `O(N⁴)`.
pub fn loocv_brute_force(points: &PointSet, values: &[f64], eps0: f64) -> Result<Vec<f64>> {
    let n = points.len();
    if values.len() != n || n < 2 {
        return Err(Error::invalid("brute-force LOOCV needs matching values and N >= 2"));
    }
    let shapes = variable_shape(points.as_slice(), eps0)?;
    let k_full = build_matrix(points.as_slice(), &shapes, Deriv::Id)?;
    (0..n)
        .map(|k| {
            let keep: Vec<usize> = (0..n).filter(|&j| j != k).collect();
            let reduced = Matrix::from_fn(n - 1, n - 1, |i, j| k_full[(keep[i], keep[j])]);
            let rhs: Vec<f64> = keep.iter().map(|&j| values[j]).collect();
            let beta = lu_factor(&reduced)?.solve(&rhs)?;
            let pred: f64 = keep
                .iter()
                .zip(&beta)
                .map(|(&j, &b)| b * k_full[(k, j)])
                .sum();
            Ok((pred - values[k]).abs())
        })
        .collect()
}

/// Largest relative deviation between the closed-form indicator and the
/// brute-force leave-one-out errors, normalized by the largest indicator.
pub fn loocv_deviation(interp: &Interpolant, values: &[f64], eps0: f64) -> Result<f64> {
    let fast = loocv_indicator(interp)?;
    let slow = loocv_brute_force(interp.points(), values, eps0)?;
    let scale = norm_inf(&fast).max(f64::MIN_POSITIVE);
    Ok(fast
        .iter()
        .zip(&slow)
        .map(|(f, s)| (f - s).abs())
        .fold(0.0, f64::max)
        / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize) -> PointSet {
        PointSet::uniform(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_coefficients_and_indicator() {
        let ps = uniform(9);
        let it = fit(&ps, &[0.0; 9], 0.75).unwrap();
        assert!(it.alpha().iter().all(|&a| a == 0.0));
        assert!(loocv_indicator(&it).unwrap().iter().all(|&e| e == 0.0));
        assert_eq!(it.eval(0.37, Deriv::Id), 0.0);
    }

    #[test]
    fn two_point_fit_residual() {
        let ps = PointSet::new(vec![0.0, 1.0], 0.0, 1.0).unwrap();
        let it = fit(&ps, &[1.0, 1.0], 0.75).unwrap();
        let r = it.matrix().mul_vec(it.alpha());
        assert!((r[0] - 1.0).abs() <= 1e-12 && (r[1] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn two_point_indicator_equals_one_point_partial_interpolant() {
        let ps = PointSet::new(vec![0.0, 1.0], 0.0, 1.0).unwrap();
        let u = [0.3, -1.2];
        let it = fit(&ps, &u, 0.75).unwrap();
        let e = loocv_indicator(&it).unwrap();
        let eps = variable_shape(ps.as_slice(), 0.75).unwrap();
        // Dropping point k leaves a single center j = 1 - k with β = û_j.
        for k in 0..2 {
            let j = 1 - k;
            let pred = u[j] * crate::kernel::kernel_value(eps[j], ps[k], ps[j]);
            let direct = (pred - u[k]).abs();
            assert!((e[k] - direct).abs() <= 1e-12 * direct.max(1.0), "k={k}");
        }
    }

    #[test]
    fn refit_recovers_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ps = uniform(10);
        let shapes = variable_shape(ps.as_slice(), 0.75).unwrap();
        let k = build_matrix(ps.as_slice(), &shapes, Deriv::Id).unwrap();
        let alpha0: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v = k.mul_vec(&alpha0);
        let it = fit(&ps, &v, 0.75).unwrap();
        for (a, b) in it.alpha().iter().zip(&alpha0) {
            assert!((a - b).abs() <= 1e-8 * norm_inf(&alpha0));
        }
    }

    #[test]
    fn interpolates_data_and_derivative_matches_fd() {
        let ps = PointSet::new(vec![0.0, 0.1, 0.25, 0.3, 0.55, 0.7, 0.9, 1.0], 0.0, 1.0).unwrap();
        let u: Vec<f64> = ps.iter().map(|x| (3.0 * x).sin()).collect();
        let it = fit(&ps, &u, 0.75).unwrap();
        for (k, &x) in ps.iter().enumerate() {
            assert!((it.eval(x, Deriv::Id) - u[k]).abs() <= 1e-10);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-6;
        for _ in 0..50 {
            let x = rng.random_range(0.0..1.0);
            let fd = (it.eval(x + h, Deriv::Id) - it.eval(x - h, Deriv::Id)) / (2.0 * h);
            let an = it.eval(x, Deriv::Dx);
            assert!((an - fd).abs() <= 1e-6 * an.abs().max(1.0), "x={x}: {an} vs {fd}");
        }
        let many = it.eval_many(&[0.05, 0.5], Deriv::Dxx);
        assert!((many[1] - it.eval(0.5, Deriv::Dxx)).abs() <= 1e-9 * many[1].abs().max(1.0));
    }

    #[test]
    fn closed_form_matches_brute_force_n12() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ps = uniform(12);
        let (a1, a2, w) = (
            rng.random_range(0.5..1.5),
            rng.random_range(-1.0..1.0),
            rng.random_range(1.0..4.0),
        );
        let u: Vec<f64> = ps.iter().map(|x| a1 * (w * x).sin() + a2 * x * x).collect();
        let it = fit(&ps, &u, 0.75).unwrap();
        let dev = loocv_deviation(&it, &u, 0.75).unwrap();
        assert!(dev <= 1e-8, "deviation {dev:e}");
    }

    #[test]
    fn indicator_scales_linearly_with_data() {
        let ps = PointSet::new(vec![0.0, 0.2, 0.3, 0.45, 0.8, 1.0], 0.0, 1.0).unwrap();
        let u: Vec<f64> = ps.iter().map(|x| (x - 0.4).tanh()).collect();
        let e1 = loocv_indicator(&fit(&ps, &u, 1.0).unwrap()).unwrap();
        let scaled: Vec<f64> = u.iter().map(|v| 3.5 * v).collect();
        let e2 = loocv_indicator(&fit(&ps, &scaled, 1.0).unwrap()).unwrap();
        for (a, b) in e1.iter().zip(&e2) {
            assert!((3.5 * a - b).abs() <= 1e-10 * b.max(1e-12));
        }
    }

    #[test]
    fn mismatched_values_rejected() {
        assert!(matches!(
            fit(&uniform(4), &[1.0, 2.0], 1.0),
            Err(Error::InvalidInput(_))
        ));
    }
}
