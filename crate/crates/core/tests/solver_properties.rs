//! Properties of the integrator, the adaptive driver and solution transfer.

mod common;

use kernmol::dae::{boundary_drift, consistent_initialize, integrate, BdfMethod, IntegratorConfig};
use kernmol::driver::rmse_at;
use kernmol::interp::{fit, loocv_indicator};
use kernmol::kernel::{build_eval_matrix, Deriv};
use kernmol::mol::{assemble, initial_coefficients, nodal_values, ProblemDef};
use kernmol::problems::{burgers_shock, burgers_shock_with};
use kernmol::refine::{refine_loop, PointSet, RefineConfig, RefineStatus};
use kernmol::{solve_adaptive, AdaptiveConfig};

/// Evaluates the kernel expansion `c` of `sd` at arbitrary `xs`.
fn evaluate(sd: &kernmol::mol::SemiDiscrete, c: &[f64], xs: &[f64]) -> Vec<f64> {
    build_eval_matrix(xs, sd.points.as_slice(), &sd.shapes, Deriv::Id).mul_vec(c)
}

#[test]
fn boundary_drift_stays_below_newton_tolerance() {
    let p = burgers_shock();
    let ps = PointSet::uniform(0.0, 1.0, 41).unwrap();
    let sd = assemble(&p, &ps, 0.75).unwrap();
    let mut c = initial_coefficients(&sd, &p).unwrap();
    let cfg = IntegratorConfig::default();
    let mut t = 1.0;
    // Every window end is an accepted step.
    for _ in 0..40 {
        let next = t + 0.005;
        c = integrate(&sd, &p, &c, t, next, &cfg).unwrap().c_end;
        t = next;
        let drift = boundary_drift(&sd, &p, t, &c);
        assert!(drift <= 10.0 * cfg.newton_tol, "t={t}: drift {drift:e}");
    }
}

#[test]
fn integrator_is_bitwise_deterministic() {
    let p = common::manufactured_heat();
    let ps = PointSet::uniform(0.0, 1.0, 13).unwrap();
    let sd = assemble(&p, &ps, 0.75).unwrap();
    let c0 = initial_coefficients(&sd, &p).unwrap();
    let cfg = IntegratorConfig::default();
    let a = integrate(&sd, &p, &c0, 0.0, 0.7, &cfg).unwrap();
    let b = integrate(&sd, &p, &c0, 0.0, 0.7, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn heat_error_shrinks_as_the_grid_is_refined() {
    // With eps0 fixed the shape grows like 1/h, so convergence is slow but
    // still monotone.
    let p = common::manufactured_heat();
    let exact = p.exact.as_ref().unwrap();
    let cfg = IntegratorConfig {
        rel_tol: 1e-8,
        abs_tol: 1e-10,
        ..IntegratorConfig::default()
    };
    let errs: Vec<f64> = [11, 21, 41, 81]
        .iter()
        .map(|&n| {
            let ps = PointSet::uniform(0.0, 1.0, n).unwrap();
            let sd = assemble(&p, &ps, 0.75).unwrap();
            let c0 = initial_coefficients(&sd, &p).unwrap();
            let r = integrate(&sd, &p, &c0, 0.0, 1.0, &cfg).unwrap();
            let u = nodal_values(&sd, &r.c_end);
            rmse_at(ps.as_slice(), &u, |x, t| exact(x, t), 1.0)
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[3] <= 2e-3, "{errs:?}");
}

#[test]
fn infinite_threshold_reduces_to_fixed_grid_mol() {
    let p = common::manufactured_heat();
    let mut cfg = AdaptiveConfig::new(&p, f64::INFINITY, 0.75, 15, 6);
    cfg.integ = IntegratorConfig::fixed(BdfMethod::Bdf2, 0.01);
    let report = solve_adaptive(&p, &cfg).unwrap();

    // The same computation written out by hand.
    let ps = PointSet::uniform(0.0, 1.0, 15).unwrap();
    let sd = assemble(&p, &ps, 0.75).unwrap();
    let u0: Vec<f64> = ps.iter().map(|&x| (p.u0)(x)).collect();
    let s0 = fit(&ps, &u0, 0.75).unwrap();
    let mut c = consistent_initialize(&sd, &p, s0.alpha(), 0.0).unwrap();
    let times = cfg.time_levels(&p);
    let exact = p.exact.as_ref().unwrap();
    for (rec, w) in report.levels[1..].iter().zip(times.windows(2)) {
        c = integrate(&sd, &p, &c, w[0], w[1], &cfg.integ).unwrap().c_end;
        let u = nodal_values(&sd, &c);
        let scripted = rmse_at(ps.as_slice(), &u, |x, t| exact(x, t), w[1]);
        assert_eq!(rec.points, ps.as_slice());
        assert!((rec.rmse.unwrap() - scripted).abs() <= 1e-12, "t={}: {} vs {scripted}", rec.t, rec.rmse.unwrap());
    }
}

fn check_records(p: &ProblemDef, cfg: &AdaptiveConfig) -> Vec<usize> {
    let report = solve_adaptive(p, cfg).unwrap();
    assert!(report.completed());
    for rec in &report.levels {
        assert_eq!(rec.points.first(), Some(&p.a));
        assert_eq!(rec.points.last(), Some(&p.b));
        match rec.refine_status {
            RefineStatus::Converged => assert!(rec.max_indicator <= cfg.refine.tau),
            other => assert!(rec.max_indicator > cfg.refine.tau, "{other:?} below tau"),
        }
        assert_eq!(rec.points.len(), rec.n_fin);
        assert_eq!(rec.values.len(), rec.n_fin);
    }
    report.levels.iter().map(|r| r.n_fin).collect()
}

#[test]
fn level_records_honour_the_threshold() {
    let mut p = burgers_shock_with(1e-3);
    p.t_final = 1.4;
    let cfg = AdaptiveConfig::new(&p, 1e-4, 0.75, 13, 11);
    check_records(&p, &cfg);
}

#[test]
fn insertion_only_mode_never_drops_points() {
    let mut p = burgers_shock();
    p.t_final = 1.4;
    // Insertion only keeps every point the moving shock ever needed, so a
    // mild threshold keeps the matrices within the conditioning cap.
    let mut cfg = AdaptiveConfig::new(&p, 1e-2, 0.75, 13, 11);
    cfg.restart_from_base = false;
    let counts = check_records(&p, &cfg);
    assert!(counts.windows(2).all(|w| w[1] >= w[0]), "{counts:?}");
}

#[test]
fn transfer_preserves_previous_nodal_values() {
    let p = burgers_shock();
    let tau = 1e-4;
    let coarse = PointSet::uniform(0.0, 1.0, 61).unwrap();
    let sd_old = assemble(&p, &coarse, 0.75).unwrap();
    let c_old = initial_coefficients(&sd_old, &p).unwrap();
    let u_old = nodal_values(&sd_old, &c_old);
    let s = fit(&coarse, &u_old, 0.75).unwrap();

    let base = PointSet::uniform(0.0, 1.0, 13).unwrap();
    let cfg = RefineConfig::new(tau, 1.0);
    let out = refine_loop(&base, |ps| Ok(s.eval_many(ps.as_slice(), Deriv::Id)), 0.75, &cfg).unwrap();
    assert_eq!(out.status, RefineStatus::Converged);
    let sd_new = assemble(&p, &out.points, 0.75).unwrap();
    let c_new = consistent_initialize(&sd_new, &p, out.interpolant.alpha(), 1.0).unwrap();

    let back = evaluate(&sd_new, &c_new, coarse.as_slice());
    let worst = back.iter().zip(&u_old).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    // Interpolation tolerance: the leave-one-out bound of the refined set.
    assert!(worst <= 10.0 * tau, "worst deviation {worst:e}");
    let e = loocv_indicator(&out.interpolant).unwrap();
    assert!(e.iter().all(|&v| v <= tau));
}

#[test]
fn failure_keeps_partial_records() {
    let p = kernmol::problems::allen_cahn_with(1e-6, true);
    let cfg = AdaptiveConfig::new(&p, 5e-2, 3.0, 13, 34);
    let f = solve_adaptive(&p, &cfg).unwrap_err();
    assert!(!f.partial.levels.is_empty());
    assert!(!f.partial.completed());
    assert!(matches!(f.error, kernmol::Error::AtLevel { .. }));
}
