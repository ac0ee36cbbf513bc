//! Worked examples for the geometric primitives and the energy constants.

use kahler_core::{
    critical_residual, default_t_grid, fs_background, generate_family, integrate, make_metric,
    mu_k, orbit_potential, ricci_eigenvalues, ricci_potential, sigma_k, solve_yau_path,
    wedge_density, FamilyParams, FormSlot, MetricState, Model, RadialPotential, SlotKind,
};

fn members(n: usize, grid: usize, count: usize, seed: u64) -> Vec<MetricState> {
    let bg = fs_background(Model::Cpn, n, grid).unwrap();
    generate_family(&bg, seed, "examples", &FamilyParams::new(count, 6, 0.5))
        .unwrap()
        .iter()
        .map(|p| make_metric(&bg, p).unwrap())
        .collect()
}

#[test]
fn flat_torus_has_unit_density_and_zero_ricci() {
    let bg = fs_background(Model::Torus, 1, 128).unwrap();
    let state = make_metric(&bg, &RadialPotential::zeros(&bg)).unwrap();
    assert!(state
        .density_ratio()
        .iter()
        .all(|r| (r - 1.0).abs() < 1e-15));
    let (r, s) = ricci_eigenvalues(&state);
    assert!(r.iter().chain(s).all(|v| v.abs() < 1e-12));
    assert!(mu_k(&bg, 0).unwrap().abs() < 1e-15);
}

/// `φ + c` carries a rounding error of order `eps·|c|`, which the fourth-order
/// Ricci operator amplifies; the comparison allows for that.
#[test]
fn constants_leave_the_metric_unchanged() {
    let bg = fs_background(Model::Cpn, 2, 64).unwrap();
    let phi = generate_family(&bg, 3, "shift", &FamilyParams::new(1, 6, 0.5))
        .unwrap()
        .remove(0);
    let a = make_metric(&bg, &phi).unwrap();
    let b = make_metric(&bg, &phi.shifted(4.25)).unwrap();
    let close = |x: &[f64], y: &[f64], tol: f64| x.iter().zip(y).all(|(p, q)| (p - q).abs() < tol);
    assert!(close(a.density_ratio(), b.density_ratio(), 1e-11));
    let ((ar, as_), (br, bs)) = (ricci_eigenvalues(&a), ricci_eigenvalues(&b));
    assert!(close(ar, br, 1e-7) && close(as_, bs, 1e-7));
}

#[test]
fn sigma_two_is_half_of_r_squared_minus_ric_squared() {
    for n in 2..=4 {
        for state in members(n, 48, 4, 31) {
            let (lr, ls) = ricci_eigenvalues(&state);
            let s2 = sigma_k(&state, 2).unwrap();
            for i in 0..s2.len() {
                let nf = (n - 1) as f64;
                let r = lr[i] + nf * ls[i];
                let ric2 = lr[i] * lr[i] + nf * ls[i] * ls[i];
                let want = 0.5 * (r * r - ric2);
                assert!((s2[i] - want).abs() < 1e-10 * (1.0 + want.abs()));
            }
        }
    }
}

#[test]
fn ricci_potential_is_normalized_and_matches_ric_minus_omega() {
    for n in 1..=3 {
        let bg = fs_background(Model::Cpn, n, 64).unwrap();
        let fs = make_metric(&bg, &RadialPotential::zeros(&bg)).unwrap();
        let (f0, defect0) = ricci_potential(&fs).unwrap();
        assert!(f0.max_abs() < 1e-10 && defect0 < 1e-10);
        for state in members(n, 64, 4, 32) {
            let (f, _) = ricci_potential(&state).unwrap();
            let ef: Vec<f64> = f.values.iter().map(|v| v.exp()).collect();
            let v = bg.volume();
            assert!((state.integrate(&ef) - v).abs() < 1e-10 * v);
            let (hr, hs) = bg.hessian_pair(&f.values);
            let (gr, gs) = state.metric_pair();
            let (lr, ls) = ricci_eigenvalues(&state);
            for i in 0..hr.len() {
                assert!((hr[i] / gr[i] - (lr[i] - 1.0)).abs() < 1e-7);
                if n > 1 {
                    assert!((hs[i] / gs[i] - (ls[i] - 1.0)).abs() < 1e-7);
                }
            }
        }
    }
}

#[test]
fn yau_endpoint_has_the_reference_as_ricci_form() {
    let bg = fs_background(Model::Cpn, 2, 64).unwrap();
    let reference = members(2, 64, 1, 33).remove(0);
    let traj = solve_yau_path(&bg, &reference, &default_t_grid()).unwrap();
    let end = &traj.points.last().unwrap();
    assert_eq!(end.t, 1.0);
    let (lr, ls) = ricci_eigenvalues(&end.state);
    let (rr, rs) = reference.metric_pair();
    let (er, es) = end.state.metric_pair();
    for i in 0..lr.len() {
        assert!((lr[i] - rr[i] / er[i]).abs() < 1e-7, "radial at {i}");
        assert!((ls[i] - rs[i] / es[i]).abs() < 1e-7, "transverse at {i}");
    }
}

#[test]
fn gradient_slot_contributes_through_the_radial_position() {
    let g = vec![0.5, 2.0, 3.0];
    let grad = FormSlot::owned(SlotKind::GradientSquare, g.clone(), vec![0.0; 3]);
    let one = FormSlot::owned(SlotKind::ReferenceMetric, vec![1.0; 3], vec![1.0; 3]);
    let scaled = FormSlot::owned(SlotKind::Hessian, vec![7.0; 3], vec![2.0; 3]);
    for n in 1..=4 {
        let mut slots = vec![&grad];
        slots.extend(std::iter::repeat_n(&one, n - 1));
        let d = wedge_density(n, &slots).unwrap();
        for (a, b) in d.iter().zip(&g) {
            assert!((a - b / n as f64).abs() < 1e-15);
        }
        let mut slots = vec![&grad];
        slots.extend(std::iter::repeat_n(&scaled, n - 1));
        let d = wedge_density(n, &slots).unwrap();
        let transverse = 2f64.powi(n as i32 - 1);
        for (a, b) in d.iter().zip(&g) {
            assert!((a - b * transverse / n as f64).abs() < 1e-13);
        }
    }
}

#[test]
fn quadrature_and_mu_are_stable_under_refinement() {
    for n in 1..=3 {
        let coarse = fs_background(Model::Cpn, n, 64).unwrap();
        let fine = fs_background(Model::Cpn, n, 128).unwrap();
        let density = |x: f64| (0.7 * x).cos() + x * x / 5.0;
        let a = integrate(
            &coarse,
            &coarse
                .nodes()
                .iter()
                .map(|&x| density(x))
                .collect::<Vec<_>>(),
        );
        let b = integrate(
            &fine,
            &fine.nodes().iter().map(|&x| density(x)).collect::<Vec<_>>(),
        );
        assert!((a - b).abs() < 1e-9 * b.abs());
        for k in 0..=n {
            let (p, q) = (mu_k(&coarse, k).unwrap(), mu_k(&fine, k).unwrap());
            assert!((p - 1.0).abs() < 1e-10 && (p - q).abs() < 1e-9);
        }
    }
}

/// The residual carries about six derivatives of the potential, so roundoff
/// grows quickly with the grid; 64 nodes resolve these metrics.
#[test]
fn top_critical_residual_vanishes_on_orbit_metrics() {
    for n in 1..=3 {
        let bg = fs_background(Model::Cpn, n, 64).unwrap();
        for s in [-1.0, 0.5, 1.2] {
            let phi = orbit_potential(&bg, &RadialPotential::zeros(&bg), s).unwrap();
            let state = make_metric(&bg, &phi).unwrap();
            assert!(state.max_ricci_deviation(1.0) < 1e-7);
            for k in 0..=n {
                let r = critical_residual(&state, k).unwrap();
                assert!(r.iter().all(|v| v.abs() < 1e-4), "n={n} s={s} k={k}");
            }
        }
    }
}
