//! Continuity paths and the flow, checked against facts independent of the solvers.

use kahler_core::{
    check_aubin_path, check_yau_path, default_t_grid, energy_between, fs_background,
    generate_family, make_metric, ricci_eigenvalues, run_flow, solve_aubin_path, solve_yau_path,
    FamilyParams, Model, RadialPotential, Termination,
};

fn max_ricci_deviation_from_one(state: &kahler_core::MetricState) -> f64 {
    let (r, s) = ricci_eigenvalues(state);
    r.iter()
        .chain(s)
        .fold(0.0f64, |m, v| m.max((v - 1.0).abs()))
}

#[test]
fn aubin_endpoint_is_kahler_einstein_on_the_fubini_study_orbit() {
    for n in 1..=2 {
        let bg = fs_background(Model::Cpn, n, 64).unwrap();
        let fs = make_metric(&bg, &RadialPotential::zeros(&bg)).unwrap();
        for phi in generate_family(&bg, 21, "aubin", &FamilyParams::new(2, 5, 0.5)).unwrap() {
            let reference = make_metric(&bg, &phi).unwrap();
            let traj = solve_aubin_path(&bg, &reference, &default_t_grid()).unwrap();
            assert_eq!(traj.termination, Termination::Completed);
            assert!(check_aubin_path(&traj).unwrap().pass());
            let end = &traj.points.last().unwrap().state;
            assert!(max_ricci_deviation_from_one(end) < 1e-6);
            for k in 0..=n {
                let e = energy_between(&fs, end, k).unwrap();
                assert!(e.abs() < 1e-6, "n={n} k={k}: {e}");
            }
        }
    }
}

#[test]
fn yau_path_starts_at_the_reference_and_passes_its_checks() {
    let bg = fs_background(Model::Cpn, 2, 64).unwrap();
    let phi = generate_family(&bg, 22, "yau", &FamilyParams::new(1, 5, 0.5))
        .unwrap()
        .remove(0);
    let reference = make_metric(&bg, &phi).unwrap();
    let traj = solve_yau_path(&bg, &reference, &default_t_grid()).unwrap();
    let start = &traj.points[0];
    assert_eq!(start.t, 0.0);
    assert!(start.potential.oscillation() < 1e-12 && start.c_t.abs() < 1e-12);
    assert!(traj.points.last().unwrap().c_t.abs() < 1e-10);
    let v = bg.volume();
    for p in &traj.points {
        assert!(reference.integrate(&p.potential.values).abs() < 1e-10 * v);
        let prescribed: Vec<f64> = traj
            .ricci_potential
            .values
            .iter()
            .map(|f| (p.t * f + p.c_t).exp())
            .collect();
        assert!((reference.integrate(&prescribed) - v).abs() < 1e-10 * v);
    }
    assert!(check_yau_path(&traj).unwrap().pass());
}

#[test]
fn flow_fixes_fubini_study_and_relaxes_a_perturbation() {
    let bg = fs_background(Model::Cpn, 1, 32).unwrap();
    let still = run_flow(&bg, &RadialPotential::zeros(&bg), 1e-3, 200).unwrap();
    assert!(still.samples.iter().all(|s| s.max_ricci_deviation < 1e-8));

    let phi = generate_family(&bg, 23, "flow", &FamilyParams::new(1, 4, 0.2))
        .unwrap()
        .remove(0);
    let run = run_flow(&bg, &phi, 1e-3, 4000).unwrap();
    assert!(run.truncated.is_none());
    assert!(run.check().pass());
    let first = run.samples.first().unwrap().max_ricci_deviation;
    let last = run.samples.last().unwrap().max_ricci_deviation;
    assert!(last < 0.1 * first, "{first} -> {last}");
}
