//! Structural properties of the energies shared by every metric in a class.

use std::sync::Arc;

use kahler_core::{
    e_k_closed, e_k_path, energy_between, fs_background, generate_family, i_j_between, make_metric,
    Background, FamilyParams, MetricState, Model, PathKind, RadialPotential,
};
use proptest::prelude::*;

fn triple(n: usize, seed: u64) -> (Arc<Background>, Vec<RadialPotential>, Vec<MetricState>) {
    let bg = fs_background(Model::Cpn, n, 256).unwrap();
    let phis = generate_family(&bg, seed, "energy", &FamilyParams::new(3, 5, 0.5)).unwrap();
    let states = phis.iter().map(|p| make_metric(&bg, p).unwrap()).collect();
    (bg, phis, states)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cocycle_and_antisymmetry(n in 1usize..=3, seed in any::<u64>()) {
        let (_, _, s) = triple(n, seed);
        for k in 0..=n {
            let ab = energy_between(&s[0], &s[1], k).unwrap();
            let bc = energy_between(&s[1], &s[2], k).unwrap();
            let ac = energy_between(&s[0], &s[2], k).unwrap();
            let ba = energy_between(&s[1], &s[0], k).unwrap();
            let scale = 1.0 + ab.abs() + bc.abs() + ac.abs();
            prop_assert!((ab + bc - ac).abs() <= 1e-9 * scale, "k={k}: {ab} + {bc} vs {ac}");
            prop_assert!((ab + ba).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn constants_do_not_change_the_energy(n in 1usize..=3, seed in any::<u64>(), c in -5.0f64..5.0) {
        let (bg, phis, s) = triple(n, seed);
        let shifted = make_metric(&bg, &phis[1].shifted(c)).unwrap();
        for k in 0..=n {
            let base = energy_between(&s[0], &s[1], k).unwrap();
            let moved = energy_between(&s[0], &shifted, k).unwrap();
            prop_assert!((base - moved).abs() <= 1e-10 * (1.0 + base.abs()));
        }
    }

    #[test]
    fn i_and_j_satisfy_their_comparison(n in 1usize..=3, seed in any::<u64>()) {
        let (_, _, s) = triple(n, seed);
        let (i, j) = i_j_between(&s[0], &s[1]).unwrap();
        let nf = n as f64;
        let tol = 1e-12 * (1.0 + i.abs());
        prop_assert!(j >= -tol && i >= j - tol);
        prop_assert!(i / (nf + 1.0) <= i - j + tol);
        prop_assert!(i - j <= nf * i / (nf + 1.0) + tol);
    }

    #[test]
    fn closed_form_agrees_with_both_paths(n in 1usize..=2, seed in any::<u64>()) {
        let (bg, phis, _) = triple(n, seed);
        for k in 0..=n {
            let closed = e_k_closed(&bg, &phis[0], k).unwrap().value;
            for kind in [PathKind::Linear, PathKind::Quadratic] {
                let path = e_k_path(&bg, &phis[0], k, kind).unwrap().value;
                prop_assert!((closed - path).abs() <= 1e-8 * (1.0 + closed.abs()), "k={k} {kind:?}: {closed} vs {path}");
            }
        }
    }
}

#[test]
fn energies_vanish_at_the_reference() {
    for n in 1..=3 {
        let bg = fs_background(Model::Cpn, n, 32).unwrap();
        let fs = make_metric(&bg, &RadialPotential::zeros(&bg)).unwrap();
        for k in 0..=n {
            assert!(energy_between(&fs, &fs, k).unwrap().abs() < 1e-14);
        }
    }
}
