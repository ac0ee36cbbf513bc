//! Volume, integration by parts and the spectrum of the Laplacian.

use std::sync::Arc;

use kahler_core::{
    fs_background, generate_family, laplacian, make_metric, Background, FamilyParams, MetricState,
    Model, RadialPotential,
};
use proptest::prelude::*;

fn member(model: Model, n: usize, grid: usize, seed: u64) -> (Arc<Background>, MetricState) {
    let bg = fs_background(model, n, grid).unwrap();
    let modes = if model == Model::Torus { 4 } else { 6 };
    let phi = generate_family(&bg, seed, "measure", &FamilyParams::new(1, modes, 0.5))
        .unwrap()
        .remove(0);
    let state = make_metric(&bg, &phi).unwrap();
    (bg, state)
}

fn model_and_n() -> impl Strategy<Value = (Model, usize)> {
    prop_oneof![
        (1usize..=4).prop_map(|n| (Model::Cpn, n)),
        Just((Model::Torus, 1)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn volume_is_a_class_invariant((model, n) in model_and_n(), seed in any::<u64>()) {
        let (bg, state) = member(model, n, 64, seed);
        let v = bg.volume();
        prop_assert!((state.volume() - v).abs() <= 1e-12 * v, "{} vs {v}", state.volume());
    }

    #[test]
    fn laplacian_is_self_adjoint_and_integrates_to_zero(
        (model, n) in model_and_n(),
        seed in any::<u64>(),
        a in -1.0f64..1.0,
        b in -1.0f64..1.0,
    ) {
        let (bg, state) = member(model, n, 64, seed);
        let m = bg.length();
        let (u, v): (Vec<f64>, Vec<f64>) = match model {
            Model::Cpn => bg
                .nodes()
                .iter()
                .map(|&x| {
                    let z = x / m;
                    (a * z * z + b * z.powi(3), (b * z).sin() + a * z.powi(4))
                })
                .unzip(),
            Model::Torus => bg
                .nodes()
                .iter()
                .map(|&x| {
                    let s = 2.0 * std::f64::consts::PI * x;
                    (a * s.cos() + b * (2.0 * s).sin(), b * s.sin() - a * (3.0 * s).cos())
                })
                .unzip(),
        };
        let lu = laplacian(&state, &u);
        let lv = laplacian(&state, &v);
        let weighted = |f: &[f64], g: &[f64]| -> f64 {
            state.integrate(&f.iter().zip(g).map(|(p, q)| p * q).collect::<Vec<_>>())
        };
        let scale = 1.0 + weighted(&u, &lu).abs() + weighted(&v, &lv).abs();
        prop_assert!((weighted(&u, &lv) - weighted(&v, &lu)).abs() <= 1e-9 * scale);
        prop_assert!(state.integrate(&lu).abs() <= 1e-9 * scale);
        prop_assert!(weighted(&u, &lu) <= 1e-9 * scale);
    }
}

#[test]
fn moment_coordinate_is_a_first_eigenfunction_of_fubini_study() {
    for n in 1..=4 {
        let bg = fs_background(Model::Cpn, n, 48).unwrap();
        let state = make_metric(&bg, &RadialPotential::zeros(&bg)).unwrap();
        let lx = laplacian(&state, bg.nodes());
        for (x, l) in bg.nodes().iter().zip(&lx) {
            assert!((l - (n as f64 - x)).abs() < 1e-10);
        }
    }
}
