//! Families depend only on `(seed, label, params)`.

use kahler_core::{family_member, fs_background, generate_family, FamilyParams, Model};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn members_are_independent_of_generation_order(seed in any::<u64>(), n in 1usize..=3) {
        let bg = fs_background(Model::Cpn, n, 32).unwrap();
        let params = FamilyParams::new(6, 5, 0.5);
        let family = generate_family(&bg, seed, "order", &params).unwrap();
        for i in (0..6).rev() {
            let alone = family_member(&bg, seed, "order", i, &params).unwrap();
            prop_assert_eq!(alone.values.clone(), family[i as usize].values.clone());
        }
        let again = generate_family(&bg, seed, "order", &params).unwrap();
        prop_assert_eq!(again.len(), family.len());
        for (a, b) in again.iter().zip(&family) {
            prop_assert_eq!(a.values.clone(), b.values.clone());
        }
    }

    #[test]
    fn labels_separate_streams(seed in any::<u64>()) {
        let bg = fs_background(Model::Torus, 1, 32).unwrap();
        let params = FamilyParams::new(2, 4, 0.5);
        let a = generate_family(&bg, seed, "alpha", &params).unwrap();
        let b = generate_family(&bg, seed, "beta", &params).unwrap();
        prop_assert_ne!(a[0].values.clone(), b[0].values.clone());
        prop_assert_ne!(a[0].values.clone(), a[1].values.clone());
    }
}

#[test]
fn oversized_amplitude_is_rejected() {
    let bg = fs_background(Model::Cpn, 2, 32).unwrap();
    let err = generate_family(&bg, 1, "big", &FamilyParams::new(1, 4, 1e4)).unwrap_err();
    assert!(err.to_string().contains("reduce the amplitude"));
}
