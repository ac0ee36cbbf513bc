//! Mixed densities of diagonal forms against a brute-force permanent.

use kahler_core::{wedge_density, FormSlot, SlotKind};
use proptest::prelude::*;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// `perm(A) / n!` for `A[j][i]` = eigenvalue `i` of form `j`.
fn mixed_discriminant(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let perms = permutations(n);
    let total: f64 = perms
        .iter()
        .map(|p| (0..n).map(|j| a[j][p[j]]).product::<f64>())
        .sum();
    total / perms.len() as f64
}

fn slots() -> impl Strategy<Value = Vec<(f64, f64)>> {
    (1usize..=5).prop_flat_map(|n| prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), n))
}

proptest! {
    #[test]
    fn density_is_the_normalized_permanent(pairs in slots()) {
        let n = pairs.len();
        let forms: Vec<FormSlot> = pairs
            .iter()
            .map(|&(r, s)| FormSlot::owned(SlotKind::Hessian, vec![r], vec![s]))
            .collect();
        let refs: Vec<&FormSlot> = forms.iter().collect();
        let got = wedge_density(n, &refs).unwrap()[0];
        let matrix: Vec<Vec<f64>> = pairs
            .iter()
            .map(|&(r, s)| std::iter::once(r).chain(std::iter::repeat_n(s, n - 1)).collect())
            .collect();
        let want = mixed_discriminant(&matrix);
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()), "{got} vs {want}");
    }

    #[test]
    fn density_is_symmetric_in_its_slots(pairs in slots(), rot in 0usize..5) {
        let n = pairs.len();
        let forms: Vec<FormSlot> = pairs
            .iter()
            .map(|&(r, s)| FormSlot::owned(SlotKind::Hessian, vec![r, s], vec![s, r]))
            .collect();
        let mut refs: Vec<&FormSlot> = forms.iter().collect();
        let base = wedge_density(n, &refs).unwrap();
        refs.rotate_left(rot % n);
        refs.reverse();
        let moved = wedge_density(n, &refs).unwrap();
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}

#[test]
fn identity_forms_give_one() {
    let one = FormSlot::owned(SlotKind::ReferenceMetric, vec![1.0; 3], vec![1.0; 3]);
    for n in 1..=4 {
        let refs = vec![&one; n];
        assert!(wedge_density(n, &refs)
            .unwrap()
            .iter()
            .all(|v| (v - 1.0).abs() < 1e-15));
    }
}

#[test]
fn rejects_wrong_arity_and_two_gradients() {
    let g = FormSlot::owned(SlotKind::GradientSquare, vec![1.0], vec![0.0]);
    assert!(wedge_density(2, &[&g]).is_err());
    assert!(wedge_density(2, &[&g, &g]).is_err());
}
