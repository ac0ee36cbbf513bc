//! Seeded families of admissible potentials.
//!
//! Member `i` of a family draws from its own ChaCha stream keyed by
//! `(seed, label, i)`, so members can be generated in any order or in parallel.
//! CP^n members are Chebyshev series in the moment coordinate with coefficients
//! decaying like `1/k²`; torus members are Fourier series whose second
//! derivatives decay like `1/k²`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, LabError, Result};
use crate::geometry::{make_metric, Background, Model, RadialPotential};

/// Draws allowed per member before the amplitude is declared too large.
const MAX_DRAWS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    pub count: usize,
    pub modes: usize,
    pub amplitude: f64,
    /// Lower bound on both metric eigenvalues relative to the background.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    0.05
}

impl FamilyParams {
    pub fn new(count: usize, modes: usize, amplitude: f64) -> Self {
        FamilyParams {
            count,
            modes,
            amplitude,
            margin: default_margin(),
        }
    }
}

/// 64-bit FNV-1a.
fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Independent generator for member `index` of the family `(seed, label)`.
pub fn member_rng(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(label));
    rng.set_stream(index);
    rng
}

fn draw(bg: &Background, rng: &mut ChaCha8Rng, params: &FamilyParams) -> RadialPotential {
    let coeffs: Vec<(f64, f64)> = (1..=params.modes)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let a = params.amplitude;
    match bg.model() {
        Model::Cpn => {
            let m = bg.length();
            RadialPotential::from_fn(bg, |x| {
                let z = 2.0 * x / m - 1.0;
                let (mut prev, mut cur) = (1.0, z);
                let mut sum = 0.0;
                for (k, (c, _)) in coeffs.iter().enumerate() {
                    let order = (k + 1) as f64;
                    sum += c * cur / (order * order);
                    let next = 2.0 * z * cur - prev;
                    prev = cur;
                    cur = next;
                }
                a * sum
            })
        }
        Model::Torus => RadialPotential::from_fn(bg, |x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, (c, s))| {
                    let order = (k + 1) as f64;
                    let w = 2.0 * PI * order;
                    (c * (w * x).cos() + s * (w * x).sin()) / (w * w * order * order)
                })
                .sum::<f64>()
                * a
        }),
    }
}

fn admissible(bg: &Arc<Background>, phi: &RadialPotential, margin: f64) -> bool {
    match make_metric(bg, phi) {
        Ok(state) => {
            let (radial, transverse) = state.metric_pair();
            let lowest = radial
                .iter()
                .chain(if bg.model() == Model::Cpn {
                    transverse
                } else {
                    &[]
                })
                .fold(f64::INFINITY, |m, v| m.min(*v));
            lowest >= margin
        }
        Err(_) => false,
    }
}

/// Member `index` of the family, rejection-sampled for admissibility.
pub fn family_member(
    bg: &Arc<Background>,
    seed: u64,
    label: &str,
    index: u64,
    params: &FamilyParams,
) -> Result<RadialPotential> {
    if params.amplitude == 0.0 {
        return Ok(RadialPotential::zeros(bg));
    }
    let mut rng = member_rng(seed, label, index);
    for _ in 0..MAX_DRAWS {
        let phi = draw(bg, &mut rng, params);
        if admissible(bg, &phi, params.margin) {
            return Ok(phi);
        }
    }
    Err(LabError::Parameter(format!(
        "more than 99% of draws rejected for member {index}; reduce the amplitude below {}",
        params.amplitude
    )))
}

/// `params.count` members, identical for identical `(seed, label, params)`.
pub fn generate_family(
    bg: &Arc<Background>,
    seed: u64,
    label: &str,
    params: &FamilyParams,
) -> Result<Vec<RadialPotential>> {
    if !(params.amplitude >= 0.0 && params.amplitude.is_finite()) {
        return param("amplitude must be finite and non-negative");
    }
    if params.modes == 0 {
        return param("mode count must be positive");
    }
    if !(0.0..1.0).contains(&params.margin) {
        return param("margin must lie in [0, 1)");
    }
    (0..params.count as u64)
        .into_par_iter()
        .map(|i| family_member(bg, seed, label, i, params))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fs_background;

    #[test]
    fn zero_amplitude_is_fs() {
        let bg = fs_background(Model::Cpn, 2, 32).unwrap();
        let fam = generate_family(&bg, 1, "t", &FamilyParams::new(3, 4, 0.0)).unwrap();
        assert!(fam.iter().all(|p| p.max_abs() == 0.0));
    }

    #[test]
    fn deterministic_and_order_independent() {
        let bg = fs_background(Model::Cpn, 1, 32).unwrap();
        let p = FamilyParams::new(6, 5, 0.4);
        let a = generate_family(&bg, 42, "t", &p).unwrap();
        let b = generate_family(&bg, 42, "t", &p).unwrap();
        assert_eq!(a, b);
        let single = family_member(&bg, 42, "t", 4, &p).unwrap();
        assert_eq!(single, a[4]);
        let c = generate_family(&bg, 43, "t", &p).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn huge_amplitude_is_rejected() {
        let bg = fs_background(Model::Cpn, 1, 32).unwrap();
        let err = generate_family(&bg, 7, "t", &FamilyParams::new(2, 4, 1e4));
        assert!(matches!(err, Err(LabError::Parameter(_))));
    }

    #[test]
    fn torus_members_are_periodic_and_admissible() {
        let bg = fs_background(Model::Torus, 1, 64).unwrap();
        let fam = generate_family(&bg, 3, "t", &FamilyParams::new(4, 3, 0.8)).unwrap();
        for phi in &fam {
            assert!(make_metric(&bg, phi).is_ok());
        }
    }
}
