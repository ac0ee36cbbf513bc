//! The energies `E_k`, Aubin–Yau `I` and `J`, critical-metric residuals
//! and the holomorphic invariants `F_k`.
//!
//! Every functional takes a reference state `a` and a target state `b` in the
//! same class, both stored as potentials over the common background. The forms
//! entering the integrands are expressed relative to the background frame, so
//! the wedge densities and quadratures do not depend on which of the two is
//! regarded as the reference.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::continuity::{derivative_stencil, PathTrajectory};
use crate::error::{param, LabError, Result};
use crate::geometry::{
    choose, laplacian, make_metric, orbit_potential, sigma_k, wedge_density, with_powers,
    Background, FormSlot, MetricState, Model, RadialPotential,
};
use crate::report::CheckReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMethod {
    Path,
    ClosedForm,
}

/// Interpolation between the reference potential and the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    /// `φ_s = s φ`
    Linear,
    /// `φ_s = s² φ`
    Quadratic,
}

impl PathKind {
    fn weight(self, s: f64) -> (f64, f64) {
        match self {
            PathKind::Linear => (s, 1.0),
            PathKind::Quadratic => (s * s, 2.0 * s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyValue {
    pub value: f64,
    pub k: usize,
    pub method: EnergyMethod,
    /// Number of `s`-intervals of the accepted Simpson rule (0 for closed form).
    pub path_resolution: usize,
    pub estimated_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FutakiValue {
    pub k: usize,
    pub value: f64,
    pub spread: f64,
}

/// `∫ weight · W[slots...] ω^n` with `weight ≡ 1` when absent.
fn wedge_integral(
    bg: &Background,
    weight: Option<&[f64]>,
    parts: &[(&FormSlot<'_>, usize)],
) -> Result<f64> {
    let slots = with_powers(parts);
    let density = wedge_density(bg.n(), &slots)?;
    Ok(match weight {
        Some(w) => {
            let prod: Vec<f64> = w.iter().zip(&density).map(|(a, b)| a * b).collect();
            bg.integrate(&prod)
        }
        None => bg.integrate(&density),
    })
}

fn check_k(bg: &Background, k: usize) -> Result<()> {
    if k > bg.n() {
        return param(format!("k must satisfy 0 <= k <= n = {}, got {k}", bg.n()));
    }
    Ok(())
}

/// `μ_k = ∫ Ric(ω)^{k+1} ∧ ω^{n-k-1} / V` for `k < n`; for `k = n` the
/// top-degree class ratio `∫ Ric(ω)^n / V`.
pub fn mu_k(bg: &Background, k: usize) -> Result<f64> {
    check_k(bg, k)?;
    let n = bg.n();
    let ric = bg.reference_ricci_slot();
    let omega = bg.reference_slot();
    let value = if k < n {
        wedge_integral(bg, None, &[(&ric, k + 1), (&omega, n - k - 1)])?
    } else {
        wedge_integral(bg, None, &[(&ric, n)])?
    };
    Ok(value / bg.volume())
}

/// `E_k(ω_a, ω_b)` from the explicit change-of-metric functionals.
///
/// `E = -a_k / V + (n - k) μ_k b / ((n + 1) V)` with
/// `a_k = Σ_{j<n-k} ∫ φ ω_b^j ∧ Ric_a^{k+1} ∧ ω_a^{n-j-k-1}
///      + Σ_{j≤k} ∫ log(ω_a^n/ω_b^n) Ric_b^j ∧ ω_b^{n-k} ∧ Ric_a^{k-j}` and
/// `b = Σ_{i≤n} ∫ φ ω_b^i ∧ ω_a^{n-i}`, where `φ = θ_b - θ_a`.
pub fn energy_between(a: &MetricState, b: &MetricState, k: usize) -> Result<f64> {
    let bg = a.background();
    check_k(bg, k)?;
    let n = bg.n();
    let phi = b.potential().minus(a.potential()).values;
    let log_ratio: Vec<f64> = a
        .log_density()
        .iter()
        .zip(b.log_density())
        .map(|(x, y)| x - y)
        .collect();
    let (oa, ob) = (a.metric_slot(), b.metric_slot());
    let (ra, rb) = (a.ricci_slot(), b.ricci_slot());

    let mut a_k = 0.0;
    for j in 0..n.saturating_sub(k) {
        a_k += wedge_integral(
            bg,
            Some(&phi),
            &[(&ob, j), (&ra, k + 1), (&oa, n - j - k - 1)],
        )?;
    }
    for j in 0..=k {
        a_k += wedge_integral(
            bg,
            Some(&log_ratio),
            &[(&rb, j), (&ob, n - k), (&ra, k - j)],
        )?;
    }
    let mut b_val = 0.0;
    if k < n {
        for i in 0..=n {
            b_val += wedge_integral(bg, Some(&phi), &[(&ob, i), (&oa, n - i)])?;
        }
    }
    let v = bg.volume();
    let mu = if k < n { mu_k(bg, k)? } else { 0.0 };
    Ok(-a_k / v + (n - k) as f64 * mu * b_val / ((n + 1) as f64 * v))
}

/// `E_{k,ω}(φ)` relative to the background reference metric, closed form.
pub fn e_k_closed(bg: &Arc<Background>, phi: &RadialPotential, k: usize) -> Result<EnergyValue> {
    let a = make_metric(bg, &RadialPotential::zeros(bg))?;
    let b = make_metric(bg, phi)?;
    Ok(EnergyValue {
        value: energy_between(&a, &b, k)?,
        k,
        method: EnergyMethod::ClosedForm,
        path_resolution: 0,
        estimated_error: 0.0,
    })
}

/// Integrand of the defining path integral at one point of the path:
/// `((k+1) ∫ Δ_s(φ̇) Ric_s^k ∧ ω_s^{n-k} - (n-k) ∫ φ̇ (Ric_s^{k+1} - μ_k ω_s^{k+1}) ∧ ω_s^{n-k-1}) / V`.
pub fn energy_rate(state: &MetricState, velocity: &[f64], k: usize, mu: f64) -> Result<f64> {
    let bg = state.background();
    let n = bg.n();
    let omega = state.metric_slot();
    let ric = state.ricci_slot();
    let lap = laplacian(state, velocity);
    let mut rate = (k + 1) as f64 * wedge_integral(bg, Some(&lap), &[(&ric, k), (&omega, n - k)])?;
    if k < n {
        let curv = wedge_integral(bg, Some(velocity), &[(&ric, k + 1), (&omega, n - k - 1)])?;
        let vol = state.integrate(velocity);
        rate -= (n - k) as f64 * (curv - mu * vol);
    }
    Ok(rate / bg.volume())
}

const PATH_TOL: f64 = 1e-9;
const PATH_MAX_INTERVALS: usize = 4096;

/// `E_k(ω_a, ω_{θ_a + φ})` by Romberg-extrapolated Simpson quadrature of the defining path integral.
pub fn e_k_path_from(
    reference: &MetricState,
    phi: &RadialPotential,
    k: usize,
    kind: PathKind,
) -> Result<EnergyValue> {
    let bg = reference.background();
    check_k(bg, k)?;
    let mu = if k < bg.n() { mu_k(bg, k)? } else { 0.0 };
    let base = reference.potential();
    let eval = |s: f64| -> Result<f64> {
        let (g, dg) = kind.weight(s);
        let pot = base.plus(&phi.scaled(g));
        let state = make_metric(bg, &pot).map_err(|e| LabError::PathBroken {
            s,
            reason: e.to_string(),
        })?;
        let velocity: Vec<f64> = phi.values.iter().map(|v| v * dg).collect();
        energy_rate(&state, &velocity, k, mu)
    };
    let mut intervals = 8usize;
    let mut samples: Vec<f64> = (0..=intervals)
        .map(|j| eval(j as f64 / intervals as f64))
        .collect::<Result<_>>()?;
    // Romberg table over successive Simpson sums
    let mut row = vec![simpson(&samples)];
    loop {
        let finer = intervals * 2;
        let mut next = Vec::with_capacity(finer + 1);
        for (j, &v) in samples.iter().enumerate().take(intervals) {
            next.push(v);
            next.push(eval((2 * j + 1) as f64 / finer as f64)?);
        }
        next.push(samples[intervals]);
        samples = next;
        intervals = finer;
        let mut new_row = vec![simpson(&samples)];
        for (i, prev) in row.iter().enumerate() {
            let factor = 4f64.powi(i as i32 + 2) - 1.0;
            let last = new_row[i];
            new_row.push(last + (last - prev) / factor);
        }
        let current = *new_row.last().expect("nonempty");
        let change = (current - row.last().expect("nonempty")).abs();
        row = new_row;
        // absolute 1e-9, tightened to relative for small energies
        let tol = PATH_TOL * current.abs().min(1.0) + 1e-14;
        if change < tol || intervals >= PATH_MAX_INTERVALS {
            return Ok(EnergyValue {
                value: current,
                k,
                method: EnergyMethod::Path,
                path_resolution: intervals,
                estimated_error: change,
            });
        }
    }
}

/// `E_{k,ω}(φ)` relative to the background reference, via the path integral.
pub fn e_k_path(
    bg: &Arc<Background>,
    phi: &RadialPotential,
    k: usize,
    kind: PathKind,
) -> Result<EnergyValue> {
    let reference = make_metric(bg, &RadialPotential::zeros(bg))?;
    e_k_path_from(&reference, phi, k, kind)
}

fn simpson(samples: &[f64]) -> f64 {
    let m = samples.len() - 1;
    let h = 1.0 / m as f64;
    let mut acc = samples[0] + samples[m];
    for (j, v) in samples.iter().enumerate().take(m).skip(1) {
        acc += if j % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

/// `∫ √-1∂φ∧∂̄φ ∧ ω_a^i ∧ ω_b^{n-1-i}` for `i = 0..n-1`.
pub fn gradient_terms(a: &MetricState, b: &MetricState, phi: &[f64]) -> Result<Vec<f64>> {
    let bg = a.background();
    let n = bg.n();
    let grad = bg.gradient_square_slot(phi);
    let (oa, ob) = (a.metric_slot(), b.metric_slot());
    (0..n)
        .map(|i| wedge_integral(bg, None, &[(&grad, 1), (&oa, i), (&ob, n - 1 - i)]))
        .collect()
}

/// Aubin–Yau `(I, J)` of `ω_b` relative to `ω_a`.
pub fn i_j_between(a: &MetricState, b: &MetricState) -> Result<(f64, f64)> {
    let bg = a.background();
    let n = bg.n();
    let phi = b.potential().minus(a.potential()).values;
    let terms = gradient_terms(a, b, &phi)?;
    let v = bg.volume();
    let i_val = terms.iter().sum::<f64>() / v;
    let j_val = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (i + 1) as f64 / (n + 1) as f64 * t)
        .sum::<f64>()
        / v;
    Ok((i_val, j_val))
}

/// `(I - J)` from its own weighted sum, `Σ (n-i)/(n+1) ∫ ...`.
pub fn i_minus_j_between(a: &MetricState, b: &MetricState) -> Result<f64> {
    let bg = a.background();
    let n = bg.n();
    let phi = b.potential().minus(a.potential()).values;
    let terms = gradient_terms(a, b, &phi)?;
    Ok(terms
        .iter()
        .enumerate()
        .map(|(i, t)| (n - i) as f64 / (n + 1) as f64 * t)
        .sum::<f64>()
        / bg.volume())
}

/// Finite-difference `d/dt (I - J)(φ_t)` against `-(1/V) ∫ φ_t Δ_φ φ̇_t ω_φ^n`
/// at every point of a continuity path, plus the sign of the derivative.
pub fn d_dt_i_minus_j_check(traj: &PathTrajectory) -> Result<CheckReport> {
    let ts = traj.times();
    if ts.len() < 3 {
        return param("trajectory needs at least 3 points for time derivatives");
    }
    let imj = traj.i_minus_j();
    let velocities = traj.velocities()?;
    let v = traj.background().volume();
    let mut worst_gap: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut worst_sign = f64::INFINITY;
    for (i, (p, vel)) in traj.points.iter().zip(&velocities).enumerate() {
        let (lo, weights) = derivative_stencil(&ts, i);
        let fd: f64 = weights
            .iter()
            .enumerate()
            .map(|(j, w)| w * imj[lo + j])
            .sum();
        let lap = laplacian(&p.state, vel);
        let w: Vec<f64> = p
            .potential
            .values
            .iter()
            .zip(&lap)
            .map(|(a, b)| a * b)
            .collect();
        let formula = -p.state.integrate(&w) / v;
        worst_gap = worst_gap.max((fd - formula).abs());
        scale = scale.max(formula.abs());
        worst_sign = worst_sign.min(formula);
    }
    let mut report = CheckReport::new();
    report.equal(
        "d/dt (I-J) matches its integral formula (max gap)",
        "d/dt (I - J)(φ_t) = -(1/V) ∫ φ_t Δφ̇_t ω_φ^n",
        worst_gap,
        0.0,
        1e-5 * (1.0 + scale),
    );
    report.at_least(
        "d/dt (I-J) >= 0 (min over t)",
        "(I - J)(φ_t) is increasing along the Aubin path",
        worst_sign,
        0.0,
        1e-8,
    );
    Ok(report)
}

/// `(I, J)` of `φ` relative to the background reference metric.
pub fn i_j(bg: &Arc<Background>, phi: &RadialPotential) -> Result<(f64, f64)> {
    let a = make_metric(bg, &RadialPotential::zeros(bg))?;
    let b = make_metric(bg, phi)?;
    i_j_between(&a, &b)
}

/// `σ_{k+1} - Δσ_k - C(n, k+1) μ_k` per node (with `σ_{n+1} = 0`).
pub fn critical_residual(state: &MetricState, k: usize) -> Result<Vec<f64>> {
    let bg = state.background();
    check_k(bg, k)?;
    let n = bg.n();
    let sk = sigma_k(state, k)?;
    let lap = laplacian(state, &sk);
    let next = if k < n {
        sigma_k(state, k + 1)?
    } else {
        vec![0.0; sk.len()]
    };
    let constant = if k < n {
        choose(n, k + 1) * mu_k(bg, k)?
    } else {
        0.0
    };
    Ok(next
        .iter()
        .zip(&lap)
        .map(|(s, l)| s - l - constant)
        .collect())
}

/// `F_k(X)` for the radial field `X = z∂_z`, evaluated on one metric:
/// `(n-k) ∫ h ω^n + ∫ ((k+1) Δh Ric^k ∧ ω^{n-k} - (n-k) h Ric^{k+1} ∧ ω^{n-k-1})`,
/// with `h` the moment map of the metric.
pub fn futaki_on(state: &MetricState, k: usize) -> Result<f64> {
    let bg = state.background();
    if bg.model() != Model::Cpn {
        return Err(LabError::UnsupportedModel(bg.model().name()));
    }
    check_k(bg, k)?;
    let n = bg.n();
    let h = state.moment_profile();
    let omega = state.metric_slot();
    let ric = state.ricci_slot();
    let lap = laplacian(state, h);
    let mut value = (k + 1) as f64 * wedge_integral(bg, Some(&lap), &[(&ric, k), (&omega, n - k)])?;
    if k < n {
        value += (n - k) as f64 * state.integrate(h);
        value -=
            (n - k) as f64 * wedge_integral(bg, Some(h), &[(&ric, k + 1), (&omega, n - k - 1)])?;
    }
    Ok(value)
}

/// `F_k(X)` over several probe potentials: mean value and metric-independence spread.
pub fn futaki_k(bg: &Arc<Background>, probes: &[RadialPotential], k: usize) -> Result<FutakiValue> {
    if bg.model() != Model::Cpn {
        return Err(LabError::UnsupportedModel(bg.model().name()));
    }
    if probes.len() < 2 {
        return param("futaki_k needs at least two probe metrics");
    }
    let values: Vec<f64> = probes
        .iter()
        .map(|p| futaki_on(&make_metric(bg, p)?, k))
        .collect::<Result<_>>()?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let spread = values.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    Ok(FutakiValue {
        k,
        value: mean,
        spread,
    })
}

/// `d/ds E_k(ω_θ, Φ_s^* ω_θ)` at `s = 0` by a fourth-order central difference.
pub fn orbit_derivative(
    bg: &Arc<Background>,
    theta: &RadialPotential,
    k: usize,
    step: f64,
) -> Result<f64> {
    let base = make_metric(bg, theta)?;
    let at = |s: f64| -> Result<f64> {
        let moved = make_metric(bg, &orbit_potential(bg, theta, s)?)?;
        energy_between(&base, &moved, k)
    };
    Ok((at(-2.0 * step)? - 8.0 * at(-step)? + 8.0 * at(step)? - at(2.0 * step)?) / (12.0 * step))
}

/// Calabi–Yau form of `E_1` on the flat torus: `(1/V) ∫ |∂ log(ω_φ^n/ω^n)|²_φ ω_φ^n`.
pub fn e1_cy(bg: &Arc<Background>, phi: &RadialPotential) -> Result<f64> {
    if bg.model() != Model::Torus {
        return Err(LabError::UnsupportedModel(bg.model().name()));
    }
    let state = make_metric(bg, phi)?;
    let grad = bg.gradient_square(state.log_density());
    Ok(bg.integrate(&grad) / bg.volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fs_background;

    fn bump(bg: &Background, amp: f64) -> RadialPotential {
        let m = bg.length();
        RadialPotential::from_fn(bg, |x| {
            amp * ((x / m) * (1.0 - x / m) + 0.3 * (x / m).powi(3))
        })
    }

    #[test]
    fn mu_is_one_on_projective_space() {
        for n in 1..=3 {
            let bg = fs_background(Model::Cpn, n, 32).unwrap();
            for k in 0..=n {
                assert!((mu_k(&bg, k).unwrap() - 1.0).abs() < 1e-12);
            }
        }
        let torus = fs_background(Model::Torus, 1, 32).unwrap();
        assert_eq!(mu_k(&torus, 0).unwrap(), 0.0);
    }

    #[test]
    fn zero_potential_has_zero_energy() {
        let bg = fs_background(Model::Cpn, 2, 32).unwrap();
        let z = RadialPotential::zeros(&bg);
        for k in 0..=2 {
            assert_eq!(e_k_closed(&bg, &z, k).unwrap().value, 0.0);
            assert_eq!(e_k_path(&bg, &z, k, PathKind::Linear).unwrap().value, 0.0);
        }
        assert_eq!(i_j(&bg, &z).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn closed_form_matches_path_on_cp2() {
        let bg = fs_background(Model::Cpn, 2, 48).unwrap();
        let phi = bump(&bg, 0.4);
        for k in 0..=2 {
            let c = e_k_closed(&bg, &phi, k).unwrap().value;
            let p = e_k_path(&bg, &phi, k, PathKind::Linear).unwrap();
            assert!(
                (c - p.value).abs() < 1e-8 * (1.0 + c.abs()),
                "k={k}: {c} vs {}",
                p.value
            );
        }
    }

    #[test]
    fn k_out_of_range_is_rejected() {
        let bg = fs_background(Model::Cpn, 1, 32).unwrap();
        let z = RadialPotential::zeros(&bg);
        assert!(e_k_closed(&bg, &z, 2).is_err());
        assert!(mu_k(&bg, 2).is_err());
    }

    #[test]
    fn i_is_twice_j_on_curves() {
        let bg = fs_background(Model::Cpn, 1, 40).unwrap();
        let (i, j) = i_j(&bg, &bump(&bg, 0.5)).unwrap();
        assert!(i > 0.0);
        assert!((i - 2.0 * j).abs() < 1e-14 * i);
    }

    #[test]
    fn path_through_non_metric_reports_break() {
        let bg = fs_background(Model::Cpn, 1, 32).unwrap();
        let bad = RadialPotential::from_fn(&bg, |x| -3.0 * x * x);
        match e_k_path(&bg, &bad, 0, PathKind::Linear) {
            Err(LabError::PathBroken { s, .. }) => assert!(s > 0.0 && s <= 1.0),
            other => panic!("expected PathBroken, got {other:?}"),
        }
    }

    #[test]
    fn futaki_rejects_torus_and_single_probe() {
        let torus = fs_background(Model::Torus, 1, 32).unwrap();
        let z = RadialPotential::zeros(&torus);
        assert!(futaki_k(&torus, &[z.clone(), z], 0).is_err());
        let bg = fs_background(Model::Cpn, 1, 32).unwrap();
        assert!(futaki_k(&bg, &[RadialPotential::zeros(&bg)], 0).is_err());
    }

    #[test]
    fn e1_cy_requires_torus() {
        let bg = fs_background(Model::Cpn, 1, 32).unwrap();
        assert!(e1_cy(&bg, &RadialPotential::zeros(&bg)).is_err());
    }
}
