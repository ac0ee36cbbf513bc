//! Normalized Kähler–Ricci flow `∂ω/∂t = -Ric(ω) + ω` on radial CP^n metrics.
//!
//! In potentials relative to Fubini–Study (`f = 0`) the flow reads
//! `φ̇ = log(ω_φ^n / ω^n) + φ - c(t)`, where `c(t)` is the `ω_φ`-mean of the
//! right-hand side. The constant only fixes the additive normalization, which
//! otherwise grows like `e^t`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{param, LabError, Result};
use crate::functionals::energy_between;
use crate::geometry::{
    laplacian_matrix, make_metric, Background, MetricState, Model, RadialPotential,
};
use crate::report::CheckReport;

/// Linear stability limit of classical RK4 on the negative real axis, with margin.
const RK4_REACH: f64 = 2.5;
const MAX_HALVINGS: u32 = 12;
const MAX_DT: f64 = 1e-3;
const MAX_HORIZON: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub time: f64,
    pub e0: f64,
    pub e1: f64,
    pub min_ricci: f64,
    /// Smallest eigenvalue of `Ric + ω` relative to `ω`; `Ric + ω >= 0` iff non-negative.
    pub min_ricci_plus_metric: f64,
    pub max_ricci_deviation: f64,
    pub volume_error: f64,
    pub substeps: usize,
}

#[derive(Clone, Debug)]
pub struct FlowTrajectory {
    pub samples: Vec<FlowSample>,
    pub potentials: Vec<RadialPotential>,
    /// Reason the run ended before the requested number of steps.
    pub truncated: Option<String>,
}

impl FlowTrajectory {
    pub fn final_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.time)
    }

    /// Monotonicity of `E_0` throughout and of `E_1` on steps where `Ric + ω >= 0`
    /// holds at both ends, plus volume conservation.
    pub fn check(&self) -> CheckReport {
        let mut report = CheckReport::new();
        let mut e0_rise = f64::NEG_INFINITY;
        let mut e1_rise = f64::NEG_INFINITY;
        let mut flagged = 0usize;
        for w in self.samples.windows(2) {
            e0_rise = e0_rise.max(w[1].e0 - w[0].e0);
            if w[0].min_ricci_plus_metric >= 0.0 && w[1].min_ricci_plus_metric >= 0.0 {
                e1_rise = e1_rise.max(w[1].e1 - w[0].e1);
            } else {
                flagged += 1;
            }
        }
        report.at_most(
            "E_0 per-step increase (max)",
            "the Mabuchi energy decreases along the flow",
            e0_rise.max(0.0),
            0.0,
            1e-7,
        );
        let item_e1 = crate::report::CheckItem::new(
            "E_1 per-step increase while Ric + ω >= 0 (max)",
            "E_1 decreases along the flow while Ric(ω) + ω >= 0",
            crate::report::Relation::LessEq,
            e1_rise.max(0.0),
            0.0,
            1e-7,
        )
        .with_note(format!("{flagged} steps excluded by the curvature flag"));
        report.push(item_e1);
        let vol = self
            .samples
            .iter()
            .fold(0.0f64, |m, s| m.max(s.volume_error));
        report.equal(
            "volume drift (max relative)",
            "the flow preserves the Kähler class",
            vol,
            0.0,
            1e-9,
        );
        report
    }
}

struct Flow<'a> {
    bg: &'a Arc<Background>,
}

impl Flow<'_> {
    fn velocity(&self, phi: &RadialPotential) -> Result<Vec<f64>> {
        let state = make_metric(self.bg, phi)?;
        let raw: Vec<f64> = state
            .log_density()
            .iter()
            .zip(&phi.values)
            .map(|(l, p)| l + p)
            .collect();
        let mean = state.integrate(&raw) / state.volume();
        Ok(raw.iter().map(|r| r - mean).collect())
    }

    fn rk4(&self, phi: &RadialPotential, h: f64) -> Result<RadialPotential> {
        let stage = |base: &RadialPotential, k: &[f64], c: f64| {
            RadialPotential::from_values(
                base.values.iter().zip(k).map(|(a, b)| a + c * b).collect(),
            )
        };
        let k1 = self.velocity(phi)?;
        let k2 = self.velocity(&stage(phi, &k1, 0.5 * h))?;
        let k3 = self.velocity(&stage(phi, &k2, 0.5 * h))?;
        let k4 = self.velocity(&stage(phi, &k3, h))?;
        let next = RadialPotential::from_values(
            (0..phi.len())
                .map(|i| phi.values[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect(),
        );
        make_metric(self.bg, &next)?;
        Ok(next)
    }
}

/// Gershgorin bound on the spectral radius of `Δ_φ + 1`.
fn stiffness_bound(state: &MetricState) -> f64 {
    let m = laplacian_matrix(state);
    (0..m.nrows())
        .map(|r| 1.0 + m.row(r).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn sample(fs: &MetricState, state: &MetricState, time: f64, substeps: usize) -> Result<FlowSample> {
    let min_ricci = state.min_ricci();
    // Ric + ω relative to ω is λ + 1 for each Ricci eigenvalue λ
    Ok(FlowSample {
        time,
        e0: energy_between(fs, state, 0)?,
        e1: energy_between(fs, state, 1)?,
        min_ricci,
        min_ricci_plus_metric: min_ricci + 1.0,
        max_ricci_deviation: state.max_ricci_deviation(1.0),
        volume_error: (state.volume() / fs.background().volume() - 1.0).abs(),
        substeps,
    })
}

/// Integrates the flow from `φ_0` for `steps` outer steps of length `dt`.
///
/// Each outer step is split into RK4 substeps below the explicit stability
/// limit; a substep that leaves the Kähler cone is retried at half length.
pub fn run_flow(
    bg: &Arc<Background>,
    phi0: &RadialPotential,
    dt: f64,
    steps: usize,
) -> Result<FlowTrajectory> {
    if bg.model() != Model::Cpn {
        return Err(LabError::UnsupportedModel(bg.model().name()));
    }
    if !(dt > 0.0 && dt <= MAX_DT) {
        return param(format!("dt must lie in (0, {MAX_DT}], got {dt}"));
    }
    if steps as f64 * dt > MAX_HORIZON * (1.0 + 1e-12) {
        return param(format!("steps * dt must be at most {MAX_HORIZON}"));
    }
    if phi0.len() != bg.grid_size() {
        return param("initial potential does not match the grid");
    }
    let fs = make_metric(bg, &RadialPotential::zeros(bg))?;
    let flow = Flow { bg };
    let mut phi = phi0.clone();
    let mut state = make_metric(bg, &phi)?;
    let mut samples = vec![sample(&fs, &state, 0.0, 0)?];
    let mut potentials = vec![phi.clone()];
    let mut truncated = None;
    'outer: for step in 1..=steps {
        let mut substeps = (dt * stiffness_bound(&state) / RK4_REACH).ceil().max(1.0) as usize;
        let mut halvings = 0;
        loop {
            let h = dt / substeps as f64;
            let mut trial = phi.clone();
            let mut ok = true;
            for _ in 0..substeps {
                match flow.rk4(&trial, h) {
                    Ok(next) if next.is_finite() => trial = next,
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                phi = trial;
                break;
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                truncated = Some(format!(
                    "positivity lost at t = {:.6} after {MAX_HALVINGS} step halvings",
                    (step - 1) as f64 * dt
                ));
                break 'outer;
            }
            substeps *= 2;
        }
        state = make_metric(bg, &phi)?;
        samples.push(sample(&fs, &state, step as f64 * dt, substeps)?);
        potentials.push(phi.clone());
    }
    Ok(FlowTrajectory {
        samples,
        potentials,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fs_background;

    #[test]
    fn fs_is_stationary() {
        let bg = fs_background(Model::Cpn, 2, 24).unwrap();
        let traj = run_flow(&bg, &RadialPotential::zeros(&bg), 1e-3, 200).unwrap();
        assert!(traj.truncated.is_none());
        assert!(traj.potentials.iter().all(|p| p.max_abs() < 1e-8));
    }

    #[test]
    fn rejects_bad_arguments() {
        let bg = fs_background(Model::Cpn, 1, 16).unwrap();
        let z = RadialPotential::zeros(&bg);
        assert!(run_flow(&bg, &z, 2e-3, 10).is_err());
        assert!(run_flow(&bg, &z, 1e-3, 20_000).is_err());
        let torus = fs_background(Model::Torus, 1, 16).unwrap();
        assert!(run_flow(&torus, &RadialPotential::zeros(&torus), 1e-3, 1).is_err());
    }
}
