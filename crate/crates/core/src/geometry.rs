//! Calabi-ansatz calculus for U(n)-invariant Kähler metrics on CP^n and for
//! one-variable periodic metrics on a flat torus.
//!
//! Every radial potential is stored as a function of the Fubini–Study moment
//! coordinate `x ∈ [0, m]`, `m = n + 1`. Writing `t = log|z|^2`, the FS
//! potential is `m log(1 + e^t)`, its moment map is `x = m e^t / (1 + e^t)` and
//! its profile is `w0(x) = dx/dt = x (m - x) / m`. Derivatives in `t` are
//! `w0(x) d/dx`.
//!
//! A radial (1,1)-form `√-1∂∂̄v` is diagonal in the frame of the FS metric with
//! one radial eigenvalue `(w0 v_x)_x` and `n - 1` transverse eigenvalues
//! `(m - x) v_x / m`. Both expressions are regular at the ends of the moment
//! interval, so the degenerate chart never has to be divided out explicitly.
//! Integrals of radial densities reduce to `∫_M F ω^n = c_n ∫_0^m F x^{n-1} dx`.

use std::borrow::Cow;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{param, LabError, Result};
use crate::spectral;

/// Symmetry-reduced model manifold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Complex projective space with U(n)-invariant metrics in `2πc_1`.
    Cpn,
    /// Flat torus, metrics depending on one periodic real variable.
    Torus,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Cpn => "cpn",
            Model::Torus => "torus",
        }
    }
}

/// Gauss–Legendre sampling of the Lagrange basis, used to assemble
/// self-adjoint quadratic forms without the collocation kernel artefacts.
pub(crate) struct GalerkinData {
    pub interp: DMatrix<f64>,
    pub interp_diff: DMatrix<f64>,
    /// `c_n z^{n-1} w_q`
    pub weights: Vec<f64>,
    /// `w0(z_q)`
    pub profile: Vec<f64>,
}

struct DensityOperators {
    left: DMatrix<f64>,
    right: DMatrix<f64>,
    cumulative: DMatrix<f64>,
}

/// Grid, quadrature and Fubini–Study reference data of a model manifold.
pub struct Background {
    model: Model,
    n: usize,
    length: f64,
    nodes: Vec<f64>,
    from_right: Vec<f64>,
    bary: Vec<f64>,
    quad_weights: Vec<f64>,
    fs_profile: Vec<f64>,
    volume: f64,
    diff: DMatrix<f64>,
    density_ops: OnceLock<DensityOperators>,
    stiffness: OnceLock<DMatrix<f64>>,
    galerkin: OnceLock<GalerkinData>,
}

impl std::fmt::Debug for Background {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Background")
            .field("model", &self.model)
            .field("n", &self.n)
            .field("grid_size", &self.nodes.len())
            .field("volume", &self.volume)
            .finish()
    }
}

/// Builds the reference background: Fubini–Study on CP^n (Kähler–Einstein,
/// `Ric = ω`) or the flat unit torus.
pub fn fs_background(model: Model, n: usize, grid_size: usize) -> Result<Arc<Background>> {
    if grid_size < 16 {
        return param(format!("grid_size must be at least 16, got {grid_size}"));
    }
    match model {
        Model::Cpn => {
            if !(1..=4).contains(&n) {
                return param(format!("cpn requires 1 <= n <= 4, got {n}"));
            }
            let length = (n + 1) as f64;
            let (nodes, from_right) = spectral::lobatto_nodes(grid_size, length);
            let cc = spectral::clenshaw_curtis_weights(grid_size, length);
            let measure = n as f64 * (2.0 * PI).powi(n as i32);
            let quad_weights = nodes
                .iter()
                .zip(&cc)
                .map(|(x, w)| measure * w * x.powi(n as i32 - 1))
                .collect();
            let fs_profile = nodes
                .iter()
                .zip(&from_right)
                .map(|(x, r)| x * r / length)
                .collect();
            Ok(Arc::new(Background {
                model,
                n,
                length,
                bary: spectral::lobatto_barycentric_weights(grid_size),
                diff: spectral::lobatto_diff_matrix(grid_size, length),
                nodes,
                from_right,
                quad_weights,
                fs_profile,
                volume: (2.0 * PI * length).powi(n as i32),
                density_ops: OnceLock::new(),
                stiffness: OnceLock::new(),
                galerkin: OnceLock::new(),
            }))
        }
        Model::Torus => {
            if n != 1 {
                return param(format!("torus model requires n = 1, got {n}"));
            }
            if !grid_size.is_multiple_of(2) {
                return param("torus grid_size must be even");
            }
            let h = 1.0 / grid_size as f64;
            let nodes: Vec<f64> = (0..grid_size).map(|j| j as f64 * h).collect();
            let from_right = nodes.iter().map(|x| 1.0 - x).collect();
            Ok(Arc::new(Background {
                model,
                n,
                length: 1.0,
                bary: Vec::new(),
                diff: spectral::fourier_diff_matrix(grid_size),
                nodes,
                from_right,
                quad_weights: vec![h; grid_size],
                fs_profile: Vec::new(),
                volume: 1.0,
                density_ops: OnceLock::new(),
                stiffness: OnceLock::new(),
                galerkin: OnceLock::new(),
            }))
        }
    }
}

impl Background {
    pub fn model(&self) -> Model {
        self.model
    }

    /// Complex dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid_size(&self) -> usize {
        self.nodes.len()
    }

    /// Length of the moment interval (`n + 1` on CP^n) or the torus period.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `m - x` at each node, computed without cancellation.
    pub fn nodes_from_right(&self) -> &[f64] {
        &self.from_right
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// FS profile `w0(x) = x (m - x) / m` (empty on the torus).
    pub fn fs_profile(&self) -> &[f64] {
        &self.fs_profile
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn diff_matrix(&self) -> &DMatrix<f64> {
        &self.diff
    }

    pub fn derivative(&self, values: &[f64]) -> Vec<f64> {
        spectral::apply(&self.diff, values)
    }

    /// `∫_M F ω^n` for a radial density `F`; fixed left-to-right summation.
    pub fn integrate(&self, density: &[f64]) -> f64 {
        debug_assert_eq!(density.len(), self.nodes.len());
        density
            .iter()
            .zip(&self.quad_weights)
            .map(|(f, w)| f * w)
            .sum()
    }

    /// Evaluates the interpolant of nodal `values` at an arbitrary point.
    pub fn interpolate(&self, values: &[f64], z: f64) -> f64 {
        match self.model {
            Model::Cpn => spectral::interpolate(&self.nodes, &self.bary, values, z),
            Model::Torus => trig_interpolate(values, z),
        }
    }

    /// Resamples nodal values of this background onto the grid of `target`.
    pub fn resample(&self, values: &[f64], target: &Background) -> Vec<f64> {
        target
            .nodes
            .iter()
            .map(|&z| self.interpolate(values, z))
            .collect()
    }

    /// `(m - x)/m`, the transverse factor of the chart.
    fn transverse_factor(&self, i: usize) -> f64 {
        self.from_right[i] / self.length
    }

    /// Eigenvalue pair of `√-1∂∂̄u` relative to the reference metric.
    pub fn hessian_pair(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ux = self.derivative(u);
        match self.model {
            Model::Cpn => {
                let flux: Vec<f64> = ux
                    .iter()
                    .zip(&self.fs_profile)
                    .map(|(d, w)| d * w)
                    .collect();
                let radial = self.derivative(&flux);
                let transverse = (0..ux.len())
                    .map(|i| self.transverse_factor(i) * ux[i])
                    .collect();
                (radial, transverse)
            }
            Model::Torus => {
                let uxx = self.derivative(&ux);
                (uxx.clone(), uxx)
            }
        }
    }

    /// Radial eigenvalue of `√-1∂u∧∂̄u` relative to the reference metric,
    /// i.e. `|∂u|^2_ω`.
    pub fn gradient_square(&self, u: &[f64]) -> Vec<f64> {
        let ux = self.derivative(u);
        match self.model {
            Model::Cpn => ux
                .iter()
                .zip(&self.fs_profile)
                .map(|(d, w)| w * d * d)
                .collect(),
            Model::Torus => ux.iter().map(|d| d * d).collect(),
        }
    }

    pub fn reference_slot(&self) -> FormSlot<'static> {
        let ones = vec![1.0; self.grid_size()];
        FormSlot::owned(SlotKind::ReferenceMetric, ones.clone(), ones)
    }

    /// `Ric(ω)` of the reference metric: `ω` itself on CP^n, zero on the torus.
    pub fn reference_ricci_slot(&self) -> FormSlot<'static> {
        let value = match self.model {
            Model::Cpn => 1.0,
            Model::Torus => 0.0,
        };
        let v = vec![value; self.grid_size()];
        FormSlot::owned(SlotKind::RicciOfPerturbed, v.clone(), v)
    }

    pub fn hessian_slot(&self, u: &[f64]) -> FormSlot<'static> {
        let (r, s) = self.hessian_pair(u);
        FormSlot::owned(SlotKind::Hessian, r, s)
    }

    pub fn gradient_square_slot(&self, u: &[f64]) -> FormSlot<'static> {
        let g = self.gradient_square(u);
        let zeros = vec![0.0; g.len()];
        FormSlot::owned(SlotKind::GradientSquare, g, zeros)
    }

    fn density_operators(&self) -> &DensityOperators {
        self.density_ops.get_or_init(|| {
            let size = self.grid_size();
            let n = self.n as i32;
            let nf = self.n as f64;
            let (u, w) = spectral::gauss_legendre_unit(size / 2 + self.n + 2);
            let mut left = DMatrix::zeros(size, size);
            let mut right = DMatrix::zeros(size, size);
            let mut cumulative = DMatrix::zeros(size, size);
            for i in 0..size {
                let x = self.nodes[i];
                let r = self.from_right[i];
                for (uq, wq) in u.iter().zip(&w) {
                    let z = x * uq;
                    let row = spectral::lagrange_row(&self.nodes, &self.bary, z);
                    let lw = nf * wq * uq.powi(n - 1);
                    for j in 0..size {
                        left[(i, j)] += lw * row[j];
                        cumulative[(i, j)] += x * wq * row[j];
                    }
                    let z = x + r * uq;
                    let row = spectral::lagrange_row(&self.nodes, &self.bary, z);
                    let rw = nf * wq * z.powi(n - 1);
                    for j in 0..size {
                        right[(i, j)] += rw * row[j];
                    }
                }
            }
            DensityOperators {
                left,
                right,
                cumulative,
            }
        })
    }

    /// `D · diag(w0) · D`, the FS-frame radial second-order operator.
    pub(crate) fn stiffness(&self) -> &DMatrix<f64> {
        self.stiffness.get_or_init(|| {
            let mut scaled = self.diff.clone();
            for i in 0..self.grid_size() {
                let w = match self.model {
                    Model::Cpn => self.fs_profile[i],
                    Model::Torus => 1.0,
                };
                for j in 0..self.grid_size() {
                    scaled[(i, j)] *= w;
                }
            }
            &self.diff * scaled
        })
    }

    pub(crate) fn galerkin(&self) -> &GalerkinData {
        self.galerkin.get_or_init(|| {
            let size = self.grid_size();
            let n = self.n as i32;
            let m = self.length;
            let (u, w) = spectral::gauss_legendre_unit(size + self.n + 4);
            let measure = self.n as f64 * (2.0 * PI).powi(n);
            let mut interp = DMatrix::zeros(u.len(), size);
            let mut weights = Vec::with_capacity(u.len());
            let mut profile = Vec::with_capacity(u.len());
            for (q, (uq, wq)) in u.iter().zip(&w).enumerate() {
                let z = m * uq;
                let row = spectral::lagrange_row(&self.nodes, &self.bary, z);
                for j in 0..size {
                    interp[(q, j)] = row[j];
                }
                weights.push(measure * m * wq * z.powi(n - 1));
                profile.push(z * (m - z) / m);
            }
            let interp_diff = &interp * &self.diff;
            GalerkinData {
                interp,
                interp_diff,
                weights,
                profile,
            }
        })
    }

    /// Antiderivative vanishing at `x = 0` (CP^n only).
    pub fn antiderivative(&self, values: &[f64]) -> Result<Vec<f64>> {
        if self.model != Model::Cpn {
            return Err(LabError::UnsupportedModel(self.model.name()));
        }
        Ok(spectral::apply(
            &self.density_operators().cumulative,
            values,
        ))
    }
}

fn trig_interpolate(values: &[f64], z: f64) -> f64 {
    // band-limited interpolant on an even uniform grid, Nyquist term halved
    let count = values.len();
    let half = count / 2;
    let mut acc = 0.0;
    for k in 0..=half {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in values.iter().enumerate() {
            let ang = 2.0 * PI * (k * j) as f64 / count as f64;
            re += v * ang.cos();
            im -= v * ang.sin();
        }
        let ang = 2.0 * PI * k as f64 * z;
        let term = re * ang.cos() - im * ang.sin();
        let factor = if k == 0 || k == half { 1.0 } else { 2.0 };
        acc += factor * term;
    }
    acc / count as f64
}

/// How a potential's additive constant has been fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    IntegralZero,
    SupZero,
    None,
}

/// A Kähler potential sampled on the background grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialPotential {
    pub values: Vec<f64>,
    pub normalization: Normalization,
}

impl RadialPotential {
    pub fn zeros(bg: &Background) -> Self {
        Self::from_values(vec![0.0; bg.grid_size()])
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        RadialPotential {
            values,
            normalization: Normalization::None,
        }
    }

    pub fn from_fn(bg: &Background, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values(bg.nodes().iter().map(|&x| f(x)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self::from_values(self.values.iter().map(|v| v + c).collect())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_values(self.values.iter().map(|v| v * s).collect())
    }

    pub fn plus(&self, other: &RadialPotential) -> Self {
        Self::from_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn minus(&self, other: &RadialPotential) -> Self {
        Self::from_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// Shifts so that `∫ φ ω^n = 0` for the background measure weighted by `density`.
    pub fn normalized_integral_zero(&self, bg: &Background, density: &[f64]) -> Self {
        let weighted: Vec<f64> = self
            .values
            .iter()
            .zip(density)
            .map(|(v, d)| v * d)
            .collect();
        let mass = bg.integrate(density);
        let mut out = self.shifted(-bg.integrate(&weighted) / mass);
        out.normalization = Normalization::IntegralZero;
        out
    }

    pub fn normalized_sup_zero(&self) -> Self {
        let sup = self.sup();
        let mut out = self.shifted(-sup);
        out.normalization = Normalization::SupZero;
        out
    }

    pub fn sup(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `sup φ - inf φ`.
    pub fn oscillation(&self) -> f64 {
        self.sup() - self.inf()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Relative size of the resolved spectral tail (last quarter of the
    /// Chebyshev or Fourier coefficients); a smoothness proxy.
    pub fn spectral_tail(&self, bg: &Background) -> f64 {
        let coeffs: Vec<f64> = match bg.model() {
            Model::Cpn => spectral::chebyshev_coefficients(&self.values),
            Model::Torus => {
                let count = self.values.len();
                (0..=count / 2)
                    .map(|k| {
                        let (mut re, mut im) = (0.0, 0.0);
                        for (j, v) in self.values.iter().enumerate() {
                            let ang = 2.0 * PI * (k * j) as f64 / count as f64;
                            re += v * ang.cos();
                            im += v * ang.sin();
                        }
                        (re * re + im * im).sqrt() / count as f64
                    })
                    .collect()
            }
        };
        let scale = coeffs.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        let start = 3 * coeffs.len() / 4;
        coeffs[start..].iter().fold(0.0f64, |m, c| m.max(c.abs())) / scale
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Which (1,1)-form a slot represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotKind {
    ReferenceMetric,
    PerturbedMetric,
    RicciOfPerturbed,
    Hessian,
    GradientSquare,
}

/// A radial (1,1)-form given by its eigenvalue pair at each node, relative to
/// the Fubini–Study (or flat) reference frame.
#[derive(Clone, Debug)]
pub struct FormSlot<'a> {
    pub kind: SlotKind,
    pub radial: Cow<'a, [f64]>,
    pub transverse: Cow<'a, [f64]>,
}

impl<'a> FormSlot<'a> {
    pub fn owned(kind: SlotKind, radial: Vec<f64>, transverse: Vec<f64>) -> FormSlot<'static> {
        FormSlot {
            kind,
            radial: Cow::Owned(radial),
            transverse: Cow::Owned(transverse),
        }
    }

    pub fn borrowed(kind: SlotKind, radial: &'a [f64], transverse: &'a [f64]) -> Self {
        FormSlot {
            kind,
            radial: Cow::Borrowed(radial),
            transverse: Cow::Borrowed(transverse),
        }
    }

    pub fn len(&self) -> usize {
        self.radial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radial.is_empty()
    }
}

/// Density of `α_1 ∧ … ∧ α_n` relative to `ω^n` for simultaneously diagonal
/// radial forms: the permanent of the eigenvalue matrix divided by `n!`, which
/// under the transverse symmetry reduces to `(1/n) Σ_j a^j_r Π_{l≠j} a^l_s`.
pub fn wedge_density(n: usize, slots: &[&FormSlot<'_>]) -> Result<Vec<f64>> {
    if slots.len() != n {
        return param(format!(
            "wedge_density needs exactly {n} slots, got {}",
            slots.len()
        ));
    }
    let gradients = slots
        .iter()
        .filter(|s| s.kind == SlotKind::GradientSquare)
        .count();
    if gradients > 1 {
        return param("at most one gradient_square slot is allowed");
    }
    let size = slots[0].len();
    if slots
        .iter()
        .any(|s| s.len() != size || s.transverse.len() != size)
    {
        return param("slots do not share a grid");
    }
    let inv_n = 1.0 / n as f64;
    let mut out = vec![0.0; size];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, sj) in slots.iter().enumerate() {
            let mut term = sj.radial[i];
            for (l, sl) in slots.iter().enumerate() {
                if l != j {
                    term *= sl.transverse[i];
                }
            }
            acc += term;
        }
        *o = acc * inv_n;
    }
    Ok(out)
}

/// Expands `[(slot, power), ...]` into the flat slot list `wedge_density` expects.
pub fn with_powers<'s, 'a>(parts: &[(&'s FormSlot<'a>, usize)]) -> Vec<&'s FormSlot<'a>> {
    parts
        .iter()
        .flat_map(|(slot, p)| std::iter::repeat_n(*slot, *p))
        .collect()
}

/// `∫_M density ω^n`.
pub fn integrate(bg: &Background, density: &[f64]) -> f64 {
    bg.integrate(density)
}

/// A validated Kähler metric `ω_φ = ω + √-1∂∂̄φ` with cached derived data.
#[derive(Clone, Debug)]
pub struct MetricState {
    bg: Arc<Background>,
    potential: RadialPotential,
    radial: Vec<f64>,
    transverse: Vec<f64>,
    density: Vec<f64>,
    log_density: Vec<f64>,
    ricci_radial_ref: Vec<f64>,
    ricci_transverse_ref: Vec<f64>,
    ricci_radial: Vec<f64>,
    ricci_transverse: Vec<f64>,
    moment: Vec<f64>,
}

/// Builds and validates `ω_φ`; rejects potentials that leave `P(M, ω)`.
pub fn make_metric(bg: &Arc<Background>, phi: &RadialPotential) -> Result<MetricState> {
    if phi.len() != bg.grid_size() {
        return param(format!(
            "potential has {} samples, background grid has {}",
            phi.len(),
            bg.grid_size()
        ));
    }
    if !phi.is_finite() {
        return param("potential has non-finite samples");
    }
    let (hr, hs) = bg.hessian_pair(&phi.values);
    let size = bg.grid_size();
    let n = bg.n();
    let radial: Vec<f64> = hr.iter().map(|h| 1.0 + h).collect();
    let transverse: Vec<f64> = match bg.model() {
        Model::Cpn => hs.iter().map(|h| 1.0 + h).collect(),
        Model::Torus => radial.clone(),
    };
    for i in 0..size {
        let worst = radial[i].min(transverse[i]);
        if worst.is_nan() || worst <= 0.0 {
            return Err(LabError::NotKahler {
                node: i,
                x: bg.nodes()[i],
                value: worst,
            });
        }
    }
    let (density, log_density): (Vec<f64>, Vec<f64>) = match bg.model() {
        Model::Cpn => (0..size)
            .map(|i| {
                let s = transverse[i];
                let d = radial[i];
                (s.powi(n as i32 - 1) * d, (n as f64 - 1.0) * s.ln() + d.ln())
            })
            .unzip(),
        Model::Torus => radial.iter().map(|d| (*d, d.ln())).unzip(),
    };
    let (lr, ls) = bg.hessian_pair(&log_density);
    let (ricci_radial_ref, ricci_transverse_ref): (Vec<f64>, Vec<f64>) = match bg.model() {
        Model::Cpn => (
            lr.iter().map(|v| 1.0 - v).collect(),
            ls.iter().map(|v| 1.0 - v).collect(),
        ),
        Model::Torus => {
            let r: Vec<f64> = lr.iter().map(|v| -v).collect();
            (r.clone(), r)
        }
    };
    let ricci_radial = ricci_radial_ref
        .iter()
        .zip(&radial)
        .map(|(a, b)| a / b)
        .collect();
    let ricci_transverse = ricci_transverse_ref
        .iter()
        .zip(&transverse)
        .map(|(a, b)| a / b)
        .collect();
    let moment = match bg.model() {
        Model::Cpn => bg
            .nodes()
            .iter()
            .zip(&transverse)
            .map(|(x, s)| x * s)
            .collect(),
        Model::Torus => Vec::new(),
    };
    Ok(MetricState {
        bg: Arc::clone(bg),
        potential: phi.clone(),
        radial,
        transverse,
        density,
        log_density,
        ricci_radial_ref,
        ricci_transverse_ref,
        ricci_radial,
        ricci_transverse,
        moment,
    })
}

impl MetricState {
    pub fn background(&self) -> &Arc<Background> {
        &self.bg
    }

    /// Potential relative to the background reference metric.
    pub fn potential(&self) -> &RadialPotential {
        &self.potential
    }

    /// `ω_φ^n / ω^n`.
    pub fn density_ratio(&self) -> &[f64] {
        &self.density
    }

    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    /// Eigenvalue pair of `ω_φ` relative to the reference metric.
    pub fn metric_pair(&self) -> (&[f64], &[f64]) {
        (&self.radial, &self.transverse)
    }

    /// Eigenvalue pair of `Ric(ω_φ)` relative to the reference metric.
    pub fn ricci_pair_reference(&self) -> (&[f64], &[f64]) {
        (&self.ricci_radial_ref, &self.ricci_transverse_ref)
    }

    /// Moment map `x_φ` of `ω_φ` as a function of the background moment (CP^n).
    pub fn moment_profile(&self) -> &[f64] {
        &self.moment
    }

    /// `w_φ = dx_φ/dt` at each node (CP^n).
    pub fn profile(&self) -> Vec<f64> {
        self.bg
            .fs_profile()
            .iter()
            .zip(&self.radial)
            .map(|(w, d)| w * d)
            .collect()
    }

    pub fn metric_slot(&self) -> FormSlot<'_> {
        FormSlot::borrowed(SlotKind::PerturbedMetric, &self.radial, &self.transverse)
    }

    pub fn ricci_slot(&self) -> FormSlot<'_> {
        FormSlot::borrowed(
            SlotKind::RicciOfPerturbed,
            &self.ricci_radial_ref,
            &self.ricci_transverse_ref,
        )
    }

    /// `∫ ω_φ^n`.
    pub fn volume(&self) -> f64 {
        self.bg.integrate(&self.density)
    }

    /// `∫_M u ω_φ^n`.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        let weighted: Vec<f64> = u.iter().zip(&self.density).map(|(a, b)| a * b).collect();
        self.bg.integrate(&weighted)
    }

    /// Smallest Ricci eigenvalue over all nodes and both directions.
    pub fn min_ricci(&self) -> f64 {
        let n = self.bg.n();
        let mut m = self
            .ricci_radial
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if n > 1 {
            m = self.ricci_transverse.iter().cloned().fold(m, f64::min);
        }
        m
    }

    /// Largest deviation of the Ricci eigenvalues from `target`.
    pub fn max_ricci_deviation(&self, target: f64) -> f64 {
        let n = self.bg.n();
        let mut m = self
            .ricci_radial
            .iter()
            .fold(0.0f64, |a, v| a.max((v - target).abs()));
        if n > 1 {
            m = self
                .ricci_transverse
                .iter()
                .fold(m, |a, v| a.max((v - target).abs()));
        }
        m
    }
}

/// Ricci eigenvalues relative to `ω_φ`: radial (multiplicity 1) and transverse
/// (multiplicity `n - 1`). On the torus both entries hold the single eigenvalue.
pub fn ricci_eigenvalues(state: &MetricState) -> (&[f64], &[f64]) {
    (&state.ricci_radial, &state.ricci_transverse)
}

fn binomial(n: usize, k: i64) -> f64 {
    if k < 0 || k as usize > n {
        return 0.0;
    }
    let k = k as usize;
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

pub(crate) fn choose(n: usize, k: usize) -> f64 {
    binomial(n, k as i64)
}

/// Integer coefficients `(C(n-1,k), C(n-1,k-1))` of `λ_s^k` and `λ_r λ_s^{k-1}` in
/// `σ_k` when one eigenvalue is `λ_r` and the other `n-1` equal `λ_s`.
pub fn sigma_coefficients(n: usize, k: usize) -> (u128, u128) {
    let c = |top: usize, bottom: usize| -> u128 {
        if bottom > top {
            return 0;
        }
        (0..bottom).fold(1u128, |acc, j| acc * (top - j) as u128 / (j as u128 + 1))
    };
    let lower = if k == 0 { 0 } else { c(n - 1, k - 1) };
    (c(n - 1, k), lower)
}

/// `σ_k` of the Ricci eigenvalues: `C(n-1,k) λ_s^k + C(n-1,k-1) λ_s^{k-1} λ_r`.
pub fn sigma_k(state: &MetricState, k: usize) -> Result<Vec<f64>> {
    let n = state.bg.n();
    if k > n {
        return param(format!("sigma_k needs 0 <= k <= n = {n}, got {k}"));
    }
    let (a, b) = sigma_coefficients(n, k);
    let (a, b) = (a as f64, b as f64);
    Ok(state
        .ricci_radial
        .iter()
        .zip(&state.ricci_transverse)
        .map(|(&lr, &ls)| {
            let head = if k == 0 { 1.0 } else { ls.powi(k as i32 - 1) };
            a * head * if k == 0 { 1.0 } else { ls } + b * head * lr
        })
        .collect())
}

/// `Δ_φ u = tr_{ω_φ} √-1∂∂̄u`, non-positive on the span of mean-zero functions.
pub fn laplacian(state: &MetricState, u: &[f64]) -> Vec<f64> {
    let (hr, hs) = state.bg.hessian_pair(u);
    let n = state.bg.n();
    match state.bg.model() {
        Model::Cpn => (0..u.len())
            .map(|i| hr[i] / state.radial[i] + (n as f64 - 1.0) * hs[i] / state.transverse[i])
            .collect(),
        Model::Torus => hr.iter().zip(&state.radial).map(|(h, d)| h / d).collect(),
    }
}

/// Collocation matrix of `Δ_φ` on the background grid.
pub fn laplacian_matrix(state: &MetricState) -> DMatrix<f64> {
    let bg = &state.bg;
    let size = bg.grid_size();
    let n = bg.n() as f64;
    let mut out = bg.stiffness().clone();
    for i in 0..size {
        let inv = 1.0 / state.radial[i];
        for j in 0..size {
            out[(i, j)] *= inv;
        }
    }
    if bg.model() == Model::Cpn && bg.n() > 1 {
        let d = bg.diff_matrix();
        for i in 0..size {
            let c = (n - 1.0) * bg.transverse_factor(i) / state.transverse[i];
            for j in 0..size {
                out[(i, j)] += c * d[(i, j)];
            }
        }
    }
    out
}

/// Ricci potential `f` of `ω_φ`: `Ric(ω_φ) - ω_φ = √-1∂∂̄f`, `∫ e^f ω_φ^n = V`.
///
/// Returns `f` together with the max-node residual of the `∂∂̄` identity.
pub fn ricci_potential(state: &MetricState) -> Result<(RadialPotential, f64)> {
    let bg = &state.bg;
    if bg.model() != Model::Cpn {
        return Err(LabError::UnsupportedModel(bg.model().name()));
    }
    // Ric(ω) = ω on FS, so Ric(ω_φ) - ω_φ = -√-1∂∂̄(log ρ + φ)
    let raw: Vec<f64> = state
        .log_density
        .iter()
        .zip(&state.potential.values)
        .map(|(l, p)| -l - p)
        .collect();
    let exp_raw: Vec<f64> = raw.iter().map(|v| v.exp()).collect();
    let shift = (bg.volume() / state.integrate(&exp_raw)).ln();
    let f = RadialPotential::from_values(raw.iter().map(|v| v + shift).collect());
    let (fr, fs) = bg.hessian_pair(&f.values);
    let mut defect = 0.0f64;
    for i in 0..bg.grid_size() {
        let dr = (fr[i] - (state.ricci_radial_ref[i] - state.radial[i])).abs();
        defect = defect.max(dr);
        if bg.n() > 1 {
            let ds = (fs[i] - (state.ricci_transverse_ref[i] - state.transverse[i])).abs();
            defect = defect.max(ds);
        }
    }
    Ok((f, defect))
}

/// Solves `ω_Φ^n = h ω^n` for the total potential `Φ` on CP^n.
///
/// Radial Monge–Ampère reduces to a quadrature: with `S = x_Φ/x` and
/// `T = (m - x_Φ)/(m - x)`, `S^n` and `(m^n - x_Φ^n)/(m - x)` are averages of
/// `h` against smooth kernels and `Φ_x = S - T`. `h` is rescaled to the exact
/// volume first. The result vanishes at `x = 0`.
pub fn solve_prescribed_density(bg: &Background, density: &[f64]) -> Result<RadialPotential> {
    if bg.model() != Model::Cpn {
        return Err(LabError::UnsupportedModel(bg.model().name()));
    }
    if let Some(i) = density.iter().position(|h| *h <= 0.0 || !h.is_finite()) {
        return Err(LabError::Solver(format!(
            "prescribed density not positive at node {i}: {}",
            density[i]
        )));
    }
    let scale = bg.volume() / bg.integrate(density);
    let h: Vec<f64> = density.iter().map(|v| v * scale).collect();
    let ops = bg.density_operators();
    let n = bg.n();
    let m = bg.length();
    let s_pow = spectral::apply(&ops.left, &h);
    let tail = spectral::apply(&ops.right, &h);
    let mut slope = vec![0.0; h.len()];
    for i in 0..h.len() {
        if s_pow[i].is_nan() || s_pow[i] <= 0.0 {
            return Err(LabError::Solver(format!(
                "non-invertible moment at node {i}"
            )));
        }
        let s = s_pow[i].powf(1.0 / n as f64);
        let x_phi = bg.nodes()[i] * s;
        let denom: f64 = (0..n)
            .map(|j| m.powi((n - 1 - j) as i32) * x_phi.powi(j as i32))
            .sum();
        let t = tail[i] / denom;
        slope[i] = s - t;
    }
    Ok(RadialPotential::from_values(bg.antiderivative(&slope)?))
}

/// Potential of `Φ_s^* ω_θ` relative to FS, where `Φ_s` is the flow of the
/// radial holomorphic field `z ↦ e^s z` and `ω_θ = ω + √-1∂∂̄θ` (CP^n).
///
/// The pulled-back FS potential is `m log(1 + (e^s - 1) x / m)` and the probe
/// is evaluated at the transported moment `m e^s x / ((m - x) + e^s x)`.
pub fn orbit_potential(
    bg: &Background,
    theta: &RadialPotential,
    s: f64,
) -> Result<RadialPotential> {
    if bg.model() != Model::Cpn {
        return Err(LabError::UnsupportedModel(bg.model().name()));
    }
    let m = bg.length();
    let es = s.exp();
    let values = bg
        .nodes()
        .iter()
        .zip(bg.nodes_from_right())
        .map(|(&x, &r)| {
            let base = m * ((es - 1.0) * x / m).ln_1p();
            let moved = if r == 0.0 {
                m
            } else {
                m * es * x / (r + es * x)
            };
            base + bg.interpolate(&theta.values, moved)
        })
        .collect();
    Ok(RadialPotential::from_values(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cpn(n: usize, size: usize) -> Arc<Background> {
        fs_background(Model::Cpn, n, size).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            fs_background(Model::Cpn, 0, 32),
            Err(LabError::Parameter(_))
        ));
        assert!(matches!(
            fs_background(Model::Cpn, 5, 32),
            Err(LabError::Parameter(_))
        ));
        assert!(matches!(
            fs_background(Model::Cpn, 2, 8),
            Err(LabError::Parameter(_))
        ));
        assert!(matches!(
            fs_background(Model::Torus, 2, 32),
            Err(LabError::Parameter(_))
        ));
    }

    #[test]
    fn fs_profile_vanishes_at_ends_and_is_positive_inside() {
        for n in 1..=4 {
            let bg = cpn(n, 32);
            let w = bg.fs_profile();
            assert_eq!(w[0], 0.0);
            assert_eq!(w[31], 0.0);
            assert!(w[1..31].iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn cp1_profile_matches_closed_form() {
        let bg = cpn(1, 64);
        for (x, w) in bg.nodes().iter().zip(bg.fs_profile()) {
            assert!((w - x * (2.0 - x) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn quadrature_of_one_is_volume() {
        for n in 1..=4 {
            let bg = cpn(n, 40);
            let ones = vec![1.0; 40];
            let q = bg.integrate(&ones);
            assert!((q / bg.volume() - 1.0).abs() < 1e-12, "n={n}");
        }
        let torus = fs_background(Model::Torus, 1, 64).unwrap();
        assert_eq!(torus.volume(), 1.0);
        assert!((torus.integrate(&vec![1.0; 64]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_potential_gives_reference_state() {
        let bg = cpn(2, 48);
        let s = make_metric(&bg, &RadialPotential::zeros(&bg)).unwrap();
        assert!(s.density_ratio().iter().all(|r| (r - 1.0).abs() < 1e-14));
        let (lr, ls) = ricci_eigenvalues(&s);
        assert!(lr.iter().chain(ls).all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn destabilizing_potential_is_rejected() {
        let bg = cpn(1, 32);
        let phi = RadialPotential::from_fn(&bg, |x| -3.0 * x * x);
        match make_metric(&bg, &phi) {
            Err(LabError::NotKahler { node, value, .. }) => {
                assert!(value <= 0.0);
                assert!(node < 32);
            }
            other => panic!("expected NotKahler, got {other:?}"),
        }
    }

    #[test]
    fn wedge_density_rejects_bad_slot_lists() {
        let bg = cpn(2, 16);
        let r = bg.reference_slot();
        let g = bg.gradient_square_slot(bg.nodes());
        assert!(wedge_density(2, &[&r]).is_err());
        assert!(wedge_density(2, &[&g, &g]).is_err());
        let ok = wedge_density(2, &[&r, &r]).unwrap();
        assert!(ok.iter().all(|v| (*v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn sigma_k_rejects_out_of_range() {
        let bg = cpn(2, 16);
        let s = make_metric(&bg, &RadialPotential::zeros(&bg)).unwrap();
        assert!(sigma_k(&s, 3).is_err());
    }

    #[test]
    fn ricci_potential_unsupported_on_torus() {
        let bg = fs_background(Model::Torus, 1, 32).unwrap();
        let s = make_metric(&bg, &RadialPotential::zeros(&bg)).unwrap();
        assert!(matches!(
            ricci_potential(&s),
            Err(LabError::UnsupportedModel(_))
        ));
    }

    #[test]
    fn orbit_of_fs_preserves_density_shape() {
        // Φ_s^*ω_FS is again Kähler-Einstein
        let bg = cpn(2, 64);
        let zero = RadialPotential::zeros(&bg);
        let psi = orbit_potential(&bg, &zero, 0.7).unwrap();
        let s = make_metric(&bg, &psi).unwrap();
        assert!(
            s.max_ricci_deviation(1.0) < 1e-8,
            "{}",
            s.max_ricci_deviation(1.0)
        );
        assert!((s.volume() / bg.volume() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn prescribed_density_inverts_make_metric() {
        for n in 1..=3 {
            let bg = cpn(n, 48);
            let m = bg.length();
            let phi =
                RadialPotential::from_fn(&bg, |x| 0.3 * (x / m).powi(3) - 0.2 * (x / m) * (x / m));
            let s = make_metric(&bg, &phi).unwrap();
            let back = solve_prescribed_density(&bg, s.density_ratio()).unwrap();
            let diff = back.minus(&phi.shifted(-phi.values[0]));
            assert!(diff.max_abs() < 1e-11, "n={n}: {}", diff.max_abs());
        }
    }
}
