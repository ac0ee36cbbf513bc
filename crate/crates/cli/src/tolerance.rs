//! Tolerance registry and config overrides.
//!
//! Scenario-level checks read their tolerance by key. Suites computed in the
//! core crate carry their own tolerances; an override rescales the rows whose
//! names contain one of the key's targets.

use std::collections::BTreeMap;

use kahler_core::{CheckItem, CheckReport};

pub struct TolSpec {
    pub key: &'static str,
    pub default: f64,
    pub about: &'static str,
    /// Substrings of core-suite row names governed by this key.
    pub targets: &'static [&'static str],
    /// Thresholds that a value must exceed are stricter when larger.
    pub lower_bound: bool,
}

const fn tol(key: &'static str, default: f64, about: &'static str) -> TolSpec {
    TolSpec {
        key,
        default,
        about,
        targets: &[],
        lower_bound: false,
    }
}

const fn threshold(key: &'static str, default: f64, about: &'static str) -> TolSpec {
    TolSpec {
        key,
        default,
        about,
        targets: &[],
        lower_bound: true,
    }
}

pub const REGISTRY: &[TolSpec] = &[
    tol(
        "fs_ricci",
        1e-9,
        "Ricci eigenvalues of Fubini-Study minus 1",
    ),
    tol(
        "fs_ricci_potential",
        1e-10,
        "Ricci potential of Fubini-Study",
    ),
    tol("mu", 1e-10, "mu_k minus 1"),
    tol(
        "critical_residual",
        1e-8,
        "critical-metric residual at Fubini-Study",
    ),
    tol("volume", 1e-12, "relative volume error"),
    tol(
        "fs_spectrum",
        1e-6,
        "first radial eigenvalue of Fubini-Study minus 1",
    ),
    tol(
        "path_independence",
        1e-8,
        "linear vs quadratic path, relative",
    ),
    tol(
        "closed_form",
        1e-6,
        "path integral vs closed formula, relative",
    ),
    tol("shift", 1e-10, "change under a constant shift, relative"),
    tol("cocycle", 1e-7, "cocycle sum over a triple"),
    tol("i_j", 1e-12, "I, J identities and signs"),
    tol("sign", 1e-7, "E_k >= -tol"),
    tol("cy_sign", 1e-10, "torus E_1 >= -tol"),
    tol(
        "cy_agreement",
        1e-8,
        "torus E_1 Dirichlet form vs closed formula, relative",
    ),
    tol(
        "equality_energy",
        1e-6,
        "energy threshold of the equality proxy",
    ),
    tol(
        "ke_deviation",
        1e-2,
        "deviation from Kahler-Einstein at the minimizer and in the equality proxy",
    ),
    threshold(
        "ricci_positive",
        0.0,
        "margin required of min Ricci on probes",
    ),
    tol(
        "generator_ratio",
        0.02,
        "generator deviation ratio between alpha = 1e-3 and 1e-1",
    ),
    tol("futaki", 1e-6, "|F_k| and spread of F_k"),
    tol(
        "orbit_derivative",
        1e-5,
        "orbit derivative of E_k against F_k / V",
    ),
    tol("orbit_energy", 1e-5, "|E_k| along the automorphism orbit"),
    tol(
        "flow_stationary",
        1e-8,
        "drift of Fubini-Study under the flow",
    ),
    tol(
        "flow_convergence",
        1e-3,
        "Ricci deviation at the end of a flow run",
    ),
    tol(
        "monotone",
        1e-7,
        "monotone growth of E_1 along the properness ray",
    ),
    threshold(
        "completion",
        0.9,
        "smallest completed t accepted by the properness bounds",
    ),
    TolSpec {
        key: "aubin_velocity",
        default: 1e-5,
        about: "velocity identity along the Aubin path",
        targets: &["laplacian of velocity identity"],
        lower_bound: false,
    },
    TolSpec {
        key: "aubin_ricci",
        default: 1e-6,
        about: "Ricci identity along the Aubin path",
        targets: &["Ricci identity (max residual)"],
        lower_bound: false,
    },
    TolSpec {
        key: "lambda1",
        default: 1e-6,
        about: "lambda1_radial >= t - tol",
        targets: &["lambda1_radial - t (min over the path)"],
        lower_bound: false,
    },
    TolSpec {
        key: "endpoint_formula",
        default: 1e-5,
        about: "energy formulas along the Aubin and Yau paths, relative",
        targets: &[
            "endpoint formula",
            "closed formula",
            "assembled formula",
            "difference formula",
            "matches its integral formula",
        ],
        lower_bound: false,
    },
    TolSpec {
        key: "yau_velocity",
        default: 1e-5,
        about: "velocity identity along the Yau path",
        targets: &["Yau velocity identity"],
        lower_bound: false,
    },
    TolSpec {
        key: "flow_step",
        default: 1e-7,
        about: "E_0 and E_1 per-step increase under the flow",
        targets: &["per-step increase"],
        lower_bound: false,
    },
];

fn lookup(key: &str) -> Option<&'static TolSpec> {
    REGISTRY.iter().find(|s| s.key == key)
}

pub fn default_for(key: &str) -> Option<f64> {
    lookup(key).map(|s| s.default)
}

#[derive(Clone, Copy)]
pub struct Tolerances<'a> {
    overrides: &'a BTreeMap<String, f64>,
}

impl<'a> Tolerances<'a> {
    pub fn new(overrides: &'a BTreeMap<String, f64>) -> Self {
        Tolerances { overrides }
    }

    /// Override if present, else the registry default. Panics on unregistered keys.
    pub fn get(&self, key: &str) -> f64 {
        let default = default_for(key).unwrap_or_else(|| panic!("unregistered tolerance {key}"));
        self.overrides.get(key).copied().unwrap_or(default)
    }

    /// Rescales the tolerance of core-suite rows governed by overridden keys.
    pub fn apply(&self, report: &mut CheckReport) {
        for entry in REGISTRY.iter().filter(|s| !s.targets.is_empty()) {
            let Some(&value) = self.overrides.get(entry.key) else {
                continue;
            };
            let factor = value / entry.default;
            for item in report.items.iter_mut() {
                if item.tol > 0.0 && entry.targets.iter().any(|t| item.name.contains(t)) {
                    let note = item.note.take();
                    let mut fresh = CheckItem::new(
                        std::mem::take(&mut item.name),
                        std::mem::take(&mut item.anchor),
                        item.relation,
                        item.lhs,
                        item.rhs,
                        item.tol * factor,
                    );
                    fresh.note = note;
                    *item = fresh;
                }
            }
        }
    }

    /// One informational row per override, flagging tightening below the default.
    pub fn flags(&self) -> Vec<CheckItem> {
        self.overrides
            .iter()
            .map(|(key, &value)| {
                let entry = lookup(key).expect("validated key");
                let default = entry.default;
                let tighter = if entry.lower_bound {
                    value > default
                } else {
                    value < default
                };
                let note = if tighter {
                    format!(
                        "tightened from the default {default:e}; may exceed what the grid resolves"
                    )
                } else {
                    format!("loosened from the default {default:e}")
                };
                CheckItem::info(format!("tolerance override: {key}"), "config", value, note)
            })
            .collect()
    }
}
