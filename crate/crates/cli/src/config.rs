//! Scenario configuration files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kahler_core::{FamilyParams, Model};
use serde::{Deserialize, Serialize};

use crate::tolerance;
use crate::LabCliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    ExactIdentities,
    FsAnchors,
    EkPathIndependence,
    #[serde(rename = "prop21_agreement")]
    ClosedFormAgreement,
    Cocycle,
    #[serde(rename = "theorem1")]
    RicciPositiveBound,
    #[serde(rename = "theorem2")]
    E1LowerBound,
    #[serde(rename = "lemma32_34")]
    AubinPath,
    #[serde(rename = "lemma41")]
    YauPath,
    Futaki,
    #[serde(rename = "section5")]
    PropernessBounds,
    OrbitFlatness,
    PropernessProbe,
    KrfMonotone,
    CyTorus,
}

impl Scenario {
    pub const ALL: [Scenario; 15] = [
        Scenario::ExactIdentities,
        Scenario::FsAnchors,
        Scenario::EkPathIndependence,
        Scenario::ClosedFormAgreement,
        Scenario::Cocycle,
        Scenario::RicciPositiveBound,
        Scenario::E1LowerBound,
        Scenario::AubinPath,
        Scenario::YauPath,
        Scenario::Futaki,
        Scenario::PropernessBounds,
        Scenario::OrbitFlatness,
        Scenario::PropernessProbe,
        Scenario::KrfMonotone,
        Scenario::CyTorus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::ExactIdentities => "exact_identities",
            Scenario::FsAnchors => "fs_anchors",
            Scenario::EkPathIndependence => "ek_path_independence",
            Scenario::ClosedFormAgreement => "prop21_agreement",
            Scenario::Cocycle => "cocycle",
            Scenario::RicciPositiveBound => "theorem1",
            Scenario::E1LowerBound => "theorem2",
            Scenario::AubinPath => "lemma32_34",
            Scenario::YauPath => "lemma41",
            Scenario::Futaki => "futaki",
            Scenario::PropernessBounds => "section5",
            Scenario::OrbitFlatness => "orbit_flatness",
            Scenario::PropernessProbe => "properness_probe",
            Scenario::KrfMonotone => "krf_monotone",
            Scenario::CyTorus => "cy_torus",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Scenario::ExactIdentities => {
                "exact rational binomial identities and the sigma_k expansion"
            }
            Scenario::FsAnchors => {
                "Fubini-Study anchors: Ricci, Ricci potential, mu_k, critical residual, spectrum"
            }
            Scenario::EkPathIndependence => {
                "E_k along linear and quadratic paths, shift invariance, antisymmetry"
            }
            Scenario::ClosedFormAgreement => "E_k path integral against the closed a_k/b formula",
            Scenario::Cocycle => "E_k cocycle over triples and the I, J inequalities",
            Scenario::RicciPositiveBound => {
                "E_k >= 0 on Ricci-positive probes from Yau-path endpoints"
            }
            Scenario::E1LowerBound => "E_1 >= 0 on arbitrary seeded metrics (CP^n or torus)",
            Scenario::AubinPath => "Aubin-path identities, eigenvalue bound, E_k endpoint formula",
            Scenario::YauPath => {
                "Yau-path identities, closed E_k(psi_1) formulas, Ricci-positive generator"
            }
            Scenario::Futaki => "holomorphic invariants F_k and the orbit derivative of E_k",
            Scenario::PropernessBounds => {
                "bounds along the Aubin path used in the properness argument"
            }
            Scenario::OrbitFlatness => "E_k and F_k along the automorphism orbit of Fubini-Study",
            Scenario::PropernessProbe => "empirical growth exponent of E_1 against J on a ray",
            Scenario::KrfMonotone => {
                "Kahler-Ricci flow: stationarity, E_0/E_1 monotonicity, convergence"
            }
            Scenario::CyTorus => "flat torus: Dirichlet form of E_1, sign and minimizer",
        }
    }

    pub fn from_name(name: &str) -> Option<Scenario> {
        Scenario::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Models the scenario can run on.
    pub fn models(self) -> &'static [Model] {
        match self {
            Scenario::ExactIdentities | Scenario::FsAnchors | Scenario::E1LowerBound => {
                &[Model::Cpn, Model::Torus]
            }
            Scenario::CyTorus => &[Model::Torus],
            _ => &[Model::Cpn],
        }
    }
}

fn default_family() -> FamilyParams {
    FamilyParams::new(20, 6, 0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub model: Model,
    pub n: usize,
    pub grid_size: usize,
    pub seed: u64,
    #[serde(default = "default_family")]
    pub family: FamilyParams,
    /// Overrides keyed by the names printed by `lab list-scenarios`.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario, model: Model, n: usize, grid_size: usize, seed: u64) -> Self {
        ScenarioConfig {
            scenario,
            model,
            n,
            grid_size,
            seed,
            family: default_family(),
            tolerances: BTreeMap::new(),
            output_dir: None,
        }
    }

    pub fn with_family(mut self, count: usize, modes: usize, amplitude: f64) -> Self {
        self.family = FamilyParams::new(count, modes, amplitude);
        self
    }

    pub fn from_json(text: &str) -> Result<Self, LabCliError> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| LabCliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LabCliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabCliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), LabCliError> {
        let bad = |msg: String| Err(LabCliError::Config(msg));
        if !self.scenario.models().contains(&self.model) {
            return bad(format!(
                "scenario {} does not run on the {} model",
                self.scenario.name(),
                self.model.name()
            ));
        }
        match self.model {
            Model::Cpn if !(1..=4).contains(&self.n) => {
                return bad(format!("cpn needs 1 <= n <= 4, got {}", self.n))
            }
            Model::Torus if self.n != 1 => {
                return bad(format!("torus needs n = 1, got {}", self.n))
            }
            _ => {}
        }
        if self.grid_size < 16 {
            return bad(format!(
                "grid_size must be at least 16, got {}",
                self.grid_size
            ));
        }
        if self.family.count == 0 || self.family.modes == 0 {
            return bad("family count and modes must be positive".into());
        }
        if !(self.family.amplitude >= 0.0 && self.family.amplitude.is_finite()) {
            return bad("family amplitude must be finite and non-negative".into());
        }
        for (key, value) in &self.tolerances {
            if tolerance::default_for(key).is_none() {
                return bad(format!("unknown tolerance key {key:?}"));
            }
            if !(*value > 0.0 && value.is_finite()) {
                return bad(format!("tolerance {key:?} must be positive and finite"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"scenario": "cocycle", "model": "cpn", "n": 2, "grid_size": 64, "seed": 7}"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ScenarioConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.scenario, Scenario::Cocycle);
        assert_eq!(cfg.family.count, 20);
    }

    #[test]
    fn rejects_unknown_fields_and_scenarios() {
        let extra = MINIMAL.replace("\"seed\": 7", "\"seed\": 7, \"colour\": 1");
        assert!(ScenarioConfig::from_json(&extra).is_err());
        let unknown = MINIMAL.replace("cocycle", "no_such_scenario");
        assert!(ScenarioConfig::from_json(&unknown).is_err());
        let missing = MINIMAL.replace(", \"seed\": 7", "");
        assert!(ScenarioConfig::from_json(&missing).is_err());
    }

    #[test]
    fn rejects_bad_models_and_tolerances() {
        let torus = MINIMAL
            .replace("cpn", "torus")
            .replace("\"n\": 2", "\"n\": 1");
        assert!(ScenarioConfig::from_json(&torus).is_err());
        let tol = MINIMAL.replace(
            "\"seed\": 7",
            "\"seed\": 7, \"tolerances\": {\"nope\": 1e-3}",
        );
        assert!(ScenarioConfig::from_json(&tol).is_err());
        let ok = MINIMAL.replace(
            "\"seed\": 7",
            "\"seed\": 7, \"tolerances\": {\"cocycle\": 1e-6}",
        );
        assert!(ScenarioConfig::from_json(&ok).is_ok());
    }

    #[test]
    fn names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(Scenario::from_name(s.name()), Some(s));
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.name()));
        }
    }
}
