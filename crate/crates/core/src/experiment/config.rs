//! Experiment configuration: JSON or TOML, with defaults for every field.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ansatz::{CircuitSpec, FeatureMap, LayerSpec, Preset};
use crate::dynamics::OdeSystem;
use crate::error::{HqrcError, Result};
use crate::measurement::MeasurementScheme;
use crate::metrics::DEFAULT_EPSILON;
use crate::readout::{EsnConfig, TrainingConfig};
use crate::reservoir::{Activation, ActivationSet, WeightDists};
use crate::statevector::{ShotConfig, Shots};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Lorenz63,
    DoubleScroll,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub kind: SystemKind,
    /// Overrides the built-in coefficients of `kind`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameters: Option<OdeSystem>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// RK4 substeps per recorded step; defaults per system.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
    pub train_steps: usize,
    pub prune_steps: usize,
    pub test_steps: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            kind: SystemKind::Lorenz63,
            parameters: None,
            initial: None,
            dt: None,
            substeps: None,
            train_steps: 1500,
            prune_steps: 100,
            test_steps: 1200,
        }
    }
}

impl SystemConfig {
    pub fn ode(&self) -> Result<OdeSystem> {
        let ode = match (self.kind, self.parameters) {
            (_, None) => match self.kind {
                SystemKind::Lorenz63 => OdeSystem::lorenz63(),
                SystemKind::DoubleScroll => OdeSystem::double_scroll(),
            },
            (SystemKind::Lorenz63, Some(p @ OdeSystem::Lorenz63 { .. }))
            | (SystemKind::DoubleScroll, Some(p @ OdeSystem::DoubleScroll { .. })) => p,
            _ => return Err(HqrcError::config("system parameters do not match the system kind")),
        };
        Ok(ode)
    }

    pub fn dt(&self) -> Result<f64> {
        Ok(self.dt.unwrap_or(self.ode()?.default_dt()))
    }

    pub fn substeps(&self) -> Result<usize> {
        Ok(self.substeps.unwrap_or(self.ode()?.default_substeps()))
    }

    pub fn initial(&self) -> Result<[f64; 3]> {
        Ok(self.initial.unwrap_or(self.ode()?.default_initial()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitConfig {
    /// Named layer family; ignored when `layers` is given.
    pub preset: Preset,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<LayerSpec>>,
    pub n_qubits: usize,
    pub n_layers: usize,
    pub feature_map: FeatureMap,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Interleaved,
            layers: None,
            n_qubits: 8,
            n_layers: 1,
            feature_map: FeatureMap::Tanh,
        }
    }
}

impl CircuitConfig {
    pub fn spec(&self) -> Result<CircuitSpec> {
        match &self.layers {
            Some(layers) => {
                let spec = CircuitSpec {
                    n_qubits: self.n_qubits,
                    layers: layers.clone(),
                };
                spec.validate()?;
                Ok(spec)
            }
            None => CircuitSpec::from_preset(self.preset, self.n_qubits, self.n_layers, self.feature_map),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReservoirConfig {
    pub leak: f64,
    pub f_r: Activation,
    pub f_m: Activation,
    pub f_x: Activation,
    pub g: Activation,
    pub f_readout: Activation,
    pub h_x: Activation,
    pub weights: WeightDists,
    /// Defaults to the measurement-vector length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_res: Option<usize>,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        let a = ActivationSet::default();
        Self {
            leak: a.leak,
            f_r: a.f_r,
            f_m: a.f_m,
            f_x: a.f_x,
            g: a.g,
            f_readout: a.f_readout,
            h_x: a.h_x,
            weights: WeightDists::default(),
            n_res: None,
        }
    }
}

impl ReservoirConfig {
    pub fn activations(&self) -> ActivationSet {
        ActivationSet {
            f_r: self.f_r,
            f_m: self.f_m,
            f_x: self.f_x,
            g: self.g,
            f_readout: self.f_readout,
            h_x: self.h_x,
            leak: self.leak,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutConfig {
    pub beta: f64,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self { beta: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub shots: Shots,
    /// Coherent Gaussian angle noise.
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Hqrc,
    ClassicalEsn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub epsilon: f64,
    /// Component whose local maxima form the return map.
    pub return_map_component: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            return_map_component: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub system: SystemConfig,
    pub circuit: CircuitConfig,
    pub measurement: MeasurementScheme,
    pub reservoir: ReservoirConfig,
    pub readout: ReadoutConfig,
    pub noise: NoiseConfig,
    pub esn: EsnConfig,
    pub metrics: MetricsConfig,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Hqrc,
            system: SystemConfig::default(),
            circuit: CircuitConfig::default(),
            measurement: MeasurementScheme::default(),
            reservoir: ReservoirConfig::default(),
            readout: ReadoutConfig::default(),
            noise: NoiseConfig::default(),
            esn: EsnConfig::default(),
            metrics: MetricsConfig::default(),
            seeds: vec![0],
        }
    }
}

impl ExperimentConfig {
    /// Parse TOML or JSON; the extension decides, otherwise JSON is tried first.
    pub fn from_str_auto(text: &str, hint: Option<&str>) -> Result<Self> {
        let cfg: Self = match hint {
            Some("toml") => toml::from_str(text)?,
            Some("json") => serde_json::from_str(text)?,
            _ => match serde_json::from_str(text) {
                Ok(c) => c,
                Err(_) => toml::from_str(text)?,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        Self::from_str_auto(&text, ext.as_deref())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| HqrcError::Serialization(e.to_string()))
    }

    /// Static checks that do not need to run anything.
    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        self.training().validate()?;
        if s.test_steps == 0 {
            return Err(HqrcError::config("test length must be positive"));
        }
        let dt = s.dt()?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(HqrcError::config(format!("time step must be positive, got {dt}")));
        }
        s.initial()?;
        if !(self.metrics.epsilon > 0.0) {
            return Err(HqrcError::config("VPT threshold must be positive"));
        }
        if self.metrics.return_map_component >= 3 {
            return Err(HqrcError::config("return-map component must be 0, 1 or 2"));
        }
        if !(self.noise.sigma >= 0.0) {
            return Err(HqrcError::config(format!("noise sigma must be >= 0, got {}", self.noise.sigma)));
        }
        if matches!(self.noise.shots, Shots::Finite(0)) {
            return Err(HqrcError::config("shot count must be positive"));
        }
        match self.mode {
            Mode::Hqrc => {
                self.reservoir.activations().validate()?;
                self.circuit.spec()?;
                crate::measurement::Observables::new(self.circuit.n_qubits, &self.measurement)?;
            }
            Mode::ClassicalEsn => {
                if self.esn.n_res == 0 {
                    return Err(HqrcError::config("baseline reservoir size must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn training(&self) -> TrainingConfig {
        TrainingConfig {
            train_steps: self.system.train_steps,
            prune_steps: self.system.prune_steps,
            beta: self.readout.beta,
        }
    }

    pub fn shot_config(&self, seed: u64) -> ShotConfig {
        ShotConfig {
            shots: self.noise.shots,
            coherent_sigma: self.noise.sigma,
            rng_seed: seed,
        }
    }

    /// SHA-256 of the canonical JSON form with the seed list removed, so every
    /// seed of one configuration shares a hash.
    pub fn config_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config is always serializable");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("seeds");
        }
        // serde_json maps are ordered by key, so this string is canonical
        let canonical = serde_json::to_string(&v).expect("value is always serializable");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_standard_table() {
        let c = ExperimentConfig::default();
        assert_eq!(c.reservoir.leak, 0.7);
        assert_eq!(c.readout.beta, 1e-8);
        assert_eq!((c.system.train_steps, c.system.prune_steps, c.system.test_steps), (1500, 100, 1200));
        assert_eq!(c.reservoir.f_readout, Activation::Tanh);
        assert_eq!(c.reservoir.f_m, Activation::Identity);
        assert_eq!(c.system.dt().unwrap(), 0.01);
        c.validate().unwrap();
    }

    #[test]
    fn toml_and_json_agree() {
        let toml_text = r#"
            seeds = [1, 2]
            [system]
            kind = "double-scroll"
            train_steps = 400
            [circuit]
            preset = "L2"
            n_layers = 3
            feature_map = "pi-sigmoid"
            [measurement]
            max_order = 3
            [noise]
            shots = 1000
        "#;
        let a = ExperimentConfig::from_str_auto(toml_text, Some("toml")).unwrap();
        assert_eq!(a.system.dt().unwrap(), 0.25);
        assert_eq!(a.noise.shots, Shots::Finite(1000));
        assert_eq!(a.measurement.axes.len(), 3);
        assert_eq!(a.measurement.max_order, 3);
        let b = ExperimentConfig::from_str_auto(&a.to_json().unwrap(), None).unwrap();
        assert_eq!(a, b);
        let c = ExperimentConfig::from_str_auto(&a.to_toml().unwrap(), None).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn unknown_keys_and_names_are_rejected() {
        assert!(ExperimentConfig::from_str_auto(r#"{"bogus": 1}"#, None).is_err());
        assert!(ExperimentConfig::from_str_auto(r#"{"circuit": {"preset": "L9"}}"#, None).is_err());
        assert!(ExperimentConfig::from_str_auto(r#"{"reservoir": {"f_m": "relu"}}"#, None).is_err());
        let e = ExperimentConfig::from_str_auto(r#"{"system": {"train_steps": 10, "prune_steps": 10}}"#, None);
        assert!(matches!(e, Err(HqrcError::Config(_))));
    }

    #[test]
    fn hash_tracks_every_field_but_seeds() {
        let base = ExperimentConfig::default();
        let h = base.config_hash();
        assert_eq!(h.len(), 64);
        let mut c = base.clone();
        c.seeds = vec![5, 6, 7];
        assert_eq!(c.config_hash(), h);
        let mut c = base.clone();
        c.readout.beta = 1e-7;
        assert_ne!(c.config_hash(), h);
        let mut c = base.clone();
        c.reservoir.leak = 0.6;
        assert_ne!(c.config_hash(), h);
        let mut c = base.clone();
        c.noise.shots = Shots::Finite(10);
        assert_ne!(c.config_hash(), h);
    }
}
