//! Experiment parameterization, read from TOML.
//!
//! ```toml
//! seed = 7
//! trials = 1000000
//! analyzer_frame_sign = [1, -1]
//!
//! [source]
//! state_kind = "two_photon"      # or "hybrid"
//! theta1 = 0.0                   # hybrid phase (rad)
//! theta2 = 0.0                   # two-photon phase (rad)
//! pair_rate = 2.0e5              # pairs per second
//! white_noise = 0.0              # weight of I/d mixed into the prepared state
//! path_split = 0.5               # hybrid: probability of the U path
//! repetition_period_ns = 1000.0  # trigger period for time-tag runs
//!
//! [source.pulse]
//! y0 = 4.6
//! amplitude = 492.9
//! tc_ns = 47.5
//! w_ns = 6.3
//!
//! [memory]
//! efficiency = 0.267
//! depolarizing = 0.0
//! dephasing = 0.0
//! storage_time_ns = 100.0
//! delay_time_ns = 160.0
//! # optional: detuning_mhz, absorption_bandwidth_mhz, acceptance_bandwidth_mhz
//!
//! [losses]
//! filter_transmission = 0.3
//! fiber_coupling = 0.5
//!
//! [detectors]
//! efficiency = 0.5
//! dark_rate = 100.0              # counts per second, per detector
//! coincidence_window_ns = 10.0
//! ```
//!
//! Unknown keys anywhere are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::bandwidth_from_fwhm;

/// Upper bound on forward-retrieval efficiency of an ensemble memory.
pub const FORWARD_RETRIEVAL_BOUND: f64 = 0.54;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    /// Single photon entangled in path and polarization, `[UH, UV, DH, DV]`.
    Hybrid,
    /// Polarization-entangled photon pair, `[HH, HV, VH, VV]`.
    TwoPhoton,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseShape {
    pub y0: f64,
    pub amplitude: f64,
    pub tc_ns: f64,
    pub w_ns: f64,
}

impl PulseShape {
    /// `y0 + A·exp(−2((t − tc)/w)²)`
    pub fn eval(&self, t_ns: f64) -> f64 {
        let x = (t_ns - self.tc_ns) / self.w_ns;
        self.y0 + self.amplitude * (-2.0 * x * x).exp()
    }

    pub fn fwhm_ns(&self) -> f64 {
        self.w_ns * (2.0 * std::f64::consts::LN_2).sqrt()
    }
}

impl Default for PulseShape {
    fn default() -> Self {
        PulseShape { y0: 4.6, amplitude: 492.9, tc_ns: 47.5, w_ns: 6.3 }
    }
}

fn default_half() -> f64 {
    0.5
}

fn default_period() -> f64 {
    1000.0
}

fn default_frame() -> [i8; 2] {
    [1, 1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub state_kind: StateKind,
    #[serde(default)]
    pub theta1: f64,
    #[serde(default)]
    pub theta2: f64,
    pub pair_rate: f64,
    #[serde(default)]
    pub white_noise: f64,
    #[serde(default = "default_half")]
    pub path_split: f64,
    #[serde(default = "default_period")]
    pub repetition_period_ns: f64,
    #[serde(default)]
    pub pulse: PulseShape,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryConfig {
    pub efficiency: f64,
    #[serde(default)]
    pub depolarizing: f64,
    #[serde(default)]
    pub dephasing: f64,
    pub storage_time_ns: f64,
    pub delay_time_ns: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absorption_bandwidth_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance_bandwidth_mhz: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub filter_transmission: f64,
    pub fiber_coupling: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub efficiency: f64,
    pub dark_rate: f64,
    pub coincidence_window_ns: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub trials: u64,
    #[serde(default = "default_frame")]
    pub analyzer_frame_sign: [i8; 2],
    pub source: SourceConfig,
    pub memory: MemoryConfig,
    pub losses: LossConfig,
    pub detectors: DetectorConfig,
}

/// Which side of the memory a measurement is taken on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Source measured directly, memory bypassed.
    Input,
    /// After storage and retrieval.
    Output,
}

impl Stage {
    pub(crate) fn tag(self) -> u64 {
        match self {
            Stage::Input => 0,
            Stage::Output => 1,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks ranges and timing constraints; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let unit = [
            ("memory.efficiency", self.memory.efficiency),
            ("memory.depolarizing", self.memory.depolarizing),
            ("memory.dephasing", self.memory.dephasing),
            ("source.white_noise", self.source.white_noise),
            ("source.path_split", self.source.path_split),
            ("losses.filter_transmission", self.losses.filter_transmission),
            ("losses.fiber_coupling", self.losses.fiber_coupling),
            ("detectors.efficiency", self.detectors.efficiency),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} must lie in [0, 1]")));
            }
        }
        let non_negative = [
            ("source.pair_rate", self.source.pair_rate),
            ("detectors.dark_rate", self.detectors.dark_rate),
            ("source.pulse.amplitude", self.source.pulse.amplitude),
            ("source.pulse.y0", self.source.pulse.y0),
            ("memory.storage_time_ns", self.memory.storage_time_ns),
            ("memory.delay_time_ns", self.memory.delay_time_ns),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} = {v} must be non-negative")));
            }
        }
        let positive = [
            ("detectors.coincidence_window_ns", self.detectors.coincidence_window_ns),
            ("source.repetition_period_ns", self.source.repetition_period_ns),
            ("source.pulse.w_ns", self.source.pulse.w_ns),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        if !self.source.theta1.is_finite() || !self.source.theta2.is_finite() || !self.source.pulse.tc_ns.is_finite() {
            return Err(Error::Config("phases and pulse centre must be finite".into()));
        }
        if self.analyzer_frame_sign.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::Config(format!("analyzer_frame_sign {:?} must contain only ±1", self.analyzer_frame_sign)));
        }
        if self.source.state_kind == StateKind::TwoPhoton && !(self.memory.storage_time_ns < self.memory.delay_time_ns) {
            return Err(Error::Config(format!(
                "storage time {} ns must be shorter than the read-out delay {} ns",
                self.memory.storage_time_ns, self.memory.delay_time_ns
            )));
        }
        if let Some(bw) = self.memory.absorption_bandwidth_mhz {
            if !(bw > 0.0) {
                return Err(Error::Config(format!("memory.absorption_bandwidth_mhz = {bw} must be positive")));
            }
        }

        let mut warnings = Vec::new();
        if self.memory.efficiency > FORWARD_RETRIEVAL_BOUND {
            warnings.push(format!(
                "memory efficiency {:.3} exceeds the forward-retrieval bound {FORWARD_RETRIEVAL_BOUND}",
                self.memory.efficiency
            ));
        }
        if let Some(acc) = self.memory.acceptance_bandwidth_mhz {
            let photon = bandwidth_from_fwhm(self.source.pulse.fwhm_ns())?;
            if photon > acc {
                warnings.push(format!("photon bandwidth {photon:.1} MHz exceeds memory acceptance bandwidth {acc:.1} MHz"));
            }
        }
        Ok(warnings)
    }

    /// Transmission of the stored (anti-Stokes) arm up to the detector.
    pub fn survival(&self, stage: Stage) -> f64 {
        let path = self.losses.filter_transmission * self.losses.fiber_coupling;
        match stage {
            Stage::Input => path,
            Stage::Output => self.memory.efficiency * path,
        }
    }

    /// Probability of a dark click in one coincidence window.
    pub fn dark_probability(&self) -> f64 {
        self.detectors.dark_rate * self.detectors.coincidence_window_ns * 1e-9
    }

    pub fn frame_angles(&self, a: f64, b: f64) -> (f64, f64) {
        (self.analyzer_frame_sign[0] as f64 * a, self.analyzer_frame_sign[1] as f64 * b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
seed = 7
trials = 1000
analyzer_frame_sign = [1, -1]

[source]
state_kind = "two_photon"
pair_rate = 1.0e5

[memory]
efficiency = 0.267
storage_time_ns = 100.0
delay_time_ns = 160.0

[losses]
filter_transmission = 0.3
fiber_coupling = 0.5

[detectors]
efficiency = 0.5
dark_rate = 100.0
coincidence_window_ns = 10.0
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ScenarioConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.source.path_split, 0.5);
        assert_eq!(cfg.source.pulse, PulseShape::default());
        assert!((cfg.survival(Stage::Output) - 0.04005).abs() < 1e-12);
        assert!((cfg.survival(Stage::Input) - 0.15).abs() < 1e-12);
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash_hex(), cfg.hash_hex());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = SAMPLE.replace("pair_rate = 1.0e5", "pair_rate = 1.0e5\nbogus = 1");
        assert!(matches!(ScenarioConfig::from_toml_str(&text), Err(Error::Config(_))));
        let text = format!("{SAMPLE}\n[extra]\nx = 1\n");
        assert!(ScenarioConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn range_and_timing_checks() {
        let bad = SAMPLE.replace("efficiency = 0.5", "efficiency = 1.5");
        assert!(ScenarioConfig::from_toml_str(&bad).is_err());
        let bad = SAMPLE.replace("storage_time_ns = 100.0", "storage_time_ns = 200.0");
        assert!(ScenarioConfig::from_toml_str(&bad).is_err());
        let bad = SAMPLE.replace("[1, -1]", "[1, 0]");
        assert!(ScenarioConfig::from_toml_str(&bad).is_err());
        // hybrid storage has no read-out delay constraint
        let ok = SAMPLE.replace("two_photon", "hybrid").replace("storage_time_ns = 100.0", "storage_time_ns = 200.0");
        assert!(ScenarioConfig::from_toml_str(&ok).is_ok());
    }

    #[test]
    fn efficiency_bound_warns() {
        let cfg = ScenarioConfig::from_toml_str(SAMPLE).unwrap();
        assert!(cfg.validate().unwrap().is_empty());
        let mut hot = cfg.clone();
        hot.memory.efficiency = 0.6;
        let w = hot.validate().unwrap();
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("forward-retrieval"));
        hot.memory.efficiency = FORWARD_RETRIEVAL_BOUND;
        assert!(hot.validate().unwrap().is_empty());
    }

    #[test]
    fn bandwidth_matching_warns() {
        let mut cfg = ScenarioConfig::from_toml_str(SAMPLE).unwrap();
        cfg.memory.acceptance_bandwidth_mhz = Some(200.0);
        assert!(cfg.validate().unwrap().is_empty());
        cfg.memory.acceptance_bandwidth_mhz = Some(100.0);
        assert_eq!(cfg.validate().unwrap().len(), 1);
    }
}
