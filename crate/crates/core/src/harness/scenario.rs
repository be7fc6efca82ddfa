use std::collections::BTreeMap;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use super::{parse_predicate, ConfigError, FaultKind, FaultSpec, DEFAULT_RATES};
use crate::comm::{FlagColor, FlagEvent, JoystickEvent};
use crate::control::{GearConfig, LongControlConfig};
use crate::halo::{DoorConfig, GsThresholds, MuxConfig, SpeedTable, SscLimits};
use crate::localization::{CovReduction, EkfNoise};
use crate::perception::DetectionModel;
use crate::plant::{SensorNoiseModel, VehicleParams};

/// Names accepted by `disabled` / `--disable-halo-node`. `behavioral`
/// bypasses the behavioral checks in the SSC interface; the others remove
/// the node (the multiplexer is replaced by a plain EKF passthrough).
pub const DISABLEABLE_HALO_NODES: [&str; 4] = ["behavioral", "graceful_stop", "node_health_monitor", "topic_multiplexer"];

/// Node groups a crash fault can name.
pub(crate) fn node_group(name: &str) -> Vec<&str> {
    match name {
        "localization" => vec!["ekf", "map_baselink_bottom", "map_baselink_top"],
        other => vec![other],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EgoSettings {
    pub path: String,
    /// Arclength along `path` at t = 0.
    pub start_s: f64,
    pub speed_mps: f64,
}

impl Default for EgoSettings {
    fn default() -> Self {
        EgoSettings {
            path: "raceline".into(),
            start_s: 0.0,
            speed_mps: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpponentSettings {
    #[serde(default = "default_path")]
    pub path: String,
    pub start_s: f64,
    pub speed_mps: f64,
}

fn default_path() -> String {
    "raceline".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HaloSettings {
    pub mux: MuxConfig,
    pub graceful_stop: GsThresholds,
    pub heartbeat_threshold_ms: u64,
    pub moderate_brake: f64,
    pub door: DoorConfig,
    pub speeds: SpeedTable,
    pub limits: SscLimits,
    /// Safety-layer nodes to run without; see [`DISABLEABLE_HALO_NODES`].
    pub disabled: Vec<String>,
}

impl Default for HaloSettings {
    fn default() -> Self {
        HaloSettings {
            mux: MuxConfig::default(),
            graceful_stop: GsThresholds::default(),
            heartbeat_threshold_ms: 500,
            moderate_brake: 0.4,
            door: DoorConfig::default(),
            speeds: SpeedTable::default(),
            limits: SscLimits::default(),
            disabled: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSettings {
    pub long: LongControlConfig,
    pub gears: GearConfig,
}

/// A named trace predicate checked after the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssertSpec {
    pub name: String,
    pub check: String,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    /// Track file, relative to the scenario file. The built-in oval when
    /// absent.
    #[serde(default)]
    pub track: Option<String>,
    #[serde(default)]
    pub ego: EgoSettings,
    #[serde(default)]
    pub opponent: Option<OpponentSettings>,
    /// Overrides of the default node rates, Hz.
    #[serde(default)]
    pub rates: BTreeMap<String, f64>,
    #[serde(default)]
    pub noise: SensorNoiseModel,
    #[serde(default)]
    pub ekf: EkfNoise,
    #[serde(default)]
    pub cov_reduction: CovReduction,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub control: ControlSettings,
    #[serde(default)]
    pub halo: HaloSettings,
    #[serde(default)]
    pub detection: DetectionModel,
    #[serde(default, rename = "flag")]
    pub flags: Vec<FlagEvent>,
    #[serde(default)]
    pub joystick: Vec<JoystickEvent>,
    #[serde(default, rename = "fault")]
    pub faults: Vec<FaultSpec>,
    #[serde(default, rename = "assert")]
    pub asserts: Vec<AssertSpec>,
    /// Log every node tick in the trace.
    #[serde(default)]
    pub trace_ticks: bool,
    /// Directory relative paths resolve against. Not part of the file.
    #[serde(skip)]
    pub base_dir: Option<std::path::PathBuf>,
}

impl Scenario {
    /// Fault-free run on the default oval under a green flag.
    pub fn baseline(name: &str, duration_s: f64) -> Self {
        Scenario {
            name: name.to_string(),
            description: String::new(),
            duration_s,
            seed: 1,
            track: None,
            ego: EgoSettings::default(),
            opponent: None,
            rates: BTreeMap::new(),
            noise: SensorNoiseModel::default(),
            ekf: EkfNoise::default(),
            cov_reduction: CovReduction::default(),
            vehicle: VehicleParams::default(),
            control: ControlSettings::default(),
            halo: HaloSettings::default(),
            detection: DetectionModel::default(),
            flags: vec![FlagEvent {
                at_s: 0.0,
                color: FlagColor::Green,
                origin: Default::default(),
            }],
            joystick: Vec::new(),
            faults: Vec::new(),
            asserts: vec![AssertSpec {
                name: "no_stop".into(),
                check: "never(halo:graceful_stop)".into(),
            }],
            trace_ticks: false,
            base_dir: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let sc: Scenario = toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|r| format!("offset {}..{}", r.start, r.end))
                .unwrap_or_else(|| "scenario".into());
            ConfigError::new(path, e.message().to_string())
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &FsPath) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(path.display().to_string(), e.to_string()))?;
        let mut sc = Self::from_toml_str(&text).map_err(|e| ConfigError::new(format!("{}: {}", path.display(), e.path), e.message))?;
        sc.base_dir = path.parent().map(|p| p.to_path_buf());
        Ok(sc)
    }

    pub fn is_disabled(&self, node: &str) -> bool {
        self.halo.disabled.iter().any(|d| d == node)
    }

    /// Adds `node` to the disabled set.
    pub fn disable(&mut self, node: &str) -> Result<(), ConfigError> {
        if !DISABLEABLE_HALO_NODES.contains(&node) {
            return Err(ConfigError::new(
                "halo.disabled",
                format!("`{node}` is not one of {}", DISABLEABLE_HALO_NODES.join(", ")),
            ));
        }
        if !self.is_disabled(node) {
            self.halo.disabled.push(node.to_string());
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |p: String, m: String| Err(ConfigError::new(p, m));
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return err("duration_s".into(), format!("must be positive, got {}", self.duration_s));
        }
        for (node, hz) in &self.rates {
            if !DEFAULT_RATES.iter().any(|(n, _)| n == node) {
                return err(format!("rates.{node}"), "unknown node".into());
            }
            if !(*hz > 0.0) || !hz.is_finite() {
                return err(format!("rates.{node}"), format!("must be positive, got {hz}"));
            }
        }
        for (i, d) in self.halo.disabled.iter().enumerate() {
            if !DISABLEABLE_HALO_NODES.contains(&d.as_str()) {
                return err(format!("halo.disabled[{i}]"), format!("unknown safety node `{d}`"));
            }
        }
        if self.halo.door.n == 0 || self.halo.door.n > self.halo.door.k {
            return err("halo.door".into(), "needs 0 < n <= k".into());
        }
        if !(0.0..=1.0).contains(&self.halo.moderate_brake) {
            return err("halo.moderate_brake".into(), "must lie in [0, 1]".into());
        }
        if !self.detection.is_valid() {
            return err("detection".into(), "rates must lie in [0, 1] with fn + fp <= 1".into());
        }
        if let Err(e) = self.noise.validate() {
            return err("noise".into(), e.to_string());
        }
        if !(self.ego.speed_mps >= 0.0) {
            return err("ego.speed_mps".into(), "must be non-negative".into());
        }
        if let Some(o) = &self.opponent {
            if !(o.speed_mps >= 0.0) {
                return err("opponent.speed_mps".into(), "must be non-negative".into());
            }
        }
        for (i, f) in self.flags.iter().enumerate() {
            if !(f.at_s >= 0.0) {
                return err(format!("flag[{i}].at_s"), "must be non-negative".into());
            }
        }
        for (i, f) in self.faults.iter().enumerate() {
            let path = |field: &str| format!("fault[{i}].{field}");
            if !(f.at_s >= 0.0 && f.at_s <= self.duration_s) {
                return err(path("at_s"), format!("{} lies outside [0, {}]", f.at_s, self.duration_s));
            }
            match &f.kind {
                FaultKind::NodeCrash { node } | FaultKind::NodeStall { node, .. } => {
                    for n in node_group(node) {
                        if !DEFAULT_RATES.iter().any(|(name, _)| *name == n) {
                            return err(path("node"), format!("unknown node `{node}`"));
                        }
                    }
                }
                FaultKind::TopicDrop { topic, .. }
                | FaultKind::MessageDelay { topic, .. }
                | FaultKind::ValueCorrupt { topic, .. } => {
                    if !crate::bus::topics::registry().iter().any(|(t, _, _)| t == topic) {
                        return err(path("topic"), format!("unknown topic `{topic}`"));
                    }
                }
                FaultKind::CovInflate {
                    factor, target_cov, ..
                } => {
                    if factor.is_none() && target_cov.is_none() {
                        return err(path("kind"), "cov_inflate needs factor or target_cov".into());
                    }
                }
                FaultKind::DetectionBurst { fn_rate, fp_rate, .. } => {
                    let m = DetectionModel {
                        fn_rate: *fn_rate,
                        fp_rate: *fp_rate,
                        ..self.detection
                    };
                    if !m.is_valid() {
                        return err(path("fp_rate"), "rates must lie in [0, 1] with fn + fp <= 1".into());
                    }
                }
                FaultKind::RadioDeadArc { .. } | FaultKind::DiagnosticsError { .. } => {}
            }
        }
        for (i, a) in self.asserts.iter().enumerate() {
            if let Err(e) = parse_predicate(&a.check) {
                return err(format!("assert[{i}].check"), e.to_string());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_validates() {
        Scenario::baseline("b", 5.0).validate().unwrap();
    }

    #[test]
    fn errors_name_the_field() {
        let mut sc = Scenario::baseline("b", 5.0);
        sc.faults.push(FaultSpec {
            at_s: 9.0,
            kind: FaultKind::NodeCrash { node: "ekf".into() },
        });
        assert_eq!(sc.validate().unwrap_err().path, "fault[0].at_s");

        let mut sc = Scenario::baseline("b", 5.0);
        sc.faults.push(FaultSpec {
            at_s: 1.0,
            kind: FaultKind::NodeCrash { node: "nope".into() },
        });
        assert_eq!(sc.validate().unwrap_err().path, "fault[0].node");

        let mut sc = Scenario::baseline("b", 5.0);
        sc.rates.insert("ekf".into(), 0.0);
        assert_eq!(sc.validate().unwrap_err().path, "rates.ekf");

        let mut sc = Scenario::baseline("b", 5.0);
        sc.asserts[0].check = "never(".into();
        assert_eq!(sc.validate().unwrap_err().path, "assert[0].check");
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            name = "t"
            duration_s = 3.0
            seed = 9

            [ego]
            speed_mps = 20.0

            [[flag]]
            at_s = 0.0
            color = "green"

            [[fault]]
            at_s = 1.0
            kind = "node_crash"
            node = "localization"

            [[assert]]
            name = "x"
            check = "eventually(fault:node_crash)"
        "#;
        let sc = Scenario::from_toml_str(text).unwrap();
        assert_eq!(sc.seed, 9);
        assert_eq!(sc.faults.len(), 1);
        let again = Scenario::from_toml_str(&toml::to_string(&sc).unwrap()).unwrap();
        assert_eq!(again, sc);
        assert!(Scenario::from_toml_str("name = \"x\"\nduration_s = 1.0\nbogus = 1\n").is_err());
    }
}
