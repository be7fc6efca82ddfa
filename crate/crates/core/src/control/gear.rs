use serde::{Deserialize, Serialize};

use crate::plant::engine_rpm;

/// Shift thresholds; invented defaults for the simulated drivetrain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GearConfig {
    pub upshift_rpm: f64,
    pub downshift_rpm: f64,
    pub min_gear: u8,
    pub max_gear: u8,
}

impl Default for GearConfig {
    fn default() -> Self {
        GearConfig {
            upshift_rpm: 6000.0,
            downshift_rpm: 3500.0,
            min_gear: 1,
            max_gear: 6,
        }
    }
}

/// Next gear from engine speed, with a hysteresis band between the shift
/// points. A downshift that would over-rev the engine at the current road
/// speed is refused.
pub fn select_gear(rpm: f64, v: f64, current: u8, cfg: &GearConfig) -> u8 {
    let g = current.clamp(cfg.min_gear, cfg.max_gear);
    if rpm > cfg.upshift_rpm && g < cfg.max_gear {
        g + 1
    } else if rpm < cfg.downshift_rpm && g > cfg.min_gear && engine_rpm(v, g - 1) <= cfg.upshift_rpm {
        g - 1
    } else {
        g
    }
}
