use serde::{Deserialize, Serialize};

use super::ActuatorCommand;
use crate::bus::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub integral: f64,
    pub prev_error: Option<f64>,
    pub integral_min: f64,
    pub integral_max: f64,
}

impl PidState {
    pub fn new(kp: f64, ki: f64, kd: f64, integral_limit: f64) -> Self {
        PidState {
            kp,
            ki,
            kd,
            integral: 0.0,
            prev_error: None,
            integral_min: -integral_limit,
            integral_max: integral_limit,
        }
    }

    pub fn update(&mut self, error: f64, dt: f64) -> f64 {
        self.integral = (self.integral + error * dt).clamp(self.integral_min, self.integral_max);
        let deriv = match self.prev_error {
            Some(p) if dt > 0.0 => (error - p) / dt,
            _ => 0.0,
        };
        self.prev_error = Some(error);
        self.kp * error + self.ki * self.integral + self.kd * deriv
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }
}

/// Gains and deadband for the accelerator/brake PID pair. These defaults
/// are tuned for the default plant, not taken from a real vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LongControlConfig {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub integral_limit: f64,
    /// m/s.
    pub deadband: f64,
}

impl Default for LongControlConfig {
    fn default() -> Self {
        LongControlConfig {
            kp: 0.6,
            ki: 0.1,
            kd: 0.0,
            integral_limit: 10.0,
            deadband: 0.25,
        }
    }
}

impl LongControlConfig {
    pub fn pids(&self) -> (PidState, PidState) {
        let p = PidState::new(self.kp, self.ki, self.kd, self.integral_limit);
        (p, p)
    }
}

/// One step of the PID pair. The accelerator controller runs unless the
/// vehicle is faster than desired by more than the deadband, in which case
/// only the brake controller runs. The idle controller is reset so the two
/// never wind up against each other. Outputs are clamped to [0, 1].
pub fn long_control_tick(
    current_v: f64,
    desired_v: f64,
    dt: f64,
    pid_a: &mut PidState,
    pid_b: &mut PidState,
    cfg: &LongControlConfig,
) -> ActuatorCommand {
    let error = desired_v.max(0.0) - current_v;
    let (accelerator, brake) = if error >= -cfg.deadband {
        pid_b.reset();
        (pid_a.update(error, dt).clamp(0.0, 1.0), 0.0)
    } else {
        pid_a.reset();
        (0.0, pid_b.update(-error, dt).clamp(0.0, 1.0))
    };
    ActuatorCommand {
        accelerator,
        brake,
        steering: 0.0,
        gear: 0,
        stamp: SimTime::ZERO,
    }
}
