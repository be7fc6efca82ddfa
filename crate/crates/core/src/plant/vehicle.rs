use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::PlantError;

/// Ground-truth state of one vehicle in the local NED frame (x north, y east).
///
/// Heading is measured from north towards east, so a positive yaw rate turns
/// the vehicle clockwise when viewed from above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub accel: f64,
    pub yaw_rate: f64,
    pub gear: u8,
}

impl VehicleState {
    pub fn at(x: f64, y: f64, heading: f64, speed: f64) -> Self {
        VehicleState {
            x,
            y,
            heading: normalize_angle(heading),
            speed,
            accel: 0.0,
            yaw_rate: 0.0,
            gear: 1,
        }
    }
}

/// Kinematic bicycle parameters. None of these are measured values for a
/// real car; they are defaults that keep the closed loop well behaved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub max_accel: f64,
    pub max_brake: f64,
    /// Quadratic drag coefficient, in 1/m (drag = c * v^2).
    pub drag: f64,
    pub max_speed: f64,
    pub min_gear: u8,
    pub max_gear: u8,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            wheelbase: 3.0,
            max_accel: 5.0,
            max_brake: 10.0,
            drag: 0.0015,
            max_speed: 90.0,
            min_gear: 1,
            max_gear: 6,
        }
    }
}

/// Engine speed per unit road speed in each gear, in rpm per m/s. Adjacent
/// ratios stay under 6000/3500 so every shift lands inside the shift band.
pub const RPM_PER_MPS: [f64; 6] = [500.0, 350.0, 260.0, 200.0, 160.0, 130.0];

const IDLE_RPM: f64 = 1000.0;

pub fn engine_rpm(speed: f64, gear: u8) -> f64 {
    let i = (gear.max(1) as usize - 1).min(RPM_PER_MPS.len() - 1);
    (speed * RPM_PER_MPS[i]).max(IDLE_RPM)
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Advances one vehicle by `dt` seconds under the given pedal and steering
/// inputs. Pedals are fractions in [0, 1]; steering is in degrees.
pub fn step_dynamics(
    state: &VehicleState,
    accel_cmd: f64,
    brake_cmd: f64,
    steer_deg: f64,
    dt: f64,
    params: &VehicleParams,
) -> Result<VehicleState, PlantError> {
    if accel_cmd > 0.0 && brake_cmd > 0.0 {
        return Err(PlantError::SimultaneousAccelBrake {
            accel: accel_cmd,
            brake: brake_cmd,
        });
    }
    if !(dt > 0.0) {
        return Err(PlantError::NonPositiveStep(dt));
    }
    let accel_cmd = accel_cmd.clamp(0.0, 1.0);
    let brake_cmd = brake_cmd.clamp(0.0, 1.0);

    let drag = params.drag * state.speed * state.speed;
    let a = accel_cmd * params.max_accel - brake_cmd * params.max_brake - drag;
    let speed = (state.speed + a * dt).clamp(0.0, params.max_speed);
    let yaw_rate = state.speed / params.wheelbase * steer_deg.to_radians().tan();
    let heading = state.heading + yaw_rate * dt;

    // position is integrated along the pre-step heading with the pre-step speed
    let x = state.x + state.speed * state.heading.cos() * dt;
    let y = state.y + state.speed * state.heading.sin() * dt;

    Ok(VehicleState {
        x,
        y,
        heading: normalize_angle(heading),
        speed,
        accel: (speed - state.speed) / dt,
        yaw_rate,
        gear: state.gear.clamp(params.min_gear, params.max_gear),
    })
}
