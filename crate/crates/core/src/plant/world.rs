use serde::{Deserialize, Serialize};

use super::{engine_rpm, step_dynamics, Link, PlantError, SensorNoiseModel, TrackModel, VehicleParams, VehicleState};
use crate::bus::{SimDuration, SimTime};

/// Longest integration substep.
const MAX_SUBSTEP: SimDuration = SimDuration::from_millis(1);

/// Actuator inputs currently applied by the drive-by-wire layer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DriveInputs {
    pub accel: f64,
    pub brake: f64,
    pub steer_deg: f64,
    pub gear: u8,
}

/// An opponent that rides a named path at constant speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Opponent {
    pub path: String,
    pub s: f64,
    pub speed: f64,
}

#[derive(Debug, Clone)]
pub struct World {
    pub track: TrackModel,
    pub params: VehicleParams,
    pub noise: SensorNoiseModel,
    pub ego: VehicleState,
    pub opponent: Option<Opponent>,
    pub inputs: DriveInputs,
    pub engine_on: bool,
    pub engine_temp: f64,
    time: SimTime,
}

impl World {
    pub fn new(track: TrackModel, params: VehicleParams, noise: SensorNoiseModel, ego: VehicleState) -> Self {
        World {
            track,
            params,
            noise,
            ego,
            opponent: None,
            inputs: DriveInputs {
                gear: ego.gear,
                ..DriveInputs::default()
            },
            engine_on: true,
            engine_temp: 90.0,
            time: SimTime::ZERO,
        }
    }

    pub fn time(&self) -> SimTime {
        self.time
    }

    /// Integrates both vehicles up to `t` in substeps of at most 1 ms.
    pub fn advance_to(&mut self, t: SimTime) -> Result<(), PlantError> {
        while self.time < t {
            let dt = t.since(self.time).min(MAX_SUBSTEP);
            let secs = dt.as_secs_f64();
            let accel = if self.engine_on { self.inputs.accel } else { 0.0 };
            let mut next = step_dynamics(&self.ego, accel, self.inputs.brake, self.inputs.steer_deg, secs, &self.params)?;
            next.gear = self.inputs.gear.clamp(self.params.min_gear, self.params.max_gear);
            self.ego = next;
            if let Some(opp) = &mut self.opponent {
                opp.s += opp.speed * secs;
            }
            // coolant drifts towards a load-dependent temperature
            let target = if self.engine_on { 85.0 + 20.0 * accel } else { 40.0 };
            self.engine_temp += (target - self.engine_temp) * secs / 30.0;
            self.time = self.time + dt;
        }
        Ok(())
    }

    pub fn opponent_state(&self) -> Option<VehicleState> {
        let opp = self.opponent.as_ref()?;
        let path = self.track.path(&opp.path)?;
        Some(path.state_at(opp.s, opp.speed))
    }

    pub fn ego_arclength(&self) -> f64 {
        self.track.arclength([self.ego.x, self.ego.y])
    }

    pub fn link_dead(&self, link: Link) -> bool {
        self.track.link_dead(link, self.ego_arclength())
    }

    /// Along-track distance from ego to opponent, positive when the
    /// opponent is ahead.
    pub fn true_separation(&self) -> Option<f64> {
        let opp = self.opponent_state()?;
        Some(self.track.true_separation(&self.ego, &opp))
    }

    pub fn engine_rpm(&self) -> f64 {
        engine_rpm(self.ego.speed, self.ego.gear)
    }

    /// Unsigned distance from the ego to the named path.
    pub fn lateral_error(&self, path: &str) -> Option<f64> {
        let p = self.track.path(path)?;
        Some(p.project([self.ego.x, self.ego.y]).lateral.abs())
    }
}
