use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{PlantError, VehicleState};
use crate::bus::{topics, Node, NodeContext, NodeDescriptor, Payload, SimTime};
use crate::localization::{from_local_ned, GeoPoint, GnssFix, GnssUnit};
use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    /// Longitudinal acceleration, m/s^2.
    pub accel: f64,
    /// rad/s, positive clockwise seen from above.
    pub yaw_rate: f64,
    pub stamp: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WheelSpeed {
    pub speed: f64,
    pub stamp: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineReport {
    pub rpm: f64,
    pub gear: u8,
    pub engine_on: bool,
    pub temp_c: f64,
    pub stamp: SimTime,
}

/// A window of GNSS silence for one unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnssDropout {
    pub unit: GnssUnit,
    pub from_s: f64,
    pub to_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorNoiseModel {
    /// Per-axis position stddev in meters, `[top, bottom]`.
    pub gnss_stddev: [f64; 2],
    pub imu_accel_stddev: f64,
    pub imu_gyro_stddev: f64,
    pub wheel_stddev: f64,
    pub gnss_dropouts: Vec<GnssDropout>,
}

impl Default for SensorNoiseModel {
    fn default() -> Self {
        SensorNoiseModel {
            gnss_stddev: [0.02, 0.02],
            imu_accel_stddev: 0.05,
            imu_gyro_stddev: 0.002,
            wheel_stddev: 0.05,
            gnss_dropouts: Vec::new(),
        }
    }
}

impl SensorNoiseModel {
    pub fn noiseless() -> Self {
        SensorNoiseModel {
            gnss_stddev: [0.0, 0.0],
            imu_accel_stddev: 0.0,
            imu_gyro_stddev: 0.0,
            wheel_stddev: 0.0,
            gnss_dropouts: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let checks = [
            ("gnss_stddev[top]", self.gnss_stddev[0]),
            ("gnss_stddev[bottom]", self.gnss_stddev[1]),
            ("imu_accel_stddev", self.imu_accel_stddev),
            ("imu_gyro_stddev", self.imu_gyro_stddev),
            ("wheel_stddev", self.wheel_stddev),
        ];
        for (name, value) in checks {
            if !(value >= 0.0) {
                return Err(PlantError::NegativeStddev { name, value });
            }
        }
        Ok(())
    }

    pub fn gnss_stddev_for(&self, unit: GnssUnit) -> f64 {
        match unit {
            GnssUnit::Top => self.gnss_stddev[0],
            GnssUnit::Bottom => self.gnss_stddev[1],
        }
    }

    pub fn gnss_silent(&self, unit: GnssUnit, now: SimTime) -> bool {
        let t = now.as_secs_f64();
        self.gnss_dropouts
            .iter()
            .any(|d| d.unit == unit && t >= d.from_s && t < d.to_s)
    }
}

fn gauss<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> f64 {
    if sd == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sd).expect("stddev validated").sample(rng)
}

/// A fix for `unit`, or `None` while the unit is in a dropout window. The
/// reported stddev is the noise model's, i.e. the receiver self-reports its
/// accuracy.
pub fn sample_gnss<R: Rng + ?Sized>(
    truth: &VehicleState,
    noise: &SensorNoiseModel,
    unit: GnssUnit,
    origin: GeoPoint,
    now: SimTime,
    rng: &mut R,
) -> Option<GnssFix> {
    if noise.gnss_silent(unit, now) {
        return None;
    }
    let sd = noise.gnss_stddev_for(unit);
    let x = truth.x + gauss(rng, sd);
    let y = truth.y + gauss(rng, sd);
    let g = from_local_ned(x, y, origin);
    Some(GnssFix {
        lat: g.lat,
        lon: g.lon,
        lat_stddev: sd,
        lon_stddev: sd,
        stamp: now,
        unit,
    })
}

pub fn sample_imu<R: Rng + ?Sized>(truth: &VehicleState, noise: &SensorNoiseModel, now: SimTime, rng: &mut R) -> ImuSample {
    ImuSample {
        accel: truth.accel + gauss(rng, noise.imu_accel_stddev),
        yaw_rate: truth.yaw_rate + gauss(rng, noise.imu_gyro_stddev),
        stamp: now,
    }
}

pub fn sample_wheel_speed<R: Rng + ?Sized>(
    truth: &VehicleState,
    noise: &SensorNoiseModel,
    now: SimTime,
    rng: &mut R,
) -> WheelSpeed {
    WheelSpeed {
        speed: (truth.speed + gauss(rng, noise.wheel_stddev)).max(0.0),
        stamp: now,
    }
}

/// One GNSS receiver publishing fixes at 20 Hz.
pub struct GnssNode {
    unit: GnssUnit,
    rate_hz: f64,
}

impl GnssNode {
    pub fn new(unit: GnssUnit, rate_hz: f64) -> Self {
        GnssNode { unit, rate_hz }
    }

    pub fn node_name(unit: GnssUnit) -> &'static str {
        match unit {
            GnssUnit::Top => "gnss_top",
            GnssUnit::Bottom => "gnss_bottom",
        }
    }

    fn topic(&self) -> &'static str {
        match self.unit {
            GnssUnit::Top => topics::GNSS_TOP_FIX,
            GnssUnit::Bottom => topics::GNSS_BOTTOM_FIX,
        }
    }
}

impl Node for GnssNode {
    fn descriptor(&self) -> NodeDescriptor {
        NodeDescriptor::new(Self::node_name(self.unit), self.rate_hz, Vec::<String>::new(), vec![self.topic().to_string()])
    }

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        let fix = sample_gnss(
            &ctx.world.ego,
            &ctx.world.noise,
            self.unit,
            ctx.world.track.origin,
            ctx.now,
            ctx.rng,
        );
        if let Some(fix) = fix {
            ctx.publish(self.topic(), Payload::Gnss(fix))?;
        }
        Ok(())
    }
}

pub struct ImuNode {
    rate_hz: f64,
}

impl ImuNode {
    pub fn new(rate_hz: f64) -> Self {
        ImuNode { rate_hz }
    }
}

impl Node for ImuNode {
    fn descriptor(&self) -> NodeDescriptor {
        NodeDescriptor::new("imu", self.rate_hz, vec![], vec![topics::IMU])
    }

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        let s = sample_imu(&ctx.world.ego, &ctx.world.noise, ctx.now, ctx.rng);
        ctx.publish(topics::IMU, Payload::Imu(s))?;
        Ok(())
    }
}
