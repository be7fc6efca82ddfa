use super::{
    heading_hysteresis, to_local_ned, CovReduction, Ekf, EkfNoise, GnssUnit, LocalPose, PoseSource, DEFAULT_MIN_STEP_M,
};
use crate::bus::{topics, Node, NodeContext, NodeDescriptor, Payload, SimTime};
use crate::harness::FaultKind;
use crate::SimError;

/// Converts one GNSS unit's fixes into local poses.
pub struct MapBaselinkNode {
    unit: GnssUnit,
    rate_hz: f64,
    min_step: f64,
    prev: Option<(f64, f64)>,
    heading: f64,
}

impl MapBaselinkNode {
    pub fn new(unit: GnssUnit, rate_hz: f64, initial_heading: f64) -> Self {
        MapBaselinkNode {
            unit,
            rate_hz,
            min_step: DEFAULT_MIN_STEP_M,
            prev: None,
            heading: initial_heading,
        }
    }

    pub fn node_name(unit: GnssUnit) -> &'static str {
        match unit {
            GnssUnit::Top => "map_baselink_top",
            GnssUnit::Bottom => "map_baselink_bottom",
        }
    }

    fn topics(&self) -> (&'static str, &'static str) {
        match self.unit {
            GnssUnit::Top => (topics::GNSS_TOP_FIX, topics::TOP_CARTESIAN),
            GnssUnit::Bottom => (topics::GNSS_BOTTOM_FIX, topics::BOTTOM_CARTESIAN),
        }
    }
}

impl Node for MapBaselinkNode {
    fn descriptor(&self) -> NodeDescriptor {
        let (input, output) = self.topics();
        NodeDescriptor::new(Self::node_name(self.unit), self.rate_hz, [input], [output])
    }

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        let (_, output) = self.topics();
        let origin = ctx.world.track.origin;
        for msg in std::mem::take(&mut ctx.inbox) {
            let Payload::Gnss(fix) = msg.payload else { continue };
            let geo = super::GeoPoint {
                lat: fix.lat,
                lon: fix.lon,
            };
            let (x, y) = match to_local_ned(geo, origin) {
                Ok(p) => p,
                Err(e) => {
                    ctx.error("projection", e.to_string());
                    continue;
                }
            };
            if let Some(prev) = self.prev {
                self.heading = heading_hysteresis(prev, (x, y), self.heading, self.min_step);
            }
            self.prev = Some((x, y));
            let cov = [[fix.lat_stddev.powi(2), 0.0], [0.0, fix.lon_stddev.powi(2)]];
            let pose = LocalPose::new(x, y, self.heading, cov, PoseSource::from(self.unit), fix.stamp);
            ctx.publish(output, Payload::Pose(pose))?;
        }
        Ok(())
    }
}

/// Scheduled covariance growth applied to the EKF's published estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovInflation {
    /// Multiplier ramping linearly from 1 to `factor`.
    Factor { factor: f64, start: SimTime, ramp_s: f64 },
    /// Published scalar covariance ramping linearly from its value at
    /// `start` to `target`, then held.
    Target {
        target: f64,
        start: SimTime,
        ramp_s: f64,
        base: Option<f64>,
    },
}

impl CovInflation {
    fn progress(start: SimTime, ramp_s: f64, now: SimTime) -> f64 {
        if now < start {
            return 0.0;
        }
        if ramp_s <= 0.0 {
            return 1.0;
        }
        (now.since(start).as_secs_f64() / ramp_s).min(1.0)
    }

    /// Factor to apply to a covariance whose current scalar value is
    /// `natural`.
    fn factor(&mut self, natural: f64, now: SimTime) -> f64 {
        match self {
            CovInflation::Factor { factor, start, ramp_s } => {
                1.0 + (*factor - 1.0) * Self::progress(*start, *ramp_s, now)
            }
            CovInflation::Target {
                target,
                start,
                ramp_s,
                base,
            } => {
                if now < *start || natural <= 0.0 {
                    return 1.0;
                }
                let b = *base.get_or_insert(natural);
                let want = b + (*target - b) * Self::progress(*start, *ramp_s, now);
                (want / natural).max(1.0)
            }
        }
    }
}

/// Fuses both cartesian GNSS streams, IMU and wheel speed at 100 Hz.
pub struct EkfNode {
    ekf: Ekf,
    rate_hz: f64,
    last: SimTime,
    imu: (f64, f64),
    reduction: CovReduction,
    inflation: Option<CovInflation>,
}

impl EkfNode {
    pub fn new(initial: [f64; 4], noise: EkfNoise, rate_hz: f64, reduction: CovReduction) -> Self {
        EkfNode {
            ekf: Ekf::new(initial, [0.01, 0.01, 0.001, 0.1], noise),
            rate_hz,
            last: SimTime::ZERO,
            imu: (0.0, 0.0),
            reduction,
            inflation: None,
        }
    }

    pub fn filter(&self) -> &Ekf {
        &self.ekf
    }

    fn predict_to(&mut self, t: SimTime) -> Result<(), SimError> {
        if t > self.last {
            let dt = t.since(self.last).as_secs_f64();
            self.ekf.predict(self.imu.1, self.imu.0, dt)?;
            self.last = t;
        }
        Ok(())
    }
}

impl Node for EkfNode {
    fn descriptor(&self) -> NodeDescriptor {
        NodeDescriptor::new(
            "ekf",
            self.rate_hz,
            [topics::IMU, topics::TOP_CARTESIAN, topics::BOTTOM_CARTESIAN, topics::WHEEL_SPEED],
            [topics::EKF_ODOMETRY],
        )
    }

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        let mut inbox = std::mem::take(&mut ctx.inbox);
        inbox.sort_by_key(|m| match &m.payload {
            Payload::Pose(p) => p.stamp,
            _ => m.stamp,
        });
        for msg in inbox {
            match msg.payload {
                Payload::Imu(s) => {
                    self.predict_to(s.stamp)?;
                    self.imu = (s.accel, s.yaw_rate);
                }
                Payload::Pose(p) => {
                    self.predict_to(p.stamp)?;
                    self.ekf.update_position(p.x, p.y, p.cov[0][0], p.cov[1][1])?;
                }
                Payload::WheelSpeed(w) => {
                    self.predict_to(w.stamp)?;
                    let r = self.ekf.r_wheel;
                    self.ekf.update_speed(w.speed, r)?;
                }
                _ => {}
            }
        }
        self.predict_to(ctx.now)?;

        let mut cov = self.ekf.position_cov();
        if let Some(inf) = &mut self.inflation {
            let f = inf.factor(self.reduction.apply(&cov), ctx.now);
            for row in &mut cov {
                for c in row {
                    *c *= f;
                }
            }
        }
        let x = self.ekf.x;
        let pose = LocalPose::with_reduction(x[0], x[1], x[2], cov, PoseSource::Ekf, ctx.now, self.reduction);
        ctx.publish(topics::EKF_ODOMETRY, Payload::Pose(pose))?;
        Ok(())
    }

    fn apply_fault(&mut self, fault: &FaultKind, now: SimTime) -> bool {
        let FaultKind::CovInflate {
            factor,
            target_cov,
            ramp_s,
        } = fault
        else {
            return false;
        };
        self.inflation = Some(match (factor, target_cov) {
            (_, Some(target)) => CovInflation::Target {
                target: *target,
                start: now,
                ramp_s: *ramp_s,
                base: None,
            },
            (Some(f), None) => CovInflation::Factor {
                factor: *f,
                start: now,
                ramp_s: *ramp_s,
            },
            (None, None) => return false,
        });
        true
    }
}
