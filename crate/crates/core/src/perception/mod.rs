//! Synthetic opponent detections.
//!
//! Stands in for the whole LiDAR/RADAR/DNN pipeline by producing only its
//! output: a stream of signed separations to the opponent, corrupted by
//! missed detections and spurious "far behind" readings.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bus::{topics, Node, NodeContext, NodeDescriptor, Payload, SimDuration, SimTime};
use crate::harness::FaultKind;
use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionKind {
    TruePositive,
    FalsePositive,
}

impl DetectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectionKind::TruePositive => "true_positive",
            DetectionKind::FalsePositive => "false_positive",
        }
    }
}

/// One opponent observation. `kind` is ground truth for tests and traces;
/// safety nodes must not read it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Meters, positive when the opponent is ahead.
    pub separation: f64,
    pub stamp: SimTime,
    pub kind: DetectionKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionModel {
    pub fn_rate: f64,
    pub fp_rate: f64,
    /// False positives are drawn uniformly from `[fp_min, fp_max)`.
    pub fp_min: f64,
    pub fp_max: f64,
    pub noise_std: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        DetectionModel {
            fn_rate: 0.0,
            fp_rate: 0.0,
            fp_min: -80.0,
            fp_max: -40.0,
            noise_std: 0.0,
        }
    }
}

impl DetectionModel {
    pub fn is_valid(&self) -> bool {
        let rate = |r: f64| (0.0..=1.0).contains(&r);
        rate(self.fn_rate)
            && rate(self.fp_rate)
            && self.fn_rate + self.fp_rate <= 1.0
            && self.fp_min <= self.fp_max
            && self.noise_std >= 0.0
    }
}

/// One detector cycle. A single uniform draw splits the outcomes: a miss
/// with probability `fn_rate`, a false positive with probability `fp_rate`,
/// otherwise the truth plus Gaussian noise.
pub fn detect_tick<R: Rng + ?Sized>(truth_sep: f64, model: &DetectionModel, now: SimTime, rng: &mut R) -> Option<Detection> {
    let u: f64 = rng.random();
    if u < model.fn_rate {
        return None;
    }
    if u < model.fn_rate + model.fp_rate {
        let separation = if model.fp_max > model.fp_min {
            rng.random_range(model.fp_min..model.fp_max)
        } else {
            model.fp_min
        };
        return Some(Detection {
            separation,
            stamp: now,
            kind: DetectionKind::FalsePositive,
        });
    }
    let noise = if model.noise_std > 0.0 {
        Normal::new(0.0, model.noise_std).expect("finite stddev").sample(rng)
    } else {
        0.0
    };
    Some(Detection {
        separation: truth_sep + noise,
        stamp: now,
        kind: DetectionKind::TruePositive,
    })
}

/// Publishes detections of the opponent at 20 Hz plus a heartbeat.
pub struct LidarNode {
    rate_hz: f64,
    model: DetectionModel,
    burst: Option<(DetectionModel, SimTime)>,
    counter: u64,
}

impl LidarNode {
    pub fn new(rate_hz: f64, model: DetectionModel) -> Self {
        LidarNode {
            rate_hz,
            model,
            burst: None,
            counter: 0,
        }
    }

    fn active_model(&mut self, now: SimTime) -> DetectionModel {
        match self.burst {
            Some((m, until)) if now < until => m,
            Some(_) => {
                self.burst = None;
                self.model
            }
            None => self.model,
        }
    }
}

impl Node for LidarNode {
    fn descriptor(&self) -> NodeDescriptor {
        NodeDescriptor::new(
            "lidar",
            self.rate_hz,
            Vec::<String>::new(),
            vec![topics::DETECTIONS.to_string(), topics::heartbeat("lidar")],
        )
    }

    fn tick(&mut self, ctx: &mut NodeContext<'_>) -> Result<(), SimError> {
        let model = self.active_model(ctx.now);
        if let Some(sep) = ctx.world.true_separation() {
            if let Some(d) = detect_tick(sep, &model, ctx.now, ctx.rng) {
                ctx.publish(topics::DETECTIONS, Payload::Detection(d))?;
            }
        }
        self.counter += 1;
        ctx.publish(&topics::heartbeat("lidar"), Payload::Heartbeat { counter: self.counter })?;
        Ok(())
    }

    fn apply_fault(&mut self, fault: &FaultKind, now: SimTime) -> bool {
        let FaultKind::DetectionBurst {
            fn_rate,
            fp_rate,
            duration_s,
        } = fault
        else {
            return false;
        };
        let m = DetectionModel {
            fn_rate: *fn_rate,
            fp_rate: *fp_rate,
            ..self.model
        };
        self.burst = Some((m, now + SimDuration::from_secs_f64(*duration_s)));
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clean_model_reports_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = detect_tick(30.0, &DetectionModel::default(), SimTime::ZERO, &mut rng).unwrap();
        assert_eq!(d.separation, 30.0);
        assert_eq!(d.kind, DetectionKind::TruePositive);
    }

    #[test]
    fn certain_miss_is_silent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = DetectionModel {
            fn_rate: 1.0,
            ..DetectionModel::default()
        };
        assert!((0..1000).all(|_| detect_tick(30.0, &m, SimTime::ZERO, &mut rng).is_none()));
    }

    #[test]
    fn false_positive_reads_far_behind() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = DetectionModel {
            fp_rate: 1.0,
            fp_min: -56.0,
            fp_max: -50.0,
            ..DetectionModel::default()
        };
        let d = detect_tick(12.0, &m, SimTime::ZERO, &mut rng).unwrap();
        assert_eq!(d.kind, DetectionKind::FalsePositive);
        assert!((-56.0..-50.0).contains(&d.separation));
        assert!((d.separation + 53.0).abs() <= 3.0);
    }

    #[test]
    fn miss_fraction_is_binomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = DetectionModel {
            fn_rate: 0.2,
            fp_rate: 0.05,
            noise_std: 0.5,
            ..DetectionModel::default()
        };
        let n = 10_000;
        let misses = (0..n)
            .filter(|_| detect_tick(10.0, &m, SimTime::ZERO, &mut rng).is_none())
            .count() as f64;
        let sigma = (n as f64 * 0.2 * 0.8).sqrt();
        assert!((misses - 2000.0).abs() < 3.0 * sigma, "misses {misses}");
    }
}
