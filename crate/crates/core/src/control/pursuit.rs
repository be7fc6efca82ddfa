use std::collections::BTreeMap;

use super::ControlError;
use crate::localization::LocalPose;
use crate::plant::{normalize_angle, Point};
use crate::MPH;

/// 35 mph in m/s: below this the lookahead and steering range are flat.
pub const LOW_SPEED_BREAKPOINT: f64 = 35.0 * MPH;
/// 100 mph in m/s: above this both are capped.
pub const HIGH_SPEED_BREAKPOINT: f64 = 100.0 * MPH;

fn ramp(v: f64, at_low: f64, at_high: f64) -> f64 {
    if v <= LOW_SPEED_BREAKPOINT {
        at_low
    } else if v >= HIGH_SPEED_BREAKPOINT {
        at_high
    } else {
        let t = (v - LOW_SPEED_BREAKPOINT) / (HIGH_SPEED_BREAKPOINT - LOW_SPEED_BREAKPOINT);
        at_low + t * (at_high - at_low)
    }
}

/// Meters: 15 up to 35 mph, linear to 50 at 100 mph, capped above.
pub fn lookahead_distance(v: f64) -> f64 {
    ramp(v, 15.0, 50.0)
}

/// Degrees: 24 up to 35 mph, linear down to 10 at 100 mph, 10 above.
pub fn max_steering_angle(v: f64) -> f64 {
    ramp(v, 24.0, 10.0)
}

/// Pure-pursuit steering towards the first waypoint at least one lookahead
/// distance away, searching forward from the closest waypoint. Positive
/// output turns right. The result is clamped to the speed-dependent
/// steering envelope.
pub fn pure_pursuit_steer(pose: &LocalPose, path: &[Point], v: f64, wheelbase: f64) -> Result<f64, ControlError> {
    if path.is_empty() {
        return Err(ControlError::EmptyPath);
    }
    let ld = lookahead_distance(v);
    let p = [pose.x, pose.y];
    let d2 = |w: &Point| (w[0] - p[0]).powi(2) + (w[1] - p[1]).powi(2);
    let closest = (0..path.len())
        .min_by(|&a, &b| d2(&path[a]).total_cmp(&d2(&path[b])))
        .expect("non-empty");

    let mut target = path[closest];
    for k in 0..path.len() {
        let w = path[(closest + k) % path.len()];
        target = w;
        if d2(&w).sqrt() >= ld {
            break;
        }
    }
    let dx = target[0] - p[0];
    let dy = target[1] - p[1];
    let dist = dx.hypot(dy);
    if dist == 0.0 {
        return Ok(0.0);
    }
    let alpha = normalize_angle(dy.atan2(dx) - pose.heading);
    let raw = (2.0 * wheelbase * alpha.sin()).atan2(dist).to_degrees();
    let limit = max_steering_angle(v);
    Ok(raw.clamp(-limit, limit))
}

/// Named paths with one active.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    paths: BTreeMap<String, Vec<Point>>,
    active: String,
}

impl PathSet {
    pub fn new(paths: BTreeMap<String, Vec<Point>>, active: &str) -> Result<Self, ControlError> {
        if !paths.contains_key(active) {
            return Err(ControlError::UnknownPath(active.to_string()));
        }
        Ok(PathSet {
            paths,
            active: active.to_string(),
        })
    }

    pub fn active(&self) -> &str {
        &self.active
    }

    pub fn active_points(&self) -> &[Point] {
        &self.paths[&self.active]
    }

    /// Switches to `requested` if it exists; otherwise the active path is
    /// kept and `UnknownPath` is returned.
    pub fn switch_path(&mut self, requested: &str) -> Result<(), ControlError> {
        if !self.paths.contains_key(requested) {
            return Err(ControlError::UnknownPath(requested.to_string()));
        }
        self.active = requested.to_string();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus::SimTime;
    use crate::localization::PoseSource;

    fn pose(x: f64, y: f64, heading: f64) -> LocalPose {
        LocalPose::new(x, y, heading, [[0.0; 2]; 2], PoseSource::Ekf, SimTime::ZERO)
    }

    fn straight_north() -> Vec<Point> {
        (0..200).map(|i| [i as f64, 0.0]).collect()
    }

    #[test]
    fn lookahead_table() {
        assert_eq!(lookahead_distance(10.0 * MPH), 15.0);
        assert_eq!(lookahead_distance(150.0 * MPH), 50.0);
        assert!((lookahead_distance(67.5 * MPH) - 32.5).abs() < 1e-9);
    }

    #[test]
    fn steering_table() {
        assert_eq!(max_steering_angle(20.0 * MPH), 24.0);
        assert_eq!(max_steering_angle(120.0 * MPH), 10.0);
        assert!((max_steering_angle(67.5 * MPH) - 17.0).abs() < 1e-9);
    }

    #[test]
    fn aligned_pose_steers_straight() {
        let s = pure_pursuit_steer(&pose(10.0, 0.0, 0.0), &straight_north(), 20.0, 3.0).unwrap();
        assert!(s.abs() < 1e-9);
    }

    #[test]
    fn target_abeam_left() {
        // vehicle heading north; the only far waypoint is 15 m due west
        let path = vec![[0.0, 0.0], [0.0, -15.0]];
        let s = pure_pursuit_steer(&pose(0.0, 0.0, 0.0), &path, 5.0, 3.0).unwrap();
        let expected = -(2.0f64 * 3.0 / 15.0).atan().to_degrees();
        assert!((s - expected).abs() < 1e-9, "{s}");
        assert!((s + 21.801_409_5).abs() < 1e-6);
    }

    #[test]
    fn envelope_clamps_at_speed() {
        // a short path never reaches the 50 m lookahead, so the target is its
        // last waypoint, where the geometric answer is 30 degrees
        let d = 6.0 / 30f64.to_radians().tan();
        let path = vec![[0.0, 0.0], [0.0, -d]];
        let s = pure_pursuit_steer(&pose(0.0, 0.0, 0.0), &path, 120.0 * MPH, 3.0).unwrap();
        assert_eq!(s, -10.0);
    }

    #[test]
    fn empty_path_is_an_error() {
        assert_eq!(pure_pursuit_steer(&pose(0.0, 0.0, 0.0), &[], 1.0, 3.0), Err(ControlError::EmptyPath));
    }

    #[test]
    fn switching_paths() {
        let mut m = BTreeMap::new();
        m.insert("raceline".to_string(), straight_north());
        m.insert("overtake".to_string(), straight_north());
        let mut set = PathSet::new(m, "raceline").unwrap();
        set.switch_path("overtake").unwrap();
        assert_eq!(set.active(), "overtake");
        assert_eq!(set.switch_path("banana"), Err(ControlError::UnknownPath("banana".into())));
        assert_eq!(set.active(), "overtake");
        set.switch_path("overtake").unwrap();
        assert_eq!(set.active(), "overtake");
    }

    proptest::proptest! {
        #[test]
        fn ramps_are_monotone(a in 0.0f64..100.0, b in 0.0f64..100.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(lookahead_distance(lo) <= lookahead_distance(hi));
            proptest::prop_assert!(max_steering_angle(lo) >= max_steering_angle(hi));
        }

        #[test]
        fn steering_within_envelope(x in -50.0f64..50.0, y in -50.0f64..50.0, h in -3.2f64..3.2, v in 0.0f64..90.0) {
            let path: Vec<Point> = (0..100).map(|i| {
                let a = i as f64 * std::f64::consts::TAU / 100.0;
                [40.0 * a.cos(), 40.0 * a.sin()]
            }).collect();
            let s = pure_pursuit_steer(&pose(x, y, h), &path, v, 3.0).unwrap();
            proptest::prop_assert!(s.abs() <= max_steering_angle(v) + 1e-12);
        }
    }
}
