//! Behavioral safety: flag-change speed updates, track regions and the
//! n-of-k rule for closing the door after an overtake.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::HaloError;
use crate::comm::FlagColor;
use crate::plant::{PlantError, Point, TrackModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    #[default]
    OnTrack,
    PitLane,
    PassingZone,
    PitBoxZone,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::OnTrack => "on_track",
            Region::PitLane => "pit_lane",
            Region::PassingZone => "passing_zone",
            Region::PitBoxZone => "pit_box_zone",
        }
    }

    pub fn in_pits(self) -> bool {
        matches!(self, Region::PitLane | Region::PitBoxZone)
    }
}

/// Desired speed per flag and region, m/s. Placeholder values; real limits
/// come from the series rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeedTable {
    pub green_track: f64,
    pub green_pit: f64,
    pub yellow: f64,
    pub red: f64,
}

impl Default for SpeedTable {
    fn default() -> Self {
        SpeedTable {
            green_track: 40.0,
            green_pit: 10.0,
            yellow: 15.0,
            red: 0.0,
        }
    }
}

impl SpeedTable {
    /// `None` for purple, which is not a speed.
    pub fn lookup(&self, color: FlagColor, region: Region) -> Option<f64> {
        match color {
            FlagColor::Green | FlagColor::WavingGreen if region.in_pits() => Some(self.green_pit),
            FlagColor::Green | FlagColor::WavingGreen => Some(self.green_track),
            FlagColor::Yellow => Some(self.yellow),
            FlagColor::Red => Some(self.red),
            FlagColor::Purple => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlagDecision {
    Hold,
    Publish(f64),
    EngineShutdown,
}

/// Acts only when the color changes; a repeated color is ignored so the
/// desired velocity is not re-sent on every flag message.
pub fn flag_transition(prev: Option<FlagColor>, cur: FlagColor, region: Region, table: &SpeedTable) -> FlagDecision {
    if prev == Some(cur) {
        return FlagDecision::Hold;
    }
    match table.lookup(cur, region) {
        Some(v) => FlagDecision::Publish(v),
        None => FlagDecision::EngineShutdown,
    }
}

/// Coarse region state machine driven by the transition polygons. Touching
/// a polygon only matters from the region it leads out of.
pub fn region_transition(pos: Point, track: &TrackModel, current: Region) -> Result<Region, PlantError> {
    let Some(poly) = track.in_region(pos)? else {
        return Ok(current);
    };
    let next = match (poly, current) {
        ("pit_exit", Region::PitLane) => Region::OnTrack,
        ("pit_entry", Region::OnTrack) => Region::PitLane,
        ("pit_slowdown", Region::PitLane) => Region::PitBoxZone,
        ("speed_up", Region::PitBoxZone) => Region::PitLane,
        ("passing_zone_start", Region::OnTrack) => Region::PassingZone,
        ("passing_zone_end", Region::PassingZone) => Region::OnTrack,
        _ => current,
    };
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DoorConfig {
    pub n: usize,
    pub k: usize,
    /// Meters the ego must be ahead before merging.
    pub separation: f64,
}

impl Default for DoorConfig {
    fn default() -> Self {
        DoorConfig {
            n: 8,
            k: 10,
            separation: 30.0,
        }
    }
}

/// The last `k` separation readings.
#[derive(Debug, Clone, PartialEq)]
pub struct DoorWindow {
    readings: VecDeque<f64>,
    cfg: DoorConfig,
}

impl DoorWindow {
    pub fn new(cfg: DoorConfig) -> Result<Self, HaloError> {
        if cfg.n == 0 || cfg.n > cfg.k {
            return Err(HaloError::InvalidDoorWindow { n: cfg.n, k: cfg.k });
        }
        Ok(DoorWindow {
            readings: VecDeque::with_capacity(cfg.k),
            cfg,
        })
    }

    pub fn config(&self) -> DoorConfig {
        self.cfg
    }

    pub fn readings(&self) -> impl Iterator<Item = f64> + '_ {
        self.readings.iter().copied()
    }

    /// Readings showing the ego at least the required distance ahead.
    pub fn hits(&self) -> usize {
        self.readings.iter().filter(|s| **s <= -self.cfg.separation).count()
    }

    pub fn clear(&mut self) {
        self.readings.clear();
    }
}

/// Pushes one reading and reports whether at least `n` of the latest `k`
/// put the ego far enough ahead. Missed detections never reach here, so
/// silence does not move the window.
pub fn close_the_door(mut window: DoorWindow, new_sep: f64) -> (bool, DoorWindow) {
    if window.readings.len() == window.cfg.k {
        window.readings.pop_front();
    }
    window.readings.push_back(new_sep);
    let merge = window.hits() >= window.cfg.n;
    (merge, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn feed(readings: &[f64]) -> bool {
        let mut w = DoorWindow::new(DoorConfig::default()).unwrap();
        let mut merge = false;
        for r in readings {
            (merge, w) = close_the_door(w, *r);
        }
        merge
    }

    #[test]
    fn door_examples() {
        assert!(feed(&[-53.0; 10]));
        let mut mixed = vec![12.0; 9];
        mixed.insert(4, -53.0);
        assert!(!feed(&mixed));
        let mut boundary = vec![-53.0; 8];
        boundary.extend([-10.0, -10.0]);
        assert!(feed(&boundary));
        let mut short = vec![-53.0; 7];
        short.extend([-10.0, -10.0, -10.0]);
        assert!(!feed(&short));
    }

    #[test]
    fn window_is_bounded_by_k() {
        let mut w = DoorWindow::new(DoorConfig::default()).unwrap();
        for i in 0..25 {
            (_, w) = close_the_door(w, i as f64);
        }
        assert_eq!(w.readings().count(), 10);
        assert_eq!(w.readings().next(), Some(15.0));
        assert!(DoorWindow::new(DoorConfig { n: 11, k: 10, separation: 30.0 }).is_err());
    }

    #[test]
    fn flag_examples() {
        let t = SpeedTable::default();
        use FlagColor::*;
        assert_eq!(flag_transition(Some(Green), Green, Region::OnTrack, &t), FlagDecision::Hold);
        assert_eq!(
            flag_transition(Some(Green), Yellow, Region::OnTrack, &t),
            FlagDecision::Publish(15.0)
        );
        assert_eq!(
            flag_transition(Some(Yellow), Purple, Region::OnTrack, &t),
            FlagDecision::EngineShutdown
        );
        assert_eq!(flag_transition(None, Green, Region::PitLane, &t), FlagDecision::Publish(10.0));
    }

    /// Over random flag sequences the number of actions equals the number
    /// of color changes.
    #[test]
    fn publish_once_per_change() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let table = SpeedTable::default();
        for _ in 0..1000 {
            let len = rng.random_range(1..60);
            let seq: Vec<FlagColor> = (0..len)
                .map(|_| FlagColor::ALL[rng.random_range(0..FlagColor::ALL.len())])
                .collect();
            let mut prev = None;
            let mut actions = 0;
            let mut changes = 0;
            for c in &seq {
                if prev != Some(*c) {
                    changes += 1;
                }
                if flag_transition(prev, *c, Region::OnTrack, &table) != FlagDecision::Hold {
                    actions += 1;
                }
                prev = Some(*c);
            }
            assert_eq!(actions, changes);
        }
    }

    #[test]
    fn region_state_machine() {
        let t = TrackModel::default_oval();
        let c = |name: &str| t.polygons.iter().find(|p| p.name == name).unwrap().centroid();
        assert_eq!(region_transition(c("pit_exit"), &t, Region::PitLane).unwrap(), Region::OnTrack);
        assert_eq!(region_transition([0.0, 0.0], &t, Region::PitLane).unwrap(), Region::PitLane);
        let r = region_transition(c("passing_zone_start"), &t, Region::OnTrack).unwrap();
        assert_eq!(r, Region::PassingZone);
        let r = region_transition(c("passing_zone_end"), &t, r).unwrap();
        assert_eq!(r, Region::OnTrack);
        // a pit polygon seen from the track changes nothing
        assert_eq!(region_transition(c("pit_exit"), &t, Region::OnTrack).unwrap(), Region::OnTrack);
    }
}
