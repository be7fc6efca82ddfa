use crate::bus::{SimDuration, SimTime};
use crate::halo::StopReason;

/// Quiet period after the last stop flag before the latch releases.
pub const LATCH_RESET: SimDuration = SimDuration::from_secs(5);

/// Holds the desired speed at zero after a graceful-stop flag.
#[derive(Debug, Clone, PartialEq)]
pub struct GracefulLatch {
    pub engaged: bool,
    pub last_stop: Option<SimTime>,
    pub reset_period: SimDuration,
    pub reason: Option<StopReason>,
}

impl Default for GracefulLatch {
    fn default() -> Self {
        GracefulLatch {
            engaged: false,
            last_stop: None,
            reset_period: LATCH_RESET,
            reason: None,
        }
    }
}

impl GracefulLatch {
    pub fn on_stop_flag(&mut self, reason: Option<StopReason>, now: SimTime) {
        self.engaged = true;
        self.last_stop = Some(now);
        if reason.is_some() {
            self.reason = reason;
        }
    }
}

/// Zero while the latch is engaged. The latch releases only once strictly
/// more than the reset period has passed without a stop flag.
pub fn apply_graceful_latch(desired_v_in: f64, latch: &mut GracefulLatch, now: SimTime) -> f64 {
    if latch.engaged {
        let quiet = latch.last_stop.map_or(SimDuration::ZERO, |t| now.since(t));
        if quiet > latch.reset_period {
            latch.engaged = false;
            latch.reason = None;
        }
    }
    if latch.engaged {
        0.0
    } else {
        desired_v_in
    }
}
