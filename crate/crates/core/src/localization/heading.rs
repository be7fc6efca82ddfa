/// Default minimum displacement before a new heading is accepted.
pub const DEFAULT_MIN_STEP_M: f64 = 0.05;

/// Heading from successive positions. Small displacements are dominated by
/// GNSS noise, so below `min_step` the previous heading is kept.
pub fn heading_hysteresis(prev: (f64, f64), cur: (f64, f64), prev_heading: f64, min_step: f64) -> f64 {
    let dn = cur.0 - prev.0;
    let de = cur.1 - prev.1;
    if dn.hypot(de) >= min_step {
        de.atan2(dn)
    } else {
        prev_heading
    }
}
