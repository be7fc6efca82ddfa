use serde::{Deserialize, Serialize};

use super::LocalizationError;

const WGS84_A: f64 = 6_378_137.0;
const WGS84_F: f64 = 1.0 / 298.257_223_563;

/// Beyond this distance from the origin the flat-tangent approximation is
/// refused.
pub const MAX_PROJECTION_RANGE_M: f64 = 50_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

fn e2() -> f64 {
    WGS84_F * (2.0 - WGS84_F)
}

/// Meridian radius of curvature at `lat_deg`.
pub fn meridian_radius(lat_deg: f64) -> f64 {
    let s = lat_deg.to_radians().sin();
    WGS84_A * (1.0 - e2()) / (1.0 - e2() * s * s).powf(1.5)
}

/// Prime-vertical (normal) radius of curvature at `lat_deg`.
pub fn normal_radius(lat_deg: f64) -> f64 {
    let s = lat_deg.to_radians().sin();
    WGS84_A / (1.0 - e2() * s * s).sqrt()
}

/// Flat-tangent projection of a geodetic point into the local NED frame
/// anchored at `origin`. Returns `(x north, y east)` in meters.
pub fn to_local_ned(p: GeoPoint, origin: GeoPoint) -> Result<(f64, f64), LocalizationError> {
    let x = (p.lat - origin.lat).to_radians() * meridian_radius(origin.lat);
    let y = (p.lon - origin.lon).to_radians()
        * normal_radius(origin.lat)
        * origin.lat.to_radians().cos();
    let d = x.hypot(y);
    if !(d <= MAX_PROJECTION_RANGE_M) {
        return Err(LocalizationError::OutOfProjectionRange { distance_m: d });
    }
    Ok((x, y))
}

/// Inverse of [`to_local_ned`].
pub fn from_local_ned(x: f64, y: f64, origin: GeoPoint) -> GeoPoint {
    GeoPoint {
        lat: origin.lat + (x / meridian_radius(origin.lat)).to_degrees(),
        lon: origin.lon
            + (y / (normal_radius(origin.lat) * origin.lat.to_radians().cos())).to_degrees(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LVMS: GeoPoint = GeoPoint {
        lat: 36.2719,
        lon: -115.0105,
    };

    #[test]
    fn origin_maps_to_zero() {
        assert_eq!(to_local_ned(LVMS, LVMS).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn north_step_at_36_degrees() {
        let o = GeoPoint { lat: 36.0, lon: 0.0 };
        let p = GeoPoint { lat: 36.0001, lon: 0.0 };
        let (x, y) = to_local_ned(p, o).unwrap();
        // meridian radius oracle computed independently
        assert!((x - 11.095_900_067).abs() < 1e-3, "x = {x}");
        assert_eq!(y, 0.0);
    }

    #[test]
    fn east_step_at_equator() {
        let o = GeoPoint { lat: 0.0, lon: 0.0 };
        let p = GeoPoint { lat: 0.0, lon: 0.0001 };
        let (x, y) = to_local_ned(p, o).unwrap();
        assert_eq!(x, 0.0);
        assert!((y - 11.131_949_079).abs() < 1e-6, "y = {y}");
    }

    #[test]
    fn far_points_are_refused() {
        let p = GeoPoint {
            lat: LVMS.lat + 1.0,
            lon: LVMS.lon,
        };
        assert!(matches!(
            to_local_ned(p, LVMS),
            Err(LocalizationError::OutOfProjectionRange { .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn round_trip_within_5km(x in -5000.0f64..5000.0, y in -5000.0f64..5000.0) {
            let g = from_local_ned(x, y, LVMS);
            let (x2, y2) = to_local_ned(g, LVMS).unwrap();
            let back = from_local_ned(x2, y2, LVMS);
            proptest::prop_assert!((back.lat - g.lat).abs() < 1e-9);
            proptest::prop_assert!((back.lon - g.lon).abs() < 1e-9);
            proptest::prop_assert!((x2 - x).abs() < 1e-6 && (y2 - y).abs() < 1e-6);
        }
    }
}
