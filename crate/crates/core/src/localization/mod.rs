//! GNSS projection, heading estimation and EKF fusion.

mod ekf;
mod geodesy;
mod heading;
mod nodes;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::SimTime;

pub use ekf::{ekf_inflate, Ekf, EkfNoise};
pub use geodesy::{from_local_ned, meridian_radius, normal_radius, to_local_ned, GeoPoint, MAX_PROJECTION_RANGE_M};
pub use heading::{heading_hysteresis, DEFAULT_MIN_STEP_M};
pub use nodes::{CovInflation, EkfNode, MapBaselinkNode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalizationError {
    #[error("fix is {distance_m:.0} m from the origin, beyond the flat-tangent range")]
    OutOfProjectionRange { distance_m: f64 },
    #[error("EKF covariance lost positive definiteness (min eigenvalue {min_eigenvalue:e})")]
    CovarianceNotPSD { min_eigenvalue: f64 },
    #[error("filter step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("inflation factor must be at least 1, got {0}")]
    InvalidInflation(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GnssUnit {
    Top,
    Bottom,
}

impl GnssUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            GnssUnit::Top => "top",
            GnssUnit::Bottom => "bottom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnssFix {
    pub lat: f64,
    pub lon: f64,
    /// Meters.
    pub lat_stddev: f64,
    /// Meters.
    pub lon_stddev: f64,
    pub stamp: SimTime,
    pub unit: GnssUnit,
}

impl GnssFix {
    pub fn worst_stddev(&self) -> f64 {
        self.lat_stddev.max(self.lon_stddev)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseSource {
    Ekf,
    GnssTop,
    GnssBottom,
}

impl PoseSource {
    pub fn as_str(self) -> &'static str {
        match self {
            PoseSource::Ekf => "ekf",
            PoseSource::GnssTop => "gnss_top",
            PoseSource::GnssBottom => "gnss_bottom",
        }
    }

    pub fn is_gnss(self) -> bool {
        self != PoseSource::Ekf
    }
}

impl From<GnssUnit> for PoseSource {
    fn from(u: GnssUnit) -> Self {
        match u {
            GnssUnit::Top => PoseSource::GnssTop,
            GnssUnit::Bottom => PoseSource::GnssBottom,
        }
    }
}

/// How a 2x2 position covariance is reduced to one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovReduction {
    #[default]
    Max,
    Trace,
}

impl CovReduction {
    pub fn apply(self, cov: &[[f64; 2]; 2]) -> f64 {
        match self {
            CovReduction::Max => cov[0][0].max(cov[1][1]),
            CovReduction::Trace => cov[0][0] + cov[1][1],
        }
    }
}

/// A planar pose estimate in the local NED frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub cov: [[f64; 2]; 2],
    pub scalar_cov: f64,
    pub source: PoseSource,
    pub stamp: SimTime,
}

impl LocalPose {
    pub fn new(x: f64, y: f64, heading: f64, cov: [[f64; 2]; 2], source: PoseSource, stamp: SimTime) -> Self {
        Self::with_reduction(x, y, heading, cov, source, stamp, CovReduction::Max)
    }

    pub fn with_reduction(
        x: f64,
        y: f64,
        heading: f64,
        cov: [[f64; 2]; 2],
        source: PoseSource,
        stamp: SimTime,
        reduction: CovReduction,
    ) -> Self {
        LocalPose {
            x,
            y,
            heading,
            cov,
            scalar_cov: reduction.apply(&cov),
            source,
            stamp,
        }
    }
}
