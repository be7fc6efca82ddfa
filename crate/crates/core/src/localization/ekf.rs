use nalgebra::{Matrix2, Matrix4, RowVector4, Vector4};
use serde::{Deserialize, Serialize};

use super::LocalizationError;

/// Measurement variances are floored here so a zero-noise sensor does not
/// make the innovation covariance singular.
const MIN_VARIANCE: f64 = 1e-12;

/// Process noise spectral densities, per second, for [x, y, heading, speed].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EkfNoise {
    pub q_pos: f64,
    pub q_heading: f64,
    pub q_speed: f64,
    pub r_wheel: f64,
}

impl Default for EkfNoise {
    fn default() -> Self {
        EkfNoise {
            q_pos: 0.01,
            q_heading: 0.001,
            q_speed: 0.1,
            r_wheel: 0.01,
        }
    }
}

/// Planar EKF over `[x, y, heading, speed]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ekf {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
    pub q: Matrix4<f64>,
    pub r_wheel: f64,
}

impl Ekf {
    pub fn new(x: [f64; 4], p_diag: [f64; 4], noise: EkfNoise) -> Self {
        Ekf {
            x: Vector4::from(x),
            p: Matrix4::from_diagonal(&Vector4::from(p_diag)),
            q: Matrix4::from_diagonal(&Vector4::new(
                noise.q_pos,
                noise.q_pos,
                noise.q_heading,
                noise.q_speed,
            )),
            r_wheel: noise.r_wheel,
        }
    }

    /// Propagates the unicycle model with IMU yaw rate and longitudinal
    /// acceleration.
    pub fn predict(&mut self, yaw_rate: f64, accel: f64, dt: f64) -> Result<(), LocalizationError> {
        if !(dt > 0.0) {
            return Err(LocalizationError::NonPositiveStep(dt));
        }
        let (th, v) = (self.x[2], self.x[3]);
        let (s, c) = th.sin_cos();
        self.x[0] += v * c * dt;
        self.x[1] += v * s * dt;
        self.x[2] = crate::plant::normalize_angle(th + yaw_rate * dt);
        self.x[3] = (v + accel * dt).max(0.0);

        #[rustfmt::skip]
        let f = Matrix4::new(
            1.0, 0.0, -v * s * dt, c * dt,
            0.0, 1.0,  v * c * dt, s * dt,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        self.p = f * self.p * f.transpose() + self.q * dt;
        self.repair()
    }

    /// Position update with `R = diag(var_x, var_y)`.
    pub fn update_position(&mut self, x: f64, y: f64, var_x: f64, var_y: f64) -> Result<(), LocalizationError> {
        let h = nalgebra::Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let r = Matrix2::new(var_x.max(MIN_VARIANCE), 0.0, 0.0, var_y.max(MIN_VARIANCE));
        let innov = nalgebra::Vector2::new(x - self.x[0], y - self.x[1]);
        let s = h * self.p * h.transpose() + r;
        let s_inv = s
            .try_inverse()
            .ok_or(LocalizationError::CovarianceNotPSD { min_eigenvalue: f64::NAN })?;
        let k = self.p * h.transpose() * s_inv;
        self.x += k * innov;
        self.x[2] = crate::plant::normalize_angle(self.x[2]);
        let ikh = Matrix4::identity() - k * h;
        self.p = ikh * self.p * ikh.transpose() + k * r * k.transpose();
        self.repair()
    }

    pub fn update_speed(&mut self, speed: f64, var: f64) -> Result<(), LocalizationError> {
        let h = RowVector4::new(0.0, 0.0, 0.0, 1.0);
        let r = var.max(MIN_VARIANCE);
        let s = (h * self.p * h.transpose())[0] + r;
        let k = self.p * h.transpose() / s;
        self.x += k * (speed - self.x[3]);
        let ikh = Matrix4::identity() - k * h;
        self.p = ikh * self.p * ikh.transpose() + k * r * k.transpose();
        self.repair()
    }

    pub fn position_cov(&self) -> [[f64; 2]; 2] {
        [[self.p[(0, 0)], self.p[(0, 1)]], [self.p[(1, 0)], self.p[(1, 1)]]]
    }

    pub fn scalar_cov(&self) -> f64 {
        self.p[(0, 0)].max(self.p[(1, 1)])
    }

    pub fn condition_number(&self) -> f64 {
        let e = self.p.symmetric_eigenvalues();
        e.max() / e.min()
    }

    /// Symmetrizes `P` and nudges it back to positive definite if rounding
    /// pushed an eigenvalue to zero.
    fn repair(&mut self) -> Result<(), LocalizationError> {
        self.p = (self.p + self.p.transpose()) * 0.5;
        if self.p.cholesky().is_some() {
            return Ok(());
        }
        let scale = self.p.trace().abs().max(1.0);
        let mut jitter = 1e-12 * scale;
        for _ in 0..6 {
            let candidate = self.p + Matrix4::identity() * jitter;
            if candidate.cholesky().is_some() {
                self.p = candidate;
                return Ok(());
            }
            jitter *= 100.0;
        }
        Err(LocalizationError::CovarianceNotPSD {
            min_eigenvalue: self.p.symmetric_eigenvalues().min(),
        })
    }
}

/// Scales the covariance by `factor`, leaving the mean alone.
pub fn ekf_inflate(ekf: &Ekf, factor: f64) -> Result<Ekf, LocalizationError> {
    if !(factor >= 1.0) {
        return Err(LocalizationError::InvalidInflation(factor));
    }
    let mut out = ekf.clone();
    out.p *= factor;
    Ok(out)
}
