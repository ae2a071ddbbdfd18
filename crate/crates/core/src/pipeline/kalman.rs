//! Constant-velocity Kalman filter over `[cx, cy, w, h, vcx, vcy]` used to
//! smooth emitted trajectories.

use nalgebra::{SMatrix, SVector};

use crate::geometry::BoundingBox;

type Vec6 = SVector<f64, 6>;
type Mat6 = SMatrix<f64, 6, 6>;
type Mat4x6 = SMatrix<f64, 4, 6>;
type Mat4 = SMatrix<f64, 4, 4>;

/// Noise variances, in px² (and px²/frame² for velocities).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanParams {
    /// Per-frame variance added to the velocity and size components.
    /// Position has no direct process noise: it changes only through
    /// velocity, which makes the noiseless limit an exact extrapolator.
    pub process_noise: f64,
    /// Variance of each observed component.
    pub measurement_noise: f64,
    /// Prior variance of the velocity at initialization.
    pub initial_velocity_variance: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self {
            process_noise: 1.0,
            measurement_noise: 1.0,
            initial_velocity_variance: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: Vec6,
    pub covariance: Mat6,
}

fn transition() -> Mat6 {
    let mut f = Mat6::identity();
    f[(0, 4)] = 1.0;
    f[(1, 5)] = 1.0;
    f
}

fn observation() -> Mat4x6 {
    Mat4x6::from_fn(|r, c| if r == c { 1.0 } else { 0.0 })
}

fn measure(b: &BoundingBox) -> SVector<f64, 4> {
    let (cx, cy) = b.center();
    SVector::<f64, 4>::new(cx, cy, b.w, b.h)
}

impl KalmanState {
    /// Start at `b` with zero velocity.
    pub fn init(b: &BoundingBox, params: &KalmanParams) -> Self {
        let z = measure(b);
        let mean = Vec6::new(z[0], z[1], z[2], z[3], 0.0, 0.0);
        let r = params.measurement_noise;
        let v = params.initial_velocity_variance;
        let covariance = Mat6::from_diagonal(&Vec6::new(r, r, r, r, v, v));
        Self { mean, covariance }
    }

    pub fn predict(&mut self, params: &KalmanParams) {
        let f = transition();
        let q = params.process_noise;
        let qm = Mat6::from_diagonal(&Vec6::new(0.0, 0.0, q, q, q, q));
        self.mean = f * self.mean;
        self.covariance = f * self.covariance * f.transpose() + qm;
    }

    pub fn update(&mut self, b: &BoundingBox, params: &KalmanParams) {
        let h = observation();
        let r = Mat4::identity() * params.measurement_noise;
        let s = h * self.covariance * h.transpose() + r;
        let Some(s_inv) = s.try_inverse() else {
            return;
        };
        let k = self.covariance * h.transpose() * s_inv;
        let innovation = measure(b) - h * self.mean;
        self.mean += k * innovation;
        // Joseph form keeps the covariance symmetric positive semi-definite
        let ikh = Mat6::identity() - k * h;
        self.covariance = ikh * self.covariance * ikh.transpose() + k * r * k.transpose();
    }

    /// Current estimate as a box; sizes are floored at a tiny positive value.
    pub fn bbox(&self) -> BoundingBox {
        let m = &self.mean;
        let w = m[2].max(1e-6);
        let h = m[3].max(1e-6);
        BoundingBox {
            x: m[0] - w / 2.0,
            y: m[1] - h / 2.0,
            w,
            h,
        }
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.mean[4], self.mean[5])
    }
}

/// One smoothing step: predict, then update when an observation exists.
pub fn kalman_smooth(
    state: &KalmanState,
    observation: Option<&BoundingBox>,
    params: &KalmanParams,
) -> (KalmanState, BoundingBox) {
    let mut next = state.clone();
    next.predict(params);
    if let Some(b) = observation {
        next.update(b, params);
    }
    let b = next.bbox();
    (next, b)
}
