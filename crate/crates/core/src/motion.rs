//! Constant-velocity Kalman filter over `[cx, cy, w, h, vcx, vcy, vw, vh]`.
//!
//! Noise is proportional to the box height: position std `h/20`, velocity
//! std `h/160`, measurement std `h/20`.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Detection};

pub type StateVec = SVector<f64, 8>;
pub type StateCov = SMatrix<f64, 8, 8>;
type MeasVec = SVector<f64, 4>;
type MeasCov = SMatrix<f64, 4, 4>;
type ObsMat = SMatrix<f64, 4, 8>;

const STD_POSITION: f64 = 1.0 / 20.0;
const STD_VELOCITY: f64 = 1.0 / 160.0;
// Keeps noise strictly positive for vanishingly small boxes.
const MIN_SCALE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionState {
    pub mean: StateVec,
    pub covariance: StateCov,
}

fn transition() -> SMatrix<f64, 8, 8> {
    let mut f = SMatrix::<f64, 8, 8>::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    f
}

fn observation() -> ObsMat {
    ObsMat::identity()
}

fn scale(h: f64) -> f64 {
    h.max(MIN_SCALE)
}

impl MotionState {
    pub fn center(&self) -> (f64, f64) {
        (self.mean[0], self.mean[1])
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.mean[4], self.mean[5])
    }

    /// Box implied by the state; sizes are kept strictly positive.
    pub fn bbox(&self) -> BBox {
        let w = self.mean[2].max(1e-3);
        let h = self.mean[3].max(1e-3);
        BBox {
            x: self.mean[0] - w / 2.0,
            y: self.mean[1] - h / 2.0,
            w,
            h,
        }
    }
}

pub fn kf_init(d: &Detection) -> MotionState {
    kf_init_box(&d.bbox)
}

pub fn kf_init_box(b: &BBox) -> MotionState {
    let (cx, cy) = b.center();
    let mean = StateVec::from_column_slice(&[cx, cy, b.w, b.h, 0.0, 0.0, 0.0, 0.0]);
    let s = scale(b.h);
    let pos = 2.0 * STD_POSITION * s;
    let vel = 10.0 * STD_VELOCITY * s;
    let diag = StateVec::from_column_slice(&[
        pos * pos,
        pos * pos,
        pos * pos,
        pos * pos,
        vel * vel,
        vel * vel,
        vel * vel,
        vel * vel,
    ]);
    MotionState {
        mean,
        covariance: StateCov::from_diagonal(&diag),
    }
}

pub fn kf_predict(s: &MotionState) -> MotionState {
    let f = transition();
    let h = scale(s.mean[3]);
    let pos = STD_POSITION * h;
    let vel = STD_VELOCITY * h;
    let q = StateCov::from_diagonal(&StateVec::from_column_slice(&[
        pos * pos,
        pos * pos,
        pos * pos,
        pos * pos,
        vel * vel,
        vel * vel,
        vel * vel,
        vel * vel,
    ]));
    let mean = f * s.mean;
    let cov = f * s.covariance * f.transpose() + q;
    MotionState {
        mean,
        covariance: symmetrize(cov),
    }
}

pub fn kf_update(s: &MotionState, z: &BBox) -> Result<MotionState> {
    let (cx, cy) = z.center();
    let meas = MeasVec::from_column_slice(&[cx, cy, z.w, z.h]);
    if meas.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteMeasurement);
    }
    let hm = observation();
    let std = STD_POSITION * scale(s.mean[3]);
    let r = MeasCov::identity() * (std * std);
    let innovation_cov = hm * s.covariance * hm.transpose() + r;
    let inv = innovation_cov
        .cholesky()
        .ok_or(Error::NonFiniteMeasurement)?
        .inverse();
    let gain = s.covariance * hm.transpose() * inv;
    let innovation = meas - hm * s.mean;
    let mean = s.mean + gain * innovation;
    // Joseph form keeps the posterior symmetric positive-definite.
    let ikh = StateCov::identity() - gain * hm;
    let cov = ikh * s.covariance * ikh.transpose() + gain * r * gain.transpose();
    Ok(MotionState {
        mean,
        covariance: symmetrize(cov),
    })
}

fn symmetrize(m: StateCov) -> StateCov {
    (m + m.transpose()) * 0.5
}
