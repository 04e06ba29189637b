//! Tracker and scheduler parameters.
//!
//! `n_g`, `n_l`, `alpha`, `tau_o`, `tau_d`, `tau_s`, the cost weights, `gamma`
//! and `tau_t` carry the reference threshold values. The rest are engineering
//! defaults.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// High-confidence threshold (inclusive).
    pub t_h: f64,
    /// Low-confidence threshold (inclusive); detections below it are dropped.
    pub t_l: f64,
    /// Joint cost weights: IoU, center distance, motion, relational.
    pub omega: [f64; 4],
    /// Motion cost weights: speed, direction, acceleration.
    pub beta: [f64; 3],
    /// Time-decay rate per frame for history samples.
    pub gamma: f64,
    /// Recovery score gate.
    pub tau_t: f64,
    /// Global-detection frames before local mode may engage.
    pub n_g: u32,
    /// Maximum local-detection frames before reverting to global mode.
    pub n_l: u32,
    /// Consecutive empty local frames that force a global reset.
    pub n_m: u32,
    /// Window IoU above which two local windows are merged.
    pub tau_o: f64,
    /// Member separation (px) above which a window is split.
    pub tau_d: f64,
    /// Safe-zone area fraction.
    pub tau_s: f64,
    /// Residual blend weight of the fusion block.
    pub alpha: f64,
    /// Largest association cost that may still be paired.
    pub gate_max_cost: f64,
    /// Frames a lost track is kept before removal.
    pub max_lost_age: u32,
    /// History entries retained per track.
    pub h_max: usize,
    /// Newest history entries used for recovery modeling.
    pub feature_window: usize,
    /// Newest history entries averaged into the time constraint.
    pub time_window: usize,
    /// Consecutive matches that promote a tentative track.
    pub min_hits: u32,
    /// Side of the square local detection window (px).
    pub roi_size: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            t_h: 0.5,
            t_l: 0.1,
            omega: [0.3, 0.3, 0.2, 0.2],
            beta: [0.4, 0.4, 0.2],
            gamma: 0.1,
            tau_t: 0.6,
            n_g: 30,
            n_l: 120,
            n_m: 5,
            tau_o: 0.2,
            tau_d: 700.0,
            tau_s: 0.8,
            alpha: 0.1,
            gate_max_cost: 0.7,
            max_lost_age: 30,
            h_max: 30,
            feature_window: 10,
            time_window: 1,
            min_hits: 2,
            roi_size: 300.0,
        }
    }
}

fn in_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Config(format!("{name} = {v} must lie in [0, 1]")));
    }
    Ok(())
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        in_unit("t_h", self.t_h)?;
        in_unit("t_l", self.t_l)?;
        if self.t_l >= self.t_h {
            return Err(Error::Config(format!(
                "t_l = {} must be below t_h = {}",
                self.t_l, self.t_h
            )));
        }
        for (i, w) in self.omega.iter().enumerate() {
            in_unit(&format!("omega_{}", i + 1), *w)?;
        }
        for (i, w) in self.beta.iter().enumerate() {
            in_unit(&format!("beta_{}", i + 1), *w)?;
        }
        let os: f64 = self.omega.iter().sum();
        if (os - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "omega weights sum to {os}, expected 1"
            )));
        }
        let bs: f64 = self.beta.iter().sum();
        if (bs - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "beta weights sum to {bs}, expected 1"
            )));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Config(format!(
                "gamma = {} must be >= 0",
                self.gamma
            )));
        }
        in_unit("tau_t", self.tau_t)?;
        in_unit("tau_o", self.tau_o)?;
        in_unit("alpha", self.alpha)?;
        if !(self.tau_s > 0.0 && self.tau_s <= 1.0) {
            return Err(Error::Config(format!(
                "tau_s = {} must lie in (0, 1]",
                self.tau_s
            )));
        }
        if !(self.tau_d.is_finite() && self.tau_d > 0.0) {
            return Err(Error::Config(format!("tau_d = {} must be > 0", self.tau_d)));
        }
        if self.gate_max_cost.is_nan() || self.gate_max_cost <= 0.0 {
            return Err(Error::Config("gate_max_cost must be > 0".into()));
        }
        if self.n_g == 0 || self.n_l == 0 || self.n_m == 0 {
            return Err(Error::Config("n_g, n_l and n_m must be >= 1".into()));
        }
        if self.h_max < 2 || self.feature_window == 0 || self.feature_window > self.h_max {
            return Err(Error::Config(
                "need h_max >= 2 and 1 <= feature_window <= h_max".into(),
            ));
        }
        if self.time_window == 0 || self.time_window > self.feature_window {
            return Err(Error::Config(
                "need 1 <= time_window <= feature_window".into(),
            ));
        }
        if self.min_hits == 0 {
            return Err(Error::Config("min_hits must be >= 1".into()));
        }
        if !(self.roi_size.is_finite() && self.roi_size > 0.0) {
            return Err(Error::Config("roi_size must be > 0".into()));
        }
        Ok(())
    }
}
