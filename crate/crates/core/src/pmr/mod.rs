//! Probability-driven recovery of lost tracks.
//!
//! Each lost track's recent history is summarized as 8-dim feature vectors
//! `[x_abs, y_abs, x_rel, y_rel, v_x, v_y, theta, w]` and modeled with a small
//! Gaussian mixture. A candidate detection is scored by the mixture kernel
//! times the mean time-decay weight of the newest samples.
//!
//! The kernel is `sum_k pi_k exp(-D_k^2 / (2 d))` over the `d` fitted
//! dimensions, evaluated with component variances no narrower than the pooled
//! sample variance.
//!
//! The decay weight `w` never enters the mixture: the model is fitted on the
//! seven kinematic slots and `w` only feeds the time constraint. For
//! recovery, history positions are carried forward to the scoring frame with
//! each sample's own velocity, so a target moving steadily through a gap
//! lands on the model instead of ahead of it.

mod gmm;

pub use gmm::{fit_gmm, pooled_variance, GaussianMixture, COV_FLOOR, MAX_ITERATIONS, TOLERANCE};

use std::f64::consts::PI;

use crate::assoc::Assignment;
use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::geometry::{BBox, Detection};
use crate::track::Track;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackFeature {
    /// Frame the sample was observed in (not part of the vector).
    pub frame: u32,
    pub x_abs: f64,
    pub y_abs: f64,
    pub x_rel: f64,
    pub y_rel: f64,
    pub vx: f64,
    pub vy: f64,
    pub theta: f64,
    pub w: f64,
}

impl TrackFeature {
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.x_abs, self.y_abs, self.x_rel, self.y_rel, self.vx, self.vy, self.theta, self.w,
        ]
    }

    /// The slots the mixture is fitted on (everything but the decay weight).
    pub fn kinematic(&self) -> [f64; 7] {
        [
            self.x_abs, self.y_abs, self.x_rel, self.y_rel, self.vx, self.vy, self.theta,
        ]
    }
}

pub fn decay_weight(t_current: u32, t_i: u32, gamma: f64) -> Result<f64> {
    if t_current < t_i {
        return Err(Error::NegativeTimeGap {
            current: t_current,
            sample: t_i,
        });
    }
    Ok((-gamma * f64::from(t_current - t_i)).exp())
}

/// Component count for `n_samples` history samples: `min(2, max(1, n / 3))`.
pub fn adaptive_k(n_samples: usize) -> Result<usize> {
    if n_samples == 0 {
        return Err(Error::Empty("history samples"));
    }
    Ok((n_samples / 3).clamp(1, 2))
}

/// Mean decay weight of `samples`.
pub fn time_constraint(samples: &[TrackFeature]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("time-constraint samples"));
    }
    Ok(samples.iter().map(|s| s.w).sum::<f64>() / samples.len() as f64)
}

pub fn recovery_score(g: &GaussianMixture, time_samples: &[TrackFeature], z: &TrackFeature) -> f64 {
    let c_time = time_constraint(time_samples).unwrap_or(0.0);
    g.match_probability(&z.kinematic()) * c_time
}

fn heading(vx: f64, vy: f64) -> f64 {
    let t = vy.atan2(vx);
    if t <= -PI {
        PI
    } else {
        t
    }
}

fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        PI
    } else {
        r
    }
}

/// Circular mean of the headings of moving samples, zero when none move.
fn mean_heading(feats: &[TrackFeature]) -> f64 {
    let (s, c) = feats
        .iter()
        .filter(|f| f.vx != 0.0 || f.vy != 0.0)
        .fold((0.0, 0.0), |(s, c), f| {
            (s + f.theta.sin(), c + f.theta.cos())
        });
    if s == 0.0 && c == 0.0 {
        0.0
    } else {
        s.atan2(c)
    }
}

fn relative(c: (f64, f64), region: &BBox) -> (f64, f64) {
    (
        ((c.0 - region.x) / region.w).clamp(0.0, 1.0),
        ((c.1 - region.y) / region.h).clamp(0.0, 1.0),
    )
}

/// Feature extraction settings shared by a tracker run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureSpace {
    pub frame_dims: (f64, f64),
    pub gamma: f64,
    pub window: usize,
}

impl FeatureSpace {
    pub fn new(frame_dims: (f64, f64), cfg: &TrackerConfig) -> Self {
        Self {
            frame_dims,
            gamma: cfg.gamma,
            window: cfg.feature_window,
        }
    }

    pub fn frame_rect(&self) -> BBox {
        BBox {
            x: 0.0,
            y: 0.0,
            w: self.frame_dims.0,
            h: self.frame_dims.1,
        }
    }

    /// Features of the newest `window` history entries, oldest first.
    ///
    /// Relative coordinates are taken against `roi`, or the full frame when absent.
    pub fn extract(
        &self,
        t: &Track,
        roi: Option<&BBox>,
        t_current: u32,
    ) -> Result<Vec<TrackFeature>> {
        if t.history.is_empty() {
            return Err(Error::Empty("track history"));
        }
        let region = roi.copied().unwrap_or_else(|| self.frame_rect());
        let skip = t.history.len().saturating_sub(self.window);
        t.history
            .iter()
            .skip(skip)
            .map(|e| {
                let (x_rel, y_rel) = relative(e.center, &region);
                Ok(TrackFeature {
                    frame: e.frame,
                    x_abs: e.center.0,
                    y_abs: e.center.1,
                    x_rel,
                    y_rel,
                    vx: e.velocity.0,
                    vy: e.velocity.1,
                    theta: heading(e.velocity.0, e.velocity.1),
                    w: decay_weight(t_current, e.frame, self.gamma)?,
                })
            })
            .collect()
    }

    /// History features with positions carried forward to `t_current`.
    pub fn extract_aligned(
        &self,
        t: &Track,
        roi: Option<&BBox>,
        t_current: u32,
    ) -> Result<Vec<TrackFeature>> {
        let region = roi.copied().unwrap_or_else(|| self.frame_rect());
        let mut feats = self.extract(t, Some(&region), t_current)?;
        for f in &mut feats {
            let dt = f64::from(t_current - f.frame);
            f.x_abs += f.vx * dt;
            f.y_abs += f.vy * dt;
            let (xr, yr) = relative((f.x_abs, f.y_abs), &region);
            f.x_rel = xr;
            f.y_rel = yr;
        }
        Ok(feats)
    }

    /// Feature of candidate `d` as a continuation of `t`.
    ///
    /// Velocity is the displacement from the track's last observed center
    /// over the elapsed frames.
    pub fn candidate(&self, t: &Track, d: &Detection, roi: Option<&BBox>) -> Result<TrackFeature> {
        let last = t.last_entry().ok_or(Error::Empty("track history"))?;
        let region = roi.copied().unwrap_or_else(|| self.frame_rect());
        let c = d.center();
        let dt = f64::from(d.frame.saturating_sub(last.frame).max(1));
        let vx = (c.0 - last.center.0) / dt;
        let vy = (c.1 - last.center.1) / dt;
        let (x_rel, y_rel) = relative(c, &region);
        Ok(TrackFeature {
            frame: d.frame,
            x_abs: c.0,
            y_abs: c.1,
            x_rel,
            y_rel,
            vx,
            vy,
            theta: heading(vx, vy),
            w: 1.0,
        })
    }
}

pub fn extract_features(
    t: &Track,
    roi: Option<&BBox>,
    space: &FeatureSpace,
    t_current: u32,
) -> Result<Vec<TrackFeature>> {
    space.extract(t, roi, t_current)
}

/// Fitted recovery model of one lost track.
///
/// `mixture` is the EM fit; `scoring` is the same mixture with each
/// component variance raised to the pooled sample variance. With at most
/// ten samples a two-component fit is far narrower than the track's real
/// scatter, and scoring against it would reject most true continuations.
#[derive(Debug, Clone)]
pub struct RecoveryModel {
    pub mixture: GaussianMixture,
    pub scoring: GaussianMixture,
    pub time_samples: Vec<TrackFeature>,
    pub region: BBox,
    /// Headings are measured from this angle so the mixture never straddles the branch cut.
    pub heading_ref: f64,
}

impl RecoveryModel {
    pub fn fit(
        t: &Track,
        cfg: &TrackerConfig,
        space: &FeatureSpace,
        t_current: u32,
    ) -> Result<Self> {
        let last = t.last_entry().ok_or(Error::Empty("track history"))?;
        let region = last.region;
        let mut feats = space.extract_aligned(t, Some(&region), t_current)?;
        // The birth observation has no velocity; it only drags the fit toward zero.
        if feats.len() > 2 && feats[0].frame == t.first_frame {
            feats.remove(0);
        }
        let heading_ref = mean_heading(&feats);
        for f in &mut feats {
            f.theta = wrap_angle(f.theta - heading_ref);
        }
        let k = adaptive_k(feats.len())?;
        let samples: Vec<[f64; 7]> = feats.iter().map(TrackFeature::kinematic).collect();
        let mixture = fit_gmm(&samples, k, t.id)?;
        let scoring = mixture.widened(&pooled_variance(&samples)?);
        let keep = cfg.time_window.min(feats.len());
        let time_samples = feats[feats.len() - keep..].to_vec();
        Ok(Self {
            mixture,
            scoring,
            time_samples,
            region,
            heading_ref,
        })
    }

    pub fn score(&self, t: &Track, space: &FeatureSpace, d: &Detection) -> Result<f64> {
        let mut z = space.candidate(t, d, Some(&self.region))?;
        z.theta = wrap_angle(z.theta - self.heading_ref);
        Ok(recovery_score(&self.scoring, &self.time_samples, &z))
    }
}

/// Greedy pairing of lost tracks with candidates whose recovery score exceeds
/// `tau_t`, best score first; ties go to the lower track id.
///
/// Indices in the result refer to `lost` and `candidates`.
pub fn recover(
    lost: &[&Track],
    candidates: &[Detection],
    cfg: &TrackerConfig,
    space: &FeatureSpace,
    t_current: u32,
) -> Assignment {
    if lost.is_empty() || candidates.is_empty() {
        return Assignment::all_unmatched(lost.len(), candidates.len());
    }
    let mut scored: Vec<(f64, u64, usize, usize)> = Vec::new();
    for (i, t) in lost.iter().enumerate() {
        let Ok(model) = RecoveryModel::fit(t, cfg, space, t_current) else {
            continue;
        };
        for (j, d) in candidates.iter().enumerate() {
            if let Ok(s) = model.score(t, space, d) {
                if s > cfg.tau_t {
                    scored.push((s, t.id, i, j));
                }
            }
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.3.cmp(&b.3)));

    let mut track_used = vec![false; lost.len()];
    let mut det_used = vec![false; candidates.len()];
    let mut out = Assignment::default();
    for (_, _, i, j) in scored {
        if track_used[i] || det_used[j] {
            continue;
        }
        track_used[i] = true;
        det_used[j] = true;
        out.pairs.push((i, j));
    }
    out.unmatched_tracks = (0..lost.len()).filter(|&i| !track_used[i]).collect();
    out.unmatched_detections = (0..candidates.len()).filter(|&j| !det_used[j]).collect();
    out
}
