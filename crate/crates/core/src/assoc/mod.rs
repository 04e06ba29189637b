//! Joint association cost (overlap, center distance, motion consistency,
//! relational structure) and gated optimal assignment.

pub(crate) mod lap;

pub use lap::lsap;

use std::f64::consts::{FRAC_PI_2, PI};

use crate::config::TrackerConfig;
use crate::geometry::{distance, iou, BBox, Detection};
use crate::track::Track;

/// Velocity samples averaged into the historical speed.
pub const SPEED_WINDOW: usize = 10;

/// Dense row-major track x detection cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols);
        Self { rows, cols, values }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self { rows, cols, values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

impl Assignment {
    pub fn all_unmatched(rows: usize, cols: usize) -> Self {
        Self {
            pairs: Vec::new(),
            unmatched_tracks: (0..rows).collect(),
            unmatched_detections: (0..cols).collect(),
        }
    }

    pub fn total_cost(&self, m: &CostMatrix) -> f64 {
        self.pairs.iter().map(|&(i, j)| m.get(i, j)).sum()
    }
}

pub fn cost_iou(t_pred: &BBox, d: &BBox) -> f64 {
    1.0 - iou(t_pred, d)
}

pub fn cost_dist(t_pred: &BBox, d: &BBox) -> f64 {
    let scale = (t_pred.w + t_pred.h + d.w + d.h) / 4.0 * 2.0;
    (distance(t_pred.center(), d.center()) / scale).min(1.0)
}

/// Motion consistency from its scalar ingredients.
///
/// `accel` is the norm of the implied acceleration (px/frame^2), `dtheta` the
/// heading change in radians.
pub fn motion_cost_from_terms(
    v_avg: f64,
    v_expected: f64,
    dtheta: f64,
    accel: f64,
    beta: &[f64; 3],
) -> f64 {
    let speed = ((v_expected - v_avg).abs() / 50.0f64.max(2.0 + v_avg)).min(1.0);
    let direction = (dtheta.abs() / FRAC_PI_2).min(1.0);
    let acceleration = (accel / 30.0).min(1.0);
    beta[0] * speed + beta[1] * direction + beta[2] * acceleration
}

/// Smallest absolute angle between two headings, in `[0, pi]`.
pub fn angle_between(a: f64, b: f64) -> f64 {
    let mut d = (a - b).rem_euclid(2.0 * PI);
    if d > PI {
        d = 2.0 * PI - d;
    }
    d
}

/// Motion term for pairing `t` with `d`, or `None` when the track has fewer
/// than two observations.
///
/// The implied per-frame displacement runs from the track's last observed
/// center to the detection center.
pub fn motion_cost(t: &Track, d: &Detection, beta: &[f64; 3]) -> Option<f64> {
    let v_avg = t.average_speed(SPEED_WINDOW)?;
    let last = t.last_entry()?;
    let elapsed = f64::from(d.frame.saturating_sub(last.frame).max(1));
    let (cx, cy) = d.center();
    let disp = (
        (cx - last.center.0) / elapsed,
        (cy - last.center.1) / elapsed,
    );
    let v_expected = disp.0.hypot(disp.1);
    let dtheta = match t.direction_history.back() {
        Some(&heading) if v_expected > 1e-9 => angle_between(disp.1.atan2(disp.0), heading),
        _ => 0.0,
    };
    let accel = (disp.0 - last.velocity.0).hypot(disp.1 - last.velocity.1);
    Some(motion_cost_from_terms(
        v_avg, v_expected, dtheta, accel, beta,
    ))
}

/// `cost_motion` with the undefined case mapped to zero.
pub fn cost_motion(t: &Track, d: &Detection, beta: &[f64; 3]) -> f64 {
    motion_cost(t, d, beta).unwrap_or(0.0)
}

/// Relational cost, or `None` when no usable reference object exists.
///
/// Objects coinciding with either center carry no direction and are skipped.
pub fn relational_cost(ci: (f64, f64), cj: (f64, f64), others: &[(f64, f64)]) -> Option<f64> {
    let mut sum = 0.0;
    let mut m = 0usize;
    for &ck in others {
        let a = (ck.0 - ci.0, ck.1 - ci.1);
        let b = (ck.0 - cj.0, ck.1 - cj.1);
        let na = a.0.hypot(a.1);
        let nb = b.0.hypot(b.1);
        if na < 1e-12 || nb < 1e-12 {
            continue;
        }
        sum += (a.0 * b.0 + a.1 * b.1) / (na * nb);
        m += 1;
    }
    if m == 0 {
        return None;
    }
    Some((1.0 - sum / m as f64).clamp(0.0, 1.0))
}

pub fn cost_rel(ci: (f64, f64), cj: (f64, f64), others: &[(f64, f64)]) -> f64 {
    relational_cost(ci, cj, others).unwrap_or(0.0)
}

/// The four cost components of one pair; `None` marks an undefined term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerms {
    pub iou: f64,
    pub dist: f64,
    pub motion: Option<f64>,
    pub rel: Option<f64>,
}

impl CostTerms {
    /// Weighted sum; weights of undefined terms are redistributed proportionally.
    pub fn combine(&self, omega: &[f64; 4]) -> f64 {
        let mut num = omega[0] * self.iou + omega[1] * self.dist;
        let mut den = omega[0] + omega[1];
        if let Some(m) = self.motion {
            num += omega[2] * m;
            den += omega[2];
        }
        if let Some(r) = self.rel {
            num += omega[3] * r;
            den += omega[3];
        }
        if den <= 0.0 {
            return 0.0;
        }
        (num / den).clamp(0.0, 1.0)
    }
}

/// Reference centers for the relational term of pair `(i, j)`: every other
/// detection plus every other track prediction not already explained by a
/// detection.
fn reference_centers(
    i: usize,
    j: usize,
    det_centers: &[(f64, f64)],
    track_centers: &[(f64, f64)],
    unexplained: &[bool],
    out: &mut Vec<(f64, f64)>,
) {
    out.clear();
    out.extend(
        det_centers
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .map(|(_, c)| *c),
    );
    out.extend(
        track_centers
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i && unexplained[k])
            .map(|(_, c)| *c),
    );
}

/// Component terms for every pair; tracks must already be predicted to the
/// detections' frame.
pub fn jcma_terms(tracks: &[&Track], dets: &[Detection], cfg: &TrackerConfig) -> Vec<CostTerms> {
    let track_boxes: Vec<BBox> = tracks.iter().map(|t| t.predicted_box()).collect();
    let track_centers: Vec<(f64, f64)> = track_boxes.iter().map(|b| b.center()).collect();
    let det_centers: Vec<(f64, f64)> = dets.iter().map(|d| d.center()).collect();
    // a track overlapping some detection's distance scale is represented by that detection
    let unexplained: Vec<bool> = track_boxes
        .iter()
        .map(|tb| dets.iter().all(|d| cost_dist(tb, &d.bbox) >= 1.0))
        .collect();

    let mut out = Vec::with_capacity(tracks.len() * dets.len());
    let mut refs = Vec::with_capacity(dets.len() + tracks.len());
    for (i, t) in tracks.iter().enumerate() {
        for (j, d) in dets.iter().enumerate() {
            reference_centers(i, j, &det_centers, &track_centers, &unexplained, &mut refs);
            out.push(CostTerms {
                iou: cost_iou(&track_boxes[i], &d.bbox),
                dist: cost_dist(&track_boxes[i], &d.bbox),
                motion: motion_cost(t, d, &cfg.beta),
                rel: relational_cost(track_centers[i], det_centers[j], &refs),
            });
        }
    }
    out
}

pub fn jcma_cost(tracks: &[&Track], dets: &[Detection], cfg: &TrackerConfig) -> CostMatrix {
    let terms = jcma_terms(tracks, dets, cfg);
    CostMatrix::new(
        tracks.len(),
        dets.len(),
        terms.iter().map(|t| t.combine(&cfg.omega)).collect(),
    )
}

/// Overlap-only cost used by the baseline tracker.
pub fn iou_cost(tracks: &[&Track], dets: &[Detection]) -> CostMatrix {
    CostMatrix::from_fn(tracks.len(), dets.len(), |i, j| {
        cost_iou(&tracks[i].predicted_box(), &dets[j].bbox)
    })
}

/// Minimum-cost matching restricted to pairs with cost at most `gate`.
///
/// Leaving a row or column unmatched costs `gate / 2`, so a pair is only
/// formed when it is cheaper than abandoning both ends. An infinite gate
/// yields the full-cardinality optimum.
pub fn solve_assignment(m: &CostMatrix, gate: f64) -> Assignment {
    let (n, k) = (m.rows, m.cols);
    if n == 0 || k == 0 {
        return Assignment::all_unmatched(n, k);
    }
    let row_to_col = if gate.is_infinite() {
        lsap(&m.values, n, k)
    } else {
        let size = n + k;
        let forbidden = 2.0 * gate + 1.0;
        let mut ext = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..size {
                ext[i * size + j] = match (i < n, j < k) {
                    (true, true) => {
                        let c = m.get(i, j);
                        if c <= gate {
                            c
                        } else {
                            forbidden
                        }
                    }
                    (true, false) | (false, true) => gate / 2.0,
                    (false, false) => 0.0,
                };
            }
        }
        let sol = lsap(&ext, size, size);
        sol[..n].iter().map(|c| c.filter(|&j| j < k)).collect()
    };

    let mut out = Assignment::default();
    let mut det_used = vec![false; k];
    for (i, c) in row_to_col.into_iter().enumerate() {
        match c {
            Some(j) if m.get(i, j) <= gate => {
                out.pairs.push((i, j));
                det_used[j] = true;
            }
            _ => out.unmatched_tracks.push(i),
        }
    }
    out.unmatched_detections = (0..k).filter(|&j| !det_used[j]).collect();
    out
}
