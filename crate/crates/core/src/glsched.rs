//! Global/local detection scheduling and local window (ROI) management.
//!
//! The scheduler runs full-frame detection for at least `n_g` frames, then
//! switches to local windows around the tracked targets once one track has
//! been matched for [`STABLE_STREAK`] consecutive frames. Local mode lasts at
//! most `n_l` frames and is abandoned early after `n_m` consecutive frames in
//! which no window produced a detection.

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::geometry::{distance, iou, BBox, Detection, DetectionSource};
use crate::motion::kf_predict;
use crate::track::{Track, TrackState};

/// Consecutive matched frames that count as stable tracking.
pub const STABLE_STREAK: u32 = 3;
// Keeps members strictly inside the safe zone despite rounding.
const SAFE_PAD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Global,
    Local,
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Global => "GD",
            Mode::Local => "LD",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roi {
    pub id: u32,
    pub rect: BBox,
    pub members: Vec<u64>,
    /// Consecutive frames without a detection inside this window.
    pub misses: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Stay,
    ToLocal,
    /// Local mode ran for `n_l` frames.
    Expired,
    /// No window produced a detection for `n_m` frames.
    Reset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    pub mode: Mode,
    pub frames_in_mode: u32,
    pub rois: Vec<Roi>,
    pub frame_dims: (f64, f64),
    /// Consecutive local frames in which no window produced a detection.
    pub empty_streak: u32,
}

/// Whether any active track has been matched for `STABLE_STREAK` frames in a row.
pub fn stable_tracking(tracks: &[Track]) -> bool {
    tracks
        .iter()
        .any(|t| t.state == TrackState::Active && t.hit_streak >= STABLE_STREAK)
}

impl SchedulerState {
    pub fn new(frame_dims: (f64, f64)) -> Self {
        Self {
            mode: Mode::Global,
            frames_in_mode: 0,
            rois: Vec::new(),
            frame_dims,
            empty_streak: 0,
        }
    }

    fn switch(&mut self, mode: Mode) {
        self.mode = mode;
        self.frames_in_mode = 0;
        self.rois.clear();
        self.empty_streak = 0;
    }

    /// Account for the frame just processed and decide the next frame's mode.
    ///
    /// `found_per_roi[i]` is the number of detections window `i` produced.
    pub fn advance(
        &mut self,
        tracks: &[Track],
        found_per_roi: &[usize],
        cfg: &TrackerConfig,
    ) -> Transition {
        self.frames_in_mode += 1;
        match self.mode {
            Mode::Global => {
                if self.frames_in_mode >= cfg.n_g && stable_tracking(tracks) {
                    self.switch(Mode::Local);
                    return Transition::ToLocal;
                }
                Transition::Stay
            }
            Mode::Local => {
                for (i, roi) in self.rois.iter_mut().enumerate() {
                    if found_per_roi.get(i).copied().unwrap_or(0) == 0 {
                        roi.misses += 1;
                    } else {
                        roi.misses = 0;
                    }
                }
                if found_per_roi.iter().sum::<usize>() == 0 {
                    self.empty_streak += 1;
                } else {
                    self.empty_streak = 0;
                }
                if self.empty_streak >= cfg.n_m {
                    self.switch(Mode::Global);
                    Transition::Reset
                } else if self.frames_in_mode >= cfg.n_l {
                    self.switch(Mode::Global);
                    Transition::Expired
                } else {
                    Transition::Stay
                }
            }
        }
    }

    /// Build the windows for `frame` from the tracks and store them.
    pub fn refresh_rois(&mut self, tracks: &[Track], cfg: &TrackerConfig, frame: u32) -> &[Roi] {
        let mut rois = make_rois(tracks, self, cfg, frame);
        for roi in &mut rois {
            roi.misses = self
                .rois
                .iter()
                .filter(|old| old.members.iter().any(|m| roi.members.contains(m)))
                .map(|old| old.misses)
                .min()
                .unwrap_or(0);
        }
        self.rois = rois;
        &self.rois
    }
}

/// Centered safe zone: same aspect ratio, `tau_s` of the area.
pub fn safe_zone(rect: &BBox, tau_s: f64) -> BBox {
    let k = tau_s.sqrt();
    let (cx, cy) = rect.center();
    BBox {
        x: cx - rect.w * k / 2.0,
        y: cy - rect.h * k / 2.0,
        w: rect.w * k,
        h: rect.h * k,
    }
}

fn window_at(c: (f64, f64), w: f64, h: f64, dims: (f64, f64)) -> BBox {
    BBox {
        x: c.0 - w / 2.0,
        y: c.1 - h / 2.0,
        w,
        h,
    }
    .clamp_to(dims.0, dims.1)
}

/// Smallest window of at least `min_side` centered on the members' bounding
/// box whose safe zone covers every member.
fn covering_window(centers: &[(f64, f64)], min_side: f64, tau_s: f64, dims: (f64, f64)) -> BBox {
    let x0 = centers.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let x1 = centers
        .iter()
        .map(|c| c.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let y0 = centers.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let y1 = centers
        .iter()
        .map(|c| c.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let k = tau_s.sqrt();
    let w = ((x1 - x0 + 2.0 * SAFE_PAD) / k).max(min_side);
    let h = ((y1 - y0 + 2.0 * SAFE_PAD) / k).max(min_side);
    window_at(((x0 + x1) / 2.0, (y0 + y1) / 2.0), w, h, dims)
}

/// Tracks that receive a window in `frame`: live ones (active and
/// tentative, so a target re-acquired inside a window keeps one), plus lost
/// ones observed within the last `n_m` frames so a short dropout does not
/// blind the local detector.
fn windowed_tracks<'a>(
    tracks: &'a [Track],
    cfg: &'a TrackerConfig,
    frame: u32,
) -> impl Iterator<Item = &'a Track> + 'a {
    tracks.iter().filter(move |t| match t.state {
        TrackState::Active | TrackState::Tentative => true,
        TrackState::Lost => frame.saturating_sub(t.last_update_frame) <= cfg.n_m,
        TrackState::Removed => false,
    })
}

/// One `roi_size` window per tracked target centered on its one-step
/// prediction, then merged, split and re-centered.
pub fn make_rois(
    tracks: &[Track],
    state: &SchedulerState,
    cfg: &TrackerConfig,
    frame: u32,
) -> Vec<Roi> {
    let dims = state.frame_dims;
    let centers: Vec<(u64, (f64, f64))> = windowed_tracks(tracks, cfg, frame)
        .map(|t| (t.id, kf_predict(&t.motion).center()))
        .collect();
    let initial: Vec<Roi> = centers
        .iter()
        .map(|&(id, c)| Roi {
            id: 0,
            rect: window_at(c, cfg.roi_size, cfg.roi_size, dims),
            members: vec![id],
            misses: 0,
        })
        .collect();
    let mut out = Vec::new();
    for roi in merge_rois(initial, cfg.tau_o) {
        for part in split_roi(&roi, &centers, cfg.tau_d, cfg.tau_s, cfg.roi_size, dims) {
            out.push(enforce_safe_zone(&part, &centers, cfg.tau_s, dims));
        }
    }
    for (i, roi) in out.iter_mut().enumerate() {
        roi.id = i as u32;
    }
    out
}

/// Merge windows whose IoU exceeds `tau_o` until no such pair remains.
pub fn merge_rois(mut rois: Vec<Roi>, tau_o: f64) -> Vec<Roi> {
    loop {
        let mut pair = None;
        'outer: for i in 0..rois.len() {
            for j in i + 1..rois.len() {
                if iou(&rois[i].rect, &rois[j].rect) > tau_o {
                    pair = Some((i, j));
                    break 'outer;
                }
            }
        }
        let Some((i, j)) = pair else {
            return rois;
        };
        let other = rois.remove(j);
        let keep = &mut rois[i];
        keep.rect = keep.rect.union_rect(&other.rect);
        keep.members.extend(other.members);
        keep.misses = keep.misses.min(other.misses);
    }
}

fn member_centers(roi: &Roi, centers: &[(u64, (f64, f64))]) -> Vec<(u64, (f64, f64))> {
    centers
        .iter()
        .filter(|(id, _)| roi.members.contains(id))
        .copied()
        .collect()
}

/// Split a window whose members are more than `tau_d` apart into one window
/// per single-linkage cluster; otherwise grow it to cover every member.
pub fn split_roi(
    roi: &Roi,
    centers: &[(u64, (f64, f64))],
    tau_d: f64,
    tau_s: f64,
    min_side: f64,
    dims: (f64, f64),
) -> Vec<Roi> {
    let members = member_centers(roi, centers);
    if members.len() < 2 {
        return vec![roi.clone()];
    }
    let n = members.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    let mut widest = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(members[i].1, members[j].1);
            widest = widest.max(d);
            if d <= tau_d {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    if widest <= tau_d {
        let pts: Vec<(f64, f64)> = members.iter().map(|m| m.1).collect();
        let cover = covering_window(&pts, min_side, tau_s, dims);
        let rect = if safe_zone_holds(&roi.rect, &pts, tau_s) {
            roi.rect
        } else {
            roi.rect.union_rect(&cover).clamp_to(dims.0, dims.1)
        };
        return vec![Roi {
            rect,
            ..roi.clone()
        }];
    }
    let mut clusters: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let root = find(&mut label, i);
        match clusters.iter_mut().find(|(r, _)| *r == root) {
            Some((_, v)) => v.push(i),
            None => clusters.push((root, vec![i])),
        }
    }
    clusters
        .into_iter()
        .map(|(_, idx)| {
            let pts: Vec<(f64, f64)> = idx.iter().map(|&i| members[i].1).collect();
            Roi {
                id: roi.id,
                rect: covering_window(&pts, min_side, tau_s, dims),
                members: idx.iter().map(|&i| members[i].0).collect(),
                misses: roi.misses,
            }
        })
        .collect()
}

fn safe_zone_holds(rect: &BBox, pts: &[(f64, f64)], tau_s: f64) -> bool {
    let zone = safe_zone(rect, tau_s);
    pts.iter().all(|&(x, y)| zone.contains_point(x, y))
}

/// Re-center (and grow if needed) a window so every member lies in its safe zone.
pub fn enforce_safe_zone(
    roi: &Roi,
    centers: &[(u64, (f64, f64))],
    tau_s: f64,
    dims: (f64, f64),
) -> Roi {
    let pts: Vec<(f64, f64)> = member_centers(roi, centers).iter().map(|m| m.1).collect();
    if pts.is_empty() || safe_zone_holds(&roi.rect, &pts, tau_s) {
        return roi.clone();
    }
    let n = pts.len() as f64;
    let g = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let k = tau_s.sqrt();
    let reach_x = pts.iter().map(|p| (p.0 - g.0).abs()).fold(0.0, f64::max);
    let reach_y = pts.iter().map(|p| (p.1 - g.1).abs()).fold(0.0, f64::max);
    let w = roi.rect.w.max(2.0 * (reach_x + SAFE_PAD) / k);
    let h = roi.rect.h.max(2.0 * (reach_y + SAFE_PAD) / k);
    Roi {
        rect: window_at(g, w, h, dims),
        ..roi.clone()
    }
}

/// Map a window-local detection into frame coordinates.
pub fn to_global(d: &Detection, roi: &Roi) -> Result<Detection> {
    if d.source != DetectionSource::Local(roi.id) {
        return Err(Error::RegionMismatch { roi: roi.id });
    }
    Ok(Detection {
        bbox: d.bbox.translate(roi.rect.x, roi.rect.y),
        ..*d
    })
}

/// Inverse of [`to_global`].
pub fn to_local(d: &Detection, roi: &Roi) -> Result<Detection> {
    if d.source != DetectionSource::Local(roi.id) {
        return Err(Error::RegionMismatch { roi: roi.id });
    }
    Ok(Detection {
        bbox: d.bbox.translate(-roi.rect.x, -roi.rect.y),
        ..*d
    })
}
