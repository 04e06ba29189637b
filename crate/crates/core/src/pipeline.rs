//! Three-stage tracker.
//!
//! Per frame: predict every track, split detections by confidence, then
//!
//! 1. match live tracks to high-confidence detections (joint cost),
//! 2. match the remaining live tracks to low-confidence detections,
//! 3. offer the remaining high-confidence detections to lost tracks through
//!    the recovery model.
//!
//! Unclaimed high-confidence detections start new tracks. The baseline
//! variant uses overlap-only cost and skips stage 3.

use crate::assoc::{iou_cost, jcma_cost, solve_assignment, CostMatrix};
use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::geometry::{BBox, Detection, DetectionSource};
use crate::glsched::Roi;
use crate::motion::{kf_predict, kf_update};
use crate::pmr::{recover, FeatureSpace};
use crate::track::{Track, TrackState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Association {
    Joint,
    IouOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackerOptions {
    pub association: Association,
    pub recovery: bool,
}

impl TrackerOptions {
    pub const FULL: TrackerOptions = TrackerOptions {
        association: Association::Joint,
        recovery: true,
    };
    pub const BASELINE: TrackerOptions = TrackerOptions {
        association: Association::IouOnly,
        recovery: false,
    };
}

/// One reported box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOutput {
    pub id: u64,
    pub bbox: BBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub born: usize,
    pub promoted: usize,
    pub lost: usize,
    pub recovered: usize,
    pub removed: usize,
}

/// Per-stage instrumentation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageCounts {
    pub high: usize,
    pub low: usize,
    pub dropped: usize,
    pub stage1_matches: usize,
    pub stage2_matches: usize,
    pub stage3_lost: usize,
    pub stage3_candidates: usize,
    pub stage3_matches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub frame: u32,
    pub outputs: Vec<TrackOutput>,
    pub events: EventCounts,
    pub stages: StageCounts,
}

/// Partition into (high, low); detections below `t_l` are dropped.
pub fn split_by_confidence(
    dets: &[Detection],
    t_h: f64,
    t_l: f64,
) -> Result<(Vec<Detection>, Vec<Detection>)> {
    if t_l.is_nan() || t_h.is_nan() || t_l >= t_h {
        return Err(Error::Config(format!(
            "t_l ({t_l}) must be below t_h ({t_h})"
        )));
    }
    let high = dets
        .iter()
        .filter(|d| d.confidence >= t_h)
        .copied()
        .collect();
    let low = dets
        .iter()
        .filter(|d| d.confidence >= t_l && d.confidence < t_h)
        .copied()
        .collect();
    Ok((high, low))
}

#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    options: TrackerOptions,
    space: FeatureSpace,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u32>,
}

impl Tracker {
    pub fn new(
        cfg: TrackerConfig,
        options: TrackerOptions,
        frame_dims: (f64, f64),
    ) -> Result<Self> {
        cfg.validate()?;
        if !(frame_dims.0 > 0.0 && frame_dims.1 > 0.0) {
            return Err(Error::Config(format!(
                "frame size {frame_dims:?} must be positive"
            )));
        }
        Ok(Self {
            space: FeatureSpace::new(frame_dims, &cfg),
            cfg,
            options,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    pub fn full(cfg: TrackerConfig, frame_dims: (f64, f64)) -> Result<Self> {
        Self::new(cfg, TrackerOptions::FULL, frame_dims)
    }

    pub fn baseline(cfg: TrackerConfig, frame_dims: (f64, f64)) -> Result<Self> {
        Self::new(cfg, TrackerOptions::BASELINE, frame_dims)
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn options(&self) -> TrackerOptions {
        self.options
    }

    /// Tracks that have not been removed, in creation order.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.last_frame
    }

    /// Process full-frame detections for `frame`.
    pub fn step(&mut self, frame: u32, dets: &[Detection]) -> Result<FrameResult> {
        self.step_with_regions(frame, dets, &[])
    }

    /// Process detections for `frame`; local detections (already in frame
    /// coordinates) are attributed to the window in `regions` with their id.
    pub fn step_with_regions(
        &mut self,
        frame: u32,
        dets: &[Detection],
        regions: &[Roi],
    ) -> Result<FrameResult> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::FrameRegression { got: frame, last });
            }
        }
        if let Some(d) = dets.iter().find(|d| d.frame != frame) {
            return Err(Error::FrameMismatch {
                got: d.frame,
                expected: frame,
            });
        }
        if dets.iter().any(|d| {
            !(d.bbox.x.is_finite()
                && d.bbox.y.is_finite()
                && d.bbox.w.is_finite()
                && d.bbox.h.is_finite())
        }) {
            return Err(Error::NonFiniteMeasurement);
        }
        let first_frame = self.last_frame.is_none();
        self.last_frame = Some(frame);

        let (high, low) = split_by_confidence(dets, self.cfg.t_h, self.cfg.t_l)?;
        let mut stages = StageCounts {
            high: high.len(),
            low: low.len(),
            dropped: dets.len() - high.len() - low.len(),
            ..Default::default()
        };
        let mut events = EventCounts::default();

        for t in &mut self.tracks {
            t.motion = kf_predict(&t.motion);
        }

        // stages 1 and 2: live tracks
        let mut pool: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].is_live())
            .collect();
        let mut high_left: Vec<usize> = (0..high.len()).collect();
        let matched = self.associate(&mut pool, &mut high_left, &high, frame, regions)?;
        stages.stage1_matches = matched;
        let mut low_left: Vec<usize> = (0..low.len()).collect();
        stages.stage2_matches = self.associate(&mut pool, &mut low_left, &low, frame, regions)?;

        for &i in &pool {
            let t = &mut self.tracks[i];
            t.hit_streak = 0;
            match t.state {
                TrackState::Tentative => t.state = TrackState::Removed,
                TrackState::Active => {
                    t.state = TrackState::Lost;
                    events.lost += 1;
                }
                _ => {}
            }
        }

        // stage 3: recovery of lost tracks
        if self.options.recovery && !high_left.is_empty() {
            let lost_idx: Vec<usize> = (0..self.tracks.len())
                .filter(|&i| self.tracks[i].state == TrackState::Lost)
                .collect();
            stages.stage3_lost = lost_idx.len();
            stages.stage3_candidates = high_left.len();
            if !lost_idx.is_empty() {
                let candidates: Vec<Detection> = high_left.iter().map(|&j| high[j]).collect();
                let lost: Vec<&Track> = lost_idx.iter().map(|&i| &self.tracks[i]).collect();
                let a = recover(&lost, &candidates, &self.cfg, &self.space, frame);
                let mut taken = Vec::new();
                for &(li, cj) in &a.pairs {
                    let d = candidates[cj];
                    let region = self.region_of(&d, regions);
                    let t = &mut self.tracks[lost_idx[li]];
                    apply_match(t, &d, region)?;
                    t.state = TrackState::Active;
                    events.recovered += 1;
                    taken.push(high_left[cj]);
                }
                stages.stage3_matches = a.pairs.len();
                high_left.retain(|j| !taken.contains(j));
            }
        }

        // births
        for &j in &high_left {
            let d = high[j];
            let region = self.region_of(&d, regions);
            let state = if first_frame || self.cfg.min_hits <= 1 {
                TrackState::Active
            } else {
                TrackState::Tentative
            };
            self.tracks
                .push(Track::new(self.next_id, &d, region, self.cfg.h_max, state));
            self.next_id += 1;
            events.born += 1;
        }

        // promotion and aging
        for t in &mut self.tracks {
            if t.state == TrackState::Tentative
                && t.last_update_frame == frame
                && t.hit_streak >= self.cfg.min_hits
            {
                t.state = TrackState::Active;
                events.promoted += 1;
            }
            if t.state == TrackState::Lost && frame - t.last_update_frame > self.cfg.max_lost_age {
                t.state = TrackState::Removed;
                events.removed += 1;
            }
        }
        self.tracks.retain(|t| t.state != TrackState::Removed);

        let outputs = self
            .tracks
            .iter()
            .filter(|t| t.state == TrackState::Active && t.last_update_frame == frame)
            .map(|t| {
                let e = t.last_entry().expect("active track has history");
                TrackOutput {
                    id: t.id,
                    bbox: e.bbox,
                    confidence: t.last_confidence,
                }
            })
            .collect();
        Ok(FrameResult {
            frame,
            outputs,
            events,
            stages,
        })
    }

    fn region_of(&self, d: &Detection, regions: &[Roi]) -> BBox {
        match d.source {
            DetectionSource::Local(id) => regions
                .iter()
                .find(|r| r.id == id)
                .map(|r| r.rect)
                .unwrap_or_else(|| self.space.frame_rect()),
            DetectionSource::Global => self.space.frame_rect(),
        }
    }

    fn cost(&self, pool: &[usize], dets: &[Detection]) -> CostMatrix {
        let tracks: Vec<&Track> = pool.iter().map(|&i| &self.tracks[i]).collect();
        match self.options.association {
            Association::Joint => jcma_cost(&tracks, dets, &self.cfg),
            Association::IouOnly => iou_cost(&tracks, dets),
        }
    }

    /// Match `pool` against `all[left]`, removing matched entries from both.
    fn associate(
        &mut self,
        pool: &mut Vec<usize>,
        left: &mut Vec<usize>,
        all: &[Detection],
        frame: u32,
        regions: &[Roi],
    ) -> Result<usize> {
        if pool.is_empty() || left.is_empty() {
            return Ok(0);
        }
        let dets: Vec<Detection> = left.iter().map(|&j| all[j]).collect();
        let m = self.cost(pool, &dets);
        let a = solve_assignment(&m, self.cfg.gate_max_cost);
        for &(pi, dj) in &a.pairs {
            let region = self.region_of(&dets[dj], regions);
            let t = &mut self.tracks[pool[pi]];
            debug_assert_eq!(dets[dj].frame, frame);
            apply_match(t, &dets[dj], region)?;
        }
        let used_t: Vec<usize> = a.pairs.iter().map(|p| pool[p.0]).collect();
        let used_d: Vec<usize> = a.pairs.iter().map(|p| left[p.1]).collect();
        pool.retain(|i| !used_t.contains(i));
        left.retain(|j| !used_d.contains(j));
        Ok(a.pairs.len())
    }
}

fn apply_match(t: &mut Track, d: &Detection, region: BBox) -> Result<()> {
    t.motion = kf_update(&t.motion, &d.bbox)?;
    let consecutive = t.last_update_frame + 1 == d.frame;
    t.hit_streak = if consecutive { t.hit_streak + 1 } else { 1 };
    t.push_history(d, region);
    Ok(())
}
