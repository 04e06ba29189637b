//! Identity-bearing trajectories.

use std::collections::VecDeque;

use crate::geometry::{BBox, Detection};
use crate::motion::{kf_init, MotionState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Tentative,
    Active,
    Lost,
    Removed,
}

/// One observed state of a track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub frame: u32,
    pub bbox: BBox,
    pub center: (f64, f64),
    /// Finite-difference velocity (px/frame) against the previous entry; zero for the first.
    pub velocity: (f64, f64),
    /// Region (local window or full frame) the observation was made in.
    pub region: BBox,
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub state: TrackState,
    pub motion: MotionState,
    pub history: VecDeque<HistoryEntry>,
    pub last_update_frame: u32,
    /// Heading (radians) of every non-zero observed displacement, newest last.
    pub direction_history: VecDeque<f64>,
    /// Consecutive frames with a matched detection.
    pub hit_streak: u32,
    pub last_confidence: f64,
    /// Frame of the detection that started the track.
    pub first_frame: u32,
    cap: usize,
}

impl Track {
    pub fn new(id: u64, det: &Detection, region: BBox, cap: usize, state: TrackState) -> Self {
        let mut t = Self {
            id,
            state,
            motion: kf_init(det),
            history: VecDeque::with_capacity(cap),
            last_update_frame: det.frame,
            direction_history: VecDeque::with_capacity(cap),
            hit_streak: 1,
            last_confidence: det.confidence,
            first_frame: det.frame,
            cap: cap.max(2),
        };
        t.push_history(det, region);
        t
    }

    /// Append an observation. Frames must increase strictly; stale ones are ignored.
    pub fn push_history(&mut self, det: &Detection, region: BBox) {
        if let Some(last) = self.history.back() {
            if det.frame <= last.frame {
                return;
            }
        }
        let center = det.bbox.center();
        let velocity = match self.history.back() {
            Some(prev) => {
                let dt = f64::from(det.frame - prev.frame);
                (
                    (center.0 - prev.center.0) / dt,
                    (center.1 - prev.center.1) / dt,
                )
            }
            None => (0.0, 0.0),
        };
        if self.history.len() == self.cap {
            self.history.pop_front();
        }
        self.history.push_back(HistoryEntry {
            frame: det.frame,
            bbox: det.bbox,
            center,
            velocity,
            region,
        });
        if velocity.0 != 0.0 || velocity.1 != 0.0 {
            if self.direction_history.len() == self.cap {
                self.direction_history.pop_front();
            }
            self.direction_history
                .push_back(velocity.1.atan2(velocity.0));
        }
        self.last_update_frame = det.frame;
        self.last_confidence = det.confidence;
    }

    pub fn last_entry(&self) -> Option<&HistoryEntry> {
        self.history.back()
    }

    pub fn predicted_box(&self) -> BBox {
        self.motion.bbox()
    }

    pub fn predicted_center(&self) -> (f64, f64) {
        self.motion.center()
    }

    pub fn is_live(&self) -> bool {
        matches!(self.state, TrackState::Active | TrackState::Tentative)
    }

    /// Mean observed speed (px/frame) over the newest `window` velocity samples.
    pub fn average_speed(&self, window: usize) -> Option<f64> {
        let n = self.history.len();
        if n < 2 {
            return None;
        }
        let take = window.min(n - 1);
        let sum: f64 = self
            .history
            .iter()
            .skip(n - take)
            .map(|e| e.velocity.0.hypot(e.velocity.1))
            .sum();
        Some(sum / take as f64)
    }
}
