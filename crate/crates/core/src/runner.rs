//! End-to-end runs: scheduler, detector oracle and tracker over a scenario.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BBox, Detection, DetectionSource};
use crate::glsched::{to_global, Mode, Roi, SchedulerState};
use crate::io::RunConfig;
use crate::metrics::{evaluate, MetricsReport};
use crate::pipeline::{Association, Tracker, TrackerOptions};
use crate::sim::{
    gen_scenario, render_detections, roi_detector_oracle, Layout, NoiseModel, Occlusion,
    ScenarioConfig,
};
use crate::trajectory::TrajectorySet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemOptions {
    pub tracker: TrackerOptions,
    /// Switch to window detection once tracking is stable.
    pub local_detection: bool,
}

impl SystemOptions {
    pub const FULL: SystemOptions = SystemOptions {
        tracker: TrackerOptions::FULL,
        local_detection: true,
    };
    pub const BASELINE: SystemOptions = SystemOptions {
        tracker: TrackerOptions::BASELINE,
        local_detection: false,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub tracks: TrajectorySet,
    /// Confidence of every reported box, keyed by (frame, id).
    pub confidences: BTreeMap<(u32, u64), f64>,
    /// Detection mode used for each frame, in frame order.
    pub modes: Vec<(u32, Mode)>,
    /// Detection windows of every local frame.
    pub windows: BTreeMap<u32, Vec<BBox>>,
}

/// Track one scenario. Global frames use `global_dets`; local frames query
/// the window oracle against `gt`.
pub fn run_system(
    gt: &TrajectorySet,
    global_dets: &BTreeMap<u32, Vec<Detection>>,
    cfg: &RunConfig,
    opts: SystemOptions,
) -> Result<RunOutput> {
    let dims = cfg.scenario.frame_dims;
    let mut tracker = Tracker::new(cfg.tracker.clone(), opts.tracker, dims)?;
    let mut sched = SchedulerState::new(dims);
    let mut out = RunOutput {
        tracks: TrajectorySet::new(),
        confidences: BTreeMap::new(),
        modes: Vec::new(),
        windows: BTreeMap::new(),
    };
    let mut frames: Vec<u32> = gt
        .frame_indices()
        .chain(global_dets.keys().copied())
        .collect();
    frames.sort_unstable();
    frames.dedup();
    let empty = Vec::new();
    for frame in frames {
        let mode = if opts.local_detection {
            sched.mode
        } else {
            Mode::Global
        };
        let (dets, rois, found): (Vec<Detection>, Vec<Roi>, Vec<usize>) = match mode {
            Mode::Global => (
                global_dets.get(&frame).unwrap_or(&empty).clone(),
                Vec::new(),
                Vec::new(),
            ),
            Mode::Local => {
                let rois = sched
                    .refresh_rois(tracker.tracks(), &cfg.tracker, frame)
                    .to_vec();
                let local =
                    roi_detector_oracle(&rois, frame, gt, &cfg.noise, dims, cfg.scenario.seed)?;
                let mut found = vec![0usize; rois.len()];
                let mut dets = Vec::with_capacity(local.len());
                for d in &local {
                    let DetectionSource::Local(id) = d.source else {
                        return Err(Error::Shape("window detection without a window".into()));
                    };
                    let k = rois
                        .iter()
                        .position(|r| r.id == id)
                        .ok_or(Error::RegionMismatch { roi: id })?;
                    found[k] += 1;
                    dets.push(to_global(d, &rois[k])?);
                }
                (dets, rois, found)
            }
        };
        let res = tracker.step_with_regions(frame, &dets, &rois)?;
        out.tracks.touch(frame);
        for o in &res.outputs {
            out.tracks.insert(frame, o.id, o.bbox);
            out.confidences.insert((frame, o.id), o.confidence);
        }
        out.modes.push((frame, mode));
        if mode == Mode::Local {
            out.windows
                .insert(frame, rois.iter().map(|r| r.rect).collect());
        }
        if opts.local_detection {
            sched.advance(tracker.tracks(), &found, &cfg.tracker);
        }
    }
    Ok(out)
}

/// Generate a scenario from `cfg` and track it.
pub fn simulate_and_run(
    cfg: &RunConfig,
    opts: SystemOptions,
) -> Result<(TrajectorySet, RunOutput)> {
    let gt = gen_scenario(&cfg.scenario)?;
    let dets = render_detections(&gt, &cfg.noise, cfg.scenario.frame_dims, cfg.scenario.seed)?;
    let out = run_system(&gt, &dets, cfg, opts)?;
    Ok((gt, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Random motion with scripted short occlusions.
    Occlusion,
    /// Constant-velocity targets whose paths cross.
    Crossing,
    /// Half occlusion, half crossing.
    Mixed,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "occlusion" => Ok(Suite::Occlusion),
            "crossing" => Ok(Suite::Crossing),
            "mixed" => Ok(Suite::Mixed),
            _ => Err(Error::Config(format!(
                "unknown suite '{s}' (occlusion, crossing, mixed)"
            ))),
        }
    }
}

/// Occlusions of 1-3 frames roughly every 60 frames per target.
fn scripted_occlusions(n_targets: usize, frames: u32, seed: u64) -> Vec<Occlusion> {
    let mut out = Vec::new();
    for t in 1..=n_targets as u64 {
        let mut start = 40 + ((seed * 7 + t * 13) % 20) as u32;
        let mut k = 0u64;
        while start + 5 < frames {
            out.push(Occlusion {
                target: t,
                start,
                duration: 1 + ((seed + t + k) % 3) as u32,
            });
            start += 50 + ((seed * 3 + t * 5 + k * 11) % 20) as u32;
            k += 1;
        }
    }
    out
}

/// Run configurations of a seeded suite; scenario `i` uses seed `i`.
pub fn suite_configs(suite: Suite, seeds: u64, base: &RunConfig) -> Vec<RunConfig> {
    (0..seeds)
        .map(|seed| {
            let kind = match suite {
                Suite::Occlusion => Layout::Random,
                Suite::Crossing => Layout::Crossing,
                Suite::Mixed if seed % 2 == 0 => Layout::Random,
                Suite::Mixed => Layout::Crossing,
            };
            let scenario = ScenarioConfig {
                n_targets: 3,
                frames: 600,
                layout: kind,
                seed,
                motion_mix: match kind {
                    Layout::Random => base.scenario.motion_mix,
                    Layout::Crossing => [1.0, 0.0, 0.0, 0.0],
                },
                ..base.scenario.clone()
            };
            let noise = NoiseModel {
                occlusions: match kind {
                    Layout::Random => scripted_occlusions(3, 600, seed),
                    Layout::Crossing => Vec::new(),
                },
                ..base.noise.clone()
            };
            RunConfig {
                tracker: base.tracker.clone(),
                scenario,
                noise,
            }
        })
        .collect()
}

/// Ablation rows: baseline, +joint cost, +recovery, +window detection.
pub fn ablation_variants() -> Vec<(&'static str, SystemOptions)> {
    let joint = TrackerOptions {
        association: Association::Joint,
        recovery: false,
    };
    vec![
        ("baseline", SystemOptions::BASELINE),
        (
            "+JCMA",
            SystemOptions {
                tracker: joint,
                local_detection: false,
            },
        ),
        (
            "+JCMA+PMR",
            SystemOptions {
                tracker: TrackerOptions::FULL,
                local_detection: false,
            },
        ),
        ("+GD+LD (full)", SystemOptions::FULL),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSummary {
    pub label: String,
    pub per_scenario: Vec<MetricsReport>,
    pub idsw: usize,
    /// Identity F1 over all scenarios pooled (identity counts summed).
    pub idf1: f64,
    pub mota: f64,
    pub motp: f64,
    pub hota: f64,
}

/// Evaluate one variant on every scenario, in parallel; results are in
/// scenario order and independent of thread count.
pub fn run_suite(configs: &[RunConfig], label: &str, opts: SystemOptions) -> Result<SuiteSummary> {
    let reports: Vec<MetricsReport> = configs
        .par_iter()
        .map(|cfg| {
            let (gt, out) = simulate_and_run(cfg, opts)?;
            let pred = out.tracks;
            evaluate(&gt, &pred)
        })
        .collect::<Result<_>>()?;
    Ok(summarize(label, reports))
}

fn summarize(label: &str, reports: Vec<MetricsReport>) -> SuiteSummary {
    let n = reports.len().max(1) as f64;
    let idsw = reports.iter().map(|r| r.idsw).sum();
    let (mut num, mut den) = (0.0, 0.0);
    for r in &reports {
        // idf1 = 2 idtp / (gt + pred) with pred = tp + fp
        let boxes = (r.gt + r.tp + r.fp) as f64;
        num += r.idf1 * boxes;
        den += boxes;
    }
    SuiteSummary {
        label: label.to_string(),
        idsw,
        idf1: if den > 0.0 { num / den } else { 0.0 },
        mota: reports.iter().map(|r| r.mota).sum::<f64>() / n,
        motp: reports.iter().map(|r| r.motp).sum::<f64>() / n,
        hota: reports.iter().map(|r| r.hota).sum::<f64>() / n,
        per_scenario: reports,
    }
}

/// A frame-filling box, useful as the region of global detections.
pub fn frame_box(dims: (f64, f64)) -> BBox {
    BBox {
        x: 0.0,
        y: 0.0,
        w: dims.0,
        h: dims.1,
    }
}
