//! Seeded scenario generator and detector oracle.
//!
//! Stands in for the trained detectors: ground-truth trajectories of small
//! targets are generated from simple motion models and rendered into noisy
//! detections. Every output is a pure function of the configuration and
//! seed; each (stream, frame) pair gets its own ChaCha stream, so frames
//! can be produced independently.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Detection, DetectionSource};
use crate::glsched::Roi;
use crate::trajectory::TrajectorySet;

/// Largest per-frame displacement of a hovering target.
pub const HOVER_CAP: f64 = 2.0;
const HOVER_PULL: f64 = 0.2;
const HOVER_STD: f64 = 0.8;
const DIVE_RAMP: f64 = 0.05;
const DIVE_MAX: f64 = 8.0;
const MANEUVER_RATE: f64 = 0.02;

const STREAM_TARGET: u64 = 1 << 40;
const STREAM_GLOBAL: u64 = 2 << 40;
const STREAM_LOCAL: u64 = 3 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionPattern {
    ConstantVelocity,
    Hover,
    Dive,
    Maneuver,
}

impl MotionPattern {
    pub const ALL: [MotionPattern; 4] = [
        MotionPattern::ConstantVelocity,
        MotionPattern::Hover,
        MotionPattern::Dive,
        MotionPattern::Maneuver,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Independent random starts and headings.
    Random,
    /// Constant-velocity targets whose paths meet near one point mid-run.
    Crossing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_targets: usize,
    pub frames: u32,
    pub frame_dims: (f64, f64),
    /// Weights over constant-velocity, hover, dive, maneuver.
    pub motion_mix: [f64; 4],
    /// Box side range (px).
    pub target_size: (f64, f64),
    /// Initial speed range (px/frame).
    pub speed: (f64, f64),
    pub layout: Layout,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_targets: 3,
            frames: 600,
            frame_dims: (1920.0, 1080.0),
            motion_mix: [0.4, 0.2, 0.2, 0.2],
            target_size: (8.0, 40.0),
            speed: (2.0, 6.0),
            layout: Layout::Random,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n_targets) {
            return Err(Error::Config(format!(
                "n_targets must be 1-3, got {}",
                self.n_targets
            )));
        }
        if self.frames == 0 {
            return Err(Error::Config("frames must be positive".into()));
        }
        if self.motion_mix.iter().any(|w| w.is_nan() || *w < 0.0)
            || (self.motion_mix.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(
                "motion_mix must be non-negative and sum to 1".into(),
            ));
        }
        let (lo, hi) = self.target_size;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::Config(
                "target_size must satisfy 0 < min <= max".into(),
            ));
        }
        let (w, h) = self.frame_dims;
        if !(w > 4.0 * hi && h > 4.0 * hi) {
            return Err(Error::Config("frame too small for target size".into()));
        }
        if !(self.speed.0 >= 0.0 && self.speed.0 <= self.speed.1 && self.speed.1.is_finite()) {
            return Err(Error::Config("speed must satisfy 0 <= min <= max".into()));
        }
        Ok(())
    }
}

/// Frames in which one ground-truth target yields no detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occlusion {
    pub target: u64,
    pub start: u32,
    pub duration: u32,
}

impl Occlusion {
    pub fn covers(&self, target: u64, frame: u32) -> bool {
        self.target == target && frame >= self.start && frame - self.start < self.duration
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Miss probability of the global (full-frame) detector.
    pub p_miss: f64,
    /// Miss probability of the local (window) detector.
    pub p_miss_local: f64,
    pub loc_noise_std: f64,
    pub size_noise_std: f64,
    /// Expected clutter boxes per full frame.
    pub fp_rate: f64,
    pub conf_base: f64,
    pub conf_penalty: f64,
    pub occlusions: Vec<Occlusion>,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            p_miss: 0.15,
            p_miss_local: 0.05,
            loc_noise_std: 1.0,
            size_noise_std: 0.5,
            fp_rate: 0.5,
            conf_base: 0.9,
            conf_penalty: 1.0,
            occlusions: Vec::new(),
        }
    }
}

impl NoiseModel {
    /// No misses, no jitter, no clutter.
    pub fn clean() -> Self {
        Self {
            p_miss: 0.0,
            p_miss_local: 0.0,
            loc_noise_std: 0.0,
            size_noise_std: 0.0,
            fp_rate: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_miss", self.p_miss), ("p_miss_local", self.p_miss_local)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        for (name, v) in [
            ("loc_noise_std", self.loc_noise_std),
            ("size_noise_std", self.size_noise_std),
            ("fp_rate", self.fp_rate),
            ("conf_penalty", self.conf_penalty),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.conf_base) {
            return Err(Error::Config("conf_base must lie in [0, 1]".into()));
        }
        if self.occlusions.iter().any(|o| o.duration == 0) {
            return Err(Error::Config(
                "occlusion durations must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn occluded(&self, target: u64, frame: u32) -> bool {
        self.occlusions.iter().any(|o| o.covers(target, frame))
    }
}

fn stream_rng(seed: u64, kind: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(kind | index);
    rng
}

/// Reflect `x` into `[lo, hi]` as if bouncing off both ends.
fn fold(x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return lo;
    }
    let y = (x - lo).rem_euclid(2.0 * span);
    lo + if y > span { 2.0 * span - y } else { y }
}

/// Reflect position and velocity into `[lo, hi]`.
fn bounce(p: &mut f64, v: &mut f64, lo: f64, hi: f64) {
    for _ in 0..4 {
        if *p < lo {
            *p = 2.0 * lo - *p;
            *v = v.abs();
        } else if *p > hi {
            *p = 2.0 * hi - *p;
            *v = -v.abs();
        } else {
            return;
        }
    }
    *p = p.clamp(lo, hi);
}

fn pick_pattern(mix: &[f64; 4], rng: &mut ChaCha8Rng) -> MotionPattern {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (w, p) in mix.iter().zip(MotionPattern::ALL) {
        acc += w;
        if u < acc {
            return p;
        }
    }
    MotionPattern::ALL[mix.iter().rposition(|w| *w > 0.0).unwrap_or(0)]
}

struct Target {
    w: f64,
    h: f64,
    centers: Vec<(f64, f64)>,
}

fn target_size(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let (lo, hi) = cfg.target_size;
    let w = rng.random_range(lo..=hi);
    let h = (w * rng.random_range(0.75..=1.25)).clamp(lo, hi);
    (w, h)
}

fn random_target(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Target {
    let (fw, fh) = cfg.frame_dims;
    let (w, h) = target_size(cfg, rng);
    let (x0, x1) = (w / 2.0, fw - w / 2.0);
    let (y0, y1) = (h / 2.0, fh - h / 2.0);
    let pattern = pick_pattern(&cfg.motion_mix, rng);
    let mut p = (
        rng.random_range(2.0 * w..fw - 2.0 * w),
        rng.random_range(2.0 * h..fh - 2.0 * h),
    );
    let heading = rng.random_range(-PI..PI);
    let speed = rng.random_range(cfg.speed.0..=cfg.speed.1);
    let mut v = (speed * heading.cos(), speed * heading.sin());
    let anchor = p;
    let jitter = Normal::new(0.0, HOVER_STD).expect("valid std");
    let turns = MANEUVER_RATE;
    let mut centers = Vec::with_capacity(cfg.frames as usize);
    for _ in 0..cfg.frames {
        centers.push(p);
        match pattern {
            MotionPattern::ConstantVelocity => {}
            MotionPattern::Hover => {
                let mut d = (
                    HOVER_PULL * (anchor.0 - p.0) + jitter.sample(rng),
                    HOVER_PULL * (anchor.1 - p.1) + jitter.sample(rng),
                );
                let n = d.0.hypot(d.1);
                if n > HOVER_CAP {
                    d = (d.0 * HOVER_CAP / n, d.1 * HOVER_CAP / n);
                }
                v = d;
            }
            MotionPattern::Dive => {
                v.1 = (v.1.abs() + DIVE_RAMP).min(DIVE_MAX);
            }
            MotionPattern::Maneuver => {
                if rng.random::<f64>() < turns {
                    let turn = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
                    let (s, c) = turn.sin_cos();
                    v = (v.0 * c - v.1 * s, v.0 * s + v.1 * c);
                }
            }
        }
        p.0 += v.0;
        p.1 += v.1;
        if pattern == MotionPattern::Hover {
            p = (p.0.clamp(x0, x1), p.1.clamp(y0, y1));
        } else {
            bounce(&mut p.0, &mut v.0, x0, x1);
            bounce(&mut p.1, &mut v.1, y0, y1);
            if pattern == MotionPattern::Dive && p.1 >= y1 {
                // restart the dive from the top edge band
                p.1 = y0 + 2.0 * h;
                v.1 = 0.0;
            }
        }
    }
    Target { w, h, centers }
}

fn crossing_targets(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<Target> {
    let (fw, fh) = cfg.frame_dims;
    let meet = (
        rng.random_range(0.35 * fw..0.65 * fw),
        rng.random_range(0.35 * fh..0.65 * fh),
    );
    let t_meet = f64::from(cfg.frames) * rng.random_range(0.3..0.7);
    let base = rng.random_range(-PI..PI);
    let n = cfg.n_targets as f64;
    (0..cfg.n_targets)
        .map(|i| {
            let (w, h) = target_size(cfg, rng);
            let heading = base + PI * i as f64 / n;
            let speed = rng.random_range(cfg.speed.0.max(1.0)..=cfg.speed.1.max(1.0));
            let offset = rng.random_range(-3.0..=3.0);
            let v = (speed * heading.cos(), speed * heading.sin());
            let centers = (0..cfg.frames)
                .map(|f| {
                    let dt = f64::from(f) - t_meet - offset;
                    (
                        fold(meet.0 + v.0 * dt, w / 2.0, fw - w / 2.0),
                        fold(meet.1 + v.1 * dt, h / 2.0, fh - h / 2.0),
                    )
                })
                .collect();
            Target { w, h, centers }
        })
        .collect()
}

/// Ground truth for `cfg`; target ids are `1..=n_targets`, frames `1..=frames`.
pub fn gen_scenario(cfg: &ScenarioConfig) -> Result<TrajectorySet> {
    cfg.validate()?;
    let targets: Vec<Target> = match cfg.layout {
        Layout::Random => (0..cfg.n_targets)
            .map(|i| random_target(cfg, &mut stream_rng(cfg.seed, STREAM_TARGET, i as u64)))
            .collect(),
        Layout::Crossing => crossing_targets(cfg, &mut stream_rng(cfg.seed, STREAM_TARGET, 0)),
    };
    let mut gt = TrajectorySet::new();
    for f in 0..cfg.frames {
        let frame = f + 1;
        gt.touch(frame);
        for (i, t) in targets.iter().enumerate() {
            let (cx, cy) = t.centers[f as usize];
            gt.insert(frame, i as u64 + 1, BBox::from_center(cx, cy, t.w, t.h)?);
        }
    }
    Ok(gt)
}

struct Jitter {
    dx: f64,
    dy: f64,
    dw: f64,
    dh: f64,
    keep: f64,
}

fn draw_jitter(nm: &NoiseModel, rng: &mut ChaCha8Rng) -> Jitter {
    let loc = Normal::new(0.0, nm.loc_noise_std).expect("validated std");
    let size = Normal::new(0.0, nm.size_noise_std).expect("validated std");
    Jitter {
        keep: rng.random(),
        dx: loc.sample(rng),
        dy: loc.sample(rng),
        dw: size.sample(rng),
        dh: size.sample(rng),
    }
}

fn noisy_detection(
    frame: u32,
    b: &BBox,
    j: &Jitter,
    nm: &NoiseModel,
    bounds: &BBox,
) -> Option<Detection> {
    let raw = if j.dx == 0.0 && j.dy == 0.0 && j.dw == 0.0 && j.dh == 0.0 {
        *b
    } else {
        let w = (b.w + j.dw).max(1.0);
        let h = (b.h + j.dh).max(1.0);
        BBox {
            x: b.x + j.dx - (w - b.w) / 2.0,
            y: b.y + j.dy - (h - b.h) / 2.0,
            w,
            h,
        }
    };
    let clipped = clip(&raw, bounds)?;
    let conf = nm.conf_base - nm.conf_penalty * j.dx.hypot(j.dy) / (b.w * b.h).sqrt();
    Some(Detection::new(frame, clipped, conf.clamp(0.05, 1.0)))
}

fn clip(b: &BBox, bounds: &BBox) -> Option<BBox> {
    if b.x >= bounds.x
        && b.y >= bounds.y
        && b.right() <= bounds.right()
        && b.bottom() <= bounds.bottom()
    {
        return Some(*b);
    }
    let x0 = b.x.max(bounds.x);
    let y0 = b.y.max(bounds.y);
    let x1 = b.right().min(bounds.right());
    let y1 = b.bottom().min(bounds.bottom());
    (x1 - x0 >= 1.0 && y1 - y0 >= 1.0).then_some(BBox {
        x: x0,
        y: y0,
        w: x1 - x0,
        h: y1 - y0,
    })
}

fn clutter(
    frame: u32,
    rate: f64,
    area: &BBox,
    size: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Vec<Detection> {
    if rate <= 0.0 {
        return Vec::new();
    }
    let n = Poisson::new(rate).expect("positive rate").sample(rng) as usize;
    (0..n)
        .filter_map(|_| {
            let s = rng.random_range(size.0..=size.1).min(area.w).min(area.h);
            let x = area.x + rng.random_range(0.0..=(area.w - s));
            let y = area.y + rng.random_range(0.0..=(area.h - s));
            let conf = rng.random_range(0.05..0.5);
            Some(Detection::new(frame, BBox::new(x, y, s, s).ok()?, conf))
        })
        .collect()
}

fn size_range(gt: &[(u64, BBox)]) -> (f64, f64) {
    let lo = gt
        .iter()
        .map(|(_, b)| b.w.min(b.h))
        .fold(f64::INFINITY, f64::min);
    let hi = gt.iter().map(|(_, b)| b.w.max(b.h)).fold(0.0, f64::max);
    if lo.is_finite() && hi >= lo {
        (lo, hi)
    } else {
        (8.0, 40.0)
    }
}

/// Full-frame detector output for every frame of `gt`.
pub fn render_detections(
    gt: &TrajectorySet,
    nm: &NoiseModel,
    frame_dims: (f64, f64),
    seed: u64,
) -> Result<BTreeMap<u32, Vec<Detection>>> {
    nm.validate()?;
    let bounds = BBox {
        x: 0.0,
        y: 0.0,
        w: frame_dims.0,
        h: frame_dims.1,
    };
    let mut out = BTreeMap::new();
    for (frame, row) in gt.iter() {
        let mut rng = stream_rng(seed, STREAM_GLOBAL, u64::from(frame));
        let mut dets = Vec::new();
        for (id, b) in row {
            let j = draw_jitter(nm, &mut rng);
            if nm.occluded(*id, frame) || j.keep < nm.p_miss {
                continue;
            }
            dets.extend(noisy_detection(frame, b, &j, nm, &bounds));
        }
        dets.extend(clutter(
            frame,
            nm.fp_rate,
            &bounds,
            size_range(row),
            &mut rng,
        ));
        out.insert(frame, dets);
    }
    Ok(out)
}

/// Local detector output for the windows of one frame, in window coordinates.
///
/// Each target is reported by at most one window: the first that contains
/// its center.
pub fn roi_detector_oracle(
    rois: &[Roi],
    frame: u32,
    gt: &TrajectorySet,
    nm: &NoiseModel,
    frame_dims: (f64, f64),
    seed: u64,
) -> Result<Vec<Detection>> {
    nm.validate()?;
    let mut rng = stream_rng(seed, STREAM_LOCAL, u64::from(frame));
    let row = gt.frame(frame);
    let frame_area = frame_dims.0 * frame_dims.1;
    let mut out = Vec::new();
    for (id, b) in row {
        let j = draw_jitter(nm, &mut rng);
        let (cx, cy) = b.center();
        let Some(roi) = rois.iter().find(|r| r.rect.contains_point(cx, cy)) else {
            continue;
        };
        if nm.occluded(*id, frame) || j.keep < nm.p_miss_local {
            continue;
        }
        if let Some(d) = noisy_detection(frame, b, &j, nm, &roi.rect) {
            out.push(local(d, roi));
        }
    }
    for roi in rois {
        let rate = nm.fp_rate * roi.rect.area() / frame_area;
        for d in clutter(frame, rate, &roi.rect, size_range(row), &mut rng) {
            out.push(local(d, roi));
        }
    }
    Ok(out)
}

fn local(d: Detection, roi: &Roi) -> Detection {
    Detection {
        bbox: d.bbox.translate(-roi.rect.x, -roi.rect.y),
        ..d
    }
    .with_source(DetectionSource::Local(roi.id))
}
