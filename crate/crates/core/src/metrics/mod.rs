//! MOT evaluation: CLEAR (MOTA, MOTP, IDSW), identity (IDF1) and HOTA.
//!
//! Per-frame matching for CLEAR and identity co-location uses IoU >= 0.5.
//! HOTA is averaged over the 19 thresholds 0.05, 0.10, ..., 0.95.

use std::collections::HashMap;

use crate::assoc::lap::lsap;
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::trajectory::TrajectorySet;

pub const MATCH_IOU: f64 = 0.5;

/// Localization thresholds HOTA is averaged over.
pub fn hota_alphas() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatch {
    pub frame: u32,
    /// (gt id, pred id, IoU)
    pub pairs: Vec<(u64, u64, f64)>,
    pub gt_count: usize,
    pub pred_count: usize,
}

/// Matching that first maximizes the number of pairs with IoU >= `threshold`
/// and then their total IoU. Returns (gt index, pred index, IoU).
pub fn max_iou_matching(gt: &[BBox], pred: &[BBox], threshold: f64) -> Vec<(usize, usize, f64)> {
    if gt.is_empty() || pred.is_empty() {
        return Vec::new();
    }
    let n = gt.len();
    let m = pred.len();
    let ious: Vec<f64> = gt
        .iter()
        .flat_map(|g| pred.iter().map(move |p| iou(g, p)))
        .collect();
    // any allowed pair is worth more than every IoU difference combined
    let forbidden = (n.min(m) + 1) as f64;
    let cost: Vec<f64> = ious
        .iter()
        .map(|&v| if v >= threshold { 1.0 - v } else { forbidden })
        .collect();
    lsap(&cost, n, m)
        .into_iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|j| (i, j)))
        .filter(|&(i, j)| ious[i * m + j] >= threshold)
        .map(|(i, j)| (i, j, ious[i * m + j]))
        .collect()
}

fn all_frames(gt: &TrajectorySet, pred: &TrajectorySet) -> Vec<u32> {
    let mut f: Vec<u32> = gt.frame_indices().chain(pred.frame_indices()).collect();
    f.sort_unstable();
    f.dedup();
    f
}

/// CLEAR correspondences: a ground-truth object keeps its most recent
/// partner while their IoU stays at or above `threshold`; the rest are
/// matched optimally.
pub fn match_frames(gt: &TrajectorySet, pred: &TrajectorySet, threshold: f64) -> Vec<FrameMatch> {
    let mut last: HashMap<u64, u64> = HashMap::new();
    let mut out = Vec::new();
    for frame in all_frames(gt, pred) {
        let g = gt.frame(frame);
        let p = pred.frame(frame);
        let mut g_used = vec![false; g.len()];
        let mut p_used = vec![false; p.len()];
        let mut pairs = Vec::new();
        for (gi, (gid, gb)) in g.iter().enumerate() {
            let Some(&pid) = last.get(gid) else { continue };
            if let Some(pj) = p.iter().position(|(id, _)| *id == pid) {
                let v = iou(gb, &p[pj].1);
                if !p_used[pj] && v >= threshold {
                    g_used[gi] = true;
                    p_used[pj] = true;
                    pairs.push((*gid, pid, v));
                }
            }
        }
        let gi_left: Vec<usize> = (0..g.len()).filter(|&i| !g_used[i]).collect();
        let pj_left: Vec<usize> = (0..p.len()).filter(|&j| !p_used[j]).collect();
        let gb: Vec<BBox> = gi_left.iter().map(|&i| g[i].1).collect();
        let pb: Vec<BBox> = pj_left.iter().map(|&j| p[j].1).collect();
        for (a, b, v) in max_iou_matching(&gb, &pb, threshold) {
            pairs.push((g[gi_left[a]].0, p[pj_left[b]].0, v));
        }
        pairs.sort_by_key(|&(gid, _, _)| gid);
        for &(gid, pid, _) in &pairs {
            last.insert(gid, pid);
        }
        out.push(FrameMatch {
            frame,
            pairs,
            gt_count: g.len(),
            pred_count: p.len(),
        });
    }
    out
}

/// Times a ground-truth id's partner differs from its previous partner.
/// Unmatched frames do not reset the previous partner.
pub fn idsw_count(matches: &[FrameMatch]) -> usize {
    let mut last: HashMap<u64, u64> = HashMap::new();
    let mut n = 0;
    for fm in matches {
        for &(gid, pid, _) in &fm.pairs {
            if let Some(prev) = last.insert(gid, pid) {
                if prev != pid {
                    n += 1;
                }
            }
        }
    }
    n
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClearCounts {
    pub gt: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
}

pub fn clear_counts(matches: &[FrameMatch]) -> ClearCounts {
    let mut c = ClearCounts::default();
    for fm in matches {
        c.gt += fm.gt_count;
        c.tp += fm.pairs.len();
        c.fp += fm.pred_count - fm.pairs.len();
        c.fn_ += fm.gt_count - fm.pairs.len();
    }
    c.idsw = idsw_count(matches);
    c
}

pub fn mota(c: &ClearCounts) -> Result<f64> {
    if c.gt == 0 {
        return Err(Error::Undefined("MOTA without ground truth"));
    }
    Ok(1.0 - (c.fp + c.fn_ + c.idsw) as f64 / c.gt as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotpConvention {
    /// Mean IoU of matched pairs (higher is better).
    Overlap,
    /// One minus the mean IoU (lower is better).
    Distance,
}

pub fn motp(matches: &[FrameMatch], convention: MotpConvention) -> Result<f64> {
    let (sum, n) = matches
        .iter()
        .flat_map(|fm| fm.pairs.iter())
        .fold((0.0, 0usize), |(s, n), p| (s + p.2, n + 1));
    if n == 0 {
        return Err(Error::Undefined("MOTP without matches"));
    }
    let mean = sum / n as f64;
    Ok(match convention {
        MotpConvention::Overlap => mean,
        MotpConvention::Distance => 1.0 - mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdScores {
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub idtp: usize,
}

/// Identity scores under the id correspondence maximizing co-located frames.
pub fn idf1(gt: &TrajectorySet, pred: &TrajectorySet) -> IdScores {
    let gids = gt.ids();
    let pids = pred.ids();
    let total_gt = gt.box_count();
    let total_pred = pred.box_count();
    let mut overlap = vec![0usize; gids.len() * pids.len()];
    if !gids.is_empty() && !pids.is_empty() {
        for frame in all_frames(gt, pred) {
            for (gid, gb) in gt.frame(frame) {
                let gi = gids.binary_search(gid).expect("listed id");
                for (pid, pb) in pred.frame(frame) {
                    if iou(gb, pb) >= MATCH_IOU {
                        let pj = pids.binary_search(pid).expect("listed id");
                        overlap[gi * pids.len() + pj] += 1;
                    }
                }
            }
        }
    }
    let idtp = best_id_overlap(&overlap, gids.len(), pids.len());
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    IdScores {
        idf1: ratio(2 * idtp, total_gt + total_pred),
        idp: ratio(idtp, total_pred),
        idr: ratio(idtp, total_gt),
        idtp,
    }
}

fn best_id_overlap(overlap: &[usize], rows: usize, cols: usize) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    let cost: Vec<f64> = overlap.iter().map(|&v| -(v as f64)).collect();
    lsap(&cost, rows, cols)
        .into_iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|j| overlap[i * cols + j]))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HotaLevel {
    pub alpha: f64,
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
}

/// HOTA terms at one localization threshold.
pub fn hota_at(gt: &TrajectorySet, pred: &TrajectorySet, alpha: f64) -> HotaLevel {
    let mut gt_len: HashMap<u64, usize> = HashMap::new();
    let mut pred_len: HashMap<u64, usize> = HashMap::new();
    let mut tps: Vec<(u64, u64)> = Vec::new();
    let mut n_gt = 0;
    let mut n_pred = 0;
    for frame in all_frames(gt, pred) {
        let g = gt.frame(frame);
        let p = pred.frame(frame);
        n_gt += g.len();
        n_pred += p.len();
        g.iter()
            .for_each(|(id, _)| *gt_len.entry(*id).or_default() += 1);
        p.iter()
            .for_each(|(id, _)| *pred_len.entry(*id).or_default() += 1);
        let gb: Vec<BBox> = g.iter().map(|e| e.1).collect();
        let pb: Vec<BBox> = p.iter().map(|e| e.1).collect();
        for (i, j, _) in max_iou_matching(&gb, &pb, alpha) {
            tps.push((g[i].0, p[j].0));
        }
    }
    let tp = tps.len();
    let fn_ = n_gt - tp;
    let fp = n_pred - tp;
    let mut tpa: HashMap<(u64, u64), usize> = HashMap::new();
    for &c in &tps {
        *tpa.entry(c).or_default() += 1;
    }
    let assa = if tp == 0 {
        0.0
    } else {
        tps.iter()
            .map(|c| {
                let a = tpa[c];
                let fna = gt_len[&c.0] - a;
                let fpa = pred_len[&c.1] - a;
                a as f64 / (a + fna + fpa) as f64
            })
            .sum::<f64>()
            / tp as f64
    };
    let denom = tp + fn_ + fp;
    let deta = if denom == 0 {
        0.0
    } else {
        tp as f64 / denom as f64
    };
    HotaLevel {
        alpha,
        hota: (deta * assa).sqrt(),
        deta,
        assa,
        tp,
        fn_,
        fp,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HotaScores {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
}

pub fn hota(gt: &TrajectorySet, pred: &TrajectorySet) -> HotaScores {
    let levels: Vec<HotaLevel> = hota_alphas()
        .into_iter()
        .map(|a| hota_at(gt, pred, a))
        .collect();
    let n = levels.len() as f64;
    HotaScores {
        hota: levels.iter().map(|l| l.hota).sum::<f64>() / n,
        deta: levels.iter().map(|l| l.deta).sum::<f64>() / n,
        assa: levels.iter().map(|l| l.assa).sum::<f64>() / n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub idsw: usize,
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub mota: f64,
    /// Zero when nothing was matched.
    pub motp: f64,
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub gt: usize,
}

pub fn evaluate(gt: &TrajectorySet, pred: &TrajectorySet) -> Result<MetricsReport> {
    evaluate_with(gt, pred, MotpConvention::Overlap)
}

pub fn evaluate_with(
    gt: &TrajectorySet,
    pred: &TrajectorySet,
    convention: MotpConvention,
) -> Result<MetricsReport> {
    if gt.is_empty() {
        return Err(Error::Undefined("evaluation without ground truth"));
    }
    let matches = match_frames(gt, pred, MATCH_IOU);
    let c = clear_counts(&matches);
    let ids = idf1(gt, pred);
    let h = hota(gt, pred);
    Ok(MetricsReport {
        idsw: c.idsw,
        idf1: ids.idf1,
        idp: ids.idp,
        idr: ids.idr,
        mota: mota(&c)?,
        motp: motp(&matches, convention).unwrap_or(0.0),
        hota: h.hota,
        deta: h.deta,
        assa: h.assa,
        tp: c.tp,
        fp: c.fp,
        fn_: c.fn_,
        gt: c.gt,
    })
}
