//! Acceptance criteria 2-11. Each test prints one `criterion N: PASS|FAIL` line.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gldt::assoc::{jcma_cost, solve_assignment, CostMatrix, CostTerms};
use gldt::glsched::Mode;
use gldt::io::{format_mot, parse_mot, trajectories_to_records, MotRecord, RunConfig};
use gldt::metrics::{evaluate, hota_alphas, MetricsReport};
use gldt::pipeline::Tracker;
use gldt::pmr::{
    adaptive_k, decay_weight, fit_gmm, recovery_score, time_constraint, GaussianMixture,
    TrackFeature,
};
use gldt::runner::{
    ablation_variants, run_suite, run_system, simulate_and_run, suite_configs, Suite, SystemOptions,
};
use gldt::sim::{NoiseModel, Occlusion, ScenarioConfig};
use gldt::stff::run_checks;
use gldt::track::{Track, TrackState};
use gldt::{iou, BBox, Detection, TrackerConfig, TrajectorySet};

// Written to the stderr handle directly so the line survives test output capture.
fn report(n: u32, pass: bool, detail: &str) {
    let line = format!(
        "criterion {n}: {} {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn bx(x: f64, y: f64, w: f64, h: f64) -> BBox {
    BBox::new(x, y, w, h).unwrap()
}

// ---------------------------------------------------------------- 2

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Minimum over every injective row -> column map (rows <= cols), summed in row order.
fn brute_force_min(m: &CostMatrix) -> f64 {
    let (rows, cols) = (m.rows, m.cols);
    let mut perms = Vec::new();
    permutations(&mut (0..cols).collect(), 0, &mut perms);
    perms
        .iter()
        .map(|p| (0..rows).map(|i| m.get(i, p[i])).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn criterion_02_assignment_optimality() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let a = rng.random_range(1..=7);
        let b = rng.random_range(1..=7);
        let values: Vec<f64> = (0..a * b).map(|_| rng.random::<f64>()).collect();
        let m = CostMatrix::new(a, b, values.clone());
        let sol = solve_assignment(&m, f64::INFINITY);
        let mut pairs = sol.pairs.clone();
        pairs.sort();
        let got: f64 = pairs.iter().map(|&(i, j)| m.get(i, j)).sum();
        // brute force enumerates along the shorter side
        let oracle = if a <= b {
            brute_force_min(&m)
        } else {
            let t = CostMatrix::from_fn(b, a, |i, j| values[j * b + i]);
            let mut perms = Vec::new();
            permutations(&mut (0..a).collect(), 0, &mut perms);
            // sum in original row order so float rounding matches
            perms
                .iter()
                .map(|p| {
                    let mut chosen: Vec<(usize, usize)> = (0..b).map(|c| (p[c], c)).collect();
                    chosen.sort();
                    chosen.iter().map(|&(r, c)| t.get(c, r)).sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
        };
        if pairs.len() != a.min(b) || got != oracle {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = mismatches == 0 && secs < 5.0;
    report(
        2,
        pass,
        &format!("{mismatches} mismatches over 1000 matrices in {secs:.2}s"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 3

struct Scene {
    tracks: Vec<Track>,
    dets: Vec<Detection>,
    /// Raw observed centers of every track, in frame order.
    centers: Vec<Vec<(u32, f64, f64)>>,
}

fn random_scene(rng: &mut ChaCha8Rng) -> Scene {
    let frame_rect = bx(0.0, 0.0, 1920.0, 1080.0);
    let n_tracks = rng.random_range(1..=3);
    let n_dets = rng.random_range(1..=3);
    let now = 20;
    let mut tracks = Vec::new();
    let mut centers = Vec::new();
    for id in 0..n_tracks {
        let len = rng.random_range(1..=6);
        let (mut cx, mut cy) = (
            rng.random_range(200.0..1700.0),
            rng.random_range(200.0..900.0),
        );
        let (vx, vy) = (rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
        let size = rng.random_range(10.0..40.0);
        let mut frame = now - 1 - len as u32 * 2;
        let mut obs = Vec::new();
        let mut t: Option<Track> = None;
        for _ in 0..len {
            let gap = rng.random_range(1..=2);
            frame += gap;
            cx += vx * f64::from(gap) + rng.random_range(-2.0..2.0);
            cy += vy * f64::from(gap) + rng.random_range(-2.0..2.0);
            let d = Detection::new(frame, BBox::from_center(cx, cy, size, size).unwrap(), 0.9);
            obs.push((frame, cx, cy));
            match t.as_mut() {
                None => t = Some(Track::new(id, &d, frame_rect, 30, TrackState::Active)),
                Some(t) => {
                    t.motion =
                        gldt::motion::kf_update(&gldt::motion::kf_predict(&t.motion), &d.bbox)
                            .unwrap();
                    t.push_history(&d, frame_rect);
                }
            }
        }
        let mut t = t.unwrap();
        t.motion = gldt::motion::kf_predict(&t.motion);
        tracks.push(t);
        centers.push(obs);
    }
    let dets = (0..n_dets)
        .map(|k| {
            // half the detections sit near a track, the rest anywhere
            let (cx, cy) = if k < tracks.len() && rng.random_bool(0.7) {
                let c = tracks[k].predicted_center();
                (
                    c.0 + rng.random_range(-15.0..15.0),
                    c.1 + rng.random_range(-15.0..15.0),
                )
            } else {
                (
                    rng.random_range(100.0..1800.0),
                    rng.random_range(100.0..1000.0),
                )
            };
            let s = rng.random_range(10.0..40.0);
            Detection::new(now, BBox::from_center(cx, cy, s, s).unwrap(), 0.8)
        })
        .collect();
    Scene {
        tracks,
        dets,
        centers,
    }
}

fn straight_iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    let inter = if ix > 0.0 && iy > 0.0 { ix * iy } else { 0.0 };
    inter / (a.w * a.h + b.w * b.h - inter)
}

fn straight_dist(a: &BBox, b: &BBox) -> f64 {
    let (ax, ay) = (a.x + a.w / 2.0, a.y + a.h / 2.0);
    let (bx_, by) = (b.x + b.w / 2.0, b.y + b.h / 2.0);
    let d = ((ax - bx_).powi(2) + (ay - by).powi(2)).sqrt();
    let scale = (a.w + a.h + b.w + b.h) / 2.0;
    (d / scale).min(1.0)
}

fn straight_motion(obs: &[(u32, f64, f64)], d: &Detection, beta: &[f64; 3]) -> Option<f64> {
    if obs.len() < 2 {
        return None;
    }
    let vel: Vec<(f64, f64)> = obs
        .windows(2)
        .map(|w| {
            let dt = f64::from(w[1].0 - w[0].0);
            ((w[1].1 - w[0].1) / dt, (w[1].2 - w[0].2) / dt)
        })
        .collect();
    let take = vel.len().min(10);
    let v_avg = vel[vel.len() - take..]
        .iter()
        .map(|v| (v.0 * v.0 + v.1 * v.1).sqrt())
        .sum::<f64>()
        / take as f64;
    let last = obs[obs.len() - 1];
    let dt = f64::from(d.frame - last.0);
    let cx = d.bbox.x + d.bbox.w / 2.0;
    let cy = d.bbox.y + d.bbox.h / 2.0;
    let (ex, ey) = ((cx - last.1) / dt, (cy - last.2) / dt);
    let v_exp = (ex * ex + ey * ey).sqrt();
    let heading = vel
        .iter()
        .rev()
        .find(|v| v.0 != 0.0 || v.1 != 0.0)
        .map(|v| v.1.atan2(v.0));
    let dtheta = match heading {
        Some(h) if v_exp > 1e-9 => {
            let mut a = (ey.atan2(ex) - h).abs() % (2.0 * PI);
            if a > PI {
                a = 2.0 * PI - a;
            }
            a
        }
        _ => 0.0,
    };
    let lv = vel[vel.len() - 1];
    let accel = ((ex - lv.0).powi(2) + (ey - lv.1).powi(2)).sqrt();
    let speed = ((v_exp - v_avg).abs() / (2.0 + v_avg).max(50.0)).min(1.0);
    Some(
        beta[0] * speed
            + beta[1] * (dtheta / FRAC_PI_2).min(1.0)
            + beta[2] * (accel / 30.0).min(1.0),
    )
}

fn straight_rel(ci: (f64, f64), cj: (f64, f64), refs: &[(f64, f64)]) -> Option<f64> {
    let mut cos = Vec::new();
    for k in refs {
        let a = (k.0 - ci.0, k.1 - ci.1);
        let b = (k.0 - cj.0, k.1 - cj.1);
        let (na, nb) = (
            (a.0 * a.0 + a.1 * a.1).sqrt(),
            (b.0 * b.0 + b.1 * b.1).sqrt(),
        );
        if na >= 1e-12 && nb >= 1e-12 {
            cos.push((a.0 * b.0 + a.1 * b.1) / (na * nb));
        }
    }
    if cos.is_empty() {
        None
    } else {
        Some((1.0 - cos.iter().sum::<f64>() / cos.len() as f64).clamp(0.0, 1.0))
    }
}

fn straight_combine(
    iou_c: f64,
    dist: f64,
    motion: Option<f64>,
    rel: Option<f64>,
    w: &[f64; 4],
) -> f64 {
    let mut terms = vec![(w[0], iou_c), (w[1], dist)];
    if let Some(m) = motion {
        terms.push((w[2], m));
    }
    if let Some(r) = rel {
        terms.push((w[3], r));
    }
    let wsum: f64 = terms.iter().map(|t| t.0).sum();
    (terms.iter().map(|t| t.0 * t.1).sum::<f64>() / wsum).clamp(0.0, 1.0)
}

#[test]
fn criterion_03_jcma_oracle() {
    let cfg = TrackerConfig::default();
    let worked = CostTerms {
        iou: 0.5,
        dist: 0.25,
        motion: Some(0.5),
        rel: Some(0.0),
    }
    .combine(&cfg.omega);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut pairs, mut worst) = (0usize, 0.0f64);
    while pairs < 50 {
        let s = random_scene(&mut rng);
        let refs: Vec<&Track> = s.tracks.iter().collect();
        let m = jcma_cost(&refs, &s.dets, &cfg);
        let tb: Vec<BBox> = s.tracks.iter().map(|t| t.predicted_box()).collect();
        let center = |b: &BBox| (b.x + b.w / 2.0, b.y + b.h / 2.0);
        for (i, t) in s.tracks.iter().enumerate() {
            for (j, d) in s.dets.iter().enumerate() {
                let mut others: Vec<(f64, f64)> = s
                    .dets
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .map(|(_, o)| center(&o.bbox))
                    .collect();
                for (k, b) in tb.iter().enumerate() {
                    let explained = s.dets.iter().any(|o| straight_dist(b, &o.bbox) < 1.0);
                    if k != i && !explained {
                        others.push(center(b));
                    }
                }
                let expect = straight_combine(
                    1.0 - straight_iou(&tb[i], &d.bbox),
                    straight_dist(&tb[i], &d.bbox),
                    straight_motion(&s.centers[i], d, &cfg.beta),
                    straight_rel(center(&tb[i]), center(&d.bbox), &others),
                    &cfg.omega,
                );
                assert_eq!(t.history.len(), s.centers[i].len());
                worst = worst.max((m.get(i, j) - expect).abs());
                pairs += 1;
            }
        }
    }
    let pass = worst <= 1e-9 && (worked - 0.325).abs() <= 1e-12;
    report(
        3,
        pass,
        &format!("{pairs} pairs, max deviation {worst:.2e}, worked example {worked:.6}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 4

#[test]
fn criterion_04_em() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut drops, mut long_runs) = (0, 0);
    for set in 0..100u64 {
        let n = rng.random_range(3..=10);
        let samples: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..8).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let g = fit_gmm(&samples, adaptive_k(n).unwrap(), set).unwrap();
        if g.log_likelihood_trace
            .windows(2)
            .any(|w| w[1] < w[0] - 1e-9)
        {
            drops += 1;
        }
        if g.iterations() > 50 {
            long_runs += 1;
        }
    }
    // 3 samples near the origin, 7 near (20, ..., 20)
    let mut two: Vec<Vec<f64>> = Vec::new();
    for i in 0..10 {
        let base = if i < 3 { 0.0 } else { 20.0 };
        two.push((0..8).map(|_| base + rng.random_range(-1.0..1.0)).collect());
    }
    let g = fit_gmm(&two, 2, 0).unwrap();
    let mut w = g.weights.clone();
    w.sort_by(f64::total_cmp);
    let recovered = (w[0] - 0.3).abs() <= 0.05 && (w[1] - 0.7).abs() <= 0.05;
    let pass = drops == 0 && long_runs == 0 && recovered;
    report(
        4,
        pass,
        &format!("{drops} decreasing traces, {long_runs} runs over 50 iterations, weights {w:.3?}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 5

fn feature(w: f64) -> TrackFeature {
    TrackFeature {
        frame: 1,
        x_abs: 0.0,
        y_abs: 0.0,
        x_rel: 0.0,
        y_rel: 0.0,
        vx: 0.0,
        vy: 0.0,
        theta: 0.0,
        w,
    }
}

#[test]
fn criterion_05_point_checks() {
    let dw = decay_weight(10, 0, 0.1).unwrap();
    let ks = (
        adaptive_k(3).unwrap(),
        adaptive_k(9).unwrap(),
        adaptive_k(1).unwrap(),
    );
    let tc = time_constraint(&[feature(1.0), feature((-1.0f64).exp())]).unwrap();
    // one unit-variance component; offset chosen so the match probability is 0.8
    let g = GaussianMixture {
        weights: vec![1.0],
        means: vec![vec![0.0; 7]],
        variances: vec![vec![1.0; 7]],
        log_likelihood_trace: vec![],
    };
    let z = TrackFeature {
        x_abs: (-14.0 * 0.8f64.ln()).sqrt(),
        ..feature(1.0)
    };
    let p = g.match_probability(&z.kinematic());
    let rs = recovery_score(&g, &[feature(0.75)], &z);
    let pass = (dw - 0.367_879_4).abs() <= 1e-7
        && ks == (1, 2, 1)
        && (tc - 0.683_939_7).abs() <= 1e-7
        && (p - 0.8).abs() <= 1e-12
        && (rs - 0.6).abs() <= 1e-12;
    report(
        5,
        pass,
        &format!("decay {dw:.7}, k {ks:?}, time {tc:.7}, score {rs:.12}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 6

type Rows = Vec<(u32, u64, BBox)>;

fn set_of(rows: &Rows) -> TrajectorySet {
    let mut s = TrajectorySet::new();
    for &(f, id, b) in rows {
        s.insert(f, id, b);
    }
    s
}

fn frames_of(gt: &Rows, pr: &Rows) -> Vec<u32> {
    let mut f: Vec<u32> = gt.iter().chain(pr).map(|r| r.0).collect();
    f.sort_unstable();
    f.dedup();
    f
}

/// Every partial matching of `g` to `p` restricted to pairs with IoU >= thr;
/// best is most pairs, then largest IoU sum.
fn best_matching(g: &[(u64, BBox)], p: &[(u64, BBox)], thr: f64) -> Vec<(usize, usize, f64)> {
    fn go(
        i: usize,
        g: &[(u64, BBox)],
        p: &[(u64, BBox)],
        thr: f64,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize, f64)>,
        best: &mut (usize, f64, Vec<(usize, usize, f64)>),
    ) {
        if i == g.len() {
            let sum: f64 = cur.iter().map(|c| c.2).sum();
            if cur.len() > best.0 || (cur.len() == best.0 && sum > best.1 + 1e-12) {
                *best = (cur.len(), sum, cur.clone());
            }
            return;
        }
        go(i + 1, g, p, thr, used, cur, best);
        for j in 0..p.len() {
            let v = straight_iou(&g[i].1, &p[j].1);
            if !used[j] && v >= thr {
                used[j] = true;
                cur.push((i, j, v));
                go(i + 1, g, p, thr, used, cur, best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (0, 0.0, Vec::new());
    go(
        0,
        g,
        p,
        thr,
        &mut vec![false; p.len()],
        &mut Vec::new(),
        &mut best,
    );
    best.2
}

fn at(rows: &Rows, f: u32) -> Vec<(u64, BBox)> {
    rows.iter()
        .filter(|r| r.0 == f)
        .map(|r| (r.1, r.2))
        .collect()
}

fn brute_clear(gt: &Rows, pr: &Rows) -> (usize, usize, usize, usize, usize, f64) {
    let (mut n_gt, mut tp, mut fp, mut fn_, mut idsw, mut iou_sum) = (0, 0, 0, 0, 0, 0.0);
    let mut prev: HashMap<u64, u64> = HashMap::new();
    for f in frames_of(gt, pr) {
        let g = at(gt, f);
        let p = at(pr, f);
        let mut pairs: Vec<(u64, u64, f64)> = Vec::new();
        let mut gu = vec![false; g.len()];
        let mut pu = vec![false; p.len()];
        for (i, (gid, gb)) in g.iter().enumerate() {
            if let Some(pid) = prev.get(gid) {
                if let Some(j) = p.iter().position(|x| x.0 == *pid) {
                    let v = straight_iou(gb, &p[j].1);
                    if v >= 0.5 && !pu[j] {
                        gu[i] = true;
                        pu[j] = true;
                        pairs.push((*gid, *pid, v));
                    }
                }
            }
        }
        let gl: Vec<(u64, BBox)> = g.iter().zip(&gu).filter(|x| !x.1).map(|x| *x.0).collect();
        let pl: Vec<(u64, BBox)> = p.iter().zip(&pu).filter(|x| !x.1).map(|x| *x.0).collect();
        for (i, j, v) in best_matching(&gl, &pl, 0.5) {
            pairs.push((gl[i].0, pl[j].0, v));
        }
        for &(gid, pid, v) in &pairs {
            if prev.insert(gid, pid).is_some_and(|old| old != pid) {
                idsw += 1;
            }
            iou_sum += v;
        }
        n_gt += g.len();
        tp += pairs.len();
        fp += p.len() - pairs.len();
        fn_ += g.len() - pairs.len();
    }
    (n_gt, tp, fp, fn_, idsw, iou_sum / tp.max(1) as f64)
}

fn brute_idf1(gt: &Rows, pr: &Rows) -> f64 {
    let mut gids: Vec<u64> = gt.iter().map(|r| r.1).collect();
    gids.sort_unstable();
    gids.dedup();
    let mut pids: Vec<u64> = pr.iter().map(|r| r.1).collect();
    pids.sort_unstable();
    pids.dedup();
    let co = |g: u64, p: u64| {
        gt.iter()
            .filter(|r| r.1 == g)
            .filter(|r| {
                pr.iter()
                    .any(|q| q.0 == r.0 && q.1 == p && straight_iou(&r.2, &q.2) >= 0.5)
            })
            .count()
    };
    // every injective gt -> (pred or none) map
    fn go(
        i: usize,
        gids: &[u64],
        pids: &[u64],
        used: &mut Vec<bool>,
        co: &dyn Fn(u64, u64) -> usize,
    ) -> usize {
        if i == gids.len() {
            return 0;
        }
        let mut best = go(i + 1, gids, pids, used, co);
        for j in 0..pids.len() {
            if !used[j] {
                used[j] = true;
                best = best.max(co(gids[i], pids[j]) + go(i + 1, gids, pids, used, co));
                used[j] = false;
            }
        }
        best
    }
    let idtp = go(0, &gids, &pids, &mut vec![false; pids.len()], &co);
    2.0 * idtp as f64 / (gt.len() + pr.len()) as f64
}

fn brute_hota(gt: &Rows, pr: &Rows) -> (f64, f64, f64) {
    let (mut h, mut d, mut a) = (0.0, 0.0, 0.0);
    let alphas = hota_alphas();
    for &alpha in &alphas {
        let mut tps: Vec<(u64, u64)> = Vec::new();
        for f in frames_of(gt, pr) {
            let g = at(gt, f);
            let p = at(pr, f);
            for (i, j, _) in best_matching(&g, &p, alpha) {
                tps.push((g[i].0, p[j].0));
            }
        }
        let tp = tps.len();
        let det = tp as f64 / (gt.len() + pr.len() - tp) as f64;
        let ass = if tp == 0 {
            0.0
        } else {
            tps.iter()
                .map(|&(g, p)| {
                    let tpa = tps.iter().filter(|&&c| c == (g, p)).count();
                    let fna = gt.iter().filter(|r| r.1 == g).count() - tpa;
                    let fpa = pr.iter().filter(|r| r.1 == p).count() - tpa;
                    tpa as f64 / (tpa + fna + fpa) as f64
                })
                .sum::<f64>()
                / tp as f64
        };
        h += (det * ass).sqrt();
        d += det;
        a += ass;
    }
    let n = alphas.len() as f64;
    (h / n, d / n, a / n)
}

fn scripted_scenarios() -> Vec<(&'static str, Rows, Rows)> {
    let b = |x: f64| bx(x, 100.0, 20.0, 20.0);
    let mut out = Vec::new();

    // one target, prediction id changes halfway
    let gt: Rows = (1..=4).map(|f| (f, 1, b(10.0 * f as f64))).collect();
    let pr: Rows = (1..=4)
        .map(|f| (f, if f <= 2 { 1 } else { 2 }, b(10.0 * f as f64)))
        .collect();
    out.push(("identity switch", gt, pr));

    // two targets whose predicted ids swap at frame 4
    let mut gt = Rows::new();
    let mut pr = Rows::new();
    for f in 1..=6u32 {
        gt.push((f, 1, b(0.0 + 5.0 * f as f64)));
        gt.push((f, 2, b(200.0 - 5.0 * f as f64)));
        let (a, c) = if f < 4 { (10, 20) } else { (20, 10) };
        pr.push((f, a, b(0.0 + 5.0 * f as f64)));
        pr.push((f, c, b(200.0 - 5.0 * f as f64)));
    }
    out.push(("swap", gt, pr));

    // misses and a false positive
    let mut gt = Rows::new();
    let mut pr = Rows::new();
    for f in 1..=8u32 {
        gt.push((f, 1, b(50.0)));
        if f % 3 != 0 {
            pr.push((f, 5, b(50.0)));
        }
        if f == 4 || f == 5 {
            pr.push((f, 9, b(500.0)));
        }
    }
    out.push(("misses and clutter", gt, pr));

    // localization error growing over time, so the HOTA thresholds disagree
    let mut gt = Rows::new();
    let mut pr = Rows::new();
    for f in 1..=10u32 {
        gt.push((f, 3, b(100.0)));
        pr.push((f, 7, b(100.0 + f as f64 * 0.9)));
    }
    out.push(("drifting box", gt, pr));

    // swap and back, plus a fragment at the end
    let mut gt = Rows::new();
    let mut pr = Rows::new();
    for f in 1..=9u32 {
        gt.push((f, 1, b(0.0)));
        gt.push((f, 2, b(300.0)));
        let (a, c) = if (4..=5).contains(&f) { (2, 1) } else { (1, 2) };
        pr.push((f, a, b(1.0)));
        pr.push((f, if f >= 8 { 3 } else { c }, b(302.0)));
    }
    out.push(("swap and back", gt, pr));
    out
}

#[test]
fn criterion_06_metrics_oracle() {
    let mut bad = Vec::new();
    let mut special = false;
    for (name, gt, pr) in scripted_scenarios() {
        let r: MetricsReport = evaluate(&set_of(&gt), &set_of(&pr)).unwrap();
        let (n_gt, tp, fp, fn_, idsw, motp) = brute_clear(&gt, &pr);
        let mota = 1.0 - (fp + fn_ + idsw) as f64 / n_gt as f64;
        let idf1 = brute_idf1(&gt, &pr);
        let (hota, deta, assa) = brute_hota(&gt, &pr);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        let ok = r.idsw == idsw
            && (r.tp, r.fp, r.fn_, r.gt) == (tp, fp, fn_, n_gt)
            && close(r.mota, mota)
            && close(r.motp, motp)
            && close(r.idf1, idf1)
            && close(r.hota, hota)
            && close(r.deta, deta)
            && close(r.assa, assa);
        if !ok {
            bad.push(format!(
                "{name}: {r:?} vs idsw {idsw} idf1 {idf1} hota {hota} deta {deta} assa {assa}"
            ));
        }
        if name == "identity switch" {
            special = close(r.idf1, 0.5)
                && close(r.assa, 0.5)
                && close(r.hota, 0.5f64.sqrt())
                && r.idsw == 1;
        }
    }
    let pass = bad.is_empty() && special;
    report(
        6,
        pass,
        &format!(
            "5 scenarios, {} mismatches, switch case {special}",
            bad.len()
        ),
    );
    assert!(pass, "{bad:#?}");
}

// ---------------------------------------------------------------- 7

fn run_modes(occlusions: Vec<Occlusion>) -> Vec<(u32, Mode)> {
    let cfg = RunConfig {
        tracker: TrackerConfig {
            n_g: 30,
            n_l: 120,
            n_m: 5,
            ..TrackerConfig::default()
        },
        scenario: ScenarioConfig {
            n_targets: 3,
            frames: 400,
            seed: 7,
            ..ScenarioConfig::default()
        },
        noise: NoiseModel {
            occlusions,
            ..NoiseModel::clean()
        },
    };
    simulate_and_run(&cfg, SystemOptions::FULL).unwrap().1.modes
}

fn mode_of(modes: &[(u32, Mode)], f: u32) -> Mode {
    modes.iter().find(|m| m.0 == f).unwrap().1
}

#[test]
fn criterion_07_scheduler_trace() {
    let modes = run_modes(Vec::new());
    let expired = (1..=30).all(|f| mode_of(&modes, f) == Mode::Global)
        && (31..=150).all(|f| mode_of(&modes, f) == Mode::Local)
        && (151..=180).all(|f| mode_of(&modes, f) == Mode::Global);

    // every target hidden for frames 61-65: five empty local frames
    let blind = (1..=3)
        .map(|t| Occlusion {
            target: t,
            start: 61,
            duration: 5,
        })
        .collect();
    let modes = run_modes(blind);
    let reset = (31..=65).all(|f| mode_of(&modes, f) == Mode::Local)
        && (66..=95).all(|f| mode_of(&modes, f) == Mode::Global);
    let pass = expired && reset;
    report(
        7,
        pass,
        &format!("GD 1-30 / LD 31-150 / GD 151: {expired}, reset at frame 66: {reset}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_08_ablation_directionality() {
    let start = Instant::now();
    let base = RunConfig::default();
    let mut configs = suite_configs(Suite::Occlusion, 10, &base);
    // crossing scenarios take seeds 10-19 so no layout repeats a seed
    configs.extend(
        suite_configs(Suite::Crossing, 20, &base)
            .into_iter()
            .skip(10),
    );
    let mut rows = BTreeMap::new();
    for (label, opts) in ablation_variants() {
        let s = run_suite(&configs, label, opts).unwrap();
        eprintln!(
            "  {label:<16} idsw {:>5} idf1 {:>6.2} mota {:>6.2}",
            s.idsw,
            s.idf1 * 100.0,
            s.mota * 100.0
        );
        rows.insert(label, s);
    }
    let secs = start.elapsed().as_secs_f64();
    let (b, f) = (&rows["baseline"], &rows["+GD+LD (full)"]);
    let a = f.idsw * 2 <= b.idsw;
    let c = (f.idf1 - b.idf1) * 100.0 >= 5.0;
    let pass = a && c && secs < 120.0;
    report(
        8,
        pass,
        &format!(
            "IDSW {} vs {} ({:.1}%), IDF1 {:.2} vs {:.2}, {secs:.1}s",
            f.idsw,
            b.idsw,
            100.0 * f.idsw as f64 / b.idsw.max(1) as f64,
            f.idf1 * 100.0,
            b.idf1 * 100.0
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 9

#[test]
fn criterion_09_throughput() {
    let dims = (1920.0, 1080.0);
    let mut tracker = Tracker::full(TrackerConfig::default(), dims).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let starts: Vec<(f64, f64, f64, f64)> = (0..10)
        .map(|k| {
            (
                150.0 + 160.0 * k as f64,
                200.0 + 60.0 * k as f64,
                rng.random_range(-3.0..3.0),
                rng.random_range(-2.0..2.0),
            )
        })
        .collect();
    let frames = 2000u32;
    let mut all = Vec::with_capacity(frames as usize);
    for f in 1..=frames {
        let mut dets = Vec::with_capacity(15);
        for (k, s) in starts.iter().enumerate() {
            // each target drops out for one frame now and then, keeping recovery busy
            if f > 5 && (f + k as u32 * 13).is_multiple_of(40) {
                continue;
            }
            let t = f64::from(f % 200);
            let (cx, cy) = (s.0 + s.2 * t, s.1 + s.3 * t);
            dets.push(Detection::new(
                f,
                BBox::from_center(cx, cy, 24.0, 24.0).unwrap(),
                0.9,
            ));
        }
        while dets.len() < 15 {
            let c = (
                rng.random_range(50.0..1850.0),
                rng.random_range(50.0..1030.0),
            );
            dets.push(Detection::new(
                f,
                BBox::from_center(c.0, c.1, 16.0, 16.0).unwrap(),
                rng.random_range(0.2..0.7),
            ));
        }
        all.push(dets);
    }
    let start = Instant::now();
    let mut recovered = 0;
    for (f, dets) in all.iter().enumerate() {
        recovered += tracker.step(f as u32 + 1, dets).unwrap().events.recovered;
    }
    let secs = start.elapsed().as_secs_f64();
    let rate = f64::from(frames) / secs;
    let pass = rate >= 1000.0;
    report(
        9,
        pass,
        &format!("{rate:.0} steps/s over {frames} frames, {recovered} recoveries"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 10

#[test]
fn criterion_10_stff_invariants() {
    let start = Instant::now();
    let checks = run_checks(10).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    let pass = failed.is_empty() && secs < 10.0;
    report(
        10,
        pass,
        &format!("{} checks, failed {failed:?}, {secs:.2}s", checks.len()),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 11

fn pipeline_bytes(seed: u64) -> (String, String, String) {
    let cfg = RunConfig {
        scenario: ScenarioConfig {
            seed,
            frames: 300,
            ..ScenarioConfig::default()
        },
        ..RunConfig::default()
    };
    let (gt, out) = simulate_and_run(&cfg, SystemOptions::FULL).unwrap();
    let gt_txt = format_mot(&trajectories_to_records(&gt, |_, _| 1.0));
    let res_txt = format_mot(&trajectories_to_records(&out.tracks, |f, id| {
        out.confidences[&(f, id)]
    }));
    let r = evaluate(&gt, &out.tracks).unwrap();
    (gt_txt, res_txt, format!("{r:?}"))
}

#[test]
fn criterion_11_round_trip_and_determinism() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let records: Vec<MotRecord> = (0..200)
        .map(|k| MotRecord {
            frame: 1 + k / 4,
            id: if k % 5 == 0 { -1 } else { i64::from(k % 7) },
            x: (rng.random_range(0.0..1900.0f64) * 1e6).round() / 1e6,
            y: (rng.random_range(0.0..1000.0f64) * 1e6).round() / 1e6,
            w: (rng.random_range(1.0..50.0f64) * 1e6).round() / 1e6,
            h: (rng.random_range(1.0..50.0f64) * 1e6).round() / 1e6,
            conf: (rng.random::<f64>() * 1e6).round() / 1e6,
        })
        .collect();
    let text = format_mot(&records);
    let back = parse_mot(&text).unwrap();
    let round_trip = back == records && format_mot(&back) == text;
    let deterministic = pipeline_bytes(3) == pipeline_bytes(3);
    let pass = round_trip && deterministic;
    report(
        11,
        pass,
        &format!("round trip {round_trip}, repeat runs identical {deterministic}"),
    );
    assert!(pass);
}

#[test]
fn local_windows_stay_near_tracks() {
    // Sanity check on the trace runs: every window overlaps some ground-truth box.
    let cfg = RunConfig {
        scenario: ScenarioConfig {
            frames: 200,
            seed: 5,
            ..ScenarioConfig::default()
        },
        noise: NoiseModel::clean(),
        ..RunConfig::default()
    };
    let (gt, out) = simulate_and_run(&cfg, SystemOptions::FULL).unwrap();
    let dets = gldt::sim::render_detections(&gt, &cfg.noise, cfg.scenario.frame_dims, 5).unwrap();
    let again = run_system(&gt, &dets, &cfg, SystemOptions::FULL).unwrap();
    assert_eq!(again, out);
    for (f, wins) in &out.windows {
        for w in wins {
            assert!(gt
                .frame(*f)
                .iter()
                .any(|(_, b)| iou(w, b) > 0.0 || w.contains_point(b.center().0, b.center().1)));
        }
    }
}
