//! Invariant suite run by `stff-check`.

use ndarray::{s, Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    attention_weights, dynamic_fuse, fusion_weights, gate, gated_align, motion_attention,
    residual_blend, stff_forward, FeatureMap, StffParams,
};
use crate::error::Result;

pub const SIMPLEX_TOL: f64 = 1e-6;
const FD_EPS: f64 = 1e-4;
const SHAPE_TRIALS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

fn random_map(rng: &mut ChaCha8Rng, dims: (usize, usize, usize, usize)) -> FeatureMap {
    Array4::from_shape_simple_fn(dims, || StandardNormal.sample(rng))
}

fn max_abs_diff(a: &FeatureMap, b: &FeatureMap) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Every check on the default toy sizes (B=1, C=8, H=W=16, S=4, two heads,
/// dim_m=4) plus randomized shapes.
pub fn run_checks(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = StffParams::seeded(8, 2, 4, 4, seed)?;
    let dims = (1, 8, 16, 16);
    let x_t = random_map(&mut rng, dims);
    let x_prev = random_map(&mut rng, dims);
    let mut out = Vec::new();

    let a = attention_weights(&x_t, &x_prev, &p)?;
    let worst = a
        .lanes(ndarray::Axis(4))
        .into_iter()
        .map(|row| {
            let neg = row.iter().any(|&v| v < 0.0);
            if neg {
                f64::INFINITY
            } else {
                (row.sum() - 1.0).abs()
            }
        })
        .fold(0.0, f64::max);
    out.push(check(
        "attention rows on simplex",
        worst <= SIMPLEX_TOL,
        format!("max |sum-1| {worst:.3e}"),
    ));

    let att = motion_attention(&x_t, &x_prev, &p)?;
    let aligned = gated_align(&x_prev, &att.x_motion, &p)?;
    let fw = fusion_weights(&x_t, &att.x_app, &aligned, &p)?;
    let worst = fw
        .lanes(ndarray::Axis(1))
        .into_iter()
        .map(|l| {
            if l.iter().any(|&v| v < 0.0) {
                f64::INFINITY
            } else {
                (l.sum() - 1.0).abs()
            }
        })
        .fold(0.0, f64::max);
    out.push(check(
        "fusion weights on simplex",
        worst <= SIMPLEX_TOL,
        format!("max |sum-1| {worst:.3e}"),
    ));

    let mut p1 = p.clone();
    p1.window = 1;
    let m1 = motion_attention(&x_t, &x_prev, &p1)?.x_motion;
    let nonzero = m1.iter().filter(|&&v| v != 0.0).count();
    out.push(check(
        "S=1 motion is exactly zero",
        nonzero == 0,
        format!("{nonzero} non-zero entries"),
    ));

    let mut p0 = p.clone();
    p0.alpha = 0.0;
    let y0 = stff_forward(&x_t, &x_prev, &p0)?;
    out.push(check(
        "alpha=0 returns x_t exactly",
        y0 == x_t,
        format!("max diff {:.3e}", max_abs_diff(&y0, &x_t)),
    ));

    let mut p_one = p.clone();
    p_one.alpha = 1.0;
    let fused = dynamic_fuse(&x_t, &att.x_app, &aligned, &p)?;
    let y1 = stff_forward(&x_t, &x_prev, &p_one)?;
    out.push(check(
        "alpha=1 returns fused map exactly",
        y1 == fused,
        format!("max diff {:.3e}", max_abs_diff(&y1, &fused)),
    ));

    let mut bad = Vec::new();
    for trial in 0..SHAPE_TRIALS {
        let heads = [1, 2, 4][rng.random_range(0..3)];
        let c = heads * rng.random_range(1..=3);
        let s = [1, 2, 4][rng.random_range(0..3)];
        let dims = (
            rng.random_range(1..=2),
            c,
            s * rng.random_range(1..=4),
            s * rng.random_range(1..=4),
        );
        let pr = StffParams::seeded(
            c,
            heads,
            s,
            rng.random_range(1..=6),
            seed ^ (trial as u64 + 1),
        )?;
        let a = random_map(&mut rng, dims);
        let b = random_map(&mut rng, dims);
        let y = stff_forward(&a, &b, &pr)?;
        if y.dim() != dims || !y.iter().all(|v| v.is_finite()) {
            bad.push(format!("{dims:?} S={s} heads={heads}"));
        }
    }
    out.push(check(
        "shape preserved over random configs",
        bad.is_empty(),
        if bad.is_empty() {
            format!("{SHAPE_TRIALS} configs")
        } else {
            bad.join("; ")
        },
    ));

    // Zero queries make every score equal, so each output row is the window mean of V.
    let mut pq = p.clone();
    pq.w_q.fill(0.0);
    let app = motion_attention(&x_t, &x_prev, &pq)?.x_app;
    let expect = window_mean_of_values(&x_prev, &pq);
    let d = max_abs_diff(&app, &expect);
    out.push(check(
        "zero W_q gives window mean of values",
        d <= 1e-9,
        format!("max diff {d:.3e}"),
    ));

    let mut pg = p.clone();
    pg.gate_w.fill(0.0);
    pg.gate_b.fill(0.0);
    let half = gated_align(&x_prev, &att.x_motion, &pg)?;
    let d = max_abs_diff(&half, &(&x_prev * 0.5));
    out.push(check(
        "zero gate kernel halves x_prev",
        d == 0.0,
        format!("max diff {d:.3e}"),
    ));

    let g = gate(&att.x_motion, &p)?;
    let open = g.iter().all(|&v| v > 0.0 && v < 1.0);
    out.push(check(
        "gate values strictly inside (0,1)",
        open,
        String::new(),
    ));

    let mut pf = p.clone();
    pf.fuse_w.fill(0.0);
    pf.fuse_b.fill(0.0);
    let mean = dynamic_fuse(&x_t, &att.x_app, &aligned, &pf)?;
    let expect = (&x_t + &att.x_app + &aligned) / 3.0;
    let d = max_abs_diff(&mean, &expect);
    out.push(check(
        "zero fusion kernel averages inputs",
        d <= 1e-12,
        format!("max diff {d:.3e}"),
    ));

    // Bias the fusion toward x_t so the fused map is x_t itself.
    let mut pfix = p.clone();
    pfix.fuse_w.fill(0.0);
    let c = pfix.channels;
    pfix.fuse_b.slice_mut(s![..c]).fill(50.0);
    pfix.fuse_b.slice_mut(s![c..]).fill(-50.0);
    let y = stff_forward(&x_t, &x_t, &pfix)?;
    let d = max_abs_diff(&y, &x_t);
    out.push(check(
        "equal inputs are a fixed point",
        d <= 1e-6,
        format!("max diff {d:.3e}"),
    ));

    let blend = residual_blend(&x_t, &x_t, 0.1);
    let d = max_abs_diff(&blend, &x_t);
    out.push(check(
        "residual blend fixes x_t",
        d <= 1e-12,
        format!("max diff {d:.3e}"),
    ));

    let base = stff_forward(&x_t, &x_prev, &p)?;
    let bound = 10.0 * FD_EPS * p.weight_scale().max(1.0);
    let mut worst: f64 = 0.0;
    for _ in 0..8 {
        let idx = (
            0,
            rng.random_range(0..8),
            rng.random_range(0..16),
            rng.random_range(0..16),
        );
        for which in 0..2 {
            let (mut a, mut b) = (x_t.clone(), x_prev.clone());
            if which == 0 {
                a[idx] += FD_EPS;
            } else {
                b[idx] += FD_EPS;
            }
            worst = worst.max(max_abs_diff(&stff_forward(&a, &b, &p)?, &base));
        }
    }
    out.push(check(
        "output change is O(eps)",
        worst <= bound,
        format!("max change {worst:.3e}, bound {bound:.3e}"),
    ));

    Ok(out)
}

fn window_mean_of_values(x_prev: &FeatureMap, p: &StffParams) -> FeatureMap {
    let (b, c, h, w) = x_prev.dim();
    let s = p.window;
    let w_v: Array2<f64> = p.w_kv.slice(s![c.., ..]).to_owned();
    let mut out = Array4::zeros((b, c, h, w));
    for bi in 0..b {
        for y0 in (0..h).step_by(s) {
            for x0 in (0..w).step_by(s) {
                let mut mean = vec![0.0; c];
                for y in y0..y0 + s {
                    for x in x0..x0 + s {
                        for (o, m) in mean.iter_mut().enumerate() {
                            let mut v = 0.0;
                            for i in 0..c {
                                v += w_v[[o, i]] * x_prev[[bi, i, y, x]];
                            }
                            *m += v / (s * s) as f64;
                        }
                    }
                }
                for y in y0..y0 + s {
                    for x in x0..x0 + s {
                        for (o, m) in mean.iter().enumerate() {
                            out[[bi, o, y, x]] = *m;
                        }
                    }
                }
            }
        }
    }
    out
}
