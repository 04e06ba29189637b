//! Forward-only reference of the spatio-temporal feature fusion block.
//!
//! Feature maps are `(B, C, H, W)` arrays. Attention runs inside
//! non-overlapping `S x S` windows: queries come from the current frame,
//! keys and values from the previous one. The attention-weighted shift of a
//! positional encoding is the motion feature, which gates the previous frame
//! before a softmax-weighted three-way fusion and a residual blend.

mod checks;
mod params;

pub use checks::{run_checks, Check};
pub use params::StffParams;

use ndarray::{s, Array2, Array4, Array5, Axis};

use crate::error::{Error, Result};

pub type FeatureMap = Array4<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutputs {
    pub x_app: FeatureMap,
    /// `(B, dim_m, H, W)`: each window's motion rows placed back at their pixels.
    pub x_motion: FeatureMap,
}

fn check_finite(x: &FeatureMap, name: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Shape(format!("{name} has non-finite entries")))
    }
}

fn check_pair(x_t: &FeatureMap, x_prev: &FeatureMap, p: &StffParams) -> Result<()> {
    p.validate()?;
    if x_t.dim() != x_prev.dim() {
        return Err(Error::Shape(format!(
            "{:?} vs {:?}",
            x_t.dim(),
            x_prev.dim()
        )));
    }
    let (b, c, h, w) = x_t.dim();
    if b == 0 || h == 0 || w == 0 {
        return Err(Error::Shape("empty feature map".into()));
    }
    if c != p.channels {
        return Err(Error::Shape(format!(
            "{c} channels, parameters expect {}",
            p.channels
        )));
    }
    if h % p.window != 0 || w % p.window != 0 {
        return Err(Error::Shape(format!(
            "{h}x{w} not divisible by window {}",
            p.window
        )));
    }
    check_finite(x_t, "x_t")?;
    check_finite(x_prev, "x_prev")
}

/// Row-wise softmax, max-shifted.
fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Pixels of one window as rows, row-major within the window.
fn window_rows(x: &FeatureMap, b: usize, y0: usize, x0: usize, s: usize) -> Array2<f64> {
    let c = x.dim().1;
    let mut out = Array2::zeros((s * s, c));
    for r in 0..s {
        for q in 0..s {
            out.row_mut(r * s + q)
                .assign(&x.slice(s![b, .., y0 + r, x0 + q]));
        }
    }
    debug_assert_eq!(out.ncols(), c);
    out
}

fn place_rows(dst: &mut FeatureMap, rows: &Array2<f64>, b: usize, y0: usize, x0: usize, s: usize) {
    for r in 0..s {
        for q in 0..s {
            dst.slice_mut(s![b, .., y0 + r, x0 + q])
                .assign(&rows.row(r * s + q));
        }
    }
}

/// Projected normalized `(row, col)` of every window position, `S^2 x dim_m`.
pub fn positional_encoding(p: &StffParams) -> Array2<f64> {
    let s = p.window;
    let scale = if s > 1 { (s - 1) as f64 } else { 1.0 };
    let mut coords = Array2::zeros((s * s, 2));
    for r in 0..s {
        for q in 0..s {
            coords[[r * s + q, 0]] = r as f64 / scale;
            coords[[r * s + q, 1]] = q as f64 / scale;
        }
    }
    coords.dot(&p.pos_proj.t()) + &p.pos_bias
}

struct Attended {
    out: AttentionOutputs,
    /// `(B, windows, heads, S^2, S^2)`.
    weights: Array5<f64>,
}

fn attend(x_t: &FeatureMap, x_prev: &FeatureMap, p: &StffParams) -> Result<Attended> {
    check_pair(x_t, x_prev, p)?;
    let (b, c, h, w) = x_t.dim();
    let s = p.window;
    let n = s * s;
    let dk = c / p.heads;
    let scale = (dk as f64).sqrt();
    let e_pos = positional_encoding(p);
    let (wy, wx) = (h / s, w / s);

    let mut x_app = Array4::zeros((b, c, h, w));
    let mut x_motion = Array4::zeros((b, p.dim_m, h, w));
    let mut weights = Array5::zeros((b, wy * wx, p.heads, n, n));
    for bi in 0..b {
        for iy in 0..wy {
            for ix in 0..wx {
                let (y0, x0) = (iy * s, ix * s);
                let q = window_rows(x_t, bi, y0, x0, s).dot(&p.w_q.t());
                let kv = window_rows(x_prev, bi, y0, x0, s).dot(&p.w_kv.t());
                let (k, v) = kv.view().split_at(Axis(1), c);
                let mut app = Array2::zeros((n, c));
                let mut mean_attn = Array2::zeros((n, n));
                for hd in 0..p.heads {
                    let cols = s![.., hd * dk..(hd + 1) * dk];
                    let mut a = q.slice(cols).dot(&k.slice(cols).t()) / scale;
                    softmax_rows(&mut a);
                    app.slice_mut(cols).assign(&a.dot(&v.slice(cols)));
                    mean_attn += &a;
                    weights
                        .slice_mut(s![bi, iy * wx + ix, hd, .., ..])
                        .assign(&a);
                }
                mean_attn /= p.heads as f64;
                let motion = mean_attn.dot(&e_pos) - &e_pos;
                place_rows(&mut x_app, &app, bi, y0, x0, s);
                place_rows(&mut x_motion, &motion, bi, y0, x0, s);
            }
        }
    }
    Ok(Attended {
        out: AttentionOutputs { x_app, x_motion },
        weights,
    })
}

/// Windowed cross-frame attention.
///
/// With several heads the motion feature uses the head-averaged attention,
/// which is still row-stochastic.
pub fn motion_attention(
    x_t: &FeatureMap,
    x_prev: &FeatureMap,
    p: &StffParams,
) -> Result<AttentionOutputs> {
    attend(x_t, x_prev, p).map(|a| a.out)
}

/// Per-head attention matrices, `(B, windows, heads, S^2, S^2)`, windows in row-major order.
pub fn attention_weights(
    x_t: &FeatureMap,
    x_prev: &FeatureMap,
    p: &StffParams,
) -> Result<Array5<f64>> {
    attend(x_t, x_prev, p).map(|a| a.weights)
}

/// Apply a 1x1 convolution `(out, in)` with bias to every pixel.
fn conv1x1(x: &FeatureMap, w: &Array2<f64>, bias: &ndarray::Array1<f64>) -> Result<FeatureMap> {
    let (b, c, h, wd) = x.dim();
    if w.ncols() != c || bias.len() != w.nrows() {
        return Err(Error::Shape(format!(
            "1x1 kernel {:?} on {c} channels",
            w.dim()
        )));
    }
    let mut out = Array4::zeros((b, w.nrows(), h, wd));
    for bi in 0..b {
        for y in 0..h {
            for xi in 0..wd {
                let px = x.slice(s![bi, .., y, xi]);
                out.slice_mut(s![bi, .., y, xi])
                    .assign(&(w.dot(&px) + bias));
            }
        }
    }
    Ok(out)
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Gate values `sigmoid(conv(x_motion))`, shape `(B, C, H, W)`.
pub fn gate(x_motion: &FeatureMap, p: &StffParams) -> Result<FeatureMap> {
    check_finite(x_motion, "x_motion")?;
    Ok(conv1x1(x_motion, &p.gate_w, &p.gate_b)?.mapv(sigmoid))
}

pub fn gated_align(
    x_prev: &FeatureMap,
    x_motion: &FeatureMap,
    p: &StffParams,
) -> Result<FeatureMap> {
    let g = gate(x_motion, p)?;
    if g.dim() != x_prev.dim() {
        return Err(Error::Shape(format!(
            "gate {:?} vs x_prev {:?}",
            g.dim(),
            x_prev.dim()
        )));
    }
    Ok(x_prev * &g)
}

/// Fusion weights `(B, 3, C, H, W)`: softmax across the three inputs of
/// the 1x1 convolution over their channel concatenation.
pub fn fusion_weights(
    x_t: &FeatureMap,
    x_app: &FeatureMap,
    x_aligned: &FeatureMap,
    p: &StffParams,
) -> Result<Array5<f64>> {
    if x_t.dim() != x_app.dim() || x_t.dim() != x_aligned.dim() {
        return Err(Error::Shape(format!(
            "fusion inputs {:?}, {:?}, {:?}",
            x_t.dim(),
            x_app.dim(),
            x_aligned.dim()
        )));
    }
    let (b, c, h, w) = x_t.dim();
    let cat = ndarray::concatenate(Axis(1), &[x_t.view(), x_app.view(), x_aligned.view()])
        .map_err(|e| Error::Shape(e.to_string()))?;
    let logits = conv1x1(&cat, &p.fuse_w, &p.fuse_b)?;
    let mut wts = logits
        .into_shape_with_order((b, 3, c, h, w))
        .map_err(|e| Error::Shape(e.to_string()))?;
    for mut lane in wts.lanes_mut(Axis(1)) {
        let max = lane.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        lane.mapv_inplace(|v| (v - max).exp());
        let sum = lane.sum();
        lane.mapv_inplace(|v| v / sum);
    }
    Ok(wts)
}

pub fn dynamic_fuse(
    x_t: &FeatureMap,
    x_app: &FeatureMap,
    x_aligned: &FeatureMap,
    p: &StffParams,
) -> Result<FeatureMap> {
    let wts = fusion_weights(x_t, x_app, x_aligned, p)?;
    let pick = |g: usize| wts.index_axis(Axis(1), g);
    Ok(&pick(0) * x_t + &pick(1) * x_app + &pick(2) * x_aligned)
}

/// `alpha * fused + (1 - alpha) * x_t`.
pub fn residual_blend(x_t: &FeatureMap, x_f: &FeatureMap, alpha: f64) -> FeatureMap {
    if alpha == 0.0 {
        return x_t.clone();
    }
    if alpha == 1.0 {
        return x_f.clone();
    }
    x_f * alpha + x_t * (1.0 - alpha)
}

pub fn stff_forward(x_t: &FeatureMap, x_prev: &FeatureMap, p: &StffParams) -> Result<FeatureMap> {
    let att = motion_attention(x_t, x_prev, p)?;
    let aligned = gated_align(x_prev, &att.x_motion, p)?;
    let fused = dynamic_fuse(x_t, &att.x_app, &aligned, p)?;
    Ok(residual_blend(x_t, &fused, p.alpha))
}
