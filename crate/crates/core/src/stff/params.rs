use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Fixed parameters of one fusion block. Nothing here is trained.
#[derive(Debug, Clone, PartialEq)]
pub struct StffParams {
    pub channels: usize,
    pub heads: usize,
    /// Side of the square attention window.
    pub window: usize,
    /// Width of the positional encoding and of the motion feature.
    pub dim_m: usize,
    /// Residual blend weight of the fused map.
    pub alpha: f64,
    /// Query projection, `C x C`.
    pub w_q: Array2<f64>,
    /// Key/value projection, `2C x C`; keys are the first `C` rows.
    pub w_kv: Array2<f64>,
    /// Positional projection of normalized `(row, col)`, `dim_m x 2`.
    pub pos_proj: Array2<f64>,
    pub pos_bias: Array1<f64>,
    /// 1x1 gate convolution over the motion feature, `C x dim_m`.
    pub gate_w: Array2<f64>,
    pub gate_b: Array1<f64>,
    /// 1x1 fusion convolution, `3C x 3C`; output group `g` occupies rows `gC..(g+1)C`.
    pub fuse_w: Array2<f64>,
    pub fuse_b: Array1<f64>,
}

impl StffParams {
    pub const DEFAULT_ALPHA: f64 = 0.1;

    /// Weights drawn from N(0, 1/fan_in), biases zero.
    pub fn seeded(
        channels: usize,
        heads: usize,
        window: usize,
        dim_m: usize,
        seed: u64,
    ) -> Result<Self> {
        if channels == 0 || heads == 0 || window == 0 || dim_m == 0 {
            return Err(Error::Config("stff sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows: usize, cols: usize| -> Array2<f64> {
            let n = Normal::new(0.0, (1.0 / cols as f64).sqrt()).expect("positive std");
            Array2::from_shape_simple_fn((rows, cols), || n.sample(&mut rng))
        };
        let c = channels;
        let p = Self {
            channels,
            heads,
            window,
            dim_m,
            alpha: Self::DEFAULT_ALPHA,
            w_q: draw(c, c),
            w_kv: draw(2 * c, c),
            pos_proj: draw(dim_m, 2),
            pos_bias: Array1::zeros(dim_m),
            gate_w: draw(c, dim_m),
            gate_b: Array1::zeros(c),
            fuse_w: draw(3 * c, 3 * c),
            fuse_b: Array1::zeros(3 * c),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels;
        if c == 0 || self.heads == 0 || self.window == 0 || self.dim_m == 0 {
            return Err(Error::Config("stff sizes must be positive".into()));
        }
        if !c.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "channels {c} not divisible by heads {}",
                self.heads
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        let want = [
            ("w_q", self.w_q.dim(), (c, c)),
            ("w_kv", self.w_kv.dim(), (2 * c, c)),
            ("pos_proj", self.pos_proj.dim(), (self.dim_m, 2)),
            ("gate_w", self.gate_w.dim(), (c, self.dim_m)),
            ("fuse_w", self.fuse_w.dim(), (3 * c, 3 * c)),
        ];
        for (name, got, expect) in want {
            if got != expect {
                return Err(Error::Shape(format!(
                    "{name} is {got:?}, expected {expect:?}"
                )));
            }
        }
        let bias = [
            ("pos_bias", self.pos_bias.len(), self.dim_m),
            ("gate_b", self.gate_b.len(), c),
            ("fuse_b", self.fuse_b.len(), 3 * c),
        ];
        for (name, got, expect) in bias {
            if got != expect {
                return Err(Error::Shape(format!(
                    "{name} has length {got}, expected {expect}"
                )));
            }
        }
        let finite = self.alpha.is_finite()
            && [
                &self.w_q,
                &self.w_kv,
                &self.pos_proj,
                &self.gate_w,
                &self.fuse_w,
            ]
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite()))
            && [&self.pos_bias, &self.gate_b, &self.fuse_b]
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::Config("non-finite stff parameter".into()));
        }
        Ok(())
    }

    /// Largest Frobenius norm among the weight matrices.
    pub fn weight_scale(&self) -> f64 {
        [
            &self.w_q,
            &self.w_kv,
            &self.pos_proj,
            &self.gate_w,
            &self.fuse_w,
        ]
        .iter()
        .map(|m| m.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
    }

    /// Plain-text dump: scalar lines, then each array as `name rows cols`
    /// followed by one line per row. Values round-trip exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "channels {}", self.channels);
        let _ = writeln!(s, "heads {}", self.heads);
        let _ = writeln!(s, "window {}", self.window);
        let _ = writeln!(s, "dim_m {}", self.dim_m);
        let _ = writeln!(s, "alpha {}", self.alpha);
        let mats = [
            ("w_q", &self.w_q),
            ("w_kv", &self.w_kv),
            ("pos_proj", &self.pos_proj),
            ("gate_w", &self.gate_w),
            ("fuse_w", &self.fuse_w),
        ];
        for (name, m) in mats {
            let _ = writeln!(s, "{name} {} {}", m.nrows(), m.ncols());
            for row in m.rows() {
                let _ = writeln!(s, "{}", join(row.iter()));
            }
        }
        for (name, v) in [
            ("pos_bias", &self.pos_bias),
            ("gate_b", &self.gate_b),
            ("fuse_b", &self.fuse_b),
        ] {
            let _ = writeln!(s, "{name} 1 {}", v.len());
            let _ = writeln!(s, "{}", join(v.iter()));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (channels, heads, window, dim_m, alpha) = {
            let mut scalar = |key: &str| -> Result<(usize, String)> {
                let (n, l) = lines.next().ok_or(Error::Parse {
                    line: 0,
                    msg: format!("missing {key}"),
                })?;
                let mut it = l.split_whitespace();
                if it.next() != Some(key) {
                    return Err(Error::Parse {
                        line: n,
                        msg: format!("expected {key}"),
                    });
                }
                let v = it.next().ok_or(Error::Parse {
                    line: n,
                    msg: format!("{key} has no value"),
                })?;
                Ok((n, v.to_string()))
            };
            let int = |(n, v): (usize, String)| -> Result<usize> {
                v.parse().map_err(|_| Error::Parse {
                    line: n,
                    msg: format!("bad integer {v:?}"),
                })
            };
            let channels = int(scalar("channels")?)?;
            let heads = int(scalar("heads")?)?;
            let window = int(scalar("window")?)?;
            let dim_m = int(scalar("dim_m")?)?;
            let (n, a) = scalar("alpha")?;
            let alpha: f64 = a.parse().map_err(|_| Error::Parse {
                line: n,
                msg: format!("bad number {a:?}"),
            })?;
            (channels, heads, window, dim_m, alpha)
        };

        let mut matrix = |key: &str| -> Result<Array2<f64>> {
            let (n, l) = lines.next().ok_or(Error::Parse {
                line: 0,
                msg: format!("missing {key}"),
            })?;
            let head: Vec<&str> = l.split_whitespace().collect();
            if head.len() != 3 || head[0] != key {
                return Err(Error::Parse {
                    line: n,
                    msg: format!("expected `{key} rows cols`"),
                });
            }
            let dims: Vec<usize> = head[1..]
                .iter()
                .map(|v| {
                    v.parse().map_err(|_| Error::Parse {
                        line: n,
                        msg: format!("bad dimension {v:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            let mut vals = Vec::with_capacity(dims[0] * dims[1]);
            for _ in 0..dims[0] {
                let (n, l) = lines.next().ok_or(Error::Parse {
                    line: n,
                    msg: format!("{key} is truncated"),
                })?;
                let row: Vec<f64> = l
                    .split_whitespace()
                    .map(|v| {
                        v.parse().map_err(|_| Error::Parse {
                            line: n,
                            msg: format!("bad number {v:?}"),
                        })
                    })
                    .collect::<Result<_>>()?;
                if row.len() != dims[1] {
                    return Err(Error::Parse {
                        line: n,
                        msg: format!("expected {} values, got {}", dims[1], row.len()),
                    });
                }
                vals.extend(row);
            }
            Array2::from_shape_vec((dims[0], dims[1]), vals)
                .map_err(|e| Error::Shape(e.to_string()))
        };
        let w_q = matrix("w_q")?;
        let w_kv = matrix("w_kv")?;
        let pos_proj = matrix("pos_proj")?;
        let gate_w = matrix("gate_w")?;
        let fuse_w = matrix("fuse_w")?;
        let vector = |m: Array2<f64>| -> Array1<f64> { m.into_iter().collect() };
        let pos_bias = vector(matrix("pos_bias")?);
        let gate_b = vector(matrix("gate_b")?);
        let fuse_b = vector(matrix("fuse_b")?);
        let p = Self {
            channels,
            heads,
            window,
            dim_m,
            alpha,
            w_q,
            w_kv,
            pos_proj,
            pos_bias,
            gate_w,
            gate_b,
            fuse_w,
            fuse_b,
        };
        p.validate()?;
        Ok(p)
    }
}

fn join<'a>(it: impl Iterator<Item = &'a f64>) -> String {
    it.map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}
