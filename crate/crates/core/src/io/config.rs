use std::fmt::Write as _;
use std::path::Path;

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::sim::{Layout, NoiseModel, Occlusion, ScenarioConfig};

/// Tracker, scenario and noise settings of one run.
///
/// Text form: one `key = value` per line, `#` starts a comment, unknown keys
/// are rejected and missing keys keep their defaults. `occlusion =
/// target:start:duration` may repeat.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    pub scenario: ScenarioConfig,
    pub noise: NoiseModel,
}

fn num<T: std::str::FromStr>(key: &str, v: &str, line: usize) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("line {line}: invalid value '{v}' for {key}")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut occlusions_seen = false;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {line}: expected 'key = value'"
                )));
            };
            let (key, v) = (key.trim(), value.trim());
            let t = &mut c.tracker;
            let s = &mut c.scenario;
            let n = &mut c.noise;
            match key {
                "t_h" => t.t_h = num(key, v, line)?,
                "t_l" => t.t_l = num(key, v, line)?,
                "omega_1" => t.omega[0] = num(key, v, line)?,
                "omega_2" => t.omega[1] = num(key, v, line)?,
                "omega_3" => t.omega[2] = num(key, v, line)?,
                "omega_4" => t.omega[3] = num(key, v, line)?,
                "beta_1" => t.beta[0] = num(key, v, line)?,
                "beta_2" => t.beta[1] = num(key, v, line)?,
                "beta_3" => t.beta[2] = num(key, v, line)?,
                "gamma" => t.gamma = num(key, v, line)?,
                "tau_t" => t.tau_t = num(key, v, line)?,
                "n_g" => t.n_g = num(key, v, line)?,
                "n_l" => t.n_l = num(key, v, line)?,
                "n_m" => t.n_m = num(key, v, line)?,
                "tau_o" => t.tau_o = num(key, v, line)?,
                "tau_d" => t.tau_d = num(key, v, line)?,
                "tau_s" => t.tau_s = num(key, v, line)?,
                "alpha" => t.alpha = num(key, v, line)?,
                "gate_max_cost" => t.gate_max_cost = num(key, v, line)?,
                "max_lost_age" => t.max_lost_age = num(key, v, line)?,
                "h_max" => t.h_max = num(key, v, line)?,
                "feature_window" => t.feature_window = num(key, v, line)?,
                "time_window" => t.time_window = num(key, v, line)?,
                "min_hits" => t.min_hits = num(key, v, line)?,
                "roi_size" => t.roi_size = num(key, v, line)?,
                "n_targets" => s.n_targets = num(key, v, line)?,
                "frames" => s.frames = num(key, v, line)?,
                "frame_width" => s.frame_dims.0 = num(key, v, line)?,
                "frame_height" => s.frame_dims.1 = num(key, v, line)?,
                "mix_cv" => s.motion_mix[0] = num(key, v, line)?,
                "mix_hover" => s.motion_mix[1] = num(key, v, line)?,
                "mix_dive" => s.motion_mix[2] = num(key, v, line)?,
                "mix_maneuver" => s.motion_mix[3] = num(key, v, line)?,
                "size_min" => s.target_size.0 = num(key, v, line)?,
                "size_max" => s.target_size.1 = num(key, v, line)?,
                "speed_min" => s.speed.0 = num(key, v, line)?,
                "speed_max" => s.speed.1 = num(key, v, line)?,
                "layout" => {
                    s.layout = match v {
                        "random" => Layout::Random,
                        "crossing" => Layout::Crossing,
                        _ => {
                            return Err(Error::Config(format!("line {line}: unknown layout '{v}'")))
                        }
                    }
                }
                "seed" => s.seed = num(key, v, line)?,
                "p_miss" => n.p_miss = num(key, v, line)?,
                "p_miss_local" => n.p_miss_local = num(key, v, line)?,
                "loc_noise_std" => n.loc_noise_std = num(key, v, line)?,
                "size_noise_std" => n.size_noise_std = num(key, v, line)?,
                "fp_rate" => n.fp_rate = num(key, v, line)?,
                "conf_base" => n.conf_base = num(key, v, line)?,
                "conf_penalty" => n.conf_penalty = num(key, v, line)?,
                "occlusion" => {
                    if !occlusions_seen {
                        n.occlusions.clear();
                        occlusions_seen = true;
                    }
                    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
                    if parts.len() != 3 {
                        return Err(Error::Config(format!(
                            "line {line}: occlusion must be target:start:duration"
                        )));
                    }
                    n.occlusions.push(Occlusion {
                        target: num(key, parts[0], line)?,
                        start: num(key, parts[1], line)?,
                        duration: num(key, parts[2], line)?,
                    });
                }
                _ => return Err(Error::Config(format!("line {line}: unknown key '{key}'"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&super::read_text(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker.validate()?;
        self.scenario.validate()?;
        self.noise.validate()
    }

    /// Text form accepted by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let t = &self.tracker;
        let s = &self.scenario;
        let n = &self.noise;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("t_h", t.t_h.to_string());
        kv("t_l", t.t_l.to_string());
        for (i, w) in t.omega.iter().enumerate() {
            kv(&format!("omega_{}", i + 1), w.to_string());
        }
        for (i, w) in t.beta.iter().enumerate() {
            kv(&format!("beta_{}", i + 1), w.to_string());
        }
        kv("gamma", t.gamma.to_string());
        kv("tau_t", t.tau_t.to_string());
        kv("n_g", t.n_g.to_string());
        kv("n_l", t.n_l.to_string());
        kv("n_m", t.n_m.to_string());
        kv("tau_o", t.tau_o.to_string());
        kv("tau_d", t.tau_d.to_string());
        kv("tau_s", t.tau_s.to_string());
        kv("alpha", t.alpha.to_string());
        kv("gate_max_cost", t.gate_max_cost.to_string());
        kv("max_lost_age", t.max_lost_age.to_string());
        kv("h_max", t.h_max.to_string());
        kv("feature_window", t.feature_window.to_string());
        kv("time_window", t.time_window.to_string());
        kv("min_hits", t.min_hits.to_string());
        kv("roi_size", t.roi_size.to_string());
        kv("n_targets", s.n_targets.to_string());
        kv("frames", s.frames.to_string());
        kv("frame_width", s.frame_dims.0.to_string());
        kv("frame_height", s.frame_dims.1.to_string());
        kv("mix_cv", s.motion_mix[0].to_string());
        kv("mix_hover", s.motion_mix[1].to_string());
        kv("mix_dive", s.motion_mix[2].to_string());
        kv("mix_maneuver", s.motion_mix[3].to_string());
        kv("size_min", s.target_size.0.to_string());
        kv("size_max", s.target_size.1.to_string());
        kv("speed_min", s.speed.0.to_string());
        kv("speed_max", s.speed.1.to_string());
        let layout = match s.layout {
            Layout::Random => "random",
            Layout::Crossing => "crossing",
        };
        kv("layout", layout.to_string());
        kv("seed", s.seed.to_string());
        kv("p_miss", n.p_miss.to_string());
        kv("p_miss_local", n.p_miss_local.to_string());
        kv("loc_noise_std", n.loc_noise_std.to_string());
        kv("size_noise_std", n.size_noise_std.to_string());
        kv("fp_rate", n.fp_rate.to_string());
        kv("conf_base", n.conf_base.to_string());
        kv("conf_penalty", n.conf_penalty.to_string());
        for o in &n.occlusions {
            kv(
                "occlusion",
                format!("{}:{}:{}", o.target, o.start, o.duration),
            );
        }
        out
    }
}
