use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{BBox, Detection};
use crate::trajectory::TrajectorySet;

/// One line of a MOT file: `frame,id,x,y,w,h,conf,-1,-1,-1`.
///
/// Detections carry id -1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRecord {
    pub frame: u32,
    pub id: i64,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub conf: f64,
}

impl MotRecord {
    pub fn bbox(&self) -> Result<BBox> {
        BBox::new(self.x, self.y, self.w, self.h)
    }
}

fn field<T: std::str::FromStr>(raw: &str, name: &str, line: usize) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid {name} '{}'", raw.trim()),
    })
}

/// Parse MOT text. Blank lines are skipped; lines need 7 to 10 fields.
pub fn parse_mot(text: &str) -> Result<Vec<MotRecord>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = raw.split(',').collect();
        if !(7..=10).contains(&parts.len()) {
            return Err(Error::Parse {
                line,
                msg: format!("expected 7-10 fields, found {}", parts.len()),
            });
        }
        let frame: u32 = field(parts[0], "frame", line)?;
        if frame < 1 {
            return Err(Error::Parse {
                line,
                msg: "frame must be at least 1".into(),
            });
        }
        let id: f64 = field(parts[1], "id", line)?;
        if id.fract() != 0.0 || id < -1.0 {
            return Err(Error::Parse {
                line,
                msg: format!("invalid id '{}'", parts[1].trim()),
            });
        }
        let rec = MotRecord {
            frame,
            id: id as i64,
            x: field(parts[2], "x", line)?,
            y: field(parts[3], "y", line)?,
            w: field(parts[4], "w", line)?,
            h: field(parts[5], "h", line)?,
            conf: field(parts[6], "confidence", line)?,
        };
        if rec.bbox().is_err() || !rec.conf.is_finite() {
            return Err(Error::Parse {
                line,
                msg: "box must be finite with positive size".into(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_mot(path: &Path) -> Result<Vec<MotRecord>> {
    parse_mot(&super::read_text(path)?)
}

/// Render records with six decimals; output parses back to the same text.
pub fn format_mot(records: &[MotRecord]) -> String {
    let mut s = String::with_capacity(records.len() * 64);
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},-1,-1,-1",
            r.frame, r.id, r.x, r.y, r.w, r.h, r.conf
        );
    }
    s
}

pub fn write_mot(path: &Path, records: &[MotRecord]) -> Result<()> {
    super::write_text(path, &format_mot(records))
}

/// Records with id >= 0 grouped by frame.
pub fn trajectories_from_records(records: &[MotRecord]) -> Result<TrajectorySet> {
    let mut set = TrajectorySet::new();
    for r in records.iter().filter(|r| r.id >= 0) {
        set.insert(r.frame, r.id as u64, r.bbox()?);
    }
    Ok(set)
}

/// Detection rows (id -1) grouped by frame in file order.
pub fn detections_from_records(records: &[MotRecord]) -> Result<BTreeMap<u32, Vec<Detection>>> {
    let mut out: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.id < 0) {
        out.entry(r.frame)
            .or_default()
            .push(Detection::new(r.frame, r.bbox()?, r.conf));
    }
    Ok(out)
}

/// Ground-truth or result rows; `conf` is 1 unless given per box.
pub fn trajectories_to_records(
    set: &TrajectorySet,
    conf: impl Fn(u32, u64) -> f64,
) -> Vec<MotRecord> {
    set.iter()
        .flat_map(|(frame, row)| {
            let mut row: Vec<(u64, BBox)> = row.to_vec();
            row.sort_by_key(|e| e.0);
            row.into_iter()
                .map(|(id, b)| MotRecord {
                    frame,
                    id: id as i64,
                    x: b.x,
                    y: b.y,
                    w: b.w,
                    h: b.h,
                    conf: conf(frame, id),
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn detections_to_records(dets: &BTreeMap<u32, Vec<Detection>>) -> Vec<MotRecord> {
    dets.values()
        .flatten()
        .map(|d| MotRecord {
            frame: d.frame,
            id: -1,
            x: d.bbox.x,
            y: d.bbox.y,
            w: d.bbox.w,
            h: d.bbox.h,
            conf: d.confidence,
        })
        .collect()
}
