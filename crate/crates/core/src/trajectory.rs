//! Per-frame collections of identified boxes (ground truth or tracker output).

use std::collections::BTreeMap;

use crate::geometry::BBox;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectorySet {
    frames: BTreeMap<u32, Vec<(u64, BBox)>>,
}

impl TrajectorySet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register `frame` with no boxes (keeps empty frames in the range).
    pub fn touch(&mut self, frame: u32) {
        self.frames.entry(frame).or_default();
    }

    /// Add a box; a second box with the same id in the same frame replaces the first.
    pub fn insert(&mut self, frame: u32, id: u64, bbox: BBox) {
        let row = self.frames.entry(frame).or_default();
        match row.iter_mut().find(|(i, _)| *i == id) {
            Some(slot) => slot.1 = bbox,
            None => row.push((id, bbox)),
        }
    }

    pub fn frame(&self, frame: u32) -> &[(u64, BBox)] {
        self.frames.get(&frame).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[(u64, BBox)])> {
        self.frames.iter().map(|(f, v)| (*f, v.as_slice()))
    }

    pub fn frame_indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.frames.keys().copied()
    }

    pub fn box_count(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.box_count() == 0
    }

    /// Distinct ids in ascending order.
    pub fn ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.frames.values().flatten().map(|(i, _)| *i).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Same set with every id passed through `f`.
    pub fn relabel(&self, mut f: impl FnMut(u64) -> u64) -> Self {
        let mut out = Self::new();
        for (frame, row) in self.iter() {
            out.touch(frame);
            for &(id, b) in row {
                out.insert(frame, f(id), b);
            }
        }
        out
    }
}
