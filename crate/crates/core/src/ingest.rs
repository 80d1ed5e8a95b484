//! Reading frames, detections and labels from disk.
//!
//! Frames are a directory of numerically named PNG or BMP images. Detections
//! and labels are JSON lines:
//!
//! ```text
//! {"frame":0,"x":10,"y":10,"w":50,"h":60,"confidence":0.9}
//! {"frame":0,"laterality":"left","label":"interaction"}
//! ```
//!
//! A detection may carry `"hand": true|false`, used only when training the
//! hand verifier.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::Label;
use crate::error::{Error, Result};
use crate::timeline::{HandTimelines, State};
use crate::types::{BoundingBox, FrameImage, Laterality};

/// One candidate hand box from an external detector or the proposer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    #[serde(rename = "frame")]
    pub frame_index: usize,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hand: Option<bool>,
}

impl DetectionRecord {
    pub fn from_box(frame_index: usize, b: &BoundingBox, confidence: f64) -> Self {
        Self {
            frame_index,
            x: b.x as f64,
            y: b.y as f64,
            w: b.w as f64,
            h: b.h as f64,
            confidence,
            hand: None,
        }
    }

    /// Smallest pixel box covering the record, clipped to the frame. `None`
    /// when no pixel of it is visible.
    pub fn pixel_box(&self, width: usize, height: usize) -> Option<BoundingBox> {
        let x0 = self.x.floor().max(0.0);
        let y0 = self.y.floor().max(0.0);
        let x1 = (self.x + self.w).ceil().min(width as f64);
        let y1 = (self.y + self.h).ceil().min(height as f64);
        if x1 <= x0 || y1 <= y0 {
            return None;
        }
        Some(BoundingBox::new(x0 as usize, y0 as usize, (x1 - x0) as usize, (y1 - y0) as usize))
    }
}

/// Ground-truth state of one hand in one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    #[serde(rename = "frame")]
    pub frame_index: usize,
    pub laterality: Laterality,
    pub label: Label,
}

fn record_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Record {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn numeric_stem(path: &Path) -> Option<u64> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    if ext != "png" && ext != "bmp" {
        return None;
    }
    let stem = path.file_stem()?.to_str()?;
    if stem.is_empty() || !stem.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    stem.parse().ok()
}

/// Image files of a frame directory in numeric order. Non-image files and
/// images without a purely numeric name are ignored.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut entries = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::Frames(format!("{}: {e}", dir.display())))? {
        let path = entry?.path();
        if let Some(n) = numeric_stem(&path) {
            entries.push((n, path));
        }
    }
    entries.sort();
    for pair in entries.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.0 == b.0 {
            return Err(Error::Frames(format!(
                "{} and {} have the same frame number",
                a.1.display(),
                b.1.display()
            )));
        }
        if b.0 != a.0 + 1 {
            return Err(Error::Frames(format!(
                "gap in frame numbering: {} is followed by {}",
                a.1.display(),
                b.1.display()
            )));
        }
    }
    Ok(entries.into_iter().map(|(_, p)| p).collect())
}

/// Decodes one image file into an RGB frame.
pub fn load_frame(path: &Path, index: usize, fps: f64) -> Result<FrameImage> {
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_rgb8();
    let (w, h) = img.dimensions();
    FrameImage::new(index, fps, w as usize, h as usize, img.into_raw())
}

/// Loads a whole frame directory. Frame indices are positions in numeric
/// filename order, starting at 0.
pub fn ingest_frames(dir: impl AsRef<Path>, fps: f64) -> Result<Vec<FrameImage>> {
    let paths = list_frames(dir)?;
    let mut frames: Vec<FrameImage> = Vec::with_capacity(paths.len());
    for (i, path) in paths.iter().enumerate() {
        let frame = load_frame(path, i, fps)?;
        if let Some(first) = frames.first() {
            if (frame.width(), frame.height()) != (first.width(), first.height()) {
                return Err(Error::Frames(format!(
                    "{} is {}x{}, expected {}x{}",
                    path.display(),
                    frame.width(),
                    frame.height(),
                    first.width(),
                    first.height()
                )));
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Writes a frame as PNG.
pub fn save_frame_png(frame: &FrameImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    image::save_buffer(
        path,
        frame.pixels(),
        frame.width() as u32,
        frame.height() as u32,
        image::ColorType::Rgb8,
    )
    .map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn json_lines<T: for<'de> Deserialize<'de>>(
    reader: impl BufRead,
    source: &Path,
    mut check: impl FnMut(&T, usize) -> Result<()>,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(&line).map_err(|e| record_error(source, i + 1, e.to_string()))?;
        check(&rec, i + 1)?;
        out.push(rec);
    }
    Ok(out)
}

/// Parses detection JSON lines, validates each record and sorts by frame.
/// The sort is stable, so records of one frame keep their file order.
pub fn parse_detections(reader: impl BufRead, source: &Path) -> Result<Vec<DetectionRecord>> {
    let mut out = json_lines(reader, source, |r: &DetectionRecord, line| {
        let finite = [r.x, r.y, r.w, r.h, r.confidence].iter().all(|v| v.is_finite());
        if !finite {
            return Err(record_error(source, line, "non-finite value"));
        }
        if r.w <= 0.0 || r.h <= 0.0 {
            return Err(Error::Validation {
                field: "w/h".into(),
                reason: format!("{}:{line}: box size must be positive, got {}x{}", source.display(), r.w, r.h),
            });
        }
        Ok(())
    })?;
    out.sort_by_key(|r| r.frame_index);
    Ok(out)
}

pub fn ingest_detections(path: impl AsRef<Path>) -> Result<Vec<DetectionRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Frames(format!("{}: {e}", path.display())))?;
    parse_detections(BufReader::new(file), path)
}

/// Pairs each detection with its pixel box. Records past the last frame or
/// with no visible pixel are dropped with a warning.
pub fn detection_boxes(
    records: &[DetectionRecord],
    width: usize,
    height: usize,
    frame_count: usize,
) -> Vec<(DetectionRecord, BoundingBox)> {
    records
        .iter()
        .filter_map(|r| {
            if r.frame_index >= frame_count {
                log::warn!("detection for frame {} dropped: sequence has {frame_count} frames", r.frame_index);
                return None;
            }
            match r.pixel_box(width, height) {
                Some(b) => Some((r.clone(), b)),
                None => {
                    log::warn!("detection in frame {} dropped: box lies outside the frame", r.frame_index);
                    None
                }
            }
        })
        .collect()
}

pub fn parse_labels(reader: impl BufRead, source: &Path) -> Result<Vec<LabelRecord>> {
    let mut seen = BTreeSet::new();
    let mut out = json_lines(reader, source, |r: &LabelRecord, line| {
        if !seen.insert((r.frame_index, r.laterality)) {
            return Err(record_error(
                source,
                line,
                format!("duplicate label for frame {} ({})", r.frame_index, r.laterality),
            ));
        }
        Ok(())
    })?;
    out.sort_by_key(|r| (r.frame_index, r.laterality));
    Ok(out)
}

pub fn ingest_labels(path: impl AsRef<Path>) -> Result<Vec<LabelRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Frames(format!("{}: {e}", path.display())))?;
    parse_labels(BufReader::new(file), path)
}

/// Ground-truth timelines. A hand without a label in a frame is not
/// interacting in that frame.
pub fn label_timelines(labels: &[LabelRecord], frame_count: usize, fps: f64) -> HandTimelines {
    let mut out = HandTimelines::missing(fps, frame_count);
    for l in Laterality::ALL {
        out.get_mut(l).states.fill(State::NoInteraction);
    }
    for r in labels.iter().filter(|r| r.frame_index < frame_count) {
        out.get_mut(r.laterality).states[r.frame_index] = State::from_bool(r.label.is_interaction());
    }
    out
}

pub fn write_json_lines<T: Serialize>(records: &[T], mut w: impl Write) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    Ok(())
}
