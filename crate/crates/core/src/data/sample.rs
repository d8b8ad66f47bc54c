use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::events::EventStream;
use super::image::Image;
use crate::error::{Error, Result};

/// `N >= 2` frames of identical size captured at `k * frame_interval_us`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Image>,
    frame_interval_us: u64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Image>, frame_interval_us: u64) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::validation(format!(
                "frame sequence needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        if frame_interval_us == 0 {
            return Err(Error::validation("frame interval must be positive"));
        }
        for f in &frames[1..] {
            frames[0]
                .ensure_same_dims(f)
                .map_err(|e| Error::validation(format!("frame dims differ: {e}")))?;
        }
        Ok(Self {
            frames,
            frame_interval_us,
        })
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_interval_us(&self) -> u64 {
        self.frame_interval_us
    }

    pub fn timestamps(&self) -> Vec<u64> {
        (0..self.frames.len() as u64)
            .map(|k| k * self.frame_interval_us)
            .collect()
    }

    /// `N * frame_interval_us`, the span covered by the matching event stream.
    pub fn duration_us(&self) -> u64 {
        self.frames.len() as u64 * self.frame_interval_us
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn channels(&self) -> usize {
        self.frames[0].channels()
    }

    /// Per-pixel arithmetic mean of the frames, accumulated as offsets from the
    /// first frame so identical frames average to themselves exactly.
    pub fn temporal_mean(&self) -> Image {
        let first = &self.frames[0];
        let mut acc = vec![0.0; first.data().len()];
        for f in &self.frames[1..] {
            for ((a, v), base) in acc.iter_mut().zip(f.data()).zip(first.data()) {
                *a += v - base;
            }
        }
        let n = self.frames.len() as f64;
        let data = acc.iter().zip(first.data()).map(|(a, base)| base + a / n).collect();
        Image::from_clamped(first.width(), first.height(), first.channels(), data)
            .expect("dims already validated")
    }
}

/// One dataset entry: clean reference, turbulent frames and the synchronized events.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub gt: Image,
    pub turbulent: FrameSequence,
    pub events: EventStream,
    pub seed: u64,
}

impl Sample {
    pub fn new(
        id: impl Into<String>,
        gt: Image,
        turbulent: FrameSequence,
        events: EventStream,
        seed: u64,
    ) -> Result<Self> {
        let sample = Self {
            id: id.into(),
            gt,
            turbulent,
            events,
            seed,
        };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains(['/', '\\']) {
            return Err(Error::validation(format!("bad sample id {:?}", self.id)));
        }
        self.gt
            .ensure_same_dims(&self.turbulent.frames()[0])
            .map_err(|e| Error::validation(format!("gt vs frames: {e}")))?;
        if self.events.width() as usize != self.gt.width()
            || self.events.height() as usize != self.gt.height()
        {
            return Err(Error::validation("event sensor size differs from frame size"));
        }
        if self.events.duration_us() != self.turbulent.duration_us() {
            return Err(Error::validation(format!(
                "event duration {} != n_frames * frame_interval {}",
                self.events.duration_us(),
                self.turbulent.duration_us()
            )));
        }
        Ok(())
    }

    pub fn meta(&self) -> SampleMeta {
        SampleMeta {
            n_frames: self.turbulent.len(),
            frame_interval_us: self.turbulent.frame_interval_us(),
            width: self.gt.width(),
            height: self.gt.height(),
            channels: self.gt.channels(),
            seed: self.seed,
        }
    }
}

/// Contents of `meta.json`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleMeta {
    pub n_frames: usize,
    pub frame_interval_us: u64,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub seed: u64,
}

pub const SAMPLE_DIR_PREFIX: &str = "sample_";

pub fn sample_dir_name(id: &str) -> String {
    format!("{SAMPLE_DIR_PREFIX}{id}")
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:02}.png")
}

/// Writes `sample` into `dir` (the `sample_<id>` directory itself).
pub fn save_sample(sample: &Sample, dir: &Path) -> Result<()> {
    sample.validate()?;
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;

    sample.gt.save_png(&dir.join("gt.png"))?;
    for (i, frame) in sample.turbulent.frames().iter().enumerate() {
        frame.save_png(&frames_dir.join(frame_file_name(i)))?;
    }
    let stamps: String = sample
        .turbulent
        .timestamps()
        .iter()
        .map(|t| format!("{t}\n"))
        .collect();
    write_file(&frames_dir.join("timestamps.txt"), stamps.as_bytes())?;
    sample.events.save_csv(&dir.join("events.csv"))?;
    let meta = serde_json::to_string_pretty(&sample.meta())
        .map_err(|e| Error::validation(e.to_string()))?;
    write_file(&dir.join("meta.json"), format!("{meta}\n").as_bytes())
}

/// Reads and validates a sample directory. The id is the directory name minus `sample_`.
pub fn load_sample(dir: &Path) -> Result<Sample> {
    let meta_path = dir.join("meta.json");
    let meta_text = read_text(&meta_path)?;
    let meta: SampleMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::validation(format!("{}: {e}", meta_path.display())))?;

    let gt = Image::load_png(&dir.join("gt.png"))?;
    if (gt.width(), gt.height(), gt.channels()) != (meta.width, meta.height, meta.channels) {
        return Err(Error::validation(format!(
            "gt.png is {}x{}x{}, meta.json says {}x{}x{}",
            gt.width(),
            gt.height(),
            gt.channels(),
            meta.width,
            meta.height,
            meta.channels
        )));
    }

    let frames_dir = dir.join("frames");
    let frames = (0..meta.n_frames)
        .map(|i| Image::load_png(&frames_dir.join(frame_file_name(i))))
        .collect::<Result<Vec<_>>>()?;
    let turbulent = FrameSequence::new(frames, meta.frame_interval_us)?;

    let stamps_path = frames_dir.join("timestamps.txt");
    let stamps = read_text(&stamps_path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<u64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::validation(format!("{}: {e}", stamps_path.display())))?;
    if stamps != turbulent.timestamps() {
        return Err(Error::validation(format!(
            "{}: expected k * {} for k < {}",
            stamps_path.display(),
            meta.frame_interval_us,
            meta.n_frames
        )));
    }

    let events = EventStream::load_csv(
        &dir.join("events.csv"),
        turbulent.duration_us(),
        meta.width as u32,
        meta.height as u32,
    )?;

    let name = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::validation(format!("{}: no directory name", dir.display())))?;
    let id = name.strip_prefix(SAMPLE_DIR_PREFIX).unwrap_or(name);
    Sample::new(id, gt, turbulent, events, meta.seed)
}

/// All `sample_*` subdirectories of `root`, sorted by name.
pub fn list_sample_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        let is_sample = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with(SAMPLE_DIR_PREFIX));
        if is_sample && path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

pub fn load_dataset(root: &Path) -> Result<Vec<Sample>> {
    let dirs = list_sample_dirs(root)?;
    if dirs.is_empty() {
        return Err(Error::validation(format!("{}: no sample_* directories", root.display())));
    }
    dirs.iter().map(|d| load_sample(d)).collect()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
