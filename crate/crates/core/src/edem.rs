//! Event distribution encoding: sparse events to a dense `B x H x W` count grid.

use std::path::Path;

use crate::data::EventStream;
use crate::error::{Error, Result};

pub const EVXL_MAGIC: &[u8; 4] = b"EVXL";
pub const EVXL_VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VoxelConfig {
    pub bins: usize,
    pub duration_us: u64,
}

impl VoxelConfig {
    pub fn new(bins: usize, duration_us: u64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::validation("voxel needs at least one bin"));
        }
        if duration_us == 0 {
            return Err(Error::validation("voxel duration must be positive"));
        }
        Ok(Self { bins, duration_us })
    }

    /// `bins = 4 * n_frames`, the default temporal resolution.
    pub fn for_frames(n_frames: usize, duration_us: u64) -> Result<Self> {
        Self::new(4 * n_frames, duration_us)
    }

    /// Bin length `duration / bins` in microseconds.
    pub fn bin_width_us(&self) -> f64 {
        self.duration_us as f64 / self.bins as f64
    }

    /// `floor(t / dt)` computed exactly in integers; `t = duration` lands in the last bin.
    #[inline]
    pub fn bin_of(&self, t_us: u64) -> usize {
        let b = (t_us as u128 * self.bins as u128 / self.duration_us as u128) as usize;
        b.min(self.bins - 1)
    }
}

/// Non-negative per-bin event counts, bin-major then row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EventVoxel {
    bins: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl EventVoxel {
    pub fn zeros(bins: usize, height: usize, width: usize) -> Self {
        Self {
            bins,
            height,
            width,
            data: vec![0.0; bins * height * width],
        }
    }

    pub fn from_data(bins: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != bins * height * width {
            return Err(Error::shape(format!(
                "voxel {bins}x{height}x{width} needs {} values, got {}",
                bins * height * width,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::validation(format!("voxel entry {v} is not a count")));
        }
        Ok(Self {
            bins,
            height,
            width,
            data,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, b: usize, y: usize, x: usize) -> f32 {
        self.data[(b * self.height + y) * self.width + x]
    }

    pub fn bin(&self, b: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[b * n..(b + 1) * n]
    }

    pub fn total(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v)).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(18 + 4 * self.data.len());
        out.extend_from_slice(EVXL_MAGIC);
        out.extend_from_slice(&EVXL_VERSION.to_le_bytes());
        for d in [self.bins, self.height, self.width] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 18 || &bytes[..4] != EVXL_MAGIC {
            return Err(Error::validation("not an EVXL voxel file"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != EVXL_VERSION {
            return Err(Error::validation(format!("unsupported EVXL version {version}")));
        }
        let dim = |i: usize| {
            let o = 6 + 4 * i;
            u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize
        };
        let (bins, height, width) = (dim(0), dim(1), dim(2));
        let count = bins
            .checked_mul(height)
            .and_then(|n| n.checked_mul(width))
            .ok_or_else(|| Error::validation("EVXL dimensions overflow"))?;
        let payload = &bytes[18..];
        if payload.len() != 4 * count {
            return Err(Error::validation(format!(
                "EVXL payload has {} bytes, expected {}",
                payload.len(),
                4 * count
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_data(bins, height, width, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Counts events per `(bin, y, x)`. Polarity does not contribute.
pub fn voxelize(stream: &EventStream, config: &VoxelConfig) -> Result<EventVoxel> {
    let (w, h) = (stream.width() as usize, stream.height() as usize);
    let mut voxel = EventVoxel::zeros(config.bins, h, w);
    for e in stream.events() {
        let (x, y) = (e.x as usize, e.y as usize);
        if x >= w || y >= h {
            return Err(Error::validation(format!("event at ({x}, {y}) outside {w}x{h}")));
        }
        let b = config.bin_of(e.t_us);
        voxel.data[(b * h + y) * w + x] += 1.0;
    }
    Ok(voxel)
}

/// Sums each frame's `B / N` consecutive bins, giving an `N x H x W` density.
pub fn frame_density(voxel: &EventVoxel, n_frames: usize) -> Result<EventVoxel> {
    if n_frames == 0 || voxel.bins % n_frames != 0 {
        return Err(Error::validation(format!(
            "{} bins cannot be split evenly over {n_frames} frames",
            voxel.bins
        )));
    }
    let per_frame = voxel.bins / n_frames;
    let plane = voxel.height * voxel.width;
    let mut out = EventVoxel::zeros(n_frames, voxel.height, voxel.width);
    for i in 0..n_frames {
        let dst = &mut out.data[i * plane..(i + 1) * plane];
        for b in i * per_frame..(i + 1) * per_frame {
            for (d, s) in dst.iter_mut().zip(voxel.bin(b)) {
                *d += s;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Event, Polarity};

    #[test]
    fn empty_stream_gives_zero_voxel() {
        let s = EventStream::empty(1000, 8, 8).unwrap();
        let v = voxelize(&s, &VoxelConfig::new(4, 1000).unwrap()).unwrap();
        assert!(v.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_event_lands_in_its_bin() {
        // dt = 250, t = 0.5 dt
        let s = EventStream::new(vec![Event::new(125, 3, 2, Polarity::Off)], 1000, 8, 8).unwrap();
        let v = voxelize(&s, &VoxelConfig::new(4, 1000).unwrap()).unwrap();
        assert_eq!(v.get(0, 2, 3), 1.0);
        assert_eq!(v.total(), 1.0);
    }

    #[test]
    fn endpoint_clamps_to_last_bin() {
        let cfg = VoxelConfig::new(4, 1000).unwrap();
        assert_eq!(cfg.bin_of(1000), 3);
        assert_eq!(cfg.bin_of(999), 3);
        assert_eq!(cfg.bin_of(750), 3);
        assert_eq!(cfg.bin_of(749), 2);
        // non-divisible duration: dt = 1000/3
        let odd = VoxelConfig::new(3, 1000).unwrap();
        assert_eq!(odd.bin_of(333), 0);
        assert_eq!(odd.bin_of(334), 1);
        assert_eq!(odd.bin_of(667), 2);
    }

    #[test]
    fn frame_density_groups_bins() {
        let mut v = EventVoxel::zeros(8, 2, 3);
        for (i, x) in v.data.iter_mut().enumerate() {
            *x = (i % 5) as f32;
        }
        let d = frame_density(&v, 2).unwrap();
        for i in 0..2 {
            for y in 0..2 {
                for x in 0..3 {
                    let expected: f32 = (4 * i..4 * i + 4).map(|b| v.get(b, y, x)).sum();
                    assert_eq!(d.get(i, y, x), expected);
                }
            }
        }
        assert!(frame_density(&v, 3).is_err());
    }

    #[test]
    fn first_bin_only_concentrates_in_first_frame() {
        let mut v = EventVoxel::zeros(44, 4, 4);
        v.data[..16].iter_mut().for_each(|x| *x = 2.0);
        let d = frame_density(&v, 11).unwrap();
        assert!(d.bin(0).iter().all(|&x| x == 2.0));
        assert!(d.data()[16..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn evxl_layout_and_round_trip() {
        let v = EventVoxel::from_data(2, 1, 2, vec![1.0, 0.0, 3.0, 2.0]).unwrap();
        let bytes = v.to_bytes();
        assert_eq!(&bytes[..4], b"EVXL");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..10], &[2, 0, 0, 0]);
        assert_eq!(&bytes[10..14], &[1, 0, 0, 0]);
        assert_eq!(&bytes[14..18], &[2, 0, 0, 0]);
        assert_eq!(&bytes[18..22], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[26..30], &3.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 18 + 16);
        assert_eq!(EventVoxel::from_bytes(&bytes).unwrap(), v);
        assert!(EventVoxel::from_bytes(&bytes[..20]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(EventVoxel::from_bytes(&bad).is_err());
    }
}
