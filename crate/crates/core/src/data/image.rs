use std::path::Path;

use crate::error::{Error, Result};

/// Intensity raster with values in `[0, 1]`, stored row-major and channel-last.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub const MIN_SIDE: usize = 8;

    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, channels)?;
        if data.len() != width * height * channels {
            return Err(Error::shape(format!(
                "image {width}x{height}x{channels} needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::validation(format!("image value {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image from arbitrary values, clamping into `[0, 1]` (NaN maps to 0).
    pub fn from_clamped(
        width: usize,
        height: usize,
        channels: usize,
        mut data: Vec<f64>,
    ) -> Result<Self> {
        for v in &mut data {
            *v = clamp01(*v);
        }
        Self::new(width, height, channels, data)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// `f(x, y, c)` is evaluated for every sample and clamped into range.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(width, height, channels)?;
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(clamp01(f(x, y, c)));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn ensure_same_dims(&self, other: &Image) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    /// Single-channel luminance, `0.299 R + 0.587 G + 0.114 B` for colour input.
    pub fn luminance(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|px| clamp01(0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]))
            .collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Channel plane `c` as a row-major `height x width` buffer.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    /// Inverse of [`Image::plane`] over all channels; values are clamped.
    pub fn from_planes(width: usize, height: usize, planes: &[Vec<f64>]) -> Result<Image> {
        let channels = planes.len();
        check_dims(width, height, channels)?;
        let mut data = vec![0.0; width * height * channels];
        for (c, plane) in planes.iter().enumerate() {
            if plane.len() != width * height {
                return Err(Error::shape("plane length does not match image size"));
            }
            for (i, v) in plane.iter().enumerate() {
                data[i * channels + c] = clamp01(*v);
            }
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    /// 8-bit quantization `round(v * 255)`, halves rounded up.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_u8(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
        Self::new(width, height, channels, data)
    }

    /// Returns the image as it would be after an 8-bit save/load.
    pub fn quantized(&self) -> Image {
        let data = self.data.iter().map(|&v| f64::from(quantize(v)) / 255.0).collect();
        Image {
            data,
            ..self.clone()
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let color = match self.channels {
            1 => image::ExtendedColorType::L8,
            _ => image::ExtendedColorType::Rgb8,
        };
        image::save_buffer_with_format(
            path,
            &self.to_u8(),
            self.width as u32,
            self.height as u32,
            color,
            image::ImageFormat::Png,
        )
        .map_err(|e| image_error(path, e))
    }

    pub fn load_png(path: &Path) -> Result<Image> {
        let dynamic = image::open(path).map_err(|e| image_error(path, e))?;
        let (width, height) = (dynamic.width() as usize, dynamic.height() as usize);
        match dynamic {
            image::DynamicImage::ImageLuma8(buf) => Image::from_u8(width, height, 1, buf.as_raw()),
            other => Image::from_u8(width, height, 3, other.to_rgb8().as_raw()),
        }
        .map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }
}

#[inline]
pub fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

#[inline]
pub fn quantize(v: f64) -> u8 {
    (clamp01(v) * 255.0 + 0.5).floor() as u8
}

fn check_dims(width: usize, height: usize, channels: usize) -> Result<()> {
    if width < Image::MIN_SIDE || height < Image::MIN_SIDE {
        return Err(Error::validation(format!(
            "image {width}x{height} smaller than {0}x{0}",
            Image::MIN_SIDE
        )));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::validation(format!("unsupported channel count {channels}")));
    }
    Ok(())
}

fn image_error(path: &Path, err: image::ImageError) -> Error {
    match err {
        image::ImageError::IoError(source) => Error::io(path, source),
        other => Error::validation(format!("{}: {other}", path.display())),
    }
}
