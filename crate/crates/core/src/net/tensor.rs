use crate::data::Image;
use crate::edem::EventVoxel;
use crate::error::{Error, Result};

/// Factor applied to raw event counts when they enter the network.
///
/// Keeps the first guidance layer in a range where its ReLUs stay active for
/// typical counts of a few events per bin.
pub const VOXEL_INPUT_SCALE: f64 = 0.25;

/// Dense `batch x channels x height x width` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            n,
            c,
            h,
            w,
            data: vec![0.0; n * c * h * w],
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || c == 0 || h == 0 || w == 0 {
            return Err(Error::shape(format!("tensor dims must be positive: {n}x{c}x{h}x{w}")));
        }
        if data.len() != n * c * h * w {
            return Err(Error::shape(format!(
                "tensor {n}x{c}x{h}x{w} needs {} values, got {}",
                n * c * h * w,
                data.len()
            )));
        }
        Ok(Self { n, c, h, w, data })
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    #[inline]
    pub fn index(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        ((b * self.c + c) * self.h + y) * self.w + x
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(b, c, y, x)]
    }

    pub fn plane(&self, b: usize, c: usize) -> &[f64] {
        let p = self.plane_len();
        let start = (b * self.c + c) * p;
        &self.data[start..start + p]
    }

    pub fn plane_mut(&mut self, b: usize, c: usize) -> &mut [f64] {
        let p = self.plane_len();
        let start = (b * self.c + c) * p;
        &mut self.data[start..start + p]
    }

    /// All channels of batch item `b`.
    pub fn item(&self, b: usize) -> &[f64] {
        let len = self.c * self.plane_len();
        &self.data[b * len..(b + 1) * len]
    }

    pub fn same_shape(&self, other: &Tensor4) -> bool {
        self.dims() == other.dims()
    }

    pub fn ensure_shape(&self, dims: [usize; 4], what: &str) -> Result<()> {
        if self.dims() == dims {
            Ok(())
        } else {
            Err(Error::shape(format!("{what}: expected {dims:?}, got {:?}", self.dims())))
        }
    }

    /// Concatenates along the batch axis.
    pub fn stack(items: &[Tensor4]) -> Result<Tensor4> {
        let first = items
            .first()
            .ok_or_else(|| Error::shape("cannot stack zero tensors"))?;
        let mut data = Vec::with_capacity(items.len() * first.data.len());
        for t in items {
            if [t.c, t.h, t.w] != [first.c, first.h, first.w] {
                return Err(Error::shape("stacked tensors differ in shape"));
            }
            data.extend_from_slice(&t.data);
        }
        let n = items.iter().map(|t| t.n).sum();
        Tensor4::from_vec(n, first.c, first.h, first.w, data)
    }

    /// Channel-first copy of an image, batch of one.
    pub fn from_image(image: &Image) -> Tensor4 {
        let (w, h, ch) = (image.width(), image.height(), image.channels());
        let mut data = Vec::with_capacity(w * h * ch);
        for c in 0..ch {
            data.extend(image.plane(c));
        }
        Tensor4 {
            n: 1,
            c: ch,
            h,
            w,
            data,
        }
    }

    /// Frames stacked frame-major: channel `i * C + c` is channel `c` of frame `i`.
    pub fn from_frames(frames: &[Image]) -> Result<Tensor4> {
        let first = frames
            .first()
            .ok_or_else(|| Error::shape("no frames to stack"))?;
        let mut data = Vec::with_capacity(frames.len() * first.data().len());
        for f in frames {
            first.ensure_same_dims(f)?;
            for c in 0..f.channels() {
                data.extend(f.plane(c));
            }
        }
        Tensor4::from_vec(
            1,
            frames.len() * first.channels(),
            first.height(),
            first.width(),
            data,
        )
    }

    /// Voxel counts scaled by [`VOXEL_INPUT_SCALE`].
    pub fn from_voxel(voxel: &EventVoxel) -> Tensor4 {
        Tensor4 {
            n: 1,
            c: voxel.bins(),
            h: voxel.height(),
            w: voxel.width(),
            data: voxel.data().iter().map(|&v| VOXEL_INPUT_SCALE * f64::from(v)).collect(),
        }
    }

    /// Batch item `b` as an image, clamping into `[0, 1]`.
    pub fn to_image(&self, b: usize) -> Result<Image> {
        let planes: Vec<Vec<f64>> = (0..self.c).map(|c| self.plane(b, c).to_vec()).collect();
        Image::from_planes(self.w, self.h, &planes)
    }
}
