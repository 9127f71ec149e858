use crate::error::{Error, Result};
use crate::imagecore::Frame;

/// Per-pixel displacement `(u, v)` in pixels, stored interleaved row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DisplacementField {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("field dimensions must be positive".into()));
        }
        if data.len() != width * height * 2 {
            return Err(Error::DimensionMismatch(format!(
                "field buffer holds {} values, {width}x{height} needs {}",
                data.len(),
                width * height * 2
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { width, height, data })
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), width * height * 2);
        Self { width, height, data }
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::constant(width, height, 0.0, 0.0)
    }

    pub fn constant(width: usize, height: usize, u: f32, v: f32) -> Result<Self> {
        Self::from_fn(width, height, |_, _| (u, v))
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> (f32, f32)) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 2);
        for y in 0..height {
            for x in 0..width {
                let (u, v) = f(x, y);
                data.push(u);
                data.push(v);
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f32, f32) {
        let i = 2 * (y * self.width + x);
        (self.data[i], self.data[i + 1])
    }

    /// Multiplies every vector by `s`.
    pub fn scaled(&self, s: f32) -> Result<Self> {
        Self::new(self.width, self.height, self.data.iter().map(|v| v * s).collect())
    }

    /// Mean vector length.
    pub fn mean_magnitude(&self) -> f64 {
        let sum: f64 = self
            .data
            .chunks_exact(2)
            .map(|p| (p[0] as f64).hypot(p[1] as f64))
            .sum();
        sum / (self.width * self.height) as f64
    }

    pub(crate) fn ensure_matches(&self, frame: &Frame, what: &str) -> Result<()> {
        if self.width == frame.width() && self.height == frame.height() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: field is {}x{}, frame is {}x{}",
                self.width,
                self.height,
                frame.width(),
                frame.height()
            )))
        }
    }
}

/// Per-pixel coverage weight in `[0, 1]`; zero marks holes.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityMask {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl ValidityMask {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "mask buffer holds {} values, {width}x{height} needs {}",
                data.len(),
                width * height
            )));
        }
        if let Some(index) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::OutOfRange {
                index,
                value: data[index],
            });
        }
        Ok(Self { width, height, data })
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f32>) -> Self {
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self { width, height, data }
    }

    pub fn ones(width: usize, height: usize) -> Self {
        Self::from_raw(width, height, vec![1.0; width * height])
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::from_raw(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Fraction of pixels with full weight.
    pub fn coverage(&self) -> f64 {
        self.data.iter().filter(|&&v| v >= 1.0).count() as f64 / self.data.len() as f64
    }
}
