use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `width × height × channels` grid of linear-light `f32` samples,
/// stored row-major with channels interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Frame {
    /// Builds a frame, checking the buffer length and that every sample is finite.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::InvalidArgument(format!(
                "frame dimensions must be positive, got {width}x{height}x{channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "buffer holds {} samples, {width}x{height}x{channels} needs {expected}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Internal constructor for buffers produced by kernels over finite inputs.
    pub(crate) fn from_raw(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::filled(width, height, channels, 0.0)
    }

    /// Evaluates `f(x, y, c)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Number of samples in one row (`width * channels`).
    #[inline]
    pub fn row_len(&self) -> usize {
        self.width * self.channels
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[f32] {
        let n = self.row_len();
        &self.data[y * n..(y + 1) * n]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn ensure_same_shape(&self, other: &Frame, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    /// Applies `f` to every sample; fails if the result is not finite.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Frame> {
        Frame::new(
            self.width,
            self.height,
            self.channels,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Rec. 601 luma for 3-channel frames; 1-channel frames are returned as is.
    pub fn to_luma(&self) -> Result<Frame> {
        match self.channels {
            1 => Ok(self.clone()),
            3 => {
                let data = self
                    .data
                    .chunks_exact(3)
                    .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) as f32)
                    .collect();
                Ok(Frame::from_raw(self.width, self.height, 1, data))
            }
            c => Err(Error::InvalidArgument(format!(
                "luma conversion needs 1 or 3 channels, got {c}"
            ))),
        }
    }
}

/// Uniformly timed frames; frame `k` is the instantaneous global-shutter
/// image at `t0 + k * dt`.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    dt: f64,
    t0: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, dt: f64, t0: f64) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a sequence needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("frame interval must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidArgument("start time must be finite".into()));
        }
        for (k, f) in frames.iter().enumerate().skip(1) {
            frames[0].ensure_same_shape(f, &format!("frame {k} vs frame 0"))?;
        }
        Ok(Self { frames, dt, t0 })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Timestamp of the last frame.
    pub fn t_end(&self) -> f64 {
        self.t0 + (self.frames.len() - 1) as f64 * self.dt
    }

    pub fn time_of(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
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

    /// Framewise `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f32, other: &FrameSequence, beta: f32) -> Result<FrameSequence> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch("sequences differ in length".into()));
        }
        let frames = self
            .frames
            .iter()
            .zip(&other.frames)
            .map(|(a, b)| {
                a.ensure_same_shape(b, "combine")?;
                Frame::new(
                    a.width(),
                    a.height(),
                    a.channels(),
                    a.data().iter().zip(b.data()).map(|(x, y)| alpha * x + beta * y).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        FrameSequence::new(frames, self.dt, self.t0)
    }
}

/// Rolling-shutter timing: per-row readout offset `t_r` and exposure `t_e`, in seconds.
///
/// The half-frame offset `t_m = (M / 2) * t_r` depends on the row count `M`
/// of the frame it is applied to, so it is always derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShutterParams {
    t_r: f64,
    t_e: f64,
}

impl ShutterParams {
    pub fn new(t_r: f64, t_e: f64) -> Result<Self> {
        for (name, v) in [("readout time", t_r), ("exposure time", t_e)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(Self { t_r, t_e })
    }

    pub fn t_r(&self) -> f64 {
        self.t_r
    }

    pub fn t_e(&self) -> f64 {
        self.t_e
    }

    pub fn t_m(&self, rows: usize) -> f64 {
        rows as f64 / 2.0 * self.t_r
    }

    /// Mid-exposure time of row `i` for a frame whose middle row is exposed at `t`.
    pub fn row_time(&self, t: f64, i: usize, rows: usize) -> f64 {
        t - self.t_m(rows) + i as f64 * self.t_r
    }

    /// Offset that moves row `i` back to the middle-row time: `t_m - i * t_r`.
    pub fn row_offset(&self, i: usize, rows: usize) -> f64 {
        self.t_m(rows) - i as f64 * self.t_r
    }
}
