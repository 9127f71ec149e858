//! Forward kernels of a deformable channel-attention block: plain and
//! deformable convolution, squeeze-and-excitation gating, and point-wise
//! bilinear sampling with its positional derivative.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagecore::Frame;
use crate::sampling::{footprint, sample_with_grad, Boundary};

/// Convolution taps laid out `[out][in][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    out_channels: usize,
    in_channels: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    taps: Vec<f32>,
}

impl ConvWeights {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        taps: Vec<f32>,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 {
            return Err(Error::InvalidArgument("channel counts must be positive".into()));
        }
        if kernel % 2 == 0 {
            return Err(Error::InvalidArgument(format!("kernel size must be odd, got {kernel}")));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be at least 1".into()));
        }
        let n = out_channels * in_channels * kernel * kernel;
        if taps.len() != n {
            return Err(Error::DimensionMismatch(format!("{} taps given, shape needs {n}", taps.len())));
        }
        if let Some(index) = taps.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            out_channels,
            in_channels,
            kernel,
            stride,
            padding,
            taps,
        })
    }

    /// 1x1 identity mapping of `channels` channels.
    pub fn identity(channels: usize) -> Result<Self> {
        let taps = (0..channels * channels)
            .map(|i| if i / channels == i % channels { 1.0 } else { 0.0 })
            .collect();
        Self::new(channels, channels, 1, 1, 0, taps)
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn taps(&self) -> &[f32] {
        &self.taps
    }

    #[inline]
    pub fn tap(&self, o: usize, i: usize, ky: usize, kx: usize) -> f32 {
        self.taps[((o * self.in_channels + i) * self.kernel + ky) * self.kernel + kx]
    }

    /// Output size along one axis of length `n`.
    pub fn output_len(&self, n: usize) -> Result<usize> {
        let padded = n + 2 * self.padding;
        if padded < self.kernel {
            return Err(Error::InvalidArgument(format!(
                "input extent {n} with padding {} is smaller than kernel {}",
                self.padding, self.kernel
            )));
        }
        Ok((padded - self.kernel) / self.stride + 1)
    }

    fn output_dims(&self, input: &Frame) -> Result<(usize, usize)> {
        if input.channels() != self.in_channels {
            return Err(Error::DimensionMismatch(format!(
                "input has {} channels, weights expect {}",
                input.channels(),
                self.in_channels
            )));
        }
        Ok((self.output_len(input.width())?, self.output_len(input.height())?))
    }
}

/// Per output location, per group, per kernel tap, a `(dx, dy)` offset.
/// Layout `[y][x][group][tap][2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetGrid {
    width: usize,
    height: usize,
    groups: usize,
    taps: usize,
    data: Vec<f32>,
}

impl OffsetGrid {
    pub fn new(width: usize, height: usize, groups: usize, taps: usize, data: Vec<f32>) -> Result<Self> {
        if groups == 0 || taps == 0 {
            return Err(Error::InvalidArgument("offset grid needs at least one group and tap".into()));
        }
        let n = width * height * groups * taps * 2;
        if data.len() != n {
            return Err(Error::DimensionMismatch(format!("{} offsets given, grid needs {n}", data.len())));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            width,
            height,
            groups,
            taps,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, groups: usize, taps: usize) -> Result<Self> {
        Self::new(width, height, groups, taps, vec![0.0; width * height * groups * taps * 2])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, g: usize, t: usize) -> (f32, f32) {
        let i = (((y * self.width + x) * self.groups + g) * self.taps + t) * 2;
        (self.data[i], self.data[i + 1])
    }
}

/// Zero-padded cross-correlation.
pub fn conv2d(input: &Frame, w: &ConvWeights) -> Result<Frame> {
    let (ow, oh) = w.output_dims(input)?;
    let zero = OffsetGrid {
        width: 0,
        height: 0,
        groups: 1,
        taps: 0,
        data: Vec::new(),
    };
    Ok(convolve(input, w, &zero, ow, oh, false))
}

/// Convolution whose taps read the input at their grid position plus a
/// per-location offset, bilinearly with zero fill. Channel `c` uses the
/// offsets of group `c / (C_in / groups)`.
pub fn deform_conv2d(input: &Frame, w: &ConvWeights, offsets: &OffsetGrid) -> Result<Frame> {
    let (ow, oh) = w.output_dims(input)?;
    let taps = w.kernel * w.kernel;
    if offsets.width != ow || offsets.height != oh || offsets.taps != taps {
        return Err(Error::DimensionMismatch(format!(
            "offset grid is {}x{} with {} taps, output is {ow}x{oh} with {taps}",
            offsets.width, offsets.height, offsets.taps
        )));
    }
    if w.in_channels % offsets.groups != 0 {
        return Err(Error::InvalidArgument(format!(
            "{} groups do not divide {} input channels",
            offsets.groups, w.in_channels
        )));
    }
    Ok(convolve(input, w, offsets, ow, oh, true))
}

fn convolve(input: &Frame, w: &ConvWeights, offsets: &OffsetGrid, ow: usize, oh: usize, deform: bool) -> Frame {
    let (iw, ih, cin) = (input.width(), input.height(), input.channels());
    let cout = w.out_channels;
    let k = w.kernel;
    let per_group = if deform { cin / offsets.groups } else { cin };
    let data = input.data();
    let rows: Vec<Vec<f32>> = (0..oh)
        .into_par_iter()
        .map(|oy| {
            let mut row = vec![0.0f32; ow * cout];
            let mut acc = vec![0.0f64; cout];
            // Sampled input values for one location, `[in][tap]`.
            let mut col = vec![0.0f64; cin * k * k];
            for ox in 0..ow {
                for ci in 0..cin {
                    let g = ci / per_group;
                    for ky in 0..k {
                        for kx in 0..k {
                            let t = ky * k + kx;
                            let bx = (ox * w.stride + kx) as f64 - w.padding as f64;
                            let by = (oy * w.stride + ky) as f64 - w.padding as f64;
                            col[ci * k * k + t] = if deform {
                                let (dx, dy) = offsets.get(ox, oy, g, t);
                                let fp = footprint(iw, ih, bx + dx as f64, by + dy as f64, Boundary::Zero);
                                let mut v = 0.0;
                                for (idx, wt) in fp.idx.iter().zip(fp.weight) {
                                    if let Some(i) = idx {
                                        v += wt * data[i * cin + ci] as f64;
                                    }
                                }
                                v
                            } else if bx >= 0.0 && by >= 0.0 && (bx as usize) < iw && (by as usize) < ih {
                                data[(by as usize * iw + bx as usize) * cin + ci] as f64
                            } else {
                                0.0
                            };
                        }
                    }
                }
                acc.iter_mut().for_each(|a| *a = 0.0);
                for (o, a) in acc.iter_mut().enumerate() {
                    let base = o * cin * k * k;
                    for (j, &v) in col.iter().enumerate() {
                        *a += w.taps[base + j] as f64 * v;
                    }
                }
                for (o, a) in acc.iter().enumerate() {
                    row[ox * cout + o] = *a as f32;
                }
            }
            row
        })
        .collect();
    Frame::from_raw(ow, oh, cout, rows.concat())
}

/// Two dense layers `C -> C/r -> C` of a squeeze-and-excitation gate.
#[derive(Debug, Clone, PartialEq)]
pub struct SeWeights {
    channels: usize,
    reduction: usize,
    /// `[hidden][channels]`.
    w1: Vec<f32>,
    b1: Vec<f32>,
    /// `[channels][hidden]`.
    w2: Vec<f32>,
    b2: Vec<f32>,
}

pub const DEFAULT_REDUCTION: usize = 16;

impl SeWeights {
    pub fn hidden_len(channels: usize, reduction: usize) -> Result<usize> {
        if reduction == 0 {
            return Err(Error::InvalidArgument("reduction ratio must be at least 1".into()));
        }
        let hidden = channels / reduction;
        if hidden == 0 {
            return Err(Error::InvalidArgument(format!(
                "{channels} channels cannot be reduced by {reduction}"
            )));
        }
        Ok(hidden)
    }

    pub fn new(channels: usize, reduction: usize, w1: Vec<f32>, b1: Vec<f32>, w2: Vec<f32>, b2: Vec<f32>) -> Result<Self> {
        let hidden = Self::hidden_len(channels, reduction)?;
        let sizes = [
            (w1.len(), hidden * channels, "w1"),
            (b1.len(), hidden, "b1"),
            (w2.len(), channels * hidden, "w2"),
            (b2.len(), channels, "b2"),
        ];
        for (got, want, name) in sizes {
            if got != want {
                return Err(Error::DimensionMismatch(format!("{name} holds {got} values, needs {want}")));
            }
        }
        if let Some(index) = w1.iter().chain(&b1).chain(&w2).chain(&b2).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            channels,
            reduction,
            w1,
            b1,
            w2,
            b2,
        })
    }

    pub fn zeros(channels: usize, reduction: usize) -> Result<Self> {
        let hidden = Self::hidden_len(channels, reduction)?;
        Self::new(
            channels,
            reduction,
            vec![0.0; hidden * channels],
            vec![0.0; hidden],
            vec![0.0; channels * hidden],
            vec![0.0; channels],
        )
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn reduction(&self) -> usize {
        self.reduction
    }

    pub fn hidden(&self) -> usize {
        self.b1.len()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-channel gates: global average pool, dense, ReLU, dense, sigmoid.
pub fn se_gates(input: &Frame, w: &SeWeights) -> Result<Vec<f64>> {
    let c = input.channels();
    if c != w.channels {
        return Err(Error::DimensionMismatch(format!(
            "input has {c} channels, attention weights expect {}",
            w.channels
        )));
    }
    let n = (input.width() * input.height()) as f64;
    let mut pooled = vec![0.0f64; c];
    for px in input.data().chunks_exact(c) {
        for (p, &v) in pooled.iter_mut().zip(px) {
            *p += v as f64;
        }
    }
    pooled.iter_mut().for_each(|p| *p /= n);
    let hidden: Vec<f64> = (0..w.hidden())
        .map(|j| {
            let z = w.b1[j] as f64 + (0..c).map(|i| w.w1[j * c + i] as f64 * pooled[i]).sum::<f64>();
            z.max(0.0)
        })
        .collect();
    Ok((0..c)
        .map(|i| {
            let z = w.b2[i] as f64 + hidden.iter().enumerate().map(|(j, h)| w.w2[i * hidden.len() + j] as f64 * h).sum::<f64>();
            sigmoid(z)
        })
        .collect())
}

/// Scales every channel by its squeeze-and-excitation gate.
pub fn se_attention(input: &Frame, w: &SeWeights) -> Result<Frame> {
    let gates = se_gates(input, w)?;
    let c = input.channels();
    let data = input
        .data()
        .chunks_exact(c)
        .flat_map(|px| px.iter().zip(&gates).map(|(&v, g)| (v as f64 * g) as f32))
        .collect();
    Frame::new(input.width(), input.height(), c, data)
}

/// Bilinear samples (zero outside the image), one C-vector per point.
pub fn bilinear_sample(input: &Frame, points: &[[f64; 2]]) -> Vec<Vec<f64>> {
    let c = input.channels();
    points
        .iter()
        .map(|p| {
            let mut v = vec![0.0; c];
            crate::sampling::sample_into(input, p[0], p[1], Boundary::Zero, &mut v);
            v
        })
        .collect()
}

/// Value and derivatives with respect to the point's x and y, per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSample {
    pub value: Vec<f64>,
    pub d_dx: Vec<f64>,
    pub d_dy: Vec<f64>,
}

pub fn bilinear_sample_grad(input: &Frame, points: &[[f64; 2]]) -> Vec<PointSample> {
    let c = input.channels();
    points
        .iter()
        .map(|p| {
            let mut s = PointSample {
                value: vec![0.0; c],
                d_dx: vec![0.0; c],
                d_dy: vec![0.0; c],
            };
            sample_with_grad(input, p[0], p[1], Boundary::Zero, &mut s.value, &mut s.d_dx, &mut s.d_dy);
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel() {
        let f = Frame::from_fn(6, 5, 3, |x, y, c| (x + 2 * y + 3 * c) as f32 / 20.0).unwrap();
        assert_eq!(conv2d(&f, &ConvWeights::identity(3).unwrap()).unwrap(), f);
    }

    #[test]
    fn box_sum() {
        let f = Frame::filled(6, 6, 1, 1.0).unwrap();
        let w = ConvWeights::new(1, 1, 3, 1, 1, vec![1.0; 9]).unwrap();
        let out = conv2d(&f, &w).unwrap();
        assert_eq!((out.width(), out.height()), (6, 6));
        for y in 1..5 {
            for x in 1..5 {
                assert_eq!(out.get(x, y, 0), 9.0);
            }
        }
        assert_eq!(out.get(0, 0, 0), 4.0);
    }

    #[test]
    fn stride_arithmetic() {
        let w = ConvWeights::new(2, 1, 3, 2, 1, vec![0.0; 18]).unwrap();
        assert_eq!(w.output_len(8).unwrap(), 4);
        assert_eq!(w.output_len(7).unwrap(), 4);
        let w = ConvWeights::new(1, 1, 5, 1, 0, vec![0.0; 25]).unwrap();
        assert!(w.output_len(4).is_err());
        assert!(ConvWeights::new(1, 1, 2, 1, 0, vec![0.0; 4]).is_err());
        assert!(ConvWeights::new(1, 1, 1, 0, 0, vec![0.0; 1]).is_err());
    }

    #[test]
    fn unit_offset_shifts_left() {
        let f = Frame::from_fn(5, 3, 2, |x, y, c| (1 + x + 5 * y + 15 * c) as f32).unwrap();
        let w = ConvWeights::identity(2).unwrap();
        let off = OffsetGrid::new(5, 3, 1, 1, [1.0f32, 0.0].repeat(15)).unwrap();
        let out = deform_conv2d(&f, &w, &off).unwrap();
        for y in 0..3 {
            for x in 0..5 {
                for c in 0..2 {
                    let e = if x + 1 < 5 { f.get(x + 1, y, c) } else { 0.0 };
                    assert_eq!(out.get(x, y, c), e);
                }
            }
        }
    }

    #[test]
    fn deform_shape_checks() {
        let f = Frame::zeros(6, 6, 4).unwrap();
        let w = ConvWeights::new(2, 4, 3, 1, 1, vec![0.0; 72]).unwrap();
        assert!(deform_conv2d(&f, &w, &OffsetGrid::zeros(6, 6, 3, 9).unwrap()).is_err());
        assert!(deform_conv2d(&f, &w, &OffsetGrid::zeros(5, 6, 2, 9).unwrap()).is_err());
        assert!(deform_conv2d(&f, &w, &OffsetGrid::zeros(6, 6, 2, 9).unwrap()).is_ok());
        assert!(conv2d(&Frame::zeros(6, 6, 3).unwrap(), &w).is_err());
    }

    #[test]
    fn se_closed_forms() {
        let f = Frame::from_fn(4, 4, 16, |x, y, c| (x + y + c) as f32 / 40.0).unwrap();
        let out = se_attention(&f, &SeWeights::zeros(16, 16).unwrap()).unwrap();
        for (o, i) in out.data().iter().zip(f.data()) {
            assert_eq!(*o, i * 0.5);
        }
        let z = Frame::zeros(4, 4, 16).unwrap();
        let w = SeWeights::new(16, 4, vec![0.3; 64], vec![0.1; 4], vec![-0.7; 64], vec![0.2; 16]).unwrap();
        assert!(se_attention(&z, &w).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(SeWeights::zeros(8, 16).is_err());
        assert!(se_attention(&Frame::zeros(2, 2, 8).unwrap(), &w).is_err());
    }

    #[test]
    fn point_samples() {
        let f = Frame::from_fn(3, 3, 1, |x, y, _| (x * 10 + y) as f32).unwrap();
        assert_eq!(bilinear_sample(&f, &[[2.0, 1.0]])[0], vec![21.0]);
        let split = Frame::from_fn(2, 2, 1, |_, y, _| y as f32).unwrap();
        assert_eq!(bilinear_sample(&split, &[[0.5, 0.5]])[0], vec![0.5]);
        assert_eq!(bilinear_sample(&split, &[[-5.0, 0.5]])[0], vec![0.0]);
    }
}
