use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::color::{linear_to_srgb, srgb_to_linear, Transfer};
use crate::imagecore::{Frame, FrameSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BitDepth {
    #[serde(rename = "8")]
    Eight,
    #[serde(rename = "16")]
    Sixteen,
}

impl BitDepth {
    pub fn max_code(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }

    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            b => Err(Error::InvalidArgument(format!("bit depth must be 8 or 16, got {b}"))),
        }
    }
}

/// Loads an 8/16-bit grayscale or RGB PNG as a linear-light frame.
pub fn load_image(path: impl AsRef<Path>, transfer: Transfer) -> Result<Frame> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    if reader.format() != Some(ImageFormat::Png) {
        return Err(Error::UnsupportedFormat(format!("{}: not a PNG file", path.display())));
    }
    let img = reader.decode().map_err(|source| Error::Image {
        path: path.to_owned(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, scale, codes): (usize, f64, Vec<u16>) = match img {
        DynamicImage::ImageLuma8(b) => (1, 255.0, b.into_raw().into_iter().map(u16::from).collect()),
        DynamicImage::ImageRgb8(b) => (3, 255.0, b.into_raw().into_iter().map(u16::from).collect()),
        DynamicImage::ImageLuma16(b) => (1, 65535.0, b.into_raw()),
        DynamicImage::ImageRgb16(b) => (3, 65535.0, b.into_raw()),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: unsupported color type {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let data = codes
        .into_iter()
        .map(|c| {
            let v = c as f64 / scale;
            match transfer {
                Transfer::Linear => v as f32,
                Transfer::Srgb => srgb_to_linear(v) as f32,
            }
        })
        .collect();
    Frame::new(w, h, channels, data)
}

/// Quantizes one linear sample to a code value of the given depth.
pub fn encode_sample(v: f32, transfer: Transfer, depth: BitDepth) -> u16 {
    let v = (v as f64).clamp(0.0, 1.0);
    let e = match transfer {
        Transfer::Linear => v,
        Transfer::Srgb => linear_to_srgb(v),
    };
    (e * depth.max_code()).round() as u16
}

/// Encodes a 1- or 3-channel frame as PNG bytes; samples are clamped to `[0, 1]`.
pub fn encode_png(frame: &Frame, transfer: Transfer, depth: BitDepth) -> Result<Vec<u8>> {
    let (w, h) = (frame.width() as u32, frame.height() as u32);
    let codes = frame.data().iter().map(|&v| encode_sample(v, transfer, depth));
    let img: DynamicImage = match (frame.channels(), depth) {
        (1, BitDepth::Eight) => {
            DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w, h, codes.map(|c| c as u8).collect()).unwrap())
        }
        (3, BitDepth::Eight) => {
            DynamicImage::ImageRgb8(ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, codes.map(|c| c as u8).collect()).unwrap())
        }
        (1, BitDepth::Sixteen) => {
            DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w, h, codes.collect()).unwrap())
        }
        (3, BitDepth::Sixteen) => {
            DynamicImage::ImageRgb16(ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, codes.collect()).unwrap())
        }
        (c, _) => {
            return Err(Error::InvalidArgument(format!(
                "PNG output needs 1 or 3 channels, got {c}"
            )))
        }
    };
    let mut bytes = std::io::Cursor::new(Vec::new());
    img.write_to(&mut bytes, ImageFormat::Png).map_err(|source| Error::Image {
        path: PathBuf::from("<memory>"),
        source,
    })?;
    Ok(bytes.into_inner())
}

/// Writes a 1- or 3-channel frame as PNG; samples are clamped to `[0, 1]`.
pub fn save_image(frame: &Frame, path: impl AsRef<Path>, transfer: Transfer, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_png(frame, transfer, depth)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// On-disk description of a frame sequence. Frame paths are relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceManifest {
    pub dt_s: f64,
    pub t0_s: f64,
    pub frames: Vec<PathBuf>,
}

impl SequenceManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.to_string()))
    }
}

/// Loads every frame listed in a sequence manifest, in order.
pub fn load_sequence(manifest_path: impl AsRef<Path>, transfer: Transfer) -> Result<FrameSequence> {
    let manifest_path = manifest_path.as_ref();
    let manifest = SequenceManifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let frames = manifest
        .frames
        .iter()
        .map(|p| load_image(base.join(p), transfer))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, manifest.dt_s, manifest.t0_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Scalar sRGB decode written out independently of the module under test.
    fn reference_eotf(code: u8) -> f64 {
        let c = code as f64 / 255.0;
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    }

    fn write_gray8(path: &Path, values: &[u8], w: u32, h: u32) {
        ImageBuffer::<Luma<u8>, _>::from_raw(w, h, values.to_vec())
            .unwrap()
            .save_with_format(path, ImageFormat::Png)
            .unwrap();
    }

    #[test]
    fn load_scales_codes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.png");
        write_gray8(&p, &[255, 0, 128], 3, 1);
        let lin = load_image(&p, Transfer::Linear).unwrap();
        assert_eq!(lin.data()[0], 1.0);
        let srgb = load_image(&p, Transfer::Srgb).unwrap();
        assert_eq!(srgb.data()[1], 0.0);
        let expected = reference_eotf(128);
        assert!((expected - 0.2158).abs() < 1e-4);
        assert!((srgb.data()[2] as f64 - expected).abs() < 1e-7);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_image(dir.path().join("missing.png"), Transfer::Linear),
            Err(Error::Io { .. })
        ));
        let bad = dir.path().join("bad.png");
        fs::write(&bad, b"\x89PNG\r\n\x1a\nnot really").unwrap();
        assert!(load_image(&bad, Transfer::Linear).is_err());
        let rgba = dir.path().join("rgba.png");
        ImageBuffer::<image::Rgba<u8>, _>::from_raw(1, 1, vec![1, 2, 3, 4])
            .unwrap()
            .save_with_format(&rgba, ImageFormat::Png)
            .unwrap();
        assert!(matches!(
            load_image(&rgba, Transfer::Linear),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn sixteen_bit_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("half.png");
        let f = Frame::filled(5, 4, 3, 0.5).unwrap();
        save_image(&f, &p, Transfer::Linear, BitDepth::Sixteen).unwrap();
        let r = load_image(&p, Transfer::Linear).unwrap();
        assert!(r.data().iter().all(|v| (v - 0.5).abs() <= 1.0 / 65535.0));
    }

    #[test]
    fn black_writes_zero_codes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("black.png");
        save_image(&Frame::zeros(3, 3, 1).unwrap(), &p, Transfer::Srgb, BitDepth::Eight).unwrap();
        let img = image::open(&p).unwrap().into_luma8();
        assert!(img.into_raw().iter().all(|&c| c == 0));
    }

    #[test]
    fn eight_bit_srgb_within_one_step() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rand.png");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = Frame::from_fn(16, 16, 3, |_, _, _| rng.random::<f32>()).unwrap();
        save_image(&f, &p, Transfer::Srgb, BitDepth::Eight).unwrap();
        let r = load_image(&p, Transfer::Srgb).unwrap();
        for (&orig, &back) in f.data().iter().zip(r.data()) {
            // Width of the linear-light interval between the neighboring codes
            // on either side of the stored one.
            let code = encode_sample(orig, Transfer::Srgb, BitDepth::Eight) as u8;
            let lo = reference_eotf(code.saturating_sub(1));
            let hi = reference_eotf(code.saturating_add(1));
            let here = reference_eotf(code);
            let step = (here - lo).max(hi - here);
            assert!(((orig - back).abs() as f64) <= step + 1e-7, "{orig} -> {back}");
        }
    }

    #[test]
    fn rejects_bad_channel_count() {
        let dir = tempfile::tempdir().unwrap();
        let f = Frame::zeros(2, 2, 2).unwrap();
        assert!(save_image(&f, dir.path().join("x.png"), Transfer::Linear, BitDepth::Eight).is_err());
        assert!(save_image(
            &Frame::zeros(2, 2, 1).unwrap(),
            dir.path().join("no/such/dir/x.png"),
            Transfer::Linear,
            BitDepth::Eight
        )
        .is_err());
    }

    #[test]
    fn clamps_on_save() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        let f = Frame::new(2, 1, 1, vec![-0.5, 1.5]).unwrap();
        save_image(&f, &p, Transfer::Linear, BitDepth::Eight).unwrap();
        assert_eq!(load_image(&p, Transfer::Linear).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn sequence_manifest_order() {
        let dir = tempfile::tempdir().unwrap();
        write_gray8(&dir.path().join("b.png"), &[0; 4], 2, 2);
        write_gray8(&dir.path().join("a.png"), &[255; 4], 2, 2);
        fs::write(
            dir.path().join("seq.json"),
            r#"{"dt_s": 0.01, "t0_s": 2.0, "frames": ["a.png", "b.png"]}"#,
        )
        .unwrap();
        let s = load_sequence(dir.path().join("seq.json"), Transfer::Linear).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.frames()[0].data()[0], 1.0);
        assert_eq!(s.frames()[1].data()[0], 0.0);
        assert_eq!(s.t0(), 2.0);

        fs::write(
            dir.path().join("extra.json"),
            r#"{"dt_s": 0.01, "t0_s": 0, "frames": [], "fps": 3}"#,
        )
        .unwrap();
        assert!(load_sequence(dir.path().join("extra.json"), Transfer::Linear).is_err());
    }
}
