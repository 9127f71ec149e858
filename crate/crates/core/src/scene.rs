//! Procedural, seed-deterministic test scenes.
//!
//! Every generator is a continuous function of position and time, so a
//! sequence at any frame rate and the global-shutter image at any instant
//! come from the same underlying motion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{Frame, FrameSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// Smooth sum of random sinusoids, translating.
    Pan,
    /// Random dark strokes on a light page, rotating about the center.
    RotonlyText,
    /// Affine intensity ramp, translating; intensity is linear in time.
    Ramp,
    /// Hard-edged checkerboard, translating.
    Checker,
    /// Bilinearly interpolated white-noise lattice, translating.
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticScene {
    pub kind: SceneKind,
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
    /// Frames per second of the rendered sequence.
    pub fps: f64,
    pub frames: usize,
    /// Translation in pixels per second.
    #[serde(default)]
    pub velocity: [f64; 2],
    /// Rotation in radians per second (rotonly_text only).
    #[serde(default)]
    pub angular_velocity: f64,
    /// Brightness gain alternates between `1 - flicker` and `1 + flicker`
    /// from frame to frame.
    #[serde(default)]
    pub flicker: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_channels() -> usize {
    1
}

const WAVES: usize = 6;
const STROKES: usize = 24;
const NOISE_PERIOD: usize = 64;
const CHECKER_CELL: f64 = 8.0;
const TINT: [f64; 3] = [0.92, 1.0, 1.06];

/// Seeded parameters drawn once per scene.
#[derive(Debug, Clone)]
enum Texture {
    Waves(Vec<[f64; 4]>),
    Strokes(Vec<[f64; 5]>),
    Ramp([f64; 3]),
    Checker,
    Noise(Vec<f64>),
}

impl SyntheticScene {
    pub fn new(kind: SceneKind, width: usize, height: usize, fps: f64, frames: usize) -> Self {
        Self {
            kind,
            width,
            height,
            channels: 1,
            fps,
            frames,
            velocity: [0.0, 0.0],
            angular_velocity: 0.0,
            flicker: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("scene: {m}")));
        if self.width == 0 || self.height == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.channels != 1 && self.channels != 3 {
            return bad(format!("channels must be 1 or 3, got {}", self.channels));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        if self.frames < 2 {
            return bad("at least two frames are needed".into());
        }
        if !self.velocity.iter().all(|v| v.is_finite()) || !self.angular_velocity.is_finite() {
            return bad("motion parameters must be finite".into());
        }
        if !(0.0..=0.5).contains(&self.flicker) {
            return bad(format!("flicker must lie in [0, 0.5], got {}", self.flicker));
        }
        Ok(())
    }

    fn texture(&self) -> Texture {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        match self.kind {
            SceneKind::Pan => Texture::Waves(
                (0..WAVES)
                    .map(|_| {
                        let f = rng.random_range(0.04..0.22);
                        let a = rng.random_range(0.0..std::f64::consts::TAU);
                        [f * a.cos(), f * a.sin(), rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.5..1.0)]
                    })
                    .collect(),
            ),
            SceneKind::RotonlyText => Texture::Strokes(
                (0..STROKES)
                    .map(|_| {
                        let horizontal = rng.random_bool(0.5);
                        let long = rng.random_range(4.0..12.0);
                        let thin = rng.random_range(0.8..1.6);
                        let (hw, hh) = if horizontal { (long, thin) } else { (thin, long) };
                        let cx = rng.random_range(0.1..0.9) * self.width as f64;
                        let cy = rng.random_range(0.1..0.9) * self.height as f64;
                        [cx, cy, hw, hh, rng.random_range(0.55..0.75)]
                    })
                    .collect(),
            ),
            SceneKind::Ramp => Texture::Ramp([
                rng.random_range(0.3..0.4),
                rng.random_range(0.2..0.4) / self.width as f64,
                rng.random_range(0.1..0.2) / self.height as f64,
            ]),
            SceneKind::Checker => Texture::Checker,
            SceneKind::Noise => Texture::Noise((0..NOISE_PERIOD * NOISE_PERIOD).map(|_| rng.random_range(0.1..0.9)).collect()),
        }
    }

    fn gain(&self, frame_index: Option<usize>) -> f64 {
        match frame_index {
            Some(k) if k % 2 == 1 => 1.0 + self.flicker,
            Some(_) => 1.0 - self.flicker,
            None => 1.0,
        }
    }

    fn render_with(&self, tex: &Texture, t: f64, gain: f64) -> Frame {
        let (w, h, ch) = (self.width, self.height, self.channels);
        let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
        let (sin, cos) = (self.angular_velocity * t).sin_cos();
        let data: Vec<f32> = (0..h)
            .into_par_iter()
            .flat_map_iter(|y| {
                (0..w).flat_map(move |x| {
                    let (px, py) = match self.kind {
                        // Inverse rotation: which page point is under pixel (x, y) now.
                        SceneKind::RotonlyText => {
                            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                            (cx + cos * dx + sin * dy, cy - sin * dx + cos * dy)
                        }
                        _ => (x as f64 - self.velocity[0] * t, y as f64 - self.velocity[1] * t),
                    };
                    let v = base_value(tex, px, py);
                    (0..ch).map(move |c| {
                        let tint = if ch == 3 { TINT[c] } else { 1.0 };
                        (v * tint * gain) as f32
                    })
                })
            })
            .collect();
        Frame::from_raw(w, h, ch, data)
    }

    /// The scene at time `t` without flicker, i.e. a global-shutter snapshot.
    pub fn render_at(&self, t: f64) -> Result<Frame> {
        self.validate()?;
        Ok(self.render_with(&self.texture(), t, 1.0))
    }

    /// Frames at `t = k / fps` for `k = 0..frames`.
    pub fn sequence(&self) -> Result<FrameSequence> {
        self.validate()?;
        let tex = self.texture();
        let dt = 1.0 / self.fps;
        let frames = (0..self.frames)
            .map(|k| self.render_with(&tex, k as f64 * dt, self.gain(Some(k))))
            .collect();
        FrameSequence::new(frames, dt, 0.0)
    }
}

fn smoothstep_edge(d: f64) -> f64 {
    // Coverage of a 1 px wide anti-aliased edge at signed distance `d`.
    let s = (0.5 - d).clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

fn base_value(tex: &Texture, x: f64, y: f64) -> f64 {
    match tex {
        Texture::Waves(waves) => {
            let norm: f64 = waves.iter().map(|w| w[3]).sum();
            let s: f64 = waves.iter().map(|w| w[3] * (w[0] * x + w[1] * y + w[2]).sin()).sum();
            0.5 + 0.3 * s / norm
        }
        Texture::Strokes(strokes) => {
            let mut v = 0.85;
            for s in strokes {
                let d = ((x - s[0]).abs() - s[2]).max((y - s[1]).abs() - s[3]);
                v -= s[4] * smoothstep_edge(d);
            }
            v.max(0.1)
        }
        Texture::Ramp(c) => c[0] + c[1] * x + c[2] * y,
        Texture::Checker => {
            let k = (x / CHECKER_CELL).floor() as i64 + (y / CHECKER_CELL).floor() as i64;
            if k.rem_euclid(2) == 0 {
                0.25
            } else {
                0.75
            }
        }
        Texture::Noise(lattice) => {
            let n = NOISE_PERIOD as i64;
            let (x0, y0) = (x.floor(), y.floor());
            let (fx, fy) = (x - x0, y - y0);
            let at = |i: i64, j: i64| lattice[(j.rem_euclid(n) * n + i.rem_euclid(n)) as usize];
            let (i, j) = (x0 as i64, y0 as i64);
            (1.0 - fy) * ((1.0 - fx) * at(i, j) + fx * at(i + 1, j)) + fy * ((1.0 - fx) * at(i, j + 1) + fx * at(i + 1, j + 1))
        }
    }
}
