//! Geometric and photometric alignment of two cameras: homographies from
//! point correspondences and a linear 3x3 color correction.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::Frame;
use crate::sampling::{sample_into, Boundary};

/// Relative singular-value threshold below which a design matrix is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-10;
const LM_MAX_ITERS: usize = 200;

/// Projective map of the plane, row-major, scaled so the bottom-right entry is 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Homography {
    m: [[f64; 3]; 3],
}

impl Homography {
    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]],
        }
    }

    /// Scales `m` so `m[2][2] == 1` and checks it is finite and invertible.
    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        Self::from_matrix(&Matrix3::from_fn(|i, j| m[i][j]))
    }

    fn from_matrix(h: &Matrix3<f64>) -> Result<Self> {
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("homography has non-finite entries".into()));
        }
        let scale = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if h[(2, 2)].abs() <= 1e-12 * scale {
            return Err(Error::Degenerate("homography has a vanishing bottom-right entry".into()));
        }
        let h = h / h[(2, 2)];
        let scale = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if h.determinant().abs() <= 1e-12 * scale.powi(3) {
            return Err(Error::Degenerate("homography is singular".into()));
        }
        Ok(Self {
            m: std::array::from_fn(|i| std::array::from_fn(|j| h[(i, j)])),
        })
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.m
    }

    fn as_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.m[i][j])
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .as_matrix()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("homography is singular".into()))?;
        Self::from_matrix(&inv)
    }

    /// Maps a point; `None` when it lands on the line at infinity.
    pub fn apply(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        project(&self.as_matrix(), p)
    }
}

fn project(h: &Matrix3<f64>, p: [f64; 2]) -> Option<[f64; 2]> {
    let q = h * Vector3::new(p[0], p[1], 1.0);
    (q.z != 0.0).then(|| [q.x / q.z, q.y / q.z])
}

/// Point pairs `(source, target)` in pixels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Correspondences {
    pub pairs: Vec<([f64; 2], [f64; 2])>,
}

#[derive(Debug, Deserialize)]
struct PairRecord {
    sx: f64,
    sy: f64,
    tx: f64,
    ty: f64,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(|e| Error::malformed(path, e.to_string()))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::malformed(
            path,
            format!("header must be `{}`, got `{}`", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(())
}

impl Correspondences {
    pub fn new(pairs: Vec<([f64; 2], [f64; 2])>) -> Result<Self> {
        if pairs.iter().any(|(s, t)| s.iter().chain(t).any(|v| !v.is_finite())) {
            return Err(Error::InvalidArgument("correspondences must be finite".into()));
        }
        Ok(Self { pairs })
    }

    /// Reads a CSV with header `sx,sy,tx,ty`, one pair per row.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv_reader(path)?;
        check_header(path, &mut rdr, &["sx", "sy", "tx", "ty"])?;
        let mut pairs = Vec::new();
        for (line, rec) in rdr.deserialize::<PairRecord>().enumerate() {
            let r = rec.map_err(|e| Error::malformed(path, format!("row {}: {e}", line + 1)))?;
            pairs.push(([r.sx, r.sy], [r.tx, r.ty]));
        }
        Self::new(pairs).map_err(|e| Error::malformed(path, e.to_string()))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
fn normalizer(points: impl Iterator<Item = [f64; 2]> + Clone) -> Result<Matrix3<f64>> {
    let n = points.clone().count() as f64;
    let (cx, cy) = points.clone().fold((0.0, 0.0), |a, p| (a.0 + p[0], a.1 + p[1]));
    let (cx, cy) = (cx / n, cy / n);
    let mean = points.map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt()).sum::<f64>() / n;
    if mean <= 0.0 || !mean.is_finite() {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let s = std::f64::consts::SQRT_2 / mean;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn check_count(c: &Correspondences) -> Result<()> {
    if c.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "insufficient pairs: a homography needs at least 4, got {}",
            c.len()
        )));
    }
    Ok(())
}

/// Normalized direct linear transform: Hartley-normalize both point sets,
/// take the right singular vector of the smallest singular value, undo the
/// normalization.
pub fn dlt(c: &Correspondences) -> Result<Homography> {
    check_count(c)?;
    let ts = normalizer(c.pairs.iter().map(|p| p.0))?;
    let tt = normalizer(c.pairs.iter().map(|p| p.1))?;
    let rows = (2 * c.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (k, (s, t)) in c.pairs.iter().enumerate() {
        let s = ts * Vector3::new(s[0], s[1], 1.0);
        let t = tt * Vector3::new(t[0], t[1], 1.0);
        let (x, y, u, v) = (s.x, s.y, t.x, t.y);
        let r0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for j in 0..9 {
            a[(2 * k, j)] = r0[j];
            a[(2 * k + 1, j)] = r1[j];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let sv = &svd.singular_values;
    let largest = sv[order[order.len() - 1]];
    if sv[order[1]] <= RANK_TOL * largest {
        return Err(Error::Degenerate(
            "correspondences do not determine a unique homography (collinear or repeated points)".into(),
        ));
    }
    let h = v_t.row(order[0]);
    let hn = Matrix3::from_fn(|i, j| h[3 * i + j]);
    let tt_inv = tt.try_inverse().expect("similarity is invertible");
    Homography::from_matrix(&(tt_inv * hn * ts))
}

/// Residuals of the symmetric transfer error: `H s - t` then `H^-1 t - s`
/// for every pair.
fn residuals(h: &Matrix3<f64>, c: &Correspondences) -> Option<DVector<f64>> {
    let hi = h.try_inverse()?;
    let mut r = DVector::zeros(4 * c.len());
    for (k, (s, t)) in c.pairs.iter().enumerate() {
        let f = project(h, *s)?;
        let b = project(&hi, *t)?;
        r[4 * k] = f[0] - t[0];
        r[4 * k + 1] = f[1] - t[1];
        r[4 * k + 2] = b[0] - s[0];
        r[4 * k + 3] = b[1] - s[1];
    }
    r.iter().all(|v| v.is_finite()).then_some(r)
}

/// Jacobian of [`residuals`] with respect to the eight free entries
/// (row-major, the bottom-right entry held at 1).
fn jacobian(h: &Matrix3<f64>, c: &Correspondences) -> DMatrix<f64> {
    let hi = h.try_inverse().expect("caller checked invertibility");
    let mut jac = DMatrix::zeros(4 * c.len(), 8);
    for (k, (s, t)) in c.pairs.iter().enumerate() {
        let sh = Vector3::new(s[0], s[1], 1.0);
        let p = h * sh;
        let q = hi * Vector3::new(t[0], t[1], 1.0);
        for e in 0..8 {
            let (i, j) = (e / 3, e % 3);
            // d(H s) = e_i s_j.
            let mut dp = Vector3::zeros();
            dp[i] = sh[j];
            // d(H^-1 t) = -H^-1 dH H^-1 t = -H^-1[:, i] q_j.
            let dq = -hi.column(i) * q[j];
            let proj = |v: &Vector3<f64>, dv: &Vector3<f64>| {
                [
                    dv.x / v.z - v.x * dv.z / (v.z * v.z),
                    dv.y / v.z - v.y * dv.z / (v.z * v.z),
                ]
            };
            let f = proj(&p, &dp);
            let b = proj(&q, &dq);
            jac[(4 * k, e)] = f[0];
            jac[(4 * k + 1, e)] = f[1];
            jac[(4 * k + 2, e)] = b[0];
            jac[(4 * k + 3, e)] = b[1];
        }
    }
    jac
}

fn with_params(h: &Matrix3<f64>, delta: &DVector<f64>) -> Matrix3<f64> {
    let mut out = *h;
    for e in 0..8 {
        out[(e / 3, e % 3)] += delta[e];
    }
    out
}

/// Root mean square of the 2N forward and backward transfer distances.
pub fn symmetric_transfer_rms(h: &Homography, c: &Correspondences) -> Result<f64> {
    let r = residuals(&h.as_matrix(), c).ok_or_else(|| Error::Degenerate("points map to infinity".into()))?;
    Ok((r.norm_squared() / (2 * c.len()) as f64).sqrt())
}

/// Levenberg-Marquardt refinement of the symmetric transfer error.
fn refine(init: &Homography, c: &Correspondences) -> Homography {
    let mut h = init.as_matrix();
    let Some(mut r) = residuals(&h, c) else {
        return *init;
    };
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..LM_MAX_ITERS {
        if cost == 0.0 {
            break;
        }
        let j = jacobian(&h, c);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for d in 0..8 {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(delta) = a.cholesky().map(|ch| ch.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let cand = with_params(&h, &delta);
            match residuals(&cand, c) {
                Some(rc) if rc.norm_squared() < cost => {
                    let new_cost = rc.norm_squared();
                    let rel = (cost - new_cost) / cost;
                    h = cand;
                    r = rc;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = rel > 1e-15;
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !improved {
            break;
        }
    }
    Homography::from_matrix(&h).unwrap_or(*init)
}

/// Normalized DLT followed by Levenberg-Marquardt on the symmetric transfer
/// error. Returns the homography and its RMS transfer error in pixels.
pub fn estimate_homography(c: &Correspondences) -> Result<(Homography, f64)> {
    let init = dlt(c)?;
    let h = refine(&init, c);
    let rms = symmetric_transfer_rms(&h, c)?;
    Ok((h, rms))
}

/// Inverse-mapped bilinear resampling: output pixel `q` reads `frame` at
/// `H^-1 q`.
pub fn apply_homography(frame: &Frame, h: &Homography, oob: Boundary) -> Result<Frame> {
    let hi = h.inverse()?.as_matrix();
    let (w, hgt, ch) = (frame.width(), frame.height(), frame.channels());
    let mut out = vec![0.0f32; w * hgt * ch];
    let mut px = vec![0.0f64; ch];
    for y in 0..hgt {
        for x in 0..w {
            let Some(p) = project(&hi, [x as f64, y as f64]) else {
                continue;
            };
            sample_into(frame, p[0], p[1], oob, &mut px);
            for c in 0..ch {
                out[(y * w + x) * ch + c] = px[c] as f32;
            }
        }
    }
    Frame::new(w, hgt, ch, out)
}

/// Linear map on RGB triples, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColorMatrix {
    m: [[f64; 3]; 3],
}

impl ColorMatrix {
    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("color matrix must be finite".into()));
        }
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.m
    }

    pub fn apply_rgb(&self, p: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| self.m[i][0] * p[0] + self.m[i][1] * p[1] + self.m[i][2] * p[2])
    }

    /// Applies the matrix to every pixel of a three-channel frame.
    pub fn apply(&self, frame: &Frame) -> Result<Frame> {
        if frame.channels() != 3 {
            return Err(Error::InvalidArgument(format!(
                "color correction needs 3 channels, got {}",
                frame.channels()
            )));
        }
        let data = frame
            .data()
            .chunks_exact(3)
            .flat_map(|p| self.apply_rgb([p[0] as f64, p[1] as f64, p[2] as f64]).map(|v| v as f32))
            .collect();
        Frame::new(frame.width(), frame.height(), 3, data)
    }
}

#[derive(Debug, Deserialize)]
struct PatchRecord {
    mr: f64,
    mg: f64,
    mb: f64,
    rr: f64,
    rg: f64,
    rb: f64,
}

/// Reads color patch pairs from a CSV with header `mr,mg,mb,rr,rg,rb`
/// (measured then reference RGB).
pub fn read_patches(path: impl AsRef<Path>) -> Result<(Vec<[f64; 3]>, Vec<[f64; 3]>)> {
    let path = path.as_ref();
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &["mr", "mg", "mb", "rr", "rg", "rb"])?;
    let (mut measured, mut reference) = (Vec::new(), Vec::new());
    for (line, rec) in rdr.deserialize::<PatchRecord>().enumerate() {
        let r = rec.map_err(|e| Error::malformed(path, format!("row {}: {e}", line + 1)))?;
        measured.push([r.mr, r.mg, r.mb]);
        reference.push([r.rr, r.rg, r.rb]);
    }
    Ok((measured, reference))
}

/// Least-squares `M` minimizing `sum |M m_i - r_i|^2`; returns `M` and the
/// RMS Euclidean residual per patch.
pub fn estimate_color_matrix(measured: &[[f64; 3]], reference: &[[f64; 3]]) -> Result<(ColorMatrix, f64)> {
    if measured.len() != reference.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} measured patches but {} reference patches",
            measured.len(),
            reference.len()
        )));
    }
    let n = measured.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "insufficient patches: a color matrix needs at least 3, got {n}"
        )));
    }
    if measured.iter().chain(reference).flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("patch values must be finite".into()));
    }
    let x = DMatrix::from_fn(n, 3, |i, j| measured[i][j]);
    let y = DMatrix::from_fn(n, 3, |i, j| reference[i][j]);
    let svd = x.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &s| (l.min(s), h.max(s)));
    if lo <= RANK_TOL * hi {
        return Err(Error::Degenerate("measured patches are rank deficient".into()));
    }
    // X M^T = Y in the least-squares sense.
    let mt = svd.solve(&y, 0.0).map_err(|e| Error::Degenerate(e.to_string()))?;
    let m = ColorMatrix::new(std::array::from_fn(|i| std::array::from_fn(|j| mt[(j, i)])))?;
    let res = &x * &mt - &y;
    Ok((m, (res.norm_squared() / n as f64).sqrt()))
}
