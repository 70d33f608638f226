//! Covariance region descriptors.
//!
//! Each pixel of a patch becomes the feature vector
//! `[x, y, H, S, V, Gx, Gy, mag, o]`; a patch is summarized by the sample
//! covariance of those vectors, and two patches are compared with the
//! Förstner metric `sqrt(Σ ln² λ_k)` over the generalized eigenvalues of
//! the descriptor pair.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::{generalized_eigenvalues_spd, SpdMatrix, SymMatrix};

/// Length of the per-pixel feature vector.
pub const FEATURE_DIM: usize = 9;

/// Smallest patch side for which a 3×3 Sobel response is meaningful.
pub const MIN_PATCH_SIDE: usize = 4;

/// Row-major RGB patch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelPatch {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl PixelPatch {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![rgb; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }
}

/// Hexcone HSV with every channel in `[0, 1]` and hue in `[0, 1)`.
/// Achromatic pixels get `H = S = 0`.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let (rf, gf, bf) = (r as f64, g as f64, b as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let v = max as f64 / 255.0;
    if max == min {
        return (0.0, 0.0, v);
    }
    let delta = (max - min) as f64;
    let s = delta / max as f64;
    let sector = if max == r {
        (gf - bf) / delta
    } else if max == g {
        (bf - rf) / delta + 2.0
    } else {
        (rf - gf) / delta + 4.0
    };
    let mut h = sector / 6.0;
    if h < 0.0 {
        h += 1.0;
    }
    if h >= 1.0 {
        h -= 1.0;
    }
    (h, s, v)
}

/// `n` samples of a `dim`-dimensional feature, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1);
        Self {
            dim,
            data: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(FEATURE_DIM, Vec::len);
        let mut m = Self::new(dim);
        for row in rows {
            m.push(row)?;
        }
        Ok(m)
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Orientation `arctan(gy / gx)`, with `±π/2` on the vertical axis and 0
/// for a null gradient.
fn orientation(gx: f64, gy: f64) -> f64 {
    if gx == 0.0 {
        if gy == 0.0 {
            0.0
        } else {
            FRAC_PI_2 * gy.signum()
        }
    } else {
        (gy / gx).atan()
    }
}

/// Per-pixel features `[x, y, H, S, V, Gx, Gy, mag, o]` in row-major pixel
/// order. Gradients are 3×3 Sobel responses of the V channel with
/// replicated borders; `x`, `y` are patch-local pixel coordinates.
pub fn extract_features(patch: &PixelPatch) -> Result<FeatureMatrix> {
    let (w, h) = (patch.width, patch.height);
    if w < MIN_PATCH_SIDE || h < MIN_PATCH_SIDE {
        return Err(Error::PatchTooSmall {
            width: w,
            height: h,
        });
    }
    let hsv: Vec<(f64, f64, f64)> = patch
        .pixels
        .iter()
        .map(|&[r, g, b]| rgb_to_hsv(r, g, b))
        .collect();
    let value = |x: isize, y: isize| -> f64 {
        let cx = x.clamp(0, w as isize - 1) as usize;
        let cy = y.clamp(0, h as isize - 1) as usize;
        hsv[cy * w + cx].2
    };

    let mut out = FeatureMatrix {
        dim: FEATURE_DIM,
        data: Vec::with_capacity(w * h * FEATURE_DIM),
    };
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            let gx = (value(xi + 1, yi - 1) + 2.0 * value(xi + 1, yi) + value(xi + 1, yi + 1))
                - (value(xi - 1, yi - 1) + 2.0 * value(xi - 1, yi) + value(xi - 1, yi + 1));
            let gy = (value(xi - 1, yi + 1) + 2.0 * value(xi, yi + 1) + value(xi + 1, yi + 1))
                - (value(xi - 1, yi - 1) + 2.0 * value(xi, yi - 1) + value(xi + 1, yi - 1));
            let (hh, ss, vv) = hsv[y * w + x];
            out.data.extend_from_slice(&[
                x as f64,
                y as f64,
                hh,
                ss,
                vv,
                gx,
                gy,
                gx.hypot(gy),
                orientation(gx, gy),
            ]);
        }
    }
    Ok(out)
}

/// Unbiased sample covariance `1/(n−1) Σ (z_i − μ)(z_i − μ)ᵀ`.
pub fn sample_covariance(features: &FeatureMatrix) -> Result<SymMatrix> {
    let n = features.len();
    if n < 2 {
        return Err(Error::DegeneratePatch(n));
    }
    let d = features.dim();
    let mut mean = vec![0.0; d];
    for row in features.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let mut acc = SymMatrix::zeros(d);
    let mut centered = vec![0.0; d];
    for row in features.rows() {
        for k in 0..d {
            centered[k] = row[k] - mean[k];
        }
        for i in 0..d {
            for j in 0..=i {
                let v = acc.get(i, j) + centered[i] * centered[j];
                acc.set(i, j, v);
            }
        }
    }
    Ok(acc.scaled(1.0 / (n - 1) as f64))
}

/// Diagonal loading added to every covariance: `1e−6·trace(C)/d + 1e−10`.
pub fn regularization(cov: &SymMatrix) -> f64 {
    1e-6 * cov.trace() / cov.dim() as f64 + 1e-10
}

/// SPD covariance summary of one patch.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceDescriptor {
    pub patch_id: usize,
    matrix: SpdMatrix,
}

impl CovarianceDescriptor {
    /// Wraps an already regularized matrix; fails if it is not SPD.
    pub fn from_matrix(patch_id: usize, matrix: SymMatrix) -> Result<Self> {
        Ok(Self {
            patch_id,
            matrix: SpdMatrix::new(matrix)?,
        })
    }

    pub fn matrix(&self) -> &SymMatrix {
        self.matrix.matrix()
    }

    pub fn spd(&self) -> &SpdMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// Regularized covariance descriptor `C + ε·I` of a feature matrix.
pub fn compute_covariance(features: &FeatureMatrix, patch_id: usize) -> Result<CovarianceDescriptor> {
    let mut cov = sample_covariance(features)?;
    let eps = regularization(&cov);
    cov.add_diagonal(eps);
    CovarianceDescriptor::from_matrix(patch_id, cov)
}

pub fn describe_patch(patch: &PixelPatch, patch_id: usize) -> Result<CovarianceDescriptor> {
    compute_covariance(&extract_features(patch)?, patch_id)
}

/// Förstner distance between two descriptors.
pub fn forstner_distance(a: &CovarianceDescriptor, b: &CovarianceDescriptor) -> Result<f64> {
    forstner_distance_spd(a.spd(), b.spd())
}

/// Förstner distance `sqrt(Σ ln² λ_k(a, b))` between SPD matrices.
pub fn forstner_distance_spd(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let lambdas = generalized_eigenvalues_spd(a.matrix(), b)?;
    let mut sum = 0.0;
    for (row, &l) in lambdas.iter().enumerate() {
        if !(l > 0.0) {
            return Err(Error::NotPositiveDefinite { row, pivot: l });
        }
        let ln = l.ln();
        sum += ln * ln;
    }
    Ok(sum.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(m: SymMatrix) -> SpdMatrix {
        SpdMatrix::new(m).unwrap()
    }

    #[test]
    fn hsv_anchors() {
        assert_eq!(rgb_to_hsv(255, 0, 0), (0.0, 1.0, 1.0));
        assert_eq!(rgb_to_hsv(128, 128, 128), (0.0, 0.0, 128.0 / 255.0));
        let (h, s, v) = rgb_to_hsv(0, 255, 0);
        assert!((h - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!((s, v), (1.0, 1.0));
        let (h, _, _) = rgb_to_hsv(0, 0, 255);
        assert!((h - 2.0 / 3.0).abs() < 1e-15);
        // magenta-ish wraps below 1
        let (h, _, _) = rgb_to_hsv(255, 0, 1);
        assert!(h < 1.0 && h > 0.99);
        assert_eq!(rgb_to_hsv(0, 0, 0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_patch_has_no_gradient() {
        let f = extract_features(&PixelPatch::filled(5, 6, [90, 90, 90])).unwrap();
        assert_eq!(f.len(), 30);
        for row in f.rows() {
            assert_eq!(row[3], 0.0);
            assert_eq!(&row[5..], &[0.0; 4]);
        }
    }

    #[test]
    fn row_major_order() {
        let f = extract_features(&PixelPatch::filled(4, 4, [1, 2, 3])).unwrap();
        assert_eq!(&f.row(6)[..2], &[2.0, 1.0]);
    }

    #[test]
    fn vertical_step_edge() {
        // columns 0,1 black, columns 2,3 white
        let mut px = Vec::new();
        for _y in 0..4 {
            for x in 0..4 {
                px.push(if x < 2 { [0, 0, 0] } else { [255, 255, 255] });
            }
        }
        let f = extract_features(&PixelPatch::new(4, 4, px).unwrap()).unwrap();
        for y in 0..4 {
            for x in [1usize, 2] {
                let row = f.row(y * 4 + x);
                // Sobel x-kernel: (1 + 2 + 1)·(1 − 0)
                assert_eq!(row[5], 4.0, "Gx at ({x},{y})");
                assert_eq!(row[6], 0.0);
                assert_eq!(row[7], 4.0);
                assert_eq!(row[8], 0.0);
            }
            // replicate padding keeps the outer columns flat
            assert_eq!(f.row(y * 4)[5], 0.0);
            assert_eq!(f.row(y * 4 + 3)[5], 0.0);
        }
    }

    #[test]
    fn orientation_conventions() {
        assert_eq!(orientation(0.0, 0.0), 0.0);
        assert_eq!(orientation(0.0, 2.0), FRAC_PI_2);
        assert_eq!(orientation(0.0, -2.0), -FRAC_PI_2);
        assert!((orientation(1.0, 1.0) - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((orientation(-1.0, 1.0) + std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn patch_too_small() {
        let err = extract_features(&PixelPatch::filled(3, 8, [0, 0, 0])).unwrap_err();
        assert!(matches!(err, Error::PatchTooSmall { width: 3, height: 8 }));
    }

    #[test]
    fn pixel_count_checked() {
        assert!(PixelPatch::new(4, 4, vec![[0, 0, 0]; 15]).is_err());
    }

    #[test]
    fn toy_covariance() {
        // μ = (2, 3); deviations ±(1, 1)
        let f = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let c = sample_covariance(&f).unwrap();
        assert_eq!(c, SymMatrix::from_rows(&[vec![2.0, 2.0], vec![2.0, 2.0]]).unwrap());
        let d = compute_covariance(&f, 0).unwrap();
        let eps = 1e-6 * 2.0 + 1e-10;
        assert!((d.matrix().get(0, 0) - (2.0 + eps)).abs() < 1e-15);
        assert_eq!(d.matrix().get(0, 1), 2.0);
    }

    #[test]
    fn constant_features_give_epsilon_identity() {
        let f = extract_features(&PixelPatch::filled(4, 4, [10, 200, 30])).unwrap();
        let f = FeatureMatrix::from_rows(
            &f.rows().map(|r| vec![1.0, r[3], r[4], 0.5]).collect::<Vec<_>>(),
        )
        .unwrap();
        let d = compute_covariance(&f, 3).unwrap();
        assert_eq!(d.patch_id, 3);
        let expected = SymMatrix::identity(4).scaled(1e-10).to_dense();
        assert!(d.matrix().to_dense().max_abs_diff(&expected) < 1e-20);
    }

    #[test]
    fn degenerate_patch() {
        let f = FeatureMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(sample_covariance(&f), Err(Error::DegeneratePatch(1))));
    }

    #[test]
    fn real_patch_descriptor_is_spd() {
        let mut px = Vec::new();
        for y in 0..12 {
            for x in 0..8 {
                px.push([(x * 30) as u8, (y * 20) as u8, ((x + y) * 7) as u8]);
            }
        }
        let d = describe_patch(&PixelPatch::new(8, 12, px).unwrap(), 0).unwrap();
        assert_eq!(d.dim(), FEATURE_DIM);
        for i in 0..FEATURE_DIM {
            assert!(d.matrix().get(i, i) >= 1e-10);
        }
    }

    #[test]
    fn forstner_examples() {
        let i9 = spd(SymMatrix::identity(9));
        let e2 = spd(SymMatrix::identity(9).scaled(std::f64::consts::E.powi(2)));
        assert!((forstner_distance_spd(&i9, &e2).unwrap() - 6.0).abs() < 1e-12);
        assert!(forstner_distance_spd(&e2, &e2).unwrap() < 1e-12);

        let a = spd(SymMatrix::diagonal(&[1.0, 4.0]));
        let b = spd(SymMatrix::identity(2));
        assert!((forstner_distance_spd(&a, &b).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!(matches!(
            forstner_distance_spd(&a, &i9),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
