//! Complete similarity graph over all detections.
//!
//! Förstner distances become Gaussian affinities `exp(−ρ²/2σ²)` with a zero
//! diagonal, and the affinity is normalized symmetrically as
//! `D^(−1/2)·W·D^(−1/2)`.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::descriptor::{forstner_distance, CovarianceDescriptor};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Kernel bandwidth: a fixed value or the median positive distance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Sigma {
    #[default]
    Auto,
    Fixed(f64),
}

impl fmt::Display for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma::Auto => f.write_str("auto"),
            Sigma::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl std::str::FromStr for Sigma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Sigma::Auto);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidParams(format!("sigma must be `auto` or a number, got `{s}`")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidSigma(v));
        }
        Ok(Sigma::Fixed(v))
    }
}

impl Serialize for Sigma {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Sigma::Auto => serializer.serialize_str("auto"),
            Sigma::Fixed(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Sigma {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Number(v) if v > 0.0 && v.is_finite() => Ok(Sigma::Fixed(v)),
            Repr::Number(v) => Err(serde::de::Error::custom(format!(
                "sigma must be positive, got {v}"
            ))),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn check_square_symmetric(m: &Matrix, what: &str) -> Result<()> {
    if m.rows() != m.cols() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            actual: m.cols(),
        });
    }
    for i in 0..m.rows() {
        if m.get(i, i) != 0.0 {
            return Err(Error::InvalidParams(format!("{what} must have a zero diagonal")));
        }
        for j in 0..i {
            let v = m.get(i, j);
            if v != m.get(j, i) || !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "{what} must be symmetric, finite and nonnegative (entry {i},{j})"
                )));
            }
        }
    }
    Ok(())
}

/// Symmetric matrix of pairwise Förstner distances.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix(Matrix);

impl DistanceMatrix {
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        check_square_symmetric(&m, "distance matrix")?;
        Ok(Self(m))
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    /// Median of the strictly positive off-diagonal distances, or `None`
    /// when every pair coincides.
    pub fn median_positive(&self) -> Option<f64> {
        let n = self.len();
        let mut v: Vec<f64> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .filter(|&d| d > 0.0)
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        Some(if v.len() % 2 == 1 {
            v[m]
        } else {
            0.5 * (v[m - 1] + v[m])
        })
    }
}

/// Fills the upper triangle in parallel; each entry is written once, so the
/// result does not depend on scheduling.
pub fn pairwise_distances(descriptors: &[CovarianceDescriptor]) -> Result<DistanceMatrix> {
    let n = descriptors.len();
    if n < 2 {
        return Err(Error::InvalidParams(format!(
            "a graph needs at least 2 detections, got {n}"
        )));
    }
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| forstner_distance(&descriptors[i], &descriptors[j]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut m = Matrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &d) in row.iter().enumerate() {
            let j = i + 1 + off;
            m.set(i, j, d);
            m.set(j, i, d);
        }
    }
    Ok(DistanceMatrix(m))
}

/// Weighted adjacency `W` with entries in `[0, 1]` and a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityMatrix {
    matrix: Matrix,
    sigma: f64,
}

impl AffinityMatrix {
    /// Wraps raw weights. The bandwidth is recorded as NaN.
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        check_square_symmetric(&m, "affinity matrix")?;
        Ok(Self {
            matrix: m,
            sigma: f64::NAN,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Bandwidth the kernel was evaluated with.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            matrix: Matrix::from_fn(self.len(), self.len(), |i, j| s * self.matrix.get(i, j)),
            sigma: self.sigma,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_matrix_csv(&self.matrix, path)
    }
}

pub fn affinity_from_distances(dist: &DistanceMatrix, sigma: Sigma) -> Result<AffinityMatrix> {
    let sigma = match sigma {
        Sigma::Fixed(s) if s > 0.0 && s.is_finite() => s,
        Sigma::Fixed(s) => return Err(Error::InvalidSigma(s)),
        Sigma::Auto => dist.median_positive().unwrap_or(1.0),
    };
    let n = dist.len();
    let denom = 2.0 * sigma * sigma;
    let matrix = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let d = dist.get(i, j);
            (-d * d / denom).exp()
        }
    });
    Ok(AffinityMatrix { matrix, sigma })
}

/// `Ŵ = D^(−1/2)·W·D^(−1/2)` plus the zero-degree rows.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAffinity {
    matrix: Matrix,
    isolated: Vec<usize>,
}

impl NormalizedAffinity {
    /// Uses `m` directly as the payoff weights (no normalization). Zero rows
    /// are reported as isolated.
    pub fn from_weights(m: Matrix) -> Result<Self> {
        check_square_symmetric(&m, "normalized affinity")?;
        let isolated = (0..m.rows())
            .filter(|&i| m.row(i).iter().all(|&v| v == 0.0))
            .collect();
        Ok(Self {
            matrix: m,
            isolated,
        })
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn isolated(&self) -> &[usize] {
        &self.isolated
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            matrix: Matrix::from_fn(self.len(), self.len(), |i, j| s * self.matrix.get(i, j)),
            isolated: self.isolated.clone(),
        }
    }

    /// Same graph with players reordered: new player `k` is old player `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.len());
        let matrix = Matrix::from_fn(self.len(), self.len(), |i, j| self.get(perm[i], perm[j]));
        let mut isolated: Vec<usize> = (0..perm.len())
            .filter(|&k| self.isolated.contains(&perm[k]))
            .collect();
        isolated.sort_unstable();
        Self { matrix, isolated }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_matrix_csv(&self.matrix, path)
    }
}

pub fn normalize(w: &AffinityMatrix) -> NormalizedAffinity {
    let n = w.len();
    let degrees: Vec<f64> = (0..n).map(|i| w.matrix.row(i).iter().sum()).collect();
    let isolated: Vec<usize> = (0..n).filter(|&i| !(degrees[i] > 0.0)).collect();
    let matrix = Matrix::from_fn(n, n, |i, j| {
        let v = w.matrix.get(i, j);
        if v == 0.0 {
            0.0
        } else {
            // the product is commutative in floating point, so Ŵ stays exactly symmetric
            v / (degrees[i] * degrees[j]).sqrt()
        }
    });
    NormalizedAffinity { matrix, isolated }
}

/// Full matrix as CSV, one row per line.
pub fn write_matrix_csv(m: &Matrix, path: &Path) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for i in 0..m.rows() {
        wtr.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    wtr.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
