use serde::{Deserialize, Serialize};

use super::{Dataset, CONTINUOUS_COLUMNS, N_CONTINUOUS};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::mix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ColumnSpec {
    Continuous { name: String },
    Bucket { projection: usize, bucket: usize },
}

/// Standardizes the continuous features and hashes the categorical codes
/// into one-hot blocks, one block per projection.
///
/// Standardization statistics are fitted once and reused by
/// [`Encoder::transform`], so held-out rows are encoded with training
/// statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub n_projections: usize,
    pub buckets_per_projection: usize,
    pub seed: u64,
    pub means: [f64; N_CONTINUOUS],
    /// Zero for a degenerate column, which then encodes to all zeros.
    pub scales: [f64; N_CONTINUOUS],
}

impl Encoder {
    pub fn fit(d: &Dataset, n_projections: usize, buckets_per_projection: usize, seed: u64) -> Result<Self> {
        if buckets_per_projection < 2 {
            return Err(Error::InvalidArgument(format!(
                "buckets_per_projection must be >= 2, got {buckets_per_projection}"
            )));
        }
        let n = d.len() as f64;
        let mut means = [0.0; N_CONTINUOUS];
        let mut scales = [0.0; N_CONTINUOUS];
        if !d.is_empty() {
            for j in 0..N_CONTINUOUS {
                let m = d.samples().iter().map(|s| s.continuous[j]).sum::<f64>() / n;
                let var = d
                    .samples()
                    .iter()
                    .map(|s| (s.continuous[j] - m).powi(2))
                    .sum::<f64>()
                    / n;
                means[j] = m;
                if var > 0.0 {
                    scales[j] = 1.0 / var.sqrt();
                } else {
                    log::warn!(
                        "continuous column {} has zero variance; encoding it as zeros",
                        CONTINUOUS_COLUMNS[j]
                    );
                }
            }
        }
        Ok(Self {
            n_projections,
            buckets_per_projection,
            seed,
            means,
            scales,
        })
    }

    pub fn dims(&self) -> usize {
        N_CONTINUOUS + self.n_projections * self.buckets_per_projection
    }

    pub fn columns(&self) -> Vec<ColumnSpec> {
        let mut cols: Vec<ColumnSpec> = CONTINUOUS_COLUMNS
            .iter()
            .map(|n| ColumnSpec::Continuous { name: n.to_string() })
            .collect();
        for projection in 0..self.n_projections {
            for bucket in 0..self.buckets_per_projection {
                cols.push(ColumnSpec::Bucket { projection, bucket });
            }
        }
        cols
    }

    /// Bucket of a categorical code vector under projection `j`.
    pub fn bucket(&self, codes: &[u32], j: usize) -> usize {
        let mut h = mix64(self.seed ^ mix64(j as u64 + 1));
        for &c in codes {
            h = mix64(h ^ u64::from(c));
        }
        (h % self.buckets_per_projection as u64) as usize
    }

    pub fn transform(&self, d: &Dataset) -> EncodedMatrix {
        let dims = self.dims();
        let mut m = Matrix::zeros(d.len(), dims);
        for (i, s) in d.samples().iter().enumerate() {
            let row = m.row_mut(i);
            for j in 0..N_CONTINUOUS {
                row[j] = (s.continuous[j] - self.means[j]) * self.scales[j];
            }
            for p in 0..self.n_projections {
                let b = self.bucket(&s.categorical, p);
                row[N_CONTINUOUS + p * self.buckets_per_projection + b] = 1.0;
            }
        }
        EncodedMatrix {
            matrix: m,
            columns: self.columns(),
            encoder: self.clone(),
        }
    }
}

/// Dense design matrix with a description of every column.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub matrix: Matrix,
    pub columns: Vec<ColumnSpec>,
    pub encoder: Encoder,
}

impl EncodedMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dims(&self) -> usize {
        self.matrix.cols()
    }

    pub fn select_rows(&self, idx: &[usize]) -> EncodedMatrix {
        EncodedMatrix {
            matrix: self.matrix.select_rows(idx),
            columns: self.columns.clone(),
            encoder: self.encoder.clone(),
        }
    }
}

/// Fits an [`Encoder`] on `d` and encodes it.
pub fn encode(d: &Dataset, n_projections: usize, buckets_per_projection: usize, seed: u64) -> Result<EncodedMatrix> {
    Ok(Encoder::fit(d, n_projections, buckets_per_projection, seed)?.transform(d))
}
