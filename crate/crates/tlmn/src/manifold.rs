//! Delay embedding of feature windows into the model's state space.
//!
//! Each output row stacks k consecutive input rows (oldest first), so a
//! 24 x 22 window with k = 5 becomes a 20 x 110 matrix where every row
//! carries five hours of context. The transform is linear, causal, and
//! parameter-free.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManifoldConfig {
    /// Number of consecutive rows stacked into one embedded row.
    pub k: usize,
    pub stride: usize,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        ManifoldConfig { k: 5, stride: 1 }
    }
}

impl ManifoldConfig {
    pub fn validate(&self, source_len: usize) -> Result<()> {
        if self.k < 1 {
            return Err(Error::config("embed window length k must be >= 1"));
        }
        if self.stride < 1 {
            return Err(Error::config("stride must be >= 1"));
        }
        if source_len < self.k {
            return Err(Error::shape(format!(
                "cannot embed {} rows with k = {}",
                source_len, self.k
            )));
        }
        Ok(())
    }

    /// Number of embedded rows produced from `source_len` input rows.
    pub fn output_rows(&self, source_len: usize) -> usize {
        (source_len - self.k) / self.stride + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldTensor {
    /// ((T - k) / stride + 1) x (F * k).
    pub values: Mat,
    pub source_len: usize,
    pub feature_width: usize,
}

/// Stacks rows [i, i+1, ..., i+k-1] of `window` into row i of the output,
/// chronological order, features contiguous per lag.
pub fn delay_embed(window: &Mat, cfg: &ManifoldConfig) -> Result<ManifoldTensor> {
    cfg.validate(window.rows)?;
    let t = window.rows;
    let f = window.cols;
    let out_rows = cfg.output_rows(t);
    let mut values = Mat::zeros(out_rows, f * cfg.k);
    for i in 0..out_rows {
        let src = i * cfg.stride;
        let out_row = values.row_mut(i);
        for lag in 0..cfg.k {
            out_row[lag * f..(lag + 1) * f].copy_from_slice(window.row(src + lag));
        }
    }
    Ok(ManifoldTensor {
        values,
        source_len: t,
        feature_width: f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_window(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut m = Mat::zeros(rows, cols);
        for v in m.data_mut() {
            *v = rng.random_range(-2.0..2.0);
        }
        m
    }

    #[test]
    fn standard_shape() {
        let w = random_window(24, 22, 1);
        let t = delay_embed(&w, &ManifoldConfig::default()).unwrap();
        assert_eq!(t.values.rows, 20);
        assert_eq!(t.values.cols, 110);
        assert_eq!(t.source_len, 24);
        assert_eq!(t.feature_width, 22);
    }

    #[test]
    fn k1_is_identity() {
        let w = random_window(24, 22, 2);
        let t = delay_embed(&w, &ManifoldConfig { k: 1, stride: 1 }).unwrap();
        assert_eq!(t.values, w);
    }

    #[test]
    fn full_length_k_flattens() {
        let w = random_window(5, 22, 3);
        let t = delay_embed(&w, &ManifoldConfig { k: 5, stride: 1 }).unwrap();
        assert_eq!(t.values.rows, 1);
        assert_eq!(t.values.cols, 110);
        let mut expected = Vec::new();
        for i in 0..5 {
            expected.extend_from_slice(w.row(i));
        }
        assert_eq!(t.values.row(0), expected.as_slice());
    }

    #[test]
    fn row_layout_is_oldest_first() {
        let w = random_window(8, 3, 4);
        let cfg = ManifoldConfig { k: 3, stride: 1 };
        let t = delay_embed(&w, &cfg).unwrap();
        for i in 0..t.values.rows {
            for lag in 0..cfg.k {
                assert_eq!(&t.values.row(i)[lag * 3..(lag + 1) * 3], w.row(i + lag));
            }
        }
    }

    #[test]
    fn stride_two_row_count_and_content() {
        let w = random_window(24, 4, 5);
        let cfg = ManifoldConfig { k: 5, stride: 2 };
        let t = delay_embed(&w, &cfg).unwrap();
        assert_eq!(t.values.rows, 10);
        assert_eq!(&t.values.row(3)[0..4], w.row(6));
    }

    #[test]
    fn causality_perturbation_footprint() {
        let base = random_window(24, 22, 6);
        let cfg = ManifoldConfig::default();
        let t0 = delay_embed(&base, &cfg).unwrap();
        for j in 0..24 {
            let mut w = base.clone();
            w.set(j, 7, w.get(j, 7) + 1.0);
            let t1 = delay_embed(&w, &cfg).unwrap();
            for i in 0..t0.values.rows {
                let changed = t0.values.row(i) != t1.values.row(i);
                let expected = i + cfg.k > j && i <= j;
                assert_eq!(
                    changed, expected,
                    "perturbing input row {j} touched output row {i}"
                );
            }
        }
    }

    #[test]
    fn stride_one_is_lossless() {
        let w = random_window(24, 22, 7);
        let t = delay_embed(&w, &ManifoldConfig::default()).unwrap();
        let mut rebuilt = Mat::zeros(24, 22);
        // Row r of the source appears as lag (r - i) of embedded row i.
        for r in 0..24 {
            let i = r.min(t.values.rows - 1);
            let lag = r - i;
            rebuilt
                .row_mut(r)
                .copy_from_slice(&t.values.row(i)[lag * 22..(lag + 1) * 22]);
        }
        assert_eq!(rebuilt, w);
    }

    #[test]
    fn embedding_is_linear() {
        let x = random_window(24, 22, 8);
        let y = random_window(24, 22, 9);
        let (a, b) = (0.37, -1.25);
        let cfg = ManifoldConfig::default();
        let mut combo = Mat::zeros(24, 22);
        for r in 0..24 {
            for c in 0..22 {
                combo.set(r, c, a * x.get(r, c) + b * y.get(r, c));
            }
        }
        let ex = delay_embed(&x, &cfg).unwrap();
        let ey = delay_embed(&y, &cfg).unwrap();
        let ec = delay_embed(&combo, &cfg).unwrap();
        for r in 0..ec.values.rows {
            for c in 0..ec.values.cols {
                let lin = a * ex.values.get(r, c) + b * ey.values.get(r, c);
                assert!((ec.values.get(r, c) - lin).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let w = random_window(4, 22, 10);
        assert!(delay_embed(&w, &ManifoldConfig { k: 5, stride: 1 }).is_err());
        assert!(delay_embed(&w, &ManifoldConfig { k: 0, stride: 1 }).is_err());
        assert!(delay_embed(&w, &ManifoldConfig { k: 2, stride: 0 }).is_err());
    }
}
