//! Gaussian random fields with the squared-exponential (RBF) kernel
//! `K(x, x') = s² exp(-|x - x'|² / (2 l²))` on structured grids.
//!
//! The kernel factorizes over axes, so the covariance on a tensor grid is the
//! Kronecker product of 1D covariances. Each sample applies the per-axis
//! Cholesky factors to i.i.d. standard normals. Sample `i` draws from its own
//! ChaCha stream, so results do not depend on batch size or order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::StructuredGrid;

/// Nugget added to the unit-variance 1D correlation diagonal.
pub const NUGGET: f64 = 1e-10;

/// Maximum consecutive rejections in [`GrfSampler::sample_wavenumber`].
pub const MAX_REJECTIONS: usize = 1000;

/// Mean of the base wave-number field that sweeps rescale.
pub const BASE_WAVENUMBER_MEAN: f64 = 6.0;

/// Kernel parameters of one random field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrfParams {
    pub mean: f64,
    /// Standard-deviation scale `s`; the pointwise variance is `s²`.
    pub s: f64,
    /// Correlation length `l`.
    pub l: f64,
}

impl GrfParams {
    pub const fn new(mean: f64, s: f64, l: f64) -> Self {
        Self { mean, s, l }
    }
}

/// A field specification: kernel, grid, seed and optional rejection floor.
#[derive(Debug, Clone, PartialEq)]
pub struct GrfSpec {
    pub grid: StructuredGrid,
    pub params: GrfParams,
    pub seed: u64,
    /// Reject samples whose minimum is `<=` this value.
    pub min_reject: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GrfSampler {
    spec: GrfSpec,
    /// Lower Cholesky factor of the 1D correlation per axis, row-major m×m.
    factors: Vec<Vec<f64>>,
}

impl GrfSampler {
    pub fn new(spec: GrfSpec) -> Result<Self> {
        let GrfParams { s, l, .. } = spec.params;
        if !(s > 0.0 && l > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "GRF needs s > 0 and l > 0, got s = {s}, l = {l}"
            )));
        }
        let m = spec.grid.nodes_per_axis();
        let h = spec.grid.spacing();
        let factors = (0..spec.grid.dim())
            .map(|axis| {
                let cov: Vec<f64> = (0..m * m)
                    .map(|k| {
                        let (i, j) = (k / m, k % m);
                        let dx = (i as f64 - j as f64) * h;
                        let v = (-dx * dx / (2.0 * l * l)).exp();
                        if i == j {
                            v + NUGGET
                        } else {
                            v
                        }
                    })
                    .collect();
                cholesky(&cov, m).ok_or(Error::Cholesky { axis })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, factors })
    }

    pub fn spec(&self) -> &GrfSpec {
        &self.spec
    }

    /// Field number `index` of this sampler.
    pub fn sample(&self, index: u64) -> Vec<f64> {
        self.sample_stream(index)
    }

    /// `count` consecutive samples starting at index 0.
    pub fn sample_many(&self, count: usize) -> Vec<Vec<f64>> {
        (0..count as u64).map(|i| self.sample(i)).collect()
    }

    fn sample_stream(&self, stream: u64) -> Vec<f64> {
        let grid = &self.spec.grid;
        let n = grid.num_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(stream);
        let mut z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let m = grid.nodes_per_axis();
        let mut fiber = vec![0.0; m];
        for (axis, l) in self.factors.iter().enumerate() {
            let stride = grid.stride(axis);
            for start in 0..n {
                // first node of each fiber along `axis`
                if !(start / stride).is_multiple_of(m) {
                    continue;
                }
                for (i, slot) in fiber.iter_mut().enumerate() {
                    *slot = z[start + i * stride];
                }
                for i in 0..m {
                    let row = &l[i * m..i * m + i + 1];
                    z[start + i * stride] = row.iter().zip(&fiber).map(|(a, b)| a * b).sum();
                }
            }
        }
        let GrfParams { mean, s, .. } = self.spec.params;
        z.iter().map(|v| mean + s * v).collect()
    }

    /// Wave-number field `index` with the rejection rule: redraws while
    /// `min(field) <= min_reject`. Returns the field and the rejection count.
    pub fn sample_wavenumber(&self, index: u64) -> Result<(Vec<f64>, usize)> {
        let Some(floor) = self.spec.min_reject else {
            return Ok((self.sample(index), 0));
        };
        if floor >= self.spec.params.mean {
            return Err(Error::InvalidArgument(format!(
                "rejection floor {floor} must be below the mean {}",
                self.spec.params.mean
            )));
        }
        for attempt in 0..=MAX_REJECTIONS {
            // attempt 0 reuses the plain stream so accepted draws match sample()
            let stream = if attempt == 0 {
                index
            } else {
                (1u64 << 63) | (index << 11) | attempt as u64
            };
            let field = self.sample_stream(stream);
            let min = field.iter().copied().fold(f64::INFINITY, f64::min);
            if min > floor {
                return Ok((field, attempt));
            }
        }
        Err(Error::RejectionLimit {
            attempts: MAX_REJECTIONS + 1,
        })
    }
}

/// Rescales a mean-6 base field to `target_mean`, keeping its spatial structure.
pub fn scale_wavenumber(field: &[f64], target_mean: f64) -> Result<Vec<f64>> {
    if target_mean <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "target wave number must be positive, got {target_mean}"
        )));
    }
    let mean = field.iter().sum::<f64>() / field.len().max(1) as f64;
    if mean <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "base wave-number field has nonpositive mean {mean}"
        )));
    }
    let factor = target_mean / BASE_WAVENUMBER_MEAN;
    Ok(field.iter().map(|v| v * factor).collect())
}

/// Mixes a field tag into a seed so k, f and g draw from unrelated streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(dim: usize, m: usize, params: GrfParams, seed: u64) -> GrfSpec {
        GrfSpec {
            grid: StructuredGrid::new(dim, m).unwrap(),
            params,
            seed,
            min_reject: None,
        }
    }

    #[test]
    fn tiny_scale_gives_mean() {
        let s = GrfSampler::new(spec(2, 9, GrfParams::new(6.0, 1e-12, 0.3), 1)).unwrap();
        let f = s.sample(0);
        assert!(f.iter().all(|v| (v - 6.0).abs() <= 1e-9));
    }

    #[test]
    fn invalid_params() {
        assert!(GrfSampler::new(spec(2, 9, GrfParams::new(0.0, 0.0, 0.3), 1)).is_err());
        assert!(GrfSampler::new(spec(2, 9, GrfParams::new(0.0, 1.0, -1.0), 1)).is_err());
    }

    #[test]
    fn sample_independent_of_order() {
        let s = GrfSampler::new(spec(2, 9, GrfParams::new(0.0, 1.0, 0.1), 42)).unwrap();
        let batch = s.sample_many(5);
        assert_eq!(batch[3], s.sample(3));
        assert_ne!(batch[3], batch[4]);
    }

    #[test]
    fn wavenumber_rejection() {
        let mut sp = spec(2, 17, GrfParams::new(6.0, 0.5, 0.3), 9);
        sp.min_reject = Some(3.0);
        let s = GrfSampler::new(sp.clone()).unwrap();
        for i in 0..20 {
            let (f, _) = s.sample_wavenumber(i).unwrap();
            assert!(f.iter().all(|&v| v > 3.0));
            assert_eq!(f, s.sample_wavenumber(i).unwrap().0);
        }
        sp.min_reject = Some(f64::NEG_INFINITY);
        let s = GrfSampler::new(sp).unwrap();
        assert_eq!(s.sample_wavenumber(2).unwrap().0, s.sample(2));
    }

    #[test]
    fn impossible_floor_hits_limit() {
        let mut sp = spec(2, 17, GrfParams::new(6.0, 5.0, 0.05), 1);
        sp.min_reject = Some(5.9);
        let s = GrfSampler::new(sp).unwrap();
        assert!(matches!(
            s.sample_wavenumber(0),
            Err(Error::RejectionLimit { .. })
        ));
    }

    #[test]
    fn scaling() {
        let base = vec![5.0, 6.0, 7.0];
        assert_eq!(scale_wavenumber(&base, 6.0).unwrap(), base);
        assert_eq!(scale_wavenumber(&base, 12.0).unwrap(), vec![10.0, 12.0, 14.0]);
        let scaled = scale_wavenumber(&base, 36.0).unwrap();
        assert_eq!(scaled.iter().copied().fold(f64::INFINITY, f64::min), 30.0);
        assert!(scale_wavenumber(&base, 0.0).is_err());
        assert!(scale_wavenumber(&[-1.0, -2.0], 6.0).is_err());
    }
}
