//! Reproducible noise.
//!
//! A [`NoiseRng`] is a ChaCha20 keystream keyed by SHA-256 over a fixed
//! domain tag, the user's 64-bit seed (little endian) and a stream label.
//! Each draw takes one 64-bit word `w` and maps it to the open unit interval
//! as `u = ((w >> 11) + 0.5) / 2^53`. Gaussian and Laplace variates are
//! produced from `u` by inverse-CDF transforms, so a given
//! `(seed, label)` yields the same values on every platform.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const STREAM_TAG: &[u8] = b"attrpriv/noise/v1";

#[derive(Clone, Debug)]
pub struct NoiseRng {
    seed: u64,
    inner: ChaCha20Rng,
}

impl NoiseRng {
    /// Derives an independent stream from `seed` and `label`.
    pub fn derive(seed: u64, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(STREAM_TAG);
        h.update(seed.to_le_bytes());
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        NoiseRng { seed, inner: ChaCha20Rng::from_seed(key) }
    }

    /// The seed this stream was derived from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        let w = self.inner.next_u64() >> 11;
        (w as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Draw from N(0, variance).
    pub fn gaussian(&mut self, variance: f64) -> f64 {
        let u = self.uniform();
        variance.sqrt() * inverse_cdf_unchecked(u)
    }

    /// Draw from the Laplace distribution with density `exp(-|x|/scale) / (2 scale)`.
    pub fn laplace(&mut self, scale: f64) -> f64 {
        let u = self.uniform();
        if u < 0.5 {
            scale * (2.0 * u).ln()
        } else {
            -scale * (2.0 * (1.0 - u)).ln()
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail `1 - Φ(x)`, accurate far into the tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Quantile function Φ⁻¹ of the standard normal distribution.
pub fn gaussian_inverse_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("Φ⁻¹ needs p in (0, 1), got {p}")));
    }
    Ok(inverse_cdf_unchecked(p))
}

fn inverse_cdf_unchecked(p: f64) -> f64 {
    // 1 - p is exact for p in [0.5, 1), which makes the map exactly antisymmetric.
    if p > 0.5 {
        -lower_quantile(1.0 - p)
    } else {
        lower_quantile(p)
    }
}

// Acklam's rational approximation followed by one Halley step on the
// erfc-based CDF. Valid for 0 < p <= 0.5.
fn lower_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] =
        [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}
