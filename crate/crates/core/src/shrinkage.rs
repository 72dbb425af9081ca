//! Singular-value shrinkage: keep only the modes that pop out of the noise
//! bulk and shrink each to `s̄·𝒪(s̄)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{median, Svd};
use crate::rmt::{mp_quantile, overlap, sbar_of_shat, SpectrumParams};

pub const DEFAULT_MARGIN: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectedMode {
    pub shat: f64,
    pub sbar: f64,
    pub shrunk: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShrinkageReport {
    pub detected: Vec<DetectedMode>,
    /// Cut-off used for detection, `σ(1+√A)(1+margin)`.
    pub bulk_edge: f64,
    /// N₃ × N₁ denoised map.
    pub estimate: DMatrix<f64>,
}

impl ShrinkageReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,shat,sbar,shrunk\n");
        for (i, m) in self.detected.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", i + 1, m.shat, m.sbar, m.shrunk));
        }
        out
    }
}

fn check_shape(sigma31: &DMatrix<f64>, params: &SpectrumParams) -> Result<()> {
    let (rows, cols) = sigma31.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::DimError("empty matrix".into()));
    }
    let a = rows as f64 / cols as f64;
    if (a - params.aspect()).abs() > 1e-12 * a.max(1.0) {
        return Err(Error::DimError(format!(
            "{rows}x{cols} matrix has aspect {a}, parameters say {}",
            params.aspect()
        )));
    }
    Ok(())
}

/// Denoises `sigma31` by shrinking its outlier singular values.
pub fn shrink_denoise(sigma31: &DMatrix<f64>, params: &SpectrumParams, margin: f64) -> Result<ShrinkageReport> {
    check_shape(sigma31, params)?;
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::ConfigInvalid(format!("margin must be non-negative, got {margin}")));
    }
    let svd = Svd::of(sigma31);
    let bulk_edge = params.upper_edge() * (1.0 + margin);
    let mut detected = Vec::new();
    for &shat in svd.s.iter().take_while(|&&s| s > bulk_edge) {
        let sbar = sbar_of_shat(shat, params)?;
        detected.push(DetectedMode {
            shat,
            sbar,
            shrunk: sbar * overlap(sbar, params).o,
        });
    }
    let values: Vec<f64> = detected.iter().map(|m| m.shrunk).collect();
    let estimate = if values.is_empty() {
        DMatrix::zeros(sigma31.nrows(), sigma31.ncols())
    } else {
        svd.compose(&values)
    };
    Ok(ShrinkageReport {
        detected,
        bulk_edge,
        estimate,
    })
}

/// Noise scale from the median bulk singular value.
///
/// Starts from the median of all singular values, then repeatedly drops the
/// values above the implied bulk edge and re-matches the median to the
/// unit-scale MP median.
pub fn estimate_noise_scale(sigma31: &DMatrix<f64>, params: &SpectrumParams) -> Result<f64> {
    check_shape(sigma31, params)?;
    let unit = SpectrumParams::new(params.aspect())?;
    let q50 = mp_quantile(&unit, 0.5)?;
    let svd = Svd::of(sigma31);
    let needed = sigma31.nrows().div_ceil(2);
    let mut sigma = median(&mut svd.s.clone()) / q50;
    for _ in 0..50 {
        let edge = sigma * unit.upper_edge() * (1.0 + DEFAULT_MARGIN);
        let mut bulk: Vec<f64> = svd.s.iter().copied().filter(|&s| s <= edge).collect();
        if bulk.len() < needed {
            return Err(Error::TooFewModes {
                found: bulk.len(),
                needed,
            });
        }
        let next = median(&mut bulk) / q50;
        if (next - sigma).abs() <= 1e-14 * sigma {
            sigma = next;
            break;
        }
        sigma = next;
    }
    let top = svd.s.first().copied().unwrap_or(0.0);
    if !(sigma > 1e-12 * top) {
        return Err(Error::NoiseScaleUnknown(format!(
            "bulk median {sigma:.3e} is negligible next to the top value {top:.3e}"
        )));
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, stream_rng};

    #[test]
    fn single_outlier_example() {
        // ŝ = 2.5 at A = 1 inverts to s̄ = 2 with 𝒪 = 0.75.
        let params = SpectrumParams::new(1.0).unwrap();
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = 2.5;
        m[(1, 1)] = 0.5;
        let r = shrink_denoise(&m, &params, DEFAULT_MARGIN).unwrap();
        assert_eq!(r.detected.len(), 1);
        assert!((r.detected[0].sbar - 2.0).abs() < 1e-12);
        assert!((r.detected[0].shrunk - 1.5).abs() < 1e-12);
        assert!((r.estimate[(0, 0)].abs() - 1.5).abs() < 1e-12);
        assert!(r.estimate[(1, 1)].abs() < 1e-12);
    }

    #[test]
    fn pure_noise_gives_zero() {
        let n = 100;
        let z = gaussian_matrix(50, n, 1.0 / (n as f64).sqrt(), &mut stream_rng(3, 0));
        let params = SpectrumParams::new(0.5).unwrap();
        let r = shrink_denoise(&z, &params, 0.05).unwrap();
        assert!(r.detected.is_empty());
        assert_eq!(r.estimate.norm(), 0.0);
    }

    #[test]
    fn margin_band_is_not_shrunk() {
        let params = SpectrumParams::new(1.0).unwrap();
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 0)] = 2.03;
        assert!(shrink_denoise(&m, &params, 0.02).unwrap().detected.is_empty());
        assert_eq!(shrink_denoise(&m, &params, 0.0).unwrap().detected.len(), 1);
    }

    #[test]
    fn aspect_mismatch() {
        let params = SpectrumParams::new(0.5).unwrap();
        assert!(matches!(
            shrink_denoise(&DMatrix::zeros(4, 4), &params, 0.02),
            Err(Error::DimError(_))
        ));
    }

    #[test]
    fn noise_scale_homogeneous() {
        let z = gaussian_matrix(60, 120, 1.0 / (120f64).sqrt(), &mut stream_rng(8, 1));
        let params = SpectrumParams::new(0.5).unwrap();
        let a = estimate_noise_scale(&z, &params).unwrap();
        let b = estimate_noise_scale(&(&z * 3.7), &params).unwrap();
        assert!((b / a - 3.7).abs() < 1e-10);
        assert!((a - 1.0).abs() < 0.08);
    }

    #[test]
    fn noiseless_rank_one_is_flagged() {
        let mut m = DMatrix::zeros(10, 20);
        m[(0, 0)] = 5.0;
        let params = SpectrumParams::new(0.5).unwrap();
        assert!(estimate_noise_scale(&m, &params).is_err());
    }
}
