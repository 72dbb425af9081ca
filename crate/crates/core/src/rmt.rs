//! Marchenko–Pastur bulk, outlier transfer function and singular-vector overlaps
//! for a low-rank signal plus white noise.
//!
//! All quantities are expressed in units of the bulk scale σ: a singular value
//! `shat` with scale σ behaves exactly like `shat/σ` at unit scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simpson intervals used for every spectral average (must be even).
pub const QUADRATURE_INTERVALS: usize = 10_000;

/// Aspect ratio `A = N3/N1` and bulk scale σ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    aspect: f64,
    scale: f64,
}

impl SpectrumParams {
    pub fn new(aspect: f64) -> Result<Self> {
        Self::with_scale(aspect, 1.0)
    }

    pub fn with_scale(aspect: f64, scale: f64) -> Result<Self> {
        if !(aspect > 0.0 && aspect <= 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "aspect ratio must lie in (0, 1], got {aspect}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::ConfigInvalid(format!(
                "bulk scale must be positive, got {scale}"
            )));
        }
        Ok(SpectrumParams { aspect, scale })
    }

    /// Aspect ratio of an `rows × cols` matrix, taking the smaller side first.
    pub fn for_shape(rows: usize, cols: usize, scale: f64) -> Result<Self> {
        let (a, b) = (rows.min(cols), rows.max(cols));
        if a == 0 {
            return Err(Error::DimError(format!("empty {rows}x{cols} matrix")));
        }
        Self::with_scale(a as f64 / b as f64, scale)
    }

    pub fn aspect(&self) -> f64 {
        self.aspect
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn lower_edge(&self) -> f64 {
        self.scale * (1.0 - self.aspect.sqrt())
    }

    pub fn upper_edge(&self) -> f64 {
        self.scale * (1.0 + self.aspect.sqrt())
    }
}

/// Overlaps of a detected data mode with its teacher mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapTriple {
    /// |û·ū|, output side.
    pub o_u: f64,
    /// |v̂·v̄|, input side.
    pub o_v: f64,
    /// Product `o_u · o_v`.
    pub o: f64,
}

/// Closed interval of singular values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: f64,
    pub hi: f64,
}

impl Region {
    pub fn new(lo: f64, hi: f64) -> Self {
        Region { lo, hi }
    }

    pub fn support(params: &SpectrumParams) -> Self {
        Region::new(params.lower_edge(), params.upper_edge())
    }
}

pub fn detection_threshold(params: &SpectrumParams) -> f64 {
    params.scale * params.aspect.powf(0.25)
}

/// Marchenko–Pastur density of singular values.
pub fn mp_density(shat: f64, params: &SpectrumParams) -> f64 {
    let a = params.aspect;
    let x = shat / params.scale;
    let lo = 1.0 - a.sqrt();
    let hi = 1.0 + a.sqrt();
    if x < lo || x > hi {
        return 0.0;
    }
    if x <= 0.0 {
        // A = 1: the density tends to 2/π at the origin.
        return 2.0 / (std::f64::consts::PI * params.scale);
    }
    let d = (hi * hi - x * x) * (x * x - lo * lo);
    d.max(0.0).sqrt() / (std::f64::consts::PI * a * x) / params.scale
}

/// Quadrature nodes and weights for MP averages over a region.
///
/// With λ = (ŝ/σ)² = (1+A) + 2√A·cos θ the MP measure becomes
/// `(2√A)² sin²θ / (2πAλ) dθ`, which is smooth up to the support edges.
#[derive(Clone, Debug)]
pub struct MpQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    mass: f64,
}

impl MpQuadrature {
    pub fn new(params: &SpectrumParams, region: Region) -> Self {
        Self::with_intervals(params, region, QUADRATURE_INTERVALS)
    }

    pub fn with_intervals(params: &SpectrumParams, region: Region, intervals: usize) -> Self {
        let n = intervals + intervals % 2;
        let a = params.aspect;
        let sigma = params.scale;
        let c = 1.0 + a;
        let r = 2.0 * a.sqrt();
        let lam = |s: f64| {
            let x = (s / sigma).max(0.0);
            (x * x).clamp(c - r, c + r)
        };
        let theta = |l: f64| ((l - c) / r).clamp(-1.0, 1.0).acos();
        let th_lo = theta(lam(region.hi));
        let th_hi = theta(lam(region.lo));
        let mut nodes = Vec::with_capacity(n + 1);
        let mut weights = Vec::with_capacity(n + 1);
        if th_hi <= th_lo {
            return MpQuadrature {
                nodes,
                weights,
                mass: 0.0,
            };
        }
        let h = (th_hi - th_lo) / n as f64;
        let pi = std::f64::consts::PI;
        for i in 0..=n {
            let th = th_lo + h * i as f64;
            let l = (c + r * th.cos()).max(0.0);
            let (sin2, inv_l) = (th.sin().powi(2), 1.0 / l);
            let density = if l > 1e-300 {
                r * r * sin2 * inv_l / (2.0 * pi * a)
            } else {
                // λ → 0 only when A = 1 at θ = π; sin²θ/λ → 2/r there.
                r * 2.0 / (2.0 * pi * a)
            };
            let coef = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            nodes.push(sigma * l.sqrt());
            weights.push(coef * h / 3.0 * density);
        }
        let mass = weights.iter().sum();
        MpQuadrature {
            nodes,
            weights,
            mass,
        }
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Unnormalised integral of `g` against the MP measure.
    pub fn integral(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w * g(s))
            .sum()
    }

    /// Like [`integral`](Self::integral) for fallible integrands.
    pub fn try_integral(&self, mut g: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
        let mut total = 0.0;
        for (&s, &w) in self.nodes.iter().zip(&self.weights) {
            total += w * g(s)?;
        }
        Ok(total)
    }

    /// Conditional mean of `g` within the region.
    pub fn mean(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        if self.mass < 1e-12 {
            let (lo, hi) = match (self.nodes.first(), self.nodes.last()) {
                (Some(&a), Some(&b)) => (b.min(a), a.max(b)),
                _ => (f64::NAN, f64::NAN),
            };
            return Err(Error::EmptyRegion { lo, hi });
        }
        Ok(self.integral(g) / self.mass)
    }
}

/// Probability mass of the MP distribution inside `region`.
pub fn mp_mass(region: Region, params: &SpectrumParams) -> f64 {
    MpQuadrature::new(params, region).mass()
}

/// Conditional expectation of `g(ŝ)` given ŝ in `region`.
pub fn mp_region_mean(
    g: impl Fn(f64) -> f64,
    region: Region,
    params: &SpectrumParams,
) -> Result<f64> {
    let q = MpQuadrature::new(params, region);
    if q.mass() < 1e-12 {
        return Err(Error::EmptyRegion {
            lo: region.lo,
            hi: region.hi,
        });
    }
    q.mean(g)
}

/// Point `f` with MP mass `left_mass` below it.
pub fn mp_quantile(params: &SpectrumParams, left_mass: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&left_mass) {
        return Err(Error::ConfigInvalid(format!(
            "quantile mass must lie in [0, 1], got {left_mass}"
        )));
    }
    let (mut lo, mut hi) = (params.lower_edge(), params.upper_edge());
    if left_mass == 0.0 {
        return Ok(lo);
    }
    if left_mass == 1.0 {
        return Ok(hi);
    }
    let base = lo;
    while hi - lo > 1e-10 * params.scale {
        let mid = 0.5 * (lo + hi);
        if mp_mass(Region::new(base, mid), params) < left_mass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Position of the data singular value produced by a teacher mode `sbar`.
pub fn shat_of_sbar(sbar: f64, params: &SpectrumParams) -> f64 {
    let a = params.aspect;
    let x = sbar / params.scale;
    if x > a.powf(0.25) {
        let x2 = x * x;
        params.scale * ((1.0 + x2) * (a + x2)).sqrt() / x
    } else {
        params.upper_edge()
    }
}

/// Inverse of [`shat_of_sbar`] on the detected branch.
pub fn sbar_of_shat(shat: f64, params: &SpectrumParams) -> Result<f64> {
    let a = params.aspect;
    let y = shat / params.scale;
    let edge = 1.0 + a.sqrt();
    if !(y > edge) {
        return Err(Error::NotDetectable {
            shat,
            edge: params.upper_edge(),
        });
    }
    let y2 = y * y;
    let inner = 1.0 - a.sqrt();
    let disc = (y2 - edge * edge) * (y2 - inner * inner);
    let x2 = 0.5 * ((y2 - 1.0 - a) + disc.sqrt());
    Ok(params.scale * x2.sqrt())
}

pub fn overlap(sbar: f64, params: &SpectrumParams) -> OverlapTriple {
    let a = params.aspect;
    let x = sbar / params.scale;
    if !(x > a.powf(0.25)) {
        return OverlapTriple {
            o_u: 0.0,
            o_v: 0.0,
            o: 0.0,
        };
    }
    let x2 = x * x;
    let out = 1.0 - a * (1.0 + x2) / (x2 * (a + x2));
    let inp = 1.0 - (a + x2) / (x2 * (1.0 + x2));
    let o_u = out.clamp(0.0, 1.0).sqrt();
    let o_v = inp.clamp(0.0, 1.0).sqrt();
    OverlapTriple { o_u, o_v, o: o_u * o_v }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a: f64) -> SpectrumParams {
        SpectrumParams::new(a).unwrap()
    }

    #[test]
    fn threshold_values() {
        assert_eq!(detection_threshold(&p(1.0)), 1.0);
        assert!((detection_threshold(&p(0.5)) - 0.8409).abs() < 1e-4);
        assert!((detection_threshold(&p(0.0625)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn density_values() {
        let d = mp_density(1.0, &p(1.0));
        assert!((d - 3f64.sqrt() / std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(mp_density(1.0 + 0.5f64.sqrt(), &p(0.5)), 0.0);
        assert_eq!(mp_density(5.0, &p(0.5)), 0.0);
        assert_eq!(mp_density(0.1, &p(0.5)), 0.0);
    }

    #[test]
    fn density_scales() {
        let s = SpectrumParams::with_scale(0.5, 2.0).unwrap();
        assert!((mp_density(2.0, &s) - mp_density(1.0, &p(0.5)) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn normalisation_and_second_moment() {
        for a in [0.25, 0.5, 1.0] {
            let params = p(a);
            let sup = Region::support(&params);
            assert!((mp_region_mean(|_| 1.0, sup, &params).unwrap() - 1.0).abs() < 1e-8);
            assert!((mp_mass(sup, &params) - 1.0).abs() < 1e-8);
            let m2 = mp_region_mean(|s| s * s, sup, &params).unwrap();
            assert!((m2 - 1.0).abs() < 1e-6, "A={a}: {m2}");
        }
    }

    #[test]
    fn first_moment_matches_oracle() {
        // mpmath adaptive quadrature of s·P(s) at A = 0.5
        let params = p(0.5);
        let m1 = mp_region_mean(|s| s, Region::support(&params), &params).unwrap();
        assert!((m1 - 0.932_799_467_527_078).abs() < 1e-9);
    }

    #[test]
    fn region_masses_add_up() {
        let params = p(0.5);
        let f = mp_quantile(&params, 0.3).unwrap();
        let lo = Region::new(params.lower_edge(), f);
        let hi = Region::new(f, params.upper_edge());
        let total = mp_region_mean(|_| 1.0, lo, &params).unwrap() * mp_mass(lo, &params)
            + mp_region_mean(|_| 1.0, hi, &params).unwrap() * mp_mass(hi, &params);
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn empty_region_rejected() {
        let params = p(0.5);
        let r = Region::new(3.0, 4.0);
        assert!(matches!(
            mp_region_mean(|_| 1.0, r, &params),
            Err(Error::EmptyRegion { .. })
        ));
    }

    #[test]
    fn quantiles() {
        let params = p(0.5);
        assert!((mp_quantile(&params, 0.0).unwrap() - (1.0 - 0.5f64.sqrt())).abs() < 1e-12);
        assert!((mp_quantile(&params, 1.0).unwrap() - (1.0 + 0.5f64.sqrt())).abs() < 1e-12);
        // Medians from mpmath root-finding on the cumulative integral.
        let m1 = mp_quantile(&p(1.0), 0.5).unwrap();
        assert!((m1 - 0.807_945_506_599_034).abs() < 1e-9, "{m1}");
        let mass = mp_mass(Region::new(0.0, m1), &p(1.0));
        assert!((mass - 0.5).abs() < 1e-8);
        let m05 = mp_quantile(&params, 0.5).unwrap();
        assert!((m05 - 0.911_299_007_780_302).abs() < 1e-9, "{m05}");
    }

    #[test]
    fn transfer_function() {
        assert!((shat_of_sbar(2.0, &p(1.0)) - 2.5).abs() < 1e-14);
        assert_eq!(shat_of_sbar(0.5, &p(1.0)), 2.0);
        for a in [0.1f64, 0.5, 1.0] {
            let t = a.powf(0.25);
            assert!((shat_of_sbar(t, &p(a)) - (1.0 + a.sqrt())).abs() < 1e-12);
            // continuity from above
            assert!((shat_of_sbar(t * (1.0 + 1e-9), &p(a)) - (1.0 + a.sqrt())).abs() < 1e-6);
        }
        let big = 1e3;
        assert!((shat_of_sbar(big, &p(0.5)) / big - 1.0).abs() < 1e-4);
    }

    #[test]
    fn inverse_transfer() {
        assert!((sbar_of_shat(2.5, &p(1.0)).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            sbar_of_shat(1.2, &p(1.0)),
            Err(Error::NotDetectable { .. })
        ));
        assert!(sbar_of_shat(2.0, &p(1.0)).is_err());
        for a in [0.25f64, 0.5, 1.0] {
            let s = sbar_of_shat((1.0 + a.sqrt()) * (1.0 + 1e-14), &p(a)).unwrap();
            assert!((s - a.powf(0.25)).abs() < 1e-5, "A={a}: {s}");
        }
    }

    #[test]
    fn overlap_values() {
        let o = overlap(2.0, &p(1.0));
        assert!((o.o_u - 0.75f64.sqrt()).abs() < 1e-12);
        assert!((o.o_v - 0.75f64.sqrt()).abs() < 1e-12);
        assert!((o.o - 0.75).abs() < 1e-12);
        for a in [0.2f64, 0.5, 1.0] {
            let below = overlap(0.9 * a.powf(0.25), &p(a));
            assert_eq!((below.o_u, below.o_v, below.o), (0.0, 0.0, 0.0));
        }
        let far = overlap(1e6, &p(0.5));
        assert!((far.o - 1.0).abs() < 1e-9);
        // brackets 0.94152 and 0.89444 at s̄ = 3, A = 0.5
        let o3 = overlap(3.0, &p(0.5));
        assert!((o3.o_u.powi(2) - 0.94152).abs() < 1e-5);
        assert!((o3.o_v.powi(2) - 0.89444).abs() < 1e-5);
        assert!((o3.o.powi(2) - 0.84214).abs() < 1e-5);
    }

    #[test]
    fn scale_homogeneity() {
        let s = SpectrumParams::with_scale(0.5, 1.7).unwrap();
        let u = p(0.5);
        assert!((shat_of_sbar(3.4, &s) - 1.7 * shat_of_sbar(2.0, &u)).abs() < 1e-12);
        assert!((overlap(3.4, &s).o - overlap(2.0, &u).o).abs() < 1e-12);
        assert!((detection_threshold(&s) - 1.7 * detection_threshold(&u)).abs() < 1e-12);
    }

    #[test]
    fn invalid_params() {
        assert!(SpectrumParams::new(0.0).is_err());
        assert!(SpectrumParams::new(1.5).is_err());
        assert!(SpectrumParams::with_scale(0.5, -1.0).is_err());
    }
}
