//! Analytic train and test error curves for training-aligned students.

use serde::{Deserialize, Serialize};

use crate::dynamics::{s_of_t, t_of_s, DynamicsParams};
use crate::error::{Error, Result};
use crate::rmt::{
    detection_threshold, mp_quantile, overlap, shat_of_sbar, MpQuadrature, Region, SpectrumParams,
};

/// Grid resolution and range of the optimal-stopping search, in units of τ.
pub const STOPPING_GRID_POINTS: usize = 200;
pub const STOPPING_GRID_LO: f64 = 1e-2;
pub const STOPPING_GRID_HI: f64 = 1e3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryConfig {
    /// Teacher singular values s̄_α, descending, in units of the noise scale.
    pub teacher_snrs: Vec<f64>,
    pub n1: usize,
    pub n3: usize,
    /// Student rank N₂ (hidden width).
    pub student_rank: usize,
    /// Number of training examples P.
    pub sample_count: usize,
    pub dynamics: DynamicsParams,
    /// Bulk scale σ of the data spectrum (1 for unit-variance noise).
    #[serde(default = "unit")]
    pub bulk_scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl TheoryConfig {
    /// Full-rank student (N₂ = N₃) trained on P = N₁ examples.
    pub fn new(teacher_snrs: Vec<f64>, n1: usize, n3: usize, dynamics: DynamicsParams) -> Result<Self> {
        let cfg = TheoryConfig {
            teacher_snrs,
            n1,
            n3,
            student_rank: n3,
            sample_count: n1,
            dynamics,
            bulk_scale: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Labels without teacher structure whose spectrum is the MP bulk at scale σ_r.
    pub fn randomized(
        teacher_snrs: &[f64],
        n1: usize,
        n3: usize,
        sigma_z: f64,
        dynamics: DynamicsParams,
    ) -> Result<Self> {
        let params = randomized_spectrum_params(teacher_snrs, n3, n1, sigma_z)?;
        TheoryConfig::new(Vec::new(), n1, n3, dynamics)?.with_bulk_scale(params.scale())
    }

    pub fn with_student_rank(mut self, n2: usize) -> Result<Self> {
        self.student_rank = n2;
        self.validate()?;
        Ok(self)
    }

    pub fn with_samples(mut self, p: usize) -> Result<Self> {
        self.sample_count = p;
        self.validate()?;
        Ok(self)
    }

    pub fn with_bulk_scale(mut self, scale: f64) -> Result<Self> {
        self.bulk_scale = scale;
        self.validate()?;
        Ok(self)
    }

    pub fn with_dynamics(mut self, dynamics: DynamicsParams) -> Self {
        self.dynamics = dynamics;
        self
    }

    pub fn teacher_rank(&self) -> usize {
        self.teacher_snrs.len()
    }

    pub fn aspect(&self) -> f64 {
        self.n3 as f64 / self.n1 as f64
    }

    /// Data density 𝒟 = P/N₁.
    pub fn data_density(&self) -> f64 {
        self.sample_count as f64 / self.n1 as f64
    }

    pub fn spectrum(&self) -> Result<SpectrumParams> {
        SpectrumParams::with_scale(self.aspect(), self.bulk_scale)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.n1 == 0 || self.n3 == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.n3 > self.n1 {
            return bad(format!(
                "aspect ratio N3/N1 = {}/{} exceeds 1",
                self.n3, self.n1
            ));
        }
        if self.teacher_rank() > self.student_rank || self.student_rank > self.n3 {
            return bad(format!(
                "need teacher rank {} <= student rank {} <= N3 {}",
                self.teacher_rank(),
                self.student_rank,
                self.n3
            ));
        }
        if self.sample_count == 0 {
            return bad("sample count must be positive".into());
        }
        if self.teacher_snrs.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("teacher singular values must be finite and non-negative".into());
        }
        if self.teacher_snrs.windows(2).any(|w| w[0] < w[1]) {
            return bad("teacher singular values must be sorted in descending order".into());
        }
        if !(self.bulk_scale > 0.0 && self.bulk_scale.is_finite()) {
            return bad(format!("bulk scale must be positive, got {}", self.bulk_scale));
        }
        Ok(())
    }

    fn teacher_energy(&self) -> f64 {
        self.teacher_snrs.iter().map(|s| s * s).sum()
    }
}

/// Strength of a mode with data value ŝ. Modes at or below ε (only the lowest
/// sliver of an A = 1 bulk) are treated as frozen at ε.
pub(crate) fn strength(t: f64, shat: f64, dynamics: &DynamicsParams) -> Result<f64> {
    if shat <= dynamics.eps() {
        return Ok(dynamics.eps());
    }
    s_of_t(t, shat, dynamics)
}

#[derive(Clone, Copy, Debug)]
struct SignalMode {
    sbar: f64,
    shat: f64,
    /// Overlap factor multiplying the cross term.
    o: f64,
}

/// Prepared evaluator for the P = N₁ learning curves.
#[derive(Clone, Debug)]
pub struct TheoryModel {
    cfg: TheoryConfig,
    learned_bulk: Option<MpQuadrature>,
    unlearned_mean_sq: f64,
    bulk_mean_sq: f64,
    signal: Vec<SignalMode>,
}

impl TheoryModel {
    pub fn new(cfg: &TheoryConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.sample_count != cfg.n1 {
            return Err(Error::ConfigInvalid(format!(
                "learning-curve theory assumes P = N1 (got P = {}, N1 = {})",
                cfg.sample_count, cfg.n1
            )));
        }
        let spectrum = cfg.spectrum()?;
        let support = Region::support(&spectrum);
        let n3 = cfg.n3 as f64;
        let n2 = cfg.student_rank as f64;
        let f = mp_quantile(&spectrum, 1.0 - n2 / n3)?;
        let unlearned_mean_sq = if cfg.student_rank < cfg.n3 {
            MpQuadrature::new(&spectrum, Region::new(support.lo, f)).mean(|s| s * s)?
        } else {
            0.0
        };
        let learned_bulk = if cfg.student_rank > cfg.teacher_rank() {
            let q = MpQuadrature::new(&spectrum, Region::new(f, support.hi));
            if q.mass() < 1e-12 {
                return Err(Error::EmptyRegion { lo: f, hi: support.hi });
            }
            Some(q)
        } else {
            None
        };
        let bulk_mean_sq = MpQuadrature::new(&spectrum, support).mean(|s| s * s)?;
        let signal = cfg
            .teacher_snrs
            .iter()
            .map(|&sbar| SignalMode {
                sbar,
                shat: shat_of_sbar(sbar, &spectrum),
                o: overlap(sbar, &spectrum).o,
            })
            .collect();
        Ok(TheoryModel {
            cfg: cfg.clone(),
            learned_bulk,
            unlearned_mean_sq,
            bulk_mean_sq,
            signal,
        })
    }

    pub fn config(&self) -> &TheoryConfig {
        &self.cfg
    }

    fn bulk_mean(&self, g: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        let Some(q) = &self.learned_bulk else {
            return Ok(0.0);
        };
        Ok(q.try_integral(g)? / q.mass())
    }

    pub fn train_error(&self, t: f64) -> Result<f64> {
        let cfg = &self.cfg;
        let dynamics = &cfg.dynamics;
        let nbar = cfg.teacher_rank() as f64;
        let n2 = cfg.student_rank as f64;
        let n3 = cfg.n3 as f64;
        let bulk = self.bulk_mean(|s| Ok((strength(t, s, dynamics)? - s).powi(2)))?;
        let mut num = (n3 - n2) * self.unlearned_mean_sq + (n2 - nbar) * bulk;
        let mut den = (n3 - nbar) * self.bulk_mean_sq;
        for m in &self.signal {
            num += (strength(t, m.shat, dynamics)? - m.shat).powi(2);
            den += m.shat * m.shat;
        }
        Ok(num / den)
    }

    pub fn test_error(&self, t: f64) -> Result<f64> {
        let cfg = &self.cfg;
        let energy = cfg.teacher_energy();
        if energy <= 0.0 {
            return Err(Error::ConfigInvalid(
                "test error needs a teacher with non-zero singular values".into(),
            ));
        }
        let dynamics = &cfg.dynamics;
        let nbar = cfg.teacher_rank() as f64;
        let n2 = cfg.student_rank as f64;
        let bulk = self.bulk_mean(|s| Ok(strength(t, s, dynamics)?.powi(2)))?;
        let mut num = (n2 - nbar) * bulk;
        for m in &self.signal {
            let s = strength(t, m.shat, dynamics)?;
            num += (s - m.sbar).powi(2) + 2.0 * s * m.sbar * (1.0 - m.o);
        }
        Ok(num / energy)
    }
}

pub fn theory_train_error(t: f64, cfg: &TheoryConfig) -> Result<f64> {
    TheoryModel::new(cfg)?.train_error(t)
}

pub fn theory_test_error(t: f64, cfg: &TheoryConfig) -> Result<f64> {
    TheoryModel::new(cfg)?.test_error(t)
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Minimises a curve over t ≥ 0: coarse log grid (plus t = 0), then
/// golden-section refinement between the grid neighbours of the minimum.
pub fn minimize_curve(f: impl Fn(f64) -> Result<f64>, tau: f64) -> Result<(f64, f64)> {
    let mut grid = vec![0.0];
    grid.extend(log_grid(STOPPING_GRID_LO * tau, STOPPING_GRID_HI * tau, STOPPING_GRID_POINTS));
    let values = grid.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if best == 0 {
        return Ok((0.0, values[0]));
    }
    let mut a = grid[best - 1];
    let mut b = grid[(best + 1).min(grid.len() - 1)];
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while (b - a) > 1e-6 * 0.5 * (a + b) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2)?;
        }
    }
    let (t, v) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if v <= values[best] {
        Ok((t, v))
    } else {
        Ok((grid[best], values[best]))
    }
}

/// Optimal early-stopping time and the test error reached there.
pub fn optimal_stopping(cfg: &TheoryConfig) -> Result<(f64, f64)> {
    let model = TheoryModel::new(cfg)?;
    minimize_curve(|t| model.test_error(t), cfg.dynamics.tau())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rank1Optimum {
    pub s_opt: f64,
    pub eps_opt: f64,
    pub t_opt: f64,
}

/// Optimal stopping for a single teacher mode, in closed form.
pub fn rank1_closed_form(
    sbar: f64,
    params: &SpectrumParams,
    dynamics: &DynamicsParams,
) -> Result<Rank1Optimum> {
    let threshold = detection_threshold(params);
    if !(sbar > threshold) {
        return Err(Error::BelowThreshold { sbar, threshold });
    }
    let o = overlap(sbar, params).o;
    let s_opt = sbar * o;
    let shat = shat_of_sbar(sbar, params);
    // A barely detectable mode is optimal below its initial strength: stop at once.
    let t_opt = if s_opt <= dynamics.eps() {
        0.0
    } else {
        t_of_s(s_opt, shat, dynamics)?
    };
    Ok(Rank1Optimum {
        s_opt,
        eps_opt: 1.0 - o * o,
        t_opt,
    })
}

/// Test error of the best estimator that shrinks each detected mode to s̄·𝒪(s̄).
pub fn nongradient_optimal_error(snrs: &[f64], params: &SpectrumParams) -> Result<f64> {
    if snrs.is_empty() {
        return Err(Error::ConfigInvalid("no teacher singular values given".into()));
    }
    let energy: f64 = snrs.iter().map(|s| s * s).sum();
    if energy <= 0.0 {
        return Ok(1.0);
    }
    let residual: f64 = snrs
        .iter()
        .map(|&s| s * s * (1.0 - overlap(s, params).o.powi(2)))
        .sum();
    Ok(residual / energy)
}

/// Bulk spectrum of labels that keep the output variance but lose all structure.
pub fn randomized_spectrum_params(
    snrs: &[f64],
    n3: usize,
    n1: usize,
    sigma_z: f64,
) -> Result<SpectrumParams> {
    if n3 == 0 || n1 == 0 {
        return Err(Error::ConfigInvalid("dimensions must be positive".into()));
    }
    let energy: f64 = snrs.iter().map(|s| s * s).sum();
    let scale = (energy / n3 as f64 + sigma_z * sigma_z / n1 as f64).sqrt();
    SpectrumParams::with_scale(n3 as f64 / n1 as f64, scale)
}

/// Prepared evaluator for the undersampled regime P < N₁ = N₂ = N₃.
#[derive(Clone, Debug)]
pub struct UndersampledModel {
    cfg: TheoryConfig,
    bulk: MpQuadrature,
    signal: Vec<SignalMode>,
}

impl UndersampledModel {
    pub fn new(cfg: &TheoryConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.sample_count >= cfg.n1 {
            return Err(Error::RegimeError(format!(
                "undersampled theory needs P < N1 (got P = {}, N1 = {})",
                cfg.sample_count, cfg.n1
            )));
        }
        if cfg.n1 != cfg.n3 || cfg.student_rank != cfg.n3 {
            return Err(Error::ConfigInvalid(
                "undersampled theory is stated for N1 = N2 = N3".into(),
            ));
        }
        if cfg.teacher_rank() > cfg.sample_count {
            return Err(Error::ConfigInvalid("teacher rank exceeds sample count".into()));
        }
        let d = cfg.data_density();
        let spectrum = SpectrumParams::with_scale(d, cfg.bulk_scale)?;
        let bulk = MpQuadrature::new(&spectrum, Region::support(&spectrum));
        let signal = cfg
            .teacher_snrs
            .iter()
            .map(|&sbar| {
                let attenuated = d.sqrt() * sbar;
                SignalMode {
                    sbar,
                    shat: shat_of_sbar(attenuated, &spectrum),
                    // Only the in-span part (norm √𝒟) of the teacher input vector
                    // can be matched by a data input vector.
                    o: d.sqrt() * overlap(attenuated, &spectrum).o,
                }
            })
            .collect();
        Ok(UndersampledModel {
            cfg: cfg.clone(),
            bulk,
            signal,
        })
    }

    pub fn test_error(&self, t: f64) -> Result<f64> {
        let cfg = &self.cfg;
        let energy = cfg.teacher_energy();
        if energy <= 0.0 {
            return Err(Error::ConfigInvalid(
                "test error needs a teacher with non-zero singular values".into(),
            ));
        }
        let dynamics = &cfg.dynamics;
        let eps = dynamics.eps();
        let frozen = (cfg.n3 - cfg.sample_count) as f64 * eps * eps;
        let bulk = self
            .bulk
            .try_integral(|s| Ok(strength(t, s, dynamics)?.powi(2)))?
            / self.bulk.mass();
        let mut num = frozen + (cfg.sample_count - cfg.teacher_rank()) as f64 * bulk;
        for m in &self.signal {
            let s = strength(t, m.shat, dynamics)?;
            num += (s - m.sbar).powi(2) + 2.0 * s * m.sbar * (1.0 - m.o);
        }
        Ok(num / energy)
    }
}

pub fn undersampled_test_error(t: f64, cfg: &TheoryConfig) -> Result<f64> {
    UndersampledModel::new(cfg)?.test_error(t)
}

/// Maps an oversampled problem (P ≥ N₁, Σ¹¹ = 𝒟·I) onto an equivalent
/// P = N₁ problem. With s' = √𝒟·s the mode equation becomes the 𝒟 = 1 one at
/// SNR √𝒟·s̄, time constant τ/√𝒟 and initial strength √𝒟·ε; relative test
/// errors are unchanged by the rescaling.
pub fn oversampled_equivalent(cfg: &TheoryConfig) -> Result<TheoryConfig> {
    cfg.validate()?;
    if cfg.sample_count < cfg.n1 {
        return Err(Error::RegimeError(format!(
            "oversampled mapping needs P >= N1 (got P = {}, N1 = {})",
            cfg.sample_count, cfg.n1
        )));
    }
    let d = cfg.data_density();
    let root = d.sqrt();
    let dynamics = DynamicsParams::new(
        cfg.dynamics.eps() * root,
        cfg.dynamics.tau() / root,
        cfg.dynamics.depth(),
    )?;
    let mut out = cfg.clone();
    out.teacher_snrs = cfg.teacher_snrs.iter().map(|s| s * root).collect();
    out.sample_count = cfg.n1;
    out.dynamics = dynamics;
    out.validate()?;
    Ok(out)
}
