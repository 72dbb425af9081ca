use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::teacher::TeacherSpec;
use crate::error::{Error, Result};
use crate::linalg::{frob_sq, identity_defect, random_orthonormal, Svd};
use crate::rng::{gaussian_matrix, stream, stream_rng};
use crate::theory::randomized_spectrum_params;

/// How the P training inputs are laid out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputDesign {
    /// P = N₁, X̂ = I.
    Orthonormal,
    /// P ≥ N₁, orthonormal rows scaled by √(P/N₁).
    Oversampled,
    /// P ≤ N₁, orthonormal columns.
    Undersampled,
    /// P = N₁, X̂ = I, labels replaced by structureless Gaussian noise.
    RandomizedLabels,
    /// iid N(0, 1/N₁) entries.
    GaussianInputs,
}

impl std::str::FromStr for InputDesign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "orthonormal" => InputDesign::Orthonormal,
            "oversampled" => InputDesign::Oversampled,
            "undersampled" => InputDesign::Undersampled,
            "randomized_labels" => InputDesign::RandomizedLabels,
            "gaussian_inputs" => InputDesign::GaussianInputs,
            other => return Err(Error::ConfigParse(format!("unknown input design {other:?}"))),
        })
    }
}

/// Inputs, noisy outputs and their second-order statistics.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    /// N₁ × P.
    pub x: DMatrix<f64>,
    /// N₃ × P.
    pub y: DMatrix<f64>,
    /// Y·Xᵀ.
    pub sigma31: DMatrix<f64>,
    /// X·Xᵀ.
    pub sigma11: DMatrix<f64>,
    pub svd31: Svd,
    pub design: InputDesign,
    sigma11_is_identity: bool,
}

impl TrainingSet {
    /// Builds the statistics for given inputs and labels.
    pub fn from_parts(x: DMatrix<f64>, y: DMatrix<f64>, design: InputDesign) -> Result<Self> {
        if x.ncols() != y.ncols() {
            return Err(Error::DimError(format!(
                "{} inputs but {} outputs",
                x.ncols(),
                y.ncols()
            )));
        }
        let sigma31 = &y * x.transpose();
        let sigma11 = &x * x.transpose();
        let sigma11_is_identity = identity_defect(&sigma11) < 1e-12;
        let svd31 = Svd::of(&sigma31);
        Ok(TrainingSet {
            x,
            y,
            sigma31,
            sigma11,
            svd31,
            design,
            sigma11_is_identity,
        })
    }

    pub fn n1(&self) -> usize {
        self.x.nrows()
    }

    pub fn n3(&self) -> usize {
        self.y.nrows()
    }

    pub fn samples(&self) -> usize {
        self.x.ncols()
    }

    pub fn sigma11_is_identity(&self) -> bool {
        self.sigma11_is_identity
    }

    /// Σ_μ ‖y_μ‖².
    pub fn label_energy(&self) -> f64 {
        frob_sq(&self.y)
    }

    pub fn top_singular_value(&self) -> f64 {
        self.svd31.s.first().copied().unwrap_or(0.0)
    }
}

impl InputDesign {
    /// Checks that `p` samples fit this design for N₁ inputs.
    pub fn check_samples(self, n1: usize, p: usize) -> Result<()> {
        let need = match self {
            InputDesign::Orthonormal | InputDesign::RandomizedLabels if p != n1 => "P = N1",
            InputDesign::Oversampled if p < n1 => "P >= N1",
            InputDesign::Undersampled if p > n1 => "P <= N1",
            _ if p == 0 => "P > 0",
            _ => return Ok(()),
        };
        Err(Error::ModeError(format!("{self:?} needs {need}, got P = {p} with N1 = {n1}")))
    }
}

fn inputs(n1: usize, p: usize, design: InputDesign, seed: u64) -> Result<DMatrix<f64>> {
    design.check_samples(n1, p)?;
    let mut rng = stream_rng(seed, stream::INPUTS);
    Ok(match design {
        InputDesign::Orthonormal | InputDesign::RandomizedLabels => DMatrix::identity(n1, n1),
        InputDesign::Oversampled => {
            let q = random_orthonormal(p, n1, &mut rng);
            q.transpose() * (p as f64 / n1 as f64).sqrt()
        }
        InputDesign::Undersampled => random_orthonormal(n1, p, &mut rng),
        InputDesign::GaussianInputs => gaussian_matrix(n1, p, (1.0 / n1 as f64).sqrt(), &mut rng),
    })
}

/// Noise block Z with iid N(0, σ_z²/N₁) entries.
pub fn noise_matrix(n3: usize, p: usize, n1: usize, sigma_z: f64, seed: u64) -> DMatrix<f64> {
    gaussian_matrix(n3, p, sigma_z / (n1 as f64).sqrt(), &mut stream_rng(seed, stream::NOISE))
}

/// Draws inputs and noisy labels `Ŷ = W̄X̂ + Z`.
pub fn make_dataset(teacher: &TeacherSpec, p: usize, design: InputDesign, seed: u64) -> Result<TrainingSet> {
    if p == 0 {
        return Err(Error::DimError("sample count must be positive".into()));
    }
    let n1 = teacher.n1();
    let n3 = teacher.n3();
    let x = inputs(n1, p, design, seed)?;
    let y = if design == InputDesign::RandomizedLabels {
        let params = randomized_spectrum_params(&teacher.snrs, n3, n1, teacher.sigma_z)?;
        let std = params.scale() / (n1 as f64).sqrt();
        gaussian_matrix(n3, p, std, &mut stream_rng(seed, stream::LABELS))
    } else {
        teacher.matrix() * &x + noise_matrix(n3, p, n1, teacher.sigma_z, seed)
    };
    TrainingSet::from_parts(x, y, design)
}

/// Dataset with caller-supplied noise (shared noise across related runs).
pub fn make_dataset_with_noise(
    teacher: &TeacherSpec,
    x: DMatrix<f64>,
    z: &DMatrix<f64>,
    design: InputDesign,
) -> Result<TrainingSet> {
    if x.nrows() != teacher.n1() || z.nrows() != teacher.n3() || z.ncols() != x.ncols() {
        return Err(Error::DimError(format!(
            "noise {}x{} and inputs {}x{} do not fit a {}x{} teacher",
            z.nrows(),
            z.ncols(),
            x.nrows(),
            x.ncols(),
            teacher.n3(),
            teacher.n1()
        )));
    }
    let y = teacher.matrix() * &x + z;
    TrainingSet::from_parts(x, y, design)
}
