use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dataset::TrainingSet;
use crate::error::{Error, Result};
use crate::linalg::random_orthonormal;
use crate::rng::{stream, stream_rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Haar-random singular frames.
    Random,
    /// End frames taken from the top singular vectors of Σ̂³¹.
    Aligned,
}

impl std::str::FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(InitMode::Random),
            "aligned" => Ok(InitMode::Aligned),
            other => Err(Error::ConfigParse(format!("unknown init mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Activation {
    Linear,
    LeakyRelu { slope: f64 },
}

impl Activation {
    pub fn is_linear(&self) -> bool {
        matches!(self, Activation::Linear)
    }

    pub(crate) fn apply(&self, z: f64) -> f64 {
        match *self {
            Activation::Linear => z,
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
        }
    }

    pub(crate) fn derivative(&self, z: f64) -> f64 {
        match *self {
            Activation::Linear => 1.0,
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentDims {
    pub n1: usize,
    /// Hidden width, shared by every hidden layer.
    pub n2: usize,
    pub n3: usize,
    /// Number of layers of units, so `depth − 1` weight matrices.
    pub depth: usize,
}

impl StudentDims {
    pub fn new(n1: usize, n2: usize, n3: usize, depth: usize) -> Result<Self> {
        if depth < 3 {
            return Err(Error::ConfigInvalid(format!("depth must be at least 3, got {depth}")));
        }
        if n2 == 0 || n2 > n1.min(n3) {
            return Err(Error::DimError(format!(
                "hidden width {n2} must lie in 1..={}",
                n1.min(n3)
            )));
        }
        Ok(StudentDims { n1, n2, n3, depth })
    }

    pub fn weight_count(&self) -> usize {
        self.depth - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitInfo {
    pub eps: f64,
    pub mode: InitMode,
    pub seed: u64,
}

/// Weights of a deep student. `layers[0]` acts on the input.
#[derive(Clone, Debug)]
pub struct StudentState {
    pub layers: Vec<DMatrix<f64>>,
    pub dims: StudentDims,
    pub init: InitInfo,
    pub activation: Activation,
    /// Singular frames O₀..O_L while the weights keep the diagonal form
    /// `W_l = O_l diag(a) O_{l−1}ᵀ`; cleared by dense training.
    pub(crate) frames: Option<Vec<DMatrix<f64>>>,
}

impl StudentState {
    /// Product of all weight matrices, N₃ × N₁.
    pub fn composite(&self) -> DMatrix<f64> {
        let mut w = self.layers[0].clone();
        for layer in &self.layers[1..] {
            w = layer * w;
        }
        w
    }

    pub fn depth(&self) -> usize {
        self.dims.depth
    }

    /// Network output for a batch of inputs (columns).
    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (l, w) in self.layers.iter().enumerate() {
            h = w * h;
            if l < last && !self.activation.is_linear() {
                let act = self.activation;
                h.apply(|z| *z = act.apply(*z));
            }
        }
        h
    }

    /// True when the weights are still in the balanced diagonal form.
    pub fn has_frames(&self) -> bool {
        self.frames.is_some()
    }
}

/// Balanced small initialisation: every layer is `O_l · ε^{1/(N_l−1)} · O_{l−1}ᵀ`
/// so the composite map starts with all singular values equal to ε.
pub fn init_student(
    dims: StudentDims,
    eps: f64,
    mode: InitMode,
    dataset: Option<&TrainingSet>,
    seed: u64,
    activation: Activation,
) -> Result<StudentState> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::ConfigInvalid(format!("eps must be positive, got {eps}")));
    }
    if let Activation::LeakyRelu { slope } = activation {
        if !(0.0..1.0).contains(&slope) {
            return Err(Error::ConfigInvalid(format!("leaky slope must lie in [0, 1), got {slope}")));
        }
    }
    let StudentDims { n1, n2, n3, .. } = dims;
    let nw = dims.weight_count();
    let mut rng = stream_rng(seed, stream::STUDENT);
    let (first, last) = match mode {
        InitMode::Random => (random_orthonormal(n1, n2, &mut rng), random_orthonormal(n3, n2, &mut rng)),
        InitMode::Aligned => {
            let ds = dataset.ok_or(Error::MissingDataset)?;
            if ds.n1() != n1 || ds.n3() != n3 {
                return Err(Error::DimError(format!(
                    "student {n3}x{n1} does not match data {}x{}",
                    ds.n3(),
                    ds.n1()
                )));
            }
            if ds.svd31.s.len() < n2 {
                return Err(Error::DimError(format!(
                    "only {} data modes for {n2} hidden units",
                    ds.svd31.s.len()
                )));
            }
            (ds.svd31.v.columns(0, n2).into_owned(), ds.svd31.u.columns(0, n2).into_owned())
        }
    };
    let mut frames = Vec::with_capacity(nw + 1);
    frames.push(first);
    for _ in 1..nw {
        frames.push(random_orthonormal(n2, n2, &mut rng));
    }
    frames.push(last);

    let a = eps.powf(1.0 / nw as f64);
    let layers = (1..=nw)
        .map(|l| (&frames[l] * a) * frames[l - 1].transpose())
        .collect();
    Ok(StudentState {
        layers,
        dims,
        init: InitInfo { eps, mode, seed },
        activation,
        frames: Some(frames),
    })
}
