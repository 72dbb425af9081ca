use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsParams;
use crate::error::{Error, Result};
use crate::simulator::{Activation, Engine, InitMode, InputDesign, StudentDims};
use crate::theory::TheoryConfig;

use super::recipes::FIGURES;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    TheoryCurve,
    Simulate,
    Shrink,
    Transfer,
    Reproduce,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeacherSection {
    pub snrs: Vec<f64>,
    pub n1: usize,
    pub n3: usize,
    pub sigma_z: f64,
}

impl Default for TeacherSection {
    fn default() -> Self {
        TeacherSection {
            snrs: vec![3.0],
            n1: 100,
            n3: 50,
            sigma_z: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudentSection {
    /// Hidden width N₂; defaults to N₃.
    pub width: Option<usize>,
    /// Number of layers of neurons, input and output included.
    pub depth: usize,
    pub eps: f64,
    pub init: InitMode,
    pub activation: Activation,
}

impl Default for StudentSection {
    fn default() -> Self {
        StudentSection {
            width: None,
            depth: 3,
            eps: 1e-3,
            init: InitMode::Aligned,
            activation: Activation::Linear,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Training examples P; defaults to N₁.
    pub samples: Option<usize>,
    pub design: InputDesign,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            samples: None,
            design: InputDesign::Orthonormal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    /// Defaults to `default_learning_rate` of each dataset.
    pub learning_rate: Option<f64>,
    /// Horizon in units of τ.
    pub t_max: f64,
    pub record_points: usize,
    pub seeds: usize,
    /// Data modes to follow; defaults to the teacher rank.
    pub tracked_modes: Option<usize>,
    pub early_stop: Option<f64>,
    pub engine: Engine,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            learning_rate: None,
            t_max: 30.0,
            record_points: 300,
            seeds: 1,
            tracked_modes: None,
            early_stop: None,
            engine: Engine::Auto,
        }
    }
}

/// Time grid of analytic curves, log-spaced in units of τ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveSection {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl Default for CurveSection {
    fn default() -> Self {
        CurveSection {
            t_min: 1e-2,
            t_max: 100.0,
            points: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShrinkSection {
    /// Matrix CSV to denoise.
    pub input: Option<PathBuf>,
    /// Aspect ratio of the noise model; defaults to rows/cols of the input.
    pub aspect: Option<f64>,
    pub margin: f64,
}

impl Default for ShrinkSection {
    fn default() -> Self {
        ShrinkSection {
            input: None,
            aspect: None,
            margin: crate::shrinkage::DEFAULT_MARGIN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferSection {
    pub snr_a: f64,
    pub snr_b: Vec<f64>,
    pub q: Vec<f64>,
    /// Seeds per grid cell for the simulated benefit; 0 skips simulation.
    pub sim_seeds: usize,
}

impl Default for TransferSection {
    fn default() -> Self {
        TransferSection {
            snr_a: 3.0,
            snr_b: vec![3.0],
            q: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            sim_seeds: 0,
        }
    }
}

/// One experiment, as read from a TOML or JSON file. Every section is
/// optional and falls back to the rank-1, N₁ = 100, N₂ = N₃ = 50 setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: RunKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Also write SVG plots next to the CSVs.
    #[serde(default)]
    pub plot: bool,
    /// Figure id for `kind = "reproduce"`.
    #[serde(default)]
    pub figure: Option<String>,
    #[serde(default)]
    pub teacher: TeacherSection,
    #[serde(default)]
    pub student: StudentSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub curve: CurveSection,
    #[serde(default)]
    pub shrink: ShrinkSection,
    #[serde(default)]
    pub transfer: TransferSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn new(kind: RunKind) -> Self {
        ExperimentConfig {
            kind,
            seed: 0,
            output_dir: default_output_dir(),
            plot: false,
            figure: None,
            teacher: TeacherSection::default(),
            student: StudentSection::default(),
            data: DataSection::default(),
            training: TrainingSection::default(),
            curve: CurveSection::default(),
            shrink: ShrinkSection::default(),
            transfer: TransferSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    /// Reads `.json` files as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    /// TOML text for a fixed kind: a missing `kind` key is filled in, a
    /// different one is replaced.
    pub fn from_toml_as(text: &str, kind: RunKind) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
        let name = toml::Value::try_from(kind).expect("kind serializes");
        table.insert("kind".into(), name);
        table.try_into().map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))
    }

    /// [`load`](Self::load) for a fixed kind, as used by the per-kind CLI
    /// subcommands.
    pub fn load_as(path: &Path, kind: RunKind) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            let mut value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::ConfigParse(e.to_string()))?;
            if let Some(obj) = value.as_object_mut() {
                obj.insert("kind".into(), serde_json::to_value(kind).expect("kind serializes"));
            }
            serde_json::from_value(value).map_err(|e| Error::ConfigParse(e.to_string()))
        } else {
            Self::from_toml_as(&text, kind)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are all representable in TOML")
    }

    pub fn width(&self) -> usize {
        self.student.width.unwrap_or(self.teacher.n3)
    }

    pub fn samples(&self) -> usize {
        self.data.samples.unwrap_or(self.teacher.n1)
    }

    pub fn tracked_modes(&self) -> usize {
        self.training.tracked_modes.unwrap_or(self.teacher.snrs.len())
    }

    pub fn dynamics(&self) -> Result<DynamicsParams> {
        DynamicsParams::new(self.student.eps, 1.0, self.student.depth)
    }

    pub fn theory_config(&self) -> Result<TheoryConfig> {
        let t = &self.teacher;
        TheoryConfig::new(t.snrs.clone(), t.n1, t.n3, self.dynamics()?)?
            .with_student_rank(self.width())?
            .with_samples(self.samples())?
            .with_bulk_scale(t.sigma_z)
    }

    /// Checks the parameters the chosen `kind` will use, before any work starts.
    pub fn validate(&self) -> Result<()> {
        let t = &self.teacher;
        if t.n1 == 0 || t.n3 == 0 {
            return Err(Error::ConfigInvalid("teacher dimensions must be positive".into()));
        }
        if !(t.sigma_z >= 0.0 && t.sigma_z.is_finite()) {
            return Err(Error::ConfigInvalid(format!("sigma_z must be non-negative, got {}", t.sigma_z)));
        }
        match self.kind {
            RunKind::TheoryCurve => {
                self.theory_config()?;
                let c = &self.curve;
                if !(c.t_min > 0.0 && c.t_max > c.t_min && c.points >= 2) {
                    return Err(Error::ConfigInvalid(format!(
                        "curve grid needs 0 < t_min < t_max and at least 2 points, got [{}, {}] x {}",
                        c.t_min, c.t_max, c.points
                    )));
                }
            }
            RunKind::Simulate => {
                if t.snrs.len() > t.n1.min(t.n3) {
                    return Err(Error::DimError(format!("teacher rank {} exceeds min(N1, N3)", t.snrs.len())));
                }
                if t.snrs.iter().any(|s| !(*s >= 0.0 && s.is_finite())) || t.snrs.windows(2).any(|w| w[0] < w[1]) {
                    return Err(Error::ConfigInvalid("teacher snrs must be non-negative and descending".into()));
                }
                StudentDims::new(t.n1, self.width(), t.n3, self.student.depth)?;
                self.dynamics()?;
                self.data.design.check_samples(t.n1, self.samples())?;
                let tr = &self.training;
                if tr.seeds == 0 || tr.record_points == 0 || !(tr.t_max > 0.0) {
                    return Err(Error::ConfigInvalid("training needs seeds, record points and t_max > 0".into()));
                }
                if let Some(lr) = tr.learning_rate {
                    if !(lr > 0.0 && lr.is_finite()) {
                        return Err(Error::ConfigInvalid(format!("learning rate must be positive, got {lr}")));
                    }
                }
                if self.tracked_modes() > self.width().min(self.samples()) {
                    return Err(Error::ConfigInvalid(format!(
                        "cannot track {} modes of a rank-{} problem",
                        self.tracked_modes(),
                        self.width().min(self.samples())
                    )));
                }
            }
            RunKind::Shrink => {
                if self.shrink.input.is_none() {
                    return Err(Error::ConfigInvalid("shrink needs shrink.input".into()));
                }
                if !(self.shrink.margin >= 0.0) {
                    return Err(Error::ConfigInvalid("shrink margin must be non-negative".into()));
                }
            }
            RunKind::Transfer => {
                let tr = &self.transfer;
                if tr.snr_b.is_empty() || tr.q.is_empty() {
                    return Err(Error::ConfigInvalid("transfer needs at least one snr_b and one q".into()));
                }
                if let Some(q) = tr.q.iter().find(|q| !(**q >= -1.0 && **q <= 1.0)) {
                    return Err(Error::ConfigInvalid(format!("q must lie in [-1, 1], got {q}")));
                }
                let aspect = 2.0 * t.n3 as f64 / t.n1 as f64;
                if aspect > 1.0 {
                    return Err(Error::AspectError(aspect));
                }
                self.dynamics()?;
            }
            RunKind::Reproduce => match &self.figure {
                Some(f) if FIGURES.contains(&f.as_str()) => {}
                Some(f) => return Err(Error::UnknownFigure(f.clone())),
                None => return Err(Error::ConfigInvalid("reproduce needs a figure id".into())),
            },
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml_uses_defaults() {
        let c = ExperimentConfig::from_toml("kind = \"theory_curve\"\n").unwrap();
        assert_eq!(c.width(), 50);
        assert_eq!(c.samples(), 100);
        assert_eq!(c.output_dir, PathBuf::from("out"));
        c.validate().unwrap();
    }

    #[test]
    fn fixed_kind_fills_or_replaces() {
        let c = ExperimentConfig::from_toml_as("[teacher]\nn1 = 20\n", RunKind::Simulate).unwrap();
        assert_eq!((c.kind, c.teacher.n1), (RunKind::Simulate, 20));
        let c = ExperimentConfig::from_toml_as("kind = \"shrink\"\n", RunKind::TheoryCurve).unwrap();
        assert_eq!(c.kind, RunKind::TheoryCurve);
        assert!(matches!(
            ExperimentConfig::from_toml_as("[teacher]\nbogus = 1\n", RunKind::Simulate),
            Err(Error::ConfigParse(_))
        ));
    }

    #[test]
    fn sections_parse() {
        let text = r#"
            kind = "simulate"
            seed = 9
            [teacher]
            snrs = [6.0, 4.0, 2.0]
            [student]
            depth = 5
            init = "random"
            activation = { kind = "leaky_relu", slope = 0.2 }
            [data]
            samples = 200
            design = "oversampled"
            [training]
            learning_rate = 0.001
        "#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.student.init, InitMode::Random);
        assert_eq!(c.student.activation, Activation::LeakyRelu { slope: 0.2 });
        assert_eq!(c.tracked_modes(), 3);
        c.validate().unwrap();
    }

    #[test]
    fn json_and_toml_agree() {
        let mut c = ExperimentConfig::new(RunKind::Transfer);
        c.transfer.snr_b = vec![1.0, 10.0];
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&json).unwrap(), c);
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(matches!(
            ExperimentConfig::from_toml("kind = \"theory_curve\"\nbogus = 1\n"),
            Err(Error::ConfigParse(_))
        ));
        let mut c = ExperimentConfig::new(RunKind::Simulate);
        c.data.design = InputDesign::Undersampled;
        c.data.samples = Some(150);
        assert!(matches!(c.validate(), Err(Error::ModeError(_))));
        let mut c = ExperimentConfig::new(RunKind::Reproduce);
        c.figure = Some("fig4".into());
        assert!(matches!(c.validate(), Err(Error::UnknownFigure(_))));
        let mut c = ExperimentConfig::new(RunKind::Transfer);
        c.teacher.n3 = 60;
        assert!(matches!(c.validate(), Err(Error::AspectError(_))));
    }
}
