use nalgebra::DMatrix;

use super::dataset::TrainingSet;
use super::student::StudentState;
use super::teacher::TeacherSpec;
use crate::error::{Error, Result};
use crate::linalg::{frob_inner, frob_sq};
use crate::rng::{derive_seed, gaussian_matrix, stream_rng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorPair {
    pub train: f64,
    pub test: f64,
}

/// k × n selector keeping output rows `start..start+k`.
pub fn row_selector(n: usize, start: usize, k: usize) -> Result<DMatrix<f64>> {
    if start + k > n || k == 0 {
        return Err(Error::DimError(format!("rows {start}..{} outside 0..{n}", start + k)));
    }
    Ok(DMatrix::from_fn(k, n, |i, j| if j == start + i { 1.0 } else { 0.0 }))
}

fn project(m: &DMatrix<f64>, projector: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    match projector {
        Some(p) => p * m,
        None => m.clone(),
    }
}

fn check_projector(projector: Option<&DMatrix<f64>>, n3: usize) -> Result<()> {
    match projector {
        Some(p) if p.ncols() != n3 => Err(Error::DimError(format!(
            "projector acts on {} outputs, map has {n3}",
            p.ncols()
        ))),
        _ => Ok(()),
    }
}

/// Normalised training and test errors of a linear map.
///
/// Training error uses the trace form
/// `[tr(PWΣ¹¹WᵀPᵀ) − 2⟨PW, PΣ³¹⟩ + ‖PY‖²] / ‖PY‖²`, test error is
/// `‖P(W − W̄)‖² / ‖PW̄‖²` (isotropic test inputs).
pub fn measure_errors(
    w: &DMatrix<f64>,
    dataset: &TrainingSet,
    teacher: &TeacherSpec,
    projector: Option<&DMatrix<f64>>,
) -> Result<ErrorPair> {
    if w.nrows() != dataset.n3() || w.ncols() != dataset.n1() {
        return Err(Error::DimError(format!(
            "map is {}x{}, data is {}x{}",
            w.nrows(),
            w.ncols(),
            dataset.n3(),
            dataset.n1()
        )));
    }
    check_projector(projector, w.nrows())?;
    let pw = project(w, projector);
    let ps = project(&dataset.sigma31, projector);
    let label = frob_sq(&project(&dataset.y, projector));
    let quad = if dataset.sigma11_is_identity() {
        frob_sq(&pw)
    } else {
        frob_inner(&(&pw * &dataset.sigma11), &pw)
    };
    let train = (quad - 2.0 * frob_inner(&pw, &ps) + label) / label;

    let wbar = teacher.matrix();
    let pbar = project(&wbar, projector);
    let test = frob_sq(&(&pw - &pbar)) / frob_sq(&pbar);
    Ok(ErrorPair { train, test })
}

/// Held-out inputs for students whose map is not a single matrix.
#[derive(Clone, Debug)]
pub struct TestProbe {
    inputs: DMatrix<f64>,
    targets: DMatrix<f64>,
}

pub const PROBE_SIZE: usize = 2000;

impl TestProbe {
    pub fn new(teacher: &TeacherSpec, size: usize, seed: u64) -> Self {
        let n1 = teacher.n1();
        let mut rng = stream_rng(derive_seed(seed, 0x7e57), 0);
        let inputs = gaussian_matrix(n1, size, (1.0 / n1 as f64).sqrt(), &mut rng);
        let targets = teacher.matrix() * &inputs;
        TestProbe { inputs, targets }
    }
}

/// Errors of a possibly nonlinear student. Linear students defer to
/// [`measure_errors`]; others use the data directly and a test probe.
pub fn measure_student(
    student: &StudentState,
    dataset: &TrainingSet,
    teacher: &TeacherSpec,
    projector: Option<&DMatrix<f64>>,
    probe: Option<&TestProbe>,
) -> Result<ErrorPair> {
    if student.activation.is_linear() {
        return measure_errors(&student.composite(), dataset, teacher, projector);
    }
    check_projector(projector, dataset.n3())?;
    let probe = probe.ok_or_else(|| Error::ConfigInvalid("nonlinear student needs a test probe".into()))?;
    let fit = project(&(student.forward(&dataset.x) - &dataset.y), projector);
    let train = frob_sq(&fit) / frob_sq(&project(&dataset.y, projector));
    let miss = project(&(student.forward(&probe.inputs) - &probe.targets), projector);
    let test = frob_sq(&miss) / frob_sq(&project(&probe.targets, projector));
    Ok(ErrorPair { train, test })
}

/// Strength and alignment of `w` along the first `k` data modes.
///
/// For data mode (û, v̂) the strength is `ûᵀWv̂`; output alignment is
/// `|ûᵀWv̂| / ‖Wv̂‖` and input alignment `|ûᵀWv̂| / ‖Wᵀû‖`. Both equal 1
/// exactly when W maps v̂ onto û and û back onto v̂.
pub fn mode_profile(w: &DMatrix<f64>, dataset: &TrainingSet, k: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let k = k.min(dataset.svd31.s.len());
    let mut s = Vec::with_capacity(k);
    let mut au = Vec::with_capacity(k);
    let mut av = Vec::with_capacity(k);
    for a in 0..k {
        let u = dataset.svd31.u.column(a);
        let v = dataset.svd31.v.column(a);
        let wv = w * v;
        let wtu = w.transpose() * u;
        let proj = u.dot(&wv);
        s.push(proj);
        let ratio = |n: f64| if n > 0.0 { proj.abs() / n } else { 0.0 };
        au.push(ratio(wv.norm()));
        av.push(ratio(wtu.norm()));
    }
    (s, au, av)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::dataset::{make_dataset, InputDesign};
    use crate::simulator::teacher::make_teacher;

    #[test]
    fn trace_form_matches_mode_sum() {
        let teacher = make_teacher(30, 20, &[4.0, 2.0], 1.0, 3).unwrap();
        let ds = make_dataset(&teacher, 30, InputDesign::Orthonormal, 3).unwrap();
        let vals: Vec<f64> = ds.svd31.s.iter().enumerate().map(|(i, s)| s * (0.3 + 0.01 * i as f64)).collect();
        let w = ds.svd31.compose(&vals);
        let e = measure_errors(&w, &ds, &teacher, None).unwrap();
        let num: f64 = ds.svd31.s.iter().zip(&vals).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = ds.svd31.s.iter().map(|a| a * a).sum();
        assert!((e.train - num / den).abs() < 1e-9);
    }

    #[test]
    fn zero_map_errors_are_one() {
        let teacher = make_teacher(20, 10, &[3.0], 1.0, 1).unwrap();
        for design in [InputDesign::Orthonormal, InputDesign::GaussianInputs] {
            let ds = make_dataset(&teacher, 20, design, 1).unwrap();
            let e = measure_errors(&DMatrix::zeros(10, 20), &ds, &teacher, None).unwrap();
            assert!((e.train - 1.0).abs() < 1e-12);
            assert!((e.test - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_inputs_trace_form_matches_residual() {
        let teacher = make_teacher(15, 8, &[2.0], 0.5, 9).unwrap();
        let ds = make_dataset(&teacher, 40, InputDesign::GaussianInputs, 9).unwrap();
        let w = teacher.matrix() * 0.7;
        let e = measure_errors(&w, &ds, &teacher, None).unwrap();
        let direct = frob_sq(&(&w * &ds.x - &ds.y)) / frob_sq(&ds.y);
        assert!((e.train - direct).abs() < 1e-12);
        assert!((e.test - 0.09).abs() < 1e-12);
    }

    #[test]
    fn projector_restricts_rows() {
        let teacher = make_teacher(10, 6, &[3.0, 1.0], 0.0, 2).unwrap();
        let ds = make_dataset(&teacher, 10, InputDesign::Orthonormal, 2).unwrap();
        let mut w = teacher.matrix();
        w.row_mut(5).fill(0.0);
        let keep = row_selector(6, 0, 5).unwrap();
        let e = measure_errors(&w, &ds, &teacher, Some(&keep)).unwrap();
        assert!(e.test.abs() < 1e-24 && e.train.abs() < 1e-12);
        assert!(row_selector(6, 4, 3).is_err());
    }

    #[test]
    fn profile_of_aligned_map() {
        let teacher = make_teacher(12, 12, &[3.0, 2.0], 1.0, 5).unwrap();
        let ds = make_dataset(&teacher, 12, InputDesign::Orthonormal, 5).unwrap();
        let vals: Vec<f64> = (0..ds.svd31.s.len()).map(|i| 0.1 + i as f64 * 0.01).collect();
        let w = ds.svd31.compose(&vals);
        let (s, au, av) = mode_profile(&w, &ds, 4);
        for a in 0..4 {
            assert!((s[a] - vals[a]).abs() < 1e-12);
            assert!((au[a] - 1.0).abs() < 1e-12 && (av[a] - 1.0).abs() < 1e-12);
        }
    }
}
