use log::{debug, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dataset::TrainingSet;
use super::measure::{measure_student, mode_profile, ErrorPair, TestProbe, PROBE_SIZE};
use super::student::{InitMode, StudentState};
use super::teacher::TeacherSpec;
use super::trace::ErrorTrace;
use crate::error::{Error, Result};

/// Errors above this abort training.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// λ·ŝ_max beyond which discrete steps visibly depart from gradient flow.
pub const FLOW_WARN_LIMIT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Full matrix gradients; works for any student.
    Dense,
    /// Exact per-mode updates for aligned linear students whose input
    /// covariance is diagonal in the data frame.
    Spectral,
    /// Spectral when possible, dense otherwise.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Schedule {
    /// Record every n-th epoch.
    Every { n: usize },
    /// About `points` log-spaced epochs.
    Log { points: usize },
}

impl Schedule {
    /// Epochs to record, always including 0 and `epochs`.
    pub fn epochs(&self, epochs: usize) -> Vec<usize> {
        let mut out = vec![0];
        match *self {
            Schedule::Every { n } => {
                let n = n.max(1);
                out.extend((1..=epochs).filter(|e| e % n == 0));
            }
            Schedule::Log { points } => {
                if epochs > 0 {
                    let top = (epochs as f64).ln();
                    let m = points.max(2);
                    for i in 0..m {
                        let e = (top * i as f64 / (m - 1) as f64).exp().round() as usize;
                        if e > *out.last().unwrap() {
                            out.push(e.min(epochs));
                        }
                    }
                }
            }
        }
        if *out.last().unwrap() != epochs {
            out.push(epochs);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub epochs: usize,
    pub schedule: Schedule,
    /// Data modes whose strength and alignment are recorded.
    pub tracked_modes: usize,
    /// Optional k × N₃ output projector applied to both errors.
    pub projector: Option<DMatrix<f64>>,
    pub engine: Engine,
    /// Stop once the test error exceeds its running minimum by this much.
    pub early_stop: Option<f64>,
}

impl TrainOptions {
    pub fn new(learning_rate: f64, epochs: usize) -> Self {
        TrainOptions {
            learning_rate,
            epochs,
            schedule: Schedule::Log { points: 200 },
            tracked_modes: 0,
            projector: None,
            engine: Engine::Auto,
            early_stop: None,
        }
    }

    /// Epoch count reaching `t_max` (in units of τ).
    pub fn until(learning_rate: f64, t_max: f64) -> Self {
        Self::new(learning_rate, (t_max / learning_rate).ceil() as usize)
    }
}

/// `0.01 / r` with `r = ((N_l−1)/2)·ŝ_max^{2−2/(N_l−1)}`, the stiffest mode rate.
pub fn default_learning_rate(dataset: &TrainingSet, depth: usize) -> f64 {
    let l = depth.saturating_sub(1).max(2) as f64;
    let smax = dataset.top_singular_value().max(1e-12);
    let rate = 0.5 * l * smax.powf(2.0 - 2.0 / l);
    0.01 / rate
}

struct Recorder<'a> {
    dataset: &'a TrainingSet,
    teacher: &'a TeacherSpec,
    opts: &'a TrainOptions,
    probe: Option<TestProbe>,
    trace: ErrorTrace,
    best: f64,
}

impl Recorder<'_> {
    /// Records one point and reports whether training should stop.
    fn record(&mut self, epoch: usize, student: &StudentState, composite: Option<&DMatrix<f64>>) -> Result<bool> {
        let t = epoch as f64 * self.opts.learning_rate;
        let pair = match composite {
            Some(w) => super::measure::measure_errors(w, self.dataset, self.teacher, self.opts.projector.as_ref())?,
            None => measure_student(
                student,
                self.dataset,
                self.teacher,
                self.opts.projector.as_ref(),
                self.probe.as_ref(),
            )?,
        };
        let ErrorPair { train, test } = pair;
        for v in [train, test] {
            if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
                return Err(Error::Divergence { t, value: v });
            }
        }
        self.trace.epochs.push(epoch);
        self.trace.times.push(t);
        self.trace.train.push(train);
        self.trace.test.push(test);
        let k = self.opts.tracked_modes;
        let (s, au, av) = if k > 0 {
            let w = composite.cloned().unwrap_or_else(|| student.composite());
            mode_profile(&w, self.dataset, k)
        } else {
            (vec![], vec![], vec![])
        };
        self.trace.modes.push(s);
        self.trace.align_u.push(au);
        self.trace.align_v.push(av);
        self.best = self.best.min(test);
        Ok(matches!(self.opts.early_stop, Some(rise) if test > self.best + rise))
    }
}

fn spectral_modes(student: &StudentState, dataset: &TrainingSet) -> Option<Vec<f64>> {
    if student.init.mode != InitMode::Aligned || !student.activation.is_linear() || !student.has_frames() {
        return None;
    }
    let n2 = student.dims.n2;
    let v = dataset.svd31.v.columns(0, n2);
    let sv = &dataset.sigma11 * v;
    let d: Vec<f64> = (0..n2).map(|a| v.column(a).dot(&sv.column(a))).collect();
    let defect = d
        .iter()
        .enumerate()
        .fold(0.0f64, |m, (a, &da)| m.max((sv.column(a) - v.column(a) * da).amax()));
    let scale = d.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    (defect < 1e-9 * scale).then_some(d)
}

/// Full-batch gradient descent on `½‖Y − f(X)‖²`, recording errors on the
/// schedule. Time in the trace is epochs × learning rate.
pub fn train_gd(
    student: &mut StudentState,
    dataset: &TrainingSet,
    teacher: &TeacherSpec,
    opts: &TrainOptions,
) -> Result<ErrorTrace> {
    let lr = opts.learning_rate;
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::ConfigInvalid(format!("learning rate must be positive, got {lr}")));
    }
    if student.dims.n1 != dataset.n1() || student.dims.n3 != dataset.n3() {
        return Err(Error::DimError(format!(
            "student {}x{} does not match data {}x{}",
            student.dims.n3,
            student.dims.n1,
            dataset.n3(),
            dataset.n1()
        )));
    }
    let stiffness = lr * dataset.top_singular_value();
    if stiffness > FLOW_WARN_LIMIT {
        warn!("learning rate {lr} gives lambda*s_max = {stiffness:.3}; steps are far from gradient flow");
    }
    let spectral = match opts.engine {
        Engine::Dense => None,
        Engine::Auto => spectral_modes(student, dataset),
        Engine::Spectral => Some(spectral_modes(student, dataset).ok_or_else(|| {
            Error::ConfigInvalid(
                "spectral engine needs an aligned linear student with input covariance diagonal in the data frame"
                    .into(),
            )
        })?),
    };
    let probe = (!student.activation.is_linear()).then(|| TestProbe::new(teacher, PROBE_SIZE, student.init.seed));
    let mut rec = Recorder {
        dataset,
        teacher,
        opts,
        probe,
        trace: ErrorTrace::default(),
        best: f64::INFINITY,
    };
    let marks = opts.schedule.epochs(opts.epochs);
    match spectral {
        Some(d) => {
            debug!("spectral engine, {} modes", d.len());
            run_spectral(student, dataset, &d, &marks, &mut rec)?
        }
        None => {
            debug!("dense engine");
            run_dense(student, dataset, &marks, &mut rec)?
        }
    }
    Ok(rec.trace)
}

fn run_spectral(
    student: &mut StudentState,
    dataset: &TrainingSet,
    d: &[f64],
    marks: &[usize],
    rec: &mut Recorder<'_>,
) -> Result<()> {
    let lr = rec.opts.learning_rate;
    let nw = student.dims.weight_count() as i32;
    let n2 = d.len();
    let shat = &dataset.svd31.s[..n2];
    let mut a = vec![student.init.eps.powf(1.0 / nw as f64); n2];
    let composite = |a: &[f64]| {
        let vals: Vec<f64> = a.iter().map(|x| x.powi(nw)).collect();
        dataset.svd31.compose(&vals)
    };
    let mut epoch = 0;
    let mut stopped = false;
    for &mark in marks {
        while epoch < mark {
            for k in 0..n2 {
                let x = a[k];
                a[k] = x + lr * x.powi(nw - 1) * (shat[k] - d[k] * x.powi(nw));
            }
            epoch += 1;
        }
        if rec.record(epoch, student, Some(&composite(&a)))? {
            stopped = true;
            break;
        }
    }
    rec.trace.stopped_early = stopped;
    // Write the mode amplitudes back into the layer matrices.
    let frames = student.frames.as_ref().expect("spectral engine requires frames");
    for l in 1..=nw as usize {
        let mut left = frames[l].clone();
        for (j, &x) in a.iter().enumerate() {
            left.column_mut(j).scale_mut(x);
        }
        student.layers[l - 1] = left * frames[l - 1].transpose();
    }
    Ok(())
}

fn run_dense(
    student: &mut StudentState,
    dataset: &TrainingSet,
    marks: &[usize],
    rec: &mut Recorder<'_>,
) -> Result<()> {
    let lr = rec.opts.learning_rate;
    let linear = student.activation.is_linear();
    let mut epoch = 0;
    let mut stopped = false;
    student.frames = None;
    for &mark in marks {
        while epoch < mark {
            let grads = if linear {
                linear_gradients(&student.layers, dataset)
            } else {
                data_gradients(student, dataset)
            };
            for (w, g) in student.layers.iter_mut().zip(&grads) {
                w.zip_apply(g, |a, b| *a += lr * b);
            }
            epoch += 1;
        }
        let w = linear.then(|| student.composite());
        if rec.record(epoch, student, w.as_ref())? {
            stopped = true;
            break;
        }
    }
    rec.trace.stopped_early = stopped;
    Ok(())
}

/// Descent directions `−∂L/∂W_l` of a deep linear network expressed through
/// Σ³¹ and Σ¹¹.
pub(crate) fn linear_gradients(layers: &[DMatrix<f64>], dataset: &TrainingSet) -> Vec<DMatrix<f64>> {
    let nw = layers.len();
    // prefix[l] = W_l ⋯ W_0
    let mut prefix: Vec<DMatrix<f64>> = Vec::with_capacity(nw);
    prefix.push(layers[0].clone());
    for l in 1..nw {
        let next = &layers[l] * &prefix[l - 1];
        prefix.push(next);
    }
    let w = &prefix[nw - 1];
    let mut back = if dataset.sigma11_is_identity() {
        &dataset.sigma31 - w
    } else {
        &dataset.sigma31 - w * &dataset.sigma11
    };
    let mut grads = vec![DMatrix::zeros(0, 0); nw];
    for l in (0..nw).rev() {
        grads[l] = if l == 0 {
            back.clone()
        } else {
            &back * prefix[l - 1].transpose()
        };
        if l > 0 {
            back = layers[l].transpose() * back;
        }
    }
    grads
}

/// Backpropagation through the actual samples (any activation).
pub(crate) fn data_gradients(student: &StudentState, dataset: &TrainingSet) -> Vec<DMatrix<f64>> {
    let act = student.activation;
    let nw = student.layers.len();
    let mut pre = Vec::with_capacity(nw);
    let mut post = Vec::with_capacity(nw + 1);
    post.push(dataset.x.clone());
    for (l, w) in student.layers.iter().enumerate() {
        let z = w * &post[l];
        let h = if l + 1 < nw { z.map(|v| act.apply(v)) } else { z.clone() };
        pre.push(z);
        post.push(h);
    }
    let mut delta = &dataset.y - &post[nw];
    let mut grads = vec![DMatrix::zeros(0, 0); nw];
    for l in (0..nw).rev() {
        grads[l] = &delta * post[l].transpose();
        if l > 0 {
            let mut back = student.layers[l].transpose() * &delta;
            back.zip_apply(&pre[l - 1], |b, z| *b *= act.derivative(z));
            delta = back;
        }
    }
    grads
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::dataset::{make_dataset, InputDesign};
    use crate::simulator::student::{init_student, Activation, StudentDims};
    use crate::simulator::teacher::make_teacher;

    fn setup(design: InputDesign, p: usize) -> (TeacherSpec, TrainingSet) {
        let teacher = make_teacher(30, 20, &[4.0, 2.0], 1.0, 11).unwrap();
        let ds = make_dataset(&teacher, p, design, 11).unwrap();
        (teacher, ds)
    }

    #[test]
    fn schedule_marks() {
        assert_eq!(Schedule::Every { n: 3 }.epochs(7), vec![0, 3, 6, 7]);
        let log = Schedule::Log { points: 10 }.epochs(1000);
        assert_eq!(log[0], 0);
        assert_eq!(*log.last().unwrap(), 1000);
        assert!(log.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(Schedule::Log { points: 5 }.epochs(0), vec![0]);
    }

    #[test]
    fn linear_gradient_matches_data_gradient() {
        let (teacher, ds) = setup(InputDesign::GaussianInputs, 45);
        let dims = StudentDims::new(30, 6, 20, 4).unwrap();
        let s = init_student(dims, 0.5, InitMode::Random, None, 2, Activation::Linear).unwrap();
        let a = linear_gradients(&s.layers, &ds);
        let b = data_gradients(&s, &ds);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-10 * (1.0 + y.norm()));
        }
        let _ = teacher;
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let (_, ds) = setup(InputDesign::GaussianInputs, 25);
        let dims = StudentDims::new(30, 4, 20, 3).unwrap();
        let s = init_student(dims, 0.8, InitMode::Random, None, 5, Activation::LeakyRelu { slope: 0.2 }).unwrap();
        let loss = |st: &StudentState| 0.5 * (&ds.y - st.forward(&ds.x)).norm_squared();
        let g = data_gradients(&s, &ds);
        let h = 1e-6;
        for (l, (i, j)) in [(0, (1, 2)), (1, (3, 0))] {
            let mut up = s.clone();
            up.layers[l][(i, j)] += h;
            let mut dn = s.clone();
            dn.layers[l][(i, j)] -= h;
            let fd = -(loss(&up) - loss(&dn)) / (2.0 * h);
            assert!((fd - g[l][(i, j)]).abs() < 1e-6 * (1.0 + fd.abs()), "{fd} vs {}", g[l][(i, j)]);
        }
    }

    #[test]
    fn spectral_matches_dense() {
        for (design, p) in [(InputDesign::Orthonormal, 30), (InputDesign::Oversampled, 60), (InputDesign::Undersampled, 15)] {
            let (teacher, ds) = setup(design, p);
            for depth in [3, 4] {
                let dims = StudentDims::new(30, 10, 20, depth).unwrap();
                let lr = default_learning_rate(&ds, depth);
                let mut opts = TrainOptions::until(lr, 3.0);
                opts.tracked_modes = 3;
                let init = init_student(dims, 1e-2, InitMode::Aligned, Some(&ds), 8, Activation::Linear).unwrap();
                let mut a = init.clone();
                opts.engine = Engine::Spectral;
                let ta = train_gd(&mut a, &ds, &teacher, &opts).unwrap();
                let mut b = init;
                opts.engine = Engine::Dense;
                let tb = train_gd(&mut b, &ds, &teacher, &opts).unwrap();
                assert_eq!(ta.len(), tb.len());
                for i in 0..ta.len() {
                    assert!((ta.test[i] - tb.test[i]).abs() < 1e-9, "{design:?} depth {depth} row {i}");
                    assert!((ta.train[i] - tb.train[i]).abs() < 1e-9);
                }
                assert!((a.composite() - b.composite()).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn aligned_student_stays_aligned() {
        let (teacher, ds) = setup(InputDesign::Orthonormal, 30);
        let dims = StudentDims::new(30, 20, 20, 3).unwrap();
        let mut s = init_student(dims, 1e-3, InitMode::Aligned, Some(&ds), 1, Activation::Linear).unwrap();
        let mut opts = TrainOptions::until(default_learning_rate(&ds, 3), 5.0);
        opts.engine = Engine::Dense;
        opts.tracked_modes = 5;
        let tr = train_gd(&mut s, &ds, &teacher, &opts).unwrap();
        for row in tr.align_u.iter().chain(&tr.align_v) {
            for a in row {
                assert!((a - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn half_rate_doubles_epochs() {
        let (teacher, ds) = setup(InputDesign::Orthonormal, 30);
        let dims = StudentDims::new(30, 20, 20, 3).unwrap();
        let lr = default_learning_rate(&ds, 3);
        let run = |rate: f64| {
            let mut s = init_student(dims, 1e-3, InitMode::Random, None, 3, Activation::Linear).unwrap();
            let mut o = TrainOptions::until(rate, 4.0);
            o.schedule = Schedule::Every { n: (1.0 / rate).round() as usize };
            train_gd(&mut s, &ds, &teacher, &o).unwrap()
        };
        let a = run(lr);
        let b = run(lr / 2.0);
        let ta = a.interpolate(&a.test, 3.0).unwrap();
        let tb = b.interpolate(&b.test, 3.0).unwrap();
        assert!((ta - tb).abs() < 0.02, "{ta} vs {tb}");
    }

    #[test]
    fn divergence_is_reported() {
        let (teacher, ds) = setup(InputDesign::Orthonormal, 30);
        let dims = StudentDims::new(30, 5, 20, 3).unwrap();
        let mut s = init_student(dims, 1e-1, InitMode::Random, None, 3, Activation::Linear).unwrap();
        let mut o = TrainOptions::new(3.0, 200);
        o.schedule = Schedule::Every { n: 1 };
        assert!(matches!(train_gd(&mut s, &ds, &teacher, &o), Err(Error::Divergence { .. })));
    }

    #[test]
    fn early_stop_halts() {
        let (teacher, ds) = setup(InputDesign::Orthonormal, 30);
        let dims = StudentDims::new(30, 20, 20, 3).unwrap();
        let mut s = init_student(dims, 1e-3, InitMode::Random, None, 3, Activation::Linear).unwrap();
        let mut o = TrainOptions::until(default_learning_rate(&ds, 3), 100.0);
        o.early_stop = Some(0.05);
        let tr = train_gd(&mut s, &ds, &teacher, &o).unwrap();
        assert!(tr.stopped_early);
        assert!(*tr.times.last().unwrap() < 100.0);
    }

    #[test]
    fn spectral_rejects_random_init() {
        let (teacher, ds) = setup(InputDesign::Orthonormal, 30);
        let dims = StudentDims::new(30, 5, 20, 3).unwrap();
        let mut s = init_student(dims, 1e-3, InitMode::Random, None, 3, Activation::Linear).unwrap();
        let mut o = TrainOptions::new(0.01, 10);
        o.engine = Engine::Spectral;
        assert!(train_gd(&mut s, &ds, &teacher, &o).is_err());
    }
}
