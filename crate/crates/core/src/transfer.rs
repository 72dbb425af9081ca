//! Two-task transfer: a student with one hidden layer shared by two output
//! heads, compared against the same student trained on task A alone.
//!
//! Everything about the joint problem is fixed by the singular values of the
//! two teachers and `Q = V_Aᵀ V_B`; the output frames play no role.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::DynamicsParams;
use crate::error::{Error, Result};
use crate::linalg::{identity_defect, random_orthonormal, sym_apply, Svd};
use crate::rmt::{mp_quantile, overlap, shat_of_sbar, MpQuadrature, Region, SpectrumParams};
use crate::rng::{derive_seed, stream_rng};
use crate::simulator::{
    init_student, make_dataset_with_noise, noise_matrix, row_selector, train_gd, Activation, InitMode,
    InputDesign, Schedule, StudentDims, TeacherSpec, TrainOptions,
};
use crate::theory::{minimize_curve, strength, TheoryConfig, TheoryModel};

/// Eigenvalues of G below this are treated as exact zeros (|q| = 1 duplicates).
const GRAM_ZERO: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct TransferPair {
    pub task_a: TeacherSpec,
    pub task_b: TeacherSpec,
    /// V_Aᵀ V_B.
    pub q_matrix: DMatrix<f64>,
    pub composite: TeacherSpec,
}

impl TransferPair {
    pub fn new(task_a: TeacherSpec, task_b: TeacherSpec) -> Result<Self> {
        let composite = composite_teacher(&task_a, &task_b)?;
        let q_matrix = task_a.v_in.transpose() * &task_b.v_in;
        Ok(TransferPair {
            task_a,
            task_b,
            q_matrix,
            composite,
        })
    }

    pub fn n1(&self) -> usize {
        self.task_a.n1()
    }

    /// Per-head output dimension.
    pub fn n3(&self) -> usize {
        self.task_a.n3()
    }

    /// Aspect ratio 2N₃/N₁ of the joint problem.
    pub fn joint_aspect(&self) -> f64 {
        2.0 * self.n3() as f64 / self.n1() as f64
    }
}

/// Two rank-1 tasks with input overlap `q`, random frames drawn from `seed`.
pub fn rank1_pair(n1: usize, n3: usize, snr_a: f64, snr_b: f64, q: f64, sigma_z: f64, seed: u64) -> Result<TransferPair> {
    if !(-1.0..=1.0).contains(&q) {
        return Err(Error::ConfigInvalid(format!("overlap q must lie in [-1, 1], got {q}")));
    }
    if n1 < 2 || n3 == 0 {
        return Err(Error::DimError(format!("need N1 >= 2 and N3 >= 1, got {n1} and {n3}")));
    }
    let mut rng = stream_rng(seed, 0);
    let frame = random_orthonormal(n1, 2, &mut rng);
    let va = frame.column(0).into_owned();
    let vb = frame.column(0) * q + frame.column(1) * (1.0 - q * q).max(0.0).sqrt();
    let ua = random_orthonormal(n3, 1, &mut rng);
    let ub = random_orthonormal(n3, 1, &mut rng);
    let a = TeacherSpec::new(ua, vec![snr_a], DMatrix::from_column_slice(n1, 1, va.as_slice()), sigma_z)?;
    let b = TeacherSpec::new(ub, vec![snr_b], DMatrix::from_column_slice(n1, 1, vb.as_slice()), sigma_z)?;
    TransferPair::new(a, b)
}

/// Stacked map `[W_A; W_B]` expressed through its own SVD.
pub fn composite_teacher(task_a: &TeacherSpec, task_b: &TeacherSpec) -> Result<TeacherSpec> {
    if task_a.n1() != task_b.n1() || task_a.n3() != task_b.n3() {
        return Err(Error::DimError(format!(
            "tasks must share shapes, got {}x{} and {}x{}",
            task_a.n3(),
            task_a.n1(),
            task_b.n3(),
            task_b.n1()
        )));
    }
    if task_a.sigma_z != task_b.sigma_z {
        return Err(Error::ConfigInvalid("tasks must share the noise level".into()));
    }
    let (n1, n3) = (task_a.n1(), task_a.n3());
    let aspect = 2.0 * n3 as f64 / n1 as f64;
    if aspect > 1.0 {
        return Err(Error::AspectError(aspect));
    }
    let mut w = DMatrix::zeros(2 * n3, n1);
    w.rows_mut(0, n3).copy_from(&task_a.matrix());
    w.rows_mut(n3, n3).copy_from(&task_b.matrix());
    let svd = Svd::of(&w);
    let top = svd.s.first().copied().unwrap_or(0.0);
    let k = svd.s.iter().take_while(|&&s| s > 1e-12 * top.max(1e-300)).count();
    let mut u = svd.u.columns(0, k).into_owned();
    let mut v = svd.v.columns(0, k).into_owned();
    // Re-orthonormalise to keep TeacherSpec's strict check happy.
    if k > 0 && (identity_defect(&(u.transpose() * &u)) > 1e-12 || identity_defect(&(v.transpose() * &v)) > 1e-12) {
        u = u.qr().q();
        v = v.qr().q();
    }
    TeacherSpec::new(u, svd.s[..k].to_vec(), v, task_a.sigma_z)
}

/// Composite spectrum from the symmetric eigenproblem `G^{1/2} S² G^{1/2}`.
#[derive(Clone, Debug)]
pub struct CompositeModes {
    /// Descending, including exact zeros.
    pub values: Vec<f64>,
    /// Column k holds `y_k`, the unit eigenvector of the symmetric problem.
    pub eigvecs: DMatrix<f64>,
    /// Column k holds `w_k = G^{+1/2} y_k`; the composite input vector is `[V_A V_B]·w_k`.
    pub input_coeffs: DMatrix<f64>,
}

pub fn composite_modes_via_q(s_a: &[f64], s_b: &[f64], q_matrix: &DMatrix<f64>) -> Result<CompositeModes> {
    let (ka, kb) = (s_a.len(), s_b.len());
    if q_matrix.shape() != (ka, kb) {
        return Err(Error::DimError(format!(
            "Q is {}x{} for {ka} and {kb} modes",
            q_matrix.nrows(),
            q_matrix.ncols()
        )));
    }
    let k = ka + kb;
    let mut g = DMatrix::identity(k, k);
    g.view_mut((0, ka), (ka, kb)).copy_from(q_matrix);
    g.view_mut((ka, 0), (kb, ka)).copy_from(&q_matrix.transpose());
    let (g_half, eig) = sym_apply(&g, |l| l.max(0.0).sqrt());
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-10 {
        return Err(Error::SingularGram(min));
    }
    let (g_inv_half, _) = sym_apply(&g, |l| if l > GRAM_ZERO { 1.0 / l.sqrt() } else { 0.0 });
    let s2 = DMatrix::from_diagonal(&DVector::from_iterator(k, s_a.iter().chain(s_b).map(|s| s * s)));
    let m = &g_half * s2 * &g_half;
    let m = (&m + m.transpose()) * 0.5;
    let sym = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sym.eigenvalues[b].total_cmp(&sym.eigenvalues[a]));
    let values = order.iter().map(|&i| sym.eigenvalues[i].max(0.0).sqrt()).collect();
    let eigvecs = sym.eigenvectors.select_columns(order.iter());
    let input_coeffs = &g_inv_half * &eigvecs;
    Ok(CompositeModes {
        values,
        eigvecs,
        input_coeffs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMethod {
    Theory,
    Simulation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransferResult {
    pub eps_a_alone: f64,
    pub eps_a_joint: f64,
    /// `eps_a_alone − eps_a_joint`; positive means task B helps task A.
    pub benefit: f64,
    pub method: TransferMethod,
    pub ci_halfwidth: Option<f64>,
}

struct JointMode {
    sbar: f64,
    shat: f64,
    o_u2: f64,
    o: f64,
    /// Share of the composite output mode that lives in head A.
    head_a: f64,
}

/// Optimal-stopping errors of task A trained alone and jointly, from theory.
///
/// Each composite teacher mode k contributes like a single-task mode, except
/// that only head A is scored: the learned output vector puts
/// `o_u²·m_k + (1−o_u²)/2` of its weight in head A (m_k is the A-block norm of
/// the teacher's composite output vector, the rest spreads evenly over both
/// heads) and the cross term picks up m_k. Learned bulk modes put half their
/// energy in head A.
pub fn transfer_benefit_theory(pair: &TransferPair, dynamics: &DynamicsParams, student_width: usize) -> Result<TransferResult> {
    let (n1, n3) = (pair.n1(), pair.n3());
    let aspect = pair.joint_aspect();
    if aspect > 1.0 {
        return Err(Error::AspectError(aspect));
    }
    let sigma = pair.task_a.sigma_z;
    let energy_a = pair.task_a.frob_sq();
    if energy_a <= 0.0 {
        return Err(Error::ConfigInvalid("task A needs a non-zero teacher".into()));
    }
    if student_width == 0 || student_width > n3 {
        return Err(Error::DimError(format!("student width {student_width} must lie in 1..={n3}")));
    }

    let alone_cfg = TheoryConfig::new(pair.task_a.snrs.clone(), n1, n3, *dynamics)?
        .with_student_rank(student_width)?
        .with_bulk_scale(sigma)?;
    let alone = TheoryModel::new(&alone_cfg)?;
    let (_, eps_a_alone) = minimize_curve(|t| alone.test_error(t), dynamics.tau())?;

    let spectrum = SpectrumParams::with_scale(aspect, sigma)?;
    let modes = composite_modes_via_q(&pair.task_a.snrs, &pair.task_b.snrs, &pair.q_matrix)?;
    let ka = pair.task_a.rank();
    let s_a = DMatrix::from_diagonal(&DVector::from_column_slice(&pair.task_a.snrs));
    let top = modes.values.first().copied().unwrap_or(0.0);
    let mut joint = Vec::new();
    for (k, &sbar) in modes.values.iter().enumerate() {
        if !(sbar > 1e-12 * top) {
            continue;
        }
        let w = modes.input_coeffs.column(k);
        // V_Aᵀ x = [I Q]·w
        let va_x = w.rows(0, ka) + &pair.q_matrix * w.rows(ka, w.len() - ka);
        let head_a = (&s_a * va_x).norm_squared() / (sbar * sbar);
        let ov = overlap(sbar, &spectrum);
        joint.push(JointMode {
            sbar,
            shat: shat_of_sbar(sbar, &spectrum),
            o_u2: ov.o_u * ov.o_u,
            o: ov.o,
            head_a,
        });
    }
    if joint.len() > student_width {
        return Err(Error::DimError(format!(
            "{} composite modes exceed the student width {student_width}",
            joint.len()
        )));
    }
    let bulk_modes = (student_width - joint.len()) as f64;
    let f = mp_quantile(&spectrum, 1.0 - student_width as f64 / (2 * n3) as f64)?;
    let learned = MpQuadrature::new(&spectrum, Region::new(f, spectrum.upper_edge()));
    let joint_error = |t: f64| -> Result<f64> {
        let mut num = energy_a;
        if bulk_modes > 0.0 && learned.mass() > 1e-12 {
            let mean = learned.try_integral(|s| Ok(strength(t, s, dynamics)?.powi(2)))? / learned.mass();
            num += 0.5 * bulk_modes * mean;
        }
        for m in &joint {
            let s = strength(t, m.shat, dynamics)?;
            let share = m.o_u2 * m.head_a + 0.5 * (1.0 - m.o_u2);
            num += s * s * share - 2.0 * s * m.sbar * m.o * m.head_a;
        }
        Ok(num / energy_a)
    };
    let (_, eps_a_joint) = minimize_curve(joint_error, dynamics.tau())?;
    Ok(TransferResult {
        eps_a_alone,
        eps_a_joint,
        benefit: eps_a_alone - eps_a_joint,
        method: TransferMethod::Theory,
        ci_halfwidth: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransferSimConfig {
    pub student_width: usize,
    pub eps: f64,
    pub depth: usize,
    /// Training horizon in units of τ.
    pub t_max: f64,
    pub record_points: usize,
    pub base_seed: u64,
    pub bootstrap: usize,
}

impl Default for TransferSimConfig {
    fn default() -> Self {
        TransferSimConfig {
            student_width: 50,
            eps: 1e-3,
            depth: 3,
            t_max: 20.0,
            record_points: 300,
            base_seed: 1000,
            bootstrap: 2000,
        }
    }
}

fn min_test_error(
    teacher: &TeacherSpec,
    z: &DMatrix<f64>,
    width: usize,
    projector: Option<DMatrix<f64>>,
    cfg: &TransferSimConfig,
    seed: u64,
) -> Result<f64> {
    let n1 = teacher.n1();
    let ds = make_dataset_with_noise(teacher, DMatrix::identity(n1, n1), z, InputDesign::Orthonormal)?;
    let dims = StudentDims::new(n1, width, teacher.n3(), cfg.depth)?;
    let mut student = init_student(dims, cfg.eps, InitMode::Aligned, Some(&ds), seed, Activation::Linear)?;
    let lr = crate::simulator::default_learning_rate(&ds, cfg.depth);
    let mut opts = TrainOptions::until(lr, cfg.t_max);
    opts.schedule = Schedule::Log {
        points: cfg.record_points,
    };
    opts.projector = projector;
    let trace = train_gd(&mut student, &ds, teacher, &opts)?;
    Ok(trace.min_test().map_or(f64::NAN, |(_, v)| v))
}

/// Seed-averaged benefit from training TA students. Joint and alone runs of a
/// seed share the head-A noise rows.
pub fn transfer_benefit_sim(pair: &TransferPair, cfg: &TransferSimConfig, n_seeds: usize) -> Result<TransferResult> {
    if n_seeds == 0 {
        return Err(Error::ConfigInvalid("need at least one seed".into()));
    }
    let (n1, n3) = (pair.n1(), pair.n3());
    let aspect = pair.joint_aspect();
    if aspect > 1.0 {
        return Err(Error::AspectError(aspect));
    }
    let joint_teacher = &pair.composite;
    let head_a = row_selector(2 * n3, 0, n3)?;
    let per_seed: Vec<Result<(f64, f64)>> = (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(cfg.base_seed, i as u64);
            let z = noise_matrix(2 * n3, n1, n1, pair.task_a.sigma_z, seed);
            let z_a = z.rows(0, n3).into_owned();
            let alone = min_test_error(&pair.task_a, &z_a, cfg.student_width.min(n3), None, cfg, seed)?;
            let joint = min_test_error(joint_teacher, &z, cfg.student_width, Some(head_a.clone()), cfg, seed)?;
            Ok((alone, joint))
        })
        .collect();
    let pairs = per_seed.into_iter().collect::<Result<Vec<_>>>()?;
    let n = pairs.len() as f64;
    let eps_a_alone = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let eps_a_joint = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let diffs: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let ci = bootstrap_halfwidth(&diffs, cfg.bootstrap, cfg.base_seed);
    Ok(TransferResult {
        eps_a_alone,
        eps_a_joint,
        benefit: eps_a_alone - eps_a_joint,
        method: TransferMethod::Simulation,
        ci_halfwidth: Some(ci),
    })
}

/// Half-width of the 95% percentile bootstrap interval of the mean.
pub fn bootstrap_halfwidth(values: &[f64], resamples: usize, seed: u64) -> f64 {
    let n = values.len();
    if n < 2 || resamples == 0 {
        return f64::NAN;
    }
    let mut rng = stream_rng(derive_seed(seed, 0xb007), 0);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let at = |p: f64| means[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    0.5 * (at(0.975) - at(0.025))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransferGridRow {
    pub q: f64,
    pub snr_a: f64,
    pub snr_b: f64,
    pub t_theory: f64,
    pub t_sim: Option<f64>,
    pub ci: Option<f64>,
}

pub fn grid_to_csv(rows: &[TransferGridRow]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut out = String::from("q,snr_a,snr_b,T_theory,T_sim,ci\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.q,
            r.snr_a,
            r.snr_b,
            r.t_theory,
            opt(r.t_sim),
            opt(r.ci)
        ));
    }
    out
}

/// Rank-1 transfer grid over (q, s̄_B). Simulation columns are filled when
/// `sim` is given.
#[allow(clippy::too_many_arguments)]
pub fn transfer_grid(
    n1: usize,
    n3: usize,
    snr_a: f64,
    snr_bs: &[f64],
    qs: &[f64],
    dynamics: &DynamicsParams,
    sim: Option<(&TransferSimConfig, usize)>,
    seed: u64,
) -> Result<Vec<TransferGridRow>> {
    let mut rows = Vec::with_capacity(snr_bs.len() * qs.len());
    for &snr_b in snr_bs {
        for &q in qs {
            let pair = rank1_pair(n1, n3, snr_a, snr_b, q, 1.0, seed)?;
            let width = sim.map_or(n3, |(c, _)| c.student_width);
            let theory = transfer_benefit_theory(&pair, dynamics, width)?;
            let (t_sim, ci) = match sim {
                Some((cfg, seeds)) => {
                    let r = transfer_benefit_sim(&pair, cfg, seeds)?;
                    (Some(r.benefit), r.ci_halfwidth)
                }
                None => (None, None),
            };
            rows.push(TransferGridRow {
                q,
                snr_a,
                snr_b,
                t_theory: theory.benefit,
                t_sim,
                ci,
            });
        }
    }
    Ok(rows)
}
