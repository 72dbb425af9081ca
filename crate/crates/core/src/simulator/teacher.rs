use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{identity_defect, random_orthonormal};
use crate::rng::{stream, stream_rng};

/// Low-rank ground-truth map `W̄ = U diag(snrs) Vᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TeacherSpec {
    /// N̄₃ × N̄₂, orthonormal columns.
    pub u_out: DMatrix<f64>,
    pub snrs: Vec<f64>,
    /// N̄₁ × N̄₂, orthonormal columns.
    pub v_in: DMatrix<f64>,
    pub sigma_z: f64,
}

impl TeacherSpec {
    pub fn new(u_out: DMatrix<f64>, snrs: Vec<f64>, v_in: DMatrix<f64>, sigma_z: f64) -> Result<Self> {
        let k = snrs.len();
        if u_out.ncols() != k || v_in.ncols() != k {
            return Err(Error::DimError(format!(
                "teacher factors have {} and {} columns for {} singular values",
                u_out.ncols(),
                v_in.ncols(),
                k
            )));
        }
        if k > u_out.nrows() || k > v_in.nrows() {
            return Err(Error::DimError(format!(
                "rank {k} exceeds a {}x{} map",
                u_out.nrows(),
                v_in.nrows()
            )));
        }
        if snrs.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::ConfigInvalid("teacher singular values must be non-negative".into()));
        }
        if snrs.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::ConfigInvalid("teacher singular values must be descending".into()));
        }
        if !(sigma_z >= 0.0 && sigma_z.is_finite()) {
            return Err(Error::ConfigInvalid(format!("noise level must be non-negative, got {sigma_z}")));
        }
        if k > 0 {
            let du = identity_defect(&(u_out.transpose() * &u_out));
            let dv = identity_defect(&(v_in.transpose() * &v_in));
            if du > 1e-10 || dv > 1e-10 {
                return Err(Error::DimError(format!(
                    "teacher factors are not orthonormal (defects {du:.2e}, {dv:.2e})"
                )));
            }
        }
        Ok(TeacherSpec {
            u_out,
            snrs,
            v_in,
            sigma_z,
        })
    }

    pub fn n1(&self) -> usize {
        self.v_in.nrows()
    }

    pub fn n3(&self) -> usize {
        self.u_out.nrows()
    }

    pub fn rank(&self) -> usize {
        self.snrs.len()
    }

    pub fn aspect(&self) -> f64 {
        self.n3() as f64 / self.n1() as f64
    }

    /// Dense N̄₃ × N̄₁ matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut us = self.u_out.clone();
        for (j, &s) in self.snrs.iter().enumerate() {
            us.column_mut(j).scale_mut(s);
        }
        us * self.v_in.transpose()
    }

    pub fn frob_sq(&self) -> f64 {
        self.snrs.iter().map(|s| s * s).sum()
    }

    /// Same teacher with the output frame replaced by `rot · U`.
    pub fn rotate_outputs(&self, rot: &DMatrix<f64>) -> Result<Self> {
        TeacherSpec::new(rot * &self.u_out, self.snrs.clone(), self.v_in.clone(), self.sigma_z)
    }
}

/// Random teacher with Haar-distributed singular vectors.
pub fn make_teacher(n1: usize, n3: usize, snrs: &[f64], sigma_z: f64, seed: u64) -> Result<TeacherSpec> {
    let k = snrs.len();
    if n1 == 0 || n3 == 0 || k > n1.min(n3) {
        return Err(Error::DimError(format!(
            "rank {k} teacher does not fit {n3}x{n1}"
        )));
    }
    let u = random_orthonormal(n3, k, &mut stream_rng(seed, stream::TEACHER_U));
    let v = random_orthonormal(n1, k, &mut stream_rng(seed, stream::TEACHER_V));
    TeacherSpec::new(u, snrs.to_vec(), v, sigma_z)
}
