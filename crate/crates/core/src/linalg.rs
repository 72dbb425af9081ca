//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::rng::{gaussian_matrix, Rng};

/// faer's AVX kernels can return with dirty upper YMM halves. Every SSE
/// instruction afterwards then pays a transition penalty, which made the
/// scalar quadrature loops run 15x slower for the rest of the process.
fn clear_upper_vector_state() {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx") {
        // SAFETY: the instruction exists whenever AVX is available.
        unsafe { std::arch::x86_64::_mm256_zeroupper() }
    }
}

/// Thin SVD `M = U diag(s) Vᵀ` with singular values in descending order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    /// Thin SVD computed by faer. nalgebra's vector-returning SVD can lose
    /// several digits on rank-deficient inputs.
    pub fn of(m: &DMatrix<f64>) -> Svd {
        let (r, c) = m.shape();
        let k = r.min(c);
        if k == 0 {
            return Svd {
                u: DMatrix::zeros(r, 0),
                s: vec![],
                v: DMatrix::zeros(c, 0),
            };
        }
        let fm = faer::Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)]);
        let svd = fm.thin_svd().expect("SVD of a finite matrix converges");
        clear_upper_vector_state();
        let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| fs[b].total_cmp(&fs[a]));
        let u = DMatrix::from_fn(r, k, |i, j| fu[(i, order[j])]);
        let v = DMatrix::from_fn(c, k, |i, j| fv[(i, order[j])]);
        let s = order.iter().map(|&i| fs[i]).collect();
        Svd { u, s, v }
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `U_k diag(values) V_kᵀ` for the first `values.len()` modes.
    pub fn compose(&self, values: &[f64]) -> DMatrix<f64> {
        let k = values.len();
        let mut us = self.u.columns(0, k).into_owned();
        for (j, &sv) in values.iter().enumerate() {
            us.column_mut(j).scale_mut(sv);
        }
        us * self.v.columns(0, k).transpose()
    }
}

/// Haar-distributed `n × k` matrix with orthonormal columns.
pub fn random_orthonormal(n: usize, k: usize, rng: &mut Rng) -> DMatrix<f64> {
    assert!(k <= n, "cannot draw {k} orthonormal columns in dimension {n}");
    if k == 0 {
        return DMatrix::zeros(n, 0);
    }
    let g = gaussian_matrix(n, k, 1.0, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Sign convention diag(R) > 0 makes Q exactly Haar.
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn frob_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum()
}

/// `tr(Aᵀ B)` without forming the product.
pub fn frob_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Largest |Mᵢⱼ − Iᵢⱼ|.
pub fn identity_defect(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m[(i, j)] - target).abs());
        }
    }
    worst
}

/// Matrix function of a symmetric PSD matrix applied through its eigenvalues.
/// Returns the eigen-decomposition alongside so callers can inspect the spectrum.
pub fn sym_apply(
    m: &DMatrix<f64>,
    f: impl Fn(f64) -> f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let q = &eig.eigenvectors;
    let mut scaled = q.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        scaled.column_mut(j).scale_mut(f(l));
    }
    (scaled * q.transpose(), eig.eigenvalues)
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn svd_values_match_value_only_path() {
        // Stacked rank-3 map with a near-degenerate pair; the vector-returning
        // nalgebra SVD was off by ~1e-6 here.
        let mut rng = stream_rng(21, 0);
        for _ in 0..10 {
            let a = random_orthonormal(40, 3, &mut rng);
            let b = random_orthonormal(20, 3, &mut rng);
            let m = &b * DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 4.5, 4.0])) * a.transpose();
            let svd = Svd::of(&m);
            let reference = m.singular_values();
            for i in 0..3 {
                assert!((svd.s[i] - reference[i]).abs() < 1e-12, "{:?}", svd.s);
            }
            assert!((svd.compose(&svd.s) - &m).amax() < 1e-12);
        }
    }

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        let mut rng = stream_rng(7, 0);
        let m = gaussian_matrix(6, 9, 1.0, &mut rng);
        let svd = Svd::of(&m);
        assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        let back = svd.compose(&svd.s);
        assert!((back - &m).amax() < 1e-12);
    }

    #[test]
    fn orthonormal_columns() {
        let mut rng = stream_rng(3, 1);
        let q = random_orthonormal(20, 5, &mut rng);
        assert!(identity_defect(&(q.transpose() * &q)) < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
