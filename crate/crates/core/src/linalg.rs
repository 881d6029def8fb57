//! Dense helpers shared by the eigensolver and the circuit verifier.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;

/// Full eigendecomposition of a real symmetric matrix.
///
/// Eigenvalues ascending; each eigenvector normalized with its first
/// non-negligible component positive.
pub fn sym_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: DVector<f64> = eig.eigenvectors.column(src).into_owned();
        fix_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Normalizes and flips `v` so that its first non-negligible entry is positive.
pub fn fix_sign(v: &mut DVector<f64>) {
    let norm = v.norm();
    if norm > 0.0 {
        *v /= norm;
    }
    let scale = v.amax();
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-10 * scale) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

/// `exp(i θ M)` for real symmetric `M`.
pub fn expm_i_sym(theta: f64, m: &DMatrix<f64>) -> DMatrix<C64> {
    let (values, vectors) = sym_eigen(m.clone());
    let n = values.len();
    let v = vectors.map(|x| C64::new(x, 0.0));
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        values.iter().map(|&l| C64::from_polar(1.0, theta * l)),
    ));
    &v * phases * v.transpose()
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}
