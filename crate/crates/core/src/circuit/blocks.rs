//! Single-gate payloads: F-move blocks and the spectral data of the reduced
//! plaquette matrix.

use nalgebra::DMatrix;

use super::{CircuitError, Result};
use crate::linalg::sym_eigen;
use crate::qalgebra::{FTable, SpinLabel};

/// Labels `e` allowed on the link an F-move removes, and labels allowed on
/// the link it creates, for controls `(a, b, n, p)`.
pub fn fmove_channels(table: &FTable, [a, b, n, p]: [u32; 4]) -> (Vec<u32>, Vec<u32>) {
    let k = table.level().k();
    let old = (0..=k).filter(|&e| table.is_admissible(a, p, e) && table.is_admissible(n, b, e)).collect();
    let new = (0..=k).filter(|&e| table.is_admissible(a, b, e) && table.is_admissible(n, p, e)).collect();
    (old, new)
}

/// Operator matrix `M[new][old] = F^{a b new}_{n p old}` of an F-move on a
/// link with corner labels `a` (before it) and `b` (after it), and
/// neighbouring links `p` (previous) and `n` (next).
///
/// Outside the admissible channels the matrix is a permutation pairing the
/// remaining labels in ascending order, so the block is a full orthogonal
/// matrix on the qudit.
pub fn fmove_matrix(table: &FTable, controls: [u32; 4]) -> DMatrix<f64> {
    let [a, b, n, p] = controls;
    let d = table.level().num_labels();
    let (old, new) = fmove_channels(table, controls);
    assert_eq!(old.len(), new.len(), "F-move channel count mismatch for {controls:?}");
    let mut m = DMatrix::zeros(d, d);
    for &e in &old {
        for &f in &new {
            m[(f as usize, e as usize)] = table.get_twice([a, b, f, n, p, e]);
        }
    }
    let rest_old = (0..d as u32).filter(|e| !old.contains(e));
    let rest_new = (0..d as u32).filter(|e| !new.contains(e));
    for (o, n) in rest_old.zip(rest_new) {
        m[(n as usize, o as usize)] = 1.0;
    }
    m
}

/// [`fmove_matrix`] with labelled controls `(j1, j2, j3, j4) = (a, b, n, p)`.
pub fn fmove_unitary(controls: [SpinLabel; 4], table: &FTable) -> DMatrix<f64> {
    fmove_matrix(table, controls.map(SpinLabel::twice))
}

/// Eigen-decomposition of `F''_J[j'][j] = F^{J j j}_{1/2 j' j'}` on the labels
/// `j` with `(J, j, j)` admissible.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralBlock {
    pub flux: u32,
    pub labels: Vec<u32>,
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors, ordered like `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralBlock {
    /// Position of `j` in `labels`.
    pub fn position(&self, j: u32) -> Option<usize> {
        self.labels.iter().position(|&l| l == j)
    }

    /// `G_J` on the full qudit: eigenvector `m` is written to the `m`-th
    /// admissible label; identity on the other labels.
    pub fn rotation(&self, dim: usize) -> DMatrix<f64> {
        let mut g = DMatrix::identity(dim, dim);
        for (m, &lm) in self.labels.iter().enumerate() {
            for (j, &lj) in self.labels.iter().enumerate() {
                g[(lm as usize, lj as usize)] = self.eigenvectors[(j, m)];
            }
        }
        g
    }

    /// `max |G^T F'' G - diag(omega)|`.
    pub fn diagonalization_residual(&self) -> f64 {
        let d = self.eigenvectors.transpose() * &self.matrix * &self.eigenvectors;
        let n = d.nrows();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let want = if r == c { self.eigenvalues[r] } else { 0.0 };
                worst = worst.max((d[(r, c)] - want).abs());
            }
        }
        worst
    }
}

/// Symmetry tolerance on `F''_J`.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralTable {
    pub k: u32,
    pub blocks: Vec<SpectralBlock>,
}

impl SpectralTable {
    pub fn block(&self, flux: u32) -> &SpectralBlock {
        &self.blocks[flux as usize]
    }

    /// `omega_j^(J)` for label `j`, if `(J, j, j)` is admissible.
    pub fn omega(&self, flux: u32, j: u32) -> Option<f64> {
        let b = self.block(flux);
        b.position(j).map(|m| b.eigenvalues[m])
    }
}

/// Reduced plaquette matrix for flux `J`, restricted to its admissible labels.
pub fn reduced_plaquette_matrix(table: &FTable, flux: u32) -> (Vec<u32>, DMatrix<f64>) {
    let k = table.level().k();
    let labels: Vec<u32> = (0..=k).filter(|&j| table.is_admissible(flux, j, j)).collect();
    let n = labels.len();
    let m = DMatrix::from_fn(n, n, |r, c| table.get_twice([flux, labels[c], labels[c], 1, labels[r], labels[r]]));
    (labels, m)
}

/// Builds the G-gate data for every flux `J`; fails if some `F''_J` is not
/// symmetric.
pub fn g_gate(table: &FTable) -> Result<SpectralTable> {
    let k = table.level().k();
    let mut blocks = Vec::with_capacity(k as usize + 1);
    for flux in 0..=k {
        let (labels, matrix) = reduced_plaquette_matrix(table, flux);
        let residual = (&matrix - matrix.transpose()).amax();
        if residual > SYMMETRY_TOL {
            return Err(CircuitError::AsymmetricBlock { k, flux, residual });
        }
        let (eigenvalues, eigenvectors) = sym_eigen(matrix.clone());
        blocks.push(SpectralBlock { flux, labels, matrix, eigenvalues, eigenvectors });
    }
    Ok(SpectralTable { k, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qalgebra::Level;

    fn table(k: u32) -> FTable {
        FTable::eager(Level::new(k).unwrap())
    }

    #[test]
    fn trivial_controls_give_identity() {
        for k in 1..=4 {
            let m = fmove_matrix(&table(k), [0, 0, 0, 0]);
            assert_eq!(m, DMatrix::identity(k as usize + 1, k as usize + 1));
        }
    }

    #[test]
    fn blocks_are_orthogonal() {
        for k in 1..=3 {
            let t = table(k);
            let d = k as usize + 1;
            let mut asym = 0.0f64;
            for c in 0..d.pow(4) {
                let ctl = [0, 1, 2, 3].map(|i| ((c / d.pow(i)) % d) as u32);
                let m = fmove_matrix(&t, ctl);
                assert!((m.transpose() * &m - DMatrix::identity(d, d)).amax() < 1e-10, "{ctl:?}");
                asym = asym.max((&m - m.transpose()).amax());
                if m == m.transpose() {
                    assert!((&m * &m - DMatrix::identity(d, d)).amax() < 1e-10);
                }
            }
            if k == 1 {
                assert!(asym < 1e-15);
            }
        }
    }

    #[test]
    fn k1_flux_zero_block() {
        let st = g_gate(&table(1)).unwrap();
        let b = st.block(0);
        assert_eq!(b.labels, vec![0, 1]);
        assert!((b.eigenvalues[0] + 1.0).abs() < 1e-12);
        assert!((b.eigenvalues[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_blocks_diagonalize() {
        for k in 1..=6 {
            let st = g_gate(&table(k)).unwrap();
            for b in &st.blocks {
                assert!(b.diagonalization_residual() < 1e-10);
                let frob: f64 = b.matrix.iter().map(|x| x * x).sum();
                let spec: f64 = b.eigenvalues.iter().map(|x| x * x).sum();
                assert!((frob - spec).abs() < 1e-10);
                let g = b.rotation(k as usize + 1);
                assert!((g.transpose() * &g - DMatrix::identity(k as usize + 1, k as usize + 1)).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn asymmetric_block_is_reported() {
        let mut t = table(2);
        t.inject([0, 0, 0, 1, 1, 1].map(SpinLabel::from_twice), 0.3);
        match g_gate(&t) {
            Err(CircuitError::AsymmetricBlock { k: 2, flux: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
