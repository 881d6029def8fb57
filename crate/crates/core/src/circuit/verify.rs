//! Dense checks of compiled hexagon circuits against the spin-network
//! Hamiltonian, with the outer links pinned to classical labels.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use super::blocks::SpectralTable;
use super::ir::{Circuit, CircuitMetadata};
use super::sim::{Simulator, DEFAULT_SIM_CAP};
use super::trotter::{
    emit_reduction, trotter_plaquette_step, trotter_step_second_order, Lattice, PlaquetteLayout, StageLayers,
    StepTerms,
};
use super::{CircuitError, Result};
use crate::linalg::{expm_i_sym, max_abs, operator_norm, C64};
use crate::qalgebra::{FTable, Level, SpinLabel};
use crate::spinnet::{build_hamiltonian, plaquette_operator, Convention, SnBasis, SpinNetwork};

/// Deviation of a circuit from a reference unitary on the admissible block.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct BlockError {
    /// Admissible block dimension.
    pub dim: usize,
    pub max_abs: f64,
    pub operator_norm: f64,
    /// Largest weight any admissible input leaves outside the block.
    pub leakage: f64,
}

/// A hexagon with fixed outer labels, its admissible basis, and a simulator
/// over the six inner qudits.
pub struct PinnedHexagon {
    pub outer: [SpinLabel; 6],
    pub basis: SnBasis,
    sim: Simulator,
    /// Register index of each basis state.
    rows: Vec<usize>,
}

impl PinnedHexagon {
    pub fn new(outer: [SpinLabel; 6], level: Level, circuit: &Circuit) -> Result<Self> {
        let basis = SnBasis::enumerate(&SpinNetwork::hexagon(outer), level)?;
        let fixed: Vec<(usize, u32)> = (0..6).map(|i| (6 + i, outer[i].twice())).collect();
        let sim = Simulator::new(circuit, &fixed, DEFAULT_SIM_CAP)?;
        let rows = basis.states().iter().map(|s| sim.index_of(s)).collect();
        Ok(PinnedHexagon { outer, basis, sim, rows })
    }

    /// Register columns of all admissible basis states.
    pub fn embedding(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.sim.size(), self.rows.len());
        for (col, &r) in self.rows.iter().enumerate() {
            m[(r, col)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Images of the admissible basis states under `circuit`.
    pub fn images(&self, circuit: &Circuit) -> Result<DMatrix<C64>> {
        self.sim.run_block(circuit, &self.embedding())
    }

    /// Rows of `images` that belong to the admissible block.
    pub fn restrict(&self, images: &DMatrix<C64>) -> DMatrix<C64> {
        let n = self.rows.len();
        DMatrix::from_fn(n, images.ncols(), |r, c| images[(self.rows[r], c)])
    }

    /// Compares the images with `reference`, a unitary on the admissible block.
    pub fn compare(&self, images: &DMatrix<C64>, reference: &DMatrix<C64>) -> BlockError {
        let n = self.rows.len();
        let restricted = self.restrict(images);
        let mut in_block = vec![false; images.nrows()];
        for &r in &self.rows {
            in_block[r] = true;
        }
        let leakage = (0..n)
            .map(|c| {
                let outside: f64 =
                    images.column(c).iter().zip(&in_block).filter(|(_, &b)| !b).map(|(z, _)| z.norm_sqr()).sum();
                outside.sqrt()
            })
            .fold(0.0, f64::max);
        let diff = restricted - reference;
        BlockError { dim: n, max_abs: max_abs(&diff), operator_norm: operator_norm(&diff), leakage }
    }

    /// Inner digits of register index `i`.
    fn inner_digits(&self, i: usize) -> [u32; 12] {
        std::array::from_fn(|q| self.sim.digit(i, q))
    }
}

/// Draws outer labels until the hexagon has a non-empty admissible basis.
pub fn random_outer(level: Level, rng: &mut impl Rng) -> [SpinLabel; 6] {
    let net_ok = |outer: [SpinLabel; 6]| SnBasis::enumerate(&SpinNetwork::hexagon(outer), level).is_ok();
    loop {
        let outer = std::array::from_fn(|_| SpinLabel::from_twice(rng.random_range(0..=level.k())));
        if net_ok(outer) {
            return outer;
        }
    }
}

fn plaquette_dense(basis: &SnBasis, table: &FTable) -> DMatrix<f64> {
    plaquette_operator(basis, table, 0, SpinLabel::HALF).to_dense()
}

/// `F Omega(theta) F^T` on the pinned hexagon vs `exp(i theta U)`.
pub fn hexagon_exactness(
    table: &FTable,
    spectral: &SpectralTable,
    outer: [SpinLabel; 6],
    theta: f64,
) -> Result<BlockError> {
    let circuit = trotter_plaquette_step(theta, table, spectral);
    let hex = PinnedHexagon::new(outer, table.level(), &circuit)?;
    let exact = expm_i_sym(theta, &plaquette_dense(&hex.basis, table));
    Ok(hex.compare(&hex.images(&circuit)?, &exact))
}

/// Circuit of the five F-moves alone on the hexagon register.
pub fn reduction_circuit(table: &FTable) -> Circuit {
    let k = table.level().k();
    let metadata = CircuitMetadata {
        k,
        g2: f64::NAN,
        tau: f64::NAN,
        lattice: "hexagon".into(),
        trotter_order: 0,
        steps: 1,
        representatives: vec![0],
    };
    let mut c = Circuit::new(12, k as usize + 1, metadata);
    emit_reduction(&mut c, table, &PlaquetteLayout::HEXAGON, 0, &mut StageLayers::default());
    c
}

/// `max |F U - D F|` over admissible inputs, where `D` acts as
/// `F^{J j j}_{1/2 j' j'}` on the loop qudit (inner 0) given the stem label
/// `J` (inner 3) and as the identity elsewhere.
pub fn conjugation_residual(table: &FTable, outer: [SpinLabel; 6]) -> Result<f64> {
    let circuit = reduction_circuit(table);
    let hex = PinnedHexagon::new(outer, table.level(), &circuit)?;
    let reduced = hex.images(&circuit)?;
    let u = plaquette_dense(&hex.basis, table).map(|x| C64::new(x, 0.0));
    let lhs = &reduced * u;

    let d = table.level().num_labels() as u32;
    let mut rhs = DMatrix::zeros(reduced.nrows(), reduced.ncols());
    for row in 0..reduced.nrows() {
        let mut digits = hex.inner_digits(row);
        let (flux, j) = (digits[3], digits[0]);
        for jp in 0..d {
            let f = table.get_twice([flux, j, j, 1, jp, jp]);
            if f == 0.0 {
                continue;
            }
            digits[0] = jp;
            let target = hex.sim.index_of(&digits);
            for col in 0..reduced.ncols() {
                let v = reduced[(row, col)];
                rhs[(target, col)] += v * f;
            }
        }
    }
    Ok(max_abs(&(lhs - rhs)))
}

/// One symmetric Trotter step on the pinned hexagon vs `exp(-i tau H)` with
/// the raw Hamiltonian.
pub fn trotter_error(
    table: &FTable,
    spectral: &SpectralTable,
    outer: [SpinLabel; 6],
    tau: f64,
    g2: f64,
    terms: StepTerms,
) -> Result<BlockError> {
    let circuit = trotter_step_second_order(tau, g2, 1, &Lattice::Hexagon, table, spectral, terms)?;
    let hex = PinnedHexagon::new(outer, table.level(), &circuit)?;
    let h = build_hamiltonian(&hex.basis, table, g2, Convention::Raw)?;
    let mut h = h.to_dense();
    if !terms.magnetic || !terms.electric {
        let u = plaquette_dense(&hex.basis, table);
        let (_, cb) = Convention::Raw.coefficients(g2);
        let magnetic = (&u + u.transpose()) * cb;
        if !terms.magnetic {
            h -= &magnetic;
        }
        if !terms.electric {
            h = magnetic;
        }
    }
    let exact = expm_i_sym(-tau, &h);
    Ok(hex.compare(&hex.images(&circuit)?, &exact))
}

/// Checks that a lattice name parses as a supported torus or the hexagon.
pub fn parse_lattice(name: &str) -> Result<Lattice> {
    if name.eq_ignore_ascii_case("hexagon") {
        return Ok(Lattice::Hexagon);
    }
    let bad = || CircuitError::UnsupportedTopology(name.to_string());
    let (a, b) = name.split_once(['x', 'X']).ok_or_else(bad)?;
    let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a != b {
        return Err(bad());
    }
    let lattice = Lattice::Torus { l: a };
    lattice.network()?;
    Ok(lattice)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::blocks::g_gate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(k: u32) -> (FTable, SpectralTable) {
        let t = FTable::eager(Level::new(k).unwrap());
        let s = g_gate(&t).unwrap();
        (t, s)
    }

    #[test]
    fn plaquette_exponential_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 1..=2 {
            let (t, s) = setup(k);
            for _ in 0..3 {
                let outer = random_outer(t.level(), &mut rng);
                for theta in [0.0, 0.4, 2.5] {
                    let e = hexagon_exactness(&t, &s, outer, theta).unwrap();
                    assert!(e.max_abs < 1e-10, "k={k} {outer:?} theta={theta}: {e:?}");
                    assert!(e.leakage < 1e-12);
                }
            }
        }
    }

    #[test]
    fn composition_of_steps() {
        let (t, s) = setup(2);
        let outer = [1, 1, 0, 1, 1, 0].map(SpinLabel::from_twice);
        let mut c = trotter_plaquette_step(0.3, &t, &s);
        c.append(&trotter_plaquette_step(0.5, &t, &s));
        let hex = PinnedHexagon::new(outer, t.level(), &c).unwrap();
        let whole = trotter_plaquette_step(0.8, &t, &s);
        let reference = hex.restrict(&hex.images(&whole).unwrap());
        let e = hex.compare(&hex.images(&c).unwrap(), &reference);
        assert!(e.max_abs < 1e-10, "{e:?}");
    }

    #[test]
    fn reduction_diagonalizes_plaquette() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..=2 {
            let t = FTable::eager(Level::new(k).unwrap());
            for _ in 0..3 {
                let outer = random_outer(t.level(), &mut rng);
                assert!(conjugation_residual(&t, outer).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn electric_only_step_is_exact() {
        let (t, s) = setup(2);
        let outer = [0, 2, 2, 0, 1, 1].map(SpinLabel::from_twice);
        let terms = StepTerms { electric: true, magnetic: false };
        let e = trotter_error(&t, &s, outer, 0.7, 1.3, terms).unwrap();
        assert!(e.max_abs < 1e-12, "{e:?}");
    }

    #[test]
    fn trotter_error_is_third_order_per_step() {
        let (t, s) = setup(2);
        let outer = [0; 6].map(SpinLabel::from_twice);
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&tau| trotter_error(&t, &s, outer, tau, 1.0, StepTerms::default()).unwrap().operator_norm)
            .collect();
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn lattice_names() {
        assert_eq!(parse_lattice("4x4").unwrap(), Lattice::Torus { l: 4 });
        assert_eq!(parse_lattice("hexagon").unwrap(), Lattice::Hexagon);
        assert!(matches!(parse_lattice("3x3"), Err(CircuitError::UnsupportedTopology(_))));
        assert!(parse_lattice("2x4").is_err());
    }
}
