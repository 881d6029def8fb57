//! Plaquette F-move sequences and second-order Trotter steps.

use nalgebra::DMatrix;
use serde::Serialize;

use super::blocks::{fmove_matrix, SpectralTable};
use super::ir::{Circuit, CircuitMetadata, GateKind};
use super::{CircuitError, Result};
use crate::linalg::C64;
use crate::qalgebra::{FTable, SpinLabel};
use crate::spinnet::{electric_energy, LinkKind, SpinNetwork, Topology};

/// A qudit of the hexagon, by its role.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Slot {
    Inner(usize),
    Outer(usize),
}

/// One F-move of the plaquette reduction: `target` is rewritten; the
/// controls are `(a, b, n, p)` as in [`fmove_matrix`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FMoveSpec {
    pub kind: GateKind,
    pub target: usize,
    pub controls: [Slot; 4],
    /// Moves sharing a stage touch disjoint qudits and run in parallel.
    pub stage: u32,
}

impl FMoveSpec {
    /// Qudits touched, as inner/outer slots.
    pub fn touches(&self) -> Vec<Slot> {
        let mut v = vec![Slot::Inner(self.target)];
        for c in self.controls {
            if !v.contains(&c) {
                v.push(c);
            }
        }
        v
    }
}

/// The five moves that reduce a hexagon to a loop on inner link 0 with a
/// stem on inner link 3.
///
/// After the moves, inner qudit 5 holds the fused label of the corner links
/// 4 and 5, qudit 2 that of corners 1 and 2, qudit 4 the corner between
/// links 3 and 0, qudit 1 the corner between links 0 and 3, and qudit 3 the
/// stem label `J`.
pub fn plaquette_fmove_sequence() -> [FMoveSpec; 5] {
    use Slot::*;
    [
        FMoveSpec { kind: GateKind::FMove, target: 5, controls: [Outer(4), Outer(5), Inner(0), Inner(4)], stage: 0 },
        FMoveSpec { kind: GateKind::FMove, target: 2, controls: [Outer(1), Outer(2), Inner(3), Inner(1)], stage: 0 },
        FMoveSpec { kind: GateKind::FMove, target: 4, controls: [Outer(3), Inner(5), Inner(0), Inner(3)], stage: 1 },
        FMoveSpec { kind: GateKind::FMove, target: 1, controls: [Outer(0), Inner(2), Inner(3), Inner(0)], stage: 2 },
        FMoveSpec { kind: GateKind::FPrime, target: 3, controls: [Inner(1), Inner(4), Inner(0), Inner(0)], stage: 3 },
    ]
}

/// Register positions of one plaquette's twelve links.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PlaquetteLayout {
    pub inner: [usize; 6],
    pub outer: [usize; 6],
}

impl PlaquetteLayout {
    pub const HEXAGON: PlaquetteLayout =
        PlaquetteLayout { inner: [0, 1, 2, 3, 4, 5], outer: [6, 7, 8, 9, 10, 11] };

    pub fn qudit(&self, slot: Slot) -> usize {
        match slot {
            Slot::Inner(i) => self.inner[i],
            Slot::Outer(i) => self.outer[i],
        }
    }
}

fn complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

fn is_identity(m: &DMatrix<f64>) -> bool {
    m.iter().enumerate().all(|(i, &x)| {
        let (r, c) = (i % m.nrows(), i / m.nrows());
        x == if r == c { 1.0 } else { 0.0 }
    })
}

/// Emits one F-move as a list of multi-controlled gates, one per control
/// assignment with a non-identity block. `inverse` emits the transposed
/// blocks.
fn emit_fmove(
    circuit: &mut Circuit,
    table: &FTable,
    spec: &FMoveSpec,
    layout: &PlaquetteLayout,
    inverse: bool,
    layer: u32,
    plaquette: u32,
) {
    let d = circuit.dim;
    let target = layout.inner[spec.target];
    let ctl_qudits: Vec<usize> = spec.controls.iter().map(|&s| layout.qudit(s)).collect();
    let mut distinct: Vec<usize> = Vec::new();
    for &q in &ctl_qudits {
        if !distinct.contains(&q) {
            distinct.push(q);
        }
    }
    let combos = d.pow(distinct.len() as u32);
    for c in 0..combos {
        let values: Vec<u32> = (0..distinct.len()).map(|i| ((c / d.pow(i as u32)) % d) as u32).collect();
        let lookup = |q: usize| values[distinct.iter().position(|&x| x == q).unwrap()];
        let ctl = [0, 1, 2, 3].map(|i| lookup(ctl_qudits[i]));
        let m = fmove_matrix(table, ctl);
        if is_identity(&m) {
            continue;
        }
        let m = if inverse { m.transpose() } else { m };
        let controls = distinct.iter().copied().zip(values.iter().copied()).collect();
        circuit.push(spec.kind, vec![target], controls, complex(&m), layer, Some(plaquette));
    }
}

/// Two-qudit `G` on `(loop, stem)`: block `G_J` on the loop qudit for stem
/// value `J`; `transpose` gives `G^T`.
fn g_payload(spectral: &SpectralTable, d: usize, transpose: bool) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(d * d, d * d);
    for flux in 0..d {
        let g = spectral.block(flux as u32).rotation(d);
        let g = if transpose { g.transpose() } else { g };
        for r in 0..d {
            for c in 0..d {
                m[(r + d * flux, c + d * flux)] = C64::new(g[(r, c)], 0.0);
            }
        }
    }
    m
}

/// Diagonal `exp(i theta omega_j^(J))` on `(loop, stem)`; 1 where `(J, j, j)`
/// is inadmissible.
fn omega_payload(spectral: &SpectralTable, d: usize, theta: f64) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(d * d, d * d);
    for flux in 0..d {
        for j in 0..d {
            let i = j + d * flux;
            m[(i, i)] = match spectral.omega(flux as u32, j as u32) {
                Some(w) => C64::from_polar(1.0, theta * w),
                None => C64::new(1.0, 0.0),
            };
        }
    }
    m
}

/// Appends the F-move conjugation `F` (forward) for one plaquette.
pub fn emit_reduction(circuit: &mut Circuit, table: &FTable, layout: &PlaquetteLayout, plaquette: u32, stages: &mut StageLayers) {
    for spec in plaquette_fmove_sequence() {
        let layer = stages.forward(circuit, spec.stage);
        emit_fmove(circuit, table, &spec, layout, false, layer, plaquette);
    }
}

/// Appends the inverse of [`emit_reduction`].
pub fn emit_reduction_inverse(
    circuit: &mut Circuit,
    table: &FTable,
    layout: &PlaquetteLayout,
    plaquette: u32,
    stages: &mut StageLayers,
) {
    for spec in plaquette_fmove_sequence().iter().rev() {
        let layer = stages.backward(circuit, spec.stage);
        emit_fmove(circuit, table, spec, layout, true, layer, plaquette);
    }
}

/// Layer ids for the stages of one plaquette reduction, so parallel moves
/// share a layer.
#[derive(Default)]
pub struct StageLayers {
    fwd: Vec<(u32, u32)>,
    bwd: Vec<(u32, u32)>,
}

impl StageLayers {
    fn get(list: &mut Vec<(u32, u32)>, circuit: &mut Circuit, stage: u32) -> u32 {
        if let Some(&(_, l)) = list.iter().find(|(s, _)| *s == stage) {
            return l;
        }
        let l = circuit.open_layer();
        list.push((stage, l));
        l
    }

    fn forward(&mut self, circuit: &mut Circuit, stage: u32) -> u32 {
        Self::get(&mut self.fwd, circuit, stage)
    }

    fn backward(&mut self, circuit: &mut Circuit, stage: u32) -> u32 {
        Self::get(&mut self.bwd, circuit, stage)
    }
}

/// Appends `exp(i theta U_p)` for the plaquette at `layout` as
/// `F^T G^T Omega G F`.
pub fn emit_plaquette_exponential(
    circuit: &mut Circuit,
    table: &FTable,
    spectral: &SpectralTable,
    layout: &PlaquetteLayout,
    theta: f64,
    plaquette: u32,
) {
    let d = circuit.dim;
    let (loop_q, stem_q) = (layout.inner[0], layout.inner[3]);
    let mut stages = StageLayers::default();
    emit_reduction(circuit, table, layout, plaquette, &mut stages);
    let l = circuit.open_layer();
    circuit.push(GateKind::G, vec![loop_q, stem_q], vec![], g_payload(spectral, d, false), l, Some(plaquette));
    let l = circuit.open_layer();
    circuit.push(GateKind::Omega, vec![loop_q, stem_q], vec![], omega_payload(spectral, d, theta), l, Some(plaquette));
    let l = circuit.open_layer();
    circuit.push(GateKind::G, vec![loop_q, stem_q], vec![], g_payload(spectral, d, true), l, Some(plaquette));
    emit_reduction_inverse(circuit, table, layout, plaquette, &mut stages);
}

/// Appends `exp(-i c E(j))` on each listed qudit.
pub fn emit_electric(circuit: &mut Circuit, qudits: &[usize], c: f64) {
    let d = circuit.dim;
    let payload = DMatrix::from_fn(d, d, |r, col| {
        if r == col {
            C64::from_polar(1.0, -c * electric_energy(SpinLabel::from_twice(r as u32)))
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let l = circuit.open_layer();
    for &q in qudits {
        circuit.push(GateKind::Electric, vec![q], vec![], payload.clone(), l, None);
    }
}

/// Lattices the compiler accepts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Lattice {
    /// Twelve qudits: inner links `0..6`, outer links `6..12`.
    Hexagon,
    /// Point-split `L x L` torus, one qudit per link. `L` must be even so the
    /// plaquettes split into two checkerboard sublattices.
    Torus { l: usize },
}

impl Lattice {
    pub fn name(&self) -> String {
        match self {
            Lattice::Hexagon => "hexagon".into(),
            Lattice::Torus { l } => format!("{l}x{l}"),
        }
    }

    pub fn network(&self) -> Result<SpinNetwork> {
        match self {
            Lattice::Hexagon => Ok(SpinNetwork::hexagon([SpinLabel::ZERO; 6])),
            Lattice::Torus { l } if l % 2 == 0 => Ok(SpinNetwork::torus(*l)?),
            Lattice::Torus { l } => Err(CircuitError::UnsupportedTopology(format!(
                "{l}x{l} torus has no checkerboard two-colouring"
            ))),
        }
    }

    /// Sublattice (0 or 1) of each plaquette.
    pub fn colouring(&self, network: &SpinNetwork) -> Vec<u32> {
        match (&network.topology, self) {
            (Topology::Torus { l }, _) => (0..network.plaquettes.len()).map(|p| ((p % l + p / l) % 2) as u32).collect(),
            _ => vec![0; network.plaquettes.len()],
        }
    }
}

/// Which layers of the step to emit.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StepTerms {
    pub electric: bool,
    pub magnetic: bool,
}

impl Default for StepTerms {
    fn default() -> Self {
        StepTerms { electric: true, magnetic: true }
    }
}

/// Gate sub-list for `exp(i theta U_p)` on the hexagon register.
pub fn trotter_plaquette_step(theta: f64, table: &FTable, spectral: &SpectralTable) -> Circuit {
    let k = table.level().k();
    let mut c = Circuit::new(
        12,
        k as usize + 1,
        CircuitMetadata { k, g2: f64::NAN, tau: f64::NAN, lattice: "hexagon".into(), trotter_order: 0, steps: 1, representatives: vec![0] },
    );
    emit_plaquette_exponential(&mut c, table, spectral, &PlaquetteLayout::HEXAGON, theta, 0);
    c
}

/// `U_E(tau/2) U_B(tau) U_E(tau/2)` for the raw Hamiltonian
/// `H = g^2/2 sum E^2 - 1/g^2 sum U` (with `U = U^†`), repeated `steps`
/// times.
pub fn trotter_step_second_order(
    tau: f64,
    g2: f64,
    steps: usize,
    lattice: &Lattice,
    table: &FTable,
    spectral: &SpectralTable,
    terms: StepTerms,
) -> Result<Circuit> {
    let k = table.level().k();
    let net = lattice.network()?;
    let colours = lattice.colouring(&net);
    let physical: Vec<usize> =
        net.links.iter().enumerate().filter(|(_, l)| l.kind == LinkKind::Physical).map(|(i, _)| i).collect();
    let representatives = (0..2).filter_map(|c| colours.iter().position(|&x| x == c).map(|p| p as u32)).collect();
    let metadata = CircuitMetadata { k, g2, tau, lattice: lattice.name(), trotter_order: 2, steps, representatives };
    let mut c = Circuit::new(net.links.len(), k as usize + 1, metadata);
    let half = 0.5 * tau * 0.5 * g2;
    for _ in 0..steps {
        if terms.electric {
            emit_electric(&mut c, &physical, half);
        }
        if terms.magnetic {
            for colour in 0..2 {
                for (p, plaq) in net.plaquettes.iter().enumerate() {
                    if colours[p] != colour {
                        continue;
                    }
                    let layout = PlaquetteLayout { inner: plaq.inner, outer: plaq.outer };
                    emit_plaquette_exponential(&mut c, table, spectral, &layout, tau / g2, p as u32);
                }
            }
        }
        if terms.electric {
            emit_electric(&mut c, &physical, half);
        }
    }
    Ok(c)
}
