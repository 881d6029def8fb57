//! Ancilla lowering of multi-controlled gates and gate counting.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::Serialize;

use super::ir::{Circuit, Gate, GateKind};
use super::{CircuitError, Result};
use crate::linalg::C64;

/// Cyclic shift `|a> -> |a + step mod d>`.
pub fn shift_matrix(d: usize, step: isize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(d, d);
    for a in 0..d {
        let b = (a as isize + step).rem_euclid(d as isize) as usize;
        m[(b, a)] = C64::new(1.0, 0.0);
    }
    m
}

/// Replaces an `n`-controlled gate by `2n + 1` singly controlled gates that
/// count satisfied controls in `ancilla`, apply the payload when the count
/// is `n`, and uncount. `n = 0` returns the gate unchanged.
///
/// Shift payloads are added to `circuit`; the returned gates are not pushed.
pub fn expand_multicontrolled(circuit: &mut Circuit, gate: &Gate, ancilla: usize) -> Result<Vec<Gate>> {
    let n = gate.controls.len();
    if n == 0 {
        return Ok(vec![gate.clone()]);
    }
    let adim = circuit.qudit_dim(ancilla);
    if ancilla < circuit.qudits || adim < n + 1 {
        return Err(CircuitError::AncillaTooSmall { needed: n + 1, available: adim });
    }
    let inc = circuit.add_payload(shift_matrix(adim, 1));
    let dec = circuit.add_payload(shift_matrix(adim, -1));
    let mut out = Vec::with_capacity(2 * n + 1);
    let wrap = |kind, payload, target, control: (usize, u32)| Gate {
        kind,
        targets: vec![target],
        controls: vec![control],
        payload,
        layer: gate.layer,
        plaquette: gate.plaquette,
    };
    for &c in &gate.controls {
        out.push(wrap(GateKind::Increment, inc, ancilla, c));
    }
    out.push(Gate { controls: vec![(ancilla, n as u32)], ..gate.clone() });
    for &c in gate.controls.iter().rev() {
        out.push(wrap(GateKind::Decrement, dec, ancilla, c));
    }
    Ok(out)
}

/// Lowers every gate with two or more controls through one shared ancilla
/// of dimension `max_controls + 1`. Gates with at most one control are
/// already basic and are kept.
pub fn lower(circuit: &Circuit) -> Result<Circuit> {
    let max_n = circuit.gates.iter().map(|g| g.controls.len()).max().unwrap_or(0);
    let mut out = circuit.clone();
    if max_n < 2 {
        return Ok(out);
    }
    out.gates.clear();
    out.ancillas = circuit.ancillas + 1;
    out.ancilla_dim = out.ancilla_dim.max(max_n + 1);
    let ancilla = circuit.qudits + circuit.ancillas;
    for g in &circuit.gates {
        if g.controls.len() >= 2 {
            let gates = expand_multicontrolled(&mut out, g, ancilla)?;
            out.gates.extend(gates);
        } else {
            out.gates.push(g.clone());
        }
    }
    Ok(out)
}

/// `4 + 28 (k+1)^3 + 108 (k+1)^4`.
pub fn gate_bound(k: u32) -> u64 {
    let d = k as u64 + 1;
    4 + 28 * d.pow(3) + 108 * d.pow(4)
}

/// Logical layers per Trotter step for one plaquette of each sublattice.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LayerInventory {
    pub electric: usize,
    pub omega: usize,
    pub g: usize,
    pub f_prime: usize,
    pub f: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub k: u32,
    pub steps: usize,
    /// Layer counts per step.
    pub inventory: LayerInventory,
    /// Gates per kind in the whole circuit, before lowering.
    pub gates_by_kind: BTreeMap<String, usize>,
    /// Entangling gates per step for one plaquette of each sublattice, with
    /// every multi-controlled gate lowered to singly controlled gates.
    pub per_step: usize,
    /// Same count before lowering.
    pub per_step_unlowered: usize,
    pub total_entangling: usize,
    pub bound: u64,
    pub within_bound: bool,
}

/// Entangling gates a gate becomes after lowering.
fn lowered_cost(g: &Gate) -> usize {
    match g.controls.len() {
        0 | 1 => usize::from(g.is_entangling()),
        n => 2 * n + 1,
    }
}

/// Counts a circuit from [`super::trotter::trotter_step_second_order`],
/// lowered or not.
pub fn gate_count(circuit: &Circuit) -> ComplexityReport {
    let steps = circuit.metadata.steps.max(1);
    let reps = &circuit.metadata.representatives;
    let relevant = |g: &Gate| match g.plaquette {
        None => true,
        Some(p) => reps.is_empty() || reps.contains(&p),
    };
    let ancilla_op = |g: &Gate| matches!(g.kind, GateKind::Increment | GateKind::Decrement);

    let mut layers: BTreeMap<GateKind, BTreeSet<u32>> = BTreeMap::new();
    let mut gates_by_kind: BTreeMap<String, usize> = BTreeMap::new();
    let (mut per_step, mut per_step_unlowered, mut total_entangling) = (0, 0, 0);
    for g in &circuit.gates {
        *gates_by_kind.entry(g.kind.name().to_string()).or_default() += 1;
        total_entangling += lowered_cost(g);
        if !relevant(g) {
            continue;
        }
        per_step += lowered_cost(g);
        if !ancilla_op(g) {
            layers.entry(g.kind).or_default().insert(g.layer);
            per_step_unlowered += usize::from(g.is_entangling());
        }
    }
    let count = |kind| layers.get(&kind).map_or(0, |s| s.len()) / steps;
    let inventory = LayerInventory {
        electric: count(GateKind::Electric),
        omega: count(GateKind::Omega),
        g: count(GateKind::G),
        f_prime: count(GateKind::FPrime),
        f: count(GateKind::FMove),
    };
    let per_step = per_step / steps;
    let bound = gate_bound(circuit.metadata.k);
    ComplexityReport {
        k: circuit.metadata.k,
        steps,
        inventory,
        gates_by_kind,
        per_step,
        per_step_unlowered: per_step_unlowered / steps,
        total_entangling,
        bound,
        within_bound: per_step as u64 <= bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::blocks::g_gate;
    use crate::circuit::ir::CircuitMetadata;
    use crate::circuit::sim::Simulator;
    use crate::circuit::trotter::{trotter_plaquette_step, trotter_step_second_order, Lattice, StepTerms};
    use crate::qalgebra::{FTable, Level};
    use nalgebra::DVector;

    fn meta(k: u32) -> CircuitMetadata {
        CircuitMetadata {
            k,
            g2: 1.0,
            tau: 0.1,
            lattice: "test".into(),
            trotter_order: 0,
            steps: 1,
            representatives: vec![],
        }
    }

    fn random_unitary(d: usize, seed: f64) -> DMatrix<C64> {
        let h = DMatrix::from_fn(d, d, |r, c| ((r * 7 + c * 3) as f64 * seed).sin() + ((c * 7 + r * 3) as f64 * seed).sin());
        crate::linalg::expm_i_sym(0.9, &h)
    }

    #[test]
    fn expansion_has_two_n_plus_one_gates() {
        for n in 0..=4 {
            let mut c = Circuit::new(n + 1, 2, meta(1));
            c.ancillas = 1;
            c.ancilla_dim = n + 1;
            let controls = (0..n).map(|q| (q, 1)).collect();
            c.push(GateKind::FMove, vec![n], controls, random_unitary(2, 0.3), 0, None);
            let g = c.gates[0].clone();
            let out = expand_multicontrolled(&mut c, &g, n + 1).unwrap();
            let expected = if n == 0 { 1 } else { 2 * n + 1 };
            assert_eq!(out.len(), expected);
            assert!(out.iter().all(|g| g.controls.len() <= 1 && g.targets.len() == 1));
        }
    }

    #[test]
    fn small_ancilla_is_rejected() {
        let mut c = Circuit::new(3, 2, meta(1));
        c.ancillas = 1;
        c.ancilla_dim = 2;
        c.push(GateKind::FMove, vec![2], vec![(0, 1), (1, 1)], random_unitary(2, 0.5), 0, None);
        let g = c.gates[0].clone();
        assert_eq!(
            expand_multicontrolled(&mut c, &g, 3),
            Err(CircuitError::AncillaTooSmall { needed: 3, available: 2 })
        );
    }

    #[test]
    fn lowered_gate_matches_direct_and_frees_ancilla() {
        let mut c = Circuit::new(3, 2, meta(1));
        c.push(GateKind::FMove, vec![2], vec![(0, 1), (1, 0)], random_unitary(2, 0.7), 0, None);
        let lowered = lower(&c).unwrap();
        assert_eq!(lowered.ancilla_dim, 3);
        let direct = Simulator::new(&c, &[], 1 << 10).unwrap();
        let sim = Simulator::new(&lowered, &[], 1 << 10).unwrap();
        for input in 0..8 {
            let digits = [input & 1, (input >> 1) & 1, (input >> 2) & 1, 0];
            let a = direct.run(&c, &direct.basis_state(&digits[..3])).unwrap();
            let b = sim.run(&lowered, &sim.basis_state(&digits)).unwrap();
            let stride = 8;
            for i in 0..8 {
                assert!((a[i] - b[i]).norm() < 1e-12);
            }
            let rest: f64 = (stride..b.len()).map(|i| b[i].norm_sqr()).sum();
            assert!(rest < 1e-24);
        }
    }

    #[test]
    fn ancilla_returns_to_zero_after_every_block() {
        let t = FTable::eager(Level::new(1).unwrap());
        let s = g_gate(&t).unwrap();
        let lowered = lower(&trotter_plaquette_step(0.6, &t, &s)).unwrap();
        let ancilla = lowered.qudits;
        let fixed: Vec<(usize, u32)> = [1, 1, 0, 1, 1, 0].iter().enumerate().map(|(i, &v)| (6 + i, v)).collect();
        let sim = Simulator::new(&lowered, &fixed, 1 << 12).unwrap();
        // An equal superposition exercises every control branch.
        let mut psi = DMatrix::zeros(sim.size(), 1);
        let amp = C64::new(1.0 / 8.0, 0.0);
        for i in 0..64 {
            let digits: Vec<u32> = (0..13).map(|q| if q < 6 { (i >> q) as u32 & 1 } else { 0 }).collect();
            psi[(sim.index_of(&digits), 0)] = amp;
        }
        for i in 0..lowered.gates.len() {
            sim.apply_gate(&lowered, i, &mut psi).unwrap();
            let block_end = lowered.gates[i].kind == GateKind::Decrement
                && lowered.gates.get(i + 1).is_none_or(|g| g.kind != GateKind::Decrement);
            if block_end {
                let off: f64 = (0..sim.size()).filter(|&r| sim.digit(r, ancilla) != 0).map(|r| psi[(r, 0)].norm_sqr()).sum();
                assert!(off < 1e-20, "gate {i}: ancilla weight {off}");
            }
        }
        let norm: f64 = DVector::from_column_slice(psi.as_slice()).norm();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn torus_counts_stay_below_bound() {
        for k in 1..=6 {
            let t = FTable::eager(Level::new(k).unwrap());
            let s = g_gate(&t).unwrap();
            let c = trotter_step_second_order(0.1, 1.0, 1, &Lattice::Torus { l: 2 }, &t, &s, StepTerms::default()).unwrap();
            let report = gate_count(&c);
            assert!(report.within_bound, "k={k}: {} > {}", report.per_step, report.bound);
            assert_eq!(report.inventory, LayerInventory { electric: 2, omega: 2, g: 4, f_prime: 4, f: 12 });
            if k <= 2 {
                assert_eq!(gate_count(&lower(&c).unwrap()).per_step, report.per_step);
            }
        }
    }

    #[test]
    fn bound_values() {
        assert_eq!(gate_bound(1), 1956);
        assert_eq!(gate_bound(2), 9508);
    }
}
