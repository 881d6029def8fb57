//! Dense state-vector simulation.

use nalgebra::{DMatrix, DVector};

use super::ir::Circuit;
use super::{CircuitError, Result};
use crate::linalg::C64;

/// Default cap on the number of simulated amplitudes.
pub const DEFAULT_SIM_CAP: usize = 1 << 20;

/// Simulates a circuit on the qudits not pinned to a classical value.
///
/// Controls on pinned qudits are evaluated once; gates that target only
/// pinned qudits must be diagonal there and contribute a phase.
#[derive(Clone, Debug)]
pub struct Simulator {
    dims: Vec<usize>,
    fixed: Vec<Option<u32>>,
    /// Stride of each free qudit in the state index; 0 for pinned qudits.
    strides: Vec<usize>,
    size: usize,
}

impl Simulator {
    pub fn new(circuit: &Circuit, fixed: &[(usize, u32)], cap: usize) -> Result<Self> {
        let dims = circuit.dims();
        let mut pinned = vec![None; dims.len()];
        for &(q, v) in fixed {
            if q >= dims.len() || v as usize >= dims[q] {
                return Err(CircuitError::QuditOutOfRange(q));
            }
            pinned[q] = Some(v);
        }
        let mut strides = vec![0; dims.len()];
        let mut size = 1usize;
        for q in 0..dims.len() {
            if pinned[q].is_none() {
                strides[q] = size;
                size = size
                    .checked_mul(dims[q])
                    .filter(|&s| s <= cap)
                    .ok_or(CircuitError::DimensionOverCap { cap })?;
            }
        }
        Ok(Simulator { dims, fixed: pinned, strides, size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// State index of a full assignment; pinned entries are ignored.
    pub fn index_of(&self, digits: &[u32]) -> usize {
        digits.iter().zip(&self.strides).map(|(&d, &s)| d as usize * s).sum()
    }

    pub fn digit(&self, index: usize, q: usize) -> u32 {
        match self.fixed[q] {
            Some(v) => v,
            None => ((index / self.strides[q]) % self.dims[q]) as u32,
        }
    }

    pub fn basis_state(&self, digits: &[u32]) -> DVector<C64> {
        let mut v = DVector::zeros(self.size);
        v[self.index_of(digits)] = C64::new(1.0, 0.0);
        v
    }

    pub fn run(&self, circuit: &Circuit, state: &DVector<C64>) -> Result<DVector<C64>> {
        let block = DMatrix::from_column_slice(state.len(), 1, state.as_slice());
        Ok(self.run_block(circuit, &block)?.column(0).into_owned())
    }

    /// Runs every column of `states` through the circuit.
    pub fn run_block(&self, circuit: &Circuit, states: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        if states.nrows() != self.size {
            return Err(CircuitError::DimensionOverCap { cap: self.size });
        }
        let mut psi = states.clone();
        for i in 0..circuit.gates.len() {
            self.apply_gate(circuit, i, &mut psi)?;
        }
        Ok(psi)
    }

    /// Applies gate `index` of `circuit` to every column of `psi`.
    pub fn apply_gate(&self, circuit: &Circuit, index: usize, psi: &mut DMatrix<C64>) -> Result<()> {
        let gate = &circuit.gates[index];
        let mut free_controls = Vec::with_capacity(gate.controls.len());
        for &(q, v) in &gate.controls {
            match self.fixed[q] {
                Some(f) if f != v => return Ok(()),
                Some(_) => {}
                None => free_controls.push((q, v)),
            }
        }
        let payload = circuit.payload(gate);
        let pinned = gate.targets.iter().filter(|&&q| self.fixed[q].is_some()).count();
        if pinned == gate.targets.len() {
            // Pure phase on the pinned digits.
            let mut idx = 0;
            let mut stride = 1;
            for &q in &gate.targets {
                idx += self.fixed[q].unwrap() as usize * stride;
                stride *= self.dims[q];
            }
            let phase = payload[(idx, idx)];
            let leak: f64 = (0..payload.nrows()).filter(|&r| r != idx).map(|r| payload[(r, idx)].norm()).sum();
            if leak > 1e-12 {
                return Err(CircuitError::NotRestrictable(index));
            }
            for i in 0..self.size {
                if self.controls_hold(i, &free_controls) {
                    psi.row_mut(i).iter_mut().for_each(|z| *z *= phase);
                }
            }
            return Ok(());
        }
        if pinned > 0 {
            return Err(CircuitError::NotRestrictable(index));
        }

        let tdims: Vec<usize> = gate.targets.iter().map(|&q| self.dims[q]).collect();
        let m: usize = tdims.iter().product();
        let offsets: Vec<usize> = (0..m)
            .map(|mut t| {
                let mut off = 0;
                for (&q, &d) in gate.targets.iter().zip(&tdims) {
                    off += (t % d) * self.strides[q];
                    t /= d;
                }
                off
            })
            .collect();
        let entries: Vec<(usize, usize, C64)> = (0..m)
            .flat_map(|r| (0..m).map(move |c| (r, c)))
            .map(|(r, c)| (r, c, payload[(r, c)]))
            .filter(|(_, _, p)| p.re != 0.0 || p.im != 0.0)
            .collect();
        let mut buf = vec![C64::new(0.0, 0.0); m];
        for base in 0..self.size {
            if gate.targets.iter().any(|&q| self.digit(base, q) != 0) || !self.controls_hold(base, &free_controls) {
                continue;
            }
            for col in 0..psi.ncols() {
                for (b, &off) in buf.iter_mut().zip(&offsets) {
                    *b = psi[(base + off, col)];
                }
                for &off in &offsets {
                    psi[(base + off, col)] = C64::new(0.0, 0.0);
                }
                for &(r, c, p) in &entries {
                    psi[(base + offsets[r], col)] += p * buf[c];
                }
            }
        }
        Ok(())
    }

    fn controls_hold(&self, index: usize, controls: &[(usize, u32)]) -> bool {
        controls.iter().all(|&(q, v)| self.digit(index, q) == v)
    }
}

/// Runs `circuit` on `state` with every qudit free.
pub fn dense_simulate(circuit: &Circuit, state: &DVector<C64>, cap: usize) -> Result<DVector<C64>> {
    Simulator::new(circuit, &[], cap)?.run(circuit, state)
}
