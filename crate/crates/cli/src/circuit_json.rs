//! JSON form of a compiled circuit.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use snaq_core::circuit::{Circuit, CircuitMetadata, Gate, GateKind};
use snaq_core::linalg::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Register {
    pub qudits: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ancillas {
    pub count: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    /// `[qudit, twice-spin value]` pairs.
    pub controls: Vec<(usize, u32)>,
    pub payload_ref: usize,
    pub layer: u32,
    #[serde(default)]
    pub plaquette: Option<u32>,
}

/// Row-major `[re, im]` entries.
pub type PayloadRecord = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitRecord {
    pub register: Register,
    pub ancillas: Ancillas,
    pub metadata: CircuitMetadata,
    pub gates: Vec<GateRecord>,
    /// Keyed by payload id.
    pub payloads: BTreeMap<String, PayloadRecord>,
}

impl CircuitRecord {
    pub fn from_circuit(c: &Circuit) -> Self {
        let gates = c
            .gates
            .iter()
            .map(|g| GateRecord {
                kind: g.kind,
                targets: g.targets.clone(),
                controls: g.controls.clone(),
                payload_ref: g.payload,
                layer: g.layer,
                plaquette: g.plaquette,
            })
            .collect();
        let payloads = c
            .payloads
            .iter()
            .enumerate()
            .map(|(id, m)| {
                let rows = (0..m.nrows()).map(|r| (0..m.ncols()).map(|col| [m[(r, col)].re, m[(r, col)].im]).collect());
                (id.to_string(), rows.collect())
            })
            .collect();
        CircuitRecord {
            register: Register { qudits: c.qudits, dim: c.dim },
            ancillas: Ancillas { count: c.ancillas, dim: c.ancilla_dim },
            metadata: c.metadata.clone(),
            gates,
            payloads,
        }
    }

    pub fn into_circuit(self) -> Result<Circuit, String> {
        let n = self.payloads.len();
        let mut payloads = vec![None; n];
        for (key, rows) in self.payloads {
            let id: usize = key.parse().map_err(|_| format!("payload key {key:?} is not an index"))?;
            let slot = payloads.get_mut(id).ok_or_else(|| format!("payload id {id} out of range"))?;
            let nrows = rows.len();
            if rows.iter().any(|r| r.len() != nrows) {
                return Err(format!("payload {id} is not square"));
            }
            *slot = Some(DMatrix::from_fn(nrows, nrows, |r, c| C64::new(rows[r][c][0], rows[r][c][1])));
        }
        let payloads: Vec<DMatrix<C64>> =
            payloads.into_iter().enumerate().map(|(i, p)| p.ok_or(format!("payload {i} missing"))).collect::<Result<_, _>>()?;
        let gates = self
            .gates
            .into_iter()
            .map(|g| Gate {
                kind: g.kind,
                targets: g.targets,
                controls: g.controls,
                payload: g.payload_ref,
                layer: g.layer,
                plaquette: g.plaquette,
            })
            .collect();
        let c = Circuit::from_parts(
            self.register.qudits,
            self.register.dim,
            self.ancillas.count,
            self.ancillas.dim,
            gates,
            payloads,
            self.metadata,
        );
        c.validate()?;
        Ok(c)
    }
}
