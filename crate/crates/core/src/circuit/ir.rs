use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::C64;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    /// Diagonal single-qudit phase `exp(-i c E(j))`.
    Electric,
    /// Diagonal two-qudit phase in the rotated plaquette basis.
    Omega,
    /// One control-value branch of a full F-move.
    FMove,
    /// One control-value branch of the two-link F-move closing the plaquette.
    FPrime,
    /// Two-qudit rotation into the eigenbasis of the reduced plaquette matrix.
    G,
    /// Ancilla `+1 mod d`, written by the multi-control lowering.
    Increment,
    /// Ancilla `-1 mod d`.
    Decrement,
}

impl GateKind {
    pub const ALL: [GateKind; 7] = [
        GateKind::Electric,
        GateKind::Omega,
        GateKind::FMove,
        GateKind::FPrime,
        GateKind::G,
        GateKind::Increment,
        GateKind::Decrement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Electric => "electric",
            GateKind::Omega => "omega",
            GateKind::FMove => "f_move",
            GateKind::FPrime => "f_prime",
            GateKind::G => "g",
            GateKind::Increment => "increment",
            GateKind::Decrement => "decrement",
        }
    }
}

/// A unitary on `targets`, applied only when every control qudit holds its
/// listed value. The payload acts on the target digits with `targets[0]` least
/// significant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    /// `(qudit, twice-spin value)`.
    pub controls: Vec<(usize, u32)>,
    pub payload: usize,
    /// Logical layer id; gates sharing a layer come from one application of a
    /// uniformly controlled operation.
    pub layer: u32,
    /// Plaquette the gate belongs to, if any.
    pub plaquette: Option<u32>,
}

impl Gate {
    /// Number of qudits the gate couples.
    pub fn arity(&self) -> usize {
        self.targets.len() + self.controls.len()
    }

    pub fn is_entangling(&self) -> bool {
        self.arity() >= 2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitMetadata {
    pub k: u32,
    pub g2: f64,
    pub tau: f64,
    pub lattice: String,
    pub trotter_order: u32,
    pub steps: usize,
    /// One plaquette per sublattice; their gates make up the per-step count.
    #[serde(default)]
    pub representatives: Vec<u32>,
}

/// Flat gate list over a register of `(k+1)`-level qudits plus ancillas.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub qudits: usize,
    pub dim: usize,
    pub ancillas: usize,
    pub ancilla_dim: usize,
    pub gates: Vec<Gate>,
    pub payloads: Vec<DMatrix<C64>>,
    pub metadata: CircuitMetadata,
    payload_index: HashMap<Vec<u64>, usize>,
    next_layer: u32,
}

fn payload_key(m: &DMatrix<C64>) -> Vec<u64> {
    let mut key = Vec::with_capacity(2 + 2 * m.len());
    key.push(m.nrows() as u64);
    key.push(m.ncols() as u64);
    for z in m.iter() {
        // Normalize -0.0 so equal payloads share an id.
        key.push((z.re + 0.0).to_bits());
        key.push((z.im + 0.0).to_bits());
    }
    key
}

impl Circuit {
    pub fn new(qudits: usize, dim: usize, metadata: CircuitMetadata) -> Self {
        Circuit {
            qudits,
            dim,
            ancillas: 0,
            ancilla_dim: 0,
            gates: Vec::new(),
            payloads: Vec::new(),
            metadata,
            payload_index: HashMap::new(),
            next_layer: 0,
        }
    }

    pub fn total_qudits(&self) -> usize {
        self.qudits + self.ancillas
    }

    pub fn qudit_dim(&self, q: usize) -> usize {
        if q < self.qudits {
            self.dim
        } else {
            self.ancilla_dim
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        (0..self.total_qudits()).map(|q| self.qudit_dim(q)).collect()
    }

    /// Stores `m` (deduplicated) and returns its id.
    pub fn add_payload(&mut self, m: DMatrix<C64>) -> usize {
        let key = payload_key(&m);
        if let Some(&id) = self.payload_index.get(&key) {
            return id;
        }
        let id = self.payloads.len();
        self.payloads.push(m);
        self.payload_index.insert(key, id);
        id
    }

    /// Starts a new logical layer and returns its id.
    pub fn open_layer(&mut self) -> u32 {
        let l = self.next_layer;
        self.next_layer += 1;
        l
    }

    pub fn push(
        &mut self,
        kind: GateKind,
        targets: Vec<usize>,
        controls: Vec<(usize, u32)>,
        payload: DMatrix<C64>,
        layer: u32,
        plaquette: Option<u32>,
    ) {
        let payload = self.add_payload(payload);
        self.gates.push(Gate { kind, targets, controls, payload, layer, plaquette });
    }

    pub fn payload(&self, gate: &Gate) -> &DMatrix<C64> {
        &self.payloads[gate.payload]
    }

    /// Rebuilds the payload table from gates, used after deserialization.
    pub fn from_parts(
        qudits: usize,
        dim: usize,
        ancillas: usize,
        ancilla_dim: usize,
        gates: Vec<Gate>,
        payloads: Vec<DMatrix<C64>>,
        metadata: CircuitMetadata,
    ) -> Self {
        let payload_index = payloads.iter().enumerate().map(|(i, m)| (payload_key(m), i)).collect();
        let next_layer = gates.iter().map(|g| g.layer + 1).max().unwrap_or(0);
        Circuit { qudits, dim, ancillas, ancilla_dim, gates, payloads, metadata, payload_index, next_layer }
    }

    /// Checks qudit indices, control values and payload shapes.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.total_qudits();
        for (i, g) in self.gates.iter().enumerate() {
            let mut seen = vec![false; n];
            for &q in g.targets.iter().chain(g.controls.iter().map(|(q, _)| q)) {
                if q >= n {
                    return Err(format!("gate {i} touches qudit {q} outside 0..{n}"));
                }
                if seen[q] {
                    return Err(format!("gate {i} uses qudit {q} twice"));
                }
                seen[q] = true;
            }
            for &(q, v) in &g.controls {
                if v as usize >= self.qudit_dim(q) {
                    return Err(format!("gate {i} controls qudit {q} on value {v}"));
                }
            }
            let p = self.payloads.get(g.payload).ok_or_else(|| format!("gate {i} has no payload {}", g.payload))?;
            let want: usize = g.targets.iter().map(|&q| self.qudit_dim(q)).product();
            if p.nrows() != want || p.ncols() != want {
                return Err(format!("gate {i} payload is {}x{}, expected {want}", p.nrows(), p.ncols()));
            }
        }
        Ok(())
    }

    /// `max |P^† P - I|` over all payloads.
    pub fn max_unitarity_defect(&self) -> f64 {
        self.payloads
            .iter()
            .map(|p| {
                let id = DMatrix::<C64>::identity(p.nrows(), p.ncols());
                (p.adjoint() * p - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Appends `other`'s gates, remapping payloads and layers.
    pub fn append(&mut self, other: &Circuit) {
        let offset = self.next_layer;
        for g in &other.gates {
            let payload = self.add_payload(other.payloads[g.payload].clone());
            self.gates.push(Gate { payload, layer: g.layer + offset, ..g.clone() });
        }
        self.next_layer += other.next_layer;
    }
}
