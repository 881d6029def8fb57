//! Spin-network Hilbert spaces on point-split lattices and the qKS
//! Hamiltonian.
//!
//! Every four-vertex of the square lattice is split the same way: vertex
//! `(x, y)` becomes `A(x, y)` (west and north links) and `B(x, y)` (east and
//! south links) joined by an auxiliary link. Each square plaquette then
//! becomes a hexagon with four physical and two auxiliary inner links.
//!
//! A plaquette stores its inner links counter-clockwise as `inner[0..6]` and
//! the outer link at the corner between `inner[i]` and `inner[i+1]` as
//! `outer[i]`. Going around a hexagon of the torus, starting at the bottom
//! edge, the inner links are
//! `[h(x,y), v(x+1,y), a(x+1,y+1), h(x,y+1), v(x,y), a(x,y)]`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::sym_eigen;
use crate::qalgebra::{is_admissible, FTable, Level, SpinLabel};
use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinNetError {
    #[error("malformed network: {0}")]
    Malformed(String),
    #[error("boundary labels admit no spin-network state")]
    EmptyBasis,
    #[error("coupling g^2 must be positive, got {0}")]
    NonPositiveCoupling(f64),
    #[error("dimension {dim} exceeds cap {cap}")]
    DimensionOverCap { dim: usize, cap: usize },
    #[error("cutoff too small: tail probability {tail:e} exceeds {threshold:e}")]
    InsufficientCutoff { tail: f64, threshold: f64 },
    #[error("requested {requested} states from a {dim}-dimensional space")]
    TooManyStates { requested: usize, dim: usize },
    #[error(transparent)]
    Algebra(#[from] crate::Error),
}

pub type Result<T> = std::result::Result<T, SpinNetError>;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkKind {
    /// A link of the original square lattice; carries electric energy.
    Physical,
    /// A link created by point-splitting.
    Auxiliary,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub kind: LinkKind,
    /// Fixed label for boundary links.
    pub boundary: Option<SpinLabel>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plaquette {
    pub inner: [usize; 6],
    pub outer: [usize; 6],
}

/// Register layout of an isolated hexagon: inner links `0..6`, outer links
/// `6..12`, the kinds following the torus hexagon.
pub const HEXAGON_INNER_KINDS: [LinkKind; 6] = [
    LinkKind::Physical,
    LinkKind::Physical,
    LinkKind::Auxiliary,
    LinkKind::Physical,
    LinkKind::Physical,
    LinkKind::Auxiliary,
];
pub const HEXAGON_OUTER_KINDS: [LinkKind; 6] = [
    LinkKind::Auxiliary,
    LinkKind::Physical,
    LinkKind::Physical,
    LinkKind::Auxiliary,
    LinkKind::Physical,
    LinkKind::Physical,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Topology {
    /// One plaquette with zero flux on every boundary link.
    SinglePlaquette,
    /// One hexagon with the six outer links fixed.
    Hexagon { outer: [SpinLabel; 6] },
    /// `L x L` periodic square lattice, point-split.
    Torus { l: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinNetwork {
    pub topology: Topology,
    pub links: Vec<Link>,
    pub vertices: Vec<[usize; 3]>,
    pub plaquettes: Vec<Plaquette>,
}

impl SpinNetwork {
    pub fn single_plaquette() -> Self {
        let mut net = Self::hexagon([SpinLabel::ZERO; 6]);
        net.topology = Topology::SinglePlaquette;
        net
    }

    pub fn hexagon(outer: [SpinLabel; 6]) -> Self {
        let mut links = Vec::with_capacity(12);
        for kind in HEXAGON_INNER_KINDS {
            links.push(Link { kind, boundary: None });
        }
        for (kind, label) in HEXAGON_OUTER_KINDS.into_iter().zip(outer) {
            links.push(Link { kind, boundary: Some(label) });
        }
        let vertices = (0..6).map(|i| [i, (i + 1) % 6, 6 + i]).collect();
        let plaquettes = vec![Plaquette {
            inner: [0, 1, 2, 3, 4, 5],
            outer: [6, 7, 8, 9, 10, 11],
        }];
        SpinNetwork { topology: Topology::Hexagon { outer }, links, vertices, plaquettes }
    }

    pub fn torus(l: usize) -> Result<Self> {
        if l < 2 {
            return Err(SpinNetError::Malformed(format!("torus side must be at least 2, got {l}")));
        }
        let wrap = |x: isize| x.rem_euclid(l as isize) as usize;
        let site = |x: isize, y: isize| wrap(y) * l + wrap(x);
        let h = |x: isize, y: isize| 3 * site(x, y);
        let v = |x: isize, y: isize| 3 * site(x, y) + 1;
        let a = |x: isize, y: isize| 3 * site(x, y) + 2;

        let mut links = Vec::with_capacity(3 * l * l);
        for _ in 0..l * l {
            links.push(Link { kind: LinkKind::Physical, boundary: None });
            links.push(Link { kind: LinkKind::Physical, boundary: None });
            links.push(Link { kind: LinkKind::Auxiliary, boundary: None });
        }
        let mut vertices = Vec::with_capacity(2 * l * l);
        let mut plaquettes = Vec::with_capacity(l * l);
        for y in 0..l as isize {
            for x in 0..l as isize {
                vertices.push([h(x - 1, y), v(x, y), a(x, y)]);
                vertices.push([h(x, y), v(x, y - 1), a(x, y)]);
                plaquettes.push(Plaquette {
                    inner: [h(x, y), v(x + 1, y), a(x + 1, y + 1), h(x, y + 1), v(x, y), a(x, y)],
                    outer: [a(x + 1, y), h(x + 1, y + 1), v(x + 1, y + 1), a(x, y + 1), h(x - 1, y), v(x, y - 1)],
                });
            }
        }
        let net = SpinNetwork { topology: Topology::Torus { l }, links, vertices, plaquettes };
        net.validate()?;
        Ok(net)
    }

    pub fn num_physical(&self) -> usize {
        self.links.iter().filter(|l| l.kind == LinkKind::Physical).count()
    }

    /// Checks link incidence: boundary links meet one vertex, interior links two.
    pub fn validate(&self) -> Result<()> {
        let mut count = vec![0usize; self.links.len()];
        for vtx in &self.vertices {
            for &l in vtx {
                if l >= self.links.len() {
                    return Err(SpinNetError::Malformed(format!("vertex references link {l}")));
                }
                count[l] += 1;
            }
        }
        for (i, (link, &c)) in self.links.iter().zip(&count).enumerate() {
            let want = if link.boundary.is_some() { 1 } else { 2 };
            if c != want {
                return Err(SpinNetError::Malformed(format!("link {i} meets {c} vertices, expected {want}")));
            }
        }
        for p in &self.plaquettes {
            for i in 0..6 {
                let corner = [p.inner[i], p.inner[(i + 1) % 6], p.outer[i]];
                let found = self.vertices.iter().any(|v| {
                    let mut a = *v;
                    let mut b = corner;
                    a.sort_unstable();
                    b.sort_unstable();
                    a == b
                });
                if !found {
                    return Err(SpinNetError::Malformed(format!("plaquette corner {corner:?} is not a vertex")));
                }
            }
        }
        Ok(())
    }
}

/// Enumerated fusion-constrained basis of a spin network.
#[derive(Clone, Debug)]
pub struct SnBasis {
    network: SpinNetwork,
    level: Level,
    /// Full label assignment (twice-spin, one per link) for each state.
    states: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

impl SnBasis {
    /// Lexicographic (twice-spin, link order) enumeration of all admissible
    /// labelings consistent with the boundary.
    pub fn enumerate(network: &SpinNetwork, level: Level) -> Result<Self> {
        network.validate()?;
        for link in &network.links {
            if let Some(b) = link.boundary {
                level.check(b)?;
            }
        }
        let nlinks = network.links.len();
        // Vertices become checkable once their highest-index free link is set.
        let mut checks_at: Vec<Vec<usize>> = vec![Vec::new(); nlinks];
        let mut fixed_checks = Vec::new();
        for (vi, vtx) in network.vertices.iter().enumerate() {
            let last_free = vtx.iter().copied().filter(|&l| network.links[l].boundary.is_none()).max();
            match last_free {
                Some(l) => checks_at[l].push(vi),
                None => fixed_checks.push(vi),
            }
        }
        let mut assignment: Vec<u32> = network.links.iter().map(|l| l.boundary.map_or(0, |b| b.twice())).collect();
        let ok = |asg: &[u32], vi: usize| {
            let [a, b, c] = network.vertices[vi];
            is_admissible(
                SpinLabel::from_twice(asg[a]),
                SpinLabel::from_twice(asg[b]),
                SpinLabel::from_twice(asg[c]),
                level,
            )
        };
        let mut states = Vec::new();
        if fixed_checks.iter().all(|&vi| ok(&assignment, vi)) {
            Self::recurse(network, level, 0, &mut assignment, &checks_at, &ok, &mut states);
        }
        if states.is_empty() {
            return Err(SpinNetError::EmptyBasis);
        }
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(SnBasis { network: network.clone(), level, states, index })
    }

    fn recurse(
        network: &SpinNetwork,
        level: Level,
        pos: usize,
        asg: &mut Vec<u32>,
        checks_at: &[Vec<usize>],
        ok: &impl Fn(&[u32], usize) -> bool,
        out: &mut Vec<Vec<u32>>,
    ) {
        if pos == asg.len() {
            out.push(asg.clone());
            return;
        }
        if network.links[pos].boundary.is_some() {
            if checks_at[pos].iter().all(|&vi| ok(asg, vi)) {
                Self::recurse(network, level, pos + 1, asg, checks_at, ok, out);
            }
            return;
        }
        for t in 0..=level.k() {
            asg[pos] = t;
            if checks_at[pos].iter().all(|&vi| ok(asg, vi)) {
                Self::recurse(network, level, pos + 1, asg, checks_at, ok, out);
            }
        }
        asg[pos] = 0;
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn network(&self) -> &SpinNetwork {
        &self.network
    }

    pub fn state(&self, i: usize) -> &[u32] {
        &self.states[i]
    }

    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }

    pub fn index_of(&self, labels: &[u32]) -> Option<usize> {
        self.index.get(labels).copied()
    }

    /// Index of the state with every free link at zero, if admissible.
    pub fn vacuum(&self) -> Option<usize> {
        let v: Vec<u32> = self.network.links.iter().map(|l| l.boundary.map_or(0, |b| b.twice())).collect();
        self.index_of(&v)
    }

    /// Re-checks every vertex constraint on every state.
    pub fn all_states_admissible(&self) -> bool {
        self.states.iter().all(|s| {
            self.network.vertices.iter().all(|&[a, b, c]| {
                is_admissible(
                    SpinLabel::from_twice(s[a]),
                    SpinLabel::from_twice(s[b]),
                    SpinLabel::from_twice(s[c]),
                    self.level,
                )
            })
        })
    }
}

/// `E(j) = j(j+1)`.
pub fn electric_energy(j: SpinLabel) -> f64 {
    let x = j.spin();
    x * (x + 1.0)
}

/// Matrix element `<inner'| U^(J) |inner>` of a plaquette operator:
/// `prod_i F^{outer_i inner_i inner_{i+1}}_{J inner'_{i+1} inner'_i}`.
pub fn plaquette_element(outer: [u32; 6], inner: [u32; 6], inner_new: [u32; 6], flux: u32, table: &FTable) -> f64 {
    let mut prod = 1.0;
    for i in 0..6 {
        let n = (i + 1) % 6;
        let f = table.get_twice([outer[i], inner[i], inner[n], flux, inner_new[n], inner_new[i]]);
        if f == 0.0 {
            return 0.0;
        }
        prod *= f;
    }
    prod
}

/// Sparse matrix of `U^(J)_p` on the basis (rows: output states).
pub fn plaquette_operator(basis: &SnBasis, table: &FTable, plaquette: usize, flux: SpinLabel) -> CsrMatrix {
    let p = basis.network.plaquettes[plaquette];
    let k = basis.level.k();
    let flux = flux.twice();
    let mut triplets = Vec::new();
    for (col, state) in basis.states.iter().enumerate() {
        let inner: [u32; 6] = p.inner.map(|l| state[l]);
        let outer: [u32; 6] = p.outer.map(|l| state[l]);
        let options: Vec<Vec<u32>> = inner
            .iter()
            .map(|&j| (0..=k).filter(|&jn| table.is_admissible(flux, j, jn)).collect())
            .collect();
        let mut choice = [0usize; 6];
        'outer: loop {
            let inner_new: [u32; 6] = std::array::from_fn(|i| options[i][choice[i]]);
            let val = plaquette_element(outer, inner, inner_new, flux, table);
            if val != 0.0 {
                let mut target = state.clone();
                for i in 0..6 {
                    target[p.inner[i]] = inner_new[i];
                }
                let row = basis
                    .index_of(&target)
                    .expect("nonzero plaquette element leads outside the spin-network basis");
                triplets.push((row, col, val));
            }
            for i in 0..6 {
                choice[i] += 1;
                if choice[i] < options[i].len() {
                    continue 'outer;
                }
                choice[i] = 0;
            }
            break;
        }
    }
    CsrMatrix::from_triplets(basis.dim(), basis.dim(), triplets)
}

/// Sum of `E(j_l)` over physical links for each basis state.
pub fn electric_diagonal(basis: &SnBasis) -> Vec<f64> {
    basis
        .states
        .iter()
        .map(|s| {
            basis
                .network
                .links
                .iter()
                .zip(s)
                .filter(|(l, _)| l.kind == LinkKind::Physical)
                .map(|(_, &t)| electric_energy(SpinLabel::from_twice(t)))
                .sum()
        })
        .collect()
}

/// Overall normalization of the Hamiltonian.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convention {
    /// `H = g^2/2 sum E^2 - 1/(2 g^2) sum (U + U^†)` with `a = 1`.
    Raw,
    /// `H' = (2/g^2) H = sum E^2 - 1/g^4 sum (U + U^†)`.
    Rescaled,
}

impl Convention {
    /// (electric, magnetic) prefactors multiplying `sum E^2` and `sum (U + U^†)`.
    pub fn coefficients(self, g2: f64) -> (f64, f64) {
        match self {
            Convention::Raw => (g2 / 2.0, -1.0 / (2.0 * g2)),
            Convention::Rescaled => (1.0, -1.0 / (g2 * g2)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct HamiltonianMatrix {
    pub matrix: CsrMatrix,
    pub g2: f64,
    pub k: u32,
    pub convention: Convention,
}

impl HamiltonianMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.to_dense()
    }
}

/// Tolerance on `||H - H^T||_max` enforced at build time.
pub const HERMITICITY_TOL: f64 = 1e-12;

fn check_g2(g2: f64) -> Result<()> {
    if g2 > 0.0 && g2.is_finite() {
        Ok(())
    } else {
        Err(SpinNetError::NonPositiveCoupling(g2))
    }
}

/// Generic assembly: electric diagonal on physical links plus `U + U^†` for
/// every plaquette, with `U` from [`plaquette_element`].
pub fn build_hamiltonian(basis: &SnBasis, table: &FTable, g2: f64, convention: Convention) -> Result<HamiltonianMatrix> {
    check_g2(g2)?;
    let (ce, cb) = convention.coefficients(g2);
    let n = basis.dim();
    let mut h = CsrMatrix::diagonal(n, electric_diagonal(basis).into_iter().map(|e| ce * e));
    for p in 0..basis.network.plaquettes.len() {
        let u = plaquette_operator(basis, table, p, SpinLabel::HALF);
        h = h.add(&u.add(&u.transpose()).scaled(cb));
    }
    let residual = h.symmetry_residual();
    assert!(residual < HERMITICITY_TOL, "Hamiltonian asymmetric: {residual:e}");
    Ok(HamiltonianMatrix { matrix: h, g2, k: basis.level.k(), convention })
}

/// Direct tridiagonal single-plaquette Hamiltonian:
/// diagonal `4 E(j)`, off-diagonal `-2/g^4` (rescaled convention).
pub fn single_plaquette_tridiagonal(level: Level, g2: f64, convention: Convention) -> Result<HamiltonianMatrix> {
    check_g2(g2)?;
    let n = level.num_labels();
    let (ce, cb) = convention.coefficients(g2);
    let mut triplets = Vec::with_capacity(3 * n);
    for t in 0..n {
        triplets.push((t, t, ce * 4.0 * electric_energy(SpinLabel::from_twice(t as u32))));
        if t + 1 < n {
            triplets.push((t, t + 1, 2.0 * cb));
            triplets.push((t + 1, t, 2.0 * cb));
        }
    }
    Ok(HamiltonianMatrix {
        matrix: CsrMatrix::from_triplets(n, n, triplets),
        g2,
        k: level.k(),
        convention,
    })
}

/// Default dimension cap for dense diagonalization.
pub const DEFAULT_DENSE_CAP: usize = 4096;

#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<DVector<f64>>,
}

/// Lowest `n_states` eigenpairs by dense symmetric solve.
pub fn diagonalize(h: &HamiltonianMatrix, n_states: usize, cap: usize) -> Result<Spectrum> {
    let dim = h.dim();
    if dim > cap {
        return Err(SpinNetError::DimensionOverCap { dim, cap });
    }
    if n_states > dim {
        return Err(SpinNetError::TooManyStates { requested: n_states, dim });
    }
    let (values, vectors) = sym_eigen(h.to_dense());
    Ok(Spectrum {
        eigenvalues: values[..n_states].to_vec(),
        eigenvectors: (0..n_states).map(|i| vectors.column(i).into_owned()).collect(),
    })
}

/// Fraction of labels treated as the tail by [`mathieu_oracle`].
const TAIL_FRACTION: f64 = 0.1;
/// Maximum tolerated probability in the tail.
pub const TAIL_THRESHOLD: f64 = 1e-12;

/// Eigenvector `n` of the `k -> infinity` single-plaquette Hamiltonian,
/// truncated at spin `j_cut` (so `k = 2 j_cut`). Stands in for the Mathieu
/// coefficients `B_{4j+2}^{(2n+2)}`.
pub fn mathieu_oracle(g2: f64, n: usize, j_cut: u32) -> Result<DVector<f64>> {
    let level = Level::new(2 * j_cut)?;
    let h = single_plaquette_tridiagonal(level, g2, Convention::Rescaled)?;
    let spec = diagonalize(&h, n + 1, usize::MAX)?;
    let v = spec.eigenvectors[n].clone();
    let len = v.len();
    let tail_len = ((len as f64 * TAIL_FRACTION).ceil() as usize).max(1);
    let tail: f64 = v.iter().skip(len - tail_len).map(|x| x * x).sum();
    if tail > TAIL_THRESHOLD {
        return Err(SpinNetError::InsufficientCutoff { tail, threshold: TAIL_THRESHOLD });
    }
    Ok(v)
}

/// `|<psi|j>|^2` for each component.
pub fn distribution(v: &DVector<f64>) -> Vec<f64> {
    v.iter().map(|x| x * x).collect()
}

/// `max_j |p_j - q_j|`, comparing over the common prefix and treating missing
/// entries as zero.
pub fn distribution_distance(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    (0..n)
        .map(|i| (p.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

/// `|<psi_n|j>|^2` for the single plaquette at `level` (rescaled
/// Hamiltonian).
pub fn single_plaquette_distribution(level: Level, g2: f64, n: usize) -> Result<Vec<f64>> {
    let h = single_plaquette_tridiagonal(level, g2, Convention::Rescaled)?;
    let spec = diagonalize(&h, n + 1, usize::MAX)?;
    Ok(distribution(&spec.eigenvectors[n]))
}

/// Smallest `k <= k_max` whose state-`n` distribution is within `tol` (L-inf)
/// of `reference`, or `None`.
pub fn convergence_level(g2: f64, n: usize, reference: &[f64], tol: f64, k_max: u32) -> Result<Option<u32>> {
    for k in 1..=k_max {
        let level = Level::new(k)?;
        if level.num_labels() <= n {
            continue;
        }
        let p = single_plaquette_distribution(level, g2, n)?;
        if distribution_distance(&p, reference) < tol {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(k: u32) -> Level {
        Level::new(k).unwrap()
    }

    #[test]
    fn single_plaquette_dimension() {
        for k in 1..=12 {
            let b = SnBasis::enumerate(&SpinNetwork::single_plaquette(), lv(k)).unwrap();
            assert_eq!(b.dim(), k as usize + 1);
        }
    }

    #[test]
    fn hexagon_zero_outer_k1() {
        let b = SnBasis::enumerate(&SpinNetwork::hexagon([SpinLabel::ZERO; 6]), lv(1)).unwrap();
        assert_eq!(b.dim(), 2);
        assert_eq!(&b.state(0)[..6], &[0; 6]);
        assert_eq!(&b.state(1)[..6], &[1; 6]);
    }

    #[test]
    fn inconsistent_boundary_is_empty_basis() {
        let mut outer = [SpinLabel::ZERO; 6];
        outer[0] = SpinLabel::HALF;
        assert_eq!(
            SnBasis::enumerate(&SpinNetwork::hexagon(outer), lv(2)).unwrap_err(),
            SpinNetError::EmptyBasis
        );
    }

    #[test]
    fn malformed_network_is_distinct_error() {
        let mut net = SpinNetwork::hexagon([SpinLabel::ZERO; 6]);
        net.vertices.pop();
        assert!(matches!(SnBasis::enumerate(&net, lv(1)), Err(SpinNetError::Malformed(_))));
        assert!(matches!(SpinNetwork::torus(1), Err(SpinNetError::Malformed(_))));
    }

    #[test]
    fn torus_link_counts() {
        for l in 2..5 {
            let t = SpinNetwork::torus(l).unwrap();
            assert_eq!(t.links.len(), 3 * l * l);
            assert_eq!(t.num_physical(), 2 * l * l);
            assert_eq!(t.plaquettes.len(), l * l);
        }
    }

    #[test]
    fn torus_k1_is_closed_string_nets() {
        // Brute-force filter over all 2^12 labelings of the 2x2 torus.
        let net = SpinNetwork::torus(2).unwrap();
        let nl = net.links.len();
        let mut count = 0;
        for mask in 0u32..(1 << nl) {
            let lab = |l: usize| (mask >> l) & 1;
            if net.vertices.iter().all(|&[a, b, c]| {
                let s = lab(a) + lab(b) + lab(c);
                s % 2 == 0 && s <= 2
            }) {
                count += 1;
            }
        }
        let basis = SnBasis::enumerate(&net, lv(1)).unwrap();
        assert_eq!(basis.dim(), count);
        // Closed Z2 string nets: 2^(E - V + 1).
        assert_eq!(count, 1 << (12 - 8 + 1));
        assert!(basis.all_states_admissible());
    }

    #[test]
    fn electric_energies() {
        assert_eq!(electric_energy(SpinLabel::from_twice(0)), 0.0);
        assert_eq!(electric_energy(SpinLabel::from_twice(1)), 0.75);
        assert_eq!(electric_energy(SpinLabel::from_twice(2)), 2.0);
    }

    #[test]
    fn single_plaquette_matrices() {
        let g2 = 0.7;
        let h1 = single_plaquette_tridiagonal(lv(1), g2, Convention::Rescaled).unwrap().to_dense();
        let off = -2.0 / (g2 * g2);
        assert_eq!(h1, DMatrix::from_row_slice(2, 2, &[0.0, off, off, 3.0]));
        let h2 = single_plaquette_tridiagonal(lv(2), g2, Convention::Rescaled).unwrap().to_dense();
        assert_eq!(h2[(0, 0)], 0.0);
        assert_eq!(h2[(1, 1)], 3.0);
        assert_eq!(h2[(2, 2)], 8.0);
        assert_eq!(h2[(1, 2)], off);
        assert_eq!(h2[(0, 2)], 0.0);
        assert!(single_plaquette_tridiagonal(lv(2), 0.0, Convention::Raw).is_err());
    }

    #[test]
    fn generic_path_matches_tridiagonal() {
        for k in 1..=6 {
            let level = lv(k);
            let table = FTable::eager(level);
            let basis = SnBasis::enumerate(&SpinNetwork::single_plaquette(), level).unwrap();
            for conv in [Convention::Raw, Convention::Rescaled] {
                let generic = build_hamiltonian(&basis, &table, 0.37, conv).unwrap().to_dense();
                let direct = single_plaquette_tridiagonal(level, 0.37, conv).unwrap().to_dense();
                assert!((generic - direct).amax() < 1e-12, "k={k}");
            }
        }
    }

    #[test]
    fn two_by_two_ground_state() {
        let h = single_plaquette_tridiagonal(lv(1), 1.0, Convention::Rescaled).unwrap();
        let spec = diagonalize(&h, 2, DEFAULT_DENSE_CAP).unwrap();
        assert!((spec.eigenvalues[0] + 1.0).abs() < 1e-12);
        assert!((spec.eigenvalues[1] - 4.0).abs() < 1e-12);
        assert!(spec.eigenvectors[0][0] > 0.0);
        assert!(matches!(diagonalize(&h, 3, 10), Err(SpinNetError::TooManyStates { .. })));
        assert!(matches!(diagonalize(&h, 1, 1), Err(SpinNetError::DimensionOverCap { .. })));
    }

    #[test]
    fn strong_coupling_ground_state_is_vacuum() {
        let h = single_plaquette_tridiagonal(lv(4), 1e6, Convention::Rescaled).unwrap();
        let spec = diagonalize(&h, 1, DEFAULT_DENSE_CAP).unwrap();
        assert!(spec.eigenvalues[0].abs() < 1e-9);
        assert!((spec.eigenvectors[0][0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn excited_states_need_larger_levels() {
        let mut last = 0;
        for n in 0..4 {
            let oracle = distribution(&mathieu_oracle(0.1, n, 50).unwrap());
            let k = convergence_level(0.1, n, &oracle, 1e-6, 100).unwrap().unwrap();
            if n == 0 {
                assert!(k <= 30);
            }
            assert!(k > last, "n={n}: k={k} after {last}");
            last = k;
        }
    }

    #[test]
    fn mathieu_tail_check() {
        let v = mathieu_oracle(0.1, 0, 100).unwrap();
        assert_eq!(v.len(), 201);
        assert!(matches!(mathieu_oracle(0.1, 0, 3), Err(SpinNetError::InsufficientCutoff { .. })));
        let h = single_plaquette_tridiagonal(lv(200), 0.1, Convention::Rescaled).unwrap();
        let direct = diagonalize(&h, 1, usize::MAX).unwrap();
        assert!((&direct.eigenvectors[0] - &v).amax() < 1e-12);
    }

    fn torus_ops(k: u32) -> (SnBasis, Vec<CsrMatrix>, FTable) {
        let level = lv(k);
        let table = FTable::eager(level);
        let basis = SnBasis::enumerate(&SpinNetwork::torus(2).unwrap(), level).unwrap();
        let ops = (0..4).map(|p| plaquette_operator(&basis, &table, p, SpinLabel::HALF)).collect();
        (basis, ops, table)
    }

    #[test]
    fn torus_plaquettes_hermitian_and_commuting() {
        for k in 1..=3 {
            let (basis, ops, table) = torus_ops(k);
            let h = build_hamiltonian(&basis, &table, 0.8, Convention::Rescaled).unwrap();
            assert!(h.matrix.symmetry_residual() < 1e-12);
            for a in &ops {
                assert!(a.max_abs_diff(&a.transpose()) < 1e-12, "k={k}");
                for b in &ops {
                    assert!(a.matmul(b).max_abs_diff(&b.matmul(a)) < 1e-12, "k={k}");
                }
            }
        }
    }

    #[test]
    fn torus_fusion_algebra() {
        let k = 3;
        let (basis, _, table) = torus_ops(k);
        let level = lv(k);
        let vac = basis.vacuum().unwrap();
        for p in 0..4 {
            let ops: Vec<CsrMatrix> =
                level.labels().map(|j| plaquette_operator(&basis, &table, p, j)).collect();
            assert!(ops[0].max_abs_diff(&CsrMatrix::diagonal(basis.dim(), vec![1.0; basis.dim()])) < 1e-12);
            for (j, op) in ops.iter().enumerate() {
                assert_eq!(op.get(vac, vac), if j == 0 { 1.0 } else { 0.0 });
            }
            for a in 0..=k {
                for b in 0..=k {
                    let lhs = ops[a as usize].matmul(&ops[b as usize]);
                    let mut rhs = CsrMatrix::from_triplets(basis.dim(), basis.dim(), Vec::new());
                    for c in 0..=k {
                        if table.is_admissible(a, b, c) {
                            rhs = rhs.add(&ops[c as usize]);
                        }
                    }
                    assert!(lhs.max_abs_diff(&rhs) < 1e-10, "p={p} a={a} b={b}");
                }
            }
        }
    }
}
