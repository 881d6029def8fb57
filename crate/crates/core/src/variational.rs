//! Product-of-plaquette-loops variational ansatz for the qKS ground state.
//!
//! The ansatz `prod_p [sum_j psi_j U_p^(j)] |0>` has a closed-form energy
//! density in the rescaled convention:
//!
//! `E(psi) = 2 sum_{ab} psi_a^2 psi_b^2 W_ab - (2/g^4) psi^T A psi`
//!
//! with `W_ab = sum_c delta_abc c(c+1) d_c / (d_a d_b)` and `A_ab = delta_{ab 1/2}`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{fix_sign, sym_eigen};
use crate::qalgebra::{quantum_dimension, FTable, Level, SpinLabel};
use crate::sparse::CsrMatrix;
use crate::spinnet::{
    build_hamiltonian, electric_energy, plaquette_operator, Convention, LinkKind, SnBasis, SpinNetError, SpinNetwork,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VariationalError {
    #[error("state is not normalized: sum |psi|^2 = {0}")]
    NotNormalized(f64),
    #[error("state has {got} amplitudes, level {k} needs {}", k + 1)]
    WrongLength { got: usize, k: u32 },
    #[error("coupling g^2 must be positive, got {0}")]
    NonPositiveCoupling(f64),
    #[error("at least one restart is required")]
    NoRestarts,
    #[error("g^2 grid must be non-empty and strictly ascending")]
    UnsortedGrid,
    #[error("fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("singular least-squares system")]
    SingularFit,
    #[error("brute-force oracle supports k <= {max}, got {k}")]
    LevelTooLarge { k: u32, max: u32 },
    #[error(transparent)]
    SpinNet(#[from] SpinNetError),
}

pub type Result<T> = std::result::Result<T, VariationalError>;

pub const NORM_TOL: f64 = 1e-12;

/// Real amplitudes `psi_j`, `j = 0, 1/2, ..., k/2`, on the unit sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    k: u32,
    psi: Vec<f64>,
}

impl VariationalState {
    pub fn new(level: Level, psi: Vec<f64>) -> Result<Self> {
        if psi.len() != level.num_labels() {
            return Err(VariationalError::WrongLength { got: psi.len(), k: level.k() });
        }
        let norm: f64 = psi.iter().map(|x| x * x).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(VariationalError::NotNormalized(norm));
        }
        Ok(VariationalState { k: level.k(), psi })
    }

    /// Rescales `raw` onto the unit sphere.
    pub fn normalized(level: Level, raw: Vec<f64>) -> Result<Self> {
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(VariationalError::NotNormalized(0.0));
        }
        Self::new(level, raw.into_iter().map(|x| x / norm).collect())
    }

    pub fn vacuum(level: Level) -> Self {
        let mut psi = vec![0.0; level.num_labels()];
        psi[0] = 1.0;
        VariationalState { k: level.k(), psi }
    }

    pub fn uniform(level: Level) -> Self {
        let n = level.num_labels();
        VariationalState { k: level.k(), psi: vec![1.0 / (n as f64).sqrt(); n] }
    }

    /// Uniformly random point on the sphere.
    pub fn random(level: Level, rng: &mut impl rand::Rng) -> Self {
        loop {
            let raw: Vec<f64> = (0..level.num_labels()).map(|_| StandardNormal.sample(rng)).collect();
            if let Ok(s) = Self::normalized(level, raw) {
                return s;
            }
        }
    }

    pub fn level(&self) -> Level {
        Level::new(self.k).expect("stored level is valid")
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.psi
    }
}

/// Precomputed coefficient matrices of the closed-form energy at one level.
#[derive(Clone, Debug)]
pub struct EnergyFunctional {
    level: Level,
    electric: DMatrix<f64>,
    adjacency: DMatrix<f64>,
}

impl EnergyFunctional {
    pub fn new(level: Level) -> Self {
        let n = level.num_labels();
        let d: Vec<f64> = level.labels().map(|j| quantum_dimension(j, level).expect("label in range")).collect();
        let adm = |a: usize, b: usize, c: usize| {
            crate::qalgebra::is_admissible(
                SpinLabel::from_twice(a as u32),
                SpinLabel::from_twice(b as u32),
                SpinLabel::from_twice(c as u32),
                level,
            )
        };
        let electric = DMatrix::from_fn(n, n, |a, b| {
            (0..n)
                .filter(|&c| adm(a, b, c))
                .map(|c| electric_energy(SpinLabel::from_twice(c as u32)) * d[c] / (d[a] * d[b]))
                .sum()
        });
        let adjacency = DMatrix::from_fn(n, n, |a, b| if adm(a, b, 1) { 1.0 } else { 0.0 });
        EnergyFunctional { level, electric, adjacency }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    fn squares(psi: &DVector<f64>) -> DVector<f64> {
        psi.map(|x| x * x)
    }

    /// Energy density for an arbitrary (not necessarily normalized) vector.
    pub fn energy(&self, psi: &DVector<f64>, g2: f64) -> f64 {
        let sq = Self::squares(psi);
        2.0 * sq.dot(&(&self.electric * &sq)) - 2.0 / (g2 * g2) * psi.dot(&(&self.adjacency * psi))
    }

    pub fn plaquette(&self, psi: &DVector<f64>) -> f64 {
        psi.dot(&(&self.adjacency * psi))
    }

    /// Ambient gradient of [`Self::energy`].
    pub fn gradient(&self, psi: &DVector<f64>, g2: f64) -> DVector<f64> {
        let sq = Self::squares(psi);
        let w = &self.electric * &sq;
        psi.component_mul(&w) * 8.0 - (&self.adjacency * psi) * (4.0 / (g2 * g2))
    }

    /// Ambient Hessian of [`Self::energy`].
    pub fn hessian(&self, psi: &DVector<f64>, g2: f64) -> DMatrix<f64> {
        let w = &self.electric * Self::squares(psi);
        let n = psi.len();
        DMatrix::from_fn(n, n, |a, b| {
            let diag = if a == b { 8.0 * w[a] } else { 0.0 };
            diag + 16.0 * psi[a] * self.electric[(a, b)] * psi[b] - 4.0 / (g2 * g2) * self.adjacency[(a, b)]
        })
    }

    /// Largest value of `psi^T A psi` on the unit sphere and its maximizer.
    pub fn max_plaquette(&self) -> (f64, DVector<f64>) {
        let (vals, vecs) = sym_eigen(self.adjacency.clone());
        let n = vals.len();
        (vals[n - 1], vecs.column(n - 1).into_owned())
    }
}

fn check_g2(g2: f64) -> Result<()> {
    if g2 > 0.0 && g2.is_finite() {
        Ok(())
    } else {
        Err(VariationalError::NonPositiveCoupling(g2))
    }
}

pub fn mean_energy(state: &VariationalState, g2: f64) -> Result<f64> {
    check_g2(g2)?;
    let norm: f64 = state.psi.iter().map(|x| x * x).sum();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(VariationalError::NotNormalized(norm));
    }
    let f = EnergyFunctional::new(state.level());
    Ok(f.energy(&DVector::from_column_slice(&state.psi), g2))
}

pub fn mean_plaquette(state: &VariationalState) -> f64 {
    EnergyFunctional::new(state.level()).plaquette(&DVector::from_column_slice(&state.psi))
}

/// Largest `k` accepted by [`TorusOracle`].
pub const ORACLE_MAX_K: u32 = 2;

/// Explicit ansatz states on the 2x2 point-split torus.
pub struct TorusOracle {
    basis: SnBasis,
    /// `loops[p][j]` is `U_p^(j)`.
    loops: Vec<Vec<CsrMatrix>>,
    table: FTable,
}

/// Two evaluations of `<H'>/N` for the ansatz on the torus.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct BruteForceEnergy {
    /// Each Hamiltonian term evaluated on the state with loops on the
    /// plaquettes that term touches; the value the closed form describes.
    pub cluster: f64,
    /// The full product over all plaquettes. On a finite torus the product of
    /// all loops overlaps the vacuum, so this carries finite-size corrections.
    pub full_state: f64,
}

impl TorusOracle {
    pub fn new(level: Level, cap: usize) -> Result<Self> {
        if level.k() > ORACLE_MAX_K {
            return Err(VariationalError::LevelTooLarge { k: level.k(), max: ORACLE_MAX_K });
        }
        let basis = SnBasis::enumerate(&SpinNetwork::torus(2)?, level)?;
        if basis.dim() > cap {
            return Err(SpinNetError::DimensionOverCap { dim: basis.dim(), cap }.into());
        }
        let table = FTable::eager(level);
        let loops = (0..basis.network().plaquettes.len())
            .map(|p| level.labels().map(|j| plaquette_operator(&basis, &table, p, j)).collect())
            .collect();
        Ok(TorusOracle { basis, loops, table })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `prod_{p in plaquettes} [sum_j psi_j U_p^(j)] |0>`.
    pub fn ansatz(&self, state: &VariationalState, plaquettes: &[usize]) -> DVector<f64> {
        let n = self.basis.dim();
        let mut v = DVector::zeros(n);
        v[self.basis.vacuum().expect("torus vacuum is admissible")] = 1.0;
        for &p in plaquettes {
            let mut w = DVector::zeros(n);
            for (op, &amp) in self.loops[p].iter().zip(&state.psi) {
                if amp != 0.0 {
                    w += op.mul_vec(&v) * amp;
                }
            }
            v = w;
        }
        v
    }

    pub fn energy(&self, state: &VariationalState, g2: f64) -> Result<BruteForceEnergy> {
        check_g2(g2)?;
        let net = self.basis.network();
        let np = net.plaquettes.len();
        let (ce, cb) = Convention::Rescaled.coefficients(g2);

        let all: Vec<usize> = (0..np).collect();
        let full = self.ansatz(state, &all);
        let h = build_hamiltonian(&self.basis, &self.table, g2, Convention::Rescaled)?;
        let full_state = full.dot(&h.matrix.mul_vec(&full)) / full.dot(&full) / np as f64;

        let mut total = 0.0;
        for (l, link) in net.links.iter().enumerate() {
            if link.kind != LinkKind::Physical {
                continue;
            }
            let support: Vec<usize> = (0..np).filter(|&p| net.plaquettes[p].inner.contains(&l)).collect();
            let v = self.ansatz(state, &support);
            let e: f64 = v
                .iter()
                .zip(self.basis.states())
                .map(|(a, s)| a * a * electric_energy(SpinLabel::from_twice(s[l])))
                .sum();
            total += ce * e / v.dot(&v);
        }
        for p in 0..np {
            let v = self.ansatz(state, &[p]);
            let u = &self.loops[p][1];
            total += cb * 2.0 * v.dot(&u.mul_vec(&v)) / v.dot(&v);
        }
        Ok(BruteForceEnergy { cluster: total / np as f64, full_state })
    }
}

/// Convenience wrapper building a [`TorusOracle`] for one evaluation.
pub fn brute_force_energy(state: &VariationalState, g2: f64, cap: usize) -> Result<BruteForceEnergy> {
    TorusOracle::new(state.level(), cap)?.energy(state, g2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Convergence threshold on the projected gradient, relative to
    /// `1 + |grad|`.
    pub grad_tol: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { restarts: 8, seed: 0, max_iter: 20_000, grad_tol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Optimum {
    pub state: VariationalState,
    pub energy: f64,
    pub plaquette: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Riemannian descent on the sphere with Armijo backtracking, started at
/// `start`. Takes Newton steps where the projected Hessian is positive
/// definite and Barzilai-Borwein gradient steps elsewhere.
pub fn local_minimize(f: &EnergyFunctional, g2: f64, start: &DVector<f64>, opts: &OptimizeOptions) -> Optimum {
    let n = start.len();
    let mut x = start.normalize();
    let mut e = f.energy(&x, g2);
    let mut step = 1e-2 * g2 * g2;
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let g = f.gradient(&x, g2);
        let r = &g - &x * g.dot(&x);
        grad_norm = r.norm();
        if grad_norm <= opts.grad_tol * (1.0 + g.norm()) {
            converged = true;
            break;
        }
        iterations += 1;

        let proj = DMatrix::identity(n, n) - &x * x.transpose();
        let hess = &proj * (f.hessian(&x, g2) - DMatrix::identity(n, n) * x.dot(&g)) * &proj;
        let (vals, vecs) = sym_eigen(hess);
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut newton = DVector::zeros(n);
        let mut definite = true;
        for (i, &lam) in vals.iter().enumerate() {
            let v = vecs.column(i);
            if v.dot(&x).abs() > 0.5 {
                continue;
            }
            if lam <= 1e-10 * scale {
                definite = false;
                break;
            }
            newton -= v * (v.dot(&r) / lam);
        }
        if definite && n > 1 {
            let slope = newton.dot(&r);
            let mut alpha = 1.0;
            let mut done = false;
            for _ in 0..30 {
                let cand = (&x + &newton * alpha).normalize();
                let ec = f.energy(&cand, g2);
                if ec <= e + 1e-4 * alpha * slope || (ec - e).abs() <= 1e-15 * (1.0 + e.abs()) {
                    x = cand;
                    e = ec;
                    done = true;
                    break;
                }
                alpha *= 0.5;
            }
            if done {
                prev = None;
                continue;
            }
        }

        if let Some((px, pr)) = &prev {
            let s = &x - px;
            let y = &r - pr;
            let sy = s.dot(&y);
            if sy > 0.0 {
                step = s.norm_squared() / sy;
            }
        }
        let mut accepted = false;
        for _ in 0..60 {
            let cand = (&x - &r * step).normalize();
            let ec = f.energy(&cand, g2);
            if ec <= e - 1e-4 * step * grad_norm * grad_norm {
                prev = Some((x.clone(), r.clone()));
                x = cand;
                e = ec;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            converged = grad_norm <= 1e3 * opts.grad_tol * (1.0 + g.norm());
            break;
        }
    }
    canonicalize(&mut x);
    let level = f.level();
    Optimum {
        plaquette: f.plaquette(&x),
        energy: e,
        state: VariationalState { k: level.k(), psi: x.iter().copied().collect() },
        grad_norm,
        iterations,
        converged,
    }
}

/// Picks one representative of `psi ~ -psi ~ reversed(psi)`.
///
/// Reversal maps `psi_j` to `psi_{k/2-j}`; fusing with the `j = k/2` loop
/// leaves the energy and plaquette expectation unchanged. The representative
/// has mean twice-spin at most `k/2`.
pub fn canonicalize(x: &mut DVector<f64>) {
    let n = x.len();
    let mean: f64 = x.iter().enumerate().map(|(t, a)| t as f64 * a * a).sum::<f64>() / x.norm_squared();
    if mean > 0.5 * (n - 1) as f64 + 1e-12 {
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        x.copy_from_slice(&rev);
    }
    fix_sign(x);
}

fn better(a: &Optimum, b: &Optimum) -> bool {
    a.energy < b.energy - 1e-13 * (1.0 + b.energy.abs())
}

fn best_of(mut candidates: Vec<Optimum>) -> Optimum {
    let mut best = candidates.remove(0);
    for c in candidates {
        if better(&c, &best) {
            best = c;
        }
    }
    best
}

fn cold_starts(level: Level, opts: &OptimizeOptions, stream: u64) -> Vec<DVector<f64>> {
    (0..opts.restarts)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(stream.wrapping_mul(1 << 20).wrapping_add(r as u64));
            DVector::from_vec(VariationalState::random(level, &mut rng).psi)
        })
        .collect()
}

fn minimize_from(f: &EnergyFunctional, g2: f64, starts: Vec<DVector<f64>>, opts: &OptimizeOptions) -> Optimum {
    let results: Vec<Optimum> = starts.par_iter().map(|s| local_minimize(f, g2, s, opts)).collect();
    best_of(results)
}

/// Best local minimum of the closed-form energy over seeded random restarts.
pub fn optimize(level: Level, g2: f64, opts: &OptimizeOptions) -> Result<Optimum> {
    check_g2(g2)?;
    if opts.restarts == 0 {
        return Err(VariationalError::NoRestarts);
    }
    let f = EnergyFunctional::new(level);
    Ok(minimize_from(&f, g2, cold_starts(level, opts, 0), opts))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanPoint {
    pub g2: f64,
    pub energy: f64,
    pub plaquette: f64,
    pub psi: Vec<f64>,
    pub converged: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum TransitionKind {
    /// Two coexisting local minima whose energies cross.
    Crossing,
    /// A single minimum whose plaquette expectation has a kink.
    Kink,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub g2: f64,
    pub bracket: (f64, f64),
    /// Largest `|d<U>/dg^2|` on the scan grid.
    pub max_derivative: f64,
    pub kind: TransitionKind,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseScanResult {
    pub k: u32,
    pub points: Vec<ScanPoint>,
    pub critical: Option<CriticalPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub optimize: OptimizeOptions,
    /// Minimum `|d<U>/dg^2|` that counts as a transition.
    pub derivative_threshold: f64,
    /// Final bracket width relative to its midpoint.
    pub bracket_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { optimize: OptimizeOptions::default(), derivative_threshold: 1e-3, bracket_tol: 1e-6 }
    }
}

/// Logarithmically spaced grid from `min` to `max` inclusive.
pub fn log_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let (a, b) = (min.ln(), max.ln());
            (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
        }
    }
}

pub const DEFAULT_GRID: (f64, f64, usize) = (0.05, 10.0, 60);

fn to_point(g2: f64, o: &Optimum) -> ScanPoint {
    ScanPoint { g2, energy: o.energy, plaquette: o.plaquette, psi: o.state.psi.clone(), converged: o.converged }
}

/// Optimizes along `grid` (cold restarts plus warm starts from both
/// neighbours) and locates the transition.
pub fn phase_scan(level: Level, grid: &[f64], opts: &ScanOptions) -> Result<PhaseScanResult> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(VariationalError::UnsortedGrid);
    }
    for &g2 in grid {
        check_g2(g2)?;
    }
    if opts.optimize.restarts == 0 {
        return Err(VariationalError::NoRestarts);
    }
    let f = EnergyFunctional::new(level);
    let o = &opts.optimize;

    let mut best: Vec<Optimum> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &g2)| minimize_from(&f, g2, cold_starts(level, o, i as u64 + 1), o))
        .collect();
    for i in 1..grid.len() {
        let warm = local_minimize(&f, grid[i], &DVector::from_column_slice(&best[i - 1].state.psi), o);
        if better(&warm, &best[i]) {
            best[i] = warm;
        }
    }
    for i in (0..grid.len().saturating_sub(1)).rev() {
        let warm = local_minimize(&f, grid[i], &DVector::from_column_slice(&best[i + 1].state.psi), o);
        if better(&warm, &best[i]) {
            best[i] = warm;
        }
    }
    let points: Vec<ScanPoint> = grid.iter().zip(&best).map(|(&g, o)| to_point(g, o)).collect();
    let critical = locate_transition(&f, &points, opts);
    Ok(PhaseScanResult { k: level.k(), points, critical })
}

fn locate_transition(f: &EnergyFunctional, points: &[ScanPoint], opts: &ScanOptions) -> Option<CriticalPoint> {
    let (i, max_derivative) = points
        .windows(2)
        .enumerate()
        .map(|(i, w)| (i, ((w[1].plaquette - w[0].plaquette) / (w[1].g2 - w[0].g2)).abs()))
        .fold(None, |acc: Option<(usize, f64)>, (i, d)| match acc {
            Some((_, best)) if best >= d => acc,
            _ => Some((i, d)),
        })?;
    if max_derivative < opts.derivative_threshold {
        return None;
    }
    let o = &opts.optimize;
    let mut lo = (points[i].g2, DVector::from_column_slice(&points[i].psi));
    let mut hi = (points[i + 1].g2, DVector::from_column_slice(&points[i + 1].psi));
    let tol = |a: f64, b: f64| (b - a) <= opts.bracket_tol * 0.5 * (a + b);

    // Track the two branches across the jump.
    let mut kind = TransitionKind::Crossing;
    while !tol(lo.0, hi.0) {
        let m = 0.5 * (lo.0 + hi.0);
        let a = local_minimize(f, m, &lo.1, o);
        let b = local_minimize(f, m, &hi.1, o);
        let va = DVector::from_column_slice(&a.state.psi);
        let vb = DVector::from_column_slice(&b.state.psi);
        if (&va - &vb).amax() < 1e-6 {
            kind = TransitionKind::Kink;
            break;
        }
        if a.energy <= b.energy {
            lo = (m, va);
        } else {
            hi = (m, vb);
        }
    }
    if kind == TransitionKind::Kink {
        // Widen to the neighbouring grid cells, then zoom on the steepest
        // sub-interval of a five-cell local grid.
        let mut a = points[i.saturating_sub(1)].g2;
        let mut b = points[(i + 2).min(points.len() - 1)].g2;
        let mut seed = DVector::from_column_slice(&points[i].psi);
        while !tol(a, b) {
            let xs: Vec<f64> = (0..=5).map(|t| a + (b - a) * t as f64 / 5.0).collect();
            let mut us = Vec::with_capacity(xs.len());
            for &x in &xs {
                let cands = vec![
                    local_minimize(f, x, &seed, o),
                    local_minimize(f, x, &DVector::from_column_slice(&points[i + 1].psi), o),
                    local_minimize(f, x, &DVector::from_column_slice(&points[i].psi), o),
                ];
                let opt = best_of(cands);
                seed = DVector::from_column_slice(&opt.state.psi);
                us.push(opt.plaquette);
            }
            let steepest = (0..5)
                .map(|t| (t, (us[t + 1] - us[t]).abs()))
                .fold((0, -1.0), |acc, (t, d)| if d > acc.1 { (t, d) } else { acc });
            let t = steepest.0;
            let (na, nb) = (xs[t.saturating_sub(1)], xs[(t + 2).min(5)]);
            if nb - na >= b - a {
                break;
            }
            a = na;
            b = nb;
        }
        lo.0 = a;
        hi.0 = b;
    }
    Some(CriticalPoint { g2: 0.5 * (lo.0 + hi.0), bracket: (lo.0, hi.0), max_derivative, kind })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalFit {
    pub g0: f64,
    pub k0: f64,
    /// Root-mean-square residual of `1/g_c` against the fitted line.
    pub residual: f64,
    pub residuals: Vec<f64>,
}

/// Least-squares fit of `g_c^2 = (g0 / (k + k0))^2` as the line
/// `1/g_c = k/g0 + k0/g0`.
pub fn fit_critical_law(points: &[(f64, f64)]) -> Result<CriticalFit> {
    if points.len() < 3 {
        return Err(VariationalError::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points
        .iter()
        .map(|p| {
            check_g2(p.1)?;
            Ok(1.0 / p.1.sqrt())
        })
        .collect::<Result<_>>()?;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= f64::EPSILON * (1.0 + mx * mx) * n {
        return Err(VariationalError::SingularFit);
    }
    let slope = sxy / sxx;
    if slope == 0.0 {
        return Err(VariationalError::SingularFit);
    }
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    let residual = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    Ok(CriticalFit { g0: 1.0 / slope, k0: intercept / slope, residual, residuals })
}

/// `k = g0/g - k0` needed to reach coupling `g^2`.
pub fn required_level(fit: &CriticalFit, g2: f64) -> f64 {
    fit.g0 / g2.sqrt() - fit.k0
}

/// One row of an external reference table.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub g2: f64,
    pub plaquette: f64,
    pub error: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McComparison {
    pub g2: f64,
    pub variational: f64,
    pub reference: f64,
    pub error: f64,
    pub difference: f64,
}

/// Pairs each reference point with the scan's plaquette expectation,
/// linearly interpolated in `g^2`. Reference points outside the scanned
/// range are skipped.
pub fn compare_reference(scan: &[(f64, f64)], reference: &[ReferencePoint]) -> Vec<McComparison> {
    let mut sorted = scan.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    reference
        .iter()
        .filter_map(|r| {
            let pos = sorted.partition_point(|p| p.0 < r.g2);
            let value = if pos < sorted.len() && sorted[pos].0 == r.g2 {
                sorted[pos].1
            } else if pos == 0 || pos == sorted.len() {
                return None;
            } else {
                let (a, b) = (sorted[pos - 1], sorted[pos]);
                a.1 + (b.1 - a.1) * (r.g2 - a.0) / (b.0 - a.0)
            };
            Some(McComparison {
                g2: r.g2,
                variational: value,
                reference: r.plaquette,
                error: r.error,
                difference: value - r.plaquette,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lv(k: u32) -> Level {
        Level::new(k).unwrap()
    }

    #[test]
    fn vacuum_and_uniform_values() {
        let v = VariationalState::vacuum(lv(3));
        assert_eq!(mean_energy(&v, 0.4).unwrap(), 0.0);
        assert_eq!(mean_plaquette(&v), 0.0);
        let u = VariationalState::uniform(lv(1));
        for g2 in [0.3, 1.0, 2.5] {
            let want = 0.75 - 2.0 / (g2 * g2);
            assert!((mean_energy(&u, g2).unwrap() - want).abs() < 1e-14);
        }
        assert!((mean_plaquette(&u) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            VariationalState::new(lv(1), vec![1.0, 1.0]),
            Err(VariationalError::NotNormalized(_))
        ));
        assert!(matches!(
            VariationalState::new(lv(1), vec![1.0]),
            Err(VariationalError::WrongLength { .. })
        ));
        assert!(mean_energy(&VariationalState::vacuum(lv(1)), -1.0).is_err());
        let opts = OptimizeOptions { restarts: 0, ..Default::default() };
        assert_eq!(optimize(lv(1), 1.0, &opts).unwrap_err(), VariationalError::NoRestarts);
    }

    fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn k1_optimum_matches_one_dimensional_search() {
        let f = EnergyFunctional::new(lv(1));
        let e = |t: f64| f.energy(&DVector::from_vec(vec![t.cos(), t.sin()]), 1.0);
        let t = golden_section(e, 0.0, std::f64::consts::PI);
        let opt = optimize(lv(1), 1.0, &OptimizeOptions::default()).unwrap();
        assert!(opt.converged);
        assert!((opt.energy - e(t)).abs() < 1e-12);
    }

    #[test]
    fn strong_and_weak_coupling_limits() {
        for k in [1, 4, 9] {
            let opt = optimize(lv(k), 10.0, &OptimizeOptions::default()).unwrap();
            assert!(opt.state.amplitudes()[0].powi(2) > 0.99, "k={k}");
        }
        let opt = optimize(lv(1), 0.05, &OptimizeOptions::default()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((opt.state.amplitudes()[0] - s).abs() < 1e-6);
        assert!((opt.state.amplitudes()[1] - s).abs() < 1e-6);
        for k in [2, 5] {
            let f = EnergyFunctional::new(lv(k));
            let (top, _) = f.max_plaquette();
            let opt = optimize(lv(k), 0.01, &OptimizeOptions::default()).unwrap();
            assert!((opt.plaquette - top).abs() < 1e-3, "k={k}");
        }
    }

    #[test]
    fn seeds_agree_away_from_transition() {
        for (k, g2) in [(2, 0.2), (3, 5.0), (6, 0.1)] {
            let a = optimize(lv(k), g2, &OptimizeOptions { seed: 1, ..Default::default() }).unwrap();
            let b = optimize(lv(k), g2, &OptimizeOptions { seed: 99, ..Default::default() }).unwrap();
            assert!((a.energy - b.energy).abs() < 1e-8);
        }
    }

    #[test]
    fn k1_transition_location() {
        // E = 3/4 x^2 - 2x/g^4 with x = sin 2 theta saturates at g^4 = 4/3.
        let grid = log_grid(0.5, 3.0, 30);
        let scan = phase_scan(lv(1), &grid, &ScanOptions::default()).unwrap();
        let c = scan.critical.unwrap();
        assert!((c.g2 - (4.0f64 / 3.0).sqrt()).abs() < 1e-4, "{c:?}");
        assert!(scan.points[0].plaquette > 0.999);
    }

    #[test]
    fn fit_recovers_exact_law() {
        let pts: Vec<(f64, f64)> = (1..=8).map(|k| (k as f64, (4.4 / (k as f64 + 2.5)).powi(2))).collect();
        let fit = fit_critical_law(&pts).unwrap();
        assert!((fit.g0 - 4.4).abs() < 1e-9);
        assert!((fit.k0 - 2.5).abs() < 1e-9);
        assert!((required_level(&fit, 0.1) - (4.4 / 0.1f64.sqrt() - 2.5)).abs() < 1e-9);
        assert!(matches!(fit_critical_law(&pts[..2]), Err(VariationalError::TooFewPoints(2))));
        let same = vec![(3.0, 0.5), (3.0, 0.4), (3.0, 0.3)];
        assert_eq!(fit_critical_law(&same).unwrap_err(), VariationalError::SingularFit);
    }

    #[test]
    fn reference_pairing() {
        let scan = vec![(1.0, 0.5), (2.0, 0.3), (0.5, 0.9)];
        let refs = vec![
            ReferencePoint { g2: 1.0, plaquette: 0.45, error: 0.01 },
            ReferencePoint { g2: 1.5, plaquette: 0.4, error: 0.02 },
            ReferencePoint { g2: 3.0, plaquette: 0.1, error: 0.02 },
        ];
        let out = compare_reference(&scan, &refs);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].variational, 0.5);
        assert!((out[0].difference - 0.05).abs() < 1e-15);
        assert!((out[1].variational - 0.4).abs() < 1e-15);
    }

    #[test]
    fn oracle_agrees_at_k1() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let oracle = TorusOracle::new(lv(1), 4096).unwrap();
        let s = VariationalState::vacuum(lv(1));
        let bf = oracle.energy(&s, 0.5).unwrap();
        assert!(bf.cluster.abs() < 1e-14 && bf.full_state.abs() < 1e-14);
        for _ in 0..5 {
            let s = VariationalState::random(lv(1), &mut rng);
            let bf = oracle.energy(&s, 0.5).unwrap();
            assert!((bf.cluster - mean_energy(&s, 0.5).unwrap()).abs() < 1e-10);
        }
        assert!(matches!(TorusOracle::new(lv(3), 4096), Err(VariationalError::LevelTooLarge { .. })));
        assert!(matches!(TorusOracle::new(lv(2), 100), Err(VariationalError::SpinNet(_))));
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(k in 1u32..=4, seed in any::<u64>(), g2 in 0.1f64..3.0) {
            let level = lv(k);
            let f = EnergyFunctional::new(level);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = DVector::from_vec(VariationalState::random(level, &mut rng).psi);
            let g = f.gradient(&x, g2);
            let h = 1e-6;
            for i in 0..x.len() {
                let mut p = x.clone();
                let mut m = x.clone();
                p[i] += h;
                m[i] -= h;
                let fd = (f.energy(&p, g2) - f.energy(&m, g2)) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g.amax()));
            }
            let hess = f.hessian(&x, g2);
            for i in 0..x.len() {
                let mut p = x.clone();
                let mut m = x.clone();
                p[i] += h;
                m[i] -= h;
                let col = (f.gradient(&p, g2) - f.gradient(&m, g2)) / (2.0 * h);
                prop_assert!((col - hess.column(i)).amax() <= 1e-5 * (1.0 + hess.amax()));
            }
        }

        #[test]
        fn reversal_is_a_symmetry(k in 1u32..=10, seed in any::<u64>(), g2 in 0.05f64..5.0) {
            let level = lv(k);
            let f = EnergyFunctional::new(level);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = DVector::from_vec(VariationalState::random(level, &mut rng).psi);
            let r = DVector::from_iterator(x.len(), x.iter().rev().copied());
            prop_assert!((f.energy(&x, g2) - f.energy(&r, g2)).abs() < 1e-10 * (1.0 + f.energy(&x, g2).abs()));
            prop_assert!((f.plaquette(&x) - f.plaquette(&r)).abs() < 1e-12);
        }

        #[test]
        fn plaquette_bounded_by_half_dimension(k in 1u32..=16, seed in any::<u64>()) {
            let level = lv(k);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = VariationalState::random(level, &mut rng);
            let d_half = quantum_dimension(SpinLabel::HALF, level).unwrap();
            prop_assert!(mean_plaquette(&s).abs() <= d_half + 1e-12);
        }

        #[test]
        fn optimum_beats_reference_states(k in 1u32..=6, g2 in 0.05f64..10.0) {
            let level = lv(k);
            let opt = optimize(level, g2, &OptimizeOptions { restarts: 3, ..Default::default() }).unwrap();
            let norm: f64 = opt.state.amplitudes().iter().map(|x| x * x).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            prop_assert!(opt.energy <= mean_energy(&VariationalState::vacuum(level), g2).unwrap() + 1e-12);
            prop_assert!(opt.energy <= mean_energy(&VariationalState::uniform(level), g2).unwrap() + 1e-12);
        }
    }
}
