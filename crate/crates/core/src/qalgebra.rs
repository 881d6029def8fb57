//! SU(2)_k representation data: q-numbers, quantum dimensions, fusion rules,
//! q-deformed 6j symbols and F-symbols.
//!
//! Labels are carried as twice-spin integers ([`SpinLabel`]) so admissibility
//! logic never touches floating point. All numerics are real `f64`; exactness
//! is certified by [`verify_identities`] rather than symbolic arithmetic.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A representation label `j`, stored as `2j`.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpinLabel(u32);

impl SpinLabel {
    pub const ZERO: SpinLabel = SpinLabel(0);
    pub const HALF: SpinLabel = SpinLabel(1);

    pub const fn from_twice(twice_j: u32) -> Self {
        SpinLabel(twice_j)
    }

    pub const fn twice(self) -> u32 {
        self.0
    }

    /// `j` as a real number.
    pub fn spin(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0.is_multiple_of(2)
    }
}

impl fmt::Display for SpinLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_multiple_of(2) {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Deformation level `k`, with root of unity `q = exp(2πi/(k+2))`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Level {
    k: u32,
}

impl Level {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidLevel(k));
        }
        Ok(Level { k })
    }

    pub fn k(self) -> u32 {
        self.k
    }

    /// Phase angle of `q`, i.e. `2π/(k+2)`.
    pub fn q_angle(self) -> f64 {
        2.0 * PI / f64::from(self.k + 2)
    }

    /// Number of labels `{0, 1/2, ..., k/2}`.
    pub fn num_labels(self) -> usize {
        self.k as usize + 1
    }

    pub fn labels(self) -> impl Iterator<Item = SpinLabel> + Clone {
        (0..=self.k).map(SpinLabel)
    }

    pub fn contains(self, j: SpinLabel) -> bool {
        j.0 <= self.k
    }

    pub fn check(self, j: SpinLabel) -> Result<SpinLabel> {
        if self.contains(j) {
            Ok(j)
        } else {
            Err(Error::LabelOutOfRange { twice_j: j.0, k: self.k })
        }
    }
}

/// `[n] = sin(πn/(k+2)) / sin(π/(k+2))`.
pub fn q_number(n: u32, level: Level) -> f64 {
    let theta = PI / f64::from(level.k + 2);
    (theta * f64::from(n)).sin() / theta.sin()
}

/// `[n]! = [n][n-1]...[1]` with `[0]! = 1`.
pub fn q_factorial(n: u32, level: Level) -> f64 {
    (1..=n).map(|m| q_number(m, level)).product()
}

/// `d_j = [2j+1]`.
pub fn quantum_dimension(j: SpinLabel, level: Level) -> Result<f64> {
    level.check(j)?;
    Ok(q_number(j.0 + 1, level))
}

fn triangle_ok(a: u32, b: u32, c: u32) -> bool {
    a + b >= c && b + c >= a && c + a >= b && (a + b + c).is_multiple_of(2)
}

/// SU(2)_k fusion rule: triangle inequalities, integer total spin and
/// `j1 + j2 + j3 <= k`.
pub fn is_admissible(j1: SpinLabel, j2: SpinLabel, j3: SpinLabel, level: Level) -> bool {
    triangle_ok(j1.0, j2.0, j3.0) && j1.0 + j2.0 + j3.0 <= 2 * level.k
}

/// Classical SU(2) triangle rule (no level cutoff).
pub fn is_triangle(j1: SpinLabel, j2: SpinLabel, j3: SpinLabel) -> bool {
    triangle_ok(j1.0, j2.0, j3.0)
}

/// Logarithms of `[n]!` (or `n!`) on a contiguous range.
#[derive(Clone, Debug)]
struct LogFactorials {
    table: Vec<f64>,
}

impl LogFactorials {
    fn quantum(level: Level) -> Self {
        // [n] > 0 for 0 < n < k + 2, so [n]! is positive up to n = k + 1.
        let mut table = Vec::with_capacity(level.k as usize + 2);
        table.push(0.0);
        for n in 1..=level.k + 1 {
            let prev = table[n as usize - 1];
            table.push(prev + q_number(n, level).ln());
        }
        LogFactorials { table }
    }

    fn classical(max: u32) -> Self {
        let mut table = Vec::with_capacity(max as usize + 1);
        table.push(0.0);
        for n in 1..=max {
            let prev = table[n as usize - 1];
            table.push(prev + f64::from(n).ln());
        }
        LogFactorials { table }
    }

    fn get(&self, n: i64) -> f64 {
        assert!(n >= 0, "negative factorial argument {n} inside the Racah summation range");
        self.table[n as usize]
    }
}

fn log_delta(a: u32, b: u32, c: u32, lf: &LogFactorials) -> f64 {
    let (a, b, c) = (i64::from(a), i64::from(b), i64::from(c));
    lf.get((a + b - c) / 2) + lf.get((a - b + c) / 2) + lf.get((-a + b + c) / 2)
        - lf.get((a + b + c) / 2 + 1)
}

/// Racah sum for `{t1 t2 t5; t3 t4 t6}` in twice-spin, assuming all four
/// triangles admissible.
fn racah_sum(t: [u32; 6], lf: &LogFactorials) -> f64 {
    let [t1, t2, t5, t3, t4, t6] = t;
    let alphas = [
        i64::from(t1 + t2 + t5) / 2,
        i64::from(t1 + t4 + t6) / 2,
        i64::from(t3 + t2 + t6) / 2,
        i64::from(t3 + t4 + t5) / 2,
    ];
    let betas = [
        i64::from(t1 + t2 + t3 + t4) / 2,
        i64::from(t1 + t3 + t5 + t6) / 2,
        i64::from(t2 + t4 + t5 + t6) / 2,
    ];
    let half_log_deltas = 0.5
        * (log_delta(t1, t2, t5, lf)
            + log_delta(t1, t4, t6, lf)
            + log_delta(t3, t2, t6, lf)
            + log_delta(t3, t4, t5, lf));
    let zmin = *alphas.iter().max().unwrap();
    let zmax = *betas.iter().min().unwrap();
    let mut sum = 0.0;
    for z in zmin..=zmax {
        let top = z + 1;
        if top as usize >= lf.table.len() {
            // [k+2] = 0 annihilates the numerator.
            continue;
        }
        let mut log_term = half_log_deltas + lf.get(top);
        for a in alphas {
            log_term -= lf.get(z - a);
        }
        for b in betas {
            log_term -= lf.get(b - z);
        }
        let sign = if z % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * log_term.exp();
    }
    sum
}

fn tetrahedron_admissible(t: [u32; 6], adm: impl Fn(u32, u32, u32) -> bool) -> bool {
    let [t1, t2, t5, t3, t4, t6] = t;
    adm(t1, t2, t5) && adm(t1, t4, t6) && adm(t3, t2, t6) && adm(t3, t4, t5)
}

fn twice(labels: [SpinLabel; 6]) -> [u32; 6] {
    labels.map(|j| j.0)
}

/// q-deformed 6j symbol `{j1 j2 j5; j3 j4 j6}` by the q-Racah formula.
///
/// Argument order is `[j1, j2, j5, j3, j4, j6]` (top row, then bottom row).
pub fn racah_q6j(labels: [SpinLabel; 6], level: Level) -> Result<f64> {
    for j in labels {
        level.check(j)?;
    }
    let t = twice(labels);
    let k2 = 2 * level.k;
    if !tetrahedron_admissible(t, |a, b, c| triangle_ok(a, b, c) && a + b + c <= k2) {
        return Ok(0.0);
    }
    Ok(racah_sum(t, &LogFactorials::quantum(level)))
}

/// Classical SU(2) 6j symbol `{j1 j2 j5; j3 j4 j6}` via the same Racah sum with
/// ordinary factorials.
pub fn classical_6j(labels: [SpinLabel; 6]) -> f64 {
    let t = twice(labels);
    if !tetrahedron_admissible(t, triangle_ok) {
        return 0.0;
    }
    let max = t.iter().sum::<u32>() + 2;
    racah_sum(t, &LogFactorials::classical(max))
}

/// `max |racah_q6j - classical_6j|` over all labels with `2j <= max_twice`.
pub fn classical_deviation(level: Level, max_twice: u32) -> Result<f64> {
    level.check(SpinLabel::from_twice(max_twice))?;
    let lf = LogFactorials::quantum(level);
    let n = max_twice + 1;
    let k2 = 2 * level.k;
    let mut worst = 0.0f64;
    for idx in 0..n.pow(6) {
        let t: [u32; 6] = std::array::from_fn(|i| (idx / n.pow(i as u32)) % n);
        if !tetrahedron_admissible(t, triangle_ok) {
            continue;
        }
        let q = if tetrahedron_admissible(t, |a, b, c| triangle_ok(a, b, c) && a + b + c <= k2) {
            racah_sum(t, &lf)
        } else {
            0.0
        };
        worst = worst.max((q - classical_6j(t.map(SpinLabel::from_twice))).abs());
    }
    Ok(worst)
}

/// Sign `(-1)^(j1+j2+j3+j4)`; the exponent is an integer for every admissible
/// tetrahedron.
fn f_sign(t: [u32; 6]) -> f64 {
    let [t1, t2, _, t3, t4, _] = t;
    let s = t1 + t2 + t3 + t4;
    assert!(s % 2 == 0, "non-integer F-symbol sign exponent {s}/2");
    if (s / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn f_from_6j(t: [u32; 6], six_j: f64, level: Level) -> f64 {
    let d5 = q_number(t[2] + 1, level);
    let d6 = q_number(t[5] + 1, level);
    f_sign(t) * (d5 * d6).sqrt() * six_j
}

/// F-symbol `F^{j1 j2 j5}_{j3 j4 j6}`, arguments `[j1, j2, j5, j3, j4, j6]`.
pub fn f_symbol(labels: [SpinLabel; 6], level: Level) -> Result<f64> {
    let six_j = racah_q6j(labels, level)?;
    if six_j == 0.0 {
        return Ok(0.0);
    }
    Ok(f_from_6j(twice(labels), six_j, level))
}

/// Real part of `v_j`, where `v_j = i^{2j} sqrt(d_j)` and `v_j^2 = (-1)^{2j} d_j`.
///
/// Only ratios of `v`s with integer total phase appear in the identities, so
/// the phase is tracked separately as a power of `i`.
fn v_abs(j: u32, level: Level) -> f64 {
    q_number(j + 1, level).sqrt()
}

/// `(-1)^(n/2)` for even `n` (a power of `i` that is real).
fn i_power_real(n: i64) -> f64 {
    debug_assert!(n % 2 == 0);
    if (n / 2).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

enum Storage {
    Dense(Vec<f64>),
    Lazy(RwLock<HashMap<[u32; 6], f64>>),
}

/// Memoized F-symbols for one level.
///
/// `FTable::eager` enumerates every tetrahedron up front and is then read-only;
/// `FTable::new` fills lazily behind a lock. Both are `Sync`.
pub struct FTable {
    level: Level,
    storage: Storage,
    overrides: HashMap<[u32; 6], f64>,
    log_factorials: LogFactorials,
}

impl fmt::Debug for FTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FTable")
            .field("k", &self.level.k)
            .field("eager", &matches!(self.storage, Storage::Dense(_)))
            .finish()
    }
}

/// Largest level for which `FTable::auto` stores a dense table.
pub const DENSE_TABLE_MAX_K: u32 = 10;

impl FTable {
    pub fn new(level: Level) -> Self {
        FTable {
            level,
            storage: Storage::Lazy(RwLock::new(HashMap::new())),
            overrides: HashMap::new(),
            log_factorials: LogFactorials::quantum(level),
        }
    }

    pub fn eager(level: Level) -> Self {
        let n = level.num_labels();
        let lf = LogFactorials::quantum(level);
        let mut data = vec![0.0; n.pow(6)];
        let k2 = 2 * level.k;
        for (idx, slot) in data.iter_mut().enumerate() {
            let t = Self::unflatten(idx, n);
            if tetrahedron_admissible(t, |a, b, c| triangle_ok(a, b, c) && a + b + c <= k2) {
                *slot = f_from_6j(t, racah_sum(t, &lf), level);
            }
        }
        FTable {
            level,
            storage: Storage::Dense(data),
            overrides: HashMap::new(),
            log_factorials: lf,
        }
    }

    /// Dense for small `k`, lazy otherwise.
    pub fn auto(level: Level) -> Self {
        if level.k <= DENSE_TABLE_MAX_K {
            Self::eager(level)
        } else {
            Self::new(level)
        }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    fn unflatten(mut idx: usize, n: usize) -> [u32; 6] {
        let mut t = [0u32; 6];
        for slot in t.iter_mut().rev() {
            *slot = (idx % n) as u32;
            idx /= n;
        }
        t
    }

    fn flatten(t: [u32; 6], n: usize) -> usize {
        t.iter().fold(0, |acc, &x| acc * n + x as usize)
    }

    fn compute(&self, t: [u32; 6]) -> f64 {
        let k2 = 2 * self.level.k;
        if !tetrahedron_admissible(t, |a, b, c| triangle_ok(a, b, c) && a + b + c <= k2) {
            return 0.0;
        }
        f_from_6j(t, racah_sum(t, &self.log_factorials), self.level)
    }

    /// `F^{t1 t2 t5}_{t3 t4 t6}` from twice-spin labels. Out-of-range labels
    /// give 0.
    pub fn get_twice(&self, t: [u32; 6]) -> f64 {
        if t.iter().any(|&x| x > self.level.k) {
            return 0.0;
        }
        if !self.overrides.is_empty() {
            if let Some(&v) = self.overrides.get(&t) {
                return v;
            }
        }
        match &self.storage {
            Storage::Dense(data) => data[Self::flatten(t, self.level.num_labels())],
            Storage::Lazy(cache) => {
                if let Some(&v) = cache.read().expect("F-table lock poisoned").get(&t) {
                    return v;
                }
                let v = self.compute(t);
                cache.write().expect("F-table lock poisoned").insert(t, v);
                v
            }
        }
    }

    pub fn get(&self, labels: [SpinLabel; 6]) -> f64 {
        self.get_twice(twice(labels))
    }

    /// Overwrite one entry. Fault-injection hook for negative controls of the
    /// identity suite.
    pub fn inject(&mut self, labels: [SpinLabel; 6], value: f64) {
        self.overrides.insert(twice(labels), value);
    }

    pub fn is_admissible(&self, a: u32, b: u32, c: u32) -> bool {
        triangle_ok(a, b, c) && a + b + c <= 2 * self.level.k
    }

    pub fn dim(&self, t: u32) -> f64 {
        q_number(t + 1, self.level)
    }
}

/// Residual summary for one identity.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct IdentityResidual {
    pub identity: String,
    pub max_residual: f64,
    pub num_checked: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct IdentityReport {
    pub k: u32,
    pub entries: Vec<IdentityResidual>,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.max_residual).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.entries.iter().all(|e| e.max_residual.is_finite() && e.max_residual < tol)
    }

    pub fn get(&self, identity: &str) -> Option<&IdentityResidual> {
        self.entries.iter().find(|e| e.identity == identity)
    }
}

/// Default tolerance for the identity suite at level `k`.
pub fn default_tolerance(k: u32) -> f64 {
    if k <= 4 {
        1e-10
    } else {
        1e-8
    }
}

/// Default cap on `k` for the exhaustive identity sweep.
pub const DEFAULT_VERIFY_MAX_K: u32 = 6;

/// Exhaustively checks pentagon, orthogonality, tetrahedral symmetry,
/// normalization and realness over all label assignments at this level.
pub fn verify_identities(table: &FTable, max_k: u32) -> Result<IdentityReport> {
    let level = table.level();
    if level.k > max_k {
        return Err(Error::LevelTooLarge { k: level.k, max: max_k });
    }
    let n = level.k + 1;
    let f = |t: [u32; 6]| table.get_twice(t);
    let labels: Vec<u32> = (0..n).collect();

    // Pentagon.
    let mut pent = (0.0f64, 0u64);
    for &j1 in &labels {
        for &j2 in &labels {
            for &j3 in &labels {
                for &j4 in &labels {
                    for &j5 in &labels {
                        for &j6 in &labels {
                            for &j7 in &labels {
                                for &j8 in &labels {
                                    for &j9 in &labels {
                                        let lhs: f64 = labels
                                            .iter()
                                            .map(|&jj| {
                                                f([j1, j2, j5, j3, j4, jj])
                                                    * f([j6, j7, j4, jj, j1, j8])
                                                    * f([j8, j7, jj, j3, j2, j9])
                                            })
                                            .sum();
                                        let rhs = f([j1, j2, j5, j9, j6, j8])
                                            * f([j6, j7, j4, j3, j5, j9]);
                                        pent.0 = pent.0.max((lhs - rhs).abs());
                                        pent.1 += 1;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // Orthogonality, restricted to admissible (j, j').
    let mut orth = (0.0f64, 0u64);
    for &j1 in &labels {
        for &j2 in &labels {
            for &j3 in &labels {
                for &j4 in &labels {
                    let allowed: Vec<u32> = labels
                        .iter()
                        .copied()
                        .filter(|&j| table.is_admissible(j1, j2, j) && table.is_admissible(j3, j4, j))
                        .collect();
                    for &a in &allowed {
                        for &b in &allowed {
                            let s: f64 = labels
                                .iter()
                                .map(|&jj| f([j1, j2, a, j3, j4, jj]) * f([j1, j2, b, j3, j4, jj]))
                                .sum();
                            let target = if a == b { 1.0 } else { 0.0 };
                            orth.0 = orth.0.max((s - target).abs());
                            orth.1 += 1;
                        }
                    }
                }
            }
        }
    }

    // Tetrahedral symmetry, realness.
    let mut sym = (0.0f64, 0u64);
    let mut real = (0.0f64, 0u64);
    for idx in 0..(n as usize).pow(6) {
        let t = FTable::unflatten(idx, n as usize);
        let [a, b, e, c, d, g] = t;
        let x = f(t);
        real.1 += 1;
        if !x.is_finite() {
            real.0 = f64::INFINITY;
        }
        let plain = [f([b, a, e, d, c, g]), f([d, c, e, b, a, g])];
        for y in plain {
            sym.0 = sym.0.max((x - y).abs());
            sym.1 += 1;
        }
        // F^{abe}_{cdg} = F^{aeb}_{cgd} v_e v_g / (v_b v_d).
        let phase = i64::from(e) + i64::from(g) - i64::from(b) - i64::from(d);
        let y = f([a, e, b, c, g, d]);
        let weighted = if phase % 2 == 0 {
            y * i_power_real(phase) * v_abs(e, level) * v_abs(g, level)
                / (v_abs(b, level) * v_abs(d, level))
        } else {
            // Both sides vanish when the phase is odd (inadmissible).
            y
        };
        sym.0 = sym.0.max((x - weighted).abs());
        sym.1 += 1;
    }

    // Normalization: F^{a a 0}_{b b c} = v_c / (v_a v_b) δ_{abc}, F^{000}_{abc} = δ_ab δ_bc.
    let mut norm = (0.0f64, 0u64);
    for &a in &labels {
        for &b in &labels {
            for &c in &labels {
                let got = f([a, a, 0, b, b, c]);
                let want = if table.is_admissible(a, b, c) {
                    let phase = i64::from(c) - i64::from(a) - i64::from(b);
                    i_power_real(phase) * v_abs(c, level) / (v_abs(a, level) * v_abs(b, level))
                } else {
                    0.0
                };
                norm.0 = norm.0.max((got - want).abs());
                let got0 = f([0, 0, 0, a, b, c]);
                let want0 = if a == b && b == c { 1.0 } else { 0.0 };
                norm.0 = norm.0.max((got0 - want0).abs());
                norm.1 += 2;
            }
        }
    }

    let entry = |name: &str, (r, c): (f64, u64)| IdentityResidual {
        identity: name.to_string(),
        max_residual: r,
        num_checked: c,
    };
    Ok(IdentityReport {
        k: level.k,
        entries: vec![
            entry("pentagon", pent),
            entry("orthogonality", orth),
            entry("tetrahedral_symmetry", sym),
            entry("normalization", norm),
            entry("realness", real),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lv(k: u32) -> Level {
        Level::new(k).unwrap()
    }

    fn s(t: u32) -> SpinLabel {
        SpinLabel::from_twice(t)
    }

    #[test]
    fn q_numbers() {
        for k in 1..8 {
            assert_abs_diff_eq!(q_number(1, lv(k)), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(q_number(k + 2, lv(k)), 0.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(q_number(2, lv(3)), 1.618_033_988_7, epsilon = 1e-10);
        assert_eq!(q_number(0, lv(3)), 0.0);
    }

    #[test]
    fn q_factorials() {
        assert_eq!(q_factorial(0, lv(5)), 1.0);
        assert_abs_diff_eq!(q_factorial(1, lv(5)), 1.0, epsilon = 1e-15);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(q_factorial(3, lv(3)), phi * phi, epsilon = 1e-12);
        assert_abs_diff_eq!(q_factorial(3, lv(3)), 2.618_034, epsilon = 1e-6);
    }

    #[test]
    fn quantum_dimensions() {
        assert_abs_diff_eq!(quantum_dimension(s(0), lv(4)).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(quantum_dimension(s(1), lv(1)).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(quantum_dimension(s(1), lv(3)).unwrap(), 1.618_033_988_7, epsilon = 1e-10);
        assert!(matches!(
            quantum_dimension(s(3), lv(2)),
            Err(Error::LabelOutOfRange { twice_j: 3, k: 2 })
        ));
    }

    #[test]
    fn admissibility() {
        assert!(is_admissible(s(1), s(1), s(0), lv(1)));
        assert!(!is_admissible(s(1), s(1), s(2), lv(1)));
        assert!(is_admissible(s(1), s(1), s(2), lv(2)));
        for k in 1..6 {
            assert!(!is_admissible(s(1), s(1), s(1), lv(k)));
        }
    }

    #[test]
    fn racah_basics() {
        assert_abs_diff_eq!(racah_q6j([s(0); 6], lv(3)).unwrap(), 1.0, epsilon = 1e-15);
        // Inadmissible triple (1/2, 1/2, 1/2).
        assert_eq!(racah_q6j([s(1), s(1), s(1), s(1), s(1), s(0)], lv(4)).unwrap(), 0.0);
        assert!(racah_q6j([s(5), s(0), s(0), s(0), s(0), s(0)], lv(4)).is_err());
    }

    #[test]
    fn half_half_zero_normalization() {
        // F^{½½0}_{½½0} = v_0 / (v_½ v_½) = 1 / (i^2 d_½) = -1/[2].
        for k in 1..8 {
            let level = lv(k);
            let f = f_symbol([s(1), s(1), s(0), s(1), s(1), s(0)], level).unwrap();
            assert_abs_diff_eq!(f, -1.0 / q_number(2, level), epsilon = 1e-14);
            // 6j value itself: F / (sign * sqrt(d0 d0)) with sign (+1).
            let six = racah_q6j([s(1), s(1), s(0), s(1), s(1), s(0)], level).unwrap();
            assert_abs_diff_eq!(six, -1.0 / q_number(2, level), epsilon = 1e-14);
        }
        let f1 = f_symbol([s(1), s(1), s(0), s(1), s(1), s(0)], lv(1)).unwrap();
        assert_abs_diff_eq!(f1.abs(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn f_with_zero_top_row() {
        let level = lv(4);
        for a in 0..=4 {
            for b in 0..=4 {
                for c in 0..=4 {
                    let f = f_symbol([s(0), s(0), s(0), s(a), s(b), s(c)], level).unwrap();
                    let want = if a == b && b == c { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(f, want, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn classical_limit_converges() {
        let devs: Vec<f64> = [50, 100, 200, 400].iter().map(|&k| classical_deviation(lv(k), 4).unwrap()).collect();
        assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
        assert!(devs[3] < 1e-3);
    }

    #[test]
    fn classical_values() {
        assert_abs_diff_eq!(classical_6j([s(0); 6]), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(classical_6j([s(1), s(1), s(0), s(1), s(1), s(0)]), -0.5, epsilon = 1e-15);
        // {1 1 1; 1 1 1} = 1/6.
        assert_abs_diff_eq!(classical_6j([s(2); 6]), 1.0 / 6.0, epsilon = 1e-14);
        // {1/2 1/2 1; 1/2 1/2 1} = 1/6.
        assert_abs_diff_eq!(classical_6j([s(1), s(1), s(2), s(1), s(1), s(2)]), 1.0 / 6.0, epsilon = 1e-14);
        // {1/2 1/2 0; 1/2 1/2 1} = 1/2.
        assert_abs_diff_eq!(classical_6j([s(1), s(1), s(0), s(1), s(1), s(2)]), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn identities_small_levels() {
        for k in 1..=3 {
            let table = FTable::eager(lv(k));
            let report = verify_identities(&table, DEFAULT_VERIFY_MAX_K).unwrap();
            for e in &report.entries {
                assert!(e.max_residual < 1e-12, "k={k} {}: {}", e.identity, e.max_residual);
                assert!(e.num_checked > 0);
            }
        }
    }

    #[test]
    fn identity_level_cap() {
        let table = FTable::new(lv(7));
        assert!(matches!(
            verify_identities(&table, DEFAULT_VERIFY_MAX_K),
            Err(Error::LevelTooLarge { k: 7, max: 6 })
        ));
    }

    #[test]
    fn lazy_and_eager_agree_bitwise() {
        let level = lv(5);
        let lazy = FTable::new(level);
        let eager = FTable::eager(level);
        for idx in 0..6usize.pow(6) {
            let t = FTable::unflatten(idx, 6);
            let a = lazy.get_twice(t);
            assert_eq!(a.to_bits(), eager.get_twice(t).to_bits());
            assert_eq!(a.to_bits(), lazy.get_twice(t).to_bits());
        }
    }

    #[test]
    fn injected_entry_breaks_pentagon() {
        let mut table = FTable::eager(lv(2));
        table.inject([s(1), s(1), s(0), s(1), s(1), s(0)], 0.3);
        let report = verify_identities(&table, DEFAULT_VERIFY_MAX_K).unwrap();
        assert!(report.get("pentagon").unwrap().max_residual > 1e-3);
        assert!(!report.passes(1e-10));
    }
}
