//! End-to-end acceptance checks shared by `snaq suite-all` and the test
//! suite.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use snaq_core::circuit::lower::LayerInventory;
use snaq_core::circuit::{
    conjugation_residual, expand_multicontrolled, g_gate, gate_count, hexagon_exactness, lower, random_outer,
    trotter_error, trotter_step_second_order, Circuit, CircuitMetadata, GateKind, Lattice, StepTerms,
};
use snaq_core::linalg::expm_i_sym;
use snaq_core::qalgebra::{
    classical_deviation, verify_identities, FTable, Level, SpinLabel, DEFAULT_VERIFY_MAX_K,
};
use snaq_core::spinnet::{
    build_hamiltonian, convergence_level, diagonalize, distribution, distribution_distance, mathieu_oracle,
    single_plaquette_distribution, single_plaquette_tridiagonal, Convention, SnBasis, SpinNetwork,
};
use snaq_core::variational::{
    fit_critical_law, log_grid, mean_energy, phase_scan, CriticalFit, PhaseScanResult, ReferencePoint,
    ScanOptions, TorusOracle, VariationalState, DEFAULT_GRID,
};

use crate::format::round_sig;
use crate::io::{compare_scan_files, reference_csv, scan_csv, ScanRow};

/// Outcome of one acceptance check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub passed: bool,
    /// `false` when the check was not run at this `k_max`.
    pub ran: bool,
    pub detail: String,
}

impl Check {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Check { passed, ran: true, detail: detail.into() }
    }

    fn skipped(detail: impl Into<String>) -> Self {
        Check { passed: true, ran: false, detail: detail.into() }
    }

    fn failed(e: impl std::fmt::Display) -> Self {
        Check::new(false, format!("error: {e}"))
    }
}

fn level(k: u32) -> Level {
    Level::new(k).expect("positive level")
}

/// Pentagon and orthogonality below `1e-10`, the other identities below
/// `1e-12`, for every `k` in `ks`.
pub fn identity_suite(ks: impl IntoIterator<Item = u32>, corrupt: bool) -> Check {
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for k in ks {
        let mut table = FTable::eager(level(k));
        if corrupt {
            table.inject([1, 1, 0, 1, 1, 0].map(SpinLabel::from_twice), 0.3);
        }
        let report = match verify_identities(&table, DEFAULT_VERIFY_MAX_K) {
            Ok(r) => r,
            Err(e) => return Check::failed(e),
        };
        for e in &report.entries {
            let tol = match e.identity.as_str() {
                "pentagon" | "orthogonality" => 1e-10,
                _ => 1e-12,
            };
            if e.max_residual >= tol {
                detail.push(format!("k={k} {} residual {:.3e}", e.identity, e.max_residual));
            }
        }
        worst = worst.max(report.max_residual());
    }
    if detail.is_empty() {
        Check::new(true, format!("max residual {worst:.3e}"))
    } else {
        Check::new(false, detail.join("; "))
    }
}

/// Deviation from the classical 6j symbols over labels `j <= 2` at
/// `k = 50, 100, 200, 400`.
pub fn classical_limit() -> Check {
    let ks = [50, 100, 200, 400];
    let devs: Result<Vec<f64>, _> = ks.iter().map(|&k| classical_deviation(level(k), 4)).collect();
    let devs = match devs {
        Ok(d) => d,
        Err(e) => return Check::failed(e),
    };
    let monotone = devs.windows(2).all(|w| w[1] < w[0]);
    let passed = monotone && devs[3] < 1e-3;
    let text: Vec<String> = ks.iter().zip(&devs).map(|(k, d)| format!("k={k}: {d:.3e}")).collect();
    Check::new(passed, text.join(", "))
}

/// Single-plaquette distributions at `g^2 = 0.1` against the `k = 100`
/// oracle.
pub fn single_plaquette_convergence() -> Check {
    const G2: f64 = 0.1;
    const TOL: f64 = 1e-6;
    type Thresholds = Vec<Option<u32>>;
    let run = || -> Result<(f64, Thresholds), Box<dyn std::error::Error>> {
        let ground = single_plaquette_distribution(level(30), G2, 0)?;
        let oracle0 = distribution(&mathieu_oracle(G2, 0, 50)?);
        let d0 = distribution_distance(&ground, &oracle0);
        let mut thresholds = Vec::new();
        for n in 0..4 {
            let oracle = distribution(&mathieu_oracle(G2, n, 50)?);
            thresholds.push(convergence_level(G2, n, &oracle, TOL, 100)?);
        }
        Ok((d0, thresholds))
    };
    match run() {
        Ok((d0, th)) => {
            let increasing = th.iter().all(Option::is_some) && th.windows(2).all(|w| w[0] < w[1]);
            Check::new(d0 < TOL && increasing, format!("L-inf at k=30: {d0:.3e}; thresholds n=0..3: {th:?}"))
        }
        Err(e) => Check::failed(e),
    }
}

/// Closed-form `2x2` spectrum and generic vs tridiagonal assembly.
pub fn single_plaquette_exact() -> Check {
    let run = || -> Result<(Vec<f64>, f64), Box<dyn std::error::Error>> {
        let basis = SnBasis::enumerate(&SpinNetwork::single_plaquette(), level(1))?;
        let h = build_hamiltonian(&basis, &FTable::eager(level(1)), 1.0, Convention::Rescaled)?;
        let spec = diagonalize(&h, 2, usize::MAX)?;
        let mut worst = 0.0f64;
        for k in 1..=6 {
            let lv = level(k);
            let basis = SnBasis::enumerate(&SpinNetwork::single_plaquette(), lv)?;
            let table = FTable::eager(lv);
            for conv in [Convention::Raw, Convention::Rescaled] {
                for g2 in [0.3, 1.0, 2.7] {
                    let generic = build_hamiltonian(&basis, &table, g2, conv)?.to_dense();
                    let direct = single_plaquette_tridiagonal(lv, g2, conv)?.to_dense();
                    worst = worst.max((generic - direct).amax());
                }
            }
        }
        Ok((spec.eigenvalues, worst))
    };
    match run() {
        Ok((ev, worst)) => {
            let exact = (ev[0] + 1.0).abs() < 1e-12 && (ev[1] - 4.0).abs() < 1e-12;
            Check::new(exact && worst < 1e-12, format!("eigenvalues {ev:?}; generic vs tridiagonal {worst:.3e}"))
        }
        Err(e) => Check::failed(e),
    }
}

/// Closed-form energy vs explicit states on the `2x2` torus, 20 random states
/// per level.
pub fn variational_oracle(ks: impl IntoIterator<Item = u32>, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut finite_size) = (0.0f64, 0.0f64);
    let mut levels = Vec::new();
    for k in ks {
        levels.push(k);
        let oracle = match TorusOracle::new(level(k), 1 << 20) {
            Ok(o) => o,
            Err(e) => return Check::failed(e),
        };
        for _ in 0..20 {
            let state = VariationalState::random(level(k), &mut rng);
            let g2 = rng.random_range(0.2..5.0);
            match (mean_energy(&state, g2), oracle.energy(&state, g2)) {
                (Ok(e), Ok(b)) => {
                    worst = worst.max((e - b.cluster).abs());
                    finite_size = finite_size.max((e - b.full_state).abs());
                }
                (Err(e), _) => return Check::failed(e),
                (_, Err(e)) => return Check::failed(e),
            }
        }
    }
    Check::new(
        worst < 1e-10,
        format!("k={levels:?}: max |delta| {worst:.3e} (full-torus product state differs by up to {finite_size:.3e})"),
    )
}

/// Scans for `k = 1..=k_max` on the default grid.
pub fn critical_scans(k_max: u32, opts: &ScanOptions) -> Vec<Result<PhaseScanResult, String>> {
    let (lo, hi, n) = DEFAULT_GRID;
    let grid = log_grid(lo, hi, n);
    (1..=k_max).map(|k| phase_scan(level(k), &grid, opts).map_err(|e| e.to_string())).collect()
}

/// `g_c^2(k)` from the scans.
pub fn critical_points(scans: &[Result<PhaseScanResult, String>]) -> Result<Vec<(f64, f64)>, String> {
    scans
        .iter()
        .map(|s| {
            let s = s.as_ref().map_err(Clone::clone)?;
            let c = s.critical.as_ref().ok_or(format!("no transition found at k={}", s.k))?;
            Ok((s.k as f64, c.g2))
        })
        .collect()
}

/// Fit of `g_c^2 = (g0/(k+k0))^2` over the scans.
pub fn critical_law(scans: &[Result<PhaseScanResult, String>]) -> (Check, Option<CriticalFit>) {
    let points = match critical_points(scans) {
        Ok(p) => p,
        Err(e) => return (Check::failed(e), None),
    };
    let fit = match fit_critical_law(&points) {
        Ok(f) => f,
        Err(e) => return (Check::failed(e), None),
    };
    let decreasing = points.windows(2).all(|w| w[1].1 < w[0].1);
    let unconverged: usize =
        scans.iter().flatten().map(|s| s.points.iter().filter(|p| !p.converged).count()).sum();
    let passed = (3.9..=4.9).contains(&fit.g0) && (1.8..=3.2).contains(&fit.k0) && decreasing;
    let detail = format!(
        "g0 = {:.4}, k0 = {:.4}, g_c^2 strictly decreasing: {decreasing}, unconverged points: {unconverged}",
        fit.g0, fit.k0
    );
    (Check::new(passed, detail), Some(fit))
}

/// Reference-table ingestion round trip and monotone `<U>` for one scan.
pub fn mc_comparison(scan: &PhaseScanResult) -> Check {
    let run = || -> Result<(bool, bool, usize), Box<dyn std::error::Error>> {
        let dir = std::env::temp_dir().join(format!("snaq-mc-{}-{}", std::process::id(), scan.k));
        std::fs::create_dir_all(&dir)?;
        let rows: Vec<ScanRow> = scan.points.iter().map(ScanRow::from).collect();
        let reference: Vec<ReferencePoint> = rows
            .iter()
            .map(|r| ReferencePoint { g2: round_sig(r.g2), plaquette: round_sig(r.plaquette), error: 0.0 })
            .collect();
        let (scan_path, ref_path) = (dir.join("scan.csv"), dir.join("reference.csv"));
        std::fs::write(&scan_path, scan_csv(&rows))?;
        std::fs::write(&ref_path, reference_csv(&reference))?;
        let read_back = crate::io::read_reference_csv(&ref_path)?;
        let exact_read = read_back == reference;
        let paired = compare_scan_files(&scan_path, &ref_path)?;
        std::fs::remove_dir_all(&dir)?;
        let exact_pairs = paired.len() == reference.len()
            && paired.iter().zip(&reference).all(|(c, r)| c.reference == r.plaquette && c.difference == 0.0);
        let monotone = scan.points.windows(2).filter(|w| w[1].plaquette > w[0].plaquette + 1e-12).count();
        Ok((exact_read, exact_pairs, monotone))
    };
    match run() {
        Ok((read, pairs, violations)) => Check::new(
            read && pairs && violations == 0,
            format!(
                "reference round trip exact: {read}; pairing exact: {pairs}; <U> increases at {violations} of {} steps (k={})",
                scan.points.len() - 1,
                scan.k
            ),
        ),
        Err(e) => Check::failed(e),
    }
}

/// `F Omega F^T` vs `exp(i (2 tau / g^2) U)` on random pinned hexagons.
pub fn circuit_exactness(ks: impl IntoIterator<Item = u32>, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g2 = 1.0;
    let mut worst = 0.0f64;
    let mut cases = 0;
    for k in ks {
        let table = FTable::eager(level(k));
        let spectral = match g_gate(&table) {
            Ok(s) => s,
            Err(e) => return Check::failed(e),
        };
        for _ in 0..5 {
            let outer = random_outer(table.level(), &mut rng);
            for tau in [0.1, 1.0, 3.0] {
                match hexagon_exactness(&table, &spectral, outer, 2.0 * tau / g2) {
                    Ok(e) => worst = worst.max(e.max_abs).max(e.leakage),
                    Err(e) => return Check::failed(e),
                }
                cases += 1;
            }
        }
    }
    Check::new(worst < 1e-8, format!("{cases} cases, max |delta| {worst:.3e}"))
}

/// Conjugated plaquette against the `F''_J` blocks.
pub fn plaquette_diagonalization(ks: impl IntoIterator<Item = u32>, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for k in ks {
        let table = FTable::eager(level(k));
        for _ in 0..5 {
            let outer = random_outer(table.level(), &mut rng);
            match conjugation_residual(&table, outer) {
                Ok(r) => worst = worst.max(r),
                Err(e) => return Check::failed(e),
            }
        }
    }
    Check::new(worst < 1e-10, format!("max residual {worst:.3e}"))
}

/// Symmetric-step error on the hexagon for `tau = 0.2, 0.1, 0.05`.
pub fn trotter_order(k: u32) -> Check {
    let table = FTable::eager(level(k));
    let spectral = match g_gate(&table) {
        Ok(s) => s,
        Err(e) => return Check::failed(e),
    };
    let outer = [SpinLabel::ZERO; 6];
    let mut errs = Vec::new();
    for tau in [0.2, 0.1, 0.05] {
        match trotter_error(&table, &spectral, outer, tau, 1.0, StepTerms::default()) {
            Ok(e) => errs.push(e.operator_norm),
            Err(e) => return Check::failed(e),
        }
    }
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    Check::new(
        ratios.iter().all(|&r| r >= 3.5),
        format!(
            "k={k}: errors {:.3e}, {:.3e}, {:.3e}; ratios {:.2} and {:.2}",
            errs[0], errs[1], errs[2], ratios[0], ratios[1]
        ),
    )
}

fn test_metadata(k: u32) -> CircuitMetadata {
    CircuitMetadata {
        k,
        g2: 1.0,
        tau: 0.0,
        lattice: "register".into(),
        trotter_order: 0,
        steps: 1,
        representatives: Vec::new(),
    }
}

/// `2n + 1` lowering, the per-step bound and the layer inventory on the
/// `2x2` torus.
pub fn gate_counting(ks: impl IntoIterator<Item = u32>) -> Check {
    let mut problems = Vec::new();
    for n in 0..=4usize {
        let mut c = Circuit::new(n + 1, 2, test_metadata(1));
        c.ancillas = 1;
        c.ancilla_dim = n + 1;
        let payload = expm_i_sym(0.4, &nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        c.push(GateKind::FMove, vec![n], (0..n).map(|q| (q, 1)).collect(), payload, 0, None);
        let gate = c.gates[0].clone();
        match expand_multicontrolled(&mut c, &gate, n + 1) {
            Ok(gates) if n > 0 && gates.len() != 2 * n + 1 => problems.push(format!("n={n}: {} gates", gates.len())),
            Ok(_) => {}
            Err(e) => return Check::failed(e),
        }
    }
    let inventory = LayerInventory { electric: 2, omega: 2, g: 4, f_prime: 4, f: 12 };
    let mut summary = Vec::new();
    for k in ks {
        let table = FTable::eager(level(k));
        let spectral = match g_gate(&table) {
            Ok(s) => s,
            Err(e) => return Check::failed(e),
        };
        let circuit = match trotter_step_second_order(
            0.1,
            1.0,
            1,
            &Lattice::Torus { l: 2 },
            &table,
            &spectral,
            StepTerms::default(),
        ) {
            Ok(c) => c,
            Err(e) => return Check::failed(e),
        };
        let report = gate_count(&circuit);
        if !report.within_bound {
            problems.push(format!("k={k}: {} > {}", report.per_step, report.bound));
        }
        if report.inventory != inventory {
            problems.push(format!("k={k}: inventory {:?}", report.inventory));
        }
        if k <= 2 {
            match lower(&circuit) {
                Ok(l) if gate_count(&l).per_step != report.per_step => {
                    problems.push(format!("k={k}: lowered circuit count differs"))
                }
                Ok(_) => {}
                Err(e) => return Check::failed(e),
            }
        }
        summary.push(format!("k={k}: {}/{}", report.per_step, report.bound));
    }
    let detail = format!("2n+1 for n<=4; per-step/bound {}", summary.join(", "));
    if problems.is_empty() {
        Check::new(true, detail)
    } else {
        Check::new(false, format!("{}; {detail}", problems.join("; ")))
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    /// Largest level for the per-level sweeps. Checks that need levels above
    /// 4 (the critical-coupling family) run only when `k_max >= 4`.
    pub k_max: u32,
    pub corrupt_ftable: bool,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { k_max: 4, corrupt_ftable: false, seed: 2024 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteEntry {
    pub id: u32,
    pub name: &'static str,
    pub check: Check,
    pub seconds: f64,
}

fn timed(id: u32, name: &'static str, f: impl FnOnce() -> Check) -> SuiteEntry {
    let start = Instant::now();
    let check = f();
    let seconds = start.elapsed().as_secs_f64();
    log::info!("[{id}] {name}: {} ({seconds:.2} s)", if check.passed { "pass" } else { "FAIL" });
    SuiteEntry { id, name, check, seconds }
}

/// Runs checks 1 to 11 in order.
pub fn run_suite(cfg: &SuiteConfig) -> Vec<SuiteEntry> {
    let km = cfg.k_max.max(1);
    let full = km >= 4;
    let mut out = vec![timed(1, "identity suite", || identity_suite(1..=km.min(4), cfg.corrupt_ftable))];
    out.push(timed(2, "classical limit", classical_limit));
    out.push(timed(3, "single-plaquette convergence", single_plaquette_convergence));
    out.push(timed(4, "single-plaquette exact values", single_plaquette_exact));
    out.push(timed(5, "variational oracle", || variational_oracle(1..=km.min(2), cfg.seed)));
    let mut scans = Vec::new();
    out.push(timed(6, "critical-coupling law", || {
        if !full {
            return Check::skipped("needs k_max >= 4");
        }
        scans = critical_scans(16, &ScanOptions::default());
        critical_law(&scans).0
    }));
    out.push(timed(7, "reference comparison", || match scans.last() {
        Some(Ok(s)) => mc_comparison(s),
        Some(Err(e)) => Check::failed(e),
        None => Check::skipped("needs k_max >= 4"),
    }));
    out.push(timed(8, "circuit exactness", || circuit_exactness(1..=km.min(3), cfg.seed)));
    out.push(timed(9, "plaquette diagonalization", || plaquette_diagonalization(1..=km.min(3), cfg.seed)));
    out.push(timed(10, "Trotter order", || trotter_order(km.min(2))));
    out.push(timed(11, "gate counting", || gate_counting(1..=6)));
    out
}

/// Fixed-width pass/fail table.
pub fn render_table(entries: &[SuiteEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        let status = match (e.check.ran, e.check.passed) {
            (false, _) => "SKIP",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        s.push_str(&format!("{:>2}  {status}  {:<30} {:>8.2}s  {}\n", e.id, e.name, e.seconds, e.check.detail));
    }
    s
}

