use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use snaq::circuit_json::CircuitRecord;
use snaq::format::{json_document, to_pretty};
use snaq::io::{self, CriticalSummary, ScanRow};
use snaq::suite::{render_table, run_suite, SuiteConfig};
use snaq_core::circuit::{self, g_gate, gate_count, hexagon_exactness, parse_lattice, StepTerms};
use snaq_core::qalgebra::{default_tolerance, verify_identities, FTable, Level, SpinLabel, DEFAULT_VERIFY_MAX_K};
use snaq_core::spinnet::{
    build_hamiltonian, diagonalize, distribution, Convention, SnBasis, SpinNetwork, DEFAULT_DENSE_CAP,
};
use snaq_core::variational::{fit_critical_law, log_grid, optimize, phase_scan, OptimizeOptions, ScanOptions};

#[derive(Parser)]
#[command(name = "snaq", version, about = "SU(2)_k lattice gauge theory toolkit")]
struct Cli {
    /// Worker threads; SNAQ_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log level for messages on stderr.
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum ConventionArg {
    Raw,
    Rescaled,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Raw => Convention::Raw,
            ConventionArg::Rescaled => Convention::Rescaled,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Pentagon, orthogonality and symmetry residuals of the F-symbols.
    Verify {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// One F-symbol, labels given as twice-spins `2j1,2j2,2j5,2j3,2j4,2j6`.
    Fsymbol {
        #[arg(long)]
        k: u32,
        #[arg(long, value_delimiter = ',')]
        labels: Vec<u32>,
    },
    /// Dimension of the spin-network basis.
    BasisDim {
        /// `single`, `hexagon` or `LxL`.
        #[arg(long)]
        topology: String,
        #[arg(long)]
        k: u32,
        /// Hexagon outer labels as twice-spins.
        #[arg(long, value_delimiter = ',')]
        outer: Option<Vec<u32>>,
    },
    /// Lowest levels of the single-plaquette Hamiltonian.
    PlaquetteSpectrum {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        g2: f64,
        #[arg(long, default_value_t = 1)]
        levels: usize,
        #[arg(long, value_enum, default_value = "rescaled")]
        convention: ConventionArg,
    },
    /// Variational ground state of the translation-invariant ansatz.
    Groundstate {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        g2: f64,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Variational scan over a logarithmic g^2 grid, as CSV.
    PhaseScan {
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 0.05)]
        g2_min: f64,
        #[arg(long, default_value_t = 10.0)]
        g2_max: f64,
        #[arg(long, default_value_t = 60)]
        points: usize,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; a `.critical.json` summary is written beside it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fits g_c^2 = (g0/(k+k0))^2 to the summaries in a scan directory.
    FitCritical {
        #[arg(long)]
        input: PathBuf,
    },
    /// Pairs a scan with a reference table (`g2,plaquette,error`).
    CompareMc {
        #[arg(long)]
        scan: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compiles symmetric Trotter steps to a qudit circuit.
    Compile {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        g2: f64,
        #[arg(long)]
        tau: f64,
        /// `LxL` with even L, or `hexagon`.
        #[arg(long, default_value = "2x2")]
        lattice: String,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        /// Lower multi-controlled gates through a shared ancilla.
        #[arg(long)]
        lower_ancilla: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dense check of one plaquette exponential on the hexagon.
    HexagonVerify {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        g2: f64,
        /// Outer labels as twice-spins; random admissible if omitted.
        #[arg(long, value_delimiter = ',')]
        outer: Option<Vec<u32>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Gate statistics of a compiled circuit file.
    GateCount {
        #[arg(long)]
        circuit: PathBuf,
    },
    /// Runs every acceptance check and prints a pass/fail table.
    SuiteAll {
        #[arg(long, default_value_t = 4)]
        k_max: u32,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Test hook: corrupts one F-symbol before the identity checks.
        #[arg(long, hide = true)]
        corrupt_ftable: bool,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    /// A check ran and did not pass.
    Check(String),
    /// Bad input or an unusable path.
    Usage(String),
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn level(k: u32) -> Result<Level, Failure> {
    Level::new(k).map_err(Failure::usage)
}

fn print_json(schema: &str, body: &impl Serialize) -> Outcome {
    io::emit(None, &(to_pretty(&json_document(schema, body)) + "\n")).map_err(Failure::usage)
}

/// Six twice-spin labels, each within the level.
fn outer_labels(raw: &[u32], lv: Level) -> Result<[SpinLabel; 6], Failure> {
    if raw.len() != 6 {
        return Err(Failure::usage(format!("expected 6 labels, got {}", raw.len())));
    }
    let labels: [SpinLabel; 6] = std::array::from_fn(|i| SpinLabel::from_twice(raw[i]));
    for l in labels {
        lv.check(l).map_err(Failure::usage)?;
    }
    Ok(labels)
}

fn network(topology: &str, outer: Option<&[u32]>, lv: Level) -> Result<SpinNetwork, Failure> {
    match topology {
        "single" | "single-plaquette" => Ok(SpinNetwork::single_plaquette()),
        "hexagon" => {
            let outer = match outer {
                Some(o) => outer_labels(o, lv)?,
                None => [SpinLabel::ZERO; 6],
            };
            Ok(SpinNetwork::hexagon(outer))
        }
        other => {
            let (a, b) = other.split_once(['x', 'X']).ok_or_else(|| Failure::usage(format!("unknown topology {other}")))?;
            let (a, b): (usize, usize) = (a.parse().map_err(Failure::usage)?, b.parse().map_err(Failure::usage)?);
            if a != b {
                return Err(Failure::usage("only square tori are supported"));
            }
            SpinNetwork::torus(a).map_err(Failure::usage)
        }
    }
}

#[derive(Serialize)]
struct VerifyOut<'a> {
    k: u32,
    tolerance: f64,
    passed: bool,
    entries: &'a [snaq_core::qalgebra::IdentityResidual],
}

#[derive(Serialize)]
struct SpectrumOut {
    k: u32,
    g2: f64,
    convention: &'static str,
    eigenvalues: Vec<f64>,
    distributions: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct GroundOut<'a> {
    k: u32,
    g2: f64,
    energy: f64,
    plaquette: f64,
    psi: &'a [f64],
    converged: bool,
    grad_norm: f64,
}

#[derive(Serialize)]
struct FitPoint {
    k: u32,
    gc2: f64,
    residual: f64,
}

#[derive(Serialize)]
struct FitOut {
    g0: f64,
    k0: f64,
    residual: f64,
    points: Vec<FitPoint>,
}

#[derive(Serialize)]
struct HexagonOut {
    k: u32,
    tau: f64,
    g2: f64,
    theta: f64,
    outer: Vec<u32>,
    dim: usize,
    operator_norm_error: f64,
    max_abs_error: f64,
    leakage: f64,
    passed: bool,
}

#[derive(Serialize)]
struct SuiteOut<'a> {
    k_max: u32,
    passed: bool,
    checks: &'a [snaq::suite::SuiteEntry],
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Verify { k, tol } => {
            let lv = level(k)?;
            let tolerance = tol.unwrap_or(default_tolerance(k));
            let report = verify_identities(&FTable::auto(lv), DEFAULT_VERIFY_MAX_K).map_err(Failure::usage)?;
            let passed = report.passes(tolerance);
            print_json("verify", &VerifyOut { k, tolerance, passed, entries: &report.entries })?;
            if !passed {
                return Err(Failure::Check(format!("identity residual {:.3e} above {tolerance:e}", report.max_residual())));
            }
        }
        Command::Fsymbol { k, labels } => {
            let lv = level(k)?;
            let labels = outer_labels(&labels, lv)?;
            let value = snaq_core::qalgebra::f_symbol(labels, lv).map_err(Failure::usage)?;
            println!("{value:.15}");
        }
        Command::BasisDim { topology, k, outer } => {
            let lv = level(k)?;
            let net = network(&topology, outer.as_deref(), lv)?;
            let dim = match SnBasis::enumerate(&net, lv) {
                Ok(b) => b.dim(),
                Err(snaq_core::spinnet::SpinNetError::EmptyBasis) => 0,
                Err(e) => return Err(Failure::usage(e)),
            };
            println!("{dim}");
        }
        Command::PlaquetteSpectrum { k, g2, levels, convention } => {
            let lv = level(k)?;
            let basis = SnBasis::enumerate(&SpinNetwork::single_plaquette(), lv).map_err(Failure::usage)?;
            let h = build_hamiltonian(&basis, &FTable::auto(lv), g2, convention.into()).map_err(Failure::usage)?;
            let spec = diagonalize(&h, levels, DEFAULT_DENSE_CAP).map_err(Failure::usage)?;
            let out = SpectrumOut {
                k,
                g2,
                convention: match convention {
                    ConventionArg::Raw => "raw",
                    ConventionArg::Rescaled => "rescaled",
                },
                eigenvalues: spec.eigenvalues,
                distributions: spec.eigenvectors.iter().map(distribution).collect(),
            };
            print_json("plaquette-spectrum", &out)?;
        }
        Command::Groundstate { k, g2, restarts, seed } => {
            let opts = OptimizeOptions { restarts, seed, ..OptimizeOptions::default() };
            let o = optimize(level(k)?, g2, &opts).map_err(Failure::usage)?;
            let out = GroundOut {
                k,
                g2,
                energy: o.energy,
                plaquette: o.plaquette,
                psi: o.state.amplitudes(),
                converged: o.converged,
                grad_norm: o.grad_norm,
            };
            print_json("groundstate", &out)?;
        }
        Command::PhaseScan { k, g2_min, g2_max, points, restarts, seed, out } => {
            if !(g2_min > 0.0 && g2_max > g2_min) || points < 3 {
                return Err(Failure::usage("need 0 < g2-min < g2-max and at least 3 points"));
            }
            let lv = level(k)?;
            let mut opts = ScanOptions::default();
            opts.optimize.restarts = restarts;
            opts.optimize.seed = seed;
            let scan = phase_scan(lv, &log_grid(g2_min, g2_max, points), &opts).map_err(Failure::usage)?;
            let rows: Vec<ScanRow> = scan.points.iter().map(ScanRow::from).collect();
            io::emit(out.as_deref(), &io::scan_csv(&rows)).map_err(Failure::usage)?;
            let summary = CriticalSummary::new(k, scan.critical.as_ref());
            match &scan.critical {
                Some(c) => log::info!("k={k}: transition at g2 = {} ({:?})", c.g2, c.kind),
                None => log::warn!("k={k}: no transition on this grid"),
            }
            if let Some(path) = out {
                let doc = to_pretty(&json_document("critical", &summary)) + "\n";
                io::emit(Some(&io::sidecar_path(&path)), &doc).map_err(Failure::usage)?;
            }
        }
        Command::FitCritical { input } => {
            let summaries = io::read_critical_dir(&input).map_err(Failure::usage)?;
            let points: Vec<(u32, f64)> = summaries.iter().filter_map(|s| s.g2.map(|g| (s.k, g))).collect();
            let pairs: Vec<(f64, f64)> = points.iter().map(|&(k, g)| (k as f64, g)).collect();
            let fit = fit_critical_law(&pairs).map_err(Failure::usage)?;
            let out = FitOut {
                g0: fit.g0,
                k0: fit.k0,
                residual: fit.residual,
                points: points
                    .iter()
                    .zip(&fit.residuals)
                    .map(|(&(k, gc2), &residual)| FitPoint { k, gc2, residual })
                    .collect(),
            };
            print_json("fit-critical", &out)?;
        }
        Command::CompareMc { scan, reference, out } => {
            let rows = io::compare_scan_files(&scan, &reference).map_err(Failure::usage)?;
            io::emit(out.as_deref(), &io::comparison_csv(&rows)).map_err(Failure::usage)?;
        }
        Command::Compile { k, g2, tau, lattice, steps, lower_ancilla, out } => {
            let lv = level(k)?;
            if g2.is_nan() || g2 <= 0.0 || steps == 0 {
                return Err(Failure::usage("need g2 > 0 and at least one step"));
            }
            let lattice = parse_lattice(&lattice).map_err(Failure::usage)?;
            let table = FTable::auto(lv);
            let spectral = g_gate(&table).map_err(|e| Failure::Check(e.to_string()))?;
            let mut c = circuit::trotter_step_second_order(tau, g2, steps, &lattice, &table, &spectral, StepTerms::default())
                .map_err(Failure::usage)?;
            if lower_ancilla {
                c = circuit::lower(&c).map_err(Failure::usage)?;
            }
            let doc = to_pretty(&json_document("circuit", &CircuitRecord::from_circuit(&c))) + "\n";
            io::emit(out.as_deref(), &doc).map_err(Failure::usage)?;
        }
        Command::HexagonVerify { k, tau, g2, outer, seed, tol } => {
            let lv = level(k)?;
            if g2.is_nan() || g2 <= 0.0 {
                return Err(Failure::usage("g2 must be positive"));
            }
            let outer = match outer {
                Some(o) => outer_labels(&o, lv)?,
                None => circuit::random_outer(lv, &mut ChaCha8Rng::seed_from_u64(seed)),
            };
            let table = FTable::auto(lv);
            let spectral = g_gate(&table).map_err(|e| Failure::Check(e.to_string()))?;
            let theta = 2.0 * tau / g2;
            let e = hexagon_exactness(&table, &spectral, outer, theta).map_err(Failure::usage)?;
            let passed = e.max_abs < tol && e.leakage < tol;
            let out = HexagonOut {
                k,
                tau,
                g2,
                theta,
                outer: outer.iter().map(|l| l.twice()).collect(),
                dim: e.dim,
                operator_norm_error: e.operator_norm,
                max_abs_error: e.max_abs,
                leakage: e.leakage,
                passed,
            };
            print_json("hexagon-verify", &out)?;
            if !passed {
                return Err(Failure::Check(format!("error {:.3e} above {tol:e}", e.max_abs)));
            }
        }
        Command::GateCount { circuit: path } => {
            let c = read_circuit(&path)?;
            let report = gate_count(&c);
            print_json("gate-count", &report)?;
            if !report.within_bound {
                return Err(Failure::Check(format!("{} gates per step exceed {}", report.per_step, report.bound)));
            }
        }
        Command::SuiteAll { k_max, seed, corrupt_ftable } => {
            let cfg = SuiteConfig { k_max, corrupt_ftable, seed };
            let entries = run_suite(&cfg);
            let passed = entries.iter().all(|e| e.check.passed);
            eprint!("{}", render_table(&entries));
            print_json("suite", &SuiteOut { k_max, passed, checks: &entries })?;
            if !passed {
                let failed: Vec<String> = entries.iter().filter(|e| !e.check.passed).map(|e| e.id.to_string()).collect();
                return Err(Failure::Check(format!("failed checks: {}", failed.join(", "))));
            }
        }
    }
    Ok(())
}

fn read_circuit(path: &Path) -> Result<circuit::Circuit, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let record: CircuitRecord =
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    record.into_circuit().map_err(Failure::usage)
}

fn thread_count(flag: Option<usize>) -> Option<usize> {
    std::env::var("SNAQ_THREADS").ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0).or(flag)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).target(env_logger::Target::Stderr).init();
    if let Some(n) = thread_count(cli.threads) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("snaq: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("snaq: {msg}");
            ExitCode::from(2)
        }
    }
}

