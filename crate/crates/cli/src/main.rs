#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lattice_spectra::asymptotics::{
    extract_log_coefficient, fit_eigenvalue_asymptotics, geometric_offsets, leading_coefficients, FitTarget,
    SampleSpec,
};
use lattice_spectra::lattice::{extrapolate, oracle_rows, TruncatedHamiltonian};
use lattice_spectra::spectrum::{eigenvalue_curve, multiplicity_two_construct, phase_diagram, solve, triple_emergence_check};
use lattice_spectra::thresholds::{
    classify_threshold_solutions, coupling_thresholds, es_constants, gammas, halving_radii,
    resonance_integrability_probe,
};
use lattice_spectra::torus_quad::{QuadratureSpec, Weight};
use lattice_spectra::{DispersionModel, Error, ModelContext, ModelSpec, RootOptions, Sector};
use serde::Serialize;
use serde_json::{json, Value};

const THREADS_ENV: &str = "LATTICE_SPECTRA_THREADS";

#[derive(Parser, Debug)]
#[command(name = "lattice-spectra", version, about = "Discrete spectrum above the band of H0 + μV on Z²")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Dispersion kind: laplacian, piecewise_phi, stepped_phi_a, exponential_hopping.
    #[arg(long, global = true, default_value = "laplacian")]
    model: String,
    /// JSON model description `{"kind": ..., "params": {...}}`; overrides --model.
    #[arg(long, global = true)]
    model_file: Option<PathBuf>,
    /// ε for piecewise_phi.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// A for stepped_phi_a.
    #[arg(long = "amplitude", global = true)]
    amplitude: Option<f64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long, short = 'o', global = true)]
    output: Option<PathBuf>,
    /// Worker threads; falls back to LATTICE_SPECTRA_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    tol_floor: Option<f64>,
    #[arg(long, global = true)]
    tol_root: Option<f64>,
    #[arg(long, global = true)]
    tol_zero: Option<f64>,
    #[arg(long, global = true)]
    tol_multiplicity: Option<f64>,
    #[arg(long, global = true)]
    tol_derivative: Option<f64>,
    #[arg(long, global = true)]
    tol_degeneracy: Option<f64>,
    /// Relative accuracy of the resolvent quadrature.
    #[arg(long, global = true)]
    tol_quad: Option<f64>,
    /// Relative tolerance of the es balance test.
    #[arg(long, global = true)]
    tol_balance: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the standing hypotheses on the dispersion relation.
    Validate,
    /// Sector constants and, with -a/-b, coupling thresholds.
    #[command(allow_negative_numbers = true)]
    Thresholds {
        #[arg(short = 'a')]
        a: Option<f64>,
        #[arg(short = 'b')]
        b: Option<f64>,
    },
    /// All eigenvalues above the band.
    #[command(allow_negative_numbers = true)]
    Solve {
        #[arg(short = 'a')]
        a: f64,
        #[arg(short = 'b')]
        b: f64,
        #[arg(long)]
        mu: f64,
    },
    /// Top eigenvalue of one sector along a μ grid.
    #[command(allow_negative_numbers = true)]
    Curve {
        #[arg(long)]
        sector: Sector,
        #[arg(short = 'a')]
        a: f64,
        #[arg(short = 'b')]
        b: f64,
        #[arg(long)]
        mu_min: f64,
        #[arg(long)]
        mu_max: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Eigenvalue counts on an (a, b) grid at fixed μ.
    #[command(allow_negative_numbers = true)]
    PhaseDiagram {
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = -5.0)]
        a_min: f64,
        #[arg(long, default_value_t = 5.0)]
        a_max: f64,
        #[arg(long, default_value_t = 20)]
        a_points: usize,
        #[arg(long, default_value_t = -5.0)]
        b_min: f64,
        #[arg(long, default_value_t = 5.0)]
        b_max: f64,
        #[arg(long, default_value_t = 20)]
        b_points: usize,
    },
    /// Leading coefficients, and a measured fit when --target is given.
    #[command(allow_negative_numbers = true)]
    Asymptotics {
        #[arg(short = 'a')]
        a: f64,
        #[arg(short = 'b')]
        b: f64,
        #[arg(long)]
        sector: Option<Sector>,
        #[arg(long, value_enum)]
        target: Option<Target>,
        #[arg(long)]
        min: Option<f64>,
        #[arg(long)]
        max: Option<f64>,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long)]
        geometric: bool,
        #[arg(long)]
        window_min: Option<f64>,
        #[arg(long)]
        window_max: Option<f64>,
        /// Also fit the log coefficient of the resolvent integral of 1.
        #[arg(long)]
        log_coefficient: bool,
    },
    /// Finite-box diagonalization with sector counts and L extrapolation.
    #[command(allow_negative_numbers = true)]
    Oracle {
        #[arg(short = 'a')]
        a: f64,
        #[arg(short = 'b')]
        b: f64,
        #[arg(long)]
        mu: f64,
        /// Box half-widths, comma separated.
        #[arg(long = "box", value_delimiter = ',', default_value = "20,30,40")]
        boxes: Vec<usize>,
        /// Hopping cutoff.
        #[arg(long, short = 'R', default_value_t = 1)]
        cutoff: usize,
        #[arg(long, default_value_t = 1e-4)]
        margin: f64,
    },
    /// Stepped-profile couplings with a double es eigenvalue at z0.
    Multiplicity {
        #[arg(long)]
        z0: f64,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
    },
    /// Threshold classification and the integrability probe of |Φ_ω|².
    #[command(allow_negative_numbers = true)]
    Resonance {
        #[arg(long)]
        sector: Sector,
        #[arg(short = 'a', default_value_t = 1.0)]
        a: f64,
        #[arg(short = 'b', default_value_t = 1.0)]
        b: f64,
        #[arg(long, default_value_t = 1e-1)]
        r_max: f64,
        #[arg(long, default_value_t = 1e-4)]
        r_min: f64,
    },
    /// Count jump across the common os/es threshold.
    TripleEmergence {
        #[arg(short = 'b', default_value_t = 1.0)]
        b: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Target {
    RankOneLinear,
    RankOneLog,
    EsExponential,
    EsLambda,
    EsLinear,
}

impl From<Target> for FitTarget {
    fn from(t: Target) -> Self {
        match t {
            Target::RankOneLinear => FitTarget::RankOneLinear,
            Target::RankOneLog => FitTarget::RankOneLog,
            Target::EsExponential => FitTarget::EsExponential,
            Target::EsLambda => FitTarget::EsLambda,
            Target::EsLinear => FitTarget::EsLinear,
        }
    }
}

enum Failure {
    Config(String),
    Library(Error),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => Failure::Config(m),
            e => Failure::Library(e),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(io::Error::other(e))
    }
}

#[derive(Serialize)]
struct Tolerances {
    floor: f64,
    root: f64,
    zero: f64,
    multiplicity: f64,
    derivative: f64,
    degeneracy: f64,
    quad: f64,
    balance: f64,
}

struct Setup {
    model: DispersionModel,
    quad: QuadratureSpec,
    roots: RootOptions,
    balance: f64,
    format: Option<Format>,
    output: Option<PathBuf>,
    threads: usize,
}

impl Setup {
    fn context(&self) -> Result<ModelContext, Failure> {
        Ok(ModelContext::with_spec(self.model.clone(), self.quad.clone())?)
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances {
            floor: self.roots.floor,
            root: self.roots.rel_tol,
            zero: self.roots.zero_tol,
            multiplicity: self.roots.multiplicity_tol,
            derivative: self.roots.derivative_tol,
            degeneracy: self.roots.degeneracy_gap,
            quad: self.quad.radial_tol,
            balance: self.balance,
        }
    }

    fn metadata(&self, command: &str) -> Value {
        json!({
            "command": command,
            "model": self.model.to_spec(),
            "tolerances": self.tolerances(),
            "threads": self.threads,
        })
    }
}

fn positive(name: &str, v: Option<f64>, default: f64) -> Result<f64, Failure> {
    match v {
        None => Ok(default),
        Some(x) if x > 0.0 && x.is_finite() => Ok(x),
        Some(x) => Err(Failure::Config(format!("--{name} must be positive, got {x}"))),
    }
}

fn load_model(g: &Global) -> Result<DispersionModel, Failure> {
    let spec = if let Some(path) = &g.model_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str::<ModelSpec>(&text).map_err(|e| Failure::Config(format!("bad model file: {e}")))?
    } else {
        let params = match g.model.as_str() {
            "laplacian" => json!({}),
            "piecewise_phi" => json!({ "epsilon": g.epsilon.ok_or_else(|| Failure::Config("piecewise_phi needs --epsilon".into()))? }),
            "stepped_phi_a" => json!({ "A": g.amplitude.ok_or_else(|| Failure::Config("stepped_phi_a needs --amplitude".into()))? }),
            "exponential_hopping" => return Err(Failure::Config("exponential_hopping needs --model-file with a table".into())),
            other => return Err(Failure::Config(format!("unknown model kind '{other}'"))),
        };
        ModelSpec { kind: g.model.clone(), params }
    };
    DispersionModel::from_spec(&spec).map_err(|e| match e {
        Error::InvalidModel(m) => Failure::Config(m),
        e => Failure::Library(e),
    })
}

fn setup(g: &Global) -> Result<Setup, Failure> {
    let model = load_model(g)?;
    let d = RootOptions::default();
    let roots = RootOptions {
        floor: positive("tol-floor", g.tol_floor, d.floor)?,
        rel_tol: positive("tol-root", g.tol_root, d.rel_tol)?,
        zero_tol: positive("tol-zero", g.tol_zero, d.zero_tol)?,
        multiplicity_tol: positive("tol-multiplicity", g.tol_multiplicity, d.multiplicity_tol)?,
        derivative_tol: positive("tol-derivative", g.tol_derivative, d.derivative_tol)?,
        degeneracy_gap: positive("tol-degeneracy", g.tol_degeneracy, d.degeneracy_gap)?,
    };
    let mut quad = QuadratureSpec::for_model(&model);
    quad.radial_tol = positive("tol-quad", g.tol_quad, quad.radial_tol)?;
    let balance = positive("tol-balance", g.tol_balance, 1e-8)?;
    let threads = match g.threads {
        Some(0) => return Err(Failure::Config("--threads must be at least 1".into())),
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(s) => s
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Failure::Config(format!("{THREADS_ENV} must be a positive integer, got '{s}'")))?,
            Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        },
    };
    Ok(Setup { model, quad, roots, balance, format: g.format, output: g.output.clone(), threads })
}

fn sink(s: &Setup) -> Result<Box<dyn Write>, Failure> {
    Ok(match &s.output {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json(s: &Setup, command: &str, result: impl Serialize) -> Result<(), Failure> {
    let doc = json!({ "metadata": s.metadata(command), "result": result });
    let mut w = sink(s)?;
    serde_json::to_writer_pretty(&mut w, &doc).map_err(io::Error::other)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn emit_csv<T: Serialize>(s: &Setup, command: &str, rows: &[T]) -> Result<(), Failure> {
    eprintln!("# metadata: {}", s.metadata(command));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink(s)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn emit<T: Serialize>(s: &Setup, command: &str, default: Format, json_value: impl Serialize, rows: &[T]) -> Result<(), Failure> {
    match s.format.unwrap_or(default) {
        Format::Json => emit_json(s, command, json_value),
        Format::Csv => emit_csv(s, command, rows),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, Failure> {
    if n < 2 || !(hi > lo) {
        return Err(Failure::Config(format!("grid needs min < max and at least 2 points, got [{lo}, {hi}] x {n}")));
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

#[derive(Serialize)]
struct ThresholdRow {
    gamma_os: f64,
    gamma_oa: f64,
    gamma_ea: f64,
    gamma_es: f64,
    theta_star: f64,
    theta_2star: f64,
    kappa1: f64,
    j0: f64,
    mu0_os: Option<String>,
    mu0_oa: Option<String>,
    mu0_ea: Option<String>,
    mu0_es: Option<String>,
}

#[derive(Serialize)]
struct RecordRow {
    sector: Sector,
    energy: f64,
    offset: f64,
    multiplicity: u32,
    c1: Option<f64>,
    c2: Option<f64>,
    residual: f64,
}

#[derive(Serialize)]
struct CurveRow {
    mu: f64,
    #[serde(rename = "E")]
    energy: f64,
    sector: Sector,
}

#[derive(Serialize)]
struct CellRow {
    a: f64,
    b: f64,
    count: u32,
}

#[derive(Serialize)]
struct FitRow {
    x: f64,
    offset: f64,
    predicted_offset: Option<f64>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let s = setup(&cli.global)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(s.threads)
        .build_global()
        .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    match cli.command {
        Command::Validate => {
            let report = s.model.validate_hypothesis();
            let morse = s.model.morse_data().ok();
            let rows = vec![json!({ "passed": report.passed, "failures": report.failures.len() })];
            emit(&s, "validate", Format::Json, json!({ "report": report, "morse": morse }), &rows)?;
            if !report.passed {
                return Err(Failure::Library(Error::InvalidModel("standing hypotheses fail".into())));
            }
        }
        Command::Thresholds { a, b } => {
            let ctx = s.context()?;
            let g = gammas(&ctx)?;
            let es = es_constants(&ctx)?;
            let th = match (a, b) {
                (Some(a), Some(b)) => Some(coupling_thresholds(&ctx, a, b)?),
                (None, None) => None,
                _ => return Err(Failure::Config("give both -a and -b or neither".into())),
            };
            let fmt = |t: lattice_spectra::Threshold| match t.value() {
                Some(v) => format!("{v}"),
                None => "none".to_string(),
            };
            let row = ThresholdRow {
                gamma_os: g.gamma_os,
                gamma_oa: g.gamma_oa,
                gamma_ea: g.gamma_ea,
                gamma_es: g.gamma_es,
                theta_star: es.theta_star,
                theta_2star: es.theta_2star,
                kappa1: es.kappa1,
                j0: ctx.morse().j0,
                mu0_os: th.map(|t| fmt(t.os)),
                mu0_oa: th.map(|t| fmt(t.oa)),
                mu0_ea: th.map(|t| fmt(t.ea)),
                mu0_es: th.map(|t| fmt(t.es)),
            };
            emit(&s, "thresholds", Format::Csv, json!({ "sector_constants": g, "es_constants": es, "coupling_thresholds": th, "j0": ctx.morse().j0 }), &[row])?;
        }
        Command::Solve { a, b, mu } => {
            let ctx = s.context()?;
            let res = solve(&ctx, a, b, mu, &s.roots)?;
            let rows: Vec<RecordRow> = res
                .records
                .iter()
                .map(|r| RecordRow { sector: r.sector, energy: r.energy, offset: r.offset, multiplicity: r.multiplicity, c1: r.c1, c2: r.c2, residual: r.residual })
                .collect();
            emit(&s, "solve", Format::Json, &res, &rows)?;
        }
        Command::Curve { sector, a, b, mu_min, mu_max, points } => {
            let ctx = s.context()?;
            let grid = linspace(mu_min, mu_max, points)?;
            let curve = eigenvalue_curve(&ctx, sector, a, b, &grid, &s.roots)?;
            let rows: Vec<CurveRow> = curve.points.iter().map(|p| CurveRow { mu: p.mu, energy: p.energy, sector }).collect();
            emit(&s, "curve", Format::Csv, &curve, &rows)?;
        }
        Command::PhaseDiagram { mu, a_min, a_max, a_points, b_min, b_max, b_points } => {
            let ctx = s.context()?;
            let ag: Vec<f64> = linspace(a_min, a_max, a_points)?.into_iter().filter(|&v| v != 0.0).collect();
            let bg: Vec<f64> = linspace(b_min, b_max, b_points)?.into_iter().filter(|&v| v != 0.0).collect();
            let pd = phase_diagram(&ctx, mu, &ag, &bg, &s.roots)?;
            let rows: Vec<CellRow> = pd.cells.iter().map(|c| CellRow { a: c.a, b: c.b, count: c.count }).collect();
            emit(&s, "phase-diagram", Format::Csv, &pd, &rows)?;
        }
        Command::Asymptotics { a, b, sector, target, min, max, points, geometric, window_min, window_max, log_coefficient } => {
            let ctx = s.context()?;
            let coeffs = leading_coefficients(&ctx, a, b)?;
            let fit = match target {
                Some(t) => {
                    let t = FitTarget::from(t);
                    let sector = sector.unwrap_or(match t {
                        FitTarget::RankOneLinear => Sector::Ea,
                        FitTarget::RankOneLog => Sector::Os,
                        _ => Sector::Es,
                    });
                    let (min, max) = match (min, max) {
                        (Some(x), Some(y)) => (x, y),
                        _ => return Err(Failure::Config("--target needs --min and --max".into())),
                    };
                    let window = match (window_min, window_max) {
                        (None, None) => None,
                        (lo, hi) => Some((lo.unwrap_or(0.0), hi.unwrap_or(f64::INFINITY))),
                    };
                    let spec = SampleSpec { target: t, min, max, points, geometric, offset_window: window };
                    Some(fit_eigenvalue_asymptotics(&ctx, sector, a, b, &spec, &s.roots)?)
                }
                None => None,
            };
            let log = if log_coefficient {
                Some(extract_log_coefficient(&ctx, &Weight::unit(), &geometric_offsets(1e-3, 1e-9, 12))?)
            } else {
                None
            };
            let rows: Vec<FitRow> = fit
                .iter()
                .flat_map(|f| f.samples.iter().map(|p| FitRow { x: p.x, offset: p.offset, predicted_offset: p.predicted_offset }))
                .collect();
            emit(&s, "asymptotics", Format::Json, json!({ "coefficients": coeffs, "fit": fit, "log_coefficient": log }), &rows)?;
        }
        Command::Oracle { a, b, mu, boxes, cutoff, margin } => {
            let mut boxes = boxes;
            boxes.sort_unstable();
            boxes.dedup();
            let mut runs = Vec::new();
            let mut rows = Vec::new();
            for &l in &boxes {
                let h = TruncatedHamiltonian::build(&s.model, l, cutoff, a, b, mu)?;
                let counts = h.sector_count_above(margin)?;
                rows.extend(oracle_rows(&h, &counts));
                runs.push((l, h.tail_bound, counts));
            }
            let mut limits = Vec::new();
            if boxes.len() >= 3 {
                for sec in Sector::ALL {
                    let depth = runs.iter().map(|r| r.2.sector_values(sec).len()).min().unwrap_or(0);
                    for i in 0..depth {
                        let vals: Vec<f64> = runs.iter().map(|r| r.2.sector_values(sec)[i]).collect();
                        limits.push(json!({ "sector": sec, "index": i, "extrapolation": extrapolate(&boxes, &vals).ok() }));
                    }
                }
            }
            let runs_json: Vec<Value> = runs
                .iter()
                .map(|(l, tail, c)| json!({ "L": l, "tail_bound": tail, "counts": c }))
                .collect();
            emit(&s, "oracle", Format::Csv, json!({ "runs": runs_json, "extrapolated": limits }), &rows)?;
        }
        Command::Multiplicity { z0, mu } => {
            let m = multiplicity_two_construct(z0, mu, &s.roots)?;
            let rows = [json!({ "z0": m.z0, "A0": m.a_profile, "a0": m.a0, "b0": m.b0, "mu": m.mu, "multiplicity_two": m.multiplicity_two })];
            emit(&s, "multiplicity", Format::Json, &m, &rows)?;
        }
        Command::Resonance { sector, a, b, r_max, r_min } => {
            let ctx = s.context()?;
            let class = classify_threshold_solutions(&ctx, a, b, s.balance)?;
            let probe = resonance_integrability_probe(&ctx, sector, &halving_radii(r_max, r_min))?;
            let rows: Vec<Value> = probe.radii.iter().zip(&probe.values).map(|(r, v)| json!({ "r": r, "I": v })).collect();
            emit(&s, "resonance", Format::Json, json!({ "classification": class, "probe": probe }), &rows)?;
        }
        Command::TripleEmergence { b, delta } => {
            let ctx = s.context()?;
            let rep = triple_emergence_check(&ctx, b, delta, &s.roots)?;
            emit(&s, "triple-emergence", Format::Json, &rep, &[&rep])?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Library(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_domain() { 1 } else { 2 })
        }
    }
}
