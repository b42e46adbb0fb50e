use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde::Serialize;

use hullforge::construction::Schedule;
use hullforge::exact::parse_rational;
use hullforge::geometry::{ArcSpec, ComplexPoint, Hole, PerforatedDisc};
use hullforge::harmonic_measure::{estimate, TargetSet, WalkConfig};
use hullforge::hull_prober::{hull_evidence, make_probe, two_constant_check, ProbeKind, ProbeSource};
use hullforge::pipeline::{
    assemble_counterexample, coefficient_rows, read_bundle, verify_bundle, write_bundle, LoadedBundle, RunConfig,
    SeriesFile,
};
use hullforge::series::certify::{default_threshold, radius_witness, smoothness_constants};
use hullforge::series::LacunarySeries;
use hullforge::{svg, Error};

const EXIT_CONFIG: u8 = 2;
const EXIT_VERIFY: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(name = "hullforge", version, about = "Build and check graphs with non-trivial pluripolar hulls")]
struct Cli {
    /// Worker threads for the parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full pipeline from a config file and write a bundle.
    Construct(ConstructArgs),
    /// Harmonic measure of a perforated disc by walk on spheres.
    Hm(HmArgs),
    /// Exact Taylor coefficients of a bundle's lacunary series as CSV.
    Coeffs(CoeffsArgs),
    /// Smallest k with |d_{n,k}| > threshold^-k.
    Witness(WitnessArgs),
    /// Smoothness constants C_l with |d_k| <= C_l / k^l.
    Smooth(SmoothArgs),
    /// Hull evidence and two-constant reports for a bundle.
    Probe(ProbeArgs),
    /// Write one of a bundle's plots.
    Plot(PlotArgs),
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long)]
    config: PathBuf,
    /// Bundle directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rebuild the existing bundle from its own config and compare flags.
    #[arg(long)]
    verify_only: bool,
}

#[derive(Args)]
struct HmArgs {
    #[arg(long)]
    rho: f64,
    /// Hole as cx,cy,r; repeatable.
    #[arg(long = "hole", allow_hyphen_values = true)]
    holes: Vec<String>,
    /// Target arc k0/n0 of the outer circle; the whole outer circle when absent.
    #[arg(long)]
    arc: Option<String>,
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    start: String,
    #[arg(long, default_value_t = 100_000)]
    walks: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_steps: u64,
    /// JSON to stdout (the default).
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    #[arg(long)]
    csv: bool,
    /// Also write an SVG of the domain to this path.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SeriesArgs {
    /// Bundle directory holding a lacunary series.
    #[arg(long, conflicts_with = "eps")]
    bundle: Option<PathBuf>,
    /// Ring weights ε_0,ε_1,... as exact rationals (e.g. 1,1/10).
    #[arg(long, value_delimiter = ',')]
    eps: Vec<String>,
}

#[derive(Args)]
struct CoeffsArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Inclusive index range a..b.
    #[arg(long, default_value = "0..64")]
    k: String,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WitnessArgs {
    #[command(flatten)]
    series: SeriesArgs,
    #[arg(long)]
    stage: usize,
    /// Threshold radius ρ' as an exact rational; defaults to r_{n-1} (3 for n = 0).
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long, default_value_t = 1 << 20)]
    k_max: u64,
}

#[derive(Args)]
struct SmoothArgs {
    #[command(flatten)]
    series: SeriesArgs,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, default_value_t = 1 << 16)]
    k_max: u64,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Probe stage m; defaults to the bundle's configured stage.
    #[arg(long)]
    stage: Option<usize>,
    /// Evaluation stage n < m; repeatable; defaults to the bundle's.
    #[arg(long = "eval")]
    eval: Vec<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Evidence table as CSV instead of the JSON report.
    #[arg(long)]
    csv: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    Domain,
    Poles,
    Coeffs,
    Probe,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, value_enum)]
    what: PlotKind,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Verify(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::StaleManifest(_) => Failure::Verify(e.to_string()),
            Error::Bundle(_) => Failure::Config(e.to_string()),
            e if e.is_config() => Failure::Config(e.to_string()),
            e => Failure::Internal(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

fn stdout(text: &str) -> CmdResult {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(v: &T) -> CmdResult {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure::Internal(e.to_string()))?;
    s.push('\n');
    stdout(&s)
}

fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(p, text)?;
        }
        None => stdout(text)?,
    }
    Ok(())
}

fn parse_hole(s: &str) -> Result<Hole, Failure> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(config_err(format!("--hole expects cx,cy,r, got {s:?}")));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.trim().parse().map_err(|_| config_err(format!("bad number {p:?} in --hole")))?;
    }
    Ok(Hole::new(ComplexPoint::new(v[0], v[1])?, v[2]))
}

fn parse_range(s: &str) -> Result<(u64, u64), Failure> {
    let (a, b) = s.split_once("..").ok_or_else(|| config_err(format!("--k expects a..b, got {s:?}")))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let lo = a.trim().parse().map_err(|_| config_err(format!("bad range start {a:?}")))?;
    let hi = b.trim().parse().map_err(|_| config_err(format!("bad range end {b:?}")))?;
    if lo > hi {
        return Err(config_err(format!("empty range {s}")));
    }
    Ok((lo, hi))
}

fn bundle_lacunary(b: &LoadedBundle) -> Result<LacunarySeries, Failure> {
    b.series()?.lacunary().ok_or_else(|| config_err("bundle series is not a lacunary series"))
}

fn load_series(args: &SeriesArgs) -> Result<LacunarySeries, Failure> {
    if let Some(dir) = &args.bundle {
        return bundle_lacunary(&read_bundle(dir)?);
    }
    if args.eps.is_empty() {
        return Err(config_err("give --bundle or --eps"));
    }
    let eps = args.eps.iter().map(|e| parse_rational(e)).collect::<hullforge::Result<Vec<BigRational>>>()?;
    Ok(LacunarySeries::new(eps)?)
}

fn cmd_construct(a: &ConstructArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| config_err(format!("{}: {e}", a.config.display())))?;
    let cfg = RunConfig::from_json(&text)?;
    let dir = a.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    if a.verify_only {
        let report = verify_bundle(&dir)?;
        print_json(&report)?;
        let bad: Vec<&str> = report
            .entries
            .iter()
            .filter(|e| !e.stored_valid || e.recomputed_valid != Some(e.stored_valid))
            .map(|e| e.id.as_str())
            .collect();
        if !report.flags_match || !report.all_valid {
            return Err(Failure::Verify(format!("certificates failed or changed: {}", bad.join(", "))));
        }
        return Ok(());
    }
    let bundle = assemble_counterexample(&cfg)?;
    write_bundle(&bundle, &dir)?;
    print_json(&bundle.manifest)?;
    if !bundle.valid() {
        return Err(Failure::Verify(format!("certificate failed: {}", bundle.manifest.failed.join(", "))));
    }
    Ok(())
}

fn cmd_hm(a: &HmArgs) -> CmdResult {
    let holes = a.holes.iter().map(|h| parse_hole(h)).collect::<Result<Vec<_>, _>>()?;
    let arc = match &a.arc {
        Some(s) => ArcSpec::parse(s)?,
        None => ArcSpec::new(0, 1)?,
    };
    let domain = PerforatedDisc::new_general(a.rho, holes, arc)?;
    let target = if a.arc.is_some() { TargetSet::arc(arc) } else { TargetSet::OuterCircle };
    let start = ComplexPoint::parse(&a.start)?;
    let cfg = WalkConfig { n_walks: a.walks, eps_boundary: a.eps, max_steps: a.max_steps, rng_seed: a.seed };
    cfg.validate(&domain)?;
    let est = estimate(&domain, start, &target, &cfg)?;
    if let Some(p) = &a.svg {
        emit(Some(p), &svg::domain_svg(a.rho, domain.holes(), arc))?;
    }
    if a.csv {
        return stdout(&format!(
            "value,stderr,hits,n_walks,seed,valid\n{:.17e},{:.17e},{},{},{},{}\n",
            est.value, est.stderr, est.hits, est.n_walks, est.seed, est.valid
        ));
    }
    print_json(&est)
}

fn cmd_coeffs(a: &CoeffsArgs) -> CmdResult {
    let (lo, hi) = parse_range(&a.k)?;
    let series = bundle_lacunary(&read_bundle(&a.bundle)?)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "numerator", "denominator", "decimal"]).map_err(|e| Failure::Internal(e.to_string()))?;
    for (k, r) in coefficient_rows(&series, lo, hi) {
        w.write_record([k.to_string(), r.num, r.den, r.decimal]).map_err(|e| Failure::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Internal(e.to_string()))?;
    emit(a.out.as_deref(), &String::from_utf8(bytes).expect("csv is utf-8"))
}

fn cmd_witness(a: &WitnessArgs) -> CmdResult {
    let series = load_series(&a.series)?;
    let threshold = match &a.threshold {
        Some(t) => parse_rational(t)?,
        None => default_threshold(a.stage),
    };
    let w = radius_witness(&series, a.stage, &threshold, a.k_max).map_err(|e| match e {
        Error::WitnessNotFound { .. } => Failure::Verify(e.to_string()),
        Error::Precondition(_) => Failure::Config(e.to_string()),
        e => e.into(),
    })?;
    print_json(&w.to_certificate())
}

fn cmd_smooth(a: &SmoothArgs) -> CmdResult {
    let series = load_series(&a.series)?;
    let cert = smoothness_constants(&series, a.order, a.k_max)?.to_certificate();
    print_json(&cert)?;
    if !cert.valid {
        return Err(Failure::Verify(format!("certificate failed: {}", cert.id)));
    }
    Ok(())
}

#[derive(Serialize)]
struct ProbeOutput {
    evidence: hullforge::hull_prober::EvidenceTable,
    reports: Vec<hullforge::hull_prober::TwoConstantReport>,
}

fn cmd_probe(a: &ProbeArgs) -> CmdResult {
    let b = read_bundle(&a.bundle)?;
    let file = b.series()?;
    let schedule: Schedule = b.json("schedule.json")?;
    let lac = file.lacunary();
    let source = match (&file, &lac) {
        (SeriesFile::Lacunary { anchor, .. }, Some(s)) => ProbeSource::Lacunary(s, *anchor),
        _ => ProbeSource::Poles(file.pole_series()),
    };
    let m = a.stage.unwrap_or(b.config.probe.stage);
    let eval = if a.eval.is_empty() { b.config.probe.eval_stages.clone() } else { a.eval.clone() };
    let stages: Vec<usize> = (source.min_stage().max(1)..=m.min(source.max_stage())).collect();
    let evidence = hull_evidence(source, &stages)?;
    if a.csv {
        stdout(&evidence.to_csv())?;
        return Ok(());
    }
    let probe = make_probe(source, m, a.alpha, ProbeKind::Plain)?;
    let mut reports = Vec::new();
    for n in eval {
        reports.push(two_constant_check(&probe, source, &schedule, n, &b.config.mc.walk(100_000 + n as u64))?);
    }
    let failed: Vec<String> = reports.iter().filter(|r| !r.pass).map(|r| format!("two-constant-m{}-n{}", r.probe_stage, r.stage)).collect();
    print_json(&ProbeOutput { evidence, reports })?;
    if !failed.is_empty() {
        return Err(Failure::Verify(format!("certificate failed: {}", failed.join(", "))));
    }
    Ok(())
}

fn cmd_plot(a: &PlotArgs) -> CmdResult {
    let b = read_bundle(&a.bundle)?;
    let name = match a.what {
        PlotKind::Domain => "plots/domain.svg",
        PlotKind::Poles => "plots/poles.svg",
        PlotKind::Coeffs => "plots/coeffs.svg",
        PlotKind::Probe => "plots/probe.svg",
    };
    let bytes = b.files.get(name).ok_or_else(|| config_err(format!("bundle has no {name}")))?;
    emit(a.out.as_deref(), &String::from_utf8_lossy(bytes))
}

fn run(cli: Cli) -> CmdResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(config_err("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Internal(e.to_string()))?;
    }
    match &cli.cmd {
        Cmd::Construct(a) => cmd_construct(a),
        Cmd::Hm(a) => cmd_hm(a),
        Cmd::Coeffs(a) => cmd_coeffs(a),
        Cmd::Witness(a) => cmd_witness(a),
        Cmd::Smooth(a) => cmd_smooth(a),
        Cmd::Probe(a) => cmd_probe(a),
        Cmd::Plot(a) => cmd_plot(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Verify(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(EXIT_VERIFY)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}
