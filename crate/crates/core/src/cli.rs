//! Command-line driver: configuration, subcommand dispatch and CSV/JSON emission.
//!
//! Exit codes: 0 success, 1 internal failure, 2 usage or domain error, 3 a check was violated.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::asymptotics::{
    bounds_weighted, classify_region, critical_sigma, moser_ledger, region_bounds, region_memberships, sweep,
    write_sweep_csv,
};
use crate::constructor::{
    build_bump_solution, check_bump_solution, make_xseq, measure_blowup, schedule_above_curve,
    schedule_exponential_pair, schedule_sharp_rate, schedule_superexponential, write_blowup_csv, BlowupReport,
    BumpCheck, SeedSequence, SingularSolution,
};
use crate::core_model::{gamma_kernel, Ball, Dimension, GridDensity, Measure, Point};
use crate::error::Error;
use crate::estimates::{
    ball_newtonian_probes, random_atomic_measures, random_bump_mixes, verify_ball_newtonian, verify_bessel_wolff,
    verify_bounded_v, verify_composite_on_ball, verify_composite_unit_ball, verify_havin_bounds, EstimateId,
    EstimateReport, VerifyConfig,
};
use crate::potentials::PotentialSpec;
use crate::report::Verdict;
use crate::repr_formula::{compose, default_ladder, estimate_point_mass, Decomposition};

/// Version stamped into every JSON document read or written.
pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VIOLATED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "nlpot",
    version,
    about = "Nonlinear potentials, pointwise estimates and singular-solution constructions"
)]
pub struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for output files; without it the main artifact goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub rings: Option<usize>,
    #[arg(long, global = true)]
    pub probes: Option<usize>,
    /// Override any configuration key, e.g. --set lambda=4.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a potential of a measure at probe points.
    Potential(PotentialArgs),
    /// Sample one pointwise estimate and report the fitted constant.
    Verify {
        /// Estimate name, e.g. wolff-below-v.
        estimate: String,
    },
    /// Build a singular solution, check it and measure its blow-up rate.
    Construct {
        /// One of: bump, superexponential, exponential-pair, sharp-rate, above-curve.
        kind: String,
    },
    /// Region and bound descriptors for (lambda, sigma).
    Classify,
    /// Region and exponents on a grid of (lambda, sigma).
    Sweep,
    /// Integrability ledger for (n, lambda, sigma).
    Moser,
    /// Representation formula: compose u or recover the point mass.
    Repr(ReprArgs),
}

#[derive(Debug, Args)]
pub struct PotentialArgs {
    /// Operator spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Measure JSON.
    #[arg(long)]
    pub measure: PathBuf,
    /// Probe points JSON: {"schema_version": 1, "points": [[...], ...]}.
    #[arg(long)]
    pub points: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReprArgs {
    /// compose or mass.
    pub action: String,
    /// Decomposition JSON.
    #[arg(long)]
    pub decomposition: PathBuf,
    /// Probe points JSON for compose; defaults to a radial ladder on the first axis.
    #[arg(long)]
    pub points: Option<PathBuf>,
}

/// Documented experiment keys with their defaults.
pub const PARAM_KEYS: &[(&str, f64, &str)] = &[
    ("lambda", 4.0, "exponent of v in the equation for u"),
    ("sigma", 2.2, "exponent of u in the equation for v"),
    ("alpha", 1.0, "potential order"),
    ("weight_alpha", 0.0, "weight exponent |x|^(-a) in the equation for u"),
    ("weight_beta", 0.0, "weight exponent |x|^(-b) in the equation for v"),
    ("p", 2.0, "nonlinear potential exponent"),
    ("c", 1.0, "exponential damping of Bessel-type potentials"),
    ("s", 1.0, "Lebesgue exponent of the norm side"),
    ("k", 1.0, "assumed bound on V for the bounded-V estimates"),
    ("radius", 1.0, "ball radius for ball estimates"),
    ("eps", 0.01, "slack in bound exponents"),
    ("count", 20.0, "number of random inputs"),
    ("rho", 0.2, "ratio |x_{j+1}|/|x_j| of the point sequence"),
    ("first_norm", 0.2, "|x_1|"),
    ("points", 6.0, "length of the point sequence"),
    ("phi_power", 1.0, "weight phi(r) = r^a for the bump construction"),
    ("psi_power", 1.0, "target rate psi(r) = r^a"),
    ("growth_power", 2.0, "exponent q in F(t) = exp(t^q) or h(t) = t^q"),
    ("h_power", 1.0, "target h(r) = r^(-a) for the above-curve construction"),
    ("factor", 2.0, "growth factor for the divergence verdict"),
    ("max", 6.0, "upper end of the sweep range"),
    ("steps", 50.0, "sweep points per axis"),
    ("samples_per_ball", 20.0, "check samples inside each bump"),
    ("ladder_points", 12.0, "radii on the recovery ladder"),
];

/// Resolved configuration: defaults, then the config file, then --set, then explicit flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub n: usize,
    pub grid: usize,
    pub rings: usize,
    pub probes: usize,
    pub seed: u64,
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub params: BTreeMap<String, f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 3,
            grid: 24,
            rings: 512,
            probes: 64,
            seed: 1,
            threads: 0,
            out: None,
            params: PARAM_KEYS.iter().map(|(k, v, _)| (k.to_string(), *v)).collect(),
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Internal(String),
    Lib(Error),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Internal(_) | CliError::Lib(Error::Nonconvergence(_)) => EXIT_INTERNAL,
            CliError::Lib(_) => EXIT_USAGE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

impl RunConfig {
    /// Applies one key = value pair.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let bad = |what: &str| CliError::Usage(format!("config key {key}: expected {what}, got {value:?}"));
        let int = || value.parse::<usize>().map_err(|_| bad("a nonnegative integer"));
        match key {
            "n" => self.n = int()?,
            "grid" => self.grid = int()?,
            "rings" => self.rings = int()?,
            "probes" => self.probes = int()?,
            "threads" => self.threads = int()?,
            "seed" => self.seed = value.parse().map_err(|_| bad("a nonnegative integer"))?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ if self.params.contains_key(key) => {
                let v: f64 = value.parse().map_err(|_| bad("a number"))?;
                self.params.insert(key.to_string(), v);
            }
            _ => return usage(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    /// Parses the flat format: one `key = value` per line, `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> CliResult<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return usage(format!("{origin}:{}: expected key = value", i + 1));
            };
            self.set(k.trim(), v.trim()).map_err(|e| CliError::Usage(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.n < 2 {
            return usage("n must be at least 2");
        }
        if self.grid < 2 || self.probes == 0 || self.rings < 16 {
            return usage("grid >= 2, probes >= 1 and rings >= 16 are required");
        }
        Ok(())
    }

    pub fn param(&self, key: &str) -> f64 {
        self.params[key]
    }

    fn count(&self, key: &str) -> CliResult<usize> {
        let v = self.param(key);
        if !(v >= 1.0 && v.fract() == 0.0) {
            return usage(format!("{key} must be a positive integer, got {v}"));
        }
        Ok(v as usize)
    }

    fn verify_config(&self) -> VerifyConfig {
        VerifyConfig { grid: self.grid, rings: self.rings, probes: self.probes, seed: self.seed }
    }
}

fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = read_file(path)?;
        cfg.apply_text(&text, &path.display().to_string())?;
    }
    for kv in &cli.set {
        let Some((k, v)) = kv.split_once('=') else {
            return usage(format!("--set expects KEY=VALUE, got {kv:?}"));
        };
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(g) = cli.grid {
        cfg.grid = g;
    }
    if let Some(r) = cli.rings {
        cfg.rings = r;
    }
    if let Some(p) = cli.probes {
        cfg.probes = p;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

/// A JSON document carrying `schema_version`.
#[derive(Debug, Serialize, Deserialize)]
struct Versioned<T> {
    schema_version: u32,
    #[serde(flatten)]
    body: T,
}

fn read_versioned<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_file(path)?;
    let doc: Versioned<T> = serde_json::from_str(&text).map_err(|e| {
        CliError::Lib(Error::Parse(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column())))
    })?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(CliError::Lib(Error::Parse(format!(
            "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
            path.display(),
            doc.schema_version
        ))));
    }
    Ok(doc.body)
}

#[derive(Debug, Deserialize)]
struct PointList {
    points: Vec<Vec<f64>>,
}

fn read_points(path: &Path) -> CliResult<Vec<Point>> {
    let list: PointList = read_versioned(path)?;
    Ok(list.points.into_iter().map(Point::new).collect::<crate::Result<Vec<_>>>()?)
}

fn versioned_json(body: serde_json::Value) -> String {
    let mut doc = serde_json::Map::new();
    doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
    if let serde_json::Value::Object(m) = body {
        doc.extend(m);
    }
    let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(doc)).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn to_value<T: Serialize>(v: &T) -> CliResult<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| CliError::Internal(format!("serialization failed: {e}")))
}

/// Writes artifacts into the output directory, or prints the primary one to stdout.
struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    fn emit(&self, name: &str, content: &str, primary: bool) -> CliResult<()> {
        match &self.dir {
            Some(d) => {
                fs::create_dir_all(d).map_err(|e| CliError::Internal(format!("cannot create {}: {e}", d.display())))?;
                let path = d.join(name);
                fs::write(&path, content)
                    .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
                to_stdout(&format!("{}\n", path.display()))
            }
            None if primary => to_stdout(content),
            None => Ok(()),
        }
    }
}

/// A closed pipe on stdout ends the output quietly instead of panicking.
fn to_stdout(text: &str) -> CliResult<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(CliError::Internal(format!("cannot write stdout: {e}")))
        }
        _ => Ok(()),
    }
}

fn csv_string(f: impl FnOnce(&mut Vec<u8>) -> CliResult<()>) -> CliResult<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    String::from_utf8(buf).map_err(|e| CliError::Internal(e.to_string()))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Internal(format!("csv output failed: {e}"))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.code();
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_INTERNAL;
        }
    };
    match pool.install(|| dispatch(&cli.command, &cfg)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> CliResult<i32> {
    let out = Output { dir: cfg.out.clone() };
    match cmd {
        Command::Potential(a) => cmd_potential(a, cfg, &out),
        Command::Verify { estimate } => cmd_verify(estimate, cfg, &out),
        Command::Construct { kind } => cmd_construct(kind, cfg, &out),
        Command::Classify => cmd_classify(cfg, &out),
        Command::Sweep => cmd_sweep(cfg, &out),
        Command::Moser => cmd_moser(cfg, &out),
        Command::Repr(a) => cmd_repr(a, cfg, &out),
    }
}

fn cmd_potential(a: &PotentialArgs, cfg: &RunConfig, out: &Output) -> CliResult<i32> {
    let mut spec: PotentialSpec = read_versioned(&a.spec)?;
    if spec.quad_rings == crate::potentials::DEFAULT_RINGS {
        spec.quad_rings = cfg.rings;
    }
    let mu: Measure = read_versioned(&a.measure)?;
    mu.validate()?;
    let xs = read_points(&a.points)?;
    let values = spec.evaluate(&mu, &xs)?;
    let n = xs.first().map_or(0, Point::dim);
    let text = csv_string(|buf| {
        let mut w = csv::Writer::from_writer(buf);
        let mut header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        header.extend(["value".to_string(), "error_estimate".to_string()]);
        w.write_record(&header).map_err(csv_err)?;
        for (x, v) in xs.iter().zip(&values) {
            let mut row: Vec<String> = x.coords().iter().map(|c| c.to_string()).collect();
            row.push(v.value.to_string());
            row.push(v.error_estimate.to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::Internal(e.to_string()))
    })?;
    out.emit("potential.csv", &text, true)?;
    Ok(EXIT_OK)
}

fn grids_on(n: usize, cfg: &RunConfig, center: &Point, half: f64) -> CliResult<Vec<GridDensity>> {
    random_bump_mixes(n, cfg.count("count")?, cfg.seed)
        .iter()
        .map(|m| m.sample(center, half, cfg.grid).map_err(CliError::from))
        .collect()
}

fn pick(reports: Vec<EstimateReport>, id: EstimateId) -> CliResult<EstimateReport> {
    let names: Vec<&str> = reports.iter().map(|r| r.estimate_id.name()).collect();
    let joined = names.join(", ");
    reports
        .into_iter()
        .find(|r| r.estimate_id == id)
        .ok_or_else(|| CliError::Usage(format!("{id} does not apply to these parameters; applicable: {joined}")))
}

fn require_branch(id: EstimateId, branch: EstimateId) -> CliResult<()> {
    if id != branch {
        return usage(format!("{id} does not apply to these parameters; the applicable form is {branch}"));
    }
    Ok(())
}

/// Runs the verifier for one estimate with parameters from the configuration.
pub fn verify_estimate(id: EstimateId, cfg: &RunConfig) -> CliResult<EstimateReport> {
    use EstimateId::*;
    let n = cfg.n;
    let vc = cfg.verify_config();
    let (sigma, s, alpha, p, c) =
        (cfg.param("sigma"), cfg.param("s"), cfg.param("alpha"), cfg.param("p"), cfg.param("c"));
    let origin = Point::origin(n);
    Ok(match id {
        CompositePower | CompositeLog => {
            require_branch(id, crate::estimates::composite_branch(n, sigma, s)?)?;
            verify_composite_unit_ball(&grids_on(n, cfg, &origin, 1.0)?, sigma, s)?
        }
        BallCompositePower | BallCompositeLog => {
            require_branch(id, crate::estimates::ball_composite_branch(n, sigma)?)?;
            let r = cfg.param("radius");
            let ball = Ball::new(origin.clone(), r)?;
            verify_composite_on_ball(&grids_on(n, cfg, &origin, r)?, &ball, sigma)?
        }
        WolffBelowV | VBelowWolff | VBelowMajorant => {
            let mus = random_atomic_measures(n, cfg.count("count")?, cfg.seed);
            pick(verify_bessel_wolff(&mus, alpha, p, c, &vc)?, id)?
        }
        BoundedVPower | BoundedVLog => {
            require_branch(id, crate::estimates::bounded_v_branch(n, alpha, p)?)?;
            let mus: Vec<Measure> = grids_on(n, cfg, &origin, 1.0)?.into_iter().map(Measure::Grid).collect();
            verify_bounded_v(&mus, alpha, p, cfg.param("k"), c, &vc)?
        }
        HavinMaximal | HavinSup | CriticalMaximal | CriticalSup => {
            let fs = grids_on(n, cfg, &origin, 1.0)?;
            let rep = verify_havin_bounds(&fs, alpha, p, s, &vc)?;
            require_branch(id, rep.estimate_id)?;
            rep
        }
        BallNewtonian => {
            let r = cfg.param("radius");
            let probes = ball_newtonian_probes(&origin, r, cfg.probes, cfg.seed);
            verify_ball_newtonian(&origin, r, &probes)?
        }
    })
}

fn cmd_verify(estimate: &str, cfg: &RunConfig, out: &Output) -> CliResult<i32> {
    let id: EstimateId = estimate.parse().map_err(|_| {
        let known: Vec<&str> = EstimateId::ALL.iter().map(|i| i.name()).collect();
        CliError::Usage(format!("unknown estimate {estimate:?}; known: {}", known.join(", ")))
    })?;
    let rep = verify_estimate(id, cfg)?;
    let csv_text = csv_string(|buf| rep.write_csv(buf).map_err(csv_err))?;
    out.emit(&format!("verify_{}.json", id.name()), &versioned_json(json!({ "report": to_value(&rep)? })), true)?;
    out.emit(&format!("verify_{}.csv", id.name()), &csv_text, false)?;
    Ok(if rep.verdict == Verdict::Violated { EXIT_VIOLATED } else { EXIT_OK })
}

/// The constructions selectable from the command line.
pub const CONSTRUCTIONS: &[&str] = &["bump", "superexponential", "exponential-pair", "sharp-rate", "above-curve"];

#[derive(Debug, Serialize)]
struct Built {
    role: &'static str,
    solution: SingularSolution,
    check: BumpCheck,
    blowup: BlowupReport,
}

fn finish(role: &'static str, seed: SeedSequence, h: &dyn Fn(f64) -> f64, cfg: &RunConfig) -> CliResult<Built> {
    let solution = build_bump_solution(seed)?;
    let check = check_bump_solution(&solution, cfg.count("samples_per_ball")?, cfg.seed);
    let blowup = measure_blowup(&solution, h, cfg.param("factor"));
    Ok(Built { role, solution, check, blowup })
}

fn cmd_construct(kind: &str, cfg: &RunConfig, out: &Output) -> CliResult<i32> {
    let n = cfg.n;
    let dim = Dimension::new(n)?;
    let xs = make_xseq(n, cfg.param("rho"), cfg.param("first_norm"), cfg.count("points")?)?;
    let (lambda, sigma) = (cfg.param("lambda"), cfg.param("sigma"));
    let q = cfg.param("growth_power");
    let psi_pow = cfg.param("psi_power");
    let psi = move |r: f64| r.powf(psi_pow);
    let gamma = move |r: f64| gamma_kernel(r, dim).unwrap_or(f64::NAN);
    let mut extra = json!({});
    let built: Vec<Built> = match kind {
        "bump" => {
            let a = cfg.param("phi_power");
            let lr = xs.iter().map(|x| (x.norm() / 2.0).ln()).collect();
            let phi = xs.iter().map(|x| x.norm().powf(a)).collect();
            vec![finish("u", SeedSequence::new(xs, lr, phi)?, &gamma, cfg)?]
        }
        "superexponential" => {
            if n != 2 {
                return usage("superexponential construction is planar; set n = 2");
            }
            let lf = move |t: f64| t.powf(q);
            let seed = schedule_superexponential(&lf, &lf, &|r: f64| (1.0 / r).ln(), &xs)?;
            vec![finish("u", seed, &gamma, cfg)?]
        }
        "exponential-pair" => {
            let seed = schedule_exponential_pair(&move |t: f64| t.powf(q), &psi, &xs)?;
            vec![finish("u", seed, &gamma, cfg)?]
        }
        "sharp-rate" => {
            let seed = schedule_sharp_rate(lambda, &psi, &xs)?;
            let e = (n as f64 - 2.0).powi(2) * lambda / n as f64;
            vec![finish("u", seed, &move |r: f64| psi(r) * r.powf(-e), cfg)?]
        }
        "above-curve" => {
            let hp = cfg.param("h_power");
            let h = move |r: f64| r.powf(-hp);
            let pair = schedule_above_curve(lambda, sigma, &h, &xs)?;
            extra = json!({
                "alpha": pair.alpha,
                "beta": pair.beta,
                "sigma_used": pair.sigma_used,
                "identity_defect": pair.identity_defect,
                "cross_bound": pair.cross_bound,
            });
            vec![finish("u", pair.u_seed, &h, cfg)?, finish("v", pair.v_seed, &h, cfg)?]
        }
        other => return usage(format!("unknown construction {other:?}; known: {}", CONSTRUCTIONS.join(", "))),
    };
    let all_pass = built.iter().all(|b| b.check.all_pass());
    let body = json!({ "construction": kind, "parameters": extra, "solutions": to_value(&built)?, "all_checks_pass": all_pass });
    out.emit("construction.json", &versioned_json(body), true)?;
    for b in &built {
        let text = csv_string(|buf| write_blowup_csv(&b.blowup.rows, buf).map_err(CliError::from))?;
        out.emit(&format!("rates_{}.csv", b.role), &text, false)?;
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_VIOLATED })
}

fn cmd_classify(cfg: &RunConfig, out: &Output) -> CliResult<i32> {
    let (lambda, sigma, n) = (cfg.param("lambda"), cfg.param("sigma"), cfg.n);
    if !(sigma >= 0.0 && sigma <= lambda) {
        return usage(format!("need 0 <= sigma <= lambda, got sigma = {sigma}, lambda = {lambda}"));
    }
    let region = classify_region(lambda, sigma, n)?;
    let mut body = json!({
        "n": n,
        "lambda": lambda,
        "sigma": sigma,
        "region": region.to_string(),
        "memberships": region_memberships(lambda, sigma, n)?,
        "critical_sigma": critical_sigma(lambda, n)?,
        "bounds": to_value(&region_bounds(lambda, sigma, n)?)?,
    });
    // the weighted split only applies below the critical curve
    if let Ok(w) =
        bounds_weighted(lambda, sigma, n, cfg.param("weight_alpha"), cfg.param("weight_beta"), cfg.param("eps"))
    {
        body["weighted_bounds"] = json!({
            "case": w.case,
            "on_boundary": w.on_boundary,
            "u": w.u.to_string(),
            "v": w.v.to_string(),
        });
    }
    out.emit("classify.json", &versioned_json(body), true)?;
    Ok(EXIT_OK)
}

fn cmd_sweep(cfg: &RunConfig, out: &Output) -> CliResult<i32> {
    let rows = sweep(cfg.n, cfg.param("max"), cfg.count("steps")?)?;
    let text = csv_string(|buf| write_sweep_csv(&rows, buf).map_err(csv_err))?;
    out.emit("sweep.csv", &text, true)?;
    Ok(EXIT_OK)
}

fn cmd_moser(cfg: &RunConfig, out: &Output) -> CliResult<i32> {
    let trace = moser_ledger(cfg.n, cfg.param("lambda"), cfg.param("sigma"))?;
    out.emit("moser.json", &versioned_json(json!({ "trace": to_value(&trace)? })), true)?;
    Ok(EXIT_OK)
}

fn cmd_repr(a: &ReprArgs, cfg: &RunConfig, out: &Output) -> CliResult<i32> {
    let dec: Decomposition = read_versioned(&a.decomposition)?;
    dec.validate()?;
    let top = dec.epsilon.min(0.1).log10().abs();
    let ladder = default_ladder(top.max(1.0), top.max(1.0) + 3.0, cfg.count("ladder_points")?);
    match a.action.as_str() {
        "compose" => {
            let xs = match &a.points {
                Some(p) => read_points(p)?,
                None => ladder.iter().map(|&r| Point::on_axis(dec.n, r)).collect(),
            };
            let text = csv_string(|buf| {
                let mut w = csv::Writer::from_writer(buf);
                let mut header: Vec<String> = (0..dec.n).map(|i| format!("x{i}")).collect();
                header.push("u".into());
                w.write_record(&header).map_err(csv_err)?;
                for x in &xs {
                    let mut row: Vec<String> = x.coords().iter().map(|c| c.to_string()).collect();
                    row.push(compose(&dec, x)?.to_string());
                    w.write_record(&row).map_err(csv_err)?;
                }
                w.flush().map_err(|e| CliError::Internal(e.to_string()))
            })?;
            out.emit("compose.csv", &text, true)?;
            Ok(EXIT_OK)
        }
        "mass" => {
            let u = |x: &Point| compose(&dec, x).unwrap_or(f64::NAN);
            let fit = estimate_point_mass(&u, dec.n, &ladder)?;
            out.emit("mass.json", &versioned_json(json!({ "fit": to_value(&fit)?, "ladder": ladder })), true)?;
            Ok(EXIT_OK)
        }
        other => usage(format!("unknown repr action {other:?}; expected compose or mass")),
    }
}
