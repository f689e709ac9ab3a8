//! Command-line pipeline: construct, verify, assemble, evolve, report.
//!
//! Every stage reads and writes flat `key=value` files in the output directory.
//! Exit codes: 0 all checks pass, 1 a check failed, 2 usage error or missing input.

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::assembly::{assemble_with_radius_search, check_bundle, AssemblyBundle, AssemblyOptions};
use crate::construction::{origin_rate, solve_steepness, ConstructionParams};
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::polyjet::Poly;
use crate::solver::{default_horizon, discretize, evolve, EvolveOptions};
use crate::verifier::{check_condition1, verify, SampleSpec};

pub const CONFIG_FILE: &str = "config.txt";
pub const PARAMS_FILE: &str = "params.txt";
pub const POLY_FILE: &str = "poly.txt";
pub const VERIFY_FILE: &str = "verify.txt";
pub const BUNDLE_FILE: &str = "bundle.txt";
pub const ASSEMBLY_FILE: &str = "assembly.txt";
pub const EVOLVE_FILE: &str = "evolve.txt";
pub const REPORT_FILE: &str = "report.txt";
pub const METADATA_FILE: &str = "metadata.txt";

/// Margin passed to the steepness search when no steepness is given.
pub const STEEPNESS_MARGIN: f64 = 0.5;
/// Radius halvings allowed during assembly.
pub const ASSEMBLY_HALVINGS: u32 = 30;
/// Largest accepted `clamp_norm / max_v`.
pub const CLAMP_TOL: f64 = 1e-12;
/// Accepted relative deviation of the measured initial rate from the closed form.
pub const RATE_TOL: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    Fail = 1,
    Usage = 2,
}

#[derive(Debug, Parser)]
#[command(
    name = "pme-concavity",
    version,
    about = "Construct, verify and simulate concavity loss for the porous medium equation"
)]
pub struct Cli {
    /// Flat key=value config file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory shared by all stages.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Offset into the deterministic sample sequences.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Pick the family and steepness, write parameters and polynomial.
    Construct,
    /// Check conditions 1-3 on the constructed polynomial.
    Verify,
    /// Build the compactly supported initial pressure.
    Assemble,
    /// Evolve the initial pressure and probe concavity at the origin.
    Evolve,
    /// Aggregate all stage reports.
    Report,
}

#[derive(Clone, Debug, Default, Args)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub m: Option<f64>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub steepness: Option<f64>,
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    /// Comma separated odd grid resolutions.
    #[arg(long, global = true, value_delimiter = ',')]
    pub resolutions: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    #[arg(long, global = true)]
    pub probe_stride: Option<usize>,
    /// Sample count for the sampled checks.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Write initial and final grid snapshots.
    #[arg(long, global = true)]
    pub snapshots: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub alpha: Option<f64>,
    pub m: Option<f64>,
    pub n: Option<usize>,
    pub steepness: Option<f64>,
    pub rho: Option<f64>,
    pub resolutions: Vec<usize>,
    /// `None` uses [`default_horizon`] at the finest resolution.
    pub horizon: Option<f64>,
    pub probe_stride: usize,
    pub samples: usize,
    pub seed: u64,
    pub snapshots: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: None,
            m: None,
            n: None,
            steepness: None,
            rho: None,
            resolutions: vec![49, 65],
            horizon: None,
            probe_stride: 1,
            samples: 10_000,
            seed: 0,
            snapshots: false,
            out: PathBuf::from("out"),
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| Error::Parse { line: 0, msg: format!("bad resolution '{p}'") }))
        .collect()
}

impl RunConfig {
    /// Applies the entries of a config file. Unknown keys are rejected.
    pub fn apply_kv(&mut self, kv: &KeyValues) -> Result<()> {
        for (k, _) in kv.entries() {
            match k.as_str() {
                "alpha" => self.alpha = Some(kv.f64(k)?),
                "m" => self.m = Some(kv.f64(k)?),
                "n" => self.n = Some(kv.usize(k)?),
                "steepness" => self.steepness = Some(kv.f64(k)?),
                "rho" => self.rho = Some(kv.f64(k)?),
                "resolutions" => self.resolutions = parse_list(kv.require(k)?)?,
                "horizon" => self.horizon = Some(kv.f64(k)?),
                "probe_stride" => self.probe_stride = kv.usize(k)?,
                "samples" => self.samples = kv.usize(k)?,
                "seed" => {
                    self.seed = kv.require(k)?.parse().map_err(|_| Error::Parse { line: 0, msg: "bad seed".into() })?
                }
                "snapshots" => self.snapshots = kv.require(k)? == "true",
                "out" => self.out = PathBuf::from(kv.require(k)?),
                other => return Err(Error::Parse { line: 0, msg: format!("unknown config key '{other}'") }),
            }
        }
        Ok(())
    }

    pub fn apply_flags(&mut self, cli: &Cli) {
        let o = &cli.overrides;
        self.alpha = o.alpha.or(self.alpha);
        self.m = o.m.or(self.m);
        self.n = o.n.or(self.n);
        self.steepness = o.steepness.or(self.steepness);
        self.rho = o.rho.or(self.rho);
        if let Some(r) = &o.resolutions {
            self.resolutions = r.clone();
        }
        self.horizon = o.horizon.or(self.horizon);
        self.probe_stride = o.probe_stride.unwrap_or(self.probe_stride);
        self.samples = o.samples.unwrap_or(self.samples);
        self.seed = cli.seed.unwrap_or(self.seed);
        self.snapshots |= o.snapshots;
        if let Some(out) = &cli.out {
            self.out = out.clone();
        }
    }

    /// Range checks that do not need the construction.
    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) || a == 0.5 {
                return Err(Error::FamilyRange { alpha: a, what: "[0, 1] minus the excluded value 1/2" });
            }
        }
        if let Some(m) = self.m {
            if !(m > 1.0) {
                return Err(Error::InvalidParameter(format!("m = {m} must exceed 1")));
            }
        }
        if let Some(n) = self.n {
            if n < 2 {
                return Err(Error::InvalidParameter(format!("n = {n} must be at least 2")));
            }
        }
        if self.resolutions.is_empty() {
            return Err(Error::InvalidParameter("no resolutions".into()));
        }
        if let Some(&r) = self.resolutions.iter().find(|r| *r % 2 == 0) {
            return Err(Error::Resolution(r));
        }
        if self.probe_stride == 0 || self.samples == 0 {
            return Err(Error::InvalidParameter("probe_stride and samples must be positive".into()));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |v| format!("{v:?}"));
        kv.push("alpha", opt(self.alpha));
        kv.push("m", opt(self.m));
        kv.push("n", self.n.map_or("none".to_string(), |n| n.to_string()));
        kv.push("steepness", opt(self.steepness));
        kv.push("rho", opt(self.rho));
        kv.push("resolutions", self.resolutions.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(","));
        kv.push("horizon", opt(self.horizon));
        kv.push("probe_stride", self.probe_stride);
        kv.push("samples", self.samples);
        kv.push("seed", self.seed);
        kv.push("snapshots", self.snapshots);
        kv
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// A stage failed for a reason that maps to an exit status.
#[derive(Debug)]
struct Failure {
    status: ExitStatus,
    message: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { status: ExitStatus::Usage, message: msg.into() }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::FamilyRange { .. } | Error::InvalidParameter(_) | Error::Resolution(_) | Error::Parse { .. } => {
                ExitStatus::Usage
            }
            _ => ExitStatus::Fail,
        };
        Failure { status, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

type StageResult = std::result::Result<ExitStatus, Failure>;

fn read_input(cfg: &RunConfig, name: &str) -> std::result::Result<KeyValues, Failure> {
    let p = cfg.path(name);
    if !p.exists() {
        return Err(usage(format!("missing input {}", p.display())));
    }
    Ok(KeyValues::read(&p)?)
}

fn load_poly(cfg: &RunConfig) -> std::result::Result<Poly, Failure> {
    let p = cfg.path(POLY_FILE);
    let text = std::fs::read_to_string(&p).map_err(|_| usage(format!("missing input {}", p.display())))?;
    Ok(Poly::from_text(&text)?)
}

fn status_of(pass: bool) -> ExitStatus {
    if pass {
        ExitStatus::Pass
    } else {
        ExitStatus::Fail
    }
}

pub fn cmd_construct(cfg: &RunConfig) -> Result<ExitStatus> {
    let alpha = cfg.alpha.ok_or_else(|| Error::InvalidParameter("--alpha is required".into()))?;
    let m = cfg.m.ok_or_else(|| Error::InvalidParameter("--m is required".into()))?;
    let n = cfg.n.ok_or_else(|| Error::InvalidParameter("--n is required".into()))?;
    let steepness = match cfg.steepness {
        Some(s) => s,
        None => solve_steepness(alpha, m, n, STEEPNESS_MARGIN)?,
    };
    let mut params = ConstructionParams::new(alpha, m, n, steepness)?;
    if let Some(r) = cfg.rho {
        params.rho = r;
    }
    params.validate()?;
    let w = params.build()?;
    std::fs::create_dir_all(&cfg.out)?;
    cfg.to_kv().write(&cfg.path(CONFIG_FILE))?;
    let mut kv = params.to_kv();
    kv.extend("rate.", &origin_rate(&params)?.to_kv());
    kv.write(&cfg.path(PARAMS_FILE))?;
    std::fs::write(cfg.path(POLY_FILE), w.to_text())?;
    Ok(ExitStatus::Pass)
}

fn verify_stage(cfg: &RunConfig) -> StageResult {
    let params = ConstructionParams::from_kv(&read_input(cfg, PARAMS_FILE)?)?;
    let w = load_poly(cfg)?;
    if w.dim() != params.n {
        return Err(usage(format!("polynomial has {} variables, params say n = {}", w.dim(), params.n)));
    }
    let spec = SampleSpec { count: cfg.samples, offset: cfg.seed, ..SampleSpec::default() };
    let (kv, pass) = match verify(&w, &params, cfg.rho, &spec) {
        Ok(rep) => (rep.to_kv(), rep.all_pass()),
        // the polynomial is not the family member the params describe
        Err(e @ Error::InternalInconsistency { .. }) => {
            let c1 = check_condition1(&w);
            let mut kv = KeyValues::new();
            kv.extend("params.", &params.to_kv());
            kv.push("condition1.pass", c1.pass);
            kv.extend("condition1.origin.", &c1.report.to_kv());
            kv.push("error", e);
            kv.push("all_pass", false);
            (kv, false)
        }
        Err(e) => return Err(e.into()),
    };
    kv.write(&cfg.path(VERIFY_FILE))?;
    Ok(status_of(pass))
}

fn verified_params(cfg: &RunConfig) -> std::result::Result<ConstructionParams, Failure> {
    let v = read_input(cfg, VERIFY_FILE)?;
    if v.get("all_pass") != Some("true") {
        return Err(Failure { status: ExitStatus::Fail, message: "verification report is failing".into() });
    }
    let mut pk = KeyValues::new();
    for (k, val) in v.entries() {
        if let Some(rest) = k.strip_prefix("params.") {
            pk.push(rest, val);
        }
    }
    Ok(ConstructionParams::from_kv(&pk)?)
}

fn assemble_stage(cfg: &RunConfig) -> StageResult {
    let params = verified_params(cfg)?;
    let w = load_poly(cfg)?;
    let opts = AssemblyOptions { samples: cfg.samples, offset: cfg.seed, ..AssemblyOptions::default() };
    let bundle = assemble_with_radius_search(&params, &w, &opts, ASSEMBLY_HALVINGS)?;
    let rep = check_bundle(&bundle, cfg.samples, cfg.seed)?;
    let pass = rep.pass(opts.threshold);
    bundle.to_manifest().write(&cfg.path(BUNDLE_FILE))?;
    let mut kv = rep.to_kv();
    kv.push_f64("rho", bundle.rho());
    kv.push_f64("amplitude", bundle.amplitude());
    kv.push("pass", pass);
    kv.write(&cfg.path(ASSEMBLY_FILE))?;
    Ok(status_of(pass))
}

fn evolve_stage(cfg: &RunConfig) -> StageResult {
    verified_params(cfg)?;
    let bundle = AssemblyBundle::from_manifest(&read_input(cfg, BUNDLE_FILE)?)?;
    let finest = *cfg.resolutions.iter().max().expect("validated");
    let horizon = match cfg.horizon {
        Some(t) => t,
        None => default_horizon(&bundle, finest)?,
    };
    let expected = bundle.expected_origin_rate()?;
    let mut kv = KeyValues::new();
    kv.push_f64("horizon", horizon);
    kv.push_f64("expected_rate", expected);
    kv.push("resolutions", cfg.resolutions.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(","));
    let mut pass = true;
    let mut detections = Vec::new();
    for &res in &cfg.resolutions {
        let dir = cfg.path(&format!("res{res}"));
        std::fs::create_dir_all(&dir)?;
        let field = discretize(&bundle, res)?;
        if cfg.snapshots {
            field.write_snapshot(&dir.join("initial.bin"))?;
        }
        let opts = EvolveOptions::new(horizon, cfg.probe_stride);
        let (end, series) = evolve(field, bundle.params.m, bundle.params.alpha, &opts)?;
        if cfg.snapshots {
            end.write_snapshot(&dir.join("final.bin"))?;
        }
        series.write_csv(&dir.join("probe.csv"))?;
        let interior = series.support_at_boundary.is_none();
        let clamp = series.relative_clamp() < CLAMP_TOL;
        let ratio = series.initial_rate().map(|r| r / expected);
        kv.extend(&format!("res{res}."), &series.to_kv());
        kv.push(format!("res{res}.check.interior"), interior);
        kv.push(format!("res{res}.check.clamp"), clamp);
        match ratio {
            Some(r) => kv.push_f64(format!("res{res}.rate_ratio"), r),
            None => kv.push(format!("res{res}.rate_ratio"), "none"),
        };
        pass &= interior && clamp;
        detections.push(series.detection.map(|d| d.0));
    }
    let consistent = detections.iter().all(Option::is_some) && detections.windows(2).all(|w| w[1] <= w[0]);
    kv.push("detection.consistent", consistent);
    kv.push("pass", pass);
    kv.write(&cfg.path(EVOLVE_FILE))?;
    Ok(status_of(pass))
}

/// Check lines collected by the report: `(name, pass)`.
pub fn report_checks(verify: &KeyValues, assembly: Option<&KeyValues>, evolve: &KeyValues) -> Vec<(String, bool)> {
    let flag = |kv: &KeyValues, k: &str| kv.get(k) == Some("true");
    let mut checks = vec![
        ("verify.condition1".to_string(), flag(verify, "condition1.pass")),
        ("verify.condition2".to_string(), flag(verify, "condition2.pass")),
        ("verify.condition3".to_string(), flag(verify, "condition3.pass")),
    ];
    if let Some(a) = assembly {
        checks.push(("assembly".into(), flag(a, "pass")));
    }
    let resolutions: Vec<&str> = evolve.get("resolutions").map(|s| s.split(',').collect()).unwrap_or_default();
    for r in resolutions {
        checks.push((format!("evolve.res{r}.interior"), flag(evolve, &format!("res{r}.check.interior"))));
        checks.push((format!("evolve.res{r}.clamp"), flag(evolve, &format!("res{r}.check.clamp"))));
        let ratio = evolve.f64(&format!("res{r}.rate_ratio")).unwrap_or(f64::NAN);
        checks.push((format!("evolve.res{r}.initial_rate"), (ratio - 1.0).abs() <= RATE_TOL));
    }
    checks.push(("evolve.detection".into(), flag(evolve, "detection.consistent")));
    checks
}

fn report_stage(cfg: &RunConfig) -> StageResult {
    let evolve_path = cfg.path(EVOLVE_FILE);
    if !evolve_path.exists() {
        return Err(usage(format!("no runs found ({} is missing)", evolve_path.display())));
    }
    let verify = read_input(cfg, VERIFY_FILE)?;
    let assembly = read_input(cfg, ASSEMBLY_FILE).ok();
    let evolve = KeyValues::read(&evolve_path)?;
    let checks = report_checks(&verify, assembly.as_ref(), &evolve);
    let mut kv = KeyValues::new();
    for (name, ok) in &checks {
        kv.push(format!("check.{name}"), if *ok { "pass" } else { "fail" });
    }
    let pass = checks.iter().all(|c| c.1);
    kv.push("all_pass", pass);
    kv.extend("verify.", &verify);
    if let Some(a) = &assembly {
        kv.extend("assembly.", a);
    }
    kv.extend("evolve.", &evolve);
    kv.write(&cfg.path(REPORT_FILE))?;
    Ok(status_of(pass))
}

fn record_metadata(cfg: &RunConfig, command: Command, status: ExitStatus) -> Result<()> {
    if !cfg.out.is_dir() {
        return Ok(());
    }
    let path = cfg.path(METADATA_FILE);
    let mut kv = if path.exists() { KeyValues::read(&path)? } else { KeyValues::new() };
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let stage = format!("{command:?}").to_lowercase();
    kv.push(format!("{stage}.unix_time"), now);
    kv.push(format!("{stage}.exit"), status as i32);
    kv.push(format!("{stage}.threads"), rayon::current_num_threads());
    if kv.get("version").is_none() {
        kv.push("version", env!("CARGO_PKG_VERSION"));
    }
    kv.write(&path)
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &cli.config {
        cfg.apply_kv(&KeyValues::read(p)?)?;
    }
    cfg.apply_flags(cli);
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> std::result::Result<(RunConfig, ExitStatus), Failure> {
    let cfg = load_config(cli)?;
    let status = match cli.command {
        Command::Construct => cmd_construct(&cfg)?,
        Command::Verify => verify_stage(&cfg)?,
        Command::Assemble => assemble_stage(&cfg)?,
        Command::Evolve => evolve_stage(&cfg)?,
        Command::Report => report_stage(&cfg)?,
    };
    Ok((cfg, status))
}

/// Runs one subcommand and returns the process exit status.
pub fn run(cli: &Cli) -> ExitStatus {
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitStatus::Usage;
        }
    }
    match dispatch(cli) {
        Ok((cfg, status)) => {
            if let Err(e) = record_metadata(&cfg, cli.command, status) {
                eprintln!("warning: metadata not written: {e}");
            }
            status
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.status
        }
    }
}

/// Parses arguments the way the binary does.
pub fn parse_args<I, T>(args: I) -> std::result::Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(args)
}

/// Parses and runs; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match parse_args(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                ExitStatus::Usage
            } else {
                ExitStatus::Pass
            }
        }
    }
}
