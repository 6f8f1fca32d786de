//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or internal error, 2 usage (bad flags, bad
//! config, malformed or empty input), 3 degenerate channel input, 4 failed
//! verification.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::allocator::{solve_mmf, MmfSolution, Strategy};
use crate::beamform::effective_gains;
use crate::channel::{make_channel_pair, parse_channel_records, ChannelEnsembleSpec, ChannelPair, ChannelRecord};
use crate::harness::{
    atomic_write, gain_map_csv, region_csv, run_region_map, run_snr_sweep, run_sweep_on, run_timing, run_verification,
    sweep_csv, timing_csv, RegionSpec, RunMetadata, SweepSpec, VerifySpec, VERSION,
};
use crate::linalg::ComplexVec;
use crate::oracle::GridSpec;
use crate::{snr_db_to_power, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Degenerate(String),
    Verification(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Degenerate(_) => EXIT_DEGENERATE,
            CliError::Verification(_) => EXIT_VERIFY,
            CliError::Other(_) => EXIT_OTHER,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Degenerate(m) => write!(f, "degenerate input: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Other(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::DegenerateChannel(_) | Error::CollinearChannels { .. } => CliError::Degenerate(e.to_string()),
            Error::Invariant(_) => CliError::Other(e.to_string()),
            Error::Dimension { .. } | Error::Domain { .. } | Error::Invalid(_) => CliError::Usage(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "rsma-mmf", version = VERSION, about = "Closed-form max-min fair rate allocation for two-user MISO downlinks")]
struct Cli {
    /// Flat `key = value` file; keys are long flag names, flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Print more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one or more channel pairs and print the allocation.
    Solve(SolveArgs),
    /// Ensemble-mean max-min rate against SNR.
    Sweep(CommonArgs),
    /// Best strategy over the (rho, gamma) plane.
    Region(RegionArgs),
    /// Relative gain of the proposed scheme over each baseline on the (rho, gamma) plane.
    GainMap(RegionArgs),
    /// Time the closed-form solver.
    Bench(CommonArgs),
    /// Cross-check the closed form against a brute-force grid search.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Clone, Default)]
struct CommonArgs {
    /// SNR in dB; comma separated or repeated for lists.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Vec<f64>,
    /// JSON channel file: `[{"h1": [[re, im], ...], "h2": [...]}, ...]`.
    #[arg(long, value_name = "PATH")]
    channels: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Coarse step of the oracle's t grid.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    ensemble_count: Option<usize>,
    #[arg(long)]
    sigma1_sq: Option<f64>,
    #[arg(long)]
    sigma2_sq: Option<f64>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Inline channel of the first user, JSON `[[re, im], ...]` or `[x, ...]`.
    #[arg(long, requires = "h2", conflicts_with = "channels")]
    h1: Option<String>,
    #[arg(long, requires = "h1")]
    h2: Option<String>,
}

#[derive(Debug, Args)]
struct RegionArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    n_rho: Option<usize>,
    #[arg(long)]
    n_gamma: Option<usize>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Largest accepted |closed form - grid| in bits/s/Hz.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Perturb the interior candidates; the check must then fail.
    #[arg(long)]
    inject_fault: bool,
}

const CONFIG_KEYS: &[&str] = &[
    "snr-db",
    "channels",
    "seed",
    "grid-step",
    "out",
    "ensemble-count",
    "sigma1-sq",
    "sigma2-sq",
    "n-rho",
    "n-gamma",
    "tolerance",
];

/// Flat `key = value` settings. `#` starts a comment.
#[derive(Debug, Default)]
struct ConfigFile(BTreeMap<String, String>);

impl ConfigFile {
    fn parse(text: &str) -> CliResult<Self> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
            let key = k.trim().replace('_', "-");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", n + 1)));
            }
            map.insert(key, v.trim().to_string());
        }
        Ok(ConfigFile(map))
    }

    fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.0
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| CliError::Usage(format!("config key {key}: cannot parse {v:?}: {e}")))
            })
            .transpose()
    }

    fn get_list(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        self.0
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim()
                            .parse()
                            .map_err(|e| CliError::Usage(format!("config key {key}: cannot parse {x:?}: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }
}

/// Flags merged over the config file.
#[derive(Debug, Clone, Serialize)]
struct Settings {
    snr_db: Option<Vec<f64>>,
    channels: Option<PathBuf>,
    seed: Option<u64>,
    grid_step: Option<f64>,
    out: Option<PathBuf>,
    ensemble_count: Option<usize>,
    sigma1_sq: Option<f64>,
    sigma2_sq: Option<f64>,
}

impl Settings {
    fn merge(args: &CommonArgs, cfg: &ConfigFile) -> CliResult<Self> {
        Ok(Self {
            snr_db: if args.snr_db.is_empty() {
                cfg.get_list("snr-db")?
            } else {
                Some(args.snr_db.clone())
            },
            channels: args.channels.clone().or(cfg.get("channels")?),
            seed: args.seed.or(cfg.get("seed")?),
            grid_step: args.grid_step.or(cfg.get("grid-step")?),
            out: args.out.clone().or(cfg.get("out")?),
            ensemble_count: args.ensemble_count.or(cfg.get("ensemble-count")?),
            sigma1_sq: args.sigma1_sq.or(cfg.get("sigma1-sq")?),
            sigma2_sq: args.sigma2_sq.or(cfg.get("sigma2-sq")?),
        })
    }

    fn ensemble(&self, base: ChannelEnsembleSpec) -> CliResult<ChannelEnsembleSpec> {
        let spec = ChannelEnsembleSpec {
            seed: self.seed.unwrap_or(base.seed),
            count: self.ensemble_count.unwrap_or(base.count),
            sigma1_sq: self.sigma1_sq.unwrap_or(base.sigma1_sq),
            sigma2_sq: self.sigma2_sq.unwrap_or(base.sigma2_sq),
            ..base
        };
        spec.validate()?;
        Ok(spec)
    }

    fn single_snr(&self, default: f64) -> CliResult<f64> {
        match self.snr_db.as_deref() {
            None => Ok(default),
            Some([s]) => Ok(*s),
            Some(list) => Err(CliError::Usage(format!(
                "expected one --snr-db value, got {}",
                list.len()
            ))),
        }
    }

    fn out_dir(&self) -> CliResult<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&dir)
            .map_err(|e| CliError::Other(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(dir)
    }

    fn load_channels(&self) -> CliResult<Option<Vec<ChannelPair>>> {
        self.channels.as_deref().map(read_channel_file).transpose()
    }
}

fn read_channel_file(path: &Path) -> CliResult<Vec<ChannelPair>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read channel file {}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Err(CliError::Usage(format!("channel file {} is empty", path.display())));
    }
    let records = parse_channel_records(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if records.is_empty() {
        return Err(CliError::Usage(format!(
            "channel file {} holds no channels",
            path.display()
        )));
    }
    records
        .into_iter()
        .map(|r| r.into_pair().map_err(CliError::from))
        .collect()
}

fn parse_inline_channel(flag: &str, text: &str) -> CliResult<ComplexVec> {
    if let Ok(pairs) = serde_json::from_str::<Vec<[f64; 2]>>(text) {
        return ComplexVec::try_from(pairs).map_err(|e| CliError::Usage(format!("--{flag}: {e}")));
    }
    let reals: Vec<f64> = serde_json::from_str(text).map_err(|_| {
        CliError::Usage(format!(
            "--{flag}: expected JSON [[re, im], ...] or [x, ...], got {text:?}"
        ))
    })?;
    ComplexVec::from_real(&reals).map_err(|e| CliError::Usage(format!("--{flag}: {e}")))
}

fn write_output<C: Serialize>(
    dir: &Path,
    stem: &str,
    command: &str,
    body: &str,
    config: &C,
) -> CliResult<Vec<PathBuf>> {
    let data = dir.join(format!("{stem}.csv"));
    let meta = dir.join(format!("{stem}.json"));
    let write = |path: &Path, bytes: &[u8]| {
        atomic_write(path, bytes).map_err(|e| CliError::Other(format!("cannot write {}: {e}", path.display())))
    };
    write(&data, body.as_bytes())?;
    write(&meta, RunMetadata::new(command, config).to_json().as_bytes())?;
    Ok(vec![data, meta])
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

/// One solved channel with users in input order.
#[derive(Debug, Serialize)]
struct SolveRecord {
    snr_db: f64,
    channel: ChannelRecord,
    strategy: Strategy,
    t_opt: f64,
    c1: f64,
    c2: f64,
    user_totals: [f64; 2],
    mmf: f64,
    collinear: bool,
    /// Solver output with user 1 the stronger user.
    solution: MmfSolution,
}

impl SolveRecord {
    fn new(pair: &ChannelPair, snr_db: f64, solution: MmfSolution, collinear: bool) -> Self {
        let (c1, c2, totals) = if pair.swapped() {
            (
                solution.c2,
                solution.c1,
                [solution.user_totals[1], solution.user_totals[0]],
            )
        } else {
            (solution.c1, solution.c2, solution.user_totals)
        };
        Self {
            snr_db,
            channel: pair.to_record(),
            strategy: solution.strategy,
            t_opt: solution.t_opt,
            c1,
            c2,
            user_totals: totals,
            mmf: solution.mmf,
            collinear,
            solution,
        }
    }

    fn print(&self, index: Option<usize>, verbose: u8) {
        if let Some(i) = index {
            println!("channel {i}:");
        }
        if self.collinear {
            eprintln!("warning: channels are collinear (rho = 0); only multicast is feasible");
        }
        println!("  snr_db      {}", self.snr_db);
        println!("  strategy    {}", self.strategy);
        println!("  t*          {:.9}", self.t_opt);
        println!("  C1          {:.9}", self.c1);
        println!("  C2          {:.9}", self.c2);
        println!("  user1 total {:.9}", self.user_totals[0]);
        println!("  user2 total {:.9}", self.user_totals[1]);
        println!("  mmf         {:.9}", self.mmf);
        if verbose > 0 {
            println!(
                "  powers      P1 {:.6} P2 {:.6} Pc {:.6}",
                self.solution.split.p1, self.solution.split.p2, self.solution.split.pc
            );
            for c in &self.solution.candidates {
                println!(
                    "  candidate   t {:.9} {:?} {} mmf {:.9}",
                    c.t, c.kind, c.strategy, c.mmf
                );
            }
        }
    }
}

fn cmd_solve(args: &SolveArgs, cfg: &ConfigFile, verbose: u8) -> CliResult<()> {
    let settings = Settings::merge(&args.common, cfg)?;
    let snr_db = settings.single_snr(10.0)?;
    let pairs = match (&args.h1, &args.h2) {
        (Some(a), Some(b)) => vec![make_channel_pair(
            parse_inline_channel("h1", a)?,
            parse_inline_channel("h2", b)?,
        )?],
        _ => settings
            .load_channels()?
            .ok_or_else(|| CliError::Usage("solve needs --h1/--h2 or --channels".into()))?,
    };
    let total = snr_db_to_power(snr_db);
    let mut records = Vec::with_capacity(pairs.len());
    for pair in &pairs {
        let g = effective_gains(pair);
        let sol = solve_mmf(&g, total)?;
        records.push(SolveRecord::new(pair, snr_db, sol, g.is_collinear()));
    }
    let many = records.len() > 1;
    for (i, r) in records.iter().enumerate() {
        r.print(many.then_some(i), verbose);
    }
    if let Some(dir) = &settings.out {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Other(format!("cannot create output directory {}: {e}", dir.display())))?;
        let path = dir.join("solution.json");
        let body = serde_json::to_string_pretty(&records).map_err(|e| CliError::Other(e.to_string()))?;
        atomic_write(&path, body.as_bytes())
            .map_err(|e| CliError::Other(format!("cannot write {}: {e}", path.display())))?;
        report_written(&[path]);
    }
    Ok(())
}

fn cmd_sweep(args: &CommonArgs, cfg: &ConfigFile) -> CliResult<()> {
    let settings = Settings::merge(args, cfg)?;
    let base = SweepSpec::default();
    let spec = SweepSpec {
        snr_db_list: settings.snr_db.clone().unwrap_or(base.snr_db_list),
        ensemble: settings.ensemble(base.ensemble)?,
        per_strategy: base.per_strategy,
    };
    let rows = match settings.load_channels()? {
        Some(channels) => run_sweep_on(&channels, &spec.snr_db_list, spec.per_strategy)?,
        None => run_snr_sweep(&spec)?,
    };
    for r in rows.iter().filter(|r| r.strategy == "proposed-closed-form") {
        println!("snr {:>6.2} dB  mean mmf {:.6}", r.snr_db, r.mean_mmf_bits);
    }
    let config = serde_json::json!({ "flags": settings, "resolved": spec });
    report_written(&write_output(
        &settings.out_dir()?,
        "snr_sweep",
        "sweep",
        &sweep_csv(&rows),
        &config,
    )?);
    Ok(())
}

fn region_spec(args: &RegionArgs, cfg: &ConfigFile) -> CliResult<(Settings, RegionSpec)> {
    let settings = Settings::merge(&args.common, cfg)?;
    let base = RegionSpec::default();
    let n_rho = args.n_rho.or(cfg.get("n-rho")?).unwrap_or(base.rho_axis.len());
    let n_gamma = args.n_gamma.or(cfg.get("n-gamma")?).unwrap_or(base.gamma_db_axis.len());
    let spec = RegionSpec::uniform(settings.single_snr(base.snr_db)?, n_rho, n_gamma);
    spec.validate()?;
    Ok((settings, spec))
}

fn cmd_region(args: &RegionArgs, cfg: &ConfigFile, gain_map: bool) -> CliResult<()> {
    let (settings, spec) = region_spec(args, cfg)?;
    let cells = run_region_map(&spec)?;
    for s in Strategy::ALL {
        let n = cells.iter().filter(|c| c.strategy == s).count();
        println!("{s:<9} {n:>6} cells");
    }
    let (stem, command, body) = if gain_map {
        ("gain_map", "gain-map", gain_map_csv(&cells))
    } else {
        ("region_map", "region", region_csv(&cells))
    };
    let config = serde_json::json!({ "flags": settings, "resolved": spec });
    report_written(&write_output(&settings.out_dir()?, stem, command, &body, &config)?);
    Ok(())
}

fn cmd_bench(args: &CommonArgs, cfg: &ConfigFile) -> CliResult<()> {
    let settings = Settings::merge(args, cfg)?;
    let count = settings.ensemble_count.unwrap_or(10_000);
    let seed = settings.seed.unwrap_or(0);
    let snrs = settings.snr_db.clone().unwrap_or_else(|| vec![20.0]);
    let stats = snrs
        .iter()
        .map(|&s| run_timing(count, s, seed))
        .collect::<crate::Result<Vec<_>>>()?;
    for s in &stats {
        println!(
            "snr {:>6.2} dB  {} solves  mean {:.3} us  p99 {:.3} us",
            s.snr_db, s.count, s.mean_us, s.p99_us
        );
    }
    report_written(&write_output(
        &settings.out_dir()?,
        "timing",
        "bench",
        &timing_csv(&stats),
        &settings,
    )?);
    Ok(())
}

fn cmd_verify(args: &VerifyArgs, cfg: &ConfigFile) -> CliResult<()> {
    let settings = Settings::merge(&args.common, cfg)?;
    let base = VerifySpec::default();
    let spec = VerifySpec {
        ensemble: settings.ensemble(base.ensemble)?,
        snr_db_list: settings.snr_db.clone().unwrap_or(base.snr_db_list),
        grid: GridSpec {
            coarse_step: settings.grid_step.unwrap_or(base.grid.coarse_step),
            ..base.grid
        },
        tolerance: args.tolerance.or(cfg.get("tolerance")?).unwrap_or(base.tolerance),
        inject_fault: args.inject_fault,
    };
    if !(spec.tolerance >= 0.0) {
        return Err(CliError::Usage(format!(
            "tolerance must be non-negative, got {}",
            spec.tolerance
        )));
    }
    let report = run_verification(&spec)?;
    println!(
        "{} instances, max |closed form - grid| = {:.3e} bits/s/Hz (tolerance {:e}), {} over tolerance",
        report.instances, report.max_abs_deviation, report.tolerance, report.failures
    );
    if report.passed() {
        return Ok(());
    }
    let worst = report.worst.as_ref().expect("a failure implies a worst case");
    let dir = settings.out_dir()?;
    let path = dir.join("verify_worst.json");
    let body = serde_json::to_string_pretty(&[&worst.channel]).map_err(|e| CliError::Other(e.to_string()))?;
    atomic_write(&path, body.as_bytes())
        .map_err(|e| CliError::Other(format!("cannot write {}: {e}", path.display())))?;
    let report_path = dir.join("verify_report.json");
    let report_body = serde_json::json!({ "spec": spec, "report": report }).to_string();
    atomic_write(&report_path, report_body.as_bytes())
        .map_err(|e| CliError::Other(format!("cannot write {}: {e}", report_path.display())))?;
    Err(CliError::Verification(format!(
        "worst case at {} dB deviates by {:.3e}; dumped to {}",
        worst.snr_db,
        worst.deviation(),
        path.display()
    )))
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Solve(a) => cmd_solve(a, &cfg, cli.verbose),
        Command::Sweep(a) => cmd_sweep(a, &cfg),
        Command::Region(a) => cmd_region(a, &cfg, false),
        Command::GainMap(a) => cmd_region(a, &cfg, true),
        Command::Bench(a) => cmd_bench(a, &cfg),
        Command::Verify(a) => cmd_verify(a, &cfg),
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}
