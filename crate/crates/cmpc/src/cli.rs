//! Command-line experiment runner: sweeps, protocol runs, oracle
//! verification, cost and privacy audits. Output is CSV with a versioned
//! comment line on top.
//!
//! Exit codes: 0 success, 1 i/o failure, 2 usage error, 3 verification failure.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codes::{Scheme, SchemeParams, SharePolynomial};
use crate::costs::cost_report;
use crate::counts::{gamma_age, n_age, n_polydot, required_workers, WorkerCountBreakdown};
use crate::error::Error;
use crate::field::{PrimeModulus, DEFAULT_PRIME};
use crate::partition::{read_matrix, write_matrix, Matrix};
use crate::powerset::{check_decodability, h_support};
use crate::privacy::{exhaustive_uniformity_test, sweep_subsets, UniformityConfig};
use crate::protocol::{phase3_reconstruct, run_protocol, ProtocolConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "CMPC_SEED";
pub const CSV_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "cmpc", version, about = "Coded multi-party matrix multiplication toolkit")]
pub struct Cli {
    /// key=value file consulted for options not given as flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Worker counts for every scheme over a parameter grid.
    Analyze(AnalyzeArgs),
    /// Run the protocol end to end and check Y = A^T B.
    Run(RunArgs),
    /// Compare closed-form counts with the support oracle.
    Verify(VerifyArgs),
    /// Predicted and measured per-worker costs.
    Costs(CostsArgs),
    /// Masking rank checks and the tiny-field uniformity test.
    Privacy(PrivacyArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// s values: `4`, `1..12` or `1,2,4`.
    #[arg(long)]
    pub s: Option<String>,
    #[arg(long)]
    pub t: Option<String>,
    /// Use every (s, t) with s*t equal to this instead of --s/--t.
    #[arg(long)]
    pub st: Option<u64>,
    #[arg(long)]
    pub z: Option<String>,
    /// Schemes to include (repeatable); all five when omitted.
    #[arg(long = "scheme")]
    pub schemes: Vec<String>,
    #[arg(long)]
    pub all_schemes: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub s: Option<u64>,
    #[arg(long)]
    pub t: Option<u64>,
    #[arg(long)]
    pub z: Option<u64>,
    #[arg(long)]
    pub m: Option<usize>,
    /// AGE gap; the minimizing λ when omitted.
    #[arg(long)]
    pub lambda: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub prime: Option<u64>,
    /// Matrix files (CSV or whitespace separated); random when omitted.
    #[arg(long)]
    pub a: Option<PathBuf>,
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// Use identity matrices for both inputs.
    #[arg(long)]
    pub identity: bool,
    /// Comma-separated worker indices that answer the master.
    #[arg(long)]
    pub responding: Option<String>,
    /// Directory for y.csv, transcript.csv, costs.csv and shares.txt.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub max_s: Option<u64>,
    #[arg(long)]
    pub max_t: Option<u64>,
    #[arg(long)]
    pub max_st: Option<u64>,
    #[arg(long)]
    pub max_z: Option<u64>,
    /// Check that λ = z is never beaten by λ in (z, z+s+2].
    #[arg(long, visible_alias = "appendix-h")]
    pub large_gap: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CostsArgs {
    #[arg(long = "scheme")]
    pub schemes: Vec<String>,
    #[arg(long)]
    pub s: Option<u64>,
    #[arg(long)]
    pub t: Option<u64>,
    #[arg(long)]
    pub z: Option<u64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub prime: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PrivacyArgs {
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub s: Option<u64>,
    #[arg(long)]
    pub t: Option<u64>,
    #[arg(long)]
    pub z: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub prime: Option<u64>,
    /// Zero the secret terms in the tiny-field enumeration.
    #[arg(long)]
    pub ablate_masking: bool,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Verify(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Verify(_) => EXIT_VERIFY,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(m) => CliError::Io(m),
            Error::InvalidParameters(_)
            | Error::UnsupportedPartition { .. }
            | Error::IndivisibleDimension { .. }
            | Error::OutOfRange(_)
            | Error::Parse(_)
            | Error::CountOnlyScheme(_)
            | Error::FieldTooSmall { .. }
            | Error::ShapeMismatch(_)
            | Error::TooLargeForExhaustive(_) => CliError::Usage(e.to_string()),
            other => CliError::Verify(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Flags win over the config file, which wins over defaults.
#[derive(Debug, Default, Clone)]
pub struct Settings {
    file: HashMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut file = HashMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", no + 1)))?;
            file.insert(k.trim().replace('_', "-"), v.trim().to_string());
        }
        Ok(Settings { file })
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Settings::default()),
            Some(p) => Settings::parse(&fs::read_to_string(p)?),
        }
    }

    pub fn lookup<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key {key}: cannot parse {v:?}"))),
        }
    }

    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        Ok(self.lookup(flag, key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<T> {
        self.lookup(flag, key)?.ok_or_else(|| CliError::Usage(format!("--{key} is required")))
    }

    fn seed(&self, flag: Option<u64>) -> CliResult<u64> {
        let default = match std::env::var(SEED_ENV) {
            Ok(v) => v
                .parse()
                .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an integer")))?,
            Err(_) => 0,
        };
        self.resolve(flag, "seed", default)
    }

    fn field(&self, flag: Option<u64>) -> CliResult<PrimeModulus> {
        Ok(PrimeModulus::new(self.resolve(flag, "prime", DEFAULT_PRIME)?)?)
    }
}

/// Parses `7`, `1..300` (inclusive) or `1,2,5`. Empty ranges are rejected.
pub fn parse_range(text: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::Usage(format!("bad range {text:?}"));
    let values: Vec<u64> = if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u64 = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        text.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<CliResult<_>>()?
    };
    if values.is_empty() {
        return Err(CliError::Usage(format!("range {text:?} is empty")));
    }
    Ok(values)
}

fn parse_scheme(s: &str) -> CliResult<Scheme> {
    s.parse::<Scheme>().map_err(|e| CliError::Usage(e.to_string()))
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout())),
    })
}

fn csv_writer(mut out: Box<dyn Write>, kind: &str, header: &[&str]) -> CliResult<csv::Writer<Box<dyn Write>>> {
    writeln!(out, "# cmpc {kind} v{CSV_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

pub const ANALYZE_HEADER: [&str; 7] = ["scheme", "s", "t", "z", "N", "branch", "lambda_star"];
pub const COSTS_HEADER: [&str; 12] = [
    "scheme", "s", "t", "z", "m", "N", "xi", "sigma", "zeta", "measured_xi", "measured_sigma", "measured_zeta",
];

/// Rows for `analyze`, sorted by (s, t, z, scheme).
pub fn analyze_rows(pairs: &[(u64, u64)], zs: &[u64], schemes: &[Scheme]) -> CliResult<Vec<WorkerCountBreakdown>> {
    let mut rows = Vec::new();
    for &(s, t) in pairs {
        for &z in zs {
            for &scheme in schemes {
                if scheme == Scheme::PolyDot && s == 1 && t == 1 {
                    continue;
                }
                rows.push(required_workers(scheme, s, t, z)?);
            }
        }
    }
    rows.sort_by_key(|r| (r.s, r.t, r.z, r.scheme));
    Ok(rows)
}

fn cmd_analyze(args: AnalyzeArgs, settings: &Settings) -> CliResult<()> {
    let zs = parse_range(&settings.require(args.z, "z")?)?;
    let pairs: Vec<(u64, u64)> = match settings.lookup(args.st, "st")? {
        Some(0) => return Err(CliError::Usage("--st must be positive".into())),
        Some(st) => (1..=st).filter(|s| st % s == 0).map(|s| (s, st / s)).collect(),
        None => {
            let ss = parse_range(&settings.require(args.s, "s")?)?;
            let ts = parse_range(&settings.require(args.t, "t")?)?;
            ss.iter().flat_map(|&s| ts.iter().map(move |&t| (s, t))).collect()
        }
    };
    if pairs.iter().any(|&(s, t)| s == 0 || t == 0) || zs.contains(&0) {
        return Err(CliError::Usage("s, t and z must be positive".into()));
    }
    let schemes: Vec<Scheme> = if args.all_schemes || args.schemes.is_empty() {
        Scheme::ALL.to_vec()
    } else {
        args.schemes.iter().map(|s| parse_scheme(s)).collect::<CliResult<_>>()?
    };
    let rows = analyze_rows(&pairs, &zs, &schemes)?;
    let mut w = csv_writer(open_output(args.output.as_deref())?, "analyze", &ANALYZE_HEADER)?;
    for r in rows {
        w.write_record([
            r.scheme.to_string(),
            r.s.to_string(),
            r.t.to_string(),
            r.z.to_string(),
            r.n.to_string(),
            r.branch.to_string(),
            r.lambda_star.map(|l| l.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Scheme parameters for a run; AGE takes the minimizing λ unless one is given.
pub fn protocol_params(scheme: Scheme, s: u64, t: u64, z: u64, lambda: Option<u64>) -> crate::error::Result<SchemeParams> {
    match scheme {
        Scheme::PolyDot => SchemeParams::polydot(s, t, z),
        Scheme::Entangled => SchemeParams::entangled(s, t, z),
        Scheme::Age => {
            let l = match lambda {
                Some(l) => l,
                None => n_age(s, t, z)?.lambda_star.unwrap_or(0),
            };
            SchemeParams::age(s, t, z, l)
        }
        other => Err(Error::CountOnlyScheme(other.to_string())),
    }
}

fn load_matrix(path: &Path, field: &PrimeModulus) -> CliResult<Matrix> {
    let f = fs::File::open(path)?;
    Ok(read_matrix(BufReader::new(f))?.reduced(field))
}

/// `exponent: row;row;...` with comma-separated entries.
pub fn write_share_dump<W: Write>(mut w: W, name: &str, f: &SharePolynomial) -> io::Result<()> {
    writeln!(w, "# {name}")?;
    for (e, m) in f.terms() {
        let rows: Vec<String> = m
            .to_rows()
            .iter()
            .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
            .collect();
        writeln!(w, "{e}: {}", rows.join(";"))?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs, settings: &Settings) -> CliResult<()> {
    let scheme = parse_scheme(&settings.resolve(args.scheme, "scheme", "age".to_string())?)?;
    let s = settings.require(args.s, "s")?;
    let t = settings.require(args.t, "t")?;
    let z = settings.require(args.z, "z")?;
    let m = settings.require(args.m, "m")?;
    let lambda = settings.lookup(args.lambda, "lambda")?;
    let seed = settings.seed(args.seed)?;
    let field = settings.field(args.prime)?;
    let params = protocol_params(scheme, s, t, z, lambda)?;
    let mut config = ProtocolConfig::new(params, m, field, seed)?;
    let n = config.n_workers();
    if 2 * z as usize >= n {
        eprintln!("warning: z={z} is not below N/2 with N={n}");
    }
    if let Some(list) = settings.lookup(args.responding, "responding")? {
        let idx: Vec<usize> = parse_range(&list)?.into_iter().map(|v| v as usize).collect();
        if let Some(bad) = idx.iter().find(|&&w| w >= n) {
            return Err(CliError::Usage(format!("worker {bad} does not exist (N={n})")));
        }
        config = config.with_responding(idx);
    }

    let (a, b) = if args.identity {
        (Matrix::identity(m), Matrix::identity(m))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = match &args.a {
            Some(p) => load_matrix(p, &field)?,
            None => Matrix::random(&field, m, m, &mut rng),
        };
        let b = match &args.b {
            Some(p) => load_matrix(p, &field)?,
            None => Matrix::random(&field, m, m, &mut rng),
        };
        (a, b)
    };
    let out = run_protocol(&a, &b, &config)?;
    let expected = a.transpose().mul(&field, &b)?;
    let report = cost_report(&out.transcript)?;

    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir)?;
        write_matrix(io::BufWriter::new(fs::File::create(dir.join("y.csv"))?), &out.y)?;
        out.transcript.write_dump(io::BufWriter::new(fs::File::create(dir.join("transcript.csv"))?))?;
        let mut shares = io::BufWriter::new(fs::File::create(dir.join("shares.txt"))?);
        write_share_dump(&mut shares, "F_A", &out.shares.fa)?;
        write_share_dump(&mut shares, "F_B", &out.shares.fb)?;
        let mut w = csv_writer(Box::new(fs::File::create(dir.join("costs.csv"))?), "costs", &COSTS_HEADER)?;
        write_cost_row(&mut w, &config, &report)?;
        w.flush()?;
    }
    println!(
        "scheme={} s={s} t={t} z={z} lambda={} m={m} N={n} recovery_threshold={}",
        scheme,
        params.lambda(),
        config.threshold()
    );
    if out.y != expected {
        return Err(CliError::Verify("reconstructed Y differs from A^T B".into()));
    }
    if !report.agrees() {
        return Err(CliError::Verify(format!("measured costs {:?} differ from {:?}", report.measured, report.predicted)));
    }
    println!("Y verified");
    Ok(())
}

fn write_cost_row<W: Write>(w: &mut csv::Writer<W>, config: &ProtocolConfig, r: &crate::costs::CostReport) -> CliResult<()> {
    let p = &config.params;
    let meas = r.measured.unwrap_or_default();
    w.write_record([
        p.scheme().to_string(),
        p.s().to_string(),
        p.t().to_string(),
        p.z().to_string(),
        config.m.to_string(),
        config.n_workers().to_string(),
        r.predicted.xi.to_string(),
        r.predicted.sigma.to_string(),
        r.predicted.zeta.to_string(),
        meas.xi.to_string(),
        meas.sigma.to_string(),
        meas.zeta.to_string(),
    ])?;
    Ok(())
}

fn cmd_costs(args: CostsArgs, settings: &Settings) -> CliResult<()> {
    let s = settings.require(args.s, "s")?;
    let t = settings.require(args.t, "t")?;
    let z = settings.require(args.z, "z")?;
    let m = settings.require(args.m, "m")?;
    let seed = settings.seed(args.seed)?;
    let field = settings.field(args.prime)?;
    let schemes: Vec<Scheme> = if args.schemes.is_empty() {
        match settings.lookup(None::<String>, "scheme")? {
            Some(s) => vec![parse_scheme(&s)?],
            None => vec![Scheme::Age],
        }
    } else {
        args.schemes.iter().map(|s| parse_scheme(s)).collect::<CliResult<_>>()?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Matrix::random(&field, m, m, &mut rng);
    let b = Matrix::random(&field, m, m, &mut rng);
    let mut w = csv_writer(open_output(args.output.as_deref())?, "costs", &COSTS_HEADER)?;
    let mut all_agree = true;
    for scheme in schemes {
        let config = ProtocolConfig::new(protocol_params(scheme, s, t, z, None)?, m, field, seed)?;
        let out = run_protocol(&a, &b, &config)?;
        let report = cost_report(&out.transcript)?;
        all_agree &= report.agrees();
        write_cost_row(&mut w, &config, &report)?;
    }
    w.flush()?;
    if !all_agree {
        return Err(CliError::Verify("measured costs differ from the closed forms".into()));
    }
    Ok(())
}

fn cmd_privacy(args: PrivacyArgs, settings: &Settings) -> CliResult<()> {
    let scheme = parse_scheme(&settings.resolve(args.scheme, "scheme", "age".to_string())?)?;
    let s = settings.require(args.s, "s")?;
    let t = settings.require(args.t, "t")?;
    let z = settings.require(args.z, "z")?;
    let seed = settings.seed(args.seed)?;
    let field = settings.field(args.prime)?;
    let params = protocol_params(scheme, s, t, z, None)?;
    let config = ProtocolConfig::new(params, (s * t) as usize, field, seed)?;
    let plan = crate::protocol::plan_extraction(&config)?;
    let sweep = sweep_subsets(&field, &params, plan.alphas.as_slice(), &mut ChaCha8Rng::seed_from_u64(seed))?;
    println!(
        "rank_check scheme={scheme} s={s} t={t} z={z} N={} subsets={} exhaustive={} failures={}",
        config.n_workers(),
        sweep.checked,
        sweep.exhaustive,
        sweep.failures.len()
    );
    let a = Matrix::from_rows(vec![vec![1, 2], vec![3, 4]])?;
    let b = Matrix::from_rows(vec![vec![5, 6], vec![7, 8]])?;
    let a2 = Matrix::from_rows(vec![vec![0, 9], vec![2, 10]])?;
    let b2 = Matrix::from_rows(vec![vec![4, 4], vec![1, 0]])?;
    let ucfg = UniformityConfig { p: 11, m: 2, s: 2, z: 1, colluders: 1, ablate_masking: args.ablate_masking };
    let u = exhaustive_uniformity_test(&ucfg, (&a, &b), (&a2, &b2))?;
    println!(
        "uniformity p=11 m=2 s=2 t=1 z=1 ablate_masking={} states={} identical={}",
        args.ablate_masking, u.states, u.identical
    );
    if !sweep.passed() {
        return Err(CliError::Verify(format!("masking rank check failed for {:?}", sweep.failures.first())));
    }
    if !u.identical {
        return Err(CliError::Verify("view distributions depend on the inputs".into()));
    }
    println!("privacy checks passed");
    Ok(())
}

/// Closed forms under test; swapped out to exercise the mismatch path.
pub trait FormulaTable {
    fn polydot(&self, s: u64, t: u64, z: u64) -> crate::error::Result<(u64, &'static str)> {
        let b = n_polydot(s, t, z)?;
        Ok((b.n, b.branch))
    }
    fn gamma(&self, s: u64, t: u64, z: u64, lambda: u64) -> crate::error::Result<(u64, &'static str)> {
        gamma_age(s, t, z, lambda)
    }
    /// AGE with `t = 1`.
    fn age_single_column(&self, s: u64, z: u64) -> crate::error::Result<u64> {
        Ok(n_age(s, 1, z)?.n)
    }
}

/// The formulas as implemented in `counts`.
pub struct PrintedFormulas;
impl FormulaTable for PrintedFormulas {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub scheme: Scheme,
    pub s: u64,
    pub t: u64,
    pub z: u64,
    pub lambda: Option<u64>,
    pub branch: &'static str,
    pub formula: u64,
    pub oracle: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GridReport {
    pub checked: u64,
    pub mismatches: Vec<Mismatch>,
    /// AGE points where the decodability check failed.
    pub undecodable: Vec<(u64, u64, u64, u64)>,
}

impl GridReport {
    pub fn mismatches_by_branch(&self) -> Vec<(String, usize)> {
        let mut m: HashMap<String, usize> = HashMap::new();
        for x in &self.mismatches {
            *m.entry(format!("{}:{}", x.scheme, x.branch)).or_insert(0) += 1;
        }
        let mut v: Vec<(String, usize)> = m.into_iter().collect();
        v.sort();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub max_s: u64,
    pub max_t: u64,
    pub max_st: u64,
    pub max_z: u64,
}

impl Grid {
    pub const DEFAULT: Grid = Grid { max_s: 12, max_t: 12, max_st: 48, max_z: 60 };
    pub const LARGE_GAP: Grid = Grid { max_s: 8, max_t: 8, max_st: 64, max_z: 20 };

    pub fn pairs(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        (1..=self.max_s).flat_map(move |s| (1..=self.max_t).filter(move |t| s * t <= self.max_st).map(move |t| (s, t)))
    }
}

/// Closed form against `|h_support|` for PolyDot and for AGE at every
/// `λ ∈ [0, z]`; AGE points also get the decodability check.
pub fn verify_grid(grid: Grid, table: &dyn FormulaTable) -> crate::error::Result<GridReport> {
    let mut rep = GridReport::default();
    for (s, t) in grid.pairs() {
        for z in 1..=grid.max_z {
            if !(s == 1 && t == 1) {
                let (n, branch) = table.polydot(s, t, z)?;
                let oracle = h_support(&SchemeParams::polydot(s, t, z)?)?.len() as u64;
                rep.checked += 1;
                if n != oracle {
                    rep.mismatches.push(Mismatch { scheme: Scheme::PolyDot, s, t, z, lambda: None, branch, formula: n, oracle });
                }
            }
            let lambdas = if t == 1 { 0..=0 } else { 0..=z };
            for lambda in lambdas {
                let params = SchemeParams::age(s, t, z, lambda)?;
                let oracle = h_support(&params)?.len() as u64;
                let (n, branch) = if t == 1 { (table.age_single_column(s, z)?, "t=1") } else { table.gamma(s, t, z, lambda)? };
                rep.checked += 1;
                if n != oracle {
                    rep.mismatches.push(Mismatch { scheme: Scheme::Age, s, t, z, lambda: Some(lambda), branch, formula: n, oracle });
                }
                let d = check_decodability(&params)?;
                if !d.decodable {
                    rep.undecodable.push((s, t, z, lambda));
                }
            }
        }
    }
    Ok(rep)
}

/// `Γ(z)` against the oracle count for every `λ ∈ (z, z+s+2]`; a mismatch
/// is any `λ` that needs fewer workers than `λ = z`.
pub fn verify_large_gap(grid: Grid, table: &dyn FormulaTable) -> crate::error::Result<GridReport> {
    let mut rep = GridReport::default();
    for (s, t) in grid.pairs().filter(|&(_, t)| t >= 2) {
        for z in 1..=grid.max_z {
            let (at_z, branch) = table.gamma(s, t, z, z)?;
            for lambda in z + 1..=z + s + 2 {
                let oracle = h_support(&SchemeParams::age_unbounded(s, t, z, lambda)?)?.len() as u64;
                rep.checked += 1;
                if at_z > oracle {
                    rep.mismatches.push(Mismatch { scheme: Scheme::Age, s, t, z, lambda: Some(lambda), branch, formula: at_z, oracle });
                }
            }
        }
    }
    Ok(rep)
}

fn cmd_verify(args: VerifyArgs, settings: &Settings) -> CliResult<()> {
    let base = if args.large_gap { Grid::LARGE_GAP } else { Grid::DEFAULT };
    let grid = Grid {
        max_s: settings.resolve(args.max_s, "max-s", base.max_s)?,
        max_t: settings.resolve(args.max_t, "max-t", base.max_t)?,
        max_st: settings.resolve(args.max_st, "max-st", base.max_st)?,
        max_z: settings.resolve(args.max_z, "max-z", base.max_z)?,
    };
    if grid.max_s == 0 || grid.max_t == 0 || grid.max_z == 0 || grid.max_st == 0 {
        return Err(CliError::Usage("grid bounds must be positive".into()));
    }
    let rep = if args.large_gap { verify_large_gap(grid, &PrintedFormulas)? } else { verify_grid(grid, &PrintedFormulas)? };
    let kind = if args.large_gap { "verify-large-gap" } else { "verify" };
    let header = ["scheme", "s", "t", "z", "lambda", "branch", "formula", "oracle"];
    let mut w = csv_writer(open_output(args.output.as_deref())?, kind, &header)?;
    for m in &rep.mismatches {
        w.write_record([
            m.scheme.to_string(),
            m.s.to_string(),
            m.t.to_string(),
            m.z.to_string(),
            m.lambda.map(|l| l.to_string()).unwrap_or_default(),
            m.branch.to_string(),
            m.formula.to_string(),
            m.oracle.to_string(),
        ])?;
    }
    w.flush()?;
    drop(w);
    eprintln!(
        "checked={} mismatches={} undecodable={} by_branch={:?}",
        rep.checked,
        rep.mismatches.len(),
        rep.undecodable.len(),
        rep.mismatches_by_branch()
    );
    if rep.mismatches.is_empty() && rep.undecodable.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(format!("{} mismatches, {} undecodable points", rep.mismatches.len(), rep.undecodable.len())))
    }
}

pub fn dispatch(cli: Cli) -> CliResult<()> {
    let settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Analyze(a) => cmd_analyze(a, &settings),
        Command::Run(a) => cmd_run(a, &settings),
        Command::Verify(a) => cmd_verify(a, &settings),
        Command::Costs(a) => cmd_costs(a, &settings),
        Command::Privacy(a) => cmd_privacy(a, &settings),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let msg = match &e {
                CliError::Usage(m) => format!("usage error: {m}"),
                CliError::Verify(m) => format!("verification failed: {m}"),
                CliError::Io(m) => format!("i/o error: {m}"),
            };
            eprintln!("{msg}");
            e.exit_code()
        }
    }
}

/// Reconstructs from the first `count` responding workers; exposed for
/// straggler experiments.
pub fn reconstruct_prefix(config: &ProtocolConfig, a: &Matrix, b: &Matrix, count: usize) -> crate::error::Result<Matrix> {
    let out = run_protocol(a, b, config)?;
    let subset: Vec<usize> = (0..count).collect();
    phase3_reconstruct(config, &out.transcript, &subset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_range("4").unwrap(), vec![4]);
        assert_eq!(parse_range("1,5").unwrap(), vec![1, 5]);
        assert!(matches!(parse_range("5..1"), Err(CliError::Usage(_))));
        assert!(matches!(parse_range(""), Err(CliError::Usage(_))));
    }

    #[test]
    fn precedence() {
        let st = Settings::parse("seed = 5\nm=12\n# comment\n").unwrap();
        assert_eq!(st.resolve(Some(9u64), "seed", 0).unwrap(), 9);
        assert_eq!(st.resolve(None::<u64>, "seed", 0).unwrap(), 5);
        assert_eq!(st.resolve(None::<u64>, "prime", 7).unwrap(), 7);
        assert!(Settings::parse("novalue").is_err());
    }

    #[test]
    fn analyze_row_count() {
        let zs: Vec<u64> = (1..=300).collect();
        let rows = analyze_rows(&[(4, 15)], &zs, &Scheme::ALL).unwrap();
        assert_eq!(rows.len(), 1500);
    }

    struct Corrupted;
    impl FormulaTable for Corrupted {
        fn gamma(&self, s: u64, t: u64, z: u64, lambda: u64) -> crate::error::Result<(u64, &'static str)> {
            let (n, b) = gamma_age(s, t, z, lambda)?;
            Ok(if b == "upsilon3" { (n + 1, b) } else { (n, b) })
        }
    }

    #[test]
    fn corrupted_table_is_reported() {
        let grid = Grid { max_s: 3, max_t: 3, max_st: 9, max_z: 4 };
        let clean = verify_grid(grid, &PrintedFormulas).unwrap();
        let bad = verify_grid(grid, &Corrupted).unwrap();
        assert!(bad.mismatches.len() > clean.mismatches.len());
        assert!(bad.mismatches.iter().any(|m| m.branch == "upsilon3"));
    }
}
