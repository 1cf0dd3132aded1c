use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use emask::corpus::{load_auto, save_bitmatrix, save_itemlist};
use emask::distortion::expected_row_length;
use emask::evaluation::run_experiment_with;
use emask::planner::{plan_report, ErrorNormalization, PlanThresholds};
use emask::privacy::{privacy_grid, write_privacy_grid_csv};
use emask::{
    compute_stats, distort_database, generate_synthetic, Apriori, CountingStrategy, DistortionParams, EmaskMiner,
    Error, ExperimentConfig, GenParams, TransactionDatabase,
};

#[derive(Parser)]
#[command(name = "emask", version, about = "Frequent itemset mining over randomly distorted transaction data")]
struct Cli {
    /// Worker threads for counting passes (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic market-basket database.
    Gen(GenArgs),
    /// Distort a database with keep-probabilities p (for 1s) and q (for 0s).
    Distort(DistortArgs),
    /// Mine frequent itemsets exactly.
    Mine(MineArgs),
    /// Mine frequent itemsets from a distorted database by support reconstruction.
    Emine(EmineArgs),
    /// List (p, q) combinations meeting privacy and accuracy thresholds.
    Plan(PlanArgs),
    /// Run a full distort-and-mine experiment against exact mining.
    Evaluate(EvaluateArgs),
    /// Basic privacy over a (p, q) grid.
    PrivacyGrid(GridArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Itemlist,
    Bitmatrix,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Rowscan,
    Columnar,
}

impl From<Strategy> for CountingStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Rowscan => CountingStrategy::RowScan,
            Strategy::Columnar => CountingStrategy::Columnar,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Printed,
    Exact,
}

#[derive(Args)]
struct Input {
    /// Item-list text or bit-matrix file (detected from the contents).
    #[arg(short, long)]
    input: PathBuf,
    /// Schema width for item-list input (default: largest item id + 1).
    #[arg(long)]
    num_items: Option<usize>,
}

#[derive(Args)]
struct GenArgs {
    /// Number of transactions.
    #[arg(long)]
    d: usize,
    /// Average transaction length.
    #[arg(long)]
    t: f64,
    /// Average pattern length.
    #[arg(long, default_value_t = 4.0)]
    i: f64,
    /// Number of items.
    #[arg(long)]
    n: usize,
    /// Number of patterns.
    #[arg(long, default_value_t = 2000)]
    l: usize,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Itemlist)]
    format: Format,
}

#[derive(Args)]
struct DistortArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    seed: u64,
    /// Bit-matrix output.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct MineArgs {
    #[command(flatten)]
    input: Input,
    /// Minimum support as a fraction of rows.
    #[arg(long)]
    minsup: f64,
    /// Lattice TSV output (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Strategy::Rowscan)]
    strategy: Strategy,
}

#[derive(Args)]
struct EmineArgs {
    #[command(flatten)]
    mine: MineArgs,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
}

#[derive(Args)]
struct PlanArgs {
    /// Average item support of the data to be distorted.
    #[arg(long)]
    s0: f64,
    #[arg(long, default_value_t = 1_000_000)]
    dbsize: usize,
    #[arg(long, default_value_t = 90.0)]
    bp_min: f64,
    #[arg(long, default_value_t = 1.05)]
    slack: f64,
    #[arg(long, default_value_t = 0.95)]
    q_min: f64,
    #[arg(long, value_enum, default_value_t = Mode::Printed)]
    mode: Mode,
    /// Full grid CSV output.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    num_items: Option<usize>,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    minsup: f64,
    /// Directory for report.txt, report.csv and levels.csv.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 3)]
    timing_runs: usize,
    #[arg(long, value_enum, default_value_t = Strategy::Rowscan)]
    strategy: Strategy,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    s0: f64,
    #[arg(long, default_value_t = 0.0)]
    p_from: f64,
    #[arg(long, default_value_t = 1.0)]
    p_to: f64,
    #[arg(long, default_value_t = 0.05)]
    p_step: f64,
    #[arg(long, default_value_t = 0.9)]
    q_from: f64,
    #[arg(long, default_value_t = 0.99)]
    q_to: f64,
    #[arg(long, default_value_t = 0.01)]
    q_step: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Lib(Error::Config(_)) => 1,
            Failure::Lib(Error::Io(_) | Error::Parse { .. } | Error::ItemOutOfRange { .. } | Error::Format(_)) => 3,
            Failure::Lib(_) => 2,
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn read_db(path: &Path, num_items: Option<usize>) -> Result<TransactionDatabase, Failure> {
    let file = File::open(path)?;
    Ok(load_auto(BufReader::new(file), num_items)?)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn check_fraction(name: &str, v: f64) -> CliResult {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--{name} must lie in (0, 1], got {v}")))
    }
}

fn steps(from: f64, to: f64, step: f64) -> Result<Vec<f64>, Failure> {
    if step.is_nan() || step <= 0.0 || from > to {
        return Err(Failure::Usage(format!("bad range {from}..{to} step {step}")));
    }
    let count = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| ((from + k as f64 * step) * 1e9).round() / 1e9).collect())
}

fn gen(a: GenArgs) -> CliResult {
    let params = GenParams {
        num_transactions: a.d,
        avg_transaction_length: a.t,
        avg_pattern_length: a.i,
        num_items: a.n,
        num_patterns: a.l,
        seed: a.seed,
    };
    let db = generate_synthetic(&params)?;
    let mut out = BufWriter::new(File::create(&a.output)?);
    match a.format {
        Format::Itemlist => save_itemlist(&db, &mut out)?,
        Format::Bitmatrix => save_bitmatrix(&db, &mut out)?,
    }
    out.flush()?;
    let stats = compute_stats(&db)?;
    let nonempty = stats.item_supports.iter().filter(|&&s| s > 0.0).count();
    println!("rows={} items={} used_items={nonempty}", stats.dbsize, stats.num_items);
    println!("avg_row_length={:.4} avg_support={:.6}", stats.avg_row_length, stats.avg_support);
    Ok(())
}

fn distort(a: DistortArgs) -> CliResult {
    let params = DistortionParams::new(a.p, a.q, a.seed)?;
    let db = read_db(&a.input.input, a.input.num_items)?;
    let out_db = distort_database(&db, &params)?;
    let mut out = BufWriter::new(File::create(&a.output)?);
    save_bitmatrix(&out_db, &mut out)?;
    out.flush()?;
    let rows = db.dbsize().max(1) as f64;
    let measured = out_db.total_ones() as f64 / rows;
    let expected = expected_row_length(db.total_ones() as f64 / rows, db.num_items() as f64, a.p, a.q);
    println!("rows={} items={}", db.dbsize(), db.num_items());
    println!("avg_row_length measured={measured:.4} expected={expected:.4}");
    Ok(())
}

fn mine(a: MineArgs) -> CliResult {
    check_fraction("minsup", a.minsup)?;
    let db = read_db(&a.input.input, a.input.num_items)?;
    let lattice = Apriori { strategy: a.strategy.into(), max_level: None }.mine(&db, a.minsup)?;
    lattice.write_tsv(sink(a.output.as_deref())?, None)?;
    Ok(())
}

fn emine(a: EmineArgs) -> CliResult {
    let m = a.mine;
    check_fraction("minsup", m.minsup)?;
    for (name, v) in [("p", a.p), ("q", a.q)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Failure::Usage(format!("--{name} must lie in [0, 1], got {v}")));
        }
    }
    let db = read_db(&m.input.input, m.input.num_items)?;
    let lattice = EmaskMiner { strategy: m.strategy.into(), max_level: None }.mine(&db, a.p, a.q, m.minsup)?;
    lattice.write_tsv(sink(m.output.as_deref())?, None)?;
    Ok(())
}

fn plan(a: PlanArgs) -> CliResult {
    check_fraction("s0", a.s0)?;
    let th = PlanThresholds {
        bp_min: a.bp_min,
        error_slack: a.slack,
        q_min: a.q_min,
        mode: match a.mode {
            Mode::Printed => ErrorNormalization::Printed,
            Mode::Exact => ErrorNormalization::Exact,
        },
        ..PlanThresholds::default()
    };
    let grid = match &a.output {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            let g = plan_report(a.s0, a.dbsize as f64, &th, &mut out)?;
            out.flush()?;
            g
        }
        None => plan_report(a.s0, a.dbsize as f64, &th, io::sink())?,
    };
    let mut out = io::stdout().lock();
    writeln!(out, "p,q,bp,error")?;
    for pt in grid.iter().filter(|pt| pt.qualifies()) {
        writeln!(out, "{},{},{:.4},{:.6}", pt.p, pt.q, pt.bp.unwrap_or(f64::NAN), pt.error)?;
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> CliResult {
    check_fraction("minsup", a.minsup)?;
    if a.timing_runs == 0 {
        return Err(Failure::Usage("--timing-runs must be positive".into()));
    }
    let params = DistortionParams::new(a.p, a.q, a.seed)?;
    let db = read_db(&a.original, a.num_items)?;
    let cfg = ExperimentConfig { strategy: a.strategy.into(), timing_runs: a.timing_runs, timing_threads: None };
    let report = run_experiment_with(&db, &params, a.minsup, &cfg)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let write = |name: &str, f: &dyn Fn(&mut dyn Write) -> emask::Result<()>| -> CliResult {
        let mut out = BufWriter::new(File::create(a.out_dir.join(name))?);
        f(&mut out)?;
        out.flush()?;
        Ok(())
    };
    write("report.txt", &|w| report.write_text(w))?;
    write("report.csv", &|w| report.write_csv(w))?;
    write("levels.csv", &|w| report.write_levels_csv(w))?;
    report.write_text(io::stdout().lock())?;
    Ok(())
}

fn grid(a: GridArgs) -> CliResult {
    check_fraction("s0", a.s0)?;
    let ps = steps(a.p_from, a.p_to, a.p_step)?;
    let qs = steps(a.q_from, a.q_to, a.q_step)?;
    let points = privacy_grid(&ps, &qs, a.s0)?;
    write_privacy_grid_csv(&points, sink(a.output.as_deref())?)?;
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Lib(Error::Internal(e.to_string())))?;
    }
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Distort(a) => distort(a),
        Command::Mine(a) => mine(a),
        Command::Emine(a) => emine(a),
        Command::Plan(a) => plan(a),
        Command::Evaluate(a) => evaluate(a),
        Command::PrivacyGrid(a) => grid(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Usage(m) => m.clone(),
                Failure::Lib(e) => e.to_string(),
            };
            eprintln!("error: {msg}");
            ExitCode::from(f.exit_code())
        }
    }
}
