//! `plamp`: closed itemset mining, LAMP significant-pattern mining, protocol
//! simulation, benchmarking and oracle verification.
//!
//! Exit status: 0 success, 1 usage error, 2 data error, 3 invariant or
//! verification failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use plamp::lamp::{mine_closed, run_lamp_with, EngineFault};
use plamp::oracle::{self, MAX_ORACLE_ITEMS};
use plamp::runtime::sim::{simulate, Schedule, SimConfig};
use plamp::runtime::{write_metrics_tsv, WorkerMetrics, METRICS_HEADER};
use plamp::{synth, Fault, Objective, RuntimeConfig, StatContext, TransactionDatabase, TransportKind};

#[derive(Parser)]
#[command(name = "plamp", version, about = "Parallel significant-pattern mining")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate closed itemsets at a fixed minimum support.
    Mine(MineArgs),
    /// Find significant itemsets with LAMP at family-wise error rate alpha.
    Lamp(LampArgs),
    /// Run the deterministic simulator and check protocol invariants.
    Sim(SimArgs),
    /// Time LAMP on the thread transport for several worker counts.
    Bench(BenchArgs),
    /// Compare the engine with the exhaustive oracle on small databases.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Transactions: whitespace-separated item names per line, or a `.csv`
    /// with a label column followed by 0/1 item columns and a header row.
    input: Option<PathBuf>,
    /// Labels file, one 0/1 per line (not used with `.csv` input).
    labels: Option<PathBuf>,
    /// Use a seeded synthetic database instead of files.
    #[arg(long, value_enum)]
    synthetic: Option<SynthKind>,
    /// Synthetic database: number of items.
    #[arg(long, default_value_t = 16)]
    items: usize,
    /// Synthetic database: number of transactions.
    #[arg(long, default_value_t = 200)]
    transactions: usize,
    /// Synthetic database: background item density.
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    /// Synthetic database: generator seed.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Random background plus a pattern enriched in positives.
    Planted,
    /// Independent random entries.
    Random,
    /// Nearly all of the search tree under the first item.
    Skewed,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportArg {
    Sim,
    Threads,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    DuplicateGive,
    LambdaOffByOne,
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, value_enum, default_value = "threads")]
    transport: TransportArg,
    /// Seeds victim selection and the simulator schedule.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Side length of the lifeline hypercube.
    #[arg(long = "lifeline-l", default_value_t = 2)]
    lifeline_l: usize,
    /// Random steal attempts before falling back to lifelines.
    #[arg(long = "steal-w", default_value_t = 1)]
    steal_w: usize,
    /// Target milliseconds of work between probes (threads).
    #[arg(long = "probe-ms", default_value_t = 1.0)]
    probe_ms: f64,
    /// Static first-level partition without work stealing.
    #[arg(long)]
    naive: bool,
    /// Simulator: maximum extra message delay in ticks.
    #[arg(long, default_value_t = 3)]
    max_delay: u32,
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<FaultArg>,
}

#[derive(Args)]
struct MineArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long)]
    min_support: u32,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output TSV path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-worker metrics TSV path.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct LampArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 8)]
    workers: usize,
    /// Number of consecutive seeds to run, starting at --seed.
    #[arg(long, default_value_t = 1)]
    sweep: u64,
    /// Messages delivered per activation at most.
    #[arg(long, default_value_t = 4)]
    max_batch: u32,
    /// Print the message trace to stderr.
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Worker counts, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    workers: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Check this many seeded random databases instead of one input.
    #[arg(long)]
    fuzz: Option<u64>,
}

enum CliError {
    Usage(String),
    Data(String),
    Failure(String),
}

impl From<plamp::Error> for CliError {
    fn from(e: plamp::Error) -> Self {
        match e {
            plamp::Error::Dataset(_) | plamp::Error::Stats(_) => CliError::Data(e.to_string()),
            plamp::Error::InvalidConfig(_) => CliError::Usage(e.to_string()),
            plamp::Error::Invariant(_) => CliError::Failure(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Mine(a) => cmd_mine(a),
        Command::Lamp(a) => cmd_lamp(a),
        Command::Sim(a) => cmd_sim(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(m)) => {
            eprintln!("FAILED: {m}");
            ExitCode::from(3)
        }
    }
}

fn load(data: &DataArgs) -> Result<TransactionDatabase, CliError> {
    match (data.synthetic, &data.input) {
        (Some(_), Some(_)) => Err(CliError::Usage("give either an input file or --synthetic, not both".into())),
        (None, None) => Err(CliError::Usage("an input file or --synthetic is required".into())),
        (None, Some(path)) => Ok(TransactionDatabase::load(path, data.labels.as_deref()).map_err(plamp::Error::from)?),
        (Some(kind), None) => {
            if data.transactions < 2 || data.items == 0 {
                return Err(CliError::Usage("synthetic data needs ≥ 2 transactions and ≥ 1 item".into()));
            }
            if !(0.0..=1.0).contains(&data.density) {
                return Err(CliError::Usage("--density must lie in [0,1]".into()));
            }
            Ok(match kind {
                SynthKind::Planted => {
                    let planted: Vec<usize> = (0..data.items.min(3)).collect();
                    synth::planted_database(data.data_seed, data.items, data.transactions, data.density, &planted)
                }
                SynthKind::Random => synth::random_database(data.data_seed, data.items, data.transactions, data.density),
                SynthKind::Skewed => {
                    let heavy = data.items.saturating_sub(1) / 2;
                    let light = data.items.saturating_sub(1) - heavy;
                    synth::skewed_database(
                        data.data_seed,
                        heavy,
                        data.transactions / 2,
                        light,
                        data.transactions - data.transactions / 2,
                    )
                }
            })
        }
    }
}

fn runtime_config(engine: &EngineArgs, workers: usize) -> Result<RuntimeConfig, CliError> {
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    if engine.lifeline_l < 2 {
        return Err(CliError::Usage("--lifeline-l must be at least 2".into()));
    }
    if !(engine.probe_ms > 0.0 && engine.probe_ms.is_finite()) {
        return Err(CliError::Usage("--probe-ms must be positive".into()));
    }
    Ok(RuntimeConfig {
        workers,
        transport: match engine.transport {
            TransportArg::Sim => TransportKind::Sim,
            TransportArg::Threads => TransportKind::Threads,
        },
        seed: engine.seed,
        lifeline_side: engine.lifeline_l,
        random_steals: engine.steal_w,
        probe_interval: Duration::from_secs_f64(engine.probe_ms / 1000.0),
        naive: engine.naive,
        sim: SimConfig {
            max_delay: engine.max_delay,
            schedule: Schedule::Seeded(engine.seed),
            ..Default::default()
        },
        fault: matches!(engine.inject_fault, Some(FaultArg::DuplicateGive)).then_some(Fault::DuplicateGive),
    })
}

fn engine_fault(engine: &EngineArgs) -> Option<EngineFault> {
    matches!(engine.inject_fault, Some(FaultArg::LambdaOffByOne)).then_some(EngineFault::LambdaOffByOne)
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--alpha must lie in (0,1), got {alpha}")))
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_metrics(path: &Option<PathBuf>, metrics: &[WorkerMetrics], waves: &plamp::dtd::WaveStats) -> Result<(), CliError> {
    if path.is_some() {
        let mut w = output(path)?;
        write_metrics_tsv(&mut w, metrics, waves)?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_mine(a: MineArgs) -> Result<(), CliError> {
    let config = runtime_config(&a.engine, a.workers)?;
    if a.min_support == 0 {
        return Err(CliError::Usage("--min-support must be at least 1".into()));
    }
    let db = load(&a.data)?;
    let report = mine_closed(&db, a.min_support, &config)?;
    let mut w = output(&a.out)?;
    report.write_tsv(&db, &mut w)?;
    w.flush()?;
    write_metrics(&a.metrics, &report.outcome.metrics, &report.outcome.waves)?;
    eprintln!("closed itemsets: {}", report.closed.len());
    Ok(())
}

fn cmd_lamp(a: LampArgs) -> Result<(), CliError> {
    check_alpha(a.alpha)?;
    let config = runtime_config(&a.engine, a.workers)?;
    let db = load(&a.data)?;
    let report = run_lamp_with(&db, a.alpha, &config, engine_fault(&a.engine))?;
    let mut w = output(&a.out)?;
    report.write_tsv(&mut w)?;
    w.flush()?;
    if a.metrics.is_some() {
        let merged = merge_metrics(&report.phase1.metrics, &report.phase2.metrics);
        let mut waves = report.phase1.waves.clone();
        waves.waves += report.phase2.waves.waves;
        waves.retries += report.phase2.waves.retries;
        waves.time_to_termination += report.phase2.waves.time_to_termination;
        write_metrics(&a.metrics, &merged, &waves)?;
    }
    eprintln!(
        "significant patterns: {} (CS {}, minimum support {})",
        report.patterns.len(),
        report.correction_factor,
        report.min_support
    );
    Ok(())
}

fn merge_metrics(a: &[WorkerMetrics], b: &[WorkerMetrics]) -> Vec<WorkerMetrics> {
    a.iter()
        .zip(b)
        .map(|(x, y)| WorkerMetrics {
            worker: x.worker,
            main_s: x.main_s + y.main_s,
            preprocess_s: x.preprocess_s + y.preprocess_s,
            probe_s: x.probe_s + y.probe_s,
            idle_s: x.idle_s + y.idle_s,
            nodes_expanded: x.nodes_expanded + y.nodes_expanded,
            nodes_pruned: x.nodes_pruned + y.nodes_pruned,
            steals_attempted: x.steals_attempted + y.steals_attempted,
            steals_succeeded: x.steals_succeeded + y.steals_succeeded,
            messages_sent: x.messages_sent + y.messages_sent,
        })
        .collect()
}

fn cmd_sim(a: SimArgs) -> Result<(), CliError> {
    check_alpha(a.alpha)?;
    let base = runtime_config(&a.engine, a.workers)?;
    let db = load(&a.data)?;
    let ctx = StatContext::new(db.num_transactions(), db.num_positive()).map_err(plamp::Error::from)?;
    let mut w = output(&a.out)?;
    writeln!(w, "# workers\t{}", a.workers)?;
    writeln!(w, "# max_delay\t{}", a.engine.max_delay)?;
    writeln!(w, "seed\tverdict\tticks\twaves\tretries\tsteal_requests\tlambda\tclosed_sets")?;
    let mut failures = Vec::new();
    for seed in a.engine.seed..a.engine.seed + a.sweep.max(1) {
        let mut config = base.clone();
        config.seed = seed;
        config.sim.schedule = Schedule::Seeded(seed);
        config.sim.max_batch = a.max_batch.max(1);
        config.sim.trace = a.trace;
        let phase1 = simulate(&db, &ctx, Objective::SupportIncrease { alpha: a.alpha }, &config);
        let mut violations = phase1.violations.clone();
        let mut trace = phase1.trace.clone();
        let (mut ticks, mut waves, mut retries) = (phase1.ticks, phase1.waves.waves, phase1.waves.retries);
        let mut closed = 0;
        let mut steals: u64 = phase1.metrics.iter().map(|m| m.steals_attempted).sum();
        if violations.is_empty() {
            let min_support = plamp::lamp::min_support_from(phase1.lambda.unwrap_or(1));
            let phase2 = simulate(&db, &ctx, Objective::Enumerate { min_support }, &config);
            violations.extend(phase2.violations);
            trace.extend(phase2.trace);
            ticks += phase2.ticks;
            waves += phase2.waves.waves;
            retries += phase2.waves.retries;
            closed = phase2.closed.len();
            steals += phase2.metrics.iter().map(|m| m.steals_attempted).sum::<u64>();
        }
        if a.trace {
            for line in &trace {
                eprintln!("[seed {seed}] {line}");
            }
        }
        let verdict = if violations.is_empty() { "ok" } else { "VIOLATION" };
        let lambda = phase1.lambda.map_or("NA".to_string(), |l| l.to_string());
        writeln!(w, "{seed}\t{verdict}\t{ticks}\t{waves}\t{retries}\t{steals}\t{lambda}\t{closed}")?;
        for v in violations {
            failures.push(format!("seed {seed}: {v}"));
        }
    }
    w.flush()?;
    if failures.is_empty() {
        Ok(())
    } else {
        for f in &failures {
            eprintln!("{f}");
        }
        Err(CliError::Failure(failures[0].clone()))
    }
}

fn cmd_bench(a: BenchArgs) -> Result<(), CliError> {
    check_alpha(a.alpha)?;
    let mut counts = a.workers.clone();
    if !counts.contains(&1) {
        counts.insert(0, 1);
    }
    let db = load(&a.data)?;
    let mut w = output(&a.out)?;
    writeln!(
        w,
        "# N\t{}\n# items\t{}\n# alpha\t{}",
        db.num_transactions(),
        db.num_items(),
        a.alpha
    )?;
    writeln!(w, "P\tmode\twall_s\tspeedup\t{METRICS_HEADER}")?;
    let modes: &[bool] = if a.engine.naive { &[false, true] } else { &[false] };
    let mut base_wall = None;
    for &p in &counts {
        for &naive in modes {
            let mut config = runtime_config(&a.engine, p)?;
            config.transport = TransportKind::Threads;
            config.naive = naive;
            let report = run_lamp_with(&db, a.alpha, &config, None)?;
            let wall = (report.phase1.wall + report.phase2.wall).as_secs_f64();
            if p == 1 && !naive {
                base_wall = Some(wall);
            }
            let speedup = base_wall.map_or(1.0, |b| b / wall);
            let mode = if naive { "naive" } else { "steal" };
            let metrics = merge_metrics(&report.phase1.metrics, &report.phase2.metrics);
            let total = metrics.iter().fold(WorkerMetrics::default(), |acc, m| {
                merge_metrics(&[acc], std::slice::from_ref(m)).remove(0)
            });
            let row = |worker: String, m: &WorkerMetrics| {
                format!(
                    "{p}\t{mode}\t{wall:.6}\t{speedup:.3}\t{worker}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}",
                    m.main_s,
                    m.preprocess_s,
                    m.probe_s,
                    m.idle_s,
                    m.nodes_expanded,
                    m.steals_attempted,
                    m.steals_succeeded,
                    m.messages_sent
                )
            };
            writeln!(w, "{}", row("all".into(), &total))?;
            for m in &metrics {
                writeln!(w, "{}", row(m.worker.to_string(), m))?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> Result<(), CliError> {
    check_alpha(a.alpha)?;
    let config = runtime_config(&a.engine, a.workers)?;
    let fault = engine_fault(&a.engine);
    let verify_one = |db: &TransactionDatabase, alpha: f64, label: &str| -> Result<(), CliError> {
        if db.num_items() > MAX_ORACLE_ITEMS {
            return Err(CliError::Data(format!(
                "verify supports at most {MAX_ORACLE_ITEMS} items; {label} has {}",
                db.num_items()
            )));
        }
        let report = run_lamp_with(db, alpha, &config, fault)?;
        match oracle::diff_lamp(db, &report)? {
            None => Ok(()),
            Some(diff) => Err(CliError::Failure(format!("{label} (alpha {alpha}): {diff}"))),
        }
    };
    match a.fuzz {
        Some(n) => {
            let alphas = [0.01, 0.05, 0.3];
            for i in 0..n {
                let seed = a.engine.seed.wrapping_add(i);
                let db = fuzz_database(seed);
                verify_one(&db, alphas[(i % 3) as usize], &format!("fuzz database seed {seed}"))?;
            }
            println!("ok: {n} databases match the oracle");
        }
        None => {
            let db = load(&a.data)?;
            verify_one(&db, a.alpha, "input")?;
            println!("ok: engine matches the oracle");
        }
    }
    Ok(())
}

/// Random database with at most 14 items and 40 transactions.
fn fuzz_database(seed: u64) -> TransactionDatabase {
    let items = 1 + (seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 60) as usize % 14;
    let rows = 2 + (seed.wrapping_mul(0xbf58_476d_1ce4_e5b9) >> 58) as usize % 39;
    let density = 0.15 + 0.6 * ((seed.wrapping_mul(0x94d0_49bb_1331_11eb) >> 11) as f64 / (1u64 << 53) as f64);
    synth::random_database(seed, items, rows, density)
}
