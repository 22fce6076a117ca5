use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cnot_core::bench::{self, BenchConfig};
use cnot_core::exact::{optimal_count, ORACLE_LIMIT};
use cnot_core::generators::{gen_suite, write_suite};
use cnot_core::pmh::{synthesize_pmh, PmhConfig};
use cnot_core::ppo::{read_checkpoint, train, write_checkpoint, CheckpointMeta, TrainConfig};
use cnot_core::resize::{embed, synthesize_pmh_star, unembed_circuit};
use cnot_core::rlenv::{default_max_steps, Schedule};
use cnot_core::{verify_solves, BitMatrix, Circuit, LogBase, Method, Setting};

#[derive(Parser)]
#[command(name = "cnotsynth", version, about = "Synthesize short CNOT circuits for invertible boolean matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random benchmark matrices
    Gen(GenArgs),
    /// Synthesize a circuit for one matrix
    Synth(SynthArgs),
    /// Train a policy on the curriculum
    Train(TrainArgs),
    /// Run the benchmark protocol and write CSV outputs
    Bench(BenchArgs),
    /// Check that a circuit reduces a matrix to the identity
    Verify(VerifyArgs),
    /// Optimal CNOT count for small matrices (n <= 5)
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Base {
    E,
    Two,
}

impl From<Base> for LogBase {
    fn from(b: Base) -> Self {
        match b {
            Base::E => LogBase::Natural,
            Base::Two => LogBase::Two,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = parse_setting)]
    setting: Setting,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "e")]
    log_base: Base,
    /// Directory for matrix_<i>.txt files and manifest.json
    #[arg(long, conflicts_with = "out")]
    suite_dir: Option<PathBuf>,
    /// Single matrix file (requires --count 1)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_method, default_value = "pmh")]
    method: Method,
    /// Policy checkpoint for rl
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    stripe_width: usize,
    /// Reduced size for pmh-star when no policy is given
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write a JSON summary here instead of stdout
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Also write OpenQASM 2 gates to this file
    #[arg(long)]
    qasm: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    m: usize,
    /// JSON schedule; defaults to the built-in curriculum
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Total episodes; the schedule is rescaled to this length
    #[arg(long, conflicts_with = "episodes_scale")]
    episodes: Option<usize>,
    /// Fraction of the schedule's length to train for
    #[arg(long)]
    episodes_scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Hidden layer widths, comma separated
    #[arg(long, default_value = "128,128", value_delimiter = ',')]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    n_envs: usize,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, value_enum, default_value = "e")]
    log_base: Base,
    /// Write phase-boundary checkpoints into this directory
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// Write the training log as JSON
    #[arg(long)]
    log: Option<PathBuf>,
    /// Rollout threads; 1 for a sequential run
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Sizes as a list (3,5,8) or an inclusive range (3..15)
    #[arg(long, default_value = "3..15", value_parser = parse_sizes)]
    sizes: Sizes,
    #[arg(long, default_value = "rare,medium,overcooked", value_delimiter = ',', value_parser = parse_setting)]
    settings: Vec<Setting>,
    #[arg(long, default_value_t = 100)]
    suite_size: usize,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value = "pmh", value_delimiter = ',', value_parser = parse_method)]
    methods: Vec<Method>,
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    stripe_width: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "e")]
    log_base: Base,
    #[arg(long)]
    threads: Option<usize>,
    /// Record wall times (outputs then differ between runs)
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    matrix: PathBuf,
    circuit: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Also print an optimal circuit
    #[arg(long)]
    witness: bool,
}

#[derive(Clone)]
struct Sizes(Vec<usize>);

fn parse_sizes(s: &str) -> Result<Sizes, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: usize = b.trim_start_matches('=').trim().parse().map_err(|e| format!("{e}"))?;
        if a > b {
            return Err(format!("empty range {s}"));
        }
        return Ok(Sizes((a..=b).collect()));
    }
    s.split(',')
        .map(|p| p.trim().parse().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Sizes)
}

fn parse_setting(s: &str) -> Result<Setting, String> {
    s.parse().map_err(|e: cnot_core::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: cnot_core::Error| e.to_string())
}

/// A circuit failed verification; maps to exit code 2.
#[derive(Debug)]
struct VerificationFailed(String);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed: {}", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

fn read_matrix(path: &Path) -> anyhow::Result<BitMatrix> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse().with_context(|| format!("parsing {}", path.display()))
}

fn read_circuit(path: &Path) -> anyhow::Result<Circuit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse().with_context(|| format!("parsing {}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Replays `c` on `m`, embedding `m` first when the circuit has more wires.
fn solves(m: &BitMatrix, c: &Circuit) -> anyhow::Result<bool> {
    if c.n() > m.n() {
        return Ok(verify_solves(&embed(m, c.n())?, c)?);
    }
    Ok(verify_solves(m, c)?)
}

fn gen(a: GenArgs) -> anyhow::Result<()> {
    let base = a.log_base.into();
    let suite = gen_suite(a.setting, a.n, a.count, a.seed, base)?;
    match (a.suite_dir, a.out) {
        (Some(dir), None) => {
            let manifest = write_suite(&dir, a.setting, a.n, a.seed, base, &suite)?;
            println!("wrote {} matrices (budget {}) to {}", suite.len(), manifest.budget, dir.display());
        }
        (None, Some(out)) => {
            if suite.len() != 1 {
                bail!("--out writes a single matrix; use --count 1 or --suite-dir");
            }
            write_file(&out, suite[0].to_string())?;
        }
        _ => bail!("give exactly one of --suite-dir or --out"),
    }
    Ok(())
}

#[derive(Serialize)]
struct SynthSummary {
    method: String,
    n: usize,
    wires: usize,
    cnot_count: usize,
    prefix_count: usize,
    padding_gates: usize,
    fallback: bool,
    verified: bool,
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let m = read_matrix(&a.input)?;
    let n = m.n();
    let pmh = PmhConfig::new(a.stripe_width);
    let (circuit, prefix_count, padding_gates, fallback) = match a.method {
        Method::Pmh => {
            let cfg = PmhConfig::new(a.stripe_width.clamp(1, n));
            (synthesize_pmh(&m, cfg)?.circuit, 0, 0, false)
        }
        Method::Exact => {
            if n > ORACLE_LIMIT {
                bail!("exact synthesis supports n <= {ORACLE_LIMIT}, got {n}");
            }
            (optimal_count(&m)?.1, 0, 0, false)
        }
        Method::PmhStar => {
            let target = match (a.m, &a.policy) {
                (Some(k), _) => k,
                (None, Some(p)) => read_checkpoint(p)?.1.m,
                (None, None) => bail!("pmh-star needs --m or --policy"),
            };
            let (r, overhead) = synthesize_pmh_star(&m, target, pmh)?;
            (r.circuit, overhead, 0, false)
        }
        Method::Rl | Method::RlEmbed | Method::RlStripe => {
            let path = a.policy.as_ref().ok_or_else(|| anyhow!("rl needs --policy"))?;
            let (policy, meta) = read_checkpoint(path)?;
            let steps = meta
                .config
                .as_ref()
                .map_or_else(|| default_max_steps(meta.m), TrainConfig::episode_cap);
            let p = bench::rl_pipeline(&policy, &m, a.runs, steps, a.seed, pmh)?;
            // prefer an n-wire circuit when the padding was never touched
            let c = if p.result.circuit.n() > n {
                unembed_circuit(&p.result.circuit, n).unwrap_or(p.result.circuit)
            } else {
                p.result.circuit
            };
            (c, p.prefix_count, p.padding_gates, p.fallback)
        }
    };
    if !solves(&m, &circuit)? {
        return Err(VerificationFailed(format!("{} produced a circuit that does not solve the input", a.method)).into());
    }
    write_file(&a.out, format!("{circuit}\n"))?;
    if let Some(q) = &a.qasm {
        write_file(q, circuit.to_qasm())?;
    }
    let summary = SynthSummary {
        method: a.method.to_string(),
        n,
        wires: circuit.n(),
        cnot_count: circuit.len(),
        prefix_count,
        padding_gates,
        fallback,
        verified: true,
    };
    let json = serde_json::to_string_pretty(&summary)? + "\n";
    match &a.summary {
        Some(p) => write_file(p, json)?,
        None => io::stdout().write_all(json.as_bytes())?,
    }
    Ok(())
}

fn train_cmd(a: TrainArgs) -> anyhow::Result<()> {
    let schedule = match &a.schedule {
        Some(p) => Schedule::load(p)?,
        None => Schedule::standard(),
    };
    let schedule = match (a.episodes, a.episodes_scale) {
        (Some(e), _) => schedule.scaled_to(e)?,
        (None, Some(f)) => {
            if !(f > 0.0) {
                bail!("--episodes-scale must be positive");
            }
            schedule.scaled_to(((schedule.total() as f64) * f).round().max(1.0) as usize)?
        }
        (None, None) => schedule,
    };
    let mut cfg = TrainConfig::new(a.m);
    cfg.hidden = a.hidden;
    cfg.n_envs = a.n_envs;
    cfg.max_steps = a.max_steps;
    cfg.log_base = a.log_base.into();
    cfg.ppo.seed = a.seed;
    cfg.checkpoint_dir = a.checkpoint_dir;
    cfg.validate()?;

    let run = || train::<f32>(&cfg, &schedule);
    let (params, log) = match a.threads {
        Some(t) => rayon::ThreadPoolBuilder::new().num_threads(t).build()?.install(run)?,
        None => run()?,
    };
    let meta = CheckpointMeta::new(&cfg, None, schedule.total());
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_checkpoint(&a.out, &params, &meta)?;
    for p in &log.phases {
        eprintln!(
            "episodes {:>6}..{:<6} solved {:>6.2}%  mean length {:.2}",
            p.start,
            p.end,
            100.0 * p.solve_rate(),
            p.mean_length()
        );
    }
    if let Some(path) = &a.log {
        write_file(path, serde_json::to_string_pretty(&log)? + "\n")?;
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> anyhow::Result<()> {
    let cfg = BenchConfig {
        sizes: a.sizes.0,
        settings: a.settings,
        suite_size: a.suite_size,
        runs_per_matrix: a.runs,
        methods: a.methods,
        seed: a.seed,
        log_base: a.log_base.into(),
        pmh: PmhConfig::new(a.stripe_width),
        policy: a.policy,
        max_steps: None,
        threads: a.threads,
        record_timing: a.timing,
    };
    let records = bench::run_benchmark(&cfg)?;
    bench::write_outputs(&a.out, &records)?;
    print!("{}", bench::render_table(&bench::summarize(&records)?));
    Ok(())
}

fn verify(a: VerifyArgs) -> anyhow::Result<()> {
    let m = read_matrix(&a.matrix)?;
    let c = read_circuit(&a.circuit)?;
    if c.n() < m.n() {
        bail!("circuit has {} wires, matrix is {}x{}", c.n(), m.n(), m.n());
    }
    if !solves(&m, &c)? {
        return Err(VerificationFailed("circuit does not reduce the matrix to the identity".into()).into());
    }
    println!("ok: {} gates", c.len());
    Ok(())
}

fn oracle(a: OracleArgs) -> anyhow::Result<()> {
    let m = read_matrix(&a.input)?;
    let (count, witness) = optimal_count(&m)?;
    println!("{count}");
    if a.witness {
        println!("{witness}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Verify(a) => verify(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let verification = e.downcast_ref::<VerificationFailed>().is_some()
                || matches!(e.downcast_ref::<cnot_core::Error>(), Some(cnot_core::Error::Verification(_)));
            ExitCode::from(if verification { 2 } else { 1 })
        }
    }
}
