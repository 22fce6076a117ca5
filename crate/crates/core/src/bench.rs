//! Benchmark harness: random suites per (setting, n), every requested method
//! on every matrix, mean ± std tables, the PMH* ablation, and long-format CSV
//! for plotting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Method, SynthesisResult};
use crate::error::{Error, Result};
use crate::exact::{synthesize_exact, ORACLE_LIMIT};
use crate::generators::{gen_suite, suite_stream, LogBase, Setting};
use crate::gf2::BitMatrix;
use crate::pmh::{synthesize_pmh, PmhConfig};
use crate::ppo::{evaluate_best_of, read_checkpoint, PolicyParams};
use crate::resize::{embed, gaussian_stripe, synthesize_pmh_star};
use crate::rlenv::default_max_steps;
use crate::rng::Rng;
use crate::scalar::mean_std;

pub const RECORDS_HEADER: &str = "# cnotsynth records v1";
pub const SUMMARY_HEADER: &str = "# cnotsynth summary v1";
pub const ABLATION_HEADER: &str =
    "# cnotsynth ablation v1; difference = mean(pmh_star) - mean(rl), positive means the rl pipeline uses fewer gates";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub settings: Vec<Setting>,
    pub suite_size: usize,
    pub runs_per_matrix: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub log_base: LogBase,
    pub pmh: PmhConfig,
    pub policy: Option<PathBuf>,
    /// Episode cap for policy rollouts; `None` means `3 m^2`.
    pub max_steps: Option<usize>,
    /// Worker threads; `Some(1)` for a strictly sequential run.
    pub threads: Option<usize>,
    /// Store measured wall times; off by default so outputs are reproducible.
    pub record_timing: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: (3..=15).collect(),
            settings: Setting::ALL.to_vec(),
            suite_size: 100,
            runs_per_matrix: 100,
            methods: vec![Method::Pmh, Method::Rl, Method::PmhStar],
            seed: 0,
            log_base: LogBase::Natural,
            pmh: PmhConfig::default(),
            policy: None,
            max_steps: None,
            threads: None,
            record_timing: false,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.suite_size == 0 {
            return Err(Error::Config("suite_size must be at least 1".into()));
        }
        if self.runs_per_matrix == 0 {
            return Err(Error::Config("runs_per_matrix must be at least 1".into()));
        }
        if let Some(&n) = self.sizes.iter().find(|&&n| !(2..=64).contains(&n)) {
            return Err(Error::DimensionOutOfRange { n, max: 64 });
        }
        if self.sizes.is_empty() || self.settings.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("sizes, settings and methods must be non-empty".into()));
        }
        Ok(())
    }

    fn needs_policy(&self) -> bool {
        self.methods.iter().any(|m| matches!(m, Method::Rl | Method::RlEmbed | Method::RlStripe | Method::PmhStar))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: Method,
    pub setting: Setting,
    pub n: usize,
    pub matrix_id: usize,
    pub cnot_count: usize,
    /// Gates spent by striping before the finishing solver.
    pub prefix_count: usize,
    /// Gates of an embedded solution that touch padding wires.
    pub padding_gates: usize,
    pub verified: bool,
    pub wall_time: f64,
    /// The policy found no solution and PMH finished instead.
    pub fallback: bool,
}

/// Outcome of the policy pipeline on one matrix.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub result: SynthesisResult,
    pub prefix_count: usize,
    pub padding_gates: usize,
    pub fallback: bool,
}

/// Solves `source` with a size-`m` policy: embedding when `n < m`, directly
/// when `n = m`, after Gaussian striping when `n > m`. Unsolved instances are
/// finished by PMH on the same residual matrix and flagged.
pub fn rl_pipeline(
    policy: &PolicyParams<f32>,
    source: &BitMatrix,
    runs: usize,
    max_steps: usize,
    seed: u64,
    pmh: PmhConfig,
) -> Result<PipelineOutcome> {
    let start = Instant::now();
    let m = policy_m(policy);
    let n = source.n();

    let (circuit, method, prefix_count, padding_gates, fallback) = if n < m {
        let embedded = embed(source, m)?;
        let best = evaluate_best_of(policy, &embedded, runs, max_steps, seed)?;
        match best.result {
            Some(r) => {
                let pad = m - n;
                let padding = r.circuit.gates().iter().filter(|g| g.control < pad || g.target < pad).count();
                (r.circuit, Method::RlEmbed, 0, padding, false)
            }
            None => (synthesize_pmh(source, pmh)?.circuit, Method::RlEmbed, 0, 0, true),
        }
    } else if n == m {
        let best = evaluate_best_of(policy, source, runs, max_steps, seed)?;
        match best.result {
            Some(r) => (r.circuit, Method::Rl, 0, 0, false),
            None => (synthesize_pmh(source, pmh)?.circuit, Method::Rl, 0, 0, true),
        }
    } else {
        let red = gaussian_stripe(source, m)?;
        let best = evaluate_best_of(policy, &red.reduced, runs, max_steps, seed)?;
        let (block, fallback) = match best.result {
            Some(r) => (r.circuit, false),
            None => (synthesize_pmh(&red.reduced, pmh)?.circuit, true),
        };
        (red.compose(&block)?, Method::RlStripe, red.overhead(), 0, fallback)
    };

    // embedded solutions act on block_diag(I, source)
    let target = if circuit.n() > n { embed(source, m)? } else { source.clone() };
    let result = SynthesisResult::checked(&target, circuit, method, start.elapsed().as_secs_f64())?;
    if !result.verified {
        return Err(Error::Verification(format!("{method} circuit for an n = {n} matrix does not verify")));
    }
    Ok(PipelineOutcome {
        result,
        prefix_count,
        padding_gates,
        fallback,
    })
}

/// Maps an embedded solution back to `n` wires when it never touches padding.
pub fn embedded_on_source(circuit: &Circuit, n: usize) -> Option<Circuit> {
    crate::resize::unembed_circuit(circuit, n).ok()
}

fn policy_m(policy: &PolicyParams<f32>) -> usize {
    (policy.arch().input as f64).sqrt().round() as usize
}

/// Runs the configured benchmark, loading the policy checkpoint if a policy
/// method is requested.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    let policy = match (&cfg.policy, cfg.needs_policy()) {
        (Some(path), true) => Some(read_checkpoint(path)?.0),
        (None, true) => return Err(Error::Config("rl and pmh_star methods need a policy checkpoint".into())),
        _ => None,
    };
    run_benchmark_with(cfg, policy.as_ref())
}

/// As [`run_benchmark`] with an in-memory policy.
pub fn run_benchmark_with(cfg: &BenchConfig, policy: Option<&PolicyParams<f32>>) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    if cfg.needs_policy() && policy.is_none() {
        return Err(Error::Config("rl and pmh_star methods need a policy".into()));
    }
    let mut jobs = Vec::new();
    for &setting in &cfg.settings {
        for &n in &cfg.sizes {
            let suite = gen_suite(setting, n, cfg.suite_size, cfg.seed, cfg.log_base)?;
            jobs.extend(suite.into_iter().enumerate().map(|(id, m)| (setting, n, id, m)));
        }
    }
    let work = || {
        jobs.par_iter()
            .map(|(setting, n, id, m)| bench_one(cfg, policy, *setting, *n, *id, m))
            .collect::<Result<Vec<_>>>()
    };
    let nested = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let mut records: Vec<BenchRecord> = nested.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.setting, r.n, r.matrix_id, r.method));
    Ok(records)
}

fn bench_one(
    cfg: &BenchConfig,
    policy: Option<&PolicyParams<f32>>,
    setting: Setting,
    n: usize,
    id: usize,
    m: &BitMatrix,
) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    let record = |method: Method, r: &SynthesisResult, prefix: usize, padding: usize, fallback: bool| -> Result<BenchRecord> {
        if !r.verified {
            return Err(Error::Verification(format!("{method} on {setting} n = {n} matrix {id}")));
        }
        Ok(BenchRecord {
            method,
            setting,
            n,
            matrix_id: id,
            cnot_count: r.cnot_count(),
            prefix_count: prefix,
            padding_gates: padding,
            verified: r.verified,
            wall_time: if cfg.record_timing { r.wall_time } else { 0.0 },
            fallback,
        })
    };
    for &method in &cfg.methods {
        match method {
            Method::Pmh => {
                let r = synthesize_pmh(m, PmhConfig::new(cfg.pmh.stripe_width.clamp(1, n)))?;
                out.push(record(Method::Pmh, &r, 0, 0, false)?);
            }
            Method::Rl | Method::RlEmbed | Method::RlStripe => {
                let policy = policy.expect("checked by caller");
                let steps = cfg.max_steps.unwrap_or_else(|| default_max_steps(policy_m(policy)));
                let seed = Rng::with_stream(cfg.seed, suite_stream(setting, n, id) | 1 << 63).next_u64();
                let p = rl_pipeline(policy, m, cfg.runs_per_matrix, steps, seed, cfg.pmh)?;
                out.push(record(Method::Rl, &p.result, p.prefix_count, p.padding_gates, p.fallback)?);
            }
            Method::PmhStar => {
                let pm = policy_m(policy.expect("checked by caller"));
                if n > pm {
                    let (r, overhead) = synthesize_pmh_star(m, pm, cfg.pmh)?;
                    out.push(record(Method::PmhStar, &r, overhead, 0, false)?);
                }
            }
            Method::Exact => {
                if n <= ORACLE_LIMIT {
                    out.push(record(Method::Exact, &synthesize_exact(m)?, 0, 0, false)?);
                }
            }
        }
    }
    Ok(out)
}

fn csv_with_header<W: Write>(mut w: W, header: &str) -> Result<csv::Writer<W>> {
    writeln!(w, "{header}")?;
    Ok(csv::Writer::from_writer(w))
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r)
}

pub fn write_records_csv<W: Write>(w: W, records: &[BenchRecord]) -> Result<()> {
    let mut out = csv_with_header(w, RECORDS_HEADER)?;
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(r: R) -> Result<Vec<BenchRecord>> {
    Ok(csv_reader(r).deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub setting: Setting,
    pub n: usize,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub fallbacks: usize,
}

/// Mean and sample std of the gate counts per (setting, n, method).
pub fn summarize(records: &[BenchRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::EmptyGroup("no records to summarize".into()));
    }
    let mut groups: BTreeMap<(Setting, usize, Method), (Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        if !r.verified {
            return Err(Error::Verification(format!(
                "unverified {} record for {} n = {} matrix {}",
                r.method, r.setting, r.n, r.matrix_id
            )));
        }
        let g = groups.entry((r.setting, r.n, r.method)).or_default();
        g.0.push(r.cnot_count as f64);
        g.1 += r.fallback as usize;
    }
    groups
        .into_iter()
        .map(|((setting, n, method), (mut counts, fallbacks))| {
            // fixed summation order regardless of record order
            counts.sort_by(f64::total_cmp);
            let (mean, std) = mean_std(&counts).ok_or_else(|| Error::EmptyGroup(format!("{method} {setting} n = {n}")))?;
            Ok(SummaryRow {
                method,
                setting,
                n,
                count: counts.len(),
                mean,
                std,
                fallbacks,
            })
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut out = csv_with_header(w, SUMMARY_HEADER)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_summary_csv<R: Read>(r: R) -> Result<Vec<SummaryRow>> {
    Ok(csv_reader(r).deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Aligned text table: one row per `n`, then RL and PMH for each setting.
pub fn render_table(rows: &[SummaryRow]) -> String {
    let settings: Vec<Setting> = Setting::ALL
        .into_iter()
        .filter(|s| rows.iter().any(|r| r.setting == *s))
        .collect();
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let cell = |s: Setting, n: usize, m: Method| {
        rows.iter()
            .find(|r| r.setting == s && r.n == n && r.method == m)
            .map_or_else(|| "-".to_string(), |r| format!("{:.2} ± {:.2}", r.mean, r.std))
    };

    let mut out = String::new();
    let _ = write!(out, "{:>4}", "n");
    for s in &settings {
        let _ = write!(out, " | {:^31}", s.to_string());
    }
    out.push('\n');
    let _ = write!(out, "{:>4}", "");
    for _ in &settings {
        let _ = write!(out, " | {:>15} {:>15}", "RL", "PMH");
    }
    out.push('\n');
    for &n in &sizes {
        let _ = write!(out, "{n:>4}");
        for &s in &settings {
            let _ = write!(out, " | {:>15} {:>15}", cell(s, n, Method::Rl), cell(s, n, Method::Pmh));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub setting: Setting,
    pub n: usize,
    pub rl_mean: f64,
    pub pmh_star_mean: f64,
    /// `pmh_star_mean - rl_mean`.
    pub difference: f64,
}

/// Per (setting, n) difference between the PMH* and RL pipeline means, for
/// every group that has PMH* records.
pub fn ablation_pmh_star(records: &[BenchRecord]) -> Result<Vec<AblationRow>> {
    let summary = summarize(records)?;
    let find = |s: Setting, n: usize, m: Method| summary.iter().find(|r| r.setting == s && r.n == n && r.method == m);
    let rows: Vec<AblationRow> = summary
        .iter()
        .filter(|r| r.method == Method::PmhStar)
        .map(|star| {
            let rl = find(star.setting, star.n, Method::Rl)
                .ok_or_else(|| Error::EmptyGroup(format!("no rl records for {} n = {}", star.setting, star.n)))?;
            Ok(AblationRow {
                setting: star.setting,
                n: star.n,
                rl_mean: rl.mean,
                pmh_star_mean: star.mean,
                difference: star.mean - rl.mean,
            })
        })
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return Err(Error::EmptyGroup("no pmh_star records".into()));
    }
    Ok(rows)
}

pub fn write_ablation_csv<W: Write>(w: W, rows: &[AblationRow]) -> Result<()> {
    let mut out = csv_with_header(w, ABLATION_HEADER)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LinePoint {
    method: Method,
    setting: Setting,
    n: usize,
    value: f64,
    std: f64,
    count: usize,
    fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DistPoint {
    method: Method,
    setting: Setting,
    n: usize,
    matrix_id: usize,
    value: usize,
}

/// Writes `lines.csv` (one row per summary group, mean in `value`) and
/// `distribution.csv` (one row per record) into `dir`.
pub fn emit_plot_data(dir: &Path, summary: &[SummaryRow], records: &[BenchRecord]) -> Result<Vec<PathBuf>> {
    if summary.is_empty() {
        return Err(Error::EmptyGroup("empty summary".into()));
    }
    fs::create_dir_all(dir)?;
    let lines = dir.join("lines.csv");
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&lines)?));
    for r in summary {
        w.serialize(LinePoint {
            method: r.method,
            setting: r.setting,
            n: r.n,
            value: r.mean,
            std: r.std,
            count: r.count,
            fallbacks: r.fallbacks,
        })?;
    }
    w.flush()?;

    let dist = dir.join("distribution.csv");
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&dist)?));
    for r in records {
        w.serialize(DistPoint {
            method: r.method,
            setting: r.setting,
            n: r.n,
            matrix_id: r.matrix_id,
            value: r.cnot_count,
        })?;
    }
    w.flush()?;
    Ok(vec![lines, dist])
}

/// Reads `lines.csv` back into summary rows.
pub fn read_plot_lines(path: &Path) -> Result<Vec<SummaryRow>> {
    let rows: Vec<LinePoint> = csv_reader(File::open(path)?).deserialize().collect::<std::result::Result<_, _>>()?;
    Ok(rows
        .into_iter()
        .map(|p| SummaryRow {
            method: p.method,
            setting: p.setting,
            n: p.n,
            count: p.count,
            mean: p.value,
            std: p.std,
            fallbacks: p.fallbacks,
        })
        .collect())
}

/// Writes records.csv, summary.csv, ablation.csv (when PMH* ran) and
/// plotdata/ under `dir`.
pub fn write_outputs(dir: &Path, records: &[BenchRecord]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("records.csv");
    write_records_csv(BufWriter::new(File::create(&path)?), records)?;
    written.push(path);
    let summary = summarize(records)?;
    let path = dir.join("summary.csv");
    write_summary_csv(BufWriter::new(File::create(&path)?), &summary)?;
    written.push(path);
    if records.iter().any(|r| r.method == Method::PmhStar) {
        let path = dir.join("ablation.csv");
        write_ablation_csv(BufWriter::new(File::create(&path)?), &ablation_pmh_star(records)?)?;
        written.push(path);
    }
    written.extend(emit_plot_data(&dir.join("plotdata"), &summary, records)?);
    Ok(written)
}
