//! `stnac` command-line front end.
//!
//! Exit status: 0 consistent (or success), 1 inconsistent, 2 usage, IO or
//! solver error.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Parser, Subcommand};
use stnac::metrics::emit_csv;
use stnac::mastn::parse_mastn;
use stnac::oracle::Vertex;
use stnac::sim::{audit_privacy, SimConfig};
use stnac::stn::parse_stn;
use stnac::workloads::{generate, render, Family, GenSpec, Instance};
use stnac::{
    enforce_ac, extract_bound_solution, oracle_minimal_domains, sample_solution, solve_distributed,
    verify_assignment, AcOutcome, AgentResult, BoundSide, OracleOutcome, RunMetrics, Stn,
};

#[derive(Parser)]
#[command(name = "stnac", version, about = "Arc-consistency solvers for simple temporal networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a `.stn` file to its minimal domains.
    Solve {
        file: PathBuf,
        /// Print an assignment: `lower`, `upper` or `sample:<seed>`.
        #[arg(long)]
        solution: Option<SolutionChoice>,
        /// Re-check the printed (or the lower-bound) assignment against the network.
        #[arg(long)]
        verify: bool,
    },
    /// Shortest-path verdict and minimal domains of a `.stn` file.
    Oracle { file: PathBuf },
    /// Solve a `.mastn` file with one simulated agent per local network.
    Dsolve {
        file: PathBuf,
        #[arg(long, env = "STNAC_SEED", default_value_t = 0)]
        sched_seed: u64,
        /// Per-hop message delay in logical time units.
        #[arg(long, default_value_t = 0)]
        latency: u64,
        /// Write the message log (tab-separated) to this path.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Check the message log for information leaks.
        #[arg(long)]
        audit_privacy: bool,
    },
    /// Generate an instance: `gen <family> key=value ...`.
    Gen {
        family: String,
        params: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a parameter sweep described by a key=value config, one CSV row per run.
    Bench {
        config: PathBuf,
        /// Report 0 instead of measured wall time so rows are reproducible.
        #[arg(long)]
        no_wall_time: bool,
        /// Worker threads; overrides the config's `threads`.
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug)]
enum SolutionChoice {
    Lower,
    Upper,
    Sample(u64),
}

impl FromStr for SolutionChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lower" => Ok(SolutionChoice::Lower),
            "upper" => Ok(SolutionChoice::Upper),
            _ => s
                .strip_prefix("sample:")
                .and_then(|seed| seed.parse().ok())
                .map(SolutionChoice::Sample)
                .ok_or_else(|| format!("expected lower, upper or sample:<seed>, got `{s}`")),
        }
    }
}

/// Reason for exit status 2.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<ExitCode, Failure>;

fn verdict_code(consistent: bool) -> ExitCode {
    if consistent {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn load_stn(path: &Path) -> Result<Stn, Failure> {
    parse_stn(&read(path)?).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn print_domains(out: &mut impl Write, net: &Stn, domains: &[stnac::Interval]) -> io::Result<()> {
    for v in net.var_ids() {
        writeln!(out, "{} {}", net.label(v), domains[v.index()])?;
    }
    Ok(())
}

fn solve(file: &Path, solution: Option<SolutionChoice>, verify: bool) -> Outcome {
    let net = load_stn(file)?;
    let outcome = enforce_ac(&net)?;
    let stats = outcome.stats();
    eprintln!("iterations={} checks={}", stats.iterations, stats.checks);
    let mut out = io::stdout().lock();
    let AcOutcome::Closure(closure) = &outcome else {
        writeln!(out, "inconsistent")?;
        return Ok(verdict_code(false));
    };
    print_domains(&mut out, &net, &closure.domains)?;
    if solution.is_none() && !verify {
        return Ok(verdict_code(true));
    }
    let assignment = match solution.unwrap_or(SolutionChoice::Lower) {
        SolutionChoice::Lower => extract_bound_solution(&outcome, BoundSide::Lower)?,
        SolutionChoice::Upper => extract_bound_solution(&outcome, BoundSide::Upper)?,
        SolutionChoice::Sample(seed) => sample_solution(&net, &outcome, seed)?,
    };
    if solution.is_some() {
        writeln!(out, "solution")?;
        for v in net.var_ids() {
            writeln!(out, "{} {}", net.label(v), assignment.value(v))?;
        }
    }
    if verify {
        match verify_assignment(&net, &assignment) {
            Ok(()) => writeln!(out, "verify: pass")?,
            Err(violation) => return Err(Failure(format!("verify: fail ({violation})"))),
        }
    }
    Ok(verdict_code(true))
}

fn oracle(file: &Path) -> Outcome {
    let net = load_stn(file)?;
    let mut out = io::stdout().lock();
    match oracle_minimal_domains(&net)? {
        OracleOutcome::Minimal(domains) => {
            print_domains(&mut out, &net, &domains)?;
            Ok(verdict_code(true))
        }
        OracleOutcome::NegativeCycle { cycle, weight } => {
            let names: Vec<String> = cycle
                .iter()
                .map(|v| match v {
                    Vertex::Origin => "o".to_string(),
                    Vertex::Var(v) => net.label(*v),
                })
                .collect();
            eprintln!("negative cycle (weight {weight}): {}", names.join(" -> "));
            writeln!(out, "inconsistent")?;
            Ok(verdict_code(false))
        }
    }
}

fn dsolve(file: &Path, sched_seed: u64, latency: u64, log: Option<&Path>, audit: bool) -> Outcome {
    let m = parse_mastn(&read(file)?).map_err(|e| Failure(format!("{}: {e}", file.display())))?;
    let cfg = SimConfig { seed: sched_seed, latency, ..SimConfig::default() };
    let run = solve_distributed(&m, &cfg)?;
    let metrics = &run.metrics;
    eprintln!(
        "iterations={} checks={} nccc={} messages={} setup_messages={}",
        run.max_iteration(),
        metrics.total_checks,
        metrics.nccc,
        metrics.messages,
        metrics.setup_messages
    );
    if let Some(path) = log {
        fs::write(path, run.log.to_tsv()).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    }
    let mut out = io::stdout().lock();
    if run.is_consistent() {
        for (i, agent) in run.agents.iter().enumerate() {
            let AgentResult::Consistent(domains) = &agent.result else { unreachable!("checked consistent") };
            let net = &m.agents()[i];
            for v in net.var_ids() {
                writeln!(out, "{}.{} {}", i, net.label(v), domains[v.index()])?;
            }
        }
    } else {
        writeln!(out, "inconsistent")?;
    }
    if audit {
        match audit_privacy(&run.log, &m) {
            Ok(()) => writeln!(out, "privacy: pass")?,
            Err(v) => {
                writeln!(out, "privacy: fail")?;
                return Err(Failure(v.to_string()));
            }
        }
    }
    Ok(verdict_code(run.is_consistent()))
}

fn default_seed() -> Result<u64, Failure> {
    match std::env::var("STNAC_SEED") {
        Ok(s) => s.parse().map_err(|_| Failure(format!("STNAC_SEED: not a number: `{s}`"))),
        Err(_) => Ok(0),
    }
}

fn gen(family: &str, params: &[String], output: Option<&Path>) -> Outcome {
    let mut spec = GenSpec::new(family.parse()?).with_seed(default_seed()?);
    for p in params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Failure(format!("expected key=value, got `{p}`")))?;
        spec.set(k, v)?;
    }
    let text = render(&spec, &generate(&spec)?);
    match output {
        Some(path) => fs::write(path, text).map_err(|e| Failure(format!("{}: {e}", path.display())))?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(ExitCode::SUCCESS)
}

/// Parsed bench config.
struct Suite {
    base: GenSpec,
    sweep: Option<(String, Vec<String>)>,
    seeds: Vec<u64>,
    latency: u64,
    output: Option<PathBuf>,
    threads: usize,
    wall_time: bool,
}

fn parse_suite(text: &str, dir: &Path) -> Result<Suite, Failure> {
    let mut entries = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure(format!("line {}: expected key = value", no + 1)))?;
        if entries.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(Failure(format!("line {}: duplicate key `{}`", no + 1, k.trim())));
        }
    }
    let family: Family = entries
        .remove("family")
        .ok_or_else(|| Failure("config needs `family`".into()))?
        .parse()?;
    let mut suite = Suite {
        base: GenSpec::new(family),
        sweep: None,
        seeds: (0..5).collect(),
        latency: 0,
        output: None,
        threads: 1,
        wall_time: true,
    };
    let sweep = entries.remove("sweep");
    let values = entries.remove("values");
    match (sweep, values) {
        (Some(key), Some(values)) => {
            let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
            suite.sweep = Some((key, values));
        }
        (None, None) => {}
        _ => return Err(Failure("`sweep` and `values` go together".into())),
    }
    for (k, v) in entries {
        let bad = |what: &str| Failure(format!("{k}: {what}, got `{v}`"));
        match k.as_str() {
            "seeds" => {
                suite.seeds = match v.split_once("..") {
                    Some((a, b)) => {
                        let (a, b): (u64, u64) = (a.parse().map_err(|_| bad("bad range"))?, b.parse().map_err(|_| bad("bad range"))?);
                        (a..b).collect()
                    }
                    None => (0..v.parse().map_err(|_| bad("expected a count or a..b"))?).collect(),
                }
            }
            "latency" => suite.latency = v.parse().map_err(|_| bad("expected an integer"))?,
            "output" => suite.output = Some(dir.join(&v)),
            "threads" => suite.threads = v.parse().map_err(|_| bad("expected an integer"))?,
            "wall_time" => suite.wall_time = v.parse().map_err(|_| bad("expected true or false"))?,
            _ => suite.base.set(&k, &v)?,
        }
    }
    Ok(suite)
}

fn run_point(spec: &GenSpec, id: String, latency: u64, wall_time: bool) -> Result<RunMetrics, Failure> {
    let instance = generate(spec)?;
    let started = Instant::now();
    let mut row = match &instance {
        Instance::Stn(net) => {
            let outcome = enforce_ac(net)?;
            let stats = outcome.stats();
            RunMetrics {
                instance: id,
                n: net.n(),
                e: net.e(),
                agents: 1,
                verdict: verdict_text(outcome.is_consistent()),
                iterations: stats.iterations,
                checks: stats.checks,
                nccc: stats.checks,
                messages: 0,
                wall_ms: 0.0,
            }
        }
        Instance::Mastn(m) => {
            let run = solve_distributed(m, &SimConfig { seed: spec.seed, latency, ..SimConfig::default() })?;
            RunMetrics {
                instance: id,
                n: m.n(),
                e: m.agents().iter().map(Stn::e).sum::<usize>() + m.external_count(),
                agents: m.p(),
                verdict: verdict_text(run.is_consistent()),
                iterations: run.max_iteration(),
                checks: run.metrics.total_checks,
                nccc: run.metrics.nccc,
                messages: run.metrics.messages,
                wall_ms: 0.0,
            }
        }
    };
    if wall_time {
        row.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    }
    Ok(row)
}

fn verdict_text(consistent: bool) -> String {
    if consistent { "consistent" } else { "inconsistent" }.to_string()
}

fn bench(config: &Path, no_wall_time: bool, threads: Option<usize>) -> Outcome {
    let dir = config.parent().unwrap_or(Path::new("."));
    let suite = parse_suite(&read(config)?, dir)?;
    let mut points = Vec::new();
    let values = match &suite.sweep {
        Some((key, values)) => values.iter().map(|v| Some((key.as_str(), v.as_str()))).collect(),
        None => vec![None],
    };
    for value in values {
        for &seed in &suite.seeds {
            let mut spec = suite.base.clone().with_seed(seed);
            let mut id = spec.family.to_string();
            if let Some((k, v)) = value {
                spec.set(k, v)?;
                id.push_str(&format!(":{k}={v}"));
            }
            id.push_str(&format!(":seed={seed}"));
            spec.validate()?;
            points.push((spec, id));
        }
    }

    let wall_time = suite.wall_time && !no_wall_time;
    let workers = threads.unwrap_or(suite.threads).clamp(1, points.len().max(1));
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<Result<RunMetrics, Failure>>>> = Mutex::new((0..points.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((spec, id)) = points.get(i) else { break };
                let row = run_point(spec, id.clone(), suite.latency, wall_time);
                rows.lock().expect("no worker panicked")[i] = Some(row);
            });
        }
    });
    let rows = rows
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every point ran"))
        .collect::<Result<Vec<_>, _>>()?;

    match &suite.output {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
            emit_csv(&rows, io::BufWriter::new(file))?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => emit_csv(&rows, io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { file, solution, verify } => solve(&file, solution, verify),
        Command::Oracle { file } => oracle(&file),
        Command::Dsolve { file, sched_seed, latency, log, audit_privacy } => {
            dsolve(&file, sched_seed, latency, log.as_deref(), audit_privacy)
        }
        Command::Gen { family, params, output } => gen(&family, &params, output.as_deref()),
        Command::Bench { config, no_wall_time, threads } => bench(&config, no_wall_time, threads),
    };
    match result {
        Ok(code) => code,
        Err(Failure(msg)) => {
            eprintln!("stnac: {msg}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solution_choice_parsing() {
        assert!(matches!("lower".parse(), Ok(SolutionChoice::Lower)));
        assert!(matches!("sample:7".parse(), Ok(SolutionChoice::Sample(7))));
        assert!("sample:x".parse::<SolutionChoice>().is_err());
    }

    #[test]
    fn suite_parsing() {
        let text = "family = random-mastn\nsweep = agents\nvalues = 2, 4\nseeds = 3..5 # two seeds\nlatency = 3\nactivities = 4\n";
        let suite = parse_suite(text, Path::new(".")).ok().unwrap();
        assert_eq!(suite.seeds, vec![3, 4]);
        assert_eq!(suite.latency, 3);
        assert_eq!(suite.base.activities, 4);
        assert_eq!(suite.sweep.unwrap().1, vec!["2", "4"]);
        assert!(parse_suite("sweep = n\n", Path::new(".")).is_err());
        assert!(parse_suite("family = grid\nsweep = rows\n", Path::new(".")).is_err());
    }
}
