//! Acceptance criteria 1-9. Runs as a plain binary so every verdict line is
//! printed; exits non-zero when any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stnac::sim::{audit_privacy, SimConfig};
use stnac::workloads::{gen_random_mastn, gen_random_stn, Family, GenSpec, Mode};
use stnac::{
    enforce_ac, extract_bound_solution, oracle_minimal_domains, sample_solution, solve_distributed,
    verify_assignment, AcOutcome, AgentResult, Assignment, Bound, BoundSide, Interval, Mastn, Stn, VarId,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

// ---------------------------------------------------------------------------
// Criteria 1-3: centralized solver on random networks.

const STN_INSTANCES: usize = 1000;
const STN_DENSITIES: [f64; 3] = [0.05, 0.2, 0.5];
const STN_WEIGHTS: (i64, i64) = (-20, 20);
const STN_HORIZON: i64 = 200;
const SAMPLES_PER_INSTANCE: u64 = 20;
const SIZE_SWEEP: [usize; 4] = [100, 200, 400, 800];
const SIZE_SWEEP_DENSITY: f64 = 0.05;
const SIZE_SWEEP_SEEDS: u64 = 5;
const RATIO_GROWTH_TOLERANCE: f64 = 0.10;

/// Planted, free and planted-plus-one-random-constraint networks, so both
/// verdicts occur, including consistent networks close to the boundary.
fn random_stns() -> Vec<Stn> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5717);
    (0..STN_INSTANCES)
        .map(|i| {
            let mut spec = GenSpec::new(Family::RandomStn).with_seed(i as u64);
            spec.n = rng.random_range(2..=50);
            spec.density = STN_DENSITIES[i % 3];
            spec.weights = STN_WEIGHTS;
            spec.horizon = Some(STN_HORIZON);
            spec.mode = if (i / 3) % 3 == 1 { Mode::Free } else { Mode::Planted };
            let mut net = gen_random_stn(&spec).unwrap();
            if (i / 3) % 3 == 2 {
                let v = rng.random_range(0..spec.n);
                let w = (v + rng.random_range(1..spec.n)) % spec.n;
                let a = rng.random_range(STN_WEIGHTS.0..=STN_WEIGHTS.1);
                let b = rng.random_range(STN_WEIGHTS.0..=STN_WEIGHTS.1);
                net.add_constraint(VarId::from(v), VarId::from(w), Interval::finite(a.min(b), a.max(b)))
                    .unwrap();
            }
            net
        })
        .collect()
}

fn criterion_1(nets: &[Stn], outcomes: &[AcOutcome]) -> Verdict {
    let started = Instant::now();
    let mut mismatches = Vec::new();
    for (i, (net, ac)) in nets.iter().zip(outcomes).enumerate() {
        let oracle = oracle_minimal_domains(net).unwrap();
        let agree = ac.is_consistent() == oracle.is_consistent()
            && ac.closure().map(|c| c.domains.as_slice()) == oracle.domains();
        if !agree {
            mismatches.push(i);
        }
    }
    let consistent = outcomes.iter().filter(|o| o.is_consistent()).count();
    verdict(
        mismatches.is_empty(),
        format!(
            "{} networks ({consistent} consistent, {} inconsistent), {} mismatches {:?}, oracle pass {:.2}s",
            nets.len(),
            nets.len() - consistent,
            mismatches.len(),
            &mismatches[..mismatches.len().min(5)],
            started.elapsed().as_secs_f64()
        ),
    )
}

fn scaled(net: &Stn, k: i64) -> Stn {
    let scale = |i: Interval| {
        let (lo, hi) = i.bounds().expect("non-empty");
        let s = |b: Bound| match b {
            Bound::Finite(x) => Bound::Finite(k * x),
            other => other,
        };
        Interval::new(s(lo), s(hi))
    };
    let mut out = Stn::new(net.domains().iter().map(|&d| scale(d)).collect()).unwrap();
    for ((v, w), ivl) in net.constraints() {
        out.add_constraint(v, w, scale(ivl)).unwrap();
    }
    out
}

fn criterion_2(nets: &[Stn], outcomes: &[AcOutcome]) -> Verdict {
    let (mut checked, mut failures) = (0usize, Vec::new());
    for (i, (net, ac)) in nets.iter().zip(outcomes).enumerate() {
        if !ac.is_consistent() {
            continue;
        }
        let lower = extract_bound_solution(ac, BoundSide::Lower).unwrap();
        let upper = extract_bound_solution(ac, BoundSide::Upper).unwrap();
        let mut candidates = vec![(net, lower.clone()), (net, upper.clone())];
        let samples: Vec<Assignment> =
            (0..SAMPLES_PER_INSTANCE).map(|s| sample_solution(net, ac, s).unwrap()).collect();
        candidates.extend(samples.into_iter().map(|a| (net, a)));
        let doubled = scaled(net, 2);
        let midpoint = Assignment(lower.0.iter().zip(&upper.0).map(|(a, b)| a + b).collect());
        let twice = |a: &Assignment| Assignment(a.0.iter().map(|t| 2 * t).collect());
        candidates.push((&doubled, twice(&lower)));
        candidates.push((&doubled, twice(&upper)));
        candidates.push((&doubled, midpoint));
        for (target, a) in &candidates {
            checked += 1;
            if let Err(v) = verify_assignment(target, a) {
                failures.push(format!("network {i}: {v}"));
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!("{checked} assignments verified, {} failures {:?}", failures.len(), &failures[..failures.len().min(3)]),
    )
}

fn criterion_3(nets: &[Stn], outcomes: &[AcOutcome]) -> Verdict {
    let over_bound = nets
        .iter()
        .zip(outcomes)
        .filter(|(net, ac)| ac.stats().checks > 2 * (net.e() + net.n()) as u64 * (net.n() + 1) as u64)
        .count();

    let mut ratios = Vec::new();
    for n in SIZE_SWEEP {
        let mut sum = 0.0;
        for seed in 0..SIZE_SWEEP_SEEDS {
            let mut spec = GenSpec::new(Family::RandomStn).with_seed(seed);
            spec.n = n;
            spec.density = SIZE_SWEEP_DENSITY;
            spec.weights = STN_WEIGHTS;
            spec.horizon = Some(STN_HORIZON);
            spec.mode = Mode::Planted;
            let net = gen_random_stn(&spec).unwrap();
            let ac = enforce_ac(&net).unwrap();
            sum += ac.stats().checks as f64 / (net.e() * net.n()) as f64;
        }
        ratios.push(sum / SIZE_SWEEP_SEEDS as f64);
    }
    // Largest increase from any size to any larger size.
    let mut growth: f64 = 0.0;
    for i in 0..ratios.len() {
        for j in i + 1..ratios.len() {
            growth = growth.max(ratios[j] / ratios[i] - 1.0);
        }
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let shown: Vec<String> = SIZE_SWEEP.iter().zip(&ratios).map(|(n, r)| format!("n={n}:{r:.5}")).collect();
    verdict(
        over_bound == 0 && growth <= RATIO_GROWTH_TOLERANCE,
        format!(
            "{over_bound} networks over 2(e+n)(n+1); checks/(e*n) {} max {max_ratio:.5}, largest growth {:+.1}% (limit {:.0}%)",
            shown.join(" "),
            growth * 100.0,
            RATIO_GROWTH_TOLERANCE * 100.0
        ),
    )
}

// ---------------------------------------------------------------------------
// Criteria 4-6: distributed runs.

const MASTN_INSTANCES: u64 = 200;
const MAX_AGENTS: usize = 8;
const MAX_VARIABLES: usize = 80;
const SCHEDULER_SEEDS: u64 = 5;
const LATENCIES: [u64; 2] = [0, 3];

fn random_mastns() -> Vec<Mastn> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd15);
    (0..MASTN_INSTANCES)
        .map(|seed| {
            let agents = rng.random_range(1..=MAX_AGENTS);
            let activities = rng.random_range(1..=(MAX_VARIABLES / (2 * agents)).min(10));
            let capacity = agents * (agents - 1) / 2 * (2 * activities).pow(2);
            let mut spec = GenSpec::new(Family::MultiagentRandom).with_seed(seed);
            spec.agents = agents;
            spec.activities = activities;
            spec.externals = Some(rng.random_range(0..=4 * agents).min(capacity));
            spec.horizon = Some(200);
            if seed % 2 == 0 {
                spec.mode = Mode::Planted;
                spec.weights = (0, 20);
            } else {
                spec.weights = (-20, 20);
            }
            gen_random_mastn(&spec).unwrap()
        })
        .collect()
}

#[derive(Default)]
struct DistributedTally {
    runs: usize,
    consistent: usize,
    mismatches: Vec<String>,
    privacy: Vec<String>,
    changed_views: usize,
    unfinished: Vec<String>,
    over_cap: usize,
    max_iteration_ratio: f64,
}

fn distributed_runs(instances: &[Mastn]) -> DistributedTally {
    let mut t = DistributedTally::default();
    for (i, m) in instances.iter().enumerate() {
        let before = m.clone();
        let central = enforce_ac(&m.flatten().unwrap().0).unwrap();
        for sched in 0..SCHEDULER_SEEDS {
            for latency in LATENCIES {
                t.runs += 1;
                let tag = format!("instance {i} seed {sched} latency {latency}");
                let run = match solve_distributed(m, &SimConfig { seed: sched, latency, ..SimConfig::default() }) {
                    Ok(run) => run,
                    Err(e) => {
                        t.unfinished.push(format!("{tag}: {e}"));
                        continue;
                    }
                };
                if run.is_consistent() {
                    t.consistent += 1;
                }
                let expected = central.closure().map(|c| c.domains.clone());
                if run.is_consistent() != central.is_consistent() || run.domains() != expected {
                    t.mismatches.push(tag.clone());
                }
                if let Err(v) = audit_privacy(&run.log, m) {
                    t.privacy.push(format!("{tag}: {v}"));
                }
                let views_same = run.agents.iter().enumerate().all(|(a, r)| r.view == m.agent_view(a).unwrap());
                if !views_same || *m != before {
                    t.changed_views += 1;
                }
                let all_done = run.agents.iter().all(|a| matches!(a.result, AgentResult::Consistent(_) | AgentResult::Inconsistent));
                if !all_done {
                    t.unfinished.push(tag.clone());
                }
                let cap = m.n() + 1;
                if run.max_iteration() > cap {
                    t.over_cap += 1;
                }
                t.max_iteration_ratio = t.max_iteration_ratio.max(run.max_iteration() as f64 / cap as f64);
            }
        }
    }
    t
}

fn criterion_4(t: &DistributedTally) -> Verdict {
    verdict(
        t.mismatches.is_empty() && t.unfinished.is_empty(),
        format!(
            "{} runs ({} consistent), {} mismatches with the centralized closure {:?}",
            t.runs,
            t.consistent,
            t.mismatches.len(),
            &t.mismatches[..t.mismatches.len().min(3)]
        ),
    )
}

fn criterion_5(t: &DistributedTally) -> Verdict {
    verdict(
        t.privacy.is_empty() && t.changed_views == 0,
        format!(
            "{} privacy violations {:?}, {} runs with altered agent constraints",
            t.privacy.len(),
            &t.privacy[..t.privacy.len().min(3)],
            t.changed_views
        ),
    )
}

fn criterion_6(t: &DistributedTally) -> Verdict {
    verdict(
        t.unfinished.is_empty() && t.over_cap == 0,
        format!(
            "{} runs unfinished or stuck {:?}, {} over n+1 iterations, max iterations/(n+1) = {:.3}",
            t.unfinished.len(),
            &t.unfinished[..t.unfinished.len().min(3)],
            t.over_cap,
            t.max_iteration_ratio
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 7: NCCC as the agent count grows.

const AGENT_SWEEP: [usize; 5] = [2, 4, 8, 12, 16];
const NCCC_SEEDS: u64 = 10;
const EXTERNALS_PER_EXTRA_AGENT: usize = 50;
const MAX_FIT_EXPONENT: f64 = 2.0;

/// Least-squares slope of log(y) against log(x).
fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let cov: f64 = logs.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = logs.iter().map(|&(x, _)| (x - mx).powi(2)).sum();
    cov / var
}

struct NcccSweep {
    slope: f64,
    /// Smallest c with NCCC <= 2*e_max*(n+1)*(1+c) on every run.
    overhead: f64,
    consistent: usize,
    means: Vec<(f64, f64)>,
}

fn nccc_sweep(mode: Mode) -> NcccSweep {
    let mut means = Vec::new();
    let mut overhead: f64 = 0.0;
    let mut consistent = 0;
    for agents in AGENT_SWEEP {
        let mut total = 0.0;
        for seed in 0..NCCC_SEEDS {
            let mut spec = GenSpec::new(Family::MultiagentRandom).with_seed(seed);
            spec.agents = agents;
            spec.externals = Some(EXTERNALS_PER_EXTRA_AGENT * (agents - 1));
            spec.mode = mode;
            let m = gen_random_mastn(&spec).unwrap();
            let run = solve_distributed(&m, &SimConfig { seed, ..SimConfig::default() }).unwrap();
            if run.is_consistent() {
                consistent += 1;
            }
            let e_max = (0..m.p())
                .map(|i| {
                    let view = m.agent_view(i).unwrap();
                    view.local.e() + view.external.len()
                })
                .max()
                .unwrap();
            let bound = 2.0 * e_max as f64 * (m.n() + 1) as f64;
            overhead = overhead.max(run.metrics.nccc as f64 / bound - 1.0);
            total += run.metrics.nccc as f64;
        }
        means.push((agents as f64, total / NCCC_SEEDS as f64));
    }
    NcccSweep { slope: loglog_slope(&means), overhead: overhead.max(0.0), consistent, means }
}

fn criterion_7() -> Verdict {
    let runs = AGENT_SWEEP.len() * NCCC_SEEDS as usize;
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, mode) in [("free", Mode::Free), ("planted", Mode::Planted)] {
        let s = nccc_sweep(mode);
        pass &= s.slope < MAX_FIT_EXPONENT;
        let shown: Vec<String> = s.means.iter().map(|(n, y)| format!("N={n}:{y:.0}")).collect();
        parts.push(format!(
            "{label} ({}/{runs} consistent) mean NCCC {} fit exponent {:.3}, sync overhead constant {:.3}",
            s.consistent,
            shown.join(" "),
            s.slope,
            s.overhead
        ));
    }
    verdict(pass, format!("{}; exponent limit {MAX_FIT_EXPONENT}", parts.join("; ")))
}

// ---------------------------------------------------------------------------
// Criterion 8: interval algebra.

const LAW_TRIPLES: usize = 10_000;
const BRUTE_FORCE_WIDTH: i64 = 30;

fn random_bound(rng: &mut ChaCha8Rng, infinite: Bound) -> Bound {
    if rng.random_bool(0.1) {
        infinite
    } else {
        Bound::Finite(rng.random_range(-1000..=1000))
    }
}

fn random_interval(rng: &mut ChaCha8Rng) -> Interval {
    if rng.random_bool(0.05) {
        return Interval::EMPTY;
    }
    Interval::new(random_bound(rng, Bound::NegInf), random_bound(rng, Bound::PosInf))
}

/// An interval containing `t`, possibly unbounded on either side.
fn interval_around(rng: &mut ChaCha8Rng, t: i64) -> Interval {
    let lo = if rng.random_bool(0.1) { Bound::NegInf } else { Bound::Finite(t - rng.random_range(0..=500)) };
    let hi = if rng.random_bool(0.1) { Bound::PosInf } else { Bound::Finite(t + rng.random_range(0..=500)) };
    Interval::new(lo, hi)
}

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a75);
    let c = |a: Interval, b: Interval| a.compose(&b).unwrap();
    let mut counterexamples = Vec::new();
    for _ in 0..LAW_TRIPLES {
        let (a, b, d) = (random_interval(&mut rng), random_interval(&mut rng), random_interval(&mut rng));
        if c(c(a, b), d) != c(a, c(b, d)) {
            counterexamples.push(format!("compose associativity {a} {b} {d}"));
        }
        if a.intersect(&b).intersect(&d) != a.intersect(&b.intersect(&d)) {
            counterexamples.push(format!("intersect associativity {a} {b} {d}"));
        }
        if a.inverse().inverse() != a {
            counterexamples.push(format!("inverse involution {a}"));
        }
        // Overlapping pair so the intersection is non-empty.
        let t = rng.random_range(-1000..=1000);
        let (j, k) = (interval_around(&mut rng, t), interval_around(&mut rng, t));
        if c(a, j.intersect(&k)) != c(a, j).intersect(&c(a, k)) {
            counterexamples.push(format!("distributivity {a} {j} {k}"));
        }
        let lo1 = rng.random_range(-50..=50);
        let lo2 = rng.random_range(-50..=50);
        let x = Interval::finite(lo1, lo1 + rng.random_range(0..=BRUTE_FORCE_WIDTH));
        let y = Interval::finite(lo2, lo2 + rng.random_range(0..=BRUTE_FORCE_WIDTH));
        let xy = c(x, y);
        let (xlo, xhi) = x.finite_bounds().unwrap();
        for t in -120..=120 {
            let brute = (xlo..=xhi).any(|u| y.contains(t - u));
            if xy.contains(t) != brute {
                counterexamples.push(format!("membership {x} {y} at {t}"));
                break;
            }
        }
    }
    verdict(
        counterexamples.is_empty(),
        format!(
            "{LAW_TRIPLES} triples, {} counterexamples {:?}",
            counterexamples.len(),
            &counterexamples[..counterexamples.len().min(3)]
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 9: CLI determinism.

fn stnac(args: &[&str], dir: &Path) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_stnac"))
        .args(args)
        .current_dir(dir)
        .env_remove("STNAC_SEED")
        .output()
        .expect("run stnac");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn criterion_9() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let ring = data.join("ring4.mastn");
    let ring = ring.to_str().unwrap();
    std::fs::write(
        d.join("agents.conf"),
        "family = random-mastn\nsweep = agents\nvalues = 2,4,8\nseeds = 3\nlatency = 2\nthreads = 4\noutput = agents.csv\n",
    )
    .unwrap();
    std::fs::write(
        d.join("sizes.conf"),
        "family = scale-free\nsweep = n\nvalues = 50,100\nseeds = 3\nm = 3\nweights = -20..20\nthreads = 3\noutput = sizes.csv\n",
    )
    .unwrap();

    let mut differences = Vec::new();
    let mut compare = |name: &str, run: &dyn Fn(usize) -> Vec<u8>| {
        let (a, b) = (run(1), run(2));
        if a != b || a.is_empty() {
            differences.push(name.to_string());
        }
    };
    for conf in ["agents", "sizes"] {
        compare(&format!("bench {conf}"), &|round| {
            stnac(&["bench", &format!("{conf}.conf"), "--no-wall-time"], d);
            let csv = std::fs::read(d.join(format!("{conf}.csv"))).unwrap();
            std::fs::rename(d.join(format!("{conf}.csv")), d.join(format!("{conf}.{round}.csv"))).unwrap();
            csv
        });
    }
    for (seed, latency) in [("0", "0"), ("7", "3")] {
        compare(&format!("dsolve log seed={seed} latency={latency}"), &|round| {
            let log = format!("ring.{round}.log");
            let (code, stdout) =
                stnac(&["dsolve", ring, "--sched-seed", seed, "--latency", latency, "--log", &log, "--audit-privacy"], d);
            let mut bytes = std::fs::read(d.join(&log)).unwrap();
            bytes.extend(stdout);
            bytes.push(code as u8);
            bytes
        });
    }
    compare("gen random-mastn", &|round| {
        let file = format!("gen.{round}.mastn");
        stnac(&["gen", "random-mastn", "agents=3", "seed=5", "-o", &file], d);
        std::fs::read(d.join(file)).unwrap()
    });
    verdict(differences.is_empty(), format!("5 repeated CLI runs, differing outputs: {differences:?}"))
}

fn main() {
    let started = Instant::now();
    let nets = random_stns();
    let outcomes: Vec<AcOutcome> = nets.iter().map(|n| enforce_ac(n).unwrap()).collect();
    let mastns = random_mastns();
    let tally = distributed_runs(&mastns);

    let results = [
        ("oracle equivalence", criterion_1(&nets, &outcomes)),
        ("solution validity", criterion_2(&nets, &outcomes)),
        ("check-count bound", criterion_3(&nets, &outcomes)),
        ("distributed equals centralized", criterion_4(&tally)),
        ("privacy and unchanged constraints", criterion_5(&tally)),
        ("termination detection", criterion_6(&tally)),
        ("NCCC scaling", criterion_7()),
        ("interval laws", criterion_8()),
        ("CLI determinism", criterion_9()),
    ];
    let mut failed = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        println!("criterion {} [{name}]: {}: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed in {:.1}s", results.len() - failed, results.len(), started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
