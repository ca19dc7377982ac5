//! Seeded instance generators.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`, consumed in a
//! fixed order, so a `GenSpec` and seed always produce the same instance.
//!
//! Two interval modes exist. `free` draws both endpoints uniformly from the
//! weight range, which yields consistent and inconsistent instances alike.
//! `planted` first draws a hidden schedule and then picks every interval so
//! that it contains the hidden difference, which guarantees consistency.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::interval::{Bound, Interval};
use crate::mastn::{serialize_mastn, AgentVar, Mastn};
use crate::stn::{serialize_stn, Stn, VarId, DEFAULT_MAGNITUDE_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Each variable pair is constrained with probability `density`.
    RandomStn,
    /// Preferential attachment with `attach` edges per new vertex.
    ScaleFree,
    /// `rows x cols` lattice, a sparse road-network-like topology.
    Grid,
    /// Agents with start/end variables per activity and random externals.
    MultiagentRandom,
    /// Tasks round-robined to agents with chained precedences.
    FactoryTasks,
}

impl Family {
    pub const ALL: [Family; 5] =
        [Family::RandomStn, Family::ScaleFree, Family::Grid, Family::MultiagentRandom, Family::FactoryTasks];

    pub fn name(self) -> &'static str {
        match self {
            Family::RandomStn => "random-stn",
            Family::ScaleFree => "scale-free",
            Family::Grid => "grid",
            Family::MultiagentRandom => "random-mastn",
            Family::FactoryTasks => "factory",
        }
    }

    pub fn is_multiagent(self) -> bool {
        matches!(self, Family::MultiagentRandom | Family::FactoryTasks)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Family> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown family `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Free,
    Planted,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Free => "free",
            Mode::Planted => "planted",
        })
    }
}

/// Generator parameters. Fields a family does not use are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub family: Family,
    pub seed: u64,
    pub n: usize,
    /// Edge probability for `random-stn`.
    pub density: f64,
    /// Edges per new vertex for `scale-free`.
    pub attach: usize,
    pub rows: usize,
    pub cols: usize,
    /// Inclusive range interval endpoints are drawn from.
    pub weights: (i64, i64),
    /// Domain upper bound; `None` means `10 * n * max|weight|`.
    pub horizon: Option<i64>,
    pub agents: usize,
    pub activities: usize,
    /// Extra local constraints per agent; `None` means one per activity,
    /// capped by the free pairs.
    pub local: Option<usize>,
    /// External constraints; `None` means `50 * (agents - 1)` for
    /// `random-mastn` and `agents - 1` extra links for `factory`.
    pub externals: Option<usize>,
    pub tasks: usize,
    pub mode: Mode,
}

impl GenSpec {
    pub fn new(family: Family) -> GenSpec {
        GenSpec {
            family,
            seed: 0,
            n: 20,
            density: 0.2,
            attach: 2,
            rows: 5,
            cols: 5,
            weights: (1, 100),
            horizon: None,
            agents: 2,
            activities: 10,
            local: None,
            externals: None,
            tasks: 8,
            mode: Mode::Free,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> GenSpec {
        self.seed = seed;
        self
    }

    /// Sets one parameter from its textual `key=value` form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidParam(format!("{key}: cannot parse `{value}`")))
        }
        match key {
            "family" => self.family = value.parse()?,
            "seed" => self.seed = num(key, value)?,
            "n" => self.n = num(key, value)?,
            "density" => self.density = num(key, value)?,
            "m" | "attach" => self.attach = num(key, value)?,
            "rows" => self.rows = num(key, value)?,
            "cols" => self.cols = num(key, value)?,
            "weights" => {
                let (lo, hi) = value
                    .split_once("..")
                    .ok_or_else(|| Error::InvalidParam(format!("weights: expected `lo..hi`, got `{value}`")))?;
                self.weights = (num(key, lo)?, num(key, hi)?);
            }
            "horizon" | "H" => self.horizon = Some(num(key, value)?),
            "agents" | "N" => self.agents = num(key, value)?,
            "activities" => self.activities = num(key, value)?,
            "local" => self.local = Some(num(key, value)?),
            "externals" | "X" => self.externals = Some(num(key, value)?),
            "tasks" | "T" => self.tasks = num(key, value)?,
            "mode" => {
                self.mode = match value {
                    "free" => Mode::Free,
                    "planted" => Mode::Planted,
                    _ => return Err(Error::InvalidParam(format!("mode: expected free|planted, got `{value}`"))),
                }
            }
            _ => return Err(Error::InvalidParam(format!("unknown parameter `{key}`"))),
        }
        Ok(())
    }

    /// The parameters that influence this family, in a fixed order.
    pub fn params(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("family", self.family.to_string()), ("seed", self.seed.to_string())];
        match self.family {
            Family::RandomStn => {
                out.push(("n", self.n.to_string()));
                out.push(("density", self.density.to_string()));
            }
            Family::ScaleFree => {
                out.push(("n", self.n.to_string()));
                out.push(("m", self.attach.to_string()));
            }
            Family::Grid => {
                out.push(("rows", self.rows.to_string()));
                out.push(("cols", self.cols.to_string()));
            }
            Family::MultiagentRandom => {
                out.push(("agents", self.agents.to_string()));
                out.push(("activities", self.activities.to_string()));
                out.push(("local", self.local_count().to_string()));
                out.push(("externals", self.external_count().to_string()));
            }
            Family::FactoryTasks => {
                out.push(("agents", self.agents.to_string()));
                out.push(("tasks", self.tasks.to_string()));
                out.push(("externals", self.external_count().to_string()));
            }
        }
        out.push(("weights", format!("{}..{}", self.weights.0, self.weights.1)));
        out.push(("horizon", self.horizon().to_string()));
        out.push(("mode", self.mode.to_string()));
        out
    }

    /// One-line description used as the first line of generated files.
    pub fn header(&self) -> String {
        let mut line = String::from("# genspec:");
        for (k, v) in self.params() {
            line.push_str(&format!(" {k}={v}"));
        }
        match self.family {
            Family::ScaleFree => line.push_str(" (density parameter taken as attachment count m)"),
            Family::Grid => line.push_str(" (grid substitute for road-network topologies)"),
            _ => {}
        }
        line
    }

    /// Total variable count of the generated instance.
    pub fn variable_count(&self) -> usize {
        match self.family {
            Family::RandomStn | Family::ScaleFree => self.n,
            Family::Grid => self.rows * self.cols,
            Family::MultiagentRandom => self.agents * 2 * self.activities,
            Family::FactoryTasks => 2 * self.tasks,
        }
    }

    pub fn horizon(&self) -> i64 {
        self.horizon.unwrap_or_else(|| {
            let maxw = self.weights.0.unsigned_abs().max(self.weights.1.unsigned_abs()).max(1);
            (10 * self.variable_count().max(1) as u64 * maxw).min(DEFAULT_MAGNITUDE_CAP as u64) as i64
        })
    }

    fn local_count(&self) -> usize {
        self.local.unwrap_or(self.activities.min(self.local_capacity()))
    }

    /// Variable pairs of one agent not taken by a duration constraint.
    fn local_capacity(&self) -> usize {
        let per_agent = 2 * self.activities;
        (per_agent * per_agent.saturating_sub(1) / 2).saturating_sub(self.activities)
    }

    fn external_count(&self) -> usize {
        match self.family {
            Family::FactoryTasks => self.externals.unwrap_or(self.agents.saturating_sub(1)),
            _ => self.externals.unwrap_or(50 * self.agents.saturating_sub(1)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParam(msg));
        let (lo, hi) = self.weights;
        if lo > hi {
            return bad(format!("weights {lo}..{hi}: lower end exceeds upper end"));
        }
        if lo.unsigned_abs().max(hi.unsigned_abs()) > DEFAULT_MAGNITUDE_CAP as u64 {
            return bad("weights exceed the supported magnitude".into());
        }
        if self.horizon() < 0 || self.horizon() > DEFAULT_MAGNITUDE_CAP {
            return bad(format!("horizon {} out of range", self.horizon()));
        }
        match self.family {
            Family::RandomStn => {
                if self.n == 0 {
                    return bad("n must be positive".into());
                }
                if !(0.0..=1.0).contains(&self.density) {
                    return bad(format!("density {} outside [0,1]", self.density));
                }
            }
            Family::ScaleFree => {
                if self.attach == 0 || self.attach >= self.n {
                    return bad(format!("attachment m={} must satisfy 1 <= m < n={}", self.attach, self.n));
                }
            }
            Family::Grid => {
                if self.rows == 0 || self.cols == 0 {
                    return bad("rows and cols must be positive".into());
                }
            }
            Family::MultiagentRandom => {
                if self.agents == 0 || self.activities == 0 {
                    return bad("agents and activities must be positive".into());
                }
                let per_agent = 2 * self.activities;
                let local_capacity = self.local_capacity();
                if self.local_count() > local_capacity {
                    return bad(format!("local={} exceeds the {local_capacity} free pairs per agent", self.local_count()));
                }
                let capacity = self.agents * (self.agents - 1) / 2 * per_agent * per_agent;
                if self.external_count() > capacity {
                    return bad(format!("X={} exceeds the {capacity} cross-agent pairs", self.external_count()));
                }
            }
            Family::FactoryTasks => {
                if self.agents == 0 || self.tasks < self.agents {
                    return bad(format!("need 1 <= agents <= tasks, got agents={} tasks={}", self.agents, self.tasks));
                }
                if self.external_count() > 0 && self.agents < 2 {
                    return bad("externals need at least two agents".into());
                }
            }
        }
        if self.mode == Mode::Planted && self.family.is_multiagent() {
            let (_, hi) = self.weights;
            if hi > self.horizon() / 2 || lo < 0 {
                return bad("planted durations need 0 <= weights <= horizon/2".into());
            }
        }
        Ok(())
    }
}

impl fmt::Display for GenSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.params().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(" "))
    }
}

/// A generated instance of either kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instance {
    Stn(Stn),
    Mastn(Mastn),
}

impl Instance {
    pub fn n(&self) -> usize {
        match self {
            Instance::Stn(s) => s.n(),
            Instance::Mastn(m) => m.n(),
        }
    }
}

/// Generates the instance described by `spec`.
pub fn generate(spec: &GenSpec) -> Result<Instance> {
    Ok(match spec.family {
        Family::RandomStn => Instance::Stn(gen_random_stn(spec)?),
        Family::ScaleFree => Instance::Stn(gen_scale_free_stn(spec)?),
        Family::Grid => Instance::Stn(gen_grid_stn(spec)?),
        Family::MultiagentRandom => Instance::Mastn(gen_random_mastn(spec)?),
        Family::FactoryTasks => Instance::Mastn(gen_factory_mastn(spec)?),
    })
}

/// File text for a generated instance, starting with the genspec header.
pub fn render(spec: &GenSpec, instance: &Instance) -> String {
    let body = match instance {
        Instance::Stn(s) => serialize_stn(s),
        Instance::Mastn(m) => serialize_mastn(m),
    };
    format!("{}\n{body}", spec.header())
}

/// Draws intervals according to `spec.mode`.
struct Sampler {
    rng: ChaCha8Rng,
    lo: i64,
    hi: i64,
    horizon: i64,
    hidden: Vec<i64>,
}

impl Sampler {
    fn new(spec: &GenSpec) -> Sampler {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            lo: spec.weights.0,
            hi: spec.weights.1,
            horizon: spec.horizon(),
            hidden: Vec::new(),
        }
    }

    /// Hidden schedule for `n` variables. When the weight range contains 0
    /// the times are kept close enough that every pairwise difference lies
    /// inside it.
    fn plant(&mut self, n: usize) {
        let span = if self.lo <= 0 && 0 <= self.hi {
            self.horizon.min(self.hi).min(-self.lo)
        } else {
            self.horizon / 2
        };
        self.hidden = (0..n).map(|_| self.rng.random_range(0..=span)).collect();
    }

    fn free(&mut self) -> Interval {
        let a = self.rng.random_range(self.lo..=self.hi);
        let b = self.rng.random_range(self.lo..=self.hi);
        Interval::finite(a.min(b), a.max(b))
    }

    /// An interval containing `d`, inside the weight range when `d` is.
    fn around(&mut self, d: i64) -> Interval {
        if self.lo <= d && d <= self.hi {
            let a = self.rng.random_range(self.lo..=d);
            let b = self.rng.random_range(d..=self.hi);
            Interval::finite(a, b)
        } else {
            let slack = (self.hi - self.lo) / 2;
            let a = d - self.rng.random_range(0..=slack);
            let b = d + self.rng.random_range(0..=slack);
            Interval::finite(a, b)
        }
    }

    /// Interval for the constraint `v -> w` in the current mode.
    fn edge(&mut self, mode: Mode, v: usize, w: usize) -> Interval {
        match mode {
            Mode::Free => self.free(),
            Mode::Planted => self.around(self.hidden[w] - self.hidden[v]),
        }
    }

    fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

fn horizon_stn(n: usize, horizon: i64) -> Result<Stn> {
    Stn::new(vec![Interval::finite(0, horizon); n])
}

/// Uniform random STN: every pair `v < w` is constrained with probability
/// `density`.
pub fn gen_random_stn(spec: &GenSpec) -> Result<Stn> {
    spec.validate()?;
    let mut s = Sampler::new(spec);
    if spec.mode == Mode::Planted {
        s.plant(spec.n);
    }
    let mut net = horizon_stn(spec.n, s.horizon)?;
    for v in 0..spec.n {
        for w in v + 1..spec.n {
            if s.rng.random_bool(spec.density) {
                let ivl = s.edge(spec.mode, v, w);
                net.add_constraint(VarId::from(v), VarId::from(w), ivl)?;
            }
        }
    }
    Ok(net)
}

/// Preferential attachment: a clique on the first `m` vertices, then each
/// further vertex joins `m` distinct earlier vertices picked with
/// probability proportional to their degree. Edge count is
/// `m(m-1)/2 + m(n-m)`.
pub fn gen_scale_free_stn(spec: &GenSpec) -> Result<Stn> {
    spec.validate()?;
    let (n, m) = (spec.n, spec.attach);
    let mut s = Sampler::new(spec);
    if spec.mode == Mode::Planted {
        s.plant(n);
    }
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for v in 0..m {
        for w in v + 1..m {
            edges.push((v, w));
        }
    }
    // One entry per edge endpoint, so uniform picks are degree-weighted.
    let mut endpoints: Vec<usize> = edges.iter().flat_map(|&(v, w)| [v, w]).collect();
    for v in m..n {
        let mut targets = BTreeSet::new();
        while targets.len() < m {
            let t = if endpoints.is_empty() { s.index(v) } else { endpoints[s.index(endpoints.len())] };
            targets.insert(t);
        }
        for t in targets {
            edges.push((t, v));
            endpoints.extend([t, v]);
        }
    }
    let mut net = horizon_stn(n, s.horizon)?;
    for (v, w) in edges {
        let (v, w) = if s.rng.random_bool(0.5) { (v, w) } else { (w, v) };
        let ivl = s.edge(spec.mode, v, w);
        net.add_constraint(VarId::from(v), VarId::from(w), ivl)?;
    }
    Ok(net)
}

/// Lattice STN with edges to the right and downward neighbors.
pub fn gen_grid_stn(spec: &GenSpec) -> Result<Stn> {
    spec.validate()?;
    let (rows, cols) = (spec.rows, spec.cols);
    let n = rows * cols;
    let mut s = Sampler::new(spec);
    if spec.mode == Mode::Planted {
        s.plant(n);
    }
    let mut net = horizon_stn(n, s.horizon)?;
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            let mut next = Vec::new();
            if c + 1 < cols {
                next.push(v + 1);
            }
            if r + 1 < rows {
                next.push(v + cols);
            }
            for w in next {
                let ivl = s.edge(spec.mode, v, w);
                net.add_constraint(VarId::from(v), VarId::from(w), ivl)?;
            }
        }
    }
    Ok(net)
}

/// Random multiagent network. Agent `i` owns variables `2a` (start of
/// activity `a`) and `2a + 1` (its end), a duration constraint per activity,
/// `local` further random constraints, and the instance has `X` externals
/// between distinct, uniformly chosen cross-agent variable pairs.
pub fn gen_random_mastn(spec: &GenSpec) -> Result<Mastn> {
    spec.validate()?;
    let per_agent = 2 * spec.activities;
    let mut s = Sampler::new(spec);
    let planted = spec.mode == Mode::Planted;
    let mut hidden = vec![Vec::new(); spec.agents];

    let mut agents = Vec::with_capacity(spec.agents);
    for times in hidden.iter_mut() {
        let mut net = horizon_stn(per_agent, s.horizon)?;
        let mut used = BTreeSet::new();
        if planted {
            *times = vec![0; per_agent];
        }
        for a in 0..spec.activities {
            let (start, end) = (2 * a, 2 * a + 1);
            let duration = s.free();
            if planted {
                let (dlo, dhi) = duration.finite_bounds().unwrap_or_default();
                times[start] = s.rng.random_range(0..=s.horizon / 2);
                times[end] = times[start] + s.rng.random_range(dlo..=dhi);
            }
            net.add_constraint(VarId::from(start), VarId::from(end), duration)?;
            used.insert((start, end));
        }
        let mut added = 0;
        while added < spec.local_count() {
            let v = s.index(per_agent);
            let w = s.index(per_agent);
            if v == w || !used.insert((v.min(w), v.max(w))) {
                continue;
            }
            let ivl = if planted { s.around(times[w] - times[v]) } else { s.free() };
            net.add_constraint(VarId::from(v), VarId::from(w), ivl)?;
            added += 1;
        }
        agents.push(net);
    }

    let mut m = Mastn::new(agents);
    let mut used = BTreeSet::new();
    while used.len() < spec.external_count() {
        let i = s.index(spec.agents);
        let j = s.index(spec.agents);
        if i == j {
            continue;
        }
        let from = AgentVar::new(i, s.index(per_agent));
        let to = AgentVar::new(j, s.index(per_agent));
        if !used.insert((from.min(to), from.max(to))) {
            continue;
        }
        let ivl = if planted {
            s.around(hidden[j][to.var.index()] - hidden[i][from.var.index()])
        } else {
            s.free()
        };
        m.add_external(from, to, ivl)?;
    }
    Ok(m)
}

/// Factory workload. Task `t` belongs to agent `t mod N` and has a start
/// and an end variable with a duration constraint. Each agent runs its tasks
/// in order (`end -> next start` in `[0, +inf)`). Externals are precedences
/// from an earlier task to a later one: one between every pair of agents
/// `i, i + 1` to connect the agent graph, plus `X` random extra ones.
/// Precedences always point forward in task order, so instances are
/// consistent whenever the horizon fits the tasks.
pub fn gen_factory_mastn(spec: &GenSpec) -> Result<Mastn> {
    spec.validate()?;
    let (agents, tasks) = (spec.agents, spec.tasks);
    let mut s = Sampler::new(spec);
    let owner = |t: usize| t % agents;
    // Position of task t among its owner's tasks.
    let slot = |t: usize| t / agents;
    let counts: Vec<usize> = (0..agents).map(|i| (tasks - i).div_ceil(agents)).collect();
    let precedence = Interval::new(Bound::Finite(0), Bound::PosInf);

    let mut nets = Vec::with_capacity(agents);
    for &count in &counts {
        nets.push(horizon_stn(2 * count, s.horizon)?);
    }
    for t in 0..tasks {
        let net = &mut nets[owner(t)];
        let k = slot(t);
        let (dlo, dhi) = (s.rng.random_range(spec.weights.0..=spec.weights.1), s.rng.random_range(spec.weights.0..=spec.weights.1));
        net.add_constraint(VarId::from(2 * k), VarId::from(2 * k + 1), Interval::finite(dlo.min(dhi), dlo.max(dhi)))?;
        if k > 0 {
            net.add_constraint(VarId::from(2 * k - 1), VarId::from(2 * k), precedence)?;
        }
    }

    let mut m = Mastn::new(nets);
    let link = |m: &mut Mastn, t: usize, u: usize| -> Result<()> {
        let (first, second) = (t.min(u), t.max(u));
        let from = AgentVar::new(owner(first), 2 * slot(first) + 1);
        let to = AgentVar::new(owner(second), 2 * slot(second));
        m.add_external(from, to, precedence).map(|_| ())
    };
    for i in 0..agents.saturating_sub(1) {
        let t = i + agents * s.index(counts[i]);
        let u = i + 1 + agents * s.index(counts[i + 1]);
        link(&mut m, t, u)?;
    }
    for _ in 0..spec.external_count() {
        let t = s.index(tasks);
        let mut u = s.index(tasks);
        while owner(u) == owner(t) {
            u = s.index(tasks);
        }
        link(&mut m, t, u)?;
    }
    Ok(m)
}

/// Four agents in a ring, each owning four variables constrained in a
/// 4-cycle; neighbouring agents share one external constraint each.
/// Agent 0 ("alice") has neighbors 1 and 3, two shared variables and two
/// private ones. The instance is consistent.
pub fn interview_ring() -> Mastn {
    const NAMES: [&str; 4] = ["arrive", "leave", "prep", "review"];
    let agents = (0..4)
        .map(|_| {
            let mut net = Stn::new(vec![Interval::finite(0, 480); 4]).expect("valid domains");
            for (v, name) in NAMES.iter().enumerate() {
                net.set_name(VarId::from(v), *name).expect("distinct names");
            }
            for (v, w, a, b) in [(0, 1, 30, 60), (1, 2, 10, 20), (2, 3, 0, 15), (0, 3, 40, 100)] {
                net.add_constraint(VarId::from(v), VarId::from(w), Interval::finite(a, b))
                    .expect("valid constraint");
            }
            net
        })
        .collect();
    let mut m = Mastn::new(agents);
    for i in 0..3 {
        m.add_external(AgentVar::new(i, 1), AgentVar::new(i + 1, 0), Interval::finite(5, 30))
            .expect("valid external");
    }
    m.add_external(AgentVar::new(3, 1), AgentVar::new(0, 0), Interval::finite(-400, -100))
        .expect("valid external");
    m
}
