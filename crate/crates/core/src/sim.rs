//! A deterministic discrete-event runtime for message-passing agents.
//!
//! Agents are state machines driven by a start event and by message
//! arrivals. Among all events due at the earliest pending time the scheduler
//! picks one uniformly with a seeded generator, so a run is fully determined
//! by the agents, the seed and the latency.
//!
//! Every agent carries a logical clock that ticks once per constraint check.
//! Messages carry the sender's clock, and on arrival the receiver's clock
//! becomes `max(own, message + latency)`. The largest final clock is the
//! number of non-concurrent constraint checks (NCCC).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::mastn::Mastn;
use crate::stn::VarId;

pub type AgentId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessageKind {
    /// Current domains of some of the sender's shared variables, for
    /// iteration `k`.
    DomainSync { k: usize, domains: Vec<(VarId, Interval)> },
    Inconsistent { origin: AgentId },
    Inquiry { k: usize },
    Feedback { k: usize },
    ArcConsistent { origin: AgentId, k: usize },
    /// Spanning-tree wave: sender's depth and its own parent.
    EchoProbe { depth: usize, parent: Option<AgentId> },
    /// Convergecast of subtree sizes.
    EchoReply { agents: usize, variables: usize },
    /// Component totals sent back down the tree.
    EchoTotal { agents: usize, variables: usize },
}

impl MessageKind {
    pub fn name(&self) -> &'static str {
        match self {
            MessageKind::DomainSync { .. } => "DomainSync",
            MessageKind::Inconsistent { .. } => "Inconsistent",
            MessageKind::Inquiry { .. } => "Inquiry",
            MessageKind::Feedback { .. } => "Feedback",
            MessageKind::ArcConsistent { .. } => "ArcConsistent",
            MessageKind::EchoProbe { .. } => "EchoProbe",
            MessageKind::EchoReply { .. } => "EchoReply",
            MessageKind::EchoTotal { .. } => "EchoTotal",
        }
    }

    pub fn is_setup(&self) -> bool {
        matches!(
            self,
            MessageKind::EchoProbe { .. } | MessageKind::EchoReply { .. } | MessageKind::EchoTotal { .. }
        )
    }

    fn payload(&self) -> String {
        match self {
            MessageKind::DomainSync { k, domains } => {
                let mut s = format!("k={k}");
                for (v, d) in domains {
                    s.push_str(&format!(" {v}={d}"));
                }
                s
            }
            MessageKind::Inconsistent { origin } => format!("origin={origin}"),
            MessageKind::Inquiry { k } | MessageKind::Feedback { k } => format!("k={k}"),
            MessageKind::ArcConsistent { origin, k } => format!("origin={origin} k={k}"),
            MessageKind::EchoProbe { depth, parent } => match parent {
                Some(p) => format!("depth={depth} parent={p}"),
                None => format!("depth={depth} parent=-"),
            },
            MessageKind::EchoReply { agents, variables } | MessageKind::EchoTotal { agents, variables } => {
                format!("agents={agents} variables={variables}")
            }
        }
    }

    fn parse(kind: &str, payload: &str) -> std::result::Result<MessageKind, String> {
        let mut fields = BTreeMap::new();
        let mut domains = Vec::new();
        for tok in payload.split_whitespace() {
            let (key, value) = tok.split_once('=').ok_or_else(|| format!("bad payload field `{tok}`"))?;
            if let Ok(v) = key.parse::<u32>() {
                domains.push((VarId(v), value.parse::<Interval>()?));
            } else {
                fields.insert(key, value);
            }
        }
        let num = |key: &str| -> std::result::Result<usize, String> {
            fields
                .get(key)
                .ok_or_else(|| format!("missing `{key}`"))?
                .parse()
                .map_err(|_| format!("bad `{key}`"))
        };
        Ok(match kind {
            "DomainSync" => MessageKind::DomainSync { k: num("k")?, domains },
            "Inconsistent" => MessageKind::Inconsistent { origin: num("origin")? },
            "Inquiry" => MessageKind::Inquiry { k: num("k")? },
            "Feedback" => MessageKind::Feedback { k: num("k")? },
            "ArcConsistent" => MessageKind::ArcConsistent { origin: num("origin")?, k: num("k")? },
            "EchoProbe" => MessageKind::EchoProbe {
                depth: num("depth")?,
                parent: match fields.get("parent") {
                    Some(&"-") => None,
                    _ => Some(num("parent")?),
                },
            },
            "EchoReply" => MessageKind::EchoReply { agents: num("agents")?, variables: num("variables")? },
            "EchoTotal" => MessageKind::EchoTotal { agents: num("agents")?, variables: num("variables")? },
            other => return Err(format!("unknown message kind `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub id: u64,
    pub sender: AgentId,
    pub receiver: AgentId,
    pub clock: u64,
    pub kind: MessageKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub step: u64,
    pub message: Message,
}

/// Every delivered message, in delivery order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MessageLog {
    entries: Vec<LogEntry>,
    next_id: u64,
}

impl MessageLog {
    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn record(&mut self, message: Message) {
        let step = self.entries.len() as u64;
        self.entries.push(LogEntry { step, message });
    }

    /// Appends an entry verbatim; for building logs by hand.
    pub fn push(&mut self, message: Message) {
        self.next_id = self.next_id.max(message.id + 1);
        self.record(message);
    }

    /// One line per message: `step clock sender receiver kind payload`,
    /// tab-separated. The payload starts with the message id.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let m = &e.message;
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\tid={} {}\n",
                e.step,
                m.clock,
                m.sender,
                m.receiver,
                m.kind.name(),
                m.id,
                m.kind.payload()
            ));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<MessageLog> {
        let mut log = MessageLog::default();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let err = |msg: String| Error::parse(i + 1, msg);
            let cols: Vec<&str> = line.split('\t').collect();
            let [step, clock, sender, receiver, kind, payload] = cols.as_slice() else {
                return Err(err(format!("expected 6 tab-separated columns, got {}", cols.len())));
            };
            let int = |s: &str| s.parse::<u64>().map_err(|_| err(format!("invalid number `{s}`")));
            let (id_tok, rest) = payload.split_once(' ').unwrap_or((payload, ""));
            let id = id_tok
                .strip_prefix("id=")
                .ok_or_else(|| err("payload must start with `id=`".into()))?;
            let message = Message {
                id: int(id)?,
                sender: int(sender)? as AgentId,
                receiver: int(receiver)? as AgentId,
                clock: int(clock)?,
                kind: MessageKind::parse(kind, rest).map_err(err)?,
            };
            log.next_id = log.next_id.max(message.id + 1);
            log.entries.push(LogEntry { step: int(step)?, message });
        }
        Ok(log)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub seed: u64,
    /// Per-hop delay, in logical time units.
    pub latency: u64,
    pub max_steps: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { seed: 0, latency: 0, max_steps: 50_000_000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimMetrics {
    /// Largest final logical clock.
    pub nccc: u64,
    pub total_checks: u64,
    pub per_agent_checks: Vec<u64>,
    pub per_agent_clock: Vec<u64>,
    /// Messages exchanged while solving, setup excluded.
    pub messages: u64,
    pub setup_messages: u64,
    pub histogram: BTreeMap<String, u64>,
    pub steps: u64,
}

/// Handle an agent uses during one transition to tick its clock and send.
pub struct Context<'a> {
    me: AgentId,
    clock: &'a mut u64,
    checks: &'a mut u64,
    outbox: &'a mut Vec<(AgentId, MessageKind, u64)>,
}

impl Context<'_> {
    pub fn me(&self) -> AgentId {
        self.me
    }

    /// Accounts for one constraint check.
    pub fn tick(&mut self) {
        *self.clock += 1;
        *self.checks += 1;
    }

    pub fn clock(&self) -> u64 {
        *self.clock
    }

    pub fn send(&mut self, to: AgentId, kind: MessageKind) {
        self.outbox.push((to, kind, *self.clock));
    }
}

pub trait Agent {
    fn start(&mut self, ctx: &mut Context<'_>) -> Result<()>;
    fn receive(&mut self, msg: &Message, ctx: &mut Context<'_>) -> Result<()>;
    fn is_done(&self) -> bool;
    /// Short state description for deadlock reports.
    fn describe(&self) -> String;
}

enum Event {
    Start(AgentId),
    Deliver(Message),
}

/// Runs the agents to completion, appending every delivered message to
/// `log`. Messages still in flight when the last agent finishes are
/// delivered (and ignored) so the log is complete.
pub fn run_simulation<A: Agent>(agents: &mut [A], cfg: &SimConfig, log: &mut MessageLog) -> Result<SimMetrics> {
    if agents.is_empty() {
        return Err(Error::Contract("simulation needs at least one agent".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let count = agents.len();
    let mut clocks = vec![0u64; count];
    let mut checks = vec![0u64; count];
    let mut histogram: BTreeMap<String, u64> = BTreeMap::new();
    let mut messages = 0u64;
    let mut steps = 0u64;
    let mut pending: Vec<(u64, Event)> = (0..count).map(|a| (0, Event::Start(a))).collect();
    let mut outbox = Vec::new();

    while !pending.is_empty() {
        steps += 1;
        if steps > cfg.max_steps {
            return Err(Error::Runaway(cfg.max_steps));
        }
        let now = pending.iter().map(|(t, _)| *t).min().expect("non-empty");
        let due: Vec<usize> = (0..pending.len()).filter(|&i| pending[i].0 == now).collect();
        let pick = due[rng.random_range(0..due.len())];
        let (_, event) = pending.swap_remove(pick);

        let me = match &event {
            Event::Start(a) => *a,
            Event::Deliver(m) => m.receiver,
        };
        let mut ctx = Context { me, clock: &mut clocks[me], checks: &mut checks[me], outbox: &mut outbox };
        match event {
            Event::Start(a) => agents[a].start(&mut ctx)?,
            Event::Deliver(m) => {
                messages += 1;
                *histogram.entry(m.kind.name().to_string()).or_default() += 1;
                if !agents[me].is_done() {
                    *ctx.clock = (*ctx.clock).max(m.clock + cfg.latency);
                    agents[me].receive(&m, &mut ctx)?;
                }
                log.record(m);
            }
        }
        for (to, kind, clock) in outbox.drain(..) {
            if to >= count {
                return Err(Error::Protocol { agent: me, detail: format!("send to unknown agent {to}") });
            }
            let id = log.fresh_id();
            pending.push((now + cfg.latency, Event::Deliver(Message { id, sender: me, receiver: to, clock, kind })));
        }

        if pending.is_empty() && agents.iter().any(|a| !a.is_done()) {
            let blocked = agents
                .iter()
                .enumerate()
                .filter(|(_, a)| !a.is_done())
                .map(|(i, a)| format!("{i}: {}", a.describe()))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::Deadlock { blocked });
        }
    }

    Ok(SimMetrics {
        nccc: clocks.iter().copied().max().unwrap_or(0),
        total_checks: checks.iter().sum(),
        per_agent_checks: checks,
        per_agent_clock: clocks,
        messages,
        setup_messages: 0,
        histogram,
        steps,
    })
}

/// An agent's place in its component's spanning tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeInfo {
    pub root: AgentId,
    pub parent: Option<AgentId>,
    pub children: Vec<AgentId>,
    pub depth: usize,
    /// Agents in the component.
    pub agents: usize,
    /// Variables in the component plus one for the origin.
    pub n: usize,
}

impl TreeInfo {
    pub fn is_root(&self) -> bool {
        self.parent.is_none()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Builds one spanning tree per connected component of the agent graph with
/// an echo wave, and aggregates the component's variable count.
///
/// The wave runs in synchronous rounds: the root (lowest id) probes its
/// neighbors, every newly reached agent adopts the lowest-id prober as parent
/// and probes in the next round. Probes carry the sender's parent, so each
/// agent learns its children once all its neighbors have probed it. Subtree
/// sizes then flow up with `EchoReply` and the totals flow back down with
/// `EchoTotal`. The result is the breadth-first tree in which every agent's
/// parent is its lowest-id neighbor one level closer to the root.
pub fn echo_setup(graph: &[Vec<AgentId>], var_counts: &[usize], log: &mut MessageLog) -> Vec<TreeInfo> {
    let count = graph.len();
    let mut depth: Vec<Option<usize>> = vec![None; count];
    let mut parent: Vec<Option<AgentId>> = vec![None; count];
    let mut root_of = vec![0; count];
    let mut infos: Vec<Option<TreeInfo>> = vec![None; count];
    let send = |log: &mut MessageLog, sender: AgentId, receiver: AgentId, kind: MessageKind| {
        let id = log.fresh_id();
        log.record(Message { id, sender, receiver, clock: 0, kind });
    };

    for root in 0..count {
        if depth[root].is_some() {
            continue;
        }
        depth[root] = Some(0);
        root_of[root] = root;
        let mut order = vec![root];
        let mut frontier = vec![root];
        while !frontier.is_empty() {
            let mut reached: BTreeMap<AgentId, AgentId> = BTreeMap::new();
            for &u in &frontier {
                for &nb in &graph[u] {
                    send(log, u, nb, MessageKind::EchoProbe { depth: depth[u].unwrap(), parent: parent[u] });
                    if depth[nb].is_none() {
                        reached.entry(nb).or_insert(u);
                    }
                }
            }
            let d = depth[frontier[0]].unwrap() + 1;
            frontier = reached.keys().copied().collect();
            for (&x, &p) in &reached {
                depth[x] = Some(d);
                parent[x] = Some(p);
                root_of[x] = root;
            }
            order.extend(&frontier);
        }

        let children: BTreeMap<AgentId, Vec<AgentId>> = order
            .iter()
            .map(|&u| (u, graph[u].iter().copied().filter(|&c| parent[c] == Some(u)).collect()))
            .collect();
        // Convergecast, deepest agents first.
        let mut subtree: BTreeMap<AgentId, (usize, usize)> = BTreeMap::new();
        for &u in order.iter().rev() {
            let (mut agents, mut vars) = (1, var_counts[u]);
            for c in &children[&u] {
                let (a, v) = subtree[c];
                agents += a;
                vars += v;
            }
            subtree.insert(u, (agents, vars));
            if let Some(p) = parent[u] {
                send(log, u, p, MessageKind::EchoReply { agents, variables: vars });
            }
        }
        let (agents, vars) = subtree[&root];
        for &u in &order {
            for &c in &children[&u] {
                send(log, u, c, MessageKind::EchoTotal { agents, variables: vars });
            }
            infos[u] = Some(TreeInfo {
                root,
                parent: parent[u],
                children: children[&u].clone(),
                depth: depth[u].unwrap(),
                agents,
                n: vars + 1,
            });
        }
    }
    infos.into_iter().map(|i| i.expect("every agent is in some component")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivacyViolation {
    pub step: u64,
    pub reason: String,
}

impl fmt::Display for PrivacyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step, self.reason)
    }
}

/// Checks that every message travels between neighbors in the agent graph
/// and that domain payloads only name variables the sender shares with the
/// receiver. No message kind can carry a constraint, so constraints are
/// never disclosed; echo messages carry only aggregate counts.
pub fn audit_privacy(log: &MessageLog, m: &Mastn) -> std::result::Result<(), PrivacyViolation> {
    let graph = m.agent_graph();
    let mut shared: BTreeMap<(AgentId, AgentId), BTreeSet<VarId>> = BTreeMap::new();
    for c in m.externals() {
        shared.entry((c.from.agent, c.to.agent)).or_default().insert(c.from.var);
        shared.entry((c.to.agent, c.from.agent)).or_default().insert(c.to.var);
    }
    for e in log.entries() {
        let msg = &e.message;
        let fail = |reason: String| Err(PrivacyViolation { step: e.step, reason });
        if msg.sender >= graph.len() || !graph[msg.sender].contains(&msg.receiver) {
            return fail(format!(
                "{} message from agent {} to non-neighbor {}",
                msg.kind.name(),
                msg.sender,
                msg.receiver
            ));
        }
        if let MessageKind::DomainSync { domains, .. } = &msg.kind {
            let allowed = shared.get(&(msg.sender, msg.receiver));
            for (v, _) in domains {
                if !allowed.is_some_and(|s| s.contains(v)) {
                    return fail(format!(
                        "agent {} disclosed variable {} which it does not share with agent {}",
                        msg.sender, v, msg.receiver
                    ));
                }
            }
        }
    }
    Ok(())
}
