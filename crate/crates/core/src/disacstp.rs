//! Distributed arc-consistency: one state machine per agent, run on the
//! [`sim`](crate::sim) runtime.
//!
//! Each iteration `k` an agent sends the domains of its shared variables to
//! its neighbors, waits for theirs, and sweeps its own variables over local
//! and external constraints. An emptied domain is flooded as `Inconsistent`.
//! When a sweep changes nothing the agent waits: the root of the spanning
//! tree asks its subtree (`Inquiry(k)`) whether everyone was stable in
//! iteration `k`, stable agents answer with `Feedback(k)` once their whole
//! subtree has, and the root then floods `ArcConsistent`. An agent whose
//! sweep changed something simply moves on to `k + 1`; its `DomainSync(k + 1)`
//! pulls waiting neighbors into the next iteration, which is how "not yet
//! stable" spreads without a message of its own.

use std::collections::{BTreeMap, BTreeSet};

use crate::acstp::revise;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::mastn::{AgentVar, AgentView, Mastn};
use crate::sim::{
    echo_setup, run_simulation, Agent, AgentId, Context, Message, MessageKind, MessageLog, SimConfig,
    SimMetrics, TreeInfo,
};
use crate::stn::VarId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentResult {
    /// Final domains of the agent's own variables.
    Consistent(Vec<Interval>),
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Phase {
    Idle,
    AwaitSync,
    AwaitTermination,
    Done(AgentResult),
}

#[derive(Debug, Clone, Copy)]
enum Source {
    Local(VarId),
    /// Index into the cache of external domains.
    External(usize),
}

/// Agent state for one run.
#[derive(Debug, Clone)]
pub struct AgentState {
    view: AgentView,
    tree: TreeInfo,
    domains: Vec<Interval>,
    /// Per own variable, `(source, I_wv)` in sweep order.
    supports: Vec<Vec<(Source, Interval)>>,
    external_slots: BTreeMap<AgentVar, usize>,
    external_domains: Vec<Interval>,
    k: usize,
    phase: Phase,
    syncs: BTreeMap<usize, BTreeMap<AgentId, Vec<(VarId, Interval)>>>,
    deferred: Vec<(AgentId, usize)>,
    /// Iteration whose feedback round this agent is collecting.
    collecting: Option<usize>,
    pending_feedback: BTreeSet<AgentId>,
    seen_broadcasts: BTreeSet<(bool, AgentId)>,
    checks: u64,
}

impl AgentState {
    pub fn new(view: AgentView, tree: TreeInfo) -> AgentState {
        let external_slots: BTreeMap<AgentVar, usize> =
            view.external_vars.iter().enumerate().map(|(i, av)| (*av, i)).collect();
        let supports = view
            .local
            .var_ids()
            .map(|v| {
                let local = view.local.supports(v).iter().map(|&(w, ivl)| (Source::Local(w), ivl));
                let external = view
                    .external
                    .iter()
                    .filter(|c| c.from.var == v)
                    .map(|c| (Source::External(external_slots[&c.to]), c.interval.inverse()));
                local.chain(external).collect()
            })
            .collect();
        AgentState {
            domains: view.local.domains().to_vec(),
            external_domains: vec![Interval::UNBOUNDED; external_slots.len()],
            external_slots,
            supports,
            view,
            tree,
            k: 0,
            phase: Phase::Idle,
            syncs: BTreeMap::new(),
            deferred: Vec::new(),
            collecting: None,
            pending_feedback: BTreeSet::new(),
            seen_broadcasts: BTreeSet::new(),
            checks: 0,
        }
    }

    pub fn view(&self) -> &AgentView {
        &self.view
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn checks(&self) -> u64 {
        self.checks
    }

    pub fn result(&self) -> Option<&AgentResult> {
        match &self.phase {
            Phase::Done(r) => Some(r),
            _ => None,
        }
    }

    fn me(&self) -> AgentId {
        self.view.agent
    }

    fn violation(&self, detail: impl Into<String>) -> Error {
        Error::Protocol {
            agent: self.me(),
            detail: format!("{} (state: {})", detail.into(), self.describe()),
        }
    }

    fn enter_iteration(&mut self, k: usize, ctx: &mut Context<'_>) -> Result<()> {
        self.collecting = None;
        self.pending_feedback.clear();
        if k > self.tree.n {
            return self.conclude_inconsistent(ctx);
        }
        self.k = k;
        for &nb in &self.view.neighbors {
            let domains = self
                .view
                .shared_with(nb)
                .into_iter()
                .map(|v| (v, self.domains[v.index()]))
                .collect();
            ctx.send(nb, MessageKind::DomainSync { k, domains });
        }
        self.phase = Phase::AwaitSync;
        self.drive(ctx)
    }

    /// Sweeps as long as the external domains for the current iteration are
    /// available.
    fn drive(&mut self, ctx: &mut Context<'_>) -> Result<()> {
        while self.phase == Phase::AwaitSync {
            let ready = self.view.neighbors.is_empty()
                || self.syncs.get(&self.k).is_some_and(|got| got.len() == self.view.neighbors.len());
            if !ready {
                return Ok(());
            }
            let got = self.syncs.remove(&self.k).unwrap_or_default();
            for (nb, domains) in got {
                for (var, ivl) in domains {
                    let slot = *self
                        .external_slots
                        .get(&AgentVar { agent: nb, var })
                        .ok_or_else(|| self.violation(format!("unexpected variable {nb}.{var} in DomainSync")))?;
                    self.external_domains[slot] = ivl;
                }
            }

            let mut stable = 0;
            for v in 0..self.domains.len() {
                let before = self.domains[v];
                let mut current = before;
                for &(source, support) in &self.supports[v] {
                    ctx.tick();
                    self.checks += 1;
                    let other = match source {
                        Source::Local(w) => self.domains[w.index()],
                        Source::External(slot) => self.external_domains[slot],
                    };
                    current = revise(current, other, support)?;
                }
                self.domains[v] = current;
                if current.is_empty() {
                    return self.conclude_inconsistent(ctx);
                }
                if current == before {
                    stable += 1;
                }
            }

            if stable < self.domains.len() {
                let next = self.k + 1;
                return self.enter_iteration(next, ctx);
            }
            self.phase = Phase::AwaitTermination;
            // A neighbor already moved on while this sweep was pending.
            if self.syncs.contains_key(&(self.k + 1)) {
                let next = self.k + 1;
                return self.enter_iteration(next, ctx);
            }
            if self.tree.is_root() {
                self.open_round(ctx)?;
            }
            let deferred = std::mem::take(&mut self.deferred);
            for (from, k) in deferred {
                if k == self.k && self.phase == Phase::AwaitTermination {
                    self.on_inquiry(from, k, ctx)?;
                } else if k > self.k {
                    self.deferred.push((from, k));
                }
            }
        }
        Ok(())
    }

    /// Root: ask the subtree whether iteration `k` was stable everywhere.
    /// Inner agents: pass the question on. Leaves: answer it.
    fn open_round(&mut self, ctx: &mut Context<'_>) -> Result<()> {
        if self.tree.is_leaf() {
            return match self.tree.parent {
                None => self.conclude_consistent(ctx),
                Some(parent) => {
                    ctx.send(parent, MessageKind::Feedback { k: self.k });
                    Ok(())
                }
            };
        }
        self.collecting = Some(self.k);
        self.pending_feedback = self.tree.children.iter().copied().collect();
        for &c in &self.tree.children {
            ctx.send(c, MessageKind::Inquiry { k: self.k });
        }
        Ok(())
    }

    fn on_inquiry(&mut self, from: AgentId, k: usize, ctx: &mut Context<'_>) -> Result<()> {
        if Some(from) != self.tree.parent {
            return Err(self.violation(format!("inquiry from {from}, which is not the parent")));
        }
        match self.phase {
            Phase::AwaitTermination if k == self.k => self.open_round(ctx),
            _ if k < self.k => Ok(()),
            Phase::AwaitSync | Phase::Idle => {
                self.deferred.push((from, k));
                Ok(())
            }
            _ => Err(self.violation(format!("inquiry for iteration {k}"))),
        }
    }

    fn on_feedback(&mut self, from: AgentId, k: usize, ctx: &mut Context<'_>) -> Result<()> {
        if !self.tree.children.contains(&from) {
            return Err(self.violation(format!("feedback from {from}, which is not a child")));
        }
        if k < self.k || self.collecting != Some(k) {
            if k > self.k {
                return Err(self.violation(format!("feedback for future iteration {k}")));
            }
            return Ok(());
        }
        self.pending_feedback.remove(&from);
        if !self.pending_feedback.is_empty() {
            return Ok(());
        }
        self.collecting = None;
        match self.tree.parent {
            None => self.conclude_consistent(ctx),
            Some(parent) => {
                ctx.send(parent, MessageKind::Feedback { k });
                Ok(())
            }
        }
    }

    fn on_sync(&mut self, from: AgentId, k: usize, domains: &[(VarId, Interval)], ctx: &mut Context<'_>) -> Result<()> {
        if !self.view.neighbors.contains(&from) {
            return Err(self.violation(format!("DomainSync from non-neighbor {from}")));
        }
        if k <= self.k && self.phase != Phase::Idle && !(k == self.k && self.phase == Phase::AwaitSync) {
            return Err(self.violation(format!("stale DomainSync({k}) from {from}")));
        }
        if self.syncs.entry(k).or_default().insert(from, domains.to_vec()).is_some() {
            return Err(self.violation(format!("duplicate DomainSync({k}) from {from}")));
        }
        match self.phase {
            Phase::AwaitSync => self.drive(ctx),
            Phase::AwaitTermination if k == self.k + 1 => self.enter_iteration(k, ctx),
            Phase::AwaitTermination => Err(self.violation(format!("DomainSync({k}) while waiting in {}", self.k))),
            _ => Ok(()),
        }
    }

    fn flood(&mut self, kind: MessageKind, except: Option<AgentId>, ctx: &mut Context<'_>) {
        for &nb in &self.view.neighbors {
            if Some(nb) != except {
                ctx.send(nb, kind.clone());
            }
        }
    }

    fn conclude_inconsistent(&mut self, ctx: &mut Context<'_>) -> Result<()> {
        let me = self.me();
        self.seen_broadcasts.insert((false, me));
        self.flood(MessageKind::Inconsistent { origin: me }, None, ctx);
        self.phase = Phase::Done(AgentResult::Inconsistent);
        Ok(())
    }

    fn conclude_consistent(&mut self, ctx: &mut Context<'_>) -> Result<()> {
        let me = self.me();
        self.seen_broadcasts.insert((true, me));
        self.flood(MessageKind::ArcConsistent { origin: me, k: self.k }, None, ctx);
        self.phase = Phase::Done(AgentResult::Consistent(self.domains.clone()));
        Ok(())
    }
}

impl Agent for AgentState {
    fn start(&mut self, ctx: &mut Context<'_>) -> Result<()> {
        self.enter_iteration(1, ctx)
    }

    fn receive(&mut self, msg: &Message, ctx: &mut Context<'_>) -> Result<()> {
        match &msg.kind {
            MessageKind::DomainSync { k, domains } => self.on_sync(msg.sender, *k, domains, ctx),
            MessageKind::Inquiry { k } => self.on_inquiry(msg.sender, *k, ctx),
            MessageKind::Feedback { k } => self.on_feedback(msg.sender, *k, ctx),
            MessageKind::Inconsistent { origin } => {
                if self.seen_broadcasts.insert((false, *origin)) {
                    self.flood(msg.kind.clone(), Some(msg.sender), ctx);
                    self.phase = Phase::Done(AgentResult::Inconsistent);
                }
                Ok(())
            }
            MessageKind::ArcConsistent { origin, k } => {
                if !self.seen_broadcasts.insert((true, *origin)) {
                    return Ok(());
                }
                if self.phase != Phase::AwaitTermination || *k != self.k {
                    return Err(self.violation(format!("ArcConsistent({k}) while not stable in that iteration")));
                }
                self.flood(msg.kind.clone(), Some(msg.sender), ctx);
                self.phase = Phase::Done(AgentResult::Consistent(self.domains.clone()));
                Ok(())
            }
            other => Err(self.violation(format!("unexpected {} message", other.name()))),
        }
    }

    fn is_done(&self) -> bool {
        matches!(self.phase, Phase::Done(_))
    }

    fn describe(&self) -> String {
        format!(
            "agent {} k={} phase={:?} buffered_syncs={:?} pending_feedback={:?}",
            self.me(),
            self.k,
            self.phase,
            self.syncs.keys().collect::<Vec<_>>(),
            self.pending_feedback
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentReport {
    pub result: AgentResult,
    pub checks: u64,
    /// Last iteration the agent swept or waited in.
    pub iterations: usize,
    pub view: AgentView,
    pub tree: TreeInfo,
}

#[derive(Debug, Clone)]
pub struct DistributedOutcome {
    pub agents: Vec<AgentReport>,
    pub metrics: SimMetrics,
    pub log: MessageLog,
}

impl DistributedOutcome {
    /// Consistent iff every agent finished with domains.
    pub fn is_consistent(&self) -> bool {
        self.agents.iter().all(|a| matches!(a.result, AgentResult::Consistent(_)))
    }

    /// All agents' domains concatenated in agent order, the variable order
    /// of [`Mastn::flatten`].
    pub fn domains(&self) -> Option<Vec<Interval>> {
        let mut out = Vec::new();
        for a in &self.agents {
            match &a.result {
                AgentResult::Consistent(d) => out.extend_from_slice(d),
                AgentResult::Inconsistent => return None,
            }
        }
        Some(out)
    }

    pub fn max_iteration(&self) -> usize {
        self.agents.iter().map(|a| a.iterations).max().unwrap_or(0)
    }
}

/// Builds the spanning trees with an echo wave, then runs one agent per
/// local network until every agent has concluded.
pub fn solve_distributed(m: &Mastn, cfg: &SimConfig) -> Result<DistributedOutcome> {
    let views = (0..m.p()).map(|i| m.agent_view(i)).collect::<Result<Vec<_>>>()?;
    let var_counts: Vec<usize> = m.agents().iter().map(|a| a.n()).collect();
    let mut log = MessageLog::default();
    let trees = echo_setup(&m.agent_graph(), &var_counts, &mut log);
    let setup_messages = log.len() as u64;

    if m.p() == 0 {
        return Ok(DistributedOutcome { agents: Vec::new(), metrics: SimMetrics::default(), log });
    }

    let mut states: Vec<AgentState> = views
        .into_iter()
        .zip(trees)
        .map(|(view, tree)| AgentState::new(view, tree))
        .collect();
    let mut metrics = run_simulation(&mut states, cfg, &mut log)?;
    metrics.setup_messages = setup_messages;

    let agents = states
        .into_iter()
        .map(|s| {
            let result = s
                .result()
                .cloned()
                .ok_or_else(|| Error::Contract(format!("agent {} did not finish", s.me())))?;
            Ok(AgentReport { result, checks: s.checks, iterations: s.k, view: s.view, tree: s.tree })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistributedOutcome { agents, metrics, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acstp::{enforce_ac, AcOutcome};
    use crate::sim::audit_privacy;
    use crate::stn::Stn;
    use crate::workloads::interview_ring;

    fn iv(a: i64, b: i64) -> Interval {
        Interval::finite(a, b)
    }

    fn centralized(m: &Mastn) -> AcOutcome {
        enforce_ac(&m.flatten().unwrap().0).unwrap()
    }

    #[test]
    fn interview_ring_matches_centralized() {
        let m = interview_ring();
        let central = centralized(&m);
        for seed in 0..10 {
            for latency in [0, 5] {
                let out = solve_distributed(&m, &SimConfig { seed, latency, ..Default::default() }).unwrap();
                assert!(out.is_consistent());
                assert_eq!(out.domains().as_deref(), Some(central.closure().unwrap().domains.as_slice()));
                audit_privacy(&out.log, &m).unwrap();
            }
        }
    }

    #[test]
    fn single_agent_matches_acstp_exactly() {
        let mut net = Stn::new(vec![iv(0, 10), iv(0, 10), iv(0, 20)]).unwrap();
        net.add_constraint(VarId(0), VarId(1), iv(2, 3)).unwrap();
        net.add_constraint(VarId(1), VarId(2), iv(1, 5)).unwrap();
        let central = enforce_ac(&net).unwrap();
        let m = Mastn::new(vec![net]);
        let out = solve_distributed(&m, &SimConfig::default()).unwrap();
        assert_eq!(out.domains().as_deref(), Some(central.closure().unwrap().domains.as_slice()));
        assert_eq!(out.agents[0].checks, central.stats().checks);
        assert_eq!(out.agents[0].iterations, central.stats().iterations);
        assert_eq!(out.metrics.nccc, central.stats().checks);
        assert_eq!(out.metrics.messages, 0);
    }

    #[test]
    fn single_agent_inconsistent_matches_acstp() {
        let mut net = Stn::new(vec![iv(0, 1000); 3]).unwrap();
        net.add_constraint(VarId(0), VarId(1), iv(1, 1)).unwrap();
        net.add_constraint(VarId(1), VarId(2), iv(0, 0)).unwrap();
        net.add_constraint(VarId(2), VarId(0), iv(0, 0)).unwrap();
        let central = enforce_ac(&net).unwrap();
        let out = solve_distributed(&Mastn::new(vec![net]), &SimConfig::default()).unwrap();
        assert!(!out.is_consistent());
        assert_eq!(out.agents[0].checks, central.stats().checks);
    }

    #[test]
    fn split_negative_cycle_is_inconsistent_everywhere() {
        let agents = (0..3).map(|_| Stn::new(vec![iv(0, 100)]).unwrap()).collect();
        let mut m = Mastn::new(agents);
        m.add_external(AgentVar::new(0, 0), AgentVar::new(1, 0), iv(1, 2)).unwrap();
        m.add_external(AgentVar::new(1, 0), AgentVar::new(2, 0), iv(1, 2)).unwrap();
        m.add_external(AgentVar::new(2, 0), AgentVar::new(0, 0), iv(1, 2)).unwrap();
        assert!(!centralized(&m).is_consistent());
        for seed in 0..10 {
            let out = solve_distributed(&m, &SimConfig { seed, ..Default::default() }).unwrap();
            assert!(out.agents.iter().all(|a| a.result == AgentResult::Inconsistent));
            assert!(out.metrics.histogram.get("Inconsistent").copied().unwrap_or(0) >= 1);
        }
    }

    #[test]
    fn disconnected_agents_solve_independently() {
        let mut a = Stn::new(vec![iv(0, 10), iv(0, 10)]).unwrap();
        a.add_constraint(VarId(0), VarId(1), iv(2, 3)).unwrap();
        let b = Stn::new(vec![iv(4, 6)]).unwrap();
        let m = Mastn::new(vec![a, b]);
        let out = solve_distributed(&m, &SimConfig::default()).unwrap();
        assert_eq!(out.domains().unwrap(), vec![iv(0, 8), iv(2, 10), iv(4, 6)]);
    }

    #[test]
    fn runs_are_reproducible() {
        let m = interview_ring();
        let cfg = SimConfig { seed: 7, latency: 2, ..Default::default() };
        let a = solve_distributed(&m, &cfg).unwrap();
        let b = solve_distributed(&m, &cfg).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.metrics, b.metrics);
    }

    #[test]
    fn views_are_untouched() {
        let m = interview_ring();
        let out = solve_distributed(&m, &SimConfig::default()).unwrap();
        for (i, a) in out.agents.iter().enumerate() {
            assert_eq!(a.view, m.agent_view(i).unwrap());
        }
    }
}
