//! Multiagent STNs: one local network per agent plus external constraints
//! between variables of different agents, and the `.mastn` text format.
//!
//! ```text
//! mastn 2
//! agent 0
//! stn 2
//! domain 0 0 50
//! domain 1 0 50
//! constraint 0 1 5 10
//! agent 1
//! stn 1
//! domain 0 0 50
//! external 0 1 1 0 0 +inf
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::stn::{self, AddReport, BlockParser, Stn, VarId, DEFAULT_MAGNITUDE_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentVar {
    pub agent: usize,
    pub var: VarId,
}

impl AgentVar {
    pub fn new(agent: usize, var: impl Into<VarId>) -> AgentVar {
        AgentVar { agent, var: var.into() }
    }
}

impl From<(usize, usize)> for AgentVar {
    fn from((agent, var): (usize, usize)) -> Self {
        AgentVar::new(agent, var)
    }
}

impl fmt::Display for AgentVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.agent, self.var)
    }
}

/// `interval` bounds `to - from`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExternalConstraint {
    pub from: AgentVar,
    pub to: AgentVar,
    pub interval: Interval,
}

impl ExternalConstraint {
    /// The same constraint seen from the other endpoint.
    pub fn flipped(&self) -> ExternalConstraint {
        ExternalConstraint { from: self.to, to: self.from, interval: self.interval.inverse() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mastn {
    agents: Vec<Stn>,
    /// Keyed by `(from, to)` with `from < to`.
    external: BTreeMap<(AgentVar, AgentVar), Interval>,
}

impl Mastn {
    pub fn new(agents: Vec<Stn>) -> Mastn {
        Mastn { agents, external: BTreeMap::new() }
    }

    /// Number of agents.
    pub fn p(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[Stn] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> Result<&Stn> {
        self.agents.get(i).ok_or(Error::UnknownAgent(i))
    }

    /// Total number of variables over all agents.
    pub fn n(&self) -> usize {
        self.agents.iter().map(Stn::n).sum()
    }

    fn check(&self, av: AgentVar) -> Result<()> {
        let net = self.agent(av.agent)?;
        if av.var.index() >= net.n() {
            return Err(Error::UnknownVar(av.var.index()));
        }
        Ok(())
    }

    /// Conjoins `lo <= to - from <= hi`; duplicates on the same pair intersect.
    pub fn add_external(&mut self, from: AgentVar, to: AgentVar, ivl: Interval) -> Result<AddReport> {
        self.check(from)?;
        self.check(to)?;
        if from.agent == to.agent {
            return Err(Error::SameAgentExternal(from.agent));
        }
        if ivl.magnitude() > DEFAULT_MAGNITUDE_CAP {
            return Err(Error::Magnitude { value: ivl.magnitude(), cap: DEFAULT_MAGNITUDE_CAP });
        }
        let (key, canonical) = if from < to { ((from, to), ivl) } else { ((to, from), ivl.inverse()) };
        let old = self.external.get(&key).copied();
        let new = old.map_or(canonical, |o| o.intersect(&canonical));
        self.external.insert(key, new);
        Ok(AddReport { changed: old != Some(new), empty: new.is_empty() })
    }

    /// External constraints in canonical orientation and ascending order.
    pub fn externals(&self) -> impl Iterator<Item = ExternalConstraint> + '_ {
        self.external
            .iter()
            .map(|(&(from, to), &interval)| ExternalConstraint { from, to, interval })
    }

    pub fn external_count(&self) -> usize {
        self.external.len()
    }

    /// Ascending neighbor lists of the agent graph.
    pub fn agent_graph(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![BTreeSet::new(); self.p()];
        for &(a, b) in self.external.keys() {
            adj[a.agent].insert(b.agent);
            adj[b.agent].insert(a.agent);
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Connected components of the agent graph, each sorted, ordered by
    /// their smallest agent.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.agent_graph();
        let mut seen = vec![false; self.p()];
        let mut out = Vec::new();
        for start in 0..self.p() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut i = 0;
            while i < comp.len() {
                for &nb in &adj[comp[i]] {
                    if !seen[nb] {
                        seen[nb] = true;
                        comp.push(nb);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// The global network: agent blocks laid out in agent order.
    pub fn flatten(&self) -> Result<(Stn, VarMapping)> {
        let mapping = VarMapping::new(self);
        let domains = self.agents.iter().flat_map(|a| a.domains().iter().copied()).collect();
        let mut net = Stn::new(domains)?;
        for (i, local) in self.agents.iter().enumerate() {
            for v in local.var_ids() {
                if let Some(name) = local.name(v) {
                    net.set_name(mapping.global(AgentVar::new(i, v)), format!("a{i}.{name}"))?;
                }
            }
            for ((v, w), ivl) in local.constraints() {
                net.add_constraint(
                    mapping.global(AgentVar::new(i, v)),
                    mapping.global(AgentVar::new(i, w)),
                    ivl,
                )?;
            }
        }
        for c in self.externals() {
            net.add_constraint(mapping.global(c.from), mapping.global(c.to), c.interval)?;
        }
        Ok((net, mapping))
    }

    pub fn agent_view(&self, i: usize) -> Result<AgentView> {
        let local = self.agent(i)?.clone();
        let mut external: Vec<ExternalConstraint> = self
            .externals()
            .filter_map(|c| {
                if c.from.agent == i {
                    Some(c)
                } else if c.to.agent == i {
                    Some(c.flipped())
                } else {
                    None
                }
            })
            .collect();
        external.sort_by_key(|c| (c.from, c.to));
        let shared = external.iter().map(|c| c.from.var).collect();
        let external_vars = external.iter().map(|c| c.to).collect();
        let neighbors: BTreeSet<usize> = external.iter().map(|c| c.to.agent).collect();
        Ok(AgentView {
            agent: i,
            local,
            shared,
            external_vars,
            external,
            neighbors: neighbors.into_iter().collect(),
        })
    }

    pub fn to_text(&self) -> String {
        serialize_mastn(self)
    }
}

/// Bijection between `(agent, local var)` and flattened variable indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarMapping {
    offsets: Vec<usize>,
    back: Vec<AgentVar>,
}

impl VarMapping {
    fn new(m: &Mastn) -> VarMapping {
        let mut offsets = Vec::with_capacity(m.p());
        let mut back = Vec::with_capacity(m.n());
        for (i, a) in m.agents.iter().enumerate() {
            offsets.push(back.len());
            back.extend(a.var_ids().map(|v| AgentVar::new(i, v)));
        }
        VarMapping { offsets, back }
    }

    pub fn global(&self, av: AgentVar) -> VarId {
        VarId::from(self.offsets[av.agent] + av.var.index())
    }

    pub fn local(&self, v: VarId) -> AgentVar {
        self.back[v.index()]
    }

    /// Global index range of an agent's block.
    pub fn block(&self, agent: usize) -> std::ops::Range<usize> {
        let start = self.offsets[agent];
        let end = self.offsets.get(agent + 1).copied().unwrap_or(self.back.len());
        start..end
    }
}

/// What a single agent knows: its own network, its external constraints
/// (oriented from its own variable), and who its neighbors are.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentView {
    pub agent: usize,
    pub local: Stn,
    /// Own variables that appear in an external constraint.
    pub shared: BTreeSet<VarId>,
    /// Foreign endpoints of this agent's external constraints.
    pub external_vars: BTreeSet<AgentVar>,
    /// Sorted by `(from, to)`; `from.agent == agent` for every entry.
    pub external: Vec<ExternalConstraint>,
    pub neighbors: Vec<usize>,
}

impl AgentView {
    pub fn is_shared(&self, v: VarId) -> bool {
        self.shared.contains(&v)
    }

    pub fn private_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.local.var_ids().filter(|v| !self.shared.contains(v))
    }

    /// Own variables constrained with some variable of `neighbor`.
    pub fn shared_with(&self, neighbor: usize) -> BTreeSet<VarId> {
        self.external
            .iter()
            .filter(|c| c.to.agent == neighbor)
            .map(|c| c.from.var)
            .collect()
    }

    /// Foreign variables of `neighbor` this agent is constrained with.
    pub fn external_vars_of(&self, neighbor: usize) -> BTreeSet<VarId> {
        self.external_vars
            .iter()
            .filter(|av| av.agent == neighbor)
            .map(|av| av.var)
            .collect()
    }
}

pub fn parse_mastn(text: &str) -> Result<Mastn> {
    struct AgentBlock {
        line: usize,
        n: Option<usize>,
        block: BlockParser,
    }

    let mut p = None;
    let mut blocks: BTreeMap<usize, AgentBlock> = BTreeMap::new();
    let mut current: Option<usize> = None;
    let mut externals = Vec::new();

    for (line, tokens) in stn::lines(text) {
        match tokens[0] {
            "mastn" => {
                if p.is_some() {
                    return Err(Error::parse(line, "duplicate `mastn` header"));
                }
                match tokens.as_slice() {
                    [_, count] => p = Some(stn::parse_usize(line, count, "agent count")?),
                    _ => return Err(Error::parse(line, "expected `mastn <p>`")),
                }
                continue;
            }
            _ if p.is_none() => return Err(Error::parse(line, "file must start with `mastn <p>`")),
            "agent" => {
                let [_, idx] = tokens.as_slice() else {
                    return Err(Error::parse(line, "expected `agent <i>`"));
                };
                let i = stn::parse_usize(line, idx, "agent index")?;
                if i >= p.unwrap_or(0) {
                    return Err(Error::parse(line, format!("agent {i} out of range")));
                }
                if blocks.contains_key(&i) {
                    return Err(Error::parse(line, format!("duplicate agent {i}")));
                }
                blocks.insert(i, AgentBlock { line, n: None, block: BlockParser::default() });
                current = Some(i);
            }
            "external" => {
                if tokens.len() < 5 {
                    return Err(Error::parse(line, "expected `external <i> <v> <j> <w> <a> <b>`"));
                }
                let ivl = Interval::from_tokens(&tokens[5..]).map_err(|m| Error::parse(line, m))?;
                let i = stn::parse_usize(line, tokens[1], "agent index")?;
                let j = stn::parse_usize(line, tokens[3], "agent index")?;
                externals.push((line, i, tokens[2].to_string(), j, tokens[4].to_string(), ivl));
            }
            "stn" => {
                let blk = current
                    .and_then(|i| blocks.get_mut(&i))
                    .ok_or_else(|| Error::parse(line, "`stn` outside an agent block"))?;
                let [_, count] = tokens.as_slice() else {
                    return Err(Error::parse(line, "expected `stn <n>`"));
                };
                if blk.n.is_some() {
                    return Err(Error::parse(line, "duplicate `stn` line in agent block"));
                }
                blk.n = Some(stn::parse_usize(line, count, "variable count")?);
            }
            _ => {
                let blk = current
                    .and_then(|i| blocks.get_mut(&i))
                    .ok_or_else(|| Error::parse(line, format!("`{}` outside an agent block", tokens[0])))?;
                if !blk.block.accept(line, &tokens)? {
                    return Err(Error::parse(line, format!("unknown directive `{}`", tokens[0])));
                }
            }
        }
    }

    let p = p.ok_or_else(|| Error::parse(0, "missing `mastn <p>` header"))?;
    let mut agents = Vec::with_capacity(p);
    for i in 0..p {
        let blk = blocks
            .remove(&i)
            .ok_or_else(|| Error::parse(0, format!("agent {i} is missing")))?;
        let n = blk.n.unwrap_or_else(|| blk.block.implied_n());
        let line = blk.line;
        agents.push(blk.block.finish(n).map_err(|e| match e {
            Error::Parse { line: 0, msg } => Error::parse(line, format!("agent {i}: {msg}")),
            other => other,
        })?);
    }

    let mut m = Mastn::new(agents);
    for (line, i, v, j, w, ivl) in externals {
        let resolve = |agent: usize, tok: &str| -> Result<AgentVar> {
            let net = m.agent(agent).map_err(|e| Error::parse(line, e.to_string()))?;
            let var = match tok.parse::<usize>() {
                Ok(idx) if idx < net.n() => VarId::from(idx),
                _ => net
                    .find(tok)
                    .ok_or_else(|| Error::parse(line, format!("unknown variable `{tok}` of agent {agent}")))?,
            };
            Ok(AgentVar { agent, var })
        };
        let from = resolve(i, &v)?;
        let to = resolve(j, &w)?;
        m.add_external(from, to, ivl).map_err(|e| Error::parse(line, e.to_string()))?;
    }
    Ok(m)
}

pub fn serialize_mastn(m: &Mastn) -> String {
    use std::fmt::Write;
    let mut out = format!("mastn {}\n", m.p());
    for (i, net) in m.agents.iter().enumerate() {
        let _ = writeln!(out, "agent {i}");
        let _ = writeln!(out, "stn {}", net.n());
        stn::write_block(net, &mut out);
    }
    for c in m.externals() {
        let _ = writeln!(
            out,
            "external {} {} {} {} {}",
            c.from.agent,
            c.from.var,
            c.to.agent,
            c.to.var,
            c.interval.to_text()
        );
    }
    out
}
