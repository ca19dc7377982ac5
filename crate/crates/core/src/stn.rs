//! Simple temporal networks and the `.stn` text format.
//!
//! Constraints are stored once per unordered pair in the canonical direction
//! `v < w`; the reverse direction is always answered as the inverse. The zero
//! time point is not a vertex: each variable's domain plays the role of its
//! constraint from the origin.
//!
//! ```text
//! # two activities
//! stn 2
//! var 0 x
//! var 1 y
//! domain x 0 10
//! domain y 0 10
//! constraint x y 2 3
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;

/// Bounds larger than this (in absolute value) are rejected so that sums of
/// bounds along any propagation path stay far away from `i64` overflow.
pub const DEFAULT_MAGNITUDE_CAP: i64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for VarId {
    fn from(i: usize) -> Self {
        VarId(i as u32)
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Outcome of [`Stn::add_constraint`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddReport {
    pub changed: bool,
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stn {
    domains: Vec<Interval>,
    names: Vec<Option<String>>,
    /// `(v, w)` with `v < w` maps to `I_vw`.
    constraints: BTreeMap<(VarId, VarId), Interval>,
    /// `adjacency[v]` lists `(w, I_wv)` sorted by `w`: the interval that
    /// carries `w`'s domain over to `v`.
    adjacency: Vec<Vec<(VarId, Interval)>>,
}

fn check_magnitude(ivl: &Interval) -> Result<()> {
    let m = ivl.magnitude();
    if m > DEFAULT_MAGNITUDE_CAP {
        return Err(Error::Magnitude { value: m, cap: DEFAULT_MAGNITUDE_CAP });
    }
    Ok(())
}

fn check_domain(i: usize, d: &Interval) -> Result<()> {
    if d.is_empty() {
        return Err(Error::EmptyDomain(i));
    }
    if !d.is_finite() {
        return Err(Error::InfiniteDomain(i));
    }
    check_magnitude(d)
}

impl Stn {
    /// A network without constraints. Every domain must be finite and
    /// non-empty.
    pub fn new(domains: Vec<Interval>) -> Result<Stn> {
        for (i, d) in domains.iter().enumerate() {
            check_domain(i, d)?;
        }
        let n = domains.len();
        Ok(Stn {
            domains,
            names: vec![None; n],
            constraints: BTreeMap::new(),
            adjacency: vec![Vec::new(); n],
        })
    }

    pub fn n(&self) -> usize {
        self.domains.len()
    }

    /// Number of constrained unordered pairs.
    pub fn e(&self) -> usize {
        self.constraints.len()
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.n()).map(VarId::from)
    }

    fn check_var(&self, v: VarId) -> Result<()> {
        if v.index() < self.n() {
            Ok(())
        } else {
            Err(Error::UnknownVar(v.index()))
        }
    }

    pub fn domain(&self, v: VarId) -> Interval {
        self.domains[v.index()]
    }

    pub fn domains(&self) -> &[Interval] {
        &self.domains
    }

    /// Same constraints, different domains.
    pub fn with_domains(&self, domains: Vec<Interval>) -> Result<Stn> {
        if domains.len() != self.n() {
            return Err(Error::Contract(format!(
                "expected {} domains, got {}",
                self.n(),
                domains.len()
            )));
        }
        for (i, d) in domains.iter().enumerate() {
            check_domain(i, d)?;
        }
        Ok(Stn { domains, ..self.clone() })
    }

    pub fn name(&self, v: VarId) -> Option<&str> {
        self.names[v.index()].as_deref()
    }

    /// The variable's name, or `v<index>` when unnamed.
    pub fn label(&self, v: VarId) -> String {
        match self.name(v) {
            Some(name) => name.to_string(),
            None => format!("v{}", v.0),
        }
    }

    pub fn set_name(&mut self, v: VarId, name: impl Into<String>) -> Result<()> {
        self.check_var(v)?;
        let name = name.into();
        if let Some(other) = self.names.iter().position(|n| n.as_deref() == Some(name.as_str())) {
            if other != v.index() {
                return Err(Error::Contract(format!("duplicate variable name `{name}`")));
            }
        }
        self.names[v.index()] = Some(name);
        Ok(())
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.names
            .iter()
            .position(|n| n.as_deref() == Some(name))
            .map(VarId::from)
    }

    /// Conjoins `lo <= w - v <= hi` into the network. A second constraint on
    /// the same pair (in either direction) is intersected with the stored one.
    pub fn add_constraint(&mut self, v: VarId, w: VarId, ivl: Interval) -> Result<AddReport> {
        self.check_var(v)?;
        self.check_var(w)?;
        if v == w {
            return Err(Error::SelfLoop(v.index()));
        }
        check_magnitude(&ivl)?;
        let (key, canonical) = if v < w { ((v, w), ivl) } else { ((w, v), ivl.inverse()) };
        let (old, new) = match self.constraints.get(&key) {
            Some(stored) => (Some(*stored), stored.intersect(&canonical)),
            None => (None, canonical),
        };
        self.constraints.insert(key, new);
        let (lo, hi) = key;
        // adjacency[hi] holds I_{lo,hi}; adjacency[lo] holds I_{hi,lo}.
        upsert(&mut self.adjacency[hi.index()], lo, new);
        upsert(&mut self.adjacency[lo.index()], hi, new.inverse());
        Ok(AddReport { changed: old != Some(new), empty: new.is_empty() })
    }

    /// The directed interval `I_vw`, or `None` when the pair is unconstrained.
    pub fn constraint(&self, v: VarId, w: VarId) -> Result<Option<Interval>> {
        self.check_var(v)?;
        self.check_var(w)?;
        if v == w {
            return Err(Error::SelfLoop(v.index()));
        }
        Ok(if v < w {
            self.constraints.get(&(v, w)).copied()
        } else {
            self.constraints.get(&(w, v)).map(Interval::inverse)
        })
    }

    /// Stored constraints `((v, w), I_vw)` with `v < w`, in ascending order.
    pub fn constraints(&self) -> impl Iterator<Item = ((VarId, VarId), Interval)> + '_ {
        self.constraints.iter().map(|(k, i)| (*k, *i))
    }

    /// Neighbors of `v` in ascending order, each with `I_wv`.
    pub fn supports(&self, v: VarId) -> &[(VarId, Interval)] {
        &self.adjacency[v.index()]
    }

    pub fn degree(&self, v: VarId) -> usize {
        self.adjacency[v.index()].len()
    }

    pub fn to_text(&self) -> String {
        serialize_stn(self)
    }
}

fn upsert(list: &mut Vec<(VarId, Interval)>, w: VarId, ivl: Interval) {
    match list.binary_search_by_key(&w, |(x, _)| *x) {
        Ok(pos) => list[pos].1 = ivl,
        Err(pos) => list.insert(pos, (w, ivl)),
    }
}

impl FromStr for Stn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_stn(s)
    }
}

/// Tokenized, comment-stripped lines with their 1-based line numbers.
pub(crate) fn lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = body.split_whitespace().collect();
        (!tokens.is_empty()).then_some((i + 1, tokens))
    })
}

pub(crate) fn parse_usize(line: usize, tok: &str, what: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} `{tok}`")))
}

/// Accumulates `var`/`domain`/`constraint` lines; shared by the `.stn` and
/// `.mastn` readers.
#[derive(Default)]
pub(crate) struct BlockParser {
    names: Vec<(usize, usize, String)>,
    domains: Vec<(usize, String, Interval)>,
    constraints: Vec<(usize, String, String, Interval)>,
    max_index: Option<usize>,
}

impl BlockParser {
    /// Consumes the line if it belongs to an STN block.
    pub(crate) fn accept(&mut self, line: usize, tokens: &[&str]) -> Result<bool> {
        match tokens[0] {
            "var" => {
                let (idx, name) = match tokens {
                    [_, idx] => (parse_usize(line, idx, "variable index")?, None),
                    [_, idx, name] => (parse_usize(line, idx, "variable index")?, Some(*name)),
                    _ => return Err(Error::parse(line, "expected `var <index> [name]`")),
                };
                self.bump(idx);
                if let Some(name) = name {
                    if name.parse::<usize>().is_ok() {
                        return Err(Error::parse(line, "variable names must not be numbers"));
                    }
                    self.names.push((line, idx, name.to_string()));
                }
            }
            "domain" => {
                if tokens.len() < 2 {
                    return Err(Error::parse(line, "expected `domain <v> <a> <b>`"));
                }
                let ivl = Interval::from_tokens(&tokens[2..]).map_err(|m| Error::parse(line, m))?;
                if let Ok(idx) = tokens[1].parse::<usize>() {
                    self.bump(idx);
                }
                self.domains.push((line, tokens[1].to_string(), ivl));
            }
            "constraint" => {
                if tokens.len() < 3 {
                    return Err(Error::parse(line, "expected `constraint <v> <w> <a> <b>`"));
                }
                let ivl = Interval::from_tokens(&tokens[3..]).map_err(|m| Error::parse(line, m))?;
                self.constraints
                    .push((line, tokens[1].to_string(), tokens[2].to_string(), ivl));
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn bump(&mut self, idx: usize) {
        self.max_index = Some(self.max_index.map_or(idx, |m| m.max(idx)));
    }

    /// Variable count implied by the highest index in `var`/`domain` lines.
    pub(crate) fn implied_n(&self) -> usize {
        self.max_index.map_or(0, |m| m + 1)
    }

    pub(crate) fn finish(self, n: usize) -> Result<Stn> {
        let mut by_name = HashMap::new();
        let mut names: Vec<Option<String>> = vec![None; n];
        for (line, idx, name) in self.names {
            if idx >= n {
                return Err(Error::parse(line, format!("variable index {idx} out of range (n = {n})")));
            }
            if by_name.insert(name.clone(), idx).is_some_and(|prev| prev != idx) {
                return Err(Error::parse(line, format!("duplicate variable name `{name}`")));
            }
            names[idx] = Some(name);
        }
        let resolve = |line: usize, tok: &str| -> Result<usize> {
            let idx = match tok.parse::<usize>() {
                Ok(idx) => idx,
                Err(_) => *by_name
                    .get(tok)
                    .ok_or_else(|| Error::parse(line, format!("unknown variable `{tok}`")))?,
            };
            if idx >= n {
                return Err(Error::parse(line, format!("unknown variable `{tok}`")));
            }
            Ok(idx)
        };

        let mut domains: Vec<Option<Interval>> = vec![None; n];
        for (line, tok, ivl) in &self.domains {
            let idx = resolve(*line, tok)?;
            if domains[idx].is_some() {
                return Err(Error::parse(*line, format!("duplicate domain for `{tok}`")));
            }
            check_domain(idx, ivl).map_err(|e| Error::parse(*line, e.to_string()))?;
            domains[idx] = Some(*ivl);
        }
        let domains = domains
            .into_iter()
            .enumerate()
            .map(|(i, d)| d.ok_or_else(|| Error::parse(0, format!("variable {i} has no domain"))))
            .collect::<Result<Vec<_>>>()?;

        let mut net = Stn::new(domains)?;
        net.names = names;
        for (line, a, b, ivl) in &self.constraints {
            let v = resolve(*line, a)?;
            let w = resolve(*line, b)?;
            net.add_constraint(v.into(), w.into(), *ivl)
                .map_err(|e| Error::parse(*line, e.to_string()))?;
        }
        Ok(net)
    }
}

pub fn parse_stn(text: &str) -> Result<Stn> {
    let mut n = None;
    let mut block = BlockParser::default();
    for (line, tokens) in lines(text) {
        if tokens[0] == "stn" {
            if n.is_some() {
                return Err(Error::parse(line, "duplicate `stn` header"));
            }
            match tokens.as_slice() {
                [_, count] => n = Some(parse_usize(line, count, "variable count")?),
                _ => return Err(Error::parse(line, "expected `stn <n>`")),
            }
            continue;
        }
        if n.is_none() {
            return Err(Error::parse(line, "file must start with `stn <n>`"));
        }
        if !block.accept(line, &tokens)? {
            return Err(Error::parse(line, format!("unknown directive `{}`", tokens[0])));
        }
    }
    let n = n.ok_or_else(|| Error::parse(0, "missing `stn <n>` header"))?;
    block.finish(n)
}

/// Writes the block body (`var`, `domain`, `constraint` lines) with an
/// optional indent; variables and constraints in ascending index order.
pub(crate) fn write_block(net: &Stn, out: &mut String) {
    use std::fmt::Write;
    for v in net.var_ids() {
        if let Some(name) = net.name(v) {
            let _ = writeln!(out, "var {v} {name}");
        }
    }
    for v in net.var_ids() {
        let _ = writeln!(out, "domain {v} {}", net.domain(v).to_text());
    }
    for ((v, w), ivl) in net.constraints() {
        let _ = writeln!(out, "constraint {v} {w} {}", ivl.to_text());
    }
}

pub fn serialize_stn(net: &Stn) -> String {
    let mut out = format!("stn {}\n", net.n());
    write_block(net, &mut out);
    out
}
