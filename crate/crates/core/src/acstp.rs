//! Centralized arc-consistency for STNs.
//!
//! [`enforce_ac`] sweeps the variables in ascending index order, tightening
//! each domain against every neighbor with `I_v <- I_v ∩ (I_w ⊗ I_wv)`, until a
//! whole sweep leaves every domain unchanged or a domain empties. Domains are
//! the propagation state, so the origin edges never need to be revisited: a
//! domain is always a subset of its own origin constraint.
//!
//! On a consistent network the fixpoint domains are the minimal domains. A
//! network that has not stabilized after `n + 1` sweeps is inconsistent.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::stn::{Stn, VarId};

/// One constraint check: the domain of `v` tightened by the domain of a
/// neighbor `w` carried over `I_wv`.
#[inline]
pub(crate) fn revise(dv: Interval, dw: Interval, support: Interval) -> Result<Interval> {
    Ok(dv.intersect(&dw.compose(&support)?))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcStats {
    /// Sweeps performed, including the final stabilizing one.
    pub iterations: usize,
    /// Pairwise constraint checks.
    pub checks: u64,
    /// Per-variable visits, i.e. implicit checks against the origin.
    pub domain_updates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InconsistencyWitness {
    EmptyDomain(VarId),
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Closure {
    pub domains: Vec<Interval>,
    pub stats: AcStats,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AcOutcome {
    Inconsistent { witness: InconsistencyWitness, stats: AcStats },
    Closure(Closure),
}

impl AcOutcome {
    pub fn is_consistent(&self) -> bool {
        matches!(self, AcOutcome::Closure(_))
    }

    pub fn closure(&self) -> Option<&Closure> {
        match self {
            AcOutcome::Closure(c) => Some(c),
            AcOutcome::Inconsistent { .. } => None,
        }
    }

    pub fn stats(&self) -> AcStats {
        match self {
            AcOutcome::Closure(c) => c.stats,
            AcOutcome::Inconsistent { stats, .. } => *stats,
        }
    }

    fn require_closure(&self) -> Result<&Closure> {
        self.closure()
            .ok_or_else(|| Error::Contract("operation requires a closure, not an inconsistent outcome".into()))
    }
}

pub fn enforce_ac(net: &Stn) -> Result<AcOutcome> {
    let n = net.n();
    let mut domains = net.domains().to_vec();
    let mut stats = AcStats::default();

    for k in 1..=n + 1 {
        stats.iterations = k;
        let mut stable = 0;
        for v in net.var_ids() {
            let before = domains[v.index()];
            stats.domain_updates += 1;
            let mut current = before;
            for &(w, support) in net.supports(v) {
                stats.checks += 1;
                current = revise(current, domains[w.index()], support)?;
            }
            domains[v.index()] = current;
            if current.is_empty() {
                return Ok(AcOutcome::Inconsistent {
                    witness: InconsistencyWitness::EmptyDomain(v),
                    stats,
                });
            }
            if current == before {
                stable += 1;
            }
        }
        if stable == n {
            return Ok(AcOutcome::Closure(Closure { domains, stats }));
        }
    }
    Ok(AcOutcome::Inconsistent { witness: InconsistencyWitness::IterationCap, stats })
}

/// First directed pair `(v, w)` whose constraint does not support the domain
/// of `v`, i.e. `I_v ⊄ I_w ⊗ I_wv`. Pairs are visited by ascending `v`, then
/// ascending `w`.
pub fn first_ac_violation(net: &Stn) -> Result<Option<(VarId, VarId)>> {
    for v in net.var_ids() {
        let dv = net.domain(v);
        if dv.is_empty() {
            return Ok(Some((v, v)));
        }
        for &(w, support) in net.supports(v) {
            if !dv.is_subset_of(&net.domain(w).compose(&support)?) {
                return Ok(Some((v, w)));
            }
        }
    }
    Ok(None)
}

pub fn is_arc_consistent(net: &Stn) -> Result<bool> {
    Ok(first_ac_violation(net)?.is_none())
}

/// One time point per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment(pub Vec<i64>);

impl Assignment {
    pub fn value(&self, v: VarId) -> i64 {
        self.0[v.index()]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSide {
    Lower,
    Upper,
}

/// All lower (or all upper) endpoints of a closure; both are solutions.
pub fn extract_bound_solution(outcome: &AcOutcome, side: BoundSide) -> Result<Assignment> {
    let closure = outcome.require_closure()?;
    closure
        .domains
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let (lo, hi) = d
                .finite_bounds()
                .ok_or_else(|| Error::Contract(format!("closure domain {i} is not finite")))?;
            Ok(match side {
                BoundSide::Lower => lo,
                BoundSide::Upper => hi,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(Assignment)
}

/// Draws a solution by fixing variables one at a time in index order, each to
/// a seeded uniform value of its current minimal domain, and re-propagating.
pub fn sample_solution(net: &Stn, outcome: &AcOutcome, seed: u64) -> Result<Assignment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    instantiate(net, outcome, |_, lo, hi| rng.random_range(lo..=hi))
}

/// Fixes variables in index order using `choose(v, lo, hi)`, which must
/// return a value in `[lo, hi]`.
pub(crate) fn instantiate(
    net: &Stn,
    outcome: &AcOutcome,
    mut choose: impl FnMut(VarId, i64, i64) -> i64,
) -> Result<Assignment> {
    let mut domains = outcome.require_closure()?.domains.clone();
    for v in net.var_ids() {
        let (lo, hi) = domains[v.index()]
            .finite_bounds()
            .ok_or_else(|| Error::Contract(format!("domain of {v} is not finite")))?;
        let t = choose(v, lo, hi);
        if !(lo..=hi).contains(&t) {
            return Err(Error::Contract(format!("value {t} outside [{lo},{hi}] for {v}")));
        }
        if lo == hi {
            continue;
        }
        domains[v.index()] = Interval::point(t);
        match enforce_ac(&net.with_domains(domains)?)? {
            AcOutcome::Closure(c) => domains = c.domains,
            AcOutcome::Inconsistent { .. } => {
                return Err(Error::Contract(format!(
                    "re-propagation after fixing {v} := {t} reported inconsistency"
                )))
            }
        }
    }
    domains
        .iter()
        .map(|d| d.finite_bounds().map(|(lo, _)| lo))
        .collect::<Option<Vec<_>>>()
        .map(Assignment)
        .ok_or_else(|| Error::Contract("unfixed variable after instantiation".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    Length { expected: usize, got: usize },
    Domain(VarId),
    Constraint(VarId, VarId),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Length { expected, got } => {
                write!(f, "assignment has {got} values, network has {expected} variables")
            }
            Violation::Domain(v) => write!(f, "variable {v} lies outside its domain"),
            Violation::Constraint(v, w) => write!(f, "constraint ({v},{w}) is violated"),
        }
    }
}

/// Checks every domain and every constraint `a_vw <= t_w - t_v <= b_vw`.
pub fn verify_assignment(net: &Stn, a: &Assignment) -> std::result::Result<(), Violation> {
    if a.len() != net.n() {
        return Err(Violation::Length { expected: net.n(), got: a.len() });
    }
    for v in net.var_ids() {
        if !net.domain(v).contains(a.value(v)) {
            return Err(Violation::Domain(v));
        }
    }
    for ((v, w), ivl) in net.constraints() {
        let diff = a.value(w).checked_sub(a.value(v));
        if !diff.is_some_and(|d| ivl.contains(d)) {
            return Err(Violation::Constraint(v, w));
        }
    }
    Ok(())
}
