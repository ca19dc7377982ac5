use std::path::PathBuf;

use stnac::mastn::parse_mastn;
use stnac::stn::parse_stn;
use stnac::workloads::interview_ring;
use stnac::{enforce_ac, oracle_minimal_domains, Interval, Mastn};

fn data(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Domains, constraints and externals, ignoring variable names.
fn structure(m: &Mastn) -> (Vec<Vec<Interval>>, Vec<Vec<String>>, Vec<String>) {
    let domains = m.agents().iter().map(|a| a.domains().to_vec()).collect();
    let constraints = m
        .agents()
        .iter()
        .map(|a| a.constraints().map(|((v, w), i)| format!("{v} {w} {i}")).collect())
        .collect();
    let externals = m.externals().map(|x| format!("{x:?}")).collect();
    (domains, constraints, externals)
}

#[test]
fn ring_file_matches_builtin_ring() {
    let parsed = parse_mastn(&data("ring4.mastn")).unwrap();
    assert_eq!(structure(&parsed), structure(&interview_ring()));
}

#[test]
fn corpus_solver_matches_oracle() {
    for (file, consistent) in [("two_var.stn", true), ("cycle3.stn", false), ("unbounded_precedence.stn", true)] {
        let net = parse_stn(&data(file)).unwrap();
        let ac = enforce_ac(&net).unwrap();
        let oracle = oracle_minimal_domains(&net).unwrap();
        assert_eq!(ac.is_consistent(), consistent, "{file}");
        assert_eq!(oracle.is_consistent(), consistent, "{file}");
        assert_eq!(ac.closure().map(|c| c.domains.as_slice()), oracle.domains(), "{file}");
    }
}

#[test]
fn two_var_closure() {
    let net = parse_stn(&data("two_var.stn")).unwrap();
    let ac = enforce_ac(&net).unwrap();
    assert_eq!(ac.closure().unwrap().domains, vec![Interval::finite(0, 8), Interval::finite(2, 10)]);
}
