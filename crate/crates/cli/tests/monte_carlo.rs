use std::path::Path;

use ciest::harness::{compare_modes, run_monte_carlo, HarnessOptions};
use ciest::scenario_file::load_scenario;
use ciest_core::Scenario;

fn fixture(name: &str) -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name);
    load_scenario(&path).unwrap().scenario
}

#[test]
fn analytic_trace_matches_empirical_mse() {
    let s = fixture("reference.toml");
    let summary = run_monte_carlo(&s, 10, 10_000, 31, &HarnessOptions::default()).unwrap();
    for k in [1, 3, 10] {
        let row = &summary.iterations[k];
        for (i, a) in row.agents.iter().enumerate() {
            let z = (a.empirical_mse - a.trace_cov) / a.mse_stderr;
            assert!(z.abs() < 3.0, "agent {} k={k}: z={z:.3}", i + 1);
        }
        let c = &row.central;
        assert!(((c.empirical_mse - c.trace_cov) / c.mse_stderr).abs() < 3.0);
    }
}

#[test]
fn summary_series_cover_every_iteration() {
    let s = fixture("ring4.toml");
    let summary = run_monte_carlo(&s, 25, 40, 2, &HarnessOptions::default()).unwrap();
    assert_eq!(summary.iterations.len(), 26);
    assert!(summary.iterations.iter().all(|it| it.agents.len() == 4));
    assert_eq!(summary.iterations[0].central.jitter_count, 4);
    assert!(summary.iterations.iter().all(|it| it.central.jitter_count <= 4));
    assert!(summary.iterations[10..].iter().all(|it| it.central.jitter_count == 0));
    assert!(summary.iterations.iter().all(|it| it.central.fixup_count == 0));
}

#[test]
fn disagreement_decays_on_connected_fixture() {
    let s = fixture("reference.toml");
    let summary = run_monte_carlo(&s, 400, 200, 8, &HarnessOptions::default()).unwrap();
    let first = summary.iterations[1].central.consensus_disagreement;
    let last = summary.iterations[400].central.consensus_disagreement;
    assert!(first > 0.0);
    assert!(last < 1e-2 * first, "{last} vs {first}");
}

#[test]
fn sparse_breakdown_shortens_only_the_sparse_run() {
    let s = fixture("ring4.toml");
    let cmp = compare_modes(&s, 150, 10, 1, &HarnessOptions::default()).unwrap();
    assert_eq!(cmp.exact.horizon, 150);
    assert!(cmp.exact.breakdown.is_none());
    assert!(cmp.sparse.horizon < 150);
    assert!(cmp.sparse.breakdown.as_deref().unwrap().contains("no longer finite"));
    assert_eq!(cmp.gain_divergence.len(), cmp.sparse.horizon + 1);
    assert_eq!(cmp.gain_divergence[0], 0.0);
}
