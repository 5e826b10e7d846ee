use std::fs;

use containment::graph::AgentId;
use containment::scenario::{
    load_scenario, preset, preset_karate, run_scenario, write_trajectory_csv, ScenarioError,
};

#[test]
fn presets_validate_and_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    for seed in [0, 1, 17, 123] {
        let s = preset_karate(seed);
        assert_eq!(s.config.topology.followers().len(), 7);
        assert_eq!(s.config.topology.leaders().count(), 3);
        let path = dir.path().join(format!("k{seed}.json"));
        fs::write(&path, s.to_file().to_json()).unwrap();
        let back = load_scenario(&path).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.config_hash(), s.config_hash());
    }
}

#[test]
fn hash_tracks_dynamics_only() {
    let base = preset_karate(2);
    let mut thinned = base.clone();
    thinned.config.record_every = 25;
    assert_eq!(base.config_hash(), thinned.config_hash());
    let mut other = preset("karate", 2).unwrap();
    other.solver.alpha = 0.6;
    assert_ne!(other.build().unwrap().config_hash(), base.config_hash());
}

#[test]
fn initial_margin_violation_names_the_edge() {
    let mut f = preset("karate", 0).unwrap();
    f.agents[0].state = vec![5.0, 5.0];
    match f.build() {
        Err(ScenarioError::Invalid(issues)) => {
            assert!(issues.iter().any(|i| i.path == "edges[0]"), "{issues:?}");
        }
        other => panic!("expected validation failure, got {other:?}"),
    }
}

#[test]
fn trajectory_table_is_self_describing() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = preset_karate(4);
    s.config.horizon = 0.05;
    let outcome = run_scenario(&s);
    let path = dir.path().join("t.csv");
    write_trajectory_csv(&path, &outcome.record, &s.config.topology).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 10 * 2 + 21);
    assert_eq!(header[1], "q1_F_1");
    assert_eq!(header[20], "q10_L_2");
    assert_eq!(header[21], "b_1_8");
    assert_eq!(lines.count(), outcome.record.times.len());
    let row0: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(row0[1..3], *s.config.initial_states.get(AgentId(0)));
}
