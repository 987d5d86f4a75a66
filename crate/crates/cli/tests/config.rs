use std::collections::BTreeSet;

use perfscale::scaling::{sweep_targets, PredictionTable};
use perfscale_cli::{parse_config, table_for, DEFAULT_CONFIG};

#[test]
fn shipped_config_covers_every_prediction() {
    let cfg = parse_config(DEFAULT_CONFIG).unwrap();
    let table = table_for(&cfg.sweeps);
    let judged: BTreeSet<String> = cfg.sweeps.iter().flat_map(|s| sweep_targets(s, &table)).collect();
    let mut ps: Vec<f64> = cfg.sweeps.iter().flat_map(|s| s.p.iter().copied()).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    assert!(ps.iter().any(|&p| p < 2.0) && ps.iter().any(|&p| p > 2.0));
    let missing: Vec<String> = PredictionTable::all_ids(&ps).into_iter().filter(|id| !judged.contains(id)).collect();
    assert!(missing.is_empty(), "not judged by the shipped config: {missing:?}");
}

#[test]
fn shipped_config_sweep_names_are_unique() {
    let cfg = parse_config(DEFAULT_CONFIG).unwrap();
    let names: BTreeSet<&str> = cfg.sweeps.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names.len(), cfg.sweeps.len());
}

#[test]
fn unknown_sweep_key_names_the_key() {
    let text = "[[sweep]]\nname = \"x\"\netas = [0.5]\ncells = 3\n";
    let err = format!("{:#}", parse_config(text).unwrap_err());
    assert!(err.contains("cells") && err.contains("line"), "{err}");
}

#[test]
fn unsound_target_is_a_config_error() {
    let text = r#"
[[sweep]]
name = "x"
quantities = ["d"]
method = "corrector-cutoff"
etas = [0.25, 0.125, 0.0625]
targets = ["bounded-D-small-holes"]
"#;
    assert!(parse_config(text).is_err());
}
