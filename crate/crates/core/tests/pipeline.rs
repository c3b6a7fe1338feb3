use moving_source::config::ExperimentConfig;
use moving_source::experiment::{assemble, prepare, run_single, RunSpec};
use moving_source::transfer::cache_path;

fn tiny() -> RunSpec {
    let text = r#"
        [grid]
        origin = [1.5, 0.0, 1.5]
        x_extent = 1.0
        z_extent = 1.0
        spacing = 0.1
        centering = "node"
        [array]
        n_mics = 8
        arms = 2
        [run]
        t_g_ms = 50.0
        m = 3
    "#;
    RunSpec::from_config(&ExperimentConfig::from_toml(text, None).unwrap())
}

#[test]
fn corrupted_cache_is_rebuilt() {
    let dir = tempfile::tempdir().unwrap();
    let spec = tiny();
    let prep = prepare(&spec).unwrap();
    let fresh = assemble(&prep, &spec.run, Some(dir.path())).unwrap();
    let path = cache_path(dir.path(), &fresh.key);
    let mut bytes = std::fs::read(&path).unwrap();
    let n = bytes.len();
    bytes[n / 2] ^= 0xff;
    std::fs::write(&path, &bytes).unwrap();
    assert!(moving_source::io::read_transfer(&path, Some(&fresh.key)).is_err());
    let rebuilt = assemble(&prep, &spec.run, Some(dir.path())).unwrap();
    assert_eq!(rebuilt, fresh);
    assert_eq!(moving_source::io::read_transfer(&path, Some(&fresh.key)).unwrap(), fresh);
}

#[test]
fn warm_and_cold_cache_agree() {
    let dir = tempfile::tempdir().unwrap();
    let spec = tiny();
    let uncached = run_single(&spec, None).unwrap();
    let cold = run_single(&spec, Some(dir.path())).unwrap();
    let warm = run_single(&spec, Some(dir.path())).unwrap();
    assert_eq!(uncached.result, cold.result);
    assert_eq!(cold.result, warm.result);
    assert_eq!(cold.map, warm.map);
}

#[test]
fn config_toml_roundtrip() {
    let cfg = ExperimentConfig::from_toml("profile = \"paper\"\n[run]\nm = 3\n", None).unwrap();
    let back = ExperimentConfig::from_toml(&cfg.to_toml(), None).unwrap();
    assert_eq!(cfg, back);
    assert_eq!(back.array.n_mics, 112);
}
