use std::fs;

use natmaplab::run::{run_config, RESULT_FILE};
use natmaplab::{ExperimentConfig, OUTPUT_DIR_ENV};

// Alone in its own binary: it sets a process-wide variable.
#[test]
fn environment_overrides_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let configured = tmp.path().join("configured");
    let overridden = tmp.path().join("overridden");
    let cfg = ExperimentConfig::from_json(&format!(
        r#"{{"experiment": "entropy", "n": 2, "output_dir": {:?}}}"#,
        configured.to_str().unwrap()
    ))
    .unwrap();
    assert_eq!(cfg.output_dir(), configured);
    let hash_before = run_config(&cfg).unwrap().result.config_hash;

    std::env::set_var(OUTPUT_DIR_ENV, &overridden);
    let out = run_config(&cfg).unwrap();
    std::env::remove_var(OUTPUT_DIR_ENV);
    assert_eq!(out.dir, overridden);
    assert!(overridden.join(RESULT_FILE).exists());
    // the output location is not part of the reproducible config
    assert_eq!(out.result.config_hash, hash_before);
    assert_eq!(
        fs::read(configured.join(RESULT_FILE)).unwrap(),
        fs::read(overridden.join(RESULT_FILE)).unwrap()
    );
}
