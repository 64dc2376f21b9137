//! `natmaplab run`: resolve a config, take the run directory, execute, write outputs.

use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiments::execute;
use crate::result::ExperimentResult;

pub const RESULT_FILE: &str = "result.json";
/// Wall time lives beside `result.json` so that the result itself stays bit-identical.
pub const TIMING_FILE: &str = "timing.json";
const LOCK_FILE: &str = ".lock";

#[derive(Debug)]
pub struct RunOutcome {
    pub result: ExperimentResult,
    pub dir: PathBuf,
    pub elapsed: Duration,
}

impl RunOutcome {
    /// 0 when every check passes, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.result.passed() {
            0
        } else {
            2
        }
    }
}

/// Exclusive ownership of a run directory, released on drop.
struct RunLock(PathBuf);

impl RunLock {
    fn acquire(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self(path)),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(CliError::Locked(dir.to_path_buf())),
            Err(e) => Err(CliError::io(format!("creating {}", path.display()), e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

/// File name for a check's plot data.
fn csv_name(check: &str) -> String {
    let safe: String = check
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.csv")
}

pub fn run(config_path: &Path) -> Result<RunOutcome, CliError> {
    run_config(&ExperimentConfig::load(config_path)?)
}

pub fn run_config(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let resolved = config.resolve()?;
    let dir = config.output_dir();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let _lock = RunLock::acquire(&dir)?;

    let start = Instant::now();
    let (rows, data) = execute(&resolved);
    let elapsed = start.elapsed();
    let result = ExperimentResult::new(resolved, rows);

    write(&dir.join(RESULT_FILE), &result.to_json())?;
    for (name, csv) in &data {
        write(&dir.join(csv_name(name)), csv)?;
    }
    let timing = serde_json::json!({
        "experiment": result.experiment,
        "config_hash": result.config_hash,
        "wall_time_s": elapsed.as_secs_f64(),
    });
    write(&dir.join(TIMING_FILE), &format!("{timing:#}\n"))?;
    Ok(RunOutcome {
        result,
        dir,
        elapsed,
    })
}
