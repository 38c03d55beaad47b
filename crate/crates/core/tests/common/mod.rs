#![allow(dead_code)]

use std::path::Path;

use uwa_chest::bench::ExperimentConfig;

/// A grid small enough to run in well under a second.
pub const SMALL_TOML: &str = r#"
n_trials = 4
m_obs = 60
seed = 9
solvers = ["admm", "omp", "fista"]

[channel]
n_taps = 80
sparsity = 4
amplitude_decay = 0.05
fading_rate = 0.95

[[noise]]
name = "awgn"
snr_db = 15.0

[[noise]]
name = "inr50"
snr_db = 15.0
inr_db = 50.0
q = 0.01

[output]
cir_snapshot_trials = 1
"#;

pub fn small_config(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml_str(SMALL_TOML).unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg
}

pub fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}
