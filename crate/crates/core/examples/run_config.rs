//! Drive the command layer from code: load a TOML run config, prepare the
//! data and train the configured model into a scratch directory.
//!
//! cargo run --example run_config [path/to/config.toml]

use std::path::PathBuf;

use monochoice::cli::{cmd_audit, cmd_prepare, cmd_train, RunConfig};

fn main() -> monochoice::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/swissmetro.toml"));
    let mut cfg = RunConfig::load(&path)?;
    cfg.model.kind = monochoice::models::ModelKind::AsuDnn;
    let out = std::env::temp_dir().join("monochoice-run-config");

    let prepared = cmd_prepare(&cfg, &out)?;
    println!("{} observations -> {}", prepared.rows, prepared.dataset.display());
    let outcome = cmd_train(&cfg, &out)?;
    println!("{} trained, best epoch {}", outcome.id, outcome.best_epoch);
    for (name, report) in cmd_audit(&cfg, &out, None)? {
        println!("{name}: max violation fraction {:.4}", report.max_fraction());
    }
    println!("outputs in {}", out.display());
    Ok(())
}
