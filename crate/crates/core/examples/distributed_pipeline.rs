//! The full exchange from the shipped config: local fits, upload, fusion,
//! download and the pooled-data baseline, then a replay of the fusion
//! center from the written messages.

use std::path::Path;

use rkhs_fusion::pipeline::{replay_fusion, run_pipeline, ExperimentConfig};
use rkhs_fusion::Result;

pub fn main() -> Result<()> {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/two_agent_cubic.json");
    let cfg = ExperimentConfig::load(&config)?;
    let out = std::env::temp_dir().join("rkhs-fusion-distributed-pipeline");
    let run = run_pipeline(&cfg, &out)?;

    let r = &run.report;
    println!("fusion weights a = {:.6}, b = {:.6}", r.fusion.a, r.fusion.b);
    for (name, m) in r.estimates.entries() {
        println!("{name:<12} rmse {:>12.4e}  H norm {:>9.4}", m.rmse_on_grid, m.h_norm);
    }
    let replay = replay_fusion(&out)?;
    println!(
        "replay from messages: {} values, max deviation {:.1e}",
        replay.values_compared, replay.max_deviation
    );
    println!("artifacts in {}", out.display());
    Ok(())
}
