//! A miniature bottleneck-weight sweep over two replicate seeds, written as
//! a CSV table with one row per (setting, seed) cell.
//!
//! cargo run --release --example ablation_sweep [out.csv]

use std::path::PathBuf;

use ib_odometry::eval::{gamma_sweep, write_cells_csv, ExperimentConfig};
use ib_odometry::model::ModelConfig;
use ib_odometry::train::TrainConfig;
use ib_odometry::world::WorldConfig;

fn main() -> ib_odometry::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ibodo-gamma.csv"));
    let base = ExperimentConfig {
        world: WorldConfig {
            frames: 30,
            ..Default::default()
        },
        train_sequences: 4,
        test_sequences: 2,
        model: ModelConfig {
            latent_dim: 4,
            deterministic_dim: 8,
            hidden_dim: 8,
            ..Default::default()
        },
        train: TrainConfig {
            epochs: 3,
            lr_initial: 1e-3,
            record_timing: false,
            ..Default::default()
        },
        ..Default::default()
    };
    let rows = gamma_sweep(&base, &[0, 1])?;
    write_cells_csv(&out, &rows)?;
    println!("{:<12} {:>4} {:>9} {:>11}", "setting", "seed", "t_rmse", "r_rmse");
    for r in &rows {
        println!("{:<12} {:>4} {:>9.4} {:>11.4}", r.setting, r.seed, r.t_rmse, r.r_rmse);
    }
    println!("wrote {}", out.display());
    Ok(())
}
