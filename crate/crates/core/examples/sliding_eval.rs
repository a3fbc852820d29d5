//! Sliding-window evaluation: every frame pair is predicted once per clip
//! position, and the refined estimate drops position 0 and averages the rest.
//!
//! cargo run --release --example sliding_eval

use ib_odometry::eval::{evaluate, sliding_predictions, ExperimentConfig};
use ib_odometry::model::ModelConfig;
use ib_odometry::train::{train, TrainConfig};
use ib_odometry::world::WorldConfig;

fn main() -> ib_odometry::Result<()> {
    let exp = ExperimentConfig {
        world: WorldConfig {
            frames: 60,
            ..Default::default()
        },
        train_sequences: 6,
        test_sequences: 2,
        model: ModelConfig {
            latent_dim: 8,
            deterministic_dim: 16,
            hidden_dim: 16,
            ..Default::default()
        },
        train: TrainConfig {
            epochs: 6,
            lr_initial: 1e-3,
            ..Default::default()
        },
        ..Default::default()
    };
    let (model, _) = train(&exp.train_data()?, exp.model_config(), exp.train.clone())?;
    let test = exp.test_data()?;
    let len = exp.train.clip_len;

    let sliding = sliding_predictions(&model, &test[0], len)?;
    let pair = 10;
    println!("pair {pair} of sequence 0, truth yaw {:+.4} deg", test[0].poses()[pair].r[2].to_degrees());
    for (pos, p) in sliding.preds[pair].iter().enumerate() {
        if let Some(p) = p {
            println!("  position {pos}: yaw {:+.4} deg", p.r[2].to_degrees());
        }
    }

    let report = evaluate(&model, &test, len)?;
    println!("position   t_rmse(m)  r_rmse(deg)  sigma2");
    for i in 0..len {
        let s = report.per_position_sigma2.as_ref().map_or(f64::NAN, |v| v[i]);
        println!(
            "{i:>8} {:>11.4} {:>12.4} {:>7.4}",
            report.per_position_t_rmse[i], report.per_position_r_rmse[i], s
        );
    }
    println!("refined  {:>11.4} {:>12.4}", report.t_rmse, report.r_rmse);
    Ok(())
}
