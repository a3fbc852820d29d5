//! Mean latent variance as an uncertainty signal: compares clean, noisy and
//! missing sensor data, then bins the clean variance by turn angle.
//!
//! cargo run --release --example degradation_uncertainty

use ib_odometry::eval::{evaluate, uncertainty, ExperimentConfig};
use ib_odometry::model::ModelConfig;
use ib_odometry::train::{train, TrainConfig};
use ib_odometry::world::{degrade, DegradeKind, DegradeTarget, WorldConfig};

fn main() -> ib_odometry::Result<()> {
    let exp = ExperimentConfig {
        world: WorldConfig {
            frames: 60,
            ..Default::default()
        },
        train_sequences: 6,
        test_sequences: 3,
        test_nuisance_mean: 0.0,
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
    let clean = exp.test_data()?;
    let len = exp.train.clip_len;

    println!("condition        sigma2   t_rmse(m)  r_rmse(deg)");
    let mut cases = vec![("clean".to_string(), clean.clone())];
    for kind in [DegradeKind::Noisy, DegradeKind::Missing] {
        for target in [DegradeTarget::Vis, DegradeTarget::Imu, DegradeTarget::Both] {
            let data = clean.iter().map(|d| degrade(d, kind, target)).collect();
            cases.push((format!("{kind}-{target}"), data));
        }
    }
    for (label, data) in &cases {
        let r = evaluate(&model, data, len)?;
        println!(
            "{label:<14} {:>10.7} {:>11.4} {:>12.4}",
            r.sigma2.unwrap_or(f64::NAN),
            r.t_rmse,
            r.r_rmse
        );
    }

    let u = uncertainty(&model, &clean, len, 4)?;
    println!("turn angle (deg)     steps   sigma2");
    for b in &u.by_turn {
        println!(
            "{:>6.3} .. {:<6.3} {:>8} {:>8}",
            b.lo.to_degrees(),
            b.hi.to_degrees(),
            b.count,
            b.sigma2.map_or("-".into(), |s| format!("{s:.5}"))
        );
    }
    Ok(())
}
