//! Compares reverse-mode gradients of the full clip loss against central
//! finite differences over every parameter coordinate.
//!
//! cargo run --release --example grad_check

use std::time::Instant;

use ib_odometry::autodiff::{grad_check, Graph, Tensor, Var};
use ib_odometry::model::{sample_noise, ClipBatch, IbModel, ModelConfig};
use ib_odometry::rng::{normal, stream, Purpose};
use ib_odometry::world::{generate_sequences, WorldConfig};

fn main() -> ib_odometry::Result<()> {
    let world = WorldConfig {
        frames: 8,
        ..Default::default()
    };
    let seqs = generate_sequences(&world, 0..2)?;
    let width: usize = std::env::args().nth(1).map_or(16, |s| s.parse().expect("width"));
    let config = ModelConfig {
        latent_dim: 8,
        deterministic_dim: width,
        hidden_dim: width,
        ..Default::default()
    };
    let model = IbModel::new(config.clone(), 0)?;
    let (batch, len) = (2, 3);
    let noise = sample_noise(&mut stream(1, 0, Purpose::Training), batch, len, config.latent_dim);
    let clip = ClipBatch::from_windows(&seqs, &[(0, 0), (1, 4)], len, &config, &noise, true)?;

    // fresh biases are zero, which parks ReLU inputs on the kink where the
    // loss is not differentiable; a small jitter moves them off it
    let mut rng = stream(5, 0, Purpose::Init);
    let params: Vec<Tensor> = model
        .params()
        .tensors()
        .iter()
        .map(|t| t.map(|v| v + 0.1 * normal(&mut rng)))
        .collect();

    let start = Instant::now();
    let report = grad_check(
        |g: &mut Graph, p: &[Var]| -> ib_odometry::Result<Var> { Ok(model.clip_loss(g, p, &clip)?.total) },
        &params,
        1e-5,
        1e-4,
    )?;
    let names = model.params().names();
    println!("coordinates checked: {}", report.coordinates);
    println!("max relative error:  {:.3e}", report.max_rel_error);
    if let (Some((i, j)), Some((a, n))) = (report.worst, report.worst_values) {
        println!("worst coordinate:    {}[{j}] analytic {a:.6e} numeric {n:.6e}", names[i]);
    }
    println!("passed: {} in {:.1?}", report.passed(), start.elapsed());
    Ok(())
}
