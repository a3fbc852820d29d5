//! Generates a small car-profile world, writes it to disk, reads it back and
//! prints a few statistics of the motion and the nuisance channel.
//!
//! cargo run --release --example generate_world [out_dir]

use std::path::PathBuf;

use ib_odometry::world::{generate_sequences, load_datasets, save_datasets, Profile, WorldConfig};

fn main() -> ib_odometry::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ibodo-world"));
    let world = WorldConfig {
        profile: Profile::Car,
        frames: 100,
        seed: 7,
        ..Default::default()
    };
    let sequences = generate_sequences(&world, 0..4)?;
    save_datasets(&out, &world, &sequences)?;
    let (loaded_world, loaded) = load_datasets(&out)?;
    assert_eq!(loaded_world, world);
    assert_eq!(loaded, sequences);

    println!("wrote {} sequences to {}", loaded.len(), out.display());
    for ds in &loaded {
        let poses = ds.poses();
        let n = poses.len() as f64;
        let forward = poses.iter().map(|p| p.t[0]).sum::<f64>() / n;
        let yaw = poses.iter().map(|p| p.r[2].abs()).sum::<f64>() / n;
        println!(
            "sequence {:>2}: mean forward step {forward:.3} m, mean |yaw| {:.3} deg, nuisance {:?}",
            ds.meta.index,
            yaw.to_degrees(),
            ds.nuisance.iter().map(|v| format!("{v:+.2}")).collect::<Vec<_>>()
        );
    }
    Ok(())
}
