//! Dataset directories: `manifest.json` plus one record file per sequence.
//!
//! A record stores a `frames` array with one row per frame laid out as
//! `[index, tx, ty, tz, roll, pitch, yaw, vis_obs..., imu_obs...]` and a
//! `nuisance` array, using the container format of [`crate::blob`].

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SequenceDataset, SequenceMeta, WorldConfig};
use crate::blob::{self, Array};
use crate::error::{Error, Result};
use crate::se3::{integrate, Pose6};

pub const SCHEMA_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"IBSEQ\0v1";

#[derive(Debug, Serialize, Deserialize)]
struct RecordMeta {
    schema_version: u32,
    meta: SequenceMeta,
    vis_dim: usize,
    imu_substeps: usize,
    imu_dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    file: String,
    index: u64,
    seed: u64,
    degradation: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    schema_version: u32,
    world: WorldConfig,
    sequences: Vec<ManifestEntry>,
}

pub fn save_dataset(dataset: &SequenceDataset, path: &Path) -> Result<()> {
    let frames = dataset.frames();
    let width = 7 + dataset.vis_dim + dataset.imu_substeps * dataset.imu_dim;
    let mut rows = Vec::with_capacity(frames * width);
    for (t, pose) in dataset.poses().iter().enumerate() {
        rows.push(t as f64);
        rows.extend_from_slice(&pose.to_vec6());
        rows.extend_from_slice(dataset.vis_row(t));
        rows.extend_from_slice(dataset.imu_frame(t));
    }
    let meta = RecordMeta {
        schema_version: SCHEMA_VERSION,
        meta: dataset.meta.clone(),
        vis_dim: dataset.vis_dim,
        imu_substeps: dataset.imu_substeps,
        imu_dim: dataset.imu_dim,
    };
    blob::write(
        path,
        MAGIC,
        serde_json::to_value(meta)?,
        &[
            Array {
                name: "frames".into(),
                shape: vec![frames, width],
                data: &rows,
            },
            Array {
                name: "nuisance".into(),
                shape: vec![dataset.nuisance.len()],
                data: &dataset.nuisance,
            },
        ],
    )
}

pub fn load_dataset(path: &Path) -> Result<SequenceDataset> {
    let ctx = path.display().to_string();
    let mut contents = blob::read(path, MAGIC)?;
    let meta: RecordMeta = serde_json::from_value(contents.meta.clone())
        .map_err(|e| Error::Format(format!("{ctx}: record header: {e}")))?;
    if meta.schema_version != SCHEMA_VERSION {
        return Err(Error::Version {
            expected: SCHEMA_VERSION,
            found: meta.schema_version,
        });
    }
    let (shape, rows) = contents.take("frames", &ctx)?;
    let (_, nuisance) = contents.take("nuisance", &ctx)?;
    let width = 7 + meta.vis_dim + meta.imu_substeps * meta.imu_dim;
    if shape.len() != 2 || shape[1] != width {
        return Err(Error::Format(format!(
            "{ctx}: frames array has shape {shape:?}, expected [_, {width}]"
        )));
    }
    let mut poses = Vec::with_capacity(shape[0]);
    let mut vis_obs = Vec::with_capacity(shape[0] * meta.vis_dim);
    let mut imu_obs = Vec::with_capacity(shape[0] * meta.imu_substeps * meta.imu_dim);
    for (t, row) in rows.chunks_exact(width).enumerate() {
        if row[0] != t as f64 {
            return Err(Error::Format(format!("{ctx}: frame {t} carries index {}", row[0])));
        }
        poses.push(Pose6::from_slice(&row[1..7]));
        vis_obs.extend_from_slice(&row[7..7 + meta.vis_dim]);
        imu_obs.extend_from_slice(&row[7 + meta.vis_dim..]);
    }
    Ok(SequenceDataset {
        trajectory: integrate(&poses),
        vis_obs,
        imu_obs,
        nuisance,
        vis_dim: meta.vis_dim,
        imu_substeps: meta.imu_substeps,
        imu_dim: meta.imu_dim,
        meta: meta.meta,
    })
}

/// Writes a dataset directory. Existing record files of the same names are overwritten.
pub fn save_datasets(dir: &Path, world: &WorldConfig, sequences: &[SequenceDataset]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(sequences.len());
    for (i, ds) in sequences.iter().enumerate() {
        let file = format!("seq_{i:05}.bin");
        save_dataset(ds, &dir.join(&file))?;
        entries.push(ManifestEntry {
            file,
            index: ds.meta.index,
            seed: ds.meta.seed,
            degradation: ds.meta.degradation.clone(),
        });
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        world: world.clone(),
        sequences: entries,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_datasets(dir: &Path) -> Result<(WorldConfig, Vec<SequenceDataset>)> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let raw: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("manifest.json: {e}")))?;
    let version = raw.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if version != SCHEMA_VERSION {
        return Err(Error::Version {
            expected: SCHEMA_VERSION,
            found: version,
        });
    }
    let manifest: Manifest =
        serde_json::from_value(raw).map_err(|e| Error::Format(format!("manifest.json: {e}")))?;
    let sequences = manifest
        .sequences
        .iter()
        .map(|e| load_dataset(&dir.join(&e.file)))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest.world, sequences))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::generate_sequences;

    fn sample() -> (WorldConfig, Vec<SequenceDataset>) {
        let world = WorldConfig {
            frames: 12,
            seed: 9,
            ..Default::default()
        };
        let seqs = generate_sequences(&world, 0..3).unwrap();
        (world, seqs)
    }

    #[test]
    fn directory_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (world, seqs) = sample();
        save_datasets(dir.path(), &world, &seqs).unwrap();
        let (w2, back) = load_datasets(dir.path()).unwrap();
        assert_eq!(w2, world);
        assert_eq!(back, seqs);
    }

    #[test]
    fn truncated_record_fails_naming_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let (world, seqs) = sample();
        save_datasets(dir.path(), &world, &seqs).unwrap();
        let rec = dir.path().join("seq_00001.bin");
        let bytes = fs::read(&rec).unwrap();
        fs::write(&rec, &bytes[..bytes.len() / 2]).unwrap();
        let err = load_datasets(dir.path()).unwrap_err();
        assert!(err.to_string().contains("seq_00001.bin"), "{err}");
    }

    #[test]
    fn manifest_version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (world, seqs) = sample();
        save_datasets(dir.path(), &world, &seqs).unwrap();
        let path = dir.path().join("manifest.json");
        let text = fs::read_to_string(&path).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 7");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            load_datasets(dir.path()),
            Err(Error::Version { expected: 1, found: 7 })
        ));
    }
}
