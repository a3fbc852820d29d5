use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{evaluate, EvalReport};
use crate::error::{invalid, Result};
use crate::model::{IbModel, ModelConfig, SensorSet, Variant};
use crate::train::{train, TrainConfig};
use crate::world::{generate_sequences, SequenceDataset, WorldConfig};

/// Test sequences draw indices from here on, disjoint from training indices.
pub const TEST_INDEX_OFFSET: u64 = 1_000_000;

pub const GAMMA_GRID: [f64; 6] = [0.0, 0.01, 0.05, 0.1, 0.5, 1.0];
pub const SAMPLE_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// A train/test world pair plus model and training settings.
///
/// The test world is the training world with its nuisance mean moved to
/// `test_nuisance_mean`; motion statistics and the sensor model are shared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub world: WorldConfig,
    pub train_sequences: usize,
    pub test_sequences: usize,
    pub test_nuisance_mean: f64,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            world: WorldConfig::default(),
            train_sequences: 20,
            test_sequences: 5,
            test_nuisance_mean: 2.0,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Copy for replicate `seed`: world family and training seed both move with it.
    pub fn replicate(&self, seed: u64) -> ExperimentConfig {
        let mut e = self.clone();
        e.world.seed = self.world.seed.wrapping_add(seed);
        e.train.seed = self.train.seed.wrapping_add(seed);
        e
    }

    /// The model config with input sizes taken from the world.
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            vis_dim: self.world.vis_dim,
            imu_substeps: self.world.imu_substeps,
            imu_dim: self.world.imu_dim,
            ..self.model.clone()
        }
    }

    pub fn test_world(&self) -> WorldConfig {
        WorldConfig {
            nuisance_mean: self.test_nuisance_mean,
            ..self.world.clone()
        }
    }

    pub fn train_data(&self) -> Result<Vec<SequenceDataset>> {
        generate_sequences(&self.world, 0..self.train_sequences as u64)
    }

    pub fn test_data(&self) -> Result<Vec<SequenceDataset>> {
        let start = TEST_INDEX_OFFSET;
        generate_sequences(&self.test_world(), start..start + self.test_sequences as u64)
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.model_config().validate()?;
        self.train.validate()?;
        if self.train_sequences == 0 || self.test_sequences == 0 {
            return Err(invalid("experiments need at least one training and one test sequence"));
        }
        Ok(())
    }
}

/// One row of an ablation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub sweep: String,
    pub setting: String,
    pub seed: u64,
    pub train_sequences: usize,
    pub latent_dim: usize,
    pub gamma: f64,
    pub variant: Variant,
    pub sensors: SensorSet,
    pub t_rmse: f64,
    pub r_rmse: f64,
    pub sigma2: Option<f64>,
}

impl CellResult {
    /// Translation and rotation errors on one scale: `t_rmse` plus `r_rmse`
    /// converted back to radians and weighted like the training loss.
    pub fn score(&self, alpha: f64, beta: f64) -> f64 {
        alpha * self.t_rmse + beta * self.r_rmse.to_radians()
    }
}

/// Trains on `train` and evaluates on `test`.
pub fn run_cell(
    exp: &ExperimentConfig,
    train_data: &[SequenceDataset],
    test_data: &[SequenceDataset],
) -> Result<(IbModel, EvalReport)> {
    let (model, _) = train(train_data, exp.model_config(), exp.train.clone())?;
    let report = evaluate(&model, test_data, exp.train.clip_len)?;
    Ok((model, report))
}

fn cell(sweep: &str, setting: String, seed: u64, exp: &ExperimentConfig, n: usize, report: &EvalReport) -> CellResult {
    CellResult {
        sweep: sweep.to_string(),
        setting,
        seed,
        train_sequences: n,
        latent_dim: exp.model.latent_dim,
        gamma: exp.model.gamma,
        variant: exp.model.variant,
        sensors: exp.model.sensors,
        t_rmse: report.t_rmse,
        r_rmse: report.r_rmse,
        sigma2: report.sigma2,
    }
}

/// Runs `settings` for every seed; each setting edits a replicate config.
/// Within one seed every setting sees the same world.
pub fn sweep<F>(sweep_name: &str, base: &ExperimentConfig, seeds: &[u64], settings: &[(String, F)]) -> Result<Vec<CellResult>>
where
    F: Fn(&mut ExperimentConfig),
{
    base.validate()?;
    let mut rows = Vec::new();
    for &seed in seeds {
        let rep = base.replicate(seed);
        let full_train = rep.train_data()?;
        let test = rep.test_data()?;
        for (label, edit) in settings {
            let mut exp = rep.clone();
            edit(&mut exp);
            exp.validate()?;
            let n = exp.train_sequences.min(full_train.len());
            let (_, report) = run_cell(&exp, &full_train[..n], &test)?;
            rows.push(cell(sweep_name, label.clone(), seed, &exp, n, &report));
        }
    }
    Ok(rows)
}

type Edit = Box<dyn Fn(&mut ExperimentConfig)>;

pub fn gamma_sweep(base: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<CellResult>> {
    let settings: Vec<(String, Edit)> = GAMMA_GRID
        .iter()
        .map(|&g| (format!("gamma={g}"), Box::new(move |e: &mut ExperimentConfig| e.model.gamma = g) as Edit))
        .collect();
    sweep("gamma", base, seeds, &settings)
}

pub fn sample_size_sweep(base: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<CellResult>> {
    let n = base.train_sequences;
    let settings: Vec<(String, Edit)> = SAMPLE_FRACTIONS
        .iter()
        .map(|&f| {
            let k = ((n as f64 * f).round() as usize).max(1);
            (
                format!("fraction={f}"),
                Box::new(move |e: &mut ExperimentConfig| e.train_sequences = k) as Edit,
            )
        })
        .collect();
    sweep("sample_size", base, seeds, &settings)
}

pub fn sensor_sweep(base: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<CellResult>> {
    let settings: Vec<(String, Edit)> = [SensorSet::Imu, SensorSet::Vis, SensorSet::VisImu]
        .into_iter()
        .map(|s| (format!("sensors={s}"), Box::new(move |e: &mut ExperimentConfig| e.model.sensors = s) as Edit))
        .collect();
    sweep("sensors", base, seeds, &settings)
}

pub fn variant_sweep(base: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<CellResult>> {
    let settings: Vec<(String, Edit)> = Variant::ALL
        .into_iter()
        .map(|v| (format!("variant={v}"), Box::new(move |e: &mut ExperimentConfig| e.model.variant = v) as Edit))
        .collect();
    sweep("variant", base, seeds, &settings)
}

/// Every latent dimension at every training-set size.
pub fn latent_dim_sweep(base: &ExperimentConfig, dims: &[usize], sizes: &[usize], seeds: &[u64]) -> Result<Vec<CellResult>> {
    let mut settings: Vec<(String, Edit)> = Vec::new();
    for &n in sizes {
        for &d in dims {
            settings.push((
                format!("n={n},d={d}"),
                Box::new(move |e: &mut ExperimentConfig| {
                    e.train_sequences = n;
                    e.model.latent_dim = d;
                }),
            ));
        }
    }
    let needed = sizes.iter().copied().max().unwrap_or(0);
    let base = ExperimentConfig {
        train_sequences: base.train_sequences.max(needed),
        ..base.clone()
    };
    sweep("latent_dim", &base, seeds, &settings)
}

pub fn write_cells_csv(path: &Path, rows: &[CellResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `round(d · factor)`, the latent size scaled by a sample-size growth factor.
pub fn scale_dim(d: usize, factor: f64) -> usize {
    (d as f64 * factor).round() as usize
}

/// Growth of `n / ln n` from `n0` to `n1`.
pub fn growth_ratio(n0: f64, n1: f64) -> f64 {
    (n1 / n1.ln()) / (n0 / n0.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helpers() {
        assert_eq!(scale_dim(384, 1.780), 684);
        let r = growth_ratio(1000.0, 4000.0);
        let oracle = 4000.0 / 4000f64.ln() * 1000f64.ln() / 1000.0;
        assert!((r - oracle).abs() < 1e-12);
        assert!((r - 3.329).abs() < 5e-3, "{r}");
        assert_eq!(GAMMA_GRID, [0.0, 0.01, 0.05, 0.1, 0.5, 1.0]);
    }

    #[test]
    fn replicates_share_the_world_across_settings_only() {
        let base = ExperimentConfig::default();
        let a = base.replicate(1);
        let b = base.replicate(2);
        assert_ne!(a.world.seed, b.world.seed);
        assert_eq!(a.test_world().nuisance_mean, 2.0);
        assert_eq!(a.test_world().seed, a.world.seed);
    }

    #[test]
    fn tiny_sweep_writes_one_row_per_cell() {
        let base = ExperimentConfig {
            world: WorldConfig {
                frames: 6,
                vis_dim: 4,
                imu_substeps: 2,
                ..Default::default()
            },
            train_sequences: 2,
            test_sequences: 1,
            model: ModelConfig {
                latent_dim: 2,
                deterministic_dim: 3,
                hidden_dim: 3,
                ..Default::default()
            },
            train: TrainConfig {
                epochs: 1,
                clip_len: 3,
                record_timing: false,
                ..Default::default()
            },
            ..Default::default()
        };
        let rows = sensor_sweep(&base, &[0, 1]).unwrap();
        assert_eq!(rows.len(), 6);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_cells_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("sweep,setting,seed,train_sequences,latent_dim,gamma,variant,sensors,t_rmse,r_rmse,sigma2\n"));
        assert_eq!(text.lines().count(), 7);
    }
}
