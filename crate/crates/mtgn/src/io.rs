//! On-disk formats: point-cloud CSV, flow checkpoints, training history, and
//! the training-configuration sidecar.
//!
//! All numeric storage is double precision regardless of the in-memory
//! scalar type. Point CSVs use a `x0,x1,...` header and `{:.16e}` values (17
//! significant digits, so f64 round-trips bitwise); readers accept files
//! with or without the header line. Every write goes through a temp file in
//! the target directory followed by a rename, so a crash never leaves a
//! half-written artifact behind.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Scalar;
use crate::flow::FlowParams;
use crate::matrix::Matrix;
use crate::rng::Seed;
use crate::trainer::{OptimizerKind, TrainConfig, TrainHistory};

/// Writes `contents` through a temp file in the target directory followed
/// by a rename, so readers never observe a partial file.
pub fn write_text_atomic(path: &Path, contents: &str) -> Result<()> {
    atomic_write(path, contents)
}

fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::InvalidArgument(format!("unusable path {}", path.display())))?;
    let tmp = match dir {
        Some(d) => d.join(format!(".{file_name}.tmp")),
        None => Path::new(&format!(".{file_name}.tmp")).to_path_buf(),
    };
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes a point cloud as CSV with a coordinate header.
pub fn write_points<F: Scalar>(path: &Path, points: &Matrix<F>) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = (0..points.cols()).map(|c| format!("x{c}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..points.rows() {
        let row: Vec<String> = points
            .row(i)
            .iter()
            .map(|v| format!("{:.16e}", v.to_f64_lossy()))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    atomic_write(path, &out)
}

/// Reads a point cloud written by [`write_points`], or any compatible CSV.
///
/// A first line whose fields do not all parse as numbers is treated as a
/// header. Every data row must have the same number of columns and only
/// finite values.
pub fn read_points<F: Scalar>(path: &Path) -> Result<Matrix<F>> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<F>> = Vec::new();
    let mut cols: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.trim().parse::<f64>()).collect();
        let values = match parsed {
            Ok(values) => values,
            Err(_) if rows.is_empty() && cols.is_none() => {
                // a non-numeric first line is the header
                cols = Some(fields.len());
                continue;
            }
            Err(e) => {
                return Err(Error::Parse {
                    file,
                    line: line_no,
                    message: format!("unreadable number: {e}"),
                });
            }
        };
        if let Some(c) = cols {
            if values.len() != c {
                return Err(Error::Parse {
                    file,
                    line: line_no,
                    message: format!("expected {c} columns, found {}", values.len()),
                });
            }
        } else {
            cols = Some(values.len());
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                file,
                line: line_no,
                message: "non-finite value".to_string(),
            });
        }
        rows.push(values.into_iter().map(F::from_f64_lossy).collect());
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            file,
            line: text.lines().count(),
            message: "no data rows".to_string(),
        });
    }
    Matrix::from_rows(&rows)
}

/// Serialized flow parameters. `h` is stored redundantly and must equal
/// `1/L`; a mismatch means the file was edited or corrupted.
#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    d: usize,
    #[serde(rename = "L")]
    depth: usize,
    h: f64,
    use_bias: bool,
    /// Row-major `d * d` weight matrices, one per layer.
    layers: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    biases: Option<Vec<Vec<f64>>>,
}

/// Writes flow parameters as a JSON checkpoint.
pub fn write_checkpoint<F: Scalar>(path: &Path, params: &FlowParams<F>) -> Result<()> {
    let file = CheckpointFile {
        d: params.dim(),
        depth: params.depth(),
        h: params.step_size().to_f64_lossy(),
        use_bias: params.use_bias(),
        layers: (0..params.depth())
            .map(|j| params.layer(j).iter().map(|v| v.to_f64_lossy()).collect())
            .collect(),
        biases: params.use_bias().then(|| {
            (0..params.depth())
                .map(|j| {
                    params
                        .bias(j)
                        .expect("use_bias implies biases")
                        .iter()
                        .map(|v| v.to_f64_lossy())
                        .collect()
                })
                .collect()
        }),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|source| Error::Json {
        context: format!("encoding checkpoint {}", path.display()),
        source,
    })?;
    atomic_write(path, &text)
}

/// Reads a JSON checkpoint back into flow parameters.
pub fn read_checkpoint<F: Scalar>(path: &Path) -> Result<FlowParams<F>> {
    let text = fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text).map_err(|source| Error::Json {
        context: format!("decoding checkpoint {}", path.display()),
        source,
    })?;
    if file.depth == 0 {
        return Err(Error::InvalidArgument(format!(
            "{}: checkpoint has no layers",
            path.display()
        )));
    }
    if (file.h * file.depth as f64 - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "{}: stored step size {} does not match 1/{}",
            path.display(),
            file.h,
            file.depth
        )));
    }
    if file.use_bias != file.biases.is_some() {
        return Err(Error::InvalidArgument(format!(
            "{}: use_bias flag disagrees with the stored biases",
            path.display()
        )));
    }
    if file.layers.len() != file.depth {
        return Err(Error::DimensionMismatch {
            expected: file.depth,
            got: file.layers.len(),
        });
    }
    let layers = file
        .layers
        .into_iter()
        .map(|l| l.into_iter().map(F::from_f64_lossy).collect())
        .collect();
    let biases = file
        .biases
        .map(|bs| {
            bs.into_iter()
                .map(|b| b.into_iter().map(F::from_f64_lossy).collect())
                .collect()
        });
    FlowParams::with_biases(file.d, layers, biases)
}

/// Writes the per-epoch history as CSV:
/// `epoch,sigma,misfit,energy,total,grad_norm`.
pub fn write_history<F: Scalar>(path: &Path, history: &TrainHistory<F>) -> Result<()> {
    let mut out = String::from("epoch,sigma,misfit,energy,total,grad_norm\n");
    for r in &history.records {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.epoch,
            r.sigma.to_f64_lossy(),
            r.misfit.to_f64_lossy(),
            r.energy.to_f64_lossy(),
            r.total.to_f64_lossy(),
            r.grad_norm.to_f64_lossy(),
        ));
    }
    atomic_write(path, &out)
}

#[derive(Debug, Serialize, Deserialize)]
struct ScheduleFile {
    initial: f64,
    factor: f64,
    period: usize,
    floor: f64,
}

/// Serialized training configuration, written next to every run so results
/// can be reproduced from the artifacts alone.
#[derive(Debug, Serialize, Deserialize)]
struct TrainConfigFile {
    alpha: f64,
    learning_rate: f64,
    epochs: usize,
    batch_size: usize,
    min_batch_size: usize,
    allow_small_batch: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    steps_per_epoch: Option<usize>,
    schedule: ScheduleFile,
    optimizer: String,
    seed: u64,
    init_std: f64,
    layers: usize,
    use_bias: bool,
}

/// Writes the training configuration sidecar JSON.
pub fn write_train_config<F: Scalar>(path: &Path, cfg: &TrainConfig<F>) -> Result<()> {
    let file = TrainConfigFile {
        alpha: cfg.alpha.to_f64_lossy(),
        learning_rate: cfg.learning_rate.to_f64_lossy(),
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        min_batch_size: cfg.min_batch_size,
        allow_small_batch: cfg.allow_small_batch,
        steps_per_epoch: cfg.steps_per_epoch,
        schedule: ScheduleFile {
            initial: cfg.schedule.initial.to_f64_lossy(),
            factor: cfg.schedule.factor.to_f64_lossy(),
            period: cfg.schedule.period,
            floor: cfg.schedule.floor.to_f64_lossy(),
        },
        optimizer: match cfg.optimizer {
            OptimizerKind::Adam => "adam".to_string(),
            OptimizerKind::Descent => "gd".to_string(),
        },
        seed: cfg.seed.0,
        init_std: cfg.init_std.to_f64_lossy(),
        layers: cfg.layers,
        use_bias: cfg.use_bias,
    };
    let text = serde_json::to_string_pretty(&file).map_err(|source| Error::Json {
        context: format!("encoding train config {}", path.display()),
        source,
    })?;
    atomic_write(path, &text)
}

/// Reads a training configuration sidecar back.
pub fn read_train_config<F: Scalar>(path: &Path) -> Result<TrainConfig<F>> {
    let text = fs::read_to_string(path)?;
    let file: TrainConfigFile = serde_json::from_str(&text).map_err(|source| Error::Json {
        context: format!("decoding train config {}", path.display()),
        source,
    })?;
    let optimizer = match file.optimizer.as_str() {
        "adam" => OptimizerKind::Adam,
        "gd" => OptimizerKind::Descent,
        other => {
            return Err(Error::InvalidArgument(format!(
                "{}: unknown optimizer \"{other}\" (expected \"adam\" or \"gd\")",
                path.display()
            )));
        }
    };
    Ok(TrainConfig {
        alpha: F::from_f64_lossy(file.alpha),
        learning_rate: F::from_f64_lossy(file.learning_rate),
        epochs: file.epochs,
        batch_size: file.batch_size,
        min_batch_size: file.min_batch_size,
        allow_small_batch: file.allow_small_batch,
        steps_per_epoch: file.steps_per_epoch,
        schedule: crate::trainer::SigmaSchedule {
            initial: F::from_f64_lossy(file.schedule.initial),
            factor: F::from_f64_lossy(file.schedule.factor),
            period: file.schedule.period,
            floor: F::from_f64_lossy(file.schedule.floor),
        },
        optimizer,
        seed: Seed(file.seed),
        init_std: F::from_f64_lossy(file.init_std),
        layers: file.layers,
        use_bias: file.use_bias,
    })
}
