//! The online MNIST protocol: train bin by bin in file order, scoring the
//! whole test set after every bin.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::write_atomic;
use crate::code::BinaryVector;
use crate::error::{LomError, Result};
use crate::mnist::{Dataset, ImageSet, InputConfig};
use crate::network::{DrawKey, Network, Phase, TopologyConfig};

pub const METRICS_HEADER: &str = "bin_index,images_seen,error_rate";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub bins: usize,
    pub bin_size: usize,
    /// Score only the first `n` test images.
    pub test_limit: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            bins: 30,
            bin_size: 2000,
            test_limit: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinRecord {
    pub bin_index: usize,
    pub images_seen: usize,
    pub error_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub records: Vec<BinRecord>,
    pub network: Network,
}

impl ExperimentResult {
    pub fn final_error(&self) -> Option<f64> {
        self.records.last().map(|r| r.error_rate)
    }
}

/// Windows of every image in `images`, one `Vec` per image.
pub fn extract_all(input: &InputConfig, images: &ImageSet) -> Vec<Vec<BinaryVector>> {
    (0..images.len())
        .into_par_iter()
        .map(|i| input.windows(images.image(i), images.rows, images.cols))
        .collect()
}

/// Fraction of misclassified examples. Example `i` uses the evaluation draws at index `i`.
pub fn evaluate(net: &Network, windows: &[Vec<BinaryVector>], labels: &[u8], seed: u64) -> Result<f64> {
    if windows.len() != labels.len() {
        return Err(LomError::dim("evaluation labels", windows.len(), labels.len()));
    }
    if windows.is_empty() {
        return Err(LomError::config("nothing to evaluate"));
    }
    let wrong = windows
        .par_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (w, &label))| {
            let key = DrawKey {
                seed,
                phase: Phase::Eval,
                example: i as u64,
            };
            Ok(usize::from(net.predict(w, key)?.digit != usize::from(label)))
        })
        .sum::<Result<usize>>()?;
    Ok(wrong as f64 / windows.len() as f64)
}

pub fn check_geometry(input: &InputConfig, topology: &TopologyConfig, rows: usize, cols: usize) -> Result<()> {
    input.validate()?;
    let (r, c) = (input.geometry.positions(rows), input.geometry.positions(cols));
    if (r, c) != (topology.grid_rows, topology.grid_cols) {
        return Err(LomError::config(format!(
            "{rows}x{cols} images give {r}x{c} windows but the grid is {}x{}",
            topology.grid_rows, topology.grid_cols
        )));
    }
    if input.selection.len() != topology.window_bits {
        return Err(LomError::dim(
            "selection pattern",
            topology.window_bits,
            input.selection.len(),
        ));
    }
    Ok(())
}

/// Runs the protocol on a fresh network. `observer` sees each record as soon as it exists.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    input: &InputConfig,
    topology: &TopologyConfig,
    seed: u64,
    data: &Dataset,
    mut observer: impl FnMut(&BinRecord),
) -> Result<ExperimentResult> {
    check_geometry(input, topology, data.train_images.rows, data.train_images.cols)?;
    check_geometry(input, topology, data.test_images.rows, data.test_images.cols)?;
    let needed = cfg.bins * cfg.bin_size;
    if needed > data.train_images.len() {
        return Err(LomError::OutOfRange {
            what: "training images requested",
            value: needed,
            limit: data.train_images.len(),
        });
    }
    let n_test = cfg
        .test_limit
        .map_or(data.test_images.len(), |n| n.min(data.test_images.len()));
    let test_windows = extract_all(input, &data.test_images.truncated(n_test));
    let test_labels = &data.test_labels[..n_test];

    let mut net = Network::build(topology.clone())?;
    let mut records = Vec::with_capacity(cfg.bins);
    let (rows, cols) = (data.train_images.rows, data.train_images.cols);
    for bin in 0..cfg.bins {
        for i in bin * cfg.bin_size..(bin + 1) * cfg.bin_size {
            let windows = input.windows(data.train_images.image(i), rows, cols);
            let key = DrawKey {
                seed,
                phase: Phase::Train,
                example: i as u64,
            };
            net.train_example(&windows, data.train_labels[i], key)?;
        }
        let record = BinRecord {
            bin_index: bin + 1,
            images_seen: (bin + 1) * cfg.bin_size,
            error_rate: evaluate(&net, &test_windows, test_labels, seed)?,
        };
        observer(&record);
        records.push(record);
    }
    Ok(ExperimentResult { records, network: net })
}

pub fn metrics_csv(records: &[BinRecord]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{},{},{:.4}", r.bin_index, r.images_seen, r.error_rate);
    }
    out
}

/// Replaces `path` with the CSV for `records` in one rename.
pub fn write_metrics(path: impl AsRef<Path>, records: &[BinRecord]) -> Result<()> {
    write_atomic(path.as_ref(), metrics_csv(records).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let records = [
            BinRecord {
                bin_index: 1,
                images_seen: 2000,
                error_rate: 0.37125,
            },
            BinRecord {
                bin_index: 2,
                images_seen: 4000,
                error_rate: 0.1,
            },
        ];
        assert_eq!(
            metrics_csv(&records),
            "bin_index,images_seen,error_rate\n1,2000,0.3713\n2,4000,0.1000\n"
        );
    }

    #[test]
    fn atomic_metrics_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        write_metrics(&path, &[]).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "bin_index,images_seen,error_rate\n"
        );
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn geometry_mismatch_is_reported() {
        let topo = TopologyConfig {
            grid_rows: 20,
            grid_cols: 20,
            ..TopologyConfig::default()
        };
        assert!(check_geometry(&InputConfig::default(), &topo, 28, 28).is_err());
        assert!(check_geometry(&InputConfig::default(), &TopologyConfig::default(), 28, 28).is_ok());
    }
}
