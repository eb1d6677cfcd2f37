//! Line-delimited metrics stream. One JSON record per line, tagged by
//! `type`, so any plotting tool can consume the file without bespoke
//! parsing. Training records appear once per logging interval; diagnostic
//! records are appended by `pinn diagnose`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use pinn_core::train::MetricsSnapshot;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Metrics {
        window: usize,
        step: u64,
        l_ic: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        l_bc: Option<f64>,
        l_r: f64,
        total: f64,
        lambda_ic: f64,
        lambda_bc: f64,
        lambda_r: f64,
        w_min: f64,
        w_mean: f64,
        lr: f64,
        wall_clock_s: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        rel_l2: Option<f64>,
    },
    Summary {
        seed: u64,
        steps: u64,
        final_loss: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        rel_l2: Option<f64>,
        runtime_s: f64,
    },
    NtkSpectrum {
        term: String,
        batch: usize,
        eigenvalues: Vec<f64>,
    },
    GradHistogram {
        term: String,
        counts: Vec<u64>,
        norm: f64,
        max_abs: f64,
        total: u64,
    },
    TemporalProfile {
        chunks: usize,
        losses: Vec<f64>,
    },
}

impl Record {
    pub fn from_snapshot(window: usize, m: &MetricsSnapshot, rel_l2: Option<f64>) -> Record {
        Record::Metrics {
            window,
            step: m.step,
            l_ic: m.l_ic,
            l_bc: m.l_bc,
            l_r: m.l_r,
            total: m.total,
            lambda_ic: m.lambda_ic,
            lambda_bc: m.lambda_bc,
            lambda_r: m.lambda_r,
            w_min: m.w_min,
            w_mean: m.w_mean,
            lr: m.lr,
            wall_clock_s: m.elapsed_s,
            rel_l2,
        }
    }
}

/// Append-only JSONL writer; `None` path discards records.
pub struct MetricsWriter {
    file: Option<std::fs::File>,
}

impl MetricsWriter {
    pub fn create(path: Option<&Path>) -> anyhow::Result<MetricsWriter> {
        let file = match path {
            Some(p) => {
                if let Some(parent) = p.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                Some(std::fs::File::create(p)?)
            }
            None => None,
        };
        Ok(MetricsWriter { file })
    }

    pub fn append(path: &Path) -> anyhow::Result<MetricsWriter> {
        let file = std::fs::OpenOptions::new().append(true).open(path)?;
        Ok(MetricsWriter { file: Some(file) })
    }

    pub fn write(&mut self, record: &Record) -> anyhow::Result<()> {
        if let Some(f) = &mut self.file {
            serde_json::to_writer(&mut *f, record)?;
            f.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Parse a metrics stream back (used by tests and the ablation table).
pub fn read_records(path: &Path) -> anyhow::Result<Vec<Record>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
