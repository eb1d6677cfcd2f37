//! Ablation harness: run the base configuration, each single-component-off
//! variant, and the all-off row, then emit a machine-readable table.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Toggle};
use crate::runner;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    /// Component states for this row, in toggle order.
    pub settings: Vec<(String, bool)>,
    pub rel_l2: Option<f64>,
    pub final_loss: Option<f64>,
    pub runtime_s: f64,
    /// Timings are comparable only when rows run sequentially.
    pub timing_reliable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationTable {
    pub toggles: Vec<String>,
    pub rows: Vec<AblationRow>,
}

/// Row order is stable across reruns: base first, then one row per toggle,
/// then the all-off row when at least one toggle is given.
pub fn plan_rows(base: &RunConfig, toggles: &[Toggle]) -> Vec<(String, RunConfig)> {
    let mut rows = vec![("full".to_string(), base.clone())];
    for t in toggles {
        rows.push((format!("no_{}", t.label()), t.disable(base)));
    }
    if !toggles.is_empty() {
        let mut plain = base.clone();
        for t in toggles {
            plain = t.disable(&plain);
        }
        rows.push(("plain".to_string(), plain));
    }
    rows
}

pub fn run_ablation(
    base: &RunConfig,
    toggles: &[Toggle],
    parallel: bool,
    out_dir: Option<&Path>,
) -> anyhow::Result<AblationTable> {
    let rows = plan_rows(base, toggles);
    let run_row = |label: &str, cfg: &RunConfig| -> AblationRow {
        let row_dir = out_dir.map(|d| d.join("rows").join(label));
        let t0 = std::time::Instant::now();
        let settings = toggles
            .iter()
            .map(|t| (t.label().to_string(), t.active_in(cfg)))
            .collect();
        match runner::run(cfg, row_dir.as_deref()) {
            Ok(outcome) => AblationRow {
                label: label.to_string(),
                settings,
                rel_l2: outcome.rel_l2,
                final_loss: Some(outcome.final_loss),
                runtime_s: outcome.runtime_s,
                timing_reliable: !parallel,
                error: None,
            },
            Err(e) => AblationRow {
                label: label.to_string(),
                settings,
                rel_l2: None,
                final_loss: None,
                runtime_s: t0.elapsed().as_secs_f64(),
                timing_reliable: !parallel,
                error: Some(e.to_string()),
            },
        }
    };

    let results: Vec<AblationRow> = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = rows
                .iter()
                .map(|(label, cfg)| s.spawn(move || run_row(label, cfg)))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        })
    } else {
        rows.iter().map(|(label, cfg)| run_row(label, cfg)).collect()
    };

    let table = AblationTable {
        toggles: toggles.iter().map(|t| t.label().to_string()).collect(),
        rows: results,
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("ablation.json"), serde_json::to_string_pretty(&table)?)?;
    }
    Ok(table)
}

pub fn format_table(table: &AblationTable) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<16}", "row"));
    for t in &table.toggles {
        out.push_str(&format!("{:<14}", t));
    }
    out.push_str(&format!("{:<12}{:<12}\n", "rel_l2", "time_s"));
    for row in &table.rows {
        out.push_str(&format!("{:<16}", row.label));
        for (_, on) in &row.settings {
            out.push_str(&format!("{:<14}", if *on { "on" } else { "off" }));
        }
        match (row.rel_l2, &row.error) {
            (Some(r), _) => out.push_str(&format!("{:<12.3e}", r)),
            (None, Some(_)) => out.push_str(&format!("{:<12}", "FAILED")),
            (None, None) => out.push_str(&format!("{:<12}", "-")),
        }
        out.push_str(&format!("{:<12.1}\n", row.runtime_s));
    }
    out
}
