use serde::{Deserialize, Serialize};

use super::{run_experiment, ExperimentConfig, ExperimentResult, SCHEMA_VERSION};
use crate::error::Result;
use crate::training::PhaseMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Variation(Vec<f64>),
    Phases(Vec<PhaseMode>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Variation(_) => "variation",
            SweepAxis::Phases(_) => "phases",
        }
    }

    fn configs(&self, template: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
        match self {
            SweepAxis::Variation(levels) => levels
                .iter()
                .map(|&v| (v.to_string(), ExperimentConfig { variation: v, ..template.clone() }))
                .collect(),
            SweepAxis::Phases(modes) => modes
                .iter()
                .map(|&m| (m.to_string(), ExperimentConfig { phases: Some(m), ..template.clone() }))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    pub mean_test_error: f64,
    pub std_test_error: f64,
    pub mean_train_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub schema_version: u32,
    pub axis: String,
    pub template: ExperimentConfig,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub table: SweepTable,
    pub points: Vec<ExperimentResult>,
}

/// One experiment per axis value, all with the template's seed. Every point
/// is validated before any of them runs.
pub fn sweep(template: &ExperimentConfig, axis: &SweepAxis) -> Result<SweepResult> {
    let configs = axis.configs(template);
    for (_, cfg) in &configs {
        cfg.plan()?;
    }
    let mut rows = Vec::with_capacity(configs.len());
    let mut points = Vec::with_capacity(configs.len());
    for (value, cfg) in configs {
        let res = run_experiment(&cfg)?;
        rows.push(SweepRow {
            value,
            mean_test_error: res.summary.mean_test_error,
            std_test_error: res.summary.std_test_error,
            mean_train_mse: res.summary.mean_train_mse,
        });
        points.push(res);
    }
    Ok(SweepResult {
        table: SweepTable {
            schema_version: SCHEMA_VERSION,
            axis: axis.name().to_string(),
            template: template.clone(),
            rows,
        },
        points,
    })
}
