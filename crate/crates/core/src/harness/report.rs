use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{pearson_correlation, QuantileSummary};
use crate::morphometrics::minkowski_report;
use crate::network::{
    extract_network, network_stats, simulate_permeability, Domain, ExtractionParams, FlowAxis, FlowConfig,
};
use crate::volume::VoxelVolume;

/// Column order of the property table.
pub const PROPERTY_COLUMNS: [&str; 6] = ["phi", "k_mD", "euler_chi", "specific_area", "mean_pore_d", "mean_throat_d"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub id: String,
    /// Values in [`PROPERTY_COLUMNS`] order; `None` where the computation failed.
    pub values: [Option<f64>; 6],
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertySummary {
    pub property: String,
    pub summary: Option<QuantileSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub columns: Vec<String>,
    pub rows: Vec<SampleRow>,
    pub quantiles: Vec<PropertySummary>,
    /// Pairwise-complete Pearson correlations; `None` where undefined.
    pub correlation_matrix: Vec<Vec<Option<f64>>>,
    /// Set when the population is too small to correlate.
    pub correlation_error: Option<String>,
}

fn measure(vol: &VoxelVolume, axis: FlowAxis) -> ([Option<f64>; 6], Vec<String>) {
    let mut values = [None; 6];
    let mut failures = Vec::new();
    match minkowski_report(vol) {
        Ok(m) => {
            values[0] = Some(m.phi);
            values[2] = Some(m.euler_chi as f64);
            values[3] = Some(m.specific_area_per_m);
        }
        Err(e) => failures.push(format!("morphometrics: {e}")),
    }
    let params = ExtractionParams {
        axis,
        ..ExtractionParams::default()
    };
    match extract_network(vol, &params) {
        Ok(net) => {
            match network_stats(&net) {
                Ok(s) => {
                    values[4] = Some(s.mean_pore_diameter);
                    values[5] = s.mean_throat_diameter;
                    if s.mean_throat_diameter.is_none() {
                        failures.push("mean_throat_d: network has no throats".into());
                    }
                }
                Err(e) => failures.push(format!("network stats: {e}")),
            }
            let flow = FlowConfig {
                axis,
                ..FlowConfig::default()
            };
            match simulate_permeability(&net, &flow, Domain::from_volume(vol, axis)) {
                Ok(r) => values[1] = Some(r.k_md),
                Err(e) => failures.push(format!("k_mD: {e}")),
            }
        }
        Err(e) => failures.push(format!("network: {e}")),
    }
    (values, failures)
}

/// Measures every sample (in parallel on the current rayon pool) and builds
/// the summary tables. Rows keep the input order.
pub fn evaluate_population(samples: &[(String, VoxelVolume)], axis: FlowAxis) -> EvaluationReport {
    let rows: Vec<SampleRow> = samples
        .par_iter()
        .map(|(id, vol)| {
            let (values, failures) = measure(vol, axis);
            SampleRow {
                id: id.clone(),
                values,
                failures,
            }
        })
        .collect();
    report_from_rows(rows)
}

pub fn report_from_rows(rows: Vec<SampleRow>) -> EvaluationReport {
    let col = |j: usize| -> Vec<f64> { rows.iter().filter_map(|r| r.values[j]).collect() };
    let quantiles = PROPERTY_COLUMNS
        .iter()
        .enumerate()
        .map(|(j, name)| PropertySummary {
            property: name.to_string(),
            summary: QuantileSummary::of(&col(j)),
        })
        .collect();

    let m = PROPERTY_COLUMNS.len();
    let mut matrix = vec![vec![None; m]; m];
    let correlation_error = if rows.len() < 2 {
        Some(format!("length mismatch: need at least 2 samples, have {}", rows.len()))
    } else {
        for i in 0..m {
            for j in i..m {
                let (x, y): (Vec<f64>, Vec<f64>) = rows
                    .iter()
                    .filter_map(|r| Some((r.values[i]?, r.values[j]?)))
                    .unzip();
                let r = pearson_correlation(&x, &y).ok().flatten();
                let r = if i == j { r.map(|_| 1.0) } else { r };
                matrix[i][j] = r;
                matrix[j][i] = r;
            }
        }
        None
    };
    EvaluationReport {
        columns: PROPERTY_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows,
        quantiles,
        correlation_matrix: matrix,
        correlation_error,
    }
}

impl EvaluationReport {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = PROPERTY_COLUMNS.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r.values[j]).collect())
    }

    /// Header plus one line per sample; missing values are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id");
        for c in PROPERTY_COLUMNS {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.id);
            for v in &r.values {
                out.push(',');
                if let Some(v) = v {
                    write!(out, "{v:e}").unwrap();
                }
            }
            out.push('\n');
        }
        out
    }
}
