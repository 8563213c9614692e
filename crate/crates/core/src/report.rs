//! Evaluation report: per-gate, per-model score summaries over the test
//! folds, serializable to JSON and renderable as "mean (std)" tables with
//! rows of score x gate and one column per model.

use crate::evaluate::ModelKind;
use crate::types::Gate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Mean and standard deviation of a score over the test folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population statistics of the per-fold values.
    pub fn from_values(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "no fold values to aggregate");
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }

    pub fn render(&self) -> String {
        format!("{:.2} ({:.2})", self.mean, self.std)
    }
}

/// Interval-score and coverage summary for one central interval width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    /// Nominal central width in percent (e.g. 80 for the 80% interval).
    pub width_pct: u32,
    /// Interval score in percent of installed capacity.
    pub score: MeanStd,
    /// Empirical coverage in [0, 1].
    pub coverage: MeanStd,
}

/// Scores of one model at one gate, aggregated over the test folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub model: ModelKind,
    /// Percent of installed capacity.
    pub nmae: MeanStd,
    pub nrmse: MeanStd,
    pub crps: MeanStd,
    pub interval_scores: Vec<IntervalSummary>,
    /// Fold-averaged CRPS per horizon step, percent of capacity.
    pub crps_per_step: Vec<(usize, f64)>,
    /// Number of evaluated (sample, step) pairs across the test folds.
    pub evaluated_pairs: usize,
}

/// All models evaluated at one gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateScores {
    pub gate: Gate,
    pub test_folds: usize,
    pub models: Vec<ModelScores>,
}

/// Metadata stamped into every output artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub config_hash: String,
    pub dataset_fingerprint: String,
    pub versions: BTreeMap<String, String>,
}

impl RunMeta {
    pub fn new(seed: u64, config_hash: String, dataset_fingerprint: String) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert(
            env!("CARGO_PKG_NAME").to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        );
        Self {
            seed,
            config_hash,
            dataset_fingerprint,
            versions,
        }
    }
}

/// The full evaluation report. Deliberately excludes wall-clock measurements
/// so that identical configurations reproduce identical bytes; timings are
/// reported separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub meta: RunMeta,
    pub capacity_kw: f64,
    pub levels: Vec<f64>,
    pub fold_pairs: usize,
    pub tuning_pair_index: usize,
    pub gates: Vec<GateScores>,
}

/// Wall-clock training-time summary, kept out of the deterministic report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub meta: RunMeta,
    /// Seconds per (gate, model), aggregated over folds.
    pub train_seconds: Vec<(Gate, ModelKind, MeanStd)>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    fn model_order(&self) -> Vec<ModelKind> {
        let mut out = Vec::new();
        for gate in &self.gates {
            for m in &gate.models {
                if !out.contains(&m.model) {
                    out.push(m.model);
                }
            }
        }
        out
    }

    fn cell(&self, gate: &GateScores, model: ModelKind, pick: impl Fn(&ModelScores) -> Option<MeanStd>) -> String {
        gate.models
            .iter()
            .find(|m| m.model == model)
            .and_then(&pick)
            .map(|ms| ms.render())
            .unwrap_or_else(|| "-".to_string())
    }

    /// Aligned human-readable tables: point scores, CRPS, then interval
    /// scores per central width.
    pub fn render_tables(&self) -> String {
        let models = self.model_order();
        let mut widths: Vec<u32> = self
            .gates
            .iter()
            .flat_map(|g| g.models.iter())
            .flat_map(|m| m.interval_scores.iter().map(|i| i.width_pct))
            .collect();
        widths.sort_unstable();
        widths.dedup();
        widths.reverse();

        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["score".to_string(), "gate".to_string()];
        header.extend(models.iter().map(|m| m.name().to_string()));
        rows.push(header);

        for score in ["NMAE", "NRMSE", "CRPS"] {
            for gate in &self.gates {
                let mut row = vec![score.to_string(), gate.gate.name().to_string()];
                for &m in &models {
                    row.push(self.cell(gate, m, |s| {
                        Some(match score {
                            "NMAE" => s.nmae,
                            "NRMSE" => s.nrmse,
                            _ => s.crps,
                        })
                    }));
                }
                rows.push(row);
            }
        }
        for &w in &widths {
            for gate in &self.gates {
                let mut row = vec![format!("IS{w}"), gate.gate.name().to_string()];
                for &m in &models {
                    row.push(self.cell(gate, m, |s| {
                        s.interval_scores
                            .iter()
                            .find(|i| i.width_pct == w)
                            .map(|i| i.score)
                    }));
                }
                rows.push(row);
            }
        }

        let ncols = rows[0].len();
        let mut col_width = vec![0usize; ncols];
        for row in &rows {
            for (c, cell) in row.iter().enumerate() {
                col_width[c] = col_width[c].max(cell.len());
            }
        }
        let mut out = String::new();
        out.push_str(&format!(
            "# scores in percent of installed capacity ({:.1} kW), {} test folds, cells are mean (std)\n",
            self.capacity_kw,
            self.gates.first().map(|g| g.test_folds).unwrap_or(0),
        ));
        for row in &rows {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| format!("{:<width$}", cell, width = col_width[c]))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    /// Same table shape as comma-separated values.
    pub fn render_csv(&self) -> String {
        let models = self.model_order();
        let mut out = String::new();
        out.push_str("score,gate");
        for m in &models {
            out.push(',');
            out.push_str(m.name());
        }
        out.push('\n');
        let mut push_rows = |score: &str, pick: &dyn Fn(&ModelScores) -> Option<MeanStd>| {
            for gate in &self.gates {
                out.push_str(&format!("{},{}", score, gate.gate.name()));
                for &m in &models {
                    out.push(',');
                    out.push_str(&format!("\"{}\"", self.cell(gate, m, pick)));
                }
                out.push('\n');
            }
        };
        push_rows("NMAE", &|s| Some(s.nmae));
        push_rows("NRMSE", &|s| Some(s.nrmse));
        push_rows("CRPS", &|s| Some(s.crps));
        let mut widths: Vec<u32> = self
            .gates
            .iter()
            .flat_map(|g| g.models.iter())
            .flat_map(|m| m.interval_scores.iter().map(|i| i.width_pct))
            .collect();
        widths.sort_unstable();
        widths.dedup();
        widths.reverse();
        for w in widths {
            push_rows(&format!("IS{w}"), &|s| {
                s.interval_scores
                    .iter()
                    .find(|i| i.width_pct == w)
                    .map(|i| i.score)
            });
        }
        out
    }

    /// Per-step CRPS curves as CSV rows `gate,model,k,crps_pct`.
    pub fn render_crps_curves(&self) -> String {
        let mut out = String::from("gate,model,k,crps_pct\n");
        for gate in &self.gates {
            for m in &gate.models {
                for &(k, v) in &m.crps_per_step {
                    out.push_str(&format!("{},{},{},{:.6}\n", gate.gate.name(), m.model.name(), k, v));
                }
            }
        }
        out
    }
}

/// FNV-1a 64-bit fingerprint, rendered as hex. Identification only.
pub fn fnv1a64(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_population_statistics() {
        let ms = MeanStd::from_values(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert!((ms.mean - 5.0).abs() < 1e-12);
        assert!((ms.std - 2.0).abs() < 1e-12);
        assert_eq!(ms.render(), "5.00 (2.00)");
    }

    #[test]
    fn fingerprint_is_stable() {
        assert_eq!(fnv1a64(b""), "cbf29ce484222325");
        assert_eq!(fnv1a64(b"a"), fnv1a64(b"a"));
        assert_ne!(fnv1a64(b"a"), fnv1a64(b"b"));
    }

    #[test]
    fn tables_have_one_row_per_score_gate_and_one_column_per_model() {
        let meta = RunMeta::new(7, "cfg".into(), "ds".into());
        let ms = MeanStd { mean: 1.0, std: 0.5 };
        let scores = |model| ModelScores {
            model,
            nmae: ms,
            nrmse: ms,
            crps: ms,
            interval_scores: vec![IntervalSummary {
                width_pct: 80,
                score: ms,
                coverage: ms,
            }],
            crps_per_step: vec![(24, 1.0)],
            evaluated_pairs: 10,
        };
        let report = EvalReport {
            meta,
            capacity_kw: 466.4,
            levels: vec![0.5],
            fold_pairs: 11,
            tuning_pair_index: 0,
            gates: vec![GateScores {
                gate: Gate::Intra06,
                test_folds: 10,
                models: vec![scores(ModelKind::Mlp), scores(ModelKind::Ed1)],
            }],
        };
        let table = report.render_tables();
        // header + NMAE + NRMSE + CRPS + IS80
        assert_eq!(table.lines().count(), 1 + 5);
        assert!(table.contains("mlp"));
        assert!(table.contains("ed1"));
        assert!(table.contains("1.00 (0.50)"));
        let csv = report.render_csv();
        assert!(csv.starts_with("score,gate,mlp,ed1"));
        assert!(csv.contains("\"1.00 (0.50)\""));
        let roundtrip = EvalReport::from_json(&report.to_json()).unwrap();
        assert_eq!(roundtrip, report);
    }
}
