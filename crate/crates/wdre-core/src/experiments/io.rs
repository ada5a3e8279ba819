//! CSV and JSON output.
//!
//! Each study writes one CSV whose header names the record fields, plus a
//! JSON summary carrying the config echo and the pass/fail of every
//! embedded assertion. Output is byte-identical across runs of the same
//! config: floats serialize through the shortest round-trip form.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use super::{AssertionOutcome, ExperimentConfig, ExperimentError};

/// Writes one record per row, preceded by a header row naming the record
/// fields.
pub fn write_records_csv<R: Serialize>(
    path: &Path,
    records: &[R],
) -> Result<(), ExperimentError> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for record in records {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

/// What a study run left behind: which study, under what config, how many
/// work items failed, and whether each embedded claim held.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub failures: usize,
    pub assertions: Vec<AssertionOutcome>,
}

impl ExperimentSummary {
    pub fn new(
        experiment: &str,
        config: &ExperimentConfig,
        failures: usize,
        assertions: Vec<AssertionOutcome>,
    ) -> Self {
        ExperimentSummary {
            experiment: experiment.to_owned(),
            config: config.clone(),
            failures,
            assertions,
        }
    }

    /// True when every embedded assertion held.
    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }
}

/// Writes the summary as pretty-printed JSON.
pub fn write_summary_json(
    path: &Path,
    summary: &ExperimentSummary,
) -> Result<(), ExperimentError> {
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(file, summary)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::SweepRecord;
    use super::*;

    fn sample_records() -> Vec<SweepRecord> {
        vec![
            SweepRecord {
                rho_w: 1.0,
                value_maxmin: 2.0,
                value_minmax: 2.0,
                value_worstcase_of_maxmin_estimator: 2.0,
                saddle_exists: true,
                nsc_margin: -0.5,
            },
            SweepRecord {
                rho_w: 1.5,
                value_maxmin: 2.25,
                value_minmax: 2.5,
                value_worstcase_of_maxmin_estimator: 2.75,
                saddle_exists: false,
                nsc_margin: 0.125,
            },
        ]
    }

    #[test]
    fn csv_header_names_the_record_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        write_records_csv(&path, &sample_records()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "rho_w,value_maxmin,value_minmax,value_worstcase_of_maxmin_estimator,\
             saddle_exists,nsc_margin"
        );
        assert_eq!(lines.next().unwrap(), "1.0,2.0,2.0,2.0,true,-0.5");
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn csv_output_is_byte_identical_across_runs() {
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("a.csv");
        let second = dir.path().join("b.csv");
        write_records_csv(&first, &sample_records()).unwrap();
        write_records_csv(&second, &sample_records()).unwrap();
        assert_eq!(
            std::fs::read(&first).unwrap(),
            std::fs::read(&second).unwrap()
        );
    }

    #[test]
    fn summary_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.json");
        let summary = ExperimentSummary::new(
            "sweep",
            &ExperimentConfig::default(),
            0,
            vec![AssertionOutcome {
                name: "demo".into(),
                pass: true,
                detail: "held".into(),
            }],
        );
        assert!(summary.all_passed());
        write_summary_json(&path, &summary).unwrap();
        let value: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(value["experiment"], "sweep");
        assert_eq!(value["config"]["dim"], 5);
        assert_eq!(value["config"]["seed"], 42);
        assert_eq!(value["assertions"][0]["pass"], true);
    }
}
