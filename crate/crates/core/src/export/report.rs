// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_err, read_json, to_json_bytes, ExportError};
use crate::domain::ConceptDictionary;
use crate::metrics::AnalysisResult;
use crate::robustness::{AblationReport, SubsampleReport};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Structured,
    Tabular,
}

impl ReportFormat {
    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Structured => "report.json",
            ReportFormat::Tabular => "report.csv",
        }
    }
}

/// The full analysis plus concept labels; undefined values are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredReport {
    pub format_version: u32,
    pub sae_id: String,
    pub model_id: String,
    pub generated_at: String,
    /// Aligned with `analysis.concepts`.
    pub labels: Vec<String>,
    pub analysis: AnalysisResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<SubsampleReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationReport>,
}

impl StructuredReport {
    pub fn new(
        dictionary: &ConceptDictionary,
        analysis: AnalysisResult,
        generated_at: impl Into<String>,
    ) -> Result<Self, ExportError> {
        if analysis.concepts.len() != dictionary.len()
            || analysis.concepts.iter().zip(dictionary.concepts()).any(|(a, c)| *a != c.id)
        {
            return Err(ExportError::Mismatch("concept ids differ from the dictionary".into()));
        }
        Ok(Self {
            format_version: REPORT_FORMAT_VERSION,
            sae_id: dictionary.sae_id().to_string(),
            model_id: dictionary.model_id().to_string(),
            generated_at: generated_at.into(),
            labels: dictionary.concepts().iter().map(|c| c.label.clone()).collect(),
            analysis,
            subsample: None,
            ablation: None,
        })
    }

    pub fn with_subsample(mut self, report: SubsampleReport) -> Self {
        self.subsample = Some(report);
        self
    }

    pub fn with_ablation(mut self, report: AblationReport) -> Self {
        self.ablation = Some(report);
        self
    }
}

pub fn write_structured<W: Write>(mut w: W, report: &StructuredReport) -> std::io::Result<()> {
    w.write_all(&to_json_bytes(report))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per concept: id, label, cross-benchmark values, class, gap flag,
/// then `chi_bench:<name>` and `chi_model:<name>` for every benchmark.
pub fn write_tabular<W: Write>(w: W, report: &StructuredReport) -> Result<(), ExportError> {
    let a = &report.analysis;
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let mut header: Vec<String> = ["id", "label", "x_bench", "x_model", "class", "model_gap"]
        .map(String::from)
        .to_vec();
    header.extend(a.benchmarks.iter().map(|b| format!("chi_bench:{b}")));
    header.extend(a.benchmarks.iter().map(|b| format!("chi_model:{b}")));
    out.write_record(&header)?;
    for (i, &id) in a.concepts.iter().enumerate() {
        let mut row = vec![
            id.to_string(),
            report.labels[i].clone(),
            a.cross_coverage[i].to_string(),
            cell(a.cross_performance[i]),
            a.coverage_class[i].as_str().to_string(),
            a.model_gaps.contains(&id).to_string(),
        ];
        row.extend(a.per_benchmark_coverage.iter().map(|col| col[i].to_string()));
        row.extend(a.per_benchmark_performance.iter().map(|col| cell(col[i])));
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| ExportError::Csv(e.into()))?;
    Ok(())
}

/// Writes `report.json` or `report.csv` into `dir` and returns the path.
pub fn export_report(dir: &Path, report: &StructuredReport, format: ReportFormat) -> Result<PathBuf, ExportError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(format.file_name());
    let mut buf = Vec::new();
    match format {
        ReportFormat::Structured => write_structured(&mut buf, report).map_err(io_err(&path))?,
        ReportFormat::Tabular => write_tabular(&mut buf, report)?,
    }
    std::fs::write(&path, buf).map_err(io_err(&path))?;
    Ok(path)
}

pub fn read_structured_report(path: &Path) -> Result<StructuredReport, ExportError> {
    let report: StructuredReport = read_json(path)?;
    if report.format_version != REPORT_FORMAT_VERSION {
        return Err(ExportError::UnsupportedVersion {
            path: path.to_path_buf(),
            found: report.format_version,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_suite, ActivationRecord, AnalysisConfig, Concept, Provenance, SparseActivations};
    use crate::metrics::analyze;

    fn report() -> StructuredReport {
        let dict = ConceptDictionary::new(
            "sae",
            "model",
            vec![
                Concept { id: 0, label: "alpha".into() },
                Concept { id: 1, label: "beta, with comma".into() },
                Concept { id: 2, label: "never active".into() },
            ],
        )
        .unwrap();
        let rec = |b: &str, d: &str, s: f64, a: &[(u32, f64)]| ActivationRecord {
            benchmark: b.into(),
            datapoint_id: d.into(),
            token_count: 2,
            score: Some(s),
            provenance: Provenance::PromptOnly,
            activations: SparseActivations::from_pairs(a.iter().copied()),
        };
        let records = vec![
            rec("x", "1", 1.0, &[(0, 2.0), (1, 1.0)]),
            rec("x", "2", 0.0, &[(0, 1.0)]),
            rec("y", "1", 0.5, &[(1, 4.0)]),
        ];
        let config = AnalysisConfig::default();
        let suite = build_suite(dict.clone(), records, &config).unwrap();
        StructuredReport::new(&dict, analyze(&suite, &config).unwrap(), "2026-01-01T00:00:00Z").unwrap()
    }

    #[test]
    fn undefined_is_null_and_empty_cell() {
        let r = report();
        let mut json = Vec::new();
        write_structured(&mut json, &r).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert!(v["analysis"]["cross_performance"][2].is_null());
        assert!(v["analysis"]["per_benchmark_performance"][1][0].is_null());

        let mut csv_bytes = Vec::new();
        write_tabular(&mut csv_bytes, &r).unwrap();
        let text = String::from_utf8(csv_bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "id,label,x_bench,x_model,class,model_gap,chi_bench:x,chi_bench:y,chi_model:x,chi_model:y"
        );
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("1,\"beta, with comma\","));
        assert!(lines[3].starts_with("2,never active,0,,missing,false,0,0,,"));
    }

    #[test]
    fn structured_round_trip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let r = report();
        let p1 = export_report(dir.path(), &r, ReportFormat::Structured).unwrap();
        let first = std::fs::read(&p1).unwrap();
        export_report(dir.path(), &r, ReportFormat::Structured).unwrap();
        assert_eq!(first, std::fs::read(&p1).unwrap());
        assert_eq!(read_structured_report(&p1).unwrap(), r);

        let p2 = export_report(dir.path(), &r, ReportFormat::Tabular).unwrap();
        let first = std::fs::read(&p2).unwrap();
        export_report(dir.path(), &r, ReportFormat::Tabular).unwrap();
        assert_eq!(first, std::fs::read(&p2).unwrap());
    }

    #[test]
    fn mismatched_dictionary() {
        let r = report();
        let other = ConceptDictionary::new("sae", "model", vec![Concept { id: 9, label: "z".into() }]).unwrap();
        assert!(matches!(
            StructuredReport::new(&other, r.analysis, "t"),
            Err(ExportError::Mismatch(_))
        ));
    }
}
