//! Per-domain scoring, the source-only vs adapted comparison, and the report
//! files consumed by external plotting.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blob;
use crate::dataset::{load_eval_labels, DamageClass, DatasetBundle, DomainDataset, Split, TargetLabels};
use crate::error::{Error, Result};
use crate::net::{extract, predict, NetworkConfig, ParameterStore, N_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub domain: String,
    pub n: usize,
    pub accuracy: f64,
    /// Rows are true classes, columns predicted classes.
    pub confusion: [[usize; N_CLASSES]; N_CLASSES],
    pub macro_f1: f64,
    /// True-class counts.
    pub class_counts: [usize; N_CLASSES],
}

impl EvalReport {
    pub fn from_predictions(domain: &str, truth: &[DamageClass], predicted: &[DamageClass]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::invalid("truth and predictions must align"));
        }
        if truth.is_empty() {
            return Err(Error::invalid(format!("{domain}: nothing to evaluate")));
        }
        let mut confusion = [[0usize; N_CLASSES]; N_CLASSES];
        for (t, p) in truth.iter().zip(predicted) {
            confusion[t.index()][p.index()] += 1;
        }
        let n = truth.len();
        let trace: usize = (0..N_CLASSES).map(|k| confusion[k][k]).sum();
        let class_counts = confusion.map(|row| row.iter().sum());
        // undefined precision or recall counts as zero
        let f1 = |k: usize| {
            let tp = confusion[k][k] as f64;
            let predicted_k: usize = (0..N_CLASSES).map(|r| confusion[r][k]).sum();
            let denom = predicted_k as f64 + class_counts[k] as f64;
            if denom == 0.0 {
                0.0
            } else {
                2.0 * tp / denom
            }
        };
        Ok(Self {
            domain: domain.into(),
            n,
            accuracy: trace as f64 / n as f64,
            confusion,
            macro_f1: (0..N_CLASSES).map(f1).sum::<f64>() / N_CLASSES as f64,
            class_counts,
        })
    }
}

/// Argmax class of every sample; ties go to the lower class.
pub fn predict_classes(network: &NetworkConfig, params: &ParameterStore, xs: &[&[f32]]) -> Result<Vec<DamageClass>> {
    xs.iter()
        .map(|x| {
            let z = extract(network, &params.theta, x)?;
            Ok(predict(&params.phi, &z)?.argmax())
        })
        .collect()
}

/// Scores every sample of a labeled dataset.
pub fn evaluate(network: &NetworkConfig, params: &ParameterStore, dataset: &DomainDataset) -> Result<EvalReport> {
    let labels = dataset
        .labels
        .as_ref()
        .ok_or_else(|| Error::invalid(format!("{} is unlabeled", dataset.domain_id)))?;
    let xs: Vec<&[f32]> = (0..dataset.len()).map(|i| dataset.x(i)).collect();
    EvalReport::from_predictions(&dataset.domain_id, labels, &predict_classes(network, params, &xs)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEval {
    pub model: String,
    /// Test splits of all sources pooled.
    pub source: EvalReport,
    pub per_source: Vec<EvalReport>,
    pub target: EvalReport,
}

/// Scores one model on the source test splits and the whole target.
pub fn evaluate_model(
    model: &str,
    network: &NetworkConfig,
    params: &ParameterStore,
    bundle: &DatasetBundle,
    target_labels: &TargetLabels,
) -> Result<ModelEval> {
    if target_labels.domain_id != bundle.target.domain_id || target_labels.labels.len() != bundle.target.len() {
        return Err(Error::invalid(format!(
            "evaluation labels for {} do not match target {}",
            target_labels.domain_id, bundle.target.domain_id
        )));
    }
    let mut per_source = Vec::new();
    let (mut truth, mut pred) = (Vec::new(), Vec::new());
    for s in &bundle.sources {
        let test = s.subset(&s.indices(Split::Test));
        let r = evaluate(network, params, &test)?;
        let xs: Vec<&[f32]> = (0..test.len()).map(|i| test.x(i)).collect();
        truth.extend(test.labels.as_deref().unwrap_or_default());
        pred.extend(predict_classes(network, params, &xs)?);
        per_source.push(r);
    }
    let t = &bundle.target;
    let xs: Vec<&[f32]> = (0..t.len()).map(|i| t.x(i)).collect();
    let target = EvalReport::from_predictions(&t.domain_id, &target_labels.labels, &predict_classes(network, params, &xs)?)?;
    Ok(ModelEval {
        model: model.into(),
        source: EvalReport::from_predictions("source", &truth, &pred)?,
        per_source,
        target,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub baseline: ModelEval,
    pub adapted: ModelEval,
    /// Adapted minus baseline target accuracy.
    pub target_delta: f64,
    /// Adapted minus baseline pooled source accuracy.
    pub source_delta: f64,
}

impl ComparisonReport {
    pub fn new(baseline: ModelEval, adapted: ModelEval) -> Self {
        Self {
            target_delta: adapted.target.accuracy - baseline.target.accuracy,
            source_delta: adapted.source.accuracy - baseline.source.accuracy,
            baseline,
            adapted,
        }
    }
}

pub fn compare_models(
    network: &NetworkConfig,
    baseline: &ParameterStore,
    adapted: &ParameterStore,
    bundle: &DatasetBundle,
    target_labels: &TargetLabels,
) -> Result<ComparisonReport> {
    Ok(ComparisonReport::new(
        evaluate_model("baseline", network, baseline, bundle, target_labels)?,
        evaluate_model("adapted", network, adapted, bundle, target_labels)?,
    ))
}

/// Reads the quarantined target labels of a dataset directory.
pub fn load_target_labels(dataset_dir: &Path) -> Result<TargetLabels> {
    load_eval_labels(dataset_dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reports {
    pub models: Vec<ModelEval>,
}

fn file_part(domain: &str) -> String {
    domain.replace(['/', '\\'], "_")
}

pub fn confusion_csv(r: &EvalReport) -> String {
    let mut s = String::from("true\\predicted,slight,moderate,severe\n");
    for (k, row) in r.confusion.iter().enumerate() {
        let name = ["slight", "moderate", "severe"][k];
        let _ = writeln!(s, "{name},{},{},{}", row[0], row[1], row[2]);
    }
    s
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_models(models: &[&ModelEval], dir: &Path) -> Result<()> {
    blob::create_dir(dir)?;
    let mut summary = String::from("model,domain,n,accuracy,macro_f1\n");
    for m in models {
        let reports = std::iter::once(&m.source).chain(&m.per_source).chain(std::iter::once(&m.target));
        for r in reports {
            let name = format!("confusion_{}_{}.csv", m.model, file_part(&r.domain));
            write_text(&dir.join(name), &confusion_csv(r))?;
            let _ = writeln!(summary, "{},{},{},{:.4},{:.4}", m.model, r.domain, r.n, r.accuracy, r.macro_f1);
        }
    }
    write_text(&dir.join("accuracy.csv"), &summary)?;
    blob::write_json(
        &dir.join("report.json"),
        &Reports {
            models: models.iter().map(|m| (*m).clone()).collect(),
        },
    )
}

/// `report.json`, `accuracy.csv` and one `confusion_<model>_<domain>.csv`
/// per scored domain.
pub fn emit_model_report(model: &ModelEval, dir: &Path) -> Result<()> {
    write_models(&[model], dir)
}

/// As [`emit_model_report`] for both models, plus `comparison.json`.
pub fn emit_report(report: &ComparisonReport, dir: &Path) -> Result<()> {
    write_models(&[&report.baseline, &report.adapted], dir)?;
    blob::write_json(&dir.join("comparison.json"), report)
}

pub fn load_report(dir: &Path) -> Result<Reports> {
    blob::read_json(&dir.join("report.json"))
}

pub fn load_comparison(dir: &Path) -> Result<ComparisonReport> {
    blob::read_json(&dir.join("comparison.json"))
}
