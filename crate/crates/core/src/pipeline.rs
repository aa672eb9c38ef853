//! File-level orchestration of the pipeline stages.
//!
//! Each stage reads and writes documented plain-file artifacts (JSON, JSONL,
//! CSV), so every stage is re-runnable from disk and byte-identical under a
//! fixed seed. The CLI is a thin argument layer over these functions.

use crate::error::{Error, Result};
use crate::eval::{class_metrics, fleiss_kappa, majority_ground_truth, AssessmentMatrix, ClassReport, KappaReport};
use crate::ingest::{
    load_corpus, parse_corpus_json, CorpusEntry, CorpusFormat, UnitsDictionary, Warning,
};
use crate::measures::feature_vector_full;
use crate::model::{value_set_from_column, FeatureMask, Label, Sample, ValueSet};
use crate::sampler::{
    generate_samples, holdout_split, load_samples_jsonl, make_balanced_subfiles,
    save_samples_jsonl, write_samples_sparse, Provenance, SampleSet, SkipRecord,
};
use crate::svm::{
    load_model, save_model, search_feature_combinations, ComboSearch, GridSpec, SelectionRule,
    SolverOptions, SvmModel,
};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

// ---------------------------------------------------------------------------
// ingest

/// Parses input files into canonical corpus entries plus warnings.
pub fn ingest_files(
    inputs: &[PathBuf],
    format: CorpusFormat,
) -> Result<(Vec<CorpusEntry>, Vec<Warning>)> {
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for input in inputs {
        let text = std::fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
        match format {
            CorpusFormat::Json => {
                entries.extend(parse_corpus_json(&text, &input.display().to_string())?);
            }
            CorpusFormat::Wikitext => {
                let parsed = crate::wikitext::parse_wikitable(&text);
                let stem = input
                    .file_stem()
                    .map(|s| s.to_string_lossy().to_string())
                    .unwrap_or_else(|| "wikitext".into());
                for (i, raw) in parsed.tables.iter().enumerate() {
                    entries.push(CorpusEntry::from_raw(format!("{stem}.t{i:04}"), raw));
                }
                warnings.extend(parsed.warnings);
            }
        }
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((entries, warnings))
}

/// Writes canonical corpus JSON (pretty-printed, deterministic).
pub fn write_corpus_json(path: &Path, entries: &[CorpusEntry]) -> Result<()> {
    let mut buf = serde_json::to_vec_pretty(entries).map_err(|e| Error::Schema {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    buf.push(b'\n');
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// samples

/// Loads a canonical corpus, labels every categorical attribute, and
/// threads the corpus hash into the sample set's provenance.
pub fn samples_from_corpus(
    corpus_path: &Path,
    units: &UnitsDictionary,
    dedup: bool,
) -> Result<(SampleSet, Vec<SkipRecord>, Vec<Warning>)> {
    let bytes = std::fs::read(corpus_path).map_err(|e| Error::io(corpus_path, e))?;
    let digest = format!("{:x}", Sha256::digest(&bytes));
    let (records, warnings) = load_corpus(corpus_path, CorpusFormat::Json, units)?;
    let (mut samples, skipped) = generate_samples(&records);
    samples.provenance = Provenance {
        corpus_sha256: Some(digest),
        seed: None,
    };
    if dedup {
        samples.dedup_keep_first();
    }
    Ok((samples, skipped, warnings))
}

// ---------------------------------------------------------------------------
// split

/// Paths produced by the split stage.
#[derive(Debug, Clone, Serialize)]
pub struct SplitArtifacts {
    pub train: PathBuf,
    pub test_pos: PathBuf,
    pub test_neg: PathBuf,
    pub subfiles: Vec<PathBuf>,
}

fn write_sample_list(path: &Path, samples: &[Sample]) -> Result<()> {
    let set = SampleSet {
        interesting: samples
            .iter()
            .filter(|s| s.label == Label::Interesting)
            .cloned()
            .collect(),
        non_interesting: samples
            .iter()
            .filter(|s| s.label == Label::NonInteresting)
            .cloned()
            .collect(),
        provenance: Provenance::default(),
    };
    save_samples_jsonl(path, &set)
}

fn write_sparse_file(path: &Path, set: &SampleSet) -> Result<()> {
    let mut buf = Vec::new();
    write_samples_sparse(&mut buf, set).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Stratified hold-out split plus balanced sub-training files, written under
/// `out_dir`.
pub fn split_to_files(
    samples_path: &Path,
    out_dir: &Path,
    test_fraction: f64,
    subfile_count: usize,
    seed: u64,
    sparse: bool,
) -> Result<SplitArtifacts> {
    let samples = load_samples_jsonl(samples_path)?;
    let (train, test_pos, test_neg) = holdout_split(&samples, test_fraction, seed)?;
    let subfiles = make_balanced_subfiles(&train, subfile_count)?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let sub_dir = out_dir.join("subfiles");
    std::fs::create_dir_all(&sub_dir).map_err(|e| Error::io(&sub_dir, e))?;

    let artifacts = SplitArtifacts {
        train: out_dir.join("train.jsonl"),
        test_pos: out_dir.join("test_pos.jsonl"),
        test_neg: out_dir.join("test_neg.jsonl"),
        subfiles: (0..subfiles.len())
            .map(|i| sub_dir.join(format!("sub_{i:02}.jsonl")))
            .collect(),
    };
    save_samples_jsonl(&artifacts.train, &train)?;
    write_sample_list(&artifacts.test_pos, &test_pos)?;
    write_sample_list(&artifacts.test_neg, &test_neg)?;
    for (path, subfile) in artifacts.subfiles.iter().zip(&subfiles) {
        save_samples_jsonl(path, subfile)?;
    }
    if sparse {
        write_sparse_file(&artifacts.train.with_extension("txt"), &train)?;
        for (path, subfile) in artifacts.subfiles.iter().zip(&subfiles) {
            write_sparse_file(&path.with_extension("txt"), subfile)?;
        }
    }
    Ok(artifacts)
}

// ---------------------------------------------------------------------------
// train

/// Everything the train stage writes.
#[derive(Debug, Clone, Serialize)]
pub struct TrainArtifacts {
    pub final_model: PathBuf,
    pub cv_report: PathBuf,
    pub selection: PathBuf,
    pub combo_models: Vec<PathBuf>,
}

#[derive(Debug, Serialize)]
struct SelectionReport<'a> {
    final_mask: String,
    final_mask_bits: u8,
    final_subfile: usize,
    nu: f64,
    gamma: f64,
    err_pos: f64,
    err_neg: f64,
    combos: Vec<ComboRow<'a>>,
}

#[derive(Debug, Serialize)]
struct ComboRow<'a> {
    mask: String,
    mask_bits: u8,
    subfile: usize,
    nu: f64,
    gamma: f64,
    cv_balanced_accuracy: f64,
    err_pos: f64,
    err_neg: f64,
    model_file: &'a str,
}

/// Loads sub-training files (sorted), runs the combination search, and
/// writes per-combo models, the final model, the CV report, and a selection
/// summary.
#[allow(clippy::too_many_arguments)]
pub fn train_to_files(
    subfiles_dir: &Path,
    test_pos_path: &Path,
    test_neg_path: &Path,
    masks: &[FeatureMask],
    grid: &GridSpec,
    seed: u64,
    options: &SolverOptions,
    selection: SelectionRule,
    out_dir: &Path,
) -> Result<(TrainArtifacts, ComboSearch)> {
    let mut subfile_paths: Vec<PathBuf> = std::fs::read_dir(subfiles_dir)
        .map_err(|e| Error::io(subfiles_dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
        .collect();
    subfile_paths.sort();
    if subfile_paths.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no .jsonl sub-training files under {}",
            subfiles_dir.display()
        )));
    }
    let subfiles: Vec<SampleSet> = subfile_paths
        .iter()
        .map(|p| load_samples_jsonl(p))
        .collect::<Result<_>>()?;
    let test_pos = load_samples_jsonl(test_pos_path)?;
    let test_neg = load_samples_jsonl(test_neg_path)?;
    let test_pos: Vec<Sample> = test_pos.iter().cloned().collect();
    let test_neg: Vec<Sample> = test_neg.iter().cloned().collect();

    let search = search_feature_combinations(
        &subfiles, &test_pos, &test_neg, masks, grid, seed, options, selection,
    )?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let models_dir = out_dir.join("models");
    std::fs::create_dir_all(&models_dir).map_err(|e| Error::io(&models_dir, e))?;

    let mut combo_models = Vec::new();
    let mut model_files = Vec::new();
    for outcome in &search.per_combo {
        let path = models_dir.join(format!("combo_{:03}.json", outcome.mask.bits()));
        save_model(&path, &outcome.model)?;
        model_files.push(format!("models/combo_{:03}.json", outcome.mask.bits()));
        combo_models.push(path);
    }

    let artifacts = TrainArtifacts {
        final_model: out_dir.join("final_model.json"),
        cv_report: out_dir.join("cv_report.csv"),
        selection: out_dir.join("selection.json"),
        combo_models,
    };
    save_model(&artifacts.final_model, &search.final_outcome().model)?;

    // CV report: one row per evaluated cell
    let mut cv = String::from("mask,subfile,nu,gamma,feasible,fold_accuracies,acc_interesting,acc_non_interesting,balanced_accuracy\n");
    for outcome in &search.per_combo {
        for (subfile_idx, cells) in &outcome.cv_table {
            for cell in cells {
                let folds = cell
                    .fold_accuracies
                    .iter()
                    .map(|a| format!("{a:.4}"))
                    .collect::<Vec<_>>()
                    .join(";");
                cv.push_str(&format!(
                    "{},{},{},{},{},{},{:.6},{:.6},{:.6}\n",
                    outcome.mask,
                    subfile_idx,
                    cell.nu,
                    cell.gamma,
                    cell.feasible,
                    folds,
                    cell.acc_interesting,
                    cell.acc_non_interesting,
                    if cell.balanced_accuracy.is_finite() {
                        cell.balanced_accuracy
                    } else {
                        0.0
                    },
                ));
            }
        }
    }
    std::fs::write(&artifacts.cv_report, cv).map_err(|e| Error::io(&artifacts.cv_report, e))?;

    let final_outcome = search.final_outcome();
    let report = SelectionReport {
        final_mask: final_outcome.mask.to_string(),
        final_mask_bits: final_outcome.mask.bits(),
        final_subfile: final_outcome.subfile,
        nu: final_outcome.nu,
        gamma: final_outcome.gamma,
        err_pos: final_outcome.err_pos,
        err_neg: final_outcome.err_neg,
        combos: search
            .per_combo
            .iter()
            .zip(&model_files)
            .map(|(o, file)| ComboRow {
                mask: o.mask.to_string(),
                mask_bits: o.mask.bits(),
                subfile: o.subfile,
                nu: o.nu,
                gamma: o.gamma,
                cv_balanced_accuracy: o.cv_balanced_accuracy,
                err_pos: o.err_pos,
                err_neg: o.err_neg,
                model_file: file,
            })
            .collect(),
    };
    let mut buf = serde_json::to_vec_pretty(&report).map_err(|e| Error::Schema {
        location: artifacts.selection.display().to_string(),
        message: e.to_string(),
    })?;
    buf.push(b'\n');
    std::fs::write(&artifacts.selection, buf).map_err(|e| Error::io(&artifacts.selection, e))?;

    Ok((artifacts, search))
}

// ---------------------------------------------------------------------------
// predict

/// One scored categorical column.
#[derive(Debug, Clone, Serialize)]
pub struct ColumnPrediction {
    pub header: String,
    pub label: Label,
    pub decision_value: f64,
}

/// Ranked categorical columns of one table.
#[derive(Debug, Clone, Serialize)]
pub struct TablePrediction {
    pub table_id: String,
    pub subject: String,
    pub columns: Vec<ColumnPrediction>,
}

/// Scores every categorical column of the tables in a canonical corpus
/// file, ranked by decision value.
pub fn predict_tables(
    model_path: &Path,
    table_path: &Path,
    units: &UnitsDictionary,
) -> Result<Vec<TablePrediction>> {
    let model = load_model(model_path)?;
    let text = std::fs::read_to_string(table_path).map_err(|e| Error::io(table_path, e))?;
    // accept either a single table object or an array
    let entries = match parse_corpus_json(&text, &table_path.display().to_string()) {
        Ok(entries) => entries,
        Err(first_err) => match serde_json::from_str::<CorpusEntry>(&text) {
            Ok(entry) => vec![entry],
            Err(_) => return Err(first_err),
        },
    };
    let records = crate::ingest::type_corpus(&entries, units);
    let mut out = Vec::new();
    for record in &records {
        let mut columns = Vec::new();
        for column in record.categorical_columns() {
            let Ok(vs) = value_set_from_column(&column.cells) else {
                continue;
            };
            let features = feature_vector_full(&vs);
            let (label, decision_value) = model.predict(&features)?;
            columns.push(ColumnPrediction {
                header: column.header.clone(),
                label,
                decision_value,
            });
        }
        columns.sort_by(|a, b| b.decision_value.total_cmp(&a.decision_value));
        out.push(TablePrediction {
            table_id: record.id.clone(),
            subject: record.subject.clone(),
            columns,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// evaluate

/// Metrics at one agreement level.
#[derive(Debug, Clone, Serialize)]
pub struct LevelReport {
    pub level: usize,
    pub evaluators: usize,
    pub user_pos: usize,
    pub user_neg: usize,
    pub excluded: usize,
    pub report: Option<ClassReport>,
}

/// Full assessment evaluation: kappa plus one row per agreement level.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub kappa: KappaReport,
    pub levels: Vec<LevelReport>,
}

/// Predicts the assessed samples with the model and scores them against
/// majority ground truth at every requested agreement level.
pub fn evaluate_assessments(
    model: &SvmModel,
    samples: &SampleSet,
    matrix: &AssessmentMatrix,
    levels: &[usize],
) -> Result<EvaluationReport> {
    // sample lookup by normalized pair key; first occurrence wins
    let mut by_key: std::collections::BTreeMap<String, &Sample> = Default::default();
    for sample in samples.iter() {
        by_key.entry(sample.pair_key()).or_insert(sample);
    }
    let mut predictions: std::collections::BTreeMap<&str, Label> = Default::default();
    for id in &matrix.sample_ids {
        let sample = by_key.get(id.as_str()).ok_or_else(|| {
            Error::InvalidInput(format!("assessed sample {id:?} not found in the sample file"))
        })?;
        let (label, _) = model.predict(&sample.features)?;
        predictions.insert(id.as_str(), label);
    }

    let kappa = fleiss_kappa(matrix)?;
    let mut level_reports = Vec::new();
    for &level in levels {
        let truth = majority_ground_truth(matrix, level)?;
        let mut predicted = Vec::new();
        let mut actual = Vec::new();
        for id in &truth.user_pos {
            predicted.push(predictions[id.as_str()]);
            actual.push(Label::Interesting);
        }
        for id in &truth.user_neg {
            predicted.push(predictions[id.as_str()]);
            actual.push(Label::NonInteresting);
        }
        let report = if predicted.is_empty() {
            None
        } else {
            Some(class_metrics(&predicted, &actual)?)
        };
        level_reports.push(LevelReport {
            level,
            evaluators: matrix.evaluators(),
            user_pos: truth.user_pos.len(),
            user_neg: truth.user_neg.len(),
            excluded: truth.excluded.len(),
            report,
        });
    }
    Ok(EvaluationReport {
        kappa,
        levels: level_reports,
    })
}

fn pct(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:6.2}", v * 100.0),
        None => format!("{:>6}", "n/a"),
    }
}

/// Renders the per-level table (recall/precision/F1 per class, accuracy).
pub fn render_evaluation_text(report: &EvaluationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "fleiss kappa: {:.4}  (95% CI [{:.4}, {:.4}])\n\n",
        report.kappa.kappa, report.kappa.ci95.0, report.kappa.ci95.1
    ));
    out.push_str(
        "level   userNeg: rec   prec     f1 | userPos: rec   prec     f1 |    acc |  n+/n-/excl\n",
    );
    for level in &report.levels {
        let row = match &level.report {
            Some(r) => format!(
                "{:>2}/{:<2}          {} {} {} |         {} {} {} | {} | {}/{}/{}",
                level.level,
                level.evaluators,
                pct(r.non_interesting.recall),
                pct(r.non_interesting.precision),
                pct(r.non_interesting.f1),
                pct(r.interesting.recall),
                pct(r.interesting.precision),
                pct(r.interesting.f1),
                pct(Some(r.accuracy)),
                level.user_pos,
                level.user_neg,
                level.excluded,
            ),
            None => format!(
                "{:>2}/{:<2}   (no samples reach this agreement level; {} excluded)",
                level.level, level.evaluators, level.excluded
            ),
        };
        out.push_str(&row);
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// stats

/// Corpus statistics over categorical attribute counts.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusStats {
    pub tables: usize,
    /// (categorical column count, number of tables) sorted by count.
    pub histogram: Vec<(u64, usize)>,
    pub with_categorical_fraction: f64,
    pub lambda: f64,
    pub relative_sse: f64,
}

pub fn corpus_stats(corpus_path: &Path, units: &UnitsDictionary) -> Result<CorpusStats> {
    let (records, _) = load_corpus(corpus_path, CorpusFormat::Json, units)?;
    if records.is_empty() {
        return Err(Error::InvalidInput("corpus contains no accepted tables".into()));
    }
    let counts: Vec<u64> = records
        .iter()
        .map(|r| r.categorical_columns().count() as u64)
        .collect();
    let mut histogram: std::collections::BTreeMap<u64, usize> = Default::default();
    for &c in &counts {
        *histogram.entry(c).or_insert(0) += 1;
    }
    let with_categorical = counts.iter().filter(|&&c| c > 0).count();
    let (lambda, relative_sse) = crate::eval::poisson_fit(&counts)?;
    Ok(CorpusStats {
        tables: records.len(),
        histogram: histogram.into_iter().collect(),
        with_categorical_fraction: with_categorical as f64 / records.len() as f64,
        lambda,
        relative_sse,
    })
}

// ---------------------------------------------------------------------------
// misc

/// Parses a `name:count,...` value spec (the desk-calculator input). Bare
/// numbers are treated as counts with synthetic names.
pub fn parse_value_spec(spec: &str) -> Result<ValueSet> {
    let mut counts: Vec<(String, u64)> = Vec::new();
    for (i, part) in spec.split(',').enumerate() {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (name, count) = match part.rsplit_once(':') {
            Some((name, count)) => (name.trim().to_string(), count.trim()),
            None => (format!("v{i}"), part),
        };
        let count: u64 = count.parse().map_err(|_| {
            Error::InvalidInput(format!("bad count in value spec: {part:?}"))
        })?;
        counts.push((name, count));
    }
    ValueSet::from_counts(counts)
}

/// Writes warnings as line-delimited JSON.
pub fn write_warnings<W: Write>(out: &mut W, warnings: &[Warning]) -> std::io::Result<()> {
    for warning in warnings {
        serde_json::to_writer(&mut *out, warning)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
