//! Parameter grid search with stratified k-fold cross-validation, and the
//! feature-combination search over sub-training files.
//!
//! The CV objective is balanced accuracy: every sample is predicted once by
//! the fold that holds it out, and the two pooled class accuracies are
//! averaged. Ties prefer smaller ν, then smaller γ. Everything is
//! deterministic under the caller's seed, including the parallel path (the
//! reduction is a stable argmin over a deterministically ordered table).

use crate::error::{Error, Result};
use crate::model::{FeatureMask, Label, Sample};
use crate::sampler::SampleSet;
use crate::svm::{train_nu_svm, Dataset, SolverOptions, SvmModel};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

/// Search space for (ν, γ) and the CV fold count.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub nu_values: Vec<f64>,
    pub gamma_values: Vec<f64>,
    pub folds: usize,
    /// Explore one half-step refinement around the best coarse cell.
    pub refine: bool,
}

impl GridSpec {
    pub fn new(nu_values: Vec<f64>, gamma_values: Vec<f64>, folds: usize) -> Result<GridSpec> {
        if nu_values.is_empty() || gamma_values.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if folds < 2 {
            return Err(Error::InvalidInput(format!(
                "fold count must be >= 2, got {folds}"
            )));
        }
        if nu_values.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::InvalidInput("nu grid values must lie in (0, 1)".into()));
        }
        if gamma_values.iter().any(|&v| !crate::svm::positive_finite(v)) {
            return Err(Error::InvalidInput("gamma grid values must be positive".into()));
        }
        Ok(GridSpec {
            nu_values,
            gamma_values,
            folds,
            refine: false,
        })
    }

    /// Default grid: ν in {0.05, 0.10, ..., 0.75}, γ over the decades
    /// 1e-5..1e2, 5 folds, one refinement step around the best cell.
    pub fn default_grid() -> GridSpec {
        let nu_values: Vec<f64> = (1..=15).map(|i| i as f64 * 0.05).collect();
        let gamma_values: Vec<f64> = (-5..=2).map(|e| 10f64.powi(e)).collect();
        GridSpec {
            nu_values,
            gamma_values,
            folds: 5,
            refine: true,
        }
    }

    /// Small grid for quick runs and tests.
    pub fn coarse_grid() -> GridSpec {
        GridSpec {
            nu_values: vec![0.1, 0.3, 0.5],
            gamma_values: vec![0.01, 1.0, 100.0],
            folds: 5,
            refine: false,
        }
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub nu: f64,
    pub gamma: f64,
    /// Whether ν was feasible on every fold's training part.
    pub feasible: bool,
    /// Overall accuracy per fold.
    pub fold_accuracies: Vec<f64>,
    /// Pooled class-specific accuracies.
    pub acc_interesting: f64,
    pub acc_non_interesting: f64,
    /// Mean of the two class accuracies.
    pub balanced_accuracy: f64,
}

/// Grid search outcome: the winning cell plus the full CV table.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub best_nu: f64,
    pub best_gamma: f64,
    pub best_balanced_accuracy: f64,
    pub table: Vec<CvCell>,
}

/// Stratified fold assignment: each class is shuffled under the seed and
/// dealt round-robin, so every fold holds at least one sample of each class
/// whenever folds <= min class count.
pub fn stratified_folds(labels: &[f64], folds: usize, seed: u64) -> Result<Vec<usize>> {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] > 0.0).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] < 0.0).collect();
    let min_class = pos.len().min(neg.len());
    if folds > min_class {
        return Err(Error::BadFoldCount { folds, min_class });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    for class in [pos, neg] {
        let mut order = class;
        order.shuffle(&mut rng);
        for (slot, index) in order.into_iter().enumerate() {
            assignment[index] = slot % folds;
        }
    }
    Ok(assignment)
}

fn evaluate_cell(
    data: &Dataset,
    mask: FeatureMask,
    fold_of: &[usize],
    folds: usize,
    nu: f64,
    gamma: f64,
    options: &SolverOptions,
) -> CvCell {
    let mut fold_accuracies = Vec::with_capacity(folds);
    let mut correct_pos = 0usize;
    let mut correct_neg = 0usize;
    let mut total_pos = 0usize;
    let mut total_neg = 0usize;

    for fold in 0..folds {
        let train_idx: Vec<usize> = (0..data.len()).filter(|i| fold_of[*i] != fold).collect();
        let test_idx: Vec<usize> = (0..data.len()).filter(|i| fold_of[*i] == fold).collect();
        let train = data.subset(&train_idx);
        if nu > train.nu_bound() + 1e-12 {
            return CvCell {
                nu,
                gamma,
                feasible: false,
                fold_accuracies: Vec::new(),
                acc_interesting: 0.0,
                acc_non_interesting: 0.0,
                balanced_accuracy: f64::NEG_INFINITY,
            };
        }
        let trained = match train_nu_svm(&train, nu, gamma, mask, options) {
            Ok(t) => t,
            Err(_) => {
                return CvCell {
                    nu,
                    gamma,
                    feasible: false,
                    fold_accuracies: Vec::new(),
                    acc_interesting: 0.0,
                    acc_non_interesting: 0.0,
                    balanced_accuracy: f64::NEG_INFINITY,
                }
            }
        };
        let mut fold_correct = 0usize;
        for &i in &test_idx {
            let decision = trained.model.decision_raw(&data.points[i]).unwrap_or(0.0);
            let predicted = if decision >= 0.0 { 1.0 } else { -1.0 };
            let truth = data.labels[i];
            let correct = predicted == truth;
            fold_correct += usize::from(correct);
            if truth > 0.0 {
                total_pos += 1;
                correct_pos += usize::from(correct);
            } else {
                total_neg += 1;
                correct_neg += usize::from(correct);
            }
        }
        fold_accuracies.push(fold_correct as f64 / test_idx.len().max(1) as f64);
    }

    let acc_pos = correct_pos as f64 / total_pos.max(1) as f64;
    let acc_neg = correct_neg as f64 / total_neg.max(1) as f64;
    CvCell {
        nu,
        gamma,
        feasible: true,
        fold_accuracies,
        acc_interesting: acc_pos,
        acc_non_interesting: acc_neg,
        balanced_accuracy: 0.5 * (acc_pos + acc_neg),
    }
}

/// Better-than comparison for grid cells: higher balanced accuracy, ties to
/// smaller ν, then smaller γ.
fn cell_beats(candidate: &CvCell, incumbent: &CvCell) -> bool {
    if !candidate.feasible {
        return false;
    }
    if !incumbent.feasible {
        return true;
    }
    match candidate
        .balanced_accuracy
        .total_cmp(&incumbent.balanced_accuracy)
    {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => match candidate.nu.total_cmp(&incumbent.nu) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => candidate.gamma < incumbent.gamma,
        },
    }
}

/// Stratified k-fold grid search over (ν, γ).
pub fn grid_search_cv(
    samples: &[Sample],
    mask: FeatureMask,
    grid: &GridSpec,
    seed: u64,
    options: &SolverOptions,
) -> Result<GridSearch> {
    let data = Dataset::from_samples(samples, mask)?;
    grid_search_cv_data(&data, mask, grid, seed, options)
}

/// Grid search over an already-projected dataset.
pub fn grid_search_cv_data(
    data: &Dataset,
    mask: FeatureMask,
    grid: &GridSpec,
    seed: u64,
    options: &SolverOptions,
) -> Result<GridSearch> {
    if grid.nu_values.is_empty() || grid.gamma_values.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let fold_of = stratified_folds(&data.labels, grid.folds, seed)?;

    // grid iteration order is ascending, so the tie-break falls out of the
    // strict comparison
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut nu_sorted = grid.nu_values.clone();
    nu_sorted.sort_by(f64::total_cmp);
    let mut gamma_sorted = grid.gamma_values.clone();
    gamma_sorted.sort_by(f64::total_cmp);
    for &nu in &nu_sorted {
        for &gamma in &gamma_sorted {
            cells.push((nu, gamma));
        }
    }

    let evaluate = |pairs: &[(f64, f64)]| -> Vec<CvCell> {
        pairs
            .par_iter()
            .map(|&(nu, gamma)| {
                evaluate_cell(data, mask, &fold_of, grid.folds, nu, gamma, options)
            })
            .collect()
    };

    let mut table = evaluate(&cells);
    let mut best = table
        .iter()
        .fold(None::<CvCell>, |acc, cell| match acc {
            Some(inc) if !cell_beats(cell, &inc) => Some(inc),
            _ if cell.feasible => Some(cell.clone()),
            other => other,
        })
        .ok_or(Error::NoFeasibleCell)?;

    if grid.refine {
        let half = 10f64.sqrt();
        let mut refinement: Vec<(f64, f64)> = Vec::new();
        for dn in [-0.025, 0.0, 0.025] {
            for gm in [1.0 / half, 1.0, half] {
                let nu = best.nu + dn;
                let gamma = best.gamma * gm;
                if nu > 0.0 && nu < 1.0 && (dn != 0.0 || gm != 1.0) {
                    refinement.push((nu, gamma));
                }
            }
        }
        let refined = evaluate(&refinement);
        for cell in &refined {
            if cell_beats(cell, &best) {
                best = cell.clone();
            }
        }
        table.extend(refined);
    }

    Ok(GridSearch {
        best_nu: best.nu,
        best_gamma: best.gamma,
        best_balanced_accuracy: best.balanced_accuracy,
        table,
    })
}

/// How the winner is picked among models evaluated on the two held-out test
/// files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    /// Minimize max(err_pos, err_neg); ties by error sum.
    MaxThenSum,
    /// Minimize err_pos + err_neg.
    Sum,
}

impl SelectionRule {
    fn key(self, err_pos: f64, err_neg: f64) -> (f64, f64) {
        match self {
            SelectionRule::MaxThenSum => (err_pos.max(err_neg), err_pos + err_neg),
            SelectionRule::Sum => (err_pos + err_neg, err_pos.max(err_neg)),
        }
    }
}

/// Best model for one feature combination.
#[derive(Debug, Clone)]
pub struct ComboOutcome {
    pub mask: FeatureMask,
    /// Which sub-training file produced the winner.
    pub subfile: usize,
    pub nu: f64,
    pub gamma: f64,
    pub cv_balanced_accuracy: f64,
    /// Misclassification fractions on the held-out class files.
    pub err_pos: f64,
    pub err_neg: f64,
    pub model: SvmModel,
    /// CV table rows of every subfile run for this mask.
    pub cv_table: Vec<(usize, Vec<CvCell>)>,
}

/// Outcome of the full combination search.
#[derive(Debug, Clone)]
pub struct ComboSearch {
    pub per_combo: Vec<ComboOutcome>,
    /// Index into per_combo of the final selected model.
    pub final_index: usize,
}

impl ComboSearch {
    pub fn final_outcome(&self) -> &ComboOutcome {
        &self.per_combo[self.final_index]
    }
}

fn class_error(model: &SvmModel, samples: &[Sample], expected: Label) -> Result<f64> {
    let mut wrong = 0usize;
    for sample in samples {
        let (label, _) = model.predict(&sample.features)?;
        wrong += usize::from(label != expected);
    }
    Ok(wrong as f64 / samples.len().max(1) as f64)
}

fn seed_for(base: u64, mask: FeatureMask, subfile: usize) -> u64 {
    base.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((mask.bits() as u64) << 32)
        .wrapping_add(subfile as u64)
}

/// For every requested feature combination: grid-search each sub-training
/// file, train on the whole subfile at the tuned parameters, score against
/// TestPos/TestNeg, keep the best subfile model, then pick the final model
/// across combinations with the same rule.
#[allow(clippy::too_many_arguments)]
pub fn search_feature_combinations(
    subfiles: &[SampleSet],
    test_pos: &[Sample],
    test_neg: &[Sample],
    masks: &[FeatureMask],
    grid: &GridSpec,
    seed: u64,
    options: &SolverOptions,
    selection: SelectionRule,
) -> Result<ComboSearch> {
    if subfiles.is_empty() {
        return Err(Error::InvalidInput("need at least one sub-training file".into()));
    }
    if masks.is_empty() {
        return Err(Error::InvalidInput("need at least one feature combination".into()));
    }
    if test_pos.is_empty() || test_neg.is_empty() {
        return Err(Error::InvalidInput("held-out test files must be non-empty".into()));
    }

    let mut sorted_masks = masks.to_vec();
    sorted_masks.sort_by_key(|m| m.bits());
    sorted_masks.dedup();

    let per_combo: Vec<Result<ComboOutcome>> = sorted_masks
        .par_iter()
        .map(|&mask| {
            let mut best: Option<ComboOutcome> = None;
            let mut cv_rows = Vec::new();
            for (subfile_idx, subfile) in subfiles.iter().enumerate() {
                let samples: Vec<Sample> = subfile.iter().cloned().collect();
                let search = grid_search_cv(
                    &samples,
                    mask,
                    grid,
                    seed_for(seed, mask, subfile_idx),
                    options,
                )?;
                cv_rows.push((subfile_idx, search.table.clone()));
                let data = Dataset::from_samples(&samples, mask)?;
                let trained =
                    train_nu_svm(&data, search.best_nu, search.best_gamma, mask, options)?;
                let err_pos = class_error(&trained.model, test_pos, Label::Interesting)?;
                let err_neg = class_error(&trained.model, test_neg, Label::NonInteresting)?;
                let candidate = ComboOutcome {
                    mask,
                    subfile: subfile_idx,
                    nu: search.best_nu,
                    gamma: search.best_gamma,
                    cv_balanced_accuracy: search.best_balanced_accuracy,
                    err_pos,
                    err_neg,
                    model: trained.model,
                    cv_table: Vec::new(),
                };
                let replace = match &best {
                    None => true,
                    Some(incumbent) => {
                        selection.key(candidate.err_pos, candidate.err_neg)
                            < selection.key(incumbent.err_pos, incumbent.err_neg)
                    }
                };
                if replace {
                    best = Some(candidate);
                }
            }
            let mut outcome = best.expect("at least one subfile");
            outcome.cv_table = cv_rows;
            Ok(outcome)
        })
        .collect();

    let per_combo: Vec<ComboOutcome> = per_combo.into_iter().collect::<Result<Vec<_>>>()?;

    // final winner across combinations: selection rule, then fewer features,
    // then smaller mask value; per_combo is ordered by mask so the strict
    // comparison keeps the first of equals
    let mut final_index = 0usize;
    for (i, outcome) in per_combo.iter().enumerate().skip(1) {
        let inc = &per_combo[final_index];
        let a = selection.key(outcome.err_pos, outcome.err_neg);
        let b = selection.key(inc.err_pos, inc.err_neg);
        let better = match a.partial_cmp(&b).unwrap() {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => outcome.mask.len() < inc.mask.len(),
        };
        if better {
            final_index = i;
        }
    }

    Ok(ComboSearch {
        per_combo,
        final_index,
    })
}
