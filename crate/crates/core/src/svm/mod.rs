//! Soft-margin ν-SVM with an RBF kernel, built from scratch.
//!
//! The dual problem solved here is
//!
//! ```text
//! minimize   1/2 ΣΣ αi αj yi yj K(xi, xj)
//! subject to 0 <= αi <= 1/ℓ,   Σ αi yi = 0,   Σ αi = ν
//! ```
//!
//! via a pairwise working-set decomposition: both equality constraints are
//! preserved by moving mass between two multipliers of the *same* class, so
//! each step picks the maximal violating pair within a class and solves the
//! one-dimensional subproblem in closed form ([`solver`]). ν is feasible iff
//! ν <= 2·min(ℓ+, ℓ−)/ℓ.
//!
//! [`grid`] layers stratified k-fold cross-validation, (ν, γ) grid search
//! and the feature-combination search on top. [`serialize`] stores models as
//! versioned JSON with full-precision decimal floats.

mod grid;
mod serialize;
mod solver;

pub use grid::{
    grid_search_cv, search_feature_combinations, ComboOutcome, ComboSearch, CvCell, GridSearch,
    GridSpec, SelectionRule,
};
pub use serialize::{load_model, read_model, save_model, write_model, MODEL_VERSION};
pub use solver::SolverOptions;

use crate::error::{Error, Result};
use crate::model::{FeatureMask, FeatureVector, Label, Sample};

/// RBF kernel exp(−γ ‖a − b‖²).
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok((-gamma * squared_distance(a, b)).exp())
}

#[inline]
pub(crate) fn positive_finite(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Labeled training data: projected points and ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Dataset> {
        if points.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                left: points.len(),
                right: labels.len(),
            });
        }
        if labels.iter().any(|y| *y != 1.0 && *y != -1.0) {
            return Err(Error::InvalidInput("labels must be ±1".into()));
        }
        Ok(Dataset { points, labels })
    }

    /// Projects samples through a feature mask.
    pub fn from_samples(samples: &[Sample], mask: FeatureMask) -> Result<Dataset> {
        let mut points = Vec::with_capacity(samples.len());
        let mut labels = Vec::with_capacity(samples.len());
        for sample in samples {
            points.push(sample.features.project(mask)?);
            labels.push(sample.label.sign());
        }
        Dataset { points, labels }.validated()
    }

    fn validated(self) -> Result<Dataset> {
        Dataset::new(self.points, self.labels)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|y| **y > 0.0).count();
        (pos, self.labels.len() - pos)
    }

    /// Feasibility bound for ν: 2·min(ℓ+, ℓ−)/ℓ.
    pub fn nu_bound(&self) -> f64 {
        let (pos, neg) = self.class_counts();
        2.0 * pos.min(neg) as f64 / self.len() as f64
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// A trained ν-SVM: support vectors (masked slots only), signed dual
/// coefficients αi·yi, bias, margin offset ρ, and the kernel parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    pub rho: f64,
    pub gamma: f64,
    pub nu: f64,
    pub feature_mask: FeatureMask,
}

impl SvmModel {
    /// Decision value for an already-projected point.
    pub fn decision_raw(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_mask.len() {
            return Err(Error::DimensionMismatch {
                left: x.len(),
                right: self.feature_mask.len(),
            });
        }
        let mut sum = self.bias;
        for (sv, coeff) in self.support_vectors.iter().zip(&self.dual_coeffs) {
            sum += coeff * rbf_kernel(sv, x, self.gamma)?;
        }
        Ok(sum)
    }

    /// Decision function over a full feature vector; the model's mask selects
    /// the slots. +1 (interesting) on a non-negative decision value.
    pub fn predict(&self, x: &FeatureVector) -> Result<(Label, f64)> {
        let projected = x.project(self.feature_mask)?;
        let value = self.decision_raw(&projected)?;
        Ok((Label::from_sign(value), value))
    }

    /// The ±1-to-label mapping used throughout: +1 is interesting.
    pub fn label_map() -> [(i8, Label); 2] {
        [(1, Label::Interesting), (-1, Label::NonInteresting)]
    }
}

/// Post-training diagnostics, used by invariant checks and reports.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// All ℓ multipliers, in training order.
    pub alphas: Vec<f64>,
    pub iterations: u64,
    pub objective: f64,
    pub kkt_residual: f64,
    pub ell: usize,
    pub support_vectors: usize,
    pub bounded_support_vectors: usize,
    pub margin_errors: usize,
}

impl TrainReport {
    pub fn sv_fraction(&self) -> f64 {
        self.support_vectors as f64 / self.ell as f64
    }

    pub fn margin_error_fraction(&self) -> f64 {
        self.margin_errors as f64 / self.ell as f64
    }
}

/// A trained model with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub model: SvmModel,
    pub report: TrainReport,
}

/// Trains a ν-SVM on the dataset. `mask` is carried into the model so
/// prediction knows which feature slots to project; its width must match the
/// data dimensionality.
pub fn train_nu_svm(
    data: &Dataset,
    nu: f64,
    gamma: f64,
    mask: FeatureMask,
    options: &SolverOptions,
) -> Result<Trained> {
    if data.len() < 2 {
        return Err(Error::TooFewSamples(data.len()));
    }
    let (pos, neg) = data.class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    if let Some(dim) = data.points.first().map(|p| p.len()) {
        if dim != mask.len() {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: mask.len(),
            });
        }
        if data.points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInput("ragged training points".into()));
        }
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidInput(format!("nu must be in (0, 1], got {nu}")));
    }
    if !positive_finite(gamma) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    let bound = data.nu_bound();
    if nu > bound + 1e-12 {
        return Err(Error::InfeasibleNu { nu, bound });
    }

    let solution = solver::solve_nu(&data.points, &data.labels, nu, gamma, options)?;

    // keep only the support vectors in the model
    let mut support_vectors = Vec::new();
    let mut dual_coeffs = Vec::new();
    for (i, &alpha) in solution.alpha.iter().enumerate() {
        if alpha > 0.0 {
            support_vectors.push(data.points[i].clone());
            dual_coeffs.push(alpha * data.labels[i]);
        }
    }
    let model = SvmModel {
        support_vectors,
        dual_coeffs,
        bias: solution.bias,
        rho: solution.rho,
        gamma,
        nu,
        feature_mask: mask,
    };

    // diagnostics: SV counts and margin errors on the training set.
    // decision_i = yi·Gi + bias, so a margin error is Gi + yi·bias < ρ.
    // points within the KKT tolerance of the boundary are not counted;
    // at convergence any multiplier below the bound sits that close.
    let c = 1.0 / data.len() as f64;
    let margin_eps = options.tolerance.max(1e-9);
    let mut bounded = 0usize;
    let mut margin_errors = 0usize;
    for i in 0..data.len() {
        if solution.alpha[i] >= c {
            bounded += 1;
        }
        let decision = solution.gradient[i] + data.labels[i] * solution.bias;
        if decision < solution.rho - margin_eps {
            margin_errors += 1;
        }
    }
    let report = TrainReport {
        iterations: solution.iterations,
        objective: solution.objective,
        kkt_residual: solution.residual,
        ell: data.len(),
        support_vectors: solution.alpha.iter().filter(|a| **a > 0.0).count(),
        bounded_support_vectors: bounded,
        margin_errors,
        alphas: solution.alpha,
    };
    Ok(Trained { model, report })
}
