//! Pairwise working-set decomposition for the ν-SVM dual.
//!
//! Both linear constraints (Σ αi yi = 0 and Σ αi = ν) are invariant under a
//! transfer of mass between two multipliers of the same class, so the solver
//! repeatedly picks, within each class, the maximal violating pair
//! (smallest gradient among multipliers that can grow, largest among those
//! that can shrink), takes the closed-form step for that pair clipped to the
//! box, and updates the gradient with the two touched kernel rows. Stops
//! when the larger of the two per-class violations drops below the KKT
//! tolerance.
//!
//! Kernel rows are signed (Q_ij = yi yj K_ij) and cached with
//! least-recently-used eviction under a byte budget.

use crate::error::{Error, Result};
use crate::svm::squared_distance;
use std::collections::HashMap;
use std::sync::Arc;

/// Knobs for the decomposition loop.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// KKT stopping tolerance on the maximal violating pair.
    pub tolerance: f64,
    /// Hard cap on pair updates; exceeded means no convergence.
    pub max_pair_updates: u64,
    /// Kernel row cache budget in bytes.
    pub cache_bytes: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-5,
            max_pair_updates: 10_000_000,
            cache_bytes: 64 << 20,
        }
    }
}

impl SolverOptions {
    /// Tight tolerance for oracle comparisons and invariance tests.
    pub fn precise() -> Self {
        SolverOptions {
            tolerance: 1e-10,
            ..SolverOptions::default()
        }
    }
}

/// Converged dual solution.
#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    /// Final gradient G_i = Σ_j Q_ij α_j.
    pub gradient: Vec<f64>,
    pub bias: f64,
    pub rho: f64,
    pub objective: f64,
    pub iterations: u64,
    pub residual: f64,
}

/// Signed kernel rows with LRU eviction.
struct QCache<'a> {
    points: &'a [Vec<f64>],
    labels: &'a [f64],
    gamma: f64,
    rows: HashMap<usize, (u64, Arc<Vec<f64>>)>,
    capacity: usize,
    clock: u64,
}

impl<'a> QCache<'a> {
    fn new(points: &'a [Vec<f64>], labels: &'a [f64], gamma: f64, cache_bytes: usize) -> Self {
        let row_bytes = points.len() * std::mem::size_of::<f64>();
        let capacity = (cache_bytes / row_bytes.max(1)).max(2);
        QCache {
            points,
            labels,
            gamma,
            rows: HashMap::new(),
            capacity,
            clock: 0,
        }
    }

    fn row(&mut self, i: usize) -> Arc<Vec<f64>> {
        self.clock += 1;
        if let Some((stamp, row)) = self.rows.get_mut(&i) {
            *stamp = self.clock;
            return Arc::clone(row);
        }
        let xi = &self.points[i];
        let yi = self.labels[i];
        let row: Vec<f64> = self
            .points
            .iter()
            .zip(self.labels)
            .map(|(xj, yj)| yi * yj * (-self.gamma * squared_distance(xi, xj)).exp())
            .collect();
        let row = Arc::new(row);
        if self.rows.len() >= self.capacity {
            // evict the least recently used row
            if let Some((&victim, _)) = self.rows.iter().min_by_key(|(_, (stamp, _))| *stamp) {
                self.rows.remove(&victim);
            }
        }
        self.rows.insert(i, (self.clock, Arc::clone(&row)));
        row
    }
}

/// Feasible starting point: each class receives ν/2 of multiplier mass,
/// filled greedily at the box cap 1/ℓ.
fn initial_alpha(labels: &[f64], nu: f64) -> Vec<f64> {
    let ell = labels.len();
    let c = 1.0 / ell as f64;
    let mut remaining = [nu / 2.0, nu / 2.0]; // [positive, negative]
    let mut alpha = vec![0.0; ell];
    for (i, &y) in labels.iter().enumerate() {
        let slot = if y > 0.0 { 0 } else { 1 };
        if remaining[slot] <= 0.0 {
            continue;
        }
        let a = c.min(remaining[slot]);
        alpha[i] = a;
        remaining[slot] -= a;
    }
    alpha
}

/// One class's maximal violating pair: (argmin G over growable, argmax G
/// over shrinkable, violation).
fn violating_pair(
    alpha: &[f64],
    gradient: &[f64],
    labels: &[f64],
    class: f64,
    c: f64,
) -> Option<(usize, usize, f64)> {
    let mut up: Option<(usize, f64)> = None;
    let mut low: Option<(usize, f64)> = None;
    for i in 0..alpha.len() {
        if labels[i] != class {
            continue;
        }
        if alpha[i] < c && up.is_none_or(|(_, g)| gradient[i] < g) {
            up = Some((i, gradient[i]));
        }
        if alpha[i] > 0.0 && low.is_none_or(|(_, g)| gradient[i] > g) {
            low = Some((i, gradient[i]));
        }
    }
    match (up, low) {
        (Some((i, gi)), Some((j, gj))) if i != j => Some((i, j, gj - gi)),
        _ => None,
    }
}

/// Threshold of one class from its KKT conditions: the mean gradient over
/// free multipliers when any exist, else the midpoint of the bound interval.
fn class_threshold(alpha: &[f64], gradient: &[f64], labels: &[f64], class: f64, c: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut lower = f64::NEG_INFINITY; // from α = C: G <= threshold
    let mut upper = f64::INFINITY; // from α = 0: G >= threshold
    for i in 0..alpha.len() {
        if labels[i] != class {
            continue;
        }
        if alpha[i] > 0.0 && alpha[i] < c {
            free_sum += gradient[i];
            free_count += 1;
        } else if alpha[i] >= c {
            lower = lower.max(gradient[i]);
        } else {
            upper = upper.min(gradient[i]);
        }
    }
    if free_count > 0 {
        return free_sum / free_count as f64;
    }
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => 0.5 * (lower + upper),
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => 0.0,
    }
}

pub(crate) fn solve_nu(
    points: &[Vec<f64>],
    labels: &[f64],
    nu: f64,
    gamma: f64,
    options: &SolverOptions,
) -> Result<Solution> {
    let ell = points.len();
    let c = 1.0 / ell as f64;
    let tau = 1e-12;

    let mut cache = QCache::new(points, labels, gamma, options.cache_bytes);
    let mut alpha = initial_alpha(labels, nu);

    // G = Q α over the nonzero starting multipliers
    let mut gradient = vec![0.0; ell];
    for (j, &aj) in alpha.iter().enumerate() {
        if aj > 0.0 {
            let row = cache.row(j);
            for (g, q) in gradient.iter_mut().zip(row.iter()) {
                *g += aj * q;
            }
        }
    }

    let mut iterations = 0u64;
    let residual = loop {
        let pair_pos = violating_pair(&alpha, &gradient, labels, 1.0, c);
        let pair_neg = violating_pair(&alpha, &gradient, labels, -1.0, c);
        let best = match (pair_pos, pair_neg) {
            (Some(p), Some(n)) => Some(if p.2 >= n.2 { p } else { n }),
            (Some(p), None) => Some(p),
            (None, Some(n)) => Some(n),
            (None, None) => None,
        };
        let Some((i, j, violation)) = best else {
            break 0.0; // everything at bounds: nothing movable
        };
        if violation <= options.tolerance {
            break violation;
        }
        if iterations >= options.max_pair_updates {
            return Err(Error::NoConvergence {
                updates: iterations,
                residual: violation,
            });
        }
        iterations += 1;

        let row_i = cache.row(i);
        let row_j = cache.row(j);
        let eta = (row_i[i] + row_j[j] - 2.0 * row_i[j]).max(tau);
        let step = ((gradient[j] - gradient[i]) / eta)
            .min(c - alpha[i])
            .min(alpha[j]);

        // snap to the box exactly so bound membership stays crisp
        if step >= c - alpha[i] {
            alpha[i] = c;
        } else {
            alpha[i] += step;
        }
        if step >= alpha[j] {
            alpha[j] = 0.0;
        } else {
            alpha[j] -= step;
        }
        for k in 0..ell {
            gradient[k] += step * (row_i[k] - row_j[k]);
        }
    };

    // thresholds per class give the bias and the margin offset
    let rho_pos = class_threshold(&alpha, &gradient, labels, 1.0, c);
    let rho_neg = class_threshold(&alpha, &gradient, labels, -1.0, c);
    let bias = 0.5 * (rho_neg - rho_pos);
    let rho = 0.5 * (rho_pos + rho_neg);
    let objective = 0.5
        * alpha
            .iter()
            .zip(&gradient)
            .map(|(a, g)| a * g)
            .sum::<f64>();

    Ok(Solution {
        alpha,
        gradient,
        bias,
        rho,
        objective,
        iterations,
        residual,
    })
}
