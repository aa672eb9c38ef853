//! Test-support oracles and generators (feature `testkit`).
//!
//! Everything here is deliberately independent of the implementation paths
//! it checks: the QP oracle enumerates active sets instead of doing
//! decomposition, and the labeling oracle scans all table pairs instead of
//! building the constraint index.

use crate::model::{ColumnKind, Column, TableMeta, TableRecord};
use crate::text::{normalize, subject_stem};
use rand::Rng;
use std::collections::BTreeMap;

// ---------------------------------------------------------------------------
// Brute-force ν-SVM dual oracle

/// Globally optimal dual solution found by enumerating all 3^ℓ active sets.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
}

/// Solves the ν-SVM dual exactly for tiny instances (ℓ <= ~8) by trying
/// every lower/upper/free assignment, solving the equality-constrained
/// subproblem on the free block, and keeping the best primal-feasible
/// candidate.
pub fn brute_force_nu_svm(
    points: &[Vec<f64>],
    labels: &[f64],
    nu: f64,
    gamma: f64,
) -> Option<OracleSolution> {
    let ell = points.len();
    assert!(ell <= 8, "oracle is exponential; keep instances tiny");
    let c = 1.0 / ell as f64;

    // dense signed kernel matrix
    let mut q = vec![vec![0.0f64; ell]; ell];
    for i in 0..ell {
        for j in 0..ell {
            let d2: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            q[i][j] = labels[i] * labels[j] * (-gamma * d2).exp();
        }
    }

    let mut best: Option<OracleSolution> = None;
    let mut assignment = vec![0u8; ell]; // 0 = lower, 1 = upper, 2 = free
    loop {
        if let Some(alpha) = solve_active_set(&assignment, &q, labels, nu, c) {
            let objective = quadratic_objective(&alpha, &q);
            if best.as_ref().is_none_or(|b| objective < b.objective) {
                best = Some(OracleSolution { alpha, objective });
            }
        }
        // next assignment in base 3
        let mut pos = 0;
        loop {
            if pos == ell {
                return best;
            }
            assignment[pos] += 1;
            if assignment[pos] < 3 {
                break;
            }
            assignment[pos] = 0;
            pos += 1;
        }
    }
}

fn quadratic_objective(alpha: &[f64], q: &[Vec<f64>]) -> f64 {
    let ell = alpha.len();
    let mut obj = 0.0;
    for i in 0..ell {
        for j in 0..ell {
            obj += alpha[i] * alpha[j] * q[i][j];
        }
    }
    0.5 * obj
}

/// Solves one active-set candidate; returns a feasible full α or None.
fn solve_active_set(
    assignment: &[u8],
    q: &[Vec<f64>],
    labels: &[f64],
    nu: f64,
    c: f64,
) -> Option<Vec<f64>> {
    let ell = assignment.len();
    let free: Vec<usize> = (0..ell).filter(|&i| assignment[i] == 2).collect();
    let upper: Vec<usize> = (0..ell).filter(|&i| assignment[i] == 1).collect();

    // rhs of the two equality constraints restricted to the free block
    let b0 = nu - c * upper.len() as f64;
    let b1 = -c * upper.iter().map(|&u| labels[u]).sum::<f64>();

    let mut alpha = vec![0.0; ell];
    for &u in &upper {
        alpha[u] = c;
    }

    let f = free.len();
    if f == 0 {
        if b0.abs() < 1e-9 && b1.abs() < 1e-9 {
            return Some(alpha);
        }
        return None;
    }

    // constraint matrix rows over the free block
    let a = [vec![1.0; f], free.iter().map(|&i| labels[i]).collect()];
    let (particular, nullspace) = affine_solutions(&a, [b0, b1])?;

    // linear term from the fixed-at-upper block
    let linear: Vec<f64> = free
        .iter()
        .map(|&i| upper.iter().map(|&u| q[i][u] * c).sum::<f64>())
        .collect();

    // reduced problem over the nullspace coordinates
    let dim = nullspace.len();
    let alpha_free: Vec<f64> = if dim == 0 {
        particular
    } else {
        let qf: Vec<Vec<f64>> = free
            .iter()
            .map(|&i| free.iter().map(|&j| q[i][j]).collect())
            .collect();
        let qp: Vec<f64> = (0..f)
            .map(|r| (0..f).map(|s| qf[r][s] * particular[s]).sum::<f64>() + linear[r])
            .collect();
        let mut h = vec![vec![0.0; dim]; dim];
        let mut g = vec![0.0; dim];
        for (r, nr) in nullspace.iter().enumerate() {
            for (s, ns) in nullspace.iter().enumerate() {
                let mut acc = 0.0;
                for x in 0..f {
                    let mut row = 0.0;
                    for y in 0..f {
                        row += qf[x][y] * ns[y];
                    }
                    acc += nr[x] * row;
                }
                h[r][s] = acc;
            }
            g[r] = (0..f).map(|x| nr[x] * qp[x]).sum();
        }
        let mut neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let z = solve_dense(&mut h, &mut neg_g)?;
        (0..f)
            .map(|x| {
                particular[x]
                    + nullspace
                        .iter()
                        .zip(&z)
                        .map(|(n, zi)| n[x] * zi)
                        .sum::<f64>()
            })
            .collect()
    };

    // primal feasibility of the candidate
    for (&i, &v) in free.iter().zip(&alpha_free) {
        if !(-1e-9..=c + 1e-9).contains(&v) {
            return None;
        }
        alpha[i] = v.clamp(0.0, c);
    }
    let sum: f64 = alpha.iter().sum();
    let sum_y: f64 = alpha.iter().zip(labels).map(|(a, y)| a * y).sum();
    if (sum - nu).abs() > 1e-8 || sum_y.abs() > 1e-8 {
        return None;
    }
    Some(alpha)
}

/// Particular solution and nullspace basis of a 2×f system, or None when
/// inconsistent.
fn affine_solutions(a: &[Vec<f64>; 2], b: [f64; 2]) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let f = a[0].len();
    let mut rows = [(a[0].clone(), b[0]), (a[1].clone(), b[1])];

    // row echelon with partial pivoting
    let mut pivots: Vec<usize> = Vec::new();
    let mut rank = 0usize;
    for col in 0..f {
        let (best_row, best_val) = (rank..rows.len())
            .map(|r| (r, rows[r].0[col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if best_val < 1e-12 {
            continue;
        }
        rows.swap(rank, best_row);
        let pivot = rows[rank].0[col];
        for r in 0..rows.len() {
            if r != rank {
                let factor = rows[r].0[col] / pivot;
                if factor != 0.0 {
                    for k in 0..f {
                        let upd = rows[rank].0[k] * factor;
                        rows[r].0[k] -= upd;
                    }
                    let upd = rows[rank].1 * factor;
                    rows[r].1 -= upd;
                }
            }
        }
        pivots.push(col);
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    // inconsistency: zero row with nonzero rhs
    for (row, rhs) in rows.iter().skip(rank) {
        if row.iter().all(|v| v.abs() < 1e-9) && rhs.abs() > 1e-9 {
            return None;
        }
    }

    let mut particular = vec![0.0; f];
    for (r, &pc) in pivots.iter().enumerate() {
        particular[pc] = rows[r].1 / rows[r].0[pc];
    }

    let mut nullspace = Vec::new();
    for col in 0..f {
        if pivots.contains(&col) {
            continue;
        }
        let mut v = vec![0.0; f];
        v[col] = 1.0;
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = -rows[r].0[col] / rows[r].0[pc];
        }
        nullspace.push(v);
    }
    Some((particular, nullspace))
}

/// Gaussian elimination with partial pivoting; None on a singular system.
fn solve_dense(h: &mut [Vec<f64>], g: &mut [f64]) -> Option<Vec<f64>> {
    let n = g.len();
    for col in 0..n {
        let (pivot_row, pivot_val) = (col..n)
            .map(|r| (r, h[r][col].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        if pivot_val < 1e-12 {
            return None;
        }
        h.swap(col, pivot_row);
        g.swap(col, pivot_row);
        let pivot = h[col].clone();
        for r in col + 1..n {
            let factor = h[r][col] / pivot[col];
            if factor != 0.0 {
                for (hv, pv) in h[r].iter_mut().zip(&pivot).skip(col) {
                    *hv -= pv * factor;
                }
                let upd = g[col] * factor;
                g[r] -= upd;
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = g[row];
        for k in row + 1..n {
            acc -= h[row][k] * x[k];
        }
        x[row] = acc / h[row][row];
    }
    Some(x)
}

// ---------------------------------------------------------------------------
// Brute-force parent/child labeling oracle

/// Labels every categorical column by scanning all table pairs directly:
/// a column is interesting iff another table carries one of the column's
/// values as a constraint and lists a stem-matching subject. Keyed by
/// (subject, attribute); generator corpora keep attribute names table-unique
/// so the key pins down the column.
pub fn brute_force_labels(corpus: &[TableRecord]) -> BTreeMap<(String, String), bool> {
    let mut out = BTreeMap::new();
    for table in corpus {
        let subject_key = subject_stem(&table.subject);
        for column in table.categorical_columns() {
            let values: std::collections::BTreeSet<String> = column
                .cells
                .iter()
                .map(|c| normalize(c))
                .filter(|c| !c.is_empty())
                .collect();
            if values.is_empty() {
                continue;
            }
            let interesting = corpus.iter().any(|other| {
                other.id != table.id
                    && subject_stem(&other.subject) == subject_key
                    && other
                        .metadata
                        .constraints
                        .iter()
                        .any(|constraint| values.contains(constraint))
            });
            out.insert(
                (normalize(&table.subject), normalize(&column.header)),
                interesting,
            );
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Random generators

const SUBJECT_VOCAB: [&str; 8] = [
    "Buildings",
    "Tallest Buildings",
    "Universities",
    "Rivers",
    "Mountains",
    "Bridges",
    "Lakes",
    "Stadiums",
];

const CONSTRAINT_VOCAB: [&str; 8] = [
    "United States",
    "China",
    "Asia",
    "Europe",
    "Japan",
    "California",
    "Africa",
    "Texas",
];

const FILLER_VOCAB: [&str; 10] = [
    "red", "blue", "green", "amber", "teal", "coral", "ivory", "slate", "olive", "plum",
];

/// A randomized corpus of up to `max_tables` tables with overlapping
/// subjects, constraints that sometimes appear inside categorical columns
/// (including a table's own constraint, to exercise the self-child rule),
/// and table-unique attribute names.
pub fn random_corpus<R: Rng>(rng: &mut R, max_tables: usize) -> Vec<TableRecord> {
    let n_tables = rng.gen_range(2..=max_tables.max(2));
    let mut corpus = Vec::with_capacity(n_tables);
    for t in 0..n_tables {
        let subject = SUBJECT_VOCAB[rng.gen_range(0..SUBJECT_VOCAB.len())].to_string();
        let n_constraints = rng.gen_range(0..=2);
        let constraints: Vec<String> = (0..n_constraints)
            .map(|_| normalize(CONSTRAINT_VOCAB[rng.gen_range(0..CONSTRAINT_VOCAB.len())]))
            .collect();

        let mut columns = vec![Column {
            header: format!("Subject{t}"),
            kind: ColumnKind::Subject,
            cells: (0..5).map(|i| format!("entity {t} {i}")).collect(),
        }];
        let n_categorical = rng.gen_range(1..=3);
        for col in 0..n_categorical {
            let n_cells = rng.gen_range(3..=10);
            let cells: Vec<String> = (0..n_cells)
                .map(|_| {
                    let roll: f64 = rng.gen();
                    if roll < 0.35 {
                        CONSTRAINT_VOCAB[rng.gen_range(0..CONSTRAINT_VOCAB.len())].to_string()
                    } else if roll < 0.45 && !constraints.is_empty() {
                        // a table's own constraint value in its own column
                        constraints[rng.gen_range(0..constraints.len())].clone()
                    } else {
                        FILLER_VOCAB[rng.gen_range(0..FILLER_VOCAB.len())].to_string()
                    }
                })
                .collect();
            columns.push(Column {
                header: format!("h{t}c{col}"),
                kind: ColumnKind::Categorical,
                cells,
            });
        }

        corpus.push(TableRecord {
            id: format!("t{t:03}"),
            subject,
            subject_col: 0,
            columns,
            metadata: TableMeta {
                constraints,
                ranking_criterion: None,
                page_title: format!("List of Table {t}"),
            },
        });
    }
    corpus
}

/// A random small ν-SVM instance: distinct points in the unit cube with
/// both classes present, a log-uniform γ, and a feasible ν.
pub fn random_svm_instance<R: Rng>(
    rng: &mut R,
    max_points: usize,
    dim: usize,
) -> (Vec<Vec<f64>>, Vec<f64>, f64, f64) {
    let ell = rng.gen_range(3..=max_points.max(3));
    let points: Vec<Vec<f64>> = (0..ell)
        .map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let mut labels: Vec<f64> = (0..ell)
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect();
    // force both classes
    labels[0] = 1.0;
    labels[1] = -1.0;
    let gamma = 10f64.powf(rng.gen_range(-1.0..1.0));
    let pos = labels.iter().filter(|y| **y > 0.0).count();
    let bound = 2.0 * pos.min(ell - pos) as f64 / ell as f64;
    let nu = rng.gen_range(0.05..=bound.max(0.051));
    (points, labels, gamma, nu.min(bound))
}

/// Two Gaussian-ish blobs in the unit square, one per class.
pub fn random_blobs<R: Rng>(
    rng: &mut R,
    per_class: usize,
    spread: f64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..per_class {
        let angle = i as f64;
        points.push(vec![
            (0.25 + spread * (angle.sin() * rng.gen::<f64>() - 0.5)).clamp(0.0, 1.0),
            (0.25 + spread * (angle.cos() * rng.gen::<f64>() - 0.5)).clamp(0.0, 1.0),
        ]);
        labels.push(1.0);
        points.push(vec![
            (0.75 + spread * (angle.cos() * rng.gen::<f64>() - 0.5)).clamp(0.0, 1.0),
            (0.75 + spread * (angle.sin() * rng.gen::<f64>() - 0.5)).clamp(0.0, 1.0),
        ]);
        labels.push(-1.0);
    }
    (points, labels)
}
