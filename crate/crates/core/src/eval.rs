//! Classification metrics, assessment-based ground truth, Fleiss' kappa,
//! and corpus statistics.

use crate::error::{Error, Result};
use crate::model::Label;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One evaluator's vote on one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vote {
    Interesting,
    NonInteresting,
    NotSure,
}

impl Vote {
    pub fn parse(s: &str) -> Option<Vote> {
        match s.trim() {
            "I" | "i" | "interesting" => Some(Vote::Interesting),
            "N" | "n" | "non_interesting" | "non-interesting" => Some(Vote::NonInteresting),
            "U" | "u" | "not_sure" | "not-sure" => Some(Vote::NotSure),
            _ => None,
        }
    }

    fn index(self) -> usize {
        match self {
            Vote::Interesting => 0,
            Vote::NonInteresting => 1,
            Vote::NotSure => 2,
        }
    }
}

/// Samples × evaluators grid of votes. Rectangular, every cell filled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssessmentMatrix {
    pub sample_ids: Vec<String>,
    pub votes: Vec<Vec<Vote>>,
}

impl AssessmentMatrix {
    pub fn new(sample_ids: Vec<String>, votes: Vec<Vec<Vote>>) -> Result<AssessmentMatrix> {
        if sample_ids.len() != votes.len() {
            return Err(Error::InvalidInput(
                "assessment ids and vote rows differ in length".into(),
            ));
        }
        let Some(width) = votes.first().map(|r| r.len()) else {
            return Err(Error::InvalidInput("assessment matrix is empty".into()));
        };
        if width == 0 || votes.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidInput(
                "assessment matrix must be rectangular with at least one evaluator".into(),
            ));
        }
        Ok(AssessmentMatrix { sample_ids, votes })
    }

    pub fn evaluators(&self) -> usize {
        self.votes.first().map_or(0, |r| r.len())
    }

    pub fn samples(&self) -> usize {
        self.votes.len()
    }

    /// CSV with a header row: `id,e1,e2,...` and votes in {I, N, U}.
    pub fn load_csv(path: &Path) -> Result<AssessmentMatrix> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<AssessmentMatrix> {
        let mut csv_reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut ids = Vec::new();
        let mut votes = Vec::new();
        for (index, record) in csv_reader.records().enumerate() {
            let line = index + 2; // 1-based, after the header
            let record = record.map_err(|e| Error::Assessment {
                line,
                message: e.to_string(),
            })?;
            let mut fields = record.iter();
            let id = fields.next().unwrap_or("").to_string();
            if id.is_empty() {
                return Err(Error::Assessment {
                    line,
                    message: "missing sample id".into(),
                });
            }
            let row: Vec<Vote> = fields
                .map(|f| {
                    Vote::parse(f).ok_or_else(|| Error::Assessment {
                        line,
                        message: format!("bad vote {f:?} (expected I, N, or U)"),
                    })
                })
                .collect::<Result<_>>()?;
            ids.push(id);
            votes.push(row);
        }
        AssessmentMatrix::new(ids, votes)
    }
}

/// Ground truth at one agreement level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroundTruth {
    /// Minimum number of agreeing evaluators.
    pub level: usize,
    pub user_pos: Vec<String>,
    pub user_neg: Vec<String>,
    pub excluded: Vec<String>,
}

/// Majority ground truth: a sample gets label L when at least `x` evaluators
/// vote L. Winning not-sure votes and samples without any x-majority are
/// excluded.
pub fn majority_ground_truth(m: &AssessmentMatrix, x: usize) -> Result<GroundTruth> {
    let y = m.evaluators();
    if 2 * x <= y {
        return Err(Error::InvalidInput(format!(
            "agreement level {x} must be a strict majority of {y} evaluators"
        )));
    }
    let mut truth = GroundTruth {
        level: x,
        user_pos: Vec::new(),
        user_neg: Vec::new(),
        excluded: Vec::new(),
    };
    for (id, row) in m.sample_ids.iter().zip(&m.votes) {
        let mut counts = [0usize; 3];
        for vote in row {
            counts[vote.index()] += 1;
        }
        // x > y/2, so at most one choice can reach x
        if counts[Vote::Interesting.index()] >= x {
            truth.user_pos.push(id.clone());
        } else if counts[Vote::NonInteresting.index()] >= x {
            truth.user_neg.push(id.clone());
        } else {
            truth.excluded.push(id.clone());
        }
    }
    Ok(truth)
}

/// Per-class metrics; `None` marks an undefined value (class never appears
/// in the truth, or never predicted) reported as "n/a", not 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

/// Confusion counts with "interesting" as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

/// Full classification report over a prediction/truth pairing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub interesting: ClassMetrics,
    pub non_interesting: ClassMetrics,
    pub accuracy: f64,
    pub confusion: Confusion,
}

fn metrics_for(correct: usize, predicted: usize, truth: usize) -> ClassMetrics {
    let precision = (predicted > 0).then(|| correct as f64 / predicted as f64);
    let recall = (truth > 0).then(|| correct as f64 / truth as f64);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    ClassMetrics {
        precision,
        recall,
        f1,
    }
}

/// Standard per-class precision/recall/F1 and overall accuracy.
pub fn class_metrics(predictions: &[Label], truth: &[Label]) -> Result<ClassReport> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            left: predictions.len(),
            right: truth.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::InvalidInput("no samples to score".into()));
    }
    let mut confusion = Confusion {
        true_pos: 0,
        false_pos: 0,
        true_neg: 0,
        false_neg: 0,
    };
    for (p, t) in predictions.iter().zip(truth) {
        match (p, t) {
            (Label::Interesting, Label::Interesting) => confusion.true_pos += 1,
            (Label::Interesting, Label::NonInteresting) => confusion.false_pos += 1,
            (Label::NonInteresting, Label::NonInteresting) => confusion.true_neg += 1,
            (Label::NonInteresting, Label::Interesting) => confusion.false_neg += 1,
        }
    }
    let interesting = metrics_for(
        confusion.true_pos,
        confusion.true_pos + confusion.false_pos,
        confusion.true_pos + confusion.false_neg,
    );
    let non_interesting = metrics_for(
        confusion.true_neg,
        confusion.true_neg + confusion.false_neg,
        confusion.true_neg + confusion.false_pos,
    );
    Ok(ClassReport {
        interesting,
        non_interesting,
        accuracy: (confusion.true_pos + confusion.true_neg) as f64 / confusion.total() as f64,
        confusion,
    })
}

/// Fleiss' kappa over the three vote categories, with the large-sample 95%
/// confidence interval and per-category kappas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaReport {
    pub kappa: f64,
    pub ci95: (f64, f64),
    pub standard_error: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    /// Per-category kappa in vote order (interesting, non-interesting,
    /// not-sure).
    pub per_category: [f64; 3],
}

/// Chance-corrected multi-rater agreement with equal rater count per item.
pub fn fleiss_kappa(m: &AssessmentMatrix) -> Result<KappaReport> {
    let n_items = m.samples();
    let n_raters = m.evaluators();
    if n_items < 2 || n_raters < 2 {
        return Err(Error::InvalidInput(
            "fleiss_kappa needs at least 2 samples and 2 evaluators".into(),
        ));
    }
    let n = n_raters as f64;
    let big_n = n_items as f64;

    // category shares p_j and per-item agreement P_i
    let mut category_totals = [0.0f64; 3];
    let mut p_bar = 0.0;
    let mut item_counts: Vec<[f64; 3]> = Vec::with_capacity(n_items);
    for row in &m.votes {
        let mut counts = [0.0f64; 3];
        for vote in row {
            counts[vote.index()] += 1.0;
        }
        let agreement: f64 = counts.iter().map(|c| c * (c - 1.0)).sum::<f64>() / (n * (n - 1.0));
        p_bar += agreement / big_n;
        for (total, c) in category_totals.iter_mut().zip(&counts) {
            *total += c;
        }
        item_counts.push(counts);
    }
    let p: [f64; 3] = {
        let mut out = [0.0; 3];
        for (o, t) in out.iter_mut().zip(&category_totals) {
            *o = t / (big_n * n);
        }
        out
    };
    let p_e: f64 = p.iter().map(|pj| pj * pj).sum();

    let kappa = if (1.0 - p_e).abs() < 1e-15 {
        // all votes in one category: perfect observed agreement
        if (p_bar - 1.0).abs() < 1e-12 {
            1.0
        } else {
            f64::NAN
        }
    } else {
        (p_bar - p_e) / (1.0 - p_e)
    };

    // large-sample variance of the overall kappa (null-model form)
    let sum_p3: f64 = p.iter().map(|pj| pj * pj * pj).sum();
    let variance = if (1.0 - p_e).abs() < 1e-15 {
        0.0
    } else {
        2.0 / (big_n * n * (n - 1.0)) * (p_e - (2.0 * n - 3.0) * p_e * p_e
            + 2.0 * (n - 2.0) * sum_p3)
            / ((1.0 - p_e) * (1.0 - p_e))
    };
    let standard_error = variance.max(0.0).sqrt();
    let ci95 = (kappa - 1.96 * standard_error, kappa + 1.96 * standard_error);

    // per-category kappa
    let mut per_category = [0.0f64; 3];
    for j in 0..3 {
        let pj = p[j];
        let qj = 1.0 - pj;
        if pj * qj < 1e-15 {
            per_category[j] = 1.0;
            continue;
        }
        let sum_nij: f64 = item_counts.iter().map(|c| c[j] * (n - c[j])).sum();
        per_category[j] = 1.0 - sum_nij / (big_n * n * (n - 1.0) * pj * qj);
    }

    Ok(KappaReport {
        kappa,
        ci95,
        standard_error,
        observed_agreement: p_bar,
        expected_agreement: p_e,
        per_category,
    })
}

/// λ = sample mean, and the relative sum-squared error between the empirical
/// pmf and the Poisson(λ) pmf over the observed support.
pub fn poisson_fit(counts: &[u64]) -> Result<(f64, f64)> {
    if counts.is_empty() {
        return Err(Error::InvalidInput("poisson_fit needs at least one count".into()));
    }
    let n = counts.len() as f64;
    let lambda = counts.iter().map(|&c| c as f64).sum::<f64>() / n;

    let mut freq: std::collections::BTreeMap<u64, f64> = std::collections::BTreeMap::new();
    for &c in counts {
        *freq.entry(c).or_insert(0.0) += 1.0 / n;
    }
    let mut sse = 0.0;
    let mut norm = 0.0;
    for (&k, &empirical) in &freq {
        let diff = empirical - poisson_pmf(lambda, k);
        sse += diff * diff;
        norm += empirical * empirical;
    }
    Ok((lambda, sse / norm))
}

fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    // iterative product; support values here are small
    let mut p = (-lambda).exp();
    for i in 1..=k {
        p *= lambda / i as f64;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_score_one() {
        let truth = vec![Label::Interesting, Label::NonInteresting, Label::Interesting];
        let report = class_metrics(&truth, &truth).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.interesting.precision, Some(1.0));
        assert_eq!(report.interesting.recall, Some(1.0));
        assert_eq!(report.interesting.f1, Some(1.0));
        assert_eq!(report.non_interesting.f1, Some(1.0));
    }

    /// The 9/9 agreement row reconstructs from a confusion matrix with
    /// 5 negatives (all predicted negative) and 6 positives (one predicted
    /// negative): userNeg recall 100, precision 83.33; userPos recall 83.33,
    /// precision 100; both F1 90.9; accuracy 90.9.
    #[test]
    fn table_row_from_reconstructed_confusion() {
        let truth: Vec<Label> = std::iter::repeat_n(Label::NonInteresting, 5)
            .chain(std::iter::repeat_n(Label::Interesting, 6))
            .collect();
        let mut predictions = truth.clone();
        predictions[5] = Label::NonInteresting; // one positive missed
        let report = class_metrics(&predictions, &truth).unwrap();

        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(report.non_interesting.recall.unwrap(), 1.0));
        assert!(close(report.non_interesting.precision.unwrap(), 5.0 / 6.0));
        assert!(close(report.non_interesting.f1.unwrap(), 10.0 / 11.0));
        assert!(close(report.interesting.recall.unwrap(), 5.0 / 6.0));
        assert!(close(report.interesting.precision.unwrap(), 1.0));
        assert!(close(report.interesting.f1.unwrap(), 10.0 / 11.0));
        assert!(close(report.accuracy, 10.0 / 11.0));
        // rounded to the printed two decimals
        assert_eq!(format!("{:.2}", report.non_interesting.precision.unwrap() * 100.0), "83.33");
        assert_eq!(format!("{:.1}", report.accuracy * 100.0), "90.9");
    }

    #[test]
    fn single_wrong_sample_scores_zero() {
        let report =
            class_metrics(&[Label::Interesting], &[Label::NonInteresting]).unwrap();
        assert_eq!(report.accuracy, 0.0);
        // interesting never occurs in truth: recall is absent, not zero
        assert_eq!(report.interesting.recall, None);
        assert_eq!(report.interesting.precision, Some(0.0));
        // non-interesting never predicted: precision absent
        assert_eq!(report.non_interesting.precision, None);
        assert_eq!(report.non_interesting.recall, Some(0.0));
    }

    #[test]
    fn f1_zero_exactly_when_precision_times_recall_zero() {
        // both metrics defined and positive
        let report = class_metrics(
            &[Label::NonInteresting, Label::Interesting, Label::Interesting],
            &[Label::Interesting, Label::Interesting, Label::NonInteresting],
        )
        .unwrap();
        assert_eq!(report.interesting.precision, Some(0.5));
        assert_eq!(report.interesting.recall, Some(0.5));
        assert_eq!(report.interesting.f1, Some(0.5));
        // both defined, both zero: crossed predictions
        let report = class_metrics(
            &[Label::NonInteresting, Label::Interesting],
            &[Label::Interesting, Label::NonInteresting],
        )
        .unwrap();
        assert_eq!(report.interesting.precision, Some(0.0));
        assert_eq!(report.interesting.recall, Some(0.0));
        assert_eq!(report.interesting.f1, Some(0.0));
        // micro accuracy is (TP+TN)/total
        assert_eq!(report.accuracy, 0.0);
        assert_eq!(report.confusion.total(), 2);
    }

    fn matrix(rows: &[(&str, &[Vote])]) -> AssessmentMatrix {
        AssessmentMatrix::new(
            rows.iter().map(|(id, _)| id.to_string()).collect(),
            rows.iter().map(|(_, votes)| votes.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn majority_thresholds() {
        use Vote::*;
        // 9 evaluators, 7 vote interesting
        let votes: Vec<Vote> = std::iter::repeat_n(Interesting, 7)
            .chain([NonInteresting, NotSure])
            .collect();
        let m = matrix(&[("s1", &votes)]);
        for x in [5, 6, 7] {
            let gt = majority_ground_truth(&m, x).unwrap();
            assert_eq!(gt.user_pos, vec!["s1"]);
        }
        let gt = majority_ground_truth(&m, 8).unwrap();
        assert_eq!(gt.excluded, vec!["s1"]);

        // winning not-sure excludes the sample
        let votes: Vec<Vote> = std::iter::repeat_n(NotSure, 6)
            .chain([Interesting, Interesting, NonInteresting])
            .collect();
        let m = matrix(&[("s2", &votes)]);
        let gt = majority_ground_truth(&m, 6).unwrap();
        assert_eq!(gt.excluded, vec!["s2"]);

        // 4/4/1 split never reaches x = 5
        let votes: Vec<Vote> = std::iter::repeat_n(Interesting, 4)
            .chain(std::iter::repeat_n(NonInteresting, 4))
            .chain([NotSure])
            .collect();
        let m = matrix(&[("s3", &votes)]);
        let gt = majority_ground_truth(&m, 5).unwrap();
        assert_eq!(gt.excluded, vec!["s3"]);

        // x must be a strict majority
        assert!(majority_ground_truth(&m, 4).is_err());
    }

    #[test]
    fn majority_is_monotone_in_x() {
        use Vote::*;
        let m = matrix(&[
            ("a", &[Interesting, Interesting, Interesting, NonInteresting, NotSure]),
            ("b", &[NonInteresting, NonInteresting, NonInteresting, NonInteresting, Interesting]),
            ("c", &[NotSure, NotSure, NotSure, Interesting, NonInteresting]),
        ]);
        let mut previous: Option<GroundTruth> = None;
        for x in 3..=5 {
            let gt = majority_ground_truth(&m, x).unwrap();
            if let Some(prev) = previous {
                for id in &gt.user_pos {
                    assert!(prev.user_pos.contains(id));
                }
                for id in &gt.user_neg {
                    assert!(prev.user_neg.contains(id));
                }
            }
            previous = Some(gt);
        }
    }

    #[test]
    fn kappa_unanimous_is_one() {
        use Vote::*;
        let m = matrix(&[
            ("a", &[Interesting, Interesting, Interesting]),
            ("b", &[NonInteresting, NonInteresting, NonInteresting]),
        ]);
        let report = fleiss_kappa(&m).unwrap();
        assert_eq!(report.kappa, 1.0);

        // even fully one-category input
        let m = matrix(&[
            ("a", &[Interesting, Interesting]),
            ("b", &[Interesting, Interesting]),
        ]);
        assert_eq!(fleiss_kappa(&m).unwrap().kappa, 1.0);
    }

    /// 2 samples × 2 raters with votes (A,A) and (A,B): P̄ = 1/2,
    /// p_A = 3/4, p_B = 1/4, P̄e = 10/16, κ = (1/2 − 5/8)/(3/8) = −1/3.
    #[test]
    fn kappa_hand_expanded_case() {
        use Vote::*;
        let m = matrix(&[
            ("a", &[Interesting, Interesting]),
            ("b", &[Interesting, NonInteresting]),
        ]);
        let report = fleiss_kappa(&m).unwrap();
        assert!((report.kappa - (-1.0 / 3.0)).abs() < 1e-12);
        assert!((report.observed_agreement - 0.5).abs() < 1e-12);
        assert!((report.expected_agreement - 0.625).abs() < 1e-12);
    }

    #[test]
    fn kappa_invariances() {
        use Vote::*;
        let rows: Vec<Vec<Vote>> = vec![
            vec![Interesting, NonInteresting, Interesting],
            vec![NotSure, NotSure, Interesting],
            vec![NonInteresting, NonInteresting, NonInteresting],
            vec![Interesting, Interesting, NotSure],
        ];
        let ids: Vec<String> = (0..rows.len()).map(|i| format!("s{i}")).collect();
        let base = AssessmentMatrix::new(ids.clone(), rows.clone()).unwrap();
        let k0 = fleiss_kappa(&base).unwrap().kappa;

        // permute samples
        let m = AssessmentMatrix::new(
            ids.iter().rev().cloned().collect(),
            rows.iter().rev().cloned().collect(),
        )
        .unwrap();
        assert!((fleiss_kappa(&m).unwrap().kappa - k0).abs() < 1e-12);

        // permute evaluators
        let m = AssessmentMatrix::new(
            ids.clone(),
            rows.iter()
                .map(|r| vec![r[2], r[0], r[1]])
                .collect(),
        )
        .unwrap();
        assert!((fleiss_kappa(&m).unwrap().kappa - k0).abs() < 1e-12);

        // relabel categories (swap interesting and not-sure)
        let swap = |v: Vote| match v {
            Interesting => NotSure,
            NotSure => Interesting,
            other => other,
        };
        let m = AssessmentMatrix::new(
            ids,
            rows.iter().map(|r| r.iter().map(|v| swap(*v)).collect()).collect(),
        )
        .unwrap();
        assert!((fleiss_kappa(&m).unwrap().kappa - k0).abs() < 1e-12);
    }

    #[test]
    fn csv_parsing() {
        let csv = "id,e1,e2,e3\nbuildings:country,I,I,N\nbuildings:city,U,N,N\n";
        let m = AssessmentMatrix::read_csv(std::io::Cursor::new(csv)).unwrap();
        assert_eq!(m.samples(), 2);
        assert_eq!(m.evaluators(), 3);
        assert_eq!(m.sample_ids[0], "buildings:country");
        assert_eq!(m.votes[1][0], Vote::NotSure);

        let bad = "id,e1\ns1,X\n";
        assert!(matches!(
            AssessmentMatrix::read_csv(std::io::Cursor::new(bad)),
            Err(Error::Assessment { line: 2, .. })
        ));
    }

    #[test]
    fn poisson_fit_basics() {
        let (lambda, _) = poisson_fit(&[2, 2, 2, 2]).unwrap();
        assert_eq!(lambda, 2.0);
        let (lambda, sse) = poisson_fit(&[5]).unwrap();
        assert_eq!(lambda, 5.0);
        assert!(sse.is_finite() && sse >= 0.0);
        assert!(poisson_fit(&[]).is_err());
    }
}
