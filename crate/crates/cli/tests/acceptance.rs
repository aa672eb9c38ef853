//! Acceptance suite: one test per criterion, each printing a pass line
//! (visible with `--nocapture`). Run with
//! `cargo test -p catmine-cli --test acceptance`.

use catmine_core::eval::{class_metrics, fleiss_kappa, AssessmentMatrix, Vote};
use catmine_core::measures::{
    feature_vector_full, max_info_gap, max_info_gap_for, p_diversity_norm, p_peculiarity_norm,
    simpson_peculiarity, unalikeability,
};
use catmine_core::model::{FeatureMask, Label, ValueSet};
use catmine_core::sampler::generate_samples;
use catmine_core::svm::{
    grid_search_cv, train_nu_svm, Dataset, GridSpec, SolverOptions,
};
use catmine_core::testkit::{brute_force_labels, brute_force_nu_svm, random_corpus, random_svm_instance};
use catmine_core::{ingest, pipeline};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::path::{Path, PathBuf};
use std::time::Instant;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn vs(counts: &[(&str, u64)]) -> ValueSet {
    ValueSet::from_counts(counts.iter().map(|(v, c)| (*v, *c))).unwrap()
}

#[track_caller]
fn check(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: expected {expected} ± {tol}, got {actual}"
    );
}

/// Criterion 1: the three reference distributions reproduce all seven
/// measures within ±0.005 (21 assertions), in under a second.
#[test]
fn criterion_1_sample_measures_table() {
    let start = Instant::now();
    let examples = [
        (
            vs(&[("USA", 12), ("Spain", 8), ("Germany", 2), ("China", 2), ("Australia", 2), ("France", 2)]),
            [0.44, 0.43, 0.75, 0.71, 0.74, 0.58, 0.36],
        ),
        (
            vs(&[("USA", 2), ("Germany", 2), ("China", 2), ("Australia", 2), ("France", 2), ("Switzerland", 1), ("Russia", 1)]),
            [0.77, 0.17, 0.28, 0.85, 0.92, 0.33, 0.66],
        ),
        (
            vs(&[("USA", 12), ("Germany", 2), ("China", 2), ("Australia", 2), ("France", 2), ("Switzerland", 1), ("Russia", 1)]),
            [0.48, 0.55, 0.80, 0.67, 0.70, 0.69, 0.49],
        ),
    ];
    let mut assertions = 0;
    for (i, (value_set, expected)) in examples.iter().enumerate() {
        let fv = feature_vector_full(value_set);
        for (slot, want) in expected.iter().enumerate() {
            check(fv.values[slot], *want, 0.005, &format!("example {} slot {slot}", i + 1));
            assertions += 1;
        }
    }
    assert_eq!(assertions, 21);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("criterion 1 PASS: 21/21 measure values reproduced (±0.005) in {elapsed:?}");
}

/// Criterion 2: the four diversity-contrast lists reproduce p̂Var, U and D,
/// validating the corrected p̂Var normalizer.
#[test]
fn criterion_2_diversity_contrast_table() {
    let lists = [
        (vs(&[("USA", 80), ("Spain", 20)]), 0.09, 0.32, 0.32),
        (vs(&[("USA", 60), ("Spain", 40)]), 0.03, 0.48, 0.48),
        (vs(&[("USA", 4), ("Spain", 1)]), 0.63, 0.32, 0.40),
        (vs(&[("USA", 3), ("Spain", 2)]), 0.21, 0.48, 0.60),
    ];
    for (i, (value_set, pvar, u, d)) in lists.iter().enumerate() {
        check(p_diversity_norm(value_set), *pvar, 0.005, &format!("list{} pVar", i + 1));
        check(unalikeability(value_set), *u, 0.005, &format!("list{} U", i + 1));
        check(simpson_peculiarity(value_set), *d, 0.005, &format!("list{} D", i + 1));
    }
    println!("criterion 2 PASS: p-diversity/unalikeability/peculiarity contrasts reproduced (±0.005)");
}

/// Criterion 3: the two peculiarity-vs-info-gap lists reproduce p̂Pec and mIg.
#[test]
fn criterion_3_peculiarity_contrast_table() {
    let big = vs(&[("USA", 90), ("Spain", 10)]);
    check(p_peculiarity_norm(&big), 0.82, 0.005, "list1 pPec");
    check(max_info_gap(&big), 0.98, 0.005, "list1 mIg");
    let small = vs(&[("USA", 9), ("Spain", 1)]);
    check(p_peculiarity_norm(&small), 1.0, 0.005, "list2 pPec");
    check(max_info_gap(&small), 0.95, 0.005, "list2 mIg");
    println!("criterion 3 PASS: p-peculiarity/max-info-gap contrasts reproduced (±0.005)");
}

/// Criterion 4: size sensitivity of max-info-gap at fixed coverage.
#[test]
fn criterion_4_info_gap_size_sensitivity() {
    check(max_info_gap_for(0.2, 10), 0.30, 0.01, "mIg(0.2, 10)");
    check(max_info_gap_for(0.2, 100), 0.65, 0.03, "mIg(0.2, 100)");
    // high-coverage curve is nearly flat across table sizes
    let spread = (10..=100)
        .map(|t| max_info_gap_for(0.9, t))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    assert!(
        spread.1 - spread.0 < 0.05,
        "mIg(0.9, ·) varies by {}",
        spread.1 - spread.0
    );
    // the same points realized through actual value sets
    check(max_info_gap(&vs(&[("a", 2), ("b", 2), ("c", 2), ("d", 2), ("e", 2)])), 0.30, 0.01, "realized T=10");
    check(
        max_info_gap(&vs(&[("a", 20), ("b", 20), ("c", 20), ("d", 20), ("e", 20)])),
        0.65,
        0.03,
        "realized T=100",
    );
    println!("criterion 4 PASS: info-gap size sensitivity matches the reference curve");
}

/// Criterion 5: two-pass labeling equals the brute-force all-pairs oracle on
/// 100 randomized corpora, in under 30 seconds.
#[test]
fn criterion_5_labeling_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(50_000);
    for round in 0..100 {
        let corpus = random_corpus(&mut rng, 50);
        let (samples, _) = generate_samples(&corpus);
        let oracle = brute_force_labels(&corpus);
        let mut ours = std::collections::BTreeMap::new();
        for sample in samples.iter() {
            ours.insert(
                (
                    catmine_core::text::normalize(&sample.subject),
                    catmine_core::text::normalize(&sample.attribute),
                ),
                sample.label == Label::Interesting,
            );
        }
        assert_eq!(ours, oracle, "round {round} disagreement");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    println!("criterion 5 PASS: 100/100 random corpora labeled identically to the all-pairs oracle in {elapsed:?}");
}

/// Criterion 6: solver correctness — oracle equivalence on tiny instances,
/// the ν-property under fuzzing, and infeasible-ν rejection. Under 2 minutes.
#[test]
fn criterion_6_svm_correctness() {
    let start = Instant::now();

    // (a) dual objective vs brute force on >= 200 instances with l <= 6
    let mut rng = ChaCha12Rng::seed_from_u64(60_000);
    let mut worst_gap = 0.0f64;
    for round in 0..200 {
        let (points, labels, gamma, nu) = random_svm_instance(&mut rng, 6, 2);
        let data = Dataset::new(points.clone(), labels.clone()).unwrap();
        let mask = FeatureMask::new(0b11).unwrap();
        let trained = train_nu_svm(&data, nu, gamma, mask, &SolverOptions::precise()).unwrap();
        let oracle = brute_force_nu_svm(&points, &labels, nu, gamma)
            .unwrap_or_else(|| panic!("round {round}: oracle found no solution"));
        let gap = (trained.report.objective - oracle.objective).abs();
        worst_gap = worst_gap.max(gap);
        assert!(gap <= 1e-6, "round {round}: objective gap {gap}");
    }

    // (b) nu-property on >= 500 fuzzed feasible trainings
    let mut rng = ChaCha12Rng::seed_from_u64(60_001);
    for round in 0..500 {
        let (points, labels, gamma, nu) = random_svm_instance(&mut rng, 32, 3);
        let ell = points.len();
        let data = Dataset::new(points, labels).unwrap();
        let mask = FeatureMask::new(0b111).unwrap();
        let trained = train_nu_svm(&data, nu, gamma, mask, &SolverOptions::default())
            .unwrap_or_else(|e| panic!("round {round}: {e}"));
        let slack = 1.0 / ell as f64;
        assert!(
            trained.report.margin_error_fraction() <= nu + slack,
            "round {round}: margin errors {}",
            trained.report.margin_error_fraction()
        );
        assert!(
            trained.report.sv_fraction() >= nu - slack,
            "round {round}: sv fraction {}",
            trained.report.sv_fraction()
        );
    }

    // (c) infeasible nu is rejected
    let data = Dataset::new(
        vec![vec![0.1, 0.1], vec![0.2, 0.3], vec![0.8, 0.9], vec![0.9, 0.7]],
        vec![1.0, -1.0, -1.0, -1.0],
    )
    .unwrap();
    let mask = FeatureMask::new(0b11).unwrap();
    let err = train_nu_svm(&data, 0.51, 1.0, mask, &SolverOptions::default()).unwrap_err();
    assert!(matches!(err, catmine_core::Error::InfeasibleNu { .. }));

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "took {elapsed:?}");
    println!(
        "criterion 6 PASS: 200 oracle matches (worst gap {worst_gap:.2e}), 500 nu-property fuzzes, infeasible nu rejected, in {elapsed:?}"
    );
}

#[derive(serde::Deserialize)]
struct ExpectedLabel {
    #[allow(dead_code)]
    table_id: String,
    subject: String,
    attribute: String,
    label: Label,
    witness: Option<String>,
}

/// Criterion 7: end-to-end on the bundled 30-table corpus — extracted labels
/// equal the hand-derived ground truth and a grid-searched classifier on the
/// planted-signal feature set reaches 0.95 balanced CV accuracy. The
/// published-data clause runs only if the files are present.
#[test]
fn criterion_7_pipeline_end_to_end() {
    let corpus_path = data_dir().join("synthetic_corpus.json");
    let units = ingest::UnitsDictionary::default_units();
    let (samples, skipped, warnings) =
        pipeline::samples_from_corpus(&corpus_path, &units, false).unwrap();
    assert!(skipped.is_empty(), "skipped: {skipped:?}");
    assert!(warnings.is_empty(), "warnings: {warnings:?}");

    // hand-derived ground truth, keyed by (subject, attribute): attribute
    // names in the fixture identify the (table, column) pair uniquely except
    // for deliberate same-label duplicates
    let expected: Vec<ExpectedLabel> = serde_json::from_str(
        &std::fs::read_to_string(data_dir().join("synthetic_labels.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(samples.len(), expected.len(), "sample count");

    let key = |subject: &str, attribute: &str| {
        (
            catmine_core::text::normalize(subject),
            catmine_core::text::normalize(attribute),
        )
    };
    let mut got: Vec<((String, String), Label, Option<String>)> = samples
        .iter()
        .map(|s| (key(&s.subject, &s.attribute), s.label, s.witness.clone()))
        .collect();
    let mut want: Vec<((String, String), Label, Option<String>)> = expected
        .iter()
        .map(|e| (key(&e.subject, &e.attribute), e.label, e.witness.clone()))
        .collect();
    got.sort();
    want.sort();
    for (g, w) in got.iter().zip(want.iter()) {
        assert_eq!(g, w, "label/witness mismatch");
    }
    let positives = samples.interesting.len();
    let negatives = samples.non_interesting.len();

    // planted-signal feature set: coverage, info-gap, peculiarity,
    // p-peculiarity, p-diversity (slots 1, 2, 4, 5, 6)
    let mask = FeatureMask::new(0b111_0110).unwrap();
    let all: Vec<_> = samples.iter().cloned().collect();
    let search = grid_search_cv(
        &all,
        mask,
        &GridSpec::default_grid(),
        424_242,
        &SolverOptions::default(),
    )
    .unwrap();
    assert!(
        search.best_balanced_accuracy >= 0.95,
        "balanced CV accuracy {} below 0.95 (nu {}, gamma {})",
        search.best_balanced_accuracy,
        search.best_nu,
        search.best_gamma
    );

    // published user-study clause: only assertable when the original files
    // are locally available
    let published = std::env::var("CATMINE_PUBLISHED_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|_| data_dir().join("published"));
    let samples_file = published.join("samples.jsonl");
    let assessments_file = published.join("assessments.csv");
    let published_note = if samples_file.exists() && assessments_file.exists() {
        let set = catmine_core::sampler::load_samples_jsonl(&samples_file).unwrap();
        let matrix = AssessmentMatrix::load_csv(&assessments_file).unwrap();
        let (train, test_pos, test_neg) =
            catmine_core::sampler::holdout_split(&set, 0.25, 424_242).unwrap();
        let subfiles = catmine_core::sampler::make_balanced_subfiles(&train, 10).unwrap();
        let combos: Vec<FeatureMask> = vec![FeatureMask::new(0b111_0110).unwrap()];
        let search = catmine_core::svm::search_feature_combinations(
            &subfiles,
            &test_pos,
            &test_neg,
            &combos,
            &GridSpec::default_grid(),
            424_242,
            &SolverOptions::default(),
            catmine_core::svm::SelectionRule::MaxThenSum,
        )
        .unwrap();
        let report = pipeline::evaluate_assessments(
            &search.final_outcome().model,
            &set,
            &matrix,
            &[6],
        )
        .unwrap();
        let accuracy = report.levels[0]
            .report
            .as_ref()
            .expect("6/9 level must keep samples")
            .accuracy;
        assert!(
            (0.74..=0.85).contains(&accuracy),
            "published-data accuracy {accuracy} outside [0.74, 0.85]"
        );
        format!("published-data clause: accuracy {accuracy:.4} in [0.74, 0.85]")
    } else {
        "published-data clause: SKIP (original sample/assessment files unavailable)".to_string()
    };

    println!(
        "criterion 7 PASS: {positives}+{negatives} labels match the hand-derived ground truth; \
         balanced CV accuracy {:.3} >= 0.95; {published_note}",
        search.best_balanced_accuracy
    );
}

/// Criterion 8: the agreement-table row reconstructs exactly, and Fleiss'
/// kappa matches hand-expanded arithmetic.
#[test]
fn criterion_8_metrics_and_kappa() {
    // 9/9 row from its reconstructed confusion matrix: 5 negatives all
    // predicted negative, 6 positives with exactly one miss
    let truth: Vec<Label> = std::iter::repeat_n(Label::NonInteresting, 5)
        .chain(std::iter::repeat_n(Label::Interesting, 6))
        .collect();
    let mut predictions = truth.clone();
    predictions[5] = Label::NonInteresting;
    let report = class_metrics(&predictions, &truth).unwrap();
    let exact = |v: Option<f64>, want: f64| (v.unwrap() - want).abs() < 1e-12;
    assert!(exact(report.non_interesting.recall, 1.0));
    assert!(exact(report.non_interesting.precision, 5.0 / 6.0));
    assert!(exact(report.non_interesting.f1, 10.0 / 11.0));
    assert!(exact(report.interesting.recall, 5.0 / 6.0));
    assert!(exact(report.interesting.precision, 1.0));
    assert!(exact(report.interesting.f1, 10.0 / 11.0));
    assert!((report.accuracy - 10.0 / 11.0).abs() < 1e-12);
    assert_eq!(
        format!("{:.2}", report.non_interesting.precision.unwrap() * 100.0),
        "83.33"
    );

    // unanimous matrix: kappa exactly 1
    let unanimous = AssessmentMatrix::new(
        vec!["a".into(), "b".into()],
        vec![
            vec![Vote::Interesting; 4],
            vec![Vote::NonInteresting; 4],
        ],
    )
    .unwrap();
    assert_eq!(fleiss_kappa(&unanimous).unwrap().kappa, 1.0);

    // 2 samples x 2 raters, votes (A,A) and (A,B): kappa = -1/3 by direct
    // expansion of the formula
    let m = AssessmentMatrix::new(
        vec!["a".into(), "b".into()],
        vec![
            vec![Vote::Interesting, Vote::Interesting],
            vec![Vote::Interesting, Vote::NonInteresting],
        ],
    )
    .unwrap();
    let kappa = fleiss_kappa(&m).unwrap().kappa;
    assert!((kappa - (-1.0 / 3.0)).abs() <= 1e-12, "kappa {kappa}");

    println!("criterion 8 PASS: agreement-row metrics exact, kappa = 1 on unanimity and -1/3 on the 2x2 case");
}

/// Criterion 9: stage reruns with the same seed produce byte-identical
/// artifacts (library level here; the CLI test re-checks through the binary).
#[test]
fn criterion_9_determinism() {
    let units = ingest::UnitsDictionary::default_units();
    let corpus_path = data_dir().join("synthetic_corpus.json");

    let run_all = |dir: &Path| {
        let (samples, _, _) = pipeline::samples_from_corpus(&corpus_path, &units, false).unwrap();
        let samples_path = dir.join("samples.jsonl");
        catmine_core::sampler::save_samples_jsonl(&samples_path, &samples).unwrap();
        let split_dir = dir.join("split");
        pipeline::split_to_files(&samples_path, &split_dir, 0.25, 3, 7, true).unwrap();
        let (artifacts, _) = pipeline::train_to_files(
            &split_dir.join("subfiles"),
            &split_dir.join("test_pos.jsonl"),
            &split_dir.join("test_neg.jsonl"),
            &[FeatureMask::new(0b10).unwrap(), FeatureMask::new(0b110).unwrap()],
            &GridSpec::coarse_grid(),
            7,
            &SolverOptions::default(),
            catmine_core::svm::SelectionRule::MaxThenSum,
            &dir.join("train"),
        )
        .unwrap();
        artifacts
    };

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_all(dir_a.path());
    run_all(dir_b.path());

    let mut compared = 0;
    for rel in [
        "samples.jsonl",
        "split/train.jsonl",
        "split/test_pos.jsonl",
        "split/test_neg.jsonl",
        "split/subfiles/sub_00.jsonl",
        "split/subfiles/sub_01.jsonl",
        "split/subfiles/sub_02.jsonl",
        "split/train.txt",
        "train/final_model.json",
        "train/cv_report.csv",
        "train/selection.json",
        "train/models/combo_002.json",
        "train/models/combo_006.json",
    ] {
        let a = std::fs::read(dir_a.path().join(rel)).unwrap();
        let b = std::fs::read(dir_b.path().join(rel)).unwrap();
        assert_eq!(a, b, "artifact {rel} differs between identical runs");
        compared += 1;
    }
    println!("criterion 9 PASS: {compared} artifacts byte-identical across rerun");
}
