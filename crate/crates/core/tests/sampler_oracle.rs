//! Two-pass labeling vs. the brute-force all-pairs oracle, on randomized
//! corpora, plus witness re-checkability.

use catmine_core::model::Label;
use catmine_core::sampler::generate_samples;
use catmine_core::testkit::{brute_force_labels, random_corpus};
use catmine_core::text::normalize;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::collections::BTreeMap;

#[test]
fn two_pass_equals_brute_force_on_random_corpora() {
    let mut rng = ChaCha12Rng::seed_from_u64(9001);
    for round in 0..30 {
        let corpus = random_corpus(&mut rng, 50);
        let (samples, _) = generate_samples(&corpus);
        let oracle = brute_force_labels(&corpus);

        // attribute headers are table-unique, so (subject, attribute) keys
        // identify columns exactly
        let mut ours: BTreeMap<(String, String), bool> = BTreeMap::new();
        for sample in samples.iter() {
            ours.insert(
                (normalize(&sample.subject), normalize(&sample.attribute)),
                sample.label == Label::Interesting,
            );
        }
        assert_eq!(
            ours, oracle,
            "round {round}: label disagreement on a {}-table corpus",
            corpus.len()
        );
    }
}

#[test]
fn witnesses_are_recheckable_against_the_corpus() {
    let mut rng = ChaCha12Rng::seed_from_u64(77);
    for _ in 0..10 {
        let corpus = random_corpus(&mut rng, 30);
        let (samples, _) = generate_samples(&corpus);
        for sample in &samples.interesting {
            let witness = sample
                .witness
                .as_deref()
                .expect("interesting sample must carry a witness");
            // some other table must carry the witness as a constraint and
            // list a stem-matching subject
            let key = catmine_core::text::subject_stem(&sample.subject);
            let supported = corpus.iter().any(|table| {
                catmine_core::text::subject_stem(&table.subject) == key
                    && table.metadata.constraints.iter().any(|c| c == witness)
            });
            assert!(supported, "witness {witness:?} has no supporting table");
        }
        for sample in &samples.non_interesting {
            assert!(sample.witness.is_none());
        }
    }
}

#[test]
fn label_multiset_is_stable_under_corpus_shuffle() {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha12Rng::seed_from_u64(123);
    let mut corpus = random_corpus(&mut rng, 25);
    let (baseline, _) = generate_samples(&corpus);
    let mut key = |s: &catmine_core::model::Sample| (s.pair_key(), s.label);
    let mut expected: Vec<_> = baseline.iter().map(&mut key).collect();
    expected.sort();

    for _ in 0..5 {
        corpus.shuffle(&mut rng);
        let (shuffled, _) = generate_samples(&corpus);
        let mut got: Vec<_> = shuffled.iter().map(&mut key).collect();
        got.sort();
        assert_eq!(expected, got);
    }
}
