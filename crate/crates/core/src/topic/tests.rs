use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::eventlog::Corpus;
use crate::synth::planted_topics;

fn docs(sentences: &[&str]) -> Vec<(String, Vec<String>)> {
    sentences
        .iter()
        .enumerate()
        .map(|(i, s)| (format!("d{i}"), s.chars().map(|c| c.to_string()).collect()))
        .collect()
}

fn fast(k: usize, seed: u64) -> LdaConfig {
    LdaConfig::new(k).iterations(300, 100).seed(seed)
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn assert_stochastic(rows: &[Vec<f64>]) {
    for r in rows {
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(r.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn unigram_and_bigram_counts() {
    let d = docs(&["ENE"]);
    let m1 = DocTermMatrix::build(&d, 1).unwrap();
    assert_eq!((m1.count(0, "E"), m1.count(0, "N")), (2, 1));
    let m2 = DocTermMatrix::build(&d, 2).unwrap();
    assert_eq!((m2.count(0, "E_N"), m2.count(0, "N_E")), (1, 1));
    assert_eq!(m2.num_terms(), 2);
}

#[test]
fn short_documents_are_dropped() {
    let m = DocTermMatrix::build(&docs(&["AB", "A", "ABC"]), 2).unwrap();
    assert_eq!(m.doc_ids, vec!["d0", "d2"]);
    assert_eq!(m.dropped, vec!["d1"]);
    assert!(DocTermMatrix::build(&docs(&["A", "B"]), 2).is_err());
    assert!(DocTermMatrix::build(&docs(&["A"]), 0).is_err());
}

#[test]
fn corpus_documents() {
    let c = Corpus::from_strs(&[&["x", "y"], &["y"]]);
    let m = build_docs(&c, 1).unwrap();
    assert_eq!(m.doc_ids, vec!["0", "1"]);
    assert_eq!(m.num_tokens(), 3);
}

#[test]
fn fits_are_stochastic_and_deterministic() {
    let p = planted_topics(1, 30, 3, 8, 40, 0.9);
    let dtm = DocTermMatrix::build(&p.docs, 1).unwrap();
    let a = fit_lda(&dtm, fast(3, 7)).unwrap();
    let b = fit_lda(&dtm, fast(3, 7)).unwrap();
    assert_eq!(a, b);
    assert_stochastic(&a.phi);
    assert_stochastic(&a.theta);
    assert_eq!(a.log_likelihoods.len(), 200);
    assert!((a.alpha - 50.0 / 3.0).abs() < 1e-12);
    let c = fit_lda(&dtm, fast(3, 8)).unwrap();
    assert_ne!(a.phi, c.phi);
}

#[test]
fn bad_configs_are_rejected() {
    let dtm = DocTermMatrix::build(&docs(&["ABAB", "BABA"]), 1).unwrap();
    assert!(fit_lda(&dtm, LdaConfig::new(1)).is_err());
    assert!(fit_lda(&dtm, LdaConfig::new(2).iterations(10, 10)).is_err());
    let mut neg = LdaConfig::new(2);
    neg.beta = 0.0;
    assert!(fit_lda(&dtm, neg).is_err());
    // more topics than terms only warns
    assert!(fit_lda(&dtm, fast(3, 0)).is_ok());
}

#[test]
fn recovers_planted_topics() {
    let p = planted_topics(3, 60, 3, 10, 80, 0.85);
    let dtm = DocTermMatrix::build(&p.docs, 1).unwrap();
    assert_eq!(dtm.terms, p.terms);
    let m = fit_lda(&dtm, LdaConfig::new(3).iterations(600, 200).seed(1)).unwrap();
    let mut used = vec![false; 3];
    let mut total = 0.0;
    for truth in &p.phi {
        let (best, d) = (0..3)
            .filter(|&t| !used[t])
            .map(|t| (t, tv(truth, &m.phi[t])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        used[best] = true;
        total += d;
    }
    assert!(total / 3.0 < 0.15, "mean TV {}", total / 3.0);
}

#[test]
fn metric_extremes() {
    let same = vec![vec![0.5, 0.5, 0.0], vec![0.5, 0.5, 0.0]];
    let orth = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    assert!((cao2009(&same) - 1.0).abs() < 1e-12);
    assert_eq!(cao2009(&orth), 0.0);
    assert_eq!(deveaud2014(&same), 0.0);
    assert!((deveaud2014(&orth) - 1.0).abs() < 1e-12);
    // equal samples: the harmonic mean is the sample itself
    assert!((griffiths2004(&[-100.0, -100.0, -100.0]) + 100.0).abs() < 1e-9);
    // 1 / mean(1/L) on likelihoods e^-1 and e^-3
    let expected = -((1f64.exp() + 3f64.exp()) / 2.0).ln();
    assert!((griffiths2004(&[-1.0, -3.0]) - expected).abs() < 1e-12);
    // large magnitudes do not overflow
    assert!(griffiths2004(&[-1e5, -1e5 - 1.0]).is_finite());
}

#[test]
fn arun_by_hand() {
    // phi rows orthogonal with norms 0.5·√2 and 1: singular values (1, 0.707)
    let phi = vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0]];
    let theta = vec![vec![0.5, 0.5]];
    let s = [1.0, 0.5f64.sqrt()];
    let c1: Vec<f64> = s.iter().map(|x| x / (s[0] + s[1])).collect();
    let c2 = [0.5, 0.5];
    let expected: f64 = (0..2)
        .map(|i| c1[i] * (c1[i] / c2[i]).ln() + c2[i] * (c2[i] / c1[i]).ln())
        .sum();
    assert!((arun2010(&phi, &theta, &[10]) - expected).abs() < 1e-12);
}

#[test]
fn metrics_ignore_topic_order_and_document_duplication() {
    let p = planted_topics(5, 24, 3, 6, 30, 0.8);
    let dtm = DocTermMatrix::build(&p.docs, 1).unwrap();
    let m = fit_lda(&dtm, fast(4, 2)).unwrap();
    let perm = [2, 0, 3, 1];
    let phi_p: Vec<Vec<f64>> = perm.iter().map(|&t| m.phi[t].clone()).collect();
    let theta_p: Vec<Vec<f64>> = m.theta.iter().map(|r| perm.iter().map(|&t| r[t]).collect()).collect();
    assert!((cao2009(&m.phi) - cao2009(&phi_p)).abs() < 1e-12);
    assert!((deveaud2014(&m.phi) - deveaud2014(&phi_p)).abs() < 1e-12);
    let a = arun2010(&m.phi, &m.theta, &m.doc_lengths);
    assert!((a - arun2010(&phi_p, &theta_p, &m.doc_lengths)).abs() < 1e-9);
    let theta2: Vec<Vec<f64>> = m.theta.iter().chain(&m.theta).cloned().collect();
    let len2: Vec<u64> = m.doc_lengths.iter().chain(&m.doc_lengths).copied().collect();
    assert!((a - arun2010(&m.phi, &theta2, &len2)).abs() < 1e-9);
}

#[test]
fn normalization_and_choice() {
    assert_eq!(min_max(&[2.0, 2.0]), vec![0.5, 0.5]);
    assert_eq!(min_max(&[1.0, 3.0, 2.0]), vec![0.0, 1.0, 0.5]);
    let ks = [2, 3, 4, 5];
    let r = summarize(
        1,
        &ks,
        &[
            (Metric::CaoJuan2009, vec![0.4, 0.0, 0.2, 0.3]),
            (Metric::Deveaud2014, vec![0.1, 0.9, 0.5, 0.2]),
        ],
    );
    assert_eq!(r.chosen_k, 3);
    assert_eq!(r.best_k(Metric::CaoJuan2009), Some(3));
    let r = summarize(
        1,
        &ks,
        &[
            (Metric::Arun2010, vec![0.4, 0.0, 0.2, 0.3]),
            (Metric::Griffiths2004, vec![-9.0, -8.0, -7.0, -6.0]),
        ],
    );
    assert_eq!(r.chosen_k, 5);
    assert!(r.rows.iter().all(|x| (0.0..=1.0).contains(&x.normalized)));
    let flat = summarize(1, &ks, &[(Metric::Arun2010, vec![1.0; 4])]);
    assert_eq!(flat.chosen_k, 2);
}

#[test]
fn planted_scan_minimizes_cao_and_arun_near_truth() {
    let p = planted_topics(11, 60, 3, 10, 80, 0.85);
    let dtm = DocTermMatrix::build(&p.docs, 1).unwrap();
    let ks: Vec<usize> = (2..=8).collect();
    let r = select_k(&dtm, &ks, &Metric::ALL, LdaConfig::new(2).iterations(500, 200).seed(4)).unwrap();
    assert!([3, 4].contains(&r.best_k(Metric::CaoJuan2009).unwrap()), "{r:?}");
    assert!([3, 4].contains(&r.best_k(Metric::Arun2010).unwrap()), "{r:?}");
    assert!(ks.contains(&r.chosen_k));
    assert!(select_k(&dtm, &[], &Metric::ALL, LdaConfig::new(2)).is_err());
    assert!(select_k(&dtm, &[61], &Metric::ALL, LdaConfig::new(2)).is_err());
}

#[test]
fn fold_in_on_training_data_matches_training_entropy() {
    let p = planted_topics(2, 40, 3, 8, 60, 0.85);
    let dtm = DocTermMatrix::build(&p.docs, 1).unwrap();
    let m = fit_lda(&dtm, LdaConfig::new(6).iterations(800, 300).seed(3)).unwrap();
    let train = m.training_entropy(&dtm);
    let held = lda_heldout_entropy(&m, &dtm, 200, 9).unwrap();
    assert!((held - train).abs() < 0.1, "{held} vs {train}");
}

#[test]
fn held_out_entropy_is_finite_for_unseen_terms() {
    let d = docs(&["ABAB", "ABBA", "CCDC", "CDDC", "ABCD"]);
    let dtm = DocTermMatrix::build(&d, 1).unwrap();
    let m = fit_lda(&dtm.subset(&[0, 1]), fast(2, 1)).unwrap();
    let h = lda_heldout_entropy(&m, &dtm.subset(&[2, 3, 4]), 20, 1).unwrap();
    assert!(h.is_finite() && h > 0.0);
    let other = DocTermMatrix::build(&docs(&["XY"]), 1).unwrap();
    assert!(lda_heldout_entropy(&m, &other, 20, 1).is_err());
}

#[test]
fn kfold_entropy_runs_per_k() {
    let p = planted_topics(4, 20, 2, 5, 30, 0.9);
    let dtm = DocTermMatrix::build(&p.docs, 1).unwrap();
    let r = kfold_lda_entropy(&dtm, &[2, 3], 4, fast(2, 5)).unwrap();
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|e| e.folds.len() == 4 && e.mean > 0.0));
    assert_eq!(r, kfold_lda_entropy(&dtm, &[2, 3], 4, fast(2, 5)).unwrap());
}

#[test]
fn argmax_breaks_ties_low() {
    assert_eq!(argmax(&[0.1, 0.7, 0.2]), 1);
    assert_eq!(argmax(&[0.5, 0.5]), 0);
}

#[test]
fn fingerprints_partition_documents() {
    let p = planted_topics(6, 30, 3, 8, 50, 0.9);
    let dtm = DocTermMatrix::build(&p.docs, 1).unwrap();
    let m = fit_lda(&dtm, fast(5, 1)).unwrap();
    let f = extract_fingerprints(&m, 4);
    let mut all: Vec<&String> = f.fingerprints.iter().flat_map(|x| &x.members).collect();
    all.sort();
    let mut ids: Vec<&String> = dtm.doc_ids.iter().collect();
    ids.sort();
    assert_eq!(all, ids);
    assert_eq!(f.assignment.len(), 30);
    assert!(f.distinct() >= 1 && f.distinct() <= 5);
    for fp in &f.fingerprints {
        assert_eq!(fp.top_terms.len(), 4);
        assert!(fp.top_terms.windows(2).all(|w| w[0].1 >= w[1].1));
        assert!(!fp.members.is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn window_counts_sum_to_length(seed in any::<u64>(), w in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d: Vec<(String, Vec<String>)> = (0..8)
            .map(|i| {
                let len = rng.random_range(w..w + 12);
                (format!("d{i}"), (0..len).map(|_| ["a", "b", "c"][rng.random_range(0..3)].to_string()).collect())
            })
            .collect();
        let m = DocTermMatrix::build(&d, w).unwrap();
        for (i, (_, toks)) in d.iter().enumerate() {
            prop_assert_eq!(m.doc_len(i) as usize, toks.len() - w + 1);
        }
    }

    #[test]
    fn every_fit_is_row_stochastic(seed in any::<u64>(), k in 2usize..6) {
        let p = planted_topics(seed, 12, 3, 5, 20, 0.7);
        let dtm = DocTermMatrix::build(&p.docs, 1).unwrap();
        let m = fit_lda(&dtm, LdaConfig::new(k).iterations(40, 10).seed(seed)).unwrap();
        for r in m.phi.iter().chain(&m.theta) {
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
