use proptest::prelude::*;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use super::*;
use crate::dataio::{make_synthetic_domain_pair, ShiftSpec};
use crate::model::ArchConfig;
use crate::sticker::StickerConfig;

fn gaussian_1d(n: usize, mean: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_for(seed, 99, 0);
    let d = Normal::new(mean, 1.0).unwrap();
    (0..n).map(|_| vec![d.sample(&mut rng)]).collect()
}

fn gaussian_nd(n: usize, dim: usize, shift: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_for(seed, 98, 0);
    let d = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| (0..dim).map(|j| d.sample(&mut rng) + if j == 0 { shift } else { 0.0 }).collect()).collect()
}

#[test]
fn probe_error_matches_gaussian_bayes_error() {
    // N(0,1) vs N(1,1), equal priors: the Bayes rule thresholds at 1/2.
    let bayes = StatNormal::new(0.0, 1.0).unwrap().cdf(-0.5);
    assert!((bayes - 0.3085).abs() < 1e-4);
    let a = gaussian_1d(5000, 0.0, 1);
    let b = gaussian_1d(5000, 1.0, 2);
    let d = a_distance(&a, &b, 0, FormulaVariant::Standard, &ProbeConfig::default()).unwrap();
    assert!((d.psi - bayes).abs() < 0.03, "psi {} vs Bayes {bayes}", d.psi);
    assert!((d.d_a - 2.0 * (1.0 - 2.0 * bayes)).abs() < 0.12);
}

#[test]
fn same_distribution_is_indistinguishable() {
    let a = gaussian_nd(600, 4, 0.0, 3);
    let b = gaussian_nd(600, 4, 0.0, 4);
    let d = a_distance(&a, &b, 0, FormulaVariant::Standard, &ProbeConfig::default()).unwrap();
    assert!((d.psi - 0.5).abs() < 0.06, "psi {}", d.psi);
    assert!(dsm_from(&d) > 0.85);
}

#[test]
fn separated_gaussians_give_maximal_distance() {
    let a = gaussian_1d(300, -10.0, 5);
    let b = gaussian_1d(300, 10.0, 6);
    let d = a_distance(&a, &b, 0, FormulaVariant::Standard, &ProbeConfig::default()).unwrap();
    assert_eq!(d.psi, 0.0);
    assert_eq!(d.d_a, 2.0);
    assert_eq!(dsm_from(&d), 0.0);
}

#[test]
fn degenerate_features_warn_and_report_chance() {
    let a = vec![vec![1.0, 2.0]; 30];
    let d = a_distance(&a, &a, 0, FormulaVariant::Standard, &ProbeConfig::default()).unwrap();
    assert_eq!(d.psi, 0.5);
    assert_eq!(d.d_a, 0.0);
    assert!(d.warning.is_some());
}

#[test]
fn too_few_samples_rejected() {
    let a = gaussian_1d(19, 0.0, 1);
    let b = gaussian_1d(50, 0.0, 2);
    assert!(a_distance(&a, &b, 0, FormulaVariant::Standard, &ProbeConfig::default()).is_err());
}

#[test]
fn a_distance_is_symmetric_up_to_probe_noise() {
    let a = gaussian_nd(1000, 3, 0.0, 7);
    let b = gaussian_nd(1000, 3, 0.8, 8);
    let p = ProbeConfig::default();
    let ab = a_distance(&a, &b, 4, FormulaVariant::Standard, &p).unwrap();
    let ba = a_distance(&b, &a, 4, FormulaVariant::Standard, &p).unwrap();
    assert!((ab.psi - ba.psi).abs() <= 0.02, "{} vs {}", ab.psi, ba.psi);
}

#[test]
fn formula_variants() {
    assert_eq!(FormulaVariant::Standard.d_a(0.0), 2.0);
    assert_eq!(FormulaVariant::Standard.d_a(0.5), 0.0);
    assert_eq!(FormulaVariant::Standard.d_a(0.7), 0.0);
    assert_eq!(FormulaVariant::PaperVerbatim.d_a(0.5), 0.5);
    assert_eq!(FormulaVariant::PaperVerbatim.d_a(0.0), 0.0);
    assert!((FormulaVariant::PaperVerbatim.d_a(0.25) - 0.375).abs() < 1e-12);
    for v in [FormulaVariant::Standard, FormulaVariant::PaperVerbatim] {
        assert_eq!(v.name().parse::<FormulaVariant>().unwrap(), v);
    }
    assert!("verbatim".parse::<FormulaVariant>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dsm_stays_in_unit_interval(shift in -3.0f64..3.0, seed in 0u64..1000, verbatim in any::<bool>()) {
        let variant = if verbatim { FormulaVariant::PaperVerbatim } else { FormulaVariant::Standard };
        let probe = ProbeConfig { iterations: 60, ..ProbeConfig::default() };
        let a = gaussian_nd(40, 2, 0.0, seed);
        let b = gaussian_nd(40, 2, shift, seed + 1);
        let d = a_distance(&a, &b, seed, variant, &probe).unwrap();
        prop_assert!((0.0..=1.0).contains(&d.psi));
        let g = dsm_from(&d);
        prop_assert!((0.0..=1.0).contains(&g));
    }
}

#[test]
fn stratified_split_is_disjoint_and_proportional() {
    let labels: Vec<usize> = (0..100).map(|i| i % 4).collect();
    let (train, test) = stratified_split(&labels, 0.7, 3);
    assert_eq!(train.len() + test.len(), 100);
    assert!(train.iter().all(|i| !test.contains(i)));
    for c in 0..4 {
        assert_eq!(train.iter().filter(|&&i| labels[i] == c).count(), 18);
    }
    assert_eq!(stratified_split(&labels, 0.7, 3), (train, test));
}

#[test]
fn equalize_keeps_k_seeded_classes() {
    let labels: Vec<usize> = (0..200).map(|i| i % 10).collect();
    let (rows, y) = equalize_classes(&labels, 10, 4, 5);
    assert_eq!(rows.len(), 80);
    assert!(y.iter().all(|&l| l < 4));
    let kept: std::collections::BTreeSet<usize> = rows.iter().map(|&i| labels[i]).collect();
    assert_eq!(kept.len(), 4);
    assert_eq!(equalize_classes(&labels, 10, 4, 5), (rows, y));
    let (all, same) = equalize_classes(&labels[..12], 3, 4, 5);
    assert_eq!(all.len(), 12);
    assert_eq!(same, labels[..12].to_vec());
}

#[test]
fn tsm_of_goal_label_copies_is_near_one() {
    // Four well separated clusters; subsidiary labels copy the cluster index.
    let mut rng = rng_for(1, 97, 0);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..400 {
        let c = i % 4;
        let mut row = vec![0.0; 4];
        row[c] = 3.0;
        x.push(row.iter().map(|v| v + noise.sample(&mut rng)).collect::<Vec<f64>>());
        y.push(c);
    }
    let t = tsm_from_features(&x, &y, 4, Some(4), 0, &ProbeConfig::default()).unwrap();
    assert!(t > 0.97, "tsm {t}");
}

#[test]
fn tsm_of_random_labels_is_near_chance() {
    let x = gaussian_nd(2000, 6, 0.0, 9);
    let mut rng = rng_for(2, 97, 0);
    let y: Vec<usize> = (0..2000).map(|_| rand::Rng::random_range(&mut rng, 0..4)).collect();
    let t = tsm_from_features(&x, &y, 4, None, 0, &ProbeConfig::default()).unwrap();
    assert!((t - 0.25).abs() < 0.06, "tsm {t}");
}

#[test]
fn tsm_needs_two_classes() {
    let x = gaussian_nd(50, 2, 0.0, 1);
    assert!(tsm_from_features(&x, &[0; 50], 1, None, 0, &ProbeConfig::default()).is_err());
}

#[test]
fn accuracy_of_perfect_and_constant_predictions() {
    let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
    let perfect: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| (0..4).map(|k| if k == l { 1.0 } else { 0.0 }).collect())
        .collect();
    assert_eq!(accuracy_of(&perfect, &labels), 1.0);
    let constant = vec![vec![0.0, 5.0, 0.0, 0.0]; 40];
    assert_eq!(accuracy_of(&constant, &labels), 0.25);
}

fn toy_setup() -> (Dataset<f32>, ModelBundle<f32>) {
    let (source, _) = make_synthetic_domain_pair::<f32>(4, 12, &ShiftSpec::color(0.0), 0).unwrap();
    let m = ModelBundle::build(&ArchConfig::default(), 4, 10, 0).unwrap();
    (source, m)
}

#[test]
fn accuracy_rejects_unlabeled_data() {
    let (source, m) = toy_setup();
    assert!(accuracy(&m, &source, Head::Goal).is_ok());
    assert!(accuracy(&m, &source.without_goal_labels(), Head::Goal).is_err());
    assert!(accuracy(&m, &source, Head::Subsidiary).is_err());
}

#[test]
fn suitability_report_echoes_thresholds() {
    let (source, m) = toy_setup();
    let cfg = SuitabilityConfig {
        probe: ProbeConfig { iterations: 50, ..ProbeConfig::default() },
        ..SuitabilityConfig::default()
    };
    for task in [SubsidiaryTask::ALL[0], SubsidiaryTask::ALL[3]] {
        let r = suitability(&source, task, &m, &StickerConfig::default(), &cfg).unwrap();
        assert_eq!((r.zeta_d, r.zeta_n, r.zeta), (0.5, 0.6, 1.1));
        assert_eq!(r.passes, r.dsm + r.tsm > r.zeta);
        assert!((0.0..=1.0).contains(&r.dsm) && (0.0..=1.0).contains(&r.tsm));
        assert_eq!(r.formula_variant, FormulaVariant::Standard);
        assert_eq!(r.task, task);
    }
}

#[test]
fn feature_report_is_zero_shift_for_identical_models_and_domains() {
    let (source, m) = toy_setup();
    let r = feature_a_distance_report(&m, &m, &source, &source, 0, FormulaVariant::Standard, &ProbeConfig::default())
        .unwrap();
    assert_eq!(r.before, r.after);
    assert!(r.before.psi > 0.3);
}
