//! IQM, stratified bootstrap and effective rank against independent references.

mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use redo_lab::dormancy::overlap_coefficient;
use redo_lab::metrics::{
    aggregate, bootstrap_ci, effective_rank, iqm, singular_values, RunMatrix, Statistic,
};
use redo_lab::nn::Matrix;

/// Reference bootstrap: different generator, nearest-rank percentiles,
/// IQM recomputed by hand. Run with a large `b` it is close to the exact
/// bootstrap percentile.
fn reference_ci(strata: &[Vec<f64>], b: usize, alpha: f64, seed: u64) -> (f64, f64) {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    let mut reps: Vec<f64> = (0..b)
        .map(|_| {
            let mut pooled: Vec<f64> = strata
                .iter()
                .flat_map(|s| (0..s.len()).map(|_| s[r.random_range(0..s.len())]).collect::<Vec<_>>())
                .collect();
            pooled.sort_by(f64::total_cmp);
            let q = pooled.len() / 4;
            let mid = &pooled[q..pooled.len() - q];
            mid.iter().sum::<f64>() / mid.len() as f64
        })
        .collect();
    reps.sort_by(f64::total_cmp);
    let rank = |p: f64| reps[((p * b as f64).ceil() as usize).clamp(1, b) - 1];
    (rank(alpha / 2.0), rank(1.0 - alpha / 2.0))
}

#[test]
fn statistics_examples() {
    assert_eq!(iqm(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
    let x = [1, 2].into_iter().collect();
    let y = [2, 3].into_iter().collect();
    assert_eq!(overlap_coefficient(&x, &y), Some(0.5));
    assert_eq!(effective_rank(&Matrix::identity(100), 0.01).unwrap(), 99);
    assert!(iqm(&[]).is_err());
}

#[test]
fn bootstrap_agrees_with_reference() {
    let mut r = rng_for(60);
    for trial in 0..10 {
        let strata: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..10).map(|_| r.random_range(0.0..1.0)).collect())
            .collect();
        let m = RunMatrix::new(strata.clone()).unwrap();
        let ci = bootstrap_ci(&m, Statistic::Iqm, 2000, 0.05, &mut redo_lab::rng::seeded(trial, 10)).unwrap();
        let (lo, hi) = reference_ci(&strata, 100_000, 0.05, trial);
        assert!((ci.lo - lo).abs() <= 0.01, "lo {} vs {lo}", ci.lo);
        assert!((ci.hi - hi).abs() <= 0.01, "hi {} vs {hi}", ci.hi);
        assert_eq!(ci.point, iqm(&m.flatten()).unwrap());
    }
}

#[test]
fn bootstrap_converges_to_reference() {
    let mut r = rng_for(65);
    let strata: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..8).map(|_| r.random_range(-2.0..2.0)).collect())
        .collect();
    let m = RunMatrix::new(strata.clone()).unwrap();
    let ci = bootstrap_ci(&m, Statistic::Iqm, 400_000, 0.05, &mut redo_lab::rng::seeded(0, 10)).unwrap();
    let (lo, hi) = reference_ci(&strata, 400_000, 0.05, 7);
    assert!((ci.lo - lo).abs() <= 0.005, "{} vs {lo}", ci.lo);
    assert!((ci.hi - hi).abs() <= 0.005, "{} vs {hi}", ci.hi);
}

#[test]
fn bootstrap_interval_contains_point() {
    let mut r = rng_for(61);
    let mut hits = 0;
    for _ in 0..100 {
        let n = r.random_range(5..20);
        let v: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let ci = bootstrap_ci(&RunMatrix::single_task(v).unwrap(), Statistic::Iqm, 1000, 0.05, &mut r).unwrap();
        if ci.lo <= ci.point && ci.point <= ci.hi {
            hits += 1;
        }
    }
    assert_eq!(hits, 100);
}

#[test]
fn degenerate_and_constant_inputs() {
    let mut r = rng_for(62);
    let one = aggregate(&RunMatrix::single_task(vec![0.7]).unwrap(), Statistic::Iqm, 500, 0.05, &mut r).unwrap();
    assert!(one.degenerate);
    assert_eq!((one.ci_lo, one.point, one.ci_hi), (0.7, 0.7, 0.7));
    let same = aggregate(&RunMatrix::single_task(vec![2.0; 5]).unwrap(), Statistic::Mean, 500, 0.05, &mut r).unwrap();
    assert!(!same.degenerate);
    assert_eq!(same.ci_lo, same.ci_hi);
    assert!(bootstrap_ci(&RunMatrix::single_task(vec![1.0]).unwrap(), Statistic::Iqm, 99, 0.05, &mut r).is_err());
}

fn nalgebra_srank(m: &Matrix, delta: f64) -> usize {
    let d = DMatrix::from_row_slice(m.rows(), m.cols(), m.data());
    let mut sv: Vec<f64> = d.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = sv.iter().sum();
    let mut acc = 0.0;
    for (k, s) in sv.iter().enumerate() {
        acc += s;
        if acc >= (1.0 - delta) * total {
            return k + 1;
        }
    }
    sv.len()
}

/// `rows × cols` matrix of rank at most `rank`.
fn low_rank(r: &mut redo_lab::rng::Rng, rows: usize, cols: usize, rank: usize) -> Matrix {
    let a = random_matrix(r, rows, rank, 1.0);
    let b = random_matrix(r, rank, cols, 1.0);
    a.matmul(&b).unwrap()
}

#[test]
fn singular_values_match_nalgebra() {
    let mut r = rng_for(63);
    for _ in 0..50 {
        let rows = r.random_range(1..30);
        let cols = r.random_range(1..30);
        let m = random_matrix(&mut r, rows, cols, 2.0);
        let ours = singular_values(&m).unwrap();
        let d = DMatrix::from_row_slice(rows, cols, m.data());
        let mut theirs: Vec<f64> = d.singular_values().iter().copied().collect();
        theirs.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(ours.len(), theirs.len());
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b));
        }
    }
}

#[test]
fn effective_rank_matches_nalgebra() {
    let mut r = rng_for(64);
    let mut checked = 0;
    for _ in 0..100 {
        let rows = r.random_range(5..40);
        let cols = r.random_range(2..20);
        let rank = r.random_range(1..=cols.min(rows));
        let m = low_rank(&mut r, rows, cols, rank);
        for delta in [0.01, 0.1, 0.3] {
            let ours = effective_rank(&m, delta).unwrap();
            let theirs = nalgebra_srank(&m, delta);
            // Borderline cumulative sums may round either way; only those may differ.
            if ours != theirs {
                let sv = singular_values(&m).unwrap();
                let total: f64 = sv.iter().sum();
                let cum: f64 = sv[..ours.min(theirs)].iter().sum::<f64>() / total;
                assert!((cum - (1.0 - delta)).abs() < 1e-9, "{ours} vs {theirs}");
            } else {
                checked += 1;
            }
        }
    }
    assert!(checked >= 295);
}

proptest! {
    #[test]
    fn iqm_is_bounded_and_order_free(mut v in proptest::collection::vec(-1e6f64..1e6, 1..40)) {
        let a = iqm(&v).unwrap();
        let lo = v.iter().cloned().fold(f64::MAX, f64::min);
        let hi = v.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert!(lo - 1e-6 <= a && a <= hi + 1e-6);
        v.reverse();
        prop_assert!((iqm(&v).unwrap() - a).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn iqm_of_constant_is_constant(c in -1e3f64..1e3, n in 1usize..30) {
        prop_assert!((iqm(&vec![c; n]).unwrap() - c).abs() <= 1e-12 * (1.0 + c.abs()));
    }

    #[test]
    fn effective_rank_bounds(seed in 0u64..1000, d1 in 0.001f64..0.5, d2 in 0.001f64..0.5) {
        let mut r = rng_for(seed);
        let rows = r.random_range(2..25);
        let cols = r.random_range(2..25);
        let rank = r.random_range(1..=rows.min(cols));
        let m = low_rank(&mut r, rows, cols, rank);
        let (small, large) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a = effective_rank(&m, small).unwrap();
        let b = effective_rank(&m, large).unwrap();
        prop_assert!(b <= a);
        prop_assert!(a >= 1 && a <= rank.max(1));
    }
}
