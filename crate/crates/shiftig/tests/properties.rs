//! Property tests for the library invariants.

use ndarray::Array2;
use proptest::collection::btree_set;
use proptest::prelude::*;

use shiftig::attribution::{integrated_gradients, PathSpec, Scheme};
use shiftig::baseline::align_baseline;
use shiftig::binning::{bin_attributions, RPeakList};
use shiftig::signal::{delta, normalize, LeadTimeMatrix};
use shiftig::AttributionMap;

fn ltm_from(rows: Vec<Vec<f64>>, fs: f64) -> LeadTimeMatrix {
    let c = rows.len();
    let t = rows[0].len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    LeadTimeMatrix::with_default_names(Array2::from_shape_vec((c, t), flat).unwrap(), fs)
        .unwrap()
}

fn signal_strategy() -> impl Strategy<Value = LeadTimeMatrix> {
    (1usize..4, 2usize..32).prop_flat_map(|(c, t)| {
        proptest::collection::vec(
            proptest::collection::vec(-100.0f64..100.0, t..=t),
            c..=c,
        )
        .prop_map(|rows| ltm_from(rows, 512.0))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalize_is_idempotent(x in signal_strategy()) {
        let once = normalize(&x).unwrap();
        let twice = normalize(&once.signal).unwrap();
        prop_assert_eq!(&once.signal, &twice.signal);
        // Non-constant leads hit 0 and 1 exactly.
        for i in 0..once.signal.num_leads() {
            if !once.constant_leads.contains(&i) {
                let row = once.signal.lead(i);
                let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(lo, 0.0);
                prop_assert_eq!(hi, 1.0);
            }
        }
    }

    #[test]
    fn delta_of_self_is_zero(x in signal_strategy()) {
        let d = delta(&x, &x).unwrap();
        prop_assert!(d.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rotation_is_recovered_exactly(
        pattern in proptest::collection::vec(-10.0f64..10.0, 4..12),
        reps in 2usize..5,
        k_frac in 0.0f64..1.0,
    ) {
        let period = pattern.len();
        let t_len = period * reps;
        let base: Vec<f64> = (0..t_len).map(|i| pattern[i % period]).collect();
        let k = ((k_frac * period as f64) as usize).min(period - 1);
        let target: Vec<f64> = (0..t_len).map(|i| base[(i + k) % t_len]).collect();
        let b = ltm_from(vec![base.clone()], 512.0);
        let t = ltm_from(vec![target.clone()], 512.0);
        let aligned = align_baseline(&b, &t, period).unwrap();

        // The aligned baseline reproduces the rotated target bit for bit.
        prop_assert_eq!(aligned.baseline().lead(0).to_vec(), target.clone());

        // And the winning score equals the brute-force maximum.
        let mut best = f64::NEG_INFINITY;
        for p in 0..period {
            let mut acc = 0.0;
            for i in 0..t_len {
                acc += target[i] * base[(i + p) % t_len];
            }
            best = best.max(acc.abs());
        }
        prop_assert_eq!(aligned.score_per_lead()[0], best);
    }

    #[test]
    fn linear_ig_matches_closed_form(
        seed in 0u64..1000,
        steps in 1usize..8,
        trapezoid in proptest::bool::ANY,
    ) {
        let w_model = shiftig::fixtures::linear_model(2, 5, seed);
        let (target, baseline) = shiftig::fixtures::random_pair(2, 5, 512.0, seed);
        let scheme = if trapezoid { Scheme::Trapezoid } else { Scheme::Midpoint };
        let path = PathSpec::new(baseline.clone(), target.clone(), steps, scheme).unwrap();
        let a = integrated_gradients(&w_model, &path).unwrap();
        let g = shiftig::model::gradient(&w_model, &target).unwrap();
        for i in 0..2 {
            for j in 0..5 {
                let expected = g.data()[(i, j)]
                    * (target.data()[(i, j)] - baseline.data()[(i, j)]);
                prop_assert!((a.scores()[(i, j)] - expected).abs() <= 1e-12);
            }
        }
        prop_assert!(a.completeness_residual().abs() <= 1e-12);
    }

    #[test]
    fn binning_conserves_covered_scores(
        values in proptest::collection::vec(-50.0f64..50.0, 16..160),
        peak_set in btree_set(0usize..160, 2..6),
    ) {
        let t_len = values.len();
        let peaks: Vec<usize> = peak_set.into_iter().filter(|&p| p <= t_len).collect();
        prop_assume!(peaks.len() >= 2);
        let scores = Array2::from_shape_vec((1, t_len), values.clone()).unwrap();
        let a = AttributionMap::from_parts(scores, 0.0, 0.0, 1).unwrap();
        let list = RPeakList::new(peaks.clone(), "L1".into(), 512.0).unwrap();
        let profile = bin_attributions(&a, &list, 0).unwrap();

        // Independent oracle with its own boundary arithmetic, accumulated
        // per bin in time order.
        let mut oracle = [0.0f64; 4];
        let mut oracle_counts = [0usize; 4];
        for w in peaks.windows(2) {
            let len = w[1] - w[0];
            let mut cursor = w[0];
            for b in 0..4 {
                let size = len / 4 + usize::from(b < len % 4);
                for t in cursor..cursor + size {
                    oracle[b] += values[t];
                }
                oracle_counts[b] += size;
                cursor += size;
            }
        }
        prop_assert_eq!(profile.totals(), &oracle);
        prop_assert_eq!(profile.counts(), &oracle_counts);

        // Bin sizes within a cycle differ by at most one sample.
        for w in peaks.windows(2) {
            let sizes = shiftig::binning::bin_sizes(w[1] - w[0]);
            let max = *sizes.iter().max().unwrap();
            let min = *sizes.iter().min().unwrap();
            prop_assert!(max - min <= 1);
        }
    }

    #[test]
    fn trapezoid_swap_antisymmetry(seed in 0u64..500, steps in 1usize..10) {
        let model = shiftig::fixtures::tanh_mlp(2, 4, &[3], seed);
        let (a_sig, b_sig) = shiftig::fixtures::random_pair(2, 4, 512.0, seed);
        let fwd = PathSpec::new(a_sig.clone(), b_sig.clone(), steps, Scheme::Trapezoid).unwrap();
        let rev = PathSpec::new(b_sig, a_sig, steps, Scheme::Trapezoid).unwrap();
        let fa = integrated_gradients(&model, &fwd).unwrap();
        let ra = integrated_gradients(&model, &rev).unwrap();
        for (x, y) in fa.scores().iter().zip(ra.scores().iter()) {
            prop_assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn ig_zero_coordinates_where_target_equals_baseline(
        seed in 0u64..500,
        pin_i in 0usize..2,
        pin_j in 0usize..4,
    ) {
        let model = shiftig::fixtures::tanh_mlp(2, 4, &[3], seed);
        let (target, baseline) = shiftig::fixtures::random_pair(2, 4, 512.0, seed);
        let mut pinned = target.data().to_owned();
        pinned[(pin_i, pin_j)] = baseline.data()[(pin_i, pin_j)];
        let target = LeadTimeMatrix::with_default_names(pinned, 512.0).unwrap();
        let path = PathSpec::new(baseline, target, 8, Scheme::Trapezoid).unwrap();
        let a = integrated_gradients(&model, &path).unwrap();
        prop_assert_eq!(a.scores()[(pin_i, pin_j)], 0.0);
    }
}
