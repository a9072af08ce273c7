use bubble_audit::domain::Stance;
use bubble_audit::metrics::{diff_to_linear, list_overlap, normalized_score, sequence_edit_distance, serp_ms, ScoreSeries, ScoredList};
use proptest::prelude::*;

fn stance() -> impl Strategy<Value = Stance> {
    prop::sample::select(Stance::ALL.to_vec())
}

fn list(max: usize) -> impl Strategy<Value = Vec<Stance>> {
    prop::collection::vec(stance(), 1..max)
}

fn series_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..=1.0, 2..60)
}

fn series(values: &[f64]) -> ScoreSeries {
    ScoreSeries::new(values.iter().enumerate().map(|(i, v)| (i as u32, *v)).collect()).unwrap()
}

/// Levenshtein oracle by plain recursion with memo.
fn edit_oracle(a: &[u8], b: &[u8]) -> usize {
    fn go(a: &[u8], b: &[u8], memo: &mut std::collections::HashMap<(usize, usize), usize>) -> usize {
        if a.is_empty() || b.is_empty() {
            return a.len() + b.len();
        }
        if let Some(&d) = memo.get(&(a.len(), b.len())) {
            return d;
        }
        let sub = go(&a[1..], &b[1..], memo) + (a[0] != b[0]) as usize;
        let d = sub.min(go(&a[1..], b, memo) + 1).min(go(a, &b[1..], memo) + 1);
        memo.insert((a.len(), b.len()), d);
        d
    }
    go(a, b, &mut Default::default())
}

proptest! {
    #[test]
    fn normalized_score_ignores_order(stances in list(40), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = stances.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = normalized_score(&ScoredList::new(stances)).unwrap();
        let b = normalized_score(&ScoredList::new(shuffled)).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn scores_stay_within_extremes(stances in list(40)) {
        let lo = stances.iter().map(|s| s.value()).min().unwrap() as f64;
        let hi = stances.iter().map(|s| s.value()).max().unwrap() as f64;
        let l = ScoredList::new(stances);
        for v in [normalized_score(&l).unwrap(), serp_ms(&l).unwrap()] {
            prop_assert!(lo - 1e-12 <= v && v <= hi + 1e-12);
        }
    }

    #[test]
    fn uniform_lists_score_their_stance(s in stance(), n in 1usize..50) {
        let l = ScoredList::new(vec![s; n]);
        prop_assert_eq!(serp_ms(&l).unwrap(), s.value() as f64);
        prop_assert_eq!(normalized_score(&l).unwrap(), s.value() as f64);
    }

    #[test]
    fn serp_ms_weights_rank(stances in list(30)) {
        // Moving a promoting item one rank up never lowers SERP-MS.
        let l = ScoredList::new(stances.clone());
        let base = serp_ms(&l).unwrap();
        for i in 1..stances.len() {
            if stances[i].value() > stances[i - 1].value() {
                let mut swapped = stances.clone();
                swapped.swap(i, i - 1);
                prop_assert!(serp_ms(&ScoredList::new(swapped)).unwrap() > base);
            }
        }
    }

    #[test]
    fn dtl_ignores_constant_shift(values in series_values(), shift in -5.0f64..5.0) {
        let e = values.len() as u32 - 1;
        let a = diff_to_linear(&series(&values), 0, e).unwrap();
        let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
        let b = diff_to_linear(&series(&shifted), 0, e).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn dtl_negates_with_series(values in series_values()) {
        let e = values.len() as u32 - 1;
        let a = diff_to_linear(&series(&values), 0, e).unwrap();
        let negated: Vec<f64> = values.iter().map(|v| -v).collect();
        let b = diff_to_linear(&series(&negated), 0, e).unwrap();
        prop_assert!((a + b).abs() < 1e-12);
    }

    #[test]
    fn dtl_of_a_line_is_zero(a in -1.0f64..1.0, slope in -0.05f64..0.05, len in 2u32..40) {
        let values: Vec<f64> = (0..len).map(|i| a + slope * i as f64).collect();
        prop_assert!(diff_to_linear(&series(&values), 0, len - 1).unwrap().abs() < 1e-12);
    }

    #[test]
    fn overlap_is_a_symmetric_fraction(a in prop::collection::vec(0u8..12, 0..15), b in prop::collection::vec(0u8..12, 0..15)) {
        let ab = list_overlap(&a, &b);
        prop_assert_eq!(ab, list_overlap(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(list_overlap(&a, &a), 1.0);
    }

    #[test]
    fn edit_distance_matches_oracle(a in prop::collection::vec(0u8..4, 0..9), b in prop::collection::vec(0u8..4, 0..9)) {
        let d = sequence_edit_distance(&a, &b);
        prop_assert_eq!(d, edit_oracle(&a, &b));
        prop_assert_eq!(d, sequence_edit_distance(&b, &a));
    }
}

#[test]
fn single_item_lists() {
    for s in Stance::ALL {
        assert_eq!(serp_ms(&ScoredList::new(vec![s])).unwrap(), s.value() as f64);
    }
    assert!(serp_ms(&ScoredList::new(vec![])).is_err());
    assert!(normalized_score(&ScoredList::new(vec![])).is_err());
}
