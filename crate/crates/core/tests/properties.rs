use entroscan_core::bandwidth::golden_section_max;
use entroscan_core::entropy::{count_blocks, entropy_bias_expansion, entropy_plugin, entropy_true};
use entroscan_core::hypothesis::{classify, test_equal_entropy, z_from_parts, z_score};
use entroscan_core::moments::{
    binomial_central_moment, evaluate, exact_moment_bruteforce_rational, multinomial_central_moment,
};
use entroscan_core::pipeline::{discretize, fit_quartiles, log_returns, PriceSeries};
use entroscan_core::poly::rational;
use entroscan_core::variance::{estimate, estimate_from_counts, variance_true};
use entroscan_core::window::{BlockStream, SlidingWindow};
use entroscan_core::{MomentOrder, SymbolSequence};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use proptest::prelude::*;

fn symbols(alphabet: u32, len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0..alphabet, len)
}

fn permutation(alphabet: u32) -> impl Strategy<Value = Vec<u32>> {
    Just((0..alphabet).collect::<Vec<u32>>()).prop_shuffle()
}

fn probs(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1u32..1000, 2..max_len).prop_map(|w| {
        let total: f64 = w.iter().map(|&x| f64::from(x)).sum();
        let mut p: Vec<f64> = w.iter().map(|&x| f64::from(x) / total).collect();
        let head: f64 = p[1..].iter().sum();
        p[0] = 1.0 - head;
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relabeling_preserves_estimates(s in symbols(4, 10..400), perm in permutation(4), k in 1usize..4) {
        prop_assume!(s.len() >= k);
        let relabeled: Vec<u32> = s.iter().map(|&x| perm[x as usize]).collect();
        let a = estimate(&SymbolSequence::new(s, 4).unwrap(), k).unwrap();
        let b = estimate(&SymbolSequence::new(relabeled, 4).unwrap(), k).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn plugin_entropy_bounds(s in symbols(5, 1..300), k in 1usize..3) {
        prop_assume!(s.len() >= k);
        let c = count_blocks(&SymbolSequence::new(s, 5).unwrap(), k).unwrap();
        let h = entropy_plugin(&c);
        let upper = (c.m_hat() as f64).ln();
        prop_assert!(h >= 0.0);
        prop_assert!(h <= upper + 1e-12);
        let first = c.entries()[0].1;
        if c.counts().all(|f| f == first) {
            prop_assert!((h - upper).abs() < 1e-12);
        } else {
            prop_assert!(h < upper);
        }
    }

    #[test]
    fn concatenation_changes_only_junction_blocks(a in symbols(3, 4..200), b in symbols(3, 4..200), k in 1usize..4) {
        let sa = SymbolSequence::new(a, 3).unwrap();
        let sb = SymbolSequence::new(b, 3).unwrap();
        let joined = count_blocks(&sa.concat(&sb).unwrap(), k).unwrap();
        let (ca, cb) = (count_blocks(&sa, k).unwrap(), count_blocks(&sb, k).unwrap());
        let mut diff = 0u64;
        for &(code, f) in joined.entries() {
            diff += f - ca.get(code) - cb.get(code);
        }
        prop_assert_eq!(diff, k as u64 - 1);
        prop_assert_eq!(joined.n_eff(), ca.n_eff() + cb.n_eff() + k as u64 - 1);
    }

    #[test]
    fn bias_is_downward(p in probs(12), extra in 0u64..5000) {
        let n = p.len() as u64 + extra;
        prop_assert!(entropy_bias_expansion(&p, n).unwrap() < entropy_true(&p).unwrap());
    }

    #[test]
    fn exact_variance_nonnegative(p in probs(12), extra in 0u64..5000) {
        let n = p.len() as u64 + extra;
        let v = variance_true(&p, n).unwrap();
        prop_assert!(v.total >= 0.0);
        prop_assert!(v.term1 >= -1e-15);
    }

    #[test]
    fn z_is_antisymmetric(a in symbols(4, 300..600), b in symbols(4, 300..600)) {
        let ea = estimate(&SymbolSequence::new(a, 4).unwrap(), 1).unwrap();
        let eb = estimate(&SymbolSequence::new(b, 4).unwrap(), 1).unwrap();
        if let (Ok(x), Ok(y)) = (z_score(&ea, &eb), z_score(&eb, &ea)) {
            prop_assert_eq!(x, -y);
        }
    }

    #[test]
    fn direction_survives_joint_relabeling(a in symbols(4, 300..600), b in symbols(4, 300..600), perm in permutation(4)) {
        let relabel = |v: &[u32]| v.iter().map(|&x| perm[x as usize]).collect::<Vec<_>>();
        let est = |v: Vec<u32>| estimate(&SymbolSequence::new(v, 4).unwrap(), 2).unwrap();
        let plain = test_equal_entropy(&est(a.clone()), &est(b.clone()), 1.0);
        let moved = test_equal_entropy(&est(relabel(&a)), &est(relabel(&b)), 1.0);
        match (plain, moved) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x.direction, y.direction),
            (x, y) => prop_assert_eq!(x.is_err(), y.is_err()),
        }
    }

    #[test]
    fn abs_z_increases_with_entropy_gap(v1 in 1e-8f64..1e-3, v2 in 1e-8f64..1e-3, d in 0.0f64..1.0, extra in 1e-6f64..1.0) {
        let small = z_from_parts(1.0, v1, 1.0 - d, v2).unwrap().abs();
        let large = z_from_parts(1.0, v1, 1.0 - d - extra, v2).unwrap().abs();
        prop_assert!(large > small);
    }

    #[test]
    fn verdict_invariants(z in -10.0f64..10.0, q in 0.1f64..5.0) {
        let r = classify(z, q);
        prop_assert_eq!(r.significant, z.abs() > q);
        prop_assert_eq!(r.direction != entroscan_core::Direction::NoChange, r.significant);
        if r.significant {
            prop_assert_eq!(r.direction == entroscan_core::Direction::Increase, z > 0.0);
        }
    }

    #[test]
    fn sliding_window_matches_fresh_counts(s in symbols(4, 50..400), k in 1usize..4, w_frac in 0.1f64..0.5, hops in prop::collection::vec(0usize..1000, 1..8)) {
        let seq = SymbolSequence::new(s, 4).unwrap();
        let w = ((seq.len() as f64 * w_frac) as usize).max(k);
        let stream = BlockStream::new(&seq, k).unwrap();
        let mut win = SlidingWindow::new(&stream, w, 0).unwrap();
        for h in hops {
            let start = h % (seq.len() - w + 1);
            win.move_to(start).unwrap();
            let direct = estimate_from_counts(&count_blocks(&seq.slice(start, start + w).unwrap(), k).unwrap());
            prop_assert_eq!(win.estimate(), direct);
        }
    }

    #[test]
    fn golden_section_stays_in_bracket(lo in 0usize..500, width in 1usize..5000, peak in 0usize..6000) {
        let hi = lo + width;
        let r = golden_section_max(lo, hi, |w| Ok(-((w as f64) - peak as f64).powi(2))).unwrap();
        prop_assert!(r.evaluations.iter().all(|&(w, _)| (lo..=hi).contains(&w)));
        prop_assert_eq!(r.w_opt, peak.clamp(lo, hi));
        let bound = 2.0 * ((width as f64).ln() / 1.618f64.ln()).ceil() + 6.0;
        prop_assert!((r.evaluations.len() as f64) <= bound);
    }

    #[test]
    fn quartile_bins_are_balanced(mut x in prop::collection::vec(-1e3f64..1e3, 8..400)) {
        x.sort_by(f64::total_cmp);
        x.dedup();
        prop_assume!(x.len() >= 8);
        let q = fit_quartiles(&x).unwrap();
        let s = discretize(&x, &q).unwrap();
        let n = x.len() as f64;
        for sym in 0..4 {
            let share = s.symbols().iter().filter(|&&v| v == sym).count() as f64 / n;
            prop_assert!((share - 0.25).abs() <= 1.0 / n + 1e-12, "symbol {} share {}", sym, share);
        }
    }

    #[test]
    fn log_returns_telescope(p in prop::collection::vec(0.01f64..1e4, 2..300)) {
        let ts: Vec<i64> = (0..p.len() as i64).collect();
        let ps = PriceSeries::new(ts, p.clone()).unwrap();
        let r = log_returns(&ps).unwrap();
        let total: f64 = r.values().iter().sum();
        prop_assert!((total - (p[p.len() - 1] / p[0]).ln()).abs() < 1e-12 * (1.0 + r.len() as f64).sqrt() * 10.0);
    }
}

fn grid_point(num: i64, den: i64) -> BigRational {
    rational(num, den)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn moments_match_enumeration(m in 0u32..5, k in 0u32..5, a in 1i64..40, b in 1i64..40, n in 1u64..9) {
        prop_assume!(m + k <= 6 && a + b <= 40);
        let (p1, p2) = (grid_point(a, 40), grid_point(b, 40));
        let rest = grid_point(40 - a - b, 40);
        let mut probs = vec![p1.clone(), p2.clone()];
        if a + b < 40 {
            probs.push(rest);
        }
        let poly = multinomial_central_moment(MomentOrder::new(m, k));
        let exact = poly.evaluate_exact(&p1, &p2, n).unwrap();
        let brute = exact_moment_bruteforce_rational(&probs, n, MomentOrder::new(m, k)).unwrap();
        prop_assert_eq!(exact, brute);
    }

    #[test]
    fn moments_are_symmetric(m in 0u32..6, k in 0u32..6) {
        prop_assume!(m + k <= 6);
        let a = multinomial_central_moment(MomentOrder::new(m, k));
        let b = multinomial_central_moment(MomentOrder::new(k, m));
        prop_assert_eq!(a, b.swap_probabilities());
    }
}

#[test]
fn mixed_moment_reduces_to_binomial() {
    for m in 0..=8 {
        assert_eq!(
            multinomial_central_moment(MomentOrder::new(m, 0)),
            binomial_central_moment(m)
        );
    }
}

#[test]
fn odd_moments_vanish_at_half() {
    for m in [1u32, 3, 5, 7] {
        for n in [1u64, 2, 7, 100] {
            let v = binomial_central_moment(m)
                .evaluate_exact(&rational(1, 2), &rational(0, 1), n)
                .unwrap();
            assert_eq!(v.to_f64().unwrap(), 0.0, "m={m} n={n}");
        }
        assert_eq!(
            evaluate(&binomial_central_moment(m), 0.5, 0.0, 10).unwrap(),
            0.0
        );
    }
}
