//! Property checks across modules.

use proptest::prelude::*;
use xplain_core::analyzer::{AdversarialPoint, InputSpace, Strategy as Search};
use xplain_core::explainer::score_edges;
use xplain_core::flow_dsl::FlowAssignment;
use xplain_core::generalizer::{trend_from, Predicate, TrendKind};
use xplain_core::heuristics::{
    five_node_instance, optimal_te, optimal_vbp, run_dp, run_ff, vbp_network, Model, VbpInstance,
};
use xplain_core::stats::{
    check_significance, dkw_samples, wilcoxon_with, Alternative, Method, SignificanceParams,
};
use xplain_core::subspace::{grow_rough_subspace, GrowParams, Subspace};

/// P(W >= w) etc. by listing all 2^n sign patterns.
fn enumerate_p(diffs: &[f64], alt: Alternative) -> f64 {
    let r = wilcoxon_with(diffs, alt, Method::Exact).unwrap();
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| d.abs() > 1e-12).collect();
    let n = nz.len();
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|a| {
            let below = abs.iter().filter(|b| *b < a).count() as f64;
            let same = abs.iter().filter(|b| *b == a).count() as f64;
            below + (same + 1.0) / 2.0
        })
        .collect();
    let total: f64 = ranks.iter().sum();
    let mean = total / 2.0;
    let (mut hit, mut all) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        all += 1;
        let ok = match alt {
            Alternative::Greater => w >= r.w - 1e-9,
            Alternative::Less => w <= r.w + 1e-9,
            Alternative::TwoSided => (w - mean).abs() >= (r.w - mean).abs() - 1e-9,
        };
        hit += u64::from(ok);
    }
    (hit as f64 / all as f64).min(1.0)
}

fn alt() -> impl Strategy<Value = Alternative> {
    prop_oneof![Just(Alternative::Greater), Just(Alternative::Less), Just(Alternative::TwoSided)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn wilcoxon_exact_matches_enumeration(
        diffs in prop::collection::vec((-6i32..=6).prop_map(f64::from), 1..=12),
        a in alt(),
    ) {
        prop_assume!(diffs.iter().any(|d| *d != 0.0));
        let p = wilcoxon_with(&diffs, a, Method::Exact).unwrap().p;
        prop_assert!((p - enumerate_p(&diffs, a)).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_normal_close_to_exact(diffs in prop::collection::vec(-1.0f64..1.0, 15..=20)) {
        let e = wilcoxon_with(&diffs, Alternative::Greater, Method::Exact).unwrap().p;
        let n = wilcoxon_with(&diffs, Alternative::Greater, Method::NormalApprox).unwrap().p;
        prop_assert!((e - n).abs() <= 0.02, "exact {e} normal {n}");
    }

    #[test]
    fn dkw_monotone(e in 0.01f64..0.5, d in 0.001f64..0.5, k in 1.01f64..3.0) {
        let base = dkw_samples(e, d).unwrap();
        prop_assert!(dkw_samples((e * k).min(0.99), d).unwrap() <= base);
        prop_assert!(dkw_samples(e, (d * k).min(0.99)).unwrap() <= base);
    }

    #[test]
    fn dp_never_beats_opt(d in prop::collection::vec(0.0f64..100.0, 8)) {
        let inst = five_node_instance();
        let dp = run_dp(&inst, &d).unwrap().total;
        let opt = optimal_te(&inst, &d).unwrap().total;
        prop_assert!(dp <= opt + 1e-6);
    }

    #[test]
    fn ff_never_beats_opt(sizes in prop::collection::vec(0.0f64..1.0, 1..=7)) {
        let inst = VbpInstance::scalar(&sizes, &vec![1.0; sizes.len()], false);
        let ff = run_ff(&inst).unwrap().0.bins_used;
        let opt = optimal_vbp(&inst).unwrap().bins_used;
        prop_assert!(ff >= opt);
        prop_assert!(opt >= inst.volume_lower_bound());
    }

    #[test]
    fn trend_reversal_symmetry(gaps in prop::collection::vec(-5i32..5, 5..=9)) {
        let pairs: Vec<(f64, f64)> = gaps.iter().enumerate().map(|(i, &g)| (i as f64, f64::from(g))).collect();
        let neg: Vec<(f64, f64)> = pairs.iter().map(|&(f, g)| (f, -g)).collect();
        let inc = Predicate::new(TrendKind::Increasing, "ball_size_sum", 0.1).unwrap();
        let dec = Predicate::new(TrendKind::Decreasing, "ball_size_sum", 0.1).unwrap();
        let a = trend_from(&inc, pairs).unwrap();
        let b = trend_from(&dec, neg).unwrap();
        prop_assert_eq!(a.holds, b.holds);
        prop_assert!((a.p - b.p).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heatmap_antisymmetry(seed in any::<u64>(), n in 1usize..40) {
        let inst = VbpInstance::scalar(&[0.3, 0.6, 0.5], &[1.0, 1.0, 1.0], false);
        let net = vbp_network(&inst, Model::Ff);
        let space = InputSpace::unit(2);
        let sub = Subspace::from_box(&[0.0, 0.0], &[1.0, 1.0], space.labels.clone());
        let m = net.edges.len();
        // Edge usage that depends on the input point.
        let h = |x: &[f64]| Ok(FlowAssignment((0..m).map(|k| f64::from((x[0] * (k + 1) as f64).fract() > 0.5)).collect()));
        let b = |x: &[f64]| Ok(FlowAssignment((0..m).map(|k| f64::from((x[1] * (k + 2) as f64).fract() > 0.4)).collect()));
        let one = score_edges(&net, h, b, &sub, &space, n, seed).unwrap();
        let two = score_edges(&net, b, h, &sub, &space, n, seed).unwrap();
        for (e, f) in one.edges.iter().zip(&two.edges) {
            prop_assert_eq!(e.mean, -f.mean);
            prop_assert!((-1.0..=1.0).contains(&e.mean));
            prop_assert_eq!(e.both + e.neither + e.benchmark_only + e.heuristic_only, n);
            prop_assert_eq!(e.mean, (e.benchmark_only as f64 - e.heuristic_only as f64) / n as f64);
        }
    }

    #[test]
    fn lower_rho_grows_weakly_larger(
        lo in prop::collection::vec(0.05f64..0.45, 2),
        width in prop::collection::vec(0.1f64..0.5, 2),
        rho in 0.3f64..0.9,
        shrink in 0.05f64..0.25,
        seed in any::<u64>(),
    ) {
        let hi: Vec<f64> = lo.iter().zip(&width).map(|(l, w)| (l + w).min(1.0)).collect();
        let center: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
        let (l2, h2) = (lo.clone(), hi.clone());
        let gap = move |x: &[f64]| f64::from(x.iter().zip(l2.iter().zip(&h2)).all(|(v, (l, h))| v >= l && v <= h));
        let space = InputSpace::unit(2);
        let point = AdversarialPoint { x: center, gap: 1.0, strategy: Search::Grid, evaluations: 0 };
        let strict = GrowParams { rho_min: rho, ..GrowParams::default() };
        let loose = GrowParams { rho_min: rho - shrink, ..GrowParams::default() };
        let a = grow_rough_subspace(&point, &space, &gap, &strict, seed);
        let b = grow_rough_subspace(&point, &space, &gap, &loose, seed);
        for i in 0..2 {
            prop_assert!(b.lo[i] <= a.lo[i] + 1e-12 && b.hi[i] >= a.hi[i] - 1e-12, "{:?} {:?} vs {:?} {:?}", a.lo, a.hi, b.lo, b.hi);
        }
    }
}

/// Inside and outside gaps from the same distribution: the test keeps at
/// most `alpha + 0.03` of the time.
#[test]
fn significance_calibration() {
    let space = InputSpace::unit(2);
    let sub = Subspace::from_box(&[0.3, 0.3], &[0.6, 0.6], space.labels.clone());
    // Deterministic noise, unrelated to the subspace.
    let noise = |x: &[f64]| ((x[0] * 12_9898.0 + x[1] * 78_233.0).sin() * 43_758.545).fract().abs();
    let params = SignificanceParams::default();
    let trials = 200;
    let kept = (0..trials)
        .filter(|&t| check_significance(&sub, &space, &noise, &params, t).unwrap().keep)
        .count();
    let rate = kept as f64 / trials as f64;
    assert!(rate <= params.alpha + 0.03, "false keep rate {rate}");
}
