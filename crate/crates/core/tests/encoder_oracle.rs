//! encode_milp against the raw MILP, and simplify against the unsimplified program.

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xplain_core::flow_dsl::{evaluate, FlowError, FlowNetwork, NodeBehavior, SourceInner, Supply};
use xplain_core::milp_bridge::{compile_network, encode_milp, simplify, Milp};
use xplain_core::solver::{solve_mip, ConstraintSense, ObjectiveSense, SolveStatus};

fn random_milp(rng: &mut ChaCha8Rng) -> Milp {
    let ny = rng.random_range(0..=2);
    let nx = rng.random_range(usize::from(ny == 0)..=4 - ny);
    let m = rng.random_range(0..=4);
    let mut coef = || rng.random_range(-5..=5) as f64;
    let c_x = (0..nx).map(|_| coef()).collect();
    let c_y = (0..ny).map(|_| coef()).collect();
    let a_x = (0..m).map(|_| (0..nx).map(|_| coef()).collect()).collect();
    let a_y = (0..m).map(|_| (0..ny).map(|_| coef()).collect()).collect();
    let b = (0..m).map(|_| rng.random_range(-5..=10) as f64).collect();
    let row_sense = (0..m)
        .map(|_| match rng.random_range(0..4) {
            0 => ConstraintSense::Eq,
            1 => ConstraintSense::Ge,
            _ => ConstraintSense::Le,
        })
        .collect();
    let sense = if rng.random_bool(0.5) { ObjectiveSense::Maximize } else { ObjectiveSense::Minimize };
    Milp { sense, c_x, c_y, a_x, a_y, b, row_sense, integer_x: vec![] }
}

#[test]
fn encoding_preserves_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut optimal = 0;
    for trial in 0..100 {
        let m = random_milp(&mut rng);
        let raw = solve_mip(&m.to_program().unwrap()).unwrap();
        let (net, trace) = encode_milp(&m).unwrap();
        let enc = evaluate(&net, &BTreeMap::new(), &trace.objective_sink);
        match raw.status {
            SolveStatus::Optimal => {
                optimal += 1;
                let ev = enc.unwrap_or_else(|e| panic!("trial {trial}: {e} for {m:?}"));
                let v = trace.objective_from_sink(ev.objective);
                assert!((v - raw.objective).abs() <= 1e-6, "trial {trial}: {v} vs {}", raw.objective);
                // The decoded point is feasible for the MILP with the same value.
                let (x, y) = trace.point(&net, &ev.flows);
                let z: Vec<f64> = x.into_iter().chain(y).collect();
                let p = m.to_program().unwrap();
                assert!(p.max_violation(&z) <= 1e-6, "trial {trial}");
                assert!((p.objective.value(&z) - raw.objective).abs() <= 1e-6);
            }
            SolveStatus::Infeasible => assert_eq!(enc, Err(FlowError::Infeasible), "trial {trial}"),
            SolveStatus::Unbounded => assert_eq!(enc, Err(FlowError::Unbounded), "trial {trial}"),
        }
    }
    assert!(optimal >= 30, "{optimal}");
}

#[test]
fn binary_patterns_enumerate_the_same() {
    // Fix each binary pattern by rows and compare both sides.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..30 {
        let m = random_milp(&mut rng);
        let ny = m.c_y.len();
        for bits in 0u32..1 << ny {
            let mut fixed = m.clone();
            for k in 0..ny {
                fixed.a_x.push(vec![0.0; m.c_x.len()]);
                let mut row = vec![0.0; ny];
                row[k] = 1.0;
                fixed.a_y.push(row);
                fixed.b.push((bits >> k & 1) as f64);
                fixed.row_sense.push(ConstraintSense::Eq);
            }
            let raw = solve_mip(&fixed.to_program().unwrap()).unwrap();
            let (net, trace) = encode_milp(&fixed).unwrap();
            let enc = evaluate(&net, &BTreeMap::new(), &trace.objective_sink);
            match raw.status {
                SolveStatus::Optimal => {
                    let v = trace.objective_from_sink(enc.unwrap().objective);
                    assert!((v - raw.objective).abs() <= 1e-6);
                }
                SolveStatus::Infeasible => assert_eq!(enc, Err(FlowError::Infeasible)),
                SolveStatus::Unbounded => assert_eq!(enc, Err(FlowError::Unbounded)),
            }
        }
    }
}

/// A random layered network of split, copy, multiply and all-equal nodes.
fn random_network(rng: &mut ChaCha8Rng) -> (FlowNetwork, BTreeMap<String, f64>) {
    let mut net = FlowNetwork::new();
    let mut inputs = BTreeMap::new();
    let sources = rng.random_range(1..=3);
    for s in 0..sources {
        let inner = if rng.random_bool(0.3) { SourceInner::Pick } else { SourceInner::Split };
        net.add_node(format!("s{s}"), NodeBehavior::Source { inner, supply: Supply::Input });
        inputs.insert(format!("s{s}"), rng.random_range(0..=10) as f64);
    }
    net.add_node("t", NodeBehavior::Sink { sense: ObjectiveSense::Maximize });
    net.add_node("spill", NodeBehavior::Sink { sense: ObjectiveSense::Maximize });
    let layer: Vec<String> = (0..rng.random_range(2..=4)).map(|k| format!("m{k}")).collect();
    for id in &layer {
        let b = match rng.random_range(0..3) {
            0 => NodeBehavior::Copy,
            1 => NodeBehavior::AllEqual,
            _ => NodeBehavior::Split,
        };
        net.add_node(id, b);
    }
    for s in 0..sources {
        for id in &layer {
            if rng.random_bool(0.6) {
                net.add_edge(format!("s{s}"), id);
            }
        }
        net.add_edge(format!("s{s}"), "spill");
    }
    for (k, id) in layer.iter().enumerate() {
        let cap = rng.random_range(1..=8) as f64;
        if rng.random_bool(0.5) {
            let mul = format!("x{k}");
            net.add_node(&mul, NodeBehavior::Multiply { factor: rng.random_range(1..=4) as f64 / 2.0 });
            net.add_edge(id, &mul);
            net.add_edge_with(&mul, "t", Some(cap), None);
        } else {
            net.add_edge_with(id, "t", Some(cap), None);
        }
        net.add_edge(id, "spill");
    }
    (net, inputs)
}

#[test]
fn simplify_preserves_optimum_on_random_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..50 {
        let (net, inputs) = random_network(&mut rng);
        let prog = compile_network(&net, Some("t"), &inputs).unwrap();
        let full = solve_mip(&prog).unwrap();
        let s = simplify(&prog);
        let small = solve_mip(&s.program).unwrap();
        assert_eq!(full.status, small.status, "trial {trial}");
        if full.status == SolveStatus::Optimal {
            assert!((full.objective - small.objective).abs() <= xplain_core::EPS_FEAS, "trial {trial}");
            let expanded = s.expand(&small.values);
            assert!(prog.max_violation(&expanded) <= xplain_core::EPS_FEAS, "trial {trial}");
        }
    }
}

/// A copy node vs. a split feeding an all-equal node.
fn copy_pair(supply: f64, caps: &[f64]) -> (f64, f64) {
    let build = |with_copy: bool| {
        let mut net = FlowNetwork::new();
        net.add_node("s", NodeBehavior::Source { inner: SourceInner::Split, supply: Supply::Input });
        net.add_node("t", NodeBehavior::Sink { sense: ObjectiveSense::Maximize });
        net.add_node("spill", NodeBehavior::Sink { sense: ObjectiveSense::Maximize });
        net.add_edge("s", "spill");
        if with_copy {
            net.add_node("c", NodeBehavior::Copy);
            net.add_edge("s", "c");
            for &cap in caps {
                net.add_edge_with("c", "t", Some(cap), None);
            }
        } else {
            net.add_node("sp", NodeBehavior::Split);
            net.add_node("eq", NodeBehavior::AllEqual);
            net.add_edge("s", "sp");
            net.add_edge("sp", "eq");
            for &cap in caps {
                net.add_edge_with("eq", "t", Some(cap), None);
            }
        }
        let inputs = BTreeMap::from([("s".to_string(), supply)]);
        evaluate(&net, &inputs, "t").unwrap().objective
    };
    (build(true), build(false))
}

proptest! {
    #[test]
    fn copy_equals_split_plus_all_equal(supply in 0.0f64..20.0, caps in prop::collection::vec(0.5f64..10.0, 1..4)) {
        let (a, b) = copy_pair(supply, &caps);
        prop_assert!((a - b).abs() <= xplain_core::EPS_FEAS, "{a} vs {b}");
    }
}
