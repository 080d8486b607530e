mod common;

use bcfb::{candidate_updates, prox_block, run, CoeffVector, SelectionPolicy, SolverConfig, SolverState};

fn naive_fb_step(p: &bcfb::Problem, w: &CoeffVector) -> CoeffVector {
    let g = p.full_gradient(w).unwrap();
    let mut next = w.clone();
    for i in 0..p.num_blocks() {
        let z: Vec<f64> = w.block(i).iter().zip(g.block(i)).map(|(a, b)| a - p.stepsize * b).collect();
        next.block_mut(i).copy_from_slice(&prox_block(&p.reg, i, &z, p.stepsize).unwrap());
    }
    next
}

#[test]
fn full_policy_matches_naive_forward_backward() {
    let p = common::problem(32, 3, 4, 3.0, 0.01, 0.005);
    let mut state = SolverState::init(&p, 0).unwrap();
    let mut w = p.observation_coeffs().unwrap();
    for k in 0..60 {
        state.step(&p, &SelectionPolicy::Full, None).unwrap();
        w = naive_fb_step(&p, &w);
        let err = common::rel_diff(state.iterate.data(), w.data());
        assert!(err <= 1e-12, "iteration {k}: {err}");
    }
}

#[test]
fn cache_tracks_recomputation_for_every_policy() {
    let p = common::problem(32, 3, 8, 5.0, 0.01, 0.01);
    for policy in SelectionPolicy::all_default() {
        let mut state = SolverState::init(&p, 3).unwrap();
        for _ in 0..50 {
            state.step(&p, &policy, None).unwrap();
        }
        let fresh = p.normal_op(&state.iterate).unwrap();
        let err = common::rel_diff(state.grad_cache.data(), fresh.data());
        assert!(err <= 1e-8, "{policy}: {err}");
    }
}

#[test]
fn steps_touch_only_active_blocks_and_report_fresh_norms() {
    let p = common::problem(32, 3, 4, 2.0, 0.03, 0.02);
    for policy in SelectionPolicy::all_default() {
        let mut state = SolverState::init(&p, 9).unwrap();
        for _ in 0..30 {
            let before = state.iterate.clone();
            let fresh = candidate_updates(&p, &before, &p.full_gradient(&before).unwrap()).unwrap();
            let report = state.step(&p, &policy, None).unwrap();
            let mask = report.mask.expect("no fixed point this early");
            for (a, b) in report.norms.iter().zip(&fresh.norms) {
                assert!((a - b).abs() <= 1e-9 * b.max(1e-12), "{policy}: norm {a} vs {b}");
            }
            for i in 0..p.num_blocks() {
                if mask.is_active(i) {
                    // the proposal from a recomputed gradient differs from the cached one by round-off
                    let gap = state.iterate.block(i).iter().zip(fresh.proposal.block(i)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    assert!(gap <= 1e-12 * before.norm(), "{policy}: block {i} off by {gap}");
                } else {
                    assert_eq!(state.iterate.block(i), before.block(i), "{policy}: inactive block {i} moved");
                }
            }
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let p = common::problem(32, 3, 4, 2.0, 0.03, 0.02);
    for policy in SelectionPolicy::all_default() {
        let cfg = SolverConfig::new(policy).with_iterations(40).with_seed(77);
        let (a, b) = (run(&p, &cfg).unwrap(), run(&p, &cfg).unwrap());
        assert_eq!(a.final_iterate, b.final_iterate);
        let strip = |t: &bcfb::RunTrace| t.records.iter().map(|r| (r.objective, r.mask.clone(), r.norms.clone())).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
    }
    let magic = |seed| run(&p, &SolverConfig::new(SelectionPolicy::StochasticGs).with_iterations(40).with_seed(seed)).unwrap();
    assert_ne!(magic(1).final_iterate, magic(2).final_iterate);
}

#[test]
fn every_policy_converges_to_the_same_value() {
    let p = common::problem(32, 3, 4, 2.0, 0.02, 0.01);
    let reference = run(&p, &SolverConfig::new(SelectionPolicy::Full).with_iterations(3000)).unwrap().final_objective();
    for policy in SelectionPolicy::all_default() {
        let f = run(&p, &SolverConfig::new(policy).with_iterations(1500)).unwrap().final_objective();
        assert!(f >= reference - 1e-9 * reference, "{policy} went below the reference: {f} < {reference}");
        assert!((f - reference) / reference <= 1e-3, "{policy}: {f} vs {reference}");
    }
}

#[test]
fn objective_never_increases_with_conservative_step() {
    let p = common::problem(32, 3, 4, 4.0, 0.01, 0.01);
    for policy in SelectionPolicy::all_default() {
        let trace = run(&p, &SolverConfig::new(policy).with_iterations(60).with_step_factor(1.0)).unwrap();
        let mut prev = trace.initial_objective;
        for r in &trace.records {
            assert!(r.objective <= prev + 1e-12 * prev, "{policy} increased at {}", r.iter);
            prev = r.objective;
        }
    }
}
