use obsnet_core::experiment::{check_world, run_dynamic, run_static, Method, RunConfig};
use obsnet_core::metrics::{aec, aec_from_trace};
use obsnet_core::protocol::TraceLevel;
use obsnet_core::scenario::{generate_dynamic, generate_static, Profile, Scenario, ScenarioConfig};

fn cfg(method: Method, seed: u64) -> RunConfig {
    RunConfig { timing: false, trace_level: TraceLevel::Info, ..RunConfig::new(method, seed) }
}

fn static_scenario(seed: u64, n: u32) -> Scenario {
    let mut c = ScenarioConfig::profile(Profile::Table2, seed);
    c.task_count = n;
    generate_static(&c).unwrap()
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() < 1e-9,
        (None, None) => true,
        _ => false,
    }
}

#[test]
fn trace_replay_matches_world_aec() {
    for seed in 0..3 {
        let sc = static_scenario(seed, 60);
        for m in Method::ALL {
            let out = run_static(&sc, &cfg(m, seed)).unwrap();
            let replayed = aec_from_trace(out.trace.lines()).unwrap();
            assert!(close(replayed, aec(&out.world)), "{m} seed {seed}: {replayed:?} vs {:?}", aec(&out.world));
            assert!(close(out.row.aec_km, replayed));
        }
    }
}

#[test]
fn dynamic_trace_replay_matches_world_aec() {
    let sc = generate_dynamic(&ScenarioConfig::profile(Profile::Table2, 5)).unwrap();
    for m in Method::ALL {
        let out = run_dynamic(&sc, &cfg(m, 5)).unwrap();
        let replayed = aec_from_trace(out.trace.lines()).unwrap();
        assert!(close(replayed, aec(&out.world)), "{m}: {replayed:?} vs {:?}", aec(&out.world));
    }
}

#[test]
fn every_method_leaves_a_consistent_world() {
    for seed in 0..4 {
        let sc = static_scenario(seed, 80);
        for m in Method::ALL {
            let out = run_static(&sc, &cfg(m, seed)).unwrap();
            assert!(check_world(&out.world).is_empty(), "{m}");
            let held = out.world.scheme().assigned_ids();
            assert_eq!(held, out.scheme.assigned_ids(), "{m}");
            for t in &out.scheme.unassigned {
                assert!(!held.contains(t));
            }
        }
    }
}

#[test]
fn exact_dominates_sequential_auctions() {
    for seed in 0..4 {
        let sc = static_scenario(seed, 40);
        let tcr = |m| run_static(&sc, &cfg(m, seed)).unwrap().row.tcr.unwrap();
        let exact = tcr(Method::Exact);
        assert!(exact >= tcr(Method::Ssa), "seed {seed}");
        assert!(exact >= tcr(Method::Aus), "seed {seed}");
    }
}

#[test]
fn mca_keeps_earlier_assignments_on_arrivals() {
    let sc = generate_dynamic(&ScenarioConfig::profile(Profile::Table2, 2)).unwrap();
    let out = run_dynamic(&sc, &cfg(Method::Mca, 2)).unwrap();
    for r in &out.rows {
        assert_eq!(r.rsc, Some(0.0));
    }
}

#[test]
fn traces_are_reproducible() {
    let sc = static_scenario(9, 50);
    for m in Method::ALL {
        let a = run_static(&sc, &cfg(m, 9)).unwrap();
        let b = run_static(&sc, &cfg(m, 9)).unwrap();
        assert_eq!(a.trace.digest(), b.trace.digest(), "{m}");
    }
}
