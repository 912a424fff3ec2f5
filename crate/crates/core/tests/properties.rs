use obsnet_core::bidding::{build_bundle, conflict_degrees, consumption_degree, BundleItem};
use obsnet_core::feasibility::{can_insert, commit, conflicting_tasks, ConflictSet, InsertCtx, PassModel};
use obsnet_core::model::{validate_scenario, Band, BidWeights, Budgets, Point, Resource, ResourceKind, Task};
use obsnet_core::scenario::{generate_static, Profile, ScenarioConfig};
use obsnet_core::wdp::{is_feasible, solution_value, solve_exact, solve_fls, FlsParams, WdpInstance};
use proptest::prelude::*;

const PM: PassModel = PassModel { ground_speed_km_s: 7.5, altitude_km: 500.0 };

fn ctx() -> InsertCtx<'static> {
    InsertCtx { clock: 0, horizon_s: 21_600, pass_model: &PM, blackouts: &[] }
}

fn uav(budget: Budgets) -> Resource {
    Resource {
        id: 0,
        kind: ResourceKind::Uav,
        center_id: 0,
        position: Point::new(0.0, 0.0),
        cruise_speed_kmh: 60.0,
        capacity: budget,
        remaining: budget,
        visible_width_m: 500.0,
        side_swing_deg: 0.0,
        max_resolution_m: 0.5,
        bands: [Band::Optical].into_iter().collect(),
        tracks: vec![],
        schedule: vec![],
        neighbors: vec![],
        failed: false,
    }
}

fn arb_task(id: u32) -> impl Strategy<Value = Task> {
    (0.0..30.0f64, 0.0..30.0f64, 0.0..1.0f64, 0i64..6000, 60i64..4000, 10i64..90).prop_map(
        move |(x, y, weight, ws, len, dur)| Task {
            id,
            name: String::new(),
            location: Point::new(x, y),
            weight,
            window_start: ws,
            window_end: ws + len.max(dur),
            required_duration: dur,
            required_resolution: 2.0,
            required_band: Band::Optical,
        },
    )
}

/// A UAV holding up to five committed tasks plus one more candidate task.
fn arb_loaded() -> impl Strategy<Value = (Resource, Task)> {
    let tasks = (0u32..6).map(arb_task).collect::<Vec<_>>();
    (tasks, 20.0..120.0f64, 100i64..2000, 1u32..8).prop_map(|(tasks, mileage, dur, pow)| {
        let mut r = uav(Budgets { duration_s: dur, poweron: pow, mileage_km: mileage });
        let c = ctx();
        for t in &tasks[..5] {
            let ins = can_insert(&r, t, &c);
            if ins.feasible {
                commit(&mut r, t, &ins);
            }
        }
        (r, tasks[5].clone())
    })
}

fn arb_instance(max_bm: usize) -> impl Strategy<Value = WdpInstance> {
    prop::collection::vec((prop::collection::btree_set(0u64..12, 1..4), 0.1..3.0f64), 0..=max_bm).prop_map(|bids| {
        let (gt, vt): (Vec<Vec<u64>>, Vec<f64>) = bids.into_iter().map(|(s, v)| (s.into_iter().collect(), v)).unzip();
        WdpInstance::new(gt, vt).unwrap()
    })
}

fn brute_value(inst: &WdpInstance) -> f64 {
    let n = inst.len();
    (0u32..(1 << n))
        .map(|m| (0..n).map(|i| m >> i & 1 == 1).collect::<Vec<_>>())
        .filter(|x| is_feasible(inst, x))
        .map(|x| solution_value(inst, &x))
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn more_budget_never_hurts((r, t) in arb_loaded(), extra in 0.0..50.0f64, which in 0usize..3) {
        let c = ctx();
        if can_insert(&r, &t, &c).feasible {
            let mut bigger = r.clone();
            match which {
                0 => bigger.remaining.duration_s += 1 + extra as i64,
                1 => bigger.remaining.poweron += 1,
                _ => bigger.remaining.mileage_km += extra,
            }
            prop_assert!(can_insert(&bigger, &t, &c).feasible);
        }
    }

    #[test]
    fn no_conflicts_iff_insertable((r, t) in arb_loaded()) {
        let c = ctx();
        let feasible = can_insert(&r, &t, &c).feasible;
        let none = matches!(conflicting_tasks(&r, &t, &c), ConflictSet::None);
        prop_assert_eq!(feasible, none);
        if let ConflictSet::Displace { ids, .. } = conflicting_tasks(&r, &t, &c) {
            let mut stripped = r.clone();
            for id in ids {
                stripped.reclaim(id);
            }
            prop_assert!(can_insert(&stripped, &t, &c).feasible);
        }
    }

    #[test]
    fn conflict_degree_is_scale_free(sw in prop::collection::vec(0.0..5.0f64, 1..8), k in 0.01..100.0f64) {
        let scaled: Vec<f64> = sw.iter().map(|s| s * k).collect();
        for (a, b) in conflict_degrees(&sw).iter().zip(conflict_degrees(&scaled)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn price_falls_with_consumption(
        d in 0.0..100.0f64, de in 1.0..1000.0f64, cd in 0.0..10.0f64, le in 10.0..100.0f64,
        more in 0.0..50.0f64, g in 0.0..1.0f64, dg in 0.0..1.0f64,
    ) {
        let w = BidWeights::default();
        let f_lo = consumption_degree(d, de, 1.0, 20.0, cd, le, &w);
        let f_hi = consumption_degree(d + more, de, 1.0, 20.0, cd + more / 10.0, le, &w);
        prop_assert!(f_lo <= f_hi + 1e-12);
        let item = |g: f64, f: f64| BundleItem {
            task_id: 0, conflict_weights: vec![], sw: 0.0, g, duration: 0, poweron: 1, distance: 0.0, f,
            insertion: can_insert(&uav(Budgets::default()), &Task {
                id: 0, name: String::new(), location: Point::default(), weight: 0.0, window_start: 0, window_end: 1,
                required_duration: 1, required_resolution: 1.0, required_band: Band::Optical,
            }, &ctx()),
        };
        prop_assert!(item(g, f_lo).price(&w) >= item(g, f_hi).price(&w) - 1e-12);
        let g_lo = (g - dg).max(0.0);
        prop_assert!(item(g_lo, f_lo).price(&w) >= item(g, f_lo).price(&w) - 1e-12);
    }

    #[test]
    fn bundle_replays_on_fresh_copy((r, _) in arb_loaded(), tasks in (10u32..16).prop_flat_map(|n| (10..n).map(arb_task).collect::<Vec<_>>())) {
        let c = ctx();
        let b = build_bundle(&r, &tasks, &BidWeights::default(), &c);
        let mut fresh = r.clone();
        for item in &b.items {
            let t = tasks.iter().find(|t| t.id == item.task_id).unwrap();
            let ins = can_insert(&fresh, t, &c);
            prop_assert!(ins.feasible);
            commit(&mut fresh, t, &ins);
        }
        let seq: Vec<u32> = fresh.schedule.iter().map(|s| s.task_id).collect();
        prop_assert_eq!(seq, b.sequence);
    }

    #[test]
    fn exact_equals_enumeration(inst in arb_instance(12)) {
        let s = solve_exact(&inst).unwrap();
        prop_assert!(is_feasible(&inst, &s.x));
        prop_assert!((s.value - brute_value(&inst)).abs() < 1e-9);
    }

    #[test]
    fn fls_is_feasible_and_bounded(inst in arb_instance(14), seed in any::<u64>()) {
        let p = FlsParams { rng_seed: seed, ..FlsParams::default() };
        let f = solve_fls(&inst, &p).unwrap();
        prop_assert!(is_feasible(&inst, &f.x));
        prop_assert!((f.value - solution_value(&inst, &f.x)).abs() < 1e-9);
        prop_assert!(f.value <= solve_exact(&inst).unwrap().value + 1e-9);
        prop_assert_eq!(solve_fls(&inst, &p).unwrap(), f);
    }

    #[test]
    fn greedy_escape_ignores_the_seed(inst in arb_instance(10), a in any::<u64>(), b in any::<u64>()) {
        // With distinct prices, sigma = 0 and rho = 1 leave exactly one
        // candidate for every escape move.
        let mut vt = inst.vt.clone();
        for (i, v) in vt.iter_mut().enumerate() {
            *v += i as f64 * 1e-3;
        }
        let inst = WdpInstance::new(inst.gt.clone(), vt).unwrap();
        let p = |s| FlsParams { rng_seed: s, rho: 1.0, sigma: 0.0, ..FlsParams::default() };
        prop_assert_eq!(solve_fls(&inst, &p(a)).unwrap().x, solve_fls(&inst, &p(b)).unwrap().x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn generated_scenarios_validate(seed in any::<u64>(), n in 0u32..80, table1 in any::<bool>()) {
        let mut cfg = ScenarioConfig::profile(if table1 { Profile::Table1 } else { Profile::Table2 }, seed);
        cfg.task_count = n;
        let a = generate_static(&cfg).unwrap();
        let w = &a.world;
        prop_assert!(validate_scenario(&w.tasks, &w.centers, &w.resources, w.horizon_s).is_empty());
        prop_assert_eq!(a.to_json(), generate_static(&cfg).unwrap().to_json());
    }
}
