//! Comparison methods sharing the bidding and feasibility primitives:
//! sequential single-item auction, airship-UAV-satellite ordering, a
//! centralized exact allocation, and clustered exact allocation.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bidding::{build_bundle, build_bundle_in_order, greedy_order};
use crate::error::{Error, Result};
use crate::mca::McaParams;
use crate::model::{AllocationScheme, Point, Provenance, ResourceId, ResourceKind, Task, TaskId, World};
use crate::protocol::{Bid, ContractNet, ContractType, NodeId, Solver, Trace, TraceLevel};
use crate::wdp::ExactParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub exact: ExactParams,
    /// Largest task set the centralized model accepts.
    pub max_central_tasks: usize,
    pub seed: u64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            exact: ExactParams { size_limit: crate::wdp::DEFAULT_SIZE_LIMIT, node_limit: Some(200_000) },
            max_central_tasks: 400,
            seed: 0,
        }
    }
}

fn tasks_of(world: &World, ids: &[TaskId]) -> Result<Vec<Task>> {
    ids.iter().map(|t| world.task(*t).cloned().ok_or(Error::UnknownTask(*t))).collect()
}

/// Weight-descending, then id.
fn auction_order(tasks: &mut [Task]) {
    tasks.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.id.cmp(&b.id)));
}

fn deadline(world: &World) -> i64 {
    (world.clock + 60).min(world.horizon_s)
}

fn single_item_exact() -> Solver {
    Solver::Exact { params: ExactParams::default(), hints: Vec::new() }
}

/// Announces one task to `bidders`, awards it to the best bid and executes.
fn auction_one(
    world: &mut World,
    net: &mut ContractNet,
    scheme: &mut AllocationScheme,
    task: &Task,
    bidders: &[ResourceId],
    method: &str,
) -> Result<bool> {
    let doc = net.announce(world, NodeId::Coordinator, std::slice::from_ref(task), ContractType::Central, deadline(world))?;
    let collected = net.collect_bids(&doc, world, bidders);
    if collected.bids.is_empty() {
        return Ok(false);
    }
    let award = net.award(&doc, world, &collected.bids, &single_item_exact(), false)?;
    let ex = net.execute_contract(&award.contract, world);
    for e in &ex.committed {
        scheme.provenance.insert(e.task_id, Provenance { round: None, method: method.into(), contract_id: doc.contract_id });
    }
    let done = !ex.committed.is_empty();
    scheme.assignments.extend(ex.committed);
    Ok(done)
}

fn live_ids(world: &World, kind: Option<ResourceKind>) -> Vec<ResourceId> {
    world
        .resources
        .iter()
        .filter(|r| !r.failed && kind.is_none_or(|k| r.kind == k))
        .map(|r| r.id)
        .collect()
}

/// Sequential single-item auction: tasks in weight order, each to the
/// highest single-task bid across the whole fleet.
pub fn solve_ssa(world: &mut World, net: &mut ContractNet, tasks: &[TaskId]) -> Result<AllocationScheme> {
    let mut order = tasks_of(world, tasks)?;
    auction_order(&mut order);
    let mut scheme = AllocationScheme::default();
    let all = live_ids(world, None);
    for t in &order {
        if !auction_one(world, net, &mut scheme, t, &all, "ssa")? {
            scheme.unassigned.insert(t.id);
        }
    }
    Ok(scheme)
}

/// Like SSA, but resource classes are tried airship, then UAV, then
/// satellite; the first class with any feasible bid takes the task.
pub fn solve_aus(world: &mut World, net: &mut ContractNet, tasks: &[TaskId]) -> Result<AllocationScheme> {
    let mut order = tasks_of(world, tasks)?;
    auction_order(&mut order);
    let mut scheme = AllocationScheme::default();
    let classes: Vec<Vec<ResourceId>> = [ResourceKind::Airship, ResourceKind::Uav, ResourceKind::Satellite]
        .into_iter()
        .map(|k| live_ids(world, Some(k)))
        .collect();
    for t in &order {
        let mut placed = false;
        for class in &classes {
            if !class.is_empty() && auction_one(world, net, &mut scheme, t, class, "aus")? {
                placed = true;
                break;
            }
        }
        if !placed {
            scheme.unassigned.insert(t.id);
        }
    }
    Ok(scheme)
}

fn quiet_net(net: &ContractNet) -> ContractNet {
    ContractNet::new(net.weights, Trace::new(TraceLevel::Off))
}

type Heuristic<'a> = dyn Fn(&mut World, &mut ContractNet, &[TaskId]) -> Result<AllocationScheme> + 'a;

/// Centralized allocation: every live resource contributes its greedy
/// bundle over all tasks, the bundles it would end up with under the
/// sequential auctions and under MCA, and one bundle per single task it can
/// take. One global winner-determination problem, with at most one bundle
/// per resource, is solved by branch and bound, warm-started from those
/// heuristic allocations.
pub fn solve_exact_central(
    world: &mut World,
    net: &mut ContractNet,
    tasks: &[TaskId],
    params: &BaselineParams,
) -> Result<AllocationScheme> {
    if tasks.len() > params.max_central_tasks {
        return Err(Error::SizeGuard { size: tasks.len(), limit: params.max_central_tasks });
    }
    let mut scheme = AllocationScheme::default();
    let list = tasks_of(world, tasks)?;
    if list.is_empty() {
        return Ok(scheme);
    }

    let heuristic = |f: &Heuristic<'_>| -> Result<BTreeMap<ResourceId, Vec<TaskId>>> {
        let mut w = world.clone();
        let s = f(&mut w, &mut quiet_net(net), tasks)?;
        let mut by: BTreeMap<ResourceId, Vec<TaskId>> = BTreeMap::new();
        for a in s.assignments {
            by.entry(a.resource_id).or_default().push(a.task_id);
        }
        Ok(by)
    };
    let mca = |w: &mut World, n: &mut ContractNet, ids: &[TaskId]| -> Result<AllocationScheme> {
        let mut p = McaParams::default();
        p.fls.rng_seed = params.seed;
        crate::mca::allocate_batch(w, n, ids, &p).map(|(s, _)| s)
    };
    // A single task only has singleton columns, which are added anyway.
    let seeds = if list.len() > 1 {
        vec![heuristic(&solve_ssa)?, heuristic(&solve_aus)?, heuristic(&mca)?]
    } else {
        Vec::new()
    };

    let ctx = world.ctx();
    let mut raw: Vec<(NodeId, Bid)> = Vec::new();
    let mut seen: BTreeSet<(ResourceId, Vec<TaskId>)> = BTreeSet::new();
    let mut push = |raw: &mut Vec<(NodeId, Bid)>, bid: Bid, rid: ResourceId| {
        let mut key_tasks = bid.tasks.clone();
        key_tasks.sort_unstable();
        if !bid.tasks.is_empty() && seen.insert((rid, key_tasks)) {
            raw.push((NodeId::Resource(rid), Bid { exclusive_key: Some(rid), ..bid }));
        }
    };
    for r in world.resources.iter().filter(|r| !r.failed) {
        let greedy = build_bundle(r, &list, &net.weights, &ctx);
        push(&mut raw, Bid::from_bundle(&greedy, world), r.id);
        for s in &seeds {
            if let Some(ids) = s.get(&r.id) {
                let sub: Vec<&Task> = ids.iter().filter_map(|t| world.task(*t)).collect();
                push(&mut raw, Bid::from_bundle(&build_bundle_in_order(r, &sub, &net.weights, &ctx), world), r.id);
            }
        }
        for t in &list {
            let b = build_bundle(r, std::slice::from_ref(t), &net.weights, &ctx);
            push(&mut raw, Bid::from_bundle(&b, world), r.id);
        }
    }

    let doc = net.announce(world, NodeId::Coordinator, &list, ContractType::Central, deadline(world))?;
    let collected = net.receive_bids(&doc, world, raw);
    let hints: Vec<Vec<bool>> = seeds
        .iter()
        .map(|s| {
            collected
                .bids
                .iter()
                .map(|b| {
                    let NodeId::Resource(rid) = b.bidder else { return false };
                    s.get(&rid).is_some_and(|ids| {
                        let mut a = ids.clone();
                        a.sort_unstable();
                        let mut t = b.tasks.clone();
                        t.sort_unstable();
                        a == t
                    })
                })
                .collect()
        })
        .collect();
    let award = net.award(&doc, world, &collected.bids, &Solver::Exact { params: params.exact, hints }, false)?;
    let ex = net.execute_contract(&award.contract, world);
    for e in &ex.committed {
        scheme.provenance.insert(e.task_id, Provenance { round: None, method: "exact".into(), contract_id: doc.contract_id });
    }
    scheme.assignments = ex.committed;
    let assigned = scheme.assigned_ids();
    scheme.unassigned = tasks.iter().copied().filter(|t| !assigned.contains(t)).collect();
    Ok(scheme)
}

/// Clustered allocation: k-means over task locations, then the centralized
/// model on each cluster in turn, westmost centroid first.
pub fn solve_tca(
    world: &mut World,
    net: &mut ContractNet,
    tasks: &[TaskId],
    k: usize,
    params: &BaselineParams,
) -> Result<AllocationScheme> {
    let list = tasks_of(world, tasks)?;
    if list.is_empty() {
        return Ok(AllocationScheme::default());
    }
    if k == 0 {
        return Err(Error::InvalidParam("k must be at least 1".into()));
    }
    let points: Vec<Point> = list.iter().map(|t| t.location).collect();
    let assign = kmeans(&points, k, params.seed);
    let k_eff = assign.iter().max().map_or(0, |m| m + 1);
    let mut clusters: Vec<(f64, Vec<TaskId>)> = (0..k_eff).map(|_| (0.0, Vec::new())).collect();
    for (t, c) in list.iter().zip(&assign) {
        clusters[*c].0 += t.location.x;
        clusters[*c].1.push(t.id);
    }
    let mut clusters: Vec<(f64, Vec<TaskId>)> = clusters
        .into_iter()
        .filter(|(_, ids)| !ids.is_empty())
        .map(|(sx, ids)| (sx / ids.len() as f64, ids))
        .collect();
    clusters.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut scheme = AllocationScheme::default();
    for (_, ids) in clusters {
        let part = solve_exact_central(world, net, &ids, params)?;
        scheme.assignments.extend(part.assignments);
        scheme.unassigned.extend(part.unassigned);
        scheme.provenance.extend(part.provenance);
    }
    Ok(scheme)
}

fn sq(a: Point, b: Point) -> f64 {
    (a.x - b.x).powi(2) + (a.y - b.y).powi(2)
}

/// Lloyd's k-means with seeded farthest-point initialization and a
/// 50-iteration cap. Returns a cluster index per point.
pub fn kmeans(points: &[Point], k: usize, seed: u64) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    let mut k = k.max(1);
    if k > points.len() {
        log::warn!("k = {k} exceeds {} points; reducing", points.len());
        k = points.len();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let farthest = |centers: &[Point]| -> usize {
        let mut best = (0, -1.0);
        for (i, p) in points.iter().enumerate() {
            let d = centers.iter().map(|c| sq(*p, *c)).fold(f64::INFINITY, f64::min);
            if d > best.1 {
                best = (i, d);
            }
        }
        best.0
    };
    let mut centers = vec![points[rng.gen_range(0..points.len())]];
    while centers.len() < k {
        centers.push(points[farthest(&centers)]);
    }

    let mut assign = vec![0; points.len()];
    for _ in 0..50 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let c = (0..k).min_by(|&a, &b| sq(*p, centers[a]).total_cmp(&sq(*p, centers[b])).then(a.cmp(&b))).unwrap_or(0);
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (p, c) in points.iter().zip(&assign) {
            sums[*c].0 += p.x;
            sums[*c].1 += p.y;
            sums[*c].2 += 1;
        }
        for c in 0..k {
            let (sx, sy, n) = sums[c];
            if n > 0 {
                centers[c] = Point::new(sx / n as f64, sy / n as f64);
            } else {
                let others: Vec<Point> = (0..k).filter(|o| *o != c).map(|o| centers[o]).collect();
                let f = farthest(&others);
                centers[c] = points[f];
                assign[f] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    assign
}

/// Within-cluster sum of squared distances to cluster means.
pub fn sse(points: &[Point], assign: &[usize]) -> f64 {
    let k = assign.iter().max().map_or(0, |m| m + 1);
    let mut sums = vec![(0.0, 0.0, 0usize); k];
    for (p, c) in points.iter().zip(assign) {
        sums[*c].0 += p.x;
        sums[*c].1 += p.y;
        sums[*c].2 += 1;
    }
    points
        .iter()
        .zip(assign)
        .map(|(p, c)| {
            let (sx, sy, n) = sums[*c];
            sq(*p, Point::new(sx / n as f64, sy / n as f64))
        })
        .sum()
}

/// Orders task ids the way every sequential method visits them.
pub fn visit_order(world: &World, ids: &[TaskId]) -> Vec<TaskId> {
    let mut tasks: Vec<&Task> = ids.iter().filter_map(|t| world.task(*t)).collect();
    greedy_order(&mut tasks);
    tasks.iter().map(|t| t.id).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::PassModel;
    use crate::model::{Band, BidWeights, Budgets, GroundTrack, LatencyModel, PlanningCenter, Region, Resource};
    use crate::scenario::{generate_static, Profile, ScenarioConfig};

    fn res(id: ResourceId, kind: ResourceKind, x: f64, poweron: u32) -> Resource {
        let cap = Budgets { duration_s: 4000, poweron, mileage_km: 300.0 };
        Resource {
            id,
            kind,
            center_id: id,
            position: Point::new(x, 0.0),
            cruise_speed_kmh: 60.0,
            capacity: cap,
            remaining: cap,
            visible_width_m: 5000.0,
            side_swing_deg: 25.0,
            max_resolution_m: 1.0,
            bands: match kind {
                ResourceKind::Satellite => [Band::Sar].into_iter().collect(),
                _ => [Band::Optical].into_iter().collect(),
            },
            tracks: match kind {
                ResourceKind::Satellite => vec![GroundTrack { t0: 1000, origin: Point::new(-50.0, 0.0), heading_deg: 0.0 }],
                _ => vec![],
            },
            schedule: vec![],
            neighbors: vec![],
            failed: false,
        }
    }

    fn task(id: TaskId, x: f64, band: Band) -> Task {
        Task {
            id,
            name: String::new(),
            location: Point::new(x, 0.5),
            weight: 0.9 - 0.1 * f64::from(id),
            window_start: 0,
            window_end: 20_000,
            required_duration: 20,
            required_resolution: 2.0,
            required_band: band,
        }
    }

    fn world(resources: Vec<Resource>, tasks: Vec<Task>) -> World {
        let centers = resources
            .iter()
            .map(|r| PlanningCenter { id: r.id, kind: r.kind, resource_ids: vec![r.id], peer_center_ids: vec![] })
            .collect();
        World {
            horizon_s: 21_600,
            region_km: Region { width_km: 100.0, height_km: 100.0 },
            centers,
            resources,
            tasks,
            clock: 0,
            pass_model: PassModel::default(),
            comm_radius_km: 30.0,
            blackouts: vec![],
            latency: LatencyModel::default(),
        }
    }

    fn net() -> ContractNet {
        ContractNet::new(BidWeights::default(), Trace::new(TraceLevel::Info))
    }

    fn all(w: &World) -> Vec<TaskId> {
        w.tasks.iter().map(|t| t.id).collect()
    }

    #[test]
    fn ssa_single_capable_resource() {
        let mut w = world(vec![res(0, ResourceKind::Uav, 0.0, 5)], vec![task(0, 3.0, Band::Optical)]);
        let ids = all(&w);
        let s = solve_ssa(&mut w, &mut net(), &ids).unwrap();
        assert_eq!(s.resource_of().get(&0), Some(&0));
    }

    #[test]
    fn ssa_respects_single_slot() {
        let mut w = world(vec![res(0, ResourceKind::Uav, 0.0, 1)], vec![task(0, 3.0, Band::Optical), task(1, 4.0, Band::Optical)]);
        let ids = all(&w);
        let s = solve_ssa(&mut w, &mut net(), &ids).unwrap();
        assert_eq!(s.assignments.len(), 1);
        assert_eq!(s.unassigned.len(), 1);
    }

    #[test]
    fn aus_prefers_airship_over_cheaper_uav() {
        let mut w = world(
            vec![res(0, ResourceKind::Uav, 10.0, 5), res(1, ResourceKind::Airship, 60.0, 5)],
            vec![task(0, 10.0, Band::Optical)],
        );
        let ids = all(&w);
        let ctx = w.ctx();
        let uav = crate::bidding::single_task_bid(&w.resources[0], &w.tasks[0], &BidWeights::default(), &ctx).unwrap();
        let ship = crate::bidding::single_task_bid(&w.resources[1], &w.tasks[0], &BidWeights::default(), &ctx).unwrap();
        assert!(uav.price > ship.price);
        let s = solve_aus(&mut w, &mut net(), &ids).unwrap();
        assert_eq!(s.resource_of().get(&0), Some(&1));
    }

    #[test]
    fn aus_falls_back_to_satellite() {
        let mut w = world(
            vec![res(0, ResourceKind::Uav, 10.0, 5), res(1, ResourceKind::Satellite, 0.0, 5)],
            vec![task(0, 10.0, Band::Sar), task(1, 10.0, Band::Infrared)],
        );
        let ids = all(&w);
        let s = solve_aus(&mut w, &mut net(), &ids).unwrap();
        assert_eq!(s.resource_of().get(&0), Some(&1));
        assert!(s.unassigned.contains(&1));
    }

    #[test]
    fn exact_assigns_everything_one_resource_can_do() {
        let tasks = (0..4).map(|i| task(i, f64::from(i), Band::Optical)).collect();
        let mut w = world(vec![res(0, ResourceKind::Uav, 0.0, 10)], tasks);
        let ids = all(&w);
        let s = solve_exact_central(&mut w, &mut net(), &ids, &BaselineParams::default()).unwrap();
        assert_eq!(s.assignments.len(), 4);
        assert!(s.provenance.values().all(|p| p.method == "exact"));
    }

    #[test]
    fn exact_matches_pair_enumeration() {
        let tasks: Vec<Task> = (0..3).map(|i| task(i, 2.0 + f64::from(i), Band::Optical)).collect();
        let resources = vec![res(0, ResourceKind::Uav, 0.0, 2), res(1, ResourceKind::Uav, 6.0, 1)];
        let mut w = world(resources, tasks);
        let ids = all(&w);
        // Every subset of the six (resource, task) pairs that uses each task
        // at most once and fits each resource's schedule.
        let ctx = w.ctx();
        let mut best = 0;
        for mask in 0u32..64 {
            let pairs: Vec<(usize, usize)> = (0..6).filter(|b| mask >> b & 1 == 1).map(|b| (b / 3, b % 3)).collect();
            let mut used = BTreeSet::new();
            if !pairs.iter().all(|(_, t)| used.insert(*t)) {
                continue;
            }
            let fits = (0..2).all(|r| {
                let mine: Vec<Task> = pairs.iter().filter(|p| p.0 == r).map(|p| w.tasks[p.1].clone()).collect();
                build_bundle(&w.resources[r], &mine, &BidWeights::default(), &ctx).items.len() == mine.len()
            });
            if fits {
                best = best.max(pairs.len());
            }
        }
        let s = solve_exact_central(&mut w, &mut net(), &ids, &BaselineParams::default()).unwrap();
        assert_eq!(s.assignments.len(), best);
        assert_eq!(best, 3);
    }

    #[test]
    fn exact_guard_refuses_large_sets() {
        let tasks = (0..5).map(|i| task(i, f64::from(i), Band::Optical)).collect();
        let mut w = world(vec![res(0, ResourceKind::Uav, 0.0, 10)], tasks);
        let ids = all(&w);
        let p = BaselineParams { max_central_tasks: 4, ..Default::default() };
        assert!(matches!(solve_exact_central(&mut w, &mut net(), &ids, &p), Err(Error::SizeGuard { size: 5, limit: 4 })));
    }

    #[test]
    fn tca_with_one_cluster_is_exact() {
        let mut cfg = ScenarioConfig::profile(Profile::Table2, 4);
        cfg.task_count = 40;
        let sc = generate_static(&cfg).unwrap();
        let ids = all(&sc.world);
        let p = BaselineParams { seed: 4, ..Default::default() };
        let (mut a, mut b) = (sc.world.clone(), sc.world.clone());
        let sa = solve_exact_central(&mut a, &mut net(), &ids, &p).unwrap();
        let sb = solve_tca(&mut b, &mut net(), &ids, 1, &p).unwrap();
        assert_eq!(serde_json::to_string(&sa).unwrap(), serde_json::to_string(&sb).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn tca_rejects_zero_clusters() {
        let mut w = world(vec![res(0, ResourceKind::Uav, 0.0, 10)], vec![task(0, 1.0, Band::Optical)]);
        assert!(solve_tca(&mut w, &mut net(), &[0], 0, &BaselineParams::default()).is_err());
    }

    #[test]
    fn kmeans_one_cluster() {
        let pts: Vec<Point> = (0..10).map(|i| Point::new(i as f64, 0.0)).collect();
        assert!(kmeans(&pts, 1, 3).iter().all(|c| *c == 0));
    }

    #[test]
    fn kmeans_separates_blobs() {
        let mut pts: Vec<Point> = (0..10).map(|i| Point::new(i as f64 * 0.1, 0.0)).collect();
        pts.extend((0..10).map(|i| Point::new(100.0 + i as f64 * 0.1, 50.0)));
        let a = kmeans(&pts, 2, 9);
        assert!(a[..10].iter().all(|c| *c == a[0]));
        assert!(a[10..].iter().all(|c| *c == a[10]));
        assert_ne!(a[0], a[10]);
    }

    #[test]
    fn kmeans_beats_random_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Point> = (0..10).map(|_| Point::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0))).collect();
        let a = kmeans(&pts, 3, 5);
        let random: Vec<usize> = (0..10).map(|i| i % 3).collect();
        assert!(sse(&pts, &a) <= sse(&pts, &random));
    }

    #[test]
    fn kmeans_clamps_k() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0)];
        let a = kmeans(&pts, 5, 0);
        assert_eq!(a.len(), 2);
        assert_ne!(a[0], a[1]);
    }
}
