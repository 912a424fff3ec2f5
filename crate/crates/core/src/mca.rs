//! Multiround combinatorial allocation over the bottom-up framework.
//!
//! Round 1 auctions the tasks among the initiating resource's neighbours,
//! round 2 among every resource of its planning center, and round 3 among
//! the peer centers, each of which answers with a composite bid assembled
//! from its own internal auction. Each round only sees what the previous
//! rounds left over.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::Blackout;
use crate::model::{AllocationScheme, CenterId, Provenance, ResourceId, ScheduledTask, Seconds, Task, TaskId, World};
use crate::protocol::{Bid, ContractNet, ContractType, Execution, NodeId, Solver};
use crate::wdp::FlsParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "id")]
pub enum Initiator {
    Resource(ResourceId),
    Center(CenterId),
}

/// Who opens the negotiation for newly arrived tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalRouting {
    /// The live mobile resource nearest the arrivals' centroid, from round 1.
    Centroid,
    /// That resource's planning center, from round 2.
    Center,
    /// Each task goes to its nearest live mobile resource; every such
    /// resource opens its own negotiation from round 1.
    #[default]
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McaParams {
    pub fls: FlsParams,
    /// Simulated seconds each round leaves bidders before its deadline.
    pub round_budget_s: Seconds,
    pub arrival_routing: ArrivalRouting,
}

impl Default for McaParams {
    fn default() -> Self {
        Self { fls: FlsParams::default(), round_budget_s: 60, arrival_routing: ArrivalRouting::Nearest }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub level: u8,
    pub tenderer: NodeId,
    pub contract_id: Option<u64>,
    pub allocated: Vec<ScheduledTask>,
    pub remaining: BTreeSet<TaskId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McaResult {
    pub scheme: AllocationScheme,
    pub rounds: Vec<RoundOutcome>,
    /// Wall time spent in each level, in milliseconds.
    pub level_ms: [f64; 3],
}

fn fls_for(params: &McaParams, contract_id: u64) -> Solver {
    let seed = crate::splitmix64(params.fls.rng_seed ^ contract_id.rotate_left(17));
    Solver::Fls(FlsParams { rng_seed: seed, ..params.fls })
}

fn deadline(world: &World, params: &McaParams) -> Seconds {
    (world.clock + params.round_budget_s).min(world.horizon_s)
}

struct RoundState<'a> {
    scheme: &'a mut AllocationScheme,
    rounds: &'a mut Vec<RoundOutcome>,
    remaining: BTreeSet<TaskId>,
}

impl RoundState<'_> {
    fn record(&mut self, level: u8, tenderer: NodeId, contract_id: Option<u64>, ex: Option<Execution>) {
        let allocated = ex.map(|e| e.committed).unwrap_or_default();
        for a in &allocated {
            self.remaining.remove(&a.task_id);
            self.scheme.provenance.insert(
                a.task_id,
                Provenance { round: Some(level), method: "mca".into(), contract_id: contract_id.unwrap_or(0) },
            );
        }
        self.scheme.assignments.extend(allocated.iter().cloned());
        self.rounds.push(RoundOutcome { level, tenderer, contract_id, allocated, remaining: self.remaining.clone() });
    }
}

/// One auction among resources: announce, collect, award by FLS, execute.
fn resource_round(
    world: &mut World,
    net: &mut ContractNet,
    state: &mut RoundState<'_>,
    level: u8,
    tenderer: NodeId,
    bidders: &[ResourceId],
    params: &McaParams,
) -> Result<()> {
    let tasks: Vec<Task> = state.remaining.iter().filter_map(|t| world.task(*t).cloned()).collect();
    let kind = if level == 1 { ContractType::NeighborRound } else { ContractType::CenterRound };
    let doc = net.announce(world, tenderer, &tasks, kind, deadline(world, params))?;
    let collected = net.collect_bids(&doc, world, bidders);
    let ex = match net.award(&doc, world, &collected.bids, &fls_for(params, doc.contract_id), false) {
        Ok(award) => Some(net.execute_contract(&award.contract, world)),
        Err(Error::Invariant(e)) => return Err(Error::Invariant(e)),
        Err(_) => None,
    };
    state.record(level, tenderer, Some(doc.contract_id), ex);
    Ok(())
}

/// A peer center's answer to an inter-center announcement: the union of the
/// bundles its own resources win in an internal auction, at their summed
/// price. The internal award is tentative; nothing is committed here.
pub fn center_composite_bid(
    world: &World,
    net: &mut ContractNet,
    center: CenterId,
    tasks: &[Task],
    params: &McaParams,
) -> Result<Option<Bid>> {
    let c = world.center(center).ok_or(Error::UnknownCenter(center))?;
    if tasks.is_empty() {
        return Ok(None);
    }
    let doc = net.announce(world, NodeId::Center(center), tasks, ContractType::CenterRound, deadline(world, params))?;
    let collected = net.collect_bids(&doc, world, &c.resource_ids);
    if collected.bids.is_empty() {
        return Ok(None);
    }
    let award = net.award(&doc, world, &collected.bids, &fls_for(params, doc.contract_id), true)?;
    if award.contract.bundles.is_empty() {
        return Ok(None);
    }
    let winners: BTreeSet<NodeId> = award.contract.winners.iter().copied().collect();
    let mut bid = Bid {
        bidder: NodeId::Center(center),
        tasks: Vec::new(),
        price: 0.0,
        parts: Vec::new(),
        execution_scheme: Vec::new(),
        sequence: Vec::new(),
        exclusive_key: None,
    };
    for b in collected.bids.iter().filter(|b| winners.contains(&b.bidder)) {
        bid.tasks.extend(&b.tasks);
        bid.price += b.price;
        bid.parts.extend(b.parts.iter().cloned());
        bid.execution_scheme.extend(b.execution_scheme.iter().cloned());
    }
    bid.tasks.sort_unstable();
    Ok(Some(bid))
}

/// Runs the three rounds for `tasks` starting at `initiator`.
pub fn run_mca(
    world: &mut World,
    net: &mut ContractNet,
    tasks: &[TaskId],
    initiator: Initiator,
    params: &McaParams,
) -> Result<McaResult> {
    let mut scheme = AllocationScheme::default();
    let mut rounds = Vec::new();
    let mut level_ms = [0.0; 3];
    let remaining: BTreeSet<TaskId> = tasks.iter().copied().filter(|t| world.holder(*t).is_none()).collect();
    for t in &remaining {
        if world.task(*t).is_none() {
            return Err(Error::UnknownTask(*t));
        }
    }
    let mut state = RoundState { scheme: &mut scheme, rounds: &mut rounds, remaining };

    let center = match initiator {
        Initiator::Resource(r) => world.resource(r).ok_or(Error::UnknownResource(r))?.center_id,
        Initiator::Center(c) => c,
    };
    if world.center(center).is_none() {
        return Err(Error::UnknownCenter(center));
    }

    if let Initiator::Resource(r) = initiator {
        let neighbors: Vec<ResourceId> = world
            .resource(r)
            .map(|res| res.neighbors.clone())
            .unwrap_or_default()
            .into_iter()
            .filter(|n| world.resource(*n).is_some_and(|x| !x.failed))
            .collect();
        if !neighbors.is_empty() && !state.remaining.is_empty() {
            let t0 = Instant::now();
            resource_round(world, net, &mut state, 1, NodeId::Resource(r), &neighbors, params)?;
            level_ms[0] = t0.elapsed().as_secs_f64() * 1e3;
        }
    }

    if !state.remaining.is_empty() {
        let t0 = Instant::now();
        let members = world.center(center).map(|c| c.resource_ids.clone()).unwrap_or_default();
        resource_round(world, net, &mut state, 2, NodeId::Center(center), &members, params)?;
        level_ms[1] = t0.elapsed().as_secs_f64() * 1e3;
    }

    if !state.remaining.is_empty() {
        let t0 = Instant::now();
        let peers = world.center(center).map(|c| c.peer_center_ids.clone()).unwrap_or_default();
        if !peers.is_empty() {
            let tasks: Vec<Task> = state.remaining.iter().filter_map(|t| world.task(*t).cloned()).collect();
            let tenderer = NodeId::Center(center);
            let doc = net.announce(world, tenderer, &tasks, ContractType::InterCenterRound, deadline(world, params))?;
            let mut raw = Vec::new();
            for p in peers {
                if let Some(bid) = center_composite_bid(world, net, p, &tasks, params)? {
                    raw.push((NodeId::Center(p), bid));
                }
            }
            let collected = net.receive_bids(&doc, world, raw);
            let ex = match net.award(&doc, world, &collected.bids, &fls_for(params, doc.contract_id), false) {
                Ok(award) => {
                    let chosen: BTreeSet<NodeId> = award.contract.winners.iter().copied().collect();
                    for b in &collected.bids {
                        let stage = if chosen.contains(&b.bidder) { "confirm" } else { "rollback" };
                        net.trace.emit(world.clock, Some(doc.contract_id), stage, &b.bidder, false);
                    }
                    Some(net.execute_contract(&award.contract, world))
                }
                Err(Error::Invariant(e)) => return Err(Error::Invariant(e)),
                Err(_) => None,
            };
            state.record(3, tenderer, Some(doc.contract_id), ex);
        }
        level_ms[2] = t0.elapsed().as_secs_f64() * 1e3;
    }

    let unassigned = state.remaining.clone();
    scheme.unassigned = unassigned;
    for r in &rounds {
        net.trace.emit(world.clock, r.contract_id, "round", r, true);
    }
    Ok(McaResult { scheme, rounds, level_ms })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DisturbanceKind {
    ResourceFailure { resource_id: ResourceId },
    WeatherBlackout { blackout: Blackout },
    TaskArrival { tasks: Vec<Task> },
    TaskChange { task: Task },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceEvent {
    pub time: Seconds,
    #[serde(flatten)]
    pub kind: DisturbanceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanRequest {
    pub tasks: Vec<TaskId>,
    pub initiator: Initiator,
}

fn nearest_live_mobile(world: &World, tasks: &[&Task]) -> Option<ResourceId> {
    if tasks.is_empty() {
        return None;
    }
    let n = tasks.len() as f64;
    let cx = tasks.iter().map(|t| t.location.x).sum::<f64>() / n;
    let cy = tasks.iter().map(|t| t.location.y).sum::<f64>() / n;
    let centroid = crate::model::Point::new(cx, cy);
    world
        .resources
        .iter()
        .filter(|r| r.kind.is_mobile() && !r.failed)
        .min_by(|a, b| {
            a.current_position()
                .distance(centroid)
                .total_cmp(&b.current_position().distance(centroid))
                .then(a.id.cmp(&b.id))
        })
        .map(|r| r.id)
}

/// Groups tasks already in the world by the initiator that should open
/// their negotiation, following `params.arrival_routing`.
fn route(world: &World, ids: &[TaskId], params: &McaParams) -> Result<Vec<ReplanRequest>> {
    let tasks: Vec<&Task> = ids.iter().map(|t| world.task(*t).ok_or(Error::UnknownTask(*t))).collect::<Result<_>>()?;
    if tasks.is_empty() {
        return Ok(Vec::new());
    }
    if params.arrival_routing == ArrivalRouting::Nearest {
        let mut groups: BTreeMap<ResourceId, Vec<TaskId>> = BTreeMap::new();
        for t in &tasks {
            if let Some(rid) = nearest_live_mobile(world, &[t]) {
                groups.entry(rid).or_default().push(t.id);
            }
        }
        if !groups.is_empty() {
            return Ok(groups
                .into_iter()
                .map(|(rid, tasks)| ReplanRequest { tasks, initiator: Initiator::Resource(rid) })
                .collect());
        }
    }
    let ids = ids.to_vec();
    Ok(match nearest_live_mobile(world, &tasks) {
        Some(rid) => {
            let initiator = match params.arrival_routing {
                ArrivalRouting::Center => Initiator::Center(world.resource(rid).expect("live").center_id),
                _ => Initiator::Resource(rid),
            };
            vec![ReplanRequest { tasks: ids, initiator }]
        }
        None => match world.centers.first() {
            Some(c) => vec![ReplanRequest { tasks: ids, initiator: Initiator::Center(c.id) }],
            None => Vec::new(),
        },
    })
}

/// Applies a disturbance to the world and returns what must be replanned,
/// grouped by initiator.
pub fn handle_disturbance(
    world: &mut World,
    net: &mut ContractNet,
    event: &DisturbanceEvent,
    params: &McaParams,
) -> Result<Vec<ReplanRequest>> {
    if event.time < world.clock {
        return Err(Error::EventInPast { event: event.time, clock: world.clock });
    }
    if event.time > world.horizon_s {
        return Err(Error::InvalidParam(format!("event at {}s is beyond the horizon", event.time)));
    }
    match &event.kind {
        DisturbanceKind::ResourceFailure { resource_id } => {
            world.resource(*resource_id).ok_or(Error::UnknownResource(*resource_id))?;
        }
        DisturbanceKind::TaskChange { task } => {
            world.task(task.id).ok_or(Error::UnknownTask(task.id))?;
        }
        _ => {}
    }
    world.advance_to(event.time);

    let requests = match &event.kind {
        DisturbanceKind::ResourceFailure { resource_id } => {
            let res = world.resource_mut(*resource_id).expect("checked above");
            res.failed = true;
            let center = res.center_id;
            let pending: Vec<TaskId> = res.pending().map(|s| s.task_id).collect();
            for t in &pending {
                net.reclaim(world, *t, "resource_failure");
            }
            world.refresh_neighbors();
            if pending.is_empty() {
                Vec::new()
            } else {
                vec![ReplanRequest { tasks: pending, initiator: Initiator::Center(center) }]
            }
        }
        DisturbanceKind::WeatherBlackout { blackout } => {
            world.blackouts.push(*blackout);
            let mut hit: BTreeMap<ResourceId, Vec<TaskId>> = BTreeMap::new();
            for r in &world.resources {
                for s in r.pending() {
                    if blackout.blocks(s.location, s.exec_start, s.exec_end) {
                        hit.entry(r.id).or_default().push(s.task_id);
                    }
                }
            }
            let mut out = Vec::new();
            for (rid, tasks) in hit {
                for t in &tasks {
                    net.reclaim(world, *t, "weather_blackout");
                }
                let res = world.resource(rid).expect("listed above");
                let initiator =
                    if res.failed { Initiator::Center(res.center_id) } else { Initiator::Resource(rid) };
                out.push(ReplanRequest { tasks, initiator });
            }
            out
        }
        DisturbanceKind::TaskArrival { tasks } => {
            let ids: Vec<TaskId> = tasks.iter().map(|t| t.id).collect();
            world.add_tasks(tasks.iter().cloned());
            world.refresh_neighbors();
            route(world, &ids, params)?
        }
        DisturbanceKind::TaskChange { task } => {
            let holder = world.holder(task.id).map(|s| (s.resource_id, s.state));
            if let Some((_, crate::model::TaskState::Pending)) = holder {
                net.reclaim(world, task.id, "task_change");
            }
            if let Ok(i) = world.tasks.binary_search_by_key(&task.id, |t| t.id) {
                world.tasks[i] = task.clone();
            }
            match holder {
                Some((_, s)) if s != crate::model::TaskState::Pending => Vec::new(),
                Some((rid, _)) => {
                    let res = world.resource(rid).expect("holder exists");
                    let initiator =
                        if res.failed { Initiator::Center(res.center_id) } else { Initiator::Resource(rid) };
                    vec![ReplanRequest { tasks: vec![task.id], initiator }]
                }
                None => match nearest_live_mobile(world, &[task]) {
                    Some(rid) => vec![ReplanRequest { tasks: vec![task.id], initiator: Initiator::Resource(rid) }],
                    None => Vec::new(),
                },
            }
        }
    };
    Ok(requests)
}

/// Allocates a batch of known tasks as if they had just arrived: routes them
/// like an arrival and runs every resulting negotiation in turn. Returns the
/// merged scheme and the wall time per level.
pub fn allocate_batch(
    world: &mut World,
    net: &mut ContractNet,
    tasks: &[TaskId],
    params: &McaParams,
) -> Result<(AllocationScheme, [f64; 3])> {
    let mut scheme = AllocationScheme::default();
    let mut level_ms = [0.0; 3];
    for req in route(world, tasks, params)? {
        let res = run_mca(world, net, &req.tasks, req.initiator, params)?;
        let placed = res.scheme.assigned_ids();
        scheme.unassigned.retain(|t| !placed.contains(t));
        scheme.assignments.extend(res.scheme.assignments);
        scheme.unassigned.extend(res.scheme.unassigned);
        scheme.provenance.extend(res.scheme.provenance);
        for (a, b) in level_ms.iter_mut().zip(res.level_ms) {
            *a += b;
        }
    }
    Ok((scheme, level_ms))
}
