//! Contract-net negotiation: announcement, bidding, awarding and execution,
//! plus the NDJSON trace every stage writes to.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bidding::{build_bundle, Bundle};
use crate::error::{Error, Result};
use crate::feasibility::{can_insert, commit};
use crate::model::{
    Band, CenterId, Point, ResourceId, ScheduledTask, Seconds, Task, TaskId, World,
};
use crate::wdp::{self, ExactParams, FlsParams, ItemId, WdpInstance, WdpSolution, EXCLUSIVE_BIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "node", content = "id")]
pub enum NodeId {
    Resource(ResourceId),
    Center(CenterId),
    /// The global allocator used by the centralized baselines.
    Coordinator,
}

impl NodeId {
    fn key(self) -> u64 {
        match self {
            NodeId::Resource(r) => u64::from(r),
            NodeId::Center(c) => 1 << 32 | u64::from(c),
            NodeId::Coordinator => 1 << 33,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractType {
    NeighborRound,
    CenterRound,
    InterCenterRound,
    /// Single-shot allocation by a baseline method.
    Central,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInfo {
    pub task_id: TaskId,
    pub name: String,
    pub window: (Seconds, Seconds),
    pub location: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRequirement {
    pub task_id: TaskId,
    pub band: Band,
    pub resolution_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDocument {
    pub contract_id: u64,
    pub contract_type: ContractType,
    pub tenderer: NodeId,
    pub issued_at: Seconds,
    pub task_info: Vec<TaskInfo>,
    pub task_requirement: Vec<TaskRequirement>,
    pub task_weight: Vec<f64>,
    pub expire_time: Seconds,
    pub quote_requirement: (f64, f64),
}

impl TaskDocument {
    pub fn task_ids(&self) -> Vec<TaskId> {
        self.task_info.iter().map(|t| t.task_id).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionItem {
    pub task_id: TaskId,
    pub resource_id: ResourceId,
    pub exec_start: Seconds,
    pub resolution_m: f64,
    pub band: Band,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IndicatorsStatus {
    /// Every offered task matches the bidder's bands and resolution.
    pub capability_met: bool,
    /// Every offered execution lies inside its task window.
    pub window_met: bool,
    pub arrived_on_time: bool,
    /// The heuristic price fell outside the quote range and was clamped.
    pub price_clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidDocument {
    pub contract_id: u64,
    pub bidder: NodeId,
    pub bid: bool,
    pub execution_scheme: Vec<ExecutionItem>,
    pub bid_price: f64,
    pub task_sequences: Vec<TaskId>,
    pub indicators_status: IndicatorsStatus,
}

/// A bid as the tenderer sees it: which tasks, at what price, and which
/// resources would execute which part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub bidder: NodeId,
    pub tasks: Vec<TaskId>,
    pub price: f64,
    pub parts: Vec<(ResourceId, Vec<TaskId>)>,
    pub execution_scheme: Vec<ExecutionItem>,
    pub sequence: Vec<TaskId>,
    /// Bids sharing a key are mutually exclusive in winner determination.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusive_key: Option<u32>,
}

impl Bid {
    pub fn from_bundle(bundle: &Bundle, world: &World) -> Self {
        let tasks = bundle.task_ids();
        let execution_scheme = bundle
            .items
            .iter()
            .filter_map(|i| {
                let t = world.task(i.task_id)?;
                Some(ExecutionItem {
                    task_id: i.task_id,
                    resource_id: bundle.bidder_id,
                    exec_start: i.insertion.exec_start,
                    resolution_m: world.resource(bundle.bidder_id).map_or(0.0, |r| r.max_resolution_m),
                    band: t.required_band,
                })
            })
            .collect();
        Self {
            bidder: NodeId::Resource(bundle.bidder_id),
            parts: vec![(bundle.bidder_id, tasks.clone())],
            tasks,
            price: bundle.price,
            execution_scheme,
            sequence: bundle.sequence.clone(),
            exclusive_key: None,
        }
    }

    fn items(&self) -> Vec<ItemId> {
        let mut items: Vec<ItemId> = self.tasks.iter().map(|t| ItemId::from(*t)).collect();
        if let Some(k) = self.exclusive_key {
            items.push(EXCLUSIVE_BIT | ItemId::from(k));
        }
        items
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collected {
    /// On-time, non-empty bids in bidder order.
    pub bids: Vec<Bid>,
    /// One document per bidder, including refusals and late bids.
    pub documents: Vec<BidDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwardedBundle {
    pub bidder: NodeId,
    pub tasks: Vec<TaskId>,
    pub price: f64,
    pub parts: Vec<(ResourceId, Vec<TaskId>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub contract_id: u64,
    pub contract_type: ContractType,
    pub winners: Vec<NodeId>,
    pub bundles: Vec<AwardedBundle>,
    pub value: f64,
    pub signed_at: Seconds,
    /// Awarded inside a composite bid; not executed on its own.
    #[serde(default)]
    pub tentative: bool,
}

impl Contract {
    pub fn task_ids(&self) -> BTreeSet<TaskId> {
        self.bundles.iter().flat_map(|b| b.tasks.iter().copied()).collect()
    }
}

#[derive(Debug, Clone)]
pub enum Solver {
    Fls(FlsParams),
    Exact { params: ExactParams, hints: Vec<Vec<bool>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Award {
    pub contract: Contract,
    pub unallocated: Vec<TaskId>,
    pub solution: WdpSolution,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Execution {
    pub contract_id: u64,
    pub committed: Vec<ScheduledTask>,
    /// Flight distance each committed task added to its resource's route.
    pub added_km: Vec<(TaskId, f64)>,
    pub voided: bool,
    /// Tasks returned to the pool because the contract was voided.
    pub returned: Vec<TaskId>,
    /// True when this contract had already been executed.
    pub replay: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceLevel {
    Off,
    Info,
    Trace,
}

impl TraceLevel {
    /// Reads `OBSNET_LOG`; unset or unrecognized values mean `info`.
    pub fn from_env() -> Self {
        match std::env::var("OBSNET_LOG").as_deref() {
            Ok("off") => TraceLevel::Off,
            Ok("trace") => TraceLevel::Trace,
            _ => TraceLevel::Info,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct TraceLine<'a, T: Serialize> {
    seq: u64,
    clock: Seconds,
    contract_id: Option<u64>,
    stage: &'a str,
    digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<&'a T>,
}

/// In-memory NDJSON event log. Each line carries the stage, the contract id
/// and a sha256 digest of the stage payload; the payload itself is included
/// at `trace` level, and for state-changing stages at `info` level too.
#[derive(Debug, Clone)]
pub struct Trace {
    pub level: TraceLevel,
    lines: Vec<String>,
    seq: u64,
}

impl Trace {
    pub fn new(level: TraceLevel) -> Self {
        Self { level, lines: Vec::new(), seq: 0 }
    }

    pub fn emit<T: Serialize>(&mut self, clock: Seconds, contract_id: Option<u64>, stage: &str, payload: &T, essential: bool) {
        if self.level == TraceLevel::Off {
            return;
        }
        let body = serde_json::to_vec(payload).expect("trace payloads serialize");
        let digest = hex::encode(Sha256::digest(&body));
        let with_data = self.level == TraceLevel::Trace || essential;
        let line = TraceLine { seq: self.seq, clock, contract_id, stage, digest, data: with_data.then_some(payload) };
        self.seq += 1;
        self.lines.push(serde_json::to_string(&line).expect("trace lines serialize"));
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    /// Appends another trace's lines, keeping their own sequence numbers.
    pub fn append(&mut self, other: &Trace) {
        self.lines.extend(other.lines.iter().cloned());
    }

    pub fn to_ndjson(&self) -> String {
        let mut s = self.lines.join("\n");
        if !s.is_empty() {
            s.push('\n');
        }
        s
    }

    /// Digest over the whole log, for reproducibility checks.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_ndjson().as_bytes()))
    }
}

impl Default for Trace {
    fn default() -> Self {
        Self::new(TraceLevel::Info)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProtocolStats {
    pub announcements: u64,
    pub awards: u64,
    pub executions: u64,
    pub voided: u64,
}

/// Execute-stage payload; its per-task distances let metrics be rebuilt
/// from the trace alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecuteRecord {
    pub committed: Vec<(TaskId, ResourceId, Seconds, f64)>,
    pub voided: bool,
    pub returned: Vec<TaskId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReclaimRecord {
    pub task_id: TaskId,
    pub resource_id: ResourceId,
    pub restored_km: f64,
    pub reason: String,
}

/// The negotiation engine. Holds the contract-id counter, the set of
/// executed contracts and the trace; the world is passed in per call.
#[derive(Debug, Clone)]
pub struct ContractNet {
    next_id: u64,
    executed: BTreeSet<u64>,
    live: BTreeMap<TaskId, u64>,
    pub weights: crate::model::BidWeights,
    pub trace: Trace,
    pub stats: ProtocolStats,
}

impl ContractNet {
    pub fn new(weights: crate::model::BidWeights, trace: Trace) -> Self {
        Self { next_id: 1, executed: BTreeSet::new(), live: BTreeMap::new(), weights, trace, stats: ProtocolStats::default() }
    }

    pub fn announce(
        &mut self,
        world: &World,
        tenderer: NodeId,
        tasks: &[Task],
        contract_type: ContractType,
        deadline: Seconds,
    ) -> Result<TaskDocument> {
        if tasks.is_empty() {
            return Err(Error::EmptyAnnouncement);
        }
        if deadline > world.horizon_s {
            return Err(Error::DeadlineBeyondHorizon { deadline, horizon: world.horizon_s });
        }
        let contract_id = self.next_id;
        self.next_id += 1;
        let w = &self.weights;
        let doc = TaskDocument {
            contract_id,
            contract_type,
            tenderer,
            issued_at: world.clock,
            task_info: tasks
                .iter()
                .map(|t| TaskInfo {
                    task_id: t.id,
                    name: t.name.clone(),
                    window: (t.window_start, t.window_end),
                    location: t.location,
                })
                .collect(),
            task_requirement: tasks
                .iter()
                .map(|t| TaskRequirement { task_id: t.id, band: t.required_band, resolution_m: t.required_resolution })
                .collect(),
            task_weight: tasks.iter().map(|t| t.weight).collect(),
            expire_time: deadline,
            quote_requirement: (0.0, tasks.len() as f64 * (w.lambda1 + w.lambda2)),
        };
        self.stats.announcements += 1;
        self.trace.emit(world.clock, Some(contract_id), "announce", &doc, false);
        Ok(doc)
    }

    fn doc_tasks(doc: &TaskDocument, world: &World) -> Vec<Task> {
        doc.task_info.iter().filter_map(|i| world.task(i.task_id).cloned()).collect()
    }

    /// Every listed resource builds its bundle against the announced tasks.
    pub fn collect_bids(&mut self, doc: &TaskDocument, world: &World, bidders: &[ResourceId]) -> Collected {
        let tasks = Self::doc_tasks(doc, world);
        let ctx = world.ctx();
        let raw = bidders
            .iter()
            .filter_map(|id| world.resource(*id))
            .filter(|r| !r.failed)
            .map(|r| (NodeId::Resource(r.id), Bid::from_bundle(&build_bundle(r, &tasks, &self.weights, &ctx), world)))
            .collect();
        self.receive_bids(doc, world, raw)
    }

    /// Applies the deadline filter and the quote range to bids computed
    /// elsewhere (e.g. composite bids from peer centers).
    pub fn receive_bids(&mut self, doc: &TaskDocument, world: &World, raw: Vec<(NodeId, Bid)>) -> Collected {
        let mut raw = raw;
        raw.sort_by_key(|(n, _)| *n);
        let (lo, hi) = doc.quote_requirement;
        let mut out = Collected { bids: Vec::new(), documents: Vec::new() };
        for (node, mut bid) in raw {
            let rtt = world.latency.link(doc.tenderer.key(), node.key()) + world.latency.link(node.key(), doc.tenderer.key());
            let on_time = doc.issued_at + rtt <= doc.expire_time;
            let offered = !bid.tasks.is_empty();
            let mut status = IndicatorsStatus { arrived_on_time: on_time, ..Default::default() };
            if offered {
                status.capability_met = bid.execution_scheme.iter().all(|e| {
                    world.resource(e.resource_id).zip(world.task(e.task_id)).is_some_and(|(r, t)| r.satisfies(t))
                });
                status.window_met = bid.execution_scheme.iter().all(|e| {
                    world.task(e.task_id).is_some_and(|t| {
                        e.exec_start >= t.window_start && e.exec_start + t.required_duration <= t.window_end
                    })
                });
                if bid.price < lo || bid.price > hi {
                    bid.price = bid.price.clamp(lo, hi);
                    status.price_clamped = true;
                }
            }
            let bidding = offered && on_time;
            let document = BidDocument {
                contract_id: doc.contract_id,
                bidder: node,
                bid: bidding,
                execution_scheme: if bidding { bid.execution_scheme.clone() } else { Vec::new() },
                bid_price: if bidding { bid.price } else { 0.0 },
                task_sequences: if bidding { bid.sequence.clone() } else { Vec::new() },
                indicators_status: status,
            };
            self.trace.emit(world.clock, Some(doc.contract_id), "bid", &document, false);
            out.documents.push(document);
            if bidding {
                out.bids.push(bid);
            }
        }
        out
    }

    /// Winner determination over the collected bids.
    pub fn award(&mut self, doc: &TaskDocument, world: &World, bids: &[Bid], solver: &Solver, tentative: bool) -> Result<Award> {
        let announced = doc.task_ids();
        if !tentative {
            if let Some((t, c)) = bids.iter().flat_map(|b| &b.tasks).find_map(|t| self.live.get(t).map(|c| (*t, *c))) {
                return Err(Error::Invariant(format!("task {t} already in live contract {c}")));
            }
        }
        let inst = WdpInstance::new(bids.iter().map(Bid::items).collect(), bids.iter().map(|b| b.price).collect())?;
        let solved = match solver {
            Solver::Fls(p) => wdp::solve_fls(&inst, p),
            Solver::Exact { params, hints } => wdp::solve_exact_with(&inst, params, hints),
        };
        let solution = match solved {
            Ok(s) => s,
            Err(e) => {
                self.trace.emit(world.clock, Some(doc.contract_id), "fault", &e.to_string(), true);
                return Err(e);
            }
        };
        let bundles: Vec<AwardedBundle> = solution
            .selected()
            .map(|i| AwardedBundle {
                bidder: bids[i].bidder,
                tasks: bids[i].tasks.clone(),
                price: bids[i].price,
                parts: bids[i].parts.clone(),
            })
            .collect();
        let contract = Contract {
            contract_id: doc.contract_id,
            contract_type: doc.contract_type,
            winners: bundles.iter().map(|b| b.bidder).collect(),
            value: solution.value,
            bundles,
            signed_at: world.clock,
            tentative,
        };
        let covered = contract.task_ids();
        let unallocated = announced.into_iter().filter(|t| !covered.contains(t)).collect();
        if !tentative {
            for t in &covered {
                self.live.insert(*t, contract.contract_id);
            }
        }
        self.stats.awards += 1;
        self.trace.emit(world.clock, Some(doc.contract_id), "award", &contract, false);
        Ok(Award { contract, unallocated, solution })
    }

    /// Commits a contract: each winning resource inserts its awarded tasks
    /// in bundle order. All parts are revalidated on copies first; if any
    /// part no longer fits, nothing is committed and the tasks are returned.
    pub fn execute_contract(&mut self, contract: &Contract, world: &mut World) -> Execution {
        let cid = contract.contract_id;
        if self.executed.contains(&cid) {
            return Execution { contract_id: cid, replay: true, ..Default::default() };
        }
        let ctx_clock = world.clock;
        let mut staged: BTreeMap<ResourceId, crate::model::Resource> = BTreeMap::new();
        let mut entries = Vec::new();
        let mut ok = true;
        'parts: for b in &contract.bundles {
            for (rid, tids) in &b.parts {
                let Some(res) = staged.get(rid).or(world.resource(*rid)) else {
                    ok = false;
                    break 'parts;
                };
                let mut work = res.clone();
                // Parts list tasks in the order their bundle accepted them.
                let tasks: Vec<&Task> = tids.iter().filter_map(|t| world.task(*t)).collect();
                if tasks.len() != tids.len() {
                    ok = false;
                    break 'parts;
                }
                let ctx = world.ctx();
                for t in tasks {
                    let ins = can_insert(&work, t, &ctx);
                    if !ins.feasible {
                        ok = false;
                        break 'parts;
                    }
                    let e = commit(&mut work, t, &ins);
                    let d = if work.kind.is_mobile() { ins.added_distance } else { 0.0 };
                    entries.push((e, d));
                }
                staged.insert(work.id, work);
            }
        }

        self.executed.insert(cid);
        for t in contract.task_ids() {
            self.live.remove(&t);
        }
        let mut out = Execution { contract_id: cid, ..Default::default() };
        if ok {
            for (e, d) in entries {
                out.added_km.push((e.task_id, d));
                out.committed.push(e);
            }
            for (id, work) in staged {
                if let Some(slot) = world.resource_mut(id) {
                    *slot = work;
                }
            }
            self.stats.executions += 1;
        } else {
            out.voided = true;
            out.returned = contract.task_ids().into_iter().collect();
            self.stats.voided += 1;
        }
        let record = ExecuteRecord {
            committed: out
                .committed
                .iter()
                .zip(&out.added_km)
                .map(|(e, (_, d))| (e.task_id, e.resource_id, e.exec_start, *d))
                .collect(),
            voided: out.voided,
            returned: out.returned.clone(),
        };
        self.trace.emit(ctx_clock, Some(cid), "execute", &record, true);
        out
    }

    /// Removes a pending task from whichever resource holds it and logs the
    /// restored mileage.
    pub fn reclaim(&mut self, world: &mut World, task: TaskId, reason: &str) -> Option<ScheduledTask> {
        let rid = world.holder(task)?.resource_id;
        let res = world.resource_mut(rid)?;
        let mobile = res.kind.is_mobile();
        let (entry, restored) = res.reclaim(task)?;
        let record = ReclaimRecord {
            task_id: task,
            resource_id: rid,
            restored_km: if mobile { restored } else { 0.0 },
            reason: reason.to_string(),
        };
        self.trace.emit(world.clock, None, "reclaim", &record, true);
        Some(entry)
    }

    pub fn contracts_issued(&self) -> u64 {
        self.next_id - 1
    }
}
