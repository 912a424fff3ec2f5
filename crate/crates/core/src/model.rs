//! Domain types shared by every module: tasks, resources, planning centers,
//! schedules and allocation schemes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::feasibility::{Blackout, InsertCtx, PassModel};

pub type TaskId = u32;
pub type ResourceId = u32;
pub type CenterId = u32;
/// Integer seconds from the start of the planning horizon.
pub type Seconds = i64;

/// A point on the planar region, in kilometres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Optical,
    Infrared,
    Sar,
}

/// A point observation target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub name: String,
    pub location: Point,
    pub weight: f64,
    pub window_start: Seconds,
    pub window_end: Seconds,
    pub required_duration: Seconds,
    /// Coarsest acceptable ground resolution in metres.
    pub required_resolution: f64,
    pub required_band: Band,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Satellite,
    Uav,
    Airship,
}

impl ResourceKind {
    pub fn is_mobile(self) -> bool {
        !matches!(self, ResourceKind::Satellite)
    }
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResourceKind::Satellite => "satellite",
            ResourceKind::Uav => "uav",
            ResourceKind::Airship => "airship",
        })
    }
}

/// Straight synthetic ground track of one satellite pass. The sub-satellite
/// point is at `origin` at time `t0` and moves along `heading_deg`
/// (counter-clockwise from +x) at the pass model's ground speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTrack {
    pub t0: Seconds,
    pub origin: Point,
    pub heading_deg: f64,
}

/// Capability budgets: observation duration D, sensor power-on count R and
/// flight mileage L.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Budgets {
    pub duration_s: Seconds,
    pub poweron: u32,
    pub mileage_km: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Pending,
    Executing,
    Done,
    Reclaimed,
}

/// One entry of a resource's execution sequence.
///
/// `flight_distance_in` is the length of the leg flown from the previous
/// entry (or from the resource's start position) to this target, so the sum
/// over a schedule is the resource's committed route length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledTask {
    pub task_id: TaskId,
    pub resource_id: ResourceId,
    pub exec_start: Seconds,
    pub exec_end: Seconds,
    pub flight_distance_in: f64,
    pub state: TaskState,
    pub location: Point,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub id: ResourceId,
    pub kind: ResourceKind,
    pub center_id: CenterId,
    /// Start position of mobile platforms; unused for satellites.
    pub position: Point,
    pub cruise_speed_kmh: f64,
    /// Budgets at the start of the horizon.
    pub capacity: Budgets,
    /// Remaining budgets D_e, R_e, L_e.
    pub remaining: Budgets,
    pub visible_width_m: f64,
    pub side_swing_deg: f64,
    pub max_resolution_m: f64,
    pub bands: BTreeSet<Band>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tracks: Vec<GroundTrack>,
    #[serde(default)]
    pub schedule: Vec<ScheduledTask>,
    #[serde(default)]
    pub neighbors: Vec<ResourceId>,
    #[serde(default)]
    pub failed: bool,
}

impl Resource {
    /// True when the platform carries a sensor able to serve the task.
    pub fn satisfies(&self, task: &Task) -> bool {
        self.bands.contains(&task.required_band)
            && task.required_resolution >= self.max_resolution_m
    }

    pub fn contains(&self, task: TaskId) -> bool {
        self.schedule.iter().any(|s| s.task_id == task)
    }

    /// Number of leading entries that are executing or done.
    pub fn started_len(&self) -> usize {
        self.schedule
            .iter()
            .take_while(|s| s.state != TaskState::Pending)
            .count()
    }

    /// Location and time from which the next pending leg departs.
    pub fn anchor(&self, clock: Seconds) -> (Point, Seconds) {
        match self.schedule[..self.started_len()].last() {
            Some(last) => (last.location, last.exec_end.max(clock)),
            None => (self.position, clock),
        }
    }

    /// Current location for neighbourhood and initiator purposes.
    pub fn current_position(&self) -> Point {
        self.schedule[..self.started_len()]
            .last()
            .map_or(self.position, |s| s.location)
    }

    pub fn pending(&self) -> impl Iterator<Item = &ScheduledTask> {
        self.schedule.iter().filter(|s| s.state == TaskState::Pending)
    }

    /// Removes a pending entry and gives its budgets back. Returns the
    /// removed entry (state set to reclaimed) and the mileage restored.
    pub fn reclaim(&mut self, task: TaskId) -> Option<(ScheduledTask, f64)> {
        let idx = self.schedule.iter().position(|s| s.task_id == task)?;
        if self.schedule[idx].state != TaskState::Pending {
            return None;
        }
        let mut entry = self.schedule.remove(idx);
        let mut restored = entry.flight_distance_in;
        if self.kind.is_mobile() {
            if let Some(next_loc) = self.schedule.get(idx).map(|n| n.location) {
                let prev_loc = if idx == 0 {
                    self.position
                } else {
                    self.schedule[idx - 1].location
                };
                let new_leg = prev_loc.distance(next_loc);
                let next = &mut self.schedule[idx];
                restored += next.flight_distance_in - new_leg;
                next.flight_distance_in = new_leg;
            }
        }
        self.remaining.duration_s += entry.exec_end - entry.exec_start;
        self.remaining.poweron += 1;
        self.remaining.mileage_km += restored;
        entry.state = TaskState::Reclaimed;
        Some((entry, restored))
    }

    /// Moves entries to executing/done according to the clock.
    pub fn advance_to(&mut self, clock: Seconds) {
        for s in &mut self.schedule {
            if s.exec_end <= clock {
                s.state = TaskState::Done;
            } else if s.exec_start <= clock {
                s.state = TaskState::Executing;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningCenter {
    pub id: CenterId,
    pub kind: ResourceKind,
    pub resource_ids: Vec<ResourceId>,
    pub peer_center_ids: Vec<CenterId>,
}

/// Weights of the bidding heuristics: alpha/beta/gamma weigh the duration,
/// power-on and mileage ratios; lambda1/lambda2 weigh conflict degree and
/// consumption degree in the bid price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for BidWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0 / 3.0,
            beta: 1.0 / 3.0,
            gamma: 1.0 / 3.0,
            lambda1: 0.5,
            lambda2: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// MCA level (1, 2 or 3); `None` for the baselines.
    pub round: Option<u8>,
    pub method: String,
    pub contract_id: u64,
}

/// A committed task-to-resource assignment plus where it came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AllocationScheme {
    pub assignments: Vec<ScheduledTask>,
    pub unassigned: BTreeSet<TaskId>,
    pub provenance: BTreeMap<TaskId, Provenance>,
}

impl AllocationScheme {
    pub fn assigned_ids(&self) -> BTreeSet<TaskId> {
        self.assignments.iter().map(|a| a.task_id).collect()
    }

    pub fn resource_of(&self) -> BTreeMap<TaskId, ResourceId> {
        self.assignments
            .iter()
            .map(|a| (a.task_id, a.resource_id))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub width_km: f64,
    pub height_km: f64,
}

/// Deterministic per-link message latency, drawn once from the scenario seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyModel {
    #[serde(default)]
    pub max_link_latency_s: Seconds,
    #[serde(default)]
    pub salt: u64,
}

impl LatencyModel {
    pub fn link(&self, from: u64, to: u64) -> Seconds {
        if self.max_link_latency_s <= 0 {
            return 0;
        }
        let h = crate::splitmix64(self.salt ^ from.wrapping_mul(0x9E37_79B9) ^ to.rotate_left(32));
        (h % (self.max_link_latency_s as u64 + 1)) as Seconds
    }
}

/// The simulated world: fleet, tasks and the simulation clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub horizon_s: Seconds,
    pub region_km: Region,
    pub centers: Vec<PlanningCenter>,
    pub resources: Vec<Resource>,
    /// Sorted by id.
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub clock: Seconds,
    pub pass_model: PassModel,
    pub comm_radius_km: f64,
    #[serde(default)]
    pub blackouts: Vec<Blackout>,
    #[serde(default)]
    pub latency: LatencyModel,
}

impl World {
    pub fn task(&self, id: TaskId) -> Option<&Task> {
        self.tasks
            .binary_search_by_key(&id, |t| t.id)
            .ok()
            .map(|i| &self.tasks[i])
    }

    pub fn resource(&self, id: ResourceId) -> Option<&Resource> {
        self.resources
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|i| &self.resources[i])
    }

    pub fn resource_mut(&mut self, id: ResourceId) -> Option<&mut Resource> {
        self.resources
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(move |i| &mut self.resources[i])
    }

    pub fn center(&self, id: CenterId) -> Option<&PlanningCenter> {
        self.centers.iter().find(|c| c.id == id)
    }

    pub fn ctx(&self) -> InsertCtx<'_> {
        InsertCtx {
            clock: self.clock,
            horizon_s: self.horizon_s,
            pass_model: &self.pass_model,
            blackouts: &self.blackouts,
        }
    }

    /// Adds tasks, keeping the list sorted by id.
    pub fn add_tasks(&mut self, tasks: impl IntoIterator<Item = Task>) {
        self.tasks.extend(tasks);
        self.tasks.sort_by_key(|t| t.id);
        self.tasks.dedup_by_key(|t| t.id);
    }

    pub fn advance_to(&mut self, clock: Seconds) {
        self.clock = self.clock.max(clock);
        for r in &mut self.resources {
            r.advance_to(self.clock);
        }
    }

    /// Recomputes every resource's neighbour set from current positions:
    /// live resources of the same center within the communication radius.
    pub fn refresh_neighbors(&mut self) {
        let snapshot: Vec<(ResourceId, CenterId, Point, bool, bool)> = self
            .resources
            .iter()
            .map(|r| (r.id, r.center_id, r.current_position(), r.kind.is_mobile(), r.failed))
            .collect();
        let radius = self.comm_radius_km;
        for r in &mut self.resources {
            let here = r.current_position();
            r.neighbors = if r.kind.is_mobile() {
                snapshot
                    .iter()
                    .filter(|(id, center, pos, mobile, failed)| {
                        *id != r.id
                            && *center == r.center_id
                            && *mobile
                            && !*failed
                            && here.distance(*pos) <= radius
                    })
                    .map(|s| s.0)
                    .collect()
            } else {
                Vec::new()
            };
        }
    }

    /// Every live assignment across the fleet.
    pub fn scheme(&self) -> AllocationScheme {
        let assignments: Vec<ScheduledTask> = self
            .resources
            .iter()
            .flat_map(|r| r.schedule.iter().cloned())
            .collect();
        let assigned: BTreeSet<TaskId> = assignments.iter().map(|a| a.task_id).collect();
        AllocationScheme {
            unassigned: self
                .tasks
                .iter()
                .map(|t| t.id)
                .filter(|id| !assigned.contains(id))
                .collect(),
            assignments,
            provenance: BTreeMap::new(),
        }
    }

    /// Which resource, if any, currently holds the task.
    pub fn holder(&self, task: TaskId) -> Option<&ScheduledTask> {
        self.resources
            .iter()
            .flat_map(|r| r.schedule.iter())
            .find(|s| s.task_id == task)
    }

    pub fn next_task_id(&self) -> TaskId {
        self.tasks.last().map_or(0, |t| t.id + 1)
    }
}

/// One violated scenario invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum ScenarioViolation {
    DuplicateTaskId { task: TaskId },
    TasksNotSorted,
    WeightOutOfRange { task: TaskId, weight: f64 },
    EmptyWindow { task: TaskId },
    WindowOutsideHorizon { task: TaskId },
    NonPositiveDuration { task: TaskId },
    DuplicateResourceId { resource: ResourceId },
    ResourcesNotSorted,
    DanglingCenter { resource: ResourceId, center: CenterId },
    ResourceNotListed { resource: ResourceId, center: CenterId },
    UnknownResource { center: CenterId, resource: ResourceId },
    ListedByWrongCenter { center: CenterId, resource: ResourceId },
    PeerIsSelf { center: CenterId },
    UnknownPeer { center: CenterId, peer: CenterId },
    NegativeBudget { resource: ResourceId },
    ForeignNeighbor { resource: ResourceId, neighbor: ResourceId },
    ScheduleOutOfOrder { resource: ResourceId },
}

impl fmt::Display for ScenarioViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", serde_json::to_string(self).unwrap_or_default())
    }
}

/// Checks the structural invariants of a scenario. Empty means valid.
pub fn validate_scenario(
    tasks: &[Task],
    centers: &[PlanningCenter],
    resources: &[Resource],
    horizon_s: Seconds,
) -> Vec<ScenarioViolation> {
    use ScenarioViolation as V;
    let mut out = Vec::new();

    let mut seen = BTreeSet::new();
    for t in tasks {
        if !seen.insert(t.id) {
            out.push(V::DuplicateTaskId { task: t.id });
        }
        if !(0.0..=1.0).contains(&t.weight) {
            out.push(V::WeightOutOfRange { task: t.id, weight: t.weight });
        }
        if t.window_start >= t.window_end {
            out.push(V::EmptyWindow { task: t.id });
        }
        if t.window_start < 0 || t.window_end > horizon_s {
            out.push(V::WindowOutsideHorizon { task: t.id });
        }
        if t.required_duration <= 0 {
            out.push(V::NonPositiveDuration { task: t.id });
        }
    }
    if tasks.windows(2).any(|w| w[0].id > w[1].id) {
        out.push(V::TasksNotSorted);
    }

    let center_ids: BTreeSet<CenterId> = centers.iter().map(|c| c.id).collect();
    let mut rseen = BTreeSet::new();
    for r in resources {
        if !rseen.insert(r.id) {
            out.push(V::DuplicateResourceId { resource: r.id });
        }
        match centers.iter().find(|c| c.id == r.center_id) {
            None => out.push(V::DanglingCenter { resource: r.id, center: r.center_id }),
            Some(c) if !c.resource_ids.contains(&r.id) => {
                out.push(V::ResourceNotListed { resource: r.id, center: c.id })
            }
            Some(_) => {}
        }
        let b = r.remaining;
        if b.duration_s < 0 || b.mileage_km < -1e-9 || !b.mileage_km.is_finite() {
            out.push(V::NegativeBudget { resource: r.id });
        }
        for n in &r.neighbors {
            let same = resources
                .iter()
                .find(|o| o.id == *n)
                .is_some_and(|o| o.center_id == r.center_id);
            if !same {
                out.push(V::ForeignNeighbor { resource: r.id, neighbor: *n });
            }
        }
        if r.schedule.windows(2).any(|w| w[0].exec_start > w[1].exec_start) {
            out.push(V::ScheduleOutOfOrder { resource: r.id });
        }
    }
    if resources.windows(2).any(|w| w[0].id > w[1].id) {
        out.push(V::ResourcesNotSorted);
    }

    for c in centers {
        for rid in &c.resource_ids {
            match resources.iter().find(|r| r.id == *rid) {
                None => out.push(V::UnknownResource { center: c.id, resource: *rid }),
                Some(r) if r.center_id != c.id => {
                    out.push(V::ListedByWrongCenter { center: c.id, resource: *rid })
                }
                Some(_) => {}
            }
        }
        for p in &c.peer_center_ids {
            if *p == c.id {
                out.push(V::PeerIsSelf { center: c.id });
            } else if !center_ids.contains(p) {
                out.push(V::UnknownPeer { center: c.id, peer: *p });
            }
        }
    }
    out
}
