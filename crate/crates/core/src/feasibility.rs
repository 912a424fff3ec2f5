//! Whether a resource can take on a task: travel, visibility windows,
//! budget checks, single-task insertion and conflict sets.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{
    Point, Resource, ResourceId, ScheduledTask, Seconds, Task, TaskId, TaskState,
};

const MILEAGE_EPS: f64 = 1e-9;

pub fn travel_distance(a: Point, b: Point) -> f64 {
    a.distance(b)
}

/// Whole seconds needed to fly `km` at `speed_kmh`, rounded up.
pub fn travel_secs(km: f64, speed_kmh: f64) -> Option<Seconds> {
    if km <= 0.0 {
        return Some(0);
    }
    if speed_kmh <= 0.0 {
        return None;
    }
    Some((km / speed_kmh * 3600.0).ceil() as Seconds)
}

/// Parametric straight-line pass model for satellites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassModel {
    pub ground_speed_km_s: f64,
    pub altitude_km: f64,
}

impl Default for PassModel {
    fn default() -> Self {
        Self { ground_speed_km_s: 7.5, altitude_km: 500.0 }
    }
}

impl PassModel {
    /// Maximum cross-track distance at which the satellite can image:
    /// half the swath plus the side-swing reach.
    pub fn reach_km(&self, sat: &Resource) -> f64 {
        sat.visible_width_m / 2000.0 + self.altitude_km * sat.side_swing_deg.to_radians().tan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibilityWindow {
    pub resource_id: ResourceId,
    pub task_id: TaskId,
    pub start: Seconds,
    pub end: Seconds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }
}

/// Weather blackout: no observation of targets inside `region` during
/// `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blackout {
    pub region: Rect,
    pub start: Seconds,
    pub end: Seconds,
}

impl Blackout {
    pub fn blocks(&self, at: Point, start: Seconds, end: Seconds) -> bool {
        self.region.contains(at) && start < self.end && self.start < end
    }
}

/// Everything outside a resource that insertion depends on.
#[derive(Debug, Clone, Copy)]
pub struct InsertCtx<'a> {
    pub clock: Seconds,
    pub horizon_s: Seconds,
    pub pass_model: &'a PassModel,
    pub blackouts: &'a [Blackout],
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FeasibilityError {
    #[error("resource {0} is not a satellite")]
    NotSatellite(ResourceId),
}

/// The constraint that made an insertion fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    ResourceUnavailable,
    AlreadyScheduled,
    Capability,
    DurationBudget,
    PoweronBudget,
    MileageBudget,
    TimeWindow,
    Visibility,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionResult {
    pub feasible: bool,
    pub position: usize,
    pub exec_start: Seconds,
    pub added_distance: f64,
    /// Entries that had to be dropped first; only set by [`conflicting_tasks`].
    pub displaced: Vec<TaskId>,
    pub violation: Option<Violation>,
    /// Leg into the new target and, when it is not last, the leg out of it.
    pub leg_in: f64,
    pub leg_out: Option<f64>,
}

impl InsertionResult {
    fn infeasible(v: Violation) -> Self {
        Self {
            feasible: false,
            position: 0,
            exec_start: 0,
            added_distance: 0.0,
            displaced: Vec::new(),
            violation: Some(v),
            leg_in: 0.0,
            leg_out: None,
        }
    }
}

/// Access windows of a satellite over a task, clipped to the task window.
///
/// A track sees the target when its cross-track offset is within
/// [`PassModel::reach_km`]; the window is centred on the time of closest
/// approach and spans the same reach along track.
pub fn satellite_windows(
    sat: &Resource,
    task: &Task,
    pass_model: &PassModel,
) -> Result<Vec<VisibilityWindow>, FeasibilityError> {
    if sat.kind.is_mobile() {
        return Err(FeasibilityError::NotSatellite(sat.id));
    }
    let reach = pass_model.reach_km(sat);
    let v = pass_model.ground_speed_km_s;
    let mut out = Vec::new();
    for track in &sat.tracks {
        let (s, c) = track.heading_deg.to_radians().sin_cos();
        let dx = task.location.x - track.origin.x;
        let dy = task.location.y - track.origin.y;
        let along = dx * c + dy * s;
        let cross = (dx * s - dy * c).abs();
        if cross > reach + 1e-9 {
            continue;
        }
        let closest = track.t0 as f64 + along / v;
        let half = reach / v;
        let start = ((closest - half).ceil() as Seconds).max(task.window_start);
        let end = ((closest + half).floor() as Seconds).min(task.window_end);
        if start < end {
            out.push(VisibilityWindow { resource_id: sat.id, task_id: task.id, start, end });
        }
    }
    out.sort_by_key(|w| (w.start, w.end));
    Ok(out)
}

fn skip_blackouts(ctx: &InsertCtx<'_>, at: Point, mut start: Seconds, dur: Seconds) -> Seconds {
    loop {
        match ctx.blackouts.iter().find(|b| b.blocks(at, start, start + dur)) {
            Some(b) => start = b.end,
            None => return start,
        }
    }
}

/// Best single-task insertion into the resource's current sequence.
///
/// Existing entries keep their execution times; the new target goes into a
/// gap between pending entries (never before an executing or done one).
/// Among feasible gaps the one adding the least flight distance wins, ties
/// going to the earliest gap.
pub fn can_insert(res: &Resource, task: &Task, ctx: &InsertCtx<'_>) -> InsertionResult {
    use Violation as V;
    if res.failed {
        return InsertionResult::infeasible(V::ResourceUnavailable);
    }
    if res.contains(task.id) {
        return InsertionResult::infeasible(V::AlreadyScheduled);
    }
    if !res.satisfies(task) {
        return InsertionResult::infeasible(V::Capability);
    }
    if task.required_duration > res.remaining.duration_s {
        return InsertionResult::infeasible(V::DurationBudget);
    }
    if res.remaining.poweron < 1 {
        return InsertionResult::infeasible(V::PoweronBudget);
    }
    if res.kind.is_mobile() {
        insert_mobile(res, task, ctx)
    } else {
        insert_satellite(res, task, ctx)
    }
}

fn insert_mobile(res: &Resource, task: &Task, ctx: &InsertCtx<'_>) -> InsertionResult {
    let dur = task.required_duration;
    let started = res.started_len();
    let mut best: Option<InsertionResult> = None;
    let mut mileage_blocked = false;

    for k in started..=res.schedule.len() {
        let (prev_loc, prev_free) = if k == 0 {
            (res.position, ctx.clock)
        } else {
            let p = &res.schedule[k - 1];
            (p.location, p.exec_end.max(ctx.clock))
        };
        let leg_in = travel_distance(prev_loc, task.location);
        let Some(t_in) = travel_secs(leg_in, res.cruise_speed_kmh) else {
            continue;
        };
        let earliest = task.window_start.max(prev_free + t_in).max(ctx.clock);
        let start = skip_blackouts(ctx, task.location, earliest, dur);
        let end = start + dur;
        if end > task.window_end || end > ctx.horizon_s {
            continue;
        }
        let next = res.schedule.get(k);
        let (leg_out, added) = match next {
            Some(n) => {
                let out = travel_distance(task.location, n.location);
                match travel_secs(out, res.cruise_speed_kmh) {
                    Some(t_out) if end + t_out <= n.exec_start => {}
                    _ => continue,
                }
                (Some(out), leg_in + out - n.flight_distance_in)
            }
            None => (None, leg_in),
        };
        if added > res.remaining.mileage_km + MILEAGE_EPS {
            mileage_blocked = true;
            continue;
        }
        if best.as_ref().is_none_or(|b| added < b.added_distance) {
            best = Some(InsertionResult {
                feasible: true,
                position: k,
                exec_start: start,
                added_distance: added,
                displaced: Vec::new(),
                violation: None,
                leg_in,
                leg_out,
            });
        }
    }
    best.unwrap_or_else(|| {
        InsertionResult::infeasible(if mileage_blocked {
            Violation::MileageBudget
        } else {
            Violation::TimeWindow
        })
    })
}

fn insert_satellite(res: &Resource, task: &Task, ctx: &InsertCtx<'_>) -> InsertionResult {
    let dur = task.required_duration;
    let windows = match satellite_windows(res, task, ctx.pass_model) {
        Ok(w) if !w.is_empty() => w,
        _ => return InsertionResult::infeasible(Violation::Visibility),
    };
    for w in windows {
        let mut start = w.start.max(ctx.clock);
        loop {
            let shifted = skip_blackouts(ctx, task.location, start, dur);
            let clash = res
                .schedule
                .iter()
                .find(|s| s.exec_start < shifted + dur && shifted < s.exec_end);
            match clash {
                Some(s) => start = s.exec_end,
                None => {
                    start = shifted;
                    break;
                }
            }
        }
        if start + dur <= w.end && start + dur <= ctx.horizon_s {
            let position = res.schedule.iter().filter(|s| s.exec_start <= start).count();
            return InsertionResult {
                feasible: true,
                position,
                exec_start: start,
                added_distance: 0.0,
                displaced: Vec::new(),
                violation: None,
                leg_in: 0.0,
                leg_out: None,
            };
        }
    }
    InsertionResult::infeasible(Violation::Visibility)
}

/// Applies a feasible insertion, consuming the resource's budgets.
pub fn commit(res: &mut Resource, task: &Task, ins: &InsertionResult) -> ScheduledTask {
    debug_assert!(ins.feasible);
    let entry = ScheduledTask {
        task_id: task.id,
        resource_id: res.id,
        exec_start: ins.exec_start,
        exec_end: ins.exec_start + task.required_duration,
        flight_distance_in: ins.leg_in,
        state: TaskState::Pending,
        location: task.location,
        weight: task.weight,
    };
    if let (Some(out), Some(next)) = (ins.leg_out, res.schedule.get_mut(ins.position)) {
        next.flight_distance_in = out;
    }
    res.schedule.insert(ins.position, entry.clone());
    res.remaining.duration_s -= task.required_duration;
    res.remaining.poweron -= 1;
    if res.kind.is_mobile() {
        res.remaining.mileage_km -= ins.added_distance;
    }
    entry
}

/// Scheduled entries that stand in the way of a task.
#[derive(Debug, Clone, PartialEq)]
pub enum ConflictSet {
    /// The task can be inserted as is.
    None,
    /// Dropping these pending entries makes room; `insertion` is the
    /// placement obtained afterwards, with `displaced` filled in.
    Displace { ids: Vec<TaskId>, insertion: InsertionResult },
    /// Not even a schedule stripped of all pending entries can host it.
    InherentlyInfeasible,
}

impl ConflictSet {
    pub fn ids(&self) -> &[TaskId] {
        match self {
            ConflictSet::Displace { ids, .. } => ids,
            _ => &[],
        }
    }
}

/// Greedy feasibility-restoring removal: repeatedly drop the lightest pending
/// entry among those tied to the violated constraint (overlapping the task's
/// window for timing violations, any pending entry for budget violations)
/// until the task fits. Ties go to the lower task id.
pub fn conflicting_tasks(res: &Resource, task: &Task, ctx: &InsertCtx<'_>) -> ConflictSet {
    let first = can_insert(res, task, ctx);
    if first.feasible {
        return ConflictSet::None;
    }
    if matches!(
        first.violation,
        Some(Violation::ResourceUnavailable | Violation::Capability | Violation::AlreadyScheduled)
    ) {
        return ConflictSet::InherentlyInfeasible;
    }

    let mut stripped = res.clone();
    let pending: Vec<TaskId> = stripped.pending().map(|s| s.task_id).collect();
    for id in pending {
        stripped.reclaim(id);
    }
    if !can_insert(&stripped, task, ctx).feasible {
        return ConflictSet::InherentlyInfeasible;
    }

    let mut work = res.clone();
    let mut removed = Vec::new();
    let mut last = first;
    loop {
        let timing = matches!(last.violation, Some(Violation::TimeWindow | Violation::Visibility));
        let overlapping = |s: &&ScheduledTask| {
            s.exec_start < task.window_end && task.window_start < s.exec_end
        };
        let pick = |only_overlapping: bool| {
            work.pending()
                .filter(|s| !only_overlapping || overlapping(s))
                .min_by(|a, b| a.weight.total_cmp(&b.weight).then(a.task_id.cmp(&b.task_id)))
                .map(|s| s.task_id)
        };
        let victim = if timing { pick(true).or_else(|| pick(false)) } else { pick(false) };
        let Some(victim) = victim else {
            return ConflictSet::InherentlyInfeasible;
        };
        work.reclaim(victim);
        removed.push(victim);
        last = can_insert(&work, task, ctx);
        if last.feasible {
            removed.sort_unstable();
            last.feasible = false;
            last.displaced = removed.clone();
            return ConflictSet::Displace { ids: removed, insertion: last };
        }
    }
}

/// Replays a resource's schedule and reports every broken invariant:
/// ordering, windows, durations, travel times, visibility, capability, leg
/// bookkeeping and budget conservation. Empty means consistent.
pub fn replay_violations(
    res: &Resource,
    lookup: impl Fn(TaskId) -> Option<Task>,
    pass_model: &PassModel,
) -> Vec<String> {
    let mut out = Vec::new();
    let mut prev: Option<&ScheduledTask> = None;
    let mut route = 0.0;
    let mut busy = 0;
    for s in &res.schedule {
        let Some(task) = lookup(s.task_id) else {
            out.push(format!("r{}: unknown task {}", res.id, s.task_id));
            continue;
        };
        if s.state == TaskState::Reclaimed {
            out.push(format!("r{}: reclaimed entry {} still scheduled", res.id, s.task_id));
        }
        if s.exec_start < task.window_start || s.exec_end > task.window_end {
            out.push(format!("r{}: task {} outside its window", res.id, s.task_id));
        }
        if s.exec_end - s.exec_start != task.required_duration {
            out.push(format!("r{}: task {} wrong duration", res.id, s.task_id));
        }
        if !res.satisfies(&task) {
            out.push(format!("r{}: task {} capability mismatch", res.id, s.task_id));
        }
        if res.kind.is_mobile() {
            let (from, free) = prev.map_or((res.position, 0), |p| (p.location, p.exec_end));
            let leg = from.distance(s.location);
            if (leg - s.flight_distance_in).abs() > 1e-6 {
                out.push(format!("r{}: task {} leg bookkeeping drift", res.id, s.task_id));
            }
            match travel_secs(leg, res.cruise_speed_kmh) {
                Some(t) if free + t <= s.exec_start => {}
                _ => out.push(format!("r{}: task {} unreachable in time", res.id, s.task_id)),
            }
            route += s.flight_distance_in;
        } else {
            if let Some(p) = prev {
                if p.exec_end > s.exec_start {
                    out.push(format!("r{}: task {} overlaps previous", res.id, s.task_id));
                }
            }
            let inside = satellite_windows(res, &task, pass_model)
                .unwrap_or_default()
                .iter()
                .any(|w| w.start <= s.exec_start && s.exec_end <= w.end);
            if !inside {
                out.push(format!("r{}: task {} outside visibility", res.id, s.task_id));
            }
        }
        busy += s.exec_end - s.exec_start;
        prev = Some(s);
    }

    let cap = res.capacity;
    let rem = res.remaining;
    if cap.duration_s - rem.duration_s != busy {
        out.push(format!("r{}: duration budget not conserved", res.id));
    }
    if i64::from(cap.poweron) - i64::from(rem.poweron) != res.schedule.len() as i64 {
        out.push(format!("r{}: power-on budget not conserved", res.id));
    }
    if res.kind.is_mobile() && (cap.mileage_km - rem.mileage_km - route).abs() > 1e-9 {
        out.push(format!(
            "r{}: mileage not conserved ({} - {} != {})",
            res.id, cap.mileage_km, rem.mileage_km, route
        ));
    }
    if rem.duration_s < 0 || rem.mileage_km < -1e-9 {
        out.push(format!("r{}: negative remaining budget", res.id));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Band, Budgets, GroundTrack, ResourceKind};

    pub(crate) fn uav_at(x: f64, y: f64, mileage: f64) -> Resource {
        let cap = Budgets { duration_s: 3000, poweron: 20, mileage_km: mileage };
        Resource {
            id: 0,
            kind: ResourceKind::Uav,
            center_id: 0,
            position: Point::new(x, y),
            cruise_speed_kmh: 60.0,
            capacity: cap,
            remaining: cap,
            visible_width_m: 500.0,
            side_swing_deg: 0.0,
            max_resolution_m: 0.5,
            bands: [Band::Optical, Band::Infrared].into_iter().collect(),
            tracks: vec![],
            schedule: vec![],
            neighbors: vec![],
            failed: false,
        }
    }

    fn task_at(id: TaskId, x: f64, y: f64, ws: Seconds, we: Seconds) -> Task {
        Task {
            id,
            name: String::new(),
            location: Point::new(x, y),
            weight: 0.5,
            window_start: ws,
            window_end: we,
            required_duration: 60,
            required_resolution: 2.0,
            required_band: Band::Optical,
        }
    }

    fn sat() -> Resource {
        let cap = Budgets { duration_s: 2400, poweron: 30, mileage_km: 0.0 };
        Resource {
            id: 9,
            kind: ResourceKind::Satellite,
            center_id: 0,
            position: Point::default(),
            cruise_speed_kmh: 0.0,
            capacity: cap,
            remaining: cap,
            visible_width_m: 5000.0,
            side_swing_deg: 25.0,
            max_resolution_m: 2.0,
            bands: [Band::Optical].into_iter().collect(),
            tracks: vec![GroundTrack { t0: 1000, origin: Point::new(0.0, 100.0), heading_deg: 0.0 }],
            schedule: vec![],
            neighbors: vec![],
            failed: false,
        }
    }

    const PM: PassModel = PassModel { ground_speed_km_s: 7.5, altitude_km: 500.0 };

    fn ctx() -> InsertCtx<'static> {
        InsertCtx { clock: 0, horizon_s: 21600, pass_model: &PM, blackouts: &[] }
    }

    #[test]
    fn travel_distance_examples() {
        assert_eq!(travel_distance(Point::new(0.0, 0.0), Point::new(0.0, 0.0)), 0.0);
        assert_eq!(travel_distance(Point::new(0.0, 0.0), Point::new(3.0, 4.0)), 5.0);
        assert_eq!(travel_distance(Point::new(1.0, 1.0), Point::new(4.0, 5.0)), 5.0);
    }

    #[test]
    fn window_under_the_track_is_pass_clipped_to_task() {
        let s = sat();
        // Closest approach at t0 + 75/7.5 = 1010 s.
        let t = task_at(1, 75.0, 100.0, 0, 21600);
        let reach = 2.5 + 500.0 * 25f64.to_radians().tan();
        let half = reach / 7.5;
        let w = satellite_windows(&s, &t, &PM).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].start, (1010.0 - half).ceil() as Seconds);
        assert_eq!(w[0].end, (1010.0 + half).floor() as Seconds);

        let narrow = task_at(2, 75.0, 100.0, 1000, 1020);
        let w = satellite_windows(&s, &narrow, &PM).unwrap();
        assert_eq!((w[0].start, w[0].end), (1000, 1020));
    }

    #[test]
    fn window_at_exact_reach_and_beyond() {
        let s = sat();
        let reach = PM.reach_km(&s);
        let edge = task_at(1, 75.0, 100.0 + reach, 0, 21600);
        let w = satellite_windows(&s, &edge, &PM).unwrap();
        assert_eq!(w.len(), 1);
        let half = reach / 7.5;
        assert_eq!(w[0].start, (1010.0 - half).ceil() as Seconds);

        let out = task_at(2, 75.0, 100.0 + reach + 1.0, 0, 21600);
        assert!(satellite_windows(&s, &out, &PM).unwrap().is_empty());
    }

    #[test]
    fn satellite_windows_rejects_mobile() {
        let r = uav_at(0.0, 0.0, 30.0);
        let t = task_at(1, 0.0, 0.0, 0, 100);
        assert_eq!(satellite_windows(&r, &t, &PM), Err(FeasibilityError::NotSatellite(0)));
    }

    #[test]
    fn empty_schedule_insertion() {
        let r = uav_at(0.0, 0.0, 30.0);
        let t = task_at(1, 3.0, 4.0, 0, 3600);
        let ins = can_insert(&r, &t, &ctx());
        assert!(ins.feasible);
        assert_eq!(ins.position, 0);
        assert_eq!(ins.added_distance, 5.0);
        assert_eq!(ins.exec_start, 300); // 5 km at 60 km/h
    }

    #[test]
    fn duration_budget_violation() {
        let mut r = uav_at(0.0, 0.0, 30.0);
        r.remaining.duration_s = 30;
        let t = task_at(1, 3.0, 4.0, 0, 3600);
        let ins = can_insert(&r, &t, &ctx());
        assert!(!ins.feasible);
        assert_eq!(ins.violation, Some(Violation::DurationBudget));
    }

    #[test]
    fn commit_then_replay_is_clean() {
        let mut r = uav_at(0.0, 0.0, 30.0);
        let tasks = [task_at(1, 5.0, 0.0, 0, 21600), task_at(2, 10.0, 0.0, 0, 21600), task_at(3, 7.0, 1.0, 0, 21600)];
        for t in &tasks {
            let ins = can_insert(&r, t, &ctx());
            assert!(ins.feasible);
            commit(&mut r, t, &ins);
        }
        let v = replay_violations(&r, |id| tasks.iter().find(|t| t.id == id).cloned(), &PM);
        assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn satellite_entries_do_not_overlap() {
        let mut s = sat();
        let mut a = task_at(1, 75.0, 100.0, 0, 21600);
        let mut b = task_at(2, 80.0, 110.0, 0, 21600);
        a.required_duration = 20;
        b.required_duration = 20;
        let ia = can_insert(&s, &a, &ctx());
        commit(&mut s, &a, &ia);
        let ib = can_insert(&s, &b, &ctx());
        assert!(ib.feasible);
        assert!(ib.exec_start >= ia.exec_start + 20);
        assert_eq!(ib.position, 1);
    }

    #[test]
    fn blackout_pushes_start() {
        let r = uav_at(0.0, 0.0, 30.0);
        let t = task_at(1, 3.0, 4.0, 0, 3600);
        let blackouts = [Blackout { region: Rect { x0: 0.0, y0: 0.0, x1: 10.0, y1: 10.0 }, start: 0, end: 1000 }];
        let c = InsertCtx { blackouts: &blackouts, ..ctx() };
        let ins = can_insert(&r, &t, &c);
        assert_eq!(ins.exec_start, 1000);
    }

    #[test]
    fn insertable_task_has_no_conflicts() {
        let r = uav_at(0.0, 0.0, 30.0);
        let t = task_at(1, 3.0, 4.0, 0, 3600);
        assert_eq!(conflicting_tasks(&r, &t, &ctx()), ConflictSet::None);
    }

    #[test]
    fn same_site_same_window_conflict() {
        let mut r = uav_at(0.0, 0.0, 30.0);
        let held = task_at(1, 3.0, 4.0, 300, 360);
        let ins = can_insert(&r, &held, &ctx());
        commit(&mut r, &held, &ins);
        let rival = task_at(2, 3.0, 4.0, 300, 360);
        assert_eq!(conflicting_tasks(&r, &rival, &ctx()).ids(), &[1]);
    }

    #[test]
    fn capability_mismatch_is_inherent() {
        let r = uav_at(0.0, 0.0, 30.0);
        let mut t = task_at(1, 3.0, 4.0, 0, 3600);
        t.required_band = Band::Sar;
        assert_eq!(conflicting_tasks(&r, &t, &ctx()), ConflictSet::InherentlyInfeasible);
    }
}
