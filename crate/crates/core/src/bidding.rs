//! Bundle construction and pricing for a single bidder.
//!
//! A bidder greedily packs announced tasks into its schedule and prices each
//! accepted task by its conflict degree `g` (weight of pending work it
//! competes with, normalized over the bundle) and its resource consumption
//! degree `f` (squared weighted share of remaining duration, power-on count
//! and mileage it uses up).

use serde::{Deserialize, Serialize};

use crate::feasibility::{can_insert, commit, conflicting_tasks, ConflictSet, InsertCtx, InsertionResult};
use crate::model::{BidWeights, Resource, ResourceId, Seconds, Task, TaskId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleItem {
    pub task_id: TaskId,
    pub conflict_weights: Vec<f64>,
    pub sw: f64,
    pub g: f64,
    pub duration: Seconds,
    pub poweron: u32,
    pub distance: f64,
    pub f: f64,
    pub insertion: InsertionResult,
}

impl BundleItem {
    pub fn price(&self, w: &BidWeights) -> f64 {
        w.lambda1 * (1.0 - self.g) + w.lambda2 * (1.0 - self.f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub bidder_id: ResourceId,
    pub items: Vec<BundleItem>,
    pub price: f64,
    /// Bidder's task sequence if the bundle were committed.
    pub sequence: Vec<TaskId>,
}

impl Bundle {
    pub fn empty(bidder_id: ResourceId) -> Self {
        Self { bidder_id, items: Vec::new(), price: 0.0, sequence: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn task_ids(&self) -> Vec<TaskId> {
        self.items.iter().map(|i| i.task_id).collect()
    }
}

/// Normalizes conflict weight sums by their maximum. All-zero sums give
/// all-zero degrees.
pub fn conflict_degrees(sw: &[f64]) -> Vec<f64> {
    let max = sw.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![0.0; sw.len()];
    }
    sw.iter().map(|s| s / max).collect()
}

/// Demand-over-budget ratio; `None` means the demand exceeds the budget.
fn ratio(demand: f64, budget: f64) -> Option<f64> {
    if demand <= 0.0 {
        Some(0.0)
    } else if demand > budget {
        None
    } else {
        Some(demand / budget)
    }
}

/// Consumption degree of one task against the bidder's remaining budgets.
#[allow(clippy::too_many_arguments)]
pub fn consumption_degree(
    d_ej: f64,
    d_e: f64,
    r_ej: f64,
    r_e: f64,
    cd_ej: f64,
    l_e: f64,
    w: &BidWeights,
) -> f64 {
    match (ratio(d_ej, d_e), ratio(r_ej, r_e), ratio(cd_ej, l_e)) {
        (Some(d), Some(r), Some(l)) => (w.alpha * d + w.beta * r + w.gamma * l).powi(2).min(1.0),
        _ => 1.0,
    }
}

pub fn bundle_price(items: &[BundleItem], w: &BidWeights) -> f64 {
    items.iter().map(|i| i.price(w)).sum()
}

/// Ordering used by every greedy pass over announced tasks: heavier first,
/// then earlier window, then lower id.
pub fn greedy_order(tasks: &mut [&Task]) {
    tasks.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then(a.window_start.cmp(&b.window_start))
            .then(a.id.cmp(&b.id))
    });
}

/// Builds the bidder's bundle over the announced tasks.
pub fn build_bundle(res: &Resource, announced: &[Task], w: &BidWeights, ctx: &InsertCtx<'_>) -> Bundle {
    let mut order: Vec<&Task> = announced.iter().collect();
    greedy_order(&mut order);
    build_bundle_in_order(res, &order, w, ctx)
}

/// Same as [`build_bundle`] but tries the tasks in the given order.
pub fn build_bundle_in_order(res: &Resource, order: &[&Task], w: &BidWeights, ctx: &InsertCtx<'_>) -> Bundle {
    let mut work = res.clone();
    let mut items = Vec::new();
    for &task in order {
        let ins = can_insert(&work, task, ctx);
        if !ins.feasible {
            continue;
        }
        let rem = work.remaining;
        let l_e = if work.kind.is_mobile() { rem.mileage_km } else { f64::INFINITY };
        let cd = if work.kind.is_mobile() { ins.added_distance } else { 0.0 };
        let f = consumption_degree(
            task.required_duration as f64,
            rem.duration_s as f64,
            1.0,
            f64::from(rem.poweron),
            cd,
            l_e,
            w,
        );
        let conflict_weights: Vec<f64> = match conflicting_tasks(res, task, ctx) {
            ConflictSet::Displace { ids, .. } => ids
                .iter()
                .filter_map(|id| res.schedule.iter().find(|s| s.task_id == *id))
                .map(|s| s.weight)
                .collect(),
            _ => Vec::new(),
        };
        commit(&mut work, task, &ins);
        items.push(BundleItem {
            task_id: task.id,
            sw: conflict_weights.iter().sum(),
            conflict_weights,
            g: 0.0,
            duration: task.required_duration,
            poweron: 1,
            distance: cd,
            f,
            insertion: ins,
        });
    }
    if items.is_empty() {
        return Bundle { sequence: res.schedule.iter().map(|s| s.task_id).collect(), ..Bundle::empty(res.id) };
    }

    let sws: Vec<f64> = items.iter().map(|i| i.sw).collect();
    for (item, g) in items.iter_mut().zip(conflict_degrees(&sws)) {
        item.g = g;
    }
    Bundle {
        bidder_id: res.id,
        price: bundle_price(&items, w),
        sequence: work.schedule.iter().map(|s| s.task_id).collect(),
        items,
    }
}

/// Single-task price used by the sequential auctions; `None` if the task
/// does not fit.
pub fn single_task_bid(res: &Resource, task: &Task, w: &BidWeights, ctx: &InsertCtx<'_>) -> Option<Bundle> {
    let b = build_bundle(res, std::slice::from_ref(task), w, ctx);
    (!b.is_empty()).then_some(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::PassModel;
    use crate::model::{Band, Budgets, Point, ResourceKind};

    const PM: PassModel = PassModel { ground_speed_km_s: 7.5, altitude_km: 500.0 };

    fn ctx() -> InsertCtx<'static> {
        InsertCtx { clock: 0, horizon_s: 21600, pass_model: &PM, blackouts: &[] }
    }

    fn uav(mileage: f64, duration: Seconds) -> Resource {
        let cap = Budgets { duration_s: duration, poweron: 20, mileage_km: mileage };
        Resource {
            id: 3,
            kind: ResourceKind::Uav,
            center_id: 0,
            position: Point::default(),
            cruise_speed_kmh: 60.0,
            capacity: cap,
            remaining: cap,
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

    fn task(id: TaskId, x: f64, weight: f64, ws: Seconds, we: Seconds) -> Task {
        Task {
            id,
            name: String::new(),
            location: Point::new(x, 0.0),
            weight,
            window_start: ws,
            window_end: we,
            required_duration: 60,
            required_resolution: 2.0,
            required_band: Band::Optical,
        }
    }

    #[test]
    fn conflict_degree_examples() {
        assert_eq!(conflict_degrees(&[1.0, 0.5]), vec![1.0, 0.5]);
        assert_eq!(conflict_degrees(&[0.0, 0.0, 0.0]), vec![0.0; 3]);
        assert_eq!(conflict_degrees(&[0.3]), vec![1.0]);
        assert!(conflict_degrees(&[]).is_empty());
    }

    #[test]
    fn consumption_degree_examples() {
        let w = BidWeights::default();
        // Ratios 0.5, 0.25, 0.25 sum to 1, scaled by 1/3 and squared.
        let f = consumption_degree(50.0, 100.0, 1.0, 4.0, 5.0, 20.0, &w);
        assert!((f - 1.0 / 9.0).abs() < 1e-12);
        assert_eq!(consumption_degree(0.0, 100.0, 0.0, 4.0, 0.0, 20.0, &w), 0.0);
        assert_eq!(consumption_degree(150.0, 100.0, 1.0, 4.0, 0.0, 20.0, &w), 1.0);
    }

    #[test]
    fn zero_budget_guards() {
        let w = BidWeights::default();
        assert_eq!(consumption_degree(0.0, 100.0, 1.0, 4.0, 0.0, 0.0, &w), (w.alpha * 0.0 + w.beta * 0.25).powi(2));
        assert_eq!(consumption_degree(10.0, 100.0, 1.0, 4.0, 1.0, 0.0, &w), 1.0);
    }

    #[test]
    fn price_examples() {
        let w = BidWeights::default();
        let mut item = BundleItem {
            task_id: 0,
            conflict_weights: vec![],
            sw: 0.0,
            g: 0.2,
            duration: 10,
            poweron: 1,
            distance: 0.0,
            f: 0.1,
            insertion: crate::feasibility::can_insert(&uav(10.0, 100), &task(0, 1.0, 0.5, 0, 3600), &ctx()),
        };
        assert!((bundle_price(std::slice::from_ref(&item), &w) - 0.85).abs() < 1e-12);
        item.g = 1.0;
        item.f = 1.0;
        assert_eq!(bundle_price(&[item], &w), 0.0);
        assert_eq!(bundle_price(&[], &w), 0.0);
    }

    #[test]
    fn mutually_exclusive_tasks_keep_heavier() {
        let r = uav(100.0, 3000);
        let a = task(1, 10.0, 0.4, 600, 700);
        let b = task(2, -10.0, 0.9, 600, 700);
        let bundle = build_bundle(&r, &[a, b], &BidWeights::default(), &ctx());
        assert_eq!(bundle.task_ids(), vec![2]);
    }

    #[test]
    fn nothing_insertable_means_no_bid() {
        let r = uav(1.0, 3000);
        let bundle = build_bundle(&r, &[task(1, 50.0, 0.5, 0, 3600)], &BidWeights::default(), &ctx());
        assert!(bundle.is_empty());
        assert_eq!(bundle.price, 0.0);
    }

    #[test]
    fn duration_budget_caps_bundle_at_three() {
        let r = uav(100.0, 180);
        let tasks: Vec<Task> = (0..5).map(|i| task(i, 1.0 + i as f64, 0.1 * (i + 1) as f64, 0, 21600)).collect();
        let bundle = build_bundle(&r, &tasks, &BidWeights::default(), &ctx());
        let mut ids = bundle.task_ids();
        ids.sort();
        assert_eq!(ids, vec![2, 3, 4]);
    }
}
