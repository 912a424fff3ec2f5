//! Evaluation quantities: completion rate, average flight distance per
//! task, scheme change rate and occupancy rate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AllocationScheme, ResourceId, TaskId, World};

/// One CSV row. Absent values serialize as empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub method: String,
    pub seed: u64,
    pub n_tasks: usize,
    pub round: u32,
    pub tcr: Option<f64>,
    pub runtime_ms: Option<f64>,
    pub aec_km: Option<f64>,
    pub rsc: Option<f64>,
    pub or: Option<f64>,
}

pub fn tcr(assigned: usize, total: usize) -> Result<f64> {
    if total == 0 {
        return Err(Error::InvalidParam("completion rate over zero tasks".into()));
    }
    Ok(assigned as f64 / total as f64)
}

pub fn tcr_of(scheme: &AllocationScheme, tasks: &[TaskId]) -> Result<f64> {
    let assigned = scheme.assigned_ids();
    tcr(tasks.iter().filter(|t| assigned.contains(t)).count(), tasks.len())
}

/// Total flight distance over number of tasks held by the fleet; satellites
/// add tasks but no distance. `None` when nothing is scheduled.
pub fn aec(world: &World) -> Option<f64> {
    let (km, n) = world.resources.iter().fold((0.0, 0usize), |(km, n), r| {
        let flown: f64 = if r.kind.is_mobile() { r.schedule.iter().map(|s| s.flight_distance_in).sum() } else { 0.0 };
        (km + flown, n + r.schedule.len())
    });
    (n > 0).then(|| km / n as f64)
}

pub fn aec_ratio(total_km: f64, tasks: usize) -> Option<f64> {
    (tasks > 0).then(|| total_km / tasks as f64)
}

/// Recomputes the flight distance per task from an NDJSON trace: execute
/// events add per-task distances, reclaim events give them back.
pub fn aec_from_trace<S: AsRef<str>>(lines: &[S]) -> Result<Option<f64>> {
    let mut km = 0.0;
    let mut n: i64 = 0;
    for line in lines {
        let v: serde_json::Value = serde_json::from_str(line.as_ref())?;
        match v["stage"].as_str() {
            Some("execute") => {
                let committed = v["data"]["committed"].as_array().cloned().unwrap_or_default();
                for c in committed {
                    km += c[3].as_f64().unwrap_or(0.0);
                    n += 1;
                }
            }
            Some("reclaim") => {
                km -= v["data"]["restored_km"].as_f64().unwrap_or(0.0);
                n -= 1;
            }
            _ => {}
        }
    }
    Ok(aec_ratio(km, n.max(0) as usize))
}

/// Share of previously assigned tasks that the new scheme moved to another
/// resource or dropped.
pub fn rsc(old: &BTreeMap<TaskId, ResourceId>, new: &BTreeMap<TaskId, ResourceId>) -> Result<f64> {
    if old.is_empty() {
        return Err(Error::InvalidParam("scheme change rate over an empty scheme".into()));
    }
    let changed = old.iter().filter(|(t, r)| new.get(t) != Some(r)).count();
    Ok(changed as f64 / old.len() as f64)
}

/// Newly inserted tasks relative to the tasks present before insertion.
pub fn occupancy_rate(new_tasks: usize, prev_tasks: usize) -> Result<f64> {
    if prev_tasks == 0 {
        return Err(Error::InvalidParam("occupancy rate over an empty scheme".into()));
    }
    Ok(new_tasks as f64 / prev_tasks as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tcr_examples() {
        assert_eq!(tcr(570, 600).unwrap(), 0.95);
        assert_eq!(tcr(10, 10).unwrap(), 1.0);
        assert_eq!(tcr(0, 10).unwrap(), 0.0);
        assert!(tcr(0, 0).is_err());
    }

    #[test]
    fn aec_examples() {
        assert_eq!(aec_ratio(120.0, 24), Some(5.0));
        assert_eq!(aec_ratio(0.0, 10), Some(0.0));
        assert_eq!(aec_ratio(5.0, 0), None);
    }

    #[test]
    fn rsc_examples() {
        let old: BTreeMap<TaskId, ResourceId> = (0..40).map(|t| (t, 1)).collect();
        assert_eq!(rsc(&old, &old).unwrap(), 0.0);
        let moved: BTreeMap<TaskId, ResourceId> = (0..40).map(|t| (t, 2)).collect();
        assert_eq!(rsc(&old, &moved).unwrap(), 1.0);
        let eight: BTreeMap<TaskId, ResourceId> = (0..40).map(|t| (t, if t < 8 { 2 } else { 1 })).collect();
        assert_eq!(rsc(&old, &eight).unwrap(), 0.2);
        let mut dropped = old.clone();
        dropped.remove(&0);
        assert_eq!(rsc(&old, &dropped).unwrap(), 1.0 / 40.0);
        assert!(rsc(&BTreeMap::new(), &old).is_err());
    }

    #[test]
    fn occupancy_examples() {
        assert_eq!(occupancy_rate(40, 80).unwrap(), 0.5);
        assert_eq!(occupancy_rate(0, 80).unwrap(), 0.0);
        assert_eq!(occupancy_rate(46, 126).unwrap(), 46.0 / 126.0);
        assert!(occupancy_rate(3, 0).is_err());
    }
}
