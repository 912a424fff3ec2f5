//! Experiment drivers shared by the CLI and the acceptance suite: one static
//! run of a method, task-count sweeps, and dynamic replanning runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{solve_aus, solve_exact_central, solve_ssa, solve_tca, BaselineParams};
use crate::error::{Error, Result};
use crate::feasibility::replay_violations;
use crate::mca::{allocate_batch, handle_disturbance, run_mca, Initiator, McaParams};
use crate::metrics;
use crate::model::{AllocationScheme, BidWeights, ResourceId, Task, TaskId, TaskState, World};
use crate::protocol::{ContractNet, Trace, TraceLevel};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mca,
    Ssa,
    Aus,
    Exact,
    Tca,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Mca, Method::Ssa, Method::Aus, Method::Exact, Method::Tca];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mca => "mca",
            Method::Ssa => "ssa",
            Method::Aus => "aus",
            Method::Exact => "exact",
            Method::Tca => "tca",
        }
    }

    /// Methods that reclaim pending work and replan globally on arrivals.
    pub fn replans_globally(self) -> bool {
        matches!(self, Method::Aus | Method::Exact | Method::Tca)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: Method,
    pub seed: u64,
    /// Cluster count for TCA.
    pub k: usize,
    pub weights: BidWeights,
    pub mca: McaParams,
    pub baseline: BaselineParams,
    /// Record wall-clock runtimes; off makes output byte-reproducible.
    pub timing: bool,
    pub trace_level: TraceLevel,
}

impl RunConfig {
    pub fn new(method: Method, seed: u64) -> Self {
        let mut mca = McaParams::default();
        mca.fls.rng_seed = seed;
        Self {
            method,
            seed,
            k: 10,
            weights: BidWeights::default(),
            mca,
            baseline: BaselineParams { seed, ..Default::default() },
            timing: true,
            trace_level: TraceLevel::Info,
        }
    }
}

/// One output row; the level columns are only filled for MCA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub seed: u64,
    pub n_tasks: usize,
    pub round: u32,
    pub tcr: Option<f64>,
    pub runtime_ms: Option<f64>,
    pub aec_km: Option<f64>,
    pub rsc: Option<f64>,
    pub or: Option<f64>,
    pub level1_ms: Option<f64>,
    pub level2_ms: Option<f64>,
    pub level3_ms: Option<f64>,
}

impl ResultRow {
    pub fn metrics(&self) -> metrics::RunMetrics {
        metrics::RunMetrics {
            method: self.method.clone(),
            seed: self.seed,
            n_tasks: self.n_tasks,
            round: self.round,
            tcr: self.tcr,
            runtime_ms: self.runtime_ms,
            aec_km: self.aec_km,
            rsc: self.rsc,
            or: self.or,
        }
    }
}

/// Dynamic-run row: adds the per-round task counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicRow {
    pub method: String,
    pub seed: u64,
    pub round: u32,
    pub nt: usize,
    pub at: usize,
    pub assigned: usize,
    pub tcr: Option<f64>,
    pub rpt_ms: Option<f64>,
    pub rsc: Option<f64>,
    pub or: Option<f64>,
    pub aec_km: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub row: ResultRow,
    pub world: World,
    pub scheme: AllocationScheme,
    pub trace: Trace,
}

/// Every broken invariant of a world: replay failures per resource, tasks
/// held twice and tasks held without being known.
pub fn check_world(world: &World) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for r in &world.resources {
        for s in &r.schedule {
            if !seen.insert(s.task_id) {
                out.push(format!("task {} assigned twice", s.task_id));
            }
        }
        out.extend(replay_violations(r, |id| world.task(id).cloned(), &world.pass_model));
    }
    out
}

fn solve(
    method: Method,
    world: &mut World,
    net: &mut ContractNet,
    ids: &[TaskId],
    cfg: &RunConfig,
) -> Result<(AllocationScheme, Option<[f64; 3]>)> {
    Ok(match method {
        Method::Mca => {
            let (s, l) = allocate_batch(world, net, ids, &cfg.mca)?;
            (s, Some(l))
        }
        Method::Ssa => (solve_ssa(world, net, ids)?, None),
        Method::Aus => (solve_aus(world, net, ids)?, None),
        Method::Exact => (solve_exact_central(world, net, ids, &cfg.baseline)?, None),
        Method::Tca => (solve_tca(world, net, ids, cfg.k, &cfg.baseline)?, None),
    })
}

/// Allocates every task of a static scenario with one method.
pub fn run_static(scenario: &Scenario, cfg: &RunConfig) -> Result<RunOutput> {
    let mut world = scenario.world.clone();
    let mut net = ContractNet::new(cfg.weights, Trace::new(cfg.trace_level));
    let ids: Vec<TaskId> = world.tasks.iter().map(|t| t.id).collect();
    let t0 = Instant::now();
    let (scheme, levels) = solve(cfg.method, &mut world, &mut net, &ids, cfg)?;
    let runtime = t0.elapsed().as_secs_f64() * 1e3;

    let problems = check_world(&world);
    if let Some(p) = problems.first() {
        return Err(Error::Invariant(p.clone()));
    }
    let assigned = world.scheme().assigned_ids().len();
    let time = |v: f64| cfg.timing.then_some(v);
    let row = ResultRow {
        method: cfg.method.name().into(),
        seed: cfg.seed,
        n_tasks: ids.len(),
        round: 0,
        tcr: metrics::tcr(assigned, ids.len()).ok(),
        runtime_ms: time(runtime),
        aec_km: metrics::aec(&world),
        rsc: None,
        or: None,
        level1_ms: levels.and_then(|l| time(l[0])),
        level2_ms: levels.and_then(|l| time(l[1])),
        level3_ms: levels.and_then(|l| time(l[2])),
    };
    Ok(RunOutput { row, world, scheme, trace: net.trace })
}

/// Runs a static scenario `repeats` times and reports the median runtimes;
/// all other columns come from the first run (runs are deterministic).
pub fn run_static_median(scenario: &Scenario, cfg: &RunConfig, repeats: usize) -> Result<RunOutput> {
    let mut first = run_static(scenario, cfg)?;
    if !cfg.timing || repeats <= 1 {
        return Ok(first);
    }
    let mut runs = vec![first.row.clone()];
    for _ in 1..repeats {
        runs.push(run_static(scenario, &RunConfig { trace_level: TraceLevel::Off, ..cfg.clone() })?.row);
    }
    let median = |f: fn(&ResultRow) -> Option<f64>| {
        let mut v: Vec<f64> = runs.iter().filter_map(f).collect();
        v.sort_by(f64::total_cmp);
        v.get(v.len() / 2).copied()
    };
    first.row.runtime_ms = median(|r| r.runtime_ms);
    first.row.level1_ms = median(|r| r.level1_ms);
    first.row.level2_ms = median(|r| r.level2_ms);
    first.row.level3_ms = median(|r| r.level3_ms);
    Ok(first)
}

fn assignment_map(world: &World) -> BTreeMap<TaskId, ResourceId> {
    world.resources.iter().flat_map(|r| r.schedule.iter().map(move |s| (s.task_id, r.id))).collect()
}

#[derive(Debug, Clone)]
pub struct DynamicOutput {
    pub rows: Vec<DynamicRow>,
    pub world: World,
    pub trace: Trace,
}

/// Plans the initial tasks, then replays each arrival round. MCA and SSA
/// plan only the arrivals; the other methods reclaim every pending task and
/// replan all unfinished work.
pub fn run_dynamic(scenario: &Scenario, cfg: &RunConfig) -> Result<DynamicOutput> {
    let mut world = scenario.world.clone();
    let mut net = ContractNet::new(cfg.weights, Trace::new(cfg.trace_level));
    let initial: Vec<TaskId> = world.tasks.iter().map(|t| t.id).collect();
    solve(cfg.method, &mut world, &mut net, &initial, cfg)?;

    let mut rows = Vec::new();
    for (r, ev) in scenario.events.iter().enumerate() {
        let crate::mca::DisturbanceKind::TaskArrival { tasks } = &ev.kind else {
            return Err(Error::InvalidScenario("dynamic runs replay task arrivals only".into()));
        };
        world.advance_to(ev.time);
        let before = assignment_map(&world);
        let prev_tasks = world.tasks.len();
        let new_ids: Vec<TaskId> = tasks.iter().map(|t| t.id).collect();

        let t0 = Instant::now();
        match cfg.method {
            Method::Mca => {
                for req in handle_disturbance(&mut world, &mut net, ev, &cfg.mca)? {
                    run_mca(&mut world, &mut net, &req.tasks, req.initiator, &cfg.mca)?;
                }
            }
            Method::Ssa => {
                world.add_tasks(tasks.iter().cloned());
                world.refresh_neighbors();
                solve_ssa(&mut world, &mut net, &new_ids)?;
            }
            m => {
                world.add_tasks(tasks.iter().cloned());
                world.refresh_neighbors();
                let pending: Vec<TaskId> = world
                    .resources
                    .iter()
                    .flat_map(|r| r.schedule.iter().filter(|s| s.state == TaskState::Pending).map(|s| s.task_id))
                    .collect();
                for t in &pending {
                    net.reclaim(&mut world, *t, "global_replan");
                }
                let held: BTreeSet<TaskId> = assignment_map(&world).into_keys().collect();
                let open: Vec<TaskId> = world
                    .tasks
                    .iter()
                    .filter(|t| !held.contains(&t.id) && t.window_end > world.clock)
                    .map(|t| t.id)
                    .collect();
                solve(m, &mut world, &mut net, &open, cfg)?;
            }
        }
        let rpt = t0.elapsed().as_secs_f64() * 1e3;

        if let Some(p) = check_world(&world).first() {
            return Err(Error::Invariant(p.clone()));
        }
        let after = assignment_map(&world);
        rows.push(DynamicRow {
            method: cfg.method.name().into(),
            seed: cfg.seed,
            round: r as u32 + 1,
            nt: new_ids.len(),
            at: world.tasks.len(),
            assigned: after.len(),
            tcr: metrics::tcr(after.len(), world.tasks.len()).ok(),
            rpt_ms: cfg.timing.then_some(rpt),
            rsc: metrics::rsc(&before, &after).ok(),
            or: metrics::occupancy_rate(new_ids.len(), prev_tasks).ok(),
            aec_km: metrics::aec(&world),
        });
    }
    Ok(DynamicOutput { rows, world, trace: net.trace })
}

/// Convenience for tests and the sweep: initiator for a static task set.
pub fn centroid_initiator(world: &World, ids: &[TaskId]) -> Option<Initiator> {
    let tasks: Vec<&Task> = ids.iter().filter_map(|t| world.task(*t)).collect();
    if tasks.is_empty() {
        return None;
    }
    let n = tasks.len() as f64;
    let c = crate::model::Point::new(
        tasks.iter().map(|t| t.location.x).sum::<f64>() / n,
        tasks.iter().map(|t| t.location.y).sum::<f64>() / n,
    );
    world
        .resources
        .iter()
        .filter(|r| r.kind.is_mobile() && !r.failed)
        .min_by(|a, b| a.current_position().distance(c).total_cmp(&b.current_position().distance(c)).then(a.id.cmp(&b.id)))
        .map(|r| Initiator::Resource(r.id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_dynamic, generate_static, Profile, ScenarioConfig};

    fn quiet(method: Method, seed: u64) -> RunConfig {
        RunConfig { timing: false, trace_level: TraceLevel::Off, ..RunConfig::new(method, seed) }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("mcp".parse::<Method>().is_err());
    }

    #[test]
    fn static_runs_are_clean_and_repeatable() {
        let mut cfg = ScenarioConfig::profile(Profile::Table2, 2);
        cfg.task_count = 30;
        let sc = generate_static(&cfg).unwrap();
        for m in Method::ALL {
            let a = run_static(&sc, &quiet(m, 2)).unwrap();
            let b = run_static(&sc, &quiet(m, 2)).unwrap();
            assert_eq!(a.row, b.row);
            assert!(a.row.runtime_ms.is_none());
            assert!(check_world(&a.world).is_empty());
            assert!(a.row.level1_ms.is_none());
            let tcr = a.row.tcr.unwrap();
            assert!((0.0..=1.0).contains(&tcr));
        }
    }

    #[test]
    fn timed_mca_reports_levels() {
        let mut cfg = ScenarioConfig::profile(Profile::Table2, 1);
        cfg.task_count = 20;
        let sc = generate_static(&cfg).unwrap();
        let out = run_static_median(&sc, &RunConfig { trace_level: TraceLevel::Off, ..RunConfig::new(Method::Mca, 1) }, 3).unwrap();
        assert!(out.row.runtime_ms.is_some() && out.row.level2_ms.is_some());
        let ssa = run_static(&sc, &RunConfig::new(Method::Ssa, 1)).unwrap();
        assert!(ssa.row.level1_ms.is_none());
    }

    #[test]
    fn double_assignment_is_reported() {
        let mut cfg = ScenarioConfig::profile(Profile::Table2, 3);
        cfg.task_count = 10;
        let sc = generate_static(&cfg).unwrap();
        let mut out = run_static(&sc, &quiet(Method::Ssa, 3)).unwrap();
        let (from, entry) = out
            .world
            .resources
            .iter()
            .find_map(|r| r.schedule.first().map(|s| (r.id, s.clone())))
            .unwrap();
        let other = out.world.resources.iter_mut().find(|r| r.id != from).unwrap();
        other.schedule.push(entry);
        assert!(check_world(&out.world).iter().any(|p| p.contains("twice")));
    }

    #[test]
    fn dynamic_rows_follow_the_schedule() {
        let cfg = ScenarioConfig::profile(Profile::Table2, 0);
        let sc = generate_dynamic(&cfg).unwrap();
        let out = run_dynamic(&sc, &quiet(Method::Mca, 0)).unwrap();
        assert_eq!(out.rows.len(), 6);
        let first = &out.rows[0];
        assert_eq!(first.or, Some(first.nt as f64 / 40.0));
        let mut at = 40;
        for r in &out.rows {
            assert!((30..=50).contains(&r.nt));
            at += r.nt;
            assert_eq!(r.at, at);
            assert!(r.rsc.unwrap() <= r.or.unwrap());
        }
    }
}
