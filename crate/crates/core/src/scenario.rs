//! Seeded scenario generation and persistence.

use std::path::Path;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::PassModel;
use crate::mca::{DisturbanceEvent, DisturbanceKind};
use crate::model::{
    validate_scenario, Band, Budgets, CenterId, GroundTrack, LatencyModel, PlanningCenter, Point, Region,
    Resource, ResourceKind, Seconds, Task, TaskId, World,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Table1,
    Table2,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(Profile::Table1),
            "table2" => Ok(Profile::Table2),
            other => Err(Error::InvalidParam(format!("unknown profile {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSpec {
    pub kind: ResourceKind,
    pub count: u32,
}

/// Capability values per resource kind. Two-valued entries alternate by
/// index within the kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindParams {
    pub max_duration_s: Seconds,
    pub poweron: u32,
    pub cruise_speed_kmh: Vec<f64>,
    pub mileage_km: Vec<f64>,
    pub visible_width_m: Vec<f64>,
    pub side_swing_deg: Vec<f64>,
    pub max_resolution_m: f64,
    pub bands: Vec<Band>,
}

impl KindParams {
    fn pick(values: &[f64], idx: usize) -> f64 {
        if values.is_empty() {
            0.0
        } else {
            values[idx % values.len()]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicSpec {
    pub initial_tasks: u32,
    pub rounds: u32,
    pub min_new: u32,
    pub max_new: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub centers: Vec<CenterSpec>,
    pub satellite: KindParams,
    pub uav: KindParams,
    pub airship: KindParams,
    pub task_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamic: Option<DynamicSpec>,
    pub region: Region,
    pub horizon_s: Seconds,
    pub comm_radius_km: f64,
    pub pass_model: PassModel,
    pub tracks_per_satellite: u32,
    pub max_link_latency_s: Seconds,
    /// Task band mix as (band, weight).
    pub band_mix: Vec<(Band, f64)>,
    pub resolutions_m: Vec<f64>,
    pub duration_range_s: (Seconds, Seconds),
    pub window_range_s: (Seconds, Seconds),
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn profile(profile: Profile, seed: u64) -> Self {
        let counts: [u32; 4] = match profile {
            Profile::Table1 => [2, 25, 28, 9],
            Profile::Table2 => [1, 9, 9, 3],
        };
        let kinds = [ResourceKind::Satellite, ResourceKind::Uav, ResourceKind::Uav, ResourceKind::Airship];
        let satellite = KindParams {
            max_duration_s: 2400,
            poweron: 30,
            cruise_speed_kmh: vec![],
            mileage_km: vec![0.0],
            visible_width_m: match profile {
                Profile::Table1 => vec![8200.0, 5000.0],
                Profile::Table2 => vec![5000.0],
            },
            side_swing_deg: match profile {
                Profile::Table1 => vec![30.0, 25.0],
                Profile::Table2 => vec![25.0],
            },
            max_resolution_m: 2.0,
            bands: vec![Band::Optical, Band::Sar],
        };
        let uav = KindParams {
            max_duration_s: 3000,
            poweron: 20,
            cruise_speed_kmh: vec![90.0, 60.0],
            mileage_km: vec![21.0, 30.0],
            visible_width_m: vec![500.0, 600.0],
            side_swing_deg: vec![0.0],
            max_resolution_m: 0.5,
            bands: vec![Band::Optical, Band::Infrared],
        };
        let airship = KindParams {
            max_duration_s: 4800,
            poweron: 40,
            cruise_speed_kmh: vec![60.0],
            mileage_km: vec![360.0],
            visible_width_m: vec![650.0],
            side_swing_deg: vec![0.0],
            max_resolution_m: 1.0,
            bands: vec![Band::Optical, Band::Infrared, Band::Sar],
        };
        Self {
            centers: kinds.iter().zip(counts).map(|(k, c)| CenterSpec { kind: *k, count: c }).collect(),
            satellite,
            uav,
            airship,
            task_count: match profile {
                Profile::Table1 => 600,
                Profile::Table2 => 40,
            },
            dynamic: match profile {
                Profile::Table1 => None,
                Profile::Table2 => Some(DynamicSpec { initial_tasks: 40, rounds: 6, min_new: 30, max_new: 50 }),
            },
            region: Region { width_km: 200.0, height_km: 200.0 },
            horizon_s: 6 * 3600,
            comm_radius_km: 30.0,
            pass_model: PassModel::default(),
            tracks_per_satellite: 2,
            max_link_latency_s: 0,
            band_mix: vec![(Band::Optical, 0.6), (Band::Infrared, 0.2), (Band::Sar, 0.2)],
            resolutions_m: vec![1.0, 2.0, 5.0, 10.0],
            duration_range_s: (10, 60),
            window_range_s: (1800, 10800),
            seed,
        }
    }

    fn kind_params(&self, kind: ResourceKind) -> &KindParams {
        match kind {
            ResourceKind::Satellite => &self.satellite,
            ResourceKind::Uav => &self.uav,
            ResourceKind::Airship => &self.airship,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScenario(m.to_string()));
        if self.horizon_s <= 0 {
            return bad("horizon must be positive");
        }
        if !(self.region.width_km > 0.0 && self.region.height_km > 0.0) {
            return bad("region must have positive size");
        }
        let (d0, d1) = self.duration_range_s;
        if d0 <= 0 || d1 < d0 {
            return bad("duration range must be positive and ordered");
        }
        let (w0, w1) = self.window_range_s;
        if w0 < d1 || w1 < w0 || w1 > self.horizon_s {
            return bad("window range must fit durations and the horizon");
        }
        if self.band_mix.is_empty() || self.band_mix.iter().any(|(_, w)| w.is_nan() || *w < 0.0) {
            return bad("band mix must be nonempty with nonnegative weights");
        }
        if self.resolutions_m.is_empty() || self.resolutions_m.iter().any(|r| r.is_nan() || *r <= 0.0) {
            return bad("resolutions must be positive");
        }
        for k in [ResourceKind::Satellite, ResourceKind::Uav, ResourceKind::Airship] {
            let p = self.kind_params(k);
            if p.max_duration_s < 0 || p.bands.is_empty() || p.max_resolution_m <= 0.0 {
                return bad("resource capabilities must be positive");
            }
            if k.is_mobile() && (p.cruise_speed_kmh.iter().any(|v| v.is_nan() || *v <= 0.0) || p.cruise_speed_kmh.is_empty()) {
                return bad("cruise speeds must be positive");
            }
            if p.mileage_km.iter().any(|m| m.is_nan() || *m < 0.0) {
                return bad("mileage must be nonnegative");
            }
        }
        if let Some(d) = &self.dynamic {
            if d.min_new > d.max_new {
                return bad("dynamic task range is inverted");
            }
        }
        if self.comm_radius_km < 0.0 || self.max_link_latency_s < 0 {
            return bad("radius and latency must be nonnegative");
        }
        Ok(())
    }
}

/// A persisted scenario: the generating config, the world and, for dynamic
/// runs, the injection schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub config: ScenarioConfig,
    pub world: World,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<DisturbanceEvent>,
}

fn stream(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(crate::splitmix64(seed ^ crate::splitmix64(salt)))
}

fn build_fleet(cfg: &ScenarioConfig) -> (Vec<PlanningCenter>, Vec<Resource>) {
    let mut rng = stream(cfg.seed, 1);
    let mut centers = Vec::new();
    let mut resources = Vec::new();
    let mut kind_index = [0usize; 3];
    let n_centers = cfg.centers.len() as CenterId;
    for (cid, spec) in cfg.centers.iter().enumerate() {
        let cid = cid as CenterId;
        let mut ids = Vec::new();
        for _ in 0..spec.count {
            let id = resources.len() as u32;
            let slot = &mut kind_index[spec.kind as usize];
            let idx = *slot;
            *slot += 1;
            let p = cfg.kind_params(spec.kind);
            let mileage = if spec.kind.is_mobile() { KindParams::pick(&p.mileage_km, idx) } else { 0.0 };
            let cap = Budgets { duration_s: p.max_duration_s, poweron: p.poweron, mileage_km: mileage };
            let position = Point::new(
                rng.gen_range(0.0..cfg.region.width_km),
                rng.gen_range(0.0..cfg.region.height_km),
            );
            let tracks = if spec.kind.is_mobile() {
                Vec::new()
            } else {
                let n = cfg.tracks_per_satellite.max(1) as Seconds;
                (0..n)
                    .map(|k| {
                        let slice = cfg.horizon_s / n;
                        GroundTrack {
                            t0: k * slice + rng.gen_range(0..slice.max(1)),
                            origin: Point::new(
                                rng.gen_range(0.0..cfg.region.width_km),
                                cfg.region.height_km / 2.0,
                            ),
                            heading_deg: rng.gen_range(75.0..105.0),
                        }
                    })
                    .collect()
            };
            resources.push(Resource {
                id,
                kind: spec.kind,
                center_id: cid,
                position: if spec.kind.is_mobile() { position } else { Point::default() },
                cruise_speed_kmh: KindParams::pick(&p.cruise_speed_kmh, idx),
                capacity: cap,
                remaining: cap,
                visible_width_m: KindParams::pick(&p.visible_width_m, idx),
                side_swing_deg: KindParams::pick(&p.side_swing_deg, idx),
                max_resolution_m: p.max_resolution_m,
                bands: p.bands.iter().copied().collect(),
                tracks,
                schedule: Vec::new(),
                neighbors: Vec::new(),
                failed: false,
            });
            ids.push(id);
        }
        centers.push(PlanningCenter {
            id: cid,
            kind: spec.kind,
            resource_ids: ids,
            peer_center_ids: (0..n_centers).filter(|c| *c != cid).collect(),
        });
    }
    (centers, resources)
}

fn draw_tasks(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng, first_id: TaskId, count: u32, earliest: Seconds) -> Vec<Task> {
    let bands = WeightedIndex::new(cfg.band_mix.iter().map(|(_, w)| *w)).expect("validated band mix");
    (0..count)
        .map(|i| {
            let id = first_id + i;
            let (w0, w1) = cfg.window_range_s;
            let span = (cfg.horizon_s - earliest).max(1);
            let len = rng.gen_range(w0..=w1).min(span);
            let start = earliest + rng.gen_range(0..=(span - len));
            Task {
                id,
                name: format!("T{id:04}"),
                location: Point::new(rng.gen_range(0.0..cfg.region.width_km), rng.gen_range(0.0..cfg.region.height_km)),
                weight: rng.gen_range(0.0..=1.0),
                window_start: start,
                window_end: start + len,
                required_duration: rng.gen_range(cfg.duration_range_s.0..=cfg.duration_range_s.1).min(len),
                required_resolution: *cfg.resolutions_m.choose(rng).expect("validated"),
                required_band: cfg.band_mix[bands.sample(rng)].0,
            }
        })
        .collect()
}

fn assemble(cfg: &ScenarioConfig, tasks: Vec<Task>) -> World {
    let (centers, resources) = build_fleet(cfg);
    let mut world = World {
        horizon_s: cfg.horizon_s,
        region_km: cfg.region,
        centers,
        resources,
        tasks,
        clock: 0,
        pass_model: cfg.pass_model.clone(),
        comm_radius_km: cfg.comm_radius_km,
        blackouts: Vec::new(),
        latency: LatencyModel { max_link_latency_s: cfg.max_link_latency_s, salt: crate::splitmix64(cfg.seed ^ 0x1a7e) },
    };
    world.refresh_neighbors();
    world
}

fn checked(world: &World) -> Result<()> {
    let report = validate_scenario(&world.tasks, &world.centers, &world.resources, world.horizon_s);
    match report.first() {
        None => Ok(()),
        Some(v) => Err(Error::InvalidScenario(v.to_string())),
    }
}

/// Static scenario with `config.task_count` tasks.
pub fn generate_static(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, 2);
    let tasks = draw_tasks(cfg, &mut rng, 0, cfg.task_count, 0);
    let world = assemble(cfg, tasks);
    checked(&world)?;
    Ok(Scenario { schema_version: SCHEMA_VERSION, config: cfg.clone(), world, events: Vec::new() })
}

/// Trigger time of injection round `r` (1-based): rounds are spread evenly
/// over the first half of the horizon so late arrivals still have room.
pub fn injection_time(cfg: &ScenarioConfig, rounds: u32, r: u32) -> Seconds {
    cfg.horizon_s * Seconds::from(r) / (2 * Seconds::from(rounds.max(1)))
}

/// Dynamic scenario: initial tasks plus one arrival event per round.
pub fn generate_dynamic(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let spec = cfg
        .dynamic
        .clone()
        .ok_or_else(|| Error::InvalidScenario("profile has no dynamic schedule".into()))?;
    let mut rng = stream(cfg.seed, 2);
    let initial = draw_tasks(cfg, &mut rng, 0, spec.initial_tasks, 0);
    let mut next = spec.initial_tasks;
    let mut events = Vec::new();
    let mut ev_rng = stream(cfg.seed, 3);
    for r in 1..=spec.rounds {
        let t = injection_time(cfg, spec.rounds, r);
        let n = ev_rng.gen_range(spec.min_new..=spec.max_new);
        let tasks = draw_tasks(cfg, &mut ev_rng, next, n, t);
        next += n;
        events.push(DisturbanceEvent { time: t, kind: DisturbanceKind::TaskArrival { tasks } });
    }
    let world = assemble(cfg, initial);
    checked(&world)?;
    Ok(Scenario { schema_version: SCHEMA_VERSION, config: cfg.clone(), world, events })
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            schema_version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion { found: header.schema_version, expected: SCHEMA_VERSION });
        }
        let s: Scenario = serde_json::from_str(text)?;
        checked(&s.world)?;
        Ok(s)
    }

    /// Writes `scenario.json`, plus `events.json` when there are events.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut body = self.clone();
        let events = std::mem::take(&mut body.events);
        std::fs::write(dir.join("scenario.json"), body.to_json() + "\n")?;
        if !events.is_empty() {
            std::fs::write(dir.join("events.json"), serde_json::to_string_pretty(&events)? + "\n")?;
        }
        Ok(())
    }

    /// Reads `scenario.json` from a file path or directory, picking up a
    /// sibling `events.json` if present.
    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() { path.join("scenario.json") } else { path.to_path_buf() };
        let mut s = Self::from_json(&std::fs::read_to_string(&file)?)?;
        let events = file.with_file_name("events.json");
        if s.events.is_empty() && events.exists() {
            s.events = serde_json::from_str(&std::fs::read_to_string(events)?)?;
        }
        Ok(s)
    }
}
