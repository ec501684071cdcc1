//! Run configuration: a human-editable key-value format with sections.
//!
//! Unknown sections or keys are hard errors — a silently ignored typo in a
//! tuning constant is the main failure mode when reproducing a run. Defaults
//! carry the published tuning of the reference scenario; `scenario =
//! two_vehicle` additionally selects the canned truth targets and the antenna
//! gain they were tuned for, with explicit keys overriding either.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::birth::BirthParams;
use crate::error::{Result, TrackingError};
use crate::filter::FilterParams;
use crate::measurement::{CellGrid, GainProfile, SensorModel};
use crate::motion::MotionParams;
use crate::sim::{
    default_grid, paper_scenario, SimConfig, TruthTarget, Waypoint, SCENARIO_GAIN,
    SCENARIO_PSF_WIDTH_CELLS,
};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,

    // [sensor]
    pub grid: CellGrid,
    pub sigma_w2: f64,
    /// Point-spread widths as a multiple of each cell resolution, per
    /// dimension (range, velocity, azimuth).
    pub psf_width_cells: [f64; 3],
    /// Illumination ellipsoid half-axes as a multiple of each cell resolution.
    pub illumination_radius_cells: f64,
    pub gain: GainProfile,

    // [motion]
    pub frame_period: f64,
    pub sigma_ax2: f64,
    pub sigma_ay2: f64,
    pub sigma_theta_dot2: f64,

    // [filter]
    pub p_survival: f64,
    pub max_hypotheses: usize,
    pub particles_per_track: usize,
    pub gibbs_sweeps: usize,
    pub enumeration_max_labels: usize,
    pub min_track_power: f64,
    pub soft_track_power: f64,

    // [birth]
    pub z_threshold: f64,
    pub r_birth_init: f64,
    pub max_births_per_step: usize,
    /// Standard deviation of sampled tangential birth velocity (m/s).
    pub tangential_vel_std: f64,

    // [sim]
    pub scenario: Scenario,
    pub n_frames: usize,
    pub occlusion_attenuation: f64,
    pub amplitude_correlation: f64,
    pub truth_jitter_pos: f64,
    pub truth_jitter_vel: f64,

    // [eval]
    pub ospa_cutoff: f64,
    pub ospa_order: f64,
    pub association_gate: f64,

    /// Truth targets for `scenario = custom`.
    pub targets: Vec<TruthTarget>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    TwoVehicle,
    Custom,
    None,
}

impl Scenario {
    fn as_str(&self) -> &'static str {
        match self {
            Scenario::TwoVehicle => "two_vehicle",
            Scenario::Custom => "custom",
            Scenario::None => "none",
        }
    }
}

impl PartialEq for TruthTarget {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.spawn_time == other.spawn_time
            && self.despawn_time == other.despawn_time
            && self.rcs_power == other.rcs_power
            && self.occludable == other.occludable
            && self.waypoints.len() == other.waypoints.len()
            && self
                .waypoints
                .iter()
                .zip(&other.waypoints)
                .all(|(a, b)| a.t == b.t && a.x == b.x && a.y == b.y && a.speed == b.speed)
    }
}

impl Default for RunConfig {
    /// Published tuning: survival 0.99, 200 hypotheses, 15000 particles,
    /// birth probability 0.3 above threshold 1e-5, noise floor 2e-6, frame
    /// period 70 ms, acceleration noise (5/3)² and theta rate noise 1e-3,
    /// illumination radii at twice the cell resolution.
    fn default() -> Self {
        let (sim, targets) = paper_scenario();
        Self {
            seed: sim.seed,
            grid: default_grid(),
            sigma_w2: 2e-6,
            psf_width_cells: SCENARIO_PSF_WIDTH_CELLS,
            illumination_radius_cells: 2.0,
            gain: GainProfile::Constant(SCENARIO_GAIN),
            frame_period: 0.07,
            sigma_ax2: (5.0 / 3.0) * (5.0 / 3.0),
            sigma_ay2: (5.0 / 3.0) * (5.0 / 3.0),
            sigma_theta_dot2: 1e-3,
            p_survival: 0.99,
            max_hypotheses: 200,
            particles_per_track: 15_000,
            gibbs_sweeps: 10,
            enumeration_max_labels: 10,
            min_track_power: 1e-5,
            soft_track_power: 4e-5,
            z_threshold: 1e-5,
            r_birth_init: 0.3,
            max_births_per_step: 5,
            tangential_vel_std: 10.0 * 0.07 * (5.0 / 3.0),
            scenario: Scenario::TwoVehicle,
            n_frames: sim.n_frames,
            occlusion_attenuation: sim.occlusion_attenuation,
            amplitude_correlation: sim.amplitude_correlation,
            truth_jitter_pos: 0.0,
            truth_jitter_vel: 0.0,
            ospa_cutoff: 5.0,
            ospa_order: 1.0,
            association_gate: 2.0,
            targets,
        }
    }
}

impl RunConfig {
    pub fn sensor_model(&self) -> SensorModel {
        let res = self.grid.resolutions();
        SensorModel {
            grid: self.grid.clone(),
            sigma_w2: self.sigma_w2,
            psf_widths: [
                self.psf_width_cells[0] * res[0],
                self.psf_width_cells[1] * res[1],
                self.psf_width_cells[2] * res[2],
            ],
            gain: self.gain.clone(),
            illumination_radii: [
                self.illumination_radius_cells * res[0],
                self.illumination_radius_cells * res[1],
                self.illumination_radius_cells * res[2],
            ],
        }
    }

    pub fn motion_params(&self) -> MotionParams {
        MotionParams {
            dt: self.frame_period,
            sigma_ax2: self.sigma_ax2,
            sigma_ay2: self.sigma_ay2,
            sigma_theta_dot2: self.sigma_theta_dot2,
        }
    }

    pub fn filter_params(&self) -> FilterParams {
        FilterParams {
            p_survival: self.p_survival,
            max_hypotheses: self.max_hypotheses,
            particles_per_track: self.particles_per_track,
            gibbs_sweeps: self.gibbs_sweeps,
            enumeration_max_labels: self.enumeration_max_labels,
            min_track_power: self.min_track_power,
            soft_track_power: self.soft_track_power,
        }
    }

    pub fn birth_params(&self) -> BirthParams {
        let res = self.grid.resolutions();
        BirthParams {
            z_threshold: self.z_threshold,
            r_birth_init: self.r_birth_init,
            max_births_per_step: self.max_births_per_step,
            ellipsoid_radii: [
                self.illumination_radius_cells * res[0],
                self.illumination_radius_cells * res[1],
                self.illumination_radius_cells * res[2],
            ],
            tangential_vel_std: self.tangential_vel_std,
            particles: self.particles_per_track,
            min_power: self.min_track_power,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            sensor: self.sensor_model(),
            truth_jitter_pos: self.truth_jitter_pos,
            truth_jitter_vel: self.truth_jitter_vel,
            occlusion_attenuation: self.occlusion_attenuation,
            amplitude_correlation: self.amplitude_correlation,
            frame_period: self.frame_period,
            n_frames: self.n_frames,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sensor_model().validate()?;
        self.motion_params().validate()?;
        self.filter_params().validate()?;
        self.birth_params().validate()?;
        self.sim_config().validate()?;
        if self.n_frames == 0 {
            return Err(TrackingError::Config {
                field: "sim.n_frames".into(),
                message: "must be >= 1".into(),
            });
        }
        if !(self.ospa_cutoff > 0.0) || !(self.ospa_order >= 1.0) {
            return Err(TrackingError::Config {
                field: "eval.ospa_cutoff".into(),
                message: "need cutoff > 0 and order >= 1".into(),
            });
        }
        if self.scenario == Scenario::Custom && self.targets.is_empty() {
            return Err(TrackingError::Config {
                field: "sim.scenario".into(),
                message: "custom scenario requires [target.N] sections".into(),
            });
        }
        for t in &self.targets {
            t.validate()?;
        }
        Ok(())
    }

    pub fn parse_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        // First pass: locate the scenario selector so preset defaults land
        // before explicit keys override them.
        let entries = tokenize(text)?;
        let mut config = RunConfig::default();
        for e in &entries {
            if e.section == "sim" && e.key == "scenario" {
                config.scenario = match e.value.as_str() {
                    "two_vehicle" => Scenario::TwoVehicle,
                    "custom" => Scenario::Custom,
                    "none" => Scenario::None,
                    other => {
                        return Err(TrackingError::Config {
                            field: "sim.scenario".into(),
                            message: format!(
                                "unknown scenario `{other}` (two_vehicle, custom, none)"
                            ),
                        })
                    }
                };
            }
        }
        match config.scenario {
            Scenario::TwoVehicle => {
                let (_, targets) = paper_scenario();
                config.targets = targets;
                config.gain = GainProfile::Constant(SCENARIO_GAIN);
                config.psf_width_cells = SCENARIO_PSF_WIDTH_CELLS;

            }
            Scenario::Custom | Scenario::None => {
                config.targets = Vec::new();
                config.gain = GainProfile::Constant(1.0);
                config.psf_width_cells = [1.0, 1.0, 1.0];
            }
        }

        let mut custom_targets: BTreeMap<u32, TruthTarget> = BTreeMap::new();
        for e in &entries {
            config.apply(e, &mut custom_targets)?;
        }
        if config.scenario == Scenario::Custom {
            config.targets = custom_targets.into_values().collect();
        } else if !custom_targets.is_empty() {
            return Err(TrackingError::Config {
                field: "target".into(),
                message: "[target.N] sections require `scenario = custom`".into(),
            });
        }
        config.validate()?;
        Ok(config)
    }

    fn apply(&mut self, e: &Entry, targets: &mut BTreeMap<u32, TruthTarget>) -> Result<()> {
        let field = || format!("{}.{}", e.section, e.key);
        let bad = |msg: &str| TrackingError::Config {
            field: field(),
            message: msg.to_string(),
        };
        let fval = || -> Result<f64> { e.value.parse().map_err(|_| bad("expected a number")) };
        let uval = || -> Result<usize> { e.value.parse().map_err(|_| bad("expected an integer")) };

        if let Some(id_str) = e.section.strip_prefix("target.") {
            let id: u32 = id_str.parse().map_err(|_| TrackingError::Config {
                field: e.section.clone(),
                message: "target section must be [target.<integer id>]".into(),
            })?;
            let t = targets.entry(id).or_insert_with(|| TruthTarget {
                id,
                spawn_time: 0,
                despawn_time: usize::MAX,
                waypoints: Vec::new(),
                rcs_power: 1e-5,
                occludable: true,
            });
            match e.key.as_str() {
                "spawn" => t.spawn_time = uval()?,
                "despawn" => t.despawn_time = uval()?,
                "rcs_power" => t.rcs_power = fval()?,
                "occludable" => {
                    t.occludable = e.value.parse().map_err(|_| bad("expected true/false"))?
                }
                "waypoints" => t.waypoints = parse_waypoints(&e.value, &field())?,
                _ => return Err(bad("unknown key")),
            }
            return Ok(());
        }

        match (e.section.as_str(), e.key.as_str()) {
            ("run", "seed") => self.seed = e.value.parse().map_err(|_| bad("expected a u64"))?,
            ("sensor", "n_range") => self.grid.n_range = uval()?,
            ("sensor", "n_velocity") => self.grid.n_velocity = uval()?,
            ("sensor", "n_azimuth") => self.grid.n_azimuth = uval()?,
            ("sensor", "range_res") => self.grid.range_res = fval()?,
            ("sensor", "velocity_res") => self.grid.velocity_res = fval()?,
            ("sensor", "azimuth_res") => self.grid.azimuth_res = fval()?,
            ("sensor", "range_offset") => self.grid.range_offset = fval()?,
            ("sensor", "velocity_offset") => self.grid.velocity_offset = fval()?,
            ("sensor", "azimuth_offset") => self.grid.azimuth_offset = fval()?,
            ("sensor", "sigma_w2") => self.sigma_w2 = fval()?,
            ("sensor", "psf_width_cells") => {
                let parts: Vec<&str> = e.value.split(',').map(|x| x.trim()).collect();
                let nums: Vec<f64> = parts
                    .iter()
                    .map(|x| x.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("expected one or three numbers"))?;
                self.psf_width_cells = match nums.as_slice() {
                    [w] => [*w, *w, *w],
                    [a, b, c] => [*a, *b, *c],
                    _ => return Err(bad("expected one or three comma-separated widths")),
                };
            }
            ("sensor", "illumination_radius_cells") => self.illumination_radius_cells = fval()?,
            ("sensor", "gain") => self.gain = GainProfile::Constant(fval()?),
            ("sensor", "gain_table") => self.gain = parse_gain_table(&e.value, &field())?,
            ("motion", "frame_period") => self.frame_period = fval()?,
            ("motion", "sigma_ax2") => self.sigma_ax2 = fval()?,
            ("motion", "sigma_ay2") => self.sigma_ay2 = fval()?,
            ("motion", "sigma_theta_dot2") => self.sigma_theta_dot2 = fval()?,
            ("filter", "p_survival") => self.p_survival = fval()?,
            ("filter", "max_hypotheses") => self.max_hypotheses = uval()?,
            ("filter", "particles_per_track") => self.particles_per_track = uval()?,
            ("filter", "gibbs_sweeps") => self.gibbs_sweeps = uval()?,
            ("filter", "enumeration_max_labels") => self.enumeration_max_labels = uval()?,
            ("filter", "min_track_power") => self.min_track_power = fval()?,
            ("filter", "soft_track_power") => self.soft_track_power = fval()?,
            ("birth", "z_threshold") => self.z_threshold = fval()?,
            ("birth", "r_birth_init") => self.r_birth_init = fval()?,
            ("birth", "max_births_per_step") => self.max_births_per_step = uval()?,
            ("birth", "tangential_vel_std") => self.tangential_vel_std = fval()?,
            ("sim", "scenario") => {} // handled in the first pass
            ("sim", "n_frames") => self.n_frames = uval()?,
            ("sim", "occlusion_attenuation") => self.occlusion_attenuation = fval()?,
            ("sim", "amplitude_correlation") => self.amplitude_correlation = fval()?,
            ("sim", "truth_jitter_pos") => self.truth_jitter_pos = fval()?,
            ("sim", "truth_jitter_vel") => self.truth_jitter_vel = fval()?,
            ("eval", "ospa_cutoff") => self.ospa_cutoff = fval()?,
            ("eval", "ospa_order") => self.ospa_order = fval()?,
            ("eval", "association_gate") => self.association_gate = fval()?,
            _ => {
                return Err(TrackingError::Config {
                    field: field(),
                    message: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    /// Canonical text form; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "\n[sensor]");
        let _ = writeln!(s, "n_range = {}", self.grid.n_range);
        let _ = writeln!(s, "n_velocity = {}", self.grid.n_velocity);
        let _ = writeln!(s, "n_azimuth = {}", self.grid.n_azimuth);
        let _ = writeln!(s, "range_res = {}", self.grid.range_res);
        let _ = writeln!(s, "velocity_res = {}", self.grid.velocity_res);
        let _ = writeln!(s, "azimuth_res = {}", self.grid.azimuth_res);
        let _ = writeln!(s, "range_offset = {}", self.grid.range_offset);
        let _ = writeln!(s, "velocity_offset = {}", self.grid.velocity_offset);
        let _ = writeln!(s, "azimuth_offset = {}", self.grid.azimuth_offset);
        let _ = writeln!(s, "sigma_w2 = {}", self.sigma_w2);
        let _ = writeln!(
            s,
            "psf_width_cells = {}, {}, {}",
            self.psf_width_cells[0], self.psf_width_cells[1], self.psf_width_cells[2]
        );
        let _ = writeln!(
            s,
            "illumination_radius_cells = {}",
            self.illumination_radius_cells
        );
        match &self.gain {
            GainProfile::Constant(g) => {
                let _ = writeln!(s, "gain = {g}");
            }
            GainProfile::PiecewiseLinear(table) => {
                let items: Vec<String> =
                    table.iter().map(|(a, g)| format!("{a}:{g}")).collect();
                let _ = writeln!(s, "gain_table = {}", items.join(","));
            }
        }
        let _ = writeln!(s, "\n[motion]");
        let _ = writeln!(s, "frame_period = {}", self.frame_period);
        let _ = writeln!(s, "sigma_ax2 = {}", self.sigma_ax2);
        let _ = writeln!(s, "sigma_ay2 = {}", self.sigma_ay2);
        let _ = writeln!(s, "sigma_theta_dot2 = {}", self.sigma_theta_dot2);
        let _ = writeln!(s, "\n[filter]");
        let _ = writeln!(s, "p_survival = {}", self.p_survival);
        let _ = writeln!(s, "max_hypotheses = {}", self.max_hypotheses);
        let _ = writeln!(s, "particles_per_track = {}", self.particles_per_track);
        let _ = writeln!(s, "gibbs_sweeps = {}", self.gibbs_sweeps);
        let _ = writeln!(s, "enumeration_max_labels = {}", self.enumeration_max_labels);
        let _ = writeln!(s, "min_track_power = {}", self.min_track_power);
        let _ = writeln!(s, "soft_track_power = {}", self.soft_track_power);
        let _ = writeln!(s, "\n[birth]");
        let _ = writeln!(s, "z_threshold = {}", self.z_threshold);
        let _ = writeln!(s, "r_birth_init = {}", self.r_birth_init);
        let _ = writeln!(s, "max_births_per_step = {}", self.max_births_per_step);
        let _ = writeln!(s, "tangential_vel_std = {}", self.tangential_vel_std);
        let _ = writeln!(s, "\n[sim]");
        let _ = writeln!(s, "scenario = {}", self.scenario.as_str());
        let _ = writeln!(s, "n_frames = {}", self.n_frames);
        let _ = writeln!(s, "occlusion_attenuation = {}", self.occlusion_attenuation);
        let _ = writeln!(s, "amplitude_correlation = {}", self.amplitude_correlation);
        let _ = writeln!(s, "truth_jitter_pos = {}", self.truth_jitter_pos);
        let _ = writeln!(s, "truth_jitter_vel = {}", self.truth_jitter_vel);
        let _ = writeln!(s, "\n[eval]");
        let _ = writeln!(s, "ospa_cutoff = {}", self.ospa_cutoff);
        let _ = writeln!(s, "ospa_order = {}", self.ospa_order);
        let _ = writeln!(s, "association_gate = {}", self.association_gate);
        if self.scenario == Scenario::Custom {
            for t in &self.targets {
                let _ = writeln!(s, "\n[target.{}]", t.id);
                let _ = writeln!(s, "spawn = {}", t.spawn_time);
                let _ = writeln!(s, "despawn = {}", t.despawn_time);
                let _ = writeln!(s, "rcs_power = {}", t.rcs_power);
                let _ = writeln!(s, "occludable = {}", t.occludable);
                let wps: Vec<String> = t
                    .waypoints
                    .iter()
                    .map(|w| format!("{}:{}:{}:{}", w.t, w.x, w.y, w.speed))
                    .collect();
                let _ = writeln!(s, "waypoints = {}", wps.join("; "));
            }
        }
        s
    }
}

struct Entry {
    section: String,
    key: String,
    value: String,
}

fn tokenize(text: &str) -> Result<Vec<Entry>> {
    let mut section = String::new();
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| TrackingError::Config {
                field: format!("line {}", lineno + 1),
                message: format!("malformed section header `{line}`"),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| TrackingError::Config {
            field: format!("line {}", lineno + 1),
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        if section.is_empty() {
            return Err(TrackingError::Config {
                field: format!("line {}", lineno + 1),
                message: "key before any [section] header".into(),
            });
        }
        entries.push(Entry {
            section: section.clone(),
            key: key.trim().to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(entries)
}

fn parse_waypoints(value: &str, field: &str) -> Result<Vec<Waypoint>> {
    let mut out = Vec::new();
    for item in value.split(';') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let parts: Vec<&str> = item.split(':').collect();
        if parts.len() != 4 {
            return Err(TrackingError::Config {
                field: field.into(),
                message: format!("waypoint `{item}` must be t:x:y:speed"),
            });
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| TrackingError::Config {
                field: field.into(),
                message: format!("non-numeric waypoint `{item}`"),
            })?;
        out.push(Waypoint {
            t: nums[0],
            x: nums[1],
            y: nums[2],
            speed: nums[3],
        });
    }
    Ok(out)
}

fn parse_gain_table(value: &str, field: &str) -> Result<GainProfile> {
    let mut table = Vec::new();
    for item in value.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let (a, g) = item.split_once(':').ok_or_else(|| TrackingError::Config {
            field: field.into(),
            message: format!("gain entry `{item}` must be azimuth:gain"),
        })?;
        let a: f64 = a.trim().parse().map_err(|_| TrackingError::Config {
            field: field.into(),
            message: format!("non-numeric azimuth in `{item}`"),
        })?;
        let g: f64 = g.trim().parse().map_err(|_| TrackingError::Config {
            field: field.into(),
            message: format!("non-numeric gain in `{item}`"),
        })?;
        table.push((a, g));
    }
    if table.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(TrackingError::Config {
            field: field.into(),
            message: "gain table azimuths must be strictly increasing".into(),
        });
    }
    Ok(GainProfile::PiecewiseLinear(table))
}
