//! Synthetic radar-cube generator: ground-truth trajectories rendered into
//! Swerling-1 fluctuating intensities over a complex noise floor.
//!
//! Every target contributes one complex amplitude per frame (drawn from its
//! received power) shaped by the point-spread profile; amplitudes superpose
//! coherently before the squared modulus, so closely spaced targets interfere
//! exactly where the separable-likelihood assumption is stressed. Occlusion is
//! a single multiplicative power attenuation on the shadowed target.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::measurement::{
    illumination_region_of_point, psf_value, reflection_power, state_to_measurement, CellGrid,
    GainProfile, MeasPoint, RadarCube, SensorModel,
};
use crate::rfs::State5;
use crate::rng::{stream_rng, Stream};

/// Trajectory waypoint. Positions interpolate piecewise linearly; the speed
/// field records the outgoing segment's speed for readability.
#[derive(Debug, Clone, Copy)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
}

#[derive(Debug, Clone)]
pub struct TruthTarget {
    pub id: u32,
    /// First frame index at which the target exists.
    pub spawn_time: usize,
    /// First frame index at which the target no longer exists.
    pub despawn_time: usize,
    pub waypoints: Vec<Waypoint>,
    /// Received power σ_ρ² (power units).
    pub rcs_power: f64,
    pub occludable: bool,
}

impl TruthTarget {
    pub fn validate(&self) -> crate::error::Result<()> {
        if self.spawn_time >= self.despawn_time {
            return Err(crate::error::TrackingError::Config {
                field: format!("target.{}.spawn_time", self.id),
                message: "spawn_time must precede despawn_time".into(),
            });
        }
        if self.waypoints.len() < 2 {
            return Err(crate::error::TrackingError::Config {
                field: format!("target.{}.waypoints", self.id),
                message: "need at least two waypoints".into(),
            });
        }
        if self.waypoints.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(crate::error::TrackingError::Config {
                field: format!("target.{}.waypoints", self.id),
                message: "waypoints must be strictly time-sorted".into(),
            });
        }
        Ok(())
    }

    /// Position and velocity at time `t` by piecewise-linear interpolation,
    /// clamped to the end segments.
    pub fn kinematics(&self, t: f64) -> (f64, f64, f64, f64) {
        let wp = &self.waypoints;
        let seg = wp
            .windows(2)
            .position(|w| t <= w[1].t)
            .unwrap_or(wp.len() - 2);
        let (a, b) = (&wp[seg], &wp[seg + 1]);
        let dt = b.t - a.t;
        let vx = (b.x - a.x) / dt;
        let vy = (b.y - a.y) / dt;
        let tau = (t - a.t).clamp(0.0, dt);
        (a.x + vx * tau, a.y + vy * tau, vx, vy)
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub sensor: SensorModel,
    /// Optional dither on truth positions (m) and velocities (m/s).
    pub truth_jitter_pos: f64,
    pub truth_jitter_vel: f64,
    /// Power attenuation applied to occluded targets, in [0, 1].
    pub occlusion_attenuation: f64,
    /// Frame-to-frame correlation of each scatterer's complex amplitude in
    /// [0, 1). Real returns decorrelate over a few frames as the aspect
    /// angle drifts; 0 reproduces fully independent scan-to-scan
    /// fluctuation. The marginal per-frame amplitude stays complex Gaussian
    /// (exponential intensity) for any value.
    pub amplitude_correlation: f64,
    pub frame_period: f64,
    pub n_frames: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> crate::error::Result<()> {
        self.sensor.validate()?;
        if !(self.frame_period > 0.0) {
            return Err(crate::error::TrackingError::Config {
                field: "sim.frame_period".into(),
                message: format!("must be > 0, got {}", self.frame_period),
            });
        }
        if !(0.0..=1.0).contains(&self.occlusion_attenuation) {
            return Err(crate::error::TrackingError::Config {
                field: "sim.occlusion_attenuation".into(),
                message: format!("must be in [0, 1], got {}", self.occlusion_attenuation),
            });
        }
        if !(0.0..1.0).contains(&self.amplitude_correlation) {
            return Err(crate::error::TrackingError::Config {
                field: "sim.amplitude_correlation".into(),
                message: format!("must be in [0, 1), got {}", self.amplitude_correlation),
            });
        }
        Ok(())
    }
}

/// Ground truth of one target at one frame.
#[derive(Debug, Clone)]
pub struct TruthState {
    pub id: u32,
    pub state: State5,
    pub occluded: bool,
}

/// Occlusion rule: a target is shadowed when another object sits at smaller
/// range within half an azimuth cell. Scatterers sharing a truth id belong to
/// one physical object and never shadow each other.
pub fn occludes(own: &MeasPoint, other: &MeasPoint, grid: &CellGrid) -> bool {
    other[0] < own[0] && (own[2] - other[2]).abs() < 0.5 * grid.azimuth_res
}

/// Interpolated truth states for frame `k`, with theta derived from each
/// target's received power at its current geometry and occlusion flags from
/// the half-azimuth-cell rule.
pub fn truth_states(targets: &[TruthTarget], config: &SimConfig, k: usize) -> Vec<TruthState> {
    let t = k as f64 * config.frame_period;
    let mut rows: Vec<(u32, State5, bool)> = Vec::new();
    for target in targets {
        if k < target.spawn_time || k >= target.despawn_time {
            continue;
        }
        let (mut x, mut y, mut vx, mut vy) = target.kinematics(t);
        if config.truth_jitter_pos > 0.0 || config.truth_jitter_vel > 0.0 {
            let mut rng = stream_rng(config.seed, Stream::TruthJitter, k as u64, target.id as u64);
            x += config.truth_jitter_pos * rng.sample::<f64, _>(StandardNormal);
            y += config.truth_jitter_pos * rng.sample::<f64, _>(StandardNormal);
            vx += config.truth_jitter_vel * rng.sample::<f64, _>(StandardNormal);
            vy += config.truth_jitter_vel * rng.sample::<f64, _>(StandardNormal);
        }
        let mut state = [x, vx, y, vy, 0.0];
        let m = match state_to_measurement(&state) {
            Ok(m) => m,
            Err(_) => continue,
        };
        state[4] =
            crate::measurement::theta_from_reflection_power(target.rcs_power, &m, &config.sensor);
        rows.push((target.id, state, target.occludable));
    }

    let points: Vec<MeasPoint> = rows
        .iter()
        .map(|(_, s, _)| state_to_measurement(s).unwrap())
        .collect();
    rows.iter()
        .enumerate()
        .map(|(i, (id, state, occludable))| {
            let occluded = *occludable
                && points.iter().enumerate().any(|(j, p)| {
                    rows[j].0 != *id && occludes(&points[i], p, &config.sensor.grid)
                });
            TruthState {
                id: *id,
                state: *state,
                occluded,
            }
        })
        .collect()
}

/// Render one frame: complex noise per cell plus one coherent complex
/// amplitude per target shaped by the point-spread profile. Occluded targets
/// lose `occlusion_attenuation` of their power. The per-target unit
/// amplitudes (standard complex Gaussian) come from the caller so that their
/// frame-to-frame correlation is the caller's choice; cell noise is drawn
/// fresh from `rng`.
pub fn render_cube_with_amplitudes<R: Rng>(
    truth: &[TruthState],
    unit_amplitudes: &[(f64, f64)],
    sensor: &SensorModel,
    occlusion_attenuation: f64,
    timestamp: f64,
    rng: &mut R,
) -> RadarCube {
    debug_assert_eq!(truth.len(), unit_amplitudes.len());
    let n = sensor.grid.cell_count();
    let noise_sd = sensor.sigma_w2.sqrt();
    let mut re = vec![0.0f64; n];
    let mut im = vec![0.0f64; n];
    for i in 0..n {
        re[i] = noise_sd * rng.sample::<f64, _>(StandardNormal);
        im[i] = noise_sd * rng.sample::<f64, _>(StandardNormal);
    }
    for (target, (unit_re, unit_im)) in truth.iter().zip(unit_amplitudes) {
        let m = match state_to_measurement(&target.state) {
            Ok(m) => m,
            Err(_) => continue,
        };
        let sigma_rho2 = match reflection_power(&target.state, sensor) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let amp_sd = sigma_rho2.sqrt();
        let rho_re = amp_sd * unit_re;
        let rho_im = amp_sd * unit_im;
        let occ_amp = if target.occluded {
            occlusion_attenuation.sqrt()
        } else {
            1.0
        };
        for flat in illumination_region_of_point(&m, sensor) {
            let h = psf_value(&target.state, flat, sensor);
            re[flat] += occ_amp * rho_re * h;
            im[flat] += occ_amp * rho_im * h;
        }
    }
    let intensities = re
        .iter()
        .zip(&im)
        .map(|(a, b)| a * a + b * b)
        .collect();
    RadarCube {
        grid: sensor.grid.clone(),
        intensities,
        timestamp,
    }
}

/// Render one frame with freshly drawn, frame-independent target amplitudes.
pub fn render_cube<R: Rng>(
    truth: &[TruthState],
    sensor: &SensorModel,
    occlusion_attenuation: f64,
    timestamp: f64,
    rng: &mut R,
) -> RadarCube {
    let amps: Vec<(f64, f64)> = truth
        .iter()
        .map(|_| {
            (
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            )
        })
        .collect();
    render_cube_with_amplitudes(truth, &amps, sensor, occlusion_attenuation, timestamp, rng)
}

/// Unit amplitude of one scatterer at frame `k` under first-order
/// autoregressive frame-to-frame correlation `alpha`:
/// a_k = α a_{k-1} + √(1−α²) ε_k with standard complex Gaussian ε.
///
/// The prefix is reconstructed from per-frame innovation streams, so any
/// frame can be rendered independently and reproducibly.
fn ar_unit_amplitude(seed: u64, scatterer: u64, alpha: f64, k: usize) -> (f64, f64) {
    let draw = |j: usize| -> (f64, f64) {
        let mut rng = stream_rng(seed, Stream::SimTarget, j as u64, scatterer);
        (
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    };
    if alpha <= 0.0 {
        return draw(k);
    }
    let innovation_sd = (1.0 - alpha * alpha).sqrt();
    let (mut re, mut im) = draw(0);
    for j in 1..=k {
        let (er, ei) = draw(j);
        re = alpha * re + innovation_sd * er;
        im = alpha * im + innovation_sd * ei;
    }
    (re, im)
}

/// Render one configured frame, reproducibly and independently of the other
/// frames: cell noise comes from the frame's own stream while scatterer
/// amplitudes replay their autoregressive prefix.
pub fn render_frame(targets: &[TruthTarget], config: &SimConfig, k: usize) -> RadarCube {
    let truth = truth_states(targets, config, k);
    let amps: Vec<(f64, f64)> = truth
        .iter()
        .enumerate()
        .map(|(i, t)| {
            // Scatterers of one object share an id; disambiguate by index.
            let scatterer = ((t.id as u64) << 32) | i as u64;
            ar_unit_amplitude(config.seed, scatterer, config.amplitude_correlation, k)
        })
        .collect();
    let mut rng = stream_rng(config.seed, Stream::SimNoise, k as u64, 0);
    render_cube_with_amplitudes(
        &truth,
        &amps,
        &config.sensor,
        config.occlusion_attenuation,
        k as f64 * config.frame_period,
        &mut rng,
    )
}

/// Render the full configured frame sequence.
pub fn render_sequence(targets: &[TruthTarget], config: &SimConfig) -> Vec<RadarCube> {
    use rayon::prelude::*;
    (0..config.n_frames)
        .into_par_iter()
        .map(|k| render_frame(targets, config, k))
        .collect()
}

/// Default grid for the canned scenario: 64 range cells at 1 m, 32 velocity
/// cells at 0.5 m/s and 16 azimuth cells at 2 degrees, centered on boresight.
/// The range window starts at the sensor's 5 m minimum range.
pub fn default_grid() -> CellGrid {
    let deg = std::f64::consts::PI / 180.0;
    CellGrid {
        n_range: 64,
        n_velocity: 32,
        n_azimuth: 16,
        range_res: 1.0,
        velocity_res: 0.5,
        azimuth_res: 2.0 * deg,
        range_offset: 5.0,
        velocity_offset: -8.0,
        azimuth_offset: -16.0 * deg,
    }
}

/// Antenna gain used by the canned scenario (about 46 dB). Together with the
/// default noise floor this puts the range-corrected power state of a
/// passenger-car return in a band the configured theta rate noise can track.
pub const SCENARIO_GAIN: f64 = 4.05e4;

/// Point-spread widths of the canned scenario in cells per dimension
/// (range, velocity, azimuth). The range window is wider than one cell
/// while the velocity and azimuth windows are sharper, matching FFT chains
/// with different window functions per dimension.
pub const SCENARIO_PSF_WIDTH_CELLS: [f64; 3] = [1.0, 1.0, 1.0];

/// Frame-to-frame amplitude correlation of the canned scenario. Zero:
/// classic scan-to-scan independent fluctuation.
pub const SCENARIO_AMPLITUDE_CORRELATION: f64 = 0.0;

/// Canned two-vehicle scenario: ego at the origin, two cars ahead moving in
/// line along x with accelerating speed profiles. The far car starts half a
/// lane to the side and merges behind the near car mid-run, which puts it in
/// the near car's shadow from roughly frame 119 of 200.
///
/// Each car is modeled as three point scatterers sharing one truth id,
/// spread over the vehicle length with a split of the total received power.
/// The independent scatterer amplitudes give the return the amplitude
/// diversity of a real extended vehicle, while every individual scatterer
/// keeps the exponential single-scatterer intensity law. Speed profiles are
/// synthetic but plausible; only the tuning constants are fixed by the sensor.
pub fn paper_scenario() -> (SimConfig, Vec<TruthTarget>) {
    let grid = default_grid();
    let sensor = SensorModel {
        sigma_w2: 2e-6,
        psf_widths: [
            SCENARIO_PSF_WIDTH_CELLS[0] * grid.range_res,
            SCENARIO_PSF_WIDTH_CELLS[1] * grid.velocity_res,
            SCENARIO_PSF_WIDTH_CELLS[2] * grid.azimuth_res,
        ],
        illumination_radii: [
            2.0 * grid.range_res,
            2.0 * grid.velocity_res,
            2.0 * grid.azimuth_res,
        ],
        gain: GainProfile::Constant(SCENARIO_GAIN),
        grid,
    };
    let config = SimConfig {
        sensor,
        truth_jitter_pos: 0.0,
        truth_jitter_vel: 0.0,
        occlusion_attenuation: 0.25,
        amplitude_correlation: SCENARIO_AMPLITUDE_CORRELATION,
        frame_period: 0.07,
        n_frames: 200,
        seed: 2024,
    };
    // Slow column traffic: both cars creep ahead of the ego with gentle
    // accelerations; the far car merges into the near car's lane mid-run.
    let near_path = [
        Waypoint { t: 0.0, x: 22.0, y: 0.0, speed: 0.15 },
        Waypoint { t: 3.0, x: 22.45, y: 0.0, speed: 0.2 },
        Waypoint { t: 6.0, x: 23.05, y: 0.0, speed: 0.3 },
        Waypoint { t: 10.0, x: 24.25, y: 0.0, speed: 0.3 },
        Waypoint { t: 14.0, x: 25.45, y: 0.0, speed: 0.3 },
    ];
    let far_path = [
        Waypoint { t: 0.0, x: 31.5, y: 1.4, speed: 0.15 },
        Waypoint { t: 4.0, x: 32.1, y: 1.4, speed: 0.2 },
        Waypoint { t: 6.0, x: 32.5, y: 1.4, speed: 0.39 },
        Waypoint { t: 8.0, x: 33.2, y: 0.7, speed: 0.39 },
        Waypoint { t: 10.0, x: 33.9, y: 0.0, speed: 0.2 },
        Waypoint { t: 14.0, x: 34.7, y: 0.0, speed: 0.2 },
    ];
    let mut targets = Vec::new();
    targets.extend(vehicle(1, &near_path, 1.28e-4, config.n_frames));
    targets.extend(vehicle(2, &far_path, 1.2e-4, config.n_frames));
    (config, targets)
}

/// Reflection centers of one passenger car along its longitudinal axis
/// (rear bumper to front section), with the share of the total received
/// power. Spreading the centers over the vehicle body decorrelates the
/// per-cell fading across the illumination region. The extent stays
/// strictly inside the birth-exclusion and merge interaction diameter
/// (twice the doubled cell resolution), so a car can never split into two
/// uncoupled tracks no matter where on the body a track settles.
const CAR_SCATTERERS: [(f64, f64); 7] = [
    (0.0, 1.0 / 7.0),
    (0.5333333333333333, 1.0 / 7.0),
    (1.0666666666666667, 1.0 / 7.0),
    (1.6, 1.0 / 7.0),
    (2.1333333333333333, 1.0 / 7.0),
    (2.6666666666666665, 1.0 / 7.0),
    (3.2, 1.0 / 7.0),
];

fn vehicle(id: u32, path: &[Waypoint], total_power: f64, n_frames: usize) -> Vec<TruthTarget> {
    CAR_SCATTERERS
        .iter()
        .map(|(dx, share)| TruthTarget {
            id,
            spawn_time: 0,
            despawn_time: n_frames,
            waypoints: path
                .iter()
                .map(|w| Waypoint { x: w.x + dx, ..*w })
                .collect(),
            rcs_power: share * total_power,
            occludable: true,
        })
        .collect()
}
