//! Adaptive labeled multi-Bernoulli birth proposal.
//!
//! Candidate tracks are spawned at cells whose intensity exceeds a threshold,
//! greedily from the strongest cell down, rejecting any cell whose
//! measurement-space ellipsoid overlaps an existing track's or an already
//! accepted candidate's. Candidate particles are drawn uniformly over the
//! originating cell's extent; theta is initialized from the observed cell
//! intensity through the expected-intensity relation and jittered.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::measurement::{
    measurement_to_state, theta_from_reflection_power, MeasPoint, RadarCube, SensorModel,
};
use crate::rfs::{Label, LabeledParticleTrack, State5};

#[derive(Debug, Clone)]
pub struct BirthParams {
    /// Intensity threshold for significant cells (power units).
    pub z_threshold: f64,
    /// Existence probability assigned to every new candidate.
    pub r_birth_init: f64,
    pub max_births_per_step: usize,
    /// Overlap ellipsoid half-axes (m, m/s, rad).
    pub ellipsoid_radii: [f64; 3],
    /// Standard deviation of the sampled tangential velocity (m/s). The radar
    /// measures no tangential component, so the prior spread is a tuning knob.
    pub tangential_vel_std: f64,
    /// Particles drawn per candidate.
    pub particles: usize,
    /// Newborn particles claiming less received power than this are culled
    /// (matching the filter's detectability survival gate); a candidate whose
    /// entire cloud falls below is dropped. 0 disables the cut.
    pub min_power: f64,
}

impl BirthParams {
    pub fn validate(&self) -> crate::error::Result<()> {
        if !(self.z_threshold > 0.0) {
            return Err(crate::error::TrackingError::Config {
                field: "birth.z_threshold".into(),
                message: format!("must be > 0, got {}", self.z_threshold),
            });
        }
        if !(self.r_birth_init > 0.0 && self.r_birth_init <= 1.0) {
            return Err(crate::error::TrackingError::Config {
                field: "birth.r_birth_init".into(),
                message: format!("must be in (0, 1], got {}", self.r_birth_init),
            });
        }
        if self.ellipsoid_radii.iter().any(|r| !(*r > 0.0)) {
            return Err(crate::error::TrackingError::Config {
                field: "birth.ellipsoid_radii".into(),
                message: "all radii must be > 0".into(),
            });
        }
        Ok(())
    }
}

/// One proposed newborn track.
#[derive(Debug, Clone)]
pub struct BirthCandidate {
    pub label: Label,
    pub r_birth: f64,
    pub track: LabeledParticleTrack,
    /// Measurement-space center of the originating cell.
    pub center: MeasPoint,
    /// Flat index of the originating cell.
    pub cell: usize,
}

/// Cells with intensity strictly above the threshold, sorted by descending
/// intensity; ties break toward the smaller flat index.
pub fn significant_cells(cube: &RadarCube, params: &BirthParams) -> Vec<usize> {
    let mut cells: Vec<usize> = cube
        .intensities
        .iter()
        .enumerate()
        .filter(|(_, z)| **z > params.z_threshold)
        .map(|(i, _)| i)
        .collect();
    cells.sort_by(|&a, &b| {
        cube.intensities[b]
            .partial_cmp(&cube.intensities[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    cells
}

/// Two equal axis-aligned ellipsoids centered at `a` and `b` intersect iff the
/// per-dimension normalized center offset against the doubled radii is < 1.
pub fn ellipsoids_overlap(a: &MeasPoint, b: &MeasPoint, radii: &[f64; 3]) -> bool {
    let mut acc = 0.0;
    for d in 0..3 {
        let t = (a[d] - b[d]) / (2.0 * radii[d]);
        acc += t * t;
    }
    acc < 1.0
}

/// Greedy non-overlapping birth proposal over the significant cells of `cube`.
///
/// `existing` holds the measurement-space centers of the surviving tracks.
/// Labels are assigned `(k, 0), (k, 1), ...` in acceptance order.
pub fn propose_births<R: Rng>(
    cube: &RadarCube,
    existing: &[MeasPoint],
    params: &BirthParams,
    sensor: &SensorModel,
    k: u32,
    rng: &mut R,
) -> Vec<BirthCandidate> {
    let mut accepted: Vec<BirthCandidate> = Vec::new();
    for cell in significant_cells(cube, params) {
        if accepted.len() >= params.max_births_per_step {
            break;
        }
        let center = cube.grid.cell_center(cube.grid.unflatten(cell));
        let overlaps_existing = existing
            .iter()
            .any(|e| ellipsoids_overlap(&center, e, &params.ellipsoid_radii));
        let overlaps_accepted = accepted
            .iter()
            .any(|c| ellipsoids_overlap(&center, &c.center, &params.ellipsoid_radii));
        if overlaps_existing || overlaps_accepted {
            continue;
        }
        let label = Label::new(k, accepted.len() as u32);
        let Some(track) = sample_birth_cloud(label, cell, &center, cube, params, sensor, rng)
        else {
            continue;
        };
        accepted.push(BirthCandidate {
            label,
            r_birth: params.r_birth_init,
            track,
            center,
            cell,
        });
    }
    accepted
}

fn sample_birth_cloud<R: Rng>(
    label: Label,
    cell: usize,
    center: &MeasPoint,
    cube: &RadarCube,
    params: &BirthParams,
    sensor: &SensorModel,
    rng: &mut R,
) -> Option<LabeledParticleTrack> {
    let res = cube.grid.resolutions();
    let z = cube.intensities[cell];
    // Solve μ_z = z for the received power at peak point-spread value.
    let sigma_rho2 = ((z - 2.0 * sensor.sigma_w2) / 2.0).max(0.0);

    // Rejection-sample from the power-truncated proposal; give up on
    // candidates whose acceptance band is too small to be a plausible target.
    let mut states: Vec<State5> = Vec::with_capacity(params.particles);
    let max_attempts = params.particles.saturating_mul(2);
    let mut attempts = 0usize;
    while states.len() < params.particles && attempts < max_attempts {
        attempts += 1;
        let mut m = [0.0; 3];
        for d in 0..3 {
            m[d] = center[d] + (rng.gen::<f64>() - 0.5) * res[d];
        }
        let v_t = params.tangential_vel_std * rng.sample::<f64, _>(StandardNormal);
        let jitter = 0.5 + rng.gen::<f64>(); // uniform in [0.5, 1.5)
        let power = sigma_rho2 * jitter;
        if power < params.min_power {
            continue;
        }
        let theta = theta_from_reflection_power(power, &m, sensor);
        states.push(measurement_to_state(&m, v_t, theta));
    }
    if states.len() < params.particles {
        // Most of the proposal band fell below the power floor: not a
        // plausible new target.
        return None;
    }
    Some(LabeledParticleTrack::uniform(label, states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{state_to_measurement, CellGrid, GainProfile};
    use crate::rng::{stream_rng, Stream};

    fn sensor() -> SensorModel {
        let grid = CellGrid {
            n_range: 32,
            n_velocity: 8,
            n_azimuth: 8,
            range_res: 1.0,
            velocity_res: 0.5,
            azimuth_res: 0.05,
            range_offset: 0.0,
            velocity_offset: -2.0,
            azimuth_offset: -0.2,
        };
        SensorModel {
            sigma_w2: 2e-6,
            psf_widths: [1.0, 0.5, 0.05],
            gain: GainProfile::Constant(1.0),
            illumination_radii: [2.0, 1.0, 0.1],
            grid,
        }
    }

    fn params() -> BirthParams {
        BirthParams {
            z_threshold: 1e-5,
            r_birth_init: 0.3,
            max_births_per_step: 10,
            ellipsoid_radii: [2.0, 1.0, 0.1],
            tangential_vel_std: 1.0,
            particles: 200,
            min_power: 0.0,
        }
    }

    #[test]
    fn significant_cells_sorted_and_thresholded() {
        let s = sensor();
        let mut cube = RadarCube::zeros(s.grid.clone(), 0.0);
        assert!(significant_cells(&cube, &params()).is_empty());

        cube.intensities[100] = 2e-5;
        assert_eq!(significant_cells(&cube, &params()), vec![100]);

        cube.intensities[40] = 3e-5;
        cube.intensities[7] = 2e-5; // tie with cell 100 → smaller index first
        assert_eq!(significant_cells(&cube, &params()), vec![40, 7, 100]);
    }

    #[test]
    fn ellipsoid_overlap_cases() {
        let radii = [2.0, 1.0, 0.1];
        let a = [10.0, 0.0, 0.0];
        assert!(ellipsoids_overlap(&a, &a, &radii));
        // Offset of exactly the doubled radius in one dimension: boundary,
        // counts as non-overlapping.
        assert!(!ellipsoids_overlap(&a, &[14.0, 0.0, 0.0], &radii));
        // Offset (radius, radius, 0): 0.25 + 0.25 = 0.5 < 1.
        assert!(ellipsoids_overlap(&a, &[12.0, 1.0, 0.0], &radii));
    }

    #[test]
    fn propose_births_rejects_overlaps_and_caps() {
        let s = sensor();
        let p = params();
        let mut cube = RadarCube::zeros(s.grid.clone(), 0.0);
        let near = s.grid.flat_index(5, 4, 4);
        let far = s.grid.flat_index(25, 4, 4);
        cube.intensities[near] = 5e-5;
        cube.intensities[far] = 4e-5;

        // No existing tracks: both accepted, strongest first.
        let mut rng = stream_rng(1, Stream::Birth, 0, 0);
        let births = propose_births(&cube, &[], &p, &s, 3, &mut rng);
        assert_eq!(births.len(), 2);
        assert_eq!(births[0].cell, near);
        assert_eq!(births[1].cell, far);
        assert!((births[0].r_birth - 0.3).abs() < 1e-15);
        assert_eq!(births[0].label, Label::new(3, 0));
        assert_eq!(births[1].label, Label::new(3, 1));

        // An existing track on the near cell suppresses that candidate.
        let existing = [s.grid.cell_center(s.grid.unflatten(near))];
        let mut rng = stream_rng(1, Stream::Birth, 0, 0);
        let births = propose_births(&cube, &existing, &p, &s, 3, &mut rng);
        assert_eq!(births.len(), 1);
        assert_eq!(births[0].cell, far);

        // Pairwise non-overlap of accepted candidates holds by construction.
        let mut rng = stream_rng(1, Stream::Birth, 0, 0);
        let births = propose_births(&cube, &[], &p, &s, 3, &mut rng);
        for i in 0..births.len() {
            for j in 0..i {
                assert!(!ellipsoids_overlap(
                    &births[i].center,
                    &births[j].center,
                    &p.ellipsoid_radii
                ));
            }
        }
    }

    #[test]
    fn respects_max_births_cap() {
        let s = sensor();
        let p = BirthParams {
            max_births_per_step: 1,
            ..params()
        };
        let mut cube = RadarCube::zeros(s.grid.clone(), 0.0);
        cube.intensities[s.grid.flat_index(5, 4, 4)] = 5e-5;
        cube.intensities[s.grid.flat_index(25, 4, 4)] = 4e-5;
        let mut rng = stream_rng(9, Stream::Birth, 0, 0);
        let births = propose_births(&cube, &[], &p, &s, 0, &mut rng);
        assert_eq!(births.len(), 1);
        assert_eq!(births[0].cell, s.grid.flat_index(5, 4, 4), "strongest first");
    }

    #[test]
    fn power_floor_drops_implausible_candidates() {
        let s = sensor();
        let p = BirthParams {
            min_power: 1e-4, // far above anything a threshold cell implies
            ..params()
        };
        let mut cube = RadarCube::zeros(s.grid.clone(), 0.0);
        cube.intensities[s.grid.flat_index(5, 4, 4)] = 2e-5;
        let mut rng = stream_rng(9, Stream::Birth, 0, 0);
        assert!(propose_births(&cube, &[], &p, &s, 0, &mut rng).is_empty());
    }

    #[test]
    fn adjacent_cells_collapse_to_one_candidate() {
        let s = sensor();
        let p = params();
        let mut cube = RadarCube::zeros(s.grid.clone(), 0.0);
        cube.intensities[s.grid.flat_index(10, 4, 4)] = 9e-5;
        cube.intensities[s.grid.flat_index(11, 4, 4)] = 8e-5;
        cube.intensities[s.grid.flat_index(10, 5, 4)] = 7e-5;
        let mut rng = stream_rng(2, Stream::Birth, 0, 0);
        let births = propose_births(&cube, &[], &p, &s, 1, &mut rng);
        assert_eq!(births.len(), 1);
        assert_eq!(births[0].cell, s.grid.flat_index(10, 4, 4));
    }

    #[test]
    fn candidate_particles_stay_in_cell_extent() {
        let s = sensor();
        let p = params();
        let mut cube = RadarCube::zeros(s.grid.clone(), 0.0);
        let cell = s.grid.flat_index(12, 3, 5);
        cube.intensities[cell] = 6e-5;
        let mut rng = stream_rng(7, Stream::Birth, 0, 0);
        let births = propose_births(&cube, &[], &p, &s, 2, &mut rng);
        assert_eq!(births.len(), 1);
        let b = &births[0];
        assert_eq!(b.track.len(), p.particles);
        assert!((b.track.weight_sum() - 1.0).abs() < 1e-9);
        let res = s.grid.resolutions();
        for st in &b.track.states {
            assert!(st[4] >= 0.0);
            let m = state_to_measurement(st).unwrap();
            for d in 0..3 {
                assert!(
                    (m[d] - b.center[d]).abs() <= 0.5 * res[d] + 1e-9,
                    "dim {d}: {} vs center {}",
                    m[d],
                    b.center[d]
                );
            }
        }
    }

    #[test]
    fn proposal_is_deterministic_for_fixed_seed() {
        let s = sensor();
        let p = params();
        let mut cube = RadarCube::zeros(s.grid.clone(), 0.0);
        cube.intensities[s.grid.flat_index(9, 2, 2)] = 5e-5;
        let mut r1 = stream_rng(11, Stream::Birth, 5, 0);
        let mut r2 = stream_rng(11, Stream::Birth, 5, 0);
        let a = propose_births(&cube, &[], &p, &s, 5, &mut r1);
        let b = propose_births(&cube, &[], &p, &s, 5, &mut r2);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.track.states, y.track.states);
        }
    }
}
