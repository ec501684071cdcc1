//! Radar cube data model and the separable Swerling-1 likelihood.
//!
//! A cube discretizes the measurement space over (range, radial velocity,
//! azimuth). A target influences the cells inside its illumination ellipsoid
//! through a separable Gaussian point-spread profile, peak-normalized at the
//! target's measurement-space point; the per-cell likelihood ratio follows the
//! Swerling-1 squared-modulus model. Everything on the per-particle path is
//! computed in log space.

use crate::error::{Result, TrackingError};
use crate::rfs::State5;

/// Measurement-space point: [range m, radial velocity m/s, azimuth rad].
pub type MeasPoint = [f64; 3];

/// Cell grid geometry. Dimension order is always (range, velocity, azimuth).
///
/// Cell `i` along a dimension covers `offset + i*res .. offset + (i+1)*res`
/// with its center at `offset + (i + 0.5)*res`. The flat stacking order is
/// range-major, then velocity, then azimuth:
/// `flat = (i_range * n_velocity + i_velocity) * n_azimuth + i_azimuth`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    pub n_range: usize,
    pub n_velocity: usize,
    pub n_azimuth: usize,
    pub range_res: f64,
    pub velocity_res: f64,
    pub azimuth_res: f64,
    pub range_offset: f64,
    pub velocity_offset: f64,
    pub azimuth_offset: f64,
}

impl CellGrid {
    pub fn cell_count(&self) -> usize {
        self.n_range * self.n_velocity * self.n_azimuth
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.n_range, self.n_velocity, self.n_azimuth]
    }

    pub fn resolutions(&self) -> [f64; 3] {
        [self.range_res, self.velocity_res, self.azimuth_res]
    }

    pub fn offsets(&self) -> [f64; 3] {
        [self.range_offset, self.velocity_offset, self.azimuth_offset]
    }

    #[inline]
    pub fn flat_index(&self, ir: usize, iv: usize, ia: usize) -> usize {
        (ir * self.n_velocity + iv) * self.n_azimuth + ia
    }

    #[inline]
    pub fn unflatten(&self, flat: usize) -> [usize; 3] {
        let ia = flat % self.n_azimuth;
        let rest = flat / self.n_azimuth;
        let iv = rest % self.n_velocity;
        let ir = rest / self.n_velocity;
        [ir, iv, ia]
    }

    /// Center of a cell in measurement units.
    pub fn cell_center(&self, idx: [usize; 3]) -> MeasPoint {
        [
            self.range_offset + (idx[0] as f64 + 0.5) * self.range_res,
            self.velocity_offset + (idx[1] as f64 + 0.5) * self.velocity_res,
            self.azimuth_offset + (idx[2] as f64 + 0.5) * self.azimuth_res,
        ]
    }

    /// True when the point lies inside the gridded measurement volume.
    pub fn contains(&self, m: &MeasPoint) -> bool {
        let dims = self.dims();
        let res = self.resolutions();
        let off = self.offsets();
        (0..3).all(|d| m[d] >= off[d] && m[d] < off[d] + dims[d] as f64 * res[d])
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sensor.range_res", self.range_res),
            ("sensor.velocity_res", self.velocity_res),
            ("sensor.azimuth_res", self.azimuth_res),
        ] {
            if !(v > 0.0) {
                return Err(TrackingError::Config {
                    field: name.into(),
                    message: format!("resolution must be > 0, got {v}"),
                });
            }
        }
        if self.cell_count() == 0 {
            return Err(TrackingError::Config {
                field: "sensor.n_range".into(),
                message: "grid has zero cells".into(),
            });
        }
        Ok(())
    }
}

/// One frame of intensity data over a grid.
#[derive(Debug, Clone)]
pub struct RadarCube {
    pub grid: CellGrid,
    /// Squared-modulus power per cell in the pinned stacking order.
    pub intensities: Vec<f64>,
    /// Acquisition time in seconds.
    pub timestamp: f64,
}

impl RadarCube {
    pub fn zeros(grid: CellGrid, timestamp: f64) -> Self {
        let n = grid.cell_count();
        Self {
            grid,
            intensities: vec![0.0; n],
            timestamp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.intensities.len() != self.grid.cell_count() {
            return Err(TrackingError::CubeFormat(format!(
                "intensity vector length {} does not match grid cell count {}",
                self.intensities.len(),
                self.grid.cell_count()
            )));
        }
        if self.intensities.iter().any(|z| !(*z >= 0.0)) {
            return Err(TrackingError::CubeFormat(
                "negative or NaN intensity".into(),
            ));
        }
        Ok(())
    }
}

/// Antenna gain over azimuth.
#[derive(Debug, Clone, PartialEq)]
pub enum GainProfile {
    Constant(f64),
    /// Piecewise-linear (azimuth rad, gain) table, sorted by azimuth.
    /// Clamped to the end values outside the table.
    PiecewiseLinear(Vec<(f64, f64)>),
}

impl GainProfile {
    pub fn value(&self, azimuth: f64) -> f64 {
        match self {
            GainProfile::Constant(g) => *g,
            GainProfile::PiecewiseLinear(table) => {
                if table.is_empty() {
                    return 0.0;
                }
                if azimuth <= table[0].0 {
                    return table[0].1;
                }
                let last = table[table.len() - 1];
                if azimuth >= last.0 {
                    return last.1;
                }
                for w in table.windows(2) {
                    let (a0, g0) = w[0];
                    let (a1, g1) = w[1];
                    if azimuth <= a1 {
                        let t = (azimuth - a0) / (a1 - a0);
                        return g0 + t * (g1 - g0);
                    }
                }
                last.1
            }
        }
    }
}

/// Sensor description: grid geometry, noise floor, point-spread widths,
/// antenna gain and the illumination ellipsoid half-axes.
#[derive(Debug, Clone)]
pub struct SensorModel {
    pub grid: CellGrid,
    /// Noise variance per complex component (power units).
    pub sigma_w2: f64,
    /// Point-spread standard widths per dimension (m, m/s, rad).
    pub psf_widths: [f64; 3],
    pub gain: GainProfile,
    /// Illumination ellipsoid half-axes per dimension (m, m/s, rad).
    pub illumination_radii: [f64; 3],
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.sigma_w2 > 0.0) {
            return Err(TrackingError::Config {
                field: "sensor.sigma_w2".into(),
                message: format!("must be > 0, got {}", self.sigma_w2),
            });
        }
        for (name, v) in [
            ("sensor.psf_widths", self.psf_widths),
            ("sensor.illumination_radii", self.illumination_radii),
        ] {
            if v.iter().any(|x| !(*x > 0.0)) {
                return Err(TrackingError::Config {
                    field: name.into(),
                    message: "all entries must be > 0".into(),
                });
            }
        }
        Ok(())
    }
}

/// Map a state into measurement space: r = √(x²+y²), v_r = (x ẋ + y ẏ)/r,
/// φ = atan2(y, x). Sensor frame with x forward.
pub fn state_to_measurement(state: &State5) -> Result<MeasPoint> {
    let (x, y) = (state[0], state[2]);
    let r = x.hypot(y);
    if r == 0.0 {
        return Err(TrackingError::SingularGeometry);
    }
    let vr = (x * state[1] + y * state[3]) / r;
    Ok([r, vr, y.atan2(x)])
}

/// Inverse of `state_to_measurement` given a tangential velocity component.
/// Radial unit vector is (cos φ, sin φ); tangential is (−sin φ, cos φ).
pub fn measurement_to_state(m: &MeasPoint, v_tangential: f64, theta: f64) -> State5 {
    let (sin_a, cos_a) = m[2].sin_cos();
    [
        m[0] * cos_a,
        m[1] * cos_a - v_tangential * sin_a,
        m[0] * sin_a,
        m[1] * sin_a + v_tangential * cos_a,
        theta,
    ]
}

/// Squared normalized ellipsoid distance between a point and a cell center.
#[inline]
fn ellipsoid_dist2(m: &MeasPoint, c: &MeasPoint, radii: &[f64; 3]) -> f64 {
    let mut acc = 0.0;
    for d in 0..3 {
        let t = (c[d] - m[d]) / radii[d];
        acc += t * t;
    }
    acc
}

/// All grid cells whose centers fall inside the illumination ellipsoid around
/// the state's measurement-space point, as ascending flat indices.
pub fn illumination_region(state: &State5, sensor: &SensorModel) -> Vec<usize> {
    match state_to_measurement(state) {
        Ok(m) => illumination_region_of_point(&m, sensor),
        Err(_) => Vec::new(),
    }
}

/// Region lookup for an already-mapped measurement point.
pub fn illumination_region_of_point(m: &MeasPoint, sensor: &SensorModel) -> Vec<usize> {
    let grid = &sensor.grid;
    let radii = &sensor.illumination_radii;
    let res = grid.resolutions();
    let off = grid.offsets();
    let dims = grid.dims();

    // Candidate index window per dimension, clipped to the grid.
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for d in 0..3 {
        let fmin = (m[d] - radii[d] - off[d]) / res[d] - 0.5;
        let fmax = (m[d] + radii[d] - off[d]) / res[d] - 0.5;
        if fmax < 0.0 || fmin > dims[d] as f64 - 1.0 {
            return Vec::new();
        }
        lo[d] = fmin.ceil().max(0.0) as usize;
        hi[d] = (fmax.floor() as usize).min(dims[d] - 1);
        if lo[d] > hi[d] {
            return Vec::new();
        }
    }

    let mut cells = Vec::with_capacity(33);
    for ir in lo[0]..=hi[0] {
        let cr = off[0] + (ir as f64 + 0.5) * res[0];
        let tr = (cr - m[0]) / radii[0];
        let dr2 = tr * tr;
        if dr2 > 1.0 {
            continue;
        }
        for iv in lo[1]..=hi[1] {
            let cv = off[1] + (iv as f64 + 0.5) * res[1];
            let tv = (cv - m[1]) / radii[1];
            let drv2 = dr2 + tv * tv;
            if drv2 > 1.0 {
                continue;
            }
            for ia in lo[2]..=hi[2] {
                let ca = off[2] + (ia as f64 + 0.5) * res[2];
                let ta = (ca - m[2]) / radii[2];
                if drv2 + ta * ta <= 1.0 {
                    cells.push(grid.flat_index(ir, iv, ia));
                }
            }
        }
    }
    cells
}

/// Point-spread value |h| in a cell for a target state: the product of
/// per-dimension Gaussian profiles, truncated to zero outside the state's
/// illumination region. Peak value is 1 at the target's measurement point.
pub fn psf_value(state: &State5, cell_flat: usize, sensor: &SensorModel) -> f64 {
    let m = match state_to_measurement(state) {
        Ok(m) => m,
        Err(_) => return 0.0,
    };
    let c = sensor.grid.cell_center(sensor.grid.unflatten(cell_flat));
    if ellipsoid_dist2(&m, &c, &sensor.illumination_radii) > 1.0 {
        return 0.0;
    }
    psf_unclipped(&m, &c, &sensor.psf_widths)
}

#[inline]
fn psf_unclipped(m: &MeasPoint, c: &MeasPoint, widths: &[f64; 3]) -> f64 {
    let mut q = 0.0;
    for d in 0..3 {
        let t = (c[d] - m[d]) / widths[d];
        q += t * t;
    }
    (-0.5 * q).exp()
}

/// Per-target received power σ_ρ² recovered from the state's theta via
/// σ_ρ² = θ r⁴ / G(φ)².
pub fn reflection_power(state: &State5, sensor: &SensorModel) -> Result<f64> {
    let m = state_to_measurement(state)?;
    reflection_power_at(state[4], &m, sensor)
}

/// Same, for an already-mapped measurement point.
#[inline]
pub fn reflection_power_at(theta: f64, m: &MeasPoint, sensor: &SensorModel) -> Result<f64> {
    let g = sensor.gain.value(m[2]);
    if g <= 0.0 {
        return Err(TrackingError::OutOfBeam { azimuth_rad: m[2] });
    }
    let r2 = m[0] * m[0];
    Ok(theta * r2 * r2 / (g * g))
}

/// Forward direction of the theta correspondence: θ = σ_ρ² G(φ)² / r⁴.
pub fn theta_from_reflection_power(sigma_rho2: f64, m: &MeasPoint, sensor: &SensorModel) -> f64 {
    let g = sensor.gain.value(m[2]);
    let r2 = m[0] * m[0];
    sigma_rho2 * g * g / (r2 * r2)
}

/// Swerling-1 likelihood ratio for one cell:
/// ℓ = 1/(1+ς) · exp(z ς / μ_z) with ς = (σ_ρ²/σ_w²)|h|² and
/// μ_z = 2σ_w² + 2σ_ρ²|h|².
///
/// The direct product form keeps the z = 0 and |h| = 0 identities exact.
pub fn likelihood_ratio(z: f64, sigma_rho2: f64, psf: f64, sigma_w2: f64) -> f64 {
    let varsigma = sigma_rho2 * psf * psf / sigma_w2;
    if varsigma == 0.0 {
        return 1.0;
    }
    let mu_z = 2.0 * sigma_w2 * (1.0 + varsigma);
    (1.0 / (1.0 + varsigma)) * (z * varsigma / mu_z).exp()
}

/// log ℓ for the hot path; finite even when the linear form would overflow.
#[inline]
pub fn log_likelihood_ratio(z: f64, sigma_rho2: f64, psf2: f64, sigma_w2: f64) -> f64 {
    let varsigma = sigma_rho2 * psf2 / sigma_w2;
    if varsigma == 0.0 {
        return 0.0;
    }
    let mu_z = 2.0 * sigma_w2 * (1.0 + varsigma);
    z * varsigma / mu_z - varsigma.ln_1p()
}

/// Expected cell intensity μ_z for a target with received power σ_ρ² seen
/// through point-spread value |h|.
pub fn expected_intensity(sigma_rho2: f64, psf: f64, sigma_w2: f64) -> f64 {
    2.0 * sigma_w2 + 2.0 * sigma_rho2 * psf * psf
}

/// log ψ_z(x̃): the log pseudo-likelihood of one state against a cube, i.e.
/// Σ log ℓ over the state's illumination region. Zero for an empty region.
pub fn target_pseudolikelihood(state: &State5, cube: &RadarCube, sensor: &SensorModel) -> f64 {
    let m = match state_to_measurement(state) {
        Ok(m) => m,
        Err(_) => return 0.0,
    };
    let sigma_rho2 = match reflection_power_at(state[4], &m, sensor) {
        Ok(p) => p,
        // Outside the beam the target influences nothing.
        Err(_) => return 0.0,
    };
    if sigma_rho2 == 0.0 {
        return 0.0;
    }
    log_pseudolikelihood_at(&m, sigma_rho2, cube, sensor)
}

/// Inner pseudo-likelihood loop over the illumination region of `m`.
pub(crate) fn log_pseudolikelihood_at(
    m: &MeasPoint,
    sigma_rho2: f64,
    cube: &RadarCube,
    sensor: &SensorModel,
) -> f64 {
    let grid = &sensor.grid;
    let radii = &sensor.illumination_radii;
    let widths = &sensor.psf_widths;
    let res = grid.resolutions();
    let off = grid.offsets();
    let dims = grid.dims();
    let sigma_w2 = sensor.sigma_w2;

    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for d in 0..3 {
        let fmin = (m[d] - radii[d] - off[d]) / res[d] - 0.5;
        let fmax = (m[d] + radii[d] - off[d]) / res[d] - 0.5;
        if fmax < 0.0 || fmin > dims[d] as f64 - 1.0 {
            return 0.0;
        }
        lo[d] = fmin.ceil().max(0.0) as usize;
        hi[d] = (fmax.floor() as usize).min(dims[d] - 1);
        if lo[d] > hi[d] {
            return 0.0;
        }
    }

    let mut log_psi = 0.0;
    for ir in lo[0]..=hi[0] {
        let cr = off[0] + (ir as f64 + 0.5) * res[0];
        let er = (cr - m[0]) / radii[0];
        let er2 = er * er;
        if er2 > 1.0 {
            continue;
        }
        let wr = (cr - m[0]) / widths[0];
        let qr = wr * wr;
        for iv in lo[1]..=hi[1] {
            let cv = off[1] + (iv as f64 + 0.5) * res[1];
            let ev = (cv - m[1]) / radii[1];
            let erv2 = er2 + ev * ev;
            if erv2 > 1.0 {
                continue;
            }
            let wv = (cv - m[1]) / widths[1];
            let qrv = qr + wv * wv;
            let row = (ir * dims[1] + iv) * dims[2];
            for ia in lo[2]..=hi[2] {
                let ca = off[2] + (ia as f64 + 0.5) * res[2];
                let ea = (ca - m[2]) / radii[2];
                if erv2 + ea * ea > 1.0 {
                    continue;
                }
                let wa = (ca - m[2]) / widths[2];
                let psf2 = (-(qrv + wa * wa)).exp();
                let z = cube.intensities[row + ia];
                log_psi += log_likelihood_ratio(z, sigma_rho2, psf2, sigma_w2);
            }
        }
    }
    log_psi
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    pub(crate) fn test_sensor() -> SensorModel {
        let grid = CellGrid {
            n_range: 16,
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

    #[test]
    fn state_to_measurement_cases() {
        let m = state_to_measurement(&[10.0, -2.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((m[0] - 10.0).abs() < 1e-12);
        assert!((m[1] + 2.0).abs() < 1e-12);
        assert!(m[2].abs() < 1e-12);

        let m = state_to_measurement(&[0.0, 0.0, 5.0, 3.0, 0.0]).unwrap();
        assert!((m[0] - 5.0).abs() < 1e-12);
        assert!((m[1] - 3.0).abs() < 1e-12);
        assert!((m[2] - FRAC_PI_2).abs() < 1e-12);

        let m = state_to_measurement(&[3.0, 1.0, 4.0, 2.0, 0.0]).unwrap();
        assert!((m[0] - 5.0).abs() < 1e-12);
        assert!((m[1] - 2.2).abs() < 1e-12);
        assert!((m[2] - 0.9272952180016122).abs() < 1e-12);

        assert!(matches!(
            state_to_measurement(&[0.0, 1.0, 0.0, 1.0, 0.0]),
            Err(TrackingError::SingularGeometry)
        ));
    }

    #[test]
    fn measurement_round_trip() {
        let s = [3.0, 1.0, 4.0, 2.0, 0.7];
        let m = state_to_measurement(&s).unwrap();
        // v_t = (-sin φ, cos φ)·(ẋ, ẏ)
        let vt = -m[2].sin() * s[1] + m[2].cos() * s[3];
        let back = measurement_to_state(&m, vt, s[4]);
        for d in 0..5 {
            assert!((back[d] - s[d]).abs() < 1e-12, "dim {d}");
        }
    }

    #[test]
    fn psf_peak_offset_and_truncation() {
        let sensor = test_sensor();
        // Cell (5, 4, 4) center: (5.5, 0.25, 0.025).
        let center = sensor.grid.cell_center([5, 4, 4]);
        let state = measurement_to_state(&center, 0.0, 0.1);
        let flat = sensor.grid.flat_index(5, 4, 4);
        assert!((psf_value(&state, flat, &sensor) - 1.0).abs() < 1e-12);

        // One range-width offset: exp(-1/2).
        let off = [center[0] + 1.0, center[1], center[2]];
        let state_off = measurement_to_state(&off, 0.0, 0.1);
        assert!((psf_value(&state_off, flat, &sensor) - (-0.5f64).exp()).abs() < 1e-12);

        // Outside the illumination ellipsoid: exactly zero.
        let far = [center[0] + 3.0, center[1], center[2]];
        let state_far = measurement_to_state(&far, 0.0, 0.1);
        assert_eq!(psf_value(&state_far, flat, &sensor), 0.0);
    }

    #[test]
    fn illumination_region_central_count_and_bounds() {
        let sensor = test_sensor();
        let center = sensor.grid.cell_center([8, 4, 4]);
        let state = measurement_to_state(&center, 0.0, 0.1);
        let region = illumination_region(&state, &sensor);
        // Integer offsets with (a/2)² + (b/2)² + (c/2)² <= 1.
        assert_eq!(region.len(), 33);
        let n = sensor.grid.cell_count();
        assert!(region.iter().all(|&c| c < n));

        // Far outside the field of view: empty.
        let out = measurement_to_state(&[500.0, 0.0, 0.0], 0.0, 0.1);
        assert!(illumination_region(&out, &sensor).is_empty());
    }

    #[test]
    fn illumination_region_matches_brute_force() {
        let sensor = test_sensor();
        let m = [7.3, 0.4, -0.02];
        let state = measurement_to_state(&m, 0.3, 0.1);
        let fast = illumination_region(&state, &sensor);
        let mut brute = Vec::new();
        for flat in 0..sensor.grid.cell_count() {
            let c = sensor.grid.cell_center(sensor.grid.unflatten(flat));
            if ellipsoid_dist2(&m, &c, &sensor.illumination_radii) <= 1.0 {
                brute.push(flat);
            }
        }
        assert_eq!(fast, brute);
    }

    #[test]
    fn reflection_power_cases() {
        let sensor = test_sensor();
        let state = measurement_to_state(&[1.0, 0.0, 0.0], 0.0, 1.0);
        assert!((reflection_power(&state, &sensor).unwrap() - 1.0).abs() < 1e-12);

        let s10 = measurement_to_state(&[10.0, 0.0, 0.0], 0.0, 2e-6);
        assert!((reflection_power(&s10, &sensor).unwrap() - 0.02).abs() < 1e-14);

        // Quartic range law.
        let s20 = measurement_to_state(&[20.0, 0.0, 0.0], 0.0, 2e-6);
        let ratio = reflection_power(&s20, &sensor).unwrap() / 0.02;
        assert!((ratio - 16.0).abs() < 1e-9);

        let dead_gain = SensorModel {
            gain: GainProfile::Constant(0.0),
            ..test_sensor()
        };
        assert!(matches!(
            reflection_power(&s10, &dead_gain),
            Err(TrackingError::OutOfBeam { .. })
        ));
    }

    #[test]
    fn theta_round_trip_is_identity() {
        let sensor = test_sensor();
        for (sigma_rho2, r) in [(1e-5, 3.0), (4.2e-4, 11.5), (7.0, 60.0)] {
            let m = [r, 0.5, 0.04];
            let theta = theta_from_reflection_power(sigma_rho2, &m, &sensor);
            let back = reflection_power_at(theta, &m, &sensor).unwrap();
            assert!((back - sigma_rho2).abs() <= 1e-12 * sigma_rho2.max(1.0));
        }
    }

    #[test]
    fn likelihood_ratio_identities() {
        // |h| = 0 forces both factors to one, for any z.
        assert_eq!(likelihood_ratio(3.4e-5, 1.0, 0.0, 2e-6), 1.0);
        // z = 0 leaves 1/(1+ς) exactly.
        let sigma_w2 = 2e-6;
        let sigma_rho2 = 3.0 * sigma_w2; // ς = 3
        assert_eq!(likelihood_ratio(0.0, sigma_rho2, 1.0, sigma_w2), 0.25);
        // Worked value: ς = 1, μ_z = 8e-6, z = 8e-6 → e/2.
        let l = likelihood_ratio(8e-6, 2e-6, 1.0, 2e-6);
        let expected = 0.5 * std::f64::consts::E;
        assert!(((l - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn likelihood_ratio_monotone_in_z() {
        let mut prev = 0.0;
        for i in 0..50 {
            let z = i as f64 * 1e-6;
            let l = likelihood_ratio(z, 4e-6, 0.8, 2e-6);
            assert!(l > prev);
            prev = l;
        }
    }

    #[test]
    fn log_and_linear_likelihood_agree() {
        for (z, s, h) in [(0.0, 1e-6, 0.5), (8e-6, 2e-6, 1.0), (5e-5, 1e-5, 0.3)] {
            let lin = likelihood_ratio(z, s, h, 2e-6).ln();
            let log = log_likelihood_ratio(z, s, h * h, 2e-6);
            assert!((lin - log).abs() < 1e-12);
        }
    }

    #[test]
    fn pseudolikelihood_empty_region_and_single_cell() {
        let sensor = test_sensor();
        let mut cube = RadarCube::zeros(sensor.grid.clone(), 0.0);
        cube.intensities.iter_mut().for_each(|z| *z = 1e-5);

        // Outside the field of view: ψ = 1.
        let out = measurement_to_state(&[500.0, 0.0, 0.0], 0.0, 0.1);
        assert_eq!(target_pseudolikelihood(&out, &cube, &sensor), 0.0);

        // Theta zero: uninformative everywhere.
        let center = sensor.grid.cell_center([8, 4, 4]);
        let dead = measurement_to_state(&center, 0.0, 0.0);
        assert_eq!(target_pseudolikelihood(&dead, &cube, &sensor), 0.0);

        // Shrunk radii catch exactly the peak cell.
        let tight = SensorModel {
            illumination_radii: [0.4, 0.2, 0.02],
            ..test_sensor()
        };
        let state = measurement_to_state(&center, 0.0, 0.1);
        let flat = sensor.grid.flat_index(8, 4, 4);
        let sigma_rho2 = reflection_power(&state, &tight).unwrap();
        let expected =
            log_likelihood_ratio(cube.intensities[flat], sigma_rho2, 1.0, tight.sigma_w2);
        let got = target_pseudolikelihood(&state, &cube, &tight);
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn pseudolikelihood_matches_per_cell_product() {
        let sensor = test_sensor();
        let mut cube = RadarCube::zeros(sensor.grid.clone(), 0.0);
        for (i, z) in cube.intensities.iter_mut().enumerate() {
            *z = 1e-6 + (i % 17) as f64 * 3e-6;
        }
        let m = [8.2, 0.3, 0.01];
        let state = measurement_to_state(&m, 0.2, 0.05);
        let sigma_rho2 = reflection_power(&state, &sensor).unwrap();

        let mut brute = 0.0;
        for &flat in &illumination_region(&state, &sensor) {
            let h = psf_value(&state, flat, &sensor);
            brute += likelihood_ratio(cube.intensities[flat], sigma_rho2, h, sensor.sigma_w2).ln();
        }
        let fast = target_pseudolikelihood(&state, &cube, &sensor);
        assert!((fast - brute).abs() < 1e-10);
    }

    #[test]
    fn cells_outside_region_do_not_matter() {
        // ℓ = 1 identically for psf 0, so extending the product is a no-op.
        let sensor = test_sensor();
        let center = sensor.grid.cell_center([8, 4, 4]);
        let state = measurement_to_state(&center, 0.0, 0.1);
        let region: std::collections::BTreeSet<usize> =
            illumination_region(&state, &sensor).into_iter().collect();
        for flat in 0..sensor.grid.cell_count() {
            if !region.contains(&flat) {
                assert_eq!(psf_value(&state, flat, &sensor), 0.0);
                assert_eq!(likelihood_ratio(9e-5, 1.0, 0.0, sensor.sigma_w2), 1.0);
            }
        }
    }

    #[test]
    fn gain_profile_interpolation() {
        let g = GainProfile::PiecewiseLinear(vec![(-0.2, 1.0), (0.0, 3.0), (0.2, 1.0)]);
        assert!((g.value(-0.1) - 2.0).abs() < 1e-12);
        assert!((g.value(0.0) - 3.0).abs() < 1e-12);
        assert!((g.value(0.5) - 1.0).abs() < 1e-12);
        assert!((g.value(-0.5) - 1.0).abs() < 1e-12);
    }
}
