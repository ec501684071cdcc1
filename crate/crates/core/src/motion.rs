//! Constant-velocity transition model with a random-walk power coefficient.
//!
//! The state transition is x_k = A x_{k-1} + v, v ~ N(0, Q), where A is block
//! diagonal over the (x, xdot) and (y, ydot) pairs plus an identity for theta,
//! and Q stems from a white random acceleration per axis plus a theta rate
//! noise. The position/velocity noise blocks are rank one (a single random
//! acceleration per axis), so sampling draws one acceleration per axis and one
//! theta increment per particle instead of factorizing the full matrix.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::rfs::{LabeledParticleTrack, State5};

pub type Mat5 = [[f64; 5]; 5];

#[derive(Debug, Clone, Copy)]
pub struct MotionParams {
    /// Frame period Δt in seconds.
    pub dt: f64,
    /// Longitudinal acceleration variance, m²/s⁴.
    pub sigma_ax2: f64,
    /// Lateral acceleration variance, m²/s⁴.
    pub sigma_ay2: f64,
    /// Theta rate variance, 1/s².
    pub sigma_theta_dot2: f64,
}

impl MotionParams {
    pub fn validate(&self) -> crate::error::Result<()> {
        if !(self.dt > 0.0) {
            return Err(crate::error::TrackingError::Config {
                field: "motion.dt".into(),
                message: format!("must be > 0, got {}", self.dt),
            });
        }
        for (name, v) in [
            ("motion.sigma_ax2", self.sigma_ax2),
            ("motion.sigma_ay2", self.sigma_ay2),
            ("motion.sigma_theta_dot2", self.sigma_theta_dot2),
        ] {
            if !(v >= 0.0) {
                return Err(crate::error::TrackingError::Config {
                    field: name.into(),
                    message: format!("must be >= 0, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// State transition matrix A = diag(Abar, Abar, 1) with Abar = [[1, Δt], [0, 1]].
pub fn transition_matrix(params: &MotionParams) -> Mat5 {
    let dt = params.dt;
    let mut a = [[0.0; 5]; 5];
    for d in 0..5 {
        a[d][d] = 1.0;
    }
    a[0][1] = dt;
    a[2][3] = dt;
    a
}

/// Process noise Q = diag(σ_ax² Qbar, σ_ay² Qbar, σ_θ̇² Δt²) with
/// Qbar = [[Δt⁴/4, Δt³/2], [Δt³/2, Δt²]].
pub fn process_noise_cov(params: &MotionParams) -> Mat5 {
    let dt = params.dt;
    let dt2 = dt * dt;
    let qbar = [[dt2 * dt2 / 4.0, dt2 * dt / 2.0], [dt2 * dt / 2.0, dt2]];
    let mut q = [[0.0; 5]; 5];
    for (block, sigma2) in [(0usize, params.sigma_ax2), (2usize, params.sigma_ay2)] {
        for i in 0..2 {
            for j in 0..2 {
                q[block + i][block + j] = sigma2 * qbar[i][j];
            }
        }
    }
    q[4][4] = params.sigma_theta_dot2 * dt2;
    q
}

/// y = M x.
pub fn apply_matrix(m: &Mat5, x: &State5) -> State5 {
    let mut y = [0.0; 5];
    for i in 0..5 {
        for j in 0..5 {
            y[i] += m[i][j] * x[j];
        }
    }
    y
}

/// C = A B.
pub fn matmul(a: &Mat5, b: &Mat5) -> Mat5 {
    let mut c = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            for k in 0..5 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

/// Propagate a single state one step, drawing the process noise from `rng`.
///
/// Theta is clamped at zero: a negative reflection power coefficient has no
/// meaning in the measurement model.
pub fn propagate_state<R: Rng>(state: &State5, params: &MotionParams, rng: &mut R) -> State5 {
    let dt = params.dt;
    let half_dt2 = 0.5 * dt * dt;
    let ax: f64 = params.sigma_ax2.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let ay: f64 = params.sigma_ay2.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let dtheta: f64 =
        params.sigma_theta_dot2.sqrt() * dt * rng.sample::<f64, _>(StandardNormal);
    [
        state[0] + dt * state[1] + half_dt2 * ax,
        state[1] + dt * ax,
        state[2] + dt * state[3] + half_dt2 * ay,
        state[3] + dt * ay,
        (state[4] + dtheta).max(0.0),
    ]
}

/// Propagate every particle of a track independently. Weights and label are
/// untouched.
pub fn propagate_particles<R: Rng>(
    track: &LabeledParticleTrack,
    params: &MotionParams,
    rng: &mut R,
) -> LabeledParticleTrack {
    let states = track
        .states
        .iter()
        .map(|s| propagate_state(s, params, rng))
        .collect();
    LabeledParticleTrack::new(track.label, states, track.weights.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfs::Label;
    use crate::rng::{stream_rng, Stream};

    fn params(dt: f64) -> MotionParams {
        MotionParams {
            dt,
            sigma_ax2: 1.0,
            sigma_ay2: 1.0,
            sigma_theta_dot2: 1e-3,
        }
    }

    #[test]
    fn transition_matrix_shapes() {
        let a0 = transition_matrix(&params(0.0));
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(a0[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
        let a1 = transition_matrix(&params(1.0));
        assert_eq!(a1[0][1], 1.0);
        assert_eq!(a1[2][3], 1.0);

        let s = apply_matrix(&transition_matrix(&params(0.07)), &[0.0, 1.0, 0.0, 0.0, 0.5]);
        assert!((s[0] - 0.07).abs() < 1e-15);
        assert_eq!(s[1], 1.0);
        assert_eq!(s[4], 0.5);
    }

    #[test]
    fn transition_semigroup_property() {
        for (d1, d2) in [(0.07, 0.13), (1.0, 2.5), (0.0, 0.4)] {
            let prod = matmul(&transition_matrix(&params(d1)), &transition_matrix(&params(d2)));
            let direct = transition_matrix(&params(d1 + d2));
            for i in 0..5 {
                for j in 0..5 {
                    assert!((prod[i][j] - direct[i][j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn process_noise_blocks() {
        let q = process_noise_cov(&params(1.0));
        assert!((q[0][0] - 0.25).abs() < 1e-15);
        assert!((q[0][1] - 0.5).abs() < 1e-15);
        assert!((q[1][0] - 0.5).abs() < 1e-15);
        assert!((q[1][1] - 1.0).abs() < 1e-15);

        let q = process_noise_cov(&MotionParams {
            dt: 0.07,
            sigma_ax2: 0.0,
            sigma_ay2: 0.0,
            sigma_theta_dot2: 1e-3,
        });
        assert!((q[4][4] - 4.9e-6).abs() < 1e-18);
    }

    #[test]
    fn process_noise_symmetric_psd_and_linear_in_variances() {
        let p = MotionParams {
            dt: 0.3,
            sigma_ax2: 2.0,
            sigma_ay2: 0.5,
            sigma_theta_dot2: 0.1,
        };
        let q = process_noise_cov(&p);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(q[i][j], q[j][i]);
            }
        }
        // Rank-one blocks: v vᵀ with v = (dt²/2, dt); PSD by construction.
        // Check quadratic form non-negativity on a few vectors.
        let probes = [
            [1.0, -0.5, 0.2, 0.1, -1.0],
            [0.0, 1.0, 0.0, -1.0, 0.5],
            [-2.0, 0.3, 1.0, 0.0, 0.0],
        ];
        for x in probes {
            let qx = apply_matrix(&q, &x);
            let form: f64 = x.iter().zip(qx).map(|(a, b)| a * b).sum();
            assert!(form >= -1e-12);
        }

        let doubled = process_noise_cov(&MotionParams {
            sigma_ax2: 2.0 * p.sigma_ax2,
            ..p
        });
        assert!((doubled[0][0] - 2.0 * q[0][0]).abs() < 1e-15);
        assert_eq!(doubled[4][4], q[4][4]);
    }

    #[test]
    fn noiseless_propagation_is_deterministic_shift() {
        let track = LabeledParticleTrack::uniform(
            Label::new(0, 0),
            vec![[10.0, 2.0, 0.0, 0.0, 0.7]],
        );
        let p = MotionParams {
            dt: 0.5,
            sigma_ax2: 0.0,
            sigma_ay2: 0.0,
            sigma_theta_dot2: 0.0,
        };
        let mut rng = stream_rng(1, Stream::Propagate, 0, 0);
        let out = propagate_particles(&track, &p, &mut rng);
        assert_eq!(out.states[0], [11.0, 2.0, 0.0, 0.0, 0.7]);
        assert_eq!(out.weights, track.weights);
        assert_eq!(out.label, track.label);
    }

    #[test]
    fn propagation_moments_match_theory_for_random_params() {
        use rand::Rng;
        use rand_distr::StandardNormal;
        for trial in 0..4u64 {
            let mut seed_rng = stream_rng(trial, Stream::Propagate, 7, 7);
            let p = MotionParams {
                dt: 0.02 + seed_rng.gen::<f64>() * 0.5,
                sigma_ax2: seed_rng.gen::<f64>() * 4.0,
                sigma_ay2: seed_rng.gen::<f64>() * 4.0,
                sigma_theta_dot2: seed_rng.gen::<f64>() * 0.01,
            };
            let a = transition_matrix(&p);
            let q = process_noise_cov(&p);
            let mu = [5.0, 1.0, -2.0, 0.4, 20.0];
            let n = 8000usize;
            let states: Vec<State5> = (0..n).map(|_| mu).collect();
            let track = LabeledParticleTrack::uniform(Label::new(0, 0), states);
            let mut rng = stream_rng(trial, Stream::Propagate, 8, 8);
            let out = propagate_particles(&track, &p, &mut rng);

            let expected = apply_matrix(&a, &mu);
            let mut emp = [0.0f64; 5];
            for s in &out.states {
                for d in 0..5 {
                    emp[d] += s[d] / n as f64;
                }
            }
            for d in 0..5 {
                let se = (q[d][d] / n as f64).sqrt().max(1e-12);
                assert!(
                    (emp[d] - expected[d]).abs() < 5.0 * se + 1e-12,
                    "trial {trial} dim {d}: {} vs {}",
                    emp[d],
                    expected[d]
                );
            }
            // Degenerate initial cloud: the empirical covariance is Q itself.
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..5 {
                for j in 0..5 {
                    let mut c = 0.0;
                    for s in &out.states {
                        c += (s[i] - emp[i]) * (s[j] - emp[j]) / n as f64;
                    }
                    num += (c - q[i][j]).powi(2);
                    den += q[i][j].powi(2);
                }
            }
            assert!((num / den).sqrt() < 0.08, "trial {trial}: cov off by {:.3}", (num / den).sqrt());
            let _ = seed_rng.sample::<f64, _>(StandardNormal);
        }
    }

    #[test]
    fn theta_is_martingale_without_rate_noise() {
        let p = MotionParams {
            dt: 0.07,
            sigma_ax2: 3.0,
            sigma_ay2: 3.0,
            sigma_theta_dot2: 0.0,
        };
        let mut rng = stream_rng(2, Stream::Propagate, 0, 0);
        let s = [5.0, 1.0, -2.0, 0.3, 0.123456];
        for _ in 0..32 {
            let out = propagate_state(&s, &p, &mut rng);
            assert_eq!(out[4], 0.123456);
        }
    }
}
