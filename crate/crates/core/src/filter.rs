//! Joint prediction-update recursion on the multi-hypothesis posterior.
//!
//! Each step takes the previous posterior directly to the current one: for
//! every retained parent hypothesis the per-label survival and pseudo-
//! likelihood factors are combined over candidate label sets, overlapping
//! tracks are coupled through an either-or rule, the label-set space is
//! truncated (exact enumeration when small, Gibbs sampling otherwise), and the
//! surviving tracks' particle clouds are reweighted against the cube.
//!
//! Because the update carries no per-hypothesis measurement assignment, every
//! hypothesis sharing a label also shares its posterior track distribution;
//! children with equal label sets are therefore pooled by weight addition.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::birth::{ellipsoids_overlap, propose_births, BirthCandidate, BirthParams};
use crate::error::{Result, TrackingError};
use crate::measurement::{state_to_measurement, MeasPoint, RadarCube, SensorModel};
use crate::motion::{propagate_particles, MotionParams};
use crate::numeric::{effective_sample_size, logsumexp};
use crate::resample::systematic_indices;
use crate::rfs::{GlmbDensity, Hypothesis, Label, LabeledParticleTrack, State5};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone)]
pub struct FilterParams {
    /// Prior probability that an existing target persists one step.
    pub p_survival: f64,
    /// Posterior hypothesis cap per step.
    pub max_hypotheses: usize,
    pub particles_per_track: usize,
    /// Full Gibbs sweeps per truncation call (one sweep flips every label).
    pub gibbs_sweeps: usize,
    /// Label-set spaces with at most this many labels are enumerated exactly
    /// instead of sampled; 0 forces Gibbs sampling everywhere.
    pub enumeration_max_labels: usize,
    /// Hard floor on the received power a persisting track can claim.
    /// Particles below it (or outside the field of view) get zero survival
    /// probability, so tracks whose power collapses below detectability
    /// leave the tracked population instead of lingering as unfalsifiable
    /// ghosts. 0 disables the gate (constant survival everywhere).
    pub min_track_power: f64,
    /// Received power at which a track earns the full survival probability.
    /// Between the hard floor and this level survival ramps up linearly;
    /// sub-threshold ghosts are progressively starved while confidently
    /// detectable tracks keep the configured constant survival.
    pub soft_track_power: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            p_survival: 0.99,
            max_hypotheses: 200,
            particles_per_track: 15_000,
            gibbs_sweeps: 10,
            enumeration_max_labels: 10,
            min_track_power: 1e-5,
            soft_track_power: 4e-5,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_survival > 0.0 && self.p_survival <= 1.0) {
            return Err(TrackingError::Config {
                field: "filter.p_survival".into(),
                message: format!("must be in (0, 1], got {}", self.p_survival),
            });
        }
        for (name, v) in [
            ("filter.max_hypotheses", self.max_hypotheses),
            ("filter.particles_per_track", self.particles_per_track),
            ("filter.gibbs_sweeps", self.gibbs_sweeps),
        ] {
            if v == 0 {
                return Err(TrackingError::Config {
                    field: name.into(),
                    message: "must be >= 1".into(),
                });
            }
        }
        if !(self.min_track_power >= 0.0) {
            return Err(TrackingError::Config {
                field: "filter.min_track_power".into(),
                message: format!("must be >= 0, got {}", self.min_track_power),
            });
        }
        if self.soft_track_power < self.min_track_power {
            return Err(TrackingError::Config {
                field: "filter.soft_track_power".into(),
                message: "must be >= min_track_power".into(),
            });
        }
        Ok(())
    }

    /// Survival probability of one state under the detectability gate:
    /// zero below the hard power floor or outside the field of view, the
    /// configured constant above the soft level, a linear ramp in between.
    pub fn survival_probability(&self, state: &State5, sensor: &SensorModel) -> f64 {
        if self.min_track_power <= 0.0 {
            return self.p_survival;
        }
        let Ok(m) = state_to_measurement(state) else {
            return 0.0;
        };
        if !sensor.grid.contains(&m) {
            return 0.0;
        }
        let Ok(power) = crate::measurement::reflection_power_at(state[4], &m, sensor) else {
            return 0.0;
        };
        if power < self.min_track_power {
            return 0.0;
        }
        if power >= self.soft_track_power {
            return self.p_survival;
        }
        let ramp =
            (power - self.min_track_power) / (self.soft_track_power - self.min_track_power);
        self.p_survival * ramp
    }
}

/// Two-branch cost row for one label: stay alive (survive or be born,
/// including the pseudo-likelihood factor) versus die (or stay unborn).
#[derive(Debug, Clone)]
pub struct CostMatrixRow {
    pub label: Label,
    /// log(p̄_S ψ̄) for existing labels, log(r_B ψ̄) for birth labels.
    pub log_alive: f64,
    /// log(1 − p̄_S) for existing labels, log(1 − r_B) for birth labels.
    pub log_dead: f64,
    pub is_birth: bool,
}

/// ⟨p, p_S⟩: the particle-cloud expectation of a survival probability.
pub fn survival_integral<F>(track: &LabeledParticleTrack, p_survival: F) -> f64
where
    F: Fn(&State5) -> f64,
{
    track
        .states
        .iter()
        .zip(&track.weights)
        .map(|(s, w)| w * p_survival(s))
        .sum()
}

/// Predicted density for one label: surviving labels propagate their prior
/// cloud through the motion model (the constant survival factor cancels in
/// the normalized quotient), newborn labels take the proposal cloud.
pub fn predicted_track<R: Rng>(
    prior: Option<&LabeledParticleTrack>,
    birth: Option<&BirthCandidate>,
    motion: &MotionParams,
    rng: &mut R,
) -> Result<LabeledParticleTrack> {
    match (prior, birth) {
        (Some(track), _) => Ok(propagate_particles(track, motion, rng)),
        (None, Some(candidate)) => Ok(candidate.track.clone()),
        (None, None) => Err(TrackingError::Contract(
            "predicted_track: label is neither surviving nor newborn".into(),
        )),
    }
}

/// Per-particle log pseudo-likelihoods of a track against a cube.
pub fn track_log_psi(track: &LabeledParticleTrack, cube: &RadarCube, sensor: &SensorModel) -> Vec<f64> {
    track
        .states
        .par_iter()
        .map(|s| crate::measurement::target_pseudolikelihood(s, cube, sensor))
        .collect()
}

/// log ψ̄ = log ⟨p, ψ_z⟩ via log-sum-exp over per-particle values.
pub fn psi_bar(track: &LabeledParticleTrack, cube: &RadarCube, sensor: &SensorModel) -> Result<f64> {
    let log_psi = track_log_psi(track, cube, sensor);
    psi_bar_from(&track.weights, &log_psi)
}

pub fn psi_bar_from(weights: &[f64], log_psi: &[f64]) -> Result<f64> {
    let terms: Vec<f64> = weights
        .iter()
        .zip(log_psi)
        .map(|(w, lp)| if *w > 0.0 { w.ln() + lp } else { f64::NEG_INFINITY })
        .collect();
    let out = logsumexp(&terms);
    if out == f64::NEG_INFINITY {
        return Err(TrackingError::DeadTrack);
    }
    Ok(out)
}

/// Bayes update of one track's particle weights by ψ_z/ψ̄, with systematic
/// resampling back to `target_count` particles when the effective sample size
/// drops below half the cloud size.
pub fn update_track<R: Rng>(
    track: &LabeledParticleTrack,
    cube: &RadarCube,
    sensor: &SensorModel,
    target_count: usize,
    rng: &mut R,
) -> Result<LabeledParticleTrack> {
    let log_psi = track_log_psi(track, cube, sensor);
    let log_psi_bar = psi_bar_from(&track.weights, &log_psi)?;
    Ok(update_track_with(track, &log_psi, log_psi_bar, target_count, rng))
}

/// Same update with precomputed per-particle log ψ and log ψ̄.
pub fn update_track_with<R: Rng>(
    track: &LabeledParticleTrack,
    log_psi: &[f64],
    log_psi_bar: f64,
    target_count: usize,
    rng: &mut R,
) -> LabeledParticleTrack {
    let mut weights: Vec<f64> = track
        .weights
        .iter()
        .zip(log_psi)
        .map(|(w, lp)| {
            if *w > 0.0 {
                (w.ln() + lp - log_psi_bar).exp()
            } else {
                0.0
            }
        })
        .collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }

    if effective_sample_size(&weights) < target_count as f64 / 2.0 {
        let indices = systematic_indices(&weights, target_count, rng);
        let states: Vec<State5> = indices.iter().map(|&i| track.states[i]).collect();
        LabeledParticleTrack::uniform(track.label, states)
    } else {
        LabeledParticleTrack::new(track.label, track.states.clone(), weights)
    }
}

/// Transition weight of one admissible parent-to-child label-set move: the
/// product of survive/die and born/unborn branch factors read off the rows.
///
/// Every row represents one label of I_prev ∪ I_birth(I_prev); a child label
/// outside that support is a contract violation.
pub fn hypothesis_weight(rows: &[CostMatrixRow], child: &[Label]) -> Result<f64> {
    let mut log_w = 0.0;
    let mut matched = 0usize;
    for row in rows {
        if child.binary_search(&row.label).is_ok() {
            log_w += row.log_alive;
            matched += 1;
        } else {
            log_w += row.log_dead;
        }
    }
    if matched != child.len() {
        return Err(TrackingError::Contract(
            "hypothesis_weight: child set contains a label outside the parent/birth support".into(),
        ));
    }
    Ok(log_w)
}

/// Connected components of the pairwise-overlap graph over row centroids.
/// Returns one group id per row; rows without a mappable centroid stay alone.
pub fn merge_groups(centroids: &[Option<MeasPoint>], radii: &[f64; 3]) -> Vec<usize> {
    let n = centroids.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = i;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    for i in 0..n {
        for j in 0..i {
            if let (Some(a), Some(b)) = (&centroids[i], &centroids[j]) {
                if ellipsoids_overlap(a, b, radii) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri] = rj;
                    }
                }
            }
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

/// One discovered child label set with its exact log transition weight.
pub type LabelSetWeight = (Vec<Label>, f64);

/// Build the per-label cost rows for one parent hypothesis. Existing labels
/// combine their cloud-averaged survival probability with ψ̄; birth labels
/// combine the birth probability with ψ̄.
pub fn build_cost_rows(
    parent_labels: &[Label],
    survival_bar: &BTreeMap<Label, f64>,
    log_psi_bar: &BTreeMap<Label, f64>,
    births: &[BirthCandidate],
) -> Vec<CostMatrixRow> {
    let mut rows = Vec::with_capacity(parent_labels.len() + births.len());
    for l in parent_labels {
        let p_s = survival_bar.get(l).copied().unwrap_or(0.0);
        rows.push(CostMatrixRow {
            label: *l,
            log_alive: p_s.ln() + log_psi_bar.get(l).copied().unwrap_or(f64::NEG_INFINITY),
            log_dead: (1.0 - p_s).ln(),
            is_birth: false,
        });
    }
    for b in births {
        rows.push(CostMatrixRow {
            label: b.label,
            log_alive: b.r_birth.ln() + log_psi_bar.get(&b.label).copied().unwrap_or(f64::NEG_INFINITY),
            log_dead: (1.0 - b.r_birth).ln(),
            is_birth: true,
        });
    }
    debug_assert!(rows.windows(2).all(|w| w[0].label < w[1].label));
    rows
}

fn labels_of_state(rows: &[CostMatrixRow], alive: &[bool]) -> Vec<Label> {
    rows.iter()
        .zip(alive)
        .filter(|(_, a)| **a)
        .map(|(r, _)| r.label)
        .collect()
}

/// Gibbs-sampling truncation of the child label-set space of one parent.
///
/// Each sweep resamples every label's alive/dead branch conditioned on the
/// rest; once any member of a merge group is alive the other members' death
/// branch is forced. Visited states only *discover* label sets — every
/// returned weight is recomputed exactly. The all-survive/no-birth initial
/// state (repaired to honor merge groups) is always included.
pub fn gibbs_truncate<R: Rng>(
    rows: &[CostMatrixRow],
    groups: &[usize],
    max_sets: usize,
    sweeps: usize,
    rng: &mut R,
) -> Vec<LabelSetWeight> {
    let n = rows.len();
    if n == 0 {
        return vec![(Vec::new(), 0.0)];
    }
    let mut alive: Vec<bool> = rows.iter().map(|r| !r.is_birth).collect();
    // Repair the initial state: keep the strongest member of each group.
    for g in 0..n {
        let members: Vec<usize> = (0..n).filter(|&i| groups[i] == groups[g]).collect();
        if members.iter().filter(|&&i| alive[i]).count() > 1 {
            let best = members
                .iter()
                .copied()
                .filter(|&i| alive[i])
                .max_by(|&a, &b| {
                    let sa = rows[a].log_alive - rows[a].log_dead;
                    let sb = rows[b].log_alive - rows[b].log_dead;
                    sa.partial_cmp(&sb).unwrap().then(rows[b].label.cmp(&rows[a].label))
                })
                .unwrap();
            for &i in &members {
                alive[i] = i == best;
            }
        }
    }

    let mut group_alive: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..n {
        if alive[i] {
            *group_alive.entry(groups[i]).or_insert(0) += 1;
        }
    }

    let mut discovered: BTreeMap<Vec<Label>, ()> = BTreeMap::new();
    discovered.insert(labels_of_state(rows, &alive), ());

    for _ in 0..sweeps {
        for i in 0..n {
            let g = groups[i];
            let others_alive = group_alive.get(&g).copied().unwrap_or(0) - usize::from(alive[i]);
            let next = if others_alive > 0 {
                // Either-or coupling: a live groupmate forces the death branch.
                false
            } else {
                let delta = rows[i].log_alive - rows[i].log_dead;
                let p_alive = if delta >= 0.0 {
                    1.0 / (1.0 + (-delta).exp())
                } else {
                    let e = delta.exp();
                    e / (1.0 + e)
                };
                rng.gen::<f64>() < p_alive
            };
            if next != alive[i] {
                let counter = group_alive.entry(g).or_insert(0);
                if next {
                    *counter += 1;
                } else {
                    *counter -= 1;
                }
                alive[i] = next;
            }
            discovered.insert(labels_of_state(rows, &alive), ());
        }
    }

    let mut sets: Vec<LabelSetWeight> = discovered
        .into_keys()
        .filter_map(|set| hypothesis_weight(rows, &set).ok().map(|w| (set, w)))
        .filter(|(_, w)| w.is_finite())
        .collect();
    sort_and_truncate(&mut sets, max_sets);
    sets
}

/// Exact truncation: enumerate every merge-admissible label subset. Used when
/// the label count is small enough that enumeration beats sampling.
pub fn enumerate_label_sets(
    rows: &[CostMatrixRow],
    groups: &[usize],
    max_sets: usize,
) -> Vec<LabelSetWeight> {
    let n = rows.len();
    assert!(n <= 20, "enumeration over 2^{n} subsets is not sensible");
    let mut sets: Vec<LabelSetWeight> = Vec::with_capacity(1 << n);
    'mask: for mask in 0u32..(1u32 << n) {
        let mut log_w = 0.0;
        let mut seen_groups = 0u64;
        for (i, row) in rows.iter().enumerate() {
            if mask & (1 << i) != 0 {
                let gbit = 1u64 << (groups[i] % 64);
                // Two live members of one merge group: inadmissible.
                if n <= 64 && seen_groups & gbit != 0 && same_group_conflict(groups, mask, i) {
                    continue 'mask;
                }
                seen_groups |= gbit;
                log_w += row.log_alive;
            } else {
                log_w += row.log_dead;
            }
        }
        if !log_w.is_finite() {
            continue;
        }
        let labels: Vec<Label> = rows
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, r)| r.label)
            .collect();
        sets.push((labels, log_w));
    }
    sort_and_truncate(&mut sets, max_sets);
    sets
}

#[inline]
fn same_group_conflict(groups: &[usize], mask: u32, i: usize) -> bool {
    (0..i).any(|j| mask & (1 << j) != 0 && groups[j] == groups[i])
}

fn sort_and_truncate(sets: &mut Vec<LabelSetWeight>, max_sets: usize) {
    sets.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    sets.truncate(max_sets);
}

/// Inputs of one recursion step.
pub struct StepInputs<'a> {
    /// Cube the update is conditioned on (the current frame).
    pub cube: &'a RadarCube,
    /// Cube the birth proposal reads. Feeding the previous frame here makes
    /// newborn candidates prove themselves against fresh data, which starves
    /// single-frame noise flashes; the driver passes the current cube only on
    /// the very first step.
    pub birth_cube: &'a RadarCube,
    pub sensor: &'a SensorModel,
    pub motion: &'a MotionParams,
    pub birth: &'a BirthParams,
    pub filter: &'a FilterParams,
    pub seed: u64,
}

/// Per-parent factor table recorded by a step, sufficient to replay the
/// label-set combinatorics independently of the truncation machinery.
#[derive(Debug, Clone)]
pub struct ParentFactors {
    pub parent_log_weight: f64,
    pub rows: Vec<CostMatrixRow>,
    pub groups: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct StepDiagnostics {
    pub time: u32,
    pub parents: Vec<ParentFactors>,
    pub births: Vec<Label>,
    pub log_psi_bar: BTreeMap<Label, f64>,
    pub used_enumeration: bool,
    pub child_sets_before_cap: usize,
}

fn label_key(l: &Label) -> u64 {
    ((l.birth_time as u64) << 32) | l.birth_index as u64
}

/// One joint prediction-update step: returns the normalized, truncated
/// posterior at time `prior.time + 1` together with its factor table.
pub fn step(prior: &GlmbDensity, inputs: &StepInputs) -> Result<(GlmbDensity, StepDiagnostics)> {
    inputs.filter.validate()?;
    inputs.birth.validate()?;
    inputs.motion.validate()?;
    let k = (prior.time + 1) as u32;
    let fp = inputs.filter;

    // Survival and prediction per label referenced by any retained
    // hypothesis. The survival weighting enters the predicted density
    // through the normalized quotient: sub-gate particles are culled and the
    // remaining cloud renormalized before propagation. With the gate
    // disabled the survival factor is constant and the weighting cancels.
    let labels_prev: Vec<Label> = prior.label_union().into_iter().collect();
    let survived: BTreeMap<Label, (f64, Option<LabeledParticleTrack>)> = labels_prev
        .par_iter()
        .map(|l| {
            let track = &prior.tracks[l];
            let p_s_bar = survival_integral(track, |s| {
                fp.survival_probability(s, inputs.sensor)
            });
            if p_s_bar <= 0.0 {
                return (*l, (0.0, None));
            }
            let (states, weights): (Vec<State5>, Vec<f64>) = track
                .states
                .iter()
                .zip(&track.weights)
                .filter(|(s, w)| **w > 0.0 && fp.survival_probability(s, inputs.sensor) > 0.0)
                .map(|(s, w)| (*s, *w))
                .unzip();
            let mass: f64 = weights.iter().sum();
            let weights = weights.into_iter().map(|w| w / mass).collect();
            let pruned = LabeledParticleTrack::new(*l, states, weights);
            let mut rng = stream_rng(inputs.seed, Stream::Propagate, k as u64, label_key(l));
            let predicted = propagate_particles(&pruned, inputs.motion, &mut rng);
            (*l, (p_s_bar, Some(predicted)))
        })
        .collect();
    let survival_bar: BTreeMap<Label, f64> =
        survived.iter().map(|(l, (p, _))| (*l, *p)).collect();
    let predicted: BTreeMap<Label, LabeledParticleTrack> = survived
        .into_iter()
        .filter_map(|(l, (_, t))| t.map(|t| (l, t)))
        .collect();

    // Birth proposal against the union of every retained track's region.
    let existing_regions: Vec<MeasPoint> = predicted
        .values()
        .filter_map(|t| state_to_measurement(&t.mean()).ok())
        .collect();
    let mut birth_rng = stream_rng(inputs.seed, Stream::Birth, k as u64, 0);
    let births = propose_births(
        inputs.birth_cube,
        &existing_regions,
        inputs.birth,
        inputs.sensor,
        k,
        &mut birth_rng,
    );

    struct LabelData {
        log_psi: Vec<f64>,
        log_psi_bar: f64,
        centroid: Option<MeasPoint>,
    }
    let mut per_label: BTreeMap<Label, LabelData> = BTreeMap::new();
    for (l, track) in predicted.iter() {
        let log_psi = track_log_psi(track, inputs.cube, inputs.sensor);
        let log_psi_bar = psi_bar_from(&track.weights, &log_psi)?;
        per_label.insert(
            *l,
            LabelData {
                log_psi,
                log_psi_bar,
                centroid: state_to_measurement(&track.mean()).ok(),
            },
        );
    }
    for b in &births {
        let log_psi = track_log_psi(&b.track, inputs.cube, inputs.sensor);
        let log_psi_bar = psi_bar_from(&b.track.weights, &log_psi)?;
        // Evidence-weighted centroid: where the newborn cloud will sit after
        // the update. Grouping on it couples a candidate that latches onto
        // an existing target's return in its birth frame already.
        let mut mean = [0.0; 5];
        let mut mass = 0.0;
        for ((st, w), lp) in b.track.states.iter().zip(&b.track.weights).zip(&log_psi) {
            let wt = w * (lp - log_psi_bar).exp();
            mass += wt;
            for d in 0..5 {
                mean[d] += wt * st[d];
            }
        }
        let centroid = if mass > 0.0 {
            for d in 0..5 {
                mean[d] /= mass;
            }
            state_to_measurement(&mean).ok()
        } else {
            Some(b.center)
        };
        per_label.insert(
            b.label,
            LabelData {
                log_psi,
                log_psi_bar,
                centroid,
            },
        );
    }
    let log_psi_bar_map: BTreeMap<Label, f64> =
        per_label.iter().map(|(l, d)| (*l, d.log_psi_bar)).collect();

    // Truncate each parent's child space and pool children by label set.
    // Children of any parent sharing a label set also share their track
    // distributions here, so pooling by weight addition is exact.
    let mut pooled: BTreeMap<Vec<Label>, (Vec<f64>, u32)> = BTreeMap::new();
    let mut diagnostics = StepDiagnostics {
        time: k,
        births: births.iter().map(|b| b.label).collect(),
        log_psi_bar: log_psi_bar_map,
        used_enumeration: false,
        ..Default::default()
    };

    for (parent_idx, parent) in prior.hypotheses.iter().enumerate() {
        let parent_labels: Vec<Label> = parent.labels.iter().copied().collect();
        let rows = build_cost_rows(
            &parent_labels,
            &survival_bar,
            &diagnostics.log_psi_bar,
            &births,
        );
        let centroids: Vec<Option<MeasPoint>> = rows
            .iter()
            .map(|r| per_label.get(&r.label).and_then(|d| d.centroid))
            .collect();
        let groups = merge_groups(&centroids, &inputs.birth.ellipsoid_radii);

        let sets = if rows.len() <= fp.enumeration_max_labels {
            diagnostics.used_enumeration = true;
            enumerate_label_sets(&rows, &groups, fp.max_hypotheses)
        } else {
            let mut rng = stream_rng(inputs.seed, Stream::Gibbs, k as u64, parent_idx as u64);
            gibbs_truncate(&rows, &groups, fp.max_hypotheses, fp.gibbs_sweeps, &mut rng)
        };
        for (set, log_wz) in sets {
            let entry = pooled.entry(set).or_insert_with(|| (Vec::new(), parent_idx as u32));
            entry.0.push(parent.log_weight + log_wz);
        }
        diagnostics.parents.push(ParentFactors {
            parent_log_weight: parent.log_weight,
            rows,
            groups,
        });
    }

    diagnostics.child_sets_before_cap = pooled.len();

    let mut hypotheses: Vec<Hypothesis> = pooled
        .into_iter()
        .map(|(labels, (ws, parent))| {
            let mut h = Hypothesis::new(labels.into_iter().collect(), logsumexp(&ws));
            h.parent = Some(parent);
            h
        })
        .collect();

    let mut posterior = GlmbDensity {
        time: k as i64,
        hypotheses: Vec::new(),
        tracks: BTreeMap::new(),
    };
    posterior.hypotheses = hypotheses.drain(..).filter(|h| h.log_weight.is_finite()).collect();
    posterior.normalize()?;
    posterior.hypotheses.sort_by(|a, b| {
        b.log_weight
            .partial_cmp(&a.log_weight)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.labels.cmp(&b.labels))
    });
    posterior.hypotheses.truncate(fp.max_hypotheses);
    posterior.normalize()?;

    // Bayes-update the clouds of every retained label.
    let retained = posterior.label_union();
    let birth_by_label: BTreeMap<Label, &BirthCandidate> =
        births.iter().map(|b| (b.label, b)).collect();
    let updated: Vec<(Label, LabeledParticleTrack)> = retained
        .par_iter()
        .map(|l| {
            let source = predicted
                .get(l)
                .unwrap_or_else(|| &birth_by_label[l].track);
            let data = &per_label[l];
            let mut rng = stream_rng(inputs.seed, Stream::Resample, k as u64, label_key(l));
            let track = update_track_with(
                source,
                &data.log_psi,
                data.log_psi_bar,
                fp.particles_per_track,
                &mut rng,
            );
            (*l, track)
        })
        .collect();
    posterior.tracks = updated.into_iter().collect();

    Ok((posterior, diagnostics))
}

/// Cardinality-then-weight state extraction: pick the most probable target
/// count n* (ties toward fewer targets), then the heaviest hypothesis with
/// exactly n* labels, and report its labels with particle-mean states.
pub fn extract_estimates(density: &GlmbDensity) -> Vec<(Label, State5)> {
    extract_estimates_detailed(density).0
}

/// As `extract_estimates`, also returning the chosen hypothesis weight.
pub fn extract_estimates_detailed(density: &GlmbDensity) -> (Vec<(Label, State5)>, f64) {
    let dist = density.cardinality_distribution();
    let mut n_star = 0usize;
    let mut best_p = f64::NEG_INFINITY;
    for (n, p) in dist.iter().enumerate() {
        if *p > best_p {
            best_p = *p;
            n_star = n;
        }
    }
    let best = density
        .hypotheses
        .iter()
        .filter(|h| h.cardinality() == n_star)
        .max_by(|a, b| {
            a.log_weight
                .partial_cmp(&b.log_weight)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| b.labels.cmp(&a.labels))
        });
    let Some(best) = best else {
        return (Vec::new(), 0.0);
    };
    let estimates = best
        .labels
        .iter()
        .filter_map(|l| density.tracks.get(l).map(|t| (*l, t.mean())))
        .collect();
    (estimates, best.log_weight.exp())
}

/// Pointwise minimum of two cubes: the persistence view the birth proposal
/// reads. A cell is only as significant as its dimmest recent frame, which
/// starves single-frame noise flashes without dimming steady returns much.
pub fn min_cube(a: &RadarCube, b: &RadarCube) -> RadarCube {
    debug_assert_eq!(a.grid, b.grid);
    RadarCube {
        grid: a.grid.clone(),
        intensities: a
            .intensities
            .iter()
            .zip(&b.intensities)
            .map(|(x, y)| x.min(*y))
            .collect(),
        timestamp: b.timestamp,
    }
}

/// Stateful frame-by-frame driver: owns the posterior, the recent cubes for
/// the birth proposal, and the frame clock.
pub struct TbdGlmbFilter {
    pub sensor: SensorModel,
    pub motion: MotionParams,
    pub birth: BirthParams,
    pub params: FilterParams,
    pub seed: u64,
    pub density: GlmbDensity,
    prev_cubes: [Option<RadarCube>; 2],
    prev_timestamp: Option<f64>,
}

impl TbdGlmbFilter {
    pub fn new(
        sensor: SensorModel,
        motion: MotionParams,
        birth: BirthParams,
        params: FilterParams,
        seed: u64,
    ) -> Self {
        Self {
            sensor,
            motion,
            birth,
            params,
            seed,
            density: GlmbDensity::empty_prior(),
            prev_cubes: [None, None],
            prev_timestamp: None,
        }
    }

    /// Absorb one cube; returns the MAP estimates for the new posterior.
    ///
    /// The frame period is read from consecutive cube timestamps, falling
    /// back to the configured period for the first frame or non-increasing
    /// stamps. The birth proposal reads the pointwise minimum of the two
    /// preceding cubes (persistence view); newborn candidates then still
    /// have to confirm against the current cube inside the step. On the
    /// very first frames the view falls back to what is available.
    pub fn step(&mut self, cube: &RadarCube) -> Result<Vec<(Label, State5)>> {
        let dt = match self.prev_timestamp {
            Some(prev) if cube.timestamp > prev => cube.timestamp - prev,
            _ => self.motion.dt,
        };
        let motion = MotionParams { dt, ..self.motion };
        let birth_cube = match &self.prev_cubes {
            [Some(a), Some(b)] => min_cube(a, b),
            [None, Some(b)] => b.clone(),
            _ => cube.clone(),
        };
        let inputs = StepInputs {
            cube,
            birth_cube: &birth_cube,
            sensor: &self.sensor,
            motion: &motion,
            birth: &self.birth,
            filter: &self.params,
            seed: self.seed,
        };
        let (posterior, _) = step(&self.density, &inputs)?;
        self.density = posterior;
        self.prev_cubes = [self.prev_cubes[1].take(), Some(cube.clone())];
        self.prev_timestamp = Some(cube.timestamp);
        Ok(extract_estimates(&self.density))
    }
}
