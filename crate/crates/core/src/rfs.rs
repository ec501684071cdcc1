//! Labeled random-finite-set primitives: track labels, weighted particle
//! tracks, hypotheses (label sets) and the multi-hypothesis posterior density.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Result, TrackingError};
use crate::numeric::{log_normalize, logsumexp};

/// Planar state with velocities plus the reflection power coefficient:
/// `[x m, xdot m/s, y m, ydot m/s, theta]`.
pub type State5 = [f64; 5];

pub const STATE_DIM: usize = 5;

/// Unique track identity: the step a target was born plus a per-step index.
///
/// The derived lexicographic ordering on (birth_time, birth_index) fixes the
/// iteration order everywhere, which keeps runs reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label {
    pub birth_time: u32,
    pub birth_index: u32,
}

impl Label {
    pub fn new(birth_time: u32, birth_index: u32) -> Self {
        Self {
            birth_time,
            birth_index,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.birth_time, self.birth_index)
    }
}

/// A labeled track represented by a weighted particle cloud.
#[derive(Debug, Clone)]
pub struct LabeledParticleTrack {
    pub label: Label,
    pub states: Vec<State5>,
    /// Normalized weights, same length as `states`.
    pub weights: Vec<f64>,
}

impl LabeledParticleTrack {
    pub fn new(label: Label, states: Vec<State5>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(states.len(), weights.len());
        Self {
            label,
            states,
            weights,
        }
    }

    /// Equally weighted cloud.
    pub fn uniform(label: Label, states: Vec<State5>) -> Self {
        let n = states.len();
        let w = 1.0 / n as f64;
        Self {
            label,
            states,
            weights: vec![w; n],
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Weighted mean state.
    pub fn mean(&self) -> State5 {
        let mut m = [0.0; STATE_DIM];
        for (s, w) in self.states.iter().zip(&self.weights) {
            for d in 0..STATE_DIM {
                m[d] += w * s[d];
            }
        }
        m
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// One candidate target constellation: a label set and its log weight.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub labels: BTreeSet<Label>,
    pub log_weight: f64,
    /// Index of the parent hypothesis in the previous step's density; kept for
    /// lineage debugging only.
    pub parent: Option<u32>,
}

impl Hypothesis {
    pub fn new(labels: BTreeSet<Label>, log_weight: f64) -> Self {
        Self {
            labels,
            log_weight,
            parent: None,
        }
    }

    pub fn cardinality(&self) -> usize {
        self.labels.len()
    }
}

/// The filter posterior: weighted hypotheses over label sets plus one particle
/// track per referenced label.
///
/// The update step of this filter is identical for every hypothesis carrying a
/// given label (there is no per-hypothesis measurement assignment), so tracks
/// are stored once per label and shared by all hypotheses that reference them.
#[derive(Debug, Clone)]
pub struct GlmbDensity {
    /// Time index of the last absorbed measurement; -1 before the first step.
    pub time: i64,
    pub hypotheses: Vec<Hypothesis>,
    pub tracks: BTreeMap<Label, LabeledParticleTrack>,
}

impl GlmbDensity {
    /// Prior before any data: the single empty hypothesis with weight one.
    pub fn empty_prior() -> Self {
        Self {
            time: -1,
            hypotheses: vec![Hypothesis::new(BTreeSet::new(), 0.0)],
            tracks: BTreeMap::new(),
        }
    }

    /// Rescale hypothesis weights so they sum to one (log-sum-exp in log
    /// space); relative ordering is unchanged.
    pub fn normalize(&mut self) -> Result<()> {
        if self.hypotheses.is_empty() {
            return Err(TrackingError::DegeneratePosterior);
        }
        let mut ws: Vec<f64> = self.hypotheses.iter().map(|h| h.log_weight).collect();
        if log_normalize(&mut ws).is_none() {
            return Err(TrackingError::DegeneratePosterior);
        }
        for (h, w) in self.hypotheses.iter_mut().zip(ws) {
            h.log_weight = w;
        }
        Ok(())
    }

    /// Σ exp(log_weight); 1 after `normalize`.
    pub fn weight_sum(&self) -> f64 {
        let ws: Vec<f64> = self.hypotheses.iter().map(|h| h.log_weight).collect();
        logsumexp(&ws).exp()
    }

    /// Probability of each cardinality n = 0..=max |I|.
    ///
    /// Entry n sums the weights of all hypotheses with n labels.
    pub fn cardinality_distribution(&self) -> Vec<f64> {
        let max_n = self
            .hypotheses
            .iter()
            .map(|h| h.cardinality())
            .max()
            .unwrap_or(0);
        let mut dist = vec![0.0; max_n + 1];
        for h in &self.hypotheses {
            dist[h.cardinality()] += h.log_weight.exp();
        }
        dist
    }

    /// Expected number of targets under the hypothesis weights.
    pub fn mean_cardinality(&self) -> f64 {
        self.hypotheses
            .iter()
            .map(|h| h.log_weight.exp() * h.cardinality() as f64)
            .sum()
    }

    /// Union of all labels referenced by any hypothesis.
    pub fn label_union(&self) -> BTreeSet<Label> {
        let mut set = BTreeSet::new();
        for h in &self.hypotheses {
            set.extend(h.labels.iter().copied());
        }
        set
    }

    pub fn track(&self, label: &Label) -> Option<&LabeledParticleTrack> {
        self.tracks.get(label)
    }
}

/// 1 when the listed states carry pairwise distinct labels, 0 otherwise.
/// The empty list has distinct labels by convention.
pub fn distinct_label_indicator(states: &[(State5, Label)]) -> u8 {
    let labels: BTreeSet<Label> = states.iter().map(|(_, l)| *l).collect();
    u8::from(labels.len() == states.len())
}

/// Π h(x) over the listed states, with the empty product equal to one.
pub fn multi_target_exponential<F>(h: F, states: &[State5]) -> f64
where
    F: Fn(&State5) -> f64,
{
    states.iter().map(h).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lbl(t: u32, i: u32) -> Label {
        Label::new(t, i)
    }

    const S: State5 = [0.0; 5];

    #[test]
    fn distinct_label_indicator_cases() {
        assert_eq!(distinct_label_indicator(&[]), 1);
        assert_eq!(distinct_label_indicator(&[(S, lbl(0, 0)), (S, lbl(0, 0))]), 0);
        assert_eq!(distinct_label_indicator(&[(S, lbl(0, 0)), (S, lbl(0, 1))]), 1);
    }

    #[test]
    fn distinct_label_indicator_permutation_invariant() {
        let a = [(S, lbl(0, 0)), (S, lbl(1, 0)), (S, lbl(1, 1))];
        let b = [(S, lbl(1, 1)), (S, lbl(0, 0)), (S, lbl(1, 0))];
        assert_eq!(distinct_label_indicator(&a), distinct_label_indicator(&b));
    }

    #[test]
    fn multi_target_exponential_cases() {
        assert_eq!(multi_target_exponential(|_| 7.0, &[]), 1.0);
        let states = [S, S, S];
        assert_eq!(multi_target_exponential(|_| 1.0, &states), 1.0);
        assert_eq!(multi_target_exponential(|_| 2.0, &states), 8.0);
    }

    #[test]
    fn multi_target_exponential_multiplicative_over_disjoint_union() {
        let h = |s: &State5| 1.0 + s[0].abs();
        let a = [[1.0, 0.0, 0.0, 0.0, 0.0], [2.0, 0.0, 0.0, 0.0, 0.0]];
        let b = [[3.0, 0.0, 0.0, 0.0, 0.0]];
        let mut ab = a.to_vec();
        ab.extend_from_slice(&b);
        let lhs = multi_target_exponential(h, &ab);
        let rhs = multi_target_exponential(h, &a) * multi_target_exponential(h, &b);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn normalize_single_hypothesis() {
        let mut d = GlmbDensity::empty_prior();
        d.hypotheses[0].log_weight = -3.7;
        d.normalize().unwrap();
        assert!((d.hypotheses[0].log_weight.exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_symmetric_and_ratio() {
        let mut d = GlmbDensity::empty_prior();
        d.hypotheses = vec![
            Hypothesis::new(BTreeSet::new(), 4.2),
            Hypothesis::new([lbl(0, 0)].into_iter().collect(), 4.2),
        ];
        d.normalize().unwrap();
        for h in &d.hypotheses {
            assert!((h.log_weight.exp() - 0.5).abs() < 1e-12);
        }

        d.hypotheses[0].log_weight = 1.0_f64.ln();
        d.hypotheses[1].log_weight = 3.0_f64.ln();
        d.normalize().unwrap();
        assert!((d.hypotheses[0].log_weight.exp() - 0.25).abs() < 1e-12);
        assert!((d.hypotheses[1].log_weight.exp() - 0.75).abs() < 1e-12);
        assert!((d.weight_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_rejects_total_collapse() {
        let mut d = GlmbDensity::empty_prior();
        d.hypotheses[0].log_weight = f64::NEG_INFINITY;
        assert!(matches!(
            d.normalize(),
            Err(TrackingError::DegeneratePosterior)
        ));
    }

    #[test]
    fn cardinality_distribution_cases() {
        let mut d = GlmbDensity::empty_prior();
        d.hypotheses = vec![Hypothesis::new(
            [lbl(0, 0), lbl(0, 1)].into_iter().collect(),
            0.0,
        )];
        assert_eq!(d.cardinality_distribution(), vec![0.0, 0.0, 1.0]);

        d.hypotheses = vec![
            Hypothesis::new(BTreeSet::new(), 0.3_f64.ln()),
            Hypothesis::new([lbl(0, 0)].into_iter().collect(), 0.7_f64.ln()),
        ];
        let dist = d.cardinality_distribution();
        assert!((dist[0] - 0.3).abs() < 1e-12);
        assert!((dist[1] - 0.7).abs() < 1e-12);
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cardinality_distribution_invariant_under_reordering() {
        let h1 = Hypothesis::new([lbl(0, 0)].into_iter().collect(), 0.4_f64.ln());
        let h2 = Hypothesis::new(BTreeSet::new(), 0.6_f64.ln());
        let mut d = GlmbDensity::empty_prior();
        d.hypotheses = vec![h1.clone(), h2.clone()];
        let a = d.cardinality_distribution();
        d.hypotheses = vec![h2, h1];
        let b = d.cardinality_distribution();
        assert_eq!(a, b);
    }
}
