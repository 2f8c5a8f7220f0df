//! Hard and soft interventions, and distributions over them.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::io::sha256_hex;
use crate::sem::{Noise, SemModel};

/// One environment: hard assignments `X_i := a_i` and soft weight overrides
/// `B[j, i] := w`. The id is a content hash, so equal contents give equal ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Intervention {
    hard: BTreeMap<usize, f64>,
    soft: BTreeMap<(usize, usize), f64>,
    id: String,
}

impl Default for Intervention {
    fn default() -> Self {
        Intervention::observational()
    }
}

impl Intervention {
    pub fn new(hard: BTreeMap<usize, f64>, soft: BTreeMap<(usize, usize), f64>) -> Self {
        let id = content_id(&hard, &soft);
        Intervention { hard, soft, id }
    }

    /// The empty intervention.
    pub fn observational() -> Self {
        Intervention::new(BTreeMap::new(), BTreeMap::new())
    }

    pub fn hard_only(assignments: impl IntoIterator<Item = (usize, f64)>) -> Self {
        Intervention::new(assignments.into_iter().collect(), BTreeMap::new())
    }

    pub fn soft_only(overrides: impl IntoIterator<Item = ((usize, usize), f64)>) -> Self {
        Intervention::new(BTreeMap::new(), overrides.into_iter().collect())
    }

    pub fn hard(&self) -> &BTreeMap<usize, f64> {
        &self.hard
    }

    pub fn soft(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.soft
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn is_empty(&self) -> bool {
        self.hard.is_empty() && self.soft.is_empty()
    }

    /// Checks the intervention against `base` without applying it. The target
    /// may be neither a hard site nor the head of a soft override; edges out
    /// of the target may be overridden.
    pub fn validate(&self, base: &SemModel) -> Result<()> {
        let len = base.num_vars();
        let t = base.target();
        for (&i, &a) in &self.hard {
            if i >= len {
                return Err(Error::IndexOutOfRange { index: i, len });
            }
            if i == t {
                return Err(Error::TargetIntervened(t));
            }
            if !a.is_finite() {
                return Err(Error::InvalidIntervention(format!(
                    "non-finite assignment for variable {i}"
                )));
            }
        }
        for (&(j, i), &w) in &self.soft {
            for idx in [j, i] {
                if idx >= len {
                    return Err(Error::IndexOutOfRange { index: idx, len });
                }
            }
            if i == t {
                return Err(Error::TargetIntervened(t));
            }
            if j == i {
                return Err(Error::CycleDetected);
            }
            if self.hard.contains_key(&i) {
                return Err(Error::InvalidIntervention(format!(
                    "variable {i} is both hard-assigned and softly reweighted"
                )));
            }
            if !w.is_finite() {
                return Err(Error::InvalidIntervention(format!(
                    "non-finite weight for {j} -> {i}"
                )));
            }
        }
        Ok(())
    }

    /// `{id, hard: {name: value}, soft: {"from->to": value}}`
    pub fn to_json(&self, names: &[String]) -> Value {
        let mut hard = Map::new();
        for (&i, &a) in &self.hard {
            hard.insert(names[i].clone(), Value::from(a));
        }
        let mut soft = Map::new();
        for (&(j, i), &w) in &self.soft {
            soft.insert(format!("{}->{}", names[j], names[i]), Value::from(w));
        }
        let mut obj = Map::new();
        obj.insert("id".into(), Value::from(self.id.clone()));
        obj.insert("hard".into(), Value::Object(hard));
        obj.insert("soft".into(), Value::Object(soft));
        Value::Object(obj)
    }

    /// Inverse of [`Intervention::to_json`]. The stored id is recomputed and
    /// must match when present.
    pub fn from_json(value: &Value, names: &[String]) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Validation("intervention must be an object".into()))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "id" | "hard" | "soft") {
                return Err(Error::Validation(format!("unknown key {key:?} in intervention")));
            }
        }
        let lookup = |name: &str| {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Validation(format!("unknown variable {name:?}")))
        };
        let number = |v: &Value, what: &str| {
            v.as_f64()
                .ok_or_else(|| Error::Validation(format!("{what} must be a number")))
        };
        let mut hard = BTreeMap::new();
        if let Some(h) = obj.get("hard") {
            let h = h
                .as_object()
                .ok_or_else(|| Error::Validation("`hard` must be an object".into()))?;
            for (k, v) in h {
                hard.insert(lookup(k)?, number(v, k)?);
            }
        }
        let mut soft = BTreeMap::new();
        if let Some(s) = obj.get("soft") {
            let s = s
                .as_object()
                .ok_or_else(|| Error::Validation("`soft` must be an object".into()))?;
            for (k, v) in s {
                let (from, to) = k
                    .split_once("->")
                    .ok_or_else(|| Error::Validation(format!("soft key {k:?} is not \"from->to\"")))?;
                soft.insert((lookup(from.trim())?, lookup(to.trim())?), number(v, k)?);
            }
        }
        let iv = Intervention::new(hard, soft);
        if let Some(id) = obj.get("id").and_then(Value::as_str) {
            if id != iv.id {
                return Err(Error::Validation(format!(
                    "intervention id {id} does not match its contents ({})",
                    iv.id
                )));
            }
        }
        Ok(iv)
    }
}

fn content_id(hard: &BTreeMap<usize, f64>, soft: &BTreeMap<(usize, usize), f64>) -> String {
    let mut bytes = Vec::new();
    bytes.push(b'h');
    for (&i, &a) in hard {
        bytes.extend_from_slice(&(i as u64).to_le_bytes());
        bytes.extend_from_slice(&a.to_bits().to_le_bytes());
    }
    bytes.push(b's');
    for (&(j, i), &w) in soft {
        bytes.extend_from_slice(&(j as u64).to_le_bytes());
        bytes.extend_from_slice(&(i as u64).to_le_bytes());
        bytes.extend_from_slice(&w.to_bits().to_le_bytes());
    }
    sha256_hex(&bytes)[..16].to_string()
}

/// Environment SEM obtained by applying `iv` to `base`. The target's row of
/// weights and its noise are never touched.
pub fn apply(base: &SemModel, iv: &Intervention) -> Result<SemModel> {
    iv.validate(base)?;
    if iv.is_empty() {
        return Ok(base.clone());
    }
    let mut weights = base.weights().clone();
    let mut noise = base.noise().to_vec();
    for (&i, &a) in &iv.hard {
        weights.column_mut(i).fill(0.0);
        noise[i] = Noise::constant(a);
    }
    for (&(j, i), &w) in &iv.soft {
        weights[(j, i)] = w;
    }
    SemModel::from_parts(weights, noise, base.target(), base.names().to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    /// Independent `N(0, scale^2)` assignments at every site.
    HardGaussian,
    /// Every existing in-edge of every site redrawn from `N(0, scale^2)`.
    SoftGaussian,
    /// Every edge not entering the target negated with probability `flip_prob`.
    RademacherFlip,
    /// Each site independently assigned 0 with probability 1/2.
    ChainDisconnect,
    /// Draw a component by weight, then sample from it.
    CustomMixture,
}

/// A distribution over interventions on a fixed base SEM. Sites are
/// variable indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionDistribution {
    pub kind: DistributionKind,
    #[serde(default)]
    pub sites: Vec<usize>,
    #[serde(default = "default_flip_prob")]
    pub flip_prob: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub components: Vec<MixtureComponent>,
}

fn default_flip_prob() -> f64 {
    0.5
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub distribution: InterventionDistribution,
}

impl InterventionDistribution {
    fn with_kind(kind: DistributionKind, sites: Vec<usize>) -> Self {
        InterventionDistribution {
            kind,
            sites,
            flip_prob: default_flip_prob(),
            scale: default_scale(),
            components: Vec::new(),
        }
    }

    pub fn hard_gaussian(sites: Vec<usize>, scale: f64) -> Self {
        InterventionDistribution {
            scale,
            ..Self::with_kind(DistributionKind::HardGaussian, sites)
        }
    }

    pub fn soft_gaussian(sites: Vec<usize>, scale: f64) -> Self {
        InterventionDistribution {
            scale,
            ..Self::with_kind(DistributionKind::SoftGaussian, sites)
        }
    }

    pub fn rademacher_flip(flip_prob: f64) -> Self {
        InterventionDistribution {
            flip_prob,
            ..Self::with_kind(DistributionKind::RademacherFlip, Vec::new())
        }
    }

    pub fn chain_disconnect(sites: Vec<usize>) -> Self {
        Self::with_kind(DistributionKind::ChainDisconnect, sites)
    }

    pub fn mixture(components: Vec<MixtureComponent>) -> Self {
        InterventionDistribution {
            components,
            ..Self::with_kind(DistributionKind::CustomMixture, Vec::new())
        }
    }

    pub fn validate(&self, base: &SemModel) -> Result<()> {
        let len = base.num_vars();
        for &s in &self.sites {
            if s >= len {
                return Err(Error::IndexOutOfRange { index: s, len });
            }
            if s == base.target() {
                return Err(Error::TargetIntervened(s));
            }
        }
        let distinct: BTreeSet<_> = self.sites.iter().collect();
        if distinct.len() != self.sites.len() {
            return Err(Error::InvalidParameters("duplicate intervention site".into()));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::InvalidParameters(format!(
                "flip_prob must lie in [0, 1], got {}",
                self.flip_prob
            )));
        }
        if !self.scale.is_finite() || self.scale < 0.0 {
            return Err(Error::InvalidParameters(format!(
                "scale must be finite and non-negative, got {}",
                self.scale
            )));
        }
        match self.kind {
            DistributionKind::HardGaussian
            | DistributionKind::SoftGaussian
            | DistributionKind::ChainDisconnect => {
                if self.sites.is_empty() {
                    return Err(Error::InvalidParameters(format!(
                        "{:?} needs at least one site",
                        self.kind
                    )));
                }
            }
            DistributionKind::RademacherFlip => {}
            DistributionKind::CustomMixture => {
                if self.components.is_empty() {
                    return Err(Error::InvalidParameters("empty mixture".into()));
                }
                for c in &self.components {
                    if !(c.weight.is_finite() && c.weight > 0.0) {
                        return Err(Error::InvalidParameters(
                            "mixture weights must be positive".into(),
                        ));
                    }
                    c.distribution.validate(base)?;
                }
            }
        }
        Ok(())
    }
}

/// Draws one intervention. Deterministic in `seed`.
pub fn sample_intervention(
    dist: &InterventionDistribution,
    base: &SemModel,
    seed: u64,
) -> Result<Intervention> {
    dist.validate(base)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw(dist, base, &mut rng))
}

fn gaussian<R: Rng>(rng: &mut R, scale: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    scale * z
}

fn sorted_sites(dist: &InterventionDistribution) -> Vec<usize> {
    let set: BTreeSet<usize> = dist.sites.iter().copied().collect();
    set.into_iter().collect()
}

fn draw<R: Rng>(dist: &InterventionDistribution, base: &SemModel, rng: &mut R) -> Intervention {
    match dist.kind {
        DistributionKind::HardGaussian => {
            Intervention::hard_only(sorted_sites(dist).into_iter().map(|s| (s, gaussian(rng, dist.scale))))
        }
        DistributionKind::SoftGaussian => {
            let mut soft = BTreeMap::new();
            for s in sorted_sites(dist) {
                for j in base.parents(s) {
                    soft.insert((j, s), gaussian(rng, dist.scale));
                }
            }
            Intervention::new(BTreeMap::new(), soft)
        }
        DistributionKind::RademacherFlip => {
            let t = base.target();
            let mut soft = BTreeMap::new();
            for e in base.edges() {
                if e.to == t {
                    continue;
                }
                if rng.random::<f64>() < dist.flip_prob {
                    soft.insert((e.from, e.to), -e.weight);
                }
            }
            Intervention::new(BTreeMap::new(), soft)
        }
        DistributionKind::ChainDisconnect => {
            let mut hard = BTreeMap::new();
            for s in sorted_sites(dist) {
                if rng.random_bool(0.5) {
                    hard.insert(s, 0.0);
                }
            }
            Intervention::new(hard, BTreeMap::new())
        }
        DistributionKind::CustomMixture => {
            let total: f64 = dist.components.iter().map(|c| c.weight).sum();
            let mut u = rng.random::<f64>() * total;
            let mut chosen = dist.components.last().expect("validated non-empty");
            for c in &dist.components {
                if u < c.weight {
                    chosen = c;
                    break;
                }
                u -= c.weight;
            }
            draw(&chosen.distribution, base, rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::sem::{build_sem, Edge};

    #[test]
    fn empty_intervention_is_identity() {
        let base = fixtures::example_one(1.0, -1.0);
        assert_eq!(apply(&base, &Intervention::observational()).unwrap(), base);
    }

    #[test]
    fn hard_assignment_cuts_parents() {
        let base = fixtures::chain(6);
        let iv = Intervention::hard_only([(2, 0.0)]);
        let env = apply(&base, &iv).unwrap();
        assert!(env.weights().column(2).iter().all(|&w| w == 0.0));
        assert_eq!(env.noise()[2], Noise::constant(0.0));
        assert_eq!(env.weights().column(base.target()), base.weights().column(base.target()));
    }

    #[test]
    fn target_cannot_be_intervened() {
        let base = fixtures::example_one(1.0, -1.0);
        let iv = Intervention::hard_only([(3, 1.0)]);
        assert_eq!(apply(&base, &iv).unwrap_err(), Error::TargetIntervened(3));
        let iv = Intervention::soft_only([((1, 3), 2.0)]);
        assert_eq!(apply(&base, &iv).unwrap_err(), Error::TargetIntervened(3));
    }

    #[test]
    fn soft_override_can_create_cycle() {
        let base = fixtures::example_one(1.0, -1.0);
        let iv = Intervention::soft_only([((2, 0), 1.0)]);
        assert_eq!(apply(&base, &iv).unwrap_err(), Error::CycleDetected);
    }

    #[test]
    fn hard_and_soft_on_same_node_rejected() {
        let base = fixtures::example_one(1.0, -1.0);
        let iv = Intervention::new([(2, 0.0)].into(), [((0, 2), 1.0)].into());
        assert!(matches!(apply(&base, &iv), Err(Error::InvalidIntervention(_))));
    }

    #[test]
    fn hard_apply_is_idempotent() {
        let base = fixtures::example_one(1.0, -1.0);
        let iv = Intervention::hard_only([(1, 0.3), (2, -1.0)]);
        let once = apply(&base, &iv).unwrap();
        assert_eq!(apply(&once, &iv).unwrap(), once);
    }

    #[test]
    fn ids_are_content_hashes() {
        let a = Intervention::hard_only([(1, 0.5)]);
        let b = Intervention::hard_only([(1, 0.5)]);
        let c = Intervention::hard_only([(1, 0.25)]);
        assert_eq!(a.id(), b.id());
        assert_ne!(a.id(), c.id());
        // recording an override equal to the base weight still changes the label
        let d = Intervention::soft_only([((0, 1), 1.0)]);
        assert_ne!(d.id(), Intervention::observational().id());
    }

    #[test]
    fn rademacher_zero_is_observational() {
        let base = fixtures::seven_node(0.02);
        let dist = InterventionDistribution::rademacher_flip(0.0);
        for seed in 0..20 {
            assert!(sample_intervention(&dist, &base, seed).unwrap().is_empty());
        }
    }

    #[test]
    fn rademacher_spares_target_in_edges() {
        let base = fixtures::seven_node(0.02);
        let dist = InterventionDistribution::rademacher_flip(1.0);
        let iv = sample_intervention(&dist, &base, 9).unwrap();
        let t = base.target();
        assert!(iv.soft().keys().all(|&(_, i)| i != t));
        assert_eq!(iv.soft().len(), base.edges().iter().filter(|e| e.to != t).count());
    }

    #[test]
    fn hard_gaussian_has_exact_sites() {
        let base = fixtures::seven_node(0.02);
        let dist = InterventionDistribution::hard_gaussian(vec![2, 3, 4], 1.0);
        let a = sample_intervention(&dist, &base, 5).unwrap();
        let keys: Vec<usize> = a.hard().keys().copied().collect();
        assert_eq!(keys, vec![2, 3, 4]);
        assert_eq!(a, sample_intervention(&dist, &base, 5).unwrap());
        assert_ne!(a, sample_intervention(&dist, &base, 6).unwrap());
    }

    #[test]
    fn soft_gaussian_redraws_existing_in_edges_only() {
        let base = fixtures::seven_node(0.02);
        let dist = InterventionDistribution::soft_gaussian(vec![2, 3, 4], 1.0);
        let iv = sample_intervention(&dist, &base, 1).unwrap();
        for &(j, i) in iv.soft().keys() {
            assert!(base.weights()[(j, i)] != 0.0);
        }
        let expected: usize = [2, 3, 4].iter().map(|&s| base.parents(s).len()).sum();
        assert_eq!(iv.soft().len(), expected);
    }

    #[test]
    fn distribution_rejects_target_sites() {
        let base = fixtures::seven_node(0.02);
        let dist = InterventionDistribution::hard_gaussian(vec![base.target()], 1.0);
        assert!(matches!(
            sample_intervention(&dist, &base, 0),
            Err(Error::TargetIntervened(_))
        ));
    }

    #[test]
    fn mixture_draws_from_components() {
        let base = build_sem(
            &[Edge::new(0, 1, 1.0), Edge::new(1, 2, 1.0)],
            vec![Noise::gaussian(1.0); 3],
            2,
        )
        .unwrap();
        let dist = InterventionDistribution::mixture(vec![
            MixtureComponent {
                weight: 1.0,
                distribution: InterventionDistribution::hard_gaussian(vec![0], 1.0),
            },
            MixtureComponent {
                weight: 1.0,
                distribution: InterventionDistribution::soft_gaussian(vec![1], 1.0),
            },
        ]);
        let (mut hard, mut soft) = (0, 0);
        for seed in 0..200 {
            let iv = sample_intervention(&dist, &base, seed).unwrap();
            if !iv.hard().is_empty() {
                hard += 1;
            }
            if !iv.soft().is_empty() {
                soft += 1;
            }
        }
        assert_eq!(hard + soft, 200);
        assert!(hard > 60 && soft > 60);
    }

    #[test]
    fn json_round_trip() {
        let base = fixtures::seven_node(0.02);
        let iv = Intervention::new([(2, 0.25)].into(), [((0, 1), -1.0)].into());
        let v = iv.to_json(base.names());
        let back = Intervention::from_json(&v, base.names()).unwrap();
        assert_eq!(back, iv);
    }
}
