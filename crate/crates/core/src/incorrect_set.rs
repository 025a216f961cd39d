//! Discovered incorrect transitions.
//!
//! [`ExactIncorrectSet`] stores `(state, action)` pairs directly.
//! [`HypersphereSet`] generalizes each discovery to a metric ball around the
//! state, one collection of balls per action, indexed by a KD-tree.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::kdtree::KdTree;
use crate::problem::{ActionId, Environment, IncorrectLookup, StateId};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExactIncorrectSet {
    pairs: HashSet<(StateId, ActionId)>,
}

impl ExactIncorrectSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `true` if the pair was not already present.
    pub fn insert(&mut self, s: StateId, a: ActionId) -> bool {
        self.pairs.insert((s, a))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Sorted pairs, for trace output.
    pub fn snapshot(&self) -> Vec<(StateId, ActionId)> {
        let mut v: Vec<_> = self.pairs.iter().copied().collect();
        v.sort();
        v
    }
}

impl IncorrectLookup for ExactIncorrectSet {
    fn contains(&self, s: StateId, a: ActionId) -> bool {
        self.pairs.contains(&(s, a))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Manhattan,
    Euclidean,
    Chebyshev,
    /// 0 for identical points, 1 otherwise.
    Discrete,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Chebyshev => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
            Metric::Discrete => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, Default)]
struct ActionSpheres {
    spheres: Vec<Sphere>,
    index: KdTree,
    /// Spheres inserted since the last index rebuild.
    pending: Vec<u32>,
    max_radius: f64,
    /// A discrete-metric ball of radius >= 1 covers every state.
    universal: bool,
}

/// Per-action unions of closed metric balls. Membership is inclusive:
/// `(s, a)` is incorrect iff `d(s, center) <= radius` for some ball of `a`.
#[derive(Clone, Debug)]
pub struct HypersphereSet {
    metric: Metric,
    dim: usize,
    per_action: Vec<ActionSpheres>,
}

/// Serializable view of a [`HypersphereSet`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypersphereSnapshot {
    pub metric: Metric,
    pub spheres: Vec<Vec<Sphere>>,
}

impl HypersphereSet {
    pub fn new(num_actions: usize, dim: usize, metric: Metric) -> Self {
        Self {
            metric,
            dim,
            per_action: (0..num_actions).map(|_| ActionSpheres::default()).collect(),
        }
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.per_action.iter().map(|a| a.spheres.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&mut self, center: Vec<f64>, a: ActionId, radius: f64) {
        assert!(radius >= 0.0, "negative hypersphere radius");
        assert_eq!(center.len(), self.dim, "center dimension mismatch");
        let slot = &mut self.per_action[a.index()];
        if self.metric == Metric::Discrete && radius >= 1.0 {
            slot.universal = true;
        }
        slot.max_radius = slot.max_radius.max(radius);
        slot.pending.push(slot.spheres.len() as u32);
        slot.spheres.push(Sphere { center, radius });
        if slot.pending.len() > 16 + slot.index.len() / 4 {
            let points = slot
                .spheres
                .iter()
                .enumerate()
                .map(|(i, s)| (s.center.clone(), i as u32))
                .collect();
            slot.index = KdTree::build(self.dim, points);
            slot.pending.clear();
        }
    }

    pub fn contains_point(&self, point: &[f64], a: ActionId) -> bool {
        let slot = &self.per_action[a.index()];
        if slot.universal {
            return true;
        }
        let inside = |s: &Sphere| self.metric.distance(point, &s.center) <= s.radius;
        if slot
            .pending
            .iter()
            .any(|&i| inside(&slot.spheres[i as usize]))
        {
            return true;
        }
        slot.index.any_within_box(point, slot.max_radius, |_, i| {
            inside(&slot.spheres[i as usize])
        })
    }

    /// Brute-force membership, kept as the reference for the index.
    pub fn contains_linear(&self, point: &[f64], a: ActionId) -> bool {
        self.per_action[a.index()]
            .spheres
            .iter()
            .any(|s| self.metric.distance(point, &s.center) <= s.radius)
    }

    pub fn snapshot(&self) -> HypersphereSnapshot {
        HypersphereSnapshot {
            metric: self.metric,
            spheres: self.per_action.iter().map(|a| a.spheres.clone()).collect(),
        }
    }

    /// Membership view that maps states to coordinates through `env`.
    pub fn lookup<'a, E: Environment + ?Sized>(&'a self, env: &'a E) -> HypersphereLookup<'a, E> {
        HypersphereLookup { set: self, env }
    }
}

pub struct HypersphereLookup<'a, E: ?Sized> {
    set: &'a HypersphereSet,
    env: &'a E,
}

impl<E: Environment + ?Sized> IncorrectLookup for HypersphereLookup<'_, E> {
    fn contains(&self, s: StateId, a: ActionId) -> bool {
        if self.set.per_action[a.index()].spheres.is_empty() {
            return false;
        }
        self.set.contains_point(&self.env.coordinates(s), a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_insert_then_query() {
        let mut x = ExactIncorrectSet::new();
        assert!(!x.contains(StateId(3), ActionId(1)));
        assert!(x.insert(StateId(3), ActionId(1)));
        assert!(!x.insert(StateId(3), ActionId(1)));
        assert!(x.contains(StateId(3), ActionId(1)));
        assert!(!x.contains(StateId(3), ActionId(2)));
        assert_eq!(x.len(), 1);
    }

    #[test]
    fn manhattan_ball_boundary_is_inclusive() {
        let mut x = HypersphereSet::new(2, 2, Metric::Manhattan);
        x.insert(vec![0.0, 0.0], ActionId(1), 3.0);
        assert!(x.contains_point(&[1.0, 2.0], ActionId(1)));
        assert!(!x.contains_point(&[2.0, 2.0], ActionId(1)));
        assert!(!x.contains_point(&[0.0, 0.0], ActionId(0)));
    }

    #[test]
    fn empty_set_contains_nothing() {
        let x = HypersphereSet::new(3, 2, Metric::Euclidean);
        assert!(!x.contains_point(&[0.0, 0.0], ActionId(2)));
    }

    #[test]
    fn index_matches_linear_scan_on_random_workload() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for metric in [Metric::Manhattan, Metric::Euclidean, Metric::Chebyshev] {
            let mut x = HypersphereSet::new(4, 3, metric);
            for _ in 0..2000 {
                let c: Vec<f64> = (0..3).map(|_| rng.gen_range(0..20) as f64).collect();
                x.insert(c, ActionId(rng.gen_range(0..4)), rng.gen_range(0..4) as f64);
                let q: Vec<f64> = (0..3).map(|_| rng.gen_range(0..20) as f64).collect();
                let a = ActionId(rng.gen_range(0..4));
                assert_eq!(x.contains_point(&q, a), x.contains_linear(&q, a));
            }
        }
    }

    proptest! {
        // Exact membership is the zero-radius discrete-metric special case.
        #[test]
        fn exact_equals_discrete_zero_radius(
            inserts in prop::collection::vec((0u32..30, 0u16..3), 0..40),
            queries in prop::collection::vec((0u32..30, 0u16..3), 1..40),
        ) {
            let mut exact = ExactIncorrectSet::new();
            let mut balls = HypersphereSet::new(3, 1, Metric::Discrete);
            for &(s, a) in &inserts {
                exact.insert(StateId(s), ActionId(a));
                balls.insert(vec![s as f64], ActionId(a), 0.0);
            }
            for &(s, a) in &queries {
                prop_assert_eq!(
                    exact.contains(StateId(s), ActionId(a)),
                    balls.contains_point(&[s as f64], ActionId(a))
                );
            }
        }

        #[test]
        fn membership_never_flips_back(
            ops in prop::collection::vec((0i32..10, 0i32..10, 0u16..2, 0u8..3), 1..60),
        ) {
            let mut x = HypersphereSet::new(2, 2, Metric::Manhattan);
            let probes: Vec<[f64; 2]> = (0..10)
                .flat_map(|i| (0..10).map(move |j| [i as f64, j as f64]))
                .collect();
            let mut seen = vec![[false; 2]; probes.len()];
            for (cx, cy, a, r) in ops {
                x.insert(vec![cx as f64, cy as f64], ActionId(a), r as f64);
                for (k, p) in probes.iter().enumerate() {
                    for act in 0..2u16 {
                        let now = x.contains_point(p, ActionId(act));
                        prop_assert!(now || !seen[k][act as usize]);
                        seen[k][act as usize] = now;
                    }
                }
            }
        }
    }
}
