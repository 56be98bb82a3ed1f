use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{stable_hash, DocRef, Representation, Technique, TechniqueKind};
use crate::error::Result;
use crate::index::Scorer;

/// Uniform sample without replacement of `min(k, n)` items, in sampled order.
pub fn random_select<T: Clone>(candidates: &[T], k: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = candidates.to_vec();
    let take = k.min(pool.len());
    let (chosen, _) = pool.partial_shuffle(&mut rng, take);
    chosen.to_vec()
}

/// The random-selection baseline. Each query draws from its own stream,
/// seeded by the technique seed and a stable hash of the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSelector {
    pub seed: u64,
}

impl RandomSelector {
    pub fn new(seed: u64) -> Self {
        RandomSelector { seed }
    }
}

impl Technique for RandomSelector {
    fn kind(&self) -> TechniqueKind {
        TechniqueKind::Random
    }

    fn represent(&self, doc: DocRef<'_>) -> Result<Representation> {
        let key = match doc.id {
            Some(id) => stable_hash(&[b"id", id.as_bytes()]),
            None => stable_hash(&[b"text", doc.text.as_bytes()]),
        };
        Ok(Representation::Key(key))
    }

    fn scorer(&self) -> Scorer<'_> {
        Scorer::Random { seed: self.seed }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn five_distinct_of_ninety_nine() {
        let ids: Vec<u32> = (0..99).collect();
        let pick = random_select(&ids, 5, 13);
        assert_eq!(pick.len(), 5);
        assert_eq!(pick.iter().collect::<BTreeSet<_>>().len(), 5);
        assert_eq!(pick, random_select(&ids, 5, 13));
        assert_ne!(pick, random_select(&ids, 5, 14));
    }

    #[test]
    fn exhaustion_returns_everything() {
        let ids: Vec<u32> = (0..4).collect();
        let pick = random_select(&ids, 10, 1);
        assert_eq!(pick.iter().copied().collect::<BTreeSet<_>>(), ids.into_iter().collect());
        assert!(random_select::<u32>(&[], 5, 1).is_empty());
        assert!(random_select(&[1, 2], 0, 1).is_empty());
    }

    #[test]
    fn expected_precision_matches_hypergeometric_mean() {
        // 5 relevant among 99 candidates; E[hits / 5] = 5 / 99
        let ids: Vec<u32> = (0..99).collect();
        let relevant: BTreeSet<u32> = (0..5).collect();
        let trials = 20_000u64;
        let hits: usize = (0..trials)
            .map(|s| {
                random_select(&ids, 5, s)
                    .iter()
                    .filter(|i| relevant.contains(i))
                    .count()
            })
            .sum();
        let precision = hits as f64 / (5 * trials) as f64;
        assert!((precision - 5.0 / 99.0).abs() < 0.004, "{precision}");
    }

    #[test]
    fn every_candidate_is_reachable_uniformly() {
        let ids: Vec<u32> = (0..10).collect();
        let mut counts = [0u32; 10];
        for s in 0..5_000 {
            for i in random_select(&ids, 3, s) {
                counts[i as usize] += 1;
            }
        }
        // each id expected 1500 times
        assert!(counts.iter().all(|&c| (1300..1700).contains(&c)), "{counts:?}");
    }
}
