use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Per-hop delay: `max(1, base + U[0, jitter])` ticks, dropped with probability `drop_rate`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyModel {
    pub base: u64,
    pub jitter: u64,
    #[serde(default)]
    pub drop_rate: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel { base: 3, jitter: 2, drop_rate: 0.0 }
    }
}

impl LatencyModel {
    /// Delay for one hop, or `None` if the message is dropped.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Option<u64> {
        if self.drop_rate > 0.0 && rng.random::<f64>() < self.drop_rate {
            return None;
        }
        let jitter = if self.jitter > 0 { rng.random_range(0..=self.jitter) } else { 0 };
        Some((self.base + jitter).max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn delays_are_bounded_and_reproducible() {
        let m = LatencyModel::default();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100).map(|_| m.sample(&mut rng).unwrap()).collect::<Vec<_>>()
        };
        let a = draw(5);
        assert_eq!(a, draw(5));
        assert!(a.iter().all(|d| (3..=5).contains(d)));
        let zero = LatencyModel { base: 0, jitter: 0, drop_rate: 0.0 };
        assert_eq!(zero.sample(&mut ChaCha8Rng::seed_from_u64(0)), Some(1));
    }
}
