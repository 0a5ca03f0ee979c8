use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BehaviorKind {
    NavStack,
    Spinning,
    WrongWay,
}

impl BehaviorKind {
    pub const ALL: [BehaviorKind; 3] = [BehaviorKind::NavStack, BehaviorKind::Spinning, BehaviorKind::WrongWay];

    /// Scripted duration in seconds.
    pub fn duration(self) -> f64 {
        match self {
            BehaviorKind::NavStack => 40.0,
            BehaviorKind::Spinning | BehaviorKind::WrongWay => 20.0,
        }
    }

    /// Scripted duration in simulation ticks at `rate_hz`.
    pub fn duration_ticks(self, rate_hz: f64) -> u64 {
        (self.duration() * rate_hz).round() as u64
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BehaviorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BehaviorKind::NavStack => "NavStack",
            BehaviorKind::Spinning => "Spinning",
            BehaviorKind::WrongWay => "WrongWay",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorState {
    pub kind: BehaviorKind,
    pub started_at: f64,
}

impl BehaviorState {
    pub fn ends_at(&self) -> f64 {
        self.started_at + self.kind.duration()
    }
}

/// Failure behaviors always hand back to NavStack; NavStack picks one of the
/// two failure behaviors uniformly.
pub fn next_behavior<R: Rng + ?Sized>(current: BehaviorKind, rng: &mut R) -> BehaviorKind {
    match current {
        BehaviorKind::Spinning | BehaviorKind::WrongWay => BehaviorKind::NavStack,
        BehaviorKind::NavStack => {
            if rng.random_bool(0.5) {
                BehaviorKind::Spinning
            } else {
                BehaviorKind::WrongWay
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn failures_return_to_navstack() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(next_behavior(BehaviorKind::Spinning, &mut rng), BehaviorKind::NavStack);
        assert_eq!(next_behavior(BehaviorKind::WrongWay, &mut rng), BehaviorKind::NavStack);
    }

    #[test]
    fn navstack_split_is_even() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000;
        let spins = (0..n).filter(|_| next_behavior(BehaviorKind::NavStack, &mut rng) == BehaviorKind::Spinning).count();
        let frac = spins as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn durations() {
        assert_eq!(BehaviorKind::NavStack.duration_ticks(5.0), 200);
        assert_eq!(BehaviorKind::Spinning.duration_ticks(5.0), 100);
        assert_eq!(BehaviorKind::WrongWay.duration_ticks(5.0), 100);
    }
}
