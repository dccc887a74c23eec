use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How bands freed by users that already decoded are handed out.
///
/// Band `b` is owned by user `b`; owners always keep their own band while
/// they are still retransmitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationPolicy {
    /// Plain per-user HARQ. Freed bands go back to their owners, who start
    /// their next packet there.
    NonCoordinated,
    /// Two users: the user still retransmitting receives the partner's band.
    FullCoordinationK2,
    /// Three users: a single failed user receives every free band; with two
    /// failed users the free band goes to one of them chosen uniformly.
    RandomSplitK3,
    /// Any number of users: free bands (ascending) are dealt cyclically to the
    /// failed users starting from the lowest index. Not from the source model;
    /// provided so that `K > 3` has a deterministic default.
    RoundRobinGeneral,
}

impl AllocationPolicy {
    pub fn is_coordinated(self) -> bool {
        !matches!(self, AllocationPolicy::NonCoordinated)
    }

    /// The coordinated policy used by default for `users` users.
    pub fn coordinated_for(users: usize) -> Self {
        match users {
            2 => AllocationPolicy::FullCoordinationK2,
            3 => AllocationPolicy::RandomSplitK3,
            _ => AllocationPolicy::RoundRobinGeneral,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AllocationPolicy::NonCoordinated => "noncoord",
            AllocationPolicy::FullCoordinationK2 => "coord-k2",
            AllocationPolicy::RandomSplitK3 => "random-split-k3",
            AllocationPolicy::RoundRobinGeneral => "round-robin",
        }
    }
}

impl fmt::Display for AllocationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AllocationPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "noncoord" | "non-coordinated" | "none" => Ok(AllocationPolicy::NonCoordinated),
            "coord-k2" | "full-coordination-k2" => Ok(AllocationPolicy::FullCoordinationK2),
            "random-split-k3" => Ok(AllocationPolicy::RandomSplitK3),
            "round-robin" | "round-robin-general" => Ok(AllocationPolicy::RoundRobinGeneral),
            other => Err(Error::config(format!(
                "unknown policy `{other}` (expected noncoord, coord, coord-k2, random-split-k3 or round-robin)"
            ))),
        }
    }
}

/// Assigns `free_bands` to `failed` users.
///
/// With no failed users the bands revert to their owners (band `b` to user
/// `b`), which is also what the non-coordinated policy always does. The
/// returned map only covers `free_bands`.
pub fn policy_allocate<R: Rng + ?Sized>(
    failed: &[usize],
    free_bands: &[usize],
    policy: AllocationPolicy,
    rng: &mut R,
) -> Result<BTreeMap<usize, usize>> {
    let mut order: Vec<usize> = failed.to_vec();
    order.sort_unstable();
    order.dedup();
    let mut bands: Vec<usize> = free_bands.to_vec();
    bands.sort_unstable();
    let mut out = Vec::with_capacity(bands.len());
    allocate_into(&mut order, &bands, policy, rng, &mut out)?;
    Ok(out.into_iter().collect())
}

/// Allocation core without allocations of its own. `order` holds the failed
/// users in ascending order (it may be permuted), `bands` the free bands in
/// ascending order; `(band, user)` pairs are appended to `out`.
pub(crate) fn allocate_into<R: Rng + ?Sized>(
    order: &mut [usize],
    bands: &[usize],
    policy: AllocationPolicy,
    rng: &mut R,
    out: &mut Vec<(usize, usize)>,
) -> Result<()> {
    if bands.is_empty() {
        return Ok(());
    }
    if order.is_empty() || !policy.is_coordinated() {
        out.extend(bands.iter().map(|&b| (b, b)));
        return Ok(());
    }
    match policy {
        AllocationPolicy::NonCoordinated => unreachable!(),
        AllocationPolicy::FullCoordinationK2 => {
            if order.len() != 1 {
                return Err(Error::Protocol(format!(
                    "two-user coordination cannot split free bands among {} failed users",
                    order.len()
                )));
            }
        }
        AllocationPolicy::RandomSplitK3 => order.shuffle(rng),
        AllocationPolicy::RoundRobinGeneral => {}
    }
    out.extend(bands.iter().enumerate().map(|(i, &b)| (b, order[i % order.len()])));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::SeedTree;

    #[test]
    fn single_failed_user_takes_every_free_band() {
        let mut rng = SeedTree::new(1).policy_stream(0, 1);
        let a = policy_allocate(&[2], &[0, 1], AllocationPolicy::RandomSplitK3, &mut rng).unwrap();
        assert_eq!(a, BTreeMap::from([(0, 2), (1, 2)]));
        let a = policy_allocate(&[1], &[0], AllocationPolicy::FullCoordinationK2, &mut rng).unwrap();
        assert_eq!(a, BTreeMap::from([(0, 1)]));
    }

    #[test]
    fn random_split_is_uniform() {
        let seeds = SeedTree::new(4);
        let n = 100_000;
        let to_second = (0..n)
            .filter(|&t| {
                let mut rng = seeds.policy_stream(t, 2);
                let a = policy_allocate(&[1, 2], &[0], AllocationPolicy::RandomSplitK3, &mut rng).unwrap();
                a[&0] == 1
            })
            .count() as f64
            / n as f64;
        // 4 sigma of a fair coin at n = 1e5.
        assert!((to_second - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt(), "{to_second}");
    }

    #[test]
    fn no_failed_users_reverts_bands_to_owners() {
        let mut rng = SeedTree::new(0).policy_stream(0, 1);
        for p in [
            AllocationPolicy::NonCoordinated,
            AllocationPolicy::FullCoordinationK2,
            AllocationPolicy::RandomSplitK3,
            AllocationPolicy::RoundRobinGeneral,
        ] {
            assert!(policy_allocate(&[], &[], p, &mut rng).unwrap().is_empty());
            assert_eq!(
                policy_allocate(&[], &[0, 2], p, &mut rng).unwrap(),
                BTreeMap::from([(0, 0), (2, 2)])
            );
        }
        assert_eq!(
            policy_allocate(&[1], &[0], AllocationPolicy::NonCoordinated, &mut rng).unwrap(),
            BTreeMap::from([(0, 0)])
        );
    }

    #[test]
    fn round_robin_deals_from_lowest_failed_user() {
        let mut rng = SeedTree::new(0).policy_stream(0, 1);
        let a = policy_allocate(&[4, 1], &[3, 0, 2], AllocationPolicy::RoundRobinGeneral, &mut rng).unwrap();
        assert_eq!(a, BTreeMap::from([(0, 1), (2, 4), (3, 1)]));
    }

    #[test]
    fn full_coordination_rejects_ambiguous_split() {
        let mut rng = SeedTree::new(0).policy_stream(0, 1);
        assert!(matches!(
            policy_allocate(&[0, 1], &[2], AllocationPolicy::FullCoordinationK2, &mut rng),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn parse_round_trip() {
        for p in [
            AllocationPolicy::NonCoordinated,
            AllocationPolicy::FullCoordinationK2,
            AllocationPolicy::RandomSplitK3,
            AllocationPolicy::RoundRobinGeneral,
        ] {
            assert_eq!(p.as_str().parse::<AllocationPolicy>().unwrap(), p);
        }
        assert!("bogus".parse::<AllocationPolicy>().is_err());
    }
}
