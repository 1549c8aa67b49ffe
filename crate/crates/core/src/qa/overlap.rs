//! Splitting datapoints between two annotators with a shared slice for
//! agreement checks.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorCode, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapPlan<T> {
    pub a_only: Vec<T>,
    pub b_only: Vec<T>,
    pub shared: Vec<T>,
}

/// `ceil(fraction * n)`, tolerant of binary representation error so that
/// e.g. `0.3 * 10` counts as exactly 3.
pub fn shared_count(n: usize, fraction: f64) -> Result<usize> {
    if !fraction.is_finite() || !(0.0..=1.0).contains(&fraction) {
        return Err(Error::new(
            ErrorCode::BadFraction,
            format!("overlap fraction {fraction} is outside [0, 1]"),
        ));
    }
    let exact = fraction * n as f64;
    let shared = (exact - 1e-9 * exact.max(1.0)).ceil().max(0.0) as usize;
    Ok(shared.min(n))
}

/// Partitions `items` into items for annotator a only, b only, and both.
///
/// `|shared| = ceil(fraction * n)`; the rest is split with `a_only` taking
/// the larger half. Which items are shared comes from a shuffle seeded by
/// `seed`, so equal inputs give equal plans. Each output keeps input order.
pub fn plan_overlap<T: Clone>(items: &[T], fraction: f64, seed: u64) -> Result<OverlapPlan<T>> {
    let n = items.len();
    let shared = shared_count(n, fraction)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let rest = n - shared;
    let a_len = rest.div_ceil(2);
    let mut shared_idx = order[..shared].to_vec();
    let mut a_idx = order[shared..shared + a_len].to_vec();
    let mut b_idx = order[shared + a_len..].to_vec();
    let pick = |idx: &mut Vec<usize>| -> Vec<T> {
        idx.sort_unstable();
        idx.iter().map(|&i| items[i].clone()).collect()
    };
    Ok(OverlapPlan {
        a_only: pick(&mut a_idx),
        b_only: pick(&mut b_idx),
        shared: pick(&mut shared_idx),
    })
}
