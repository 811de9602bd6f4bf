//! Small numerical helpers shared across modules.

use statrs::function::{factorial, gamma};

/// ln(n!): exact table below 171, Stirling-series log-gamma above.
pub fn ln_factorial(n: u64) -> f64 {
    factorial::ln_factorial(n)
}

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// Number of weak compositions of `n` into `parts` parts, C(n+parts−1, n).
/// Saturates at `u128::MAX`.
pub fn composition_count(n: u64, parts: usize) -> u128 {
    if parts == 0 {
        return u128::from(n == 0);
    }
    let k = parts as u128 - 1;
    let n = n as u128;
    // C(n+k, k), built up so every intermediate is an exact binomial.
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = match acc.checked_mul(n + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    acc
}

/// Iterates over all weak compositions of `total` into `parts` non-negative
/// parts in ascending lexicographic order, from `(0,…,0,total)` to `(total,0,…,0)`.
#[derive(Debug, Clone)]
pub struct Compositions {
    current: Option<Vec<u32>>,
}

impl Compositions {
    pub fn new(total: u32, parts: usize) -> Self {
        if parts == 0 {
            return Self { current: if total == 0 { Some(Vec::new()) } else { None } };
        }
        let mut first = vec![0; parts];
        first[parts - 1] = total;
        Self { current: Some(first) }
    }
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let out = self.current.take()?;
        let m = out.len();
        if m >= 2 {
            let mut suffix = 0u32;
            // rightmost i < m-1 with a non-empty suffix
            for i in (0..m - 1).rev() {
                suffix += out[i + 1];
                if suffix > 0 {
                    let mut next = out.clone();
                    next[i] += 1;
                    for slot in next.iter_mut().skip(i + 1) {
                        *slot = 0;
                    }
                    next[m - 1] = suffix - 1;
                    self.current = Some(next);
                    break;
                }
            }
        }
        Some(out)
    }
}

/// `n` evenly spaced points on `[lo, hi]` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| lo + step * i as f64).collect()
        }
    }
}

/// Composite trapezoid rule on a uniform grid with spacing `dx`.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            dx * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// SplitMix64 finaliser, used to derive independent child seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index.wrapping_add(1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_count_small() {
        assert_eq!(composition_count(2, 2), 3);
        assert_eq!(composition_count(3, 3), 10);
        assert_eq!(composition_count(5, 1), 1);
        assert_eq!(composition_count(0, 4), 1);
        assert_eq!(composition_count(170, 130), u128::MAX);
    }

    #[test]
    fn compositions_are_lexicographic_and_complete() {
        for (total, parts) in [(0u32, 3usize), (3, 3), (4, 2), (6, 4), (5, 1)] {
            let all: Vec<_> = Compositions::new(total, parts).collect();
            assert_eq!(all.len() as u128, composition_count(total as u64, parts));
            assert!(all.windows(2).all(|w| w[0] < w[1]));
            assert!(all.iter().all(|c| c.iter().sum::<u32>() == total));
            assert_eq!(all.last().unwrap()[0], total);
        }
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let xs = uniform_grid(0.0, 2.0, 11);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 1.0).collect();
        assert!((trapezoid(&ys, 0.2) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn ln_factorial_matches_direct_sum() {
        for n in [0u64, 1, 5, 20, 170, 300] {
            let direct: f64 = (1..=n).map(|i| (i as f64).ln()).sum();
            assert!((ln_factorial(n) - direct).abs() < 1e-9 * direct.max(1.0));
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..16).map(|i| derive_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(a.len(), b.len());
    }
}
