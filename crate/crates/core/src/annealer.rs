//! Fixed-N energy minimisation over Fock configurations.
//!
//! The objective is E(k⃗) = Σ εⱼkⱼ + (U/2) Σ kⱼ(kⱼ−1) with Σ kⱼ = N. The main
//! solver is Metropolis simulated annealing with single-atom transfers between
//! arbitrary sites; exhaustive enumeration and greedy marginal-cost filling
//! serve as exact references.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::model::{energy_of, site_energies, FockConfig, LatticeSpec};
use crate::numeric::{composition_count, Compositions};

/// Default refusal threshold for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: u128 = 5_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealSchedule {
    pub t0: f64,
    /// Multiplicative temperature factor applied after each stage.
    pub cooling: f64,
    pub stages: usize,
    /// One sweep is M proposed moves.
    pub sweeps_per_stage: usize,
    pub seed: u64,
    /// Independent runs; the best result is kept.
    pub restarts: usize,
}

impl AnnealSchedule {
    /// Defaults scaled to the instance: T0 = max(U, V₂, max|offset|)·N.
    pub fn for_instance(spec: &LatticeSpec, atoms: u32, seed: u64) -> Self {
        let offset_scale = spec.extra_offsets.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        let scale = spec.repulsion.max(spec.v2).max(offset_scale) * atoms as f64;
        Self {
            t0: if scale > 0.0 { scale } else { 1.0 },
            cooling: 0.95,
            stages: 400,
            sweeps_per_stage: 20,
            seed,
            restarts: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::InvalidInput(format!("T0 must be > 0, got {}", self.t0)));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::InvalidInput(format!("cooling must lie in (0,1), got {}", self.cooling)));
        }
        if self.stages == 0 || self.sweeps_per_stage == 0 || self.restarts == 0 {
            return Err(Error::InvalidInput("stages, sweeps_per_stage and restarts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealResult {
    pub config: FockConfig,
    pub energy: f64,
    pub accepted_moves: u64,
    pub proposed_moves: u64,
}

/// Picks a source uniformly among occupied sites and a target uniformly among
/// the other M−1 sites.
pub fn propose_move<R: Rng + ?Sized>(k: &FockConfig, rng: &mut R) -> Result<(usize, usize)> {
    let occ = k.occupations();
    if k.total() == 0 {
        return Err(Error::InvalidInput("cannot move atoms in an empty configuration".into()));
    }
    if occ.len() < 2 {
        return Err(Error::InvalidInput("moves need at least two sites".into()));
    }
    Ok(draw_move(occ, rng))
}

fn draw_move<R: Rng + ?Sized>(occ: &[u32], rng: &mut R) -> (usize, usize) {
    let m = occ.len();
    // rejection sampling is exactly uniform over occupied sites
    let src = loop {
        let s = rng.random_range(0..m);
        if occ[s] > 0 {
            break s;
        }
    };
    let mut dst = rng.random_range(0..m - 1);
    if dst >= src {
        dst += 1;
    }
    (src, dst)
}

/// ΔE = ε_dst − ε_src + U (k_dst − k_src + 1) for moving one atom src → dst.
pub fn energy_delta(k: &FockConfig, energies: &[f64], repulsion: f64, src: usize, dst: usize) -> Result<f64> {
    check_len(k.sites(), energies.len())?;
    let occ = k.occupations();
    if src >= occ.len() || dst >= occ.len() {
        return Err(Error::InvalidInput("site index out of range".into()));
    }
    if src == dst {
        return Err(Error::InvalidInput("source and target must differ".into()));
    }
    if occ[src] == 0 {
        return Err(Error::InvalidInput(format!("source site {src} is empty")));
    }
    Ok(delta_of(occ, energies, repulsion, src, dst))
}

#[inline]
fn delta_of(occ: &[u32], energies: &[f64], repulsion: f64, src: usize, dst: usize) -> f64 {
    energies[dst] - energies[src] + repulsion * (occ[dst] as f64 - occ[src] as f64 + 1.0)
}

/// Metropolis acceptance probability; zero temperature is the greedy limit.
pub fn acceptance_probability(delta: f64, temperature: f64) -> f64 {
    if delta <= 0.0 {
        1.0
    } else if temperature <= 0.0 {
        0.0
    } else {
        (-delta / temperature).exp()
    }
}

/// Anneals the lattice described by `spec` with `atoms` bosons.
pub fn anneal(spec: &LatticeSpec, atoms: u32, sched: &AnnealSchedule) -> Result<AnnealResult> {
    spec.validate()?;
    anneal_energies(&site_energies(spec), spec.repulsion, atoms, sched)
}

/// Annealing on an explicit site-energy vector. Each restart `r` draws from
/// ChaCha stream `r` of the schedule seed, so results do not depend on how
/// restarts are scheduled.
pub fn anneal_energies(energies: &[f64], repulsion: f64, atoms: u32, sched: &AnnealSchedule) -> Result<AnnealResult> {
    sched.validate()?;
    let start = FockConfig::most_balanced(atoms, energies)?;
    if energies.len() == 1 || atoms == 0 {
        let energy = energy_of(start.occupations(), energies, repulsion);
        return Ok(AnnealResult { config: start, energy, accepted_moves: 0, proposed_moves: 0 });
    }

    let mut best: Option<AnnealResult> = None;
    let mut accepted_total = 0;
    let mut proposed_total = 0;
    for run in 0..sched.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(sched.seed);
        rng.set_stream(run as u64);
        let r = anneal_once(start.clone(), energies, repulsion, sched, &mut rng);
        accepted_total += r.accepted_moves;
        proposed_total += r.proposed_moves;
        if best.as_ref().is_none_or(|b| r.energy < b.energy) {
            best = Some(r);
        }
    }
    let mut best = best.expect("restarts >= 1");
    best.accepted_moves = accepted_total;
    best.proposed_moves = proposed_total;
    Ok(best)
}

fn anneal_once(
    mut current: FockConfig,
    energies: &[f64],
    repulsion: f64,
    sched: &AnnealSchedule,
    rng: &mut ChaCha8Rng,
) -> AnnealResult {
    let m = energies.len();
    let mut energy = energy_of(current.occupations(), energies, repulsion);
    let mut best = current.clone();
    let mut best_energy = energy;
    let mut accepted = 0u64;
    let mut proposed = 0u64;
    let mut temperature = sched.t0;

    for _ in 0..sched.stages {
        for _ in 0..sched.sweeps_per_stage * m {
            let (src, dst) = draw_move(current.occupations(), rng);
            let delta = delta_of(current.occupations(), energies, repulsion, src, dst);
            proposed += 1;
            let accept = delta <= 0.0 || rng.random::<f64>() < acceptance_probability(delta, temperature);
            if accept {
                let occ = current.occupations_mut();
                occ[src] -= 1;
                occ[dst] += 1;
                energy += delta;
                accepted += 1;
                if energy < best_energy {
                    best_energy = energy;
                    best.clone_from(&current);
                }
            }
        }
        // resynchronise to keep the running sum from drifting
        energy = energy_of(current.occupations(), energies, repulsion);
        temperature *= sched.cooling;
    }

    let energy = energy_of(best.occupations(), energies, repulsion);
    AnnealResult { config: best, energy, accepted_moves: accepted, proposed_moves: proposed }
}

/// Exhaustive search over all C(N+M−1, N) configurations. Ties go to the
/// lexicographically smallest occupation vector.
pub fn enumerate_ground_state(spec: &LatticeSpec, atoms: u32) -> Result<AnnealResult> {
    spec.validate()?;
    enumerate_energies(&site_energies(spec), spec.repulsion, atoms, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_energies(energies: &[f64], repulsion: f64, atoms: u32, cap: u128) -> Result<AnnealResult> {
    if energies.is_empty() {
        return Err(Error::InvalidInput("no sites".into()));
    }
    let required = composition_count(atoms as u64, energies.len());
    if required > cap {
        return Err(Error::CapExceeded { required, cap });
    }
    let mut best: Option<(Vec<u32>, f64)> = None;
    let mut visited = 0u64;
    for occ in Compositions::new(atoms, energies.len()) {
        visited += 1;
        let e = energy_of(&occ, energies, repulsion);
        // lexicographic order of iteration keeps the first of equal minima
        let better = match &best {
            None => true,
            Some((_, be)) => e < *be - 1e-12 * be.abs().max(1.0),
        };
        if better {
            best = Some((occ, e));
        }
    }
    let (occ, energy) = best.expect("at least one composition");
    Ok(AnnealResult { config: FockConfig::new(occ)?, energy, accepted_moves: 0, proposed_moves: visited })
}

/// Exact minimiser by filling atoms one at a time into the site with the lowest
/// marginal cost εⱼ + U·kⱼ. Exact because the per-site cost is convex in kⱼ.
pub fn greedy_ground_state(energies: &[f64], repulsion: f64, atoms: u32) -> Result<AnnealResult> {
    if energies.is_empty() {
        return Err(Error::InvalidInput("no sites".into()));
    }
    if repulsion < 0.0 {
        return Err(Error::InvalidInput("greedy filling needs U >= 0".into()));
    }
    let mut occ = vec![0u32; energies.len()];
    let mut heap: BinaryHeap<Reverse<(OrdF64, usize)>> =
        energies.iter().enumerate().map(|(j, &e)| Reverse((OrdF64(e), j))).collect();
    for _ in 0..atoms {
        let Reverse((_, j)) = heap.pop().expect("heap holds every site");
        occ[j] += 1;
        heap.push(Reverse((OrdF64(energies[j] + repulsion * occ[j] as f64), j)));
    }
    let energy = energy_of(&occ, energies, repulsion);
    Ok(AnnealResult { config: FockConfig::new(occ)?, energy, accepted_moves: 0, proposed_moves: 0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fock_energy;
    use rand::SeedableRng;

    fn sched(seed: u64, restarts: usize, stages: usize, t0: f64) -> AnnealSchedule {
        AnnealSchedule { t0, cooling: 0.95, stages, sweeps_per_stage: 20, seed, restarts }
    }

    #[test]
    fn propose_move_single_occupied_site() {
        let k = FockConfig::new(vec![3, 0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(propose_move(&k, &mut rng).unwrap(), (0, 1));
        }
    }

    #[test]
    fn propose_move_uniform_source() {
        let k = FockConfig::new(vec![1, 1, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts = [0usize; 3];
        let draws = 30_000;
        for _ in 0..draws {
            let (s, d) = propose_move(&k, &mut rng).unwrap();
            assert_ne!(s, d);
            counts[s] += 1;
        }
        // binomial sd ≈ 82; allow 5 sd
        for c in counts {
            assert!((c as f64 - draws as f64 / 3.0).abs() < 410.0, "{counts:?}");
        }
    }

    #[test]
    fn propose_move_never_from_empty_site() {
        let k = FockConfig::new(vec![0, 2, 0, 1, 0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5000 {
            let (s, d) = propose_move(&k, &mut rng).unwrap();
            assert!(k.occupations()[s] > 0 && s != d);
        }
        assert!(propose_move(&FockConfig::new(vec![0, 0]).unwrap(), &mut rng).is_err());
    }

    #[test]
    fn energy_delta_examples() {
        let k = FockConfig::new(vec![2, 0]).unwrap();
        assert_eq!(energy_delta(&k, &[0.0, 0.0], 1.0, 0, 1).unwrap(), -1.0);
        let k = FockConfig::new(vec![1, 0]).unwrap();
        assert_eq!(energy_delta(&k, &[0.0, 5.0], 0.0, 0, 1).unwrap(), 5.0);
        let k = FockConfig::new(vec![2, 2, 2]).unwrap();
        assert_eq!(energy_delta(&k, &[0.0; 3], 2.5, 2, 0).unwrap(), 2.5);
        let k = FockConfig::new(vec![0, 2]).unwrap();
        assert!(energy_delta(&k, &[0.0; 2], 1.0, 0, 1).is_err());
    }

    #[test]
    fn energy_delta_matches_full_recompute() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let m = rng.random_range(2..8);
            let occ: Vec<u32> = (0..m).map(|_| rng.random_range(0..6)).collect();
            if occ.iter().all(|&x| x == 0) {
                continue;
            }
            let eps: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            let u = rng.random_range(0.0..10.0);
            let k = FockConfig::new(occ).unwrap();
            let (s, d) = propose_move(&k, &mut rng).unwrap();
            let delta = energy_delta(&k, &eps, u, s, d).unwrap();
            let mut after = k.clone();
            after.transfer(s, d).unwrap();
            let direct = fock_energy(&after, &eps, u).unwrap() - fock_energy(&k, &eps, u).unwrap();
            assert!((delta - direct).abs() < 1e-12, "{delta} vs {direct}");
        }
    }

    #[test]
    fn acceptance_greedy_limit() {
        assert_eq!(acceptance_probability(1e-9, 0.0), 0.0);
        assert_eq!(acceptance_probability(0.5, 1e-300), 0.0);
        assert_eq!(acceptance_probability(-1.0, 0.0), 1.0);
        assert!((acceptance_probability(1.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn anneal_balanced_when_no_offsets() {
        let eps = [0.0; 4];
        let r = anneal_energies(&eps, 2.0, 8, &sched(5, 2, 200, 16.0)).unwrap();
        assert_eq!(r.config.occupations(), &[2, 2, 2, 2]);
        // E = M (U/2)(N/M)(N/M − 1)
        assert_eq!(r.energy, 4.0 * 1.0 * 2.0 * 1.0);
        let exact = enumerate_energies(&eps, 2.0, 8, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(exact.energy, r.energy);
    }

    #[test]
    fn anneal_no_repulsion_piles_on_lowest_site() {
        let eps = [0.4, 0.1, 0.9, 0.3];
        let r = anneal_energies(&eps, 0.0, 6, &sched(11, 1, 200, 5.0)).unwrap();
        assert_eq!(r.config.occupations(), &[0, 6, 0, 0]);
    }

    #[test]
    fn anneal_two_sites_matches_scan() {
        let n = 9u32;
        for delta in [0.5, 2.0, 3.5, 7.0] {
            let eps = [0.0, delta];
            // independent scan over k2 = 0..N
            let best_scan = (0..=n)
                .map(|k2| {
                    let k1 = (n - k2) as f64;
                    let k2f = k2 as f64;
                    delta * k2f + 0.5 * (k1 * (k1 - 1.0) + k2f * (k2f - 1.0))
                })
                .fold(f64::INFINITY, f64::min);
            let r = anneal_energies(&eps, 1.0, n, &sched(3, 2, 200, 9.0 * delta.max(1.0))).unwrap();
            assert!((r.energy - best_scan).abs() < 1e-9, "delta={delta}: {} vs {best_scan}", r.energy);
        }
    }

    #[test]
    fn anneal_single_site_is_trivial() {
        let r = anneal_energies(&[2.0], 1.0, 5, &sched(0, 1, 10, 1.0)).unwrap();
        assert_eq!(r.config.occupations(), &[5]);
        assert_eq!(r.energy, 10.0 + 10.0);
    }

    #[test]
    fn anneal_is_reproducible_and_seed_sensitive() {
        let spec = LatticeSpec::new(12, 1.0, 4.0).unwrap();
        let s = AnnealSchedule { stages: 60, ..AnnealSchedule::for_instance(&spec, 17, 42) };
        let a = anneal(&spec, 17, &s).unwrap();
        let b = anneal(&spec, 17, &s).unwrap();
        assert_eq!(a, b);
        let c = anneal(&spec, 17, &AnnealSchedule { seed: 43, ..s }).unwrap();
        assert_ne!(a.accepted_moves, c.accepted_moves);
    }

    #[test]
    fn anneal_result_energy_is_recomputed() {
        let spec = LatticeSpec::new(30, 1.0, 6.0).unwrap();
        let s = AnnealSchedule { stages: 100, ..AnnealSchedule::for_instance(&spec, 45, 8) };
        let r = anneal(&spec, 45, &s).unwrap();
        let direct = fock_energy(&r.config, &site_energies(&spec), 1.0).unwrap();
        assert!((r.energy - direct).abs() <= 1e-9 * direct.abs().max(1.0));
        assert_eq!(r.config.total(), 45);
    }

    #[test]
    fn schedule_validation() {
        let good = sched(0, 1, 1, 1.0);
        assert!(good.validate().is_ok());
        assert!(AnnealSchedule { t0: 0.0, ..good.clone() }.validate().is_err());
        assert!(AnnealSchedule { cooling: 1.0, ..good.clone() }.validate().is_err());
        assert!(AnnealSchedule { restarts: 0, ..good.clone() }.validate().is_err());
        let spec = LatticeSpec::new(3, 0.0, 0.0).unwrap();
        assert_eq!(AnnealSchedule::for_instance(&spec, 4, 0).t0, 1.0);
    }

    #[test]
    fn enumeration_examples() {
        let r = enumerate_energies(&[0.0, 0.0], 1.0, 2, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(r.config.occupations(), &[1, 1]);
        assert_eq!(r.energy, 0.0);
        assert_eq!(r.proposed_moves, 3);

        let r = enumerate_energies(&[1.5], 1.0, 7, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(r.config.occupations(), &[7]);

        // all 10 compositions by hand: (3,0,0) → 3, (2,1,0) → 11, (1,1,1) → 20, ...
        let r = enumerate_energies(&[0.0, 10.0, 10.0], 1.0, 3, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(r.config.occupations(), &[3, 0, 0]);
        assert_eq!(r.energy, 3.0);
        assert_eq!(r.proposed_moves, 10);
    }

    #[test]
    fn enumeration_tie_break_is_lexicographic() {
        // U = 0 with equal offsets: every composition ties
        let r = enumerate_energies(&[1.0, 1.0, 1.0], 0.0, 2, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(r.config.occupations(), &[0, 0, 2]);
    }

    #[test]
    fn enumeration_refuses_above_cap() {
        let err = enumerate_energies(&[0.0; 20], 1.0, 20, 1000).unwrap_err();
        match err {
            Error::CapExceeded { required, cap } => {
                assert_eq!(cap, 1000);
                assert_eq!(required, composition_count(20, 20));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn greedy_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let m = rng.random_range(1..6);
            let n = rng.random_range(0..9);
            let eps: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..10.0)).collect();
            let u = rng.random_range(0.0..10.0);
            let g = greedy_ground_state(&eps, u, n).unwrap();
            let e = enumerate_energies(&eps, u, n, DEFAULT_ENUMERATION_CAP).unwrap();
            assert!((g.energy - e.energy).abs() < 1e-9);
        }
    }
}
