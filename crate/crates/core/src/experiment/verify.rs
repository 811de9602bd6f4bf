//! Oracle suites behind `tofcorr verify`.
//!
//! Each check returns a [`Check`] instead of an error: a failing oracle is a
//! result to report, not a reason to stop.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annealer::{anneal, enumerate_ground_state, AnnealSchedule};
use crate::correlations::oracle::{
    completeness_residual, integrated_oracle_trace, povm_mc_oracle, Observable, PovmState,
};
use crate::correlations::{corr_closed_trace, correlation_from_cross_sum, povm_cross_sum, povm_denominator};
use crate::error::Result;
use crate::expansion::{density_fock_povm, fringe_wavevector, ExpansionContext};
use crate::model::{FockConfig, LatticeSpec};
use crate::numeric::{derive_seed, Compositions};

use super::config::VerifyLevel;

/// Fraction of annealer instances that must reach the exhaustive minimum.
pub const ANNEAL_HIT_RATE: f64 = 0.95;
pub const Z_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub level: VerifyLevel,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} level: {} checks, {failed} failed", self.level, self.checks.len())
    }
}

/// Normaliser used by a POVM closed form; the wrong ones are mutation fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PovmDenominator {
    /// (N+M)(N+M+1).
    Exact,
    /// (N+M)(N+M−1).
    ShiftedByOne,
    /// N(N−1), the trace normaliser.
    PairCount,
}

impl PovmDenominator {
    pub fn value(self, atoms: u32, sites: usize) -> f64 {
        let n = atoms as f64;
        let s = n + sites as f64;
        match self {
            Self::Exact => povm_denominator(atoms, sites),
            Self::ShiftedByOne => s * (s - 1.0),
            Self::PairCount => n * (n - 1.0),
        }
    }

    pub fn correlation(self, k: &FockConfig, u: f64) -> f64 {
        correlation_from_cross_sum(k.total(), povm_cross_sum(k, u), self.value(k.total(), k.sites()))
    }
}

fn fc(occ: &[u32]) -> FockConfig {
    FockConfig::new(occ.to_vec()).expect("non-empty occupation list")
}

pub fn verify(level: VerifyLevel, seed: u64) -> VerifyReport {
    let (max_sites, max_atoms, samples) = match level {
        VerifyLevel::Fast => (3, 4, 10_000),
        VerifyLevel::Full => (4, 6, 100_000),
    };
    let (integrated, povm): (Vec<FockConfig>, Vec<FockConfig>) = match level {
        VerifyLevel::Fast => (vec![fc(&[2, 1])], vec![fc(&[2, 1, 1])]),
        VerifyLevel::Full => {
            (vec![fc(&[2, 1]), fc(&[1, 1, 2]), fc(&[1, 2, 0, 3])], vec![fc(&[2, 1, 2]), fc(&[2, 1, 1, 2])])
        }
    };
    let instances = match level {
        VerifyLevel::Fast => 20,
        VerifyLevel::Full => 100,
    };

    let mut checks = vec![
        completeness_check(max_sites, max_atoms),
        completeness_mc_check(&fc(&[2, 1, 1]), samples, derive_seed(seed, 0)),
        annealer_check(instances, max_sites.max(2), max_atoms, 8, derive_seed(seed, 1)),
        integrated_check(&integrated, 20.0, 9, 0.01),
    ];
    if level == VerifyLevel::Full {
        checks.push(sigma_convergence_check(&fc(&[2, 1]), &[10.0, 20.0, 40.0]));
    }
    for (i, k) in povm.iter().enumerate() {
        let s = derive_seed(seed, 10 + i as u64);
        checks.push(povm_density_check(k, samples, s));
        checks.push(povm_pair_check(k, samples, s, PovmDenominator::Exact));
        checks.push(povm_pair_check(k, samples, s, PovmDenominator::PairCount));
        checks.push(povm_pair_check(k, samples, s, PovmDenominator::ShiftedByOne));
    }
    VerifyReport { level, checks }
}

/// Exhaustive completeness residual over every Fock state with M ≤ `max_sites`, N ≤ `max_atoms`.
pub fn completeness_check(max_sites: usize, max_atoms: u32) -> Check {
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for m in 1..=max_sites {
        for n in 0..=max_atoms {
            for occ in Compositions::new(n, m) {
                worst = worst.max(completeness_residual(&fc(&occ)).abs());
                count += 1;
            }
        }
    }
    Check::new(
        "completeness (exhaustive)",
        worst <= 1e-12,
        format!("{count} states with M<={max_sites}, N<={max_atoms}; max |residual| = {worst:.3e} (limit 1e-12)"),
    )
}

pub fn completeness_mc_check(k: &FockConfig, samples: usize, seed: u64) -> Check {
    Check::from_result(
        "completeness (Monte Carlo)",
        (|| {
            let ctx = ExpansionContext::with_defaults(k.sites(), 1.0)?;
            let est = povm_mc_oracle(&PovmState::Fock(k.clone()), &ctx, Observable::Unity, samples, seed)?;
            let z = est.z_score(1.0);
            Ok((
                z <= Z_LIMIT,
                format!("k={k}: {:.5} +- {:.1e} over {samples} samples, z = {z:.2}", est.estimate, est.std_error),
            ))
        })(),
    )
}

/// Seeded random instances with M ∈ [2, max_sites], N ∈ [1, max_atoms] and
/// U, V₂ ∈ [0, 10]; annealed with `restarts` restarts and compared to enumeration.
pub fn annealer_check(instances: usize, max_sites: usize, max_atoms: u32, restarts: usize, seed: u64) -> Check {
    Check::from_result(
        "annealer vs exhaustive",
        (|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut hits = 0;
            let mut undercuts = 0;
            for i in 0..instances {
                let m = rng.random_range(2..=max_sites);
                let n = rng.random_range(1..=max_atoms);
                let spec = LatticeSpec::new(m, rng.random_range(0.0..=10.0), rng.random_range(0.0..=10.0))?;
                let exact = enumerate_ground_state(&spec, n)?;
                let sched =
                    AnnealSchedule { restarts, ..AnnealSchedule::for_instance(&spec, n, derive_seed(seed, i as u64)) };
                let got = anneal(&spec, n, &sched)?;
                let tol = 1e-9 * exact.energy.abs().max(1.0);
                if got.energy < exact.energy - tol {
                    undercuts += 1;
                } else if got.energy <= exact.energy + tol {
                    hits += 1;
                }
            }
            let needed = (ANNEAL_HIT_RATE * instances as f64).ceil() as usize;
            Ok((
                hits >= needed && undercuts == 0,
                format!("{hits}/{instances} hit the exhaustive minimum (need {needed}), {undercuts} below it"),
            ))
        })(),
    )
}

/// Largest relative deviation of the site-centred integrated oracle from the
/// closed-form trace correlation over r ∈ [0, 4π/Q], σ = `sigma_factor`·M·d.
pub fn integrated_deviation(k: &FockConfig, sigma_factor: f64, r_points: usize) -> Result<f64> {
    let ctx = ExpansionContext::with_defaults(k.sites(), 1.0)?.with_sigma(sigma_factor * k.sites() as f64)?;
    let q = fringe_wavevector(&ctx);
    let mut worst = 0.0f64;
    for i in 0..r_points {
        let r = 4.0 * PI / q * i as f64 / (r_points - 1).max(1) as f64;
        let closed = corr_closed_trace(k, q * r)?;
        let brute = integrated_oracle_trace(k, &ctx, r)?;
        worst = worst.max((brute - closed).abs() / closed.abs());
    }
    Ok(worst)
}

pub fn integrated_check(ks: &[FockConfig], sigma_factor: f64, r_points: usize, tolerance: f64) -> Check {
    Check::from_result(
        "integrated brute force vs closed form",
        (|| {
            let mut parts = Vec::new();
            let mut ok = true;
            for k in ks {
                let dev = integrated_deviation(k, sigma_factor, r_points)?;
                ok &= dev <= tolerance;
                parts.push(format!("k={k} max rel dev {dev:.2e}"));
            }
            Ok((ok, format!("{} at sigma={sigma_factor}Md (limit {tolerance:e})", parts.join(", "))))
        })(),
    )
}

/// Deviation from the closed form must fall as σ grows.
pub fn sigma_convergence_check(k: &FockConfig, sigma_factors: &[f64]) -> Check {
    Check::from_result(
        "integrated oracle converges in sigma",
        (|| {
            let devs = sigma_factors.iter().map(|&s| integrated_deviation(k, s, 9)).collect::<Result<Vec<_>>>()?;
            let ok = devs.windows(2).all(|w| w[1] < w[0]);
            let listed: Vec<String> = sigma_factors.iter().zip(&devs).map(|(s, d)| format!("{s}Md: {d:.2e}")).collect();
            Ok((ok, format!("k={k}: {}", listed.join(", "))))
        })(),
    )
}

fn density_points(ctx: &ExpansionContext) -> [f64; 3] {
    let c = ctx.lattice_center();
    [c, c + 0.3 * ctx.sigma, c - 1.1 * ctx.sigma]
}

/// Separations with Q·r ∈ {0, π/2, π, 3π/2, 2π}.
fn pair_separations(ctx: &ExpansionContext) -> Vec<f64> {
    let q = fringe_wavevector(ctx);
    (0..5).map(|i| 0.5 * PI * i as f64 / q).collect()
}

pub fn povm_density_check(k: &FockConfig, samples: usize, seed: u64) -> Check {
    Check::from_result(
        "POVM density vs Monte Carlo",
        (|| {
            let ctx = ExpansionContext::with_defaults(k.sites(), 1.0)?;
            let mut worst = 0.0f64;
            for (i, x) in density_points(&ctx).into_iter().enumerate() {
                let est = povm_mc_oracle(
                    &PovmState::Fock(k.clone()),
                    &ctx,
                    Observable::Density(x),
                    samples,
                    derive_seed(seed, i as u64),
                )?;
                worst = worst.max(est.z_score(density_fock_povm(k, &ctx, x)));
            }
            Ok((worst <= Z_LIMIT, format!("k={k}: max z = {worst:.2} over 3 points, {samples} samples")))
        })(),
    )
}

/// Largest z-score of the Monte Carlo pair correlation against the closed
/// form built with `denominator`.
pub fn povm_pair_z(k: &FockConfig, samples: usize, seed: u64, denominator: PovmDenominator) -> Result<f64> {
    let ctx = ExpansionContext::with_defaults(k.sites(), 1.0)?;
    let q = fringe_wavevector(&ctx);
    let mut worst = 0.0f64;
    for (i, r) in pair_separations(&ctx).into_iter().enumerate() {
        let est = povm_mc_oracle(
            &PovmState::Fock(k.clone()),
            &ctx,
            Observable::PairCorrelation(r),
            samples,
            derive_seed(seed, i as u64),
        )?;
        worst = worst.max(est.z_score(denominator.correlation(k, q * r)));
    }
    Ok(worst)
}

/// With the exact normaliser the closed form must agree; with a mutated one
/// the same comparison must fail.
pub fn povm_pair_check(k: &FockConfig, samples: usize, seed: u64, denominator: PovmDenominator) -> Check {
    let mutant = denominator != PovmDenominator::Exact;
    let name =
        if mutant { format!("POVM pair mutant {denominator:?} rejected") } else { "POVM pair vs Monte Carlo".into() };
    let started = Instant::now();
    let r = povm_pair_z(k, samples, seed, denominator).map(|z| {
        let ok = if mutant { z > Z_LIMIT } else { z <= Z_LIMIT };
        (ok, format!("k={k}: max z = {z:.2} over 5 separations, {samples} samples"))
    });
    log::debug!("{name} took {:?}", started.elapsed());
    Check::from_result(&name, r)
}
