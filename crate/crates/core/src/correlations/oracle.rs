//! Independent checks of the closed-form correlators.
//!
//! - [`two_point_fock_oracle`] applies the field operator to a Fock state twice
//!   and sums squared amplitudes over the reduced Fock basis.
//! - [`integrated_oracle_trace`] integrates that over the barycentre R with the
//!   trapezoid rule.
//! - [`povm_mc_oracle`] samples the coherent-state measure directly: ξ uniform on
//!   the simplex, φ uniform with the last phase pinned to zero.
//! - [`completeness_residual`] evaluates the resolution of the identity on a
//!   Fock state through the Dirichlet integral.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{check_len, Error, Result};
use crate::expansion::{
    coherent_field, density_coherent, density_fock_povm, density_fock_trace_with, fringe_wavevector, wannier_evolved,
    wannier_evolved_with, EnvelopeModel, ExpansionContext, PROFILE_HALF_WIDTH_SIGMAS,
};
use crate::model::{multinomial_weight, CoherentSpec, FockConfig};
use crate::numeric::{ln_factorial, ln_gamma, trapezoid, uniform_grid};

/// Largest instance the brute-force two-point oracle accepts.
pub const ORACLE_MAX_ATOMS: u32 = 6;
pub const ORACLE_MAX_SITES: usize = 4;
/// Largest instance the Monte Carlo oracle accepts.
pub const MC_MAX_ATOMS: u32 = 12;
pub const MC_MAX_SITES: usize = 4;
pub const MC_MIN_SAMPLES: usize = 10_000;

/// Grid points per fringe period for R-quadratures.
const POINTS_PER_FRINGE: f64 = 32.0;
const MIN_QUADRATURE_POINTS: usize = 2001;

fn check_oracle_size(k: &FockConfig) -> Result<()> {
    if k.total() > ORACLE_MAX_ATOMS || k.sites() > ORACLE_MAX_SITES {
        return Err(Error::TooLarge(format!(
            "two-point oracle limited to N <= {ORACLE_MAX_ATOMS}, M <= {ORACLE_MAX_SITES}; got N={}, M={}",
            k.total(),
            k.sites()
        )));
    }
    check_len(k.sites(), k.sites())
}

/// Applies ψ(y) = Σⱼ wⱼ(y) b̂ⱼ to a superposition of Fock states.
fn annihilate(state: &BTreeMap<Vec<u32>, Complex64>, w: &[Complex64]) -> BTreeMap<Vec<u32>, Complex64> {
    let mut out: BTreeMap<Vec<u32>, Complex64> = BTreeMap::new();
    for (occ, amp) in state {
        for (j, &kj) in occ.iter().enumerate() {
            if kj == 0 {
                continue;
            }
            let mut reduced = occ.clone();
            reduced[j] -= 1;
            *out.entry(reduced).or_default() += amp * (kj as f64).sqrt() * w[j];
        }
    }
    out
}

/// ⟨k⃗;N,t| ψ†(x)ψ†(x′)ψ(x)ψ(x′) |k⃗;N,t⟩ by brute force under `model`.
pub fn two_point_fock_oracle(
    k: &FockConfig,
    ctx: &ExpansionContext,
    model: EnvelopeModel,
    x: f64,
    x_prime: f64,
) -> Result<f64> {
    check_oracle_size(k)?;
    check_len(ctx.sites, k.sites())?;
    Ok(two_point_unchecked(k, ctx, model, x, x_prime))
}

fn two_point_unchecked(k: &FockConfig, ctx: &ExpansionContext, model: EnvelopeModel, x: f64, x_prime: f64) -> f64 {
    let wx: Vec<Complex64> = (1..=k.sites()).map(|j| wannier_evolved_with(ctx, model, j, x)).collect();
    let wxp: Vec<Complex64> = (1..=k.sites()).map(|j| wannier_evolved_with(ctx, model, j, x_prime)).collect();
    let mut state = BTreeMap::new();
    state.insert(k.occupations().to_vec(), Complex64::new(1.0, 0.0));
    let once = annihilate(&state, &wxp);
    let twice = annihilate(&once, &wx);
    twice.values().map(|a| a.norm_sqr()).sum()
}

/// Uniform barycentre grid over ±6σ fine enough for `max_wavevector`.
fn barycentre_grid(ctx: &ExpansionContext, max_wavevector: f64) -> Vec<f64> {
    let half = PROFILE_HALF_WIDTH_SIGMAS * ctx.sigma + ctx.sites as f64 * ctx.spacing;
    let step = TAU / (max_wavevector.max(1e-300) * POINTS_PER_FRINGE);
    let points = ((2.0 * half / step).ceil() as usize + 1).max(MIN_QUADRATURE_POINTS);
    let c = ctx.lattice_center();
    uniform_grid(c - half, c + half, points)
}

/// 𝒢(r) = ∫dR n(R−r/2, R+r/2) / ∫dR n(R−r/2) n(R+r/2), integrated numerically
/// from the brute-force two-point function with site-centred packets.
pub fn integrated_oracle_trace(k: &FockConfig, ctx: &ExpansionContext, r: f64) -> Result<f64> {
    integrated_oracle_trace_with(k, ctx, EnvelopeModel::SiteCentered, r)
}

pub fn integrated_oracle_trace_with(
    k: &FockConfig,
    ctx: &ExpansionContext,
    model: EnvelopeModel,
    r: f64,
) -> Result<f64> {
    check_oracle_size(k)?;
    check_len(ctx.sites, k.sites())?;
    if k.total() < 2 {
        return Err(Error::InvalidInput("pair correlations need N >= 2".into()));
    }
    let grid = barycentre_grid(ctx, fringe_wavevector(ctx));
    let dx = grid[1] - grid[0];
    let mut numerator = Vec::with_capacity(grid.len());
    let mut denominator = Vec::with_capacity(grid.len());
    for &centre in &grid {
        let (x, xp) = (centre - 0.5 * r, centre + 0.5 * r);
        numerator.push(two_point_unchecked(k, ctx, model, x, xp));
        let n_x = density_fock_trace_with(k, |j| ctx.site_density(model, j, x));
        let n_xp = density_fock_trace_with(k, |j| ctx.site_density(model, j, xp));
        denominator.push(n_x * n_xp);
    }
    Ok(trapezoid(&numerator, dx) / trapezoid(&denominator, dx))
}

/// ⟨k⃗|𝟙|k⃗⟩ − 1 using the coherent-state resolution of the identity. The phase
/// integrals are trivial on the diagonal; the ξ integral is the Dirichlet
/// integral Πⱼ kⱼ! / (N+M−1)!, evaluated through log-gamma.
pub fn completeness_residual(k: &FockConfig) -> f64 {
    let n = k.total() as u64;
    let m = k.sites() as u64;
    let prefactor = ln_factorial(n + m - 1) - ln_factorial(n);
    let overlap = ln_factorial(n) - k.occupations().iter().map(|&x| ln_factorial(x as u64)).sum::<f64>();
    let dirichlet = k.occupations().iter().map(|&x| ln_gamma(x as f64 + 1.0)).sum::<f64>() - ln_gamma((n + m) as f64);
    (prefactor + overlap + dirichlet).exp_m1()
}

/// Initial state ρ whose coherent-state distribution is sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum PovmState {
    Fock(FockConfig),
    /// Pure coherent state with the given atom number.
    Coherent(CoherentSpec, u32),
}

impl PovmState {
    fn atoms(&self) -> u32 {
        match self {
            Self::Fock(k) => k.total(),
            Self::Coherent(_, n) => *n,
        }
    }

    fn sites(&self) -> usize {
        match self {
            Self::Fock(k) => k.sites(),
            Self::Coherent(c, _) => c.sites(),
        }
    }

    /// ⟨ξ,φ;N| ρ |ξ,φ;N⟩.
    fn weight(&self, xi: &[f64], amplitudes: &[Complex64]) -> f64 {
        match self {
            Self::Fock(k) => multinomial_weight(k.occupations(), xi),
            Self::Coherent(c, n) => {
                let base: Complex64 = c.amplitudes().iter().zip(amplitudes).map(|(a, b)| a.conj() * b).sum();
                base.norm_sqr().powi(*n as i32)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    /// Observable ≡ 1: checks the normalisation of the measure.
    Unity,
    /// Density n_{ξ,φ}(x,t) at a point.
    Density(f64),
    /// Integrated, normalised pair correlation at separation r.
    PairCorrelation(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

impl McEstimate {
    /// |estimate − reference| in units of the standard error.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.estimate - reference).abs() / self.std_error
    }

    pub fn within(&self, reference: f64, sigmas: f64) -> bool {
        (self.estimate - reference).abs() <= sigmas * self.std_error
    }

    /// `key=value` lines for machine-readable reports.
    pub fn to_key_value(&self) -> String {
        format!("estimate={}\nstderr={}\nsamples={}\nseed={}\n", self.estimate, self.std_error, self.samples, self.seed)
    }
}

/// Inverse-variance weighted combination of independent estimates.
pub fn pool_estimates(parts: &[McEstimate]) -> Option<McEstimate> {
    let first = parts.first()?;
    let mut wsum = 0.0;
    let mut acc = 0.0;
    for p in parts {
        let w = 1.0 / (p.std_error * p.std_error);
        wsum += w;
        acc += w * p.estimate;
    }
    Some(McEstimate {
        estimate: acc / wsum,
        std_error: wsum.sqrt().recip(),
        samples: parts.iter().map(|p| p.samples).sum(),
        seed: first.seed,
    })
}

/// Tensor T[a,b,c,d] = ∫dR wₐ(x) w̄_b(x) w_c(x′) w̄_d(x′), x = R−r/2, x′ = R+r/2.
/// Sample-independent, so the per-sample pair integral reduces to a contraction.
fn pair_tensor(ctx: &ExpansionContext, sites: usize, r: f64) -> Vec<Complex64> {
    let q = fringe_wavevector(ctx);
    let grid = barycentre_grid(ctx, 2.0 * q * sites.saturating_sub(1).max(1) as f64);
    let dx = grid[1] - grid[0];
    let m = sites;
    let mut t = vec![Complex64::new(0.0, 0.0); m * m * m * m];
    let mut wx = vec![Complex64::new(0.0, 0.0); m];
    let mut wxp = vec![Complex64::new(0.0, 0.0); m];
    let last = grid.len() - 1;
    for (i, &centre) in grid.iter().enumerate() {
        let trap = if i == 0 || i == last { 0.5 } else { 1.0 };
        for j in 0..m {
            wx[j] = wannier_evolved(ctx, j + 1, centre - 0.5 * r);
            wxp[j] = wannier_evolved(ctx, j + 1, centre + 0.5 * r);
        }
        for a in 0..m {
            for b in 0..m {
                let left = wx[a] * wx[b].conj() * trap * dx;
                for c in 0..m {
                    for d in 0..m {
                        t[((a * m + b) * m + c) * m + d] += left * wxp[c] * wxp[d].conj();
                    }
                }
            }
        }
    }
    t
}

/// Monte Carlo estimate of ∫dμ(φ)dμ(ξ) ⟨ξ,φ|ρ|ξ,φ⟩ ⟨observable⟩_{ξ,φ}.
///
/// For [`Observable::PairCorrelation`] the sampled quantity is the POVM average
/// of ∫dR n_{ξ,φ}(x,x′), divided by ∫dR ñ(x)ñ(x′) from the closed-form POVM
/// density; only Fock states are supported there.
pub fn povm_mc_oracle(
    state: &PovmState,
    ctx: &ExpansionContext,
    observable: Observable,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let (n, m) = (state.atoms(), state.sites());
    if n > MC_MAX_ATOMS || m > MC_MAX_SITES {
        return Err(Error::TooLarge(format!(
            "Monte Carlo oracle limited to N <= {MC_MAX_ATOMS}, M <= {MC_MAX_SITES}; got N={n}, M={m}"
        )));
    }
    if samples < MC_MIN_SAMPLES {
        return Err(Error::InvalidInput(format!("need at least {MC_MIN_SAMPLES} samples, got {samples}")));
    }
    check_len(ctx.sites, m)?;

    // (N+M−1)!/N! from the measure, divided by the uniform simplex density (M−1)!.
    let norm = (ln_factorial((n as u64) + m as u64 - 1) - ln_factorial(n as u64) - ln_factorial(m as u64 - 1)).exp();

    let pair = match observable {
        Observable::PairCorrelation(r) => {
            let PovmState::Fock(k) = state else {
                return Err(Error::InvalidInput("pair-correlation sampling supports Fock states only".into()));
            };
            if n < 2 {
                return Err(Error::InvalidInput("pair correlations need N >= 2".into()));
            }
            let grid = barycentre_grid(ctx, fringe_wavevector(ctx));
            let dx = grid[1] - grid[0];
            let dens: Vec<f64> = grid
                .iter()
                .map(|&c| density_fock_povm(k, ctx, c - 0.5 * r) * density_fock_povm(k, ctx, c + 0.5 * r))
                .collect();
            Some((pair_tensor(ctx, m, r), trapezoid(&dens, dx)))
        }
        _ => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xi = vec![0.0; m];
    let mut amps = vec![Complex64::new(0.0, 0.0); m];
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..samples {
        let mut total = 0.0;
        for v in xi.iter_mut() {
            *v = rng.sample::<f64, _>(Exp1);
            total += *v;
        }
        for (j, v) in xi.iter_mut().enumerate() {
            *v /= total;
            let phase = if j + 1 == m { 0.0 } else { rng.random::<f64>() * TAU };
            amps[j] = Complex64::from_polar(v.sqrt(), phase);
        }
        let weight = norm * state.weight(&xi, &amps);
        let value = match (&observable, &pair) {
            (Observable::Unity, _) => 1.0,
            (Observable::Density(x), _) => coherent_field(&amps, ctx, *x).norm_sqr() * n as f64,
            (Observable::PairCorrelation(_), Some((tensor, _))) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..m {
                    for b in 0..m {
                        let ab = amps[a] * amps[b].conj();
                        for c in 0..m {
                            for d in 0..m {
                                acc += ab * amps[c] * amps[d].conj() * tensor[((a * m + b) * m + c) * m + d];
                            }
                        }
                    }
                }
                (n as f64) * (n as f64 - 1.0) * acc.re
            }
            (Observable::PairCorrelation(_), None) => unreachable!("tensor built above"),
        };
        // Welford update
        let y = weight * value;
        let delta = y - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (y - mean);
    }
    let variance = m2 / (samples - 1) as f64;
    let mut est = McEstimate { estimate: mean, std_error: (variance / samples as f64).sqrt(), samples, seed };
    if let Some((_, denominator)) = pair {
        est.estimate /= denominator;
        est.std_error /= denominator;
    }
    Ok(est)
}

/// n_{ξ′,φ′}(x) of a coherent state, for comparing with its POVM average.
pub fn coherent_reference_density(c: &CoherentSpec, atoms: u32, ctx: &ExpansionContext, x: f64) -> f64 {
    density_coherent(c, atoms, ctx, x)
}
