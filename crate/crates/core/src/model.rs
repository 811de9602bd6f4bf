//! Lattice parameters, many-body state representations and state overlaps.
//!
//! Energies carry no absolute unit. `U`, `V₂` and any per-site offsets must be
//! given in the same unit; the CLI documents them as h×kHz.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::numeric::ln_factorial;

/// Default wavelength ratio κ₂/κ₁ of the secondary lattice (830 nm / 1076 nm).
pub const DEFAULT_KAPPA_RATIO: f64 = 830.0 / 1076.0;

/// Geometry and Bose-Hubbard parameters of a one-dimensional bichromatic lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub sites: usize,
    pub spacing: f64,
    /// On-site repulsion U.
    pub repulsion: f64,
    /// Hopping J. Carried along for provenance only; it never enters the
    /// state-preparation energy.
    pub hopping: f64,
    /// Secondary-lattice strength V₂.
    pub v2: f64,
    pub kappa_ratio: f64,
    /// Per-site energy additions, empty meaning all zero.
    pub extra_offsets: Vec<f64>,
}

impl LatticeSpec {
    pub fn new(sites: usize, repulsion: f64, v2: f64) -> Result<Self> {
        let spec = Self {
            sites,
            spacing: 1.0,
            repulsion,
            hopping: 0.0,
            v2,
            kappa_ratio: DEFAULT_KAPPA_RATIO,
            extra_offsets: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_kappa_ratio(mut self, ratio: f64) -> Result<Self> {
        self.kappa_ratio = ratio;
        self.validate()?;
        Ok(self)
    }

    pub fn with_offsets(mut self, offsets: Vec<f64>) -> Result<Self> {
        self.extra_offsets = offsets;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::InvalidInput(format!("site count must be >= 2, got {}", self.sites)));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidInput(format!("lattice spacing must be > 0, got {}", self.spacing)));
        }
        if !(self.repulsion >= 0.0 && self.repulsion.is_finite()) {
            return Err(Error::InvalidInput(format!("repulsion U must be >= 0, got {}", self.repulsion)));
        }
        if !(self.v2 >= 0.0 && self.v2.is_finite()) {
            return Err(Error::InvalidInput(format!("V2 must be >= 0, got {}", self.v2)));
        }
        let reduced = self.reduced_kappa();
        if !(reduced > 0.0 && reduced < 1.0) {
            return Err(Error::InvalidInput(format!("kappa ratio must be non-integer, got {}", self.kappa_ratio)));
        }
        if !self.extra_offsets.is_empty() {
            check_len(self.sites, self.extra_offsets.len())?;
            if self.extra_offsets.iter().any(|e| !e.is_finite()) {
                return Err(Error::InvalidInput("site offsets must be finite".into()));
            }
        }
        Ok(())
    }

    /// κ₂/κ₁ reduced into [0, 1); sin² makes the integer part irrelevant.
    pub fn reduced_kappa(&self) -> f64 {
        self.kappa_ratio.rem_euclid(1.0)
    }
}

/// Integer occupation vector of a Fock state |k⃗; N⟩.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockConfig {
    occupations: Vec<u32>,
}

impl FockConfig {
    pub fn new(occupations: Vec<u32>) -> Result<Self> {
        if occupations.is_empty() {
            return Err(Error::InvalidInput("a Fock configuration needs at least one site".into()));
        }
        Ok(Self { occupations })
    }

    /// ⌊N/M⌋ atoms everywhere, remainder on the lowest-energy sites
    /// (ties broken by site index).
    pub fn most_balanced(atoms: u32, energies: &[f64]) -> Result<Self> {
        let m = energies.len();
        if m == 0 {
            return Err(Error::InvalidInput("no sites".into()));
        }
        let base = atoms / m as u32;
        let remainder = (atoms % m as u32) as usize;
        let mut occ = vec![base; m];
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]).then(a.cmp(&b)));
        for &site in order.iter().take(remainder) {
            occ[site] += 1;
        }
        Ok(Self { occupations: occ })
    }

    pub fn occupations(&self) -> &[u32] {
        &self.occupations
    }

    pub fn sites(&self) -> usize {
        self.occupations.len()
    }

    pub fn total(&self) -> u32 {
        self.occupations.iter().sum()
    }

    /// Moves one atom between sites. Fails if `src` is empty or indices are out of range.
    pub fn transfer(&mut self, src: usize, dst: usize) -> Result<()> {
        let m = self.sites();
        if src >= m || dst >= m {
            return Err(Error::InvalidInput(format!("site index out of range for {m} sites")));
        }
        if self.occupations[src] == 0 {
            return Err(Error::InvalidInput(format!("site {src} is empty")));
        }
        self.occupations[src] -= 1;
        self.occupations[dst] += 1;
        Ok(())
    }

    pub(crate) fn occupations_mut(&mut self) -> &mut [u32] {
        &mut self.occupations
    }
}

impl std::fmt::Display for FockConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.occupations.iter().map(u32::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Amplitudes ξ (a probability vector) and phases φ of a coherent-like state.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentSpec {
    xi: Vec<f64>,
    phi: Vec<f64>,
}

impl CoherentSpec {
    pub fn new(xi: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        check_len(xi.len(), phi.len())?;
        if xi.is_empty() {
            return Err(Error::InvalidInput("coherent state needs at least one site".into()));
        }
        if xi.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidInput("amplitudes xi must lie in [0, 1]".into()));
        }
        let sum: f64 = xi.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("amplitudes xi must sum to 1, got {sum}")));
        }
        if phi.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("phases must be finite".into()));
        }
        let phi = phi.into_iter().map(|p| p.rem_euclid(TAU)).collect();
        Ok(Self { xi, phi })
    }

    /// Equal amplitudes 1/M, all phases zero.
    pub fn uniform(sites: usize) -> Result<Self> {
        Self::new(vec![1.0 / sites as f64; sites], vec![0.0; sites])
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn sites(&self) -> usize {
        self.xi.len()
    }

    /// Single-particle amplitudes √ξⱼ e^{iφⱼ}.
    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.xi.iter().zip(&self.phi).map(|(&x, &p)| Complex64::from_polar(x.sqrt(), p)).collect()
    }
}

/// εᵢ = V₂ sin²(i π κ₂/κ₁) + offsetᵢ, with 1-based site labels i = 1..M.
pub fn site_energies(spec: &LatticeSpec) -> Vec<f64> {
    let kappa = spec.reduced_kappa();
    (0..spec.sites)
        .map(|idx| {
            let label = (idx + 1) as f64;
            let s = (label * PI * kappa).sin();
            let offset = spec.extra_offsets.get(idx).copied().unwrap_or(0.0);
            spec.v2 * s * s + offset
        })
        .collect()
}

/// E = Σⱼ εⱼkⱼ + (U/2) Σⱼ kⱼ(kⱼ−1).
pub fn fock_energy(k: &FockConfig, energies: &[f64], repulsion: f64) -> Result<f64> {
    check_len(k.sites(), energies.len())?;
    Ok(energy_of(k.occupations(), energies, repulsion))
}

pub(crate) fn energy_of(occ: &[u32], energies: &[f64], repulsion: f64) -> f64 {
    occ.iter()
        .zip(energies)
        .map(|(&kj, &eps)| {
            let kj = kj as f64;
            eps * kj + 0.5 * repulsion * kj * (kj - 1.0)
        })
        .sum()
}

/// ⟨ξ,φ;N | ξ′,φ′;N⟩ = (Σᵢ √(ξᵢξ′ᵢ) e^{i(φᵢ−φ′ᵢ)})^N.
pub fn coherent_overlap(a: &CoherentSpec, b: &CoherentSpec, atoms: u32) -> Result<Complex64> {
    check_len(a.sites(), b.sites())?;
    let base: Complex64 =
        a.xi.iter()
            .zip(&b.xi)
            .zip(a.phi.iter().zip(&b.phi))
            .map(|((&x, &y), (&p, &q))| Complex64::from_polar((x * y).sqrt(), p - q))
            .sum();
    Ok(base.powu(atoms))
}

/// ⟨k⃗;N | ξ,φ;N⟩ = √(N!/k⃗!) e^{i k⃗·φ} Πⱼ ξⱼ^{kⱼ/2}, with N = Σkⱼ.
pub fn fock_coherent_overlap(k: &FockConfig, c: &CoherentSpec) -> Result<Complex64> {
    check_len(k.sites(), c.sites())?;
    let Some(ln_weight) = ln_multinomial_weight(k.occupations(), c.xi()) else {
        return Ok(Complex64::new(0.0, 0.0));
    };
    let phase: f64 = k.occupations().iter().zip(c.phi()).map(|(&kj, &p)| kj as f64 * p).sum();
    Ok(Complex64::from_polar((0.5 * ln_weight).exp(), phase))
}

/// |⟨k⃗;N | ξ,φ;N⟩|² = (N!/k⃗!) Πⱼ ξⱼ^{kⱼ}; independent of the phases.
pub fn povm_weight(k: &FockConfig, c: &CoherentSpec) -> Result<f64> {
    check_len(k.sites(), c.sites())?;
    Ok(multinomial_weight(k.occupations(), c.xi()))
}

/// Multinomial probability of `occ` under cell probabilities `xi`.
pub fn multinomial_weight(occ: &[u32], xi: &[f64]) -> f64 {
    ln_multinomial_weight(occ, xi).map_or(0.0, f64::exp)
}

/// `None` when an occupied site has zero amplitude.
fn ln_multinomial_weight(occ: &[u32], xi: &[f64]) -> Option<f64> {
    let total: u64 = occ.iter().map(|&k| k as u64).sum();
    let mut acc = ln_factorial(total);
    for (&kj, &x) in occ.iter().zip(xi) {
        if kj == 0 {
            continue;
        }
        if x <= 0.0 {
            return None;
        }
        acc += kj as f64 * x.ln() - ln_factorial(kj as u64);
    }
    Some(acc)
}
