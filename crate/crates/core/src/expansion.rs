//! Ballistic expansion of Wannier packets and time-of-flight density profiles.
//!
//! After a long free flight every site's packet shares one envelope |w(x,t)|
//! and differs only by the quadratic phase m(x−xⱼ)²/(2ħt), with xⱼ = j·d for
//! 1-based site labels. The envelope is a normalised Gaussian of width σ.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CoherentSpec, FockConfig};
use crate::numeric::{trapezoid, uniform_grid};

/// Default number of points in a density-profile grid.
pub const DEFAULT_PROFILE_POINTS: usize = 1 << 14;
/// Profile grids span ±this many envelope widths around the lattice centre.
pub const PROFILE_HALF_WIDTH_SIGMAS: f64 = 6.0;

/// Which averaging rule turns repeated absorption images into a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Prescription {
    /// Operator mean value Tr[Ô ρ(t)].
    Trace,
    /// Coherent-state POVM average.
    Povm,
}

impl fmt::Display for Prescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Trace => "trace",
            Self::Povm => "povm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateKind {
    Fock,
    Coherent,
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fock => "fock",
            Self::Coherent => "coherent",
        })
    }
}

/// Where each evolved packet's envelope is centred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnvelopeModel {
    /// One envelope for every site, centred on the lattice centre (M+1)d/2.
    #[default]
    Common,
    /// Each packet centred on its own site xⱼ. Drops the common-envelope
    /// approximation; used by brute-force oracles to expose finite-σ effects.
    SiteCentered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionContext {
    pub mass: f64,
    pub time: f64,
    pub hbar: f64,
    pub spacing: f64,
    /// Width of |w(x,t)|² (standard deviation of the Gaussian density).
    pub sigma: f64,
    pub sites: usize,
}

impl ExpansionContext {
    pub fn new(mass: f64, time: f64, hbar: f64, spacing: f64, sigma: f64, sites: usize) -> Result<Self> {
        let ctx = Self { mass, time, hbar, spacing, sigma, sites };
        ctx.validate()?;
        Ok(ctx)
    }

    /// Unit mass, time and ħ with σ = 20·M·d.
    pub fn with_defaults(sites: usize, spacing: f64) -> Result<Self> {
        Self::new(1.0, 1.0, 1.0, spacing, 20.0 * sites as f64 * spacing, sites)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass", self.mass),
            ("time", self.time),
            ("hbar", self.hbar),
            ("spacing", self.spacing),
            ("sigma", self.sigma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.sites == 0 {
            return Err(Error::InvalidInput("expansion needs at least one site".into()));
        }
        let lattice_len = self.sites as f64 * self.spacing;
        if self.sigma < 5.0 * lattice_len {
            log::warn!(
                "envelope width {} is below 5·M·d = {}; the common-envelope picture is poor here",
                self.sigma,
                5.0 * lattice_len
            );
        }
        Ok(())
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.mass, self.time, self.hbar, self.spacing, sigma, self.sites)
    }

    pub fn lattice_center(&self) -> f64 {
        0.5 * (self.sites as f64 + 1.0) * self.spacing
    }

    /// Position of the 1-based site `j`.
    pub fn site_position(&self, j: usize) -> f64 {
        j as f64 * self.spacing
    }

    /// Uniform grid over ±6σ around the lattice centre.
    pub fn profile_grid(&self, points: usize) -> Vec<f64> {
        let c = self.lattice_center();
        let h = PROFILE_HALF_WIDTH_SIGMAS * self.sigma;
        uniform_grid(c - h, c + h, points)
    }

    fn phase_coefficient(&self) -> f64 {
        self.mass / (2.0 * self.hbar * self.time)
    }

    fn gaussian_density(&self, x: f64, center: f64) -> f64 {
        let z = (x - center) / self.sigma;
        (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * self.sigma)
    }

    /// |w(x,t)|² under the common-envelope model.
    pub fn envelope_density(&self, x: f64) -> f64 {
        self.gaussian_density(x, self.lattice_center())
    }

    /// |wⱼ(x,t)|² for the 1-based site `j` under `model`.
    pub fn site_density(&self, model: EnvelopeModel, j: usize, x: f64) -> f64 {
        match model {
            EnvelopeModel::Common => self.envelope_density(x),
            EnvelopeModel::SiteCentered => self.gaussian_density(x, self.site_position(j)),
        }
    }
}

/// Q = m·d / (ħ·t).
pub fn fringe_wavevector(ctx: &ExpansionContext) -> f64 {
    ctx.mass * ctx.spacing / (ctx.hbar * ctx.time)
}

/// wⱼ(x,t) = |w(x,t)| e^{i m (x−xⱼ)²/(2ħt)} for 1-based site `j`.
pub fn wannier_evolved(ctx: &ExpansionContext, j: usize, x: f64) -> Complex64 {
    wannier_evolved_with(ctx, EnvelopeModel::Common, j, x)
}

pub fn wannier_evolved_with(ctx: &ExpansionContext, model: EnvelopeModel, j: usize, x: f64) -> Complex64 {
    let dx = x - ctx.site_position(j);
    Complex64::from_polar(ctx.site_density(model, j, x).sqrt(), ctx.phase_coefficient() * dx * dx)
}

/// θⱼₗ(x) = Q (j−l)(x − d(j+l)/2) = arg wₗ − arg wⱼ.
pub fn relative_phase(ctx: &ExpansionContext, j: usize, l: usize, x: f64) -> f64 {
    let q = fringe_wavevector(ctx);
    let (jf, lf) = (j as f64, l as f64);
    q * (jf - lf) * (x - 0.5 * ctx.spacing * (jf + lf))
}

/// n_{ξ,φ}(x,t) = N |Σⱼ √ξⱼ e^{iφⱼ} wⱼ(x,t)|².
pub fn density_coherent(c: &CoherentSpec, atoms: u32, ctx: &ExpansionContext, x: f64) -> f64 {
    coherent_field(&c.amplitudes(), ctx, x).norm_sqr() * atoms as f64
}

/// Σⱼ aⱼ wⱼ(x,t) for precomputed single-particle amplitudes aⱼ.
pub(crate) fn coherent_field(amplitudes: &[Complex64], ctx: &ExpansionContext, x: f64) -> Complex64 {
    amplitudes.iter().enumerate().map(|(idx, a)| a * wannier_evolved(ctx, idx + 1, x)).sum()
}

/// Same density in the interference form
/// N|w|² {1 + 2 Σ_{j<l} √(ξⱼξₗ) cos(θⱼₗ − φⱼ + φₗ)}.
pub fn density_coherent_cosine(c: &CoherentSpec, atoms: u32, ctx: &ExpansionContext, x: f64) -> f64 {
    let (xi, phi) = (c.xi(), c.phi());
    let mut bracket = 1.0;
    for j in 0..xi.len() {
        for l in j + 1..xi.len() {
            let theta = relative_phase(ctx, j + 1, l + 1, x);
            bracket += 2.0 * (xi[j] * xi[l]).sqrt() * (theta - phi[j] + phi[l]).cos();
        }
    }
    atoms as f64 * ctx.envelope_density(x) * bracket
}

/// n_k(x,t) = Σⱼ kⱼ |wⱼ(x,t)|².
pub fn density_fock_trace(k: &FockConfig, ctx: &ExpansionContext, x: f64) -> f64 {
    density_fock_trace_with(k, |j| ctx.site_density(EnvelopeModel::Common, j, x))
}

/// ñ_k(x,t) = N/(N+M) Σⱼ (kⱼ+1) |wⱼ(x,t)|².
pub fn density_fock_povm(k: &FockConfig, ctx: &ExpansionContext, x: f64) -> f64 {
    density_fock_povm_with(k, |j| ctx.site_density(EnvelopeModel::Common, j, x))
}

/// Trace density with caller-supplied per-site |wⱼ|² (1-based `j`).
pub fn density_fock_trace_with(k: &FockConfig, site_density: impl Fn(usize) -> f64) -> f64 {
    k.occupations().iter().enumerate().map(|(idx, &kj)| kj as f64 * site_density(idx + 1)).sum()
}

/// POVM density with caller-supplied per-site |wⱼ|² (1-based `j`).
pub fn density_fock_povm_with(k: &FockConfig, site_density: impl Fn(usize) -> f64) -> f64 {
    let n = k.total() as f64;
    let m = k.sites() as f64;
    let sum: f64 = k.occupations().iter().enumerate().map(|(idx, &kj)| (kj as f64 + 1.0) * site_density(idx + 1)).sum();
    n / (n + m) * sum
}

/// A sampled density profile plus the tags and parameters written to its CSV header.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub x_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub prescription: Prescription,
    pub state: StateKind,
    pub params: Vec<(String, String)>,
}

impl DensityProfile {
    pub fn evaluate(
        x_grid: Vec<f64>,
        prescription: Prescription,
        state: StateKind,
        density: impl Fn(f64) -> f64,
    ) -> Self {
        let values = x_grid.iter().map(|&x| density(x)).collect();
        Self { x_grid, values, prescription, state, params: Vec::new() }
    }

    /// Trace or POVM profile of a Fock state on the default ±6σ grid.
    pub fn fock(k: &FockConfig, ctx: &ExpansionContext, prescription: Prescription, points: usize) -> Self {
        let grid = ctx.profile_grid(points);
        let mut p = match prescription {
            Prescription::Trace => {
                Self::evaluate(grid, prescription, StateKind::Fock, |x| density_fock_trace(k, ctx, x))
            }
            Prescription::Povm => Self::evaluate(grid, prescription, StateKind::Fock, |x| density_fock_povm(k, ctx, x)),
        };
        p.params = context_params(ctx);
        p.params.push(("N".into(), k.total().to_string()));
        p.params.push(("k".into(), k.to_string()));
        p
    }

    /// Coherent-state profile (both prescriptions agree up to O(1/N); the
    /// closed form is the trace value).
    pub fn coherent(c: &CoherentSpec, atoms: u32, ctx: &ExpansionContext, points: usize) -> Self {
        let mut p = Self::evaluate(ctx.profile_grid(points), Prescription::Trace, StateKind::Coherent, |x| {
            density_coherent(c, atoms, ctx, x)
        });
        p.params = context_params(ctx);
        p.params.push(("N".into(), atoms.to_string()));
        p
    }

    /// Trapezoidal integral over the grid (grid assumed uniform).
    pub fn integral(&self) -> f64 {
        if self.x_grid.len() < 2 {
            return 0.0;
        }
        trapezoid(&self.values, self.x_grid[1] - self.x_grid[0])
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "# prescription={} state={}", self.prescription, self.state)?;
        for (k, v) in &self.params {
            write!(out, " {k}={v}")?;
        }
        writeln!(out)?;
        writeln!(out, "x,value")?;
        for (x, v) in self.x_grid.iter().zip(&self.values) {
            writeln!(out, "{x},{v}")?;
        }
        Ok(())
    }
}

fn context_params(ctx: &ExpansionContext) -> Vec<(String, String)> {
    vec![
        ("mass".into(), ctx.mass.to_string()),
        ("time".into(), ctx.time.to_string()),
        ("hbar".into(), ctx.hbar.to_string()),
        ("d".into(), ctx.spacing.to_string()),
        ("sigma".into(), ctx.sigma.to_string()),
        ("M".into(), ctx.sites.to_string()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn ctx(sites: usize) -> ExpansionContext {
        ExpansionContext::with_defaults(sites, 1.0).unwrap()
    }

    fn wrap(a: f64) -> f64 {
        (a + PI).rem_euclid(TAU) - PI
    }

    #[test]
    fn fringe_wavevector_examples() {
        let c = ExpansionContext::new(1.0, 1.0, 1.0, 1.0, 100.0, 2).unwrap();
        assert_eq!(fringe_wavevector(&c), 1.0);
        let slow = ExpansionContext::new(1.0, 2.0, 1.0, 1.0, 100.0, 2).unwrap();
        assert_eq!(fringe_wavevector(&slow), 0.5);
        let c = ExpansionContext::new(2.0, 6.0, 1.0, 3.0, 300.0, 2).unwrap();
        assert_eq!(fringe_wavevector(&c), 1.0);
    }

    #[test]
    fn context_rejects_non_positive() {
        assert!(ExpansionContext::new(0.0, 1.0, 1.0, 1.0, 10.0, 2).is_err());
        assert!(ExpansionContext::new(1.0, -1.0, 1.0, 1.0, 10.0, 2).is_err());
        assert!(ExpansionContext::new(1.0, 1.0, 1.0, 1.0, 10.0, 0).is_err());
        // narrow envelope only warns
        assert!(ExpansionContext::new(1.0, 1.0, 1.0, 1.0, 1.0, 4).is_ok());
    }

    #[test]
    fn wannier_common_envelope_and_zero_phase_at_site() {
        let c = ctx(5);
        for x in [-40.0, 0.3, 3.0, 17.5] {
            let m0 = wannier_evolved(&c, 1, x).norm();
            for j in 2..=5 {
                assert!((wannier_evolved(&c, j, x).norm() - m0).abs() < 1e-15);
            }
        }
        for j in 1..=5 {
            let w = wannier_evolved(&c, j, c.site_position(j));
            assert!(w.im.abs() < 1e-15 && w.re > 0.0);
        }
    }

    #[test]
    fn wannier_envelope_normalised() {
        let c = ctx(3);
        let grid = c.profile_grid(20001);
        let vals: Vec<f64> = grid.iter().map(|&x| wannier_evolved(&c, 2, x).norm_sqr()).collect();
        assert!((trapezoid(&vals, grid[1] - grid[0]) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn wannier_phase_difference_is_theta() {
        let c = ExpansionContext::new(1.3, 0.7, 1.0, 0.9, 200.0, 4).unwrap();
        for x in [-3.1, 0.0, 2.2, 11.0] {
            for (j, l) in [(1, 2), (1, 4), (3, 2)] {
                let d = wannier_evolved(&c, l, x).arg() - wannier_evolved(&c, j, x).arg();
                assert!(wrap(d - relative_phase(&c, j, l, x)).abs() < 1e-9, "x={x} j={j} l={l}");
            }
        }
    }

    #[test]
    fn coherent_forms_agree() {
        let c = ctx(4);
        let state = CoherentSpec::new(vec![0.1, 0.2, 0.3, 0.4], vec![0.0, 1.0, 2.5, 4.0]).unwrap();
        let env_peak = c.envelope_density(c.lattice_center());
        for x in uniform_grid(-50.0, 60.0, 1000) {
            let a = density_coherent(&state, 7, &c, x);
            let b = density_coherent_cosine(&state, 7, &c, x);
            assert!((a - b).abs() <= 1e-12 * 7.0 * env_peak, "x={x}: {a} vs {b}");
            assert!(a >= 0.0);
        }
    }

    #[test]
    fn coherent_single_site_has_no_fringes() {
        let c = ctx(1);
        let state = CoherentSpec::new(vec![1.0], vec![2.0]).unwrap();
        for x in [-5.0, 0.0, 1.0, 9.0] {
            let d = density_coherent(&state, 3, &c, x);
            assert!((d - 3.0 * c.envelope_density(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn two_site_fringes_have_period_two_pi_over_q() {
        let c = ExpansionContext::new(1.0, 2.0, 1.0, 1.0, 400.0, 2).unwrap();
        let q = fringe_wavevector(&c);
        let state = CoherentSpec::uniform(2).unwrap();
        // cos θ₁₂ = −1 ⇒ zero density
        let x0 = 1.5 + PI / q;
        assert!(density_coherent(&state, 4, &c, x0) < 1e-14);
        // local maxima of the fringe pattern near the centre
        let grid = uniform_grid(1.5 - 3.0 * TAU / q, 1.5 + 3.0 * TAU / q, 60001);
        let vals: Vec<f64> = grid.iter().map(|&x| density_coherent(&state, 4, &c, x)).collect();
        let maxima: Vec<f64> =
            (1..grid.len() - 1).filter(|&i| vals[i] > vals[i - 1] && vals[i] > vals[i + 1]).map(|i| grid[i]).collect();
        assert!(maxima.len() >= 5);
        let step = grid[1] - grid[0];
        for w in maxima.windows(2) {
            assert!((w[1] - w[0] - TAU / q).abs() < 2.0 * step, "{maxima:?}");
        }
    }

    #[test]
    fn global_phase_is_irrelevant() {
        let c = ctx(3);
        let a = CoherentSpec::new(vec![0.2, 0.5, 0.3], vec![0.1, 0.9, 2.0]).unwrap();
        let b = CoherentSpec::new(vec![0.2, 0.5, 0.3], vec![1.4, 2.2, 3.3]).unwrap();
        for x in uniform_grid(-30.0, 30.0, 101) {
            assert!((density_coherent(&a, 5, &c, x) - density_coherent(&b, 5, &c, x)).abs() < 1e-13);
        }
    }

    #[test]
    fn fock_trace_collapses_to_envelope() {
        let c = ctx(4);
        let k = FockConfig::new(vec![3, 0, 1, 2]).unwrap();
        let left = FockConfig::new(vec![6, 0, 0, 0]).unwrap();
        let right = FockConfig::new(vec![0, 0, 0, 6]).unwrap();
        for x in uniform_grid(-200.0, 200.0, 41) {
            let want = 6.0 * c.envelope_density(x);
            assert!((density_fock_trace(&k, &c, x) - want).abs() < 1e-15);
            assert_eq!(density_fock_trace(&left, &c, x), density_fock_trace(&right, &c, x));
        }
    }

    #[test]
    fn fock_povm_equals_trace_under_common_envelope() {
        let c = ctx(3);
        let k = FockConfig::new(vec![4, 0, 1]).unwrap();
        for x in uniform_grid(-100.0, 100.0, 51) {
            let t = density_fock_trace(&k, &c, x);
            let p = density_fock_povm(&k, &c, x);
            assert!((t - p).abs() <= 1e-14 * t.max(1e-300));
        }
    }

    #[test]
    fn povm_to_trace_site_weight_ratio() {
        // only site j carries density; the ratio isolates one term of each sum
        let k = FockConfig::new(vec![3, 1, 2]).unwrap();
        let (n, m) = (6.0, 3.0);
        for j in 1..=3 {
            let only_j = |site: usize| if site == j { 0.7 } else { 0.0 };
            let ratio = density_fock_povm_with(&k, only_j) / density_fock_trace_with(&k, only_j);
            let kj = k.occupations()[j - 1] as f64;
            assert!((ratio - (kj + 1.0) / kj * n / (n + m)).abs() < 1e-14);
        }
    }

    #[test]
    fn profiles_integrate_to_atom_number() {
        let c = ctx(3);
        let k = FockConfig::new(vec![2, 1, 3]).unwrap();
        for prescription in [Prescription::Trace, Prescription::Povm] {
            let p = DensityProfile::fock(&k, &c, prescription, DEFAULT_PROFILE_POINTS);
            assert!((p.integral() - 6.0).abs() <= 1e-4 * 6.0);
            assert!(p.values.iter().all(|&v| v >= 0.0));
        }
        let coh = CoherentSpec::new(vec![0.3, 0.3, 0.4], vec![0.0, 1.0, 2.0]).unwrap();
        let p = DensityProfile::coherent(&coh, 6, &c, DEFAULT_PROFILE_POINTS);
        assert!((p.integral() - 6.0).abs() <= 1e-4 * 6.0, "{}", p.integral());
    }

    #[test]
    fn profile_csv_layout() {
        let c = ctx(2);
        let k = FockConfig::new(vec![1, 1]).unwrap();
        let p = DensityProfile::fock(&k, &c, Prescription::Povm, 5);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# prescription=povm state=fock"));
        assert!(lines[0].contains("k=(1,1)"));
        assert_eq!(lines[1], "x,value");
        assert_eq!(lines.len(), 7);
    }
}
