//! Integrated density-density correlation functions for Fock initial states.
//!
//! Curves are parameterised by the dimensionless phase u = Q·r. For an
//! occupation vector k⃗ with N atoms on M sites:
//!
//! ```text
//! trace:  G(u) = N(N−1)/N² · {1 + Σ_{i≠j} kᵢkⱼ e^{i(i−j)u} / (N(N−1))}
//! POVM:   G̃(u) = N(N−1)/N² · {1 + Σ_{i≠j} (kᵢ+1)(kⱼ+1) e^{i(i−j)u} / ((N+M)(N+M+1))}
//! ```
//!
//! The POVM denominator is the second moment of the coherent-state measure,
//! ∫dμ |⟨k⃗|ξ,φ⟩|² ξᵢξⱼ = (kᵢ+1)(kⱼ+1)/((N+M)(N+M+1)); the Monte Carlo oracle
//! in [`oracle`] samples exactly that integral.
//!
//! Cross sums are evaluated as |Σⱼ cⱼ e^{iju}|² − Σⱼ cⱼ², which is O(M) and
//! real by construction. The self-term δ(x−x′) is excluded throughout.

pub mod oracle;

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;

pub use oracle::{
    completeness_residual, integrated_oracle_trace, integrated_oracle_trace_with, pool_estimates, povm_mc_oracle,
    two_point_fock_oracle, McEstimate, Observable, PovmState,
};

use crate::error::{Error, Result};
use crate::expansion::Prescription;
use crate::model::FockConfig;

/// Wraps `u` into [−π, π].
pub fn reduce_phase(u: f64) -> f64 {
    u - TAU * (u / TAU).round()
}

/// Σ_{i≠j} cᵢcⱼ e^{i(i−j)u} for real weights `c` on consecutive sites.
pub fn weighted_cross_sum(weights: &[f64], u: f64) -> f64 {
    let v = reduce_phase(u);
    let mut field = Complex64::new(0.0, 0.0);
    let mut diag = 0.0;
    for (idx, &c) in weights.iter().enumerate() {
        field += Complex64::from_polar(c, (idx + 1) as f64 * v);
        diag += c * c;
    }
    field.norm_sqr() - diag
}

/// Trace cross sum Σ_{i≠j} kᵢkⱼ e^{i(i−j)u}.
pub fn trace_cross_sum(k: &FockConfig, u: f64) -> f64 {
    let w: Vec<f64> = k.occupations().iter().map(|&x| x as f64).collect();
    weighted_cross_sum(&w, u)
}

/// POVM cross sum Σ_{i≠j} (kᵢ+1)(kⱼ+1) e^{i(i−j)u}.
pub fn povm_cross_sum(k: &FockConfig, u: f64) -> f64 {
    let w: Vec<f64> = k.occupations().iter().map(|&x| x as f64 + 1.0).collect();
    weighted_cross_sum(&w, u)
}

/// N(N−1)/N² · (1 + cross/denominator).
pub fn correlation_from_cross_sum(atoms: u32, cross: f64, denominator: f64) -> f64 {
    let n = atoms as f64;
    n * (n - 1.0) / (n * n) * (1.0 + cross / denominator)
}

fn require_pairs(k: &FockConfig) -> Result<u32> {
    let n = k.total();
    if n < 2 {
        return Err(Error::InvalidInput(format!("pair correlations need N >= 2, got {n}")));
    }
    Ok(n)
}

/// Second-moment normaliser of the POVM cross sum, (N+M)(N+M+1).
pub fn povm_denominator(atoms: u32, sites: usize) -> f64 {
    let s = atoms as f64 + sites as f64;
    s * (s + 1.0)
}

pub fn corr_closed_trace(k: &FockConfig, u: f64) -> Result<f64> {
    let n = require_pairs(k)?;
    let nf = n as f64;
    Ok(correlation_from_cross_sum(n, trace_cross_sum(k, u), nf * (nf - 1.0)))
}

pub fn corr_closed_povm(k: &FockConfig, u: f64) -> Result<f64> {
    let n = require_pairs(k)?;
    Ok(correlation_from_cross_sum(n, povm_cross_sum(k, u), povm_denominator(n, k.sites())))
}

pub fn corr_closed(k: &FockConfig, prescription: Prescription, u: f64) -> Result<f64> {
    match prescription {
        Prescription::Trace => corr_closed_trace(k, u),
        Prescription::Povm => corr_closed_povm(k, u),
    }
}

/// Fejér ratio sin²(Mu/2)/sin²(u/2), equal to M² at u = 2πp.
pub fn fejer_ratio(sites: usize, u: f64) -> f64 {
    let m = sites as f64;
    let v = reduce_phase(u);
    if v.abs() < 1e-8 {
        // M²(1 − (M²−1)v²/12) + O(v⁴)
        return m * m * (1.0 - (m * m - 1.0) * v * v / 12.0);
    }
    let ratio = (0.5 * m * v).sin() / (0.5 * v).sin();
    ratio * ratio
}

/// Trace correlation of the balanced state kⱼ = N/M, via the Fejér kernel.
pub fn corr_balanced(atoms: u32, sites: usize, u: f64) -> Result<f64> {
    if sites == 0 || !(atoms as usize).is_multiple_of(sites) {
        return Err(Error::InvalidInput(format!("balanced filling needs M | N (N={atoms}, M={sites})")));
    }
    if atoms < 2 {
        return Err(Error::InvalidInput(format!("pair correlations need N >= 2, got {atoms}")));
    }
    let n = atoms as f64;
    let m = sites as f64;
    let filling = n / m;
    let cross = filling * filling * (fejer_ratio(sites, u) - m);
    Ok((n - 1.0) / n * (1.0 + cross / (n * (n - 1.0))))
}

/// A correlation function sampled on a u grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    pub u_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub prescription: Prescription,
    pub params: Vec<(String, String)>,
}

impl CorrelationCurve {
    pub fn evaluate(k: &FockConfig, prescription: Prescription, u_grid: Vec<f64>) -> Result<Self> {
        let values = u_grid.iter().map(|&u| corr_closed(k, prescription, u)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            u_grid,
            values,
            prescription,
            params: vec![
                ("N".into(), k.total().to_string()),
                ("M".into(), k.sites().to_string()),
                ("k".into(), k.to_string()),
            ],
        })
    }

    /// Uniform grid on (0, u_max]: the u = 0 self-peak is left out.
    pub fn default_grid(u_max: f64, points: usize) -> Vec<f64> {
        let step = u_max / points as f64;
        (1..=points).map(|i| step * i as f64).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "# prescription={}", self.prescription)?;
        for (k, v) in &self.params {
            write!(out, " {k}={v}")?;
        }
        if let (Some(first), Some(last)) = (self.u_grid.first(), self.u_grid.last()) {
            write!(out, " u_min={first} u_max={last} points={}", self.u_grid.len())?;
        }
        writeln!(out)?;
        writeln!(out, "u,value")?;
        for (u, v) in self.u_grid.iter().zip(&self.values) {
            writeln!(out, "{u},{v}")?;
        }
        Ok(())
    }
}

/// Main-peak heights above one at u = 2πp, from the cross sums' exact values
/// N² − Σkⱼ² and (N+M)² − Σ(kⱼ+1)².
pub fn main_peak_heights(k: &FockConfig) -> Result<(f64, f64)> {
    let n = require_pairs(k)?;
    let nf = n as f64;
    let m = k.sites() as f64;
    let sq: f64 = k.occupations().iter().map(|&x| (x as f64).powi(2)).sum();
    let sq1: f64 = k.occupations().iter().map(|&x| (x as f64 + 1.0).powi(2)).sum();
    let trace = correlation_from_cross_sum(n, nf * nf - sq, nf * (nf - 1.0)) - 1.0;
    let povm = correlation_from_cross_sum(n, (nf + m).powi(2) - sq1, povm_denominator(n, k.sites())) - 1.0;
    Ok((trace, povm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::uniform_grid;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn fc(v: &[u32]) -> FockConfig {
        FockConfig::new(v.to_vec()).unwrap()
    }

    /// Σ_{i≠j} cᵢcⱼ e^{i(i−j)u} by the explicit double sum, returned complex.
    fn double_sum(weights: &[f64], u: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &a) in weights.iter().enumerate() {
            for (j, &b) in weights.iter().enumerate() {
                if i != j {
                    acc += Complex64::from_polar(a * b, (i as f64 - j as f64) * u);
                }
            }
        }
        acc
    }

    #[test]
    fn trace_examples() {
        let k = fc(&[1, 1]);
        assert!((corr_closed_trace(&k, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(corr_closed_trace(&k, PI).unwrap().abs() < 1e-15);
        let single = fc(&[5, 0, 0, 0]);
        for u in [0.1, 1.0, 2.0 * PI, 7.3] {
            assert!((corr_closed_trace(&single, u).unwrap() - 0.8).abs() < 1e-15);
        }
        assert!(corr_closed_trace(&fc(&[1, 0]), 0.3).is_err());
    }

    #[test]
    fn povm_example_against_quadrature() {
        // M=2, N=2, k=(1,1), ξ=(s,1−s): measure 3·ds, weight |⟨k|ξ⟩|² = 2s(1−s).
        // Moment ∫dμ |⟨k|ξ⟩|² ξ₁ξ₂ = ∫₀¹ 6s²(1−s)² ds; Simpson is exact for a quartic.
        let n = 2000;
        let h = 1.0 / n as f64;
        let f = |s: f64| 6.0 * s * s * (1.0 - s) * (1.0 - s);
        let moment: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * f(i as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        // G̃(0) = N(N−1)/N² · (1 + Σ_{i≠j} moment), two ordered pairs
        let expected = 0.5 * (1.0 + 2.0 * moment);
        let got = corr_closed_povm(&fc(&[1, 1]), 0.0).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!((got - 0.7).abs() < 1e-15);
    }

    #[test]
    fn povm_is_two_pi_periodic() {
        let k = fc(&[3, 0, 2, 1]);
        for u in uniform_grid(-5.0, 5.0, 37) {
            let a = corr_closed_povm(&k, u).unwrap();
            let b = corr_closed_povm(&k, u + TAU).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn povm_trace_main_peak_gap_is_order_m_over_n() {
        for (n, m) in [(400u32, 4usize), (1000, 10), (4000, 8)] {
            let k = FockConfig::new(vec![n / m as u32; m]).unwrap();
            let gap = (corr_closed_povm(&k, TAU).unwrap() - corr_closed_trace(&k, TAU).unwrap()).abs();
            assert!(gap <= 2.0 * m as f64 / n as f64, "N={n} M={m} gap={gap}");
        }
    }

    #[test]
    fn balanced_examples() {
        let (n, m) = (12u32, 4usize);
        let nf = n as f64;
        let peak = (nf - 1.0) / nf * (1.0 + nf * (1.0 - 1.0 / m as f64) / (nf - 1.0));
        assert!((corr_balanced(n, m, TAU).unwrap() - peak).abs() < 1e-14);
        let f = nf / m as f64;
        let at_pi = (nf - 1.0) / nf * (1.0 - f * f * m as f64 / (nf * (nf - 1.0)));
        assert!((corr_balanced(n, m, PI).unwrap() - at_pi).abs() < 1e-14);
        assert!(corr_balanced(10, 4, 1.0).is_err());
    }

    #[test]
    fn balanced_agrees_with_trace() {
        for (n, m) in [(12u32, 4usize), (260, 130), (6, 3)] {
            let k = FockConfig::new(vec![n / m as u32; m]).unwrap();
            for u in CorrelationCurve::default_grid(6.0 * PI, 1000) {
                let a = corr_balanced(n, m, u).unwrap();
                let b = corr_closed_trace(&k, u).unwrap();
                assert!((a - b).abs() < 1e-12, "N={n} M={m} u={u}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn main_peak_identities() {
        let k = fc(&[3, 0, 1, 4, 2]);
        let (ht, hp) = main_peak_heights(&k).unwrap();
        for p in 1..=3 {
            let u = TAU * p as f64;
            assert!((corr_closed_trace(&k, u).unwrap() - 1.0 - ht).abs() < 1e-12);
            assert!((corr_closed_povm(&k, u).unwrap() - 1.0 - hp).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_occupations_keeps_shape() {
        let k = fc(&[2, 0, 1, 3]);
        let k3 = fc(&[6, 0, 3, 9]);
        let (n, n3) = (6.0, 18.0);
        for u in uniform_grid(0.05, 6.0, 50) {
            let shape = trace_cross_sum(&k, u) / (n * n);
            let shape3 = trace_cross_sum(&k3, u) / (n3 * n3);
            assert!((shape - shape3).abs() < 1e-12);
            // G − (N−1)/N is the normalised cross sum
            let g = corr_closed_trace(&k3, u).unwrap();
            assert!((g - (n3 - 1.0) / n3 - shape3).abs() < 1e-12);
        }
    }

    #[test]
    fn curve_csv_has_header() {
        let k = fc(&[1, 2]);
        let curve =
            CorrelationCurve::evaluate(&k, Prescription::Trace, CorrelationCurve::default_grid(TAU, 4)).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let head = lines.next().unwrap();
        assert!(head.starts_with("# prescription=trace N=3 M=2 k=(1,2)"));
        assert!(head.contains("points=4"));
        assert_eq!(lines.next().unwrap(), "u,value");
        assert_eq!(lines.count(), 4);
    }

    fn arb_fock() -> impl Strategy<Value = FockConfig> {
        proptest::collection::vec(0u32..8, 2..9)
            .prop_filter("need two atoms", |v| v.iter().sum::<u32>() >= 2)
            .prop_map(|v| FockConfig::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn curves_even_periodic_and_match_double_sum(k in arb_fock(), u in -20.0f64..20.0) {
            for p in [Prescription::Trace, Prescription::Povm] {
                let a = corr_closed(&k, p, u).unwrap();
                prop_assert!((a - corr_closed(&k, p, -u).unwrap()).abs() < 1e-10);
                prop_assert!((a - corr_closed(&k, p, u + TAU).unwrap()).abs() < 1e-10);
            }
            let w: Vec<f64> = k.occupations().iter().map(|&x| x as f64).collect();
            let direct = double_sum(&w, u);
            let scale = k.total() as f64 * k.total() as f64;
            prop_assert!(direct.im.abs() <= 1e-10 * scale);
            prop_assert!((direct.re - trace_cross_sum(&k, u)).abs() <= 1e-10 * scale);
        }

        #[test]
        fn dft_grid_matches(k in arb_fock()) {
            // |DFT|² of the zero-padded occupation sequence on a grid of L frequencies
            let l = 64usize;
            let occ: Vec<f64> = k.occupations().iter().map(|&x| x as f64).collect();
            let diag: f64 = occ.iter().map(|c| c * c).sum();
            for q in 0..l {
                let u = TAU * q as f64 / l as f64;
                let mut bin = Complex64::new(0.0, 0.0);
                for (j, &c) in occ.iter().enumerate() {
                    bin += c * Complex64::from_polar(1.0, -TAU * (q * (j + 1) % l) as f64 / l as f64);
                }
                prop_assert!((bin.norm_sqr() - diag - trace_cross_sum(&k, u)).abs() < 1e-10 * diag.max(1.0) * occ.len() as f64);
            }
        }
    }
}
