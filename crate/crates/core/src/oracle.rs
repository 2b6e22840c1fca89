//! Brute-force reference: the dense single-excitation Hamiltonian of an explicit ensemble.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use twofloat::TwoFloat;

use crate::chain::ChainEigen;
use crate::error::{Error, Result};
use crate::propagate::{evolve_with_eigen, EvolutionResult, Method, StateVector, TimeGrid};
use crate::recursion::{ChainCoefficients, ChainMode, Provenance, TERMINATION_RTOL};
use crate::spectra::{SpectralDistribution, Spin};

/// Largest ensemble the dense oracle will propagate.
pub const MAX_ORACLE_SPINS: usize = 5000;

/// Arrowhead matrix on {|0⟩ (photon), |1⟩..|N⟩ (spins)}:
/// H[0][0] = ω_c, H[j][j] = ω_j, H[0][j] = H[j][0] = g_j.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedHamiltonian {
    pub omega_c: f64,
    pub spins: Vec<Spin>,
    pub matrix: DMatrix<f64>,
}

pub fn build_restricted(ens: &SpectralDistribution, omega_c: f64) -> Result<RestrictedHamiltonian> {
    let spins = match ens {
        SpectralDistribution::Discrete { spins } => spins.clone(),
        _ => return Err(Error::unsupported("the oracle needs an explicit discrete ensemble")),
    };
    ens.validate()?;
    if !omega_c.is_finite() {
        return Err(Error::invalid("omega_c must be finite"));
    }
    let n = spins.len() + 1;
    let mut h = DMatrix::zeros(n, n);
    h[(0, 0)] = omega_c;
    for (j, s) in spins.iter().enumerate() {
        h[(j + 1, j + 1)] = s.omega;
        h[(0, j + 1)] = s.g;
        h[(j + 1, 0)] = s.g;
    }
    Ok(RestrictedHamiltonian { omega_c, spins, matrix: h })
}

impl RestrictedHamiltonian {
    /// N + 1.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn g_eff(&self) -> f64 {
        self.spins.iter().map(|s| s.g * s.g).sum::<f64>().sqrt()
    }

    /// g²-weighted mean frequency ω̄.
    pub fn center(&self) -> f64 {
        let w: f64 = self.spins.iter().map(|s| s.g * s.g).sum();
        self.spins.iter().map(|s| s.g * s.g * s.omega).sum::<f64>() / w
    }

    pub fn photon_state(&self) -> StateVector {
        StateVector::basis(self.dim(), 0).expect("dimension is at least 2")
    }

    /// Σ_j (g_j/g_eff)|j⟩.
    pub fn bright_state(&self) -> StateVector {
        let g = self.g_eff();
        let mut v = vec![0.0; self.dim()];
        for (j, s) in self.spins.iter().enumerate() {
            v[j + 1] = s.g / g;
        }
        StateVector::from_real(&v).expect("bright state is normalized")
    }

    /// E(Δⁿ) = Σ_j g_j² (ω_j − ω̄)ⁿ for n = 0..=k_max.
    pub fn ensemble_moments(&self, k_max: usize) -> Vec<f64> {
        let center = TwoFloat::from(self.center_dd());
        let mut out = vec![TwoFloat::from(0.0); k_max + 1];
        for s in &self.spins {
            let w = TwoFloat::from(s.g) * s.g;
            let d = TwoFloat::from(s.omega) - center;
            let mut p = w;
            for m in out.iter_mut() {
                *m += p;
                p *= d;
            }
        }
        out.into_iter().map(|v| v.hi() + v.lo()).collect()
    }

    fn center_dd(&self) -> TwoFloat {
        let mut w = TwoFloat::from(0.0);
        let mut m = TwoFloat::from(0.0);
        for s in &self.spins {
            let g2 = TwoFloat::from(s.g) * s.g;
            w += g2;
            m += g2 * s.omega;
        }
        m / w
    }
}

/// Coefficients plus the Krylov basis (columns φ_n in the full space).
#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub coeffs: ChainCoefficients,
    pub basis: DMatrix<Complex64>,
}

impl LanczosResult {
    /// max |Q†Q − 𝕀|.
    pub fn orthogonality_error(&self) -> f64 {
        let g = self.basis.adjoint() * &self.basis;
        let n = g.nrows();
        let mut e: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                e = e.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        e
    }
}

fn dot(a: &DVector<Complex64>, b: &DVector<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Lanczos on the dense Hamiltonian with two passes of full reorthogonalization per step.
/// A photon start yields cavity-coupled coefficients, any other start ensemble-only ones.
/// Breakdown (β ≤ 1e-13·scale) ends the chain early.
pub fn explicit_lanczos(h: &RestrictedHamiltonian, start: &StateVector, m: usize) -> Result<LanczosResult> {
    let dim = h.dim();
    if start.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: start.dim() });
    }
    if m == 0 {
        return Err(Error::invalid("chain length must be >= 1"));
    }
    if m > dim {
        return Err(Error::ChainExhausted { requested: m, available: dim });
    }
    let center = h.center();
    let scale = h
        .spins
        .iter()
        .flat_map(|s| [s.g.abs(), (s.omega - center).abs()])
        .chain(std::iter::once((h.omega_c - center).abs()))
        .fold(0.0, f64::max);
    let hc = h.matrix.map(|v| Complex64::new(v, 0.0));

    let mut basis: Vec<DVector<Complex64>> = vec![DVector::from_column_slice(start.amplitudes())];
    let mut alphas = Vec::with_capacity(m);
    let mut betas = Vec::with_capacity(m.saturating_sub(1));
    loop {
        let n = basis.len() - 1;
        let mut w = &hc * &basis[n];
        let a = dot(&basis[n], &w).re;
        alphas.push(a);
        if alphas.len() == m {
            break;
        }
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                w -= v * c;
            }
        }
        let b = w.norm();
        if b <= TERMINATION_RTOL * scale {
            break;
        }
        betas.push(b);
        basis.push(w / Complex64::new(b, 0.0));
    }

    let photon = start.amplitudes()[0].norm_sqr() == 1.0;
    let coeffs = ChainCoefficients {
        valid_order: betas.len(),
        alphas,
        betas,
        g_eff: h.g_eff(),
        center,
        mode: if photon { ChainMode::CavityCoupled } else { ChainMode::EnsembleOnly },
        provenance: Provenance::Lanczos,
        asymptotic_beta: None,
    };
    let basis = DMatrix::from_columns(&basis);
    Ok(LanczosResult { coeffs, basis })
}

/// Exact propagation by dense eigendecomposition. Refuses ensembles above [`MAX_ORACLE_SPINS`].
pub fn evolve_full(h: &RestrictedHamiltonian, psi0: &StateVector, times: &TimeGrid) -> Result<EvolutionResult> {
    if h.spins.len() > MAX_ORACLE_SPINS {
        return Err(Error::SizeGuard(format!(
            "oracle is limited to {MAX_ORACLE_SPINS} spins, got {}",
            h.spins.len()
        )));
    }
    let dim = h.dim();
    let eig = SymmetricEigen::try_new(h.matrix.clone(), f64::EPSILON, 1000 * dim).ok_or(Error::NoConvergence {
        dim,
        norm: h.matrix.iter().map(|v| v.abs()).fold(0.0, f64::max),
    })?;
    let eig = ChainEigen { values: eig.eigenvalues, vectors: eig.eigenvectors };
    evolve_with_eigen(&eig, psi0, times, Method::FullSpace)
}

/// c_n(t) = ⟨φ_n|ψ(t)⟩ for each Krylov basis vector.
pub fn project(full: &EvolutionResult, basis: &DMatrix<Complex64>) -> Result<EvolutionResult> {
    if full.dim() != basis.nrows() {
        return Err(Error::DimensionMismatch { expected: basis.nrows(), got: full.dim() });
    }
    let amplitudes = &full.amplitudes * basis.map(|c| c.conj());
    let rows = (0..amplitudes.nrows())
        .map(|k| amplitudes.row(k).iter().copied().collect())
        .collect();
    Ok(EvolutionResult::from_rows(&full.times, rows, Method::FullSpace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ens(pairs: &[(f64, f64)]) -> SpectralDistribution {
        SpectralDistribution::discrete(pairs.iter().map(|&(omega, g)| Spin { omega, g }).collect()).unwrap()
    }

    #[test]
    fn single_spin_matrix() {
        let h = build_restricted(&ens(&[(0.0, 0.3)]), 0.0).unwrap();
        assert_eq!(h.matrix, DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.3, 0.0]));
        let l = explicit_lanczos(&h, &h.photon_state(), 2).unwrap();
        assert_eq!(l.coeffs.len(), 2);
        assert!(matches!(
            explicit_lanczos(&h, &h.photon_state(), 3),
            Err(Error::ChainExhausted { requested: 3, available: 2 })
        ));
    }

    #[test]
    fn symmetric_detuning_has_dark_zero() {
        let (g, d) = (0.4, 1.3);
        let h = build_restricted(&ens(&[(-d, g), (d, g)]), 0.0).unwrap();
        let mut e: Vec<f64> = h.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        let r = (2.0 * g * g + d * d).sqrt();
        assert_relative_eq!(e[0], -r, epsilon = 1e-14);
        assert_relative_eq!(e[1], 0.0, epsilon = 1e-14);
        assert_relative_eq!(e[2], r, epsilon = 1e-14);
    }

    #[test]
    fn lanczos_first_terms() {
        let pairs = [(-0.7, 0.2), (0.1, 0.5), (0.4, 0.3), (1.2, 0.1)];
        let e = ens(&pairs);
        let h = build_restricted(&e, 0.25).unwrap();
        let l = explicit_lanczos(&h, &h.photon_state(), 4).unwrap();
        let g_eff = pairs.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt();
        assert_relative_eq!(l.coeffs.alphas[0], 0.25, epsilon = 1e-15);
        assert_relative_eq!(l.coeffs.betas[0], g_eff, epsilon = 1e-15);
        // φ_2 ∝ g_j (ω_j − ω̄) up to sign.
        let wbar = h.center();
        let raw: Vec<f64> = pairs.iter().map(|p| p.1 * (p.0 - wbar)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let sign = l.basis[(1, 2)].re.signum() * raw[0].signum();
        for (j, r) in raw.iter().enumerate() {
            assert!((l.basis[(j + 1, 2)] - Complex64::new(sign * r / norm, 0.0)).norm() < 1e-13);
        }
        assert!(l.orthogonality_error() < 1e-13);
    }

    #[test]
    fn moments_match_spectra() {
        let e = ens(&[(-0.7, 0.2), (0.1, 0.5), (0.4, 0.3), (1.2, 0.1)]);
        let h = build_restricted(&e, 0.0).unwrap();
        let a = h.ensemble_moments(6);
        let b = e.moments(6).unwrap();
        for k in 0..=6 {
            assert_relative_eq!(a[k], b.get(k), epsilon = 1e-15, max_relative = 1e-15);
        }
        assert_relative_eq!(a[0], h.g_eff().powi(2), epsilon = 1e-15);
    }

    #[test]
    fn full_evolution_identity_and_dark_state() {
        let e = ens(&[(0.5, 0.3), (0.5, 0.3), (0.5, 0.3)]);
        let h = build_restricted(&e, 0.0).unwrap();
        let times = TimeGrid::linspace(0.0, 8.0, 17).unwrap();
        let r = evolve_full(&h, &h.photon_state(), &times).unwrap();
        assert!((r.amplitudes[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        // (|1⟩ − |2⟩)/√2 is orthogonal to the photon and the bright state.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let dark = StateVector::from_real(&[0.0, s, -s, 0.0]).unwrap();
        let r = evolve_full(&h, &dark, &times).unwrap();
        for k in 0..times.len() {
            let overlap = (r.amplitudes[(k, 1)] * s - r.amplitudes[(k, 2)] * s).norm_sqr();
            assert_relative_eq!(overlap, 1.0, epsilon = 1e-12);
        }
        assert!(r.norm_drift < 1e-12);
    }

    #[test]
    fn bright_start_is_ensemble_only() {
        let e = ens(&[(-0.7, 0.2), (0.1, 0.5), (0.4, 0.3)]);
        let h = build_restricted(&e, 0.0).unwrap();
        let l = explicit_lanczos(&h, &h.bright_state(), 3).unwrap();
        assert_eq!(l.coeffs.mode, ChainMode::EnsembleOnly);
        // Starting inside the spin block, the first step reaches the photon.
        assert_relative_eq!(l.coeffs.betas[0].powi(2), h.g_eff().powi(2) + {
            let w = h.center();
            let m2: f64 = h.spins.iter().map(|s| s.g * s.g * (s.omega - w).powi(2)).sum();
            m2 / h.g_eff().powi(2)
        }, epsilon = 1e-13);
    }

    #[test]
    fn rejects_continuous_input() {
        let g = SpectralDistribution::gaussian(0.0, 1.0).unwrap();
        assert!(matches!(build_restricted(&g, 0.0), Err(Error::Unsupported(_))));
    }
}
