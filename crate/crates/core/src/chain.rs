//! The truncated tridiagonal Krylov Hamiltonian and its bond velocities.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::recursion::{ChainCoefficients, ChainMode};

/// Default truncation dimension.
pub const DEFAULT_DIM: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Frame {
    Lab,
    /// ω̄·𝕀 removed from the diagonal.
    #[default]
    Rotating,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::Lab => "lab",
            Frame::Rotating => "rotating",
        })
    }
}

impl std::str::FromStr for Frame {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lab" => Ok(Frame::Lab),
            "rotating" => Ok(Frame::Rotating),
            _ => Err(Error::invalid(format!("unknown frame '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovChain {
    coeffs: ChainCoefficients,
    frame: Frame,
    diag: Vec<f64>,
    offdiag: Vec<f64>,
    requested_dim: usize,
}

/// Local velocities v_i = 2|β_i| of every bond and the global bound 2·max|β_i|.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    pub v: Vec<f64>,
    pub v_max: f64,
    /// 2·lim β_n where the coefficients carry a closed-form limit.
    pub analytic_bound: Option<f64>,
}

/// Eigenpairs of the chain Hamiltonian, eigenvectors in the columns.
#[derive(Debug, Clone)]
pub struct ChainEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// Builds the M×M tridiagonal Hamiltonian (diagonal α, off-diagonal β). A chain whose
/// coefficients end early (zero β) is clipped to their length.
pub fn build_chain(coeffs: &ChainCoefficients, m: usize, frame: Frame) -> Result<KrylovChain> {
    if m < 2 {
        return Err(Error::invalid(format!("chain dimension must be >= 2, got {m}")));
    }
    let dim = m.min(coeffs.len());
    if dim < 2 {
        return Err(Error::invalid(format!(
            "coefficients describe a single site (length {}); nothing to build",
            coeffs.len()
        )));
    }
    let coeffs = coeffs.truncated(dim);
    let shift = match frame {
        Frame::Lab => 0.0,
        Frame::Rotating => coeffs.center,
    };
    Ok(KrylovChain {
        diag: coeffs.alphas.iter().map(|a| a - shift).collect(),
        offdiag: coeffs.betas.clone(),
        coeffs,
        frame,
        requested_dim: m,
    })
}

impl KrylovChain {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn requested_dim(&self) -> usize {
        self.requested_dim
    }

    /// `Some(requested)` when the chain was shortened.
    pub fn clipped_from(&self) -> Option<usize> {
        (self.requested_dim > self.dim()).then_some(self.requested_dim)
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn mode(&self) -> ChainMode {
        self.coeffs.mode
    }

    pub fn coefficients(&self) -> &ChainCoefficients {
        &self.coeffs
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diagonal(&self) -> &[f64] {
        &self.offdiag
    }

    /// Energy offset between lab and this frame.
    pub fn frame_shift(&self) -> f64 {
        match self.frame {
            Frame::Lab => 0.0,
            Frame::Rotating => self.coeffs.center,
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = self.diag[i];
        }
        for (i, &b) in self.offdiag.iter().enumerate() {
            h[(i, i + 1)] = b;
            h[(i + 1, i)] = b;
        }
        h
    }

    pub fn eigen(&self) -> Result<ChainEigen> {
        let h = self.matrix();
        let norm = h.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let dim = self.dim();
        let eig = SymmetricEigen::try_new(h, f64::EPSILON, 1000 * dim)
            .ok_or(Error::NoConvergence { dim, norm })?;
        Ok(ChainEigen { values: eig.eigenvalues, vectors: eig.eigenvectors })
    }

    pub fn velocity_profile(&self) -> VelocityProfile {
        let v: Vec<f64> = self.offdiag.iter().map(|b| 2.0 * b.abs()).collect();
        let v_max = v.iter().copied().fold(0.0, f64::max);
        let analytic_bound = self.coeffs.asymptotic_beta.map(|b| match self.coeffs.mode {
            ChainMode::EnsembleOnly => 2.0 * b,
            ChainMode::CavityCoupled => 2.0 * b.max(self.coeffs.g_eff),
        });
        VelocityProfile { v, v_max, analytic_bound }
    }

    /// Time for a front moving at v_max to cross the chain, M / v_max.
    pub fn t_reflect(&self) -> f64 {
        let v = self.velocity_profile().v_max;
        if v > 0.0 {
            self.dim() as f64 / v
        } else {
            f64::INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recursion::{assemble, closed_form_coefficients, stieltjes_coefficients};
    use crate::spectra::{SpectralDistribution, Spin};
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_three_site_rotating() {
        let g = SpectralDistribution::gaussian(5.0, 1.0).unwrap();
        let c = closed_form_coefficients(&g, 3).unwrap();
        let chain = build_chain(&c, 3, Frame::Rotating).unwrap();
        let h = chain.matrix();
        let s2 = 2f64.sqrt();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, s2, 0.0, s2, 0.0]);
        assert_relative_eq!(h, expected, epsilon = 1e-15);
        assert_eq!(h, h.transpose());
    }

    #[test]
    fn two_point_limit_is_clipped() {
        let d = SpectralDistribution::q_gaussian(0.0, 1.0, -1.0).unwrap();
        let c = closed_form_coefficients(&d, 10).unwrap();
        let chain = build_chain(&c, 10, Frame::Rotating).unwrap();
        assert_eq!(chain.dim(), 2);
        assert_eq!(chain.clipped_from(), Some(10));
    }

    #[test]
    fn homogeneous_ensemble_is_rabi() {
        let g = 0.7;
        let d = SpectralDistribution::discrete(vec![Spin { omega: 0.0, g: 0.5 * g }; 4]).unwrap();
        let ens = stieltjes_coefficients(&d, 1).unwrap();
        let c = assemble(&ens, 0.0, g).unwrap();
        let chain = build_chain(&c, 2, Frame::Lab).unwrap();
        let e = chain.eigen().unwrap();
        let mut vals: Vec<f64> = e.values.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        assert_relative_eq!(vals[1] - vals[0], 2.0 * g, epsilon = 1e-14);
    }

    #[test]
    fn rejects_short_chains() {
        let g = SpectralDistribution::gaussian(0.0, 1.0).unwrap();
        let c = closed_form_coefficients(&g, 4).unwrap();
        assert!(build_chain(&c, 1, Frame::Rotating).is_err());
    }

    #[test]
    fn velocity_examples() {
        let q0 = SpectralDistribution::q_gaussian(0.0, 1.0, 0.0).unwrap();
        let chain = build_chain(&closed_form_coefficients(&q0, 32).unwrap(), 32, Frame::Rotating).unwrap();
        let vp = chain.velocity_profile();
        assert!(vp.v.iter().all(|&v| v == 2.0));
        assert_eq!(vp.v_max, 2.0);
        assert_eq!(vp.analytic_bound, Some(2.0));

        let g = SpectralDistribution::gaussian(0.0, 1.0).unwrap();
        let chain = build_chain(&closed_form_coefficients(&g, 128).unwrap(), 128, Frame::Rotating).unwrap();
        assert_relative_eq!(chain.velocity_profile().v_max, 2.0 * 127f64.sqrt(), epsilon = 1e-14);

        let u = SpectralDistribution::uniform(0.0, 1.0).unwrap();
        let chain = build_chain(&closed_form_coefficients(&u, 400).unwrap(), 400, Frame::Rotating).unwrap();
        let last = *chain.velocity_profile().v.last().unwrap();
        assert_relative_eq!(last, 3f64.sqrt(), epsilon = 1e-5);
    }

    #[test]
    fn frame_shift_moves_spectrum() {
        let u = SpectralDistribution::uniform(3.0, 1.0).unwrap();
        let c = closed_form_coefficients(&u, 12).unwrap();
        let rot = build_chain(&c, 12, Frame::Rotating).unwrap().eigen().unwrap();
        let lab = build_chain(&c, 12, Frame::Lab).unwrap().eigen().unwrap();
        let mut a: Vec<f64> = rot.values.iter().copied().collect();
        let mut b: Vec<f64> = lab.values.iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(y - x, 3.0, epsilon = 1e-12);
        }
    }
}
