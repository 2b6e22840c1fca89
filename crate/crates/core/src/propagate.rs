//! Time evolution on the Krylov chain.
//!
//! Three propagators are provided and cross-checked in the tests:
//! eigendecomposition of the tridiagonal Hamiltonian, the closed-form
//! Laguerre propagator of the Gaussian (harmonic-oscillator) chain, and the
//! spectral integral ∫ e^{−ixt} π_n π_m dμ evaluated by Gauss quadrature.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use num_traits::Float;
use twofloat::TwoFloat;

use crate::chain::{build_chain, ChainEigen, Frame, KrylovChain};
use crate::error::{Error, Result};
use crate::recursion::{closed_form_coefficients, stieltjes_coefficients, ChainCoefficients, ChainMode};
use crate::spectra::SpectralDistribution;

/// Unit-norm tolerance for a freshly constructed state.
pub const STATE_NORM_TOL: f64 = 1e-12;

/// σt beyond which Laguerre values are accumulated in double-double.
pub const LAGUERRE_EXTENDED_ABOVE: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
        if amps.is_empty() || (norm - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::invalid(format!("state must be normalized, |psi|^2 = {norm}")));
        }
        Ok(StateVector { amps })
    }

    pub fn from_real(v: &[f64]) -> Result<Self> {
        Self::new(v.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Unit vector on site `index` of a `dim`-site chain.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::invalid(format!("site {index} outside a {dim}-site chain")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    fn padded(&self, dim: usize) -> Vec<Complex64> {
        let mut v = self.amps.clone();
        v.resize(dim, Complex64::new(0.0, 0.0));
        v
    }
}

/// A strictly increasing list of times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid(Vec<f64>);

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("time grid is empty"));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("time grid must be finite and strictly increasing"));
        }
        Ok(TimeGrid(times))
    }

    pub fn linspace(t0: f64, t1: f64, n: usize) -> Result<Self> {
        if n == 1 {
            return Self::new(vec![t0]);
        }
        let h = (t1 - t0) / (n as f64 - 1.0);
        Self::new((0..n).map(|i| t0 + h * i as f64).collect())
    }

    /// 400 points on [0, 10/σ].
    pub fn default_for(sigma: f64) -> Result<Self> {
        Self::linspace(0.0, 10.0 / sigma, 400)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn step(&self) -> Option<f64> {
        (self.0.len() > 1).then(|| self.0[1] - self.0[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Eigen,
    Laguerre,
    Spectral,
    /// Dense propagation of the full single-excitation Hamiltonian.
    FullSpace,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Eigen => "eig",
            Method::Laguerre => "laguerre",
            Method::Spectral => "spectral",
            Method::FullSpace => "full-space",
        })
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    /// Row k holds c_n(t_k).
    pub amplitudes: DMatrix<Complex64>,
    /// max_k |1 − Σ_n |c_n(t_k)|²|
    pub norm_drift: f64,
    pub method: Method,
}

impl EvolutionResult {
    pub(crate) fn from_rows(times: &[f64], rows: Vec<Vec<Complex64>>, method: Method) -> Self {
        let dim = rows.first().map_or(0, |r| r.len());
        let amplitudes = DMatrix::from_fn(times.len(), dim, |i, j| rows[i][j]);
        let norm_drift = rows
            .iter()
            .map(|r| (1.0 - r.iter().map(|c| c.norm_sqr()).sum::<f64>()).abs())
            .fold(0.0, f64::max);
        EvolutionResult { times: times.to_vec(), amplitudes, norm_drift, method }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.ncols()
    }

    pub fn state_at(&self, k: usize) -> Vec<Complex64> {
        self.amplitudes.row(k).iter().copied().collect()
    }

    pub fn probability(&self, k: usize, n: usize) -> f64 {
        self.amplitudes[(k, n)].norm_sqr()
    }

    /// Largest |Δc| against another result over shared sites (first `sites` columns).
    pub fn max_deviation(&self, other: &EvolutionResult, sites: usize) -> f64 {
        let sites = sites.min(self.dim()).min(other.dim());
        let rows = self.times.len().min(other.times.len());
        let mut m: f64 = 0.0;
        for k in 0..rows {
            for n in 0..sites {
                m = m.max((self.amplitudes[(k, n)] - other.amplitudes[(k, n)]).norm());
            }
        }
        m
    }
}

/// c(t) = V e^{−iΛt} Vᵀ c(0) from the chain eigendecomposition.
pub fn evolve_eig(chain: &KrylovChain, psi0: &StateVector, times: &TimeGrid) -> Result<EvolutionResult> {
    let eig = chain.eigen()?;
    evolve_with_eigen(&eig, psi0, times, Method::Eigen)
}

/// Propagation with a precomputed eigendecomposition (shared read-only across runs).
pub fn evolve_with_eigen(
    eig: &ChainEigen,
    psi0: &StateVector,
    times: &TimeGrid,
    method: Method,
) -> Result<EvolutionResult> {
    let dim = eig.values.len();
    if psi0.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: psi0.dim() });
    }
    let v = &eig.vectors;
    let c0 = psi0.amplitudes();
    // w = Vᵀ c(0)
    let w: Vec<Complex64> = (0..dim)
        .map(|k| (0..dim).map(|n| c0[n] * v[(n, k)]).sum())
        .collect();
    let rows: Vec<Vec<Complex64>> = times
        .as_slice()
        .iter()
        .map(|&t| {
            let phased: Vec<Complex64> = w
                .iter()
                .zip(eig.values.iter())
                .map(|(wk, &lam)| wk * Complex64::from_polar(1.0, -lam * t))
                .collect();
            (0..dim)
                .map(|n| (0..dim).map(|k| phased[k] * v[(n, k)]).sum())
                .collect()
        })
        .collect();
    Ok(EvolutionResult::from_rows(times.as_slice(), rows, method))
}

/// Upward recurrence in the degree: L_0^{(a)}, …, L_{k_max}^{(a)} at `x`.
fn laguerre_run<T: Float>(a: usize, k_max: usize, x: T) -> Vec<T> {
    let one = T::one();
    let a_t = T::from(a).unwrap();
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(one);
    if k_max >= 1 {
        out.push(one + a_t - x);
    }
    for k in 1..k_max {
        let k_t = T::from(k).unwrap();
        let two_k = T::from(2 * k + 1).unwrap();
        let next = ((two_k + a_t - x) * out[k] - (k_t + a_t) * out[k - 1]) / (k_t + one);
        out.push(next);
    }
    out
}

fn ln_factorial(n: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// Matrix elements U_{nm}(t) = e^{−s²/2} r_{nm} (−is)^{|n−m|} L^{(|n−m|)}_{min(n,m)}(s²), s = σt,
/// r_{nm} = √(min! / max!), for n, m < `n_max`. The factorial ratio is taken in log space.
pub fn gaussian_propagator(sigma: f64, t: f64, n_max: usize) -> Result<DMatrix<Complex64>> {
    let s = sigma * t;
    let mut u = DMatrix::from_element(n_max, n_max, Complex64::new(0.0, 0.0));
    if s == 0.0 {
        for i in 0..n_max {
            u[(i, i)] = Complex64::new(1.0, 0.0);
        }
        return Ok(u);
    }
    let x = s * s;
    let extended = s.abs() > LAGUERRE_EXTENDED_ABOVE;
    let ln_s = s.abs().ln();
    for d in 0..n_max {
        let k_top = n_max - 1 - d;
        let lag: Vec<f64> = if extended {
            laguerre_run(d, k_top, TwoFloat::from(x)).into_iter().map(|v| v.hi() + v.lo()).collect()
        } else {
            laguerre_run(d, k_top, x)
        };
        // (−is)^d = |s|^d · (−i·sign s)^d
        let phase = Complex64::new(0.0, -s.signum()).powu(d as u32);
        for (k, l) in lag.into_iter().enumerate() {
            if !l.is_finite() {
                return Err(Error::Accuracy(format!(
                    "Laguerre value overflowed at degree {k}, order {d}, sigma*t = {s}"
                )));
            }
            if l == 0.0 {
                continue;
            }
            let log_mag = -0.5 * x + 0.5 * (ln_factorial(k) - ln_factorial(k + d)) + d as f64 * ln_s;
            let val = phase * (l.signum() * (log_mag + l.abs().ln()).exp());
            u[(k + d, k)] = val;
            u[(k, k + d)] = val;
        }
    }
    Ok(u)
}

/// Closed-form propagation on the Gaussian ensemble-only chain b_n = σ√n, truncated to
/// `n_max` sites.
pub fn evolve_laguerre(sigma: f64, psi0: &StateVector, times: &TimeGrid, n_max: usize) -> Result<EvolutionResult> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid("sigma must be > 0"));
    }
    if psi0.dim() > n_max {
        return Err(Error::DimensionMismatch { expected: n_max, got: psi0.dim() });
    }
    let c0 = psi0.padded(n_max);
    let support: Vec<usize> = (0..n_max).filter(|&m| c0[m].norm_sqr() > 0.0).collect();
    let rows = times
        .as_slice()
        .iter()
        .map(|&t| {
            let u = gaussian_propagator(sigma, t, n_max)?;
            Ok((0..n_max).map(|n| support.iter().map(|&m| u[(n, m)] * c0[m]).sum()).collect())
        })
        .collect::<Result<Vec<Vec<Complex64>>>>()?;
    Ok(EvolutionResult::from_rows(times.as_slice(), rows, Method::Laguerre))
}

/// [`evolve_laguerre`] after checking that `coeffs` really is the Gaussian chain b_n = σ√n.
pub fn evolve_laguerre_chain(
    coeffs: &ChainCoefficients,
    psi0: &StateVector,
    times: &TimeGrid,
) -> Result<EvolutionResult> {
    let b = coeffs.betas.first().copied().unwrap_or(0.0);
    let gaussian = coeffs.mode == ChainMode::EnsembleOnly
        && b > 0.0
        && coeffs.alphas.iter().all(|a| (a - coeffs.center).abs() <= 1e-12 * b)
        && coeffs
            .betas
            .iter()
            .enumerate()
            .all(|(i, bn)| (bn - b * ((i + 1) as f64).sqrt()).abs() <= 1e-12 * bn);
    if !gaussian {
        return Err(Error::unsupported(
            "the Laguerre propagator applies only to the Gaussian ensemble-only chain",
        ));
    }
    evolve_laguerre(b, psi0, times, coeffs.len())
}

/// Gauss rule (nodes relative to the centre, weights summing to 1) of order `order` for `dist`,
/// from the eigenpairs of its Jacobi matrix.
pub fn gauss_rule(dist: &SpectralDistribution, order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let jacobi = match dist {
        SpectralDistribution::TsallisQGaussian { .. } => {
            return Err(Error::unsupported(
                "heavy-tailed (q > 1) measures have no Gauss rule of the needed order",
            ))
        }
        SpectralDistribution::Discrete { .. } => stieltjes_coefficients(dist, order)?,
        _ => closed_form_coefficients(dist, order.max(2))?,
    };
    let jacobi = jacobi.truncated(order);
    let chain_dim = jacobi.len();
    if chain_dim == 1 {
        return Ok((vec![jacobi.alphas[0] - jacobi.center], vec![1.0]));
    }
    let chain = build_chain(&jacobi, chain_dim, Frame::Rotating)?;
    let h = chain.matrix();
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 1000 * chain_dim)
        .ok_or(Error::NoConvergence { dim: chain_dim, norm: 0.0 })?;
    let nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let centred: Vec<f64> = jacobi.alphas.iter().map(|a| a - jacobi.center).collect();
    let weights = nodes
        .iter()
        .map(|&x| normalized_polynomials(&centred, &jacobi.betas, x)[0].powi(2))
        .collect();
    Ok((nodes, weights))
}

/// π_n(x)/√(Σ_k π_k(x)²) for n < alphas.len(), the orthonormal polynomials of the recurrence
/// scaled to a unit vector. Rescales on the way up so high degrees at outer nodes cannot overflow.
fn normalized_polynomials(alphas: &[f64], betas: &[f64], x: f64) -> Vec<f64> {
    const LIMIT: f64 = 1e100;
    let m = alphas.len();
    // mantissa and number of LIMIT factors removed so far
    let mut p = vec![0.0; m];
    let mut scale = vec![0i32; m];
    p[0] = 1.0;
    let (mut prev, mut cur, mut s) = (0.0, 1.0, 0i32);
    for n in 0..m - 1 {
        let beta_prev = if n == 0 { 0.0 } else { betas[n - 1] };
        let next = ((x - alphas[n]) * cur - beta_prev * prev) / betas[n];
        prev = cur;
        cur = next;
        if cur.abs() > LIMIT {
            cur /= LIMIT;
            prev /= LIMIT;
            s += 1;
        }
        p[n + 1] = cur;
        scale[n + 1] = s;
    }
    let top = s;
    let rel = |n: usize| LIMIT.powi(scale[n] - top);
    let norm = (0..m).map(|n| (p[n] * rel(n)).powi(2)).sum::<f64>().sqrt();
    (0..m).map(|n| p[n] * rel(n) / norm).collect()
}

/// U_{nm}(t) = ∫ e^{−ixt} π_n(x) π_m(x) dμ(x) by Gauss quadrature of order M = `coeffs.len()`
/// built from `dist`; the orthonormal π_n come from the three-term recurrence with `coeffs`.
pub fn evolve_spectral(
    coeffs: &ChainCoefficients,
    dist: &SpectralDistribution,
    psi0: &StateVector,
    times: &TimeGrid,
    frame: Frame,
) -> Result<EvolutionResult> {
    if coeffs.mode != ChainMode::EnsembleOnly {
        return Err(Error::unsupported("spectral propagation needs ensemble-only coefficients"));
    }
    let m = coeffs.len();
    if psi0.dim() != m {
        return Err(Error::DimensionMismatch { expected: m, got: psi0.dim() });
    }
    let (nodes, _) = gauss_rule(dist, m)?;
    if nodes.len() < m {
        return Err(Error::Accuracy(format!(
            "quadrature order {} is below the chain length {m}",
            nodes.len()
        )));
    }
    let q = nodes.len();
    // u[n][k] = √w_k π_n(x_k), with the Christoffel weight w_k = 1/Σ_n π_n(x_k)². Eigenvector
    // components would give w_k only to absolute accuracy, useless at the outer nodes.
    let centred: Vec<f64> = coeffs.alphas.iter().map(|a| a - coeffs.center).collect();
    let mut u = vec![vec![0.0; q]; m];
    for (k, &x) in nodes.iter().enumerate() {
        for (n, v) in normalized_polynomials(&centred, &coeffs.betas, x).into_iter().enumerate() {
            u[n][k] = v;
        }
    }
    let shift = match frame {
        Frame::Lab => coeffs.center,
        Frame::Rotating => 0.0,
    };
    let c0 = psi0.amplitudes();
    let proj: Vec<Complex64> = (0..q)
        .map(|k| (0..m).map(|n| c0[n] * u[n][k]).sum())
        .collect();
    let rows: Vec<Vec<Complex64>> = times
        .as_slice()
        .iter()
        .map(|&t| {
            let phased: Vec<Complex64> = (0..q)
                .map(|k| proj[k] * Complex64::from_polar(1.0, -(nodes[k] + shift) * t))
                .collect();
            (0..m).map(|n| (0..q).map(|k| phased[k] * u[n][k]).sum()).collect()
        })
        .collect();
    Ok(EvolutionResult::from_rows(times.as_slice(), rows, Method::Spectral))
}
