//! Recurrence coefficients {α_n, β_n} of the Krylov chain.
//!
//! Three routes produce the ensemble-only coefficients of a spectral measure:
//! closed forms for the classical families, Hankel determinants of the moment
//! sequence (double-double arithmetic), and the Stieltjes procedure on a discrete
//! measure. [`assemble`] then prepends the cavity site.
//!
//! Indexing: `alphas[n]` is the diagonal of site n and `betas[n - 1]` couples
//! sites n−1 and n, so a chain of length M has M alphas and M−1 betas.

use std::fmt;

use twofloat::TwoFloat;

use crate::dd;
use crate::error::{Error, Result};
use crate::spectra::{MomentTable, SpectralDistribution, Spin};

/// Relative size below which an off-diagonal coefficient ends the chain.
pub const TERMINATION_RTOL: f64 = 1e-13;

/// Orthogonality drift that triggers a Stieltjes restart with reorthogonalization.
pub const STIELTJES_DRIFT_TOL: f64 = 1e-8;

/// Digits a Hankel determinant may lose before the route refuses to continue
/// (half of the ~32 digits carried by double-double).
pub const HANKEL_MAX_DIGITS_LOST: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainMode {
    /// Site 0 is the cavity photon, site 1 the bright state.
    CavityCoupled,
    /// Sites are the orthonormal polynomials of the spin measure.
    EnsembleOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    Hankel,
    Stieltjes,
    /// Explicit Lanczos on the full single-excitation Hamiltonian.
    Lanczos,
    /// Read back from a coefficient file.
    Imported,
}

impl fmt::Display for ChainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainMode::CavityCoupled => "cavity-coupled",
            ChainMode::EnsembleOnly => "ensemble-only",
        })
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::ClosedForm => "closed-form",
            Provenance::Hankel => "hankel",
            Provenance::Stieltjes => "stieltjes",
            Provenance::Lanczos => "lanczos",
            Provenance::Imported => "imported",
        })
    }
}

impl std::str::FromStr for ChainMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cavity-coupled" | "cavity" => Ok(ChainMode::CavityCoupled),
            "ensemble-only" | "ensemble" => Ok(ChainMode::EnsembleOnly),
            _ => Err(Error::invalid(format!("unknown chain mode '{s}'"))),
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed-form" => Ok(Provenance::ClosedForm),
            "hankel" => Ok(Provenance::Hankel),
            "stieltjes" => Ok(Provenance::Stieltjes),
            "lanczos" => Ok(Provenance::Lanczos),
            "imported" => Ok(Provenance::Imported),
            _ => Err(Error::invalid(format!("unknown provenance '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainCoefficients {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Collective coupling. For ensemble-only chains this is √m_0 of the measure the
    /// coefficients came from.
    pub g_eff: f64,
    /// ω̄ of the spin measure.
    pub center: f64,
    pub mode: ChainMode,
    pub provenance: Provenance,
    /// Largest n for which β_n is guaranteed finite and stable.
    pub valid_order: usize,
    /// lim β_n of the ensemble part when it exists in closed form.
    pub asymptotic_beta: Option<f64>,
}

impl ChainCoefficients {
    /// Chain length M.
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// β_n with the 1-based bond convention (β_n couples sites n−1 and n).
    pub fn beta(&self, n: usize) -> Option<f64> {
        n.checked_sub(1).and_then(|i| self.betas.get(i).copied())
    }

    /// Ensemble-only coefficients b_1, b_2, ... regardless of mode.
    pub fn ensemble_betas(&self) -> &[f64] {
        match self.mode {
            ChainMode::EnsembleOnly => &self.betas,
            ChainMode::CavityCoupled => self.betas.get(1..).unwrap_or(&[]),
        }
    }

    /// Keeps the first `m` sites.
    pub fn truncated(&self, m: usize) -> ChainCoefficients {
        let m = m.min(self.len());
        let mut out = self.clone();
        out.alphas.truncate(m);
        out.betas.truncate(m.saturating_sub(1));
        out.valid_order = out.valid_order.min(out.betas.len());
        out
    }

    /// max over shared entries of |x − y| / max(|y|, floor), for α and β separately combined.
    pub fn max_relative_deviation(&self, other: &ChainCoefficients, floor: f64) -> f64 {
        let rel = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs() / y.abs().max(floor))
                .fold(0.0, f64::max)
        };
        rel(&self.alphas, &other.alphas).max(rel(&self.betas, &other.betas))
    }
}

/// [n]_q = 1 + q + … + q^{n−1}, equal to (1 − qⁿ)/(1 − q), and n at q = 1.
pub fn q_number(n: usize, q: f64) -> f64 {
    if q == 1.0 {
        return n as f64;
    }
    let mut acc = 0.0;
    let mut p = 1.0;
    for _ in 0..n {
        acc += p;
        p *= q;
    }
    acc
}

/// Ensemble-only coefficients from the known orthogonal-polynomial families.
pub fn closed_form_coefficients(dist: &SpectralDistribution, m: usize) -> Result<ChainCoefficients> {
    dist.validate()?;
    if m < 2 {
        return Err(Error::invalid(format!("chain length must be >= 2, got {m}")));
    }
    use SpectralDistribution::*;
    let (mean, sigma, b, asymptotic): (f64, f64, Box<dyn Fn(usize) -> f64>, Option<f64>) = match dist {
        Gaussian { mean, sigma } => {
            let s = *sigma;
            (*mean, s, Box::new(move |n| s * (n as f64).sqrt()), None)
        }
        QGaussianAskey { mean, sigma, q } => {
            let (s, q) = (*sigma, *q);
            let lim = if q < 1.0 { Some(s / (1.0 - q).sqrt()) } else { None };
            (*mean, s, Box::new(move |n| s * q_number(n, q).sqrt()), lim)
        }
        Uniform { mean, sigma } => {
            let s = *sigma;
            let b = move |n: usize| {
                let n = n as f64;
                3f64.sqrt() * s * n / ((2.0 * n + 1.0) * (2.0 * n - 1.0)).sqrt()
            };
            (*mean, s, Box::new(b), Some(3f64.sqrt() * s / 2.0))
        }
        TsallisQGaussian { .. } => {
            return Err(Error::unsupported(
                "no closed form for the Tsallis family; use the hankel route",
            ))
        }
        Discrete { .. } => {
            return Err(Error::unsupported(
                "no closed form for a discrete ensemble; use the stieltjes route",
            ))
        }
    };
    let mut betas = Vec::with_capacity(m - 1);
    for n in 1..m {
        let bn = b(n);
        if bn <= TERMINATION_RTOL * sigma {
            break;
        }
        betas.push(bn);
    }
    let len = betas.len() + 1;
    Ok(ChainCoefficients {
        alphas: vec![mean; len],
        valid_order: betas.len(),
        betas,
        g_eff: 1.0,
        center: mean,
        mode: ChainMode::EnsembleOnly,
        provenance: Provenance::ClosedForm,
        asymptotic_beta: asymptotic,
    })
}

/// Ensemble-only coefficients from Hankel determinants of the moments:
/// α_n = D'_{n+1}/D_{n+1} − D'_n/D_n and β_n = √(D_{n+1} D_{n−1} / D_n²),
/// where D'_n is D_n with its last column replaced by (m_n, …, m_{2n−1}).
pub fn hankel_coefficients(moments: &MomentTable, m: usize) -> Result<ChainCoefficients> {
    if m < 2 {
        return Err(Error::invalid(format!("chain length must be >= 2, got {m}")));
    }
    let needed = 2 * m - 2;
    let finite = moments.max_finite_order();
    if moments.finite_order.is_some_and(|f| needed > f) {
        let largest_valid_n = finite / 2;
        return Err(Error::DivergentMoments {
            requested: m,
            needed,
            finite_order: finite,
            largest_valid_n,
            largest_valid_len: largest_valid_n + 1,
        });
    }
    let odd_top = 2 * m - 1;
    if moments.k_max() < needed || (moments.k_max() < odd_top && !moments.symmetric) {
        return Err(Error::invalid(format!(
            "moment table has order {} but chain length {m} needs order {}",
            moments.k_max(),
            if moments.symmetric { needed } else { odd_top }
        )));
    }
    let mom = |k: usize| -> TwoFloat {
        if k % 2 == 1 && moments.symmetric {
            TwoFloat::from(0.0)
        } else {
            moments.values[k]
        }
    };

    let zero = TwoFloat::from(0.0);
    let one = TwoFloat::from(1.0);
    // d[n] = D_n, dp[n] = D'_n for n = 0..=m
    let mut d = vec![one];
    let mut dp = vec![zero];
    for n in 1..=m {
        let h: Vec<Vec<TwoFloat>> = (0..n).map(|i| (0..n).map(|j| mom(i + j)).collect()).collect();
        let lost = scaled_condition_digits(&h);
        let det = determinant(h.clone());
        if !(det > zero) || lost > HANKEL_MAX_DIGITS_LOST {
            return Err(Error::Conditioning {
                order: n,
                digits_lost: if det > zero { lost } else { f64::INFINITY },
                valid_order: n.saturating_sub(2),
            });
        }
        let mut hp = h;
        for (i, row) in hp.iter_mut().enumerate() {
            row[n - 1] = mom(n + i);
        }
        d.push(det);
        dp.push(if n == 1 { mom(1) } else { determinant(hp) });
    }

    let alphas: Vec<f64> = (0..m)
        .map(|k| {
            let prev = if k == 0 { zero } else { dd::div(dp[k], d[k]) };
            (dd::div(dp[k + 1], d[k + 1]) - prev).hi() + moments.center
        })
        .collect();
    let betas: Vec<f64> = (1..m)
        .map(|k| dd::div(d[k + 1] * d[k - 1], d[k] * d[k]).sqrt().hi())
        .collect();
    Ok(ChainCoefficients {
        alphas,
        valid_order: betas.len(),
        betas,
        g_eff: mom(0).sqrt().hi(),
        center: moments.center,
        mode: ChainMode::EnsembleOnly,
        provenance: Provenance::Hankel,
        asymptotic_beta: None,
    })
}

/// Stieltjes procedure for the measure Σ g_j² δ(ω − ω_j) / g_eff². Equivalent to Lanczos on
/// diag(ω_j) started from (g_j / g_eff). The classic recurrence runs without
/// reorthogonalization while the Gram drift stays below [`STIELTJES_DRIFT_TOL`]; otherwise it
/// restarts with full reorthogonalization.
pub fn stieltjes_coefficients(dist: &SpectralDistribution, m: usize) -> Result<ChainCoefficients> {
    dist.validate()?;
    let spins: Vec<Spin> = match dist {
        SpectralDistribution::Discrete { spins } => spins.iter().copied().filter(|s| s.g > 0.0).collect(),
        _ => {
            return Err(Error::unsupported(
                "the stieltjes route needs a discrete ensemble (sample one first)",
            ))
        }
    };
    if m == 0 {
        return Err(Error::invalid("chain length must be >= 1"));
    }
    if m > spins.len() {
        return Err(Error::ChainExhausted { requested: m, available: spins.len() });
    }
    let center = dist.center();
    let sigma = dist.sigma();
    let max_abs = spins.iter().map(|s| (s.omega - center).abs()).fold(0.0, f64::max);
    let scale = if sigma > 0.0 { sigma } else { max_abs };
    let g_eff = spins.iter().map(|s| s.g * s.g).sum::<f64>().sqrt();

    let run = |reorth: bool| -> Option<(Vec<f64>, Vec<f64>)> {
        // Work in the centred variable for accuracy; α is shifted back at the end.
        let x: Vec<f64> = spins.iter().map(|s| s.omega - center).collect();
        let mut basis: Vec<Vec<f64>> = vec![spins.iter().map(|s| s.g / g_eff).collect()];
        let mut alphas = Vec::with_capacity(m);
        let mut betas = Vec::with_capacity(m.saturating_sub(1));
        loop {
            let n = basis.len() - 1;
            let u = &basis[n];
            let a: f64 = x.iter().zip(u).map(|(xi, ui)| xi * ui * ui).sum();
            alphas.push(a);
            if alphas.len() == m {
                break;
            }
            let mut r: Vec<f64> = x.iter().zip(u).map(|(xi, ui)| (xi - a) * ui).collect();
            if n > 0 {
                let b_prev = betas[n - 1];
                r.iter_mut().zip(&basis[n - 1]).for_each(|(ri, pi)| *ri -= b_prev * pi);
            }
            if reorth {
                for _ in 0..2 {
                    for v in &basis {
                        let c: f64 = r.iter().zip(v).map(|(p, q)| p * q).sum();
                        r.iter_mut().zip(v).for_each(|(ri, vi)| *ri -= c * vi);
                    }
                }
            }
            let b = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if b <= TERMINATION_RTOL * scale {
                break;
            }
            r.iter_mut().for_each(|v| *v /= b);
            if !reorth {
                let drift = basis
                    .iter()
                    .map(|v| v.iter().zip(&r).map(|(p, q)| p * q).sum::<f64>().abs())
                    .fold(0.0, f64::max);
                if drift > STIELTJES_DRIFT_TOL {
                    return None;
                }
            }
            betas.push(b);
            basis.push(r);
        }
        Some((alphas, betas))
    };

    let (alphas, betas) = match run(false) {
        Some(v) => v,
        None => run(true).expect("reorthogonalized run always completes"),
    };
    Ok(ChainCoefficients {
        alphas: alphas.into_iter().map(|a| a + center).collect(),
        valid_order: betas.len(),
        betas,
        g_eff,
        center,
        mode: ChainMode::EnsembleOnly,
        provenance: Provenance::Stieltjes,
        asymptotic_beta: None,
    })
}

/// Prepends the cavity site: α_0 = ω_c, β_1 = g_eff, shifting b_k to β_{k+1}.
pub fn assemble(coeffs: &ChainCoefficients, omega_c: f64, g_eff: f64) -> Result<ChainCoefficients> {
    if coeffs.mode == ChainMode::CavityCoupled {
        return Err(Error::invalid("coefficients are already cavity-coupled"));
    }
    if !(g_eff.is_finite() && g_eff >= 0.0) || !omega_c.is_finite() {
        return Err(Error::invalid("need finite omega_c and g_eff >= 0"));
    }
    let mut alphas = Vec::with_capacity(coeffs.len() + 1);
    alphas.push(omega_c);
    alphas.extend_from_slice(&coeffs.alphas);
    let mut betas = Vec::with_capacity(coeffs.betas.len() + 1);
    betas.push(g_eff);
    betas.extend_from_slice(&coeffs.betas);
    Ok(ChainCoefficients {
        alphas,
        betas,
        g_eff,
        center: coeffs.center,
        mode: ChainMode::CavityCoupled,
        provenance: coeffs.provenance,
        valid_order: coeffs.valid_order + 1,
        asymptotic_beta: coeffs.asymptotic_beta,
    })
}

/// Determinant by Gaussian elimination with partial pivoting.
fn determinant(mut a: Vec<Vec<TwoFloat>>) -> TwoFloat {
    let n = a.len();
    let mut det = TwoFloat::from(1.0);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
            .unwrap();
        if a[p][k] == 0.0 {
            return TwoFloat::from(0.0);
        }
        if p != k {
            a.swap(p, k);
            det = -det;
        }
        let piv = a[k][k];
        det *= piv;
        for i in k + 1..n {
            let f = dd::div(a[i][k], piv);
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                let t = a[k][j] * f;
                a[i][j] -= t;
            }
        }
    }
    det
}

/// log10 of the 1-norm condition number of the Hankel matrix after symmetric diagonal scaling
/// to unit diagonal.
fn scaled_condition_digits(h: &[Vec<TwoFloat>]) -> f64 {
    let n = h.len();
    let s: Vec<TwoFloat> = (0..n).map(|i| dd::div(TwoFloat::from(1.0), h[i][i].sqrt())).collect();
    if s.iter().any(|v| !v.hi().is_finite()) {
        return f64::INFINITY;
    }
    let a: Vec<Vec<TwoFloat>> = (0..n).map(|i| (0..n).map(|j| h[i][j] * s[i] * s[j]).collect()).collect();
    let norm1 = |m: &[Vec<TwoFloat>]| {
        (0..n)
            .map(|j| (0..n).map(|i| m[i][j].abs().hi()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    match invert(a.clone()) {
        Some(inv) => (norm1(&a) * norm1(&inv)).log10(),
        None => f64::INFINITY,
    }
}

fn invert(mut a: Vec<Vec<TwoFloat>>) -> Option<Vec<Vec<TwoFloat>>> {
    let n = a.len();
    let zero = TwoFloat::from(0.0);
    let mut inv: Vec<Vec<TwoFloat>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { TwoFloat::from(1.0) } else { zero }).collect())
        .collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
            .unwrap();
        if a[p][k] == 0.0 {
            return None;
        }
        a.swap(p, k);
        inv.swap(p, k);
        let piv = a[k][k];
        for j in 0..n {
            a[k][j] = dd::div(a[k][j], piv);
            inv[k][j] = dd::div(inv[k][j], piv);
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            let f = a[i][k];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                let t = a[k][j] * f;
                a[i][j] -= t;
                let t = inv[k][j] * f;
                inv[i][j] -= t;
            }
        }
    }
    Some(inv)
}
