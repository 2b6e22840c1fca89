//! Spin-frequency / coupling distributions.
//!
//! Every continuous family is parameterized by its centre `mean` (ω̄) and a
//! width `sigma` (σ_ω). Frequencies are angular, with ℏ = 1. The q-Gaussian
//! families use the reduced variable x = (ω − ω̄)/σ_ω.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};
use twofloat::TwoFloat;

use crate::dd;
use crate::error::{Error, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// One spin of an explicit ensemble: frequency `omega` and cavity coupling `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spin {
    pub omega: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDistribution {
    Gaussian { mean: f64, sigma: f64 },
    /// q-Gaussian of the Askey scheme, −1 ≤ q ≤ 1, compactly supported for q < 1.
    QGaussianAskey { mean: f64, sigma: f64, q: f64 },
    /// Tsallis q-Gaussian, 1 < q < 3, heavy tailed.
    TsallisQGaussian { mean: f64, sigma: f64, q: f64 },
    /// Flat density on |ω − ω̄| ≤ √3 σ.
    Uniform { mean: f64, sigma: f64 },
    Discrete { spins: Vec<Spin> },
}

/// How couplings are assigned when a continuous family is sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingModel {
    /// g_j = g_eff/√n for every spin.
    UniformG { g_eff: f64 },
    Supplied(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Weighted by g_j², so m_0 = Σ g_j².
    Raw,
    /// Probability measure, m_0 = 1.
    Probability,
}

/// Central moments m_k = E[(ω − centre)^k], k = 0..=k_max, in double-double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub center: f64,
    pub values: Vec<TwoFloat>,
    pub normalization: Normalization,
    /// Largest order whose absolute moment is finite, if the family has divergent moments.
    /// `None` means every order is finite.
    pub finite_order: Option<usize>,
    /// Odd central moments vanish identically.
    pub symmetric: bool,
}

impl MomentTable {
    pub fn k_max(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn is_finite(&self, k: usize) -> bool {
        k < self.values.len() && self.finite_order.map_or(true, |f| k <= f)
    }

    /// Moment `k` as f64 (infinite for divergent entries).
    pub fn get(&self, k: usize) -> f64 {
        self.values[k].hi()
    }

    /// Largest finite order covered by the table.
    pub fn max_finite_order(&self) -> usize {
        let top = self.k_max();
        self.finite_order.map_or(top, |f| f.min(top))
    }
}

impl SpectralDistribution {
    pub fn gaussian(mean: f64, sigma: f64) -> Result<Self> {
        let d = SpectralDistribution::Gaussian { mean, sigma };
        d.validate()?;
        Ok(d)
    }

    pub fn q_gaussian(mean: f64, sigma: f64, q: f64) -> Result<Self> {
        let d = SpectralDistribution::QGaussianAskey { mean, sigma, q };
        d.validate()?;
        Ok(d)
    }

    pub fn tsallis(mean: f64, sigma: f64, q: f64) -> Result<Self> {
        let d = SpectralDistribution::TsallisQGaussian { mean, sigma, q };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(mean: f64, sigma: f64) -> Result<Self> {
        let d = SpectralDistribution::Uniform { mean, sigma };
        d.validate()?;
        Ok(d)
    }

    pub fn discrete(spins: Vec<Spin>) -> Result<Self> {
        let d = SpectralDistribution::Discrete { spins };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        use SpectralDistribution::*;
        let check_sigma = |mean: f64, sigma: f64| -> Result<()> {
            if !mean.is_finite() {
                return Err(Error::invalid("mean must be finite"));
            }
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
            }
            Ok(())
        };
        match self {
            Gaussian { mean, sigma } | Uniform { mean, sigma } => check_sigma(*mean, *sigma),
            QGaussianAskey { mean, sigma, q } => {
                check_sigma(*mean, *sigma)?;
                if !(-1.0..=1.0).contains(q) {
                    return Err(Error::invalid(format!("Askey q-Gaussian needs -1 <= q <= 1, got {q}")));
                }
                Ok(())
            }
            TsallisQGaussian { mean, sigma, q } => {
                check_sigma(*mean, *sigma)?;
                if !(*q > 1.0 && *q < 3.0) {
                    return Err(Error::invalid(format!("Tsallis q-Gaussian needs 1 < q < 3, got {q}")));
                }
                Ok(())
            }
            Discrete { spins } => {
                if spins.is_empty() {
                    return Err(Error::invalid("discrete ensemble needs at least one spin"));
                }
                if spins.iter().any(|s| !s.omega.is_finite() || !s.g.is_finite() || s.g < 0.0) {
                    return Err(Error::invalid("spin frequencies must be finite and couplings >= 0"));
                }
                if !spins.iter().any(|s| s.g > 0.0) {
                    return Err(Error::invalid("at least one coupling must be positive"));
                }
                Ok(())
            }
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, SpectralDistribution::Discrete { .. })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            SpectralDistribution::Gaussian { .. } => "gaussian",
            SpectralDistribution::QGaussianAskey { .. } => "qgauss",
            SpectralDistribution::TsallisQGaussian { .. } => "tsallis",
            SpectralDistribution::Uniform { .. } => "uniform",
            SpectralDistribution::Discrete { .. } => "discrete",
        }
    }

    /// ω̄: the family centre, or the g²-weighted mean frequency of a discrete ensemble.
    pub fn center(&self) -> f64 {
        use SpectralDistribution::*;
        match self {
            Gaussian { mean, .. }
            | QGaussianAskey { mean, .. }
            | TsallisQGaussian { mean, .. }
            | Uniform { mean, .. } => *mean,
            Discrete { spins } => weighted_mean(spins).hi(),
        }
    }

    /// σ_ω: the width parameter, or the g²-weighted standard deviation of a discrete ensemble.
    pub fn sigma(&self) -> f64 {
        use SpectralDistribution::*;
        match self {
            Gaussian { sigma, .. }
            | QGaussianAskey { sigma, .. }
            | TsallisQGaussian { sigma, .. }
            | Uniform { sigma, .. } => *sigma,
            Discrete { spins } => {
                let m = discrete_moments(spins, 2);
                dd::div(m[2], m[0]).sqrt().hi()
            }
        }
    }

    /// g_eff = √(Σ g_j²) for a discrete ensemble.
    pub fn collective_coupling(&self) -> Option<f64> {
        match self {
            SpectralDistribution::Discrete { spins } => {
                Some(spins.iter().map(|s| s.g * s.g).sum::<f64>().sqrt())
            }
            _ => None,
        }
    }

    /// Closed support interval, `None` for unbounded families.
    pub fn support(&self) -> Option<(f64, f64)> {
        use SpectralDistribution::*;
        match self {
            QGaussianAskey { mean, sigma, q } if *q < 1.0 => {
                let x0 = 2.0 * sigma / (1.0 - q).sqrt();
                Some((mean - x0, mean + x0))
            }
            Uniform { mean, sigma } => Some((mean - SQRT_3 * sigma, mean + SQRT_3 * sigma)),
            Discrete { spins } => {
                let lo = spins.iter().map(|s| s.omega).fold(f64::INFINITY, f64::min);
                let hi = spins.iter().map(|s| s.omega).fold(f64::NEG_INFINITY, f64::max);
                Some((lo, hi))
            }
            _ => None,
        }
    }

    /// Probability density P(ω).
    pub fn density(&self, omega: f64) -> Result<f64> {
        self.validate()?;
        use SpectralDistribution::*;
        match self {
            Gaussian { mean, sigma } => Ok(gaussian_density((omega - mean) / sigma) / sigma),
            QGaussianAskey { mean, sigma, q } => {
                let x = (omega - mean) / sigma;
                if *q == 1.0 {
                    Ok(gaussian_density(x) / sigma)
                } else if *q == -1.0 {
                    Err(Error::unsupported(
                        "q = -1 is a two-point measure; its density is a pair of point masses",
                    ))
                } else {
                    Ok(askey_density(x, *q) / sigma)
                }
            }
            TsallisQGaussian { mean, sigma, q } => {
                let beta = tsallis_beta(*sigma, *q);
                let n = 1.0 / (q - 1.0);
                let x = omega - mean;
                let log_norm = 0.5 * (PI / ((q - 1.0) * beta)).ln() + libm::lgamma(n - 0.5)
                    - libm::lgamma(n);
                Ok((-n * ((q - 1.0) * beta * x * x).ln_1p() - log_norm).exp())
            }
            Uniform { mean, sigma } => {
                let half = SQRT_3 * sigma;
                if (omega - mean).abs() <= half {
                    Ok(1.0 / (2.0 * half))
                } else {
                    Ok(0.0)
                }
            }
            Discrete { .. } => Err(Error::unsupported(
                "a discrete ensemble has no density (it is a sum of point masses)",
            )),
        }
    }

    /// Central moments through order `k_max`, from closed forms (or the exact weighted sum
    /// for a discrete ensemble). Divergent moments are stored as +∞.
    pub fn moments(&self, k_max: usize) -> Result<MomentTable> {
        self.validate()?;
        use SpectralDistribution::*;
        let one = TwoFloat::from(1.0);
        let zero = TwoFloat::from(0.0);
        let mut finite_order = None;
        let (center, normalization, values) = match self {
            Gaussian { mean, sigma } => (*mean, Normalization::Probability, gaussian_moments(*sigma, k_max)),
            QGaussianAskey { mean, sigma, q } => {
                let values = if *q == 1.0 {
                    gaussian_moments(*sigma, k_max)
                } else {
                    askey_moments(*sigma, *q, k_max)
                };
                (*mean, Normalization::Probability, values)
            }
            Uniform { mean, sigma } => {
                let half = TwoFloat::from(3.0).sqrt() * *sigma;
                let values = (0..=k_max)
                    .map(|k| if k % 2 == 1 { zero } else { dd::pow(half, k) / (k as f64 + 1.0) })
                    .collect();
                (*mean, Normalization::Probability, values)
            }
            TsallisQGaussian { mean, sigma, q } => {
                let (values, fo) = tsallis_moments(*sigma, *q, k_max);
                finite_order = Some(fo);
                (*mean, Normalization::Probability, values)
            }
            Discrete { spins } => {
                let center = weighted_mean(spins).hi();
                (center, Normalization::Raw, discrete_moments(spins, k_max))
            }
        };
        debug_assert!(values.is_empty() || values[0] == one || normalization == Normalization::Raw);
        Ok(MomentTable {
            center,
            values,
            normalization,
            finite_order,
            symmetric: !self.is_discrete(),
        })
    }

    /// Central moments by adaptive double-exponential quadrature of the density, as an
    /// independent check on the closed forms. Compact families are integrated over their
    /// support; unbounded ones are split into a core and two mapped tails.
    pub fn moments_quadrature(&self, k_max: usize) -> Result<Vec<f64>> {
        self.validate()?;
        if self.is_discrete() {
            return Err(Error::unsupported("quadrature moments need a continuous family"));
        }
        if let SpectralDistribution::QGaussianAskey { q, .. } = self {
            if *q == -1.0 {
                return Err(Error::unsupported("q = -1 has no density to integrate"));
            }
        }
        let c = self.center();
        let s = self.sigma();
        let finite_order = match self {
            SpectralDistribution::TsallisQGaussian { q, .. } => Some(tsallis_finite_order(*q)),
            _ => None,
        };
        (0..=k_max)
            .map(|k| {
                if finite_order.is_some_and(|f| k > f) {
                    return Ok(f64::INFINITY);
                }
                let f = |w: f64| {
                    let x = w - c;
                    self.density(w).unwrap_or(0.0) * x.powi(k as i32)
                };
                let tol = 1e-14 * s.powi(k as i32).max(f64::MIN_POSITIVE);
                Ok(match self.support() {
                    Some((lo, hi)) => integrate_panels(&f, lo, hi, 8, tol),
                    None => integrate_real_line(&f, c, 10.0 * s, tol),
                })
            })
            .collect()
    }

    /// Draws `n` i.i.d. frequencies from the density (deterministic for a given `seed`).
    pub fn sample_discrete(&self, n: usize, seed: u64, coupling: &CouplingModel) -> Result<SpectralDistribution> {
        self.validate()?;
        if self.is_discrete() {
            return Err(Error::unsupported("cannot sample from a discrete ensemble"));
        }
        if n == 0 {
            return Err(Error::invalid("sample size must be >= 1"));
        }
        let couplings = match coupling {
            CouplingModel::UniformG { g_eff } => {
                if !(g_eff.is_finite() && *g_eff > 0.0) {
                    return Err(Error::invalid("g_eff must be > 0"));
                }
                vec![g_eff / (n as f64).sqrt(); n]
            }
            CouplingModel::Supplied(g) => {
                if g.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: g.len() });
                }
                g.clone()
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omegas = self.draw(n, &mut rng)?;
        SpectralDistribution::discrete(
            omegas
                .into_iter()
                .zip(couplings)
                .map(|(omega, g)| Spin { omega, g })
                .collect(),
        )
    }

    fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        use SpectralDistribution::*;
        match self {
            Gaussian { mean, sigma } | QGaussianAskey { mean, sigma, q: 1.0 } => {
                let d = Normal::new(*mean, *sigma).map_err(|e| Error::invalid(e.to_string()))?;
                Ok((0..n).map(|_| d.sample(rng)).collect())
            }
            QGaussianAskey { mean, sigma, q } if *q == -1.0 => Ok((0..n)
                .map(|_| if rng.random::<bool>() { mean + sigma } else { mean - sigma })
                .collect()),
            QGaussianAskey { mean, sigma, q } => {
                let table = InverseCdf::tabulate(|x| askey_density(x, *q), 2.0 / (1.0 - q).sqrt(), 40_001);
                Ok((0..n).map(|_| mean + sigma * table.invert(rng.random())).collect())
            }
            Uniform { mean, sigma } => {
                let h = SQRT_3 * sigma;
                Ok((0..n).map(|_| rng.random_range(mean - h..=mean + h)).collect())
            }
            TsallisQGaussian { mean, sigma, q } => {
                // Scaled Student-t with ν = (3 − q)/(q − 1).
                let nu = (3.0 - q) / (q - 1.0);
                let beta = tsallis_beta(*sigma, *q);
                let scale = 1.0 / (nu * (q - 1.0) * beta).sqrt();
                let d = StudentT::new(nu).map_err(|e| Error::invalid(e.to_string()))?;
                Ok((0..n).map(|_| mean + scale * d.sample(rng)).collect())
            }
            Discrete { .. } => unreachable!(),
        }
    }
}

/// β of the Tsallis density [1 + (q−1)βx²]^{−1/(q−1)}. Chosen so the variance equals σ² where
/// it is finite (q < 5/3); past that σ is the scale with β = 1/((3 − q)σ²), which makes σ the
/// half-width at half-maximum of the Lorentzian at q = 2.
pub fn tsallis_beta(sigma: f64, q: f64) -> f64 {
    if q < 5.0 / 3.0 {
        1.0 / ((5.0 - 3.0 * q) * sigma * sigma)
    } else {
        1.0 / ((3.0 - q) * sigma * sigma)
    }
}

/// Largest moment order k with E|x|^k finite for the Tsallis family: k < 2N − 1, N = 1/(q−1).
pub fn tsallis_finite_order(q: f64) -> usize {
    let bound = 2.0 / (q - 1.0) - 1.0;
    // q = 1.2 gives 9.000000000000002; treat near-integers as exact.
    let near = bound.round();
    let k = if (bound - near).abs() < 1e-9 * near.abs().max(1.0) { near - 1.0 } else { bound.floor() };
    if k < 0.0 {
        0
    } else {
        k as usize
    }
}

fn gaussian_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// q-Gaussian density in the reduced variable x, −1 < q < 1:
/// √(1−q)/(2π) √(4 − (1−q)x²) Π_{k≥1} (1 − q^k)[(1 + q^k)² − (1−q)x² q^k].
/// The product is truncated once every remaining factor is within 1e-15 of 1.
pub(crate) fn askey_density(x: f64, q: f64) -> f64 {
    let a = (1.0 - q) * x * x;
    let radicand = 4.0 - a;
    if radicand <= 0.0 {
        return 0.0;
    }
    // Σ ln w_k with Neumaier compensation; w_k − 1 = q^k (1 − q^k − q^{2k} − a (1 − q^k)).
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut qk = q;
    let tail = 3.0 + a;
    loop {
        let wm1 = qk * (1.0 - qk - qk * qk - a * (1.0 - qk));
        if wm1 <= -1.0 {
            return 0.0;
        }
        let term = wm1.ln_1p();
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        if qk.abs() * tail < 1e-15 {
            break;
        }
        qk *= q;
    }
    let prod = (sum + comp).exp();
    ((1.0 - q).sqrt() / (2.0 * PI)) * radicand.sqrt() * prod
}

fn gaussian_moments(sigma: f64, k_max: usize) -> Vec<TwoFloat> {
    let s2 = TwoFloat::from(sigma) * sigma;
    let mut out = Vec::with_capacity(k_max + 1);
    let mut even = TwoFloat::from(1.0);
    for k in 0..=k_max {
        if k % 2 == 1 {
            out.push(TwoFloat::from(0.0));
        } else {
            if k > 0 {
                // m_{2n} = (2n − 1) σ² m_{2n−2}
                even = even * s2 * (k as f64 - 1.0);
            }
            out.push(even);
        }
    }
    out
}

/// Even moments of the q-Gaussian (b_n² = σ²[n]_q). The Touchard–Riordan crossing formula is used
/// while its (1 − q)^{−n} amplification stays small; otherwise moments are summed over weighted
/// Dyck paths (all weights nonnegative, no cancellation).
fn askey_moments(sigma: f64, q: f64, k_max: usize) -> Vec<TwoFloat> {
    let half = k_max / 2;
    let reduced = if q == -1.0 {
        vec![TwoFloat::from(1.0); half + 1]
    } else if q <= 0.75 {
        touchard_riordan(q, half)
    } else {
        dyck_path_moments(q, half)
    };
    let s2 = TwoFloat::from(sigma) * sigma;
    (0..=k_max)
        .map(|k| if k % 2 == 1 { TwoFloat::from(0.0) } else { reduced[k / 2] * dd::pow(s2, k / 2) })
        .collect()
}

/// Σ_{matchings of 2n points} q^{crossings} for n = 0..=half.
fn touchard_riordan(q: f64, half: usize) -> Vec<TwoFloat> {
    let qd = TwoFloat::from(q);
    let inv = dd::div(TwoFloat::from(1.0), TwoFloat::from(1.0) - qd);
    (0..=half)
        .map(|n| {
            let mut acc = TwoFloat::from(0.0);
            for k in 0..=n {
                let c1 = binomial(2 * n, n - k);
                let c2 = if n >= k + 1 { binomial(2 * n, n - k - 1) } else { TwoFloat::from(0.0) };
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let e = k * (k + 1) / 2;
                acc += (c1 - c2) * dd::pow(qd, e) * sign;
            }
            acc * dd::pow(inv, n)
        })
        .collect()
}

fn dyck_path_moments(q: f64, half: usize) -> Vec<TwoFloat> {
    let qd = TwoFloat::from(q);
    // [h]_q = 1 + q + … + q^{h−1}
    let mut bracket = vec![TwoFloat::from(0.0); 2 * half + 2];
    let mut pw = TwoFloat::from(1.0);
    for h in 1..bracket.len() {
        bracket[h] = bracket[h - 1] + pw;
        pw *= qd;
    }
    let steps = 2 * half;
    let mut level = vec![TwoFloat::from(0.0); steps + 2];
    level[0] = TwoFloat::from(1.0);
    let mut out = vec![TwoFloat::from(1.0)];
    for step in 1..=steps {
        let mut next = vec![TwoFloat::from(0.0); steps + 2];
        for h in 0..=step.min(steps) {
            if level[h] == 0.0 {
                continue;
            }
            next[h + 1] += level[h];
            if h > 0 {
                next[h - 1] += level[h] * bracket[h];
            }
        }
        level = next;
        if step % 2 == 0 {
            out.push(level[0]);
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> TwoFloat {
    let mut acc = TwoFloat::from(1.0);
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    // exact for the sizes used here (≤ C(60, 30) < 2^60, representable in double-double)
    acc.round()
}

/// Normalized Tsallis central moments; entries past the finite order are +∞.
fn tsallis_moments(sigma: f64, q: f64, k_max: usize) -> (Vec<TwoFloat>, usize) {
    let beta = tsallis_beta(sigma, q);
    let n_par = dd::div(TwoFloat::from(1.0), TwoFloat::from(q) - 1.0);
    let scale = TwoFloat::from(q - 1.0) * beta;
    let finite = tsallis_finite_order(q);
    let mut out = Vec::with_capacity(k_max + 1);
    let mut even = TwoFloat::from(1.0);
    for k in 0..=k_max {
        if k > finite {
            out.push(TwoFloat::INFINITY);
            continue;
        }
        if k % 2 == 1 {
            out.push(TwoFloat::from(0.0));
            continue;
        }
        if k > 0 {
            // μ_{2n}/μ_{2n−2} = (n − ½) / ((q−1)β (N − n − ½))
            let n = (k / 2) as f64;
            even = dd::div(even * (n - 0.5), scale * (n_par - (n + 0.5)));
        }
        out.push(even);
    }
    (out, finite)
}

fn weighted_mean(spins: &[Spin]) -> TwoFloat {
    let mut w = TwoFloat::from(0.0);
    let mut s = TwoFloat::from(0.0);
    for sp in spins {
        let g2 = TwoFloat::new_mul(sp.g, sp.g);
        w += g2;
        s += g2 * sp.omega;
    }
    dd::div(s, w)
}

/// Raw g²-weighted central moments of a discrete ensemble.
fn discrete_moments(spins: &[Spin], k_max: usize) -> Vec<TwoFloat> {
    let mean = weighted_mean(spins);
    let mut out = vec![TwoFloat::from(0.0); k_max + 1];
    for sp in spins {
        let g2 = TwoFloat::new_mul(sp.g, sp.g);
        let d = TwoFloat::from(sp.omega) - mean;
        let mut p = g2;
        for m in out.iter_mut() {
            *m += p;
            p *= d;
        }
    }
    out
}

struct InverseCdf {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseCdf {
    /// Trapezoid-integrated CDF of `density` on [−half, half].
    fn tabulate(density: impl Fn(f64) -> f64, half: f64, points: usize) -> Self {
        let h = 2.0 * half / (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|i| -half + h * i as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&x| density(x)).collect();
        let mut cdf = Vec::with_capacity(points);
        cdf.push(0.0);
        for i in 1..points {
            let prev = cdf[i - 1];
            cdf.push(prev + 0.5 * h * (vals[i] + vals[i - 1]));
        }
        let total = *cdf.last().unwrap();
        cdf.iter_mut().for_each(|c| *c /= total);
        InverseCdf { grid, cdf }
    }

    fn invert(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.grid[i - 1] + frac * (self.grid[i] - self.grid[i - 1])
    }
}

/// ∫_lo^hi f on `panels` equal panels with tanh-sinh quadrature.
pub(crate) fn integrate_panels(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, panels: usize, tol: f64) -> f64 {
    let h = (hi - lo) / panels as f64;
    (0..panels)
        .map(|i| {
            let a = lo + h * i as f64;
            quadrature::integrate(f, a, a + h, tol / panels as f64).integral
        })
        .sum()
}

/// ∫_{−∞}^{∞} f: core [c − L, c + L] plus both tails mapped through x = c ± L/u, u ∈ (0, 1].
pub(crate) fn integrate_real_line(f: &dyn Fn(f64) -> f64, c: f64, half: f64, tol: f64) -> f64 {
    let core = integrate_panels(f, c - half, c + half, 8, tol);
    let tail = |sign: f64| {
        quadrature::integrate(
            |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let x = c + sign * half / u;
                f(x) * half / (u * u)
            },
            0.0,
            1.0,
            tol,
        )
        .integral
    };
    core + tail(1.0) + tail(-1.0)
}
