//! Spreading diagnostics: Krylov complexity, fidelities, the bond-commutator light cone and
//! Mandelstam-Tamm speed limits.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::chain::{ChainEigen, KrylovChain, VelocityProfile};
use crate::error::{Error, Result};
use crate::propagate::{EvolutionResult, TimeGrid};
use crate::recursion::{ChainCoefficients, ChainMode};

/// Front detection threshold on C(r, t).
pub const FRONT_THRESHOLD: f64 = 0.01;
/// Absolute accuracy of a computed C(r, t) (norms are O(1), built from unit vectors).
pub const CORRELATOR_ROUND_OFF: f64 = 1e-12;
/// A revival needs F_1 to first fall below this value...
pub const REVIVAL_DROP: f64 = 0.05;
/// ...and then show a local maximum above this one.
pub const REVIVAL_RISE: f64 = 0.1;

/// K(t_k) = Σ_n n |c_n(t_k)|².
pub fn krylov_complexity(res: &EvolutionResult) -> Vec<f64> {
    (0..res.times.len())
        .map(|k| (0..res.dim()).map(|n| n as f64 * res.probability(k, n)).sum())
        .collect()
}

/// F_j(t_k) = |c_j(t_k)|², time × site.
pub fn fidelity_grid(res: &EvolutionResult) -> DMatrix<f64> {
    res.amplitudes.map(|c| c.norm_sqr())
}

/// C(r, t) for r = 0..=r_max (rows) over the time grid (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorGrid {
    pub times: Vec<f64>,
    pub values: DMatrix<f64>,
}

impl CorrelatorGrid {
    pub fn r_max(&self) -> usize {
        self.values.nrows() - 1
    }

    /// First grid time with C(r, t) > `threshold`.
    pub fn arrival(&self, r: usize, threshold: f64) -> Option<f64> {
        (0..self.times.len()).find(|&k| self.values[(r, k)] > threshold).map(|k| self.times[k])
    }
}

/// Orthonormal basis of span(vs), dropping numerically dependent vectors.
fn orthonormal_span(vs: &[DVector<Complex64>]) -> Vec<DVector<Complex64>> {
    let mut q: Vec<DVector<Complex64>> = Vec::with_capacity(vs.len());
    for v in vs {
        let mut w = v.clone();
        for _ in 0..2 {
            for u in &q {
                let c = u.dotc(&w);
                w -= u * c;
            }
        }
        let n = w.norm();
        if n > 1e-12 {
            q.push(w / Complex64::new(n, 0.0));
        }
    }
    q
}

/// Spectral norm of [a b† + b a†, e_r e_{r+1}† + e_{r+1} e_r†]. Everything lives in the span of
/// {a, b, e_r, e_{r+1}}, so the commutator is formed and diagonalized there.
fn bond_commutator_norm(a: &DVector<Complex64>, b: &DVector<Complex64>, r: usize) -> f64 {
    let dim = a.len();
    let unit = |i: usize| {
        let mut e = DVector::from_element(dim, Complex64::new(0.0, 0.0));
        e[i] = Complex64::new(1.0, 0.0);
        e
    };
    let (er, es) = (unit(r), unit(r + 1));
    let q = orthonormal_span(&[a.clone(), b.clone(), er.clone(), es.clone()]);
    let coords = |v: &DVector<Complex64>| DVector::from_iterator(q.len(), q.iter().map(|u| u.dotc(v)));
    let (ca, cb, cr, cs) = (coords(a), coords(b), coords(&er), coords(&es));
    let x = &ca * cb.adjoint() + &cb * ca.adjoint();
    let y = &cr * cs.adjoint() + &cs * cr.adjoint();
    let c = &x * &y - &y * &x;
    // i·C is Hermitian; its largest |eigenvalue| is the norm.
    let hermitian = c * Complex64::new(0.0, 1.0);
    SymmetricEigen::new(hermitian).eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// C(r, t) = ‖[X_{0,1}(t), X_{r,r+1}]‖ with X_{0,1}(t) = U†(t) X_{0,1} U(t).
pub fn correlator(chain: &KrylovChain, r_max: usize, times: &TimeGrid) -> Result<CorrelatorGrid> {
    let eig = chain.eigen()?;
    correlator_with_eigen(&eig, r_max, times)
}

pub fn correlator_with_eigen(eig: &ChainEigen, r_max: usize, times: &TimeGrid) -> Result<CorrelatorGrid> {
    let m = eig.values.len();
    if r_max + 1 >= m {
        return Err(Error::invalid(format!("r_max = {r_max} needs a chain longer than {m} sites")));
    }
    let v = &eig.vectors;
    let heisenberg = |site: usize, t: f64| -> DVector<Complex64> {
        // e^{iHt}|site⟩
        let p: Vec<Complex64> = (0..m).map(|k| Complex64::from_polar(v[(site, k)], eig.values[k] * t)).collect();
        DVector::from_iterator(m, (0..m).map(|n| (0..m).map(|k| p[k] * v[(n, k)]).sum::<Complex64>()))
    };
    let ts = times.as_slice();
    let mut values = DMatrix::zeros(r_max + 1, ts.len());
    for (k, &t) in ts.iter().enumerate() {
        let a = heisenberg(0, t);
        let b = heisenberg(1, t);
        for r in 0..=r_max {
            values[(r, k)] = bond_commutator_norm(&a, &b, r);
        }
    }
    Ok(CorrelatorGrid { times: ts.to_vec(), values })
}

/// Least-squares slope of the arrival time t*(r) over r ∈ [r_lo, r_hi].
#[derive(Debug, Clone, PartialEq)]
pub struct FrontFit {
    pub arrivals: Vec<(usize, f64)>,
    pub slope: f64,
    pub intercept: f64,
}

pub fn front_slope(grid: &CorrelatorGrid, r_lo: usize, r_hi: usize, threshold: f64) -> Result<FrontFit> {
    if r_hi > grid.r_max() || r_lo >= r_hi {
        return Err(Error::invalid(format!("bad front window [{r_lo}, {r_hi}] for r_max = {}", grid.r_max())));
    }
    let mut arrivals = Vec::new();
    for r in r_lo..=r_hi {
        match grid.arrival(r, threshold) {
            Some(t) => arrivals.push((r, t)),
            None => {
                return Err(Error::Accuracy(format!("front never reaches r = {r} inside the time window")))
            }
        }
    }
    let n = arrivals.len() as f64;
    let mx = arrivals.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = arrivals.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = arrivals.iter().map(|p| (p.0 as f64 - mx) * (p.1 - my)).sum();
    let sxx: f64 = arrivals.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(FrontFit { arrivals, slope, intercept: my - slope * mx })
}

/// Exponential light-cone bound C(r, t) ≤ a·e^{−r + 2 J t}.
#[derive(Debug, Clone, PartialEq)]
pub struct LightConeBound {
    pub a: f64,
    pub j_max: f64,
    /// Time on the r = 1 front where `a` was fitted.
    pub t_fit: f64,
}

impl LightConeBound {
    /// Fits `a` once, at r = 1 and the first grid time where C(1, t) exceeds `threshold`.
    pub fn fit(grid: &CorrelatorGrid, j_max: f64, threshold: f64) -> Result<Self> {
        if grid.r_max() < 1 {
            return Err(Error::invalid("the fit needs r = 1 in the grid"));
        }
        let k = (0..grid.times.len())
            .find(|&k| grid.values[(1, k)] > threshold)
            .ok_or_else(|| Error::Accuracy("C(1, t) never crosses the front threshold".into()))?;
        let t = grid.times[k];
        let a = grid.values[(1, k)] * (1.0 - 2.0 * j_max * t).exp();
        Ok(LightConeBound { a, j_max, t_fit: t })
    }

    pub fn bound(&self, r: usize, t: f64) -> f64 {
        self.a * (-(r as f64) + 2.0 * self.j_max * t).exp()
    }

    /// Grid points (r, t, C, bound) where C exceeds the bound by more than `round_off`, the
    /// absolute accuracy of the computed commutator norms.
    pub fn violations(&self, grid: &CorrelatorGrid, round_off: f64) -> Vec<(usize, f64, f64, f64)> {
        let mut out = Vec::new();
        for r in 0..=grid.r_max() {
            for (k, &t) in grid.times.iter().enumerate() {
                let c = grid.values[(r, k)];
                let b = self.bound(r, t);
                if c > b + round_off {
                    out.push((r, t, c, b));
                }
            }
        }
        out
    }
}

/// Mandelstam-Tamm time for one (start i, target j, F) triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QslEntry {
    pub i: usize,
    pub j: usize,
    pub f_target: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QslReport {
    /// ΔH_i = √(β_i² + β_{i+1}²), the energy spread of site i (missing bonds count as 0).
    pub delta_h: Vec<f64>,
    pub entries: Vec<QslEntry>,
    /// π / (2√(g_ens² + σ²))
    pub tau_0: f64,
    /// π / (2σ)
    pub tau_l: f64,
    pub g_ens: f64,
    pub sigma: f64,
}

/// Energy spread of every chain site.
pub fn site_energy_spread(coeffs: &ChainCoefficients) -> Vec<f64> {
    let b = &coeffs.betas;
    (0..coeffs.len())
        .map(|i| {
            let left = if i > 0 { b[i - 1] } else { 0.0 };
            let right = b.get(i).copied().unwrap_or(0.0);
            (left * left + right * right).sqrt()
        })
        .collect()
}

/// Mandelstam-Tamm lower bound on the time to reach fidelity `f` with site `j` from site `i`.
/// The Bures angle to the initial state grows no faster than ΔH_i, so the survival F_i can
/// fall to `f` no sooner than arccos(√f)/ΔH_i, and an orthogonal site j can reach `f` no sooner
/// than arcsin(√f)/ΔH_i.
pub fn mt_time(delta_h_i: f64, same_site: bool, f: f64) -> f64 {
    let angle = if same_site { f.sqrt().acos() } else { f.sqrt().asin() };
    if angle == 0.0 {
        0.0
    } else {
        angle / delta_h_i
    }
}

/// τ_ij for every (i, j) in `pairs` and every target fidelity.
pub fn qsl_times(coeffs: &ChainCoefficients, targets: &[f64], pairs: &[(usize, usize)]) -> Result<QslReport> {
    if let Some(f) = targets.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::invalid(format!("fidelity target {f} outside [0, 1]")));
    }
    let delta_h = site_energy_spread(coeffs);
    let m = delta_h.len();
    let mut entries = Vec::with_capacity(targets.len() * pairs.len());
    for &(i, j) in pairs {
        if i >= m || j >= m {
            return Err(Error::invalid(format!("site pair ({i}, {j}) outside a {m}-site chain")));
        }
        for &f in targets {
            entries.push(QslEntry { i, j, f_target: f, tau: mt_time(delta_h[i], i == j, f) });
        }
    }
    let (g_ens, sigma) = match coeffs.mode {
        ChainMode::CavityCoupled => (coeffs.betas.first().copied().unwrap_or(0.0), coeffs.betas.get(1).copied().unwrap_or(0.0)),
        ChainMode::EnsembleOnly => (0.0, coeffs.betas.first().copied().unwrap_or(0.0)),
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    Ok(QslReport {
        delta_h,
        entries,
        tau_0: half_pi / (g_ens * g_ens + sigma * sigma).sqrt(),
        tau_l: half_pi / sigma,
        g_ens,
        sigma,
    })
}

/// First grid time at which the fidelity of site `j` reaches `f` starting from site `i`
/// (falls to `f` when j = i, rises to `f` otherwise).
pub fn first_passage(res: &EvolutionResult, i: usize, j: usize, f: f64) -> Option<f64> {
    (0..res.times.len())
        .find(|&k| {
            let p = res.probability(k, j);
            if i == j {
                p <= f
            } else {
                p >= f
            }
        })
        .map(|k| res.times[k])
}

/// First grid-local maximum of F_j above 1/2, the observed full-swap time.
pub fn first_swap_time(res: &EvolutionResult, j: usize) -> Option<f64> {
    let n = res.times.len();
    (1..n.saturating_sub(1))
        .find(|&k| {
            let p = res.probability(k, j);
            p > 0.5 && p >= res.probability(k - 1, j) && p >= res.probability(k + 1, j)
        })
        .map(|k| res.times[k])
}

/// A local maximum of `series` exceeding `rise` after it first drops below `drop`.
pub fn detect_revival(times: &[f64], series: &[f64], drop: f64, rise: f64) -> Option<(f64, f64)> {
    let start = series.iter().position(|&v| v < drop)?;
    (start.max(1)..series.len().saturating_sub(1))
        .find(|&k| series[k] > rise && series[k] >= series[k - 1] && series[k] >= series[k + 1])
        .map(|k| (times[k], series[k]))
}

#[derive(Debug, Clone)]
pub struct MetricsBundle {
    pub complexity: Vec<f64>,
    pub fidelities: DMatrix<f64>,
    pub correlator: Option<CorrelatorGrid>,
    pub velocity: VelocityProfile,
    pub qsl: QslReport,
}

impl MetricsBundle {
    /// Collects the diagnostics of one run. The correlator is computed when `r_max` is given.
    pub fn compute(
        chain: &KrylovChain,
        res: &EvolutionResult,
        r_max: Option<usize>,
        targets: &[f64],
        start: usize,
    ) -> Result<Self> {
        let m = chain.dim();
        let pairs: Vec<(usize, usize)> = (0..m.min(start + 3)).map(|j| (start, j)).collect();
        let correlator = match r_max {
            Some(r) => Some(correlator(chain, r, &TimeGrid::new(res.times.clone())?)?),
            None => None,
        };
        Ok(MetricsBundle {
            complexity: krylov_complexity(res),
            fidelities: fidelity_grid(res),
            correlator,
            velocity: chain.velocity_profile(),
            qsl: qsl_times(chain.coefficients(), targets, &pairs)?,
        })
    }
}
