//! Worked examples for each stage of the pipeline, checked against independent values.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use num_complex::Complex64;

use krylov_ensemble::chain::{build_chain, Frame};
use krylov_ensemble::metrics::{correlator, krylov_complexity, qsl_times};
use krylov_ensemble::oracle::{build_restricted, evolve_full};
use krylov_ensemble::propagate::{
    evolve_eig, evolve_spectral, gaussian_propagator, StateVector, TimeGrid,
};
use krylov_ensemble::recursion::{
    assemble, closed_form_coefficients, hankel_coefficients, stieltjes_coefficients,
};
use krylov_ensemble::spectra::{CouplingModel, SpectralDistribution, Spin};
use krylov_ensemble::Error;

/// Composite Simpson rule; fine enough for the smooth, compactly supported densities here.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn densities_integrate_to_one() {
    for q in [-0.9, -0.5, 0.0, 0.3, 0.7, 0.9] {
        let d = SpectralDistribution::q_gaussian(0.5, 1.5, q).unwrap();
        let x0 = 2.0 * 1.5 / (1.0 - q as f64).sqrt();
        let (lo, hi) = d.support().unwrap();
        assert_relative_eq!(lo, 0.5 - x0, epsilon = 1e-12);
        assert_relative_eq!(hi, 0.5 + x0, epsilon = 1e-12);
        let m = d.moments_quadrature(3).unwrap();
        assert!((m[0] - 1.0).abs() <= 1e-10, "q = {q}: {}", m[0]);
        assert!(m[1].abs() <= 1e-12 && m[3].abs() <= 1e-12);
        assert!((m[2] - 1.5 * 1.5).abs() <= 1e-9);
    }
    let u = SpectralDistribution::uniform(0.0, 1.0).unwrap();
    assert_eq!(u.support().unwrap(), (-(3f64.sqrt()), 3f64.sqrt()));
    assert!((simpson(|w| u.density(w).unwrap(), -(3f64.sqrt()), 3f64.sqrt(), 10) - 1.0).abs() <= 1e-14);
}

#[test]
fn density_values() {
    let u = SpectralDistribution::uniform(0.0, 1.0).unwrap();
    assert_relative_eq!(u.density(0.0).unwrap(), 1.0 / (2.0 * 3f64.sqrt()), epsilon = 1e-15);
    assert_eq!(u.density(2.0).unwrap(), 0.0);
    let s = SpectralDistribution::q_gaussian(0.0, 1.0, 0.0).unwrap();
    assert_relative_eq!(s.density(0.0).unwrap(), 1.0 / PI, epsilon = 1e-14);
}

#[test]
fn askey_density_approaches_gaussian() {
    let q = SpectralDistribution::q_gaussian(0.0, 1.0, 1.0 - 1e-6).unwrap();
    // Each evaluation runs the product out to ~10⁷ factors at this q, so keep the grid coarse.
    for i in 0..=24 {
        let x = -3.0 + 0.25 * i as f64;
        let gauss = (-x * x / 2.0).exp() / (2.0 * PI).sqrt();
        let v = q.density(x).unwrap();
        assert!((v - gauss).abs() <= 1e-4, "x = {x}: {v} vs {gauss}");
    }
}

#[test]
fn moment_examples() {
    let g = SpectralDistribution::gaussian(0.0, 1.0).unwrap().moments(6).unwrap();
    assert_eq!(g.get(4), 3.0);
    assert_eq!(g.get(6), 15.0);
    assert!((1..=5).step_by(2).all(|k| g.get(k) == 0.0));
    let u = SpectralDistribution::uniform(0.0, 1.0).unwrap().moments(2).unwrap();
    assert_relative_eq!(u.get(2), 1.0, epsilon = 1e-15);
    let t = SpectralDistribution::tsallis(0.0, 1.0, 1.2).unwrap().moments(10).unwrap();
    assert!(!t.is_finite(10) && t.get(10).is_infinite());
    assert!(t.is_finite(8));
}

#[test]
fn sampling_examples() {
    let d = SpectralDistribution::gaussian(0.0, 1.0).unwrap();
    let model = CouplingModel::UniformG { g_eff: 1.0 };
    let SpectralDistribution::Discrete { spins } = d.sample_discrete(4, 1, &model).unwrap() else { panic!() };
    assert!(spins.iter().all(|s| s.g == 0.5));
    assert!(d.sample_discrete(0, 1, &model).is_err());
    let SpectralDistribution::Discrete { spins } = d.sample_discrete(10_000, 1, &model).unwrap() else { panic!() };
    let n = spins.len() as f64;
    let mean = spins.iter().map(|s| s.omega).sum::<f64>() / n;
    let var = spins.iter().map(|s| (s.omega - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((var - 1.0).abs() <= 0.05, "sample variance {var}");
}

#[test]
fn closed_form_examples() {
    let g = closed_form_coefficients(&SpectralDistribution::gaussian(0.0, 1.0).unwrap(), 5).unwrap();
    assert_eq!(g.beta(4), Some(2.0));
    let s = closed_form_coefficients(&SpectralDistribution::q_gaussian(0.0, 1.0, 0.0).unwrap(), 16).unwrap();
    assert!(s.betas.iter().all(|&b| b == 1.0));
    // q = −1: b_1 = σ and b_2 = 0, so the chain ends after two sites.
    let two = closed_form_coefficients(&SpectralDistribution::q_gaussian(0.0, 1.0, -1.0).unwrap(), 10).unwrap();
    assert_eq!(two.betas, vec![1.0]);
    let u = closed_form_coefficients(&SpectralDistribution::uniform(0.0, 1.0).unwrap(), 3).unwrap();
    assert_relative_eq!(u.betas[0], 1.0, epsilon = 1e-15);
    let q1 = closed_form_coefficients(&SpectralDistribution::q_gaussian(0.0, 1.0, 1.0).unwrap(), 40).unwrap();
    let gauss = closed_form_coefficients(&SpectralDistribution::gaussian(0.0, 1.0).unwrap(), 40).unwrap();
    assert_eq!(q1.betas, gauss.betas);
}

#[test]
fn hankel_examples() {
    let m = SpectralDistribution::gaussian(0.0, 1.0).unwrap().moments(7).unwrap();
    let h = hankel_coefficients(&m, 4).unwrap();
    assert_relative_eq!(h.betas[0], 1.0, epsilon = 1e-15);
    assert_relative_eq!(h.betas[1], 2f64.sqrt(), epsilon = 1e-15);
    assert_relative_eq!(h.betas[2], 3f64.sqrt(), epsilon = 1e-15);
    assert!(h.alphas.iter().all(|&a| a == 0.0));

    let t = SpectralDistribution::tsallis(0.0, 1.0, 1.2).unwrap().moments(15).unwrap();
    match hankel_coefficients(&t, 8) {
        Err(Error::DivergentMoments { largest_valid_n, .. }) => assert_eq!(largest_valid_n, 4),
        other => panic!("expected a divergent-moment error, got {other:?}"),
    }
    let ok = hankel_coefficients(&t, 5).unwrap();
    assert_relative_eq!(ok.betas[0], (t.get(2) / t.get(0)).sqrt(), epsilon = 1e-15);
}

#[test]
fn stieltjes_examples() {
    let s = 1.0 / 2f64.sqrt();
    let two = SpectralDistribution::discrete(vec![Spin { omega: -1.0, g: s }, Spin { omega: 1.0, g: s }]).unwrap();
    let c = stieltjes_coefficients(&two, 2).unwrap();
    assert_relative_eq!(c.betas[0], 1.0, epsilon = 1e-15);
    assert_eq!(c.alphas[1], 0.0);
    assert!(matches!(stieltjes_coefficients(&two, 3), Err(Error::ChainExhausted { .. })));
}

/// b_1..b_6 of a Stieltjes chain on 20000 Gaussian samples against σ√n. Sampling noise in the
/// moments up to order 12 makes this statistical claim fail for most seeds (see README).
#[test]
fn stieltjes_converges_on_large_samples() {
    let d = SpectralDistribution::gaussian(0.0, 1.0).unwrap();
    let sample = d.sample_discrete(20_000, 0, &CouplingModel::UniformG { g_eff: 1.0 }).unwrap();
    let c = stieltjes_coefficients(&sample, 7).unwrap();
    let worst = (0..6).map(|i| (c.betas[i] / ((i + 1) as f64).sqrt() - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst <= 0.03, "max relative deviation of b_1..b_6: {worst:.3}");
}

#[test]
fn assemble_examples() {
    let b = closed_form_coefficients(&SpectralDistribution::gaussian(0.0, 1.0).unwrap(), 4).unwrap();
    let c = assemble(&b, 0.0, 0.7).unwrap();
    assert_eq!(c.betas, vec![0.7, 1.0, 2f64.sqrt(), 3f64.sqrt()]);
    assert!(c.alphas.iter().all(|&a| a == 0.0));
    let dark = assemble(&b, 0.0, 0.0).unwrap();
    assert_eq!(dark.betas[0], 0.0);
}

#[test]
fn chain_examples() {
    let g = closed_form_coefficients(&SpectralDistribution::gaussian(2.0, 1.0).unwrap(), 3).unwrap();
    let h = build_chain(&g, 3, Frame::Rotating).unwrap().matrix();
    let r2 = 2f64.sqrt();
    let expect = nalgebra::DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, r2, 0.0, r2, 0.0]);
    assert_eq!(h, expect);

    let q = closed_form_coefficients(&SpectralDistribution::q_gaussian(0.0, 1.0, -1.0).unwrap(), 10).unwrap();
    let chain = build_chain(&q, 10, Frame::Rotating).unwrap();
    assert_eq!(chain.dim(), 2);
    assert_eq!(chain.clipped_from(), Some(10));

    let v = build_chain(&closed_form_coefficients(&SpectralDistribution::gaussian(0.0, 1.0).unwrap(), 128).unwrap(), 128, Frame::Rotating)
        .unwrap()
        .velocity_profile();
    assert_relative_eq!(v.v_max, 2.0 * 127f64.sqrt(), epsilon = 1e-13);
    let u = build_chain(&closed_form_coefficients(&SpectralDistribution::uniform(0.0, 1.0).unwrap(), 512).unwrap(), 512, Frame::Rotating)
        .unwrap()
        .velocity_profile();
    assert!((u.v.last().unwrap() - 3f64.sqrt()).abs() < 1e-5);
    assert_eq!(u.analytic_bound, Some(3f64.sqrt()));
}

#[test]
fn laguerre_column_is_unitary() {
    let u = gaussian_propagator(1.0, 6.0, 200).unwrap();
    let norm: f64 = (0..200).map(|n| u[(n, 0)].norm_sqr()).sum();
    assert!((1.0 - norm).abs() < 1e-10, "deficit {}", 1.0 - norm);
    assert_relative_eq!(u[(0, 0)].re, (-18.0f64).exp(), max_relative = 1e-12);
    for n in 0..20 {
        for m in 0..20 {
            assert!((u[(n, m)] - u[(m, n)]).norm() < 1e-14);
        }
    }
}

#[test]
fn spectral_matches_eig_for_the_semicircle() {
    let d = SpectralDistribution::q_gaussian(0.0, 1.0, 0.0).unwrap();
    let c = closed_form_coefficients(&d, 64).unwrap();
    let chain = build_chain(&c, 64, Frame::Rotating).unwrap();
    let times = TimeGrid::linspace(0.0, 5.0, 51).unwrap();
    for start in [0, 3] {
        let psi = StateVector::basis(64, start).unwrap();
        let a = evolve_eig(&chain, &psi, &times).unwrap();
        let b = evolve_spectral(&c, &d, &psi, &times, Frame::Rotating).unwrap();
        assert!(a.max_deviation(&b, 64) <= 1e-10);
    }
}

#[test]
fn two_point_complexity_stays_on_the_dimer() {
    let q = closed_form_coefficients(&SpectralDistribution::q_gaussian(0.0, 1.0, -1.0).unwrap(), 10).unwrap();
    let chain = build_chain(&q, 10, Frame::Rotating).unwrap();
    let times = TimeGrid::linspace(0.0, 10.0, 201).unwrap();
    let res = evolve_eig(&chain, &StateVector::basis(chain.dim(), 0).unwrap(), &times).unwrap();
    for (k, (&t, kt)) in times.as_slice().iter().zip(krylov_complexity(&res)).enumerate() {
        assert!((0.0..=1.0 + 1e-14).contains(&kt));
        assert_relative_eq!(kt, t.sin().powi(2), epsilon = 1e-13);
        assert_relative_eq!(res.probability(k, 0), t.cos().powi(2), epsilon = 1e-13);
    }
}

#[test]
fn qsl_examples() {
    let q0 = closed_form_coefficients(&SpectralDistribution::q_gaussian(0.0, 1.0, 0.0).unwrap(), 16).unwrap();
    let cavity = assemble(&q0, 0.0, 1.0).unwrap();
    let rep = qsl_times(&cavity, &[1.0, 0.0], &[(1, 1)]).unwrap();
    assert_relative_eq!(rep.tau_0, PI / (2.0 * 2f64.sqrt()), epsilon = 1e-15);
    assert_eq!(rep.entries[0].tau, 0.0);
    let ens = qsl_times(&q0, &[0.5], &[(0, 0)]).unwrap();
    assert_relative_eq!(ens.tau_l, PI / 2.0, epsilon = 1e-15);
}

#[test]
fn correlator_examples() {
    let q0 = closed_form_coefficients(&SpectralDistribution::q_gaussian(0.0, 1.0, 0.0).unwrap(), 32).unwrap();
    let chain = build_chain(&q0, 32, Frame::Rotating).unwrap();
    let grid = correlator(&chain, 10, &TimeGrid::new(vec![0.0]).unwrap()).unwrap();
    assert_relative_eq!(grid.values[(1, 0)], 1.0, epsilon = 1e-12);
    assert!((2..=10).all(|r| grid.values[(r, 0)] < 1e-12));
}

#[test]
fn dark_states_are_stationary() {
    let spins = vec![Spin { omega: 0.3, g: 0.5 }, Spin { omega: 0.3, g: 0.5 }, Spin { omega: 0.3, g: 0.5 }];
    let ens = SpectralDistribution::discrete(spins).unwrap();
    let h = build_restricted(&ens, 0.0).unwrap();
    // Orthogonal to the photon and to the bright state (1, 1, 1)/√3.
    let s = 1.0 / 2f64.sqrt();
    let dark = StateVector::from_real(&[0.0, s, -s, 0.0]).unwrap();
    let times = TimeGrid::linspace(0.0, 20.0, 41).unwrap();
    let res = evolve_full(&h, &dark, &times).unwrap();
    for k in 0..times.len() {
        let phase = Complex64::from_polar(1.0, -0.3 * times.as_slice()[k]);
        for (n, c) in res.state_at(k).iter().enumerate() {
            assert!((c - phase * dark.amplitudes()[n]).norm() < 1e-12);
        }
    }
}

/// The last chain site stays empty until the front could have reached it.
#[test]
fn truncation_is_honest_in_the_acceptance_windows() {
    let cases = [
        (SpectralDistribution::gaussian(0.0, 1.0).unwrap(), 400, 6.0),
        (SpectralDistribution::gaussian(0.0, 1.0).unwrap(), 256, 6.0),
        (SpectralDistribution::q_gaussian(0.0, 1.0, 0.0).unwrap(), 128, 30.0),
        (SpectralDistribution::q_gaussian(0.0, 1.0, -0.999).unwrap(), 128, 3.0 * PI),
    ];
    for (d, m, window) in cases {
        let chain = build_chain(&closed_form_coefficients(&d, m).unwrap(), m, Frame::Rotating).unwrap();
        let t_end = window.min(0.8 * chain.t_reflect());
        let times = TimeGrid::linspace(0.0, t_end, 200).unwrap();
        let last = chain.dim() - 1;
        let res = evolve_eig(&chain, &StateVector::basis(chain.dim(), 0).unwrap(), &times).unwrap();
        let worst = (0..times.len()).map(|k| res.amplitudes[(k, last)].norm()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{}: |c_last| reached {worst:e}", d.family_name());
    }
}
