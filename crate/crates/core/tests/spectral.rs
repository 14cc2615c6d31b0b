use latfront::lattice::{CubicNagumo, Direction, Norm};
use latfront::spectral::*;
use latfront::wave::*;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn front(rho: f64, d: (i64, i64), gamma: f64) -> (WaveProfile, CubicNagumo) {
    let sys = CubicNagumo::new(rho).unwrap();
    let problem = WaveProblem {
        system: &sys,
        direction: Direction::new(d.0, d.1).unwrap(),
        shift_mode: ShiftMode::Integer,
        gamma,
        grid: ProfileGrid::new(40.0, 0.1).unwrap(),
        scheme: Scheme::default(),
    };
    (solve_wave(&problem, &Guess::Tanh, &NewtonSettings::default()).unwrap(), sys)
}

fn setup(rho: f64, d: (i64, i64), gamma: f64) -> (WaveProfile, Linearization, Translation) {
    let (p, sys) = front(rho, d, gamma);
    let lin = Linearization::new(&p, &sys).unwrap();
    let base = translation_pair(&lin, &p, &sys, &EigenSettings::default()).unwrap();
    (p, lin, base)
}

#[test]
fn translation_mode_of_every_profile() {
    for rho in [0.3, 0.6, 0.9] {
        for d in [(1, 0), (1, 1), (2, 1)] {
            let (p, sys) = front(rho, d, 1e-6);
            let lin = Linearization::new(&p, &sys).unwrap();
            let (t, _) = phase_tangent(&p, &sys).unwrap();
            let dp = to_complex(&t);
            let r = lin.operator(0.0).apply(&dp);
            assert!(max_abs(&r) <= 1e-6 * max_abs(&dp), "rho={rho} {d:?}: {:e}", max_abs(&r));
            let base = translation_pair(&lin, &p, &sys, &EigenSettings::default()).unwrap();
            assert!(base.lambda.norm() <= 1e-6, "rho={rho} {d:?}: λ0={}", base.lambda);
        }
    }
}

#[test]
fn parallel_direction_dispersion_is_exact() {
    let (_, lin, base) = setup(0.9, (1, 0), 1e-6);
    let omegas = omega_samples(PI, 33);
    let br = track_branch(&lin, &base, &omegas, &EigenSettings::default()).unwrap();
    for (i, &w) in omegas.iter().enumerate() {
        let exact = 2.0 * (w.cos() - 1.0);
        let err = (br.lambdas[i] - exact).norm();
        if w == 0.0 {
            assert!(err <= 1e-6);
        } else {
            assert!(err <= 1e-5 * exact.abs(), "ω={w}: {} vs {exact}", br.lambdas[i]);
        }
        let dpsi = br.psis[i].iter().zip(&base.psi).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(dpsi <= 1e-7, "ω={w}: ψ moved by {dpsi:e}");
    }
    // conjugate pairs ±ω
    for i in 0..16 {
        assert!((br.lambdas[i] - br.lambdas[32 - i].conj()).norm() <= 1e-9);
    }
}

#[test]
fn adjoint_normalization_and_localization() {
    let (_, lin, base) = setup(0.5, (2, 1), 1e-6);
    let h = lin.h();
    let n = base.psi.len();
    // trapezoid rule for ∫⟨ψ, φ⟩
    let mut trap = inner(&base.psi, &base.phi, h);
    trap -= 0.5 * h * (base.psi[0].conj() * base.phi[0] + base.psi[n - 1].conj() * base.phi[n - 1]);
    assert!((trap - 1.0).norm() <= 1e-8);
    let peak = max_abs(&base.psi);
    let far = (0..n).filter(|&k| lin.grid.xi(k).abs() > 30.0).map(|k| base.psi[k].norm()).fold(0.0, f64::max);
    assert!(far < 1e-6 * peak, "ψ tail {far:e} vs peak {peak:e}");
}

#[test]
fn adjoint_annihilates_the_range() {
    let (_, lin, base) = setup(0.9, (2, 1), 1e-6);
    let op = lin.operator(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let v: Vec<C64> = (0..lin.dim()).map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
        let mut lv = op.apply(&v);
        for (a, b) in lv.iter_mut().zip(&v) {
            *a -= base.lambda * b;
        }
        let pairing = inner(&base.psi, &lv, lin.h()).norm();
        assert!(pairing <= 1e-8 * norm_h(&v, lin.h()), "{pairing:e}");
    }
}

#[test]
fn melnikov_constants_cross_validate() {
    let s = EigenSettings::default();
    for d in [(1, 0), (1, 1), (2, 1)] {
        let (_, lin, base) = setup(0.9, d, 1e-5);
        let (m, rot) = melnikov_constant(&lin, &base, &s, 1e-3).unwrap();
        assert!(m.integral > 0.0 && m.discrepancy <= 1e-3, "{d:?}: {m:?}");
        if d == (1, 0) {
            assert!((m.integral - 2.0).abs() <= 1e-4);
        }
        let trivial = d != (2, 1);
        assert_eq!(max_abs(&rot.phi1) <= 1e-6, trivial, "{d:?}: ‖φ₁‖ = {:e}", max_abs(&rot.phi1));
    }
}

#[test]
fn rotated_eigenvalue_derivative_matches_finite_differences() {
    let (_, lin, base) = setup(0.9, (2, 1), 1e-5);
    let s = EigenSettings::default();
    let rot = rotated_derivatives(&lin, &base).unwrap();
    let fd = lambda1_fd(&lin, &base, 1e-3, &s).unwrap();
    assert!((rot.lambda1 - fd).norm() <= 1e-4 * rot.lambda1.norm(), "{} vs {fd}", rot.lambda1);
}

#[test]
fn diagonal_second_order_term_is_negative() {
    let (_, lin, base) = setup(0.9, (1, 1), 1e-5);
    let mut a = vec![C64::new(0.0, 0.0); lin.dim()];
    lin.rotated_second().matvec(&base.phi, &mut a);
    let scale = max_abs(&a);
    assert!(a.iter().all(|v| v.re <= 1e-12 * scale && v.im.abs() <= 1e-12 * scale));
    assert!(inner(&base.psi, &a, lin.h()).re < 0.0);
}

#[test]
fn branch_is_quadratically_tangent() {
    let (_, lin, base) = setup(0.9, (2, 1), 1e-5);
    let s = EigenSettings::default();
    let (m, _) = melnikov_constant(&lin, &base, &s, 1e-3).unwrap();
    let omegas = omega_samples(PI / 4.0, 129);
    let br = track_branch(&lin, &base, &omegas, &s).unwrap();
    // least squares for Re λ ≈ a + b ω + q ω² on |ω| ≤ 0.2
    let pts: Vec<(f64, f64)> =
        omegas.iter().zip(&br.lambdas).filter(|(w, _)| w.abs() <= 0.2 + 1e-12).map(|(w, l)| (*w, l.re)).collect();
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    for &(w, y) in &pts {
        let r = nalgebra::Vector3::new(1.0, w, w * w);
        ata += r * r.transpose();
        atb += r * y;
    }
    let coef = ata.lu().solve(&atb).unwrap();
    assert!((coef[2] + m.integral / 2.0).abs() <= 0.05 * m.integral / 2.0, "{} vs {}", coef[2], -m.integral / 2.0);
    // Re λ_ω ≤ −κ ω² on [−0.3, 0.3] for some κ > 0
    let kappa = omegas
        .iter()
        .zip(&br.lambdas)
        .filter(|(w, _)| w.abs() <= 0.3 && **w != 0.0)
        .map(|(w, l)| -l.re / (w * w))
        .fold(f64::INFINITY, f64::min);
    assert!(kappa > 0.0);
    // no branch jumps: |dλ/dω| stays below 10 across the sweep
    for k in 1..br.lambdas.len() {
        let jump = (br.lambdas[k] - br.lambdas[k - 1]).norm();
        assert!(jump <= 10.0 * (omegas[k] - omegas[k - 1]), "jump {jump} at ω={}", omegas[k]);
    }
}

#[test]
fn frequency_lde_decay_rate_matches_spectral_gap() {
    let (_, lin, _) = setup(0.9, (2, 1), 1e-6);
    let op = lin.operator(PI);
    let eig = dense_eigenvalues(&op).unwrap();
    let lead = least_stable(&eig);
    assert!(lead.re < 0.0);
    let w0: Vec<C64> = (0..lin.dim())
        .map(|k| {
            let x = lin.grid.xi(k);
            C64::new((-x * x / 4.0).exp(), 0.0)
        })
        .collect();
    let ser = evolve_frequency_lde(&op, &w0, 100.0, 0.02, 0.5).unwrap();
    let n = ser.times.len();
    let i0 = n / 2;
    let rate = (ser.norms[n - 1].ln() - ser.norms[i0].ln()) / (ser.times[n - 1] - ser.times[i0]);
    assert!((rate - lead.re).abs() <= 0.1 * lead.re.abs(), "rate {rate} vs {}", lead.re);
}

#[test]
fn zero_frequency_evolution_keeps_translation_and_damps_the_rest() {
    let (_, lin, base) = setup(0.9, (2, 1), 1e-6);
    let op = lin.operator(0.0);
    let h = lin.h();
    let dp = to_complex(&base.dphi);
    let ser = evolve_frequency_lde(&op, &dp, 50.0, 0.02, 5.0).unwrap();
    let n0 = ser.norms[0];
    assert!(ser.norms.iter().all(|v| (v - n0).abs() <= 1e-4 * n0));
    // a profile-shaped bump with the ψ-component removed
    let mut w0: Vec<C64> = (0..lin.dim())
        .map(|k| {
            let x = lin.grid.xi(k);
            C64::new(x * (-x * x / 8.0).exp(), 0.0)
        })
        .collect();
    let a = inner(&base.psi, &w0, h);
    for (w, p) in w0.iter_mut().zip(&base.phi) {
        *w -= a * p;
    }
    let ser = evolve_frequency_lde(&op, &w0, 50.0, 0.02, 5.0).unwrap();
    let last = *ser.norms.last().unwrap();
    assert!(last < 1e-3 * ser.norms[0], "{last:e} vs {:e}", ser.norms[0]);
}

#[test]
fn essential_spectrum_is_the_equilibrium_slope() {
    for rho in [0.3, 0.9] {
        let (p, sys) = front(rho, (2, 1), 1e-6);
        let m = essential_spectrum_margin(&sys, p.direction, p.c, 257, 257).unwrap();
        let exact = -5.0 * (1.0 - rho);
        assert!((m.max_re - exact).abs() <= 1e-3 && m.max_re < 0.0, "ρ={rho}: {m:?}");
    }
}

#[test]
fn multiplier_decay_exponents() {
    let times: Vec<f64> = (0..=12).map(|k| 2f64.powi(k)).collect();
    for k in 0..3 {
        let s = multiplier_norm_scaling(k, 1.0, &times[4..], Norm::Inf, Norm::One).unwrap();
        let want = 0.5 * k as f64 + 0.5;
        assert!((s.fit.exponent - want).abs() <= 0.05, "k={k}: {}", s.fit.exponent);
    }
    let norms: Vec<f64> = times.iter().map(|&t| multiplier_norm(0, 1.0, t, Norm::Two, Norm::Two).unwrap()).collect();
    assert!(norms.iter().all(|v| *v <= 1.0 + 1e-12));
    assert!(norms.windows(2).all(|w| w[1] <= w[0] + 1e-15));
}

#[test]
fn lattice_sum_of_adjoint_pairing_is_one() {
    let (p, sys) = front(0.9, (2, 1), 1e-6);
    let grid = ProfileGrid::new(40.0, 0.05).unwrap();
    let q = solve_lattice_wave(&sys, &p, grid, Scheme::Biased(7), &NewtonSettings::default()).unwrap();
    let lin = Linearization::new(&q, &sys).unwrap();
    let base = translation_pair(&lin, &q, &sys, &EigenSettings::default()).unwrap();
    let phi = GridFunction::from_complex(q.grid, 1, &base.phi);
    let psi = GridFunction::from_complex(q.grid, 1, &base.psi);
    for theta in [0.0, 0.25, 0.5, 0.75] {
        let s = lattice_pairing(&psi, &phi, theta);
        assert!((s - 1.0).abs() <= 1e-6, "θ={theta}: {s}");
    }
}
