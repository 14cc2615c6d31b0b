use latfront::error::Error;
use latfront::lattice::{CubicNagumo, Direction, Norm, PlaneState};
use latfront::sim::*;
use latfront::wave::*;
use std::sync::OnceLock;

fn frame(d: (i64, i64)) -> &'static (CubicNagumo, Frame) {
    static F10: OnceLock<(CubicNagumo, Frame)> = OnceLock::new();
    static F21: OnceLock<(CubicNagumo, Frame)> = OnceLock::new();
    let cell = if d == (1, 0) { &F10 } else { &F21 };
    cell.get_or_init(|| {
        let sys = CubicNagumo::new(0.9).unwrap();
        let problem = WaveProblem {
            system: &sys,
            direction: Direction::new(d.0, d.1).unwrap(),
            shift_mode: ShiftMode::Integer,
            gamma: 1e-6,
            grid: ProfileGrid::new(40.0, 0.1).unwrap(),
            scheme: Scheme::default(),
        };
        let p = solve_wave(&problem, &Guess::Tanh, &NewtonSettings::default()).unwrap();
        let f = Frame::build(&sys, &p, &FrameSettings::default()).unwrap();
        (sys, f)
    })
}

fn small_config(kind: PerturbationKind, amplitude: f64, seed: u64) -> SimConfig {
    SimConfig {
        n_lo: -40,
        n_hi: 40,
        l_count: 16,
        t_end: 10.0,
        perturbation: Perturbation { kind, amplitude, support: 3, seed },
        ..Default::default()
    }
}

/// u = Ψ(n + a_l) built from the profile directly.
fn translated(f: &Frame, n_lo: i64, n_hi: i64, shifts: &[f64]) -> PlaneState {
    PlaneState::from_fn(n_lo, n_hi, shifts.len(), |n, l| f.lattice_wave.eval(n as f64 + shifts[l], 0, INTERP_POINTS))
}

#[test]
fn unperturbed_front_has_zero_norms() {
    let (sys, f) = frame((1, 0));
    let rec = run_experiment(sys, f, &small_config(PerturbationKind::RandomLocal, 0.0, 1)).unwrap();
    assert_eq!(rec.v0_norm, 0.0);
    for r in &rec.rows {
        assert!(r.values()[1..].iter().all(|v| v.abs() <= 1e-9), "{r:?}");
    }
}

#[test]
fn rk4_is_fourth_order() {
    let (sys, f) = frame((2, 1));
    let u0 = front_plane(&f.lattice_wave, -20, 70, 4, 0.0);
    let run = |dt: f64| {
        let mut u = u0.clone();
        for _ in 0..(10.0 / dt).round() as usize {
            u = step_rk4(&u, dt, sys, f.direction).unwrap();
        }
        u
    };
    let gap = |a: &PlaneState, b: &PlaneState| a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    // the lattice wave is itself only accurate to its profile discretization,
    // so the order is measured against a much finer RK4 run
    let fine = run(0.003125);
    let e: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&dt| gap(&run(dt), &fine)).collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 3.6 && order < 4.4, "observed order {order} from {e:?}");
    }
    let exact = front_plane(&f.lattice_wave, -20, 70, 4, 10.0);
    assert!(gap(&fine, &exact) <= 1e-5, "{:e}", gap(&fine, &exact));
}

#[test]
fn rigid_translate_is_pure_phase() {
    let (_, f) = frame((2, 1));
    let reference = ReferenceFront::new(&CubicNagumo::new(0.9).unwrap(), &f.lattice_wave, -40, 40).unwrap();
    for a in [-0.1, 0.037, 0.1] {
        let u = translated(f, -40, 40, &[a; 8]);
        let iface = extract_interface(&u, f, &reference, None, &InterfaceSettings::default()).unwrap();
        assert!(iface.theta.iter().all(|t| (t - a).abs() <= 1e-9), "a={a}: {:?}", iface.theta);
        assert!(Norm::Inf.of(&iface.w.values) <= 1e-9);
    }
}

#[test]
fn transverse_phase_wave_is_recovered() {
    let (_, f) = frame((2, 1));
    let reference = ReferenceFront::new(&CubicNagumo::new(0.9).unwrap(), &f.lattice_wave, -40, 40).unwrap();
    let l_count = 32;
    let want: Vec<f64> = (0..l_count).map(|l| 0.05 * (std::f64::consts::TAU * l as f64 / l_count as f64).cos()).collect();
    let u = translated(f, -40, 40, &want);
    let iface = extract_interface(&u, f, &reference, None, &InterfaceSettings::default()).unwrap();
    let gap = iface.theta.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap <= 1e-3, "{gap:e}");
    assert!(iface.defect <= 1e-8);
    let back = reconstruct(&iface.theta, &iface.w, f, &reference).unwrap();
    let rt = back.values.iter().zip(&u.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(rt <= 1e-10);
}

#[test]
fn gauge_is_constant_for_a_translated_front() {
    let (sys, f) = frame((2, 1));
    let mut reference = ReferenceFront::new(sys, &f.lattice_wave, -40, 40).unwrap();
    let a = 0.063;
    let mut u = translated(f, -40, 40, &[a; 6]);
    let s = InterfaceSettings::default();
    for _ in 0..5 {
        for _ in 0..10 {
            u = step_rk4(&u, 0.1, sys, f.direction).unwrap();
            reference.step(sys, 0.1);
        }
        reference.time = u.time;
        let iface = extract_interface(&u, f, &reference, None, &s).unwrap();
        assert!(iface.theta.iter().all(|t| (t - a).abs() <= 1e-8), "t={}: {:?}", u.time, iface.theta);
        assert!(Norm::Inf.of(&iface.w.values) <= 1e-8);
    }
}

#[test]
fn random_run_round_trips_and_meets_the_constraint() {
    let (sys, f) = frame((2, 1));
    let rec = run_experiment(sys, f, &small_config(PerturbationKind::RandomLocal, 1e-2, 3)).unwrap();
    assert!(rec.max_roundtrip <= 1e-10, "{:e}", rec.max_roundtrip);
    assert!(rec.max_defect <= 1e-8, "{:e}", rec.max_defect);
    assert!(rec.v0_norm > 0.0);
    for r in &rec.rows {
        assert!(r.theta_l2 >= r.theta_linf && r.thetadiff_l2 >= r.thetadiff_linf && r.w_p2 >= r.w_pinf);
    }
}

#[test]
fn runs_are_deterministic_in_the_seed() {
    let (sys, f) = frame((1, 0));
    let a = run_experiment(sys, f, &small_config(PerturbationKind::RandomLocal, 1e-2, 11)).unwrap();
    let b = run_experiment(sys, f, &small_config(PerturbationKind::RandomLocal, 1e-2, 11)).unwrap();
    let c = run_experiment(sys, f, &small_config(PerturbationKind::RandomLocal, 1e-2, 12)).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.final_state.values, b.final_state.values);
    assert_ne!(a.rows, c.rows);
}

#[test]
fn comoving_window_matches_a_fixed_one() {
    let (sys, f) = frame((1, 0));
    let mut cfg = small_config(PerturbationKind::PhaseBump, 1e-2, 1);
    cfg.t_end = 5.0;
    let moving = run_experiment(sys, f, &cfg).unwrap();
    cfg.comoving = false;
    let fixed = run_experiment(sys, f, &cfg).unwrap();
    for (a, b) in moving.rows.iter().zip(&fixed.rows) {
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12 + 1e-8 * y.abs(), "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn distance_to_the_front_family_does_not_grow() {
    let (sys, f) = frame((1, 0));
    let cfg = SimConfig { n_lo: -20, n_hi: 60, ..small_config(PerturbationKind::RandomLocal, 1e-3, 5) };
    let mut reference = ReferenceFront::new(sys, &f.lattice_wave, cfg.n_lo, cfg.n_hi).unwrap();
    let (mut u, _) = init_perturbation(f, &reference, cfg.l_count, &cfg.perturbation, Norm::Inf).unwrap();
    let s = InterfaceSettings::default();
    let mut dist = Vec::new();
    for _ in 0..15 {
        for _ in 0..10 {
            u = step_rk4(&u, 0.1, sys, f.direction).unwrap();
            reference.step(sys, 0.1);
        }
        reference.time = u.time;
        let iface = extract_interface(&u, f, &reference, None, &s).unwrap();
        let mean = iface.theta.iter().sum::<f64>() / iface.theta.len() as f64;
        let mut zero = iface.w.clone();
        zero.values.iter_mut().for_each(|v| *v = 0.0);
        let family = reconstruct(&vec![mean; cfg.l_count], &zero, f, &reference).unwrap();
        dist.push(u.values.iter().zip(&family.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    // after the first few time units the distance only shrinks
    for w in dist[3..].windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-6), "{dist:?}");
    }
}

#[test]
fn huge_steps_blow_up() {
    let (sys, f) = frame((1, 0));
    let mut u = front_plane(&f.lattice_wave, -20, 20, 4, 0.0);
    let mut err = None;
    for _ in 0..20 {
        match step_rk4(&u, 50.0, sys, f.direction) {
            Ok(v) => u = v,
            Err(e) => {
                err = Some(e);
                break;
            }
        }
    }
    assert!(matches!(err, Some(Error::BlowUp { .. })), "{err:?}");
}

#[test]
fn far_translates_leave_the_tube() {
    let (_, f) = frame((1, 0));
    let reference = ReferenceFront::new(&CubicNagumo::new(0.9).unwrap(), &f.lattice_wave, -40, 40).unwrap();
    let u = translated(f, -40, 40, &[0.0, 0.0, 12.0, 0.0]);
    let r = extract_interface(&u, f, &reference, None, &InterfaceSettings::default());
    assert!(matches!(r, Err(Error::OutOfTube(ref ls)) if ls == &vec![2]), "{r:?}");
}

#[test]
fn perturbation_amplitude_is_bounded() {
    let (_, f) = frame((1, 0));
    let reference = ReferenceFront::new(&CubicNagumo::new(0.9).unwrap(), &f.lattice_wave, -40, 40).unwrap();
    let p = Perturbation { kind: PerturbationKind::ThetaWave, amplitude: 0.2, support: 1, seed: 0 };
    assert!(matches!(init_perturbation(f, &reference, 8, &p, Norm::Inf), Err(Error::Config(_))));
}

fn synthetic(f: impl Fn(f64) -> f64) -> Vec<SimRow> {
    (0..200)
        .map(|i| {
            let t = 200.0 * i as f64 / 199.0;
            let v = f(t);
            SimRow { t, theta_l2: v, theta_linf: v, thetadiff_l2: v, thetadiff_linf: v, w_p2: v, w_pinf: v }
        })
        .collect()
}

#[test]
fn decay_fits_on_synthetic_series() {
    let rows = synthetic(|t| 3.7 * (1.0 + t).powf(-0.75));
    let (lo, hi) = default_window(&rows);
    let fit = fit_decay(&rows, "theta_linf", lo, hi).unwrap();
    assert!((fit.exponent() - 0.75).abs() <= 1e-6 && !fit.flagged());
    assert!(fit.meets(0.8, 0.05) && !fit.meets(0.8, 0.04));

    let flat = fit_decay(&synthetic(|_| 0.3), "w_pinf", lo, hi).unwrap();
    assert!(flat.exponent().abs() <= 1e-12);

    let log = fit_decay(&synthetic(|t| (1.0 + t).ln() / (1.0 + t)), "w_p2", 50.0, 200.0).unwrap();
    assert!(log.exponent() < 1.0 && log.flagged(), "{:?}", log.fit);

    assert!(matches!(fit_decay(&rows, "nope", lo, hi), Err(Error::Config(_))));
    assert!(matches!(fit_decay(&rows, "w_p2", 300.0, 400.0), Err(Error::Fit(_))));
}
