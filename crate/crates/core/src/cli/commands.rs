use super::artifacts::{num, Artifacts, Csv};
use super::*;
use crate::error::Result;
use crate::lattice::{CubicNagumo, ReactionSystem};
use crate::sim::{
    default_window, fit_decay, run_experiment, Frame, FrameSettings, Perturbation, SimConfig, SimRow, COLUMNS,
};
use crate::spectral::{
    essential_spectrum_margin, melnikov_constant, multiplier_norm_scaling, omega_samples, track_branch,
    translation_pair, EigenSettings, Linearization, Melnikov,
};
use crate::wave::{
    assemble_residual, c_of_rho, pinning_threshold, solve_wave, CRhoSample, Guess, NewtonSettings, PinningSettings,
    ProfileGrid, WaveProblem, WaveProfile,
};
use rayon::prelude::*;
use std::time::Instant;

/// Runs one parsed command; Ok(false) means the run completed but a
/// requested check failed.
pub fn dispatch(cmd: &Command, name: &str, conf: &str) -> Result<bool> {
    let start = Instant::now();
    let (common, ok, art) = match cmd {
        Command::Wave(a) => (&a.common, true, wave(a)?),
        Command::Pin(a) => (&a.common, true, pin(a)?),
        Command::Spectrum(a) => (&a.common, true, spectrum(a)?),
        Command::Melnikov(a) => {
            let (ok, art) = melnikov(a)?;
            (&a.common, ok, art)
        }
        Command::MelnikovPolar(a) => {
            let (ok, art) = melnikov_polar(a)?;
            (&a.common, ok, art)
        }
        Command::EssSpec(a) => (&a.common, true, ess_spec(a)?),
        Command::Simulate(a) => (&a.common, true, simulate(a)?),
        Command::DecayFit(a) => {
            let (ok, art) = decay_fit(a)?;
            (&a.common, ok, art)
        }
        Command::ReproduceFigure(a) => {
            let (ok, art) = reproduce_figure(a)?;
            (&a.common, ok, art)
        }
    };
    debug_assert_eq!(art.dir, common.out);
    let manifest = art.finish(name, conf, start.elapsed().as_secs_f64())?;
    println!("manifest: {}", manifest.display());
    if !ok {
        eprintln!("check failed; see {}", common.out.display());
    }
    Ok(ok)
}

fn check_front(f: &FrontArgs) -> Result<()> {
    let bad = |what: &str, v: f64| Err(Error::Config(format!("{what}, got {v}")));
    if !(f.rho > -1.0 && f.rho < 1.0) {
        return bad("rho must lie in (-1, 1)", f.rho);
    }
    if !(f.gamma > 0.0 && f.gamma.is_finite()) {
        return bad("gamma must be positive", f.gamma);
    }
    if !(f.h > 0.0 && f.h.is_finite()) {
        return bad("h must be positive", f.h);
    }
    if !(f.half_length > 0.0 && f.half_length.is_finite()) {
        return bad("half-length must be positive", f.half_length);
    }
    Ok(())
}

/// The front described by `f`: solved from a tanh, refined from `--profile`
/// when `refine`, or taken from `--profile` as stored.
fn solve_front(f: &FrontArgs, refine: bool) -> Result<(CubicNagumo, WaveProfile)> {
    let stored = f.profile.as_deref().map(WaveProfile::load).transpose()?;
    if let (Some(p), false) = (&stored, refine) {
        return Ok((CubicNagumo::new(p.rho)?, p.clone()));
    }
    check_front(f)?;
    let sys = CubicNagumo::new(f.rho)?;
    let problem = WaveProblem {
        system: &sys,
        direction: f.dir,
        shift_mode: f.shift_mode,
        gamma: f.gamma,
        grid: ProfileGrid::new(f.half_length, f.h)?,
        scheme: f.scheme,
    };
    let guess = stored.as_ref().map_or(Guess::Tanh, Guess::Profile);
    let p = solve_wave(&problem, &guess, &NewtonSettings::default())?;
    Ok((sys, p))
}

fn record_residual(art: &mut Artifacts, p: &WaveProfile, sys: &CubicNagumo) -> Result<()> {
    let (r, phase) = assemble_residual(p, sys)?;
    art.achieved("profile_residual", r.iter().fold(0.0, |m, v| m.max(v.abs())));
    art.achieved("phase_condition", phase.abs());
    Ok(())
}

fn wave(a: &WaveArgs) -> Result<Artifacts> {
    let mut art = Artifacts::new(&a.common.out);
    let (sys, p) = solve_front(&a.front, true)?;
    record_residual(&mut art, &p, &sys)?;
    let mut text = Vec::new();
    p.write_text(&mut text)?;
    art.write("profile.txt", &text)?;
    let mut header = vec!["xi".to_string()];
    header.extend((0..p.d).map(|k| format!("phi{k}")));
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for k in 0..p.len() {
        let mut row = vec![p.grid.xi(k)];
        row.extend((0..p.d).map(|a| p.phi(k, a)));
        csv.floats(&row);
    }
    art.csv("wave.csv", csv)?;
    println!("c = {}", num(p.c));
    Ok(art)
}

fn pin_csv(samples: &[CRhoSample], dir: Direction, c_tol: f64) -> Csv {
    let mut csv = Csv::new(&["sigma1", "sigma2", "rho", "c_coarse", "c_fine", "c_ext", "pinned"]);
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.rho.total_cmp(&b.rho));
    for s in sorted {
        csv.row(&[
            dir.sigma1.to_string(),
            dir.sigma2.to_string(),
            num(s.rho),
            num(s.c_coarse),
            num(s.c_fine),
            num(s.c_ext),
            u8::from(s.c_ext.abs() < c_tol).to_string(),
        ]);
    }
    csv
}

fn pin_settings(a: &PinArgs) -> PinningSettings {
    PinningSettings {
        c_tol: a.c_tol,
        width: a.width,
        h: a.h,
        half_length: a.half_length,
        gamma: a.gamma,
        shift_mode: a.shift_mode,
        start: a.start,
        step: a.step,
    }
}

fn pin(a: &PinArgs) -> Result<Artifacts> {
    let mut art = Artifacts::new(&a.common.out);
    let s = pin_settings(a);
    let r = pinning_threshold(a.dir, &s)?;
    art.achieved("bracket_width", r.rho_hi - r.rho_lo);
    art.csv("pin.csv", pin_csv(&r.samples, a.dir, s.c_tol))?;
    println!("rho* in [{}, {}] (width {:.3e})", num(r.rho_lo), num(r.rho_hi), r.rho_hi - r.rho_lo);
    Ok(art)
}

fn spectrum(a: &SpectrumArgs) -> Result<Artifacts> {
    let mut art = Artifacts::new(&a.common.out);
    let (sys, p) = solve_front(&a.front, false)?;
    record_residual(&mut art, &p, &sys)?;
    let lin = Linearization::new(&p, &sys)?;
    let s = EigenSettings::default();
    let base = translation_pair(&lin, &p, &sys, &s)?;
    art.achieved("lambda0_abs", base.lambda.norm());
    let omegas = omega_samples(a.omega_max, a.samples);
    let br = track_branch(&lin, &base, &omegas, &s)?;
    let mut csv = Csv::new(&["omega", "re_lambda", "im_lambda"]);
    for (w, l) in br.omegas.iter().zip(&br.lambdas) {
        csv.floats(&[*w, l.re, l.im]);
    }
    art.csv("spectrum.csv", csv)?;
    let worst = br.lambdas.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    println!("c = {}, max Re λ_ω = {}", num(p.c), num(worst));
    Ok(art)
}

fn melnikov_of(sys: &CubicNagumo, p: &WaveProfile, tol: f64) -> Result<Melnikov> {
    let lin = Linearization::new(p, sys)?;
    let s = EigenSettings::default();
    let base = translation_pair(&lin, p, sys, &s)?;
    Ok(melnikov_constant(&lin, &base, &s, tol)?.0)
}

const MELNIKOV_COLUMNS: [&str; 8] =
    ["M_integral", "M_fd", "discrepancy", "lambda1_re", "lambda1_im", "lambda1_fd_re", "lambda1_fd_im", "phi1_max"];

fn melnikov_cells(m: &Melnikov) -> Vec<String> {
    [m.integral, m.fd, m.discrepancy, m.lambda1.re, m.lambda1.im, m.lambda1_fd.re, m.lambda1_fd.im, m.phi1_max]
        .iter()
        .map(|v| num(*v))
        .collect()
}

fn melnikov(a: &MelnikovArgs) -> Result<(bool, Artifacts)> {
    let mut art = Artifacts::new(&a.common.out);
    let (sys, p) = solve_front(&a.front, false)?;
    record_residual(&mut art, &p, &sys)?;
    let m = melnikov_of(&sys, &p, a.tol)?;
    art.achieved("melnikov_discrepancy", m.discrepancy);
    let mut header = vec!["sigma1", "sigma2", "rho", "gamma", "c"];
    header.extend(MELNIKOV_COLUMNS);
    let mut csv = Csv::new(&header);
    let mut row = vec![a.front.dir.sigma1.to_string(), a.front.dir.sigma2.to_string(), num(p.rho), num(p.gamma), num(p.c)];
    row.extend(melnikov_cells(&m));
    csv.row(&row);
    art.csv("melnikov.csv", csv)?;
    println!("M = {} (finite differences {}, gap {:.2e})", num(m.integral), num(m.fd), m.discrepancy);
    Ok((!a.require_positive || m.integral > 0.0, art))
}

struct PolarPoint {
    k: usize,
    target: f64,
    dir: Direction,
    c: f64,
    m: Melnikov,
}

fn polar_sweep(a: &PolarArgs) -> Result<Vec<PolarPoint>> {
    if a.thetas == 0 {
        return Err(Error::Config("thetas must be positive".into()));
    }
    let sys = CubicNagumo::new(a.rho)?;
    let grid = ProfileGrid::new(a.half_length, a.h)?;
    (0..a.thetas)
        .into_par_iter()
        .map(|k| {
            let target = std::f64::consts::TAU * k as f64 / a.thetas as f64;
            let dir = Direction::nearest(target, a.max_component)?;
            let problem =
                WaveProblem { system: &sys, direction: dir, shift_mode: a.shift_mode, gamma: a.gamma, grid, scheme: a.scheme };
            let p = solve_wave(&problem, &Guess::Tanh, &NewtonSettings::default())?;
            let m = melnikov_of(&sys, &p, a.tol)?;
            Ok(PolarPoint { k, target, dir, c: p.c, m })
        })
        .collect()
}

fn polar_csv(points: &[PolarPoint]) -> Csv {
    let mut header = vec!["k", "theta_target", "sigma1", "sigma2", "theta", "c", "M"];
    header.extend(&MELNIKOV_COLUMNS[1..]);
    let mut csv = Csv::new(&header);
    for q in points {
        let mut row = vec![
            q.k.to_string(),
            num(q.target),
            q.dir.sigma1.to_string(),
            q.dir.sigma2.to_string(),
            num(q.dir.angle()),
            num(q.c),
        ];
        row.extend(melnikov_cells(&q.m));
        csv.row(&row);
    }
    csv
}

fn melnikov_polar(a: &PolarArgs) -> Result<(bool, Artifacts)> {
    let mut art = Artifacts::new(&a.common.out);
    let points = polar_sweep(a)?;
    let worst = points.iter().map(|q| q.m.discrepancy).fold(0.0, f64::max);
    art.achieved("max_melnikov_discrepancy", worst);
    let min_m = points.iter().map(|q| q.m.integral).fold(f64::INFINITY, f64::min);
    art.csv("melnikov_polar.csv", polar_csv(&points))?;
    println!("{} angles, min M = {}", points.len(), num(min_m));
    Ok((!a.require_positive || min_m > 0.0, art))
}

fn ess_spec(a: &EssArgs) -> Result<Artifacts> {
    let mut art = Artifacts::new(&a.common.out);
    let (sys, p) = solve_front(&a.front, false)?;
    let m = essential_spectrum_margin(&sys, p.direction, p.c, a.n_omega, a.n_nu)?;
    let mut csv = Csv::new(&["side", "max_re", "g_prime"]);
    for (side, v, u) in [("minus", m.minus, sys.u_minus()[0]), ("plus", m.plus, sys.u_plus()[0])] {
        csv.row(&[side.to_string(), num(v), num(sys.dg(u))]);
    }
    art.csv("ess_spec.csv", csv)?;
    let exact = sys.dg(-1.0).max(sys.dg(1.0));
    art.achieved("margin_vs_slope", (m.max_re - exact).abs());
    if !(a.t_min > 0.0 && a.t_max >= a.t_min) {
        return Err(Error::Config(format!("need 0 < t_min <= t_max, got {} and {}", a.t_min, a.t_max)));
    }
    let times: Vec<f64> = (0..64).map(|k| 2f64.powi(k)).filter(|t| *t >= a.t_min && *t <= a.t_max).collect();
    let mut csv = Csv::new(&["k", "q1", "q2", "exponent", "r_squared"]);
    for k in 0..3u32 {
        for (q1, q2, l1, l2) in [(Norm::Inf, Norm::One, "inf", "1"), (Norm::Two, Norm::Two, "2", "2")] {
            let s = multiplier_norm_scaling(k, a.kappa, &times, q1, q2)?;
            csv.row(&[k.to_string(), l1.to_string(), l2.to_string(), num(s.fit.exponent), num(s.fit.r_squared)]);
        }
    }
    art.csv("multipliers.csv", csv)?;
    println!("max Re of the essential spectrum {} (g'(u±) max {})", num(m.max_re), num(exact));
    Ok(art)
}

fn simulate(a: &SimulateArgs) -> Result<Artifacts> {
    let mut art = Artifacts::new(&a.common.out);
    let cfg = SimConfig {
        n_lo: a.n_lo,
        n_hi: a.n_hi,
        l_count: a.l_count,
        dt: a.dt,
        t_end: a.t_end,
        sample_every: a.sample_every,
        perturbation: Perturbation { kind: a.perturbation, amplitude: a.amplitude, support: a.support, seed: a.seed },
        p: a.p,
        comoving: a.comoving,
    };
    cfg.check()?;
    let (sys, p) = solve_front(&a.front, false)?;
    let fs = FrameSettings { half_length: a.frame_half_length, h: a.frame_h, scheme: a.frame_scheme };
    let frame = Frame::build(&sys, &p, &fs)?;
    let rec = run_experiment(&sys, &frame, &cfg)?;
    art.achieved("max_constraint_defect", rec.max_defect);
    art.achieved("max_roundtrip_error", rec.max_roundtrip);
    art.achieved("v0_norm", rec.v0_norm);
    art.achieved("speed", rec.speed);
    let header: Vec<&str> = COLUMNS.to_vec();
    let mut csv = Csv::new(&header);
    for r in &rec.rows {
        csv.floats(&r.values());
    }
    art.csv("simulate.csv", csv)?;
    println!(
        "{} samples, c = {}, |v0| = {}, max defect {:.2e}, max round trip {:.2e}",
        rec.rows.len(),
        num(rec.speed),
        num(rec.v0_norm),
        rec.max_defect,
        rec.max_roundtrip
    );
    Ok(art)
}

/// Rows of a simulate CSV (columns located by header name).
pub fn read_rows(text: &str) -> Result<Vec<SimRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?.split(',').map(str::trim).collect();
    let idx: Vec<usize> = COLUMNS
        .iter()
        .map(|c| header.iter().position(|h| h == c).ok_or_else(|| Error::Parse(format!("CSV lacks column {c:?}"))))
        .collect::<Result<_>>()?;
    lines
        .enumerate()
        .map(|(k, line)| {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let v = |i: usize| -> Result<f64> {
                let cell = cells.get(idx[i]).ok_or_else(|| Error::Parse(format!("row {}: too few cells", k + 2)))?;
                cell.parse().map_err(|_| Error::Parse(format!("row {}: bad number {cell:?}", k + 2)))
            };
            Ok(SimRow {
                t: v(0)?,
                theta_l2: v(1)?,
                theta_linf: v(2)?,
                thetadiff_l2: v(3)?,
                thetadiff_linf: v(4)?,
                w_p2: v(5)?,
                w_pinf: v(6)?,
            })
        })
        .collect()
}

fn parse_bounds(s: &str) -> Result<Vec<(String, f64)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (c, b) = p.split_once(':').ok_or_else(|| Error::Config(format!("bound {p:?} is not column:value")))?;
            let b: f64 = b.trim().parse().map_err(|_| Error::Config(format!("bad bound value in {p:?}")))?;
            Ok((c.trim().to_string(), b))
        })
        .collect()
}

fn decay_fit(a: &DecayFitArgs) -> Result<(bool, Artifacts)> {
    let mut art = Artifacts::new(&a.common.out);
    let text = std::fs::read_to_string(&a.input)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", a.input.display())))?;
    let rows = read_rows(&text)?;
    let (lo, hi) = default_window(&rows);
    let (lo, hi) = match a.window.as_deref() {
        None => (lo, hi),
        Some(w) => {
            let bad = || Error::Config(format!("window {w:?} is not a,b"));
            let (x, y) = w.split_once(',').ok_or_else(bad)?;
            (x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?)
        }
    };
    let bounds = a.bounds.as_deref().map(parse_bounds).transpose()?.unwrap_or_default();
    let columns: Vec<&str> = a.columns.split(',').map(str::trim).filter(|c| !c.is_empty()).collect();
    for (c, _) in &bounds {
        if !columns.contains(&c.as_str()) {
            return Err(Error::Config(format!("bound on {c:?}, which is not among the fitted columns")));
        }
    }
    let mut csv = Csv::new(&["column", "t_lo", "t_hi", "points", "exponent", "intercept", "r_squared", "flagged", "bound", "pass"]);
    let mut ok = true;
    for c in columns {
        let f = fit_decay(&rows, c, lo, hi)?;
        let bound = bounds.iter().find(|(b, _)| b == c).map(|(_, v)| *v);
        let pass = bound.is_none_or(|b| f.meets(b, 0.0));
        ok &= pass;
        csv.row(&[
            c.to_string(),
            num(lo),
            num(hi),
            f.points.to_string(),
            num(f.fit.exponent),
            num(f.fit.intercept),
            num(f.fit.r_squared),
            u8::from(f.flagged()).to_string(),
            bound.map_or(String::new(), num),
            u8::from(pass).to_string(),
        ]);
        println!("{c}: exponent {:.4} (r² {:.4}){}", f.fit.exponent, f.fit.r_squared, if pass { "" } else { "  BELOW BOUND" });
    }
    art.csv("decay_fit.csv", csv)?;
    Ok((ok, art))
}

/// c(ρ) with the pinning bracket for one direction; the returned flag checks
/// the plateau-then-growth shape.
fn c_of_rho_figure(dir: Direction, step: f64, art: &mut Artifacts) -> Result<bool> {
    let s = PinningSettings::default();
    let r = pinning_threshold(dir, &s)?;
    let count = (s.start / step).round() as usize;
    let rhos: Vec<f64> = (0..=count).rev().map(|k| k as f64 * step).filter(|rho| *rho <= s.start).collect();
    let samples = c_of_rho(dir, &rhos, &s)?;
    let pinned_ok = samples.iter().all(|x| (x.rho <= r.rho_lo) == (x.c_ext.abs() < s.c_tol) || (x.rho - r.rho_lo).abs() <= s.width);
    let mut above: Vec<&CRhoSample> = samples.iter().filter(|x| x.rho >= r.rho_hi).collect();
    above.sort_by(|a, b| a.rho.total_cmp(&b.rho));
    let growing = above.windows(2).all(|w| w[1].c_ext < w[0].c_ext);
    let name = format!("c_of_rho_{}_{}.csv", dir.sigma1, dir.sigma2);
    art.csv(&name, pin_csv(&samples, dir, s.c_tol))?;
    art.achieved(&format!("rho_star_{}_{}", dir.sigma1, dir.sigma2), r.rho_star);
    println!("dir {dir}: rho* in [{}, {}], plateau {pinned_ok}, growth {growing}", num(r.rho_lo), num(r.rho_hi));
    Ok(pinned_ok && growing)
}

fn reproduce_figure(a: &FigureArgs) -> Result<(bool, Artifacts)> {
    let mut art = Artifacts::new(&a.common.out);
    match a.figure {
        Figure::COfRho => {
            if !(a.rho_step > 0.0) {
                return Err(Error::Config("rho_step must be positive".into()));
            }
            let mut ok = true;
            for dir in [Direction::new(1, 0)?, Direction::new(1, 1)?] {
                ok &= c_of_rho_figure(dir, a.rho_step, &mut art)?;
            }
            Ok((ok, art))
        }
        Figure::MelnikovPolar => {
            let polar = |gamma: f64| PolarArgs {
                rho: 0.9,
                gamma,
                thetas: a.thetas,
                max_component: 64,
                half_length: 20.0,
                h: 0.1,
                scheme: Scheme::default(),
                shift_mode: ShiftMode::Normalized,
                tol: 1e-3,
                require_positive: true,
                common: a.common.clone(),
            };
            let fine = polar_sweep(&polar(1e-5))?;
            let coarse = polar_sweep(&polar(1e-4))?;
            art.csv("melnikov_polar_gamma_1e-5.csv", polar_csv(&fine))?;
            art.csv("melnikov_polar_gamma_1e-4.csv", polar_csv(&coarse))?;
            let mut csv = Csv::new(&["k", "theta", "M_gamma_1e-5", "M_gamma_1e-4", "relative_gap"]);
            let mut worst: f64 = 0.0;
            for (f, c) in fine.iter().zip(&coarse) {
                let gap = (f.m.integral - c.m.integral).abs() / f.m.integral.abs();
                worst = worst.max(gap);
                csv.row(&[f.k.to_string(), num(f.dir.angle()), num(f.m.integral), num(c.m.integral), num(gap)]);
            }
            art.csv("melnikov_polar.csv", csv)?;
            art.achieved("max_relative_gap_between_gammas", worst);
            let positive = fine.iter().chain(&coarse).all(|q| q.m.integral > 0.0);
            println!("{} angles, all M > 0: {positive}, largest γ gap {worst:.2e}", fine.len());
            Ok((positive && worst <= 0.05, art))
        }
    }
}
