//! Direct simulation of the planar lattice in wave coordinates (n, l), with
//! the perturbation split into a transverse phase θ_l and a remainder w
//! relative to the co-propagated unperturbed front.
//!
//! The lattice is never moved. Only the stored n-window follows the front by
//! whole sites: columns far behind the interface (at u₋ to roundoff) are
//! dropped and u₊ columns are appended ahead of it.

mod interface;
mod reference;

pub use interface::{extract_interface, reconstruct, Interface, InterfaceSettings};
pub use reference::{ReferenceFront, INTERP_POINTS};

use crate::error::{Error, Result};
use crate::fit::{power_law, PowerLaw};
use crate::lattice::{mixed_norm, stencil_offsets, Clamp, Direction, Norm, PlaneState, ReactionSystem};
use crate::spectral::{rotated_derivatives, translation_pair, ChiField, EigenSettings, GridFunction, Linearization};
use crate::wave::{solve_lattice_wave, NewtonSettings, ProfileGrid, Scheme, WaveProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn plane_rhs<S: ReactionSystem + ?Sized>(sys: &S, dir: Direction, clamp: &Clamp, y: &PlaneState, out: &mut [f64]) {
    let d = y.d;
    let width = y.width();
    let off = stencil_offsets(dir);
    let deltas = [off[0], off[1], off[2], off[3], (0, 0)];
    out.par_chunks_mut(width * d).enumerate().for_each(|(l, row)| {
        let rows: [&[f64]; 5] = std::array::from_fn(|j| y.row(y.wrap_l(l as i64 + deltas[j].1)));
        for i in 0..width {
            let stencil: [&[f64]; 5] = std::array::from_fn(|j| {
                let k = i as i64 + deltas[j].0;
                if k < 0 {
                    clamp.u_minus.as_slice()
                } else if k >= width as i64 {
                    clamp.u_plus.as_slice()
                } else {
                    &rows[j][k as usize * d..(k as usize + 1) * d]
                }
            });
            sys.eval(stencil, &mut row[i * d..(i + 1) * d]);
        }
    });
}

/// One classical RK4 step; sites beyond the n-window take the far-field
/// values, l is periodic.
pub fn step_rk4<S: ReactionSystem + ?Sized>(state: &PlaneState, dt: f64, sys: &S, dir: Direction) -> Result<PlaneState> {
    if sys.dim() != state.d {
        return Err(Error::Config(format!("state has {} components, system {}", state.d, sys.dim())));
    }
    let clamp = Clamp::of(sys);
    let len = state.values.len();
    let mut k = vec![0.0; len];
    let mut acc = state.values.clone();
    let mut stage = state.clone();
    let coef = [0.5, 0.5, 1.0];
    let weight = [1.0, 2.0, 2.0, 1.0];
    for s in 0..4 {
        plane_rhs(sys, dir, &clamp, &stage, &mut k);
        let w = weight[s] * dt / 6.0;
        acc.par_iter_mut().zip(k.par_iter()).for_each(|(a, b)| *a += w * b);
        if s < 3 {
            let c = coef[s] * dt;
            stage.values.par_iter_mut().zip(state.values.par_iter().zip(k.par_iter())).for_each(|(y, (u, b))| *y = u + c * b);
        }
    }
    let mut next = state.clone();
    next.values = acc;
    next.time = state.time + dt;
    if let Some(pos) = next.values.iter().position(|v| !v.is_finite()) {
        let site = pos / next.d;
        let (l, i) = (site / next.width(), site % next.width());
        return Err(Error::BlowUp { n: next.n_lo + i as i64, l, t: next.time });
    }
    Ok(next)
}

/// Moves the stored window by `by` whole sites, filling with u₊ ahead and u₋
/// behind.
pub fn shift_window(state: &mut PlaneState, by: i64, clamp: &Clamp) {
    if by == 0 {
        return;
    }
    let d = state.d;
    let width = state.width();
    let mut values = Vec::with_capacity(state.values.len());
    for l in 0..state.l_count {
        let row = state.row(l);
        for i in 0..width as i64 {
            let src = i + by;
            if src < 0 {
                values.extend_from_slice(&clamp.u_minus);
            } else if src >= width as i64 {
                values.extend_from_slice(&clamp.u_plus);
            } else {
                values.extend_from_slice(&row[src as usize * d..(src as usize + 1) * d]);
            }
        }
    }
    state.values = values;
    state.n_lo += by;
    state.n_hi += by;
}

/// Profile sampled on the plane: u_{nl} = Φ(n + c t), interpolated.
pub fn front_plane(profile: &WaveProfile, n_lo: i64, n_hi: i64, l_count: usize, t: f64) -> PlaneState {
    let d = profile.d;
    let mut s = PlaneState::zeros(n_lo, n_hi, l_count, d);
    s.time = t;
    let column: Vec<f64> = (n_lo..=n_hi)
        .flat_map(|n| (0..d).map(move |a| (n, a)))
        .map(|(n, a)| profile.eval(n as f64 + profile.c * t, a, INTERP_POINTS))
        .collect();
    for row in s.values.chunks_mut(column.len()) {
        row.copy_from_slice(&column);
    }
    s
}

/// Settings for the reference objects derived from a stored profile.
#[derive(Clone, Copy, Debug)]
pub struct FrameSettings {
    pub half_length: f64,
    pub h: f64,
    pub scheme: Scheme,
}

impl Default for FrameSettings {
    fn default() -> Self {
        FrameSettings { half_length: 60.0, h: 0.05, scheme: Scheme::Biased(7) }
    }
}

/// The time-independent part of the decomposition: the unregularized lattice
/// wave Φ, the adjoint ψ and χ.
#[derive(Clone, Debug)]
pub struct Frame {
    pub lattice_wave: WaveProfile,
    pub psi: GridFunction,
    pub chi: ChiField,
    pub direction: Direction,
    pub clamp: Clamp,
}

impl Frame {
    pub fn build<S: ReactionSystem + ?Sized>(sys: &S, profile: &WaveProfile, fs: &FrameSettings) -> Result<Frame> {
        let grid = ProfileGrid::new(fs.half_length, fs.h)?;
        let ns = NewtonSettings::default();
        let lattice_wave = solve_lattice_wave(sys, profile, grid, fs.scheme, &ns)?;
        let lin = Linearization::new(&lattice_wave, sys)?;
        let base = translation_pair(&lin, &lattice_wave, sys, &EigenSettings::default())?;
        let rot = rotated_derivatives(&lin, &base)?;
        let chi = ChiField::new(grid, sys.dim(), &base, &rot);
        Ok(Frame { psi: chi.psi.clone(), chi, direction: lattice_wave.direction, clamp: Clamp::of(sys), lattice_wave })
    }

    pub fn speed(&self) -> f64 {
        self.lattice_wave.c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbationKind {
    /// u⁰ = Φ(n + A e^{−(l−l₀)²/(2s²)}).
    PhaseBump,
    /// Uniform noise of amplitude A on the (2s+1)² block around (0, l₀).
    RandomLocal,
    /// u⁰ = Φ(n + A cos(2π l / l_count)).
    ThetaWave,
}

impl std::fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PerturbationKind::PhaseBump => "phase_bump",
            PerturbationKind::RandomLocal => "random_local",
            PerturbationKind::ThetaWave => "theta_wave",
        })
    }
}

impl std::str::FromStr for PerturbationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phase_bump" => Ok(PerturbationKind::PhaseBump),
            "random_local" => Ok(PerturbationKind::RandomLocal),
            "theta_wave" => Ok(PerturbationKind::ThetaWave),
            _ => Err(Error::Config(format!("unknown perturbation {s:?} (phase_bump, random_local, theta_wave)"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub amplitude: f64,
    pub support: usize,
    pub seed: u64,
}

/// Initial plane u⁰ = Φ + v⁰ on the window of `reference` (at t = 0), with
/// ‖v⁰‖_{X_{p,1}}.
pub fn init_perturbation(
    frame: &Frame,
    reference: &ReferenceFront,
    l_count: usize,
    pert: &Perturbation,
    p: Norm,
) -> Result<(PlaneState, f64)> {
    if l_count == 0 {
        return Err(Error::Config("need at least one transverse site".into()));
    }
    if !(0.0..=0.1).contains(&pert.amplitude) {
        return Err(Error::Config(format!("amplitude must lie in [0, 0.1], got {}", pert.amplitude)));
    }
    let (n_lo, n_hi) = (reference.n_lo, reference.n_hi);
    let wave = &frame.lattice_wave;
    let d = wave.d;
    let mut base = PlaneState::zeros(n_lo, n_hi, l_count, d);
    let column: Vec<f64> = (n_lo..=n_hi)
        .flat_map(|n| (0..d).map(move |a| (n, a)))
        .map(|(n, a)| reference.node((n - n_lo) * reference.m as i64, a))
        .collect();
    for row in base.values.chunks_mut(column.len()) {
        row.copy_from_slice(&column);
    }
    let mut u = base.clone();
    let l0 = (l_count / 2) as f64;
    let s = pert.support.max(1) as f64;
    if pert.amplitude > 0.0 {
        match pert.kind {
            PerturbationKind::PhaseBump | PerturbationKind::ThetaWave => {
                for l in 0..l_count {
                    let x = l as f64;
                    let b = match pert.kind {
                        PerturbationKind::PhaseBump => pert.amplitude * (-(x - l0).powi(2) / (2.0 * s * s)).exp(),
                        _ => pert.amplitude * (2.0 * std::f64::consts::PI * x / l_count as f64).cos(),
                    };
                    for n in n_lo..=n_hi {
                        let k = u.index(n, l);
                        for a in 0..d {
                            u.values[k + a] = wave.eval(n as f64 + b, a, INTERP_POINTS);
                        }
                    }
                }
            }
            PerturbationKind::RandomLocal => {
                let mut rng = ChaCha8Rng::seed_from_u64(pert.seed);
                let r = pert.support as i64;
                for dl in -r..=r {
                    let l = u.wrap_l(l0 as i64 + dl);
                    for n in (-r).max(n_lo)..=r.min(n_hi) {
                        let k = u.index(n, l);
                        for a in 0..d {
                            u.values[k + a] += pert.amplitude * rng.random_range(-1.0..=1.0);
                        }
                    }
                }
            }
        }
    }
    let mut v = u.clone();
    v.values.iter_mut().zip(&base.values).for_each(|(x, b)| *x -= b);
    Ok((u, mixed_norm(&v, p, Norm::One)))
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub n_lo: i64,
    pub n_hi: i64,
    pub l_count: usize,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: f64,
    pub perturbation: Perturbation,
    /// ℓᵖ index over n for the w norms.
    pub p: Norm,
    pub comoving: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_lo: -100,
            n_hi: 100,
            l_count: 512,
            dt: 0.1,
            t_end: 200.0,
            sample_every: 1.0,
            perturbation: Perturbation { kind: PerturbationKind::RandomLocal, amplitude: 1e-2, support: 5, seed: 1 },
            p: Norm::Inf,
            comoving: true,
        }
    }
}

impl SimConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.t_end >= 0.0 && self.sample_every > 0.0) {
            return Err(Error::Config("dt and sample_every must be positive, t_end non-negative".into()));
        }
        let ratio = self.sample_every / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Config(format!(
                "sample_every ({}) must be a whole multiple of dt ({})",
                self.sample_every, self.dt
            )));
        }
        if self.n_hi <= self.n_lo || self.l_count < 2 {
            return Err(Error::Config("window needs n_hi > n_lo and at least two transverse sites".into()));
        }
        Ok(())
    }
}

/// One sampled row: ‖θ‖_{ℓ²}, ‖θ‖_{ℓ∞}, the same for θ_{l+1} − θ_l, then
/// ‖w‖_{X_{p,2}} and ‖w‖_{X_{p,∞}}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimRow {
    pub t: f64,
    pub theta_l2: f64,
    pub theta_linf: f64,
    pub thetadiff_l2: f64,
    pub thetadiff_linf: f64,
    pub w_p2: f64,
    pub w_pinf: f64,
}

pub const COLUMNS: [&str; 7] = ["t", "theta_l2", "theta_linf", "thetadiff_l2", "thetadiff_linf", "w_p2", "w_pinf"];

impl SimRow {
    pub fn values(&self) -> [f64; 7] {
        [self.t, self.theta_l2, self.theta_linf, self.thetadiff_l2, self.thetadiff_linf, self.w_p2, self.w_pinf]
    }

    pub fn column(&self, name: &str) -> Result<f64> {
        COLUMNS
            .iter()
            .position(|c| *c == name)
            .map(|i| self.values()[i])
            .ok_or_else(|| Error::Config(format!("unknown column {name:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct SimRecord {
    pub rows: Vec<SimRow>,
    pub v0_norm: f64,
    pub speed: f64,
    /// Worst |Σ_n ⟨ψ, w⟩| over samples and l.
    pub max_defect: f64,
    /// Worst |u − reconstruct(θ, w)| over samples.
    pub max_roundtrip: f64,
    pub final_state: PlaneState,
    pub final_theta: Vec<f64>,
}

pub fn row_norms(t: f64, iface: &Interface, p: Norm) -> SimRow {
    let diff = iface.theta_diff();
    SimRow {
        t,
        theta_l2: Norm::Two.of(&iface.theta),
        theta_linf: Norm::Inf.of(&iface.theta),
        thetadiff_l2: Norm::Two.of(&diff),
        thetadiff_linf: Norm::Inf.of(&diff),
        w_p2: mixed_norm(&iface.w, p, Norm::Two),
        w_pinf: mixed_norm(&iface.w, p, Norm::Inf),
    }
}

/// Integrates from u⁰ = Φ + v⁰ and decomposes every `sample_every`.
pub fn run_experiment<S: ReactionSystem + ?Sized>(sys: &S, frame: &Frame, cfg: &SimConfig) -> Result<SimRecord> {
    cfg.check()?;
    let mut reference = ReferenceFront::new(sys, &frame.lattice_wave, cfg.n_lo, cfg.n_hi)?;
    let (mut u, v0_norm) = init_perturbation(frame, &reference, cfg.l_count, &cfg.perturbation, cfg.p)?;
    let per_sample = (cfg.sample_every / cfg.dt).round() as usize;
    let samples = (cfg.t_end / cfg.sample_every + 1e-9).floor() as usize;
    let c = frame.speed();
    let is = InterfaceSettings::default();
    let mut rows = Vec::with_capacity(samples + 1);
    let mut max_defect: f64 = 0.0;
    let mut max_roundtrip: f64 = 0.0;
    let mut theta = vec![0.0; cfg.l_count];
    let mut step = 0usize;
    for k in 0..=samples {
        if k > 0 {
            for _ in 0..per_sample {
                u = step_rk4(&u, cfg.dt, sys, frame.direction)?;
                reference.step(sys, cfg.dt);
                step += 1;
                u.time = step as f64 * cfg.dt;
                reference.time = u.time;
                if cfg.comoving {
                    // keep the interface where it started relative to the window
                    let target = cfg.n_lo + (-c * u.time).round() as i64;
                    let by = target - u.n_lo;
                    shift_window(&mut u, by, &frame.clamp);
                    reference.shift_window(by);
                }
            }
        }
        let iface = extract_interface(&u, frame, &reference, Some(&theta), &is)?;
        let back = reconstruct(&iface.theta, &iface.w, frame, &reference)?;
        let gap = back.values.iter().zip(&u.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        max_roundtrip = max_roundtrip.max(gap);
        max_defect = max_defect.max(iface.defect);
        rows.push(row_norms(u.time, &iface, cfg.p));
        theta = iface.theta;
    }
    Ok(SimRecord { rows, v0_norm, speed: c, max_defect, max_roundtrip, final_state: u, final_theta: theta })
}

/// Power law fitted to one norm column over t in [t_lo, t_hi].
#[derive(Clone, Debug)]
pub struct DecayFit {
    pub column: String,
    pub t_lo: f64,
    pub t_hi: f64,
    pub points: usize,
    pub fit: PowerLaw,
}

/// Fits with r² below this are flagged as not clean power laws; a
/// (1+t)^{−1} log(1+t) decay over [50, 200] already lands near 0.99989.
pub const R2_FLAG: f64 = 0.9999;

impl DecayFit {
    pub fn exponent(&self) -> f64 {
        self.fit.exponent
    }

    pub fn flagged(&self) -> bool {
        self.fit.r_squared < R2_FLAG
    }

    /// One-sided check: exponent ≥ bound − tol.
    pub fn meets(&self, bound: f64, tol: f64) -> bool {
        self.fit.exponent >= bound - tol
    }
}

pub fn fit_decay(rows: &[SimRow], column: &str, t_lo: f64, t_hi: f64) -> Result<DecayFit> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for r in rows.iter().filter(|r| r.t >= t_lo - 1e-9 && r.t <= t_hi + 1e-9) {
        times.push(r.t);
        values.push(r.column(column)?);
    }
    if times.len() < 3 {
        return Err(Error::Fit(format!("only {} samples of {column} in [{t_lo}, {t_hi}]", times.len())));
    }
    let fit = power_law(&times, &values)?;
    Ok(DecayFit { column: column.to_string(), t_lo, t_hi, points: times.len(), fit })
}

/// The default fit window [T/4, T] for a run ending at T.
pub fn default_window(rows: &[SimRow]) -> (f64, f64) {
    let t_end = rows.last().map_or(0.0, |r| r.t);
    (0.25 * t_end, t_end)
}
