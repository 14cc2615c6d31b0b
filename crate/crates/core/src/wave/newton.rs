use super::{ProfileGrid, Scheme, ShiftMode, ShiftTable, WaveProfile};
use crate::error::{Error, Result};
use crate::lattice::{Direction, ReactionSystem};
use crate::linalg::BandMatrix;

/// Everything that defines one discrete profile equation.
#[derive(Clone, Copy, Debug)]
pub struct WaveProblem<'a, S: ReactionSystem + ?Sized> {
    pub system: &'a S,
    pub direction: Direction,
    pub shift_mode: ShiftMode,
    pub gamma: f64,
    pub grid: ProfileGrid,
    pub scheme: Scheme,
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonSettings {
    /// Convergence threshold on the max-norm of the Newton update.
    pub tol: f64,
    pub max_iter: usize,
    /// Required max-norm of the final residual.
    pub residual_tol: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings { tol: 1e-10, max_iter: 50, residual_tol: 1e-9 }
    }
}

#[derive(Clone, Debug)]
pub enum Guess<'a> {
    /// mid + (u₊ − u₋)/2 · tanh(ξ), c = 0.
    Tanh,
    /// A previous profile, resampled if it lives on another grid.
    Profile(&'a WaveProfile),
}

impl<'a, S: ReactionSystem + ?Sized> WaveProblem<'a, S> {
    fn check(&self) -> Result<ShiftTable> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::Config(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        let table = ShiftTable::new(self.direction, self.shift_mode, &self.grid);
        let reach = table.reach().max(self.scheme.reach());
        if reach as usize >= self.grid.center() {
            return Err(Error::Config(format!(
                "shift reach {} nodes exceeds the half grid of {} nodes",
                reach,
                self.grid.center()
            )));
        }
        Ok(table)
    }

    fn initial(&self, guess: &Guess) -> (Vec<f64>, f64) {
        let d = self.system.dim();
        let n = self.grid.len();
        let (um, up) = (self.system.u_minus(), self.system.u_plus());
        let mut x = vec![0.0; n * d];
        let c = match guess {
            Guess::Tanh => {
                for k in 0..n {
                    let t = self.grid.xi(k).tanh();
                    for a in 0..d {
                        x[k * d + a] = 0.5 * (um[a] + up[a]) + 0.5 * (up[a] - um[a]) * t;
                    }
                }
                0.0
            }
            Guess::Profile(p) => {
                if p.grid == self.grid && p.d == d {
                    x.copy_from_slice(&p.values);
                } else {
                    for k in 0..n {
                        for a in 0..d {
                            x[k * d + a] = p.eval(self.grid.xi(k), a, 8);
                        }
                    }
                }
                p.c
            }
        };
        x[..d].copy_from_slice(um);
        x[(n - 1) * d..].copy_from_slice(up);
        (x, c)
    }

    fn symmetric_start(&self, x: &[f64], c: f64) -> bool {
        let d = self.system.dim();
        let n = self.grid.len();
        if !self.system.odd_symmetric() || c != 0.0 {
            return false;
        }
        (0..n).all(|k| (0..d).all(|a| (x[k * d + a] + x[(n - 1 - k) * d + a]).abs() < 1e-12))
    }
}

struct Discretization<'p, S: ReactionSystem + ?Sized> {
    sys: &'p S,
    table: ShiftTable,
    grid: ProfileGrid,
    scheme: Scheme,
    gamma: f64,
}

impl<'p, S: ReactionSystem + ?Sized> Discretization<'p, S> {
    fn ghost(&self, x: &[f64], k: i64, a: usize) -> f64 {
        let d = self.sys.dim();
        let n = self.grid.len() as i64;
        if k < 0 {
            self.sys.u_minus()[a]
        } else if k >= n {
            self.sys.u_plus()[a]
        } else {
            x[k as usize * d + a]
        }
    }

    /// Stencil values (Φ(ξ_k + r_j))_j at node k.
    fn stencil(&self, x: &[f64], k: usize) -> [Vec<f64>; 5] {
        let d = self.sys.dim();
        std::array::from_fn(|j| {
            let t = &self.table.taps[j];
            (0..d)
                .map(|a| {
                    t.offsets
                        .iter()
                        .zip(&t.weights)
                        .map(|(o, w)| w * self.ghost(x, k as i64 + o, a))
                        .sum()
                })
                .collect()
        })
    }

    fn apply(&self, taps: &super::Taps, x: &[f64], k: usize, a: usize) -> f64 {
        taps.offsets
            .iter()
            .zip(&taps.weights)
            .map(|(o, w)| w * self.ghost(x, k as i64 + o, a))
            .sum()
    }

    /// Residual: N·d node rows followed by the phase row.
    fn residual(&self, x: &[f64], c: f64) -> Vec<f64> {
        let d = self.sys.dim();
        let n = self.grid.len();
        let d1 = self.scheme.d1(self.grid.h, c);
        let d2 = self.scheme.d2(self.grid.h);
        let mut r = vec![0.0; n * d + 1];
        let mut fv = vec![0.0; d];
        for k in 1..n - 1 {
            let s = self.stencil(x, k);
            self.sys.eval(std::array::from_fn(|j| s[j].as_slice()), &mut fv);
            for a in 0..d {
                r[k * d + a] = -c * self.apply(&d1, x, k, a) + self.gamma * self.apply(&d2, x, k, a) + fv[a];
            }
        }
        for a in 0..d {
            r[a] = x[a] - self.sys.u_minus()[a];
            r[(n - 1) * d + a] = x[(n - 1) * d + a] - self.sys.u_plus()[a];
        }
        let mid = 0.5 * (self.sys.u_minus()[0] + self.sys.u_plus()[0]);
        r[n * d] = x[self.grid.center() * d] - mid;
        r
    }

    /// `odd` replaces the speed column by its centered version so that the
    /// bordered system maps odd residuals to odd updates with δc = 0.
    fn jacobian(&self, x: &[f64], c: f64, odd: bool) -> BandMatrix<f64> {
        let d = self.sys.dim();
        let n = self.grid.len();
        let reach = self.table.reach().max(self.scheme.reach()) as usize;
        let bw = reach * d + d - 1;
        let mut jm = BandMatrix::<f64>::new(n * d, bw, bw, true);
        let d1 = self.scheme.d1(self.grid.h, c);
        let d2 = self.scheme.d2(self.grid.h);
        let d1_odd = Scheme::Central(2).d1(self.grid.h, 0.0);
        let mut blocks = vec![0.0; 5 * d * d];
        let border = n * d;
        let inside = |k: i64| k >= 0 && k < n as i64;
        for k in 1..n - 1 {
            let s = self.stencil(x, k);
            self.sys.jacobian(std::array::from_fn(|j| s[j].as_slice()), &mut blocks);
            for a in 0..d {
                let row = k * d + a;
                for (o, w) in d1.offsets.iter().zip(&d1.weights) {
                    let kk = k as i64 + o;
                    if inside(kk) {
                        jm.add(row, kk as usize * d + a, -c * w);
                    }
                }
                for (o, w) in d2.offsets.iter().zip(&d2.weights) {
                    let kk = k as i64 + o;
                    if inside(kk) {
                        jm.add(row, kk as usize * d + a, self.gamma * w);
                    }
                }
                for j in 0..5 {
                    let t = &self.table.taps[j];
                    for (o, w) in t.offsets.iter().zip(&t.weights) {
                        let kk = k as i64 + o;
                        if !inside(kk) {
                            continue;
                        }
                        for b in 0..d {
                            let v = blocks[j * d * d + a * d + b] * w;
                            if v != 0.0 {
                                jm.add(row, kk as usize * d + b, v);
                            }
                        }
                    }
                }
                jm.add(row, border, -self.apply(if odd { &d1_odd } else { &d1 }, x, k, a));
            }
        }
        for a in 0..d {
            jm.add(a, a, 1.0);
            jm.add((n - 1) * d + a, (n - 1) * d + a, 1.0);
        }
        jm.add(border, self.grid.center() * d, 1.0);
        jm
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn newton<S: ReactionSystem + ?Sized>(
    p: &WaveProblem<S>,
    table: ShiftTable,
    guess: &Guess,
    settings: &NewtonSettings,
) -> Result<WaveProfile> {
    let disc = Discretization { sys: p.system, table, grid: p.grid, scheme: p.scheme, gamma: p.gamma };
    let d = p.system.dim();
    let n = p.grid.len();
    let (mut x, mut c) = p.initial(guess);
    let symmetric = p.symmetric_start(&x, c);
    let mut last_res = f64::INFINITY;
    for it in 1..=settings.max_iter {
        let r = disc.residual(&x, c);
        last_res = max_abs(&r);
        if !last_res.is_finite() {
            break;
        }
        let jm = disc.jacobian(&x, c, symmetric);
        let mut delta: Vec<f64> = r.iter().map(|v| -v).collect();
        jm.factor()?.solve_in_place(&mut delta);
        if symmetric {
            // odd profiles with c = 0 form an invariant subspace; project the
            // update so roundoff cannot excite the nearly singular even modes
            for k in 0..n / 2 {
                for a in 0..d {
                    let (i, j) = (k * d + a, (n - 1 - k) * d + a);
                    let odd = 0.5 * (delta[i] - delta[j]);
                    delta[i] = odd;
                    delta[j] = -odd;
                }
            }
            for a in 0..d {
                delta[(n / 2) * d + a] = 0.0;
            }
            delta[n * d] = 0.0;
        }
        let step = max_abs(&delta);
        // crude trust region for poor initial guesses
        let mut scale = if step > 2.0 { 2.0 / step } else { 1.0 };
        // then backtrack on the residual while far from the solution
        let mut trial = x.clone();
        loop {
            for ((t, xi), di) in trial.iter_mut().zip(&x).zip(&delta[..n * d]) {
                *t = xi + scale * di;
            }
            let tc = c + scale * delta[n * d];
            if last_res < 1e-8 || scale < 1.0 / 64.0 || max_abs(&disc.residual(&trial, tc)) < last_res {
                break;
            }
            scale *= 0.5;
        }
        x = trial;
        c += scale * delta[n * d];
        if step < settings.tol {
            last_res = max_abs(&disc.residual(&x, c));
            if last_res <= settings.residual_tol {
                return Ok(WaveProfile {
                    grid: p.grid,
                    d,
                    values: x,
                    c,
                    gamma: p.gamma,
                    rho: p.system.detuning().unwrap_or(f64::NAN),
                    direction: p.direction,
                    shift_mode: p.shift_mode,
                    scheme: p.scheme,
                    u_minus: p.system.u_minus().to_vec(),
                    u_plus: p.system.u_plus().to_vec(),
                });
            }
        }
        let _ = it;
    }
    Err(Error::NoConvergence {
        stage: "wave Newton",
        iterations: settings.max_iter,
        residual: last_res,
    })
}

/// Newton's method on the bordered unknown (Φ_k, c) of the regularized
/// profile equation; γ must be positive.
pub fn solve_wave<S: ReactionSystem + ?Sized>(
    problem: &WaveProblem<S>,
    guess: &Guess,
    settings: &NewtonSettings,
) -> Result<WaveProfile> {
    if !(problem.gamma > 0.0) {
        return Err(Error::Config(format!(
            "the regularization gamma must be positive, got {}",
            problem.gamma
        )));
    }
    let table = problem.check()?;
    newton(problem, table, guess, settings)
}

/// Unregularized (γ = 0) solve, meant for polishing a moving front with a
/// high-order scheme. The guess must already travel (|c| ≥ 1e−3): without the
/// γΦ″ term the equation degenerates as c → 0.
pub fn solve_lattice_wave<S: ReactionSystem + ?Sized>(
    system: &S,
    guess: &WaveProfile,
    grid: ProfileGrid,
    scheme: Scheme,
    settings: &NewtonSettings,
) -> Result<WaveProfile> {
    if guess.c.abs() < 1e-3 {
        return Err(Error::Config(format!(
            "unregularized profile solve needs a travelling guess, got c={}",
            guess.c
        )));
    }
    let problem = WaveProblem {
        system,
        direction: guess.direction,
        shift_mode: guess.shift_mode,
        gamma: 0.0,
        grid,
        scheme,
    };
    let table = problem.check()?;
    newton(&problem, table, &Guess::Profile(guess), settings)
}

/// Node residuals of a stored profile under its own discretization, and the
/// phase-condition value.
pub fn assemble_residual<S: ReactionSystem + ?Sized>(profile: &WaveProfile, system: &S) -> Result<(Vec<f64>, f64)> {
    let problem = WaveProblem {
        system,
        direction: profile.direction,
        shift_mode: profile.shift_mode,
        gamma: profile.gamma,
        grid: profile.grid,
        scheme: profile.scheme,
    };
    let table = problem.check()?;
    let disc = Discretization { sys: system, table, grid: profile.grid, scheme: profile.scheme, gamma: profile.gamma };
    let mut r = disc.residual(&profile.values, profile.c);
    let phase = r.pop().unwrap_or(0.0);
    Ok((r, phase))
}

/// Derivative of the discrete profile along its own solution family as the
/// phase point moves, scaled to match Φ′ at ξ = 0: the discrete stand-in for
/// Φ′. Also returns the accompanying dc/dξ₀, which measures how far the grid
/// breaks translation invariance.
pub fn phase_tangent<S: ReactionSystem + ?Sized>(profile: &WaveProfile, system: &S) -> Result<(Vec<f64>, f64)> {
    let problem = WaveProblem {
        system,
        direction: profile.direction,
        shift_mode: profile.shift_mode,
        gamma: profile.gamma,
        grid: profile.grid,
        scheme: profile.scheme,
    };
    let table = problem.check()?;
    let disc = Discretization { sys: system, table, grid: profile.grid, scheme: profile.scheme, gamma: profile.gamma };
    let n = profile.values.len();
    let jm = disc.jacobian(&profile.values, profile.c, false);
    let mut rhs = vec![0.0; n + 1];
    rhs[n] = 1.0;
    jm.factor()?.solve_in_place(&mut rhs);
    // scale by the centered derivative at the phase node
    let k0 = profile.grid.center();
    let d = profile.d;
    let fd = profile.derivative(10)[k0 * d];
    let scale = fd / rhs[k0 * d];
    let dc = rhs[n] * scale;
    rhs.truncate(n);
    rhs.iter_mut().for_each(|v| *v *= scale);
    Ok((rhs, dc))
}
