//! u_{nl}(t) = Ψ(n + θ_l, t) + χ_n(x)(θ_{l+1} − θ_l) + w_{nl}(t), with θ fixed
//! by Σ_n ⟨ψ(n + x), w_{nl}⟩ = 0 for every l. Ψ is the propagated unperturbed
//! front and x(t) ≈ ct its offset relative to the profile.

use super::reference::{ReferenceFront, Sampler, INTERP_POINTS};
use super::Frame;
use crate::error::{Error, Result};
use crate::lattice::PlaneState;
use rayon::prelude::*;

#[derive(Clone, Copy, Debug)]
pub struct InterfaceSettings {
    /// Newton tolerance on each θ_l.
    pub tol: f64,
    pub max_newton: usize,
    /// Stop the Gauss–Seidel sweeps once every constraint is below this.
    pub defect_tol: f64,
    pub max_sweeps: usize,
    /// |θ_l| beyond this is treated as leaving the tube around the front family.
    pub tube: f64,
}

impl Default for InterfaceSettings {
    fn default() -> Self {
        InterfaceSettings { tol: 1e-10, max_newton: 20, defect_tol: 1e-8, max_sweeps: 5, tube: 5.0 }
    }
}

#[derive(Clone, Debug)]
pub struct Interface {
    pub theta: Vec<f64>,
    pub w: PlaneState,
    /// max_l |Σ_n ⟨ψ, w_{·l}⟩|.
    pub defect: f64,
    pub sweeps: usize,
}

impl Interface {
    /// θ_{l+1} − θ_l, periodic.
    pub fn theta_diff(&self) -> Vec<f64> {
        let m = self.theta.len();
        (0..m).map(|l| self.theta[(l + 1) % m] - self.theta[l]).collect()
    }
}

fn psi_node(frame: &Frame, k: i64, a: usize) -> f64 {
    let g = &frame.psi;
    if k < 0 || k >= g.grid.len() as i64 {
        0.0
    } else {
        g.values[k as usize * g.d + a]
    }
}

/// Sites of the window where ψ(n + x) can be nonzero.
fn psi_sites(state: &PlaneState, frame: &Frame, x: f64) -> (i64, i64) {
    let l = frame.psi.grid.half_length + INTERP_POINTS as f64 * frame.psi.grid.h;
    (((-l - x).floor() as i64).max(state.n_lo), ((l - x).ceil() as i64).min(state.n_hi))
}

fn chi_column(frame: &Frame, state: &PlaneState, x: f64) -> Option<Vec<f64>> {
    if frame.chi.is_trivial() {
        None
    } else {
        Some(frame.chi.at(x, state.n_lo, state.n_hi))
    }
}

fn check_windows(state: &PlaneState, reference: &ReferenceFront) -> Result<()> {
    if state.n_lo != reference.n_lo || state.n_hi != reference.n_hi || state.d != reference.d {
        return Err(Error::Config(format!(
            "plane window [{}, {}] and reference window [{}, {}] differ",
            state.n_lo, state.n_hi, reference.n_lo, reference.n_hi
        )));
    }
    if (state.time - reference.time).abs() > 1e-9 * state.time.abs().max(1.0) {
        return Err(Error::Config(format!("plane at t={} but reference at t={}", state.time, reference.time)));
    }
    Ok(())
}

/// Splits `state` into (θ, w). `guess` warm-starts θ (zeros otherwise).
pub fn extract_interface(
    state: &PlaneState,
    frame: &Frame,
    reference: &ReferenceFront,
    guess: Option<&[f64]>,
    s: &InterfaceSettings,
) -> Result<Interface> {
    check_windows(state, reference)?;
    let d = state.d;
    let x = reference.offset()?;
    let (lo, hi) = psi_sites(state, frame, x);
    let pg = frame.psi.grid;
    let ps = Sampler::new(-pg.half_length, pg.m(), x);
    // ψ(n + x) on the active sites
    let psi: Vec<f64> = (lo..=hi)
        .flat_map(|n| (0..d).map(move |a| (n, a)))
        .map(|(n, a)| ps.apply(n, |k| psi_node(frame, k, a)).0)
        .collect();
    let chi = chi_column(frame, state, x);
    // q = Σ_n ⟨ψ, χ_n⟩ couples θ_l to θ_{l+1}; it vanishes by construction of χ
    let q: f64 = match &chi {
        Some(col) => (lo..=hi)
            .enumerate()
            .map(|(i, n)| {
                let off = (n - state.n_lo) as usize * d;
                (0..d).map(|a| psi[i * d + a] * col[off + a]).sum::<f64>()
            })
            .sum(),
        None => 0.0,
    };
    let mut theta = match guess {
        Some(g) if g.len() == state.l_count => g.to_vec(),
        _ => vec![0.0; state.l_count],
    };
    let solve_row = |l: usize, next: f64, start: f64| -> Option<f64> {
        let row = state.row(l);
        let mut th = start;
        for _ in 0..s.max_newton {
            let smp = reference.sampler(th);
            let mut f = -q * (next - th);
            let mut df = q;
            for (i, n) in (lo..=hi).enumerate() {
                let off = (n - state.n_lo) as usize * d;
                for a in 0..d {
                    let (v, dv) = smp.apply(n, |k| reference.node(k, a));
                    f += psi[i * d + a] * (row[off + a] - v);
                    df -= psi[i * d + a] * dv;
                }
            }
            if df == 0.0 || !f.is_finite() {
                return None;
            }
            let step = f / df;
            th -= step;
            if th.abs() > s.tube {
                return None;
            }
            if step.abs() < s.tol {
                return Some(th);
            }
        }
        None
    };
    let lc = state.l_count;
    let mut sweeps = 0;
    let mut defect = f64::INFINITY;
    while sweeps < s.max_sweeps {
        sweeps += 1;
        // red–black ordering: each colour reads only the other one
        for colour in 0..2 {
            let snapshot = theta.clone();
            let updated: Vec<(usize, Option<f64>)> = (0..lc)
                .into_par_iter()
                .filter(|l| l % 2 == colour)
                .map(|l| (l, solve_row(l, snapshot[(l + 1) % lc], snapshot[l])))
                .collect();
            let lost: Vec<usize> = updated.iter().filter(|(_, v)| v.is_none()).map(|(l, _)| *l).collect();
            if !lost.is_empty() {
                return Err(Error::OutOfTube(lost));
            }
            for (l, v) in updated {
                theta[l] = v.unwrap_or(theta[l]);
            }
        }
        let w = remainder(state, reference, &theta, chi.as_deref());
        defect = constraint_defect(&w, &psi, lo, hi);
        if defect <= s.defect_tol {
            return Ok(Interface { theta, w, defect, sweeps });
        }
    }
    Err(Error::NoConvergence { stage: "interface extraction", iterations: sweeps, residual: defect })
}

fn constraint_defect(w: &PlaneState, psi: &[f64], lo: i64, hi: i64) -> f64 {
    let d = w.d;
    (0..w.l_count)
        .map(|l| {
            let row = w.row(l);
            (lo..=hi)
                .enumerate()
                .map(|(i, n)| {
                    let off = (n - w.n_lo) as usize * d;
                    (0..d).map(|a| psi[i * d + a] * row[off + a]).sum::<f64>()
                })
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max)
}

/// Ψ(n + θ_l) + χ_n(θ_{l+1} − θ_l) on the window of `like`.
fn ansatz(like: &PlaneState, reference: &ReferenceFront, theta: &[f64], chi: Option<&[f64]>) -> PlaneState {
    let d = like.d;
    let width = like.width();
    let lc = like.l_count;
    let mut out = like.clone();
    out.values.par_chunks_mut(width * d).enumerate().for_each(|(l, row)| {
        let smp = reference.sampler(theta[l]);
        let dth = theta[(l + 1) % lc] - theta[l];
        for i in 0..width {
            let n = like.n_lo + i as i64;
            for a in 0..d {
                let mut v = smp.apply(n, |k| reference.node(k, a)).0;
                if let Some(c) = chi {
                    v += c[i * d + a] * dth;
                }
                row[i * d + a] = v;
            }
        }
    });
    out
}

fn remainder(state: &PlaneState, reference: &ReferenceFront, theta: &[f64], chi: Option<&[f64]>) -> PlaneState {
    let mut w = ansatz(state, reference, theta, chi);
    w.values.iter_mut().zip(&state.values).for_each(|(a, u)| *a = u - *a);
    w
}

/// Inverse of the decomposition: the plane from (θ, w) at the reference's time.
pub fn reconstruct(theta: &[f64], w: &PlaneState, frame: &Frame, reference: &ReferenceFront) -> Result<PlaneState> {
    let mut like = w.clone();
    like.time = reference.time;
    check_windows(&like, reference)?;
    let chi = chi_column(frame, &like, reference.offset()?);
    let mut u = ansatz(&like, reference, theta, chi.as_deref());
    u.values.iter_mut().zip(&w.values).for_each(|(a, b)| *a += b);
    Ok(u)
}
