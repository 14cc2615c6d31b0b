use crate::error::{Error, Result};
use crate::fit::{power_law, PowerLaw};
use crate::lattice::{Direction, Norm, ReactionSystem};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Largest real part on the essential-spectrum curves, i.e. over the
/// eigenvalues of the constant-coefficient symbols
///
///   Δ±(ν, ω) = −c iν + Σ_j e^{i(ν r_j + ω q_j)} B_j(u±)
///
/// scanned on uniform (ν, ω) grids over [−π, π]².
#[derive(Clone, Copy, Debug)]
pub struct EssentialMargin {
    pub max_re: f64,
    /// Maxima over the u₋ and u₊ symbols separately.
    pub minus: f64,
    pub plus: f64,
    pub nu: f64,
    pub omega: f64,
}

fn linspace(count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![0.0];
    }
    (0..count).map(|i| -PI + 2.0 * PI * i as f64 / (count - 1) as f64).collect()
}

pub fn essential_spectrum_margin<S: ReactionSystem + ?Sized>(
    sys: &S,
    dir: Direction,
    c: f64,
    n_omega: usize,
    n_nu: usize,
) -> Result<EssentialMargin> {
    let d = sys.dim();
    let (s1, s2) = (dir.sigma1 as f64, dir.sigma2 as f64);
    let r = [s1, s2, -s1, -s2, 0.0];
    let q = [s2, -s1, -s2, s1, 0.0];
    let omegas = linspace(n_omega);
    let nus = linspace(n_nu);
    let mut out = EssentialMargin { max_re: f64::NEG_INFINITY, minus: f64::NEG_INFINITY, plus: f64::NEG_INFINITY, nu: 0.0, omega: 0.0 };
    for (side, u) in [sys.u_minus(), sys.u_plus()].into_iter().enumerate() {
        let mut blocks = vec![0.0; 5 * d * d];
        sys.jacobian([u, u, u, u, u], &mut blocks);
        for &w in &omegas {
            for &nu in &nus {
                let phase: [C64; 5] = std::array::from_fn(|j| C64::from_polar(1.0, nu * r[j] + w * q[j]));
                let m = if d == 1 {
                    (0..5).map(|j| phase[j] * blocks[j]).sum::<C64>().re
                } else {
                    let a = DMatrix::<C64>::from_fn(d, d, |i, k| {
                        let mut v: C64 = (0..5).map(|j| phase[j] * blocks[j * d * d + i * d + k]).sum();
                        if i == k {
                            v -= C64::new(0.0, c * nu);
                        }
                        v
                    });
                    let eig = a
                        .schur()
                        .eigenvalues()
                        .ok_or(Error::Singular("essential-spectrum symbol"))?;
                    eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
                };
                let slot = if side == 0 { &mut out.minus } else { &mut out.plus };
                *slot = slot.max(m);
                if m > out.max_re {
                    out.max_re = m;
                    out.nu = nu;
                    out.omega = w;
                }
            }
        }
    }
    Ok(out)
}

fn inverse(p: Norm) -> f64 {
    match p {
        Norm::One => 1.0,
        Norm::Two => 0.5,
        Norm::Inf => 0.0,
    }
}

/// Norm of multiplication by m(ω) = |ω|^k e^{−κω²t} on [−π, π] as a map
/// L^{q1} → L^{q2}, which is the L^s norm of m with 1/s = 1/q2 − 1/q1.
pub fn multiplier_norm(k: u32, kappa: f64, t: f64, q1: Norm, q2: Norm) -> Result<f64> {
    if !(kappa > 0.0) || !(t >= 0.0) {
        return Err(Error::Config(format!("multiplier needs kappa > 0 and t >= 0, got {kappa}, {t}")));
    }
    let inv_s = inverse(q2) - inverse(q1);
    if inv_s < 0.0 {
        return Err(Error::Config("multiplication cannot map into a smaller Lebesgue space on a finite interval unless q1 >= q2".into()));
    }
    let m = |w: f64| w.abs().powi(k as i32) * (-kappa * w * w * t).exp();
    if inv_s == 0.0 {
        let peak = if k == 0 { 0.0 } else { (k as f64 / (2.0 * kappa * t)).sqrt().min(PI) };
        return Ok(m(peak).max(m(PI)));
    }
    let s = 1.0 / inv_s;
    // beyond this the integrand is below e^{-800}
    let top = if t > 0.0 { (800.0 / (s * kappa * t) + 0.0).sqrt().min(PI) } else { PI };
    let intervals = 40_000;
    let dx = top / intervals as f64;
    let f = |w: f64| m(w).powf(s);
    let mut acc = f(0.0) + f(top);
    for i in 1..intervals {
        acc += f(i as f64 * dx) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    Ok((2.0 * acc * dx / 3.0).powf(1.0 / s))
}

#[derive(Clone, Debug)]
pub struct MultiplierScaling {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub fit: PowerLaw,
}

pub fn multiplier_norm_scaling(k: u32, kappa: f64, times: &[f64], q1: Norm, q2: Norm) -> Result<MultiplierScaling> {
    let norms = times
        .iter()
        .map(|&t| multiplier_norm(k, kappa, t, q1, q2))
        .collect::<Result<Vec<_>>>()?;
    let fit = power_law(times, &norms)?;
    Ok(MultiplierScaling { times: times.to_vec(), norms, fit })
}
