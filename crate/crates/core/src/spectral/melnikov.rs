use super::{continue_eigenpair, inner, max_abs, EigenSettings, Linearization, Translation};
use crate::error::{Error, Result};
use crate::linalg::UniformInterp;
use crate::wave::ProfileGrid;
use num_complex::Complex64 as C64;

/// φ₁ = −i[∂_ω φ_ω]₀ and λ₁ = −i[∂_ω λ_ω]₀, gauged by ⟨ψ, φ₁⟩ = 0.
#[derive(Clone, Debug)]
pub struct Rotated {
    pub phi1: Vec<C64>,
    pub lambda1: C64,
}

/// Differentiating (L_ω − λ_ω)φ_ω = 0 once gives
/// (L₀ − λ₀)φ₁ − λ₁φ = −L₁φ, solved with λ₁ as the border unknown.
pub fn rotated_derivatives(lin: &Linearization, base: &Translation) -> Result<Rotated> {
    let n = lin.dim();
    let h = lin.h();
    let op = lin.operator(0.0);
    let mut jm = op.matrix.with_border();
    jm.shift_diagonal(-base.lambda);
    for i in 0..n {
        jm.add(i, n, -base.phi[i]);
        jm.add(n, i, base.psi[i].conj() * h);
    }
    let l1 = lin.rotated_first();
    let mut rhs = vec![C64::new(0.0, 0.0); n + 1];
    l1.matvec(&base.phi, &mut rhs[..n]);
    rhs.iter_mut().for_each(|v| *v = -*v);
    jm.factor()?.solve_in_place(&mut rhs);
    let lambda1 = rhs[n];
    rhs.truncate(n);
    Ok(Rotated { phi1: rhs, lambda1 })
}

/// M = −[∂²_ω λ_ω]₀ = −⟨ψ, L″φ⟩ + 2⟨ψ, (L₁ − λ₁)φ₁⟩.
pub fn melnikov_integral(lin: &Linearization, base: &Translation, rot: &Rotated) -> C64 {
    let n = lin.dim();
    let h = lin.h();
    let mut a = vec![C64::new(0.0, 0.0); n];
    lin.rotated_second().matvec(&base.phi, &mut a);
    let mut b = vec![C64::new(0.0, 0.0); n];
    lin.rotated_first().matvec(&rot.phi1, &mut b);
    for (bi, p) in b.iter_mut().zip(&rot.phi1) {
        *bi -= rot.lambda1 * p;
    }
    -inner(&base.psi, &a, h) + 2.0 * inner(&base.psi, &b, h)
}

fn branch_pair(lin: &Linearization, base: &Translation, delta: f64, s: &EigenSettings) -> Result<(C64, C64)> {
    let up = continue_eigenpair(lin, &base.pair(), 0.0, delta, &base.psi, s)?;
    let down = continue_eigenpair(lin, &base.pair(), 0.0, -delta, &base.psi, s)?;
    Ok((up.lambda, down.lambda))
}

/// −(Re λ_δ + Re λ_−δ − 2 Re λ₀)/δ².
pub fn melnikov_fd(lin: &Linearization, base: &Translation, delta: f64, s: &EigenSettings) -> Result<f64> {
    let (a, b) = branch_pair(lin, base, delta, s)?;
    Ok(-(a.re + b.re - 2.0 * base.lambda.re) / (delta * delta))
}

/// −i(λ_δ − λ_−δ)/(2δ).
pub fn lambda1_fd(lin: &Linearization, base: &Translation, delta: f64, s: &EigenSettings) -> Result<C64> {
    let (a, b) = branch_pair(lin, base, delta, s)?;
    Ok(-C64::i() * (a - b) / (2.0 * delta))
}

#[derive(Clone, Debug)]
pub struct Melnikov {
    pub integral: f64,
    /// Imaginary part of the integral (roundoff for a real operator).
    pub integral_imag: f64,
    pub fd: f64,
    /// |integral − fd| / |integral|.
    pub discrepancy: f64,
    pub lambda1: C64,
    pub lambda1_fd: C64,
    pub phi1_max: f64,
}

/// Both evaluations of M; fails with a consistency error when they differ by
/// more than `tol` (relative).
pub fn melnikov_constant(
    lin: &Linearization,
    base: &Translation,
    settings: &EigenSettings,
    tol: f64,
) -> Result<(Melnikov, Rotated)> {
    let rot = rotated_derivatives(lin, base)?;
    let m = melnikov_integral(lin, base, &rot);
    let fd = melnikov_fd(lin, base, 1e-2, settings)?;
    let l1 = lambda1_fd(lin, base, 1e-3, settings)?;
    let discrepancy = (m.re - fd).abs() / m.re.abs().max(f64::MIN_POSITIVE);
    let out = Melnikov {
        integral: m.re,
        integral_imag: m.im,
        fd,
        discrepancy,
        lambda1: rot.lambda1,
        lambda1_fd: l1,
        phi1_max: max_abs(&rot.phi1),
    };
    if discrepancy > tol {
        return Err(Error::Consistency { integral: m.re, fd, gap: discrepancy });
    }
    Ok((out, rot))
}

/// Real grid function with 10-point Lagrange evaluation between nodes and
/// zero beyond ±L.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub grid: ProfileGrid,
    pub d: usize,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn from_complex(grid: ProfileGrid, d: usize, v: &[C64]) -> Self {
        GridFunction { grid, d, values: v.iter().map(|z| z.re).collect() }
    }

    fn node(&self, k: i64, a: usize) -> f64 {
        if k < 0 || k >= self.grid.len() as i64 {
            0.0
        } else {
            self.values[k as usize * self.d + a]
        }
    }

    pub fn eval(&self, xi: f64, a: usize) -> f64 {
        let s = (xi + self.grid.half_length) / self.grid.h;
        let r = s.round();
        if (s - r).abs() < 1e-9 {
            return self.node(r as i64, a);
        }
        let ip = UniformInterp { x0: -self.grid.half_length, h: self.grid.h, points: 10 };
        let (first, w) = ip.weights(xi, 0);
        w[0].iter().enumerate().map(|(i, wi)| wi * self.node(first + i as i64, a)).sum()
    }

    /// Integer points m with m + θ inside [−L, L].
    pub fn lattice_range(&self, theta: f64) -> (i64, i64) {
        let l = self.grid.half_length;
        ((-l - theta).ceil() as i64, (l - theta).floor() as i64)
    }
}

/// Σ_n ⟨a(n+θ), b(n+θ)⟩ over the integers.
pub fn lattice_pairing(a: &GridFunction, b: &GridFunction, theta: f64) -> f64 {
    let (lo, hi) = a.lattice_range(theta);
    (lo..=hi)
        .map(|n| {
            let x = n as f64 + theta;
            (0..a.d).map(|k| a.eval(x, k) * b.eval(x, k)).sum::<f64>()
        })
        .sum()
}

/// χ_n(θ) = φ₁(n+θ) − φ(n+θ)·Σ⟨ψ,φ₁⟩/Σ⟨ψ,φ⟩ (sums over the lattice points
/// n+θ), the correction multiplying θ_{l+1} − θ_l in the front ansatz. The
/// subtraction makes Σ_n ⟨ψ(n+θ), χ_n(θ)⟩ vanish exactly.
#[derive(Clone, Debug)]
pub struct ChiField {
    pub phi: GridFunction,
    pub psi: GridFunction,
    pub phi1: GridFunction,
}

impl ChiField {
    pub fn new(grid: ProfileGrid, d: usize, base: &Translation, rot: &Rotated) -> Self {
        ChiField {
            phi: GridFunction::from_complex(grid, d, &base.phi),
            psi: GridFunction::from_complex(grid, d, &base.psi),
            phi1: GridFunction::from_complex(grid, d, &rot.phi1),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.phi1.values.iter().all(|v| v.abs() < 1e-12)
    }

    /// χ_n(θ) for n in [n_lo, n_hi], node-major d-vectors.
    pub fn at(&self, theta: f64, n_lo: i64, n_hi: i64) -> Vec<f64> {
        let d = self.phi.d;
        let num = lattice_pairing(&self.psi, &self.phi1, theta);
        let den = lattice_pairing(&self.psi, &self.phi, theta);
        let ratio = num / den;
        let mut out = Vec::with_capacity((n_hi - n_lo + 1) as usize * d);
        for n in n_lo..=n_hi {
            let x = n as f64 + theta;
            for a in 0..d {
                out.push(self.phi1.eval(x, a) - ratio * self.phi.eval(x, a));
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct ChiSequence {
    pub thetas: Vec<f64>,
    pub n_lo: i64,
    pub n_hi: i64,
    /// values[i] holds χ_n(thetas[i]) for n = n_lo..=n_hi.
    pub values: Vec<Vec<f64>>,
    /// |Σ_n ⟨ψ(n+θ), χ_n(θ)⟩| per θ.
    pub defects: Vec<f64>,
}

pub fn chi_sequence(field: &ChiField, thetas: &[f64]) -> ChiSequence {
    let (n_lo, n_hi) = field.psi.lattice_range(0.0);
    let d = field.psi.d;
    let mut values = Vec::new();
    let mut defects = Vec::new();
    for &t in thetas {
        let chi = field.at(t, n_lo, n_hi);
        let defect: f64 = (n_lo..=n_hi)
            .enumerate()
            .map(|(i, n)| (0..d).map(|a| field.psi.eval(n as f64 + t, a) * chi[i * d + a]).sum::<f64>())
            .sum();
        values.push(chi);
        defects.push(defect.abs());
    }
    ChiSequence { thetas: thetas.to_vec(), n_lo, n_hi, values, defects }
}
