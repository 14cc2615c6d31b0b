//! Linearizations about a front in the transverse Fourier variable ω:
//!
//!   L_ω p = −c p′ + γ p″ + Σ_j e^{i q_j ω} B_j(ξ) p(ξ + r_j),
//!
//! with B_j = ∂f/∂s_j along the profile. Eigenpairs are followed in ω by a
//! bordered Newton iteration seeded from the previous sample.

mod essential;
mod evolve;
mod melnikov;

pub use essential::{essential_spectrum_margin, multiplier_norm, multiplier_norm_scaling, EssentialMargin, MultiplierScaling};
pub use evolve::{dense_eigenvalues, evolve_frequency_lde, least_stable, spectral_gap, NormSeries};
pub use melnikov::{
    chi_sequence, lambda1_fd, lattice_pairing, melnikov_constant, melnikov_fd, melnikov_integral, rotated_derivatives, ChiField,
    ChiSequence, GridFunction, Melnikov, Rotated,
};

use crate::error::{Error, Result};
use crate::lattice::ReactionSystem;
use crate::linalg::BandMatrix;
use crate::wave::{phase_tangent, ProfileGrid, Scheme, ShiftTable, WaveProfile};
use num_complex::Complex64 as C64;

/// h-weighted ⟨a, b⟩ = h Σ conj(a_k) b_k. The functions paired here vanish at
/// ±L to roundoff, where this agrees with the trapezoid rule.
pub fn inner(a: &[C64], b: &[C64], h: f64) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>() * h
}

pub fn norm_h(a: &[C64], h: f64) -> f64 {
    inner(a, a, h).re.sqrt()
}

pub fn max_abs(a: &[C64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.norm()))
}

pub fn to_complex(a: &[f64]) -> Vec<C64> {
    a.iter().map(|&v| C64::new(v, 0.0)).collect()
}

/// Frozen coefficients of the linearization along a profile.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub grid: ProfileGrid,
    pub d: usize,
    pub c: f64,
    pub gamma: f64,
    pub scheme: Scheme,
    pub table: ShiftTable,
    // per node, five d×d blocks (row-major)
    blocks: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FrequencyOperator {
    pub omega: f64,
    pub h: f64,
    pub matrix: BandMatrix<C64>,
}

impl FrequencyOperator {
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        self.matrix.matvec(x, &mut y);
        y
    }
}

impl Linearization {
    pub fn new<S: ReactionSystem + ?Sized>(profile: &WaveProfile, sys: &S) -> Result<Self> {
        if !profile.system_matches(sys) {
            return Err(Error::Config("profile and reaction system disagree on equilibria".into()));
        }
        let table = ShiftTable::new(profile.direction, profile.shift_mode, &profile.grid);
        let d = profile.d;
        let n = profile.len();
        let mut blocks = vec![0.0; n * 5 * d * d];
        let mut stencil = vec![vec![0.0; d]; 5];
        for k in 0..n {
            for (j, t) in table.taps.iter().enumerate() {
                for a in 0..d {
                    stencil[j][a] = t
                        .offsets
                        .iter()
                        .zip(&t.weights)
                        .map(|(o, w)| w * profile.ghost(k as i64 + o, a))
                        .sum();
                }
            }
            let s: [&[f64]; 5] = std::array::from_fn(|j| stencil[j].as_slice());
            sys.jacobian(s, &mut blocks[k * 5 * d * d..(k + 1) * 5 * d * d]);
        }
        Ok(Linearization {
            grid: profile.grid,
            d,
            c: profile.c,
            gamma: profile.gamma,
            scheme: profile.scheme,
            table,
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.len() * self.d
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    fn bandwidth(&self) -> usize {
        let reach = self.table.reach().max(self.scheme.reach()) as usize;
        reach * self.d + self.d - 1
    }

    /// Σ_j alpha_j B_j S_j, plus −c∂ + γ∂² when `transport` is set. Values
    /// beyond the grid are zero.
    fn assemble(&self, alpha: [C64; 5], transport: bool) -> BandMatrix<C64> {
        let d = self.d;
        let n = self.grid.len();
        let bw = self.bandwidth();
        let mut m = BandMatrix::new(n * d, bw, bw, false);
        let inside = |k: i64| k >= 0 && k < n as i64;
        let d1 = self.scheme.d1(self.grid.h, self.c);
        let d2 = self.scheme.d2(self.grid.h);
        for k in 0..n {
            let blk = &self.blocks[k * 5 * d * d..(k + 1) * 5 * d * d];
            for a in 0..d {
                let row = k * d + a;
                if transport {
                    for (o, w) in d1.offsets.iter().zip(&d1.weights) {
                        let kk = k as i64 + o;
                        if inside(kk) {
                            m.add(row, kk as usize * d + a, C64::new(-self.c * w, 0.0));
                        }
                    }
                    for (o, w) in d2.offsets.iter().zip(&d2.weights) {
                        let kk = k as i64 + o;
                        if inside(kk) {
                            m.add(row, kk as usize * d + a, C64::new(self.gamma * w, 0.0));
                        }
                    }
                }
                for (j, t) in self.table.taps.iter().enumerate() {
                    if alpha[j] == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for (o, w) in t.offsets.iter().zip(&t.weights) {
                        let kk = k as i64 + o;
                        if !inside(kk) {
                            continue;
                        }
                        for b in 0..d {
                            let v = blk[j * d * d + a * d + b] * w;
                            if v != 0.0 {
                                m.add(row, kk as usize * d + b, alpha[j] * v);
                            }
                        }
                    }
                }
            }
        }
        m
    }

    pub fn operator(&self, omega: f64) -> FrequencyOperator {
        let alpha = self.table.phase.map(|q| C64::from_polar(1.0, q * omega));
        FrequencyOperator { omega, h: self.grid.h, matrix: self.assemble(alpha, true) }
    }

    /// L₁ = −i ∂_ω L_ω at ω = 0, i.e. Σ q_j B_j S_j.
    pub fn rotated_first(&self) -> BandMatrix<C64> {
        self.assemble(self.table.phase.map(|q| C64::new(q, 0.0)), false)
    }

    /// ∂²_ω L_ω at ω = 0, i.e. −Σ q_j² B_j S_j.
    pub fn rotated_second(&self) -> BandMatrix<C64> {
        self.assemble(self.table.phase.map(|q| C64::new(-q * q, 0.0)), false)
    }
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub lambda: C64,
    pub phi: Vec<C64>,
}

#[derive(Clone, Copy, Debug)]
pub struct EigenSettings {
    /// Relative size of the final Newton update.
    pub tol: f64,
    pub max_iter: usize,
    /// Minimum |cos| angle between seed and result before the branch is
    /// declared lost.
    pub min_overlap: f64,
    /// How often a failed ω step may be bisected.
    pub max_halvings: usize,
}

impl Default for EigenSettings {
    fn default() -> Self {
        EigenSettings { tol: 1e-13, max_iter: 40, min_overlap: 0.5, max_halvings: 8 }
    }
}

fn overlap(a: &[C64], b: &[C64], h: f64) -> f64 {
    inner(a, b, h).norm() / (norm_h(a, h) * norm_h(b, h))
}

const ROUNDOFF_FLOOR: f64 = 1e-9;

/// Newton on (L − λ)φ = 0, ⟨gauge, φ⟩ = 1 from `seed`: an inverse iteration
/// whose shift is updated every step, bordered so that it stays well posed at
/// the (nearly) singular λ.
pub fn leading_eigenpair(
    op: &FrequencyOperator,
    seed: &Eigenpair,
    gauge: &[C64],
    settings: &EigenSettings,
) -> Result<Eigenpair> {
    let n = op.matrix.n;
    let h = op.h;
    let mut phi = seed.phi.clone();
    let scale = inner(gauge, &phi, h);
    if scale.norm() < 1e-300 {
        return Err(Error::Singular("eigenvector gauge"));
    }
    phi.iter_mut().for_each(|v| *v /= scale);
    let mut lambda = seed.lambda;
    let mut last = f64::INFINITY;
    for _ in 0..settings.max_iter {
        let mut r = op.apply(&phi);
        for (ri, p) in r.iter_mut().zip(&phi) {
            *ri = -(*ri - lambda * p);
        }
        r.push(-(inner(gauge, &phi, h) - 1.0));
        let mut jm = op.matrix.with_border();
        jm.shift_diagonal(-lambda);
        for i in 0..n {
            jm.add(i, n, -phi[i]);
            jm.add(n, i, gauge[i].conj() * h);
        }
        jm.factor()?.solve_in_place(&mut r);
        for (p, dp) in phi.iter_mut().zip(&r[..n]) {
            *p += dp;
        }
        lambda += r[n];
        let prev = last;
        last = max_abs(&r[..n]) / max_abs(&phi).max(1.0) + r[n].norm() / lambda.norm().max(1.0);
        if !last.is_finite() {
            break;
        }
        // ill-conditioned operators (pinned fronts, tiny γ) stall at a
        // roundoff floor above tol; a stalled update that small is converged
        let stalled = last < ROUNDOFF_FLOOR && last > 0.5 * prev;
        if last < settings.tol || stalled {
            let ov = overlap(&seed.phi, &phi, h);
            if ov < settings.min_overlap {
                return Err(Error::BranchLoss { omega: op.omega, overlap: ov });
            }
            return Ok(Eigenpair { lambda, phi });
        }
    }
    Err(Error::NoConvergence { stage: "eigenpair Newton", iterations: settings.max_iter, residual: last })
}

/// Kernel of (L − λ)^H normalized so that ⟨ψ, φ⟩ = 1.
pub fn adjoint_eigenfunction(op: &FrequencyOperator, pair: &Eigenpair) -> Result<Vec<C64>> {
    let n = op.matrix.n;
    let mut jm = op.matrix.adjoint().with_border();
    jm.shift_diagonal(-pair.lambda.conj());
    for i in 0..n {
        jm.add(i, n, pair.phi[i]);
        jm.add(n, i, pair.phi[i].conj() * op.h);
    }
    let mut rhs = vec![C64::new(0.0, 0.0); n + 1];
    rhs[n] = C64::new(1.0, 0.0);
    jm.factor()?.solve_in_place(&mut rhs);
    rhs.truncate(n);
    Ok(rhs)
}

/// The ω = 0 eigenpair continuing the translation mode, with its adjoint.
#[derive(Clone, Debug)]
pub struct Translation {
    pub lambda: C64,
    /// Scaled so that ⟨Φ′, φ⟩ = ‖Φ′‖² for the discrete derivative Φ′.
    pub phi: Vec<C64>,
    /// ⟨ψ, φ⟩ = 1.
    pub psi: Vec<C64>,
    /// The discrete Φ′ (phase tangent of the profile family) used as seed.
    pub dphi: Vec<f64>,
}

impl Translation {
    pub fn pair(&self) -> Eigenpair {
        Eigenpair { lambda: self.lambda, phi: self.phi.clone() }
    }

    /// Angle between φ and the discrete Φ′.
    pub fn angle_to_derivative(&self, h: f64) -> f64 {
        overlap(&self.phi, &to_complex(&self.dphi), h).min(1.0).acos()
    }
}

pub fn translation_pair<S: ReactionSystem + ?Sized>(
    lin: &Linearization,
    profile: &WaveProfile,
    sys: &S,
    settings: &EigenSettings,
) -> Result<Translation> {
    let h = lin.h();
    let (dphi, _) = phase_tangent(profile, sys)?;
    let seed = Eigenpair { lambda: C64::new(0.0, 0.0), phi: to_complex(&dphi) };
    let nn = norm_h(&seed.phi, h).powi(2);
    let gauge: Vec<C64> = seed.phi.iter().map(|v| v / nn).collect();
    let op = lin.operator(0.0);
    let pair = leading_eigenpair(&op, &seed, &gauge, settings)?;
    let psi = adjoint_eigenfunction(&op, &pair)?;
    Ok(Translation { lambda: pair.lambda, phi: pair.phi, psi, dphi })
}

/// Samples of the branch ω ↦ (λ_ω, φ_ω, ψ_ω); φ_ω is gauged by ⟨ψ₀, φ_ω⟩ = 1
/// and ψ_ω by ⟨ψ_ω, φ_ω⟩ = 1.
#[derive(Clone, Debug)]
pub struct SpectralBranch {
    pub omegas: Vec<f64>,
    pub lambdas: Vec<C64>,
    pub phis: Vec<Vec<C64>>,
    pub psis: Vec<Vec<C64>>,
}

/// Follows the eigenpair from ω = `from_omega` to `to`, bisecting the step
/// when Newton fails or jumps branches.
pub fn continue_eigenpair(
    lin: &Linearization,
    from: &Eigenpair,
    from_omega: f64,
    to: f64,
    gauge: &[C64],
    settings: &EigenSettings,
) -> Result<Eigenpair> {
    fn go(
        lin: &Linearization,
        from: &Eigenpair,
        a: f64,
        b: f64,
        gauge: &[C64],
        s: &EigenSettings,
        depth: usize,
    ) -> Result<Eigenpair> {
        match leading_eigenpair(&lin.operator(b), from, gauge, s) {
            Ok(p) => Ok(p),
            Err(e) if depth >= s.max_halvings => Err(e),
            Err(Error::BranchLoss { .. }) | Err(Error::NoConvergence { .. }) | Err(Error::Singular(_)) => {
                let mid = 0.5 * (a + b);
                let m = go(lin, from, a, mid, gauge, s, depth + 1)?;
                go(lin, &m, mid, b, gauge, s, depth + 1)
            }
            Err(e) => Err(e),
        }
    }
    go(lin, from, from_omega, to, gauge, settings, 0)
}

const MAX_OMEGA_STEP: f64 = 0.1;

fn sweep(
    lin: &Linearization,
    base: &Translation,
    omegas: &[f64],
    settings: &EigenSettings,
) -> Result<Vec<(Eigenpair, Vec<C64>)>> {
    let mut out = Vec::with_capacity(omegas.len());
    let mut prev = base.pair();
    let mut prev_omega = 0.0;
    for &w in omegas {
        let pair = if w == 0.0 {
            base.pair()
        } else {
            // coarse requested grids are walked in substeps the predictor can follow
            let steps = ((w - prev_omega).abs() / MAX_OMEGA_STEP).ceil().max(1.0) as usize;
            let mut p = prev.clone();
            let mut from = prev_omega;
            for k in 1..=steps {
                let to = if k == steps { w } else { prev_omega + (w - prev_omega) * k as f64 / steps as f64 };
                p = continue_eigenpair(lin, &p, from, to, &base.psi, settings)?;
                from = to;
            }
            p
        };
        let psi = if w == 0.0 { base.psi.clone() } else { adjoint_eigenfunction(&lin.operator(w), &pair)? };
        prev = pair.clone();
        prev_omega = w;
        out.push((pair, psi));
    }
    Ok(out)
}

/// Tracks the branch over `omegas`, outward from ω = 0 on each side.
pub fn track_branch(
    lin: &Linearization,
    base: &Translation,
    omegas: &[f64],
    settings: &EigenSettings,
) -> Result<SpectralBranch> {
    let mut pos: Vec<(usize, f64)> = omegas.iter().copied().enumerate().filter(|(_, w)| *w >= 0.0).collect();
    let mut neg: Vec<(usize, f64)> = omegas.iter().copied().enumerate().filter(|(_, w)| *w < 0.0).collect();
    pos.sort_by(|a, b| a.1.total_cmp(&b.1));
    neg.sort_by(|a, b| b.1.total_cmp(&a.1));
    let pw: Vec<f64> = pos.iter().map(|p| p.1).collect();
    let nw: Vec<f64> = neg.iter().map(|p| p.1).collect();
    let (a, b) = rayon::join(|| sweep(lin, base, &pw, settings), || sweep(lin, base, &nw, settings));
    let mut slots: Vec<Option<(Eigenpair, Vec<C64>)>> = vec![None; omegas.len()];
    for ((i, _), r) in pos.iter().zip(a?).chain(neg.iter().zip(b?)) {
        slots[*i] = Some(r);
    }
    let mut branch = SpectralBranch {
        omegas: omegas.to_vec(),
        lambdas: Vec::with_capacity(omegas.len()),
        phis: Vec::with_capacity(omegas.len()),
        psis: Vec::with_capacity(omegas.len()),
    };
    for s in slots.into_iter().flatten() {
        branch.lambdas.push(s.0.lambda);
        branch.phis.push(s.0.phi);
        branch.psis.push(s.1);
    }
    Ok(branch)
}

/// Uniform samples of [−w, w].
pub fn omega_samples(w: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![0.0];
    }
    (0..count)
        .map(|i| {
            let x = -w + 2.0 * w * i as f64 / (count - 1) as f64;
            // keep the midpoint exactly at zero for odd counts
            if (2 * i + 1 == count) || x.abs() < 1e-15 * w {
                0.0
            } else {
                x
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{CubicNagumo, Direction};
    use crate::wave::{solve_wave, Guess, NewtonSettings, ShiftMode, WaveProblem};

    pub(crate) fn front(rho: f64, dir: (i64, i64), gamma: f64, half: f64) -> (WaveProfile, CubicNagumo) {
        let sys = CubicNagumo::new(rho).unwrap();
        let problem = WaveProblem {
            system: &sys,
            direction: Direction::new(dir.0, dir.1).unwrap(),
            shift_mode: ShiftMode::Integer,
            gamma,
            grid: ProfileGrid::new(half, 0.1).unwrap(),
            scheme: Scheme::default(),
        };
        (solve_wave(&problem, &Guess::Tanh, &NewtonSettings::default()).unwrap(), sys)
    }

    #[test]
    fn conjugation_symmetry_and_real_at_zero() {
        let (p, sys) = front(0.6, (2, 1), 1e-5, 20.0);
        let lin = Linearization::new(&p, &sys).unwrap();
        let a = lin.operator(0.7).matrix.to_dense();
        let b = lin.operator(-0.7).matrix.to_dense();
        assert!((a.map(|v| v.conj()) - b).norm() < 1e-14);
        let z = lin.operator(0.0).matrix.to_dense();
        assert!(z.iter().all(|v| v.im == 0.0));
    }

    #[test]
    fn parallel_direction_shifts_by_a_multiple_of_identity() {
        let (p, sys) = front(0.4, (1, 0), 1e-6, 20.0);
        let lin = Linearization::new(&p, &sys).unwrap();
        let w = 1.1;
        let diff = lin.operator(w).matrix.to_dense() - lin.operator(0.0).matrix.to_dense();
        let id = nalgebra::DMatrix::<C64>::identity(lin.dim(), lin.dim()) * C64::new(2.0 * (w.cos() - 1.0), 0.0);
        assert!((diff - id).norm() < 1e-13);
    }

    #[test]
    fn eigenpair_and_adjoint_relations() {
        let (p, sys) = front(0.9, (2, 1), 1e-5, 20.0);
        let lin = Linearization::new(&p, &sys).unwrap();
        let s = EigenSettings::default();
        let base = translation_pair(&lin, &p, &sys, &s).unwrap();
        assert!(base.lambda.norm() < 1e-6, "{}", base.lambda);
        assert!(base.angle_to_derivative(lin.h()) < 1e-5);
        assert!((inner(&base.psi, &base.phi, lin.h()) - 1.0).norm() < 1e-10);
        let br = track_branch(&lin, &base, &[-0.3, 0.0, 0.3], &s).unwrap();
        assert!((br.lambdas[0] - br.lambdas[2].conj()).norm() < 1e-9);
        assert!(br.lambdas[2].re < 0.0);
        // ⟨ψ_ω, (L_ω − λ_ω)v⟩ = 0 for arbitrary v
        let op = lin.operator(0.3);
        let v: Vec<C64> = (0..lin.dim()).map(|k| C64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
        let mut lv = op.apply(&v);
        for (a, b) in lv.iter_mut().zip(&v) {
            *a -= br.lambdas[2] * b;
        }
        assert!(inner(&br.psis[2], &lv, lin.h()).norm() < 1e-8);
        assert!((inner(&br.psis[2], &br.phis[2], lin.h()) - 1.0).norm() < 1e-8);
    }

    #[test]
    fn sample_grid_contains_zero() {
        let w = omega_samples(std::f64::consts::PI, 33);
        assert_eq!(w.len(), 33);
        assert_eq!(w[16], 0.0);
        assert!((w[0] + std::f64::consts::PI).abs() < 1e-15);
    }
}
