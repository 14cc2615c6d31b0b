//! Lattice geometry shared by everything else: propagation directions, the
//! rotated (n, l) coordinates, the cross stencil, reaction terms and the
//! mixed sequence norms X_{p,q}.

use crate::error::{Error, Result};
use std::io::{BufRead, Write};

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Rational direction of propagation (σ₁, σ₂) with gcd 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Direction {
    pub sigma1: i64,
    pub sigma2: i64,
}

impl Direction {
    pub fn new(sigma1: i64, sigma2: i64) -> Result<Self> {
        if (sigma1, sigma2) == (0, 0) {
            return Err(Error::Config("direction (0,0) is not allowed".into()));
        }
        if gcd(sigma1, sigma2) != 1 {
            return Err(Error::Config(format!(
                "direction ({sigma1},{sigma2}) must have gcd 1"
            )));
        }
        Ok(Direction { sigma1, sigma2 })
    }

    pub fn angle(&self) -> f64 {
        (self.sigma2 as f64).atan2(self.sigma1 as f64)
    }

    /// Unit shifts (cos θ, sin θ) for normalized solves.
    pub fn unit_shifts(&self) -> (f64, f64) {
        let t = self.angle();
        (t.cos(), t.sin())
    }

    /// Rational direction with components bounded by `max` whose angle is
    /// closest to `angle`; ties go to the shorter vector.
    pub fn nearest(angle: f64, max: i64) -> Result<Self> {
        if max < 1 {
            return Err(Error::Config(format!("component bound must be at least 1, got {max}")));
        }
        let tau = std::f64::consts::TAU;
        let mut best: Option<(f64, i64, Direction)> = None;
        for a in -max..=max {
            for b in -max..=max {
                if gcd(a, b) != 1 {
                    continue;
                }
                let d = Direction { sigma1: a, sigma2: b };
                let gap = (d.angle() - angle).rem_euclid(tau);
                let gap = gap.min(tau - gap);
                let better = match best {
                    None => true,
                    Some((g, n, _)) => gap < g - 1e-15 || (gap <= g + 1e-15 && d.norm_sq() < n),
                };
                if better {
                    best = Some((gap, d.norm_sq(), d));
                }
            }
        }
        Ok(best.expect("max >= 1 admits (1,0)").2)
    }

    pub fn norm_sq(&self) -> i64 {
        self.sigma1 * self.sigma1 + self.sigma2 * self.sigma2
    }

    /// Largest |σ|-component: the reach of the stencil along n.
    pub fn reach(&self) -> i64 {
        self.sigma1.abs().max(self.sigma2.abs())
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.sigma1, self.sigma2)
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(Error::Config(format!("direction must be S1,S2, got {s:?}")));
        }
        let p = |x: &str| {
            x.parse::<i64>()
                .map_err(|_| Error::Config(format!("bad direction component {x:?}")))
        };
        Direction::new(p(parts[0])?, p(parts[1])?)
    }
}

/// (i, j) → (n, l) with n = iσ₁ + jσ₂ along the front normal and
/// l = iσ₂ − jσ₁ across it.
pub fn to_wave_coords(i: i64, j: i64, dir: Direction) -> (i64, i64) {
    (
        i * dir.sigma1 + j * dir.sigma2,
        i * dir.sigma2 - j * dir.sigma1,
    )
}

/// Inverse of [`to_wave_coords`]; `None` when (n, l) is off the image sublattice.
pub fn from_wave_coords(n: i64, l: i64, dir: Direction) -> Option<(i64, i64)> {
    let s = dir.norm_sq();
    let i_num = n * dir.sigma1 + l * dir.sigma2;
    let j_num = n * dir.sigma2 - l * dir.sigma1;
    if i_num % s != 0 || j_num % s != 0 {
        return None;
    }
    Some((i_num / s, j_num / s))
}

/// Offsets (Δn, Δl) of the four neighbours in the cross stencil, in the order
/// (i+1, j), (i, j+1), (i−1, j), (i, j−1).
pub fn stencil_offsets(dir: Direction) -> [(i64, i64); 4] {
    let (s1, s2) = (dir.sigma1, dir.sigma2);
    [(s1, s2), (s2, -s1), (-s1, -s2), (-s2, s1)]
}

/// g(u; ρ) = −(5/2)(u² − 1)(u − ρ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicNagumo {
    pub rho: f64,
}

impl CubicNagumo {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in (-1, 1), got {rho}")));
        }
        Ok(CubicNagumo { rho })
    }

    pub fn g(&self, u: f64) -> f64 {
        -2.5 * (u * u - 1.0) * (u - self.rho)
    }

    pub fn dg(&self, u: f64) -> f64 {
        -2.5 * (2.0 * u * (u - self.rho) + u * u - 1.0)
    }

    pub fn d2g(&self, u: f64) -> f64 {
        -2.5 * (6.0 * u - 2.0 * self.rho)
    }
}

/// The planar-lattice right-hand side for the five stencil values
/// (u_{i+1,j}, u_{i,j+1}, u_{i−1,j}, u_{i,j−1}, u_{ij}).
pub fn nagumo_rhs(s: [f64; 5], rho: f64) -> f64 {
    s[0] + s[1] + s[2] + s[3] - 4.0 * s[4] + CubicNagumo { rho }.g(s[4])
}

/// A reaction-coupling map f : (R^d)^5 → R^d with stable equilibria u±.
pub trait ReactionSystem: Sync + Send {
    fn dim(&self) -> usize;
    fn u_minus(&self) -> &[f64];
    fn u_plus(&self) -> &[f64];
    /// f(stencil) written into `out` (length d).
    fn eval(&self, s: [&[f64]; 5], out: &mut [f64]);
    /// The five d×d Jacobian blocks ∂f/∂u_j, block-major, each row-major.
    fn jacobian(&self, s: [&[f64]; 5], blocks: &mut [f64]);
    /// Detuning parameter when the system has one (recorded in profile files).
    fn detuning(&self) -> Option<f64> {
        None
    }
    /// True when f(−s) = −f(s), u₋ = −u₊: odd profiles with c = 0 are then
    /// invariant under Newton's method.
    fn odd_symmetric(&self) -> bool {
        false
    }
}

const MINUS_ONE: [f64; 1] = [-1.0];
const PLUS_ONE: [f64; 1] = [1.0];

impl ReactionSystem for CubicNagumo {
    fn dim(&self) -> usize {
        1
    }
    fn u_minus(&self) -> &[f64] {
        &MINUS_ONE
    }
    fn u_plus(&self) -> &[f64] {
        &PLUS_ONE
    }
    fn eval(&self, s: [&[f64]; 5], out: &mut [f64]) {
        out[0] = nagumo_rhs([s[0][0], s[1][0], s[2][0], s[3][0], s[4][0]], self.rho);
    }
    fn jacobian(&self, s: [&[f64]; 5], blocks: &mut [f64]) {
        blocks[..4].fill(1.0);
        blocks[4] = -4.0 + self.dg(s[4][0]);
    }
    fn detuning(&self) -> Option<f64> {
        Some(self.rho)
    }
    fn odd_symmetric(&self) -> bool {
        self.rho == 0.0
    }
}

/// Compares every Jacobian block against central differences of `eval`.
/// Returns the worst relative discrepancy.
pub fn jacobian_fd_discrepancy<S: ReactionSystem + ?Sized>(sys: &S, s: [&[f64]; 5]) -> f64 {
    let d = sys.dim();
    let mut blocks = vec![0.0; 5 * d * d];
    sys.jacobian(s, &mut blocks);
    let mut work: Vec<Vec<f64>> = s.iter().map(|v| v.to_vec()).collect();
    let (mut fp, mut fm) = (vec![0.0; d], vec![0.0; d]);
    let mut worst: f64 = 0.0;
    for j in 0..5 {
        for b in 0..d {
            let x0 = work[j][b];
            let h = 1e-6 * x0.abs().max(1.0);
            work[j][b] = x0 + h;
            sys.eval(std::array::from_fn(|k| work[k].as_slice()), &mut fp);
            work[j][b] = x0 - h;
            sys.eval(std::array::from_fn(|k| work[k].as_slice()), &mut fm);
            work[j][b] = x0;
            for a in 0..d {
                let fd = (fp[a] - fm[a]) / (2.0 * h);
                let an = blocks[j * d * d + a * d + b];
                let rel = (fd - an).abs() / an.abs().max(1e-3);
                worst = worst.max(rel);
            }
        }
    }
    worst
}

/// Field u_{nl} on the window [n_lo, n_hi] × [0, l_count), periodic in l.
/// Storage is row-major by l then n, each entry a d-vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneState {
    pub n_lo: i64,
    pub n_hi: i64,
    pub l_count: usize,
    pub d: usize,
    pub time: f64,
    pub values: Vec<f64>,
}

/// Values used beyond the n-window: u₋ on the left, u₊ on the right.
#[derive(Clone, Debug, PartialEq)]
pub struct Clamp {
    pub u_minus: Vec<f64>,
    pub u_plus: Vec<f64>,
}

impl Clamp {
    pub fn of<S: ReactionSystem + ?Sized>(sys: &S) -> Self {
        Clamp {
            u_minus: sys.u_minus().to_vec(),
            u_plus: sys.u_plus().to_vec(),
        }
    }
}

impl PlaneState {
    pub fn zeros(n_lo: i64, n_hi: i64, l_count: usize, d: usize) -> Self {
        assert!(n_hi >= n_lo && l_count > 0 && d > 0);
        let width = (n_hi - n_lo + 1) as usize;
        PlaneState {
            n_lo,
            n_hi,
            l_count,
            d,
            time: 0.0,
            values: vec![0.0; width * l_count * d],
        }
    }

    pub fn from_fn(
        n_lo: i64,
        n_hi: i64,
        l_count: usize,
        f: impl Fn(i64, usize) -> f64,
    ) -> Self {
        let mut s = Self::zeros(n_lo, n_hi, l_count, 1);
        for l in 0..l_count {
            for n in n_lo..=n_hi {
                let k = s.index(n, l);
                s.values[k] = f(n, l);
            }
        }
        s
    }

    pub fn width(&self) -> usize {
        (self.n_hi - self.n_lo + 1) as usize
    }

    pub fn wrap_l(&self, l: i64) -> usize {
        l.rem_euclid(self.l_count as i64) as usize
    }

    /// Flat offset of the entry (n, l); n must lie inside the window.
    pub fn index(&self, n: i64, l: usize) -> usize {
        debug_assert!(n >= self.n_lo && n <= self.n_hi && l < self.l_count);
        (l * self.width() + (n - self.n_lo) as usize) * self.d
    }

    pub fn at(&self, n: i64, l: usize) -> &[f64] {
        let k = self.index(n, l);
        &self.values[k..k + self.d]
    }

    pub fn row(&self, l: usize) -> &[f64] {
        let w = self.width() * self.d;
        &self.values[l * w..(l + 1) * w]
    }

    /// Entry at (n, l) with periodic l and optional clamping in n.
    pub fn get<'a>(&'a self, n: i64, l: i64, clamp: Option<&'a Clamp>) -> Result<&'a [f64]> {
        let lw = self.wrap_l(l);
        if n < self.n_lo {
            clamp
                .map(|c| c.u_minus.as_slice())
                .ok_or(Error::Window { n, lo: self.n_lo, hi: self.n_hi })
        } else if n > self.n_hi {
            clamp
                .map(|c| c.u_plus.as_slice())
                .ok_or(Error::Window { n, lo: self.n_lo, hi: self.n_hi })
        } else {
            Ok(self.at(n, lw))
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {} {:.17e} {}", self.n_lo, self.n_hi, self.l_count, self.time, self.d)?;
        for l in 0..self.l_count {
            let row: Vec<String> = self.row(l).iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty plane file".into()))??;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 5 {
            return Err(Error::Parse(format!("bad plane header {header:?}")));
        }
        let pe = |e: &dyn std::fmt::Display| Error::Parse(format!("plane header: {e}"));
        let n_lo: i64 = h[0].parse().map_err(|e| pe(&e))?;
        let n_hi: i64 = h[1].parse().map_err(|e| pe(&e))?;
        let l_count: usize = h[2].parse().map_err(|e| pe(&e))?;
        let time: f64 = h[3].parse().map_err(|e| pe(&e))?;
        let d: usize = h[4].parse().map_err(|e| pe(&e))?;
        if n_hi < n_lo || l_count == 0 || d == 0 {
            return Err(Error::Parse("degenerate plane extents".into()));
        }
        let mut s = PlaneState::zeros(n_lo, n_hi, l_count, d);
        s.time = time;
        let w = s.width() * d;
        for l in 0..l_count {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing row {l}")))??;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("row {l}: {e}"))))
                .collect::<Result<_>>()?;
            if vals.len() != w {
                return Err(Error::Parse(format!("row {l} has {} values, expected {w}", vals.len())));
            }
            s.values[l * w..(l + 1) * w].copy_from_slice(&vals);
        }
        if !s.all_finite() {
            return Err(Error::Parse("non-finite entry in plane file".into()));
        }
        Ok(s)
    }
}

/// The five stencil values (u_{n+σ₁,l+σ₂}, u_{n+σ₂,l−σ₁}, u_{n−σ₁,l−σ₂},
/// u_{n−σ₂,l+σ₁}, u_{nl}).
pub fn cross_stencil<'a>(
    state: &'a PlaneState,
    n: i64,
    l: i64,
    dir: Direction,
    clamp: Option<&'a Clamp>,
) -> Result<[&'a [f64]; 5]> {
    let off = stencil_offsets(dir);
    Ok([
        state.get(n + off[0].0, l + off[0].1, clamp)?,
        state.get(n + off[1].0, l + off[1].1, clamp)?,
        state.get(n + off[2].0, l + off[2].1, clamp)?,
        state.get(n + off[3].0, l + off[3].1, clamp)?,
        state.get(n, l, clamp)?,
    ])
}

/// Summation with a fixed pairwise tree, so results do not depend on
/// scheduling and roundoff grows like log N.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 16 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    One,
    Two,
    Inf,
}

impl Norm {
    pub fn of(&self, x: &[f64]) -> f64 {
        match self {
            Norm::One => pairwise_sum(&x.iter().map(|v| v.abs()).collect::<Vec<_>>()),
            Norm::Two => pairwise_sum(&x.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt(),
            Norm::Inf => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Norm::One),
            "2" => Ok(Norm::Two),
            "inf" | "Inf" | "INF" | "infinity" => Ok(Norm::Inf),
            _ => Err(Error::Config(format!("norm index must be 1, 2 or inf, got {s:?}"))),
        }
    }
}

/// ‖u‖_{X_{p,q}}: ℓᵖ over n of the ℓ^q norm over l (Euclidean in R^d).
pub fn mixed_norm(state: &PlaneState, p: Norm, q: Norm) -> f64 {
    let d = state.d;
    let mut inner = Vec::with_capacity(state.width());
    let mut column = vec![0.0; state.l_count];
    for n in state.n_lo..=state.n_hi {
        for (l, c) in column.iter_mut().enumerate() {
            let v = state.at(n, l);
            *c = if d == 1 {
                v[0]
            } else {
                v.iter().map(|x| x * x).sum::<f64>().sqrt()
            };
        }
        inner.push(q.of(&column));
    }
    p.of(&inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_examples() {
        let d = |a, b| Direction::new(a, b).unwrap();
        assert_eq!(to_wave_coords(3, 5, d(1, 0)), (3, -5));
        assert_eq!(to_wave_coords(2, 0, d(1, 1)), (2, 2));
        assert_eq!(to_wave_coords(1, 1, d(2, 1)), (3, -1));
    }

    #[test]
    fn direction_validation() {
        assert!(Direction::new(0, 0).is_err());
        assert!(Direction::new(2, 4).is_err());
        assert!(Direction::new(-3, 2).is_ok());
        assert_eq!("2,1".parse::<Direction>().unwrap(), Direction { sigma1: 2, sigma2: 1 });
    }

    #[test]
    fn nagumo_values() {
        assert_eq!(nagumo_rhs([1.0; 5], 0.37), 0.0);
        assert_eq!(nagumo_rhs([0.3; 5], 0.3), 0.0);
        assert!((nagumo_rhs([0.0; 5], 0.5) + 1.25).abs() < 1e-15);
        let g = CubicNagumo::new(0.3).unwrap();
        assert!((g.dg(1.0) + 3.5).abs() < 1e-14);
        assert!((g.dg(-1.0) + 6.5).abs() < 1e-14);
    }

    #[test]
    fn equilibria_and_jacobian() {
        let g = CubicNagumo::new(0.6).unwrap();
        let one = [1.0];
        let mut out = [0.0];
        g.eval([&one; 5], &mut out);
        assert!(out[0].abs() < 1e-12);
        let s = [[0.1], [-0.4], [0.7], [0.2], [0.35]];
        let disc = jacobian_fd_discrepancy(&g, std::array::from_fn(|k| &s[k][..]));
        assert!(disc < 1e-6, "{disc}");
    }

    #[test]
    fn stencil_on_linear_field() {
        let st = PlaneState::from_fn(-5, 5, 7, |n, _| n as f64);
        let dir = Direction::new(1, 1).unwrap();
        let s = cross_stencil(&st, 0, 3, dir, None).unwrap();
        let v: Vec<f64> = s.iter().map(|x| x[0]).collect();
        assert_eq!(v, vec![1.0, 1.0, -1.0, -1.0, 0.0]);
        assert!(cross_stencil(&st, 5, 0, dir, None).is_err());
        let clamp = Clamp { u_minus: vec![-1.0], u_plus: vec![1.0] };
        let s = cross_stencil(&st, 5, 0, dir, Some(&clamp)).unwrap();
        assert_eq!(s[0][0], 1.0);
    }

    #[test]
    fn norm_examples() {
        let mut st = PlaneState::zeros(0, 4, 5, 1);
        let k = st.index(2, 3);
        st.values[k] = 3.0;
        for p in [Norm::One, Norm::Two, Norm::Inf] {
            for q in [Norm::One, Norm::Two, Norm::Inf] {
                assert_eq!(mixed_norm(&st, p, q), 3.0);
            }
        }
        let ones = PlaneState::from_fn(0, 1, 2, |_, _| 1.0);
        assert!((mixed_norm(&ones, Norm::Two, Norm::Two) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn text_round_trip() {
        let st = PlaneState::from_fn(-2, 3, 4, |n, l| (n as f64) * 0.1 + (l as f64).sin());
        let mut buf = Vec::new();
        st.write_text(&mut buf).unwrap();
        let back = PlaneState::read_text(&buf[..]).unwrap();
        assert_eq!(back, st);
    }
}
