//! Travelling-wave profiles u_{ij}(t) = Φ(iσ₁ + jσ₂ + ct) of the planar
//! lattice equation, computed from the regularized profile equation
//!
//!   cΦ′ = γΦ″ + f(Φ(ξ+r₁), Φ(ξ+r₂), Φ(ξ−r₁), Φ(ξ−r₂), Φ(ξ))
//!
//! on a uniform grid with clamped far-field values. With this ansatz a front
//! in which u₋ invades u₊ moves toward +n and has c < 0.

mod continuation;
mod newton;

pub use continuation::{c_of_rho, pinning_threshold, CRhoSample, Continuation, PinningResult, PinningSettings};
pub use newton::{assemble_residual, phase_tangent, solve_lattice_wave, solve_wave, Guess, NewtonSettings, WaveProblem};

use crate::error::{Error, Result};
use crate::lattice::{Direction, ReactionSystem};
use crate::linalg::{central_weights, fd_weights, UniformInterp};
use std::io::{BufRead, Write};

/// Nodes ξ_k = −L + k h, k = 0..2L/h, with 1/h an integer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileGrid {
    pub half_length: f64,
    pub h: f64,
}

impl ProfileGrid {
    pub fn new(half_length: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::Config(format!("grid spacing h must lie in (0, 1], got {h}")));
        }
        let m = (1.0 / h).round();
        if ((1.0 / h) - m).abs() > 1e-9 * m {
            return Err(Error::Config(format!("1/h must be an integer, got h={h}")));
        }
        let nodes = half_length * m;
        if !(half_length >= 1.0) || (nodes - nodes.round()).abs() > 1e-9 {
            return Err(Error::Config(format!("L must be a positive multiple of h, got L={half_length}")));
        }
        Ok(ProfileGrid { half_length, h: 1.0 / m })
    }

    /// Nodes per unit length.
    pub fn m(&self) -> usize {
        (1.0 / self.h).round() as usize
    }

    pub fn len(&self) -> usize {
        2 * self.center() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of ξ = 0.
    pub fn center(&self) -> usize {
        (self.half_length * self.m() as f64).round() as usize
    }

    pub fn xi(&self, k: usize) -> f64 {
        (k as f64 - self.center() as f64) * self.h
    }

    pub fn refined(&self) -> Self {
        ProfileGrid { half_length: self.half_length, h: self.h / 2.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftMode {
    /// Shifts (σ₁, σ₂): integer, node-exact.
    Integer,
    /// Shifts (cos θ, sin θ): interpolated by piecewise cubics.
    Normalized,
}

impl std::fmt::Display for ShiftMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ShiftMode::Integer => "integer",
            ShiftMode::Normalized => "normalized",
        })
    }
}

impl std::str::FromStr for ShiftMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integer" => Ok(ShiftMode::Integer),
            "normalized" => Ok(ShiftMode::Normalized),
            _ => Err(Error::Config(format!("shift mode must be integer|normalized, got {s:?}"))),
        }
    }
}

/// Discretization of the derivative terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Centered differences of the given even order for Φ′ and Φ″.
    Central(usize),
    /// First-order upwinding of cΦ′ (second-order Φ″); used for speed
    /// estimates near pinning where the centered scheme oscillates.
    Upwind,
    /// Second-order one-sided (upwinded) Φ′, centered Φ″.
    Upwind2,
    /// Upwind-biased Φ′ of odd order p on p+1 nodes (one extra node on the
    /// upwind side), centered Φ″ of order p+1. Free of the odd/even
    /// decoupling of centered stencils, so it suits γ = 0 solves.
    Biased(usize),
}

/// Centered Φ′ at small γ leaves a slowly decaying sawtooth in the tail
/// (about 3e−4 at h = 0.1, ρ = 0.9), so fronts come out non-monotone; the
/// one-sided second-order stencil keeps O(h²) accuracy without it.
impl Default for Scheme {
    fn default() -> Self {
        Scheme::Upwind2
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Central(p) => write!(f, "central{p}"),
            Scheme::Upwind => f.write_str("upwind"),
            Scheme::Upwind2 => f.write_str("upwind2"),
            Scheme::Biased(p) => write!(f, "biased{p}"),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upwind" => return Ok(Scheme::Upwind),
            "upwind2" => return Ok(Scheme::Upwind2),
            _ => {}
        }
        if let Some(p) = s.strip_prefix("biased") {
            if let Ok(p) = p.parse::<usize>() {
                if p % 2 == 1 && p <= 15 {
                    return Ok(Scheme::Biased(p));
                }
            }
        }
        if let Some(p) = s.strip_prefix("central") {
            let p: usize = p
                .parse()
                .map_err(|_| Error::Config(format!("bad scheme {s:?}")))?;
            if p >= 2 && p.is_multiple_of(2) && p <= 16 {
                return Ok(Scheme::Central(p));
            }
        }
        Err(Error::Config(format!("scheme must be centralP (P even, 2..16) biasedP (P odd), upwind or upwind2, got {s:?}")))
    }
}

/// Node offsets and weights (per unit spacing) of a derivative stencil.
#[derive(Clone, Debug, PartialEq)]
pub struct Taps {
    pub offsets: Vec<i64>,
    pub weights: Vec<f64>,
}

impl Taps {
    fn single(offset: i64) -> Self {
        Taps { offsets: vec![offset], weights: vec![1.0] }
    }

    fn reach(&self) -> i64 {
        self.offsets.iter().map(|o| o.abs()).max().unwrap_or(0)
    }
}

impl Scheme {
    /// Stencil for Φ′ (already divided by h). Upwinding depends on sign(c).
    pub fn d1(&self, h: f64, c: f64) -> Taps {
        match *self {
            Scheme::Central(p) => {
                let (w, _) = central_weights(p);
                let half = (p / 2) as i64;
                Taps {
                    offsets: (-half..=half).collect(),
                    weights: w.iter().map(|v| v / h).collect(),
                }
            }
            Scheme::Upwind => {
                if c >= 0.0 {
                    Taps { offsets: vec![-1, 0], weights: vec![-1.0 / h, 1.0 / h] }
                } else {
                    Taps { offsets: vec![0, 1], weights: vec![-1.0 / h, 1.0 / h] }
                }
            }
            Scheme::Upwind2 => {
                let w = [1.0 / (2.0 * h), -4.0 / (2.0 * h), 3.0 / (2.0 * h)];
                if c >= 0.0 {
                    Taps { offsets: vec![-2, -1, 0], weights: w.to_vec() }
                } else {
                    Taps { offsets: vec![0, 1, 2], weights: w.iter().rev().map(|v| -v).collect() }
                }
            }
            Scheme::Biased(p) => {
                let q = (p / 2) as i64;
                let offsets: Vec<i64> = if c >= 0.0 { (-q - 1..=q).collect() } else { (-q..=q + 1).collect() };
                let x: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
                let w = fd_weights(0.0, &x, 1);
                Taps { offsets, weights: w[1].iter().map(|v| v / h).collect() }
            }
        }
    }

    pub fn d2(&self, h: f64) -> Taps {
        let p = match *self {
            Scheme::Central(p) => p,
            Scheme::Upwind | Scheme::Upwind2 => 2,
            Scheme::Biased(p) => p + 1,
        };
        let (_, w) = central_weights(p);
        let half = (p / 2) as i64;
        Taps {
            offsets: (-half..=half).collect(),
            weights: w.iter().map(|v| v / (h * h)).collect(),
        }
    }

    pub fn reach(&self) -> i64 {
        match *self {
            Scheme::Central(p) => (p / 2) as i64,
            Scheme::Upwind => 1,
            Scheme::Upwind2 => 2,
            Scheme::Biased(p) => (p / 2 + 1) as i64,
        }
    }
}

/// The five argument shifts r_j of the profile equation as grid stencils,
/// together with the transverse phase multipliers q_j: the ω-twisted
/// operator weights the j-th coupling by e^{i q_j ω}.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftTable {
    pub shifts: [f64; 5],
    pub taps: [Taps; 5],
    pub phase: [f64; 5],
}

impl ShiftTable {
    pub fn new(dir: Direction, mode: ShiftMode, grid: &ProfileGrid) -> Self {
        let (r1, r2) = match mode {
            ShiftMode::Integer => (dir.sigma1 as f64, dir.sigma2 as f64),
            ShiftMode::Normalized => dir.unit_shifts(),
        };
        let shifts = [r1, r2, -r1, -r2, 0.0];
        let m = grid.m() as f64;
        let taps = shifts.map(|r| {
            let s = r * m;
            if (s - s.round()).abs() < 1e-12 {
                Taps::single(s.round() as i64)
            } else {
                let ip = UniformInterp { x0: 0.0, h: 1.0, points: 4 };
                let (first, w) = ip.weights(s, 0);
                Taps {
                    offsets: (0..4).map(|i| first + i as i64).collect(),
                    weights: w[0].clone(),
                }
            }
        });
        ShiftTable {
            shifts,
            taps,
            phase: [r2, -r1, -r2, r1, 0.0],
        }
    }

    pub fn reach(&self) -> i64 {
        self.taps.iter().map(Taps::reach).max().unwrap_or(0)
    }
}

/// Discretized profile Φ_k (d-vectors, node-major) with its speed.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveProfile {
    pub grid: ProfileGrid,
    pub d: usize,
    pub values: Vec<f64>,
    pub c: f64,
    pub gamma: f64,
    /// Detuning of the reaction term (NaN when the system has none).
    pub rho: f64,
    pub direction: Direction,
    pub shift_mode: ShiftMode,
    pub scheme: Scheme,
    pub u_minus: Vec<f64>,
    pub u_plus: Vec<f64>,
}

impl WaveProfile {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn phi(&self, k: usize, a: usize) -> f64 {
        self.values[k * self.d + a]
    }

    /// Node value with far-field clamping for indices outside the grid.
    pub fn ghost(&self, k: i64, a: usize) -> f64 {
        if k < 0 {
            self.u_minus[a]
        } else if k >= self.len() as i64 {
            self.u_plus[a]
        } else {
            self.values[k as usize * self.d + a]
        }
    }

    pub fn component(&self, a: usize) -> Vec<f64> {
        (0..self.len()).map(|k| self.phi(k, a)).collect()
    }

    /// Interpolated Φ_a(ξ) (Lagrange, `points` nodes, clamped far field).
    pub fn eval(&self, xi: f64, a: usize, points: usize) -> f64 {
        let ip = UniformInterp { x0: -self.grid.half_length, h: self.grid.h, points };
        let (first, w) = ip.weights(xi, 0);
        (0..points).map(|i| w[0][i] * self.ghost(first + i as i64, a)).sum()
    }

    /// Centered difference of the given order applied to the grid values:
    /// the discrete Φ′ used for translation-mode checks.
    pub fn derivative(&self, order: usize) -> Vec<f64> {
        let taps = Scheme::Central(order).d1(self.grid.h, 0.0);
        let mut out = vec![0.0; self.values.len()];
        for k in 0..self.len() {
            for a in 0..self.d {
                out[k * self.d + a] = taps
                    .offsets
                    .iter()
                    .zip(&taps.weights)
                    .map(|(o, w)| w * self.ghost(k as i64 + o, a))
                    .sum();
            }
        }
        out
    }

    pub fn system_matches<S: ReactionSystem + ?Sized>(&self, sys: &S) -> bool {
        sys.dim() == self.d && sys.u_minus() == self.u_minus.as_slice() && sys.u_plus() == self.u_plus.as_slice()
    }

    /// Writes the profile file: header "L h c gamma rho sigma1 sigma2
    /// shift_mode d", a `# scheme` line, then one line "ξ_k Φ_k..." per node.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "{} {} {:.17e} {:.17e} {:.17e} {} {} {} {}",
            self.grid.half_length,
            self.grid.h,
            self.c,
            self.gamma,
            self.rho,
            self.direction.sigma1,
            self.direction.sigma2,
            self.shift_mode,
            self.d
        )?;
        let um: Vec<String> = self.u_minus.iter().map(|v| format!("{v:.17e}")).collect();
        let up: Vec<String> = self.u_plus.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "# scheme {} u_minus {} u_plus {}", self.scheme, um.join(","), up.join(","))?;
        for k in 0..self.len() {
            let vals: Vec<String> = (0..self.d).map(|a| format!("{:.17e}", self.phi(k, a))).collect();
            writeln!(w, "{:.17e} {}", self.grid.xi(k), vals.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty profile file".into()))??;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 9 {
            return Err(Error::Parse(format!("profile header needs 9 fields, got {header:?}")));
        }
        let pf = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("profile header {s:?}: {e}")));
        let pi = |s: &str| s.parse::<i64>().map_err(|e| Error::Parse(format!("profile header {s:?}: {e}")));
        let grid = ProfileGrid::new(pf(h[0])?, pf(h[1])?)?;
        let c = pf(h[2])?;
        let gamma = pf(h[3])?;
        let rho = pf(h[4])?;
        let direction = Direction::new(pi(h[5])?, pi(h[6])?)?;
        let shift_mode: ShiftMode = h[7].parse()?;
        let d = pi(h[8])? as usize;
        let mut scheme = Scheme::default();
        let mut u_minus = vec![-1.0; d];
        let mut u_plus = vec![1.0; d];
        let mut values = Vec::with_capacity(grid.len() * d);
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(meta) = t.strip_prefix('#') {
                let toks: Vec<&str> = meta.split_whitespace().collect();
                for pair in toks.chunks(2) {
                    if pair.len() != 2 {
                        continue;
                    }
                    let vec_of = |s: &str| -> Result<Vec<f64>> {
                        s.split(',').map(&pf).collect()
                    };
                    match pair[0] {
                        "scheme" => scheme = pair[1].parse()?,
                        "u_minus" => u_minus = vec_of(pair[1])?,
                        "u_plus" => u_plus = vec_of(pair[1])?,
                        _ => {}
                    }
                }
                continue;
            }
            let toks: Vec<&str> = t.split_whitespace().collect();
            if toks.len() != d + 1 {
                return Err(Error::Parse(format!("profile row needs {} columns: {t:?}", d + 1)));
            }
            for tok in &toks[1..] {
                values.push(pf(tok)?);
            }
        }
        if values.len() != grid.len() * d {
            return Err(Error::Parse(format!(
                "profile has {} values, grid needs {}",
                values.len(),
                grid.len() * d
            )));
        }
        if u_minus.len() != d || u_plus.len() != d {
            return Err(Error::Parse("far-field states have the wrong dimension".into()));
        }
        Ok(WaveProfile {
            grid,
            d,
            values,
            c,
            gamma,
            rho,
            direction,
            shift_mode,
            scheme,
            u_minus,
            u_plus,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_text(std::io::BufWriter::new(f))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_text(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(ProfileGrid::new(40.0, 0.1).is_ok());
        assert!(ProfileGrid::new(40.0, 0.3).is_err());
        let g = ProfileGrid::new(40.0, 0.1).unwrap();
        assert_eq!(g.len(), 801);
        assert_eq!(g.center(), 400);
        assert!(g.xi(400).abs() < 1e-15);
    }

    #[test]
    fn shift_tables() {
        let g = ProfileGrid::new(20.0, 0.1).unwrap();
        let t = ShiftTable::new(Direction::new(2, 1).unwrap(), ShiftMode::Integer, &g);
        assert_eq!(t.taps[0], Taps::single(20));
        assert_eq!(t.taps[3], Taps::single(-10));
        assert_eq!(t.phase, [1.0, -2.0, -1.0, 2.0, 0.0]);
        let t = ShiftTable::new(Direction::new(1, 1).unwrap(), ShiftMode::Normalized, &g);
        assert_eq!(t.taps[0].offsets.len(), 4);
        let s: f64 = t.taps[0].weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("central12".parse::<Scheme>().unwrap(), Scheme::Central(12));
        assert_eq!("upwind".parse::<Scheme>().unwrap(), Scheme::Upwind);
        assert_eq!(Scheme::Upwind2.to_string().parse::<Scheme>().unwrap(), Scheme::Upwind2);
        assert_eq!("biased5".parse::<Scheme>().unwrap(), Scheme::Biased(5));
        assert!("biased4".parse::<Scheme>().is_err());
        let t = Scheme::Biased(1).d1(0.5, -1.0);
        assert_eq!((t.offsets, t.weights), (vec![0, 1], vec![-2.0, 2.0]));
        assert!("central3".parse::<Scheme>().is_err());
    }
}
