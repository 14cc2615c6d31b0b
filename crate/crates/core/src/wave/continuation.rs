use super::{solve_wave, Guess, NewtonSettings, ProfileGrid, Scheme, ShiftMode, WaveProblem, WaveProfile};
use crate::error::{Error, Result};
use crate::lattice::{CubicNagumo, Direction};

/// Natural-parameter continuation of a Nagumo front in ρ.
#[derive(Clone, Debug)]
pub struct Continuation {
    pub direction: Direction,
    pub shift_mode: ShiftMode,
    pub gamma: f64,
    pub grid: ProfileGrid,
    pub scheme: Scheme,
    pub settings: NewtonSettings,
    /// Smallest step tried before giving up.
    pub min_step: f64,
    profile: WaveProfile,
}

impl Continuation {
    /// Starts the branch at `rho` from a tanh guess.
    pub fn start(
        rho: f64,
        direction: Direction,
        shift_mode: ShiftMode,
        gamma: f64,
        grid: ProfileGrid,
        scheme: Scheme,
    ) -> Result<Self> {
        let settings = NewtonSettings::default();
        let sys = CubicNagumo::new(rho)?;
        let problem = WaveProblem { system: &sys, direction, shift_mode, gamma, grid, scheme };
        let profile = solve_wave(&problem, &Guess::Tanh, &settings)?;
        Ok(Continuation { direction, shift_mode, gamma, grid, scheme, settings, min_step: 1e-6, profile })
    }

    pub fn rho(&self) -> f64 {
        self.profile.rho
    }

    pub fn profile(&self) -> &WaveProfile {
        &self.profile
    }

    pub fn into_profile(self) -> WaveProfile {
        self.profile
    }

    fn solve_at(&self, rho: f64) -> Result<WaveProfile> {
        let sys = CubicNagumo::new(rho)?;
        let problem = WaveProblem {
            system: &sys,
            direction: self.direction,
            shift_mode: self.shift_mode,
            gamma: self.gamma,
            grid: self.grid,
            scheme: self.scheme,
        };
        solve_wave(&problem, &Guess::Profile(&self.profile), &self.settings)
    }

    /// Moves the branch to `target`, halving the step whenever Newton fails.
    pub fn advance_to(&mut self, target: f64) -> Result<&WaveProfile> {
        let mut step = (target - self.rho()).abs();
        while self.rho() != target {
            let dir = (target - self.rho()).signum();
            let next = if step >= (target - self.rho()).abs() { target } else { self.rho() + dir * step };
            match self.solve_at(next) {
                Ok(p) => {
                    self.profile = p;
                    step *= 2.0;
                }
                Err(e) => {
                    step /= 2.0;
                    if step < self.min_step {
                        return Err(e);
                    }
                }
            }
        }
        Ok(&self.profile)
    }
}

/// Speed at one ρ from upwind solves on h and h/2 and their Richardson
/// combination c_ext = 2c(h/2) − c(h), which removes the O(h) upwind error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CRhoSample {
    pub rho: f64,
    pub c_coarse: f64,
    pub c_fine: f64,
    pub c_ext: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct PinningSettings {
    pub c_tol: f64,
    /// Final bracket width.
    pub width: f64,
    /// Coarse grid spacing; the fine track uses h/2.
    pub h: f64,
    pub half_length: f64,
    pub gamma: f64,
    pub shift_mode: ShiftMode,
    /// The sweep starts here (fronts travel fast) and walks down.
    pub start: f64,
    pub step: f64,
}

impl Default for PinningSettings {
    fn default() -> Self {
        PinningSettings {
            c_tol: 1e-3,
            width: 1e-4,
            h: 0.1,
            half_length: 40.0,
            gamma: 1e-6,
            shift_mode: ShiftMode::Integer,
            start: 0.9,
            step: 0.05,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PinningResult {
    /// |c| < c_tol at rho_lo and |c| ≥ c_tol at rho_hi.
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub rho_star: f64,
    /// Every point visited, in the order computed.
    pub samples: Vec<CRhoSample>,
}

#[derive(Clone)]
struct Pair {
    coarse: Continuation,
    fine: Continuation,
}

impl Pair {
    fn start(dir: Direction, s: &PinningSettings) -> Result<Self> {
        let grid = ProfileGrid::new(s.half_length, s.h)?;
        let fine_grid = grid.refined();
        let (coarse, fine) = rayon::join(
            || Continuation::start(s.start, dir, s.shift_mode, s.gamma, grid, Scheme::Upwind),
            || Continuation::start(s.start, dir, s.shift_mode, s.gamma, fine_grid, Scheme::Upwind),
        );
        Ok(Pair { coarse: coarse?, fine: fine? })
    }

    fn advance_to(&mut self, rho: f64) -> Result<CRhoSample> {
        let (a, b) = rayon::join(|| self.coarse.advance_to(rho).map(|p| p.c), || self.fine.advance_to(rho).map(|p| p.c));
        let (c_coarse, c_fine) = (a?, b?);
        Ok(CRhoSample { rho, c_coarse, c_fine, c_ext: 2.0 * c_fine - c_coarse })
    }
}

fn check(s: &PinningSettings) -> Result<()> {
    if !(s.c_tol > 0.0 && s.width > 0.0 && s.step > 0.0) {
        return Err(Error::Config("c_tol, width and step must be positive".into()));
    }
    if !(s.start > 0.0 && s.start < 1.0) {
        return Err(Error::Config(format!("continuation start must lie in (0, 1), got {}", s.start)));
    }
    Ok(())
}

/// Speeds along the branch at the given ρ values, visited in order.
pub fn c_of_rho(dir: Direction, rhos: &[f64], s: &PinningSettings) -> Result<Vec<CRhoSample>> {
    check(s)?;
    let mut pair = Pair::start(dir, s)?;
    rhos.iter().map(|&rho| pair.advance_to(rho)).collect()
}

/// Largest ρ at which the (extrapolated) speed drops below c_tol, found by
/// walking down from `start` and bisecting the first bracket.
pub fn pinning_threshold(dir: Direction, s: &PinningSettings) -> Result<PinningResult> {
    check(s)?;
    let mut hi_pair = Pair::start(dir, s)?;
    let mut samples = vec![hi_pair.clone().advance_to(s.start)?];
    if samples[0].c_ext.abs() < s.c_tol {
        return Err(Error::ThresholdNotFound { lo: 0.0, hi: s.start });
    }
    let mut hi = s.start;
    let mut lo = None;
    while hi > 0.0 {
        let next = (hi - s.step).max(0.0);
        let mut pair = hi_pair.clone();
        let sample = pair.advance_to(next)?;
        samples.push(sample);
        if sample.c_ext.abs() < s.c_tol {
            lo = Some(next);
            break;
        }
        hi = next;
        hi_pair = pair;
    }
    let mut lo = lo.ok_or(Error::ThresholdNotFound { lo: 0.0, hi: s.start })?;
    while hi - lo > s.width {
        let mid = 0.5 * (lo + hi);
        let mut pair = hi_pair.clone();
        let sample = pair.advance_to(mid)?;
        samples.push(sample);
        if sample.c_ext.abs() < s.c_tol {
            lo = mid;
        } else {
            hi = mid;
            hi_pair = pair;
        }
    }
    Ok(PinningResult { rho_lo: lo, rho_hi: hi, rho_star: lo, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advance_reaches_target_and_speed_falls() {
        let dir = Direction::new(1, 0).unwrap();
        let grid = ProfileGrid::new(20.0, 0.1).unwrap();
        let mut cont = Continuation::start(0.9, dir, ShiftMode::Integer, 1e-6, grid, Scheme::Central(2)).unwrap();
        let c0 = cont.profile().c;
        let c1 = cont.advance_to(0.6).unwrap().c;
        assert_eq!(cont.rho(), 0.6);
        assert!(c0 < c1 && c1 < 0.0, "{c0} {c1}");
    }

    #[test]
    fn rejects_bad_settings() {
        let dir = Direction::new(1, 0).unwrap();
        let s = PinningSettings { start: 1.0, ..Default::default() };
        assert!(matches!(pinning_threshold(dir, &s), Err(Error::Config(_))));
    }
}
