//! Command-line driver: one subcommand per experiment, each writing CSV
//! artifacts plus `run.conf` and `manifest.txt` into `--out`.

mod artifacts;
mod commands;
mod config;

pub use artifacts::{num, sha256, write_atomic, Artifacts, Csv};
pub use config::{parse_file, render};

use crate::error::Error;
use crate::lattice::{Direction, Norm};
use crate::sim::PerturbationKind;
use crate::wave::{Scheme, ShiftMode};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

/// Environment variable bounding the worker pool.
pub const WORKERS_ENV: &str = "LATFRONT_WORKERS";

/// Exit status when a run finishes but a requested property check fails.
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "latfront", version, about = "Planar fronts on the square lattice: profiles, spectra, Melnikov constants, pinning and decay experiments")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve the regularized profile equation for one (ρ, direction).
    Wave(WaveArgs),
    /// Bracket the pinning threshold ρ* for one direction.
    Pin(PinArgs),
    /// Track the eigenvalue branch λ_ω over a symmetric ω range.
    Spectrum(SpectrumArgs),
    /// Melnikov constant by the integral formula and by finite differences.
    Melnikov(MelnikovArgs),
    /// Melnikov constant against the propagation angle.
    MelnikovPolar(PolarArgs),
    /// Essential-spectrum margin and multiplier decay exponents.
    EssSpec(EssArgs),
    /// Perturb a front on the planar lattice and record decay norms.
    Simulate(SimulateArgs),
    /// Power-law fits to the columns of a simulate CSV.
    DecayFit(DecayFitArgs),
    /// Regenerate a figure's data: melnikov_polar or c_of_rho.
    ReproduceFigure(FigureArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Run file of `key = value` lines (keys are long flag names); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct FrontArgs {
    /// Detuning ρ of the cubic, in (−1, 1).
    #[arg(long, default_value_t = 0.9, allow_negative_numbers = true)]
    pub rho: f64,
    /// Propagation direction σ₁,σ₂ with gcd 1.
    #[arg(long, default_value = "1,0", allow_hyphen_values = true)]
    pub dir: Direction,
    /// Regularization γ > 0 of the profile equation.
    #[arg(long, default_value_t = 1e-6)]
    pub gamma: f64,
    /// Half-length L of the profile grid [−L, L].
    #[arg(long, visible_alias = "L", default_value_t = 40.0)]
    pub half_length: f64,
    /// Profile grid spacing h (1/h an integer).
    #[arg(long, default_value_t = 0.1)]
    pub h: f64,
    /// Derivative discretization: upwind, upwind2, centralK, biasedK.
    #[arg(long, default_value = "upwind2")]
    pub scheme: Scheme,
    /// integer or normalized argument shifts.
    #[arg(long, default_value = "integer")]
    pub shift_mode: ShiftMode,
    /// Stored profile file. `wave` starts Newton from it; the other commands
    /// use it as is, and its header then overrides ρ, γ, direction and grid.
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct WaveArgs {
    #[command(flatten)]
    pub front: FrontArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct PinArgs {
    #[arg(long, default_value = "1,0", allow_hyphen_values = true)]
    pub dir: Direction,
    #[arg(long, default_value_t = 1e-6)]
    pub gamma: f64,
    /// |c| below this counts as pinned.
    #[arg(long, default_value_t = 1e-3)]
    pub c_tol: f64,
    /// Final bracket width.
    #[arg(long, default_value_t = 1e-4)]
    pub width: f64,
    /// Coarse grid spacing; the Richardson partner uses h/2.
    #[arg(long, default_value_t = 0.1)]
    pub h: f64,
    #[arg(long, default_value_t = 40.0)]
    pub half_length: f64,
    /// ρ where the downward sweep starts.
    #[arg(long, default_value_t = 0.9)]
    pub start: f64,
    /// Sweep step before bisection.
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    #[arg(long, default_value = "integer")]
    pub shift_mode: ShiftMode,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub front: FrontArgs,
    /// Sample ω uniformly on [−omega_max, omega_max].
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    pub omega_max: f64,
    #[arg(long, default_value_t = 33)]
    pub samples: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct MelnikovArgs {
    #[command(flatten)]
    pub front: FrontArgs,
    /// Largest accepted relative gap between the two evaluations.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Exit with status 4 unless M > 0.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub require_positive: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct PolarArgs {
    #[arg(long, default_value_t = 0.9, allow_negative_numbers = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub gamma: f64,
    /// Number of angles 2πk/thetas.
    #[arg(long, default_value_t = 64)]
    pub thetas: usize,
    /// Each angle is realized by the rational direction with components up
    /// to this bound whose angle is closest.
    #[arg(long, default_value_t = 64)]
    pub max_component: i64,
    #[arg(long, default_value_t = 20.0)]
    pub half_length: f64,
    #[arg(long, default_value_t = 0.1)]
    pub h: f64,
    #[arg(long, default_value = "upwind2")]
    pub scheme: Scheme,
    #[arg(long, default_value = "normalized")]
    pub shift_mode: ShiftMode,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Exit with status 4 unless every M > 0.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub require_positive: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct EssArgs {
    #[command(flatten)]
    pub front: FrontArgs,
    #[arg(long, default_value_t = 257)]
    pub n_omega: usize,
    #[arg(long, default_value_t = 257)]
    pub n_nu: usize,
    /// κ of the model multiplier |ω|^k e^{−κω²t}.
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Smallest dyadic time of the multiplier fits.
    #[arg(long, default_value_t = 16.0)]
    pub t_min: f64,
    /// Largest dyadic time of the multiplier fits.
    #[arg(long, default_value_t = 4096.0)]
    pub t_max: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    /// Regularized profile used to seed the lattice wave.
    #[command(flatten)]
    pub front: FrontArgs,
    /// Half-length of the lattice-wave grid.
    #[arg(long, default_value_t = 60.0)]
    pub frame_half_length: f64,
    #[arg(long, default_value_t = 0.05)]
    pub frame_h: f64,
    #[arg(long, default_value = "biased7")]
    pub frame_scheme: Scheme,
    #[arg(long, default_value_t = -100, allow_negative_numbers = true)]
    pub n_lo: i64,
    #[arg(long, default_value_t = 100, allow_negative_numbers = true)]
    pub n_hi: i64,
    /// Transverse sites (periodic in l).
    #[arg(long, default_value_t = 512)]
    pub l_count: usize,
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    #[arg(long, visible_alias = "T", default_value_t = 200.0)]
    pub t_end: f64,
    /// Decomposition interval, a whole multiple of dt.
    #[arg(long, default_value_t = 1.0)]
    pub sample_every: f64,
    /// phase_bump, random_local or theta_wave.
    #[arg(long, visible_alias = "perturb", default_value = "random_local")]
    pub perturbation: PerturbationKind,
    #[arg(long, visible_alias = "amp", default_value_t = 1e-2)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 5)]
    pub support: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// ℓᵖ index along n for the w norms: 1, 2 or inf.
    #[arg(long, default_value = "inf")]
    pub p: Norm,
    /// Let the stored window follow the front by whole sites.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub comoving: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct DecayFitArgs {
    /// A CSV written by `simulate`.
    #[arg(long, visible_alias = "in")]
    pub input: PathBuf,
    /// Columns to fit, comma separated.
    #[arg(long, visible_alias = "col", default_value = "theta_l2,theta_linf,thetadiff_l2,thetadiff_linf,w_p2,w_pinf")]
    pub columns: String,
    /// Fit window a,b (default T/4,T).
    #[arg(long)]
    pub window: Option<String>,
    /// One-sided checks column:bound,...; exit status 4 if an exponent falls below.
    #[arg(long)]
    pub bounds: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
#[value(rename_all = "snake_case")]
pub enum Figure {
    MelnikovPolar,
    COfRho,
}

#[derive(Args, Debug, Clone)]
pub struct FigureArgs {
    #[arg(long, value_enum)]
    pub figure: Figure,
    /// Angles for melnikov_polar.
    #[arg(long, default_value_t = 64)]
    pub thetas: usize,
    /// ρ spacing for c_of_rho.
    #[arg(long, default_value_t = 0.01)]
    pub rho_step: f64,
    #[command(flatten)]
    pub common: Common,
}

fn known_keys(sub: &str) -> Option<Vec<String>> {
    let cmd = Cli::command();
    let sc = cmd.find_subcommand(sub)?;
    Some(sc.get_arguments().filter_map(|a| a.get_long().map(String::from)).collect())
}

/// Effective settings as `key = value` pairs (defaults included), in flag
/// order; `out` and `config` are run plumbing and left out.
fn snapshot(cmd: &clap::Command, m: &clap::ArgMatches) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for arg in cmd.get_arguments() {
        let (Some(long), id) = (arg.get_long(), arg.get_id()) else { continue };
        if long == "out" || long == "config" {
            continue;
        }
        if let Ok(Some(raw)) = m.try_get_raw(id.as_str()) {
            let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            out.push((long.to_string(), vals.join(",")));
        }
    }
    out
}

fn setup_pool() -> Result<(), Error> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?;
        // a second initialization (e.g. repeated in-process runs) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Runs the driver on `args` (program name first) and returns the exit status.
pub fn run(args: &[String]) -> i32 {
    if let Err(e) = setup_pool() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    let args = match config::expand(args, known_keys) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cmd = Cli::command();
    let matches = match cmd.clone().try_get_matches_from(&args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let conf = render(&snapshot(cmd.find_subcommand(name).expect("parsed subcommand exists"), sub));
    match commands::dispatch(&cli.command, name, &conf) {
        Ok(true) => 0,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_flag_is_a_config_key() {
        Cli::command().debug_assert();
        for sc in Cli::command().get_subcommands() {
            let keys = known_keys(sc.get_name()).unwrap();
            for a in sc.get_arguments() {
                if a.get_id() != "help" {
                    assert!(a.get_long().is_some_and(|l| keys.contains(&l.to_string())), "{}", a.get_id());
                }
            }
        }
    }

    #[test]
    fn snapshot_round_trips_through_the_parser() {
        let args: Vec<String> = ["latfront", "simulate", "--dir", "2,1", "--n-lo", "-30", "--comoving", "false"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let cmd = Cli::command();
        let m = cmd.clone().try_get_matches_from(&args).unwrap();
        let (name, sub) = m.subcommand().unwrap();
        let snap = snapshot(cmd.find_subcommand(name).unwrap(), sub);
        let mut again = vec!["latfront".to_string(), name.to_string()];
        again.extend(snap.iter().map(|(k, v)| format!("--{k}={v}")));
        let m2 = cmd.clone().try_get_matches_from(&again).unwrap();
        assert_eq!(snap, snapshot(cmd.find_subcommand(name).unwrap(), m2.subcommand().unwrap().1));
        let Command::Simulate(s) = Cli::from_arg_matches(&m2).unwrap().command else { panic!() };
        assert_eq!((s.front.dir, s.n_lo, s.comoving), (Direction::new(2, 1).unwrap(), -30, false));
    }
}
