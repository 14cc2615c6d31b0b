use latfront::lattice::Direction;
use latfront::wave::*;

fn dir(a: i64, b: i64) -> Direction {
    Direction::new(a, b).unwrap()
}

#[test]
fn horizontal_threshold_bracket() {
    let s = PinningSettings::default();
    let r = pinning_threshold(dir(1, 0), &s).unwrap();
    assert!(r.rho_hi - r.rho_lo <= 1e-4);
    assert!(0.0 < r.rho_lo && r.rho_hi < 1.0);
    let at = |rho: f64| r.samples.iter().find(|x| x.rho == rho).unwrap().c_ext;
    assert!(at(r.rho_lo).abs() < s.c_tol);
    assert!(at(r.rho_hi).abs() >= s.c_tol);
    // above the bracket |c| grows with ρ
    let mut above: Vec<&CRhoSample> = r.samples.iter().filter(|x| x.rho >= r.rho_hi).collect();
    above.sort_by(|a, b| a.rho.total_cmp(&b.rho));
    for w in above.windows(2) {
        assert!(w[1].c_ext < w[0].c_ext, "c not monotone between ρ={} and ρ={}", w[0].rho, w[1].rho);
    }
}

#[test]
fn stronger_regularization_lowers_the_threshold() {
    let weak = pinning_threshold(dir(1, 0), &PinningSettings::default()).unwrap();
    let strong = pinning_threshold(dir(1, 0), &PinningSettings { gamma: 1e-4, ..Default::default() }).unwrap();
    assert!(strong.rho_hi < weak.rho_lo, "{} vs {}", strong.rho_star, weak.rho_star);
}

#[test]
fn diagonal_threshold_exists() {
    let r = pinning_threshold(dir(1, 1), &PinningSettings::default()).unwrap();
    assert!(0.0 < r.rho_lo && r.rho_hi < 1.0 && r.rho_hi - r.rho_lo <= 1e-4);
}

#[test]
fn speed_is_monotone_along_the_branch() {
    // the branch is followed downward: upward steps out of the symmetric
    // ρ = 0 wave do not converge at this γ
    let grid = ProfileGrid::new(40.0, 0.1).unwrap();
    let mut cont = Continuation::start(0.9, dir(1, 0), ShiftMode::Integer, 1e-6, grid, Scheme::default()).unwrap();
    let mut last = cont.profile().c;
    assert!(last < -1.0);
    for k in (0..18).rev() {
        let rho = 0.05 * k as f64;
        let c = cont.advance_to(rho).unwrap().c;
        assert!(c >= last - 1e-12, "speed turned back at ρ={rho}: {c} after {last}");
        last = c;
    }
    assert!(last.abs() <= 1e-8);
}
