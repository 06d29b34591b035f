//! Oracle-equivalence and sign-property checks for the closed-form
//! time-allocation solver on randomized instances.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use wpmec_core::config::SimConfig;
use wpmec_core::tau::{self, synth};

#[test]
fn closed_form_matches_grid_oracle_on_500_instances() {
    let cfg = SimConfig::default().validate().unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(0x7A0);
    let step = 1e-4;
    let mut checked = 0;
    for _ in 0..500 {
        let plan = synth::random_feasible_plan(&mut rng, &cfg, 3.0 * step);
        let solved = tau::solve_plan(&plan, &cfg).unwrap();
        let oracle = tau::oracle_tau(&plan, &cfg, step).unwrap();
        let coeffs = tau::coefficients(&plan, &cfg);
        let degenerate =
            coeffs.bits_slope.abs() <= 1e-12 * coeffs.bits_base.abs();
        if !degenerate {
            assert!(
                (solved - oracle).abs() <= step + 1e-12,
                "tau mismatch: {solved} vs {oracle}"
            );
            checked += 1;
        }
        let f_solved = tau::objective(solved, &coeffs).unwrap();
        let f_oracle = tau::objective(oracle, &coeffs).unwrap();
        assert!(
            f_solved >= f_oracle - 1e-9 * f_oracle.abs(),
            "solver lost to oracle: {f_solved} < {f_oracle}"
        );
    }
    assert!(checked >= 400, "too few non-degenerate instances: {checked}");
}

#[test]
fn capacity_imbalance_sign_decides_the_derivative_sign() {
    // On every sampled instance with a non-negligible capacity imbalance A,
    // sign(AD − BC) must equal sign(A); B and D must always be positive.
    let cfg = SimConfig::default().validate().unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(0x7A1);
    let mut sign_checked = 0;
    for i in 0..2000 {
        let plan = synth::random_feasible_plan(&mut rng, &cfg, 3e-4);
        let c = tau::coefficients(&plan, &cfg);
        assert!(c.bits_base > 0.0, "instance {i}: B not positive");
        assert!(c.power_base > 0.0, "instance {i}: D not positive");
        if c.bits_slope.abs() > 1e-12 * c.bits_base.abs() {
            let disc = c.discriminant();
            assert!(
                disc.signum() == c.bits_slope.signum(),
                "instance {i}: sign(AD-BC)={} but sign(A)={} (A={}, B={}, C={}, D={})",
                disc.signum(),
                c.bits_slope.signum(),
                c.bits_slope,
                c.bits_base,
                c.power_slope,
                c.power_base
            );
            sign_checked += 1;
        }
    }
    assert!(sign_checked >= 1500, "too few sign checks: {sign_checked}");
}
