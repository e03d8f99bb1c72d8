use std::f64::consts::PI;

use afc_qmem::analysis::visibility_fit;
use afc_qmem::qubit::quarter_phases;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

/// Fits of Poisson draws around a known fringe: the mean fitted V and θ0
/// sit within two standard errors of the truth.
#[test]
fn visibility_fit_is_unbiased_on_poisson_fringes() {
    let (a, v, th0) = (400.0, 0.701, 0.3);
    let phases = quarter_phases();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 1000;
    let (mut vs, mut ths) = (Vec::with_capacity(trials), Vec::with_capacity(trials));
    for _ in 0..trials {
        let counts: Vec<f64> = phases
            .iter()
            .map(|&t| Poisson::new(a * (1.0 + v * (t - th0).cos())).unwrap().sample(&mut rng))
            .collect();
        let fit = visibility_fit(&phases, &counts).unwrap();
        vs.push(fit.visibility_raw);
        ths.push(fit.phase_offset.value);
    }
    let stats = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        (m, sd / n.sqrt(), sd)
    };
    let (mv, se_v, sd_v) = stats(&vs);
    let (mt, se_t, _) = stats(&ths);
    assert!((mv - v).abs() < 2.0 * se_v, "mean V {mv} vs {v} (s.e. {se_v})");
    assert!((mt - th0).abs() < 2.0 * se_t, "mean θ0 {mt} vs {th0} (s.e. {se_t})");

    // The reported σ_V matches the spread of the ensemble to within 15%.
    let counts: Vec<f64> = phases.iter().map(|&t| a * (1.0 + v * (t - th0).cos())).collect();
    let sigma = visibility_fit(&phases, &counts).unwrap().visibility.sigma;
    assert!((sigma / sd_v - 1.0).abs() < 0.15, "σ_V {sigma} vs spread {sd_v}");
}

#[test]
fn fit_recovers_phase_on_uneven_grids() {
    let phases = [0.1, 1.3, 2.2, 3.9, 5.0];
    for th0 in [-3.0, -PI / 2.0, 0.0, 1.0, 2.9] {
        let counts: Vec<f64> = phases.iter().map(|t| 50.0 * (1.0 + 0.5 * (t - th0).cos())).collect();
        let fit = visibility_fit(&phases, &counts).unwrap();
        let d = (fit.phase_offset.value - th0 + PI).rem_euclid(2.0 * PI) - PI;
        assert!(d.abs() < 1e-9 && (fit.visibility.value - 0.5).abs() < 1e-9);
    }
}
