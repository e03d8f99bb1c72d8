use afc_qmem::analysis::{FidelityReport, ReportCounts};
use afc_qmem::propagation::{propagate, Wavepacket};
use afc_qmem::qubit::quarter_phases;
use afc_qmem::spectral::{build_absorption, to_transfer_function, CombSpec, SpectralGrid, ToothShape};
use proptest::prelude::*;
use rustfft::num_complex::Complex64;

fn grid() -> SpectralGrid {
    SpectralGrid::new(20e9, 1 << 11).unwrap()
}

fn comb() -> impl Strategy<Value = CombSpec> {
    (
        prop_oneof![
            Just(ToothShape::Gaussian),
            Just(ToothShape::Lorentzian),
            Just(ToothShape::Square)
        ],
        200e6..800e6f64,
        1.5..8.0f64,
        2e9..8e9f64,
        -1e9..1e9f64,
        0.0..8.0f64,
        0.0..1.0f64,
    )
        .prop_map(|(shape, spacing, finesse, bw, offset, d, d0)| CombSpec {
            center_offset_hz: offset,
            bandwidth_hz: bw,
            tooth_spacing_hz: spacing,
            tooth_width_hz: spacing / finesse,
            shape,
            peak_depth: d,
            background_depth: d0,
            amplitude_weight: 1.0,
        })
}

/// Largest pointwise difference relative to the peak amplitude of `b`.
fn max_dev(a: &Wavepacket, b: &Wavepacket) -> f64 {
    let peak = b.amplitude().iter().map(|z| z.norm()).fold(0.0, f64::max);
    a.amplitude()
        .iter()
        .zip(b.amplitude())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
        / peak
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transfer_is_passive(spec in comb()) {
        let Ok(profile) = build_absorption(&spec, &grid()) else { return Ok(()) };
        prop_assert!(profile.values().iter().all(|&a| a >= 0.0));
        let h = to_transfer_function(&profile);
        prop_assert!(h.magnitude().iter().all(|&m| m <= 1.0));
    }

    #[test]
    fn energy_never_grows(spec in comb(), bw in 0.5e9..8e9f64, t0 in -1e-9..2e-9f64) {
        let Ok(profile) = build_absorption(&spec, &grid()) else { return Ok(()) };
        let h = to_transfer_function(&profile);
        let x = Wavepacket::gaussian(&grid(), bw, t0, 0.0).unwrap();
        let y = propagate(&x, &h).unwrap();
        prop_assert!(y.energy() <= x.energy() * (1.0 + 1e-12));
    }

    #[test]
    fn propagation_is_linear(spec in comb(), re in -3.0..3.0f64, im in -3.0..3.0f64, delay in 0.1e-9..3e-9f64) {
        let Ok(profile) = build_absorption(&spec, &grid()) else { return Ok(()) };
        let h = to_transfer_function(&profile);
        let x = Wavepacket::gaussian(&grid(), 3e9, 0.0, 0.0).unwrap();
        let y = x.delayed(delay);
        let (a, b) = (Complex64::new(re, im), Complex64::new(im, -re));
        let lhs = propagate(&x.combine(a, &y, b).unwrap(), &h).unwrap();
        let rhs = propagate(&x, &h).unwrap().combine(a, &propagate(&y, &h).unwrap(), b).unwrap();
        prop_assert!(max_dev(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn report_identities_hold_for_any_counts(
        c in prop::array::uniform4(1u32..5000),
        fringe in prop::array::uniform4(0u32..5000),
        bg in 0.0..100.0f64,
    ) {
        let counts = ReportCounts {
            early_given_early: c[0] as f64,
            late_given_early: c[1] as f64,
            late_given_late: c[2] as f64,
            early_given_late: c[3] as f64,
            phases: quarter_phases().to_vec(),
            fringe: fringe.iter().map(|&x| x as f64).collect(),
            signal: (c[0] + c[2]) as f64,
            background: bg,
        };
        match FidelityReport::from_counts(&counts) {
            Ok(r) => {
                prop_assert!(r.check().is_ok());
                prop_assert!((0.0..=1.0).contains(&r.visibility.value));
                prop_assert_eq!(r.snr.lower_bound, bg == 0.0);
            }
            // Only an all-zero fringe may be rejected.
            Err(_) => prop_assert!(fringe.iter().all(|&x| x == 0)),
        }
    }
}
