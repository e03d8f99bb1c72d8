//! Time-bin qubits and the double-comb projection analyzer.
//!
//! A qubit `a|e> + b|l>` is carried by two copies of one mode envelope, the
//! late copy delayed by the bin separation `tau`. Storing it in a memory
//! made of two combs with recall times `t1` and `t2 = t1 + tau` sends the
//! early bin through comb 2 and the late bin through comb 1 into the same
//! output window at `t2`, where they interfere.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::propagation::{propagate, Optics, Wavepacket};
use crate::spectral::{build_absorption, superpose, to_transfer_function, CombSpec, TransferFunction};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBinQubit {
    pub early: Complex64,
    pub late: Complex64,
    /// Delay of the late bin relative to the early one (s).
    pub bin_separation_s: f64,
}

impl TimeBinQubit {
    pub fn new(early: Complex64, late: Complex64, bin_separation_s: f64) -> Result<Self> {
        let q = Self {
            early,
            late,
            bin_separation_s,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn early_state(bin_separation_s: f64) -> Result<Self> {
        Self::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), bin_separation_s)
    }

    pub fn late_state(bin_separation_s: f64) -> Result<Self> {
        Self::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), bin_separation_s)
    }

    /// `(|e> + e^{i phase} |l>) / sqrt(2)`.
    pub fn superposition(phase: f64, bin_separation_s: f64) -> Result<Self> {
        Self::new(
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            Complex64::from_polar(FRAC_1_SQRT_2, phase),
            bin_separation_s,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let norm = self.early.norm_sqr() + self.late.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("qubit", format!("|a|^2 + |b|^2 = {norm}, expected 1")));
        }
        if !(self.bin_separation_s.is_finite() && self.bin_separation_s > 0.0) {
            return Err(Error::invalid("bin_separation_s", "must be positive"));
        }
        Ok(())
    }

    /// Relative phase `arg(b) - arg(a)`.
    pub fn phase(&self) -> f64 {
        (self.late * self.early.conj()).arg()
    }

    /// `<self|other>` on the qubit amplitudes.
    pub fn overlap(&self, other: &Self) -> Complex64 {
        self.early.conj() * other.early + self.late.conj() * other.late
    }
}

/// Places the two bins on the time axis: `a * shape(t) + b * shape(t - tau)`.
pub fn encode(qubit: &TimeBinQubit, mode_shape: &Wavepacket) -> Result<Wavepacket> {
    qubit.validate()?;
    let duration = mode_shape.duration();
    if duration >= 0.5 * qubit.bin_separation_s {
        return Err(Error::BinOverlap {
            duration_s: duration,
            separation_s: qubit.bin_separation_s,
        });
    }
    let late = mode_shape.delayed(qubit.bin_separation_s);
    mode_shape.combine(qubit.early, &late, qubit.late)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSetting {
    /// Analyzer phase θ (rad).
    pub analyzer_phase: f64,
    /// Weight of comb 1; comb 2 gets the rest.
    pub amplitude_balance: f64,
    /// Recall times `(t1, t2)` of the two combs (s).
    pub recall_times: (f64, f64),
}

impl ProjectionSetting {
    pub fn new(analyzer_phase: f64, recall_times: (f64, f64)) -> Self {
        Self {
            analyzer_phase,
            amplitude_balance: 0.5,
            recall_times,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.analyzer_phase.is_finite() {
            return Err(Error::invalid("analyzer_phase", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.amplitude_balance) {
            return Err(Error::invalid("amplitude_balance", "must lie in [0, 1]"));
        }
        let (t1, t2) = self.recall_times;
        if !(t1.is_finite() && t1 > 0.0) {
            return Err(Error::invalid("recall_times", "t1 must be positive"));
        }
        if !(t2.is_finite() && t2 > t1) {
            return Err(Error::invalid("recall_times", "t2 must exceed t1"));
        }
        Ok(())
    }

    /// Checks `t2 - t1 = tau` to within one sample of `dt`.
    pub fn check_matches(&self, qubit: &TimeBinQubit, dt: f64) -> Result<()> {
        let (t1, t2) = self.recall_times;
        if ((t2 - t1) - qubit.bin_separation_s).abs() > dt {
            return Err(Error::invalid(
                "recall_times",
                format!(
                    "t2 - t1 = {} s does not match the bin separation {} s",
                    t2 - t1,
                    qubit.bin_separation_s
                ),
            ));
        }
        Ok(())
    }
}

/// The two combs of the analyzer. Both keep the finesse of `base`, so their
/// rephasing strengths per unit depth are equal and a balance of 0.5 gives
/// equal echo amplitudes. Comb 2 is shifted by `δ = θ' / (2π t2)`, with θ'
/// the analyzer phase wrapped to `(-π, π]`, which rotates its echo phase at
/// `t2` by θ.
pub fn double_afc_combs(setting: &ProjectionSetting, base: &CombSpec) -> Result<(CombSpec, CombSpec)> {
    setting.validate()?;
    base.validate()?;
    let (t1, t2) = setting.recall_times;
    let finesse = base.finesse();
    let wrapped = setting.analyzer_phase - TAU * (setting.analyzer_phase / TAU).round();
    let comb = |t: f64, weight: f64, shift: f64| CombSpec {
        center_offset_hz: base.center_offset_hz + shift,
        tooth_spacing_hz: 1.0 / t,
        tooth_width_hz: 1.0 / (t * finesse),
        amplitude_weight: weight,
        ..*base
    };
    Ok((
        comb(t1, setting.amplitude_balance, 0.0),
        comb(t2, 1.0 - setting.amplitude_balance, wrapped / (TAU * t2)),
    ))
}

/// Transfer function of the double comb on `grid`.
pub fn make_double_afc(
    setting: &ProjectionSetting,
    base: &CombSpec,
    grid: &crate::spectral::SpectralGrid,
) -> Result<TransferFunction> {
    let (c1, c2) = double_afc_combs(setting, base)?;
    Ok(to_transfer_function(&superpose(&c1, &c2, grid)?))
}

/// One detection window and the fraction of the input energy found in it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center_s: f64,
    pub width_s: f64,
    pub probability: f64,
}

impl Window {
    fn measure(out: &Wavepacket, input_energy: f64, center_s: f64, width_s: f64) -> Self {
        let p = out.energy_between(center_s - 0.5 * width_s, center_s + 0.5 * width_s) / input_energy;
        Self {
            center_s,
            width_s,
            probability: p,
        }
    }
}

/// Output of the analyzer: early bin via comb 1 at `t1`, the interference
/// window at `t2`, and late bin via comb 2 at `t2 + tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub early: Window,
    pub interference: Window,
    pub late: Window,
}

impl Projection {
    pub fn windows(&self) -> [Window; 3] {
        [self.early, self.interference, self.late]
    }
}

fn check_window(optics: &Optics, qubit: &TimeBinQubit, first_center: f64) -> Result<()> {
    let w = optics.echo_window_s;
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::invalid("echo_window_s", "must be positive"));
    }
    if w > qubit.bin_separation_s {
        return Err(Error::WindowOverlap(format!(
            "window {w} s is wider than the bin separation {} s",
            qubit.bin_separation_s
        )));
    }
    if first_center - 0.5 * w <= qubit.bin_separation_s + 0.5 * w {
        return Err(Error::WindowOverlap(
            "first recall window overlaps the transmitted bins".into(),
        ));
    }
    Ok(())
}

/// Stores `qubit` in the double comb and reads out the three windows.
pub fn project(
    qubit: &TimeBinQubit,
    setting: &ProjectionSetting,
    base: &CombSpec,
    optics: &Optics,
) -> Result<Projection> {
    let input = encode(qubit, &optics.input_pulse()?)?;
    setting.check_matches(qubit, input.grid().dt)?;
    let (t1, t2) = setting.recall_times;
    check_window(optics, qubit, t1)?;
    let h = make_double_afc(setting, base, &optics.grid)?;
    let out = propagate(&input, &h)?;
    let e_in = input.energy();
    let w = optics.echo_window_s;
    Ok(Projection {
        early: Window::measure(&out, e_in, t1, w),
        interference: Window::measure(&out, e_in, t2, w),
        late: Window::measure(&out, e_in, t2 + qubit.bin_separation_s, w),
    })
}

/// Output of plain storage in one comb: the early bin recalled at `1/Δν`
/// and the late bin at `1/Δν + tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Storage {
    pub early: Window,
    pub late: Window,
}

impl Storage {
    pub fn windows(&self) -> [Window; 2] {
        [self.early, self.late]
    }
}

pub fn store(qubit: &TimeBinQubit, comb: &CombSpec, optics: &Optics) -> Result<Storage> {
    let input = encode(qubit, &optics.input_pulse()?)?;
    let t = comb.recall_time();
    check_window(optics, qubit, t)?;
    let h = to_transfer_function(&build_absorption(comb, &optics.grid)?);
    let out = propagate(&input, &h)?;
    let e_in = input.energy();
    let w = optics.echo_window_s;
    Ok(Storage {
        early: Window::measure(&out, e_in, t, w),
        late: Window::measure(&out, e_in, t + qubit.bin_separation_s, w),
    })
}

/// Analyzer phases of the four-setting sweep, `k π / 2`.
pub fn quarter_phases() -> [f64; 4] {
    [0.0, 0.5 * PI, PI, 1.5 * PI]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{SpectralGrid, ToothShape};

    const TAU_BIN: f64 = 1.4e-9;

    // Ideal analyzer: the comb band is three times the photon bandwidth, so
    // echo tails from the band edges do not reach neighbouring windows.
    fn optics() -> Optics {
        Optics {
            grid: SpectralGrid::new(60e9, 1 << 16).unwrap(),
            pulse_bandwidth_hz: 5e9,
            echo_window_s: 1e-9,
        }
    }

    fn base() -> CombSpec {
        CombSpec {
            center_offset_hz: 0.0,
            bandwidth_hz: 15e9,
            tooth_spacing_hz: 1.0 / 6e-9,
            tooth_width_hz: 1.0 / 6e-9 / 2.0,
            shape: ToothShape::Gaussian,
            peak_depth: 2.0,
            background_depth: 0.0,
            amplitude_weight: 1.0,
        }
    }

    fn setting(theta: f64) -> ProjectionSetting {
        ProjectionSetting::new(theta, (6e-9, 7.4e-9))
    }

    fn fringe(phase: f64) -> Vec<f64> {
        let q = TimeBinQubit::superposition(phase, TAU_BIN).unwrap();
        quarter_phases()
            .iter()
            .map(|&th| {
                project(&q, &setting(th), &base(), &optics())
                    .unwrap()
                    .interference
                    .probability
            })
            .collect()
    }

    #[test]
    fn encode_places_bins_and_keeps_energy() {
        let shape = optics().input_pulse().unwrap();
        let q = TimeBinQubit::superposition(0.0, TAU_BIN).unwrap();
        let w = encode(&q, &shape).unwrap();
        assert!((w.energy() - 1.0).abs() < 1e-9);
        assert!((w.energy_between(-0.5e-9, 0.5e-9) - 0.5).abs() < 1e-6);
        assert!((w.energy_between(0.9e-9, 1.9e-9) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn early_and_late_are_orthogonal() {
        let shape = optics().input_pulse().unwrap();
        let e = encode(&TimeBinQubit::early_state(TAU_BIN).unwrap(), &shape).unwrap();
        let l = encode(&TimeBinQubit::late_state(TAU_BIN).unwrap(), &shape).unwrap();
        assert!(e.inner(&l).unwrap().norm_sqr() < 1e-12);
        // overlap of encoded states equals the qubit overlap
        let a = TimeBinQubit::superposition(0.3, TAU_BIN).unwrap();
        let b = TimeBinQubit::superposition(1.9, TAU_BIN).unwrap();
        let wa = encode(&a, &shape).unwrap();
        let wb = encode(&b, &shape).unwrap();
        assert!((wa.inner(&wb).unwrap().norm_sqr() - a.overlap(&b).norm_sqr()).abs() < 1e-9);
    }

    #[test]
    fn overlapping_bins_are_rejected() {
        let shape = optics().input_pulse().unwrap();
        let q = TimeBinQubit::early_state(0.1e-9).unwrap();
        assert!(matches!(encode(&q, &shape), Err(Error::BinOverlap { .. })));
    }

    #[test]
    fn unnormalized_qubit_is_rejected() {
        let r = TimeBinQubit::new(Complex64::new(1.0, 0.0), Complex64::new(0.1, 0.0), TAU_BIN);
        assert!(r.is_err());
    }

    #[test]
    fn full_balance_reduces_to_single_comb() {
        let mut s = setting(1.0);
        s.amplitude_balance = 1.0;
        let (c1, _) = double_afc_combs(&s, &base()).unwrap();
        let q = TimeBinQubit::early_state(TAU_BIN).unwrap();
        let single = store(&q, &c1, &optics()).unwrap();
        let double = project(&q, &s, &base(), &optics()).unwrap();
        assert!((single.early.probability - double.early.probability).abs() < 1e-12);
        assert!((single.late.probability - double.interference.probability).abs() < 1e-12);
        assert!(double.interference.probability < 1e-4 * double.early.probability);
    }

    #[test]
    fn fringe_is_ideal_and_phase_matches_encoding() {
        for phase in [0.0, 0.7, -2.0] {
            let c = fringe(phase);
            let a = c.iter().sum::<f64>() / 4.0;
            let (b, s) = (0.5 * (c[0] - c[2]), 0.5 * (c[1] - c[3]));
            let v = (b * b + s * s).sqrt() / a;
            let theta0 = s.atan2(b);
            let dphi = (theta0 - phase + PI).rem_euclid(TAU) - PI;
            assert!(v >= 0.99, "visibility {v} at phase {phase}");
            assert!(dphi.abs() < 0.02, "fitted phase {theta0} vs {phase}");
        }
    }

    #[test]
    fn destructive_setting_is_dark() {
        let c = fringe(0.0);
        assert!(c[2] < 0.01 * c[0], "{c:?}");
    }

    #[test]
    fn early_state_shows_no_fringe() {
        let q = TimeBinQubit::early_state(TAU_BIN).unwrap();
        let p: Vec<f64> = quarter_phases()
            .iter()
            .map(|&th| {
                project(&q, &setting(th), &base(), &optics())
                    .unwrap()
                    .interference
                    .probability
            })
            .collect();
        let max = p.iter().cloned().fold(f64::MIN, f64::max);
        let min = p.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max - min < 0.01 * max, "{p:?}");
    }

    #[test]
    fn windows_stay_below_single_recall_bound() {
        let q = TimeBinQubit::superposition(0.0, TAU_BIN).unwrap();
        let p = project(&q, &setting(0.0), &base(), &optics()).unwrap();
        let total: f64 = p.windows().iter().map(|w| w.probability).sum();
        let bound = optics().single_echo(&base()).unwrap().echo_efficiency;
        assert!(total <= bound, "{total} > {bound}");
    }

    #[test]
    fn mismatched_recall_times_are_rejected() {
        let q = TimeBinQubit::superposition(0.0, 2e-9).unwrap();
        assert!(project(&q, &setting(0.0), &base(), &optics()).is_err());
    }

    #[test]
    fn window_wider_than_bins_is_rejected() {
        let q = TimeBinQubit::superposition(0.0, TAU_BIN).unwrap();
        let mut o = optics();
        o.echo_window_s = 1.5e-9;
        assert!(matches!(
            project(&q, &setting(0.0), &base(), &o),
            Err(Error::WindowOverlap(_))
        ));
    }
}
