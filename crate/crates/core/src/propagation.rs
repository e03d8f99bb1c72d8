//! Linear propagation of photon wavepackets through a prepared comb, echo
//! extraction, the efficiency search, and the discrete-ensemble rephasing
//! oracle.

use std::f64::consts::{LN_2, PI};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fft::FftPair;
use crate::optimize::golden_section_max;
use crate::spectral::{build_absorption, to_transfer_function, CombSpec, SpectralGrid, ToothShape, TransferFunction};
use crate::{Error, Result};

/// Time axis paired with a [`SpectralGrid`]: `dt = 1/span`, same length.
///
/// Sample `i` sits at `start + i * dt`; the first quarter of the window lies
/// before t = 0 so that a pulse centred at the origin is not split by the
/// circular wrap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n: usize,
    pub start: f64,
}

impl TimeGrid {
    pub fn dual_of(grid: &SpectralGrid) -> Self {
        let dt = grid.time_step();
        Self {
            dt,
            n: grid.n_points,
            start: -((grid.n_points / 4) as f64) * dt,
        }
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.n - 1)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end()
    }

    fn is_dual_of(&self, grid: &SpectralGrid) -> bool {
        self.n == grid.n_points && (self.dt * grid.span_hz - 1.0).abs() < 1e-9
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wavepacket {
    grid: TimeGrid,
    amplitude: Vec<Complex64>,
    carrier_offset_hz: f64,
}

impl Wavepacket {
    pub fn new(grid: TimeGrid, amplitude: Vec<Complex64>, carrier_offset_hz: f64) -> Result<Self> {
        if amplitude.len() != grid.n {
            return Err(Error::GridMismatch(format!(
                "{} samples for a {}-point time grid",
                amplitude.len(),
                grid.n
            )));
        }
        if amplitude.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::invalid("amplitude", "must be finite"));
        }
        Ok(Self {
            grid,
            amplitude,
            carrier_offset_hz,
        })
    }

    /// Transform-limited gaussian whose intensity spectrum has FWHM
    /// `bandwidth_fwhm_hz`, centred at `center_time`, with unit energy.
    pub fn gaussian(
        spectral: &SpectralGrid,
        bandwidth_fwhm_hz: f64,
        center_time: f64,
        carrier_offset_hz: f64,
    ) -> Result<Self> {
        spectral.validate()?;
        if !(bandwidth_fwhm_hz.is_finite() && bandwidth_fwhm_hz > 0.0) {
            return Err(Error::invalid("bandwidth_fwhm_hz", "must be positive"));
        }
        let grid = TimeGrid::dual_of(spectral);
        let sigma = LN_2.sqrt() / (PI * bandwidth_fwhm_hz);
        let amplitude: Vec<Complex64> = (0..grid.n)
            .map(|i| {
                let t = grid.time(i);
                let env = (-(t - center_time).powi(2) / (2.0 * sigma * sigma)).exp();
                Complex64::from_polar(env, 2.0 * PI * carrier_offset_hz * t)
            })
            .collect();
        let mut packet = Self::new(grid, amplitude, carrier_offset_hz)?;
        let e = packet.energy();
        if e <= 0.0 {
            return Err(Error::invalid("center_time", "pulse lies outside the time grid"));
        }
        let norm = e.sqrt().recip();
        packet.amplitude.iter_mut().for_each(|a| *a *= norm);
        Ok(packet)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn amplitude(&self) -> &[Complex64] {
        &self.amplitude
    }

    pub fn carrier_offset_hz(&self) -> f64 {
        self.carrier_offset_hz
    }

    /// `sum |a|^2 dt`.
    pub fn energy(&self) -> f64 {
        self.amplitude.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dt
    }

    fn index_range(&self, start: f64, end: f64) -> std::ops::Range<usize> {
        let g = &self.grid;
        let lo = ((start - g.start) / g.dt).ceil().max(0.0) as usize;
        let hi = (((end - g.start) / g.dt).floor() + 1.0).clamp(0.0, g.n as f64) as usize;
        lo.min(hi)..hi
    }

    /// Energy carried by samples with `start <= t <= end`.
    pub fn energy_between(&self, start: f64, end: f64) -> f64 {
        self.amplitude[self.index_range(start, end)]
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            * self.grid.dt
    }

    /// Energy-weighted mean time over `[start, end]`, `None` if that span is dark.
    pub fn centroid_between(&self, start: f64, end: f64) -> Option<f64> {
        let range = self.index_range(start, end);
        let (mut w, mut wt) = (0.0, 0.0);
        for i in range {
            let p = self.amplitude[i].norm_sqr();
            w += p;
            wt += p * self.grid.time(i);
        }
        (w > 0.0).then(|| wt / w)
    }

    /// Width of the span holding the central 99% of the energy.
    pub fn duration(&self) -> f64 {
        let total: f64 = self.amplitude.iter().map(|a| a.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        let (mut first, mut last) = (None, 0);
        for (i, a) in self.amplitude.iter().enumerate() {
            acc += a.norm_sqr();
            if first.is_none() && acc >= 0.005 * total {
                first = Some(i);
            }
            if acc <= 0.995 * total {
                last = i + 1;
            }
        }
        (last.saturating_sub(first.unwrap_or(0))) as f64 * self.grid.dt
    }

    /// `sum conj(self) * other dt`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same_grid(other)?;
        Ok(self
            .amplitude
            .iter()
            .zip(&other.amplitude)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.dt)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            amplitude: self
                .amplitude
                .iter()
                .zip(&other.amplitude)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            carrier_offset_hz: self.carrier_offset_hz,
        })
    }

    /// The same envelope delayed by `delay` seconds (sub-sample exact,
    /// applied as a spectral phase ramp).
    pub fn delayed(&self, delay: f64) -> Self {
        let n = self.grid.n;
        let fft = FftPair::new(n);
        let span = 1.0 / self.grid.dt;
        let df = span / n as f64;
        let mut buf = self.amplitude.clone();
        fft.forward(&mut buf);
        for (k, x) in buf.iter_mut().enumerate() {
            let f = if k < n / 2 { k as f64 } else { k as f64 - n as f64 } * df;
            *x *= Complex64::from_polar(1.0, -2.0 * PI * f * delay);
        }
        fft.inverse(&mut buf);
        Self {
            grid: self.grid,
            amplitude: buf,
            carrier_offset_hz: self.carrier_offset_hz,
        }
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }
}

/// Filters `input` through `h`: output spectrum = input spectrum × H.
pub fn propagate(input: &Wavepacket, h: &TransferFunction) -> Result<Wavepacket> {
    if !input.grid.is_dual_of(h.grid()) {
        return Err(Error::GridMismatch(format!(
            "time grid {:?} is not the dual of {:?}",
            input.grid,
            h.grid()
        )));
    }
    let fft = FftPair::new(input.grid.n);
    let mut buf = input.amplitude.clone();
    fft.forward(&mut buf);
    for (x, hv) in buf.iter_mut().zip(h.values()) {
        *x *= hv;
    }
    fft.inverse(&mut buf);
    Ok(Wavepacket {
        grid: input.grid,
        amplitude: buf,
        carrier_offset_hz: input.carrier_offset_hz,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchoResult {
    pub output: Wavepacket,
    pub echo_time: f64,
    pub echo_efficiency: f64,
    /// Energy left around t = 0 in a window of the same width.
    pub transmitted_fraction: f64,
}

impl Serialize for EchoResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("EchoResult", 3)?;
        st.serialize_field("echo_time_s", &self.echo_time)?;
        st.serialize_field("echo_efficiency", &self.echo_efficiency)?;
        st.serialize_field("transmitted_fraction", &self.transmitted_fraction)?;
        st.end()
    }
}

/// Measures the echo in `[expected_time ± window/2]` relative to
/// `input_energy`.
pub fn extract_echo(output: Wavepacket, input_energy: f64, expected_time: f64, window: f64) -> Result<EchoResult> {
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::invalid("window", "must be positive"));
    }
    if !(input_energy.is_finite() && input_energy > 0.0) {
        return Err(Error::invalid("input_energy", "must be positive"));
    }
    if !output.grid.contains(expected_time) {
        return Err(Error::invalid("expected_time", "outside the time grid"));
    }
    let (start, end) = (expected_time - 0.5 * window, expected_time + 0.5 * window);
    if start <= 0.0 && end >= 0.0 {
        return Err(Error::WindowContainsTransmitted {
            start_s: start,
            end_s: end,
        });
    }
    let echo_efficiency = output.energy_between(start, end) / input_energy;
    let echo_time = output.centroid_between(start, end).unwrap_or(expected_time);
    let transmitted_fraction = output.energy_between(-0.5 * window, 0.5 * window) / input_energy;
    Ok(EchoResult {
        output,
        echo_time,
        echo_efficiency,
        transmitted_fraction,
    })
}

/// Grid, probe pulse and detection window shared by the echo computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optics {
    pub grid: SpectralGrid,
    /// Intensity-spectrum FWHM of the transform-limited gaussian probe.
    pub pulse_bandwidth_hz: f64,
    pub echo_window_s: f64,
}

impl Optics {
    pub fn input_pulse(&self) -> Result<Wavepacket> {
        Wavepacket::gaussian(&self.grid, self.pulse_bandwidth_hz, 0.0, 0.0)
    }

    /// Stores the probe pulse in a single comb and measures the first echo.
    pub fn single_echo(&self, spec: &CombSpec) -> Result<EchoResult> {
        let h = to_transfer_function(&build_absorption(spec, &self.grid)?);
        let input = self.input_pulse()?;
        let out = propagate(&input, &h)?;
        extract_echo(out, input.energy(), spec.recall_time(), self.echo_window_s)
    }
}

/// Finds the peak depth at which `spec` stores with `target` echo
/// efficiency, searching below the efficiency maximum.
pub fn calibrate_depth(spec: &CombSpec, optics: &Optics, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid("target", "must lie in (0, 1)"));
    }
    let eff = |d: f64| -> Result<f64> {
        let s = CombSpec { peak_depth: d, ..*spec };
        Ok(optics.single_echo(&s)?.echo_efficiency)
    };
    let (mut lo, mut hi) = (0.0, 0.25);
    let mut prev = 0.0;
    loop {
        let e = eff(hi)?;
        if e >= target {
            break;
        }
        if e < prev || hi > 1e3 {
            return Err(Error::invalid(
                "target",
                format!("efficiency {target} is not reachable with this comb"),
            ));
        }
        prev = e;
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if eff(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-7 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bounds and numerics for [`optimize_efficiency`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencySearch {
    pub shape: ToothShape,
    pub tooth_spacing_hz: f64,
    pub background_depth: f64,
    pub finesse_range: (f64, f64),
    /// Upper bound on `d / F`; zero pins the comb to d = 0.
    pub max_depth_per_finesse: f64,
    pub pulse_bandwidth_hz: f64,
    pub comb_bandwidth_hz: f64,
    pub echo_window_s: f64,
    pub finesse_tol: f64,
    pub depth_tol: f64,
    pub max_iterations: usize,
}

impl EfficiencySearch {
    pub fn new(shape: ToothShape, tooth_spacing_hz: f64) -> Self {
        Self {
            shape,
            tooth_spacing_hz,
            background_depth: 0.0,
            finesse_range: (1.5, 40.0),
            max_depth_per_finesse: 6.0,
            pulse_bandwidth_hz: 2e9,
            comb_bandwidth_hz: 8e9,
            echo_window_s: 1e-9,
            finesse_tol: 0.05,
            depth_tol: 1e-3,
            max_iterations: 100,
        }
    }

    fn comb(&self, finesse: f64, peak_depth: f64) -> CombSpec {
        CombSpec {
            center_offset_hz: 0.0,
            bandwidth_hz: self.comb_bandwidth_hz,
            tooth_spacing_hz: self.tooth_spacing_hz,
            tooth_width_hz: self.tooth_spacing_hz / finesse,
            shape: self.shape,
            peak_depth,
            background_depth: self.background_depth,
            amplitude_weight: 1.0,
        }
    }

    /// Power-of-two grid that resolves teeth at `finesse`, with a resolution
    /// dividing the tooth spacing so every tooth is sampled identically.
    fn optics(&self, finesse: f64) -> Result<Optics> {
        let width = self.tooth_spacing_hz / finesse;
        let per_tooth = (8.0 * self.tooth_spacing_hz / width).ceil();
        let resolution = self.tooth_spacing_hz / per_tooth;
        let n = ((4.0 * self.comb_bandwidth_hz / resolution).ceil() as usize).next_power_of_two();
        Ok(Optics {
            grid: SpectralGrid::new(n as f64 * resolution, n)?,
            pulse_bandwidth_hz: self.pulse_bandwidth_hz,
            echo_window_s: self.echo_window_s,
        })
    }

    pub fn efficiency(&self, finesse: f64, peak_depth: f64) -> Result<f64> {
        let optics = self.optics(finesse)?;
        Ok(optics.single_echo(&self.comb(finesse, peak_depth))?.echo_efficiency)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfficiencyOptimum {
    pub finesse: f64,
    pub peak_depth: f64,
    pub efficiency: f64,
    pub evaluations: usize,
}

/// Maximizes first-echo efficiency over finesse and peak depth with nested
/// golden-section searches (depth inner, finesse outer).
pub fn optimize_efficiency(search: &EfficiencySearch) -> Result<EfficiencyOptimum> {
    let (f_lo, f_hi) = search.finesse_range;
    if !(f_lo > 1.0 && f_hi >= f_lo) {
        return Err(Error::invalid("finesse_range", "need 1 < lo <= hi"));
    }
    if search.max_depth_per_finesse < 0.0 {
        return Err(Error::invalid("max_depth_per_finesse", "must be non-negative"));
    }
    let mut evaluations = 0;
    let mut best_depth_for = |finesse: f64| -> Result<(f64, f64)> {
        let inner = golden_section_max(
            |ratio| search.efficiency(finesse, ratio * finesse),
            0.0,
            search.max_depth_per_finesse,
            search.depth_tol,
            search.max_iterations,
        )?;
        evaluations += inner.evaluations;
        Ok((inner.x * finesse, inner.value))
    };
    let outer = golden_section_max(
        |finesse| Ok(best_depth_for(finesse)?.1),
        f_lo,
        f_hi,
        search.finesse_tol,
        search.max_iterations,
    )?;
    let (peak_depth, efficiency) = best_depth_for(outer.x)?;
    Ok(EfficiencyOptimum {
        finesse: outer.x,
        peak_depth,
        efficiency,
        evaluations,
    })
}

/// Discrete set of absorbers at detunings `m_j Δν` with complex weights
/// `c_j`; only the phase evolution of the collective excitation is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteEnsemble {
    detuning_steps: Vec<f64>,
    weights: Vec<Complex64>,
    spacing_hz: f64,
}

impl DiscreteEnsemble {
    pub fn new(detuning_steps: Vec<f64>, weights: Vec<Complex64>, spacing_hz: f64) -> Result<Self> {
        if detuning_steps.len() < 2 {
            return Err(Error::invalid("detuning_steps", "need at least two absorbers"));
        }
        if detuning_steps.len() != weights.len() {
            return Err(Error::invalid("weights", "one weight per absorber"));
        }
        if weights.iter().all(|c| c.norm() == 0.0) {
            return Err(Error::invalid("weights", "not all weights may vanish"));
        }
        if !(spacing_hz.is_finite() && spacing_hz > 0.0) {
            return Err(Error::invalid("spacing_hz", "must be positive"));
        }
        Ok(Self {
            detuning_steps,
            weights,
            spacing_hz,
        })
    }

    /// Equal real weights on the integer detunings `lo..=hi`.
    pub fn uniform(lo: i64, hi: i64, spacing_hz: f64) -> Result<Self> {
        let steps: Vec<f64> = (lo..=hi).map(|m| m as f64).collect();
        let weights = vec![Complex64::new(1.0, 0.0); steps.len()];
        Self::new(steps, weights, spacing_hz)
    }

    /// One absorber per tooth of `spec`, weighted by the tooth's peak depth
    /// after the band-edge roll-off.
    pub fn from_comb(spec: &CombSpec) -> Result<Self> {
        spec.validate()?;
        let n = (spec.tooth_count() / 2) as i64;
        let half = 0.5 * spec.bandwidth_hz;
        let edge = crate::spectral::APODIZATION_FRACTION * spec.bandwidth_hz;
        let mut steps = Vec::new();
        let mut weights = Vec::new();
        for m in -n..=n {
            let x = (m as f64 * spec.tooth_spacing_hz).abs();
            let w = if x <= half - edge {
                1.0
            } else {
                0.5 * (1.0 + (PI * (x - (half - edge)) / edge).cos())
            };
            steps.push(m as f64);
            weights.push(Complex64::new(w * spec.peak_depth, 0.0));
        }
        Self::new(steps, weights, spec.tooth_spacing_hz)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `|sum_j c_j exp(i 2π m_j Δν t)|^2 / (sum_j |c_j|)^2`.
pub fn rephasing_amplitude(ensemble: &DiscreteEnsemble, t: f64) -> f64 {
    let norm: f64 = ensemble.weights.iter().map(|c| c.norm()).sum();
    let sum: Complex64 = ensemble
        .detuning_steps
        .iter()
        .zip(&ensemble.weights)
        .map(|(m, c)| c * Complex64::from_polar(1.0, 2.0 * PI * m * ensemble.spacing_hz * t))
        .sum();
    (sum.norm_sqr() / (norm * norm)).min(1.0)
}
