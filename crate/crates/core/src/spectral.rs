//! Comb absorption profiles and their causal transfer functions.
//!
//! All per-frequency arrays are stored in FFT order: sample `k` sits at
//! `k * resolution` for `k < n/2` and at `(k - n) * resolution` otherwise.
//! Frequencies are offsets from the photon carrier.

use std::f64::consts::{LN_2, PI, SQRT_2};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fft::FftPair;
use crate::{Error, Result};

/// Fraction of the comb bandwidth, on each edge, over which the teeth are
/// rolled off with a raised cosine.
pub const APODIZATION_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToothShape {
    Gaussian,
    Lorentzian,
    Square,
}

impl ToothShape {
    /// Fourier transform of the unit-height tooth of FWHM `width`, evaluated
    /// at time `t`. `G(0)` is the tooth area.
    pub fn transform(self, width: f64, t: f64) -> f64 {
        match self {
            ToothShape::Gaussian => {
                width * (PI / (4.0 * LN_2)).sqrt() * (-(PI * width * t).powi(2) / (4.0 * LN_2)).exp()
            }
            ToothShape::Lorentzian => 0.5 * PI * width * (-PI * width * t.abs()).exp(),
            ToothShape::Square => {
                let x = PI * width * t;
                if x.abs() < 1e-12 {
                    width
                } else {
                    width * x.sin() / x
                }
            }
        }
    }

    /// Unit-height tooth sampled at offset `x` from its center. Square edges
    /// are blurred by a gaussian of rms width `cell` (one sample), which
    /// keeps the sampled comb band-limited and its area exact.
    fn sample(self, x: f64, width: f64, cell: f64) -> f64 {
        match self {
            ToothShape::Gaussian => (-4.0 * LN_2 * (x / width).powi(2)).exp(),
            ToothShape::Lorentzian => 1.0 / (1.0 + (2.0 * x / width).powi(2)),
            ToothShape::Square => {
                let s = SQRT_2 * cell;
                0.5 * (libm::erf((x + 0.5 * width) / s) - libm::erf((x - 0.5 * width) / s))
            }
        }
    }
}

/// Spectral description of one atomic frequency comb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombSpec {
    /// Comb center relative to the photon carrier (Hz).
    pub center_offset_hz: f64,
    /// Full width of the prepared band (Hz).
    pub bandwidth_hz: f64,
    /// Tooth spacing Δν (Hz).
    pub tooth_spacing_hz: f64,
    /// Tooth FWHM γ (Hz).
    pub tooth_width_hz: f64,
    pub shape: ToothShape,
    /// Peak optical depth of a tooth above the background.
    pub peak_depth: f64,
    /// Background optical depth d0 inside the band.
    pub background_depth: f64,
    /// Relative weight when superposed with a second comb.
    pub amplitude_weight: f64,
}

impl CombSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("center_offset_hz", self.center_offset_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("tooth_spacing_hz", self.tooth_spacing_hz),
            ("tooth_width_hz", self.tooth_width_hz),
            ("peak_depth", self.peak_depth),
            ("background_depth", self.background_depth),
            ("amplitude_weight", self.amplitude_weight),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(Error::invalid(field, format!("must be finite, got {v}")));
            }
        }
        if self.tooth_spacing_hz <= 0.0 {
            return Err(Error::invalid("tooth_spacing_hz", "must be positive"));
        }
        if self.tooth_width_hz <= 0.0 {
            return Err(Error::invalid("tooth_width_hz", "must be positive"));
        }
        if self.tooth_width_hz >= self.tooth_spacing_hz {
            return Err(Error::Finesse {
                width_hz: self.tooth_width_hz,
                spacing_hz: self.tooth_spacing_hz,
            });
        }
        if self.bandwidth_hz < 2.0 * self.tooth_spacing_hz {
            return Err(Error::invalid(
                "bandwidth_hz",
                format!("must hold at least two teeth (>= {} Hz)", 2.0 * self.tooth_spacing_hz),
            ));
        }
        if self.peak_depth < 0.0 {
            return Err(Error::invalid("peak_depth", "must be non-negative"));
        }
        if self.background_depth < 0.0 {
            return Err(Error::invalid("background_depth", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.amplitude_weight) {
            return Err(Error::invalid("amplitude_weight", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn finesse(&self) -> f64 {
        self.tooth_spacing_hz / self.tooth_width_hz
    }

    /// Rephasing time 1/Δν.
    pub fn recall_time(&self) -> f64 {
        1.0 / self.tooth_spacing_hz
    }

    /// Largest tooth index `n` with `|n Δν| <= bandwidth / 2`.
    fn max_tooth_index(&self) -> i64 {
        (0.5 * self.bandwidth_hz / self.tooth_spacing_hz + 1e-9).floor() as i64
    }

    /// Number of teeth whose centers lie inside the band.
    pub fn tooth_count(&self) -> usize {
        (2 * self.max_tooth_index() + 1) as usize
    }

    /// Spectrally averaged optical depth of the comb teeth (excluding d0).
    pub fn mean_depth(&self) -> f64 {
        self.peak_depth * self.shape.transform(self.tooth_width_hz, 0.0) / self.tooth_spacing_hz
    }

    /// Amplitude of the first rephasing harmonic per unit peak depth, in the
    /// infinite-comb limit: `G(1/Δν) / Δν`.
    pub fn rephasing_strength(&self) -> f64 {
        self.shape.transform(self.tooth_width_hz, self.recall_time()) / self.tooth_spacing_hz
    }

    fn apodization(&self, x: f64) -> f64 {
        let half = 0.5 * self.bandwidth_hz;
        let edge = APODIZATION_FRACTION * self.bandwidth_hz;
        let x = x.abs();
        if x <= half - edge {
            1.0
        } else if x < half {
            0.5 * (1.0 + (PI * (x - (half - edge)) / edge).cos())
        } else {
            0.0
        }
    }

    fn depth_at(&self, f: f64, cell: f64) -> f64 {
        let x = f - self.center_offset_hz;
        let apod = self.apodization(x);
        if apod == 0.0 {
            return 0.0;
        }
        let n_max = self.max_tooth_index();
        let n = ((x / self.tooth_spacing_hz).round() as i64).clamp(-n_max, n_max);
        let dx = x - n as f64 * self.tooth_spacing_hz;
        let tooth = self.shape.sample(dx, self.tooth_width_hz, cell);
        apod * (self.peak_depth * tooth + self.background_depth)
    }
}

/// Discrete frequency grid shared by profiles, transfer functions and the
/// paired time grid of wavepackets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub span_hz: f64,
    pub n_points: usize,
}

impl SpectralGrid {
    pub fn new(span_hz: f64, n_points: usize) -> Result<Self> {
        let grid = Self { span_hz, n_points };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.span_hz.is_finite() && self.span_hz > 0.0) {
            return Err(Error::invalid("span_hz", "must be positive and finite"));
        }
        if self.n_points < 2 || !self.n_points.is_power_of_two() {
            return Err(Error::invalid(
                "n_points",
                format!("must be a power of two >= 2, got {}", self.n_points),
            ));
        }
        Ok(())
    }

    pub fn resolution(&self) -> f64 {
        self.span_hz / self.n_points as f64
    }

    /// Sample spacing of the paired time grid.
    pub fn time_step(&self) -> f64 {
        1.0 / self.span_hz
    }

    /// Frequency of sample `k` in FFT order.
    pub fn frequency(&self, k: usize) -> f64 {
        let n = self.n_points;
        let signed = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
        signed * self.resolution()
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|k| self.frequency(k))
    }

    /// Index of the sample closest to `f` (wrapping).
    pub fn nearest_index(&self, f: f64) -> usize {
        let n = self.n_points as i64;
        let k = (f / self.resolution()).round() as i64;
        k.rem_euclid(n) as usize
    }

    /// Checks that this grid resolves and contains `spec`.
    pub fn check_supports(&self, spec: &CombSpec) -> Result<()> {
        let limit = spec.tooth_width_hz / 8.0;
        if self.resolution() > limit {
            return Err(Error::GridTooCoarse {
                resolution_hz: self.resolution(),
                limit_hz: limit,
            });
        }
        if self.span_hz < 4.0 * spec.bandwidth_hz {
            return Err(Error::invalid(
                "span_hz",
                format!(
                    "span {} Hz is below the 4x guard band for bandwidth {} Hz",
                    self.span_hz, spec.bandwidth_hz
                ),
            ));
        }
        if spec.center_offset_hz.abs() + 0.5 * spec.bandwidth_hz > 0.5 * self.span_hz {
            return Err(Error::invalid(
                "center_offset_hz",
                "comb band extends past the grid edge",
            ));
        }
        Ok(())
    }
}

/// Optical depth per frequency sample.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionProfile {
    grid: SpectralGrid,
    values: Vec<f64>,
}

impl AbsorptionProfile {
    /// Wraps raw optical depths given in FFT order.
    pub fn from_values(grid: SpectralGrid, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.n_points {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}-point grid",
                values.len(),
                grid.n_points
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(
                "absorption",
                format!("optical depth must be finite and non-negative, got {v}"),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Depth at the sample nearest to `f`.
    pub fn at(&self, f: f64) -> f64 {
        self.values[self.grid.nearest_index(f)]
    }

    /// Integral over frequency, `sum(alpha) * resolution`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.resolution()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Pointwise sum of two profiles on the same grid.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }
}

/// Samples the comb on the grid. The tooth nearest to each frequency sets
/// its depth, so the value at an exact tooth center is `d + d0` (before the
/// edge roll-off). `amplitude_weight` is not applied here.
pub fn build_absorption(spec: &CombSpec, grid: &SpectralGrid) -> Result<AbsorptionProfile> {
    spec.validate()?;
    grid.validate()?;
    grid.check_supports(spec)?;
    let cell = grid.resolution();
    let values = grid.frequencies().map(|f| spec.depth_at(f, cell)).collect();
    Ok(AbsorptionProfile { grid: *grid, values })
}

/// Weighted sum of two combs (double AFC).
pub fn superpose(a: &CombSpec, b: &CombSpec, grid: &SpectralGrid) -> Result<AbsorptionProfile> {
    let total = a.amplitude_weight + b.amplitude_weight;
    if total > 1.0 + 1e-12 {
        return Err(Error::invalid(
            "amplitude_weight",
            format!("weights of superposed combs sum to {total} > 1"),
        ));
    }
    let pa = build_absorption(a, grid)?.scaled(a.amplitude_weight);
    let pb = build_absorption(b, grid)?.scaled(b.amplitude_weight);
    pa.sum(&pb)
}

/// Complex frequency response of the prepared medium, FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    grid: SpectralGrid,
    values: Vec<Complex64>,
}

impl TransferFunction {
    pub fn identity(grid: SpectralGrid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(1.0, 0.0); grid.n_points],
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.values.iter().map(|h| h.norm()).collect()
    }

    /// Φ in `H = exp(-α/2 - iΦ)`.
    pub fn phase(&self) -> Vec<f64> {
        self.values.iter().map(|h| -h.arg()).collect()
    }
}

/// Minimum-phase transfer function `H = exp(-α/2 - iΦ)`.
///
/// Φ is obtained from α/2 by folding its cepstrum onto non-negative
/// quefrencies, which makes the impulse response causal.
pub fn to_transfer_function(profile: &AbsorptionProfile) -> TransferFunction {
    let grid = profile.grid;
    let n = grid.n_points;
    let fft = FftPair::new(n);

    let mut cep: Vec<Complex64> = profile.values.iter().map(|&a| Complex64::new(-0.5 * a, 0.0)).collect();
    fft.inverse(&mut cep);
    for c in &mut cep[1..n / 2] {
        *c *= 2.0;
    }
    for c in &mut cep[n / 2 + 1..] {
        *c = Complex64::new(0.0, 0.0);
    }
    fft.forward(&mut cep);

    let values = profile
        .values
        .iter()
        .zip(&cep)
        .map(|(&a, log_h)| Complex64::from_polar((-0.5 * a).exp(), log_h.im))
        .collect();
    TransferFunction { grid, values }
}
