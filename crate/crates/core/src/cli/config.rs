//! Experiment configuration file. Every dimensional key carries its unit.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::montecarlo::{
    ChannelModel, CountWindow, DetectorModel, ExperimentModel, PairStatistics, SourceModel, TimingSequence,
};
use crate::propagation::Optics;
use crate::qubit::ProjectionSetting;
use crate::spectral::{CombSpec, SpectralGrid, ToothShape};

/// Peak depth at which the default comb stores the default photon with 2%
/// efficiency in the 1 ns echo window.
pub const DEFAULT_PEAK_DEPTH: f64 = 0.9369;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Simulated wall-clock time per stored state (s).
    pub duration_s: f64,
    pub comb: CombConfig,
    pub grid: GridConfig,
    pub photon: PhotonConfig,
    pub qubits: QubitConfig,
    pub double_afc: DoubleAfcConfig,
    pub windows: WindowConfig,
    pub source: SourceConfig,
    pub signal_detector: SignalDetectorConfig,
    pub herald_detector: HeraldDetectorConfig,
    pub signal_channel: SignalChannelConfig,
    pub herald_channel: HeraldChannelConfig,
    pub timing: TimingConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: PathBuf::from("afc-run"),
            duration_s: 0.18,
            comb: CombConfig::default(),
            grid: GridConfig::default(),
            photon: PhotonConfig::default(),
            qubits: QubitConfig::default(),
            double_afc: DoubleAfcConfig::default(),
            windows: WindowConfig::default(),
            source: SourceConfig::default(),
            signal_detector: SignalDetectorConfig::default(),
            herald_detector: HeraldDetectorConfig::default(),
            signal_channel: SignalChannelConfig::default(),
            herald_channel: HeraldChannelConfig::default(),
            timing: TimingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CombConfig {
    pub shape: ToothShape,
    pub tooth_spacing_mhz: f64,
    pub tooth_width_mhz: f64,
    pub bandwidth_ghz: f64,
    pub center_offset_mhz: f64,
    pub peak_optical_depth: f64,
    pub background_optical_depth: f64,
}

impl Default for CombConfig {
    fn default() -> Self {
        Self {
            shape: ToothShape::Gaussian,
            tooth_spacing_mhz: 167.0,
            tooth_width_mhz: 83.0,
            bandwidth_ghz: 5.0,
            center_offset_mhz: 0.0,
            peak_optical_depth: DEFAULT_PEAK_DEPTH,
            background_optical_depth: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub span_ghz: f64,
    pub n_points_log2: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            span_ghz: 40.0,
            n_points_log2: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotonConfig {
    /// Intensity-spectrum FWHM of the signal photon.
    pub bandwidth_fwhm_ghz: f64,
}

impl Default for PhotonConfig {
    fn default() -> Self {
        Self {
            bandwidth_fwhm_ghz: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QubitConfig {
    pub bin_separation_ns: f64,
    /// Phase φ of the superposition stored for the fringe runs.
    pub superposition_phase_deg: f64,
    /// Analyzer phases θ of the fringe runs.
    pub analyzer_phases_deg: Vec<f64>,
}

impl Default for QubitConfig {
    fn default() -> Self {
        Self {
            bin_separation_ns: 1.4,
            superposition_phase_deg: 0.0,
            analyzer_phases_deg: vec![0.0, 90.0, 180.0, 270.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoubleAfcConfig {
    pub recall_time_1_ns: f64,
    pub recall_time_2_ns: f64,
    pub amplitude_balance: f64,
}

impl Default for DoubleAfcConfig {
    fn default() -> Self {
        Self {
            recall_time_1_ns: 6.0,
            recall_time_2_ns: 7.4,
            amplitude_balance: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// Width of every counting window.
    pub width_ns: f64,
    /// Centers of the background windows on the pump-period axis.
    pub background_centers_ns: Vec<f64>,
    pub histogram_bin_ps: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            width_ns: 1.0,
            background_centers_ns: vec![0.5, 1.5, 2.5, 3.5, 4.5, 10.5, 11.5],
            histogram_bin_ps: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub rep_rate_mhz: f64,
    pub mean_photon_number: f64,
    pub pair_correlation: f64,
    pub statistics: PairStatistics,
}

impl Default for SourceConfig {
    fn default() -> Self {
        let s = SourceModel::default();
        Self {
            rep_rate_mhz: s.rep_rate_hz * 1e-6,
            mean_photon_number: s.mean_photon_number,
            pair_correlation: s.pair_correlation,
            statistics: s.statistics,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalDetectorConfig {
    pub efficiency: f64,
    pub dark_count_rate_hz: f64,
    pub dead_time_ns: f64,
    pub jitter_fwhm_ps: f64,
}

impl Default for SignalDetectorConfig {
    fn default() -> Self {
        let d = DetectorModel::signal_default();
        Self {
            efficiency: d.efficiency,
            dark_count_rate_hz: d.dark_count_rate_hz,
            dead_time_ns: d.dead_time_s * 1e9,
            jitter_fwhm_ps: d.jitter_fwhm_s * 1e12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeraldDetectorConfig {
    pub efficiency: f64,
    pub dark_probability_per_gate: f64,
    pub dead_time_us: f64,
    pub jitter_fwhm_ps: f64,
    pub gate_width_ns: f64,
}

impl Default for HeraldDetectorConfig {
    fn default() -> Self {
        Self {
            efficiency: 0.25,
            dark_probability_per_gate: 0.025,
            dead_time_us: 10.0,
            jitter_fwhm_ps: 350.0,
            gate_width_ns: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalChannelConfig {
    pub loss_db: f64,
    pub delay_ns: f64,
}

impl Default for SignalChannelConfig {
    fn default() -> Self {
        Self {
            loss_db: 10.0,
            delay_ns: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeraldChannelConfig {
    pub loss_db: f64,
    pub delay_ns: f64,
}

impl Default for HeraldChannelConfig {
    fn default() -> Self {
        Self {
            loss_db: 1.0,
            delay_ns: 147.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub prep_ms: f64,
    pub wait_ms: f64,
    pub storage_ms: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            prep_ms: 10.0,
            wait_ms: 2.2,
            storage_ms: 40.0,
        }
    }
}

/// Problem found by [`ExperimentConfig::validate`], tied to a key path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn comb_spec(&self) -> CombSpec {
        let c = &self.comb;
        CombSpec {
            center_offset_hz: c.center_offset_mhz * 1e6,
            bandwidth_hz: c.bandwidth_ghz * 1e9,
            tooth_spacing_hz: c.tooth_spacing_mhz * 1e6,
            tooth_width_hz: c.tooth_width_mhz * 1e6,
            shape: c.shape,
            peak_depth: c.peak_optical_depth,
            background_depth: c.background_optical_depth,
            amplitude_weight: 1.0,
        }
    }

    pub fn spectral_grid(&self) -> crate::Result<SpectralGrid> {
        if self.grid.n_points_log2 > 26 {
            return Err(crate::Error::invalid("grid.n_points_log2", "at most 26"));
        }
        SpectralGrid::new(self.grid.span_ghz * 1e9, 1usize << self.grid.n_points_log2)
    }

    pub fn optics(&self) -> crate::Result<Optics> {
        Ok(Optics {
            grid: self.spectral_grid()?,
            pulse_bandwidth_hz: self.photon.bandwidth_fwhm_ghz * 1e9,
            echo_window_s: self.windows.width_ns * 1e-9,
        })
    }

    pub fn bin_separation_s(&self) -> f64 {
        self.qubits.bin_separation_ns * 1e-9
    }

    pub fn analyzer_phases_rad(&self) -> Vec<f64> {
        self.qubits.analyzer_phases_deg.iter().map(|d| d.to_radians()).collect()
    }

    pub fn projection_setting(&self, analyzer_phase: f64) -> ProjectionSetting {
        let d = &self.double_afc;
        ProjectionSetting {
            analyzer_phase,
            amplitude_balance: d.amplitude_balance,
            recall_times: (d.recall_time_1_ns * 1e-9, d.recall_time_2_ns * 1e-9),
        }
    }

    pub fn model(&self) -> ExperimentModel {
        let h = &self.herald_detector;
        let gate = h.gate_width_ns * 1e-9;
        let herald_dark_rate = if gate > 0.0 && (0.0..1.0).contains(&h.dark_probability_per_gate) {
            -(1.0 - h.dark_probability_per_gate).ln() / gate
        } else {
            f64::NAN
        };
        ExperimentModel {
            source: SourceModel {
                rep_rate_hz: self.source.rep_rate_mhz * 1e6,
                mean_photon_number: self.source.mean_photon_number,
                pair_correlation: self.source.pair_correlation,
                statistics: self.source.statistics,
            },
            signal_detector: DetectorModel {
                efficiency: self.signal_detector.efficiency,
                dark_count_rate_hz: self.signal_detector.dark_count_rate_hz,
                dead_time_s: self.signal_detector.dead_time_ns * 1e-9,
                jitter_fwhm_s: self.signal_detector.jitter_fwhm_ps * 1e-12,
                gated: false,
                gate_width_s: 0.0,
            },
            herald_detector: DetectorModel {
                efficiency: h.efficiency,
                dark_count_rate_hz: herald_dark_rate,
                dead_time_s: h.dead_time_us * 1e-6,
                jitter_fwhm_s: h.jitter_fwhm_ps * 1e-12,
                gated: true,
                gate_width_s: gate,
            },
            signal_channel: ChannelModel {
                loss_db: self.signal_channel.loss_db,
                delay_s: self.signal_channel.delay_ns * 1e-9,
            },
            herald_channel: ChannelModel {
                loss_db: self.herald_channel.loss_db,
                delay_s: self.herald_channel.delay_ns * 1e-9,
            },
            timing: TimingSequence {
                prep_s: self.timing.prep_ms * 1e-3,
                wait_s: self.timing.wait_ms * 1e-3,
                storage_s: self.timing.storage_ms * 1e-3,
            },
        }
    }

    /// Storage time of the single comb, `1 / Δν`.
    pub fn storage_time_s(&self) -> f64 {
        1.0 / (self.comb.tooth_spacing_mhz * 1e6)
    }

    /// Counting windows on the pump-period axis, shifted by the signal
    /// channel delay: early and late recall of the single comb, and the
    /// three analyzer outputs.
    pub fn storage_windows(&self) -> [CountWindow; 2] {
        let w = self.windows.width_ns * 1e-9;
        let t = self.storage_time_s() + self.signal_channel.delay_ns * 1e-9;
        [CountWindow::new(t, w), CountWindow::new(t + self.bin_separation_s(), w)]
    }

    pub fn interference_window(&self) -> CountWindow {
        CountWindow::new(
            (self.double_afc.recall_time_2_ns + self.signal_channel.delay_ns) * 1e-9,
            self.windows.width_ns * 1e-9,
        )
    }

    pub fn background_windows(&self) -> Vec<CountWindow> {
        let w = self.windows.width_ns * 1e-9;
        self.windows
            .background_centers_ns
            .iter()
            .map(|c| CountWindow::new(c * 1e-9, w))
            .collect()
    }

    /// Every violated invariant, with its key path. Empty when valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut err = |path: &str, message: String| {
            out.push(Diagnostic {
                path: path.to_string(),
                message,
            })
        };
        let positive = |x: f64| x.is_finite() && x > 0.0;
        let non_negative = |x: f64| x.is_finite() && x >= 0.0;
        let unit = |x: f64| (0.0..=1.0).contains(&x);

        if !positive(self.duration_s) {
            err("duration_s", "must be positive".into());
        }

        let c = &self.comb;
        if !positive(c.tooth_spacing_mhz) {
            err("comb.tooth_spacing_mhz", "must be positive".into());
        }
        if !positive(c.tooth_width_mhz) {
            err("comb.tooth_width_mhz", "must be positive".into());
        }
        if positive(c.tooth_spacing_mhz) && positive(c.tooth_width_mhz) && c.tooth_width_mhz >= c.tooth_spacing_mhz {
            err(
                "comb.tooth_width_mhz",
                format!(
                    "finesse constraint violated: tooth width {} MHz must be below the spacing {} MHz",
                    c.tooth_width_mhz, c.tooth_spacing_mhz
                ),
            );
        }
        if !(positive(c.bandwidth_ghz) && c.bandwidth_ghz * 1e3 >= 2.0 * c.tooth_spacing_mhz) {
            err("comb.bandwidth_ghz", "must hold at least two tooth spacings".into());
        }
        if !c.center_offset_mhz.is_finite() {
            err("comb.center_offset_mhz", "must be finite".into());
        }
        if !non_negative(c.peak_optical_depth) {
            err("comb.peak_optical_depth", "must be non-negative".into());
        }
        if !non_negative(c.background_optical_depth) {
            err("comb.background_optical_depth", "must be non-negative".into());
        }

        match self.spectral_grid() {
            Err(e) => err("grid", e.to_string()),
            Ok(grid) => {
                if let Err(e) = grid.check_supports(&self.comb_spec()) {
                    err("grid", e.to_string());
                }
            }
        }
        if !positive(self.photon.bandwidth_fwhm_ghz) {
            err("photon.bandwidth_fwhm_ghz", "must be positive".into());
        }

        let q = &self.qubits;
        let tau = q.bin_separation_ns;
        if !positive(tau) {
            err("qubits.bin_separation_ns", "must be positive".into());
        }
        if !q.superposition_phase_deg.is_finite() {
            err("qubits.superposition_phase_deg", "must be finite".into());
        }
        let phases = self.analyzer_phases_rad();
        if phases.iter().any(|p| !p.is_finite()) {
            err("qubits.analyzer_phases_deg", "must be finite".into());
        } else if !phases_span_fit(&phases) {
            err(
                "qubits.analyzer_phases_deg",
                "need at least 3 distinct phases spanning at least 180 degrees".into(),
            );
        }

        let d = &self.double_afc;
        let dt_ns = 1.0 / self.grid.span_ghz;
        if !(positive(d.recall_time_1_ns) && d.recall_time_2_ns > d.recall_time_1_ns) {
            err(
                "double_afc.recall_time_2_ns",
                "need 0 < recall_time_1_ns < recall_time_2_ns".into(),
            );
        } else if ((d.recall_time_2_ns - d.recall_time_1_ns) - tau).abs() > dt_ns.max(1e-9) {
            err(
                "double_afc.recall_time_2_ns",
                format!(
                    "consistency rule t2 - t1 = tau violated: {} ns - {} ns != {} ns",
                    d.recall_time_2_ns, d.recall_time_1_ns, tau
                ),
            );
        }
        let w = self.windows.width_ns;
        if positive(c.tooth_spacing_mhz) && positive(w) {
            let ts = 1e3 / c.tooth_spacing_mhz;
            if (ts - d.recall_time_1_ns).abs() > 0.1 * w {
                err(
                    "double_afc.recall_time_1_ns",
                    format!("storage time 1/spacing = {ts:.4} ns differs from recall_time_1_ns by more than a tenth of the window"),
                );
            }
        }
        if !unit(d.amplitude_balance) {
            err("double_afc.amplitude_balance", "must lie in [0, 1]".into());
        }

        if !positive(w) {
            err("windows.width_ns", "must be positive".into());
        } else if positive(tau) && w > tau {
            err(
                "windows.width_ns",
                format!("window {w} ns is wider than the bin separation {tau} ns"),
            );
        }
        if !positive(self.windows.histogram_bin_ps) {
            err("windows.histogram_bin_ps", "must be positive".into());
        } else if positive(w) && self.windows.histogram_bin_ps > 1e3 * w {
            err(
                "windows.histogram_bin_ps",
                "bins must be narrower than the counting windows".into(),
            );
        }
        if self.windows.background_centers_ns.is_empty() {
            err(
                "windows.background_centers_ns",
                "need at least one background window".into(),
            );
        }
        if positive(w) && positive(self.source.rep_rate_mhz) {
            let period_ns = 1e3 / self.source.rep_rate_mhz;
            let mut all: Vec<(String, f64)> = Vec::new();
            for (i, cw) in self.storage_windows().iter().enumerate() {
                all.push((["early", "late"][i].to_string(), cw.center_s * 1e9));
            }
            all.push(("interference".into(), self.interference_window().center_s * 1e9));
            all.push((
                "analyzer late".into(),
                (d.recall_time_2_ns + tau + self.signal_channel.delay_ns),
            ));
            for (i, b) in self.windows.background_centers_ns.iter().enumerate() {
                all.push((format!("background[{i}]"), *b));
            }
            for (name, c0) in &all {
                if !(c0 - 0.5 * w >= 0.0 && c0 + 0.5 * w <= period_ns) {
                    err(
                        "windows",
                        format!("{name} window at {c0} ns leaves the {period_ns} ns pump period"),
                    );
                }
            }
            let signals = all.len() - self.windows.background_centers_ns.len();
            for (i, (bn, bc)) in all.iter().enumerate().skip(signals) {
                for (an, ac) in all.iter().take(i) {
                    if (bc - ac).abs() < w - 1e-9 {
                        err(
                            "windows.background_centers_ns",
                            format!("{bn} window overlaps the {an} window"),
                        );
                    }
                }
            }
        }

        let s = &self.source;
        if !positive(s.rep_rate_mhz) {
            err("source.rep_rate_mhz", "must be positive".into());
        }
        if !(s.mean_photon_number >= 0.0 && s.mean_photon_number < 1.0) {
            err("source.mean_photon_number", "must lie in [0, 1)".into());
        }
        if !unit(s.pair_correlation) {
            err("source.pair_correlation", "must lie in [0, 1]".into());
        }
        let sd = &self.signal_detector;
        if !unit(sd.efficiency) {
            err("signal_detector.efficiency", "must lie in [0, 1]".into());
        }
        for (v, p) in [
            (sd.dark_count_rate_hz, "signal_detector.dark_count_rate_hz"),
            (sd.dead_time_ns, "signal_detector.dead_time_ns"),
            (sd.jitter_fwhm_ps, "signal_detector.jitter_fwhm_ps"),
        ] {
            if !non_negative(v) {
                err(p, "must be non-negative".into());
            }
        }
        let hd = &self.herald_detector;
        if !unit(hd.efficiency) {
            err("herald_detector.efficiency", "must lie in [0, 1]".into());
        }
        if !(hd.dark_probability_per_gate >= 0.0 && hd.dark_probability_per_gate < 1.0) {
            err("herald_detector.dark_probability_per_gate", "must lie in [0, 1)".into());
        }
        for (v, p) in [
            (hd.dead_time_us, "herald_detector.dead_time_us"),
            (hd.jitter_fwhm_ps, "herald_detector.jitter_fwhm_ps"),
        ] {
            if !non_negative(v) {
                err(p, "must be non-negative".into());
            }
        }
        if !positive(hd.gate_width_ns) {
            err("herald_detector.gate_width_ns", "must be positive".into());
        } else if positive(s.rep_rate_mhz) && hd.gate_width_ns >= 1e3 / s.rep_rate_mhz {
            err(
                "herald_detector.gate_width_ns",
                "gate must be shorter than the pump period".into(),
            );
        }
        for (ch, loss, delay) in [
            (
                "signal_channel",
                self.signal_channel.loss_db,
                self.signal_channel.delay_ns,
            ),
            (
                "herald_channel",
                self.herald_channel.loss_db,
                self.herald_channel.delay_ns,
            ),
        ] {
            if !non_negative(loss) {
                err(&format!("{ch}.loss_db"), "must be non-negative".into());
            }
            if !non_negative(delay) {
                err(&format!("{ch}.delay_ns"), "must be non-negative".into());
            }
        }
        let t = &self.timing;
        for (v, p) in [
            (t.prep_ms, "timing.prep_ms"),
            (t.wait_ms, "timing.wait_ms"),
            (t.storage_ms, "timing.storage_ms"),
        ] {
            if !positive(v) {
                err(p, "must be positive".into());
            }
        }
        if positive(self.duration_s) && self.duration_s * 1e3 < t.prep_ms + t.wait_ms + t.storage_ms {
            err("duration_s", "must cover at least one full timing cycle".into());
        }
        out
    }
}

fn phases_span_fit(phases: &[f64]) -> bool {
    let mut p: Vec<f64> = phases.iter().map(|x| x.rem_euclid(2.0 * PI)).collect();
    p.sort_by(f64::total_cmp);
    p.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if p.len() > 1 && (p[0] + 2.0 * PI - p[p.len() - 1]) < 1e-9 {
        p.pop();
    }
    if p.len() < 3 {
        return false;
    }
    let wrap = p[0] + 2.0 * PI - p[p.len() - 1];
    p.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max) <= PI + 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = ExperimentConfig::default();
        assert_eq!(c.validate(), vec![]);
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest(), c.digest());
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_reported_with_location() {
        let e = ExperimentConfig::from_toml("[comb]\ntooth_spacing_hz = 1.0\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("tooth_spacing_hz"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn finesse_violation_names_the_constraint() {
        let mut c = ExperimentConfig::default();
        c.comb.tooth_width_mhz = 200.0;
        let d = c.validate();
        assert!(
            d.iter()
                .any(|d| d.path == "comb.tooth_width_mhz" && d.message.contains("finesse")),
            "{d:?}"
        );
    }

    #[test]
    fn recall_time_mismatch_names_the_rule() {
        let mut c = ExperimentConfig::default();
        c.double_afc.recall_time_2_ns = 7.9;
        let d = c.validate();
        assert!(
            d.iter()
                .any(|d| d.path == "double_afc.recall_time_2_ns" && d.message.contains("t2 - t1 = tau")),
            "{d:?}"
        );
    }

    #[test]
    fn overlapping_background_window_is_reported() {
        let mut c = ExperimentConfig::default();
        c.windows.background_centers_ns.push(6.2);
        let d = c.validate();
        assert!(d.iter().any(|d| d.path == "windows.background_centers_ns"), "{d:?}");
    }

    #[test]
    fn herald_dark_probability_maps_to_rate() {
        let c = ExperimentConfig::default();
        let m = c.model();
        let p = 1.0 - (-m.herald_detector.dark_count_rate_hz * m.herald_detector.gate_width_s).exp();
        assert!((p - 0.025).abs() < 1e-12);
    }

    #[test]
    fn phase_coverage() {
        assert!(phases_span_fit(&[0.0, 0.5 * PI, PI, 1.5 * PI]));
        assert!(phases_span_fit(&[0.0, PI, 0.5 * PI]));
        assert!(!phases_span_fit(&[0.0, 0.1, 0.2]));
        assert!(!phases_span_fit(&[0.0, 2.0 * PI, PI]));
    }
}
