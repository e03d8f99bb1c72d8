//! Photon-counting simulation of the storage experiment.
//!
//! Each pump pulse draws from its own ChaCha stream (`set_stream(pulse)`),
//! so the content of a pulse does not depend on how pulses are scheduled.
//! Pulses are sampled in parallel; detector dead time and the herald gate
//! logic are then applied in one ordered pass. Herald-gate randomness uses
//! a separate stream per gate.
//!
//! Only storage phases are simulated: pump light and detectors are off
//! during comb preparation and the wait. Light transmitted straight through
//! the memory is not part of the recall profile.

mod events;
mod tdc;

pub use events::{Detector, Event, EventLog, RunMetadata};
pub use tdc::{gate_hits, tdc_histogram, window_counts, CountWindow, HistogramMode, TdcHistogram, WindowCounts};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;
const GATE_STREAM: u64 = 1 << 63;
const CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairStatistics {
    Poisson,
    /// Single-mode thermal (geometric) photon-number distribution.
    Thermal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub rep_rate_hz: f64,
    /// Mean number of pairs per pump pulse.
    pub mean_photon_number: f64,
    /// Probability that a signal photon has a partner surviving its filter.
    pub pair_correlation: f64,
    pub statistics: PairStatistics,
}

impl Default for SourceModel {
    fn default() -> Self {
        Self {
            rep_rate_hz: 8e7,
            mean_photon_number: 0.1,
            pair_correlation: 0.75,
            statistics: PairStatistics::Poisson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    pub dark_count_rate_hz: f64,
    pub dead_time_s: f64,
    pub jitter_fwhm_s: f64,
    pub gated: bool,
    /// Gate width (s); ignored for free-running detectors.
    pub gate_width_s: f64,
}

impl DetectorModel {
    /// Free-running silicon detector on the memory arm.
    pub fn signal_default() -> Self {
        Self {
            efficiency: 0.6,
            dark_count_rate_hz: 30e3,
            dead_time_s: 50e-9,
            jitter_fwhm_s: 0.35e-9,
            gated: false,
            gate_width_s: 0.0,
        }
    }

    /// Gated telecom detector on the partner arm.
    pub fn herald_default() -> Self {
        Self {
            efficiency: 0.25,
            dark_count_rate_hz: 5e6,
            dead_time_s: 10e-6,
            jitter_fwhm_s: 0.35e-9,
            gated: true,
            gate_width_s: 5e-9,
        }
    }

    fn validate(&self, field: &'static str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::invalid(field, "efficiency must lie in [0, 1]"));
        }
        for (v, what) in [
            (self.dark_count_rate_hz, "dark count rate"),
            (self.dead_time_s, "dead time"),
            (self.jitter_fwhm_s, "jitter"),
            (self.gate_width_s, "gate width"),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(field, format!("{what} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub loss_db: f64,
    pub delay_s: f64,
}

impl ChannelModel {
    pub fn transmission(&self) -> f64 {
        10f64.powf(-self.loss_db / 10.0)
    }

    fn validate(&self, field: &'static str) -> Result<()> {
        if !(self.loss_db.is_finite() && self.loss_db >= 0.0) {
            return Err(Error::invalid(field, "loss must be finite and non-negative"));
        }
        if !(self.delay_s.is_finite() && self.delay_s >= 0.0) {
            return Err(Error::invalid(field, "delay must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSequence {
    pub prep_s: f64,
    pub wait_s: f64,
    pub storage_s: f64,
}

impl Default for TimingSequence {
    fn default() -> Self {
        Self {
            prep_s: 10e-3,
            wait_s: 2.2e-3,
            storage_s: 40e-3,
        }
    }
}

impl TimingSequence {
    pub fn cycle_s(&self) -> f64 {
        self.prep_s + self.wait_s + self.storage_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentModel {
    pub source: SourceModel,
    pub signal_detector: DetectorModel,
    pub herald_detector: DetectorModel,
    pub signal_channel: ChannelModel,
    pub herald_channel: ChannelModel,
    pub timing: TimingSequence,
}

impl Default for ExperimentModel {
    fn default() -> Self {
        Self {
            source: SourceModel::default(),
            signal_detector: DetectorModel::signal_default(),
            herald_detector: DetectorModel::herald_default(),
            signal_channel: ChannelModel {
                loss_db: 10.0,
                delay_s: 0.0,
            },
            herald_channel: ChannelModel {
                loss_db: 1.0,
                delay_s: 147e-9,
            },
            timing: TimingSequence::default(),
        }
    }
}

impl ExperimentModel {
    pub fn validate(&self) -> Result<()> {
        let s = &self.source;
        if !(s.rep_rate_hz.is_finite() && s.rep_rate_hz > 0.0) {
            return Err(Error::invalid("source.rep_rate_hz", "must be positive"));
        }
        if !(0.0..1.0).contains(&s.mean_photon_number) {
            return Err(Error::invalid("source.mean_photon_number", "must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&s.pair_correlation) {
            return Err(Error::invalid("source.pair_correlation", "must lie in [0, 1]"));
        }
        self.signal_detector.validate("signal_detector")?;
        self.herald_detector.validate("herald_detector")?;
        if self.signal_detector.gated {
            return Err(Error::invalid(
                "signal_detector.gated",
                "the signal detector is free running",
            ));
        }
        if !self.herald_detector.gated || self.herald_detector.gate_width_s <= 0.0 {
            return Err(Error::invalid(
                "herald_detector.gate_width_s",
                "the herald detector must be gated with a positive gate width",
            ));
        }
        if self.herald_detector.gate_width_s >= self.period_s() {
            return Err(Error::invalid(
                "herald_detector.gate_width_s",
                "gate must be shorter than the pump period",
            ));
        }
        self.signal_channel.validate("signal_channel")?;
        self.herald_channel.validate("herald_channel")?;
        let t = &self.timing;
        for (v, f) in [
            (t.prep_s, "timing.prep_s"),
            (t.wait_s, "timing.wait_s"),
            (t.storage_s, "timing.storage_s"),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(f, "must be positive"));
            }
        }
        if t.storage_s < self.period_s() {
            return Err(Error::invalid("timing.storage_s", "shorter than one pump period"));
        }
        Ok(())
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.source.rep_rate_hz
    }

    /// Pump pulses in a run of `duration_s` (storage phases only).
    pub fn pulses_in(&self, duration_s: f64) -> u64 {
        let meta = self.metadata(0, duration_s, String::new());
        meta.pulses
    }

    fn metadata(&self, seed: u64, duration_s: f64, config_digest: String) -> RunMetadata {
        let ps = |s: f64| (s * 1e12).round() as i64;
        let period_ps = ps(self.period_s()).max(1);
        let cycle_ps = ps(self.timing.cycle_s());
        let storage_start_ps = ps(self.timing.prep_s + self.timing.wait_s);
        let slots_per_phase = (ps(self.timing.storage_s) / period_ps) as u64;
        let duration_ps = ps(duration_s);
        let full = (duration_ps / cycle_ps) as u64;
        let rest = duration_ps % cycle_ps - storage_start_ps;
        let partial = if rest > 0 {
            ((rest / period_ps) as u64).min(slots_per_phase)
        } else {
            0
        };
        let gate = self.herald_detector.gate_width_s;
        RunMetadata {
            seed,
            duration_s,
            config_digest,
            pulses: full * slots_per_phase + partial,
            period_ps,
            cycle_ps,
            storage_start_ps,
            slots_per_phase,
            gate_offset_ps: ps(self.herald_channel.delay_s - 0.5 * gate),
            gate_width_ps: ps(gate),
        }
    }
}

/// Where a stored photon re-emerges: window centers relative to the pump
/// pulse and the probability of emission into each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallProfile {
    pub windows: Vec<RecallWindow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallWindow {
    pub center_s: f64,
    pub probability: f64,
}

impl RecallProfile {
    pub fn new(windows: Vec<RecallWindow>) -> Result<Self> {
        let p = Self { windows };
        p.validate()?;
        Ok(p)
    }

    pub fn total(&self) -> f64 {
        self.windows.iter().map(|w| w.probability).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .windows
            .iter()
            .any(|w| !(w.center_s.is_finite() && w.center_s >= 0.0 && w.probability >= 0.0))
        {
            return Err(Error::invalid(
                "recall",
                "windows need finite non-negative times and probabilities",
            ));
        }
        if self.total() > 1.0 + 1e-12 {
            return Err(Error::invalid("recall", "probabilities sum above 1"));
        }
        Ok(())
    }
}

/// Photons one pulse puts on the detectors, before dead time and gating.
#[derive(Debug, Default)]
struct PulseDraw {
    signal: Vec<i64>,
    herald: Vec<i64>,
}

struct Sampler<'a> {
    model: &'a ExperimentModel,
    recall: &'a RecallProfile,
    pairs: PairSampler,
    darks: Option<Poisson<f64>>,
    signal_jitter: Option<Normal<f64>>,
    herald_jitter: Option<Normal<f64>>,
    p_signal: f64,
    p_herald: f64,
    period_ps: i64,
}

enum PairSampler {
    None,
    Poisson(Poisson<f64>),
    Thermal(Geometric),
}

impl PairSampler {
    fn draw(&self, rng: &mut ChaCha8Rng) -> u64 {
        match self {
            PairSampler::None => 0,
            PairSampler::Poisson(d) => d.sample(rng) as u64,
            PairSampler::Thermal(d) => d.sample(rng),
        }
    }
}

fn jitter(fwhm: f64) -> Option<Normal<f64>> {
    (fwhm > 0.0).then(|| Normal::new(0.0, fwhm / FWHM_PER_SIGMA * 1e12).expect("finite jitter"))
}

impl<'a> Sampler<'a> {
    fn new(model: &'a ExperimentModel, recall: &'a RecallProfile, period_ps: i64) -> Self {
        let mu = model.source.mean_photon_number;
        let pairs = if mu == 0.0 {
            PairSampler::None
        } else {
            match model.source.statistics {
                PairStatistics::Poisson => PairSampler::Poisson(Poisson::new(mu).expect("mu > 0")),
                PairStatistics::Thermal => PairSampler::Thermal(Geometric::new(1.0 / (1.0 + mu)).expect("p in (0, 1]")),
            }
        };
        let dark_mean = model.signal_detector.dark_count_rate_hz * period_ps as f64 * 1e-12;
        Self {
            model,
            recall,
            pairs,
            darks: (dark_mean > 0.0).then(|| Poisson::new(dark_mean).expect("positive dark mean")),
            signal_jitter: jitter(model.signal_detector.jitter_fwhm_s),
            herald_jitter: jitter(model.herald_detector.jitter_fwhm_s),
            p_signal: model.signal_channel.transmission() * model.signal_detector.efficiency,
            p_herald: model.source.pair_correlation
                * model.herald_channel.transmission()
                * model.herald_detector.efficiency,
            period_ps,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, slot_ps: i64) -> PulseDraw {
        let mut out = PulseDraw::default();
        let n = self.pairs.draw(rng);
        let sig_delay = self.model.signal_channel.delay_s;
        let her_delay = self.model.herald_channel.delay_s;
        for _ in 0..n {
            let mut u: f64 = rng.random::<f64>() / self.p_signal;
            for w in &self.recall.windows {
                if u < w.probability {
                    let dt = self.signal_jitter.map_or(0.0, |j| j.sample(rng));
                    out.signal
                        .push(slot_ps + ((w.center_s + sig_delay) * 1e12 + dt).round() as i64);
                    break;
                }
                u -= w.probability;
            }
            if rng.random::<f64>() < self.p_herald {
                let dt = self.herald_jitter.map_or(0.0, |j| j.sample(rng));
                out.herald.push(slot_ps + (her_delay * 1e12 + dt).round() as i64);
            }
        }
        if let Some(d) = &self.darks {
            let k = d.sample(rng) as u64;
            for _ in 0..k {
                out.signal.push(slot_ps + rng.random_range(0..self.period_ps));
            }
        }
        out
    }
}

/// Digest of everything that determines a run besides the seed.
pub fn model_digest(model: &ExperimentModel, recall: &RecallProfile) -> String {
    let mut h = Sha256::new();
    h.update(format!("{model:?}|{recall:?}").as_bytes());
    hex::encode(h.finalize())
}

/// Simulates `duration_s` of the experiment. The digest stored in the
/// metadata is [`model_digest`].
pub fn simulate_run(model: &ExperimentModel, recall: &RecallProfile, duration_s: f64, seed: u64) -> Result<EventLog> {
    model.validate()?;
    recall.validate()?;
    if !(duration_s.is_finite() && duration_s >= model.timing.cycle_s()) {
        return Err(Error::invalid(
            "duration_s",
            "must cover at least one full timing cycle",
        ));
    }
    let meta = model.metadata(seed, duration_s, model_digest(model, recall));
    let sampler = Sampler::new(model, recall, meta.period_ps);
    let base = ChaCha8Rng::seed_from_u64(seed);
    let slot_of = |j: u64| -> i64 {
        let (c, k) = (j / meta.slots_per_phase, j % meta.slots_per_phase);
        c as i64 * meta.cycle_ps + meta.storage_start_ps + k as i64 * meta.period_ps
    };

    let n_chunks = meta.pulses.div_ceil(CHUNK);
    let chunks: Vec<(Vec<i64>, Vec<i64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = base.clone();
            let (mut sig, mut her) = (Vec::new(), Vec::new());
            for j in c * CHUNK..((c + 1) * CHUNK).min(meta.pulses) {
                rng.set_stream(j);
                rng.set_word_pos(0);
                let d = sampler.draw(&mut rng, slot_of(j));
                sig.extend(d.signal);
                her.extend(d.herald);
            }
            (sig, her)
        })
        .collect();
    let (mut signal, mut herald): (Vec<i64>, Vec<i64>) = (Vec::new(), Vec::new());
    for (s, h) in chunks {
        signal.extend(s);
        herald.extend(h);
    }
    signal.sort_unstable();
    herald.sort_unstable();

    let ps = |s: f64| (s * 1e12).round() as i64;
    let sig_dead = ps(model.signal_detector.dead_time_s);
    let her_dead = ps(model.herald_detector.dead_time_s);
    let gate_dark = 1.0 - (-model.herald_detector.dark_count_rate_hz * model.herald_detector.gate_width_s).exp();
    let mut events = Vec::new();
    let mut next_signal = i64::MIN;
    let mut next_herald = i64::MIN;
    for &t in &signal {
        if t < next_signal {
            continue;
        }
        next_signal = t.saturating_add(sig_dead);
        let gate = meta.gate_for(t).filter(|&(lo, _)| lo >= next_herald);
        let Some((lo, hi)) = gate else {
            events.push(Event {
                detector: Detector::Signal,
                time_ps: t,
                gate: false,
            });
            continue;
        };
        events.push(Event {
            detector: Detector::Signal,
            time_ps: t,
            gate: true,
        });
        let i = herald.partition_point(|&x| x < lo);
        let mut first = (i < herald.len() && herald[i] < hi).then(|| herald[i]);
        if gate_dark > 0.0 {
            let mut rng = base.clone();
            rng.set_stream(GATE_STREAM | (lo as u64));
            rng.set_word_pos(0);
            if rng.random::<f64>() < gate_dark {
                let td = lo + rng.random_range(0..(hi - lo));
                first = Some(first.map_or(td, |f| f.min(td)));
            }
        }
        if let Some(th) = first {
            events.push(Event {
                detector: Detector::Herald,
                time_ps: th,
                gate: true,
            });
            next_herald = th.saturating_add(her_dead);
        }
    }
    events.sort_by_key(|e| (e.time_ps, e.detector));
    Ok(EventLog { metadata: meta, events })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_model() -> ExperimentModel {
        let mut m = ExperimentModel::default();
        m.signal_detector.dark_count_rate_hz = 0.0;
        m.herald_detector.dark_count_rate_hz = 0.0;
        m.timing = TimingSequence {
            prep_s: 1e-3,
            wait_s: 0.2e-3,
            storage_s: 4e-3,
        };
        m
    }

    fn echo(p: f64) -> RecallProfile {
        RecallProfile::new(vec![RecallWindow {
            center_s: 6e-9,
            probability: p,
        }])
        .unwrap()
    }

    #[test]
    fn dark_and_empty_source_gives_empty_log() {
        let mut m = quiet_model();
        m.source.mean_photon_number = 0.0;
        let log = simulate_run(&m, &echo(0.02), 0.02, 1).unwrap();
        assert!(log.events.is_empty());
        assert!(log.metadata.pulses > 0);
    }

    #[test]
    fn pulse_count_follows_timing() {
        let m = quiet_model();
        // 3 full cycles of 5.2 ms, then 1 ms of a fourth storage phase
        let meta = m.metadata(0, 3.0 * 5.2e-3 + 1.2e-3 + 1e-3, String::new());
        assert_eq!(meta.slots_per_phase, 320_000);
        assert_eq!(meta.pulses, 3 * 320_000 + 80_000);
    }

    #[test]
    fn zero_duration_is_rejected() {
        assert!(simulate_run(&quiet_model(), &echo(0.02), 0.0, 1).is_err());
    }

    #[test]
    fn click_probability_matches_closed_form() {
        let mut m = quiet_model();
        m.signal_channel.loss_db = 0.0;
        m.signal_detector.efficiency = 1.0;
        m.signal_detector.dead_time_s = 0.0;
        let p = 0.3;
        let log = simulate_run(&m, &echo(p), 0.0104, 7).unwrap();
        let n = log.metadata.pulses as f64;
        let expect = 1.0 - (-0.1f64 * p).exp();
        let mut slots: Vec<i64> = log
            .of(Detector::Signal)
            .map(|e| log.metadata.slot_start(e.time_ps).unwrap())
            .collect();
        slots.dedup();
        let clicks = slots.len() as f64 / n;
        let sigma = (expect * (1.0 - expect) / n).sqrt();
        assert!(
            (clicks - expect).abs() < 3.0 * sigma,
            "{clicks} vs {expect} +/- {sigma}"
        );
    }

    #[test]
    fn heralds_only_inside_signal_gates() {
        let mut m = ExperimentModel::default();
        m.signal_detector.dark_count_rate_hz = 2e5;
        m.timing.storage_s = 4e-3;
        let log = simulate_run(&m, &echo(0.02), m.timing.cycle_s(), 3).unwrap();
        let gates: Vec<(i64, i64)> = log
            .of(Detector::Signal)
            .filter(|e| e.gate)
            .map(|e| log.metadata.gate_for(e.time_ps).unwrap())
            .collect();
        assert!(log.count(Detector::Herald) > 0);
        for h in log.of(Detector::Herald) {
            assert!(gates.iter().any(|&(lo, hi)| lo <= h.time_ps && h.time_ps < hi));
        }
        assert!(log.respects_dead_time(50_000, 10_000_000));
    }

    #[test]
    fn identical_seeds_reproduce() {
        let m = ExperimentModel::default();
        let a = simulate_run(&m, &echo(0.02), 0.06, 11).unwrap();
        let b = simulate_run(&m, &echo(0.02), 0.06, 11).unwrap();
        let c = simulate_run(&m, &echo(0.02), 0.06, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn export_format() {
        let mut m = ExperimentModel::default();
        m.timing.storage_s = 1e-3;
        let log = simulate_run(&m, &echo(0.02), m.timing.cycle_s(), 5).unwrap();
        let mut buf = Vec::new();
        log.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# seed: 5\n"));
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), log.events.len());
        for (r, e) in rows.iter().zip(&log.events) {
            let f: Vec<&str> = r.split('\t').collect();
            assert_eq!(
                f,
                [
                    e.detector.id().to_string(),
                    e.time_ps.to_string(),
                    u8::from(e.gate).to_string()
                ]
            );
        }
    }

    fn synthetic(events: Vec<Event>) -> EventLog {
        let m = quiet_model();
        let mut meta = m.metadata(0, m.timing.cycle_s(), String::new());
        meta.gate_offset_ps = 100;
        meta.gate_width_ps = 50;
        EventLog { metadata: meta, events }
    }

    #[test]
    fn single_event_lands_in_its_bin() {
        let start = 1_200_000_000; // storage phase start (1.2 ms)
        let log = synthetic(vec![Event {
            detector: Detector::Signal,
            time_ps: start + 3 * 12_500 + 6_000,
            gate: false,
        }]);
        let h = tdc_histogram(&log, 100e-12, HistogramMode::Singles).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts[60], 1);
        assert_eq!(h.bin_center_ps(60), 6050.0);
    }

    #[test]
    fn conditional_keeps_only_hit_gates() {
        let s = 1_200_000_000;
        let ev = |d, t, g| Event {
            detector: d,
            time_ps: t,
            gate: g,
        };
        let log = synthetic(vec![
            ev(Detector::Signal, s + 6_000, true),
            ev(Detector::Herald, s + 120, true),
            ev(Detector::Signal, s + 50 * 12_500 + 7_000, true),
            ev(Detector::Signal, s + 90 * 12_500 + 8_000, false),
        ]);
        let h = tdc_histogram(&log, 1e-9, HistogramMode::Conditional).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts[6], 1);
        assert_eq!(gate_hits(&log), vec![Some(true), Some(false), None]);
    }

    #[test]
    fn windows_count_and_reject_overlap() {
        let h = TdcHistogram {
            mode: HistogramMode::Singles,
            bin_width_ps: 100,
            counts: (0..125).map(|i| if (55..65).contains(&i) { 10 } else { 1 }).collect(),
        };
        let w = window_counts(
            &h,
            &[CountWindow::new(6e-9, 1e-9)],
            &[CountWindow::new(1e-9, 1e-9), CountWindow::new(11e-9, 1e-9)],
        )
        .unwrap();
        assert_eq!(w.signal, vec![100]);
        assert_eq!(w.background, vec![10, 10]);
        assert_eq!(w.background_mean(), 10.0);
        assert!(window_counts(&h, &[CountWindow::new(6e-9, 1e-9)], &[CountWindow::new(6.5e-9, 1e-9)]).is_err());
        assert!(window_counts(&h, &[CountWindow::new(6e-9, 1e-9)], &[CountWindow::new(2e-9, 2e-9)]).is_err());
        assert!(window_counts(&h, &[CountWindow::new(12.4e-9, 1e-9)], &[]).is_err());
    }
}
