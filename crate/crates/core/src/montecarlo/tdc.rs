use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::events::{Detector, EventLog};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistogramMode {
    /// Every signal detection.
    Singles,
    /// Signal detections whose herald gate saw a herald detection.
    Conditional,
}

impl HistogramMode {
    pub fn name(self) -> &'static str {
        match self {
            HistogramMode::Singles => "singles",
            HistogramMode::Conditional => "conditional",
        }
    }
}

/// Signal detections binned by their offset from the pump slot start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TdcHistogram {
    pub mode: HistogramMode,
    pub bin_width_ps: i64,
    pub counts: Vec<u64>,
}

impl TdcHistogram {
    pub fn bin_center_ps(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.bin_width_ps as f64
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin index holding slot offset `offset_ps`.
    pub fn bin_of(&self, offset_ps: i64) -> usize {
        (offset_ps / self.bin_width_ps) as usize
    }

    /// Two columns: bin center (ps) and count.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# mode: {}", self.mode.name())?;
        writeln!(w, "# bin_width_ps: {}", self.bin_width_ps)?;
        writeln!(w, "# bin_center_ps\tcount")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(w, "{}\t{}", self.bin_center_ps(i), c)?;
        }
        Ok(())
    }
}

/// Whether a herald detection falls inside the gate opened by each signal
/// event; `None` for signal events that opened no gate.
pub fn gate_hits(log: &EventLog) -> Vec<Option<bool>> {
    let heralds: Vec<i64> = log.of(Detector::Herald).map(|e| e.time_ps).collect();
    log.of(Detector::Signal)
        .map(|e| {
            if !e.gate {
                return None;
            }
            let (lo, hi) = log.metadata.gate_for(e.time_ps)?;
            let i = heralds.partition_point(|&t| t < lo);
            Some(i < heralds.len() && heralds[i] < hi)
        })
        .collect()
}

pub fn tdc_histogram(log: &EventLog, bin_width_s: f64, mode: HistogramMode) -> Result<TdcHistogram> {
    if !(bin_width_s.is_finite() && bin_width_s > 0.0) {
        return Err(Error::invalid("bin_width_s", "must be positive"));
    }
    let bin_width_ps = (bin_width_s * 1e12).round() as i64;
    if bin_width_ps < 1 {
        return Err(Error::invalid("bin_width_s", "must be at least 1 ps"));
    }
    let period = log.metadata.period_ps;
    let n_bins = ((period + bin_width_ps - 1) / bin_width_ps) as usize;
    let mut hist = TdcHistogram {
        mode,
        bin_width_ps,
        counts: vec![0; n_bins],
    };
    let hits = match mode {
        HistogramMode::Singles => None,
        HistogramMode::Conditional => Some(gate_hits(log)),
    };
    for (k, e) in log.of(Detector::Signal).enumerate() {
        if let Some(h) = &hits {
            if h[k] != Some(true) {
                continue;
            }
        }
        if let Some(off) = log.metadata.slot_offset(e.time_ps) {
            let b = hist.bin_of(off);
            hist.counts[b] += 1;
        }
    }
    Ok(hist)
}

/// A counting window on the slot-offset axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountWindow {
    pub center_s: f64,
    pub width_s: f64,
}

impl CountWindow {
    pub fn new(center_s: f64, width_s: f64) -> Self {
        Self { center_s, width_s }
    }

    /// Bins `[lo, hi)` covered by the window: bins whose centers lie in
    /// `[center - width/2, center + width/2)`.
    pub fn bins(&self, hist: &TdcHistogram) -> Result<(usize, usize)> {
        if !(self.width_s.is_finite() && self.width_s > 0.0 && self.center_s.is_finite()) {
            return Err(Error::invalid("window", "center must be finite and width positive"));
        }
        let w = hist.bin_width_ps as f64;
        let edge = |t: f64| ((t * 1e12 / w) - 0.5).ceil();
        let lo = edge(self.center_s - 0.5 * self.width_s);
        let hi = edge(self.center_s + 0.5 * self.width_s);
        if lo < 0.0 || hi > hist.counts.len() as f64 {
            return Err(Error::invalid(
                "window",
                format!(
                    "window at {} s (width {} s) leaves the pump period",
                    self.center_s, self.width_s
                ),
            ));
        }
        Ok((lo as usize, hi as usize))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowCounts {
    pub signal: Vec<u64>,
    pub background: Vec<u64>,
    /// Background bins per window (equal to the signal windows' width).
    pub bins_per_window: usize,
}

impl WindowCounts {
    /// Mean background count per window.
    pub fn background_mean(&self) -> f64 {
        if self.background.is_empty() {
            return 0.0;
        }
        self.background.iter().sum::<u64>() as f64 / self.background.len() as f64
    }
}

/// Counts in the signal windows and in equal-width background windows.
/// All windows must cover the same number of bins and be disjoint.
pub fn window_counts(hist: &TdcHistogram, signal: &[CountWindow], background: &[CountWindow]) -> Result<WindowCounts> {
    let mut spans = Vec::new();
    for w in signal.iter().chain(background) {
        spans.push(w.bins(hist)?);
    }
    let width = spans.first().map(|(lo, hi)| hi - lo).unwrap_or(0);
    if spans.iter().any(|(lo, hi)| hi - lo != width) {
        return Err(Error::WindowOverlap("windows must span equal numbers of bins".into()));
    }
    let mut sorted = spans.clone();
    sorted.sort();
    if sorted.windows(2).any(|p| p[1].0 < p[0].1) {
        return Err(Error::WindowOverlap("counting windows overlap".into()));
    }
    let sum = |&(lo, hi): &(usize, usize)| hist.counts[lo..hi].iter().sum::<u64>();
    Ok(WindowCounts {
        signal: spans[..signal.len()].iter().map(sum).collect(),
        background: spans[signal.len()..].iter().map(sum).collect(),
        bins_per_window: width,
    })
}
