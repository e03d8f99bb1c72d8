use std::fmt::Write as _;
use std::io::{self, Write};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Detector {
    /// Free-running detector on the signal (memory) arm.
    Signal = 0,
    /// Gated detector on the partner arm.
    Herald = 1,
}

impl Detector {
    pub fn id(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Event {
    pub detector: Detector,
    /// Absolute time since the start of the run (ps).
    pub time_ps: i64,
    /// For signal events: the event opened a herald gate. Herald events are
    /// always inside a gate.
    pub gate: bool,
}

/// Run parameters needed to interpret the event times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub duration_s: f64,
    pub config_digest: String,
    pub pulses: u64,
    /// Pump period (ps).
    pub period_ps: i64,
    /// Length of one prepare / wait / store cycle (ps).
    pub cycle_ps: i64,
    /// Offset of the storage phase inside a cycle (ps).
    pub storage_start_ps: i64,
    /// Pump slots per storage phase.
    pub slots_per_phase: u64,
    /// Herald gate opening relative to the slot start, and its width (ps).
    pub gate_offset_ps: i64,
    pub gate_width_ps: i64,
}

impl RunMetadata {
    /// Start of the pump slot containing `time_ps`, if it falls in a
    /// storage phase.
    pub fn slot_start(&self, time_ps: i64) -> Option<i64> {
        let cycle = time_ps.div_euclid(self.cycle_ps);
        let phase = cycle * self.cycle_ps + self.storage_start_ps;
        let rel = time_ps - phase;
        if rel < 0 {
            return None;
        }
        let k = rel / self.period_ps;
        if k as u64 >= self.slots_per_phase {
            return None;
        }
        Some(phase + k * self.period_ps)
    }

    /// Offset of `time_ps` from the start of its pump slot.
    pub fn slot_offset(&self, time_ps: i64) -> Option<i64> {
        self.slot_start(time_ps).map(|s| time_ps - s)
    }

    /// Herald gate `[start, end)` opened by a signal event at `time_ps`.
    pub fn gate_for(&self, time_ps: i64) -> Option<(i64, i64)> {
        self.slot_start(time_ps).map(|s| {
            let g = s + self.gate_offset_ps;
            (g, g + self.gate_width_ps)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventLog {
    pub metadata: RunMetadata,
    /// Sorted by time, signal before herald on ties.
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn of(&self, detector: Detector) -> impl Iterator<Item = &Event> + '_ {
        self.events.iter().filter(move |e| e.detector == detector)
    }

    pub fn count(&self, detector: Detector) -> usize {
        self.of(detector).count()
    }

    fn header(&self) -> String {
        let m = &self.metadata;
        let mut s = String::new();
        let rows: [(&str, String); 11] = [
            ("seed", m.seed.to_string()),
            ("duration_s", m.duration_s.to_string()),
            ("config_digest", m.config_digest.clone()),
            ("pulses", m.pulses.to_string()),
            ("period_ps", m.period_ps.to_string()),
            ("cycle_ps", m.cycle_ps.to_string()),
            ("storage_start_ps", m.storage_start_ps.to_string()),
            ("slots_per_phase", m.slots_per_phase.to_string()),
            ("gate_offset_ps", m.gate_offset_ps.to_string()),
            ("gate_width_ps", m.gate_width_ps.to_string()),
            ("events", self.events.len().to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s.push_str("# detector\ttime_ps\tgate\n");
        s
    }

    /// Columnar text: a `# key: value` header, then one
    /// `detector<TAB>time_ps<TAB>gate` line per event.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.header().as_bytes())?;
        for e in &self.events {
            writeln!(w, "{}\t{}\t{}", e.detector.id(), e.time_ps, u8::from(e.gate))?;
        }
        Ok(())
    }

    /// Every detector respects its dead time.
    pub fn respects_dead_time(&self, signal_dead_ps: i64, herald_dead_ps: i64) -> bool {
        [(Detector::Signal, signal_dead_ps), (Detector::Herald, herald_dead_ps)]
            .iter()
            .all(|&(d, dead)| {
                let times: Vec<i64> = self.of(d).map(|e| e.time_ps).collect();
                times.windows(2).all(|w| w[1] - w[0] >= dead)
            })
    }
}
