use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::CliError;
use crate::analysis::{FidelityReport, ReportCounts, Snr};
use crate::montecarlo::{
    simulate_run, tdc_histogram, window_counts, EventLog, HistogramMode, RecallProfile, RecallWindow, TdcHistogram,
    WindowCounts,
};
use crate::qubit::{project, store, TimeBinQubit, Window};
use crate::Result;

pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// Seed of one simulated state, derived from the run seed and its label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let h = Sha256::digest(format!("{seed}:{label}").as_bytes());
    u64::from_le_bytes(h[..8].try_into().expect("8 bytes"))
}

/// One stored state: its recall profile, event log and histograms.
#[derive(Debug, Clone)]
pub struct StateRun {
    pub label: String,
    pub seed: u64,
    pub recall: RecallProfile,
    pub log: EventLog,
    pub singles: TdcHistogram,
    pub conditional: TdcHistogram,
}

impl StateRun {
    pub fn histogram(&self, mode: HistogramMode) -> &TdcHistogram {
        match mode {
            HistogramMode::Singles => &self.singles,
            HistogramMode::Conditional => &self.conditional,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeResult {
    pub counts: ReportCounts,
    pub report: FidelityReport,
    pub early_windows: WindowCounts,
    pub late_windows: WindowCounts,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config_digest: String,
    /// Echo efficiency of `|e>` in the single comb.
    pub storage_efficiency: f64,
    pub early: StateRun,
    pub late: StateRun,
    /// One run per analyzer phase, with the model interference probability.
    pub fringe: Vec<(f64, f64, StateRun)>,
    pub singles: ModeResult,
    pub conditional: ModeResult,
}

impl ExperimentOutcome {
    pub fn mode(&self, mode: HistogramMode) -> &ModeResult {
        match mode {
            HistogramMode::Singles => &self.singles,
            HistogramMode::Conditional => &self.conditional,
        }
    }

    pub fn snr(&self, mode: HistogramMode) -> Snr {
        self.mode(mode).report.snr
    }
}

fn profile(windows: &[Window]) -> Result<RecallProfile> {
    RecallProfile::new(
        windows
            .iter()
            .map(|w| RecallWindow {
                center_s: w.center_s,
                probability: w.probability,
            })
            .collect(),
    )
}

struct Plan {
    label: String,
    recall: RecallProfile,
}

/// Recall profiles of every state in the protocol: `|e>` and `|l>` in the
/// single comb, then the superposition in the analyzer at each phase.
fn plan(config: &ExperimentConfig) -> Result<(f64, Vec<Plan>, Vec<f64>)> {
    let optics = config.optics()?;
    let comb = config.comb_spec();
    let tau = config.bin_separation_s();
    let e = store(&TimeBinQubit::early_state(tau)?, &comb, &optics)?;
    let l = store(&TimeBinQubit::late_state(tau)?, &comb, &optics)?;
    let plus = TimeBinQubit::superposition(config.qubits.superposition_phase_deg.to_radians(), tau)?;
    let phases = config.analyzer_phases_rad();
    let projections: Vec<_> = phases
        .par_iter()
        .map(|&th| project(&plus, &config.projection_setting(th), &comb, &optics))
        .collect::<Result<_>>()?;
    let mut plans = vec![
        Plan {
            label: "early".into(),
            recall: profile(&e.windows())?,
        },
        Plan {
            label: "late".into(),
            recall: profile(&l.windows())?,
        },
    ];
    let mut model_p = Vec::new();
    for (k, p) in projections.iter().enumerate() {
        plans.push(Plan {
            label: format!("phase_{k}"),
            recall: profile(&p.windows())?,
        });
        model_p.push(p.interference.probability);
    }
    Ok((e.early.probability, plans, model_p))
}

fn simulate_state(config: &ExperimentConfig, p: Plan) -> Result<StateRun> {
    let seed = derive_seed(config.seed, &p.label);
    let mut log = simulate_run(&config.model(), &p.recall, config.duration_s, seed)?;
    log.metadata.config_digest = config.digest();
    let bin = config.windows.histogram_bin_ps * 1e-12;
    Ok(StateRun {
        singles: tdc_histogram(&log, bin, HistogramMode::Singles)?,
        conditional: tdc_histogram(&log, bin, HistogramMode::Conditional)?,
        label: p.label,
        seed,
        recall: p.recall,
        log,
    })
}

fn mode_result(
    config: &ExperimentConfig,
    mode: HistogramMode,
    early: &StateRun,
    late: &StateRun,
    fringe: &[(f64, f64, StateRun)],
) -> Result<ModeResult> {
    let [we, wl] = config.storage_windows();
    let bg = config.background_windows();
    let ce = window_counts(early.histogram(mode), &[we, wl], &bg)?;
    let cl = window_counts(late.histogram(mode), &[we, wl], &bg)?;
    let wi = config.interference_window();
    let fringe_counts = fringe
        .iter()
        .map(|(_, _, r)| Ok(window_counts(r.histogram(mode), &[wi], &[])?.signal[0] as f64))
        .collect::<Result<Vec<_>>>()?;
    let counts = ReportCounts {
        early_given_early: ce.signal[0] as f64,
        late_given_early: ce.signal[1] as f64,
        late_given_late: cl.signal[1] as f64,
        early_given_late: cl.signal[0] as f64,
        phases: fringe.iter().map(|(th, _, _)| *th).collect(),
        fringe: fringe_counts,
        signal: (ce.signal[0] + cl.signal[1]) as f64,
        background: ce.background_mean() + cl.background_mean(),
    };
    Ok(ModeResult {
        report: FidelityReport::from_counts(&counts)?,
        counts,
        early_windows: ce,
        late_windows: cl,
    })
}

/// Runs the whole protocol in memory. `parallel` caps the worker threads;
/// the result does not depend on it.
pub fn simulate(
    config: &ExperimentConfig,
    parallel: Option<usize>,
) -> std::result::Result<ExperimentOutcome, CliError> {
    let diags = config.validate();
    if !diags.is_empty() {
        return Err(CliError::Config(super::ConfigError::Invalid(diags)));
    }
    let work = || -> Result<ExperimentOutcome> {
        let (eff, plans, model_p) = plan(config)?;
        let mut runs: Vec<StateRun> = plans
            .into_par_iter()
            .map(|p| simulate_state(config, p))
            .collect::<Result<_>>()?;
        let phase_runs = runs.split_off(2);
        let late = runs.pop().expect("late run");
        let early = runs.pop().expect("early run");
        let fringe: Vec<_> = config
            .analyzer_phases_rad()
            .into_iter()
            .zip(model_p)
            .zip(phase_runs)
            .map(|((th, p), r)| (th, p, r))
            .collect();
        Ok(ExperimentOutcome {
            config_digest: config.digest(),
            storage_efficiency: eff,
            singles: mode_result(config, HistogramMode::Singles, &early, &late, &fringe)?,
            conditional: mode_result(config, HistogramMode::Conditional, &early, &late, &fringe)?,
            early,
            late,
            fringe,
        })
    };
    let out = match parallel {
        None => work(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Runtime(crate::Error::invalid("parallel", e.to_string())))?
            .install(work),
    };
    out.map_err(CliError::Runtime)
}

fn create(path: &Path) -> std::io::Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// `key: value` lines of the run report.
pub fn report_lines(config: &ExperimentConfig, out: &ExperimentOutcome) -> Vec<(String, String)> {
    let mut kv: Vec<(String, String)> = vec![
        ("config_digest".into(), out.config_digest.clone()),
        ("seed".into(), config.seed.to_string()),
        ("duration_s".into(), config.duration_s.to_string()),
        ("pulses_per_state".into(), out.early.log.metadata.pulses.to_string()),
        ("storage_efficiency".into(), format!("{:.6}", out.storage_efficiency)),
    ];
    for (k, (th, p, r)) in out.fringe.iter().enumerate() {
        kv.push((format!("analyzer_{k}.phase_rad"), format!("{th:.6}")));
        kv.push((format!("analyzer_{k}.interference_probability"), format!("{p:.6e}")));
        kv.push((format!("analyzer_{k}.seed"), r.seed.to_string()));
    }
    kv.push(("early.seed".into(), out.early.seed.to_string()));
    kv.push(("late.seed".into(), out.late.seed.to_string()));
    for mode in [HistogramMode::Singles, HistogramMode::Conditional] {
        let m = out.mode(mode);
        let p = format!("{}.", mode.name());
        let c = &m.counts;
        for (k, v) in [
            ("C_ee", c.early_given_early),
            ("C_le", c.late_given_early),
            ("C_ll", c.late_given_late),
            ("C_el", c.early_given_late),
            ("signal", c.signal),
            ("background_per_window", c.background),
        ] {
            kv.push((format!("{p}{k}"), v.to_string()));
        }
        kv.extend(m.report.key_values(&p));
    }
    kv
}

/// Writes event logs, histograms, the fringe table and the reports into
/// `dir`. An `INCOMPLETE` marker stays behind if anything fails.
pub fn write_artifacts(config: &ExperimentConfig, out: &ExperimentOutcome, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let marker = dir.join(INCOMPLETE_MARKER);
    fs::write(&marker, b"")?;
    fs::write(dir.join("config.toml"), config.to_toml())?;
    let runs = [&out.early, &out.late]
        .into_iter()
        .chain(out.fringe.iter().map(|(_, _, r)| r));
    for r in runs {
        let mut w = create(&dir.join(format!("events_{}.tsv", r.label)))?;
        r.log.write_tsv(&mut w)?;
        w.flush()?;
        for h in [&r.singles, &r.conditional] {
            let mut w = create(&dir.join(format!("hist_{}_{}.tsv", r.label, h.mode.name())))?;
            h.write_tsv(&mut w)?;
            w.flush()?;
        }
    }

    let mut w = create(&dir.join("fringe.tsv"))?;
    writeln!(w, "analyzer_phase_rad\tmodel_probability\tsingles\tconditional")?;
    for (k, (th, p, _)) in out.fringe.iter().enumerate() {
        writeln!(
            w,
            "{th:.6}\t{p:.6e}\t{}\t{}",
            out.singles.counts.fringe[k], out.conditional.counts.fringe[k]
        )?;
    }
    w.flush()?;

    let mut w = create(&dir.join("report.txt"))?;
    for (k, v) in report_lines(config, out) {
        writeln!(w, "{k}: {v}")?;
    }
    w.flush()?;

    let mut w = create(&dir.join("report.tsv"))?;
    writeln!(w, "quantity\tsingles\tsingles_sigma\tconditional\tconditional_sigma")?;
    let (s, c) = (&out.singles.report, &out.conditional.report);
    for (name, a, b) in [
        ("F_e", s.f_e, c.f_e),
        ("F_l", s.f_l, c.f_l),
        ("F_el", s.f_el, c.f_el),
        ("V", s.visibility, c.visibility),
        ("F_phi", s.f_phi, c.f_phi),
        ("F_bar", s.f_bar, c.f_bar),
    ] {
        writeln!(
            w,
            "{name}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            a.value, a.sigma, b.value, b.sigma
        )?;
    }
    writeln!(w, "SNR\t{:.4}\t\t{:.4}\t", s.snr.value, c.snr.value)?;
    w.flush()?;

    fs::remove_file(marker)
}

/// Validates, simulates and writes artifacts into `dir`.
pub fn run_experiment(
    config: &ExperimentConfig,
    dir: &Path,
    parallel: Option<usize>,
) -> std::result::Result<ExperimentOutcome, CliError> {
    let out = simulate(config, parallel)?;
    write_artifacts(config, &out, dir).map_err(CliError::Io)?;
    Ok(out)
}
