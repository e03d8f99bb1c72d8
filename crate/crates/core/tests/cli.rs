use std::process::Command;

use afc_qmem::cli::{run_experiment, sweep, ExperimentConfig, INCOMPLETE_MARKER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_afc-qmem"))
}

/// Short timing cycles and a smaller spectral grid keep runs fast.
fn quick() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.grid.n_points_log2 = 17;
    c.timing.prep_ms = 1.0;
    c.timing.wait_ms = 0.2;
    c.timing.storage_ms = 4.0;
    c.duration_s = 0.0208;
    c
}

#[test]
fn default_depth_stores_two_percent() {
    let c = ExperimentConfig::default();
    let echo = c.optics().unwrap().single_echo(&c.comb_spec()).unwrap();
    assert!((echo.echo_efficiency - 0.02).abs() < 2e-4, "{}", echo.echo_efficiency);
}

#[test]
fn ideal_detectors_give_near_unit_conditional_fidelity() {
    let mut c = quick();
    c.duration_s = 0.0416;
    c.signal_detector.dark_count_rate_hz = 0.0;
    c.signal_detector.efficiency = 1.0;
    c.signal_detector.jitter_fwhm_ps = 0.0;
    c.herald_detector.dark_probability_per_gate = 0.0;
    c.herald_detector.efficiency = 1.0;
    c.herald_detector.jitter_fwhm_ps = 0.0;
    c.signal_channel.loss_db = 0.0;
    c.herald_channel.loss_db = 0.0;
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&c, dir.path(), None).unwrap();
    let r = &out.conditional.report;
    assert!(
        r.f_bar.value > 0.99,
        "F*_bar = {} (V = {})",
        r.f_bar.value,
        r.visibility.value
    );
    assert!(r.verdicts.classical.exceeded && r.verdicts.cloner.exceeded);

    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains(&format!("config_digest: {}", c.digest())));
    for mode in ["singles", "conditional"] {
        for key in [
            "F_e",
            "F_l",
            "F_el",
            "V",
            "F_phi",
            "F_bar",
            "classical_exceeded",
            "cloner_exceeded",
            "snr",
        ] {
            assert!(report.contains(&format!("\n{mode}.{key}: ")), "missing {mode}.{key}");
        }
    }
    for f in [
        "fringe.tsv",
        "report.tsv",
        "config.toml",
        "events_early.tsv",
        "hist_late_conditional.tsv",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(!dir.path().join(INCOMPLETE_MARKER).exists());

    // The saved config regenerates the same digest.
    let saved = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(saved.digest(), c.digest());
}

#[test]
fn sweep_produces_one_row_per_value() {
    let t = sweep(
        &quick(),
        "herald_detector.dark_probability_per_gate",
        &[0.05, 0.005],
        None,
    )
    .unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.rows[0].efficiency, t.rows[1].efficiency);
    assert!(t.rows.iter().all(|r| r.snr_conditional > r.snr_singles));
    assert!(sweep(&quick(), "comb.no_such_key", &[1.0], None).is_err());
}

#[test]
fn binary_exit_codes() {
    assert_eq!(bin().output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["validate"]).output().unwrap().status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[comb]\ntooth_width_mhz = 170.0\n").unwrap();
    let out = bin().args(["validate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("finesse"));

    std::fs::write(&bad, "[grid]\nspan_ghz = \"wide\"\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("span_ghz"));

    // A file where the output directory should be is a runtime failure.
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "").unwrap();
    let cfg = dir.path().join("quick.toml");
    std::fs::write(&cfg, quick().to_toml()).unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(blocker.join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}
