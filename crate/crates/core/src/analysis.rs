//! Count-based estimators: time-bin fidelities, fringe visibility, average
//! fidelity, bound comparisons and signal-to-noise ratios.
//!
//! Uncertainties are one standard deviation under a Poisson model for every
//! count.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::Serialize;

use crate::{Error, Result};

/// Best average fidelity of a classical measure-and-resend memory.
pub const CLASSICAL_BOUND: f64 = 2.0 / 3.0;
/// Average fidelity of the optimal universal quantum cloner.
pub const CLONER_BOUND: f64 = 5.0 / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} +/- {:.6}", self.value, self.sigma)
    }
}

/// `a / (a + b)` with `sigma^2 = a b / (a + b)^3`.
pub fn count_ratio(a: f64, b: f64, what: &'static str) -> Result<Estimate> {
    if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::invalid(what, "counts must be finite and non-negative"));
    }
    let n = a + b;
    if n == 0.0 {
        return Err(Error::ZeroDenominator(what));
    }
    Ok(Estimate::new(a / n, (a * b / (n * n * n)).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeBinFidelity {
    pub early: Estimate,
    pub late: Estimate,
    /// Mean of the two.
    pub mean: Estimate,
}

/// `c_xy` counts detections in bin `x` when `y` was prepared.
pub fn fidelity_el(c_ee: f64, c_le: f64, c_ll: f64, c_el: f64) -> Result<TimeBinFidelity> {
    let early = count_ratio(c_ee, c_le, "F_e")?;
    let late = count_ratio(c_ll, c_el, "F_l")?;
    Ok(TimeBinFidelity {
        early,
        late,
        mean: Estimate::new(0.5 * (early.value + late.value), 0.5 * early.sigma.hypot(late.sigma)),
    })
}

/// Result of fitting `C(θ) = A (1 + V cos(θ - θ0))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringeFit {
    /// Visibility clipped to `[0, 1]`.
    pub visibility: Estimate,
    /// Unclipped fitted visibility.
    pub visibility_raw: f64,
    pub phase_offset: Estimate,
    pub amplitude: Estimate,
    /// Set when the visibility uncertainty exceeds 1.
    pub poorly_constrained: bool,
}

fn largest_circular_gap(phases: &[f64]) -> f64 {
    let mut p: Vec<f64> = phases.iter().map(|x| x.rem_euclid(TAU)).collect();
    p.sort_by(f64::total_cmp);
    let wrap = p[0] + TAU - p[p.len() - 1];
    p.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max)
}

fn distinct_phase_count(phases: &[f64]) -> usize {
    let mut p: Vec<f64> = phases.iter().map(|x| x.rem_euclid(TAU)).collect();
    p.sort_by(f64::total_cmp);
    let mut n = 0;
    for (i, x) in p.iter().enumerate() {
        let dup = p[..i].iter().any(|y| {
            let d = (x - y).abs();
            d.min(TAU - d) < 1e-9
        });
        if !dup {
            n += 1;
        }
    }
    n
}

fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let c = |r: usize, s: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (s1, s2) = ((s + 1) % 3, (s + 2) % 3);
        m[r1][s1] * m[r2][s2] - m[r1][s2] * m[r2][s1]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    let scale = m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    if !det.is_finite() || det.abs() <= 1e-12 * scale.powi(3) {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (s, v) in row.iter_mut().enumerate() {
            *v = c(s, r) / det;
        }
    }
    Some(inv)
}

/// Weighted linear least squares of `a + b cos θ + c sin θ` with weights
/// `1 / max(C, 1)`, then `V = sqrt(b² + c²) / a`, `θ0 = atan2(c, b)`.
pub fn visibility_fit(phases: &[f64], counts: &[f64]) -> Result<FringeFit> {
    if phases.len() != counts.len() {
        return Err(Error::DegenerateFit(format!(
            "{} phases but {} counts",
            phases.len(),
            counts.len()
        )));
    }
    if phases.iter().chain(counts).any(|x| !x.is_finite()) || counts.iter().any(|&c| c < 0.0) {
        return Err(Error::DegenerateFit(
            "phases and counts must be finite, counts non-negative".into(),
        ));
    }
    if distinct_phase_count(phases) < 3 {
        return Err(Error::DegenerateFit("need at least 3 distinct phases".into()));
    }
    if largest_circular_gap(phases) > PI + 1e-9 {
        return Err(Error::DegenerateFit("phases must span at least π".into()));
    }

    let mut xtwx = [[0.0; 3]; 3];
    let mut xtwy = [0.0; 3];
    for (&th, &y) in phases.iter().zip(counts) {
        let x = [1.0, th.cos(), th.sin()];
        let w = 1.0 / y.max(1.0);
        for r in 0..3 {
            xtwy[r] += w * x[r] * y;
            for s in 0..3 {
                xtwx[r][s] += w * x[r] * x[s];
            }
        }
    }
    let cov = invert3(xtwx).ok_or_else(|| Error::DegenerateFit("singular normal matrix".into()))?;
    let beta: Vec<f64> = (0..3).map(|r| (0..3).map(|s| cov[r][s] * xtwy[s]).sum()).collect();
    let (a, b, c) = (beta[0], beta[1], beta[2]);
    if a <= 0.0 {
        return Err(Error::DegenerateFit(format!("fitted mean level {a} is not positive")));
    }
    let r = b.hypot(c);
    let v = r / a;

    let propagate = |g: [f64; 3]| -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += g[i] * cov[i][j] * g[j];
            }
        }
        s.max(0.0).sqrt()
    };
    let (grad_v, grad_th) = if r > 0.0 {
        ([-v / a, b / (a * r), c / (a * r)], [0.0, -c / (r * r), b / (r * r)])
    } else {
        // at V = 0 the phase is undefined; its uncertainty is a full turn
        ([-v / a, 1.0 / a, 0.0], [0.0, 0.0, 0.0])
    };
    let sigma_v = propagate(grad_v);
    let sigma_th = if r > 0.0 { propagate(grad_th) } else { PI };
    Ok(FringeFit {
        visibility: Estimate::new(v.clamp(0.0, 1.0), sigma_v),
        visibility_raw: v,
        phase_offset: Estimate::new(c.atan2(b), sigma_th),
        amplitude: Estimate::new(a, cov[0][0].max(0.0).sqrt()),
        poorly_constrained: sigma_v > 1.0,
    })
}

/// `F = (1 + V) / 2`, `sigma = sigma_V / 2`.
pub fn fidelity_from_visibility(v: Estimate) -> Result<Estimate> {
    if !(-1.0..=1.0).contains(&v.value) {
        return Err(Error::invalid("visibility", format!("{} is outside [-1, 1]", v.value)));
    }
    Ok(Estimate::new(0.5 * (1.0 + v.value), 0.5 * v.sigma))
}

/// `(F_el + 2 F_phi) / 3` with `sigma^2 = (sigma_el^2 + 4 sigma_phi^2) / 9`.
pub fn average_fidelity(f_el: Estimate, f_phi: Estimate) -> Estimate {
    Estimate::new(
        (f_el.value + 2.0 * f_phi.value) / 3.0,
        f_el.sigma.hypot(2.0 * f_phi.sigma) / 3.0,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundVerdict {
    pub bound: f64,
    /// `(F - bound) / sigma`.
    pub sigmas: f64,
    pub exceeded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdicts {
    pub classical: BoundVerdict,
    pub cloner: BoundVerdict,
}

pub fn bound_verdict(f_bar: Estimate) -> Result<Verdicts> {
    if !(f_bar.sigma > 0.0 && f_bar.sigma.is_finite()) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    let against = |bound: f64| {
        let sigmas = (f_bar.value - bound) / f_bar.sigma;
        BoundVerdict {
            bound,
            sigmas,
            exceeded: sigmas > 0.0,
        }
    };
    Ok(Verdicts {
        classical: against(CLASSICAL_BOUND),
        cloner: against(CLONER_BOUND),
    })
}

/// Signal-window counts over background counts in a window of equal width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Snr {
    pub value: f64,
    /// Set when no background was seen; `value` then treats the background
    /// as one count and is a lower bound.
    pub lower_bound: bool,
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lower_bound {
            write!(f, ">= {:.4}", self.value)
        } else {
            write!(f, "{:.4}", self.value)
        }
    }
}

pub fn snr(signal: f64, background: f64) -> Snr {
    if background > 0.0 {
        Snr {
            value: signal / background,
            lower_bound: false,
        }
    } else {
        Snr {
            value: signal,
            lower_bound: true,
        }
    }
}

/// Counts behind one fidelity report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportCounts {
    /// Detections in the early / late window with `|e>` stored.
    pub early_given_early: f64,
    pub late_given_early: f64,
    /// Detections in the late / early window with `|l>` stored.
    pub late_given_late: f64,
    pub early_given_late: f64,
    /// Analyzer phases and interference-window counts.
    pub phases: Vec<f64>,
    pub fringe: Vec<f64>,
    /// Signal and equal-width background counts of the storage runs.
    pub signal: f64,
    pub background: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityReport {
    pub f_e: Estimate,
    pub f_l: Estimate,
    pub f_el: Estimate,
    pub visibility: Estimate,
    pub f_phi: Estimate,
    pub f_bar: Estimate,
    pub fringe: FringeFit,
    pub snr: Snr,
    pub verdicts: Verdicts,
}

impl FidelityReport {
    pub fn from_counts(c: &ReportCounts) -> Result<Self> {
        let el = fidelity_el(
            c.early_given_early,
            c.late_given_early,
            c.late_given_late,
            c.early_given_late,
        )?;
        let fringe = visibility_fit(&c.phases, &c.fringe)?;
        let f_phi = fidelity_from_visibility(fringe.visibility)?;
        let f_bar = average_fidelity(el.mean, f_phi);
        let report = Self {
            f_e: el.early,
            f_l: el.late,
            f_el: el.mean,
            visibility: fringe.visibility,
            f_phi,
            f_bar,
            fringe,
            snr: snr(c.signal, c.background),
            verdicts: bound_verdict(f_bar)?,
        };
        report.check()?;
        Ok(report)
    }

    /// Verifies the estimator identities and ranges.
    pub fn check(&self) -> Result<()> {
        let fids = [self.f_e, self.f_l, self.f_el, self.f_phi, self.f_bar, self.visibility];
        if fids.iter().any(|f| !(0.0..=1.0).contains(&f.value)) {
            return Err(Error::invalid("report", "a fidelity lies outside [0, 1]"));
        }
        let ids = [
            ("F_el", self.f_el.value, 0.5 * (self.f_e.value + self.f_l.value)),
            ("F_phi", self.f_phi.value, 0.5 * (1.0 + self.visibility.value)),
            (
                "F_bar",
                self.f_bar.value,
                (self.f_el.value + 2.0 * self.f_phi.value) / 3.0,
            ),
        ];
        for (name, got, want) in ids {
            if (got - want).abs() > 1e-12 {
                return Err(Error::invalid(
                    name,
                    format!("{got} violates its defining identity ({want})"),
                ));
            }
        }
        Ok(())
    }

    /// `key: value` lines, keys prefixed with `prefix`.
    pub fn key_values(&self, prefix: &str) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut est = |k: &str, e: Estimate| {
            out.push((format!("{prefix}{k}"), format!("{:.6}", e.value)));
            out.push((format!("{prefix}{k}_sigma"), format!("{:.6}", e.sigma)));
        };
        est("F_e", self.f_e);
        est("F_l", self.f_l);
        est("F_el", self.f_el);
        est("V", self.visibility);
        est("F_phi", self.f_phi);
        est("F_bar", self.f_bar);
        est("theta0", self.fringe.phase_offset);
        out.push((format!("{prefix}V_raw"), format!("{:.6}", self.fringe.visibility_raw)));
        out.push((
            format!("{prefix}V_poorly_constrained"),
            self.fringe.poorly_constrained.to_string(),
        ));
        out.push((format!("{prefix}snr"), format!("{:.4}", self.snr.value)));
        out.push((format!("{prefix}snr_lower_bound"), self.snr.lower_bound.to_string()));
        for (name, v) in [("classical", self.verdicts.classical), ("cloner", self.verdicts.cloner)] {
            out.push((format!("{prefix}{name}_bound"), format!("{:.6}", v.bound)));
            out.push((format!("{prefix}{name}_sigmas"), format!("{:.3}", v.sigmas)));
            out.push((format!("{prefix}{name}_exceeded"), v.exceeded.to_string()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn ratio_examples() {
        let half = count_ratio(50.0, 50.0, "F").unwrap();
        assert_eq!(half.value, 0.5);
        assert!(close(half.sigma, 0.05, 1e-15));
        let one = count_ratio(10.0, 0.0, "F").unwrap();
        assert_eq!((one.value, one.sigma), (1.0, 0.0));
        assert!(matches!(
            count_ratio(0.0, 0.0, "F_e"),
            Err(Error::ZeroDenominator("F_e"))
        ));
    }

    #[test]
    fn time_bin_mean_and_sigma() {
        let f = fidelity_el(8652.0, 1348.0, 8376.0, 1624.0).unwrap();
        assert!(close(f.early.value, 0.8652, 1e-12));
        assert!(close(f.late.value, 0.8376, 1e-12));
        assert!(close(f.mean.value, 0.8514, 1e-12));
        assert!(close(f.mean.sigma, 0.5 * f.early.sigma.hypot(f.late.sigma), 1e-15));
    }

    #[test]
    fn perfect_fringe() {
        let ph = [0.0, 0.5 * PI, PI, 1.5 * PI];
        let fit = visibility_fit(&ph, &[200.0, 100.0, 0.0, 100.0]).unwrap();
        assert!(close(fit.visibility.value, 1.0, 1e-12));
        assert!(close(fit.phase_offset.value, 0.0, 1e-12));
        assert!(close(fit.amplitude.value, 100.0, 1e-9));
    }

    #[test]
    fn noiseless_fringe_recovered() {
        let (a, v, th0) = (1234.0, 0.701, 0.4);
        let ph: Vec<f64> = (0..7).map(|k| k as f64 * TAU / 7.0).collect();
        let c: Vec<f64> = ph.iter().map(|t| a * (1.0 + v * (t - th0).cos())).collect();
        let fit = visibility_fit(&ph, &c).unwrap();
        assert!(close(fit.visibility.value, v, 1e-9));
        assert!(close(fit.phase_offset.value, th0, 1e-9));
        assert!(close(fit.amplitude.value, a, 1e-7));
    }

    #[test]
    fn fit_rejects_degenerate_designs() {
        assert!(visibility_fit(&[0.0, 0.0, PI], &[1.0, 2.0, 3.0]).is_err());
        assert!(visibility_fit(&[0.0, 0.3, 0.6], &[1.0, 2.0, 3.0]).is_err());
        assert!(visibility_fit(&[0.0, 1.0], &[1.0]).is_err());
        assert!(visibility_fit(&[0.0, 2.0 * PI, PI, 0.5 * PI], &[1.0, 1.0, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn low_counts_flag_poor_constraint() {
        let ph = [0.0, 0.5 * PI, PI, 1.5 * PI];
        let fit = visibility_fit(&ph, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(fit.poorly_constrained);
        assert!(fit.visibility.value <= 1.0);
    }

    #[test]
    fn visibility_to_fidelity() {
        let f = fidelity_from_visibility(Estimate::new(0.701, 0.059)).unwrap();
        assert!(close(f.value, 0.8505, 1e-12));
        assert!(close(f.sigma, 0.0295, 1e-12));
        assert_eq!(fidelity_from_visibility(Estimate::new(1.0, 0.0)).unwrap().value, 1.0);
        assert!(close(
            fidelity_from_visibility(Estimate::new(0.364, 0.0)).unwrap().value,
            0.682,
            1e-12
        ));
        assert!(fidelity_from_visibility(Estimate::new(1.2, 0.0)).is_err());
    }

    #[test]
    fn averages() {
        let f = average_fidelity(Estimate::new(0.954, 0.015), Estimate::new(0.851, 0.030));
        assert!(close(f.value, 0.8853333333333333, 1e-12));
        assert!(close(
            f.sigma,
            (0.015f64.powi(2) + 4.0 * 0.03f64.powi(2)).sqrt() / 3.0,
            1e-15
        ));
        let g = average_fidelity(Estimate::new(0.8514, 0.0004), Estimate::new(0.682, 0.02));
        assert!(close(g.value, 0.7384666666666667, 1e-12));
        assert_eq!(
            average_fidelity(Estimate::new(1.0, 0.0), Estimate::new(1.0, 0.0)).value,
            1.0
        );
    }

    #[test]
    fn verdicts() {
        let v = bound_verdict(Estimate::new(0.885, 0.020)).unwrap();
        assert!(close(v.classical.sigmas, 10.916666666666666, 1e-9));
        assert!(close(v.cloner.sigmas, 2.583333333333333, 1e-9));
        assert!(v.classical.exceeded && v.cloner.exceeded);
        let at = bound_verdict(Estimate::new(2.0 / 3.0, 0.01)).unwrap();
        assert_eq!(at.classical.sigmas, 0.0);
        assert!(!at.classical.exceeded);
        let w = bound_verdict(Estimate::new(0.738, 0.029)).unwrap();
        assert!(w.classical.exceeded && !w.cloner.exceeded);
        assert!(bound_verdict(Estimate::new(0.9, 0.0)).is_err());
    }

    #[test]
    fn snr_examples() {
        assert_eq!(snr(100.0, 20.0).value, 5.0);
        assert_eq!(snr(220.0, 10.0).value, 22.0);
        assert_eq!(snr(7.0, 7.0).value, 1.0);
        let lb = snr(30.0, 0.0);
        assert!(lb.lower_bound && lb.value == 30.0);
    }

    #[test]
    fn report_identities_hold() {
        let counts = ReportCounts {
            early_given_early: 900.0,
            late_given_early: 100.0,
            late_given_late: 880.0,
            early_given_late: 120.0,
            phases: vec![0.0, 0.5 * PI, PI, 1.5 * PI],
            fringe: vec![190.0, 105.0, 12.0, 98.0],
            signal: 900.0,
            background: 40.0,
        };
        let r = FidelityReport::from_counts(&counts).unwrap();
        r.check().unwrap();
        let keys: Vec<String> = r.key_values("").into_iter().map(|(k, _)| k).collect();
        for k in [
            "F_e",
            "F_l",
            "F_el",
            "V",
            "F_phi",
            "F_bar",
            "classical_exceeded",
            "cloner_exceeded",
        ] {
            assert!(keys.iter().any(|x| x == k), "missing {k}");
        }
    }
}
