use std::io::{self, Write};

use serde::Serialize;

use super::config::{ConfigError, Diagnostic, ExperimentConfig};
use super::run::simulate;
use super::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub efficiency: f64,
    pub snr_singles: f64,
    pub snr_conditional: f64,
    pub f_bar: f64,
    pub f_bar_conditional: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# parameter: {}", self.parameter)?;
        writeln!(
            w,
            "value\tefficiency\tsnr_singles\tsnr_conditional\tF_bar\tF_bar_conditional"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{}\t{:.6}\t{:.4}\t{:.4}\t{:.6}\t{:.6}",
                r.value, r.efficiency, r.snr_singles, r.snr_conditional, r.f_bar, r.f_bar_conditional
            )?;
        }
        Ok(())
    }
}

fn bad(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(vec![Diagnostic {
        path: path.to_string(),
        message: message.into(),
    }])
}

/// Copy of `config` with the numeric key at dotted `path` set to `value`.
pub fn with_value(config: &ExperimentConfig, path: &str, value: f64) -> Result<ExperimentConfig, ConfigError> {
    let mut root = toml::Value::try_from(config).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut node = &mut root;
    for key in path.split('.') {
        node = node
            .get_mut(key)
            .ok_or_else(|| bad(path, "no such key in the configuration"))?;
    }
    *node = match node {
        toml::Value::Float(_) => toml::Value::Float(value),
        toml::Value::Integer(_) if value.fract() == 0.0 && value.abs() < 9.0e15 => toml::Value::Integer(value as i64),
        toml::Value::Integer(_) => return Err(bad(path, format!("{value} is not an integer"))),
        _ => return Err(bad(path, "not a numeric key")),
    };
    root.try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
}

/// Runs the full protocol once per value of the key at `path`.
pub fn sweep(
    config: &ExperimentConfig,
    path: &str,
    values: &[f64],
    parallel: Option<usize>,
) -> Result<SweepTable, CliError> {
    let configs = values
        .iter()
        .map(|&v| {
            let c = with_value(config, path, v)?;
            let diags = c.validate();
            if diags.is_empty() {
                Ok(c)
            } else {
                Err(ConfigError::Invalid(
                    diags
                        .into_iter()
                        .map(|d| Diagnostic {
                            path: d.path,
                            message: format!("{} (with {path} = {v})", d.message),
                        })
                        .collect(),
                ))
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::Config)?;
    let mut rows = Vec::with_capacity(values.len());
    for (c, &v) in configs.iter().zip(values) {
        let out = simulate(c, parallel)?;
        rows.push(SweepRow {
            value: v,
            efficiency: out.storage_efficiency,
            snr_singles: out.singles.report.snr.value,
            snr_conditional: out.conditional.report.snr.value,
            f_bar: out.singles.report.f_bar.value,
            f_bar_conditional: out.conditional.report.f_bar.value,
        });
    }
    Ok(SweepTable {
        parameter: path.to_string(),
        rows,
    })
}
