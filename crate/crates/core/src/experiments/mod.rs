//! Experiment descriptions, result tables and the figure presets.
//!
//! A run is described by an [`ExperimentConfig`], usually read from a TOML
//! file holding one `[[run]]` table per run. Results are flat
//! [`ResultRow`]s written as CSV.

mod optimize;
mod preset;

use std::io::{Read, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::FadingProfile;
use crate::montecarlo::{SweepResult, Target};
use crate::protocol::{AllocationPolicy, ProtocolConfig};
use crate::rates::Scheme;

pub use optimize::{optimize_rates, product_grid, RateBank, RateChoice};
pub use preset::{run_preset, Preset, PresetOverrides};

/// Column names of the result CSV, in order.
pub const CSV_HEADER: &str = "snr_db,scheme,policy,k,m,user,metric,mc_value,mc_ci95,analytic_value,trials,seed";

/// Parses `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_axis(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::config(format!("cannot parse `{spec}` as start:step:stop or a comma-separated list"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [start, step, stop] => {
            let (a, h, b) = (num(start)?, num(step)?, num(stop)?);
            if !(h > 0.0 && b >= a && a.is_finite() && b.is_finite()) {
                return Err(Error::config(format!("range `{spec}` needs a positive step and start <= stop")));
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            if n > 1_000_000 {
                return Err(Error::config(format!("range `{spec}` has too many points")));
            }
            (0..=n).map(|i| a + i as f64 * h).collect()
        }
        [_] => spec.split(',').map(num).collect::<Result<Vec<f64>>>()?,
        _ => return Err(bad()),
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(values)
}

/// Resolves a policy name. `coord` means the default coordinated policy for
/// `users` users.
pub fn parse_policy(name: &str, users: usize) -> Result<AllocationPolicy> {
    match name.to_ascii_lowercase().as_str() {
        "coord" | "coordinated" => Ok(AllocationPolicy::coordinated_for(users)),
        other => other.parse(),
    }
}

/// Either an explicit list or an axis string such as `"0:2:30"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    List(Vec<f64>),
    Range(String),
}

impl AxisSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            AxisSpec::List(v) if v.is_empty() => Err(Error::config("empty axis")),
            AxisSpec::List(v) => Ok(v.clone()),
            AxisSpec::Range(s) => parse_axis(s),
        }
    }
}

/// One run of a batch file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub scheme: Scheme,
    /// `coord`, `noncoord` or an explicit policy name.
    pub policy: String,
    pub k: usize,
    pub m: u32,
    /// Fading parameter of each band; all ones when omitted.
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    /// Transmit antennas.
    #[serde(default = "one")]
    pub u: usize,
    /// Receive antennas.
    #[serde(default = "one")]
    pub v: usize,
    /// Initial rates; all ones when omitted.
    #[serde(default)]
    pub rates: Option<Vec<f64>>,
    /// Per-user rate values to search; the grid is their Cartesian power.
    #[serde(default)]
    pub rate_grid: Option<AxisSpec>,
    pub snr_db: AxisSpec,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchFile {
    run: Vec<ExperimentConfig>,
}

impl ExperimentConfig {
    /// Reads every `[[run]]` table of a batch file.
    pub fn parse_batch(text: &str) -> Result<Vec<ExperimentConfig>> {
        let file: BatchFile = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        for c in &file.run {
            c.protocol()?;
            c.policy()?;
            c.snr_axis()?;
            c.grid()?;
        }
        Ok(file.run)
    }

    pub fn policy(&self) -> Result<AllocationPolicy> {
        parse_policy(&self.policy, self.k)
    }

    pub fn snr_axis(&self) -> Result<Vec<f64>> {
        let axis = self.snr_db.values()?;
        if axis.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("the SNR axis must be strictly increasing"));
        }
        Ok(axis)
    }

    /// Rate vectors to search, if a grid was given.
    pub fn grid(&self) -> Result<Option<Vec<Vec<f64>>>> {
        match &self.rate_grid {
            None => Ok(None),
            Some(g) => Ok(Some(product_grid(&g.values()?, self.k))),
        }
    }

    /// Protocol configuration at 0 dB.
    pub fn protocol(&self) -> Result<ProtocolConfig> {
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        let lambdas = self.lambdas.clone().unwrap_or_else(|| vec![1.0; self.k]);
        let rates = self.rates.clone().unwrap_or_else(|| vec![1.0; self.k]);
        if lambdas.len() != self.k || rates.len() != self.k {
            return Err(Error::config(format!("k = {} but lambdas and rates must have k entries", self.k)));
        }
        let profile = FadingProfile::new(lambdas, self.u, self.v)?;
        ProtocolConfig::new(profile, rates, self.m, 1.0, self.scheme)
    }

    /// Runs the experiment: a rate search per SNR point when a grid is set,
    /// a plain sweep otherwise.
    pub fn execute(&self) -> Result<Vec<ResultRow>> {
        let config = self.protocol()?;
        let policy = self.policy()?;
        let axis = self.snr_axis()?;
        let label = RowLabel::new(&config, policy, self.seed);
        match self.grid()? {
            None => {
                let s = crate::montecarlo::sweep(&config, policy, &axis, self.trials, self.seed)?;
                Ok(sweep_rows(&s, &label))
            }
            Some(grid) => {
                let mut rows = Vec::new();
                for &snr in &axis {
                    let c = config.with_snr_db(snr);
                    let choice = optimize_rates(&c, policy, &grid, self.trials, self.seed)?;
                    rows.extend(choice_rows(&c, &choice, snr, &label, self.trials, self.seed)?);
                }
                Ok(rows)
            }
        }
    }
}

/// One line of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub snr_db: f64,
    pub scheme: String,
    pub policy: String,
    pub k: usize,
    pub m: u32,
    /// One-based user index; empty for system-wide metrics.
    pub user: Option<usize>,
    pub metric: String,
    pub mc_value: Option<f64>,
    pub mc_ci95: Option<f64>,
    pub analytic_value: Option<f64>,
    pub trials: Option<u64>,
    pub seed: u64,
}

impl ResultRow {
    /// Whether the metric is a probability and must lie in `[0, 1]`.
    pub fn is_probability(&self) -> bool {
        ["outage", "mean_outage", "event", "terminal"]
            .iter()
            .any(|p| self.metric == *p || self.metric.starts_with(&format!("{p}[")))
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::config(format!("unexpected CSV header `{}`", header.join(","))));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Fixed columns shared by all rows of one configuration.
#[derive(Debug, Clone)]
pub(crate) struct RowLabel {
    scheme: String,
    policy: String,
    k: usize,
    m: u32,
    seed: u64,
}

impl RowLabel {
    pub(crate) fn new(config: &ProtocolConfig, policy: AllocationPolicy, seed: u64) -> Self {
        let p = &config.profile;
        let scheme = if p.is_siso() {
            config.scheme.to_string()
        } else {
            format!("{}-mimo{}x{}", config.scheme, p.tx_antennas(), p.rx_antennas())
        };
        Self {
            scheme,
            policy: policy.to_string(),
            k: config.users(),
            m: config.max_rounds,
            seed,
        }
    }

    pub(crate) fn row(&self, snr_db: f64, user: Option<usize>, metric: impl Into<String>) -> ResultRow {
        ResultRow {
            snr_db,
            scheme: self.scheme.clone(),
            policy: self.policy.clone(),
            k: self.k,
            m: self.m,
            user,
            metric: metric.into(),
            mc_value: None,
            mc_ci95: None,
            analytic_value: None,
            trials: None,
            seed: self.seed,
        }
    }
}

/// Metric name and one-based user of a target.
pub(crate) fn metric_of(target: &Target) -> (String, Option<usize>) {
    match target {
        Target::Outage(u) => ("outage".into(), Some(u + 1)),
        Target::MeanOutage => ("mean_outage".into(), None),
        Target::OutageRate(u) => ("outage_rate".into(), Some(u + 1)),
        Target::Throughput => ("throughput".into(), None),
        Target::UserThroughput(u) => ("throughput".into(), Some(u + 1)),
        Target::Fairness => ("fairness".into(), None),
        Target::EventProb(l) => (format!("event[{l}]"), None),
        Target::TerminalEvent(l) => (format!("terminal[{l}]"), None),
        Target::Slope => ("slope".into(), None),
    }
}

/// Every estimate of every sweep point, with analytic values where known.
pub(crate) fn sweep_rows(sweep: &SweepResult, label: &RowLabel) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for p in &sweep.points {
        for (target, e) in &p.estimates.estimates {
            let (metric, user) = metric_of(target);
            let mut row = label.row(p.snr_db, user, metric);
            row.mc_value = Some(e.point);
            row.mc_ci95 = Some(e.half_width_95);
            row.analytic_value = p.analytic_value(target);
            row.trials = Some(e.trials);
            rows.push(row);
        }
    }
    rows
}

/// Rows for a rate search: the chosen rates and the throughput there, with
/// a fresh Monte Carlo estimate at the chosen rates.
pub(crate) fn choice_rows(
    config: &ProtocolConfig,
    choice: &RateChoice,
    snr_db: f64,
    label: &RowLabel,
    trials: u64,
    seed: u64,
) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for (u, r) in choice.rates.iter().enumerate() {
        let mut row = label.row(snr_db, Some(u + 1), "opt_rate");
        row.analytic_value = Some(*r);
        rows.push(row);
    }
    let chosen = ProtocolConfig {
        rates: choice.rates.clone(),
        ..config.clone()
    };
    let policy: AllocationPolicy = label.policy.parse()?;
    let e = crate::montecarlo::estimate(&chosen, policy, trials, seed)?;
    let t = e.get(&Target::Throughput).expect("throughput is always estimated");
    let mut row = label.row(snr_db, None, "opt_throughput");
    row.mc_value = Some(t.point);
    row.mc_ci95 = Some(t.half_width_95);
    row.analytic_value = choice.analytic.then_some(choice.throughput);
    row.trials = Some(trials);
    rows.push(row);
    Ok(rows)
}
