//! Parameterizations of the published figures.

use std::fmt;
use std::str::FromStr;

use crate::analytic::diversity_gain;
use crate::error::{Error, Result};
use crate::fading::FadingProfile;
use crate::montecarlo::{energy_gain_at_outage, fit_slope_for, sweep, Target};
use crate::protocol::{AllocationPolicy, ProtocolConfig};
use crate::rates::Scheme;

use super::{choice_rows, optimize_rates, parse_axis, product_grid, sweep_rows, ResultRow, RowLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Outage against SNR, two users, several round limits.
    Fig1a,
    /// Fairness ratio against the second user's fading parameter.
    Fig1b,
    /// Throughput with optimized rates against SNR, SISO and 2x2 MIMO.
    Fig1c,
    /// Outage against SNR for three users.
    Fig2,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Fig1a, Preset::Fig1b, Preset::Fig1c, Preset::Fig2];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1a => "fig1a",
            Preset::Fig1b => "fig1b",
            Preset::Fig1c => "fig1c",
            Preset::Fig2 => "fig2",
        }
    }

    pub fn default_axis(self) -> Vec<f64> {
        let spec = match self {
            Preset::Fig1a | Preset::Fig1c => "0:2:30",
            Preset::Fig1b => "0:10:30",
            Preset::Fig2 => "0:1:30",
        };
        parse_axis(spec).expect("valid built-in axis")
    }

    pub fn default_trials(self) -> u64 {
        match self {
            Preset::Fig1c => 100_000,
            _ => 1_000_000,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::config(format!("unknown preset `{s}` (expected fig1a, fig1b, fig1c or fig2)")))
    }
}

/// Settings a caller may change on any preset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PresetOverrides {
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub snr_db: Option<Vec<f64>>,
    /// Per-user rate values searched by `fig1c`.
    pub rate_values: Option<Vec<f64>>,
    /// Round limits of `fig1a`.
    pub max_rounds: Option<Vec<u32>>,
    /// Second-user fading parameters of `fig1b`.
    pub lambda2: Option<Vec<f64>>,
}

/// Default per-user rate values of the `fig1c` search.
pub const FIG1C_RATES: &str = "0.25:0.25:8";

/// Outage level at which `fig2` reports the coordination gain.
pub const FIG2_EPSILON: f64 = 1e-4;

/// Runs a preset and returns its rows.
pub fn run_preset(preset: Preset, overrides: &PresetOverrides) -> Result<Vec<ResultRow>> {
    let trials = overrides.trials.unwrap_or(preset.default_trials());
    let seed = overrides.seed.unwrap_or(42);
    let axis = overrides.snr_db.clone().unwrap_or_else(|| preset.default_axis());
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let siso = |rates: Vec<f64>, m: u32, scheme: Scheme, lambdas: Vec<f64>| {
        ProtocolConfig::new(FadingProfile::siso(lambdas)?, rates, m, 1.0, scheme)
    };
    let both = |k: usize| [AllocationPolicy::NonCoordinated, AllocationPolicy::coordinated_for(k)];
    let mut rows = Vec::new();
    match preset {
        Preset::Fig1a => {
            for &m in overrides.max_rounds.as_deref().unwrap_or(&[2, 3]) {
                let config = siso(vec![1.0; 2], m, Scheme::Inr, vec![1.0; 2])?;
                for policy in both(2) {
                    let label = RowLabel::new(&config, policy, seed);
                    let s = sweep(&config, policy, &axis, trials, seed)?;
                    rows.extend(sweep_rows(&s, &label));
                    let donors = u32::from(policy.is_coordinated());
                    let mut row = label.row(*axis.last().expect("nonempty axis"), None, "slope");
                    row.analytic_value = Some(-f64::from(diversity_gain(donors, m)));
                    match fit_slope_for(&s, &Target::MeanOutage, 2.0) {
                        Ok(slope) => row.mc_value = Some(slope),
                        Err(e) => log::warn!("{preset} {policy} M={m}: {e}"),
                    }
                    rows.push(row);
                }
            }
        }
        Preset::Fig1b => {
            for &l2 in overrides.lambda2.as_deref().unwrap_or(&[1.0, 2.0, 4.0, 8.0]) {
                let config = siso(vec![1.0; 2], 2, Scheme::Inr, vec![1.0, l2])?;
                for policy in both(2) {
                    let label = RowLabel::new(&config, policy, seed);
                    let s = sweep(&config, policy, &axis, trials, seed)?;
                    for p in &s.points {
                        let mut row = label.row(p.snr_db, None, format!("fairness[lambda2={l2}]"));
                        if let Some(e) = p.estimates.get(&Target::Fairness) {
                            row.mc_value = Some(e.point);
                            row.mc_ci95 = Some(e.half_width_95);
                        }
                        row.analytic_value = p.analytic_value(&Target::Fairness);
                        row.trials = Some(trials);
                        rows.push(row);
                    }
                }
            }
        }
        Preset::Fig1c => {
            let values = match &overrides.rate_values {
                Some(v) => v.clone(),
                None => parse_axis(FIG1C_RATES)?,
            };
            let grid = product_grid(&values, 2);
            for antennas in [1, 2] {
                for scheme in [Scheme::Rtd, Scheme::Inr] {
                    let profile = FadingProfile::new(vec![1.0; 2], antennas, antennas)?;
                    let config = ProtocolConfig::new(profile, vec![1.0; 2], 2, 1.0, scheme)?;
                    for policy in both(2) {
                        let label = RowLabel::new(&config, policy, seed);
                        for &snr in &axis {
                            let c = config.with_snr_db(snr);
                            log::info!("{preset} {scheme} {antennas}x{antennas} {policy} at {snr} dB");
                            let choice = optimize_rates(&c, policy, &grid, trials, seed)?;
                            rows.extend(choice_rows(&c, &choice, snr, &label, trials, seed)?);
                        }
                    }
                }
            }
        }
        Preset::Fig2 => {
            for rate in [1.0, 2.0] {
                for scheme in [Scheme::Rtd, Scheme::Inr] {
                    let config = siso(vec![rate; 3], 2, scheme, vec![1.0; 3])?;
                    let [plain, coord] = both(3);
                    let mut sweeps = Vec::new();
                    for policy in [plain, coord] {
                        let label = RowLabel::new(&config, policy, seed);
                        let s = sweep(&config, policy, &axis, trials, seed)?;
                        rows.extend(sweep_rows(&s, &label).into_iter().filter(|r| !r.metric.starts_with("event")));
                        sweeps.push(s);
                    }
                    let label = RowLabel::new(&config, coord, seed);
                    let mut row = label.row(
                        *axis.last().expect("nonempty axis"),
                        None,
                        format!("energy_gain_db[R={rate},eps={FIG2_EPSILON}]"),
                    );
                    match energy_gain_at_outage(&sweeps[0], &sweeps[1], FIG2_EPSILON) {
                        Ok(g) => row.mc_value = Some(g),
                        Err(e) => log::warn!("{preset} {scheme} R={rate}: {e}"),
                    }
                    row.trials = Some(trials);
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}
