use crate::analytic::{analytic_summary, AnalyticSummary};
use crate::error::{Error, Result};
use crate::protocol::{AllocationPolicy, ProtocolConfig};

use super::{estimate, EstimateSet, Target};

/// One SNR point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub estimates: EstimateSet,
    /// Closed-form counterparts where the configuration admits them.
    pub analytic: Option<AnalyticSummary>,
}

impl SweepPoint {
    /// Analytic value of `target`, if known.
    pub fn analytic_value(&self, target: &Target) -> Option<f64> {
        let a = self.analytic.as_ref()?;
        match target {
            Target::Outage(u) => a.outage.get(*u).copied(),
            Target::MeanOutage => Some(a.outage.iter().sum::<f64>() / a.outage.len() as f64),
            Target::UserThroughput(u) => a.user_throughput.get(*u).copied(),
            Target::Throughput => Some(a.throughput()),
            Target::Fairness => a.fairness(),
            Target::OutageRate(u) => a.events.as_ref().map(|e| e.outage_rate(*u)),
            Target::EventProb(l) => a.events.as_ref().map(|e| e.slot_rate(l)),
            Target::TerminalEvent(l) => a.events.as_ref().map(|e| e.packet.get(l).copied().unwrap_or(0.0)),
            Target::Slope => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub policy: AllocationPolicy,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn axis(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.snr_db).collect()
    }

    /// `(snr_db, point estimate, observed events)` of a proportion target.
    fn curve(&self, target: &Target) -> Vec<(f64, f64, u64)> {
        self.points
            .iter()
            .filter_map(|p| {
                let e = p.estimates.get(target)?;
                let events = (e.point * e.trials as f64).round() as u64;
                Some((p.snr_db, e.point, events))
            })
            .collect()
    }
}

/// Estimates at every SNR point with the same seed, so neighbouring points
/// see the same fading draws.
pub fn sweep(
    template: &ProtocolConfig,
    policy: AllocationPolicy,
    snr_points_db: &[f64],
    n_trials: u64,
    master_seed: u64,
) -> Result<SweepResult> {
    let budget: Vec<(f64, u64)> = snr_points_db.iter().map(|&s| (s, n_trials)).collect();
    sweep_with_budget(template, policy, &budget, master_seed)
}

/// As [`sweep`] with a trial count per point.
pub fn sweep_with_budget(
    template: &ProtocolConfig,
    policy: AllocationPolicy,
    points: &[(f64, u64)],
    master_seed: u64,
) -> Result<SweepResult> {
    if points.is_empty() {
        return Err(Error::config("the SNR axis is empty"));
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::config("the SNR axis must be strictly increasing"));
    }
    let points = points
        .iter()
        .map(|&(snr_db, trials)| {
            let config = template.with_snr_db(snr_db);
            log::info!("{policy} at {snr_db} dB: {trials} trials");
            Ok(SweepPoint {
                snr_db,
                estimates: estimate(&config, policy, trials, master_seed)?,
                analytic: analytic_summary(&config, policy)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult { policy, points })
}

/// Points with fewer observed outages are too noisy to fit.
pub const MIN_OUTAGES: u64 = 10;

/// Least-squares slope of `log10(outage)` against `log10(P)` for `user`.
///
/// The window holds the resolvable points (at least [`MIN_OUTAGES`]
/// outages) whose outage lies within `top_decades` decades of the outage at
/// the highest resolvable SNR.
pub fn fit_diversity_slope(sweep: &SweepResult, user: usize, top_decades: f64) -> Result<f64> {
    fit_slope_for(sweep, &Target::Outage(user), top_decades)
}

/// [`fit_diversity_slope`] for any proportion target.
pub fn fit_slope_for(sweep: &SweepResult, target: &Target, top_decades: f64) -> Result<f64> {
    let resolvable: Vec<(f64, f64)> = sweep
        .curve(target)
        .into_iter()
        .filter(|&(_, p, events)| events >= MIN_OUTAGES && p > 0.0)
        .map(|(snr, p, _)| (snr / 10.0, p.log10()))
        .collect();
    let Some(&(_, floor)) = resolvable.last() else {
        return Err(fit_error(0));
    };
    let window: Vec<(f64, f64)> = resolvable
        .into_iter()
        .filter(|&(_, lp)| lp <= floor + top_decades + 1e-12)
        .collect();
    if window.len() < 3 {
        return Err(fit_error(window.len()));
    }
    let n = window.len() as f64;
    let mx = window.iter().map(|p| p.0).sum::<f64>() / n;
    let my = window.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = window.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = window.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

fn fit_error(found: usize) -> Error {
    Error::FitWindow(format!(
        "{found} SNR points with at least {MIN_OUTAGES} outages in the fit window, 3 needed; \
         raise the trial count at the high-SNR points or extend the axis downwards"
    ))
}

/// SNR of `a` minus SNR of `b` at which the mean outage crosses `epsilon`,
/// interpolating `log10(outage)` linearly in dB.
pub fn energy_gain_at_outage(a: &SweepResult, b: &SweepResult, epsilon: f64) -> Result<f64> {
    Ok(crossing(a, epsilon)? - crossing(b, epsilon)?)
}

fn crossing(sweep: &SweepResult, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Range(format!("outage level {epsilon} is not in (0, 1)")));
    }
    let curve = sweep.curve(&Target::MeanOutage);
    let le = epsilon.log10();
    for w in curve.windows(2) {
        let ((s0, p0, _), (s1, p1, _)) = (w[0], w[1]);
        if p0 == epsilon {
            return Ok(s0);
        }
        if p0 > epsilon && p1 <= epsilon {
            if p1 == epsilon {
                return Ok(s1);
            }
            if p1 <= 0.0 {
                break;
            }
            let (l0, l1) = (p0.log10(), p1.log10());
            return Ok(s0 + (le - l0) / (l1 - l0) * (s1 - s0));
        }
    }
    Err(Error::Range(format!(
        "the {} outage curve does not cross {epsilon} on its SNR axis",
        sweep.policy
    )))
}
