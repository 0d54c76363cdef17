//! Forecast quality metrics and diagnostics.
//!
//! Everything aggregates plain (prediction, measurement, clear-sky)
//! triples: overall and daylight-only error metrics, a nocturnal-noise
//! audit, ramp phase-lag measurement, sky-condition strata built from
//! daily clearness, diurnal envelopes, cumulative and yearly error
//! trajectories, and the two persistence baselines. All functions sort
//! their input by timestamp first, so record order never changes a
//! reported number.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Duration, FixedOffset, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::clearness_index;

/// Hourly ramp size that counts as an event in the phase-lag scan.
pub const RAMP_THRESHOLD: f64 = 150.0;
/// Lags examined on each side of an event, hours.
pub const LAG_SEARCH_WINDOW: i64 = 6;
/// Correlation window length centered on each event, hours.
pub const LAG_CORR_WINDOW: i64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub timestamp: DateTime<Utc>,
    pub ghi_pred: f64,
    pub ghi_meas: f64,
    pub ghi_clear: f64,
    pub alpha: f64,
}

fn sorted(records: &[ForecastRecord]) -> Vec<ForecastRecord> {
    let mut v = records.to_vec();
    v.sort_by_key(|r| r.timestamp);
    v
}

fn daylight(records: &[ForecastRecord]) -> Vec<ForecastRecord> {
    records.iter().filter(|r| r.ghi_clear > 0.0).copied().collect()
}

pub fn rmse(records: &[ForecastRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::data("rmse over an empty record set"));
    }
    let n = records.len() as f64;
    let ss: f64 = records
        .iter()
        .map(|r| (r.ghi_pred - r.ghi_meas) * (r.ghi_pred - r.ghi_meas))
        .sum();
    Ok((ss / n).sqrt())
}

pub fn mae(records: &[ForecastRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::data("mae over an empty record set"));
    }
    let n = records.len() as f64;
    Ok(records.iter().map(|r| (r.ghi_pred - r.ghi_meas).abs()).sum::<f64>() / n)
}

/// Pearson correlation between predictions and measurements.
pub fn pearson(records: &[ForecastRecord]) -> Result<f64> {
    if records.len() < 2 {
        return Err(Error::data("pearson needs at least 2 records"));
    }
    let n = records.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in records {
        let (x, y) = (r.ghi_pred, r.ghi_meas);
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vy <= 0.0 {
        return Err(Error::domain(
            "pearson undefined: measured series has zero variance",
        ));
    }
    if vx <= 0.0 {
        return Err(Error::domain(
            "pearson undefined: predicted series has zero variance",
        ));
    }
    Ok((n * sxy - sx * sy) / (vx.sqrt() * vy.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NightNoise {
    /// Hours with zero clear-sky GHI but a nonzero prediction.
    pub violating_hours: usize,
    pub max_night_pred: f64,
}

pub fn night_noise_audit(records: &[ForecastRecord]) -> NightNoise {
    let mut violating_hours = 0;
    let mut max_night_pred = 0.0f64;
    for r in records {
        if r.ghi_clear == 0.0 && r.ghi_pred != 0.0 {
            violating_hours += 1;
            max_night_pred = max_night_pred.max(r.ghi_pred.abs());
        }
    }
    NightNoise {
        violating_hours,
        max_night_pred,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseLagEvent {
    pub timestamp: DateTime<Utc>,
    pub lag_hours: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLagReport {
    /// None when no ramp events were found.
    pub median_lag_hours: Option<f64>,
    pub events: Vec<PhaseLagEvent>,
}

fn window_pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 3 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
        cov += (x - mx) * (y - my);
    }
    if vx <= 0.0 || vy <= 0.0 {
        return None;
    }
    Some(cov / (vx.sqrt() * vy.sqrt()))
}

/// Detects hourly ramps where |delta measured GHI| exceeds the threshold
/// and, for each, finds the integer lag in [-search, +search] that
/// maximizes the prediction/measurement correlation over a 12-hour window
/// centered on the event. Positive lag means the prediction trails the
/// measurement. Ties prefer the smallest |lag|, then the smaller lag.
pub fn phase_lag(
    records: &[ForecastRecord],
    ramp_threshold: f64,
    search_window: i64,
) -> PhaseLagReport {
    let recs = sorted(records);
    let n = recs.len() as i64;
    let mut events = Vec::new();
    for t in 1..recs.len() {
        let step = recs[t].ghi_meas - recs[t - 1].ghi_meas;
        let hourly = recs[t].timestamp - recs[t - 1].timestamp == Duration::hours(1);
        if !hourly || step.abs() <= ramp_threshold {
            continue;
        }
        let half = LAG_CORR_WINDOW / 2;
        let mut best: Option<(f64, i64)> = None;
        for lag in -search_window..=search_window {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for i in (t as i64 - half)..(t as i64 + half) {
                let j = i + lag;
                if i >= 0 && i < n && j >= 0 && j < n {
                    xs.push(recs[j as usize].ghi_pred);
                    ys.push(recs[i as usize].ghi_meas);
                }
            }
            if let Some(r) = window_pearson(&xs, &ys) {
                let better = match best {
                    None => true,
                    Some((br, bl)) => {
                        r > br + 1e-12
                            || ((r - br).abs() <= 1e-12
                                && (lag.abs() < bl.abs()
                                    || (lag.abs() == bl.abs() && lag < bl)))
                    }
                };
                if better {
                    best = Some((r, lag));
                }
            }
        }
        if let Some((_, lag)) = best {
            events.push(PhaseLagEvent {
                timestamp: recs[t].timestamp,
                lag_hours: lag,
            });
        }
    }
    let median_lag_hours = if events.is_empty() {
        None
    } else {
        let mut lags: Vec<i64> = events.iter().map(|e| e.lag_hours).collect();
        lags.sort_unstable();
        let m = lags.len();
        Some(if m % 2 == 1 {
            lags[m / 2] as f64
        } else {
            (lags[m / 2 - 1] + lags[m / 2]) as f64 / 2.0
        })
    };
    PhaseLagReport {
        median_lag_hours,
        events,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KtStratum {
    pub class: String,
    pub kt_min: f64,
    pub kt_max: f64,
    pub days: usize,
    pub day_fraction: f64,
    pub rmse: Option<f64>,
}

/// Classifies each local day by its energy-ratio clearness
/// (sum of measured GHI over sum of clear-sky GHI across daylight hours)
/// and reports the per-stratum daylight RMSE and day fraction.
pub fn kt_stratified(records: &[ForecastRecord], tz_offset_hours: i32) -> Result<Vec<KtStratum>> {
    let offset = FixedOffset::east_opt(tz_offset_hours * 3600)
        .ok_or_else(|| Error::config("tz offset out of range"))?;
    let mut days: BTreeMap<chrono::NaiveDate, Vec<ForecastRecord>> = BTreeMap::new();
    for r in daylight(&sorted(records)) {
        days.entry(r.timestamp.with_timezone(&offset).date_naive())
            .or_default()
            .push(r);
    }

    // (class, kt_min, kt_max]; bounds chosen so every day lands in
    // exactly one stratum.
    let bounds = [
        ("clear", 0.7, f64::INFINITY),
        ("partly", 0.3, 0.7),
        ("overcast", f64::NEG_INFINITY, 0.3),
    ];
    let mut grouped: Vec<Vec<ForecastRecord>> = vec![Vec::new(), Vec::new(), Vec::new()];
    let mut day_counts = [0usize; 3];
    let mut total_days = 0usize;
    for recs in days.values() {
        let sum_meas: f64 = recs.iter().map(|r| r.ghi_meas).sum();
        let sum_clear: f64 = recs.iter().map(|r| r.ghi_clear).sum();
        if sum_clear <= 0.0 {
            continue;
        }
        let kt = sum_meas / sum_clear;
        let idx = if kt > 0.7 {
            0
        } else if kt >= 0.3 {
            1
        } else {
            2
        };
        day_counts[idx] += 1;
        total_days += 1;
        grouped[idx].extend_from_slice(recs);
    }

    let mut out = Vec::new();
    for (i, (class, lo, hi)) in bounds.iter().enumerate() {
        out.push(KtStratum {
            class: class.to_string(),
            kt_min: *lo,
            kt_max: *hi,
            days: day_counts[i],
            day_fraction: if total_days == 0 {
                0.0
            } else {
                day_counts[i] as f64 / total_days as f64
            },
            rmse: if grouped[i].is_empty() {
                None
            } else {
                Some(rmse(&grouped[i])?)
            },
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiurnalEnvelope {
    /// Indexed by local hour of day, 0..24.
    pub mean_pred: Vec<f64>,
    pub mean_meas: Vec<f64>,
    pub counts: Vec<usize>,
    pub max_abs_diff: f64,
}

pub fn diurnal_envelope(records: &[ForecastRecord], tz_offset_hours: i32) -> Result<DiurnalEnvelope> {
    let offset = FixedOffset::east_opt(tz_offset_hours * 3600)
        .ok_or_else(|| Error::config("tz offset out of range"))?;
    let mut sum_pred = vec![0.0; 24];
    let mut sum_meas = vec![0.0; 24];
    let mut counts = vec![0usize; 24];
    for r in records {
        let h = r.timestamp.with_timezone(&offset).hour() as usize;
        sum_pred[h] += r.ghi_pred;
        sum_meas[h] += r.ghi_meas;
        counts[h] += 1;
    }
    let mut mean_pred = vec![0.0; 24];
    let mut mean_meas = vec![0.0; 24];
    let mut max_abs_diff = 0.0f64;
    for h in 0..24 {
        if counts[h] > 0 {
            mean_pred[h] = sum_pred[h] / counts[h] as f64;
            mean_meas[h] = sum_meas[h] / counts[h] as f64;
            max_abs_diff = max_abs_diff.max((mean_pred[h] - mean_meas[h]).abs());
        }
    }
    Ok(DiurnalEnvelope {
        mean_pred,
        mean_meas,
        counts,
        max_abs_diff,
    })
}

/// Running sum of |pred - meas| in chronological order.
pub fn cumulative_abs_error(records: &[ForecastRecord]) -> Vec<f64> {
    let mut acc = 0.0;
    sorted(records)
        .iter()
        .map(|r| {
            acc += (r.ghi_pred - r.ghi_meas).abs();
            acc
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YearlyRmse {
    pub year: i32,
    pub rmse: f64,
    pub hours: usize,
}

pub fn yearly_rmse(records: &[ForecastRecord]) -> Result<Vec<YearlyRmse>> {
    let mut groups: BTreeMap<i32, Vec<ForecastRecord>> = BTreeMap::new();
    for r in sorted(records) {
        groups.entry(r.timestamp.year()).or_default().push(r);
    }
    let mut out = Vec::new();
    for (year, recs) in groups {
        out.push(YearlyRmse {
            year,
            rmse: rmse(&recs)?,
            hours: recs.len(),
        });
    }
    Ok(out)
}

fn baseline_record(src: &ForecastRecord, pred: f64) -> ForecastRecord {
    ForecastRecord {
        timestamp: src.timestamp,
        ghi_pred: pred,
        ghi_meas: src.ghi_meas,
        ghi_clear: src.ghi_clear,
        alpha: if src.ghi_clear > 0.0 { pred / src.ghi_clear } else { 0.0 },
    }
}

/// Naive persistence: predict last hour's measurement. Pairs separated by
/// gaps are skipped.
pub fn persistence_forecast(records: &[ForecastRecord]) -> Vec<ForecastRecord> {
    let recs = sorted(records);
    recs.windows(2)
        .filter(|p| p[1].timestamp - p[0].timestamp == Duration::hours(1))
        .map(|p| baseline_record(&p[1], p[0].ghi_meas))
        .collect()
}

/// Smart persistence: carry the last hour's clearness index onto the next
/// hour's clear-sky value. Exactly zero at night via the Kt guard.
pub fn smart_persistence_forecast(records: &[ForecastRecord]) -> Vec<ForecastRecord> {
    let recs = sorted(records);
    recs.windows(2)
        .filter(|p| p[1].timestamp - p[0].timestamp == Duration::hours(1))
        .map(|p| {
            let kt = clearness_index(p[0].ghi_meas, p[0].ghi_clear);
            baseline_record(&p[1], kt * p[1].ghi_clear)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineMetrics {
    pub persistence_rmse_all: f64,
    pub persistence_rmse_daylight: f64,
    pub smart_persistence_rmse_all: f64,
    pub smart_persistence_rmse_daylight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse_all: f64,
    pub mae_all: f64,
    pub pearson_all: f64,
    pub rmse_daylight: f64,
    pub mae_daylight: f64,
    pub pearson_daylight: f64,
    pub night_noise: NightNoise,
    pub phase_lag: PhaseLagReport,
    pub kt_strata: Vec<KtStratum>,
    pub diurnal_envelope: DiurnalEnvelope,
    pub cumulative_abs_error: Vec<f64>,
    pub yearly_rmse: Vec<YearlyRmse>,
    pub baselines: BaselineMetrics,
}

pub fn evaluate(records: &[ForecastRecord], tz_offset_hours: i32) -> Result<EvalReport> {
    let recs = sorted(records);
    if recs.len() < 2 {
        return Err(Error::data("evaluation needs at least 2 records"));
    }
    let day = daylight(&recs);
    if day.len() < 2 {
        return Err(Error::data("evaluation needs at least 2 daylight records"));
    }
    let naive = persistence_forecast(&recs);
    let smart = smart_persistence_forecast(&recs);
    let baselines = BaselineMetrics {
        persistence_rmse_all: rmse(&naive)?,
        persistence_rmse_daylight: rmse(&daylight(&naive))?,
        smart_persistence_rmse_all: rmse(&smart)?,
        smart_persistence_rmse_daylight: rmse(&daylight(&smart))?,
    };
    Ok(EvalReport {
        rmse_all: rmse(&recs)?,
        mae_all: mae(&recs)?,
        pearson_all: pearson(&recs)?,
        rmse_daylight: rmse(&day)?,
        mae_daylight: mae(&day)?,
        pearson_daylight: pearson(&day)?,
        night_noise: night_noise_audit(&recs),
        phase_lag: phase_lag(&recs, RAMP_THRESHOLD, LAG_SEARCH_WINDOW),
        kt_strata: kt_stratified(&recs, tz_offset_hours)?,
        diurnal_envelope: diurnal_envelope(&recs, tz_offset_hours)?,
        cumulative_abs_error: cumulative_abs_error(&recs),
        yearly_rmse: yearly_rmse(&recs)?,
        baselines,
    })
}

/// Emits plot-ready CSVs (diurnal envelope, cumulative error, yearly
/// RMSE, residual histogram) into `dir`; returns the paths written.
pub fn write_figure_csvs(
    report: &EvalReport,
    records: &[ForecastRecord],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let mut envelope = String::from("local_hour,mean_pred,mean_meas,count\n");
    for h in 0..24 {
        envelope.push_str(&format!(
            "{h},{},{},{}\n",
            report.diurnal_envelope.mean_pred[h],
            report.diurnal_envelope.mean_meas[h],
            report.diurnal_envelope.counts[h]
        ));
    }
    let p = dir.join("diurnal_envelope.csv");
    std::fs::write(&p, envelope)?;
    written.push(p);

    let recs = sorted(records);
    let mut cum = String::from("timestamp,cumulative_abs_error\n");
    for (r, c) in recs.iter().zip(&report.cumulative_abs_error) {
        cum.push_str(&format!("{},{c}\n", r.timestamp.to_rfc3339()));
    }
    let p = dir.join("cumulative_abs_error.csv");
    std::fs::write(&p, cum)?;
    written.push(p);

    let mut yearly = String::from("year,rmse,hours\n");
    for y in &report.yearly_rmse {
        yearly.push_str(&format!("{},{},{}\n", y.year, y.rmse, y.hours));
    }
    let p = dir.join("yearly_rmse.csv");
    std::fs::write(&p, yearly)?;
    written.push(p);

    let residuals: Vec<f64> = recs
        .iter()
        .filter(|r| r.ghi_clear > 0.0)
        .map(|r| r.ghi_pred - r.ghi_meas)
        .collect();
    let mut hist = String::from("bin_lo,bin_hi,count\n");
    if !residuals.is_empty() {
        let width = 10.0;
        let lo = (residuals.iter().cloned().fold(f64::INFINITY, f64::min) / width).floor() * width;
        let hi = (residuals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / width).ceil() * width;
        let bins = (((hi - lo) / width).round() as usize).max(1);
        let mut counts = vec![0usize; bins];
        for &r in &residuals {
            let idx = (((r - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        for (i, c) in counts.iter().enumerate() {
            let b0 = lo + i as f64 * width;
            hist.push_str(&format!("{b0},{},{c}\n", b0 + width));
        }
    }
    let p = dir.join("residual_hist.csv");
    std::fs::write(&p, hist)?;
    written.push(p);

    Ok(written)
}
