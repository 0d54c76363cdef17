//! Raw hourly weather records to normalized model inputs.
//!
//! Each hour becomes a fixed-order 22-feature vector; 24 consecutive
//! vectors plus the following hour's measured GHI and clear-sky GHI form
//! one training window. Partitioning is strictly chronological and
//! windows that straddle a partition boundary are discarded, so no
//! training window ever sees test-period data.

use chrono::{DateTime, Datelike, Duration, FixedOffset, NaiveDate, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::solar::{
    clear_sky_ghi, extraterrestrial_horizontal, solar_position, ClearSkyParams, GeoLocation,
};

pub const NUM_FEATURES: usize = 22;
pub const WINDOW_HOURS: usize = 24;

/// Fixed, versioned feature order. This order is part of the checkpoint
/// contract; changing it invalidates every stored model.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "ghi",
    "kt",
    "sza",
    "dni",
    "dhi",
    "t2m",
    "rh",
    "ws",
    "ps",
    "d_t2m",
    "d_rh",
    "d_ws",
    "d_ps",
    "mean_dni_24h",
    "mean_dhi_24h",
    "tsi",
    "sin_m",
    "cos_m",
    "sin_d",
    "cos_d",
    "sin_h",
    "cos_h",
];

/// Features that are already bounded and skip z-scoring: the clearness
/// index and the six cyclical embeddings.
pub const EXEMPT_FROM_NORMALIZATION: [&str; 7] =
    ["kt", "sin_m", "cos_m", "sin_d", "cos_d", "sin_h", "cos_h"];

/// Clearness-index ceiling; values above this are treated as
/// cloud-enhancement transients and clamped.
pub const KT_MAX: f64 = 1.2;

/// One hour of measured (or reanalysis) weather.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteoRecord {
    pub timestamp: DateTime<Utc>,
    /// Global horizontal irradiance, Wh/m².
    pub ghi: f64,
    /// Direct normal irradiance, Wh/m².
    pub dni: f64,
    /// Diffuse horizontal irradiance, Wh/m².
    pub dhi: f64,
    /// 2 m air temperature, °C.
    pub t2m: f64,
    /// Relative humidity, %.
    pub rh: f64,
    /// Wind speed, m/s.
    pub ws: f64,
    /// Surface pressure, kPa.
    pub ps: f64,
}

impl MeteoRecord {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("ghi", self.ghi), ("dni", self.dni), ("dhi", self.dhi)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::data(format!(
                    "{name} = {v} at {} must be finite and non-negative",
                    self.timestamp
                )));
            }
        }
        if !(0.0..=100.0).contains(&self.rh) {
            return Err(Error::data(format!(
                "rh = {} at {} outside [0, 100]",
                self.rh, self.timestamp
            )));
        }
        if !self.ws.is_finite() || self.ws < 0.0 {
            return Err(Error::data(format!(
                "ws = {} at {} must be non-negative",
                self.ws, self.timestamp
            )));
        }
        if !self.ps.is_finite() || self.ps <= 0.0 {
            return Err(Error::data(format!(
                "ps = {} at {} must be positive",
                self.ps, self.timestamp
            )));
        }
        Ok(())
    }
}

/// Checks strictly increasing, exactly hourly timestamps; names the first
/// offending gap otherwise.
pub fn check_contiguous(records: &[MeteoRecord]) -> Result<()> {
    for pair in records.windows(2) {
        let (a, b) = (pair[0].timestamp, pair[1].timestamp);
        if b - a != Duration::hours(1) {
            return Err(Error::data(format!(
                "records are not contiguous hourly: {a} is followed by {b}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub timestamp: DateTime<Utc>,
    pub values: [f64; NUM_FEATURES],
}

/// Per-feature normalization statistics, fitted on the training partition
/// only and embedded into checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub exempt: Vec<bool>,
}

/// Chronological train/test partition in whole calendar years. The test
/// range must start at least one year after the training range ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_years: (i32, i32),
    pub test_years: (i32, i32),
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let (t0, t1) = self.train_years;
        let (s0, s1) = self.test_years;
        if t0 > t1 || s0 > s1 {
            return Err(Error::config(format!(
                "year ranges must be ascending: train {t0}-{t1}, test {s0}-{s1}"
            )));
        }
        if s0 - t1 < 1 {
            return Err(Error::config(format!(
                "test range must start after the training range ends: train ends {t1}, test starts {s0}"
            )));
        }
        Ok(())
    }

    fn in_train(&self, year: i32) -> bool {
        (self.train_years.0..=self.train_years.1).contains(&year)
    }

    fn in_test(&self, year: i32) -> bool {
        (self.test_years.0..=self.test_years.1).contains(&year)
    }
}

/// One model input: 24 normalized feature rows, the matching raw celestial
/// rows `[cos SZA, GHI_clear / S0, Kt]`, and the one-hour-ahead target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    /// 24 x 22, normalized.
    pub features: Mat,
    /// 24 x 3, physical scale (not normalized).
    pub celestial: Mat,
    pub target_time: DateTime<Utc>,
    pub target_ghi: f64,
    pub target_ghi_clear: f64,
}

/// Kt = ghi / ghi_clear, clamped to [0, KT_MAX], with a hard zero below
/// 1 Wh/m² of clear-sky signal so twilight and night never divide by
/// noise.
pub fn clearness_index(ghi: f64, ghi_clear: f64) -> f64 {
    if ghi_clear < 1.0 {
        return 0.0;
    }
    (ghi / ghi_clear).clamp(0.0, KT_MAX)
}

/// Cyclical encodings of month, day of year, and hour of a local
/// timestamp: (sin_m, cos_m, sin_d, cos_d, sin_h, cos_h).
///
/// Month and day phases advance continuously with the clock rather than
/// stepping once per calendar unit, so the seasonal components glide
/// across month and year boundaries instead of jumping. The hour pair
/// rotates 15 degrees per hour by design; continuity guarantees apply to
/// the seasonal four.
pub fn temporal_embedding(t_local: DateTime<FixedOffset>) -> [f64; 6] {
    let tau = std::f64::consts::TAU;
    let hour = t_local.hour() as f64 + t_local.minute() as f64 / 60.0;
    let month_len = days_in_month(t_local.year(), t_local.month()) as f64;
    let month_progress = (t_local.day() as f64 - 1.0 + hour / 24.0) / month_len;
    let month_phase = tau * (t_local.month() as f64 - 1.0 + month_progress) / 12.0;
    let day_phase = tau * (t_local.ordinal() as f64 - 1.0 + hour / 24.0) / 365.25;
    let hour_phase = tau * hour / 24.0;
    [
        month_phase.sin(),
        month_phase.cos(),
        day_phase.sin(),
        day_phase.cos(),
        hour_phase.sin(),
        hour_phase.cos(),
    ]
}

fn days_in_month(year: i32, month: u32) -> u32 {
    let (ny, nm) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    NaiveDate::from_ymd_opt(ny, nm, 1)
        .unwrap()
        .pred_opt()
        .unwrap()
        .day()
}

/// out[i] = x[i] - x[i-1], with out[0] = 0.
pub fn first_difference(series: &[f64]) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::domain("first_difference of an empty series"));
    }
    let mut out = Vec::with_capacity(series.len());
    out.push(0.0);
    for pair in series.windows(2) {
        out.push(pair[1] - pair[0]);
    }
    Ok(out)
}

/// Trailing mean over the `window` most recent values, expanding over the
/// first `window - 1` indices.
pub fn rolling_mean(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 1 {
        return Err(Error::domain("rolling_mean window must be >= 1"));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for i in 0..series.len() {
        sum += series[i];
        if i >= window {
            sum -= series[i - window];
        }
        let n = (i + 1).min(window);
        out.push(sum / n as f64);
    }
    Ok(out)
}

/// Builds feature vectors and windows for one site.
#[derive(Debug, Clone)]
pub struct FeaturePipeline {
    pub location: GeoLocation,
    pub clear_sky: ClearSkyParams,
    /// Local standard-time offset for the cyclical hour embedding,
    /// whole hours east of UTC.
    pub tz_offset_hours: i32,
}

impl FeaturePipeline {
    /// Offset defaults to the longitude-implied standard time zone.
    pub fn new(location: GeoLocation, clear_sky: ClearSkyParams) -> Self {
        let tz_offset_hours = location.standard_offset_hours();
        FeaturePipeline {
            location,
            clear_sky,
            tz_offset_hours,
        }
    }

    pub fn with_tz_offset(mut self, hours: i32) -> Self {
        self.tz_offset_hours = hours;
        self
    }

    fn local(&self, t: DateTime<Utc>) -> DateTime<FixedOffset> {
        let offset = FixedOffset::east_opt(self.tz_offset_hours * 3600)
            .expect("tz offset within a day");
        t.with_timezone(&offset)
    }

    /// Raw celestial conditioning row for the hour labeled `t`:
    /// [cos SZA at the interval midpoint, clear-sky GHI / S0, Kt].
    /// The conditioning row for the hour labeled `t`: cosine of the solar
    /// zenith at the interval midpoint, clear-sky GHI normalized by the
    /// solar constant, and the clearness index of the measured GHI.
    pub fn celestial_row(&self, t: DateTime<Utc>, ghi: f64) -> Result<[f64; 3]> {
        let pos = solar_position(&self.location, t + Duration::minutes(30))?;
        let ghi_clear = clear_sky_ghi(&self.location, t, &self.clear_sky)?;
        let norm_clear = (ghi_clear / self.clear_sky.solar_constant).clamp(0.0, 1.1);
        Ok([pos.cos_zenith, norm_clear, clearness_index(ghi, ghi_clear)])
    }

    /// One fixed-order feature vector per record. Records must be
    /// contiguous hourly; gaps must be resolved upstream.
    pub fn build_features(&self, records: &[MeteoRecord]) -> Result<Vec<FeatureVector>> {
        if records.is_empty() {
            return Err(Error::data("no records to build features from"));
        }
        check_contiguous(records)?;
        for r in records {
            r.validate()?;
        }

        let d_t2m = first_difference(&records.iter().map(|r| r.t2m).collect::<Vec<_>>())?;
        let d_rh = first_difference(&records.iter().map(|r| r.rh).collect::<Vec<_>>())?;
        let d_ws = first_difference(&records.iter().map(|r| r.ws).collect::<Vec<_>>())?;
        let d_ps = first_difference(&records.iter().map(|r| r.ps).collect::<Vec<_>>())?;
        let mean_dni = rolling_mean(
            &records.iter().map(|r| r.dni).collect::<Vec<_>>(),
            WINDOW_HOURS,
        )?;
        let mean_dhi = rolling_mean(
            &records.iter().map(|r| r.dhi).collect::<Vec<_>>(),
            WINDOW_HOURS,
        )?;

        let mut out = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let mid = r.timestamp + Duration::minutes(30);
            let pos = solar_position(&self.location, mid)?;
            let ghi_clear = clear_sky_ghi(&self.location, r.timestamp, &self.clear_sky)?;
            let tsi = extraterrestrial_horizontal(
                &self.location,
                r.timestamp,
                self.clear_sky.solar_constant,
            )?;
            let emb = temporal_embedding(self.local(r.timestamp));

            let values = [
                r.ghi,
                clearness_index(r.ghi, ghi_clear),
                pos.zenith,
                r.dni,
                r.dhi,
                r.t2m,
                r.rh,
                r.ws,
                r.ps,
                d_t2m[i],
                d_rh[i],
                d_ws[i],
                d_ps[i],
                mean_dni[i],
                mean_dhi[i],
                tsi,
                emb[0],
                emb[1],
                emb[2],
                emb[3],
                emb[4],
                emb[5],
            ];
            out.push(FeatureVector {
                timestamp: r.timestamp,
                values,
            });
        }
        Ok(out)
    }

    /// Slices aligned normalized features and raw targets into
    /// (train, test) windows. A window belongs to a partition only if all
    /// 24 input hours and the target hour fall inside it; everything else
    /// is dropped.
    pub fn make_windows(
        &self,
        features: &[FeatureVector],
        targets: &[MeteoRecord],
        split: &SplitSpec,
    ) -> Result<(Vec<FeatureWindow>, Vec<FeatureWindow>)> {
        split.validate()?;
        if features.len() != targets.len() {
            return Err(Error::shape(format!(
                "features ({}) and targets ({}) must be aligned",
                features.len(),
                targets.len()
            )));
        }
        for (f, r) in features.iter().zip(targets) {
            if f.timestamp != r.timestamp {
                return Err(Error::data(format!(
                    "feature/target timestamp mismatch: {} vs {}",
                    f.timestamp, r.timestamp
                )));
            }
        }
        check_contiguous(targets)?;

        let n = targets.len();
        let mut celestial = Vec::with_capacity(n);
        for (f, r) in features.iter().zip(targets) {
            // Kt is normalization-exempt, so index 1 is the raw value.
            celestial.push(self.celestial_row(r.timestamp, r.ghi).map(|mut c| {
                c[2] = f.values[1];
                c
            })?);
        }

        let mut train = Vec::new();
        let mut test = Vec::new();
        if n < WINDOW_HOURS + 1 {
            return Ok((train, test));
        }
        for start in 0..=(n - WINDOW_HOURS - 1) {
            let target_idx = start + WINDOW_HOURS;
            let target = &targets[target_idx];

            let years: Vec<i32> = (start..=target_idx)
                .map(|j| targets[j].timestamp.year())
                .collect();
            let all_train = years.iter().all(|&y| split.in_train(y));
            let all_test = years.iter().all(|&y| split.in_test(y));
            if !all_train && !all_test {
                continue;
            }

            let mut fmat = Mat::zeros(WINDOW_HOURS, NUM_FEATURES);
            let mut cmat = Mat::zeros(WINDOW_HOURS, 3);
            for j in 0..WINDOW_HOURS {
                fmat.row_mut(j).copy_from_slice(&features[start + j].values);
                cmat.row_mut(j).copy_from_slice(&celestial[start + j]);
            }

            let window = FeatureWindow {
                features: fmat,
                celestial: cmat,
                target_time: target.timestamp,
                target_ghi: target.ghi,
                target_ghi_clear: clear_sky_ghi(&self.location, target.timestamp, &self.clear_sky)?,
            };
            if all_train {
                train.push(window);
            } else {
                test.push(window);
            }
        }
        Ok((train, test))
    }
}

/// Fits per-feature z-score statistics. Bounded features (Kt and the
/// cyclical embeddings) are flagged exempt and pass through unchanged.
pub fn fit_normalization(features: &[FeatureVector]) -> Result<NormStats> {
    if features.len() < 100 {
        return Err(Error::data(format!(
            "normalization needs at least 100 vectors, got {}",
            features.len()
        )));
    }
    let n = features.len() as f64;
    let mut mean = vec![0.0; NUM_FEATURES];
    let mut std = vec![0.0; NUM_FEATURES];
    for f in features {
        for (m, v) in mean.iter_mut().zip(f.values.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    for f in features {
        for k in 0..NUM_FEATURES {
            let d = f.values[k] - mean[k];
            std[k] += d * d;
        }
    }
    let exempt: Vec<bool> = FEATURE_NAMES
        .iter()
        .map(|name| EXEMPT_FROM_NORMALIZATION.contains(name))
        .collect();
    for k in 0..NUM_FEATURES {
        std[k] = (std[k] / n).sqrt();
        if !exempt[k] && std[k] < 1e-12 {
            log::warn!(
                "feature '{}' has zero variance in the training partition; using std = 1",
                FEATURE_NAMES[k]
            );
            std[k] = 1.0;
        }
    }
    Ok(NormStats { mean, std, exempt })
}

pub fn apply_normalization(fv: &FeatureVector, stats: &NormStats) -> FeatureVector {
    let mut values = fv.values;
    for k in 0..NUM_FEATURES {
        if !stats.exempt[k] {
            values[k] = (values[k] - stats.mean[k]) / stats.std[k];
        }
    }
    FeatureVector {
        timestamp: fv.timestamp,
        values,
    }
}

pub fn invert_normalization(fv: &FeatureVector, stats: &NormStats) -> FeatureVector {
    let mut values = fv.values;
    for k in 0..NUM_FEATURES {
        if !stats.exempt[k] {
            values[k] = values[k] * stats.std[k] + stats.mean[k];
        }
    }
    FeatureVector {
        timestamp: fv.timestamp,
        values,
    }
}

pub fn normalize_all(features: &[FeatureVector], stats: &NormStats) -> Vec<FeatureVector> {
    features.iter().map(|f| apply_normalization(f, stats)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn utc(y: i32, mo: u32, d: u32, h: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, mo, d, h, 0, 0).unwrap()
    }

    fn pipeline() -> FeaturePipeline {
        FeaturePipeline::new(
            GeoLocation::new(15.65, 32.48, 380.0).unwrap(),
            ClearSkyParams::default(),
        )
    }

    /// Constant-weather hourly series starting at `start`.
    fn flat_records(start: DateTime<Utc>, hours: usize) -> Vec<MeteoRecord> {
        (0..hours)
            .map(|i| MeteoRecord {
                timestamp: start + Duration::hours(i as i64),
                ghi: 100.0,
                dni: 200.0,
                dhi: 50.0,
                t2m: 25.0,
                rh: 40.0,
                ws: 3.0,
                ps: 97.0,
            })
            .collect()
    }

    #[test]
    fn clearness_index_basics() {
        assert_eq!(clearness_index(500.0, 500.0), 1.0);
        assert_eq!(clearness_index(200.0, 0.0), 0.0);
        assert_eq!(clearness_index(700.0, 500.0), 1.2);
        assert_eq!(clearness_index(0.3, 0.5), 0.0);
    }

    #[test]
    fn embedding_hour_anchors() {
        let t0 = utc(2022, 1, 1, 0).with_timezone(&FixedOffset::east_opt(0).unwrap());
        let e0 = temporal_embedding(t0);
        assert!((e0[4] - 0.0).abs() < 1e-12);
        assert!((e0[5] - 1.0).abs() < 1e-12);

        let t6 = utc(2022, 1, 1, 6).with_timezone(&FixedOffset::east_opt(0).unwrap());
        let e6 = temporal_embedding(t6);
        assert!((e6[4] - 1.0).abs() < 1e-12);
        assert!(e6[5].abs() < 1e-12);
    }

    #[test]
    fn embedding_unit_circle() {
        let offset = FixedOffset::east_opt(2 * 3600).unwrap();
        for h in 0..24 {
            let e = temporal_embedding(utc(2021, 7, 19, h).with_timezone(&offset));
            for pair in e.chunks(2) {
                assert!((pair[0] * pair[0] + pair[1] * pair[1] - 1.0).abs() < 1e-9);
            }
        }
    }

    fn seasonal_distance(a: &[f64; 6], b: &[f64; 6]) -> f64 {
        a[..4]
            .iter()
            .zip(b[..4].iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn embedding_continuous_across_year_boundary() {
        // The hour pair legitimately rotates 2*sin(pi/24) ~ 0.26 per hour,
        // so boundary continuity is a property of the seasonal components.
        let offset = FixedOffset::east_opt(0).unwrap();
        let a = temporal_embedding(utc(2021, 12, 31, 23).with_timezone(&offset));
        let b = temporal_embedding(utc(2022, 1, 1, 0).with_timezone(&offset));
        let dist = seasonal_distance(&a, &b);
        assert!(dist < 0.01, "boundary jump {dist}");
    }

    #[test]
    fn embedding_continuous_across_month_boundaries() {
        let offset = FixedOffset::east_opt(0).unwrap();
        for (m, d) in [(1u32, 31u32), (2, 28), (4, 30), (6, 30), (11, 30)] {
            let a = temporal_embedding(utc(2021, m, d, 23).with_timezone(&offset));
            let b = temporal_embedding(utc(2021, m + 1, 1, 0).with_timezone(&offset));
            let dist = seasonal_distance(&a, &b);
            assert!(dist < 0.01, "month {m} boundary jump {dist}");
        }
    }

    #[test]
    fn embedding_max_adjacent_distance_over_year() {
        let offset = FixedOffset::east_opt(2 * 3600).unwrap();
        let mut max_seasonal: f64 = 0.0;
        let mut max_hour_pair: f64 = 0.0;
        let mut prev = temporal_embedding(utc(2021, 1, 1, 0).with_timezone(&offset));
        for h in 1..(365 * 24) {
            let t = utc(2021, 1, 1, 0) + Duration::hours(h);
            let e = temporal_embedding(t.with_timezone(&offset));
            max_seasonal = max_seasonal.max(seasonal_distance(&e, &prev));
            let dh = ((e[4] - prev[4]).powi(2) + (e[5] - prev[5]).powi(2)).sqrt();
            max_hour_pair = max_hour_pair.max(dh);
            prev = e;
        }
        assert!(max_seasonal < 0.05, "max adjacent seasonal distance {max_seasonal}");
        // The hour pair steps by a constant chord of 2*sin(pi/24).
        let hour_chord = 2.0 * (std::f64::consts::PI / 24.0).sin();
        assert!((max_hour_pair - hour_chord).abs() < 1e-9);
    }

    #[test]
    fn first_difference_examples() {
        assert_eq!(first_difference(&[5.0, 7.0, 4.0]).unwrap(), vec![0.0, 2.0, -3.0]);
        assert_eq!(first_difference(&[2.0, 2.0, 2.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert!(first_difference(&[]).is_err());
    }

    #[test]
    fn first_difference_telescopes() {
        let x = [3.0, -1.0, 4.0, 1.0, 5.0, 9.0];
        let d = first_difference(&x).unwrap();
        let mut acc = x[0];
        for (i, &step) in d.iter().enumerate() {
            acc += step;
            if i == 0 {
                acc = x[0];
            }
            assert!((acc - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rolling_mean_examples() {
        assert_eq!(rolling_mean(&[2.0, 4.0, 6.0], 2).unwrap(), vec![2.0, 3.0, 5.0]);
        assert_eq!(rolling_mean(&[7.0, 7.0, 7.0], 3).unwrap(), vec![7.0, 7.0, 7.0]);
        let xs = [1.0, 2.0, 3.0];
        assert_eq!(rolling_mean(&xs, 1).unwrap(), xs.to_vec());
        assert!(rolling_mean(&xs, 0).is_err());
    }

    #[test]
    fn build_features_night_anchors() {
        let p = pipeline();
        let mut records = flat_records(utc(2022, 6, 20, 0), 30);
        for r in records.iter_mut() {
            // Zero measured irradiance at night keeps the data honest.
            if r.timestamp.hour() < 3 || r.timestamp.hour() > 16 {
                r.ghi = 0.0;
                r.dni = 0.0;
                r.dhi = 0.0;
            }
        }
        let feats = p.build_features(&records).unwrap();
        assert_eq!(feats.len(), records.len());
        // 22:00 UTC is deep night at 32.48° E.
        let night = feats.iter().find(|f| f.timestamp.hour() == 22).unwrap();
        assert_eq!(night.values[1], 0.0, "kt");
        assert_eq!(night.values[15], 0.0, "tsi");
        assert!(night.values[2] > 90.0, "sza {}", night.values[2]);
    }

    #[test]
    fn build_features_constant_weather_has_zero_derivatives() {
        let p = pipeline();
        let feats = p.build_features(&flat_records(utc(2022, 3, 1, 0), 48)).unwrap();
        for f in &feats {
            for k in 9..=12 {
                assert_eq!(f.values[k], 0.0);
            }
        }
    }

    #[test]
    fn build_features_rolling_mean_matches_brute_force() {
        let p = pipeline();
        let mut records = flat_records(utc(2022, 3, 1, 0), 48);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for r in records.iter_mut() {
            r.dni = rng.random_range(0.0..800.0);
            r.dhi = rng.random_range(0.0..300.0);
        }
        let feats = p.build_features(&records).unwrap();
        let brute: f64 = records[24..48].iter().map(|r| r.dni).sum::<f64>() / 24.0;
        assert!((feats[47].values[13] - brute).abs() < 1e-9);
    }

    #[test]
    fn build_features_rejects_gaps() {
        let p = pipeline();
        let mut records = flat_records(utc(2022, 3, 1, 0), 10);
        records.remove(4);
        let err = p.build_features(&records).unwrap_err();
        match err {
            Error::Data(msg) => assert!(msg.contains("2022-03-01 03:00"), "{msg}"),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    fn random_features(n: usize, seed: u64) -> Vec<FeatureVector> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let mut values = [0.0; NUM_FEATURES];
                for v in values.iter_mut() {
                    *v = rng.random_range(-5.0..50.0);
                }
                FeatureVector {
                    timestamp: utc(2012, 1, 1, 0) + Duration::hours(i as i64),
                    values,
                }
            })
            .collect()
    }

    #[test]
    fn normalization_zero_mean_unit_std() {
        let feats = random_features(500, 9);
        let stats = fit_normalization(&feats).unwrap();
        let normed = normalize_all(&feats, &stats);
        for k in 0..NUM_FEATURES {
            if stats.exempt[k] {
                continue;
            }
            let mean: f64 = normed.iter().map(|f| f.values[k]).sum::<f64>() / 500.0;
            let var: f64 = normed.iter().map(|f| f.values[k] * f.values[k]).sum::<f64>() / 500.0
                - mean * mean;
            assert!(mean.abs() < 1e-6, "feature {k} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-6, "feature {k} std {}", var.sqrt());
        }
    }

    #[test]
    fn normalization_exempt_features_pass_through() {
        let feats = random_features(200, 3);
        let stats = fit_normalization(&feats).unwrap();
        let normed = normalize_all(&feats, &stats);
        for (raw, n) in feats.iter().zip(&normed) {
            assert_eq!(raw.values[1], n.values[1]);
            for k in 16..22 {
                assert_eq!(raw.values[k], n.values[k]);
            }
        }
    }

    #[test]
    fn normalization_round_trips() {
        let feats = random_features(150, 4);
        let stats = fit_normalization(&feats).unwrap();
        for f in &feats {
            let back = invert_normalization(&apply_normalization(f, &stats), &stats);
            for k in 0..NUM_FEATURES {
                assert!((back.values[k] - f.values[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normalization_needs_enough_data_and_survives_constants() {
        assert!(fit_normalization(&random_features(99, 1)).is_err());
        let mut feats = random_features(120, 2);
        for f in feats.iter_mut() {
            f.values[5] = 21.5; // constant temperature column
        }
        let stats = fit_normalization(&feats).unwrap();
        assert_eq!(stats.std[5], 1.0);
        let normed = apply_normalization(&feats[0], &stats);
        assert!(normed.values[5].abs() < 1e-12);
    }

    #[test]
    fn split_spec_validation() {
        assert!(SplitSpec {
            train_years: (2010, 2015),
            test_years: (2020, 2024),
        }
        .validate()
        .is_ok());
        assert!(SplitSpec {
            train_years: (2010, 2015),
            test_years: (2015, 2020),
        }
        .validate()
        .is_err());
        assert!(SplitSpec {
            train_years: (2015, 2010),
            test_years: (2020, 2024),
        }
        .validate()
        .is_err());
    }

    /// Builds aligned (features, records) over real construction code so
    /// window tests exercise the whole path.
    fn windows_fixture(
        start: DateTime<Utc>,
        hours: usize,
    ) -> (FeaturePipeline, Vec<FeatureVector>, Vec<MeteoRecord>) {
        let p = pipeline();
        let records = flat_records(start, hours);
        let feats = p.build_features(&records).unwrap();
        let stats = fit_normalization(&feats).unwrap();
        let normed = normalize_all(&feats, &stats);
        (p, normed, records)
    }

    #[test]
    fn make_windows_count_without_boundary() {
        let (p, normed, records) = windows_fixture(utc(2012, 5, 1, 0), 1000);
        let split = SplitSpec {
            train_years: (2010, 2015),
            test_years: (2020, 2024),
        };
        let (train, test) = p.make_windows(&normed, &records, &split).unwrap();
        assert_eq!(train.len(), 1000 - 24);
        assert!(test.is_empty());
        for w in &train {
            assert_eq!(w.features.rows, 24);
            assert_eq!(w.features.cols, NUM_FEATURES);
            assert_eq!(w.celestial.rows, 24);
            assert_eq!(w.celestial.cols, 3);
        }
    }

    #[test]
    fn make_windows_drops_boundary_straddlers() {
        // 2012-12-30 .. 2013-01-03: the split puts 2012 in train and 2013
        // in test, so windows spanning New Year must vanish.
        let (p, normed, records) = windows_fixture(utc(2012, 12, 30, 0), 120);
        let split = SplitSpec {
            train_years: (2012, 2012),
            test_years: (2013, 2013),
        };
        let (train, test) = p.make_windows(&normed, &records, &split).unwrap();
        for w in &train {
            assert_eq!(w.target_time.year(), 2012);
        }
        for w in &test {
            assert_eq!(w.target_time.year(), 2013);
        }
        // 48 hours of 2012 allow 48 - 24 = 24 fully-2012 windows; the rest
        // straddle or belong to 2013.
        assert_eq!(train.len(), 24);
        assert!(!test.is_empty());
        let total_possible = 120 - 24;
        assert!(train.len() + test.len() < total_possible);
    }

    #[test]
    fn make_windows_partitions_are_disjoint() {
        let (p, normed, records) = windows_fixture(utc(2012, 12, 30, 0), 120);
        let split = SplitSpec {
            train_years: (2012, 2012),
            test_years: (2013, 2013),
        };
        let (train, test) = p.make_windows(&normed, &records, &split).unwrap();
        let train_targets: std::collections::BTreeSet<_> =
            train.iter().map(|w| w.target_time).collect();
        for w in &test {
            assert!(!train_targets.contains(&w.target_time));
        }
        let test_start = utc(2013, 1, 1, 0);
        for w in &train {
            assert!(w.target_time < test_start);
        }
    }

    #[test]
    fn feature_names_are_unique_and_complete() {
        let set: std::collections::BTreeSet<_> = FEATURE_NAMES.iter().collect();
        assert_eq!(set.len(), NUM_FEATURES);
        for name in EXEMPT_FROM_NORMALIZATION {
            assert!(FEATURE_NAMES.contains(&name));
        }
    }

    #[test]
    fn norm_stats_serde_round_trip() {
        let feats = random_features(150, 8);
        let stats = fit_normalization(&feats).unwrap();
        let json = serde_json::to_string(&stats).unwrap();
        let back: NormStats = serde_json::from_str(&json).unwrap();
        assert_eq!(stats, back);
    }
}
