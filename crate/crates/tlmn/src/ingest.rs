//! Data acquisition: NASA POWER CSV parsing, cached HTTP fetch, gap
//! detection, and a seeded synthetic weather generator.
//!
//! The generator drives a three-regime Markov chain (clear, partly
//! cloudy, overcast/dust) whose transmissivity multiplies the
//! deterministic clear-sky curve, so every downstream stage can be tested
//! offline against known ground truth.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::MeteoRecord;
use crate::solar::{clear_sky_ghi, solar_position, ClearSkyParams, GeoLocation};

/// Maps source CSV columns onto MeteoRecord fields. The parser accepts
/// either the mapped source name or the canonical field name for each
/// column, so files written by this crate re-parse under the default map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerColumnMap {
    pub ghi: String,
    pub dni: String,
    pub dhi: String,
    pub t2m: String,
    pub rh: String,
    pub ws: String,
    pub ps: String,
    /// Value marking a missing observation.
    pub sentinel: f64,
    /// Multiplier applied to the three irradiance columns (1.0 when the
    /// source already delivers Wh/m² per hour).
    pub irradiance_scale: f64,
}

impl Default for PowerColumnMap {
    fn default() -> Self {
        PowerColumnMap {
            ghi: "ALLSKY_SFC_SW_DWN".into(),
            dni: "ALLSKY_SFC_SW_DNI".into(),
            dhi: "ALLSKY_SFC_SW_DIFF".into(),
            t2m: "T2M".into(),
            rh: "RH2M".into(),
            ws: "WS2M".into(),
            ps: "PS".into(),
            sentinel: -999.0,
            irradiance_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRun {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub hours: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub runs: Vec<GapRun>,
}

impl GapReport {
    pub fn total_missing_hours(&self) -> usize {
        self.runs.iter().map(|r| r.hours).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }
}

fn gap_report(records: &[MeteoRecord]) -> GapReport {
    let mut runs = Vec::new();
    for pair in records.windows(2) {
        let missing = (pair[1].timestamp - pair[0].timestamp).num_hours() - 1;
        if missing > 0 {
            runs.push(GapRun {
                start: pair[0].timestamp + Duration::hours(1),
                end: pair[1].timestamp - Duration::hours(1),
                hours: missing as usize,
            });
        }
    }
    GapReport { runs }
}

fn parse_field(token: &str, line: usize, col: &str) -> Result<f64> {
    token.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse '{}' in column {col}", token.trim()),
    })
}

/// Parses POWER-style CSV text. Handles the "-BEGIN HEADER-" preamble the
/// live endpoint emits, takes timestamps either from a `timestamp` column
/// (RFC 3339) or from YEAR/MO/DY/HR columns (UTC), drops rows carrying
/// the sentinel, and reports every missing-hour run.
pub fn parse_power_str(
    content: &str,
    map: &PowerColumnMap,
) -> Result<(Vec<MeteoRecord>, GapReport)> {
    let mut lines: Vec<(usize, &str)> = content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .collect();
    if let Some(pos) = lines.iter().position(|(_, l)| l.contains("-END HEADER-")) {
        lines.drain(..=pos);
    }
    lines.retain(|(_, l)| !l.trim().is_empty());
    let (header_line_no, header) = *lines
        .first()
        .ok_or_else(|| Error::data("empty CSV: no header row"))?;
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    let find = |source: &str, canonical: &str| -> Result<usize> {
        columns
            .iter()
            .position(|c| c == source)
            .or_else(|| columns.iter().position(|c| c == canonical))
            .ok_or_else(|| Error::Parse {
                line: header_line_no,
                msg: format!("column '{source}' (or '{canonical}') not found in header"),
            })
    };
    let idx = [
        find(&map.ghi, "ghi")?,
        find(&map.dni, "dni")?,
        find(&map.dhi, "dhi")?,
        find(&map.t2m, "t2m")?,
        find(&map.rh, "rh")?,
        find(&map.ws, "ws")?,
        find(&map.ps, "ps")?,
    ];
    let ts_col = columns.iter().position(|c| c == "timestamp");
    let ymdh = if ts_col.is_none() {
        let get = |n: &str| {
            columns.iter().position(|c| c == n).ok_or_else(|| Error::Parse {
                line: header_line_no,
                msg: format!("neither 'timestamp' nor '{n}' found in header"),
            })
        };
        Some((get("YEAR")?, get("MO")?, get("DY")?, get("HR")?))
    } else {
        None
    };

    let mut records = Vec::new();
    for &(line_no, line) in &lines[1..] {
        let tokens: Vec<&str> = line.split(',').collect();
        if tokens.len() != columns.len() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!(
                    "row has {} fields, header has {}",
                    tokens.len(),
                    columns.len()
                ),
            });
        }
        let timestamp = if let Some(c) = ts_col {
            DateTime::parse_from_rfc3339(tokens[c].trim())
                .map_err(|e| Error::Parse {
                    line: line_no,
                    msg: format!("bad timestamp '{}': {e}", tokens[c].trim()),
                })?
                .with_timezone(&Utc)
        } else {
            let (yi, mi, di, hi) = ymdh.unwrap();
            let y = parse_field(tokens[yi], line_no, "YEAR")? as i32;
            let mo = parse_field(tokens[mi], line_no, "MO")? as u32;
            let d = parse_field(tokens[di], line_no, "DY")? as u32;
            let h = parse_field(tokens[hi], line_no, "HR")? as u32;
            Utc.with_ymd_and_hms(y, mo, d, h, 0, 0)
                .single()
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    msg: format!("invalid date {y}-{mo}-{d} {h}:00"),
                })?
        };
        let mut vals = [0.0; 7];
        let names = ["ghi", "dni", "dhi", "t2m", "rh", "ws", "ps"];
        let mut missing = false;
        for (k, &ci) in idx.iter().enumerate() {
            let v = parse_field(tokens[ci], line_no, names[k])?;
            if v == map.sentinel {
                missing = true;
                break;
            }
            vals[k] = v;
        }
        if missing {
            continue;
        }
        records.push(MeteoRecord {
            timestamp,
            ghi: (vals[0] * map.irradiance_scale).max(0.0),
            dni: (vals[1] * map.irradiance_scale).max(0.0),
            dhi: (vals[2] * map.irradiance_scale).max(0.0),
            t2m: vals[3],
            rh: vals[4].clamp(0.0, 100.0),
            ws: vals[5].max(0.0),
            ps: vals[6],
        });
    }

    records.sort_by_key(|r| r.timestamp);
    for pair in records.windows(2) {
        if pair[0].timestamp == pair[1].timestamp {
            return Err(Error::data(format!(
                "duplicate timestamp {}",
                pair[0].timestamp
            )));
        }
    }
    let gaps = gap_report(&records);
    Ok((records, gaps))
}

pub fn parse_power_csv(
    path: &Path,
    map: &PowerColumnMap,
) -> Result<(Vec<MeteoRecord>, GapReport)> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    parse_power_str(&content, map)
}

/// Writes records as canonical CSV (RFC 3339 UTC timestamps, shortest
/// round-trip floats) re-parseable by `parse_power_csv`.
pub fn write_records_csv(path: &Path, records: &[MeteoRecord]) -> Result<()> {
    let mut out = String::from("timestamp,ghi,dni,dhi,t2m,rh,ws,ps\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            r.ghi,
            r.dni,
            r.dhi,
            r.t2m,
            r.rh,
            r.ws,
            r.ps
        ));
    }
    std::fs::write(path, out)
        .map_err(|e| Error::data(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TransportResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

/// HTTP GET abstraction so fetching is testable without a network.
pub trait Transport {
    fn get(&self, url: &str) -> Result<TransportResponse>;
}

pub struct HttpTransport;

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<TransportResponse> {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(std::time::Duration::from_secs(120)))
            .build();
        let agent = ureq::Agent::new_with_config(config);
        let mut response = agent
            .get(url)
            .call()
            .map_err(|e| Error::fetch(format!("request to POWER endpoint failed: {e}")))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_vec()
            .map_err(|e| Error::fetch(format!("reading POWER response failed: {e}")))?;
        Ok(TransportResponse { status, body })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn validate(&self) -> Result<()> {
        if self.start > self.end {
            return Err(Error::config(format!(
                "date range {} .. {} is reversed",
                self.start, self.end
            )));
        }
        Ok(())
    }

    pub fn hours(&self) -> usize {
        ((self.end - self.start).num_days() as usize + 1) * 24
    }
}

/// NASA POWER hourly point endpoint URL for the configured parameters.
pub fn power_url(loc: &GeoLocation, range: &DateRange, map: &PowerColumnMap) -> String {
    format!(
        "https://power.larc.nasa.gov/api/temporal/hourly/point?parameters={},{},{},{},{},{},{}&community=RE&latitude={}&longitude={}&start={}&end={}&format=CSV&time-standard=utc",
        map.ghi,
        map.dni,
        map.dhi,
        map.t2m,
        map.rh,
        map.ws,
        map.ps,
        loc.latitude,
        loc.longitude,
        range.start.format("%Y%m%d"),
        range.end.format("%Y%m%d"),
    )
}

/// Downloads (or reuses) the raw POWER CSV for one location and range.
/// The cache key is a digest of the full request URL, so identical calls
/// never touch the network twice.
pub fn fetch_power(
    loc: &GeoLocation,
    range: &DateRange,
    cache_dir: &Path,
    transport: &dyn Transport,
) -> Result<PathBuf> {
    loc.validate()?;
    range.validate()?;
    let url = power_url(loc, range, &PowerColumnMap::default());
    let digest = Sha256::digest(url.as_bytes());
    let key: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    std::fs::create_dir_all(cache_dir)?;
    let path = cache_dir.join(format!("power_{key}.csv"));
    if path.exists() {
        return Ok(path);
    }

    let response = transport.get(&url)?;
    if response.status != 200 {
        return Err(Error::fetch(format!(
            "POWER endpoint returned HTTP {}",
            response.status
        )));
    }
    let text = String::from_utf8(response.body)
        .map_err(|_| Error::integrity("POWER response is not valid UTF-8"))?;

    // A complete hourly download has exactly one data row per hour.
    let (records, gaps) = parse_power_str(&text, &PowerColumnMap::default())?;
    let data_rows = records.len() + gaps.total_missing_hours();
    let expected = range.hours();
    if data_rows != expected {
        return Err(Error::integrity(format!(
            "expected {expected} hourly rows, response covers {data_rows}; \
             download may be truncated"
        )));
    }

    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &text)?;
    std::fs::rename(&tmp, &path)?;
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub mean_tau: f64,
    pub volatility: f64,
}

/// Three-regime synthetic climate: clear, partly cloudy, overcast/dust.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub location: GeoLocation,
    pub start_year: i32,
    pub years: usize,
    pub seed: u64,
    /// Row-stochastic transition matrix over the three regimes.
    pub transition: [[f64; 3]; 3],
    pub regimes: [RegimeParams; 3],
    pub linke_turbidity: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            location: GeoLocation {
                latitude: 15.65,
                longitude: 32.48,
                altitude: 380.0,
            },
            start_year: 2010,
            years: 1,
            seed: 42,
            transition: [
                [0.92, 0.06, 0.02],
                [0.15, 0.70, 0.15],
                [0.05, 0.25, 0.70],
            ],
            regimes: [
                RegimeParams { mean_tau: 0.97, volatility: 0.02 },
                RegimeParams { mean_tau: 0.65, volatility: 0.12 },
                RegimeParams { mean_tau: 0.25, volatility: 0.08 },
            ],
            linke_turbidity: 3.5,
        }
    }
}

/// AR(1) persistence of the transmissivity noise.
const TAU_RHO: f64 = 0.85;
pub const TAU_MIN: f64 = 0.05;
pub const TAU_MAX: f64 = 1.1;

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        self.location.validate()?;
        if self.years == 0 {
            return Err(Error::config("years must be >= 1"));
        }
        if self.start_year < 1950 || self.start_year + self.years as i32 > 2101 {
            return Err(Error::config(
                "synthetic span must lie within the 1950-2100 ephemeris era",
            ));
        }
        for (i, row) in self.transition.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::config(format!(
                    "transition row {i} must be non-negative and sum to 1, got {row:?}"
                )));
            }
        }
        for (i, r) in self.regimes.iter().enumerate() {
            if !(TAU_MIN..=TAU_MAX).contains(&r.mean_tau) || r.volatility < 0.0 {
                return Err(Error::config(format!(
                    "regime {i} parameters out of range: {r:?}"
                )));
            }
        }
        if !(1.0..=10.0).contains(&self.linke_turbidity) {
            return Err(Error::config("linke_turbidity must be in [1, 10]"));
        }
        Ok(())
    }
}

/// Generates hourly records plus the ground-truth transmissivity series.
pub fn synth_generate(cfg: &SyntheticConfig) -> Result<(Vec<MeteoRecord>, Vec<f64>)> {
    cfg.validate()?;
    let params = ClearSkyParams {
        linke_turbidity: cfg.linke_turbidity,
        ..ClearSkyParams::default()
    };
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let start = Utc.with_ymd_and_hms(cfg.start_year, 1, 1, 0, 0, 0).unwrap();
    let end = Utc
        .with_ymd_and_hms(cfg.start_year + cfg.years as i32, 1, 1, 0, 0, 0)
        .unwrap();
    let hours = (end - start).num_hours() as usize;

    let tz = cfg.location.standard_offset_hours() as f64;
    let mut records = Vec::with_capacity(hours);
    let mut taus = Vec::with_capacity(hours);
    let mut regime = 0usize;
    let mut ar = 0.0f64;

    for h in 0..hours {
        let t = start + Duration::hours(h as i64);

        // Markov regime step.
        let u: f64 = rng.random_range(0.0..1.0);
        let row = &cfg.transition[regime];
        regime = if u < row[0] {
            0
        } else if u < row[0] + row[1] {
            1
        } else {
            2
        };
        let rp = &cfg.regimes[regime];
        let z: f64 = normal.sample(&mut rng);
        ar = TAU_RHO * ar + rp.volatility * (1.0 - TAU_RHO * TAU_RHO).sqrt() * z;
        let tau = (rp.mean_tau + ar).clamp(TAU_MIN, TAU_MAX);
        taus.push(tau);

        let clear = clear_sky_ghi(&cfg.location, t, &params)?;
        let ghi = tau * clear;
        let diffuse_fraction = (1.05 - tau).clamp(0.1, 1.0);
        let dhi = diffuse_fraction * ghi;
        let beam_h = ghi - dhi;
        let cos_z = solar_position(&cfg.location, t + Duration::minutes(30))?.cos_zenith;
        let dni = if cos_z > 0.05 {
            (beam_h / cos_z).clamp(0.0, 1361.0)
        } else {
            0.0
        };

        let doy = t.ordinal() as f64;
        let local_hour = (t.hour() as f64 + tz).rem_euclid(24.0);
        let tau_day = std::f64::consts::TAU;
        let season = (tau_day * (doy - 105.0) / 365.0).sin();
        let diurnal = (tau_day * (local_hour - 9.0) / 24.0).sin();
        let t2m = 28.0 + 8.0 * season + 6.0 * diurnal + 0.5 * normal.sample(&mut rng);
        let rh = (30.0 - 15.0 * season - 8.0 * diurnal + 3.0 * normal.sample(&mut rng))
            .clamp(5.0, 95.0);
        let ws = (3.0 + 1.5 * (tau_day * local_hour / 24.0 + 1.0).sin()
            + 0.8 * normal.sample(&mut rng).abs())
        .clamp(0.0, 25.0);
        let ps = 97.0 + 0.3 * (tau_day * doy / 365.0).sin() + 0.05 * normal.sample(&mut rng);

        records.push(MeteoRecord {
            timestamp: t,
            ghi,
            dni,
            dhi,
            t2m,
            rh,
            ws,
            ps,
        });
    }
    Ok((records, taus))
}

/// All-clear variant of the synthetic config: one regime, transmissivity
/// exactly 1, zero noise, so GHI equals the clear-sky curve bit-for-bit.
pub fn all_clear_config(seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        seed,
        transition: [[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
        regimes: [
            RegimeParams { mean_tau: 1.0, volatility: 0.0 },
            RegimeParams { mean_tau: 1.0, volatility: 0.0 },
            RegimeParams { mean_tau: 1.0, volatility: 0.0 },
        ],
        ..SyntheticConfig::default()
    }
}

#[cfg(test)]
pub(crate) struct MockTransport {
    pub responses: std::cell::RefCell<Vec<TransportResponse>>,
    pub calls: std::cell::RefCell<usize>,
}

#[cfg(test)]
impl Transport for MockTransport {
    fn get(&self, _url: &str) -> Result<TransportResponse> {
        *self.calls.borrow_mut() += 1;
        self.responses
            .borrow_mut()
            .pop()
            .ok_or_else(|| Error::fetch("mock transport exhausted"))
    }
}
