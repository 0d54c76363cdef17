//! Solar geometry and the clear-sky irradiance anchors.
//!
//! Everything downstream leans on three deterministic quantities computed
//! here: the solar zenith angle, the Ineichen–Perez clear-sky GHI that
//! bounds every forecast, and top-of-atmosphere horizontal irradiance.
//!
//! Position uses the NOAA almanac series (Julian-century mean solar
//! elements, equation of center, apparent longitude, corrected obliquity),
//! accurate to roughly 0.01° over 1950–2100. Day-of-year declination and
//! the Sun–Earth distance correction use the Spencer (1971) Fourier
//! series. Air mass is Kasten–Young (1989), normalized so the
//! overhead-sun value is exactly 1.
//!
//! Convention: hourly energy values (Wh/m²) equal the instantaneous power
//! evaluated at the interval midpoint, so `clear_sky_ghi` and
//! `extraterrestrial_horizontal` evaluate the sun 30 minutes past the
//! hour label. `solar_position` itself is instantaneous.

use chrono::{DateTime, Datelike, Duration, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Supported range for position computations; the almanac series are
/// validated against a high-precision oracle inside this span.
pub const ERA_YEARS: (i32, i32) = (1950, 2100);

/// Default total solar irradiance at 1 AU, W/m².
pub const SOLAR_CONSTANT: f64 = 1361.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoLocation {
    /// Degrees north, in [-90, 90].
    pub latitude: f64,
    /// Degrees east, in [-180, 180].
    pub longitude: f64,
    /// Meters above sea level, >= -430 (lowest land surface).
    pub altitude: f64,
}

impl GeoLocation {
    pub fn new(latitude: f64, longitude: f64, altitude: f64) -> Result<Self> {
        let loc = GeoLocation {
            latitude,
            longitude,
            altitude,
        };
        loc.validate()?;
        Ok(loc)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.latitude.is_finite() || self.latitude.abs() > 90.0 {
            return Err(Error::domain(format!(
                "latitude {} outside [-90, 90]",
                self.latitude
            )));
        }
        if !self.longitude.is_finite() || self.longitude.abs() > 180.0 {
            return Err(Error::domain(format!(
                "longitude {} outside [-180, 180]",
                self.longitude
            )));
        }
        if !self.altitude.is_finite() || self.altitude < -430.0 || self.altitude > 9000.0 {
            return Err(Error::domain(format!(
                "altitude {} m outside [-430, 9000]",
                self.altitude
            )));
        }
        Ok(())
    }

    /// Local standard-time offset implied by the longitude, whole hours.
    pub fn standard_offset_hours(&self) -> i32 {
        (self.longitude / 15.0).round() as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolarPosition {
    /// Solar declination, radians.
    pub declination: f64,
    /// Hour angle, radians (0 at true solar noon, positive afternoon).
    pub hour_angle: f64,
    /// Zenith angle, degrees in [0, 180].
    pub zenith: f64,
    /// cos(zenith); kept explicitly because the gate math consumes it.
    pub cos_zenith: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClearSkyParams {
    /// Linke turbidity TL in [1, 10]; total column attenuation relative
    /// to a clean dry atmosphere.
    pub linke_turbidity: f64,
    /// W/m² at 1 AU.
    pub solar_constant: f64,
    /// Optional monthly TL climatology (January first); overrides
    /// `linke_turbidity` when present.
    pub monthly_turbidity: Option<[f64; 12]>,
}

impl Default for ClearSkyParams {
    fn default() -> Self {
        ClearSkyParams {
            linke_turbidity: 3.5,
            solar_constant: SOLAR_CONSTANT,
            monthly_turbidity: None,
        }
    }
}

impl ClearSkyParams {
    pub fn validate(&self) -> Result<()> {
        let check = |tl: f64| -> Result<()> {
            if !(1.0..=10.0).contains(&tl) {
                return Err(Error::domain(format!("Linke turbidity {tl} outside [1, 10]")));
            }
            Ok(())
        };
        check(self.linke_turbidity)?;
        if let Some(table) = &self.monthly_turbidity {
            for &tl in table {
                check(tl)?;
            }
        }
        if !(self.solar_constant > 0.0) {
            return Err(Error::domain(format!(
                "solar constant {} must be positive",
                self.solar_constant
            )));
        }
        Ok(())
    }

    /// Turbidity for a 1-based month.
    pub fn turbidity_for_month(&self, month: u32) -> f64 {
        match &self.monthly_turbidity {
            Some(table) => table[(month.clamp(1, 12) - 1) as usize],
            None => self.linke_turbidity,
        }
    }
}

fn check_day_of_year(day: u32) -> Result<()> {
    if (1..=366).contains(&day) {
        Ok(())
    } else {
        Err(Error::domain(format!("day_of_year {day} outside [1, 366]")))
    }
}

fn check_era(t: DateTime<Utc>) -> Result<()> {
    let y = t.year();
    if y < ERA_YEARS.0 || y > ERA_YEARS.1 {
        return Err(Error::domain(format!(
            "timestamp year {y} outside supported range {}-{}",
            ERA_YEARS.0, ERA_YEARS.1
        )));
    }
    Ok(())
}

/// Spencer (1971) declination series, radians.
pub fn solar_declination(day_of_year: u32) -> Result<f64> {
    check_day_of_year(day_of_year)?;
    let g = std::f64::consts::TAU * (day_of_year as f64 - 1.0) / 365.0;
    Ok(0.006918 - 0.399912 * g.cos() + 0.070257 * g.sin()
        - 0.006758 * (2.0 * g).cos()
        + 0.000907 * (2.0 * g).sin()
        - 0.002697 * (3.0 * g).cos()
        + 0.00148 * (3.0 * g).sin())
}

/// Spencer (1971) Sun–Earth distance correction E0 = (r0/r)²,
/// dimensionless, ~[0.966, 1.035] over the year.
pub fn eccentricity_correction(day_of_year: u32) -> Result<f64> {
    check_day_of_year(day_of_year)?;
    let g = std::f64::consts::TAU * (day_of_year as f64 - 1.0) / 365.0;
    Ok(1.000110
        + 0.034221 * g.cos()
        + 0.001280 * g.sin()
        + 0.000719 * (2.0 * g).cos()
        + 0.000077 * (2.0 * g).sin())
}

fn julian_day(t: DateTime<Utc>) -> f64 {
    2440587.5 + t.timestamp_millis() as f64 / 86_400_000.0
}

/// Declination (degrees) and equation of time (minutes) from the NOAA
/// almanac series.
fn sun_almanac(t: DateTime<Utc>) -> (f64, f64) {
    let d = std::f64::consts::PI / 180.0;
    let jc = (julian_day(t) - 2_451_545.0) / 36_525.0;

    let mean_long = (280.46646 + jc * (36_000.76983 + jc * 0.0003032)).rem_euclid(360.0);
    let mean_anom = 357.52911 + jc * (35_999.05029 - 0.0001537 * jc);
    let eccent = 0.016708634 - jc * (0.000042037 + 0.0000001267 * jc);

    let eq_center = (mean_anom * d).sin() * (1.914602 - jc * (0.004817 + 0.000014 * jc))
        + (2.0 * mean_anom * d).sin() * (0.019993 - 0.000101 * jc)
        + (3.0 * mean_anom * d).sin() * 0.000289;

    let true_long = mean_long + eq_center;
    let omega = 125.04 - 1934.136 * jc;
    let apparent_long = true_long - 0.00569 - 0.00478 * (omega * d).sin();

    let mean_obliq = 23.0 + (26.0 + (21.448 - jc * (46.815 + jc * (0.00059 - jc * 0.001813))) / 60.0) / 60.0;
    let obliq = mean_obliq + 0.00256 * (omega * d).cos();

    let declination = ((obliq * d).sin() * (apparent_long * d).sin()).asin() / d;

    let var_y = (obliq * d / 2.0).tan().powi(2);
    let eot_minutes = 4.0
        * (var_y * (2.0 * mean_long * d).sin() - 2.0 * eccent * (mean_anom * d).sin()
            + 4.0 * eccent * var_y * (mean_anom * d).sin() * (2.0 * mean_long * d).cos()
            - 0.5 * var_y * var_y * (4.0 * mean_long * d).sin()
            - 1.25 * eccent * eccent * (2.0 * mean_anom * d).sin())
        / d;

    (declination, eot_minutes)
}

/// Solar position at an instant: declination, hour angle, zenith.
///
/// True solar time folds in the equation of time and the longitude
/// correction; the hour angle is zero at true solar noon.
pub fn solar_position(loc: &GeoLocation, t: DateTime<Utc>) -> Result<SolarPosition> {
    loc.validate()?;
    check_era(t)?;
    let d = std::f64::consts::PI / 180.0;

    let (decl_deg, eot_min) = sun_almanac(t);
    let utc_minutes = t.hour() as f64 * 60.0
        + t.minute() as f64
        + t.second() as f64 / 60.0
        + t.nanosecond() as f64 / 60e9;
    let true_solar_minutes = (utc_minutes + eot_min + 4.0 * loc.longitude).rem_euclid(1440.0);
    let hour_angle_deg = true_solar_minutes / 4.0 - 180.0;

    let decl = decl_deg * d;
    let ha = hour_angle_deg * d;
    let cos_zenith = loc.latitude.to_radians().sin() * decl.sin()
        + loc.latitude.to_radians().cos() * decl.cos() * ha.cos();
    let cos_zenith = cos_zenith.clamp(-1.0, 1.0);

    Ok(SolarPosition {
        declination: decl,
        hour_angle: ha,
        zenith: cos_zenith.acos() / d,
        cos_zenith,
    })
}

/// Kasten–Young (1989) relative air mass, scaled so the zenith-0 value is
/// exactly 1. Returns `f64::INFINITY` as the night sentinel for
/// zenith >= 90°.
pub fn relative_air_mass(zenith_deg: f64) -> f64 {
    debug_assert!((0.0..=180.0).contains(&zenith_deg));
    if zenith_deg >= 90.0 {
        return f64::INFINITY;
    }
    kasten_young(zenith_deg) / kasten_young(0.0)
}

fn kasten_young(zenith_deg: f64) -> f64 {
    let cos_z = zenith_deg.to_radians().cos();
    1.0 / (cos_z + 0.50572 * (96.07995 - zenith_deg).powf(-1.6364))
}

/// Ineichen–Perez clear-sky global horizontal irradiance from its scalar
/// ingredients. Altitude enters through the published coefficient fits.
pub fn clear_sky_from_parts(
    cos_zenith: f64,
    air_mass: f64,
    e0: f64,
    altitude_m: f64,
    linke_turbidity: f64,
    solar_constant: f64,
) -> f64 {
    if cos_zenith <= 0.0 {
        return 0.0;
    }
    let fh1 = (-altitude_m / 8000.0).exp();
    let fh2 = (-altitude_m / 1250.0).exp();
    let cg1 = 5.09e-5 * altitude_m + 0.868;
    let cg2 = 3.92e-5 * altitude_m + 0.0387;
    let ghi = cg1
        * solar_constant
        * e0
        * cos_zenith
        * (-cg2 * air_mass * (fh1 + fh2 * (linke_turbidity - 1.0))).exp();
    ghi.max(0.0)
}

/// Hourly clear-sky GHI (Wh/m²) for the hour labeled `t`, evaluated at the
/// interval midpoint. Exactly 0.0 whenever the midpoint sun is at or below
/// the horizon.
pub fn clear_sky_ghi(loc: &GeoLocation, t: DateTime<Utc>, params: &ClearSkyParams) -> Result<f64> {
    let mid = t + Duration::minutes(30);
    let pos = solar_position(loc, mid)?;
    if pos.zenith >= 90.0 {
        return Ok(0.0);
    }
    let e0 = eccentricity_correction(mid.ordinal())?;
    let am = relative_air_mass(pos.zenith);
    Ok(clear_sky_from_parts(
        pos.cos_zenith,
        am,
        e0,
        loc.altitude,
        params.turbidity_for_month(mid.month()),
        params.solar_constant,
    ))
}

/// Top-of-atmosphere horizontal irradiance from its scalar ingredients.
pub fn extraterrestrial_from_parts(cos_zenith: f64, e0: f64, solar_constant: f64) -> f64 {
    solar_constant * e0 * cos_zenith.max(0.0)
}

/// Hourly top-of-atmosphere horizontal irradiance (Wh/m²), midpoint
/// convention as for `clear_sky_ghi`. Exactly 0.0 at night.
pub fn extraterrestrial_horizontal(
    loc: &GeoLocation,
    t: DateTime<Utc>,
    solar_constant: f64,
) -> Result<f64> {
    let mid = t + Duration::minutes(30);
    let pos = solar_position(loc, mid)?;
    if pos.zenith >= 90.0 {
        return Ok(0.0);
    }
    let e0 = eccentricity_correction(mid.ordinal())?;
    Ok(extraterrestrial_from_parts(pos.cos_zenith, e0, solar_constant))
}
