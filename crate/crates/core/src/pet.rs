//! Potential-evapotranspiration preparation: extraterrestrial radiation,
//! the Hargreaves temperature method, and daily-to-monthly aggregation.
//!
//! Radiation follows the FAO-56 closed-form solar geometry (Allen et al.,
//! 1998); PET follows Hargreaves & Samani (1985). Daily PET is summed to
//! monthly totals, precipitation is summed, and temperatures are averaged
//! over the days of each month.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{real, Real};
use crate::timeseries::{days_in_month, MonthStamp, MonthlyForcing, MonthlySeries, TimeseriesError};

/// Validity band (degrees) for the sunset-hour-angle formula; beyond it the
/// arccos argument leaves [-1, 1] in polar night/day conditions.
pub const LATITUDE_BAND_DEG: f64 = 66.5;

/// Solar constant, MJ m⁻² min⁻¹.
const SOLAR_CONSTANT: f64 = 0.0820;

#[derive(Debug, Error)]
pub enum PetError {
    #[error("latitude {0}° outside ±{LATITUDE_BAND_DEG}°")]
    LatitudeOutOfRange(f64),
    #[error("day of year {0} outside 1..=366")]
    InvalidDayOfYear(u32),
    #[error("tmax {tmax} < tmin {tmin} at {date}")]
    TmaxBelowTmin { date: String, tmax: f64, tmin: f64 },
    #[error("partial month {month}: expected {expected} days, found {found}")]
    PartialMonth {
        month: MonthStamp,
        expected: u32,
        found: u32,
    },
    #[error("daily records not contiguous at {0}")]
    NonContiguousDays(String),
    #[error("no daily records supplied")]
    Empty,
    #[error("cannot parse `{0}` as YYYY-MM-DD")]
    BadDate(String),
    #[error(transparent)]
    Timeseries(#[from] TimeseriesError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

// write! targets in thiserror need named fields visible; month carries its own display
impl PetError {
    fn partial(month: MonthStamp, expected: u32, found: u32) -> Self {
        PetError::PartialMonth {
            month,
            expected,
            found,
        }
    }
}

/// A calendar day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CalendarDay {
    pub year: i32,
    pub month: u8,
    pub day: u8,
}

impl CalendarDay {
    pub fn new(year: i32, month: u32, day: u32) -> Result<Self, PetError> {
        let stamp = MonthStamp::new(year, month)
            .map_err(|_| PetError::BadDate(format!("{year}-{month}-{day}")))?;
        if day == 0 || day > stamp.days_in_month() {
            return Err(PetError::BadDate(format!("{year}-{month:02}-{day:02}")));
        }
        Ok(CalendarDay {
            year,
            month: month as u8,
            day: day as u8,
        })
    }

    pub fn month_stamp(&self) -> MonthStamp {
        MonthStamp::new(self.year, u32::from(self.month)).unwrap()
    }

    pub fn day_of_year(&self) -> u32 {
        let mut doy = u32::from(self.day);
        for m in 1..u32::from(self.month) {
            doy += days_in_month(self.year, m);
        }
        doy
    }

    /// The next calendar day.
    pub fn succ(&self) -> CalendarDay {
        if u32::from(self.day) < self.month_stamp().days_in_month() {
            CalendarDay {
                day: self.day + 1,
                ..*self
            }
        } else {
            let next = self.month_stamp().add_months(1);
            CalendarDay {
                year: next.year,
                month: next.month,
                day: 1,
            }
        }
    }
}

impl fmt::Display for CalendarDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

impl FromStr for CalendarDay {
    type Err = PetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PetError::BadDate(s.to_string());
        let mut it = s.split('-');
        let y: i32 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let m: u32 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let d: u32 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if it.next().is_some() {
            return Err(bad());
        }
        CalendarDay::new(y, m, d)
    }
}

/// One day of basin-averaged climate input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClimateRecordDaily<T> {
    pub date: CalendarDay,
    pub p_mm: T,
    pub tmax_c: T,
    pub tmin_c: T,
    /// Measured extraterrestrial radiation, bypassing the solar-geometry
    /// computation when present.
    pub ra_mj: Option<T>,
}

impl<T: Real> ClimateRecordDaily<T> {
    pub fn validate(&self) -> Result<(), PetError> {
        if self.tmax_c < self.tmin_c {
            return Err(PetError::TmaxBelowTmin {
                date: self.date.to_string(),
                tmax: self.tmax_c.to_f64().unwrap_or(f64::NAN),
                tmin: self.tmin_c.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }
}

/// Extraterrestrial radiation (MJ m⁻² day⁻¹) for a latitude and day of year.
///
/// Ra = (24·60/π)·Gsc·dr·(ωs·sinφ·sinδ + cosφ·cosδ·sinωs) with
/// dr = 1 + 0.033·cos(2πJ/365), δ = 0.409·sin(2πJ/365 − 1.39),
/// ωs = arccos(−tanφ·tanδ).
pub fn extraterrestrial_radiation<T: Real>(
    latitude_deg: T,
    day_of_year: u32,
) -> Result<T, PetError> {
    let lat = latitude_deg.to_f64().unwrap_or(f64::NAN);
    if !lat.is_finite() || lat.abs() > LATITUDE_BAND_DEG {
        return Err(PetError::LatitudeOutOfRange(lat));
    }
    if !(1..=366).contains(&day_of_year) {
        return Err(PetError::InvalidDayOfYear(day_of_year));
    }
    let phi: T = latitude_deg * T::PI() / real(180.0);
    let j: T = real(day_of_year as f64);
    let two_pi_j = real::<T>(2.0) * T::PI() * j / real(365.0);
    let dr = T::one() + real::<T>(0.033) * two_pi_j.cos();
    let delta = real::<T>(0.409) * (two_pi_j - real(1.39)).sin();
    // |tanφ·tanδ| < 1 inside the latitude band, so acos is total here
    let ws = (-phi.tan() * delta.tan()).acos();
    let ra = real::<T>(24.0 * 60.0 / std::f64::consts::PI)
        * real::<T>(SOLAR_CONSTANT)
        * dr
        * (ws * phi.sin() * delta.sin() + phi.cos() * delta.cos() * ws.sin());
    Ok(ra.max(T::zero()))
}

/// Hargreaves daily PET (mm/day): 0.0023·Ra·√(Tmax−Tmin)·(Tavg+17.8),
/// clamped at zero when the temperature term goes negative.
pub fn hargreaves_pet_daily<T: Real>(tmax_c: T, tmin_c: T, ra: T) -> Result<T, PetError> {
    if tmax_c < tmin_c {
        return Err(PetError::TmaxBelowTmin {
            date: "<scalar>".into(),
            tmax: tmax_c.to_f64().unwrap_or(f64::NAN),
            tmin: tmin_c.to_f64().unwrap_or(f64::NAN),
        });
    }
    let tavg = (tmax_c + tmin_c) / real(2.0);
    let pet = real::<T>(0.0023) * ra * (tmax_c - tmin_c).sqrt() * (tavg + real(17.8));
    Ok(pet.max(T::zero()))
}

fn check_whole_months<T: Real>(
    daily: &[ClimateRecordDaily<T>],
) -> Result<Vec<(MonthStamp, usize, usize)>, PetError> {
    if daily.is_empty() {
        return Err(PetError::Empty);
    }
    for pair in daily.windows(2) {
        if pair[1].date != pair[0].date.succ() {
            return Err(PetError::NonContiguousDays(pair[1].date.to_string()));
        }
    }
    // group indices by month, then require full coverage of each month
    let mut groups: Vec<(MonthStamp, usize, usize)> = Vec::new();
    let mut begin = 0usize;
    for i in 1..=daily.len() {
        if i == daily.len() || daily[i].date.month_stamp() != daily[begin].date.month_stamp() {
            groups.push((daily[begin].date.month_stamp(), begin, i));
            begin = i;
        }
    }
    for &(month, lo, hi) in &groups {
        let expected = month.days_in_month();
        let found = (hi - lo) as u32;
        if found != expected {
            return Err(PetError::partial(month, expected, found));
        }
    }
    Ok(groups)
}

/// Sum daily Hargreaves PET into monthly totals (mm/month).
pub fn monthly_pet<T: Real>(
    daily: &[ClimateRecordDaily<T>],
    latitude_deg: T,
) -> Result<MonthlySeries<T>, PetError> {
    let groups = check_whole_months(daily)?;
    let mut totals = Vec::with_capacity(groups.len());
    for &(_, lo, hi) in &groups {
        let mut sum = T::zero();
        for rec in &daily[lo..hi] {
            rec.validate()?;
            let ra = match rec.ra_mj {
                Some(ra) => ra,
                None => extraterrestrial_radiation(latitude_deg, rec.date.day_of_year())?,
            };
            sum += hargreaves_pet_daily(rec.tmax_c, rec.tmin_c, ra)?;
        }
        totals.push(sum);
    }
    Ok(MonthlySeries::new(groups[0].0, totals)?)
}

/// Monthly aggregate of daily climate: P summed, temperatures averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyAggregate<T> {
    pub start: MonthStamp,
    pub p_mm: Vec<T>,
    pub tmax_c: Vec<T>,
    pub tmin_c: Vec<T>,
}

pub fn aggregate_daily<T: Real>(
    daily: &[ClimateRecordDaily<T>],
) -> Result<MonthlyAggregate<T>, PetError> {
    let groups = check_whole_months(daily)?;
    let mut agg = MonthlyAggregate {
        start: groups[0].0,
        p_mm: Vec::with_capacity(groups.len()),
        tmax_c: Vec::with_capacity(groups.len()),
        tmin_c: Vec::with_capacity(groups.len()),
    };
    for &(_, lo, hi) in &groups {
        let days: T = real((hi - lo) as f64);
        let mut p = T::zero();
        let mut tx = T::zero();
        let mut tn = T::zero();
        for rec in &daily[lo..hi] {
            rec.validate()?;
            p += rec.p_mm;
            tx += rec.tmax_c;
            tn += rec.tmin_c;
        }
        agg.p_mm.push(p);
        agg.tmax_c.push(tx / days);
        agg.tmin_c.push(tn / days);
    }
    Ok(agg)
}

/// Aggregate daily climate and attach the Hargreaves monthly PET column.
pub fn prepare_monthly_forcing<T: Real>(
    daily: &[ClimateRecordDaily<T>],
    latitude_deg: T,
) -> Result<MonthlyForcing<T>, PetError> {
    let agg = aggregate_daily(daily)?;
    let pet = monthly_pet(daily, latitude_deg)?;
    let forcing = MonthlyForcing::new(agg.start, agg.p_mm, agg.tmax_c, agg.tmin_c)?
        .with_column(crate::timeseries::Column::Pet, pet.values().to_vec())?;
    Ok(forcing)
}

/// Load a daily climate CSV: `date(YYYY-MM-DD),p_mm,tmax_c,tmin_c[,ra_mj]`.
pub fn load_daily_csv<T: Real, P: AsRef<Path>>(
    path: P,
) -> Result<Vec<ClimateRecordDaily<T>>, PetError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let need = |name: &str| {
        find(name).ok_or_else(|| PetError::Timeseries(TimeseriesError::MissingColumn(name.into())))
    };
    let (di, pi, xi, ni) = (need("date")?, need("p_mm")?, need("tmax_c")?, need("tmin_c")?);
    let ri = find("ra_mj");

    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |idx: usize, name: &str| -> Result<T, PetError> {
            let raw = record.get(idx).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| {
                PetError::Timeseries(TimeseriesError::NonFiniteValue {
                    row,
                    column: name.into(),
                })
            })?;
            if !v.is_finite() {
                return Err(PetError::Timeseries(TimeseriesError::NonFiniteValue {
                    row,
                    column: name.into(),
                }));
            }
            Ok(real(v))
        };
        let rec = ClimateRecordDaily {
            date: record.get(di).unwrap_or("").trim().parse()?,
            p_mm: cell(pi, "p_mm")?,
            tmax_c: cell(xi, "tmax_c")?,
            tmin_c: cell(ni, "tmin_c")?,
            ra_mj: match ri {
                Some(idx) => Some(cell(idx, "ra_mj")?),
                None => None,
            },
        };
        rec.validate()?;
        out.push(rec);
    }
    if out.is_empty() {
        return Err(PetError::Empty);
    }
    Ok(out)
}
