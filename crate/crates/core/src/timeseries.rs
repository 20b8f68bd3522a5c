//! Calendar-indexed monthly time series, forcing assembly, train/test
//! splitting, and CSV ingestion/emission.
//!
//! Dates are stored as `(year, month)` integer pairs; at monthly resolution
//! there is nothing a timezone-aware timestamp could add except ambiguity.
//! Series are contiguous by construction and validated to be finite, so
//! downstream code never has to re-check.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum TimeseriesError {
    #[error("month {0} outside 1..=12")]
    InvalidMonth(u32),
    #[error("cannot parse `{0}` as YYYY-MM")]
    BadDate(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("calendar gap: missing month(s) {}", list_stamps(.0))]
    GapInCalendar(Vec<MonthStamp>),
    #[error("non-finite value in row {row} column `{column}`")]
    NonFiniteValue { row: usize, column: String },
    #[error("negative value {value} in row {row} column `{column}`")]
    NegativeValue {
        row: usize,
        column: String,
        value: f64,
    },
    #[error("dates not strictly increasing at row {0}")]
    UnsortedDates(usize),
    #[error("series have mismatched span: {0}")]
    SpanMismatch(String),
    #[error("range {0}..={1} outside forcing span")]
    RangeOutOfBounds(MonthStamp, MonthStamp),
    #[error("split ranges overlap or are out of order near {0}")]
    Overlap(MonthStamp),
    #[error("drainage area must be positive, got {0}")]
    NonPositiveArea(f64),
    #[error("empty series")]
    Empty,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn list_stamps(stamps: &[MonthStamp]) -> String {
    let mut parts: Vec<String> = stamps.iter().take(6).map(|s| s.to_string()).collect();
    if stamps.len() > 6 {
        parts.push(format!("... ({} total)", stamps.len()));
    }
    parts.join(", ")
}

/// A calendar month, ordered lexicographically by `(year, month)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MonthStamp {
    pub year: i32,
    pub month: u8,
}

impl MonthStamp {
    pub fn new(year: i32, month: u32) -> Result<Self, TimeseriesError> {
        if !(1..=12).contains(&month) {
            return Err(TimeseriesError::InvalidMonth(month));
        }
        Ok(MonthStamp {
            year,
            month: month as u8,
        })
    }

    /// The stamp `n` months after (or before, for negative `n`) this one.
    pub fn add_months(self, n: i64) -> Self {
        let total = i64::from(self.year) * 12 + i64::from(self.month) - 1 + n;
        MonthStamp {
            year: total.div_euclid(12) as i32,
            month: (total.rem_euclid(12) + 1) as u8,
        }
    }

    /// Signed number of months from `earlier` to `self`.
    pub fn months_since(self, earlier: MonthStamp) -> i64 {
        (i64::from(self.year) * 12 + i64::from(self.month))
            - (i64::from(earlier.year) * 12 + i64::from(earlier.month))
    }

    pub fn days_in_month(self) -> u32 {
        days_in_month(self.year, u32::from(self.month))
    }

    pub fn seconds_in_month(self) -> u64 {
        u64::from(self.days_in_month()) * 86_400
    }
}

impl fmt::Display for MonthStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthStamp {
    type Err = TimeseriesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TimeseriesError::BadDate(s.to_string());
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        MonthStamp::new(year, month).map_err(|_| bad())
    }
}

pub fn is_leap_year(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if is_leap_year(year) {
                29
            } else {
                28
            }
        }
        _ => unreachable!("month validated at construction"),
    }
}

/// An inclusive range of calendar months. `start > end` denotes empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthRange {
    pub start: MonthStamp,
    pub end: MonthStamp,
}

impl MonthRange {
    pub fn new(start: MonthStamp, end: MonthStamp) -> Self {
        MonthRange { start, end }
    }

    /// Whole calendar years, January through December.
    pub fn years(first: i32, last: i32) -> Self {
        MonthRange {
            start: MonthStamp::new(first, 1).unwrap(),
            end: MonthStamp::new(last, 12).unwrap(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.start > self.end
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.end.months_since(self.start) + 1) as usize
        }
    }

    pub fn contains(&self, stamp: MonthStamp) -> bool {
        !self.is_empty() && self.start <= stamp && stamp <= self.end
    }
}

impl fmt::Display for MonthRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl FromStr for MonthRange {
    type Err = TimeseriesError;

    /// Parses `YYYY-MM:YYYY-MM` or the whole-year shorthand `YYYY:YYYY`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TimeseriesError::BadDate(s.to_string());
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        if let (Ok(y0), Ok(y1)) = (a.parse::<i32>(), b.parse::<i32>()) {
            return Ok(MonthRange::years(y0, y1));
        }
        Ok(MonthRange::new(a.parse()?, b.parse()?))
    }
}

/// A contiguous monthly series of finite values starting at `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries<T> {
    start: MonthStamp,
    values: Vec<T>,
}

impl<T: Real> MonthlySeries<T> {
    pub fn new(start: MonthStamp, values: Vec<T>) -> Result<Self, TimeseriesError> {
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(TimeseriesError::NonFiniteValue {
                    row: i,
                    column: "<series>".into(),
                });
            }
        }
        Ok(MonthlySeries { start, values })
    }

    pub fn start(&self) -> MonthStamp {
        self.start
    }

    /// Stamp of the last month, or `None` when empty.
    pub fn end(&self) -> Option<MonthStamp> {
        if self.values.is_empty() {
            None
        } else {
            Some(self.start.add_months(self.values.len() as i64 - 1))
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn stamp(&self, index: usize) -> MonthStamp {
        self.start.add_months(index as i64)
    }

    pub fn stamps(&self) -> impl Iterator<Item = MonthStamp> + '_ {
        (0..self.values.len()).map(|i| self.stamp(i))
    }
}

/// Column identifiers of a [`MonthlyForcing`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    P,
    Tmax,
    Tmin,
    Pet,
    Et,
    Sm,
    Gw,
    Q,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::P => "p_mm",
            Column::Tmax => "tmax_c",
            Column::Tmin => "tmin_c",
            Column::Pet => "pet_mm",
            Column::Et => "et_mm",
            Column::Sm => "sm_mm",
            Column::Gw => "gw_mm",
            Column::Q => "q_mm",
        }
    }

    fn must_be_nonnegative(self) -> bool {
        matches!(self, Column::P | Column::Pet | Column::Et | Column::Q)
    }
}

/// Aligned monthly forcing: precipitation and temperature always present,
/// PET and the observed water-balance variables optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyForcing<T> {
    start: MonthStamp,
    p_mm: Vec<T>,
    tmax_c: Vec<T>,
    tmin_c: Vec<T>,
    pet_mm: Option<Vec<T>>,
    et_mm: Option<Vec<T>>,
    sm_mm: Option<Vec<T>>,
    gw_mm: Option<Vec<T>>,
    q_mm: Option<Vec<T>>,
}

impl<T: Real> MonthlyForcing<T> {
    pub fn new(
        start: MonthStamp,
        p_mm: Vec<T>,
        tmax_c: Vec<T>,
        tmin_c: Vec<T>,
    ) -> Result<Self, TimeseriesError> {
        let f = MonthlyForcing {
            start,
            p_mm,
            tmax_c,
            tmin_c,
            pet_mm: None,
            et_mm: None,
            sm_mm: None,
            gw_mm: None,
            q_mm: None,
        };
        f.validate_column(Column::P)?;
        f.validate_column(Column::Tmax)?;
        f.validate_column(Column::Tmin)?;
        if f.tmax_c.len() != f.p_mm.len() || f.tmin_c.len() != f.p_mm.len() {
            return Err(TimeseriesError::SpanMismatch(
                "p/tmax/tmin lengths differ".into(),
            ));
        }
        Ok(f)
    }

    pub fn with_column(mut self, column: Column, values: Vec<T>) -> Result<Self, TimeseriesError> {
        if values.len() != self.len() {
            return Err(TimeseriesError::SpanMismatch(format!(
                "column {} has {} rows, forcing has {}",
                column.name(),
                values.len(),
                self.len()
            )));
        }
        match column {
            Column::P | Column::Tmax | Column::Tmin => {
                return Err(TimeseriesError::SpanMismatch(
                    "p/tmax/tmin are fixed at construction".into(),
                ))
            }
            Column::Pet => self.pet_mm = Some(values),
            Column::Et => self.et_mm = Some(values),
            Column::Sm => self.sm_mm = Some(values),
            Column::Gw => self.gw_mm = Some(values),
            Column::Q => self.q_mm = Some(values),
        }
        self.validate_column(column)?;
        Ok(self)
    }

    fn validate_column(&self, column: Column) -> Result<(), TimeseriesError> {
        let Some(values) = self.column(column) else {
            return Ok(());
        };
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(TimeseriesError::NonFiniteValue {
                    row: i,
                    column: column.name().into(),
                });
            }
            if column.must_be_nonnegative() && *v < T::zero() {
                return Err(TimeseriesError::NegativeValue {
                    row: i,
                    column: column.name().into(),
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }

    pub fn start(&self) -> MonthStamp {
        self.start
    }

    pub fn len(&self) -> usize {
        self.p_mm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_mm.is_empty()
    }

    pub fn span(&self) -> Option<MonthRange> {
        if self.is_empty() {
            None
        } else {
            Some(MonthRange::new(
                self.start,
                self.start.add_months(self.len() as i64 - 1),
            ))
        }
    }

    pub fn stamp(&self, index: usize) -> MonthStamp {
        self.start.add_months(index as i64)
    }

    pub fn stamps(&self) -> impl Iterator<Item = MonthStamp> + '_ {
        (0..self.len()).map(|i| self.stamp(i))
    }

    pub fn p(&self) -> &[T] {
        &self.p_mm
    }

    pub fn tmax(&self) -> &[T] {
        &self.tmax_c
    }

    pub fn tmin(&self) -> &[T] {
        &self.tmin_c
    }

    /// The requested column, if present.
    pub fn column(&self, column: Column) -> Option<&[T]> {
        match column {
            Column::P => Some(&self.p_mm),
            Column::Tmax => Some(&self.tmax_c),
            Column::Tmin => Some(&self.tmin_c),
            Column::Pet => self.pet_mm.as_deref(),
            Column::Et => self.et_mm.as_deref(),
            Column::Sm => self.sm_mm.as_deref(),
            Column::Gw => self.gw_mm.as_deref(),
            Column::Q => self.q_mm.as_deref(),
        }
    }

    pub fn has(&self, column: Column) -> bool {
        self.column(column).is_some()
    }

    pub fn series(&self, column: Column) -> Option<MonthlySeries<T>> {
        self.column(column).map(|v| MonthlySeries {
            start: self.start,
            values: v.to_vec(),
        })
    }

    /// Owned sub-forcing covering `range` (empty range gives empty forcing).
    pub fn slice(&self, range: MonthRange) -> Result<Self, TimeseriesError> {
        if range.is_empty() {
            return Ok(MonthlyForcing {
                start: range.start,
                p_mm: vec![],
                tmax_c: vec![],
                tmin_c: vec![],
                pet_mm: None,
                et_mm: None,
                sm_mm: None,
                gw_mm: None,
                q_mm: None,
            });
        }
        let span = self
            .span()
            .ok_or(TimeseriesError::RangeOutOfBounds(range.start, range.end))?;
        if range.start < span.start || range.end > span.end {
            return Err(TimeseriesError::RangeOutOfBounds(range.start, range.end));
        }
        let lo = range.start.months_since(self.start) as usize;
        let hi = lo + range.len();
        let cut = |v: &Vec<T>| v[lo..hi].to_vec();
        Ok(MonthlyForcing {
            start: range.start,
            p_mm: cut(&self.p_mm),
            tmax_c: cut(&self.tmax_c),
            tmin_c: cut(&self.tmin_c),
            pet_mm: self.pet_mm.as_ref().map(cut),
            et_mm: self.et_mm.as_ref().map(cut),
            sm_mm: self.sm_mm.as_ref().map(cut),
            gw_mm: self.gw_mm.as_ref().map(cut),
            q_mm: self.q_mm.as_ref().map(cut),
        })
    }
}

/// Warm-up / train / test windows, disjoint and in chronological order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub warmup: Option<MonthRange>,
    pub train: MonthRange,
    pub test: MonthRange,
}

impl SplitSpec {
    pub fn new(
        warmup: Option<MonthRange>,
        train: MonthRange,
        test: MonthRange,
    ) -> Result<Self, TimeseriesError> {
        let warmup = warmup.filter(|r| !r.is_empty());
        if let Some(w) = warmup {
            if w.end >= train.start {
                return Err(TimeseriesError::Overlap(train.start));
            }
        }
        if train.is_empty() || test.is_empty() || train.end >= test.start {
            return Err(TimeseriesError::Overlap(test.start));
        }
        Ok(SplitSpec {
            warmup,
            train,
            test,
        })
    }
}

/// The `(warmup, train, test)` windows of a forcing.
pub type SplitForcing<T> = (MonthlyForcing<T>, MonthlyForcing<T>, MonthlyForcing<T>);

/// Slice a forcing into its `(warmup, train, test)` windows.
pub fn split<T: Real>(
    forcing: &MonthlyForcing<T>,
    spec: &SplitSpec,
) -> Result<SplitForcing<T>, TimeseriesError> {
    let warmup = match spec.warmup {
        Some(r) => forcing.slice(r)?,
        None => forcing.slice(MonthRange {
            start: spec.train.start,
            end: spec.train.start.add_months(-1),
        })?,
    };
    Ok((warmup, forcing.slice(spec.train)?, forcing.slice(spec.test)?))
}

/// Convert gauge discharge (m³/s) to basin-average depth (mm/month) using
/// calendar-month seconds, leap years included.
pub fn discharge_to_depth<T: Real>(
    q_cms: &MonthlySeries<T>,
    area_km2: T,
) -> Result<MonthlySeries<T>, TimeseriesError> {
    if !(area_km2 > T::zero()) || !area_km2.is_finite() {
        return Err(TimeseriesError::NonPositiveArea(
            area_km2.to_f64().unwrap_or(f64::NAN),
        ));
    }
    // m³/s × s / (km² × 1e6 m²/km²) × 1000 mm/m
    let values = q_cms
        .values()
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let secs: T = real(q_cms.stamp(i).seconds_in_month() as f64);
            q * secs / (area_km2 * real(1e6)) * real(1e3)
        })
        .collect();
    MonthlySeries::new(q_cms.start(), values)
}

// ---------------------------------------------------------------------------
// CSV ingestion / emission
// ---------------------------------------------------------------------------

/// Maps canonical column names to the names used in a particular file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub date: String,
    pub p_mm: String,
    pub tmax_c: String,
    pub tmin_c: String,
    pub pet_mm: String,
    pub et_mm: String,
    pub sm_mm: String,
    pub gw_mm: String,
    pub q_mm: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            date: "date".into(),
            p_mm: "p_mm".into(),
            tmax_c: "tmax_c".into(),
            tmin_c: "tmin_c".into(),
            pet_mm: "pet_mm".into(),
            et_mm: "et_mm".into(),
            sm_mm: "sm_mm".into(),
            gw_mm: "gw_mm".into(),
            q_mm: "q_mm".into(),
        }
    }
}

impl CsvSchema {
    fn column_name(&self, column: Column) -> &str {
        match column {
            Column::P => &self.p_mm,
            Column::Tmax => &self.tmax_c,
            Column::Tmin => &self.tmin_c,
            Column::Pet => &self.pet_mm,
            Column::Et => &self.et_mm,
            Column::Sm => &self.sm_mm,
            Column::Gw => &self.gw_mm,
            Column::Q => &self.q_mm,
        }
    }
}

const OPTIONAL_COLUMNS: [Column; 5] = [Column::Pet, Column::Et, Column::Sm, Column::Gw, Column::Q];

fn parse_cell<T: Real>(raw: &str, row: usize, column: &str) -> Result<T, TimeseriesError> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| TimeseriesError::NonFiniteValue {
            row,
            column: column.to_string(),
        })?;
    if !v.is_finite() {
        return Err(TimeseriesError::NonFiniteValue {
            row,
            column: column.to_string(),
        });
    }
    T::from_f64(v).ok_or(TimeseriesError::NonFiniteValue {
        row,
        column: column.to_string(),
    })
}

/// Load a monthly forcing CSV (`date` in `YYYY-MM`, `.` decimal separator).
///
/// Rows must be strictly increasing and gap-free; values must be finite and,
/// where the variable is a flux depth, nonnegative.
pub fn load_forcing_csv<T: Real, P: AsRef<Path>>(
    path: P,
    schema: &CsvSchema,
) -> Result<MonthlyForcing<T>, TimeseriesError> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);

    let date_idx = find(&schema.date).ok_or_else(|| {
        TimeseriesError::MissingColumn(schema.date.clone())
    })?;
    let required = [Column::P, Column::Tmax, Column::Tmin];
    let mut required_idx = [0usize; 3];
    for (slot, column) in required_idx.iter_mut().zip(required) {
        *slot = find(schema.column_name(column))
            .ok_or_else(|| TimeseriesError::MissingColumn(schema.column_name(column).into()))?;
    }
    let optional_idx: Vec<Option<usize>> = OPTIONAL_COLUMNS
        .iter()
        .map(|&c| find(schema.column_name(c)))
        .collect();

    let mut stamps: Vec<MonthStamp> = Vec::new();
    let mut cols: Vec<Vec<T>> = vec![Vec::new(); 3 + OPTIONAL_COLUMNS.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let stamp: MonthStamp = record
            .get(date_idx)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| TimeseriesError::BadDate(record.get(date_idx).unwrap_or("").into()))?;
        if let Some(prev) = stamps.last() {
            if stamp <= *prev {
                return Err(TimeseriesError::UnsortedDates(row));
            }
        }
        stamps.push(stamp);
        for (slot, (column, idx)) in required.iter().zip(required_idx).enumerate() {
            let raw = record.get(idx).unwrap_or("");
            cols[slot].push(parse_cell(raw, row, column.name())?);
        }
        for (slot, (&column, idx)) in OPTIONAL_COLUMNS.iter().zip(&optional_idx).enumerate() {
            if let Some(idx) = idx {
                let raw = record.get(*idx).unwrap_or("");
                cols[3 + slot].push(parse_cell(raw, row, column.name())?);
            }
        }
    }
    if stamps.is_empty() {
        return Err(TimeseriesError::Empty);
    }

    // Contiguity: every month between first and last must be present.
    let mut missing = Vec::new();
    for (i, pair) in stamps.windows(2).enumerate() {
        let gap = pair[1].months_since(pair[0]);
        for k in 1..gap {
            missing.push(pair[0].add_months(k));
        }
        let _ = i;
    }
    if !missing.is_empty() {
        return Err(TimeseriesError::GapInCalendar(missing));
    }

    let mut forcing = MonthlyForcing::new(
        stamps[0],
        std::mem::take(&mut cols[0]),
        std::mem::take(&mut cols[1]),
        std::mem::take(&mut cols[2]),
    )?;
    for (slot, &column) in OPTIONAL_COLUMNS.iter().enumerate() {
        if optional_idx[slot].is_some() {
            forcing = forcing.with_column(column, std::mem::take(&mut cols[3 + slot]))?;
        }
    }
    Ok(forcing)
}

/// Render a float with at most six decimal places, trailing zeros trimmed.
pub fn format_value<T: Real>(v: T) -> String {
    let x = v.to_f64().unwrap_or(f64::NAN);
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Write a forcing back out under the canonical schema.
pub fn emit_forcing_csv<T: Real, P: AsRef<Path>>(
    path: P,
    forcing: &MonthlyForcing<T>,
) -> Result<(), TimeseriesError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["date", "p_mm", "tmax_c", "tmin_c"];
    let present: Vec<Column> = OPTIONAL_COLUMNS
        .iter()
        .copied()
        .filter(|&c| forcing.has(c))
        .collect();
    header.extend(present.iter().map(|c| c.name()));
    w.write_record(&header)?;
    for i in 0..forcing.len() {
        let mut row = vec![
            forcing.stamp(i).to_string(),
            format_value(forcing.p()[i]),
            format_value(forcing.tmax()[i]),
            format_value(forcing.tmin()[i]),
        ];
        for &c in &present {
            row.push(format_value(forcing.column(c).unwrap()[i]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
