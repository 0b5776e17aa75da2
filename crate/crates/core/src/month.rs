use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A calendar month in UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MonthKey {
    pub year: i32,
    pub month: u32,
}

impl MonthKey {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidInput(format!("month {month} out of range")));
        }
        Ok(MonthKey { year, month })
    }

    pub fn from_unix(secs: i64) -> Result<Self> {
        let dt = DateTime::from_timestamp(secs, 0)
            .ok_or_else(|| Error::InvalidInput(format!("timestamp {secs} out of range")))?;
        Ok(MonthKey {
            year: dt.year(),
            month: dt.month(),
        })
    }

    /// Unix seconds at 00:00:00 UTC on the first day of the month.
    pub fn start_unix(self) -> i64 {
        NaiveDate::from_ymd_opt(self.year, self.month, 1)
            .expect("valid month")
            .and_hms_opt(0, 0, 0)
            .expect("valid time")
            .and_utc()
            .timestamp()
    }

    pub fn succ(self) -> Self {
        if self.month == 12 {
            MonthKey {
                year: self.year + 1,
                month: 1,
            }
        } else {
            MonthKey {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    pub fn pred(self) -> Self {
        if self.month == 1 {
            MonthKey {
                year: self.year - 1,
                month: 12,
            }
        } else {
            MonthKey {
                year: self.year,
                month: self.month - 1,
            }
        }
    }

    /// Months elapsed since year 0; differences give month distances.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ord: i64) -> Self {
        MonthKey {
            year: ord.div_euclid(12) as i32,
            month: (ord.rem_euclid(12) + 1) as u32,
        }
    }

    pub fn plus(self, months: i64) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }
}

impl fmt::Display for MonthKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::InvalidInput(format!("bad month `{s}`, expected YYYY-MM")))?;
        let year = y
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad year in `{s}`")))?;
        let month = m
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad month in `{s}`")))?;
        MonthKey::new(year, month)
    }
}
