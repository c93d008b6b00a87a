use chrono::{Datelike, NaiveDate, Weekday};

/// Monday, Saturday and Sunday indicators. Tuesday to Friday are the
/// reference category with all three set to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalendarDummies {
    pub mon: u8,
    pub sat: u8,
    pub sun: u8,
}

impl CalendarDummies {
    pub fn as_f64(self) -> [f64; 3] {
        [f64::from(self.mon), f64::from(self.sat), f64::from(self.sun)]
    }
}

pub fn calendar_dummies(date: NaiveDate) -> CalendarDummies {
    let wd = date.weekday();
    CalendarDummies {
        mon: u8::from(wd == Weekday::Mon),
        sat: u8::from(wd == Weekday::Sat),
        sun: u8::from(wd == Weekday::Sun),
    }
}

pub fn last_sunday(year: i32, month: u32) -> NaiveDate {
    let first_next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    let last = first_next.pred_opt().expect("date in range");
    let back = last.weekday().num_days_from_sunday();
    last - chrono::Duration::days(i64::from(back))
}

/// (spring-forward, fall-back) dates of `year` under the EU rule.
pub fn dst_dates(year: i32) -> (NaiveDate, NaiveDate) {
    (last_sunday(year, 3), last_sunday(year, 10))
}
