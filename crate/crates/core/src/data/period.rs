use std::cmp::Ordering;
use std::fmt;

/// Row label of a panel.
///
/// Integers, ISO dates (`YYYY-MM-DD`), FRED dates (`M/D/YYYY`), months
/// (`YYYY-MM`, `YYYY:MM`, `YYYYMmm`) and quarters (`YYYYQn`, `YYYY:Qn`) are
/// temporal and must be strictly increasing within a panel. Anything else is a
/// free label that only has to be unique.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Period {
    Index(i64),
    Date { year: i32, month: u32, day: u32 },
    Month { year: i32, month: u32 },
    Quarter { year: i32, quarter: u32 },
    Label(String),
}

fn num<T: std::str::FromStr>(s: &str) -> Option<T> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn valid_date(year: i32, month: u32, day: u32) -> Option<Period> {
    ((1..=12).contains(&month) && (1..=31).contains(&day)).then_some(Period::Date { year, month, day })
}

impl Period {
    pub fn parse(raw: &str) -> Period {
        let s = raw.trim();
        if let Ok(i) = s.parse::<i64>() {
            return Period::Index(i);
        }
        let parts: Vec<&str> = s.split('-').collect();
        if parts.len() == 3 && parts[0].len() == 4 {
            if let (Some(y), Some(m), Some(d)) = (num(parts[0]), num(parts[1]), num(parts[2])) {
                if let Some(p) = valid_date(y, m, d) {
                    return p;
                }
            }
        }
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() == 3 && parts[2].len() == 4 {
            if let (Some(m), Some(d), Some(y)) = (num(parts[0]), num(parts[1]), num(parts[2])) {
                if let Some(p) = valid_date(y, m, d) {
                    return p;
                }
            }
        }
        let upper = s.to_ascii_uppercase();
        if upper.len() >= 6 && upper.is_char_boundary(4) {
            let (y, rest) = upper.split_at(4);
            if let Some(year) = num::<i32>(y) {
                let rest = rest.strip_prefix([':', '-']).unwrap_or(rest);
                if let Some(q) = rest.strip_prefix('Q').and_then(num::<u32>) {
                    if (1..=4).contains(&q) {
                        return Period::Quarter { year, quarter: q };
                    }
                }
                let digits = rest.strip_prefix('M').unwrap_or(rest);
                if digits.len() <= 2 {
                    if let Some(m) = num::<u32>(digits).filter(|m| (1..=12).contains(m)) {
                        return Period::Month { year, month: m };
                    }
                }
            }
        }
        Period::Label(s.to_string())
    }

    fn kind(&self) -> u8 {
        match self {
            Period::Index(_) => 0,
            Period::Date { .. } => 1,
            Period::Month { .. } => 2,
            Period::Quarter { .. } => 3,
            Period::Label(_) => 4,
        }
    }

    pub fn is_temporal(&self) -> bool {
        !matches!(self, Period::Label(_))
    }

    /// Ordering between periods of the same temporal kind.
    pub fn compare(&self, other: &Period) -> Option<Ordering> {
        if self.kind() != other.kind() {
            return None;
        }
        match (self, other) {
            (Period::Index(a), Period::Index(b)) => Some(a.cmp(b)),
            (
                Period::Date { year, month, day },
                Period::Date {
                    year: y2,
                    month: m2,
                    day: d2,
                },
            ) => Some((year, month, day).cmp(&(y2, m2, d2))),
            (Period::Month { year, month }, Period::Month { year: y2, month: m2 }) => {
                Some((year, month).cmp(&(y2, m2)))
            }
            (Period::Quarter { year, quarter }, Period::Quarter { year: y2, quarter: q2 }) => {
                Some((year, quarter).cmp(&(y2, q2)))
            }
            _ => None,
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Index(i) => write!(f, "{i}"),
            Period::Date { year, month, day } => write!(f, "{year:04}-{month:02}-{day:02}"),
            Period::Month { year, month } => write!(f, "{year:04}-{month:02}"),
            Period::Quarter { year, quarter } => write!(f, "{year:04}Q{quarter}"),
            Period::Label(s) => f.write_str(s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_formats() {
        assert_eq!(Period::parse("12"), Period::Index(12));
        assert_eq!(Period::parse("1959-01-01"), Period::Date { year: 1959, month: 1, day: 1 });
        assert_eq!(Period::parse("3/1/1959"), Period::Date { year: 1959, month: 3, day: 1 });
        assert_eq!(Period::parse("1959:03"), Period::Month { year: 1959, month: 3 });
        assert_eq!(Period::parse("1959M03"), Period::Month { year: 1959, month: 3 });
        assert_eq!(Period::parse("1959-03"), Period::Month { year: 1959, month: 3 });
        assert_eq!(Period::parse("1959Q2"), Period::Quarter { year: 1959, quarter: 2 });
        assert_eq!(Period::parse("1959:Q4"), Period::Quarter { year: 1959, quarter: 4 });
        assert_eq!(Period::parse("spring"), Period::Label("spring".into()));
        assert_eq!(Period::parse("1959Q7"), Period::Label("1959Q7".into()));
    }

    #[test]
    fn display_round_trips() {
        for s in ["7", "2001-02-03", "2001-02", "2001Q3", "abc"] {
            assert_eq!(Period::parse(&Period::parse(s).to_string()), Period::parse(s));
        }
    }

    #[test]
    fn mixed_kinds_do_not_compare() {
        assert_eq!(Period::parse("1").compare(&Period::parse("2001Q1")), None);
        assert_eq!(
            Period::parse("2001Q1").compare(&Period::parse("2001Q2")),
            Some(Ordering::Less)
        );
    }
}
