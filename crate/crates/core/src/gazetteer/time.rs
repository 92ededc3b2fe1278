use std::fmt;
use std::str::FromStr;

use crate::error::Error;

pub const MINUTES_PER_DAY: u32 = 1440;

/// Preferred time of day. Bounds are half-open `[start, end)` in minutes
/// since midnight, so noon is afternoon and midnight is night.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimePeriod {
    Night,
    Morning,
    Afternoon,
    Evening,
}

impl TimePeriod {
    pub const ALL: [TimePeriod; 4] = [
        TimePeriod::Night,
        TimePeriod::Morning,
        TimePeriod::Afternoon,
        TimePeriod::Evening,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimePeriod::Night => "night",
            TimePeriod::Morning => "morning",
            TimePeriod::Afternoon => "afternoon",
            TimePeriod::Evening => "evening",
        }
    }

    pub fn start_minute(self) -> u32 {
        match self {
            TimePeriod::Night => 0,
            TimePeriod::Morning => 360,
            TimePeriod::Afternoon => 720,
            TimePeriod::Evening => 1080,
        }
    }

    pub fn end_minute(self) -> u32 {
        self.start_minute() + 360
    }

    pub fn contains(self, minute: u32) -> bool {
        (self.start_minute()..self.end_minute()).contains(&minute)
    }

    pub fn containing(minute: u32) -> TimePeriod {
        let m = minute % MINUTES_PER_DAY;
        Self::ALL[(m / 360) as usize]
    }
}

impl fmt::Display for TimePeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TimePeriod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim().to_lowercase();
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown time period {s:?}")))
    }
}

pub fn period_middle(p: TimePeriod) -> u32 {
    (p.start_minute() + p.end_minute()) / 2
}

fn twelve_hour(hours: u32, minutes: u32, pm: bool) -> Option<u32> {
    if !(1..=12).contains(&hours) || minutes >= 60 {
        return None;
    }
    let h = match (hours, pm) {
        (12, false) => 0,
        (12, true) => 12,
        (h, false) => h,
        (h, true) => h + 12,
    };
    Some(h * 60 + minutes)
}

/// Splits a digit string into hours and minutes: `8` → (8, 0), `838` → (8, 38).
fn split_digits(d: &str) -> Option<(u32, u32)> {
    if d.is_empty() || d.len() > 4 || !d.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let n: u32 = d.parse().ok()?;
    if d.len() <= 2 {
        Some((n, 0))
    } else {
        Some((n / 100, n % 100))
    }
}

/// Parses the tokens of a time slot into minutes since midnight.
///
/// Accepts `H am|pm`, `HMM am|pm` (also written without the space), a 3 or
/// 4 digit 24-hour string, and the words `noon` and `midnight`.
pub fn parse_time_tokens<S: AsRef<str>>(tokens: &[S]) -> Option<u32> {
    let words: Vec<String> = tokens
        .iter()
        .map(|t| t.as_ref().trim().to_lowercase())
        .collect();
    let words: Vec<&str> = words
        .iter()
        .map(String::as_str)
        .filter(|w| !w.is_empty())
        .collect();
    match words.as_slice() {
        ["noon"] => Some(720),
        ["midnight"] => Some(0),
        [digits, suffix @ ("am" | "pm")] => {
            let (h, m) = split_digits(digits)?;
            twelve_hour(h, m, *suffix == "pm")
        }
        [one] => {
            for suffix in ["am", "pm"] {
                if let Some(digits) = one.strip_suffix(suffix) {
                    let (h, m) = split_digits(digits)?;
                    return twelve_hour(h, m, suffix == "pm");
                }
            }
            if one.len() < 3 {
                return None;
            }
            let (h, m) = split_digits(one)?;
            (h < 24 && m < 60).then_some(h * 60 + m)
        }
        _ => None,
    }
}

/// Resolves a time-typed span: an explicit clock time, or else the middle of
/// a period named in the span.
pub fn resolve_time<S: AsRef<str>>(tokens: &[S]) -> Option<u32> {
    if let Some(m) = parse_time_tokens(tokens) {
        return Some(m);
    }
    tokens
        .iter()
        .find_map(|t| t.as_ref().parse::<TimePeriod>().ok())
        .map(period_middle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Option<u32> {
        let toks: Vec<&str> = s.split_whitespace().collect();
        parse_time_tokens(&toks)
    }

    #[test]
    fn clock_forms() {
        assert_eq!(parse("8 pm"), Some(1200));
        assert_eq!(parse("12 am"), Some(0));
        assert_eq!(parse("12 pm"), Some(720));
        assert_eq!(parse("838 am"), Some(8 * 60 + 38));
        assert_eq!(parse("1110"), Some(11 * 60 + 10));
        assert_eq!(parse("7pm"), Some(1140));
        assert_eq!(parse("noon"), Some(720));
        assert_eq!(parse("13 pm"), None);
        assert_eq!(parse("2460"), None);
        assert_eq!(parse("8"), None);
        assert_eq!(parse("tomorrow"), None);
        assert_eq!(parse(""), None);
    }

    #[test]
    fn period_bounds_and_middles() {
        assert_eq!(period_middle(TimePeriod::Morning), 540);
        assert_eq!(period_middle(TimePeriod::Night), 180);
        assert_eq!(period_middle(TimePeriod::Afternoon), 900);
        assert_eq!(period_middle(TimePeriod::Evening), 1260);
        for p in TimePeriod::ALL {
            assert!(p.contains(period_middle(p)));
        }
        assert_eq!(TimePeriod::containing(1080), TimePeriod::Evening);
        assert_eq!(TimePeriod::containing(1200), TimePeriod::Evening);
        assert_eq!(TimePeriod::containing(720), TimePeriod::Afternoon);
        assert_eq!(TimePeriod::containing(0), TimePeriod::Night);
        assert_eq!(
            "Morning".parse::<TimePeriod>().unwrap(),
            TimePeriod::Morning
        );
    }

    #[test]
    fn resolve_falls_back_to_period_words() {
        assert_eq!(resolve_time(&["early", "morning"]), Some(540));
        assert_eq!(resolve_time(&["9", "pm"]), Some(1260));
        assert_eq!(resolve_time(&["soon"]), None);
    }

    proptest! {
        #[test]
        fn every_minute_in_exactly_one_period(m in 0u32..MINUTES_PER_DAY) {
            let n = TimePeriod::ALL.iter().filter(|p| p.contains(m)).count();
            prop_assert_eq!(n, 1);
            prop_assert!(TimePeriod::containing(m).contains(m));
        }

        #[test]
        fn twelve_hour_round_trip(h in 1u32..=12, m in 0u32..60, pm in any::<bool>()) {
            let text = if m == 0 { format!("{h}") } else { format!("{h}{m:02}") };
            let got = parse_time_tokens(&[text.as_str(), if pm { "pm" } else { "am" }]).unwrap();
            let want = (h % 12 + if pm { 12 } else { 0 }) * 60 + m;
            prop_assert_eq!(got, want);
        }
    }
}
