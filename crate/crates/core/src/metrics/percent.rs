use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MetricsError;

/// A percentage with one decimal, stored exactly as tenths of a percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Percent(i64);

impl Percent {
    pub const ZERO: Percent = Percent(0);

    pub fn from_tenths(tenths: i64) -> Self {
        Percent(tenths)
    }

    pub fn tenths(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 10.0
    }

    /// `100 · num / den` rounded half up to one decimal. `den` must be positive.
    pub fn of_ratio(num: i64, den: i64) -> Self {
        assert!(den > 0, "ratio denominator must be positive");
        // round(1000·n/d) half up == floor((2000·n + d) / 2d)
        let n = 2000 * num as i128 + den as i128;
        Percent(n.div_euclid(2 * den as i128) as i64)
    }
}

impl std::ops::Sub for Percent {
    type Output = Percent;

    fn sub(self, rhs: Percent) -> Percent {
        Percent(self.0 - rhs.0)
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.unsigned_abs();
        write!(f, "{sign}{}.{}", a / 10, a % 10)
    }
}

impl FromStr for Percent {
    type Err = String;

    /// Accepts `40`, `40.2`, `-0.5`, with an optional trailing `%`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().trim_end_matches('%');
        let (neg, t) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let (int, frac) = t.split_once('.').unwrap_or((t, "0"));
        let bad = || format!("not a one-decimal percentage: {s:?}");
        if int.is_empty()
            || frac.len() != 1
            || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        let v =
            int.parse::<i64>().map_err(|_| bad())? * 10 + frac.parse::<i64>().map_err(|_| bad())?;
        Ok(Percent(if neg { -v } else { v }))
    }
}

impl From<Percent> for String {
    fn from(p: Percent) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for Percent {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Share of vulnerable programs: `100 · flagged / total`, one decimal,
/// rounded half up.
pub fn percent_vulnerable(flagged: u64, total: u64) -> Result<Percent, MetricsError> {
    if total == 0 {
        return Err(MetricsError::Domain("total must be positive".into()));
    }
    if flagged > total {
        return Err(MetricsError::Domain(format!(
            "flagged {flagged} exceeds total {total}"
        )));
    }
    Ok(Percent::of_ratio(flagged as i64, total as i64))
}

/// Percentage points fixed: `generated − refined`.
pub fn reduction_delta(generated: Percent, refined: Percent) -> Result<Percent, MetricsError> {
    for p in [generated, refined] {
        if !(0..=1000).contains(&p.tenths()) {
            return Err(MetricsError::Domain(format!("{p} is outside [0, 100]")));
        }
    }
    Ok(generated - refined)
}

/// Delta from raw counts over the same total, rounded once.
pub fn delta_from_counts(
    generated_flagged: u64,
    refined_flagged: u64,
    total: u64,
) -> Result<Percent, MetricsError> {
    if total == 0 {
        return Err(MetricsError::Domain("total must be positive".into()));
    }
    Ok(Percent::of_ratio(
        generated_flagged as i64 - refined_flagged as i64,
        total as i64,
    ))
}
