//! Exact rational frame rates.
//!
//! Frame rates such as `30000/1001` or `23.976` are kept as integer ratios so
//! that frame/time conversions round deterministically.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RateError {
    #[error("invalid rate {0:?}: expected N, N.M or N/D")]
    Syntax(String),
    #[error("rate must be positive")]
    NonPositive,
}

/// A positive rational number of frames per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rate {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Integer division of `num / den` rounded half-up.
pub(crate) fn div_round_half_up(num: u128, den: u128) -> u128 {
    (2 * num + den) / (2 * den)
}

impl Rate {
    pub fn new(num: u64, den: u64) -> Result<Self, RateError> {
        if num == 0 || den == 0 {
            return Err(RateError::NonPositive);
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn integer(n: u64) -> Result<Self, RateError> {
        Self::new(n, 1)
    }

    pub fn numer(self) -> u64 {
        self.num
    }

    pub fn denom(self) -> u64 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `round(self)`, half-up.
    pub fn round(self) -> u64 {
        div_round_half_up(self.num as u128, self.den as u128) as u64
    }

    /// `round(k * self / other)`, half-up, computed exactly.
    pub fn scale_round(self, k: u64, other: Rate) -> u64 {
        let num = k as u128 * self.num as u128 * other.den as u128;
        let den = self.den as u128 * other.num as u128;
        div_round_half_up(num, den) as u64
    }
}

impl PartialOrd for Rate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl FromStr for Rate {
    type Err = RateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let syntax = || RateError::Syntax(s.to_string());
        let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
        if let Some((n, d)) = s.split_once('/') {
            let (n, d) = (n.trim(), d.trim());
            if !digits(n) || !digits(d) {
                return Err(syntax());
            }
            return Rate::new(n.parse().map_err(|_| syntax())?, d.parse().map_err(|_| syntax())?);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if !digits(int) || !(frac.is_empty() || digits(frac)) || frac.len() > 9 {
            return Err(syntax());
        }
        let den = 10u64.pow(frac.len() as u32);
        let whole: u64 = int.parse().map_err(|_| syntax())?;
        let part: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| syntax())?
        };
        let num = whole
            .checked_mul(den)
            .and_then(|w| w.checked_add(part))
            .ok_or_else(syntax)?;
        Rate::new(num, den)
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Float(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Rate::integer(n).map_err(serde::de::Error::custom),
            // Going through the shortest decimal form keeps 23.976 exact.
            Raw::Float(x) => x.to_string().parse().map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}
