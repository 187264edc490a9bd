//! Integer-nanosecond time values.
//!
//! Both instants and durations are carried as [`Nanos`]. All arithmetic is
//! exact; conversions from decimal text never go through floating point.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub};
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// A non-negative count of nanoseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Nanos(pub u64);

impl Nanos {
    pub const ZERO: Nanos = Nanos(0);

    pub const fn from_micros(us: u64) -> Self {
        Nanos(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        Nanos(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        Nanos(s * 1_000_000_000)
    }

    pub const fn as_u64(self) -> u64 {
        self.0
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, rhs: Nanos) -> Nanos {
        Nanos(self.0.saturating_sub(rhs.0))
    }

    pub fn checked_sub(self, rhs: Nanos) -> Option<Nanos> {
        self.0.checked_sub(rhs.0).map(Nanos)
    }

    /// Parses a decimal quantity expressed in the given unit, e.g. `"4.865"`
    /// milliseconds. Digits beyond nanosecond resolution are rejected.
    pub fn parse_decimal(text: &str, unit: TimeUnit) -> Result<Nanos, ParseNanosError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(ParseNanosError::Empty);
        }
        let (int_part, frac_part) = match text.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(ParseNanosError::Malformed(text.to_string()));
        }
        let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int_part) || !all_digits(frac_part) {
            return Err(ParseNanosError::Malformed(text.to_string()));
        }
        let scale = unit.nanos_per_unit();
        let scale_digits = scale.ilog10() as usize;
        let trimmed_frac = frac_part.trim_end_matches('0');
        if trimmed_frac.len() > scale_digits {
            return Err(ParseNanosError::TooPrecise(text.to_string()));
        }
        let whole: u64 = if int_part.is_empty() {
            0
        } else {
            int_part
                .parse()
                .map_err(|_| ParseNanosError::Overflow(text.to_string()))?
        };
        let mut frac: u64 = 0;
        if !trimmed_frac.is_empty() {
            let padded = format!("{:0<width$}", trimmed_frac, width = scale_digits);
            frac = padded
                .parse()
                .map_err(|_| ParseNanosError::Overflow(text.to_string()))?;
        }
        whole
            .checked_mul(scale)
            .and_then(|w| w.checked_add(frac))
            .map(Nanos)
            .ok_or_else(|| ParseNanosError::Overflow(text.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeUnit {
    Ns,
    Us,
    Ms,
    S,
}

impl TimeUnit {
    pub const fn nanos_per_unit(self) -> u64 {
        match self {
            TimeUnit::Ns => 1,
            TimeUnit::Us => 1_000,
            TimeUnit::Ms => 1_000_000,
            TimeUnit::S => 1_000_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseNanosError {
    #[error("empty duration")]
    Empty,
    #[error("malformed duration `{0}`")]
    Malformed(String),
    #[error("duration `{0}` is finer than one nanosecond")]
    TooPrecise(String),
    #[error("duration `{0}` overflows")]
    Overflow(String),
    #[error("duration `{0}` needs a unit suffix (ns, us, ms, s)")]
    MissingUnit(String),
}

impl FromStr for Nanos {
    type Err = ParseNanosError;

    /// Accepts `<decimal><unit>` with unit one of `ns`, `us`, `ms`, `s`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (number, unit) = if let Some(n) = s.strip_suffix("ns") {
            (n, TimeUnit::Ns)
        } else if let Some(n) = s.strip_suffix("us") {
            (n, TimeUnit::Us)
        } else if let Some(n) = s.strip_suffix("ms") {
            (n, TimeUnit::Ms)
        } else if let Some(n) = s.strip_suffix('s') {
            (n, TimeUnit::S)
        } else {
            return Err(ParseNanosError::MissingUnit(s.to_string()));
        };
        Nanos::parse_decimal(number, unit)
    }
}

impl fmt::Display for Nanos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

impl Add for Nanos {
    type Output = Nanos;
    fn add(self, rhs: Nanos) -> Nanos {
        Nanos(self.0 + rhs.0)
    }
}

impl AddAssign for Nanos {
    fn add_assign(&mut self, rhs: Nanos) {
        self.0 += rhs.0;
    }
}

impl Sub for Nanos {
    type Output = Nanos;
    fn sub(self, rhs: Nanos) -> Nanos {
        Nanos(
            self.0
                .checked_sub(rhs.0)
                .expect("time subtraction underflow"),
        )
    }
}

impl Mul<u64> for Nanos {
    type Output = Nanos;
    fn mul(self, rhs: u64) -> Nanos {
        Nanos(self.0 * rhs)
    }
}

impl Sum for Nanos {
    fn sum<I: Iterator<Item = Nanos>>(iter: I) -> Nanos {
        iter.fold(Nanos::ZERO, Add::add)
    }
}

impl Serialize for Nanos {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u64(self.0)
    }
}

impl<'de> Deserialize<'de> for Nanos {
    /// Integers are nanoseconds; strings carry a unit suffix.
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Visitor;

        impl de::Visitor<'_> for Visitor {
            type Value = Nanos;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer number of nanoseconds or a string like \"4.865ms\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Nanos, E> {
                Ok(Nanos(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Nanos, E> {
                u64::try_from(v)
                    .map(Nanos)
                    .map_err(|_| E::custom("durations must be non-negative"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Nanos, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(Visitor)
    }
}
