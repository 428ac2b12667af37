//! Angles written either as plain numbers or as multiples of pi.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An angle in radians, read from a number or an expression such as `"2pi/3"`.
/// Always written back as a number.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Angle(pub f64);

impl Angle {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for Angle {
    fn from(v: f64) -> Self {
        Angle(v)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Parses `[sign][coef][*]pi[/denom]` or a plain number.
pub fn parse_angle(text: &str) -> Result<f64, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    if s.is_empty() {
        return Err("empty angle".into());
    }
    if let Ok(v) = s.parse::<f64>() {
        return finite(v, text);
    }
    let s = s.replace('π', "pi");
    let Some(pos) = s.find("pi") else {
        return Err(format!("cannot read `{text}` as an angle"));
    };
    let (head, tail) = (&s[..pos], &s[pos + 2..]);
    let head = head.strip_suffix('*').unwrap_or(head);
    let coef = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| format!("bad coefficient in `{text}`"))?,
    };
    let denom = match tail {
        "" => 1.0,
        t => {
            let d = t
                .strip_prefix('/')
                .ok_or_else(|| format!("unexpected `{t}` in `{text}`"))?
                .parse::<f64>()
                .map_err(|_| format!("bad denominator in `{text}`"))?;
            if d == 0.0 {
                return Err(format!("zero denominator in `{text}`"));
            }
            d
        }
    };
    finite(coef * PI / denom, text)
}

fn finite(v: f64, text: &str) -> Result<f64, String> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("angle `{text}` is not finite"))
    }
}

impl FromStr for Angle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_angle(s).map(Angle)
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

struct AngleVisitor;

impl Visitor<'_> for AngleVisitor {
    type Value = Angle;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("an angle in radians or an expression like \"2pi/3\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Angle, E> {
        Ok(Angle(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Angle, E> {
        Ok(Angle(v as f64))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Angle, E> {
        Ok(Angle(v as f64))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Angle, E> {
        v.parse().map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(AngleVisitor)
    }
}
