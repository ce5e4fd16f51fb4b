//! Serde adapters writing non-finite reals as JSON `null`.

use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serializer};

fn finite(v: f64) -> Option<f64> {
    Some(v).filter(|v| v.is_finite())
}

/// `null` reads back as `NaN`.
pub mod nan_as_null {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        finite(*v).serialize_opt(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// `null` reads back as `+∞`; used for tolerances where `∞` disables a test.
pub mod inf_as_null {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        finite(*v).serialize_opt(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// A target triple `(ε₀, ε₁, ε₂)` as a three-element array.
pub mod targets {
    use super::*;

    pub fn serialize<S: Serializer>(v: &(f64, f64, f64), s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(3)?;
        for c in [v.0, v.1, v.2] {
            t.serialize_element(&finite(c))?;
        }
        t.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(f64, f64, f64), D::Error> {
        let (a, b, c) = <(Option<f64>, Option<f64>, Option<f64>)>::deserialize(d)?;
        let inf = |o: Option<f64>| o.unwrap_or(f64::INFINITY);
        Ok((inf(a), inf(b), inf(c)))
    }
}

trait SerializeOpt {
    fn serialize_opt<S: Serializer>(self, s: S) -> Result<S::Ok, S::Error>;
}

impl SerializeOpt for Option<f64> {
    fn serialize_opt<S: Serializer>(self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Some(v) => s.serialize_f64(v),
            None => s.serialize_none(),
        }
    }
}
