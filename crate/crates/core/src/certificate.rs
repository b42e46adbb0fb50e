//! Machine-checkable records of single verified inequalities.

use std::collections::BTreeMap;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exact::RationalRepr;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantity {
    Exact(RationalRepr),
    Float { value: f64 },
    NegInfinity,
}

impl Quantity {
    pub fn exact(x: &BigRational) -> Self {
        Quantity::Exact(RationalRepr::from(x))
    }

    /// Non-finite floats map to `NegInfinity` (for -inf) or to a saturated value.
    pub fn float(x: f64) -> Self {
        if x == f64::NEG_INFINITY {
            Quantity::NegInfinity
        } else if x.is_nan() {
            Quantity::Float { value: 0.0 }
        } else if x == f64::INFINITY {
            Quantity::Float { value: f64::MAX }
        } else {
            Quantity::Float { value: x }
        }
    }

    pub fn approx(&self) -> f64 {
        match self {
            Quantity::Exact(r) => r
                .to_rational()
                .map(|q| crate::exact::to_f64(&q))
                .unwrap_or(f64::NAN),
            Quantity::Float { value } => *value,
            Quantity::NegInfinity => f64::NEG_INFINITY,
        }
    }
}

/// f64 fields that may be infinite; non-finite values are written as strings.
pub mod serde_ext_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Str(s) => match s.as_str() {
                "-inf" => Ok(f64::NEG_INFINITY),
                "inf" => Ok(f64::INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(serde::de::Error::custom(format!("bad number {s}"))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub id: String,
    pub kind: String,
    pub statement: String,
    pub method: String,
    pub valid: bool,
    pub value: Quantity,
    pub bound: Quantity,
    pub margin: Quantity,
    pub inputs: BTreeMap<String, serde_json::Value>,
    pub details: serde_json::Value,
    pub references: Vec<String>,
}

impl Certificate {
    pub fn new(id: impl Into<String>, kind: impl Into<String>, statement: impl Into<String>) -> Self {
        Certificate {
            id: id.into(),
            kind: kind.into(),
            statement: statement.into(),
            method: String::new(),
            valid: false,
            value: Quantity::Float { value: 0.0 },
            bound: Quantity::Float { value: 0.0 },
            margin: Quantity::Float { value: 0.0 },
            inputs: BTreeMap::new(),
            details: serde_json::Value::Null,
            references: Vec::new(),
        }
    }

    pub fn input(mut self, key: &str, v: impl Serialize) -> Self {
        self.inputs
            .insert(key.to_string(), serde_json::to_value(v).unwrap_or(serde_json::Value::Null));
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("certificate serializes");
        s.push('\n');
        s
    }

    /// Hex SHA-256 of the pretty JSON form (the bytes written to disk).
    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    #[test]
    fn round_trip_and_stable_hash() {
        let mut c = Certificate::new("outer-n1", "outer_measure", "omega >= 1/2")
            .input("stage", 1)
            .input("rho", 0.375);
        c.value = Quantity::float(0.61);
        c.bound = Quantity::exact(&rat(1, 2));
        c.margin = Quantity::NegInfinity;
        c.valid = true;
        let s = c.to_json();
        let back: Certificate = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn non_finite_floats_are_tamed() {
        assert_eq!(Quantity::float(f64::NEG_INFINITY), Quantity::NegInfinity);
        assert_eq!(Quantity::float(f64::NAN).approx(), 0.0);
    }
}
