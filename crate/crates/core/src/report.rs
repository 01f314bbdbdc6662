//! Serializable building blocks shared by certificates and reports.

use serde::{Serialize, Serializer};

/// A real number that serializes non-finite values as strings.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("NaN")
        } else if v > 0.0 {
            s.serialize_str("Infinity")
        } else {
            s.serialize_str("-Infinity")
        }
    }
}

impl From<f64> for Real {
    fn from(v: f64) -> Self {
        Real(v)
    }
}

/// One numbered claim in a certificate and where the number came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub claim: String,
    pub value: Real,
    pub provenance: String,
}

impl Evidence {
    pub fn new(claim: impl Into<String>, value: f64, provenance: impl Into<String>) -> Self {
        Self { claim: claim.into(), value: Real(value), provenance: provenance.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    AlmostCompact,
    NotAlmostCompact,
    Compact,
    NotCompact,
    Inconclusive,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_reals_become_strings() {
        let v = vec![Real(1.5), Real(f64::INFINITY), Real(f64::NEG_INFINITY), Real(f64::NAN)];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"[1.5,"Infinity","-Infinity","NaN"]"#);
    }

    #[test]
    fn verdict_names() {
        let s = serde_json::to_string(&[Verdict::AlmostCompact, Verdict::NotCompact]).unwrap();
        assert_eq!(s, r#"["ALMOST_COMPACT","NOT_COMPACT"]"#);
    }
}
