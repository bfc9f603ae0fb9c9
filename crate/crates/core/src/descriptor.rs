//! JSON scheme descriptors.
//!
//! ```json
//! {"kind": "optimized_2l", "params": {"c0": "1.3760000000000000e0", "c1": "1.4927000000000000e1"},
//!  "T": 1.0, "target": "two_level"}
//! ```
//!
//! Parameters are written as decimal strings with 17 significant digits so
//! they round-trip bit-exactly; plain JSON numbers are accepted on input.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ancillary::{AncillaryScheme, CustomTable, CustomTableSpec, SchemeKind, Target};
use crate::error::{Result, StaError};

/// Formats a float with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamValue(pub f64);

impl Serialize for ParamValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_f64(self.0))
    }
}

impl<'de> Deserialize<'de> for ParamValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(ParamValue(v)),
            Repr::Str(s) => s
                .trim()
                .parse::<f64>()
                .map(ParamValue)
                .map_err(|e| serde::de::Error::custom(format!("bad parameter `{s}`: {e}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeDescriptor {
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
    #[serde(rename = "T", default = "unit_duration")]
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<CustomTableSpec>,
}

fn unit_duration() -> f64 {
    1.0
}

impl SchemeDescriptor {
    pub fn from_scheme(s: &AncillaryScheme) -> Self {
        Self {
            kind: s.kind().as_str().to_string(),
            params: s.params().into_iter().map(|(k, v)| (k, ParamValue(v))).collect(),
            duration: s.duration(),
            target: Some(s.target()),
            table: s.custom_table().map(|t| t.spec().clone()),
        }
    }

    pub fn to_scheme(&self) -> Result<AncillaryScheme> {
        let kind = SchemeKind::parse(&self.kind)?;
        if kind == SchemeKind::Custom {
            let target = self
                .target
                .ok_or_else(|| StaError::Config("custom scheme needs a target".into()))?;
            let spec = self
                .table
                .clone()
                .ok_or_else(|| StaError::Config("custom scheme needs a table".into()))?;
            return AncillaryScheme::custom(self.duration, target, CustomTable::from_spec(spec)?);
        }
        if let (Some(want), Some(have)) = (kind.default_target(), self.target) {
            if want != have {
                return Err(StaError::Config(format!("{kind} is a {want:?} scheme, not {have:?}")));
            }
        }
        let names = kind.param_names();
        if let Some(extra) = self.params.keys().find(|k| !names.contains(&k.as_str())) {
            return Err(StaError::Config(format!("{kind} has no parameter `{extra}`")));
        }
        let values = names
            .iter()
            .map(|n| {
                self.params
                    .get(*n)
                    .map(|p| p.0)
                    .ok_or_else(|| StaError::Config(format!("{kind} needs parameter `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        AncillaryScheme::from_kind(kind, self.duration, &values)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("descriptor serialization cannot fail")
    }
}

pub fn scheme_from_json(text: &str) -> Result<AncillaryScheme> {
    SchemeDescriptor::from_json(text)?.to_scheme()
}

pub fn scheme_to_json(s: &AncillaryScheme) -> String {
    SchemeDescriptor::from_scheme(s).to_json()
}
