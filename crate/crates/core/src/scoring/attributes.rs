use std::collections::BTreeSet;
use std::fmt;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The fixed, ordered attribute set. The order here is the order of every
/// score vector, report column and serialized array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Attribute {
    Toxicity,
    SevereToxicity,
    IdentityAttack,
    Insult,
    Threat,
    Profanity,
    SexuallyExplicit,
    Flirtation,
}

impl Attribute {
    pub const COUNT: usize = 8;

    pub const ALL: [Attribute; Self::COUNT] = [
        Attribute::Toxicity,
        Attribute::SevereToxicity,
        Attribute::IdentityAttack,
        Attribute::Insult,
        Attribute::Threat,
        Attribute::Profanity,
        Attribute::SexuallyExplicit,
        Attribute::Flirtation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// snake_case name used in JSON, CSV and lexicon files.
    pub fn name(self) -> &'static str {
        match self {
            Attribute::Toxicity => "toxicity",
            Attribute::SevereToxicity => "severe_toxicity",
            Attribute::IdentityAttack => "identity_attack",
            Attribute::Insult => "insult",
            Attribute::Threat => "threat",
            Attribute::Profanity => "profanity",
            Attribute::SexuallyExplicit => "sexually_explicit",
            Attribute::Flirtation => "flirtation",
        }
    }

    /// Attribute key on the remote wire.
    pub fn api_name(self) -> &'static str {
        match self {
            Attribute::Toxicity => "TOXICITY",
            Attribute::SevereToxicity => "SEVERE_TOXICITY",
            Attribute::IdentityAttack => "IDENTITY_ATTACK",
            Attribute::Insult => "INSULT",
            Attribute::Threat => "THREAT",
            Attribute::Profanity => "PROFANITY",
            Attribute::SexuallyExplicit => "SEXUALLY_EXPLICIT",
            Attribute::Flirtation => "FLIRTATION",
        }
    }

    /// Short column header for reports.
    pub fn label(self) -> &'static str {
        match self {
            Attribute::Toxicity => "Toxicity",
            Attribute::SevereToxicity => "Sev. Tox.",
            Attribute::IdentityAttack => "Id. Attack",
            Attribute::Insult => "Insult",
            Attribute::Threat => "Threat",
            Attribute::Profanity => "Profanity",
            Attribute::SexuallyExplicit => "Sex. Exp.",
            Attribute::Flirtation => "Flirt.",
        }
    }

    pub fn from_name(name: &str) -> Option<Attribute> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == name || a.api_name() == name)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One score in `[0, 1]` per attribute.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AttributeScores([f64; Attribute::COUNT]);

impl AttributeScores {
    pub fn new(scores: [f64; Attribute::COUNT]) -> Result<Self> {
        for (a, s) in Attribute::ALL.iter().zip(scores) {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidArgument(format!("{a} score {s} outside [0,1]")));
            }
        }
        Ok(AttributeScores(scores))
    }

    pub fn zeros() -> Self {
        AttributeScores([0.0; Attribute::COUNT])
    }

    pub fn get(&self, attr: Attribute) -> f64 {
        self.0[attr.index()]
    }

    pub fn toxicity(&self) -> f64 {
        self.get(Attribute::Toxicity)
    }

    pub fn as_array(&self) -> &[f64; Attribute::COUNT] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (Attribute, f64)> + '_ {
        Attribute::ALL.into_iter().zip(self.0)
    }
}

/// Attributes whose score is at least `threshold`.
pub fn classify(scores: &AttributeScores, threshold: f64) -> BTreeSet<Attribute> {
    scores
        .iter()
        .filter(|&(_, s)| s >= threshold)
        .map(|(a, _)| a)
        .collect()
}

impl Serialize for AttributeScores {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(Attribute::COUNT))?;
        for (a, s) in self.iter() {
            map.serialize_entry(a.name(), &s)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for AttributeScores {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ScoresVisitor;

        impl<'de> Visitor<'de> for ScoresVisitor {
            type Value = AttributeScores;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map with one score per attribute")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
                let mut out = [None; Attribute::COUNT];
                while let Some(key) = map.next_key::<String>()? {
                    let attr = Attribute::from_name(&key)
                        .ok_or_else(|| de::Error::custom(format!("unknown attribute {key}")))?;
                    out[attr.index()] = Some(map.next_value::<f64>()?);
                }
                let mut scores = [0.0; Attribute::COUNT];
                for (i, a) in Attribute::ALL.iter().enumerate() {
                    scores[i] = out[i].ok_or_else(|| de::Error::missing_field(a.name()))?;
                }
                AttributeScores::new(scores).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_map(ScoresVisitor)
    }
}
