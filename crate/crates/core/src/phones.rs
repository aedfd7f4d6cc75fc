//! Phone inventory: the two rated targets, their error subtypes and the
//! positive-control phonemes paired with them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Rated target phoneme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// American English /ɹ/, written `r`.
    R,
    /// /s/, written `s`.
    S,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::R, Target::S];

    pub fn label(self) -> &'static str {
        match self {
            Target::R => "r",
            Target::S => "s",
        }
    }

    /// Error subtypes offered by the rating scale for this target.
    pub fn subtypes(self) -> &'static [Subtype] {
        use Subtype::*;
        match self {
            Target::R => &[WError, LError, VowelError, Omitted, Other],
            Target::S => &[
                Dentalized,
                Lateralized,
                Palatalized,
                Affricate,
                Stopped,
                Omitted,
                Other,
            ],
        }
    }

    pub fn controls(self) -> &'static [ControlPhone] {
        use ControlPhone::*;
        match self {
            Target::R => &[W, Ah],
            Target::S => &[Th, Sh, L],
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown phone label `{0}`")]
pub struct UnknownPhone(pub String);

impl FromStr for Target {
    type Err = UnknownPhone;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "r" | "R" | "ɹ" => Ok(Target::R),
            "s" | "S" => Ok(Target::S),
            _ => Err(UnknownPhone(s.to_string())),
        }
    }
}

/// Categorical error subtype selected by a rater.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subtype {
    WError,
    LError,
    VowelError,
    Dentalized,
    Lateralized,
    Palatalized,
    Affricate,
    Stopped,
    Omitted,
    Other,
}

impl Subtype {
    pub const ALL: [Subtype; 10] = [
        Subtype::WError,
        Subtype::LError,
        Subtype::VowelError,
        Subtype::Dentalized,
        Subtype::Lateralized,
        Subtype::Palatalized,
        Subtype::Affricate,
        Subtype::Stopped,
        Subtype::Omitted,
        Subtype::Other,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Subtype::WError => "w-error",
            Subtype::LError => "l-error",
            Subtype::VowelError => "vowel-error",
            Subtype::Dentalized => "dentalized",
            Subtype::Lateralized => "lateralized",
            Subtype::Palatalized => "palatalized",
            Subtype::Affricate => "affricate",
            Subtype::Stopped => "stopped",
            Subtype::Omitted => "omitted",
            Subtype::Other => "other",
        }
    }

    pub fn valid_for(self, target: Target) -> bool {
        target.subtypes().contains(&self)
    }
}

impl fmt::Display for Subtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Subtype {
    type Err = UnknownPhone;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subtype::ALL
            .into_iter()
            .find(|st| st.label() == s)
            .ok_or_else(|| UnknownPhone(s.to_string()))
    }
}

/// Positive-control phoneme, assumed correctly articulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ControlPhone {
    /// /w/
    W,
    /// /ʌ/
    Ah,
    /// /θ/
    Th,
    /// /ʃ/
    Sh,
    /// word-initial /l/
    L,
}

impl ControlPhone {
    pub const ALL: [ControlPhone; 5] = [
        ControlPhone::W,
        ControlPhone::Ah,
        ControlPhone::Th,
        ControlPhone::Sh,
        ControlPhone::L,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ControlPhone::W => "w",
            ControlPhone::Ah => "ah",
            ControlPhone::Th => "th",
            ControlPhone::Sh => "sh",
            ControlPhone::L => "l",
        }
    }

    pub fn target(self) -> Target {
        match self {
            ControlPhone::W | ControlPhone::Ah => Target::R,
            ControlPhone::Th | ControlPhone::Sh | ControlPhone::L => Target::S,
        }
    }
}

impl FromStr for ControlPhone {
    type Err = UnknownPhone;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = match s {
            "ʌ" => "ah",
            "θ" => "th",
            "ʃ" => "sh",
            other => other,
        };
        ControlPhone::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| UnknownPhone(s.to_string()))
    }
}

/// Analysis level of the `phone` factor: a correct target, a perceptually
/// labeled error subtype of a target, or a positive control.
///
/// Text form: `r`, `r>w-error`, `w`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PhoneCategory {
    Correct(Target),
    Error(Target, Subtype),
    Control(ControlPhone),
}

impl PhoneCategory {
    pub fn target(self) -> Target {
        match self {
            PhoneCategory::Correct(t) | PhoneCategory::Error(t, _) => t,
            PhoneCategory::Control(c) => c.target(),
        }
    }

    pub fn is_control(self) -> bool {
        matches!(self, PhoneCategory::Control(_))
    }

    pub fn is_correct(self) -> bool {
        matches!(self, PhoneCategory::Correct(_))
    }
}

impl fmt::Display for PhoneCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhoneCategory::Correct(t) => write!(f, "{t}"),
            PhoneCategory::Error(t, s) => write!(f, "{t}>{s}"),
            PhoneCategory::Control(c) => f.write_str(c.label()),
        }
    }
}

impl FromStr for PhoneCategory {
    type Err = UnknownPhone;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some((t, st)) = s.split_once('>') {
            let target: Target = t.parse()?;
            let subtype: Subtype = st.parse()?;
            if !subtype.valid_for(target) {
                return Err(UnknownPhone(s.to_string()));
            }
            return Ok(PhoneCategory::Error(target, subtype));
        }
        if let Ok(t) = s.parse::<Target>() {
            return Ok(PhoneCategory::Correct(t));
        }
        s.parse::<ControlPhone>().map(PhoneCategory::Control)
    }
}

impl Serialize for PhoneCategory {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PhoneCategory {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
