//! A priori sign hypotheses. Each pairs an error subtype with the control
//! phoneme treated as its full-substitution endpoint; the error is
//! expected to lie between the correct target and the control.

use crate::phones::{ControlPhone, PhoneCategory, Subtype, Target};
use crate::tv::Channel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hypothesis {
    pub target: Target,
    pub error: Subtype,
    pub control: ControlPhone,
    pub channel: Channel,
    /// Expected sign of control - correct (and of the other two contrasts).
    pub sign: i8,
}

/// The three comparisons made for every hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    ControlVsCorrect,
    ErrorVsCorrect,
    ControlVsError,
}

impl Comparison {
    pub const ALL: [Comparison; 3] = [
        Comparison::ControlVsCorrect,
        Comparison::ErrorVsCorrect,
        Comparison::ControlVsError,
    ];

    /// `(phone, reference)` levels of the contrast.
    pub fn levels(self, h: &Hypothesis) -> (PhoneCategory, PhoneCategory) {
        let correct = PhoneCategory::Correct(h.target);
        let error = PhoneCategory::Error(h.target, h.error);
        let control = PhoneCategory::Control(h.control);
        match self {
            Comparison::ControlVsCorrect => (control, correct),
            Comparison::ErrorVsCorrect => (error, correct),
            Comparison::ControlVsError => (control, error),
        }
    }
}

const fn h(
    target: Target,
    error: Subtype,
    control: ControlPhone,
    channel: Channel,
    sign: i8,
) -> Hypothesis {
    Hypothesis {
        target,
        error,
        control,
        channel,
        sign,
    }
}

pub const HYPOTHESES: [Hypothesis; 11] = {
    use Channel::*;
    use ControlPhone as C;
    use Subtype::*;
    use Target::*;
    [
        // /w/ is labiovelar: more protrusion, lower tip, more posterior body.
        h(R, WError, C::W, Lp, 1),
        h(R, WError, C::W, Ttcd, -1),
        h(R, WError, C::W, Tbcl, -1),
        // /ʌ/ is neutral: less protrusion, lower tip, looser body.
        h(R, VowelError, C::Ah, Lp, -1),
        h(R, VowelError, C::Ah, Ttcd, -1),
        h(R, VowelError, C::Ah, Tbcd, -1),
        h(S, Dentalized, C::Th, Ttcl, 1),
        h(S, Dentalized, C::Th, Tbcd, -1),
        h(S, Palatalized, C::Sh, Ttcl, -1),
        h(S, Lateralized, C::L, Ttcd, 1),
        h(S, Lateralized, C::L, Tbcd, -1),
    ]
};

pub fn for_target(target: Target) -> Vec<Hypothesis> {
    HYPOTHESES
        .iter()
        .copied()
        .filter(|h| h.target == target)
        .collect()
}

/// Distinct (error, control) pairs for a target, in table order.
pub fn pairs(target: Target) -> Vec<(Subtype, ControlPhone)> {
    let mut out: Vec<(Subtype, ControlPhone)> = Vec::new();
    for h in for_target(target) {
        if !out.contains(&(h.error, h.control)) {
            out.push((h.error, h.control));
        }
    }
    out
}
