//! Perceptual rating records, per-file consensus, rater training and batch
//! assembly.

mod batch;
mod training;

pub use batch::{make_batches, BatchItem, PoolItem, BATCH_SIZE};
pub use training::{
    advance_training, record_batch_completed, score_module, ModuleResult, RaterProgress, Stage,
    TrainingModule, MAINTENANCE_EVERY,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::phones::{Subtype, Target};

pub const MAX_REPLAYS: u8 = 5;
pub const MIN_GROUP_COUNT: usize = 15;

#[derive(Debug, thiserror::Error)]
pub enum RatingError {
    #[error("invalid rating: {0}")]
    Invalid(String),
    #[error("no ratings for file")]
    Empty,
    #[error("length mismatch: {rater} rater scores vs {expert} expert scores")]
    LengthMismatch { rater: usize, expert: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RatingError>;

/// Feedback flag a rater can raise on a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    JunkAudio,
    PartialAudio,
    TranscriptMismatch,
}

impl Flag {
    pub const ALL: [Flag; 3] = [
        Flag::JunkAudio,
        Flag::PartialAudio,
        Flag::TranscriptMismatch,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Flag::JunkAudio => "junk_audio",
            Flag::PartialAudio => "partial_audio",
            Flag::TranscriptMismatch => "transcript_mismatch",
        }
    }
}

impl FromStr for Flag {
    type Err = RatingError;

    fn from_str(s: &str) -> Result<Self> {
        Flag::ALL
            .into_iter()
            .find(|f| f.label() == s)
            .ok_or_else(|| RatingError::Invalid(format!("unknown flag `{s}`")))
    }
}

/// One clinician judgment of one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub rater_id: String,
    pub file_id: String,
    pub score: u8,
    #[serde(default)]
    pub subtype: Option<Subtype>,
    #[serde(default)]
    pub flags: BTreeSet<Flag>,
    #[serde(default)]
    pub lengthened: bool,
    #[serde(default)]
    pub comment: String,
    #[serde(default)]
    pub replay_count: u8,
}

impl RatingRecord {
    pub fn new(rater_id: &str, file_id: &str, score: u8, subtype: Option<Subtype>) -> Self {
        Self {
            rater_id: rater_id.into(),
            file_id: file_id.into(),
            score,
            subtype,
            flags: BTreeSet::new(),
            lengthened: false,
            comment: String::new(),
            replay_count: 0,
        }
    }

    /// Checks the record against the rating scale rules. When `target` is
    /// known the subtype must belong to it.
    pub fn validate(&self, target: Option<Target>) -> Result<()> {
        if !(1..=5).contains(&self.score) {
            return Err(RatingError::Invalid(format!(
                "score {} outside 1..=5",
                self.score
            )));
        }
        match (self.score, self.subtype) {
            (1, None) => return Err(RatingError::Invalid("score 1 requires a subtype".into())),
            (4 | 5, Some(st)) => {
                return Err(RatingError::Invalid(format!(
                    "score {} cannot carry subtype {st}",
                    self.score
                )))
            }
            _ => {}
        }
        if let (Some(t), Some(st)) = (target, self.subtype) {
            if !st.valid_for(t) {
                return Err(RatingError::Invalid(format!(
                    "subtype {st} does not apply to /{t}/"
                )));
            }
        }
        if self.replay_count > MAX_REPLAYS {
            return Err(RatingError::Invalid(format!(
                "replay count {} exceeds {MAX_REPLAYS}",
                self.replay_count
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    Flagged,
    Omission,
    NoConsensus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    CorrectUnanimous,
    ErrorSubtype(Subtype),
    Excluded(ExclusionReason),
}

impl Outcome {
    fn code(self) -> &'static str {
        match self {
            Outcome::CorrectUnanimous => "correct_unanimous",
            Outcome::ErrorSubtype(_) => "error_subtype",
            Outcome::Excluded(ExclusionReason::Flagged) => "excluded_flagged",
            Outcome::Excluded(ExclusionReason::Omission) => "excluded_omission",
            Outcome::Excluded(ExclusionReason::NoConsensus) => "excluded_no_consensus",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusLabel {
    pub file_id: String,
    pub outcome: Outcome,
    pub mean_score: f64,
    pub n_raters: usize,
}

/// How many agreeing raters make a majority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MajorityRule {
    /// More than half of all raters.
    #[default]
    Strict,
    /// At least half of all raters.
    AtLeastHalf,
}

impl MajorityRule {
    fn holds(self, agree: usize, total: usize) -> bool {
        match self {
            MajorityRule::Strict => 2 * agree > total,
            MajorityRule::AtLeastHalf => 2 * agree >= total,
        }
    }
}

/// Consensus for one file's ratings (one per rater).
///
/// Rules in order: any flag excludes; any `omitted` subtype excludes; all
/// fives is correct; an error subtype needs a mean below 5 and at least two
/// raters who also form a majority of everyone rating the file; anything
/// else has no consensus.
pub fn consensus(ratings: &[RatingRecord], rule: MajorityRule) -> Result<ConsensusLabel> {
    let first = ratings.first().ok_or(RatingError::Empty)?;
    let n = ratings.len();
    let unflagged: Vec<&RatingRecord> = ratings.iter().filter(|r| r.flags.is_empty()).collect();
    let scored = if unflagged.is_empty() {
        ratings.iter().collect()
    } else {
        unflagged
    };
    let mean_score = scored.iter().map(|r| r.score as f64).sum::<f64>() / scored.len() as f64;
    let label = |outcome| ConsensusLabel {
        file_id: first.file_id.clone(),
        outcome,
        mean_score,
        n_raters: n,
    };

    if ratings.iter().any(|r| !r.flags.is_empty()) {
        return Ok(label(Outcome::Excluded(ExclusionReason::Flagged)));
    }
    if ratings.iter().any(|r| r.subtype == Some(Subtype::Omitted)) {
        return Ok(label(Outcome::Excluded(ExclusionReason::Omission)));
    }
    if ratings.iter().all(|r| r.score == 5) {
        return Ok(label(Outcome::CorrectUnanimous));
    }
    if mean_score < 5.0 {
        let mut votes: BTreeMap<Subtype, usize> = BTreeMap::new();
        for st in ratings.iter().filter_map(|r| r.subtype) {
            *votes.entry(st).or_insert(0) += 1;
        }
        let winners: Vec<Subtype> = votes
            .iter()
            .filter(|(_, &c)| c >= 2 && rule.holds(c, n))
            .map(|(&st, _)| st)
            .collect();
        if let [only] = winners[..] {
            return Ok(label(Outcome::ErrorSubtype(only)));
        }
    }
    Ok(label(Outcome::Excluded(ExclusionReason::NoConsensus)))
}

/// Keeps the last record per (rater, file), in input order.
pub fn latest_per_rater(records: &[RatingRecord]) -> Vec<RatingRecord> {
    let mut pos: HashMap<(&str, &str), usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        pos.insert((&r.rater_id, &r.file_id), i);
    }
    let mut keep: Vec<usize> = pos.into_values().collect();
    keep.sort_unstable();
    keep.into_iter().map(|i| records[i].clone()).collect()
}

/// Consensus for every file in a rating log. Superseded records (earlier
/// records from the same rater for the same file) are ignored.
pub fn consensus_by_file(
    records: &[RatingRecord],
    rule: MajorityRule,
) -> BTreeMap<String, ConsensusLabel> {
    let mut by_file: BTreeMap<String, Vec<RatingRecord>> = BTreeMap::new();
    for r in latest_per_rater(records) {
        by_file.entry(r.file_id.clone()).or_default().push(r);
    }
    by_file
        .into_iter()
        .map(|(f, rs)| {
            let label = consensus(&rs, rule).expect("group is non-empty");
            (f, label)
        })
        .collect()
}

/// Result of dropping small error-subtype groups.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport {
    pub retained: Vec<ConsensusLabel>,
    pub counts: BTreeMap<Subtype, usize>,
    pub dropped: Vec<Subtype>,
}

/// Drops every error-subtype group with fewer than `threshold` files.
/// Correct and excluded labels pass through untouched.
pub fn filter_min_count(labels: &[ConsensusLabel], threshold: usize) -> FilterReport {
    let mut counts: BTreeMap<Subtype, usize> = BTreeMap::new();
    for l in labels {
        if let Outcome::ErrorSubtype(st) = l.outcome {
            *counts.entry(st).or_insert(0) += 1;
        }
    }
    let dropped: Vec<Subtype> = counts
        .iter()
        .filter(|(_, &c)| c < threshold)
        .map(|(&st, _)| st)
        .collect();
    let retained = labels
        .iter()
        .filter(|l| !matches!(l.outcome, Outcome::ErrorSubtype(st) if dropped.contains(&st)))
        .cloned()
        .collect();
    FilterReport {
        retained,
        counts,
        dropped,
    }
}

pub const RATINGS_HEADER: [&str; 8] = [
    "file_id",
    "rater_id",
    "score",
    "subtype",
    "flags",
    "lengthened",
    "comment",
    "replay_count",
];
pub const CONSENSUS_HEADER: [&str; 5] = ["file_id", "outcome", "subtype", "mean_score", "n_raters"];

pub fn write_ratings<W: Write>(writer: W, records: &[RatingRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RATINGS_HEADER)?;
    for r in records {
        let flags: Vec<&str> = r.flags.iter().map(|f| f.label()).collect();
        w.write_record([
            r.file_id.as_str(),
            r.rater_id.as_str(),
            &r.score.to_string(),
            r.subtype.map(|s| s.label()).unwrap_or(""),
            &flags.join(";"),
            if r.lengthened { "true" } else { "false" },
            r.comment.as_str(),
            &r.replay_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ratings<R: Read>(reader: R) -> Result<Vec<RatingRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    if rdr.headers()?.iter().ne(RATINGS_HEADER) {
        return Err(RatingError::Parse {
            line: 1,
            msg: format!("expected header {}", RATINGS_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let err = |msg: String| RatingError::Parse { line, msg };
        let score: u8 = rec[2]
            .trim()
            .parse()
            .map_err(|e| err(format!("score: {e}")))?;
        let subtype = match rec[3].trim() {
            "" => None,
            s => Some(s.parse::<Subtype>().map_err(|e| err(e.to_string()))?),
        };
        let flags = rec[4]
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<Flag>().map_err(|e| err(e.to_string())))
            .collect::<Result<BTreeSet<Flag>>>()?;
        let lengthened = match rec[5].trim() {
            "true" | "1" => true,
            "false" | "0" | "" => false,
            other => return Err(err(format!("lengthened: `{other}`"))),
        };
        let replay_count: u8 = rec[7]
            .trim()
            .parse()
            .map_err(|e| err(format!("replay_count: {e}")))?;
        let r = RatingRecord {
            rater_id: rec[1].to_string(),
            file_id: rec[0].to_string(),
            score,
            subtype,
            flags,
            lengthened,
            comment: rec[6].to_string(),
            replay_count,
        };
        r.validate(None).map_err(|e| err(e.to_string()))?;
        out.push(r);
    }
    Ok(out)
}

pub fn write_consensus<W: Write>(writer: W, labels: &[ConsensusLabel]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CONSENSUS_HEADER)?;
    for l in labels {
        let subtype = match l.outcome {
            Outcome::ErrorSubtype(st) => st.label(),
            _ => "",
        };
        w.write_record([
            &l.file_id,
            l.outcome.code(),
            subtype,
            &crate::formats::fmt_f64(l.mean_score),
            &l.n_raters.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_consensus<R: Read>(reader: R) -> Result<Vec<ConsensusLabel>> {
    let mut rdr = csv::Reader::from_reader(reader);
    if rdr.headers()?.iter().ne(CONSENSUS_HEADER) {
        return Err(RatingError::Parse {
            line: 1,
            msg: format!("expected header {}", CONSENSUS_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let err = |msg: String| RatingError::Parse { line, msg };
        let outcome = match (&rec[1], &rec[2]) {
            ("correct_unanimous", "") => Outcome::CorrectUnanimous,
            ("error_subtype", st) => Outcome::ErrorSubtype(
                st.parse()
                    .map_err(|e: crate::phones::UnknownPhone| err(e.to_string()))?,
            ),
            ("excluded_flagged", "") => Outcome::Excluded(ExclusionReason::Flagged),
            ("excluded_omission", "") => Outcome::Excluded(ExclusionReason::Omission),
            ("excluded_no_consensus", "") => Outcome::Excluded(ExclusionReason::NoConsensus),
            (o, s) => return Err(err(format!("bad outcome `{o}` / subtype `{s}`"))),
        };
        out.push(ConsensusLabel {
            file_id: rec[0].to_string(),
            outcome,
            mean_score: rec[3]
                .parse()
                .map_err(|e| err(format!("mean_score: {e}")))?,
            n_raters: rec[4].parse().map_err(|e| err(format!("n_raters: {e}")))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Subtype::*;

    fn r(rater: &str, score: u8, st: Option<Subtype>) -> RatingRecord {
        RatingRecord::new(rater, "f1", score, st)
    }

    fn outcome(rs: &[RatingRecord]) -> Outcome {
        consensus(rs, MajorityRule::Strict).unwrap().outcome
    }

    #[test]
    fn unanimous_correct() {
        assert_eq!(
            outcome(&[r("a", 5, None), r("b", 5, None), r("c", 5, None)]),
            Outcome::CorrectUnanimous
        );
    }

    #[test]
    fn two_of_three_subtype() {
        let l = consensus(
            &[
                r("a", 1, Some(WError)),
                r("b", 1, Some(WError)),
                r("c", 2, Some(VowelError)),
            ],
            MajorityRule::Strict,
        )
        .unwrap();
        assert_eq!(l.outcome, Outcome::ErrorSubtype(WError));
        assert!((l.mean_score - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_of_four_is_not_a_majority() {
        let rs = [
            r("a", 1, Some(WError)),
            r("b", 1, Some(WError)),
            r("c", 1, Some(VowelError)),
            r("d", 1, Some(VowelError)),
        ];
        assert_eq!(
            outcome(&rs),
            Outcome::Excluded(ExclusionReason::NoConsensus)
        );
        // Under the at-least-half reading both subtypes tie, still no label.
        assert_eq!(
            consensus(&rs, MajorityRule::AtLeastHalf).unwrap().outcome,
            Outcome::Excluded(ExclusionReason::NoConsensus)
        );
        let rs = [
            r("a", 1, Some(WError)),
            r("b", 1, Some(WError)),
            r("c", 3, None),
            r("d", 4, None),
        ];
        assert_eq!(
            consensus(&rs, MajorityRule::AtLeastHalf).unwrap().outcome,
            Outcome::ErrorSubtype(WError)
        );
        assert_eq!(
            outcome(&rs),
            Outcome::Excluded(ExclusionReason::NoConsensus)
        );
    }

    #[test]
    fn flags_and_omission_come_first() {
        let mut flagged = r("a", 5, None);
        flagged.flags.insert(Flag::JunkAudio);
        assert_eq!(
            outcome(&[flagged, r("b", 5, None)]),
            Outcome::Excluded(ExclusionReason::Flagged)
        );
        let rs = [
            r("a", 1, Some(Omitted)),
            r("b", 1, Some(WError)),
            r("c", 1, Some(WError)),
        ];
        assert_eq!(outcome(&rs), Outcome::Excluded(ExclusionReason::Omission));
        assert!(matches!(
            consensus(&[], MajorityRule::Strict),
            Err(RatingError::Empty)
        ));
    }

    #[test]
    fn mean_ignores_flagged_raters() {
        let mut flagged = r("a", 1, Some(WError));
        flagged.flags.insert(Flag::PartialAudio);
        let l = consensus(
            &[flagged, r("b", 4, None), r("c", 5, None)],
            MajorityRule::Strict,
        )
        .unwrap();
        assert_eq!(l.mean_score, 4.5);
        assert_eq!(l.n_raters, 3);
    }

    #[test]
    fn record_validation() {
        assert!(r("a", 1, Some(WError)).validate(Some(Target::R)).is_ok());
        assert!(r("a", 1, None).validate(None).is_err());
        assert!(r("a", 5, Some(WError)).validate(None).is_err());
        assert!(r("a", 2, None).validate(None).is_ok());
        assert!(r("a", 0, None).validate(None).is_err());
        assert!(r("a", 1, Some(Dentalized))
            .validate(Some(Target::R))
            .is_err());
        let mut x = r("a", 3, None);
        x.replay_count = 6;
        assert!(x.validate(None).is_err());
    }

    #[test]
    fn latest_record_wins() {
        let mut log = vec![r("a", 1, Some(WError)), r("b", 5, None)];
        log.push(r("a", 5, None));
        let labels = consensus_by_file(&log, MajorityRule::Strict);
        assert_eq!(labels["f1"].outcome, Outcome::CorrectUnanimous);
        assert_eq!(labels["f1"].n_raters, 2);
    }

    fn err_label(i: usize, st: Subtype) -> ConsensusLabel {
        ConsensusLabel {
            file_id: format!("f{i}"),
            outcome: Outcome::ErrorSubtype(st),
            mean_score: 1.0,
            n_raters: 3,
        }
    }

    #[test]
    fn min_count_boundary() {
        let mut labels: Vec<_> = (0..14).map(|i| err_label(i, WError)).collect();
        labels.extend((0..15).map(|i| err_label(100 + i, VowelError)));
        let rep = filter_min_count(&labels, MIN_GROUP_COUNT);
        assert_eq!(rep.dropped, vec![WError]);
        assert_eq!(rep.retained.len(), 15);
        assert_eq!(rep.counts[&WError], 14);
        assert!(filter_min_count(&[], 15).retained.is_empty());
    }

    #[test]
    fn csv_round_trips() {
        let mut a = r("a", 2, Some(VowelError));
        a.flags.insert(Flag::TranscriptMismatch);
        a.flags.insert(Flag::JunkAudio);
        a.comment = "quiet, \"maybe\"".into();
        a.replay_count = 3;
        a.lengthened = true;
        let recs = vec![a, r("b", 5, None)];
        let mut buf = Vec::new();
        write_ratings(&mut buf, &recs).unwrap();
        assert_eq!(read_ratings(&buf[..]).unwrap(), recs);

        let labels = vec![
            err_label(1, Lateralized),
            ConsensusLabel {
                file_id: "x".into(),
                outcome: Outcome::Excluded(ExclusionReason::NoConsensus),
                mean_score: 7.0 / 3.0,
                n_raters: 3,
            },
        ];
        let mut buf = Vec::new();
        write_consensus(&mut buf, &labels).unwrap();
        assert_eq!(read_consensus(&buf[..]).unwrap(), labels);
    }
}
