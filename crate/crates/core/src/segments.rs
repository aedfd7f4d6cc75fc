//! Phone alignment parsing and per-phone reduction of tract-variable series.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::formats::fmt_f64;
use crate::phones::{ControlPhone, PhoneCategory, Target};
use crate::ratings::{ConsensusLabel, Outcome};
use crate::tv::{Channel, TractVariableMatrix, TV_RATE_HZ};

#[derive(Debug, thiserror::Error)]
pub enum SegmentError {
    #[error("line {line}: malformed interval for {file_id}: end {end} <= start {start}")]
    MalformedInterval {
        line: usize,
        file_id: String,
        start: f64,
        end: f64,
    },
    #[error("overlapping intervals in {file_id}: [{a_start}, {a_end}) and [{b_start}, {b_end})")]
    Overlap {
        file_id: String,
        a_start: f64,
        a_end: f64,
        b_start: f64,
        b_end: f64,
    },
    #[error("line {line}: unknown phone `{label}`")]
    UnknownPhone { line: usize, label: String },
    #[error("interval [{start}, {end}) of {file_id} lies outside a {len}-sample matrix")]
    OutOfRange {
        file_id: String,
        start: f64,
        end: f64,
        len: usize,
    },
    #[error("interval [{start}, {end}) of {file_id} selects no samples")]
    EmptyWindow {
        file_id: String,
        start: f64,
        end: f64,
    },
    #[error("duplicate observation for file {file_id}, phone {phone}")]
    Duplicate { file_id: String, phone: String },
    #[error("no tract variables for file {0}")]
    MissingMatrix(String),
    #[error("no speaker metadata for file {0}")]
    MissingMetadata(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SegmentError>;

/// One aligned phone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhoneInterval {
    pub file_id: String,
    pub phone: String,
    pub start: f64,
    pub end: f64,
}

/// Phone labels the aligner may emit for analysis: the two targets and the
/// positive controls, by ASCII or IPA symbol.
pub fn is_inventory_phone(label: &str) -> bool {
    label.parse::<Target>().is_ok() || label.parse::<ControlPhone>().is_ok()
}

#[derive(Deserialize)]
struct AlignmentRow {
    file_id: String,
    phone: String,
    start_s: f64,
    end_s: f64,
}

/// Parses an alignment CSV (`file_id,phone,start_s,end_s`). The result is
/// sorted by start time (then file id); overlaps within a file are errors.
pub fn parse_alignment<R: Read>(reader: R) -> Result<Vec<PhoneInterval>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<AlignmentRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| SegmentError::Parse {
            line,
            msg: e.to_string(),
        })?;
        if !is_inventory_phone(&row.phone) {
            return Err(SegmentError::UnknownPhone {
                line,
                label: row.phone,
            });
        }
        if !(row.start_s.is_finite() && row.end_s.is_finite())
            || row.start_s < 0.0
            || row.end_s <= row.start_s
        {
            return Err(SegmentError::MalformedInterval {
                line,
                file_id: row.file_id,
                start: row.start_s,
                end: row.end_s,
            });
        }
        out.push(PhoneInterval {
            file_id: row.file_id,
            phone: row.phone,
            start: row.start_s,
            end: row.end_s,
        });
    }
    out.sort_by(|a, b| {
        a.start
            .total_cmp(&b.start)
            .then_with(|| a.file_id.cmp(&b.file_id))
    });

    let mut last: HashMap<&str, &PhoneInterval> = HashMap::new();
    for iv in &out {
        if let Some(prev) = last.get(iv.file_id.as_str()) {
            if iv.start < prev.end {
                return Err(SegmentError::Overlap {
                    file_id: iv.file_id.clone(),
                    a_start: prev.start,
                    a_end: prev.end,
                    b_start: iv.start,
                    b_end: iv.end,
                });
            }
        }
        last.insert(&iv.file_id, iv);
    }
    Ok(out)
}

/// `ceil(t * rate)`, treating products within 1e-6 of an integer as that
/// integer so that decimal boundaries like 0.2 s land on sample 20.
fn boundary_index(t: f64) -> i64 {
    let v = t * TV_RATE_HZ;
    let r = v.round();
    if (v - r).abs() < 1e-6 {
        r as i64
    } else {
        v.ceil() as i64
    }
}

/// Sample range `[ceil(start * 100), ceil(end * 100))` of an interval.
pub fn sample_range(start: f64, end: f64) -> (i64, i64) {
    (boundary_index(start), boundary_index(end))
}

/// Per-channel means of the samples inside `interval`.
pub fn extract_phone_tv(
    matrix: &TractVariableMatrix,
    interval: &PhoneInterval,
) -> Result<[f64; 9]> {
    let (lo, hi) = sample_range(interval.start, interval.end);
    if lo < 0 || hi > matrix.len() as i64 {
        return Err(SegmentError::OutOfRange {
            file_id: interval.file_id.clone(),
            start: interval.start,
            end: interval.end,
            len: matrix.len(),
        });
    }
    if hi <= lo {
        return Err(SegmentError::EmptyWindow {
            file_id: interval.file_id.clone(),
            start: interval.start,
            end: interval.end,
        });
    }
    let (lo, hi) = (lo as usize, hi as usize);
    let n = (hi - lo) as f64;
    let mut means = [0.0; 9];
    for c in Channel::ALL {
        means[c.index()] = matrix.channel(c)[lo..hi].iter().sum::<f64>() / n;
    }
    Ok(means)
}

/// One phone interval reduced to per-channel means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhoneObservation {
    pub file_id: String,
    pub speaker_id: String,
    pub utterance_id: String,
    pub phone: PhoneCategory,
    /// LA, LP, TTCL, TTCD, TBCL, TBCD.
    pub tv: [f64; 6],
    /// PER, APER, F0 when available.
    pub source: Option<[f64; 3]>,
    pub mean_score: Option<f64>,
}

impl PhoneObservation {
    pub fn get(&self, c: Channel) -> Option<f64> {
        match c {
            Channel::Per => self.source.map(|s| s[0]),
            Channel::Aper => self.source.map(|s| s[1]),
            Channel::F0 => self.source.map(|s| s[2]),
            oral => Some(self.tv[oral.index()]),
        }
    }
}

/// Speaker and utterance identity of an audio file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileInfo {
    pub speaker_id: String,
    pub utterance_id: String,
}

/// Builds one observation per (file, target or control phone).
///
/// Target phones take their category from the file's consensus label and
/// are skipped when the file was excluded or has no label. Control phones
/// are taken as correctly produced and carry no score.
pub fn build_observations(
    intervals: &[PhoneInterval],
    matrices: &HashMap<String, TractVariableMatrix>,
    files: &HashMap<String, FileInfo>,
    consensus: &HashMap<String, ConsensusLabel>,
) -> Result<Vec<PhoneObservation>> {
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut out = Vec::new();
    for iv in intervals {
        let (phone, score) = if let Ok(target) = iv.phone.parse::<Target>() {
            let Some(label) = consensus.get(&iv.file_id) else {
                continue;
            };
            match label.outcome {
                Outcome::CorrectUnanimous => {
                    (PhoneCategory::Correct(target), Some(label.mean_score))
                }
                Outcome::ErrorSubtype(st) if st.valid_for(target) => {
                    (PhoneCategory::Error(target, st), Some(label.mean_score))
                }
                _ => continue,
            }
        } else {
            let c: ControlPhone = iv.phone.parse().map_err(|_| SegmentError::UnknownPhone {
                line: 0,
                label: iv.phone.clone(),
            })?;
            (PhoneCategory::Control(c), None)
        };
        if !seen.insert((iv.file_id.clone(), phone.to_string())) {
            return Err(SegmentError::Duplicate {
                file_id: iv.file_id.clone(),
                phone: phone.to_string(),
            });
        }
        let m = matrices
            .get(&iv.file_id)
            .ok_or_else(|| SegmentError::MissingMatrix(iv.file_id.clone()))?;
        let info = files
            .get(&iv.file_id)
            .ok_or_else(|| SegmentError::MissingMetadata(iv.file_id.clone()))?;
        let means = extract_phone_tv(m, iv)?;
        let mut tv = [0.0; 6];
        tv.copy_from_slice(&means[..6]);
        out.push(PhoneObservation {
            file_id: iv.file_id.clone(),
            speaker_id: info.speaker_id.clone(),
            utterance_id: info.utterance_id.clone(),
            phone,
            tv,
            source: Some([
                means[Channel::Per.index()],
                means[Channel::Aper.index()],
                means[Channel::F0.index()],
            ]),
            mean_score: score,
        });
    }
    Ok(out)
}

pub const OBSERVATION_HEADER: [&str; 14] = [
    "file_id",
    "speaker_id",
    "utterance_id",
    "phone",
    "LA",
    "LP",
    "TTCL",
    "TTCD",
    "TBCL",
    "TBCD",
    "PER",
    "APER",
    "F0",
    "mean_score",
];

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_observations<W: Write>(writer: W, obs: &[PhoneObservation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(OBSERVATION_HEADER)?;
    for o in obs {
        let mut rec: Vec<String> = vec![
            o.file_id.clone(),
            o.speaker_id.clone(),
            o.utterance_id.clone(),
            o.phone.to_string(),
        ];
        rec.extend(o.tv.iter().map(|v| fmt_f64(*v)));
        for c in [Channel::Per, Channel::Aper, Channel::F0] {
            rec.push(opt(o.get(c)));
        }
        rec.push(opt(o.mean_score));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_observations<R: Read>(reader: R) -> Result<Vec<PhoneObservation>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(OBSERVATION_HEADER) {
        return Err(SegmentError::Parse {
            line: 1,
            msg: format!("expected header {}", OBSERVATION_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let num = |j: usize| -> Result<Option<f64>> {
            let s = &rec[j];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>().map(Some).map_err(|e| SegmentError::Parse {
                line,
                msg: format!("{}: {e}", OBSERVATION_HEADER[j]),
            })
        };
        let phone: PhoneCategory = rec[3].parse().map_err(|_| SegmentError::UnknownPhone {
            line,
            label: rec[3].to_string(),
        })?;
        let mut tv = [0.0; 6];
        for (k, v) in tv.iter_mut().enumerate() {
            *v = num(4 + k)?.ok_or_else(|| SegmentError::Parse {
                line,
                msg: format!("{} is required", OBSERVATION_HEADER[4 + k]),
            })?;
        }
        let src = [num(10)?, num(11)?, num(12)?];
        let source = match src {
            [Some(p), Some(a), Some(f)] => Some([p, a, f]),
            [None, None, None] => None,
            _ => {
                return Err(SegmentError::Parse {
                    line,
                    msg: "source columns must be all set or all empty".into(),
                })
            }
        };
        out.push(PhoneObservation {
            file_id: rec[0].to_string(),
            speaker_id: rec[1].to_string(),
            utterance_id: rec[2].to_string(),
            phone,
            tv,
            source,
            mean_score: num(13)?,
        });
    }
    Ok(out)
}

/// Counts observations per phone category, for summary tables.
pub fn phone_counts(obs: &[PhoneObservation]) -> BTreeMap<PhoneCategory, usize> {
    let mut m = BTreeMap::new();
    for o in obs {
        *m.entry(o.phone).or_insert(0) += 1;
    }
    m
}
