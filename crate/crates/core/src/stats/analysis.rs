//! Categorical (per-target) and gradient (rating-score) analyses and their
//! CSV reports.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;

use super::design::{Design, Factor};
use super::emm::{bh_adjust, contrast, emmeans, find, normal_p};
use super::hypotheses::{for_target, Comparison};
use super::lmm::{fit_lmm_reml, Grouping, LmmFit};
use super::msd::{articulatory_msd, confidence_ellipse, Articulator, Ellipse};
use super::{Result, StatsError};
use crate::formats::fmt_f64;
use crate::phones::{PhoneCategory, Target};
use crate::segments::PhoneObservation;
use crate::tv::Channel;

pub const CONTRAST_HEADER: &str =
    "family,hypothesis,phone,delta_mu,se,z,p,p_adj,expected_sign,supported";
pub const COEFFICIENT_HEADER: &str = "term,beta,se,t,p";

const TV_FACTOR: &str = "tv_identity";
const PHONE_FACTOR: &str = "phone";
/// FDR level for calling a contrast supported.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastRow {
    pub family: String,
    pub hypothesis: String,
    /// `phone - reference`.
    pub phone: String,
    pub comparison: Comparison,
    pub channel: Channel,
    pub delta_mu: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
    pub p_adj: f64,
    pub expected_sign: i8,
    pub supported: bool,
}

#[derive(Debug, Clone)]
pub struct CategoricalReport {
    pub target: Target,
    pub fit: LmmFit,
    pub contrasts: Vec<ContrastRow>,
    pub levels: Vec<PhoneCategory>,
    /// Correct rows left out because their mean score was not 5.
    pub dropped_correct: usize,
}

impl CategoricalReport {
    pub fn supported(&self) -> usize {
        self.contrasts.iter().filter(|c| c.supported).count()
    }
}

fn is_unanimous(o: &PhoneObservation) -> bool {
    o.mean_score == Some(5.0)
}

/// Fits `tv_value ~ tv_identity * phone + (1 | speaker/utterance)` for one
/// target and evaluates every hypothesis contrast for it, with one BH
/// family per model.
pub fn analyze_categorical(obs: &[PhoneObservation], target: Target) -> Result<CategoricalReport> {
    analyze_categorical_at(obs, target, DEFAULT_ALPHA)
}

/// [`analyze_categorical`] with an explicit FDR level.
pub fn analyze_categorical_at(
    obs: &[PhoneObservation],
    target: Target,
    alpha: f64,
) -> Result<CategoricalReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::Domain(format!("alpha {alpha} outside (0, 1)")));
    }
    let mut rows: Vec<&PhoneObservation> = Vec::new();
    let mut dropped_correct = 0;
    for o in obs.iter().filter(|o| o.phone.target() == target) {
        if o.phone.is_correct() && !is_unanimous(o) {
            dropped_correct += 1;
            continue;
        }
        rows.push(o);
    }
    let present: BTreeSet<PhoneCategory> = rows.iter().map(|o| o.phone).collect();
    let hyps = for_target(target);
    let mut missing = BTreeSet::new();
    let correct = PhoneCategory::Correct(target);
    if !present.contains(&correct) {
        missing.insert(correct.to_string());
    }
    for h in &hyps {
        for cat in [
            PhoneCategory::Error(target, h.error),
            PhoneCategory::Control(h.control),
        ] {
            if !present.contains(&cat) {
                missing.insert(cat.to_string());
            }
        }
    }
    if !missing.is_empty() {
        return Err(StatsError::MissingGroup(missing.into_iter().collect()));
    }

    // Reference level first, then errors and controls in label order.
    let mut levels = vec![correct];
    levels.extend(present.iter().copied().filter(|c| *c != correct));
    let level_names: Vec<String> = levels.iter().map(|l| l.to_string()).collect();
    let tv_levels: Vec<String> = Channel::ORAL.iter().map(|c| c.name().to_string()).collect();

    let mut y = Vec::new();
    let mut tv_labels = Vec::new();
    let mut phone_labels = Vec::new();
    let mut speakers = Vec::new();
    let mut utterances = Vec::new();
    for o in &rows {
        for (k, c) in Channel::ORAL.iter().enumerate() {
            y.push(o.tv[k]);
            tv_labels.push(c.name().to_string());
            phone_labels.push(o.phone.to_string());
            speakers.push(o.speaker_id.clone());
            utterances.push(o.utterance_id.clone());
        }
    }
    let design = Design::build(vec![
        Factor::categorical(TV_FACTOR, tv_levels, &tv_labels)?,
        Factor::categorical(PHONE_FACTOR, level_names, &phone_labels)?,
    ])?;
    let fit = fit_lmm_reml(
        design,
        &y,
        &speakers,
        &utterances,
        Grouping::SpeakerUtterance,
    )?;
    let emms = emmeans(&fit, &[TV_FACTOR, PHONE_FACTOR])?;

    let mut contrasts = Vec::new();
    for h in &hyps {
        for cmp in Comparison::ALL {
            let (a, b) = cmp.levels(h);
            let (sa, sb) = (a.to_string(), b.to_string());
            let ea = find(&emms, &[(TV_FACTOR, h.channel.name()), (PHONE_FACTOR, &sa)])?;
            let eb = find(&emms, &[(TV_FACTOR, h.channel.name()), (PHONE_FACTOR, &sb)])?;
            let c = contrast(&fit, ea, eb, format!("{sa} - {sb}"));
            contrasts.push(ContrastRow {
                family: target.label().to_string(),
                hypothesis: format!("{}:{}", h.error.label(), h.channel.name()),
                phone: c.label,
                comparison: cmp,
                channel: h.channel,
                delta_mu: c.delta_mu,
                se: c.se,
                z: c.z,
                p: c.p,
                p_adj: c.p,
                expected_sign: h.sign,
                supported: false,
            });
        }
    }
    let adj = bh_adjust(&contrasts.iter().map(|c| c.p).collect::<Vec<_>>())?;
    for (c, a) in contrasts.iter_mut().zip(adj) {
        c.p_adj = a;
        let sign_ok =
            (c.delta_mu > 0.0 && c.expected_sign > 0) || (c.delta_mu < 0.0 && c.expected_sign < 0);
        c.supported = a < alpha && sign_ok;
    }
    Ok(CategoricalReport {
        target,
        fit,
        contrasts,
        levels,
        dropped_correct,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub term: String,
    pub beta: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub struct GradientReport {
    pub fit: LmmFit,
    pub coefficients: Vec<Coefficient>,
    /// `(file_id, phone, articulator, score, msd)` for every fitted row.
    pub rows: Vec<(String, PhoneCategory, Articulator, f64, f64)>,
}

impl GradientReport {
    pub fn coefficient(&self, term: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.term == term)
    }
}

/// Per-target channel means of the unanimously correct observations.
pub fn correct_means(obs: &[PhoneObservation]) -> BTreeMap<Target, [f64; 6]> {
    let mut acc: BTreeMap<Target, ([f64; 6], usize)> = BTreeMap::new();
    for o in obs
        .iter()
        .filter(|o| o.phone.is_correct() && is_unanimous(o))
    {
        let e = acc.entry(o.phone.target()).or_insert(([0.0; 6], 0));
        for k in 0..6 {
            e.0[k] += o.tv[k];
        }
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(t, (s, n))| (t, s.map(|v| v / n as f64)))
        .collect()
}

fn oral_index(c: Channel) -> Option<usize> {
    Channel::ORAL.iter().position(|x| *x == c)
}

/// Fits `msd ~ articulator * score * target + (1 | speaker/utterance)` on
/// errored phones only: unanimously correct and positive-control rows are
/// left out of the fit.
pub fn analyze_gradient(obs: &[PhoneObservation]) -> Result<GradientReport> {
    let means = correct_means(obs);
    let errored: Vec<&PhoneObservation> = obs
        .iter()
        .filter(|o| !o.phone.is_control() && !(o.phone.is_correct() && is_unanimous(o)))
        .filter(|o| o.mean_score.is_some())
        .collect();
    if errored.is_empty() {
        return Err(StatsError::Empty(
            "no errored phones with rating scores".into(),
        ));
    }
    let mut rows = Vec::new();
    for o in &errored {
        let target = o.phone.target();
        let m = means.get(&target).ok_or_else(|| {
            StatsError::MissingData(format!(
                "no correct {target} observations for reference means"
            ))
        })?;
        let msd = articulatory_msd(
            &o.file_id,
            |c| oral_index(c).map(|k| o.tv[k]),
            |c| oral_index(c).map(|k| m[k]),
        )?;
        let score = o.mean_score.expect("filtered above");
        for r in msd {
            rows.push((o.file_id.clone(), o.phone, r.articulator, score, r.msd));
        }
    }
    let targets: BTreeSet<Target> = errored.iter().map(|o| o.phone.target()).collect();
    let art_levels: Vec<String> = Articulator::ALL
        .iter()
        .map(|a| a.label().to_string())
        .collect();
    let target_levels: Vec<String> = targets.iter().map(|t| t.label().to_string()).collect();
    let art_labels: Vec<String> = rows.iter().map(|r| r.2.label().to_string()).collect();
    let target_labels: Vec<String> = rows
        .iter()
        .map(|r| r.1.target().label().to_string())
        .collect();
    let design = Design::build(vec![
        Factor::categorical("articulator", art_levels, &art_labels)?,
        Factor::Numeric {
            name: "score".into(),
            values: rows.iter().map(|r| r.3).collect(),
        },
        Factor::categorical("target", target_levels, &target_labels)?,
    ])?;
    let y: Vec<f64> = rows.iter().map(|r| r.4).collect();
    let lookup: BTreeMap<&str, &PhoneObservation> =
        errored.iter().map(|o| (o.file_id.as_str(), *o)).collect();
    let speakers: Vec<String> = rows
        .iter()
        .map(|r| lookup[r.0.as_str()].speaker_id.clone())
        .collect();
    let utterances: Vec<String> = rows
        .iter()
        .map(|r| lookup[r.0.as_str()].utterance_id.clone())
        .collect();
    let fit = fit_lmm_reml(
        design,
        &y,
        &speakers,
        &utterances,
        Grouping::SpeakerUtterance,
    )?;
    let se = fit.se();
    let coefficients = fit
        .names
        .iter()
        .zip(&fit.beta)
        .zip(se)
        .map(|((term, &beta), se)| {
            let t = beta / se;
            Coefficient {
                term: term.clone(),
                beta,
                se,
                t,
                p: normal_p(t),
            }
        })
        .collect();
    Ok(GradientReport {
        fit,
        coefficients,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipseRecord {
    pub phone: String,
    pub articulator: Articulator,
    #[serde(flatten)]
    pub ellipse: Ellipse,
}

/// Location-degree confidence ellipses per (phone, articulator) for one
/// target. Groups with fewer than three points or a singular spread are
/// skipped.
pub fn ellipses(obs: &[PhoneObservation], target: Target) -> Vec<EllipseRecord> {
    let mut groups: BTreeMap<PhoneCategory, Vec<&PhoneObservation>> = BTreeMap::new();
    for o in obs.iter().filter(|o| o.phone.target() == target) {
        groups.entry(o.phone).or_default().push(o);
    }
    let mut out = Vec::new();
    for (phone, members) in groups {
        for a in Articulator::ALL {
            let (loc, deg) = a.channels();
            let (li, di) = (
                oral_index(loc).expect("oral"),
                oral_index(deg).expect("oral"),
            );
            let pts: Vec<[f64; 2]> = members.iter().map(|o| [o.tv[li], o.tv[di]]).collect();
            if let Ok(e) = confidence_ellipse(&pts) {
                out.push(EllipseRecord {
                    phone: phone.to_string(),
                    articulator: a,
                    ellipse: e,
                });
            }
        }
    }
    out
}

pub fn write_contrasts<W: Write>(w: W, rows: &[ContrastRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CONTRAST_HEADER.split(','))?;
    for r in rows {
        wtr.write_record([
            r.family.clone(),
            r.hypothesis.clone(),
            r.phone.clone(),
            fmt_f64(r.delta_mu),
            fmt_f64(r.se),
            fmt_f64(r.z),
            fmt_f64(r.p),
            fmt_f64(r.p_adj),
            if r.expected_sign > 0 {
                "+".into()
            } else {
                "-".into()
            },
            r.supported.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_coefficients<W: Write>(w: W, rows: &[Coefficient]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(COEFFICIENT_HEADER.split(','))?;
    for r in rows {
        wtr.write_record([
            r.term.clone(),
            fmt_f64(r.beta),
            fmt_f64(r.se),
            fmt_f64(r.t),
            fmt_f64(r.p),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
