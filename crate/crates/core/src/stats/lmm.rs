//! Linear mixed model with a random speaker intercept and, optionally, a
//! random utterance-within-speaker intercept, fitted by REML with the
//! variance ratios profiled out on a log scale.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::design::Design;
use super::optim::{nelder_mead, newton_polish};
use super::{Result, StatsError};

/// Log variance ratios below this are treated as zero.
const LOG_FLOOR: f64 = -30.0;
const LOG_CEIL: f64 = 15.0;
const MAX_ITER: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    Speaker,
    /// Utterances nested within speakers.
    SpeakerUtterance,
}

#[derive(Debug, Clone, Serialize)]
pub struct LmmFit {
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    /// Row-major `p x p`.
    pub cov_beta: Vec<f64>,
    pub sigma2_speaker: f64,
    pub sigma2_utterance: f64,
    pub sigma2_resid: f64,
    pub reml_loglik: f64,
    pub n: usize,
    pub n_speakers: usize,
    pub n_utterances: usize,
    pub iterations: usize,
    /// Components estimated at zero.
    pub boundary: Vec<&'static str>,
    #[serde(skip)]
    pub design: Design,
}

impl LmmFit {
    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn se(&self) -> Vec<f64> {
        let p = self.p();
        (0..p)
            .map(|i| self.cov_beta[i * p + i].max(0.0).sqrt())
            .collect()
    }

    pub fn coef(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.beta[i], self.se()[i]))
    }

    /// `l' beta` and its standard error.
    pub fn linear(&self, l: &[f64]) -> (f64, f64) {
        let p = self.p();
        let est = l.iter().zip(&self.beta).map(|(a, b)| a * b).sum();
        let mut var = 0.0;
        for i in 0..p {
            for j in 0..p {
                var += l[i] * self.cov_beta[i * p + j] * l[j];
            }
        }
        (est, var.max(0.0).sqrt())
    }
}

/// Sufficient statistics of `[X y]` for the closed-form block inverse.
struct Blocks {
    p: usize,
    n: usize,
    gram: DMatrix<f64>,
    /// Per utterance: row count and column sums of `[X y]`.
    utt_n: Vec<f64>,
    utt_sum: Vec<DVector<f64>>,
    /// Utterance indices per speaker.
    speakers: Vec<Vec<usize>>,
}

struct Profile {
    crit: f64,
    beta: DVector<f64>,
    a_inv: DMatrix<f64>,
    sigma2: f64,
}

impl Blocks {
    /// `-2` times the profiled REML log-likelihood at variance ratios
    /// `(speaker, utterance)` relative to the residual variance.
    fn profile(&self, ts: f64, tu: f64) -> Option<Profile> {
        let p = self.p;
        let mut m = self.gram.clone();
        let mut logdet = 0.0;
        for utts in &self.speakers {
            let mut v = DVector::zeros(p + 1);
            let mut s = 0.0;
            for &j in utts {
                let nj = self.utt_n[j];
                let w = 1.0 / (1.0 + tu * nj);
                if tu > 0.0 {
                    let c = tu * w;
                    m.ger(-c, &self.utt_sum[j], &self.utt_sum[j], 1.0);
                    logdet += (1.0 + tu * nj).ln();
                }
                v.axpy(w, &self.utt_sum[j], 1.0);
                s += w * nj;
            }
            if ts > 0.0 {
                let k = ts / (1.0 + ts * s);
                m.ger(-k, &v, &v, 1.0);
                logdet += (1.0 + ts * s).ln();
            }
        }
        let a = m.view((0, 0), (p, p)).into_owned();
        let b = m.view((0, p), (p, 1)).column(0).into_owned();
        let yy = m[(p, p)];
        let chol = a.clone().cholesky()?;
        let beta = chol.solve(&b);
        let rss = yy - b.dot(&beta);
        let df = (self.n - p) as f64;
        let sigma2 = (rss / df).max(f64::MIN_POSITIVE);
        let logdet_a: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let crit =
            df * sigma2.ln() + logdet + logdet_a + df * (1.0 + (2.0 * std::f64::consts::PI).ln());
        Some(Profile {
            crit,
            beta,
            a_inv: chol.inverse(),
            sigma2,
        })
    }
}

fn ratio(rho: f64) -> f64 {
    if rho <= LOG_FLOOR {
        0.0
    } else {
        rho.min(LOG_CEIL).exp()
    }
}

/// Fits the model. `utterances` are only consulted for nested grouping and
/// are interpreted within speaker.
pub fn fit_lmm_reml(
    design: Design,
    y: &[f64],
    speakers: &[String],
    utterances: &[String],
    grouping: Grouping,
) -> Result<LmmFit> {
    let n = design.n;
    let p = design.p();
    if y.len() != n
        || speakers.len() != n
        || (grouping == Grouping::SpeakerUtterance && utterances.len() != n)
    {
        return Err(StatsError::Shape(
            "response and grouping lengths must match the design".into(),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::Domain("non-finite response".into()));
    }
    if n <= p {
        return Err(StatsError::Shape(format!("{n} rows for {p} fixed effects")));
    }

    let mut spk_index: HashMap<&str, usize> = HashMap::new();
    let mut utt_index: HashMap<(&str, &str), usize> = HashMap::new();
    let mut speakers_utts: Vec<Vec<usize>> = Vec::new();
    let mut utt_rows: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let s = speakers[i].as_str();
        let si = *spk_index.entry(s).or_insert_with(|| {
            speakers_utts.push(Vec::new());
            speakers_utts.len() - 1
        });
        let key = match grouping {
            Grouping::SpeakerUtterance => (s, utterances[i].as_str()),
            Grouping::Speaker => (s, ""),
        };
        let uj = match grouping {
            Grouping::SpeakerUtterance => *utt_index.entry(key).or_insert_with(|| {
                utt_rows.push(Vec::new());
                speakers_utts[si].push(utt_rows.len() - 1);
                utt_rows.len() - 1
            }),
            Grouping::Speaker => {
                utt_rows.push(Vec::new());
                speakers_utts[si].push(utt_rows.len() - 1);
                utt_rows.len() - 1
            }
        };
        utt_rows[uj].push(i);
    }
    if speakers_utts.len() < 2 {
        return Err(StatsError::Grouping(
            "at least two speakers are required".into(),
        ));
    }
    if grouping == Grouping::SpeakerUtterance {
        if !speakers_utts.iter().any(|u| u.len() >= 2) {
            return Err(StatsError::Grouping(
                "no speaker has two or more utterances".into(),
            ));
        }
        if !utt_rows.iter().any(|r| r.len() >= 2) {
            return Err(StatsError::Grouping(
                "every utterance has a single row; utterance variance is not identifiable".into(),
            ));
        }
    }

    let mut aug = DMatrix::<f64>::zeros(n, p + 1);
    for i in 0..n {
        for (j, v) in design.row(i).iter().enumerate() {
            aug[(i, j)] = *v;
        }
        aug[(i, p)] = y[i];
    }
    let gram = aug.tr_mul(&aug);
    let utt_sum = utt_rows
        .iter()
        .map(|rows| {
            let mut s = DVector::zeros(p + 1);
            for &i in rows {
                s += aug.row(i).transpose();
            }
            s
        })
        .collect();
    let blocks = Blocks {
        p,
        n,
        gram,
        utt_n: utt_rows.iter().map(|r| r.len() as f64).collect(),
        utt_sum,
        speakers: speakers_utts,
    };

    let nested = grouping == Grouping::SpeakerUtterance;
    let eval = |ts: f64, tu: f64| {
        blocks
            .profile(ts, tu)
            .map(|pr| pr.crit)
            .unwrap_or(f64::INFINITY)
    };

    // Candidates: interior optimum plus each boundary face.
    let mut candidates: Vec<(f64, f64, f64)> = Vec::new();
    let mut iterations = 0;
    let mut converged = true;
    let mut trace = Vec::new();
    let mut run = |dims: &[bool; 2]| {
        let k = dims.iter().filter(|d| **d).count();
        let unpack = |x: &[f64]| -> (f64, f64) {
            let mut it = x.iter();
            let ts = if dims[0] {
                ratio(*it.next().unwrap())
            } else {
                0.0
            };
            let tu = if dims[1] {
                ratio(*it.next().unwrap())
            } else {
                0.0
            };
            (ts, tu)
        };
        let f = |x: &[f64]| {
            let x: Vec<f64> = x
                .iter()
                .map(|v| v.clamp(LOG_FLOOR - 1.0, LOG_CEIL))
                .collect();
            let (ts, tu) = unpack(&x);
            eval(ts, tu)
        };
        if k == 0 {
            candidates.push((0.0, 0.0, eval(0.0, 0.0)));
            return;
        }
        let r = nelder_mead(f, &vec![0.0; k], 1.0, 1e-12, 1e-7, MAX_ITER);
        iterations += r.iterations;
        // A run that drifts into the floored region has its optimum on a
        // boundary face, which has its own run.
        let drifted = r.x.iter().any(|v| *v <= LOG_FLOOR);
        converged &= r.converged || drifted;
        if !r.converged && !drifted {
            trace = r.trace.clone();
        }
        let (x, fx) = if r.x.iter().all(|v| *v > LOG_FLOOR + 1.0) {
            newton_polish(f, &r.x, 1e-4, 8)
        } else {
            (r.x.clone(), r.fx)
        };
        let (ts, tu) = unpack(
            &x.iter()
                .map(|v| v.clamp(LOG_FLOOR - 1.0, LOG_CEIL))
                .collect::<Vec<_>>(),
        );
        candidates.push((ts, tu, fx));
    };
    run(&[false, false]);
    run(&[true, false]);
    if nested {
        run(&[false, true]);
        run(&[true, true]);
    }
    if !converged {
        return Err(StatsError::Convergence {
            iterations,
            trace: trace.iter().rev().take(10).copied().collect(),
        });
    }
    let &(ts, tu, _) = candidates
        .iter()
        .filter(|c| c.2.is_finite())
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .ok_or_else(|| StatsError::Convergence {
            iterations,
            trace: vec![],
        })?;
    let prof = blocks.profile(ts, tu).ok_or_else(|| {
        StatsError::Rank(vec![
            "fixed-effect cross-product is not positive definite".into()
        ])
    })?;

    let mut boundary = Vec::new();
    if ts == 0.0 {
        boundary.push("speaker");
    }
    if nested && tu == 0.0 {
        boundary.push("utterance");
    }
    let cov = &prof.a_inv * prof.sigma2;
    Ok(LmmFit {
        names: design.names(),
        beta: prof.beta.iter().copied().collect(),
        cov_beta: (0..p)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .map(|(i, j)| cov[(i, j)])
            .collect(),
        sigma2_speaker: ts * prof.sigma2,
        sigma2_utterance: tu * prof.sigma2,
        sigma2_resid: prof.sigma2,
        reml_loglik: -0.5 * prof.crit,
        n,
        n_speakers: blocks.speakers.len(),
        n_utterances: if nested { blocks.utt_n.len() } else { 0 },
        iterations,
        boundary,
        design,
    })
}
