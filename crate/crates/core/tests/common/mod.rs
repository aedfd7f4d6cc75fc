//! Independent reference implementations shared by the integration and
//! acceptance suites. Nothing here calls the code under test except for
//! constructing inputs.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tractvar_core::kinematics::{PalateTrace, PelletFrame, Point};
use tractvar_core::phones::Subtype;
use tractvar_core::ratings::{ExclusionReason, Flag, Outcome, RatingRecord};
use tractvar_core::stats::{Design, Factor};

// ---------------------------------------------------------------- geometry

pub const DENSE: usize = 100_000;

/// `n` points spaced uniformly by arc length along a polyline.
pub fn dense_polyline(pts: &[(f64, f64)], n: usize) -> Vec<(f64, f64)> {
    let seg: Vec<f64> = pts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
        .collect();
    let total: f64 = seg.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    let mut acc = 0.0;
    for i in 0..n {
        let s = total * i as f64 / (n - 1) as f64;
        while k + 1 < seg.len() && acc + seg[k] < s {
            acc += seg[k];
            k += 1;
        }
        let t = if seg[k] > 0.0 {
            ((s - acc) / seg[k]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (a, b) = (pts[k], pts[k + 1]);
        out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
    }
    out
}

/// `n` points on the circle through `a`, `b`, `c`, from `a` to `c` by way
/// of `b`; the polyline `a-b-c` when the three are collinear.
pub fn dense_arc(a: (f64, f64), b: (f64, f64), c: (f64, f64), n: usize) -> Vec<(f64, f64)> {
    // Perpendicular-bisector intersection, solved as a 2x2 system.
    let (a11, a12, r1) = (
        2.0 * (b.0 - a.0),
        2.0 * (b.1 - a.1),
        b.0 * b.0 + b.1 * b.1 - a.0 * a.0 - a.1 * a.1,
    );
    let (a21, a22, r2) = (
        2.0 * (c.0 - a.0),
        2.0 * (c.1 - a.1),
        c.0 * c.0 + c.1 * c.1 - a.0 * a.0 - a.1 * a.1,
    );
    let det = a11 * a22 - a12 * a21;
    let scale = (a11.abs() + a12.abs()) * (a21.abs() + a22.abs());
    if det.abs() <= 1e-12 * scale.max(1e-300) {
        return dense_polyline(&[a, b, c], n);
    }
    let cx = (r1 * a22 - a12 * r2) / det;
    let cy = (a11 * r2 - r1 * a21) / det;
    let r = (a.0 - cx).hypot(a.1 - cy);
    let th = |p: (f64, f64)| (p.1 - cy).atan2(p.0 - cx);
    let two_pi = 2.0 * std::f64::consts::PI;
    let norm = |x: f64| ((x % two_pi) + two_pi) % two_pi;
    let (ta, tb, tc) = (th(a), th(b), th(c));
    let ccw_b = norm(tb - ta);
    let ccw_c = norm(tc - ta);
    let sweep = if ccw_b < ccw_c { ccw_c } else { ccw_c - two_pi };
    (0..n)
        .map(|i| {
            let t = ta + sweep * i as f64 / (n - 1) as f64;
            (cx + r * t.cos(), cy + r * t.sin())
        })
        .collect()
}

fn d2(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).hypot(p.1 - q.1)
}

/// A polyline sampled at `n` points uniformly spaced by arc length. Nearest
/// sample queries are exact over the samples without visiting all of them:
/// along one segment the distance is convex in position, so the nearest
/// sample on that segment neighbours the orthogonal projection.
pub struct DenseTrace {
    pts: Vec<(f64, f64)>,
    cum: Vec<f64>,
    h: f64,
    n: usize,
}

impl DenseTrace {
    pub fn new(pts: &[(f64, f64)], n: usize) -> Self {
        let mut cum = vec![0.0];
        for w in pts.windows(2) {
            cum.push(cum.last().unwrap() + d2(w[0], w[1]));
        }
        let h = cum.last().unwrap() / (n - 1) as f64;
        Self {
            pts: pts.to_vec(),
            cum,
            h,
            n,
        }
    }

    fn sample(&self, j: usize, k: usize) -> (f64, f64) {
        let (a, b) = (self.pts[j], self.pts[j + 1]);
        let len = self.cum[j + 1] - self.cum[j];
        let t = ((k as f64 * self.h - self.cum[j]) / len).clamp(0.0, 1.0);
        (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
    }

    pub fn distance(&self, p: (f64, f64)) -> f64 {
        let mut best = f64::INFINITY;
        for j in 0..self.pts.len() - 1 {
            let (a, b) = (self.pts[j], self.pts[j + 1]);
            let (lo_s, hi_s) = (self.cum[j], self.cum[j + 1]);
            let lo = ((lo_s / self.h).ceil() as usize).min(self.n - 1);
            let hi = ((hi_s / self.h).floor() as usize).min(self.n - 1);
            if lo > hi {
                continue;
            }
            let (vx, vy) = (b.0 - a.0, b.1 - a.1);
            let t = (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / (vx * vx + vy * vy)).clamp(0.0, 1.0);
            let s = lo_s + t * (hi_s - lo_s);
            let mid = (s / self.h).floor() as usize;
            for k in [lo, hi, mid.saturating_sub(1), mid, mid + 1, mid + 2] {
                if (lo..=hi).contains(&k) {
                    best = best.min(d2(p, self.sample(j, k)));
                }
            }
        }
        best
    }
}

fn max_step(cloud: &[(f64, f64)]) -> f64 {
    cloud.windows(2).map(|w| d2(w[0], w[1])).fold(0.0, f64::max) * (1.0 + 1e-9) + 1e-15
}

/// Brute-force tongue body constriction: minimum over a dense arc of the
/// distance to a dense trace, with the most anterior point on ties.
pub fn oracle_tongue_body(frame: &PelletFrame, trace: &[(f64, f64)]) -> (f64, f64) {
    let dense = DenseTrace::new(trace, DENSE);
    let xy = |p: Point| (p.x, p.y);
    let arc = dense_arc(xy(frame.t2), xy(frame.t3), xy(frame.t4), DENSE);
    let astep = max_step(&arc);
    // A coarse pass gives an upper bound so the fine pass can skip early.
    let bound = (0..arc.len())
        .step_by(97)
        .chain([arc.len() - 1])
        .map(|i| dense.distance(arc[i]))
        .fold(f64::INFINITY, f64::min);
    let (mut best, mut best_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut i = 0;
    while i < arc.len() {
        let d = dense.distance(arc[i]);
        if d < best - 1e-9 {
            best = d;
            best_x = arc[i].0;
        } else if d <= best + 1e-9 {
            best = best.min(d);
            best_x = best_x.max(arc[i].0);
        }
        // The distance field is 1-Lipschitz along the arc, so samples it
        // skips cannot come within the tie band of the minimum.
        let skip = ((d - best.min(bound) - 2e-9) / astep).floor();
        i += if skip >= 1.0 { skip as usize } else { 1 };
    }
    (best, best_x)
}

/// Brute-force tongue tip constriction degree and location.
pub fn oracle_tongue_tip(frame: &PelletFrame, trace: &[(f64, f64)]) -> (f64, f64) {
    (
        DenseTrace::new(trace, DENSE).distance((frame.t1.x, frame.t1.y)),
        frame.t1.x,
    )
}

/// Random palate trace running posteriorly from near the incisors.
pub fn random_trace(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let n = rng.random_range(12..80);
    let len = rng.random_range(60.0..90.0);
    let kind = rng.random_range(0..3);
    let (amp, bumps, phase) = (
        rng.random_range(5.0..20.0),
        rng.random_range(1..4) as f64,
        rng.random_range(0.0..1.0),
    );
    let r = rng.random_range(40.0..80.0);
    (0..n)
        .map(|i| {
            let x = -len * i as f64 / (n - 1) as f64;
            let y = match kind {
                0 => 10.0,
                1 => {
                    let cx = -len / 2.0;
                    10.0 + ((r * r - (x - cx).powi(2)).max(0.0)).sqrt()
                        - (r * r - cx * cx).max(0.0).sqrt()
                }
                _ => {
                    10.0 + amp
                        * (std::f64::consts::PI * bumps * (-x / len + phase))
                            .sin()
                            .abs()
                }
            };
            (x, y)
        })
        .collect()
}

/// Lowest trace height over x in `[lo, hi]` (linear interpolation).
fn trace_floor(trace: &[(f64, f64)]) -> f64 {
    trace.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
}

/// A random frame whose tongue sits below the trace.
pub fn random_frame(rng: &mut ChaCha8Rng, trace: &[(f64, f64)]) -> PelletFrame {
    let floor = trace_floor(trace);
    let cx = rng.random_range(-55.0..-20.0);
    let r = rng.random_range(12.0..35.0);
    let cy = floor - r - rng.random_range(1.0..15.0);
    let a2 = rng.random_range(30f64..80.0).to_radians();
    let a3 = a2 + rng.random_range(20f64..45.0).to_radians();
    let a4 = a3 + rng.random_range(20f64..45.0).to_radians();
    let on = |a: f64| {
        let j = rng_jitter(a);
        Point::new(cx + (r + j) * a.cos(), cy + (r + j) * a.sin())
    };
    let t1 = Point::new(
        rng.random_range(-15.0..5.0),
        floor - rng.random_range(1.0..20.0),
    );
    PelletFrame {
        time: 0.0,
        ul: Point::new(5.0, 12.0),
        ll: Point::new(4.0, -8.0),
        t1,
        t2: on(a2),
        t3: on(a3),
        t4: on(a4),
    }
}

/// Deterministic sub-millimetre radial jitter so pellets are not exactly
/// concyclic with a round-number circle.
fn rng_jitter(a: f64) -> f64 {
    0.3 * (7.0 * a).sin()
}

pub fn to_trace(pts: &[(f64, f64)]) -> PalateTrace {
    PalateTrace::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).expect("valid trace")
}

// --------------------------------------------------------------- consensus

/// Rule-by-rule reference: (outcome, mean over unflagged ratings, n).
pub fn reference_consensus(ratings: &[RatingRecord]) -> (Outcome, f64, usize) {
    let n = ratings.len();
    let mut flagged = false;
    let mut omitted = false;
    let mut all_five = true;
    let mut sum = 0.0;
    let mut cnt = 0usize;
    let mut sum_all = 0.0;
    let mut tally: Vec<(Subtype, usize)> = Vec::new();
    for r in ratings {
        sum_all += r.score as f64;
        if r.flags.is_empty() {
            sum += r.score as f64;
            cnt += 1;
        } else {
            flagged = true;
        }
        if r.subtype == Some(Subtype::Omitted) {
            omitted = true;
        }
        if r.score != 5 {
            all_five = false;
        }
        if let Some(st) = r.subtype {
            match tally.iter_mut().find(|(s, _)| *s == st) {
                Some((_, c)) => *c += 1,
                None => tally.push((st, 1)),
            }
        }
    }
    let mean = if cnt > 0 {
        sum / cnt as f64
    } else {
        sum_all / n as f64
    };
    let outcome = if flagged {
        Outcome::Excluded(ExclusionReason::Flagged)
    } else if omitted {
        Outcome::Excluded(ExclusionReason::Omission)
    } else if all_five {
        Outcome::CorrectUnanimous
    } else {
        let mut winner = None;
        if mean < 5.0 {
            for (st, c) in &tally {
                if *c >= 2 && *c * 2 > n {
                    winner = Some(*st);
                }
            }
        }
        match winner {
            Some(st) => Outcome::ErrorSubtype(st),
            None => Outcome::Excluded(ExclusionReason::NoConsensus),
        }
    };
    (outcome, mean, n)
}

/// Every valid single rating over three subtypes and all flag subsets.
pub fn rating_alphabet(subtypes: [Subtype; 3]) -> Vec<RatingRecord> {
    let mut out = Vec::new();
    for score in 1u8..=5 {
        let options: Vec<Option<Subtype>> = match score {
            1 => subtypes.iter().map(|s| Some(*s)).collect(),
            2 | 3 => std::iter::once(None)
                .chain(subtypes.iter().map(|s| Some(*s)))
                .collect(),
            _ => vec![None],
        };
        for st in options {
            for mask in 0u8..8 {
                let mut r = RatingRecord::new("rater", "file", score, st);
                for (k, f) in Flag::ALL.iter().enumerate() {
                    if mask & (1 << k) != 0 {
                        r.flags.insert(*f);
                    }
                }
                out.push(r);
            }
        }
    }
    out
}

// -------------------------------------------------------------------- FDR

/// Benjamini-Hochberg by direct enumeration: for each p, the smallest
/// `min(1, p_(j) * m / j)` over all ranks `j` at or above its own.
pub fn reference_bh(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    for (k, &i) in idx.iter().enumerate() {
        let mut best: f64 = 1.0;
        for (j, &jj) in idx.iter().enumerate().skip(k) {
            best = best.min(p[jj] * (m as f64 / (j + 1) as f64));
        }
        out[i] = best;
    }
    out
}

// --------------------------------------------------------- mixed models

/// Nested design: speakers x utterances-per-speaker x six channel rows,
/// with the utterance's phone cycling through `phones` levels.
pub struct Simulated {
    pub design: Design,
    pub y: Vec<f64>,
    pub speakers: Vec<String>,
    pub utterances: Vec<String>,
    pub beta: Vec<f64>,
    pub tv: Vec<String>,
    pub phone: Vec<String>,
}

pub const TV_LEVELS: [&str; 6] = ["LA", "LP", "TTCL", "TTCD", "TBCL", "TBCD"];

pub fn simulate_nested(
    seed: u64,
    speakers: usize,
    utts: usize,
    phones: usize,
    sd: (f64, f64, f64),
) -> Simulated {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phone_levels: Vec<String> = (0..phones).map(|k| format!("p{k}")).collect();
    let mut tv = Vec::new();
    let mut phone = Vec::new();
    let mut spk = Vec::new();
    let mut utt = Vec::new();
    for s in 0..speakers {
        for u in 0..utts {
            for t in TV_LEVELS {
                tv.push(t.to_string());
                phone.push(phone_levels[u % phones].clone());
                spk.push(format!("s{s:03}"));
                utt.push(format!("u{u:03}"));
            }
        }
    }
    let design = Design::build(vec![
        Factor::categorical("tv", TV_LEVELS.iter().map(|s| s.to_string()).collect(), &tv).unwrap(),
        Factor::categorical("phone", phone_levels, &phone).unwrap(),
    ])
    .unwrap();
    let p = design.p();
    // Fixed coefficients from the seed, on the scale of normalized channels.
    let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-0.5..0.5)).collect();
    let (nsp, nut, nres) = (
        Normal::new(0.0, sd.0).unwrap(),
        Normal::new(0.0, sd.1).unwrap(),
        Normal::new(0.0, sd.2).unwrap(),
    );
    let mut y = Vec::with_capacity(design.n);
    let rows_per_utt = TV_LEVELS.len();
    let mut b_s = 0.0;
    let mut b_u = 0.0;
    for i in 0..design.n {
        if i % (utts * rows_per_utt) == 0 {
            b_s = nsp.sample(&mut rng);
        }
        if i % rows_per_utt == 0 {
            b_u = nut.sample(&mut rng);
        }
        let xb: f64 = design.row(i).iter().zip(&beta).map(|(x, b)| x * b).sum();
        y.push(xb + b_s + b_u + nres.sample(&mut rng));
    }
    Simulated {
        design,
        y,
        speakers: spk,
        utterances: utt,
        beta,
        tv,
        phone,
    }
}

/// Ordinary least squares via QR, independent of the mixed-model code.
pub fn ols(design: &Design, y: &[f64]) -> Vec<f64> {
    let x = DMatrix::from_fn(design.n, design.p(), |i, j| design.row(i)[j]);
    let qr = x.qr();
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    let r = qr.r();
    r.solve_upper_triangular(&qty)
        .expect("full rank")
        .iter()
        .copied()
        .collect()
}

/// Cell means of `y` keyed by `(a, b)` labels.
pub fn cell_means(a: &[String], b: &[String], y: &[f64]) -> BTreeMap<(String, String), f64> {
    let mut acc: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for ((x, z), v) in a.iter().zip(b).zip(y) {
        let e = acc.entry((x.clone(), z.clone())).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}

/// Calls `f` with every non-decreasing index sequence of length
/// `1..=max_len` over `0..n`, i.e. every multiset.
pub fn for_each_multiset(n: usize, max_len: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(
        n: usize,
        start: usize,
        left: usize,
        cur: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        for i in start..n {
            cur.push(i);
            f(cur);
            if left > 1 {
                rec(n, i, left - 1, cur, f);
            }
            cur.pop();
        }
    }
    rec(n, 0, max_len, &mut Vec::new(), f);
}

/// Exhaustive comparison of `consensus` against the reference. Returns the
/// number of multisets checked and the first disagreement, if any.
pub fn consensus_exhaustive(max_raters: usize) -> (usize, Option<String>) {
    use tractvar_core::ratings::{consensus, MajorityRule};
    let alphabet = rating_alphabet([Subtype::WError, Subtype::VowelError, Subtype::Omitted]);
    let mut checked = 0;
    let mut first_bad = None;
    let mut buf: Vec<RatingRecord> = Vec::with_capacity(max_raters);
    for_each_multiset(alphabet.len(), max_raters, &mut |idx| {
        if first_bad.is_some() {
            return;
        }
        buf.clear();
        buf.extend(idx.iter().map(|&i| alphabet[i].clone()));
        let got = consensus(&buf, MajorityRule::Strict).expect("non-empty");
        let (outcome, mean, n) = reference_consensus(&buf);
        checked += 1;
        if got.outcome != outcome || got.mean_score != mean || got.n_raters != n {
            first_bad = Some(format!(
                "{idx:?}: got {:?}/{}/{} want {outcome:?}/{mean}/{n}",
                got.outcome, got.mean_score, got.n_raters
            ));
        }
    });
    (checked, first_bad)
}

/// Random p-vectors of length 1..=50 with deliberate ties, zeros and ones.
/// Returns how many matched the reference exactly and the first mismatch.
pub fn bh_random(count: usize, seed: u64) -> (usize, Option<String>) {
    use tractvar_core::stats::bh_adjust;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0;
    for k in 0..count {
        let m = rng.random_range(1..=50);
        let p: Vec<f64> = (0..m)
            .map(|_| match rng.random_range(0..10) {
                0 => 0.0,
                1 => 1.0,
                2 => (rng.random_range(0..20) as f64) / 20.0,
                3 => rng.random::<f64>().powi(6),
                _ => rng.random::<f64>(),
            })
            .collect();
        let got = bh_adjust(&p).expect("valid p");
        let want = reference_bh(&p);
        if got != want {
            return (
                ok,
                Some(format!("vector {k}: {p:?} -> {got:?} vs {want:?}")),
            );
        }
        ok += 1;
    }
    (ok, None)
}

/// Balanced nested data fitted with the saturated `tv * phone` model;
/// marginal means and pairwise phone contrasts within each channel are
/// checked against cell means and the closed-form balanced standard error
/// `sqrt(2 (s2_utt + s2_res) / n_cell)`, in which speaker effects cancel.
/// Returns the worst absolute deviations `(means, delta, se, p)`.
pub fn emm_oracle(seed: u64, sd: (f64, f64, f64)) -> Result<[f64; 4], String> {
    use tractvar_core::stats::{contrast, emmeans, find, fit_lmm_reml, normal_p, Grouping};
    let (speakers, utts, phones) = (10, 8, 4);
    let sim = simulate_nested(seed, speakers, utts, phones, sd);
    let fit = fit_lmm_reml(
        sim.design.clone(),
        &sim.y,
        &sim.speakers,
        &sim.utterances,
        Grouping::SpeakerUtterance,
    )
    .map_err(|e| e.to_string())?;
    let cells = cell_means(&sim.tv, &sim.phone, &sim.y);
    let n_cell = (speakers * utts / phones) as f64;
    let mut worst = [0.0f64; 4];
    let by_both = emmeans(&fit, &["tv", "phone"]).map_err(|e| e.to_string())?;
    for ((t, ph), m) in &cells {
        let e = find(&by_both, &[("tv", t), ("phone", ph)]).map_err(|e| e.to_string())?;
        worst[0] = worst[0].max((e.estimate - m).abs());
    }
    let by_phone = emmeans(&fit, &["phone"]).map_err(|e| e.to_string())?;
    for e in &by_phone {
        let ph = e.level("phone").unwrap();
        let avg = TV_LEVELS
            .iter()
            .map(|t| cells[&(t.to_string(), ph.to_string())])
            .sum::<f64>()
            / TV_LEVELS.len() as f64;
        worst[0] = worst[0].max((e.estimate - avg).abs());
    }
    let var = fit.sigma2_utterance + fit.sigma2_resid;
    let se_hand = (2.0 * var / n_cell).sqrt();
    for t in TV_LEVELS {
        for a in 0..phones {
            for b in a + 1..phones {
                let (pa, pb) = (format!("p{a}"), format!("p{b}"));
                let ea = find(&by_both, &[("tv", t), ("phone", &pa)]).unwrap();
                let eb = find(&by_both, &[("tv", t), ("phone", &pb)]).unwrap();
                let c = contrast(&fit, ea, eb, "");
                let delta =
                    cells[&(t.to_string(), pa.clone())] - cells[&(t.to_string(), pb.clone())];
                let p_hand = normal_p(delta / se_hand);
                worst[1] = worst[1].max((c.delta_mu - delta).abs());
                worst[2] = worst[2].max((c.se - se_hand).abs() / se_hand);
                worst[3] = worst[3].max((c.p - p_hand).abs());
            }
        }
    }
    Ok(worst)
}

pub struct Recovery {
    pub replicates: usize,
    /// Per coefficient, the fraction of replicates within 3 SE of truth.
    pub coverage: Vec<f64>,
    /// Median absolute relative error of the speaker, utterance and
    /// residual variances.
    pub median_rel_err: [f64; 3],
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Repeated simulate-and-fit of the 50 x 20 x 6 nested design.
pub fn lmm_recovery(replicates: usize, seed: u64) -> Recovery {
    use tractvar_core::stats::{fit_lmm_reml, Grouping};
    let sd = (0.10, 0.05, 0.02);
    let truth = [sd.0 * sd.0, sd.1 * sd.1, sd.2 * sd.2];
    let mut hits: Vec<usize> = Vec::new();
    let mut rel: [Vec<f64>; 3] = Default::default();
    for r in 0..replicates {
        let sim = simulate_nested(seed.wrapping_add(r as u64), 50, 20, 4, sd);
        let fit = fit_lmm_reml(
            sim.design.clone(),
            &sim.y,
            &sim.speakers,
            &sim.utterances,
            Grouping::SpeakerUtterance,
        )
        .expect("fit converges");
        hits.resize(fit.p(), 0);
        for (j, se) in fit.se().iter().enumerate() {
            if (fit.beta[j] - sim.beta[j]).abs() <= 3.0 * se {
                hits[j] += 1;
            }
        }
        for (k, est) in [fit.sigma2_speaker, fit.sigma2_utterance, fit.sigma2_resid]
            .into_iter()
            .enumerate()
        {
            rel[k].push((est - truth[k]).abs() / truth[k]);
        }
    }
    let coverage = hits.iter().map(|&h| h as f64 / replicates as f64).collect();
    let [a, b, c] = rel;
    Recovery {
        replicates,
        coverage,
        median_rel_err: [median(a), median(b), median(c)],
    }
}

/// Largest |beta_lmm - beta_ols| when both random variances are zero.
pub fn zero_variance_vs_ols(seed: u64) -> f64 {
    use tractvar_core::stats::{fit_lmm_reml, Grouping};
    let sim = simulate_nested(seed, 20, 10, 4, (0.0, 0.0, 0.02));
    let fit = fit_lmm_reml(
        sim.design.clone(),
        &sim.y,
        &sim.speakers,
        &sim.utterances,
        Grouping::SpeakerUtterance,
    )
    .expect("fit converges");
    let b = ols(&sim.design, &sim.y);
    fit.beta
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
