//! Pellet geometry to Articulatory Phonology tract variables.
//!
//! Coordinates are millimetres with the upper incisor tip at the origin,
//! +x anterior and +y superior. Raw tract variables are plain geometry:
//! constriction degrees are distances (larger = more open) and constriction
//! locations are x-coordinates (larger = more anterior). The articulatory
//! orientation flips channels through a [`FlipTable`] so that larger degree
//! values mean a tighter constriction.

mod geometry;
mod normalize;

pub use geometry::{
    circumcircle, point_polyline_distance, point_segment_distance, sample_arc, Arc, Point,
};
pub use normalize::{denormalize, normalize, ChannelRange, SpeakerRange};

use serde::{Deserialize, Serialize};

use crate::tv::Channel;

/// Samples taken along the T2-T3-T4 arc when searching for the tongue body
/// constriction.
pub const ARC_SAMPLES: usize = 512;

/// Candidates within this distance of the minimum count as ties.
const TIE_TOLERANCE_MM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("invalid pellet frame: {0}")]
    InvalidFrame(&'static str),
    #[error("invalid palate trace: {0}")]
    InvalidTrace(String),
    #[error("frame is already in {0:?} orientation")]
    Orientation(Orientation),
    #[error("channel {0} has no values")]
    EmptyChannel(Channel),
    #[error("speaker range has no entry for channel {0}")]
    MissingChannel(Channel),
    #[error("invalid range for {channel}: max {max} < min {min}")]
    InvalidRange {
        channel: Channel,
        min: f64,
        max: f64,
    },
}

pub type Result<T> = std::result::Result<T, KinematicsError>;

/// Pellet positions for one articulography frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PelletFrame {
    pub time: f64,
    pub ul: Point,
    pub ll: Point,
    pub t1: Point,
    pub t2: Point,
    pub t3: Point,
    pub t4: Point,
}

impl PelletFrame {
    pub fn pellets(&self) -> [Point; 6] {
        [self.ul, self.ll, self.t1, self.t2, self.t3, self.t4]
    }

    pub fn validate(&self) -> Result<()> {
        if !self.time.is_finite() {
            return Err(KinematicsError::InvalidFrame("non-finite time"));
        }
        if !self.pellets().iter().all(|p| p.is_finite()) {
            return Err(KinematicsError::InvalidFrame(
                "non-finite pellet coordinate",
            ));
        }
        Ok(())
    }

    pub fn translate(&self, dx: f64, dy: f64) -> PelletFrame {
        PelletFrame {
            time: self.time,
            ul: self.ul.translate(dx, dy),
            ll: self.ll.translate(dx, dy),
            t1: self.t1.translate(dx, dy),
            t2: self.t2.translate(dx, dy),
            t3: self.t3.translate(dx, dy),
            t4: self.t4.translate(dx, dy),
        }
    }
}

/// Midsagittal trace of the maxilla, velum and anterior pharyngeal wall,
/// ordered anterior to posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalateTrace {
    points: Vec<Point>,
}

impl PalateTrace {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 2 {
            return Err(KinematicsError::InvalidTrace(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(KinematicsError::InvalidTrace(format!(
                "point {i} is not finite"
            )));
        }
        if let Some(i) = points.windows(2).position(|w| w[0] == w[1]) {
            return Err(KinematicsError::InvalidTrace(format!(
                "points {i} and {} repeat",
                i + 1
            )));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Vertical coordinate of the trace at `x` by linear interpolation, or
    /// `None` when `x` lies outside the trace's horizontal extent.
    pub fn height_at(&self, x: f64) -> Option<f64> {
        self.points.windows(2).find_map(|w| {
            let (a, b) = (w[0], w[1]);
            let (lo, hi) = if a.x <= b.x { (a, b) } else { (b, a) };
            if x < lo.x || x > hi.x {
                return None;
            }
            if hi.x == lo.x {
                return Some(lo.y.max(hi.y));
            }
            Some(lo.y + (hi.y - lo.y) * (x - lo.x) / (hi.x - lo.x))
        })
    }

    pub fn translate(&self, dx: f64, dy: f64) -> PalateTrace {
        PalateTrace {
            points: self.points.iter().map(|p| p.translate(dx, dy)).collect(),
        }
    }

    fn distance(&self, p: Point) -> f64 {
        point_polyline_distance(p, &self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Raw,
    Articulatory,
}

/// The six oral tract variables of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TractVariableFrame {
    pub la: f64,
    pub lp: f64,
    pub ttcl: f64,
    pub ttcd: f64,
    pub tbcl: f64,
    pub tbcd: f64,
    pub orientation: Orientation,
}

impl TractVariableFrame {
    pub fn values(&self) -> [f64; 6] {
        [self.la, self.lp, self.ttcl, self.ttcd, self.tbcl, self.tbcd]
    }

    pub fn get(&self, c: Channel) -> Option<f64> {
        c.is_oral().then(|| self.values()[c.index()])
    }

    fn with_values(v: [f64; 6], orientation: Orientation) -> Self {
        Self {
            la: v[0],
            lp: v[1],
            ttcl: v[2],
            ttcd: v[3],
            tbcl: v[4],
            tbcd: v[5],
            orientation,
        }
    }
}

/// Euclidean distance between the upper and lower lip pellets.
pub fn lip_aperture(frame: &PelletFrame) -> Result<f64> {
    frame.validate()?;
    Ok(frame.ul.dist(frame.ll))
}

/// Horizontal offset of the lower lip from the incisor origin.
pub fn lip_protrusion(frame: &PelletFrame) -> Result<f64> {
    frame.validate()?;
    Ok(frame.ll.x)
}

/// Tongue tip constriction `(TTCD, TTCL)` in raw orientation: the minimum
/// T1-to-trace distance and the horizontal position of T1.
pub fn tongue_tip_tvs(frame: &PelletFrame, trace: &PalateTrace) -> Result<(f64, f64)> {
    if !frame.t1.is_finite() {
        return Err(KinematicsError::InvalidFrame("non-finite T1"));
    }
    Ok((trace.distance(frame.t1), frame.t1.x))
}

/// Tongue body constriction `(TBCD, TBCL)` in raw orientation.
///
/// The arc through T2, T3 and T4 is scanned at [`ARC_SAMPLES`] points. When
/// several samples tie for the minimum (a flat stretch) TBCL is the most
/// anterior of them; otherwise the minimum is refined between the two
/// neighbouring samples, so TBCD and TBCL are not limited by the scan
/// spacing.
pub fn tongue_body_tvs(frame: &PelletFrame, trace: &PalateTrace) -> Result<(f64, f64)> {
    if ![frame.t2, frame.t3, frame.t4].iter().all(|p| p.is_finite()) {
        return Err(KinematicsError::InvalidFrame(
            "non-finite tongue body pellet",
        ));
    }
    let arc = Arc::through(frame.t2, frame.t3, frame.t4);
    let n = ARC_SAMPLES;
    let u = |i: usize| i as f64 / (n - 1) as f64;
    let samples: Vec<Point> = (0..n).map(|i| arc.at(u(i))).collect();
    let dists: Vec<f64> = samples.iter().map(|p| trace.distance(*p)).collect();
    let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = (0..n)
        .filter(|&i| dists[i] <= min + TIE_TOLERANCE_MM)
        .collect();
    if tied.len() > 1 {
        let tbcl = tied
            .iter()
            .map(|&i| samples[i].x)
            .fold(f64::NEG_INFINITY, f64::max);
        return Ok((min, tbcl));
    }
    let i = tied[0];
    let (lo, hi) = (u(i.saturating_sub(1)), u((i + 1).min(n - 1)));
    let (ur, dr) = golden_min(|t| trace.distance(arc.at(t)), lo, hi);
    if dr < min {
        Ok((dr, arc.at(ur).x))
    } else {
        Ok((min, samples[i].x))
    }
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if hi - lo < 1e-14 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// All six oral tract variables of a frame, raw orientation.
pub fn compute_frame(frame: &PelletFrame, trace: &PalateTrace) -> Result<TractVariableFrame> {
    frame.validate()?;
    let (ttcd, ttcl) = tongue_tip_tvs(frame, trace)?;
    let (tbcd, tbcl) = tongue_body_tvs(frame, trace)?;
    Ok(TractVariableFrame {
        la: lip_aperture(frame)?,
        lp: lip_protrusion(frame)?,
        ttcl,
        ttcd,
        tbcl,
        tbcd,
        orientation: Orientation::Raw,
    })
}

/// Per-channel sign applied when moving from raw to articulatory
/// orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipTable {
    pub signs: [f64; 6],
}

impl Default for FlipTable {
    /// Degrees flip (distance becomes closure); locations already grow
    /// anteriorly in the incisor frame; lip channels are untouched.
    fn default() -> Self {
        Self {
            signs: [1.0, 1.0, 1.0, -1.0, 1.0, -1.0],
        }
    }
}

impl FlipTable {
    pub fn sign(&self, c: Channel) -> f64 {
        if c.is_oral() {
            self.signs[c.index()]
        } else {
            1.0
        }
    }

    fn apply(&self, v: [f64; 6]) -> [f64; 6] {
        let mut out = v;
        for (o, s) in out.iter_mut().zip(self.signs) {
            if s < 0.0 {
                *o = -*o;
            }
        }
        out
    }
}

/// Raw to articulatory orientation.
pub fn orient_articulatory(
    frame: &TractVariableFrame,
    table: &FlipTable,
) -> Result<TractVariableFrame> {
    if frame.orientation != Orientation::Raw {
        return Err(KinematicsError::Orientation(frame.orientation));
    }
    Ok(TractVariableFrame::with_values(
        table.apply(frame.values()),
        Orientation::Articulatory,
    ))
}

/// Inverse of [`orient_articulatory`].
pub fn orient_raw(frame: &TractVariableFrame, table: &FlipTable) -> Result<TractVariableFrame> {
    if frame.orientation != Orientation::Articulatory {
        return Err(KinematicsError::Orientation(frame.orientation));
    }
    Ok(TractVariableFrame::with_values(
        table.apply(frame.values()),
        Orientation::Raw,
    ))
}
