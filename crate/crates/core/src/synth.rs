//! Seeded generators for palates, pellet trajectories, embedding/target
//! pairs and labeled phone corpora. Every output is a pure function of its
//! spec.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::inversion::{upsample2, EmbeddingTensor, Sample, LAYER_COUNT};
use crate::kinematics::{PalateTrace, PelletFrame, Point};
use crate::phones::{PhoneCategory, Target};
use crate::segments::PhoneObservation;
use crate::stats::hypotheses::{for_target, pairs};
use crate::tv::{Channel, TractVariableMatrix};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, SynthError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PalateShape {
    Flat,
    CircularArc,
    SplineLike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_frames: usize,
    pub speaker_count: usize,
    pub palate_shape: PalateShape,
    /// Motion and placement variability in mm. Zero gives the fixed mean
    /// configuration in every frame.
    pub noise_sd: f64,
    /// Embedding width for training pairs.
    #[serde(default = "default_dim")]
    pub embedding_dim: usize,
}

fn default_dim() -> usize {
    16
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_frames: 100,
            speaker_count: 1,
            palate_shape: PalateShape::SplineLike,
            noise_sd: 1.0,
            embedding_dim: default_dim(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_frames == 0 {
            return Err(SynthError::InvalidSpec(
                "n_frames must be at least 1".into(),
            ));
        }
        if self.speaker_count == 0 {
            return Err(SynthError::InvalidSpec(
                "speaker_count must be at least 1".into(),
            ));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(SynthError::InvalidSpec(format!(
                "noise_sd {} must be finite and >= 0",
                self.noise_sd
            )));
        }
        if self.embedding_dim == 0 {
            return Err(SynthError::InvalidSpec(
                "embedding_dim must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Horizontal extent of generated palates: incisor origin back 80 mm.
pub const PALATE_LENGTH_MM: f64 = 80.0;
pub const PALATE_POINTS: usize = 81;
/// Circular-arc palate generator: center and radius.
pub const ARC_CENTER: Point = Point { x: -40.0, y: -20.0 };
pub const ARC_RADIUS: f64 = 50.0;

pub const TONGUE_RADIUS: f64 = 35.0;
const TONGUE_CENTER: Point = Point { x: -35.0, y: -27.0 };
/// Angle of the tongue apex on the tongue circle.
const APEX_ANGLE: f64 = 20.0 * PI / 180.0;
/// Pellet distances from the tongue apex along the tongue surface (mean,
/// sd) for T1..T4, in mm.
pub const PELLET_ARC_MM: [(f64, f64); 4] = [(8.5, 1.07), (25.2, 2.44), (43.8, 3.49), (60.1, 4.14)];
/// Minimum vertical gap kept between any tongue pellet and the palate.
const CLEARANCE_MM: f64 = 0.5;

pub fn generate_palate_trace(spec: &SynthSpec) -> Result<PalateTrace> {
    spec.validate()?;
    let step = PALATE_LENGTH_MM / (PALATE_POINTS - 1) as f64;
    let points = (0..PALATE_POINTS)
        .map(|i| {
            let x = -(i as f64) * step;
            let y = match spec.palate_shape {
                PalateShape::Flat => 10.0,
                PalateShape::CircularArc => {
                    ARC_CENTER.y + (ARC_RADIUS.powi(2) - (x - ARC_CENTER.x).powi(2)).sqrt()
                }
                PalateShape::SplineLike => 10.0 + 15.0 * (PI * -x / PALATE_LENGTH_MM).sin(),
            };
            Point { x, y }
        })
        .collect();
    Ok(PalateTrace::new(points).expect("generated palate is valid"))
}

/// Generating parameters behind one pellet frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PelletTruth {
    pub speaker: usize,
    pub tongue_center: Point,
    pub apex_angle: f64,
    /// T1..T4 distance from the apex along the tongue circle.
    pub arc_mm: [f64; 4],
}

fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + sd * z.clamp(-2.0, 2.0)
}

struct SpeakerMotion {
    arc: [f64; 4],
    freq: [f64; 3],
    phase: [f64; 3],
}

pub fn generate_pellet_sequence(spec: &SynthSpec) -> Result<Vec<PelletFrame>> {
    Ok(generate_pellet_sequence_with_truth(spec)?
        .into_iter()
        .map(|(f, _)| f)
        .collect())
}

/// Pellet frames at 100 Hz with the parameters that generated each.
/// Speakers occupy contiguous blocks of frames; each speaker has its own
/// pellet placement.
pub fn generate_pellet_sequence_with_truth(
    spec: &SynthSpec,
) -> Result<Vec<(PelletFrame, PelletTruth)>> {
    let palate = generate_palate_trace(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sd = spec.noise_sd;
    let speakers: Vec<SpeakerMotion> = (0..spec.speaker_count)
        .map(|_| {
            let mut arc = [0.0; 4];
            for (a, (m, s)) in arc.iter_mut().zip(PELLET_ARC_MM) {
                *a = if sd > 0.0 {
                    truncated_normal(&mut rng, m, s)
                } else {
                    m
                };
            }
            SpeakerMotion {
                arc,
                freq: [
                    rng.random_range(1.0..4.0),
                    rng.random_range(1.0..4.0),
                    rng.random_range(2.0..6.0),
                ],
                phase: [
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.0..2.0 * PI),
                ],
            }
        })
        .collect();
    let jitter = Normal::new(0.0, 0.05 * sd.max(f64::MIN_POSITIVE)).expect("valid sd");

    let mut out = Vec::with_capacity(spec.n_frames);
    for i in 0..spec.n_frames {
        let t = i as f64 / 100.0;
        let s = i * spec.speaker_count / spec.n_frames;
        let m = &speakers[s];
        let wave = |k: usize| (2.0 * PI * m.freq[k] * t + m.phase[k]).sin();
        let mut noise = |scale: f64| {
            if sd > 0.0 {
                scale * jitter.sample(&mut rng)
            } else {
                0.0
            }
        };
        let center = Point {
            x: TONGUE_CENTER.x + 2.0 * sd * wave(0) + noise(1.0),
            y: TONGUE_CENTER.y - sd * (1.0 + wave(1)) + noise(1.0),
        };
        let on_tongue = |c: Point, a: f64| {
            let phi = APEX_ANGLE + a / TONGUE_RADIUS;
            Point {
                x: c.x + TONGUE_RADIUS * phi.cos(),
                y: c.y + TONGUE_RADIUS * phi.sin(),
            }
        };
        let mut pellets = m.arc.map(|a| on_tongue(center, a));
        // Lower the whole tongue until every pellet clears the palate.
        let overlap = pellets
            .iter()
            .filter_map(|p| palate.height_at(p.x).map(|h| p.y - (h - CLEARANCE_MM)))
            .fold(0.0_f64, f64::max);
        let center = Point {
            x: center.x,
            y: center.y - overlap,
        };
        if overlap > 0.0 {
            pellets = m.arc.map(|a| on_tongue(center, a));
        }
        let opening = 15.0 + 3.0 * sd * wave(2);
        let ul = Point {
            x: 10.0 + noise(1.0),
            y: 5.0 + noise(1.0),
        };
        let ll = Point {
            x: 8.0 + 0.5 * sd * wave(2) + noise(1.0),
            y: (ul.y - opening).min(ul.y - 0.5),
        };
        let frame = PelletFrame {
            time: t,
            ul,
            ll,
            t1: pellets[0],
            t2: pellets[1],
            t3: pellets[2],
            t4: pellets[3],
        };
        out.push((
            frame,
            PelletTruth {
                speaker: s,
                tongue_center: center,
                apex_angle: APEX_ANGLE,
                arc_mm: m.arc,
            },
        ));
    }
    Ok(out)
}

/// Number of smooth latent signals driving embeddings and targets.
const LATENTS: usize = 4;

struct Mapping {
    /// `[layer][dim][latent]`.
    mix: Vec<f64>,
    /// `[channel][latent]` and per-channel offsets.
    w: Vec<f64>,
    b: Vec<f64>,
}

fn mapping(seed: u64, dim: usize) -> Mapping {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mix = (0..LAYER_COUNT * dim * LATENTS)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let mut w = Vec::with_capacity(9 * LATENTS);
    for _ in 0..9 {
        // Unit-norm rows so every channel moves.
        let row: Vec<f64> = (0..LATENTS)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let norm = row
            .iter()
            .map(|v: &f64| v * v)
            .sum::<f64>()
            .sqrt()
            .max(1e-12);
        w.extend(row.iter().map(|v| 1.2 * v / norm));
    }
    let b = (0..9).map(|_| rng.random_range(-0.3..0.3)).collect();
    Mapping { mix, w, b }
}

/// Smooth latent trajectories at 50 Hz, `T x LATENTS`.
fn latents(seed: u64, frames: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<[f64; 4]> = (0..LATENTS)
        .map(|_| {
            [
                rng.random_range(0.5..3.0),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.5..3.0),
                rng.random_range(0.0..2.0 * PI),
            ]
        })
        .collect();
    let mut z = vec![0.0; frames * LATENTS];
    for t in 0..frames {
        let s = t as f64 / 50.0;
        for (k, p) in params.iter().enumerate() {
            z[t * LATENTS + k] =
                0.7 * (2.0 * PI * p[0] * s + p[1]).sin() + 0.3 * (2.0 * PI * p[2] * s + p[3]).sin();
        }
    }
    z
}

fn pair_from(
    map: &Mapping,
    latent_seed: u64,
    frames: usize,
    dim: usize,
) -> (EmbeddingTensor, TractVariableMatrix) {
    let z = latents(latent_seed, frames);
    let mut rng = ChaCha8Rng::seed_from_u64(latent_seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut data = vec![0.0; LAYER_COUNT * frames * dim];
    for l in 0..LAYER_COUNT {
        for t in 0..frames {
            for d in 0..dim {
                let m = &map.mix[(l * dim + d) * LATENTS..(l * dim + d + 1) * LATENTS];
                let v: f64 = m
                    .iter()
                    .zip(&z[t * LATENTS..(t + 1) * LATENTS])
                    .map(|(a, b)| a * b)
                    .sum();
                data[(l * frames + t) * dim + d] = v + 0.01 * rng.random_range(-1.0..1.0);
            }
        }
    }
    let mut low = vec![0.0; frames * 9];
    for t in 0..frames {
        for c in 0..9 {
            let w = &map.w[c * LATENTS..(c + 1) * LATENTS];
            let v: f64 = w
                .iter()
                .zip(&z[t * LATENTS..(t + 1) * LATENTS])
                .map(|(a, b)| a * b)
                .sum();
            low[t * 9 + c] = (v + map.b[c]).tanh();
        }
    }
    let up = upsample2(&low, frames, 9);
    let len = 2 * frames;
    let mut cm = vec![0.0; 9 * len];
    for s in 0..len {
        for c in 0..9 {
            cm[c * len + s] = up[s * 9 + c];
        }
    }
    let emb =
        EmbeddingTensor::new(LAYER_COUNT, frames, dim, data).expect("generated embedding is valid");
    (emb, TractVariableMatrix::from_channel_major(len, cm))
}

/// One embedding (`n_frames` at 50 Hz) and its 100 Hz target.
pub fn synth_training_pair(spec: &SynthSpec) -> Result<(EmbeddingTensor, TractVariableMatrix)> {
    spec.validate()?;
    let map = mapping(spec.seed, spec.embedding_dim);
    Ok(pair_from(
        &map,
        spec.seed.wrapping_add(1),
        spec.n_frames,
        spec.embedding_dim,
    ))
}

/// `count` utterances sharing one mapping; utterance `i` uses latent seed
/// `seed + 1 + i`, so the first equals [`synth_training_pair`].
pub fn synth_training_set(spec: &SynthSpec, count: usize) -> Result<Vec<Sample>> {
    spec.validate()?;
    let map = mapping(spec.seed, spec.embedding_dim);
    Ok((0..count)
        .map(|i| {
            let (e, t) = pair_from(
                &map,
                spec.seed.wrapping_add(1 + i as u64),
                spec.n_frames,
                spec.embedding_dim,
            );
            Sample::new(e, t).expect("lengths match by construction")
        })
        .collect())
}

/// Labeled phone corpus with a known generating model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub seed: u64,
    pub targets: Vec<Target>,
    pub speakers: usize,
    /// Files per speaker for each phone level.
    pub files_per_level: usize,
    /// Control minus correct on each hypothesis channel, in the expected
    /// direction.
    pub delta: f64,
    pub sd_speaker: f64,
    pub sd_utterance: f64,
    pub sd_resid: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            targets: vec![Target::R, Target::S],
            speakers: 20,
            files_per_level: 4,
            delta: 0.3,
            sd_speaker: 0.1,
            sd_utterance: 0.05,
            sd_resid: 0.02,
        }
    }
}

fn base_means(target: Target) -> [f64; 6] {
    match target {
        Target::R => [0.10, -0.20, 0.30, 0.40, -0.10, 0.20],
        Target::S => [0.05, -0.10, 0.45, 0.50, 0.15, 0.10],
    }
}

/// Error displacement as a fraction of the control displacement: 0.25 at
/// a mean score of 5 up to 0.75 at 1, so errors sit strictly between the
/// correct target and the control, and further from correct when rated
/// worse.
pub fn error_fraction(score: f64) -> f64 {
    0.25 + 0.5 * (5.0 - score) / 4.0
}

/// Observations for correct, error and control phones of each target.
///
/// Correct rows get a mean score of 5, error rows a three-rater mean in
/// [1, 14/3], controls none. Each file is one utterance; values carry
/// speaker, utterance and residual noise.
pub fn synth_corpus(spec: &CorpusSpec) -> Vec<PhoneObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_sp = Normal::new(0.0, spec.sd_speaker.max(0.0)).expect("sd");
    let n_ut = Normal::new(0.0, spec.sd_utterance.max(0.0)).expect("sd");
    let n_re = Normal::new(0.0, spec.sd_resid.max(0.0)).expect("sd");
    let mut out = Vec::new();
    for s in 0..spec.speakers {
        let speaker = format!("spk{s:03}");
        let b_s = n_sp.sample(&mut rng);
        for &target in &spec.targets {
            let base = base_means(target);
            let hyps = for_target(target);
            let mut levels: Vec<PhoneCategory> = vec![PhoneCategory::Correct(target)];
            for (e, c) in pairs(target) {
                levels.push(PhoneCategory::Error(target, e));
                levels.push(PhoneCategory::Control(c));
            }
            for level in levels {
                for k in 0..spec.files_per_level {
                    let score = match level {
                        PhoneCategory::Correct(_) => Some(5.0),
                        PhoneCategory::Error(..) => Some(rng.random_range(3..=14) as f64 / 3.0),
                        PhoneCategory::Control(_) => None,
                    };
                    let mut tv = base;
                    for h in &hyps {
                        let idx = Channel::ORAL
                            .iter()
                            .position(|c| *c == h.channel)
                            .expect("oral");
                        let shift = spec.delta * h.sign as f64;
                        match level {
                            PhoneCategory::Control(c) if c == h.control => tv[idx] += shift,
                            PhoneCategory::Error(_, e) if e == h.error => {
                                tv[idx] += shift * error_fraction(score.expect("scored"))
                            }
                            _ => {}
                        }
                    }
                    let u = n_ut.sample(&mut rng);
                    for v in tv.iter_mut() {
                        *v += b_s + u + n_re.sample(&mut rng);
                    }
                    let file_id = format!(
                        "{speaker}_{}_{}_{k:02}",
                        target.label(),
                        level.to_string().replace('>', "-")
                    );
                    out.push(PhoneObservation {
                        file_id: file_id.clone(),
                        speaker_id: speaker.clone(),
                        utterance_id: file_id,
                        phone: level,
                        tv,
                        source: None,
                        mean_score: score,
                    });
                }
            }
        }
    }
    out
}
