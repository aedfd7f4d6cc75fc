//! Subcommand implementations. Each reads its inputs from the config,
//! writes only under `cfg.out` and returns the files it wrote, relative to
//! the output directory.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tractvar_core::formats::{
    read_palate, read_pellets, read_tv, write_palate, write_pellets, write_tv,
};
use tractvar_core::inversion::io::{
    load_embedding, load_model, read_manifest, save_embedding, save_model, Split,
};
use tractvar_core::inversion::{evaluate, train, InversionModel, Mode, ModelConfig, Sample};
use tractvar_core::kinematics::{
    compute_frame, denormalize, normalize, orient_articulatory, FlipTable,
};
use tractvar_core::phones::Target;
use tractvar_core::ratings::{
    consensus_by_file, filter_min_count, read_consensus, read_ratings, write_consensus, PoolItem,
    TrainingModule,
};
use tractvar_core::segments::{
    build_observations, parse_alignment, read_observations, write_observations, FileInfo,
};
use tractvar_core::service::{ModuleKey, ServiceConfig, TrainingItem};
use tractvar_core::stats::{
    analyze_categorical_at, analyze_gradient, ellipses, write_coefficients, write_contrasts,
    CategoricalReport, GradientReport,
};
use tractvar_core::synth::{
    generate_palate_trace, generate_pellet_sequence, synth_corpus, synth_training_set,
};
use tractvar_core::{Channel, PhoneObservation, SpeakerRange, TractVariableMatrix};

use crate::config::{exists, require, Format, OrientationChoice, PipelineConfig};
use crate::error::CliError;

/// Files written by one command, relative to the output directory.
#[derive(Debug, Default, Serialize)]
pub struct Outputs(pub Vec<String>);

struct Out<'a> {
    root: &'a Path,
    written: Vec<String>,
}

impl<'a> Out<'a> {
    fn new(cfg: &'a PipelineConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
        Ok(Self {
            root: &cfg.out,
            written: Vec::new(),
        })
    }

    /// Creates `rel` (which must stay inside the output directory) and
    /// hands a buffered writer to `f`.
    fn write<F>(&mut self, rel: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<fs::File>) -> Result<(), String>,
    {
        let rel_path = Path::new(rel);
        if rel_path.is_absolute()
            || rel_path
                .components()
                .any(|c| matches!(c, std::path::Component::ParentDir))
        {
            return Err(CliError::Usage(format!(
                "output name `{rel}` escapes the output directory"
            )));
        }
        let path = self.root.join(rel_path);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).map_err(|msg| CliError::Io {
            path: path.clone(),
            source: std::io::Error::other(msg),
        })?;
        std::io::Write::flush(&mut w).map_err(|e| CliError::io(&path, e))?;
        self.written.push(rel.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        self.write(rel, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| e.to_string())?;
            std::io::Write::write_all(w, b"\n").map_err(|e| e.to_string())
        })
    }

    fn text(&mut self, rel: &str, s: &str) -> Result<(), CliError> {
        self.write(rel, |w| {
            std::io::Write::write_all(w, s.as_bytes()).map_err(|e| e.to_string())
        })
    }

    fn finish(self) -> Outputs {
        Outputs(self.written)
    }
}

fn open(p: &Path) -> Result<fs::File, CliError> {
    fs::File::open(p).map_err(|e| CliError::io(p, e))
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

fn ext(cfg: &PipelineConfig) -> &'static str {
    match cfg.format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

pub fn synth(cfg: &PipelineConfig) -> Result<Outputs, CliError> {
    let mut out = Out::new(cfg)?;
    let mut spec = cfg.synth.spec.clone();
    spec.seed = cfg.synth_seed();

    let frames = generate_pellet_sequence(&spec).map_err(CliError::compute)?;
    out.write("pellets.csv", |w| {
        write_pellets(w, &frames).map_err(|e| e.to_string())
    })?;
    let trace = generate_palate_trace(&spec).map_err(CliError::compute)?;
    out.write("palate.csv", |w| {
        write_palate(w, &trace).map_err(|e| e.to_string())
    })?;

    let mut corpus = cfg.synth.corpus.clone();
    corpus.seed = cfg.corpus_seed();
    let obs = synth_corpus(&corpus);
    out.write("corpus.csv", |w| {
        write_observations(w, &obs).map_err(|e| e.to_string())
    })?;

    let n = cfg.synth.training_pairs;
    if n > 0 {
        let set = synth_training_set(&spec, n).map_err(CliError::compute)?;
        let mut manifest = String::from("embedding,target,speaker_id,split\n");
        for (i, s) in set.iter().enumerate() {
            let emb = format!("training/emb_{i:03}.vtve");
            let path = out.root.join(&emb);
            fs::create_dir_all(path.parent().expect("has parent"))
                .map_err(|e| CliError::io(&path, e))?;
            save_embedding(&path, &s.embedding)
                .map_err(|e| CliError::io(&path, std::io::Error::other(e)))?;
            out.written.push(emb.clone());
            let tv = format!("training/tv_{i:03}.csv");
            out.write(&tv, |w| {
                write_tv(w, &s.target, true).map_err(|e| e.to_string())
            })?;
            // One speaker per utterance; the last two are held out.
            let split = match n.saturating_sub(i) {
                1 if n >= 3 => "test",
                2 if n >= 3 => "val",
                _ => "train",
            };
            writeln!(manifest, "emb_{i:03}.vtve,tv_{i:03}.csv,spk{i:03},{split}")
                .expect("string write");
        }
        out.text("training/manifest.csv", &manifest)?;
    }

    out.json("service.json", &demo_service_config(cfg))?;
    Ok(out.finish())
}

/// Rating-service config with a synthetic pool and random answer keys.
fn demo_service_config(cfg: &PipelineConfig) -> ServiceConfig {
    let seed = cfg.service_seed();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = [
        (Target::R, ["rabbit", "carrot", "door"]),
        (Target::S, ["sun", "messy", "bus"]),
    ];
    let pool = (0..cfg.synth.service_pool)
        .map(|i| {
            let (target, w) = words[i % 2];
            PoolItem {
                file_id: format!("file{i:04}"),
                speaker_id: format!("spk{:02}", i % 12),
                timepoint: if i % 3 == 0 { "post" } else { "pre" }.into(),
                target,
                target_word: w[i % 3].into(),
                audio_ref: format!("a{i:04}.wav"),
            }
        })
        .collect();
    let mut modules = Vec::new();
    for (target, w) in words {
        for module in (1..=4)
            .map(TrainingModule::Initial)
            .chain([TrainingModule::Maintenance])
        {
            let items = (0..module.item_count())
                .map(|i| TrainingItem {
                    audio_ref: format!("train_{target}_{i:02}.wav"),
                    target_word: w[i % 3].into(),
                    expert_score: rng.random_range(1..=5),
                })
                .collect();
            modules.push(ModuleKey {
                target,
                module,
                items,
            });
        }
    }
    ServiceConfig {
        seed,
        batch_size: tractvar_core::ratings::BATCH_SIZE,
        pool,
        modules,
    }
}

/// Builds an oral tract-variable matrix from pellet frames at 100 Hz.
pub fn tv_from_pellets(
    frames: &[tractvar_core::PelletFrame],
    trace: &tractvar_core::PalateTrace,
    orientation: OrientationChoice,
) -> Result<TractVariableMatrix, String> {
    let mut m = TractVariableMatrix::zeros(frames.len());
    for (t, f) in frames.iter().enumerate() {
        if (f.time - TractVariableMatrix::time_of(t)).abs() > 1e-6 {
            return Err(format!(
                "frame {t} at {} s; pellets must be sampled at 100 Hz from 0",
                f.time
            ));
        }
        let raw = compute_frame(f, trace).map_err(|e| format!("frame {t}: {e}"))?;
        let v = match orientation {
            OrientationChoice::Raw => raw,
            OrientationChoice::Articulatory => {
                orient_articulatory(&raw, &FlipTable::default()).map_err(|e| e.to_string())?
            }
        };
        for (c, x) in Channel::ORAL.iter().zip(v.values()) {
            m.set(*c, t, x);
        }
    }
    Ok(m)
}

pub fn tv_compute(cfg: &PipelineConfig) -> Result<Outputs, CliError> {
    let pellets = require(&cfg.paths.pellets, "pellets")?;
    let palate = require(&cfg.paths.palate, "palate")?;
    let frames = read_pellets(open(pellets)?).map_err(|e| CliError::input(pellets, e))?;
    let trace = read_palate(open(palate)?).map_err(|e| CliError::input(palate, e))?;
    let m = tv_from_pellets(&frames, &trace, cfg.orientation)
        .map_err(|e| CliError::input(pellets, e))?;
    let mut out = Out::new(cfg)?;
    out.write("tv.csv", |w| {
        write_tv(w, &m, false).map_err(|e| e.to_string())
    })?;
    Ok(out.finish())
}

pub fn normalize_cmd(cfg: &PipelineConfig) -> Result<Outputs, CliError> {
    if cfg.paths.tv.is_empty() {
        return Err(CliError::Config(
            "paths.tv must list at least one tract-variable CSV".into(),
        ));
    }
    let mut inputs = Vec::new();
    let mut all_source = true;
    for p in &cfg.paths.tv {
        exists(p)?;
        let (m, src) = read_tv(open(p)?).map_err(|e| CliError::input(p, e))?;
        all_source &= src;
        inputs.push((p, m));
    }
    let channels: Vec<Channel> = if all_source {
        Channel::ALL.to_vec()
    } else {
        Channel::ORAL.to_vec()
    };
    let range = match &cfg.paths.range {
        Some(p) => {
            exists(p)?;
            serde_json::from_reader(open(p)?).map_err(|e| CliError::input(p, e))?
        }
        None => SpeakerRange::fit(
            inputs
                .iter()
                .flat_map(|(_, m)| channels.iter().map(move |&c| (c, m.channel(c)))),
        )
        .map_err(CliError::compute)?,
    };
    let mut out = Out::new(cfg)?;
    out.json("range.json", &range)?;
    for (p, m) in &inputs {
        let mut n = (*m).clone();
        for &c in &channels {
            let r = range.get(c).map_err(CliError::compute)?;
            n.channel_mut(c)
                .iter_mut()
                .for_each(|v| *v = normalize(*v, r));
        }
        debug_assert!(channels.iter().all(|&c| {
            let r = range.get(c).expect("fitted");
            r.max == r.min
                || m.channel(c)
                    .iter()
                    .zip(n.channel(c))
                    .all(|(a, b)| (denormalize(*b, r) - a).abs() < 1e-9)
        }));
        out.write(&format!("normalized/{}.csv", stem(p)), |w| {
            write_tv(w, &n, all_source).map_err(|e| e.to_string())
        })?;
    }
    Ok(out.finish())
}

fn load_split(cfg: &PipelineConfig) -> Result<HashMap<Split, Vec<Sample>>, CliError> {
    let manifest = require(&cfg.paths.manifest, "manifest")?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let entries = read_manifest(open(manifest)?, base).map_err(|e| CliError::input(manifest, e))?;
    let mut sets: HashMap<Split, Vec<Sample>> = HashMap::new();
    for e in entries {
        exists(&e.embedding)?;
        exists(&e.target)?;
        let emb = load_embedding(&e.embedding).map_err(|x| CliError::input(&e.embedding, x))?;
        let (tv, _) = read_tv(open(&e.target)?).map_err(|x| CliError::input(&e.target, x))?;
        let s = Sample::new(emb, tv).map_err(|x| CliError::input(&e.target, x))?;
        sets.entry(e.split).or_default().push(s);
    }
    Ok(sets)
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    split: &'a str,
    report: &'a tractvar_core::inversion::EvalReport,
}

fn write_eval(
    out: &mut Out<'_>,
    cfg: &PipelineConfig,
    split: &str,
    report: &tractvar_core::inversion::EvalReport,
) -> Result<(), CliError> {
    out.text(&format!("eval_{split}.txt"), &report.to_table())?;
    match cfg.format {
        Format::Json => out.json(
            &format!("eval_{split}.json"),
            &EvalSummary { split, report },
        ),
        Format::Csv => {
            let mut s = String::from("channel,r,rmse\n");
            for c in &report.channels {
                writeln!(s, "{},{:?},{:?}", c.channel.name(), c.r, c.rmse).expect("string write");
            }
            out.text(&format!("eval_{split}.csv"), &s)
        }
    }
}

pub fn train_cmd(cfg: &PipelineConfig) -> Result<Outputs, CliError> {
    let mut sets = load_split(cfg)?;
    let train_set = sets.remove(&Split::Train).unwrap_or_default();
    let val_set = sets.remove(&Split::Val).unwrap_or_default();
    let first = train_set
        .first()
        .ok_or_else(|| CliError::Config("manifest has no train entries".into()))?;
    let mcfg = cfg
        .model
        .clone()
        .unwrap_or_else(|| ModelConfig::full(first.embedding.dim()));
    let mut tcfg = cfg.train.clone();
    tcfg.seed = cfg.train_seed();
    let model = InversionModel::new(mcfg, tcfg.seed).map_err(CliError::compute)?;
    let outcome = train(model, &train_set, &val_set, &tcfg).map_err(CliError::compute)?;

    let mut out = Out::new(cfg)?;
    let model_path = out.root.join("model.vtvm");
    save_model(&model_path, &outcome.model)
        .map_err(|e| CliError::io(&model_path, std::io::Error::other(e)))?;
    out.written.push("model.vtvm".into());
    let mut hist = String::from("epoch,train_loss,val_loss,learning_rate\n");
    for h in &outcome.history {
        writeln!(
            hist,
            "{},{:?},{:?},{:?}",
            h.epoch, h.train_loss, h.val_loss, h.learning_rate
        )
        .expect("string write");
    }
    out.text("history.csv", &hist)?;
    out.json(
        "train_summary.json",
        &serde_json::json!({
            "best_epoch": outcome.best_epoch,
            "stopped_epoch": outcome.stopped_epoch,
            "train_utterances": train_set.len(),
            "val_utterances": val_set.len(),
            "seed": tcfg.seed,
        }),
    )?;
    if let Some(test) = sets.get(&Split::Test).filter(|t| !t.is_empty()) {
        let r = evaluate(&outcome.model, test).map_err(CliError::compute)?;
        write_eval(&mut out, cfg, "test", &r)?;
    }
    Ok(out.finish())
}

pub fn infer(cfg: &PipelineConfig) -> Result<Outputs, CliError> {
    let model_path = require(&cfg.paths.model, "model")?;
    let model = load_model(model_path).map_err(|e| CliError::input(model_path, e))?;
    if cfg.paths.embeddings.is_empty() && cfg.paths.manifest.is_none() {
        return Err(CliError::Config(
            "paths.embeddings or paths.manifest is required".into(),
        ));
    }
    let mut out = Out::new(cfg)?;
    for p in &cfg.paths.embeddings {
        exists(p)?;
        let emb = load_embedding(p).map_err(|e| CliError::input(p, e))?;
        let m = model
            .forward(&emb, Mode::Eval)
            .map_err(|e| CliError::input(p, e))?;
        out.write(&format!("inferred/{}.csv", stem(p)), |w| {
            write_tv(w, &m, true).map_err(|e| e.to_string())
        })?;
    }
    if cfg.paths.manifest.is_some() {
        let sets = load_split(cfg)?;
        for (split, name) in [(Split::Val, "val"), (Split::Test, "test")] {
            if let Some(set) = sets.get(&split).filter(|s| !s.is_empty()) {
                let r = evaluate(&model, set).map_err(CliError::compute)?;
                write_eval(&mut out, cfg, name, &r)?;
            }
        }
    }
    Ok(out.finish())
}

#[derive(Deserialize)]
struct FileRow {
    file_id: String,
    speaker_id: String,
    utterance_id: String,
}

pub fn extract(cfg: &PipelineConfig) -> Result<Outputs, CliError> {
    let align = require(&cfg.paths.alignment, "alignment")?;
    let tv_dir = require(&cfg.paths.tv_dir, "tv_dir")?;
    let files_path = require(&cfg.paths.files, "files")?;
    let cons_path = require(&cfg.paths.consensus, "consensus")?;
    let intervals = parse_alignment(open(align)?).map_err(|e| CliError::input(align, e))?;

    let mut files = HashMap::new();
    let mut rdr = csv::Reader::from_reader(open(files_path)?);
    for row in rdr.deserialize::<FileRow>() {
        let r = row.map_err(|e| CliError::input(files_path, e))?;
        files.insert(
            r.file_id,
            FileInfo {
                speaker_id: r.speaker_id,
                utterance_id: r.utterance_id,
            },
        );
    }
    let consensus: HashMap<_, _> = read_consensus(open(cons_path)?)
        .map_err(|e| CliError::input(cons_path, e))?
        .into_iter()
        .map(|l| (l.file_id.clone(), l))
        .collect();

    let mut ids: Vec<&str> = intervals.iter().map(|i| i.file_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut matrices = HashMap::new();
    for id in ids {
        let p = tv_dir.join(format!("{id}.csv"));
        exists(&p)?;
        let (m, _) = read_tv(open(&p)?).map_err(|e| CliError::input(&p, e))?;
        matrices.insert(id.to_string(), m);
    }
    let mut obs =
        build_observations(&intervals, &matrices, &files, &consensus).map_err(CliError::compute)?;
    obs.sort_by(|a, b| {
        a.file_id
            .cmp(&b.file_id)
            .then_with(|| a.phone.cmp(&b.phone))
    });
    let mut out = Out::new(cfg)?;
    out.write("observations.csv", |w| {
        write_observations(w, &obs).map_err(|e| e.to_string())
    })?;
    Ok(out.finish())
}

#[derive(Serialize)]
struct GroupCount {
    subtype: String,
    count: usize,
    dropped: bool,
}

pub fn consensus_cmd(cfg: &PipelineConfig) -> Result<Outputs, CliError> {
    let path = require(&cfg.paths.ratings, "ratings")?;
    let records = read_ratings(open(path)?).map_err(|e| CliError::input(path, e))?;
    let labels: Vec<_> = consensus_by_file(&records, cfg.thresholds.majority)
        .into_values()
        .collect();
    let report = filter_min_count(&labels, cfg.thresholds.min_count);
    let counts: Vec<GroupCount> = report
        .counts
        .iter()
        .map(|(st, &count)| GroupCount {
            subtype: st.label().into(),
            count,
            dropped: report.dropped.contains(st),
        })
        .collect();
    let mut out = Out::new(cfg)?;
    match cfg.format {
        Format::Csv => {
            out.write("consensus.csv", |w| {
                write_consensus(w, &report.retained).map_err(|e| e.to_string())
            })?;
            let mut s = String::from("subtype,count,dropped\n");
            for c in &counts {
                writeln!(s, "{},{},{}", c.subtype, c.count, c.dropped).expect("string write");
            }
            out.text("group_counts.csv", &s)?;
        }
        Format::Json => {
            out.json("consensus.json", &report.retained)?;
            out.json("group_counts.json", &counts)?;
        }
    }
    Ok(out.finish())
}

fn load_observations(cfg: &PipelineConfig) -> Result<Vec<PhoneObservation>, CliError> {
    let p = require(&cfg.paths.observations, "observations")?;
    read_observations(open(p)?).map_err(|e| CliError::input(p, e))
}

fn categorical(
    out: &mut Out<'_>,
    cfg: &PipelineConfig,
    obs: &[PhoneObservation],
    target: Target,
) -> Result<CategoricalReport, CliError> {
    let rep =
        analyze_categorical_at(obs, target, cfg.thresholds.alpha).map_err(CliError::compute)?;
    let name = format!("contrasts_{target}.{}", ext(cfg));
    match cfg.format {
        Format::Csv => out.write(&name, |w| {
            write_contrasts(w, &rep.contrasts).map_err(|e| e.to_string())
        })?,
        Format::Json => out.json(&name, &rep.contrasts)?,
    }
    let mut s =
        String::from("phone,articulator,center_location,center_degree,major,minor,angle,n\n");
    for e in ellipses(obs, target) {
        let el = &e.ellipse;
        writeln!(
            s,
            "{},{},{:?},{:?},{:?},{:?},{:?},{}",
            e.phone,
            e.articulator.label(),
            el.center[0],
            el.center[1],
            el.axes[0],
            el.axes[1],
            el.angle,
            el.n
        )
        .expect("string write");
    }
    out.text(&format!("ellipses_{target}.csv"), &s)?;
    Ok(rep)
}

pub fn analyze_categorical_cmd(cfg: &PipelineConfig) -> Result<Outputs, CliError> {
    let obs = load_observations(cfg)?;
    let mut out = Out::new(cfg)?;
    categorical(&mut out, cfg, &obs, cfg.target)?;
    Ok(out.finish())
}

fn gradient(
    out: &mut Out<'_>,
    cfg: &PipelineConfig,
    obs: &[PhoneObservation],
) -> Result<GradientReport, CliError> {
    let rep = analyze_gradient(obs).map_err(CliError::compute)?;
    let name = format!("coefficients.{}", ext(cfg));
    match cfg.format {
        Format::Csv => out.write(&name, |w| {
            write_coefficients(w, &rep.coefficients).map_err(|e| e.to_string())
        })?,
        Format::Json => out.json(&name, &rep.coefficients)?,
    }
    let mut s = String::from("file_id,phone,articulator,score,msd\n");
    for (f, phone, a, score, msd) in &rep.rows {
        writeln!(s, "{f},{phone},{},{score:?},{msd:?}", a.label()).expect("string write");
    }
    out.text("msd_rows.csv", &s)?;
    Ok(rep)
}

pub fn analyze_gradient_cmd(cfg: &PipelineConfig) -> Result<Outputs, CliError> {
    let obs = load_observations(cfg)?;
    let mut out = Out::new(cfg)?;
    gradient(&mut out, cfg, &obs)?;
    Ok(out.finish())
}

fn fmt_p(p: f64) -> String {
    if p < 1e-4 {
        "<.0001".into()
    } else {
        format!("{p:.4}")
    }
}

/// Runs both analyses on every target present and writes the tables plus
/// a markdown summary.
pub fn report(cfg: &PipelineConfig) -> Result<Outputs, CliError> {
    let obs = load_observations(cfg)?;
    let mut out = Out::new(cfg)?;
    let mut md = String::from("# Articulatory analysis report\n\n");
    let mut targets: Vec<Target> = obs.iter().map(|o| o.phone.target()).collect();
    targets.sort();
    targets.dedup();
    for t in targets {
        let rep = categorical(&mut out, cfg, &obs, t)?;
        let f = &rep.fit;
        writeln!(md, "## /{t}/ categorical contrasts\n").expect("string write");
        writeln!(
            md,
            "{} rows, {} speakers, {} utterances; variance components speaker {:.3e}, utterance {:.3e}, residual {:.3e}.\n",
            f.n, f.n_speakers, f.n_utterances, f.sigma2_speaker, f.sigma2_utterance, f.sigma2_resid
        )
        .expect("string write");
        md.push_str(
            "| Hypothesis | Contrast | Δμ̂ | SE | z ratio | p_adj | Expected | Supported |\n",
        );
        md.push_str("|---|---|---:|---:|---:|---:|:-:|:-:|\n");
        for c in &rep.contrasts {
            writeln!(
                md,
                "| {} | {} | {:.3} | {:.3} | {:.2} | {} | {} | {} |",
                c.hypothesis,
                c.phone,
                c.delta_mu,
                c.se,
                c.z,
                fmt_p(c.p_adj),
                if c.expected_sign > 0 { "+" } else { "-" },
                if c.supported { "yes" } else { "no" }
            )
            .expect("string write");
        }
        writeln!(
            md,
            "\n{} of {} contrasts supported.\n",
            rep.supported(),
            rep.contrasts.len()
        )
        .expect("string write");
    }
    match gradient(&mut out, cfg, &obs) {
        Ok(g) => {
            md.push_str("## Mean squared difference by rating score\n\n");
            md.push_str("| Term | β | SE | t | p |\n|---|---:|---:|---:|---:|\n");
            for c in &g.coefficients {
                writeln!(
                    md,
                    "| {} | {:.4} | {:.4} | {:.2} | {} |",
                    c.term,
                    c.beta,
                    c.se,
                    c.t,
                    fmt_p(c.p)
                )
                .expect("string write");
            }
        }
        Err(e) => writeln!(md, "Gradient model not fitted: {e}").expect("string write"),
    }
    out.text("report.md", &md)?;
    Ok(out.finish())
}
