//! Every primary acceptance criterion at its pinned tolerance, one
//! PASS/FAIL line each. Criteria run sequentially inside a single test so
//! the wall-clock limits are measured without contention.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tractvar_core::inversion::gradcheck::gradient_check;
use tractvar_core::inversion::{evaluate, loss, train, InversionModel, ModelConfig, TrainConfig};
use tractvar_core::kinematics::{
    denormalize, normalize, tongue_body_tvs, tongue_tip_tvs, ChannelRange,
};
use tractvar_core::stats::{
    analyze_categorical, analyze_gradient, write_coefficients, write_contrasts, COEFFICIENT_HEADER,
    CONTRAST_HEADER,
};
use tractvar_core::synth::{synth_corpus, synth_training_set, CorpusSpec, SynthSpec};
use tractvar_core::{Channel, Target};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, t0: Instant) -> Result<(), String> {
    ensure(t0.elapsed() < limit, || {
        format!("took {:.1?}, limit {limit:?}", t0.elapsed())
    })
}

fn geometry() -> Check {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = [0.0f64; 4];
    for case in 0..1000 {
        let pts = random_trace(&mut rng);
        let trace = to_trace(&pts);
        let frame = random_frame(&mut rng, &pts);
        let (tbcd, tbcl) = tongue_body_tvs(&frame, &trace).map_err(|e| e.to_string())?;
        let (ttcd, ttcl) = tongue_tip_tvs(&frame, &trace).map_err(|e| e.to_string())?;
        let (od, ol) = oracle_tongue_body(&frame, &pts);
        let (otd, otl) = oracle_tongue_tip(&frame, &pts);
        let errs = [
            (tbcd - od).abs(),
            (tbcl - ol).abs(),
            (ttcd - otd).abs(),
            (ttcl - otl).abs(),
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
        ensure(errs.iter().all(|e| *e <= 1e-3), || {
            format!("pair {case}: errors {errs:?}")
        })?;
    }
    within(Duration::from_secs(30), t0)?;
    Ok(format!(
        "1000 pairs, max error TBCD {:.1e} TBCL {:.1e} TTCD {:.1e} TTCL {:.1e} mm, {:.1?}",
        worst[0],
        worst[1],
        worst[2],
        worst[3],
        t0.elapsed()
    ))
}

fn normalization() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let a = rng.random_range(-100.0..100.0);
        let b = a + rng.random_range(1e-3..80.0);
        let r = ChannelRange {
            channel: Channel::Ttcd,
            min: a,
            max: b,
        };
        ensure(normalize(a, r) == -1.0 && normalize(b, r) == 1.0, || {
            format!("endpoints of [{a}, {b}]")
        })?;
        let v = rng.random_range(a - 10.0..b + 10.0);
        worst = worst.max((denormalize(normalize(v, r), r) - v).abs());
    }
    ensure(worst <= 1e-12, || format!("round trip error {worst:e}"))?;
    let flat = ChannelRange {
        channel: Channel::La,
        min: 3.5,
        max: 3.5,
    };
    ensure(
        normalize(3.5, flat) == 0.0 && normalize(9.0, flat) == 0.0,
        || "degenerate range".into(),
    )?;
    Ok(format!(
        "endpoints exact, round trip max error {worst:.1e}, degenerate range -> 0"
    ))
}

fn loss_examples() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let len = 40;
    let truth: Vec<f64> = (0..9 * len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let pred: Vec<f64> = truth
        .iter()
        .map(|v| 0.6 * v + rng.random_range(-0.3..0.3))
        .collect();
    let l = |p: &[f64], t: &[f64], a| loss(p, t, 9, a).map_err(|e| e.to_string());
    let zero = l(&truth, &truth, 0.8)?.loss;
    ensure(zero.abs() <= 1e-12, || {
        format!("perfect prediction gives {zero}")
    })?;
    let a0 = l(&pred, &truth, 0.0)?;
    let a1 = l(&pred, &truth, 1.0)?;
    // Independent per-channel r and RMSE.
    let (mut rs, mut es) = (0.0, 0.0);
    for c in 0..9 {
        let (p, t) = (
            &pred[c * len..(c + 1) * len],
            &truth[c * len..(c + 1) * len],
        );
        let mp = p.iter().sum::<f64>() / len as f64;
        let mt = t.iter().sum::<f64>() / len as f64;
        let sab: f64 = p.iter().zip(t).map(|(x, y)| (x - mp) * (y - mt)).sum();
        let saa: f64 = p.iter().map(|x| (x - mp).powi(2)).sum();
        let sbb: f64 = t.iter().map(|y| (y - mt).powi(2)).sum();
        rs += sab / (saa * sbb).sqrt() / 9.0;
        es +=
            (p.iter().zip(t).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / len as f64).sqrt() / 9.0;
    }
    ensure((a0.loss - es).abs() <= 1e-12, || {
        format!("alpha 0: {} vs RMSE {es}", a0.loss)
    })?;
    ensure((a1.loss - (1.0 - rs)).abs() <= 1e-12, || {
        format!("alpha 1: {} vs 1 - r {}", a1.loss, 1.0 - rs)
    })?;
    // r = 0 and RMSE = 1 in every channel.
    let h = 0.5f64.sqrt();
    let p: Vec<f64> = (0..9).flat_map(|_| [h, h, -h, -h]).collect();
    let t: Vec<f64> = (0..9).flat_map(|_| [h, -h, h, -h]).collect();
    let ex = l(&p, &t, 0.8)?;
    ensure(
        ex.mean_r.abs() <= 1e-12 && (ex.mean_rmse - 1.0).abs() <= 1e-12,
        || format!("example parts {ex:?}"),
    )?;
    ensure((ex.loss - 1.0).abs() <= 1e-12, || {
        format!("worked example gives {}", ex.loss)
    })?;
    Ok(format!(
        "perfect -> {zero:e}, alpha limits exact to 1e-12, worked example -> {}",
        ex.loss
    ))
}

fn gradients() -> Check {
    let t0 = Instant::now();
    let spec = SynthSpec {
        seed: 4,
        n_frames: 12,
        embedding_dim: 4,
        ..SynthSpec::default()
    };
    let set = synth_training_set(&spec, 2).map_err(|e| e.to_string())?;
    let cfg = ModelConfig {
        dropout: 0.0,
        ..ModelConfig::tiny(4)
    };
    let model = InversionModel::new(cfg, 5).map_err(|e| e.to_string())?;
    let batch: Vec<_> = set.iter().collect();
    let rep = gradient_check(&model, &batch, 0.8, 1e-5, 300, 6).map_err(|e| e.to_string())?;
    ensure(rep.checked >= 200, || {
        format!("only {} parameters checked", rep.checked)
    })?;
    ensure(rep.max_rel_error <= 1e-4, || format!("{rep:?}"))?;
    within(Duration::from_secs(60), t0)?;
    Ok(format!(
        "{} parameters, max relative error {:.2e}, {:.1?}",
        rep.checked,
        rep.max_rel_error,
        t0.elapsed()
    ))
}

fn overfit() -> Check {
    let t0 = Instant::now();
    let spec = SynthSpec {
        seed: 5,
        n_frames: 50,
        embedding_dim: 16,
        ..SynthSpec::default()
    };
    let set = synth_training_set(&spec, 8).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        max_epochs: 500,
        seed: 1,
        ..TrainConfig::default()
    };
    let run = || -> Result<_, String> {
        let model = InversionModel::new(ModelConfig::full(16), 1).map_err(|e| e.to_string())?;
        train(model, &set, &set, &cfg).map_err(|e| e.to_string())
    };
    let out = run()?;
    let rep = evaluate(&out.model, &set).map_err(|e| e.to_string())?;
    let min = rep
        .channels
        .iter()
        .map(|c| c.r)
        .fold(f64::INFINITY, f64::min);
    ensure(min >= 0.95, || {
        format!("lowest channel r {min:.4}: {:?}", rep.channels)
    })?;
    let first = t0.elapsed();
    let again = run()?;
    ensure(
        again.model.params == out.model.params && again.history == out.history,
        || "rerun differs".into(),
    )?;
    within(Duration::from_secs(600), t0)?;
    Ok(format!(
        "lowest per-channel r {min:.4} after {} epochs (best {}), rerun identical, {:.1?} per run",
        out.stopped_epoch, out.best_epoch, first
    ))
}

fn lmm() -> Check {
    let rec = lmm_recovery(100, 1000);
    let worst = rec.coverage.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(worst >= 0.95, || format!("coverage {:?}", rec.coverage))?;
    ensure(rec.median_rel_err.iter().all(|e| *e <= 0.2), || {
        format!("median relative error {:?}", rec.median_rel_err)
    })?;
    let ols = (0..5).map(zero_variance_vs_ols).fold(0.0, f64::max);
    ensure(ols <= 1e-6, || {
        format!("zero-variance fit differs from OLS by {ols:e}")
    })?;
    Ok(format!(
        "{} replicates, lowest per-coefficient 3 SE coverage {worst:.2}, median relative variance error {:.3}/{:.3}/{:.3}, OLS gap {ols:.1e}",
        rec.replicates, rec.median_rel_err[0], rec.median_rel_err[1], rec.median_rel_err[2]
    ))
}

fn emm() -> Check {
    let mut worst = [0.0f64; 4];
    for (seed, sd) in [
        (1, (0.1, 0.05, 0.02)),
        (2, (0.0, 0.0, 0.05)),
        (3, (0.2, 0.1, 0.05)),
    ] {
        let w = emm_oracle(seed, sd)?;
        for k in 0..4 {
            worst[k] = worst[k].max(w[k]);
        }
    }
    ensure(worst[0] <= 1e-8, || {
        format!("marginal means off by {:e}", worst[0])
    })?;
    ensure(
        worst[1] <= 1e-8 && worst[2] <= 1e-8 && worst[3] <= 1e-8,
        || format!("contrast table {worst:?}"),
    )?;
    Ok(format!(
        "means {:.1e}, delta {:.1e}, relative SE {:.1e}, p {:.1e}",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

fn bh() -> Check {
    let (ok, bad) = bh_random(10_000, 42);
    ensure(bad.is_none(), || bad.clone().unwrap_or_default())?;
    Ok(format!("{ok} vectors identical"))
}

fn consensus() -> Check {
    let (n, bad) = consensus_exhaustive(4);
    ensure(bad.is_none(), || bad.clone().unwrap_or_default())?;
    Ok(format!("{n} rating multisets identical"))
}

fn sign_pattern() -> Check {
    let obs = synth_corpus(&CorpusSpec::default());
    let mut parts = Vec::new();
    for t in [Target::R, Target::S] {
        let rep = analyze_categorical(&obs, t).map_err(|e| e.to_string())?;
        let bad: Vec<String> = rep
            .contrasts
            .iter()
            .filter(|c| {
                !(c.supported && c.p_adj < 0.05 && c.delta_mu.signum() as i8 == c.expected_sign)
            })
            .map(|c| format!("{} {}", c.hypothesis, c.phone))
            .collect();
        ensure(bad.is_empty() && !rep.contrasts.is_empty(), || {
            format!("{t}: unsupported {bad:?}")
        })?;
        parts.push(format!(
            "{} {}/{}",
            t.label(),
            rep.supported(),
            rep.contrasts.len()
        ));
    }
    let g = analyze_gradient(&obs).map_err(|e| e.to_string())?;
    let s = g.coefficient("score").ok_or("no score coefficient")?;
    ensure(s.beta < 0.0 && s.p < 0.05, || {
        format!("score beta {} p {}", s.beta, s.p)
    })?;
    Ok(format!(
        "contrasts supported {}; score beta {:.4} (t {:.2})",
        parts.join(", "),
        s.beta,
        s.t
    ))
}

fn report() -> Check {
    let render = || -> Result<(Vec<u8>, Vec<u8>), String> {
        let obs = synth_corpus(&CorpusSpec::default());
        let mut c = Vec::new();
        for t in [Target::R, Target::S] {
            let rep = analyze_categorical(&obs, t).map_err(|e| e.to_string())?;
            write_contrasts(&mut c, &rep.contrasts).map_err(|e| e.to_string())?;
        }
        let mut g = Vec::new();
        write_coefficients(
            &mut g,
            &analyze_gradient(&obs)
                .map_err(|e| e.to_string())?
                .coefficients,
        )
        .map_err(|e| e.to_string())?;
        Ok((c, g))
    };
    let (c1, g1) = render()?;
    let (c2, g2) = render()?;
    ensure(c1 == c2 && g1 == g2, || {
        "outputs differ between runs".into()
    })?;
    let ctext = String::from_utf8(c1).map_err(|e| e.to_string())?;
    let gtext = String::from_utf8(g1).map_err(|e| e.to_string())?;
    let header = |s: &str| s.lines().next().unwrap_or("").to_string();
    ensure(header(&ctext) == CONTRAST_HEADER, || {
        format!("contrast header {}", header(&ctext))
    })?;
    ensure(header(&gtext) == COEFFICIENT_HEADER, || {
        format!("coefficient header {}", header(&gtext))
    })?;
    for (text, cols) in [(&ctext, 10), (&gtext, 5)] {
        ensure(
            text.lines()
                .all(|l| l.split(',').count() == cols || l == CONTRAST_HEADER),
            || "ragged rows".into(),
        )?;
    }
    Ok(format!(
        "headers `{CONTRAST_HEADER}` and `{COEFFICIENT_HEADER}`, byte-identical across runs"
    ))
}

#[test]
fn primary_criteria() {
    type Criterion = (&'static str, fn() -> Check);
    let criteria: [Criterion; 11] = [
        ("geometry oracle", geometry),
        ("normalization", normalization),
        ("composite loss", loss_examples),
        ("gradient check", gradients),
        ("overfit", overfit),
        ("mixed-model recovery", lmm),
        ("marginal means and contrasts", emm),
        ("Benjamini-Hochberg", bh),
        ("consensus", consensus),
        ("sign pattern", sign_pattern),
        ("report fidelity", report),
    ];
    // Written to the raw stderr handle so the lines show up even when the
    // harness captures output.
    let mut err = std::io::stderr();
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let t0 = Instant::now();
        let line = match f() {
            Ok(detail) => format!("PASS {name}: {detail} [{:.1?}]", t0.elapsed()),
            Err(why) => {
                failed.push(name);
                format!("FAIL {name}: {why} [{:.1?}]", t0.elapsed())
            }
        };
        writeln!(err, "{line}").expect("stderr");
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
