//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use strokecast::classifier::Channel;
use strokecast::experiment::{self, DataSource, ExperimentConfig, TrialOutcome, ALL_LABEL};
use strokecast::model::{self, codebook_from_text, codebook_to_text, ModelConfig, ModelError};
use strokecast::som::{self, GridSpec, PrototypeSet, SomConfig, TrainingMode, TrainingSchedule};
use strokecast::stats::{binomial_sf, min_significant_rate};
use strokecast::stroke::{normalize, resample_channel, segment, FeatureStore, StrokeKind};
use strokecast::svc::{parse_svc, write_svc, Gender, PenSample, WordRecording};
use strokecast::synth::{generate_dataset, SynthConfig};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn exact_sf(n: u64, k: u64) -> f64 {
    let mut row = vec![BigUint::one()];
    for _ in 0..n {
        let mut next = vec![BigUint::one(); row.len() + 1];
        for i in 1..row.len() {
            next[i] = &row[i - 1] + &row[i];
        }
        row = next;
    }
    let num = row[k as usize..].iter().fold(BigUint::zero(), |a, b| a + b);
    let shift = 200u32;
    let scaled = (num << shift) / (BigUint::one() << n);
    scaled.to_f64().unwrap() / 2f64.powi(shift as i32)
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let (k, rate) = min_significant_rate(242, 1e-2).ok_or("no significant rate")?;
    check(k == 140, format!("k_min = {k}"))?;
    check((rate - 140.0 / 242.0).abs() < 1e-15, format!("rate = {rate}"))?;
    check(format!("{:.2}", 100.0 * rate) == "57.85", format!("rate = {rate}"))?;
    let (at, below) = (exact_sf(242, 140), exact_sf(242, 139));
    check(at < 1e-2 && below >= 1e-2, format!("oracle tails {at:e}, {below:e}"))?;
    for kk in [139, 140, 145, 165] {
        let (ours, oracle) = (binomial_sf(242, kk).unwrap(), exact_sf(242, kk));
        check(((ours - oracle) / oracle).abs() < 1e-10, format!("sf(242,{kk}) {ours:e} vs {oracle:e}"))?;
    }
    let elapsed = t.elapsed();
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("k_min = 140, rate = {:.2}%, oracle agrees, {elapsed:.2?}", 100.0 * rate))
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let k68 = (0.680f64 * 242.0).round() as u64;
    let k60 = (0.601f64 * 242.0).round() as u64;
    let p68 = binomial_sf(242, k68).unwrap();
    let p60 = binomial_sf(242, k60).unwrap();
    let within = |p: f64, target: f64| p >= target / 2.0 && p <= target * 2.0;
    check(within(p68, 8e-9), format!("sf(242,{k68}) = {p68:e}"))?;
    check(within(p60, 8e-4), format!("sf(242,{k60}) = {p60:e}"))?;
    let elapsed = t.elapsed();
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("sf(242,{k68}) = {p68:.3e}, sf(242,{k60}) = {p60:.3e}"))
}

fn small_som() -> ModelConfig {
    ModelConfig {
        som: SomConfig {
            target_units: 40,
            rough_epochs: 10,
            fine_epochs: 30,
            ..SomConfig::default()
        },
        ..ModelConfig::default()
    }
}

fn synth_experiment(separation: f64, words: &[&str], synth_seed: u64, seed: u64) -> ExperimentConfig {
    let mut synth = SynthConfig {
        separation,
        seed: synth_seed,
        ..SynthConfig::default()
    };
    if !words.is_empty() {
        synth = synth.with_words(words);
    }
    ExperimentConfig {
        data: DataSource::Synth(synth),
        trials: 1,
        model: small_som(),
        seed,
        ..ExperimentConfig::default()
    }
}

/// Central 99% band of Binomial(n, 1/2) in counts.
fn central_band(n: u64) -> (u64, u64) {
    let hi = (0..=n).find(|&h| binomial_sf(n, h + 1).unwrap() <= 0.005).unwrap();
    (n - hi, hi)
}

fn decomposition_holds(t: &TrialOutcome) -> bool {
    let pairs = t
        .per_word
        .iter()
        .filter(|((c, _), _)| *c == Channel::Combined)
        .map(|((_, w), r)| {
            let down = &t.per_word[&(Channel::DownOnly, w.clone())];
            let up = &t.per_word[&(Channel::UpOnly, w.clone())];
            (r, down, up)
        })
        .chain(std::iter::once((
            &t.fused[&Channel::Combined],
            &t.fused[&Channel::DownOnly],
            &t.fused[&Channel::UpOnly],
        )));
    let mut checked = 0;
    for (comb, down, up) in pairs {
        for ((c, d), u) in comb.iter().zip(down).zip(up) {
            if c.writer != d.writer || c.writer != u.writer {
                return false;
            }
            if c.male_score != d.male_score + u.male_score || c.female_score != d.female_score + u.female_score {
                return false;
            }
            checked += 1;
        }
    }
    checked > 0
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let null_words = ["DESPRENDER", "ZAFARRANCHO"];
    let n = 242u64;
    let (lo, hi) = central_band(n);
    let mut inside = 0;
    let mut non_significant = 0;
    let mut decomposed = true;
    let mut rates = Vec::new();
    for run in 0..20u64 {
        let cfg = synth_experiment(0.0, &null_words, 1000 + run, 2000 + run);
        let report = experiment::run_experiment(&cfg).map_err(|e| e.to_string())?;
        let trial = &report.trials[0];
        decomposed &= decomposition_holds(trial);
        let fused = &trial.fused[&Channel::Combined];
        check(fused.len() as u64 == n, format!("{} test writers", fused.len()))?;
        let k = fused.iter().filter(|r| r.is_correct()).count() as u64;
        rates.push(k as f64 / n as f64);
        if (lo..=hi).contains(&k) {
            inside += 1;
        }
        let all = report.table(Channel::Combined).unwrap().row(ALL_LABEL).unwrap();
        if !all.average.significant {
            non_significant += 1;
        }
    }
    check(inside >= 18, format!("null inside band [{lo}, {hi}] in {inside}/20 runs"))?;
    check(non_significant >= 19, format!("null significant in {} of 20 runs", 20 - non_significant))?;

    let cfg = synth_experiment(3.0, &[], 77, 78);
    let report = experiment::run_experiment(&cfg).map_err(|e| e.to_string())?;
    decomposed &= decomposition_holds(&report.trials[0]);
    let down = report.table(Channel::DownOnly).ok_or("missing down table")?;
    check(down.word_rows().len() == 16, "expected 16 words")?;
    let worst = down
        .word_rows()
        .iter()
        .map(|r| r.average.rate)
        .fold(f64::INFINITY, f64::min);
    check(worst >= 0.90, format!("worst per-word pen-down rate {worst:.3}"))?;
    let mut trend = Vec::new();
    for table in &report.tables {
        let rows = table.word_rows();
        let mean = rows.iter().map(|r| r.average.rate).sum::<f64>() / rows.len() as f64;
        let fused = table.row(ALL_LABEL).unwrap().average.rate;
        check(
            fused >= mean - 0.01,
            format!("{} fused {fused:.3} below word mean {mean:.3}", table.channel),
        )?;
        trend.push(format!("{} {:.3}/{:.3}", table.channel, fused, mean));
    }
    check(decomposed, "combined score differs from down + up")?;
    let elapsed = t.elapsed();
    check(elapsed < Duration::from_secs(600), format!("took {elapsed:?}"))?;
    Ok(format!(
        "null in band [{lo}, {hi}] {inside}/20, non-significant {non_significant}/20 (rates {:.3}..{:.3}); high separation worst word {worst:.3}, fused/mean {}; combined = down + up; {elapsed:.1?}",
        rates.iter().cloned().fold(f64::INFINITY, f64::min),
        rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        trend.join(", ")
    ))
}

fn gaussian_ball(rng: &mut ChaCha8Rng, centre: &[f64], radius: f64, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| centre.iter().map(|c| c + radius * (rng.random::<f64>() * 2.0 - 1.0)).collect())
        .collect()
}

/// Lloyd iterations from the first and last point until assignments settle.
fn two_means(data: &[Vec<f64>]) -> [Vec<f64>; 2] {
    let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut c = [data[0].clone(), data[data.len() - 1].clone()];
    for _ in 0..100 {
        let mut sums = [vec![0.0; c[0].len()], vec![0.0; c[0].len()]];
        let mut counts = [0usize; 2];
        for v in data {
            let j = usize::from(d2(v, &c[1]) < d2(v, &c[0]));
            counts[j] += 1;
            for (s, x) in sums[j].iter_mut().zip(v) {
                *s += x;
            }
        }
        let next = [0, 1].map(|j| sums[j].iter().map(|s| s / counts[j] as f64).collect::<Vec<_>>());
        if next == c {
            break;
        }
        c = next;
    }
    c
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let defaults = SomConfig::default();

    let v = vec![0.3, -1.2, 4.0, 2.5, 0.0, 7.5];
    let single = vec![v.clone(); 9];
    for mode in [TrainingMode::Batch, TrainingMode::Sequential] {
        let cfg = SomConfig { mode, ..defaults };
        let grid = som::plan_grid(&single, cfg.target_units);
        let from_init = som::train(&single, &grid, &cfg.schedule_for(&grid), 1).map_err(|e| e.to_string())?;
        let small = GridSpec::new(2, 2);
        let start: Vec<f64> = (0..24).map(|i| v[i % 6] + ((i * 5 % 7) as f64 - 3.0) * 0.4).collect();
        let perturbed = som::train_from(
            PrototypeSet::new(small, 6, start).unwrap(),
            &single,
            &cfg.schedule_for(&small),
            1,
        )
        .map_err(|e| e.to_string())?;
        for p in from_init.prototypes().chain(perturbed.prototypes()) {
            let err = p.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            check(err < 1e-6, format!("{mode:?}: single-vector error {err:e}"))?;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let radius = 1.0;
    let (ca, cb) = (vec![-4.0, 1.0, 0.5], vec![4.0, -1.0, 2.0]);
    let mut two = gaussian_ball(&mut rng, &ca, radius, 150);
    two.extend(gaussian_ball(&mut rng, &cb, radius, 150));
    let oracle = two_means(&two);
    let grid = GridSpec::new(1, 2);
    let schedule = TrainingSchedule {
        rough_sigma: (1.0, 0.5),
        fine_sigma: (0.5, 0.1),
        ..defaults.schedule_for(&grid)
    };
    let protos = som::train(&two, &grid, &schedule, 5).map_err(|e| e.to_string())?;
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut worst_cluster = 0.0f64;
    for centre in &oracle {
        let nearest = protos.prototypes().map(|p| dist(p, centre)).fold(f64::INFINITY, f64::min);
        worst_cluster = worst_cluster.max(nearest);
    }
    check(worst_cluster <= 0.05 * radius, format!("cluster mean error {worst_cluster:.4}"))?;

    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let data: Vec<Vec<f64>> = (0..300)
            .map(|i| {
                let c = (i % 3) as f64 * 2.0;
                (0..8).map(|_| c + rng.random::<f64>() - 0.5).collect()
            })
            .collect();
        let grid = som::plan_grid(&data, 60);
        let schedule = SomConfig { target_units: 60, ..defaults }.schedule_for(&grid);
        let before = som::quantization_error(&som::init_linear(&data, &grid, seed).unwrap(), &data).unwrap();
        let trained = som::train(&data, &grid, &schedule, seed).unwrap();
        let after = som::quantization_error(&trained, &data).unwrap();
        check(after <= before, format!("seed {seed}: QE {after} > {before}"))?;
        if seed < 3 {
            let again = som::train(&data, &grid, &schedule, seed).unwrap();
            let bits = |p: &PrototypeSet| p.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            check(bits(&trained) == bits(&again), "batch retraining differs")?;
            let seq = TrainingSchedule {
                mode: TrainingMode::Sequential,
                ..schedule
            };
            let a = som::train(&data, &grid, &seq, seed).unwrap();
            let b = som::train(&data, &grid, &seq, seed).unwrap();
            check(bits(&a) == bits(&b), "sequential retraining differs")?;
        }
    }

    let cfg = SynthConfig {
        writers_per_gender: 50,
        strokes_per_glyph: 1.0,
        seed: 4,
        ..SynthConfig::default()
    }
    .with_words(&["DESPRENDER"]);
    let ds = generate_dataset(&cfg);
    let store = FeatureStore::extract(&ds, Default::default()).map_err(|e| e.to_string())?;
    let writers: Vec<&str> = store.writers().keys().map(String::as_str).collect();
    let mut grids = Vec::new();
    for gender in Gender::BOTH {
        for kind in StrokeKind::BOTH {
            let cb = model::build_codebook_from_store(&store, &writers, "DESPRENDER", gender, kind, &defaults, 9)
                .map_err(|e| e.to_string())?;
            let units = cb.protos.units();
            check(
                (120..=180).contains(&units),
                format!("{gender}/{kind}: {units} units from {} strokes", cb.provenance.strokes),
            )?;
            grids.push(format!("{}x{}", cb.protos.grid().rows, cb.protos.grid().cols));
        }
    }
    let elapsed = t.elapsed();
    check(elapsed < Duration::from_secs(120), format!("took {elapsed:?}"))?;
    Ok(format!(
        "single vector < 1e-6; two clusters within {:.4} of 2-means; QE never rises (20 seeds); retraining bit-identical; grids {}; {elapsed:.1?}",
        worst_cluster,
        grids.join(" ")
    ))
}

fn recording_from_bs(bs: &[u8]) -> WordRecording {
    let samples = bs
        .iter()
        .enumerate()
        .map(|(i, &b)| PenSample {
            x: i as i32,
            y: 0,
            ts: i as i64,
            bs: b,
            az: 0,
            al: 0,
            pr: i32::from(b) * 100,
        })
        .collect();
    WordRecording::new("w", samples).unwrap()
}

/// (bs, first, last) for every maximal run.
fn runs(bs: &[u8]) -> Vec<(u8, usize, usize)> {
    let mut out: Vec<(u8, usize, usize)> = Vec::new();
    for (i, &b) in bs.iter().enumerate() {
        match out.last_mut() {
            Some(last) if last.0 == b => last.2 = i,
            _ => out.push((b, i, i)),
        }
    }
    out
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let len = rng.random_range(1..200);
        let stickiness: f64 = rng.random_range(0.0..0.95);
        let mut bs = vec![u8::from(rng.random::<bool>())];
        for _ in 1..len {
            let prev = *bs.last().unwrap();
            bs.push(if rng.random::<f64>() < stickiness { prev } else { u8::from(rng.random::<bool>()) });
        }
        let min_points = rng.random_range(1..5);
        let rec = recording_from_bs(&bs);
        let seg = segment(&rec, min_points);
        let keep = min_points.max(2);
        let expected = runs(&bs);
        let want = |b: u8| -> Vec<(usize, usize)> {
            expected
                .iter()
                .filter(|r| r.0 == b && r.2 - r.1 + 1 >= keep)
                .map(|r| (r.1, r.2))
                .collect()
        };
        let got = |s: &[strokecast::stroke::Stroke<'_>]| s.iter().map(|s| s.span).collect::<Vec<_>>();
        check(got(&seg.pen_down) == want(1), format!("pen-down runs differ for {bs:?}"))?;
        check(got(&seg.pen_up) == want(0), format!("pen-up runs differ for {bs:?}"))?;
        let dropped = expected.iter().filter(|r| r.2 - r.1 + 1 < keep).count();
        check(seg.dropped.len() == dropped, "dropped count differs")?;
    }

    let mut worst_interp = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(2..120);
        let m = rng.random_range(2..40);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-1e3..1e3)).collect();
        let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let ours = resample_channel(&values, m).map_err(|e| e.to_string())?;
        for (j, got) in ours.iter().enumerate() {
            // Position j * (n - 1) / (m - 1) split into integer and fraction exactly.
            let num = j * (n - 1);
            let i = (num / (m - 1)).min(n - 2);
            let frac = (num - i * (m - 1)) as f64 / (m - 1) as f64;
            let want = values[i] * (1.0 - frac) + values[i + 1] * frac;
            worst_interp = worst_interp.max((got - want).abs() / scale);
        }
        check(ours[0] == values[0] && ours[m - 1] == values[n - 1], "endpoints not exact")?;
    }
    check(worst_interp < 1e-12, format!("interpolation error {worst_interp:e}"))?;

    for _ in 0..500 {
        let n = rng.random_range(2..100);
        let offset = rng.random_range(-1e4..1e4);
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let values: Vec<f64> = (0..n).map(|_| offset + scale * rng.random::<f64>()).collect();
        let z = normalize(&values);
        let mean = z.iter().sum::<f64>() / n as f64;
        let sd = (z.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64).sqrt();
        check(mean.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9, format!("mean {mean:e}, sd {sd}"))?;
    }
    check(normalize(&[42.0; 16]).iter().all(|&x| x == 0.0), "constant channel is not zero")?;
    let elapsed = t.elapsed();
    check(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!(
        "segmentation = run-length oracle (1000 sequences); interpolation error {worst_interp:.1e}; normalization exact; {elapsed:.2?}"
    ))
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let cfg = SynthConfig {
        writers_per_gender: 3,
        sessions: 2,
        seed: 6,
        ..SynthConfig::default()
    }
    .with_words(&["INFATIGABLE", "DESBRIZNAR"]);
    let ds = generate_dataset(&cfg);
    for (key, rec) in ds.recordings() {
        let text = write_svc(rec);
        let back = parse_svc(&key.word, &text).map_err(|e| e.to_string())?;
        check(&back == rec, format!("{key:?} changed on round trip"))?;
        check(write_svc(&back) == text, format!("{key:?} text differs"))?;
    }

    let mcfg = small_som();
    let wm = model::build_word_model(&ds, "DESBRIZNAR", &mcfg, 3).map_err(|e| e.to_string())?;
    for cb in wm.codebooks() {
        let text = codebook_to_text(cb);
        let back = codebook_from_text(&text).map_err(|e| e.to_string())?;
        let bits = |p: &PrototypeSet| p.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        check(bits(&back.protos) == bits(&cb.protos), "prototypes changed")?;
        check(codebook_to_text(&back) == text, "codebook text differs")?;

        let lines: Vec<&str> = text.lines().collect();
        let target = lines.len() / 2;
        let mut tampered: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
        tampered[target] = tampered[target].replacen('e', "1e", 1);
        let tampered = tampered.join("\n") + "\n";
        check(tampered != text, "tamper had no effect")?;
        check(
            matches!(codebook_from_text(&tampered), Err(ModelError::Checksum { .. })),
            "tampered codebook accepted",
        )?;
        check(codebook_from_text(&text[..text.len() / 2]).is_err(), "truncated codebook accepted")?;
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    model::save_model(&wm, dir.path(), "digest").map_err(|e| e.to_string())?;
    let (loaded, digest) = model::load_model(dir.path()).map_err(|e| e.to_string())?;
    check(loaded == wm && digest == "digest", "model directory round trip differs")?;
    let elapsed = t.elapsed();
    check(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} SVC files and {} codebooks round-trip; tampering rejected; {elapsed:.2?}",
        ds.len(),
        wm.codebooks().len()
    ))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dim = 48;
    let centres: Vec<Vec<f64>> = (0..12).map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let make = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| centres[i % centres.len()].iter().map(|c| c + 0.3 * (rng.random::<f64>() - 0.5)).collect())
            .collect()
    };
    let small = make(&mut rng, 2000);
    let large = make(&mut rng, 4000);
    let grid = GridSpec::new(10, 15);
    let schedule = TrainingSchedule {
        rough_epochs: 10,
        fine_epochs: 30,
        ..SomConfig::default().schedule_for(&grid)
    };
    let time = |data: &[Vec<f64>]| {
        (0..5)
            .map(|_| {
                let t = Instant::now();
                som::train(data, &grid, &schedule, 1).unwrap();
                t.elapsed()
            })
            .min()
            .unwrap()
    };
    let (ts, tl) = (time(&small), time(&large));
    let ratio = tl.as_secs_f64() / ts.as_secs_f64();
    check((1.5..=3.0).contains(&ratio), format!("ratio {ratio:.2} ({ts:?} vs {tl:?})"))?;
    Ok(format!("2000 -> 4000 strokes: {ts:.2?} -> {tl:.2?}, ratio {ratio:.2}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("1 significance gate", criterion_1),
        ("2 tail p-values", criterion_2),
        ("3 synthetic end-to-end properties", criterion_3),
        ("4 SOM correctness", criterion_4),
        ("5 pipeline oracles", criterion_5),
        ("6 serialization", criterion_6),
        ("7 training complexity", criterion_7),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 7 criteria failed");
        std::process::exit(1);
    }
    println!("all 7 criteria passed");
}
