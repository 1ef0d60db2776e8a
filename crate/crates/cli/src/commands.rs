use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::{json, Value};
use tcmra::dataset::{
    build_sequences, gen_synthetic_corpus, join_env, split_by_storm, write_manifest, ManifestEntry, Partition,
    SequenceSample, Timed,
};
use tcmra::ingest::{
    compute_ri_labels, parse_env_table, parse_hurdat2, write_hurdat2, write_ir_frame, IrFrame, RiLabel,
};
use tcmra::model::{
    cam_to_subbands, compute_cam, evaluate, is_primed, predict_many, read_model, score_pt, train, write_model,
    InputMode, ModelFrame, TrainedModel,
};
use tcmra::pipeline::{sparsify_all, PipelineConfig};
use tcmra::time;
use tcmra::tokenizer::{decode, encode_frames, read_tokens, write_tokens, Vocabulary};
use tcmra::wavelet::{compression_ratio, dense_to_sparse, dwt2, reconstruct, sparsify_frame, write_wsc, Grid, SparseCoeffSet};

use crate::args::*;
use crate::files::{self, samples_from_manifest, Failure, FrameFile};

type Out = Result<Value, Failure>;

pub fn dispatch(cmd: Command, cfg: PipelineConfig) -> Out {
    match cmd {
        Command::Ingest(c) => ingest(c, &cfg),
        Command::Frame(c) => frame(c),
        Command::Wavelet(c) => wavelet(c, cfg),
        Command::Synth(SynthCmd::Generate { out_dir, sparsify }) => synth(&out_dir, sparsify, &cfg),
        Command::Dataset(c) => dataset(c, &cfg),
        Command::Model(c) => model(c, &cfg),
        Command::Token(c) => token(c, &cfg),
    }
}

fn labels_csv(labels: &[RiLabel]) -> String {
    let mut out = String::from("storm_id,timestamp,label,delta_kt\n");
    for l in labels {
        out.push_str(&format!("{},{},{},{}\n", l.storm_id, time::format_iso(&l.timestamp), l.label, l.delta_kt));
    }
    out
}

fn ingest(cmd: IngestCmd, cfg: &PipelineConfig) -> Out {
    match cmd {
        IngestCmd::Hurdat2 { input, url, save, tracks, labels } => {
            let text = match (input, url) {
                (Some(path), _) => files::read_text(&path)?,
                (None, Some(url)) => fetch(&url)?,
                (None, None) => return Err(Failure::Usage("give an input file or --url".into())),
            };
            let parsed = parse_hurdat2(&text)?;
            let all: Vec<RiLabel> = parsed
                .iter()
                .flat_map(|t| compute_ri_labels(t, cfg.dataset.lead_hours, cfg.dataset.ri_threshold_kt))
                .collect();
            if let Some(p) = save {
                files::write(&p, &text)?;
            }
            if let Some(p) = tracks {
                files::write(&p, serde_json::to_string_pretty(&parsed).expect("tracks serialize"))?;
            }
            if let Some(p) = labels {
                files::write(&p, labels_csv(&all))?;
            }
            Ok(json!({
                "storms": parsed.len(),
                "records": parsed.iter().map(|t| t.records.len()).sum::<usize>(),
                "labels": all.len(),
                "ri_labels": all.iter().filter(|l| l.label == 1).count(),
            }))
        }
        IngestCmd::Env { input, out } => {
            let records = parse_env_table(&files::read_text(&input)?)?;
            let names: Vec<&str> = records
                .first()
                .map(|r| r.predictors.iter().map(|(n, _)| n.as_str()).collect())
                .unwrap_or_default();
            if let Some(p) = out {
                let mut text = String::new();
                for r in &records {
                    text.push_str(&serde_json::to_string(r).expect("record serializes"));
                    text.push('\n');
                }
                files::write(&p, text)?;
            }
            let missing: usize = records.iter().map(|r| r.predictors.iter().filter(|(_, v)| v.is_none()).count()).sum();
            Ok(json!({"records": records.len(), "predictors": names, "missing_values": missing}))
        }
    }
}

#[cfg(feature = "fetch")]
fn fetch(url: &str) -> Result<String, Failure> {
    Ok(tcmra::ingest::fetch_hurdat2(url, Duration::from_secs(60))?)
}

#[cfg(not(feature = "fetch"))]
fn fetch(_url: &str) -> Result<String, Failure> {
    let _ = Duration::ZERO;
    Err(Failure::Usage("this build has no network fetch support".into()))
}

fn frame(cmd: FrameCmd) -> Out {
    match cmd {
        FrameCmd::Pack { input, output, storm_id, time: ts, pixel_km, lat, lon } => {
            let (width, values) = files::parse_csv_grid(&files::read_text(&input)?)?;
            let frame = IrFrame::new(
                storm_id,
                time::parse_iso(&ts)?,
                width,
                pixel_km,
                (lat, lon),
                values.iter().map(|&v| v as f32).collect(),
            )?;
            files::write(&output, write_ir_frame(&frame)?)?;
            Ok(json!({"storm_id": frame.storm_id, "timestamp": time::format_iso(&frame.timestamp), "width": width}))
        }
        FrameCmd::Unpack { input, output, pgm } => {
            let f = files::load_frame(&input)?;
            let temps = f.temps_f64();
            files::write(&output, files::csv_grid(&temps, f.width))?;
            if let Some(p) = pgm {
                files::write(&p, files::pgm(&temps, f.width))?;
            }
            Ok(json!({
                "storm_id": f.storm_id,
                "timestamp": time::format_iso(&f.timestamp),
                "width": f.width,
                "pixel_scale_km": f.pixel_scale_km,
                "center": [f.center_lat_deg, f.center_lon_deg],
            }))
        }
    }
}

fn wavelet(cmd: WaveletCmd, mut cfg: PipelineConfig) -> Out {
    let spec = cfg.wavelet.spec();
    match cmd {
        WaveletCmd::Decompose { input, output, nested_csv } => {
            let f = files::load_frame(&input)?;
            let d = dwt2(&Grid::from_vec(f.width, f.temps_f64())?, &spec)?;
            let set = dense_to_sparse(&d)?.with_source(f.storm_id.clone(), Some(f.timestamp));
            files::write(&output, write_wsc(&set)?)?;
            if let Some(p) = nested_csv {
                files::write(&p, files::csv_grid(&d.to_nested().data, f.width))?;
            }
            Ok(json!({"coefficients": d.coefficient_count(), "energy": d.energy(), "levels": spec.levels, "order": spec.family_order}))
        }
        WaveletCmd::Sparsify { flags, input, output } => {
            if let Some(q) = flags.q {
                cfg.wavelet.q = q;
            }
            if let Some(r) = flags.r_frac {
                cfg.wavelet.r_frac = r;
            }
            cfg.validate()?;
            let f = files::load_frame(&input)?;
            let s = sparsify_frame(&f, &spec, cfg.wavelet.q, &cfg.wavelet.mask()?)?;
            files::write(&output, write_wsc(&s)?)?;
            Ok(json!({"entries": s.len(), "pixels": s.pixel_count(), "ratio": compression_ratio(&s), "q": s.q, "r_frac": s.r_frac}))
        }
        WaveletCmd::Reconstruct { input, output, pgm } => {
            let s = files::load_wsc(&input)?;
            let g = reconstruct(&s)?;
            files::write(&output, files::csv_grid(&g.data, g.size))?;
            if let Some(p) = pgm {
                files::write(&p, files::pgm(&g.data, g.size))?;
            }
            let (lo, hi) = g.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            Ok(json!({"width": g.size, "entries": s.len(), "min": lo, "max": hi}))
        }
        WaveletCmd::Ratio { input } => {
            let s = files::load_wsc(&input)?;
            Ok(json!({"ratio": compression_ratio(&s), "entries": s.len(), "pixels": s.pixel_count()}))
        }
    }
}

fn frame_name(f: &impl Timed, ext: &str) -> String {
    let ts = f.timestamp().map(|t| time::format_basic(&t)).unwrap_or_else(|| "notime".into());
    format!("{}_{ts}.{ext}", f.storm_id())
}

fn synth(out_dir: &Path, with_wsc: bool, cfg: &PipelineConfig) -> Out {
    let corpus = gen_synthetic_corpus(&cfg.synth)?;
    for f in &corpus.frames {
        files::write(&out_dir.join("frames").join(frame_name(f, "irf")), write_ir_frame(f)?)?;
    }
    if with_wsc {
        for s in sparsify_all(&corpus.frames, &cfg.wavelet)? {
            files::write(&out_dir.join("wsc").join(frame_name(&s, "wsc")), write_wsc(&s)?)?;
        }
    }
    files::write(&out_dir.join("best_track.txt"), write_hurdat2(&corpus.tracks))?;
    files::write(&out_dir.join("labels.csv"), labels_csv(&corpus.intended_labels))?;
    files::write(&out_dir.join("synth_config.json"), serde_json::to_string_pretty(&cfg.synth).expect("config serializes"))?;
    Ok(json!({
        "storms": corpus.tracks.len(),
        "frames": corpus.frames.len(),
        "ri_storms": corpus.ri_storms.len(),
        "labels": corpus.intended_labels.len(),
        "positives": corpus.intended_labels.iter().filter(|l| l.label == 1).count(),
        "sparsified": with_wsc,
    }))
}

fn collect_frames<F: FrameFile + Timed>(dir: &Path) -> Result<Vec<(PathBuf, F)>, Failure> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::Data { kind: "io", message: format!("{}: {e}", dir.display()) })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|x| x.to_str()) == Some(F::EXT))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::data(format!("no .{} files in {}", F::EXT, dir.display())));
    }
    paths.into_iter().map(|p| F::load(&p).map(|f| (p, f))).collect()
}

fn build_manifest<F: FrameFile + Timed + Clone>(
    frames_dir: &Path,
    labels: &[RiLabel],
    env: Option<&Path>,
    output: &Path,
    cfg: &PipelineConfig,
) -> Result<(Vec<ManifestEntry>, Value), Failure> {
    let loaded: Vec<(PathBuf, F)> = collect_frames(frames_dir)?;
    let mut where_is: HashMap<(String, time::Timestamp), &PathBuf> = HashMap::new();
    for (p, f) in &loaded {
        let ts = f.timestamp().ok_or_else(|| Failure::data(format!("{} has no timestamp", p.display())))?;
        if where_is.insert((f.storm_id().to_string(), ts), p).is_some() {
            return Err(Failure::data(format!("two frames for {} at {}", f.storm_id(), time::format_iso(&ts))));
        }
    }
    let frames: Vec<F> = loaded.iter().map(|(_, f)| f.clone()).collect();
    let (mut samples, report) = build_sequences(&frames, labels, cfg.dataset.window_hours, cfg.dataset.stride_hours)?;
    let names = cfg.dataset.env_predictors.clone();
    if let Some(p) = env {
        let records = parse_env_table(&files::read_text(p)?)?;
        samples = join_env(samples, &records, &names)?;
    }
    let entries = samples
        .iter()
        .map(|s| ManifestEntry {
            storm_id: s.storm_id.clone(),
            t: s.t,
            frame_paths: s
                .frame_times
                .iter()
                .map(|t| files::relativize(output, where_is[&(s.storm_id.clone(), *t)]))
                .collect(),
            label: s.label,
            env: s.env.clone(),
            env_names: if env.is_some() { names.clone() } else { vec![] },
        })
        .collect::<Vec<_>>();
    let summary = json!({
        "samples": report.samples,
        "labels_seen": report.labels_seen,
        "skipped_gaps": report.skipped_gaps,
        "positives": samples.iter().filter(|s| s.label == 1).count(),
        "with_env": samples.iter().filter(|s| s.env.is_some()).count(),
        "frames": frames.len(),
    });
    Ok((entries, summary))
}

fn dataset(cmd: DatasetCmd, cfg: &PipelineConfig) -> Out {
    match cmd {
        DatasetCmd::Build { frames, hurdat2, env, ext, output } => {
            let tracks = parse_hurdat2(&files::read_text(&hurdat2)?)?;
            let labels: Vec<RiLabel> = tracks
                .iter()
                .flat_map(|t| compute_ri_labels(t, cfg.dataset.lead_hours, cfg.dataset.ri_threshold_kt))
                .collect();
            let (entries, summary) = match ext.as_str() {
                "wsc" => build_manifest::<SparseCoeffSet>(&frames, &labels, env.as_deref(), &output, cfg)?,
                "irf" => build_manifest::<IrFrame>(&frames, &labels, env.as_deref(), &output, cfg)?,
                other => return Err(Failure::Usage(format!("--ext must be wsc or irf, not {other:?}"))),
            };
            files::write(&output, write_manifest(&entries)?)?;
            Ok(summary)
        }
        DatasetCmd::Split { manifest, output } => {
            let entries = files::load_manifest(&manifest)?;
            let samples: Vec<SequenceSample<()>> = entries
                .iter()
                .map(|e| SequenceSample {
                    storm_id: e.storm_id.clone(),
                    t: e.t,
                    frames: vec![],
                    frame_times: vec![],
                    label: e.label,
                    env: None,
                })
                .collect();
            let plan = split_by_storm(&samples, cfg.dataset.split_fractions, cfg.dataset.seed)?;
            files::write(&output, serde_json::to_string_pretty(&plan).expect("plan serializes"))?;
            let count = |p: Partition| plan.select(&samples, p).len();
            Ok(json!({
                "storms": {"train": plan.train.len(), "validation": plan.validation.len(), "test": plan.test.len()},
                "samples": {"train": count(Partition::Train), "validation": count(Partition::Validation), "test": count(Partition::Test)},
                "seed": plan.seed,
            }))
        }
    }
}

fn partition_samples<F: FrameFile + Timed>(data: &DataSel, part: Partition) -> Result<Vec<SequenceSample<F>>, Failure> {
    let entries = files::load_manifest(&data.manifest)?;
    let plan = files::load_split(&data.split)?;
    let chosen: Vec<ManifestEntry> = entries
        .into_iter()
        .filter(|e| plan.partition_of(&e.storm_id) == Some(part))
        .collect();
    samples_from_manifest(&data.manifest, &chosen)
}

fn train_with<F: FrameFile + ModelFrame>(data: &DataSel, cfg: &PipelineConfig) -> Result<TrainedModel, Failure> {
    let samples: Vec<SequenceSample<F>> = partition_samples(data, Partition::Train)?;
    Ok(train(&samples, &cfg.model)?)
}

fn eval_with<F: FrameFile + ModelFrame>(
    m: &TrainedModel,
    data: &DataSel,
    part: Partition,
) -> Result<(tcmra::model::EvalReport, Vec<SequenceSample<F>>), Failure> {
    let samples: Vec<SequenceSample<F>> = partition_samples(data, part)?;
    Ok((evaluate(m, &samples)?, samples))
}

fn load_model(path: &Path) -> Result<TrainedModel, Failure> {
    read_model(files::read_bytes(path)?.as_slice()).map_err(|e| Failure::Data {
        kind: e.kind(),
        message: format!("{}: {e}", path.display()),
    })
}

fn scores_csv<F>(samples: &[SequenceSample<F>], posteriors: &[f64], prevalence: f64) -> String {
    let mut out = String::from("storm_id,t,label,posterior,p_t,primed\n");
    for (s, p) in samples.iter().zip(posteriors) {
        let pt = score_pt(*p, prevalence);
        out.push_str(&format!("{},{},{},{p:?},{pt:?},{}\n", s.storm_id, time::format_iso(&s.t), s.label, is_primed(pt) as u8));
    }
    out
}

fn model(cmd: ModelCmd, cfg: &PipelineConfig) -> Out {
    match cmd {
        ModelCmd::Train { data, out } => {
            let m = match cfg.model.input_mode {
                InputMode::Wavelet => train_with::<SparseCoeffSet>(&data, cfg)?,
                InputMode::Raw => train_with::<IrFrame>(&data, cfg)?,
            };
            let mut bytes = Vec::new();
            write_model(&m, &mut bytes)?;
            files::write(&out, bytes)?;
            let last = m.history.last();
            Ok(json!({
                "mode": m.config.input_mode,
                "prevalence": m.prevalence,
                "epochs": m.history.len(),
                "final_loss": last.map(|h| h.mean_loss),
                "final_accuracy": last.map(|h| h.accuracy),
                "parameters": m.network.parameter_count(),
                "input_channels": m.shape().in_channels,
            }))
        }
        ModelCmd::Eval { model, data, partition, roc, summary, scores } => {
            let m = load_model(&model)?;
            let part: Partition = partition.parse()?;
            let (report, score_text) = match m.config.input_mode {
                InputMode::Wavelet => {
                    let (r, s) = eval_with::<SparseCoeffSet>(&m, &data, part)?;
                    let text = scores_csv(&s, &r.posteriors, m.prevalence);
                    (r, text)
                }
                InputMode::Raw => {
                    let (r, s) = eval_with::<IrFrame>(&m, &data, part)?;
                    let text = scores_csv(&s, &r.posteriors, m.prevalence);
                    (r, text)
                }
            };
            if let Some(p) = roc {
                let mut buf = Vec::new();
                report.write_roc_csv(&mut buf)?;
                files::write(&p, buf)?;
            }
            if let Some(p) = summary {
                files::write(&p, report.summary_json()?)?;
            }
            if let Some(p) = scores {
                files::write(&p, score_text)?;
            }
            let mut v = serde_json::to_value(report.summary()).expect("summary serializes");
            v["partition"] = json!(partition);
            Ok(v)
        }
        ModelCmd::Cam { model, manifest, index, class, csv, pgm, subbands } => {
            let m = load_model(&model)?;
            let entries = files::load_manifest(&manifest)?;
            let entry = entries
                .get(index)
                .ok_or_else(|| Failure::data(format!("manifest has {} samples, index {index} requested", entries.len())))?;
            let cam = match m.config.input_mode {
                InputMode::Wavelet => cam_for::<SparseCoeffSet>(&m, &manifest, entry, class)?,
                InputMode::Raw => cam_for::<IrFrame>(&m, &manifest, entry, class)?,
            };
            if let Some(p) = csv {
                let mut buf = Vec::new();
                cam.write_csv(&mut buf)?;
                files::write(&p, buf)?;
            }
            if let Some(p) = pgm {
                let mut buf = Vec::new();
                cam.write_pgm(&mut buf)?;
                files::write(&p, buf)?;
            }
            if let Some(p) = subbands {
                let spec = m
                    .wavelet_spec
                    .ok_or_else(|| Failure::Data { kind: "unsupported", message: "raw-mode model has no subbands".into() })?;
                let mut text = String::from("scale,orientation,row0,col0,side,mean,max\n");
                for s in cam_to_subbands(&cam, &spec)? {
                    let mean = s.values.iter().sum::<f64>() / s.values.len() as f64;
                    let max = s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    text.push_str(&format!("{},{},{},{},{},{mean:?},{max:?}\n", s.scale, s.orientation.index(), s.row0, s.col0, s.side));
                }
                files::write(&p, text)?;
            }
            let (lo, hi) = cam.overlay.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            Ok(json!({
                "storm_id": entry.storm_id,
                "t": time::format_iso(&entry.t),
                "class": class,
                "frames": cam.frames,
                "feature_width": cam.feature_width,
                "width": cam.width,
                "min": lo,
                "max": hi,
            }))
        }
    }
}

fn cam_for<F: FrameFile + ModelFrame>(
    m: &TrainedModel,
    manifest: &Path,
    entry: &ManifestEntry,
    class: usize,
) -> Result<tcmra::model::CamGrid, Failure> {
    let samples: Vec<SequenceSample<F>> = samples_from_manifest(manifest, std::slice::from_ref(entry))?;
    let _ = predict_many(m, &samples)?;
    Ok(compute_cam(m, &samples[0], class)?)
}

fn token(cmd: TokenCmd, cfg: &PipelineConfig) -> Out {
    let load_all = |paths: &[PathBuf]| paths.iter().map(|p| files::load_wsc(p)).collect::<Result<Vec<_>, _>>();
    let load_vocab = |p: &Path| -> Result<Vocabulary, Failure> {
        Vocabulary::from_json(&files::read_text(p)?).map_err(|e| Failure::Data { kind: e.kind(), message: format!("{}: {e}", p.display()) })
    };
    match cmd {
        TokenCmd::Fit { inputs, out } => {
            let sets = load_all(&inputs)?;
            let v = Vocabulary::fit(&sets, cfg.tokenizer.vocab_size, cfg.tokenizer.per_scale)?;
            files::write(&out, v.to_json()?)?;
            let fitted_on = sets.iter().map(SparseCoeffSet::len).sum::<usize>();
            Ok(json!({"V": cfg.tokenizer.vocab_size, "per_scale": cfg.tokenizer.per_scale, "fitted_on": fitted_on, "files": sets.len()}))
        }
        TokenCmd::Encode { vocab, inputs, out } => {
            let v = load_vocab(&vocab)?;
            let sets = load_all(&inputs)?;
            let seq = encode_frames(&sets, &v)?;
            files::write(&out, write_tokens(&seq)?)?;
            Ok(json!({"tokens": seq.tokens.len(), "frames": seq.frames.len(), "entries": sets.iter().map(SparseCoeffSet::len).sum::<usize>()}))
        }
        TokenCmd::Decode { vocab, input, out } => {
            let v = load_vocab(&vocab)?;
            let seq = read_tokens(&files::read_text(&input)?)?;
            let sets = decode(&seq, &v)?;
            let mut written = Vec::new();
            for (i, s) in sets.iter().enumerate() {
                let path = if sets.len() == 1 { out.clone() } else { numbered(&out, i) };
                files::write(&path, write_wsc(s)?)?;
                written.push(path.display().to_string());
            }
            Ok(json!({"frames": sets.len(), "entries": sets.iter().map(SparseCoeffSet::len).sum::<usize>(), "outputs": written}))
        }
    }
}

fn numbered(path: &Path, i: usize) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("frame");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("wsc");
    path.with_file_name(format!("{stem}.{i}.{ext}"))
}
