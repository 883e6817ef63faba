use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use reverb_forge::analysis::{analyze, AnalysisConfig, ImpulseResponse, RirKind};
use reverb_forge::config::RunConfig;
use reverb_forge::metrics::{far_grid, pooled_eer, read_scores, EerResult, ScoreSet};
use reverb_forge::pipeline::{
    build_reverb_eval, export_augmented_epoch, filter_and_partition, wav_files, write_analysis_report, AugmentConfig,
    AugmentationStream, EvalBuildConfig, PartitionConfig, RirInventory, TrialManifest, MANIFEST_FILE,
};
use reverb_forge::rng::Substream;
use reverb_forge::room::{sample_rooms, simulate_rir, RoomRanges};
use reverb_forge::synthesis::{expand_inventory_with, synthetic_id, SynthesisParent};
use reverb_forge::wave::{write_wave, BitDepth};
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::record::{FileSet, RunRecord, RECORD_FILE};

pub const PARTITION_FILE: &str = "partition.csv";
pub const GENERATION_LOG_FILE: &str = "generation_log.csv";
pub const ROOMS_FILE: &str = "rooms.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const GRID_FILE: &str = "far_grid.csv";

pub fn run(cli: &Cli, config: &RunConfig) -> Result<()> {
    match &cli.command {
        Command::Analyze(a) => analyze_cmd(a, config),
        Command::Partition(a) => partition_cmd(a, config),
        Command::Synthesize(a) => synthesize_cmd(a, config),
        Command::Simulate(a) => simulate_cmd(a, config),
        Command::BuildEval(a) => build_eval_cmd(a, config),
        Command::Augment(a) => augment_cmd(a, config),
        Command::EvalScores(a) => eval_scores_cmd(a, config),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn add_wavs(set: &mut FileSet, label: &str, dir: &Path) -> Result<()> {
    for path in wav_files(dir)? {
        set.add(format!("{label}/{}", file_name(&path)), path);
    }
    Ok(())
}

/// The manifest plus every audio file it references.
fn add_manifest(set: &mut FileSet, label: &str, manifest_path: &Path, manifest: &TrialManifest) {
    set.add(label, manifest_path);
    for row in &manifest.rows {
        set.add(format!("audio/{}", row.path), manifest.resolve(row));
    }
}

fn finish(mut record: RunRecord, inputs: FileSet, outputs: FileSet, path: &Path) -> Result<()> {
    record.inputs = inputs.digest()?;
    record.outputs = outputs.digest()?;
    record.write(path)
}

fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn analyze_cmd(a: &AnalyzeArgs, config: &RunConfig) -> Result<()> {
    let analysis = AnalysisConfig { bands: !a.no_bands, ..config.analysis() };
    let inventory = RirInventory::load_dir(&a.rirs, a.kind.into(), &analysis)?;
    if inventory.is_empty() {
        warn!("no .wav files in {}", a.rirs.display());
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_analysis_report(&inventory, &a.out)?;
    let failed = inventory.entries().iter().filter(|e| e.failure.is_some()).count();
    info!("analyze: {} RIRs, {failed} without a full analysis", inventory.len());

    let record = RunRecord::new("analyze", json!({ "kind": RirKind::from(a.kind), "bands": !a.no_bands }), config);
    let mut inputs = FileSet::default();
    add_wavs(&mut inputs, "rirs", &a.rirs)?;
    let mut outputs = FileSet::default();
    outputs.add("report", &a.out);
    let record_path = PathBuf::from(format!("{}.{RECORD_FILE}", a.out.display()));
    finish(record, inputs, outputs, &record_path)
}

#[derive(Serialize)]
struct PartitionRow<'a> {
    rir_id: &'a str,
    set: &'a str,
    reason: String,
    t60_s: Option<f64>,
    drr_db: Option<f64>,
}

fn partition_cmd(a: &PartitionArgs, config: &RunConfig) -> Result<()> {
    let analysis = AnalysisConfig { bands: false, ..config.analysis() };
    let inventory = RirInventory::load_dir(&a.rirs, RirKind::Recorded, &analysis)?;
    let pconfig = PartitionConfig {
        t60_max: config.t60_max,
        drr_min: config.drr_min,
        drr_max: config.drr_max,
        n_test: a.n_test,
        seed: config.seed,
    };
    let partition = filter_and_partition(&inventory, &pconfig)?;
    info!(
        "partition: {} train, {} test, {} excluded",
        partition.train.len(),
        partition.test.len(),
        partition.excluded.len()
    );

    let mut outputs = FileSet::default();
    let mut membership: BTreeMap<&str, (&str, String)> = BTreeMap::new();
    for (set, ids) in [("train", &partition.train), ("test", &partition.test)] {
        let dir = a.out.join(set);
        create_dir(&dir)?;
        for id in ids {
            let entry = inventory.get(id).expect("partition ids come from the inventory");
            let src = entry.path().expect("loaded from disk");
            let dst = dir.join(file_name(src));
            std::fs::copy(src, &dst).with_context(|| format!("copying {}", src.display()))?;
            outputs.add(format!("{set}/{}", file_name(src)), dst);
            membership.insert(id, (set, String::new()));
        }
    }
    for (id, reason) in &partition.excluded {
        membership.insert(id, ("excluded", reason.to_string()));
    }
    let rows: Vec<PartitionRow> = inventory
        .entries()
        .iter()
        .map(|e| {
            let (set, reason) = &membership[e.rir_id.as_str()];
            PartitionRow { rir_id: &e.rir_id, set, reason: reason.clone(), t60_s: e.t60(), drr_db: e.drr() }
        })
        .collect();
    let csv_path = a.out.join(PARTITION_FILE);
    write_csv_rows(&csv_path, &rows)?;
    outputs.add(PARTITION_FILE, csv_path);

    let record = RunRecord::new("partition", json!({ "n_test": a.n_test }), config);
    let mut inputs = FileSet::default();
    add_wavs(&mut inputs, "rirs", &a.rirs)?;
    finish(record, inputs, outputs, &a.out.join(RECORD_FILE))
}

fn synthesize_cmd(a: &SynthesizeArgs, config: &RunConfig) -> Result<()> {
    let synthesis = config.synthesis();
    let paths = wav_files(&a.parents)?;
    if paths.is_empty() {
        bail!(reverb_forge::Error::InvalidArgument(format!("no parent .wav files in {}", a.parents.display())));
    }
    let parents = paths
        .par_iter()
        .map(|path| {
            let ir = ImpulseResponse::load(path, RirKind::Recorded)?;
            let id = ir.rir_id.clone();
            SynthesisParent::prepare(ir, &synthesis).with_context(|| format!("parent {id}"))
        })
        .collect::<Result<Vec<_>>>()?;
    create_dir(&a.out)?;

    let written = AtomicUsize::new(0);
    let report = expand_inventory_with(&parents, a.n, config.seed, &synthesis, |rir| {
        write_wave(&rir.ir.wave, a.out.join(format!("{}.wav", rir.ir.rir_id)), BitDepth::Float32)?;
        let n = written.fetch_add(1, Ordering::Relaxed) + 1;
        if n.is_multiple_of(1000) {
            info!("synthesize: {n} accepted");
        }
        Ok(())
    })?;
    let log_path = a.out.join(GENERATION_LOG_FILE);
    write_csv_rows(&log_path, &report.log)?;
    let rejected = report.log.iter().filter(|r| !r.accepted).count();
    info!("synthesize: {} accepted, {rejected} rejected attempts, {} unfilled slots", report.accepted, report.unfilled.len());
    if !report.unfilled.is_empty() {
        warn!("{} slots exhausted the retry cap of {}", report.unfilled.len(), config.retry_cap);
    }

    let mut outputs = FileSet::default();
    outputs.add(GENERATION_LOG_FILE, log_path);
    for row in report.log.iter().filter(|r| r.accepted) {
        let name = format!("{}.wav", synthetic_id(&row.parent_id, row.slot));
        outputs.add(name.clone(), a.out.join(&name));
    }
    let record = RunRecord::new("synthesize", json!({ "n": a.n, "per_band": config.per_band }), config);
    let mut inputs = FileSet::default();
    add_wavs(&mut inputs, "parents", &a.parents)?;
    finish(record, inputs, outputs, &a.out.join(RECORD_FILE))
}

#[derive(Serialize)]
struct RoomRow {
    rir_id: String,
    length: f64,
    width: f64,
    height: f64,
    source_x: f64,
    source_y: f64,
    source_z: f64,
    mic_x: f64,
    mic_y: f64,
    mic_z: f64,
    beta_x0: f64,
    beta_x1: f64,
    beta_y0: f64,
    beta_y1: f64,
    beta_z0: f64,
    beta_z1: f64,
    order: usize,
    sample_rate: u32,
    t60_s: Option<f64>,
    drr_db: Option<f64>,
}

fn simulate_cmd(a: &SimulateArgs, config: &RunConfig) -> Result<()> {
    let defaults = RoomRanges::default();
    let pick = |lo: Option<f64>, hi: Option<f64>, d: (f64, f64)| (lo.unwrap_or(d.0), hi.unwrap_or(d.1));
    let ranges = RoomRanges {
        length: pick(a.length_min, a.length_max, defaults.length),
        width: pick(a.width_min, a.width_max, defaults.width),
        height: pick(a.height_min, a.height_max, defaults.height),
        reflectivity: pick(a.beta_min, a.beta_max, defaults.reflectivity),
        sample_rate: a.sample_rate.unwrap_or(defaults.sample_rate),
        ..defaults
    };
    let mut rng = Substream::new(config.seed, &["simulate"]);
    let mut rooms = sample_rooms(&mut rng, a.count, &ranges)?;
    if let Some(order) = a.max_order {
        rooms.iter_mut().for_each(|r| r.max_order = Some(order));
    }
    create_dir(&a.out)?;
    let analysis = AnalysisConfig { bands: false, ..config.analysis() };
    let done = AtomicUsize::new(0);
    let rows = rooms
        .par_iter()
        .enumerate()
        .map(|(k, room)| {
            let id = format!("sim{k}");
            let ir = simulate_rir(room, &id).with_context(|| format!("room {id}"))?;
            write_wave(&ir.wave, a.out.join(format!("{id}.wav")), BitDepth::Float32)?;
            let params = analyze(&ir, &analysis).ok().map(|x| x.params);
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if n.is_multiple_of(50) {
                info!("simulate: {n}/{}", rooms.len());
            }
            let [length, width, height] = room.dimensions;
            let [source_x, source_y, source_z] = room.source;
            let [mic_x, mic_y, mic_z] = room.mic;
            let [beta_x0, beta_x1, beta_y0, beta_y1, beta_z0, beta_z1] = room.reflectivity;
            Ok(RoomRow {
                rir_id: id,
                length,
                width,
                height,
                source_x,
                source_y,
                source_z,
                mic_x,
                mic_y,
                mic_z,
                beta_x0,
                beta_x1,
                beta_y0,
                beta_y1,
                beta_z0,
                beta_z1,
                order: room.effective_order(),
                sample_rate: room.sample_rate,
                t60_s: params.as_ref().and_then(|p| p.t60),
                drr_db: params.map(|p| p.drr),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let csv_path = a.out.join(ROOMS_FILE);
    write_csv_rows(&csv_path, &rows)?;
    info!("simulate: {} rooms", rows.len());

    let mut outputs = FileSet::default();
    outputs.add(ROOMS_FILE, csv_path);
    for row in &rows {
        outputs.add(format!("{}.wav", row.rir_id), a.out.join(format!("{}.wav", row.rir_id)));
    }
    let record = RunRecord::new("simulate", json!({ "count": a.count, "ranges": ranges, "max_order": a.max_order }), config);
    finish(record, FileSet::default(), outputs, &a.out.join(RECORD_FILE))
}

fn manifest_outputs(out: &Path, manifest: &TrialManifest) -> FileSet {
    let mut outputs = FileSet::default();
    outputs.add(MANIFEST_FILE, out.join(MANIFEST_FILE));
    for row in &manifest.rows {
        outputs.add(row.path.clone(), manifest.resolve(row));
    }
    outputs
}

fn build_eval_cmd(a: &BuildEvalArgs, config: &RunConfig) -> Result<()> {
    let source = TrialManifest::read(&a.manifest)?;
    let analysis = AnalysisConfig { bands: false, ..config.analysis() };
    let inventory = RirInventory::load_dir(&a.rirs, a.kind.into(), &analysis)?;
    let mut build = EvalBuildConfig::new(config.seed, &a.condition_name);
    if a.random_scale {
        build.scale = config.scale_range();
    }
    build.trim_to_input = a.trim;
    let built = build_reverb_eval(&source, &inventory, &build, &a.out)?;
    let reverberated = built.rows.iter().filter(|r| r.rir_id.is_some()).count();
    info!("build-eval: {} rows, {reverberated} reverberated, {} RIRs", built.rows.len(), inventory.len());

    let record = RunRecord::new("build-eval", json!({ "build": build }), config);
    let mut inputs = FileSet::default();
    add_manifest(&mut inputs, "manifest", &a.manifest, &source);
    add_wavs(&mut inputs, "rirs", &a.rirs)?;
    finish(record, inputs, manifest_outputs(&a.out, &built), &a.out.join(RECORD_FILE))
}

fn augment_cmd(a: &AugmentArgs, config: &RunConfig) -> Result<()> {
    let source = TrialManifest::read(&a.manifest)?;
    let analysis = AnalysisConfig { bands: false, ..config.analysis() };
    let inventory = RirInventory::load_dir(&a.rirs, a.kind.into(), &analysis)?;
    let aug = AugmentConfig { seed: config.seed, epoch: a.epoch, p_apply: config.p_apply, scale: config.scale_range() };
    let stream = AugmentationStream::new(&source, &inventory, aug)?;
    let exported = export_augmented_epoch(&stream, &a.out)?;
    let reverberated = exported.rows.iter().filter(|r| r.rir_id.is_some()).count();
    info!("augment: epoch {}, {reverberated}/{} reverberated", a.epoch, exported.rows.len());

    let record = RunRecord::new("augment", json!({ "augment": aug }), config);
    let mut inputs = FileSet::default();
    add_manifest(&mut inputs, "manifest", &a.manifest, &source);
    add_wavs(&mut inputs, "rirs", &a.rirs)?;
    finish(record, inputs, manifest_outputs(&a.out, &exported), &a.out.join(RECORD_FILE))
}

#[derive(Serialize)]
struct GridSummary {
    threshold: f64,
    t60_bins: usize,
    drr_bins: usize,
    trials: usize,
}

#[derive(Serialize)]
struct Metrics {
    pooled: EerResult,
    conditions: BTreeMap<String, EerResult>,
    grid: GridSummary,
}

fn eval_scores_cmd(a: &EvalScoresArgs, config: &RunConfig) -> Result<()> {
    let scores = read_scores(&a.scores)?;
    let key = TrialManifest::read(&a.key)?;
    let set = ScoreSet::join(&scores, &key, a.invert)?;
    let pooled = pooled_eer(&set)?;
    let threshold = a.threshold.unwrap_or(pooled.pooled.threshold);
    let grid = far_grid(&set, threshold, config.grid_t60_bins, config.grid_drr_bins)?;
    info!("eval-scores: pooled EER {:.3}% over {} trials", pooled.pooled.eer, set.trials.len());

    create_dir(&a.out)?;
    let metrics = Metrics {
        pooled: pooled.pooled,
        conditions: pooled.per_condition,
        grid: GridSummary {
            threshold,
            t60_bins: config.grid_t60_bins,
            drr_bins: config.grid_drr_bins,
            trials: grid.total_count(),
        },
    };
    let metrics_path = a.out.join(METRICS_FILE);
    let mut text = serde_json::to_string_pretty(&metrics)?;
    text.push('\n');
    std::fs::write(&metrics_path, text).with_context(|| format!("writing {}", metrics_path.display()))?;
    let grid_path = a.out.join(GRID_FILE);
    grid.write_csv(&grid_path)?;

    let record = RunRecord::new("eval-scores", json!({ "invert": a.invert, "threshold": a.threshold }), config);
    let mut inputs = FileSet::default();
    inputs.add("scores", &a.scores);
    inputs.add("key", &a.key);
    let mut outputs = FileSet::default();
    outputs.add(METRICS_FILE, metrics_path);
    outputs.add(GRID_FILE, grid_path);
    finish(record, inputs, outputs, &a.out.join(RECORD_FILE))
}
