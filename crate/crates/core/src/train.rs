//! Dataset assembly, the epoch loop, validation metrics and checkpointing.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{self, AugmentSpec, Provenance, Segment};
use crate::error::{Error, Result};
use crate::infer::INFER_CHUNK;
use crate::labeling::LabelConfig;
use crate::nn::{batch_from_windows, bce_loss, checkpoint, layers, AdamConfig, AdamState, ArchName, Model, ModelParams};
use crate::signal::{normalize, NormalizationSpec, Waveform};

/// Seed streams kept apart from the augmentation draws.
const SPLIT_STREAM: u64 = 0x5eed_5011;
const SHUFFLE_STREAM: u64 = 0x5eed_5aff;

pub const METRICS_HEADER: &str = "epoch,train_ce,val_ce,val_f1,val_auc_pr";
pub const BEST_CHECKPOINT: &str = "best.cclm";
pub const LAST_CHECKPOINT: &str = "last.cclm";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub arch: ArchName,
    pub window_len: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub normalization: NormalizationSpec,
    pub labels: LabelConfig,
    /// Its `window_len` and `seed` are replaced by the values above.
    pub augment: AugmentSpec,
    pub split_fraction: f64,
    pub seed: u64,
    pub checkpoint_dir: Option<PathBuf>,
    pub metrics_path: Option<PathBuf>,
    /// Augmentation pool size; results do not depend on it.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            arch: ArchName::Tan,
            window_len: 512,
            batch_size: 16,
            epochs: 100,
            adam: AdamConfig::default(),
            normalization: NormalizationSpec::default(),
            labels: LabelConfig::default(),
            augment: AugmentSpec::default(),
            split_fraction: 0.75,
            seed: 0,
            checkpoint_dir: None,
            metrics_path: None,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidTrainConfig(m));
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!("split_fraction must lie in (0, 1), got {}", self.split_fraction));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        self.adam.validate()?;
        self.normalization.validate()?;
        self.labels.validate()?;
        self.augment_spec().validate()?;
        crate::nn::build_arch(self.arch, self.window_len)?;
        Ok(())
    }

    /// The augmentation spec actually applied to training segments.
    pub fn augment_spec(&self) -> AugmentSpec {
        AugmentSpec { window_len: self.window_len, seed: self.seed, ..self.augment.clone() }
    }

    /// Validation windows: same cropping, one draw, no stochastic transforms.
    pub fn validation_spec(&self) -> AugmentSpec {
        AugmentSpec {
            time_scale_range: None,
            amp_jitter_range: None,
            noise_sigma: 0.0,
            multi_sampling: 1,
            ..self.augment_spec()
        }
    }
}

/// A fixed-length input window with its per-sample targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    pub samples: Vec<f64>,
    pub targets: Vec<f64>,
    pub marks: Vec<usize>,
    pub waveform_id: u64,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub train: Vec<SampleWindow>,
    pub val: Vec<SampleWindow>,
    /// Indices (into the input list) of the waveforms on each side.
    pub train_waveforms: Vec<usize>,
    pub val_waveforms: Vec<usize>,
    /// Marks within `W` of either end, which cannot anchor a `2W` segment.
    pub skipped_marks: usize,
}

fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    augment::draw_rng(seed, Provenance { waveform_id: stream, offset: 0 }, index)
}

/// Shuffles waveform indices and splits them; the train side gets
/// `round(n * fraction)` clamped so that both sides are non-empty when `n > 1`.
pub fn split_waveforms(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, SPLIT_STREAM, 0));
    let n_train = if n <= 1 { n } else { ((n as f64 * fraction).round() as usize).clamp(1, n - 1) };
    let val = idx.split_off(n_train);
    (idx, val)
}

fn segments_of(w: &Waveform, id: u64, window_len: usize) -> Result<(Vec<Segment>, usize)> {
    let marks = w
        .collar_marks()
        .ok_or_else(|| Error::InvalidTrainConfig(format!("waveform {id} has no collar annotations")))?;
    let len = w.len();
    let mut segments = Vec::new();
    let mut skipped = 0;
    for &m in marks {
        if m < window_len || m + window_len > len {
            skipped += 1;
            continue;
        }
        let start = m - window_len;
        let end = start + 2 * window_len;
        let lo = marks.partition_point(|&t| t < start);
        let hi = marks.partition_point(|&t| t < end);
        let rel = marks[lo..hi].iter().map(|&t| t - start).collect();
        segments.push(Segment::new(
            w.samples()[start..end].to_vec(),
            rel,
            Some(window_len),
            Provenance { waveform_id: id, offset: start },
        )?);
    }
    Ok((segments, skipped))
}

fn windows_from(segments: &[Segment], spec: &AugmentSpec, labels: &LabelConfig, pool: Option<&rayon::ThreadPool>) -> Result<Vec<SampleWindow>> {
    let expand = |seg: &Segment| -> Result<Vec<SampleWindow>> {
        augment::sample_many(seg, spec)?
            .into_iter()
            .map(|win| {
                let targets = labels.make(&win.marks, spec.window_len)?.values;
                Ok(SampleWindow { samples: win.samples, targets, marks: win.marks, waveform_id: seg.provenance.waveform_id })
            })
            .collect()
    };
    let nested: Vec<Result<Vec<SampleWindow>>> = match pool {
        Some(p) => p.install(|| segments.par_iter().map(expand).collect()),
        None => segments.iter().map(expand).collect(),
    };
    let mut out = Vec::new();
    for part in nested {
        out.extend(part?);
    }
    Ok(out)
}

/// Normalizes every waveform, splits them at waveform granularity, cuts a
/// `2W` segment centered on each collar mark and expands the segments into
/// labelled windows. Training segments get `M` augmented draws; validation
/// segments get one crop.
pub fn build_dataset(waveforms: &[Waveform], cfg: &TrainConfig) -> Result<Dataset> {
    cfg.validate()?;
    if waveforms.is_empty() {
        return Err(Error::InvalidTrainConfig("no waveforms to build a dataset from".into()));
    }
    let (train_ids, val_ids) = split_waveforms(waveforms.len(), cfg.split_fraction, cfg.seed);
    let pool = if cfg.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?,
        )
    } else {
        None
    };
    let mut skipped = 0;
    let mut side = |ids: &[usize], spec: &AugmentSpec| -> Result<Vec<SampleWindow>> {
        let mut segments = Vec::new();
        for &i in ids {
            let norm = normalize(&waveforms[i], &cfg.normalization)?;
            let (segs, s) = segments_of(&norm, i as u64, cfg.window_len)?;
            skipped += s;
            segments.extend(segs);
        }
        windows_from(&segments, spec, &cfg.labels, pool.as_ref())
    };
    let train = side(&train_ids, &cfg.augment_spec())?;
    let val = side(&val_ids, &cfg.validation_spec())?;
    if skipped > 0 {
        log::warn!("skipped {skipped} collar marks closer than {} samples to a waveform end", cfg.window_len);
    }
    Ok(Dataset { train, val, train_waveforms: train_ids, val_waveforms: val_ids, skipped_marks: skipped })
}

/// Binarizes predictions and targets at their thresholds and returns the F1
/// over all positions (0 when precision + recall is 0).
pub fn classifier_f1(probs: &[f64], labels: &[f64], prob_threshold: f64, label_threshold: f64) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &l) in probs.iter().zip(labels) {
        match (p > prob_threshold, l >= label_threshold) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fn_) as f64;
    2.0 * p * r / (p + r)
}

/// Step-wise area under the precision-recall curve: thresholds at every
/// distinct score, descending, summing `precision * delta_recall`.
/// Returns 0 when there are no positives.
pub fn auc_pr(scores: &[f64], labels: &[bool]) -> f64 {
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..scores.len().min(labels.len())).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += precision * (recall - prev_recall);
        prev_recall = recall;
    }
    area
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub train_ce: f64,
    pub val_ce: f64,
    pub val_f1: f64,
    pub val_auc_pr: f64,
}

impl MetricsRow {
    pub fn csv_line(&self) -> String {
        format!("{},{},{},{},{}", self.epoch, self.train_ce, self.val_ce, self.val_f1, self.val_auc_pr)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the final epoch.
    pub last: ModelParams,
    /// Parameters from the epoch with the highest validation F1 (latest on ties).
    pub best: ModelParams,
    pub best_epoch: usize,
    pub metrics: Vec<MetricsRow>,
}

/// Mean validation CE plus F1 and AUC-PR over every validation position.
pub fn evaluate(model: &ModelParams, windows: &[SampleWindow]) -> Result<(f64, f64, f64)> {
    if windows.is_empty() {
        return Err(Error::InvalidTrainConfig("validation set is empty".into()));
    }
    let mut ce = 0.0;
    let mut probs = Vec::with_capacity(windows.len() * model.window_len());
    let mut targets = Vec::with_capacity(probs.capacity());
    for chunk in windows.chunks(INFER_CHUNK) {
        let x = batch_from_windows::<f32, _>(&chunk.iter().map(|w| &w.samples[..]).collect::<Vec<_>>())?;
        let logits = model.forward(&x)?;
        let t: Vec<f64> = chunk.iter().flat_map(|w| w.targets.iter().copied()).collect();
        let (loss, _) = bce_loss(&logits, &t)?;
        ce += loss * t.len() as f64;
        probs.extend(logits.data().iter().map(|&z| layers::sigmoid(z as f64)));
        targets.extend(t);
    }
    let ce = ce / targets.len() as f64;
    let f1 = classifier_f1(&probs, &targets, 0.5, 0.5);
    let binary: Vec<bool> = targets.iter().map(|&t| t >= 0.5).collect();
    Ok((ce, f1, auc_pr(&probs, &binary)))
}

fn train_epoch(model: &mut ModelParams, adam: &mut AdamState, data: &[SampleWindow], order: &[usize], batch_size: usize) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for batch in order.chunks(batch_size) {
        let x = batch_from_windows::<f32, _>(&batch.iter().map(|&i| &data[i].samples[..]).collect::<Vec<_>>())?;
        let targets: Vec<f64> = batch.iter().flat_map(|&i| data[i].targets.iter().copied()).collect();
        let (logits, trace) = model.forward_train(&x)?;
        let (loss, dlogits) = bce_loss(&logits, &targets)?;
        let grads = model.backward(trace, &dlogits)?;
        adam.step(model.trainable_mut(), &grads)?;
        total += loss * targets.len() as f64;
        count += targets.len();
    }
    Ok(total / count as f64)
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

/// Runs the epoch loop. Writes the metrics CSV and the best/last
/// checkpoints when the config names their locations.
pub fn train(cfg: &TrainConfig, data: &Dataset) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::InvalidTrainConfig("training set is empty".into()));
    }
    if data.val.is_empty() {
        return Err(Error::InvalidTrainConfig("validation set is empty".into()));
    }
    let mut model = Model::new(cfg.arch, cfg.window_len, cfg.seed)?;
    let mut adam = AdamState::new(cfg.adam)?;
    let mut metrics_out = match &cfg.metrics_path {
        Some(p) => {
            create_parent(p)?;
            let mut f = BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?);
            writeln!(f, "{METRICS_HEADER}").map_err(|e| Error::io(p, e))?;
            Some((p, f))
        }
        None => None,
    };
    if let Some(dir) = &cfg.checkpoint_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::NEG_INFINITY, 0usize, model.clone());
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut stream_rng(cfg.seed, SHUFFLE_STREAM, epoch as u64));
        let train_ce = train_epoch(&mut model, &mut adam, &data.train, &order, cfg.batch_size)?;
        let (val_ce, val_f1, val_auc_pr) = evaluate(&model, &data.val)?;
        let row = MetricsRow { epoch, train_ce, val_ce, val_f1, val_auc_pr };
        log::info!("epoch {epoch:>3}  train_ce {train_ce:.5}  val_ce {val_ce:.5}  val_f1 {val_f1:.4}  val_auc_pr {val_auc_pr:.4}");
        if let Some((p, f)) = metrics_out.as_mut() {
            writeln!(f, "{}", row.csv_line()).and_then(|_| f.flush()).map_err(|e| Error::io(p.as_path(), e))?;
        }
        metrics.push(row);
        if val_f1 >= best.0 {
            best = (val_f1, epoch, model.clone());
            if let Some(dir) = &cfg.checkpoint_dir {
                checkpoint::save(&model, dir.join(BEST_CHECKPOINT))?;
            }
        }
    }
    if let Some(dir) = &cfg.checkpoint_dir {
        checkpoint::save(&model, dir.join(LAST_CHECKPOINT))?;
    }
    Ok(TrainOutcome { last: model, best: best.2, best_epoch: best.1, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::CropMode;
    use crate::synth::{generate, SynthSpec};

    fn waveform(seed: u64) -> Waveform {
        generate(&SynthSpec { seed, duration_s: 4.0, collar_spacing_s: 0.2, window_len: 64, noise_std: 0.02, ..SynthSpec::default() })
            .unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            arch: ArchName::Man,
            window_len: 64,
            augment: AugmentSpec { crop_margin: 8, ..AugmentSpec::default() },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn split_is_three_to_one_and_disjoint() {
        let (tr, va) = split_waveforms(8, 0.75, 3);
        assert_eq!((tr.len(), va.len()), (6, 2));
        let mut all: Vec<usize> = tr.iter().chain(&va).copied().collect();
        all.sort();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
        assert_eq!(split_waveforms(1, 0.75, 0), (vec![0], vec![]));
        assert_eq!(split_waveforms(2, 0.99, 0).1.len(), 1);
    }

    #[test]
    fn one_waveform_ten_marks_twenty_draws() {
        let marks: Vec<usize> = (1..=10).map(|i| i * 100).collect();
        let w = Waveform::new((0..1100).map(|i| (i as f64 * 0.3).sin()).collect(), 1000.0, Some(marks)).unwrap();
        let cfg = TrainConfig { augment: AugmentSpec { multi_sampling: 20, crop_margin: 8, ..AugmentSpec::default() }, ..small_cfg() };
        let ds = build_dataset(&[w], &cfg).unwrap();
        assert_eq!(ds.train.len(), 200);
        assert_eq!(ds.skipped_marks, 0);
        assert!(ds.val.is_empty());
        assert!(ds.train.iter().all(|s| s.samples.len() == 64 && s.targets.len() == 64));
    }

    #[test]
    fn fixed_center_window_peaks_at_half_width() {
        let cfg = TrainConfig { augment: AugmentSpec { crop: CropMode::FixedCenter, ..small_cfg().augment }, ..small_cfg() };
        let ds = build_dataset(&[waveform(1), waveform(2)], &cfg).unwrap();
        for s in ds.train.iter().chain(&ds.val) {
            assert_eq!(s.targets[32], 1.0);
            assert!(s.marks.contains(&32));
        }
    }

    #[test]
    fn edge_marks_are_skipped_and_counted() {
        let w = Waveform::new((0..300).map(|i| i as f64).collect(), 1000.0, Some(vec![10, 150, 290])).unwrap();
        let ds = build_dataset(&[w], &small_cfg()).unwrap();
        assert_eq!(ds.skipped_marks, 2);
        assert_eq!(ds.train.len(), 1);
    }

    #[test]
    fn validation_waveforms_are_disjoint_from_training() {
        let ws: Vec<Waveform> = (0..4).map(waveform).collect();
        let ds = build_dataset(&ws, &small_cfg()).unwrap();
        assert_eq!(ds.train_waveforms.len(), 3);
        for v in &ds.val {
            assert!(ds.val_waveforms.contains(&(v.waveform_id as usize)));
            assert!(!ds.train_waveforms.contains(&(v.waveform_id as usize)));
        }
    }

    #[test]
    fn dataset_is_independent_of_workers() {
        let ws: Vec<Waveform> = (0..4).map(waveform).collect();
        let mut cfg = small_cfg();
        cfg.augment.multi_sampling = 3;
        cfg.augment.time_scale_range = Some([0.8, 1.25]);
        cfg.augment.noise_sigma = 0.1;
        let a = build_dataset(&ws, &cfg).unwrap();
        cfg.workers = 4;
        let b = build_dataset(&ws, &cfg).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.val, b.val);
    }

    #[test]
    fn classifier_f1_examples() {
        assert_eq!(classifier_f1(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0], 0.5, 0.5), 1.0);
        assert_eq!(classifier_f1(&[0.1, 0.2, 0.0], &[1.0, 0.0, 1.0], 0.5, 0.5), 0.0);
        assert!((classifier_f1(&[0.9, 0.1, 0.6], &[1.0, 0.0, 0.0], 0.5, 0.5) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn auc_pr_examples() {
        assert_eq!(auc_pr(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]), 1.0);
        assert!((auc_pr(&[0.5; 4], &[true, false, false, false]) - 0.25).abs() < 1e-12);
        // thresholds 0.9: P=1,R=.5; 0.8: P=.5,R=.5; 0.3: P=2/3,R=1
        assert!((auc_pr(&[0.9, 0.8, 0.3], &[true, false, true]) - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
        assert_eq!(auc_pr(&[0.3, 0.2], &[false, false]), 0.0);
    }

    #[test]
    fn smoke_two_epochs_writes_metrics_and_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let ws: Vec<Waveform> = (0..4).map(waveform).collect();
        let cfg = TrainConfig {
            epochs: 2,
            checkpoint_dir: Some(dir.path().join("ckpt")),
            metrics_path: Some(dir.path().join("metrics.csv")),
            ..small_cfg()
        };
        let ds = build_dataset(&ws, &cfg).unwrap();
        let out = train(&cfg, &ds).unwrap();
        let csv = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], METRICS_HEADER);
        assert!(out.metrics.iter().all(|r| r.train_ce.is_finite() && (0.0..=1.0).contains(&r.val_f1)));
        let best = checkpoint::load(dir.path().join("ckpt").join(BEST_CHECKPOINT)).unwrap();
        assert_eq!(checkpoint::encode(&best), checkpoint::encode(&out.best));
        assert!(dir.path().join("ckpt").join(LAST_CHECKPOINT).exists());

        let again = train(&TrainConfig { checkpoint_dir: None, metrics_path: None, ..cfg }, &ds).unwrap();
        assert_eq!(again.metrics, out.metrics);
    }

    #[test]
    fn overfits_a_single_batch() {
        // Soft targets cannot be driven to zero loss; the floor is their entropy.
        let ws: Vec<Waveform> = (0..4).map(waveform).collect();
        let cfg = small_cfg();
        let data = build_dataset(&ws, &cfg).unwrap();
        let batch: Vec<SampleWindow> = data.train.into_iter().take(8).collect();
        let entropy = batch
            .iter()
            .flat_map(|w| w.targets.iter())
            .map(|&y| crate::nn::loss::bce_with_logits_elem(((y + 1e-12) / (1.0 - y + 1e-12)).ln(), y))
            .sum::<f64>()
            / (8 * cfg.window_len) as f64;
        let mut model = Model::new(cfg.arch, cfg.window_len, 1).unwrap();
        let mut adam = AdamState::new(AdamConfig { lr: 1e-3, ..AdamConfig::default() }).unwrap();
        let order: Vec<usize> = (0..batch.len()).collect();
        let first = train_epoch(&mut model, &mut adam, &batch, &order, 8).unwrap();
        let mut last = first;
        for _ in 1..200 {
            last = train_epoch(&mut model, &mut adam, &batch, &order, 8).unwrap();
        }
        assert!(last - entropy < 0.05 * (first - entropy), "excess loss {} -> {}", first - entropy, last - entropy);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(TrainConfig { split_fraction: 1.0, ..small_cfg() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..small_cfg() }.validate().is_err());
        assert!(TrainConfig { window_len: 8, ..small_cfg() }.validate().is_err());
    }
}
