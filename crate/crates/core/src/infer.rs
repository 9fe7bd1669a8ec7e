//! Whole-waveform recognition: sliding-window inference with overlap
//! averaging, threshold post-processing, and neighborhood matching.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{batch_from_windows, ModelParams};
use crate::signal::{normalize, NormalizationSpec, Waveform};

/// Anything that maps fixed-length windows to per-sample probabilities.
pub trait WindowClassifier: Sync {
    fn window_len(&self) -> usize;

    /// One probability row of length `window_len` per input window.
    fn predict(&self, windows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;
}

impl WindowClassifier for ModelParams {
    fn window_len(&self) -> usize {
        ModelParams::window_len(self)
    }

    fn predict(&self, windows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if windows.is_empty() {
            return Ok(Vec::new());
        }
        self.predict_proba(&batch_from_windows::<f32, _>(windows)?)
    }
}

/// Windows are pushed through the classifier in chunks of this many; the
/// chunking is fixed so results do not depend on the worker count.
pub const INFER_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    pub values: Vec<f64>,
    pub window_len: usize,
}

/// Window starts at multiples of `floor(W/2)`, plus one right-aligned
/// window when the stride grid does not reach the end.
pub fn window_starts(len: usize, window_len: usize) -> Vec<usize> {
    if len <= window_len {
        return vec![0];
    }
    let stride = (window_len / 2).max(1);
    let mut starts: Vec<usize> = (0..).map(|k| k * stride).take_while(|&s| s + window_len <= len).collect();
    let last = *starts.last().expect("len > window_len gives at least one start");
    if last + window_len < len {
        starts.push(len - window_len);
    }
    starts
}

fn edge_padded(samples: &[f64], window_len: usize) -> (Vec<f64>, usize) {
    let len = samples.len();
    let left = (window_len - len) / 2;
    let first = samples[0];
    let last = samples[len - 1];
    let padded = (0..window_len)
        .map(|i| if i < left { first } else if i < left + len { samples[i - left] } else { last })
        .collect();
    (padded, left)
}

/// Probability map over the whole waveform: each sample gets the mean of
/// every covering window's output. Waveforms shorter than one window are
/// edge-replicated to fill a single window and the map is truncated back.
pub fn sliding_infer<C: WindowClassifier + ?Sized>(clf: &C, samples: &[f64], workers: usize) -> Result<ProbabilityMap> {
    let w = clf.window_len();
    if samples.is_empty() {
        return Err(Error::InvalidWaveform("cannot infer on an empty waveform".into()));
    }
    if samples.len() < w {
        let (padded, left) = edge_padded(samples, w);
        let out = clf.predict(&[padded])?;
        let row = out.into_iter().next().ok_or_else(|| Error::ShapeMismatch("classifier returned no rows".into()))?;
        return Ok(ProbabilityMap { values: row[left..left + samples.len()].to_vec(), window_len: w });
    }
    let starts = window_starts(samples.len(), w);
    let windows: Vec<Vec<f64>> = starts.iter().map(|&s| samples[s..s + w].to_vec()).collect();
    let run = |chunk: &[Vec<f64>]| clf.predict(chunk);
    let chunks: Vec<Result<Vec<Vec<f64>>>> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| windows.par_chunks(INFER_CHUNK).map(run).collect())
    } else {
        windows.chunks(INFER_CHUNK).map(run).collect()
    };
    let mut sum = vec![0.0f64; samples.len()];
    let mut count = vec![0u32; samples.len()];
    let mut rows = Vec::with_capacity(starts.len());
    for chunk in chunks {
        rows.extend(chunk?);
    }
    if rows.len() != starts.len() {
        return Err(Error::ShapeMismatch(format!("classifier returned {} rows for {} windows", rows.len(), starts.len())));
    }
    for (&s, row) in starts.iter().zip(&rows) {
        if row.len() != w {
            return Err(Error::ShapeMismatch(format!("classifier row of length {} for window {w}", row.len())));
        }
        for (i, &p) in row.iter().enumerate() {
            sum[s + i] += p;
            count[s + i] += 1;
        }
    }
    let values = sum.iter().zip(&count).map(|(&s, &c)| s / c as f64).collect();
    Ok(ProbabilityMap { values, window_len: w })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    pub center: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub collars: Vec<usize>,
    pub threshold: f64,
    pub regions: Vec<Region>,
}

/// Maximal runs of `values > threshold` at least `min_width` long become
/// regions whose centers `floor((start + end) / 2)` are the collar marks.
pub fn postprocess(values: &[f64], threshold: f64, min_width: usize) -> Result<DetectionResult> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let mut regions = Vec::new();
    let mut run_start = None;
    for i in 0..=values.len() {
        let above = i < values.len() && values[i] > threshold;
        match (above, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                let end = i - 1;
                if end - s + 1 >= min_width.max(1) {
                    regions.push(Region { start: s, end, center: (s + end) / 2 });
                }
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(DetectionResult { collars: regions.iter().map(|r| r.center).collect(), threshold, regions })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    #[serde(rename = "p")]
    pub precision: f64,
    #[serde(rename = "r")]
    pub recall: f64,
    pub f1: f64,
    pub tolerance: usize,
}

impl MatchReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tolerance: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        MatchReport { tp, fp, fn_, precision, recall, f1, tolerance }
    }
}

fn is_sorted(xs: &[usize]) -> bool {
    xs.windows(2).all(|p| p[0] <= p[1])
}

/// Greedy one-to-one matching: predictions in increasing order each take
/// the nearest unmatched truth within `tolerance` (lower index on ties).
pub fn match_collars(pred: &[usize], truth: &[usize], tolerance: usize) -> Result<MatchReport> {
    if !is_sorted(pred) || !is_sorted(truth) {
        return Err(Error::UnsortedInput);
    }
    let mut used = vec![false; truth.len()];
    let mut tp = 0;
    for &p in pred {
        let lo = truth.partition_point(|&t| t + tolerance < p);
        let best = (lo..truth.len())
            .take_while(|&j| truth[j] <= p + tolerance)
            .filter(|&j| !used[j])
            .min_by_key(|&j| (truth[j] as i64 - p as i64).unsigned_abs());
        if let Some(j) = best {
            used[j] = true;
            tp += 1;
        }
    }
    Ok(MatchReport::from_counts(tp, pred.len() - tp, truth.len() - tp, tolerance))
}

/// Post-processing and matching settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub threshold: f64,
    pub min_width: usize,
    /// Matching neighborhood, in samples either side of a truth mark.
    pub tolerance: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig { threshold: 0.5, min_width: 3, tolerance: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct Recognition {
    pub map: ProbabilityMap,
    pub detection: DetectionResult,
    /// Present when the waveform carries annotations.
    pub report: Option<MatchReport>,
}

/// Normalize, infer, threshold and (if annotated) score one waveform.
pub fn recognize<C: WindowClassifier + ?Sized>(
    clf: &C,
    waveform: &Waveform,
    norm: &NormalizationSpec,
    cfg: &InferenceConfig,
    workers: usize,
) -> Result<Recognition> {
    let normalized = normalize(waveform, norm)?;
    let map = sliding_infer(clf, normalized.samples(), workers)?;
    let detection = postprocess(&map.values, cfg.threshold, cfg.min_width)?;
    let report = match waveform.collar_marks() {
        Some(truth) => Some(match_collars(&detection.collars, truth, cfg.tolerance)?),
        None => None,
    };
    Ok(Recognition { map, detection, report })
}

pub fn write_probability_csv(map: &ProbabilityMap, out: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
    writeln!(out, "index,probability")?;
    for (i, p) in map.values.iter().enumerate() {
        writeln!(out, "{i},{p}")?;
    }
    Ok(())
}

pub fn read_probability_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("index,probability") {
        return Err(Error::format(path, "missing `index,probability` header"));
    }
    let mut values = Vec::new();
    for (k, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let (idx, p) = line.split_once(',').ok_or_else(|| Error::format(path, format!("bad row {line:?}")))?;
        let idx: usize = idx.trim().parse().map_err(|_| Error::format(path, format!("bad index in {line:?}")))?;
        if idx != k {
            return Err(Error::format(path, format!("expected index {k}, found {idx}")));
        }
        values.push(p.trim().parse().map_err(|_| Error::format(path, format!("bad probability in {line:?}")))?);
    }
    Ok(values)
}

pub fn write_detections_csv(det: &DetectionResult, out: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
    writeln!(out, "center,start,end")?;
    for r in &det.regions {
        writeln!(out, "{},{},{}", r.center, r.start, r.end)?;
    }
    Ok(())
}

/// Collar centers from a detections CSV.
pub fn read_detections_csv(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("center,start,end") {
        return Err(Error::format(path, "missing `center,start,end` header"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            line.split(',')
                .next()
                .and_then(|c| c.trim().parse().ok())
                .ok_or_else(|| Error::format(path, format!("bad row {line:?}")))
        })
        .collect()
}
