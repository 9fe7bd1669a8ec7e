//! Waveform representation, CCLW file I/O and the normalization schemes.
//!
//! A CCLW waveform is stored as two files sharing a stem: `<stem>.json`
//! holds the manifest and `<stem>.bin` holds `n_samples` little-endian
//! `f32` values. Signal math runs in `f64`; the on-disk payload is `f32`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Statistics below this are treated as zero.
pub const DEGENERATE_TOL: f64 = 1e-9;

/// A uniformly sampled CCL voltage trace with optional collar annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    collar_marks: Option<Vec<usize>>,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, collar_marks: Option<Vec<usize>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidWaveform("samples must be non-empty".into()));
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidWaveform(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if let Some(marks) = &collar_marks {
            if marks.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::InvalidWaveform("collar marks must be strictly increasing".into()));
            }
            if let Some(&last) = marks.last() {
                if last >= samples.len() {
                    return Err(Error::IndexOutOfRange { index: last, len: samples.len() });
                }
            }
        }
        Ok(Waveform { samples, sample_rate_hz, collar_marks })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn collar_marks(&self) -> Option<&[usize]> {
        self.collar_marks.as_deref()
    }

    /// Same rate and marks, new samples. Length must not change.
    fn with_samples(&self, samples: Vec<f64>) -> Waveform {
        debug_assert_eq!(samples.len(), self.samples.len());
        Waveform {
            samples,
            sample_rate_hz: self.sample_rate_hz,
            collar_marks: self.collar_marks.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationKind {
    Standardization,
    #[serde(rename = "minmax_01")]
    MinMax01,
    MinmaxSym,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeSource {
    WaveformDynamic,
    AdcFullScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizationSpec {
    pub kind: NormalizationKind,
    pub range_source: RangeSource,
    pub adc_min: f64,
    pub adc_max: f64,
}

impl Default for NormalizationSpec {
    fn default() -> Self {
        NormalizationSpec {
            kind: NormalizationKind::Standardization,
            range_source: RangeSource::WaveformDynamic,
            adc_min: 0.0,
            adc_max: 65535.0,
        }
    }
}

impl NormalizationSpec {
    pub fn standardization() -> Self {
        Self::default()
    }

    pub fn minmax(kind: NormalizationKind) -> Self {
        NormalizationSpec { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.range_source == RangeSource::AdcFullScale && !(self.adc_min < self.adc_max) {
            return Err(Error::InvalidNormalization(format!(
                "adc_min ({}) must be below adc_max ({})",
                self.adc_min, self.adc_max
            )));
        }
        Ok(())
    }
}

fn mean_and_population_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Z-score normalization with the population standard deviation.
pub fn standardize(w: &Waveform) -> Result<Waveform> {
    let (mean, std) = mean_and_population_std(&w.samples);
    if std <= DEGENERATE_TOL {
        return Err(Error::ZeroVariance { std });
    }
    Ok(w.with_samples(w.samples.iter().map(|x| (x - mean) / std).collect()))
}

/// Affine map of `[min, max]` onto `[0, 1]` or `[-1, 1]`.
///
/// The source range comes from the waveform itself or from the ADC full
/// scale, per `spec.range_source`. Values are clamped to the target interval
/// so that ADC-range scaling of an out-of-range sample cannot escape it.
pub fn minmax_scale(w: &Waveform, spec: &NormalizationSpec) -> Result<Waveform> {
    spec.validate()?;
    let (lo, hi) = match spec.kind {
        NormalizationKind::MinMax01 => (0.0, 1.0),
        NormalizationKind::MinmaxSym => (-1.0, 1.0),
        NormalizationKind::Standardization => {
            return Err(Error::InvalidNormalization("minmax_scale needs a min-max kind".into()))
        }
    };
    let (min, max) = match spec.range_source {
        RangeSource::WaveformDynamic => w
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x))),
        RangeSource::AdcFullScale => (spec.adc_min, spec.adc_max),
    };
    let range = max - min;
    if range <= DEGENERATE_TOL {
        return Err(Error::ZeroRange { range });
    }
    let scaled = w
        .samples
        .iter()
        .map(|&x| {
            if x <= min {
                lo
            } else if x >= max {
                hi
            } else {
                (lo + (x - min) / range * (hi - lo)).clamp(lo, hi)
            }
        })
        .collect();
    Ok(w.with_samples(scaled))
}

/// Applies whichever normalization `spec` selects to the full waveform.
pub fn normalize(w: &Waveform, spec: &NormalizationSpec) -> Result<Waveform> {
    match spec.kind {
        NormalizationKind::Standardization => standardize(w),
        _ => minmax_scale(w, spec),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    sample_rate_hz: f64,
    n_samples: usize,
    dtype: String,
    collar_marks: Vec<usize>,
}

/// Returns the `(manifest, payload)` paths for a stem. A trailing `.json`
/// or `.bin` extension on the argument is ignored.
pub fn cclw_paths(stem: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let stem = stem.as_ref();
    let base = match stem.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("bin") => stem.with_extension(""),
        _ => stem.to_path_buf(),
    };
    let mut json = base.clone().into_os_string();
    json.push(".json");
    let mut bin = base.into_os_string();
    bin.push(".bin");
    (PathBuf::from(json), PathBuf::from(bin))
}

pub fn write_waveform(w: &Waveform, stem: impl AsRef<Path>) -> Result<()> {
    let (json_path, bin_path) = cclw_paths(stem);
    let manifest = Manifest {
        format: "cclw".into(),
        version: 1,
        sample_rate_hz: w.sample_rate_hz,
        n_samples: w.len(),
        dtype: "f32le".into(),
        collar_marks: w.collar_marks.clone().unwrap_or_default(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))?;
    let mut payload = Vec::with_capacity(w.len() * 4);
    for &x in &w.samples {
        payload.extend_from_slice(&(x as f32).to_le_bytes());
    }
    fs::write(&bin_path, payload).map_err(|e| Error::io(&bin_path, e))?;
    Ok(())
}

pub fn read_waveform(stem: impl AsRef<Path>) -> Result<Waveform> {
    let (json_path, bin_path) = cclw_paths(stem);
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::format(&json_path, e.to_string()))?;
    if manifest.format != "cclw" {
        return Err(Error::format(&json_path, format!("bad format tag {:?}", manifest.format)));
    }
    if manifest.version != 1 {
        return Err(Error::format(&json_path, format!("unsupported version {}", manifest.version)));
    }
    if manifest.dtype != "f32le" {
        return Err(Error::format(&json_path, format!("unsupported dtype {:?}", manifest.dtype)));
    }
    let payload = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    if payload.len() % 4 != 0 || payload.len() / 4 != manifest.n_samples {
        return Err(Error::format(
            &bin_path,
            format!("manifest declares {} samples but payload holds {} bytes", manifest.n_samples, payload.len()),
        ));
    }
    let samples = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Waveform::new(samples, manifest.sample_rate_hz, Some(manifest.collar_marks))
        .map_err(|e| Error::format(&json_path, e.to_string()))
}

/// Parses CSV text with one value per line or comma-separated values.
pub fn parse_csv_samples(text: &str, sample_rate_hz: f64) -> Result<Waveform> {
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        for field in line.split(',') {
            let field = field.trim();
            if field.is_empty() {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Format {
                path: PathBuf::from("<csv>"),
                msg: format!("line {}: cannot parse {field:?} as a number", lineno + 1),
            })?;
            samples.push(v);
        }
    }
    Waveform::new(samples, sample_rate_hz, None)
}

pub fn import_csv(path: impl AsRef<Path>, sample_rate_hz: f64) -> Result<Waveform> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv_samples(&text, sample_rate_hz).map_err(|e| match e {
        Error::Format { msg, .. } => Error::format(path, msg),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wf(xs: &[f64]) -> Waveform {
        Waveform::new(xs.to_vec(), 1000.0, None).unwrap()
    }

    #[test]
    fn constant_input_is_zero_variance() {
        assert!(matches!(standardize(&wf(&[1.0, 1.0, 1.0, 1.0])), Err(Error::ZeroVariance { .. })));
    }

    #[test]
    fn standardize_worked_example() {
        let out = standardize(&wf(&[0.0, 2.0, 4.0, 6.0])).unwrap();
        let s5 = 5f64.sqrt();
        let expected = [-3.0 / s5, -1.0 / s5, 1.0 / s5, 3.0 / s5];
        for (a, b) in out.samples().iter().zip(expected) {
            assert!((a - b).abs() < 1e-4);
        }
        assert!((out.samples()[0] + 1.3416).abs() < 1e-4);
    }

    #[test]
    fn standardize_preserves_marks_and_rate() {
        let w = Waveform::new(vec![0.0, 5.0, 1.0, 3.0], 250.0, Some(vec![1, 3])).unwrap();
        let out = standardize(&w).unwrap();
        assert_eq!(out.collar_marks(), Some(&[1usize, 3][..]));
        assert_eq!(out.sample_rate_hz(), 250.0);
    }

    #[test]
    fn standardized_input_is_fixed_point() {
        let w = standardize(&wf(&[0.3, -1.2, 4.0, 2.2, 0.0])).unwrap();
        let again = standardize(&w).unwrap();
        for (a, b) in w.samples().iter().zip(again.samples()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn minmax_examples() {
        let sym = minmax_scale(&wf(&[0.0, 2.0, 4.0]), &NormalizationSpec::minmax(NormalizationKind::MinmaxSym)).unwrap();
        assert_eq!(sym.samples(), &[-1.0, 0.0, 1.0]);
        let unit = minmax_scale(&wf(&[5.0, 5.0, 10.0]), &NormalizationSpec::minmax(NormalizationKind::MinMax01)).unwrap();
        assert_eq!(unit.samples(), &[0.0, 0.0, 1.0]);
        assert!(matches!(
            minmax_scale(&wf(&[2.0, 2.0]), &NormalizationSpec::minmax(NormalizationKind::MinMax01)),
            Err(Error::ZeroRange { .. })
        ));
    }

    #[test]
    fn minmax_adc_range() {
        let spec = NormalizationSpec {
            kind: NormalizationKind::MinmaxSym,
            range_source: RangeSource::AdcFullScale,
            adc_min: 0.0,
            adc_max: 4095.0,
        };
        let out = minmax_scale(&wf(&[0.0, 4095.0, 2047.5]), &spec).unwrap();
        assert_eq!(out.samples()[0], -1.0);
        assert_eq!(out.samples()[1], 1.0);
        assert!(out.samples()[2].abs() < 1e-12);
        let bad = NormalizationSpec { adc_min: 5.0, adc_max: 5.0, ..spec };
        assert!(matches!(minmax_scale(&wf(&[1.0, 2.0]), &bad), Err(Error::InvalidNormalization(_))));
    }

    #[test]
    fn waveform_invariants_enforced() {
        assert!(Waveform::new(vec![], 1000.0, None).is_err());
        assert!(Waveform::new(vec![1.0], 0.0, None).is_err());
        assert!(Waveform::new(vec![1.0, 2.0], 1000.0, Some(vec![1, 1])).is_err());
        assert!(Waveform::new(vec![1.0, 2.0], 1000.0, Some(vec![2])).is_err());
    }

    #[test]
    fn csv_import_parses_both_layouts() {
        let w = parse_csv_samples("0.1,0.2,0.3", 1000.0).unwrap();
        assert_eq!(w.samples(), &[0.1, 0.2, 0.3]);
        assert_eq!(w.sample_rate_hz(), 1000.0);
        let w = parse_csv_samples("1\n2\n\n3\n", 500.0).unwrap();
        assert_eq!(w.len(), 3);
        assert!(parse_csv_samples("1,abc", 1000.0).is_err());
    }

    #[test]
    fn cclw_round_trip_and_length_check() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("well");
        let w = Waveform::new(vec![0.5, -1.25, 3.0, 0.125], 1000.0, Some(vec![0, 2])).unwrap();
        write_waveform(&w, &stem).unwrap();
        let back = read_waveform(&stem).unwrap();
        assert_eq!(back, w);

        let (json, _) = cclw_paths(&stem);
        let text = fs::read_to_string(&json).unwrap().replace("\"n_samples\": 4", "\"n_samples\": 5");
        fs::write(&json, text).unwrap();
        assert!(matches!(read_waveform(&stem), Err(Error::Format { .. })));
    }

    #[test]
    fn cclw_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("w");
        write_waveform(&wf(&[1.0, 2.0]), &stem).unwrap();
        let (json, _) = cclw_paths(&stem);
        let text = fs::read_to_string(&json).unwrap().replace("\"cclw\"", "\"wav\"");
        fs::write(&json, text).unwrap();
        assert!(matches!(read_waveform(&stem), Err(Error::Format { .. })));
        assert!(matches!(read_waveform(dir.path().join("missing")), Err(Error::Io { .. })));
    }

    fn arb_samples() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3f64..1e3, 2..64).prop_filter("non-degenerate", |v| {
            let (_, s) = mean_and_population_std(v);
            s > 1e-3
        })
    }

    proptest! {
        #[test]
        fn standardize_is_idempotent(xs in arb_samples()) {
            let once = standardize(&wf(&xs)).unwrap();
            let twice = standardize(&once).unwrap();
            for (a, b) in once.samples().iter().zip(twice.samples()) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }

        #[test]
        fn normalizations_are_monotone_and_bounded(xs in arb_samples()) {
            let w = wf(&xs);
            for spec in [
                NormalizationSpec::standardization(),
                NormalizationSpec::minmax(NormalizationKind::MinMax01),
                NormalizationSpec::minmax(NormalizationKind::MinmaxSym),
            ] {
                let out = normalize(&w, &spec).unwrap();
                for i in 0..xs.len() {
                    for j in 0..xs.len() {
                        if xs[i] < xs[j] {
                            prop_assert!(out.samples()[i] < out.samples()[j]);
                        }
                    }
                }
                let (lo, hi) = match spec.kind {
                    NormalizationKind::MinMax01 => (0.0, 1.0),
                    NormalizationKind::MinmaxSym => (-1.0, 1.0),
                    NormalizationKind::Standardization => (f64::NEG_INFINITY, f64::INFINITY),
                };
                prop_assert!(out.samples().iter().all(|&v| v >= lo && v <= hi));
            }
        }

        #[test]
        fn file_round_trip_is_identity(xs in prop::collection::vec(-1e6f32..1e6, 1..200), rate in 1.0f64..1e5) {
            let dir = tempfile::tempdir().unwrap();
            let stem = dir.path().join("p");
            let n = xs.len();
            let marks: Vec<usize> = (0..n).step_by(7).collect();
            let w = Waveform::new(xs.iter().map(|&x| x as f64).collect(), rate, Some(marks)).unwrap();
            write_waveform(&w, &stem).unwrap();
            prop_assert_eq!(read_waveform(&stem).unwrap(), w);
        }
    }
}
