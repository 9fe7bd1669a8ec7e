//! Geometric and stochastic transforms that expand each centered segment
//! into training windows.
//!
//! The chain is fixed: time scaling, cropping, amplitude jitter, noise.
//! Flipping is deliberately not offered: reversing the voltage or time axis
//! produces collar responses that cannot occur physically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TIME_SCALE_RANGE: [f64; 2] = [0.8, 1.25];
pub const DEFAULT_AMP_JITTER_RANGE: [f64; 2] = [0.7, 1.3];
pub const MIN_SCALE_FACTOR: f64 = 0.5;
pub const MAX_SCALE_FACTOR: f64 = 2.0;
pub const MIN_SCALE_LEN: usize = 16;
/// Half-width of the windowed-sinc kernel (64 taps in total).
pub const SINC_HALF_TAPS: usize = 32;

/// Where a segment came from; feeds per-draw seed derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Provenance {
    pub waveform_id: u64,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub samples: Vec<f64>,
    /// Mark indices relative to the segment start, strictly increasing.
    pub marks: Vec<usize>,
    /// The mark the segment was centered on, if it is still inside.
    pub anchor: Option<usize>,
    pub provenance: Provenance,
}

impl Segment {
    pub fn new(samples: Vec<f64>, marks: Vec<usize>, anchor: Option<usize>, provenance: Provenance) -> Result<Self> {
        let len = samples.len();
        if let Some(&bad) = marks.iter().chain(anchor.iter()).find(|&&m| m >= len) {
            return Err(Error::IndexOutOfRange { index: bad, len });
        }
        if marks.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidAugmentSpec("segment marks must be strictly increasing".into()));
        }
        Ok(Segment { samples, marks, anchor, provenance })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CropMode {
    Random,
    FixedCenter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSpec {
    /// `None` disables time scaling.
    pub time_scale_range: Option<[f64; 2]>,
    pub crop: CropMode,
    pub window_len: usize,
    /// Minimum distance of the kept mark from either window edge under
    /// random cropping.
    pub crop_margin: usize,
    /// `None` disables amplitude jitter.
    pub amp_jitter_range: Option<[f64; 2]>,
    /// Noise std as a fraction of the segment std; 0 disables.
    pub noise_sigma: f64,
    pub multi_sampling: usize,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            time_scale_range: None,
            crop: CropMode::Random,
            window_len: 512,
            crop_margin: 30,
            amp_jitter_range: None,
            noise_sigma: 0.0,
            multi_sampling: 1,
            seed: 0,
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite()) {
        return Err(Error::InvalidAugmentSpec(format!("{name} must satisfy 0 < lo <= hi, got {r:?}")));
    }
    Ok(())
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(Error::InvalidAugmentSpec(format!("window_len must be >= 2, got {}", self.window_len)));
        }
        if self.multi_sampling < 1 {
            return Err(Error::InvalidAugmentSpec("multi_sampling must be >= 1".into()));
        }
        if let Some(r) = self.time_scale_range {
            check_range("time_scale_range", r)?;
            if r[0] < MIN_SCALE_FACTOR || r[1] > MAX_SCALE_FACTOR {
                return Err(Error::InvalidAugmentSpec(format!(
                    "time_scale_range {r:?} exceeds [{MIN_SCALE_FACTOR}, {MAX_SCALE_FACTOR}]"
                )));
            }
        }
        if let Some(r) = self.amp_jitter_range {
            check_range("amp_jitter_range", r)?;
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidAugmentSpec(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if 2 * self.crop_margin >= self.window_len {
            return Err(Error::InvalidAugmentSpec(format!(
                "crop_margin {} leaves no room in window {}",
                self.crop_margin, self.window_len
            )));
        }
        Ok(())
    }
}

fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for draw `k` of the segment at `prov`, independent of scheduling.
pub fn derive_seed(seed: u64, prov: Provenance, k: u64) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ prov.waveform_id);
    h = splitmix64(h ^ prov.offset as u64);
    splitmix64(h ^ k)
}

pub fn draw_rng(seed: u64, prov: Provenance, k: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, prov, k))
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn hann_taper(d: f64) -> f64 {
    let half = SINC_HALF_TAPS as f64;
    if d.abs() >= half {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * d / half).cos())
    }
}

fn map_index(t: usize, factor: f64, out_len: usize) -> usize {
    ((factor * t as f64).round() as usize).min(out_len - 1)
}

/// Resamples along time by `factor` with Hann-tapered sinc interpolation.
///
/// Output sample `j` reads the input at `j / factor`, so features stretch by
/// `factor` and a tone at frequency `f` comes out at `f / factor`. Kernel
/// weights are renormalized to unit sum, which keeps DC exact.
pub fn time_scale(seg: &Segment, factor: f64) -> Result<Segment> {
    if !(MIN_SCALE_FACTOR..=MAX_SCALE_FACTOR).contains(&factor) {
        return Err(Error::FactorOutOfRange(factor));
    }
    let n = seg.len();
    if n < MIN_SCALE_LEN {
        return Err(Error::SegmentTooShort { len: n, required: MIN_SCALE_LEN });
    }
    if factor == 1.0 {
        return Ok(seg.clone());
    }
    let out_len = ((factor * n as f64).round() as usize).max(1);
    let half = SINC_HALF_TAPS as i64;
    let samples = (0..out_len)
        .map(|j| {
            let x = j as f64 / factor;
            let base = x.floor() as i64;
            if x == base as f64 && (base as usize) < n {
                return seg.samples[base as usize];
            }
            let lo = (base - half + 1).max(0);
            let hi = (base + half).min(n as i64 - 1);
            let (mut acc, mut wsum) = (0.0, 0.0);
            for k in lo..=hi {
                let d = x - k as f64;
                let w = sinc(d) * hann_taper(d);
                acc += w * seg.samples[k as usize];
                wsum += w;
            }
            if wsum.abs() > 1e-12 {
                acc / wsum
            } else {
                acc
            }
        })
        .collect();
    let mut marks: Vec<usize> = seg.marks.iter().map(|&t| map_index(t, factor, out_len)).collect();
    marks.dedup();
    Ok(Segment {
        samples,
        marks,
        anchor: seg.anchor.map(|a| map_index(a, factor, out_len)),
        provenance: seg.provenance,
    })
}

/// Picks the window start for `crop`.
pub fn crop_offset(seg: &Segment, spec: &AugmentSpec, rng: &mut impl Rng) -> Result<usize> {
    let w = spec.window_len;
    let len = seg.len();
    if len < w {
        return Err(Error::SegmentTooShort { len, required: w });
    }
    let max_off = len - w;
    if max_off == 0 {
        return Ok(0);
    }
    match spec.crop {
        CropMode::FixedCenter => {
            let center = seg.anchor.or_else(|| seg.marks.get(seg.marks.len() / 2).copied()).unwrap_or(len / 2);
            Ok(center.saturating_sub(w / 2).min(max_off))
        }
        CropMode::Random => {
            // Offsets where at least one mark lands in [margin, w - 1 - margin].
            let margin = spec.crop_margin;
            let mut allowed = vec![false; max_off + 1];
            for &t in &seg.marks {
                let lo = (t + margin + 1).saturating_sub(w);
                let hi = match t.checked_sub(margin) {
                    Some(h) => h.min(max_off),
                    None => continue,
                };
                if lo <= hi {
                    allowed[lo..=hi].iter_mut().for_each(|a| *a = true);
                }
            }
            let candidates: Vec<usize> = (0..=max_off).filter(|&o| allowed[o]).collect();
            Ok(if candidates.is_empty() {
                rng.random_range(0..=max_off)
            } else {
                candidates[rng.random_range(0..candidates.len())]
            })
        }
    }
}

/// Cuts a `window_len` window out of the segment and re-indexes its marks.
pub fn crop(seg: &Segment, spec: &AugmentSpec, rng: &mut impl Rng) -> Result<Segment> {
    let off = crop_offset(seg, spec, rng)?;
    Ok(crop_at(seg, off, spec.window_len))
}

pub fn crop_at(seg: &Segment, off: usize, window_len: usize) -> Segment {
    let end = off + window_len;
    let reindex = |t: usize| (off..end).contains(&t).then(|| t - off);
    Segment {
        samples: seg.samples[off..end].to_vec(),
        marks: seg.marks.iter().filter_map(|&t| reindex(t)).collect(),
        anchor: seg.anchor.and_then(reindex),
        provenance: Provenance { waveform_id: seg.provenance.waveform_id, offset: seg.provenance.offset + off },
    }
}

pub fn amp_jitter(seg: &Segment, gain: f64) -> Result<Segment> {
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(Error::NonPositiveGain(gain));
    }
    let mut out = seg.clone();
    out.samples.iter_mut().for_each(|x| *x *= gain);
    Ok(out)
}

/// Adds white Gaussian noise with std `sigma * std(segment)`.
pub fn noise_inject(seg: &Segment, sigma: f64, rng: &mut impl Rng) -> Result<Segment> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidAugmentSpec(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let mut out = seg.clone();
    if sigma == 0.0 || seg.is_empty() {
        return Ok(out);
    }
    let n = seg.len() as f64;
    let mean = seg.samples.iter().sum::<f64>() / n;
    let std = (seg.samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    if std == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma * std).expect("finite positive std");
    out.samples.iter_mut().for_each(|x| *x += normal.sample(rng));
    Ok(out)
}

/// One augmented training window.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub samples: Vec<f64>,
    pub marks: Vec<usize>,
    pub offset: usize,
}

/// Runs draw `k` of the transform chain on `seg`.
pub fn sample_one(seg: &Segment, spec: &AugmentSpec, k: u64) -> Result<Window> {
    let mut rng = draw_rng(spec.seed, seg.provenance, k);
    let scaled;
    let source = match spec.time_scale_range {
        Some([lo, hi]) => {
            let factor = if lo == hi { lo } else { rng.random_range(lo.ln()..=hi.ln()).exp() };
            scaled = time_scale(seg, factor)?;
            &scaled
        }
        None => seg,
    };
    let mut win = crop(source, spec, &mut rng)?;
    if let Some([lo, hi]) = spec.amp_jitter_range {
        let gain = if lo == hi { lo } else { rng.random_range(lo..=hi) };
        win = amp_jitter(&win, gain)?;
    }
    if spec.noise_sigma > 0.0 {
        win = noise_inject(&win, spec.noise_sigma, &mut rng)?;
    }
    Ok(Window { offset: win.provenance.offset - seg.provenance.offset, samples: win.samples, marks: win.marks })
}

/// `M` independent draws of the transform chain.
pub fn sample_many(seg: &Segment, spec: &AugmentSpec) -> Result<Vec<Window>> {
    spec.validate()?;
    (0..spec.multi_sampling as u64).map(|k| sample_one(seg, spec, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg_with(samples: Vec<f64>, marks: Vec<usize>) -> Segment {
        let anchor = marks.get(marks.len() / 2).copied();
        Segment::new(samples, marks, anchor, Provenance { waveform_id: 1, offset: 0 }).unwrap()
    }

    fn spec(w: usize) -> AugmentSpec {
        AugmentSpec { window_len: w, ..AugmentSpec::default() }
    }

    #[test]
    fn unit_factor_is_exact_identity() {
        let s = seg_with((0..100).map(|i| (i as f64 * 0.37).sin()).collect(), vec![10, 50]);
        assert_eq!(time_scale(&s, 1.0).unwrap(), s);
    }

    #[test]
    fn time_scale_rejects_bad_input() {
        let s = seg_with(vec![0.0; 100], vec![]);
        assert!(matches!(time_scale(&s, 0.4), Err(Error::FactorOutOfRange(_))));
        assert!(matches!(time_scale(&s, 2.5), Err(Error::FactorOutOfRange(_))));
        let short = seg_with(vec![0.0; 15], vec![]);
        assert!(matches!(time_scale(&short, 1.1), Err(Error::SegmentTooShort { .. })));
    }

    #[test]
    fn time_scale_keeps_dc() {
        let s = seg_with(vec![2.5; 200], vec![]);
        for f in [0.5, 0.8, 1.3, 2.0] {
            let out = time_scale(&s, f).unwrap();
            assert_eq!(out.len(), (f * 200.0f64).round() as usize);
            for &v in &out.samples {
                assert!((v - 2.5).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn time_scale_stretches_tone() {
        let fs = 1000.0;
        let input: Vec<f64> = (0..1024).map(|n| (2.0 * std::f64::consts::PI * 25.0 * n as f64 / fs).sin()).collect();
        let s = seg_with(input, vec![]);
        let factor = 1.25;
        let out = time_scale(&s, factor).unwrap();
        assert_eq!(out.len(), 1280);
        let max_err = (32..out.len() - 32)
            .map(|j| {
                let want = (2.0 * std::f64::consts::PI * 20.0 * j as f64 / fs).sin();
                (out.samples[j] - want).abs()
            })
            .fold(0.0, f64::max);
        assert!(max_err < 1e-3, "max err {max_err}");
    }

    #[test]
    fn time_scale_maps_marks() {
        let s = seg_with(vec![0.0; 400], vec![100, 201, 300]);
        let out = time_scale(&s, 1.25).unwrap();
        assert_eq!(out.marks, vec![125, 251, 375]);
        assert_eq!(out.anchor, Some(251));
    }

    #[test]
    fn crop_identity_when_lengths_match() {
        let s = seg_with((0..64).map(|i| i as f64).collect(), vec![32]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = crop(&s, &spec(64), &mut rng).unwrap();
        assert_eq!(c.samples, s.samples);
        assert_eq!(c.marks, vec![32]);
    }

    #[test]
    fn crop_too_short() {
        let s = seg_with(vec![0.0; 300], vec![150]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(crop(&s, &spec(512), &mut rng), Err(Error::SegmentTooShort { len: 300, required: 512 })));
    }

    #[test]
    fn seeded_random_crop_is_pinned() {
        let s = seg_with((0..1000).map(|i| i as f64).collect(), vec![500]);
        let sp = spec(512);
        let off = crop_offset(&s, &sp, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(off, 82);
        let again = crop_offset(&s, &sp, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(off, again);
        let c = crop_at(&s, off, 512);
        assert_eq!(c.marks, vec![500 - off]);
        assert!(500 - off >= 30 && 500 - off <= 511 - 30);
    }

    #[test]
    fn fixed_center_places_mark_mid_window() {
        let s = seg_with(vec![0.0; 1024], vec![512]);
        let sp = AugmentSpec { crop: CropMode::FixedCenter, ..spec(512) };
        let c = crop(&s, &sp, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(c.marks, vec![256]);
    }

    #[test]
    fn amp_jitter_examples() {
        let s = seg_with(vec![1.0, -1.0], vec![]);
        assert_eq!(amp_jitter(&s, 2.0).unwrap().samples, vec![2.0, -2.0]);
        assert_eq!(amp_jitter(&s, 1.0).unwrap(), s);
        assert!(matches!(amp_jitter(&s, 0.0), Err(Error::NonPositiveGain(_))));
    }

    #[test]
    fn seeded_gain_draw_is_pinned() {
        let s = Segment::new(vec![1.0; 64], vec![32], Some(32), Provenance::default()).unwrap();
        let sp = AugmentSpec { amp_jitter_range: Some([0.7, 1.3]), window_len: 64, seed: 3, ..AugmentSpec::default() };
        let a = sample_one(&s, &sp, 0).unwrap();
        let b = sample_one(&s, &sp, 0).unwrap();
        assert_eq!(a, b);
        let gain = a.samples[0];
        assert!((0.7..=1.3).contains(&gain));
        assert_eq!(gain, 0.848398925552116);
    }

    #[test]
    fn noise_statistics_and_determinism() {
        let input: Vec<f64> = (0..10_000).map(|i| (i as f64 * 0.01).sin() * 3.0).collect();
        let s = seg_with(input.clone(), vec![]);
        let std_in = {
            let m = input.iter().sum::<f64>() / input.len() as f64;
            (input.iter().map(|x| (x - m).powi(2)).sum::<f64>() / input.len() as f64).sqrt()
        };
        let out = noise_inject(&s, 0.1, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let diff: Vec<f64> = out.samples.iter().zip(&input).map(|(a, b)| a - b).collect();
        let m = diff.iter().sum::<f64>() / diff.len() as f64;
        let sd = (diff.iter().map(|x| (x - m).powi(2)).sum::<f64>() / diff.len() as f64).sqrt();
        assert!((sd - 0.1 * std_in).abs() < 0.05 * 0.1 * std_in, "sd {sd}");
        let again = noise_inject(&s, 0.1, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(out, again);
        assert_eq!(noise_inject(&s, 0.0, &mut ChaCha8Rng::seed_from_u64(11)).unwrap(), s);
    }

    #[test]
    fn sample_many_fixed_center_identity_chain() {
        let s = seg_with((0..1024).map(|i| i as f64).collect(), vec![512]);
        let sp = AugmentSpec { crop: CropMode::FixedCenter, ..spec(512) };
        let out = sample_many(&s, &sp).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].samples, (256..768).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(out[0].marks, vec![256]);
    }

    #[test]
    fn sample_many_random_crop_varies() {
        let s = seg_with((0..1024).map(|i| i as f64).collect(), vec![512]);
        let sp = AugmentSpec { multi_sampling: 20, seed: 5, ..spec(512) };
        let out = sample_many(&s, &sp).unwrap();
        assert_eq!(out.len(), 20);
        assert!(out.iter().all(|w| w.samples.len() == 512));
        let offsets: Vec<usize> = out.iter().map(|w| w.offset).collect();
        let mut distinct = offsets.clone();
        distinct.sort_unstable();
        distinct.dedup();
        assert!(distinct.len() >= 2);
        assert_eq!(
            offsets,
            vec![46, 478, 281, 40, 177, 120, 276, 477, 99, 315, 336, 461, 338, 104, 100, 479, 315, 313, 362, 294]
        );
    }

    #[test]
    fn identity_settings_give_identical_draws() {
        let s = seg_with((0..512).map(|i| (i as f64).cos()).collect(), vec![256]);
        let sp = AugmentSpec { multi_sampling: 5, time_scale_range: Some([1.0, 1.0]), amp_jitter_range: Some([1.0, 1.0]), ..spec(512) };
        let out = sample_many(&s, &sp).unwrap();
        assert!(out.windows(2).all(|p| p[0] == p[1]));
    }

    #[test]
    fn spec_validation() {
        assert!(AugmentSpec { window_len: 1, ..AugmentSpec::default() }.validate().is_err());
        assert!(AugmentSpec { multi_sampling: 0, ..AugmentSpec::default() }.validate().is_err());
        assert!(AugmentSpec { amp_jitter_range: Some([1.2, 0.9]), ..AugmentSpec::default() }.validate().is_err());
        assert!(AugmentSpec { time_scale_range: Some([0.3, 1.0]), ..AugmentSpec::default() }.validate().is_err());
        assert!(AugmentSpec::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn every_window_has_length_w(len in 330usize..900, mark_frac in 0.1f64..0.9, seed in any::<u64>(), ts in any::<bool>()) {
            let mark = ((len as f64) * mark_frac) as usize;
            let s = seg_with(vec![0.5; len], vec![mark]);
            let sp = AugmentSpec {
                window_len: 256,
                multi_sampling: 4,
                seed,
                time_scale_range: ts.then_some([0.8, 1.25]),
                amp_jitter_range: Some([0.7, 1.3]),
                noise_sigma: 0.05,
                ..AugmentSpec::default()
            };
            for w in sample_many(&s, &sp).unwrap() {
                prop_assert_eq!(w.samples.len(), 256);
                prop_assert!(w.marks.iter().all(|&m| m < 256));
            }
        }

        #[test]
        fn mark_maps_commute_with_scale_then_crop(
            marks in prop::collection::btree_set(0usize..600, 1..6),
            factor in 0.8f64..1.25,
            seed in any::<u64>(),
        ) {
            let marks: Vec<usize> = marks.into_iter().collect();
            let s = seg_with(vec![0.0; 600], marks.clone());
            let scaled = time_scale(&s, factor).unwrap();
            let sp = spec(256);
            let off = crop_offset(&scaled, &sp, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let cropped = crop_at(&scaled, off, 256);
            let out_len = scaled.len();
            let mut expected: Vec<usize> = marks
                .iter()
                .map(|&t| ((factor * t as f64).round() as usize).min(out_len - 1))
                .filter(|&t| t >= off && t < off + 256)
                .map(|t| t - off)
                .collect();
            expected.dedup();
            prop_assert_eq!(cropped.marks, expected);
        }

        #[test]
        fn draws_depend_only_on_seed_provenance_and_index(seed in any::<u64>(), k in 0u64..50) {
            let s = seg_with((0..600).map(|i| (i as f64 * 0.1).sin()).collect(), vec![300]);
            let sp = AugmentSpec { window_len: 256, seed, multi_sampling: 50, time_scale_range: Some([0.8, 1.25]), noise_sigma: 0.1, ..AugmentSpec::default() };
            let all = sample_many(&s, &sp).unwrap();
            prop_assert_eq!(&all[k as usize], &sample_one(&s, &sp, k).unwrap());
        }
    }
}
