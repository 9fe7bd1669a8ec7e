//! Seeded synthetic CCL waveform generator with annotated collar marks.
//!
//! Each collar contributes a derivative-of-Gaussian pulse
//! `A * (tau / w) * exp(-tau^2 / (2 w^2))`, antisymmetric about the mark.
//! Drift, interference bumps, saturation episodes and white noise are added
//! on top depending on the spec.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Waveform;

/// Signature support, in units of the lobe width.
const SIGNATURE_REACH: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interference {
    None,
    Mild,
    Moderate,
}

impl std::str::FromStr for Interference {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(Interference::None),
            "mild" => Ok(Interference::Mild),
            "moderate" => Ok(Interference::Moderate),
            other => Err(format!("unknown interference level {other:?} (none|mild|moderate)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    /// Mean spacing; gaps vary uniformly within +-20% of it.
    pub collar_spacing_s: f64,
    pub signature_width_s: f64,
    pub signature_amp: f64,
    pub interference_level: Interference,
    pub drift_amp: f64,
    pub noise_std: f64,
    /// Window length the waveform must accommodate (at least 4 windows).
    pub window_len: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            duration_s: 60.0,
            sample_rate_hz: 1000.0,
            collar_spacing_s: 0.4,
            signature_width_s: 0.012,
            signature_amp: 1.0,
            interference_level: Interference::None,
            drift_amp: 0.0,
            noise_std: 0.0,
            window_len: 512,
        }
    }
}

impl SynthSpec {
    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SpecInvalid(m));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration_s must be positive, got {}", self.duration_s));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad(format!("sample_rate_hz must be positive, got {}", self.sample_rate_hz));
        }
        if !(self.signature_width_s > 0.0) || !(self.signature_amp > 0.0) {
            return bad("signature width and amplitude must be positive".into());
        }
        if self.drift_amp < 0.0 || self.noise_std < 0.0 {
            return bad("drift_amp and noise_std must be non-negative".into());
        }
        if self.n_samples() < 4 * self.window_len {
            return bad(format!(
                "duration gives {} samples, need at least 4 x window_len = {}",
                self.n_samples(),
                4 * self.window_len
            ));
        }
        if !(self.collar_spacing_s > 8.0 * self.signature_width_s) {
            return bad(format!(
                "collar_spacing_s ({}) must exceed 8 x signature_width_s ({})",
                self.collar_spacing_s,
                8.0 * self.signature_width_s
            ));
        }
        Ok(())
    }

    fn width_samples(&self) -> f64 {
        self.signature_width_s * self.sample_rate_hz
    }
}

/// Collar pulse at offset `tau` samples from its mark.
pub fn signature(tau: f64, width: f64, amp: f64) -> f64 {
    let u = tau / width;
    amp * u * (-0.5 * u * u).exp()
}

/// The clean collar response sampled on integer offsets `-reach..=reach`.
pub fn signature_template(width: f64, amp: f64) -> Vec<f64> {
    let reach = (SIGNATURE_REACH * width).floor() as i64;
    (-reach..=reach).map(|k| signature(k as f64, width, amp)).collect()
}

fn add_pulse(out: &mut [f64], center: usize, width: f64, amp: f64) {
    let reach = (SIGNATURE_REACH * width).floor() as i64;
    for k in -reach..=reach {
        let t = center as i64 + k;
        if t >= 0 && (t as usize) < out.len() {
            out[t as usize] += signature(k as f64, width, amp);
        }
    }
}

fn add_bump(out: &mut [f64], center: f64, width: f64, amp: f64) {
    let reach = (4.0 * width).ceil() as i64;
    let c = center.round() as i64;
    for t in (c - reach).max(0)..=(c + reach).min(out.len() as i64 - 1) {
        let u = (t as f64 - center) / width;
        out[t as usize] += amp * (-0.5 * u * u).exp();
    }
}

/// Collars on a regular grid of the mean spacing, each shifted by up to
/// +-10% of it, so neighbouring gaps stay within +-20% of the mean and the
/// count is fixed by duration / spacing.
fn place_collars(spec: &SynthSpec, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let spacing = spec.collar_spacing_s * spec.sample_rate_hz;
    let edge = (SIGNATURE_REACH * spec.width_samples()).ceil();
    // Half a sample of slack keeps rounded gaps at or above 0.8 spacing.
    let jitter = 0.1 * spacing - 0.5;
    let mut marks = Vec::new();
    for k in 0.. {
        let center = (k as f64 + 0.5) * spacing;
        if center - jitter >= n as f64 {
            break;
        }
        let t = center + rng.random_range(-jitter..=jitter);
        if t >= edge && t + edge < n as f64 {
            marks.push(t.round() as usize);
        }
    }
    marks
}

/// Generates an annotated waveform. Deterministic in `spec`.
pub fn generate(spec: &SynthSpec) -> Result<Waveform> {
    spec.validate()?;
    let n = spec.n_samples();
    let width = spec.width_samples();
    let amp = spec.signature_amp;
    let spacing = spec.collar_spacing_s * spec.sample_rate_hz;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let marks = place_collars(spec, n, &mut rng);
    let mut x = vec![0.0; n];
    for &m in &marks {
        add_pulse(&mut x, m, width, amp);
    }

    if spec.drift_amp > 0.0 {
        let period = rng.random_range(8.0..30.0) * spec.sample_rate_hz;
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let phase2 = rng.random_range(0.0..std::f64::consts::TAU);
        let tau = std::f64::consts::TAU;
        for (t, v) in x.iter_mut().enumerate() {
            let u = t as f64 / period;
            *v += spec.drift_amp * (0.8 * (tau * u + phase).sin() + 0.2 * (2.7 * tau * u + phase2).sin());
        }
    }

    let (bump_rate, bump_max, saturation) = match spec.interference_level {
        Interference::None => (0.0, 0.0, false),
        Interference::Mild => (0.5, 0.3, false),
        Interference::Moderate => (1.0, 0.7, true),
    };
    if bump_rate > 0.0 {
        let n_bumps = (bump_rate * n as f64 / spacing).round() as usize;
        for _ in 0..n_bumps {
            let center = rng.random_range(0.0..n as f64);
            let w = width * rng.random_range(1.0..3.0);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let a = amp * rng.random_range(0.3 * bump_max..=bump_max);
            add_bump(&mut x, center, w, sign * a);
        }
    }
    if saturation {
        // Episodes of excess gain that drive the front end into its rails.
        let rail = 0.9 * amp;
        let n_episodes = ((n as f64 / (10.0 * spacing)).round() as usize).max(1);
        for _ in 0..n_episodes {
            let len = (spacing * rng.random_range(0.5..1.5)) as usize;
            let start = rng.random_range(0..n.saturating_sub(len).max(1));
            let gain = rng.random_range(1.8..3.0);
            for v in &mut x[start..(start + len).min(n)] {
                *v = (*v * gain).clamp(-rail, rail);
            }
        }
    }

    if spec.noise_std > 0.0 {
        let normal = Normal::new(0.0, spec.noise_std).expect("valid noise std");
        x.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }

    Waveform::new(x, spec.sample_rate_hz, Some(marks))
}
