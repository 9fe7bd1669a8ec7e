//! Per-position training targets: one-hot, Gaussian label-distribution
//! smoothing (LDS) and label smoothing regularization (LSR).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Ohe,
    Lds,
    LdsLsr,
    OheLsr,
}

/// Target probabilities aligned 1:1 with a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub values: Vec<f64>,
    pub kind: LabelKind,
}

impl LabelMap {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdsConfig {
    /// Gaussian RMS width in samples.
    pub sigma: f64,
}

impl Default for LdsConfig {
    fn default() -> Self {
        LdsConfig { sigma: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsrConfig {
    pub epsilon: f64,
}

impl Default for LsrConfig {
    fn default() -> Self {
        LsrConfig { epsilon: 0.1 }
    }
}

impl LsrConfig {
    /// Binary problem: collar vs background.
    pub const NUM_CLASSES: usize = 2;
}

fn check_marks(marks: &[usize], length: usize) -> Result<()> {
    match marks.iter().find(|&&m| m >= length) {
        Some(&index) => Err(Error::IndexOutOfRange { index, len: length }),
        None => Ok(()),
    }
}

pub fn ohe_labels(marks: &[usize], length: usize) -> Result<LabelMap> {
    check_marks(marks, length)?;
    let mut values = vec![0.0; length];
    for &m in marks {
        values[m] = 1.0;
    }
    Ok(LabelMap { values, kind: LabelKind::Ohe })
}

/// `p(t) = min(1, sum_i exp(-(t - t_i)^2 / (2 sigma^2)))` on the integer grid.
pub fn lds_labels(marks: &[usize], length: usize, cfg: &LdsConfig) -> Result<LabelMap> {
    if !(cfg.sigma > 0.0) {
        return Err(Error::InvalidLabelConfig(format!("sigma must be positive, got {}", cfg.sigma)));
    }
    check_marks(marks, length)?;
    let denom = 2.0 * cfg.sigma * cfg.sigma;
    // Terms beyond 40 sigma are below 1e-300 and cannot change a clipped sum.
    let reach = (40.0 * cfg.sigma).ceil().min(length as f64) as usize;
    let mut raw = vec![0.0f64; length];
    for &m in marks {
        let lo = m.saturating_sub(reach);
        let hi = (m + reach + 1).min(length);
        for (t, slot) in raw.iter_mut().enumerate().take(hi).skip(lo) {
            let d = t as f64 - m as f64;
            *slot += (-(d * d) / denom).exp();
        }
    }
    let values = raw.into_iter().map(|v| if v < 1.0 { v } else { 1.0 }).collect();
    Ok(LabelMap { values, kind: LabelKind::Lds })
}

/// `v -> (1 - eps) v + eps / 2`.
pub fn lsr_apply(labels: &LabelMap, cfg: &LsrConfig) -> LabelMap {
    let eps = cfg.epsilon;
    let values = labels.values.iter().map(|&v| (1.0 - eps) * v + eps / LsrConfig::NUM_CLASSES as f64).collect();
    let kind = match labels.kind {
        LabelKind::Ohe | LabelKind::OheLsr => LabelKind::OheLsr,
        LabelKind::Lds | LabelKind::LdsLsr => LabelKind::LdsLsr,
    };
    LabelMap { values, kind }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelScheme {
    Ohe,
    Lds,
}

/// How a window's marks become its target map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    pub scheme: LabelScheme,
    pub sigma: f64,
    /// LSR epsilon; `None` disables LSR.
    pub lsr_epsilon: Option<f64>,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig { scheme: LabelScheme::Lds, sigma: LdsConfig::default().sigma, lsr_epsilon: None }
    }
}

impl LabelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scheme == LabelScheme::Lds && !(self.sigma > 0.0) {
            return Err(Error::InvalidLabelConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        if let Some(eps) = self.lsr_epsilon {
            if !(0.0..1.0).contains(&eps) {
                return Err(Error::InvalidLabelConfig(format!("LSR epsilon must lie in [0, 1), got {eps}")));
            }
        }
        Ok(())
    }

    pub fn make(&self, marks: &[usize], length: usize) -> Result<LabelMap> {
        let base = match self.scheme {
            LabelScheme::Ohe => ohe_labels(marks, length)?,
            LabelScheme::Lds => lds_labels(marks, length, &LdsConfig { sigma: self.sigma })?,
        };
        Ok(match self.lsr_epsilon {
            Some(epsilon) => lsr_apply(&base, &LsrConfig { epsilon }),
            None => base,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ohe_examples() {
        assert_eq!(ohe_labels(&[2], 5).unwrap().values, vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(ohe_labels(&[], 3).unwrap().values, vec![0.0; 3]);
        assert_eq!(ohe_labels(&[0, 4], 5).unwrap().values, vec![1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(ohe_labels(&[5], 5), Err(Error::IndexOutOfRange { index: 5, len: 5 })));
    }

    #[test]
    fn lds_single_mark() {
        let l = lds_labels(&[100], 201, &LdsConfig { sigma: 10.0 }).unwrap();
        assert_eq!(l.values[100], 1.0);
        assert!((l.values[110] - (-0.5f64).exp()).abs() < 1e-6);
        assert!((l.values[110] - 0.6065).abs() < 1e-4);
    }

    #[test]
    fn lds_clips_overlapping_marks() {
        let l = lds_labels(&[100, 105], 201, &LdsConfig { sigma: 10.0 }).unwrap();
        let raw = (-0.02f64).exp() + (-0.045f64).exp();
        assert!((raw - 1.9362).abs() < 1e-4);
        assert_eq!(l.values[102], 1.0);
    }

    #[test]
    fn lds_empty_and_errors() {
        assert!(lds_labels(&[], 17, &LdsConfig::default()).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(lds_labels(&[3], 4, &LdsConfig { sigma: 0.0 }).is_err());
        assert!(lds_labels(&[4], 4, &LdsConfig::default()).is_err());
    }

    #[test]
    fn lds_tiny_sigma_equals_ohe() {
        let marks = [0, 7, 8, 30];
        let lds = lds_labels(&marks, 31, &LdsConfig { sigma: 1e-6 }).unwrap();
        assert_eq!(lds.values, ohe_labels(&marks, 31).unwrap().values);
    }

    #[test]
    fn lsr_examples() {
        let base = LabelMap { values: vec![1.0, 0.0, 0.5], kind: LabelKind::Lds };
        let out = lsr_apply(&base, &LsrConfig { epsilon: 0.1 });
        assert!((out.values[0] - 0.95).abs() < 1e-12);
        assert!((out.values[1] - 0.05).abs() < 1e-12);
        assert!((out.values[2] - 0.5).abs() < 1e-12);
        assert_eq!(out.kind, LabelKind::LdsLsr);
        assert_eq!(lsr_apply(&base, &LsrConfig { epsilon: 0.0 }).values, base.values);
    }

    #[test]
    fn label_config_stacks_lsr_after_lds() {
        let cfg = LabelConfig { lsr_epsilon: Some(0.1), ..LabelConfig::default() };
        let l = cfg.make(&[50], 101).unwrap();
        assert_eq!(l.kind, LabelKind::LdsLsr);
        assert!((l.values[50] - 0.95).abs() < 1e-12);
        assert!((l.values[0] - 0.05).abs() < 1e-5);
        assert!(LabelConfig { lsr_epsilon: Some(1.0), ..cfg }.validate().is_err());
    }

    proptest! {
        #[test]
        fn lds_symmetric_and_monotone_around_isolated_mark(mark in 60usize..140, sigma in 1.0f64..10.0) {
            let l = lds_labels(&[mark], 200, &LdsConfig { sigma }).unwrap();
            let reach = (6.0 * sigma) as usize;
            for d in 1..=reach.min(59) {
                prop_assert_eq!(l.values[mark + d], l.values[mark - d]);
                prop_assert!(l.values[mark + d] <= l.values[mark + d - 1]);
            }
        }

        #[test]
        fn lsr_is_order_preserving_and_bounded(vals in prop::collection::vec(0.0f64..=1.0, 1..50), eps in 0.0f64..0.99) {
            let out = lsr_apply(&LabelMap { values: vals.clone(), kind: LabelKind::Lds }, &LsrConfig { epsilon: eps });
            for (i, &v) in out.values.iter().enumerate() {
                prop_assert!(v >= eps / 2.0 - 1e-12 && v <= 1.0 - eps / 2.0 + 1e-12);
                for j in 0..vals.len() {
                    if vals[i] < vals[j] {
                        prop_assert!(v < out.values[j]);
                    }
                }
            }
        }
    }
}
