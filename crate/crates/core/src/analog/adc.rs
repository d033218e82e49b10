use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AnalogError;

/// Piecewise-constant conversion: `centers[i]` for `refs[i-1] <= x < refs[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct AdcSpec {
    refs: Vec<f64>,
    centers: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    refs: Vec<f64>,
    centers: Vec<f64>,
}

impl TryFrom<RawSpec> for AdcSpec {
    type Error = AnalogError;
    fn try_from(raw: RawSpec) -> Result<Self, AnalogError> {
        AdcSpec::new(raw.refs, raw.centers)
    }
}

impl AdcSpec {
    pub fn new(refs: Vec<f64>, centers: Vec<f64>) -> Result<Self, AnalogError> {
        let levels = centers.len();
        if levels < 2 || !levels.is_power_of_two() || levels > 1 << 16 {
            return Err(AnalogError::Spec(format!(
                "{levels} centers; expected a power of two between 2 and 65536"
            )));
        }
        if refs.len() + 1 != levels {
            return Err(AnalogError::Spec(format!(
                "{} refs for {levels} centers",
                refs.len()
            )));
        }
        if let Some(&v) = refs.iter().chain(&centers).find(|v| !v.is_finite()) {
            return Err(AnalogError::NonFinite(v));
        }
        if refs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AnalogError::Spec("refs must be strictly increasing".into()));
        }
        if centers.windows(2).any(|w| w[0] > w[1]) {
            return Err(AnalogError::Spec("centers must be nondecreasing".into()));
        }
        Ok(AdcSpec { refs, centers })
    }

    pub fn refs(&self) -> &[f64] {
        &self.refs
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn precision(&self) -> u32 {
        self.centers.len().trailing_zeros()
    }

    #[inline]
    pub fn convert(&self, x: f64) -> f64 {
        self.centers[self.refs.partition_point(|&r| r <= x)]
    }

    pub fn from_json(text: &str) -> Result<Self, AnalogError> {
        serde_json::from_str(text).map_err(|e| AnalogError::Spec(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AnalogError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| AnalogError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

fn check_precision(p: u32) -> Result<usize, AnalogError> {
    if !(1..=16).contains(&p) {
        return Err(AnalogError::Precision(p));
    }
    Ok(1 << p)
}

/// Uniform levels `lo + i·(hi-lo)/(2^p-1)` with midpoint references.
pub fn build_linear_adc(p: u32, lo: f64, hi: f64) -> Result<AdcSpec, AnalogError> {
    let levels = check_precision(p)?;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(AnalogError::Range { lo, hi });
    }
    let step = (hi - lo) / (levels - 1) as f64;
    let centers: Vec<f64> = (0..levels).map(|i| lo + i as f64 * step).collect();
    let refs = centers.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
    AdcSpec::new(refs, centers)
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>, AnalogError> {
    if let Some(&v) = samples.iter().find(|v| !v.is_finite()) {
        return Err(AnalogError::NonFinite(v));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

fn distinct(sorted: &[f64]) -> Vec<f64> {
    let mut u = sorted.to_vec();
    u.dedup();
    u
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn degenerate(v: f64, levels: usize) -> AdcSpec {
    AdcSpec {
        refs: (1..levels).map(|i| v + i as f64).collect(),
        centers: vec![v; levels],
    }
}

/// Quantile references and bucket-median centers fitted to `samples`.
///
/// Reference `i` sits at the sample `floor(i·n/2^p)` of the sorted set, nudged
/// to the nearest distinct value that keeps the references strictly
/// increasing. A constant sample set yields a spec that always returns it.
pub fn calibrate_nonlinear_adc(samples: &[f64], p: u32) -> Result<AdcSpec, AnalogError> {
    let levels = check_precision(p)?;
    let s = sorted(samples)?;
    let u = distinct(&s);
    match u.len() {
        0 => return Err(AnalogError::InsufficientSamples { distinct: 0, needed: levels }),
        1 => return Ok(degenerate(u[0], levels)),
        m if m < levels => {
            return Err(AnalogError::InsufficientSamples {
                distinct: m,
                needed: levels,
            })
        }
        _ => {}
    }
    let n = s.len();
    let m = u.len();
    // Reference positions as indices into the distinct values.
    let mut idx: Vec<usize> = (1..levels)
        .map(|i| u.partition_point(|&v| v < s[i * n / levels]))
        .collect();
    let mut floor = 1;
    for x in idx.iter_mut() {
        *x = (*x).max(floor);
        floor = *x + 1;
    }
    let mut ceil = m - 1;
    for x in idx.iter_mut().rev() {
        *x = (*x).min(ceil);
        ceil = x.saturating_sub(1);
    }
    let refs: Vec<f64> = idx.iter().map(|&i| u[i]).collect();
    let mut centers = Vec::with_capacity(levels);
    let mut start = 0;
    for i in 0..levels {
        let end = if i + 1 < levels {
            s.partition_point(|&v| v < refs[i])
        } else {
            n
        };
        let bucket = &s[start..end];
        centers.push(if bucket.is_empty() {
            refs[i - 1]
        } else {
            median(bucket)
        });
        start = end;
    }
    AdcSpec::new(refs, centers)
}

/// Exact conversion for sample sets with at most `2^p` distinct values;
/// falls back to quantile calibration otherwise.
pub fn lossless_adc(samples: &[f64], p: u32) -> Result<AdcSpec, AnalogError> {
    let levels = check_precision(p)?;
    let u = distinct(&sorted(samples)?);
    if u.len() > levels {
        return calibrate_nonlinear_adc(samples, p);
    }
    if u.len() <= 1 {
        return Ok(degenerate(u.first().copied().unwrap_or(0.0), levels));
    }
    let top = *u.last().unwrap();
    let mut refs: Vec<f64> = u.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
    let mut centers = u.clone();
    for i in 1..=levels - u.len() {
        refs.push(top + i as f64);
        centers.push(top);
    }
    AdcSpec::new(refs, centers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_examples() {
        let s = build_linear_adc(2, 0.0, 3.0).unwrap();
        assert_eq!(s.centers(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(s.refs(), &[0.5, 1.5, 2.5]);
        let s = build_linear_adc(1, 0.0, 1.0).unwrap();
        assert_eq!(s.refs(), &[0.5]);
        let s = build_linear_adc(3, 0.0, 7.0).unwrap();
        assert_eq!(s.centers(), &(0..8).map(f64::from).collect::<Vec<_>>()[..]);
        assert!(matches!(build_linear_adc(2, 1.0, 1.0), Err(AnalogError::Range { .. })));
        assert!(matches!(build_linear_adc(0, 0.0, 1.0), Err(AnalogError::Precision(0))));
    }

    #[test]
    fn convert_examples() {
        let s = build_linear_adc(2, 0.0, 3.0).unwrap();
        assert_eq!(s.convert(1.7), 2.0);
        assert_eq!(s.convert(-0.3), 0.0);
        assert_eq!(s.convert(9.0), 3.0);
        assert_eq!(s.convert(0.5), 1.0);
    }

    #[test]
    fn calibrate_uniform() {
        let samples: Vec<f64> = (0..16).map(f64::from).collect();
        let s = calibrate_nonlinear_adc(&samples, 2).unwrap();
        assert_eq!(s.refs(), &[4.0, 8.0, 12.0]);
        assert_eq!(s.centers(), &[1.5, 5.5, 9.5, 13.5]);
    }

    #[test]
    fn calibrate_constant() {
        let s = calibrate_nonlinear_adc(&[2.5; 10], 3).unwrap();
        for x in [-100.0, 2.5, 3.0, 1e9] {
            assert_eq!(s.convert(x), 2.5);
        }
    }

    #[test]
    fn calibrate_two_clusters() {
        let mut samples: Vec<f64> = (0..50).map(|i| i as f64 * 0.01).collect();
        samples.extend((0..50).map(|i| 100.0 + i as f64 * 0.01));
        let s = calibrate_nonlinear_adc(&samples, 1).unwrap();
        assert!(s.refs()[0] > 0.49 && s.refs()[0] <= 100.0);
        assert!(s.centers()[0] < 1.0 && s.centers()[1] >= 100.0);
    }

    #[test]
    fn calibrate_insufficient() {
        assert!(matches!(
            calibrate_nonlinear_adc(&[0.0, 1.0, 2.0], 2),
            Err(AnalogError::InsufficientSamples { distinct: 3, needed: 4 })
        ));
        assert!(matches!(
            calibrate_nonlinear_adc(&[], 2),
            Err(AnalogError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn calibrate_heavy_duplicates_stays_valid() {
        let mut samples = vec![0.0; 1000];
        samples.extend([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let s = calibrate_nonlinear_adc(&samples, 3).unwrap();
        assert_eq!(s.refs().len(), 7);
        assert_eq!(s.convert(0.0), 0.0);
    }

    #[test]
    fn lossless_is_exact_on_samples() {
        let samples = [0.0, 3.0, 3.0, -2.0, 7.5];
        let s = lossless_adc(&samples, 3).unwrap();
        for &x in &samples {
            assert_eq!(s.convert(x), x);
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let s = build_linear_adc(2, -1.0, 2.0).unwrap();
        assert_eq!(AdcSpec::from_json(&s.to_json()).unwrap(), s);
        assert!(AdcSpec::from_json(r#"{"refs":[1.0,0.5,2.0],"centers":[0,1,2,3]}"#).is_err());
        assert!(AdcSpec::from_json(r#"{"refs":[1.0],"centers":[0,1,2]}"#).is_err());
    }

    proptest! {
        #[test]
        fn convert_is_monotone(
            samples in prop::collection::vec(-50.0f64..50.0, 16..200),
            p in 1u32..4,
            a in -60.0f64..60.0,
            b in -60.0f64..60.0,
        ) {
            if let Ok(s) = calibrate_nonlinear_adc(&samples, p) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(s.convert(lo) <= s.convert(hi));
            }
        }

        #[test]
        fn integer_linear_adc_is_identity(p in 1u32..8) {
            let top = ((1u32 << p) - 1) as f64;
            let s = build_linear_adc(p, 0.0, top).unwrap();
            for v in 0..(1u32 << p) {
                prop_assert_eq!(s.convert(v as f64), v as f64);
            }
        }
    }
}
