//! Objective scores and the phase-constrained magnitude loss.

mod pcm;
mod resample;
mod stoi;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use pcm::{pcm_loss, pcm_loss_full, PcmConfig};
pub use resample::resample;
pub use stoi::{stoi, STOI_RATE};

/// Upper bound returned when the residual vanishes.
pub const SI_SDR_CAP: f64 = 100.0;

fn to_f64<T: Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("reference has {a} samples, estimate {b}")));
    }
    if a == 0 {
        return Err(Error::EmptySignal);
    }
    Ok(())
}

/// Scale-invariant SDR in dB with zero-mean preprocessing.
pub fn si_sdr<T: Real>(reference: &[T], estimate: &[T]) -> Result<f64> {
    si_sdr_with(reference, estimate, true)
}

/// SI-SDR with optional mean removal.
pub fn si_sdr_with<T: Real>(reference: &[T], estimate: &[T], zero_mean: bool) -> Result<f64> {
    check_lengths(reference.len(), estimate.len())?;
    let mut r = to_f64(reference);
    let mut e = to_f64(estimate);
    if zero_mean {
        for v in [&mut r, &mut e] {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.iter_mut().for_each(|x| *x -= mean);
        }
    }
    let rr: f64 = r.iter().map(|x| x * x).sum();
    if rr == 0.0 {
        return Err(Error::Silent("reference"));
    }
    let alpha = r.iter().zip(&e).map(|(a, b)| a * b).sum::<f64>() / rr;
    let target: f64 = alpha * alpha * rr;
    let residual: f64 = r.iter().zip(&e).map(|(a, b)| (b - alpha * a).powi(2)).sum();
    if residual == 0.0 {
        return Ok(SI_SDR_CAP);
    }
    Ok((10.0 * (target / residual).log10()).min(SI_SDR_CAP))
}

/// Metric selector for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    SiSdr,
    Stoi,
    Pcm,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::SiSdr, Metric::Stoi, Metric::Pcm];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::SiSdr => "si_sdr",
            Metric::Stoi => "stoi",
            Metric::Pcm => "pcm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

/// One utterance's scores. Unrequested metrics and PESQ stay `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub id: String,
    pub si_sdr_db: Option<f64>,
    pub stoi: Option<f64>,
    pub pcm: Option<f64>,
    pub pesq: Option<f64>,
}

/// Scores `estimate` against `reference` at `sample_rate`.
pub fn evaluate<T: Real>(
    id: impl Into<String>,
    reference: &[T],
    estimate: &[T],
    sample_rate: u32,
    metrics: &[Metric],
) -> Result<MetricsRecord> {
    check_lengths(reference.len(), estimate.len())?;
    let mut rec = MetricsRecord { id: id.into(), si_sdr_db: None, stoi: None, pcm: None, pesq: None };
    for m in metrics {
        match m {
            Metric::SiSdr => rec.si_sdr_db = Some(si_sdr(reference, estimate)?),
            Metric::Stoi => rec.stoi = Some(stoi(reference, estimate, sample_rate)?),
            Metric::Pcm => rec.pcm = Some(pcm_loss(reference, estimate, &PcmConfig::default())?),
        }
    }
    Ok(rec)
}

/// Corpus means over the records that carry each metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub count: usize,
    pub si_sdr_db: Option<f64>,
    pub stoi: Option<f64>,
    pub pcm: Option<f64>,
}

impl CorpusSummary {
    pub fn from_records(records: &[MetricsRecord]) -> Self {
        let mean = |f: fn(&MetricsRecord) -> Option<f64>| {
            let vals: Vec<f64> = records.iter().filter_map(f).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        Self {
            count: records.len(),
            si_sdr_db: mean(|r| r.si_sdr_db),
            stoi: mean(|r| r.stoi),
            pcm: mean(|r| r.pcm),
        }
    }
}

/// One JSON object per line.
pub fn to_jsonl(records: &[MetricsRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_projection_is_zero_db() {
        let v = si_sdr_with(&[1.0f64, 0.0], &[1.0, 1.0], false).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn identity_hits_the_cap() {
        let r = [0.3f64, -1.0, 2.0, 0.5];
        assert_eq!(si_sdr(&r, &r).unwrap(), SI_SDR_CAP);
        let doubled: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
        assert_eq!(si_sdr(&r, &doubled).unwrap(), SI_SDR_CAP);
    }

    #[test]
    fn silent_reference_errors() {
        assert!(matches!(si_sdr(&[0.0f64; 4], &[1.0; 4]), Err(Error::Silent(_))));
        assert!(matches!(si_sdr_with(&[2.0f64; 4], &[1.0; 4], true), Err(Error::Silent(_))));
        assert!(si_sdr(&[1.0f64; 3], &[1.0; 4]).is_err());
    }

    #[test]
    fn metric_names() {
        for m in Metric::ALL {
            assert_eq!(Metric::parse(m.as_str()), Some(m));
        }
        assert_eq!(Metric::parse("pesq"), None);
    }

    #[test]
    fn summary_means() {
        let rec = |v: f64| MetricsRecord { id: "a".into(), si_sdr_db: Some(v), stoi: None, pcm: None, pesq: None };
        let s = CorpusSummary::from_records(&[rec(1.0), rec(3.0)]);
        assert_eq!(s.count, 2);
        assert_eq!(s.si_sdr_db, Some(2.0));
        assert_eq!(s.stoi, None);
        assert!(to_jsonl(&[rec(1.0)]).contains("\"pesq\":null"));
    }
}
