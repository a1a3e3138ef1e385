use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::measure::{erle, lsd, sdr, sisnr};
use crate::error::{Error, Result};
use crate::signal::StftConfig;
use crate::split::Split;
use crate::synth::{ClipSource, Manifest, Mixture, Scenario};

/// Anything that turns a clip into a near-end estimate.
pub trait Enhancer: Sync {
    /// Row label in metric tables.
    fn name(&self) -> String;

    fn enhance(&self, clip: &Mixture) -> Result<Vec<f64>>;
}

/// Passes the microphone signal through unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl Enhancer for Identity {
    fn name(&self) -> String {
        "mix".into()
    }

    fn enhance(&self, clip: &Mixture) -> Result<Vec<f64>> {
        Ok(clip.y.samples().to_vec())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipMetrics {
    pub id: String,
    pub split: Split,
    pub scenario: Scenario,
    pub erle_db: Option<f64>,
    pub sdr_db: Option<f64>,
    pub sisnr_db: Option<f64>,
    pub lsd_db: Option<f64>,
}

impl ClipMetrics {
    /// Scores an estimate: ERLE on far-end single talk, SDR, SI-SNR and
    /// log-spectral distance on double talk.
    pub fn score(clip: &Mixture, estimate: &[f64]) -> Result<Self> {
        let (s, y) = (clip.s.samples(), clip.y.samples());
        let mut m = ClipMetrics {
            id: clip.id().to_string(),
            split: clip.spec.split,
            scenario: clip.scenario(),
            erle_db: None,
            sdr_db: None,
            sisnr_db: None,
            lsd_db: None,
        };
        match m.scenario {
            Scenario::FarEndSingleTalk => m.erle_db = Some(erle(m.scenario, y, estimate)?),
            Scenario::DoubleTalk => {
                // a silent estimate is as far from the target as the cap allows
                let silent = estimate.iter().all(|v| *v == 0.0);
                let cap = -super::measure::RATIO_CAP_DB;
                m.sdr_db = Some(if silent { cap } else { sdr(s, estimate)? });
                m.sisnr_db = Some(if silent { cap } else { sisnr(s, estimate)? });
                m.lsd_db = Some(lsd(s, estimate, &StftConfig::MODEL)?);
            }
        }
        Ok(m)
    }

    fn values(&self) -> impl Iterator<Item = (&'static str, f64)> {
        [
            ("erle", self.erle_db),
            ("sdr", self.sdr_db),
            ("sisnr", self.sisnr_db),
            ("lsd", self.lsd_db),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
    }
}

/// One aggregate row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub split: Split,
    pub scenario: Scenario,
    pub metric: String,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub clips: Vec<(String, ClipMetrics)>,
}

pub const CSV_HEADER: &str = "model,split,scenario,metric,mean,std,n";

impl MetricReport {
    pub fn extend(&mut self, other: MetricReport) {
        self.clips.extend(other.clips);
    }

    /// Means per model, split, scenario and metric, in sorted order.
    pub fn rows(&self) -> Vec<MetricRow> {
        let mut groups: BTreeMap<(String, Split, Scenario, &'static str), Vec<f64>> =
            BTreeMap::new();
        for (model, c) in &self.clips {
            for (metric, v) in c.values() {
                groups
                    .entry((model.clone(), c.split, c.scenario, metric))
                    .or_default()
                    .push(v);
            }
        }
        groups
            .into_iter()
            .map(|((model, split, scenario, metric), vals)| {
                let n = vals.len();
                let mean = vals.iter().sum::<f64>() / n as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                MetricRow {
                    model,
                    split,
                    scenario,
                    metric: metric.to_string(),
                    mean,
                    std: var.sqrt(),
                    n,
                }
            })
            .collect()
    }

    /// Mean of one metric, if any clip carries it.
    pub fn mean(&self, model: &str, split: Split, scenario: Scenario, metric: &str) -> Option<f64> {
        self.rows()
            .into_iter()
            .find(|r| {
                r.model == model && r.split == split && r.scenario == scenario && r.metric == metric
            })
            .map(|r| r.mean)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in self.rows() {
            writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{}",
                r.model, r.split, r.scenario, r.metric, r.mean, r.std, r.n
            )
            .expect("writing to a string");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Scores `enhancer` on every clip of `source`, in parallel, in clip order.
pub fn evaluate_source(enhancer: &dyn Enhancer, source: &dyn ClipSource) -> Result<MetricReport> {
    let name = enhancer.name();
    let clips = (0..source.len())
        .into_par_iter()
        .map(|i| {
            let clip = source.clip(i)?;
            let est = enhancer.enhance(&clip)?;
            ClipMetrics::score(&clip, &est)
                .map(|m| (name.clone(), m))
                .map_err(|e| Error::Clip {
                    index: i,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport { clips })
}

/// Like [`evaluate_source`] over a stored split, refusing to run when any
/// clip's files are missing.
pub fn evaluate_set(enhancer: &dyn Enhancer, manifest: &Manifest) -> Result<MetricReport> {
    let missing = manifest.missing();
    if !missing.is_empty() {
        return Err(Error::MissingClips(missing));
    }
    evaluate_source(enhancer, manifest)
}
