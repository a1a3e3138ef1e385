use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mixture::{clip_seed, ClipSpec, Mixture, Synthesizer};
use crate::error::{Error, Result};
use crate::rir::{Rir, RirKind};
use crate::signal::{read_wav, write_wav};
use crate::split::Split;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// WAV file names of one clip, relative to the split directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipPaths {
    pub mic: String,
    pub far: String,
    pub near: String,
    pub echo: String,
    pub noise: String,
    pub rir_clean: String,
    pub rir_noisy: String,
}

impl ClipPaths {
    fn for_id(id: &str) -> Self {
        let f = |tag: &str| format!("{id}_{tag}.wav");
        ClipPaths {
            mic: f("mic"),
            far: f("far"),
            near: f("near"),
            echo: f("echo"),
            noise: f("noise"),
            rir_clean: f("rir_clean"),
            rir_noisy: f("rir_noisy"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    #[serde(flatten)]
    pub spec: ClipSpec,
    pub paths: ClipPaths,
}

/// Random access to clips, either stored or synthesized on demand.
pub trait ClipSource: Sync {
    fn len(&self) -> usize;

    fn clip(&self, index: usize) -> Result<Mixture>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A split directory with its manifest.
#[derive(Clone, Debug)]
pub struct Manifest {
    pub dir: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let path = dir.join(MANIFEST_FILE);
        let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut records = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| Error::json(&path, e))?);
        }
        Ok(Manifest { dir, records })
    }

    pub fn save(&self) -> Result<()> {
        let path = self.dir.join(MANIFEST_FILE);
        let mut out =
            std::io::BufWriter::new(std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?);
        for r in &self.records {
            let line = serde_json::to_string(r).map_err(|e| Error::json(&path, e))?;
            writeln!(out, "{line}").map_err(|e| Error::io(&path, e))?;
        }
        out.flush().map_err(|e| Error::io(&path, e))
    }

    /// Ids whose WAV files are missing on disk.
    pub fn missing(&self) -> Vec<String> {
        self.records
            .iter()
            .filter(|r| {
                let p = &r.paths;
                [
                    &p.mic,
                    &p.far,
                    &p.near,
                    &p.echo,
                    &p.noise,
                    &p.rir_clean,
                    &p.rir_noisy,
                ]
                .iter()
                .any(|f| !self.dir.join(f).is_file())
            })
            .map(|r| r.spec.id.clone())
            .collect()
    }

    fn load_record(&self, r: &ManifestRecord) -> Result<Mixture> {
        let read = |f: &str| read_wav(self.dir.join(f));
        let clean_kind = if r.spec.room.is_some() {
            RirKind::Clean
        } else {
            RirKind::Imported
        };
        Ok(Mixture {
            spec: r.spec.clone(),
            y: read(&r.paths.mic)?,
            x: read(&r.paths.far)?,
            s: read(&r.paths.near)?,
            v: read(&r.paths.echo)?,
            d: read(&r.paths.noise)?,
            rir_clean: Rir {
                h: read(&r.paths.rir_clean)?,
                room: r.spec.room.clone(),
                kind: clean_kind,
            },
            rir_noisy: Rir {
                h: read(&r.paths.rir_noisy)?,
                room: r.spec.room.clone(),
                kind: RirKind::Noisy,
            },
        })
    }
}

impl ClipSource for Manifest {
    fn len(&self) -> usize {
        self.records.len()
    }

    fn clip(&self, index: usize) -> Result<Mixture> {
        let r = self
            .records
            .get(index)
            .ok_or_else(|| Error::Config(format!("clip {index} out of range")))?;
        self.load_record(r).map_err(|e| Error::Clip {
            index,
            source: Box::new(e),
        })
    }
}

/// Clips generated on request from a synthesizer and master seed; nothing
/// is kept in memory between calls.
#[derive(Clone, Debug)]
pub struct SynthSet {
    pub synth: Synthesizer,
    pub split: Split,
    pub count: usize,
    pub master_seed: u64,
}

impl ClipSource for SynthSet {
    fn len(&self) -> usize {
        self.count
    }

    fn clip(&self, index: usize) -> Result<Mixture> {
        self.synth.clip(
            self.split,
            index,
            clip_seed(self.master_seed, self.split, index),
        )
    }
}

impl ClipSource for Vec<Mixture> {
    fn len(&self) -> usize {
        <[Mixture]>::len(self)
    }

    fn clip(&self, index: usize) -> Result<Mixture> {
        self.get(index)
            .cloned()
            .ok_or_else(|| Error::Config(format!("clip {index} out of range")))
    }
}

fn write_clip(dir: &Path, m: &Mixture) -> Result<ManifestRecord> {
    let paths = ClipPaths::for_id(&m.spec.id);
    write_wav(dir.join(&paths.mic), &m.y)?;
    write_wav(dir.join(&paths.far), &m.x)?;
    write_wav(dir.join(&paths.near), &m.s)?;
    write_wav(dir.join(&paths.echo), &m.v)?;
    write_wav(dir.join(&paths.noise), &m.d)?;
    write_wav(dir.join(&paths.rir_clean), &m.rir_clean.h)?;
    write_wav(dir.join(&paths.rir_noisy), &m.rir_noisy.h)?;
    Ok(ManifestRecord {
        spec: m.spec.clone(),
        paths,
    })
}

/// Synthesizes `count` clips of `split` into `out_dir` and writes the
/// manifest. Clips are generated in parallel; the manifest is ordered by
/// index.
pub fn build_dataset(
    synth: &Synthesizer,
    split: Split,
    count: usize,
    master_seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<Manifest> {
    let dir = out_dir.as_ref().to_path_buf();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let records = (0..count)
        .into_par_iter()
        .map(|index| {
            let m = synth.clip(split, index, clip_seed(master_seed, split, index))?;
            write_clip(&dir, &m)
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest { dir, records };
    manifest.save()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::ScenarioConfig;

    #[test]
    fn dataset_round_trips_losslessly() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ScenarioConfig {
            clip_seconds: 0.5,
            ..Default::default()
        };
        let synth = Synthesizer::new(cfg).unwrap();
        let m = build_dataset(&synth, Split::Val, 3, 9, dir.path()).unwrap();
        assert!(m.missing().is_empty());
        let loaded = Manifest::load(dir.path()).unwrap();
        assert_eq!(loaded.records, m.records);
        let on_demand = SynthSet {
            synth,
            split: Split::Val,
            count: 3,
            master_seed: 9,
        };
        for i in 0..3 {
            let a = loaded.clip(i).unwrap();
            let b = on_demand.clip(i).unwrap();
            assert_eq!(a, b);
        }
        std::fs::remove_file(dir.path().join(&m.records[1].paths.echo)).unwrap();
        assert_eq!(loaded.missing(), vec![m.records[1].spec.id.clone()]);
        assert!(loaded.clip(1).is_err());
        assert!(loaded.clip(7).is_err());
    }
}
