//! Echo scenario synthesis: loudspeaker nonlinearity, source material,
//! mixing at target ratios and dataset persistence.

mod dataset;
mod mixture;
mod nonlinear;
mod sources;

pub use dataset::{
    build_dataset, ClipPaths, ClipSource, Manifest, ManifestRecord, SynthSet, MANIFEST_FILE,
};
pub use mixture::{
    clip_id, clip_seed, mix, synth_echo, ClipSpec, MixParts, Mixture, Scenario, ScenarioConfig,
    Synthesizer,
};
pub use nonlinear::{apply_nonlinearity, CLIP_RATIO};
pub use sources::{synth_noise, synth_speech, SourceConfig, SourcePool, Sources};
