//! Synthetic multimodal sequences: bouncing digit sprites with analytically
//! exact backward optical flow and tone-band spectrograms, plus the on-disk
//! dataset format.

mod glyphs;
mod io;
mod synth;

pub use glyphs::{glyph_bitmap, GLYPH_SIZE};
pub use io::{
    read_dataset, read_manifest, read_sample, write_dataset, DatasetManifest, SampleEntry,
    FORMAT_VERSION,
};
pub use synth::{
    exact_backward_flow, generate, render_frames, sample_scene, simulate_trajectory,
    synth_spectrogram, Profile, SceneSpec, Sequence, SpriteSpec, Trajectory, AUDIO_F, AUDIO_T,
    BOUNCE_SHIFT,
};
