use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::glyphs::glyph_bitmap;
use crate::error::{Error, Result};

pub const AUDIO_F: usize = 32;
pub const AUDIO_T: usize = 8;
/// Frequency-bin offset applied to a sprite's band on its bounce frames.
pub const BOUNCE_SHIFT: usize = 2;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SpriteSpec {
    pub glyph: u8,
    pub size: usize,
    pub pos: (f64, f64),
    pub vel: (f64, f64),
    /// Base frequency-bin index of this sprite's tone.
    pub tone: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub sprites: Vec<SpriteSpec>,
    pub t_total: usize,
    pub k_seen: usize,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_seen < 1 || self.k_seen >= self.t_total {
            return Err(Error::Dataset(format!(
                "need 1 <= K < T, got K={} T={}",
                self.k_seen, self.t_total
            )));
        }
        if self.channels != 1 {
            return Err(Error::Dataset("only single-channel frames supported".into()));
        }
        for (i, s) in self.sprites.iter().enumerate() {
            if s.size > self.height.min(self.width) {
                return Err(Error::Dataset(format!(
                    "sprite {i} size {} exceeds canvas {}x{}",
                    s.size, self.height, self.width
                )));
            }
            if s.glyph > 9 {
                return Err(Error::Dataset(format!("sprite {i} has unknown glyph {}", s.glyph)));
            }
            if s.tone + BOUNCE_SHIFT >= AUDIO_F {
                return Err(Error::Dataset(format!(
                    "sprite {i} tone {} + bounce shift out of the {AUDIO_F}-bin range",
                    s.tone
                )));
            }
            let max_x = (self.width - s.size) as f64;
            let max_y = (self.height - s.size) as f64;
            if s.pos.0 < 0.0 || s.pos.0 > max_x || s.pos.1 < 0.0 || s.pos.1 > max_y {
                return Err(Error::Dataset(format!("sprite {i} starts outside the canvas")));
            }
        }
        Ok(())
    }

    /// True when every sprite is motionless (zero flow everywhere).
    pub fn is_static(&self) -> bool {
        self.sprites
            .iter()
            .all(|s| s.vel.0 == 0.0 && s.vel.1 == 0.0)
    }
}

/// Per-sprite state over time from the bouncing simulation.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// positions[t][sprite] = (x, y) of the top-left corner.
    pub positions: Vec<Vec<(f64, f64)>>,
    /// velocities[t][sprite] after any reflection at frame t.
    pub velocities: Vec<Vec<(f64, f64)>>,
    /// bounced[t][sprite]: a wall reflection happened entering frame t.
    pub bounced: Vec<Vec<bool>>,
}

fn reflect(p: f64, v: f64, max: f64) -> (f64, f64, bool) {
    let mut p = p + v;
    let mut v = v;
    let mut hit = false;
    if p < 0.0 {
        p = -p;
        v = -v;
        hit = true;
    }
    if p > max {
        p = 2.0 * max - p;
        v = -v;
        hit = true;
    }
    (p.clamp(0.0, max), v, hit)
}

/// Advance each sprite by its velocity per frame, reflecting elastically
/// off the canvas walls. Deterministic in the spec alone.
pub fn simulate_trajectory(spec: &SceneSpec) -> Result<Trajectory> {
    spec.validate()?;
    let mut positions = Vec::with_capacity(spec.t_total);
    let mut velocities = Vec::with_capacity(spec.t_total);
    let mut bounced = Vec::with_capacity(spec.t_total);
    let mut cur: Vec<(f64, f64)> = spec.sprites.iter().map(|s| s.pos).collect();
    let mut vel: Vec<(f64, f64)> = spec.sprites.iter().map(|s| s.vel).collect();
    positions.push(cur.clone());
    velocities.push(vel.clone());
    bounced.push(vec![false; spec.sprites.len()]);
    for _t in 1..spec.t_total {
        let mut hit_flags = Vec::with_capacity(spec.sprites.len());
        for (i, s) in spec.sprites.iter().enumerate() {
            let max_x = (spec.width - s.size) as f64;
            let max_y = (spec.height - s.size) as f64;
            let (px, vx, hx) = reflect(cur[i].0, vel[i].0, max_x);
            let (py, vy, hy) = reflect(cur[i].1, vel[i].1, max_y);
            cur[i] = (px, py);
            vel[i] = (vx, vy);
            hit_flags.push(hx || hy);
        }
        positions.push(cur.clone());
        velocities.push(vel.clone());
        bounced.push(hit_flags);
    }
    Ok(Trajectory {
        positions,
        velocities,
        bounced,
    })
}

/// Bilinear splat of one glyph onto its own layer at a float position.
fn splat_sprite(layer: &mut [f64], h: usize, w: usize, glyph: &[f64], size: usize, pos: (f64, f64)) {
    for gy in 0..size {
        for gx in 0..size {
            let v = glyph[gy * size + gx];
            if v == 0.0 {
                continue;
            }
            let x = pos.0 + gx as f64;
            let y = pos.1 + gy as f64;
            let x0 = x.floor();
            let y0 = y.floor();
            let fx = x - x0;
            let fy = y - y0;
            let (x0, y0) = (x0 as isize, y0 as isize);
            for (dy, wy) in [(0isize, 1.0 - fy), (1, fy)] {
                for (dx, wx) in [(0isize, 1.0 - fx), (1, fx)] {
                    let wgt = wy * wx;
                    if wgt == 0.0 {
                        continue;
                    }
                    let (yy, xx) = (y0 + dy, x0 + dx);
                    if yy >= 0 && (yy as usize) < h && xx >= 0 && (xx as usize) < w {
                        layer[yy as usize * w + xx as usize] += v * wgt;
                    }
                }
            }
        }
    }
}

/// Composite all sprites (max blend) for every frame; values in [0,1].
pub fn render_frames(spec: &SceneSpec, traj: &Trajectory) -> Result<Vec<f64>> {
    let (h, w) = (spec.height, spec.width);
    let mut frames: Vec<f64> = vec![0.0; spec.t_total * spec.channels * h * w];
    let glyphs: Vec<Vec<f64>> = spec
        .sprites
        .iter()
        .map(|s| {
            glyph_bitmap(s.glyph, s.size)
                .ok_or_else(|| Error::Dataset(format!("unknown glyph id {}", s.glyph)))
        })
        .collect::<Result<_>>()?;
    let mut layer: Vec<f64> = vec![0.0; h * w];
    for t in 0..spec.t_total {
        let frame = &mut frames[t * h * w..(t + 1) * h * w];
        for (i, s) in spec.sprites.iter().enumerate() {
            layer.iter_mut().for_each(|v| *v = 0.0);
            splat_sprite(&mut layer, h, w, &glyphs[i], s.size, traj.positions[t][i]);
            for (f, l) in frame.iter_mut().zip(&layer) {
                *f = (*f).max(l.min(1.0));
            }
        }
    }
    Ok(frames)
}

/// Analytically exact backward flow: for each pixel covered by a sprite in
/// frame t, flow = position_{t-1} - position_t of that sprite; later sprites
/// in the list win where they overlap. flows[0] is zero.
pub fn exact_backward_flow(spec: &SceneSpec, traj: &Trajectory) -> Result<Vec<f64>> {
    let (h, w) = (spec.height, spec.width);
    let plane = h * w;
    let mut flows = vec![0.0; spec.t_total * 2 * plane];
    let glyphs: Vec<Vec<f64>> = spec
        .sprites
        .iter()
        .map(|s| {
            glyph_bitmap(s.glyph, s.size)
                .ok_or_else(|| Error::Dataset(format!("unknown glyph id {}", s.glyph)))
        })
        .collect::<Result<_>>()?;
    let mut layer: Vec<f64> = vec![0.0; plane];
    for t in 1..spec.t_total {
        let flow = &mut flows[t * 2 * plane..(t + 1) * 2 * plane];
        for (i, s) in spec.sprites.iter().enumerate() {
            let dx = traj.positions[t - 1][i].0 - traj.positions[t][i].0;
            let dy = traj.positions[t - 1][i].1 - traj.positions[t][i].1;
            layer.iter_mut().for_each(|v| *v = 0.0);
            splat_sprite(&mut layer, h, w, &glyphs[i], s.size, traj.positions[t][i]);
            for p in 0..plane {
                if layer[p] > 0.0 {
                    flow[p] = dx;
                    flow[plane + p] = dy;
                }
            }
        }
    }
    Ok(flows)
}

/// Synthetic spectrogram for frame t: one horizontal band per sprite at its
/// tone bin, shifted up by BOUNCE_SHIFT on bounce frames; amplitude falls
/// off with distance from the canvas origin as 1/(1 + d/d0), d0 = diag/4.
pub fn synth_spectrogram(spec: &SceneSpec, traj: &Trajectory, t: usize) -> Result<Vec<f64>> {
    if t >= spec.t_total {
        return Err(Error::Dataset(format!(
            "frame {t} out of range (T={})",
            spec.t_total
        )));
    }
    let mut spec_out: Vec<f64> = vec![0.0; AUDIO_F * AUDIO_T];
    let diag = ((spec.height * spec.height + spec.width * spec.width) as f64).sqrt();
    let d0 = diag / 4.0;
    for (i, s) in spec.sprites.iter().enumerate() {
        let (x, y) = traj.positions[t][i];
        let d = (x * x + y * y).sqrt();
        let amp = (1.0 / (1.0 + d / d0)).clamp(0.0, 1.0);
        let row = if traj.bounced[t][i] {
            s.tone + BOUNCE_SHIFT
        } else {
            s.tone
        };
        for c in 0..AUDIO_T {
            let cell = &mut spec_out[row * AUDIO_T + c];
            *cell = (*cell).max(amp);
        }
    }
    Ok(spec_out)
}

/// One generated multimodal sample with flat row-major arrays.
#[derive(Clone, Debug)]
pub struct Sequence {
    pub spec: SceneSpec,
    /// [T, C, H, W]
    pub frames: Vec<f64>,
    /// [T, AUDIO_F, AUDIO_T]
    pub audio: Vec<f64>,
    /// [T, 2, H, W]; flows[t] maps frame t pixels back into frame t-1.
    pub flows: Vec<f64>,
}

impl Sequence {
    pub fn frame_len(&self) -> usize {
        self.spec.channels * self.spec.height * self.spec.width
    }

    pub fn flow_len(&self) -> usize {
        2 * self.spec.height * self.spec.width
    }

    pub fn audio_len(&self) -> usize {
        AUDIO_F * AUDIO_T
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t * self.frame_len()..(t + 1) * self.frame_len()]
    }

    pub fn flow(&self, t: usize) -> &[f64] {
        &self.flows[t * self.flow_len()..(t + 1) * self.flow_len()]
    }

    pub fn audio_clip(&self, t: usize) -> &[f64] {
        &self.audio[t * self.audio_len()..(t + 1) * self.audio_len()]
    }
}

/// Deterministic generation of the full sequence from its spec.
pub fn generate(spec: &SceneSpec) -> Result<Sequence> {
    let traj = simulate_trajectory(spec)?;
    let frames = render_frames(spec, &traj)?;
    let flows = exact_backward_flow(spec, &traj)?;
    let mut audio = Vec::with_capacity(spec.t_total * AUDIO_F * AUDIO_T);
    for t in 0..spec.t_total {
        audio.extend(synth_spectrogram(spec, &traj, t)?);
    }
    Ok(Sequence {
        spec: spec.clone(),
        frames,
        audio,
        flows,
    })
}

/// Canvas/length presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    /// 48x48, T=25, K=5.
    Default,
    /// 32x32, T=15, K=5.
    Small,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Profile> {
        match s {
            "default" => Ok(Profile::Default),
            "small" => Ok(Profile::Small),
            other => Err(Error::Config(format!("unknown profile '{other}'"))),
        }
    }

    pub fn canvas(&self) -> (usize, usize) {
        match self {
            Profile::Default => (48, 48),
            Profile::Small => (32, 32),
        }
    }

    pub fn t_total(&self) -> usize {
        match self {
            Profile::Default => 25,
            Profile::Small => 15,
        }
    }

    pub fn k_seen(&self) -> usize {
        5
    }

    pub fn sprite_size(&self) -> usize {
        12
    }
}

/// Random scene for sample `index` of a dataset: integer positions and
/// speeds (components in {-3,-2,2,3}) so the rendered motion is an exact
/// pixel shift, and well-separated tone bands per sprite.
pub fn sample_scene(profile: Profile, sprites: usize, master_seed: u64, index: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index + 1)));
    let (h, w) = profile.canvas();
    let size = profile.sprite_size();
    let speeds = [-3.0, -2.0, 2.0, 3.0];
    let sprite_specs = (0..sprites)
        .map(|i| {
            let max_x = (w - size) as u64;
            let max_y = (h - size) as u64;
            SpriteSpec {
                glyph: rng.gen_range(0..10),
                size,
                pos: (
                    rng.gen_range(0..=max_x) as f64,
                    rng.gen_range(0..=max_y) as f64,
                ),
                vel: (
                    speeds[rng.gen_range(0..speeds.len())],
                    speeds[rng.gen_range(0..speeds.len())],
                ),
                tone: 4 + i * 12 + rng.gen_range(0..6),
            }
        })
        .collect();
    SceneSpec {
        height: h,
        width: w,
        channels: 1,
        sprites: sprite_specs,
        t_total: profile.t_total(),
        k_seen: profile.k_seen(),
        seed: master_seed ^ index,
    }
}
