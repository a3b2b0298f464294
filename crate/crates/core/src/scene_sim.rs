//! Synthetic FMCW beat-signal generation for moving point scatterers.
//!
//! The received phase of chirp `m`, fast-time sample `n` for a scatterer at
//! instantaneous range `R(t_m)` is
//!
//! ```text
//! phi(n, m) = 2*pi * ( 2 f0 R(t_m) / c  +  2 kappa R(t_m) n t_s / c )
//! ```
//!
//! which for a constant-velocity target `R(t_m) = R0 + v m t_r` expands to the
//! usual carrier, Doppler and beat-frequency terms. Higher-order terms are
//! neglected. Samples are the real cosine of this phase (real ADC).

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::binio::{LeReader, LeWriter};
use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Chirps needed for one 15-frame sequence with 256-chirp frames and 146-chirp overlap.
pub const SEQUENCE_CHIRPS: usize = 256 + 14 * 110;

const RECORDING_MAGIC: &[u8; 4] = b"SPKR";
const RECORDING_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirpConfig {
    /// Carrier start frequency (Hz).
    pub f0: f64,
    /// Sweep bandwidth (Hz).
    pub bandwidth: f64,
    /// Samples per chirp.
    pub n_fast: usize,
    /// Fast-time sample period (s).
    pub t_s: f64,
    /// Chirp repetition interval, i.e. slow-time spacing (s).
    pub t_r: f64,
}

impl Default for ChirpConfig {
    /// 8 GHz carrier, 750 MHz sweep over 0.15 ms, 128 samples per chirp,
    /// 1796 chirps spanning ~3 s.
    fn default() -> Self {
        let n_fast = 128;
        Self {
            f0: 8.0e9,
            bandwidth: 750.0e6,
            n_fast,
            t_s: 0.15e-3 / n_fast as f64,
            t_r: 1.670e-3,
        }
    }
}

impl ChirpConfig {
    pub fn new(f0: f64, bandwidth: f64, n_fast: usize, t_s: f64, t_r: f64) -> Result<Self> {
        let cfg = Self {
            f0,
            bandwidth,
            n_fast,
            t_s,
            t_r,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("chirp config: {m}")));
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return bad("f0 must be positive");
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return bad("bandwidth must be positive");
        }
        if self.n_fast < 2 {
            return bad("n_fast must be at least 2");
        }
        if !(self.t_s > 0.0 && self.t_s.is_finite()) {
            return bad("t_s must be positive");
        }
        // Small slack so that t_r == n_fast * t_s survives rounding.
        if !(self.t_r.is_finite() && self.t_r >= self.chirp_duration() * (1.0 - 1e-12)) {
            return bad("t_r must be at least n_fast * t_s");
        }
        Ok(())
    }

    /// Active chirp duration `n_fast * t_s` (s).
    pub fn chirp_duration(&self) -> f64 {
        self.n_fast as f64 * self.t_s
    }

    /// Sweep slope `B / (n_fast * t_s)` (Hz/s).
    pub fn kappa(&self) -> f64 {
        self.bandwidth / self.chirp_duration()
    }

    /// Largest range representable in the one-sided fast-time spectrum (m).
    pub fn max_range(&self) -> f64 {
        SPEED_OF_LIGHT * self.n_fast as f64 / (4.0 * self.bandwidth)
    }

    /// Largest unambiguous radial speed (m/s).
    pub fn max_velocity(&self) -> f64 {
        SPEED_OF_LIGHT / (4.0 * self.f0 * self.t_r)
    }

    /// Continuous fast-time DFT bin for a target at `range_m`.
    pub fn range_bin(&self, range_m: f64) -> f64 {
        2.0 * self.bandwidth * range_m / SPEED_OF_LIGHT
    }

    /// Continuous slow-time DFT bin offset (from zero Doppler) for `velocity_mps`
    /// over a frame of `n_slow` chirps.
    pub fn doppler_bin(&self, velocity_mps: f64, n_slow: usize) -> f64 {
        2.0 * velocity_mps * self.f0 * n_slow as f64 * self.t_r / SPEED_OF_LIGHT
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointTarget {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub amplitude: f64,
}

impl PointTarget {
    pub fn new(range_m: f64, velocity_mps: f64, amplitude: f64) -> Self {
        Self {
            range_m,
            velocity_mps,
            amplitude,
        }
    }

    fn validate(&self, cfg: &ChirpConfig) -> Result<()> {
        if !(self.range_m >= 0.0) || !self.velocity_mps.is_finite() || !self.amplitude.is_finite()
        {
            return Err(Error::InvalidArgument(format!("invalid target {self:?}")));
        }
        if self.range_m > cfg.max_range() {
            return Err(Error::OutOfRange {
                what: "range_m",
                value: self.range_m,
                limit: cfg.max_range(),
            });
        }
        if self.velocity_mps.abs() >= cfg.max_velocity() {
            return Err(Error::OutOfRange {
                what: "velocity_mps",
                value: self.velocity_mps,
                limit: cfg.max_velocity(),
            });
        }
        Ok(())
    }
}

/// Beat-signal samples, chirp by chirp.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    /// Row-major `[n_chirps x n_fast]`.
    pub samples: Vec<f32>,
    pub n_chirps: usize,
    pub label: usize,
    pub cfg: ChirpConfig,
    /// Additive noise standard deviation used at synthesis. Not persisted;
    /// recordings read from disk report 0.
    pub noise_sigma: f64,
}

impl RawRecording {
    pub fn chirp(&self, m: usize) -> &[f32] {
        let n = self.cfg.n_fast;
        &self.samples[m * n..(m + 1) * n]
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = LeWriter::new(w);
        w.bytes(RECORDING_MAGIC)?;
        w.u32(RECORDING_VERSION)?;
        w.u32(self.label as u32)?;
        w.u32(self.n_chirps as u32)?;
        w.u32(self.cfg.n_fast as u32)?;
        w.f64(self.cfg.f0)?;
        w.f64(self.cfg.bandwidth)?;
        w.f64(self.cfg.t_s)?;
        w.f64(self.cfg.t_r)?;
        w.f32_slice(&self.samples)?;
        w.into_inner().flush()?;
        Ok(())
    }

    pub fn read_from<R: std::io::Read>(r: R) -> Result<Self> {
        let mut r = LeReader::new(r);
        r.magic(RECORDING_MAGIC)?;
        let version = r.u32()?;
        if version != RECORDING_VERSION {
            return Err(Error::format(format!("unsupported recording version {version}")));
        }
        let label = r.u32()? as usize;
        let n_chirps = r.u32()? as usize;
        let n_fast = r.u32()? as usize;
        let f0 = r.f64()?;
        let bandwidth = r.f64()?;
        let t_s = r.f64()?;
        let t_r = r.f64()?;
        let cfg = ChirpConfig::new(f0, bandwidth, n_fast, t_s, t_r)
            .map_err(|e| Error::format(e.to_string()))?;
        let samples = r.f32_vec(n_chirps * n_fast)?;
        r.finish()?;
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::format("non-finite sample"));
        }
        Ok(Self {
            samples,
            n_chirps,
            label,
            cfg,
            noise_sigma: 0.0,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?)).map_err(|e| e.with_path(path))
    }
}

/// Adds `amplitude * cos(phi(n, m))` for one scatterer whose range at chirp `m`
/// is `range_at(m)`.
fn accumulate_scatterer(
    out: &mut [f64],
    cfg: &ChirpConfig,
    n_chirps: usize,
    amplitude: f64,
    range_at: impl Fn(usize) -> f64,
) {
    let n_fast = cfg.n_fast;
    let kappa = cfg.kappa();
    for m in 0..n_chirps {
        let r = range_at(m);
        let carrier = (2.0 * r * cfg.f0 / SPEED_OF_LIGHT).fract();
        let beat = 2.0 * kappa * r * cfg.t_s / SPEED_OF_LIGHT;
        let row = &mut out[m * n_fast..(m + 1) * n_fast];
        for (n, v) in row.iter_mut().enumerate() {
            *v += amplitude * (2.0 * PI * (carrier + beat * n as f64)).cos();
        }
    }
}

fn finish_recording(
    mut acc: Vec<f64>,
    cfg: ChirpConfig,
    n_chirps: usize,
    label: usize,
    noise_sigma: f64,
    rng: &mut impl Rng,
) -> RawRecording {
    if noise_sigma > 0.0 {
        for v in acc.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += noise_sigma * z;
        }
    }
    RawRecording {
        samples: acc.into_iter().map(|v| v as f32).collect(),
        n_chirps,
        label,
        cfg,
        noise_sigma,
    }
}

/// Beat signal of constant-velocity point targets plus white Gaussian noise.
/// The returned recording carries label 0.
pub fn synth_beat_signal(
    targets: &[PointTarget],
    cfg: &ChirpConfig,
    n_chirps: usize,
    noise_sigma: f64,
    rng: &mut impl Rng,
) -> Result<RawRecording> {
    cfg.validate()?;
    if n_chirps == 0 {
        return Err(Error::InvalidArgument("n_chirps must be at least 1".into()));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::InvalidArgument("noise_sigma must be non-negative".into()));
    }
    for t in targets {
        t.validate(cfg)?;
    }
    let mut acc = vec![0.0f64; n_chirps * cfg.n_fast];
    for t in targets {
        accumulate_scatterer(&mut acc, cfg, n_chirps, t.amplitude, |m| {
            t.range_m + t.velocity_mps * m as f64 * cfg.t_r
        });
    }
    Ok(finish_recording(acc, *cfg, n_chirps, 0, noise_sigma, rng))
}

/// Kinematics of one scatterer within a script segment. Velocity is
/// `v + a*tau + A*sin(w*tau + phase)` with `w = 2*pi*osc_freq_hz`, `tau`
/// measured from the segment start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetMotion {
    pub start_range_m: f64,
    pub velocity_mps: f64,
    pub accel_mps2: f64,
    pub osc_amp_mps: f64,
    pub osc_freq_hz: f64,
    pub osc_phase: f64,
    pub amplitude: f64,
}

impl TargetMotion {
    fn steady(start_range_m: f64, velocity_mps: f64) -> Self {
        Self {
            start_range_m,
            velocity_mps,
            accel_mps2: 0.0,
            osc_amp_mps: 0.0,
            osc_freq_hz: 0.0,
            osc_phase: 0.0,
            amplitude: 1.0,
        }
    }

    pub fn velocity_at(&self, tau: f64) -> f64 {
        let w = 2.0 * PI * self.osc_freq_hz;
        self.velocity_mps + self.accel_mps2 * tau + self.osc_amp_mps * (w * tau + self.osc_phase).sin()
    }

    pub fn range_at(&self, tau: f64) -> f64 {
        let w = 2.0 * PI * self.osc_freq_hz;
        let osc = if w > 0.0 {
            self.osc_amp_mps / w * (self.osc_phase.cos() - (w * tau + self.osc_phase).cos())
        } else {
            self.osc_amp_mps * self.osc_phase.sin() * tau
        };
        self.start_range_m + self.velocity_mps * tau + 0.5 * self.accel_mps2 * tau * tau + osc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub duration_s: f64,
    /// One entry per scatterer; all segments of a script have the same count.
    pub targets: Vec<TargetMotion>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GestureScript {
    pub class_id: usize,
    pub n_classes: usize,
    pub n_targets: usize,
    pub segments: Vec<Segment>,
}

/// Default sequence duration covered by a script (s).
pub const GESTURE_DURATION_S: f64 = 3.0;

/// Maximum number of distinct synthetic gesture archetypes.
pub const MAX_CLASSES: usize = 11;

fn jitter(rng: &mut impl Rng, x: f64, rel: f64) -> f64 {
    x * (1.0 + rng.random_range(-rel..=rel))
}

fn rand_sign(rng: &mut impl Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

impl GestureScript {
    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    /// `(range, velocity)` of every scatterer at time `t` from script start.
    /// Times past the end hold the last segment's motion.
    pub fn state_at(&self, t: f64) -> Vec<(f64, f64)> {
        let mut start = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let last = i + 1 == self.segments.len();
            if t < start + seg.duration_s || last {
                let tau = t - start;
                return seg
                    .targets
                    .iter()
                    .map(|m| (m.range_at(tau), m.velocity_at(tau)))
                    .collect();
            }
            start += seg.duration_s;
        }
        Vec::new()
    }

    /// Renders the script into a raw recording of `n_chirps` chirps.
    pub fn render(
        &self,
        cfg: &ChirpConfig,
        n_chirps: usize,
        noise_sigma: f64,
        rng: &mut impl Rng,
    ) -> Result<RawRecording> {
        cfg.validate()?;
        if n_chirps == 0 {
            return Err(Error::InvalidArgument("n_chirps must be at least 1".into()));
        }
        if !(noise_sigma >= 0.0) {
            return Err(Error::InvalidArgument("noise_sigma must be non-negative".into()));
        }
        let trajectories: Vec<Vec<(f64, f64)>> = (0..n_chirps)
            .map(|m| self.state_at(m as f64 * cfg.t_r))
            .collect();
        for states in &trajectories {
            for &(r, v) in states {
                PointTarget::new(r, v, 1.0).validate(cfg)?;
            }
        }
        let mut acc = vec![0.0f64; n_chirps * cfg.n_fast];
        for k in 0..self.n_targets {
            let amplitude = self.segments[0].targets[k].amplitude;
            accumulate_scatterer(&mut acc, cfg, n_chirps, amplitude, |m| trajectories[m][k].0);
        }
        Ok(finish_recording(acc, *cfg, n_chirps, self.class_id, noise_sigma, rng))
    }
}

/// Builds a class-distinctive motion script. Scripts of one class share their
/// segment structure and differ only in jittered kinematic parameters.
///
/// Archetypes, in class order: steady single scatterer; single oscillating
/// scatterer; two steady scatterers moving apart; two oscillating scatterers in
/// anti-phase; accelerating approach; slow-then-fast; steady plus oscillating
/// pair; three steady scatterers; fast small oscillation; two scatterers same
/// direction at different speeds; approach-then-recede.
pub fn gen_gesture_script(
    class_id: usize,
    n_classes: usize,
    rng: &mut impl Rng,
) -> Result<GestureScript> {
    if n_classes == 0 || n_classes > MAX_CLASSES {
        return Err(Error::InvalidArgument(format!(
            "n_classes must be in 1..={MAX_CLASSES}, got {n_classes}"
        )));
    }
    if class_id >= n_classes {
        return Err(Error::InvalidArgument(format!(
            "class_id {class_id} out of range for {n_classes} classes"
        )));
    }
    let total = GESTURE_DURATION_S + 0.1;
    let r0 = |rng: &mut ChaCha8Rng, base: f64| base + rng.random_range(-0.5..=0.5);
    // Local generator so the archetype code can use one concrete type.
    let mut g = ChaCha8Rng::seed_from_u64(rng.random());
    let rng = &mut g;

    let steady = |rng: &mut ChaCha8Rng, base_r: f64, speed: f64| {
        TargetMotion::steady(r0(rng, base_r), jitter(rng, speed, 0.15))
    };
    let oscillating = |rng: &mut ChaCha8Rng, base_r: f64, amp: f64, freq: f64, phase: f64| {
        TargetMotion {
            osc_amp_mps: jitter(rng, amp, 0.15),
            osc_freq_hz: jitter(rng, freq, 0.15),
            osc_phase: phase,
            ..TargetMotion::steady(r0(rng, base_r), 0.0)
        }
    };

    let segments: Vec<Vec<TargetMotion>> = match class_id {
        0 => {
            let s = rand_sign(rng);
            vec![vec![steady(rng, 6.0, -0.8 * s)]]
        }
        1 => {
            let ph = rng.random_range(0.0..2.0 * PI);
            vec![vec![oscillating(rng, 5.0, 1.6, 1.2, ph)]]
        }
        2 => vec![vec![steady(rng, 4.0, -0.9), steady(rng, 7.0, 0.9)]],
        3 => {
            let ph = rng.random_range(0.0..2.0 * PI);
            let (a, f) = (jitter(rng, 1.4, 0.15), jitter(rng, 1.0, 0.15));
            let mk = |rng: &mut ChaCha8Rng, base, phase| TargetMotion {
                osc_amp_mps: a,
                osc_freq_hz: f,
                osc_phase: phase,
                ..TargetMotion::steady(r0(rng, base), 0.0)
            };
            vec![vec![mk(rng, 4.0, ph), mk(rng, 7.0, ph + PI)]]
        }
        4 => {
            let mut m = steady(rng, 7.0, -0.2);
            m.accel_mps2 = jitter(rng, -0.9, 0.15);
            vec![vec![m]]
        }
        5 => {
            let s = rand_sign(rng);
            let first = steady(rng, 5.0, 0.25 * s);
            let t1 = 1.5;
            let second = TargetMotion::steady(first.range_at(t1), jitter(rng, 1.8, 0.15) * s);
            return Ok(GestureScript {
                class_id,
                n_classes,
                n_targets: 1,
                segments: vec![
                    Segment {
                        duration_s: t1,
                        targets: vec![first],
                    },
                    Segment {
                        duration_s: total - t1,
                        targets: vec![second],
                    },
                ],
            });
        }
        6 => {
            let ph = rng.random_range(0.0..2.0 * PI);
            vec![vec![steady(rng, 3.5, 0.7), oscillating(rng, 7.5, 1.2, 1.5, ph)]]
        }
        7 => vec![vec![
            steady(rng, 3.0, 0.6),
            steady(rng, 5.5, -0.6),
            steady(rng, 7.0, 1.2),
        ]],
        8 => {
            let ph = rng.random_range(0.0..2.0 * PI);
            vec![vec![oscillating(rng, 5.0, 0.8, 2.5, ph)]]
        }
        9 => vec![vec![steady(rng, 7.0, -0.4), steady(rng, 8.5, -1.5)]],
        10 => {
            let first = steady(rng, 6.0, -1.2);
            let t1 = 1.5;
            let second = TargetMotion::steady(first.range_at(t1), jitter(rng, 1.2, 0.15));
            return Ok(GestureScript {
                class_id,
                n_classes,
                n_targets: 1,
                segments: vec![
                    Segment {
                        duration_s: t1,
                        targets: vec![first],
                    },
                    Segment {
                        duration_s: total - t1,
                        targets: vec![second],
                    },
                ],
            });
        }
        _ => unreachable!("class_id bounded by MAX_CLASSES"),
    };
    let mut segments: Vec<Segment> = segments
        .into_iter()
        .map(|targets| Segment {
            duration_s: total,
            targets,
        })
        .collect();
    for seg in &mut segments {
        for t in &mut seg.targets {
            t.amplitude = rng.random_range(0.8..=1.2);
        }
    }
    let n_targets = segments[0].targets.len();
    Ok(GestureScript {
        class_id,
        n_classes,
        n_targets,
        segments,
    })
}

/// Parameters of a synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSpec {
    pub n_classes: usize,
    pub n_per_class: usize,
    pub n_chirps: usize,
    pub noise_sigma: f64,
    pub cfg: ChirpConfig,
}

impl DatasetSpec {
    pub fn new(n_classes: usize, n_per_class: usize) -> Self {
        Self {
            n_classes,
            n_per_class,
            n_chirps: SEQUENCE_CHIRPS,
            noise_sigma: 0.5,
            cfg: ChirpConfig::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.n_classes * self.n_per_class
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        if self.n_per_class == 0 {
            return Err(Error::InvalidArgument("n_per_class must be at least 1".into()));
        }
        if self.n_classes == 0 || self.n_classes > MAX_CLASSES {
            return Err(Error::InvalidArgument(format!(
                "n_classes must be in 1..={MAX_CLASSES}"
            )));
        }
        self.cfg.validate()
    }

    /// Label of the `index`-th recording; classes are interleaved.
    pub fn label_of(&self, index: usize) -> usize {
        index % self.n_classes
    }

    /// Generates recording `index` from its own ChaCha stream, so any subset
    /// can be produced independently and in any order.
    pub fn recording(&self, seed: u64, index: usize) -> Result<RawRecording> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let script = gen_gesture_script(self.label_of(index), self.n_classes, &mut rng)?;
        script.render(&self.cfg, self.n_chirps, self.noise_sigma, &mut rng)
    }

    pub fn generate(&self, seed: u64) -> Result<Vec<RawRecording>> {
        self.validate()?;
        (0..self.len()).map(|i| self.recording(seed, i)).collect()
    }
}

/// Dataset index: one `path,label` line per recording, paths relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<(PathBuf, usize)>,
}

pub const MANIFEST_FILE: &str = "manifest.txt";

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (p, label) in &self.entries {
            s.push_str(&format!("{},{}\n", p.display(), label));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (p, l) = line
                .rsplit_once(',')
                .ok_or_else(|| Error::format(format!("manifest line {}: expected path,label", lineno + 1)))?;
            let label = l
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::format(format!("manifest line {}: bad label {l:?}", lineno + 1)))?;
            entries.push((PathBuf::from(p.trim()), label));
        }
        Ok(Self { entries })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(MANIFEST_FILE), self.to_text())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)?;
        Self::parse(&text).map_err(|e| e.with_path(&path))
    }

    /// Number of entries per label, indexed by label.
    pub fn label_counts(&self) -> Vec<usize> {
        let n = self.entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
        let mut counts = vec![0; n];
        for (_, l) in &self.entries {
            counts[*l] += 1;
        }
        counts
    }
}

/// Writes a balanced synthetic dataset (`rec_NNNNN.spkr` files plus
/// `manifest.txt`) into `out_dir`.
pub fn build_dataset(spec: &DatasetSpec, seed: u64, out_dir: &Path) -> Result<Manifest> {
    spec.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut manifest = Manifest::default();
    for i in 0..spec.len() {
        let rec = spec.recording(seed, i)?;
        let name = PathBuf::from(format!("rec_{i:05}.spkr"));
        rec.save(&out_dir.join(&name))?;
        manifest.entries.push((name, rec.label));
    }
    manifest.save(out_dir)?;
    Ok(manifest)
}
