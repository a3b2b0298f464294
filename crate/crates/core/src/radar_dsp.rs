//! Raw recordings to range-Doppler map sequences.
//!
//! Pipeline per frame: slow-time mean subtraction (static clutter removal),
//! fast-time DFT keeping the positive-frequency half, slow-time DFT with the
//! zero-Doppler bin rotated to the centre column, magnitude, bilinear
//! resampling to the map size, and per-map max normalisation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::binio::{LeReader, LeWriter};
use crate::error::{Error, Result};
use crate::scene_sim::{ChirpConfig, Manifest, RawRecording, SPEED_OF_LIGHT};

pub const FRAME_LEN: usize = 256;
pub const FRAME_OVERLAP: usize = 146;
pub const SEQUENCE_LEN: usize = 15;
pub const MAP_SIZE: usize = 128;

const SEQUENCE_MAGIC: &[u8; 4] = b"RDSQ";

/// Fast-time by slow-time samples of one radar frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarFrame {
    /// Row-major `[n_fast x n_slow]`: row = fast-time sample, column = chirp.
    pub data: Vec<f64>,
    pub n_fast: usize,
    pub n_slow: usize,
    pub cfg: ChirpConfig,
}

impl RadarFrame {
    pub fn from_fn(cfg: ChirpConfig, n_slow: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let n_fast = cfg.n_fast;
        let mut data = Vec::with_capacity(n_fast * n_slow);
        for n in 0..n_fast {
            for m in 0..n_slow {
                data.push(f(n, m));
            }
        }
        Self {
            data,
            n_fast,
            n_slow,
            cfg,
        }
    }

    pub fn at(&self, n: usize, m: usize) -> f64 {
        self.data[n * self.n_slow + m]
    }
}

/// Normalised range-Doppler magnitude map.
#[derive(Debug, Clone, PartialEq)]
pub struct RdMap {
    /// Row-major `[height x width]`: rows are range bins, columns Doppler bins
    /// with zero velocity in column `width / 2`.
    pub mag: Vec<f32>,
    pub height: usize,
    pub width: usize,
}

impl RdMap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            mag: vec![0.0; height * width],
            height,
            width,
        }
    }

    pub fn at(&self, r: usize, d: usize) -> f32 {
        self.mag[r * self.width + d]
    }

    /// `(row, col)` of the largest entry; first occurrence wins.
    pub fn argmax(&self) -> (usize, usize) {
        let (mut best, mut idx) = (f32::NEG_INFINITY, 0);
        for (i, &v) in self.mag.iter().enumerate() {
            if v > best {
                best = v;
                idx = i;
            }
        }
        (idx / self.width, idx % self.width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdSequence {
    pub maps: Vec<RdMap>,
    pub label: usize,
}

impl RdSequence {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn map_shape(&self) -> (usize, usize) {
        self.maps.first().map(|m| (m.height, m.width)).unwrap_or((0, 0))
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let (h, wd) = self.map_shape();
        if self.maps.iter().any(|m| m.height != h || m.width != wd) {
            return Err(Error::Shape("sequence maps differ in shape".into()));
        }
        let mut w = LeWriter::new(w);
        w.bytes(SEQUENCE_MAGIC)?;
        w.u32(self.maps.len() as u32)?;
        w.u32(h as u32)?;
        w.u32(wd as u32)?;
        w.u32(self.label as u32)?;
        for m in &self.maps {
            w.f32_slice(&m.mag)?;
        }
        w.into_inner().flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = LeReader::new(r);
        r.magic(SEQUENCE_MAGIC)?;
        let l = r.u32()? as usize;
        let h = r.u32()? as usize;
        let w = r.u32()? as usize;
        let label = r.u32()? as usize;
        let mut maps = Vec::with_capacity(l);
        for _ in 0..l {
            maps.push(RdMap {
                mag: r.f32_vec(h * w)?,
                height: h,
                width: w,
            });
        }
        r.finish()?;
        Ok(Self { maps, label })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?)).map_err(|e| e.with_path(path))
    }
}

/// Extension of preprocessed sequence files in a dataset directory.
pub const SEQUENCE_EXT: &str = "spkq";

/// Loads every manifest entry of `dir`; raw recordings are preprocessed with
/// the default settings, `.spkq` files are read as they are.
pub fn load_dataset(dir: &Path) -> Result<Vec<RdSequence>> {
    let manifest = Manifest::load(dir)?;
    let mut proc = RdProcessor::default();
    let cfg = PreprocessConfig::default();
    manifest
        .entries
        .iter()
        .map(|(p, label)| {
            let path = dir.join(p);
            let seq = if path.extension().is_some_and(|e| e == SEQUENCE_EXT) {
                RdSequence::load(&path)?
            } else {
                proc.preprocess(&RawRecording::load(&path)?, &cfg)?
            };
            if seq.label != *label {
                return Err(Error::format(format!("label {} in file, {label} in manifest", seq.label)).with_path(&path));
            }
            Ok(seq)
        })
        .collect()
}

/// Writes `seq_NNNNN.spkq` files and a manifest into `dir`.
pub fn save_dataset(dir: &Path, seqs: &[RdSequence]) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = Manifest::default();
    for (i, s) in seqs.iter().enumerate() {
        let name = std::path::PathBuf::from(format!("seq_{i:05}.{SEQUENCE_EXT}"));
        s.save(&dir.join(&name))?;
        manifest.entries.push((name, s.label));
    }
    manifest.save(dir)?;
    Ok(manifest)
}

/// Range resolution `c / (2B)` (m).
pub fn range_resolution(cfg: &ChirpConfig) -> f64 {
    SPEED_OF_LIGHT / (2.0 * cfg.bandwidth)
}

/// Velocity resolution `c / (2 f0 M t_r)` for `n_slow` chirps per frame (m/s).
pub fn velocity_resolution(cfg: &ChirpConfig, n_slow: usize) -> f64 {
    SPEED_OF_LIGHT / (2.0 * cfg.f0 * n_slow as f64 * cfg.t_r)
}

/// Cuts overlapping frames: frame `k` covers chirps `[k*hop, k*hop + frame_len)`
/// with `hop = frame_len - overlap`. Every complete frame is returned.
pub fn slice_frames(rec: &RawRecording, frame_len: usize, overlap: usize) -> Result<Vec<RadarFrame>> {
    if frame_len == 0 {
        return Err(Error::InvalidArgument("frame_len must be positive".into()));
    }
    if overlap >= frame_len {
        return Err(Error::InvalidArgument(format!(
            "overlap {overlap} must be smaller than frame_len {frame_len}"
        )));
    }
    if rec.n_chirps < frame_len {
        return Err(Error::TooShort {
            required: frame_len,
            available: rec.n_chirps,
        });
    }
    let hop = frame_len - overlap;
    let n_frames = (rec.n_chirps - frame_len) / hop + 1;
    let n_fast = rec.cfg.n_fast;
    Ok((0..n_frames)
        .map(|k| {
            let start = k * hop;
            RadarFrame::from_fn(rec.cfg, frame_len, |n, m| rec.samples[(start + m) * n_fast + n] as f64)
        })
        .collect())
}

/// Subtracts the slow-time mean from every fast-time row.
pub fn remove_static_clutter(frame: &RadarFrame) -> RadarFrame {
    let mut out = frame.clone();
    for row in out.data.chunks_exact_mut(frame.n_slow) {
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        row.iter_mut().for_each(|v| *v -= mean);
    }
    out
}

/// Unnormalised magnitude spectrum `[n_fast/2 x n_slow]`, Doppler-centred.
#[derive(Debug, Clone, PartialEq)]
pub struct RdSpectrum {
    pub mag: Vec<f64>,
    pub n_range: usize,
    pub n_doppler: usize,
}

impl RdSpectrum {
    pub fn at(&self, r: usize, d: usize) -> f64 {
        self.mag[r * self.n_doppler + d]
    }

    pub fn argmax(&self) -> (usize, usize) {
        let (mut best, mut idx) = (f64::NEG_INFINITY, 0);
        for (i, &v) in self.mag.iter().enumerate() {
            if v > best {
                best = v;
                idx = i;
            }
        }
        (idx / self.n_doppler, idx % self.n_doppler)
    }
}

/// Caches FFT plans across frames of the same geometry.
pub struct RdProcessor {
    planner: FftPlanner<f64>,
    plans: Vec<(usize, Arc<dyn Fft<f64>>)>,
    pub map_height: usize,
    pub map_width: usize,
}

impl Default for RdProcessor {
    fn default() -> Self {
        Self::new(MAP_SIZE, MAP_SIZE)
    }
}

impl RdProcessor {
    pub fn new(map_height: usize, map_width: usize) -> Self {
        Self {
            planner: FftPlanner::new(),
            plans: Vec::new(),
            map_height,
            map_width,
        }
    }

    fn plan(&mut self, n: usize) -> Arc<dyn Fft<f64>> {
        if let Some((_, p)) = self.plans.iter().find(|(len, _)| *len == n) {
            return p.clone();
        }
        let p = self.planner.plan_fft_forward(n);
        self.plans.push((n, p.clone()));
        p
    }

    /// Complex 2D DFT (fast time, then slow time) of the frame, keeping the
    /// first `n_fast/2` range bins, with columns rotated so zero Doppler sits
    /// at column `n_slow/2`.
    pub fn rd_complex(&mut self, frame: &RadarFrame) -> Vec<Complex<f64>> {
        let (nf, ns) = (frame.n_fast, frame.n_slow);
        let nr = nf / 2;
        let fast = self.plan(nf);
        let slow = self.plan(ns);
        // range_bins[r * ns + m]
        let mut range_bins = vec![Complex::new(0.0, 0.0); nr * ns];
        let mut buf = vec![Complex::new(0.0, 0.0); nf];
        for m in 0..ns {
            for n in 0..nf {
                buf[n] = Complex::new(frame.data[n * ns + m], 0.0);
            }
            fast.process(&mut buf);
            for r in 0..nr {
                range_bins[r * ns + m] = buf[r];
            }
        }
        let mut out = vec![Complex::new(0.0, 0.0); nr * ns];
        let half = ns / 2;
        for r in 0..nr {
            let row = &mut range_bins[r * ns..(r + 1) * ns];
            slow.process(row);
            for (d, &z) in row.iter().enumerate() {
                out[r * ns + (d + half) % ns] = z;
            }
        }
        out
    }

    pub fn rd_spectrum(&mut self, frame: &RadarFrame) -> RdSpectrum {
        let mag = self.rd_complex(frame).into_iter().map(|z| z.norm()).collect();
        RdSpectrum {
            mag,
            n_range: frame.n_fast / 2,
            n_doppler: frame.n_slow,
        }
    }

    /// Magnitude map resampled to the processor's map size and scaled so its
    /// maximum is 1 (all-zero stays all-zero).
    pub fn compute_rd_map(&mut self, frame: &RadarFrame) -> RdMap {
        let spec = self.rd_spectrum(frame);
        let (h, w) = (self.map_height, self.map_width);
        let resampled = if spec.n_range == h && spec.n_doppler == w {
            spec.mag
        } else {
            bilinear_resample(&spec.mag, spec.n_range, spec.n_doppler, h, w)
        };
        let max = resampled.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let mag = if max > 0.0 {
            resampled.iter().map(|&v| (v / max) as f32).collect()
        } else {
            vec![0.0; h * w]
        };
        RdMap {
            mag,
            height: h,
            width: w,
        }
    }

    pub fn preprocess(&mut self, rec: &RawRecording, cfg: &PreprocessConfig) -> Result<RdSequence> {
        let hop = cfg.frame_len.saturating_sub(cfg.overlap);
        let required = cfg.frame_len + cfg.seq_len.saturating_sub(1) * hop;
        let frames = slice_frames(rec, cfg.frame_len, cfg.overlap)?;
        if frames.len() < cfg.seq_len {
            return Err(Error::TooShort {
                required,
                available: rec.n_chirps,
            });
        }
        let maps = frames
            .iter()
            .take(cfg.seq_len)
            .map(|f| {
                if cfg.remove_clutter {
                    self.compute_rd_map(&remove_static_clutter(f))
                } else {
                    self.compute_rd_map(f)
                }
            })
            .collect();
        Ok(RdSequence {
            maps,
            label: rec.label,
        })
    }
}

/// Bilinear interpolation with pixel-centre alignment: destination index `j`
/// samples source coordinate `(j + 0.5) * src/dst - 0.5`, clamped to the grid.
pub fn bilinear_resample(src: &[f64], sh: usize, sw: usize, dh: usize, dw: usize) -> Vec<f64> {
    let coords = |dst: usize, src_n: usize| -> Vec<(usize, usize, f64)> {
        let scale = src_n as f64 / dst as f64;
        (0..dst)
            .map(|j| {
                let x = ((j as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_n - 1) as f64);
                let i0 = x.floor() as usize;
                let i1 = (i0 + 1).min(src_n - 1);
                (i0, i1, x - i0 as f64)
            })
            .collect()
    };
    let rows = coords(dh, sh);
    let cols = coords(dw, sw);
    let mut out = Vec::with_capacity(dh * dw);
    for &(r0, r1, fr) in &rows {
        for &(c0, c1, fc) in &cols {
            let a = src[r0 * sw + c0] * (1.0 - fc) + src[r0 * sw + c1] * fc;
            let b = src[r1 * sw + c0] * (1.0 - fc) + src[r1 * sw + c1] * fc;
            out.push(a * (1.0 - fr) + b * fr);
        }
    }
    out
}

/// Fractional source coordinate to destination index under
/// [`bilinear_resample`]'s pixel-centre convention.
pub fn resampled_index(src_coord: f64, src_n: usize, dst_n: usize) -> f64 {
    (src_coord + 0.5) * dst_n as f64 / src_n as f64 - 0.5
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    pub frame_len: usize,
    pub overlap: usize,
    pub seq_len: usize,
    pub remove_clutter: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            frame_len: FRAME_LEN,
            overlap: FRAME_OVERLAP,
            seq_len: SEQUENCE_LEN,
            remove_clutter: true,
        }
    }
}

/// Slice, clutter-remove and map each frame with the default settings.
pub fn preprocess_sequence(rec: &RawRecording) -> Result<RdSequence> {
    RdProcessor::default().preprocess(rec, &PreprocessConfig::default())
}

pub fn compute_rd_map(frame: &RadarFrame) -> RdMap {
    RdProcessor::default().compute_rd_map(frame)
}

/// Expected map `(row, col)` of a constant-velocity target observed over one
/// frame, as continuous coordinates in a `height x width` map produced from a
/// frame of `n_slow` chirps. `range_m` is the range at the frame centre.
///
/// The Doppler column includes the first-order range-migration term: as the
/// beat frequency drifts through a fixed range bin, the fast-time DFT phase
/// `pi (beta - r)(N - 1)/N` advances every chirp and reads as extra Doppler.
/// Beyond a couple of bins of migration per frame the peak smears and no
/// single-bin prediction holds.
pub fn predicted_map_peak(
    cfg: &ChirpConfig,
    n_slow: usize,
    range_m: f64,
    velocity_mps: f64,
    height: usize,
    width: usize,
) -> (f64, f64) {
    let n_range = cfg.n_fast / 2;
    let row = resampled_index(cfg.range_bin(range_m), n_range, height);
    let nf = cfg.n_fast as f64;
    let migration = n_slow as f64 * cfg.range_bin(velocity_mps * cfg.t_r) * (nf - 1.0) / (2.0 * nf);
    let doppler_src = (n_slow / 2) as f64 + cfg.doppler_bin(velocity_mps, n_slow) + migration;
    let col = resampled_index(doppler_src, n_slow, width);
    (row, col)
}
