//! Training-time augmentation of range-Doppler sequences.
//!
//! One geometric draw (flip, cyclic shift, scale) is made per sequence and
//! applied to every frame; additive noise is drawn per pixel.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::radar_dsp::{RdMap, RdSequence};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub noise_sigma: f64,
    pub flip_prob: f64,
    pub shift_max: usize,
    pub scale_range: (f64, f64),
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            noise_sigma: 0.01,
            flip_prob: 0.5,
            shift_max: 16,
            scale_range: (0.9, 1.1),
        }
    }
}

impl AugmentParams {
    /// Configuration under which augmentation is the identity.
    pub fn identity() -> Self {
        Self {
            noise_sigma: 0.0,
            flip_prob: 0.0,
            shift_max: 0,
            scale_range: (1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidArgument("noise_sigma must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::InvalidArgument("flip_prob must be in [0, 1]".into()));
        }
        let (lo, hi) = self.scale_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidArgument("scale_range must satisfy low <= high".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flip {
    None,
    Range,
    Doppler,
}

/// The per-sequence geometric draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub flip: Flip,
    pub shift_range: i64,
    pub shift_doppler: i64,
    pub scale: f64,
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            flip: Flip::None,
            shift_range: 0,
            shift_doppler: 0,
            scale: 1.0,
        }
    }

    pub fn sample(params: &AugmentParams, rng: &mut impl Rng) -> Self {
        let flip = if params.flip_prob > 0.0 && rng.random_bool(params.flip_prob) {
            if rng.random_bool(0.5) {
                Flip::Range
            } else {
                Flip::Doppler
            }
        } else {
            Flip::None
        };
        let s = params.shift_max as i64;
        let shift_range = rng.random_range(-s..=s);
        let shift_doppler = rng.random_range(-s..=s);
        let (lo, hi) = params.scale_range;
        let scale = if lo < hi { rng.random_range(lo..hi) } else { lo };
        Self {
            flip,
            shift_range,
            shift_doppler,
            scale,
        }
    }

    /// Source pixel that lands on `(r, d)` after flip then cyclic shift.
    pub fn source_of(&self, r: usize, d: usize, h: usize, w: usize) -> (usize, usize) {
        let sr = (r as i64 - self.shift_range).rem_euclid(h as i64) as usize;
        let sd = (d as i64 - self.shift_doppler).rem_euclid(w as i64) as usize;
        match self.flip {
            Flip::None => (sr, sd),
            Flip::Range => (h - 1 - sr, sd),
            Flip::Doppler => (sr, w - 1 - sd),
        }
    }

    /// Geometric part only (no noise).
    pub fn apply(&self, map: &RdMap) -> RdMap {
        let (h, w) = (map.height, map.width);
        let mut out = RdMap::zeros(h, w);
        for r in 0..h {
            for d in 0..w {
                let (sr, sd) = self.source_of(r, d, h, w);
                out.mag[r * w + d] = (map.mag[sr * w + sd] as f64 * self.scale) as f32;
            }
        }
        out
    }
}

/// Applies one random flip/shift/scale draw to all frames, then adds
/// independent Gaussian pixel noise.
pub fn augment_sequence(
    seq: &RdSequence,
    params: &AugmentParams,
    rng: &mut impl Rng,
) -> Result<RdSequence> {
    params.validate()?;
    let t = Transform::sample(params, rng);
    let maps = seq
        .maps
        .iter()
        .map(|m| {
            let mut out = t.apply(m);
            if params.noise_sigma > 0.0 {
                for v in out.mag.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = (*v as f64 + params.noise_sigma * z) as f32;
                }
            }
            out
        })
        .collect();
    Ok(RdSequence {
        maps,
        label: seq.label,
    })
}
