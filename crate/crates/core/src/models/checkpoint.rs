//! Binary checkpoint (little-endian):
//!
//! ```text
//! "SPKW"  version u32  kind u32  n_classes u32  seq_len u32  map_size u32
//! n_encoder_layers u32  n_head_layers u32
//! per layer: layer kind u32, tensor count u32,
//!            per tensor: ndims u32, dims u32 x ndims, f32 values
//! ```
//!
//! Tensor order per layer: dense/conv weight then bias; LSTM w_ih, w_hh,
//! bias; GRU w_ih, w_hh, b_ih, b_hh; LIF weight, beta, theta. Activation and
//! pooling layers carry no tensors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Head, Model, ModelKind, ModelSpec};
use crate::binio::{LeReader, LeWriter};
use crate::error::{Error, Result};
use crate::nn::{LayerKind, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SPKW";
const VERSION: u32 = 1;

struct Record {
    kind: LayerKind,
    tensors: Vec<Tensor>,
}

impl Model {
    /// Layer kinds with their tensor counts, encoder first.
    fn layout(&self) -> (Vec<(LayerKind, usize)>, usize) {
        let mut v: Vec<(LayerKind, usize)> = self.encoder.iter().map(|l| (l.kind(), l.params().len())).collect();
        let n_enc = v.len();
        match &self.head {
            Head::Conv(layers) => v.extend(layers.iter().map(|l| (l.kind(), l.params().len()))),
            Head::Lstm { .. } => v.extend([(LayerKind::Lstm, 3), (LayerKind::Dense, 2)]),
            Head::Gru { .. } => v.extend([(LayerKind::Gru, 4), (LayerKind::Dense, 2)]),
            Head::Snn(net) => v.extend(net.layers.iter().map(|_| (LayerKind::Lif, 3))),
        }
        (v, n_enc)
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let (layout, n_enc) = self.layout();
        let mut w = LeWriter::new(w);
        w.bytes(CHECKPOINT_MAGIC)?;
        for v in [
            VERSION,
            self.spec.kind.code(),
            self.spec.n_classes as u32,
            self.spec.seq_len as u32,
            self.spec.map_size as u32,
            n_enc as u32,
            (layout.len() - n_enc) as u32,
        ] {
            w.u32(v)?;
        }
        let mut params = self.params().into_iter();
        for (kind, n) in layout {
            w.u32(kind as u32)?;
            w.u32(n as u32)?;
            for p in params.by_ref().take(n) {
                w.u32(p.shape().len() as u32)?;
                for &d in p.shape() {
                    w.u32(d as u32)?;
                }
                w.f64_as_f32(p.values())?;
            }
        }
        w.into_inner().flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = LeReader::new(r);
        r.magic(CHECKPOINT_MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported checkpoint version {version}")));
        }
        let kind = ModelKind::from_code(r.u32()?).ok_or_else(|| Error::format("unknown model kind"))?;
        let n_classes = r.u32()? as usize;
        let seq_len = r.u32()? as usize;
        let map_size = r.u32()? as usize;
        let n_enc = r.u32()? as usize;
        let n_head = r.u32()? as usize;
        if n_enc + n_head > 4096 {
            return Err(Error::format("implausible layer count"));
        }
        let mut records = Vec::with_capacity(n_enc + n_head);
        for _ in 0..n_enc + n_head {
            let kind = LayerKind::from_u32(r.u32()?).ok_or_else(|| Error::format("unknown layer kind"))?;
            let n = r.u32()? as usize;
            if n > 8 {
                return Err(Error::format("implausible tensor count"));
            }
            let mut tensors = Vec::with_capacity(n);
            for _ in 0..n {
                let nd = r.u32()? as usize;
                if nd == 0 || nd > 4 {
                    return Err(Error::format("bad tensor rank"));
                }
                let dims = (0..nd).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
                let numel = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
                let numel = numel.filter(|&n| n <= 1 << 28).ok_or_else(|| Error::format("tensor too large"))?;
                tensors.push(Tensor::from_vec(&dims, r.f32_vec_as_f64(numel)?)?);
            }
            records.push(Record { kind, tensors });
        }
        r.finish()?;
        let spec = derive_spec(kind, n_classes, seq_len, map_size, &records[..n_enc], &records[n_enc..])?;
        let mut model = Model::new(spec, &mut ChaCha8Rng::seed_from_u64(0)).map_err(|e| Error::format(e.to_string()))?;
        let (layout, _) = model.layout();
        let file_layout: Vec<(LayerKind, usize)> = records.iter().map(|r| (r.kind, r.tensors.len())).collect();
        if layout != file_layout {
            return Err(Error::format("layer structure does not match model kind"));
        }
        for (p, t) in model.params_mut().into_iter().zip(records.into_iter().flat_map(|r| r.tensors)) {
            if p.shape() != t.shape() {
                return Err(Error::format(format!(
                    "tensor shape {:?} does not match expected {:?}",
                    t.shape(),
                    p.shape()
                )));
            }
            p.values_mut().copy_from_slice(t.values());
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?)).map_err(|e| e.with_path(path))
    }
}

fn dims_of(records: &[Record], kind: LayerKind) -> Vec<&[usize]> {
    records
        .iter()
        .filter(|r| r.kind == kind)
        .filter_map(|r| r.tensors.first().map(|t| t.shape()))
        .collect()
}

/// Rebuilds the architecture from the stored weight shapes.
fn derive_spec(
    kind: ModelKind,
    n_classes: usize,
    seq_len: usize,
    map_size: usize,
    enc: &[Record],
    head: &[Record],
) -> Result<ModelSpec> {
    let bad = || Error::format("inconsistent layer shapes");
    let mut spec = ModelSpec::new(kind, n_classes);
    spec.seq_len = seq_len;
    spec.map_size = map_size;
    spec.encoder_channels = dims_of(enc, LayerKind::Conv2d).iter().map(|d| d[0]).collect();
    spec.feature_dim = dims_of(enc, LayerKind::Dense).last().ok_or_else(bad)?[0];
    match kind {
        ModelKind::Cnn2d1d => {
            let convs = dims_of(head, LayerKind::Conv1d);
            let dense = dims_of(head, LayerKind::Dense);
            if convs.len() != 2 || dense.len() != 2 || convs.iter().any(|d| d.len() != 3) {
                return Err(bad());
            }
            spec.conv_channels = [convs[0][0], convs[1][0]];
            spec.conv_kernels = [convs[0][2], convs[1][2]];
            spec.mlp_hidden = dense[0][0];
        }
        ModelKind::Lstm | ModelKind::Gru => {
            let cell = if kind == ModelKind::Lstm { LayerKind::Lstm } else { LayerKind::Gru };
            let rec = head.iter().find(|r| r.kind == cell).ok_or_else(bad)?;
            spec.rnn_hidden = rec.tensors.get(1).ok_or_else(bad)?.shape()[1];
        }
        ModelKind::Snn => {
            let lifs = dims_of(head, LayerKind::Lif);
            if lifs.is_empty() {
                return Err(bad());
            }
            spec.snn_hidden = lifs[..lifs.len() - 1].iter().map(|d| d[0]).collect();
        }
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radar_dsp::{RdMap, RdSequence};
    use rand::Rng;

    fn tiny(kind: ModelKind) -> ModelSpec {
        ModelSpec {
            kind,
            n_classes: 3,
            map_size: 8,
            seq_len: 3,
            encoder_channels: vec![2, 3],
            feature_dim: 6,
            conv_channels: [4, 3],
            conv_kernels: [3, 1],
            mlp_hidden: 5,
            rnn_hidden: 4,
            snn_hidden: vec![5, 4],
        }
    }

    #[test]
    fn round_trip_is_byte_exact_and_predictive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kind in ModelKind::ALL {
            let m = Model::new(tiny(kind), &mut rng).unwrap();
            let mut a = Vec::new();
            m.write_to(&mut a).unwrap();
            let back = Model::read_from(&a[..]).unwrap();
            let mut b = Vec::new();
            back.write_to(&mut b).unwrap();
            assert_eq!(a, b);
            let seq = RdSequence {
                maps: (0..3)
                    .map(|_| RdMap {
                        mag: (0..64).map(|_| rng.random_range(0.0..1.0f32)).collect(),
                        height: 8,
                        width: 8,
                    })
                    .collect(),
                label: 0,
            };
            assert_eq!(back.infer(&seq).unwrap(), m.infer(&seq).unwrap());
        }
    }

    #[test]
    fn corrupted_checkpoints_are_format_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = Model::new(tiny(ModelKind::Snn), &mut rng).unwrap();
        let mut a = Vec::new();
        m.write_to(&mut a).unwrap();
        let mut bad_magic = a.clone();
        bad_magic[0] = b'X';
        assert!(matches!(Model::read_from(&bad_magic[..]), Err(Error::Format { .. })));
        assert!(matches!(Model::read_from(&a[..a.len() - 3]), Err(Error::Format { .. })));
        let mut trailing = a.clone();
        trailing.push(0);
        assert!(matches!(Model::read_from(&trailing[..]), Err(Error::Format { .. })));
        let mut wrong_kind = a.clone();
        wrong_kind[8] = 1; // snn layers under an lstm header
        assert!(matches!(Model::read_from(&wrong_kind[..]), Err(Error::Format { .. })));
    }
}
