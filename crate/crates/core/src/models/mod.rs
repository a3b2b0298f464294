//! The spatial encoder shared by all models and the four temporal heads.
//!
//! Every frame of a sequence goes through the same conv encoder
//! (conv3x3 -> ReLU -> maxpool blocks, global average pool, dense) to give a
//! `[T, feature_dim]` feature sequence, which one of the heads classifies.

mod checkpoint;
pub(crate) mod train;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::layers::{backward_all, forward_all, infer_all};
use crate::nn::{init, ActivationKind, Activation, AvgPool, Conv1d, Conv2d, Dense, Gru, Layer, Lstm, MaxPool2d, Tensor};
use crate::radar_dsp::{RdMap, RdSequence, MAP_SIZE, SEQUENCE_LEN};
use crate::snn::{argmax_first, SpikeMode, SpikingNet};

pub use checkpoint::CHECKPOINT_MAGIC;
pub use train::{split_train_val, train, TrainConfig, TrainHistory, TrainSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Cnn2d1d,
    Lstm,
    Gru,
    Snn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Cnn2d1d, ModelKind::Lstm, ModelKind::Gru, ModelKind::Snn];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Cnn2d1d => "cnn2d1d",
            ModelKind::Lstm => "lstm",
            ModelKind::Gru => "gru",
            ModelKind::Snn => "snn",
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            ModelKind::Cnn2d1d => 0,
            ModelKind::Lstm => 1,
            ModelKind::Gru => 2,
            ModelKind::Snn => 3,
        }
    }

    pub(crate) fn from_code(c: u32) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind '{s}' (expected cnn2d1d, lstm, gru or snn)")))
    }
}

/// Architecture description. [`ModelSpec::new`] gives the full-size model;
/// the fields can be shrunk for tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n_classes: usize,
    pub map_size: usize,
    pub seq_len: usize,
    /// Output channels of the encoder conv blocks.
    pub encoder_channels: Vec<usize>,
    pub feature_dim: usize,
    pub conv_channels: [usize; 2],
    pub conv_kernels: [usize; 2],
    pub mlp_hidden: usize,
    pub rnn_hidden: usize,
    pub snn_hidden: Vec<usize>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, n_classes: usize) -> Self {
        Self {
            kind,
            n_classes,
            map_size: MAP_SIZE,
            seq_len: SEQUENCE_LEN,
            encoder_channels: vec![16, 32, 64, 128],
            feature_dim: 512,
            conv_channels: [256, 128],
            conv_kernels: [5, 3],
            mlp_hidden: 128,
            rnn_hidden: 128,
            snn_hidden: vec![128, 64],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_classes < 2 {
            return bad(format!("n_classes must be >= 2, got {}", self.n_classes));
        }
        if self.seq_len == 0 || self.feature_dim == 0 || self.encoder_channels.is_empty() {
            return bad("seq_len, feature_dim and encoder_channels must be non-empty".into());
        }
        if self.map_size >> self.encoder_channels.len() == 0 {
            return bad(format!(
                "map size {} too small for {} pooling stages",
                self.map_size,
                self.encoder_channels.len()
            ));
        }
        if self.conv_kernels.iter().any(|k| k % 2 == 0) {
            return bad("temporal conv kernels must be odd".into());
        }
        if [self.mlp_hidden, self.rnn_hidden].contains(&0) || self.snn_hidden.contains(&0) {
            return bad("hidden sizes must be positive".into());
        }
        Ok(())
    }
}

/// Role of a parameter tensor; pruning only touches `Weight`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Weight,
    Bias,
    LifBeta,
    LifTheta,
}

#[derive(Debug, Clone)]
pub enum Head {
    /// conv1d -> ReLU -> conv1d -> ReLU -> time average -> dense -> ReLU -> dense,
    /// applied to the `[feature_dim, T]` transpose of the feature sequence.
    Conv(Vec<Layer>),
    Lstm { cell: Lstm, out: Dense },
    Gru { cell: Gru, out: Dense },
    Snn(SpikingNet),
}

#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub encoder: Vec<Layer>,
    pub head: Head,
}

fn transpose(x: &Tensor) -> Tensor {
    let (r, c) = (x.shape()[0], x.shape()[1]);
    let v = x.values();
    let t = (0..c).flat_map(|j| (0..r).map(move |i| v[i * c + j])).collect();
    Tensor::from_vec(&[c, r], t).expect("transpose keeps element count")
}

/// Output layer with small initial weights so untrained logits start near zero.
fn output_layer(in_dim: usize, n: usize, rng: &mut impl Rng) -> Dense {
    let bound = 0.1 * (6.0 / (in_dim + n) as f64).sqrt();
    Dense::from_params(init::uniform(&[n, in_dim], bound, rng), Tensor::zeros(&[n])).expect("consistent shapes")
}

impl Model {
    pub fn new(spec: ModelSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let mut encoder = Vec::new();
        let mut cin = 1;
        for (i, &c) in spec.encoder_channels.iter().enumerate() {
            let mut conv = Conv2d::new(cin, c, 3, 1, rng);
            conv.skip_input_grad = i == 0;
            encoder.push(Layer::Conv2d(conv));
            encoder.push(Layer::relu());
            encoder.push(Layer::MaxPool(MaxPool2d::new()));
            cin = c;
        }
        encoder.push(Layer::AvgPool(AvgPool::new()));
        encoder.push(Layer::Dense(Dense::new(cin, spec.feature_dim, rng)));

        let f = spec.feature_dim;
        let head = match spec.kind {
            ModelKind::Cnn2d1d => {
                let [c1, c2] = spec.conv_channels;
                let [k1, k2] = spec.conv_kernels;
                Head::Conv(vec![
                    Layer::Conv1d(Conv1d::new(f, c1, k1, rng)),
                    Layer::relu(),
                    Layer::Conv1d(Conv1d::new(c1, c2, k2, rng)),
                    Layer::relu(),
                    Layer::AvgPool(AvgPool::new()),
                    Layer::Dense(Dense::new(c2, spec.mlp_hidden, rng)),
                    Layer::Activation(Activation::new(ActivationKind::Relu)),
                    Layer::Dense(output_layer(spec.mlp_hidden, spec.n_classes, rng)),
                ])
            }
            ModelKind::Lstm => Head::Lstm {
                cell: Lstm::new(f, spec.rnn_hidden, rng),
                out: output_layer(spec.rnn_hidden, spec.n_classes, rng),
            },
            ModelKind::Gru => Head::Gru {
                cell: Gru::new(f, spec.rnn_hidden, rng),
                out: output_layer(spec.rnn_hidden, spec.n_classes, rng),
            },
            ModelKind::Snn => {
                let mut dims = vec![f];
                dims.extend(&spec.snn_hidden);
                dims.push(spec.n_classes);
                Head::Snn(SpikingNet::new(&dims, rng))
            }
        };
        Ok(Self { spec, encoder, head })
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub(crate) fn map_tensor(&self, map: &RdMap) -> Result<Tensor> {
        let s = self.spec.map_size;
        if map.height != s || map.width != s {
            return Err(Error::Shape(format!(
                "model expects {s}x{s} maps, got {}x{}",
                map.height, map.width
            )));
        }
        Tensor::from_vec(&[1, s, s], map.mag.iter().map(|&v| v as f64).collect())
    }

    /// Feature vector of one map.
    pub fn spatial_encode(&self, map: &RdMap) -> Result<Tensor> {
        infer_all(&self.encoder, &self.map_tensor(map)?)
    }

    /// Feature sequence `[T, feature_dim]`.
    pub fn encode_sequence(&self, seq: &RdSequence) -> Result<Tensor> {
        if seq.is_empty() {
            return Err(Error::Shape("empty sequence".into()));
        }
        let mut v = Vec::with_capacity(seq.len() * self.spec.feature_dim);
        for m in &seq.maps {
            v.extend(self.spatial_encode(m)?.into_values());
        }
        Tensor::from_vec(&[seq.len(), self.spec.feature_dim], v)
    }

    fn check_features(&self, feats: &Tensor) -> Result<usize> {
        let s = feats.shape();
        if s.len() != 2 || s[1] != self.spec.feature_dim || s[0] == 0 {
            return Err(Error::Shape(format!(
                "expected features [T, {}], got {s:?}",
                self.spec.feature_dim
            )));
        }
        if matches!(self.head, Head::Conv(_)) && s[0] != self.spec.seq_len {
            return Err(Error::Shape(format!(
                "conv head needs the full sequence of {} frames, got {}",
                self.spec.seq_len, s[0]
            )));
        }
        Ok(s[0])
    }

    /// Class scores from a feature sequence: logits for ANN heads, output
    /// spike counts for the SNN head.
    pub fn head_scores(&self, feats: &Tensor) -> Result<Vec<f64>> {
        let t = self.check_features(feats)?;
        Ok(match &self.head {
            Head::Conv(layers) => infer_all(layers, &transpose(feats))?.into_values(),
            Head::Lstm { cell, out } => {
                let h = cell.infer(feats)?;
                out.infer(&last_row(&h, t))?.into_values()
            }
            Head::Gru { cell, out } => {
                let h = cell.infer(feats)?;
                out.infer(&last_row(&h, t))?.into_values()
            }
            Head::Snn(net) => net.infer(feats)?.counts,
        })
    }

    pub fn scores(&self, seq: &RdSequence) -> Result<Vec<f64>> {
        self.head_scores(&self.encode_sequence(seq)?)
    }

    /// Predicted label (ties to the lowest index) and class scores.
    pub fn infer(&self, seq: &RdSequence) -> Result<(usize, Vec<f64>)> {
        let s = self.scores(seq)?;
        Ok((argmax_first(&s), s))
    }

    /// Cumulative output spike counts after each prefix length `1..=T`.
    pub fn prefix_counts(&self, seq: &RdSequence) -> Result<Vec<Vec<f64>>> {
        match &self.head {
            Head::Snn(net) => Ok(net.infer(&self.encode_sequence(seq)?)?.cumulative_counts()),
            _ => Err(Error::InvalidArgument(format!(
                "prefix prediction needs an snn model, got {}",
                self.kind()
            ))),
        }
    }

    /// Prediction from the spike counts of the first `t` frames.
    pub fn predict_from_prefix(&self, seq: &RdSequence, t: usize) -> Result<usize> {
        if t == 0 || t > seq.len() {
            return Err(Error::OutOfRange {
                what: "prefix length",
                value: t as f64,
                limit: seq.len() as f64,
            });
        }
        Ok(argmax_first(&self.prefix_counts(seq)?[t - 1]))
    }

    /// Forward with caches, softmax cross-entropy on the scores, and
    /// backward through head and encoder. The loss gradient is multiplied by
    /// `scale` before propagation. Returns the unscaled loss.
    pub fn accumulate_gradients(&mut self, seq: &RdSequence, scale: f64) -> Result<f64> {
        let t = seq.len();
        let mut feats = Vec::with_capacity(t * self.spec.feature_dim);
        for m in &seq.maps {
            let x = self.map_tensor(m)?;
            feats.extend(forward_all(&mut self.encoder, &x)?.into_values());
        }
        let feats = Tensor::from_vec(&[t, self.spec.feature_dim], feats)?;
        self.check_features(&feats)?;
        let d_feats = match &mut self.head {
            Head::Conv(layers) => {
                let scores = forward_all(layers, &transpose(&feats))?;
                let (loss, g) = crate::nn::softmax_ce(scores.values(), seq.label)?;
                let g = scaled(&g, scale, scores.shape())?;
                let d = backward_all(layers, &g)?;
                (loss, transpose(&d))
            }
            Head::Lstm { cell, out } => {
                let h = cell.forward(&feats)?;
                let scores = out.forward(&last_row(&h, t))?;
                let (loss, g) = crate::nn::softmax_ce(scores.values(), seq.label)?;
                let dh_last = out.backward(&scaled(&g, scale, scores.shape())?)?;
                (loss, cell.backward(&expand_last(&dh_last, t))?)
            }
            Head::Gru { cell, out } => {
                let h = cell.forward(&feats)?;
                let scores = out.forward(&last_row(&h, t))?;
                let (loss, g) = crate::nn::softmax_ce(scores.values(), seq.label)?;
                let dh_last = out.backward(&scaled(&g, scale, scores.shape())?)?;
                (loss, cell.backward(&expand_last(&dh_last, t))?)
            }
            Head::Snn(net) => {
                let rec = net.forward(&feats)?;
                let (loss, g) = crate::snn::spike_rate_loss(&rec.counts, seq.label)?;
                let g: Vec<f64> = g.iter().map(|v| v * scale).collect();
                (loss, net.backward_counts(&g, t)?)
            }
        };
        let (loss, d_feats) = d_feats;
        let f = self.spec.feature_dim;
        for i in (0..t).rev() {
            let row = Tensor::from_vec(&[f], d_feats.values()[i * f..(i + 1) * f].to_vec())?;
            backward_all(&mut self.encoder, &row)?;
        }
        Ok(loss)
    }

    /// Parameters in a fixed order: encoder layers, then the head.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut p: Vec<&Tensor> = self.encoder.iter().flat_map(|l| l.params()).collect();
        match &self.head {
            Head::Conv(layers) => p.extend(layers.iter().flat_map(|l| l.params())),
            Head::Lstm { cell, out } => {
                p.extend(cell.params());
                p.extend([&out.weight, &out.bias]);
            }
            Head::Gru { cell, out } => {
                p.extend(cell.params());
                p.extend([&out.weight, &out.bias]);
            }
            Head::Snn(net) => p.extend(net.layers.iter().flat_map(|l| l.params())),
        }
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p: Vec<&mut Tensor> = self.encoder.iter_mut().flat_map(|l| l.params_mut()).collect();
        match &mut self.head {
            Head::Conv(layers) => p.extend(layers.iter_mut().flat_map(|l| l.params_mut())),
            Head::Lstm { cell, out } => {
                p.extend(cell.params_mut());
                p.extend([&mut out.weight, &mut out.bias]);
            }
            Head::Gru { cell, out } => {
                p.extend(cell.params_mut());
                p.extend([&mut out.weight, &mut out.bias]);
            }
            Head::Snn(net) => p.extend(net.layers.iter_mut().flat_map(|l| l.params_mut())),
        }
        p
    }

    /// Roles aligned with [`Model::params`].
    pub fn param_roles(&self) -> Vec<ParamRole> {
        use ParamRole::*;
        let mut r: Vec<ParamRole> = self.encoder.iter().flat_map(|l| layer_roles(l)).collect();
        match &self.head {
            Head::Conv(layers) => r.extend(layers.iter().flat_map(|l| layer_roles(l))),
            Head::Lstm { .. } => r.extend([Weight, Weight, Bias, Weight, Bias]),
            Head::Gru { .. } => r.extend([Weight, Weight, Bias, Bias, Weight, Bias]),
            Head::Snn(net) => r.extend(net.layers.iter().flat_map(|_| [Weight, LifBeta, LifTheta])),
        }
        r
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.numel()).sum()
    }

    /// Parameters of the temporal head only.
    pub fn head_param_count(&self) -> usize {
        let enc: usize = self.encoder.iter().flat_map(|l| l.params()).map(|p| p.numel()).sum();
        self.param_count() - enc
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Tensor::zero_grad);
    }

    /// Keeps LIF decay and threshold inside their valid ranges.
    pub fn clamp_params(&mut self) {
        if let Head::Snn(net) = &mut self.head {
            net.clamp_params();
        }
    }

    pub fn set_spike_mode(&mut self, mode: SpikeMode) {
        if let Head::Snn(net) = &mut self.head {
            net.set_mode(mode);
        }
    }

    pub fn clear_caches(&mut self) {
        self.encoder.iter_mut().for_each(Layer::clear_cache);
        match &mut self.head {
            Head::Conv(layers) => layers.iter_mut().for_each(Layer::clear_cache),
            Head::Lstm { cell, .. } => cell.clear_cache(),
            Head::Gru { cell, .. } => cell.clear_cache(),
            Head::Snn(net) => net.clear_cache(),
        }
    }
}

fn layer_roles(l: &Layer) -> Vec<ParamRole> {
    match l.params().len() {
        0 => Vec::new(),
        _ => vec![ParamRole::Weight, ParamRole::Bias],
    }
}

fn last_row(h: &Tensor, t: usize) -> Tensor {
    let n = h.shape()[1];
    Tensor::from_vec(&[n], h.values()[(t - 1) * n..t * n].to_vec()).expect("row length")
}

fn expand_last(d: &Tensor, t: usize) -> Tensor {
    let n = d.numel();
    let mut v = vec![0.0; t * n];
    v[(t - 1) * n..].copy_from_slice(d.values());
    Tensor::from_vec(&[t, n], v).expect("row length")
}

fn scaled(g: &[f64], scale: f64, shape: &[usize]) -> Result<Tensor> {
    Tensor::from_vec(shape, g.iter().map(|v| v * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_rel_error, numeric_grad};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_spec(kind: ModelKind) -> ModelSpec {
        ModelSpec {
            kind,
            n_classes: 3,
            map_size: 8,
            seq_len: 2,
            encoder_channels: vec![2, 3],
            feature_dim: 8,
            conv_channels: [4, 3],
            conv_kernels: [3, 1],
            mlp_hidden: 4,
            rnn_hidden: 4,
            snn_hidden: vec![5, 4],
        }
    }

    fn rand_seq(spec: &ModelSpec, label: usize, rng: &mut impl Rng) -> RdSequence {
        let s = spec.map_size;
        RdSequence {
            maps: (0..spec.seq_len)
                .map(|_| RdMap {
                    mag: (0..s * s).map(|_| rng.random_range(0.0..1.0f32)).collect(),
                    height: s,
                    width: s,
                })
                .collect(),
            label,
        }
    }

    #[test]
    fn feature_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = Model::new(ModelSpec::new(ModelKind::Cnn2d1d, 4), &mut rng).unwrap();
        let f = m.spatial_encode(&RdMap::zeros(128, 128)).unwrap();
        assert_eq!(f.shape(), &[512]);
        assert!(m.spatial_encode(&RdMap::zeros(64, 128)).is_err());
    }

    #[test]
    fn zero_map_gives_bias_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = Model::new(tiny_spec(ModelKind::Lstm), &mut rng).unwrap();
        for p in m.params_mut() {
            for v in p.values_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        let f = m.spatial_encode(&RdMap::zeros(8, 8)).unwrap();
        // Zero input: every conv output equals its bias, so the features are
        // fixed by the biases alone; compare against two different zero maps.
        assert_eq!(f, m.spatial_encode(&RdMap::zeros(8, 8)).unwrap());
        let seq = RdSequence {
            maps: vec![RdMap::zeros(8, 8); 2],
            label: 0,
        };
        let feats = m.encode_sequence(&seq).unwrap();
        assert_eq!(&feats.values()[..8], &feats.values()[8..]);
    }

    #[test]
    fn head_output_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for kind in ModelKind::ALL {
            let spec = tiny_spec(kind);
            let m = Model::new(spec.clone(), &mut rng).unwrap();
            let seq = rand_seq(&spec, 0, &mut rng);
            let (label, scores) = m.infer(&seq).unwrap();
            assert_eq!(scores.len(), 3);
            assert!(label < 3);
            if kind == ModelKind::Snn {
                assert!(scores.iter().all(|c| c.fract() == 0.0 && (0.0..=2.0).contains(c)));
            }
        }
    }

    #[test]
    fn conv_head_rejects_partial_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = tiny_spec(ModelKind::Cnn2d1d);
        let m = Model::new(spec.clone(), &mut rng).unwrap();
        let mut seq = rand_seq(&spec, 0, &mut rng);
        seq.maps.pop();
        assert!(matches!(m.infer(&seq), Err(Error::Shape(_))));
        let r = Model::new(tiny_spec(ModelKind::Gru), &mut rng).unwrap();
        assert!(r.infer(&seq).is_ok());
    }

    #[test]
    fn prefix_requires_snn() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = tiny_spec(ModelKind::Lstm);
        let m = Model::new(spec.clone(), &mut rng).unwrap();
        let seq = rand_seq(&spec, 0, &mut rng);
        assert!(m.predict_from_prefix(&seq, 1).is_err());
        let s = Model::new(tiny_spec(ModelKind::Snn), &mut rng).unwrap();
        assert!(s.predict_from_prefix(&seq, 0).is_err());
        assert!(s.predict_from_prefix(&seq, 3).is_err());
        assert_eq!(s.predict_from_prefix(&seq, 2).unwrap(), s.infer(&seq).unwrap().0);
    }

    #[test]
    fn zero_sequence_snn_predicts_class_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = tiny_spec(ModelKind::Snn);
        // Biases start at zero, so a zero map gives zero current and no spikes.
        let m = Model::new(spec, &mut rng).unwrap();
        let seq = RdSequence {
            maps: vec![RdMap::zeros(8, 8); 2],
            label: 1,
        };
        let counts = m.prefix_counts(&seq).unwrap();
        assert!(counts.iter().flatten().all(|&c| c == 0.0));
        assert_eq!(m.predict_from_prefix(&seq, 1).unwrap(), 0);
    }

    fn loss_of(m: &Model, seq: &RdSequence) -> f64 {
        let s = m.scores(seq).unwrap();
        crate::nn::softmax_ce(&s, seq.label).unwrap().0
    }

    #[test]
    fn end_to_end_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for kind in ModelKind::ALL {
            let spec = tiny_spec(kind);
            let mut m = Model::new(spec.clone(), &mut rng).unwrap();
            m.set_spike_mode(SpikeMode::Soft);
            // Non-zero biases keep ReLU/maxpool inputs generic.
            let roles = m.param_roles();
            for (p, role) in m.params_mut().into_iter().zip(roles) {
                if role == ParamRole::Bias {
                    for v in p.values_mut() {
                        *v = rng.random_range(-0.3..0.3);
                    }
                }
            }
            let seq = rand_seq(&spec, 1, &mut rng);
            m.zero_grad();
            m.accumulate_gradients(&seq, 1.0).unwrap();
            let n = m.params().len();
            let mut worst = 0.0f64;
            for pi in 0..n {
                let analytic = m.params()[pi].grad().unwrap().to_vec();
                let base = m.params()[pi].values().to_vec();
                let num = numeric_grad(
                    |v| {
                        m.params_mut()[pi].values_mut().copy_from_slice(v);
                        loss_of(&m, &seq)
                    },
                    &base,
                    1e-5,
                );
                m.params_mut()[pi].values_mut().copy_from_slice(&base);
                worst = worst.max(max_rel_error(&analytic, &num));
            }
            assert!(worst < 1e-3, "{kind}: worst {worst}");
        }
    }

    #[test]
    fn roles_align_with_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in ModelKind::ALL {
            let m = Model::new(tiny_spec(kind), &mut rng).unwrap();
            let roles = m.param_roles();
            let params = m.params();
            assert_eq!(roles.len(), params.len());
            for (r, p) in roles.iter().zip(&params) {
                match r {
                    ParamRole::Weight => assert!(p.shape().len() >= 2),
                    _ => assert_eq!(p.shape().len(), 1),
                }
            }
        }
    }

    #[test]
    fn snn_head_param_count_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [4usize, 11] {
            let snn = Model::new(ModelSpec::new(ModelKind::Snn, n), &mut rng).unwrap();
            let formula = 512 * 128 + 128 * 64 + 64 * n + (128 + 64 + n) * 2;
            assert_eq!(snn.head_param_count(), formula);
            let gru = Model::new(ModelSpec::new(ModelKind::Gru, n), &mut rng).unwrap();
            let lstm = Model::new(ModelSpec::new(ModelKind::Lstm, n), &mut rng).unwrap();
            assert!(snn.head_param_count() < gru.head_param_count());
            assert!(gru.head_param_count() < lstm.head_param_count());
        }
    }

    #[test]
    fn kind_parsing() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
            assert_eq!(ModelKind::from_code(k.code()), Some(k));
        }
        assert!("transformer".parse::<ModelKind>().is_err());
    }
}
