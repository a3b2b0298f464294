//! Acceptance suite. Every criterion runs at its stated tolerance and prints
//! one `criterion N ... PASS|FAIL` line; the test fails if any criterion does.
//!
//! The learning criteria train full-size models on one core, so this target
//! takes a while (about an hour on a single 2020-era core).

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;

use spikerad::complexity::{count_eflops, count_flops, count_matmul, linear_fit_r2, memory_report};
use spikerad::eval::{accuracy, confusion, latency_curve, mean_std};
use spikerad::models::{train, Model, ModelKind, ModelSpec, TrainConfig};
use spikerad::nn::gradcheck::{max_rel_error, numeric_grad};
use spikerad::nn::{softmax_ce, Conv1d, Conv2d, Dense, Gru, Layer, Lstm, Tensor};
use spikerad::pruning::{prune_and_finetune, FinetuneConfig, PruneSchedule};
use spikerad::radar_dsp::{
    predicted_map_peak, remove_static_clutter, slice_frames, RdProcessor, RdSequence,
};
use spikerad::scene_sim::{synth_beat_signal, ChirpConfig, DatasetSpec, PointTarget};
use spikerad::snn::{lif_step, spike_rate_loss, LifLayer, LifState, SpikeMode};

type Outcome = Result<String, String>;

// Written straight to stderr so the lines survive the test harness capture.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stderr(), $($t)*);
    }};
}

/// Runs one criterion and prints its verdict line.
fn criterion(n: u32, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let (ok, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    say!(
        "criterion {n:2} {name:<20} {} ({detail}) [{:.1}s]",
        if ok { "PASS" } else { "FAIL" },
        t.elapsed().as_secs_f64()
    );
    ok
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 1

fn naive_dft2(x: &[f64], nf: usize, ns: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); nf * ns];
    for k in 0..nf {
        for l in 0..ns {
            let mut acc = Complex::new(0.0, 0.0);
            for n in 0..nf {
                for m in 0..ns {
                    let ph = -2.0 * PI * ((k * n) as f64 / nf as f64 + (l * m) as f64 / ns as f64);
                    acc += Complex::from_polar(x[n * ns + m], ph);
                }
            }
            out[k * ns + l] = acc;
        }
    }
    out
}

fn rd_oracle() -> Outcome {
    let cfg = ChirpConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = (0.0f64, 0.0f64);
    let mut misses = 0;
    // Hand-gesture speeds: at most a couple of range bins of migration per frame.
    let v_max = 1.2;
    let mut proc = RdProcessor::default();
    for _ in 0..100 {
        let range = rng.random_range(0.1..0.9) * cfg.max_range();
        let v = rng.random_range(-v_max..v_max);
        let rec = synth_beat_signal(&[PointTarget::new(range, v, 1.0)], &cfg, 256, 0.0, &mut rng).map_err(|e| e.to_string())?;
        let frame = &slice_frames(&rec, 256, 0).map_err(|e| e.to_string())?[0];
        let spec = proc.rd_spectrum(&remove_static_clutter(frame));
        let mid = range + v * 128.0 * cfg.t_r;
        let (pr, pc) = predicted_map_peak(&cfg, 256, mid, v, spec.n_range, spec.n_doppler);
        let (r, c) = spec.argmax();
        let (dr, dc) = ((r as f64 - pr).abs(), (c as f64 - pc).abs());
        worst = (worst.0.max(dr), worst.1.max(dc));
        if dr > 1.0 || dc > 1.0 {
            misses += 1;
        }
    }
    // 16x16 frame against a naive 2D DFT.
    let small = ChirpConfig::new(8e9, 750e6, 16, 1e-6, 16e-6).map_err(|e| e.to_string())?;
    let mut max_rel = 0.0f64;
    let mut small_proc = RdProcessor::new(8, 16);
    for _ in 0..10 {
        let data: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
        let frame = spikerad::radar_dsp::RadarFrame::from_fn(small, 16, |n, m| data[n * 16 + m]);
        let fast = small_proc.rd_complex(&frame);
        let slow = naive_dft2(&data, 16, 16);
        let scale = slow.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for r in 0..8 {
            for d in 0..16 {
                // Column d of the rotated spectrum holds Doppler bin d - 8.
                let want = slow[r * 16 + (d + 8) % 16];
                max_rel = max_rel.max((fast[r * 16 + d] - want).norm() / scale);
            }
        }
    }
    check(
        misses == 0 && max_rel < 1e-4,
        format!(
            "peak misses {misses}/100, worst offset ({:.2}, {:.2}) bins; dft rel err {max_rel:.1e}",
            worst.0, worst.1
        ),
    )
}

// ---------------------------------------------------------------- criterion 2

/// Differentiable unit with an input `[..]` and a tensor output.
trait Unit: Clone {
    fn infer(&self, x: &Tensor) -> Tensor;
    /// Forward + backward of `sum(c * y)`; returns the input gradient.
    fn fwd_bwd(&mut self, x: &Tensor, c: &Tensor) -> Tensor;
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;
}

impl Unit for Layer {
    fn infer(&self, x: &Tensor) -> Tensor {
        Layer::infer(self, x).unwrap()
    }
    fn fwd_bwd(&mut self, x: &Tensor, c: &Tensor) -> Tensor {
        self.forward(x).unwrap();
        self.backward(c).unwrap()
    }
    fn params(&self) -> Vec<&Tensor> {
        Layer::params(self)
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        Layer::params_mut(self)
    }
}

macro_rules! seq_unit {
    ($t:ty) => {
        impl Unit for $t {
            fn infer(&self, x: &Tensor) -> Tensor {
                <$t>::infer(self, x).unwrap()
            }
            fn fwd_bwd(&mut self, x: &Tensor, c: &Tensor) -> Tensor {
                self.forward(x).unwrap();
                self.backward(c).unwrap()
            }
            fn params(&self) -> Vec<&Tensor> {
                <$t>::params(self)
            }
            fn params_mut(&mut self) -> Vec<&mut Tensor> {
                <$t>::params_mut(self)
            }
        }
    };
}
seq_unit!(Lstm);
seq_unit!(Gru);
seq_unit!(LifLayer);

fn rand_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Max relative error over the input and every parameter.
fn unit_error<U: Unit>(unit: &U, x: &Tensor, rng: &mut impl Rng) -> f64 {
    let y = unit.infer(x);
    let c = rand_tensor(y.shape(), rng);
    let loss = |u: &U, x: &Tensor| u.infer(x).values().iter().zip(c.values()).map(|(a, b)| a * b).sum::<f64>();
    let mut u = unit.clone();
    u.params_mut().into_iter().for_each(|p| p.zero_grad());
    let dx = u.fwd_bwd(x, &c);
    let h = 1e-6;
    let num_x = numeric_grad(|v| loss(unit, &Tensor::from_vec(x.shape(), v.to_vec()).unwrap()), x.values(), h);
    let mut err = max_rel_error(dx.values(), &num_x);
    for j in 0..unit.params().len() {
        let base = unit.params()[j].values().to_vec();
        let num = numeric_grad(
            |v| {
                let mut w = unit.clone();
                w.params_mut()[j].values_mut().copy_from_slice(v);
                loss(&w, x)
            },
            &base,
            h,
        );
        let analytic = u.params()[j].grad().map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; base.len()]);
        err = err.max(max_rel_error(&analytic, &num));
    }
    err
}

fn gradient_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut(&mut ChaCha8Rng) -> f64| {
        let e = (0..50).map(|_| f(&mut rng)).fold(0.0, f64::max);
        worst.push((name, e));
    };
    run("dense", &mut |r| {
        let (i, o) = (r.random_range(1..7), r.random_range(1..7));
        unit_error(&Layer::Dense(Dense::new(i, o, r)), &rand_tensor(&[r.random_range(1..4), i], r), r)
    });
    run("conv1d", &mut |r| {
        let (ci, co, t) = (r.random_range(1..4), r.random_range(1..4), r.random_range(2..7));
        let k = [1, 3, 5][r.random_range(0..3)];
        unit_error(&Layer::Conv1d(Conv1d::new(ci, co, k, r)), &rand_tensor(&[ci, t], r), r)
    });
    run("conv2d", &mut |r| {
        let (ci, co, s) = (r.random_range(1..4), r.random_range(1..4), r.random_range(3..7));
        unit_error(&Layer::Conv2d(Conv2d::new(ci, co, 3, 1, r)), &rand_tensor(&[ci, s, s], r), r)
    });
    run("lstm", &mut |r| {
        let (i, h, t) = (r.random_range(1..5), r.random_range(1..5), r.random_range(1..5));
        unit_error(&Lstm::new(i, h, r), &rand_tensor(&[t, i], r), r)
    });
    run("gru", &mut |r| {
        let (i, h, t) = (r.random_range(1..5), r.random_range(1..5), r.random_range(1..5));
        unit_error(&Gru::new(i, h, r), &rand_tensor(&[t, i], r), r)
    });
    run("lif-soft", &mut |r| {
        let (i, o, t) = (r.random_range(1..5), r.random_range(1..5), r.random_range(1..6));
        let mut l = LifLayer::new(i, o, r);
        l.mode = SpikeMode::Soft;
        l.weight = rand_tensor(&[o, i], r);
        unit_error(&l, &rand_tensor(&[t, i], r), r)
    });
    run("spike-rate-loss", &mut |r| {
        let m = r.random_range(2..12);
        let counts: Vec<f64> = (0..m).map(|_| r.random_range(0.0..15.0)).collect();
        let target = r.random_range(0..m);
        let (_, g) = spike_rate_loss(&counts, target).unwrap();
        max_rel_error(&g, &numeric_grad(|c| spike_rate_loss(c, target).unwrap().0, &counts, 1e-6))
    });
    run("softmax-ce", &mut |r| {
        let m = r.random_range(2..12);
        let z: Vec<f64> = (0..m).map(|_| r.random_range(-5.0..5.0)).collect();
        let target = r.random_range(0..m);
        let (_, g) = softmax_ce(&z, target).unwrap();
        max_rel_error(&g, &numeric_grad(|v| softmax_ce(v, target).unwrap().0, &z, 1e-6))
    });
    let ok = worst.iter().all(|(_, e)| *e < 1e-3);
    let detail = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    check(ok, format!("max rel err: {detail}"))
}

// ---------------------------------------------------------------- criterion 3

fn lif_dynamics() -> Outcome {
    let one = |beta: f64, theta: f64| {
        LifLayer::from_params(
            Tensor::from_vec(&[1, 1], vec![1.0]).unwrap(),
            Tensor::from_vec(&[1], vec![beta]).unwrap(),
            Tensor::from_vec(&[1], vec![theta]).unwrap(),
        )
        .unwrap()
    };
    let l = one(0.0, 1.0);
    let mut st = LifState::new(1);
    let mut trace = Vec::new();
    for _ in 0..3 {
        let s = lif_step(&l, &mut st, &[1.5]).unwrap()[0];
        trace.push((s, st.u[0]));
    }
    let hand = vec![(1.0, 0.5); 3];
    let mut quiet = LifState::new(1);
    let silent = (0..100).all(|_| lif_step(&one(0.9, 1.0), &mut quiet, &[0.0]).unwrap()[0] == 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let n = 16;
    let (i_max, beta_max, theta_max) = (3.0, 0.95, 2.0);
    let layer = LifLayer::from_params(
        Tensor::from_vec(&[n, 1], vec![1.0; n]).unwrap(),
        Tensor::from_vec(&[n], (0..n).map(|_| rng.random_range(0.0..beta_max)).collect()).unwrap(),
        Tensor::from_vec(&[n], (0..n).map(|_| rng.random_range(0.01..theta_max)).collect()).unwrap(),
    )
    .unwrap();
    let bound = i_max / (1.0 - beta_max) + theta_max;
    let mut st = LifState::new(n);
    let mut peak = 0.0f64;
    for _ in 0..10_000 {
        let cur: Vec<f64> = (0..n).map(|_| rng.random_range(-i_max..=i_max)).collect();
        lif_step(&layer, &mut st, &cur).unwrap();
        peak = st.u.iter().fold(peak, |a, u| a.max(u.abs()));
    }
    check(
        trace == hand && silent && peak <= bound,
        format!("trace {trace:?}, silent {silent}, max |U| {peak:.3} <= {bound:.3}"),
    )
}

// ---------------------------------------------------------------- criterion 4

const TRAIN_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const HEAD_BUDGET: Duration = Duration::from_secs(15 * 60);

struct Trained {
    kind: ModelKind,
    seed: u64,
    model: Model,
    test_acc: f64,
    epochs: usize,
    time: Duration,
}

fn train_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 30,
        seed,
        early_stop: Some(1.0),
        ..TrainConfig::default()
    }
}

fn learning(train_set: &[RdSequence], test_set: &[RdSequence], out: &mut Vec<Trained>) -> Outcome {
    let mut jobs: Vec<(ModelKind, u64)> = Vec::new();
    for &s in &TRAIN_SEEDS {
        jobs.push((ModelKind::Snn, s));
        jobs.push((ModelKind::Cnn2d1d, s));
    }
    jobs.push((ModelKind::Lstm, 0));
    jobs.push((ModelKind::Gru, 0));
    for (kind, seed) in jobs {
        let t = Instant::now();
        let (model, hist) = train(ModelSpec::new(kind, 4), train_set, &train_cfg(seed)).map_err(|e| e.to_string())?;
        let time = t.elapsed();
        let test_acc = accuracy(&confusion(&model, test_set).map_err(|e| e.to_string())?);
        say!(
            "  {kind} seed {seed}: {} epochs in {:.0}s, best val {:.3}, held-out {test_acc:.3}",
            hist.epochs_run(),
            time.as_secs_f64(),
            hist.best_val_accuracy
        );
        out.push(Trained {
            kind,
            seed,
            model,
            test_acc,
            epochs: hist.epochs_run(),
            time,
        });
    }
    let mut parts = Vec::new();
    let mut ok = true;
    for kind in ModelKind::ALL {
        let first = out.iter().find(|r| r.kind == kind && r.seed == 0).expect("seed 0 trained");
        let slowest = out.iter().filter(|r| r.kind == kind).map(|r| r.time).max().unwrap_or_default();
        ok &= first.test_acc >= 0.9 && first.epochs <= 30 && slowest < HEAD_BUDGET;
        parts.push(format!("{kind} {:.3} ({:.0}s max)", first.test_acc, slowest.as_secs_f64()));
    }
    let accs = |k: ModelKind| out.iter().filter(|r| r.kind == k).map(|r| r.test_acc).collect::<Vec<_>>();
    let (snn, _) = mean_std(&accs(ModelKind::Snn));
    let (cnn, _) = mean_std(&accs(ModelKind::Cnn2d1d));
    ok &= (snn - cnn).abs() <= 0.05;
    parts.push(format!("5-seed mean snn {snn:.3} vs cnn2d1d {cnn:.3}"));
    check(ok, parts.join(", "))
}

// ---------------------------------------------------------------- criterion 5

fn spike_loss_values() -> Outcome {
    let (loss, g) = spike_rate_loss(&[3.0; 11], 4).map_err(|e| e.to_string())?;
    let ln11 = 11f64.ln();
    let gsum: f64 = g.iter().sum();
    check(
        (loss - ln11).abs() <= 1e-9 && gsum.abs() < 1e-12,
        format!("loss - ln 11 = {:.1e}, grad sum {gsum:.1e}", loss - ln11),
    )
}

// ---------------------------------------------------------------- criteria 6, 7

struct Sweep {
    sparsity: Vec<f64>,
    eflops: Vec<f64>,
    flops: f64,
    all_below: bool,
}

fn pruning_criterion(base: &Trained, train_set: &[RdSequence], test_set: &[RdSequence], sweep: &mut Option<Sweep>) -> Outcome {
    let schedule = PruneSchedule {
        s_initial: 0.0,
        s_final: 0.8,
        n_steps: 5,
        finetune_iters: 20,
    };
    let ends = (schedule.sparsity_at(0).unwrap(), schedule.sparsity_at(5).unwrap());
    let cfg = FinetuneConfig {
        seed: 5,
        ..FinetuneConfig::default()
    };
    let levels = prune_and_finetune(&base.model, train_set, test_set, &schedule, &cfg).map_err(|e| e.to_string())?;
    let violations: usize = levels.iter().map(|l| l.mask_violations).sum();
    let dense = levels[0].accuracy;
    let last = levels.last().unwrap();
    let monotone = levels.windows(2).all(|w| w[0].achieved_sparsity <= w[1].achieved_sparsity);

    // Effective FLOPs along the sweep, reused by the next criterion.
    let inputs = &test_set[..6];
    let flops = count_flops(&base.model.spec).unwrap().per_frame();
    let mut s = Sweep {
        sparsity: Vec::new(),
        eflops: Vec::new(),
        flops,
        all_below: true,
    };
    for l in &levels {
        let e: Vec<f64> = inputs.iter().map(|x| count_eflops(&l.model, x).unwrap()).collect();
        s.all_below &= e.iter().all(|&v| v <= flops);
        s.sparsity.push(l.achieved_sparsity);
        s.eflops.push(mean_std(&e).0);
    }
    *sweep = Some(s);
    let curve: Vec<String> = levels.iter().map(|l| format!("{:.2}:{:.3}", l.achieved_sparsity, l.accuracy)).collect();
    check(
        violations == 0 && ends == (0.0, 0.8) && monotone && (dense - last.accuracy) <= 0.05,
        format!(
            "violations {violations}, endpoints {ends:?}, dense {dense:.3} vs {:.0}% sparse {:.3}; curve {}",
            last.achieved_sparsity * 100.0,
            last.accuracy,
            curve.join(" ")
        ),
    )
}

/// Independent loop-nest counter for `y = b + W x` with the exclusion rules.
fn naive_counts(w: &[f64], b: Option<&[f64]>, x: &[f64], o: usize, i: usize) -> (u64, u64) {
    let (mut mul, mut add) = (0, 0);
    for r in 0..o {
        let mut acc = b.map_or(0.0, |b| b[r]);
        for k in 0..i {
            let (a, c) = (w[r * i + k], x[k]);
            mul += u64::from(a != 0.0 && c != 0.0);
            add += u64::from(!(acc == 0.0 && a * c == 0.0));
            acc += a * c;
        }
    }
    (mul, add)
}

fn eflop_criterion(sweep: &Option<Sweep>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut mismatches = 0;
    for _ in 0..200 {
        let (i, o) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let zp = rng.random_range(0.0..1.0);
        let mut v = |n: usize| -> Vec<f64> {
            (0..n).map(|_| if rng.random_bool(zp) { 0.0 } else { rng.random_range(-1.0..1.0) }).collect()
        };
        let (w, b, x) = (v(i * o), v(o), v(i));
        let c = count_matmul(&w, o, i, Some(&b), &x, 1, true);
        if (c.mults, c.adds) != naive_counts(&w, Some(&b), &x, o, i) {
            mismatches += 1;
        }
    }
    let s = sweep.as_ref().ok_or("pruning sweep unavailable")?;
    let r2 = linear_fit_r2(&s.sparsity, &s.eflops).map_err(|e| e.to_string())?;
    let nonincreasing = s.eflops.windows(2).all(|w| w[1] <= w[0]);
    check(
        mismatches == 0 && s.all_below && r2 >= 0.98,
        format!(
            "oracle mismatches {mismatches}/200, eflops <= flops {}, R^2 {r2:.4}, eflops {:.3e} -> {:.3e} of {:.3e} (non-increasing {nonincreasing})",
            s.all_below,
            s.eflops[0],
            s.eflops.last().unwrap(),
            s.flops
        ),
    )
}

// ---------------------------------------------------------------- criterion 8

fn memory_criterion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let snn = Model::new(ModelSpec::new(ModelKind::Snn, 11), &mut rng).map_err(|e| e.to_string())?;
    let mem = memory_report(&snn);
    // Three LIF layers 512-128-64-11: weights plus per-neuron beta and theta.
    let closed = (512 * 128 + 2 * 128) + (128 * 64 + 2 * 64) + (64 * 11 + 2 * 11);
    let heads: Vec<usize> = [ModelKind::Snn, ModelKind::Gru, ModelKind::Lstm]
        .iter()
        .map(|&k| Model::new(ModelSpec::new(k, 11), &mut rng).unwrap().head_param_count())
        .collect();
    let rounded = |v: f64| (v * 1000.0).round() / 1000.0;
    check(
        mem.input_mb_frame == 0.0625
            && mem.input_mb_sequence == 0.9375
            && rounded(mem.input_mb_frame) == 0.063
            && heads[0] == closed
            && heads[0] < heads[1]
            && heads[1] < heads[2],
        format!(
            "input {} / {} MB, snn head {} (closed form {closed}), gru {}, lstm {}",
            mem.input_mb_frame, mem.input_mb_sequence, heads[0], heads[1], heads[2]
        ),
    )
}

// ---------------------------------------------------------------- criterion 9

fn latency_criterion(snn: &Trained, others: &[&Trained], test_set: &[RdSequence]) -> Outcome {
    let curve = latency_curve(&snn.model, test_set).map_err(|e| e.to_string())?;
    let full = accuracy(&confusion(&snn.model, test_set).map_err(|e| e.to_string())?);
    let refused = others.iter().all(|o| latency_curve(&o.model, test_set).is_err());
    let pts: Vec<String> = curve.iter().map(|(t, a)| format!("{t}:{a:.2}")).collect();
    check(
        curve.len() == 15 && curve[14].1 == full && curve[14].1 > curve[0].1 && refused,
        format!("t=15 {:.3} == full {full:.3}, t=1 {:.3}, ann heads refused {refused}; {}", curve[14].1, curve[0].1, pts.join(" ")),
    )
}

// ---------------------------------------------------------------- criterion 10

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_spikerad"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let p = |n: &str| dir.join(n).to_string_lossy().into_owned();
    std::fs::write(dir.join("train.cfg"), "kind = snn\nn_classes = 2\nepochs = 2\nbatch = 2\nval_fraction = 0.34\nseed = 3\n")
        .map_err(|e| e.to_string())?;
    cli(&["gen-data", "--classes", "2", "--per-class", "3", "--seed", "5", "--out", &p("raw")])?;
    cli(&["preprocess", "--data", &p("raw"), "--out", &p("rd")])?;
    cli(&["train", "--config", &p("train.cfg"), "--data", &p("rd"), "--out", &p("m.spkw"), "--history", &p("history.csv")])?;
    cli(&["eval", "--checkpoint", &p("m.spkw"), "--data", &p("rd"), "--out", &p("metrics.txt"), "--confusion", &p("cm.txt")])?;
    cli(&["latency-curve", "--checkpoint", &p("m.spkw"), "--data", &p("rd"), "--out", &p("latency.csv")])?;
    cli(&["profile", "--checkpoint", &p("m.spkw"), "--data", &p("rd"), "--max-inputs", "1", "--out", &p("profile.txt")])?;
    cli(&[
        "prune", "--checkpoint", &p("m.spkw"), "--data", &p("rd"), "--eval-data", &p("rd"), "--steps", "1",
        "--finetune-iters", "1", "--batch", "2", "--seed", "4", "--out", &p("prune.csv"),
    ])?;
    ["history.csv", "metrics.txt", "cm.txt", "latency.csv", "profile.txt", "prune.csv", "m.spkw", "raw/manifest.txt", "rd/seq_00000.spkq"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).map(|b| (f.to_string(), b)).map_err(|e| format!("{f}: {e}")))
        .collect()
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fa = pipeline(a.path())?;
    let fb = pipeline(b.path())?;
    let differing: Vec<&str> = fa.iter().zip(&fb).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    check(
        differing.is_empty(),
        format!("{} artifacts compared, differing: {differing:?}", fa.len()),
    )
}

// ----------------------------------------------------------------------------

fn dataset(n_per_class: usize, seed: u64) -> Vec<RdSequence> {
    DatasetSpec::new(4, n_per_class)
        .generate(seed)
        .unwrap()
        .iter()
        .map(|r| spikerad::radar_dsp::preprocess_sequence(r).unwrap())
        .collect()
}

#[test]
fn rd_map_matches_oracles() {
    assert!(criterion(1, "rd-map oracle", rd_oracle));
}

#[test]
fn gradients_match_finite_differences() {
    assert!(criterion(2, "gradient suite", gradient_suite));
}

#[test]
fn lif_traces_and_bounds() {
    assert!(criterion(3, "lif dynamics", lif_dynamics));
}

#[test]
fn spike_rate_loss_uniform_counts() {
    assert!(criterion(5, "spike-rate loss", spike_loss_values));
}

#[test]
fn memory_and_head_sizes() {
    assert!(criterion(8, "memory accounting", memory_criterion));
}

#[test]
fn cli_reruns_are_byte_identical() {
    assert!(criterion(10, "cli determinism", determinism));
}

/// Learning, pruning, EFLOP and latency criteria share the trained models.
#[test]
fn trained_model_criteria() {
    let train_set = dataset(50, 1000);
    let test_set = dataset(25, 2000);
    let mut trained = Vec::new();
    let mut verdicts = vec![(4, criterion(4, "end-to-end learning", || learning(&train_set, &test_set, &mut trained)))];
    let find = |k: ModelKind| trained.iter().find(|t| t.kind == k && t.seed == 0);
    let mut sweep = None;
    match find(ModelKind::Snn) {
        Some(snn) => {
            verdicts.push((6, criterion(6, "pruning", || pruning_criterion(snn, &train_set, &test_set, &mut sweep))));
            verdicts.push((7, criterion(7, "eflop metric", || eflop_criterion(&sweep))));
            let others: Vec<&Trained> = [ModelKind::Cnn2d1d, ModelKind::Lstm, ModelKind::Gru].iter().filter_map(|&k| find(k)).collect();
            verdicts.push((9, criterion(9, "latency curve", || latency_criterion(snn, &others, &test_set))));
        }
        None => {
            for (n, name) in [(6, "pruning"), (7, "eflop metric"), (9, "latency curve")] {
                verdicts.push((n, criterion(n, name, || Err("no trained snn model".into()))));
            }
        }
    }
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.1).map(|v| v.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
