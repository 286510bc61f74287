//! Sub-image dataset construction, channel-masked MSE, momentum SGD with
//! per-layer learning rates, and the training loop.
//!
//! The loss is the squared error averaged over pixels as well as channels
//! and samples, so learning rates transfer across sub-image sizes. Channel
//! weights realize the color-training strategies: `(1,0,0)` trains on
//! luminance only, `(0,1,1)` on chrominance, `(1,1,1)` on everything.

use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{self, EvalChannel, EvalProtocol, MetricKind, ModelSpace, SrMethod};
use crate::model::{receptive_field, save_checkpoint, Checkpoint, Network, NetworkConfig};
use crate::parallel::{map_indexed, Exec};
use crate::resample::{degrade, modcrop, DegradeMode};
use crate::tensor::{conv2d_backward_with, conv2d_valid_with, relu, relu_backward, FilterBank, Scalar, Tensor};

/// One training pair: degraded sub-image and the central crop of its ground
/// truth, sized to match the network's valid output.
#[derive(Clone, Debug)]
pub struct TrainSample<S = f32> {
    pub input: Tensor<S>,
    pub target: Tensor<S>,
}

/// Training hyperparameters.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub scale: usize,
    pub f_sub: usize,
    pub stride: usize,
    pub batch_size: usize,
    pub momentum: f64,
    /// One learning rate per layer.
    pub lr_per_layer: Vec<f64>,
    pub total_backprops: u64,
    /// Backprops spent in phase 1 of the pre-training strategies.
    pub pretrain_backprops: u64,
    pub seed: u64,
    /// Per-channel loss weights; must match the network's channel count.
    pub channel_weights: Vec<f64>,
    pub degrade_mode: DegradeMode,
    /// Validation/logging cadence in backprops; 0 logs only at the end.
    pub validate_every: u64,
}

impl TrainConfig {
    /// Defaults for a given scale and layer count: 33x33 sub-images with
    /// stride 14, batch 128, momentum 0.9, and per-layer learning rates with
    /// the reconstruction layer an order of magnitude lower.
    pub fn defaults(scale: usize, n_layers: usize) -> TrainConfig {
        let mut lr = vec![2e-2; n_layers];
        if let Some(last) = lr.last_mut() {
            *last = 2e-3;
        }
        TrainConfig {
            scale,
            f_sub: 33,
            stride: 14,
            batch_size: 128,
            momentum: 0.9,
            lr_per_layer: lr,
            total_backprops: 10_000_000,
            pretrain_backprops: 0,
            seed: 1,
            channel_weights: vec![1.0],
            degrade_mode: DegradeMode::BicubicDownUp,
            validate_every: 500_000,
        }
    }

    pub fn validate(&self, net: &NetworkConfig) -> Result<()> {
        if self.scale == 0 {
            return Err(Error::config("scale must be >= 1"));
        }
        if self.lr_per_layer.len() != net.layers().len() {
            return Err(Error::config(format!(
                "{} learning rates for {} layers",
                self.lr_per_layer.len(),
                net.layers().len()
            )));
        }
        if self.lr_per_layer.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::config("learning rates must be finite and >= 0"));
        }
        if self.channel_weights.len() != net.channels() {
            return Err(Error::config(format!(
                "{} channel weights for {} channels",
                self.channel_weights.len(),
                net.channels()
            )));
        }
        if self.channel_weights.iter().any(|&w| w < 0.0) || self.channel_weights.iter().all(|&w| w == 0.0)
        {
            return Err(Error::config(
                "channel weights must be >= 0 and not all zero",
            ));
        }
        if self.batch_size == 0 || self.stride == 0 {
            return Err(Error::config("batch size and stride must be >= 1"));
        }
        if self.f_sub < receptive_field(net) {
            return Err(Error::config(format!(
                "sub-image size {} below the receptive field {}",
                self.f_sub,
                receptive_field(net)
            )));
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return Err(Error::config("momentum must be in [0, 1)"));
        }
        if self.pretrain_backprops > self.total_backprops {
            return Err(Error::config(
                "pretrain backprops exceed the total backprop budget",
            ));
        }
        Ok(())
    }
}

/// Momentum buffers congruent to every weight and bias array of a network.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumState {
    /// Per layer: (delta weights, delta biases).
    pub layers: Vec<(Vec<f32>, Vec<f32>)>,
}

impl MomentumState {
    pub fn zeros(net: &Network<f32>) -> MomentumState {
        MomentumState {
            layers: net
                .banks()
                .iter()
                .map(|b| (vec![0.0; b.weights().len()], vec![0.0; b.biases().len()]))
                .collect(),
        }
    }

    pub fn matches(&self, net: &Network<f32>) -> bool {
        self.layers.len() == net.banks().len()
            && self
                .layers
                .iter()
                .zip(net.banks())
                .all(|((dw, db), b)| dw.len() == b.weights().len() && db.len() == b.biases().len())
    }
}

/// The momentum update: `delta <- m * delta - lr * grad; w <- w + delta`.
pub fn momentum_update<S: Scalar>(weights: &mut [S], delta: &mut [S], grad: &[S], momentum: S, lr: S) {
    for ((w, d), &g) in weights.iter_mut().zip(delta.iter_mut()).zip(grad) {
        *d = momentum * *d - lr * g;
        *w += *d;
    }
}

/// Gradients for one layer's parameters.
#[derive(Clone, Debug)]
pub struct LayerGrads<S = f32> {
    pub weights: Vec<S>,
    pub biases: Vec<S>,
}

fn weighted_mse_and_grad<S: Scalar>(
    pred: &Tensor<S>,
    target: &Tensor<S>,
    channel_weights: &[f64],
) -> Result<(f64, Tensor<S>)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!(
            "loss shapes differ: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    if channel_weights.len() != pred.channels() {
        return Err(Error::config(format!(
            "{} channel weights for {} channels",
            channel_weights.len(),
            pred.channels()
        )));
    }
    let weight_sum: f64 = channel_weights.iter().sum();
    if weight_sum <= 0.0 {
        return Err(Error::config("channel weights sum to zero"));
    }
    let px = pred.height() * pred.width();
    let mut grad = Tensor::zeros(pred.channels(), pred.height(), pred.width());
    let mut loss = 0.0;
    for c in 0..pred.channels() {
        let w = channel_weights[c];
        let scale = S::from_f64(2.0 * w / (px as f64 * weight_sum));
        let (pp, tp) = (pred.plane(c), target.plane(c));
        let gp = &mut grad.data_mut()[c * px..(c + 1) * px];
        let mut acc = 0.0;
        for ((&p, &t), g) in pp.iter().zip(tp).zip(gp.iter_mut()) {
            let d = p - t;
            acc += (d * d).as_f64();
            *g = scale * d;
        }
        loss += w * acc / px as f64;
    }
    Ok((loss / weight_sum, grad))
}

/// Channel-weighted mean squared error: per-channel pixel mean, weighted
/// average over channels.
pub fn loss_mse<S: Scalar>(pred: &Tensor<S>, target: &Tensor<S>, channel_weights: &[f64]) -> Result<f64> {
    weighted_mse_and_grad(pred, target, channel_weights).map(|(l, _)| l)
}

/// Forward + backward through a bank chain for one sample. Returns per-layer
/// parameter gradients and the sample loss.
pub fn network_gradients<S: Scalar>(
    banks: &[FilterBank<S>],
    input: &Tensor<S>,
    target: &Tensor<S>,
    channel_weights: &[f64],
) -> Result<(Vec<LayerGrads<S>>, f64)> {
    network_gradients_with(banks, input, target, channel_weights, Exec::Sequential)
}

pub fn network_gradients_with<S: Scalar>(
    banks: &[FilterBank<S>],
    input: &Tensor<S>,
    target: &Tensor<S>,
    channel_weights: &[f64],
    exec: Exec,
) -> Result<(Vec<LayerGrads<S>>, f64)> {
    if banks.is_empty() {
        return Err(Error::config("empty network"));
    }
    let last = banks.len() - 1;
    let mut inputs: Vec<Tensor<S>> = Vec::with_capacity(banks.len());
    let mut pres: Vec<Tensor<S>> = Vec::with_capacity(banks.len());
    for (l, bank) in banks.iter().enumerate() {
        let x = if l == 0 { input } else { &inputs[l - 1] };
        // inputs[l] is the activation FEEDING layer l+1; store the conv
        // input separately to keep the indexing honest.
        let pre = conv2d_valid_with(x, bank, exec)?;
        let act = if l == last { pre.clone() } else { relu(&pre) };
        pres.push(pre);
        inputs.push(act);
    }
    let (loss, mut grad) = weighted_mse_and_grad(&inputs[last], target, channel_weights)?;
    let mut grads: Vec<Option<LayerGrads<S>>> = vec![None; banks.len()];
    for l in (0..banks.len()).rev() {
        let d_pre = if l == last {
            grad
        } else {
            relu_backward(&pres[l], &grad)?
        };
        let x = if l == 0 { input } else { &inputs[l - 1] };
        let cg = conv2d_backward_with(x, &banks[l], &d_pre, exec)?;
        grads[l] = Some(LayerGrads {
            weights: cg.weights,
            biases: cg.biases,
        });
        grad = cg.input;
    }
    Ok((grads.into_iter().map(|g| g.unwrap()).collect(), loss))
}

/// Grid-crops every image at the configured stride, degrades each crop to
/// form the input, and pairs it with the central ground-truth crop. Images
/// smaller than the sub-image size are skipped with a warning.
pub fn extract_subimages<S: Scalar>(
    hr_images: &[Tensor<S>],
    cfg: &TrainConfig,
    net: &NetworkConfig,
) -> Result<Vec<TrainSample<S>>> {
    if cfg.f_sub < receptive_field(net) {
        return Err(Error::config(format!(
            "sub-image size {} below receptive field {}",
            cfg.f_sub,
            receptive_field(net)
        )));
    }
    if cfg.f_sub % cfg.scale != 0 {
        return Err(Error::config(format!(
            "sub-image size {} must be divisible by scale {} for degradation",
            cfg.f_sub, cfg.scale
        )));
    }
    let margin = net.total_shrink() / 2;
    let mut samples = Vec::new();
    for (idx, img) in hr_images.iter().enumerate() {
        if img.channels() != net.channels() {
            return Err(Error::config(format!(
                "image {} has {} channels, network expects {}",
                idx,
                img.channels(),
                net.channels()
            )));
        }
        let img = modcrop(img, cfg.scale)?;
        let (_, h, w) = img.shape();
        if h < cfg.f_sub || w < cfg.f_sub {
            log::warn!(
                "skipping image {}: {}x{} smaller than sub-image size {}",
                idx,
                h,
                w,
                cfg.f_sub
            );
            continue;
        }
        let mut y = 0;
        while y + cfg.f_sub <= h {
            let mut x = 0;
            while x + cfg.f_sub <= w {
                let hr = img.crop(y, x, cfg.f_sub, cfg.f_sub)?;
                let input = degrade(&hr, cfg.scale, cfg.degrade_mode)?;
                let target = hr.crop_border(margin)?;
                samples.push(TrainSample { input, target });
                x += cfg.stride;
            }
            y += cfg.stride;
        }
    }
    Ok(samples)
}

/// One minibatch update: per-sample gradients (in parallel), averaged in
/// sample order, then the momentum rule per layer with its own learning
/// rate. Returns the mean batch loss.
pub fn sgd_step(
    net: &mut Network<f32>,
    state: &mut MomentumState,
    batch: &[&TrainSample<f32>],
    cfg: &TrainConfig,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::data("empty batch"));
    }
    if !state.matches(net) {
        return Err(Error::config("momentum buffers do not match the network"));
    }
    cfg.validate(net.config())?;
    let banks = net.banks();
    let results: Vec<Result<(Vec<LayerGrads<f32>>, f64)>> = map_indexed(Exec::default(), batch.len(), |i| {
        network_gradients_with(
            banks,
            &batch[i].input,
            &batch[i].target,
            &cfg.channel_weights,
            Exec::Sequential,
        )
    });

    let inv = 1.0 / batch.len() as f32;
    let mut total: Option<Vec<LayerGrads<f32>>> = None;
    let mut loss_sum = 0.0;
    for r in results {
        let (g, l) = r?;
        loss_sum += l;
        match &mut total {
            None => total = Some(g),
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(&g) {
                    for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                        *x += y;
                    }
                    for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                        *x += y;
                    }
                }
            }
        }
    }
    let mut total = total.expect("nonempty batch");
    for g in &mut total {
        g.weights.iter_mut().for_each(|v| *v *= inv);
        g.biases.iter_mut().for_each(|v| *v *= inv);
    }

    let momentum = cfg.momentum as f32;
    for ((bank, (dw, db)), (g, &lr)) in net
        .banks_mut()
        .iter_mut()
        .zip(state.layers.iter_mut())
        .zip(total.iter().zip(&cfg.lr_per_layer))
    {
        let lr = lr as f32;
        momentum_update(bank.weights_mut(), dw, &g.weights, momentum, lr);
        momentum_update(bank.biases_mut(), db, &g.biases, momentum, lr);
    }
    Ok(loss_sum / batch.len() as f64)
}

/// The shuffled visit order for one epoch, derived from (seed, epoch) so a
/// resumed run replays identical batches.
pub fn epoch_permutation(seed: u64, epoch: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch.wrapping_add(1));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

/// Mutable training state; checkpoints capture exactly this.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub network: Network<f32>,
    pub momentum: MomentumState,
    pub backprops: u64,
}

impl TrainState {
    pub fn new(network: Network<f32>) -> TrainState {
        let momentum = MomentumState::zeros(&network);
        TrainState {
            network,
            momentum,
            backprops: 0,
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> TrainState {
        let momentum = ck
            .momentum
            .unwrap_or_else(|| MomentumState::zeros(&ck.network));
        TrainState {
            network: ck.network,
            momentum,
            backprops: ck.backprops,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_checkpoint(path, &self.network, Some(&self.momentum), self.backprops)
    }
}

/// Validation images (in their on-disk color space) scored with the standard
/// protocol between logging events.
pub struct Validation<'a> {
    pub images: &'a [(String, Tensor<f32>)],
    pub space: ModelSpace,
}

/// Side-channel outputs of the training loop.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrainOptions<'a> {
    pub log_path: Option<&'a Path>,
    pub checkpoint_path: Option<&'a Path>,
    /// Checkpoint cadence in backprops; 0 writes only the final checkpoint.
    pub checkpoint_every: u64,
}

/// One logged validation event.
#[derive(Clone, Debug)]
pub struct LogRow {
    pub backprops: u64,
    pub epoch: u64,
    pub train_loss: f64,
    pub val_psnr: Option<f64>,
    pub elapsed_seconds: f64,
}

impl LogRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{:.8e},{},{:.3}\n",
            self.backprops,
            self.epoch,
            self.train_loss,
            self.val_psnr
                .map(|v| format!("{:.6}", v))
                .unwrap_or_else(|| "nan".into()),
            self.elapsed_seconds
        )
    }
}

const LOG_HEADER: &str = "backprops,epoch,train_loss,val_psnr,elapsed_seconds\n";

fn validation_psnr(state: &TrainState, val: &Validation<'_>, cfg: &TrainConfig) -> Result<f64> {
    let protocol = EvalProtocol {
        scale: cfg.scale,
        shave: cfg.scale,
        metrics: vec![MetricKind::Psnr],
        channel: EvalChannel::Y,
        quantize: false,
    };
    let method = SrMethod::Network {
        net: &state.network,
        space: val.space,
    };
    let report = eval::evaluate_images(&method, val.images, &protocol, Exec::default())?;
    report
        .average(MetricKind::Psnr)
        .ok_or_else(|| Error::data("validation produced no PSNR values"))
}

/// Runs momentum SGD until the backprop counter reaches
/// `cfg.total_backprops`, shuffling per epoch with a seed-derived
/// permutation, logging validation rows, and checkpointing atomically.
/// Resuming from a checkpoint replays the identical batch sequence.
pub fn train_loop(
    state: &mut TrainState,
    samples: &[TrainSample<f32>],
    validation: Option<&Validation<'_>>,
    cfg: &TrainConfig,
    opts: &TrainOptions<'_>,
) -> Result<Vec<LogRow>> {
    cfg.validate(state.network.config())?;
    if samples.is_empty() {
        return Err(Error::data("no training samples"));
    }
    if !state.momentum.matches(&state.network) {
        return Err(Error::config("momentum buffers do not match the network"));
    }

    let mut log_file = match opts.log_path {
        Some(path) => {
            let fresh = !path.exists();
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            if fresh {
                f.write_all(LOG_HEADER.as_bytes())?;
            }
            Some(f)
        }
        None => None,
    };

    let n = samples.len();
    let total = cfg.total_backprops;
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut window_loss = 0.0;
    let mut window_steps = 0u64;

    let next_multiple = |current: u64, every: u64| -> u64 {
        if every == 0 {
            u64::MAX
        } else {
            (current / every + 1) * every
        }
    };
    let mut next_val = next_multiple(state.backprops, cfg.validate_every);
    let mut next_ckpt = next_multiple(state.backprops, opts.checkpoint_every);

    let emit = |state: &TrainState,
                    window_loss: &mut f64,
                    window_steps: &mut u64,
                    rows: &mut Vec<LogRow>,
                    log_file: &mut Option<std::fs::File>|
     -> Result<()> {
        let train_loss = if *window_steps > 0 {
            *window_loss / *window_steps as f64
        } else {
            f64::NAN
        };
        let val_psnr = match validation {
            Some(v) => Some(validation_psnr(state, v, cfg)?),
            None => None,
        };
        let row = LogRow {
            backprops: state.backprops,
            epoch: state.backprops / n as u64,
            train_loss,
            val_psnr,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        };
        if let Some(f) = log_file.as_mut() {
            f.write_all(row.csv().as_bytes())?;
        }
        rows.push(row);
        *window_loss = 0.0;
        *window_steps = 0;
        Ok(())
    };

    while state.backprops < total {
        let epoch = state.backprops / n as u64;
        let mut offset = (state.backprops % n as u64) as usize;
        let perm = epoch_permutation(cfg.seed, epoch, n);
        while offset < n && state.backprops < total {
            let take = cfg
                .batch_size
                .min(n - offset)
                .min((total - state.backprops) as usize);
            let batch: Vec<&TrainSample<f32>> =
                perm[offset..offset + take].iter().map(|&i| &samples[i]).collect();
            let loss = sgd_step(&mut state.network, &mut state.momentum, &batch, cfg)?;
            state.backprops += take as u64;
            offset += take;
            window_loss += loss;
            window_steps += 1;

            if state.backprops >= next_ckpt {
                if let Some(path) = opts.checkpoint_path {
                    state.save(path)?;
                }
                next_ckpt = next_multiple(state.backprops, opts.checkpoint_every);
            }
            if state.backprops >= next_val {
                emit(state, &mut window_loss, &mut window_steps, &mut rows, &mut log_file)?;
                next_val = next_multiple(state.backprops, cfg.validate_every);
            }
        }
    }

    if rows.last().map(|r| r.backprops) != Some(state.backprops) {
        emit(state, &mut window_loss, &mut window_steps, &mut rows, &mut log_file)?;
    }
    if let Some(path) = opts.checkpoint_path {
        state.save(path)?;
    }
    Ok(rows)
}

/// Color-training strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Single-channel network trained on luminance only.
    YOnly,
    /// Three-channel network trained on YCbCr with uniform loss weights.
    YCbCr,
    /// Phase 1 trains on the Y channel alone, phase 2 fine-tunes on all
    /// three channels.
    YPretrain,
    /// Phase 1 trains on Cb/Cr, phase 2 fine-tunes on all three channels.
    CbCrPretrain,
    /// Three-channel network trained directly in RGB space.
    Rgb,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Strategy> {
        match s {
            "y_only" => Ok(Strategy::YOnly),
            "ycbcr" => Ok(Strategy::YCbCr),
            "y_pretrain" => Ok(Strategy::YPretrain),
            "cbcr_pretrain" => Ok(Strategy::CbCrPretrain),
            "rgb" => Ok(Strategy::Rgb),
            other => Err(Error::config(format!(
                "unknown strategy '{}' (expected y_only, ycbcr, y_pretrain, cbcr_pretrain, or rgb)",
                other
            ))),
        }
    }
}

impl Strategy {
    pub fn channels(self) -> usize {
        match self {
            Strategy::YOnly => 1,
            _ => 3,
        }
    }

    /// The color space training samples must be prepared in.
    pub fn sample_space(self) -> ModelSpace {
        match self {
            Strategy::YOnly => ModelSpace::Luminance,
            Strategy::Rgb => ModelSpace::Rgb,
            _ => ModelSpace::YCbCr,
        }
    }

    /// Phases as (channel weights, run-until backprop counter).
    pub fn phases(self, cfg: &TrainConfig) -> Vec<(Vec<f64>, u64)> {
        let total = cfg.total_backprops;
        let pre = cfg.pretrain_backprops.min(total);
        match self {
            Strategy::YOnly => vec![(vec![1.0], total)],
            Strategy::YCbCr | Strategy::Rgb => vec![(vec![1.0; 3], total)],
            Strategy::YPretrain => vec![
                (vec![1.0, 0.0, 0.0], pre),
                (vec![1.0, 1.0, 1.0], total),
            ],
            Strategy::CbCrPretrain => vec![
                (vec![0.0, 1.0, 1.0], pre),
                (vec![1.0, 1.0, 1.0], total),
            ],
        }
    }
}

/// Runs the phases of a color-training strategy with train_loop, switching
/// channel weights between phases.
pub fn run_strategy(
    strategy: Strategy,
    state: &mut TrainState,
    samples: &[TrainSample<f32>],
    validation: Option<&Validation<'_>>,
    cfg: &TrainConfig,
    opts: &TrainOptions<'_>,
) -> Result<Vec<LogRow>> {
    if state.network.config().channels() != strategy.channels() {
        return Err(Error::config(format!(
            "strategy needs a {}-channel network, got {}",
            strategy.channels(),
            state.network.config().channels()
        )));
    }
    if let Some(s) = samples.first() {
        if s.input.channels() != strategy.channels() {
            return Err(Error::config(format!(
                "strategy needs {}-channel samples, got {}",
                strategy.channels(),
                s.input.channels()
            )));
        }
    }
    let mut rows = Vec::new();
    for (weights, until) in strategy.phases(cfg) {
        if state.backprops >= until {
            continue;
        }
        let phase_cfg = TrainConfig {
            channel_weights: weights,
            total_backprops: until,
            ..cfg.clone()
        };
        rows.extend(train_loop(state, samples, validation, &phase_cfg, opts)?);
    }
    Ok(rows)
}
