//! Network configuration, initialization, inference, structural arithmetic,
//! and checkpoint persistence.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image_io::{save_image, ImageU8};
use crate::parallel::Exec;
use crate::tensor::{conv2d_valid_with, relu, replicate_pad, FilterBank, Scalar, Tensor};
use crate::train::MomentumState;

/// One layer: spatial filter size `f` (odd) and output filter count `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub f: usize,
    pub n: usize,
}

/// Ordered layer list plus the image channel count. The last layer always
/// reconstructs `channels` planes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkConfig {
    channels: usize,
    layers: Vec<LayerSpec>,
}

impl NetworkConfig {
    pub fn new(channels: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::config("channel count must be >= 1"));
        }
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for l in &layers {
            if l.f == 0 || l.f % 2 == 0 {
                return Err(Error::config(format!("filter size {} must be odd", l.f)));
            }
            if l.n == 0 {
                return Err(Error::config("layer filter count must be >= 1"));
            }
        }
        let last = layers.last().unwrap();
        if last.n != channels {
            return Err(Error::config(format!(
                "reconstruction layer has {} filters but the image has {} channels",
                last.n, channels
            )));
        }
        Ok(NetworkConfig { channels, layers })
    }

    /// Builds a config from dash notation (filter sizes) plus the hidden
    /// layer widths, e.g. `("9-1-5", [64, 32], 1)`. The final layer width is
    /// always the channel count.
    pub fn from_notation(notation: &str, hidden: &[usize], channels: usize) -> Result<Self> {
        let sizes: Vec<usize> = notation
            .split('-')
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| Error::config(format!("bad layer notation '{}'", notation)))
            })
            .collect::<Result<_>>()?;
        if sizes.len() < 2 {
            return Err(Error::config(format!(
                "notation '{}' needs at least two layers",
                notation
            )));
        }
        if hidden.len() != sizes.len() - 1 {
            return Err(Error::config(format!(
                "notation '{}' needs {} hidden widths, got {}",
                notation,
                sizes.len() - 1,
                hidden.len()
            )));
        }
        let mut layers = Vec::with_capacity(sizes.len());
        for (i, &f) in sizes.iter().enumerate() {
            let n = if i == sizes.len() - 1 { channels } else { hidden[i] };
            layers.push(LayerSpec { f, n });
        }
        NetworkConfig::new(channels, layers)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Input channel count of layer `l`.
    pub fn input_channels(&self, l: usize) -> usize {
        if l == 0 {
            self.channels
        } else {
            self.layers[l - 1].n
        }
    }

    /// Total spatial shrink of a valid forward pass: `sum(f_i - 1)`.
    pub fn total_shrink(&self) -> usize {
        self.layers.iter().map(|l| l.f - 1).sum()
    }

    pub fn notation(&self) -> String {
        self.layers
            .iter()
            .map(|l| l.f.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// Learnable weights only, excluding biases.
pub fn count_weights(config: &NetworkConfig) -> usize {
    config
        .layers()
        .iter()
        .enumerate()
        .map(|(l, spec)| config.input_channels(l) * spec.n * spec.f * spec.f)
        .sum()
}

/// Side length of the input square influencing one output pixel:
/// `1 + sum(f_i - 1)`.
pub fn receptive_field(config: &NetworkConfig) -> usize {
    1 + config.total_shrink()
}

/// A configured network with one filter bank per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<S = f32> {
    config: NetworkConfig,
    banks: Vec<FilterBank<S>>,
}

/// Standard normal deviate via Box-Muller; two uniform draws per value keeps
/// the stream layout trivial and reproducible.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

impl<S: Scalar> Network<S> {
    /// Fresh network: weights drawn from a zero-mean Gaussian with standard
    /// deviation 0.001 using the seeded generator, biases zero.
    pub fn init(config: NetworkConfig, seed: u64) -> Network<S> {
        const INIT_STD: f64 = 0.001;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut banks = Vec::with_capacity(config.layers().len());
        for (l, spec) in config.layers().iter().enumerate() {
            let n_in = config.input_channels(l);
            let weights = (0..spec.n * n_in * spec.f * spec.f)
                .map(|_| S::from_f64(INIT_STD * gaussian(&mut rng)))
                .collect();
            let biases = vec![S::zero(); spec.n];
            banks.push(FilterBank::new(spec.n, n_in, spec.f, weights, biases).expect("valid spec"));
        }
        Network { config, banks }
    }

    /// Wraps existing banks, validating that they chain correctly.
    pub fn from_banks(config: NetworkConfig, banks: Vec<FilterBank<S>>) -> Result<Network<S>> {
        if banks.len() != config.layers().len() {
            return Err(Error::config(format!(
                "{} banks for {} layers",
                banks.len(),
                config.layers().len()
            )));
        }
        for (l, (bank, spec)) in banks.iter().zip(config.layers()).enumerate() {
            if bank.n_out() != spec.n || bank.f() != spec.f || bank.n_in() != config.input_channels(l)
            {
                return Err(Error::config(format!(
                    "bank {} is {}x{}x{}, config wants {}x{}x{}",
                    l,
                    bank.n_out(),
                    bank.n_in(),
                    bank.f(),
                    spec.n,
                    config.input_channels(l),
                    spec.f
                )));
            }
        }
        Ok(Network { config, banks })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn banks(&self) -> &[FilterBank<S>] {
        &self.banks
    }

    pub fn banks_mut(&mut self) -> &mut [FilterBank<S>] {
        &mut self.banks
    }

    /// Valid forward pass: convolution plus ReLU after every layer except
    /// the reconstruction layer. Works for any input at least as large as
    /// the receptive field.
    pub fn forward(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        self.forward_with(input, Exec::default())
    }

    pub fn forward_with(&self, input: &Tensor<S>, exec: Exec) -> Result<Tensor<S>> {
        let mut t = None;
        let last = self.banks.len() - 1;
        for (l, bank) in self.banks.iter().enumerate() {
            let pre = conv2d_valid_with(t.as_ref().unwrap_or(input), bank, exec)?;
            t = Some(if l == last { pre } else { relu(&pre) });
        }
        Ok(t.expect("at least one layer"))
    }

    /// Same-size inference: replicate-pads the input by half the total
    /// shrink per side, then runs the valid forward pass.
    pub fn predict_full(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        self.predict_full_with(input, Exec::default())
    }

    pub fn predict_full_with(&self, input: &Tensor<S>, exec: Exec) -> Result<Tensor<S>> {
        let margin = self.config.total_shrink() / 2;
        self.forward_with(&replicate_pad(input, margin), exec)
    }

    pub fn cast<T: Scalar>(&self) -> Network<T> {
        Network {
            config: self.config.clone(),
            banks: self.banks.iter().map(|b| b.cast::<T>()).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoint file format
//
//   magic "SRCN" | version u32 | channels u32 | layer count u32
//   | per layer: f u32, n u32 | flags u8 (bit0 = momentum present)
//   | backprop counter u64
//   | per layer: weights f32, biases f32
//   | if momentum: per layer delta weights f32, delta biases f32
//
// All integers and floats little-endian.
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 4] = b"SRCN";
const CHECKPOINT_VERSION: u32 = 1;

/// A deserialized checkpoint: parameters, optional momentum buffers, and the
/// cumulative backprop counter.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub network: Network<f32>,
    pub momentum: Option<MomentumState>,
    pub backprops: u64,
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    network: &Network<f32>,
    momentum: Option<&MomentumState>,
    backprops: u64,
) -> Result<()> {
    let path = path.as_ref();
    let config = network.config();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(config.channels() as u32).to_le_bytes());
    out.extend_from_slice(&(config.layers().len() as u32).to_le_bytes());
    for l in config.layers() {
        out.extend_from_slice(&(l.f as u32).to_le_bytes());
        out.extend_from_slice(&(l.n as u32).to_le_bytes());
    }
    out.push(momentum.is_some() as u8);
    out.extend_from_slice(&backprops.to_le_bytes());
    for bank in network.banks() {
        for &w in bank.weights() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for &b in bank.biases() {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    if let Some(m) = momentum {
        if !m.matches(network) {
            return Err(Error::config("momentum buffers do not match the network"));
        }
        for (dw, db) in &m.layers {
            for &w in dw {
                out.extend_from_slice(&w.to_le_bytes());
            }
            for &b in db {
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
    }
    // Write-then-rename keeps a crash from truncating an existing checkpoint.
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &out)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let slice = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::format("checkpoint truncated"))?;
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(4 * n)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let bytes = fs::read(path.as_ref())?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    if cur.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::format("bad checkpoint magic"));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(format!(
            "checkpoint version {} unsupported (expected {})",
            version, CHECKPOINT_VERSION
        )));
    }
    let channels = cur.u32()? as usize;
    let n_layers = cur.u32()? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let f = cur.u32()? as usize;
        let n = cur.u32()? as usize;
        layers.push(LayerSpec { f, n });
    }
    let config = NetworkConfig::new(channels, layers)
        .map_err(|e| Error::format(format!("checkpoint config invalid: {}", e)))?;
    let flags = cur.take(1)?[0];
    let backprops = cur.u64()?;

    let mut banks = Vec::with_capacity(n_layers);
    for (l, spec) in config.layers().to_vec().iter().enumerate() {
        let n_in = config.input_channels(l);
        let weights = cur.f32s(spec.n * n_in * spec.f * spec.f)?;
        let biases = cur.f32s(spec.n)?;
        banks.push(
            FilterBank::new(spec.n, n_in, spec.f, weights, biases)
                .map_err(|e| Error::format(format!("checkpoint bank invalid: {}", e)))?,
        );
    }
    let network = Network::from_banks(config, banks)
        .map_err(|e| Error::format(format!("checkpoint inconsistent: {}", e)))?;

    let momentum = if flags & 1 != 0 {
        let mut layers = Vec::with_capacity(n_layers);
        for bank in network.banks() {
            let dw = cur.f32s(bank.weights().len())?;
            let db = cur.f32s(bank.biases().len())?;
            layers.push((dw, db));
        }
        Some(MomentumState { layers })
    } else {
        None
    };
    if cur.pos != bytes.len() {
        return Err(Error::format(format!(
            "checkpoint has {} trailing bytes",
            bytes.len() - cur.pos
        )));
    }
    Ok(Checkpoint {
        network,
        momentum,
        backprops,
    })
}

/// Writes layer `layer_index`'s filters as one tiled image, sorted by
/// descending weight variance. Each filter is min-max normalized to
/// `[0, 255]` (constant filters map to mid-gray); multi-input filters show
/// their input slices side by side within the tile.
pub fn export_filters<S: Scalar>(
    network: &Network<S>,
    layer_index: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let bank = network
        .banks()
        .get(layer_index)
        .ok_or_else(|| Error::config(format!("layer {} out of range", layer_index)))?;
    let f = bank.f();
    let (n_out, n_in) = (bank.n_out(), bank.n_in());

    let mut order: Vec<(usize, f64)> = (0..n_out)
        .map(|o| {
            let vals: Vec<f64> = bank.filter(o).iter().map(|v| v.as_f64()).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            (o, var)
        })
        .collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

    let cols = (n_out as f64).sqrt().ceil() as usize;
    let rows = n_out.div_ceil(cols);
    let tile_w = n_in * f + (n_in - 1);
    let (gh, gw) = (rows * (f + 1) - 1, cols * (tile_w + 1) - 1);
    let mut pixels = vec![0u8; gh * gw];

    for (slot, &(o, _)) in order.iter().enumerate() {
        let vals: Vec<f64> = bank.filter(o).iter().map(|v| v.as_f64()).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let norm = |v: f64| -> u8 {
            if hi > lo {
                ((v - lo) / (hi - lo) * 255.0).round() as u8
            } else {
                128
            }
        };
        let (gy, gx) = (slot / cols * (f + 1), slot % cols * (tile_w + 1));
        for i in 0..n_in {
            for r in 0..f {
                for c in 0..f {
                    let v = vals[(i * f + r) * f + c];
                    pixels[(gy + r) * gw + gx + i * (f + 1) + c] = norm(v);
                }
            }
        }
    }
    save_image(path, &ImageU8::new(1, gh, gw, pixels)?)
}
