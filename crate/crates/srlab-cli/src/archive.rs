//! Sample archive: the binary file produced by `prepare` and consumed by
//! `train`.
//!
//! Layout (all little-endian):
//!   count u32 | channels u32 | f_sub u32 | out_size u32
//!   | per sample: input (channels * f_sub^2 f32), target (channels * out_size^2 f32)
//!
//! Targets are stored at `out_size` and cropped further at load time when
//! the configured network produces a smaller valid output, so one archive
//! can serve several architectures.

use std::fs;
use std::path::Path;

use srlab::train::TrainSample;
use srlab::{Error, Result, Tensor};

pub struct Archive {
    pub channels: usize,
    pub f_sub: usize,
    pub out_size: usize,
    pub samples: Vec<TrainSample<f32>>,
}

pub fn write_archive(path: &Path, samples: &[TrainSample<f32>]) -> Result<()> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Data("no samples to write".into()))?;
    let (c, f_sub, _) = first.input.shape();
    let (_, out, _) = first.target.shape();
    let mut bytes = Vec::with_capacity(16 + samples.len() * 4 * c * (f_sub * f_sub + out * out));
    bytes.extend_from_slice(&(samples.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&(c as u32).to_le_bytes());
    bytes.extend_from_slice(&(f_sub as u32).to_le_bytes());
    bytes.extend_from_slice(&(out as u32).to_le_bytes());
    for s in samples {
        if s.input.shape() != (c, f_sub, f_sub) || s.target.shape() != (c, out, out) {
            return Err(Error::Shape("inconsistent sample shapes in archive".into()));
        }
        for &v in s.input.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for &v in s.target.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_archive(path: &Path) -> Result<Archive> {
    let bytes = fs::read(path)?;
    if bytes.len() < 16 {
        return Err(Error::Format("sample archive header truncated".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize;
    let (count, channels, f_sub, out_size) = (word(0), word(1), word(2), word(3));
    let per_sample = channels * (f_sub * f_sub + out_size * out_size);
    let expected = 16 + count * per_sample * 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "sample archive is {} bytes, header implies {}",
            bytes.len(),
            expected
        )));
    }
    let mut samples = Vec::with_capacity(count);
    let mut pos = 16;
    let mut read_block = |n: usize| -> Vec<f32> {
        let out = bytes[pos..pos + 4 * n]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        pos += 4 * n;
        out
    };
    for _ in 0..count {
        let input = Tensor::new(channels, f_sub, f_sub, read_block(channels * f_sub * f_sub))?;
        let target = Tensor::new(channels, out_size, out_size, read_block(channels * out_size * out_size))?;
        samples.push(TrainSample { input, target });
    }
    Ok(Archive {
        channels,
        f_sub,
        out_size,
        samples,
    })
}
