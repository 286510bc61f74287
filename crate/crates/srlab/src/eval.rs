//! Full-reference quality metrics and the benchmark runner.
//!
//! The protocol: modcrop the ground truth to the scale, degrade it, super-
//! resolve (for the bicubic baseline the degraded image *is* the output),
//! select the evaluation channel, shave the border, then score. Metrics run
//! in `f64` on a `[0,255]` value scale regardless of the tensor type.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image_io::{load_image, luminance, rgb_to_ycbcr, to_float, to_u8, ycbcr_to_rgb};
use crate::model::Network;
use crate::parallel::{map_indexed, Exec};
use crate::resample::{degrade, modcrop, DegradeMode};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Psnr,
    Ssim,
    Msssim,
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MetricKind::Psnr => "psnr",
            MetricKind::Ssim => "ssim",
            MetricKind::Msssim => "msssim",
        })
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<MetricKind> {
        match s {
            "psnr" => Ok(MetricKind::Psnr),
            "ssim" => Ok(MetricKind::Ssim),
            "msssim" => Ok(MetricKind::Msssim),
            other => Err(Error::config(format!(
                "unknown metric '{}' (expected psnr, ssim, or msssim)",
                other
            ))),
        }
    }
}

/// Which channel the metrics are computed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalChannel {
    Y,
    Cb,
    Cr,
    /// All three RGB channels jointly.
    Rgb,
}

impl std::str::FromStr for EvalChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<EvalChannel> {
        match s {
            "y" => Ok(EvalChannel::Y),
            "cb" => Ok(EvalChannel::Cb),
            "cr" => Ok(EvalChannel::Cr),
            "rgb" => Ok(EvalChannel::Rgb),
            other => Err(Error::config(format!(
                "unknown channel '{}' (expected y, cb, cr, or rgb)",
                other
            ))),
        }
    }
}

/// How a network's channels map onto image color: a single-channel network
/// super-resolves luminance (chrominance is upscaled bicubically), a
/// three-channel network works in YCbCr or RGB space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelSpace {
    Luminance,
    YCbCr,
    Rgb,
}

impl ModelSpace {
    /// Channel count of images prepared in this space.
    pub fn image_channels(self) -> usize {
        match self {
            ModelSpace::Luminance => 1,
            _ => 3,
        }
    }
}

impl std::str::FromStr for ModelSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelSpace> {
        match s {
            "y" => Ok(ModelSpace::Luminance),
            "ycbcr" => Ok(ModelSpace::YCbCr),
            "rgb" => Ok(ModelSpace::Rgb),
            other => Err(Error::config(format!(
                "unknown model space '{}' (expected y, ycbcr, or rgb)",
                other
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalProtocol {
    pub scale: usize,
    /// Border width removed before scoring; the de-facto protocol uses the
    /// scale factor.
    pub shave: usize,
    pub metrics: Vec<MetricKind>,
    pub channel: EvalChannel,
    /// Quantize the super-resolved image to 8 bits before scoring.
    pub quantize: bool,
}

impl EvalProtocol {
    pub fn new(scale: usize, metrics: Vec<MetricKind>, channel: EvalChannel) -> EvalProtocol {
        EvalProtocol {
            scale,
            shave: scale,
            metrics,
            channel,
            quantize: false,
        }
    }
}

/// The method under evaluation.
pub enum SrMethod<'a> {
    Bicubic,
    Network {
        net: &'a Network<f32>,
        space: ModelSpace,
    },
}

impl SrMethod<'_> {
    fn label(&self) -> String {
        match self {
            SrMethod::Bicubic => "bicubic".into(),
            SrMethod::Network { net, space } => format!(
                "network {} ({})",
                net.config().notation(),
                match space {
                    ModelSpace::Luminance => "y",
                    ModelSpace::YCbCr => "ycbcr",
                    ModelSpace::Rgb => "rgb",
                }
            ),
        }
    }
}

/// Peak signal-to-noise ratio in dB on a `[0,255]` scale; `inf` when the
/// images are identical.
pub fn psnr<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "psnr shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut sum = 0.0f64;
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = 255.0 * (x.as_f64() - y.as_f64());
        sum += d * d;
    }
    let mse = sum / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

fn ssim_window() -> [f64; SSIM_WINDOW] {
    let mut g = [0.0; SSIM_WINDOW];
    let mid = (SSIM_WINDOW - 1) as f64 / 2.0;
    let mut sum = 0.0;
    for (i, v) in g.iter_mut().enumerate() {
        *v = (-((i as f64 - mid).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    g.iter_mut().for_each(|v| *v /= sum);
    g
}

/// Separable valid filtering with a symmetric 1-D kernel in both directions.
fn filter_valid(src: &[f64], h: usize, w: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let t = k.len();
    let (oh, ow) = (h - t + 1, w - t + 1);
    let mut rows = vec![0.0f64; h * ow];
    for y in 0..h {
        let src_row = &src[y * w..(y + 1) * w];
        let dst = &mut rows[y * ow..(y + 1) * ow];
        for (j, &kv) in k.iter().enumerate() {
            for (d, &s) in dst.iter_mut().zip(&src_row[j..j + ow]) {
                *d += kv * s;
            }
        }
    }
    let mut out = vec![0.0f64; oh * ow];
    for (j, &kv) in k.iter().enumerate() {
        for y in 0..oh {
            let src_row = &rows[(y + j) * ow..(y + j + 1) * ow];
            let dst = &mut out[y * ow..(y + 1) * ow];
            for (d, &s) in dst.iter_mut().zip(src_row) {
                *d += kv * s;
            }
        }
    }
    (out, oh, ow)
}

/// Mean luminance-contrast-structure map and mean contrast-structure map
/// over the valid windows of one plane pair (inputs on the 0..255 scale).
fn ssim_means(a: &[f64], b: &[f64], h: usize, w: usize) -> (f64, f64) {
    let win = ssim_window();
    let n = a.len();
    let mut aa = vec![0.0; n];
    let mut bb = vec![0.0; n];
    let mut ab = vec![0.0; n];
    for i in 0..n {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    let (mu1, oh, ow) = filter_valid(a, h, w, &win);
    let (mu2, _, _) = filter_valid(b, h, w, &win);
    let (saa, _, _) = filter_valid(&aa, h, w, &win);
    let (sbb, _, _) = filter_valid(&bb, h, w, &win);
    let (sab, _, _) = filter_valid(&ab, h, w, &win);
    let mut lum_cs = 0.0;
    let mut cs = 0.0;
    for i in 0..oh * ow {
        let (m1, m2) = (mu1[i], mu2[i]);
        let v1 = saa[i] - m1 * m1;
        let v2 = sbb[i] - m2 * m2;
        let cov = sab[i] - m1 * m2;
        let c = (2.0 * cov + SSIM_C2) / (v1 + v2 + SSIM_C2);
        let l = (2.0 * m1 * m2 + SSIM_C1) / (m1 * m1 + m2 * m2 + SSIM_C1);
        lum_cs += l * c;
        cs += c;
    }
    let count = (oh * ow) as f64;
    (lum_cs / count, cs / count)
}

fn check_ssim_input<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "ssim shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.height() < SSIM_WINDOW || a.width() < SSIM_WINDOW {
        return Err(Error::shape(format!(
            "image {}x{} smaller than the {}x{} ssim window",
            a.height(),
            a.width(),
            SSIM_WINDOW,
            SSIM_WINDOW
        )));
    }
    Ok(())
}

fn plane255<S: Scalar>(t: &Tensor<S>, c: usize) -> Vec<f64> {
    t.plane(c).iter().map(|v| v.as_f64() * 255.0).collect()
}

/// Structural similarity with the standard 11x11 Gaussian window (sigma
/// 1.5), averaged over the local map and over channels.
pub fn ssim<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<f64> {
    check_ssim_input(a, b)?;
    let (c, h, w) = a.shape();
    let mut total = 0.0;
    for ch in 0..c {
        let (lum_cs, _) = ssim_means(&plane255(a, ch), &plane255(b, ch), h, w);
        total += lum_cs;
    }
    Ok(total / c as f64)
}

/// Standard 5-level weights.
const MSSSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// Multi-scale SSIM value plus the number of levels actually used (fewer
/// than 5 when the image is too small; weights are renormalized).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MsSsim {
    pub value: f64,
    pub levels: usize,
}

fn downsample2(src: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0f64; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let base = 2 * y * w + 2 * x;
            out[y * ow + x] = (src[base] + src[base + 1] + src[base + w] + src[base + w + 1]) / 4.0;
        }
    }
    (out, oh, ow)
}

/// Multi-scale structural similarity: contrast-structure at every level,
/// full SSIM at the coarsest, combined as a weighted product with 2x2 mean
/// downsampling between levels.
pub fn msssim<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<MsSsim> {
    check_ssim_input(a, b)?;
    let (c, h, w) = a.shape();
    // Deepest level whose plane still covers the window.
    let mut levels = 1;
    let (mut lh, mut lw) = (h, w);
    while levels < MSSSIM_WEIGHTS.len() && (lh / 2) >= SSIM_WINDOW && (lw / 2) >= SSIM_WINDOW {
        levels += 1;
        lh /= 2;
        lw /= 2;
    }
    let weight_sum: f64 = MSSSIM_WEIGHTS[..levels].iter().sum();
    let weights: Vec<f64> = if levels == MSSSIM_WEIGHTS.len() {
        MSSSIM_WEIGHTS.to_vec()
    } else {
        MSSSIM_WEIGHTS[..levels].iter().map(|v| v / weight_sum).collect()
    };

    let mut total = 0.0;
    for ch in 0..c {
        let (mut pa, mut pb) = (plane255(a, ch), plane255(b, ch));
        let (mut ph, mut pw) = (h, w);
        let mut value = 1.0;
        for (lvl, &wt) in weights.iter().enumerate() {
            let (lum_cs, cs) = ssim_means(&pa, &pb, ph, pw);
            let component = if lvl == levels - 1 { lum_cs } else { cs };
            value *= component.max(0.0).powf(wt);
            if lvl != levels - 1 {
                let (na, nh, nw) = downsample2(&pa, ph, pw);
                let (nb, _, _) = downsample2(&pb, ph, pw);
                pa = na;
                pb = nb;
                ph = nh;
                pw = nw;
            }
        }
        total += value;
    }
    Ok(MsSsim {
        value: total / c as f64,
        levels,
    })
}

/// Removes `pixels` rows/columns from every side.
pub fn shave_border<S: Scalar>(img: &Tensor<S>, pixels: usize) -> Result<Tensor<S>> {
    if pixels == 0 {
        return Ok(img.clone());
    }
    img.crop_border(pixels)
}

/// Per-image metric values.
#[derive(Clone, Debug)]
pub struct ImageEval {
    pub name: String,
    pub values: Vec<(MetricKind, f64)>,
    /// Set when something noteworthy happened (e.g. MS-SSIM level fallback).
    pub note: Option<String>,
}

/// Evaluation results for one method over one dataset.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub method: String,
    pub dataset: String,
    pub rows: Vec<ImageEval>,
    /// Images that could not be evaluated, with the reason.
    pub failed: Vec<(String, String)>,
    pub averages: Vec<(MetricKind, f64)>,
}

impl EvalReport {
    fn assemble(
        method: String,
        dataset: String,
        metrics: &[MetricKind],
        rows: Vec<ImageEval>,
        failed: Vec<(String, String)>,
    ) -> EvalReport {
        let averages = metrics
            .iter()
            .map(|&m| {
                let vals: Vec<f64> = rows
                    .iter()
                    .filter_map(|r| r.values.iter().find(|(k, _)| *k == m).map(|(_, v)| *v))
                    .collect();
                (m, vals.iter().sum::<f64>() / vals.len().max(1) as f64)
            })
            .collect();
        EvalReport {
            method,
            dataset,
            rows,
            failed,
            averages,
        }
    }

    pub fn average(&self, metric: MetricKind) -> Option<f64> {
        self.averages
            .iter()
            .find(|(m, _)| *m == metric)
            .map(|(_, v)| *v)
    }

    fn fmt_value(v: f64) -> String {
        if v.is_infinite() {
            "inf".into()
        } else {
            format!("{:.4}", v)
        }
    }

    /// `image,metric,value` rows, per-image then the averages.
    pub fn csv(&self) -> String {
        let mut out = String::from("image,metric,value\n");
        for row in &self.rows {
            for (m, v) in &row.values {
                out.push_str(&format!("{},{},{}\n", row.name, m, Self::fmt_value(*v)));
            }
        }
        for (m, v) in &self.averages {
            out.push_str(&format!("average,{},{}\n", m, Self::fmt_value(*v)));
        }
        out
    }

    /// Human-readable aligned table.
    pub fn table(&self) -> String {
        let name_w = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .chain(["image".len(), "average".len()])
            .max()
            .unwrap_or(8);
        let mut out = format!("method: {}\ndataset: {}\n", self.method, self.dataset);
        out.push_str(&format!("{:<name_w$}", "image"));
        for (m, _) in &self.averages {
            out.push_str(&format!("  {:>10}", m.to_string()));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{:<name_w$}", row.name));
            for (_, v) in &row.values {
                out.push_str(&format!("  {:>10}", Self::fmt_value(*v)));
            }
            if let Some(note) = &row.note {
                out.push_str(&format!("  ({})", note));
            }
            out.push('\n');
        }
        out.push_str(&format!("{:<name_w$}", "average"));
        for (_, v) in &self.averages {
            out.push_str(&format!("  {:>10}", Self::fmt_value(*v)));
        }
        out.push('\n');
        for (name, why) in &self.failed {
            out.push_str(&format!("failed: {} ({})\n", name, why));
        }
        out
    }
}

/// Applies the method to an interpolated low-resolution image (already at
/// the target size); single-channel networks run on luminance with
/// chrominance passing through.
pub fn super_resolve(method: &SrMethod<'_>, degraded: &Tensor<f32>, exec: Exec) -> Result<Tensor<f32>> {
    match method {
        SrMethod::Bicubic => Ok(degraded.clone()),
        SrMethod::Network { net, space } => {
            let c = net.config().channels();
            match (c, degraded.channels(), space) {
                (1, 1, _) => net.predict_full_with(degraded, exec),
                (1, 3, _) => {
                    // Luminance through the network, chrominance stays
                    // bicubic-upscaled.
                    let ycc = rgb_to_ycbcr(degraded)?;
                    let y_sr = net.predict_full_with(&ycc.channel(0), exec)?;
                    let merged = Tensor::stack(&[y_sr, ycc.channel(1), ycc.channel(2)])?;
                    ycbcr_to_rgb(&merged)
                }
                (3, 3, ModelSpace::YCbCr) => {
                    let ycc = rgb_to_ycbcr(degraded)?;
                    ycbcr_to_rgb(&net.predict_full_with(&ycc, exec)?)
                }
                (3, 3, ModelSpace::Rgb) => net.predict_full_with(degraded, exec),
                (3, 3, ModelSpace::Luminance) => Err(Error::config(
                    "a 3-channel network needs model space ycbcr or rgb",
                )),
                (nc, ic, _) => Err(Error::config(format!(
                    "cannot apply a {}-channel network to a {}-channel image",
                    nc, ic
                ))),
            }
        }
    }
}

fn protocol_channel(img: &Tensor<f32>, channel: EvalChannel) -> Result<Tensor<f32>> {
    match channel {
        EvalChannel::Y => luminance(img),
        EvalChannel::Cb => Ok(rgb_to_ycbcr(img)?.channel(1)),
        EvalChannel::Cr => Ok(rgb_to_ycbcr(img)?.channel(2)),
        EvalChannel::Rgb => {
            if img.channels() == 3 {
                Ok(img.clone())
            } else {
                Err(Error::config("RGB evaluation needs a 3-channel image"))
            }
        }
    }
}

fn evaluate_one(
    method: &SrMethod<'_>,
    name: &str,
    hr: &Tensor<f32>,
    protocol: &EvalProtocol,
    exec: Exec,
) -> Result<ImageEval> {
    let hr = modcrop(hr, protocol.scale)?;
    let degraded = degrade(&hr, protocol.scale, DegradeMode::BicubicDownUp)?;
    let mut sr = super_resolve(method, &degraded, exec)?;
    if protocol.quantize {
        sr = to_float(&to_u8(&sr)?);
    }
    let gt = shave_border(&protocol_channel(&hr, protocol.channel)?, protocol.shave)?;
    let out = shave_border(&protocol_channel(&sr, protocol.channel)?, protocol.shave)?;
    let mut values = Vec::with_capacity(protocol.metrics.len());
    let mut note = None;
    for &metric in &protocol.metrics {
        let v = match metric {
            MetricKind::Psnr => psnr(&out, &gt)?,
            MetricKind::Ssim => ssim(&out, &gt)?,
            MetricKind::Msssim => {
                let ms = msssim(&out, &gt)?;
                if ms.levels < MSSSIM_WEIGHTS.len() {
                    note = Some(format!("msssim fell back to {} levels", ms.levels));
                }
                ms.value
            }
        };
        values.push((metric, v));
    }
    Ok(ImageEval {
        name: name.to_string(),
        values,
        note,
    })
}

/// Evaluates named in-memory images; per-image failures are recorded and do
/// not abort the run. Row order follows the input order.
pub fn evaluate_images(
    method: &SrMethod<'_>,
    images: &[(String, Tensor<f32>)],
    protocol: &EvalProtocol,
    exec: Exec,
) -> Result<EvalReport> {
    if protocol.metrics.is_empty() {
        return Err(Error::config("no metrics requested"));
    }
    // Images in parallel, convolutions sequential within each.
    let results = map_indexed(exec, images.len(), |i| {
        evaluate_one(method, &images[i].0, &images[i].1, protocol, Exec::Sequential)
    });
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for (r, (name, _)) in results.into_iter().zip(images) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failed.push((name.clone(), e.to_string())),
        }
    }
    Ok(EvalReport::assemble(
        method.label(),
        "memory".into(),
        &protocol.metrics,
        rows,
        failed,
    ))
}

/// Lists a directory of ground-truth images (sorted by filename), evaluates
/// each, and averages. Unreadable files become failed entries.
pub fn evaluate_dataset(
    method: &SrMethod<'_>,
    hr_dir: impl AsRef<Path>,
    protocol: &EvalProtocol,
) -> Result<EvalReport> {
    let dir = hr_dir.as_ref();
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| {
            let p = e.path();
            matches!(
                p.extension().and_then(|x| x.to_str()).map(str::to_ascii_lowercase).as_deref(),
                Some("png") | Some("ppm") | Some("pgm")
            )
        })
        .filter_map(|e| e.file_name().to_str().map(String::from))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::data(format!(
            "no images (png/ppm/pgm) in {}",
            dir.display()
        )));
    }
    let mut images = Vec::new();
    let mut failed = Vec::new();
    for name in names {
        match load_image(dir.join(&name)) {
            Ok(img) => images.push((name, to_float::<f32>(&img))),
            Err(e) => failed.push((name, e.to_string())),
        }
    }
    let mut report = evaluate_images(method, &images, protocol, Exec::default())?;
    report.dataset = dir.display().to_string();
    report.failed.extend(failed);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LayerSpec, NetworkConfig};
    use crate::tensor::FilterBank;

    fn pattern(c: usize, h: usize, w: usize, phase: f64) -> Tensor<f32> {
        Tensor::from_fn(c, h, w, |ch, y, x| {
            ((ch * h * w + y * w + x) as f64 * 0.37 + phase).sin() as f32 * 0.4 + 0.5
        })
    }

    #[test]
    fn psnr_axioms() {
        let img = pattern(1, 16, 16, 0.0);
        assert!(psnr(&img, &img).unwrap().is_infinite());

        // One 8-bit level everywhere: MSE = 1, PSNR = 20 log10(255).
        let plus = img.map(|v| v + 1.0 / 255.0);
        let p = psnr(&img, &plus).unwrap();
        assert!((p - 48.1308).abs() < 1e-3, "{}", p);

        // Monotone in noise amplitude.
        let mut last = f64::INFINITY;
        for amp in [0.01f32, 0.02, 0.05, 0.1, 0.2] {
            let noisy = Tensor::from_fn(1, 16, 16, |c, y, x| {
                img.get(c, y, x) + amp * (((y * 16 + x) as f32 * 7.1).sin())
            });
            let p = psnr(&img, &noisy).unwrap();
            assert!(p < last, "psnr should fall as noise grows");
            last = p;
        }

        assert!(psnr(&img, &Tensor::<f32>::zeros(1, 8, 8)).is_err());
    }

    #[test]
    fn ssim_axioms() {
        let a = pattern(1, 24, 20, 0.0);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);

        let b = pattern(1, 24, 20, 1.3);
        assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        assert!(ssim(&a, &b).unwrap() < 1.0);

        let tiny = Tensor::<f32>::zeros(1, 8, 8);
        assert!(matches!(ssim(&tiny, &tiny), Err(Error::Shape(_))));
    }

    #[test]
    fn ssim_constant_closed_form() {
        let a = Tensor::<f32>::from_fn(1, 16, 16, |_, _, _| 0.3);
        let b = Tensor::<f32>::from_fn(1, 16, 16, |_, _, _| 0.7);
        let (m1, m2) = (0.3f32 as f64 * 255.0, 0.7f32 as f64 * 255.0);
        let want = (2.0 * m1 * m2 + SSIM_C1) / (m1 * m1 + m2 * m2 + SSIM_C1);
        let got = ssim(&a, &b).unwrap();
        assert!((got - want).abs() < 1e-9, "{} vs {}", got, want);
    }

    #[test]
    fn msssim_axioms() {
        let a = pattern(1, 200, 184, 0.0);
        let ms = msssim(&a, &a).unwrap();
        assert_eq!(ms.value, 1.0);
        assert_eq!(ms.levels, 5);

        let b = pattern(1, 200, 184, 0.9);
        assert_eq!(msssim(&a, &b).unwrap(), msssim(&b, &a).unwrap());
    }

    #[test]
    fn msssim_single_level_equals_ssim() {
        // 16x16 cannot be halved without dropping below the window, so only
        // one level runs and the weighted product degenerates to plain SSIM.
        // The phase shift is small so the map stays positive (the product
        // form clamps negative components).
        let a = pattern(1, 16, 16, 0.0);
        let b = pattern(1, 16, 16, 0.5);
        let ms = msssim(&a, &b).unwrap();
        assert_eq!(ms.levels, 1);
        assert!((ms.value - ssim(&a, &b).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn shave_examples() {
        let img = pattern(1, 21, 21, 0.0);
        assert_eq!(shave_border(&img, 0).unwrap(), img);
        assert_eq!(shave_border(&img, 3).unwrap().shape(), (1, 15, 15));
        assert!(shave_border(&img, 11).is_err());
    }

    #[test]
    fn report_averages_match_rows() {
        let images: Vec<(String, Tensor<f32>)> = (0..4)
            .map(|i| (format!("img{}", i), pattern(3, 36, 36, i as f64)))
            .collect();
        let protocol = EvalProtocol::new(3, vec![MetricKind::Psnr, MetricKind::Ssim], EvalChannel::Y);
        let report = evaluate_images(&SrMethod::Bicubic, &images, &protocol, Exec::Sequential).unwrap();
        assert_eq!(report.rows.len(), 4);
        for metric in [MetricKind::Psnr, MetricKind::Ssim] {
            let mean = report
                .rows
                .iter()
                .map(|r| r.values.iter().find(|(m, _)| *m == metric).unwrap().1)
                .sum::<f64>()
                / 4.0;
            assert!((report.average(metric).unwrap() - mean).abs() < 1e-12);
        }
        let csv = report.csv();
        assert!(csv.starts_with("image,metric,value\n"));
        assert!(csv.contains("average,psnr,"));
        assert!(report.table().contains("average"));
    }

    #[test]
    fn gray_image_fails_chroma_channel_but_run_continues() {
        let images = vec![
            ("gray".to_string(), pattern(1, 36, 36, 0.0)),
            ("color".to_string(), pattern(3, 36, 36, 0.0)),
        ];
        let protocol = EvalProtocol::new(3, vec![MetricKind::Psnr], EvalChannel::Cb);
        let report = evaluate_images(&SrMethod::Bicubic, &images, &protocol, Exec::Sequential).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.failed.len(), 1);
        assert_eq!(report.failed[0].0, "gray");
    }

    #[test]
    fn zero_network_is_strictly_worse_than_bicubic() {
        let cfg = NetworkConfig::new(1, vec![LayerSpec { f: 3, n: 2 }, LayerSpec { f: 1, n: 1 }])
            .unwrap();
        let banks = vec![
            FilterBank::zeros(2, 1, 3).unwrap(),
            FilterBank::zeros(1, 2, 1).unwrap(),
        ];
        let net = Network::<f32>::from_banks(cfg, banks).unwrap();
        let images = vec![("img".to_string(), pattern(1, 36, 36, 0.0))];
        let protocol = EvalProtocol::new(3, vec![MetricKind::Psnr], EvalChannel::Y);
        let zero = evaluate_images(
            &SrMethod::Network {
                net: &net,
                space: ModelSpace::Luminance,
            },
            &images,
            &protocol,
            Exec::Sequential,
        )
        .unwrap();
        let bicubic =
            evaluate_images(&SrMethod::Bicubic, &images, &protocol, Exec::Sequential).unwrap();
        assert!(
            zero.average(MetricKind::Psnr).unwrap() < bicubic.average(MetricKind::Psnr).unwrap()
        );
    }
}
