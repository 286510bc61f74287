//! `srlab` command-line interface: dataset preparation, training, inference,
//! evaluation, filter export, and convergence-curve rendering.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O error.

mod archive;
mod config;
mod curve;

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use srlab::eval::{
    evaluate_dataset, super_resolve, EvalChannel, EvalProtocol, MetricKind, ModelSpace, SrMethod,
};
use srlab::image_io::{load_image, luminance, rgb_to_ycbcr, save_image, to_float, to_u8};
use srlab::model::{export_filters, load_checkpoint, LayerSpec, Network, NetworkConfig};
use srlab::resample::{resize_bicubic, ResizeSpec};
use srlab::train::{
    extract_subimages, run_strategy, train_loop, TrainOptions, TrainState, Validation,
};
use srlab::{Error, Exec, Result, Tensor};

#[derive(Parser)]
#[command(name = "srlab", version, about = "Single-image super-resolution laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a training-sample archive from a directory of HR images.
    Prepare {
        /// Directory of ground-truth images (png/ppm/pgm).
        #[arg(long)]
        hr_dir: PathBuf,
        /// Upscaling factor.
        #[arg(long, default_value_t = 3)]
        scale: usize,
        /// Sub-image size (must be divisible by the scale).
        #[arg(long, default_value_t = 33)]
        fsub: usize,
        /// Grid stride between crops.
        #[arg(long, default_value_t = 14)]
        stride: usize,
        /// Degradation: 'bicubic' or 'gaussian:SIGMA'.
        #[arg(long, default_value = "bicubic")]
        mode: String,
        /// Sample color space: y, ycbcr, or rgb.
        #[arg(long, default_value = "y")]
        space: String,
        /// Stored target size; defaults to the full sub-image so one archive
        /// serves any architecture (training crops to the network output).
        #[arg(long)]
        target_size: Option<usize>,
        /// Output archive path (a .manifest file is written alongside).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a network on a sample archive.
    Train {
        /// Sample archive from `prepare`.
        #[arg(long)]
        data: PathBuf,
        /// key = value run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// CSV convergence log (appended to on resume).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Resume from an existing checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Super-resolve one image with a trained model.
    Sr {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Bicubic pre-upscaling factor applied to all channels first; use 1
        /// if the input is already interpolated to the target size.
        #[arg(long, default_value_t = 1)]
        scale: usize,
        /// Channel mapping for 3-channel models: ycbcr or rgb.
        #[arg(long)]
        model_space: Option<String>,
    },
    /// Score a method against a directory of ground-truth images.
    Eval {
        /// 'bicubic' or 'network'.
        #[arg(long)]
        method: String,
        /// Checkpoint (required when method = network).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        test_dir: PathBuf,
        #[arg(long, default_value_t = 3)]
        scale: usize,
        /// Comma-separated subset of psnr,ssim,msssim.
        #[arg(long, default_value = "psnr,ssim")]
        metrics: String,
        /// Evaluation channel: y, cb, cr, or rgb.
        #[arg(long, default_value = "y")]
        channel: String,
        /// Border shave in pixels; defaults to the scale factor.
        #[arg(long)]
        shave: Option<usize>,
        /// Channel mapping for 3-channel models: ycbcr or rgb.
        #[arg(long)]
        model_space: Option<String>,
        /// Quantize the SR output to 8 bits before scoring.
        #[arg(long)]
        quantize: bool,
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Export a layer's filters as a tiled image.
    Filters {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        layer: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render convergence curves from training logs as SVG.
    Curve {
        /// Training log CSV; repeat for several curves.
        #[arg(long, required = true)]
        log: Vec<PathBuf>,
        /// Horizontal reference line, formatted NAME=VALUE; repeatable.
        #[arg(long)]
        baseline: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        Error::Shape(_) | Error::Format(_) | Error::Data(_) => 2,
        Error::Io(_) => 3,
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli.command) {
        eprintln!("error: {}", e);
        std::process::exit(exit_code(&e));
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Prepare {
            hr_dir,
            scale,
            fsub,
            stride,
            mode,
            space,
            target_size,
            out,
        } => cmd_prepare(&hr_dir, scale, fsub, stride, &mode, &space, target_size, &out),
        Command::Train {
            data,
            config,
            out,
            log,
            resume,
        } => cmd_train(&data, &config, &out, log.as_deref(), resume.as_deref()),
        Command::Sr {
            model,
            input,
            output,
            scale,
            model_space,
        } => cmd_sr(&model, &input, &output, scale, model_space.as_deref()),
        Command::Eval {
            method,
            model,
            test_dir,
            scale,
            metrics,
            channel,
            shave,
            model_space,
            quantize,
            csv,
        } => cmd_eval(
            &method,
            model.as_deref(),
            &test_dir,
            scale,
            &metrics,
            &channel,
            shave,
            model_space.as_deref(),
            quantize,
            csv.as_deref(),
        ),
        Command::Filters { model, layer, out } => {
            let ck = load_checkpoint(&model)?;
            export_filters(&ck.network, layer, &out)
        }
        Command::Curve { log, baseline, out } => cmd_curve(&log, &baseline, &out),
    }
}

/// Sorted image files (png/ppm/pgm) of a directory.
fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|x| x.to_str()).map(str::to_ascii_lowercase).as_deref(),
                Some("png") | Some("ppm") | Some("pgm")
            )
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Data(format!(
            "no images (png/ppm/pgm) in {}",
            dir.display()
        )));
    }
    Ok(files)
}

fn load_named_images(dir: &Path) -> Result<Vec<(String, Tensor<f32>)>> {
    list_images(dir)?
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            Ok((name, to_float::<f32>(&load_image(&p)?)))
        })
        .collect()
}

fn parse_space(space: &str) -> Result<ModelSpace> {
    space.parse()
}

/// The model space for a loaded network: single-channel models are always
/// luminance, three-channel models need an explicit choice.
fn resolve_model_space(net: &Network<f32>, flag: Option<&str>) -> Result<ModelSpace> {
    if net.config().channels() == 1 {
        return Ok(ModelSpace::Luminance);
    }
    match flag {
        Some(s) => parse_space(s),
        None => Err(Error::Config(
            "3-channel models need --model-space ycbcr|rgb".into(),
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_prepare(
    hr_dir: &Path,
    scale: usize,
    fsub: usize,
    stride: usize,
    mode: &str,
    space: &str,
    target_size: Option<usize>,
    out: &Path,
) -> Result<()> {
    let mode = config::parse_degrade_mode(mode)?;
    let space = parse_space(space)?;
    let target = target_size.unwrap_or(fsub);
    if target > fsub || (fsub - target) % 2 != 0 {
        return Err(Error::Config(format!(
            "target size {} must be <= {} and differ by an even margin",
            target, fsub
        )));
    }
    if fsub % scale != 0 {
        return Err(Error::Config(format!(
            "sub-image size {} must be divisible by scale {}",
            fsub, scale
        )));
    }
    let channels = space.image_channels();
    // A single pass-through layer spec with the right shrink lets the
    // library extractor produce targets of the requested size.
    let pseudo = NetworkConfig::new(
        channels,
        vec![LayerSpec {
            f: fsub - target + 1,
            n: channels,
        }],
    )?;
    let mut cfg = srlab::train::TrainConfig::defaults(scale, 1);
    cfg.f_sub = fsub;
    cfg.stride = stride;
    cfg.degrade_mode = mode;
    cfg.channel_weights = vec![1.0; channels];
    cfg.lr_per_layer = vec![0.0];

    let files = list_images(hr_dir)?;
    let mut samples = Vec::new();
    let mut manifest = String::from("image,samples\n");
    for path in &files {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let img = to_float::<f32>(&load_image(path)?);
        let converted = match (space, img.channels()) {
            (ModelSpace::Luminance, _) => luminance(&img)?,
            (ModelSpace::YCbCr, 3) => rgb_to_ycbcr(&img)?,
            (ModelSpace::Rgb, 3) => img,
            _ => {
                log::warn!("skipping {}: not a 3-channel image", name);
                manifest.push_str(&format!("{},0\n", name));
                continue;
            }
        };
        let new = extract_subimages(&[converted], &cfg, &pseudo)?;
        manifest.push_str(&format!("{},{}\n", name, new.len()));
        samples.extend(new);
    }
    archive::write_archive(out, &samples)?;
    std::fs::write(manifest_path(out), manifest)?;
    println!(
        "wrote {} samples ({} channel(s), {}x{} -> {}x{}) to {}",
        samples.len(),
        channels,
        fsub,
        fsub,
        target,
        target,
        out.display()
    );
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest");
    out.with_file_name(name)
}

fn cmd_train(
    data: &Path,
    config_path: &Path,
    out: &Path,
    log: Option<&Path>,
    resume: Option<&Path>,
) -> Result<()> {
    let cfg = config::load_run_config(config_path)?;
    let arch = archive::read_archive(data)?;
    if arch.channels != cfg.network.channels() {
        return Err(Error::Config(format!(
            "archive has {} channel(s), network expects {}",
            arch.channels,
            cfg.network.channels()
        )));
    }
    if cfg.f_sub_set && cfg.train.f_sub != arch.f_sub {
        return Err(Error::Config(format!(
            "config fsub {} does not match archive sub-image size {}",
            cfg.train.f_sub, arch.f_sub
        )));
    }
    let mut train_cfg = cfg.train.clone();
    train_cfg.f_sub = arch.f_sub;

    let out_size = arch
        .f_sub
        .checked_sub(cfg.network.total_shrink())
        .filter(|&v| v > 0)
        .ok_or_else(|| {
            Error::Config(format!(
                "sub-image size {} too small for network shrink {}",
                arch.f_sub,
                cfg.network.total_shrink()
            ))
        })?;
    if arch.out_size < out_size || (arch.out_size - out_size) % 2 != 0 {
        return Err(Error::Config(format!(
            "archive target size {} cannot be center-cropped to {}",
            arch.out_size, out_size
        )));
    }
    let margin = (arch.out_size - out_size) / 2;
    let mut samples = arch.samples;
    if margin > 0 {
        for s in &mut samples {
            s.target = s.target.crop_border(margin)?;
        }
    }

    let val_images = cfg.val_dir.as_deref().map(load_named_images).transpose()?;
    let validation = val_images.as_ref().map(|images| Validation {
        images,
        space: cfg.model_space,
    });

    let mut state = match resume {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            if ck.network.config() != &cfg.network {
                return Err(Error::Config(format!(
                    "checkpoint is a {} network, config wants {}",
                    ck.network.config().notation(),
                    cfg.network.notation()
                )));
            }
            TrainState::from_checkpoint(ck)
        }
        None => TrainState::new(Network::init(cfg.network.clone(), train_cfg.seed)),
    };

    let opts = TrainOptions {
        log_path: log,
        checkpoint_path: Some(out),
        checkpoint_every: cfg.checkpoint_every,
    };
    let rows = match cfg.strategy {
        Some(strategy) => run_strategy(
            strategy,
            &mut state,
            &samples,
            validation.as_ref(),
            &train_cfg,
            &opts,
        )?,
        None => train_loop(&mut state, &samples, validation.as_ref(), &train_cfg, &opts)?,
    };
    if let Some(last) = rows.last() {
        println!(
            "trained to {} backprops (epoch {}), final window loss {:.6e}{}",
            last.backprops,
            last.epoch,
            last.train_loss,
            last.val_psnr
                .map(|v| format!(", val PSNR {:.4} dB", v))
                .unwrap_or_default()
        );
    }
    Ok(())
}

fn cmd_sr(
    model: &Path,
    input: &Path,
    output: &Path,
    scale: usize,
    model_space: Option<&str>,
) -> Result<()> {
    if scale == 0 {
        return Err(Error::Config("scale must be >= 1".into()));
    }
    let ck = load_checkpoint(model)?;
    let space = resolve_model_space(&ck.network, model_space)?;
    let img = to_float::<f32>(&load_image(input)?);
    let upscaled = if scale > 1 {
        resize_bicubic(&img, &ResizeSpec::new(scale as f64, false)?)?
    } else {
        img
    };
    let method = SrMethod::Network {
        net: &ck.network,
        space,
    };
    let sr = super_resolve(&method, &upscaled, Exec::default())?;
    save_image(output, &to_u8(&sr)?)?;
    println!(
        "super-resolved {} -> {} ({}x{})",
        input.display(),
        output.display(),
        sr.height(),
        sr.width()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    method: &str,
    model: Option<&Path>,
    test_dir: &Path,
    scale: usize,
    metrics: &str,
    channel: &str,
    shave: Option<usize>,
    model_space: Option<&str>,
    quantize: bool,
    csv: Option<&Path>,
) -> Result<()> {
    let metrics: Vec<MetricKind> = metrics
        .split(',')
        .map(|m| m.trim().parse())
        .collect::<Result<_>>()?;
    let channel: EvalChannel = channel.parse()?;
    let mut protocol = EvalProtocol::new(scale, metrics, channel);
    if let Some(s) = shave {
        protocol.shave = s;
    }
    protocol.quantize = quantize;

    let network;
    let sr_method = match method {
        "bicubic" => SrMethod::Bicubic,
        "network" => {
            let path = model.ok_or_else(|| {
                Error::Config("--model is required when --method network".into())
            })?;
            network = load_checkpoint(path)?.network;
            let space = resolve_model_space(&network, model_space)?;
            SrMethod::Network {
                net: &network,
                space,
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown method '{}' (expected bicubic or network)",
                other
            )))
        }
    };
    let report = evaluate_dataset(&sr_method, test_dir, &protocol)?;
    print!("{}", report.table());
    if let Some(path) = csv {
        std::fs::write(path, report.csv())?;
    }
    Ok(())
}

fn cmd_curve(logs: &[PathBuf], baselines: &[String], out: &Path) -> Result<()> {
    let mut series = Vec::new();
    for path in logs {
        let text = std::fs::read_to_string(path)?;
        let points = curve::parse_log(&text)?;
        if points.is_empty() {
            return Err(Error::Data(format!(
                "{}: no plottable validation rows",
                path.display()
            )));
        }
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        series.push(curve::Series { label, points });
    }
    let baselines: Vec<(String, f64)> = baselines
        .iter()
        .map(|b| {
            let (name, value) = b.split_once('=').ok_or_else(|| {
                Error::Config(format!("baseline '{}' must be NAME=VALUE", b))
            })?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad baseline value in '{}'", b)))?;
            Ok((name.trim().to_string(), value))
        })
        .collect::<Result<_>>()?;
    let svg = curve::render_svg(&series, &baselines)?;
    std::fs::write(out, svg)?;
    println!("wrote {}", out.display());
    Ok(())
}
