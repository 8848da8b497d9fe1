use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use roomlay_core::diffnet::GradCheckOptions;
use roomlay_core::harness::{
    check_pipeline_gradients, eval_ie, eval_le, ie_checkpoint, load_ie, load_sr, sr_checkpoint,
    train_ie_from, train_sr_from, Checkpoint, DType, Prepared, TrainConfig, TrainingLog,
};
use roomlay_core::implicit::{CodeRegressor, ImplicitModel, ModelConfig};
use roomlay_core::layout::io::{decode_pgm, read_layout, write_grid, write_layout};
use roomlay_core::layout::{rasterize, threshold, FitPolicy};
use roomlay_core::panorama::{
    boundary_map_file_name, decode_boundary_map, render_boundaries, write_boundary_map,
};
use roomlay_core::roomgen::{
    augment, build_dataset, mix_seed, Dataset, DatasetParams, SizeRange, Split,
};

#[derive(Parser)]
#[command(
    name = "roomlay",
    version,
    about = "Room-layout implicit encoding toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate anchor rooms (and augmented variants) into a dataset directory.
    Gen(GenArgs),
    /// Write augmented variants of one layout file.
    Augment(AugmentArgs),
    /// Rasterize every layout of a dataset into `<id>.pgm` grids.
    Rasterize(RasterizeArgs),
    /// Render `<id>.sbm.pgm` boundary maps for every layout of a dataset.
    Panorama(PanoramaArgs),
    /// Train the implicit self-encoder.
    TrainIe(TrainIeArgs),
    /// Evaluate self-encoding IoU.
    EvalIe(EvalIeArgs),
    /// Train the shape-code regressor against a frozen self-encoder.
    TrainSr(TrainSrArgs),
    /// Evaluate end-to-end (regressed code) IoU.
    EvalLe(EvalLeArgs),
    /// Convert a grid or boundary-map PGM to PNG, or render a reconstruction.
    RenderPng(RenderPngArgs),
    /// Finite-difference check of the full training objective.
    GradCheck(GradCheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    All,
    Train,
    Val,
    Test,
}

impl SplitArg {
    fn select(self, dataset: Dataset) -> Dataset {
        match self {
            SplitArg::All => dataset,
            SplitArg::Train => dataset.split(Split::Train),
            SplitArg::Val => dataset.split(Split::Val),
            SplitArg::Test => dataset.split(Split::Test),
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    anchors: usize,
    /// Augmented variants per anchor.
    #[arg(long, default_value_t = 0)]
    augment: usize,
    #[arg(long, default_value_t = SizeRange::default().min)]
    size_min: f64,
    #[arg(long, default_value_t = SizeRange::default().max)]
    size_max: f64,
}

#[derive(Args)]
struct AugmentArgs {
    /// Layout JSON file.
    #[arg(long)]
    data: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
}

#[derive(Args)]
struct RasterizeArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Grid resolution; defaults to the config's (64 without one).
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PanoramaArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Image size and blur come from here (defaults: 128x64, sigma 1.5 px).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainIeArgs {
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint path; the training log goes to `<out>.log.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "train")]
    split: SplitArg,
    /// Start from this checkpoint's parameters instead of a fresh init.
    #[arg(long)]
    init_from: Option<PathBuf>,
    /// Write 32-bit parameters.
    #[arg(long)]
    f32: bool,
}

#[derive(Args)]
struct EvalIeArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    ie: PathBuf,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
}

#[derive(Args)]
struct TrainSrArgs {
    #[arg(long)]
    data: PathBuf,
    /// Frozen self-encoder checkpoint.
    #[arg(long)]
    ie: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to the self-encoder's config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory with `<id>.sbm.pgm` boundary maps; defaults to `--data`.
    #[arg(long)]
    maps: Option<PathBuf>,
    /// Encode every target code once up front instead of per batch.
    #[arg(long)]
    cache_codes: bool,
    #[arg(long, value_enum, default_value = "train")]
    split: SplitArg,
    #[arg(long)]
    init_from: Option<PathBuf>,
    #[arg(long)]
    f32: bool,
}

#[derive(Args)]
struct EvalLeArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    ie: PathBuf,
    #[arg(long)]
    sr: PathBuf,
    #[arg(long)]
    maps: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
}

#[derive(Args)]
struct RenderPngArgs {
    /// A grid `.pgm`, a boundary map `.sbm.pgm`, or (with `--ie`) a layout JSON.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Render ground truth and reconstruction side by side.
    #[arg(long)]
    ie: Option<PathBuf>,
}

#[derive(Args)]
struct GradCheckArgs {
    /// Model architecture; defaults to a tiny one (8 planes, 2 primitives, 8-d code).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    coord_samples: usize,
    /// JSON report path; a summary is always printed.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        None => Ok(TrainConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(TrainConfig::from_json(&text)?)
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn dtype(f32: bool) -> DType {
    if f32 {
        DType::F32
    } else {
        DType::F64
    }
}

fn log_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".log.json");
    PathBuf::from(s)
}

fn emit_report(out: Option<&Path>, json: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, json),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn load_split(data: &Path, split: SplitArg) -> Result<Dataset> {
    let dataset = split.select(Dataset::load(data)?);
    if dataset.is_empty() {
        bail!("no layouts in the selected split of {}", data.display());
    }
    Ok(dataset)
}

fn print_epoch(kind: &str, e: &roomlay_core::harness::EpochLog) {
    eprintln!(
        "{kind} epoch {:>4}  lr {:.3e}  objective {:.6}",
        e.epoch, e.learning_rate, e.objective
    );
}

fn gen(a: GenArgs) -> Result<()> {
    let params = DatasetParams {
        anchors: a.anchors,
        augment_factor: a.augment,
        seed: a.seed,
        size: SizeRange {
            min: a.size_min,
            max: a.size_max,
        },
    };
    let manifest = build_dataset(params, &a.out)?;
    println!(
        "wrote {} layouts to {}",
        manifest.layouts.len(),
        a.out.display()
    );
    Ok(())
}

fn augment_cmd(a: AugmentArgs) -> Result<()> {
    let anchor = read_layout(&a.data)?;
    create_dir(&a.out)?;
    for k in 0..a.count {
        let (mut layout, record) = augment(&anchor, mix_seed(a.seed, k as u64, 0))?;
        layout.id = format!("{}_v{k:04}", anchor.id);
        write_layout(&a.out.join(format!("{}.json", layout.id)), &layout)?;
        println!(
            "{} wall {} offset {:.6}",
            layout.id, record.wall_index, record.offset
        );
    }
    Ok(())
}

fn rasterize_cmd(a: RasterizeArgs) -> Result<()> {
    let resolution = match a.resolution {
        Some(r) => r,
        None => read_config(a.config.as_deref())?.resolution,
    };
    let dataset = Dataset::load(&a.data)?;
    create_dir(&a.out)?;
    for l in &dataset.layouts {
        let grid = rasterize(l, resolution, FitPolicy::default())?;
        write_grid(&a.out.join(format!("{}.pgm", l.id)), &grid)?;
    }
    println!(
        "rasterized {} layouts at {resolution}x{resolution}",
        dataset.len()
    );
    Ok(())
}

fn panorama_cmd(a: PanoramaArgs) -> Result<()> {
    let config = read_config(a.config.as_deref())?;
    let dataset = Dataset::load(&a.data)?;
    create_dir(&a.out)?;
    for l in &dataset.layouts {
        let map = render_boundaries(l, config.image_width, config.image_height, config.sigma_px)?;
        write_boundary_map(&a.out.join(boundary_map_file_name(&l.id)), &map)?;
    }
    println!(
        "rendered {} boundary maps at {}x{}",
        dataset.len(),
        config.image_width,
        config.image_height
    );
    Ok(())
}

fn write_training(out: &Path, ckpt: &Checkpoint, f32: bool, log: &TrainingLog) -> Result<()> {
    ckpt.save(out, dtype(f32))?;
    write_text(&log_path(out), &log.to_json())?;
    println!(
        "checkpoint {} (log {})",
        out.display(),
        log_path(out).display()
    );
    Ok(())
}

fn train_ie_cmd(a: TrainIeArgs) -> Result<()> {
    let mut config = read_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    config.validate()?;
    let data = Prepared::new(&load_split(&a.data, a.split)?, config.resolution)?;
    let model = match &a.init_from {
        Some(p) => load_ie(&Checkpoint::load(p)?)?.0,
        None => ImplicitModel::new(config.model_config(), config.seed)?,
    };
    let (model, log) = train_ie_from(&data, &config, model, |e, _| print_epoch("ie", e))?;
    write_training(&a.out, &ie_checkpoint(&model, &config), a.f32, &log)
}

fn eval_ie_cmd(a: EvalIeArgs) -> Result<()> {
    let (model, config) = load_ie(&Checkpoint::load(&a.ie)?)?;
    let data = Prepared::new(&load_split(&a.data, a.split)?, config.resolution)?;
    let report = eval_ie(&model, &data, &config.hash())?;
    eprintln!(
        "mean IoU-IE {:.4} over {} layouts",
        report.mean_iou_ie,
        report.samples.len()
    );
    emit_report(a.out.as_deref(), &report.to_json())
}

fn train_sr_cmd(a: TrainSrArgs) -> Result<()> {
    let (ie, ie_config) = load_ie(&Checkpoint::load(&a.ie)?)?;
    let mut config = match &a.config {
        Some(_) => read_config(a.config.as_deref())?,
        None => ie_config.clone(),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    config.validate()?;
    let data = Prepared::new(&load_split(&a.data, a.split)?, ie_config.resolution)?;
    let inputs = data.load_regressor_inputs(&config, a.maps.as_deref().unwrap_or(&a.data))?;
    let reg = match &a.init_from {
        Some(p) => load_sr(&Checkpoint::load(p)?)?.0,
        None => CodeRegressor::new(config.regressor_config(), config.seed)?,
    };
    let (reg, log) = train_sr_from(&data, &inputs, &ie, &config, a.cache_codes, reg, |e, _| {
        print_epoch("sr", e)
    })?;
    write_training(&a.out, &sr_checkpoint(&reg, &config), a.f32, &log)
}

fn eval_le_cmd(a: EvalLeArgs) -> Result<()> {
    let (ie, ie_config) = load_ie(&Checkpoint::load(&a.ie)?)?;
    let (reg, sr_config) = load_sr(&Checkpoint::load(&a.sr)?)?;
    let data = Prepared::new(&load_split(&a.data, a.split)?, ie_config.resolution)?;
    let inputs = data.load_regressor_inputs(&sr_config, a.maps.as_deref().unwrap_or(&a.data))?;
    let report = eval_le(&reg, &ie, &data, &inputs, &sr_config.hash())?;
    eprintln!(
        "mean IoU-IE {:.4}, IoU-LE {:.4} over {} layouts",
        report.mean_iou_ie,
        report.mean_iou_le.unwrap_or(f64::NAN),
        report.samples.len()
    );
    emit_report(a.out.as_deref(), &report.to_json())
}

fn write_png(
    path: &Path,
    width: usize,
    height: usize,
    color: png::ColorType,
    pixels: &[u8],
) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header()?;
    w.write_image_data(pixels)?;
    w.finish()?;
    Ok(())
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn render_png_cmd(a: RenderPngArgs) -> Result<()> {
    let name = a
        .data
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    if let Some(ckpt) = &a.ie {
        let (model, config) = load_ie(&Checkpoint::load(ckpt)?)?;
        let layout = read_layout(&a.data)?;
        let grid = rasterize(&layout, config.resolution, FitPolicy::default())?;
        let code = model.encode(&[&grid])?;
        let pred = threshold(&model.reconstruct(&code)?[0]);
        let r = config.resolution;
        let mut pixels = Vec::with_capacity(2 * r * r);
        for row in 0..r {
            pixels.extend(
                grid.values()[row * r..(row + 1) * r]
                    .iter()
                    .map(|&v| v * 255),
            );
            pixels.extend(pred[row * r..(row + 1) * r].iter().map(|&v| v * 255));
        }
        return write_png(&a.out, 2 * r, r, png::ColorType::Grayscale, &pixels);
    }
    let bytes = fs::read(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    if name.ends_with(".sbm.pgm") {
        let map = decode_boundary_map(&bytes)?;
        let n = map.width * map.height;
        let pixels: Vec<u8> = (0..n)
            .flat_map(|i| (0..3).map(move |c| (c, i)))
            .map(|(c, i)| to_byte(map.data[c * n + i]))
            .collect();
        write_png(&a.out, map.width, map.height, png::ColorType::Rgb, &pixels)
    } else if name.ends_with(".pgm") {
        let img = decode_pgm(&bytes)?;
        write_png(
            &a.out,
            img.width,
            img.height,
            png::ColorType::Grayscale,
            &img.pixels,
        )
    } else {
        bail!(
            "{}: expected a .pgm or .sbm.pgm file (or a layout with --ie)",
            a.data.display()
        )
    }
}

fn grad_check_cmd(a: GradCheckArgs) -> Result<()> {
    let model = match &a.config {
        Some(_) => read_config(a.config.as_deref())?.model_config(),
        None => ModelConfig::tiny(),
    };
    let report = check_pipeline_gradients(
        &model,
        a.seed,
        a.coord_samples,
        &GradCheckOptions::default(),
    )?;
    for p in &report.params {
        println!(
            "{:<24} checked {:>6}  excluded {:>5}  max rel error {:.3e}",
            p.name, p.checked, p.excluded, p.max_rel_error
        );
    }
    println!(
        "overall max rel error {:.3e}: {}",
        report.max_rel_error,
        if report.passed { "ok" } else { "FAILED" }
    );
    if let Some(out) = &a.out {
        write_text(out, &serde_json::to_string_pretty(&report)?)?;
    }
    if !report.passed {
        bail!("gradient check failed");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Augment(a) => augment_cmd(a),
        Command::Rasterize(a) => rasterize_cmd(a),
        Command::Panorama(a) => panorama_cmd(a),
        Command::TrainIe(a) => train_ie_cmd(a),
        Command::EvalIe(a) => eval_ie_cmd(a),
        Command::TrainSr(a) => train_sr_cmd(a),
        Command::EvalLe(a) => eval_le_cmd(a),
        Command::RenderPng(a) => render_png_cmd(a),
        Command::GradCheck(a) => grad_check_cmd(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
