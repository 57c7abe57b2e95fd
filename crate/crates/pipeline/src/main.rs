use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use walkdir::WalkDir;

use clahenet_core::clahe::{clahe, ClaheParams};
use clahenet_core::codec::{decode_image, encode_image, EncodeFormat};
use clahenet_core::histogram::compute_histogram;
use clahenet_core::metrics::{parse_report_csv, write_report, ReportRow};
use clahenet_core::nn::{
    evaluate_classifier, load_params, save_params, tiny_vgg, train_classifier, write_loss_trace,
    Hyperparams, NnError, TrainedModel,
};
use clahenet_pipeline::{
    config::{parse_clip, parse_tiles, ExperimentConfig},
    dataset::{has_image_extension, ingest_directory, split_dataset, Split},
    experiment::{run_experiment, split_samples},
    generate_synthetic_dataset, preprocess_batch, PipelineError, SynthParams,
};

#[derive(Parser)]
#[command(
    name = "clahenet",
    about = "Contrast enhancement and a with/without-CLAHE classification experiment",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

/// Clip argument: a factor or "none"; a newtype so clap does not treat the
/// inner Option as argument optionality.
#[derive(Clone, Copy)]
struct ClipArg(Option<f64>);

#[derive(Subcommand)]
enum Command {
    /// Batch-enhance every image under a directory
    Enhance {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Tile grid, e.g. 8x8
        #[arg(long, default_value = "8x8", value_parser = tiles_arg)]
        tiles: (usize, usize),
        /// Clip factor (multiple of the mean bin count) or "none"
        #[arg(long, default_value = "2.0", value_parser = clip_arg)]
        clip: ClipArg,
        /// Also write each input's histogram as `<output>.hist.csv`
        #[arg(long)]
        dump_histograms: bool,
    },
    /// Generate a synthetic two-class dataset
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        /// Foreground intensity band width
        #[arg(long, default_value_t = 30.0)]
        gap: f64,
        /// Uniform pixel noise amplitude
        #[arg(long, default_value_t = 4.0)]
        noise: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Train the classifier on a directory-per-class dataset
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        clahe: OnOff,
        #[arg(long, default_value = "8x8", value_parser = tiles_arg)]
        tiles: (usize, usize),
        #[arg(long, default_value = "2.0", value_parser = clip_arg)]
        clip: ClipArg,
        /// Train fraction of each class
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 16)]
        batch: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a trained model on a directory-per-class dataset
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Merge metrics CSVs into one report
    Report {
        #[arg(long, required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full two-arm experiment from a config file
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
}

fn tiles_arg(text: &str) -> Result<(usize, usize), String> {
    parse_tiles(text).map_err(|e| e.to_string())
}

fn clip_arg(text: &str) -> Result<ClipArg, String> {
    parse_clip(text).map(ClipArg).map_err(|e| e.to_string())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn run(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Enhance {
            input,
            output,
            tiles,
            clip,
            dump_histograms,
        } => enhance_directory(&input, &output, tiles, clip.0, dump_histograms),
        Command::Synth {
            out,
            per_class,
            size,
            gap,
            noise,
            seed,
        } => {
            let params = SynthParams {
                per_class,
                size,
                contrast_gap: gap,
                noise,
            };
            let manifest = generate_synthetic_dataset(&params, seed)?;
            let written = preprocess_batch(&manifest, None, &out)?;
            println!(
                "wrote {} images under {}",
                written.samples.len(),
                out.display()
            );
            Ok(())
        }
        Command::Train {
            data,
            clahe,
            tiles,
            clip,
            split,
            seed,
            epochs,
            lr,
            batch,
            out,
        } => train_command(TrainArgs {
            data,
            clahe,
            tiles,
            clip: clip.0,
            split,
            seed,
            epochs,
            lr,
            batch,
            out,
        }),
        Command::Eval {
            model,
            data,
            report,
        } => eval_command(&model, &data, &report),
        Command::Report { inputs, out } => merge_reports(&inputs, &out),
        Command::Experiment { config } => {
            let config = ExperimentConfig::load(&config)?;
            let outcome = run_experiment(&config)?;
            for row in &outcome.rows {
                println!(
                    "{}: accuracy {:.6}, f1 {:.6}",
                    row.name, row.metrics.accuracy, row.metrics.f1
                );
            }
            println!("report: {}", outcome.report_csv.display());
            Ok(())
        }
    }
}

fn enhance_directory(
    input: &Path,
    output: &Path,
    tiles: (usize, usize),
    clip: Option<f64>,
    dump_histograms: bool,
) -> Result<(), PipelineError> {
    let params = ClaheParams::new(tiles.0, tiles.1, clip)
        .map_err(|e| PipelineError::Usage(e.to_string()))?;
    let images: Vec<PathBuf> = WalkDir::new(input)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|entry| entry.ok())
        .filter(|entry| entry.file_type().is_file() && has_image_extension(entry.path()))
        .map(|entry| entry.into_path())
        .collect();
    if images.is_empty() {
        return Err(PipelineError::Data(format!(
            "no decodable images under {}",
            input.display()
        )));
    }
    images.par_iter().try_for_each(|path| {
        let relative = path.strip_prefix(input).expect("walked under input");
        let mut dest = output.join(relative);
        if dest
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("ppm"))
        {
            dest.set_extension("pgm");
        }
        if let Some(parent) = dest.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| PipelineError::Data(format!("{}: {e}", parent.display())))?;
        }
        let bytes = std::fs::read(path)
            .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
        let raster = decode_image(&bytes, None)
            .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?
            .into_luma();
        if dump_histograms {
            let hist = compute_histogram(&raster, None).map_err(PipelineError::data)?;
            let mut csv = String::from("bin,count\n");
            for (bin, count) in hist.bins().iter().enumerate() {
                csv.push_str(&format!("{bin},{count}\n"));
            }
            let hist_path = dest.with_extension("hist.csv");
            std::fs::write(&hist_path, csv)
                .map_err(|e| PipelineError::Data(format!("{}: {e}", hist_path.display())))?;
        }
        let enhanced = clahe(&raster, &params).map_err(PipelineError::data)?;
        let format = match dest.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("png") => EncodeFormat::Png,
            _ => EncodeFormat::Pgm,
        };
        let encoded = encode_image(&enhanced, format).map_err(PipelineError::data)?;
        std::fs::write(&dest, encoded)
            .map_err(|e| PipelineError::Data(format!("{}: {e}", dest.display())))
    })?;
    println!("enhanced {} images into {}", images.len(), output.display());
    Ok(())
}

struct TrainArgs {
    data: PathBuf,
    clahe: OnOff,
    tiles: (usize, usize),
    clip: Option<f64>,
    split: f64,
    seed: u64,
    epochs: usize,
    lr: f64,
    batch: usize,
    out: PathBuf,
}

fn train_command(args: TrainArgs) -> Result<(), PipelineError> {
    std::fs::create_dir_all(&args.out)
        .map_err(|e| PipelineError::Data(format!("{}: {e}", args.out.display())))?;
    let manifest = ingest_directory(&args.data)?;
    let manifest = split_dataset(manifest, args.split, args.seed)?;
    let (arm_name, manifest) = match args.clahe {
        OnOff::On => {
            let params = ClaheParams::new(args.tiles.0, args.tiles.1, args.clip)
                .map_err(|e| PipelineError::Usage(e.to_string()))?;
            (
                "clahe",
                preprocess_batch(&manifest, Some(&params), &args.out.join("enhanced"))?,
            )
        }
        OnOff::Off => ("no_clahe", manifest),
    };

    let spec = tiny_vgg(args.seed);
    let train_set = split_samples(&manifest, Split::Train, spec.input_shape)?;
    let eval_set = split_samples(&manifest, Split::Eval, spec.input_shape)?;
    let hyper = Hyperparams {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch,
        seed: args.seed,
    };
    let (model, trace) = train_classifier(&spec, &train_set, &hyper).map_err(|e| match e {
        NnError::Diverged { epoch } => PipelineError::Divergence {
            arm: arm_name.to_string(),
            epoch,
        },
        other => PipelineError::data(other),
    })?;

    save_params(&spec, &model.params, &args.out.join("model.params"))
        .map_err(PipelineError::data)?;
    write_loss_trace(&args.out.join("loss.csv"), &trace).map_err(PipelineError::data)?;

    let (_, confusion) = evaluate_classifier(&model, &eval_set).map_err(PipelineError::data)?;
    let row = ReportRow::from_confusion(arm_name, confusion).map_err(PipelineError::data)?;
    write_report(
        std::slice::from_ref(&row),
        &args.out.join("eval_report.csv"),
        &args.out.join("eval_report.json"),
    )
    .map_err(PipelineError::data)?;
    println!(
        "{arm_name}: accuracy {:.6}, f1 {:.6} on {} held-out samples",
        row.metrics.accuracy,
        row.metrics.f1,
        row.confusion.total()
    );
    println!("model: {}", args.out.join("model.params").display());
    Ok(())
}

fn eval_command(model_path: &Path, data: &Path, report: &Path) -> Result<(), PipelineError> {
    let spec = tiny_vgg(0);
    let params = load_params(&spec, model_path).map_err(PipelineError::data)?;
    let model = TrainedModel { spec, params };

    let mut manifest = ingest_directory(data)?;
    for sample in &mut manifest.samples {
        sample.split = Some(Split::Eval);
    }
    let eval_set = split_samples(&manifest, Split::Eval, model.spec.input_shape)?;
    let (_, confusion) = evaluate_classifier(&model, &eval_set).map_err(PipelineError::data)?;
    let row = ReportRow::from_confusion("eval", confusion).map_err(PipelineError::data)?;
    write_report(
        std::slice::from_ref(&row),
        report,
        &report.with_extension("json"),
    )
    .map_err(PipelineError::data)?;
    println!(
        "eval: accuracy {:.6}, f1 {:.6} on {} samples",
        row.metrics.accuracy,
        row.metrics.f1,
        row.confusion.total()
    );
    Ok(())
}

fn merge_reports(inputs: &[PathBuf], out: &Path) -> Result<(), PipelineError> {
    let mut rows = Vec::new();
    for path in inputs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
        rows.extend(
            parse_report_csv(&text)
                .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?,
        );
    }
    write_report(&rows, out, &out.with_extension("json")).map_err(PipelineError::data)?;
    println!("merged {} rows into {}", rows.len(), out.display());
    Ok(())
}
