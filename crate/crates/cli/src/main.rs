use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crowdflow::metrics::{timing_report, EVAL_CSV_HEADER};
use crowdflow::mvfield::{load_any, load_frame_records};
use crowdflow::pgm::{read_label_map, write_label_map};
use crowdflow::pipeline::labeling_map;
use crowdflow::synth::{generate, SceneSpec};
use crowdflow::{run, Error, EvalRow, PipelineConfig, RunSettings, StageSeconds};

mod report;

#[derive(Parser)]
#[command(
    name = "crowdflow",
    version,
    about = "Crowd flow segmentation from block motion-vector fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment one or more motion fields into flows.
    Segment(SegmentArgs),
    /// Score a predicted label map against ground truth, or a whole dataset directory.
    Eval(EvalArgs),
    /// Render a synthetic scene to a field and ground truth.
    Synth(SynthArgs),
    /// Average FMV1 frame records into an MVF1 mean field.
    Mean(MeanArgs),
}

/// Pipeline parameters shared by `segment` and dataset evaluation.
#[derive(Args, Clone, Default)]
struct PipelineArgs {
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    c3: Option<f64>,
    /// Minimum coarse segment size (exclusive) for a fine label.
    #[arg(long)]
    size_thresh: Option<usize>,
    /// Merge adjacent segments while the boundary gradient (degrees) is below this.
    #[arg(long)]
    merge_thresh: Option<f64>,
    /// TOML file with the same keys; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl PipelineArgs {
    fn as_settings(&self) -> RunSettings {
        RunSettings {
            tau: self.tau,
            c1: self.c1,
            c2: self.c2,
            c3: self.c3,
            size_thresh: self.size_thresh,
            merge_thresh: self.merge_thresh,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct SegmentArgs {
    /// MVF1 or FMV1 input; repeat for batch mode.
    #[arg(long = "in", value_name = "PATH", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Also write coarse.pgm and fine.pgm.
    #[arg(long)]
    dump_intermediates: bool,
    /// Also write per-stage wall-clock seconds to timings.csv.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(
        long,
        value_name = "PGM",
        required_unless_present = "dataset",
        requires = "gt"
    )]
    pred: Option<PathBuf>,
    #[arg(long, value_name = "PGM", requires = "pred")]
    gt: Option<PathBuf>,
    /// Directory of `<name>.mvf` or `<name>.fmv` fields, each with a `<name>.pgm` ground truth.
    #[arg(long, value_name = "DIR", conflicts_with_all = ["pred", "gt"])]
    dataset: Option<PathBuf>,
    /// Append a row per sequence, writing the header first if the file is new.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Sequence name for the CSV row.
    #[arg(long, default_value = "sequence")]
    sequence: String,
    /// Total pipeline seconds for the CSV row.
    #[arg(long, value_name = "SECONDS")]
    time_total: Option<f64>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene description (TOML).
    #[arg(long, value_name = "PATH")]
    spec: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Overrides the seed in the scene file.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML run configuration; only `seed` is used.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct MeanArgs {
    #[arg(long = "in", value_name = "FMV1")]
    input: PathBuf,
    #[arg(long, value_name = "MVF1")]
    out: PathBuf,
}

/// Exit 2 for bad input or usage, 1 for failures while running.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn input_err(e: Error) -> Failure {
    if e.is_input_error() {
        Failure::Usage(e.to_string())
    } else {
        Failure::Runtime(e.to_string())
    }
}

fn runtime_err(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn settings(args: &PipelineArgs, extra: RunSettings) -> CliResult<RunSettings> {
    let file = match &args.config {
        Some(p) => RunSettings::load(p).map_err(input_err)?,
        None => RunSettings::default(),
    };
    Ok(file.overridden_by(&args.as_settings().overridden_by(&extra)))
}

fn segment_one(
    input: &Path,
    out: &Path,
    cfg: &PipelineConfig,
    dump: bool,
    timings: bool,
) -> CliResult<StageSeconds> {
    let field = load_any(input).map_err(input_err)?;
    let result = run(&field, cfg).map_err(runtime_err)?;
    fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    write_label_map(out.join("labels.pgm"), &result.label_map()).map_err(runtime_err)?;
    write(&out.join("flows.csv"), &result.flows_csv())?;
    write(
        &out.join("report.txt"),
        &report::render(input, &field, cfg, &result),
    )?;
    if dump {
        write_label_map(
            out.join("coarse.pgm"),
            &labeling_map(result.coarse.labeling()),
        )
        .map_err(runtime_err)?;
        if let Some(fine) = &result.fine {
            write_label_map(out.join("fine.pgm"), &labeling_map(fine.labeling()))
                .map_err(runtime_err)?;
        }
    }
    if timings {
        let name = sequence_name(input);
        write(
            &out.join("timings.csv"),
            &timing_report([(name.as_str(), result.timings)]).to_csv(),
        )?;
    }
    Ok(result.timings)
}

fn sequence_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn cmd_segment(args: SegmentArgs) -> CliResult<()> {
    let extra = RunSettings {
        dump_intermediates: args.dump_intermediates.then_some(true),
        timings: args.timings.then_some(true),
        ..Default::default()
    };
    let s = settings(&args.pipeline, extra)?;
    let cfg = s.pipeline().map_err(input_err)?;
    let dump = s.dump_intermediates.unwrap_or(false);
    let timings = s.timings.unwrap_or(false);

    if let [input] = args.inputs.as_slice() {
        let t = segment_one(input, &args.out, &cfg, dump, timings)?;
        eprint!(
            "{}",
            timing_report([(sequence_name(input).as_str(), t)]).to_text()
        );
        return Ok(());
    }

    // batch: one subdirectory per input, named by file stem
    let names: Vec<String> = args.inputs.iter().map(|p| sequence_name(p)).collect();
    if names.iter().collect::<BTreeSet<_>>().len() != names.len() {
        return Err(Failure::Usage(
            "batch inputs must have distinct file names".into(),
        ));
    }
    let results: Vec<CliResult<StageSeconds>> = args
        .inputs
        .par_iter()
        .zip(&names)
        .map(|(input, name)| segment_one(input, &args.out.join(name), &cfg, dump, timings))
        .collect();

    let mut rows = Vec::new();
    let mut failed = 0;
    let mut code = 0;
    for ((name, input), r) in names.iter().zip(&args.inputs).zip(results) {
        match r {
            Ok(t) => rows.push((name.as_str(), t)),
            Err(f) => {
                eprintln!("error: {}: {}", input.display(), f.message());
                failed += 1;
                code = code.max(f.code());
            }
        }
    }
    let table = timing_report(rows);
    eprint!("{}", table.to_text());
    if timings {
        write(&args.out.join("timings.csv"), &table.to_csv())?;
    }
    let summary = format!("{failed} of {} sequences failed", names.len());
    match code {
        0 => Ok(()),
        2 => Err(Failure::Usage(summary)),
        _ => Err(Failure::Runtime(summary)),
    }
}

fn append_csv(path: &Path, rows: &[EvalRow]) -> CliResult<()> {
    use std::io::Write as _;
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    let mut text = String::new();
    if fresh {
        text.push_str(EVAL_CSV_HEADER);
        text.push('\n');
    }
    for row in rows {
        text.push_str(&row.to_csv_line());
        text.push('\n');
    }
    file.write_all(text.as_bytes())
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Fields in `dir` paired with their ground truth, sorted by name.
fn dataset_entries(dir: &Path) -> CliResult<Vec<(String, PathBuf, PathBuf)>> {
    let listing =
        fs::read_dir(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    let mut entries = Vec::new();
    for entry in listing {
        let path = entry.map_err(runtime_err)?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if ext != "mvf" && ext != "fmv" {
            continue;
        }
        let gt = path.with_extension("pgm");
        if !gt.exists() {
            return Err(Failure::Usage(format!(
                "{}: no ground truth {}",
                path.display(),
                gt.display()
            )));
        }
        entries.push((sequence_name(&path), path, gt));
    }
    entries.sort();
    if entries.is_empty() {
        return Err(Failure::Usage(format!(
            "{}: no .mvf or .fmv fields",
            dir.display()
        )));
    }
    Ok(entries)
}

fn cmd_eval(args: EvalArgs) -> CliResult<()> {
    let rows = if let Some(dir) = &args.dataset {
        let cfg = settings(&args.pipeline, RunSettings::default())?
            .pipeline()
            .map_err(input_err)?;
        let entries = dataset_entries(dir)?;
        let rows: Vec<CliResult<EvalRow>> = entries
            .par_iter()
            .map(|(name, field, gt)| {
                let field = load_any(field).map_err(input_err)?;
                let gt = read_label_map(gt).map_err(input_err)?;
                let result = run(&field, &cfg).map_err(runtime_err)?;
                EvalRow::evaluate(name, &result.label_map(), &gt, Some(result.timings.total))
                    .map_err(input_err)
            })
            .collect();
        let rows = rows.into_iter().collect::<CliResult<Vec<_>>>()?;
        for row in &rows {
            println!("{} {:.6}", row.sequence, row.jaccard);
        }
        rows
    } else {
        let (pred, gt) = (args.pred.as_ref().unwrap(), args.gt.as_ref().unwrap());
        let pred = read_label_map(pred).map_err(input_err)?;
        let gt = read_label_map(gt).map_err(input_err)?;
        let row =
            EvalRow::evaluate(&args.sequence, &pred, &gt, args.time_total).map_err(input_err)?;
        println!("{:.6}", row.jaccard);
        vec![row]
    };
    if let Some(csv) = &args.csv {
        append_csv(csv, &rows)?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> CliResult<()> {
    let mut spec = SceneSpec::load(&args.spec).map_err(input_err)?;
    let file_seed = match &args.config {
        Some(p) => RunSettings::load(p).map_err(input_err)?.seed,
        None => None,
    };
    if let Some(seed) = args.seed.or(file_seed) {
        spec.seed = seed;
    }
    let (field, gt) = generate(&spec).map_err(input_err)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", args.out.display())))?;
    field
        .save(args.out.join("field.mvf"))
        .map_err(runtime_err)?;
    write_label_map(args.out.join("gt.pgm"), &gt).map_err(runtime_err)?;
    Ok(())
}

fn cmd_mean(args: MeanArgs) -> CliResult<()> {
    let records = load_frame_records(&args.input).map_err(input_err)?;
    let field = records.mean_field().map_err(input_err)?;
    field.save(&args.out).map_err(runtime_err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Segment(a) => cmd_segment(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Mean(a) => cmd_mean(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
