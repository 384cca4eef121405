use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ivl_core::amr::io as dsio;
use ivl_core::bench::{self, SweepConfig};
use ivl_core::pipeline::ColorMode;
use ivl_core::study::{self, TfFamily};
use ivl_core::synth::{self, SynthKind, SynthSpec};
use ivl_core::transfer::{tfs_in_field_order, DEFAULT_ENTRIES};
use ivl_core::{run_pipeline, Dataset, ExecMode, PipelineParams, PlotMode, TransferFunction};

#[derive(Parser)]
#[command(name = "ivl", version, about = "Volume-line plots for multi-field AMR data")]
struct Cli {
    /// Worker threads for parallel stages (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic AMR dataset.
    Generate(GenerateArgs),
    /// Render a volume-line plot to PPM or SVG.
    Plot(PlotArgs),
    /// Sweep the exponent and minimum importance, reporting stage timings as CSV.
    Bench(BenchArgs),
    /// Compare exact and table-space maximum alpha spread over random transfer functions.
    VaCompare(VaArgs),
    /// Convert between IVLA, JSON and raw structured volumes.
    Convert(ConvertArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// nested-levels, noise or gradient.
    #[arg(long, default_value = "nested-levels")]
    kind: SynthKind,
    /// Grid edge length in finest cells.
    #[arg(long, default_value_t = 64, conflicts_with = "cells")]
    size: u32,
    /// Pick the size whose cell count is closest to this instead.
    #[arg(long)]
    cells: Option<u64>,
    #[arg(long, default_value_t = 4)]
    levels: u8,
    #[arg(long, default_value_t = 4)]
    fields: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; `.json` writes the JSON variant, anything else IVLA.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Polyline,
    Bars,
}

#[derive(Clone, Copy, ValueEnum)]
enum ColorArg {
    Tf,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExecArg {
    Sequential,
    Parallel,
}

impl From<ExecArg> for ExecMode {
    fn from(e: ExecArg) -> Self {
        match e {
            ExecArg::Sequential => ExecMode::Sequential,
            ExecArg::Parallel => ExecMode::Parallel,
        }
    }
}

#[derive(Args)]
struct TfArgs {
    /// Transfer-function JSON file (one object or an array); repeatable.
    /// Fields without one get an alpha ramp.
    #[arg(long = "tf")]
    tfs: Vec<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    tf: TfArgs,
    #[arg(long, default_value_t = 1.0)]
    exponent: f64,
    #[arg(long, default_value_t = 0.025)]
    min_importance: f64,
    #[arg(long, default_value_t = 1024)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(long, value_enum, default_value = "polyline")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "tf")]
    color: ColorArg,
    #[arg(long, value_enum, default_value = "sequential")]
    exec: ExecArg,
    /// `.svg` writes SVG, anything else binary PPM.
    #[arg(long)]
    out: PathBuf,
    /// Also write the per-field plot series as JSON.
    #[arg(long)]
    series: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    tf: TfArgs,
    /// Exponent sweep `lo:hi:step`.
    #[arg(long, default_value = "0:5:0.5")]
    exponent_sweep: String,
    /// Minimum-importance sweep `lo:hi:step`.
    #[arg(long, default_value = "0:0.25:0.025")]
    min_importance_sweep: String,
    /// Exponent held fixed during the minimum-importance sweep.
    #[arg(long, default_value_t = 1.0)]
    exponent: f64,
    /// Minimum importance held fixed during the exponent sweep.
    #[arg(long, default_value_t = 0.025)]
    min_importance: f64,
    #[arg(long, default_value_t = 1024)]
    width: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, value_enum, default_value = "parallel")]
    exec: ExecArg,
    /// CSV destination (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VaArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = study::DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// arbitrary, monotone or mixed.
    #[arg(long, default_value = "mixed")]
    family: TfFamily,
    /// Build an ensemble of `--members` copies of this field instead of
    /// using the dataset's fields as members.
    #[arg(long)]
    ensemble_from: Option<String>,
    #[arg(long, default_value_t = 4)]
    members: usize,
    /// CSV destination (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvertArgs {
    /// IVLA or JSON dataset.
    #[arg(long, conflicts_with = "raw")]
    input: Option<PathBuf>,
    /// Raw little-endian f32 field `name=path`, x fastest; repeatable. Needs `--dims`.
    #[arg(long, requires = "dims")]
    raw: Vec<String>,
    /// Structured grid size `nx,ny,nz`.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<u32>>,
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Plot(a) => plot(a),
        Command::Bench(a) => bench_cmd(a),
        Command::VaCompare(a) => va_compare(a),
        Command::Convert(a) => convert(a),
    }
}

fn load(path: &Path) -> Result<Dataset> {
    dsio::load(path).with_context(|| format!("loading {}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_tfs(ds: &Dataset, args: &TfArgs) -> Result<Vec<TransferFunction>> {
    let mut given = Vec::new();
    for path in &args.tfs {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let parsed: Vec<TransferFunction> = if value.is_array() {
            serde_json::from_value(value)
        } else {
            serde_json::from_value(value).map(|tf| vec![tf])
        }
        .with_context(|| format!("invalid transfer function in {}", path.display()))?;
        given.extend(parsed);
    }
    let mut all = Vec::with_capacity(ds.fields().len());
    for (k, f) in ds.fields().iter().enumerate() {
        match given.iter().position(|tf| tf.field() == f.name()) {
            Some(i) => all.push(given.swap_remove(i)),
            None => all.push(TransferFunction::alpha_ramp(f.name(), DEFAULT_ENTRIES, (k + 1) as f64)?),
        }
    }
    if let Some(extra) = given.first() {
        bail!("transfer function for unknown field '{}'", extra.field());
    }
    Ok(tfs_in_field_order(ds, all)?)
}

fn generate(a: GenerateArgs) -> Result<()> {
    let mut spec = SynthSpec {
        kind: a.kind,
        size: a.size,
        levels: a.levels,
        fields: a.fields,
        seed: a.seed,
    };
    if let Some(target) = a.cells {
        spec = spec.with_cell_target(target)?;
    }
    let ds = synth::generate(&spec)?;
    dsio::save(&ds, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!(
        "wrote {} cells (size {}), {} fields, levels {:?} to {}",
        ds.len(),
        spec.size,
        ds.fields().len(),
        ds.levels(),
        a.out.display()
    );
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let ds = load(&a.input)?;
    let tfs = load_tfs(&ds, &a.tf)?;
    let params = PipelineParams {
        exponent: a.exponent,
        min_importance: a.min_importance,
        width: a.width,
        height: a.height,
        mode: match a.mode {
            ModeArg::Polyline => PlotMode::Polyline,
            ModeArg::Bars => PlotMode::Bars,
        },
        color: match a.color {
            ColorArg::Tf => ColorMode::TransferFunction,
            ColorArg::Uniform => ColorMode::Uniform,
        },
    };
    let out = run_pipeline(&ds, &tfs, &params, a.exec.into())?;
    let is_svg = a.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("svg"));
    let mut w = output(Some(&a.out))?;
    if is_svg {
        w.write_all(out.plot.to_svg().as_bytes())?;
    } else {
        out.plot.write_ppm(&mut w)?;
    }
    w.flush()?;
    if let Some(path) = &a.series {
        let w = output(Some(path))?;
        serde_json::to_writer(w, &out.series)?;
    }
    Ok(())
}

fn parse_sweep(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("sweep '{s}' is not lo:hi:step"))?;
    match parts[..] {
        [v] => Ok(vec![v]),
        [lo, hi, step] => Ok(bench::steps(lo, hi, step)?),
        _ => bail!("sweep '{s}' is not lo:hi:step"),
    }
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let ds = load(&a.input)?;
    let tfs = load_tfs(&ds, &a.tf)?;
    let cfg = SweepConfig {
        exponents: parse_sweep(&a.exponent_sweep)?,
        min_importances: parse_sweep(&a.min_importance_sweep)?,
        repeats: a.repeats,
        base: PipelineParams {
            exponent: a.exponent,
            min_importance: a.min_importance,
            width: a.width,
            ..PipelineParams::default()
        },
        mode: a.exec.into(),
    };
    let rows = bench::run_sweep(&ds, &tfs, &cfg)?;
    bench::write_csv(&rows, output(a.out.as_deref())?)?;
    Ok(())
}

fn va_compare(a: VaArgs) -> Result<()> {
    let mut ds = load(&a.input)?;
    if let Some(field) = &a.ensemble_from {
        ds = synth::replicate_field(&ds, field, a.members)?;
    }
    let rows = study::va_compare(&ds, a.trials, a.seed, a.family)?;
    study::write_csv(&rows, output(a.out.as_deref())?)?;
    Ok(())
}

fn read_raw(path: &Path, expected: usize) -> Result<Vec<f32>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.len() != expected * 4 {
        bail!(
            "{} holds {} bytes, expected {} ({} f32 values)",
            path.display(),
            bytes.len(),
            expected * 4,
            expected
        );
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn convert(a: ConvertArgs) -> Result<()> {
    let ds = match (&a.input, a.raw.is_empty()) {
        (Some(path), true) => load(path)?,
        (None, false) => {
            let dims: [u32; 3] = a
                .dims
                .as_deref()
                .and_then(|d| d.try_into().ok())
                .context("--dims needs three values")?;
            let n = dims.iter().map(|&d| d as usize).product();
            let fields = a
                .raw
                .iter()
                .map(|spec| {
                    let (name, path) = spec
                        .split_once('=')
                        .with_context(|| format!("--raw '{spec}' is not name=path"))?;
                    Ok((name.to_owned(), read_raw(Path::new(path), n)?))
                })
                .collect::<Result<Vec<_>>>()?;
            Dataset::import_structured(dims, fields)?
        }
        _ => bail!("give either --input or at least one --raw"),
    };
    dsio::save(&ds, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}
