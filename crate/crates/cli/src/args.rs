use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "hih",
    version,
    about = "Quantization error analysis for heatmap landmark codecs (DIRECT, WSM, WOV, WOM, HIH)",
    args_override_self = true
)]
pub struct Cli {
    /// Flat `key = value` file of flag defaults; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print errors to stderr as single-line JSON.
    #[arg(long, global = true)]
    pub json_errors: bool,

    /// Worker threads for per-sample processing (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode and decode every annotation with ground-truth labels (loss = 0)
    /// and report the leftover NME / AUC / FR per scheme.
    BenchIdeal(BenchIdealArgs),
    /// Monte-Carlo quantization error on synthetic landmarks with uniform
    /// sub-pixel offsets, next to the analytic DIRECT value.
    Synth(SynthArgs),
    /// Encode one landmark set and print the sparse label JSON.
    Encode(EncodeArgs),
    /// Decode sparse label JSON (from `encode`) into normalized coordinates.
    Decode(DecodeArgs),
    /// Score predictions against ground truth (both canonical JSON).
    Metrics(MetricsArgs),
    /// Convert an annotation source to canonical JSON.
    Convert(ConvertArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CodecArgs {
    /// Integer heatmap resolution (square). 64 is a 256-px input downsampled 4x.
    #[arg(long, default_value_t = 64, value_name = "N")]
    pub heatmap_res: usize,

    /// HIH decimal heatmap resolution (square). Default 8: the 8x8 decimal map
    /// whose clamped rounding yields the ~7x DIRECT/HIH error ratio seen on
    /// WFLW, 300W and COFW.
    #[arg(long, default_value_t = 8, value_name = "N")]
    pub decimal_res: usize,

    /// Gaussian sigma of the integer heatmap, in heatmap pixels (1.5 for WFLW
    /// and COFW training; 1.0 is the usual 300W value).
    #[arg(long, default_value_t = 1.5)]
    pub sigma_int: f64,

    /// Gaussian sigma of the decimal heatmap, in decimal-heatmap pixels.
    #[arg(long, default_value_t = 1.0)]
    pub sigma_dec: f64,

    /// Landmarks outside the heatmap: `clamp` to the border or `drop` them.
    #[arg(long, default_value = "clamp")]
    pub oob: String,

    /// Network input resolution (square), in pixels.
    #[arg(long, default_value_t = 256, value_name = "PX")]
    pub input_res: u32,

    /// Absolute tolerance for tied second-place responses (WSM).
    #[arg(long, default_value_t = 1e-9)]
    pub tie_eps: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Report format: table, csv or json.
    #[arg(long, default_value = "table")]
    pub format: String,

    /// Write the report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchIdealArgs {
    /// Annotations as <format>:<path>; format is wflw (list file), pts
    /// (directory of .pts files) or json (canonical JSON).
    #[arg(long, value_name = "FORMAT:PATH")]
    pub dataset: String,

    /// Comma-separated schemes or `all`.
    #[arg(long, default_value = "all")]
    pub schemes: String,

    #[command(flatten)]
    pub codec: CodecArgs,

    /// Extra crop border as a fraction of the landmark box side.
    #[arg(long, default_value_t = 0.25)]
    pub margin: f64,

    /// Crop around `landmarks` or the annotated `bbox`.
    #[arg(long, default_value = "landmarks")]
    pub crop_source: String,

    /// Treat annotated bbox max edges as exclusive.
    #[arg(long)]
    pub bbox_exclusive: bool,

    /// Outer-eye-corner indices `a,b` (defaults: 60,72 for 98 points,
    /// 36,45 for 68 points; required otherwise).
    #[arg(long, value_name = "A,B")]
    pub norm_indices: Option<String>,

    /// NME cut-off for AUC and FR, as a fraction.
    #[arg(long, default_value_t = 0.10)]
    pub threshold: f64,

    /// Write one CED CSV per scheme to `<PREFIX>_<scheme>.csv`.
    #[arg(long, value_name = "PREFIX")]
    pub ced_out: Option<PathBuf>,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of synthetic faces (scientific notation such as 1e6 accepted).
    #[arg(long, default_value = "100000")]
    pub samples: String,

    /// Generator seed (ChaCha8, one stream per sample).
    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    /// Raw-image to heatmap downsample factor n.
    #[arg(long, default_value_t = 4.0)]
    pub n_factor: f64,

    /// Landmarks per synthetic face.
    #[arg(long, default_value_t = 1)]
    pub landmarks: usize,

    /// Comma-separated schemes or `all`.
    #[arg(long, default_value = "all")]
    pub schemes: String,

    #[command(flatten)]
    pub codec: CodecArgs,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Scheme to encode with.
    #[arg(long, default_value = "hih")]
    pub scheme: String,

    /// One landmark in integer-heatmap coordinates, `x,y`. Repeatable.
    #[arg(long, value_name = "X,Y", allow_hyphen_values = true, conflicts_with = "record")]
    pub point: Vec<String>,

    /// Canonical JSON file; the record at `--index` is cropped and encoded.
    #[arg(long, value_name = "FILE")]
    pub record: Option<PathBuf>,

    /// Record index within `--record`.
    #[arg(long, default_value_t = 0)]
    pub index: usize,

    /// Crop margin used with `--record`.
    #[arg(long, default_value_t = 0.25)]
    pub margin: f64,

    #[command(flatten)]
    pub codec: CodecArgs,

    /// Write the JSON here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Sparse label JSON; `-` reads stdin.
    #[arg(long, default_value = "-", value_name = "FILE")]
    pub input: String,

    /// Absolute tolerance for tied second-place responses (WSM).
    #[arg(long, default_value_t = 1e-9)]
    pub tie_eps: f64,

    /// Write the JSON here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Ground-truth canonical JSON.
    #[arg(long, value_name = "FILE")]
    pub gt: PathBuf,

    /// Prediction canonical JSON, records in the same order with the same ids.
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,

    /// Outer-eye-corner indices `a,b` (defaults for 98 and 68 points).
    #[arg(long, value_name = "A,B")]
    pub norm_indices: Option<String>,

    /// NME cut-off for AUC and FR, as a fraction.
    #[arg(long, default_value_t = 0.10)]
    pub threshold: f64,

    /// Write the CED curve CSV here.
    #[arg(long, value_name = "FILE")]
    pub ced_out: Option<PathBuf>,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Source as <format>:<path> (wflw, pts or json).
    #[arg(long, value_name = "FORMAT:PATH")]
    pub input: String,

    /// Dataset name stored in the output (defaults to the detected preset).
    #[arg(long)]
    pub name: Option<String>,

    /// Write canonical JSON here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}
