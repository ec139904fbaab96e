//! `shiftig` command-line tool.
//!
//! Verbs: `attribute` (full pipeline on CSV segments + JSON model),
//! `synth` (synthetic signal + ground truth), `verify` (self-checks),
//! `align` (baseline alignment only), `bins` (re-bin an existing result).
//!
//! Exit codes: 0 success, 2 degenerate alignment (results still written,
//! minus edge scores), 1 any other error with a machine-readable JSON
//! object on stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use shiftig::attribution::Scheme;
use shiftig::baseline::{align_baseline, align_baseline_shared, estimate_period};
use shiftig::binning::{bin_attributions, detect_rpeaks, BIN_LABELS};
use shiftig::model::DifferentiableModel;
use shiftig::signal::{normalize, read_csv, write_csv, LeadTimeMatrix};
use shiftig::{pipeline, svg, AttributionMap, AttributionReport, Error, SynthConfig};

mod verify;

#[derive(Parser)]
#[command(name = "shiftig", version, about = "Shift-invariant integrated-gradients attribution for multi-lead periodic signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full attribution pipeline and write attribution.json.
    Attribute(AttributeArgs),
    /// Generate a synthetic multi-lead signal plus ground-truth JSON.
    Synth(SynthArgs),
    /// Run gradient, completeness, and edge-score self-checks.
    Verify(VerifyArgs),
    /// Align a baseline segment to a target (no attribution).
    Align(AlignArgs),
    /// Re-bin the scores of an existing attribution.json.
    Bins(BinsArgs),
}

#[derive(Args)]
struct AttributeArgs {
    /// Target segment CSV (header: time,<lead1>,...).
    #[arg(long)]
    target: PathBuf,
    /// Baseline (resting) segment CSV, same shape as the target.
    #[arg(long)]
    baseline: PathBuf,
    /// Model weights JSON.
    #[arg(long)]
    model: PathBuf,
    /// Quadrature steps m.
    #[arg(long, default_value_t = 256)]
    steps: usize,
    /// Quadrature scheme: trapezoid | midpoint.
    #[arg(long, default_value = "trapezoid")]
    scheme: String,
    /// Use one shift shared by all leads instead of per-lead shifts.
    #[arg(long)]
    shared_shift: bool,
    /// Lead (label or 0-based index) for R-peak detection and binning.
    #[arg(long)]
    bin_lead: Option<String>,
    /// Override the model's class index.
    #[arg(long)]
    class_index: Option<usize>,
    /// Attribute the softmax probability instead of the raw logit.
    #[arg(long)]
    softmax: bool,
    /// Also write heatmap.svg.
    #[arg(long)]
    svg: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 60.0)]
    bpm: f64,
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    #[arg(long, default_value_t = 512.0)]
    sample_rate: f64,
    /// Number of leads.
    #[arg(long, default_value_t = 3)]
    leads: usize,
    /// RR jitter fraction in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Additive white noise SNR in dB (omit for a clean signal).
    #[arg(long)]
    snr: Option<f64>,
    /// Circular phase offset in samples.
    #[arg(long, default_value_t = 0)]
    phase_offset: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (synth.csv + truth.json).
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Also verify this model weights file.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    baseline: PathBuf,
    /// Use one shift shared by all leads.
    #[arg(long)]
    shared_shift: bool,
    /// Lead (label or 0-based index) for R-peak detection.
    #[arg(long)]
    bin_lead: Option<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct BinsArgs {
    /// Existing attribution.json to re-bin.
    #[arg(long)]
    attribution: PathBuf,
    /// Target segment CSV the scores refer to (peak source).
    #[arg(long)]
    target: PathBuf,
    /// Lead (label or 0-based index) for R-peak detection and binning.
    #[arg(long)]
    bin_lead: Option<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Error payload emitted as JSON on stderr.
struct CliError {
    code: String,
    message: String,
}

impl CliError {
    fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn configure_threads() {
    if let Ok(value) = std::env::var("SHIFTIG_THREADS") {
        if let Ok(n) = value.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Attribute(args) => cmd_attribute(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Verify(args) => verify::cmd_verify(args),
        Command::Align(args) => cmd_align(args),
        Command::Bins(args) => cmd_bins(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({"error": e.code, "message": e.message})
            );
            ExitCode::from(1)
        }
    }
}

fn load_segment(path: &Path, missing_code: &str) -> CliResult<LeadTimeMatrix> {
    if !path.exists() {
        return Err(CliError::new(missing_code, format!("{} not found", path.display())));
    }
    let file = fs::File::open(path).map_err(|e| CliError::new("IoError", e.to_string()))?;
    Ok(read_csv(file)?)
}

fn load_model(path: &Path) -> CliResult<DifferentiableModel> {
    if !path.exists() {
        return Err(CliError::new(
            "ModelFileNotFound",
            format!("{} not found", path.display()),
        ));
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::new("IoError", e.to_string()))?;
    Ok(DifferentiableModel::from_json_str(&text)?)
}

fn ensure_out_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::new("IoError", e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::new("IoError", e.to_string()))
}

fn cmd_attribute(args: AttributeArgs) -> CliResult<u8> {
    let target = load_segment(&args.target, "TargetFileNotFound")?;
    let baseline = load_segment(&args.baseline, "BaselineFileNotFound")?;
    let model = load_model(&args.model)?;

    let cfg = pipeline::PipelineConfig {
        steps: args.steps,
        scheme: Scheme::parse(&args.scheme)?,
        shared_shift: args.shared_shift,
        bin_lead: args.bin_lead.clone(),
        class_index: args.class_index,
        softmax: args.softmax,
        ..pipeline::PipelineConfig::default()
    };
    let result = pipeline::run(&target, &baseline, &model, &cfg)?;

    ensure_out_dir(&args.out)?;
    let report = AttributionReport::from_pipeline(&result);
    write_file(&args.out.join("attribution.json"), &report.to_json_string())?;
    if args.svg {
        let heatmap = svg::render_heatmap(&result.normalized_target, &result.attribution);
        write_file(&args.out.join("heatmap.svg"), &heatmap)?;
    }

    println!(
        "attribution.json written: residual {:.3e}, lambda {}, shifts {:?}",
        result.attribution.completeness_residual(),
        result
            .edges
            .as_ref()
            .map(|e| format!("{:.6}", e.lambda()))
            .unwrap_or_else(|| "degenerate".to_string()),
        result.aligned.shift_per_lead(),
    );
    Ok(if result.is_degenerate() { 2 } else { 0 })
}

fn cmd_synth(args: SynthArgs) -> CliResult<u8> {
    const DEFAULT_AMPS: [f64; 3] = [0.8, 1.0, 0.6];
    if args.leads == 0 {
        return Err(CliError::new("InvalidConfig", "need at least one lead"));
    }
    let cfg = SynthConfig {
        sample_rate_hz: args.sample_rate,
        duration_s: args.duration,
        heart_rate_bpm: args.bpm,
        lead_amplitudes: (0..args.leads).map(|i| DEFAULT_AMPS[i % 3]).collect(),
        rr_jitter_frac: args.jitter,
        noise_snr_db: args.snr,
        phase_offset_samples: args.phase_offset,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let (signal, truth) = shiftig::synth::generate(&cfg)?;

    ensure_out_dir(&args.out)?;
    let mut csv_bytes = Vec::new();
    write_csv(&signal, &mut csv_bytes)?;
    fs::write(args.out.join("synth.csv"), &csv_bytes)
        .map_err(|e| CliError::new("IoError", e.to_string()))?;

    let truth_json = serde_json::json!({
        "r_peaks": truth.indices(),
        "lead_used": truth.lead_used(),
        "sample_rate_hz": truth.sample_rate_hz(),
        "config": cfg,
    });
    write_file(
        &args.out.join("truth.json"),
        &format!("{truth_json}\n"),
    )?;
    println!(
        "synth.csv written: {} leads x {} samples, {} beats",
        signal.num_leads(),
        signal.num_samples(),
        truth.len()
    );
    Ok(0)
}

fn cmd_align(args: AlignArgs) -> CliResult<u8> {
    let target = load_segment(&args.target, "TargetFileNotFound")?;
    let baseline = load_segment(&args.baseline, "BaselineFileNotFound")?;
    let norm_target = normalize(&target)?;
    let norm_baseline = normalize(&baseline)?;
    let lead = match &args.bin_lead {
        Some(sel) => norm_target.signal.lead_index(sel)?,
        None => 0,
    };
    let peaks = detect_rpeaks(&norm_baseline.signal, lead)?;
    let period = estimate_period(&norm_baseline.signal, &peaks)?;
    let aligned = if args.shared_shift {
        align_baseline_shared(&norm_baseline.signal, &norm_target.signal, period)?
    } else {
        align_baseline(&norm_baseline.signal, &norm_target.signal, period)?
    };

    ensure_out_dir(&args.out)?;
    let doc = serde_json::json!({
        "period_samples": period,
        "shift_per_lead": aligned.shift_per_lead(),
        "score_per_lead": aligned.score_per_lead(),
    });
    write_file(&args.out.join("alignment.json"), &format!("{doc}\n"))?;
    println!(
        "alignment.json written: period {period}, shifts {:?}",
        aligned.shift_per_lead()
    );
    Ok(0)
}

fn cmd_bins(args: BinsArgs) -> CliResult<u8> {
    if !args.attribution.exists() {
        return Err(CliError::new(
            "AttributionFileNotFound",
            format!("{} not found", args.attribution.display()),
        ));
    }
    let text = fs::read_to_string(&args.attribution)
        .map_err(|e| CliError::new("IoError", e.to_string()))?;
    let report = AttributionReport::from_json_str(&text)?;
    let rows = report.scores.len();
    let cols = report.scores.first().map(|r| r.len()).unwrap_or(0);
    if rows == 0 || cols == 0 || report.scores.iter().any(|r| r.len() != cols) {
        return Err(CliError::new(
            "InvalidConfig",
            "attribution scores must be a non-empty rectangular matrix",
        ));
    }
    let flat: Vec<f64> = report.scores.iter().flatten().cloned().collect();
    let scores = Array2::from_shape_vec((rows, cols), flat)
        .expect("checked rectangular");
    let map = AttributionMap::from_parts(scores, report.f_target, report.f_baseline, 0)?;

    let target = load_segment(&args.target, "TargetFileNotFound")?;
    let norm_target = normalize(&target)?;
    let lead = match &args.bin_lead {
        Some(sel) => norm_target.signal.lead_index(sel)?,
        None => 0,
    };
    let peaks = detect_rpeaks(&norm_target.signal, lead)?;
    let profile = bin_attributions(&map, &peaks, lead)?;

    ensure_out_dir(&args.out)?;
    let doc = serde_json::json!({
        "totals": profile.totals().to_vec(),
        "counts": profile.counts().to_vec(),
        "labels": BIN_LABELS,
        "cycles_used": profile.cycles_used(),
        "coverage_fraction": profile.coverage_fraction(),
    });
    write_file(&args.out.join("bins.json"), &format!("{doc}\n"))?;
    println!("bins.json written: totals {:?}", profile.totals());
    Ok(0)
}
