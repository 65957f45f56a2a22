//! The `styler` command.
//!
//! Exit codes: 0 success, 1 usage, 2 validation, 3 I/O, 4 numeric or
//! training failure.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use styler::blade::{self, render_collage, CollageOptions};
use styler::color::on_luma;
use styler::effects::{train_effect, Effect, EffectParams, TrainOptions};
use styler::io::{load_luma, load_png, save_png};
use styler::pipeline::{benchmark, execute, StylePipeline};
use styler::procedural::{self, contact_sheet, score_styles, CommandScorer, HeuristicScorer, Scorer};
use styler::{Error, Image64, ModelRegistry64};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidInput(_) | Error::Validation(_) | Error::Config(_) => EXIT_VALIDATION,
            Error::Io { .. } | Error::Codec(_) | Error::Format(_) => EXIT_IO,
            Error::State(_) | Error::CorruptState(_) | Error::Scoring(_) => EXIT_NUMERIC,
        };
        let mut message = e.to_string();
        if let Error::Validation(diags) = &e {
            for d in diags {
                message.push_str(&format!("\n  {d}"));
            }
        }
        Failure::new(code, message)
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::from(Error::Io { path: path.to_path_buf(), source: e })
}

#[derive(Parser, Debug)]
#[command(name = "styler", version, about = "Image stylization with learned filter banks")]
struct Cli {
    /// Worker threads for data-parallel kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ModelDir {
    /// Directory of `*.bld` models referenced by name from styles.
    #[arg(long, env = "STYLER_MODEL_DIR")]
    model_dir: Option<PathBuf>,
}

impl ModelDir {
    fn load(&self) -> CliResult<ModelRegistry64> {
        Ok(match &self.model_dir {
            Some(d) => ModelRegistry64::load_dir(d)?,
            None => ModelRegistry64::new(),
        })
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a style on an image.
    Apply {
        #[arg(long)]
        style: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        models: ModelDir,
    },
    /// Fit a filter bank to a reference effect.
    Train(TrainArgs),
    /// Run a filter bank on the luma of an image.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the model's pass count.
        #[arg(long)]
        passes: Option<u32>,
    },
    /// Draw every filter of a bank as a table.
    Collage {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = CollageOptions::default().cell_px)]
        cell_px: usize,
        #[arg(long, default_value_t = CollageOptions::default().gap)]
        gap: usize,
    },
    /// Time every block of a style.
    Bench {
        #[arg(long)]
        style: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        models: ModelDir,
    },
    /// Write random styles, one file per seed.
    Gen {
        /// `A..B` (inclusive) or a single seed.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score every style in a directory.
    Score {
        #[arg(long)]
        dir: PathBuf,
        /// `heuristic`, or a command that receives a PNG path and prints
        /// one number.
        #[arg(long, default_value = "heuristic")]
        scorer: String,
        /// Image(s) to render each style on.
        #[arg(long = "image", required = true)]
        images: Vec<PathBuf>,
        #[arg(long, default_value_t = procedural::DEFAULT_CONCURRENCY)]
        concurrency: usize,
        /// Also write a contact sheet (sorted by score) here, rendered on
        /// the first image.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        models: ModelDir,
    },
    /// Run the editor's HTTP service on localhost.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        image_dir: PathBuf,
        /// Where saved styles are kept (in memory only when unset).
        #[arg(long)]
        style_dir: Option<PathBuf>,
        #[command(flatten)]
        models: ModelDir,
    },
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    effect: Effect,
    /// Directory of training PNGs; each is used through its luma.
    #[arg(long)]
    inputs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    side: Option<usize>,
    #[arg(long)]
    obins: Option<usize>,
    #[arg(long)]
    sbins: Option<usize>,
    #[arg(long)]
    cbins: Option<usize>,
    /// Structure tensor smoothing (default depends on the effect).
    #[arg(long)]
    rho: Option<f64>,
    /// Ridge weight per bucket sample.
    #[arg(long)]
    lambda: Option<f64>,
    /// Skip the eight-fold rotation and flip augmentation.
    #[arg(long)]
    no_augment: bool,
    #[command(flatten)]
    params: EffectFlags,
}

/// Reference filter settings; unset flags keep the defaults.
#[derive(Args, Debug)]
struct EffectFlags {
    /// Tangent field smoothing of the reference (ETF, Flow-XDoG).
    #[arg(long)]
    flow_rho: Option<f64>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    passes: Option<u32>,
    #[arg(long)]
    steps: Option<u32>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    lic_length: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long)]
    sigma_base: Option<f64>,
}

impl EffectFlags {
    fn resolve(&self) -> EffectParams {
        let mut p = EffectParams::default();
        macro_rules! set {
            ($($f:ident => $g:ident),*) => { $(if let Some(v) = self.$f { p.$g = v; })* };
        }
        set!(flow_rho => rho, length => length, passes => passes, steps => steps, dt => dt, eps => eps,
             sigma => sigma, p => p, lic_length => lic_length, delta => delta, sigma_base => sigma_base);
        p
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}

fn dispatch(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::new(EXIT_USAGE, "--threads must be at least 1"));
        }
        // only the first call in a process can set the global pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Apply { style, input, out, models } => apply(&style, &input, &out, &models.load()?),
        Command::Train(args) => train(&args),
        Command::Infer { model, input, out, passes } => infer(&model, &input, &out, passes),
        Command::Collage { model, out, cell_px, gap } => collage(&model, &out, CollageOptions { cell_px, gap }),
        Command::Bench { style, input, repeats, json, models } => bench(&style, &input, repeats, json, &models.load()?),
        Command::Gen { seeds, out_dir } => gen(&seeds, &out_dir),
        Command::Score { dir, scorer, images, concurrency, report, json, models } => {
            score(&dir, &scorer, &images, concurrency, report.as_deref(), json, &models.load()?)
        }
        Command::Serve { port, image_dir, style_dir, models } => serve(port, image_dir, style_dir, models.model_dir),
    }
}

/// Style files that fail to parse are a validation problem, not I/O.
fn load_style(path: &Path) -> CliResult<StylePipeline> {
    StylePipeline::load(path).map_err(|e| match e {
        Error::Format(m) => Failure::new(EXIT_VALIDATION, format!("{}: {m}", path.display())),
        e => e.into(),
    })
}

fn apply(style: &Path, input: &Path, out: &Path, models: &ModelRegistry64) -> CliResult {
    let style = load_style(style)?;
    let img: Image64 = load_png(input)?;
    save_png(&execute(&style, &img, models)?, out)?;
    Ok(())
}

fn png_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io_failure(dir, e))? {
        let path = entry.map_err(|e| io_failure(dir, e))?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// `model.bld` gets `model.json` next to it.
fn sidecar_path(model: &Path) -> PathBuf {
    model.with_extension("json")
}

fn train(a: &TrainArgs) -> CliResult {
    let files = png_files(&a.inputs)?;
    if files.is_empty() {
        return Err(Failure::new(EXIT_VALIDATION, format!("no PNG files in {}", a.inputs.display())));
    }
    let inputs = files.iter().map(load_luma).collect::<styler::Result<Vec<Image64>>>()?;
    let params = a.params.resolve();
    let mut opts = TrainOptions::for_effect(a.effect);
    opts.side = a.side.unwrap_or(opts.side);
    opts.orientation_bins = a.obins.unwrap_or(opts.orientation_bins);
    opts.strength_bins = a.sbins.unwrap_or(opts.strength_bins);
    opts.coherence_bins = a.cbins.unwrap_or(opts.coherence_bins);
    opts.rho = a.rho;
    opts.lambda = a.lambda.unwrap_or(opts.lambda);
    opts.augment = !a.no_augment;
    if !(opts.lambda.is_finite() && opts.lambda > 0.0) {
        return Err(Failure::new(EXIT_VALIDATION, format!("--lambda must be > 0, got {}", opts.lambda)));
    }
    let (model, report) = train_effect(a.effect, &inputs, &params, &opts)?;
    if model.coefficients().iter().any(|v| !v.is_finite()) {
        return Err(Failure::new(EXIT_NUMERIC, "training produced non-finite coefficients"));
    }
    blade::save_model(&model, &a.out)?;
    let q = model.quantizer();
    let sidecar = json!({
        "effect": a.effect.name(),
        "model": a.out.file_name().map(|n| n.to_string_lossy().into_owned()),
        "side": model.side(),
        "orientation_bins": q.orientation_bins,
        "strength_bins": q.strength_bins,
        "coherence_bins": q.coherence_bins,
        "rho": q.rho,
        "lambda": opts.lambda,
        "augment": opts.augment,
        "passes": model.passes(),
        "effect_params": params.describe(a.effect),
        "training_images": files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
        "samples": report.samples,
        "populated_buckets": report.populated_buckets,
        "fallback_buckets": report.fallback_buckets,
        "notes": model.metadata.notes,
    });
    let side = sidecar_path(&a.out);
    std::fs::write(&side, serde_json::to_string_pretty(&sidecar).expect("json") + "\n")
        .map_err(|e| io_failure(&side, e))?;
    println!(
        "trained {} on {} image(s): {} samples, {}/{} buckets populated, {} fell back to identity",
        a.effect,
        inputs.len(),
        report.samples,
        report.populated_buckets,
        model.bucket_count(),
        report.fallback_buckets.len()
    );
    Ok(())
}

fn infer(model: &Path, input: &Path, out: &Path, passes: Option<u32>) -> CliResult {
    let model = blade::load_model::<f64>(model)?;
    let img: Image64 = load_png(input)?;
    let passes = passes.unwrap_or(model.passes());
    let result = on_luma(&img, |g| Ok(blade::apply(g, &model, passes)?.map(|v| v.clamp(0.0, 1.0))))?;
    save_png(&result, out)?;
    Ok(())
}

fn collage(model: &Path, out: &Path, opts: CollageOptions) -> CliResult {
    let model = blade::load_model::<f64>(model)?;
    save_png(&render_collage(&model, opts)?, out)?;
    Ok(())
}

fn bench(style: &Path, input: &Path, repeats: usize, json: bool, models: &ModelRegistry64) -> CliResult {
    if repeats == 0 {
        return Err(Failure::new(EXIT_USAGE, "--repeats must be at least 1"));
    }
    let style = load_style(style)?;
    let img: Image64 = load_png(input)?;
    let report = benchmark(&style, &img, models, repeats)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("json"));
        return Ok(());
    }
    println!(
        "{} on {}x{}, median of {}",
        report.style, report.width, report.height, report.repeats
    );
    for r in &report.rows {
        let at = r.index.map(|i| format!("{:?}[{i}]", r.layer).to_lowercase()).unwrap_or_default();
        println!("  {:<16} {:<22} {:>10.4} s {:>9.2} MP/s", at, r.kind, r.median_seconds, r.mp_per_s);
    }
    println!("  {:<39} {:>10.4} s {:>9.2} MP/s", "total", report.total_seconds, report.total_mp_per_s);
    Ok(())
}

fn parse_seeds(s: &str) -> CliResult<(u64, u64)> {
    let bad = || Failure::new(EXIT_USAGE, format!("--seeds expects A..B or a single seed, got {s:?}"));
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.strip_prefix('=').unwrap_or(b))?),
        None => {
            let v = num(s)?;
            (v, v)
        }
    };
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

fn gen(seeds: &str, out_dir: &Path) -> CliResult {
    let (a, b) = parse_seeds(seeds)?;
    std::fs::create_dir_all(out_dir).map_err(|e| io_failure(out_dir, e))?;
    for seed in a..=b {
        let style = procedural::generate(seed);
        style.save(out_dir.join(format!("{}.json", style.name)))?;
    }
    println!("wrote {} style(s) to {}", b - a + 1, out_dir.display());
    Ok(())
}

#[derive(Serialize)]
struct ScoreLine {
    name: String,
    file: String,
    score: Option<f64>,
    error: Option<String>,
}

fn score(
    dir: &Path,
    scorer: &str,
    images: &[PathBuf],
    concurrency: usize,
    report: Option<&Path>,
    json: bool,
    models: &ModelRegistry64,
) -> CliResult {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io_failure(dir, e))? {
        let path = entry.map_err(|e| io_failure(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Failure::new(EXIT_VALIDATION, format!("no style files in {}", dir.display())));
    }
    let styles = files.iter().map(|f| load_style(f)).collect::<CliResult<Vec<_>>>()?;
    let imgs = images.iter().map(load_png).collect::<styler::Result<Vec<Image64>>>()?;
    let scorer: Box<dyn Scorer> = match scorer {
        "heuristic" => Box::new(HeuristicScorer),
        cmd => Box::new(CommandScorer::parse(cmd)?),
    };
    let results = score_styles(&styles, &imgs, scorer.as_ref(), models, concurrency);
    let lines: Vec<ScoreLine> = styles
        .iter()
        .zip(&files)
        .zip(&results)
        .map(|((s, f), r)| ScoreLine {
            name: s.name.clone(),
            file: f.display().to_string(),
            score: r.as_ref().ok().copied(),
            error: r.as_ref().err().map(|e| e.to_string()),
        })
        .collect();
    if let Some(out) = report {
        let scored: Vec<_> = styles.iter().cloned().zip(lines.iter().map(|l| l.score)).collect();
        let sheet = contact_sheet(&scored, &imgs[0], models, out, true)?;
        if !json {
            println!("report: {}", sheet.report.display());
        }
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&lines).expect("json"));
    } else {
        for l in &lines {
            match (&l.score, &l.error) {
                (Some(v), _) => println!("{v:>8.3}  {}", l.name),
                (None, e) => println!("{:>8}  {}  ({})", "-", l.name, e.as_deref().unwrap_or("")),
            }
        }
    }
    if lines.iter().all(|l| l.score.is_none()) {
        return Err(Failure::new(EXIT_NUMERIC, "no style could be scored"));
    }
    Ok(())
}

fn serve(port: u16, image_dir: PathBuf, style_dir: Option<PathBuf>, model_dir: Option<PathBuf>) -> CliResult {
    let config = styler_server::ServerConfig { image_dir, style_dir, model_dir };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    eprintln!("listening on http://127.0.0.1:{port}");
    rt.block_on(styler_server::serve(config, port))
        .map_err(|e| Failure::new(EXIT_IO, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("0..9").unwrap(), (0, 9));
        assert_eq!(parse_seeds("3..=4").unwrap(), (3, 4));
        assert_eq!(parse_seeds("7").unwrap(), (7, 7));
        for bad in ["", "a..b", "5..2", "1..", "-1..3"] {
            assert_eq!(parse_seeds(bad).unwrap_err().code, EXIT_USAGE, "{bad}");
        }
    }

    #[test]
    fn error_codes() {
        let io = Error::Io { path: "x".into(), source: std::io::Error::other("boom") };
        assert_eq!(Failure::from(io).code, EXIT_IO);
        assert_eq!(Failure::from(Error::Validation(vec![])).code, EXIT_VALIDATION);
        assert_eq!(Failure::from(Error::CorruptState("nan".into())).code, EXIT_NUMERIC);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["styler"]), EXIT_USAGE);
        assert_eq!(run(["styler", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["styler", "apply", "--style", "x.json"]), EXIT_USAGE);
        assert_eq!(run(["styler", "train", "--effect", "blur", "--inputs", ".", "--out", "m.bld"]), EXIT_USAGE);
    }
}
