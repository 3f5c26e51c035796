//! Shared CLI plumbing: dataset/theta loading, run manifests, error
//! taxonomy and output helpers.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use serde_json::{Value, json};
use unlabeled_risk::core::ClassifierParams;
use unlabeled_risk::data::{Dataset, load_dense_csv, load_sparse};
use unlabeled_risk::error::Error as LibError;

/// Exit-code taxonomy: 1 config, 2 data, 3 numeric.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<LibError> for CliError {
    fn from(e: LibError) -> Self {
        let msg = e.to_string();
        match e {
            LibError::InvalidParameter(_)
            | LibError::UnsupportedLoss { .. }
            | LibError::Identifiability(_)
            | LibError::Calibration(_) => CliError::Config(msg),
            LibError::Io { .. }
            | LibError::Parse { .. }
            | LibError::EmptyInput { .. }
            | LibError::DimensionMismatch { .. }
            | LibError::SampleAt { .. }
            | LibError::InvalidLabel { .. }
            | LibError::TooFewSamples { .. } => CliError::Data(msg),
            LibError::NonFinite { .. }
            | LibError::DegenerateData(_)
            | LibError::QuadratureNonConvergent { .. }
            | LibError::SingularInformation { .. }
            | LibError::Inconsistency(_)
            | LibError::Divergence(_) => CliError::Numeric(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Csv,
    Sparse,
}

/// Flags shared by every data-consuming subcommand.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input data file
    #[arg(long)]
    pub data: PathBuf,
    /// Input format
    #[arg(long, value_enum, default_value = "csv")]
    pub format: DataFormat,
    /// Feature dimension; required for sparse input, checked for csv
    #[arg(long)]
    pub dim: Option<usize>,
    /// Treat the csv as labeled (sparse files declare labels inline)
    #[arg(long)]
    pub labeled: bool,
    /// Zero-based label column for labeled csv; defaults to the last column
    #[arg(long)]
    pub label_col: Option<usize>,
    /// Skip one csv header line
    #[arg(long)]
    pub header: bool,
}

pub fn load_dataset(args: &DataArgs) -> CliResult<Dataset> {
    match args.format {
        DataFormat::Csv => {
            let label_col = match (args.labeled, args.label_col) {
                (false, _) => usize::MAX,
                (true, Some(c)) => c,
                (true, None) => last_column_index(&args.data, args.header)?,
            };
            Ok(load_dense_csv(
                &args.data,
                args.labeled,
                label_col,
                args.dim,
                args.header,
            )?)
        }
        DataFormat::Sparse => {
            let dim = args
                .dim
                .ok_or_else(|| CliError::Config("--dim is required for sparse input".into()))?;
            Ok(load_sparse(&args.data, dim)?)
        }
    }
}

fn last_column_index(path: &Path, header: bool) -> CliResult<usize> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("io error on {}: {e}", path.display())))?;
    let line = text
        .lines()
        .skip(usize::from(header))
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| CliError::Data(format!("{} is empty", path.display())))?;
    Ok(line.split(',').count() - 1)
}

/// Theta files: one weight per line; blank lines and `#` comments ignored.
pub fn load_theta(path: &Path) -> CliResult<ClassifierParams> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("io error on {}: {e}", path.display())))?;
    let mut weights = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let w: f64 = line.parse().map_err(|_| {
            CliError::Data(format!(
                "{}:{}: expected one weight per line, got {line:?}",
                path.display(),
                idx + 1
            ))
        })?;
        weights.push(w);
    }
    Ok(ClassifierParams::new(weights)?)
}

pub fn write_theta(theta: &ClassifierParams, path: &Path) -> CliResult<()> {
    let mut out = String::new();
    for w in theta.weights() {
        out.push_str(&format!("{w}\n"));
    }
    write_output(path, &out)
}

pub fn write_output(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent()
        && !parent.as_os_str().is_empty()
    {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// FNV-1a over the file bytes; the manifest's input digest.
pub fn digest_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Data(format!("io error on {}: {e}", path.display())))?;
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    Ok(format!("{hash:016x}"))
}

/// Every run writes exactly one manifest next to its outputs. The wall
/// time makes manifests differ between reruns; the data outputs stay
/// byte-identical for a fixed seed.
pub struct RunManifest {
    subcommand: &'static str,
    config: Value,
    seed: Option<u64>,
    inputs: Vec<(PathBuf, String)>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl RunManifest {
    pub fn start(subcommand: &'static str, config: Value, seed: Option<u64>) -> Self {
        Self {
            subcommand,
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> CliResult<()> {
        let digest = digest_file(path)?;
        self.inputs.push((path.to_path_buf(), digest));
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn write(&self, out_dir: &Path) -> CliResult<PathBuf> {
        let value = json!({
            "subcommand": self.subcommand,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs.iter().map(|(p, d)| json!({
                "path": p.display().to_string(),
                "fnv1a64": d,
            })).collect::<Vec<_>>(),
            "outputs": self.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "wall_time_s": self.started.elapsed().as_secs_f64(),
        });
        let path = out_dir.join("manifest.json");
        write_output(&path, &format!("{value:#}\n"))?;
        Ok(path)
    }
}
