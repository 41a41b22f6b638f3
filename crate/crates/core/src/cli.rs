//! Command-line surface.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audit::{AuditReport, ModelProbe, Output, RigidMotion};
use crate::conv::Precision;
use crate::error::{invalid, Error, Result};
use crate::io::phantom::PhantomSetSpec;
use crate::io::qstf::{load_field, save_field, scalar_map, Dtype};
use crate::kernel::write_kernel;
use crate::model::{metrics, pos_weight, preset, read_params, train_toy, write_params, Model, ModelConfig, PresetScale, Sample};
use crate::so3::Rotation;

#[derive(Debug, Parser)]
#[command(name = "eqdmri", version, about = "Rotation-equivariant pq-space networks for diffusion MRI")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a phantom set: scan, label and mask files per phantom.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = DtypeArg::F64)]
        dtype: DtypeArg,
    },
    /// Write the JSON config of a named preset.
    Preset {
        #[arg(long)]
        id: String,
        #[arg(long, value_enum, default_value_t = ScaleArg::Micro)]
        scale: ScaleArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the assembled kernel of one stage.
    BuildKernel {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        layer: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict lesion probabilities for one scan.
    Forward {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = PrecisionArg::Double)]
        precision: PrecisionArg,
    },
    /// Measure equivariance; exits nonzero when an error exceeds `--tol`.
    Audit {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: AuditMode,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Random rotations drawn in continuous mode.
        #[arg(long, default_value_t = 4)]
        rotations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PrecisionArg::Double)]
        precision: PrecisionArg,
    },
    /// SGD on a generated phantom set; writes a checkpoint and a loss trace.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        lr: f64,
        #[arg(long)]
        out: PathBuf,
        /// Loss trace CSV; defaults to the checkpoint path with a `.csv` extension.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// ROC AUC, average precision and Dice of a prediction.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Checkpoint; fresh parameters from the config seed when absent.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DtypeArg {
    F32,
    F64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScaleArg {
    Full,
    Micro,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PrecisionArg {
    Single,
    Double,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AuditMode {
    Cube,
    Continuous,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Single => Precision::Single,
            PrecisionArg::Double => Precision::Double,
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, v)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn load_model(args: &ModelArgs) -> Result<(Model, Vec<f64>)> {
    let config: ModelConfig = read_json(&args.config)?;
    let model = Model::build(config)?;
    let params = match &args.params {
        Some(p) => read_params(&mut BufReader::new(File::open(p)?), &model.config.hash(), model.n_params())?.1,
        None => model.init_params(model.config.seed),
    };
    Ok((model, params))
}

pub fn scan_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("scan_{i:03}.qstf"))
}

pub fn labels_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("labels_{i:03}.qstf"))
}

pub fn mask_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("mask_{i:03}.qstf"))
}

/// Reads every `scan_NNN` / `labels_NNN` / `mask_NNN` triple in `dir`.
pub fn load_dataset(dir: &Path) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    for i in 0.. {
        let scan = scan_path(dir, i);
        if !scan.exists() {
            break;
        }
        let input = load_field(&scan)?;
        let labels = load_field(&labels_path(dir, i))?.into_data();
        let mask = load_field(&mask_path(dir, i))?.data().iter().map(|&v| v != 0.0).collect();
        out.push(Sample { input, labels, mask });
    }
    if out.is_empty() {
        return Err(invalid(format!("no scan_000.qstf in {}", dir.display())));
    }
    Ok(out)
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Gen { spec, out, dtype } => {
            let set: PhantomSetSpec = read_json(&spec)?;
            let dtype = match dtype {
                DtypeArg::F32 => Dtype::F32,
                DtypeArg::F64 => Dtype::F64,
            };
            fs::create_dir_all(&out)?;
            for (i, p) in set.generate()?.into_iter().enumerate() {
                let dims = p.field.dims();
                save_field(&scan_path(&out, i), &p.field, dtype)?;
                save_field(&labels_path(&out, i), &scalar_map(dims, p.labels)?, Dtype::F64)?;
                save_field(&mask_path(&out, i), &scalar_map(dims, p.mask.iter().map(|&m| f64::from(m)).collect())?, Dtype::F64)?;
            }
            Ok(0)
        }
        Command::Preset { id, scale, out } => {
            let scale = match scale {
                ScaleArg::Full => PresetScale::Full,
                ScaleArg::Micro => PresetScale::Micro,
            };
            write_json(&out, &preset(&id, scale)?)?;
            Ok(0)
        }
        Command::BuildKernel { model, layer, out } => {
            let (m, p) = load_model(&model)?;
            let kernels = m.kernels(&p)?;
            let k = kernels
                .get(layer)
                .ok_or_else(|| invalid(format!("model has {} stages", kernels.len())))?
                .as_ref()
                .ok_or_else(|| invalid(format!("stage {layer} is the late q-reduction and has no kernel")))?;
            let mut w = BufWriter::new(File::create(out)?);
            write_kernel(&mut w, k)?;
            w.flush()?;
            Ok(0)
        }
        Command::Forward { model, input, out, precision } => {
            let (m, p) = load_model(&model)?;
            let pred = m.predict_with(&p, &load_field(&input)?, precision.into())?;
            save_field(&out, &pred, Dtype::F64)?;
            Ok(0)
        }
        Command::Audit { model, input, mode, report, tol, rotations, seed, precision } => {
            let (m, p) = load_model(&model)?;
            let field = load_field(&input)?;
            let probe = ModelProbe { model: &m, params: &p, precision: precision.into(), output: Output::Logits };
            let r: AuditReport = match mode {
                AuditMode::Cube => probe.cube_report(&field)?,
                AuditMode::Continuous => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let motions: Vec<RigidMotion> = (0..rotations).map(|_| RigidMotion::rotation(Rotation::random(&mut rng))).collect();
                    probe.continuous_report(&field, &motions)?
                }
            };
            write_json(&report, &r)?;
            eprintln!("max equivariance error {:.3e} (tol {tol:.1e})", r.max_error);
            Ok(if r.max_error <= tol { 0 } else { 1 })
        }
        Command::Train { config, data, steps, lr, out, trace } => {
            let config: ModelConfig = read_json(&config)?;
            let m = Model::build(config)?;
            let data = load_dataset(&data)?;
            let w = pos_weight(&data)?;
            let r = train_toy(&m, m.init_params(m.config.seed), &data, steps, lr, w)?;
            let mut f = BufWriter::new(File::create(&out)?);
            write_params(&mut f, &m.config.hash(), m.groups(), &r.params)?;
            f.flush()?;
            let trace = trace.unwrap_or_else(|| out.with_extension("csv"));
            let mut t = BufWriter::new(File::create(trace)?);
            writeln!(t, "step,loss")?;
            for (i, l) in r.losses.iter().enumerate() {
                writeln!(t, "{i},{l:e}")?;
            }
            t.flush()?;
            Ok(0)
        }
        Command::Eval { pred, labels, mask, out } => {
            let pred = load_field(&pred)?;
            let labels = load_field(&labels)?;
            if pred.data().len() != labels.data().len() {
                return Err(Error::Shape("prediction and labels differ in size".into()));
            }
            let mask = match mask {
                Some(p) => load_field(&p)?.data().iter().map(|&v| v != 0.0).collect(),
                None => vec![true; labels.data().len()],
            };
            let r = metrics(pred.data(), labels.data(), &mask)?;
            match out {
                Some(p) => write_json(&p, &r)?,
                None => println!("{}", serde_json::to_string_pretty(&r)?),
            }
            Ok(0)
        }
    }
}
