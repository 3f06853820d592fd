use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bitrobust::codec::{CodecKind, CodecSpec};
use bitrobust::distortion::{self, Method, Mode, Neighborhood};
use bitrobust::harness::{self, ParityBudget, SweepConfig, SweepResult};
use bitrobust::model::{
    self, evaluate_accuracy, quantize_model, DecodeOptions, FloatModel, GridPolicy, LabeledDataset,
    Network, ToyConfig,
};
use bitrobust::{channel, Error, Result};

#[derive(Parser)]
#[command(name = "bitrobust", version, about = "Weight storage codecs and bit-error robustness sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the toy MLP and write its real-valued weights (JSON) and held-out data.
    TrainToy(TrainToyArgs),
    /// Quantize a weights JSON file (or re-encode an NNSB bundle).
    Quantize(QuantizeArgs),
    /// Top-k accuracy of a bundle on a dataset.
    Eval(EvalArgs),
    /// Print the layer table and tensors of a bundle.
    Info { bundle: PathBuf },
    /// Pass a bundle through a binary symmetric channel.
    Corrupt(CorruptArgs),
    /// Distortion profiles of the index codecs, as CSV.
    Distortion(DistortionArgs),
    /// Accuracy versus RBER over repeated corruption trials.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct TrainToyArgs {
    #[arg(long, default_value_t = ToyConfig::default().classes)]
    classes: usize,
    #[arg(long, default_value_t = ToyConfig::default().dims)]
    dims: usize,
    #[arg(long, default_value_t = ToyConfig::default().samples)]
    samples: usize,
    #[arg(long, default_value_t = ToyConfig::default().hidden)]
    hidden: usize,
    #[arg(long, default_value_t = ToyConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = ToyConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = ToyConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = ToyConfig::default().center_spread)]
    center_spread: f64,
    #[arg(long)]
    weights_out: PathBuf,
    #[arg(long)]
    data_out: PathBuf,
    #[arg(long)]
    train_data_out: Option<PathBuf>,
}

#[derive(Args)]
struct QuantizeArgs {
    #[arg(long, default_value = "binary")]
    codec: CodecKind,
    #[arg(long, default_value_t = 16)]
    q: u32,
    /// Reserve the top bit of each word as an even-parity check bit.
    #[arg(long)]
    parity: bool,
    /// One [min, max] grid over all tensors instead of one per tensor.
    #[arg(long)]
    global_grid: bool,
    input: PathBuf,
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1)]
    top_k: usize,
    /// Replace NaN/infinite decoded weights with zero.
    #[arg(long)]
    sanitize: bool,
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(long)]
    rber: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[arg(long, value_delimiter = ',')]
    tensors: Vec<String>,
    input: PathBuf,
    output: PathBuf,
}

#[derive(Args)]
struct DistortionArgs {
    #[arg(long, value_delimiter = ',', default_value = "binary,gray,hamming")]
    codec: Vec<CodecKind>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10,12")]
    q: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    k: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "max,ave")]
    mode: Vec<String>,
    /// Monte-Carlo estimate from this many samples instead of full enumeration.
    #[arg(long)]
    sampled: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Neighbors at distance exactly k instead of 1..=k.
    #[arg(long)]
    shell: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    rber_grid: Vec<f64>,
    #[arg(long, default_value_t = harness::DEFAULT_TRIALS)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = harness::DEFAULT_X)]
    x: f64,
    #[arg(long, default_value_t = 1)]
    top_k: usize,
    #[arg(long, value_delimiter = ',')]
    tensors: Vec<String>,
    /// Also sweep the parity-wrapped variant (written next to --out as *.parity.csv).
    #[arg(long)]
    parity_compare: bool,
    /// With --parity-compare, add the check bit on top of the data bits.
    #[arg(long)]
    equal_precision: bool,
    #[arg(long)]
    sanitize: bool,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainToy(a) => train_toy(a),
        Command::Quantize(a) => quantize(a),
        Command::Eval(a) => eval(a),
        Command::Info { bundle } => info(&bundle),
        Command::Corrupt(a) => corrupt(a),
        Command::Distortion(a) => distortion_csv(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn train_toy(a: TrainToyArgs) -> Result<()> {
    let cfg = ToyConfig {
        classes: a.classes,
        dims: a.dims,
        samples: a.samples,
        hidden: a.hidden,
        epochs: a.epochs,
        seed: a.seed,
        learning_rate: a.learning_rate,
        center_spread: a.center_spread,
        ..ToyConfig::default()
    };
    let out = model::train_toy(&cfg)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(&a.weights_out)?), &out.model)?;
    out.test.save(&a.data_out)?;
    if let Some(p) = a.train_data_out {
        out.train.save(p)?;
    }
    println!("held-out accuracy {:.4} (loss {:.4})", out.test_accuracy, out.final_loss);
    Ok(())
}

fn load_float_or_bundle(path: &Path) -> Result<FloatModel> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(model::format::MAGIC) {
        model::format::from_bytes(&bytes)?.to_float_model(DecodeOptions::default())
    } else {
        Ok(serde_json::from_slice(&bytes)?)
    }
}

fn quantize(a: QuantizeArgs) -> Result<()> {
    let float = load_float_or_bundle(&a.input)?;
    let spec = CodecSpec::new(a.codec, a.q, a.parity)?;
    let policy = if a.global_grid { GridPolicy::Global } else { GridPolicy::PerTensor };
    let bundle = quantize_model(&float, spec, policy)?;
    model::save_bundle(&bundle, &a.output)?;
    println!(
        "{} tensors, {} weights, {} stored bits, codec {spec}",
        bundle.tensors().len(),
        bundle.parameter_count(),
        bundle.stored_bits()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let bundle = model::load_bundle(&a.bundle)?;
    let data = LabeledDataset::load(&a.data)?;
    let net = Network::from_bundle(&bundle, DecodeOptions { sanitize: a.sanitize })?;
    let acc = evaluate_accuracy(&net, &data, a.top_k)?;
    println!("accuracy {acc} (top-{}, {} samples, {} nulled weights)", a.top_k, data.len(), net.nulled_weights());
    Ok(())
}

fn info(path: &Path) -> Result<()> {
    let bundle = model::load_bundle(path)?;
    let shapes = bundle.validate()?;
    let mut out = io::stdout().lock();
    writeln!(out, "input {:?}", bundle.input_shape()?)?;
    writeln!(out, "layers:")?;
    for (i, (layer, shape)) in bundle.layers().iter().zip(&shapes).enumerate() {
        writeln!(out, "  {i:>3}  {:<40} -> {shape:?}", layer.describe())?;
    }
    writeln!(out, "tensors:")?;
    for t in bundle.tensors() {
        writeln!(
            out,
            "  {:<24} {:<16} {:<20} [{}, {}]",
            t.name(),
            format!("{:?}", t.shape()),
            t.spec().to_string(),
            t.grid().w_min(),
            t.grid().w_max()
        )?;
    }
    writeln!(out, "parameters {}, stored bits {}", bundle.parameter_count(), bundle.stored_bits())?;
    for (k, v) in bundle.metadata() {
        writeln!(out, "meta {k} = {v}")?;
    }
    Ok(())
}

fn corrupt(a: CorruptArgs) -> Result<()> {
    let bundle = model::load_bundle(&a.input)?;
    let channel = channel::BscChannel::new(a.rber, a.seed)?;
    let target = channel::InjectionTarget::only(a.tensors, a.trial);
    let (out, flips) = channel::corrupt_bundle(&bundle, &channel, &target)?;
    model::save_bundle(&out, &a.output)?;
    println!("{flips} bits flipped");
    Ok(())
}

fn distortion_csv(a: DistortionArgs) -> Result<()> {
    let modes = a
        .mode
        .iter()
        .map(|m| match m.as_str() {
            "max" => Ok(Mode::Max),
            "ave" | "avg" => Ok(Mode::Ave),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let method = match a.sampled {
        Some(samples) => Method::Sampled { samples, seed: a.seed },
        None => Method::Exhaustive,
    };
    let neighborhood = if a.shell { Neighborhood::Shell } else { Neighborhood::Ball };
    let mut w: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    writeln!(w, "codec,q,k,mode,value_exact_num,value_exact_den,value_float,method,samples,seed")?;
    for &kind in &a.codec {
        for &q in &a.q {
            for &k in &a.k {
                let spec = CodecSpec::new(kind, q, false)?;
                let report = distortion::distortion_profile(&spec, k, neighborhood, method)?;
                for &mode in &modes {
                    let v = report.value(mode);
                    let (num, den) = match v.exact {
                        Some(r) => (r.numer().to_string(), r.denom().to_string()),
                        None => (String::new(), String::new()),
                    };
                    let (method_name, samples, seed) = match method {
                        Method::Exhaustive => ("exhaustive", String::new(), String::new()),
                        Method::Sampled { samples, seed } => ("sampled", samples.to_string(), seed.to_string()),
                    };
                    writeln!(
                        w,
                        "{kind},{q},{k},{},{num},{den},{},{method_name},{samples},{seed}",
                        mode.name(),
                        v.float
                    )?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_outputs(result: &SweepResult, csv_path: &Path) -> Result<()> {
    harness::write_csv(result, BufWriter::new(File::create(csv_path)?))?;
    harness::write_json(result, BufWriter::new(File::create(csv_path.with_extension("json"))?))?;
    Ok(())
}

fn describe(label: &str, r: &SweepResult) {
    let rob = r.robustness.map_or_else(|| "undefined".to_string(), |v| v.to_string());
    println!("{label}: baseline accuracy {}, R({}) = {rob}", r.baseline_accuracy, r.config.x);
}

fn sweep(a: SweepArgs) -> Result<()> {
    let bundle = model::load_bundle(&a.bundle)?;
    let data = LabeledDataset::load(&a.data)?;
    let config = SweepConfig {
        rber_grid: a.rber_grid,
        trials: a.trials,
        master_seed: a.seed,
        top_k: a.top_k,
        tensor_filter: a.tensors.into_iter().collect::<BTreeSet<_>>(),
        x: a.x,
        sanitize: a.sanitize,
    };

    if !a.parity_compare {
        let result = harness::run_sweep(&bundle, &data, &config)?;
        write_outputs(&result, &a.out)?;
        describe("sweep", &result);
        return Ok(());
    }

    let budget = if a.equal_precision { ParityBudget::EqualPrecision } else { ParityBudget::EqualStorage };
    let has_parity = bundle.tensors().iter().any(|t| t.spec().parity());
    let (plain, parity) = if has_parity {
        (harness::plain_variant(&bundle)?, bundle)
    } else {
        let p = harness::parity_variant(&bundle, budget)?;
        (bundle, p)
    };
    let plain_result = harness::run_sweep(&plain, &data, &config)?;
    let parity_result = harness::run_sweep(&parity, &data, &config)?;
    let stem = a.out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let parity_path = a.out.with_file_name(format!("{stem}.parity.csv"));
    write_outputs(&plain_result, &a.out)?;
    write_outputs(&parity_result, &parity_path)?;
    describe("no nulling", &plain_result);
    describe("parity nulling", &parity_result);
    Ok(())
}
