use clap::{Parser, Subcommand};
use resofeat::features::FeatureConfig;
use resofeat::harness::{
    edge_traversal, export_report, folds_for_bundle, grid_for_bundle, load_result, run_sweep, train_fold,
    write_edge_csv, HarnessError,
};
use resofeat::signal::{self, load_bundle, save_bundle, DatasetBundle, Label, SignalError, SynthSpec};
use serde_json::json;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "resofeat", version, about = "Resolution-balanced EEG features and SVM sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic bundle from a JSON spec
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Import CSV recordings (rows = time, columns = channels) into a bundle
    ImportCsv {
        #[arg(long)]
        fs: f64,
        #[arg(long)]
        subject: String,
        #[arg(long)]
        label: u8,
        /// Bundle name when creating a new bundle
        #[arg(long, default_value = "imported")]
        name: String,
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Output bundle; samples are appended when it already exists
        #[arg(long)]
        out: PathBuf,
    },
    /// Block-mean decimation of every sample
    Decimate {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        factor: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cut every sample into non-overlapping windows
    Partition {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        window_seconds: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate every feasible resolution configuration
    Sweep {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value_t = 60)]
        budget: usize,
        #[arg(long, default_value_t = 45.0)]
        fmax: f64,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads (default: all cores)
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the triangle-edge accuracy curve from a sweep
    Edge {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate a single configuration
    Eval {
        #[arg(long)]
        bundle: PathBuf,
        /// Feature counts as F,T,G
        #[arg(long)]
        config: String,
        #[arg(long, default_value_t = 45.0)]
        fmax: f64,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write per-fold adjacency, eigenvalues and clusters as JSON
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        /// Write per-fold SVM models into this directory
        #[arg(long)]
        models: Option<PathBuf>,
    },
}

enum Failure {
    Input(String),
    Numerical(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<SignalError> for Failure {
    fn from(e: SignalError) -> Self {
        Failure::Input(e.to_string())
    }
}

fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Input(format!("{}: {e}", path.display()))
}

fn parse_triple(s: &str) -> Result<(usize, usize, usize), Failure> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Input(format!("bad --config {s:?}, expected F,T,G")))?;
    match parts[..] {
        [f, t, g] => Ok((f, t, g)),
        _ => Err(Failure::Input(format!("bad --config {s:?}, expected F,T,G"))),
    }
}

fn map_samples(
    bundle: &DatasetBundle,
    step: String,
    f: impl Fn(&signal::SignalSample) -> Result<Vec<signal::SignalSample>, SignalError>,
) -> Result<DatasetBundle, Failure> {
    let mut out = DatasetBundle::new(bundle.name.clone(), bundle.channel_names.clone());
    out.provenance = bundle.provenance.clone();
    out.provenance.push(step);
    for s in &bundle.samples {
        out.samples.extend(f(s)?);
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth { spec, out } => {
            let text = std::fs::read_to_string(&spec).map_err(io_err(&spec))?;
            let spec: SynthSpec =
                serde_json::from_str(&text).map_err(|e| Failure::Input(format!("synth spec: {e}")))?;
            let bundle = signal::synthesize(&spec)?;
            save_bundle(&bundle, &out)?;
            println!("wrote {} samples to {}", bundle.samples.len(), out.display());
        }
        Command::ImportCsv { fs, subject, label, name, files, out } => {
            let label = Label::try_from(label)?;
            let mut bundle = if out.join(signal::MANIFEST_FILE).is_file() {
                Some(load_bundle(&out)?)
            } else {
                None
            };
            for file in &files {
                let (names, sample) = signal::import_csv(file, fs, &subject, label)?;
                let b = bundle.get_or_insert_with(|| DatasetBundle::new(name.clone(), names.clone()));
                if b.channel_names != names {
                    return Err(Failure::Input(format!("{}: channel names differ from bundle", file.display())));
                }
                b.samples.push(sample);
            }
            let bundle = bundle.expect("at least one file");
            save_bundle(&bundle, &out)?;
            println!("bundle {} now holds {} samples", out.display(), bundle.samples.len());
        }
        Command::Decimate { bundle, factor, out } => {
            let b = load_bundle(&bundle)?;
            let d = map_samples(&b, format!("decimate:block-mean:{factor}"), |s| Ok(vec![signal::decimate(s, factor)?]))?;
            save_bundle(&d, &out)?;
        }
        Command::Partition { bundle, window_seconds, out } => {
            let b = load_bundle(&bundle)?;
            let p = map_samples(&b, format!("partition:{window_seconds}s"), |s| signal::partition(s, window_seconds))?;
            save_bundle(&p, &out)?;
            println!("{} samples → {} windows", b.samples.len(), p.samples.len());
        }
        Command::Sweep { bundle, budget, fmax, folds, seed, threads, out } => {
            let b = load_bundle(&bundle)?;
            let grid = grid_for_bundle(&b, budget, fmax)?;
            let fold_spec = folds_for_bundle(&b, folds, seed)?;
            let mut result = run_sweep(&b, &grid, &fold_spec, threads)?;
            let mut flags = BTreeMap::new();
            flags.insert("bundle".into(), bundle.display().to_string());
            flags.insert("budget".into(), budget.to_string());
            flags.insert("fmax".into(), fmax.to_string());
            flags.insert("folds".into(), folds.to_string());
            flags.insert("seed".into(), seed.to_string());
            flags.insert("threads".into(), threads.map_or("auto".into(), |t| t.to_string()));
            flags.insert("out".into(), out.display().to_string());
            result.metadata.flags = flags;
            export_report(&result, &out)?;
            let failed = result.results.iter().filter(|r| r.mean_accuracy.is_none()).count();
            println!("{} configurations evaluated, {failed} failed; report in {}", result.results.len(), out.display());
            if failed == result.results.len() {
                return Err(Failure::Numerical("every configuration failed".into()));
            }
        }
        Command::Edge { result, out } => {
            let r = load_result(&result)?;
            write_edge_csv(&edge_traversal(&r), &out)?;
        }
        Command::Eval { bundle, config, fmax, folds, seed, diagnostics, models } => {
            let b = load_bundle(&bundle)?;
            let (f, t, g) = parse_triple(&config)?;
            let cfg = FeatureConfig::new(f, t, g, fmax).map_err(|e| Failure::Input(e.to_string()))?;
            let fold_spec = folds_for_bundle(&b, folds, seed)?;
            let acc = resofeat::harness::evaluate_config(&b, &cfg, &fold_spec)?;
            for (k, a) in acc.iter().enumerate() {
                println!("fold {k}: {a:.6}");
            }
            println!("mean: {:.6}", acc.iter().sum::<f64>() / acc.len() as f64);

            if diagnostics.is_some() || models.is_some() {
                let mut records = Vec::new();
                if let Some(dir) = &models {
                    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
                }
                for k in 0..fold_spec.k {
                    let m = train_fold(&b, &cfg, &fold_spec, k)?;
                    let adj: Vec<Vec<f64>> = m.graph.adjacency.values.outer_iter().map(|r| r.to_vec()).collect();
                    records.push(json!({
                        "fold": k,
                        "adjacency": adj,
                        "eigenvalues": m.graph.embedding.eigenvalues,
                        "clusters": m.graph.clusters.group_index,
                        "gamma": m.svm.params.gamma,
                    }));
                    if let Some(dir) = &models {
                        let path = dir.join(format!("fold_{k}.json"));
                        std::fs::write(&path, m.svm.to_json()).map_err(io_err(&path))?;
                    }
                }
                if let Some(path) = &diagnostics {
                    let text = serde_json::to_string_pretty(&json!({ "config": [f, t, g], "folds": records }))
                        .map_err(|e| Failure::Input(e.to_string()))?;
                    std::fs::write(path, text).map_err(io_err(path))?;
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
    }
}
