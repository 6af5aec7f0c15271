use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use mailintent::baselines::{train_method, Method};
use mailintent::corpus::{generate_synthetic, read_corpus_dir, read_records, write_corpus, write_records, Intent};
use mailintent::diffkit::save_checkpoint;
use mailintent::experiment::{
    cell_dataset, dataset_vocabulary, emit_report, load_inputs, run_sweep, run_transfer_spec, CorpusSource,
    ExperimentSpec, Manifest, RunRecord, TransferSpec, CONFIG_KEYS, STANDARD,
};
use mailintent::weaklabel::{audit_sample, evaluate_labeling, label_intent, WeakLabelAssignment};

#[derive(Parser)]
#[command(name = "mailintent", version, about = "Weakly supervised email intent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus directory.
    Generate {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the labeling functions to a corpus.
    WeakLabel {
        #[arg(long)]
        corpus: PathBuf,
        /// Restrict to one intent; all three by default.
        #[arg(long)]
        intent: Option<Intent>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure weak-label accuracy against gold on a balanced sample.
    AuditLabels {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        weak: PathBuf,
        #[arg(long)]
        intent: Intent,
        /// Weak positives (and negatives) in the sample.
        #[arg(long, default_value_t = 500)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the clean, weak, dev and test splits of the first grid cell.
    BuildDataset {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one method on the first grid cell.
    Train {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every cell of the grid.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Domain A clean data with domain B weak labels.
    Transfer {
        #[command(flatten)]
        spec: SpecArgs,
        /// Domain B override `key=value`, using the corpus keys without the `corpus.` prefix.
        #[arg(long = "domain-b", value_name = "KEY=VALUE")]
        domain_b: Vec<String>,
        /// Clean examples of the tiny-clean control.
        #[arg(long)]
        tiny_clean: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild the report files from a records file.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the configuration keys.
    Keys,
}

/// Experiment settings: benchmark preset, then the config file, then flags.
#[derive(Args, Clone, Debug, Default)]
struct SpecArgs {
    /// Key-value config file (TOML; tables name dotted keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rerun exactly the spec recorded in a manifest.
    #[arg(long, conflicts_with = "config")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    intent: Option<String>,
    #[arg(long)]
    encoder: Option<String>,
    /// Comma-separated method names.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated clean ratios.
    #[arg(long)]
    clean_ratios: Option<String>,
    #[arg(long)]
    weak_size: Option<String>,
    /// Comma-separated weak fractions.
    #[arg(long)]
    weak_fractions: Option<String>,
    /// `1,2,3` or `1..=5`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    jobs: Option<String>,
    #[arg(long)]
    corpus_dir: Option<String>,
    #[arg(long)]
    weak_labels: Option<String>,
    /// Any configuration key, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn toml_scalar(v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(a) => a.iter().map(toml_scalar).collect::<Result<Vec<_>>>()?.join(","),
        other => bail!("unsupported config value {other}"),
    })
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, String)>) -> Result<()> {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out)?,
            other => out.push((key, toml_scalar(other)?)),
        }
    }
    Ok(())
}

/// Reads a config file into ordered `key=value` pairs.
fn read_config(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
    let mut out = Vec::new();
    flatten("", &table, &mut out)?;
    Ok(out)
}

fn split_pair(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .with_context(|| format!("expected key=value, got {s:?}"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl SpecArgs {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut pairs = match &self.config {
            Some(p) => read_config(p)?,
            None => Vec::new(),
        };
        for (key, value) in [
            ("intent", &self.intent),
            ("encoder", &self.encoder),
            ("methods", &self.methods),
            ("clean_ratios", &self.clean_ratios),
            ("weak_size", &self.weak_size),
            ("weak_fractions", &self.weak_fractions),
            ("seeds", &self.seeds),
            ("jobs", &self.jobs),
            ("corpus_dir", &self.corpus_dir),
            ("weak_labels", &self.weak_labels),
        ] {
            if let Some(v) = value {
                pairs.push((key.to_string(), v.clone()));
            }
        }
        for s in &self.set {
            pairs.push(split_pair(s)?);
        }
        Ok(pairs)
    }

    fn has_overrides(&self) -> Result<bool> {
        Ok(!self.overrides()?.is_empty())
    }

    fn experiment(&self) -> Result<ExperimentSpec> {
        if let Some(path) = &self.manifest {
            if self.has_overrides()? {
                bail!("--manifest cannot be combined with other settings");
            }
            let m = Manifest::load(path)?;
            m.verify()?;
            return Ok(m.spec);
        }
        let mut spec = ExperimentSpec::benchmark();
        for (k, v) in self.overrides()? {
            spec.set(&k, &v).with_context(|| format!("setting {k}"))?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_outputs(out: &Path, manifest: &Manifest, records: &[RunRecord]) -> Result<bool> {
    create_dir(out)?;
    manifest.save(&out.join("manifest.json"))?;
    write_records(&out.join("records.jsonl"), records)?;
    let files = emit_report(records, out)?;
    print!("{}", std::fs::read_to_string(&files.summary)?);
    Ok(records.iter().all(RunRecord::succeeded))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate { spec, out } => {
            let spec = spec.experiment()?;
            let CorpusSource::Synthetic(s) = &spec.corpus else {
                bail!("generate needs synthetic corpus settings, not corpus_dir");
            };
            let corpus = generate_synthetic(s)?;
            write_corpus(&out, &corpus)?;
            info!("wrote {} messages to {}", corpus.len(), out.display());
            Ok(true)
        }
        Command::WeakLabel { corpus, intent, out } => {
            let corpus = read_corpus_dir(&corpus)?;
            let intents = intent.map_or(Intent::ALL.to_vec(), |i| vec![i]);
            let labels: Vec<WeakLabelAssignment> = intents.into_iter().flat_map(|i| label_intent(&corpus, i)).collect();
            write_records(&out, &labels)?;
            info!("wrote {} assignments to {}", labels.len(), out.display());
            Ok(true)
        }
        Command::AuditLabels {
            corpus,
            weak,
            intent,
            per_class,
            seed,
        } => {
            let corpus = read_corpus_dir(&corpus)?;
            let gold = corpus.gold().context("corpus has no gold labels")?;
            let all: Vec<WeakLabelAssignment> = read_records(&weak)?;
            let mine: Vec<WeakLabelAssignment> = all.into_iter().filter(|a| a.intent == intent).collect();
            let sample = audit_sample(&mine, gold, per_class, seed);
            let report = evaluate_labeling(&sample, gold)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Command::BuildDataset { spec, out } => {
            let spec = spec.experiment()?;
            let inputs = load_inputs(&spec.corpus, spec.intent)?;
            let ds = cell_dataset(&inputs, &spec, spec.clean_ratios[0], spec.weak_fractions[0])?;
            create_dir(&out)?;
            write_records(&out.join("clean.jsonl"), ds.clean())?;
            write_records(&out.join("weak.jsonl"), ds.weak())?;
            write_records(&out.join("dev.jsonl"), ds.dev())?;
            write_records(&out.join("test.jsonl"), ds.test())?;
            println!(
                "clean {} weak {} dev {} test {}",
                ds.clean_len(),
                ds.weak_len(),
                ds.dev().len(),
                ds.test().len()
            );
            Ok(true)
        }
        Command::Train { spec, method, out } => {
            let mut spec = spec.experiment()?;
            spec.methods = vec![method];
            spec.clean_ratios.truncate(1);
            spec.weak_fractions.truncate(1);
            let manifest = Manifest::new(&spec)?;
            let inputs = load_inputs(&spec.corpus, spec.intent)?;
            let ds = cell_dataset(&inputs, &spec, spec.clean_ratios[0], spec.weak_fractions[0])?;
            let vocab = dataset_vocabulary(&ds);
            create_dir(&out)?;
            vocab.save(&out.join("vocab.txt"))?;
            let mut records = Vec::new();
            for &seed in &spec.seeds {
                let mut rec = RunRecord {
                    kind: method.name().to_string(),
                    setting: STANDARD.to_string(),
                    encoder: spec.encoder,
                    intent: spec.intent,
                    clean_ratio: spec.clean_ratios[0],
                    weak_fraction: spec.weak_fractions[0],
                    clean_count: ds.clean_len(),
                    weak_count: ds.weak_len(),
                    seed,
                    dev_acc: None,
                    test_acc: None,
                    alpha: None,
                    weak_label_acc: None,
                    corrected_label_acc: None,
                    error: None,
                };
                match train_method(method, &ds, &vocab, &spec.method_config(), seed) {
                    Ok(o) => {
                        save_checkpoint(&out.join(format!("model-seed{seed}.json")), &o.model)?;
                        rec.dev_acc = Some(o.dev_accuracy);
                        rec.test_acc = Some(o.test_accuracy);
                        rec.alpha = o.alpha;
                        rec.weak_label_acc = o.weak_label_accuracy;
                        rec.corrected_label_acc = o.corrected_label_accuracy;
                    }
                    Err(e) => {
                        log::error!("seed {seed}: {e}");
                        rec.error = Some(e.to_string());
                    }
                }
                records.push(rec);
            }
            write_outputs(&out, &manifest, &records)
        }
        Command::Sweep { spec, out } => {
            let spec = spec.experiment()?;
            let manifest = Manifest::new(&spec)?;
            let inputs = load_inputs(&spec.corpus, spec.intent)?;
            let records = run_sweep(&spec, &inputs)?;
            write_outputs(&out, &manifest, &records)
        }
        Command::Transfer {
            spec,
            domain_b,
            tiny_clean,
            out,
        } => {
            let base = spec.experiment()?;
            let mut t = TransferSpec {
                base: base.clone(),
                ..TransferSpec::benchmark()
            };
            if let Some(n) = tiny_clean {
                t.tiny_clean = n;
            }
            let mut b = base.clone();
            b.corpus = t.domain_b.clone();
            for s in &domain_b {
                let (k, v) = split_pair(s)?;
                let key = if k == "corpus_dir" || k == "weak_labels" {
                    k
                } else {
                    format!("corpus.{k}")
                };
                b.set(&key, &v).with_context(|| format!("setting domain B {key}"))?;
            }
            t.domain_b = b.corpus;
            let manifest = Manifest::new(&t.base)?;
            let (metrics, records) = run_transfer_spec(&t)?;
            create_dir(&out)?;
            std::fs::write(out.join("transfer.json"), serde_json::to_string_pretty(&t)? + "\n")?;
            println!(
                "combined {:.4}  clean-only {:.4}  tiny-clean {:.4}  zero-shot {:.4}",
                metrics.mean_combined(),
                metrics.mean_clean_only(),
                metrics.mean_tiny_clean(),
                metrics.mean_zero_shot()
            );
            write_outputs(&out, &manifest, &records)
        }
        Command::Report { records, out } => {
            let records: Vec<RunRecord> = read_records(&records)?;
            let files = emit_report(&records, &out)?;
            print!("{}", std::fs::read_to_string(&files.summary)?);
            Ok(records.iter().all(RunRecord::succeeded))
        }
        Command::Keys => {
            let width = CONFIG_KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            let by_key: BTreeMap<&str, &str> = CONFIG_KEYS.iter().copied().collect();
            for (k, doc) in by_key {
                println!("{k:<width$}  {doc}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some cells failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
