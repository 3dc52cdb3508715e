//! Command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use hyprank_core::{Error, Result};
use hyprank_datagen::generate::derive_seed;
use hyprank_datagen::io::{load_dataset, read_text, save_dataset, write_text, Dataset};
use hyprank_datagen::{generate_catalog, generate_utterances, SplitKind};

use crate::config::RunConfig;
use crate::eval::eval_final_accuracy;
use crate::pipeline::{
    build_vocabs, load_tables, pretrain_tables, save_curve, save_tables, train_hyprank, train_shortlister, RerankerModel,
    ShortlisterModel, LABELS_FILE,
};
use crate::report::{format_jsonl, format_table, from_json, to_json};

pub const EVAL_FILE: &str = "eval.json";
pub const EVAL_JSONL_FILE: &str = "eval.jsonl";
pub const CONFIG_FILE: &str = "run.toml";

#[derive(Parser, Debug)]
#[command(name = "hyprank", version, about = "Shortlister + hypothesis reranker domain classification pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override a setting, e.g. `--set shortlister.epochs=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Dataset directory (overrides `data_dir`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Artifact directory (overrides `out_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct Seeded {
    #[command(flatten)]
    pub common: Common,
    /// Random seed; required so every run is reproducible.
    #[arg(long)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic catalog and the five splits into the data directory.
    GenData(Seeded),
    /// Pre-train domain, intent and slot label embeddings.
    PretrainEmbeddings(Seeded),
    /// Train the shortlister with early stopping on sl_dev.
    TrainShortlister(Seeded),
    /// Train the configured rerankers on the frozen shortlister's k-best lists.
    TrainHyprank(Seeded),
    /// Evaluate the shortlister and rerankers on the test split.
    Eval(Common),
    /// Print a saved evaluation report.
    Report {
        #[command(flatten)]
        common: Common,
        /// Print JSON lines instead of the text table.
        #[arg(long)]
        jsonl: bool,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut config = RunConfig::load(common.config.as_deref(), &common.overrides)?;
    if let Some(d) = &common.data {
        config.data_dir = d.clone();
    }
    if let Some(o) = &common.out {
        config.out_dir = o.clone();
    }
    Ok(config)
}

fn record_config(config: &RunConfig) -> Result<()> {
    write_text(&config.out_dir.join(CONFIG_FILE), &config.to_toml()?)
}

pub fn gen_data(config: &RunConfig, seed: u64) -> Result<Dataset> {
    let catalog = generate_catalog(&config.generator, seed)?;
    let splits = generate_utterances(&catalog, &config.generator.sizes, derive_seed(seed, &[b"utterances"]))?;
    let data = Dataset { catalog, splits };
    save_dataset(&config.data_dir, &data)?;
    Ok(data)
}

pub fn pretrain(config: &RunConfig, seed: u64) -> Result<()> {
    let data = load_dataset(&config.data_dir)?;
    let (_, words) = build_vocabs(&data.splits.sl_train);
    let tables = pretrain_tables(&config.pretrain, &data.catalog, &data.splits.sl_train, &words, seed)?;
    save_tables(&config.out_dir.join(LABELS_FILE), &tables)
}

pub fn shortlister(config: &RunConfig, seed: u64) -> Result<ShortlisterModel> {
    let data = load_dataset(&config.data_dir)?;
    let (model, curve) = train_shortlister(&config.shortlister, &data, seed)?;
    model.save(&config.out_dir)?;
    save_curve(&config.out_dir.join("shortlister.curve.jsonl"), &curve)?;
    record_config(config)?;
    Ok(model)
}

pub fn hyprank(config: &RunConfig, seed: u64) -> Result<Vec<RerankerModel>> {
    let data = load_dataset(&config.data_dir)?;
    let sl = ShortlisterModel::load(&config.out_dir)?;
    let tables = load_tables(&config.out_dir.join(LABELS_FILE))?;
    let trained = train_hyprank(&config.hyprank, &sl, &data, &tables, seed)?;
    let mut models = Vec::new();
    for (kind, (model, curve)) in trained {
        model.save(&config.out_dir)?;
        save_curve(&config.out_dir.join(format!("hyprank_{}.curve.jsonl", kind.name())), &curve)?;
        models.push(model);
    }
    Ok(models)
}

pub fn evaluate(config: &RunConfig) -> Result<crate::eval::EvalReport> {
    let data = load_dataset(&config.data_dir)?;
    let sl = ShortlisterModel::load(&config.out_dir)?;
    let tables = load_tables(&config.out_dir.join(LABELS_FILE))?;
    let rerankers = config
        .hyprank
        .kinds()?
        .into_iter()
        .map(|k| RerankerModel::load(&config.out_dir, k))
        .collect::<Result<Vec<_>>>()?;
    let test = data.splits.get(SplitKind::Test);
    let report = eval_final_accuracy(&sl, &rerankers, &data.catalog, &tables, test, config.hyprank.k, &config.eval.ks)?;
    write_text(&config.out_dir.join(EVAL_FILE), &to_json(&report)?)?;
    write_text(&config.out_dir.join(EVAL_JSONL_FILE), &format_jsonl(&report)?)?;
    Ok(report)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => {
            let config = load_config(&a.common)?;
            let data = gen_data(&config, a.seed)?;
            let sizes: Vec<String> =
                SplitKind::ALL.iter().map(|&k| format!("{} {}", k.name(), data.splits.get(k).len())).collect();
            println!(
                "wrote {} domains ({} overlap groups) and {} to {}",
                data.catalog.n_domains(),
                data.catalog.overlap_groups.len(),
                sizes.join(", "),
                config.data_dir.display()
            );
        }
        Command::PretrainEmbeddings(a) => {
            let config = load_config(&a.common)?;
            pretrain(&config, a.seed)?;
            println!("wrote {}", config.out_dir.join(LABELS_FILE).display());
        }
        Command::TrainShortlister(a) => {
            let config = load_config(&a.common)?;
            shortlister(&config, a.seed)?;
            println!("wrote shortlister to {}", config.out_dir.display());
        }
        Command::TrainHyprank(a) => {
            let config = load_config(&a.common)?;
            let models = hyprank(&config, a.seed)?;
            let names: Vec<&str> = models.iter().map(|m| m.kind.name()).collect();
            println!("wrote {} to {}", names.join(", "), config.out_dir.display());
        }
        Command::Eval(common) => {
            let config = load_config(&common)?;
            print!("{}", format_table(&evaluate(&config)?));
        }
        Command::Report { common, jsonl } => {
            let config = load_config(&common)?;
            let report = from_json(&read_text(&config.out_dir.join(EVAL_FILE))?)?;
            if jsonl {
                print!("{}", format_jsonl(&report)?);
            } else {
                print!("{}", format_table(&report));
            }
        }
    }
    Ok(())
}

/// Error used when a subcommand needs an artifact that is absent.
pub fn missing(what: &str) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, what.to_string()))
}
