//! Command-line pipeline: `oracle`, `mine` and `eval`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::evaluator::{evaluate, oracle_answers};
use crate::explorer::{mine_corpus, LabelSet, SearchConfig};
use crate::question::{check_tables, load_questions, write_questions, QuestionRecord};
use crate::rules::RuleSet;
use crate::table::{load_tables, TableMap};

#[derive(Debug, Parser)]
#[command(
    name = "sqlminer",
    version,
    about = "Mine SQL labels from question/answer pairs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for a SQL label for every question
    Mine(MineArgs),
    /// Score labels against gold SQL
    Eval(EvalArgs),
    /// Fill gold answers by executing gold SQL
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[arg(long)]
    pub tables: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Label JSONL output; the manifest goes to `<out>.manifest.json`
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub max_conds: usize,
    #[arg(long, default_value_t = 100_000)]
    pub budget: u64,
    /// Enabled rules: "all", "none", or a list like "1,2,6,7"
    #[arg(long, default_value = "all")]
    pub rules: RuleSet,
    #[arg(long)]
    pub no_prune: bool,
    /// Keep searching after the first survivor and write all survivors
    #[arg(long)]
    pub keep_all: bool,
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub tables: PathBuf,
    /// Data JSONL with gold sql
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// JSON report output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub tables: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Drop gold sql from the output
    #[arg(long)]
    pub strip_sql: bool,
}

impl MineArgs {
    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            max_conds: self.max_conds,
            budget: self.budget,
            enabled_rules: self.rules,
            pruning: !self.no_prune,
            keep_all_survivors: self.keep_all,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct InputFingerprint {
    pub role: String,
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Sidecar describing how an output file was produced.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: serde_json::Value,
    pub inputs: Vec<InputFingerprint>,
    pub output: String,
    pub created_unix: u64,
}

impl RunManifest {
    fn new(
        command: &'static str,
        config: serde_json::Value,
        inputs: &[(&str, &Path)],
        output: &Path,
    ) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|&(role, path)| fingerprint(role, path))
            .collect::<Result<Vec<_>>>()?;
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            inputs,
            output: output.display().to_string(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        })
    }

    fn write_beside(&self, output: &Path) -> Result<PathBuf> {
        let path = manifest_path(output);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn fingerprint(role: &str, path: &Path) -> Result<InputFingerprint> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(InputFingerprint {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

fn load_inputs(tables: &Path, data: &Path) -> Result<(TableMap, Vec<QuestionRecord>)> {
    let tables =
        load_tables(tables).with_context(|| format!("loading tables from {}", tables.display()))?;
    let records = load_questions(data)
        .with_context(|| format!("loading questions from {}", data.display()))?;
    check_tables(&records, &tables)?;
    Ok((tables, records))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn cmd_mine(args: &MineArgs) -> Result<()> {
    let cfg = args.search_config();
    cfg.validate()?;
    let (tables, records) = load_inputs(&args.tables, &args.data)?;

    // Answer-only supervision: questions without an answer get one from
    // their gold sql, which is then withheld from the search.
    let mut supervised = Vec::with_capacity(records.len());
    for rec in records {
        let rec = if rec.gold_answer.is_some() {
            rec
        } else {
            oracle_answers(std::slice::from_ref(&rec), &tables)
                .remove(0)
                .with_context(|| format!("deriving answer for {}", rec.qid))?
        };
        supervised.push(QuestionRecord {
            gold_sql: None,
            ..rec
        });
    }

    let labels = mine_corpus(&supervised, &tables, &cfg, args.parallel);
    let mut w = create(&args.out)?;
    labels.write_jsonl(&mut w)?;
    w.flush()?;

    let found = labels.labels().count();
    let config = json!({
        "search": cfg,
        "parallel": args.parallel,
    });
    RunManifest::new(
        "mine",
        config,
        &[("tables", &args.tables), ("data", &args.data)],
        &args.out,
    )?
    .write_beside(&args.out)?;
    eprintln!(
        "mined {found}/{} questions -> {}",
        labels.len(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let (tables, records) = load_inputs(&args.tables, &args.data)?;
    let labels = LabelSet::load(&args.labels)
        .with_context(|| format!("loading labels from {}", args.labels.display()))?;
    let report = evaluate(&labels, &records, &tables)?;
    print!("{}", report.render_table());
    if let Some(out) = &args.out {
        let mut w = create(out)?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        w.write_all(b"\n")?;
        w.flush()?;
        RunManifest::new(
            "eval",
            json!({}),
            &[
                ("tables", &args.tables),
                ("data", &args.data),
                ("labels", &args.labels),
            ],
            out,
        )?
        .write_beside(out)?;
    }
    Ok(())
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<()> {
    let tables = load_tables(&args.tables)
        .with_context(|| format!("loading tables from {}", args.tables.display()))?;
    let records = load_questions(&args.data)
        .with_context(|| format!("loading questions from {}", args.data.display()))?;
    let mut ok = Vec::with_capacity(records.len());
    let mut failures = Vec::new();
    for result in oracle_answers(&records, &tables) {
        match result {
            Ok(rec) if args.strip_sql => ok.push(QuestionRecord {
                gold_sql: None,
                ..rec
            }),
            Ok(rec) => ok.push(rec),
            Err(e) => failures.push(e),
        }
    }
    let mut w = create(&args.out)?;
    write_questions(&mut w, &ok)?;
    w.flush()?;
    RunManifest::new(
        "oracle",
        json!({ "strip_sql": args.strip_sql }),
        &[("tables", &args.tables), ("data", &args.data)],
        &args.out,
    )?
    .write_beside(&args.out)?;
    if !failures.is_empty() {
        for e in &failures {
            eprintln!("error: {e}");
        }
        bail!(
            "{} of {} gold queries failed",
            failures.len(),
            records.len()
        );
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Mine(args) => cmd_mine(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Oracle(args) => cmd_oracle(args),
    }
}
