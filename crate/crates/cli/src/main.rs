use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use ces_core::pdb::{pdb_from_json_with_limits, Limits, Pdb, DEFAULT_MAX_ENDOGENOUS};
use ces_core::query::{parse_query, parse_query_text, Backend, Query};
use ces_core::scores::ScoreKind;

mod commands;

#[derive(Parser)]
#[command(name = "ces", version, about = "Exact attribution scores for query answers over probabilistic databases")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,

    /// Cap on free endogenous tuples for exhaustive enumeration.
    #[arg(long, global = true, env = "CES_MAX_WORLDS", default_value_t = DEFAULT_MAX_ENDOGENOUS)]
    max_endogenous: usize,

    /// Worker threads; the output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Auto,
    Brute,
    Lifted,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Auto => Backend::Auto,
            BackendArg::Brute => Backend::Brute,
            BackendArg::Lifted => Backend::Lifted,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a PDB document: total mass, exogenous tuples, marginals.
    Validate {
        #[arg(long)]
        pdb: PathBuf,
    },
    /// Probability of a Boolean query, or expectation of an aggregate.
    Prob {
        #[arg(long)]
        pdb: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
        backend: BackendArg,
    },
    /// Score endogenous tuples.
    Score {
        #[arg(long)]
        pdb: PathBuf,
        #[arg(long)]
        query: PathBuf,
        /// gces, ces-tid, ces-ui, shapley, banzhaf, power, weighted-power.
        #[arg(long, default_value = "gces")]
        kind: ScoreKind,
        /// Restrict to these tuples (repeatable).
        #[arg(long = "tuple")]
        tuples: Vec<String>,
        /// Score the given tuples as one intervention set (gces and ces-tid).
        #[arg(long)]
        joint: bool,
        #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
        backend: BackendArg,
    },
    /// Ranking of endogenous tuples by score.
    Rank {
        #[arg(long)]
        pdb: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long, default_value = "gces")]
        kind: ScoreKind,
        #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
        backend: BackendArg,
    },
    /// Apply do(T in) / do(T out) and show the intervened space.
    Intervene {
        #[arg(long)]
        pdb: PathBuf,
        /// Tuples forced in (repeatable).
        #[arg(long = "in")]
        force_in: Vec<String>,
        /// Tuples forced out (repeatable).
        #[arg(long = "out")]
        force_out: Vec<String>,
        /// Also evaluate this query under the intervention.
        #[arg(long)]
        query: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
        backend: BackendArg,
    },
    /// Classify a BCQ: PTIME (hierarchical) or #P-hard on TIDs.
    Dichotomy {
        #[arg(long)]
        query: PathBuf,
        /// Optional PDB whose schema the query is checked against.
        #[arg(long)]
        pdb: Option<PathBuf>,
    },
    /// Check score axioms, the component product identity and the
    /// minimal-set decomposition.
    Axioms {
        #[arg(long)]
        pdb: PathBuf,
        #[arg(long)]
        query: PathBuf,
        /// Second query for the linearity check.
        #[arg(long)]
        other: Option<PathBuf>,
        /// gces, ces-ui, banzhaf or shapley.
        #[arg(long, default_value = "gces")]
        score: String,
    },
    /// Compare every way of computing the causal effect of one tuple.
    OracleCompare {
        #[arg(long)]
        pdb: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long = "tuple")]
        tuple: String,
    },
}

pub struct Inputs {
    pub pdb: Arc<Pdb>,
    pub query: Query,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_pdb(path: &Path, limits: Limits) -> Result<Pdb> {
    Ok(pdb_from_json_with_limits(&read(path)?, limits)?)
}

fn load_query(path: &Path, pdb: &Pdb) -> Result<Query> {
    Ok(parse_query(&read(path)?, pdb.instance().schema())?)
}

fn inputs(pdb: &Path, query: &Path, limits: Limits) -> Result<Inputs> {
    let pdb = load_pdb(pdb, limits)?;
    let query = load_query(query, &pdb)?;
    Ok(Inputs {
        pdb: Arc::new(pdb),
        query,
    })
}

/// A rendered command result; `ok = false` maps to exit status 1.
pub struct Report {
    pub text: String,
    pub json: serde_json::Value,
    pub ok: bool,
}

fn run(cli: &Cli) -> Result<Report> {
    let limits = Limits {
        max_endogenous: cli.max_endogenous,
    };
    match &cli.command {
        Command::Validate { pdb } => Ok(commands::validate(&load_pdb(pdb, limits)?)),
        Command::Prob { pdb, query, backend } => commands::prob(&inputs(pdb, query, limits)?, (*backend).into()),
        Command::Score {
            pdb,
            query,
            kind,
            tuples,
            joint,
            backend,
        } => commands::score(&inputs(pdb, query, limits)?, *kind, tuples, *joint, (*backend).into()),
        Command::Rank { pdb, query, kind, backend } => commands::rank(&inputs(pdb, query, limits)?, *kind, (*backend).into()),
        Command::Intervene {
            pdb,
            force_in,
            force_out,
            query,
            backend,
        } => {
            let pdb = load_pdb(pdb, limits)?;
            let query = query.as_deref().map(|q| load_query(q, &pdb)).transpose()?;
            commands::intervene(&pdb, force_in, force_out, query.as_ref(), (*backend).into())
        }
        Command::Dichotomy { query, pdb } => {
            let text = read(query)?;
            let query = match pdb {
                Some(p) => parse_query(&text, load_pdb(p, limits)?.instance().schema())?,
                None => parse_query_text(&text)?,
            };
            commands::dichotomy(&query)
        }
        Command::Axioms { pdb, query, other, score } => {
            let inp = inputs(pdb, query, limits)?;
            let other = other.as_deref().map(|o| load_query(o, &inp.pdb)).transpose()?;
            commands::axioms(&inp, other.as_ref(), score)
        }
        Command::OracleCompare { pdb, query, tuple } => commands::oracle_compare(&inputs(pdb, query, limits)?, tuple),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<ces_core::Error>() {
        Some(e) if !e.is_input() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(report) => {
            match cli.format {
                Format::Table => print!("{}", report.text),
                Format::Json => println!("{}", serde_json::to_string_pretty(&report.json).expect("json values serialize")),
            }
            if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
