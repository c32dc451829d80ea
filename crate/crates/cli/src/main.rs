use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use reloc_core::io;
use reloc_core::pipeline::{
    evaluate, load_queries, localize, simulate, sweep_csv, sweep_references, LocalizationRecord, PipelineConfig,
    Preset, QueryRecord, SimulationConfig, QUERIES_DIR,
};
use reloc_core::retrieval::{retrieve_references, SceneDb};
use reloc_core::scene::{sample_training_pairs, PairConstraints, PairSampling, SamplingMode};

#[derive(Parser)]
#[command(name = "reloc", version, about = "Relative-pose relocalization on synthetic scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Dense,
    Sparse,
}

impl From<Mode> for SamplingMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Dense => SamplingMode::Dense,
            Mode::Sparse => SamplingMode::Sparse,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Corners4,
}

/// Pipeline configuration: a config file plus per-run retrieval overrides.
#[derive(Args)]
struct PipelineArgs {
    /// Flat `key = value` config file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of references to retrieve.
    #[arg(long)]
    k: Option<usize>,
    /// Minimum spacing between retrieved reference centers, meters.
    #[arg(long)]
    min_spacing: Option<f64>,
    /// Maximum spacing between retrieved reference centers, meters.
    #[arg(long)]
    max_spacing: Option<f64>,
}

impl PipelineArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                PipelineConfig::parse(&text)?
            }
            None => PipelineConfig::default(),
        };
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(v) = self.min_spacing {
            cfg.d_lo = v;
        }
        if let Some(v) = self.max_spacing {
            cfg.d_hi = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene with reference and query images.
    Simulate {
        #[arg(long)]
        scene_seed: u64,
        /// Randomly sampled references, added after any preset.
        #[arg(long)]
        n_refs: usize,
        #[arg(long)]
        n_queries: usize,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rejection-sample training pairs from the reference poses of a dataset.
    SamplePairs {
        #[arg(long, value_enum)]
        constraints: Mode,
        #[arg(long)]
        m: usize,
        /// Directory written by `simulate`.
        #[arg(long)]
        data: PathBuf,
        /// Pose file to draw from instead of the dataset references.
        #[arg(long)]
        poses: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the references retrieved for a query.
    Retrieve {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        query: String,
        /// Query directory; defaults to `queries/` next to the database.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Localize one query (or all with no `--query`); prints JSON lines.
    Localize {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        query: Option<String>,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Localize every query and write a JSON report.
    Evaluate {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Median errors for growing reference subsets, as CSV.
    Sweep {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// Comma separated reference counts.
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<usize>,
        /// Leading database entries kept in every subset (4 for a corners4 dataset).
        #[arg(long, default_value_t = 0)]
        pinned: usize,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn query_dir(db: &Path, queries: Option<&Path>) -> PathBuf {
    queries
        .map(Path::to_path_buf)
        .unwrap_or_else(|| db.join("..").join(QUERIES_DIR))
}

fn find_query(queries: &[QueryRecord], id: &str) -> Result<QueryRecord> {
    queries
        .iter()
        .find(|q| q.image_id == id)
        .cloned()
        .with_context(|| format!("no query {id:?}"))
}

fn run_localize(db: &SceneDb, queries: &[QueryRecord], cfg: &PipelineConfig) -> Result<bool> {
    let mut ok = true;
    let mut stdout = std::io::stdout().lock();
    for q in queries {
        let line = match localize(db, q, cfg) {
            Ok(l) => serde_json::to_string(&LocalizationRecord::from(&l))?,
            Err(e) => {
                ok = false;
                serde_json::json!({ "query_id": q.image_id, "failure": e.to_string() }).to_string()
            }
        };
        writeln!(stdout, "{line}")?;
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate {
            scene_seed,
            n_refs,
            n_queries,
            mode,
            preset,
            out,
        } => {
            let mut cfg = SimulationConfig::new(scene_seed, n_refs, n_queries, mode.into());
            cfg.preset = preset.map(|PresetArg::Corners4| Preset::Corners4);
            if cfg.preset.is_none() && n_refs == 0 {
                bail!("need at least one reference (--n-refs or --preset)");
            }
            let ds = simulate(&cfg)?;
            ds.write(&out)?;
            eprintln!(
                "wrote {} references and {} queries to {}",
                ds.references.len(),
                ds.queries.len(),
                out.display()
            );
        }
        Command::SamplePairs {
            constraints,
            m,
            data,
            poses,
            seed,
            out,
        } => {
            let scene = io::read_scene(&data.join(io::SCENE_FILE))?;
            let db_dir = data.join(reloc_core::pipeline::DB_DIR);
            let intrinsics = io::read_intrinsics(&db_dir.join(io::INTRINSICS_FILE))?;
            let records = io::read_poses(&poses.unwrap_or_else(|| db_dir.join(io::POSES_FILE)))?;
            let pose_list: Vec<_> = records.iter().map(|(_, p)| *p).collect();
            let c = match constraints {
                Mode::Dense => PairConstraints::dense(),
                Mode::Sparse => PairConstraints::sparse(),
            };
            let sampling = PairSampling {
                intrinsics,
                ..PairSampling::new(c, seed)
            };
            let (pairs, complete) = match sample_training_pairs(&scene, &pose_list, &sampling, m) {
                Ok(p) => (p, true),
                Err(reloc_core::Error::BudgetExhausted { partial, requested }) => {
                    eprintln!("attempt budget exhausted: {} of {requested} pairs", partial.len());
                    (partial, false)
                }
                Err(e) => return Err(e.into()),
            };
            let text: String = pairs
                .iter()
                .map(|&(i, j)| format!("{} {}\n", records[i].0, records[j].0))
                .collect();
            write_output(out.as_deref(), &text)?;
            return Ok(complete);
        }
        Command::Retrieve {
            db,
            query,
            queries,
            pipeline,
        } => {
            let cfg = pipeline.load()?;
            let database = io::load_db(&db)?;
            let q = find_query(&load_queries(&query_dir(&db, queries.as_deref()))?, &query)?;
            for i in retrieve_references(&database, &q.descriptor, &cfg.retrieval())? {
                println!("{}", database.entries()[i].image_id);
            }
        }
        Command::Localize {
            db,
            query,
            queries,
            pipeline,
        } => {
            let cfg = pipeline.load()?;
            let database = io::load_db(&db)?;
            let all = load_queries(&query_dir(&db, queries.as_deref()))?;
            let selected = match query {
                Some(id) => vec![find_query(&all, &id)?],
                None => all,
            };
            return run_localize(&database, &selected, &cfg);
        }
        Command::Evaluate {
            db,
            queries,
            pipeline,
            out,
        } => {
            let cfg = pipeline.load()?;
            let report = evaluate(&io::load_db(&db)?, &load_queries(&queries)?, &cfg)?;
            write_output(Some(&out), &report.to_json()?)?;
            let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
            eprintln!(
                "median translation {} m, median rotation {} deg, {} failures of {}",
                fmt(report.median_translation),
                fmt(report.median_rotation),
                report.failure_count,
                report.per_query.len()
            );
        }
        Command::Sweep {
            db,
            queries,
            counts,
            pinned,
            pipeline,
            out,
        } => {
            let cfg = pipeline.load()?;
            let rows = sweep_references(&io::load_db(&db)?, &load_queries(&queries)?, &cfg, &counts, pinned)?;
            write_output(out.as_deref(), &sweep_csv(&rows))?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
