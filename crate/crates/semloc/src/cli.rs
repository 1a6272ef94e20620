//! The `semloc` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format/IO error, 3 numeric
//! failure (divergent training, degenerate embeddings).

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use semloc_core::{
    descriptor_dim, evaluate, generate_dataset, mine_triplets, pyramid_histogram, train, DatasetConfig,
    EmbeddingModel, EvalConfig, EvalError, GeoDatabase, GeoPose, LabelMap, LabeledQuery, MetricError,
    MiningParams, TrainConfig,
};

use crate::dataset::write_dataset;
use crate::formats::database::{load_database, save_database};
use crate::formats::labelmap::load_label_map;
use crate::formats::model::{load_model, save_model};
use crate::formats::report::{emit_report, ReportFormat};
use crate::formats::store::{load_store, save_store, DescriptorStore};
use crate::formats::tables::{load_poses_csv, load_triplets_csv, save_triplets_csv, PoseRecord};
use crate::formats::FormatError;
use crate::fsio::write_atomic;

#[derive(Debug, Parser)]
#[command(name = "semloc", version, about = "Semantic-descriptor place recognition over geotagged label maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic database/query benchmark.
    Synth(SynthArgs),
    /// Turn a directory of label maps into a raw-descriptor store.
    Featurize(FeaturizeArgs),
    /// Mine GPS-radius triplets from a pose table.
    Mine(MineArgs),
    /// Train an embedding on raw descriptors and triplets.
    Train(TrainArgs),
    /// Build a geotagged embedding database.
    Index(IndexArgs),
    /// Localize a single query label map.
    Localize(LocalizeArgs),
    /// Evaluate Top-1 Recall@D and Recall@N over a query set.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// TOML dataset configuration; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FeaturizeArgs {
    /// Directory of `.slm` files; ids are the file stems.
    #[arg(long)]
    maps: PathBuf,
    #[arg(long, default_value_t = semloc_core::descriptor::DEFAULT_LEVELS)]
    levels: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MineArgs {
    #[arg(long)]
    poses: PathBuf,
    /// Positive radius in metres (inclusive).
    #[arg(long, default_value_t = semloc_core::geo::DEFAULT_R_POS_M)]
    rpos: f64,
    /// Minimum negative distance in metres (inclusive).
    #[arg(long, default_value_t = semloc_core::geo::DEFAULT_R_NEG_MIN_M)]
    rneg: f64,
    #[arg(long, default_value_t = 8)]
    per_anchor: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    raw: PathBuf,
    #[arg(long)]
    triplets: PathBuf,
    /// Pose table whose row order the triplet indices refer to; defaults to
    /// the raw store's own order.
    #[arg(long)]
    poses: Option<PathBuf>,
    #[arg(long, default_value_t = semloc_core::metric::DEFAULT_D_OUT)]
    dout: usize,
    #[arg(long, default_value_t = semloc_core::metric::DEFAULT_MARGIN)]
    margin: f64,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IndexArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    raw: PathBuf,
    #[arg(long)]
    poses: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LocalizeArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    query: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Directory holding `<id>.slm` for every row of `--qposes`.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    qposes: PathBuf,
    /// Structured (TOML) report.
    #[arg(long)]
    out: PathBuf,
    /// Plot CSV with the two recall curves.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Comma-separated distance thresholds in metres.
    #[arg(long, value_delimiter = ',', default_values_t = semloc_core::eval::DEFAULT_D_GRID)]
    dgrid: Vec<f64>,
    /// Comma-separated candidate counts.
    #[arg(long, value_delimiter = ',', default_values_t = semloc_core::eval::DEFAULT_N_GRID)]
    ngrid: Vec<usize>,
    /// Well-localized radius in metres.
    #[arg(long, default_value_t = semloc_core::eval::DEFAULT_WELL_LOCALIZED_M)]
    tau: f64,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numeric(m) => m,
        }
    }
}

type Outcome = Result<(), Failure>;

fn metric_failure(context: &str, e: MetricError) -> Failure {
    let msg = format!("{context}: {e}");
    match e {
        MetricError::Config(_) | MetricError::Margin(_) | MetricError::NormEpsilon(_) | MetricError::Shape { .. } => {
            Failure::Usage(msg)
        }
        MetricError::DegenerateNorm { .. }
        | MetricError::NonFiniteProjection
        | MetricError::NoUsableTriplets { .. }
        | MetricError::NonFiniteLoss { .. } => Failure::Numeric(msg),
        _ => Failure::Data(msg),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn decode<T>(path: &Path, f: impl FnOnce(&[u8]) -> Result<T, FormatError>) -> Result<T, Failure> {
    f(&read(path)?).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Outcome {
    write_atomic(path, bytes).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Outcome {
    out.write_fmt(text)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| Failure::Data(format!("stdout: {e}")))
}

/// Pyramid depth implied by a model's input dimension and a map's class count.
fn infer_levels(model: &EmbeddingModel, num_classes: u16) -> Result<u32, Failure> {
    (1..=semloc_core::descriptor::MAX_LEVELS)
        .take_while(|&l| descriptor_dim(num_classes as usize, l) <= model.d_in())
        .find(|&l| descriptor_dim(num_classes as usize, l) == model.d_in())
        .ok_or_else(|| {
            Failure::Data(format!(
                "model input dimension {} does not match any pyramid over {num_classes} classes",
                model.d_in()
            ))
        })
}

/// Raw descriptors in the row order of `poses`.
fn aligned_descriptors<'a>(store: &'a DescriptorStore, poses: &[PoseRecord]) -> Result<Vec<&'a [f64]>, Failure> {
    let by_id: HashMap<&str, &[f64]> = store.iter().collect();
    poses
        .iter()
        .map(|p| {
            by_id
                .get(p.id.as_str())
                .copied()
                .ok_or_else(|| Failure::Data(format!("pose id {:?} has no raw descriptor", p.id)))
        })
        .collect()
}

fn cmd_synth(args: SynthArgs, stdout: &mut dyn Write) -> Outcome {
    let cfg = match &args.config {
        Some(path) => {
            let bytes = read(path)?;
            let text = std::str::from_utf8(&bytes)
                .map_err(|_| Failure::Data(format!("{}: not UTF-8", path.display())))?;
            toml::from_str::<DatasetConfig>(text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?
        }
        None => DatasetConfig::default(),
    };
    let ds = generate_dataset(&cfg).map_err(|e| Failure::Data(format!("synth: {e}")))?;
    write_dataset(&ds, &args.out).map_err(|e| Failure::Data(format!("{}: {e}", args.out.display())))?;
    emit(stdout, format_args!("database,{}", ds.database.len()))?;
    emit(stdout, format_args!("queries,{}", ds.queries.len()))
}

fn cmd_featurize(args: FeaturizeArgs, stdout: &mut dyn Write) -> Outcome {
    if args.levels == 0 || args.levels > semloc_core::descriptor::MAX_LEVELS {
        return Err(Failure::Usage(format!(
            "--levels must be in 1..={}",
            semloc_core::descriptor::MAX_LEVELS
        )));
    }
    let entries = fs::read_dir(&args.maps).map_err(|e| Failure::Data(format!("{}: {e}", args.maps.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Failure::Data(format!("{}: {e}", args.maps.display())))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == "slm") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Failure::Data(format!("{}: no .slm files", args.maps.display())));
    }

    let mut store: Option<DescriptorStore> = None;
    for path in &files {
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Failure::Data(format!("{}: file name is not UTF-8", path.display())))?
            .to_string();
        let map = decode(path, load_label_map)?;
        let raw = pyramid_histogram(&map, args.levels).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        let s = match &mut store {
            Some(s) => s,
            None => store.insert(DescriptorStore::new(raw.len()).expect("descriptors are non-empty")),
        };
        s.push(id, raw.into_values())
            .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    }
    let store = store.expect("at least one file");
    write(&args.out, &save_store(&store))?;
    emit(stdout, format_args!("descriptors,{},dim,{}", store.len(), store.dim()))
}

fn cmd_mine(args: MineArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let records = decode(&args.poses, load_poses_csv)?;
    let poses: Vec<GeoPose> = records.iter().map(|r| r.pose).collect();
    let params = MiningParams {
        r_pos: args.rpos,
        r_neg_min: args.rneg,
        per_anchor: args.per_anchor,
        seed: args.seed,
    };
    let mined = mine_triplets(&poses, &params).map_err(|e| match e {
        semloc_core::GeoError::Radii { .. } | semloc_core::GeoError::PerAnchor => Failure::Usage(format!("mine: {e}")),
        _ => Failure::Data(format!("mine: {e}")),
    })?;
    write(&args.out, &save_triplets_csv(&mined.triplets))?;
    if mined.skipped_anchors > 0 {
        let _ = writeln!(stderr, "mine: {} anchors skipped (no positive or no negative)", mined.skipped_anchors);
    }
    emit(stdout, format_args!("triplets,{}", mined.triplets.len()))
}

fn cmd_train(args: TrainArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let store = decode(&args.raw, load_store)?;
    let triplets = decode(&args.triplets, load_triplets_csv)?;
    let raw: Vec<&[f64]> = match &args.poses {
        Some(path) => aligned_descriptors(&store, &decode(path, load_poses_csv)?)?,
        None => store.descriptors().iter().map(Vec::as_slice).collect(),
    };
    let cfg = TrainConfig {
        d_out: args.dout,
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let (model, log) = train(&raw, &triplets, &cfg, args.margin).map_err(|e| metric_failure("train", e))?;
    for (i, loss) in log.mean_loss.iter().enumerate() {
        emit(stdout, format_args!("epoch,{},mean_loss,{loss}", i + 1))?;
    }
    if log.skipped_degenerate > 0 {
        let _ = writeln!(stderr, "train: {} triplet evaluations skipped (degenerate norm)", log.skipped_degenerate);
    }
    write(&args.out, &save_model(&model))
}

fn cmd_index(args: IndexArgs, stdout: &mut dyn Write) -> Outcome {
    let model = decode(&args.model, load_model)?;
    let store = decode(&args.raw, load_store)?;
    let poses = decode(&args.poses, load_poses_csv)?;
    let raw = aligned_descriptors(&store, &poses)?;
    let embeddings = raw
        .iter()
        .zip(&poses)
        .map(|(x, p)| model.embed(x).map_err(|e| metric_failure(&format!("embedding {:?}", p.id), e)))
        .collect::<Result<Vec<_>, _>>()?;
    let (ids, poses): (Vec<String>, Vec<GeoPose>) = poses.into_iter().map(|r| (r.id, r.pose)).unzip();
    let db = GeoDatabase::build(ids, poses, embeddings).map_err(|e| Failure::Data(format!("index: {e}")))?;
    write(&args.out, &save_database(&db))?;
    emit(stdout, format_args!("entries,{},dim,{}", db.len(), db.dim()))
}

fn embed_map(model: &EmbeddingModel, map: &LabelMap, what: &Path) -> Result<Vec<f64>, Failure> {
    let levels = infer_levels(model, map.num_classes())?;
    let raw = pyramid_histogram(map, levels).map_err(|e| Failure::Data(format!("{}: {e}", what.display())))?;
    model.embed(raw.values()).map_err(|e| metric_failure(&what.display().to_string(), e))
}

fn cmd_localize(args: LocalizeArgs, stdout: &mut dyn Write) -> Outcome {
    let db = decode(&args.index, load_database)?;
    let model = decode(&args.model, load_model)?;
    let map = decode(&args.query, load_label_map)?;
    let q = embed_map(&model, &map, &args.query)?;
    let ranked = db.query(&q, 1).map_err(|e| Failure::Data(format!("localize: {e}")))?;
    let best = ranked.best().expect("database is non-empty");
    let pose = db.poses()[best.index];
    emit(stdout, format_args!("id,lat,lon,distance"))?;
    emit(
        stdout,
        format_args!("{},{},{},{}", db.ids()[best.index], pose.lat(), pose.lon(), best.distance),
    )
}

fn cmd_evaluate(args: EvaluateArgs, stdout: &mut dyn Write) -> Outcome {
    let cfg = EvalConfig::new(args.dgrid, args.ngrid, args.tau).map_err(|e| Failure::Usage(format!("evaluate: {e}")))?;
    let db = decode(&args.index, load_database)?;
    let model = decode(&args.model, load_model)?;
    let records = decode(&args.qposes, load_poses_csv)?;
    let mut queries = Vec::with_capacity(records.len());
    let mut levels = None;
    for r in records {
        let path = args.queries.join(format!("{}.slm", r.id));
        let map = decode(&path, load_label_map)?;
        let l = match levels {
            Some(l) => l,
            None => *levels.insert(infer_levels(&model, map.num_classes())?),
        };
        if descriptor_dim(map.num_classes() as usize, l) != model.d_in() {
            return Err(Failure::Data(format!("{}: class count differs from the other queries", path.display())));
        }
        queries.push(LabeledQuery {
            id: r.id,
            map,
            pose: r.pose,
        });
    }
    let report = evaluate(&db, &model, levels.unwrap_or(1), &queries, &cfg).map_err(|e| match e {
        EvalError::Metric(m) => metric_failure("evaluate", m),
        other => Failure::Data(format!("evaluate: {other}")),
    })?;
    write(&args.out, &emit_report(&report, ReportFormat::Structured))?;
    if let Some(csv) = &args.csv {
        write(csv, &emit_report(&report, ReportFormat::PlotCsv))?;
    }
    emit(stdout, format_args!("N,recall"))?;
    for (n, r) in &report.recall_at_n {
        emit(stdout, format_args!("{n},{r}"))?;
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs one command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                1
            } else {
                let _ = write!(stdout, "{}", e.render());
                0
            };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => cmd_synth(a, stdout),
        Command::Featurize(a) => cmd_featurize(a, stdout),
        Command::Mine(a) => cmd_mine(a, stdout, stderr),
        Command::Train(a) => cmd_train(a, stdout, stderr),
        Command::Index(a) => cmd_index(a, stdout),
        Command::Localize(a) => cmd_localize(a, stdout),
        Command::Evaluate(a) => cmd_evaluate(a, stdout),
    };
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message());
            f.code()
        }
    }
}
