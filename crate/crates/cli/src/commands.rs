use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use bxt_core::metrics::{evaluate_margins, sweep_margins};
use bxt_core::rng::label;
use bxt_core::{
    fit_boosted, generate_synthetic, load_higgs_csv, split, split_by_tags, tree_correlation, write_csv,
    BoostConfig, BoostedModel, Dataset, LoadOptions, SeedStream, SplitMode, SplitSpec, StageRecord,
    SyntheticSpec, Tree, TreeConfig,
};
use log::{info, warn};

use crate::config::ConfigFile;

/// `println!` that exits quietly when stdout is a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {
        emit(format_args!($($arg)*))
    };
}

fn emit(line: std::fmt::Arguments<'_>) {
    if let Err(e) = writeln!(std::io::stdout().lock(), "{line}") {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("bxt: cannot write to stdout: {e}");
        std::process::exit(2);
    }
}
use crate::{BoostArgs, Command, CommonArgs, DataArgs, Failure, Part, ScoreArgs};

pub fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Train {
            common,
            data,
            boost,
            score,
        } => {
            let cfg = config_for(&common)?;
            let env = Env::new(&common, &cfg)?;
            train(&env, &cfg, &data, &boost, &score)
        }
        Command::Evaluate { common, data, score } => {
            let cfg = config_for(&common)?;
            let env = Env::new(&common, &cfg)?;
            evaluate(&env, &cfg, &data, &score)
        }
        Command::Sweep {
            common,
            data,
            score,
            percentiles,
        } => {
            let cfg = config_for(&common)?;
            let env = Env::new(&common, &cfg)?;
            sweep(&env, &cfg, &data, &score, percentiles)
        }
        Command::Diagnose {
            common,
            data,
            n_trees,
            sample_size,
            part,
        } => {
            let cfg = config_for(&common)?;
            let env = Env::new(&common, &cfg)?;
            let n_trees = cfg.get(n_trees, "n-trees", 100)?;
            let sample_size = cfg.get(sample_size, "sample-size", 1000)?;
            let part = cfg.get(part, "part", Part::Test)?;
            diagnose(&env, &cfg, &data, n_trees, sample_size, part)
        }
        Command::Synth {
            common,
            n_samples,
            dimension,
            overlap,
            imbalance,
        } => {
            let cfg = config_for(&common)?;
            let env = Env::new(&common, &cfg)?;
            let spec = SyntheticSpec {
                n_samples: cfg.get(n_samples, "n-samples", 10_000)?,
                dimension: cfg.get(dimension, "dimension", 5)?,
                overlap: cfg.get(overlap, "overlap", 2.0)?,
                imbalance: cfg.get(imbalance, "imbalance", 0.3)?,
                seed: env.seed,
            };
            let ds = generate_synthetic(&spec)?;
            let path = env.out_file("synthetic.csv")?;
            write_csv(&ds, &path)?;
            say!("wrote {} events ({} signal) to {}", ds.len(), ds.count_signal(), path.display());
            Ok(())
        }
    }
}

fn config_for(common: &CommonArgs) -> Result<ConfigFile, Failure> {
    match &common.config {
        Some(path) => ConfigFile::load(path),
        None => Ok(ConfigFile::default()),
    }
}

/// Settings shared by every command.
struct Env {
    data: Option<PathBuf>,
    model: Option<PathBuf>,
    out: PathBuf,
    /// Whether `out` came from a flag or the config file rather than the default.
    out_given: bool,
    seed: u64,
}

impl Env {
    fn new(common: &CommonArgs, cfg: &ConfigFile) -> Result<Self, Failure> {
        if let Some(n) = cfg.pick(common.threads, "threads")? {
            if n == 0 {
                return Err(Failure::usage("--threads must be at least 1"));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::usage(format!("cannot start {n} worker threads: {e}")))?;
        }
        let out = cfg.pick(common.out.clone(), "out")?;
        Ok(Env {
            data: cfg.pick(common.data.clone(), "data")?,
            model: cfg.pick(common.model.clone(), "model")?,
            out_given: out.is_some(),
            out: out.unwrap_or_else(|| PathBuf::from(".")),
            seed: cfg.get(common.seed, "seed", 0)?,
        })
    }

    fn data_path(&self) -> Result<&Path, Failure> {
        self.data
            .as_deref()
            .ok_or_else(|| Failure::usage("no input data: pass --data PATH"))
    }

    fn model_path(&self) -> Result<&Path, Failure> {
        self.model
            .as_deref()
            .ok_or_else(|| Failure::usage("no model: pass --model PATH"))
    }

    /// `<out>/<name>`, creating the output directory if needed.
    fn out_file(&self, name: &str) -> Result<PathBuf, Failure> {
        fs::create_dir_all(&self.out)
            .map_err(|e| Failure::usage(format!("cannot create {}: {e}", self.out.display())))?;
        Ok(self.out.join(name))
    }
}

fn optional_column(value: String) -> Option<String> {
    match value.as_str() {
        "" | "none" => None,
        _ => Some(value),
    }
}

/// Loads `--data`. The flag says whether rows carry partition tags.
fn load_data(env: &Env, cfg: &ConfigFile, a: &DataArgs) -> Result<(Dataset, bool), Failure> {
    let split_column = cfg.pick(a.split_column.clone(), "split-column")?;
    let tagged = split_column.is_some();
    let opts = LoadOptions {
        label_column: cfg.get(a.label_column.clone(), "label-column", "Label".into())?,
        weight_column: optional_column(cfg.get(a.weight_column.clone(), "weight-column", "Weight".into())?),
        id_column: optional_column(cfg.get(a.id_column.clone(), "id-column", "EventId".into())?),
        split_column,
        ignore_columns: cfg.list(a.ignore_columns.clone(), "ignore-columns")?.unwrap_or_default(),
    };
    let path = env.data_path()?;
    let started = Instant::now();
    let ds = load_higgs_csv(path, &opts)?;
    info!(
        "loaded {} events x {} features from {} in {:.2}s",
        ds.len(),
        ds.n_features(),
        path.display(),
        started.elapsed().as_secs_f64()
    );
    Ok((ds, tagged))
}

/// (train, validation, test) by tag column or by seeded fractions.
fn partition(env: &Env, cfg: &ConfigFile, a: &DataArgs, ds: &Dataset, tagged: bool) -> Result<[Dataset; 3], Failure> {
    let defaults = SplitSpec::default();
    let rescale = cfg.get(a.rescale_event_weights, "rescale-event-weights", defaults.rescale_event_weights)?;
    let (tr, va, te) = if tagged {
        split_by_tags(ds, rescale)?
    } else {
        let spec = SplitSpec {
            train_fraction: cfg.get(a.train_fraction, "train-fraction", defaults.train_fraction)?,
            validation_fraction: cfg.get(
                a.validation_fraction,
                "validation-fraction",
                defaults.validation_fraction,
            )?,
            test_fraction: cfg.get(a.test_fraction, "test-fraction", defaults.test_fraction)?,
            seed: env.seed,
            stratified: cfg.get(a.stratified, "stratified", defaults.stratified)?,
            rescale_event_weights: rescale,
        };
        split(ds, &spec)?
    };
    Ok([tr, va, te])
}

fn pick_part(ds: Dataset, parts: [Dataset; 3], part: Part) -> Dataset {
    let [tr, va, te] = parts;
    match part {
        Part::Train => tr,
        Part::Validation => va,
        Part::Test => te,
        Part::All => ds,
    }
}

fn load_part(env: &Env, cfg: &ConfigFile, a: &DataArgs, part: Part) -> Result<Dataset, Failure> {
    let (ds, tagged) = load_data(env, cfg, a)?;
    if part == Part::All {
        return Ok(ds);
    }
    let parts = partition(env, cfg, a, &ds, tagged)?;
    Ok(pick_part(ds, parts, part))
}

struct Scoring {
    percentile: f64,
    b_reg: f64,
    weighted: bool,
}

fn scoring(cfg: &ConfigFile, a: &ScoreArgs) -> Result<Scoring, Failure> {
    Ok(Scoring {
        percentile: cfg.get(a.percentile, "percentile", 85.0)?,
        b_reg: cfg.get(a.b_reg, "b-reg", 0.0)?,
        weighted: cfg.get(a.weighted, "weighted", true)?,
    })
}

fn boost_config(env: &Env, cfg: &ConfigFile, a: &BoostArgs) -> Result<BoostConfig, Failure> {
    let d = BoostConfig::default();
    let t = TreeConfig::default();
    Ok(BoostConfig {
        stages: cfg.get(a.stages, "stages", d.stages)?,
        trees_per_stage: cfg.get(a.trees, "trees", d.trees_per_stage)?,
        tree_config: TreeConfig {
            mode: cfg.get(a.mode, "mode", SplitMode::RandomSplit)?,
            k_features: cfg.pick(a.k_features, "k-features")?,
            max_depth: cfg.get(a.max_depth, "max-depth", t.max_depth)?,
            min_samples_leaf: cfg.get(a.min_samples_leaf, "min-samples-leaf", t.min_samples_leaf)?,
            min_weighted_fraction_split: cfg.get(
                a.min_weighted_fraction,
                "min-weighted-fraction",
                t.min_weighted_fraction_split,
            )?,
        },
        epsilon_floor: cfg.get(a.epsilon_floor, "epsilon-floor", d.epsilon_floor)?,
        seed: env.seed,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn write_io(path: &Path, r: std::io::Result<()>) -> Result<(), Failure> {
    r.map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn write_stages(path: &Path, records: &[StageRecord]) -> Result<(), Failure> {
    let mut out = create(path)?;
    let body = (|| {
        writeln!(out, "stage,epsilon,alpha,weighted_accuracy,seconds")?;
        for r in records {
            writeln!(
                out,
                "{},{:?},{:?},{:?},{:.6}",
                r.stage, r.epsilon, r.alpha, r.weighted_accuracy, r.seconds
            )?;
        }
        out.flush()
    })();
    write_io(path, body)
}

fn train(env: &Env, cfg: &ConfigFile, data: &DataArgs, boost: &BoostArgs, score: &ScoreArgs) -> Result<(), Failure> {
    let bc = boost_config(env, cfg, boost)?;
    bc.validate()?;
    let sc = scoring(cfg, score)?;
    let model_path = match &env.model {
        Some(p) => p.clone(),
        None => env.out_file("model.bxt")?,
    };
    let stages_path = env.out_file("stages.csv")?;
    let (ds, tagged) = load_data(env, cfg, data)?;
    let [tr, va, te] = partition(env, cfg, data, &ds, tagged)?;

    let started = Instant::now();
    let (model, records) = fit_boosted(&tr, &bc)?;
    let secs = started.elapsed().as_secs_f64();
    if records.len() < bc.stages {
        warn!(
            "stopped after {} of {} stages: the next stage was no better than chance",
            records.len(),
            bc.stages
        );
    }
    model.save(&model_path)?;
    write_stages(&stages_path, &records)?;

    say!(
        "trained {} ({} stages x {} trees) on {} events in {secs:.2}s",
        bc.tree_config.mode,
        model.stages().len(),
        bc.trees_per_stage,
        tr.len()
    );
    let part = cfg.get(score.part, "part", Part::Validation)?;
    let train_accuracy = model.accuracy(&tr)?;
    let held_out = pick_part(ds, [tr, va, te], part);
    let ams = match evaluate_margins(&model.margins(&held_out)?, &held_out, sc.percentile, sc.b_reg, sc.weighted) {
        Ok(r) => format!("{:.5}", r.ams),
        Err(bxt_core::Error::Domain(_)) => "undefined (no background selected; set --b-reg)".into(),
        Err(e) => return Err(e.into()),
    };
    say!("train accuracy {train_accuracy:.4}");
    say!(
        "{} accuracy {:.4}, AMS {ams} at percentile {}",
        format!("{part:?}").to_lowercase(),
        model.accuracy(&held_out)?,
        sc.percentile
    );
    say!("model written to {}", model_path.display());
    say!("stage log written to {}", stages_path.display());
    Ok(())
}

fn load_model(env: &Env) -> Result<BoostedModel, Failure> {
    Ok(BoostedModel::load(env.model_path()?)?)
}

fn evaluate(env: &Env, cfg: &ConfigFile, data: &DataArgs, score: &ScoreArgs) -> Result<(), Failure> {
    let sc = scoring(cfg, score)?;
    let model = load_model(env)?;
    let part = cfg.get(score.part, "part", Part::Test)?;
    let ds = load_part(env, cfg, data, part)?;
    let report = evaluate_margins(&model.margins(&ds)?, &ds, sc.percentile, sc.b_reg, sc.weighted)?;
    let json = report.to_json();
    say!("{json}");
    if env.out_given {
        let path = env.out_file("report.json")?;
        write_io(&path, fs::write(&path, format!("{json}\n")))?;
        info!("report written to {}", path.display());
    }
    Ok(())
}

fn sweep(
    env: &Env,
    cfg: &ConfigFile,
    data: &DataArgs,
    score: &ScoreArgs,
    percentiles: Option<Vec<f64>>,
) -> Result<(), Failure> {
    let sc = scoring(cfg, score)?;
    let percentiles = cfg
        .list(percentiles, "percentiles")?
        .unwrap_or_else(|| (50..100).map(f64::from).collect());
    let model = load_model(env)?;
    let part = cfg.get(score.part, "part", Part::Test)?;
    let ds = load_part(env, cfg, data, part)?;
    let curve = sweep_margins(&model.margins(&ds)?, &ds, &percentiles, sc.b_reg, sc.weighted)?;
    let path = env.out_file("sweep.csv")?;
    let mut out = create(&path)?;
    write_io(&path, curve.write_csv(&mut out).and_then(|_| out.flush()))?;
    if let Some(p) = curve.peak() {
        say!("peak AMS {:.5} at percentile {} (threshold {:.6})", p.ams, p.percentile, p.threshold);
    }
    say!("sweep written to {}", path.display());
    Ok(())
}

fn diagnose(
    env: &Env,
    cfg: &ConfigFile,
    data: &DataArgs,
    n_trees: usize,
    sample_size: usize,
    part: Part,
) -> Result<(), Failure> {
    let model = load_model(env)?;
    let ds = load_part(env, cfg, data, part)?;
    let all: Vec<&Tree> = model.stages().iter().flat_map(|s| s.forest.trees()).collect();
    if n_trees < 2 || n_trees > all.len() {
        return Err(Failure::usage(format!(
            "--n-trees must lie in 2..={} for this model, got {n_trees}",
            all.len()
        )));
    }
    let sample_size = if sample_size > ds.len() {
        warn!("sample size {sample_size} exceeds the {} available events; using all of them", ds.len());
        ds.len()
    } else {
        sample_size
    };
    let mut rng = SeedStream::new(env.seed).child(label::DIAGNOSE, 0).rng();
    let mut picked = rand::seq::index::sample(&mut rng, all.len(), n_trees).into_vec();
    picked.sort_unstable();
    let trees: Vec<&Tree> = picked.iter().map(|&i| all[i]).collect();
    let m = tree_correlation(&trees, &ds, sample_size, &mut rng)?;

    let path = env.out_file("correlation.csv")?;
    let mut out = create(&path)?;
    write_io(&path, m.write_csv(&mut out).and_then(|_| out.flush()))?;
    say!(
        "{} trees on {} events: mean |r| {:.4}, mean r {:.4}, {} constant-vote trees",
        n_trees,
        sample_size,
        m.mean_abs_off_diagonal(),
        m.mean_off_diagonal(),
        m.constant.iter().filter(|&&c| c).count()
    );
    say!("correlation matrix written to {}", path.display());
    Ok(())
}
