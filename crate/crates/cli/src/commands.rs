use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use ionprof_core::domain::paper_grid;
use ionprof_core::eval::{bench_inference, evaluate, TimingResult};
use ionprof_core::gbdt::train_gbdt_with;
use ionprof_core::ground_truth::{EmpiricalCdf, EmpiricalSource, SyntheticOracle};
use ionprof_core::io::{
    dataset_bytes, load_model, model_bytes, read_cache, read_dataset, read_trajectory,
    read_trajectory_meta, write_atomic, write_cache, write_catalog, write_heatmap,
    write_loss_history, write_profile, TrajectoryMeta,
};
use ionprof_core::mlp::{init_mlp, train_mlp_with, MlpTrainConfig};
use ionprof_core::sampler::GridEntry;
use ionprof_core::seed::stream_seed;
use ionprof_core::{
    build_dataset, find_ion, predict_profile, CdfEstimator, CdfSource, ChannelConfig, ExactCdf,
    IonSpecies, Model, ModelKind, Partition,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{resolve, RunConfig, SourceKind};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

fn write_json_value(path: &Path, value: &Value) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(write_atomic(path, &bytes)?)
}

/// Everything a command needs: resolved config, output root and catalog.
pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub catalog: Vec<IonSpecies>,
}

impl Context {
    pub fn new(cfg: RunConfig, out: PathBuf) -> anyhow::Result<Self> {
        let catalog = cfg.catalog(&out)?;
        cfg.validate(&catalog)?;
        Ok(Self { cfg, out, catalog })
    }

    pub fn config_hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(&self.cfg).expect("config serializes"))
    }

    fn dir(&self, p: &Path) -> PathBuf {
        resolve(&self.out, p)
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.dir(&self.cfg.paths.dataset_dir)
    }

    pub fn model_dir(&self) -> PathBuf {
        self.dir(&self.cfg.paths.model_dir)
    }

    pub fn report_dir(&self) -> PathBuf {
        self.dir(&self.cfg.paths.report_dir)
    }

    fn source(&self) -> anyhow::Result<Source> {
        match self.cfg.source.kind {
            SourceKind::Synthetic => Ok(Source::Synthetic),
            SourceKind::Empirical => {
                let path = self.dir(self.cfg.source.cache.as_deref().expect("validated"));
                let hash = sha256_file(&path)?;
                let cache = read_cache(&path)?;
                Ok(Source::Empirical { cache, hash })
            }
        }
    }

    /// The configured grid, or every cached configuration for empirical data.
    fn grid(&self, source: &Source) -> anyhow::Result<Vec<ChannelConfig>> {
        match source {
            Source::Synthetic => self.cfg.grid(&self.catalog),
            Source::Empirical { cache, .. } => Ok(cache.configs().cloned().collect()),
        }
    }

    fn default_models(&self) -> Vec<PathBuf> {
        ["mlp.json", "gbdt.json"]
            .iter()
            .map(|f| self.model_dir().join(f))
            .filter(|p| p.exists())
            .collect()
    }
}

enum Source {
    Synthetic,
    Empirical {
        cache: EmpiricalSource,
        hash: String,
    },
}

impl Source {
    fn as_dyn(&self) -> &dyn CdfSource {
        match self {
            Source::Synthetic => &SyntheticOracle,
            Source::Empirical { cache, .. } => cache,
        }
    }

    fn describe(&self) -> String {
        match self {
            Source::Synthetic => SyntheticOracle::VERSION.to_string(),
            Source::Empirical { hash, .. } => format!("empirical:{hash}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub file: String,
    pub rows: usize,
    pub sha256: String,
}

/// Provenance written next to the dataset CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub source: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub per_config: usize,
    pub train_configs: usize,
    pub test_configs: usize,
    pub train: FileDigest,
    pub test: FileDigest,
    pub grid: Vec<GridEntry>,
}

pub fn read_manifest(dataset_dir: &Path) -> anyhow::Result<(Manifest, String)> {
    let path = dataset_dir.join(MANIFEST_FILE);
    let bytes = std::fs::read(&path)
        .with_context(|| format!("no dataset at {} (run `generate` first)", path.display()))?;
    let manifest: Manifest =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
        bail!(
            "{}: unsupported manifest schema {}",
            path.display(),
            manifest.schema_version
        );
    }
    Ok((manifest, sha256_hex(&bytes)))
}

pub fn generate(ctx: &Context) -> anyhow::Result<Manifest> {
    let source = ctx.source()?;
    let grid = ctx.grid(&source)?;
    let s = &ctx.cfg.sampling;
    let dataset = build_dataset(&grid, source.as_dyn(), s.per_config, s.master_seed)?;

    let dir = ctx.dataset_dir();
    let ext = if s.compress { "csv.gz" } else { "csv" };
    let digest = |name: &str, rows: &[ionprof_core::CdfSample]| -> anyhow::Result<FileDigest> {
        let file = format!("{name}.{ext}");
        let path = dir.join(&file);
        let bytes = dataset_bytes(&path, rows)?;
        write_atomic(&path, &bytes)?;
        Ok(FileDigest {
            file,
            rows: rows.len(),
            sha256: sha256_hex(&bytes),
        })
    };
    let train = digest("train", &dataset.train)?;
    let test = digest("test", &dataset.test)?;
    let prov = dataset.provenance;
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        source: source.describe(),
        config_hash: ctx.config_hash(),
        master_seed: prov.master_seed,
        per_config: prov.per_config,
        train_configs: prov.count(Partition::Train),
        test_configs: prov.count(Partition::Test),
        train,
        test,
        grid: prov.grid,
    };
    write_json_value(&dir.join(MANIFEST_FILE), &serde_json::to_value(&manifest)?)?;
    println!(
        "configs: {} ({} train, {} test)",
        manifest.grid.len(),
        manifest.train_configs,
        manifest.test_configs
    );
    println!(
        "rows: {} ({} train, {} test)",
        manifest.train.rows + manifest.test.rows,
        manifest.train.rows,
        manifest.test.rows
    );
    println!("dataset: {}", dir.display());
    Ok(manifest)
}

pub fn train(ctx: &Context, kind: ModelKind) -> anyhow::Result<PathBuf> {
    let dir = ctx.dataset_dir();
    let (manifest, manifest_hash) = read_manifest(&dir)?;
    let train_path = dir.join(&manifest.train.file);
    let samples = read_dataset(&train_path)?;
    if sha256_file(&train_path)? != manifest.train.sha256 {
        bail!(
            "{} does not match its manifest digest",
            train_path.display()
        );
    }
    let master = ctx.cfg.sampling.master_seed;
    let model_dir = ctx.model_dir();

    let (model, history, step, loss) = match kind {
        ModelKind::Mlp => {
            let spec = &ctx.cfg.mlp;
            let init = init_mlp(&ctx.cfg.mlp_dims(), stream_seed(master, "mlp-init"))?;
            let tc = MlpTrainConfig {
                epochs: spec.epochs,
                learning_rate: spec.learning_rate,
                batch_size: spec.batch_size,
                seed: stream_seed(master, "mlp-shuffle"),
            };
            eprintln!(
                "training mlp {:?} ({} parameters) on {} rows",
                init.layer_dims,
                init.n_params(),
                samples.len()
            );
            let outcome = train_mlp_with(init, &samples, &tc, |e, l| {
                eprintln!("epoch {:>4}/{} mse {l:.6e}", e + 1, tc.epochs);
            })?;
            let mut model = outcome.model;
            if let Some(p) = model.training_provenance.as_mut() {
                p.dataset_hash = Some(manifest_hash.clone());
            }
            (Model::Mlp(model), outcome.loss_history, "epoch", "mse")
        }
        ModelKind::Gbdt => {
            let gc = &ctx.cfg.gbdt;
            eprintln!(
                "training gbdt ({} rounds, depth {}, lambda {}) on {} rows",
                gc.rounds,
                gc.max_depth,
                gc.lambda,
                samples.len()
            );
            let outcome = train_gbdt_with(&samples, gc, |r, m| {
                eprintln!("round {:>4}/{} mse {m:.6e}", r + 1, gc.rounds);
            })?;
            let mut model = outcome.model;
            if let Some(p) = model.training_provenance.as_mut() {
                p.dataset_hash = Some(manifest_hash.clone());
            }
            (Model::Gbdt(model), outcome.mse_history, "round", "mse")
        }
    };

    let path = model_dir.join(format!("{kind}.json"));
    write_atomic(&path, &model_bytes(&model)?)?;
    write_loss_history(
        &model_dir.join(format!("{kind}_loss.csv")),
        step,
        loss,
        &history,
    )?;
    if let (Some(first), Some(last)) = (history.first(), history.last()) {
        println!(
            "{kind}: training mse {first:.6e} -> {last:.6e} over {} {step}s",
            history.len()
        );
    }
    println!("model: {}", path.display());
    Ok(path)
}

pub struct PredictArgs<'a> {
    pub model: &'a Path,
    pub ion: &'a str,
    pub width: f64,
    pub molarity: f64,
    pub bin_size: f64,
    pub output: Option<&'a Path>,
}

pub fn predict(ctx: &Context, args: &PredictArgs) -> anyhow::Result<PathBuf> {
    let model = load_model(args.model)?;
    let species = find_ion(&ctx.catalog, args.ion)?.clone();
    let config = ChannelConfig::new(species, args.width, args.molarity)?;
    let profile = predict_profile(&model, &config, args.bin_size)?;
    let path = match args.output {
        Some(p) => p.to_path_buf(),
        None => resolve(&ctx.out, &ctx.cfg.paths.profile_dir).join(format!(
            "{}_{}_w{}_c{}_b{}.csv",
            label_of(args.model),
            config.species.name,
            config.width,
            config.molarity,
            args.bin_size
        )),
    };
    write_profile(&path, &profile)?;
    let peak = profile
        .peak_index()
        .expect("profiles have at least one bin");
    let mean = profile.mean_concentration();
    println!("profile: {} ({} bins)", path.display(), profile.n_bins());
    println!(
        "peak: r = {:.4} nm (bin {peak}, {:.4} M)",
        profile.peak_location().expect("non-empty"),
        profile.concentrations[peak]
    );
    println!(
        "integral: mean concentration {mean:.6} M vs molarity {} M (relative error {:.3e})",
        config.molarity,
        (mean - config.molarity).abs() / config.molarity
    );
    Ok(path)
}

fn label_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

fn load_estimators(
    ctx: &Context,
    models: &[PathBuf],
) -> anyhow::Result<Vec<(String, String, Model)>> {
    let paths = if models.is_empty() {
        ctx.default_models()
    } else {
        models.to_vec()
    };
    paths
        .iter()
        .map(|p| {
            let model = load_model(p)?;
            Ok((label_of(p), sha256_file(p)?, model))
        })
        .collect()
}

pub fn evaluate_cmd(
    ctx: &Context,
    models: &[PathBuf],
    include_oracle: bool,
) -> anyhow::Result<Vec<PathBuf>> {
    let loaded = load_estimators(ctx, models)?;
    if loaded.is_empty() && !include_oracle {
        bail!("no models to evaluate (train one or pass --model)");
    }
    let source = ctx.source()?;
    let grid = ctx.grid(&source)?;
    let exact = ExactCdf(source.as_dyn());

    let mut entries: Vec<(String, Option<String>, &dyn CdfEstimator)> = Vec::new();
    if include_oracle {
        entries.push(("oracle".into(), None, &exact));
    }
    for (label, hash, model) in &loaded {
        entries.push((label.clone(), Some(hash.clone()), model));
    }

    let dir = ctx.report_dir();
    let mut written = Vec::new();
    for (label, model_hash, estimator) in entries {
        for &bin in &ctx.cfg.evaluation.bin_sizes {
            let report = evaluate(&label, estimator, source.as_dyn(), &grid, bin)?;
            let mut value = serde_json::to_value(&report)?;
            value["provenance"] = json!({
                "config_hash": ctx.config_hash(),
                "source": source.describe(),
                "model_sha256": model_hash,
            });
            let path = dir.join(format!("{label}_b{bin}.json"));
            write_json_value(&path, &value)?;
            written.push(path);

            for ion in &ctx.cfg.grid.ions {
                let cells: Vec<_> = report
                    .per_config
                    .iter()
                    .filter(|m| m.ion == *ion)
                    .map(|m| ionprof_core::eval::MaeCell {
                        ion: m.ion.clone(),
                        width: m.width,
                        molarity: m.molarity,
                        partition: m.partition,
                        mae: m.mae,
                    })
                    .collect();
                if !cells.is_empty() {
                    let heat = dir.join(format!("{label}_{ion}_heatmap_b{bin}.csv"));
                    write_heatmap(&heat, &cells)?;
                    written.push(heat);
                }
            }

            for (name, agg) in [
                ("train", &report.aggregates.train),
                ("test", &report.aggregates.test),
            ] {
                if let Some(a) = agg {
                    println!(
                        "{label} bin={bin} {name}: configs={} mae={:.6} M peak_dev={:.6} nm",
                        a.n_configs, a.mean_mae, a.mean_peak_dev
                    );
                }
            }
        }
    }
    Ok(written)
}

pub struct BenchArgs<'a> {
    pub models: &'a [PathBuf],
    pub runs: Option<usize>,
    pub bin_size: Option<f64>,
    pub full_grid: bool,
}

pub fn bench(ctx: &Context, args: &BenchArgs) -> anyhow::Result<Vec<(String, TimingResult)>> {
    let loaded = load_estimators(ctx, args.models)?;
    if loaded.is_empty() {
        bail!("no models to benchmark (train one or pass --model)");
    }
    let grid = if args.full_grid {
        paper_grid()
    } else {
        ctx.cfg.grid(&ctx.catalog)?
    };
    let runs = args.runs.unwrap_or(ctx.cfg.evaluation.bench_runs);
    let bin = args.bin_size.unwrap_or(ctx.cfg.evaluation.bench_bin_size);
    // one worker, so timings are not skewed by contention
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
    let mut results = Vec::new();
    for (label, hash, model) in &loaded {
        let timing = pool.install(|| bench_inference(model, &grid, bin, runs))?;
        println!(
            "{label}: {} s ({} profiles per run, {} runs, bin {bin} nm)",
            timing.display(),
            timing.profiles_per_run,
            runs
        );
        let value = json!({
            "model": label,
            "bin_size": bin,
            "n_configs": grid.len(),
            "timing": timing,
            "display": timing.display(),
            "provenance": { "config_hash": ctx.config_hash(), "model_sha256": hash },
        });
        write_json_value(
            &ctx.report_dir().join(format!("{label}_timing.json")),
            &value,
        )?;
        results.push((label.clone(), timing));
    }
    Ok(results)
}

pub fn ingest(
    ctx: &Context,
    trajectories: &[PathBuf],
    metas: &[PathBuf],
    cache: Option<&Path>,
) -> anyhow::Result<PathBuf> {
    if trajectories.is_empty() {
        bail!("no trajectory files given");
    }
    if !metas.is_empty() && metas.len() != trajectories.len() {
        bail!(
            "{} trajectories but {} sidecar files",
            trajectories.len(),
            metas.len()
        );
    }
    let mut source = EmpiricalSource::new();
    for (i, traj) in trajectories.iter().enumerate() {
        let meta_path = metas
            .get(i)
            .cloned()
            .unwrap_or_else(|| traj.with_extension("json"));
        let meta: TrajectoryMeta = read_trajectory_meta(&meta_path)?;
        let slab = read_trajectory(traj, &meta, &ctx.catalog)?;
        let cdf = EmpiricalCdf::from_slab(&slab);
        println!(
            "{}: {} coordinates, max |z-o| = {:.4} nm",
            slab.config.label(),
            cdf.distances().len(),
            cdf.distances().last().copied().unwrap_or(0.0)
        );
        source.insert(slab.config, cdf)?;
    }
    let path = match cache {
        Some(p) => p.to_path_buf(),
        None => resolve(&ctx.out, &ctx.cfg.paths.cache_dir).join("empirical.bin"),
    };
    write_cache(&path, &source)?;
    println!(
        "cache: {} ({} configs)",
        path.display(),
        source.entries().len()
    );
    Ok(path)
}

pub fn catalog(ctx: &Context, output: Option<&Path>) -> anyhow::Result<PathBuf> {
    let path = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.out.join("catalog.json"));
    write_catalog(&path, &ctx.catalog)?;
    println!(
        "{:<6} {:>9} {:>9} {:>6}",
        "ion", "sigma", "epsilon", "charge"
    );
    for ion in &ctx.catalog {
        println!(
            "{:<6} {:>9.4} {:>9.4} {:>+6}",
            ion.name, ion.sigma, ion.epsilon, ion.charge
        );
    }
    println!("catalog: {}", path.display());
    Ok(path)
}
