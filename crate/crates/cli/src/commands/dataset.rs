use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use graphvar_core::io::{
    parse_ply, read_dataset_index, read_pointcloud, split_dataset, write_pointcloud, CloudFormat,
    DatasetEntry, DatasetIndex, Split,
};
use graphvar_core::operators::objective;
use graphvar_core::solvers::{solve_adam, solve_pd};
use graphvar_core::synthetic::{write_synthetic_dataset, Shape, SynthParams};
use graphvar_core::{PointCloud, Signal, SolverConfig, SolverKind};
use graphvar_gnn::train::write_curves_csv;
use graphvar_gnn::{evaluate_relative_error, prepare_instance, train, GnnModel, Instance, TrainConfig};

use crate::args::{
    cache_dir, with_suffix, Command, DatasetFlags, EvalArgs, SplitFlags, SynthArgs, TargetArgs,
    TrainArgs, TrainSnapshot,
};
use crate::error::{usage, CliError, CliResult};
use crate::manifest::{sha256_bytes, sha256_file, Manifest};

pub fn run_synth(a: SynthArgs, argv: Vec<String>) -> CliResult<PathBuf> {
    let shapes = a
        .shapes
        .iter()
        .map(|s| s.parse::<Shape>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if shapes.is_empty() || a.count == 0 {
        return usage("need at least one shape and --count >= 1");
    }
    if a.min_points < 2 || a.min_points > a.max_points {
        return usage("need 2 <= --min-points <= --max-points");
    }
    for (flag, v) in [
        ("--position-noise", a.position_noise),
        ("--color-noise", a.color_noise),
        ("--scale-jitter", a.scale_jitter),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return usage(format!("{flag} must be finite and >= 0"));
        }
    }
    let params = SynthParams {
        position_noise: a.position_noise,
        color_noise: a.color_noise,
        scale_jitter: a.scale_jitter,
    };
    let paths = write_synthetic_dataset(
        &a.out_dir,
        &shapes,
        a.count,
        (a.min_points, a.max_points),
        &params,
        a.seed,
    )?;
    let manifest_path = a.out_dir.join("manifest.json");
    let mut manifest = Manifest::new(argv, Command::Synth(a.clone()), a.seed);
    for p in &paths {
        manifest.add_output(p)?;
    }
    manifest.write(&manifest_path)?;
    println!("wrote {} clouds under {}", paths.len(), a.out_dir.display());
    Ok(manifest_path)
}

/// Settings that determine a cached target, hashed into its file name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TargetSettings {
    features: String,
    k: usize,
    kappa: f64,
    p: u8,
    q: f64,
    lambda: f64,
    epsilon: f64,
    pd_iters: usize,
}

impl TargetSettings {
    fn new(d: &DatasetFlags) -> Self {
        Self {
            features: graphvar_core::io::Features::from(d.features).name().into(),
            k: d.k,
            kappa: d.kappa,
            p: d.p,
            q: 1.0,
            lambda: d.lambda,
            epsilon: d.epsilon,
            pd_iters: d.pd_iters,
        }
    }

    fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("plain struct");
        sha256_bytes(json.as_bytes())[..16].to_string()
    }
}

/// Sidecar stored next to each cached target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TargetMeta {
    source: PathBuf,
    content_sha256: String,
    settings: TargetSettings,
    vertices: usize,
}

struct CacheSlot {
    target: PathBuf,
    meta: PathBuf,
    content_sha256: String,
}

fn cache_slot(cache: &Path, cloud_path: &Path, settings_hash: &str) -> CliResult<CacheSlot> {
    let content_sha256 = sha256_file(cloud_path)?;
    let key = format!("{}_{settings_hash}", &content_sha256[..16]);
    Ok(CacheSlot {
        target: cache.join(format!("{key}.ply")),
        meta: cache.join(format!("{key}.json")),
        content_sha256,
    })
}

fn read_target(path: &Path, vertices: usize) -> CliResult<Signal> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let cloud = parse_ply(&bytes, path)?;
    if cloud.len() != vertices {
        return Err(anyhow!(
            "cached target {} has {} rows, expected {vertices}",
            path.display(),
            cloud.len()
        )
        .into());
    }
    Ok(Signal::from_rows(&cloud.positions))
}

fn instance_name(root: &Path, path: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).display().to_string()
}

fn load(root: &Path, entry: &DatasetEntry, d: &DatasetFlags) -> CliResult<Instance> {
    let cloud = read_pointcloud(&entry.path)?;
    Ok(prepare_instance(&instance_name(root, &entry.path), &cloud, &d.pipeline())?)
}

pub fn run_precompute(mut a: TargetArgs, argv: Vec<String>) -> CliResult<PathBuf> {
    a.dataset.check().map_err(CliError::Usage)?;
    let pd = a.dataset.pd_config().map_err(CliError::Usage)?;
    let cache = cache_dir(&a.cache_dir, &a.dataset.data);
    a.cache_dir = Some(cache.clone());
    let settings = TargetSettings::new(&a.dataset);
    let settings_hash = settings.hash();
    let manifest_path = a
        .manifest
        .get_or_insert_with(|| cache.join(format!("precompute-{settings_hash}.manifest.json")))
        .clone();

    let index = read_dataset_index(&a.dataset.data)?;
    fs::create_dir_all(&cache).with_context(|| format!("creating {}", cache.display()))?;
    let mut manifest = Manifest::new(argv, Command::PrecomputeTargets(a.clone()), 0);
    let (mut computed, mut warm) = (0, 0);
    for entry in &index.entries {
        let slot = cache_slot(&cache, &entry.path, &settings_hash)?;
        let existing = match fs::read_to_string(&slot.meta) {
            Ok(text) => Some(
                serde_json::from_str::<TargetMeta>(&text)
                    .with_context(|| format!("parsing {}", slot.meta.display()))?,
            ),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(e.into()),
        };
        if let Some(meta) = &existing {
            if meta.settings != settings || meta.content_sha256 != slot.content_sha256 {
                return Err(anyhow!(
                    "refusing to overwrite {}: it was computed from different settings or content",
                    slot.meta.display()
                )
                .into());
            }
        }
        if existing.is_some() && slot.target.exists() {
            warm += 1;
        } else {
            let mut inst = load(&a.dataset.data, entry, &a.dataset)?;
            let (f, _) = solve_pd(&inst.graph, &inst.f0, &pd)?;
            let rows = f.to_rows3().ok_or_else(|| anyhow!("target is not 3-dimensional"))?;
            write_pointcloud(&slot.target, &PointCloud::new(rows), CloudFormat::PlyBinary)?;
            let meta = TargetMeta {
                source: entry.path.clone(),
                content_sha256: slot.content_sha256.clone(),
                settings: settings.clone(),
                vertices: f.vertex_count(),
            };
            fs::write(&slot.meta, serde_json::to_string_pretty(&meta).map_err(anyhow::Error::from)?)?;
            inst.target = Some(f);
            computed += 1;
            log::info!("target for {}", inst.name);
        }
        manifest.add_input(&entry.path)?;
        manifest.add_output(&slot.target)?;
    }
    manifest.write(&manifest_path)?;
    println!(
        "{computed} targets computed, {warm} already cached in {}",
        cache.display()
    );
    Ok(manifest_path)
}

fn split(d: &DatasetFlags, s: &mut SplitFlags) -> CliResult<DatasetIndex> {
    if !(0.0..1.0).contains(&s.val_fraction) {
        return usage("--val-fraction must lie in [0, 1)");
    }
    let index = read_dataset_index(&d.data)?;
    let classes = index.classes();
    let holdout = s
        .holdout
        .get_or_insert_with(|| classes.last().map(|c| c.to_string()).unwrap_or_default())
        .clone();
    if !classes.contains(&holdout.as_str()) {
        return usage(format!(
            "unknown --holdout class '{holdout}' (have: {})",
            classes.join(", ")
        ));
    }
    Ok(split_dataset(&index, s.seed, s.val_fraction, &holdout)?)
}

pub fn run_train(mut a: TrainArgs, argv: Vec<String>) -> CliResult<PathBuf> {
    a.dataset.check().map_err(CliError::Usage)?;
    if a.epochs == 0 {
        return usage("--epochs must be >= 1");
    }
    let cache = cache_dir(&a.cache_dir, &a.dataset.data);
    a.cache_dir = Some(cache.clone());
    let curves_path = a
        .curves
        .get_or_insert_with(|| with_suffix(&a.output, ".curves.csv"))
        .clone();
    let manifest_path = a
        .manifest
        .get_or_insert_with(|| with_suffix(&a.output, ".manifest.json"))
        .clone();
    let config = TrainConfig {
        p: a.dataset.p as f64,
        q: 1.0,
        lambda: a.dataset.lambda,
        epsilon: a.dataset.epsilon,
        epochs: a.epochs,
        learning_rate: a.lr,
        seed: a.split.seed,
        ..TrainConfig::new(a.mode.into())
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let index = split(&a.dataset, &mut a.split)?;

    let mut manifest = Manifest::new(argv, Command::Train(a.clone()), a.split.seed);
    let settings_hash = TargetSettings::new(&a.dataset).hash();
    let mut sets = [Vec::new(), Vec::new()];
    for (set, which) in sets.iter_mut().zip([Split::Train, Split::Val]) {
        for entry in index.split(which) {
            let mut inst = load(&a.dataset.data, entry, &a.dataset)?;
            manifest.add_input(&entry.path)?;
            if config.objective == graphvar_gnn::Objective::Distill {
                let slot = cache_slot(&cache, &entry.path, &settings_hash)?;
                if !slot.target.exists() {
                    return Err(anyhow!(
                        "no precomputed target for {} in {}; run `graphvar precompute-targets --data {}` \
                         with the same --features/--k/--kappa/--p/--lambda/--epsilon/--pd-iters first",
                        inst.name,
                        cache.display(),
                        a.dataset.data.display()
                    )
                    .into());
                }
                inst.target = Some(read_target(&slot.target, inst.f0.vertex_count())?);
                manifest.add_input(&slot.target)?;
            }
            set.push(inst);
        }
    }
    let [train_set, val_set] = sets;
    if train_set.is_empty() {
        return Err(anyhow!("the training split is empty").into());
    }
    println!(
        "training on {} instances, validating on {}",
        train_set.len(),
        val_set.len()
    );
    let outcome = train(GnnModel::new(3, 3, a.split.seed), &train_set, &val_set, &config)?;
    println!("best epoch {}", outcome.best_epoch);

    let snapshot = serde_json::to_value(a.snapshot()).map_err(anyhow::Error::from)?;
    outcome.model.save(&a.output, snapshot)?;
    let mut w = BufWriter::new(fs::File::create(&curves_path)?);
    write_curves_csv(&outcome.curves, &mut w)?;
    w.flush()?;
    drop(w);
    manifest.add_output(&a.output)?;
    manifest.add_csv_output(&curves_path)?;
    manifest.write(&manifest_path)?;
    Ok(manifest_path)
}

pub const EVAL_HEADER: &str =
    "name,vertices,J_gnn,J_pd,J_adam,gap_pct,adam_gap_pct,signal_err_pct,gnn_ms,pd_ms,adam_ms";

pub fn run_eval(mut a: EvalArgs, argv: Vec<String>) -> CliResult<PathBuf> {
    if a.adam_iters == 0 || !(a.adam_lr > 0.0) {
        return usage("--adam-iters must be >= 1 and --adam-lr > 0");
    }
    let manifest_path = a
        .manifest
        .get_or_insert_with(|| with_suffix(&a.output, ".manifest.json"))
        .clone();
    let (model, snapshot) = GnnModel::load(&a.checkpoint)?;
    let mut t: TrainSnapshot = serde_json::from_value(snapshot)
        .map_err(|e| anyhow!("checkpoint has no usable training configuration: {e}"))?;
    if let Some(data) = &a.data {
        t.dataset.data = data.clone();
    }
    a.data = Some(t.dataset.data.clone());
    let pd = t.dataset.pd_config().map_err(CliError::Usage)?;
    let adam = SolverConfig::new(SolverKind::Adam, pd.problem)
        .with_iters(a.adam_iters)
        .with_learning_rate(a.adam_lr)
        .with_trace_every(a.adam_iters);
    let index = split(&t.dataset, &mut t.split)?;
    a.train = Some(t.clone());

    let mut manifest = Manifest::new(argv, Command::Eval(a.clone()), t.split.seed);
    manifest.add_input(&a.checkpoint)?;
    let mut instances = Vec::new();
    let mut timings = Vec::new();
    for entry in index.split(Split::Test) {
        let mut inst = load(&t.dataset.data, entry, &t.dataset)?;
        manifest.add_input(&entry.path)?;
        let start = Instant::now();
        let (f_pd, _) = solve_pd(&inst.graph, &inst.f0, &pd)?;
        let pd_ms = start.elapsed().as_secs_f64() * 1e3;
        let start = Instant::now();
        let (f_adam, _) = solve_adam(&inst.graph, &inst.f0, &adam)?;
        let adam_ms = start.elapsed().as_secs_f64() * 1e3;
        let j_adam = objective(&inst.graph, &f_adam, &inst.f0, &pd.problem)?;
        inst.target = Some(f_pd);
        timings.push((j_adam, pd_ms, adam_ms));
        instances.push(inst);
    }
    if instances.is_empty() {
        return Err(anyhow!("the test split is empty").into());
    }
    let report = evaluate_relative_error(&model, &mut instances, &pd)?;

    let mut w = BufWriter::new(fs::File::create(&a.output)?);
    writeln!(w, "{EVAL_HEADER}")?;
    for (r, (j_adam, pd_ms, adam_ms)) in report.rows.iter().zip(&timings) {
        writeln!(
            w,
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:.3},{:.3},{:.3}",
            r.name,
            r.vertices,
            r.j_gnn,
            r.j_ref,
            j_adam,
            r.gap_pct,
            100.0 * (j_adam - r.j_ref) / r.j_ref,
            r.signal_err_pct,
            r.gnn_ms,
            pd_ms,
            adam_ms
        )?;
    }
    w.flush()?;
    drop(w);
    let n = report.rows.len() as f64;
    let mean = |f: &dyn Fn(usize) -> f64| (0..report.rows.len()).map(f).sum::<f64>() / n;
    println!(
        "{} test instances: mean gap {:.3}% (signal error {:.3}%); mean time gnn {:.3} ms, pd {:.1} ms, adam {:.1} ms",
        report.rows.len(),
        report.mean_gap_pct,
        report.mean_signal_err_pct,
        mean(&|i| report.rows[i].gnn_ms),
        mean(&|i| timings[i].1),
        mean(&|i| timings[i].2),
    );
    manifest.add_csv_output(&a.output)?;
    manifest.write(&manifest_path)?;
    Ok(manifest_path)
}
