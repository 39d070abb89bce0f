use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;

use graphvar_core::io::{read_pointcloud, write_pointcloud, CloudFormat, Features};
use graphvar_core::solvers::{run_benchmark, solve, SolveTrace};
use graphvar_core::{feature_weights, knn_graph, Graph, PointCloud, Signal};

use crate::args::{with_suffix, BenchArgs, Command, InstanceFlags, SolveArgs, SolverArg};
use crate::error::{usage, CliError, CliResult};
use crate::manifest::Manifest;

fn build_problem(flags: &InstanceFlags) -> CliResult<(PointCloud, Signal, Graph)> {
    let cloud = read_pointcloud(&flags.input)?;
    let f0 = Features::from(flags.features).extract(&cloud)?;
    let mut graph = knn_graph(&cloud, flags.k)?;
    if flags.kappa > 0.0 {
        graph = feature_weights(&graph, &f0, flags.kappa)?;
    }
    log::info!(
        "{}: {} points, {} arcs",
        flags.input.display(),
        cloud.len(),
        graph.arc_count()
    );
    Ok((cloud, f0, graph))
}

fn write_trace(path: &Path, trace: &SolveTrace) -> CliResult<()> {
    let mut w = BufWriter::new(
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    trace.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn run_solve(mut a: SolveArgs, argv: Vec<String>) -> CliResult<PathBuf> {
    a.instance.resolve();
    a.instance.check().map_err(CliError::Usage)?;
    if a.lr.is_none() {
        a.lr = a.instance.default_lr(a.solver);
    }
    let config = a
        .instance
        .solver_config(a.solver, a.lr)
        .map_err(CliError::Usage)?;
    let format = CloudFormat::from_path(&a.output).map_err(|e| CliError::Usage(e.to_string()))?;
    if a.output == a.instance.input {
        return usage("--output must differ from --input");
    }
    let manifest_path = a
        .manifest
        .get_or_insert_with(|| with_suffix(&a.output, ".manifest.json"))
        .clone();

    let (cloud, f0, graph) = build_problem(&a.instance)?;
    let (f, trace) = solve(&graph, &f0, &config)?;
    if let Some(last) = trace.last() {
        log::info!("{}: J = {:e} after {} iterations", a.solver.name(), last.objective, last.iteration);
    }
    let out = Features::from(a.instance.features).replace(&cloud, &f)?;

    write_pointcloud(&a.output, &out, format)?;
    if let Some(path) = &a.trace {
        write_trace(path, &trace)?;
    }
    let mut manifest = Manifest::new(argv, Command::Solve(a.clone()), a.instance.seed);
    manifest.add_input(&a.instance.input)?;
    manifest.add_output(&a.output)?;
    if let Some(path) = &a.trace {
        manifest.add_csv_output(path)?;
    }
    manifest.write(&manifest_path)?;
    Ok(manifest_path)
}

impl SolverArg {
    pub fn name(self) -> &'static str {
        graphvar_core::SolverKind::from(self).name()
    }
}

pub fn run_bench(mut a: BenchArgs, argv: Vec<String>) -> CliResult<PathBuf> {
    a.instance.resolve();
    a.instance.check().map_err(CliError::Usage)?;
    a.solvers.sort_by_key(|s| s.name());
    a.solvers.dedup();
    if a.solvers.is_empty() {
        return usage("--solvers is empty");
    }
    a.resolved_lr.clear();
    let mut configs = Vec::with_capacity(a.solvers.len());
    for &s in &a.solvers {
        let lr = a.lr.or_else(|| a.instance.default_lr(s));
        if let Some(lr) = lr {
            a.resolved_lr.push((s, lr));
        }
        configs.push(a.instance.solver_config(s, lr).map_err(|e| {
            CliError::Usage(format!("{}: {e}", s.name()))
        })?);
    }
    let manifest_path = a.out_dir.join("manifest.json");

    let (_, f0, graph) = build_problem(&a.instance)?;
    let entries = run_benchmark(&graph, &f0, &configs)?;
    let mut traces = Vec::with_capacity(entries.len());
    for entry in entries {
        let trace = match entry.outcome {
            Ok((_, trace)) => trace,
            Err(graphvar_core::Error::Divergence { iteration, trace, .. }) => {
                log::warn!("{} diverged at iteration {iteration}; keeping its partial trace", entry.kind);
                *trace
            }
            Err(e) => return Err(e.into()),
        };
        traces.push(trace);
    }

    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    let mut manifest = Manifest::new(argv, Command::Bench(a.clone()), a.instance.seed);
    manifest.add_input(&a.instance.input)?;
    for (s, trace) in a.solvers.iter().zip(&traces) {
        let path = a.out_dir.join(format!("{}.csv", s.name()));
        write_trace(&path, trace)?;
        manifest.add_csv_output(&path)?;
    }
    let merged = a.out_dir.join("bench.csv");
    write_merged(&merged, &a.solvers, &traces)?;
    manifest.add_csv_output(&merged)?;
    manifest.write(&manifest_path)?;
    Ok(manifest_path)
}

/// Wide table `iter,<solver>...` of exact objectives; a solver that stopped
/// early leaves its later cells empty.
fn write_merged(path: &Path, solvers: &[SolverArg], traces: &[SolveTrace]) -> CliResult<()> {
    let mut rows: BTreeMap<usize, Vec<Option<f64>>> = BTreeMap::new();
    for (k, trace) in traces.iter().enumerate() {
        for r in &trace.records {
            rows.entry(r.iteration).or_insert_with(|| vec![None; traces.len()])[k] = Some(r.objective);
        }
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    let names: Vec<&str> = solvers.iter().map(|s| s.name()).collect();
    writeln!(w, "iter,{}", names.join(","))?;
    for (iter, values) in rows {
        let cells: Vec<String> = values
            .iter()
            .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
            .collect();
        writeln!(w, "{iter},{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}
