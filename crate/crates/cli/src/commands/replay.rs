use std::path::{Path, PathBuf};

use anyhow::anyhow;

use crate::args::{Command, ReplayArgs};
use crate::error::{usage, CliResult};
use crate::manifest::{sha256_file, Manifest, TOOL};

/// Points every output of `cmd` into `dir`.
fn redirect(cmd: &mut Command, dir: &Path) {
    let into = |p: &Path, prefix: &str| {
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        dir.join(format!("{prefix}{name}"))
    };
    let manifest = Some(dir.join("replay.manifest.json"));
    match cmd {
        Command::Solve(a) => {
            a.output = into(&a.output, "output-");
            a.trace = a.trace.as_deref().map(|t| into(t, "trace-"));
            a.manifest = manifest;
        }
        Command::Bench(a) => a.out_dir = dir.join("bench"),
        Command::Synth(a) => a.out_dir = dir.join("data"),
        Command::PrecomputeTargets(a) => {
            a.cache_dir = Some(dir.join("targets"));
            a.manifest = manifest;
        }
        Command::Train(a) => {
            a.output = into(&a.output, "checkpoint-");
            a.curves = a.curves.as_deref().map(|c| into(c, "curves-"));
            a.manifest = manifest;
        }
        Command::Eval(a) => {
            a.output = into(&a.output, "eval-");
            a.manifest = manifest;
        }
        Command::Replay(_) => {}
    }
}

pub fn run_replay(a: ReplayArgs) -> CliResult<PathBuf> {
    let original = Manifest::read(&a.manifest)?;
    if original.tool != TOOL {
        return usage(format!("{} is not a {TOOL} manifest", a.manifest.display()));
    }
    if original.version != env!("CARGO_PKG_VERSION") {
        log::warn!(
            "manifest written by version {}, replaying with {}",
            original.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    for input in &original.inputs {
        let now = sha256_file(&input.path)?;
        if now != input.sha256 {
            return Err(anyhow!("input {} changed since the recorded run", input.path.display()).into());
        }
    }

    let scratch = match &a.keep {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            None
        }
        None => Some(tempfile::tempdir()?),
    };
    let dir = a.keep.clone().unwrap_or_else(|| scratch.as_ref().expect("tempdir").path().to_path_buf());
    let mut cmd = original.config.clone();
    redirect(&mut cmd, &dir);
    let argv = vec!["replay".to_string(), a.manifest.display().to_string()];
    let replayed = Manifest::read(&super::run(cmd, argv)?)?;

    let mut mismatches = 0;
    if replayed.outputs.len() != original.outputs.len() {
        return Err(anyhow!(
            "replay produced {} outputs, the manifest lists {}",
            replayed.outputs.len(),
            original.outputs.len()
        )
        .into());
    }
    for (old, new) in original.outputs.iter().zip(&replayed.outputs) {
        if old.sha256 == new.sha256 {
            println!("identical  {}", old.path.display());
        } else {
            println!("DIFFERENT  {}", old.path.display());
            mismatches += 1;
        }
    }
    if mismatches > 0 {
        return Err(anyhow!("{mismatches} of {} outputs differ", original.outputs.len()).into());
    }
    println!("replay reproduced all {} outputs", original.outputs.len());
    Ok(a.manifest)
}
