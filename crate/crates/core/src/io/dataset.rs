//! Directory-per-class datasets and the train / validation / test split.
//!
//! Layout: `<root>/<class>/<name>.{ply,xyz}`. One class is held out entirely
//! for testing; within every other class a seeded shuffle sends the first
//! `val_fraction` of the shapes to validation and the rest to training.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub path: PathBuf,
    pub class: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetIndex {
    pub entries: Vec<DatasetEntry>,
    pub seed: u64,
}

impl DatasetIndex {
    pub fn classes(&self) -> Vec<&str> {
        let mut classes: Vec<&str> = self.entries.iter().map(|e| e.class.as_str()).collect();
        classes.sort_unstable();
        classes.dedup();
        classes
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

fn is_cloud_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("ply") | Some("xyz")
    )
}

/// Scans `<root>/<class>/` directories, skipping hidden ones; entries are
/// sorted by path and start in the training split.
pub fn read_dataset_index(root: &Path) -> Result<DatasetIndex> {
    let mut entries = Vec::new();
    for class_dir in fs::read_dir(root)? {
        let class_dir = class_dir?.path();
        if !class_dir.is_dir() {
            continue;
        }
        let class = class_dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Dataset(format!("bad class directory {}", class_dir.display())))?
            .to_owned();
        if class.starts_with('.') {
            continue;
        }
        for file in fs::read_dir(&class_dir)? {
            let path = file?.path();
            if path.is_file() && is_cloud_file(&path) {
                entries.push(DatasetEntry {
                    path,
                    class: class.clone(),
                    split: Split::Train,
                });
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::Dataset(format!(
            "no .ply or .xyz files under {}/<class>/",
            root.display()
        )));
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(DatasetIndex { entries, seed: 0 })
}

pub fn split_dataset(
    index: &DatasetIndex,
    seed: u64,
    val_fraction: f64,
    holdout_class: &str,
) -> Result<DatasetIndex> {
    if !(0.0..=1.0).contains(&val_fraction) {
        return Err(Error::InvalidParameter(format!(
            "val_fraction = {val_fraction} must lie in [0, 1]"
        )));
    }
    let classes = index.classes();
    if classes.len() < 2 {
        return Err(Error::Dataset("splitting needs at least two classes".into()));
    }
    if !classes.contains(&holdout_class) {
        return Err(Error::Dataset(format!(
            "unknown holdout class '{holdout_class}' (have: {})",
            classes.join(", ")
        )));
    }

    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in index.entries.iter().enumerate() {
        by_class.entry(e.class.as_str()).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = index.entries.clone();
    for (class, mut members) in by_class {
        if class == holdout_class {
            for i in members {
                entries[i].split = Split::Test;
            }
            continue;
        }
        members.sort_by(|&a, &b| index.entries[a].path.cmp(&index.entries[b].path));
        members.shuffle(&mut rng);
        let n_val = (members.len() as f64 * val_fraction).floor() as usize;
        for (rank, i) in members.into_iter().enumerate() {
            entries[i].split = if rank < n_val { Split::Val } else { Split::Train };
        }
    }
    Ok(DatasetIndex { entries, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index() -> DatasetIndex {
        let entries = ["a", "b"]
            .iter()
            .flat_map(|class| {
                (0..10).map(move |i| DatasetEntry {
                    path: PathBuf::from(format!("{class}/{i:02}.ply")),
                    class: (*class).to_owned(),
                    split: Split::Train,
                })
            })
            .collect();
        DatasetIndex { entries, seed: 0 }
    }

    fn counts(idx: &DatasetIndex, class: &str) -> [usize; 3] {
        let mut c = [0; 3];
        for e in idx.entries.iter().filter(|e| e.class == class) {
            c[e.split as usize] += 1;
        }
        c
    }

    #[test]
    fn holdout_and_fraction_arithmetic() {
        let s = split_dataset(&index(), 7, 0.2, "b").unwrap();
        assert_eq!(counts(&s, "a"), [8, 2, 0]);
        assert_eq!(counts(&s, "b"), [0, 0, 10]);
    }

    #[test]
    fn same_seed_same_split() {
        let a = split_dataset(&index(), 42, 0.2, "a").unwrap();
        let b = split_dataset(&index(), 42, 0.2, "a").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seed, 42);
    }

    #[test]
    fn zero_val_fraction() {
        let s = split_dataset(&index(), 1, 0.0, "a").unwrap();
        assert_eq!(s.split(Split::Val).count(), 0);
        assert_eq!(s.split(Split::Train).count(), 10);
    }

    #[test]
    fn rejects_unknown_holdout_and_single_class() {
        assert!(split_dataset(&index(), 1, 0.2, "c").is_err());
        let mut one = index();
        one.entries.retain(|e| e.class == "a");
        assert!(split_dataset(&one, 1, 0.2, "a").is_err());
    }

    #[test]
    fn reads_directory_layout() {
        let dir = tempfile::tempdir().unwrap();
        for (class, name) in [
            ("chair", "x.xyz"),
            ("chair", "a.ply"),
            ("lamp", "b.xyz"),
            (".cache", "c.xyz"),
        ] {
            fs::create_dir_all(dir.path().join(class)).unwrap();
            fs::write(dir.path().join(class).join(name), "0 0 0\n").unwrap();
        }
        fs::write(dir.path().join("chair").join("notes.txt"), "ignored").unwrap();
        let idx = read_dataset_index(dir.path()).unwrap();
        let names: Vec<_> = idx
            .entries
            .iter()
            .map(|e| e.path.file_name().unwrap().to_str().unwrap())
            .collect();
        assert_eq!(names, ["a.ply", "x.xyz", "b.xyz"]);
        assert_eq!(idx.classes(), ["chair", "lamp"]);
    }
}
