//! Directory layout shared by the commands: a `manifest.tsv` of
//! `id<TAB>file<TAB>label` rows next to the cloud files.

use std::fs;
use std::path::{Path, PathBuf};

use pcc_core::shapes_io::{read_cloud, read_id_list};
use pcc_core::PointCloud;

use crate::CliError;

pub const MANIFEST: &str = "manifest.tsv";
pub const EFFECTIVE_CONFIG: &str = "effective_config.toml";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub id: String,
    /// Relative to the directory holding the manifest.
    pub file: String,
    pub label: String,
}

pub fn write_manifest(dir: &Path, entries: &[Entry]) -> Result<(), CliError> {
    let mut text = String::from("# id\tfile\tlabel\n");
    for e in entries {
        text.push_str(&format!("{}\t{}\t{}\n", e.id, e.file, e.label));
    }
    write(&dir.join(MANIFEST), text.as_bytes())
}

fn read_manifest(path: &Path) -> Result<Vec<Entry>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::data(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() < 2 {
            return Err(CliError::Data(format!("{}:{}: expected id and file", path.display(), i + 1)));
        }
        out.push(Entry {
            id: parts[0].to_string(),
            file: parts[1].to_string(),
            label: parts.get(2).unwrap_or(&"").to_string(),
        });
    }
    Ok(out)
}

/// Entries of `dir`: its manifest when present, otherwise every `.xyz` /
/// `.ply` file in name order with the file stem as id.
pub fn list_dir(dir: &Path) -> Result<Vec<Entry>, CliError> {
    let manifest = dir.join(MANIFEST);
    if manifest.is_file() {
        return read_manifest(&manifest);
    }
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| CliError::data(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".xyz") || n.ends_with(".ply"))
        .collect();
    names.sort();
    Ok(names
        .into_iter()
        .map(|file| {
            let id = Path::new(&file).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Entry { id, file, label: String::new() }
        })
        .collect())
}

/// `entries` restricted to the ids listed in `ids_file`, in list order.
pub fn select(entries: Vec<Entry>, ids_file: Option<&Path>) -> Result<Vec<Entry>, CliError> {
    let Some(path) = ids_file else { return Ok(entries) };
    let ids = read_id_list(path)?;
    ids.iter()
        .map(|id| {
            entries
                .iter()
                .find(|e| &e.id == id)
                .cloned()
                .ok_or_else(|| CliError::Data(format!("{}: id {id} is not in the manifest", path.display())))
        })
        .collect()
}

pub fn load(dir: &Path, entry: &Entry) -> Result<PointCloud, CliError> {
    Ok(read_cloud(&dir.join(&entry.file))?)
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::data(dir, e))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::data(path, e))
}

/// Input files of `complete`: one file, or every manifest entry of a directory.
pub fn inputs(path: &Path) -> Result<(PathBuf, Vec<Entry>), CliError> {
    if path.is_dir() {
        return Ok((path.to_path_buf(), list_dir(path)?));
    }
    if !path.is_file() {
        return Err(CliError::Data(format!("{}: no such file or directory", path.display())));
    }
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let file = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok((dir, vec![Entry { id, file, label: String::new() }]))
}
