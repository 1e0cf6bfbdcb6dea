//! Model directories: parameter manifest and blob, vocabularies, config
//! snapshot, selected epoch. Every file is written to a temporary name and
//! renamed into place.

use std::fs;
use std::path::Path;

use crate::config::parse_key_values;
use crate::error::{Error, Result};
use crate::numcore::{read_tensors, ParamStore, Tensor};
use crate::vocab::Vocab;

pub const MANIFEST: &str = "params.manifest";
pub const BLOB: &str = "params.bin";
pub const CONFIG: &str = "config.txt";
pub const BEST_EPOCH: &str = "best_epoch.txt";

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_store(dir: &Path, store: &ParamStore) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (manifest, blob) = store.to_bytes();
    write_atomic(&dir.join(BLOB), &blob)?;
    write_atomic(&dir.join(MANIFEST), manifest.as_bytes())
}

/// Overwrites the values in `store` with the saved ones.
pub fn load_store(dir: &Path, store: &mut ParamStore) -> Result<()> {
    let manifest = read_text(&dir.join(MANIFEST))?;
    let blob = fs::read(dir.join(BLOB))?;
    store.load_bytes(&manifest, &blob)
}

/// The saved tensor called `name`, if any.
pub fn saved_tensor(dir: &Path, name: &str) -> Result<Option<Tensor>> {
    let manifest = read_text(&dir.join(MANIFEST))?;
    let blob = fs::read(dir.join(BLOB))?;
    Ok(read_tensors(&manifest, &blob)?
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, t)| t))
}

pub fn save_vocab(dir: &Path, name: &str, vocab: &Vocab) -> Result<()> {
    write_atomic(&dir.join(format!("{name}.vocab")), vocab.to_text().as_bytes())
}

pub fn load_vocab(dir: &Path, name: &str) -> Result<Vocab> {
    Ok(Vocab::from_text(&read_text(&dir.join(format!("{name}.vocab")))?))
}

pub fn has_vocab(dir: &Path, name: &str) -> bool {
    dir.join(format!("{name}.vocab")).is_file()
}

pub fn save_text(dir: &Path, file: &str, text: &str) -> Result<()> {
    write_atomic(&dir.join(file), text.as_bytes())
}

pub fn load_pairs(dir: &Path, file: &str) -> Result<Vec<(String, String)>> {
    parse_key_values(&read_text(&dir.join(file))?)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_and_vocab_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = ParamStore::new();
        store.add("a", Tensor::vector(vec![0.1, -2.0, 1e-300]), true);
        save_store(dir.path(), &store).unwrap();
        let mut other = ParamStore::new();
        other.add("a", Tensor::zeros(&[3]), true);
        load_store(dir.path(), &mut other).unwrap();
        assert_eq!(store, other);
        assert_eq!(saved_tensor(dir.path(), "a").unwrap().unwrap().data(), store.entries()[0].tensor.data());

        let v = Vocab::build(&["<unk>"], ["x", "y"]);
        save_vocab(dir.path(), "words", &v).unwrap();
        assert_eq!(load_vocab(dir.path(), "words").unwrap(), v);
        assert!(!dir.path().join(".words.vocab.tmp").exists());
    }
}
