//! Audio byte storage keyed by stored name.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::PathBuf;

use parking_lot::RwLock;

pub trait BlobStore: Send + Sync {
    fn put(&self, name: &str, bytes: &[u8]) -> io::Result<()>;
    /// Byte length of the blob, `None` if absent.
    fn size(&self, name: &str) -> io::Result<Option<u64>>;
    /// Reads `len` bytes starting at `offset`. The range must lie within the blob.
    fn read_range(&self, name: &str, offset: u64, len: u64) -> io::Result<Vec<u8>>;
    fn delete(&self, name: &str) -> io::Result<()>;
    fn list(&self) -> io::Result<Vec<String>>;

    fn get(&self, name: &str) -> io::Result<Option<Vec<u8>>> {
        match self.size(name)? {
            Some(len) => self.read_range(name, 0, len).map(Some),
            None => Ok(None),
        }
    }
}

fn check_name(name: &str) -> io::Result<()> {
    let ok = !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'.' || b == b'_' || b == b'-')
        && !name.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(io::Error::new(io::ErrorKind::InvalidInput, "invalid blob name"))
    }
}

#[derive(Debug, Default)]
pub struct MemoryBlobStore {
    blobs: RwLock<BTreeMap<String, Vec<u8>>>,
}

impl BlobStore for MemoryBlobStore {
    fn put(&self, name: &str, bytes: &[u8]) -> io::Result<()> {
        check_name(name)?;
        self.blobs.write().insert(name.to_owned(), bytes.to_vec());
        Ok(())
    }

    fn size(&self, name: &str) -> io::Result<Option<u64>> {
        Ok(self.blobs.read().get(name).map(|b| b.len() as u64))
    }

    fn read_range(&self, name: &str, offset: u64, len: u64) -> io::Result<Vec<u8>> {
        let blobs = self.blobs.read();
        let blob = blobs.get(name).ok_or_else(|| io::Error::from(io::ErrorKind::NotFound))?;
        let start = usize::try_from(offset).map_err(|_| io::Error::from(io::ErrorKind::InvalidInput))?;
        let end = start
            .checked_add(len as usize)
            .filter(|end| *end <= blob.len())
            .ok_or_else(|| io::Error::from(io::ErrorKind::UnexpectedEof))?;
        Ok(blob[start..end].to_vec())
    }

    fn delete(&self, name: &str) -> io::Result<()> {
        self.blobs.write().remove(name);
        Ok(())
    }

    fn list(&self) -> io::Result<Vec<String>> {
        Ok(self.blobs.read().keys().cloned().collect())
    }
}

/// Blobs as flat files in one directory. Writes go through a temporary file
/// and a rename, so a reader never sees a partial blob.
#[derive(Debug, Clone)]
pub struct FsBlobStore {
    root: PathBuf,
}

impl FsBlobStore {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    fn path(&self, name: &str) -> io::Result<PathBuf> {
        check_name(name)?;
        Ok(self.root.join(name))
    }
}

impl BlobStore for FsBlobStore {
    fn put(&self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let path = self.path(name)?;
        let tmp = self.root.join(format!(".{name}.partial"));
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        drop(f);
        fs::rename(&tmp, &path)
    }

    fn size(&self, name: &str) -> io::Result<Option<u64>> {
        match fs::metadata(self.path(name)?) {
            Ok(m) => Ok(Some(m.len())),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn read_range(&self, name: &str, offset: u64, len: u64) -> io::Result<Vec<u8>> {
        let mut f = fs::File::open(self.path(name)?)?;
        f.seek(SeekFrom::Start(offset))?;
        let mut buf = vec![0; len as usize];
        f.read_exact(&mut buf)?;
        Ok(buf)
    }

    fn delete(&self, name: &str) -> io::Result<()> {
        match fs::remove_file(self.path(name)?) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
            _ => Ok(()),
        }
    }

    fn list(&self) -> io::Result<Vec<String>> {
        let mut names = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if !name.starts_with('.') {
                names.push(name);
            }
        }
        names.sort();
        Ok(names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exercise(store: &dyn BlobStore) {
        let bytes: Vec<u8> = (0..=255u8).cycle().take(4096).collect();
        store.put("abc.wav", &bytes).unwrap();
        assert_eq!(store.size("abc.wav").unwrap(), Some(4096));
        assert_eq!(store.get("abc.wav").unwrap().unwrap(), bytes);
        assert_eq!(store.read_range("abc.wav", 1000, 24).unwrap(), &bytes[1000..1024]);
        assert!(store.read_range("abc.wav", 4090, 10).is_err());
        assert_eq!(store.list().unwrap(), vec!["abc.wav".to_string()]);
        store.delete("abc.wav").unwrap();
        store.delete("abc.wav").unwrap();
        assert_eq!(store.size("abc.wav").unwrap(), None);
        assert!(store.put("../escape", b"x").is_err());
    }

    #[test]
    fn memory_store() {
        exercise(&MemoryBlobStore::default());
    }

    #[test]
    fn fs_store() {
        let dir = tempfile::tempdir().unwrap();
        exercise(&FsBlobStore::open(dir.path().join("audio")).unwrap());
    }
}
