//! Content-addressed response store.
//!
//! Layout under the cache directory:
//!
//! ```text
//! index              one line per entry: <key>\t<filename>\t<created_at unix secs>
//! entries/<key>.txt  the response body, byte-for-byte as received
//! ```
//!
//! Entries are write-once. Writes are serialized through a single lock; reads
//! go through an in-memory copy of the index loaded at open time.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

const INDEX_FILE: &str = "index";
const ENTRIES_DIR: &str = "entries";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub key: String,
    pub filename: String,
    pub created_at: u64,
}

#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    index: RwLock<HashMap<String, CacheEntry>>,
    writer: Mutex<()>,
}

impl ResponseCache {
    /// Open (or lazily create) a cache directory. A missing directory is an
    /// empty cache; it is only created on first write.
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        let mut index = HashMap::new();
        match fs::read_to_string(dir.join(INDEX_FILE)) {
            Ok(text) => {
                for (lineno, line) in text.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let mut parts = line.split('\t');
                    let (Some(key), Some(filename), created) = (parts.next(), parts.next(), parts.next()) else {
                        return Err(io::Error::new(
                            io::ErrorKind::InvalidData,
                            format!("malformed cache index line {}", lineno + 1),
                        ));
                    };
                    let created_at = created.and_then(|c| c.trim().parse().ok()).unwrap_or(0);
                    index.entry(key.to_owned()).or_insert(CacheEntry {
                        key: key.to_owned(),
                        filename: filename.to_owned(),
                        created_at,
                    });
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e),
        }
        Ok(ResponseCache { dir, index: RwLock::new(index), writer: Mutex::new(()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("cache index lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.read().expect("cache index lock poisoned").contains_key(key)
    }

    pub fn entry(&self, key: &str) -> Option<CacheEntry> {
        self.index.read().expect("cache index lock poisoned").get(key).cloned()
    }

    pub fn get(&self, key: &str) -> io::Result<Option<String>> {
        let Some(entry) = self.entry(key) else {
            return Ok(None);
        };
        let bytes = fs::read(self.dir.join(&entry.filename))?;
        String::from_utf8(bytes).map(Some).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// Store a response. Returns `false` without touching disk when the key is
    /// already present.
    pub fn put(&self, key: &str, body: &str) -> io::Result<bool> {
        let _guard = self.writer.lock().expect("cache writer lock poisoned");
        if self.contains(key) {
            return Ok(false);
        }
        let entries = self.dir.join(ENTRIES_DIR);
        fs::create_dir_all(&entries)?;
        let filename = format!("{ENTRIES_DIR}/{key}.txt");
        let mut tmp = tempfile::NamedTempFile::new_in(&entries)?;
        tmp.write_all(body.as_bytes())?;
        tmp.persist(self.dir.join(&filename)).map_err(|e| e.error)?;

        let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let mut index = OpenOptions::new().create(true).append(true).open(self.dir.join(INDEX_FILE))?;
        writeln!(index, "{key}\t{filename}\t{created_at}")?;

        self.index
            .write()
            .expect("cache index lock poisoned")
            .insert(key.to_owned(), CacheEntry { key: key.to_owned(), filename, created_at });
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_once_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path().join("c")).unwrap();
        assert!(cache.is_empty());
        assert!(cache.put("k1", "hello\r\n  world ").unwrap());
        assert!(!cache.put("k1", "other").unwrap());
        assert_eq!(cache.get("k1").unwrap().as_deref(), Some("hello\r\n  world "));
        assert_eq!(cache.get("nope").unwrap(), None);

        let reopened = ResponseCache::open(dir.path().join("c")).unwrap();
        assert_eq!(reopened.len(), 1);
        assert_eq!(reopened.get("k1").unwrap().as_deref(), Some("hello\r\n  world "));
        assert_eq!(reopened.entry("k1").unwrap().filename, "entries/k1.txt");
    }

    #[test]
    fn malformed_index_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(INDEX_FILE), "only-a-key\n").unwrap();
        assert!(ResponseCache::open(dir.path()).is_err());
    }
}
