//! On-disk paper cache: one JSON file per paper id.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::PaperRecord;

/// File name for a paper id. Ids that are not already filename-safe get a
/// short digest suffix so distinct ids never collide.
pub fn file_name(paper_id: &str) -> String {
    let safe: String = paper_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    if safe == paper_id && !safe.starts_with('.') {
        format!("{safe}.json")
    } else {
        let digest = hex::encode(Sha256::digest(paper_id.as_bytes()));
        format!("{safe}-{}.json", &digest[..8])
    }
}

#[derive(Debug, Clone)]
pub struct PaperCache {
    dir: PathBuf,
}

impl PaperCache {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(PaperCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, paper_id: &str) -> PathBuf {
        self.dir.join(file_name(paper_id))
    }

    /// A cached record, or `None` on a miss or an unreadable entry.
    pub fn get(&self, paper_id: &str) -> Option<PaperRecord> {
        let path = self.path_for(paper_id);
        let text = std::fs::read_to_string(&path).ok()?;
        match serde_json::from_str::<PaperRecord>(&text) {
            Ok(rec) if rec.paper_id == paper_id => Some(rec),
            Ok(_) => None,
            Err(e) => {
                log::warn!("ignoring corrupt cache entry {}: {e}", path.display());
                None
            }
        }
    }

    pub fn put(&self, record: &PaperRecord) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(record).expect("records serialize");
        std::fs::write(self.path_for(&record.paper_id), text)
    }
}
