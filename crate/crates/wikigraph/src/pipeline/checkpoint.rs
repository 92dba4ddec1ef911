//! Content-addressed stage skipping.
//!
//! A stage's fingerprint hashes its input file contents and the
//! parameters that change its output, plus the fingerprints of the
//! stages it reads from. A stage reruns iff its fingerprint differs
//! from the recorded one or an output file is missing — mtimes are
//! never consulted, so copied or re-downloaded identical dumps still
//! skip.

use std::fs::{self, File};
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::graph::Counters;

/// Hashed into every fingerprint; bump when a stage's semantics
/// change so stale outputs are rebuilt.
pub const FORMAT_VERSION: &str = "1";

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn file_digest(path: &Path) -> io::Result<String> {
    let mut hasher = Sha256::new();
    let mut file = File::open(path)?;
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

/// Order-sensitive, unambiguous combination of the parts.
pub fn fingerprint<S: AsRef<str>>(parts: &[S]) -> String {
    let mut hasher = Sha256::new();
    for p in parts {
        let b = p.as_ref().as_bytes();
        hasher.update((b.len() as u64).to_le_bytes());
        hasher.update(b);
    }
    hex(&hasher.finalize())
}

/// `.stages/` bookkeeping under the output directory: per stage one
/// fingerprint file and one counters snapshot (so skipped stages
/// still contribute to the run report).
pub struct Checkpoints {
    dir: PathBuf,
}

impl Checkpoints {
    pub fn open(out_dir: &Path) -> io::Result<Checkpoints> {
        let dir = out_dir.join(".stages");
        fs::create_dir_all(&dir)?;
        Ok(Checkpoints { dir })
    }

    fn mark_path(&self, stage: &str) -> PathBuf {
        self.dir.join(format!("{stage}.fingerprint"))
    }

    fn counters_path(&self, stage: &str) -> PathBuf {
        self.dir.join(format!("{stage}.counters"))
    }

    pub fn is_current(&self, stage: &str, fingerprint: &str) -> bool {
        match fs::read_to_string(self.mark_path(stage)) {
            Ok(recorded) => recorded.trim() == fingerprint,
            Err(_) => false,
        }
    }

    pub fn record(&self, stage: &str, fingerprint: &str) -> io::Result<()> {
        fs::write(self.mark_path(stage), fingerprint)
    }

    /// Drops the fingerprint so the stage reruns even if inputs match.
    pub fn invalidate(&self, stage: &str) -> io::Result<()> {
        match fs::remove_file(self.mark_path(stage)) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(e),
        }
    }

    pub fn save_counters(&self, stage: &str, counters: &Counters) -> io::Result<()> {
        fs::write(self.counters_path(stage), counters.to_string())
    }

    pub fn load_counters(&self, stage: &str) -> io::Result<Counters> {
        let mut counters = Counters::new();
        let text = match fs::read_to_string(self.counters_path(stage)) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(counters),
            Err(e) => return Err(e),
        };
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                if let Ok(n) = v.parse::<u64>() {
                    counters.set(k, n);
                }
            }
        }
        Ok(counters)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn digest_tracks_content_not_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        fs::write(&a, b"hello").unwrap();
        fs::write(&b, b"hello").unwrap();
        assert_eq!(file_digest(&a).unwrap(), file_digest(&b).unwrap());
        fs::write(&b, b"hello!").unwrap();
        assert_ne!(file_digest(&a).unwrap(), file_digest(&b).unwrap());
        // Known sha-256 of "hello".
        assert_eq!(
            file_digest(&a).unwrap(),
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
    }

    #[test]
    fn fingerprint_is_order_and_boundary_sensitive() {
        assert_ne!(fingerprint(&["a", "b"]), fingerprint(&["b", "a"]));
        assert_ne!(fingerprint(&["ab", ""]), fingerprint(&["a", "b"]));
        assert_eq!(fingerprint(&["a", "b"]), fingerprint(&["a", "b"]));
    }

    #[test]
    fn checkpoints_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cp = Checkpoints::open(dir.path()).unwrap();
        assert!(!cp.is_current("pages", "abc"));
        cp.record("pages", "abc").unwrap();
        assert!(cp.is_current("pages", "abc"));
        assert!(!cp.is_current("pages", "abd"));
        cp.invalidate("pages").unwrap();
        assert!(!cp.is_current("pages", "abc"));
        cp.invalidate("pages").unwrap(); // idempotent

        let mut counters = Counters::new();
        counters.set("page.rows", 41);
        counters.set("page.redirects", 7);
        cp.save_counters("pages", &counters).unwrap();
        assert_eq!(cp.load_counters("pages").unwrap(), counters);
        assert_eq!(cp.load_counters("nothing").unwrap(), Counters::new());
    }

    #[test]
    fn digest_streams_large_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("big");
        let mut f = File::create(&p).unwrap();
        for i in 0..100_000u64 {
            writeln!(f, "{i}").unwrap();
        }
        drop(f);
        let d1 = file_digest(&p).unwrap();
        let d2 = file_digest(&p).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(d1.len(), 64);
    }
}
