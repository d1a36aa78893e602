use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, OnceLock, RwLock};

use super::{c_alpha_uncached, check_alpha, Kernel, QuadConfig, SpectralConstant};
use crate::error::{HamError, Result};

/// Memoised `C_α` values keyed by kernel and the shortest decimal form of `α`.
///
/// Values are computed at most once per key per process. If a backing file is
/// attached, computed values are appended as `kernel alpha value quad_error`
/// lines and preloaded on attach; the file is never rewritten.
pub struct CAlphaCache {
    map: RwLock<BTreeMap<(Kernel, String), SpectralConstant>>,
    file: Mutex<Option<PathBuf>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
}

fn key(alpha: f64, kernel: Kernel) -> (Kernel, String) {
    // `{}` on f64 is the shortest representation that round-trips.
    (kernel, format!("{}", alpha + 0.0))
}

impl Default for CAlphaCache {
    fn default() -> Self {
        Self::new()
    }
}

impl CAlphaCache {
    pub fn new() -> Self {
        CAlphaCache {
            map: RwLock::new(BTreeMap::new()),
            file: Mutex::new(None),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn global() -> &'static CAlphaCache {
        static GLOBAL: OnceLock<CAlphaCache> = OnceLock::new();
        GLOBAL.get_or_init(CAlphaCache::new)
    }

    /// Attaches an append-only backing file, loading any entries it holds.
    /// Malformed lines are an integrity error.
    pub fn attach_file(&self, path: &Path) -> Result<usize> {
        let mut loaded = 0;
        if path.exists() {
            let reader = BufReader::new(std::fs::File::open(path)?);
            let mut map = self.map.write().expect("cache lock poisoned");
            for (lineno, line) in reader.lines().enumerate() {
                let line = line?;
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let entry = parse_line(line).ok_or_else(|| {
                    HamError::Io(format!("{}:{}: malformed cache line '{line}'", path.display(), lineno + 1))
                })?;
                map.entry(key(entry.alpha, entry.kernel)).or_insert(entry);
                loaded += 1;
            }
        }
        *self.file.lock().expect("cache lock poisoned") = Some(path.to_path_buf());
        Ok(loaded)
    }

    pub fn detach_file(&self) {
        *self.file.lock().expect("cache lock poisoned") = None;
    }

    pub fn get(&self, alpha: f64, kernel: Kernel) -> Option<SpectralConstant> {
        self.map.read().expect("cache lock poisoned").get(&key(alpha, kernel)).copied()
    }

    pub fn get_or_compute(&self, alpha: f64, kernel: Kernel, cfg: &QuadConfig) -> Result<SpectralConstant> {
        check_alpha(alpha, kernel)?;
        if let Some(c) = self.get(alpha, kernel) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(c);
        }
        let mut map = self.map.write().expect("cache lock poisoned");
        let k = key(alpha, kernel);
        if let Some(c) = map.get(&k) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(*c);
        }
        let c = c_alpha_uncached(alpha, kernel, cfg)?;
        self.misses.fetch_add(1, Ordering::Relaxed);
        map.insert(k, c);
        drop(map);
        if let Some(path) = self.file.lock().expect("cache lock poisoned").as_ref() {
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            writeln!(f, "{} {} {:e} {:e}", c.kernel, c.alpha, c.value, c.quad_error)?;
        }
        Ok(c)
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.map.read().expect("cache lock poisoned").len(),
        }
    }
}

fn parse_line(line: &str) -> Option<SpectralConstant> {
    let mut it = line.split_whitespace();
    let kernel: Kernel = it.next()?.parse().ok()?;
    let alpha: f64 = it.next()?.parse().ok()?;
    let value: f64 = it.next()?.parse().ok()?;
    let quad_error: f64 = it.next()?.parse().ok()?;
    if it.next().is_some() || !value.is_finite() || !(value > 0.0) {
        return None;
    }
    Some(SpectralConstant { kernel, alpha, value, quad_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memoises_and_counts() {
        let cache = CAlphaCache::new();
        let cfg = QuadConfig::default();
        let a = cache.get_or_compute(0.3, Kernel::Wave, &cfg).unwrap();
        let b = cache.get_or_compute(0.3, Kernel::Wave, &cfg).unwrap();
        assert_eq!(a, b);
        let s = cache.stats();
        assert_eq!((s.hits, s.misses, s.entries), (1, 1, 1));
        // -0.0 and 0.0 share a key.
        cache.get_or_compute(0.0, Kernel::Wave, &cfg).unwrap();
        cache.get_or_compute(-0.0, Kernel::Wave, &cfg).unwrap();
        assert_eq!(cache.stats().entries, 2);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c_alpha.txt");
        let cfg = QuadConfig::default();
        let first = CAlphaCache::new();
        assert_eq!(first.attach_file(&path).unwrap(), 0);
        let v = first.get_or_compute(0.2, Kernel::Wave, &cfg).unwrap();
        let second = CAlphaCache::new();
        assert_eq!(second.attach_file(&path).unwrap(), 1);
        assert_eq!(second.get(0.2, Kernel::Wave).unwrap().value, v.value);
        second.get_or_compute(0.2, Kernel::Wave, &cfg).unwrap();
        assert_eq!(second.stats().misses, 0);
    }

    #[test]
    fn malformed_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "wave 0.2 notanumber 0\n").unwrap();
        assert!(matches!(CAlphaCache::new().attach_file(&path), Err(HamError::Io(_))));
    }
}
