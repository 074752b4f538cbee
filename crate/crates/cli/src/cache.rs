//! On-disk factorization cache.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ibse_core::problems::ProblemId;
use ibse_core::schur::{FactorizationMeta, IbseSystem, SchurFactorization};
use log::{info, warn};

const EXTENSION: &str = "ibse";

#[derive(Clone, Debug)]
pub struct CacheEntry {
    pub path: PathBuf,
    pub bytes: u64,
    /// `None` when the file cannot be read as a factorization.
    pub meta: Option<FactorizationMeta>,
}

/// A directory holding one factorization per problem, order and grid size.
#[derive(Clone, Debug)]
pub struct FactorCache {
    dir: PathBuf,
}

impl FactorCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).with_context(|| format!("creating cache directory {}", dir.display()))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, id: ProblemId, sys: &IbseSystem) -> PathBuf {
        let meta = sys.meta();
        self.dir.join(format!("{id}-k{}-n{}.{EXTENSION}", meta.k, meta.n))
    }

    /// Loads the stored factorization when its metadata matches `sys`;
    /// otherwise assembles, stores, and returns a fresh one. The flag is
    /// true when the stored file was reused.
    pub fn fetch(
        &self,
        id: ProblemId,
        sys: &IbseSystem,
        threads: usize,
    ) -> ibse_core::Result<(SchurFactorization, bool)> {
        let path = self.path_for(id, sys);
        if path.exists() {
            match SchurFactorization::load_matching(&path, &sys.meta()) {
                Ok(f) => {
                    info!("reusing factorization {}", path.display());
                    return Ok((f, true));
                }
                Err(e) => warn!("cached factorization {} not usable ({e}); rebuilding", path.display()),
            }
        }
        let fact = sys.assemble(threads)?;
        let tmp = path.with_extension("tmp");
        fact.save(&tmp)?;
        fs::rename(&tmp, &path)?;
        info!("stored factorization {}", path.display());
        Ok((fact, false))
    }

    pub fn entries(&self) -> Result<Vec<CacheEntry>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some(EXTENSION) {
                continue;
            }
            let bytes = fs::metadata(&path)?.len();
            let meta = SchurFactorization::load(&path).ok().map(|f| *f.meta());
            out.push(CacheEntry { path, bytes, meta });
        }
        out.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(out)
    }

    /// Removes every cached factorization, returning how many were removed.
    pub fn clear(&self) -> Result<usize> {
        let entries = self.entries()?;
        for e in &entries {
            fs::remove_file(&e.path)?;
        }
        Ok(entries.len())
    }
}
