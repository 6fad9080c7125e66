//! Line-delimited manifests of tensor files.
//!
//! ```text
//! #role=natural
//! img_000.npy
//! /data/latents/img_001.npy
//! ```
//!
//! The first line names the role. Every following non-blank line that does not
//! start with `#` is a path; relative paths resolve against the manifest's
//! directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::read_file;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Natural,
    Restored,
    Degraded,
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" => Ok(Role::Natural),
            "restored" => Ok(Role::Restored),
            "degraded" => Ok(Role::Degraded),
            other => Err(Error::Format(format!("unknown manifest role {other:?}"))),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Natural => "natural",
            Role::Restored => "restored",
            Role::Degraded => "degraded",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub role: Role,
    pub paths: Vec<PathBuf>,
}

impl Manifest {
    /// Parses manifest text; relative entries are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .map(str::trim)
            .ok_or_else(|| Error::Format("manifest is empty".into()))?;
        let role = header
            .strip_prefix("#role=")
            .ok_or_else(|| Error::Format(format!("manifest header must be '#role=<role>', found {header:?}")))?
            .trim()
            .parse()?;
        let paths = lines
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                let p = PathBuf::from(l);
                if p.is_absolute() {
                    p
                } else {
                    base.join(p)
                }
            })
            .collect();
        Ok(Self { role, paths })
    }

    /// Reads a manifest and checks that every listed file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = String::from_utf8(read_file(path)?)
            .map_err(|_| Error::Format(format!("{} is not UTF-8", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let manifest = Self::parse(&text, base)?;
        if manifest.paths.is_empty() {
            return Err(Error::Empty(format!("manifest {} lists no files", path.display())));
        }
        if let Some(missing) = manifest.paths.iter().find(|p| !p.is_file()) {
            return Err(Error::Format(format!("manifest entry {} does not exist", missing.display())));
        }
        Ok(manifest)
    }

    pub fn render(&self) -> String {
        let mut out = format!("#role={}\n", self.role);
        for p in &self.paths {
            out.push_str(&p.display().to_string());
            out.push('\n');
        }
        out
    }
}
