//! Dataset rows and line-delimited record I/O.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Human,
    Ai,
}

impl Target {
    pub fn index(self) -> usize {
        match self {
            Target::Human => 0,
            Target::Ai => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Target::Human
        } else {
            Target::Ai
        }
    }

    pub fn is_ai(self) -> bool {
        self == Target::Ai
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Human => "human",
            Target::Ai => "ai",
        })
    }
}

/// Ordered (destination language, provenance language) pair naming one
/// sub-dataset. Rendered as `<Dst>_from_<Src>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubDatasetId {
    pub dst: String,
    pub src: String,
}

impl SubDatasetId {
    pub fn new(dst: impl Into<String>, src: impl Into<String>) -> Self {
        Self {
            dst: dst.into(),
            src: src.into(),
        }
    }

    pub fn label(&self) -> String {
        format!("{}_from_{}", self.dst, self.src)
    }
}

impl fmt::Display for SubDatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_from_{}", self.dst, self.src)
    }
}

impl FromStr for SubDatasetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once("_from_") {
            Some((dst, src)) if !dst.is_empty() && !src.is_empty() => Ok(Self::new(dst, src)),
            _ => Err(Error::InvalidArgument(format!(
                "set label `{s}` is not of the form <Dst>_from_<Src>"
            ))),
        }
    }
}

/// One dataset row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetRecord {
    pub task_name: String,
    pub task_url: String,
    pub task_description: String,
    pub language_name: String,
    pub code: String,
    pub target: Target,
    pub set: String,
}

impl SnippetRecord {
    pub fn set_id(&self) -> Result<SubDatasetId> {
        self.set.parse()
    }

    /// Provenance language of the sub-dataset the record belongs to.
    pub fn src(&self) -> Option<&str> {
        self.set.split_once("_from_").map(|(_, src)| src)
    }
}

/// Reads a line-delimited file of JSON objects. Blank lines are ignored;
/// a malformed line is reported with its 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Writes records one JSON object per line. The file is written to a
/// temporary sibling and renamed into place.
pub fn write_jsonl<'a, T, I>(path: &Path, records: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let tmp = path.with_extension("jsonl.tmp");
    {
        let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        for r in records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(|e| Error::io(&tmp, e))?;
        }
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
