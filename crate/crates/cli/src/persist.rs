//! Checkpoints, occupation counts, window-table caches and atomic writes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use zerodelay_core::model::SystemSpec;
use zerodelay_core::qlearn::{QTable, Scheme};
use zerodelay_core::quantizer::QuantizerSet;

use crate::error::{CliError, Result};
use crate::matrix_io::format_matrix;

/// Writes to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(&tmp, e))?;
    f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Header lines `key<TAB>value` until the first line that is not one.
fn header<'a>(lines: &mut std::iter::Peekable<impl Iterator<Item = (usize, &'a str)>>) -> Vec<(&'a str, &'a str)> {
    let mut out = Vec::new();
    while let Some(&(_, line)) = lines.peek() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('\t') {
                out.push((k, v));
            }
            lines.next();
        } else {
            break;
        }
    }
    out
}

fn field<'a>(h: &[(&'a str, &'a str)], key: &str, path: &Path) -> Result<&'a str> {
    h.iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| parse_err(path, 0, format!("header lacks `{key}`")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: String,
    pub scheme: Scheme,
    pub n: usize,
    pub steps: u64,
    pub converged: bool,
    /// `(state_id, quantizer_id, value, visits)`.
    pub rows: Vec<(u64, u64, f64, u64)>,
}

impl Checkpoint {
    pub fn from_table(
        table: &QTable,
        set: &QuantizerSet,
        config_hash: &str,
        scheme: Scheme,
        n: usize,
        steps: u64,
        converged: bool,
    ) -> Self {
        let mut rows: Vec<(u64, u64, f64, u64)> = table
            .visited_pairs()
            .map(|(z, u, v, k)| (z, set.get(u).id(), v, k))
            .collect();
        rows.sort_by_key(|r| (r.0, r.1));
        Self {
            config_hash: config_hash.to_string(),
            scheme,
            n,
            steps,
            converged,
            rows,
        }
    }

    pub fn to_table(&self, set: &QuantizerSet, v0: f64) -> Result<QTable> {
        let mut t = QTable::new(set.len(), v0);
        for &(z, qid, v, k) in &self.rows {
            let u = set.index_of(qid).ok_or_else(|| {
                CliError::Validation(format!("quantizer {qid} is not in the active set"))
            })?;
            t.restore(z, u, v, k)?;
        }
        Ok(t)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "#config_hash\t{}", self.config_hash);
        let _ = writeln!(s, "#steps\t{}", self.steps);
        let _ = writeln!(s, "#scheme\t{}", self.scheme.name());
        let _ = writeln!(s, "#n\t{}", self.n);
        let _ = writeln!(s, "#converged\t{}", self.converged);
        for (z, q, v, k) in &self.rows {
            let _ = writeln!(s, "{z}\t{q}\t{v:?}\t{k}");
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().peekable();
        let h = header(&mut lines);
        let num = |key: &str| -> Result<u64> {
            field(&h, key, path)?
                .parse()
                .map_err(|_| parse_err(path, 0, format!("bad `{key}`")))
        };
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split('\t').collect();
            let bad = || parse_err(path, i + 1, "expected state_id, quantizer_id, value, visits");
            if cells.len() != 4 {
                return Err(bad());
            }
            rows.push((
                cells[0].parse().map_err(|_| bad())?,
                cells[1].parse().map_err(|_| bad())?,
                cells[2].parse().map_err(|_| bad())?,
                cells[3].parse().map_err(|_| bad())?,
            ));
        }
        Ok(Self {
            config_hash: field(&h, "config_hash", path)?.to_string(),
            scheme: Scheme::parse(field(&h, "scheme", path)?)?,
            n: num("n")? as usize,
            steps: num("steps")?,
            converged: field(&h, "converged", path)? == "true",
            rows,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Lattice occupation counts as `point_id<TAB>visits`, positive counts only.
pub fn save_occupation(path: &Path, config_hash: &str, visits: &[u64]) -> Result<()> {
    let mut s = format!("#config_hash\t{config_hash}\n#points\t{}\n", visits.len());
    for (id, &v) in visits.iter().enumerate().filter(|(_, &v)| v > 0) {
        let _ = writeln!(s, "{id}\t{v}");
    }
    write_atomic(path, s.as_bytes())
}

/// Returns `None` when the file was written under another config.
pub fn load_occupation(path: &Path, config_hash: &str) -> Result<Option<Vec<u64>>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate().peekable();
    let h = header(&mut lines);
    if field(&h, "config_hash", path)? != config_hash {
        return Ok(None);
    }
    let points: usize = field(&h, "points", path)?
        .parse()
        .map_err(|_| parse_err(path, 0, "bad `points`"))?;
    let mut visits = vec![0u64; points];
    for (i, line) in lines {
        let bad = || parse_err(path, i + 1, "expected point_id, visits");
        let (a, b) = line.split_once('\t').ok_or_else(bad)?;
        let id: usize = a.parse().map_err(|_| bad())?;
        *visits.get_mut(id).ok_or_else(bad)? = b.parse().map_err(|_| bad())?;
    }
    Ok(Some(visits))
}

/// Key of a window table: hash of `(T, O, quantizer ids, N)`.
pub fn window_key(spec: &SystemSpec, set: &QuantizerSet, n: usize) -> String {
    let mut h = Sha256::new();
    h.update(format_matrix(&spec.source.matrix().to_rows()).as_bytes());
    h.update(b"|");
    h.update(format_matrix(&spec.channel.matrix().to_rows()).as_bytes());
    h.update(b"|");
    h.update(format!("{:?}|{n}", set.ids()).as_bytes());
    hex::encode(h.finalize())
}

pub fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("window-{}.cache", &key[..16]))
}

pub fn save_window_cache(path: &Path, key: &str, entries: &[(u64, Vec<f64>)]) -> Result<()> {
    let mut s = format!("#key\t{key}\n");
    for (id, p) in entries {
        let cells: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "{id}\t{}", cells.join(" "));
    }
    write_atomic(path, s.as_bytes())
}

/// Returns `None` when the file is missing or was built for another key.
pub fn load_window_cache(path: &Path, key: &str) -> Result<Option<Vec<(u64, Vec<f64>)>>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(CliError::io(path, e)),
    };
    let mut lines = text.lines().enumerate().peekable();
    let h = header(&mut lines);
    if field(&h, "key", path)? != key {
        log::warn!("{}: cache key mismatch, rebuilding", path.display());
        return Ok(None);
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let bad = || parse_err(path, i + 1, "expected window_id, predictor");
        let (a, b) = line.split_once('\t').ok_or_else(bad)?;
        let p = b
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<f64>>>()?;
        out.push((a.parse().map_err(|_| bad())?, p));
    }
    Ok(Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_text_round_trip() {
        let c = Checkpoint {
            config_hash: "ab".into(),
            scheme: Scheme::Window,
            n: 2,
            steps: 10,
            converged: false,
            rows: vec![(0, 5, 0.1 + 0.2, 3), (7, 1, -0.0, 1)],
        };
        let back = Checkpoint::parse(&c.render(), Path::new("c")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn malformed_row() {
        let text = "#config_hash\tab\n#steps\t1\n#scheme\twindow\n#n\t1\n#converged\tfalse\n1\t2\n";
        assert!(matches!(
            Checkpoint::parse(text, Path::new("c")),
            Err(CliError::Parse { line: 6, .. })
        ));
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("sub/file.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn occupation_hash_mismatch() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("o");
        save_occupation(&p, "h1", &[0, 3, 0, 1]).unwrap();
        assert_eq!(load_occupation(&p, "h1").unwrap(), Some(vec![0, 3, 0, 1]));
        assert_eq!(load_occupation(&p, "h2").unwrap(), None);
    }
}
