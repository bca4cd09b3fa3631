//! File formats: edge lists, the `TADA` dense-matrix container, CSV
//! attributes, labels/splits, and `key=value` sidecars.
//!
//! Dense binary layout (little-endian):
//!
//! ```text
//! b"TADA" | u32 version = 1 | u64 rows | u64 cols | rows*cols f32, row-major
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Result, TadaError};
use crate::graph::{BuildReport, Graph, WeightedGraph};
use crate::labels::{LabelVector, Split};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"TADA";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

/// Summary of an edge-list load.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub lines: usize,
    pub edges: usize,
    pub duplicates: usize,
    pub self_loops: usize,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn parse_id(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| TadaError::Parse {
        line,
        msg: format!("expected a non-negative integer node id, found {tok:?}"),
    })
}

/// Parses a `# nodes N` directive, if this comment is one.
fn nodes_directive(comment: &str) -> Option<&str> {
    let rest = comment.trim_start_matches('#').trim();
    rest.strip_prefix("nodes").map(|r| r.trim_start_matches(':').trim())
}

/// Reads an unweighted edge list.
///
/// Node count is `max id + 1` unless a `# nodes N` header declares it; without
/// the header every id in `0..=max` must appear on some line.
pub fn read_edge_list<R: BufRead>(reader: R) -> Result<(Graph, LoadReport)> {
    let mut pairs = Vec::new();
    let mut declared: Option<usize> = None;
    let mut lines = 0;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        lines = lineno;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if let Some(val) = nodes_directive(trimmed) {
                declared = Some(parse_id(val, lineno)?);
            }
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        let (Some(a), Some(b)) = (toks.next(), toks.next()) else {
            return Err(TadaError::Parse {
                line: lineno,
                msg: "expected two node ids".into(),
            });
        };
        pairs.push((parse_id(a, lineno)?, parse_id(b, lineno)?));
    }
    let max_id = pairs.iter().map(|&(u, v)| u.max(v)).max();
    let n = match (declared, max_id) {
        (Some(n), Some(m)) if m >= n => {
            return Err(TadaError::NodeOutOfRange { id: m, n });
        }
        (Some(n), _) => n,
        (None, Some(m)) => {
            let mut seen = vec![false; m + 1];
            for &(u, v) in &pairs {
                seen[u] = true;
                seen[v] = true;
            }
            if let Some(gap) = seen.iter().position(|&s| !s) {
                return Err(TadaError::NodeGap(gap));
            }
            m + 1
        }
        (None, None) => return Err(TadaError::EmptyGraph),
    };
    let (g, BuildReport { duplicates, self_loops }) = Graph::from_edges(n, pairs)?;
    if g.edge_count() == 0 {
        return Err(TadaError::EmptyGraph);
    }
    let report = LoadReport {
        lines,
        edges: g.edge_count(),
        duplicates,
        self_loops,
    };
    Ok((g, report))
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<(Graph, LoadReport)> {
    read_edge_list(open(path.as_ref())?)
}

/// Writes `# nodes N` followed by one `u\tv` line per edge (`u < v`).
pub fn write_edge_list<W: Write>(g: &Graph, mut w: W) -> Result<()> {
    writeln!(w, "# nodes {}", g.node_count())?;
    for &(u, v) in g.edges() {
        writeln!(w, "{u}\t{v}")?;
    }
    Ok(())
}

pub fn save_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_edge_list(g, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Weighted edge list: `u\tv\tw`, weight printed with 17 significant digits.
pub fn write_weighted_edge_list<T: Scalar, W: Write>(wg: &WeightedGraph<T>, mut w: W) -> Result<()> {
    writeln!(w, "# nodes {}", wg.base().node_count())?;
    for (u, v, x) in wg.weighted_edges() {
        writeln!(w, "{u}\t{v}\t{:.16e}", x.to_f64_lossy())?;
    }
    Ok(())
}

/// Reads a weighted edge list. A line with only two ids gets weight 1.
pub fn read_weighted_edge_list<T: Scalar, R: BufRead>(reader: R) -> Result<WeightedGraph<T>> {
    let mut triples = Vec::new();
    let mut declared = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if let Some(val) = nodes_directive(trimmed) {
                declared = Some(parse_id(val, lineno)?);
            }
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if toks.len() < 2 || toks.len() > 3 {
            return Err(TadaError::Parse {
                line: lineno,
                msg: "expected `u v [w]`".into(),
            });
        }
        let u = parse_id(toks[0], lineno)?;
        let v = parse_id(toks[1], lineno)?;
        let w = match toks.get(2) {
            Some(t) => t.parse::<f64>().map_err(|_| TadaError::Parse {
                line: lineno,
                msg: format!("bad weight {t:?}"),
            })?,
            None => 1.0,
        };
        if !w.is_finite() {
            return Err(TadaError::NonFinite("edge weight"));
        }
        triples.push((u, v, T::of(w)));
    }
    let max_id = triples.iter().map(|&(u, v, _)| u.max(v)).max();
    let n = match (declared, max_id) {
        (Some(n), _) => n,
        (None, Some(m)) => m + 1,
        (None, None) => return Err(TadaError::EmptyGraph),
    };
    WeightedGraph::from_weighted_edges(n, &triples)
}

pub fn load_weighted_edge_list<T: Scalar>(path: impl AsRef<Path>) -> Result<WeightedGraph<T>> {
    read_weighted_edge_list(open(path.as_ref())?)
}

pub fn write_dense_binary<T: Scalar, W: Write>(m: &DenseMatrix<T>, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        w.write_all(&(v.to_f64_lossy() as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Reads one `TADA` block; the reader is left positioned after it, so blocks
/// can be read back-to-back from a concatenated container.
pub fn read_dense_binary<T: Scalar, R: Read>(mut r: R) -> Result<DenseMatrix<T>> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[0..4] != MAGIC {
        return Err(TadaError::Format("missing TADA magic bytes".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(TadaError::Format(format!("unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(header[16..24].try_into().expect("8 bytes")) as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| TadaError::Format("matrix size overflows".into()))?;
    let mut data = Vec::with_capacity(count);
    let mut buf = [0u8; 4];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        let v = f32::from_le_bytes(buf);
        if !v.is_finite() {
            return Err(TadaError::NonFinite("dense matrix file"));
        }
        data.push(T::of(f64::from(v)));
    }
    DenseMatrix::from_vec(rows, cols, data)
}

pub fn save_dense_binary<T: Scalar>(m: &DenseMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dense_binary(m, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Comma-separated rows, no header.
pub fn read_dense_csv<T: Scalar, R: BufRead>(reader: R) -> Result<DenseMatrix<T>> {
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row = trimmed
            .split(',')
            .map(|tok| {
                let v: f64 = tok.trim().parse().map_err(|_| TadaError::Parse {
                    line: idx + 1,
                    msg: format!("bad number {tok:?}"),
                })?;
                if !v.is_finite() {
                    return Err(TadaError::NonFinite("attribute CSV"));
                }
                Ok(T::of(v))
            })
            .collect::<Result<Vec<T>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(TadaError::DimensionMismatch {
                    what: "CSV row length",
                    expected: first.len(),
                    found: row.len(),
                });
            }
        }
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows)
}

pub fn write_dense_csv<T: Scalar, W: Write>(m: &DenseMatrix<T>, mut w: W) -> Result<()> {
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(|v| format!("{}", v.to_f64_lossy())).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Loads an attribute matrix, choosing binary or CSV by the leading magic bytes.
pub fn load_attributes<T: Scalar>(path: impl AsRef<Path>) -> Result<DenseMatrix<T>> {
    let mut reader = open(path.as_ref())?;
    let is_binary = reader.fill_buf()?.starts_with(MAGIC);
    let m = if is_binary {
        read_dense_binary(reader)?
    } else {
        read_dense_csv(reader)?
    };
    m.ensure_finite("attribute matrix")?;
    Ok(m)
}

fn read_labels_only<R: BufRead>(reader: R) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.push(parse_id(t, idx + 1)?);
    }
    Ok(out)
}

fn read_splits_only<R: BufRead>(reader: R) -> Result<Vec<Split>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.push(t.parse()?);
    }
    Ok(out)
}

/// Labels with an optional parallel split file; without one every node is
/// tagged `train`.
pub fn read_labels<R: BufRead, S: BufRead>(labels: R, splits: Option<S>) -> Result<LabelVector> {
    let labels = read_labels_only(labels)?;
    match splits {
        Some(s) => LabelVector::new(labels, read_splits_only(s)?),
        None => LabelVector::all_train(labels),
    }
}

pub fn load_labels(labels: impl AsRef<Path>, splits: Option<&Path>) -> Result<LabelVector> {
    let l = open(labels.as_ref())?;
    let s = splits.map(open).transpose()?;
    read_labels(l, s)
}

pub fn save_labels(y: &LabelVector, labels: impl AsRef<Path>, splits: impl AsRef<Path>) -> Result<()> {
    let mut lw = BufWriter::new(File::create(labels)?);
    let mut sw = BufWriter::new(File::create(splits)?);
    for (&l, s) in y.labels().iter().zip(y.splits()) {
        writeln!(lw, "{l}")?;
        writeln!(sw, "{s}")?;
    }
    lw.flush()?;
    sw.flush()?;
    Ok(())
}

/// Ordered `key=value` text (one pair per line, `#` comments).
pub fn read_key_values<R: BufRead>(reader: R) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (k, v) = t.split_once('=').ok_or_else(|| TadaError::Parse {
            line: idx + 1,
            msg: "expected key=value".into(),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn write_key_values<W: Write>(pairs: &[(&str, String)], mut w: W) -> Result<()> {
    for (k, v) in pairs {
        writeln!(w, "{k}={v}")?;
    }
    Ok(())
}
