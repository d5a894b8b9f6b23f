//! Fixed per-item embedding vectors.
//!
//! File format: first line `dim=<d>`, then `item_id<TAB>f1<TAB>...<TAB>fd`.
//! When no external table exists, [`fallback_embeddings`] derives one from
//! the TF-IDF weighted history matrix.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::corpus::{EventStream, IdMaps};
use crate::error::{invalid, Error, Result};
use crate::numerics::{tfidf, truncated_svd_with, DenseMatrix, SparseBinaryMatrix, SvdOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vectors: DenseMatrix,
    covered: Vec<bool>,
}

impl EmbeddingTable {
    pub fn new(vectors: DenseMatrix, covered: Vec<bool>) -> Result<Self> {
        if covered.len() != vectors.rows() {
            return invalid("coverage mask length must equal the number of rows");
        }
        if !vectors.is_finite() {
            return invalid("embedding vectors must be finite");
        }
        Ok(EmbeddingTable { vectors, covered })
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn num_items(&self) -> usize {
        self.vectors.rows()
    }

    pub fn vector(&self, item: u32) -> &[f64] {
        self.vectors.row(item as usize)
    }

    pub fn is_covered(&self, item: u32) -> bool {
        self.covered[item as usize]
    }

    pub fn coverage(&self) -> usize {
        self.covered.iter().filter(|c| **c).count()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.vectors
    }

    pub fn write<W: Write>(&self, ids: &IdMaps, w: &mut W) -> Result<()> {
        writeln!(w, "dim={}", self.dim())?;
        for item in 0..self.num_items() as u32 {
            if !self.is_covered(item) {
                continue;
            }
            write!(w, "{}", ids.item_id(item))?;
            for v in self.vector(item) {
                write!(w, "\t{v:?}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub duplicates: usize,
    pub unknown_items: usize,
}

/// Reads an embedding file against the corpus item map. Items missing from
/// the file are flagged uncovered; duplicated ids keep the last row.
pub fn load_embeddings(path: impl AsRef<Path>, ids: &IdMaps) -> Result<(EmbeddingTable, LoadReport)> {
    read_embeddings(BufReader::new(crate::error::open_file(path)?), ids)
}

pub fn read_embeddings<R: BufRead>(reader: R, ids: &IdMaps) -> Result<(EmbeddingTable, LoadReport)> {
    let n_items = ids.num_items();
    let mut lines = reader.lines().enumerate();
    let mut dim: Option<usize> = None;
    let mut report = LoadReport::default();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; n_items];

    for (n, line) in &mut lines {
        let line = line?;
        let lineno = n + 1;
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match dim {
            None => {
                let d = line
                    .strip_prefix("dim=")
                    .and_then(|d| d.trim().parse::<usize>().ok())
                    .ok_or_else(|| Error::Parse {
                        line: lineno,
                        reason: "expected header `dim=<d>`".into(),
                    })?;
                dim = Some(d);
            }
            Some(d) => {
                let mut fields = line.split('\t');
                let id = fields.next().unwrap_or_default();
                let values: Vec<f64> = fields
                    .map(|f| {
                        f.trim().parse::<f64>().map_err(|_| Error::Parse {
                            line: lineno,
                            reason: format!("invalid float {f:?}"),
                        })
                    })
                    .collect::<Result<_>>()?;
                if values.len() != d {
                    return Err(Error::Format(format!(
                        "line {lineno}: row has {} values, header says {d}",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Format(format!("line {lineno}: non-finite value")));
                }
                match ids.item_index(id) {
                    Some(ix) => {
                        let slot = &mut rows[ix as usize];
                        if slot.is_some() {
                            log::warn!("embedding file repeats item {id} (line {lineno}); keeping the last row");
                            report.duplicates += 1;
                        }
                        *slot = Some(values);
                    }
                    None => report.unknown_items += 1,
                }
            }
        }
    }

    let dim = dim.unwrap_or(0);
    let mut vectors = DenseMatrix::zeros(n_items, dim);
    let mut covered = vec![false; n_items];
    for (ix, row) in rows.into_iter().enumerate() {
        if let Some(values) = row {
            vectors.row_mut(ix).copy_from_slice(&values);
            covered[ix] = true;
        }
    }
    Ok((EmbeddingTable { vectors, covered }, report))
}

/// Item vectors from the truncated SVD of the transposed TF-IDF history
/// matrix (items as rows), scaled by the square root of the singular values.
/// Items absent from `history` get the zero vector and stay uncovered.
pub fn fallback_embeddings(history: &EventStream, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let n_items = history.num_items();
    let active_users = (0..history.num_users() as u32)
        .filter(|&u| !history.user_events(u).is_empty())
        .count();
    if dim == 0 || dim > active_users.min(n_items) {
        return invalid(format!(
            "embedding dim {dim} outside [1, {}]",
            active_users.min(n_items)
        ));
    }
    let rows: Vec<Vec<u32>> = (0..history.num_users() as u32)
        .map(|u| history.user_events(u).iter().map(|e| e.item).collect())
        .collect();
    let r = SparseBinaryMatrix::from_rows(n_items, rows)?;
    let items_by_users = tfidf(&r).transpose();
    let opts = SvdOptions {
        keep_v: false,
        ..SvdOptions::default()
    };
    let f = truncated_svd_with(&items_by_users, dim, seed, &opts)?;

    let mut seen = vec![false; n_items];
    for e in history.iter() {
        seen[e.item as usize] = true;
    }
    let scale: Vec<f64> = f.sigma.iter().map(|s| s.sqrt()).collect();
    let mut vectors = DenseMatrix::zeros(n_items, dim);
    for j in 0..n_items {
        if !seen[j] {
            continue;
        }
        for (t, s) in scale.iter().enumerate() {
            vectors.set(j, t, f.u.get(j, t) * s);
        }
    }
    EmbeddingTable::new(vectors, seen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_stream, parse_log};
    use crate::numerics::cosine;

    fn ids(items: &[&str]) -> IdMaps {
        IdMaps::new(vec!["u".into()], items.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn full_coverage() {
        let text = "dim=3\na\t1\t2\t3\nb\t0.5\t-1\t2e-1\n";
        let (t, rep) = read_embeddings(text.as_bytes(), &ids(&["a", "b"])).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.coverage(), 2);
        assert_eq!(t.vector(1), &[0.5, -1.0, 0.2]);
        assert_eq!(rep, LoadReport::default());
    }

    #[test]
    fn empty_file_has_no_coverage() {
        let (t, _) = read_embeddings("".as_bytes(), &ids(&["a"])).unwrap();
        assert_eq!(t.coverage(), 0);
        assert!(!t.is_covered(0));
    }

    #[test]
    fn duplicate_keeps_last() {
        let text = "dim=2\na\t1\t1\na\t2\t3\n";
        let (t, rep) = read_embeddings(text.as_bytes(), &ids(&["a", "b"])).unwrap();
        assert_eq!(t.vector(0), &[2.0, 3.0]);
        assert_eq!(rep.duplicates, 1);
        assert!(!t.is_covered(1));
    }

    #[test]
    fn ragged_rows_rejected() {
        let text = "dim=2\na\t1\t1\nb\t2\n";
        assert!(matches!(read_embeddings(text.as_bytes(), &ids(&["a", "b"])), Err(Error::Format(_))));
    }

    #[test]
    fn write_read_round_trip() {
        let m = ids(&["a", "b", "c"]);
        let t = EmbeddingTable::new(
            DenseMatrix::from_fn(3, 2, |r, c| 0.1 * r as f64 - 0.3 * c as f64 + 1.0 / 3.0),
            vec![true, false, true],
        )
        .unwrap();
        let mut buf = Vec::new();
        t.write(&m, &mut buf).unwrap();
        let (back, _) = read_embeddings(buf.as_slice(), &m).unwrap();
        assert_eq!(back, EmbeddingTable::new(
            DenseMatrix::from_fn(3, 2, |r, c| if r == 1 { 0.0 } else { t.matrix().get(r, c) }),
            vec![true, false, true],
        ).unwrap());
    }

    fn history(text: &str) -> EventStream {
        build_stream(parse_log(text.as_bytes()).unwrap(), 0, usize::MAX).unwrap()
    }

    #[test]
    fn identical_reader_sets_give_identical_rows() {
        let h = history("a\tx\t1\na\ty\t2\nb\tx\t3\nb\ty\t4\nb\tz\t5\nc\tz\t6\nc\tw\t7\n");
        let t = fallback_embeddings(&h, 2, 3).unwrap();
        let (x, y) = (h.ids().item_index("x").unwrap(), h.ids().item_index("y").unwrap());
        for (a, b) in t.vector(x).iter().zip(t.vector(y)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn unseen_item_is_zero_and_uncovered() {
        let full = history("a\tx\t1\nb\ty\t2\nc\tz\t30\nc\tx\t3\n");
        let h = full.window(0, 10);
        let t = fallback_embeddings(&h, 2, 1).unwrap();
        let z = h.ids().item_index("z").unwrap();
        assert!(!t.is_covered(z));
        assert!(t.vector(z).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn disjoint_reader_blocks_are_orthogonal() {
        // block 1: 3 users x 2 items, block 2: 2 users x 3 items (distinct spectra)
        let mut text = String::new();
        for u in 0..3 {
            for i in ["p", "q"] {
                text += &format!("u{u}\t{i}\t{}\n", u + 1);
            }
        }
        text += "u0\tp2\t9\n";
        for u in 3..5 {
            for i in ["r", "s", "t"] {
                text += &format!("u{u}\t{i}\t{}\n", u + 1);
            }
        }
        let h = history(&text);
        let t = fallback_embeddings(&h, 3, 5).unwrap();
        let p = t.vector(h.ids().item_index("p").unwrap());
        let r = t.vector(h.ids().item_index("r").unwrap());
        assert!(cosine(p, r).abs() < 1e-6);
    }

    #[test]
    fn dim_out_of_range() {
        let h = history("a\tx\t1\nb\ty\t2\n");
        assert!(fallback_embeddings(&h, 0, 1).is_err());
        assert!(fallback_embeddings(&h, 3, 1).is_err());
    }
}
