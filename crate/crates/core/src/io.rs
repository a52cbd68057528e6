//! File formats for datasets and labels.
//!
//! - continuous, categorical and count tables: CSV with a header row;
//! - graphs: whitespace edge lists with 0-based ids and an optional
//!   `directed`/`undirected` header (optionally followed by the node count),
//!   Matrix Market coordinate files, or a square 0/1 CSV without header;
//! - several views: a JSON manifest `{"views": [{"name", "model", "path"}]}`
//!   whose paths are relative to the manifest.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{CategoricalData, ContinuousData, CountData, Dataset, Graph};
use crate::error::{Error, Result};
use crate::models::ModelKind;

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::data(format!("csv: {other:?}")),
    }
}

/// All records of a CSV source, trimmed, with no header interpretation.
fn read_records<R: Read>(r: R) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(r);
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_error)?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(rows)
}

fn split_header(mut rows: Vec<Vec<String>>) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    if rows.is_empty() {
        return Err(Error::data("table is empty"));
    }
    let header = rows.remove(0);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != header.len()) {
        return Err(Error::data(format!(
            "row {} has {} fields, header has {}",
            i + 2,
            r.len(),
            header.len()
        )));
    }
    Ok((header, rows))
}

fn parse_real(s: &str, row: usize, col: usize) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::data(format!("row {row}, column {col}: {s:?} is not a finite number")))
}

fn continuous_from(header: Vec<String>, rows: &[Vec<String>]) -> Result<ContinuousData> {
    let mut values = Vec::with_capacity(rows.len() * header.len());
    for (i, r) in rows.iter().enumerate() {
        for (j, s) in r.iter().enumerate() {
            values.push(parse_real(s, i + 2, j + 1)?);
        }
    }
    ContinuousData::new(header, rows.len(), values)
}

fn counts_from(header: Vec<String>, rows: &[Vec<String>]) -> Result<CountData> {
    let dense = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .enumerate()
                .map(|(j, s)| {
                    s.parse::<u64>().map_err(|_| {
                        Error::data(format!("row {}, column {}: {s:?} is not a non-negative integer", i + 2, j + 1))
                    })
                })
                .collect::<Result<Vec<u64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    CountData::from_dense(header, &dense)
}

pub fn read_continuous_csv<R: Read>(r: R) -> Result<ContinuousData> {
    let (header, rows) = split_header(read_records(r)?)?;
    continuous_from(header, &rows)
}

/// Modalities are numbered by first appearance in each column.
pub fn read_categorical_csv<R: Read>(r: R) -> Result<CategoricalData> {
    let (header, rows) = split_header(read_records(r)?)?;
    CategoricalData::from_strings(header, &rows)
}

pub fn read_counts_csv<R: Read>(r: R) -> Result<CountData> {
    let (header, rows) = split_header(read_records(r)?)?;
    counts_from(header, &rows)
}

fn write_table<W: Write>(w: W, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_error)?;
    for r in rows {
        out.write_record(&r).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// Reals are written in shortest round-trip form.
pub fn write_continuous_csv<W: Write>(w: W, d: &ContinuousData) -> Result<()> {
    write_table(w, &d.names, (0..d.n()).map(|i| d.row(i).iter().map(f64::to_string).collect()))
}

pub fn write_categorical_csv<W: Write>(w: W, d: &CategoricalData) -> Result<()> {
    write_table(
        w,
        &d.names,
        (0..d.n()).map(|i| {
            d.row(i)
                .iter()
                .enumerate()
                .map(|(j, &c)| d.modalities[j][c as usize].clone())
                .collect()
        }),
    )
}

pub fn write_counts_csv<W: Write>(w: W, d: &CountData) -> Result<()> {
    write_table(w, &d.names, (0..d.n()).map(|i| d.dense_row(i).iter().map(u64::to_string).collect()))
}

fn parse_id(s: &str, line: usize) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| Error::data(format!("line {line}: {s:?} is not a node id")))
}

/// Edge list; without a header the graph is undirected and has
/// `max id + 1` nodes.
pub fn read_edge_list<R: BufRead>(r: R) -> Result<Graph> {
    let mut directed = false;
    let mut declared_n = None;
    let mut edges = Vec::new();
    let mut seen_content = false;
    for (no, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let first = tok.next().expect("non-empty line");
        if !seen_content && (first == "directed" || first == "undirected") {
            directed = first == "directed";
            if let Some(n) = tok.next() {
                declared_n = Some(parse_id(n, no + 1)?);
            }
            seen_content = true;
            continue;
        }
        seen_content = true;
        let (Some(b), None) = (tok.next(), tok.next()) else {
            return Err(Error::data(format!("line {}: expected two node ids", no + 1)));
        };
        edges.push((parse_id(first, no + 1)?, parse_id(b, no + 1)?));
    }
    let max_id = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
    let n = match declared_n {
        Some(n) if n < max_id => {
            return Err(Error::data(format!("node id {} exceeds the declared count {n}", max_id - 1)));
        }
        Some(n) => n,
        None => max_id,
    };
    Ok(Graph::from_edges(n, edges, directed)?.0)
}

pub fn write_edge_list<W: Write>(mut w: W, g: &Graph) -> Result<()> {
    let kind = if g.is_directed() { "directed" } else { "undirected" };
    writeln!(w, "{kind} {}", g.n())?;
    for (i, j) in g.edges() {
        writeln!(w, "{i} {j}")?;
    }
    w.flush()?;
    Ok(())
}

/// Matrix Market coordinate file; non-zero entries are edges. `symmetric`
/// files, and `general` files whose pattern is symmetric, give undirected graphs.
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<Graph> {
    let mut lines = r.lines().enumerate();
    let (_, banner) = lines.next().ok_or_else(|| Error::data("empty Matrix Market file"))?;
    let banner = banner?.to_lowercase();
    let fields: Vec<&str> = banner.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(Error::data("expected a '%%MatrixMarket matrix coordinate' banner"));
    }
    let pattern = fields[3] == "pattern";
    if !matches!(fields[3], "pattern" | "integer" | "real") {
        return Err(Error::data(format!("unsupported Matrix Market field {:?}", fields[3])));
    }
    let symmetric = match fields[4] {
        "general" => false,
        "symmetric" => true,
        s => return Err(Error::data(format!("unsupported Matrix Market symmetry {s:?}"))),
    };
    let mut size = None;
    let mut edges = Vec::new();
    for (no, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let Some((rows, cols)) = size else {
            if tok.len() != 3 {
                return Err(Error::data(format!("line {}: expected 'rows cols entries'", no + 1)));
            }
            let (r, c) = (parse_id(tok[0], no + 1)?, parse_id(tok[1], no + 1)?);
            if r != c {
                return Err(Error::data(format!("adjacency matrix must be square, got {r}x{c}")));
            }
            size = Some((r, c));
            continue;
        };
        if tok.len() != if pattern { 2 } else { 3 } {
            return Err(Error::data(format!("line {}: wrong number of fields", no + 1)));
        }
        let (a, b) = (parse_id(tok[0], no + 1)?, parse_id(tok[1], no + 1)?);
        if a == 0 || b == 0 || a > rows || b > cols {
            return Err(Error::data(format!("line {}: index out of range", no + 1)));
        }
        if !pattern && parse_real(tok[2], no + 1, 3)? == 0.0 {
            continue;
        }
        edges.push((a - 1, b - 1));
    }
    let (n, _) = size.ok_or_else(|| Error::data("missing Matrix Market size line"))?;
    if symmetric {
        return Ok(Graph::from_edges(n, edges, false)?.0);
    }
    let g = Graph::from_edges(n, edges, true)?.0;
    Ok(if g.is_symmetric() { g.to_undirected() } else { g })
}

pub fn write_matrix_market<W: Write>(mut w: W, g: &Graph) -> Result<()> {
    let sym = if g.is_directed() { "general" } else { "symmetric" };
    writeln!(w, "%%MatrixMarket matrix coordinate pattern {sym}")?;
    let edges: Vec<(usize, usize)> = g.edges().collect();
    writeln!(w, "{} {} {}", g.n(), g.n(), edges.len())?;
    for (i, j) in edges {
        // Symmetric files store the lower triangle.
        let (a, b) = if g.is_directed() { (i, j) } else { (i.max(j), i.min(j)) };
        writeln!(w, "{} {}", a + 1, b + 1)?;
    }
    w.flush()?;
    Ok(())
}

/// Square 0/1 matrix without header; symmetric input is undirected.
fn adjacency_from(rows: &[Vec<String>]) -> Option<Result<Graph>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return None;
    }
    let mut edges = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        for (j, s) in r.iter().enumerate() {
            match s.as_str() {
                "0" => {}
                "1" => edges.push((i, j)),
                _ => return None,
            }
        }
    }
    Some(Graph::from_edges(n, edges, true).map(|(g, _)| if g.is_symmetric() { g.to_undirected() } else { g }))
}

pub fn write_labels<W: Write>(mut w: W, labels: &[usize]) -> Result<()> {
    for l in labels {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels<R: BufRead>(r: R) -> Result<Vec<usize>> {
    r.lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(no, l)| parse_id(l?.trim(), no + 1))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestView {
    pub name: String,
    #[serde(default)]
    pub model: Option<ModelKind>,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub views: Vec<ManifestView>,
}

/// A dataset with the model chosen for it (and for each view, if any).
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub kind: ModelKind,
    pub view_kinds: Vec<ModelKind>,
}

fn conflict(requested: ModelKind, found: &str) -> Error {
    Error::config(format!("model {requested} conflicts with the input, which holds {found} data"))
}

fn is_real(s: &str) -> bool {
    s.parse::<f64>().is_ok_and(f64::is_finite)
}

fn load_csv(rows: Vec<Vec<String>>, requested: Option<ModelKind>) -> Result<Loaded> {
    let single = |dataset: Dataset, kind| Loaded {
        dataset,
        kind,
        view_kinds: Vec::new(),
    };
    let first_numeric = rows.first().is_some_and(|r| r.iter().all(|s| is_real(s)));
    if first_numeric {
        if let Some(g) = adjacency_from(&rows) {
            return match requested {
                None | Some(ModelKind::Sbm) => Ok(single(Dataset::Graph(g?), ModelKind::Sbm)),
                Some(k) => Err(conflict(k, "graph")),
            };
        }
        return Err(Error::data("a table needs a header row; only square 0/1 adjacency matrices go without"));
    }
    let (header, body) = split_header(rows)?;
    let numeric = body.iter().all(|r| r.iter().all(|s| is_real(s)));
    let kind = requested.unwrap_or(if numeric { ModelKind::Gmm } else { ModelKind::Lca });
    let dataset = match kind {
        ModelKind::Gmm | ModelKind::DiagGmm => Dataset::Continuous(continuous_from(header, &body)?),
        ModelKind::Lca => Dataset::Categorical(CategoricalData::from_strings(header, &body)?),
        ModelKind::Mom => Dataset::Counts(counts_from(header, &body)?),
        k => return Err(conflict(k, "tabular")),
    };
    Ok(single(dataset, kind))
}

fn load_graph(g: Graph, requested: Option<ModelKind>) -> Result<Loaded> {
    match requested {
        None | Some(ModelKind::Sbm) => Ok(Loaded {
            dataset: Dataset::Graph(g),
            kind: ModelKind::Sbm,
            view_kinds: Vec::new(),
        }),
        Some(k) => Err(conflict(k, "graph")),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Reads a dataset, picking the format from the extension and content.
///
/// `.json` is a manifest, `.csv` a table or adjacency matrix, a file
/// starting with `%%MatrixMarket` a Matrix Market graph, anything else an
/// edge list. A requested model that contradicts the data is an error.
pub fn load_dataset(path: &Path, requested: Option<ModelKind>) -> Result<Loaded> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_lowercase);
    if ext.as_deref() == Some("json") {
        return load_manifest(path, requested);
    }
    let mut text = String::new();
    open(path)?.read_to_string(&mut text)?;
    if text.trim_start().to_lowercase().starts_with("%%matrixmarket") {
        return load_graph(read_matrix_market(text.as_bytes())?, requested);
    }
    match ext.as_deref() {
        Some("csv") => load_csv(read_records(text.as_bytes())?, requested),
        _ => load_graph(read_edge_list(text.as_bytes())?, requested),
    }
}

fn load_manifest(path: &Path, requested: Option<ModelKind>) -> Result<Loaded> {
    if let Some(k) = requested.filter(|&k| k != ModelKind::Combined) {
        return Err(conflict(k, "multi-view"));
    }
    let manifest: Manifest = serde_json::from_reader(open(path)?).map_err(|e| Error::data(format!("manifest: {e}")))?;
    if manifest.views.is_empty() {
        return Err(Error::data("manifest lists no views"));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut views = Vec::new();
    let mut kinds = Vec::new();
    for v in &manifest.views {
        if v.model == Some(ModelKind::Combined) {
            return Err(Error::config(format!("view {} cannot itself be combined", v.name)));
        }
        let p = if v.path.is_absolute() { v.path.clone() } else { base.join(&v.path) };
        if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            return Err(Error::config(format!("view {} cannot be another manifest", v.name)));
        }
        let loaded = load_dataset(&p, v.model)?;
        views.push((v.name.clone(), loaded.dataset));
        kinds.push(loaded.kind);
    }
    Ok(Loaded {
        dataset: Dataset::Views(views),
        kind: ModelKind::Combined,
        view_kinds: kinds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn graph_strategy() -> impl Strategy<Value = Graph> {
        (1usize..20, any::<bool>()).prop_flat_map(|(n, directed)| {
            prop::collection::vec((0..n, 0..n), 0..60).prop_map(move |e| Graph::from_edges(n, e, directed).unwrap().0)
        })
    }

    fn same_graph(a: &Graph, b: &Graph) -> bool {
        a.n() == b.n() && a.is_directed() == b.is_directed() && a.edges().collect::<Vec<_>>() == b.edges().collect::<Vec<_>>()
    }

    proptest! {
        #[test]
        fn edge_list_round_trip(g in graph_strategy()) {
            let mut buf = Vec::new();
            write_edge_list(&mut buf, &g).unwrap();
            prop_assert!(same_graph(&read_edge_list(&buf[..]).unwrap(), &g));
        }

        #[test]
        fn matrix_market_round_trip(g in graph_strategy()) {
            let mut buf = Vec::new();
            write_matrix_market(&mut buf, &g).unwrap();
            let back = read_matrix_market(&buf[..]).unwrap();
            // A directed graph with a symmetric pattern reads back undirected.
            let want = if g.is_directed() && g.is_symmetric() { g.to_undirected() } else { g };
            prop_assert!(same_graph(&back, &want));
        }

        #[test]
        fn continuous_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..20)) {
            let d = ContinuousData::from_rows(&rows).unwrap();
            let mut buf = Vec::new();
            write_continuous_csv(&mut buf, &d).unwrap();
            prop_assert_eq!(read_continuous_csv(&buf[..]).unwrap(), d);
        }

        #[test]
        fn categorical_round_trip(rows in prop::collection::vec(prop::collection::vec("[a-c]{1,2}", 2), 1..20)) {
            let d = CategoricalData::from_strings(vec!["u".into(), "v".into()], &rows).unwrap();
            let mut buf = Vec::new();
            write_categorical_csv(&mut buf, &d).unwrap();
            prop_assert_eq!(read_categorical_csv(&buf[..]).unwrap(), d);
        }

        #[test]
        fn counts_round_trip(rows in prop::collection::vec(prop::collection::vec(0u64..5, 4), 1..20)) {
            let names: Vec<String> = (0..4).map(|j| format!("w{j}")).collect();
            let d = CountData::from_dense(names, &rows).unwrap();
            let mut buf = Vec::new();
            write_counts_csv(&mut buf, &d).unwrap();
            prop_assert_eq!(read_counts_csv(&buf[..]).unwrap(), d);
        }

        #[test]
        fn labels_round_trip(labels in prop::collection::vec(0usize..50, 0..40)) {
            let mut buf = Vec::new();
            write_labels(&mut buf, &labels).unwrap();
            prop_assert_eq!(read_labels(&buf[..]).unwrap(), labels);
        }
    }

    #[test]
    fn edge_list_header_and_comments() {
        let text = "# comment\ndirected 5\n0 1\n\n1 0\n3 2\n";
        let g = read_edge_list(text.as_bytes()).unwrap();
        assert!(g.is_directed());
        assert_eq!(g.n(), 5);
        assert_eq!(g.edge_count(), 3);
        let g = read_edge_list("0 1\n1 2\n".as_bytes()).unwrap();
        assert!(!g.is_directed());
        assert_eq!(g.n(), 3);
        assert!(read_edge_list("0 1 2\n".as_bytes()).is_err());
        assert!(read_edge_list("undirected 2\n0 5\n".as_bytes()).is_err());
        assert!(read_edge_list("0 x\n".as_bytes()).is_err());
    }

    #[test]
    fn matrix_market_values_and_symmetry() {
        let text = "%%MatrixMarket matrix coordinate integer general\n% c\n3 3 3\n1 2 1\n2 1 4\n3 1 0\n";
        let g = read_matrix_market(text.as_bytes()).unwrap();
        assert!(!g.is_directed());
        assert_eq!(g.edge_count(), 1);
        let text = "%%MatrixMarket matrix coordinate pattern general\n3 3 1\n1 2\n";
        assert!(read_matrix_market(text.as_bytes()).unwrap().is_directed());
        let bad = "%%MatrixMarket matrix array real general\n2 2\n";
        assert!(read_matrix_market(bad.as_bytes()).is_err());
    }

    #[test]
    fn csv_detection() {
        let adj = vec![vec!["0".into(), "1".into()], vec!["1".into(), "0".into()]];
        let l = load_csv(adj.clone(), None).unwrap();
        assert_eq!(l.kind, ModelKind::Sbm);
        assert!(matches!(load_csv(adj, Some(ModelKind::Gmm)), Err(Error::Config(_))));
        let num: Vec<Vec<String>> = vec![vec!["a".into(), "b".into()], vec!["1.5".into(), "2".into()]];
        assert_eq!(load_csv(num.clone(), None).unwrap().kind, ModelKind::Gmm);
        assert_eq!(load_csv(num.clone(), Some(ModelKind::Lca)).unwrap().kind, ModelKind::Lca);
        assert!(matches!(load_csv(num.clone(), Some(ModelKind::Sbm)), Err(Error::Config(_))));
        assert!(matches!(load_csv(num, Some(ModelKind::Mom)), Err(Error::Data(_))));
        let cat: Vec<Vec<String>> = vec![vec!["a".into()], vec!["x".into()], vec!["1".into()]];
        assert_eq!(load_csv(cat, None).unwrap().kind, ModelKind::Lca);
        let headerless = vec![vec!["1.5".into(), "2".into()]];
        assert!(matches!(load_csv(headerless, None), Err(Error::Data(_))));
    }

    #[test]
    fn manifest_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("g.txt"), "0 1\n1 2\n").unwrap();
        std::fs::write(dir.path().join("x.csv"), "a,b\n1,2\n3,4\n5,6\n").unwrap();
        let manifest = r#"{"views": [
            {"name": "net", "path": "g.txt"},
            {"name": "cont", "model": "diag_gmm", "path": "x.csv"}]}"#;
        let mp = dir.path().join("m.json");
        std::fs::write(&mp, manifest).unwrap();
        let l = load_dataset(&mp, None).unwrap();
        assert_eq!(l.kind, ModelKind::Combined);
        assert_eq!(l.view_kinds, vec![ModelKind::Sbm, ModelKind::DiagGmm]);
        assert_eq!(l.dataset.n(), 3);
        assert!(matches!(load_dataset(&mp, Some(ModelKind::Sbm)), Err(Error::Config(_))));
        assert!(matches!(load_dataset(&dir.path().join("missing.csv"), None), Err(Error::Io(_))));
    }
}
