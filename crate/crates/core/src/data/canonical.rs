//! Canonical dataset directory: `edges.tsv`, `features.tsv`, `labels.tsv`,
//! `split.tsv`. UTF-8, LF line endings, 0-based node indices.
//!
//! `edges.tsv` lists each undirected edge once as `u<TAB>v`, with an optional
//! third weight column written only for non-unit weights. Reals are written
//! in shortest round-trip form, so save/load is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::{Dataset, Masks, SplitRole};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Matrix;

pub(crate) fn render(ds: &Dataset) -> Vec<(&'static str, String)> {
    let mut edges = String::new();
    for (u, v, w) in ds.graph().edges() {
        if w == 1.0 {
            let _ = writeln!(edges, "{u}\t{v}");
        } else {
            let _ = writeln!(edges, "{u}\t{v}\t{w:?}");
        }
    }
    let mut features = String::new();
    for i in 0..ds.features().rows() {
        let row: Vec<String> = ds.features().row(i).iter().map(|v| format!("{v:?}")).collect();
        features.push_str(&row.join("\t"));
        features.push('\n');
    }
    let mut labels = String::new();
    for y in ds.labels() {
        let _ = writeln!(labels, "{y}");
    }
    let mut split = String::new();
    for (i, role) in ds.masks().roles().iter().enumerate() {
        let tag = match role {
            SplitRole::Train => "train",
            SplitRole::Val => "val",
            SplitRole::Test => "test",
            SplitRole::None => "none",
        };
        let _ = writeln!(split, "{i}\t{tag}");
    }
    vec![
        ("edges.tsv", edges),
        ("features.tsv", features),
        ("labels.tsv", labels),
        ("split.tsv", split),
    ]
}

pub fn save_canonical(ds: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for (name, body) in render(ds) {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn read(dir: &Path, name: &str) -> Result<(String, String)> {
    let path = dir.join(name);
    let display = path.display().to_string();
    let body = fs::read_to_string(&path).map_err(|e| Error::Dataset(format!("cannot read {display}: {e}")))?;
    Ok((display, body))
}

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

fn lines(body: &str) -> impl Iterator<Item = (usize, &str)> {
    body.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn load_canonical(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();

    let (fpath, fbody) = read(dir, "features.tsv")?;
    let mut data = Vec::new();
    let mut width = None;
    let mut n = 0;
    for (ln, line) in lines(&fbody) {
        let row: Vec<f64> = line
            .split('\t')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(&fpath, ln, format!("bad feature value: {e}")))?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(&fpath, ln, format!("expected {w} features, found {}", row.len())))
            }
            _ => {}
        }
        data.extend(row);
        n += 1;
    }
    let features = Matrix::from_vec(n, width.unwrap_or(0), data)?;

    let (lpath, lbody) = read(dir, "labels.tsv")?;
    let mut labels = Vec::with_capacity(n);
    for (ln, line) in lines(&lbody) {
        labels.push(
            line.trim()
                .parse::<usize>()
                .map_err(|e| parse_err(&lpath, ln, format!("bad label: {e}")))?,
        );
    }
    if labels.len() != n {
        return Err(Error::Dataset(format!("{lpath}: {} labels for {n} feature rows", labels.len())));
    }

    let (epath, ebody) = read(dir, "edges.tsv")?;
    let mut edges = Vec::new();
    for (ln, line) in lines(&ebody) {
        let toks: Vec<&str> = line.split('\t').map(str::trim).collect();
        if toks.len() != 2 && toks.len() != 3 {
            return Err(parse_err(&epath, ln, "expected `u<TAB>v` or `u<TAB>v<TAB>weight`"));
        }
        let idx = |t: &str| -> Result<usize> {
            let v = t.parse::<usize>().map_err(|e| parse_err(&epath, ln, format!("bad node index: {e}")))?;
            if v >= n {
                return Err(parse_err(&epath, ln, format!("node index {v} out of range for {n} nodes")));
            }
            Ok(v)
        };
        let (u, v) = (idx(toks[0])?, idx(toks[1])?);
        if u == v {
            return Err(parse_err(&epath, ln, format!("raw self loop {u} {v}")));
        }
        let w = match toks.get(2) {
            Some(t) => t.parse::<f64>().map_err(|e| parse_err(&epath, ln, format!("bad weight: {e}")))?,
            None => 1.0,
        };
        edges.push((u, v, w));
    }
    let graph = Graph::from_weighted_edges(n, edges)?;

    let (spath, sbody) = read(dir, "split.tsv")?;
    let mut roles = vec![SplitRole::None; n];
    let mut seen = vec![false; n];
    for (ln, line) in lines(&sbody) {
        let toks: Vec<&str> = line.split('\t').map(str::trim).collect();
        if toks.len() != 2 {
            return Err(parse_err(&spath, ln, "expected `node<TAB>role`"));
        }
        let i = toks[0]
            .parse::<usize>()
            .map_err(|e| parse_err(&spath, ln, format!("bad node index: {e}")))?;
        if i >= n {
            return Err(parse_err(&spath, ln, format!("node index {i} out of range for {n} nodes")));
        }
        let role = match toks[1] {
            "train" => SplitRole::Train,
            "val" => SplitRole::Val,
            "test" => SplitRole::Test,
            "none" => SplitRole::None,
            other => return Err(parse_err(&spath, ln, format!("unknown split role `{other}`"))),
        };
        if seen[i] && roles[i] != role {
            return Err(parse_err(&spath, ln, format!("node {i} assigned to overlapping masks")));
        }
        seen[i] = true;
        roles[i] = role;
    }

    let class_count = labels.iter().max().map_or(0, |&m| m + 1);
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "canonical".into());
    Dataset::new(name, graph, features, labels, Masks::from_roles(roles), class_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn toy(dir: &Path, edges: &str, split: &str) {
        write(dir, "features.tsv", "1\t0\n0\t1\n0.5\t0.5\n");
        write(dir, "labels.tsv", "0\n1\n1\n");
        write(dir, "edges.tsv", edges);
        write(dir, "split.tsv", split);
    }

    #[test]
    fn omitted_split_rows_mean_no_mask() {
        let tmp = tempfile::tempdir().unwrap();
        toy(tmp.path(), "0\t1\n1\t2\n", "0\ttrain\n2\ttest\n");
        let ds = load_canonical(tmp.path()).unwrap();
        assert_eq!(ds.masks().role(1), SplitRole::None);
        assert_eq!(ds.masks().count(SplitRole::Train), 1);
        assert_eq!(ds.class_count(), 2);
    }

    #[test]
    fn rejects_raw_self_loop() {
        let tmp = tempfile::tempdir().unwrap();
        toy(tmp.path(), "0\t1\n2\t2\n", "");
        let err = load_canonical(tmp.path()).unwrap_err().to_string();
        assert!(err.contains("self loop"), "{err}");
    }

    #[test]
    fn rejects_out_of_range_and_overlap() {
        let tmp = tempfile::tempdir().unwrap();
        toy(tmp.path(), "0\t5\n", "");
        assert!(load_canonical(tmp.path()).is_err());
        toy(tmp.path(), "0\t1\n", "0\ttrain\n0\ttest\n");
        assert!(load_canonical(tmp.path()).unwrap_err().to_string().contains("overlapping"));
    }

    #[test]
    fn missing_file_is_reported() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "features.tsv", "1\n");
        assert!(load_canonical(tmp.path()).unwrap_err().to_string().contains("labels.tsv"));
    }
}
