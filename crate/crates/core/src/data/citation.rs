//! Plain-text citation network format (`<name>.content` / `<name>.cites`).
//!
//! Content lines: `paper-id  feature...  class-token`, whitespace separated.
//! Cites lines: `cited-id  citing-id`. Node ids are mapped to dense indices in
//! first-appearance order and class tokens to integers in alphabetical order.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use log::warn;

use crate::data::{Dataset, DatasetMeta, Masks};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Matrix;

pub fn load_citation_plaintext(content_path: impl AsRef<Path>, cites_path: impl AsRef<Path>) -> Result<Dataset> {
    let content_path = content_path.as_ref();
    let cites_path = cites_path.as_ref();
    let cpath = content_path.display().to_string();
    let content = fs::read_to_string(content_path)?;

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut data = Vec::new();
    let mut class_tokens = Vec::new();
    let mut width = None;
    for (ln, line) in content.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() < 3 {
            return Err(Error::Parse {
                path: cpath,
                line: ln,
                msg: "expected `id feature... class`".into(),
            });
        }
        let feats = &toks[1..toks.len() - 1];
        match width {
            None => width = Some(feats.len()),
            Some(w) if w != feats.len() => {
                return Err(Error::Parse {
                    path: cpath,
                    line: ln,
                    msg: format!("expected {w} features, found {}", feats.len()),
                })
            }
            _ => {}
        }
        let id = toks[0].to_string();
        if index.contains_key(&id) {
            return Err(Error::Parse {
                path: cpath,
                line: ln,
                msg: format!("duplicate node id `{id}`"),
            });
        }
        for t in feats {
            data.push(t.parse::<f64>().map_err(|e| Error::Parse {
                path: cpath.clone(),
                line: ln,
                msg: format!("bad feature `{t}`: {e}"),
            })?);
        }
        index.insert(id, index.len());
        class_tokens.push(toks[toks.len() - 1].to_string());
    }
    let n = index.len();
    let features = Matrix::from_vec(n, width.unwrap_or(0), data)?;

    let classes: BTreeSet<&str> = class_tokens.iter().map(String::as_str).collect();
    let class_index: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let labels: Vec<usize> = class_tokens.iter().map(|c| class_index[c.as_str()]).collect();

    let spath = cites_path.display().to_string();
    let cites = fs::read_to_string(cites_path)?;
    let mut edges = BTreeSet::new();
    let mut dangling = 0usize;
    let mut self_cites = 0usize;
    for (ln, line) in cites.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 2 {
            return Err(Error::Parse {
                path: spath,
                line: ln,
                msg: "expected two node ids".into(),
            });
        }
        match (index.get(toks[0]), index.get(toks[1])) {
            (Some(&u), Some(&v)) if u == v => self_cites += 1,
            (Some(&u), Some(&v)) => {
                edges.insert((u.min(v), u.max(v)));
            }
            _ => dangling += 1,
        }
    }
    if dangling > 0 {
        warn!("{spath}: dropped {dangling} citation(s) referencing unknown node ids");
    }
    if self_cites > 0 {
        warn!("{spath}: dropped {self_cites} self citation(s)");
    }

    let graph = Graph::from_edges(n, edges)?;
    let name = content_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "citation".into());
    let class_count = classes.len();
    Ok(
        Dataset::new(name, graph, features, labels, Masks::unassigned(n), class_count)?.with_meta(DatasetMeta {
            dropped_edge_refs: dangling,
            ..DatasetMeta::default()
        }),
    )
}
