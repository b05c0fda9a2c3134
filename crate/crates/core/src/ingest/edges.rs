use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::IngestError;
use crate::graph::{Csr, HeteroGraph, Relation};

/// One row of `edges.csv`. Without a relation the row is a follow edge
/// `source → target` and lands in both relations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeRecord {
    pub source: String,
    pub target: String,
    pub relation: Option<Relation>,
}

pub fn parse_edges_from_reader<R: Read>(reader: R) -> Result<Vec<EdgeRecord>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| IngestError::Csv {
        line: 1,
        message: e.to_string(),
    })?;
    let cols: Vec<&str> = headers.iter().collect();
    let has_relation = match cols.as_slice() {
        ["source", "target"] => false,
        ["source", "target", "relation"] => true,
        _ => {
            return Err(IngestError::Csv {
                line: 1,
                message: format!("expected header `source,target[,relation]`, found `{}`", cols.join(",")),
            })
        }
    };
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| IngestError::Csv {
            line,
            message: e.to_string(),
        })?;
        let relation = if has_relation {
            match row.get(2).unwrap_or("") {
                "" => None,
                s => Some(Relation::parse(s).ok_or_else(|| IngestError::Csv {
                    line,
                    message: format!("unknown relation `{s}` (expected following or follower)"),
                })?),
            }
        } else {
            None
        };
        out.push(EdgeRecord {
            source: row[0].to_string(),
            target: row[1].to_string(),
            relation,
        });
    }
    Ok(out)
}

pub fn parse_edges(path: &Path) -> Result<Vec<EdgeRecord>, IngestError> {
    let f = File::open(path).map_err(|e| IngestError::io(path, e))?;
    parse_edges_from_reader(f).map_err(|e| e.with_path(path))
}

fn lookup(index: &HashMap<String, usize>, id: &str) -> Result<usize, IngestError> {
    index
        .get(id)
        .copied()
        .ok_or_else(|| IngestError::UnknownUser(id.to_string()))
}

/// Builds the two-relation graph from directed follow edges `(u, v)`:
/// `v` joins `N_following(u)` and `u` joins `N_follower(v)`.
pub fn build_graph<S: AsRef<str>>(
    edges: &[(S, S)],
    id_index: &HashMap<String, usize>,
) -> Result<HeteroGraph, IngestError> {
    let records: Vec<EdgeRecord> = edges
        .iter()
        .map(|(s, t)| EdgeRecord {
            source: s.as_ref().to_string(),
            target: t.as_ref().to_string(),
            relation: None,
        })
        .collect();
    build_typed_graph(&records, id_index)
}

/// Like [`build_graph`], but rows carrying an explicit relation are inserted
/// only into that relation: `target ∈ N_relation(source)`.
pub fn build_typed_graph(
    edges: &[EdgeRecord],
    id_index: &HashMap<String, usize>,
) -> Result<HeteroGraph, IngestError> {
    let n = id_index.len();
    let mut lists = [vec![Vec::new(); n], vec![Vec::new(); n]];
    for e in edges {
        let u = lookup(id_index, &e.source)?;
        let v = lookup(id_index, &e.target)?;
        match e.relation {
            None => {
                lists[Relation::Following.index()][u].push(v);
                lists[Relation::Follower.index()][v].push(u);
            }
            Some(r) => lists[r.index()][u].push(v),
        }
    }
    let [following, follower] = lists;
    Ok(HeteroGraph::new(n, Csr::from_lists(following), Csr::from_lists(follower))
        .expect("lists sized to node count"))
}
