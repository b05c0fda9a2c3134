use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use super::hashing::hash_embed;
use super::IngestError;
use crate::tensor::Matrix;

/// Raw text for one user, as in `texts.jsonl`.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserTexts {
    pub id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub tweets: Vec<String>,
}

pub fn parse_texts_from_reader<R: BufRead>(reader: R) -> Result<HashMap<String, UserTexts>, IngestError> {
    let mut out = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| IngestError::Io { path: None, source: e })?;
        if line.trim().is_empty() {
            continue;
        }
        let t: UserTexts = serde_json::from_str(&line).map_err(|e| IngestError::Json {
            line: lineno,
            message: e.to_string(),
        })?;
        if out.contains_key(&t.id) {
            return Err(IngestError::DuplicateUser {
                id: t.id,
                first: 0,
                line: lineno,
            });
        }
        out.insert(t.id.clone(), t);
    }
    Ok(out)
}

pub fn parse_texts(path: &Path) -> Result<HashMap<String, UserTexts>, IngestError> {
    let f = File::open(path).map_err(|e| IngestError::io(path, e))?;
    parse_texts_from_reader(BufReader::new(f)).map_err(|e| e.with_path(path))
}

/// Hash-embeds descriptions and mean tweet vectors in `user_ids` order.
///
/// Users missing from `texts`, and users without tweets, get zero rows.
pub fn hash_embed_texts(
    user_ids: &[String],
    texts: &HashMap<String, UserTexts>,
    dim: usize,
    seed: u64,
) -> (Matrix, Matrix) {
    let n = user_ids.len();
    let mut desc = Matrix::zeros(n, dim);
    let mut tweets = Matrix::zeros(n, dim);
    for (i, id) in user_ids.iter().enumerate() {
        let Some(t) = texts.get(id) else { continue };
        desc.row_mut(i).copy_from_slice(&hash_embed(&t.description, dim, seed));
        if t.tweets.is_empty() {
            continue;
        }
        let row = tweets.row_mut(i);
        for tw in &t.tweets {
            for (o, v) in row.iter_mut().zip(hash_embed(tw, dim, seed)) {
                *o += v;
            }
        }
        let inv = 1.0 / t.tweets.len() as f64;
        row.iter_mut().for_each(|x| *x *= inv);
    }
    (desc, tweets)
}
