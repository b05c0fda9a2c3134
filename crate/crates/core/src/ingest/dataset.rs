//! The assembled dataset and its packed on-disk form.
//!
//! Bundle layout (`b"BRGD"`, little-endian):
//!
//! ```text
//! magic, u32 version = 1, u32 n_nodes
//! n × (u32 id_len, id bytes)
//! n × i8 label (-1 none, 0 human, 1 bot)
//! n × u8 split (0 train, 1 val, 2 test, 3 unlabeled)
//! 4 matrices (description, tweets, numerical, categorical): u32 rows, u32 cols, f64 payload
//! u8 has_stats, then 6 means and 6 stds as f64 when set
//! 2 relations (following, follower): (n+1) u64 offsets, then u32 neighbors
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::edges::{build_typed_graph, parse_edges};
use super::embeddings::load_embeddings;
use super::features::{compute_numeric_stats, encode_categorical, encode_numerical, NumericStats};
use super::texts::{hash_embed_texts, parse_texts};
use super::users::{parse_users, Label, Split, UserRecord};
use super::IngestError;
use crate::graph::{Csr, HeteroGraph, Relation};
use crate::tensor::Matrix;

pub const BUNDLE_MAGIC: &[u8; 4] = b"BRGD";
const BUNDLE_VERSION: u32 = 1;

/// Disjoint train/val/test membership per node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMasks {
    train: Vec<bool>,
    val: Vec<bool>,
    test: Vec<bool>,
}

impl SplitMasks {
    pub fn new(train: Vec<bool>, val: Vec<bool>, test: Vec<bool>) -> Result<Self, IngestError> {
        let n = train.len();
        if val.len() != n || test.len() != n {
            return Err(IngestError::Masks("mask lengths differ".into()));
        }
        if let Some(i) = (0..n).find(|&i| u8::from(train[i]) + u8::from(val[i]) + u8::from(test[i]) > 1) {
            return Err(IngestError::Masks(format!("node {i} is in more than one split")));
        }
        Ok(Self { train, val, test })
    }

    pub fn from_splits(splits: impl IntoIterator<Item = Split>) -> Result<Self, IngestError> {
        let splits: Vec<Split> = splits.into_iter().collect();
        Self::new(
            splits.iter().map(|&s| s == Split::Train).collect(),
            splits.iter().map(|&s| s == Split::Val).collect(),
            splits.iter().map(|&s| s == Split::Test).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    pub fn train(&self) -> &[bool] {
        &self.train
    }

    pub fn val(&self) -> &[bool] {
        &self.val
    }

    pub fn test(&self) -> &[bool] {
        &self.test
    }

    /// Mask for `split`; `Unlabeled` has none.
    pub fn get(&self, split: Split) -> Option<&[bool]> {
        match split {
            Split::Train => Some(&self.train),
            Split::Val => Some(&self.val),
            Split::Test => Some(&self.test),
            Split::Unlabeled => None,
        }
    }

    pub fn train_count(&self) -> usize {
        self.train.iter().filter(|&&b| b).count()
    }

    pub fn split_of(&self, i: usize) -> Split {
        if self.train[i] {
            Split::Train
        } else if self.val[i] {
            Split::Val
        } else if self.test[i] {
            Split::Test
        } else {
            Split::Unlabeled
        }
    }
}

/// Raw per-user inputs of the four modalities, one row per node.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBundle {
    pub description: Matrix,
    pub tweets: Matrix,
    pub numerical: Matrix,
    pub categorical: Matrix,
}

impl FeatureBundle {
    pub fn n_nodes(&self) -> usize {
        self.numerical.rows()
    }

    pub fn text_dim(&self) -> usize {
        self.description.cols()
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let n = self.n_nodes();
        let blocks = [
            ("description", &self.description),
            ("tweets", &self.tweets),
            ("numerical", &self.numerical),
            ("categorical", &self.categorical),
        ];
        for (name, m) in blocks {
            if m.rows() != n {
                return Err(IngestError::Features(format!("{name} has {} rows, expected {n}", m.rows())));
            }
            if !m.is_finite() {
                return Err(IngestError::Features(format!("{name} contains a non-finite value")));
            }
        }
        if self.numerical.cols() != 6 || self.categorical.cols() != 22 {
            return Err(IngestError::Features("numerical must be 6 wide and categorical 22 wide".into()));
        }
        if self.description.cols() != self.tweets.cols() || self.description.cols() == 0 {
            return Err(IngestError::Features(format!(
                "description ({}) and tweet ({}) embeddings must share a positive width",
                self.description.cols(),
                self.tweets.cols()
            )));
        }
        Ok(())
    }
}

/// Everything training needs: features, graph, labels and splits.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub user_ids: Vec<String>,
    pub labels: Vec<Option<Label>>,
    pub masks: SplitMasks,
    pub features: FeatureBundle,
    pub graph: HeteroGraph,
    pub stats: Option<NumericStats>,
}

impl Dataset {
    pub fn new(
        user_ids: Vec<String>,
        labels: Vec<Option<Label>>,
        masks: SplitMasks,
        features: FeatureBundle,
        graph: HeteroGraph,
    ) -> Result<Self, IngestError> {
        let ds = Self {
            user_ids,
            labels,
            masks,
            features,
            graph,
            stats: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let n = self.user_ids.len();
        if self.labels.len() != n || self.masks.len() != n || self.graph.n_nodes() != n {
            return Err(IngestError::Features("node counts disagree across dataset parts".into()));
        }
        if self.features.n_nodes() != n {
            return Err(IngestError::Features("feature rows disagree with node count".into()));
        }
        self.features.validate()?;
        for i in 0..n {
            if self.masks.split_of(i) != Split::Unlabeled && self.labels[i].is_none() {
                return Err(IngestError::Masks(format!("node {i} is in a split but unlabeled")));
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.user_ids.len()
    }

    pub fn id_index(&self) -> HashMap<String, usize> {
        self.user_ids.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect()
    }

    /// Same dataset with all edges removed.
    pub fn without_edges(&self) -> Self {
        Self {
            graph: HeteroGraph::edgeless(self.n_nodes()),
            ..self.clone()
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        let f = File::create(path).map_err(|e| IngestError::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| IngestError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let f = File::open(path).map_err(|e| IngestError::io(path, e))?;
        Self::read_from(BufReader::new(f)).map_err(|e| e.with_path(path))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(BUNDLE_MAGIC)?;
        w.write_u32::<LittleEndian>(BUNDLE_VERSION)?;
        w.write_u32::<LittleEndian>(self.n_nodes() as u32)?;
        for id in &self.user_ids {
            w.write_u32::<LittleEndian>(id.len() as u32)?;
            w.write_all(id.as_bytes())?;
        }
        for l in &self.labels {
            w.write_i8(l.map_or(-1, |l| l as i8))?;
        }
        for i in 0..self.n_nodes() {
            let code = match self.masks.split_of(i) {
                Split::Train => 0,
                Split::Val => 1,
                Split::Test => 2,
                Split::Unlabeled => 3,
            };
            w.write_u8(code)?;
        }
        let f = &self.features;
        for m in [&f.description, &f.tweets, &f.numerical, &f.categorical] {
            w.write_u32::<LittleEndian>(m.rows() as u32)?;
            w.write_u32::<LittleEndian>(m.cols() as u32)?;
            for &v in m.as_slice() {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        match &self.stats {
            None => w.write_u8(0)?,
            Some(s) => {
                w.write_u8(1)?;
                for &v in s.mean.iter().chain(&s.std) {
                    w.write_f64::<LittleEndian>(v)?;
                }
            }
        }
        for r in Relation::ALL {
            let csr = self.graph.relation(r);
            for &o in csr.offsets() {
                w.write_u64::<LittleEndian>(o as u64)?;
            }
            for &j in csr.indices() {
                w.write_u32::<LittleEndian>(j as u32)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, IngestError> {
        let t = |e: io::Error| match e.kind() {
            io::ErrorKind::UnexpectedEof => IngestError::Bundle("truncated bundle".into()),
            _ => IngestError::Io { path: None, source: e },
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(t)?;
        if &magic != BUNDLE_MAGIC {
            return Err(IngestError::Bundle(format!("bad magic {magic:?}")));
        }
        let version = r.read_u32::<LittleEndian>().map_err(t)?;
        if version != BUNDLE_VERSION {
            return Err(IngestError::Bundle(format!("unsupported bundle version {version}")));
        }
        let n = r.read_u32::<LittleEndian>().map_err(t)? as usize;
        let mut user_ids = Vec::with_capacity(n);
        for _ in 0..n {
            let len = r.read_u32::<LittleEndian>().map_err(t)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf).map_err(t)?;
            user_ids.push(String::from_utf8(buf).map_err(|_| IngestError::Bundle("user id is not UTF-8".into()))?);
        }
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            labels.push(match r.read_i8().map_err(t)? {
                -1 => None,
                0 => Some(Label::Human),
                1 => Some(Label::Bot),
                x => return Err(IngestError::Bundle(format!("bad label code {x}"))),
            });
        }
        let mut splits = Vec::with_capacity(n);
        for _ in 0..n {
            splits.push(match r.read_u8().map_err(t)? {
                0 => Split::Train,
                1 => Split::Val,
                2 => Split::Test,
                3 => Split::Unlabeled,
                x => return Err(IngestError::Bundle(format!("bad split code {x}"))),
            });
        }
        let mut mats = Vec::with_capacity(4);
        for _ in 0..4 {
            let rows = r.read_u32::<LittleEndian>().map_err(t)? as usize;
            let cols = r.read_u32::<LittleEndian>().map_err(t)? as usize;
            let mut data = vec![0.0; rows * cols];
            r.read_f64_into::<LittleEndian>(&mut data).map_err(t)?;
            mats.push(Matrix::from_vec(rows, cols, data).expect("sized from header"));
        }
        let stats = match r.read_u8().map_err(t)? {
            0 => None,
            1 => {
                let mut v = [0.0; 12];
                r.read_f64_into::<LittleEndian>(&mut v).map_err(t)?;
                Some(NumericStats {
                    mean: v[..6].try_into().unwrap(),
                    std: v[6..].try_into().unwrap(),
                })
            }
            x => return Err(IngestError::Bundle(format!("bad stats flag {x}"))),
        };
        let mut csrs = Vec::with_capacity(2);
        for _ in 0..2 {
            let mut offsets = vec![0u64; n + 1];
            r.read_u64_into::<LittleEndian>(&mut offsets).map_err(t)?;
            let nnz = *offsets.last().unwrap() as usize;
            let mut nbrs = vec![0u32; nnz];
            r.read_u32_into::<LittleEndian>(&mut nbrs).map_err(t)?;
            let csr = Csr::from_parts(
                offsets.into_iter().map(|o| o as usize).collect(),
                nbrs.into_iter().map(|j| j as usize).collect(),
                n,
            )
            .map_err(|e| IngestError::Bundle(e.to_string()))?;
            csrs.push(csr);
        }
        let follower = csrs.pop().unwrap();
        let following = csrs.pop().unwrap();
        let graph = HeteroGraph::new(n, following, follower).map_err(|e| IngestError::Bundle(e.to_string()))?;
        let categorical = mats.pop().unwrap();
        let numerical = mats.pop().unwrap();
        let tweets = mats.pop().unwrap();
        let description = mats.pop().unwrap();
        let mut ds = Dataset::new(
            user_ids,
            labels,
            SplitMasks::from_splits(splits)?,
            FeatureBundle {
                description,
                tweets,
                numerical,
                categorical,
            },
            graph,
        )?;
        ds.stats = stats;
        Ok(ds)
    }
}

/// Where description and tweet embeddings come from.
#[derive(Clone, Debug, PartialEq)]
pub enum TextSource {
    /// Precomputed `.bre` files in `users.jsonl` order.
    Files { description: PathBuf, tweets: PathBuf },
    /// Hash embeddings computed from a `texts.jsonl` file.
    Hashed { texts: PathBuf, dim: usize, seed: u64 },
}

/// Builds a dataset from already-parsed records and text matrices.
pub fn assemble_dataset(
    records: &[UserRecord],
    graph: HeteroGraph,
    description: Matrix,
    tweets: Matrix,
) -> Result<Dataset, IngestError> {
    let masks = SplitMasks::from_splits(records.iter().map(|r| r.split))?;
    if masks.train_count() == 0 {
        return Err(IngestError::EmptyTrainSplit);
    }
    let stats = compute_numeric_stats(records, &masks)?;
    let features = FeatureBundle {
        description,
        tweets,
        numerical: encode_numerical(records, &stats),
        categorical: encode_categorical(records),
    };
    let mut ds = Dataset::new(
        records.iter().map(|r| r.user_id.clone()).collect(),
        records.iter().map(|r| r.label).collect(),
        masks,
        features,
        graph,
    )?;
    ds.stats = Some(stats);
    Ok(ds)
}

/// Full file-based preparation: users, edges and text embeddings into a [`Dataset`].
pub fn prepare_dataset(users: &Path, edges: &Path, text: &TextSource) -> Result<Dataset, IngestError> {
    let records = parse_users(users)?;
    let ids: Vec<String> = records.iter().map(|r| r.user_id.clone()).collect();
    let index: HashMap<String, usize> = ids.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let edge_rows = parse_edges(edges)?;
    let graph = build_typed_graph(&edge_rows, &index).map_err(|e| e.with_path(edges))?;
    let (description, tweets) = match text {
        TextSource::Files { description, tweets } => (
            load_embeddings(description, records.len())?.into_matrix(),
            load_embeddings(tweets, records.len())?.into_matrix(),
        ),
        TextSource::Hashed { texts, dim, seed } => {
            if *dim == 0 {
                return Err(IngestError::Embedding("hash embedding dim must be positive".into()));
            }
            let parsed = parse_texts(texts)?;
            hash_embed_texts(&ids, &parsed, *dim, *seed)
        }
    };
    assemble_dataset(&records, graph, description, tweets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let masks = SplitMasks::from_splits([Split::Train, Split::Val, Split::Unlabeled]).unwrap();
        Dataset::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![Some(Label::Bot), Some(Label::Human), None],
            masks,
            FeatureBundle {
                description: Matrix::filled(3, 2, 0.5),
                tweets: Matrix::zeros(3, 2),
                numerical: Matrix::filled(3, 6, -1.25),
                categorical: Matrix::zeros(3, 22),
            },
            HeteroGraph::from_follow_edges(3, &[(0, 1), (2, 0)]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn bundle_round_trip() {
        let mut ds = tiny();
        ds.stats = Some(NumericStats {
            mean: [1.0; 6],
            std: [2.0; 6],
        });
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        assert_eq!(Dataset::read_from(buf.as_slice()).unwrap(), ds);
        buf.truncate(buf.len() - 1);
        assert!(matches!(Dataset::read_from(buf.as_slice()), Err(IngestError::Bundle(_))));
    }

    #[test]
    fn masks_must_be_disjoint() {
        assert!(SplitMasks::new(vec![true], vec![true], vec![false]).is_err());
    }

    #[test]
    fn split_without_label_is_rejected() {
        let mut ds = tiny();
        ds.labels[0] = None;
        assert!(ds.validate().is_err());
    }
}
