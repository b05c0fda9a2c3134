use std::fs;
use std::path::{Path, PathBuf};

use botrgcn::graph::Relation;
use botrgcn::ingest::{
    prepare_dataset, save_embeddings, Dataset, IngestError, Label, Split, TextSource,
};
use botrgcn::tensor::Matrix;
use tempfile::TempDir;

const USERS: &str = r#"{"id":"a","followers_count":10,"followings_count":3,"favorites_count":0,"statuses_count":9000,"active_days":100,"screen_name_length":15,"verified":true,"label":"bot","split":"train"}
{"id":"b","followers_count":20,"followings_count":5,"favorites_count":40,"statuses_count":300,"active_days":250,"screen_name_length":8,"verified":false,"label":"human","split":"train"}
{"id":"c","followers_count":30,"favorites_count":12,"statuses_count":120,"active_days":400,"screen_name_length":6,"label":"human","split":"train"}
{"id":"d","followers_count":1000,"followings_count":7,"active_days":50,"label":"bot","split":"val"}
{"id":"e","followers_count":5,"followings_count":1,"label":"bot","split":"test"}
{"id":"f","screen_name_length":12}
"#;

const EDGES: &str = "source,target\na,b\nb,c\nd,a\ne,a\nf,d\n";

const TEXTS: &str = r#"{"id":"a","description":"hello world","tweets":["one tweet","two tweets"]}
{"id":"b","description":"","tweets":[]}
{"id":"d","description":"deals deals deals","tweets":["click"]}
"#;

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn prepare(dir: &TempDir) -> Dataset {
    let users = write(dir.path(), "users.jsonl", USERS);
    let edges = write(dir.path(), "edges.csv", EDGES);
    let texts = write(dir.path(), "texts.jsonl", TEXTS);
    prepare_dataset(&users, &edges, &TextSource::Hashed { texts, dim: 12, seed: 9 }).unwrap()
}

#[test]
fn hashed_pipeline_end_to_end() {
    let dir = TempDir::new().unwrap();
    let ds = prepare(&dir);
    assert_eq!(ds.n_nodes(), 6);
    assert_eq!(ds.features.text_dim(), 12);
    assert_eq!(ds.labels[5], None);
    assert_eq!(ds.masks.split_of(5), Split::Unlabeled);
    assert_eq!(ds.masks.split_of(3), Split::Val);

    let idx = ds.id_index();
    assert_eq!(ds.graph.neighbors(Relation::Following, idx["d"]), &[idx["a"]]);
    let mut followers = ds.graph.neighbors(Relation::Follower, idx["a"]).to_vec();
    followers.sort();
    assert_eq!(followers, vec![idx["d"], idx["e"]]);

    // c and e have no texts, b has empty ones: all zero rows.
    for id in ["b", "c", "e", "f"] {
        assert!(ds.features.description.row(idx[id]).iter().all(|&x| x == 0.0), "{id}");
        assert!(ds.features.tweets.row(idx[id]).iter().all(|&x| x == 0.0), "{id}");
    }
    assert!(ds.features.description.row(idx["a"]).iter().any(|&x| x != 0.0));
}

#[test]
fn numeric_columns_are_standardized_on_train() {
    let dir = TempDir::new().unwrap();
    let ds = prepare(&dir);
    let stats = ds.stats.as_ref().unwrap();
    // followers_count on train rows a, b, c: 10, 20, 30.
    assert!((stats.mean[0] - 20.0).abs() < 1e-12);
    assert!((stats.std[0] - (200.0f64 / 3.0).sqrt()).abs() < 1e-12);

    let train: Vec<usize> = (0..ds.n_nodes()).filter(|&i| ds.masks.train()[i]).collect();
    let col: Vec<f64> = train.iter().map(|&i| ds.features.numerical.get(i, 0)).collect();
    let mean = col.iter().sum::<f64>() / 3.0;
    let std = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    assert!(mean.abs() < 1e-6 && (std - 1.0).abs() < 1e-6);

    // Missing value imputes to the train mean, i.e. 0 after scaling.
    let idx = ds.id_index();
    assert_eq!(ds.features.numerical.get(idx["c"], 1), 0.0);
}

#[test]
fn preparation_is_deterministic_and_bundles_round_trip() {
    let dir = TempDir::new().unwrap();
    let a = prepare(&dir);
    let b = prepare(&dir);
    let (pa, pb) = (dir.path().join("a.brgd"), dir.path().join("b.brgd"));
    a.save(&pa).unwrap();
    b.save(&pb).unwrap();
    assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap());
    assert_eq!(Dataset::load(&pa).unwrap(), a);

    let bytes = fs::read(&pa).unwrap();
    let cut = dir.path().join("cut.brgd");
    fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    assert!(Dataset::load(&cut).is_err());
}

#[test]
fn embedding_files_feed_text_blocks() {
    let dir = TempDir::new().unwrap();
    let users = write(dir.path(), "users.jsonl", USERS);
    let edges = write(dir.path(), "edges.csv", EDGES);
    let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, -0.5, 0.25]).collect();
    let desc = dir.path().join("desc.bre");
    let tweets = dir.path().join("tweets.bre");
    save_embeddings(&desc, &Matrix::from_rows(&rows)).unwrap();
    save_embeddings(&tweets, &Matrix::zeros(6, 3)).unwrap();
    let ds = prepare_dataset(
        &users,
        &edges,
        &TextSource::Files {
            description: desc.clone(),
            tweets: tweets.clone(),
        },
    )
    .unwrap();
    assert_eq!(ds.features.text_dim(), 3);
    assert_eq!(ds.features.description.row(4), &[4.0, -0.5, 0.25]);

    let five = dir.path().join("five.bre");
    save_embeddings(&five, &Matrix::zeros(5, 3)).unwrap();
    let err = prepare_dataset(
        &users,
        &edges,
        &TextSource::Files {
            description: five,
            tweets,
        },
    )
    .unwrap_err();
    assert!(
        matches!(err.root(), IngestError::EmbeddingCount { expected: 6, found: 5 }),
        "{err}"
    );
}

#[test]
fn ingest_errors_name_their_source() {
    let dir = TempDir::new().unwrap();
    let users = write(dir.path(), "users.jsonl", USERS);
    let texts = write(dir.path(), "texts.jsonl", TEXTS);
    let hashed = TextSource::Hashed { texts, dim: 4, seed: 0 };

    let edges = write(dir.path(), "bad_edges.csv", "source,target\na,zz\n");
    let err = prepare_dataset(&users, &edges, &hashed).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("bad_edges.csv") && msg.contains("zz"), "{msg}");

    let bad_users = write(dir.path(), "bad_users.jsonl", "{\"id\":\"a\"}\n{\"id\":\"b\",\"followers_count\":-1}\n");
    let edges = write(dir.path(), "edges.csv", "source,target\n");
    let msg = prepare_dataset(&bad_users, &edges, &hashed).unwrap_err().to_string();
    assert!(msg.contains("bad_users.jsonl") && msg.contains("line 2"), "{msg}");

    let no_train = write(dir.path(), "no_train.jsonl", "{\"id\":\"a\",\"label\":\"bot\",\"split\":\"test\"}\n");
    let err = prepare_dataset(&no_train, &edges, &hashed).unwrap_err();
    assert!(matches!(err.root(), IngestError::EmptyTrainSplit), "{err}");
}

#[test]
fn labels_follow_the_records() {
    let dir = TempDir::new().unwrap();
    let ds = prepare(&dir);
    let bots = ds.labels.iter().filter(|l| **l == Some(Label::Bot)).count();
    assert_eq!(bots, 3);
}
