use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use super::IngestError;

/// Numerical properties, in column order.
pub const NUMERIC_COLUMNS: [&str; 6] = [
    "followers_count",
    "followings_count",
    "favorites_count",
    "statuses_count",
    "active_days",
    "screen_name_length",
];

/// Boolean properties, in column order. Each becomes a two-wide one-hot block.
pub const CATEGORICAL_COLUMNS: [&str; 11] = [
    "protected",
    "geo_enabled",
    "verified",
    "contributors_enabled",
    "is_translator",
    "is_translation_enabled",
    "profile_background_tile",
    "profile_user_background_image",
    "has_extended_profile",
    "default_profile",
    "default_profile_image",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Human = 0,
    Bot = 1,
}

impl Label {
    pub fn as_class(self) -> usize {
        self as usize
    }

    pub fn from_class(c: usize) -> Option<Self> {
        match c {
            0 => Some(Label::Human),
            1 => Some(Label::Bot),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
    Unlabeled,
}

impl Split {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unlabeled => "unlabeled",
        }
    }
}

/// One user as read from `users.jsonl`. Missing properties stay `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct UserRecord {
    pub user_id: String,
    pub numerical: [Option<f64>; 6],
    pub categorical: [Option<bool>; 11],
    pub label: Option<Label>,
    pub split: Split,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUser {
    id: String,
    followers_count: Option<f64>,
    followings_count: Option<f64>,
    favorites_count: Option<f64>,
    statuses_count: Option<f64>,
    active_days: Option<f64>,
    screen_name_length: Option<f64>,
    protected: Option<bool>,
    geo_enabled: Option<bool>,
    verified: Option<bool>,
    contributors_enabled: Option<bool>,
    is_translator: Option<bool>,
    is_translation_enabled: Option<bool>,
    profile_background_tile: Option<bool>,
    profile_user_background_image: Option<bool>,
    has_extended_profile: Option<bool>,
    default_profile: Option<bool>,
    default_profile_image: Option<bool>,
    label: Option<String>,
    split: Option<String>,
}

impl RawUser {
    fn into_record(self, line: usize) -> Result<UserRecord, IngestError> {
        let numerical = [
            self.followers_count,
            self.followings_count,
            self.favorites_count,
            self.statuses_count,
            self.active_days,
            self.screen_name_length,
        ];
        for (col, v) in NUMERIC_COLUMNS.iter().zip(&numerical) {
            if let Some(v) = *v {
                // active_days may be fractional; the rest are counts
                let is_count = *col != "active_days";
                if !v.is_finite() || v < 0.0 || (is_count && v.fract() != 0.0) {
                    return Err(IngestError::InvalidValue {
                        line,
                        field: col,
                        reason: "expected a nonnegative integer count".into(),
                    });
                }
            }
        }
        let label = match self.label.as_deref() {
            None => None,
            Some("human") => Some(Label::Human),
            Some("bot") => Some(Label::Bot),
            Some(other) => {
                return Err(IngestError::InvalidValue {
                    line,
                    field: "label",
                    reason: format!("`{other}` is not \"human\" or \"bot\""),
                })
            }
        };
        let split = match self.split.as_deref() {
            None => Split::Unlabeled,
            Some(s) => Split::parse(s).ok_or_else(|| IngestError::InvalidValue {
                line,
                field: "split",
                reason: format!("`{s}` is not train, val or test"),
            })?,
        };
        if split != Split::Unlabeled && label.is_none() {
            return Err(IngestError::InvalidValue {
                line,
                field: "split",
                reason: format!("user `{}` is in the {} split but has no label", self.id, split.as_str()),
            });
        }
        Ok(UserRecord {
            user_id: self.id,
            numerical,
            categorical: [
                self.protected,
                self.geo_enabled,
                self.verified,
                self.contributors_enabled,
                self.is_translator,
                self.is_translation_enabled,
                self.profile_background_tile,
                self.profile_user_background_image,
                self.has_extended_profile,
                self.default_profile,
                self.default_profile_image,
            ],
            label,
            split,
        })
    }
}

pub fn parse_users_from_reader<R: BufRead>(reader: R) -> Result<Vec<UserRecord>, IngestError> {
    let mut out = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| IngestError::Io {
            path: None,
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawUser = serde_json::from_str(&line).map_err(|e| IngestError::Json {
            line: lineno,
            message: e.to_string(),
        })?;
        let rec = raw.into_record(lineno)?;
        if let Some(&first) = seen.get(&rec.user_id) {
            return Err(IngestError::DuplicateUser {
                id: rec.user_id,
                first,
                line: lineno,
            });
        }
        seen.insert(rec.user_id.clone(), lineno);
        out.push(rec);
    }
    Ok(out)
}

/// Reads `users.jsonl`, one JSON object per line, preserving file order.
pub fn parse_users(path: &Path) -> Result<Vec<UserRecord>, IngestError> {
    let f = File::open(path).map_err(|e| IngestError::io(path, e))?;
    parse_users_from_reader(BufReader::new(f)).map_err(|e| e.with_path(path))
}
