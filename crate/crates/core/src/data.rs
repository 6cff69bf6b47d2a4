//! Logged-data types, file ingestion, validation and episode-level splits.
//!
//! A log is a list of six-element records (state, action, propensity, reward,
//! cost, next state) grouped into episodes. Two on-disk layouts are accepted:
//! newline-delimited JSON objects and header-based CSV, both with the exact
//! field names of [`LoggedTransition`].

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// One logged step: what the behavior policy saw, did, and observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoggedTransition {
    pub episode_id: String,
    /// Step index within the episode, consecutive from 0.
    pub t: u32,
    pub state: usize,
    pub action: usize,
    /// Probability the behavior policy assigned to the logged action, in (0, 1].
    pub propensity: f64,
    pub reward: f64,
    /// Budget units consumed by the action; non-negative.
    pub cost: f64,
    /// Successor state; absent exactly when `done` is true.
    pub next_state: Option<usize>,
    pub done: bool,
}

impl LoggedTransition {
    fn check(&self) -> Result<()> {
        if !(self.propensity > 0.0 && self.propensity <= 1.0) {
            return Err(CoreError::InvalidPropensity {
                value: self.propensity,
                context: format!(" (episode {}, t={})", self.episode_id, self.t),
            });
        }
        if self.done != self.next_state.is_none() {
            return Err(CoreError::DoneNextStateMismatch {
                episode_id: self.episode_id.clone(),
                t: self.t,
                done: self.done,
                next: match self.next_state {
                    Some(s) => format!("{s}"),
                    None => "absent".to_string(),
                },
            });
        }
        Ok(())
    }
}

/// An immutable collection of logged transitions, grouped by episode and
/// time-sorted, together with the discrete space sizes it was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    transitions: Vec<LoggedTransition>,
    episodes: Vec<Range<usize>>,
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    pub gamma: f64,
}

impl Dataset {
    /// Build a dataset, inferring `n_states`, `n_actions` and `horizon` from
    /// the records. `gamma` defaults to 1 under [`load_dataset`]; callers with
    /// a known discount use [`Dataset::with_gamma`].
    pub fn from_transitions(transitions: Vec<LoggedTransition>, gamma: f64) -> Result<Self> {
        let mut n_states = 0usize;
        let mut n_actions = 0usize;
        for tr in &transitions {
            n_states = n_states.max(tr.state + 1);
            if let Some(ns) = tr.next_state {
                n_states = n_states.max(ns + 1);
            }
            n_actions = n_actions.max(tr.action + 1);
        }
        Self::from_parts(transitions, n_states, n_actions, usize::MAX, gamma).map(|mut d| {
            d.horizon = d.episodes.iter().map(|r| r.len()).max().unwrap_or(0);
            d
        })
    }

    /// Build a dataset with explicit space sizes and horizon, validating every
    /// record against them.
    pub fn from_parts(
        transitions: Vec<LoggedTransition>,
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        gamma: f64,
    ) -> Result<Self> {
        for tr in &transitions {
            tr.check()?;
            if tr.state >= n_states {
                return Err(CoreError::IdOutOfRange {
                    what: "state",
                    id: tr.state,
                    bound: n_states,
                });
            }
            if let Some(ns) = tr.next_state {
                if ns >= n_states {
                    return Err(CoreError::IdOutOfRange {
                        what: "next_state",
                        id: ns,
                        bound: n_states,
                    });
                }
            }
            if tr.action >= n_actions {
                return Err(CoreError::IdOutOfRange {
                    what: "action",
                    id: tr.action,
                    bound: n_actions,
                });
            }
        }

        // Group by episode id in first-appearance order, sort by t inside.
        let mut order: Vec<String> = Vec::new();
        let mut groups: HashMap<String, Vec<LoggedTransition>> = HashMap::new();
        for tr in transitions {
            if !groups.contains_key(&tr.episode_id) {
                order.push(tr.episode_id.clone());
            }
            groups.entry(tr.episode_id.clone()).or_default().push(tr);
        }

        let mut flat = Vec::new();
        let mut episodes = Vec::with_capacity(order.len());
        for id in order {
            let mut group = groups.remove(&id).expect("group exists");
            group.sort_by_key(|tr| tr.t);
            for (i, tr) in group.iter().enumerate() {
                if tr.t as usize != i {
                    return Err(CoreError::NonConsecutiveSteps {
                        episode_id: id.clone(),
                        found: tr.t,
                        position: i,
                    });
                }
            }
            if group.len() > horizon {
                return Err(CoreError::EpisodeTooLong {
                    episode_id: id.clone(),
                    len: group.len(),
                    horizon,
                });
            }
            let start = flat.len();
            flat.extend(group);
            episodes.push(start..flat.len());
        }

        Ok(Dataset {
            transitions: flat,
            episodes,
            n_states,
            n_actions,
            horizon,
            gamma,
        })
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn transitions(&self) -> &[LoggedTransition] {
        &self.transitions
    }

    pub fn n_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Iterate over episodes as time-ordered slices.
    pub fn episodes(&self) -> impl Iterator<Item = &[LoggedTransition]> {
        self.episodes.iter().map(|r| &self.transitions[r.clone()])
    }
}

/// Episode-level partition of a dataset into training and evaluation halves.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Dataset,
    pub val: Dataset,
    pub seed: u64,
}

/// Field-name mapping for log files whose columns differ from the canonical
/// names. Defaults to the identity mapping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogSchema {
    pub episode_id: String,
    pub t: String,
    pub state: String,
    pub action: String,
    pub propensity: String,
    pub reward: String,
    pub cost: String,
    pub next_state: String,
    pub done: String,
}

impl Default for LogSchema {
    fn default() -> Self {
        LogSchema {
            episode_id: "episode_id".into(),
            t: "t".into(),
            state: "state".into(),
            action: "action".into(),
            propensity: "propensity".into(),
            reward: "reward".into(),
            cost: "cost".into(),
            next_state: "next_state".into(),
            done: "done".into(),
        }
    }
}

impl LogSchema {
    fn names(&self) -> [(&str, &str); 9] {
        [
            ("episode_id", self.episode_id.as_str()),
            ("t", self.t.as_str()),
            ("state", self.state.as_str()),
            ("action", self.action.as_str()),
            ("propensity", self.propensity.as_str()),
            ("reward", self.reward.as_str()),
            ("cost", self.cost.as_str()),
            ("next_state", self.next_state.as_str()),
            ("done", self.done.as_str()),
        ]
    }
}

/// Diagnostic summary of a dataset; never mutates its input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Visit counts per (state, action).
    pub visit_counts: Vec<Vec<u64>>,
    pub min_propensity: Option<f64>,
    pub max_propensity: Option<f64>,
    /// Episodes whose last record has `done = false`.
    pub episodes_without_done: usize,
    /// (state, action) pairs with zero visits.
    pub unvisited_pairs: Vec<(usize, usize)>,
    pub n_episodes: usize,
    pub n_transitions: usize,
}

/// Load a log file, auto-detecting JSONL vs CSV from the first line.
pub fn load_dataset(path: impl AsRef<Path>, schema: &LogSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    let first = raw.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let transitions = if first.trim_start().starts_with('{') {
        parse_jsonl(&raw, path, schema)?
    } else {
        parse_csv(&raw, path, schema)?
    };
    Dataset::from_transitions(transitions, 1.0)
}

fn parse_jsonl(raw: &str, path: &Path, schema: &LogSchema) -> Result<Vec<LoggedTransition>> {
    let path_str = path.display().to_string();
    let mut out = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| CoreError::MalformedRecord {
                path: path_str.clone(),
                line: line_no,
                message: e.to_string(),
            })?;
        let obj = value.as_object().ok_or_else(|| CoreError::MalformedRecord {
            path: path_str.clone(),
            line: line_no,
            message: "record is not an object".into(),
        })?;
        let known: BTreeSet<&str> = schema.names().iter().map(|(_, v)| *v).collect();
        for key in obj.keys() {
            if !known.contains(key.as_str()) {
                return Err(CoreError::MalformedRecord {
                    path: path_str.clone(),
                    line: line_no,
                    message: format!("unknown field `{key}`"),
                });
            }
        }
        let field = |name: &str| -> Result<&serde_json::Value> {
            obj.get(name).ok_or_else(|| CoreError::MalformedRecord {
                path: path_str.clone(),
                line: line_no,
                message: format!("missing field `{name}`"),
            })
        };
        let as_u64 = |name: &str| -> Result<u64> {
            field(name)?.as_u64().ok_or_else(|| CoreError::MalformedRecord {
                path: path_str.clone(),
                line: line_no,
                message: format!("field `{name}` is not a non-negative integer"),
            })
        };
        let as_f64 = |name: &str| -> Result<f64> {
            field(name)?.as_f64().ok_or_else(|| CoreError::MalformedRecord {
                path: path_str.clone(),
                line: line_no,
                message: format!("field `{name}` is not a number"),
            })
        };
        let episode_id = field(&schema.episode_id)?
            .as_str()
            .ok_or_else(|| CoreError::MalformedRecord {
                path: path_str.clone(),
                line: line_no,
                message: format!("field `{}` is not a string", schema.episode_id),
            })?
            .to_string();
        let next_value = field(&schema.next_state)?;
        let next_state = if next_value.is_null() {
            None
        } else {
            Some(next_value.as_u64().ok_or_else(|| CoreError::MalformedRecord {
                path: path_str.clone(),
                line: line_no,
                message: format!("field `{}` is not an integer or null", schema.next_state),
            })? as usize)
        };
        let done = field(&schema.done)?
            .as_bool()
            .ok_or_else(|| CoreError::MalformedRecord {
                path: path_str.clone(),
                line: line_no,
                message: format!("field `{}` is not a boolean", schema.done),
            })?;
        out.push(LoggedTransition {
            episode_id,
            t: as_u64(&schema.t)? as u32,
            state: as_u64(&schema.state)? as usize,
            action: as_u64(&schema.action)? as usize,
            propensity: as_f64(&schema.propensity)?,
            reward: as_f64(&schema.reward)?,
            cost: as_f64(&schema.cost)?,
            next_state,
            done,
        });
    }
    Ok(out)
}

fn parse_csv(raw: &str, path: &Path, schema: &LogSchema) -> Result<Vec<LoggedTransition>> {
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(raw.as_bytes());
    let headers = reader.headers()?.clone();
    let expected: BTreeSet<&str> = schema.names().iter().map(|(_, v)| *v).collect();
    let got: BTreeSet<&str> = headers.iter().collect();
    if expected != got {
        return Err(CoreError::MalformedRecord {
            path: path_str.clone(),
            line: 1,
            message: format!(
                "header mismatch: expected columns {:?}, found {:?}",
                expected, got
            ),
        });
    }
    let col = |name: &str| headers.iter().position(|h| h == name).expect("checked");
    let cols: HashMap<&str, usize> = schema
        .names()
        .iter()
        .map(|(canon, mapped)| (*canon, col(mapped)))
        .collect();

    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line_no = idx + 2; // header occupies line 1
        let record = record?;
        let cell = |canon: &str| record.get(cols[canon]).unwrap_or("");
        let parse_err = |name: &str, what: &str| CoreError::MalformedRecord {
            path: path_str.clone(),
            line: line_no,
            message: format!("field `{name}` is not {what}"),
        };
        let next_raw = cell("next_state").trim();
        let next_state = if next_raw.is_empty() || next_raw == "null" {
            None
        } else {
            Some(next_raw.parse::<usize>().map_err(|_| parse_err("next_state", "an integer or empty"))?)
        };
        out.push(LoggedTransition {
            episode_id: cell("episode_id").to_string(),
            t: cell("t").trim().parse().map_err(|_| parse_err("t", "an integer"))?,
            state: cell("state").trim().parse().map_err(|_| parse_err("state", "an integer"))?,
            action: cell("action").trim().parse().map_err(|_| parse_err("action", "an integer"))?,
            propensity: cell("propensity").trim().parse().map_err(|_| parse_err("propensity", "a number"))?,
            reward: cell("reward").trim().parse().map_err(|_| parse_err("reward", "a number"))?,
            cost: cell("cost").trim().parse().map_err(|_| parse_err("cost", "a number"))?,
            next_state,
            done: cell("done").trim().parse().map_err(|_| parse_err("done", "a boolean"))?,
        });
    }
    Ok(out)
}

/// Write a dataset as newline-delimited JSON records.
pub fn write_jsonl(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = String::new();
    for tr in dataset.transitions() {
        buf.push_str(&serde_json::to_string(tr)?);
        buf.push('\n');
    }
    fs::write(path, buf).map_err(|e| CoreError::io(path, e))
}

/// Write a dataset as CSV with canonical column names.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_writer(Vec::new());
    for tr in dataset.transitions() {
        writer.serialize(tr)?;
    }
    let bytes = writer.into_inner().expect("in-memory writer");
    fs::write(path, bytes).map_err(|e| CoreError::io(path, e))
}

/// Per-(state, action) visit counts and degenerate-coverage diagnostics.
pub fn validate_dataset(dataset: &Dataset) -> ValidationReport {
    let mut visit_counts = vec![vec![0u64; dataset.n_actions]; dataset.n_states];
    let mut min_p: Option<f64> = None;
    let mut max_p: Option<f64> = None;
    for tr in dataset.transitions() {
        visit_counts[tr.state][tr.action] += 1;
        min_p = Some(min_p.map_or(tr.propensity, |m| m.min(tr.propensity)));
        max_p = Some(max_p.map_or(tr.propensity, |m| m.max(tr.propensity)));
    }
    let episodes_without_done = dataset
        .episodes()
        .filter(|ep| ep.last().is_some_and(|tr| !tr.done))
        .count();
    let mut unvisited_pairs = Vec::new();
    for (s, row) in visit_counts.iter().enumerate() {
        for (a, &count) in row.iter().enumerate() {
            if count == 0 {
                unvisited_pairs.push((s, a));
            }
        }
    }
    ValidationReport {
        visit_counts,
        min_propensity: min_p,
        max_propensity: max_p,
        episodes_without_done,
        unvisited_pairs,
        n_episodes: dataset.n_episodes(),
        n_transitions: dataset.transitions().len(),
    }
}

/// Random episode-level split. Episodes never straddle the two halves and the
/// result is a deterministic function of `seed`.
pub fn split_dataset(dataset: &Dataset, val_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(CoreError::InvalidConfig(format!(
            "val_fraction must be in (0,1), got {val_fraction}"
        )));
    }
    let n = dataset.n_episodes();
    if n < 2 {
        return Err(CoreError::TooFewEpisodes { need: 2, got: n });
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let val_count = (val_fraction * n as f64).round() as usize;
    let val_set: BTreeSet<usize> = indices.into_iter().take(val_count).collect();

    let mut train_tr = Vec::new();
    let mut val_tr = Vec::new();
    for (i, ep) in dataset.episodes().enumerate() {
        if val_set.contains(&i) {
            val_tr.extend_from_slice(ep);
        } else {
            train_tr.extend_from_slice(ep);
        }
    }
    // Both halves inherit the parent's dimensions so downstream tables stay
    // shape-compatible even when a half misses some states.
    let make = |trs: Vec<LoggedTransition>| {
        Dataset::from_parts(
            trs,
            dataset.n_states,
            dataset.n_actions,
            dataset.horizon,
            dataset.gamma,
        )
    };
    Ok(DatasetSplit {
        train: make(train_tr)?,
        val: make(val_tr)?,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(ep: &str, t: u32, state: usize, action: usize, done: bool) -> LoggedTransition {
        LoggedTransition {
            episode_id: ep.to_string(),
            t,
            state,
            action,
            propensity: 0.5,
            reward: 1.0,
            cost: 1.0,
            next_state: if done { None } else { Some(state + 1) },
            done,
        }
    }

    fn two_episode_dataset() -> Dataset {
        let transitions = vec![
            record("a", 0, 0, 0, false),
            record("a", 1, 1, 1, true),
            record("b", 0, 0, 1, false),
            record("b", 1, 2, 0, true),
        ];
        Dataset::from_transitions(transitions, 1.0).unwrap()
    }

    #[test]
    fn infers_dimensions_and_horizon() {
        let d = two_episode_dataset();
        assert_eq!(d.n_states, 3);
        assert_eq!(d.n_actions, 2);
        assert_eq!(d.horizon, 2);
        assert_eq!(d.n_episodes(), 2);
    }

    #[test]
    fn six_line_file_two_episodes() {
        let mut transitions = Vec::new();
        for ep in ["x", "y"] {
            for t in 0..3 {
                transitions.push(record(ep, t, t as usize, 0, t == 2));
            }
        }
        let d = Dataset::from_transitions(transitions, 1.0).unwrap();
        assert_eq!(d.transitions().len(), 6);
        assert_eq!(d.horizon, 3);
    }

    #[test]
    fn rejects_zero_propensity() {
        let mut tr = record("a", 0, 0, 0, true);
        tr.propensity = 0.0;
        let err = Dataset::from_transitions(vec![tr], 1.0).unwrap_err();
        assert!(err.to_string().contains("propensity must be in (0,1]"));
    }

    #[test]
    fn rejects_non_consecutive_steps() {
        let transitions = vec![record("a", 0, 0, 0, false), record("a", 2, 1, 0, true)];
        let err = Dataset::from_transitions(transitions, 1.0).unwrap_err();
        assert!(err.to_string().contains("consecutive"));
    }

    #[test]
    fn rejects_done_with_successor() {
        let mut tr = record("a", 0, 0, 0, true);
        tr.next_state = Some(1);
        let err = Dataset::from_transitions(vec![tr], 1.0).unwrap_err();
        assert!(err.to_string().contains("done=true"));
    }

    #[test]
    fn groups_out_of_order_records() {
        let transitions = vec![
            record("a", 1, 1, 1, true),
            record("b", 0, 0, 1, false),
            record("a", 0, 0, 0, false),
            record("b", 1, 2, 0, true),
        ];
        let d = Dataset::from_transitions(transitions, 1.0).unwrap();
        for ep in d.episodes() {
            assert_eq!(ep[0].t, 0);
            assert_eq!(ep[1].t, 1);
        }
    }

    #[test]
    fn validation_counts_and_flags() {
        let d = two_episode_dataset();
        let report = validate_dataset(&d);
        assert_eq!(report.n_transitions, 4);
        assert_eq!(report.visit_counts[0][0], 1);
        assert_eq!(report.visit_counts[0][1], 1);
        assert_eq!(report.episodes_without_done, 0);
        // (1,0), (2,1) never visited
        assert_eq!(report.unvisited_pairs, vec![(1, 0), (2, 1)]);
    }

    #[test]
    fn validation_of_empty_dataset() {
        let d = Dataset::from_transitions(Vec::new(), 1.0).unwrap();
        let report = validate_dataset(&d);
        assert_eq!(report.n_transitions, 0);
        assert_eq!(report.n_episodes, 0);
        assert!(report.min_propensity.is_none());
        assert!(report.visit_counts.is_empty());
    }

    #[test]
    fn validation_flags_missing_action() {
        // action 1 never appears: one unvisited pair per state
        let transitions = vec![
            record("a", 0, 0, 0, false),
            record("a", 1, 1, 0, true),
            record("b", 0, 0, 0, false),
            record("b", 1, 1, 0, true),
        ];
        let mut d = Dataset::from_transitions(transitions, 1.0).unwrap();
        d.n_actions = 2;
        let report = validate_dataset(&d);
        let flagged: Vec<_> = report
            .unvisited_pairs
            .iter()
            .filter(|(_, a)| *a == 1)
            .collect();
        assert_eq!(flagged.len(), d.n_states);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let mut transitions = Vec::new();
        for i in 0..10 {
            transitions.push(record(&format!("e{i}"), 0, 0, 0, true));
        }
        let d = Dataset::from_transitions(transitions, 1.0).unwrap();
        let s1 = split_dataset(&d, 0.3, 7).unwrap();
        assert_eq!(s1.val.n_episodes(), 3);
        assert_eq!(s1.train.n_episodes(), 7);
        let s2 = split_dataset(&d, 0.3, 7).unwrap();
        assert_eq!(s1, s2);
        let s3 = split_dataset(&d, 0.3, 8).unwrap();
        assert!(s3 == s1 || s3.val != s1.val || s3.train != s1.train);
    }

    #[test]
    fn split_requires_two_episodes() {
        let d = Dataset::from_transitions(vec![record("only", 0, 0, 0, true)], 1.0).unwrap();
        assert!(matches!(
            split_dataset(&d, 0.5, 0),
            Err(CoreError::TooFewEpisodes { .. })
        ));
    }

    #[test]
    fn jsonl_round_trip_preserves_records() {
        let d = two_episode_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        write_jsonl(&d, &path).unwrap();
        let loaded = load_dataset(&path, &LogSchema::default()).unwrap();
        assert_eq!(loaded, d);
    }

    #[test]
    fn csv_round_trip_preserves_records() {
        let d = two_episode_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        write_csv(&d, &path).unwrap();
        let loaded = load_dataset(&path, &LogSchema::default()).unwrap();
        assert_eq!(loaded, d);
    }

    #[test]
    fn jsonl_error_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let good = serde_json::to_string(&record("a", 0, 0, 0, true)).unwrap();
        fs::write(&path, format!("{good}\nnot json\n")).unwrap();
        let err = load_dataset(&path, &LogSchema::default()).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn jsonl_rejects_unknown_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("extra.jsonl");
        let mut value = serde_json::to_value(record("a", 0, 0, 0, true)).unwrap();
        value["surprise"] = serde_json::json!(1);
        fs::write(&path, format!("{value}\n")).unwrap();
        let err = load_dataset(&path, &LogSchema::default()).unwrap_err();
        assert!(err.to_string().contains("surprise"));
    }

    #[test]
    fn schema_mapping_renames_columns() {
        let d = two_episode_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mapped.jsonl");
        let mut buf = String::new();
        for tr in d.transitions() {
            let mut v = serde_json::to_value(tr).unwrap();
            let obj = v.as_object_mut().unwrap();
            let reward = obj.remove("reward").unwrap();
            obj.insert("engagement".into(), reward);
            buf.push_str(&serde_json::to_string(&v).unwrap());
            buf.push('\n');
        }
        fs::write(&path, buf).unwrap();
        let schema = LogSchema {
            reward: "engagement".into(),
            ..LogSchema::default()
        };
        let loaded = load_dataset(&path, &schema).unwrap();
        assert_eq!(loaded, d);
    }
}
