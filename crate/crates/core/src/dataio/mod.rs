//! Corpus handling: RICO-style ingestion, the synthetic template corpus, seeded
//! splitting, and the JSON-lines corpus file.

mod rico;
mod synth;

pub use rico::{ingest_dir, parse_rico, parse_rico_value, LabelMap};
pub use synth::{synth_corpus, Template};

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::condition::{Condition, ConditionRecord};
use crate::denoiser::TrainExample;
use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::rng;

pub const CORPUS_FORMAT: &str = "layoutforge-corpus";
pub const CORPUS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub layout: Layout,
    pub condition: Condition,
    /// Template name or source file the item came from.
    pub tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub items: Vec<CorpusItem>,
    pub provenance: Provenance,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    provenance: Provenance,
    count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    layout: Layout,
    condition: ConditionRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tag: Option<String>,
}

impl Corpus {
    pub fn new(items: Vec<CorpusItem>, provenance: Provenance) -> Self {
        Self {
            items,
            provenance,
            train: Vec::new(),
            validation: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Seeded shuffle, then the first `round(ratio·n)` indices train and the rest validate.
    pub fn split(mut self, ratio: f64, seed: u64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "split ratio {ratio} must be in (0, 1)"
            )));
        }
        let n = self.items.len();
        let n_train = (ratio * n as f64).round() as usize;
        if n_train == 0 || n_train == n {
            return Err(Error::Data(format!(
                "split of {n} items at ratio {ratio} leaves one side empty"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::seeded(seed, rng::streams::SPLIT));
        self.validation = order.split_off(n_train);
        self.train = order;
        Ok(self)
    }

    pub fn train_items(&self) -> impl Iterator<Item = &CorpusItem> {
        self.train.iter().map(|&i| &self.items[i])
    }

    pub fn validation_items(&self) -> impl Iterator<Item = &CorpusItem> {
        self.validation.iter().map(|&i| &self.items[i])
    }

    /// Encoded pairs for the given item indices.
    pub fn examples(&self, indices: &[usize]) -> Result<Vec<TrainExample>> {
        indices
            .iter()
            .map(|&i| {
                let item = &self.items[i];
                TrainExample::new(&item.layout, &item.condition)
            })
            .collect()
    }

    pub fn write_jsonl(&self, out: impl Write) -> Result<()> {
        let mut out = BufWriter::new(out);
        let header = Header {
            format: CORPUS_FORMAT.into(),
            version: CORPUS_VERSION,
            provenance: self.provenance.clone(),
            count: self.items.len(),
        };
        let io = |e| Error::io("<corpus stream>", e);
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n").map_err(io)?;
        for item in &self.items {
            let line = Line {
                layout: item.layout.clone(),
                condition: ConditionRecord::from(&item.condition),
                tag: item.tag.clone(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_jsonl(file)
    }

    pub fn read_jsonl(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let parse_err = |line: usize, path: String, message: String| Error::Parse {
            path: format!("line {}{}{}", line + 1, if path.is_empty() { "" } else { ": " }, path),
            message,
        };
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::Data("corpus file is empty".into()))?;
        let first = first.map_err(|e| Error::io("<corpus stream>", e))?;
        let header: Header = from_str_tracked(&first).map_err(|(p, m)| parse_err(0, p, m))?;
        if header.format != CORPUS_FORMAT || header.version != CORPUS_VERSION {
            return Err(Error::Data(format!(
                "unsupported corpus format {} v{}",
                header.format, header.version
            )));
        }
        let mut items = Vec::with_capacity(header.count);
        for (no, line) in lines {
            let line = line.map_err(|e| Error::io("<corpus stream>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Line = from_str_tracked(&line).map_err(|(p, m)| parse_err(no, p, m))?;
            rec.layout
                .validate()
                .map_err(|e| parse_err(no, "layout".into(), e.to_string()))?;
            let condition = Condition::try_from(rec.condition)
                .map_err(|e| parse_err(no, "condition".into(), e.to_string()))?;
            items.push(CorpusItem {
                layout: rec.layout,
                condition,
                tag: rec.tag,
            });
        }
        if items.len() != header.count {
            return Err(Error::Data(format!(
                "header announces {} items, file has {}",
                header.count,
                items.len()
            )));
        }
        Ok(Self::new(items, header.provenance))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(BufReader::new(file))
    }
}

fn from_str_tracked<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, (String, String)> {
    let de = &mut serde_json::Deserializer::from_str(s);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        (path, e.into_inner().to_string())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{Component, ComponentType};

    fn corpus(n: usize) -> Corpus {
        let items = (0..n)
            .map(|i| CorpusItem {
                layout: Layout::new(vec![Component::new(
                    ComponentType::Text,
                    0.5,
                    0.05 + 0.09 * i as f64 / n as f64,
                    0.2,
                    0.05,
                    [0.1, 0.2, 0.3],
                )]),
                condition: Condition::from_words(["text"]),
                tag: None,
            })
            .collect();
        Corpus::new(
            items,
            Provenance {
                source: "test".into(),
                seed: None,
            },
        )
    }

    #[test]
    fn split_sizes_and_partition() {
        let c = corpus(10).split(0.8, 3).unwrap();
        assert_eq!((c.train.len(), c.validation.len()), (8, 2));
        let mut all: Vec<usize> = c.train.iter().chain(&c.validation).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        let again = corpus(10).split(0.8, 3).unwrap();
        assert_eq!(c.train, again.train);
        assert_ne!(c.train, corpus(10).split(0.8, 4).unwrap().train);
    }

    #[test]
    fn degenerate_splits_fail() {
        assert!(corpus(1).split(0.5, 0).is_err());
        assert!(corpus(10).split(0.01, 0).is_err());
        assert!(corpus(10).split(1.0, 0).is_err());
        assert!(corpus(10).split(0.0, 0).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let c = corpus(5);
        let mut buf = Vec::new();
        c.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"format\":\"layoutforge-corpus\""));
        assert_eq!(text.lines().count(), 6);
        assert_eq!(Corpus::read_jsonl(&buf[..]).unwrap(), c);
    }

    #[test]
    fn jsonl_errors_name_the_line_and_field() {
        let mut buf = Vec::new();
        corpus(2).write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("\"cx\":0.5", "\"cx\":\"x\"");
        match Corpus::read_jsonl(text.as_bytes()) {
            Err(Error::Parse { path, .. }) => {
                assert!(path.starts_with("line 2"), "{path}");
                assert!(path.contains("layout.components[0].cx"), "{path}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
