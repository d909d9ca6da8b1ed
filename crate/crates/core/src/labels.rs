use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Who produced the difficulty ratings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Human,
    Llm,
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelSource::Human => "human",
            LabelSource::Llm => "llm",
        })
    }
}

impl FromStr for LabelSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "human" => Ok(LabelSource::Human),
            "llm" => Ok(LabelSource::Llm),
            other => Err(Error::InvalidArgument(format!("unknown label source {other:?}"))),
        }
    }
}

/// Ground-truth difficulty per problem (higher = harder).
#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyLabels {
    entries: BTreeMap<String, f64>,
    source: LabelSource,
    dataset_name: String,
}

#[derive(Serialize, Deserialize)]
struct LabelRow {
    problem_id: String,
    rating: f64,
    source: LabelSource,
}

impl DifficultyLabels {
    pub fn new(
        dataset_name: impl Into<String>,
        source: LabelSource,
        entries: impl IntoIterator<Item = (String, f64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (id, rating) in entries {
            if !rating.is_finite() {
                return Err(Error::NonFiniteInput(format!("rating for {id}")));
            }
            if map.insert(id.clone(), rating).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate label for {id}")));
            }
        }
        let first = map.values().next().copied();
        if !map.values().any(|&r| Some(r) != first) {
            return Err(Error::InvalidArgument(
                "labels need at least 2 distinct ratings".into(),
            ));
        }
        Ok(Self { entries: map, source, dataset_name: dataset_name.into() })
    }

    pub fn dataset_name(&self) -> &str {
        &self.dataset_name
    }
    pub fn source(&self) -> LabelSource {
        self.source
    }
    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
    pub fn get(&self, problem_id: &str) -> Option<f64> {
        self.entries.get(problem_id).copied()
    }
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Ratings ordered like `problem_ids`; errors with every id that has no label.
    pub fn ratings_for(&self, problem_ids: &[String]) -> Result<Vec<f64>> {
        let missing: Vec<String> =
            problem_ids.iter().filter(|id| !self.entries.contains_key(*id)).cloned().collect();
        if !missing.is_empty() {
            return Err(Error::MissingLabels(missing));
        }
        Ok(problem_ids.iter().map(|id| self.entries[id]).collect())
    }

    /// Parses `problem_id,rating,source`. All rows must share one source.
    pub fn read_csv<R: Read>(dataset_name: impl Into<String>, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["problem_id", "rating", "source"] {
            return Err(Error::InvalidArgument(format!(
                "labels header must be problem_id,rating,source; got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut source = None;
        let mut rows = Vec::new();
        for row in rdr.deserialize::<LabelRow>() {
            let row = row?;
            match source {
                None => source = Some(row.source),
                Some(s) if s != row.source => {
                    return Err(Error::InvalidArgument("mixed label sources in one file".into()))
                }
                Some(_) => {}
            }
            rows.push((row.problem_id, row.rating));
        }
        let source = source.ok_or_else(|| Error::InvalidArgument("empty labels file".into()))?;
        Self::new(dataset_name, source, rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (id, &rating) in &self.entries {
            w.serialize(LabelRow { problem_id: id.clone(), rating, source: self.source })?;
        }
        w.flush()?;
        Ok(())
    }
}
