use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use super::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub tile_id: String,
    pub patient_id: String,
    pub score: f64,
    pub label: u8,
    /// Cross-validation fold, when the scores come from several models.
    pub fold: Option<String>,
}

/// Prediction scores joined with labels and patient ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(rows: Vec<ScoreRow>) -> Result<Self> {
        for r in &rows {
            if !(r.score.is_finite() && (0.0..=1.0).contains(&r.score)) {
                return Err(Error::BadScore(r.score));
            }
            if r.label > 1 {
                return Err(Error::BadLabel(r.label));
            }
        }
        Ok(Self { rows })
    }

    /// Convenience constructor: row `i` gets tile and patient id `i`.
    pub fn from_scores(scores: &[f64], labels: &[u8]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::LengthMismatch(scores.len(), labels.len()));
        }
        Self::new(
            scores
                .iter()
                .zip(labels)
                .enumerate()
                .map(|(i, (&score, &label))| ScoreRow {
                    tile_id: i.to_string(),
                    patient_id: i.to_string(),
                    score,
                    label,
                    fold: None,
                })
                .collect(),
        )
    }

    /// Reads `tile_id,patient_id,score,label[,fold]` CSV.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let parse_err = |line: u64, message: String| Error::Parse {
            path: path.into(),
            line,
            message,
        };
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })?;
        let mut reader = csv::Reader::from_reader(file);
        let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let mut idx = [0usize; 4];
        for (slot, name) in idx.iter_mut().zip(["tile_id", "patient_id", "score", "label"]) {
            *slot = col(name).ok_or_else(|| parse_err(1, format!("missing column `{name}`")))?;
        }
        let fold_idx = col("fold");
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let get = |i: usize| record.get(i).unwrap_or("").trim();
            let score: f64 = get(idx[2])
                .parse()
                .map_err(|_| parse_err(line, format!("score `{}` is not a number", get(idx[2]))))?;
            if !(score.is_finite() && (0.0..=1.0).contains(&score)) {
                return Err(parse_err(line, format!("score {score} outside [0, 1]")));
            }
            let label = match get(idx[3]) {
                "0" => 0,
                "1" => 1,
                other => return Err(parse_err(line, format!("label `{other}` is not 0 or 1"))),
            };
            rows.push(ScoreRow {
                tile_id: get(idx[0]).to_string(),
                patient_id: get(idx[1]).to_string(),
                score,
                label,
                fold: fold_idx.map(|i| get(i).to_string()).filter(|s| !s.is_empty()),
            });
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.score).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.rows.iter().filter(|r| r.label == 1).count();
        (pos, self.rows.len() - pos)
    }

    /// Sorted distinct fold names.
    pub fn folds(&self) -> Vec<String> {
        let mut f: Vec<String> = self.rows.iter().filter_map(|r| r.fold.clone()).collect();
        f.sort();
        f.dedup();
        f
    }

    pub fn filter_fold(&self, fold: &str) -> ScoreTable {
        ScoreTable {
            rows: self.rows.iter().filter(|r| r.fold.as_deref() == Some(fold)).cloned().collect(),
        }
    }
}

/// One row per patient holding the mean of that patient's tile scores,
/// ordered by patient id. The tile id of an aggregated row is the patient id;
/// the fold is kept when all of the patient's rows agree on it.
pub fn aggregate_patient(table: &ScoreTable) -> Result<ScoreTable> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut groups: BTreeMap<&str, Vec<&ScoreRow>> = BTreeMap::new();
    for row in table.rows() {
        groups.entry(row.patient_id.as_str()).or_default().push(row);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for (patient, members) in groups {
        let label = members[0].label;
        if members.iter().any(|r| r.label != label) {
            return Err(Error::InconsistentLabel(patient.to_string()));
        }
        // Sum in a fixed order so shuffled inputs give identical means.
        let mut scores: Vec<f64> = members.iter().map(|r| r.score).collect();
        scores.sort_by(f64::total_cmp);
        let score = scores.iter().sum::<f64>() / scores.len() as f64;
        let fold = members[0].fold.clone().filter(|f| members.iter().all(|r| r.fold.as_ref() == Some(f)));
        rows.push(ScoreRow {
            tile_id: patient.to_string(),
            patient_id: patient.to_string(),
            score,
            label,
            fold,
        });
    }
    Ok(ScoreTable { rows })
}
