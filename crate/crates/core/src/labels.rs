//! Node class labels and train/val/test split tags.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Result, TadaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    None,
}

impl FromStr for Split {
    type Err = TadaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "none" => Ok(Split::None),
            other => Err(TadaError::Format(format!("unknown split tag {other:?}"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::None => "none",
        })
    }
}

/// Per-node class index plus split tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    splits: Vec<Split>,
    num_classes: usize,
}

impl LabelVector {
    /// Class count is `max(label) + 1`; every class id must occur.
    pub fn new(labels: Vec<usize>, splits: Vec<Split>) -> Result<Self> {
        if labels.len() != splits.len() {
            return Err(TadaError::DimensionMismatch {
                what: "split tags",
                expected: labels.len(),
                found: splits.len(),
            });
        }
        let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
        let mut seen = vec![false; num_classes];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(TadaError::invalid(format!(
                "class ids must be contiguous from 0; class {missing} has no node"
            )));
        }
        Ok(Self {
            labels,
            splits,
            num_classes,
        })
    }

    /// Every node tagged `train`.
    pub fn all_train(labels: Vec<usize>) -> Result<Self> {
        let splits = vec![Split::Train; labels.len()];
        Self::new(labels, splits)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn ensure_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(TadaError::DimensionMismatch {
                what: "label count",
                expected: n,
                found: self.len(),
            });
        }
        Ok(())
    }

    /// Homophily ratio: fraction of edges whose endpoints share a label.
    pub fn homophily(&self, edges: &[(usize, usize)]) -> f64 {
        if edges.is_empty() {
            return 0.0;
        }
        let same = edges
            .iter()
            .filter(|&&(u, v)| self.labels[u] == self.labels[v])
            .count();
        same as f64 / edges.len() as f64
    }
}
