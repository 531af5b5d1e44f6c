//! Node features, labels, and train/validation/test splits.
//!
//! File formats:
//! - features: headerless CSV, row `n` holds the feature vector of node `n`;
//! - labels: CSV lines `node,class` (nodes may be missing — unlabeled);
//! - splits: CSV lines `node,split` with split in {train, val, test},
//!   each node listed at most once.

use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Real-valued node features, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::shape("feature matrix needs at least one column"));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::numeric("non-finite feature entry"));
        }
        Ok(FeatureMatrix { values })
    }

    /// Identity features: node `n` gets the `n`-th standard basis vector.
    /// Used when experiments deliberately discard nodal features.
    pub fn identity(n_nodes: usize) -> Self {
        FeatureMatrix {
            values: Array2::eye(n_nodes),
        }
    }

    pub fn from_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let file = std::fs::File::open(path)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let row = trimmed
                .split(',')
                .map(|cell| {
                    cell.trim().parse::<f64>().map_err(|_| Error::Parse {
                        path: display.clone(),
                        line: idx + 1,
                        message: format!("non-numeric cell {cell:?}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(Error::shape(format!(
                        "{display}:{}: row has {} columns, expected {}",
                        idx + 1,
                        row.len(),
                        first.len()
                    )));
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::validation(format!("{display}: no feature rows")));
        }
        let n = rows.len();
        let f = rows[0].len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let values = Array2::from_shape_vec((n, f), flat).expect("row-major rectangle");
        FeatureMatrix::new(values)
    }

    pub fn n_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// Which split a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(()),
        }
    }
}

/// Class labels (possibly partial), their one-hot encoding, and the three
/// disjoint node masks.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelData {
    labels: Vec<Option<usize>>,
    one_hot: Array2<f64>,
    n_classes: usize,
    train_mask: Vec<usize>,
    val_mask: Vec<usize>,
    test_mask: Vec<usize>,
}

impl LabelData {
    /// Assemble from per-node labels and masks. Every masked node must be
    /// labeled; masks must be disjoint and in range.
    pub fn new(
        labels: Vec<Option<usize>>,
        train_mask: Vec<usize>,
        val_mask: Vec<usize>,
        test_mask: Vec<usize>,
    ) -> Result<Self> {
        let n_nodes = labels.len();
        let n_classes = labels
            .iter()
            .flatten()
            .max()
            .map(|&m| m + 1)
            .unwrap_or(0);
        if n_classes == 0 {
            return Err(Error::validation("no labeled nodes"));
        }

        let mut masks = [train_mask, val_mask, test_mask];
        let mut owner: Vec<Option<usize>> = vec![None; n_nodes];
        for (which, mask) in masks.iter_mut().enumerate() {
            mask.sort_unstable();
            mask.dedup();
            for &node in mask.iter() {
                if node >= n_nodes {
                    return Err(Error::Bounds {
                        index: node,
                        n_nodes,
                    });
                }
                if let Some(other) = owner[node] {
                    if other != which {
                        return Err(Error::validation(format!(
                            "node {node} assigned to more than one split"
                        )));
                    }
                }
                owner[node] = Some(which);
                if labels[node].is_none() {
                    return Err(Error::validation(format!(
                        "node {node} is in a split but has no label"
                    )));
                }
            }
        }

        let mut one_hot = Array2::zeros((n_nodes, n_classes));
        for (node, label) in labels.iter().enumerate() {
            if let Some(k) = label {
                one_hot[[node, *k]] = 1.0;
            }
        }
        let [train_mask, val_mask, test_mask] = masks;
        Ok(LabelData {
            labels,
            one_hot,
            n_classes,
            train_mask,
            val_mask,
            test_mask,
        })
    }

    /// Load labels and splits from their CSV files. The node count is
    /// inferred as one past the largest node index mentioned; use
    /// [`Self::expand_to`] to align with a larger graph.
    pub fn from_files(
        labels_path: impl AsRef<Path>,
        splits_path: impl AsRef<Path>,
    ) -> Result<Self> {
        let labels_path = labels_path.as_ref();
        let display = labels_path.display().to_string();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let file = std::fs::File::open(labels_path)?;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: display.clone(),
                line: idx + 1,
                message,
            };
            let (node_s, class_s) = trimmed
                .split_once(',')
                .ok_or_else(|| err(format!("expected \"node,class\", got {trimmed:?}")))?;
            let node = node_s
                .trim()
                .parse::<usize>()
                .map_err(|_| err(format!("bad node index {node_s:?}")))?;
            let class = class_s
                .trim()
                .parse::<i64>()
                .map_err(|_| err(format!("bad class {class_s:?}")))?;
            if class < 0 {
                return Err(err(format!("negative class index {class}")));
            }
            pairs.push((node, class as usize));
        }

        let splits_path = splits_path.as_ref();
        let display = splits_path.display().to_string();
        let mut split_pairs: Vec<(usize, Split)> = Vec::new();
        let file = std::fs::File::open(splits_path)?;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: display.clone(),
                line: idx + 1,
                message,
            };
            let (node_s, split_s) = trimmed
                .split_once(',')
                .ok_or_else(|| err(format!("expected \"node,split\", got {trimmed:?}")))?;
            let node = node_s
                .trim()
                .parse::<usize>()
                .map_err(|_| err(format!("bad node index {node_s:?}")))?;
            let split = split_s
                .trim()
                .parse::<Split>()
                .map_err(|_| err(format!("unknown split {split_s:?}")))?;
            // A node listed twice in the same split is a duplicate row;
            // listed in two different splits it is a conflict. Both are
            // caught below via the owner check in `new`, except same-split
            // duplicates which are benign and deduplicated.
            split_pairs.push((node, split));
        }

        let n_nodes = pairs
            .iter()
            .map(|&(n, _)| n)
            .chain(split_pairs.iter().map(|&(n, _)| n))
            .max()
            .map(|m| m + 1)
            .unwrap_or(0);
        let mut labels = vec![None; n_nodes];
        for (node, class) in pairs {
            labels[node] = Some(class);
        }
        let mut masks: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut seen: Vec<Option<Split>> = vec![None; n_nodes];
        for (node, split) in split_pairs {
            if let Some(prev) = seen[node] {
                if prev != split {
                    return Err(Error::validation(format!(
                        "node {node} assigned to more than one split"
                    )));
                }
                continue;
            }
            seen[node] = Some(split);
            let slot = match split {
                Split::Train => &mut masks[0],
                Split::Val => &mut masks[1],
                Split::Test => &mut masks[2],
            };
            slot.push(node);
        }
        let [train, val, test] = masks;
        LabelData::new(labels, train, val, test)
    }

    /// Pad with unlabeled nodes up to `n_nodes` (to match a graph whose
    /// trailing nodes are unlabeled).
    pub fn expand_to(mut self, n_nodes: usize) -> Result<Self> {
        if n_nodes < self.labels.len() {
            return Err(Error::shape(format!(
                "cannot shrink labels from {} to {} nodes",
                self.labels.len(),
                n_nodes
            )));
        }
        if n_nodes == self.labels.len() {
            return Ok(self);
        }
        self.labels.resize(n_nodes, None);
        let mut one_hot = Array2::zeros((n_nodes, self.n_classes));
        one_hot
            .slice_mut(ndarray::s![..self.one_hot.nrows(), ..])
            .assign(&self.one_hot);
        self.one_hot = one_hot;
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn label_of(&self, node: usize) -> Option<usize> {
        self.labels.get(node).copied().flatten()
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    /// One-hot label matrix; all-zero rows mark unlabeled nodes.
    pub fn one_hot(&self) -> &Array2<f64> {
        &self.one_hot
    }

    pub fn train_mask(&self) -> &[usize] {
        &self.train_mask
    }

    pub fn val_mask(&self) -> &[usize] {
        &self.val_mask
    }

    pub fn test_mask(&self) -> &[usize] {
        &self.test_mask
    }

    pub fn mask(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train_mask,
            Split::Val => &self.val_mask,
            Split::Test => &self.test_mask,
        }
    }
}
