use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disjoint blocks covering all predictor indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionFile", into = "PartitionFile")]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct PartitionFile {
    blocks: Vec<Vec<usize>>,
}

impl TryFrom<PartitionFile> for Partition {
    type Error = Error;

    fn try_from(file: PartitionFile) -> Result<Self> {
        let m = file.blocks.iter().map(|b| b.len()).sum();
        Partition::new(file.blocks, m)
    }
}

impl From<Partition> for PartitionFile {
    fn from(p: Partition) -> Self {
        PartitionFile { blocks: p.blocks }
    }
}

impl Partition {
    pub fn new(blocks: Vec<Vec<usize>>, num_predictors: usize) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::BadPartition("no blocks".into()));
        }
        let mut block_of = vec![usize::MAX; num_predictors];
        for (k, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::BadPartition(format!("block {k} is empty")));
            }
            for &f in block {
                if f >= num_predictors {
                    return Err(Error::BadPartition(format!(
                        "predictor {f} in block {k} is out of range"
                    )));
                }
                if block_of[f] != usize::MAX {
                    return Err(Error::BadPartition(format!(
                        "predictor {f} in blocks {} and {k}",
                        block_of[f]
                    )));
                }
                block_of[f] = k;
            }
        }
        if let Some(f) = block_of.iter().position(|&k| k == usize::MAX) {
            return Err(Error::BadPartition(format!("predictor {f} is not covered")));
        }
        Ok(Self { blocks, block_of })
    }

    /// Everything in one block.
    pub fn whole(num_predictors: usize) -> Self {
        Self::new(vec![(0..num_predictors).collect()], num_predictors).expect("valid")
    }

    /// One block per predictor.
    pub fn singletons(num_predictors: usize) -> Self {
        Self::new((0..num_predictors).map(|f| vec![f]).collect(), num_predictors).expect("valid")
    }

    /// Build from a block label per predictor; labels must be 0..K.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |&m| m + 1);
        let mut blocks = vec![Vec::new(); k];
        for (f, &b) in labels.iter().enumerate() {
            blocks[b].push(f);
        }
        Self::new(blocks, labels.len())
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn num_predictors(&self) -> usize {
        self.block_of.len()
    }

    pub fn block(&self, k: usize) -> &[usize] {
        &self.blocks[k]
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_of(&self, f: usize) -> usize {
        self.block_of[f]
    }

    pub fn check_size(&self, num_predictors: usize) -> Result<()> {
        if self.num_predictors() != num_predictors {
            return Err(Error::BadPartition(format!(
                "partition covers {} predictors, class has {num_predictors}",
                self.num_predictors()
            )));
        }
        Ok(())
    }
}
