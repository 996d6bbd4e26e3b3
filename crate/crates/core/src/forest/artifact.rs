//! Versioned JSON persistence of fitted forests.

use serde::{Deserialize, Serialize};

use super::Forest;
use crate::error::{Error, Result};

pub const ARTIFACT_FORMAT: &str = "covfloor-forest";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestArtifact {
    pub format: String,
    pub version: u32,
    pub forest: Forest,
}

impl ForestArtifact {
    pub fn new(forest: Forest) -> Self {
        ForestArtifact {
            format: ARTIFACT_FORMAT.to_string(),
            version: ARTIFACT_VERSION,
            forest,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Artifact(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Forest> {
        let a: ForestArtifact =
            serde_json::from_str(text).map_err(|e| Error::Artifact(e.to_string()))?;
        if a.format != ARTIFACT_FORMAT {
            return Err(Error::Artifact(format!("unknown artifact format `{}`", a.format)));
        }
        if a.version != ARTIFACT_VERSION {
            return Err(Error::Artifact(format!(
                "artifact version {} is not supported (expected {ARTIFACT_VERSION})",
                a.version
            )));
        }
        check_structure(&a.forest)?;
        Ok(a.forest)
    }
}

fn check_structure(forest: &Forest) -> Result<()> {
    let bad = |b: usize, what: &str| Err(Error::Artifact(format!("tree {b}: {what}")));
    let n = forest.n_train();
    for (b, tree) in forest.trees().iter().enumerate() {
        if tree.n_train() != n {
            return bad(b, "inbag length differs from the other trees");
        }
        let n_nodes = tree.nodes().len();
        for node in tree.nodes() {
            if node.is_leaf() {
                if node.left as usize >= tree.leaves().len() {
                    return bad(b, "leaf index out of range");
                }
            } else if node.feature as usize >= forest.n_features()
                || node.left as usize >= n_nodes
                || node.right as usize >= n_nodes
            {
                return bad(b, "node reference out of range");
            }
        }
        for l in 0..tree.leaves().len() {
            let leaf = tree.leaves()[l];
            if (leaf.start as usize + leaf.len as usize) > tree.inbag().distinct() {
                return bad(b, "leaf members out of range");
            }
            let (rows, _) = tree.leaf_members(l);
            if rows.iter().any(|&i| i as usize >= n) {
                return bad(b, "leaf member out of range");
            }
        }
    }
    Ok(())
}
