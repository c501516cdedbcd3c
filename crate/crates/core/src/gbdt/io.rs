//! JSON model files with trees dumped as nested node objects.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::boost::GbdtModel;
use super::tree::{Node, RegressionTree};
use super::Target;

#[derive(Serialize, Deserialize)]
#[serde(untagged, bound = "T: Scalar")]
enum NodeRepr<T> {
    Split { feature: usize, threshold: T, left: Box<NodeRepr<T>>, right: Box<NodeRepr<T>> },
    Leaf { leaf: T },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
struct TreeRepr<T> {
    max_depth: usize,
    root: NodeRepr<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
struct ModelRepr<T> {
    target: Target,
    base_prediction: T,
    learning_rate: T,
    n_estimators: usize,
    max_depth: usize,
    n_features: usize,
    validation_mae: Option<f64>,
    trees: Vec<TreeRepr<T>>,
}

fn to_repr<T: Scalar>(nodes: &[Node<T>], i: usize) -> NodeRepr<T> {
    match nodes[i] {
        Node::Leaf { value } => NodeRepr::Leaf { leaf: value },
        Node::Split { feature, threshold, left, right } => NodeRepr::Split {
            feature,
            threshold,
            left: Box::new(to_repr(nodes, left as usize)),
            right: Box::new(to_repr(nodes, right as usize)),
        },
    }
}

/// Fills slot `id`, allocating both children of a split together before
/// descending left, which matches the layout the tree builder produces.
fn from_repr<T: Scalar>(repr: NodeRepr<T>, id: usize, nodes: &mut Vec<Node<T>>, n_features: usize) -> Result<()> {
    match repr {
        NodeRepr::Leaf { leaf } => nodes[id] = Node::Leaf { value: leaf },
        NodeRepr::Split { feature, threshold, left, right } => {
            if feature >= n_features {
                return Err(Error::Parse(format!("split on feature {feature} but model has {n_features}")));
            }
            let l = nodes.len();
            nodes.push(Node::Leaf { value: T::zero() });
            nodes.push(Node::Leaf { value: T::zero() });
            nodes[id] = Node::Split { feature, threshold, left: l as u32, right: l as u32 + 1 };
            from_repr(*left, l, nodes, n_features)?;
            from_repr(*right, l + 1, nodes, n_features)?;
        }
    }
    Ok(())
}

impl<T: Scalar> GbdtModel<T> {
    pub fn to_json(&self) -> Result<String> {
        let repr = ModelRepr {
            target: self.target,
            base_prediction: self.base_prediction,
            learning_rate: self.learning_rate,
            n_estimators: self.n_estimators,
            max_depth: self.max_depth,
            n_features: self.n_features,
            validation_mae: self.validation_mae.is_finite().then_some(self.validation_mae),
            trees: self
                .trees
                .iter()
                .map(|t| TreeRepr { max_depth: t.max_depth, root: to_repr(&t.nodes, 0) })
                .collect(),
        };
        Ok(serde_json::to_string(&repr)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: ModelRepr<T> = serde_json::from_str(text)?;
        let mut trees = Vec::with_capacity(repr.trees.len());
        for t in repr.trees {
            let mut nodes = vec![Node::Leaf { value: T::zero() }];
            from_repr(t.root, 0, &mut nodes, repr.n_features)?;
            let tree = RegressionTree { nodes, max_depth: t.max_depth };
            if tree.depth() > tree.max_depth {
                return Err(Error::Parse("tree deeper than its recorded max_depth".into()));
            }
            trees.push(tree);
        }
        if trees.len() != repr.n_estimators {
            return Err(Error::Parse(format!(
                "n_estimators is {} but {} trees are present",
                repr.n_estimators,
                trees.len()
            )));
        }
        Ok(GbdtModel {
            target: repr.target,
            base_prediction: repr.base_prediction,
            learning_rate: repr.learning_rate,
            n_estimators: repr.n_estimators,
            max_depth: repr.max_depth,
            n_features: repr.n_features,
            validation_mae: repr.validation_mae.unwrap_or(f64::NAN),
            trees,
        })
    }
}

pub fn save_model<T: Scalar>(model: &GbdtModel<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model.to_json()?)?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<GbdtModel<T>> {
    GbdtModel::from_json(&fs::read_to_string(path)?)
}
