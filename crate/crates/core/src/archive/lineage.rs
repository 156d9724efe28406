use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The part of a node the lineage analytics look at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineageNode {
    pub id: String,
    pub parent: Option<String>,
    /// Display name, e.g. the algorithm name in the results fixture.
    pub label: String,
    pub overall: f64,
    /// Scalar utility after any constraint re-weighting.
    pub utility: f64,
    pub scores: Option<[f64; 6]>,
    pub mean_length: Option<f64>,
}

/// A forest of nodes in insertion order, parents always before children.
/// Archives built by the loop have a single root; fixtures may have several.
#[derive(Clone, Debug, Default)]
pub struct LineageTree {
    nodes: Vec<LineageNode>,
    index: HashMap<String, usize>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
}

impl LineageTree {
    pub fn new() -> Self {
        LineageTree::default()
    }

    pub fn from_nodes(nodes: impl IntoIterator<Item = LineageNode>) -> Result<Self> {
        let mut tree = LineageTree::new();
        for node in nodes {
            tree.insert(node)?;
        }
        Ok(tree)
    }

    pub fn insert(&mut self, node: LineageNode) -> Result<()> {
        if self.index.contains_key(&node.id) {
            return Err(Error::DuplicateNode(node.id));
        }
        let depth = match &node.parent {
            None => 0,
            Some(p) => {
                let &pi = self.index.get(p).ok_or_else(|| Error::DanglingParent {
                    node: node.id.clone(),
                    parent: p.clone(),
                })?;
                self.children[pi].push(self.nodes.len());
                self.depth[pi] + 1
            }
        };
        self.index.insert(node.id.clone(), self.nodes.len());
        self.nodes.push(node);
        self.children.push(Vec::new());
        self.depth.push(depth);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[LineageNode] {
        &self.nodes
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Result<&LineageNode> {
        self.position(id)
            .map(|i| &self.nodes[i])
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    /// Resolves a node by id, or failing that by case-insensitive label.
    pub fn resolve(&self, key: &str) -> Result<usize> {
        if let Some(i) = self.position(key) {
            return Ok(i);
        }
        self.nodes
            .iter()
            .position(|n| n.label.eq_ignore_ascii_case(key))
            .ok_or_else(|| Error::UnknownNode(key.to_string()))
    }

    pub fn depth_of(&self, i: usize) -> usize {
        self.depth[i]
    }

    pub fn children_of(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].parent.is_none())
            .collect()
    }

    /// Every strict descendant of `i` with its distance below `i`, in
    /// depth-first preorder.
    pub fn descendants(&self, i: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut stack: Vec<(usize, usize)> = self.children[i].iter().rev().map(|&c| (c, 1)).collect();
        while let Some((n, d)) = stack.pop() {
            out.push((n, d));
            stack.extend(self.children[n].iter().rev().map(|&c| (c, d + 1)));
        }
        out
    }

    pub fn subtree_size(&self, i: usize) -> usize {
        1 + self.descendants(i).len()
    }

    /// Indices on the path from the root down to `i`, inclusive.
    pub fn ancestry(&self, i: usize) -> Vec<usize> {
        let mut path = vec![i];
        let mut cur = i;
        while let Some(p) = &self.nodes[cur].parent {
            cur = self.index[p];
            path.push(cur);
        }
        path.reverse();
        path
    }

    /// The subtree rooted at `i` as a standalone tree.
    pub fn component(&self, i: usize) -> LineageTree {
        let mut keep = vec![i];
        keep.extend(self.descendants(i).into_iter().map(|(n, _)| n));
        keep.sort_unstable();
        let mut out = LineageTree::new();
        for (k, &n) in keep.iter().enumerate() {
            let mut node = self.nodes[n].clone();
            if k == 0 {
                node.parent = None;
            }
            out.insert(node).expect("subtree preserves parent order");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn node(id: &str, parent: Option<&str>, overall: f64) -> LineageNode {
        LineageNode {
            id: id.into(),
            parent: parent.map(Into::into),
            label: id.to_uppercase(),
            overall,
            utility: overall,
            scores: None,
            mean_length: None,
        }
    }

    #[test]
    fn depths_and_descendants() {
        let t = LineageTree::from_nodes([
            node("r", None, 1.0),
            node("a", Some("r"), 2.0),
            node("b", Some("r"), 3.0),
            node("c", Some("a"), 4.0),
        ])
        .unwrap();
        assert_eq!(t.depth_of(3), 2);
        assert_eq!(t.descendants(0), vec![(1, 1), (3, 2), (2, 1)]);
        assert_eq!(t.subtree_size(1), 2);
        assert_eq!(t.ancestry(3), vec![0, 1, 3]);
        assert_eq!(t.resolve("B").unwrap(), 2);
        let sub = t.component(1);
        assert_eq!(sub.len(), 2);
        assert_eq!(sub.roots(), vec![0]);
    }

    #[test]
    fn rejects_bad_links() {
        let mut t = LineageTree::new();
        t.insert(node("r", None, 0.0)).unwrap();
        assert!(matches!(t.insert(node("r", None, 0.0)), Err(Error::DuplicateNode(_))));
        assert!(matches!(
            t.insert(node("x", Some("missing"), 0.0)),
            Err(Error::DanglingParent { .. })
        ));
    }
}
