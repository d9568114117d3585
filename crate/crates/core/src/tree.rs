//! Hierarchical grouping of plant components. Leaves hold components; the
//! tree drives multilevel synthesis and localization.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterNode {
    pub name: String,
    pub children: Vec<usize>,
    /// Non-empty only for leaves.
    pub components: Vec<String>,
}

/// Nested description used to build trees and as the JSON wire form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<Shape>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<String>,
}

impl Shape {
    pub fn leaf<S: AsRef<str>>(components: &[S]) -> Shape {
        Shape { name: None, children: vec![], components: components.iter().map(|c| c.as_ref().to_string()).collect() }
    }

    pub fn node(children: Vec<Shape>) -> Shape {
        Shape { name: None, children, components: vec![] }
    }

    pub fn named(mut self, name: impl Into<String>) -> Shape {
        self.name = Some(name.into());
        self
    }
}

/// Nodes are stored in preorder; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterTree {
    nodes: Vec<ClusterNode>,
    parent: Vec<Option<usize>>,
}

impl ClusterTree {
    /// Unnamed nodes are called `Sup<i>` with `i` the 1-based preorder index.
    pub fn from_shape(shape: &Shape) -> Result<ClusterTree> {
        let mut nodes = Vec::new();
        let mut parent = Vec::new();
        fn walk(s: &Shape, up: Option<usize>, nodes: &mut Vec<ClusterNode>, parent: &mut Vec<Option<usize>>) -> Result<usize> {
            if !s.children.is_empty() && !s.components.is_empty() {
                return Err(Error::Partition("a node holds either children or components".into()));
            }
            if s.children.is_empty() && s.components.is_empty() {
                return Err(Error::Partition("leaf without components".into()));
            }
            let id = nodes.len();
            nodes.push(ClusterNode {
                name: s.name.clone().unwrap_or_else(|| format!("Sup{}", id + 1)),
                children: vec![],
                components: s.components.clone(),
            });
            parent.push(up);
            for c in &s.children {
                let cid = walk(c, Some(id), nodes, parent)?;
                nodes[id].children.push(cid);
            }
            Ok(id)
        }
        walk(shape, None, &mut nodes, &mut parent)?;
        let names: BTreeSet<&str> = nodes.iter().map(|n| n.name.as_str()).collect();
        if names.len() != nodes.len() {
            return Err(Error::Partition("duplicate node names".into()));
        }
        let tree = ClusterTree { nodes, parent };
        let mut seen = BTreeSet::new();
        for c in tree.nodes.iter().flat_map(|n| n.components.iter()) {
            if !seen.insert(c) {
                return Err(Error::Partition(format!("component `{c}` appears in two leaves")));
            }
        }
        Ok(tree)
    }

    /// A tree with a single leaf holding all components.
    pub fn single_leaf<S: AsRef<str>>(components: &[S]) -> ClusterTree {
        ClusterTree::from_shape(&Shape::leaf(components)).expect("non-empty leaf")
    }

    pub fn to_shape(&self) -> Shape {
        self.shape_of(0)
    }

    fn shape_of(&self, i: usize) -> Shape {
        let n = &self.nodes[i];
        Shape {
            name: Some(n.name.clone()),
            children: n.children.iter().map(|c| self.shape_of(*c)).collect(),
            components: n.components.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_shape()).expect("tree serializes")
    }

    pub fn from_json(text: &str) -> Result<ClusterTree> {
        ClusterTree::from_shape(&serde_json::from_str(text)?)
    }

    pub fn nodes(&self) -> &[ClusterNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &ClusterNode {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        self.nodes[i].children.is_empty()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.len()).filter(|i| self.is_leaf(*i)).collect()
    }

    /// All components in the subtree of `i`.
    pub fn components_under(&self, i: usize) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![i];
        while let Some(n) = stack.pop() {
            out.extend(self.nodes[n].components.iter().cloned());
            stack.extend(self.nodes[n].children.iter().copied());
        }
        out
    }

    pub fn all_components(&self) -> BTreeSet<String> {
        self.components_under(0)
    }

    /// Nodes of the subtree rooted at `i`, in preorder.
    pub fn subtree(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![i];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev().copied());
        }
        out
    }

    pub fn leaf_of(&self, component: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.components.iter().any(|c| c == component))
    }

    fn ancestors(&self, mut i: usize) -> Vec<usize> {
        let mut out = vec![i];
        while let Some(p) = self.parent[i] {
            out.push(p);
            i = p;
        }
        out
    }

    pub fn is_ancestor(&self, anc: usize, i: usize) -> bool {
        self.ancestors(i).contains(&anc)
    }

    /// Lowest node whose subtree contains every given component.
    pub fn lowest_cover<'a>(&self, components: impl IntoIterator<Item = &'a str>) -> Option<usize> {
        let mut best: Option<Vec<usize>> = None;
        for c in components {
            let path = self.ancestors(self.leaf_of(c)?);
            best = Some(match best {
                None => path,
                Some(prev) => path.into_iter().filter(|n| prev.contains(n)).collect(),
            });
        }
        best.and_then(|p| p.first().copied())
    }

    /// Checks that the leaves partition exactly `components`.
    pub fn validate<S: AsRef<str>>(&self, components: &[S]) -> Result<()> {
        let want: BTreeSet<&str> = components.iter().map(|c| c.as_ref()).collect();
        let have: BTreeSet<String> = self.all_components();
        for c in &have {
            if !want.contains(c.as_str()) {
                return Err(Error::Partition(format!("unknown component `{c}` in tree")));
            }
        }
        for c in want {
            if !have.contains(c) {
                return Err(Error::Partition(format!("component `{c}` is in no leaf")));
            }
        }
        Ok(())
    }

    /// Splits every multi-component leaf into one child leaf per component,
    /// so every component gets its own node. Nodes are renamed `Sup<i>` in
    /// preorder.
    pub fn with_component_leaves(&self) -> ClusterTree {
        fn expand(t: &ClusterTree, i: usize) -> Shape {
            let n = t.node(i);
            if n.children.is_empty() {
                if n.components.len() == 1 {
                    Shape::leaf(&n.components)
                } else {
                    Shape::node(n.components.iter().map(|c| Shape::leaf(&[c])).collect())
                }
            } else {
                Shape::node(n.children.iter().map(|c| expand(t, *c)).collect())
            }
        }
        ClusterTree::from_shape(&expand(self, 0)).expect("expansion keeps the partition")
    }

    /// Map from component to the name of its leaf.
    pub fn leaf_names(&self) -> BTreeMap<String, String> {
        self.nodes
            .iter()
            .flat_map(|n| n.components.iter().map(move |c| (c.clone(), n.name.clone())))
            .collect()
    }
}
