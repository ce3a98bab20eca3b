//! Rooted cluster trees over variable indices and their navigation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A set of cluster ids drawn from a fixed universe `0..universe`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClusterSet {
    mask: Vec<bool>,
    len: usize,
}

impl ClusterSet {
    pub fn empty(universe: usize) -> Self {
        ClusterSet { mask: vec![false; universe], len: 0 }
    }

    pub fn full(universe: usize) -> Self {
        ClusterSet { mask: vec![true; universe], len: universe }
    }

    pub fn from_ids(universe: usize, ids: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut set = Self::empty(universe);
        for id in ids {
            if id >= universe {
                return Err(Error::UnknownNode(id));
            }
            set.insert(id);
        }
        Ok(set)
    }

    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, id: usize) -> bool {
        self.mask.get(id).copied().unwrap_or(false)
    }

    /// Returns true when `id` was not yet present.
    ///
    /// # Panics
    /// If `id` lies outside the universe.
    pub fn insert(&mut self, id: usize) -> bool {
        let slot = &mut self.mask[id];
        let added = !*slot;
        *slot = true;
        self.len += added as usize;
        added
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter_map(|(i, &on)| on.then_some(i))
    }

    pub fn is_subset(&self, other: &ClusterSet) -> bool {
        self.iter().all(|id| other.contains(id))
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterNode {
    pub id: usize,
    /// Sorted variable indices.
    pub members: Vec<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub height: f64,
}

/// A dendrogram over variables `0..p`.
///
/// Node ids index into the node list. Leaves are singletons, every internal
/// node has at least two children whose member sets partition its own, and
/// heights never decrease toward the root.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterHierarchy {
    nodes: Vec<ClusterNode>,
    root: usize,
    leaf_of: Vec<usize>,
    postorder: Vec<usize>,
}

impl ClusterHierarchy {
    /// Validates a node list and builds the hierarchy.
    pub fn from_nodes(nodes: Vec<ClusterNode>) -> Result<Self> {
        let invalid = |msg: String| Error::InvalidHierarchy(msg);
        if nodes.is_empty() {
            return Err(invalid("no nodes".into()));
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i {
                return Err(invalid(format!("node at position {i} has id {}", node.id)));
            }
            if node.members.is_empty() {
                return Err(invalid(format!("node {i} has no members")));
            }
            if node.members.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid(format!("members of node {i} are not sorted and unique")));
            }
            if !node.height.is_finite() || node.height < 0.0 {
                return Err(invalid(format!("node {i} has invalid height {}", node.height)));
            }
        }
        let roots: Vec<usize> = nodes.iter().filter(|n| n.parent.is_none()).map(|n| n.id).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            _ => return Err(invalid(format!("expected exactly one root, found {}", roots.len()))),
        };
        let p = nodes[root].members.len();
        if nodes[root].members.iter().enumerate().any(|(i, &m)| i != m) {
            return Err(invalid("root members must be 0..p".into()));
        }

        let mut seen_as_child = vec![false; nodes.len()];
        for node in &nodes {
            if let Some(parent) = node.parent {
                let pnode = nodes.get(parent).ok_or_else(|| invalid(format!("node {} has unknown parent {parent}", node.id)))?;
                if !pnode.children.contains(&node.id) {
                    return Err(invalid(format!("node {} missing from children of {parent}", node.id)));
                }
            }
            if node.children.is_empty() {
                if node.members.len() != 1 {
                    return Err(invalid(format!("leaf {} is not a singleton", node.id)));
                }
                if node.height != 0.0 {
                    return Err(invalid(format!("leaf {} has nonzero height", node.id)));
                }
                continue;
            }
            if node.children.len() < 2 {
                return Err(invalid(format!("internal node {} has a single child", node.id)));
            }
            let mut union = Vec::with_capacity(node.members.len());
            for &c in &node.children {
                let child = nodes.get(c).ok_or_else(|| invalid(format!("unknown child {c}")))?;
                if child.parent != Some(node.id) || seen_as_child[c] {
                    return Err(invalid(format!("child {c} of node {} has inconsistent parent", node.id)));
                }
                seen_as_child[c] = true;
                if child.height > node.height {
                    return Err(invalid(format!("child {c} is higher than its parent {}", node.id)));
                }
                union.extend_from_slice(&child.members);
            }
            union.sort_unstable();
            if union != node.members {
                return Err(invalid(format!("children of node {} do not partition it", node.id)));
            }
        }

        let mut postorder = Vec::with_capacity(nodes.len());
        let mut stack = vec![(root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                postorder.push(id);
            } else {
                stack.push((id, true));
                for &c in nodes[id].children.iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        if postorder.len() != nodes.len() {
            return Err(invalid("some nodes are unreachable from the root".into()));
        }

        let mut leaf_of = vec![usize::MAX; p];
        for node in nodes.iter().filter(|n| n.children.is_empty()) {
            leaf_of[node.members[0]] = node.id;
        }
        Ok(ClusterHierarchy { nodes, root, leaf_of, postorder })
    }

    /// Builds a binary tree from a merge list. Leaves get ids `0..p`, merge
    /// `k` creates node `p + k` joining two existing nodes at `height`.
    pub fn from_merges(p: usize, merges: &[(usize, usize, f64)]) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidHierarchy("no variables".into()));
        }
        if merges.len() + 1 != p {
            return Err(Error::InvalidHierarchy(format!("{} merges for {p} leaves", merges.len())));
        }
        let mut nodes: Vec<ClusterNode> = (0..p)
            .map(|j| ClusterNode { id: j, members: vec![j], parent: None, children: vec![], height: 0.0 })
            .collect();
        for (k, &(a, b, height)) in merges.iter().enumerate() {
            let id = p + k;
            for c in [a, b] {
                match nodes.get(c) {
                    Some(n) if n.parent.is_none() && a != b => {}
                    _ => return Err(Error::InvalidHierarchy(format!("merge {k} uses invalid node {c}"))),
                }
            }
            let mut members = [nodes[a].members.as_slice(), nodes[b].members.as_slice()].concat();
            members.sort_unstable();
            nodes[a].parent = Some(id);
            nodes[b].parent = Some(id);
            nodes.push(ClusterNode { id, members, parent: None, children: vec![a, b], height });
        }
        Self::from_nodes(nodes)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of variables.
    pub fn n_variables(&self) -> usize {
        self.leaf_of.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn nodes(&self) -> &[ClusterNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> Result<&ClusterNode> {
        self.nodes.get(id).ok_or(Error::UnknownNode(id))
    }

    pub fn members(&self, id: usize) -> Result<&[usize]> {
        Ok(&self.node(id)?.members)
    }

    pub fn parent(&self, id: usize) -> Result<Option<usize>> {
        Ok(self.node(id)?.parent)
    }

    pub fn children(&self, id: usize) -> Result<&[usize]> {
        Ok(&self.node(id)?.children)
    }

    pub fn is_leaf(&self, id: usize) -> Result<bool> {
        Ok(self.node(id)?.children.is_empty())
    }

    /// Leaf node holding variable `j`.
    pub fn leaf_of(&self, j: usize) -> Option<usize> {
        self.leaf_of.get(j).copied()
    }

    /// True when every internal node has exactly two children.
    pub fn is_binary(&self) -> bool {
        self.nodes.iter().all(|n| n.children.is_empty() || n.children.len() == 2)
    }

    /// Node ids, children before parents.
    pub fn postorder(&self) -> &[usize] {
        &self.postorder
    }

    /// Strict ancestors ordered from the parent up to the root.
    pub fn ancestors(&self, id: usize) -> Result<Vec<usize>> {
        Ok(self.ancestor_iter(id)?.collect())
    }

    pub fn ancestor_iter(&self, id: usize) -> Result<impl Iterator<Item = usize> + '_> {
        let start = self.node(id)?.parent;
        Ok(std::iter::successors(start, move |&a| self.nodes[a].parent))
    }

    /// All strict descendants, sorted by id.
    pub fn offspring(&self, id: usize) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.node(id)?.children.clone();
        while let Some(c) = stack.pop() {
            out.push(c);
            stack.extend_from_slice(&self.nodes[c].children);
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Other children of the parent.
    pub fn siblings(&self, id: usize) -> Result<Vec<usize>> {
        let parent = self.node(id)?.parent.ok_or(Error::RootHasNoParent(id))?;
        Ok(self.nodes[parent].children.iter().copied().filter(|&c| c != id).collect())
    }

    /// Rejected nodes whose whole subtree is rejected.
    pub fn extinct_branches(&self, rejected: &ClusterSet) -> ClusterSet {
        let mut extinct = ClusterSet::empty(self.len());
        for &id in &self.postorder {
            let node = &self.nodes[id];
            if rejected.contains(id) && node.children.iter().all(|&c| extinct.contains(c)) {
                extinct.insert(id);
            }
        }
        extinct
    }

    /// Checks that every rejected non-root node has a rejected parent.
    pub fn check_ancestor_closed(&self, rejected: &ClusterSet) -> Result<()> {
        for id in rejected.iter() {
            let node = self.node(id)?;
            if let Some(parent) = node.parent {
                if !rejected.contains(parent) {
                    return Err(Error::NotAncestorClosed(id));
                }
            }
        }
        Ok(())
    }

    /// Nested JSON: `{id, members, height, children: [...]}` from the root down.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.nested(self.root)).expect("nested tree serializes")
    }

    fn nested(&self, id: usize) -> NestedNode {
        let node = &self.nodes[id];
        NestedNode {
            id: Some(id),
            members: node.members.clone(),
            height: node.height,
            children: node.children.iter().map(|&c| self.nested(c)).collect(),
        }
    }

    /// Reads the nested JSON layout. Ids are kept when every node carries one;
    /// otherwise leaves get their variable index and internal nodes are
    /// numbered from `p` in post-order.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let root: NestedNode = serde_json::from_value(value.clone())?;
        let mut flat = Vec::new();
        flatten(&root, &mut flat);
        let all_ids = flat.iter().all(|(n, _, _)| n.id.is_some());
        let p = root.members.len();
        let mut assigned = vec![0usize; flat.len()];
        if all_ids {
            for (k, (n, _, _)) in flat.iter().enumerate() {
                assigned[k] = n.id.unwrap();
            }
        } else {
            let mut next = p;
            // `flat` is in post-order, so internal ids follow merge order.
            for (k, (n, _, _)) in flat.iter().enumerate() {
                if n.children.is_empty() {
                    assigned[k] = n.members[0];
                } else {
                    assigned[k] = next;
                    next += 1;
                }
            }
        }
        let count = flat.len();
        let mut slots: Vec<Option<ClusterNode>> = vec![None; count];
        for (k, (n, parent_k, child_ks)) in flat.iter().enumerate() {
            let id = assigned[k];
            if id >= count || slots[id].is_some() {
                return Err(Error::InvalidHierarchy(format!("duplicate or out-of-range id {id}")));
            }
            slots[id] = Some(ClusterNode {
                id,
                members: n.members.clone(),
                parent: parent_k.map(|pk| assigned[pk]),
                children: child_ks.iter().map(|&ck| assigned[ck]).collect(),
                height: n.height,
            });
        }
        Self::from_nodes(slots.into_iter().map(Option::unwrap).collect())
    }

    /// Newick string with branch lengths equal to height differences.
    /// Leaves are labelled by `labels[j]` or by the variable index.
    pub fn to_newick(&self, labels: Option<&[String]>) -> String {
        let mut out = String::new();
        self.write_newick(self.root, labels, &mut out);
        out.push(';');
        out
    }

    fn write_newick(&self, id: usize, labels: Option<&[String]>, out: &mut String) {
        let node = &self.nodes[id];
        if node.children.is_empty() {
            let j = node.members[0];
            let label = labels.map(|l| l[j].clone()).unwrap_or_else(|| j.to_string());
            out.push_str(&quote_label(&label));
        } else {
            out.push('(');
            for (k, &c) in node.children.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                self.write_newick(c, labels, out);
            }
            out.push(')');
        }
        if let Some(parent) = node.parent {
            out.push(':');
            out.push_str(&format!("{}", self.nodes[parent].height - node.height));
        }
    }

    /// Parses a Newick string produced by [`to_newick`](Self::to_newick).
    /// Leaf labels are resolved through `labels`, or parsed as variable
    /// indices when `labels` is `None`. Heights are rebuilt from branch
    /// lengths with leaves at zero.
    pub fn from_newick(text: &str, labels: Option<&[String]>) -> Result<Self> {
        let mut parser = NewickParser { chars: text.trim().chars().collect(), pos: 0 };
        let tree = parser.subtree()?;
        parser.skip_ws();
        if parser.next() != Some(';') {
            return Err(Error::Parse("newick: expected ';'".into()));
        }
        let resolve = |label: &str| -> Result<usize> {
            match labels {
                Some(ls) => ls
                    .iter()
                    .position(|l| l == label)
                    .ok_or_else(|| Error::Parse(format!("newick: unknown label {label}"))),
                None => label.parse().map_err(|_| Error::Parse(format!("newick: bad leaf index {label}"))),
            }
        };
        let nested = tree.into_nested(&resolve)?;
        let mut value = serde_json::to_value(nested)?;
        strip_ids(&mut value);
        Self::from_json(&value)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NestedNode {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<usize>,
    members: Vec<usize>,
    height: f64,
    #[serde(default)]
    children: Vec<NestedNode>,
}

type FlatNode<'a> = (&'a NestedNode, Option<usize>, Vec<usize>);

/// Post-order flattening into (node, parent slot, child slots).
fn flatten<'a>(node: &'a NestedNode, out: &mut Vec<FlatNode<'a>>) -> usize {
    let child_slots: Vec<usize> = node.children.iter().map(|c| flatten(c, out)).collect();
    let slot = out.len();
    for &c in &child_slots {
        out[c].1 = Some(slot);
    }
    out.push((node, None, child_slots));
    slot
}

fn strip_ids(value: &mut serde_json::Value) {
    if let Some(obj) = value.as_object_mut() {
        obj.remove("id");
        if let Some(children) = obj.get_mut("children").and_then(|c| c.as_array_mut()) {
            children.iter_mut().for_each(strip_ids);
        }
    }
}

fn quote_label(label: &str) -> String {
    let special = |c: char| c.is_whitespace() || "()[]':;,".contains(c);
    if label.is_empty() || label.chars().any(special) {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}

struct ParsedNewick {
    label: Option<String>,
    length: Option<f64>,
    children: Vec<ParsedNewick>,
}

impl ParsedNewick {
    fn into_nested(self, resolve: &dyn Fn(&str) -> Result<usize>) -> Result<NestedNode> {
        if self.children.is_empty() {
            let label = self.label.ok_or_else(|| Error::Parse("newick: unlabelled leaf".into()))?;
            return Ok(NestedNode { id: None, members: vec![resolve(&label)?], height: 0.0, children: vec![] });
        }
        let mut children = Vec::with_capacity(self.children.len());
        let mut height: f64 = 0.0;
        for child in self.children {
            let length = child.length.ok_or_else(|| Error::Parse("newick: missing branch length".into()))?;
            let nested = child.into_nested(resolve)?;
            height = height.max(nested.height + length);
            children.push(nested);
        }
        let mut members: Vec<usize> = children.iter().flat_map(|c| c.members.iter().copied()).collect();
        members.sort_unstable();
        Ok(NestedNode { id: None, members, height, children })
    }
}

struct NewickParser {
    chars: Vec<char>,
    pos: usize,
}

impl NewickParser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<char> {
        let c = self.peek();
        self.pos += 1;
        c
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn subtree(&mut self) -> Result<ParsedNewick> {
        self.skip_ws();
        let mut children = Vec::new();
        if self.peek() == Some('(') {
            self.pos += 1;
            loop {
                children.push(self.subtree()?);
                self.skip_ws();
                match self.next() {
                    Some(',') => continue,
                    Some(')') => break,
                    _ => return Err(Error::Parse(format!("newick: unexpected token at {}", self.pos))),
                }
            }
        }
        self.skip_ws();
        let label = self.label()?;
        self.skip_ws();
        let mut length = None;
        if self.peek() == Some(':') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.peek().is_some_and(|c| !"(),;:".contains(c) && !c.is_whitespace()) {
                self.pos += 1;
            }
            let text: String = self.chars[start..self.pos].iter().collect();
            length = Some(text.parse().map_err(|_| Error::Parse(format!("newick: bad branch length {text}")))?);
        }
        Ok(ParsedNewick { label, length, children })
    }

    fn label(&mut self) -> Result<Option<String>> {
        if self.peek() == Some('\'') {
            self.pos += 1;
            let mut out = String::new();
            loop {
                match self.next() {
                    Some('\'') if self.peek() == Some('\'') => {
                        self.pos += 1;
                        out.push('\'');
                    }
                    Some('\'') => return Ok(Some(out)),
                    Some(c) => out.push(c),
                    None => return Err(Error::Parse("newick: unterminated quoted label".into())),
                }
            }
        }
        let start = self.pos;
        while self.peek().is_some_and(|c| !"(),;:".contains(c) && !c.is_whitespace()) {
            self.pos += 1;
        }
        Ok((self.pos > start).then(|| self.chars[start..self.pos].iter().collect()))
    }
}
