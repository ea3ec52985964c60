use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use super::{open, require_nonempty, CsvOut, DataError, Table};

/// Depth limit of Yelp-shaped category hierarchies.
pub const YELP_MAX_DEPTH: u32 = 4;

/// A rooted category forest. Depth is 1-based: roots have depth 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    parent: BTreeMap<String, Option<String>>,
    depth: BTreeMap<String, u32>,
    max_depth: u32,
}

/// Reads a `child,parent` edge list; roots have an empty parent.
///
/// With `yelp_mode`, forests deeper than [`YELP_MAX_DEPTH`] are rejected.
pub fn parse_taxonomy(path: impl AsRef<Path>, yelp_mode: bool) -> Result<Taxonomy, DataError> {
    Taxonomy::from_reader(open(path.as_ref())?, yelp_mode)
}

impl Taxonomy {
    pub fn from_reader<R: Read>(source: R, yelp_mode: bool) -> Result<Self, DataError> {
        let rows = Table::new(source, &["child", "parent"])?.rows()?;
        let edges = rows
            .into_iter()
            .map(|row| {
                let [child, parent] = <[String; 2]>::try_from(row.fields).unwrap();
                (child, (!parent.is_empty()).then_some(parent), row.line)
            })
            .collect();
        Self::build(edges, yelp_mode)
    }

    /// Builds from `(child, parent)` edges; line numbers count the first edge as 2.
    pub fn from_edges<I, S>(edges: I, yelp_mode: bool) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = (S, Option<S>)>,
        S: Into<String>,
    {
        Self::build(
            edges
                .into_iter()
                .enumerate()
                .map(|(i, (c, p))| (c.into(), p.map(Into::into), i + 2))
                .collect(),
            yelp_mode,
        )
    }

    fn build(edges: Vec<(String, Option<String>, usize)>, yelp_mode: bool) -> Result<Self, DataError> {
        let mut parent = BTreeMap::new();
        let mut line_of = BTreeMap::new();
        for (child, par, line) in &edges {
            require_nonempty(child, "child", *line)?;
            if parent.insert(child.clone(), par.clone()).is_some() {
                return Err(DataError::DuplicateKey {
                    key: child.clone(),
                    line: *line,
                });
            }
            line_of.insert(child.clone(), *line);
        }
        for (child, par, line) in &edges {
            if let Some(p) = par {
                if !parent.contains_key(p) {
                    return Err(DataError::UnknownParent {
                        parent: p.clone(),
                        line: *line,
                    });
                }
                if p == child {
                    return Err(DataError::CycleDetected {
                        node: child.clone(),
                        line: *line,
                    });
                }
            }
        }

        let mut depth: BTreeMap<String, u32> = BTreeMap::new();
        // Walk each node up to a root or an already-resolved ancestor.
        for (child, _, line) in &edges {
            if depth.contains_key(child) {
                continue;
            }
            let mut chain = vec![child.as_str()];
            let mut on_chain: BTreeSet<&str> = BTreeSet::from([child.as_str()]);
            let mut base = 0;
            let mut cur = child.as_str();
            while let Some(Some(p)) = parent.get(cur) {
                if let Some(&d) = depth.get(p) {
                    base = d;
                    break;
                }
                if !on_chain.insert(p.as_str()) {
                    return Err(DataError::CycleDetected {
                        node: p.clone(),
                        line: *line,
                    });
                }
                chain.push(p.as_str());
                cur = p.as_str();
            }
            for (i, node) in chain.iter().rev().enumerate() {
                depth.insert(node.to_string(), base + i as u32 + 1);
            }
        }

        let max_depth = depth.values().copied().max().unwrap_or(0);
        if yelp_mode && max_depth > YELP_MAX_DEPTH {
            let (node, d) = depth
                .iter()
                .filter(|(_, &d)| d > YELP_MAX_DEPTH)
                .min_by_key(|(n, _)| line_of[*n])
                .map(|(n, d)| (n.clone(), *d))
                .unwrap();
            return Err(DataError::DepthExceeded {
                line: line_of[&node],
                node,
                depth: d,
                limit: YELP_MAX_DEPTH,
            });
        }
        Ok(Taxonomy {
            parent,
            depth,
            max_depth,
        })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.parent.contains_key(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.parent.keys().map(String::as_str)
    }

    pub fn parent(&self, id: &str) -> Option<&str> {
        self.parent.get(id).and_then(|p| p.as_deref())
    }

    /// 1-based depth of a node.
    pub fn depth(&self, id: &str) -> Option<u32> {
        self.depth.get(id).copied()
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    /// The ancestor of `id` at depth `level` (or `id` itself if it is shallower).
    pub fn ancestor_at(&self, id: &str, level: u32) -> Option<&str> {
        let mut cur = self.parent.get_key_value(id)?.0.as_str();
        while self.depth(cur)? > level.max(1) {
            cur = self.parent(cur)?;
        }
        Some(cur)
    }

    pub fn to_csv(&self) -> String {
        let mut out = CsvOut::new(&["child", "parent"]);
        for (child, parent) in &self.parent {
            out.row([child.as_str(), parent.as_deref().unwrap_or("")]);
        }
        out.finish()
    }
}
