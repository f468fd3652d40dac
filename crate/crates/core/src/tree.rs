//! Finite-depth measured dyadic trees.
//!
//! A [`DyadicTree`] is the discrete space the whole crate works on: a single
//! root cube of measure 1, each cube split into at most `B` children whose
//! measures add up exactly to the parent's, down to a uniform leaf depth `N`.
//! Points are identified with leaf cells, so every function handled here is
//! piecewise constant at depth `N`. That identification is the cornerstone of
//! the crate: each kernel integral with the tree metric `δ` becomes an exact
//! finite sum over cell pairs (the integrand vanishes whenever both arguments
//! share a leaf cell), so none of the "quadrature" below is approximate.
//!
//! The tree metric is `δ(x, y) = μ(smallest cube containing both)`, with
//! `δ(x, x) = 0`. It is an ultrametric: `δ(x, z) ≤ max(δ(x, y), δ(y, z))`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

static NEXT_TREE_ID: AtomicU64 = AtomicU64::new(1);

/// Index of a cube in its tree (scale-major, address-lexicographic order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CubeId(pub(crate) usize);

impl CubeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A point of the space: a leaf cell at depth `N`, tagged with its tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Point {
    pub(crate) tree: u64,
    pub(crate) leaf: usize,
}

impl Point {
    /// Ordinal of the leaf cell among all leaves, in address order.
    pub fn leaf_index(self) -> usize {
        self.leaf
    }
}

/// Construction limits; the offspring bound is the uniform constant `B`.
#[derive(Debug, Clone, Copy)]
pub struct TreeLimits {
    pub max_leaves: usize,
    pub offspring_bound: usize,
}

impl Default for TreeLimits {
    fn default() -> Self {
        Self {
            max_leaves: 1 << 24,
            offspring_bound: 8,
        }
    }
}

/// Relative tolerance for "children sum exactly to the parent".
pub const MEASURE_SUM_TOLERANCE: f64 = 1e-14;

/// On-disk description of a tree: either uniform or an explicit nesting.
///
/// JSON forms: `{"uniform":{"b":3,"N":8}}` or nested
/// `{"measure":1.0,"children":[{"measure":0.5},{"measure":0.5}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeSpec {
    Uniform { uniform: UniformSpec },
    Explicit(TreeSpecNode),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniformSpec {
    pub b: usize,
    #[serde(rename = "N")]
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeSpecNode {
    pub measure: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TreeSpecNode>,
}

/// The measured cube hierarchy. Immutable after construction; all methods are
/// pure reads, so a tree can be shared freely across parallel workers.
#[derive(Debug)]
pub struct DyadicTree {
    id: u64,
    depth: usize,
    offspring_bound: usize,
    max_child_count: usize,
    /// `Some(b)` when every cube has exactly `b` equal-measure children.
    uniform_branching: Option<usize>,
    /// `scale_start[j]..scale_start[j+1]` are the cube indices at scale `j`.
    scale_start: Vec<usize>,
    parent: Vec<usize>,
    first_child: Vec<usize>,
    child_count: Vec<u32>,
    /// Position of each cube among its siblings (root: 0).
    digit: Vec<u32>,
    measure: Vec<f64>,
    /// Contiguous range of leaf ordinals below each cube.
    leaf_start: Vec<usize>,
    leaf_end: Vec<usize>,
}

impl DyadicTree {
    /// Equal-measure splitting into `b` children per cube: `μ(Q) = b^{-j}`.
    pub fn uniform(branching: usize, depth: usize) -> Result<Arc<Self>> {
        Self::uniform_with_limits(branching, depth, &TreeLimits::default())
    }

    pub fn uniform_with_limits(
        branching: usize,
        depth: usize,
        limits: &TreeLimits,
    ) -> Result<Arc<Self>> {
        if branching < 2 {
            return Err(Error::BranchingTooSmall(branching));
        }
        if depth < 1 {
            return Err(Error::DepthTooSmall(depth));
        }
        if branching > limits.offspring_bound {
            return Err(Error::OffspringBound {
                address: String::new(),
                count: branching,
                bound: limits.offspring_bound,
            });
        }
        let leaves = branching.checked_pow(depth as u32).unwrap_or(usize::MAX);
        if leaves > limits.max_leaves {
            return Err(Error::ResourceLimit {
                leaves,
                limit: limits.max_leaves,
            });
        }

        let mut scale_start = Vec::with_capacity(depth + 2);
        let mut count = 0usize;
        let mut width = 1usize;
        for _ in 0..=depth {
            scale_start.push(count);
            count += width;
            width *= branching;
        }
        scale_start.push(count);

        let total = count;
        let mut parent = vec![0usize; total];
        let mut first_child = vec![usize::MAX; total];
        let mut child_count = vec![0u32; total];
        let mut digit = vec![0u32; total];
        let mut measure = vec![0.0f64; total];

        // μ at scale j evaluated as 1 / b^j with the power computed exactly,
        // instead of repeated division, so deep scales carry no drift.
        for j in 0..=depth {
            let mu = 1.0 / (branching as f64).powi(j as i32);
            for idx in scale_start[j]..scale_start[j + 1] {
                measure[idx] = mu;
                let pos = idx - scale_start[j];
                if j > 0 {
                    parent[idx] = scale_start[j - 1] + pos / branching;
                    digit[idx] = (pos % branching) as u32;
                }
                if j < depth {
                    first_child[idx] = scale_start[j + 1] + pos * branching;
                    child_count[idx] = branching as u32;
                }
            }
        }

        let mut tree = Self {
            id: NEXT_TREE_ID.fetch_add(1, Ordering::Relaxed),
            depth,
            offspring_bound: limits.offspring_bound,
            max_child_count: branching,
            uniform_branching: Some(branching),
            scale_start,
            parent,
            first_child,
            child_count,
            digit,
            measure,
            leaf_start: Vec::new(),
            leaf_end: Vec::new(),
        };
        tree.fill_leaf_ranges();
        tree.validate()?;
        Ok(Arc::new(tree))
    }

    /// Build from an explicit nesting. Leaves shallower than the deepest one
    /// are padded with single-child chains (allowed: a cube may have one
    /// child), so the finished tree has one uniform leaf depth.
    pub fn from_spec_node(spec: &TreeSpecNode) -> Result<Arc<Self>> {
        Self::from_spec_node_with_limits(spec, &TreeLimits::default())
    }

    pub fn from_spec_node_with_limits(
        spec: &TreeSpecNode,
        limits: &TreeLimits,
    ) -> Result<Arc<Self>> {
        if (spec.measure - 1.0).abs() > 1e-12 {
            return Err(Error::RootMeasure(spec.measure));
        }
        let depth = spec_depth(spec);
        if depth < 1 {
            return Err(Error::DepthTooSmall(depth));
        }
        let leaves = spec_leaf_count(spec);
        if leaves > limits.max_leaves {
            return Err(Error::ResourceLimit {
                leaves,
                limit: limits.max_leaves,
            });
        }

        // Breadth-first construction; `pending` holds the nodes of one scale.
        // `None` spec marks a padding chain that carries its measure down.
        struct Slot<'a> {
            spec: Option<&'a TreeSpecNode>,
            measure: f64,
            parent: usize,
            digit: u32,
        }

        let mut parent = Vec::new();
        let mut first_child = Vec::new();
        let mut child_count = Vec::new();
        let mut digit = Vec::new();
        let mut measure = Vec::new();
        let mut scale_start = Vec::new();

        let mut pending = vec![Slot {
            spec: Some(spec),
            measure: spec.measure,
            parent: 0,
            digit: 0,
        }];
        for scale in 0..=depth {
            scale_start.push(measure.len());
            let mut next = Vec::new();
            for slot in pending {
                let idx = measure.len();
                parent.push(slot.parent);
                digit.push(slot.digit);
                measure.push(slot.measure);
                first_child.push(usize::MAX);
                child_count.push(0u32);

                if slot.measure <= 0.0 || slot.measure.is_nan() {
                    return Err(Error::NonpositiveMeasure {
                        address: address_of(&parent, &digit, idx),
                        value: slot.measure,
                    });
                }
                if scale == depth {
                    continue;
                }

                let children = slot.spec.map(|s| s.children.as_slice()).unwrap_or(&[]);
                if children.is_empty() {
                    // Pad with a single child of the same measure.
                    child_count[idx] = 1;
                    next.push(Slot {
                        spec: None,
                        measure: slot.measure,
                        parent: idx,
                        digit: 0,
                    });
                } else {
                    if children.len() > limits.offspring_bound {
                        return Err(Error::OffspringBound {
                            address: address_of(&parent, &digit, idx),
                            count: children.len(),
                            bound: limits.offspring_bound,
                        });
                    }
                    let sum: f64 = children
                        .iter()
                        .map(|c| c.measure)
                        .collect::<CompensatedSum>()
                        .value();
                    if (sum - slot.measure).abs() > MEASURE_SUM_TOLERANCE * slot.measure {
                        return Err(Error::MeasureMismatch {
                            address: address_of(&parent, &digit, idx),
                            children_sum: sum,
                            expected: slot.measure,
                        });
                    }
                    child_count[idx] = children.len() as u32;
                    for (k, child) in children.iter().enumerate() {
                        next.push(Slot {
                            spec: Some(child),
                            measure: child.measure,
                            parent: idx,
                            digit: k as u32,
                        });
                    }
                }
            }
            pending = next;
        }
        scale_start.push(measure.len());

        // Children were appended level by level in parent order, so each
        // cube's children are contiguous; recover first_child positions.
        for j in (0..depth).rev() {
            let mut cursor = scale_start[j + 1];
            for idx in scale_start[j]..scale_start[j + 1] {
                if child_count[idx] > 0 {
                    first_child[idx] = cursor;
                    cursor += child_count[idx] as usize;
                } else {
                    first_child[idx] = usize::MAX;
                }
            }
        }

        let max_child_count = child_count.iter().map(|&c| c as usize).max().unwrap_or(0);
        let uniform = detect_uniform(&child_count, &measure, &scale_start, depth);
        let mut tree = Self {
            id: NEXT_TREE_ID.fetch_add(1, Ordering::Relaxed),
            depth,
            offspring_bound: limits.offspring_bound,
            max_child_count,
            uniform_branching: uniform,
            scale_start,
            parent,
            first_child,
            child_count,
            digit,
            measure,
            leaf_start: Vec::new(),
            leaf_end: Vec::new(),
        };
        tree.fill_leaf_ranges();
        tree.validate()?;
        Ok(Arc::new(tree))
    }

    pub fn from_spec(spec: &TreeSpec) -> Result<Arc<Self>> {
        Self::from_spec_with_limits(spec, &TreeLimits::default())
    }

    pub fn from_spec_with_limits(spec: &TreeSpec, limits: &TreeLimits) -> Result<Arc<Self>> {
        match spec {
            TreeSpec::Uniform { uniform } => Self::uniform_with_limits(uniform.b, uniform.n, limits),
            TreeSpec::Explicit(node) => Self::from_spec_node_with_limits(node, limits),
        }
    }

    fn fill_leaf_ranges(&mut self) {
        let total = self.measure.len();
        self.leaf_start = vec![0; total];
        self.leaf_end = vec![0; total];
        let first_leaf = self.scale_start[self.depth];
        for idx in (0..total).rev() {
            if self.child_count[idx] == 0 {
                self.leaf_start[idx] = idx - first_leaf;
                self.leaf_end[idx] = idx - first_leaf + 1;
            } else {
                let fc = self.first_child[idx];
                let lc = fc + self.child_count[idx] as usize - 1;
                self.leaf_start[idx] = self.leaf_start[fc];
                self.leaf_end[idx] = self.leaf_end[lc];
            }
        }
    }

    /// Re-check every structural invariant (measure additivity, offspring
    /// bounds, positivity, unit root mass).
    pub fn validate(&self) -> Result<()> {
        let root_mu = self.measure[0];
        if (root_mu - 1.0).abs() > 1e-12 {
            return Err(Error::RootMeasure(root_mu));
        }
        for idx in 0..self.cube_count() {
            let mu = self.measure[idx];
            if mu <= 0.0 || mu.is_nan() {
                return Err(Error::NonpositiveMeasure {
                    address: address_of(&self.parent, &self.digit, idx),
                    value: mu,
                });
            }
            let count = self.child_count[idx] as usize;
            if count == 0 {
                continue;
            }
            if count > self.offspring_bound {
                return Err(Error::OffspringBound {
                    address: address_of(&self.parent, &self.digit, idx),
                    count,
                    bound: self.offspring_bound,
                });
            }
            let fc = self.first_child[idx];
            let sum: f64 = self.measure[fc..fc + count]
                .iter()
                .copied()
                .collect::<CompensatedSum>()
                .value();
            if (sum - mu).abs() > MEASURE_SUM_TOLERANCE * mu {
                return Err(Error::MeasureMismatch {
                    address: address_of(&self.parent, &self.digit, idx),
                    children_sum: sum,
                    expected: mu,
                });
            }
        }
        Ok(())
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Leaf depth `N`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn offspring_bound(&self) -> usize {
        self.offspring_bound
    }

    /// `Some(b)` when the tree is the uniform equal-split tree.
    pub fn uniform_branching(&self) -> Option<usize> {
        self.uniform_branching
    }

    pub fn cube_count(&self) -> usize {
        self.measure.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.scale_start[self.depth + 1] - self.scale_start[self.depth]
    }

    pub fn root(&self) -> CubeId {
        CubeId(0)
    }

    pub fn cubes(&self) -> impl Iterator<Item = CubeId> {
        (0..self.cube_count()).map(CubeId)
    }

    pub fn cubes_at_scale(&self, scale: usize) -> impl Iterator<Item = CubeId> {
        debug_assert!(scale <= self.depth);
        (self.scale_start[scale]..self.scale_start[scale + 1]).map(CubeId)
    }

    pub fn scale_of(&self, cube: CubeId) -> usize {
        self.scale_start.partition_point(|&s| s <= cube.0) - 1
    }

    pub fn measure(&self, cube: CubeId) -> f64 {
        self.measure[cube.0]
    }

    pub fn child_count(&self, cube: CubeId) -> usize {
        self.child_count[cube.0] as usize
    }

    pub fn children(&self, cube: CubeId) -> impl Iterator<Item = CubeId> {
        let fc = self.first_child[cube.0];
        let count = self.child_count[cube.0] as usize;
        (0..count).map(move |k| CubeId(fc + k))
    }

    pub fn child(&self, cube: CubeId, k: usize) -> CubeId {
        debug_assert!(k < self.child_count(cube));
        CubeId(self.first_child[cube.0] + k)
    }

    pub fn parent(&self, cube: CubeId) -> Option<CubeId> {
        (cube.0 != 0).then(|| CubeId(self.parent[cube.0]))
    }

    /// Position of the cube among its siblings.
    pub fn digit(&self, cube: CubeId) -> usize {
        self.digit[cube.0] as usize
    }

    pub fn is_leaf(&self, cube: CubeId) -> bool {
        self.child_count[cube.0] == 0
    }

    /// Child indices from the root down to this cube.
    pub fn address(&self, cube: CubeId) -> Vec<usize> {
        let mut digits = Vec::with_capacity(self.scale_of(cube));
        let mut idx = cube.0;
        while idx != 0 {
            digits.push(self.digit[idx] as usize);
            idx = self.parent[idx];
        }
        digits.reverse();
        digits
    }

    /// Address rendered as digits (`"021"`), or dot-separated when some cube
    /// of the tree has more than ten children (`"0.12.3"`). Root: `""`.
    pub fn address_string(&self, cube: CubeId) -> String {
        format_address(&self.address(cube), self.max_child_count > 10)
    }

    /// Resolve an address (child indices from the root) to a cube.
    pub fn cube_at(&self, address: &[usize]) -> Result<CubeId> {
        let mut cube = self.root();
        for (depth, &d) in address.iter().enumerate() {
            if d >= self.child_count(cube) {
                return Err(Error::InvalidAddress {
                    address: format_address(address, self.max_child_count > 10),
                    reason: format!(
                        "digit {d} at position {depth} exceeds the child count {}",
                        self.child_count(cube)
                    ),
                });
            }
            cube = self.child(cube, d);
        }
        Ok(cube)
    }

    /// Resolve a full-depth address to a point.
    pub fn point_at(&self, address: &[usize]) -> Result<Point> {
        if address.len() != self.depth {
            return Err(Error::InvalidAddress {
                address: format_address(address, self.max_child_count > 10),
                reason: format!("length {} differs from the leaf depth {}", address.len(), self.depth),
            });
        }
        let cube = self.cube_at(address)?;
        Ok(self.point_of_cube(cube))
    }

    pub fn point(&self, leaf: usize) -> Point {
        debug_assert!(leaf < self.leaf_count());
        Point { tree: self.id, leaf }
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.leaf_count()).map(|leaf| Point { tree: self.id, leaf })
    }

    pub fn leaf_cube(&self, point: Point) -> CubeId {
        debug_assert_eq!(point.tree, self.id, "point from a different tree");
        CubeId(self.scale_start[self.depth] + point.leaf)
    }

    fn point_of_cube(&self, cube: CubeId) -> Point {
        debug_assert!(self.is_leaf(cube));
        Point {
            tree: self.id,
            leaf: cube.0 - self.scale_start[self.depth],
        }
    }

    /// Ordinals of the leaves below a cube (contiguous by construction).
    pub fn leaf_range(&self, cube: CubeId) -> std::ops::Range<usize> {
        self.leaf_start[cube.0]..self.leaf_end[cube.0]
    }

    /// Measure of the leaf cell with the given ordinal.
    #[inline]
    pub fn leaf_measure(&self, leaf: usize) -> f64 {
        self.measure[self.scale_start[self.depth] + leaf]
    }

    /// The ancestor of `cube` at the given (coarser or equal) scale.
    pub fn ancestor_at_scale(&self, cube: CubeId, scale: usize) -> CubeId {
        let mut idx = cube.0;
        let mut j = self.scale_of(cube);
        debug_assert!(scale <= j);
        while j > scale {
            idx = self.parent[idx];
            j -= 1;
        }
        CubeId(idx)
    }

    pub fn contains(&self, cube: CubeId, point: Point) -> bool {
        self.leaf_range(cube).contains(&point.leaf)
    }

    /// Smallest cube containing both leaves (their meet in the tree).
    pub fn meet_of_leaves(&self, a: usize, b: usize) -> CubeId {
        let base = self.scale_start[self.depth];
        let mut x = base + a;
        let mut y = base + b;
        while x != y {
            x = self.parent[x];
            y = self.parent[y];
        }
        CubeId(x)
    }

    /// The tree metric `δ(x, y)`: measure of the smallest common cube, 0 on
    /// the diagonal. Symmetric, and ultrametric.
    pub fn delta(&self, x: Point, y: Point) -> Result<f64> {
        if x.tree != self.id || y.tree != self.id {
            return Err(Error::MixedTree);
        }
        Ok(self.delta_leaves(x.leaf, y.leaf))
    }

    #[inline]
    pub(crate) fn delta_leaves(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        self.measure[self.meet_of_leaves(a, b).0]
    }

    /// Integral of `δ(x, ·)^{-(1+p)}` over the complement of `cube`, for any
    /// `x` inside it. The integrand is constant on each annulus
    /// `A_k = Q_k \ Q_{k+1}` between consecutive ancestors, so the value is
    /// the exact finite sum `Σ_k μ(A_k) μ(Q_k)^{-(1+p)}` and does not depend
    /// on the choice of `x`. Returns 0 for the root (empty complement).
    ///
    /// The usual regime is `0 < p < 1`; larger exponents are accepted but
    /// flagged with a warning.
    pub fn annulus_integral(&self, cube: CubeId, exponent: f64) -> Result<f64> {
        if !(exponent > 0.0) {
            return Err(Error::ParameterRange {
                name: "exponent",
                value: exponent,
                range: "(0, ∞)",
            });
        }
        if exponent >= 1.0 {
            log::warn!("annulus integral evaluated at exponent {exponent} >= 1");
        }
        let mut acc = CompensatedSum::new();
        let mut inner = cube.0;
        while inner != 0 {
            let outer = self.parent[inner];
            let mu_outer = self.measure[outer];
            let shell = mu_outer - self.measure[inner];
            acc.add(shell * mu_outer.powf(-(1.0 + exponent)));
            inner = outer;
        }
        Ok(acc.value())
    }
}

fn spec_depth(node: &TreeSpecNode) -> usize {
    node.children
        .iter()
        .map(|c| 1 + spec_depth(c))
        .max()
        .unwrap_or(0)
}

fn spec_leaf_count(node: &TreeSpecNode) -> usize {
    if node.children.is_empty() {
        1
    } else {
        node.children.iter().map(spec_leaf_count).sum()
    }
}

fn detect_uniform(
    child_count: &[u32],
    measure: &[f64],
    scale_start: &[usize],
    depth: usize,
) -> Option<usize> {
    let b = child_count[0] as usize;
    if b < 2 {
        return None;
    }
    for j in 0..depth {
        for idx in scale_start[j]..scale_start[j + 1] {
            if child_count[idx] as usize != b {
                return None;
            }
        }
    }
    for j in 0..=depth {
        let expected = 1.0 / (b as f64).powi(j as i32);
        for idx in scale_start[j]..scale_start[j + 1] {
            if (measure[idx] - expected).abs() > 1e-14 * expected {
                return None;
            }
        }
    }
    Some(b)
}

fn address_of(parent: &[usize], digit: &[u32], idx: usize) -> String {
    let mut digits = Vec::new();
    let mut i = idx;
    while i != 0 {
        digits.push(digit[i] as usize);
        i = parent[i];
    }
    digits.reverse();
    format_address(&digits, digits.iter().any(|&d| d > 9))
}

pub(crate) fn format_address(digits: &[usize], dotted: bool) -> String {
    if dotted {
        digits
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(".")
    } else {
        digits.iter().map(|d| char::from(b'0' + *d as u8)).collect()
    }
}

/// Parse an address string in either plain-digit or dot-separated form.
pub fn parse_address(s: &str) -> Result<Vec<usize>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if s.contains('.') {
        s.split('.')
            .map(|part| {
                part.parse::<usize>().map_err(|_| Error::InvalidAddress {
                    address: s.to_string(),
                    reason: format!("component {part:?} is not a number"),
                })
            })
            .collect()
    } else {
        s.chars()
            .map(|c| {
                c.to_digit(10)
                    .map(|d| d as usize)
                    .ok_or_else(|| Error::InvalidAddress {
                        address: s.to_string(),
                        reason: format!("character {c:?} is not a digit"),
                    })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_b3_n1() {
        let tree = DyadicTree::uniform(3, 1).unwrap();
        assert_eq!(tree.cube_count(), 4);
        assert_eq!(tree.leaf_count(), 3);
        for child in tree.children(tree.root()) {
            assert_eq!(tree.measure(child), 1.0 / 3.0);
        }
    }

    #[test]
    fn uniform_b3_n2() {
        let tree = DyadicTree::uniform(3, 2).unwrap();
        assert_eq!(tree.leaf_count(), 9);
        for cube in tree.cubes_at_scale(2) {
            assert_eq!(tree.measure(cube), 1.0 / 9.0);
        }
    }

    #[test]
    fn uniform_b2_n3_scales() {
        let tree = DyadicTree::uniform(2, 3).unwrap();
        assert_eq!(tree.leaf_count(), 8);
        for j in 0..=3 {
            for cube in tree.cubes_at_scale(j) {
                assert_eq!(tree.measure(cube), 0.5f64.powi(j as i32));
                assert_eq!(tree.scale_of(cube), j);
            }
        }
    }

    #[test]
    fn explicit_two_leaves() {
        let spec = TreeSpecNode {
            measure: 1.0,
            children: vec![
                TreeSpecNode { measure: 0.5, children: vec![] },
                TreeSpecNode { measure: 0.5, children: vec![] },
            ],
        };
        let tree = DyadicTree::from_spec_node(&spec).unwrap();
        assert_eq!(tree.leaf_count(), 2);
        assert_eq!(tree.depth(), 1);
    }

    #[test]
    fn explicit_measure_mismatch() {
        let spec = TreeSpecNode {
            measure: 1.0,
            children: vec![
                TreeSpecNode { measure: 0.5, children: vec![] },
                TreeSpecNode { measure: 0.4, children: vec![] },
            ],
        };
        let err = DyadicTree::from_spec_node(&spec).unwrap_err();
        assert!(matches!(err, Error::MeasureMismatch { .. }), "{err}");
    }

    #[test]
    fn explicit_offspring_bound() {
        let spec = TreeSpecNode {
            measure: 1.0,
            children: (0..9)
                .map(|_| TreeSpecNode { measure: 1.0 / 9.0, children: vec![] })
                .collect(),
        };
        let err = DyadicTree::from_spec_node_with_limits(
            &spec,
            &TreeLimits { max_leaves: 1 << 20, offspring_bound: 8 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::OffspringBound { .. }), "{err}");
    }

    #[test]
    fn mixed_depth_gets_padded() {
        // Root with thirds, one third split into halves: leaves re-sum to 1.
        let spec = TreeSpecNode {
            measure: 1.0,
            children: vec![
                TreeSpecNode {
                    measure: 1.0 / 3.0,
                    children: vec![
                        TreeSpecNode { measure: 1.0 / 6.0, children: vec![] },
                        TreeSpecNode { measure: 1.0 / 6.0, children: vec![] },
                    ],
                },
                TreeSpecNode { measure: 1.0 / 3.0, children: vec![] },
                TreeSpecNode { measure: 1.0 / 3.0, children: vec![] },
            ],
        };
        let tree = DyadicTree::from_spec_node(&spec).unwrap();
        assert_eq!(tree.depth(), 2);
        assert_eq!(tree.leaf_count(), 4);
        let total: f64 = tree
            .cubes_at_scale(2)
            .map(|c| tree.measure(c))
            .sum();
        assert!((total - 1.0).abs() < 1e-14);
        // Padding chains are single-child cubes of unchanged measure.
        let padded = tree.cube_at(&[1, 0]).unwrap();
        assert_eq!(tree.measure(padded), 1.0 / 3.0);
        tree.validate().unwrap();
    }

    #[test]
    fn delta_basics() {
        let tree = DyadicTree::uniform(3, 2).unwrap();
        let x = tree.point_at(&[0, 0]).unwrap();
        assert_eq!(tree.delta(x, x).unwrap(), 0.0);

        let y = tree.point_at(&[1, 0]).unwrap();
        assert_eq!(tree.delta(x, y).unwrap(), 1.0);

        let z = tree.point_at(&[0, 1]).unwrap();
        assert_eq!(tree.delta(x, z).unwrap(), 1.0 / 3.0);
        assert_eq!(tree.delta(z, x).unwrap(), tree.delta(x, z).unwrap());
    }

    #[test]
    fn delta_rejects_mixed_trees() {
        let a = DyadicTree::uniform(3, 2).unwrap();
        let b = DyadicTree::uniform(3, 2).unwrap();
        let x = a.point(0);
        let y = b.point(1);
        assert!(matches!(a.delta(x, y), Err(Error::MixedTree)));
    }

    #[test]
    fn annulus_integral_matches_closed_form() {
        // Uniform tree: Σ_{k<j} (1 - 1/b) b^{kp} = (1 - 1/b)(b^{jp} - 1)/(b^p - 1).
        let tree = DyadicTree::uniform(3, 4).unwrap();
        let b = 3.0f64;
        for p in [0.25, 0.5, 0.75] {
            for j in 0..=4usize {
                let cube = tree
                    .cube_at(&vec![0; j])
                    .unwrap();
                let expected =
                    (1.0 - 1.0 / b) * (b.powf(j as f64 * p) - 1.0) / (b.powf(p) - 1.0);
                let got = tree.annulus_integral(cube, p).unwrap();
                assert!(
                    (got - expected).abs() <= 1e-12 * expected.max(1.0),
                    "j={j} p={p}: {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn annulus_integral_examples() {
        let tree = DyadicTree::uniform(3, 3).unwrap();
        let q1 = tree.cube_at(&[0]).unwrap();
        let got = tree.annulus_integral(q1, 0.5).unwrap();
        assert!((got - 2.0 / 3.0).abs() < 1e-15);

        let q2 = tree.cube_at(&[0, 0]).unwrap();
        let got = tree.annulus_integral(q2, 0.5).unwrap();
        let expected = (2.0 / 3.0) * (1.0 + 3.0f64.sqrt());
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");

        assert_eq!(tree.annulus_integral(tree.root(), 0.5).unwrap(), 0.0);
    }

    #[test]
    fn annulus_integral_independent_of_position_within_cube() {
        let tree = DyadicTree::uniform(3, 3).unwrap();
        // Two different cubes at the same scale of a uniform tree carry the
        // same ancestor measures, hence the same integral.
        let a = tree.cube_at(&[0, 1]).unwrap();
        let b = tree.cube_at(&[2, 0]).unwrap();
        let pa = tree.annulus_integral(a, 0.4).unwrap();
        let pb = tree.annulus_integral(b, 0.4).unwrap();
        assert_eq!(pa, pb);
    }

    #[test]
    fn address_round_trip() {
        let tree = DyadicTree::uniform(3, 3).unwrap();
        for cube in tree.cubes() {
            let s = tree.address_string(cube);
            let parsed = parse_address(&s).unwrap();
            assert_eq!(tree.cube_at(&parsed).unwrap(), cube);
        }
    }

    #[test]
    fn resource_limit() {
        let err = DyadicTree::uniform_with_limits(
            3,
            5,
            &TreeLimits { max_leaves: 100, offspring_bound: 8 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { .. }));
    }

    #[test]
    fn tree_spec_json_forms() {
        let spec: TreeSpec = serde_json::from_str(r#"{"uniform":{"b":3,"N":2}}"#).unwrap();
        let tree = DyadicTree::from_spec(&spec).unwrap();
        assert_eq!(tree.leaf_count(), 9);

        let spec: TreeSpec = serde_json::from_str(
            r#"{"measure":1.0,"children":[{"measure":0.5},{"measure":0.5}]}"#,
        )
        .unwrap();
        let tree = DyadicTree::from_spec(&spec).unwrap();
        assert_eq!(tree.leaf_count(), 2);
    }
}
