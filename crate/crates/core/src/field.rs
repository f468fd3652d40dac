//! Complex-valued functions that are piecewise constant on leaf cells.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sum::{ComplexSum, CompensatedSum};
use crate::tree::{CubeId, DyadicTree, Point};

/// One complex value per depth-`N` leaf cell. This is the whole of
/// `L²(X, μ)` at the tree's resolution: every integral against the tree
/// metric reduces to an exact finite sum over these cells.
#[derive(Debug, Clone)]
pub struct CellFunction {
    tree: Arc<DyadicTree>,
    values: Vec<Complex64>,
}

impl CellFunction {
    pub fn from_values(tree: &Arc<DyadicTree>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != tree.leaf_count() {
            return Err(Error::SizeMismatch {
                got: values.len(),
                expected: tree.leaf_count(),
            });
        }
        Ok(Self {
            tree: Arc::clone(tree),
            values,
        })
    }

    pub fn constant(tree: &Arc<DyadicTree>, value: Complex64) -> Self {
        Self {
            tree: Arc::clone(tree),
            values: vec![value; tree.leaf_count()],
        }
    }

    pub fn zero(tree: &Arc<DyadicTree>) -> Self {
        Self::constant(tree, Complex64::ZERO)
    }

    /// Indicator of a cube.
    pub fn indicator(tree: &Arc<DyadicTree>, cube: CubeId) -> Self {
        let mut values = vec![Complex64::ZERO; tree.leaf_count()];
        for leaf in tree.leaf_range(cube) {
            values[leaf] = Complex64::ONE;
        }
        Self {
            tree: Arc::clone(tree),
            values,
        }
    }

    pub fn from_fn(tree: &Arc<DyadicTree>, mut f: impl FnMut(usize) -> Complex64) -> Self {
        let values = (0..tree.leaf_count()).map(&mut f).collect();
        Self {
            tree: Arc::clone(tree),
            values,
        }
    }

    pub fn tree(&self) -> &Arc<DyadicTree> {
        &self.tree
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn value_at(&self, point: Point) -> Complex64 {
        debug_assert_eq!(point.tree, self.tree.id());
        self.values[point.leaf]
    }

    pub fn same_tree(&self, other: &CellFunction) -> bool {
        self.tree.id() == other.tree.id()
    }

    /// The `L²(X, μ)` pairing `⟨f, g⟩ = Σ f(cell) conj(g(cell)) μ(cell)`.
    pub fn inner(&self, other: &CellFunction) -> Result<Complex64> {
        if !self.same_tree(other) {
            return Err(Error::MixedTree);
        }
        let mut acc = ComplexSum::new();
        for (leaf, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            let mu = self.leaf_measure(leaf);
            acc.add(a * b.conj() * mu);
        }
        Ok(acc.value())
    }

    /// `∫ f dμ` (the pairing against the constant 1).
    pub fn mean(&self) -> Complex64 {
        let mut acc = ComplexSum::new();
        for (leaf, v) in self.values.iter().enumerate() {
            acc.add(v * self.leaf_measure(leaf));
        }
        acc.value()
    }

    pub fn norm_sq(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for (leaf, v) in self.values.iter().enumerate() {
            acc.add(v.norm_sqr() * self.leaf_measure(leaf));
        }
        acc.value()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, factor: Complex64) -> CellFunction {
        CellFunction {
            tree: Arc::clone(&self.tree),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add(&self, other: &CellFunction) -> Result<CellFunction> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &CellFunction) -> Result<CellFunction> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(
        &self,
        other: &CellFunction,
        op: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<CellFunction> {
        if !self.same_tree(other) {
            return Err(Error::MixedTree);
        }
        Ok(CellFunction {
            tree: Arc::clone(&self.tree),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| op(*a, *b))
                .collect(),
        })
    }

    /// Per-cube integrals `∫_Q f dμ` for every cube, bottom-up in one pass.
    pub fn cube_integrals(&self) -> Vec<Complex64> {
        let tree = &self.tree;
        let mut integral = vec![Complex64::ZERO; tree.cube_count()];
        let first_leaf_cube = tree.cube_count() - tree.leaf_count();
        for (leaf, v) in self.values.iter().enumerate() {
            integral[first_leaf_cube + leaf] = v * tree.leaf_measure(leaf);
        }
        for idx in (0..first_leaf_cube).rev() {
            let cube = CubeId(idx);
            let mut sum = Complex64::ZERO;
            for child in tree.children(cube) {
                sum += integral[child.index()];
            }
            integral[idx] = sum;
        }
        integral
    }

    /// Per-cube integrals `∫_Q |f| dμ`. The leaf term is taken as the modulus
    /// of the leaf's complex integral, so a single-cell average of `|f|`
    /// agrees bit-for-bit with the modulus of the single-cell average of `f`.
    pub fn cube_abs_integrals(&self) -> Vec<f64> {
        let tree = &self.tree;
        let mut integral = vec![0.0f64; tree.cube_count()];
        let first_leaf_cube = tree.cube_count() - tree.leaf_count();
        for (leaf, v) in self.values.iter().enumerate() {
            integral[first_leaf_cube + leaf] = (v * tree.leaf_measure(leaf)).norm();
        }
        for idx in (0..first_leaf_cube).rev() {
            let cube = CubeId(idx);
            let mut sum = 0.0;
            for child in tree.children(cube) {
                sum += integral[child.index()];
            }
            integral[idx] = sum;
        }
        integral
    }

    /// True when every value has a zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// Largest pointwise modulus of the difference.
    pub fn sup_distance(&self, other: &CellFunction) -> Result<f64> {
        if !self.same_tree(other) {
            return Err(Error::MixedTree);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    #[inline]
    pub(crate) fn leaf_measure(&self, leaf: usize) -> f64 {
        self.tree.leaf_measure(leaf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inner_of_constants_is_one() {
        let tree = DyadicTree::uniform(3, 2).unwrap();
        let one = CellFunction::constant(&tree, Complex64::ONE);
        let ip = one.inner(&one).unwrap();
        assert!((ip - Complex64::ONE).norm() < 1e-15);
    }

    #[test]
    fn disjoint_supports_are_orthogonal() {
        let tree = DyadicTree::uniform(3, 2).unwrap();
        let a = CellFunction::indicator(&tree, tree.cube_at(&[0]).unwrap());
        let b = CellFunction::indicator(&tree, tree.cube_at(&[1]).unwrap());
        assert_eq!(a.inner(&b).unwrap(), Complex64::ZERO);
    }

    #[test]
    fn indicator_against_one_gives_measure() {
        let tree = DyadicTree::uniform(3, 2).unwrap();
        let f = CellFunction::indicator(&tree, tree.cube_at(&[2]).unwrap());
        let one = CellFunction::constant(&tree, Complex64::ONE);
        let ip = f.inner(&one).unwrap();
        assert!((ip.re - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ip.im, 0.0);
    }

    #[test]
    fn conjugate_symmetry() {
        let tree = DyadicTree::uniform(2, 2).unwrap();
        let f = CellFunction::from_fn(&tree, |i| Complex64::new(i as f64, 1.0));
        let g = CellFunction::from_fn(&tree, |i| Complex64::new(1.0, -(i as f64)));
        let fg = f.inner(&g).unwrap();
        let gf = g.inner(&f).unwrap();
        assert!((fg - gf.conj()).norm() < 1e-14);
    }

    #[test]
    fn mixed_tree_error() {
        let a = DyadicTree::uniform(2, 2).unwrap();
        let b = DyadicTree::uniform(2, 2).unwrap();
        let f = CellFunction::zero(&a);
        let g = CellFunction::zero(&b);
        assert!(matches!(f.inner(&g), Err(Error::MixedTree)));
    }
}
