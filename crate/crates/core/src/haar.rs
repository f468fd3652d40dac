//! The Haar system: orthonormal, mean-zero, piecewise-constant wavelets,
//! one fewer than the child count of every cube, plus the fast analysis and
//! synthesis transforms between cell values and coefficients.
//!
//! Construction at a cube with children `C_1, …, C_m` (address order):
//! wavelet `i` balances the running union of the first `i` children against
//! the next one,
//!
//! ```text
//! g_i = 1_{C_1 ∪ … ∪ C_i} / μ(C_1 ∪ … ∪ C_i)  -  1_{C_{i+1}} / μ(C_{i+1}),
//! h_i = g_i / ‖g_i‖,            i = 1, …, m − 1,
//! ```
//!
//! which is orthonormal, keeps the first nonzero stencil entry positive, and
//! on an equal-measure triadic split produces the stencils
//! `3^{j/2}(√(3/2), −√(3/2), 0)` and `3^{j/2}(1/√2, 1/√2, −√2)`.
//!
//! Wavelets are ordered by scale, then base-cube address, then local index;
//! that global order is the coefficient layout of [`HaarSpectrum`].

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::CellFunction;
use crate::sum::{ComplexSum, CompensatedSum};
use crate::tree::{CubeId, DyadicTree, Point};

/// A single Haar wavelet: its base cube, its 1-based local index among the
/// wavelets of that cube, and the constant value taken on each child.
#[derive(Debug, Clone)]
pub struct HaarWavelet {
    pub cube: CubeId,
    pub local_index: usize,
    pub scale: usize,
    pub stencil: Vec<f64>,
}

/// The full orthonormal system over a tree.
#[derive(Debug)]
pub struct HaarSystem {
    tree: Arc<DyadicTree>,
    wavelets: Vec<HaarWavelet>,
    /// Per cube: index of its first wavelet, `usize::MAX` when it has none.
    cube_first: Vec<usize>,
}

/// Mean part plus one coefficient per wavelet; the frequency-domain twin of
/// a [`CellFunction`]. Parseval: `‖f‖² = |mean|² + Σ |coef|²`.
#[derive(Debug, Clone)]
pub struct HaarSpectrum {
    tree_id: u64,
    pub mean: Complex64,
    coefficients: Vec<Complex64>,
}

impl HaarSystem {
    pub fn build(tree: &Arc<DyadicTree>) -> Self {
        let mut wavelets = Vec::new();
        let mut cube_first = vec![usize::MAX; tree.cube_count()];
        for cube in tree.cubes() {
            let m = tree.child_count(cube);
            if m < 2 {
                continue;
            }
            cube_first[cube.index()] = wavelets.len();
            let scale = tree.scale_of(cube);
            let measures: Vec<f64> = tree.children(cube).map(|c| tree.measure(c)).collect();
            let mut prefix_mass = measures[0];
            for i in 1..m {
                let mu_next = measures[i];
                let norm = (1.0 / prefix_mass + 1.0 / mu_next).sqrt();
                let mut stencil = vec![0.0; m];
                let head = 1.0 / (prefix_mass * norm);
                for entry in stencil.iter_mut().take(i) {
                    *entry = head;
                }
                stencil[i] = -1.0 / (mu_next * norm);
                wavelets.push(HaarWavelet {
                    cube,
                    local_index: i,
                    scale,
                    stencil,
                });
                prefix_mass += mu_next;
            }
        }
        Self {
            tree: Arc::clone(tree),
            wavelets,
            cube_first,
        }
    }

    /// Build with externally supplied stencils; the caller promises the
    /// stencils follow the global ordering convention. Used by the closed-form
    /// triadic system, which must coincide with [`HaarSystem::build`].
    pub(crate) fn from_parts(tree: &Arc<DyadicTree>, wavelets: Vec<HaarWavelet>) -> Self {
        let mut cube_first = vec![usize::MAX; tree.cube_count()];
        for (idx, w) in wavelets.iter().enumerate().rev() {
            cube_first[w.cube.index()] = idx;
        }
        Self {
            tree: Arc::clone(tree),
            wavelets,
            cube_first,
        }
    }

    pub fn tree(&self) -> &Arc<DyadicTree> {
        &self.tree
    }

    pub fn len(&self) -> usize {
        self.wavelets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelets.is_empty()
    }

    pub fn wavelet(&self, index: usize) -> &HaarWavelet {
        &self.wavelets[index]
    }

    pub fn wavelets(&self) -> &[HaarWavelet] {
        &self.wavelets
    }

    /// Index of the wavelet with the given base cube and 1-based local index.
    pub fn wavelet_index(&self, cube: CubeId, local_index: usize) -> Option<usize> {
        let first = self.cube_first[cube.index()];
        if first == usize::MAX {
            return None;
        }
        let count = self.tree.child_count(cube).saturating_sub(1);
        (1..=count).contains(&local_index).then(|| first + local_index - 1)
    }

    /// First wavelet index of a cube, if the cube carries any.
    pub fn first_wavelet_of(&self, cube: CubeId) -> Option<usize> {
        let first = self.cube_first[cube.index()];
        (first != usize::MAX).then_some(first)
    }

    /// Measure of the wavelet's base cube.
    pub fn base_measure(&self, index: usize) -> f64 {
        self.tree.measure(self.wavelets[index].cube)
    }

    /// Pointwise evaluation: 0 outside the base cube, otherwise the stencil
    /// value of the child containing the point.
    pub fn evaluate(&self, index: usize, x: Point) -> f64 {
        assert_eq!(
            x.tree,
            self.tree.id(),
            "point evaluated against a foreign tree"
        );
        let w = &self.wavelets[index];
        if !self.tree.contains(w.cube, x) {
            return 0.0;
        }
        let child = self
            .tree
            .ancestor_at_scale(self.tree.leaf_cube(x), w.scale + 1);
        w.stencil[self.tree.digit(child)]
    }

    /// Wavelet rendered as a cell function.
    pub fn to_cell_function(&self, index: usize) -> CellFunction {
        let w = &self.wavelets[index];
        let mut f = CellFunction::zero(&self.tree);
        for (k, child) in self.tree.children(w.cube).enumerate() {
            let v = Complex64::new(w.stencil[k], 0.0);
            for leaf in self.tree.leaf_range(child) {
                f.values_mut()[leaf] = v;
            }
        }
        f
    }

    /// Forward transform: mean plus all coefficients `⟨f, h⟩`, computed in a
    /// single bottom-up pass over per-cube integrals (cost `O(cells · B)`).
    pub fn analyze(&self, f: &CellFunction) -> HaarSpectrum {
        assert_eq!(f.tree().id(), self.tree.id(), "function from a foreign tree");
        let integral = f.cube_integrals();
        let mut coefficients = vec![Complex64::ZERO; self.wavelets.len()];
        for (idx, w) in self.wavelets.iter().enumerate() {
            let mut acc = Complex64::ZERO;
            for (k, child) in self.tree.children(w.cube).enumerate() {
                if w.stencil[k] != 0.0 {
                    acc += integral[child.index()] * w.stencil[k];
                }
            }
            coefficients[idx] = acc;
        }
        HaarSpectrum {
            tree_id: self.tree.id(),
            mean: integral[0],
            coefficients,
        }
    }

    /// Inverse transform by top-down accumulation.
    pub fn synthesize(&self, spectrum: &HaarSpectrum) -> Result<CellFunction> {
        self.check_spectrum(spectrum)?;
        let tree = &self.tree;
        let mut acc = vec![Complex64::ZERO; tree.cube_count()];
        acc[0] = spectrum.mean;
        for cube in tree.cubes() {
            if tree.is_leaf(cube) {
                continue;
            }
            let base = acc[cube.index()];
            let first = self.cube_first[cube.index()];
            for (k, child) in tree.children(cube).enumerate() {
                let mut v = base;
                if first != usize::MAX {
                    let count = tree.child_count(cube) - 1;
                    for i in 0..count {
                        let w = &self.wavelets[first + i];
                        if w.stencil[k] != 0.0 {
                            v += spectrum.coefficients[first + i] * w.stencil[k];
                        }
                    }
                }
                acc[child.index()] = v;
            }
        }
        let first_leaf_cube = tree.cube_count() - tree.leaf_count();
        let values = acc[first_leaf_cube..].to_vec();
        CellFunction::from_values(tree, values)
    }

    /// Project onto the functions constant on scale-`target` cubes: keep the
    /// mean and every coefficient with wavelet scale `< target`. Equals the
    /// conditional expectation (cell averages) at that scale.
    pub fn project(&self, f: &CellFunction, target: usize) -> Result<CellFunction> {
        if target > self.tree.depth() {
            return Err(Error::TruncationScale {
                got: target,
                max: self.tree.depth(),
            });
        }
        let mut spectrum = self.analyze(f);
        for (idx, w) in self.wavelets.iter().enumerate() {
            if w.scale >= target {
                spectrum.coefficients[idx] = Complex64::ZERO;
            }
        }
        self.synthesize(&spectrum)
    }

    /// Point evaluation of a spectrum: mean plus the contributions of the
    /// wavelets based on the ancestors of `x`. `O(depth · B)`.
    pub fn evaluate_spectrum_at(&self, spectrum: &HaarSpectrum, x: Point) -> Result<Complex64> {
        self.check_spectrum(spectrum)?;
        let tree = &self.tree;
        let mut value = spectrum.mean;
        let mut cube = tree.leaf_cube(x);
        let mut chain = Vec::with_capacity(tree.depth() + 1);
        while let Some(parent) = tree.parent(cube) {
            chain.push((parent, tree.digit(cube)));
            cube = parent;
        }
        for (ancestor, digit) in chain.into_iter().rev() {
            let first = self.cube_first[ancestor.index()];
            if first == usize::MAX {
                continue;
            }
            let count = tree.child_count(ancestor) - 1;
            for i in 0..count {
                let w = &self.wavelets[first + i];
                if w.stencil[digit] != 0.0 {
                    value += spectrum.coefficients[first + i] * w.stencil[digit];
                }
            }
        }
        Ok(value)
    }

    pub(crate) fn check_spectrum(&self, spectrum: &HaarSpectrum) -> Result<()> {
        if spectrum.tree_id != self.tree.id() || spectrum.coefficients.len() != self.wavelets.len()
        {
            return Err(Error::SizeMismatch {
                got: spectrum.coefficients.len(),
                expected: self.wavelets.len(),
            });
        }
        Ok(())
    }
}

impl HaarSpectrum {
    pub fn zero(system: &HaarSystem) -> Self {
        Self {
            tree_id: system.tree().id(),
            mean: Complex64::ZERO,
            coefficients: vec![Complex64::ZERO; system.len()],
        }
    }

    /// Spectrum of a single wavelet (unit coefficient, zero mean).
    pub fn unit(system: &HaarSystem, index: usize) -> Self {
        let mut s = Self::zero(system);
        s.coefficients[index] = Complex64::ONE;
        s
    }

    pub fn from_coefficients(
        system: &HaarSystem,
        mean: Complex64,
        coefficients: Vec<Complex64>,
    ) -> Result<Self> {
        if coefficients.len() != system.len() {
            return Err(Error::SizeMismatch {
                got: coefficients.len(),
                expected: system.len(),
            });
        }
        Ok(Self {
            tree_id: system.tree().id(),
            mean,
            coefficients,
        })
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    pub fn tree_id(&self) -> u64 {
        self.tree_id
    }

    /// `|mean|² + Σ |coef|²`; equals `‖f‖²` by Parseval.
    pub fn norm_sq(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        acc.add(self.mean.norm_sqr());
        for c in &self.coefficients {
            acc.add(c.norm_sqr());
        }
        acc.value()
    }

    /// `Σ c_h conj(d_h)` plus the mean term.
    pub fn inner(&self, other: &HaarSpectrum) -> Result<Complex64> {
        if self.tree_id != other.tree_id || self.coefficients.len() != other.coefficients.len() {
            return Err(Error::SizeMismatch {
                got: other.coefficients.len(),
                expected: self.coefficients.len(),
            });
        }
        let mut acc = ComplexSum::new();
        acc.add(self.mean * other.mean.conj());
        for (a, b) in self.coefficients.iter().zip(&other.coefficients) {
            acc.add(a * b.conj());
        }
        Ok(acc.value())
    }

    /// Apply a per-wavelet factor to the coefficients (mean untouched).
    pub fn map_coefficients(&self, mut factor: impl FnMut(usize, Complex64) -> Complex64) -> Self {
        Self {
            tree_id: self.tree_id,
            mean: self.mean,
            coefficients: self
                .coefficients
                .iter()
                .enumerate()
                .map(|(i, &c)| factor(i, c))
                .collect(),
        }
    }
}
