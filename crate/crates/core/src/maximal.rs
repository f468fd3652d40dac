//! Dyadic maximal operators: the Hardy–Littlewood maximal function over
//! ancestor cubes, the sharp maximal function of fractional order, and the
//! maximal functions of the truncated evolution series.
//!
//! Suprema over truncation levels and times are taken over finite grids and
//! documented as lower bounds for the true suprema; the inequalities tested
//! against them are one-sided, so refining a grid only strengthens a test.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::besov::Smoothness;
use crate::error::{Error, Result};
use crate::field::CellFunction;
use crate::haar::{HaarSpectrum, HaarSystem};
use crate::operator::{EigenReport, FractionalOrder};
use crate::tree::DyadicTree;

/// Above this cell count the sharp maximal function switches from the direct
/// per-ancestor scan to the sorted prefix scheme (real-valued input only).
pub const SHARP_DIRECT_LIMIT: usize = 2000;

/// One nonnegative value per leaf cell.
#[derive(Debug, Clone)]
pub struct MaximalField {
    tree_id: u64,
    values: Vec<f64>,
}

impl MaximalField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tree_id(&self) -> u64 {
        self.tree_id
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `L²(μ)` norm of the field.
    pub fn l2_norm(&self, tree: &DyadicTree) -> f64 {
        let mut acc = crate::sum::CompensatedSum::new();
        for (leaf, v) in self.values.iter().enumerate() {
            acc.add(v * v * tree.leaf_measure(leaf));
        }
        acc.value().sqrt()
    }

    /// Pointwise max of two fields over the same tree.
    fn merge_max(&mut self, other: &MaximalField) {
        debug_assert_eq!(self.tree_id, other.tree_id);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a = a.max(*b);
        }
    }
}

/// Hardy–Littlewood dyadic maximal operator: at each leaf, the largest
/// average of `|f|` over the ancestor cubes (the leaf cell itself included).
/// One bottom-up pass for the integrals, one top-down pass for the maxima.
pub fn hardy_littlewood(f: &CellFunction) -> MaximalField {
    let tree = f.tree().as_ref();
    let abs_integral = f.cube_abs_integrals();
    let mut running = vec![0.0f64; tree.cube_count()];
    for cube in tree.cubes() {
        let avg = abs_integral[cube.index()] / tree.measure(cube);
        let inherited = match tree.parent(cube) {
            Some(p) => running[p.index()],
            None => 0.0,
        };
        running[cube.index()] = inherited.max(avg);
    }
    let first_leaf_cube = tree.cube_count() - tree.leaf_count();
    MaximalField {
        tree_id: tree.id(),
        values: running[first_leaf_cube..].to_vec(),
    }
}

/// Sharp maximal operator of order `lambda`: at each leaf `x`, the largest
/// `μ(Q)^{-(1+λ)} ∫_Q |f(y) − f(x)| dμ(y)` over ancestors `Q ∋ x`.
///
/// The integrand couples to `f(x)`, so per-cube partial sums of `f` alone do
/// not suffice. Small trees take the direct per-ancestor scan; larger trees
/// with real-valued data use per-cube sorted values with prefix sums
/// (`O(cells · depth · log)`); complex data falls back to the direct scan.
pub fn sharp(f: &CellFunction, lambda: Smoothness) -> MaximalField {
    let n = f.tree().leaf_count();
    if n <= SHARP_DIRECT_LIMIT || !f.is_real() {
        sharp_direct(f, lambda)
    } else {
        sharp_sorted(f, lambda)
    }
}

pub(crate) fn sharp_direct(f: &CellFunction, lambda: Smoothness) -> MaximalField {
    let tree = f.tree().as_ref();
    let exponent = -(1.0 + lambda.value());
    let weights: Vec<f64> = tree.cubes().map(|c| tree.measure(c).powf(exponent)).collect();
    let values: Vec<f64> = (0..tree.leaf_count())
        .into_par_iter()
        .map(|leaf| {
            let fx = f.values()[leaf];
            let mut best = 0.0f64;
            let mut cube = tree.leaf_cube(tree.point(leaf));
            loop {
                let mut sum = 0.0;
                for y in tree.leaf_range(cube) {
                    sum += (f.values()[y] - fx).norm() * tree.leaf_measure(y);
                }
                best = best.max(weights[cube.index()] * sum);
                match tree.parent(cube) {
                    Some(p) => cube = p,
                    None => break,
                }
            }
            best
        })
        .collect();
    MaximalField {
        tree_id: tree.id(),
        values,
    }
}

pub(crate) fn sharp_sorted(f: &CellFunction, lambda: Smoothness) -> MaximalField {
    let tree = f.tree().as_ref();
    let exponent = -(1.0 + lambda.value());

    // Per cube: leaf values sorted, with prefix sums of weights and of
    // weighted values, so ∫_Q |f − v| dμ is two prefix lookups.
    struct SortedCube {
        values: Vec<f64>,
        weight_prefix: Vec<f64>,
        weighted_prefix: Vec<f64>,
    }
    let sorted: Vec<SortedCube> = tree
        .cubes()
        .map(|cube| {
            let mut pairs: Vec<(f64, f64)> = tree
                .leaf_range(cube)
                .map(|leaf| (f.values()[leaf].re, tree.leaf_measure(leaf)))
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut weight_prefix = Vec::with_capacity(pairs.len() + 1);
            let mut weighted_prefix = Vec::with_capacity(pairs.len() + 1);
            weight_prefix.push(0.0);
            weighted_prefix.push(0.0);
            let mut wsum = 0.0;
            let mut wvsum = 0.0;
            for &(v, w) in &pairs {
                wsum += w;
                wvsum += w * v;
                weight_prefix.push(wsum);
                weighted_prefix.push(wvsum);
            }
            SortedCube {
                values: pairs.into_iter().map(|(v, _)| v).collect(),
                weight_prefix,
                weighted_prefix,
            }
        })
        .collect();

    let values: Vec<f64> = (0..tree.leaf_count())
        .into_par_iter()
        .map(|leaf| {
            let v = f.values()[leaf].re;
            let mut best = 0.0f64;
            let mut cube = tree.leaf_cube(tree.point(leaf));
            loop {
                let sc = &sorted[cube.index()];
                let split = sc.values.partition_point(|&u| u <= v);
                let below = v * sc.weight_prefix[split] - sc.weighted_prefix[split];
                let total_w = *sc.weight_prefix.last().unwrap();
                let total_wv = *sc.weighted_prefix.last().unwrap();
                let above =
                    (total_wv - sc.weighted_prefix[split]) - v * (total_w - sc.weight_prefix[split]);
                let weight = tree.measure(cube).powf(exponent);
                best = best.max(weight * (below + above));
                match tree.parent(cube) {
                    Some(p) => cube = p,
                    None => break,
                }
            }
            best
        })
        .collect();
    MaximalField {
        tree_id: tree.id(),
        values,
    }
}

fn check_evolution_inputs(
    system: &HaarSystem,
    u0: &HaarSpectrum,
    beta: FractionalOrder,
    eigen: &EigenReport,
    n_grid: &[usize],
) -> Result<()> {
    system.check_spectrum(u0)?;
    eigen.check(system, beta)?;
    if u0.mean.norm() > crate::evolution::MEAN_ZERO_TOLERANCE {
        return Err(Error::NonzeroMean {
            magnitude: u0.mean.norm(),
        });
    }
    let max_cut = system.tree().depth().saturating_sub(1);
    if n_grid.is_empty() {
        return Err(Error::ParameterRange {
            name: "n_grid",
            value: 0.0,
            range: "nonempty",
        });
    }
    for &n in n_grid {
        if n > max_cut {
            return Err(Error::TruncationScale { got: n, max: max_cut });
        }
    }
    Ok(())
}

/// Everything below scale `j + 1` of the evolved series, on every cube: one
/// synthesis-style pass whose accumulator at a scale-`(j+1)` cube is the
/// series truncated at scale `j`, evaluated there.
fn truncation_accumulator(
    system: &HaarSystem,
    u0: &HaarSpectrum,
    t: f64,
    eigen: &EigenReport,
) -> Vec<Complex64> {
    let tree = system.tree();
    let mut acc = vec![Complex64::ZERO; tree.cube_count()];
    for cube in tree.cubes() {
        if tree.is_leaf(cube) {
            continue;
        }
        let base = acc[cube.index()];
        let first = system.first_wavelet_of(cube);
        for (k, child) in tree.children(cube).enumerate() {
            let mut v = base;
            if let Some(first) = first {
                let count = tree.child_count(cube) - 1;
                for i in 0..count {
                    let w = system.wavelet(first + i);
                    if w.stencil[k] != 0.0 {
                        let rotation = Complex64::from_polar(1.0, -t * eigen.lambda(first + i));
                        v += u0.coefficients()[first + i] * rotation * w.stencil[k];
                    }
                }
            }
            acc[child.index()] = v;
        }
    }
    acc
}

/// Maximal function over truncation levels at one fixed time:
/// at each leaf, the largest `|series truncated at scale n|` over `n_grid`.
/// Any `t > 0` is allowed here.
pub fn series_sup_over_levels(
    u0: &HaarSpectrum,
    beta: FractionalOrder,
    t: f64,
    n_grid: &[usize],
    system: &HaarSystem,
    eigen: &EigenReport,
) -> Result<MaximalField> {
    check_evolution_inputs(system, u0, beta, eigen, n_grid)?;
    if !(t > 0.0) {
        return Err(Error::TimeGridRange {
            value: t,
            range: "(0, ∞)",
        });
    }
    Ok(sup_over_levels_unchecked(u0, t, n_grid, system, eigen))
}

fn sup_over_levels_unchecked(
    u0: &HaarSpectrum,
    t: f64,
    n_grid: &[usize],
    system: &HaarSystem,
    eigen: &EigenReport,
) -> MaximalField {
    let tree = system.tree();
    let acc = truncation_accumulator(system, u0, t, eigen);
    let values: Vec<f64> = (0..tree.leaf_count())
        .map(|leaf| {
            let mut chain = Vec::with_capacity(tree.depth());
            let mut cube = tree.leaf_cube(tree.point(leaf));
            chain.push(cube);
            while let Some(p) = tree.parent(cube) {
                chain.push(p);
                cube = p;
            }
            chain.reverse(); // chain[s] = ancestor at scale s
            n_grid
                .iter()
                .map(|&n| acc[chain[n + 1].index()].norm())
                .fold(0.0, f64::max)
        })
        .collect();
    MaximalField {
        tree_id: tree.id(),
        values,
    }
}

/// Grid maximal function over both truncation levels and times in `(0, 1)`:
/// a lower bound for the supremum over all levels and all `0 < t < 1`.
pub fn series_sup(
    u0: &HaarSpectrum,
    beta: FractionalOrder,
    t_grid: &[f64],
    n_grid: &[usize],
    system: &HaarSystem,
    eigen: &EigenReport,
) -> Result<MaximalField> {
    check_evolution_inputs(system, u0, beta, eigen, n_grid)?;
    if t_grid.is_empty() {
        return Err(Error::ParameterRange {
            name: "t_grid",
            value: 0.0,
            range: "nonempty",
        });
    }
    for &t in t_grid {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::TimeGridRange {
                value: t,
                range: "(0, 1)",
            });
        }
    }
    let mut result: Option<MaximalField> = None;
    for &t in t_grid {
        let field = sup_over_levels_unchecked(u0, t, n_grid, system, eigen);
        match &mut result {
            Some(r) => r.merge_max(&field),
            None => result = Some(field),
        }
    }
    Ok(result.expect("grid is nonempty"))
}

/// Log-spaced default time grid in `(0, 1)`.
pub fn default_time_grid(points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n)
        .map(|i| 10f64.powf(-3.0 + 3.0 * (i as f64 + 0.5) / n as f64))
        .collect()
}

/// All truncation levels of a tree.
pub fn full_level_grid(tree: &DyadicTree) -> Vec<usize> {
    (0..tree.depth()).collect()
}

/// Smallest `C` with `field ≤ C · first + offset · second` at every leaf.
/// Returns 0 when the bound holds with no help from `first`; infinite when
/// some leaf needs `first` but has `first = 0` there.
pub fn needed_constant(
    field: &MaximalField,
    first: &MaximalField,
    first_scale: f64,
    second: &MaximalField,
    second_scale: f64,
) -> f64 {
    let mut worst = 0.0f64;
    for ((&v, &a), &b) in field
        .values
        .iter()
        .zip(&first.values)
        .zip(&second.values)
    {
        let excess = v - second_scale * b;
        if excess > 0.0 {
            worst = worst.max(excess / (first_scale * a));
        }
    }
    worst
}
