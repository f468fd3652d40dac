//! Unitary spectral evolution of the nonlocal Schrödinger-type equation
//! `i du/dt = D^β u`, `u(0) = u₀`, for mean-zero initial data.
//!
//! The operator is diagonal in the Haar system, so the propagator is exact:
//! each coefficient picks up the phase `e^{-i t λ_h}` with
//! `λ_h = m_h μ(Q(h))^{-β}` taken from a measured [`EigenReport`]. Phases are
//! unimodular, hence the `L²` norm and the coefficient Besov energy are
//! conserved, the evolution forms a group in `t`, and negative `t` runs it
//! backwards (used by the reversibility checks).

use num_complex::Complex64;
use serde::Serialize;

use crate::besov::Smoothness;
use crate::error::{Error, Result};
use crate::haar::{HaarSpectrum, HaarSystem};
use crate::operator::{EigenReport, FractionalOrder};
use crate::sum::CompensatedSum;
use crate::tree::Point;

/// Absolute bound on `|mean|` for data accepted as mean-zero.
pub const MEAN_ZERO_TOLERANCE: f64 = 1e-12;

/// A spectrum tagged with its evolution time and order.
#[derive(Debug, Clone)]
pub struct WaveState {
    spectrum: HaarSpectrum,
    time: f64,
    beta: f64,
}

impl WaveState {
    pub fn spectrum(&self) -> &HaarSpectrum {
        &self.spectrum
    }

    pub fn into_spectrum(self) -> HaarSpectrum {
        self.spectrum
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Evolve mean-zero initial data to time `t` (any sign; negative time runs
/// the reversed group).
pub fn evolve(
    u0: &HaarSpectrum,
    t: f64,
    beta: FractionalOrder,
    system: &HaarSystem,
    eigen: &EigenReport,
) -> Result<WaveState> {
    system.check_spectrum(u0)?;
    eigen.check(system, beta)?;
    if u0.mean.norm() > MEAN_ZERO_TOLERANCE {
        return Err(Error::NonzeroMean {
            magnitude: u0.mean.norm(),
        });
    }
    if !t.is_finite() {
        return Err(Error::ParameterRange {
            name: "t",
            value: t,
            range: "finite",
        });
    }
    let mut spectrum = u0.map_coefficients(|i, c| c * phase(eigen.lambda(i), t));
    spectrum.mean = Complex64::ZERO;
    Ok(WaveState {
        spectrum,
        time: t,
        beta: beta.value(),
    })
}

#[inline]
fn phase(lambda: f64, t: f64) -> Complex64 {
    Complex64::from_polar(1.0, -t * lambda)
}

/// Residuals of the equation at one time, checked by central differences.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub t: f64,
    pub tau: f64,
    /// `‖(u(t+τ) − u(t−τ))/2τ + i D^β u(t)‖` in `L²`.
    pub l2: f64,
    /// Same residual in the coefficient Besov norm of order `λ − β`.
    pub besov: f64,
    pub l2_half: f64,
    pub besov_half: f64,
    /// `l2 / l2_half`; ≈ 4 in the `O(τ²)` regime.
    pub l2_ratio: f64,
    pub besov_ratio: f64,
    /// Set when `max λ_h · τ ≥ 1`: the step cannot resolve the fastest phase.
    pub step_too_coarse: bool,
}

/// Compare the central-difference time derivative of the evolution with
/// `-i D^β u(t)` applied spectrally, at steps `tau` and `tau/2`. The residual
/// is reported in `L²` and in the coefficient Besov norm of order
/// `lambda − beta`; halving the step must shrink it fourfold.
pub fn check_equation(
    u0: &HaarSpectrum,
    t: f64,
    beta: FractionalOrder,
    lambda: Smoothness,
    tau: f64,
    system: &HaarSystem,
    eigen: &EigenReport,
) -> Result<ResidualReport> {
    if lambda.value() <= beta.value() {
        return Err(Error::ParameterOrder {
            beta: beta.value(),
            lambda: lambda.value(),
        });
    }
    if !(tau > 0.0 && tau < t) {
        return Err(Error::ParameterRange {
            name: "tau",
            value: tau,
            range: "(0, t)",
        });
    }
    let (l2, besov) = residual_norms(u0, t, beta, lambda, tau, system, eigen)?;
    let (l2_half, besov_half) = residual_norms(u0, t, beta, lambda, tau / 2.0, system, eigen)?;
    let max_rate = eigen
        .entries()
        .iter()
        .map(|e| e.lambda)
        .fold(0.0f64, f64::max);
    Ok(ResidualReport {
        t,
        tau,
        l2,
        besov,
        l2_half,
        besov_half,
        l2_ratio: l2 / l2_half,
        besov_ratio: besov / besov_half,
        step_too_coarse: max_rate * tau >= 1.0,
    })
}

fn residual_norms(
    u0: &HaarSpectrum,
    t: f64,
    beta: FractionalOrder,
    lambda: Smoothness,
    tau: f64,
    system: &HaarSystem,
    eigen: &EigenReport,
) -> Result<(f64, f64)> {
    let ahead = evolve(u0, t + tau, beta, system, eigen)?;
    let behind = evolve(u0, t - tau, beta, system, eigen)?;
    let now = evolve(u0, t, beta, system, eigen)?;
    let rhs = crate::operator::apply_spectral(now.spectrum(), beta, eigen, system)?;

    let besov_exponent = -2.0 * (lambda.value() - beta.value());
    let mut l2 = CompensatedSum::new();
    let mut besov = CompensatedSum::new();
    let half_step = 2.0 * tau;
    for idx in 0..system.len() {
        let derivative =
            (ahead.spectrum().coefficients()[idx] - behind.spectrum().coefficients()[idx]) / half_step;
        // i du/dt = D^β u  ⇔  du/dt + i D^β u = 0.
        let residual = derivative + Complex64::I * rhs.coefficients()[idx];
        let r2 = residual.norm_sqr();
        l2.add(r2);
        besov.add(r2 * (1.0 + system.base_measure(idx).powf(besov_exponent)));
    }
    Ok((l2.value().sqrt(), besov.value().sqrt()))
}

/// One row of a convergence study.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceRow {
    pub t: f64,
    pub l2_err: f64,
    pub besov_err: f64,
    pub sup_err: f64,
}

/// Errors `u(t) − u₀` on a strictly decreasing time grid.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// All three error columns nonincreasing as `t` decreases, up to slack.
    pub fn errors_nonincreasing(&self, slack: f64) -> bool {
        self.rows.windows(2).all(|w| {
            w[1].l2_err <= w[0].l2_err + slack
                && w[1].besov_err <= w[0].besov_err + slack
                && w[1].sup_err <= w[0].sup_err + slack
        })
    }
}

/// Track `u(t) → u₀` as `t` walks down the grid: `L²` error, coefficient
/// Besov error of order `lambda`, and the sup over the sample points.
pub fn convergence_study(
    u0: &HaarSpectrum,
    beta: FractionalOrder,
    lambda: Smoothness,
    times: &[f64],
    samples: &[Point],
    system: &HaarSystem,
    eigen: &EigenReport,
) -> Result<ConvergenceTable> {
    if lambda.value() <= beta.value() {
        return Err(Error::ParameterOrder {
            beta: beta.value(),
            lambda: lambda.value(),
        });
    }
    if times.is_empty() {
        return Err(Error::ParameterRange {
            name: "times",
            value: 0.0,
            range: "nonempty grid",
        });
    }
    for pair in times.windows(2) {
        if pair[1] >= pair[0] {
            return Err(Error::TimeGridRange {
                value: pair[1],
                range: "strictly decreasing",
            });
        }
    }
    system.check_spectrum(u0)?;
    eigen.check(system, beta)?;

    let besov_exponent = -2.0 * lambda.value();
    let rows = times
        .iter()
        .map(|&t| {
            let mut l2 = CompensatedSum::new();
            let mut besov = CompensatedSum::new();
            let diff = u0.map_coefficients(|i, c| c * (phase(eigen.lambda(i), t) - 1.0));
            for (idx, d) in diff.coefficients().iter().enumerate() {
                let d2 = d.norm_sqr();
                l2.add(d2);
                besov.add(d2 * (1.0 + system.base_measure(idx).powf(besov_exponent)));
            }
            let mut sup = 0.0f64;
            for &point in samples {
                let v = system.evaluate_spectrum_at(&diff, point)?;
                sup = sup.max(v.norm());
            }
            Ok(ConvergenceRow {
                t,
                l2_err: l2.value().sqrt(),
                besov_err: besov.value().sqrt(),
                sup_err: sup,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable { rows })
}

/// Truncated series value at a point: scales `0..=n_cut` only, evolved to
/// time `t`. The mean is not part of the series (mean-zero data assumed).
pub fn partial_sum(
    u0: &HaarSpectrum,
    t: f64,
    beta: FractionalOrder,
    n_cut: usize,
    x: Point,
    system: &HaarSystem,
    eigen: &EigenReport,
) -> Result<Complex64> {
    system.check_spectrum(u0)?;
    eigen.check(system, beta)?;
    let tree = system.tree();
    if n_cut + 1 > tree.depth() {
        return Err(Error::TruncationScale {
            got: n_cut,
            max: tree.depth().saturating_sub(1),
        });
    }
    let mut value = Complex64::ZERO;
    let mut cube = tree.leaf_cube(x);
    let mut chain = Vec::with_capacity(tree.depth());
    while let Some(parent) = tree.parent(cube) {
        chain.push((parent, tree.digit(cube)));
        cube = parent;
    }
    chain.reverse();
    for (ancestor, digit) in chain.into_iter().take(n_cut + 1) {
        let Some(first) = system.first_wavelet_of(ancestor) else {
            continue;
        };
        let count = tree.child_count(ancestor) - 1;
        for i in 0..count {
            let w = system.wavelet(first + i);
            if w.stencil[digit] != 0.0 {
                value += u0.coefficients()[first + i]
                    * phase(eigen.lambda(first + i), t)
                    * w.stencil[digit];
            }
        }
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::measure_eigenvalues;
    use crate::sampling;
    use crate::tree::DyadicTree;
    use crate::CellFunction;

    fn setup(depth: usize) -> (std::sync::Arc<DyadicTree>, HaarSystem, EigenReport) {
        let tree = DyadicTree::uniform(3, depth).unwrap();
        let system = HaarSystem::build(&tree);
        let eigen = measure_eigenvalues(&system, FractionalOrder::new(0.5).unwrap()).unwrap();
        (tree, system, eigen)
    }

    #[test]
    fn zero_time_is_identity() {
        let (_, system, eigen) = setup(3);
        let beta = FractionalOrder::new(0.5).unwrap();
        let u0 = sampling::decay_spectrum(&system, 0.7);
        let u = evolve(&u0, 0.0, beta, &system, &eigen).unwrap();
        for (a, b) in u.spectrum().coefficients().iter().zip(u0.coefficients()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_mode_keeps_modulus() {
        let (tree, system, eigen) = setup(3);
        let beta = FractionalOrder::new(0.5).unwrap();
        let u0 = HaarSpectrum::unit(&system, 4);
        let u = evolve(&u0, 1.7, beta, &system, &eigen).unwrap();
        let cells = system.synthesize(u.spectrum()).unwrap();
        let h = system.to_cell_function(4);
        for point in tree.points() {
            assert!(
                (cells.value_at(point).norm() - h.value_at(point).norm()).abs() < 1e-12,
                "modulus moved at {point:?}"
            );
        }
    }

    #[test]
    fn full_phase_revolution_returns_to_start() {
        let (_, system, eigen) = setup(3);
        let beta = FractionalOrder::new(0.5).unwrap();
        // A scale-1 wavelet spins at λ = m_h 3^{1/2}.
        let idx = 2;
        assert_eq!(system.wavelet(idx).scale, 1);
        let t = std::f64::consts::TAU / eigen.lambda(idx);
        let u0 = HaarSpectrum::unit(&system, idx);
        let u = evolve(&u0, t, beta, &system, &eigen).unwrap();
        for (a, b) in u.spectrum().coefficients().iter().zip(u0.coefficients()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn nonzero_mean_is_rejected() {
        let (_, system, eigen) = setup(2);
        let beta = FractionalOrder::new(0.5).unwrap();
        let mut u0 = HaarSpectrum::zero(&system);
        u0.mean = Complex64::new(0.5, 0.0);
        assert!(matches!(
            evolve(&u0, 1.0, beta, &system, &eigen),
            Err(Error::NonzeroMean { .. })
        ));
    }

    #[test]
    fn single_mode_residual_is_analytic() {
        let (_, system, eigen) = setup(3);
        let beta = FractionalOrder::new(0.5).unwrap();
        let lambda_h = eigen.lambda(0);
        let u0 = HaarSpectrum::unit(&system, 0);
        let t = 0.9;
        let tau = 1e-3;
        let rep = check_equation(
            &u0,
            t,
            beta,
            Smoothness::new(0.8).unwrap(),
            tau,
            &system,
            &eigen,
        )
        .unwrap();
        let expected = ((lambda_h * tau).sin() / tau - lambda_h).abs();
        assert!(
            (rep.l2 - expected).abs() < 1e-12,
            "residual {} vs analytic {expected}",
            rep.l2
        );
        assert!(!rep.step_too_coarse);
    }

    #[test]
    fn residual_shrinks_fourfold() {
        let (tree, system, eigen) = setup(4);
        let beta = FractionalOrder::new(0.5).unwrap();
        let mut rng = sampling::seeded_rng(7);
        let f = sampling::random_mean_zero(&tree, &mut rng);
        let u0 = system.analyze(&f);
        let rep = check_equation(
            &u0,
            0.8,
            beta,
            Smoothness::new(0.7).unwrap(),
            1e-3,
            &system,
            &eigen,
        )
        .unwrap();
        assert!((rep.l2_ratio - 4.0).abs() < 0.8, "ratio {}", rep.l2_ratio);
        assert!((rep.besov_ratio - 4.0).abs() < 0.8);
    }

    #[test]
    fn coarse_step_is_flagged() {
        let (_, system, eigen) = setup(3);
        let beta = FractionalOrder::new(0.5).unwrap();
        let u0 = sampling::decay_spectrum(&system, 0.7);
        let max_rate = eigen.entries().iter().map(|e| e.lambda).fold(0.0, f64::max);
        let tau = 1.2 / max_rate;
        let rep = check_equation(
            &u0,
            10.0 * tau,
            beta,
            Smoothness::new(0.8).unwrap(),
            tau,
            &system,
            &eigen,
        )
        .unwrap();
        assert!(rep.step_too_coarse);
    }

    #[test]
    fn convergence_single_mode_closed_form() {
        let (tree, system, eigen) = setup(3);
        let beta = FractionalOrder::new(0.3).unwrap();
        let eigen = measure_eigenvalues(&system, beta).unwrap();
        let u0 = HaarSpectrum::unit(&system, 3);
        let lambda_h = eigen.lambda(3);
        let times = [0.1, 0.01, 0.001, 0.0];
        let samples: Vec<Point> = tree.points().collect();
        let table = convergence_study(
            &u0,
            beta,
            Smoothness::new(0.6).unwrap(),
            &times,
            &samples,
            &system,
            &eigen,
        )
        .unwrap();
        for row in &table.rows {
            let expected = 2.0 * (lambda_h * row.t / 2.0).sin().abs();
            assert!(
                (row.l2_err - expected).abs() < 1e-12,
                "t = {}: {} vs {expected}",
                row.t,
                row.l2_err
            );
        }
        assert_eq!(table.rows.last().unwrap().sup_err, 0.0);
        assert!(table.errors_nonincreasing(1e-12));
    }

    #[test]
    fn convergence_rejects_bad_parameters() {
        let (tree, system, eigen) = setup(2);
        let u0 = HaarSpectrum::zero(&system);
        let samples: Vec<Point> = tree.points().collect();
        let err = convergence_study(
            &u0,
            FractionalOrder::new(0.7).unwrap(),
            Smoothness::new(0.6).unwrap(),
            &[0.1, 0.01],
            &samples,
            &system,
            &eigen,
        );
        assert!(matches!(err, Err(Error::ParameterOrder { .. })));

        let err = convergence_study(
            &u0,
            FractionalOrder::new(0.5).unwrap(),
            Smoothness::new(0.6).unwrap(),
            &[0.01, 0.1],
            &samples,
            &system,
            &eigen,
        );
        assert!(matches!(err, Err(Error::TimeGridRange { .. })));
    }

    #[test]
    fn partial_sum_full_depth_matches_synthesis() {
        let (tree, system, eigen) = setup(3);
        let beta = FractionalOrder::new(0.5).unwrap();
        let mut rng = sampling::seeded_rng(11);
        let f = sampling::random_mean_zero(&tree, &mut rng);
        let u0 = system.analyze(&f);
        let t = 0.4;
        let evolved = evolve(&u0, t, beta, &system, &eigen).unwrap();
        let cells = system.synthesize(evolved.spectrum()).unwrap();
        for point in tree.points().step_by(5) {
            let s = partial_sum(&u0, t, beta, tree.depth() - 1, point, &system, &eigen).unwrap();
            assert!((s - cells.value_at(point)).norm() < 1e-12);
        }
    }

    #[test]
    fn partial_sum_truncation_bound() {
        let (tree, system, eigen) = setup(2);
        let u0 = HaarSpectrum::zero(&system);
        let beta = FractionalOrder::new(0.5).unwrap();
        let err = partial_sum(&u0, 0.1, beta, 2, tree.point(0), &system, &eigen);
        assert!(matches!(err, Err(Error::TruncationScale { .. })));
    }

    #[test]
    fn unitarity_group_reversibility() {
        let (tree, system, eigen) = setup(3);
        let beta = FractionalOrder::new(0.5).unwrap();
        let mut rng = sampling::seeded_rng(3);
        let f = sampling::random_mean_zero(&tree, &mut rng);
        let u0 = system.analyze(&f);
        let n0 = u0.norm_sq();

        for t in [0.1, 1.0, 10.0] {
            let u = evolve(&u0, t, beta, &system, &eigen).unwrap();
            assert!((u.spectrum().norm_sq() - n0).abs() < 1e-12 * n0.max(1.0));
        }

        let s = 0.3;
        let t = 1.1;
        let two_step = evolve(
            &evolve(&u0, s, beta, &system, &eigen).unwrap().into_spectrum(),
            t,
            beta,
            &system,
            &eigen,
        )
        .unwrap();
        let one_step = evolve(&u0, s + t, beta, &system, &eigen).unwrap();
        for (a, b) in two_step
            .spectrum()
            .coefficients()
            .iter()
            .zip(one_step.spectrum().coefficients())
        {
            assert!((a - b).norm() < 1e-12);
        }

        let back = evolve(
            &evolve(&u0, t, beta, &system, &eigen).unwrap().into_spectrum(),
            -t,
            beta,
            &system,
            &eigen,
        )
        .unwrap();
        for (a, b) in back.spectrum().coefficients().iter().zip(u0.coefficients()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
