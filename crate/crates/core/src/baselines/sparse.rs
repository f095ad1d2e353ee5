//! Hoyer's sparseness measure, its norm-constrained projection and
//! sparseness-constrained NMF.

use ndarray::{Array2, ArrayViewMut1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mu::{mu_update_h, mu_update_w, reconstruction_error};
use super::BaselineResult;
use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, FactorPair};
use crate::solver::{auto_delta, random_uniform_factors};

/// Sparseness targets per factor: columns of `W`, rows of `H`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SparsenessTarget {
    pub sparseness_w: Option<f64>,
    pub sparseness_h: Option<f64>,
}

impl SparsenessTarget {
    pub fn validate(&self) -> Result<()> {
        if self.sparseness_w.is_none() && self.sparseness_h.is_none() {
            return Err(Error::InvalidConfig(
                "at least one sparseness target is required".into(),
            ));
        }
        for s in [self.sparseness_w, self.sparseness_h].into_iter().flatten() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidConfig(format!(
                    "sparseness must lie in [0, 1], got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// `s(x) = (√n − ‖x‖₁/‖x‖₂) / (√n − 1)`: 1 for a single non-zero, 0 for a
/// constant vector.
pub fn hoyer_sparseness(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::LengthOne);
    }
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    if l1 == 0.0 {
        return Err(Error::ZeroVector);
    }
    let first = x[0];
    if x.iter().all(|&v| v == first) {
        return Ok(0.0);
    }
    let l2 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let root_n = (x.len() as f64).sqrt();
    Ok(((root_n - l1 / l2) / (root_n - 1.0)).clamp(0.0, 1.0))
}

/// L1 norm that gives a length-`n` vector with L2 norm `l2` sparseness `s`.
pub fn l1_for_sparseness(n: usize, l2: f64, s: f64) -> f64 {
    let root_n = (n as f64).sqrt();
    l2 * (root_n - (root_n - 1.0) * s)
}

/// Closest non-negative vector to `x` with `‖·‖₁ = l1` and `‖·‖₂ = l2`.
///
/// Alternates between the L1 hyperplane and the L2 sphere, pinning negative
/// coordinates at zero, until the point is non-negative. Each pass pins at
/// least one more coordinate, so at most `n` passes are needed.
pub fn project_sparseness(x: &[f64], l1: f64, l2: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::LengthOne);
    }
    let infeasible = Error::InfeasibleTarget { l1, l2, n };
    let tol = 1e-12 * l1.abs().max(l2.abs());
    if !(l1 > 0.0 && l2 > 0.0) || l1 < l2 - tol || l1 > l2 * (n as f64).sqrt() + tol {
        return Err(infeasible);
    }

    let shift = (l1 - x.iter().sum::<f64>()) / n as f64;
    let mut s: Vec<f64> = x.iter().map(|&v| v + shift).collect();
    let mut zeroed = vec![false; n];

    for _ in 0..=n {
        let free = zeroed.iter().filter(|z| !**z).count();
        if free == 0 {
            return Err(infeasible);
        }
        let mid_value = l1 / free as f64;
        let mid = |i: usize| if zeroed[i] { 0.0 } else { mid_value };

        // ‖m + α(s − m)‖² = l2²  →  aα² + 2bα + c = 0, take the non-negative root.
        let (mut a, mut b, mut c) = (0.0, 0.0, -l2 * l2);
        for (i, &si) in s.iter().enumerate() {
            let (mi, di) = (mid(i), si - mid(i));
            a += di * di;
            b += mi * di;
            c += mi * mi;
        }
        if a <= f64::EPSILON * l2 * l2 {
            // s already sits at the midpoint; feasible only if that point has the right L2.
            if c.abs() > 1e-9 * l2 * l2 {
                return Err(infeasible);
            }
            for (i, si) in s.iter_mut().enumerate() {
                *si = mid(i);
            }
            return Ok(s);
        }
        let disc = (b * b - a * c).max(0.0);
        let alpha = (-b + disc.sqrt()) / a;
        for (i, si) in s.iter_mut().enumerate() {
            *si = mid(i) + alpha * (*si - mid(i));
        }

        if s.iter().all(|&v| v >= 0.0) {
            return Ok(s);
        }
        for (i, si) in s.iter_mut().enumerate() {
            if *si < 0.0 {
                zeroed[i] = true;
                *si = 0.0;
            }
        }
        let free = zeroed.iter().filter(|z| !**z).count();
        let excess = (s.iter().sum::<f64>() - l1) / free as f64;
        for (i, si) in s.iter_mut().enumerate() {
            if !zeroed[i] {
                *si -= excess;
            }
        }
    }
    Err(Error::NoConvergence {
        what: "sparseness projection",
        iterations: n + 1,
    })
}

fn l2_norm(x: &ArrayViewMut1<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Project each lane (column of `W` or row of `H`) onto sparseness `s`.
/// With `unit_norm` the lane is rescaled to unit L2 norm, otherwise its L2
/// norm is kept.
fn project_lanes(m: &mut Array2<f64>, axis: Axis, s: f64, unit_norm: bool) -> Result<()> {
    for mut lane in m.lanes_mut(axis) {
        let len = lane.len();
        let l2 = if unit_norm { 1.0 } else { l2_norm(&lane) };
        if l2 == 0.0 {
            return Err(Error::ZeroVector);
        }
        let l1 = l1_for_sparseness(len, l2, s);
        let input: Vec<f64> = lane.iter().copied().collect();
        let out = project_sparseness(&input, l1, l2)?;
        for (dst, src) in lane.iter_mut().zip(out) {
            *dst = src;
        }
    }
    Ok(())
}

fn normalize_rows(h: &mut Array2<f64>, w: &mut Array2<f64>) {
    for (k, mut row) in h.rows_mut().into_iter().enumerate() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
            w.column_mut(k).mapv_inplace(|v| v * norm);
        }
    }
}

const MAX_HALVINGS: usize = 60;
const STEP_GROWTH: f64 = 1.2;

/// Projected gradient step with backtracking. Returns the accepted error, or
/// `None` when no step size lowered the error (factors left untouched).
fn projected_step(
    v: &Array2<f64>,
    f: &mut FactorPair,
    on_w: bool,
    s: f64,
    step: &mut f64,
    current: f64,
) -> Result<Option<f64>> {
    let residual = f.product() - v;
    let grad = if on_w {
        residual.dot(&f.h.t())
    } else {
        f.w.t().dot(&residual)
    };
    for _ in 0..MAX_HALVINGS {
        let mut trial = f.clone();
        if on_w {
            trial.w.scaled_add(-*step, &grad);
            project_lanes(&mut trial.w, Axis(0), s, false)?;
        } else {
            trial.h.scaled_add(-*step, &grad);
            project_lanes(&mut trial.h, Axis(1), s, true)?;
        }
        let err = reconstruction_error(v, &trial);
        if err.is_finite() && err <= current {
            *f = trial;
            *step *= STEP_GROWTH;
            return Ok(Some(err));
        }
        *step /= 2.0;
    }
    Ok(None)
}

/// Sparseness-constrained NMF from a seeded uniform start.
pub fn snmf(
    v: &DataMatrix,
    rank: usize,
    targets: SparsenessTarget,
    iterations: usize,
    seed: u64,
) -> Result<BaselineResult> {
    if rank == 0 {
        return Err(Error::InvalidConfig("rank must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = random_uniform_factors(v.shape(), rank, v.mean(), auto_delta(v) / 2.0, &mut rng);
    snmf_from(v, init, targets, iterations)
}

/// Sparseness-constrained NMF from the given factors.
///
/// Constrained factors take a projected gradient step on `½‖V − WH‖²`, with
/// the step halved until the error does not increase; unconstrained factors
/// take the multiplicative update. Columns of `W` keep their L2 norm, rows of
/// a constrained `H` are held at unit L2 norm.
pub fn snmf_from(
    v: &DataMatrix,
    init: FactorPair,
    targets: SparsenessTarget,
    iterations: usize,
) -> Result<BaselineResult> {
    targets.validate()?;
    init.check_against(v.shape())?;
    let vals = v.values();
    let mut f = init;

    if let Some(s) = targets.sparseness_h {
        normalize_rows(&mut f.h, &mut f.w);
        project_lanes(&mut f.h, Axis(1), s, true)?;
    }
    if let Some(s) = targets.sparseness_w {
        project_lanes(&mut f.w, Axis(0), s, false)?;
    }

    let initial_step = 1e-3 * v.mean().max(f64::MIN_POSITIVE);
    let (mut step_w, mut step_h) = (initial_step, initial_step);
    let mut err = reconstruction_error(vals, &f);
    let mut trace = Vec::with_capacity(iterations + 1);
    trace.push(err);

    for it in 1..=iterations {
        match targets.sparseness_h {
            Some(s) => {
                if let Some(e) = projected_step(vals, &mut f, false, s, &mut step_h, err)? {
                    err = e;
                }
            }
            None => {
                mu_update_h(vals, &mut f);
                err = reconstruction_error(vals, &f);
            }
        }
        match targets.sparseness_w {
            Some(s) => {
                if let Some(e) = projected_step(vals, &mut f, true, s, &mut step_w, err)? {
                    err = e;
                }
            }
            None => {
                mu_update_w(vals, &mut f);
                err = reconstruction_error(vals, &f);
            }
        }
        if !err.is_finite() {
            return Err(Error::Diverged { iteration: it });
        }
        trace.push(err);
    }
    Ok(BaselineResult {
        factors: f,
        error_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::mu_nmf;
    use crate::matrix::validate_nonneg;
    use rand::Rng;

    fn norms(x: &[f64]) -> (f64, f64) {
        (x.iter().sum(), x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    #[test]
    fn sparseness_endpoints_and_midpoint() {
        assert_eq!(hoyer_sparseness(&[0.0, 0.0, 5.0]).unwrap(), 1.0);
        assert_eq!(hoyer_sparseness(&[2.0, 2.0, 2.0, 2.0]).unwrap(), 0.0);
        let expected = (3f64.sqrt() - 2.0 / 2f64.sqrt()) / (3f64.sqrt() - 1.0);
        let got = hoyer_sparseness(&[1.0, 0.0, 1.0]).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.434_174).abs() < 1e-6);
    }

    #[test]
    fn sparseness_errors() {
        assert_eq!(hoyer_sparseness(&[3.0]), Err(Error::LengthOne));
        assert_eq!(hoyer_sparseness(&[0.0, 0.0]), Err(Error::ZeroVector));
    }

    #[test]
    fn projection_fixed_point() {
        let x = [0.2, 0.0, 1.3, 0.7];
        let (l1, l2) = norms(&x);
        let out = project_sparseness(&x, l1, l2).unwrap();
        for (a, b) in out.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn projection_two_dimensional_unique_point() {
        // Grid search over the non-negative quarter circle: the only point with
        // L1 = √2 on the unit circle is the diagonal.
        let target = std::f64::consts::SQRT_2;
        let best = (0..=100_000)
            .map(|k| {
                let t = k as f64 / 100_000.0 * std::f64::consts::FRAC_PI_2;
                (t, (t.cos() + t.sin() - target).abs())
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let oracle = [best.0.cos(), best.0.sin()];
        for x in [[3.0, 0.1], [0.01, 0.02], [5.0, 5.0]] {
            let out = project_sparseness(&x, target, 1.0).unwrap();
            for (a, b) in out.iter().zip(oracle) {
                assert!((a - b).abs() < 1e-4);
                assert!((a - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_infeasible() {
        assert!(matches!(
            project_sparseness(&[1.0, 1.0, 1.0], 0.5, 1.0),
            Err(Error::InfeasibleTarget { .. })
        ));
        assert!(matches!(
            project_sparseness(&[1.0, 1.0, 1.0], 2.0, 1.0),
            Err(Error::InfeasibleTarget { .. })
        ));
        assert_eq!(project_sparseness(&[1.0], 1.0, 1.0), Err(Error::LengthOne));
    }

    #[test]
    fn projection_one_sparse_target() {
        let out = project_sparseness(&[0.1, 0.9, 0.3], 2.0, 2.0).unwrap();
        assert!((out[1] - 2.0).abs() < 1e-12);
        assert!(out[0] < 1e-12 && out[2] < 1e-12);
    }

    #[test]
    fn snmf_holds_w_sparseness() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let v = validate_nonneg(Array2::from_shape_simple_fn((15, 12), || rng.random_range(0.0..1.0)))
            .unwrap();
        let targets = SparsenessTarget {
            sparseness_w: Some(0.8),
            sparseness_h: None,
        };
        let out = snmf(&v, 3, targets, 200, 4).unwrap();
        for col in out.factors.w.columns() {
            let s = hoyer_sparseness(&col.to_vec()).unwrap();
            assert!((0.799..=0.801).contains(&s), "{s}");
        }
        assert!(out.error_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn snmf_holds_h_sparseness() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let v = validate_nonneg(Array2::from_shape_simple_fn((10, 14), || rng.random_range(0.0..1.0)))
            .unwrap();
        let targets = SparsenessTarget {
            sparseness_w: None,
            sparseness_h: Some(0.5),
        };
        let out = snmf(&v, 2, targets, 100, 1).unwrap();
        for row in out.factors.h.rows() {
            let s = hoyer_sparseness(&row.to_vec()).unwrap();
            assert!((s - 0.5).abs() < 1e-6, "{s}");
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn snmf_without_h_target_uses_mu_for_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let v = validate_nonneg(Array2::from_shape_simple_fn((6, 5), || rng.random_range(0.1..1.0)))
            .unwrap();
        let init = mu_nmf(&v, 2, 0, 2).unwrap().factors;
        let targets = SparsenessTarget {
            sparseness_w: Some(0.3),
            sparseness_h: None,
        };
        // H is updated before W within an iteration, against the projected W.
        let mut expected = init.clone();
        project_lanes(&mut expected.w, Axis(0), 0.3, false).unwrap();
        mu_update_h(v.values(), &mut expected);
        let out = snmf_from(&v, init, targets, 1).unwrap();
        assert_eq!(out.factors.h, expected.h);
    }

    #[test]
    fn snmf_rejects_missing_targets() {
        let v = validate_nonneg(Array2::ones((4, 4))).unwrap();
        assert!(snmf(&v, 2, SparsenessTarget::default(), 5, 0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn projection_meets_both_norms(
                x in proptest::collection::vec(-1.0..2.0f64, 2..30),
                s in 0.0..1.0f64,
                l2 in 0.1..10.0f64,
            ) {
                let l1 = l1_for_sparseness(x.len(), l2, s);
                let out = project_sparseness(&x, l1, l2).unwrap();
                let (got_l1, got_l2) = norms(&out);
                prop_assert!(out.iter().all(|&v| v >= 0.0));
                prop_assert!((got_l1 - l1).abs() <= 1e-8 * l1.max(1.0));
                prop_assert!((got_l2 - l2).abs() <= 1e-8 * l2.max(1.0));
            }

            #[test]
            fn sparseness_is_scale_invariant(
                x in proptest::collection::vec(0.0..5.0f64, 2..20),
                c in 1e-3..1e3f64,
            ) {
                prop_assume!(x.iter().any(|&v| v > 0.0));
                let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
                let a = hoyer_sparseness(&x).unwrap();
                let b = hoyer_sparseness(&scaled).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
