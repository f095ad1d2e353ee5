//! The description-length objective `f(W, H) = L(W) + L(H) + L(E)` and its
//! gradients with the code model held fixed.
//!
//! With `W̃ᵢⱼ = −((α−1)/Wᵢⱼ − β)/ln 2`, `H̃ᵢⱼ = −((a−1)/Hᵢⱼ − b)/ln 2` and
//! `Ẽᵢⱼ = (Eᵢⱼ − μ)/(σ² ln 2)`, the gradients are
//!
//! ```text
//! ∇_W f = W̃ − Ẽ·Hᵀ        ∇_H f = H̃ − Wᵀ·Ẽ
//! ```
//!
//! The minus sign comes from `∂E/∂W = −H`. The probability clip
//! (`ρ·δ ≤ 1`) is ignored by the gradients.

use std::f64::consts::LN_2;

use ndarray::{Array2, Zip};

use crate::distfit::{code_length_gamma, code_length_gaussian, GammaParams};
use crate::error::{Error, Result};
use crate::matrix::{CodeModel, DataMatrix, DescriptionLength, FactorPair, ResidualMatrix};

/// `W̃`, `H̃` and `Ẽ` for one evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct TildeMatrices {
    pub w_tilde: Array2<f64>,
    pub h_tilde: Array2<f64>,
    pub e_tilde: Array2<f64>,
}

/// `E = V − W·H`.
pub fn residual(v: &DataMatrix, factors: &FactorPair) -> Result<ResidualMatrix> {
    factors.check_against(v.shape())?;
    Ok(ResidualMatrix(v.values() - &factors.product()))
}

fn as_slice(m: &Array2<f64>) -> std::borrow::Cow<'_, [f64]> {
    match m.as_slice() {
        Some(s) => std::borrow::Cow::Borrowed(s),
        None => std::borrow::Cow::Owned(m.iter().copied().collect()),
    }
}

/// Code length of each matrix under `model`, for factors and a precomputed residual.
pub fn description_length_parts(
    factors: &FactorPair,
    e: &ResidualMatrix,
    model: &CodeModel,
) -> Result<DescriptionLength> {
    let l_w = code_length_gamma(&as_slice(&factors.w), &model.gamma_w, model.delta)?;
    let l_h = code_length_gamma(&as_slice(&factors.h), &model.gamma_h, model.delta)?;
    let l_e = code_length_gaussian(&as_slice(e.values()), &model.gauss_e, model.delta)?;
    Ok(DescriptionLength::new(l_w, l_h, l_e))
}

/// `f(W, H)` in bits, broken down by matrix.
pub fn description_length(
    v: &DataMatrix,
    factors: &FactorPair,
    model: &CodeModel,
) -> Result<DescriptionLength> {
    let e = residual(v, factors)?;
    description_length_parts(factors, &e, model)
}

fn factor_tilde(x: &Array2<f64>, params: &GammaParams) -> Array2<f64> {
    let (shape_m1, rate) = (params.shape - 1.0, params.rate);
    x.mapv(|v| -(shape_m1 / v - rate) / LN_2)
}

fn check_shapes(factors: &FactorPair, e: &ResidualMatrix) -> Result<()> {
    factors.check_against(e.values().dim())
}

pub fn tilde_matrices(
    factors: &FactorPair,
    e: &ResidualMatrix,
    model: &CodeModel,
) -> TildeMatrices {
    TildeMatrices {
        w_tilde: factor_tilde(&factors.w, &model.gamma_w),
        h_tilde: factor_tilde(&factors.h, &model.gamma_h),
        e_tilde: e_tilde(e, model),
    }
}

fn centered(e: &ResidualMatrix, model: &CodeModel) -> Array2<f64> {
    let mu = model.gauss_e.mean;
    e.values().mapv(|x| x - mu)
}

/// `tilde − coupling/(σ² ln 2)`, dividing after the sum as the elementwise form does.
fn combine(mut tilde: Array2<f64>, coupling: &Array2<f64>, model: &CodeModel) -> Array2<f64> {
    let denom = LN_2 * model.gauss_e.std_dev * model.gauss_e.std_dev;
    Zip::from(&mut tilde).and(coupling).for_each(|t, &c| *t -= c / denom);
    tilde
}

fn e_tilde(e: &ResidualMatrix, model: &CodeModel) -> Array2<f64> {
    let mu = model.gauss_e.mean;
    let scale = 1.0 / (model.gauss_e.std_dev.powi(2) * LN_2);
    e.values().mapv(|x| (x - mu) * scale)
}

/// `∇_W f = W̃ − Ẽ·Hᵀ` (m×r).
pub fn grad_w(factors: &FactorPair, e: &ResidualMatrix, model: &CodeModel) -> Result<Array2<f64>> {
    check_shapes(factors, e)?;
    let coupling = centered(e, model).dot(&factors.h.t());
    Ok(combine(factor_tilde(&factors.w, &model.gamma_w), &coupling, model))
}

/// `∇_H f = H̃ − Wᵀ·Ẽ` (r×n).
pub fn grad_h(factors: &FactorPair, e: &ResidualMatrix, model: &CodeModel) -> Result<Array2<f64>> {
    check_shapes(factors, e)?;
    let coupling = factors.w.t().dot(&centered(e, model));
    let g = combine(factor_tilde(&factors.h, &model.gamma_h), &coupling, model);
    Ok(g)
}

/// `∂f/∂Wᵢⱼ = −[(α−1)/Wᵢⱼ − β]/ln 2 − Σₖ (Eᵢₖ − μ)Hⱼₖ / (σ² ln 2)`, one
/// entry at a time. Slow; kept as the reference for the matrix form.
pub fn grad_w_elementwise(
    factors: &FactorPair,
    e: &ResidualMatrix,
    model: &CodeModel,
) -> Result<Array2<f64>> {
    check_shapes(factors, e)?;
    let (alpha, beta) = (model.gamma_w.shape, model.gamma_w.rate);
    let (mu, sigma) = (model.gauss_e.mean, model.gauss_e.std_dev);
    let (m, r) = factors.w.dim();
    let n = factors.h.ncols();
    let ev = e.values();
    Ok(Array2::from_shape_fn((m, r), |(i, j)| {
        let mut sum = 0.0;
        for k in 0..n {
            sum += (ev[[i, k]] - mu) * factors.h[[j, k]];
        }
        -((alpha - 1.0) / factors.w[[i, j]] - beta) / LN_2 - sum / (LN_2 * sigma * sigma)
    }))
}

/// `∂f/∂Hᵢⱼ = −[(a−1)/Hᵢⱼ − b]/ln 2 − Σₖ (Eₖⱼ − μ)Wₖᵢ / (σ² ln 2)`.
pub fn grad_h_elementwise(
    factors: &FactorPair,
    e: &ResidualMatrix,
    model: &CodeModel,
) -> Result<Array2<f64>> {
    check_shapes(factors, e)?;
    let (a, b) = (model.gamma_h.shape, model.gamma_h.rate);
    let (mu, sigma) = (model.gauss_e.mean, model.gauss_e.std_dev);
    let (r, n) = factors.h.dim();
    let m = factors.w.nrows();
    let ev = e.values();
    Ok(Array2::from_shape_fn((r, n), |(i, j)| {
        let mut sum = 0.0;
        for k in 0..m {
            sum += (ev[[k, j]] - mu) * factors.w[[k, i]];
        }
        -((a - 1.0) / factors.h[[i, j]] - b) / LN_2 - sum / (LN_2 * sigma * sigma)
    }))
}

/// Largest relative entrywise difference between two gradients, ignoring
/// entries where both are below `floor` in magnitude.
pub fn max_relative_difference(a: &Array2<f64>, b: &Array2<f64>, floor: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let mut worst = 0.0f64;
    Zip::from(a).and(b).for_each(|&x, &y| {
        let scale = x.abs().max(y.abs());
        if scale > floor {
            worst = worst.max((x - y).abs() / scale);
        }
    });
    Ok(worst)
}
