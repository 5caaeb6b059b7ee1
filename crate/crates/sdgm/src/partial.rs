//! Per-frequency inversion of spectral matrices, the absolute rescaled
//! inverse (partial spectral coherence magnitude), and two independent
//! partialisation routes used to cross-check the matrix-inverse path.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectra::{ComplexField, SpectralMatrixField};

/// Condition-number cutoff beyond which a ridge is applied.
pub const CONDITION_CUTOFF: f64 = 1e12;

/// Default ridge scale (multiplied by trace/d).
pub const DEFAULT_RIDGE_EPSILON: f64 = 1e-8;

/// Per-frequency inverses g = f^-1. Dropped frequencies hold `None`.
#[derive(Debug, Clone)]
pub struct InverseSpectralField {
    pub grid: crate::spectra::FrequencyGrid,
    pub d: usize,
    pub matrices: Vec<Option<DMatrix<Complex64>>>,
    /// Ridge actually added per frequency (0 when none).
    pub ridge_used: Vec<f64>,
    /// Frequencies that needed regularization.
    pub regularized: usize,
    /// Retained frequencies that stayed singular and were dropped.
    pub dropped: usize,
    /// Frequencies participating in downstream suprema.
    pub retained: usize,
}

fn hermitize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mh = m.adjoint();
    (m + mh).map(|v| v / 2.0)
}

fn frobenius(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn invert_one(
    m: &DMatrix<Complex64>,
    ridge_epsilon: f64,
) -> (Option<DMatrix<Complex64>>, f64) {
    let a = hermitize(m);
    let d = a.nrows();
    let inv = a.clone().try_inverse();
    let well_conditioned = inv
        .as_ref()
        .map(|g| frobenius(&a) * frobenius(g) <= CONDITION_CUTOFF)
        .unwrap_or(false);
    if well_conditioned {
        return (inv.map(|g| hermitize(&g)), 0.0);
    }
    let trace: f64 = (0..d).map(|i| a[(i, i)].re).sum();
    let ridge = ridge_epsilon * trace / d as f64;
    let mut b = a;
    for i in 0..d {
        b[(i, i)] += Complex64::new(ridge, 0.0);
    }
    (b.try_inverse().map(|g| hermitize(&g)), ridge)
}

/// Inverts every retained per-frequency matrix. Ill-conditioned matrices
/// (condition estimate above 1e12) get a ridge of epsilon * (trace/d) * I;
/// matrices singular even then are dropped from downstream suprema. More
/// than 10% dropped aborts with a diagnostics error.
pub fn invert_spectra(
    s: &SpectralMatrixField,
    ridge_epsilon: f64,
) -> Result<InverseSpectralField> {
    let grid = s.grid;
    let results: Vec<(Option<DMatrix<Complex64>>, f64)> = grid
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(p, q)| {
            if grid.exclude_dc() && grid.is_dc(p, q) {
                return (None, 0.0);
            }
            let idx = grid.index_of(p, q).unwrap();
            invert_one(&s.matrices[idx], ridge_epsilon)
        })
        .collect();

    let mut matrices = Vec::with_capacity(results.len());
    let mut ridge_used = Vec::with_capacity(results.len());
    let mut regularized = 0usize;
    let mut dropped = 0usize;
    let mut retained_total = 0usize;
    for ((p, q), (inv, ridge)) in grid.iter().zip(results) {
        let excluded = grid.exclude_dc() && grid.is_dc(p, q);
        if !excluded {
            retained_total += 1;
            if ridge > 0.0 {
                regularized += 1;
            }
            if inv.is_none() {
                dropped += 1;
            }
        }
        ridge_used.push(ridge);
        matrices.push(inv);
    }
    if dropped * 10 > retained_total {
        return Err(Error::Numerical(format!(
            "{dropped} of {retained_total} frequencies singular even after ridge; \
             the spectral estimate is unusable (try a larger smoothing half-width)"
        )));
    }
    Ok(InverseSpectralField {
        grid,
        d: s.d,
        matrices,
        ridge_used,
        regularized,
        dropped,
        retained: retained_total - dropped,
    })
}

/// Per-frequency symmetric matrices of |d_ij|, the absolute rescaled
/// inverse. Diagonal fixed at 1 by convention.
#[derive(Debug, Clone)]
pub struct PartialCoherenceField {
    pub grid: crate::spectra::FrequencyGrid,
    pub d: usize,
    pub values: Vec<Option<DMatrix<f64>>>,
}

/// |d_ij(w)| = |g_ij(w)| / sqrt(g_ii(w) g_jj(w)).
pub fn rescaled_inverse(g: &InverseSpectralField) -> Result<PartialCoherenceField> {
    let mut values = Vec::with_capacity(g.matrices.len());
    for ((p, q), inv) in g.grid.iter().zip(&g.matrices) {
        let Some(inv) = inv else {
            values.push(None);
            continue;
        };
        let d = g.d;
        let mut out = DMatrix::<f64>::identity(d, d);
        for i in 0..d {
            if inv[(i, i)].re <= 0.0 {
                return Err(Error::Numerical(format!(
                    "nonpositive inverse diagonal g[{i}][{i}] = {} at frequency (p={p}, q={q})",
                    inv[(i, i)].re
                )));
            }
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let v = inv[(i, j)].norm() / (inv[(i, i)].re * inv[(j, j)].re).sqrt();
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        values.push(Some(out));
    }
    Ok(PartialCoherenceField { grid: g.grid, d: g.d, values })
}

fn check_indices(d: usize, involved: &[usize]) -> Result<()> {
    for &k in involved {
        if k >= d {
            return Err(Error::Validation(format!("index {k} out of range (d={d})")));
        }
    }
    Ok(())
}

/// Schur-complement partialisation: f_ab|C = f_ab - f_aC f_CC^-1 f_Cb.
/// With an empty conditioning set this is just f_ab. The excluded DC
/// frequency is never partialised and carries its raw entry.
pub fn partial_spectrum_direct(
    s: &SpectralMatrixField,
    a: usize,
    b: usize,
    conditioning: &[usize],
    ridge_epsilon: f64,
) -> Result<ComplexField> {
    check_indices(s.d, &[a, b])?;
    check_indices(s.d, conditioning)?;
    if conditioning.contains(&a) || conditioning.contains(&b) {
        return Err(Error::Validation(
            "conditioning set must be disjoint from the target pair".into(),
        ));
    }
    let mut uniq = conditioning.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    if uniq.len() != conditioning.len() {
        return Err(Error::Validation("conditioning indices must be distinct".into()));
    }

    let grid = s.grid;
    let c = conditioning;
    let mut values = Vec::with_capacity(grid.len());
    for (p, q) in grid.iter() {
        let idx = grid.index_of(p, q).unwrap();
        let m = &s.matrices[idx];
        if c.is_empty() || (grid.exclude_dc() && grid.is_dc(p, q)) {
            values.push(m[(a, b)]);
            continue;
        }
        let block = DMatrix::from_fn(c.len(), c.len(), |r, s_| m[(c[r], c[s_])]);
        let (inv, _) = invert_one(&block, ridge_epsilon);
        let Some(inv) = inv else {
            return Err(Error::Numerical(format!(
                "singular conditioning block at frequency (p={p}, q={q})"
            )));
        };
        let row = DMatrix::from_fn(1, c.len(), |_, s_| m[(a, c[s_])]);
        let col = DMatrix::from_fn(c.len(), 1, |r, _| m[(c[r], b)]);
        let schur = (&row * inv * &col)[(0, 0)];
        values.push(m[(a, b)] - schur);
    }
    Ok(ComplexField { grid, values })
}

/// Convenience wrapper conditioning on all remaining components.
pub fn partial_cross_spectrum_direct(
    s: &SpectralMatrixField,
    i: usize,
    j: usize,
    ridge_epsilon: f64,
) -> Result<ComplexField> {
    if s.d < 3 {
        return Err(Error::Validation(
            "partialisation on the full remainder requires d >= 3".into(),
        ));
    }
    if i == j {
        return Err(Error::Validation("indices must differ".into()));
    }
    let rest: Vec<usize> = (0..s.d).filter(|&k| k != i && k != j).collect();
    partial_spectrum_direct(s, i, j, &rest, ridge_epsilon)
}

/// Stepwise partialisation: eliminates the conditioning indices one at a
/// time via f_ab|k = f_ab - f_ak f_kk^-1 f_kb, in the order given. The
/// result is order-independent; this is the independent oracle for the
/// matrix-inverse route.
pub fn recursive_partial(
    s: &SpectralMatrixField,
    i: usize,
    j: usize,
    conditioning: &[usize],
) -> Result<ComplexField> {
    check_indices(s.d, &[i, j])?;
    check_indices(s.d, conditioning)?;
    if conditioning.contains(&i) || conditioning.contains(&j) {
        return Err(Error::Validation(
            "conditioning set must be disjoint from the target pair".into(),
        ));
    }
    let mut uniq = conditioning.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    if uniq.len() != conditioning.len() {
        return Err(Error::Validation("conditioning indices must be distinct".into()));
    }

    let grid = s.grid;
    let mut values = Vec::with_capacity(grid.len());
    for (p, q) in grid.iter() {
        let idx = grid.index_of(p, q).unwrap();
        if conditioning.is_empty() || (grid.exclude_dc() && grid.is_dc(p, q)) {
            values.push(s.matrices[idx][(i, j)]);
            continue;
        }
        let mut m = s.matrices[idx].clone();
        let mut active: Vec<usize> = (0..s.d).collect();
        for &k in conditioning {
            let fkk = m[(k, k)];
            if fkk.norm() == 0.0 {
                return Err(Error::Numerical(format!(
                    "zero partial auto-spectrum while eliminating index {k} \
                     at frequency (p={p}, q={q})"
                )));
            }
            active.retain(|&x| x != k);
            let mut next = m.clone();
            for &r in &active {
                for &col in &active {
                    next[(r, col)] = m[(r, col)] - m[(r, k)] * m[(k, col)] / fkk;
                }
            }
            m = next;
        }
        values.push(m[(i, j)]);
    }
    Ok(ComplexField { grid, values })
}

/// Entry-wise supremum of |d_ij| over retained frequencies (DC and
/// dropped frequencies excluded). Diagonal set to 1.
pub fn sup_rescaled_inverse(field: &PartialCoherenceField) -> Result<DMatrix<f64>> {
    let d = field.d;
    let mut sup = DMatrix::<f64>::zeros(d, d);
    let mut any = false;
    for ((p, q), m) in field.grid.iter().zip(&field.values) {
        if field.grid.exclude_dc() && field.grid.is_dc(p, q) {
            continue;
        }
        let Some(m) = m else { continue };
        any = true;
        for i in 0..d {
            for j in (i + 1)..d {
                if m[(i, j)] > sup[(i, j)] {
                    sup[(i, j)] = m[(i, j)];
                    sup[(j, i)] = m[(i, j)];
                }
            }
        }
    }
    if !any {
        return Err(Error::Numerical("no retained frequencies".into()));
    }
    for i in 0..d {
        sup[(i, i)] = 1.0;
    }
    Ok(sup)
}
