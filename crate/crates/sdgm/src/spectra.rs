//! Discrete Fourier transforms of event locations, raw and smoothed
//! periodograms, and per-frequency spectral matrix assembly.
//!
//! Frequencies live on a half-plane lattice (p, q) with p >= 0; the other
//! half is redundant by conjugate symmetry of the DFT. On unit-square
//! patterns the index (p, q) maps to the angular frequency (2*pi*p, 2*pi*q).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pattern::MultiTypePointPattern;

/// Half-plane frequency lattice: p in [0, P], q in [-P, P-1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencyGrid {
    p_max: i32,
    exclude_dc: bool,
}

impl FrequencyGrid {
    pub const DEFAULT_P: u32 = 16;

    pub fn new(p_max: u32, exclude_dc: bool) -> Result<Self> {
        if p_max < 1 {
            return Err(Error::Config("grid P must be at least 1".into()));
        }
        Ok(Self { p_max: p_max as i32, exclude_dc })
    }

    pub fn p_max(&self) -> i32 {
        self.p_max
    }

    pub fn exclude_dc(&self) -> bool {
        self.exclude_dc
    }

    /// Lattice size (P+1) * 2P, DC included.
    pub fn len(&self) -> usize {
        ((self.p_max + 1) * 2 * self.p_max) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Indices in dump order: p ascending, then q ascending.
    pub fn iter(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        let p_max = self.p_max;
        (0..=p_max).flat_map(move |p| (-p_max..p_max).map(move |q| (p, q)))
    }

    pub fn contains(&self, p: i32, q: i32) -> bool {
        (0..=self.p_max).contains(&p) && (-self.p_max..self.p_max).contains(&q)
    }

    pub fn index_of(&self, p: i32, q: i32) -> Option<usize> {
        if self.contains(p, q) {
            Some((p * 2 * self.p_max + (q + self.p_max)) as usize)
        } else {
            None
        }
    }

    pub fn is_dc(&self, p: i32, q: i32) -> bool {
        p == 0 && q == 0
    }

    /// Angular frequency for unit-square patterns.
    pub fn omega(&self, p: i32, q: i32) -> (f64, f64) {
        (2.0 * PI * p as f64, 2.0 * PI * q as f64)
    }
}

/// Complex values over a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: FrequencyGrid,
    pub values: Vec<Complex64>,
}

/// Real values over a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub grid: FrequencyGrid,
    pub values: Vec<f64>,
}

impl ComplexField {
    pub fn value_at(&self, p: i32, q: i32) -> Option<Complex64> {
        self.grid.index_of(p, q).map(|i| self.values[i])
    }

    /// Value on the full plane, using conjugate symmetry for p < 0.
    pub fn extended_value(&self, p: i32, q: i32) -> Option<Complex64> {
        if let Some(i) = self.grid.index_of(p, q) {
            Some(self.values[i])
        } else {
            self.grid.index_of(-p, -q).map(|i| self.values[i].conj())
        }
    }
}

impl RealField {
    pub fn value_at(&self, p: i32, q: i32) -> Option<f64> {
        self.grid.index_of(p, q).map(|i| self.values[i])
    }

    fn extended_value(&self, p: i32, q: i32) -> Option<f64> {
        self.grid
            .index_of(p, q)
            .or_else(|| self.grid.index_of(-p, -q))
            .map(|i| self.values[i])
    }
}

fn require_unit_square(pattern: &MultiTypePointPattern) -> Result<()> {
    if !pattern.window().is_unit_square() {
        return Err(Error::Contract(
            "pattern must be rescaled to the unit square before spectral analysis".into(),
        ));
    }
    Ok(())
}

/// DFT of the locations of one type: F(p,q) = sum_k exp(-2*pi*i*(p x_k + q y_k)).
pub fn dft(
    pattern: &MultiTypePointPattern,
    type_index: usize,
    grid: FrequencyGrid,
) -> Result<ComplexField> {
    require_unit_square(pattern)?;
    if type_index >= pattern.dimension() {
        return Err(Error::Validation(format!(
            "type index {type_index} out of range (d={})",
            pattern.dimension()
        )));
    }
    let locations = pattern.locations_of(type_index);
    let p_max = grid.p_max();
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (x, y) in &locations {
        // per-event phase tables in p and q keep this O(n * P) transcendentals
        let ex: Vec<Complex64> = (0..=p_max)
            .map(|p| Complex64::from_polar(1.0, -2.0 * PI * p as f64 * x))
            .collect();
        let ey: Vec<Complex64> = (-p_max..p_max)
            .map(|q| Complex64::from_polar(1.0, -2.0 * PI * q as f64 * y))
            .collect();
        for p in 0..=p_max {
            let base = (p * 2 * p_max) as usize;
            let exp = ex[p as usize];
            for (qi, eq) in ey.iter().enumerate() {
                values[base + qi] += exp * eq;
            }
        }
    }
    Ok(ComplexField { grid, values })
}

/// Auto-periodogram |F|^2.
pub fn auto_periodogram(f: &ComplexField) -> RealField {
    RealField {
        grid: f.grid,
        values: f.values.iter().map(|v| v.norm_sqr()).collect(),
    }
}

/// Cross-periodogram F_i * conj(F_j).
pub fn cross_periodogram(f_i: &ComplexField, f_j: &ComplexField) -> Result<ComplexField> {
    if f_i.grid != f_j.grid {
        return Err(Error::Contract("cross_periodogram: grid mismatch".into()));
    }
    Ok(ComplexField {
        grid: f_i.grid,
        values: f_i
            .values
            .iter()
            .zip(&f_j.values)
            .map(|(a, b)| a * b.conj())
            .collect(),
    })
}

/// Co-, quadrature-, amplitude- and phase-spectrum of a cross field.
/// The phase is masked (None) where the amplitude is negligible.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectrumDecomposition {
    pub co: RealField,
    pub quad: RealField,
    pub amplitude: RealField,
    pub phase: Vec<Option<f64>>,
}

/// Relative amplitude below which the phase is treated as undefined.
pub const PHASE_TOLERANCE: f64 = 1e-12;

/// Splits a cross field f = C - i*Q into Cartesian and polar parts.
pub fn decompose_cross(f: &ComplexField) -> CrossSpectrumDecomposition {
    let co: Vec<f64> = f.values.iter().map(|v| v.re).collect();
    let quad: Vec<f64> = f.values.iter().map(|v| -v.im).collect();
    let amplitude: Vec<f64> = f.values.iter().map(|v| v.norm()).collect();
    let max_amp = amplitude.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = PHASE_TOLERANCE * max_amp;
    let phase = f
        .values
        .iter()
        .zip(&amplitude)
        .map(|(v, &a)| {
            if a <= cutoff {
                None
            } else {
                // phase in (-pi, pi]
                let mut phi = v.arg();
                if phi <= -PI {
                    phi = PI;
                }
                Some(phi)
            }
        })
        .collect();
    CrossSpectrumDecomposition {
        co: RealField { grid: f.grid, values: co },
        quad: RealField { grid: f.grid, values: quad },
        amplitude: RealField { grid: f.grid, values: amplitude },
        phase,
    }
}

/// Daniell box smoothing over frequency-index space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmoothingSpec {
    pub half_width: usize,
}

impl SmoothingSpec {
    pub fn raw() -> Self {
        Self { half_width: 0 }
    }

    /// Smallest h whose box carries at least d+1 periodogram ordinates,
    /// the rank floor for invertible smoothed matrices.
    pub fn min_half_width(d: usize) -> usize {
        let mut h = 0usize;
        while (2 * h + 1) * (2 * h + 1) < d + 1 {
            h += 1;
        }
        h
    }

    /// Default half-width: the rank floor widened to P/4 so that suprema
    /// over the whole grid are stable enough for edge decisions.
    pub fn auto_half_width(d: usize, p_max: u32) -> usize {
        Self::min_half_width(d).max(((p_max as f64) / 4.0).round() as usize)
    }

    pub fn ordinates(&self) -> usize {
        (2 * self.half_width + 1) * (2 * self.half_width + 1)
    }
}

fn box_mean<T, F>(grid: FrequencyGrid, p: i32, q: i32, h: i32, lookup: F) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Div<f64, Output = T> + Default + Copy,
    F: Fn(i32, i32) -> Option<T>,
{
    let mut acc = T::default();
    let mut count = 0usize;
    for dp in -h..=h {
        for dq in -h..=h {
            let (pp, qq) = (p + dp, q + dq);
            if grid.exclude_dc() && pp == 0 && qq == 0 {
                continue;
            }
            if let Some(v) = lookup(pp, qq) {
                acc = acc + v;
                count += 1;
            }
        }
    }
    acc / count as f64
}

/// Box average of a complex field, extended across p < 0 by conjugate
/// symmetry and truncated at lattice edges (renormalized by the number of
/// actual contributors). The DC ordinate is skipped as contributor and
/// target when the grid excludes it; its raw value is carried through.
pub fn smooth_complex_field(field: &ComplexField, spec: SmoothingSpec) -> ComplexField {
    if spec.half_width == 0 {
        return field.clone();
    }
    let grid = field.grid;
    let h = spec.half_width as i32;
    let values = grid
        .iter()
        .map(|(p, q)| {
            if grid.exclude_dc() && grid.is_dc(p, q) {
                return field.value_at(p, q).unwrap();
            }
            box_mean(grid, p, q, h, |pp, qq| field.extended_value(pp, qq))
        })
        .collect();
    ComplexField { grid, values }
}

/// Same smoothing for real fields (the mirrored value is identical).
pub fn smooth_real_field(field: &RealField, spec: SmoothingSpec) -> RealField {
    if spec.half_width == 0 {
        return field.clone();
    }
    let grid = field.grid;
    let h = spec.half_width as i32;
    let values = grid
        .iter()
        .map(|(p, q)| {
            if grid.exclude_dc() && grid.is_dc(p, q) {
                return field.value_at(p, q).unwrap();
            }
            box_mean(grid, p, q, h, |pp, qq| field.extended_value(pp, qq))
        })
        .collect();
    RealField { grid, values }
}

/// Per-frequency d x d Hermitian spectral matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrixField {
    pub grid: FrequencyGrid,
    pub d: usize,
    pub matrices: Vec<DMatrix<Complex64>>,
    pub smoothing: SmoothingSpec,
}

impl SpectralMatrixField {
    /// Wraps externally built matrices; used by tests and the oracle paths.
    pub fn from_matrices(
        grid: FrequencyGrid,
        d: usize,
        matrices: Vec<DMatrix<Complex64>>,
        smoothing: SmoothingSpec,
    ) -> Result<Self> {
        if matrices.len() != grid.len() {
            return Err(Error::Contract(format!(
                "expected {} matrices, got {}",
                grid.len(),
                matrices.len()
            )));
        }
        if matrices.iter().any(|m| m.nrows() != d || m.ncols() != d) {
            return Err(Error::Contract("matrix dimension mismatch".into()));
        }
        Ok(Self { grid, d, matrices, smoothing })
    }
}

/// Assembles the smoothed spectral matrix field of a unit-square pattern:
/// entry (i, j) is the Daniell-smoothed cross-periodogram of types i and j.
pub fn spectral_matrix(
    pattern: &MultiTypePointPattern,
    grid: FrequencyGrid,
    spec: SmoothingSpec,
) -> Result<SpectralMatrixField> {
    require_unit_square(pattern)?;
    let d = pattern.dimension();
    if spec.ordinates() < d + 1 {
        return Err(Error::Config(format!(
            "smoothing half-width {} gives {} ordinates, fewer than d+1={}; use h >= {}",
            spec.half_width,
            spec.ordinates(),
            d + 1,
            SmoothingSpec::min_half_width(d)
        )));
    }

    let dfts: Vec<ComplexField> = (0..d)
        .map(|i| dft(pattern, i, grid))
        .collect::<Result<_>>()?;

    // smoothed upper-triangle entry fields, computed pairwise in parallel
    let pairs: Vec<(usize, usize)> =
        (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let smoothed: Vec<((usize, usize), ComplexField)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let raw = cross_periodogram(&dfts[i], &dfts[j]).expect("same grid");
            ((i, j), smooth_complex_field(&raw, spec))
        })
        .collect();

    let mut matrices = vec![DMatrix::<Complex64>::zeros(d, d); grid.len()];
    for ((i, j), field) in &smoothed {
        for (k, v) in field.values.iter().enumerate() {
            if i == j {
                // diagonals are real by construction; drop rounding dust
                matrices[k][(*i, *i)] = Complex64::new(v.re, 0.0);
            } else {
                matrices[k][(*i, *j)] = *v;
                matrices[k][(*j, *i)] = v.conj();
            }
        }
    }
    Ok(SpectralMatrixField { grid, d, matrices, smoothing: spec })
}

/// Polar summary of a real field: unit-width rings over ||(p, q)||,
/// DC excluded. Returns (ring centre, ring mean) sorted by radius.
pub fn radial_spectrum(field: &RealField) -> Vec<(f64, f64)> {
    let mut sums: std::collections::BTreeMap<i64, (f64, usize)> = Default::default();
    for (p, q) in field.grid.iter() {
        if field.grid.is_dc(p, q) {
            continue;
        }
        let r = ((p * p + q * q) as f64).sqrt();
        let ring = r.round() as i64;
        let e = sums.entry(ring).or_insert((0.0, 0));
        e.0 += field.value_at(p, q).unwrap();
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(ring, (sum, n))| (ring as f64, sum / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{Event, MultiTypePointPattern, ObservationWindow};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_pattern(points: &[(f64, f64)]) -> MultiTypePointPattern {
        let events = points
            .iter()
            .map(|&(x, y)| Event { x, y, type_index: 0 })
            .collect();
        MultiTypePointPattern::new(ObservationWindow::unit_square(), vec!["a".into()], events)
            .unwrap()
    }

    fn two_type_pattern(a: &[(f64, f64)], b: &[(f64, f64)]) -> MultiTypePointPattern {
        let mut events: Vec<Event> =
            a.iter().map(|&(x, y)| Event { x, y, type_index: 0 }).collect();
        events.extend(b.iter().map(|&(x, y)| Event { x, y, type_index: 1 }));
        MultiTypePointPattern::new(
            ObservationWindow::unit_square(),
            vec!["a".into(), "b".into()],
            events,
        )
        .unwrap()
    }

    fn grid4() -> FrequencyGrid {
        FrequencyGrid::new(4, true).unwrap()
    }

    #[test]
    fn grid_shape() {
        let g = FrequencyGrid::new(16, true).unwrap();
        assert_eq!(g.len(), 544);
        assert_eq!(g.iter().count(), 544);
        assert_eq!(g.iter().filter(|&(p, q)| p == 0 && q == 0).count(), 1);
        assert_eq!(g.omega(1, -2), (2.0 * PI, -4.0 * PI));
    }

    #[test]
    fn dft_single_point_at_origin_is_one_everywhere() {
        let f = dft(&unit_pattern(&[(0.0, 0.0)]), 0, grid4()).unwrap();
        for v in &f.values {
            assert_relative_eq!(v.re, 1.0, epsilon = 1e-12);
            assert_relative_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dft_roots_of_unity() {
        let f = dft(&unit_pattern(&[(0.0, 0.0), (0.5, 0.5)]), 0, grid4()).unwrap();
        let f11 = f.value_at(1, 1).unwrap();
        assert_relative_eq!(f11.re, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f11.im, 0.0, epsilon = 1e-12);
        let f10 = f.value_at(1, 0).unwrap();
        assert!(f10.norm() < 1e-12);
    }

    #[test]
    fn dft_dc_is_count() {
        let pts: Vec<(f64, f64)> = (0..7).map(|k| (k as f64 / 7.0, k as f64 / 11.0)).collect();
        let f = dft(&unit_pattern(&pts), 0, grid4()).unwrap();
        assert_relative_eq!(f.value_at(0, 0).unwrap().re, 7.0, epsilon = 1e-12);
    }

    #[test]
    fn dft_requires_unit_square() {
        let w = ObservationWindow::new(0.0, 0.0, 2.0, 2.0).unwrap();
        let p = MultiTypePointPattern::new(
            w,
            vec!["a".into()],
            vec![Event { x: 1.0, y: 1.0, type_index: 0 }],
        )
        .unwrap();
        assert!(matches!(dft(&p, 0, grid4()), Err(Error::Contract(_))));
    }

    #[test]
    fn auto_periodogram_examples() {
        let f = dft(&unit_pattern(&[(0.0, 0.0)]), 0, grid4()).unwrap();
        for v in auto_periodogram(&f).values {
            assert_relative_eq!(v, 1.0, epsilon = 1e-12);
        }
        let f = dft(&unit_pattern(&[(0.0, 0.0), (0.5, 0.5)]), 0, grid4()).unwrap();
        let a = auto_periodogram(&f);
        assert!(a.value_at(1, 0).unwrap() < 1e-12);
        assert_relative_eq!(a.value_at(0, 0).unwrap(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn cross_periodogram_examples() {
        let p = two_type_pattern(&[(0.0, 0.0)], &[(0.5, 0.0)]);
        let fi = dft(&p, 0, grid4()).unwrap();
        let fj = dft(&p, 1, grid4()).unwrap();
        let fij = cross_periodogram(&fi, &fj).unwrap();
        // one point at the origin against one at (0.5, 0): (-1)^p
        for (p_idx, q) in grid4().iter() {
            let v = fij.value_at(p_idx, q).unwrap();
            let expect = if p_idx % 2 == 0 { 1.0 } else { -1.0 };
            assert_relative_eq!(v.re, expect, epsilon = 1e-12);
            assert_relative_eq!(v.im, 0.0, epsilon = 1e-12);
        }
        // DC carries the product of counts
        assert_relative_eq!(fij.value_at(0, 0).unwrap().re, 1.0, epsilon = 1e-12);
        // hermitian partner
        let fji = cross_periodogram(&fj, &fi).unwrap();
        for (a, b) in fij.values.iter().zip(&fji.values) {
            assert_relative_eq!(a.re, b.re, epsilon = 1e-12);
            assert_relative_eq!(a.im, -b.im, epsilon = 1e-12);
        }
        // identity case
        let fii = cross_periodogram(&fi, &fi).unwrap();
        let auto = auto_periodogram(&fi);
        for (a, b) in fii.values.iter().zip(&auto.values) {
            assert_relative_eq!(a.re, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn decompose_examples() {
        let p = two_type_pattern(&[(0.0, 0.0)], &[(0.5, 0.0)]);
        let fij = cross_periodogram(
            &dft(&p, 0, grid4()).unwrap(),
            &dft(&p, 1, grid4()).unwrap(),
        )
        .unwrap();
        let dec = decompose_cross(&fij);
        assert_relative_eq!(dec.co.value_at(1, 0).unwrap(), -1.0, epsilon = 1e-12);
        assert_relative_eq!(dec.quad.value_at(1, 0).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(dec.amplitude.value_at(1, 0).unwrap(), 1.0, epsilon = 1e-12);
        let idx = grid4().index_of(1, 0).unwrap();
        assert_relative_eq!(dec.phase[idx].unwrap(), PI, epsilon = 1e-12);
        let idx00 = grid4().index_of(0, 0).unwrap();
        assert_relative_eq!(dec.phase[idx00].unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn decompose_masks_vanishing_amplitude() {
        let grid = grid4();
        let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
        values[grid.index_of(2, 1).unwrap()] = Complex64::new(3.0, 4.0);
        let dec = decompose_cross(&ComplexField { grid, values });
        assert_eq!(dec.amplitude.value_at(2, 1).unwrap(), 5.0);
        assert!(dec.phase[grid.index_of(0, 0).unwrap()].is_none());
        assert!(dec.phase[grid.index_of(2, 1).unwrap()].is_some());
    }

    #[test]
    fn smooth_constant_field_unchanged() {
        let grid = grid4();
        // a real constant is conjugate-symmetric, so mirroring preserves it
        let field = ComplexField {
            grid,
            values: vec![Complex64::new(2.5, 0.0); grid.len()],
        };
        let s = smooth_complex_field(&field, SmoothingSpec { half_width: 2 });
        for (a, b) in s.values.iter().zip(&field.values) {
            assert_relative_eq!(a.re, b.re, epsilon = 1e-12);
            assert_relative_eq!(a.im, b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn smooth_delta_interior() {
        // delta deep enough inside that no covering box is truncated or hits DC
        let grid = FrequencyGrid::new(6, true).unwrap();
        let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
        values[grid.index_of(3, 3).unwrap()] = Complex64::new(1.0, 0.0);
        let s = smooth_complex_field(
            &ComplexField { grid, values },
            SmoothingSpec { half_width: 1 },
        );
        for dp in -1i32..=1 {
            for dq in -1i32..=1 {
                assert_relative_eq!(
                    s.value_at(3 + dp, 3 + dq).unwrap().re,
                    1.0 / 9.0,
                    epsilon = 1e-12
                );
            }
        }
        assert_relative_eq!(s.value_at(3, 0).unwrap().re, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn smooth_h0_is_identity() {
        let grid = grid4();
        let values: Vec<Complex64> = (0..grid.len())
            .map(|k| Complex64::new(k as f64, -(k as f64)))
            .collect();
        let field = ComplexField { grid, values };
        assert_eq!(smooth_complex_field(&field, SmoothingSpec::raw()), field);
    }

    #[test]
    fn smooth_uses_conjugate_extension_across_p0() {
        // mirrored contributors must enter conjugated: a purely imaginary
        // value at (1, 1) contributes -im at targets reaching (-1, -1)
        let grid = grid4();
        let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
        values[grid.index_of(1, 1).unwrap()] = Complex64::new(0.0, 9.0);
        let s = smooth_complex_field(
            &ComplexField { grid, values },
            SmoothingSpec { half_width: 1 },
        );
        // target (0, -2): its box covers (-1, -1), available only through the
        // mirror of (1, 1); all 9 candidates resolve, none is DC
        let t = s.value_at(0, -2).unwrap();
        assert_relative_eq!(t.im, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn smoothing_is_linear() {
        let grid = grid4();
        let spec = SmoothingSpec { half_width: 2 };
        let xs: Vec<Complex64> = (0..grid.len())
            .map(|k| Complex64::new((k % 7) as f64, (k % 5) as f64 - 2.0))
            .collect();
        let ys: Vec<Complex64> = (0..grid.len())
            .map(|k| Complex64::new(((k * 3) % 11) as f64 - 5.0, (k % 13) as f64))
            .collect();
        // real scalars only: the conjugate extension makes smoothing
        // real-linear, not complex-linear
        let (a, b) = (Complex64::new(2.0, 0.0), Complex64::new(-1.5, 0.0));
        let combo = ComplexField {
            grid,
            values: xs.iter().zip(&ys).map(|(x, y)| a * x + b * y).collect(),
        };
        let lhs = smooth_complex_field(&combo, spec);
        let sx = smooth_complex_field(&ComplexField { grid, values: xs }, spec);
        let sy = smooth_complex_field(&ComplexField { grid, values: ys }, spec);
        for ((l, x), y) in lhs.values.iter().zip(&sx.values).zip(&sy.values) {
            let rhs = a * x + b * y;
            assert!((l - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn spectral_matrix_rank_requirement() {
        let pts: Vec<(f64, f64)> = (0..20).map(|k| (k as f64 / 20.0, k as f64 / 23.0)).collect();
        let mut events: Vec<Event> = Vec::new();
        for t in 0..9 {
            for &(x, y) in &pts {
                events.push(Event { x: (x + t as f64 * 0.01).fract(), y, type_index: t });
            }
        }
        let p = MultiTypePointPattern::new(
            ObservationWindow::unit_square(),
            (0..9).map(|t| format!("t{t}")).collect(),
            events,
        )
        .unwrap();
        let err = spectral_matrix(&p, grid4(), SmoothingSpec { half_width: 1 }).unwrap_err();
        assert!(err.to_string().contains("h >= 2"), "{err}");
    }

    #[test]
    fn spectral_matrix_d1_equals_smoothed_auto() {
        let pts: Vec<(f64, f64)> =
            (0..15).map(|k| ((k as f64 * 0.37).fract(), (k as f64 * 0.61).fract())).collect();
        let p = unit_pattern(&pts);
        let grid = grid4();
        let spec = SmoothingSpec { half_width: 1 };
        let s = spectral_matrix(&p, grid, spec).unwrap();
        let auto = smooth_real_field(&auto_periodogram(&dft(&p, 0, grid).unwrap()), spec);
        for (m, v) in s.matrices.iter().zip(&auto.values) {
            assert_relative_eq!(m[(0, 0)].re, *v, epsilon = 1e-10);
        }
    }

    #[test]
    fn raw_matrices_are_rank_one() {
        // raw (unsmoothed) periodogram matrices are singular outer products;
        // this is what forces smoothing before inversion
        let p = two_type_pattern(
            &[(0.1, 0.2), (0.7, 0.4), (0.3, 0.9)],
            &[(0.5, 0.5), (0.2, 0.8)],
        );
        let grid = grid4();
        let f1 = dft(&p, 0, grid).unwrap();
        let f2 = dft(&p, 1, grid).unwrap();
        let a11 = auto_periodogram(&f1);
        let a22 = auto_periodogram(&f2);
        let c12 = cross_periodogram(&f1, &f2).unwrap();
        for k in 0..grid.len() {
            let det = a11.values[k] * a22.values[k] - c12.values[k].norm_sqr();
            let scale = a11.values[k].max(a22.values[k]).powi(2);
            assert!(det.abs() <= 1e-10 * scale.max(1e-30));
        }
    }

    #[test]
    fn radial_examples() {
        let grid = grid4();
        let field = RealField { grid, values: vec![3.0; grid.len()] };
        for (_, mean) in radial_spectrum(&field) {
            assert_relative_eq!(mean, 3.0, epsilon = 1e-12);
        }
        let mut values = vec![0.0; grid.len()];
        values[grid.index_of(3, 0).unwrap()] = 6.0;
        let rings = radial_spectrum(&RealField { grid, values });
        let ring3 = rings.iter().find(|(r, _)| *r == 3.0).unwrap();
        let pop = grid
            .iter()
            .filter(|&(p, q)| {
                !(p == 0 && q == 0) && (((p * p + q * q) as f64).sqrt().round() as i64) == 3
            })
            .count();
        assert_relative_eq!(ring3.1, 6.0 / pop as f64, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn dft_conjugate_symmetry(
            pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..30)
        ) {
            let p = unit_pattern(&pts);
            let f = dft(&p, 0, grid4()).unwrap();
            // mirrored pairs inside the grid (p = 0 line)
            for q in 1..4i32 {
                let a = f.value_at(0, q).unwrap();
                let b = f.value_at(0, -q).unwrap();
                prop_assert!((a - b.conj()).norm() <= 1e-9 * a.norm().max(1.0));
            }
            // direct evaluation at (-p, -q) against the stored half
            for &(pp, qq) in &[(1i32, 2i32), (3, -1), (2, 0)] {
                let direct: Complex64 = pts
                    .iter()
                    .map(|&(x, y)| {
                        Complex64::from_polar(
                            1.0,
                            -2.0 * PI * ((-pp) as f64 * x + (-qq) as f64 * y),
                        )
                    })
                    .sum();
                let stored = f.value_at(pp, qq).unwrap();
                prop_assert!((direct - stored.conj()).norm() <= 1e-9 * stored.norm().max(1.0));
            }
        }

        #[test]
        fn periodogram_dc_identities(
            a in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..20),
            b in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..20),
        ) {
            let p = two_type_pattern(&a, &b);
            let fi = dft(&p, 0, grid4()).unwrap();
            let fj = dft(&p, 1, grid4()).unwrap();
            let counts = p.counts();
            let auto = auto_periodogram(&fi);
            prop_assert!(auto.values.iter().all(|v| *v >= 0.0));
            let n2 = (counts[0] * counts[0]) as f64;
            prop_assert!((auto.value_at(0, 0).unwrap() - n2).abs() <= 1e-9 * n2);
            let cross = cross_periodogram(&fi, &fj).unwrap();
            let ninj = (counts[0] * counts[1]) as f64;
            prop_assert!((cross.value_at(0, 0).unwrap().re - ninj).abs() <= 1e-9 * ninj);
        }

        #[test]
        fn decompose_round_trip(
            a in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..15),
            b in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..15),
        ) {
            let p = two_type_pattern(&a, &b);
            let cross = cross_periodogram(
                &dft(&p, 0, grid4()).unwrap(),
                &dft(&p, 1, grid4()).unwrap(),
            ).unwrap();
            let dec = decompose_cross(&cross);
            for ((v, c), q) in cross.values.iter().zip(&dec.co.values).zip(&dec.quad.values) {
                let back = Complex64::new(*c, -*q);
                prop_assert!((v - back).norm() <= 1e-12 * v.norm().max(1.0));
            }
            for ((v, z), _) in cross.values.iter().zip(&dec.amplitude.values).zip(&dec.co.values) {
                prop_assert!((v.norm() - z).abs() <= 1e-12 * z.max(1.0));
            }
        }
    }
}
