//! Periodic grids on flat tori with an optional conformal factor, fields,
//! and centred discrete calculus.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{tree_sum, Real};

/// Minimum number of cells per axis.
pub const MIN_CELLS: usize = 8;

/// Uniform periodic grid; cell `i` along axis `a` sits at `x_a = i * h_a`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    cells: [usize; 3],
    lengths: [f64; 3],
    spacing: [f64; 3],
    strides: [usize; 3],
    neighbors: Vec<[usize; 6]>,
}

impl Grid {
    pub fn new(cells: &[usize], lengths: &[f64]) -> Result<Self> {
        let dim = cells.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("dimension {dim} not in 1..=3")));
        }
        if lengths.len() != dim {
            return Err(Error::InvalidArgument("cells and lengths differ in length".into()));
        }
        let mut c = [1usize; 3];
        let mut l = [1.0; 3];
        let mut h = [1.0; 3];
        for a in 0..dim {
            if cells[a] < MIN_CELLS {
                return Err(Error::InvalidArgument(format!(
                    "axis {a} has {} cells, need at least {MIN_CELLS}",
                    cells[a]
                )));
            }
            if !(lengths[a] > 0.0 && lengths[a].is_finite()) {
                return Err(Error::InvalidArgument(format!("axis {a} has period {}", lengths[a])));
            }
            c[a] = cells[a];
            l[a] = lengths[a];
            h[a] = lengths[a] / cells[a] as f64;
        }
        // Row-major: the last axis is contiguous.
        let mut strides = [0usize; 3];
        let mut s = 1;
        for a in (0..dim).rev() {
            strides[a] = s;
            s *= c[a];
        }
        let mut grid = Self {
            dim,
            cells: c,
            lengths: l,
            spacing: h,
            strides,
            neighbors: Vec::new(),
        };
        grid.neighbors = (0..grid.len()).map(|k| grid.compute_neighbors(k)).collect();
        Ok(grid)
    }

    /// `n^dim` cells on the unit torus.
    pub fn unit(dim: usize, n: usize) -> Result<Self> {
        Self::new(&vec![n; dim], &vec![1.0; dim])
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    #[inline]
    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.cells[..self.dim].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing[..self.dim].iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths[..self.dim].iter().product()
    }

    #[inline]
    pub fn index(&self, i: [usize; 3]) -> usize {
        (0..self.dim).map(|a| (i[a] % self.cells[a]) * self.strides[a]).sum()
    }

    #[inline]
    pub fn coords(&self, k: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in 0..self.dim {
            out[a] = (k / self.strides[a]) % self.cells[a];
        }
        out
    }

    #[inline]
    pub fn position(&self, k: usize) -> [f64; 3] {
        let c = self.coords(k);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = c[a] as f64 * self.spacing[a];
        }
        x
    }

    fn compute_neighbors(&self, k: usize) -> [usize; 6] {
        let c = self.coords(k);
        let mut out = [k; 6];
        for a in 0..self.dim {
            let n = self.cells[a];
            let s = self.strides[a];
            out[2 * a] = if c[a] + 1 == n { k + s - n * s } else { k + s };
            out[2 * a + 1] = if c[a] == 0 { k + (n - 1) * s } else { k - s };
        }
        out
    }

    /// Neighbour of cell `k` one step along `axis` in the direction `forward`.
    #[inline]
    pub fn neighbor(&self, k: usize, axis: usize, forward: bool) -> usize {
        self.neighbors[k][2 * axis + usize::from(!forward)]
    }

    /// Periodic displacement `x - y` reduced to the fundamental cell centred at 0.
    pub fn periodic_delta(&self, x: &[f64], y: &[f64]) -> [f64; 3] {
        let mut d = [0.0; 3];
        for a in 0..self.dim {
            let l = self.lengths[a];
            let mut t = x[a] - y[a];
            t -= l * (t / l).round();
            d[a] = t;
        }
        d
    }

    pub fn periodic_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = self.periodic_delta(x, y);
        d.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Translate a flat index by an integer lattice vector.
    pub fn translate(&self, k: usize, shift: [isize; 3]) -> usize {
        let c = self.coords(k);
        let mut out = [0usize; 3];
        for a in 0..self.dim {
            let n = self.cells[a] as isize;
            out[a] = (c[a] as isize + shift[a]).rem_euclid(n) as usize;
        }
        self.index(out)
    }
}

/// Real values per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    grid: Arc<Grid>,
    pub data: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: &Arc<Grid>, value: T) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![value; grid.len()],
        }
    }

    pub fn from_vec(grid: &Arc<Grid>, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, grid has {} cells",
                data.len(),
                grid.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field value"));
        }
        Ok(Self {
            grid: grid.clone(),
            data,
        })
    }

    /// Samples `f` at cell positions. `f` must be periodic: values at opposite
    /// faces of the fundamental domain are compared and a mismatch is rejected.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64; 3]) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let x = grid.position(k);
            let v = f(&x);
            for a in 0..grid.dim() {
                if grid.coords(k)[a] == 0 {
                    let mut y = x;
                    y[a] += grid.lengths()[a];
                    let w = f(&y);
                    if (v - w).abs() > 1e-8 * (1.0 + v.abs()) {
                        return Err(Error::InvalidArgument(format!(
                            "function is not periodic along axis {a}: f(x) = {v}, f(x + L e_a) = {w}"
                        )));
                    }
                }
            }
            data.push(T::lit(v));
        }
        Self::from_vec(grid, data)
    }

    /// Unchecked construction for values produced by the library itself.
    pub(crate) fn from_raw(grid: &Arc<Grid>, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self {
            grid: grid.clone(),
            data,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(&self.grid, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Same values on the same grid in another precision.
    pub fn cast<S: Real>(&self) -> ScalarField<S> {
        ScalarField::from_raw(&self.grid, self.data.iter().map(|v| S::lit(v.to_f64_lossy())).collect())
    }

    /// Values shifted by a lattice translation: `out(k + shift) = self(k)`.
    pub fn translated(&self, shift: [isize; 3]) -> Self {
        let mut out = vec![T::zero(); self.len()];
        for (k, &v) in self.data.iter().enumerate() {
            out[self.grid.translate(k, shift)] = v;
        }
        Self::from_raw(&self.grid, out)
    }
}

/// `dim` components per cell, interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    grid: Arc<Grid>,
    pub data: Vec<T>,
}

impl<T: Real> VectorField<T> {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![T::zero(); grid.len() * grid.dim()],
        }
    }

    pub fn from_vec(grid: &Arc<Grid>, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.len() * grid.dim() {
            return Err(Error::InvalidArgument("vector field length mismatch".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector field value"));
        }
        Ok(Self {
            grid: grid.clone(),
            data,
        })
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64; 3]) -> [f64; 3]) -> Result<Self> {
        let n = grid.dim();
        let mut data = Vec::with_capacity(grid.len() * n);
        for k in 0..grid.len() {
            let v = f(&grid.position(k));
            data.extend(v[..n].iter().map(|&c| T::lit(c)));
        }
        Self::from_vec(grid, data)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    #[inline]
    pub fn at(&self, k: usize) -> &[T] {
        let n = self.grid.dim();
        &self.data[k * n..(k + 1) * n]
    }
}

/// Conformal factor `g = e^{2 phi} g_flat`: volume weight `e^{n phi}` and
/// co-metric weight `e^{-2 phi}` per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalMetric<T> {
    phi: Vec<T>,
    /// Cell volume times `e^{n phi}`.
    omega: Vec<T>,
    kappa: Vec<T>,
    flat: bool,
}

impl<T: Real> ConformalMetric<T> {
    pub fn flat(grid: &Grid) -> Self {
        let vol = T::lit(grid.cell_volume());
        Self {
            phi: vec![T::zero(); grid.len()],
            omega: vec![vol; grid.len()],
            kappa: vec![T::one(); grid.len()],
            flat: true,
        }
    }

    pub fn from_phi(phi: &ScalarField<T>) -> Result<Self> {
        let grid = phi.grid();
        if !phi.is_finite() {
            return Err(Error::NonFinite("conformal factor"));
        }
        let n = T::from_count(grid.dim());
        let vol = T::lit(grid.cell_volume());
        Ok(Self {
            omega: phi.data.iter().map(|&p| vol * (n * p).exp()).collect(),
            kappa: phi.data.iter().map(|&p| (-(p + p)).exp()).collect(),
            flat: phi.data.iter().all(|&p| p == T::zero()),
            phi: phi.data.clone(),
        })
    }

    pub fn is_flat(&self) -> bool {
        self.flat
    }

    pub fn phi(&self) -> &[T] {
        &self.phi
    }

    #[inline]
    pub fn omega(&self) -> &[T] {
        &self.omega
    }

    #[inline]
    pub fn kappa(&self) -> &[T] {
        &self.kappa
    }
}

/// A grid with its metric; owner of the discrete calculus.
#[derive(Clone, Debug)]
pub struct Domain<T> {
    grid: Arc<Grid>,
    metric: ConformalMetric<T>,
}

impl<T: Real> Domain<T> {
    pub fn flat(grid: Arc<Grid>) -> Self {
        let metric = ConformalMetric::flat(&grid);
        Self { grid, metric }
    }

    pub fn with_metric(grid: Arc<Grid>, metric: ConformalMetric<T>) -> Result<Self> {
        if metric.omega.len() != grid.len() {
            return Err(Error::InvalidArgument("metric does not match grid".into()));
        }
        Ok(Self { grid, metric })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn metric(&self) -> &ConformalMetric<T> {
        &self.metric
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn volume(&self) -> T {
        tree_sum(self.metric.omega())
    }

    /// Centred periodic differences.
    pub fn grad(&self, u: &ScalarField<T>) -> VectorField<T> {
        let g = &*self.grid;
        let n = g.dim();
        let mut out = vec![T::zero(); g.len() * n];
        let inv: Vec<T> = g.spacing().iter().map(|&h| T::lit(0.5 / h)).collect();
        for k in 0..g.len() {
            for a in 0..n {
                let p = g.neighbor(k, a, true);
                let m = g.neighbor(k, a, false);
                out[k * n + a] = (u.data[p] - u.data[m]) * inv[a];
            }
        }
        VectorField {
            grid: self.grid.clone(),
            data: out,
        }
    }

    /// Negative adjoint of [`Domain::grad`] under the volume-weighted pairing.
    pub fn div(&self, x: &VectorField<T>) -> ScalarField<T> {
        let g = &*self.grid;
        let n = g.dim();
        let w = self.metric.omega();
        let inv: Vec<T> = g.spacing().iter().map(|&h| T::lit(0.5 / h)).collect();
        let mut out = vec![T::zero(); g.len()];
        for (k, o) in out.iter_mut().enumerate() {
            let mut s = T::zero();
            for a in 0..n {
                let p = g.neighbor(k, a, true);
                let m = g.neighbor(k, a, false);
                s += (w[p] * x.data[p * n + a] - w[m] * x.data[m * n + a]) * inv[a];
            }
            *o = s / w[k];
        }
        ScalarField::from_raw(&self.grid, out)
    }

    /// `sum_k omega_k f_k`.
    pub fn integrate(&self, f: &ScalarField<T>) -> T {
        self.integrate_slice(&f.data)
    }

    pub fn integrate_slice(&self, f: &[T]) -> T {
        let w = self.metric.omega();
        let prod: Vec<T> = f.iter().zip(w).map(|(&a, &b)| a * b).collect();
        tree_sum(&prod)
    }

    /// Weighted inner product `sum_k omega_k a_k b_k`.
    pub fn inner(&self, a: &[T], b: &[T]) -> T {
        let w = self.metric.omega();
        let prod: Vec<T> = a.iter().zip(b).zip(w).map(|((&x, &y), &o)| o * x * y).collect();
        tree_sum(&prod)
    }

    pub fn norm(&self, a: &[T]) -> T {
        self.inner(a, a).sqrt()
    }

    /// Pairing `sum_k omega_k X_k . Y_k` of vector fields.
    pub fn inner_vec(&self, x: &VectorField<T>, y: &VectorField<T>) -> T {
        let n = self.dim();
        let w = self.metric.omega();
        let prod: Vec<T> = (0..self.grid.len())
            .map(|k| {
                let mut s = T::zero();
                for a in 0..n {
                    s += x.data[k * n + a] * y.data[k * n + a];
                }
                w[k] * s
            })
            .collect();
        tree_sum(&prod)
    }

    /// Integral of `f` over the periodic ball `B_r(center)`, counting cells whose
    /// position lies within distance `r`.
    pub fn ball_mass(&self, f: &ScalarField<T>, center: &[f64], r: f64) -> Result<T> {
        let limit = 0.5 * self.grid.lengths().iter().cloned().fold(f64::INFINITY, f64::min);
        if r > limit {
            return Err(Error::RadiusTooLarge { r, limit });
        }
        let w = self.metric.omega();
        let terms: Vec<T> = (0..self.grid.len())
            .map(|k| {
                let d = self.grid.periodic_distance(&self.grid.position(k), center);
                if d < r {
                    w[k] * f.data[k]
                } else {
                    T::zero()
                }
            })
            .collect();
        Ok(tree_sum(&terms))
    }

    /// Samples of `f` at `base + t dir` for `t = i * length / count`, by periodic
    /// multilinear interpolation.
    pub fn line_segment(
        &self,
        f: &ScalarField<T>,
        base: &[f64],
        dir: &[f64],
        count: usize,
        length: f64,
    ) -> Vec<(f64, T)> {
        (0..count)
            .map(|i| {
                let t = length * i as f64 / count as f64;
                let mut x = [0.0; 3];
                for a in 0..self.dim() {
                    x[a] = base[a] + t * dir[a];
                }
                (t, interpolate(f, &x))
            })
            .collect()
    }

    /// Samples along the closed periodic line through `base` with lattice
    /// direction `dir`, over one full period of the line.
    pub fn line_slice(&self, f: &ScalarField<T>, base: &[f64], dir: &[f64], count: usize) -> Result<Vec<(f64, T)>> {
        let length = closing_length(&self.grid, dir)?;
        Ok(self.line_segment(f, base, dir, count, length))
    }
}

/// Length after which the line with unit direction `dir` closes on the torus.
pub fn closing_length(grid: &Grid, dir: &[f64]) -> Result<f64> {
    let n = grid.dim();
    let nrm: f64 = dir[..n].iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(nrm > 0.0) {
        return Err(Error::InvalidArgument("zero direction".into()));
    }
    const MAX_WINDING: i64 = 16;
    let mut best: Option<f64> = None;
    let range = -MAX_WINDING..=MAX_WINDING;
    let mut candidates = Vec::new();
    match n {
        1 => candidates.push([1, 0, 0]),
        2 => {
            for p in range.clone() {
                for q in range.clone() {
                    candidates.push([p, q, 0]);
                }
            }
        }
        _ => {
            for p in range.clone() {
                for q in range.clone() {
                    for r in range.clone() {
                        candidates.push([p, q, r]);
                    }
                }
            }
        }
    }
    for m in candidates {
        let v: Vec<f64> = (0..n).map(|a| m[a] as f64 * grid.lengths()[a]).collect();
        let len: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if len == 0.0 {
            continue;
        }
        let cosang: f64 = (0..n).map(|a| v[a] * dir[a]).sum::<f64>() / (len * nrm);
        if (cosang - 1.0).abs() < 1e-12 && best.is_none_or(|b| len < b) {
            best = Some(len);
        }
    }
    best.ok_or_else(|| Error::InvalidArgument(format!("direction {dir:?} does not close on the torus")))
}

/// Periodic multilinear interpolation at a physical point.
pub fn interpolate<T: Real>(f: &ScalarField<T>, x: &[f64]) -> T {
    let g = f.grid();
    let n = g.dim();
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..n {
        let s = x[a] / g.spacing()[a];
        let fl = s.floor();
        frac[a] = s - fl;
        base[a] = (fl as i64).rem_euclid(g.cells()[a] as i64) as usize;
    }
    let mut acc = T::zero();
    for corner in 0..(1usize << n) {
        let mut w = 1.0;
        let mut idx = [0usize; 3];
        for a in 0..n {
            let bit = (corner >> a) & 1;
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            idx[a] = (base[a] + bit) % g.cells()[a];
        }
        if w != 0.0 {
            acc += T::lit(w) * f.data[g.index(idx)];
        }
    }
    acc
}
