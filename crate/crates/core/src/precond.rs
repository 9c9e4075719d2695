//! Fourier-diagonal preconditioner: the constant-coefficient model
//! `eps kappa sum_a c_a (-Delta_a) + s / eps + shift` inverted by FFT.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::energy::EnergyParams;
use crate::scalar::Real;

pub struct FftPreconditioner<T: Real> {
    cells: Vec<usize>,
    strides: Vec<usize>,
    forward: Vec<Arc<dyn Fft<T>>>,
    inverse: Vec<Arc<dyn Fft<T>>>,
    /// Symbol of the model operator per Fourier mode.
    symbol: Vec<T>,
    /// `omega / mean(omega)`, making the operator self-adjoint in the weighted product.
    weight: Vec<T>,
}

impl<T: Real> FftPreconditioner<T> {
    /// Model of the Hessian of `p` near the wells, shifted by `shift` (which must
    /// keep the symbol positive).
    pub fn new(p: &EnergyParams<T>, shift: T) -> Self {
        let grid = p.domain().grid();
        let n = grid.dim();
        let eps = p.eps();
        let len = grid.len();
        let mean = |v: &[T]| v.iter().fold(T::zero(), |a, &b| a + b) / T::from_count(v.len());
        let kappa = mean(p.domain().metric().kappa());
        let m2 = mean(p.modulation_sq());
        let mut coef = [T::zero(); 3];
        for (a, c) in coef.iter_mut().enumerate().take(n) {
            let mut e = [T::zero(); 3];
            e[a] = T::one();
            *c = p.integrand().f0_square(&e).value * m2 * kappa;
        }
        let well = p.potential().d2w(T::one()).max(p.potential().d2w(-T::one()));
        let cells: Vec<usize> = grid.cells().to_vec();
        let mut strides = vec![1usize; n];
        for a in (0..n.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * cells[a + 1];
        }
        let mut symbol = Vec::with_capacity(len);
        for k in 0..len {
            let c = grid.coords(k);
            let mut s = well / eps + shift;
            for a in 0..n {
                let h = T::lit(grid.spacing()[a]);
                let th = T::PI() * T::from_count(c[a]) / T::from_count(cells[a]);
                let sn = th.sin();
                s += eps * coef[a] * T::lit(4.0) * sn * sn / (h * h);
            }
            symbol.push(s);
        }
        let mut planner = FftPlanner::<T>::new();
        let forward = cells.iter().map(|&m| planner.plan_fft_forward(m)).collect();
        let inverse = cells.iter().map(|&m| planner.plan_fft_inverse(m)).collect();
        let omega = p.domain().metric().omega();
        let mw = mean(omega);
        Self {
            cells,
            strides,
            forward,
            inverse,
            symbol,
            weight: omega.iter().map(|&w| w / mw).collect(),
        }
    }

    pub fn symbol(&self) -> &[T] {
        &self.symbol
    }

    fn transform(&self, buf: &mut [Complex<T>], plans: &[Arc<dyn Fft<T>>]) {
        let n = self.cells.len();
        let len = buf.len();
        for a in 0..n {
            let m = self.cells[a];
            let stride = self.strides[a];
            let mut line = vec![Complex::new(T::zero(), T::zero()); m];
            // Each line along axis a starts at an index whose a-coordinate is zero.
            for start in 0..len {
                if (start / stride) % m != 0 {
                    continue;
                }
                for (i, z) in line.iter_mut().enumerate() {
                    *z = buf[start + i * stride];
                }
                plans[a].process(&mut line);
                for (i, z) in line.iter().enumerate() {
                    buf[start + i * stride] = *z;
                }
            }
        }
    }

    /// Inverse of [`FftPreconditioner::apply`]: `out = (P x) / w`.
    pub fn apply_forward(&self, x: &[T], out: &mut [T]) {
        let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.transform(&mut buf, &self.forward);
        for (z, &s) in buf.iter_mut().zip(&self.symbol) {
            *z = *z * s;
        }
        self.transform(&mut buf, &self.inverse);
        let scale = T::one() / T::from_count(buf.len());
        for ((o, z), &w) in out.iter_mut().zip(&buf).zip(&self.weight) {
            *o = z.re * scale / w;
        }
    }

    /// `out = P^{-1} (w r)`.
    pub fn apply(&self, r: &[T], out: &mut [T]) {
        let mut buf: Vec<Complex<T>> = r
            .iter()
            .zip(&self.weight)
            .map(|(&x, &w)| Complex::new(x * w, T::zero()))
            .collect();
        self.transform(&mut buf, &self.forward);
        for (z, &s) in buf.iter_mut().zip(&self.symbol) {
            *z = *z / s;
        }
        self.transform(&mut buf, &self.inverse);
        let scale = T::one() / T::from_count(buf.len());
        for (o, z) in out.iter_mut().zip(&buf) {
            *o = z.re * scale;
        }
    }
}
