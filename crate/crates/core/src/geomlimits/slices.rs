use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{closing_length, interpolate, ScalarField};
use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{unit, CellData};

/// Cut-off `chi` applied along each line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Cutoff {
    /// `chi = 1` on the whole closed line.
    Full,
    /// `chi(t / half_length)` on the segment `|t| < half_length` around the
    /// base point, with `chi = 1` on `(-1/2, 1/2)` and a `C^1` cosine ramp to
    /// zero at `+-1`.
    Window { half_length: f64 },
}

impl Cutoff {
    pub fn chi(s: f64) -> f64 {
        let a = s.abs();
        if a <= 0.5 {
            1.0
        } else if a < 1.0 {
            let c = (std::f64::consts::PI * (a - 0.5)).cos();
            c * c
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SliceOptions {
    /// Normal axis of the base plane `{x_axis = offset}`.
    pub axis: usize,
    pub offset: f64,
    /// Base points per tangential axis, evenly spaced.
    pub lines_per_axis: usize,
    /// Line direction; lattice-rational.
    pub dir: Vec<f64>,
    pub cutoff: Cutoff,
    /// Samples per line; `0` selects four per cell along the closed line.
    pub samples: usize,
    /// Lines whose tangential energy fraction exceeds this are excluded.
    pub tangential_threshold: f64,
}

impl SliceOptions {
    pub fn along_axis(axis: usize, dim: usize, lines_per_axis: usize) -> Self {
        let mut dir = vec![0.0; dim];
        dir[axis] = 1.0;
        Self {
            axis,
            offset: 0.0,
            lines_per_axis,
            dir,
            cutoff: Cutoff::Full,
            samples: 0,
            tangential_threshold: 0.05,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SliceRecord {
    pub base: Vec<f64>,
    /// `int chi e_eps / F(x, dir)` along the line.
    pub q: f64,
    /// `q / c_W`.
    pub ratio: f64,
    pub nearest: i64,
    pub residual: f64,
    pub tangential_fraction: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SliceReport {
    pub records: Vec<SliceRecord>,
    pub certified_fraction: f64,
    /// Among certified lines, the fraction with residual at most `0.15`.
    pub quantized_fraction: f64,
    /// Most frequent nearest integer among certified lines.
    pub modal: Option<i64>,
    pub histogram: BTreeMap<i64, usize>,
}

pub const QUANTIZATION_TOLERANCE: f64 = 0.15;

pub fn slice_quantization<T: Real>(
    u: &ScalarField<T>,
    p: &EnergyParams<T>,
    opts: &SliceOptions,
) -> Result<SliceReport> {
    let grid = u.grid();
    let n = grid.dim();
    if opts.axis >= n || opts.dir.len() != n || opts.lines_per_axis == 0 {
        return Err(Error::InvalidArgument("slice options do not match the grid".into()));
    }
    let cw = p.potential().cw()?;
    let dir = unit(&opts.dir);
    let closed = closing_length(grid, &dir[..n])?;
    let (start, length) = match opts.cutoff {
        Cutoff::Full => (0.0, closed),
        Cutoff::Window { half_length } => {
            if !(half_length > 0.0) || 2.0 * half_length > closed {
                return Err(Error::InvalidArgument(format!("cut-off half length {half_length} out of range")));
            }
            (-half_length, 2.0 * half_length)
        }
    };
    let max_cells = grid.cells().iter().cloned().max().unwrap_or(1);
    let count = if opts.samples > 0 {
        opts.samples
    } else {
        4 * max_cells * (length / grid.lengths().iter().cloned().fold(f64::INFINITY, f64::min)).ceil() as usize
    };

    let c = CellData::new(u, p);
    let eps = p.eps().to_f64_lossy();
    let density: ScalarField<f64> =
        ScalarField::from_raw(grid, c.density(p.eps()).iter().map(|v| v.to_f64_lossy()).collect());
    let kappa = p.domain().metric().kappa();
    let grad: Vec<ScalarField<f64>> = (0..n)
        .map(|a| {
            ScalarField::from_raw(
                grid,
                (0..grid.len())
                    .map(|k| (c.grad.at(k)[a] * kappa[k].sqrt()).to_f64_lossy())
                    .collect(),
            )
        })
        .collect();

    let tangential: Vec<usize> = (0..n).filter(|&a| a != opts.axis).collect();
    let mut bases = vec![vec![0.0; n]];
    for &a in &tangential {
        let mut next = Vec::new();
        for b in &bases {
            for i in 0..opts.lines_per_axis {
                let mut x = b.clone();
                x[a] = (i as f64 + 0.5) * grid.lengths()[a] / opts.lines_per_axis as f64;
                next.push(x);
            }
        }
        bases = next;
    }

    let dt = length / count as f64;
    let mut records = Vec::with_capacity(bases.len());
    for mut base in bases {
        base[opts.axis] = opts.offset;
        let (mut q, mut tan, mut tot) = (0.0, 0.0, 0.0);
        for i in 0..count {
            let t = start + (i as f64 + 0.5) * dt;
            let mut x = [0.0; 3];
            for a in 0..n {
                x[a] = base[a] + t * dir[a];
            }
            let chi = match opts.cutoff {
                Cutoff::Full => 1.0,
                Cutoff::Window { half_length } => Cutoff::chi(t / half_length),
            };
            let f = p.integrand().f_and_df(&x[..n], &dir[..n]).0;
            q += chi * interpolate(&density, &x[..]) / f * dt;
            let mut sq = 0.0;
            let mut along = 0.0;
            for a in 0..n {
                let g = interpolate(&grad[a], &x[..]);
                sq += g * g;
                along += g * dir[a];
            }
            tan += chi * eps * (sq - along * along).max(0.0) * dt;
            tot += chi * eps * sq * dt;
        }
        let ratio = q / cw;
        let nearest = ratio.round() as i64;
        let tangential_fraction = if tot > 0.0 { tan / tot } else { 0.0 };
        records.push(SliceRecord {
            base,
            q,
            ratio,
            nearest,
            residual: (ratio - nearest as f64).abs(),
            tangential_fraction,
            certified: tangential_fraction <= opts.tangential_threshold,
        });
    }

    let certified: Vec<&SliceRecord> = records.iter().filter(|r| r.certified).collect();
    let mut histogram = BTreeMap::new();
    for r in &certified {
        *histogram.entry(r.nearest).or_insert(0usize) += 1;
    }
    let modal = histogram
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&k, _)| k);
    let quantized = certified.iter().filter(|r| r.residual <= QUANTIZATION_TOLERANCE).count();
    Ok(SliceReport {
        certified_fraction: certified.len() as f64 / records.len() as f64,
        quantized_fraction: if certified.is_empty() {
            0.0
        } else {
            quantized as f64 / certified.len() as f64
        },
        modal,
        histogram,
        records,
    })
}
