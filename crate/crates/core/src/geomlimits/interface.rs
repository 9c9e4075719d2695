use std::collections::HashMap;
use std::sync::Arc;

use crate::domain::{interpolate, Domain, Grid, ScalarField};
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::varifold::WeightedNormals;

/// Segment (2D), triangle (3D) or point (1D) of a level set.
#[derive(Clone, Debug)]
pub struct Facet {
    pub midpoint: [f64; 3],
    /// Length, area, or one for points.
    pub measure: f64,
    /// Unit normal pointing towards increasing `u`.
    pub normal: [f64; 3],
}

/// Piecewise-linear level set on the periodic grid.
#[derive(Clone, Debug)]
pub struct Interface {
    grid: Arc<Grid>,
    pub facets: Vec<Facet>,
    /// Every boundary element of every facet is shared by exactly two facets.
    pub closed: bool,
}

impl Interface {
    pub fn measure(&self) -> f64 {
        let m: Vec<f64> = self.facets.iter().map(|f| f.measure).collect();
        crate::scalar::tree_sum(&m)
    }
}

impl WeightedNormals for Interface {
    fn samples(&self) -> Vec<([f64; 3], f64, Option<[f64; 3]>)> {
        self.facets.iter().map(|f| (f.midpoint, f.measure, Some(f.normal))).collect()
    }

    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
}

/// Crossing on the lattice edge from `node` along the nonnegative `offset`.
type EdgeId = (usize, u8);

struct Extractor<'a> {
    grid: &'a Grid,
    values: Vec<f64>,
    level: f64,
    grad: Vec<ScalarField<f64>>,
}

impl Extractor<'_> {
    fn node(&self, origin: [usize; 3], bits: u8) -> usize {
        let mut idx = [0usize; 3];
        for a in 0..self.grid.dim() {
            idx[a] = (origin[a] + ((bits >> a) & 1) as usize) % self.grid.cells()[a];
        }
        self.grid.index(idx)
    }

    fn above(&self, k: usize) -> bool {
        self.values[k] > self.level
    }

    /// Crossing between corners `a` and `b` (bit sets, `a` a subset of `b`) of
    /// the cell at `origin`, in coordinates unwrapped from `origin`.
    fn crossing(&self, origin: [usize; 3], a: u8, b: u8) -> (EdgeId, [f64; 3]) {
        let ka = self.node(origin, a);
        let kb = self.node(origin, b);
        let (va, vb) = (self.values[ka], self.values[kb]);
        let t = (self.level - va) / (vb - va);
        let mut x = [0.0; 3];
        for ax in 0..self.grid.dim() {
            let h = self.grid.spacing()[ax];
            let pa = (origin[ax] as f64 + ((a >> ax) & 1) as f64) * h;
            let pb = (origin[ax] as f64 + ((b >> ax) & 1) as f64) * h;
            x[ax] = pa + t * (pb - pa);
        }
        ((ka, b & !a), x)
    }

    fn oriented(&self, mid: [f64; 3], geometric: [f64; 3]) -> [f64; 3] {
        let n = self.grid.dim();
        let mut g = [0.0; 3];
        for a in 0..n {
            g[a] = interpolate(&self.grad[a], &mid[..]);
        }
        let r = g[..n].iter().map(|c| c * c).sum::<f64>().sqrt();
        if r > 1e-300 {
            for c in g.iter_mut() {
                *c /= r;
            }
            g
        } else {
            geometric
        }
    }
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn length(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Marching squares (2D) or marching tetrahedra on the Freudenthal
/// triangulation (3D) with linear root finding; normals from the interpolated
/// centred gradient.
pub fn extract_interface<T: Real>(u: &ScalarField<T>, level: f64) -> Result<Interface> {
    let grid = u.grid();
    let n = grid.dim();
    let values: Vec<f64> = u.data.iter().map(|v| v.to_f64_lossy()).collect();
    let uf: ScalarField<f64> = ScalarField::from_raw(grid, values.clone());
    let gv = Domain::<f64>::flat(grid.clone()).grad(&uf);
    let grad = (0..n)
        .map(|a| ScalarField::from_raw(grid, (0..grid.len()).map(|k| gv.at(k)[a]).collect()))
        .collect();
    let ex = Extractor {
        grid,
        values,
        level,
        grad,
    };
    let mut facets = Vec::new();
    let mut boundary: HashMap<Vec<EdgeId>, usize> = HashMap::new();
    let mut record = |mut ids: Vec<EdgeId>| {
        ids.sort_unstable();
        *boundary.entry(ids).or_insert(0) += 1;
    };
    for k in 0..grid.len() {
        let origin = grid.coords(k);
        match n {
            1 => {
                if ex.above(k) != ex.above(ex.node(origin, 1)) {
                    let (id, x) = ex.crossing(origin, 0, 1);
                    let up = ex.above(ex.node(origin, 1));
                    facets.push(Facet {
                        midpoint: x,
                        measure: 1.0,
                        normal: [if up { 1.0 } else { -1.0 }, 0.0, 0.0],
                    });
                    record(vec![id]);
                }
            }
            2 => {
                // Corners 0, 1, 3, 2 counter-clockwise; edges bottom, right, top, left.
                let corners = [0u8, 1, 3, 2];
                let edges = [(0u8, 1u8), (1, 3), (2, 3), (0, 2)];
                let sign: Vec<bool> = corners.iter().map(|&c| ex.above(ex.node(origin, c))).collect();
                let crossing: Vec<bool> = (0..4).map(|e| sign[e] != sign[(e + 1) % 4]).collect();
                let count = crossing.iter().filter(|&&c| c).count();
                let mut pairs: Vec<(usize, usize)> = Vec::new();
                if count == 2 {
                    let e: Vec<usize> = (0..4).filter(|&e| crossing[e]).collect();
                    pairs.push((e[0], e[1]));
                } else if count == 4 {
                    let centre: f64 = corners.iter().map(|&c| ex.values[ex.node(origin, c)]).sum::<f64>() / 4.0;
                    let centre_up = centre > level;
                    // Corners of the other sign than the centre are cut off; corner i
                    // touches edges i - 1 and i.
                    for i in 0..4 {
                        if sign[i] != centre_up {
                            pairs.push(((i + 3) % 4, i));
                        }
                    }
                }
                for (e0, e1) in pairs {
                    let (id0, p0) = ex.crossing(origin, edges[e0].0, edges[e0].1);
                    let (id1, p1) = ex.crossing(origin, edges[e1].0, edges[e1].1);
                    record(vec![id0]);
                    record(vec![id1]);
                    let d = sub(&p1, &p0);
                    let len = length(&d);
                    if len == 0.0 {
                        continue;
                    }
                    let mid = [0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1]), 0.0];
                    let geometric = [-d[1] / len, d[0] / len, 0.0];
                    facets.push(Facet {
                        midpoint: mid,
                        measure: len,
                        normal: ex.oriented(mid, geometric),
                    });
                }
            }
            _ => {
                const PERMS: [[u8; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
                for perm in PERMS {
                    let v1 = 1u8 << perm[0];
                    let v2 = v1 | (1u8 << perm[1]);
                    let tet = [0u8, v1, v2, 7];
                    let up: Vec<bool> = tet.iter().map(|&c| ex.above(ex.node(origin, c))).collect();
                    let plus: Vec<usize> = (0..4).filter(|&i| up[i]).collect();
                    let minus: Vec<usize> = (0..4).filter(|&i| !up[i]).collect();
                    let edge = |i: usize, j: usize| {
                        let (a, b) = if i < j { (tet[i], tet[j]) } else { (tet[j], tet[i]) };
                        ex.crossing(origin, a, b)
                    };
                    let mut tris: Vec<[(EdgeId, [f64; 3]); 3]> = Vec::new();
                    match (plus.len(), minus.len()) {
                        (1, 3) | (3, 1) => {
                            let (lone, rest) = if plus.len() == 1 { (plus[0], &minus) } else { (minus[0], &plus) };
                            tris.push([edge(lone, rest[0]), edge(lone, rest[1]), edge(lone, rest[2])]);
                        }
                        (2, 2) => {
                            let (a, b, c, d) = (plus[0], plus[1], minus[0], minus[1]);
                            let ac = edge(a, c);
                            let ad = edge(a, d);
                            let bd = edge(b, d);
                            let bc = edge(b, c);
                            tris.push([ac, ad, bd]);
                            tris.push([ac, bd, bc]);
                        }
                        _ => {}
                    }
                    for t in tris {
                        let area_vec = cross(&sub(&t[1].1, &t[0].1), &sub(&t[2].1, &t[0].1));
                        let area2 = length(&area_vec);
                        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
                            record(vec![t[i].0, t[j].0]);
                        }
                        if area2 == 0.0 {
                            continue;
                        }
                        let mut mid = [0.0; 3];
                        for p in &t {
                            for a in 0..3 {
                                mid[a] += p.1[a] / 3.0;
                            }
                        }
                        let geometric = [area_vec[0] / area2, area_vec[1] / area2, area_vec[2] / area2];
                        facets.push(Facet {
                            midpoint: mid,
                            measure: 0.5 * area2,
                            normal: ex.oriented(mid, geometric),
                        });
                    }
                }
            }
        }
    }
    if facets.is_empty() {
        return Err(Error::EmptyLevelSet);
    }
    let closed = match n {
        1 => facets.len() % 2 == 0,
        _ => boundary.values().all(|&c| c == 2),
    };
    Ok(Interface {
        grid: grid.clone(),
        facets,
        closed,
    })
}
