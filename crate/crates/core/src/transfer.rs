//! Spatial grid transfers between a grid and its factor-2 coarsening.
//!
//! All transfers are tensor products of 1D sparse operators applied one axis
//! at a time. Boundary points carry zero and are simply left out of the rows.

use crate::error::{Error, Result};
use crate::heat::{Grid, GridFunction};

/// Sparse 1D transfer on interior indices.
#[derive(Debug, Clone)]
pub struct Transfer1d {
    n_in: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Transfer1d {
    pub fn n_out(&self) -> usize {
        self.rows.len()
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Builds rows from `(point_index, weight)` pairs on the full index range
    /// `0..=n_in + 1`, dropping boundary points.
    fn from_points(n_in: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let rows = rows
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .filter(|&(p, _)| p >= 1 && p <= n_in)
                    .map(|(p, w)| (p - 1, w))
                    .collect()
            })
            .collect();
        Self { n_in, rows }
    }
}

/// `[1, 2, 1] / 4` restriction from `fine_n` intervals to `fine_n / 2`.
pub fn full_weighting_1d(fine_n: usize) -> Transfer1d {
    let coarse_n = fine_n / 2;
    let rows = (1..coarse_n)
        .map(|c| vec![(2 * c - 1, 0.25), (2 * c, 0.5), (2 * c + 1, 0.25)])
        .collect();
    Transfer1d::from_points(fine_n - 1, rows)
}

/// Pointwise injection from `fine_n` intervals to `fine_n / 2`.
pub fn injection_1d(fine_n: usize) -> Transfer1d {
    let coarse_n = fine_n / 2;
    let rows = (1..coarse_n).map(|c| vec![(2 * c, 1.0)]).collect();
    Transfer1d::from_points(fine_n - 1, rows)
}

/// Linear interpolation from `coarse_n` intervals to `2 * coarse_n`.
pub fn linear_1d(coarse_n: usize) -> Transfer1d {
    let fine_n = 2 * coarse_n;
    let rows = (1..fine_n)
        .map(|p| {
            if p % 2 == 0 {
                vec![(p / 2, 1.0)]
            } else {
                vec![((p - 1) / 2, 0.5), (p.div_ceil(2), 0.5)]
            }
        })
        .collect();
    Transfer1d::from_points(coarse_n - 1, rows)
}

/// Cubic Lagrange interpolation from `coarse_n` intervals to `2 * coarse_n`,
/// using the four nearest coarse points (boundary zeros included) and a
/// one-sided window next to the boundary. Falls back to linear when fewer
/// than four coarse points exist.
pub fn cubic_1d(coarse_n: usize) -> Transfer1d {
    if coarse_n < 3 {
        return linear_1d(coarse_n);
    }
    let fine_n = 2 * coarse_n;
    let rows = (1..fine_n)
        .map(|p| {
            if p % 2 == 0 {
                return vec![(p / 2, 1.0)];
            }
            let left = (p - 1) / 2;
            let start = left.saturating_sub(1).min(coarse_n - 3);
            let x = p as f64 / 2.0;
            (start..start + 4)
                .map(|j| {
                    let w: f64 = (start..start + 4)
                        .filter(|&l| l != j)
                        .map(|l| (x - l as f64) / (j as f64 - l as f64))
                        .product();
                    (j, w)
                })
                .collect()
        })
        .collect();
    Transfer1d::from_points(coarse_n - 1, rows)
}

/// Applies `t` along `axis` of a lexicographic array with the given shape.
pub fn apply_axis(input: &[f64], shape: [usize; 3], axis: usize, t: &Transfer1d) -> (Vec<f64>, [usize; 3]) {
    debug_assert_eq!(shape[axis], t.n_in());
    let mut out_shape = shape;
    out_shape[axis] = t.n_out();
    let mut out = vec![0.0; out_shape.iter().product()];
    let in_stride = [1, shape[0], shape[0] * shape[1]];
    let out_stride = [1, out_shape[0], out_shape[0] * out_shape[1]];
    for k in 0..out_shape[2] {
        for j in 0..out_shape[1] {
            for i in 0..out_shape[0] {
                let idx = [i, j, k];
                let mut base = 0;
                for d in 0..3 {
                    if d != axis {
                        base += idx[d] * in_stride[d];
                    }
                }
                let acc: f64 = t
                    .row(idx[axis])
                    .iter()
                    .map(|&(src, w)| w * input[base + src * in_stride[axis]])
                    .sum();
                out[i * out_stride[0] + j * out_stride[1] + k * out_stride[2]] = acc;
            }
        }
    }
    (out, out_shape)
}

fn apply_tensor(u: &GridFunction, target: Grid, t: &Transfer1d) -> GridFunction {
    let mut data = u.values().to_vec();
    let mut shape = u.grid().shape();
    for axis in 0..u.grid().dim() {
        let (d, s) = apply_axis(&data, shape, axis, t);
        data = d;
        shape = s;
    }
    GridFunction::from_values(target, data).expect("transfer preserves target size")
}

fn check_pair(fine: &Grid, coarse: &Grid) -> Result<()> {
    if fine.dim() != coarse.dim()
        || fine.length() != coarse.length()
        || (fine.n() != coarse.n() && fine.n() != 2 * coarse.n())
    {
        return Err(Error::InvalidHierarchy(format!(
            "grids {fine} and {coarse} are not a factor-2 pair"
        )));
    }
    Ok(())
}

/// Full-weighting restriction onto `coarse`.
pub fn restrict_full_weighting(u: &GridFunction, coarse: Grid) -> Result<GridFunction> {
    check_pair(u.grid(), &coarse)?;
    if *u.grid() == coarse {
        return Ok(u.clone());
    }
    Ok(apply_tensor(u, coarse, &full_weighting_1d(u.grid().n())))
}

/// Injection onto `coarse` (coarse points take the coincident fine value).
pub fn inject(u: &GridFunction, coarse: Grid) -> Result<GridFunction> {
    check_pair(u.grid(), &coarse)?;
    if *u.grid() == coarse {
        return Ok(u.clone());
    }
    Ok(apply_tensor(u, coarse, &injection_1d(u.grid().n())))
}

/// Interpolation onto `fine`: linear for `order == 2`, cubic for `order == 4`.
pub fn interpolate(u: &GridFunction, fine: Grid, order: usize) -> Result<GridFunction> {
    check_pair(&fine, u.grid())?;
    if *u.grid() == fine {
        return Ok(u.clone());
    }
    let t = match order {
        2 => linear_1d(u.grid().n()),
        4 => cubic_1d(u.grid().n()),
        _ => return Err(Error::Unsupported(format!("interpolation order {order}"))),
    };
    Ok(apply_tensor(u, fine, &t))
}
