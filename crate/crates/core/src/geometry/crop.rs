use ndarray::{Array3, Zip};

use super::{BevBox, BevGrid, GeometryError};

/// Bilinearly resample every channel over the axis-aligned bounds of `b`.
///
/// Samples sit at the centers of an `out_size` lattice spanning the bounds;
/// samples beyond the grid edge take the nearest edge value.
pub fn crop_and_resize(
    grid: &BevGrid,
    b: &BevBox,
    out_size: (usize, usize),
) -> Result<Array3<f64>, GeometryError> {
    let (out_rows, out_cols) = out_size;
    if out_rows == 0 || out_cols == 0 {
        return Err(GeometryError::ShapeMismatch(vec![out_rows, out_cols], vec![1, 1]));
    }
    let spec = &grid.spec;
    let [x0, x1, y0, y1] = b.aabb();
    if x1 <= spec.forward[0] || x0 >= spec.forward[1] || y1 <= spec.lateral[0] || y0 >= spec.lateral[1] {
        return Err(GeometryError::EmptyIntersection);
    }
    let (rows, cols) = (spec.rows(), spec.cols());
    let channels = grid.channels.shape()[0];
    let mut out = Array3::zeros((channels, out_rows, out_cols));

    let axis = |lo: f64, hi: f64, n: usize, origin: f64, len: usize| -> Vec<(usize, usize, f64)> {
        (0..n)
            .map(|i| {
                let pos = lo + (i as f64 + 0.5) * (hi - lo) / n as f64;
                let u = ((pos - origin) / spec.cell_size - 0.5).clamp(0.0, (len - 1) as f64);
                let i0 = u.floor() as usize;
                let i1 = (i0 + 1).min(len - 1);
                (i0, i1, u - i0 as f64)
            })
            .collect()
    };
    let row_taps = axis(x0, x1, out_rows, spec.forward[0], rows);
    let col_taps = axis(y0, y1, out_cols, spec.lateral[0], cols);

    for ch in 0..channels {
        let src = grid.channels.index_axis(ndarray::Axis(0), ch);
        for (i, &(r0, r1, tr)) in row_taps.iter().enumerate() {
            for (j, &(c0, c1, tc)) in col_taps.iter().enumerate() {
                let top = src[[r0, c0]] * (1.0 - tc) + src[[r0, c1]] * tc;
                let bottom = src[[r1, c0]] * (1.0 - tc) + src[[r1, c1]] * tc;
                out[[ch, i, j]] = top * (1.0 - tr) + bottom * tr;
            }
        }
    }
    Ok(out)
}

/// Element-wise mean of two crop stacks.
pub fn fuse_mean(a: &Array3<f64>, b: &Array3<f64>) -> Result<Array3<f64>, GeometryError> {
    if a.shape() != b.shape() {
        return Err(GeometryError::ShapeMismatch(a.shape().to_vec(), b.shape().to_vec()));
    }
    let mut out = Array3::zeros(a.raw_dim());
    Zip::from(&mut out)
        .and(a)
        .and(b)
        .for_each(|o, &x, &y| *o = (x + y) / 2.0);
    Ok(out)
}
