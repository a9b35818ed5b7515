//! Point sampling on voxel arrays (continuous voxel-index coordinates).

/// Trilinear sample with edge clamping: coordinates outside `[0, n-1]` are
/// clamped to the border before interpolating.
#[inline]
pub fn trilinear_clamped(data: &[f64], dims: [usize; 3], pos: [f64; 3]) -> f64 {
    let (x0, x1, tx) = axis_weights(pos[0], dims[0]);
    let (y0, y1, ty) = axis_weights(pos[1], dims[1]);
    let (z0, z1, tz) = axis_weights(pos[2], dims[2]);
    let nx = dims[0];
    let nxy = nx * dims[1];
    let at = |x: usize, y: usize, z: usize| data[x + nx * y + nxy * z];

    let c00 = lerp(at(x0, y0, z0), at(x1, y0, z0), tx);
    let c10 = lerp(at(x0, y1, z0), at(x1, y1, z0), tx);
    let c01 = lerp(at(x0, y0, z1), at(x1, y0, z1), tx);
    let c11 = lerp(at(x0, y1, z1), at(x1, y1, z1), tx);
    let c0 = lerp(c00, c10, ty);
    let c1 = lerp(c01, c11, ty);
    lerp(c0, c1, tz)
}

/// Trilinear sample that returns `fill` when `pos` lies outside the voxel
/// domain by more than `tol` along any axis.
#[inline]
pub fn trilinear_or(data: &[f64], dims: [usize; 3], pos: [f64; 3], fill: f64, tol: f64) -> f64 {
    if inside(dims, pos, tol) {
        trilinear_clamped(data, dims, pos)
    } else {
        fill
    }
}

#[inline]
fn inside(dims: [usize; 3], pos: [f64; 3], tol: f64) -> bool {
    (0..3).all(|a| pos[a] >= -tol && pos[a] <= (dims[a] - 1) as f64 + tol)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + t * (b - a)
    }
}

#[inline]
fn axis_weights(c: f64, n: usize) -> (usize, usize, f64) {
    let max = (n - 1) as f64;
    let c = if c.is_nan() { 0.0 } else { c.clamp(0.0, max) };
    let i0 = c.floor() as usize;
    if i0 + 1 >= n {
        (n - 1, n - 1, 0.0)
    } else {
        (i0, i0 + 1, c - i0 as f64)
    }
}

/// Nearest voxel index along one axis. Exact halves round down, and the
/// result is clamped to `[0, n-1]`.
#[inline]
pub fn nearest_index(c: f64, n: usize) -> usize {
    let r = (c - 0.5).ceil();
    if r <= 0.0 || r.is_nan() {
        0
    } else {
        (r as usize).min(n - 1)
    }
}

/// Nearest-neighbour flat index, or `None` when `pos` is more than half a
/// voxel outside the domain on some axis.
#[inline]
pub fn nearest_flat(dims: [usize; 3], pos: [f64; 3]) -> Option<usize> {
    if !inside(dims, pos, 0.5) {
        return None;
    }
    let x = nearest_index(pos[0], dims[0]);
    let y = nearest_index(pos[1], dims[1]);
    let z = nearest_index(pos[2], dims[2]);
    Some(x + dims[0] * (y + dims[1] * z))
}
