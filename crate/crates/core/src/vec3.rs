//! Small fixed-size vector and symmetric-tensor helpers.

pub type Vec3 = [f64; 3];

/// Symmetric 3x3 tensor stored as `[xx, yy, zz, xy, xz, yz]`.
pub type Sym3 = [f64; 6];

/// Position of entry `(i, j)` in a [`Sym3`].
#[inline]
pub const fn sym_index(i: usize, j: usize) -> usize {
    match (i, j) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (0, 1) | (1, 0) => 3,
        (0, 2) | (2, 0) => 4,
        _ => 5,
    }
}

#[inline]
pub fn sym_get(s: &Sym3, i: usize, j: usize) -> f64 {
    s[sym_index(i, j)]
}

#[inline]
pub fn outer_sym(a: &Vec3) -> Sym3 {
    [
        a[0] * a[0],
        a[1] * a[1],
        a[2] * a[2],
        a[0] * a[1],
        a[0] * a[2],
        a[1] * a[2],
    ]
}

/// `s . w` for symmetric `s`.
#[inline]
pub fn sym_mul_vec(s: &Sym3, w: &Vec3) -> Vec3 {
    [
        s[0] * w[0] + s[3] * w[1] + s[4] * w[2],
        s[3] * w[0] + s[1] * w[1] + s[5] * w[2],
        s[4] * w[0] + s[5] * w[1] + s[2] * w[2],
    ]
}

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: &Vec3, c: f64) -> Vec3 {
    [a[0] * c, a[1] * c, a[2] * c]
}

#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// An orthonormal pair completing `e` (assumed unit) to a right-handed frame.
pub fn orthonormal_frame(e: &Vec3) -> (Vec3, Vec3) {
    let helper = if e[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = cross(e, &helper);
    let e1 = scale(&e1, 1.0 / norm(&e1));
    let e2 = cross(e, &e1);
    (e1, e2)
}
