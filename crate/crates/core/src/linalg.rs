//! Fixed-size complex matrices for one- and two-qubit gates.
//!
//! Matrices are row-major `[[C64; N]; N]`. Two-qubit matrices use the basis
//! index `2 * bit(first target) + bit(second target)`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type Mat2 = [[C64; 2]; 2];
pub type Mat4 = [[C64; 4]; 4];

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn identity<const N: usize>() -> [[C64; N]; N] {
    let mut m = [[ZERO; N]; N];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = ONE;
    }
    m
}

pub fn matmul<const N: usize>(a: &[[C64; N]; N], b: &[[C64; N]; N]) -> [[C64; N]; N] {
    let mut out = [[ZERO; N]; N];
    for i in 0..N {
        for k in 0..N {
            let aik = a[i][k];
            if aik == ZERO {
                continue;
            }
            for j in 0..N {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn dagger<const N: usize>(a: &[[C64; N]; N]) -> [[C64; N]; N] {
    let mut out = [[ZERO; N]; N];
    for i in 0..N {
        for j in 0..N {
            out[j][i] = a[i][j].conj();
        }
    }
    out
}

/// Largest entry-wise modulus of `a - b`.
pub fn max_abs_diff<const N: usize>(a: &[[C64; N]; N], b: &[[C64; N]; N]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..N {
        for j in 0..N {
            worst = worst.max((a[i][j] - b[i][j]).norm());
        }
    }
    worst
}

/// `‖U†U − I‖_max`.
pub fn unitarity_error<const N: usize>(u: &[[C64; N]; N]) -> f64 {
    max_abs_diff(&matmul(&dagger(u), u), &identity())
}

pub fn trace<const N: usize>(u: &[[C64; N]; N]) -> C64 {
    (0..N).map(|i| u[i][i]).sum()
}

pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// Haar-random element of U(N).
///
/// Orthonormalizes the columns of a complex Ginibre matrix by modified
/// Gram-Schmidt. The implied R factor has a positive real diagonal, which is
/// the phase-corrected QR construction.
pub fn haar_unitary<const N: usize, R: Rng + ?Sized>(rng: &mut R) -> [[C64; N]; N] {
    let mut cols = [[ZERO; N]; N];
    for col in cols.iter_mut() {
        for z in col.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z = C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
        }
    }
    for j in 0..N {
        for k in 0..j {
            let proj: C64 = (0..N).map(|i| cols[k][i].conj() * cols[j][i]).sum();
            let basis = cols[k];
            for (z, v) in cols[j].iter_mut().zip(basis) {
                *z -= proj * v;
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in cols[j].iter_mut() {
            *z /= norm;
        }
    }
    let mut u = [[ZERO; N]; N];
    for (j, col) in cols.iter().enumerate() {
        for (i, z) in col.iter().enumerate() {
            u[i][j] = *z;
        }
    }
    u
}

/// Single-qubit gate `U(θ, φ, λ)` in the usual Euler form.
pub fn euler(theta: f64, phi: f64, lambda: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [C64::new(c, 0.0), -C64::from_polar(s, lambda)],
        [C64::from_polar(s, phi), C64::from_polar(c, phi + lambda)],
    ]
}

pub fn rz(angle: f64) -> Mat2 {
    [
        [C64::from_polar(1.0, -angle / 2.0), ZERO],
        [ZERO, C64::from_polar(1.0, angle / 2.0)],
    ]
}

pub fn rx(angle: f64) -> Mat2 {
    let (s, c) = (angle / 2.0).sin_cos();
    [[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]]
}

pub fn hadamard() -> Mat2 {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

pub fn pauli_x() -> Mat2 {
    [[ZERO, ONE], [ONE, ZERO]]
}

pub fn pauli_y() -> Mat2 {
    [[ZERO, -I], [I, ZERO]]
}

pub fn pauli_z() -> Mat2 {
    [[ONE, ZERO], [ZERO, -ONE]]
}

/// Pauli by code: 0 = I, 1 = X, 2 = Y, 3 = Z.
pub fn pauli(code: u8) -> Mat2 {
    match code & 3 {
        0 => identity(),
        1 => pauli_x(),
        2 => pauli_y(),
        _ => pauli_z(),
    }
}

pub fn cx() -> Mat4 {
    let mut m = [[ZERO; 4]; 4];
    m[0][0] = ONE;
    m[1][1] = ONE;
    m[2][3] = ONE;
    m[3][2] = ONE;
    m
}

pub fn cz() -> Mat4 {
    let mut m = identity::<4>();
    m[3][3] = -ONE;
    m
}

/// `exp(-i θ/2 Z⊗Z)`.
pub fn zz(theta: f64) -> Mat4 {
    let mut m = [[ZERO; 4]; 4];
    let minus = C64::from_polar(1.0, -theta / 2.0);
    let plus = C64::from_polar(1.0, theta / 2.0);
    m[0][0] = minus;
    m[1][1] = plus;
    m[2][2] = plus;
    m[3][3] = minus;
    m
}
