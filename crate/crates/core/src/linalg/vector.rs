//! Dense complex vector helpers shared by the solvers.

use super::Complex;

pub const ZERO: Complex = Complex::new(0.0, 0.0);
pub const ONE: Complex = Complex::new(1.0, 0.0);

pub fn zeros(n: usize) -> Vec<Complex> {
    vec![ZERO; n]
}

/// Euclidean norm over complex entries.
pub fn norm2(x: &[Complex]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm_inf(x: &[Complex]) -> f64 {
    x.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Hermitian inner product `xᴴ y`.
pub fn dot(x: &[Complex], y: &[Complex]) -> Complex {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// `y += alpha * x`
pub fn axpy(alpha: Complex, x: &[Complex], y: &mut [Complex]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: Complex, x: &mut [Complex]) {
    for v in x.iter_mut() {
        *v *= alpha;
    }
}

pub fn sub(a: &[Complex], b: &[Complex]) -> Vec<Complex> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add_assign(a: &mut [Complex], b: &[Complex]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

pub fn is_finite(x: &[Complex]) -> bool {
    x.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

pub fn from_real(x: &[f64]) -> Vec<Complex> {
    x.iter().map(|&v| Complex::new(v, 0.0)).collect()
}
