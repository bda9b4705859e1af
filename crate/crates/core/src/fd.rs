//! Central finite differences.
//!
//! Every derivative in the crate that is not supplied analytically goes
//! through [`derivative`]. Two stencils are available: the classical
//! three-point rule (error `O(h²)`) and the five-point rule (error `O(h⁴)`).
//! The five-point rule is the default because several quantities are nested
//! derivatives (Christoffel symbols of a pullback metric whose components are
//! themselves finite-difference Jacobians), and the larger steps it tolerates
//! keep roundoff from compounding across levels.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::scalar::{lit, Real};

/// Finite-difference stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Stencil {
    /// `(f(x+h) - f(x-h)) / 2h`
    Central3,
    /// `(f(x-2h) - 8f(x-h) + 8f(x+h) - f(x+2h)) / 12h`
    Central5,
}

/// Step size and stencil for one derivative level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fd<T> {
    pub step: T,
    pub stencil: Stencil,
}

impl<T: Real> Fd<T> {
    pub fn new(step: T, stencil: Stencil) -> Self {
        Self { step, stencil }
    }

    pub fn central3(step: f64) -> Self {
        Self::new(lit(step), Stencil::Central3)
    }

    pub fn central5(step: f64) -> Self {
        Self::new(lit(step), Stencil::Central5)
    }

    /// Metric partials for Christoffel symbols.
    pub fn metric() -> Self {
        Self::central5(1e-4)
    }

    /// Jacobians of maps that are themselves computed by integration
    /// (exponential maps, pullbacks).
    pub fn jacobian() -> Self {
        Self::central5(1e-3)
    }

    /// Derivatives of quantities that already contain a finite difference.
    pub fn nested() -> Self {
        Self::central5(1e-3)
    }

    /// Largest offset the stencil evaluates at, in units of the argument.
    pub fn reach(&self) -> T {
        match self.stencil {
            Stencil::Central3 => self.step,
            Stencil::Central5 => self.step + self.step,
        }
    }
}

/// Derivative at `s = 0` of a curve `s ↦ f(s)` in any linear space.
pub fn derivative<T, V, F>(f: F, fd: Fd<T>) -> Result<V>
where
    T: Real,
    V: Add<Output = V> + Sub<Output = V> + Mul<T, Output = V>,
    F: Fn(T) -> Result<V>,
{
    let h = fd.step;
    match fd.stencil {
        Stencil::Central3 => {
            let fp = f(h)?;
            let fm = f(-h)?;
            Ok((fp - fm) * (T::one() / (h + h)))
        }
        Stencil::Central5 => {
            let two = lit::<T>(2.0);
            let f2m = f(-two * h)?;
            let f1m = f(-h)?;
            let f1p = f(h)?;
            let f2p = f(two * h)?;
            Ok((f2m - f2p + (f1p - f1m) * lit::<T>(8.0)) * (T::one() / (lit::<T>(12.0) * h)))
        }
    }
}

/// Directional derivative `d/ds f(x + s·dir)` at `s = 0`.
pub fn directional<T, V, F>(f: F, x: &DVector<T>, dir: &DVector<T>, fd: Fd<T>) -> Result<V>
where
    T: Real,
    V: Add<Output = V> + Sub<Output = V> + Mul<T, Output = V>,
    F: Fn(&DVector<T>) -> Result<V>,
{
    derivative(|s| f(&(x + dir * s)), fd)
}

/// Partial derivative along coordinate axis `axis`.
pub fn partial<T, V, F>(f: F, x: &DVector<T>, axis: usize, fd: Fd<T>) -> Result<V>
where
    T: Real,
    V: Add<Output = V> + Sub<Output = V> + Mul<T, Output = V>,
    F: Fn(&DVector<T>) -> Result<V>,
{
    derivative(
        |s| {
            let mut y = x.clone();
            y[axis] += s;
            f(&y)
        },
        fd,
    )
}

/// Jacobian of `f: R^k → R^m` at `x`, one column per input coordinate.
pub fn jacobian<T, F>(f: F, x: &DVector<T>, fd: Fd<T>) -> Result<DMatrix<T>>
where
    T: Real,
    F: Fn(&DVector<T>) -> Result<DVector<T>>,
{
    let cols = (0..x.len())
        .map(|j| partial(&f, x, j, fd))
        .collect::<Result<Vec<_>>>()?;
    let rows = cols.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(rows, x.len(), |i, j| cols[j][i]))
}

/// Gradient of a scalar function.
pub fn gradient<T, F>(f: F, x: &DVector<T>, fd: Fd<T>) -> Result<DVector<T>>
where
    T: Real,
    F: Fn(&DVector<T>) -> Result<T>,
{
    let comps = (0..x.len())
        .map(|j| partial(&f, x, j, fd))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(comps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_point_rule_beats_three_point_rule() {
        let f = |s: f64| Ok(s.exp().sin());
        let exact = 1.0f64.cos(); // d/ds sin(e^s) at 0
        let e3 = (derivative(f, Fd::central3(1e-3)).unwrap() - exact).abs();
        let e5 = (derivative(f, Fd::central5(1e-3)).unwrap() - exact).abs();
        assert!(e3 < 1e-6, "{e3}");
        assert!(e5 < 1e-12, "{e5}");
    }

    #[test]
    fn jacobian_of_linear_map_is_exact() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -3.0, 0.5, 0.0, 4.0]);
        let x = DVector::from_vec(vec![0.3, -0.7]);
        let j = jacobian(|y| Ok(&a * y), &x, Fd::central3(1e-3)).unwrap();
        assert!((j - &a).amax() < 1e-12);
    }

    #[test]
    fn gradient_of_quadratic() {
        let x = DVector::<f64>::from_vec(vec![1.0, 2.0]);
        let g = gradient(|y| Ok(y[0] * y[0] + 3.0 * y[0] * y[1]), &x, Fd::metric()).unwrap();
        assert!((g[0] - 8.0).abs() < 1e-9);
        assert!((g[1] - 3.0).abs() < 1e-9);
    }
}
