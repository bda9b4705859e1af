//! Classical fixed-step Runge–Kutta for second-order systems `q̈ = a(q, q̇)`.

use nalgebra::DVector;

use crate::error::{GeomError, Result};
use crate::scalar::{lit, to_f64, Real};

/// One RK4 step of `(q̇, v̇) = (v, accel(q, v))`.
pub fn rk4_step<T, A>(
    accel: &A,
    q: &DVector<T>,
    v: &DVector<T>,
    h: T,
) -> Result<(DVector<T>, DVector<T>)>
where
    T: Real,
    A: Fn(&DVector<T>, &DVector<T>) -> Result<DVector<T>>,
{
    let (dq, dv) = rk4_increments(accel, q, v, h)?;
    Ok((q + dq, v + dv))
}

/// Increments `(Δq, Δv)` of one RK4 step.
fn rk4_increments<T, A>(
    accel: &A,
    q: &DVector<T>,
    v: &DVector<T>,
    h: T,
) -> Result<(DVector<T>, DVector<T>)>
where
    T: Real,
    A: Fn(&DVector<T>, &DVector<T>) -> Result<DVector<T>>,
{
    let half = h * lit::<T>(0.5);
    let k1q = v.clone();
    let k1v = accel(q, v)?;
    let k2q = v + &k1v * half;
    let k2v = accel(&(q + &k1q * half), &k2q)?;
    let k3q = v + &k2v * half;
    let k3v = accel(&(q + &k2q * half), &k3q)?;
    let k4q = v + &k3v * h;
    let k4v = accel(&(q + &k3q * h), &k4q)?;
    let sixth = h / lit::<T>(6.0);
    let two = lit::<T>(2.0);
    Ok((
        (k1q + (k2q + k3q) * two + k4q) * sixth,
        (k1v + (k2v + k3v) * two + k4v) * sixth,
    ))
}

/// Kahan-compensated `x += dx`; `c` carries the lost low-order bits.
fn compensated_add<T: Real>(x: &mut DVector<T>, c: &mut DVector<T>, dx: &DVector<T>) {
    for i in 0..x.len() {
        let y = dx[i] - c[i];
        let t = x[i] + y;
        c[i] = (t - x[i]) - y;
        x[i] = t;
    }
}

/// Integrates over `[0, duration]` with `steps` equal steps, calling `visit`
/// with `(t, q, v)` at every node including `t = 0`. `post_step` may modify
/// the velocity after each step.
///
/// The state is accumulated with compensated summation so that roundoff
/// stays below the truncation error up to a few thousand steps.
pub fn integrate<T, A, P, V>(
    accel: A,
    post_step: P,
    q0: DVector<T>,
    v0: DVector<T>,
    duration: T,
    steps: usize,
    mut visit: V,
) -> Result<()>
where
    T: Real,
    A: Fn(&DVector<T>, &DVector<T>) -> Result<DVector<T>>,
    P: Fn(&DVector<T>, DVector<T>) -> Result<DVector<T>>,
    V: FnMut(T, &DVector<T>, &DVector<T>) -> Result<()>,
{
    if steps == 0 {
        return Err(GeomError::InvalidArgument("steps must be >= 1".into()));
    }
    let h = duration / lit::<T>(steps as f64);
    let (mut q, mut v) = (q0, v0);
    let mut cq = DVector::zeros(q.len());
    let mut cv = DVector::zeros(v.len());
    visit(T::zero(), &q, &v)?;
    for i in 1..=steps {
        let (dq, dv) = rk4_increments(&accel, &q, &v, h)?;
        compensated_add(&mut q, &mut cq, &dq);
        compensated_add(&mut v, &mut cv, &dv);
        let t = h * lit::<T>(i as f64);
        if !q.iter().chain(v.iter()).all(|x| x.is_finite()) {
            return Err(GeomError::BlowUp { t: to_f64(t) });
        }
        let adjusted = post_step(&q, v.clone())?;
        if adjusted != v {
            cv.fill(T::zero());
            v = adjusted;
        }
        visit(t, &q, &v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_is_fourth_order() {
        let accel = |q: &DVector<f64>, _: &DVector<f64>| Ok(-q.clone());
        let err = |steps: usize| {
            let mut last = (0.0, 0.0);
            integrate(
                accel,
                |_, v| Ok(v),
                DVector::from_element(1, 1.0),
                DVector::from_element(1, 0.0),
                1.0,
                steps,
                |_, q, _| {
                    last = (q[0], 0.0);
                    Ok(())
                },
            )
            .unwrap();
            (last.0 - 1.0f64.cos()).abs()
        };
        let ratio = err(20) / err(40);
        assert!((ratio - 16.0).abs() < 2.0, "ratio {ratio}");
    }

    #[test]
    fn zero_steps_rejected() {
        let r = integrate(
            |q: &DVector<f64>, _: &DVector<f64>| Ok(q.clone()),
            |_, v| Ok(v),
            DVector::zeros(1),
            DVector::zeros(1),
            1.0,
            0,
            |_, _, _| Ok(()),
        );
        assert!(r.is_err());
    }
}
