//! Finite-difference stencils shared by the norm, spray, and chart modules.
//!
//! All stencils are central and carry one Richardson extrapolation level
//! (evaluate at h and h/2, combine to cancel the leading h^2 error term).
//! Step sizes are chosen by the callers; the conventions are
//! `first_step` for first derivatives of analytic quantities,
//! `second_step` for second derivatives, and square-root widened steps for
//! derivatives of quantities that are themselves finite-difference built.

use nalgebra::DVector;

/// Base relative step for first derivatives: cbrt(machine epsilon).
pub fn first_step(scale: f64) -> f64 {
    f64::EPSILON.cbrt() * scale
}

/// Base relative step for second derivatives: eps^(1/4).
pub fn second_step(scale: f64) -> f64 {
    f64::EPSILON.powf(0.25) * scale
}

/// Base relative step for third directional derivatives: eps^(1/5).
pub fn third_step(scale: f64) -> f64 {
    f64::EPSILON.powf(0.2) * scale
}

/// Base relative step for fourth directional derivatives: eps^(1/6).
pub fn fourth_step(scale: f64) -> f64 {
    f64::EPSILON.powf(1.0 / 6.0) * scale
}

/// Widened step for differentiating FD-built quantities: sqrt of the base.
pub fn widened_step(scale: f64) -> f64 {
    f64::EPSILON.cbrt().sqrt() * scale
}

/// d/dt f(t) at t = 0, scalar valued.
pub fn deriv1<F: Fn(f64) -> f64>(f: F, h: f64) -> f64 {
    let d = |hh: f64| (f(hh) - f(-hh)) / (2.0 * hh);
    let coarse = d(h);
    let fine = d(0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

/// d/dt f(t) at t = 0, vector valued.
pub fn deriv1_vec<F: Fn(f64) -> DVector<f64>>(f: F, h: f64) -> DVector<f64> {
    let d = |hh: f64| (f(hh) - f(-hh)) / (2.0 * hh);
    let coarse = d(h);
    let fine = d(0.5 * h);
    (fine * 4.0 - coarse) / 3.0
}

/// Fallible vector-valued first derivative; propagates evaluation errors.
pub fn try_deriv1_vec<F>(f: F, h: f64) -> crate::error::Result<DVector<f64>>
where
    F: Fn(f64) -> crate::error::Result<DVector<f64>>,
{
    let d = |hh: f64| -> crate::error::Result<DVector<f64>> { Ok((f(hh)? - f(-hh)?) / (2.0 * hh)) };
    let coarse = d(h)?;
    let fine = d(0.5 * h)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

/// Fallible vector-valued mixed second derivative.
pub fn try_cross2_vec<F>(f: F, ha: f64, hb: f64) -> crate::error::Result<DVector<f64>>
where
    F: Fn(f64, f64) -> crate::error::Result<DVector<f64>>,
{
    let d = |sa: f64, sb: f64| -> crate::error::Result<DVector<f64>> {
        Ok((f(sa, sb)? - f(sa, -sb)? - f(-sa, sb)? + f(-sa, -sb)?) / (4.0 * sa * sb))
    };
    let coarse = d(ha, hb)?;
    let fine = d(0.5 * ha, 0.5 * hb)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

/// d^2/dt^2 f(t) at t = 0.
pub fn deriv2<F: Fn(f64) -> f64>(f: F, h: f64) -> f64 {
    let f0 = f(0.0);
    let d = |hh: f64| (f(hh) - 2.0 * f0 + f(-hh)) / (hh * hh);
    let coarse = d(h);
    let fine = d(0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

/// Mixed second derivative d^2/(da db) f(a, b) at (0, 0).
pub fn cross2<F: Fn(f64, f64) -> f64>(f: F, ha: f64, hb: f64) -> f64 {
    let d =
        |sa: f64, sb: f64| (f(sa, sb) - f(sa, -sb) - f(-sa, sb) + f(-sa, -sb)) / (4.0 * sa * sb);
    let coarse = d(ha, hb);
    let fine = d(0.5 * ha, 0.5 * hb);
    (4.0 * fine - coarse) / 3.0
}

/// Mixed second derivative, vector valued.
pub fn cross2_vec<F: Fn(f64, f64) -> DVector<f64>>(f: F, ha: f64, hb: f64) -> DVector<f64> {
    let d =
        |sa: f64, sb: f64| (f(sa, sb) - f(sa, -sb) - f(-sa, sb) + f(-sa, -sb)) / (4.0 * sa * sb);
    let coarse = d(ha, hb);
    let fine = d(0.5 * ha, 0.5 * hb);
    (fine * 4.0 - coarse) / 3.0
}

/// Third mixed directional derivative d^3/(da db dc) f(a u + b v + c w) at 0,
/// where `f` is given the three stencil offsets.
pub fn cross3<F: Fn(f64, f64, f64) -> f64>(f: F, h: f64) -> f64 {
    let d = |hh: f64| {
        let mut acc = 0.0;
        for &sa in &[1.0, -1.0] {
            for &sb in &[1.0, -1.0] {
                for &sc in &[1.0, -1.0] {
                    acc += sa * sb * sc * f(sa * hh, sb * hh, sc * hh);
                }
            }
        }
        acc / (8.0 * hh * hh * hh)
    };
    let coarse = d(h);
    let fine = d(0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

/// Fourth mixed directional derivative d^4/(da db dc dd) at 0.
pub fn cross4<F: Fn(f64, f64, f64, f64) -> f64>(f: F, h: f64) -> f64 {
    let d = |hh: f64| {
        let mut acc = 0.0;
        for &sa in &[1.0, -1.0] {
            for &sb in &[1.0, -1.0] {
                for &sc in &[1.0, -1.0] {
                    for &sd in &[1.0, -1.0] {
                        acc += sa * sb * sc * sd * f(sa * hh, sb * hh, sc * hh, sd * hh);
                    }
                }
            }
        }
        acc / (16.0 * hh.powi(4))
    };
    let coarse = d(h);
    let fine = d(0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

/// Fourth-order one-sided first derivative at the left end of a uniform
/// sample grid f0..f4 with spacing dt.
pub fn forward_deriv5(samples: &[DVector<f64>], dt: f64) -> DVector<f64> {
    assert!(samples.len() >= 5, "five samples required");
    (&samples[0] * -25.0 + &samples[1] * 48.0 - &samples[2] * 36.0 + &samples[3] * 16.0
        - &samples[4] * 3.0)
        / (12.0 * dt)
}

/// Fourth-order first derivatives of vector samples on a uniform grid
/// (central stencils inside, one-sided at the ends).
pub fn deriv_samples(samples: &[DVector<f64>], dt: f64) -> Vec<DVector<f64>> {
    let n = samples.len();
    assert!(n >= 5, "five samples required");
    let apply = |coeffs: [f64; 5], idx: [usize; 5]| {
        let mut acc = DVector::zeros(samples[0].len());
        for (c, &i) in coeffs.iter().zip(idx.iter()) {
            acc += &samples[i] * (*c / (12.0 * dt));
        }
        acc
    };
    (0..n)
        .map(|k| {
            if k >= 2 && k + 2 < n {
                apply([1.0, -8.0, 0.0, 8.0, -1.0], [k - 2, k - 1, k, k + 1, k + 2])
            } else if k == 0 {
                apply([-25.0, 48.0, -36.0, 16.0, -3.0], [0, 1, 2, 3, 4])
            } else if k == 1 {
                apply([-3.0, -10.0, 18.0, -6.0, 1.0], [0, 1, 2, 3, 4])
            } else if k == n - 2 {
                apply(
                    [-1.0, 6.0, -18.0, 10.0, 3.0],
                    [n - 5, n - 4, n - 3, n - 2, n - 1],
                )
            } else {
                apply(
                    [3.0, -16.0, 36.0, -48.0, 25.0],
                    [n - 5, n - 4, n - 3, n - 2, n - 1],
                )
            }
        })
        .collect()
}
