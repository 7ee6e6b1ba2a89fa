//! Smooth building blocks: the compactly supported bump used as the time
//! profile of the perturbation, and a C^∞ monotone step used for every
//! cutoff and blend.

use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels.
pub(crate) fn integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, mut f: F) -> f64 {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    let rule = RULE.get_or_init(|| GaussLegendre::new(16.try_into().unwrap()));
    if b == a {
        return 0.0;
    }
    let width = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * width;
            rule.integrate(lo, lo + width, &mut f)
        })
        .sum()
}

/// Unnormalized bump `exp(1 - 1/(1 - w²))`, `w = 2s - 1`, supported on (0, 1)
/// with peak value 1 at `s = 1/2`. Returns the value and its derivative in `s`.
#[inline]
pub fn bump(s: f64) -> (f64, f64) {
    if s <= 0.0 || s >= 1.0 {
        return (0.0, 0.0);
    }
    let w = 2.0 * s - 1.0;
    let q = 1.0 - w * w;
    let arg = 1.0 - 1.0 / q;
    if arg < -700.0 {
        return (0.0, 0.0);
    }
    let value = arg.exp();
    // d/dw (-1/q) = -2w/q², chain rule ds = dw/2
    let slope = value * (-2.0 * w / (q * q)) * 2.0;
    (value, slope)
}

/// `∫₀¹ bump(s) ds`.
pub fn bump_integral() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| integrate(0.0, 1.0, 32, |s| bump(s).0))
}

/// Value and first three derivatives of a scalar function at a point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet3 {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Jet3 {
    pub const fn constant(value: f64) -> Self {
        Self {
            value,
            d1: 0.0,
            d2: 0.0,
            d3: 0.0,
        }
    }

    /// Jet of `u ↦ f(σu)` for `σ = ±1`, given the jet of `f` at `σu`.
    pub fn reflect(self, sigma: f64) -> Self {
        Self {
            value: self.value,
            d1: sigma * self.d1,
            d2: self.d2,
            d3: sigma * self.d3,
        }
    }

    pub fn scale(self, k: f64) -> Self {
        Self {
            value: k * self.value,
            d1: k * self.d1,
            d2: k * self.d2,
            d3: k * self.d3,
        }
    }
}

/// C^∞ step: 0 for `u <= 0`, 1 for `u >= 1`, written as the logistic
/// function of `ζ(u) = 1/(1-u) - 1/u`, which equals
/// `e^{-1/u} / (e^{-1/u} + e^{-1/(1-u)})`.
pub fn smooth_step(u: f64) -> Jet3 {
    if u <= 0.0 {
        return Jet3::constant(0.0);
    }
    if u >= 1.0 {
        return Jet3::constant(1.0);
    }
    let v = 1.0 - u;
    let zeta = 1.0 / v - 1.0 / u;
    if zeta.abs() > 700.0 {
        return Jet3::constant(if zeta > 0.0 { 1.0 } else { 0.0 });
    }
    // logistic σ(ζ) and its derivatives in ζ, written without overflow
    let e = (-zeta.abs()).exp();
    let sig = if zeta >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    let s1 = e / ((1.0 + e) * (1.0 + e));
    let s2 = s1 * (1.0 - 2.0 * sig);
    let s3 = s1 * (1.0 - 6.0 * sig + 6.0 * sig * sig);

    let z1 = 1.0 / (v * v) + 1.0 / (u * u);
    let z2 = 2.0 / (v * v * v) - 2.0 / (u * u * u);
    let z3 = 6.0 / (v * v * v * v) + 6.0 / (u * u * u * u);

    Jet3 {
        value: sig,
        d1: s1 * z1,
        d2: s2 * z1 * z1 + s1 * z2,
        d3: s3 * z1 * z1 * z1 + 3.0 * s2 * z1 * z2 + s1 * z3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_is_flat_at_the_ends_and_peaks_at_one() {
        assert_eq!(bump(0.0), (0.0, 0.0));
        assert_eq!(bump(1.0), (0.0, 0.0));
        assert!((bump(0.5).0 - 1.0).abs() < 1e-15);
        assert!(bump(1e-3).0 < 1e-100);
    }

    #[test]
    fn bump_derivative_matches_central_difference() {
        for &s in &[0.1, 0.3, 0.5, 0.77, 0.9] {
            let h = 1e-6;
            let fd = (bump(s + h).0 - bump(s - h).0) / (2.0 * h);
            assert!((fd - bump(s).1).abs() < 1e-7, "s={s}");
        }
    }

    #[test]
    fn bump_integral_value() {
        // ∫ exp(1 - 1/(1-w²)) dw/2 over (-1, 1)
        let crude: f64 = (1..200_000).map(|k| bump(k as f64 / 200_000.0).0).sum::<f64>() / 200_000.0;
        assert!((bump_integral() - crude).abs() < 1e-9);
    }

    #[test]
    fn smooth_step_is_monotone_and_symmetric() {
        let mut prev = 0.0;
        for k in 0..=1000 {
            let u = k as f64 / 1000.0;
            let s = smooth_step(u);
            assert!(s.value >= prev);
            prev = s.value;
            let mirror = smooth_step(1.0 - u);
            assert!((s.value + mirror.value - 1.0).abs() < 1e-14);
        }
        assert!((smooth_step(0.5).value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn smooth_step_derivatives_match_finite_differences() {
        let h = 1e-5;
        for &u in &[0.05, 0.2, 0.45, 0.5, 0.63, 0.9] {
            let j = smooth_step(u);
            let (p, m) = (smooth_step(u + h), smooth_step(u - h));
            assert!(((p.value - m.value) / (2.0 * h) - j.d1).abs() < 1e-6, "d1 at {u}");
            assert!(((p.d1 - m.d1) / (2.0 * h) - j.d2).abs() < 1e-5, "d2 at {u}");
            assert!(((p.d2 - m.d2) / (2.0 * h) - j.d3).abs() < 1e-4, "d3 at {u}");
        }
    }
}
