//! Dilogarithm, its continuation L, Bloch-Wigner D and Faddeev's quantum dilogarithm.

use crate::error::{FamedError, Result};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::sync::OnceLock;

pub const DEFAULT_DELTA: f64 = 1e-3;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// B_2k for k = 1..=12.
const BERNOULLI: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
];

fn li2_bernoulli(z: C64) -> C64 {
    // Li2(z) = sum B_n u^{n+1}/(n+1)!, u = -Log(1-z)
    let u = -(C64::new(1.0, 0.0) - z).ln();
    let u2 = u * u;
    let mut sum = u - u2 / 4.0;
    let mut pow = u;
    let mut fact = 1.0;
    for (k, b) in BERNOULLI.iter().enumerate() {
        let n = 2 * (k + 1);
        pow *= u2;
        fact *= (n as f64) * (n as f64 + 1.0);
        sum += pow * (*b / fact);
    }
    sum
}

/// Principal dilogarithm on C minus [1, inf).
pub fn li2(z: C64) -> Result<C64> {
    if z.im == 0.0 && z.re > 1.0 {
        return Err(FamedError::OnBranchCut);
    }
    Ok(li2_unchecked(z))
}

fn li2_unchecked(z: C64) -> C64 {
    if z == C64::new(0.0, 0.0) {
        return z;
    }
    if z == C64::new(1.0, 0.0) {
        return C64::new(PI * PI / 6.0, 0.0);
    }
    if z.norm() > 1.0 {
        let l = (-z).ln();
        return -li2_unchecked(z.inv()) - PI * PI / 6.0 - l * l / 2.0;
    }
    if z.re > 0.5 {
        let w = C64::new(1.0, 0.0) - z;
        return PI * PI / 6.0 - z.ln() * w.ln() - li2_unchecked(w);
    }
    li2_bernoulli(z)
}

/// Li2(x - i0) for real x > 1 (the limit from below the cut).
fn li2_below_cut(x: f64) -> C64 {
    let l = x.ln();
    C64::new(PI * PI / 3.0 - l * l / 2.0, 0.0) - li2_unchecked(C64::new(1.0 / x, 0.0)) - I * (PI * l)
}

/// Distance from y to i(-inf,-pi] u [pi, inf).
pub fn cut_distance(y: C64) -> f64 {
    if y.im.abs() >= PI {
        y.re.abs()
    } else {
        y.re.hypot(PI - y.im.abs())
    }
}

/// y = y0 + 2 pi i k with Im y0 in (-pi, pi].
fn reduce_strip(y: C64) -> (C64, f64) {
    let k = ((y.im + PI) / (2.0 * PI)).ceil() - 1.0;
    let mut y0 = C64::new(y.re, y.im - 2.0 * PI * k);
    let mut k = k;
    if y0.im <= -PI {
        y0.im += 2.0 * PI;
        k -= 1.0;
    }
    (y0, k)
}

fn strip_li2(y0: C64) -> C64 {
    let w = -y0.exp();
    if y0.im == PI && y0.re > 0.0 {
        li2_below_cut(w.re)
    } else if w.im == 0.0 && w.re > 1.0 {
        // Im y0 = -pi edge: limit from above
        li2_below_cut(w.re).conj()
    } else {
        li2_unchecked(w)
    }
}

fn guard(y: C64, delta: f64) -> Result<()> {
    let d = cut_distance(y);
    if d < delta {
        return Err(FamedError::TooCloseToCut { distance: d });
    }
    Ok(())
}

/// Analytic continuation of Li2(-e^y) off the cuts i(-inf,-pi) u i(pi,inf).
pub fn cont_l(y: C64) -> Result<C64> {
    cont_l_with(y, DEFAULT_DELTA)
}

pub fn cont_l_with(y: C64, delta: f64) -> Result<C64> {
    guard(y, delta)?;
    Ok(cont_l_unguarded(y))
}

pub(crate) fn cont_l_unguarded(y: C64) -> C64 {
    let (y0, k) = reduce_strip(y);
    let base = strip_li2(y0);
    if y.re > 0.0 && k != 0.0 {
        base - 2.0 * PI * I * k * (y0 + PI * I * k)
    } else {
        base
    }
}

/// Continuation of -Log(1 + e^y).
pub fn cont_l_prime(y: C64) -> Result<C64> {
    cont_l_prime_with(y, DEFAULT_DELTA)
}

pub fn cont_l_prime_with(y: C64, delta: f64) -> Result<C64> {
    guard(y, delta)?;
    Ok(cont_l_prime_unguarded(y))
}

pub(crate) fn cont_l_prime_unguarded(y: C64) -> C64 {
    let (y0, k) = reduce_strip(y);
    let base = -(C64::new(1.0, 0.0) + y0.exp()).ln();
    if y.re > 0.0 {
        base - 2.0 * PI * I * k
    } else {
        base
    }
}

/// L''(y) = -1/(1 + e^{-y}), 2 pi i periodic.
pub fn cont_l_second(y: C64) -> C64 {
    -(C64::new(1.0, 0.0) + (-y).exp()).inv()
}

/// D(z) = Im Li2(z) + arg(1-z) log|z|; zero on the real line.
pub fn bloch_wigner(z: C64) -> f64 {
    if z.im == 0.0 {
        return 0.0;
    }
    li2_unchecked(z).im + (C64::new(1.0, 0.0) - z).arg() * z.norm().ln()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantumParams {
    pub hbar: f64,
    pub b: f64,
}

impl QuantumParams {
    /// Smaller root of (b + 1/b) sqrt(hbar) = 1; needs hbar <= 1/4.
    pub fn from_hbar(hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar <= 0.25) {
            return Err(FamedError::MalformedInput(format!("hbar = {hbar} outside (0, 1/4]")));
        }
        let s = 1.0 / hbar.sqrt();
        let b = (s - (s * s - 4.0).max(0.0).sqrt()) / 2.0;
        Ok(QuantumParams { hbar, b })
    }

    pub fn from_b(b: f64) -> Self {
        let s = b + 1.0 / b;
        QuantumParams { hbar: 1.0 / (s * s), b: b.min(1.0 / b) }
    }

    pub fn c_b(&self) -> f64 {
        0.5 * (self.b + 1.0 / self.b)
    }
}

/// 16-point Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre_16() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(16))
}

pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Integral over R + i0^+ (semicircle of radius r above 0), truncated at |w| = w_max.
/// `f` must be evaluable at both w and -w.
pub fn upper_contour_integral(f: impl Fn(C64) -> C64, r: f64, w_max: f64, cap: f64) -> C64 {
    tilted_contour_integral(f, r, w_max, cap, 0.0)
}

/// Same contour with both rays rotated by `theta` into the upper half plane:
/// -t e^{-i theta} (t from inf to r), an arc of radius r, then t e^{i theta}.
pub fn tilted_contour_integral(f: impl Fn(C64) -> C64, r: f64, w_max: f64, cap: f64, theta: f64) -> C64 {
    let gl = gauss_legendre_16();
    let (arc_mid, arc_half) = (PI / 2.0, PI / 2.0 - theta);
    let mut arc = C64::new(0.0, 0.0);
    for &(t, wt) in semicircle_nodes() {
        let w = C64::from_polar(r, arc_mid + arc_half * t);
        arc += f(w) * (I * w) * wt;
    }
    arc *= -arc_half;
    let (er, el) = (C64::from_polar(1.0, theta), C64::from_polar(1.0, -theta));
    let mut line = C64::new(0.0, 0.0);
    let mut a = r;
    while a < w_max {
        let width = a.min(cap).min(w_max - a).max(1e-300);
        let (mid, half) = (a + width / 2.0, width / 2.0);
        let mut panel = C64::new(0.0, 0.0);
        for &(t, wt) in gl {
            let s = mid + half * t;
            panel += (f(er * s) * er + f(-el * s) * el) * wt;
        }
        line += panel * half;
        a += width;
    }
    arc + line
}

fn semicircle_nodes() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(48))
}

/// log sinh(u) for Re u >= 0, any branch.
fn ln_sinh(u: C64) -> C64 {
    if u.re > 10.0 {
        u - std::f64::consts::LN_2 + (C64::new(1.0, 0.0) - (-2.0 * u).exp()).ln()
    } else {
        u.sinh().ln()
    }
}

fn log_phi_b_strip(z: C64, b: f64) -> C64 {
    if z.re > 0.0 {
        let c = I * (PI / 12.0 * (b * b + 1.0 / (b * b)));
        return c + I * PI * z * z - log_phi_b_strip(-z, b);
    }
    let c_b = 0.5 * (b + 1.0 / b);
    let x = -z.re;
    let theta = PI / 4.0 * x.min(1.0);
    let (s, c) = theta.sin_cos();
    let gamma = (2.0 * x * s + 2.0 * (c_b - z.im.abs()) * c).max(1e-300);
    let freq = 2.0 * (x * c).max(0.0) + 2.0 * (z.im * s).abs();
    let r = 0.5f64.min(PI * b / 2.0).min(1.0 / (1.0 + z.norm()));
    let w_max = r + 37.0 / gamma;
    let cap = 0.5f64.min(1.0 / (1.0 + freq)).min(4.0 / gamma);
    let f = |w: C64| -> C64 {
        // e^{-2izw} / (sinh(bw) sinh(w/b) w); the denominator is odd
        let (u, sign) = if w.re < 0.0 { (-w, -1.0) } else { (w, 1.0) };
        let log_d = ln_sinh(b * u) + ln_sinh(u / b) + u.ln();
        (-2.0 * I * z * w - log_d).exp() * sign
    };
    tilted_contour_integral(f, r, w_max, cap, theta) / 4.0
}

/// Log of Faddeev's quantum dilogarithm (defined modulo 2 pi i outside the strip).
pub fn log_phi_b(z: C64, b: f64) -> Result<C64> {
    let b = b.min(1.0 / b);
    let c_b = 0.5 * (b + 1.0 / b);
    let edge = c_b - b / 2.0;
    let mut z = z;
    let mut acc = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    while z.im >= edge {
        let f = one + (2.0 * PI * b * z - I * (PI * b * b)).exp();
        if f.norm() < 1e-12 {
            return Err(FamedError::PoleProximity);
        }
        acc -= f.ln();
        z -= I * b;
    }
    while z.im <= -edge {
        let f = one + (2.0 * PI * b * (z + I * (b / 2.0))).exp();
        if f.norm() < 1e-12 {
            return Err(FamedError::PoleProximity);
        }
        acc += f.ln();
        z += I * b;
    }
    Ok(acc + log_phi_b_strip(z, b))
}

pub fn phi_b(z: C64, b: f64) -> Result<C64> {
    Ok(log_phi_b(z, b)?.exp())
}

fn wrap_im(v: C64) -> C64 {
    let k = (v.im / (2.0 * PI)).round();
    C64::new(v.re, v.im - 2.0 * PI * k)
}

/// |Log Phi_b(z / 2 pi b) + (i / 2 pi b^2) L(z)|, Log taken modulo 2 pi i.
pub fn phi_semiclassical_residual(z: C64, b: f64) -> Result<f64> {
    let l = cont_l(z)?;
    let lp = log_phi_b(z / (2.0 * PI * b), b)?;
    Ok(wrap_im(lp + I * l / (2.0 * PI * b * b)).norm())
}

/// hbar form: |Log Phi_b(z / 2 pi sqrt hbar) + (i z / 2 pi) L'(z) - (i / pi) L(z) + (i / 2 pi hbar) L(z)|.
pub fn phi_semiclassical_residual_hbar(z: C64, q: &QuantumParams) -> Result<f64> {
    let l = cont_l(z)?;
    let lp = cont_l_prime(z)?;
    let v = log_phi_b(z / (2.0 * PI * q.hbar.sqrt()), q.b)?;
    let approx = -I * z / (2.0 * PI) * lp + I / PI * l - I * l / (2.0 * PI * q.hbar);
    Ok(wrap_im(v - approx).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn series(z: C64) -> C64 {
        let mut s = c(0.0, 0.0);
        let mut p = z;
        for n in 1..4000 {
            s += p / ((n * n) as f64);
            p *= z;
        }
        s
    }

    #[test]
    fn li2_values() {
        assert_eq!(li2(c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        let half = li2(c(0.5, 0.0)).unwrap();
        let closed = PI * PI / 12.0 - std::f64::consts::LN_2.powi(2) / 2.0;
        assert!((half.re - closed).abs() < 1e-14 && half.im.abs() < 1e-15);
        assert!((half - series(c(0.5, 0.0))).norm() < 1e-14);
        assert!(matches!(li2(c(2.0, 0.0)), Err(FamedError::OnBranchCut)));
        assert!((li2(c(-1.0, 0.0)).unwrap().re + PI * PI / 12.0).abs() < 1e-14);
    }

    #[test]
    fn li2_matches_series_in_disk() {
        for k in 0..40 {
            let z = C64::from_polar(0.9, k as f64 * 0.157);
            assert!((li2(z).unwrap() - series(z)).norm() < 1e-12, "{z}");
        }
    }

    #[test]
    fn li2_inversion_at_minus_two() {
        let z = c(-2.0, 0.0);
        let l = (-z).ln();
        let lhs = li2(z.inv()).unwrap();
        let rhs = -li2(z).unwrap() - PI * PI / 6.0 - l * l / 2.0;
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn l_values_and_functional_equations() {
        assert!((cont_l(c(0.0, 0.0)).unwrap() - c(-PI * PI / 12.0, 0.0)).norm() < 1e-14);
        for &(a, bb) in &[(0.3, 0.2), (1.5, -2.0), (0.7, 2.9), (2.0, -0.5)] {
            let y = c(a, bb);
            let p = cont_l(y + 2.0 * PI * I).unwrap();
            assert!((p - cont_l(y).unwrap() + 2.0 * PI * I * (y + PI * I)).norm() < 1e-12);
            let yl = c(-a, bb);
            assert!((cont_l(yl + 2.0 * PI * I).unwrap() - cont_l(yl).unwrap()).norm() < 1e-12);
        }
        assert!(matches!(cont_l(c(1e-4, 4.0)), Err(FamedError::TooCloseToCut { .. })));
    }

    #[test]
    fn l_continuous_across_pi_line() {
        for &a in &[0.4, 1.3, -0.8] {
            let below = cont_l(c(a, PI - 1e-9)).unwrap();
            let above = cont_l(c(a, PI + 1e-9)).unwrap();
            let on = cont_l(c(a, PI)).unwrap();
            assert!((below - above).norm() < 1e-7 && (on - below).norm() < 1e-7, "a = {a}");
            let lb = cont_l_prime(c(a, -PI + 1e-9)).unwrap();
            let la = cont_l_prime(c(a, -PI - 1e-9)).unwrap();
            assert!((lb - la).norm() < 1e-6);
        }
    }

    #[test]
    fn l_prime_matches_derivative() {
        for &(a, bb) in &[(0.3, 0.2), (1.5, -4.0), (-0.7, 2.9), (2.0, 7.5)] {
            let y = c(a, bb);
            let h = 1e-5;
            let fd = (cont_l(y + h).unwrap() - cont_l(y - h).unwrap()) / (2.0 * h);
            assert!((fd - cont_l_prime(y).unwrap()).norm() < 1e-8);
            let fd2 = (cont_l_prime(y + h).unwrap() - cont_l_prime(y - h).unwrap()) / (2.0 * h);
            assert!((fd2 - cont_l_second(y)).norm() < 1e-8);
        }
    }

    #[test]
    fn bloch_wigner_values() {
        assert_eq!(bloch_wigner(c(3.0, 0.0)), 0.0);
        let z = C64::from_polar(1.0, PI / 3.0);
        // sum sin(n pi / 3) / n^2
        let lob: f64 = (1..200000).map(|n| (n as f64 * PI / 3.0).sin() / (n as f64).powi(2)).sum();
        assert!((bloch_wigner(z) - lob).abs() < 1e-9);
        assert!((bloch_wigner(z) - 1.0149416064096535).abs() < 1e-14);
        let w = c(0.5, 1.0);
        let one = c(1.0, 0.0);
        assert!((bloch_wigner(w) - bloch_wigner((w - one) / w)).abs() < 1e-14);
        assert!((bloch_wigner(w) - bloch_wigner((one - w).inv())).abs() < 1e-14);
        assert!((bloch_wigner(w.conj()) + bloch_wigner(w)).abs() < 1e-14);
    }

    #[test]
    fn quantum_params() {
        let q = QuantumParams::from_hbar(1.0 / 20.0).unwrap();
        assert!(((q.b + 1.0 / q.b) * q.hbar.sqrt() - 1.0).abs() < 1e-14);
        assert!(q.b < 1.0);
        assert!(QuantumParams::from_hbar(1.0).is_err());
    }

    #[test]
    fn phi_b_at_zero() {
        for &b in &[0.3, 0.7, 1.0] {
            let v = phi_b(c(0.0, 0.0), b).unwrap();
            let expect = (I * (PI / 24.0 * (b * b + 1.0 / (b * b)))).exp();
            assert!((v - expect).norm() < 1e-10, "b = {b}: {v} vs {expect}");
        }
    }

    #[test]
    fn phi_b_inversion_example() {
        let (z, b) = (c(0.3, 0.1), 0.7);
        let v = phi_b(z, b).unwrap() * phi_b(-z, b).unwrap()
            * (-I * (PI / 12.0 * (b * b + 1.0 / (b * b)))).exp()
            * (-I * PI * z * z).exp();
        assert!((v - 1.0).norm() < 1e-9);
    }

    #[test]
    fn phi_b_unitarity_and_infinity() {
        let b = 0.6;
        for &x in &[-2.0, -0.3, 0.0, 0.8, 3.0] {
            let v = phi_b(c(x, 0.0), b).unwrap();
            assert!((v.conj() * phi_b(c(x, 0.0), b).unwrap() - 1.0).norm() < 1e-9 || (v.norm() - 1.0).abs() < 1e-9);
            assert!((v.norm() - 1.0).abs() < 1e-9);
        }
        let far = phi_b(c(-30.0, 0.2), b).unwrap();
        assert!((far.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn phi_b_functional_equation() {
        let b = 0.55;
        for &z in &[c(0.2, 0.1), c(-0.7, 0.3), c(1.1, -0.2), c(-6.0, 0.1), c(5.0, -0.2), c(-0.05, 0.4)] {
            let lhs = phi_b(z - I * (b / 2.0), b).unwrap();
            let rhs = (1.0 + (2.0 * PI * b * z).exp()) * phi_b(z + I * (b / 2.0), b).unwrap();
            assert!((lhs - rhs).norm() < 1e-8 * lhs.norm().max(1.0));
            let lhs = phi_b(z - I / (2.0 * b), b).unwrap();
            let rhs = (1.0 + (2.0 * PI * z / b).exp()) * phi_b(z + I / (2.0 * b), b).unwrap();
            assert!((lhs - rhs).norm() < 1e-7 * lhs.norm().max(1.0), "{z}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn phi_b_pole() {
        let b = 0.5;
        let c_b = 0.5 * (b + 1.0 / b);
        assert!(matches!(log_phi_b(c(0.0, c_b), b), Err(FamedError::PoleProximity)));
    }

    #[test]
    fn semiclassical_quadratic_scaling() {
        let z = c(0.5, 0.0);
        let r1 = phi_semiclassical_residual(z, 0.1).unwrap();
        let r2 = phi_semiclassical_residual(z, 0.05).unwrap();
        assert!((r1 / r2 - 4.0).abs() < 0.2, "{r1} {r2}");
        let lead = PI / 12.0 * (z.exp() / (1.0 + z.exp())).norm();
        assert!((r2 / 0.0025 - lead).abs() < 0.05 * lead);
    }

    #[test]
    fn d_identity_grid() {
        for i in -5..=5 {
            for j in -6..=6 {
                let y = c(0.37 * i as f64 + 0.01, 1.1 * j as f64 + 0.05);
                if cut_distance(y) < 0.01 {
                    continue;
                }
                let lhs = cont_l(y).unwrap().im - cont_l_prime(y).unwrap().im * (-y.exp()).norm().ln();
                assert!((lhs - bloch_wigner(-y.exp())).abs() < 1e-10, "{y}");
            }
        }
    }

    #[test]
    fn integral_form_of_li2() {
        // -i/(2 pi) Li2(-e^y) = int_{R + i0} exp(-i y v / pi) / (4 v^2 sinh v) dv
        for &y in &[c(0.3, 0.5), c(-1.0, -1.2), c(0.0, 2.0)] {
            let gamma = 1.0 - y.im.abs() / PI;
            let f = |v: C64| (-I * y * v / PI).exp() / (4.0 * v * v * v.sinh());
            let val = upper_contour_integral(f, 0.5, 0.5 + 36.0 / gamma, 0.25);
            let expect = -I / (2.0 * PI) * li2(-y.exp()).unwrap();
            assert!((val - expect).norm() < 1e-10, "{y}: {val} vs {expect}");
        }
    }

    proptest! {
        #[test]
        fn li2_inversion(re in -4.0f64..4.0, im in -4.0f64..4.0) {
            let z = c(re, im);
            prop_assume!(im.abs() > 1e-3 || re < 0.9);
            prop_assume!(z.norm() > 1e-3);
            let l = (-z).ln();
            let lhs = li2(z.inv()).unwrap();
            let rhs = -li2(z).unwrap() - PI * PI / 6.0 - l * l / 2.0;
            prop_assert!((lhs - rhs).norm() < 1e-11);
        }

        #[test]
        fn bloch_wigner_antisymmetric(re in -3.0f64..3.0, im in 0.01f64..3.0) {
            let z = c(re, im);
            prop_assert!((bloch_wigner(z.conj()) + bloch_wigner(z)).abs() < 1e-13);
        }

        #[test]
        fn l_second_periodic(re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let y = c(re, im);
            prop_assume!(cut_distance(y) > 0.1 && cut_distance(y + 2.0 * PI * I) > 0.1);
            let h = 1e-4;
            let d2 = |y: C64| (cont_l(y + h).unwrap() - 2.0 * cont_l(y).unwrap() + cont_l(y - h).unwrap()) / (h * h);
            prop_assert!((d2(y + 2.0 * PI * I) - d2(y)).norm() < 1e-4);
        }

        #[test]
        fn monotonicity_derivative(a in -2.0f64..2.0, bb in -3.0f64..3.0) {
            let y = c(a, bb);
            let f = |y: C64| (I * li2(-y.exp()).unwrap()).re;
            let h = 1e-5;
            let fd = (f(y + I * h) - f(y - I * h)) / (2.0 * h);
            let expect = (1.0 + y.exp()).norm().ln();
            prop_assert!((fd - expect).abs() < 1e-6 * (1.0 + expect.abs()));
        }
    }
}
