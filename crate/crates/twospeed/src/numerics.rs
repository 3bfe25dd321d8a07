//! Shared numerical utilities: 1D function handles, interpolation,
//! quadrature and stencil helpers, and small geometry routines used by the
//! characteristic-coordinate quadrature.

use std::sync::Arc;

/// Dense row-major 2D array of f64, indexed (i, j).
#[derive(Clone, Debug)]
pub struct Grid2 {
    ni: usize,
    nj: usize,
    data: Vec<f64>,
}

impl Grid2 {
    pub fn new(ni: usize, nj: usize, fill: f64) -> Self {
        Grid2 {
            ni,
            nj,
            data: vec![fill; ni * nj],
        }
    }

    pub fn ni(&self) -> usize {
        self.ni
    }

    pub fn nj(&self) -> usize {
        self.nj
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.ni && j < self.nj);
        self.data[i * self.nj + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.ni && j < self.nj);
        self.data[i * self.nj + j] = v;
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| {
            if v.is_finite() {
                m.max(v.abs())
            } else {
                m
            }
        })
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar function of one variable with an evaluable derivative.
///
/// Closures without an explicit derivative fall back to a central
/// difference at a fixed small step, accurate enough for C^2 data.
#[derive(Clone)]
pub enum Func1 {
    Zero,
    Const(f64),
    /// Polynomial coefficients, lowest order first.
    Poly(Vec<f64>),
    Spline(Arc<CubicSpline>),
    AntiDeriv(Arc<CumulativeIntegral>),
    Closure {
        f: ScalarFn,
        df: Option<ScalarFn>,
    },
}

impl std::fmt::Debug for Func1 {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Func1::Zero => write!(fm, "Func1::Zero"),
            Func1::Const(c) => write!(fm, "Func1::Const({c})"),
            Func1::Poly(c) => write!(fm, "Func1::Poly({c:?})"),
            Func1::Spline(_) => write!(fm, "Func1::Spline"),
            Func1::AntiDeriv(_) => write!(fm, "Func1::AntiDeriv"),
            Func1::Closure { .. } => write!(fm, "Func1::Closure"),
        }
    }
}

impl Func1 {
    pub fn closure<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Func1::Closure {
            f: Arc::new(f),
            df: None,
        }
    }

    pub fn closure_with_deriv<F, G>(f: F, df: G) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Func1::Closure {
            f: Arc::new(f),
            df: Some(Arc::new(df)),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Func1::Zero)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Func1::Zero => 0.0,
            Func1::Const(c) => *c,
            Func1::Poly(c) => c.iter().rev().fold(0.0, |acc, ck| acc * x + ck),
            Func1::Spline(s) => s.eval(x),
            Func1::AntiDeriv(c) => c.eval(x),
            Func1::Closure { f, .. } => f(x),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            Func1::Zero | Func1::Const(_) => 0.0,
            Func1::Poly(c) => {
                let mut acc = 0.0;
                for k in (1..c.len()).rev() {
                    acc = acc * x + c[k] * k as f64;
                }
                acc
            }
            Func1::Spline(s) => s.deriv(x),
            Func1::AntiDeriv(c) => c.integrand(x),
            Func1::Closure { f, df } => match df {
                Some(d) => d(x),
                None => {
                    // cbrt(eps)-scaled central difference
                    let step = 6.0e-6 * (1.0 + x.abs());
                    (f(x + step) - f(x - step)) / (2.0 * step)
                }
            },
        }
    }

    /// Evaluate with the argument clamped into [lo, hi].
    pub fn eval_clamped(&self, x: f64, lo: f64, hi: f64) -> f64 {
        self.eval(x.clamp(lo, hi))
    }
}

/// Natural cubic spline through (xs, ys); xs strictly increasing.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert!(xs.len() == ys.len() && xs.len() >= 2, "need >= 2 knots");
        assert!(
            xs.windows(2).all(|w| w[1] > w[0]),
            "knots must be strictly increasing"
        );
        let n = xs.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for the interior moments, natural ends
            let mut sub = vec![0.0; n];
            let mut diag = vec![0.0; n];
            let mut sup = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                sub[i] = h0;
                diag[i] = 2.0 * (h0 + h1);
                sup[i] = h1;
                rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            // Thomas algorithm on indices 1..n-1
            for i in 2..n - 1 {
                let w = sub[i] / diag[i - 1];
                diag[i] -= w * sup[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[n - 2] = rhs[n - 2] / diag[n - 2];
            for i in (1..n - 2).rev() {
                m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
            }
        }
        CubicSpline { xs, ys, m }
    }

    /// Uniformly sampled closure over [a, b].
    pub fn from_fn<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, f: F) -> Self {
        let xs: Vec<f64> = (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        CubicSpline::new(xs, ys)
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self
            .xs
            .binary_search_by(|v| v.partial_cmp(&x).expect("NaN knot query"))
        {
            Ok(k) => k.min(n - 2),
            Err(k) => k.saturating_sub(1).min(n - 2),
        }
    }

    /// Evaluate; arguments outside the knot range are clamped.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(self.xs[0], *self.xs.last().unwrap());
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let dl = self.xs[i + 1] - x;
        let dr = x - self.xs[i];
        self.m[i] * dl * dl * dl / (6.0 * h)
            + self.m[i + 1] * dr * dr * dr / (6.0 * h)
            + (self.ys[i] / h - self.m[i] * h / 6.0) * dl
            + (self.ys[i + 1] / h - self.m[i + 1] * h / 6.0) * dr
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let x = x.clamp(self.xs[0], *self.xs.last().unwrap());
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let dl = self.xs[i + 1] - x;
        let dr = x - self.xs[i];
        -self.m[i] * dl * dl / (2.0 * h) + self.m[i + 1] * dr * dr / (2.0 * h)
            - (self.ys[i] / h - self.m[i] * h / 6.0)
            + (self.ys[i + 1] / h - self.m[i + 1] * h / 6.0)
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }
}

/// Monotone cubic (Fritsch-Carlson) interpolant; overshoot-free, used for
/// time-to-depth resampling of boundary traces.
#[derive(Clone, Debug)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert!(xs.len() == ys.len() && xs.len() >= 2, "need >= 2 knots");
        assert!(
            xs.windows(2).all(|w| w[1] > w[0]),
            "knots must be strictly increasing"
        );
        let n = xs.len();
        let h: Vec<f64> = (0..n - 1).map(|i| xs[i + 1] - xs[i]).collect();
        let d: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut m = vec![0.0; n];
        for i in 1..n - 1 {
            if d[i - 1] * d[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        m[0] = Self::end_slope(h[0], h.get(1).copied().unwrap_or(h[0]), d[0], d.get(1).copied().unwrap_or(d[0]));
        let dn = d[n - 2];
        let dn1 = if n >= 3 { d[n - 3] } else { d[n - 2] };
        let hn = h[n - 2];
        let hn1 = if n >= 3 { h[n - 3] } else { h[n - 2] };
        m[n - 1] = Self::end_slope(hn, hn1, dn, dn1);
        Pchip {
            xs,
            ys,
            slopes: m,
        }
    }

    fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
        let mut m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if m * d0 <= 0.0 {
            m = 0.0;
        } else if d0 * d1 < 0.0 && m.abs() > 3.0 * d0.abs() {
            m = 3.0 * d0;
        }
        m
    }

    /// Evaluate; arguments outside the knot range are clamped.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(self.xs[0], *self.xs.last().unwrap());
        let n = self.xs.len();
        let i = match self
            .xs
            .binary_search_by(|v| v.partial_cmp(&x).expect("NaN knot query"))
        {
            Ok(k) => k.min(n - 2),
            Err(k) => k.saturating_sub(1).min(n - 2),
        };
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.ys[i]
            + (s3 - 2.0 * s2 + s) * h * self.slopes[i]
            + (-2.0 * s3 + 3.0 * s2) * self.ys[i + 1]
            + (s3 - s2) * h * self.slopes[i + 1]
    }
}

/// Antiderivative F(x) = F(0) + int_0^x f, tabulated on a uniform knot grid
/// with per-interval Simpson and evaluated by cubic Hermite interpolation
/// (the integrand supplies exact knot slopes).
#[derive(Clone, Debug)]
pub struct CumulativeIntegral {
    x0: f64,
    dx: f64,
    vals: Vec<f64>,
    slopes: Vec<f64>,
}

impl CumulativeIntegral {
    /// Tabulate int over [a, b] with n intervals; `base` is the value at a.
    pub fn build<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, base: f64, f: F) -> Self {
        assert!(n >= 1 && b > a);
        let dx = (b - a) / n as f64;
        let mut vals = Vec::with_capacity(n + 1);
        let mut slopes = Vec::with_capacity(n + 1);
        let mut acc = base;
        vals.push(acc);
        slopes.push(f(a));
        for k in 0..n {
            let xl = a + k as f64 * dx;
            let xr = xl + dx;
            let fm = f(0.5 * (xl + xr));
            let fr = f(xr);
            acc += dx / 6.0 * (slopes[k] + 4.0 * fm + fr);
            vals.push(acc);
            slopes.push(fr);
        }
        CumulativeIntegral {
            x0: a,
            dx,
            vals,
            slopes,
        }
    }

    /// Evaluate; arguments outside [a, b] are clamped.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.vals.len() - 1;
        let s = ((x - self.x0) / self.dx).clamp(0.0, n as f64);
        let k = (s.floor() as usize).min(n - 1);
        let u = s - k as f64;
        let (u2, u3) = (u * u, u * u * u);
        (2.0 * u3 - 3.0 * u2 + 1.0) * self.vals[k]
            + (u3 - 2.0 * u2 + u) * self.dx * self.slopes[k]
            + (-2.0 * u3 + 3.0 * u2) * self.vals[k + 1]
            + (u3 - u2) * self.dx * self.slopes[k + 1]
    }

    /// The integrand, reconstructed at knots (linear between them).
    pub fn integrand(&self, x: f64) -> f64 {
        let n = self.vals.len() - 1;
        let s = ((x - self.x0) / self.dx).clamp(0.0, n as f64);
        let k = (s.floor() as usize).min(n - 1);
        let u = s - k as f64;
        (1.0 - u) * self.slopes[k] + u * self.slopes[k + 1]
    }
}

/// Composite Simpson over [a, b] with n intervals (n rounded up to even).
pub fn simpson<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, f: F) -> f64 {
    let n = if n % 2 == 0 { n.max(2) } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Second-order one-sided first derivative from samples at 0, +h, +2h.
#[inline]
pub fn d1_onesided(v0: f64, v1: f64, v2: f64, h: f64) -> f64 {
    (-3.0 * v0 + 4.0 * v1 - v2) / (2.0 * h)
}

/// First derivative at the leftmost of three non-uniformly spaced samples.
///
/// Fits the quadratic through (0, v0), (d1, v1), (d2, v2) with 0 < d1 < d2.
#[inline]
pub fn d1_nonuniform(v0: f64, v1: f64, v2: f64, d1: f64, d2: f64) -> f64 {
    let c1 = d2 / (d1 * (d2 - d1));
    let c2 = -d1 / (d2 * (d2 - d1));
    let c0 = -(c1 + c2);
    c0 * v0 + c1 * v1 + c2 * v2
}

// ---------------------------------------------------------------------------
// Geometry helpers for characteristic-coordinate cell quadrature.
// ---------------------------------------------------------------------------

pub type Pt = [f64; 2];

/// Clip a convex polygon against the half-plane a*x + b*y + c >= 0
/// (Sutherland-Hodgman, orientation preserving).
pub fn clip_halfplane(poly: &[Pt], a: f64, b: f64, c: f64) -> Vec<Pt> {
    let f = |p: &Pt| a * p[0] + b * p[1] + c;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let cur = poly[k];
        let nxt = poly[(k + 1) % poly.len()];
        let fc = f(&cur);
        let fnx = f(&nxt);
        if fc >= 0.0 {
            out.push(cur);
        }
        if fc * fnx < 0.0 {
            let t = fc / (fc - fnx);
            out.push([
                cur[0] + t * (nxt[0] - cur[0]),
                cur[1] + t * (nxt[1] - cur[1]),
            ]);
        }
    }
    out
}

/// Signed area (shoelace); positive for counterclockwise polygons.
pub fn polygon_area(poly: &[Pt]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in 0..poly.len() {
        let p = poly[k];
        let q = poly[(k + 1) % poly.len()];
        acc += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * acc
}

#[inline]
pub fn bilinear_unit(corners: &[f64; 4], u: f64, v: f64) -> f64 {
    // corners ordered [v00, v10, v01, v11] for (u,v) in the unit square
    corners[0] * (1.0 - u) * (1.0 - v)
        + corners[1] * u * (1.0 - v)
        + corners[2] * (1.0 - u) * v
        + corners[3] * u * v
}

/// Integral of the bilinear interpolant over a convex polygon in unit-square
/// coordinates. Sliver polygons (|area| < sliver) use a one-point rule on the
/// vertex average to avoid degenerate triangulations.
pub fn integrate_bilinear_polygon(corners: &[f64; 4], poly: &[Pt], sliver: f64) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let area = polygon_area(poly);
    if area.abs() < sliver {
        let n = poly.len() as f64;
        let (mut cu, mut cv) = (0.0, 0.0);
        for p in poly {
            cu += p[0];
            cv += p[1];
        }
        return area * bilinear_unit(corners, cu / n, cv / n);
    }
    // fan triangulation; 3-point edge-midpoint rule is exact for bilinear
    let mut acc = 0.0;
    for k in 1..poly.len() - 1 {
        let (p0, p1, p2) = (poly[0], poly[k], poly[k + 1]);
        let tri_area = 0.5
            * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
        let m01 = [(p0[0] + p1[0]) / 2.0, (p0[1] + p1[1]) / 2.0];
        let m12 = [(p1[0] + p2[0]) / 2.0, (p1[1] + p2[1]) / 2.0];
        let m20 = [(p2[0] + p0[0]) / 2.0, (p2[1] + p0[1]) / 2.0];
        acc += tri_area / 3.0
            * (bilinear_unit(corners, m01[0], m01[1])
                + bilinear_unit(corners, m12[0], m12[1])
                + bilinear_unit(corners, m20[0], m20[1]));
    }
    acc
}

/// SplitMix64; deterministic stream for smoke/property tests.
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1].
    pub fn next_sym(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_eval_and_deriv() {
        let p = Func1::Poly(vec![1.0, -2.0, 3.0]); // 1 - 2x + 3x^2
        assert!((p.eval(2.0) - 9.0).abs() < 1e-14);
        assert!((p.deriv(2.0) - 10.0).abs() < 1e-14);
    }

    #[test]
    fn closure_fd_derivative() {
        let f = Func1::closure(|x: f64| (2.0 * x).sin());
        let err = (f.deriv(0.7) - 2.0 * (1.4f64).cos()).abs();
        assert!(err < 1e-9, "fd deriv err {err}");
    }

    #[test]
    fn spline_reproduces_cubic() {
        // natural spline is exact for functions with zero 2nd deriv at ends
        let s = CubicSpline::from_fn(0.0, 1.0, 40, |x| 2.0 * x + 0.5);
        assert!((s.eval(0.33) - (2.0 * 0.33 + 0.5)).abs() < 1e-12);
        let s2 = CubicSpline::from_fn(0.0, 1.0, 200, |x| (3.0 * x).sin());
        let err = (s2.eval(0.5111) - (3.0f64 * 0.5111).sin()).abs();
        assert!(err < 1e-6, "spline err {err}");
        let derr = (s2.deriv(0.5111) - 3.0 * (3.0f64 * 0.5111).cos()).abs();
        assert!(derr < 1e-4, "spline deriv err {derr}");
    }

    #[test]
    fn pchip_is_monotone_and_interpolates() {
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = vec![0.0, 0.1, 2.0, 2.05, 2.1];
        let p = Pchip::new(xs.clone(), ys.clone());
        for (x, y) in xs.iter().zip(ys.iter()) {
            assert!((p.eval(*x) - y).abs() < 1e-14);
        }
        let mut prev = p.eval(0.0);
        for k in 1..=400 {
            let v = p.eval(4.0 * k as f64 / 400.0);
            assert!(v >= prev - 1e-12, "pchip not monotone");
            prev = v;
        }
    }

    #[test]
    fn cumulative_integral_matches_closed_form() {
        let c = CumulativeIntegral::build(0.0, 2.0, 64, 0.0, |x| x.cos());
        let err = (c.eval(1.37) - (1.37f64).sin()).abs();
        assert!(err < 1e-9, "cumulative err {err}");
        assert!((c.integrand(1.0) - 1.0f64.cos()).abs() < 1e-10);
    }

    #[test]
    fn simpson_exact_for_cubics() {
        let v = simpson(0.0, 1.0, 8, |x| x * x * x);
        assert!((v - 0.25).abs() < 1e-14);
    }

    #[test]
    fn onesided_stencils_second_order() {
        let f = |x: f64| (1.5 * x).exp();
        let h = 1e-3;
        let d = d1_onesided(f(0.0), f(h), f(2.0 * h), h);
        assert!((d - 1.5).abs() < 1e-5);
        let dn = d1_nonuniform(f(0.0), f(0.7 * h), f(1.9 * h), 0.7 * h, 1.9 * h);
        assert!((dn - 1.5).abs() < 1e-5);
    }

    #[test]
    fn clip_and_integrate_bilinear() {
        let unit = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        // clip by x + y - 1 >= 0 keeps the upper triangle
        let tri = clip_halfplane(&unit, 1.0, 1.0, -1.0);
        assert!((polygon_area(&tri) - 0.5).abs() < 1e-14);
        // constant integrand integrates to the area
        let v = integrate_bilinear_polygon(&[3.0; 4], &tri, 1e-12);
        assert!((v - 1.5).abs() < 1e-13);
        // bilinear u*v over the full square: integral = 1/4
        let w = integrate_bilinear_polygon(&[0.0, 0.0, 0.0, 1.0], &unit, 1e-12);
        assert!((w - 0.25).abs() < 1e-13);
    }
}
