//! Quadrature, compensated summation and 1D minimisation primitives.
//!
//! Everything here is sequential and order-stable: the same inputs always
//! produce bit-identical outputs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("adaptive quadrature did not reach tolerance {tol:e} (estimate {value:e}, error {error:e})")]
    NotConverged { value: f64, error: f64, tol: f64 },
    #[error("integrand returned a non-finite value at {at}")]
    NonFinite { at: f64 },
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Sum in slice order with Neumaier compensation.
pub fn compensated_sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<CompensatedSum>().value()
}

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Cached rules for the small orders used throughout the crate.
    pub fn cached(n: usize) -> &'static GaussLegendre {
        static RULES: OnceLock<Vec<GaussLegendre>> = OnceLock::new();
        let rules = RULES.get_or_init(|| (1..=32).map(GaussLegendre::new).collect());
        assert!((1..=32).contains(&n), "cached Gauss-Legendre orders are 1..=32");
        &rules[n - 1]
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut acc = CompensatedSum::new();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(mid + half * x));
        }
        half * acc.value()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre with `panels` equal panels of `order` nodes each.
pub fn composite_gauss<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
) -> f64 {
    let rule = GaussLegendre::cached(order);
    let h = (b - a) / panels as f64;
    let mut acc = CompensatedSum::new();
    for k in 0..panels {
        let lo = a + h * k as f64;
        acc.add(rule.integrate(&mut f, lo, lo + h));
    }
    acc.value()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        // Largest error first; ties broken by position so the order is total.
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite { at: mid });
    }
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let (x1, x2) = (mid - dx, mid + dx);
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(QuadError::NonFinite { at: x1 });
        }
        if !f2.is_finite() {
            return Err(QuadError::NonFinite { at: x2 });
        }
        kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Ok((kron * half, ((kron - gauss) * half).abs()))
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Globally adaptive Gauss–Kronrod (7/15) integration on a finite interval.
///
/// Bisects the panel with the largest error estimate until the summed
/// estimate is below `abs_tol`.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
) -> Result<Integral, QuadError> {
    const MAX_PANELS: usize = 4000;
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, panels: 0 });
    }
    let (value, error) = gk15(&mut f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total_err = error;
    while total_err > abs_tol && heap.len() < MAX_PANELS {
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.a, m)?;
        let (v2, e2) = gk15(&mut f, m, worst.b)?;
        heap.push(Panel { a: worst.a, b: m, value: v1, error: e1 });
        heap.push(Panel { a: m, b: worst.b, value: v2, error: e2 });
        total_err = heap.iter().map(|p| p.error).sum();
    }
    // Sum in position order for reproducibility.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().map(|p| p.value).collect::<CompensatedSum>().value();
    let error: f64 = panels.iter().map(|p| p.error).sum();
    if error > abs_tol {
        return Err(QuadError::NotConverged { value, error, tol: abs_tol });
    }
    Ok(Integral { value, error, panels: panels.len() })
}

/// Golden-section search for a minimum of a unimodal function on [a, b].
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, x_tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (a, b);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while (hi - lo).abs() > x_tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Dense grid scan with `intervals` equal steps, then golden-section
/// refinement around the best grid point. Returns `(argmin, min)`.
pub fn grid_golden_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, intervals: usize) -> (f64, f64) {
    let h = (b - a) / intervals as f64;
    let mut best = (a, f(a));
    let mut best_i = 0;
    for i in 1..=intervals {
        let x = if i == intervals { b } else { a + h * i as f64 };
        let v = f(x);
        if v < best.1 {
            best = (x, v);
            best_i = i;
        }
    }
    let lo = if best_i == 0 { a } else { a + h * (best_i - 1) as f64 };
    let hi = if best_i == intervals { b } else { a + h * (best_i + 1) as f64 };
    let refined = golden_section_min(&mut f, lo, hi.min(b), 1e-10 * (b - a).abs().max(1.0));
    if refined.1 < best.1 {
        refined
    } else {
        best
    }
}

/// Degree-5 seven-point symmetric rule on a triangle (Radon).
/// Barycentric points and weights normalised to sum to one.
pub fn triangle_rule() -> &'static [([f64; 3], f64); 7] {
    static RULE: OnceLock<[([f64; 3], f64); 7]> = OnceLock::new();
    RULE.get_or_init(|| {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let b1 = 1.0 - 2.0 * a1;
        let a2 = (6.0 + s15) / 21.0;
        let b2 = 1.0 - 2.0 * a2;
        let w1 = (155.0 - s15) / 1200.0;
        let w2 = (155.0 + s15) / 1200.0;
        [
            ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 9.0 / 40.0),
            ([a1, a1, b1], w1),
            ([a1, b1, a1], w1),
            ([b1, a1, a1], w1),
            ([a2, a2, b2], w2),
            ([a2, b2, a2], w2),
            ([b2, a2, a2], w2),
        ]
    })
}
