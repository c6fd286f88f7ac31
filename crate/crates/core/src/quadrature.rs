//! Four-dimensional integrals over the positive orthant with the exponential
//! envelope e^{−(s+t+s′+t′)/2} factored out.
//!
//! Every routine here computes
//!
//! ```text
//! ∫₀^∞ ds dt ds′ dt′  e^{−(s+t+s′+t′)/2} g(s, t, s′, t′)
//! ```
//!
//! for a caller-supplied `g`, which for the trace integrands is bounded and
//! smooth. Three methods are available: a tensor Gauss–Laguerre rule with an
//! error estimate from a lower-order companion rule, adaptive Genz–Malik
//! cubature on an exponentially mapped cube, and Monte Carlo sampling from the
//! envelope.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadMethod {
    TensorLaguerre,
    Adaptive,
    MonteCarlo,
}

impl fmt::Display for QuadMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuadMethod::TensorLaguerre => "tensor-laguerre",
            QuadMethod::Adaptive => "adaptive",
            QuadMethod::MonteCarlo => "monte-carlo",
        })
    }
}

impl FromStr for QuadMethod {
    type Err = QuadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tensor-laguerre" | "tensor" => Ok(QuadMethod::TensorLaguerre),
            "adaptive" => Ok(QuadMethod::Adaptive),
            "monte-carlo" | "mc" => Ok(QuadMethod::MonteCarlo),
            other => Err(QuadError::InvalidSpec(format!("unknown quadrature method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub method: QuadMethod,
    /// Points per axis of the tensor rule.
    pub order: usize,
    /// Monte Carlo sample count.
    pub samples: usize,
    pub seed: u64,
    /// Requested relative accuracy of each integral.
    pub target_rel: f64,
    /// Upper bound on region bisections for the adaptive method.
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            method: QuadMethod::TensorLaguerre,
            order: 48,
            samples: 1 << 20,
            seed: 20_240_601,
            target_rel: 1e-6,
            max_subdivisions: 40_000,
        }
    }
}

impl QuadratureSpec {
    pub fn with_method(method: QuadMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), QuadError> {
        if self.order < 4 {
            return Err(QuadError::InvalidSpec(format!("order must be at least 4, got {}", self.order)));
        }
        if !(self.target_rel > 0.0 && self.target_rel <= 0.1) {
            return Err(QuadError::InvalidSpec(format!(
                "target relative error must lie in (0, 0.1], got {}",
                self.target_rel
            )));
        }
        if self.method == QuadMethod::MonteCarlo && self.samples < 2 {
            return Err(QuadError::InvalidSpec("monte carlo needs at least 2 samples".into()));
        }
        if self.method == QuadMethod::Adaptive && self.max_subdivisions == 0 {
            return Err(QuadError::InvalidSpec("max_subdivisions must be positive".into()));
        }
        Ok(())
    }

    /// Order of the companion tensor rule used for the error estimate.
    pub fn companion_order(&self) -> usize {
        (3 * self.order).div_ceil(4)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadResult<T> {
    pub value: Complex<T>,
    pub abs_error_estimate: T,
    pub evaluations: u64,
    /// Whether the estimate met the requested relative accuracy. A
    /// non-converged result is still the best available value.
    pub converged: bool,
}

/// Results for several integrands evaluated on the same nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadBatch<T, const K: usize> {
    pub results: [QuadResult<T>; K],
    /// Covariance of the estimator for Monte Carlo runs, as a row-major
    /// 2K × 2K matrix over (Re I_0, Im I_0, Re I_1, …).
    pub covariance: Option<Vec<T>>,
}

/// ∫ e^{−(s+t+s′+t′)/2} g over the positive orthant.
pub fn integrate4d<T, F>(g: F, spec: &QuadratureSpec) -> Result<QuadResult<T>, QuadError>
where
    T: Real,
    F: Fn(&[T; 4]) -> Complex<T> + Sync,
{
    integrate4d_vec(|x: &[T; 4]| [g(x)], spec).map(|b| b.results[0])
}

/// [`integrate4d`] for K integrands sharing every evaluation point.
pub fn integrate4d_vec<T, F, const K: usize>(
    g: F,
    spec: &QuadratureSpec,
) -> Result<QuadBatch<T, K>, QuadError>
where
    T: Real,
    F: Fn(&[T; 4]) -> [Complex<T>; K] + Sync,
{
    spec.validate()?;
    Ok(match spec.method {
        QuadMethod::TensorLaguerre => tensor_laguerre(&g, spec),
        QuadMethod::Adaptive => adaptive(&g, spec),
        QuadMethod::MonteCarlo => monte_carlo(&g, spec),
    })
}

fn zero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

fn converged_flag<T: Real>(value: Complex<T>, err: T, target_rel: f64) -> bool {
    err.is_finite() && err <= T::lit(target_rel) * value.norm()
}

/// Nodes and weights of the n-point Gauss–Laguerre rule for ∫₀^∞ e^{−x} f(x) dx.
///
/// Nodes start from the eigenvalues of the Jacobi matrix and are polished by
/// Newton steps on L_n; weights use x_i / ((n+1) L_{n+1}(x_i))², which keeps
/// full relative accuracy for the tiny weights far out on the axis.
pub fn gauss_laguerre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            (2 * i + 1) as f64
        } else if i.abs_diff(j) == 1 {
            (i.max(j)) as f64
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    // (L_n(x), L_n'(x), L_{n+1}(x)) by the three-term recurrence.
    let eval = |x: f64| {
        let (mut p0, mut p1) = (1.0, 1.0 - x);
        if n == 1 {
            let p2 = ((3.0 - x) * p1 - p0) / 2.0;
            return (p1, -1.0, p2);
        }
        for k in 1..n {
            let p2 = ((2 * k + 1) as f64 - x) * p1 / (k + 1) as f64 - k as f64 * p0 / (k + 1) as f64;
            p0 = p1;
            p1 = p2;
        }
        let deriv = n as f64 * (p1 - p0) / x;
        let next = ((2 * n + 1) as f64 - x) * p1 / (n + 1) as f64 - n as f64 * p0 / (n + 1) as f64;
        (p1, deriv, next)
    };

    let weights = nodes
        .iter_mut()
        .map(|x| {
            for _ in 0..3 {
                let (p, dp, _) = eval(*x);
                let step = p / dp;
                if !step.is_finite() {
                    break;
                }
                *x -= step;
            }
            let (_, _, next) = eval(*x);
            let d = (n + 1) as f64 * next;
            *x / (d * d)
        })
        .collect();
    (nodes, weights)
}

/// Nodes and weights for ∫₀^∞ e^{−x/2} f(x) dx.
fn half_rate_rule<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_laguerre(n);
    (
        x.iter().map(|&v| T::lit(2.0 * v)).collect(),
        w.iter().map(|&v| T::lit(2.0 * v)).collect(),
    )
}

fn tensor_sum<T, F, const K: usize>(g: &F, n: usize) -> [Complex<T>; K]
where
    T: Real,
    F: Fn(&[T; 4]) -> [Complex<T>; K] + Sync,
{
    let (x, w) = half_rate_rule::<T>(n);
    // One slab per outer node, each summed sequentially, then combined in
    // index order: the result does not depend on the thread count.
    let slabs: Vec<[Complex<T>; K]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = [zero::<T>(); K];
            for j in 0..n {
                let wij = w[i] * w[j];
                for k in 0..n {
                    let wijk = wij * w[k];
                    for l in 0..n {
                        let v = g(&[x[i], x[j], x[k], x[l]]);
                        let wt = wijk * w[l];
                        for (a, vi) in acc.iter_mut().zip(v) {
                            *a = *a + vi * wt;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = [zero::<T>(); K];
    for slab in slabs {
        for (t, s) in total.iter_mut().zip(slab) {
            *t = *t + s;
        }
    }
    total
}

fn tensor_laguerre<T, F, const K: usize>(g: &F, spec: &QuadratureSpec) -> QuadBatch<T, K>
where
    T: Real,
    F: Fn(&[T; 4]) -> [Complex<T>; K] + Sync,
{
    let n = spec.order;
    let m = spec.companion_order();
    let primary = tensor_sum(g, n);
    let companion = tensor_sum(g, m);
    let evaluations = (n.pow(4) + m.pow(4)) as u64;
    let results = std::array::from_fn(|k| {
        let err = (primary[k] - companion[k]).norm();
        QuadResult {
            value: primary[k],
            abs_error_estimate: err,
            evaluations,
            converged: converged_flag(primary[k], err, spec.target_rel),
        }
    });
    QuadBatch {
        results,
        covariance: None,
    }
}

// Genz–Malik degree-7 rule with an embedded degree-5 rule, four dimensions.
const DIM: usize = 4;
const GM_POINTS: usize = 1 + 2 * DIM + 2 * DIM + 2 * DIM * (DIM - 1) + (1 << DIM);

struct GenzMalik {
    lambda2: f64,
    lambda4: f64,
    lambda5: f64,
    w7: [f64; 5],
    w5: [f64; 4],
}

impl GenzMalik {
    fn new() -> Self {
        let n = DIM as f64;
        Self {
            lambda2: (9.0f64 / 70.0).sqrt(),
            lambda4: (9.0f64 / 10.0).sqrt(),
            lambda5: (9.0f64 / 19.0).sqrt(),
            w7: [
                (12824.0 - 9120.0 * n + 400.0 * n * n) / 19683.0,
                980.0 / 6561.0,
                (1820.0 - 400.0 * n) / 19683.0,
                200.0 / 19683.0,
                6859.0 / 19683.0 / (1u32 << DIM) as f64,
            ],
            w5: [
                (729.0 - 950.0 * n + 50.0 * n * n) / 729.0,
                245.0 / 486.0,
                (265.0 - 100.0 * n) / 1458.0,
                25.0 / 729.0,
            ],
        }
    }
}

#[derive(Debug, Clone)]
struct Region<T, const K: usize> {
    center: [f64; DIM],
    half: [f64; DIM],
    value: [Complex<T>; K],
    error: [T; K],
    split_axis: usize,
    priority: f64,
    /// Creation index, used to break priority ties deterministically.
    serial: u64,
}

impl<T, const K: usize> PartialEq for Region<T, K> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T, const K: usize> Eq for Region<T, K> {}
impl<T, const K: usize> PartialOrd for Region<T, K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T, const K: usize> Ord for Region<T, K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.serial.cmp(&self.serial))
    }
}

/// Maps u ∈ [0, 1) to s = −4 ln(1 − u); e^{−s/2} ds = 4(1 − u) du.
#[inline]
fn mapped_point<T: Real>(u: &[f64; DIM]) -> ([T; DIM], f64) {
    let mut x = [T::zero(); DIM];
    let mut jac = 1.0;
    for d in 0..DIM {
        let one_minus = 1.0 - u[d];
        x[d] = T::lit(-4.0 * one_minus.ln());
        jac *= 4.0 * one_minus;
    }
    (x, jac)
}

fn apply_rule<T, F, const K: usize>(
    g: &F,
    rule: &GenzMalik,
    center: [f64; DIM],
    half: [f64; DIM],
) -> ([Complex<T>; K], [T; K], usize)
where
    T: Real,
    F: Fn(&[T; 4]) -> [Complex<T>; K] + Sync,
{
    let eval = |u: [f64; DIM]| -> [Complex<T>; K] {
        let (x, jac) = mapped_point::<T>(&u);
        let jac = T::lit(jac);
        g(&x).map(|v| v * jac)
    };
    let add = |acc: &mut [Complex<T>; K], v: &[Complex<T>; K], w: f64| {
        let w = T::lit(w);
        for (a, b) in acc.iter_mut().zip(v) {
            *a = *a + *b * w;
        }
    };

    let f0 = eval(center);
    let mut s2 = [zero::<T>(); K];
    let mut s3 = [zero::<T>(); K];
    let mut s4 = [zero::<T>(); K];
    let mut s5 = [zero::<T>(); K];
    let mut fourth_diff = [0.0f64; DIM];

    for d in 0..DIM {
        let at = |lambda: f64, sign: f64| {
            let mut u = center;
            u[d] += sign * lambda * half[d];
            eval(u)
        };
        let p2 = at(rule.lambda2, 1.0);
        let m2 = at(rule.lambda2, -1.0);
        let p3 = at(rule.lambda4, 1.0);
        let m3 = at(rule.lambda4, -1.0);
        add(&mut s2, &p2, 1.0);
        add(&mut s2, &m2, 1.0);
        add(&mut s3, &p3, 1.0);
        add(&mut s3, &m3, 1.0);
        let ratio = (rule.lambda2 / rule.lambda4).powi(2);
        fourth_diff[d] = (0..K)
            .map(|k| {
                let two = f0[k] * T::lit(2.0);
                let d2 = p2[k] + m2[k] - two;
                let d3 = p3[k] + m3[k] - two;
                (d2 - d3 * T::lit(ratio)).norm().to_f64_lossy()
            })
            .sum();
    }
    for i in 0..DIM {
        for j in i + 1..DIM {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut u = center;
                u[i] += si * rule.lambda4 * half[i];
                u[j] += sj * rule.lambda4 * half[j];
                add(&mut s4, &eval(u), 1.0);
            }
        }
    }
    for corner in 0..(1usize << DIM) {
        let mut u = center;
        for d in 0..DIM {
            let sign = if corner >> d & 1 == 1 { 1.0 } else { -1.0 };
            u[d] += sign * rule.lambda5 * half[d];
        }
        add(&mut s5, &eval(u), 1.0);
    }

    let volume = T::lit(half.iter().map(|h| 2.0 * h).product());
    let w7 = rule.w7.map(T::lit);
    let w5 = rule.w5.map(T::lit);
    let mut value = [zero::<T>(); K];
    let mut error = [T::zero(); K];
    for k in 0..K {
        let i7 = f0[k] * w7[0] + s2[k] * w7[1] + s3[k] * w7[2] + s4[k] * w7[3] + s5[k] * w7[4];
        let i5 = f0[k] * w5[0] + s2[k] * w5[1] + s3[k] * w5[2] + s4[k] * w5[3];
        value[k] = i7 * volume;
        error[k] = (i7 - i5).norm() * volume;
    }
    let split_axis = fourth_diff
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (d, &v)| if v > best.1 { (d, v) } else { best })
        .0;
    (value, error, split_axis)
}

fn adaptive<T, F, const K: usize>(g: &F, spec: &QuadratureSpec) -> QuadBatch<T, K>
where
    T: Real,
    F: Fn(&[T; 4]) -> [Complex<T>; K] + Sync,
{
    const BATCH: usize = 32;
    let rule = GenzMalik::new();

    // Start from a 2⁴ split of the unit cube so the first estimate of each
    // component's magnitude is not a single-rule guess.
    let initial: Vec<([f64; DIM], [f64; DIM])> = (0..(1usize << DIM))
        .map(|c| {
            let center = std::array::from_fn(|d| if c >> d & 1 == 1 { 0.75 } else { 0.25 });
            (center, [0.25; DIM])
        })
        .collect();
    let evaluated: Vec<_> = initial
        .par_iter()
        .map(|&(c, h)| (c, h, apply_rule(g, &rule, c, h)))
        .collect();

    let mut total = [zero::<T>(); K];
    for (_, _, (v, _, _)) in &evaluated {
        for k in 0..K {
            total[k] = total[k] + v[k];
        }
    }
    let scale: [f64; K] = std::array::from_fn(|k| total[k].norm().to_f64_lossy().max(1e-300));
    let priority = |err: &[T; K]| -> f64 {
        (0..K)
            .map(|k| err[k].to_f64_lossy() / scale[k])
            .fold(0.0, f64::max)
    };

    let mut serial = 0u64;
    let mut heap = BinaryHeap::new();
    for (c, h, (v, e, axis)) in evaluated {
        heap.push(Region {
            center: c,
            half: h,
            value: v,
            error: e,
            split_axis: axis,
            priority: priority(&e),
            serial,
        });
        serial += 1;
    }
    let mut evaluations = (initial.len() * GM_POINTS) as u64;
    let mut subdivisions = 0usize;

    let totals = |heap: &BinaryHeap<Region<T, K>>| {
        let mut v = [zero::<T>(); K];
        let mut e = [T::zero(); K];
        let mut regions: Vec<&Region<T, K>> = heap.iter().collect();
        regions.sort_by_key(|r| r.serial);
        for r in regions {
            for k in 0..K {
                v[k] = v[k] + r.value[k];
                e[k] += r.error[k];
            }
        }
        (v, e)
    };

    loop {
        let (value, error) = totals(&heap);
        let done = (0..K).all(|k| converged_flag(value[k], error[k], spec.target_rel));
        if done || subdivisions >= spec.max_subdivisions {
            let results = std::array::from_fn(|k| QuadResult {
                value: value[k],
                abs_error_estimate: error[k],
                evaluations,
                converged: converged_flag(value[k], error[k], spec.target_rel),
            });
            return QuadBatch {
                results,
                covariance: None,
            };
        }

        let take = BATCH.min(spec.max_subdivisions - subdivisions).min(heap.len());
        let parents: Vec<Region<T, K>> = (0..take).filter_map(|_| heap.pop()).collect();
        let children: Vec<_> = parents
            .par_iter()
            .flat_map_iter(|r| {
                let d = r.split_axis;
                let mut half = r.half;
                half[d] *= 0.5;
                [-1.0, 1.0].into_iter().map(move |sign| {
                    let mut c = r.center;
                    c[d] += sign * half[d];
                    (c, half)
                })
            })
            .map(|(c, h)| (c, h, apply_rule(g, &rule, c, h)))
            .collect();
        for (c, h, (v, e, axis)) in children {
            heap.push(Region {
                center: c,
                half: h,
                value: v,
                error: e,
                split_axis: axis,
                priority: priority(&e),
                serial,
            });
            serial += 1;
        }
        subdivisions += take;
        evaluations += (2 * take * GM_POINTS) as u64;
    }
}

const MC_CHUNK: usize = 8192;

fn monte_carlo<T, F, const K: usize>(g: &F, spec: &QuadratureSpec) -> QuadBatch<T, K>
where
    T: Real,
    F: Fn(&[T; 4]) -> [Complex<T>; K] + Sync,
{
    let n = spec.samples;
    let chunks = n.div_ceil(MC_CHUNK);
    let dim = 2 * K;
    // Per chunk: Σ y and Σ y yᵀ over the 2K real components, in f64.
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut sum = vec![0.0; dim];
            let mut outer = vec![0.0; dim * dim];
            let mut y = vec![0.0; dim];
            for _ in 0..count {
                let x: [T; 4] = std::array::from_fn(|_| {
                    let e: f64 = Exp1.sample(&mut rng);
                    T::lit(2.0 * e)
                });
                let v = g(&x);
                for k in 0..K {
                    y[2 * k] = v[k].re.to_f64_lossy();
                    y[2 * k + 1] = v[k].im.to_f64_lossy();
                }
                for a in 0..dim {
                    sum[a] += y[a];
                    for b in 0..dim {
                        outer[a * dim + b] += y[a] * y[b];
                    }
                }
            }
            (sum, outer)
        })
        .collect();

    let mut sum = vec![0.0; dim];
    let mut outer = vec![0.0; dim * dim];
    for (s, o) in partial {
        for (a, b) in sum.iter_mut().zip(s) {
            *a += b;
        }
        for (a, b) in outer.iter_mut().zip(o) {
            *a += b;
        }
    }
    let nf = n as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    // Covariance of 16·mean(y): 256 · Cov(y) / n.
    let cov: Vec<f64> = (0..dim * dim)
        .map(|ab| {
            let (a, b) = (ab / dim, ab % dim);
            let c = (outer[ab] - nf * mean[a] * mean[b]) / (nf - 1.0);
            256.0 * c / nf
        })
        .collect();
    let results = std::array::from_fn(|k| {
        let value = Complex::new(T::lit(16.0 * mean[2 * k]), T::lit(16.0 * mean[2 * k + 1]));
        let var = cov[(2 * k) * dim + 2 * k] + cov[(2 * k + 1) * dim + 2 * k + 1];
        let err = T::lit(var.max(0.0).sqrt());
        QuadResult {
            value,
            abs_error_estimate: err,
            evaluations: n as u64,
            converged: converged_flag(value, err, spec.target_rel),
        }
    });
    QuadBatch {
        results,
        covariance: Some(cov.into_iter().map(T::lit).collect()),
    }
}
