//! Shared helpers for the integration suites: reproducible random triangles
//! with prescribed aspect ratios, arbitrary similarity placements, and a
//! small set of dense reference kernels that stay independent of the
//! library's solver stack.
//!
//! Not every suite uses every helper.
#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use svlab::triangle::analyze_triangle;
use svlab::Point2;

pub struct TriangleSampler {
    rng: ChaCha8Rng,
}

impl TriangleSampler {
    pub fn new(seed: u64) -> Self {
        TriangleSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Triangle with aspect ratio log-uniform in `[lo, hi]`, placed by a
    /// random similarity (rotation, scaling, translation) and random vertex
    /// ordering. Construction: apex at abscissa `x` over the unit base, with
    /// the apex height bisected on the thin branch until the target aspect
    /// is met; every shape arises this way when rebased on its longest edge.
    pub fn with_aspect_between(&mut self, lo: f64, hi: f64) -> [Point2; 3] {
        loop {
            let target = lo * (hi / lo).powf(self.rng.gen::<f64>());
            let x = 0.05 + 0.9 * self.rng.gen::<f64>();
            if let Some(t) = apex_height_for_aspect(x, target) {
                let base = [
                    Point2::new(0.0, 0.0),
                    Point2::new(1.0, 0.0),
                    Point2::new(x, t),
                ];
                return self.place(base);
            }
        }
    }

    fn place(&mut self, p: [Point2; 3]) -> [Point2; 3] {
        let theta = self.rng.gen::<f64>() * std::f64::consts::TAU;
        let (s, c) = theta.sin_cos();
        let scale = 10.0f64.powf(self.rng.gen_range(-2.0..2.0));
        let shift = Point2::new(
            self.rng.gen_range(-10.0..10.0),
            self.rng.gen_range(-10.0..10.0),
        );
        let map = |q: Point2| {
            Point2::new(c * q.x - s * q.y, s * q.x + c * q.y) * scale + shift
        };
        let rot: usize = self.rng.gen_range(0..3);
        let flip: bool = self.rng.gen();
        let mut out = [
            map(p[rot % 3]),
            map(p[(rot + 1) % 3]),
            map(p[(rot + 2) % 3]),
        ];
        if flip {
            out.swap(1, 2);
        }
        out
    }
}

/// Apex height giving the target aspect ratio on the thin branch, if the
/// target is reachable for this apex abscissa.
pub fn apex_height_for_aspect(x: f64, target: f64) -> Option<f64> {
    let aspect_of = |t: f64| {
        analyze_triangle(&[
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(x, t),
        ])
        .map(|m| m.aspect)
        .unwrap_or(f64::INFINITY)
    };
    // coarse scan for the aspect-minimizing height
    let mut t_best = 0.5;
    let mut a_best = f64::INFINITY;
    for k in 0..200 {
        let t = 1e-6 * (10.0f64).powf(7.0 * k as f64 / 199.0); // 1e-6 ..= 10
        let a = aspect_of(t);
        if a < a_best {
            a_best = a;
            t_best = t;
        }
    }
    if a_best > target {
        return None;
    }
    // aspect decreases from +inf to the minimum as t grows to t_best
    let (mut lo, mut hi) = (1e-12, t_best);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if aspect_of(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Dense LU solve with partial pivoting (row-major), for reference solutions
/// that must not share code with the library's factorizations.
pub fn lu_solve(a: &[f64], n: usize, rhs: &mut [f64]) {
    let mut m = a.to_vec();
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if m[piv[i] * n + k].abs() > m[piv[p] * n + k].abs() {
                p = i;
            }
        }
        piv.swap(k, p);
        let pk = piv[k];
        for i in k + 1..n {
            let pi = piv[i];
            let f = m[pi * n + k] / m[pk * n + k];
            m[pi * n + k] = f;
            for j in k + 1..n {
                m[pi * n + j] -= f * m[pk * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = rhs[piv[i]];
        for j in 0..i {
            s -= m[piv[i] * n + j] * y[j];
        }
        y[i] = s;
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in i + 1..n {
            s -= m[piv[i] * n + j] * rhs[j];
        }
        rhs[i] = s / m[piv[i] * n + i];
    }
}

/// Cyclic Jacobi eigenvalue iteration for a dense symmetric matrix
/// (row-major); returns eigenvalues ascending. Reference implementation,
/// deliberately independent of faer.
pub fn jacobi_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() < 1e-300_f64.max(1e-15 * frobenius(&m, n)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

fn frobenius(m: &[f64], n: usize) -> f64 {
    m.iter().take(n * n).map(|v| v * v).sum::<f64>().sqrt()
}
