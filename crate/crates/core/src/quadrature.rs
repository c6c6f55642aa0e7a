//! Gauss–Legendre rules and tensor quadrature on the unit disc.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::linalg::c;
use crate::poly::{DiscPoly, DiscSection};
use crate::{Error, Result, C64};

/// Gauss–Legendre nodes and weights on `[a, b]`, nodes ascending.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(n.max(1)).unwrap();
    let rule = GaussLegendre::new(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut out: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect();
    out.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    out
}

/// Closed form `∫_D z^a z̄^b dA`.
pub fn exact_monomial_integral(a: u32, b: u32) -> f64 {
    if a == b {
        2.0 * PI / (a + b + 2) as f64
    } else {
        0.0
    }
}

/// Tensor rule on the disc: Gauss–Legendre in `r ∈ [0,1]` (with the area
/// weight `r`), trapezoid in θ.
///
/// Exact for `z^a z̄^b` with `a + b ≤ degree`.
#[derive(Debug, Clone)]
pub struct DiscRule {
    pub degree: u32,
    radial: Vec<(f64, f64)>,
    n_theta: usize,
    cache_radial: Vec<f64>,
    cache_angular: BTreeMap<i64, C64>,
}

impl DiscRule {
    pub fn for_degree(degree: u32) -> Self {
        let n_r = (degree as usize + 2) / 2 + 1;
        let n_theta = degree as usize + 1;
        Self::with_nodes(degree, n_r, n_theta)
    }

    pub fn with_nodes(degree: u32, n_r: usize, n_theta: usize) -> Self {
        let radial = gauss_legendre(n_r, 0.0, 1.0);
        let cache_radial = (0..=degree as usize)
            .map(|k| radial.iter().map(|&(r, w)| w * r.powi(k as i32 + 1)).sum())
            .collect();
        let d = degree as i64;
        let cache_angular = (-d..=d)
            .map(|m| {
                let s: C64 = (0..n_theta)
                    .map(|j| {
                        let th = 2.0 * PI * j as f64 / n_theta as f64;
                        C64::from_polar(1.0, m as f64 * th)
                    })
                    .sum();
                (m, s * (2.0 * PI / n_theta as f64))
            })
            .collect();
        Self { degree, radial, n_theta, cache_radial, cache_angular }
    }

    /// The same rule with node counts doubled.
    pub fn refined(&self) -> Self {
        Self::with_nodes(self.degree, 2 * self.radial.len(), 2 * self.n_theta)
    }

    pub fn node_counts(&self) -> (usize, usize) {
        (self.radial.len(), self.n_theta)
    }

    /// Quadrature value of `∫ z^a z̄^b dA`.
    pub fn monomial(&self, a: u32, b: u32) -> Result<C64> {
        let k = (a + b) as usize;
        if k > self.degree as usize {
            return Err(Error::QuadratureError(format!(
                "integrand degree {k} exceeds rule degree {}",
                self.degree
            )));
        }
        Ok(self.cache_angular[&(a as i64 - b as i64)] * self.cache_radial[k])
    }

    /// `∫_D f ḡ dA`.
    pub fn inner(&self, f: &DiscPoly, g: &DiscPoly) -> Result<C64> {
        let mut acc = c(0.0, 0.0);
        for (&(a, b), &u) in &f.terms {
            for (&(p, q), &v) in &g.terms {
                // f ḡ contains z^{a+q} z̄^{b+p}
                acc += u * v.conj() * self.monomial(a + q, b + p)?;
            }
        }
        Ok(acc)
    }

    pub fn inner_sections(&self, f: &DiscSection, g: &DiscSection) -> Result<C64> {
        let mut acc = c(0.0, 0.0);
        for (u, v) in f.iter().zip(g) {
            acc += self.inner(u, v)?;
        }
        Ok(acc)
    }

    /// Integrate an arbitrary function by direct node summation.
    pub fn integrate(&self, f: impl Fn(C64) -> C64) -> C64 {
        let mut acc = c(0.0, 0.0);
        for &(r, w) in &self.radial {
            for j in 0..self.n_theta {
                let th = 2.0 * PI * j as f64 / self.n_theta as f64;
                acc += f(C64::from_polar(r, th)) * (w * r);
            }
        }
        acc * (2.0 * PI / self.n_theta as f64)
    }
}

/// Evaluate `∫ f ḡ` on a degree-adapted rule and once more on the refined
/// rule; fail if the two disagree by more than `tol`.
pub fn inner_converged(f: &DiscSection, g: &DiscSection, tol: f64) -> Result<(C64, u32)> {
    let deg = f.iter().chain(g.iter()).map(|p| p.degree()).max().unwrap_or(0);
    let rule = DiscRule::for_degree(2 * deg);
    let coarse = rule.inner_sections(f, g)?;
    let fine = rule.refined().inner_sections(f, g)?;
    if (coarse - fine).norm() > tol * (1.0 + fine.norm()) {
        return Err(Error::QuadratureError(format!(
            "no convergence under refinement: {:e}",
            (coarse - fine).norm()
        )));
    }
    Ok((fine, 1))
}

/// `∫_0^{2π} u v̄ dθ` for Fourier series given as mode → coefficient of
/// `e^{inθ}`.
pub fn circle_inner(u: &BTreeMap<i64, C64>, v: &BTreeMap<i64, C64>) -> C64 {
    u.iter()
        .filter_map(|(n, a)| v.get(n).map(|b| a * b.conj()))
        .sum::<C64>()
        * (2.0 * PI)
}

/// Samples of a Fourier series at `θ_j = 2πj/n`.
pub fn sample_circle(u: &BTreeMap<i64, C64>, n: usize) -> Vec<C64> {
    (0..n)
        .map(|j| {
            let th = 2.0 * PI * j as f64 / n as f64;
            u.iter().map(|(&m, &a)| a * C64::from_polar(1.0, m as f64 * th)).sum()
        })
        .collect()
}

/// Fourier coefficient of mode `m` from equispaced samples.
pub fn fourier_coefficient(samples: &[C64], m: i64) -> C64 {
    let n = samples.len();
    samples
        .iter()
        .enumerate()
        .map(|(j, &s)| s * C64::from_polar(1.0, -(m as f64) * 2.0 * PI * j as f64 / n as f64))
        .sum::<C64>()
        / n as f64
}
