//! Truncated Chebyshev (Jacobi–Anger) expansions of `e^{−iαx}` applied to
//! block-encoded generators by the matrix three-term recurrence.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // method resolution without std
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::Mask;
use crate::error::{Error, Result};
use crate::factorization::GeneratorPool;
use crate::fermion::{sector_indices, FockOperator};
use crate::linalg::{c, expm_antihermitian, identity, spectral_norm, submatrix, CMat, C64, ONE, ZERO};
use crate::oracle::{generator_block_encoding, generator_sector};

/// Slack on the `‖A‖ ≤ 1` precondition.
pub const NORM_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevPoly {
    pub degree: usize,
    pub coeffs: Vec<C64>,
    pub target_alpha: f64,
    pub eps_poly: f64,
}

/// `J_0(x) … J_{kmax}(x)` by Miller's downward recurrence, normalized with
/// `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j(x: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = kmax + 20 + x.abs().ceil() as usize;
    let start = start + (start & 1);
    let mut next = 0.0;
    let mut cur = 1e-300;
    let mut norm = 0.0;
    let mut vals = vec![0.0; start + 1];
    vals[start] = cur;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        vals[k - 1] = cur;
        if cur.abs() > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
            next *= 1e-250;
            cur *= 1e-250;
        }
    }
    for (k, v) in vals.iter().enumerate() {
        if k == 0 {
            norm += v;
        } else if k % 2 == 0 {
            norm += 2.0 * v;
        }
    }
    for k in 0..=kmax {
        out[k] = vals[k] / norm;
    }
    out
}

fn tail_terms(alpha: f64) -> usize {
    2 * alpha.ceil() as usize + 80
}

/// `Σ_{k>d} 2|J_k(α)|`.
pub fn tail_bound(alpha: f64, d: usize) -> f64 {
    let top = d.max(tail_terms(alpha));
    let j = bessel_j(alpha, top);
    j[d + 1..].iter().map(|v| 2.0 * v.abs()).sum()
}

/// Smallest even degree whose Jacobi–Anger tail is within `eps`.
pub fn degree_for(alpha: f64, eps: f64) -> usize {
    let top = tail_terms(alpha);
    let j = bessel_j(alpha, top);
    let mut tail: f64 = j.iter().skip(1).map(|v| 2.0 * v.abs()).sum();
    let mut d = 0;
    while tail > eps && d + 2 <= top {
        tail -= 2.0 * (j[d + 1].abs() + j[d + 2].abs());
        d += 2;
    }
    d
}

/// `c_k = (−i)^k (2 − δ_{k0}) J_k(α)`.
pub fn jacobi_anger_coeffs(alpha: f64, d: usize) -> ChebyshevPoly {
    let j = bessel_j(alpha, d);
    let mut phase = ONE;
    let coeffs = j
        .iter()
        .enumerate()
        .map(|(k, jk)| {
            let ck = phase * (if k == 0 { 1.0 } else { 2.0 } * jk);
            phase *= C64::new(0.0, -1.0);
            ck
        })
        .collect();
    ChebyshevPoly { degree: d, coeffs, target_alpha: alpha, eps_poly: tail_bound(alpha, d) }
}

impl ChebyshevPoly {
    pub fn for_accuracy(alpha: f64, eps: f64) -> Self {
        jacobi_anger_coeffs(alpha, degree_for(alpha, eps))
    }

    /// Clenshaw evaluation on `[−1, 1]`.
    pub fn eval(&self, x: f64) -> C64 {
        let mut b1 = ZERO;
        let mut b2 = ZERO;
        for ck in self.coeffs.iter().skip(1).rev() {
            let b0 = *ck + b1 * (2.0 * x) - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + b1 * x - b2
    }

    /// `P_d(A)` for a matrix with `‖A‖ ≤ 1`.
    pub fn apply(&self, a: &CMat) -> Result<CMat> {
        let norm = spectral_norm(a);
        if norm > 1.0 + NORM_SLACK {
            return Err(Error::SpectralBound { norm });
        }
        let dim = a.nrows();
        let mut t_prev = identity(dim);
        let mut out = &t_prev * self.coeffs[0];
        if self.degree == 0 {
            return Ok(out);
        }
        let mut t_cur = a.clone();
        out += &t_cur * self.coeffs[1];
        let two_a = a * c(2.0);
        for ck in &self.coeffs[2..] {
            let t_next = &two_a * &t_cur - &t_prev;
            out += &t_next * *ck;
            t_prev = core::mem::replace(&mut t_cur, t_next);
        }
        Ok(out)
    }
}

pub fn apply_matrix_poly(poly: &ChebyshevPoly, a: &FockOperator) -> Result<FockOperator> {
    FockOperator::new(poly.apply(&a.matrix)?, a.n, "poly")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpReport {
    pub degree: usize,
    pub alpha: f64,
    pub eps_poly: f64,
    pub eps_prime: f64,
    /// `‖P_d(B) − e^{σ̂}‖` on the generator's sector.
    pub measured_deviation: f64,
    pub sector: Option<usize>,
}

/// Fixed Hermitian direction of unit spectral norm supported on `idx`.
pub fn injection_direction(dim: usize, idx: &[usize]) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let k = idx.len();
    let g = CMat::from_fn(k, k, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let h = (&g + g.adjoint()) * c(0.5);
    let h = &h / c(spectral_norm(&h).max(f64::MIN_POSITIVE));
    let mut out = CMat::zeros(dim, dim);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            out[(i, j)] = h[(a, b)];
        }
    }
    out
}

/// Degree-`d` approximation of `e^{σ̂^(m)}` from the masked generator block,
/// with an optional deterministic block error `(1−ε′)B + ε′E`.
pub fn exp_sigma_block(pool: &GeneratorPool, mask: &Mask, eps_poly: f64, eps_prime: f64) -> Result<(FockOperator, ExpReport)> {
    let (lcu, _) = generator_block_encoding(pool, mask, None)?;
    let poly = ChebyshevPoly::for_accuracy(pool.alpha_bar, eps_poly);
    exp_from_block(pool, mask, &lcu.block(), &poly, eps_prime)
}

pub fn exp_from_block(pool: &GeneratorPool, mask: &Mask, block: &CMat, poly: &ChebyshevPoly, eps_prime: f64) -> Result<(FockOperator, ExpReport)> {
    let n = pool.n_so;
    let sector = generator_sector(pool);
    let idx: Vec<usize> = match sector {
        Some(ne) => sector_indices(n, ne),
        None => (0..1usize << n).collect(),
    };
    let mut b = block.clone();
    if eps_prime > 0.0 {
        let dim = b.nrows();
        b = b * c(1.0 - eps_prime) + injection_direction(dim, &idx) * c(eps_prime);
    }
    let approx = poly.apply(&b)?;
    let addresses: Vec<usize> = mask.indices.iter().copied().collect();
    let exact = expm_antihermitian(&submatrix(&pool.anti_hermitian_sigma(&addresses), &idx, &idx));
    let measured_deviation = spectral_norm(&(submatrix(&approx, &idx, &idx) - exact));
    let report = ExpReport {
        degree: poly.degree,
        alpha: poly.target_alpha,
        eps_poly: poly.eps_poly,
        eps_prime,
        measured_deviation,
        sector,
    };
    Ok((FockOperator::new(approx, n, "exp_sigma")?, report))
}

/// Least-squares `(C₁, C₂)` for `d ≈ C₁ α + C₂ ln(1/ε)` and the largest
/// relative residual.
pub fn fit_degree_law(samples: &[(f64, f64, usize)]) -> (f64, f64, f64) {
    let (mut saa, mut sab, mut sbb, mut sad, mut sbd) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(alpha, eps, d) in samples {
        let (a, b, d) = (alpha, (1.0 / eps).ln(), d as f64);
        saa += a * a;
        sab += a * b;
        sbb += b * b;
        sad += a * d;
        sbd += b * d;
    }
    let det = saa * sbb - sab * sab;
    let c1 = (sad * sbb - sbd * sab) / det;
    let c2 = (saa * sbd - sab * sad) / det;
    let worst = samples
        .iter()
        .map(|&(alpha, eps, d)| {
            let fit = c1 * alpha + c2 * (1.0 / eps).ln();
            (fit - d as f64).abs() / d as f64
        })
        .fold(0.0, f64::max);
    (c1, c2, worst)
}
