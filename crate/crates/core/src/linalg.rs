//! Thin helpers over nalgebra used throughout the crate.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // method resolution without std
use num_traits::Float;

pub use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `e^{iφ}`.
#[inline]
pub fn cis(phi: f64) -> C64 {
    C64::new(phi.cos(), phi.sin())
}

pub fn to_complex(a: &RMat) -> CMat {
    a.map(c)
}

/// Index of the entry with the largest magnitude; the first one wins ties.
fn dominant(it: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = -1.0;
    for (k, v) in it.enumerate() {
        if v > best_val * (1.0 + 1e-9) + 1e-300 {
            best = k;
            best_val = v;
        }
    }
    best
}

/// Eigendecomposition of a real symmetric matrix, ascending eigenvalues.
/// Each eigenvector is signed so that its dominant component is positive.
pub fn eigh_real(a: &RMat) -> (Vec<f64>, RMat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), RMat::zeros(0, 0));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let mut vecs = RMat::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (k, &i) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(i);
        let d = dominant(col.iter().map(|x| x.abs()));
        let s = if col[d] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vecs[(r, k)] = s * col[r];
        }
        vals.push(eig.eigenvalues[i]);
    }
    (vals, vecs)
}

/// Like [`eigh_real`] but splits the problem along even/odd indices when the
/// matrix does not couple them, so spin-orbital operators without spin mixing
/// get spin-pure eigenvectors. Ties in the merged spectrum keep even modes
/// first.
pub fn eigh_real_spin_blocked(a: &RMat) -> (Vec<f64>, RMat) {
    let n = a.nrows();
    let coupled = (0..n).any(|i| (0..n).any(|j| (i + j) % 2 == 1 && a[(i, j)].abs() > 1e-14));
    if coupled || n < 2 {
        return eigh_real(a);
    }
    let mut parts = Vec::new();
    for parity in 0..2 {
        let idx: Vec<usize> = (parity..n).step_by(2).collect();
        let sub = RMat::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])]);
        let (vals, vecs) = eigh_real(&sub);
        for (k, v) in vals.into_iter().enumerate() {
            let mut full = DVector::<f64>::zeros(n);
            for (r, &i) in idx.iter().enumerate() {
                full[i] = vecs[(r, k)];
            }
            parts.push((v, parity, k, full));
        }
    }
    parts.sort_by(|x, y| {
        let close = (x.0 - y.0).abs() <= 1e-12 * (1.0 + x.0.abs().max(y.0.abs()));
        if close {
            (x.2, x.1).cmp(&(y.2, y.1))
        } else {
            x.0.total_cmp(&y.0)
        }
    });
    let mut vecs = RMat::zeros(n, n);
    let vals = parts.iter().map(|p| p.0).collect();
    for (k, p) in parts.iter().enumerate() {
        vecs.set_column(k, &p.3);
    }
    (vals, vecs)
}

/// Eigendecomposition of a complex Hermitian matrix, ascending eigenvalues.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let herm = (a + a.adjoint()).map(|z| z * 0.5);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let mut vecs = CMat::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (k, &i) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(i);
        let d = dominant(col.iter().map(|z| z.norm()));
        let ph = if col[d].norm() > 0.0 { col[d].conj() / col[d].norm() } else { ONE };
        for r in 0..n {
            vecs[(r, k)] = col[r] * ph;
        }
        vals.push(eig.eigenvalues[i]);
    }
    (vals, vecs)
}

/// Largest singular value.
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone().singular_values().iter().fold(0.0, |m, &s| m.max(s))
}

/// `f(H)` for Hermitian `H` through its eigendecomposition.
pub fn hermitian_function(h: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let (vals, vecs) = eigh(h);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for k in 0..n {
        let fk = f(vals[k]);
        for r in 0..n {
            scaled[(r, k)] *= fk;
        }
    }
    scaled * vecs.adjoint()
}

/// `e^{S}` for anti-Hermitian `S`, computed from the spectrum of `iS`.
pub fn expm_antihermitian(s: &CMat) -> CMat {
    let h = s.map(|z| z * I);
    // S = -i·(iS), so e^{S} = e^{-i·(iS)}.
    hermitian_function(&h, |x| cis(-x))
}

/// `a ⊗ b`, with `a` on the high-order index.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

pub fn submatrix(a: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `max |U†U − I|`.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let g = u.adjoint() * u;
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((g[(i, j)] - target).norm());
        }
    }
    worst
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `⌈log₂ x⌉` with `x ≤ 1 ↦ 0`.
pub fn ceil_log2(x: usize) -> usize {
    let mut bits = 0;
    while (1usize << bits) < x {
        bits += 1;
    }
    bits
}

/// Binomial coefficient `C(n, 2)`.
#[inline]
pub fn pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of `(p, q)`, `p < q`, in the lexicographic list of pairs over `n` items.
#[inline]
pub fn pair_index(p: usize, q: usize, n: usize) -> usize {
    debug_assert!(p < q && q < n);
    p * n - p * (p + 1) / 2 + (q - p - 1)
}

/// All pairs `p < q` over `n` items in lexicographic order.
pub fn pair_list(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(pairs(n));
    for p in 0..n {
        for q in p + 1..n {
            out.push((p, q));
        }
    }
    out
}
