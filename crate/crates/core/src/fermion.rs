//! Jordan–Wigner conventions and dense fermionic operators.
//!
//! Mode `p` is bit `p` of a computational basis index. `a_p` carries the
//! string `Z_0 ⋯ Z_{p−1}`, so a creation or annihilation on mode `p` picks up
//! `(−1)^{#occupied modes below p}`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, CVec, C64, ONE, ZERO};

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 12;

/// A dense operator on the Fock space of `n` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    pub matrix: CMat,
    pub n: usize,
    pub tag: String,
}

impl FockOperator {
    pub fn new(matrix: CMat, n: usize, tag: impl Into<String>) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1usize << n;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Shape(alloc::format!(
                "operator is {}x{}, expected {dim}x{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix, n, tag: tag.into() })
    }
}

pub fn check_qubits(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(Error::Shape(alloc::format!("{n} qubits exceed the dense limit of {MAX_QUBITS}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Create(usize),
    Annihilate(usize),
}

#[inline]
fn parity_below(bits: usize, p: usize) -> f64 {
    if (bits & ((1usize << p) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Apply one ladder operator to a basis state.
#[inline]
pub fn apply_ladder(op: Ladder, bits: usize) -> Option<(f64, usize)> {
    match op {
        Ladder::Create(p) => {
            if bits & (1 << p) != 0 {
                None
            } else {
                Some((parity_below(bits, p), bits | (1 << p)))
            }
        }
        Ladder::Annihilate(p) => {
            if bits & (1 << p) == 0 {
                None
            } else {
                Some((parity_below(bits, p), bits & !(1 << p)))
            }
        }
    }
}

/// Apply an operator product, written left to right as in `a†_p a†_q a_s a_r`;
/// the rightmost factor acts first.
pub fn apply_string(ops: &[Ladder], bits: usize) -> Option<(f64, usize)> {
    let mut sign = 1.0;
    let mut state = bits;
    for &op in ops.iter().rev() {
        let (s, next) = apply_ladder(op, state)?;
        sign *= s;
        state = next;
    }
    Some((sign, state))
}

/// Dense creation and annihilation matrices for every mode.
#[derive(Debug, Clone)]
pub struct JwOps {
    pub create: Vec<CMat>,
    pub annihilate: Vec<CMat>,
}

pub fn jw_ladder_ops(n: usize) -> Result<JwOps> {
    check_qubits(n)?;
    let dim = 1usize << n;
    let mut create = Vec::with_capacity(n);
    let mut annihilate = Vec::with_capacity(n);
    for p in 0..n {
        let mut m = CMat::zeros(dim, dim);
        for x in 0..dim {
            if let Some((s, y)) = apply_ladder(Ladder::Create(p), x) {
                m[(y, x)] = c(s);
            }
        }
        annihilate.push(m.adjoint());
        create.push(m);
    }
    Ok(JwOps { create, annihilate })
}

/// Basis indices with exactly `n_elec` set bits, ascending.
pub fn sector_indices(n: usize, n_elec: usize) -> Vec<usize> {
    (0..1usize << n).filter(|x| x.count_ones() as usize == n_elec).collect()
}

pub fn basis_state(n: usize, bits: usize) -> CVec {
    let mut v = CVec::zeros(1 << n);
    v[bits] = ONE;
    v
}

/// `Σ_pq m_pq a†_p a_q`.
pub fn one_body_operator(n: usize, m: &CMat) -> CMat {
    let dim = 1usize << n;
    let mut out = CMat::zeros(dim, dim);
    for p in 0..n {
        for q in 0..n {
            let coef = m[(p, q)];
            if coef == ZERO {
                continue;
            }
            let ops = [Ladder::Create(p), Ladder::Annihilate(q)];
            for x in 0..dim {
                if let Some((s, y)) = apply_string(&ops, x) {
                    out[(y, x)] += coef * s;
                }
            }
        }
    }
    out
}

/// `Σ coef · a†_p a†_q a_s a_r` over the listed `(p, q, r, s, coef)` terms.
pub fn two_body_operator(n: usize, terms: &[(usize, usize, usize, usize, C64)]) -> CMat {
    let dim = 1usize << n;
    let mut out = CMat::zeros(dim, dim);
    for &(p, q, r, s, coef) in terms {
        let ops = [Ladder::Create(p), Ladder::Create(q), Ladder::Annihilate(s), Ladder::Annihilate(r)];
        for x in 0..dim {
            if let Some((sg, y)) = apply_string(&ops, x) {
                out[(y, x)] += coef * sg;
            }
        }
    }
    out
}

/// Total number operator, diagonal with Hamming weights.
pub fn number_operator(n: usize) -> CMat {
    let dim = 1usize << n;
    CMat::from_fn(dim, dim, |i, j| if i == j { c(i.count_ones() as f64) } else { ZERO })
}

/// Largest entry of `m` connecting different Hamming weights of the low
/// `n_system` bits. Zero means the operator conserves particle number on
/// the system register for every ancilla configuration.
pub fn sector_leakage(m: &CMat, n_system: usize) -> f64 {
    let mask = (1usize << n_system) - 1;
    let mut worst: f64 = 0.0;
    for j in 0..m.ncols() {
        let wj = (j & mask).count_ones();
        for i in 0..m.nrows() {
            if (i & mask).count_ones() != wj {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}
