//! Givens and pair-Givens ladder schedules and their dense application.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // method resolution without std
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fermion::{apply_string, check_qubits, Ladder};
use crate::linalg::{cis, pair_list, pairs, CMat, CVec, C64, ONE, ZERO};

/// Elementary gates of a ladder, each a fermionic unitary on the system
/// register.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    /// `exp θ(e^{iφ} a†_p a_r − h.c.)`.
    Givens { p: usize, r: usize, theta: f64, phi: f64 },
    /// `exp θ(e^{iφ} a†_p a†_q a_s a_r − h.c.)`.
    PairGivens { p: usize, q: usize, r: usize, s: usize, theta: f64, phi: f64 },
    /// `e^{iφ n̂_p}`.
    Phase { mode: usize, phi: f64 },
    /// Qubit flip used for pivot injection.
    X { mode: usize },
}

impl Gate {
    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::Givens { p, r, theta, phi } => Gate::Givens { p, r, theta: -theta, phi },
            Gate::PairGivens { p, q, r, s, theta, phi } => Gate::PairGivens { p, q, r, s, theta: -theta, phi },
            Gate::Phase { mode, phi } => Gate::Phase { mode, phi: -phi },
            Gate::X { mode } => Gate::X { mode },
        }
    }

    pub fn modes(&self) -> Vec<usize> {
        match *self {
            Gate::Givens { p, r, .. } => vec![p, r],
            Gate::PairGivens { p, q, r, s, .. } => vec![p, q, r, s],
            Gate::Phase { mode, .. } | Gate::X { mode } => vec![mode],
        }
    }

    /// Apply in place to a state (or any vector) on `2^n` amplitudes. Only
    /// the low `n` bits of each index are touched, so the gate acts as
    /// `I ⊗ G` on a wider register.
    pub fn apply(&self, state: &mut [C64]) {
        match *self {
            Gate::Givens { p, r, theta, phi } => {
                rotate(state, &[Ladder::Create(p), Ladder::Annihilate(r)], theta, phi)
            }
            Gate::PairGivens { p, q, r, s, theta, phi } => rotate(
                state,
                &[Ladder::Create(p), Ladder::Create(q), Ladder::Annihilate(s), Ladder::Annihilate(r)],
                theta,
                phi,
            ),
            Gate::Phase { mode, phi } => {
                let z = cis(phi);
                for (x, amp) in state.iter_mut().enumerate() {
                    if x >> mode & 1 == 1 {
                        *amp *= z;
                    }
                }
            }
            Gate::X { mode } => {
                let bit = 1usize << mode;
                for x in 0..state.len() {
                    if x & bit == 0 {
                        state.swap(x, x | bit);
                    }
                }
            }
        }
    }
}

/// `exp θ(e^{iφ}A − e^{−iφ}A†)` for a Jordan–Wigner string `A` with
/// `A² = 0`: a direct sum of 2×2 rotations on `(x, Ax)` pairs.
fn rotate(state: &mut [C64], ops: &[Ladder], theta: f64, phi: f64) {
    if theta == 0.0 {
        return;
    }
    let (sn, cs) = theta.sin_cos();
    let z = cis(phi);
    for x in 0..state.len() {
        if let Some((sign, y)) = apply_string(ops, x) {
            if y == x {
                continue;
            }
            let (a, b) = (state[x], state[y]);
            state[x] = a * cs - z.conj() * b * (sn * sign);
            state[y] = b * cs + z * a * (sn * sign);
        }
    }
}

pub fn apply_gates(gates: &[Gate], state: &mut [C64]) {
    for g in gates {
        g.apply(state);
    }
}

/// Dense matrix of a gate sequence on `n` modes.
pub fn gates_unitary(gates: &[Gate], n: usize) -> CMat {
    let dim = 1usize << n;
    let mut out = CMat::identity(dim, dim);
    for j in 0..dim {
        let mut col: Vec<C64> = out.column(j).iter().copied().collect();
        apply_gates(gates, &mut col);
        out.set_column(j, &CVec::from_vec(col));
    }
    out
}

pub fn inverse_gates(gates: &[Gate]) -> Vec<Gate> {
    gates.iter().rev().map(Gate::inverse).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    OneElectron,
    TwoElectron,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderSchedule {
    pub n: usize,
    pub sector: Sector,
    /// `[r]` or `[r, s]`.
    pub pivot: Vec<usize>,
    /// Non-pivot modes (or pairs) in rotation order.
    pub ordering: Vec<Vec<usize>>,
    pub thetas: Vec<f64>,
    pub phases: Vec<f64>,
    pub prep_form: bool,
}

impl LadderSchedule {
    pub fn with_prep_form(mut self, prep: bool) -> Self {
        self.prep_form = prep;
        self
    }

    /// Gates in application order.
    pub fn gates(&self) -> Vec<Gate> {
        let mut out = Vec::new();
        if self.prep_form {
            out.extend(self.pivot.iter().map(|&m| Gate::X { mode: m }));
        }
        match self.sector {
            Sector::OneElectron => {
                let r = self.pivot[0];
                for (k, t) in self.ordering.iter().enumerate() {
                    out.push(Gate::Givens { p: t[0], r, theta: self.thetas[k], phi: 0.0 });
                }
                for (k, t) in self.ordering.iter().enumerate() {
                    out.push(Gate::Phase { mode: t[0], phi: self.phases[k] });
                }
            }
            Sector::TwoElectron => {
                let (r, s) = (self.pivot[0], self.pivot[1]);
                for (k, t) in self.ordering.iter().enumerate() {
                    out.push(Gate::PairGivens { p: t[0], q: t[1], r, s, theta: self.thetas[k], phi: self.phases[k] });
                }
            }
        }
        out
    }

    /// Tail norms `s_1 … s_{m+1}`, `s_{m+1} = |u_pivot|`.
    pub fn tail_norms(&self) -> Vec<f64> {
        let m = self.thetas.len();
        let mut s = vec![1.0; m + 1];
        for k in 0..m {
            s[k + 1] = s[k] * self.thetas[k].cos();
        }
        s
    }

    pub fn unitary(&self) -> CMat {
        gates_unitary(&self.gates(), self.n)
    }
}

/// Dense application of a schedule to a state on `2^n` amplitudes.
pub fn apply_ladder_dense(sched: &LadderSchedule, state: &CVec, n: usize) -> Result<CVec> {
    check_qubits(n)?;
    if state.len() != 1 << n || sched.n > n {
        return Err(Error::Shape(alloc::format!("state of length {} for {n} modes", state.len())));
    }
    let mut buf: Vec<C64> = state.iter().copied().collect();
    apply_gates(&sched.gates(), &mut buf);
    Ok(CVec::from_vec(buf))
}

/// Arg-max of `|u_p|`, lowest index on ties.
pub fn default_pivot(u: &CVec) -> usize {
    let mut best = 0;
    for p in 1..u.len() {
        if u[p].norm() > u[best].norm() {
            best = p;
        }
    }
    best
}

fn arg(z: C64) -> f64 {
    if z == ZERO {
        0.0
    } else {
        z.arg()
    }
}

/// Angles from the tail-norm recursion: `θ_k = atan2(|u_k|, s_{k+1})`,
/// which gives 0 and π/2 on the degenerate tails.
fn recursion(u: &CVec, pivot: usize, others: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let norm = u.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Normalization { norm });
    }
    let gauge = cis(-arg(u[pivot])) * (1.0 / norm);
    let v: Vec<C64> = u.iter().map(|z| z * gauge).collect();
    let m = others.len();
    let mut tail = vec![0.0; m + 1];
    tail[m] = v[pivot].norm_sqr();
    for k in (0..m).rev() {
        tail[k] = tail[k + 1] + v[others[k]].norm_sqr();
    }
    let thetas = (0..m).map(|k| v[others[k]].norm().atan2(tail[k + 1].sqrt())).collect();
    let phases = others.iter().map(|&p| arg(v[p])).collect();
    Ok((thetas, phases))
}

pub fn one_electron_angles(u: &CVec, pivot: usize) -> Result<LadderSchedule> {
    let n = u.len();
    if pivot >= n {
        return Err(Error::Validation(alloc::format!("pivot {pivot} outside {n} modes")));
    }
    let others: Vec<usize> = (0..n).filter(|&p| p != pivot).collect();
    let (thetas, phases) = recursion(u, pivot, &others)?;
    Ok(LadderSchedule {
        n,
        sector: Sector::OneElectron,
        pivot: vec![pivot],
        ordering: others.into_iter().map(|p| vec![p]).collect(),
        thetas,
        phases,
        prep_form: true,
    })
}

/// `u_pairs` is indexed like [`pair_list`]`(n)`.
pub fn two_electron_angles(n: usize, u_pairs: &CVec, pivot: (usize, usize)) -> Result<LadderSchedule> {
    if u_pairs.len() != pairs(n) {
        return Err(Error::Shape(alloc::format!("{} pair amplitudes for {n} modes", u_pairs.len())));
    }
    let list = pair_list(n);
    let Some(pk) = list.iter().position(|&x| x == pivot) else {
        return Err(Error::Validation(alloc::format!("pivot pair {pivot:?} is not an ordered pair of {n} modes")));
    };
    let others: Vec<usize> = (0..list.len()).filter(|&k| k != pk).collect();
    let (thetas, phases) = recursion(u_pairs, pk, &others)?;
    Ok(LadderSchedule {
        n,
        sector: Sector::TwoElectron,
        pivot: vec![pivot.0, pivot.1],
        ordering: others.into_iter().map(|k| vec![list[k].0, list[k].1]).collect(),
        thetas,
        phases,
        prep_form: true,
    })
}

/// Full single-particle basis change `R̂` with `R̂ a†_j R̂† = Σ_p u_pj a†_p`,
/// decomposed into adjacent Givens rotations and a phase layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisRotation {
    pub n: usize,
    pub gates: Vec<Gate>,
}

impl BasisRotation {
    pub fn from_unitary(u: &CMat) -> Self {
        let n = u.nrows();
        let mut w = u.clone();
        let mut rotations = Vec::new();
        for j in 0..n {
            for i in (j + 1..n).rev() {
                let (a, b) = (w[(i - 1, j)], w[(i, j)]);
                let theta = b.norm().atan2(a.norm());
                let phi = arg(b) - arg(a);
                let (sn, cs) = theta.sin_cos();
                let z = cis(phi);
                for col in 0..n {
                    let (x, y) = (w[(i - 1, col)], w[(i, col)]);
                    w[(i - 1, col)] = x * cs + z.conj() * y * sn;
                    w[(i, col)] = y * cs - z * x * sn;
                }
                rotations.push(Gate::Givens { p: i, r: i - 1, theta, phi });
            }
        }
        let mut gates: Vec<Gate> = (0..n).map(|j| Gate::Phase { mode: j, phi: arg(w[(j, j)]) }).collect();
        gates.extend(rotations.into_iter().rev());
        Self { n, gates }
    }

    pub fn inverse(&self) -> Vec<Gate> {
        inverse_gates(&self.gates)
    }

    pub fn unitary(&self) -> CMat {
        gates_unitary(&self.gates, self.n)
    }
}

/// Complete orthonormal columns to a square orthogonal matrix by
/// Gram–Schmidt against the standard basis.
pub fn complete_basis(cols: &CMat) -> CMat {
    let n = cols.nrows();
    let mut out: Vec<CVec> = cols.column_iter().map(|c| c.into_owned()).collect();
    for e in 0..n {
        if out.len() == n {
            break;
        }
        let mut v = CVec::zeros(n);
        v[e] = ONE;
        for b in &out {
            let proj = b.dotc(&v);
            v -= b * proj;
        }
        let nv = v.norm();
        if nv > 1e-8 {
            out.push(v / C64::new(nv, 0.0));
        }
    }
    CMat::from_columns(&out)
}
