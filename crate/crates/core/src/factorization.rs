//! Low-rank factorizations: pivoted Cholesky of the two-electron supermatrix,
//! channel eigendecompositions, the Hamiltonian pool, MP2 doubles and the
//! nested SVD of a doubles tensor into wedge-product pair ladders.

use alloc::vec::Vec;

use nalgebra::DVector;
#[allow(unused_imports)] // method resolution without std
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fermion::{one_body_operator, two_body_operator};
use crate::integrals::{mean_field_shift, IntegralSet};
use crate::linalg::{c, eigh, eigh_real_spin_blocked, pair_index, pair_list, pairs, CMat, CVec, RMat, C64, I, ZERO};

/// One symmetric Cholesky factor `L^μ` and its eigen-modes.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyChannel {
    pub index: usize,
    pub factor: RMat,
    /// Retained eigenvalues, descending in magnitude.
    pub eigvals: Vec<f64>,
    /// `n_so × R_μ`, orthonormal columns.
    pub rotation: RMat,
    /// `Γ_μ = Σ |λ_ξ|`.
    pub gamma: f64,
}

impl CholeskyChannel {
    pub fn new(index: usize, factor: RMat) -> Self {
        let n = factor.nrows();
        Self { index, factor, eigvals: Vec::new(), rotation: RMat::zeros(n, 0), gamma: 0.0 }
    }

    pub fn rank(&self) -> usize {
        self.eigvals.len()
    }

    /// `rotation · diag(eigvals) · rotationᵀ`.
    pub fn reconstruct(&self) -> RMat {
        let d = RMat::from_diagonal(&DVector::from_column_slice(&self.eigvals));
        &self.rotation * d * self.rotation.transpose()
    }

    /// Dense `Ô_μ = Σ_ξ λ_ξ n̂_{U_ξ}` built from the retained modes.
    pub fn operator(&self, n: usize) -> CMat {
        one_body_operator(n, &crate::linalg::to_complex(&self.reconstruct()))
    }
}

/// Pivoted Cholesky of `M[(p,r),(q,s)] = ⟨pq|rs⟩` until the largest residual
/// diagonal drops to `tau`. Pivots are the largest residual diagonal, the
/// lowest index on ties.
pub fn pivoted_cholesky(ints: &IntegralSet, tau: f64) -> Result<Vec<CholeskyChannel>> {
    if !(tau >= 0.0) {
        return Err(Error::Validation(alloc::format!("tau_chol = {tau} must be nonnegative")));
    }
    let n = ints.n_so;
    let dim = n * n;
    let entry = |a: usize, b: usize| ints.eri(a / n, b / n, a % n, b % n);
    let mut diag: Vec<f64> = (0..dim).map(|a| entry(a, a)).collect();
    let scale = diag.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let stop = tau.max(1e-14 * scale);
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    loop {
        let mut pivot = 0;
        for a in 1..dim {
            if diag[a] > diag[pivot] {
                pivot = a;
            }
        }
        if let Some((index, &residual)) = diag.iter().enumerate().find(|(_, &d)| d < -10.0 * stop) {
            return Err(Error::NotPsd { residual, index });
        }
        if dim == 0 || diag[pivot] <= stop {
            break;
        }
        let root = diag[pivot].sqrt();
        let mut col: Vec<f64> = (0..dim).map(|a| entry(a, pivot)).collect();
        for v in &vectors {
            let w = v[pivot];
            for (x, y) in col.iter_mut().zip(v) {
                *x -= y * w;
            }
        }
        for x in col.iter_mut() {
            *x /= root;
        }
        for (d, x) in diag.iter_mut().zip(&col) {
            *d -= x * x;
        }
        diag[pivot] = 0.0;
        vectors.push(col);
        if vectors.len() > dim {
            break;
        }
    }
    Ok(vectors
        .into_iter()
        .enumerate()
        .map(|(mu, v)| {
            let f = RMat::from_fn(n, n, |p, r| v[p * n + r]);
            CholeskyChannel::new(mu, (&f + f.transpose()) * 0.5)
        })
        .collect())
}

/// Max-entry error of `Σ_μ L^μ_pr L^μ_qs` against `⟨pq|rs⟩`.
pub fn cholesky_reconstruction_error(ints: &IntegralSet, channels: &[CholeskyChannel]) -> f64 {
    let n = ints.n_so;
    let mut worst: f64 = 0.0;
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let approx: f64 = channels.iter().map(|ch| ch.factor[(p, r)] * ch.factor[(q, s)]).sum();
                    worst = worst.max((approx - ints.eri(p, q, r, s)).abs());
                }
            }
        }
    }
    worst
}

/// Diagonalize the channel factor, keep modes with `|λ|/max|λ| ≥ tau_eig`.
pub fn channel_eigendecomp(ch: &CholeskyChannel, tau_eig: f64) -> CholeskyChannel {
    let n = ch.factor.nrows();
    let (vals, vecs) = eigh_real_spin_blocked(&ch.factor);
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].abs().total_cmp(&vals[a].abs()).then(a.cmp(&b)));
    let top = order.first().map_or(0.0, |&k| vals[k].abs());
    let kept: Vec<usize> = order.into_iter().filter(|&k| top > 0.0 && vals[k].abs() >= tau_eig * top).collect();
    let mut rotation = RMat::zeros(n, kept.len());
    for (j, &k) in kept.iter().enumerate() {
        rotation.set_column(j, &vecs.column(k));
    }
    let eigvals: Vec<f64> = kept.iter().map(|&k| vals[k]).collect();
    let gamma = eigvals.iter().map(|x| x.abs()).sum();
    CholeskyChannel { index: ch.index, factor: ch.factor.clone(), eigvals, rotation, gamma }
}

/// Antisymmetric pair factor `x ∧ y` supported on a list of modes.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFactor {
    pub orbitals: Vec<usize>,
    pub x: CVec,
    pub y: CVec,
}

impl PairFactor {
    /// `U_pq = x_p y_q − x_q y_p` for mode pairs `p < q` of an `n`-mode
    /// register, in [`pair_list`] order.
    pub fn pair_vector(&self, n: usize) -> CVec {
        let mut out = CVec::zeros(pairs(n));
        for (i, &p) in self.orbitals.iter().enumerate() {
            for (j, &q) in self.orbitals.iter().enumerate() {
                if p < q {
                    out[pair_index(p, q, n)] += self.x[i] * self.y[j] - self.x[j] * self.y[i];
                }
            }
        }
        out
    }

    /// Dense antisymmetric matrix over the local orbital list.
    pub fn wedge_matrix(&self) -> CMat {
        let k = self.orbitals.len();
        CMat::from_fn(k, k, |a, b| self.x[a] * self.y[b] - self.x[b] * self.y[a])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LadderKind {
    /// `Σ u_p v*_q a†_p a_q`.
    Bilinear { u: CVec, v: CVec },
    /// `B†[U] B[V]` with `U` the upper (creation) wedge and `V` the lower.
    PairExcitation { upper: PairFactor, lower: PairFactor },
    /// `Ô_μ²` of the referenced channel.
    ProjectedQuadratic { channel: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOneLadder {
    pub kind: LadderKind,
    pub coefficient: f64,
    pub address: usize,
}

impl RankOneLadder {
    /// Dense `L̂_s` (without the coefficient). Projected quadratics need the
    /// channel list, see [`HamiltonianPool::term_operator`].
    pub fn operator(&self, n: usize) -> CMat {
        match &self.kind {
            LadderKind::Bilinear { u, v } => one_body_operator(n, &(u * v.adjoint())),
            LadderKind::PairExcitation { upper, lower } => {
                let uu = upper.pair_vector(n);
                let vv = lower.pair_vector(n);
                let list = pair_list(n);
                let mut terms = Vec::new();
                for (a, &(p, q)) in list.iter().enumerate() {
                    if uu[a] == ZERO {
                        continue;
                    }
                    for (b, &(r, s)) in list.iter().enumerate() {
                        let coef = uu[a] * vv[b].conj();
                        if coef != ZERO {
                            terms.push((p, q, r, s, coef));
                        }
                    }
                }
                two_body_operator(n, &terms)
            }
            LadderKind::ProjectedQuadratic { .. } => panic!("projected quadratic ladders need their channel"),
        }
    }

    /// Hermitian `𝔸̂ = i(L̂ − L̂†)`.
    pub fn hermitian_generator(&self, n: usize) -> CMat {
        let l = self.operator(n);
        (&l - l.adjoint()) * I
    }

    /// Product of the two dyad norms, the block-encoding normalization.
    pub fn dyad_alpha(&self) -> f64 {
        match &self.kind {
            LadderKind::Bilinear { u, v } => u.norm() * v.norm(),
            LadderKind::PairExcitation { upper, lower } => {
                let n = upper.orbitals.iter().chain(&lower.orbitals).max().map_or(0, |m| m + 1);
                upper.pair_vector(n).norm() * lower.pair_vector(n).norm()
            }
            LadderKind::ProjectedQuadratic { .. } => 1.0,
        }
    }
}

/// `Ĥ = Σ κ_η n̂_η + ½ Σ_μ Ô_μ²` (constant `E_nn` kept aside).
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianPool {
    pub n_so: usize,
    pub n_elec: usize,
    pub e_nn: f64,
    pub one_body: Vec<RankOneLadder>,
    pub channels: Vec<CholeskyChannel>,
    pub ell_h: usize,
    pub alpha: f64,
}

/// One LCU term of the Hamiltonian: coefficient `Ω_s` and block normalization `α_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamTerm {
    pub address: usize,
    pub omega: f64,
    pub alpha_s: f64,
}

impl HamiltonianPool {
    pub fn new(n_so: usize, n_elec: usize, e_nn: f64, one_body: Vec<RankOneLadder>, channels: Vec<CholeskyChannel>) -> Self {
        let mut pool = Self { n_so, n_elec, e_nn, one_body, channels, ell_h: 0, alpha: 0.0 };
        for (s, l) in pool.one_body.iter_mut().enumerate() {
            l.address = s;
        }
        pool.ell_h = pool.one_body.len() + pool.channels.len();
        pool.alpha = pool.terms().iter().map(|t| t.omega.abs() * t.alpha_s).sum();
        pool
    }

    pub fn r1(&self) -> usize {
        self.one_body.len()
    }

    pub fn k(&self) -> usize {
        self.channels.len()
    }

    /// Addresses `0..R_1` are one-body modes, `R_1..ℓ_H` the channels.
    pub fn terms(&self) -> Vec<HamTerm> {
        let mut out: Vec<HamTerm> = self
            .one_body
            .iter()
            .enumerate()
            .map(|(s, l)| HamTerm { address: s, omega: l.coefficient, alpha_s: 1.0 })
            .collect();
        let r1 = out.len();
        out.extend(self.channels.iter().enumerate().map(|(mu, ch)| HamTerm {
            address: r1 + mu,
            omega: 0.5,
            alpha_s: ch.gamma * ch.gamma,
        }));
        out
    }

    /// Ladder view of the whole pool, channels as projected quadratics.
    pub fn ladders(&self) -> Vec<RankOneLadder> {
        let mut out = self.one_body.clone();
        let r1 = out.len();
        out.extend(self.channels.iter().enumerate().map(|(mu, _)| RankOneLadder {
            kind: LadderKind::ProjectedQuadratic { channel: mu },
            coefficient: 0.5,
            address: r1 + mu,
        }));
        out
    }

    /// Dense `L̂_s` for address `s`.
    pub fn term_operator(&self, s: usize) -> CMat {
        let n = self.n_so;
        if s < self.one_body.len() {
            self.one_body[s].operator(n)
        } else {
            let o = self.channels[s - self.one_body.len()].operator(n);
            &o * &o
        }
    }

    /// `Σ Ω_s L̂_s`.
    pub fn dense(&self) -> CMat {
        let dim = 1usize << self.n_so;
        let mut h = CMat::zeros(dim, dim);
        for t in self.terms() {
            h += self.term_operator(t.address) * c(t.omega);
        }
        h
    }
}

/// Diagonalize `h̃`, Cholesky the two-electron tensor and eigendecompose
/// each channel.
pub fn build_hamiltonian_pool(ints: &IntegralSet, tau_chol: f64, tau_eig: f64, tau_onebody: f64) -> Result<HamiltonianPool> {
    ints.validate()?;
    let n = ints.n_so;
    let (kappa, modes) = eigh_real_spin_blocked(&mean_field_shift(ints));
    let top = kappa.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let one_body: Vec<RankOneLadder> = kappa
        .iter()
        .enumerate()
        .filter(|(_, k)| top == 0.0 || k.abs() >= tau_onebody * top)
        .map(|(j, &k)| {
            let u: CVec = modes.column(j).map(c);
            RankOneLadder { kind: LadderKind::Bilinear { u: u.clone(), v: u }, coefficient: k, address: 0 }
        })
        .collect();
    let channels = pivoted_cholesky(ints, tau_chol)?
        .iter()
        .map(|ch| channel_eigendecomp(ch, tau_eig))
        .collect();
    Ok(HamiltonianPool::new(n, ints.n_elec, ints.e_nn, one_body, channels))
}

/// Doubles amplitudes on antisymmetric pair spaces, `t[ab, ij]` with
/// `a < b` over virtuals (rows) and `i < j` over occupieds (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct T2Tensor {
    pub n_occ: usize,
    pub n_virt: usize,
    pub amplitudes: RMat,
}

impl T2Tensor {
    pub fn zeros(n_occ: usize, n_virt: usize) -> Self {
        Self { n_occ, n_virt, amplitudes: RMat::zeros(pairs(n_virt), pairs(n_occ)) }
    }

    /// Antisymmetric unpacking over local indices.
    pub fn get(&self, a: usize, b: usize, i: usize, j: usize) -> f64 {
        if a == b || i == j {
            return 0.0;
        }
        let (sa, ab) = if a < b { (1.0, pair_index(a, b, self.n_virt)) } else { (-1.0, pair_index(b, a, self.n_virt)) };
        let (si, ij) = if i < j { (1.0, pair_index(i, j, self.n_occ)) } else { (-1.0, pair_index(j, i, self.n_occ)) };
        sa * si * self.amplitudes[(ab, ij)]
    }

    pub fn set(&mut self, a: usize, b: usize, i: usize, j: usize, value: f64) {
        assert!(a < b && i < j, "store with a < b and i < j");
        self.amplitudes[(pair_index(a, b, self.n_virt), pair_index(i, j, self.n_occ))] = value;
    }

    pub fn is_zero(&self) -> bool {
        self.amplitudes.iter().all(|&x| x == 0.0)
    }

    /// Dense `T̂₂ = Σ t_{ab,ij} a†_a a†_b a_j a_i` with occupieds on modes
    /// `0..N_O` and virtuals on `N_O..N_O+N_V`.
    pub fn operator(&self) -> CMat {
        let no = self.n_occ;
        let n = no + self.n_virt;
        let mut terms = Vec::new();
        for (ab, (a, b)) in pair_list(self.n_virt).into_iter().enumerate() {
            for (ij, (i, j)) in pair_list(no).into_iter().enumerate() {
                let t = self.amplitudes[(ab, ij)];
                if t != 0.0 {
                    terms.push((a + no, b + no, i, j, c(t)));
                }
            }
        }
        two_body_operator(n, &terms)
    }
}

/// First-order doubles `t = ⟨ij‖ab⟩ / (ε_i + ε_j − ε_a − ε_b)` and the MP2
/// correlation energy.
pub fn mp2_amplitudes(ints: &IntegralSet) -> Result<(T2Tensor, f64)> {
    let no = ints.n_occ();
    let nv = ints.n_virt();
    let eps = ints.orbital_energies();
    let mut t2 = T2Tensor::zeros(no, nv);
    let mut energy = 0.0;
    for (a, b) in pair_list(nv) {
        let (pa, pb) = (a + no, b + no);
        for (i, j) in pair_list(no) {
            let v = ints.eri(i, j, pa, pb) - ints.eri(i, j, pb, pa);
            let gap = eps[i] + eps[j] - eps[pa] - eps[pb];
            if gap.abs() < 1e-8 {
                return Err(Error::DegenerateGap { i, j, a: pa, b: pb, gap });
            }
            let t = v / gap;
            t2.set(a, b, i, j, t);
            energy += t * v;
        }
    }
    Ok((t2, energy))
}

/// Wedge decomposition of a real antisymmetric matrix,
/// `M = Σ_j λ_j (x_j y_jᵀ − y_j x_jᵀ)` with `λ_j > 0` descending and each
/// `(x_j, y_j)` orthonormal.
pub fn wedge_decomposition(m: &RMat) -> Vec<(f64, DVector<f64>, DVector<f64>)> {
    let k = m.nrows();
    let herm = CMat::from_fn(k, k, |a, b| I * m[(a, b)]);
    let (vals, vecs) = eigh(&herm);
    let top = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut out = Vec::new();
    for (j, &mu) in vals.iter().enumerate().rev() {
        if mu <= 1e-14 * top || mu <= 0.0 {
            continue;
        }
        let w = vecs.column(j);
        let re = DVector::from_iterator(k, w.iter().map(|z| z.re * core::f64::consts::SQRT_2));
        let im = DVector::from_iterator(k, w.iter().map(|z| z.im * core::f64::consts::SQRT_2));
        out.push((mu, im, re));
    }
    out
}

fn unpack_skew(v: &[f64], k: usize) -> RMat {
    let mut m = RMat::zeros(k, k);
    for (idx, (a, b)) in pair_list(k).into_iter().enumerate() {
        m[(a, b)] = v[idx];
        m[(b, a)] = -v[idx];
    }
    m
}

/// Rank-one pair ladders generating `T̂₂ − T̂₂†`, addressed `1..=ℓ_σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorPool {
    pub n_so: usize,
    pub ladders: Vec<RankOneLadder>,
    pub ell_sigma: usize,
    /// `ᾱ′ = Σ 2|ω_s| α_s` over every compiled ladder.
    pub alpha_bar: f64,
}

impl GeneratorPool {
    pub fn new(n_so: usize, mut ladders: Vec<RankOneLadder>) -> Self {
        for (k, l) in ladders.iter_mut().enumerate() {
            l.address = k + 1;
        }
        let alpha_bar = ladders.iter().map(|l| 2.0 * l.coefficient.abs() * l.dyad_alpha()).sum();
        Self { n_so, ell_sigma: ladders.len(), ladders, alpha_bar }
    }

    pub fn weights(&self) -> Vec<f64> {
        self.ladders.iter().map(|l| l.coefficient).collect()
    }

    pub fn ladder(&self, address: usize) -> Option<&RankOneLadder> {
        address.checked_sub(1).and_then(|k| self.ladders.get(k))
    }

    /// Hermitian `Σ_{s ∈ addresses} ω_s 𝔸̂_s`.
    pub fn hermitian_sigma(&self, addresses: &[usize]) -> CMat {
        let dim = 1usize << self.n_so;
        let mut out = CMat::zeros(dim, dim);
        for &s in addresses {
            if let Some(l) = self.ladder(s) {
                out += l.hermitian_generator(self.n_so) * c(l.coefficient);
            }
        }
        out
    }

    /// Anti-Hermitian `σ̂ = Σ ω_s (L̂_s − L̂_s†)`, so that `e^{σ̂} = e^{−i Σ ω 𝔸̂}`.
    pub fn anti_hermitian_sigma(&self, addresses: &[usize]) -> CMat {
        self.hermitian_sigma(addresses) * C64::new(0.0, -1.0)
    }

    pub fn all_addresses(&self) -> Vec<usize> {
        (1..=self.ell_sigma).collect()
    }
}

/// SVD of the pair matrix, then a wedge decomposition of every kept
/// singular vector.
pub fn nested_svd_t2(t2: &T2Tensor, tau_svd: f64, tau_wedge: f64) -> GeneratorPool {
    let no = t2.n_occ;
    let nv = t2.n_virt;
    let n = no + nv;
    if t2.is_zero() || t2.amplitudes.nrows() == 0 || t2.amplitudes.ncols() == 0 {
        return GeneratorPool::new(n, Vec::new());
    }
    let svd = t2.amplitudes.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left vectors");
    let vt = svd.v_t.as_ref().expect("right vectors");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let s1 = sv[order[0]];
    let occ: Vec<usize> = (0..no).collect();
    let virt: Vec<usize> = (no..n).collect();
    let mut ladders = Vec::new();
    for &k in &order {
        let s = sv[k];
        if s < tau_svd * s1 || s <= 1e-14 * s1 {
            continue;
        }
        let left: Vec<f64> = u.column(k).iter().copied().collect();
        let right: Vec<f64> = vt.row(k).iter().copied().collect();
        let upper = truncated_wedges(&unpack_skew(&left, nv), tau_wedge);
        let lower = truncated_wedges(&unpack_skew(&right, no), tau_wedge);
        for (lk, xk, yk) in &upper {
            for (le, xe, ye) in &lower {
                ladders.push(RankOneLadder {
                    kind: LadderKind::PairExcitation {
                        upper: PairFactor { orbitals: virt.clone(), x: xk.map(c), y: yk.map(c) },
                        lower: PairFactor { orbitals: occ.clone(), x: xe.map(c), y: ye.map(c) },
                    },
                    coefficient: s * lk * le,
                    address: 0,
                });
            }
        }
    }
    GeneratorPool::new(n, ladders)
}

fn truncated_wedges(m: &RMat, tau: f64) -> Vec<(f64, DVector<f64>, DVector<f64>)> {
    let all = wedge_decomposition(m);
    let top = all.first().map_or(0.0, |w| w.0);
    all.into_iter().filter(|w| w.0 >= tau * top).collect()
}

/// `Σ ω U ⊗ V` back on the pair matrix.
pub fn reconstruct_t2(pool: &GeneratorPool, n_occ: usize, n_virt: usize) -> T2Tensor {
    let mut t = T2Tensor::zeros(n_occ, n_virt);
    for l in &pool.ladders {
        if let LadderKind::PairExcitation { upper, lower } = &l.kind {
            let wu = upper.wedge_matrix();
            let wv = lower.wedge_matrix();
            for (ab, (a, b)) in pair_list(n_virt).into_iter().enumerate() {
                for (ij, (i, j)) in pair_list(n_occ).into_iter().enumerate() {
                    t.amplitudes[(ab, ij)] += l.coefficient * (wu[(a, b)] * wv[(i, j)].conj()).re;
                }
            }
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::fermion::sector_indices;
    use crate::integrals::synth_instance;
    use crate::linalg::{spectral_norm, submatrix};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag_instance(h: &[f64]) -> IntegralSet {
        let n = h.len();
        IntegralSet {
            n_spatial: n / 2,
            n_so: n,
            n_elec: 0,
            e_nn: 0.0,
            h: RMat::from_diagonal(&DVector::from_column_slice(h)),
            eri: vec![0.0; n.pow(4)],
            orb_energies: None,
        }
    }

    #[test]
    fn zero_tensor_gives_no_channels() {
        let ints = diag_instance(&[0.1, 0.2]);
        assert!(pivoted_cholesky(&ints, 1e-8).unwrap().is_empty());
    }

    #[test]
    fn rank_one_supermatrix_gives_one_channel() {
        let g = RMat::from_row_slice(2, 2, &[0.6, 0.2, 0.2, -0.3]);
        let h = RMat::zeros(2, 2);
        let mut chem = vec![0.0; 16];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        chem[((i * 2 + j) * 2 + k) * 2 + l] = g[(i, j)] * g[(k, l)];
                    }
                }
            }
        }
        let ints = IntegralSet::from_spatial(2, 2, 0.0, &h, &chem, None).unwrap();
        let chans = pivoted_cholesky(&ints, 1e-12).unwrap();
        assert_eq!(chans.len(), 1);
        assert!(cholesky_reconstruction_error(&ints, &chans) < 1e-14);
        let f = &chans[0].factor;
        // L_so = ±g ⊗ I₂
        let sign = f[(0, 0)].signum() * g[(0, 0)].signum();
        assert!((f[(0, 2)] - sign * g[(0, 1)]).abs() < 1e-14);
        assert_eq!(f[(0, 1)], 0.0);
    }

    #[test]
    fn cholesky_tau_zero_is_exact() {
        let ints = synth_instance(7, 3, 2).unwrap();
        let chans = pivoted_cholesky(&ints, 0.0).unwrap();
        assert!(cholesky_reconstruction_error(&ints, &chans) <= 1e-12);
    }

    #[test]
    fn cholesky_tolerance_bound() {
        let ints = synth_instance(3, 3, 2).unwrap();
        let chans = pivoted_cholesky(&ints, 1e-8).unwrap();
        assert!(cholesky_reconstruction_error(&ints, &chans) <= 1e-8);
        assert!(chans.len() <= 6);
    }

    #[test]
    fn negative_diagonal_is_rejected() {
        let mut ints = diag_instance(&[0.0, 0.0]);
        ints.eri[0] = -1.0;
        assert!(matches!(pivoted_cholesky(&ints, 1e-8), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn identity_channel() {
        let ch = channel_eigendecomp(&CholeskyChannel::new(0, RMat::identity(2, 2)), 0.0);
        assert_eq!(ch.eigvals, vec![1.0, 1.0]);
        assert_eq!(ch.rank(), 2);
        assert_eq!(ch.gamma, 2.0);
    }

    #[test]
    fn channel_cutoff() {
        let f = RMat::from_diagonal(&DVector::from_column_slice(&[1.0, 1e-6]));
        let ch = channel_eigendecomp(&CholeskyChannel::new(0, f), 1e-4);
        assert_eq!(ch.rank(), 1);
        assert_eq!(ch.gamma, 1.0);
    }

    #[test]
    fn channel_reconstructs_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = RMat::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let f = (&a + a.transpose()) * 0.5;
        let ch = channel_eigendecomp(&CholeskyChannel::new(0, f.clone()), 0.0);
        assert!((ch.reconstruct() - f).amax() < 1e-12);
        assert!(ch.eigvals.windows(2).all(|w| w[0].abs() >= w[1].abs()));
    }

    #[test]
    fn diagonal_one_body_pool() {
        let ints = diag_instance(&[-1.0, 2.0]);
        let pool = build_hamiltonian_pool(&ints, 1e-8, 0.0, 0.0).unwrap();
        assert_eq!((pool.r1(), pool.k(), pool.ell_h), (2, 0, 2));
        assert!((pool.alpha - 3.0).abs() < 1e-15);
    }

    #[test]
    fn pool_rebuild_matches_integrals() {
        let ints = synth_instance(5, 3, 2).unwrap();
        let tau = 1e-8;
        let pool = build_hamiltonian_pool(&ints, tau, 0.0, 0.0).unwrap();
        let direct = ints.hamiltonian(false).unwrap().matrix;
        let err = spectral_norm(&(pool.dense() - direct));
        assert!(err <= 10.0 * tau * (ints.n_so * ints.n_so) as f64, "{err}");
    }

    #[test]
    fn mp2_zero_interaction() {
        let h = RMat::from_diagonal(&DVector::from_column_slice(&[-1.0, 1.0]));
        let ints = IntegralSet::from_spatial(2, 2, 0.0, &h, &[0.0; 16], None).unwrap();
        let (t2, e) = mp2_amplitudes(&ints).unwrap();
        assert!(t2.is_zero());
        assert_eq!(e, 0.0);
    }

    #[test]
    fn mp2_single_term() {
        // one occupied pair, one virtual pair, <ij||ab> = 0.2, gap −2
        let n = 4;
        let mut ints = diag_instance(&[-1.0, -1.0, 0.0, 0.0]);
        ints.n_elec = 2;
        let mut put = |p: usize, q: usize, r: usize, s: usize, v: f64| {
            for (a, b, c2, d) in [(p, q, r, s), (q, p, s, r), (r, s, p, q), (s, r, q, p)] {
                ints.eri[((a * n + b) * n + c2) * n + d] = v;
            }
        };
        put(0, 1, 2, 3, 0.2);
        ints.orb_energies = Some(vec![-1.0, -1.0, 0.0, 0.0]);
        let (t2, e) = mp2_amplitudes(&ints).unwrap();
        assert!((t2.get(0, 1, 0, 1) + 0.1).abs() < 1e-15);
        assert!((t2.get(1, 0, 0, 1) - 0.1).abs() < 1e-15);
        assert!((e + 0.02).abs() < 1e-15);
    }

    #[test]
    fn mp2_degenerate_gap() {
        let mut ints = diag_instance(&[0.0; 4]);
        ints.n_elec = 2;
        ints.orb_energies = Some(vec![0.0; 4]);
        assert!(matches!(mp2_amplitudes(&ints), Err(Error::DegenerateGap { .. })));
    }

    /// Second-order Rayleigh–Schrödinger energy with the diagonal Fock
    /// operator as `H₀`, summed over the whole particle sector.
    fn dense_rs2(ints: &IntegralSet) -> f64 {
        let n = ints.n_so;
        let ham = ints.hamiltonian(false).unwrap().matrix;
        let eps = ints.orbital_energies();
        let idx = sector_indices(n, ints.n_elec);
        let h = submatrix(&ham, &idx, &idx);
        let e0 = |x: usize| (0..n).filter(|p| x >> p & 1 == 1).map(|p| eps[p]).sum::<f64>();
        let reference = (1usize << ints.n_elec) - 1;
        let r = idx.iter().position(|&x| x == reference).unwrap();
        let mut e2 = 0.0;
        for (k, &x) in idx.iter().enumerate() {
            if k != r {
                e2 += h[(k, r)].norm_sqr() / (e0(reference) - e0(x));
            }
        }
        e2
    }

    #[test]
    fn mp2_matches_dense_perturbation_series() {
        let ints = synth_instance(2, 3, 2).unwrap();
        let (_, e) = mp2_amplitudes(&ints).unwrap();
        let oracle = dense_rs2(&ints);
        assert!((e - oracle).abs() < 1e-10 * (1.0 + oracle.abs()), "{e} vs {oracle}");
    }

    #[test]
    fn empty_pool_from_zero_tensor() {
        let pool = nested_svd_t2(&T2Tensor::zeros(2, 2), 1e-6, 1e-6);
        assert_eq!(pool.ell_sigma, 0);
        assert_eq!(pool.alpha_bar, 0.0);
    }

    #[test]
    fn single_amplitude_is_rank_one() {
        let mut t2 = T2Tensor::zeros(3, 4);
        t2.set(1, 3, 0, 2, 0.3);
        let pool = nested_svd_t2(&t2, 1e-6, 1e-6);
        assert_eq!(pool.ell_sigma, 1);
        assert!((pool.ladders[0].coefficient - 0.3).abs() < 1e-14);
        assert!((reconstruct_t2(&pool, 3, 4).amplitudes - t2.amplitudes).amax() < 1e-14);
    }

    fn random_t2(seed: u64, no: usize, nv: usize) -> T2Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t2 = T2Tensor::zeros(no, nv);
        t2.amplitudes = RMat::from_fn(pairs(nv), pairs(no), |_, _| rng.gen_range(-1.0..1.0));
        t2
    }

    #[test]
    fn nested_svd_reconstructs_random_tensor() {
        let t2 = random_t2(9, 4, 4);
        let pool = nested_svd_t2(&t2, 0.0, 0.0);
        let back = reconstruct_t2(&pool, 4, 4);
        assert!((back.amplitudes - &t2.amplitudes).norm() < 1e-10);
    }

    #[test]
    fn generator_pool_operator_matches_t2() {
        let t2 = random_t2(4, 2, 3);
        let pool = nested_svd_t2(&t2, 0.0, 0.0);
        let mut dense = CMat::zeros(32, 32);
        for l in &pool.ladders {
            dense += l.operator(5) * c(l.coefficient);
        }
        assert!(crate::linalg::max_abs(&(dense - t2.operator())) < 1e-12);
    }

    #[test]
    fn unit_pair_norm() {
        let t2 = random_t2(2, 3, 4);
        for l in nested_svd_t2(&t2, 0.0, 0.0).ladders {
            assert!((l.dyad_alpha() - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn cholesky_count_is_monotone(seed in 0u64..1000, e1 in 2i32..10, gap in 1i32..4) {
            let ints = synth_instance(seed, 3, 2).unwrap();
            let small = 10f64.powi(-e1 - gap);
            let large = 10f64.powi(-e1);
            let k_small = pivoted_cholesky(&ints, small).unwrap().len();
            let k_large = pivoted_cholesky(&ints, large).unwrap().len();
            prop_assert!(k_small >= k_large);
        }

        #[test]
        fn nested_svd_exact_without_truncation(seed in 0u64..1000, no in 2usize..5, nv in 2usize..5) {
            let t2 = random_t2(seed, no, nv);
            let pool = nested_svd_t2(&t2, 0.0, 0.0);
            let back = reconstruct_t2(&pool, no, nv);
            prop_assert!((back.amplitudes - &t2.amplitudes).norm() < 1e-10);
        }

        #[test]
        fn wedges_are_antisymmetric(seed in 0u64..1000) {
            let t2 = random_t2(seed, 3, 4);
            for l in nested_svd_t2(&t2, 0.0, 0.0).ladders {
                if let LadderKind::PairExcitation { upper, lower } = &l.kind {
                    for w in [upper.wedge_matrix(), lower.wedge_matrix()] {
                        prop_assert_eq!(&w, &(-w.transpose()));
                    }
                }
            }
        }

        #[test]
        fn pool_rebuild_within_truncation(seed in 0u64..1000) {
            let ints = synth_instance(seed, 2, 2).unwrap();
            let pool = build_hamiltonian_pool(&ints, 1e-8, 0.0, 0.0).unwrap();
            let direct = ints.hamiltonian(false).unwrap().matrix;
            prop_assert!(spectral_norm(&(pool.dense() - direct)) <= 10.0 * 1e-8 * 16.0);
        }
    }
}
