//! Dense block encodings built directly from the proof constructions.
//!
//! Register layout everywhere: system modes occupy the low `n` bits of a
//! basis index and ancillas sit above them, so the all-ancilla-zero block
//! is the top-left `2^n × 2^n` corner of a unitary.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // method resolution without std
use num_traits::Float;

use crate::circuit::Mask;
use crate::error::{Error, Result};
use crate::factorization::{CholeskyChannel, GeneratorPool, HamiltonianPool, LadderKind, RankOneLadder};
use crate::fermion::{check_qubits, one_body_operator, sector_indices, sector_leakage, FockOperator, MAX_QUBITS};
use crate::ladders::{
    complete_basis, default_pivot, gates_unitary, inverse_gates, one_electron_angles, two_electron_angles, BasisRotation,
    Gate, LadderSchedule,
};
use crate::linalg::{
    c, ceil_log2, cis, identity, kron, pair_list, spectral_norm, submatrix, to_complex, unitarity_defect, CMat, CVec, C64,
    I, ONE, ZERO,
};

/// A unitary whose ancilla-zero block encodes an operator divided by `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub unitary: CMat,
    pub n: usize,
    pub ancillas: usize,
    pub alpha: f64,
}

impl Encoding {
    pub fn block(&self) -> CMat {
        let d = 1usize << self.n;
        self.unitary.view((0, 0), (d, d)).into_owned()
    }

    /// Identity on the system with `X` on the lowest ancilla: block zero.
    pub fn null(n: usize, ancillas: usize) -> Self {
        let t = ancillas.max(1);
        let dim = 1usize << (n + t);
        let unitary = CMat::from_fn(dim, dim, |i, j| if i == j ^ (1 << n) { ONE } else { ZERO });
        Self { unitary, n, ancillas: t, alpha: 1.0 }
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.unitary)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockEncodingReport {
    pub alpha: f64,
    pub ancillas: usize,
    pub measured_error: f64,
    /// Particle number the error is restricted to; `None` means the full space.
    pub sector: Option<usize>,
    pub model_space: Option<Vec<usize>>,
    /// Largest entry of the block coupling different particle numbers.
    pub leakage: f64,
    pub flags: Vec<String>,
}

/// `‖Π [block − target/α] Π‖` with `Π` the sector projector, or the given
/// list of determinants (which must lie in the sector).
pub fn restricted_error(
    block: &CMat,
    target: &CMat,
    alpha: f64,
    n: usize,
    sector: Option<usize>,
    model_space: Option<&[usize]>,
) -> Result<f64> {
    let dim = 1usize << n;
    if block.nrows() != dim || block.ncols() != dim || target.nrows() != dim || target.ncols() != dim {
        return Err(Error::Shape(alloc::format!("block and target must be {dim}x{dim}")));
    }
    let idx: Vec<usize> = match (model_space, sector) {
        (Some(ms), sec) => {
            if let Some(&bad) = ms.iter().find(|&&x| x >= dim || sec.is_some_and(|ne| x.count_ones() as usize != ne)) {
                return Err(Error::Sector(bad));
            }
            ms.to_vec()
        }
        (None, Some(ne)) => sector_indices(n, ne),
        (None, None) => (0..dim).collect(),
    };
    let diff = submatrix(block, &idx, &idx) - submatrix(target, &idx, &idx) * c(1.0 / alpha);
    Ok(spectral_norm(&diff))
}

/// Restricted error of the ancilla-zero block of `w` against `target/α`.
pub fn restricted_block_error(
    w: &CMat,
    target: &FockOperator,
    alpha: f64,
    ancillas: usize,
    sector: Option<usize>,
    projector: Option<&[usize]>,
) -> Result<f64> {
    let n = target.n;
    let dim = 1usize << (n + ancillas);
    if w.nrows() != dim || w.ncols() != dim {
        return Err(Error::Shape(alloc::format!("unitary is {}x{}, expected {dim}x{dim}", w.nrows(), w.ncols())));
    }
    let d = 1usize << n;
    restricted_error(&w.view((0, 0), (d, d)).into_owned(), &target.matrix, alpha, n, sector, projector)
}

/// `R₀ = I − 2|0⟩⟨0|`.
pub fn vacuum_reflection(n: usize) -> CMat {
    let dim = 1usize << n;
    CMat::from_fn(dim, dim, |i, j| if i != j { ZERO } else if i == 0 { -ONE } else { ONE })
}

/// `(H⊗I)(|0⟩⟨0|⊗I + |1⟩⟨1|⊗(−R₀))(H⊗I)`, ancilla on the top bit.
pub fn pi0_gadget(n: usize) -> CMat {
    let h = CMat::from_row_slice(2, 2, &[ONE, ONE, ONE, -ONE]) * c(core::f64::consts::FRAC_1_SQRT_2);
    let dim = 1usize << n;
    let mut mid = CMat::zeros(2 * dim, 2 * dim);
    mid.view_mut((0, 0), (dim, dim)).copy_from(&identity(dim));
    mid.view_mut((dim, dim), (dim, dim)).copy_from(&(-vacuum_reflection(n)));
    let hh = kron(&h, &identity(dim));
    &hh * mid * &hh
}

fn two_by_two(a: &CMat, b: &CMat, cc: &CMat, d: &CMat) -> CMat {
    let k = a.nrows();
    let mut out = CMat::zeros(2 * k, 2 * k);
    out.view_mut((0, 0), (k, k)).copy_from(a);
    out.view_mut((0, k), (k, k)).copy_from(b);
    out.view_mut((k, 0), (k, k)).copy_from(cc);
    out.view_mut((k, k), (k, k)).copy_from(d);
    out
}

/// `(I⊗U_u) U_{Π₀} (I⊗U_v†)` for two preparation gate lists, times a
/// global phase. Block `e^{iγ} U_u|0⟩⟨0|U_v†`.
pub fn dyad_from_gates(u_prep: &[Gate], v_prep: &[Gate], n: usize, gauge: f64) -> Encoding {
    let uu = gates_unitary(u_prep, n);
    let uv = gates_unitary(v_prep, n);
    let a = uu.column(0) * uv.column(0).adjoint();
    let b = &uu * uv.adjoint() - &a;
    let z = cis(gauge);
    Encoding { unitary: two_by_two(&a, &b, &b, &a) * z, n, ancillas: 1, alpha: 1.0 }
}

fn arg(z: C64) -> f64 {
    if z == ZERO {
        0.0
    } else {
        z.arg()
    }
}

/// Phase correcting the two pivot gauges, `arg u_r − arg v_r'`.
pub fn dyad_gauge(u: &CVec, u_pivot: usize, v: &CVec, v_pivot: usize) -> f64 {
    arg(u[u_pivot]) - arg(v[v_pivot])
}

fn unit(v: &CVec) -> (CVec, f64) {
    let nv = v.norm();
    if nv == 0.0 {
        (v.clone(), 0.0)
    } else {
        (v / c(nv), nv)
    }
}

/// Preparation schedule of a one- or two-electron amplitude vector.
pub fn prep_schedule(n: usize, amplitudes: &CVec, pivot: Option<&[usize]>) -> Result<LadderSchedule> {
    if amplitudes.len() == n {
        let r = pivot.map_or_else(|| default_pivot(amplitudes), |p| p[0]);
        one_electron_angles(amplitudes, r)
    } else {
        let list = pair_list(n);
        let rs = match pivot {
            Some(p) if p.len() == 2 => (p[0], p[1]),
            _ => list[default_pivot(amplitudes)],
        };
        two_electron_angles(n, amplitudes, rs)
    }
}

pub fn pivot_position(n: usize, amplitudes: &CVec, sched: &LadderSchedule) -> usize {
    if amplitudes.len() == n {
        sched.pivot[0]
    } else {
        crate::linalg::pair_index(sched.pivot[0], sched.pivot[1], n)
    }
}

/// Single-ancilla encoding of `|u⟩⟨v|` over the one- or two-electron
/// sector (chosen by vector length), with pivots forced or defaulted.
pub fn dyad_encoding(n: usize, u: &CVec, v: &CVec, pivots: Option<(&[usize], &[usize])>) -> Result<Encoding> {
    let (uu, nu) = unit(u);
    let (vv, nv) = unit(v);
    let su = prep_schedule(n, &uu, pivots.map(|p| p.0))?;
    let sv = prep_schedule(n, &vv, pivots.map(|p| p.1))?;
    let gauge = dyad_gauge(&uu, pivot_position(n, &uu, &su), &vv, pivot_position(n, &vv, &sv));
    let mut enc = dyad_from_gates(&su.gates(), &sv.gates(), n, gauge);
    enc.alpha = nu * nv;
    Ok(enc)
}

/// Single-ancilla dyad encoding of `λ |u⟩⟨v|` on the one-excitation sector.
pub fn dyad_block_encoding(u: &CVec, v: &CVec, lam: f64, n: usize) -> Result<(Encoding, BlockEncodingReport)> {
    check_qubits(n + 1)?;
    for w in [u, v] {
        let norm = w.norm();
        if (norm - 1.0).abs() > 1e-10 || w.len() != n {
            return Err(Error::Normalization { norm });
        }
    }
    let mut enc = dyad_encoding(n, u, v, None)?;
    let mut flags = Vec::new();
    let alpha = if lam > 0.0 {
        lam
    } else {
        flags.push("DegenerateCoefficient".into());
        1.0
    };
    enc.alpha = alpha;
    let target = one_body_operator(n, &(u * v.adjoint())) * c(lam);
    let block = enc.block();
    let measured_error = restricted_error(&block, &target, alpha, n, Some(1), None)?;
    let report = BlockEncodingReport {
        alpha,
        ancillas: 1,
        measured_error,
        sector: Some(1),
        model_space: None,
        leakage: sector_leakage(&block, n),
        flags,
    };
    Ok((enc, report))
}

/// Encoding of a ladder `L̂` (or `L̂†`) with dyad semantics: exact on the
/// one-electron sector for bilinears and the two-electron sector for pairs.
pub fn ladder_dyad(ladder: &RankOneLadder, n: usize, adjoint: bool, pivots: Option<(&[usize], &[usize])>) -> Result<Encoding> {
    let (u, v) = match &ladder.kind {
        LadderKind::Bilinear { u, v } => (u.clone(), v.clone()),
        LadderKind::PairExcitation { upper, lower } => (upper.pair_vector(n), lower.pair_vector(n)),
        LadderKind::ProjectedQuadratic { .. } => {
            return Err(Error::Validation("projected quadratics are encoded as channels".into()))
        }
    };
    if adjoint {
        dyad_encoding(n, &v, &u, pivots.map(|(a, b)| (b, a)))
    } else {
        dyad_encoding(n, &u, &v, pivots)
    }
}

/// `X_f · CNOT_{mode→f}` with the flag on the top bit: block `n̂_mode`.
pub fn flag_gadget(n: usize, mode: usize) -> CMat {
    let dim = 1usize << n;
    let occ = CMat::from_fn(dim, dim, |i, j| if i == j && i >> mode & 1 == 1 { ONE } else { ZERO });
    let empty = identity(dim) - &occ;
    two_by_two(&occ, &empty, &empty, &occ)
}

/// `U (X_f CNOT_{r→f}) U†` for a number-conserving ladder `U`; block
/// `U n̂_r U†`, exact on every particle sector.
pub fn occupation_encoding_from_gates(nc_gates: &[Gate], pivot: usize, n: usize) -> Encoding {
    let u = gates_unitary(nc_gates, n);
    let dim = 1usize << n;
    let col = |j: usize| if j >> pivot & 1 == 1 { ONE } else { ZERO };
    let occ = CMat::from_fn(dim, dim, |i, j| col(j) * u[(i, j)]) * u.adjoint();
    let empty = identity(dim) - &occ;
    Encoding { unitary: two_by_two(&occ, &empty, &empty, &occ), n, ancillas: 1, alpha: 1.0 }
}

/// Encoding of `n̂_u = Σ u_p u*_q a†_p a_q` for a unit vector `u`.
pub fn occupation_encoding(u: &CVec, pivot: Option<usize>, n: usize) -> Result<Encoding> {
    let r = pivot.unwrap_or_else(|| default_pivot(u));
    let sched = one_electron_angles(u, r)?.with_prep_form(false);
    Ok(occupation_encoding_from_gates(&sched.gates(), r, n))
}

/// `R_y` tree angles loading nonnegative `amps` on `width` qubits. Level
/// `ℓ` rotates bit `width−1−ℓ`, multiplexed on the higher bits; entry
/// `[ℓ][prefix]`.
pub fn prep_tree_angles(amps: &[f64], width: usize) -> Vec<Vec<f64>> {
    let size = 1usize << width;
    let mut w2 = vec![0.0; size];
    for (k, a) in amps.iter().enumerate().take(size) {
        w2[k] = a * a;
    }
    let mut out = Vec::with_capacity(width);
    for level in 0..width {
        let span = size >> level;
        let half = span / 2;
        let row = (0..1usize << level)
            .map(|prefix| {
                let base = prefix * span;
                let w0: f64 = w2[base..base + half].iter().sum();
                let w1: f64 = w2[base + half..base + span].iter().sum();
                2.0 * w1.sqrt().atan2(w0.sqrt())
            })
            .collect();
        out.push(row);
    }
    out
}

fn apply_tree(angles: &[Vec<f64>], width: usize, v: &mut [C64], inverse: bool) {
    let levels: Vec<usize> = if inverse { (0..width).rev().collect() } else { (0..width).collect() };
    for level in levels {
        let bit = width - 1 - level;
        for x in 0..v.len() {
            if x >> bit & 1 == 1 {
                continue;
            }
            let prefix = x >> (bit + 1);
            let theta = if inverse { -angles[level][prefix] } else { angles[level][prefix] };
            let (s, co) = (theta / 2.0).sin_cos();
            let y = x | (1 << bit);
            let (a, b) = (v[x], v[y]);
            v[x] = a * co - b * s;
            v[y] = a * s + b * co;
        }
    }
}

pub fn prep_tree_unitary(angles: &[Vec<f64>], width: usize) -> CMat {
    let size = 1usize << width;
    let mut m = identity(size);
    for j in 0..size {
        let mut col: Vec<C64> = m.column(j).iter().copied().collect();
        apply_tree(angles, width, &mut col, false);
        m.set_column(j, &CVec::from_vec(col));
    }
    m
}

/// Operator on a bit field `[offset, offset + width)` of a wider register.
fn apply_local(m: &CMat, offset: usize, width: usize, v: &mut [C64]) {
    let size = 1usize << width;
    let field = (size - 1) << offset;
    let mut buf = vec![ZERO; size];
    for base in 0..v.len() {
        if base & field != 0 {
            continue;
        }
        for k in 0..size {
            buf[k] = v[base | (k << offset)];
        }
        for i in 0..size {
            let mut acc = ZERO;
            for k in 0..size {
                acc += m[(i, k)] * buf[k];
            }
            v[base | (i << offset)] = acc;
        }
    }
}

/// Parts of a linear channel encoding `R̂ (PREP† SEL PREP) R̂†`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParts {
    pub n: usize,
    pub index_width: usize,
    /// Basis-change gates `R̂` mapping mode `ξ` onto eigenvector `ξ`.
    pub rotation: Vec<Gate>,
    pub prep_angles: Vec<Vec<f64>>,
    /// `sign λ_ξ` for the used index values.
    pub signs: Vec<f64>,
    pub gamma: f64,
}

impl ChannelParts {
    pub fn from_channel(ch: &CholeskyChannel, n: usize) -> Self {
        let r = ch.rank();
        let w = ceil_log2(r);
        let full = complete_basis(&to_complex(&ch.rotation));
        let rotation = BasisRotation::from_unitary(&full).gates;
        let amps: Vec<f64> = ch.eigvals.iter().map(|l| (l.abs() / ch.gamma).sqrt()).collect();
        let signs = ch.eigvals.iter().map(|l| if *l < 0.0 { -1.0 } else { 1.0 }).collect();
        Self { n, index_width: w, rotation, prep_angles: prep_tree_angles(&amps, w), signs, gamma: ch.gamma }
    }

    /// Flag on bit `n`, index register on bits `n+1 …`.
    pub fn linear(&self) -> Encoding {
        let n = self.n;
        let w = self.index_width;
        let dim = 1usize << (n + 1 + w);
        let inv = inverse_gates(&self.rotation);
        let prep = prep_tree_unitary(&self.prep_angles, w);
        let prep_dag = prep.adjoint();
        let mut m = identity(dim);
        for j in 0..dim {
            let mut v: Vec<C64> = m.column(j).iter().copied().collect();
            for g in &inv {
                g.apply(&mut v);
            }
            apply_local(&prep, n + 1, w, &mut v);
            let mut sel = vec![ZERO; dim];
            for (x, amp) in v.iter().enumerate() {
                let idx = x >> (n + 1);
                let y = if idx < self.signs.len() && x >> idx & 1 == 0 { x ^ (1 << n) } else { x };
                let s = self.signs.get(idx).copied().unwrap_or(1.0);
                sel[y] += amp * s;
            }
            apply_local(&prep_dag, n + 1, w, &mut sel);
            for g in &self.rotation {
                g.apply(&mut sel);
            }
            m.set_column(j, &CVec::from_vec(sel));
        }
        Encoding { unitary: m, n, ancillas: w + 1, alpha: self.gamma }
    }
}

/// `(H_g)(|0⟩⟨0|⊗U R U + |1⟩⟨1|⊗I)(H_g)` with `R = 2|0⟩⟨0| − I` on the
/// inner ancillas. For a Hermitian `U` with block `B` the new block is
/// `½(2B² − I) + ½I = B²`.
pub fn square_encoding(lin: &Encoding) -> Encoding {
    let d = lin.unitary.nrows();
    let sys = 1usize << lin.n;
    let m = &lin.unitary;
    let mut rm = m.clone();
    for i in sys..d {
        for j in 0..d {
            rm[(i, j)] = -rm[(i, j)];
        }
    }
    let a = m * rm;
    let id = identity(d);
    let half = c(0.5);
    let plus = (&a + &id) * half;
    let minus = (&a - &id) * half;
    Encoding {
        unitary: two_by_two(&plus, &minus, &minus, &plus),
        n: lin.n,
        ancillas: lin.ancillas + 1,
        alpha: lin.alpha * lin.alpha,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEncoding {
    pub parts: ChannelParts,
    pub linear: Encoding,
    pub squared: Encoding,
}

/// Channel encoding of `Ô_μ/Γ_μ` and of its square `Ô_μ²/Γ_μ²`.
pub fn channel_block_encoding(ch: &CholeskyChannel, n: usize) -> Result<(ChannelEncoding, BlockEncodingReport)> {
    if ch.rank() == 0 {
        return Err(Error::Validation(alloc::format!("channel {} has no retained modes", ch.index)));
    }
    let parts = ChannelParts::from_channel(ch, n);
    check_qubits(n + parts.index_width + 2)?;
    let linear = parts.linear();
    let squared = square_encoding(&linear);
    let o = ch.operator(n);
    let lin_err = restricted_error(&linear.block(), &o, ch.gamma, n, None, None)?;
    let sq_err = restricted_error(&squared.block(), &(&o * &o), ch.gamma * ch.gamma, n, None, None)?;
    let mut flags = Vec::new();
    if lin_err > 1e-11 {
        flags.push(alloc::format!("linear block error {lin_err:e}"));
    }
    let report = BlockEncodingReport {
        alpha: squared.alpha,
        ancillas: squared.ancillas,
        measured_error: sq_err.max(lin_err),
        sector: None,
        model_space: None,
        leakage: sector_leakage(&squared.unitary, n),
        flags,
    };
    Ok((ChannelEncoding { parts, linear, squared }, report))
}

/// One branch of a multiplexer: `weight = |Ω_s| α_s` and a unit phase.
#[derive(Debug, Clone, PartialEq)]
pub struct LcuTerm {
    pub address: usize,
    pub weight: f64,
    pub phase: C64,
    pub encoding: Encoding,
}

impl LcuTerm {
    pub fn signed(address: usize, omega: f64, encoding: Encoding) -> Self {
        let phase = if omega < 0.0 { -ONE } else { ONE };
        Self { address, weight: omega.abs() * encoding.alpha, phase, encoding }
    }
}

/// `(PREP†⊗I) Σ_s |s⟩⟨s| ⊗ e^{iφ_s} W_s (PREP⊗I)` over a shared workspace.
#[derive(Debug, Clone, PartialEq)]
pub struct LcuEncoding {
    pub n: usize,
    pub selector_width: usize,
    pub workspace: usize,
    pub prep_amplitudes: Vec<f64>,
    pub prep_angles: Vec<Vec<f64>>,
    pub terms: Vec<LcuTerm>,
    pub alpha: f64,
}

impl LcuEncoding {
    pub fn new(n: usize, selector_width: usize, terms: Vec<LcuTerm>) -> Result<Self> {
        let capacity = 1usize << selector_width;
        if terms.len() > capacity || terms.iter().any(|t| t.address >= capacity) {
            return Err(Error::Capacity { branches: terms.len().max(terms.iter().map(|t| t.address + 1).max().unwrap_or(0)), capacity });
        }
        let mut seen = vec![false; capacity];
        for t in &terms {
            if core::mem::replace(&mut seen[t.address], true) {
                return Err(Error::Validation(alloc::format!("address {} used twice", t.address)));
            }
            if t.encoding.n != n {
                return Err(Error::Shape("branch system width differs".into()));
            }
        }
        let workspace = terms.iter().map(|t| t.encoding.ancillas).max().unwrap_or(0);
        let total: f64 = terms.iter().map(|t| t.weight).sum();
        let mut amps = vec![0.0; capacity];
        let alpha = if total > 0.0 {
            for t in &terms {
                amps[t.address] = (t.weight / total).sqrt();
            }
            total
        } else {
            amps[terms.first().map_or(0, |t| t.address)] = 1.0;
            1.0
        };
        let prep_angles = prep_tree_angles(&amps, selector_width);
        Ok(Self { n, selector_width, workspace, prep_amplitudes: amps, prep_angles, terms, alpha })
    }

    /// Multiplexer with PREP given by bound tree angles; weights follow
    /// from the loaded amplitudes and the supplied normalization.
    pub fn from_prep(n: usize, selector_width: usize, prep_angles: Vec<Vec<f64>>, branches: Vec<(usize, C64, Encoding)>, alpha: f64) -> Result<Self> {
        let size = 1usize << selector_width;
        let mut col = vec![ZERO; size];
        col[0] = ONE;
        apply_tree(&prep_angles, selector_width, &mut col, false);
        let prep_amplitudes: Vec<f64> = col.iter().map(|z| z.re).collect();
        if let Some(b) = branches.iter().find(|b| b.0 >= size || b.2.n != n) {
            return Err(Error::Capacity { branches: b.0 + 1, capacity: size });
        }
        let workspace = branches.iter().map(|b| b.2.ancillas).max().unwrap_or(0);
        let terms = branches
            .into_iter()
            .map(|(address, phase, encoding)| LcuTerm { address, weight: prep_amplitudes[address].powi(2) * alpha, phase, encoding })
            .collect();
        Ok(Self { n, selector_width, workspace, prep_amplitudes, prep_angles, terms, alpha })
    }

    pub fn ancillas(&self) -> usize {
        self.selector_width + self.workspace
    }

    /// `Σ_s p_s² e^{iφ_s} B_s`, assembled without the full unitary.
    pub fn block(&self) -> CMat {
        let d = 1usize << self.n;
        let mut out = CMat::zeros(d, d);
        for t in &self.terms {
            let p2 = self.prep_amplitudes[t.address].powi(2);
            if p2 > 0.0 {
                out += t.encoding.block() * (t.phase * p2);
            }
        }
        out
    }

    /// Branch unitary padded to the shared workspace, `I ⊗ W_s`.
    fn padded(&self, t: &LcuTerm) -> CMat {
        let extra = self.workspace - t.encoding.ancillas;
        if extra == 0 {
            t.encoding.unitary.clone()
        } else {
            kron(&identity(1 << extra), &t.encoding.unitary)
        }
    }

    pub fn prep_unitary(&self) -> CMat {
        prep_tree_unitary(&self.prep_angles, self.selector_width)
    }

    /// Full dense unitary; refused beyond the dense register limit.
    pub fn unitary(&self) -> Result<CMat> {
        check_qubits(self.n + self.ancillas())?;
        let p = self.prep_unitary();
        let sel = 1usize << self.selector_width;
        let inner = 1usize << (self.n + self.workspace);
        let branches: Vec<(usize, CMat)> = self.terms.iter().map(|t| (t.address, self.padded(t) * t.phase)).collect();
        let used: Vec<bool> = (0..sel).map(|s| self.terms.iter().any(|t| t.address == s)).collect();
        let mut w = CMat::zeros(sel * inner, sel * inner);
        for a in 0..sel {
            for b in 0..sel {
                let mut blk = CMat::zeros(inner, inner);
                for (s, ws) in &branches {
                    let coef = p[(*s, a)].conj() * p[(*s, b)];
                    if coef != ZERO {
                        blk += ws * coef;
                    }
                }
                let idle: C64 = (0..sel).filter(|&s| !used[s]).map(|s| p[(s, a)].conj() * p[(s, b)]).sum();
                if idle != ZERO {
                    for k in 0..inner {
                        blk[(k, k)] += idle;
                    }
                }
                w.view_mut((a * inner, b * inner), (inner, inner)).copy_from(&blk);
            }
        }
        Ok(w)
    }

    pub fn encoding(&self) -> Result<Encoding> {
        Ok(Encoding { unitary: self.unitary()?, n: self.n, ancillas: self.ancillas(), alpha: self.alpha })
    }

    /// Unitarity defect checked on the PREP and every branch.
    pub fn component_defect(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.encoding.unitarity_defect())
            .fold(unitarity_defect(&self.prep_unitary()), f64::max)
    }

    /// Multiplexer bound `(1/α) Σ |Ω_s| α_s ε_s` from per-branch errors.
    pub fn error_bound(&self, branch_errors: &[f64]) -> f64 {
        self.terms.iter().zip(branch_errors).map(|(t, e)| t.weight * e).sum::<f64>() / self.alpha
    }
}

/// Selector-multiplexed encoding of a list of `(Ω_s, W_s)` branches at
/// addresses `0, 1, …`.
pub fn lcu_multiplex(branches: Vec<(f64, Encoding)>, selector_width: usize) -> Result<LcuEncoding> {
    let n = branches.first().map_or(0, |b| b.1.n);
    let terms = branches.into_iter().enumerate().map(|(s, (omega, enc))| LcuTerm::signed(s, omega, enc)).collect();
    LcuEncoding::new(n, selector_width, terms)
}

/// Pivots forced on every adaptor of the Hamiltonian pool (one entry per
/// one-body mode).
pub fn hamiltonian_encoding_with(pool: &HamiltonianPool, selector_width: usize, one_body_pivots: Option<&[usize]>) -> Result<LcuEncoding> {
    let n = pool.n_so;
    let mut terms = Vec::with_capacity(pool.ell_h);
    for (s, l) in pool.one_body.iter().enumerate() {
        let LadderKind::Bilinear { u, .. } = &l.kind else {
            return Err(Error::Validation("one-body terms must be bilinear".into()));
        };
        let enc = occupation_encoding(u, one_body_pivots.map(|p| p[s]), n)?;
        terms.push(LcuTerm::signed(s, l.coefficient, enc));
    }
    let r1 = pool.one_body.len();
    for (mu, ch) in pool.channels.iter().enumerate() {
        let enc = if ch.rank() == 0 {
            Encoding::null(n, 1)
        } else {
            channel_block_encoding(ch, n)?.0.squared
        };
        let weight = 0.5 * ch.gamma * ch.gamma;
        terms.push(LcuTerm { address: r1 + mu, weight, phase: ONE, encoding: enc });
    }
    LcuEncoding::new(n, selector_width, terms)
}

pub fn hamiltonian_encoding(pool: &HamiltonianPool) -> Result<LcuEncoding> {
    hamiltonian_encoding_with(pool, ceil_log2(pool.ell_h), None)
}

/// Sub-LCU of `W_L` (phase `i`) and `W_{L†}` (phase `−i`): block
/// `𝔸̂_s / (2α_s)`.
pub fn generator_branch(ladder: &RankOneLadder, n: usize, pivots: Option<(&[usize], &[usize])>) -> Result<Encoding> {
    let wl = ladder_dyad(ladder, n, false, pivots)?;
    let wd = ladder_dyad(ladder, n, true, pivots)?;
    let a = wl.alpha;
    let terms = vec![
        LcuTerm { address: 0, weight: a, phase: I, encoding: wl },
        LcuTerm { address: 1, weight: a, phase: -I, encoding: wd },
    ];
    let sub = LcuEncoding::new(n, 1, terms)?;
    let mut enc = sub.encoding()?;
    enc.alpha = 2.0 * a;
    Ok(enc)
}

/// Particle sector on which the generator ladders are encoded exactly.
pub fn generator_sector(pool: &GeneratorPool) -> Option<usize> {
    let pair = pool.ladders.iter().any(|l| matches!(l.kind, LadderKind::PairExcitation { .. }));
    let single = pool.ladders.iter().any(|l| matches!(l.kind, LadderKind::Bilinear { .. }));
    match (pair, single) {
        (true, false) => Some(2),
        (false, true) => Some(1),
        _ => None,
    }
}

/// Masked PREP weights: `2|ω_s|α_s` inside the mask, zero outside, and the
/// remainder of the global `ᾱ′` on the null branch at address 0.
pub fn masked_terms(pool: &GeneratorPool, mask: &Mask, branches: Vec<Encoding>) -> Result<Vec<LcuTerm>> {
    mask.validate(pool.ell_sigma)?;
    let n = pool.n_so;
    let t = branches.iter().map(|e| e.ancillas).max().unwrap_or(1);
    let mut used = 0.0;
    let mut terms = Vec::with_capacity(pool.ell_sigma + 1);
    for (l, enc) in pool.ladders.iter().zip(branches) {
        let weight = if mask.contains(l.address) { 2.0 * l.coefficient.abs() * enc.alpha / 2.0 } else { 0.0 };
        used += weight;
        let phase = if l.coefficient < 0.0 { -ONE } else { ONE };
        terms.push(LcuTerm { address: l.address, weight, phase, encoding: enc });
    }
    let null_weight = if pool.alpha_bar > 0.0 { (pool.alpha_bar - used).max(0.0) } else { 1.0 };
    terms.insert(0, LcuTerm { address: 0, weight: null_weight, phase: ONE, encoding: Encoding::null(n, t) });
    Ok(terms)
}

/// Masked generator `Σ_{s∈m} ω_s 𝔸̂_s / ᾱ′` with the global `ᾱ′`.
pub fn generator_block_encoding(pool: &GeneratorPool, mask: &Mask, selector_width: Option<usize>) -> Result<(LcuEncoding, BlockEncodingReport)> {
    if pool.ell_sigma == 0 && !mask.indices.is_empty() {
        return Err(Error::Mask("mask over an empty generator pool".into()));
    }
    let n = pool.n_so;
    let branches = pool.ladders.iter().map(|l| generator_branch(l, n, None)).collect::<Result<Vec<_>>>()?;
    let width = selector_width.unwrap_or_else(|| ceil_log2(pool.ell_sigma + 1));
    let lcu = LcuEncoding::new(n, width, masked_terms(pool, mask, branches)?)?;
    let report = generator_report(pool, mask, &lcu)?;
    Ok((lcu, report))
}

pub fn generator_report(pool: &GeneratorPool, mask: &Mask, lcu: &LcuEncoding) -> Result<BlockEncodingReport> {
    let n = pool.n_so;
    let addresses: Vec<usize> = mask.indices.iter().copied().collect();
    let target = pool.hermitian_sigma(&addresses);
    let block = lcu.block();
    let sector = generator_sector(pool);
    let alpha = if pool.alpha_bar > 0.0 { pool.alpha_bar } else { 1.0 };
    let mut flags = Vec::new();
    if (lcu.alpha - alpha).abs() > 1e-12 * alpha {
        flags.push(alloc::format!("multiplexer normalization {} differs from alpha_bar {}", lcu.alpha, alpha));
    }
    Ok(BlockEncodingReport {
        alpha: pool.alpha_bar,
        ancillas: lcu.ancillas(),
        measured_error: restricted_error(&block, &target, alpha, n, sector, None)?,
        sector,
        model_space: None,
        leakage: sector_leakage(&block, n),
        flags,
    })
}

/// Report of a Hamiltonian multiplexer against a dense target.
pub fn hamiltonian_report(lcu: &LcuEncoding, target: &CMat, sector: Option<usize>) -> Result<BlockEncodingReport> {
    let block = lcu.block();
    Ok(BlockEncodingReport {
        alpha: lcu.alpha,
        ancillas: lcu.ancillas(),
        measured_error: restricted_error(&block, target, lcu.alpha, lcu.n, sector, None)?,
        sector,
        model_space: None,
        leakage: sector_leakage(&block, lcu.n),
        flags: Vec::new(),
    })
}

/// Largest total register a full dense LCU unitary may use.
pub const DENSE_LIMIT: usize = MAX_QUBITS;
