//! Masked similarity sandwiches, matrix-element extraction and a small
//! non-orthogonal subspace (generator-coordinate) solver.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // method resolution without std
use num_traits::Float;

use crate::circuit::Mask;
use crate::error::{Error, Result};
use crate::factorization::{GeneratorPool, HamiltonianPool};
use crate::fermion::{basis_state, one_body_operator, sector_indices};
use crate::integrals::{synth_instance, IntegralSet};
use crate::linalg::{c, eigh, expm_antihermitian, spectral_norm, submatrix, CMat, CVec, C64};
use crate::oracle::{generator_block_encoding, generator_sector, hamiltonian_encoding, restricted_error};
use crate::qsp::{exp_from_block, ChebyshevPoly};

/// Relative S-eigenvalue cutoff for canonical orthogonalization.
pub const S_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveHamiltonianReport {
    pub mask_id: String,
    pub alpha: f64,
    pub measured_error: f64,
    /// Exponential error `ε″` (counted twice in the budget).
    pub eps_exp: f64,
    /// Hamiltonian multiplexer error `ε`.
    pub eps_ham: f64,
    pub budget: f64,
    pub within_budget: bool,
    pub degree: usize,
    pub sector: usize,
    pub model_space: Vec<usize>,
    pub hermiticity_defect: f64,
}

/// Exact `e^{σ̂}` restricted to `idx`.
fn exact_exp(gen: &GeneratorPool, mask: &Mask, idx: &[usize]) -> CMat {
    let addresses: Vec<usize> = mask.indices.iter().copied().collect();
    expm_antihermitian(&submatrix(&gen.anti_hermitian_sigma(&addresses), idx, idx))
}

/// `P E† B_W E P` with `E = P_d(B_σ)` and `B_W` the Hamiltonian block, both
/// postselected on their ancillas, against `P e^{−σ̂} Ĥ e^{σ̂} P / α`.
/// Returns the report and the restricted block over the model space.
pub fn similarity_sandwich(
    ham: &HamiltonianPool,
    gen: &GeneratorPool,
    mask: &Mask,
    model_space: Option<&[usize]>,
    eps_poly: f64,
) -> Result<(EffectiveHamiltonianReport, CMat)> {
    let n = ham.n_so;
    if gen.n_so != n {
        return Err(Error::Shape("generator and Hamiltonian act on different registers".into()));
    }
    let ne = ham.n_elec;
    if gen.ell_sigma > 0 && generator_sector(gen) != Some(ne) {
        return Err(Error::Validation(alloc::format!(
            "generator ladders are encoded on {:?} electrons, the Hamiltonian on {ne}",
            generator_sector(gen)
        )));
    }
    let sector = sector_indices(n, ne);
    let p: Vec<usize> = match model_space {
        Some(ms) => {
            if let Some(&bad) = ms.iter().find(|&&x| x >= 1 << n || x.count_ones() as usize != ne) {
                return Err(Error::Sector(bad));
            }
            ms.to_vec()
        }
        None => sector.clone(),
    };
    // positions of the model space inside the sector
    let pos: Vec<usize> = p.iter().map(|x| sector.iter().position(|y| y == x).unwrap_or(0)).collect();

    let h_lcu = hamiltonian_encoding(ham)?;
    let alpha = h_lcu.alpha;
    let dense = ham.dense();
    let b_w = h_lcu.block();
    let eps_ham = restricted_error(&b_w, &dense, alpha, n, Some(ne), None)?;

    let (e_full, eps_exp, degree) = if gen.ell_sigma == 0 {
        (crate::linalg::identity(1 << n), 0.0, 0)
    } else {
        let (g_lcu, _) = generator_block_encoding(gen, mask, None)?;
        let poly = ChebyshevPoly::for_accuracy(gen.alpha_bar, eps_poly);
        let (op, rep) = exp_from_block(gen, mask, &g_lcu.block(), &poly, 0.0)?;
        (op.matrix, rep.measured_deviation, rep.degree)
    };
    let e = submatrix(&e_full, &sector, &sector);
    let bw = submatrix(&b_w, &sector, &sector);
    let eff = e.adjoint() * bw * &e;
    let x = exact_exp(gen, mask, &sector);
    let exact = x.adjoint() * submatrix(&dense, &sector, &sector) * &x * c(1.0 / alpha);
    let eff_p = submatrix(&eff, &pos, &pos);
    let exact_p = submatrix(&exact, &pos, &pos);
    let measured_error = spectral_norm(&(&eff_p - &exact_p));
    let budget = 2.0 * eps_exp + eps_ham;
    let report = EffectiveHamiltonianReport {
        mask_id: mask.label.clone(),
        alpha,
        measured_error,
        eps_exp,
        eps_ham,
        budget,
        within_budget: measured_error <= 1.1 * budget + ROUNDOFF,
        degree,
        sector: ne,
        model_space: p,
        hermiticity_defect: spectral_norm(&(&eff_p - eff_p.adjoint())),
    };
    Ok((report, eff_p))
}

/// Absolute floor for comparisons whose budget underflows double precision.
pub const ROUNDOFF: f64 = 1e-13;

/// `M_ij = ⟨bra_i| A |ket_j⟩`.
pub fn matrix_elements(block: &CMat, bras: &[CVec], kets: &[CVec]) -> Result<CMat> {
    let d = block.nrows();
    if block.ncols() != d || bras.iter().chain(kets).any(|v| v.len() != d) {
        return Err(Error::Shape(alloc::format!("states must have length {d}")));
    }
    Ok(CMat::from_fn(bras.len(), kets.len(), |i, j| bras[i].dotc(&(block * &kets[j]))))
}

/// Ascending generalized energies and coefficient vectors (columns) of
/// `H c = E S c` over the span of `basis`.
pub fn gcim_subspace_solve(h: &CMat, basis: &[CVec]) -> Result<(Vec<f64>, CMat)> {
    if basis.is_empty() {
        return Err(Error::DegenerateBasis);
    }
    let hm = matrix_elements(h, basis, basis)?;
    let s = matrix_elements(&crate::linalg::identity(h.nrows()), basis, basis)?;
    let (sv, vecs) = eigh(&s);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax <= 0.0 {
        return Err(Error::DegenerateBasis);
    }
    let keep: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] >= S_THRESHOLD * smax).collect();
    if keep.is_empty() {
        return Err(Error::DegenerateBasis);
    }
    let x = CMat::from_fn(basis.len(), keep.len(), |i, j| vecs[(i, keep[j])] / sv[keep[j]].sqrt());
    let hp = x.adjoint() * hm * &x;
    let hp = (&hp + hp.adjoint()) * c(0.5);
    let (e, y) = eigh(&hp);
    Ok((e, x * y))
}

/// Four spin orbitals, two electrons, two commuting single-excitation
/// rotations out of the reference `|1100⟩` (bits 0 and 1).
#[derive(Debug, Clone)]
pub struct GcimToy {
    pub ints: IntegralSet,
    pub h: CMat,
    pub phi0: CVec,
    pub sigma1: CMat,
    pub sigma2: CMat,
    /// `(eigenvalues, eigenvectors)` of `iσ₂`, for fast `e^{rσ₂}`.
    sigma2_eig: (Vec<f64>, CMat),
    e_sigma1: CMat,
}

pub const TOY_SEED: u64 = 5;
pub const TOY_THETA: f64 = 0.5;

fn excitation(n: usize, to: usize, from: usize, theta: f64) -> CMat {
    let mut m = CMat::zeros(n, n);
    m[(to, from)] = c(theta);
    m[(from, to)] = c(-theta);
    one_body_operator(n, &m)
}

impl GcimToy {
    pub fn new(seed: u64, theta: f64) -> Result<Self> {
        let ints = synth_instance(seed, 2, 2)?;
        let h = ints.hamiltonian(true)?.matrix;
        let phi0 = basis_state(4, 0b0011);
        let sigma1 = excitation(4, 2, 0, theta);
        let sigma2 = excitation(4, 3, 1, theta);
        let herm = &sigma2 * C64::new(0.0, 1.0);
        let sigma2_eig = eigh(&herm);
        let e_sigma1 = expm_antihermitian(&sigma1);
        Ok(Self { ints, h, phi0, sigma1, sigma2, sigma2_eig, e_sigma1 })
    }

    pub fn shipped() -> Self {
        Self::new(TOY_SEED, TOY_THETA).expect("toy instance is valid")
    }

    /// `e^{rσ₂}` from the cached decomposition of `iσ₂`.
    pub fn exp_sigma2(&self, r: f64) -> CMat {
        let (vals, vecs) = &self.sigma2_eig;
        let phases = CVec::from_iterator(vals.len(), vals.iter().map(|l| C64::new(0.0, -r * l).exp()));
        let mut scaled = vecs.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[j];
        }
        scaled * vecs.adjoint()
    }

    pub fn lowest(&self, basis: &[CVec]) -> Result<f64> {
        Ok(gcim_subspace_solve(&self.h, basis)?.0[0])
    }

    pub fn single_reference_energy(&self) -> f64 {
        self.phi0.dotc(&(&self.h * &self.phi0)).re
    }

    pub fn fixed_basis(&self) -> Vec<CVec> {
        vec![self.phi0.clone(), &self.e_sigma1 * &self.phi0, self.exp_sigma2(1.0) * &self.phi0]
    }

    pub fn three_state_energy(&self) -> Result<f64> {
        self.lowest(&self.fixed_basis())
    }

    /// Span `{Φ₀, e^{σ₂}Φ₀, e^{σ₁+rσ₂}Φ₀}`; the generators commute, so the
    /// last state is `e^{σ₁} e^{rσ₂} Φ₀`. At `r = 0` it equals the fixed span.
    pub fn swept_energy(&self, r: f64) -> Result<f64> {
        let third = &self.e_sigma1 * (self.exp_sigma2(r) * &self.phi0);
        self.lowest(&[self.phi0.clone(), self.exp_sigma2(1.0) * &self.phi0, third])
    }

    /// Coarse scan over `[lo, hi]` then golden-section refinement.
    pub fn swept_minimum(&self, lo: f64, hi: f64) -> Result<(f64, f64)> {
        let steps = 200;
        let h = (hi - lo) / steps as f64;
        let mut best = (lo, self.swept_energy(lo)?);
        for i in 1..=steps {
            let r = lo + h * i as f64;
            let e = self.swept_energy(r)?;
            if e < best.1 {
                best = (r, e);
            }
        }
        let (mut a, mut b) = ((best.0 - h).max(lo), (best.0 + h).min(hi));
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let mut f1 = self.swept_energy(x1)?;
        let mut f2 = self.swept_energy(x2)?;
        while b - a > 1e-9 {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = self.swept_energy(x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = self.swept_energy(x2)?;
            }
        }
        let r = 0.5 * (a + b);
        Ok((r, self.swept_energy(r)?.min(best.1)))
    }

    /// Exact ground energy in the two-electron sector.
    pub fn exact_sector_energy(&self) -> f64 {
        let idx = sector_indices(4, 2);
        eigh(&submatrix(&self.h, &idx, &idx)).0[0]
    }
}

/// Generalized-eigen matrix tables of the model-space block as plain rows.
pub fn table_rows(m: &CMat) -> Vec<Vec<(f64, f64)>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| (m[(i, j)].re, m[(i, j)].im)).collect()).collect()
}
