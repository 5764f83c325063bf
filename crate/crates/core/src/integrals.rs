//! The spin-orbital problem instance and its synthetic generator.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // method resolution without std
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fermion::{one_body_operator, two_body_operator, FockOperator};
use crate::linalg::{c, eigh_real, to_complex, RMat};

/// One- and two-electron integrals over interleaved spin orbitals
/// (spatial orbital `k` ↦ modes `2k` (α) and `2k+1` (β)).
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSet {
    pub n_spatial: usize,
    pub n_so: usize,
    pub n_elec: usize,
    pub e_nn: f64,
    /// One-body matrix `h_pq`, `n_so × n_so`.
    pub h: RMat,
    /// Physicists' `⟨pq|rs⟩`, flattened as `((p·n + q)·n + r)·n + s`.
    pub eri: Vec<f64>,
    pub orb_energies: Option<Vec<f64>>,
}

impl IntegralSet {
    /// Expand spatial integrals to spin orbitals. `chem` holds `(ij|kl)` over
    /// spatial indices, flattened like `eri`.
    pub fn from_spatial(
        n_spatial: usize,
        n_elec: usize,
        e_nn: f64,
        h_spatial: &RMat,
        chem: &[f64],
        orb_energies_spatial: Option<&[f64]>,
    ) -> Result<Self> {
        let m = n_spatial;
        if h_spatial.nrows() != m || h_spatial.ncols() != m || chem.len() != m * m * m * m {
            return Err(Error::Shape("spatial integral dimensions disagree with NORB".into()));
        }
        if n_elec > 2 * m {
            return Err(Error::Validation(alloc::format!("NELEC={n_elec} exceeds 2*NORB={}", 2 * m)));
        }
        let n = 2 * m;
        let h = RMat::from_fn(n, n, |p, q| if p % 2 == q % 2 { h_spatial[(p / 2, q / 2)] } else { 0.0 });
        let mut eri = vec![0.0; n * n * n * n];
        for p in 0..n {
            for q in 0..n {
                for r in (p % 2..n).step_by(2) {
                    for s in (q % 2..n).step_by(2) {
                        let (i, j, k, l) = (p / 2, r / 2, q / 2, s / 2);
                        eri[((p * n + q) * n + r) * n + s] = chem[((i * m + j) * m + k) * m + l];
                    }
                }
            }
        }
        let orb_energies = orb_energies_spatial.map(|e| (0..n).map(|p| e[p / 2]).collect());
        Ok(Self { n_spatial: m, n_so: n, n_elec, e_nn, h, eri, orb_energies })
    }

    #[inline]
    pub fn eri(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let n = self.n_so;
        self.eri[((p * n + q) * n + r) * n + s]
    }

    pub fn n_occ(&self) -> usize {
        self.n_elec
    }

    pub fn n_virt(&self) -> usize {
        self.n_so - self.n_elec
    }

    /// Spatial one-body block (α part).
    pub fn spatial_h(&self) -> RMat {
        RMat::from_fn(self.n_spatial, self.n_spatial, |i, j| self.h[(2 * i, 2 * j)])
    }

    /// Chemists' `(ij|kl)` over spatial indices.
    pub fn spatial_chem(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.eri(2 * i, 2 * k, 2 * j, 2 * l)
    }

    /// Check Hermiticity, the real-orbital index symmetries and the electron count.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_so;
        if n != 2 * self.n_spatial || self.h.nrows() != n || self.h.ncols() != n || self.eri.len() != n.pow(4) {
            return Err(Error::Shape("integral arrays do not match n_so".into()));
        }
        if self.n_elec > n {
            return Err(Error::Validation(alloc::format!("{} electrons in {n} spin orbitals", self.n_elec)));
        }
        for p in 0..n {
            for q in 0..n {
                if (self.h[(p, q)] - self.h[(q, p)]).abs() > 1e-12 {
                    return Err(Error::Validation(alloc::format!("h is not Hermitian at ({p},{q})")));
                }
            }
        }
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = self.eri(p, q, r, s);
                        if (v - self.eri(q, p, s, r)).abs() > 1e-10 || (v - self.eri(r, s, p, q)).abs() > 1e-10 {
                            return Err(Error::Validation(alloc::format!(
                                "two-electron symmetry broken at <{p}{q}|{r}{s}>"
                            )));
                        }
                    }
                }
            }
        }
        if let Some(e) = &self.orb_energies {
            if e.len() != n {
                return Err(Error::Shape("orbital energy count differs from n_so".into()));
            }
        }
        Ok(())
    }

    /// `M[(p,r),(q,s)] = ⟨pq|rs⟩`, rows indexed `p·n + r`.
    pub fn supermatrix(&self) -> RMat {
        let n = self.n_so;
        RMat::from_fn(n * n, n * n, |a, b| self.eri(a / n, b / n, a % n, b % n))
    }

    pub fn supermatrix_min_eigenvalue(&self) -> f64 {
        let (vals, _) = eigh_real(&self.supermatrix());
        vals.first().copied().unwrap_or(0.0)
    }

    /// Closed-shell Fock matrix with the lowest `n_elec` spin orbitals occupied.
    pub fn fock_matrix(&self) -> RMat {
        let n = self.n_so;
        RMat::from_fn(n, n, |p, q| {
            self.h[(p, q)]
                + (0..self.n_elec).map(|i| self.eri(p, i, q, i) - self.eri(p, i, i, q)).sum::<f64>()
        })
    }

    /// Supplied orbital energies, or the ascending Fock eigenvalues.
    pub fn orbital_energies(&self) -> Vec<f64> {
        match &self.orb_energies {
            Some(e) => e.clone(),
            None => eigh_real(&self.fock_matrix()).0,
        }
    }

    /// Nonzero `(p, q, r, s, ½⟨pq|rs⟩)` terms of the two-body operator.
    pub fn two_body_terms(&self) -> Vec<(usize, usize, usize, usize, crate::C64)> {
        let n = self.n_so;
        let mut terms = Vec::new();
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = self.eri(p, q, r, s);
                        if v != 0.0 {
                            terms.push((p, q, r, s, c(0.5 * v)));
                        }
                    }
                }
            }
        }
        terms
    }

    /// Dense `Σ h a†a + ½Σ⟨pq|rs⟩ a†_p a†_q a_s a_r` (plus `E_nn` on request).
    pub fn hamiltonian(&self, include_constant: bool) -> Result<FockOperator> {
        let n = self.n_so;
        let mut m = one_body_operator(n, &to_complex(&self.h)) + two_body_operator(n, &self.two_body_terms());
        if include_constant {
            for k in 0..m.nrows() {
                m[(k, k)] += c(self.e_nn);
            }
        }
        FockOperator::new(m, n, "hamiltonian")
    }
}

/// `h̃_pq = h_pq − ½ Σ_s ⟨pq|ss⟩`.
pub fn mean_field_shift(ints: &IntegralSet) -> RMat {
    let n = ints.n_so;
    RMat::from_fn(n, n, |p, q| ints.h[(p, q)] - 0.5 * (0..n).map(|s| ints.eri(p, q, s, s)).sum::<f64>())
}

fn uniform_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> RMat {
    let mut m = RMat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = scale * rng.gen_range(-1.0..=1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn coulomb_exchange(chem: &[f64], d: &RMat, n: usize) -> (RMat, RMat) {
    let idx = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
    let j = RMat::from_fn(n, n, |p, q| {
        let mut acc = 0.0;
        for r in 0..n {
            for s in 0..n {
                acc += chem[idx(p, q, r, s)] * d[(r, s)];
            }
        }
        acc
    });
    let k = RMat::from_fn(n, n, |p, q| {
        let mut acc = 0.0;
        for r in 0..n {
            for s in 0..n {
                acc += chem[idx(p, r, q, s)] * d[(r, s)];
            }
        }
        acc
    });
    (j, k)
}

fn occupied_density(c: &RMat, n_occ: usize) -> RMat {
    let occ = c.columns(0, n_occ);
    occ * occ.transpose()
}

/// Restricted Hartree–Fock in an orthonormal basis with a virtual level
/// shift. Returns orbitals (columns, occupied first) and their energies.
fn rhf(h: &RMat, chem: &[f64], n: usize, n_occ: usize) -> (RMat, Vec<f64>) {
    let fock = |d: &RMat| {
        let (j, k) = coulomb_exchange(chem, d, n);
        h + j * 2.0 - k
    };
    let (_, start) = eigh_real(h);
    let mut best: Option<(f64, RMat)> = None;
    for shift in [0.0, 0.25, 1.0, 4.0, 16.0] {
        let mut d = occupied_density(&start, n_occ);
        let mut residual = f64::INFINITY;
        for _ in 0..4000 {
            let f = fock(&d);
            let comm = &f * &d - &d * &f;
            residual = comm.amax();
            if residual < 1e-13 {
                break;
            }
            let virt = RMat::identity(n, n) - &d;
            let (_, coeffs) = eigh_real(&(f + virt * shift));
            d = occupied_density(&coeffs, n_occ);
        }
        let aufbau = {
            let (eps, _) = eigh_real(&fock(&d));
            let occ_sum: f64 = eps[..n_occ].iter().sum();
            (occ_sum - (fock(&d) * &d).trace()).abs() < 1e-9
        };
        if residual < 1e-13 && aufbau {
            best = Some((residual, d));
            break;
        }
        if best.as_ref().map_or(true, |(r, _)| residual < *r) {
            best = Some((residual, d));
        }
    }
    let (_, d) = best.unwrap();
    let f = fock(&d);
    // Canonicalize the occupied and virtual spaces separately.
    let (_, nat) = eigh_real(&d);
    let occ = nat.columns(n - n_occ, n_occ).into_owned();
    let virt = nat.columns(0, n - n_occ).into_owned();
    let mut coeffs = RMat::zeros(n, n);
    let mut eps = Vec::with_capacity(n);
    for (block, offset) in [(occ, 0), (virt, n_occ)] {
        let (e, u) = eigh_real(&(block.transpose() * &f * &block));
        coeffs.columns_mut(offset, block.ncols()).copy_from(&(&block * u));
        eps.extend(e);
    }
    (coeffs, eps)
}

fn rotate_chem(chem: &[f64], c: &RMat, n: usize) -> Vec<f64> {
    let idx = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
    let mut cur = chem.to_vec();
    for axis in 0..4 {
        let mut next = vec![0.0; cur.len()];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut acc = 0.0;
                        for x in 0..n {
                            let (src, coef) = match axis {
                                0 => (idx(x, j, k, l), c[(x, i)]),
                                1 => (idx(i, x, k, l), c[(x, j)]),
                                2 => (idx(i, j, x, l), c[(x, k)]),
                                _ => (idx(i, j, k, x), c[(x, l)]),
                            };
                            acc += coef * cur[src];
                        }
                        next[idx(i, j, k, l)] = acc;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// Deterministic random instance.
///
/// Raw one-body entries are uniform in `[−1, 1]`; the two-electron tensor is
/// `Σ_μ G^μ ⊗ G^μ` over `n_spatial` random symmetric factors, hence PSD. The
/// integrals are then expressed in converged restricted Hartree–Fock
/// orbitals so the Fock matrix of the lowest-`n_elec` determinant is
/// diagonal and its eigenvalues are the orbital energies. When no aufbau
/// solution is reached the converged one is kept, so an occupied energy may
/// lie above a virtual one.
pub fn synth_instance(seed: u64, n_spatial: usize, n_elec: usize) -> Result<IntegralSet> {
    if n_elec % 2 == 1 {
        return Err(Error::Validation(alloc::format!("n_elec = {n_elec} is odd")));
    }
    if n_spatial == 0 || n_spatial > 8 {
        return Err(Error::Validation(alloc::format!("n_spatial = {n_spatial} outside 1..=8")));
    }
    if n_elec > 2 * n_spatial {
        return Err(Error::Validation(alloc::format!("{n_elec} electrons in {n_spatial} spatial orbitals")));
    }
    let m = n_spatial;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_raw = uniform_symmetric(&mut rng, m, 1.0);
    let scale = 1.0 / (m as f64).sqrt();
    let factors: Vec<RMat> = (0..m).map(|_| uniform_symmetric(&mut rng, m, scale)).collect();
    let e_nn = rng.gen_range(0.0..1.0);
    let mut chem = vec![0.0; m * m * m * m];
    for g in &factors {
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        chem[((i * m + j) * m + k) * m + l] += g[(i, j)] * g[(k, l)];
                    }
                }
            }
        }
    }
    let (coeffs, eps) = rhf(&h_raw, &chem, m, n_elec / 2);
    let h_mo = coeffs.transpose() * &h_raw * &coeffs;
    let chem_mo = rotate_chem(&chem, &coeffs, m);
    IntegralSet::from_spatial(m, n_elec, e_nn, &h_mo, &chem_mo, Some(&eps))
}
