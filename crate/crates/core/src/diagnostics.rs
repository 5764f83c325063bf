//! Overlap metrics between doubles tensors, MP2-weighted masks and
//! one-particle density-matrix drift.

use alloc::vec::Vec;

#[allow(unused_imports)] // method resolution without std
use num_traits::Float;

use crate::circuit::Mask;
use crate::error::{Error, Result};
use crate::factorization::{GeneratorPool, T2Tensor};
use crate::fermion::{apply_string, check_qubits, Ladder};
use crate::linalg::{expm_antihermitian, CMat, CVec, RMat, ZERO};

/// Which overlap of leading singular structure to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapVariant {
    /// Vectorized dyads `b_k = vec(u_k v_kᵀ)`.
    #[default]
    Dyad,
    /// Left singular projectors only.
    LeftProjector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapCurve {
    pub ranks: Vec<usize>,
    pub ov: Vec<f64>,
    pub weights: Vec<f64>,
    pub wauc: f64,
    pub r_eps: usize,
}

struct Svd {
    s: Vec<f64>,
    u: RMat,
    v: RMat,
}

/// Descending SVD keeping singular values above `1e-12·s₁`.
fn svd(m: &RMat) -> Svd {
    let dec = m.clone().svd(true, true);
    let u = dec.u.expect("left vectors");
    let v = dec.v_t.expect("right vectors").transpose();
    let mut order: Vec<usize> = (0..dec.singular_values.len()).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    let s1 = order.first().map_or(0.0, |&k| dec.singular_values[k]);
    let kept: Vec<usize> = order.into_iter().filter(|&k| s1 > 0.0 && dec.singular_values[k] > 1e-12 * s1).collect();
    Svd {
        s: kept.iter().map(|&k| dec.singular_values[k]).collect(),
        u: RMat::from_fn(m.nrows(), kept.len(), |i, j| u[(i, kept[j])]),
        v: RMat::from_fn(m.ncols(), kept.len(), |i, j| v[(i, kept[j])]),
    }
}

/// Columns `vec(u_k v_kᵀ)` for `k < r`.
pub fn dyad_basis(u: &RMat, v: &RMat, r: usize) -> RMat {
    let (p, q) = (u.nrows(), v.nrows());
    RMat::from_fn(p * q, r, |idx, k| u[(idx / q, k)] * v[(idx % q, k)])
}

fn overlap_from(a: &Svd, b: &Svd, r: usize, variant: OverlapVariant) -> Result<f64> {
    let rb = r.min(b.s.len());
    let m = match variant {
        OverlapVariant::Dyad => {
            let ba = dyad_basis(&a.u, &a.v, r);
            let bb = dyad_basis(&b.u, &b.v, rb);
            let gram = ba.transpose() * &ba;
            let defect = (gram - RMat::identity(r, r)).amax();
            if defect > 1e-10 {
                return Err(Error::Validation(alloc::format!("dyad basis not orthonormal ({defect:e})")));
            }
            ba.transpose() * bb
        }
        OverlapVariant::LeftProjector => a.u.columns(0, r).transpose() * b.u.columns(0, rb),
    };
    Ok(m.norm_squared() / r as f64)
}

/// `ov(r) = (1/r) ‖B_rᵀ B̃_r‖_F²` for two matrices of equal shape.
pub fn subspace_overlap_mat(a: &RMat, b: &RMat, r: usize) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(alloc::format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let (sa, sb) = (svd(a), svd(b));
    let rank = sa.s.len().min(sb.s.len());
    if r == 0 || r > rank {
        return Err(Error::Rank { rank, requested: r });
    }
    overlap_from(&sa, &sb, r, OverlapVariant::Dyad)
}

pub fn subspace_overlap(ta: &T2Tensor, tb: &T2Tensor, r: usize) -> Result<f64> {
    subspace_overlap_mat(&ta.amplitudes, &tb.amplitudes, r)
}

/// `Σ_r w_r ov(r)` with `w_r = s_r² / Σ s_k²` from the first argument and
/// `R` the number of `s_r / s₁ ≥ ε_s`.
pub fn wauc_mat(a: &RMat, b: &RMat, eps_s: f64, variant: OverlapVariant) -> Result<OverlapCurve> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(alloc::format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let (sa, sb) = (svd(a), svd(b));
    if sa.s.is_empty() || sb.s.is_empty() {
        return Err(Error::ZeroTensor);
    }
    let r_eps = sa.s.iter().take_while(|&&s| s / sa.s[0] >= eps_s).count();
    let total: f64 = sa.s[..r_eps].iter().map(|s| s * s).sum();
    let weights: Vec<f64> = sa.s[..r_eps].iter().map(|s| s * s / total).collect();
    let ranks: Vec<usize> = (1..=r_eps).collect();
    let ov = ranks.iter().map(|&r| overlap_from(&sa, &sb, r, variant)).collect::<Result<Vec<_>>>()?;
    let wauc = weights.iter().zip(&ov).map(|(w, o)| w * o).sum();
    Ok(OverlapCurve { ranks, ov, weights, wauc, r_eps })
}

pub fn wauc(ta: &T2Tensor, tb: &T2Tensor, eps_s: f64) -> Result<OverlapCurve> {
    wauc_mat(&ta.amplitudes, &tb.amplitudes, eps_s, OverlapVariant::Dyad)
}

/// `w_s = |ω_s|² ‖U‖² ‖V‖²` per ladder, in address order.
pub fn ladder_weights(gen: &GeneratorPool) -> Vec<f64> {
    gen.ladders.iter().map(|l| (l.coefficient * l.dyad_alpha()).powi(2)).collect()
}

/// Smallest weight-sorted prefix reaching coverage `η`; returns the mask
/// and its coverage.
pub fn one_shot_mask(gen: &GeneratorPool, eta: f64) -> Result<(Mask, f64)> {
    if gen.ladders.is_empty() {
        return Err(Error::Mask("empty generator pool".into()));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Validation(alloc::format!("coverage target {eta} outside (0, 1]")));
    }
    let w = ladder_weights(gen);
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Ok((Mask::new(alloc::format!("eta={eta}"), gen.all_addresses()), 1.0));
    }
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(gen.ladders[a].address.cmp(&gen.ladders[b].address)));
    let mut acc = 0.0;
    let mut chosen = Vec::new();
    for k in order {
        acc += w[k];
        chosen.push(gen.ladders[k].address);
        if acc / total >= eta * (1.0 - 1e-12) {
            break;
        }
    }
    Ok((Mask::new(alloc::format!("eta={eta}"), chosen), acc / total))
}

/// Coverage of a mask under the MP2 ladder weights.
pub fn coverage(gen: &GeneratorPool, mask: &Mask) -> f64 {
    let w = ladder_weights(gen);
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return 1.0;
    }
    gen.ladders.iter().zip(&w).filter(|(l, _)| mask.contains(l.address)).map(|(_, x)| x).sum::<f64>() / total
}

/// `D_pq = ⟨ψ| a†_p a_q |ψ⟩`.
pub fn one_rdm(state: &CVec, n: usize) -> CMat {
    let mut d = CMat::zeros(n, n);
    for (bits, amp) in state.iter().enumerate() {
        if *amp == ZERO {
            continue;
        }
        for p in 0..n {
            for q in 0..n {
                if let Some((sign, out)) = apply_string(&[Ladder::Create(p), Ladder::Annihilate(q)], bits) {
                    d[(p, q)] += state[out].conj() * amp * sign;
                }
            }
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    pub occ: f64,
    pub vir: f64,
    pub trace_old: f64,
    pub trace_new: f64,
}

fn block_rdm(gen: &GeneratorPool, mask: &Mask, reference: &CVec, n: usize) -> CMat {
    let addresses: Vec<usize> = mask.indices.iter().copied().collect();
    let psi = expm_antihermitian(&gen.anti_hermitian_sigma(&addresses)) * reference;
    one_rdm(&psi, n)
}

fn rel(new: &CMat, old: &CMat) -> f64 {
    let den = old.norm();
    let num = (new - old).norm();
    // an empty reference block falls back to the absolute drift
    if den > 1e-14 {
        num / den
    } else {
        num
    }
}

/// Relative Frobenius drift of the occupied and virtual RDM blocks of
/// `e^{σ̂} |ref⟩` between two pools. Occupied modes are those set in the
/// reference's leading determinant.
pub fn density_matrix_drift(gen_old: &GeneratorPool, gen_new: &GeneratorPool, mask: &Mask, reference: &CVec, n: usize) -> Result<Drift> {
    check_qubits(n)?;
    if reference.len() != 1 << n {
        return Err(Error::Shape(alloc::format!("reference has {} amplitudes for {n} modes", reference.len())));
    }
    let norm = reference.norm();
    if norm == 0.0 {
        return Err(Error::Validation("reference state has zero norm".into()));
    }
    mask.validate(gen_old.ell_sigma)?;
    mask.validate(gen_new.ell_sigma)?;
    let reference = reference / crate::linalg::c(norm);
    let lead = reference.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).map_or(0, |x| x.0);
    let occ: Vec<usize> = (0..n).filter(|&p| lead >> p & 1 == 1).collect();
    let vir: Vec<usize> = (0..n).filter(|&p| lead >> p & 1 == 0).collect();
    let d_old = block_rdm(gen_old, mask, &reference, n);
    let d_new = block_rdm(gen_new, mask, &reference, n);
    let sub = |d: &CMat, idx: &[usize]| crate::linalg::submatrix(d, idx, idx);
    Ok(Drift {
        occ: rel(&sub(&d_new, &occ), &sub(&d_old, &occ)),
        vir: rel(&sub(&d_new, &vir), &sub(&d_old, &vir)),
        trace_old: d_old.trace().re,
        trace_new: d_new.trace().re,
    })
}

/// `tr D^occ + tr D^vir` split by the same convention as the drift.
pub fn block_traces(gen: &GeneratorPool, mask: &Mask, reference: &CVec, n: usize, occupied: &[usize]) -> (f64, f64) {
    let d = block_rdm(gen, mask, reference, n);
    let mut to = 0.0;
    let mut tv = 0.0;
    for p in 0..n {
        if occupied.contains(&p) {
            to += d[(p, p)].re;
        } else {
            tv += d[(p, p)].re;
        }
    }
    (to, tv)
}

/// `(1/r) Σ cos² θ_j` from the singular values of `B_rᵀ B̃_r`.
pub fn principal_angle_overlap(ba: &RMat, bb: &RMat) -> f64 {
    let m = ba.transpose() * bb;
    let s = m.singular_values();
    s.iter().map(|x| x * x).sum::<f64>() / ba.ncols() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::factorization::{mp2_amplitudes, nested_svd_t2, LadderKind, RankOneLadder};
    use crate::fermion::basis_state;
    use crate::integrals::synth_instance;
    use crate::linalg::c;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian(rng: &mut ChaCha8Rng, r: usize, cols: usize) -> RMat {
        // Box–Muller keeps the singular vectors Haar distributed
        RMat::from_fn(r, cols, |_, _| {
            let (u1, u2): (f64, f64) = (rng.gen_range(1e-12..1.0), rng.gen_range(0.0..1.0));
            (-2.0 * u1.ln()).sqrt() * (2.0 * core::f64::consts::PI * u2).cos()
        })
    }

    #[test]
    fn self_overlap_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = gaussian(&mut rng, 6, 3);
        for r in 1..=3 {
            assert!((subspace_overlap_mat(&a, &a, r).unwrap() - 1.0).abs() < 1e-12);
        }
        let curve = wauc_mat(&a, &a, 0.0, OverlapVariant::Dyad).unwrap();
        assert!((curve.wauc - 1.0).abs() < 1e-12);
        assert!((curve.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_leading_dyads() {
        let mut a = RMat::zeros(3, 3);
        a[(0, 0)] = 1.0;
        let mut b = RMat::zeros(3, 3);
        b[(1, 1)] = 1.0;
        assert!(subspace_overlap_mat(&a, &b, 1).unwrap().abs() < 1e-15);
        assert!(wauc_mat(&a, &b, 1e-6, OverlapVariant::Dyad).unwrap().wauc.abs() < 1e-15);
    }

    #[test]
    fn matches_principal_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gaussian(&mut rng, 4, 3);
        let b = gaussian(&mut rng, 4, 3);
        let (sa, sb) = (svd(&a), svd(&b));
        for r in 1..=3 {
            let ba = dyad_basis(&sa.u, &sa.v, r);
            let bb = dyad_basis(&sb.u, &sb.v, r);
            let direct = principal_angle_overlap(&ba, &bb);
            assert!((subspace_overlap_mat(&a, &b, r).unwrap() - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let mut a = RMat::zeros(3, 3);
        a[(0, 0)] = 1.0;
        assert!(matches!(subspace_overlap_mat(&a, &a, 2), Err(Error::Rank { rank: 1, requested: 2 })));
        assert!(matches!(wauc_mat(&RMat::zeros(3, 3), &a, 0.1, OverlapVariant::Dyad), Err(Error::ZeroTensor)));
    }

    #[test]
    fn wauc_is_not_symmetric() {
        let mut a = RMat::zeros(3, 3);
        a[(0, 0)] = 1.0;
        a[(1, 1)] = 0.1;
        let mut b = RMat::zeros(3, 3);
        b[(1, 1)] = 1.0;
        b[(0, 0)] = 0.1;
        b[(2, 2)] = 0.05;
        let ab = wauc_mat(&a, &b, 1e-3, OverlapVariant::Dyad).unwrap().wauc;
        let ba = wauc_mat(&b, &a, 1e-3, OverlapVariant::Dyad).unwrap().wauc;
        assert!((ab - ba).abs() > 1e-3, "{ab} {ba}");
    }

    #[test]
    fn projector_variant_ignores_right_vectors() {
        let a = RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]);
        let b = RMat::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        let dy = wauc_mat(&a, &b, 0.9, OverlapVariant::Dyad).unwrap().wauc;
        let lp = wauc_mat(&a, &b, 0.9, OverlapVariant::LeftProjector).unwrap().wauc;
        assert!(dy.abs() < 1e-14);
        assert!((lp - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_subspace_baseline() {
        let trials = 100;
        for r in 1..=4 {
            let vals: Vec<f64> = (0..trials)
                .map(|seed| {
                    let mut rng = ChaCha8Rng::seed_from_u64(1000 * r as u64 + seed);
                    let a = gaussian(&mut rng, 5, 4);
                    let b = gaussian(&mut rng, 5, 4);
                    subspace_overlap_mat(&a, &b, r).unwrap()
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / trials as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
            let se = (var / trials as f64).sqrt();
            let expected = r as f64 / 20.0;
            assert!((mean - expected).abs() <= 3.0 * se, "r={r} mean={mean} se={se}");
        }
    }

    fn weighted_pool(omegas: &[f64]) -> GeneratorPool {
        let ladders = omegas
            .iter()
            .enumerate()
            .map(|(k, &w)| {
                let mut u = CVec::zeros(3);
                u[k % 3] = c(1.0);
                RankOneLadder { kind: LadderKind::Bilinear { u: u.clone(), v: u }, coefficient: w, address: 0 }
            })
            .collect();
        GeneratorPool::new(3, ladders)
    }

    #[test]
    fn full_coverage_takes_every_ladder() {
        let pool = weighted_pool(&[0.3, 0.1, 0.2]);
        let (m, cov) = one_shot_mask(&pool, 1.0).unwrap();
        assert_eq!(m.indices.len(), 3);
        assert!((cov - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prefix_of_sorted_weights() {
        let pool = weighted_pool(&[0.9f64.sqrt(), 0.09f64.sqrt(), 0.01f64.sqrt()]);
        let (m, cov) = one_shot_mask(&pool, 0.95).unwrap();
        assert_eq!(m.indices.iter().copied().collect::<Vec<_>>(), vec![1, 2]);
        assert!((cov - 0.99).abs() < 1e-12);
        assert!((coverage(&pool, &m) - cov).abs() < 1e-15);
    }

    #[test]
    fn ties_break_by_address() {
        let pool = weighted_pool(&[0.5, 0.5, 0.5]);
        let (m, _) = one_shot_mask(&pool, 0.3).unwrap();
        assert_eq!(m.indices.iter().copied().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn empty_pool_and_bad_eta() {
        assert!(matches!(one_shot_mask(&GeneratorPool::new(3, vec![]), 0.5), Err(Error::Mask(_))));
        let pool = weighted_pool(&[0.1]);
        assert!(one_shot_mask(&pool, 0.0).is_err());
        assert!(one_shot_mask(&pool, 1.5).is_err());
    }

    fn toy_generators(seed: u64) -> (GeneratorPool, CVec) {
        let ints = synth_instance(seed, 2, 2).unwrap();
        let (t2, _) = mp2_amplitudes(&ints).unwrap();
        (nested_svd_t2(&t2, 1e-9, 1e-9), basis_state(4, 0b0011))
    }

    #[test]
    fn identical_pools_do_not_drift() {
        let (gen, reference) = toy_generators(1);
        let d = density_matrix_drift(&gen, &gen, &Mask::full(gen.ell_sigma), &reference, 4).unwrap();
        assert_eq!((d.occ, d.vir), (0.0, 0.0));
    }

    #[test]
    fn zero_generator_rdm_is_reference() {
        let (gen, reference) = toy_generators(1);
        let d = one_rdm(&reference, 4);
        let occ = crate::linalg::submatrix(&d, &[0, 1], &[0, 1]);
        assert!((occ - crate::linalg::identity(2)).norm() < 1e-15);
        let (to, tv) = block_traces(&gen, &Mask::empty(), &reference, 4, &[0, 1]);
        assert_eq!((to, tv), (2.0, 0.0));
        assert!(density_matrix_drift(&gen, &gen, &Mask::empty(), &CVec::zeros(16), 4).is_err());
    }

    #[test]
    fn drift_is_linear_in_perturbation() {
        let (gen, reference) = toy_generators(2);
        let mask = Mask::full(gen.ell_sigma);
        let drifts: Vec<f64> = [1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&dw| {
                let mut g = gen.clone();
                g.ladders[0].coefficient += dw;
                density_matrix_drift(&gen, &g, &mask, &reference, 4).unwrap().occ
            })
            .collect();
        for w in drifts.windows(2) {
            let ratio = w[0] / w[1];
            assert!((9.0..11.0).contains(&ratio), "{drifts:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn trace_is_conserved(seed in 0u64..50, scale in -3.0f64..3.0) {
            let (mut gen, reference) = toy_generators(seed);
            for l in &mut gen.ladders {
                l.coefficient *= scale;
            }
            let (to, tv) = block_traces(&gen, &Mask::full(gen.ell_sigma), &reference, 4, &[0, 1]);
            prop_assert!((to + tv - 2.0).abs() <= 1e-10);
        }

        #[test]
        fn overlaps_stay_in_unit_interval(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = gaussian(&mut rng, 6, 4);
            let b = gaussian(&mut rng, 6, 4);
            let curve = wauc_mat(&a, &b, 1e-3, OverlapVariant::Dyad).unwrap();
            prop_assert!((curve.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(curve.ov.iter().all(|&o| (0.0..=1.0 + 1e-12).contains(&o)));
        }

        #[test]
        fn one_shot_mask_is_minimal(seed in 0u64..10_000, size in 1usize..=12, eta in 0.05f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let omegas: Vec<f64> = (0..size).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let pool = weighted_pool(&omegas);
            let (mask, cov) = one_shot_mask(&pool, eta).unwrap();
            prop_assert!((coverage(&pool, &mask) - cov).abs() <= 1e-12);
            prop_assert!(cov >= eta * (1.0 - 1e-12));
            let k = mask.indices.len();
            let w = ladder_weights(&pool);
            let total: f64 = w.iter().sum();
            for subset in 0u32..(1 << size) {
                if (subset.count_ones() as usize) < k {
                    let s: f64 = (0..size).filter(|b| subset >> b & 1 == 1).map(|b| w[b]).sum();
                    prop_assert!(s / total < eta * (1.0 - 1e-12));
                }
            }
        }
    }
}
