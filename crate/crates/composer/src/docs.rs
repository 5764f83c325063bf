//! Versioned JSON documents exchanged between pipeline stages.

use composer_core::circuit::{CircuitSkeleton, DialSheet, Mask};
use composer_core::diagnostics::OverlapCurve;
use composer_core::factorization::{
    CholeskyChannel, GeneratorPool, HamiltonianPool, LadderKind, PairFactor, RankOneLadder, T2Tensor,
};
use composer_core::integrals::IntegralSet;
use composer_core::linalg::CVec;
use composer_core::mask::EffectiveHamiltonianReport;
use composer_core::resources::ResourceEstimate;
use composer_core::{Error, RMat, Result, C64};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const INTS_V1: &str = "composer-ints-v1";
pub const POOL_V1: &str = "composer-pool-v1";
pub const SKEL_V1: &str = "composer-skel-v1";
pub const DIAL_V1: &str = "composer-dial-v1";
pub const REPORT_V1: &str = "composer-report-v1";
pub const T2_V1: &str = "composer-t2-v1";
pub const MASK_V1: &str = "composer-mask-v1";
pub const ESTIMATE_V1: &str = "composer-estimate-v1";

fn check_version(found: &str, expected: &str) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::Validation(format!("expected a {expected} document, found {found:?}")))
    }
}

pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
}

fn row_major(m: &RMat) -> Vec<f64> {
    (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect()
}

fn from_row_major(rows: usize, cols: usize, v: &[f64]) -> Result<RMat> {
    if v.len() != rows * cols {
        return Err(Error::Shape(format!("{} values for a {rows}x{cols} array", v.len())));
    }
    Ok(RMat::from_row_slice(rows, cols, v))
}

fn cvec_out(v: &CVec) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn cvec_in(v: &[[f64; 2]]) -> CVec {
    CVec::from_iterator(v.len(), v.iter().map(|z| C64::new(z[0], z[1])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntsDoc {
    pub version: String,
    pub n_spatial: usize,
    pub n_so: usize,
    pub n_elec: usize,
    pub e_nn: f64,
    /// `n_so × n_so`, row-major.
    pub h: Vec<f64>,
    /// `⟨pq|rs⟩`, row-major over `(p, q, r, s)`.
    pub eri: Vec<f64>,
    pub orb_energies: Option<Vec<f64>>,
}

impl IntsDoc {
    pub fn new(ints: &IntegralSet) -> Self {
        Self {
            version: INTS_V1.into(),
            n_spatial: ints.n_spatial,
            n_so: ints.n_so,
            n_elec: ints.n_elec,
            e_nn: ints.e_nn,
            h: row_major(&ints.h),
            eri: ints.eri.clone(),
            orb_energies: ints.orb_energies.clone(),
        }
    }

    pub fn into_ints(self) -> Result<IntegralSet> {
        check_version(&self.version, INTS_V1)?;
        let n = self.n_so;
        let ints = IntegralSet {
            n_spatial: self.n_spatial,
            n_so: n,
            n_elec: self.n_elec,
            e_nn: self.e_nn,
            h: from_row_major(n, n, &self.h)?,
            eri: self.eri,
            orb_energies: self.orb_energies,
        };
        ints.validate()?;
        Ok(ints)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDoc {
    pub orbitals: Vec<usize>,
    pub x: Vec<[f64; 2]>,
    pub y: Vec<[f64; 2]>,
}

impl PairDoc {
    fn new(p: &PairFactor) -> Self {
        Self { orbitals: p.orbitals.clone(), x: cvec_out(&p.x), y: cvec_out(&p.y) }
    }

    fn factor(&self) -> Result<PairFactor> {
        if self.x.len() != self.orbitals.len() || self.y.len() != self.orbitals.len() {
            return Err(Error::Shape("pair factor vectors must match its orbital list".into()));
        }
        Ok(PairFactor { orbitals: self.orbitals.clone(), x: cvec_in(&self.x), y: cvec_in(&self.y) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LadderDoc {
    Bilinear { address: usize, coefficient: f64, u: Vec<[f64; 2]>, v: Vec<[f64; 2]> },
    PairExcitation { address: usize, coefficient: f64, upper: PairDoc, lower: PairDoc },
}

impl LadderDoc {
    fn new(l: &RankOneLadder) -> Result<Self> {
        Ok(match &l.kind {
            LadderKind::Bilinear { u, v } => {
                LadderDoc::Bilinear { address: l.address, coefficient: l.coefficient, u: cvec_out(u), v: cvec_out(v) }
            }
            LadderKind::PairExcitation { upper, lower } => LadderDoc::PairExcitation {
                address: l.address,
                coefficient: l.coefficient,
                upper: PairDoc::new(upper),
                lower: PairDoc::new(lower),
            },
            LadderKind::ProjectedQuadratic { .. } => {
                return Err(Error::Validation("projected quadratics are stored as channels".into()))
            }
        })
    }

    fn ladder(&self) -> Result<RankOneLadder> {
        Ok(match self {
            LadderDoc::Bilinear { address, coefficient, u, v } => RankOneLadder {
                kind: LadderKind::Bilinear { u: cvec_in(u), v: cvec_in(v) },
                coefficient: *coefficient,
                address: *address,
            },
            LadderDoc::PairExcitation { address, coefficient, upper, lower } => RankOneLadder {
                kind: LadderKind::PairExcitation { upper: upper.factor()?, lower: lower.factor()? },
                coefficient: *coefficient,
                address: *address,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDoc {
    pub index: usize,
    pub factor: Vec<f64>,
    pub eigvals: Vec<f64>,
    /// `n_so × R_μ`, row-major.
    pub rotation: Vec<f64>,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolDoc {
    pub version: String,
    pub n_so: usize,
    pub n_elec: usize,
    pub e_nn: f64,
    pub ell_h: usize,
    pub ell_sigma: usize,
    pub alpha_h: f64,
    pub alpha_bar: f64,
    pub one_body: Vec<LadderDoc>,
    pub channels: Vec<ChannelDoc>,
    pub generator: Vec<LadderDoc>,
}

impl PoolDoc {
    pub fn new(ham: &HamiltonianPool, gen: &GeneratorPool) -> Result<Self> {
        Ok(Self {
            version: POOL_V1.into(),
            n_so: ham.n_so,
            n_elec: ham.n_elec,
            e_nn: ham.e_nn,
            ell_h: ham.ell_h,
            ell_sigma: gen.ell_sigma,
            alpha_h: ham.alpha,
            alpha_bar: gen.alpha_bar,
            one_body: ham.one_body.iter().map(LadderDoc::new).collect::<Result<_>>()?,
            channels: ham
                .channels
                .iter()
                .map(|ch| ChannelDoc {
                    index: ch.index,
                    factor: row_major(&ch.factor),
                    eigvals: ch.eigvals.clone(),
                    rotation: row_major(&ch.rotation),
                    gamma: ch.gamma,
                })
                .collect(),
            generator: gen.ladders.iter().map(LadderDoc::new).collect::<Result<_>>()?,
        })
    }

    /// Rebuilds both pools; derived normalizations are recomputed, not read.
    pub fn pools(&self) -> Result<(HamiltonianPool, GeneratorPool)> {
        check_version(&self.version, POOL_V1)?;
        let n = self.n_so;
        let one_body = self.one_body.iter().map(LadderDoc::ladder).collect::<Result<Vec<_>>>()?;
        if one_body.iter().any(|l| !matches!(l.kind, LadderKind::Bilinear { .. })) {
            return Err(Error::Validation("one-body ladders must be bilinear".into()));
        }
        let channels = self
            .channels
            .iter()
            .map(|c| {
                Ok(CholeskyChannel {
                    index: c.index,
                    factor: from_row_major(n, n, &c.factor)?,
                    rotation: from_row_major(n, c.eigvals.len(), &c.rotation)?,
                    eigvals: c.eigvals.clone(),
                    gamma: c.gamma,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ladders = self.generator.iter().map(LadderDoc::ladder).collect::<Result<Vec<_>>>()?;
        let ham = HamiltonianPool::new(n, self.n_elec, self.e_nn, one_body, channels);
        let gen = GeneratorPool::new(n, ladders);
        Ok((ham, gen))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkelDoc {
    pub version: String,
    pub skeleton: CircuitSkeleton,
}

impl SkelDoc {
    pub fn new(skeleton: CircuitSkeleton) -> Self {
        Self { version: SKEL_V1.into(), skeleton }
    }

    pub fn into_skeleton(self) -> Result<CircuitSkeleton> {
        check_version(&self.version, SKEL_V1)?;
        Ok(self.skeleton)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialDoc {
    pub version: String,
    pub dial: DialSheet,
}

impl DialDoc {
    pub fn new(dial: DialSheet) -> Self {
        Self { version: DIAL_V1.into(), dial }
    }

    pub fn into_sheet(self) -> Result<DialSheet> {
        check_version(&self.version, DIAL_V1)?;
        Ok(self.dial)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskDoc {
    pub version: String,
    pub mask: Mask,
    pub coverage: Option<f64>,
}

impl MaskDoc {
    pub fn new(mask: Mask, coverage: Option<f64>) -> Self {
        Self { version: MASK_V1.into(), mask, coverage }
    }

    pub fn into_mask(self) -> Result<Mask> {
        check_version(&self.version, MASK_V1)?;
        Ok(self.mask)
    }
}

/// One named pass/fail check inside a verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub version: String,
    pub skeleton_fingerprint: String,
    pub mask_id: String,
    pub alpha: f64,
    pub t: usize,
    pub sector: usize,
    pub degree: usize,
    pub measured_error: f64,
    pub eps_exp: f64,
    pub eps_ham: f64,
    pub budget: f64,
    pub hermiticity_defect: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl ReportDoc {
    pub fn new(fingerprint: &str, t: usize, rep: &EffectiveHamiltonianReport, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self {
            version: REPORT_V1.into(),
            skeleton_fingerprint: fingerprint.into(),
            mask_id: rep.mask_id.clone(),
            alpha: rep.alpha,
            t,
            sector: rep.sector,
            degree: rep.degree,
            measured_error: rep.measured_error,
            eps_exp: rep.eps_exp,
            eps_ham: rep.eps_ham,
            budget: rep.budget,
            hermiticity_defect: rep.hermiticity_defect,
            checks,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2Doc {
    pub version: String,
    pub n_occ: usize,
    pub n_virt: usize,
    pub shape: [usize; 2],
    pub convention: String,
    pub values: Vec<f64>,
}

const T2_CONVENTION: &str = "rows a<b over virtuals, columns i<j over occupieds, row-major";

impl T2Doc {
    pub fn new(t2: &T2Tensor) -> Self {
        Self {
            version: T2_V1.into(),
            n_occ: t2.n_occ,
            n_virt: t2.n_virt,
            shape: [t2.amplitudes.nrows(), t2.amplitudes.ncols()],
            convention: T2_CONVENTION.into(),
            values: row_major(&t2.amplitudes),
        }
    }

    pub fn tensor(&self) -> Result<T2Tensor> {
        check_version(&self.version, T2_V1)?;
        let mut t = T2Tensor::zeros(self.n_occ, self.n_virt);
        if [t.amplitudes.nrows(), t.amplitudes.ncols()] != self.shape {
            return Err(Error::Shape(format!("shape {:?} does not match {} occupied, {} virtual", self.shape, self.n_occ, self.n_virt)));
        }
        t.amplitudes = from_row_major(self.shape[0], self.shape[1], &self.values)?;
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDoc {
    pub version: String,
    pub skeleton_fingerprint: String,
    pub estimate: ResourceEstimate,
}

impl EstimateDoc {
    pub fn new(fingerprint: &str, estimate: ResourceEstimate) -> Self {
        Self { version: ESTIMATE_V1.into(), skeleton_fingerprint: fingerprint.into(), estimate }
    }
}

/// `r,ov,w` rows.
pub fn overlap_csv(curve: &OverlapCurve) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["r", "ov", "w"]).expect("in-memory write");
    for ((r, ov), wt) in curve.ranks.iter().zip(&curve.ov).zip(&curve.weights) {
        w.write_record([r.to_string(), ov.to_string(), wt.to_string()]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("ascii")
}

/// Complex matrix table as `row,col,re,im`.
pub fn matrix_csv(rows: &[Vec<(f64, f64)>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["row", "col", "re", "im"]).expect("in-memory write");
    for (i, row) in rows.iter().enumerate() {
        for (j, (re, im)) in row.iter().enumerate() {
            w.write_record([i.to_string(), j.to_string(), re.to_string(), im.to_string()]).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("ascii")
}

#[cfg(test)]
mod tests {
    use super::*;
    use composer_core::factorization::{build_hamiltonian_pool, mp2_amplitudes, nested_svd_t2};
    use composer_core::integrals::synth_instance;

    fn pools(seed: u64) -> (HamiltonianPool, GeneratorPool, T2Tensor) {
        let ints = synth_instance(seed, 2, 2).unwrap();
        let ham = build_hamiltonian_pool(&ints, 1e-10, 1e-12, 1e-12).unwrap();
        let (t2, _) = mp2_amplitudes(&ints).unwrap();
        let gen = nested_svd_t2(&t2, 1e-10, 1e-10);
        (ham, gen, t2)
    }

    #[test]
    fn ints_round_trip() {
        let ints = synth_instance(4, 2, 2).unwrap();
        let back: IntsDoc = from_json(&to_json(&IntsDoc::new(&ints))).unwrap();
        assert_eq!(back.into_ints().unwrap(), ints);
    }

    #[test]
    fn pool_round_trip_is_exact() {
        let (ham, gen, _) = pools(2);
        let doc = PoolDoc::new(&ham, &gen).unwrap();
        let text = to_json(&doc);
        let (h2, g2) = from_json::<PoolDoc>(&text).unwrap().pools().unwrap();
        assert_eq!(h2, ham);
        assert_eq!(g2, gen);
        assert_eq!(to_json(&PoolDoc::new(&h2, &g2).unwrap()), text);
    }

    #[test]
    fn t2_round_trip_and_shape_check() {
        let (_, _, t2) = pools(3);
        let mut doc = T2Doc::new(&t2);
        assert_eq!(from_json::<T2Doc>(&to_json(&doc)).unwrap().tensor().unwrap(), t2);
        doc.shape = [2, 2];
        assert!(doc.tensor().is_err());
    }

    #[test]
    fn wrong_version_is_rejected() {
        let ints = synth_instance(4, 2, 2).unwrap();
        let mut doc = IntsDoc::new(&ints);
        doc.version = POOL_V1.into();
        assert!(matches!(doc.into_ints(), Err(Error::Validation(_))));
        assert!(matches!(from_json::<IntsDoc>("{\n\"version\": 3"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn csv_layout() {
        let curve = OverlapCurve { ranks: vec![1, 2], ov: vec![1.0, 0.5], weights: vec![0.75, 0.25], wauc: 0.875, r_eps: 2 };
        assert_eq!(overlap_csv(&curve), "r,ov,w\n1,1,0.75\n2,0.5,0.25\n");
        assert_eq!(matrix_csv(&[vec![(1.0, 0.0)]]), "row,col,re,im\n0,0,1,0\n");
    }
}
