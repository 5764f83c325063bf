//! Compile-once circuit IR: skeletons with addressed parameter slots, dial
//! sheets that bind them, and an executor that rebuilds dense encodings.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // method resolution without std
use num_traits::Float;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::factorization::{GeneratorPool, HamiltonianPool, LadderKind, RankOneLadder};
use crate::ladders::{complete_basis, default_pivot, BasisRotation, Gate};
use crate::linalg::{c, cis, identity, pair_list, pairs, to_complex, CVec, ONE};
use crate::oracle::{
    dyad_from_gates, dyad_gauge, occupation_encoding_from_gates, pivot_position, prep_schedule, prep_tree_angles,
    square_encoding, ChannelParts, Encoding, LcuEncoding, LcuTerm,
};
use crate::qsp::jacobi_anger_coeffs;

/// A subset of generator addresses `⊂ {1..ℓ_σ}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    pub label: String,
    pub indices: BTreeSet<usize>,
}

impl Mask {
    pub fn new(label: impl Into<String>, indices: impl IntoIterator<Item = usize>) -> Self {
        Self { label: label.into(), indices: indices.into_iter().collect() }
    }

    pub fn empty() -> Self {
        Self::new("empty", [])
    }

    pub fn full(ell_sigma: usize) -> Self {
        Self::new("full", 1..=ell_sigma)
    }

    pub fn validate(&self, ell_sigma: usize) -> Result<()> {
        if let Some(&bad) = self.indices.iter().find(|&&s| s == 0 || s > ell_sigma) {
            return Err(Error::Mask(format!("mask '{}' holds address {bad} outside 1..={ell_sigma}", self.label)));
        }
        Ok(())
    }

    pub fn contains(&self, address: usize) -> bool {
        self.indices.contains(&address)
    }
}

/// Two-qubit fabric model used for pricing; not part of the fingerprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    Linear { d_g: usize },
    Grid { l: usize },
    AllToAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    X,
    Phase,
    Givens,
    PairGivens,
    /// `CNOT` from a system mode onto the flag.
    FlagCnot,
    /// Rotation multiplexed on the higher register bits.
    MuxRy,
    /// Index-controlled `± X_f CNOT_{ξ→f}`.
    SelectFlag,
    /// Multi-controlled vacuum reflection gadget.
    Reflect,
    Hadamard,
    GlobalPhase,
    /// Selector-controlled call of an adaptor.
    Select,
}

impl GateKind {
    fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSite {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub slots: Vec<String>,
}

impl GateSite {
    fn new(kind: GateKind, qubits: Vec<usize>, slots: Vec<String>) -> Self {
        Self { kind, qubits, slots }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    /// Applied as the adjoint of the listed layers.
    pub adjoint: bool,
    pub layers: Vec<Vec<GateSite>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockTag {
    Hamiltonian,
    Generator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptorKind {
    Occupation,
    Channel,
    BilinearDyad,
    PairDyad,
    Null,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adaptor {
    pub block: BlockTag,
    pub address: usize,
    pub kind: AdaptorKind,
    /// One pivot set per prepared vector.
    pub pivots: Vec<Vec<usize>>,
    pub sections: Vec<Section>,
}

impl Adaptor {
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }
}

/// Pivot assignments frozen at compile time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotPlan {
    pub one_body: Vec<usize>,
    /// `(upper, lower)` pivots per generator ladder.
    pub generator: Vec<(Vec<usize>, Vec<usize>)>,
}

fn ladder_vectors(l: &RankOneLadder, n: usize) -> Option<(CVec, CVec)> {
    match &l.kind {
        LadderKind::Bilinear { u, v } => Some((u.clone(), v.clone())),
        LadderKind::PairExcitation { upper, lower } => Some((upper.pair_vector(n), lower.pair_vector(n))),
        LadderKind::ProjectedQuadratic { .. } => None,
    }
}

fn vector_pivot(n: usize, v: &CVec) -> Vec<usize> {
    let k = default_pivot(v);
    if v.len() == n {
        vec![k]
    } else {
        let (p, q) = pair_list(n)[k];
        vec![p, q]
    }
}

impl PivotPlan {
    /// Largest-magnitude entry of every prepared vector.
    pub fn from_pools(ham: &HamiltonianPool, gen: &GeneratorPool) -> Self {
        let n = ham.n_so;
        let one_body = ham
            .one_body
            .iter()
            .map(|l| ladder_vectors(l, n).map_or(0, |(u, _)| default_pivot(&u)))
            .collect();
        let generator = gen
            .ladders
            .iter()
            .filter_map(|l| ladder_vectors(l, n).map(|(u, v)| (vector_pivot(n, &u), vector_pivot(n, &v))))
            .collect();
        Self { one_body, generator }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorShape {
    Pair,
    Bilinear,
}

/// Everything fixed at compile time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSpec {
    pub n: usize,
    pub r1: usize,
    pub k: usize,
    pub ell_sigma: usize,
    pub generator_shape: GeneratorShape,
    pub pivots: PivotPlan,
    pub qsp_degree: usize,
    pub connectivity: Connectivity,
    /// Forced selector width, e.g. the maximum over a geometry scan.
    pub selector_width: Option<usize>,
}

impl SkeletonSpec {
    pub fn from_pools(ham: &HamiltonianPool, gen: &GeneratorPool, qsp_degree: usize, connectivity: Connectivity) -> Self {
        let shape = if gen.ladders.iter().any(|l| matches!(l.kind, LadderKind::Bilinear { .. })) {
            GeneratorShape::Bilinear
        } else {
            GeneratorShape::Pair
        };
        Self {
            n: ham.n_so,
            r1: ham.one_body.len(),
            k: ham.channels.len(),
            ell_sigma: gen.ell_sigma,
            generator_shape: shape,
            pivots: PivotPlan::from_pools(ham, gen),
            qsp_degree,
            connectivity,
            selector_width: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSkeleton {
    pub n_system: usize,
    pub r1: usize,
    pub k: usize,
    pub ell_h: usize,
    pub ell_sigma: usize,
    pub selector_width: usize,
    pub workspace_width: usize,
    /// Index register of each channel adaptor, sized for full rank.
    pub channel_index_width: usize,
    pub generator_shape: GeneratorShape,
    pub connectivity: Connectivity,
    pub adaptor_table: Vec<Adaptor>,
    pub prep_slots: Vec<String>,
    pub qsp_slots: Vec<String>,
    pub qsp_degree: usize,
    pub fingerprint: String,
}

/// `⌈log₂ max(ℓ_H, ℓ_σ + 1)⌉`.
pub fn selector_width(ell_h: usize, ell_sigma: usize) -> usize {
    crate::linalg::ceil_log2(ell_h.max(ell_sigma + 1))
}

fn slot(parts: &[&dyn core::fmt::Display]) -> String {
    let mut s = String::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            s.push('.');
        }
        s.push_str(&p.to_string());
    }
    s
}

fn ladder_sections(tag: &str, n: usize, pivot: &[usize], prep: bool) -> Vec<Vec<GateSite>> {
    let mut layers = Vec::new();
    if prep {
        layers.push(pivot.iter().map(|&m| GateSite::new(GateKind::X, vec![m], vec![])).collect());
    }
    if pivot.len() == 1 {
        let r = pivot[0];
        let others: Vec<usize> = (0..n).filter(|&p| p != r).collect();
        for (k, &p) in others.iter().enumerate() {
            layers.push(vec![GateSite::new(GateKind::Givens, vec![p, r], vec![slot(&[&tag, &k, &"theta"])])]);
        }
        layers.push(
            others
                .iter()
                .enumerate()
                .map(|(k, &p)| GateSite::new(GateKind::Phase, vec![p], vec![slot(&[&tag, &k, &"phi"])]))
                .collect(),
        );
    } else {
        let (r, s) = (pivot[0], pivot[1]);
        let others = pair_list(n).into_iter().filter(|&pq| pq != (r, s));
        for (k, (p, q)) in others.enumerate() {
            layers.push(vec![GateSite::new(
                GateKind::PairGivens,
                vec![p, q, r, s],
                vec![slot(&[&tag, &k, &"theta"]), slot(&[&tag, &k, &"phi"])],
            )]);
        }
    }
    layers
}

/// Sites of the adjacent-Givens basis change of `n` modes.
fn rotation_sites(tag: &str, n: usize) -> Vec<Vec<GateSite>> {
    let template = BasisRotation::from_unitary(&identity(n));
    let mut phases = Vec::new();
    let mut layers = Vec::new();
    for (k, g) in template.gates.iter().enumerate() {
        match g {
            Gate::Phase { mode, .. } => {
                phases.push(GateSite::new(GateKind::Phase, vec![*mode], vec![slot(&[&tag, &k, &"phi"])]))
            }
            Gate::Givens { p, r, .. } => layers.push(vec![GateSite::new(
                GateKind::Givens,
                vec![*p, *r],
                vec![slot(&[&tag, &k, &"theta"]), slot(&[&tag, &k, &"phi"])],
            )]),
            _ => unreachable!("basis rotations hold phases and Givens only"),
        }
    }
    let mut out = vec![phases];
    out.extend(layers);
    out
}

fn tree_sites(tag: &str, offset: usize, width: usize) -> Vec<Vec<GateSite>> {
    (0..width)
        .map(|level| {
            let bit = width - 1 - level;
            let mut qubits = vec![offset + bit];
            qubits.extend((bit + 1..width).map(|b| offset + b));
            (0..1usize << level)
                .map(|prefix| GateSite::new(GateKind::MuxRy, qubits.clone(), vec![slot(&[&tag, &level, &prefix])]))
                .collect()
        })
        .collect()
}

fn tree_slots(tag: &str, width: usize) -> Vec<String> {
    (0..width).flat_map(|level| (0..1usize << level).map(move |p| slot(&[&tag, &level, &p]))).collect()
}

fn section(name: &str, adjoint: bool, layers: Vec<Vec<GateSite>>) -> Section {
    Section { name: name.into(), adjoint, layers }
}

/// Emits the full addressed fabric for the given pool sizes and pivots.
pub fn compile_skeleton(spec: &SkeletonSpec) -> Result<CircuitSkeleton> {
    let n = spec.n;
    let ell_h = spec.r1 + spec.k;
    if ell_h == 0 || n == 0 {
        return Err(Error::Validation("compiled pools must be nonempty".into()));
    }
    if spec.pivots.one_body.len() != spec.r1 || spec.pivots.generator.len() != spec.ell_sigma {
        return Err(Error::Validation(format!(
            "pivot plan covers {} one-body and {} generator adaptors, expected {} and {}",
            spec.pivots.one_body.len(),
            spec.pivots.generator.len(),
            spec.r1,
            spec.ell_sigma
        )));
    }
    let needed = selector_width(ell_h, spec.ell_sigma);
    let a = match spec.selector_width {
        Some(w) if w < needed => {
            return Err(Error::Capacity { branches: ell_h.max(spec.ell_sigma + 1), capacity: 1 << w })
        }
        Some(w) => w,
        None => needed,
    };
    let wc = crate::linalg::ceil_log2(n);
    let t_h = if spec.k > 0 { wc + 2 } else { 1 };
    let t_g = if spec.ell_sigma > 0 { 2 } else { 0 };
    let t = t_h.max(t_g);
    let flag = n;
    let sel_qubits: Vec<usize> = (n + t..n + t + a).collect();

    let mut table = Vec::new();
    for (s, &r) in spec.pivots.one_body.iter().enumerate() {
        if r >= n {
            return Err(Error::Validation(format!("one-body pivot {r} outside {n} modes")));
        }
        let tag = format!("H{s}.nc");
        let ladder = ladder_sections(&tag, n, &[r], false);
        table.push(Adaptor {
            block: BlockTag::Hamiltonian,
            address: s,
            kind: AdaptorKind::Occupation,
            pivots: vec![vec![r]],
            sections: vec![
                section("ladder", true, ladder.clone()),
                section(
                    "flag",
                    false,
                    vec![vec![GateSite::new(GateKind::FlagCnot, vec![r, flag], vec![])], vec![GateSite::new(GateKind::X, vec![flag], vec![])]],
                ),
                section("unladder", false, ladder),
            ],
        });
    }
    for mu in 0..spec.k {
        let s = spec.r1 + mu;
        let rot = rotation_sites(&format!("H{s}.rot"), n);
        let prep = tree_sites(&format!("H{s}.prep"), n + 1, wc);
        let idx: Vec<usize> = (n + 1..n + 1 + wc).collect();
        let select = (0..n)
            .map(|xi| {
                let mut q = vec![xi, flag];
                q.extend(&idx);
                vec![GateSite::new(GateKind::SelectFlag, q, vec![slot(&[&format!("H{s}.sign"), &xi])])]
            })
            .collect();
        let inner: Vec<usize> = (n..n + wc + 1).collect();
        let g = n + wc + 1;
        let mut refl = vec![g];
        refl.extend(&inner);
        table.push(Adaptor {
            block: BlockTag::Hamiltonian,
            address: s,
            kind: AdaptorKind::Channel,
            pivots: vec![],
            sections: vec![
                section("rotation_dag", true, rot.clone()),
                section("prep", false, prep.clone()),
                section("select", false, select),
                section("prep_dag", true, prep),
                section("rotation", false, rot),
                section(
                    "square",
                    false,
                    vec![
                        vec![GateSite::new(GateKind::Hadamard, vec![g], vec![])],
                        vec![GateSite::new(GateKind::Reflect, refl, vec![])],
                        vec![GateSite::new(GateKind::Hadamard, vec![g], vec![])],
                    ],
                ),
            ],
        });
    }
    if spec.ell_sigma > 0 {
        table.push(Adaptor {
            block: BlockTag::Generator,
            address: 0,
            kind: AdaptorKind::Null,
            pivots: vec![],
            sections: vec![section("null", false, vec![vec![GateSite::new(GateKind::X, vec![n], vec![])]])],
        });
    }
    for (k, (up, low)) in spec.pivots.generator.iter().enumerate() {
        let s = k + 1;
        let expect = if spec.generator_shape == GeneratorShape::Pair { 2 } else { 1 };
        if up.len() != expect || low.len() != expect || up.iter().chain(low).any(|&m| m >= n) {
            return Err(Error::Validation(format!("generator {s} pivots do not fit the ladder shape")));
        }
        let kind = if expect == 2 { AdaptorKind::PairDyad } else { AdaptorKind::BilinearDyad };
        let mut reflect_q: Vec<usize> = (0..n).collect();
        reflect_q.push(n);
        table.push(Adaptor {
            block: BlockTag::Generator,
            address: s,
            kind,
            pivots: vec![up.clone(), low.clone()],
            sections: vec![
                section("v_prep", true, ladder_sections(&format!("G{s}.v"), n, low, true)),
                section("reflect", false, vec![vec![GateSite::new(GateKind::Reflect, reflect_q, vec![])]]),
                section("u_prep", false, ladder_sections(&format!("G{s}.u"), n, up, true)),
                section(
                    "gauge",
                    false,
                    vec![vec![GateSite::new(GateKind::GlobalPhase, vec![n], vec![format!("G{s}.gauge")])]],
                ),
                section("adjoint_mux", false, vec![vec![GateSite::new(GateKind::Hadamard, vec![n + 1], vec![])]]),
            ],
        });
    }
    // SELECT cascades: one selector-controlled call per address
    let mut select_layers = Vec::new();
    for ad in &table {
        let mut q = sel_qubits.clone();
        q.extend(n..n + t);
        let tag = match ad.block {
            BlockTag::Hamiltonian => format!("HS.{}", ad.address),
            BlockTag::Generator => format!("GS.{}", ad.address),
        };
        select_layers.push(vec![GateSite::new(GateKind::Select, q, vec![tag])]);
    }
    table.push(Adaptor {
        block: BlockTag::Hamiltonian,
        address: usize::MAX,
        kind: AdaptorKind::Null,
        pivots: vec![],
        sections: vec![
            section("prep_h", false, tree_sites("HP", n + t, a)),
            section("prep_g", false, tree_sites("GP", n + t, a)),
            section("select", false, select_layers),
        ],
    });
    let mut prep_slots = tree_slots("HP", a);
    prep_slots.extend(tree_slots("GP", a));
    let qsp_slots = (0..=spec.qsp_degree).flat_map(|k| [format!("Q.{k}.re"), format!("Q.{k}.im")]).collect();
    let mut skel = CircuitSkeleton {
        n_system: n,
        r1: spec.r1,
        k: spec.k,
        ell_h,
        ell_sigma: spec.ell_sigma,
        selector_width: a,
        workspace_width: t,
        channel_index_width: wc,
        generator_shape: spec.generator_shape,
        connectivity: spec.connectivity,
        adaptor_table: table,
        prep_slots,
        qsp_slots,
        qsp_degree: spec.qsp_degree,
        fingerprint: String::new(),
    };
    skel.fingerprint = fabric_fingerprint(&skel);
    Ok(skel)
}

fn push_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend((s.len() as u64).to_le_bytes());
    buf.extend(s.as_bytes());
}

fn push_num(buf: &mut Vec<u8>, x: usize) {
    buf.extend((x as u64).to_le_bytes());
}

/// Canonical bytes: register widths, then every site in order as (kind
/// code, sorted qubits, slot ids).
pub fn canonical_bytes(skel: &CircuitSkeleton) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend(b"composer-fabric-v1");
    for x in [skel.n_system, skel.selector_width, skel.workspace_width, skel.channel_index_width, skel.qsp_degree] {
        push_num(&mut buf, x);
    }
    for ad in &skel.adaptor_table {
        buf.push(ad.block as u8);
        push_num(&mut buf, ad.address);
        buf.push(ad.kind as u8);
        for sec in &ad.sections {
            push_str(&mut buf, &sec.name);
            buf.push(sec.adjoint as u8);
            push_num(&mut buf, sec.layers.len());
            for layer in &sec.layers {
                push_num(&mut buf, layer.len());
                for site in layer {
                    buf.push(site.kind.code());
                    let mut q = site.qubits.clone();
                    q.sort_unstable();
                    push_num(&mut buf, q.len());
                    for x in q {
                        push_num(&mut buf, x);
                    }
                    push_num(&mut buf, site.slots.len());
                    for s in &site.slots {
                        push_str(&mut buf, s);
                    }
                }
            }
        }
    }
    for s in skel.prep_slots.iter().chain(&skel.qsp_slots) {
        push_str(&mut buf, s);
    }
    buf
}

pub fn fabric_fingerprint(skel: &CircuitSkeleton) -> String {
    let digest = Sha256::digest(canonical_bytes(skel));
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

impl CircuitSkeleton {
    /// Every parameter slot referenced anywhere in the fabric.
    pub fn slots(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.prep_slots.iter().chain(&self.qsp_slots).cloned().collect();
        for ad in &self.adaptor_table {
            for sec in &ad.sections {
                for site in sec.layers.iter().flatten() {
                    out.extend(site.slots.iter().cloned());
                }
            }
        }
        out
    }

    pub fn adaptor(&self, block: BlockTag, address: usize) -> Option<&Adaptor> {
        self.adaptor_table.iter().find(|a| a.block == block && a.address == address)
    }

    pub fn verify_fingerprint(&self) -> Result<()> {
        let found = fabric_fingerprint(self);
        if found != self.fingerprint {
            return Err(Error::Topology { expected: self.fingerprint.clone(), found });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalCoeffs {
    /// `Ω_s` per Hamiltonian address (zero for padding).
    pub omega_h: Vec<f64>,
    /// Branch normalizations `α_s`.
    pub alpha_s: Vec<f64>,
    /// `ω_s` per generator address `1..=ℓ_σ`.
    pub omega_sigma: Vec<f64>,
    pub alpha_h: f64,
    pub alpha_bar: f64,
    /// `Γ_μ` per channel address.
    pub gamma: Vec<f64>,
    pub e_nn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialSheet {
    pub skeleton_fingerprint: String,
    pub angle_bindings: BTreeMap<String, f64>,
    pub phase_bindings: BTreeMap<String, f64>,
    pub mask_id: String,
    pub mask: Vec<usize>,
    pub classical_coeffs: ClassicalCoeffs,
}

impl DialSheet {
    pub fn value(&self, slot: &str) -> Option<f64> {
        self.angle_bindings.get(slot).or_else(|| self.phase_bindings.get(slot)).copied()
    }

    /// Every binding names an existing slot, none twice, and the sheet
    /// covers the whole fabric.
    pub fn validate_against(&self, skel: &CircuitSkeleton) -> Result<()> {
        if self.skeleton_fingerprint != skel.fingerprint {
            return Err(Error::Topology { expected: skel.fingerprint.clone(), found: self.skeleton_fingerprint.clone() });
        }
        let slots = skel.slots();
        let mut bad: Vec<String> = self
            .angle_bindings
            .keys()
            .filter(|k| !slots.contains(*k) || self.phase_bindings.contains_key(*k))
            .chain(self.phase_bindings.keys().filter(|k| !slots.contains(*k)))
            .cloned()
            .collect();
        bad.extend(slots.iter().filter(|s| self.value(s).is_none()).cloned());
        if !bad.is_empty() {
            bad.sort();
            bad.dedup();
            return Err(Error::Bind { addresses: bad, reason: "slots unknown, doubly bound or unbound".into() });
        }
        Ok(())
    }
}

struct Binder {
    angles: BTreeMap<String, f64>,
    phases: BTreeMap<String, f64>,
}

impl Binder {
    fn angle(&mut self, s: String, v: f64) {
        self.angles.insert(s, v);
    }
    fn phase(&mut self, s: String, v: f64) {
        self.phases.insert(s, v);
    }
    fn ladder(&mut self, tag: &str, thetas: &[f64], phases: &[f64]) {
        for (k, (t, p)) in thetas.iter().zip(phases).enumerate() {
            self.angle(format!("{tag}.{k}.theta"), *t);
            self.phase(format!("{tag}.{k}.phi"), *p);
        }
    }
    fn tree(&mut self, tag: &str, angles: &[Vec<f64>]) {
        for (level, row) in angles.iter().enumerate() {
            for (prefix, v) in row.iter().enumerate() {
                self.angle(format!("{tag}.{level}.{prefix}"), *v);
            }
        }
    }
    fn rotation(&mut self, tag: &str, gates: &[Gate]) {
        for (k, g) in gates.iter().enumerate() {
            match g {
                Gate::Phase { phi, .. } => self.phase(format!("{tag}.{k}.phi"), *phi),
                Gate::Givens { theta, phi, .. } => {
                    self.angle(format!("{tag}.{k}.theta"), *theta);
                    self.phase(format!("{tag}.{k}.phi"), *phi);
                }
                _ => {}
            }
        }
    }
}

fn zeros_ladder(n: usize, pivot_len: usize) -> usize {
    if pivot_len == 1 {
        n - 1
    } else {
        pairs(n) - 1
    }
}

/// Dial with the pool's own `ᾱ′`.
pub fn dial(skel: &CircuitSkeleton, ham: &HamiltonianPool, gen: &GeneratorPool, mask: &Mask) -> Result<DialSheet> {
    dial_with(skel, ham, gen, mask, None)
}

/// Binds every slot from the pools; `alpha_bar` may only raise the pool's
/// own normalization (worst case over a family of dials).
pub fn dial_with(
    skel: &CircuitSkeleton,
    ham: &HamiltonianPool,
    gen: &GeneratorPool,
    mask: &Mask,
    alpha_bar: Option<f64>,
) -> Result<DialSheet> {
    let n = skel.n_system;
    let mut offending = Vec::new();
    if ham.n_so != n || gen.n_so != n && gen.ell_sigma > 0 {
        return Err(Error::Bind { addresses: vec![], reason: format!("pools act on {} modes, skeleton on {n}", ham.n_so) });
    }
    if ham.one_body.len() > skel.r1 {
        offending.extend((skel.r1..ham.one_body.len()).map(|s| format!("H{s}")));
    }
    if ham.channels.len() > skel.k {
        offending.extend((skel.k..ham.channels.len()).map(|m| format!("H{}", skel.r1 + m)));
    }
    if gen.ell_sigma > skel.ell_sigma {
        offending.extend((skel.ell_sigma + 1..=gen.ell_sigma).map(|s| format!("G{s}")));
    }
    for l in &gen.ladders {
        let fits = match (&l.kind, skel.generator_shape) {
            (LadderKind::PairExcitation { .. }, GeneratorShape::Pair) => true,
            (LadderKind::Bilinear { .. }, GeneratorShape::Bilinear) => true,
            _ => false,
        };
        if !fits {
            offending.push(format!("G{}", l.address));
        }
    }
    if !offending.is_empty() {
        return Err(Error::Bind { addresses: offending, reason: "pool does not fit the compiled skeleton".into() });
    }
    mask.validate(skel.ell_sigma)?;
    let bar = match alpha_bar {
        Some(a) if a + 1e-12 * a.max(1.0) < gen.alpha_bar => {
            return Err(Error::Bind {
                addresses: vec![],
                reason: format!("alpha_bar {a} below the pool's {}", gen.alpha_bar),
            })
        }
        Some(a) => a,
        None => gen.alpha_bar,
    };

    let mut b = Binder { angles: BTreeMap::new(), phases: BTreeMap::new() };
    let mut omega_h = vec![0.0; skel.ell_h];
    let mut alpha_s = vec![1.0; skel.ell_h];
    let mut gamma = vec![0.0; skel.ell_h];
    // one-body occupation adaptors
    for s in 0..skel.r1 {
        let ad = skel.adaptor(BlockTag::Hamiltonian, s).ok_or_else(|| bind_err(&format!("H{s}"), "missing adaptor"))?;
        let r = ad.pivots[0][0];
        let tag = format!("H{s}.nc");
        match ham.one_body.get(s) {
            Some(l) => {
                let (u, _) = ladder_vectors(l, n).ok_or_else(|| bind_err(&format!("H{s}"), "not bilinear"))?;
                let sched = prep_schedule(n, &u, Some(&[r]))?;
                b.ladder(&tag, &sched.thetas, &sched.phases);
                omega_h[s] = l.coefficient;
            }
            None => b.ladder(&tag, &vec![0.0; n - 1], &vec![0.0; n - 1]),
        }
    }
    // channels, index register padded to full rank
    let wc = skel.channel_index_width;
    for mu in 0..skel.k {
        let s = skel.r1 + mu;
        let (rot, amps, signs, g) = match ham.channels.get(mu) {
            Some(ch) if ch.rank() > 0 => {
                let full = complete_basis(&to_complex(&ch.rotation));
                let mut amps: Vec<f64> = ch.eigvals.iter().map(|l| (l.abs() / ch.gamma).sqrt()).collect();
                amps.resize(n, 0.0);
                let mut signs: Vec<f64> = ch.eigvals.iter().map(|l| if *l < 0.0 { -1.0 } else { 1.0 }).collect();
                signs.resize(n, 1.0);
                (BasisRotation::from_unitary(&full).gates, amps, signs, ch.gamma)
            }
            _ => {
                let mut amps = vec![0.0; n];
                amps[0] = 1.0;
                (BasisRotation::from_unitary(&identity(n)).gates, amps, vec![1.0; n], 0.0)
            }
        };
        b.rotation(&format!("H{s}.rot"), &rot);
        b.tree(&format!("H{s}.prep"), &prep_tree_angles(&amps, wc));
        for (xi, sg) in signs.iter().enumerate() {
            b.phase(format!("H{s}.sign.{xi}"), if *sg < 0.0 { core::f64::consts::PI } else { 0.0 });
        }
        omega_h[s] = 0.5;
        alpha_s[s] = g * g;
        gamma[s] = g;
    }
    let weights_h: Vec<f64> = omega_h.iter().zip(&alpha_s).map(|(o, a)| o.abs() * a).collect();
    let alpha_h: f64 = weights_h.iter().sum();
    let a = skel.selector_width;
    let mut amps = vec![0.0; 1 << a];
    for (s, w) in weights_h.iter().enumerate() {
        amps[s] = if alpha_h > 0.0 { (w / alpha_h).sqrt() } else { 0.0 };
    }
    b.tree("HP", &prep_tree_angles(&amps, a));
    for (s, o) in omega_h.iter().enumerate() {
        b.phase(format!("HS.{s}"), if *o < 0.0 { core::f64::consts::PI } else { 0.0 });
    }

    // generator ladders
    let mut omega_sigma = vec![0.0; skel.ell_sigma];
    let mut used = 0.0;
    let mut gen_amps = vec![0.0; 1 << a];
    for s in 1..=skel.ell_sigma {
        let ad = skel.adaptor(BlockTag::Generator, s).ok_or_else(|| bind_err(&format!("G{s}"), "missing adaptor"))?;
        let (up, low) = (&ad.pivots[0], &ad.pivots[1]);
        match gen.ladder(s) {
            Some(l) => {
                let (u, v) = ladder_vectors(l, n).ok_or_else(|| bind_err(&format!("G{s}"), "not a dyad"))?;
                let (nu, nv) = (u.norm(), v.norm());
                let (uu, vv) = (&u / c(nu), &v / c(nv));
                let su = prep_schedule(n, &uu, Some(up))?;
                let sv = prep_schedule(n, &vv, Some(low))?;
                b.ladder(&format!("G{s}.u"), &su.thetas, &su.phases);
                b.ladder(&format!("G{s}.v"), &sv.thetas, &sv.phases);
                b.phase(format!("G{s}.gauge"), dyad_gauge(&uu, pivot_position(n, &uu, &su), &vv, pivot_position(n, &vv, &sv)));
                omega_sigma[s - 1] = l.coefficient;
                if mask.contains(s) {
                    let w = 2.0 * l.coefficient.abs() * nu * nv;
                    used += w;
                    gen_amps[s] = w;
                }
            }
            None => {
                let m = zeros_ladder(n, up.len());
                let z = vec![0.0; m];
                b.ladder(&format!("G{s}.u"), &z, &z);
                b.ladder(&format!("G{s}.v"), &z, &z);
                b.phase(format!("G{s}.gauge"), 0.0);
            }
        }
        b.phase(format!("GS.{s}"), if omega_sigma[s - 1] < 0.0 { core::f64::consts::PI } else { 0.0 });
    }
    if skel.ell_sigma > 0 {
        b.phase("GS.0".into(), 0.0);
    }
    let norm = if bar > 0.0 { bar } else { 1.0 };
    gen_amps[0] = if bar > 0.0 { (bar - used).max(0.0) } else { 1.0 };
    let gen_amps: Vec<f64> = gen_amps.iter().map(|w| (w / norm).sqrt()).collect();
    b.tree("GP", &prep_tree_angles(&gen_amps, a));
    let poly = jacobi_anger_coeffs(bar, skel.qsp_degree);
    for (k, ck) in poly.coeffs.iter().enumerate() {
        b.phase(format!("Q.{k}.re"), ck.re);
        b.phase(format!("Q.{k}.im"), ck.im);
    }
    let sheet = DialSheet {
        skeleton_fingerprint: skel.fingerprint.clone(),
        angle_bindings: b.angles,
        phase_bindings: b.phases,
        mask_id: mask.label.clone(),
        mask: mask.indices.iter().copied().collect(),
        classical_coeffs: ClassicalCoeffs { omega_h, alpha_s, omega_sigma, alpha_h, alpha_bar: bar, gamma, e_nn: ham.e_nn },
    };
    sheet.validate_against(skel)?;
    Ok(sheet)
}

fn bind_err(addr: &str, reason: &str) -> Error {
    Error::Bind { addresses: vec![addr.into()], reason: reason.into() }
}

fn get(sheet: &DialSheet, slot: &str) -> Result<f64> {
    sheet.value(slot).ok_or_else(|| bind_err(slot, "unbound slot"))
}

/// Gates of a section with bound values, in application order.
fn bound_gates(sec: &Section, sheet: &DialSheet) -> Result<Vec<Gate>> {
    let mut out = Vec::new();
    for site in sec.layers.iter().flatten() {
        let q = &site.qubits;
        let g = match site.kind {
            GateKind::X => Gate::X { mode: q[0] },
            GateKind::Phase => Gate::Phase { mode: q[0], phi: get(sheet, &site.slots[0])? },
            GateKind::Givens => Gate::Givens {
                p: q[0],
                r: q[1],
                theta: get(sheet, &site.slots[0])?,
                phi: match site.slots.get(1) {
                    Some(s) => get(sheet, s)?,
                    None => 0.0,
                },
            },
            GateKind::PairGivens => Gate::PairGivens {
                p: q[0],
                q: q[1],
                r: q[2],
                s: q[3],
                theta: get(sheet, &site.slots[0])?,
                phi: get(sheet, &site.slots[1])?,
            },
            _ => return Err(Error::Validation(format!("section {} is not a ladder", sec.name))),
        };
        out.push(g);
    }
    Ok(out)
}

fn tree_from(sheet: &DialSheet, tag: &str, width: usize) -> Result<Vec<Vec<f64>>> {
    (0..width)
        .map(|level| (0..1usize << level).map(|p| get(sheet, &format!("{tag}.{level}.{p}"))).collect())
        .collect()
}

fn phase_of(sheet: &DialSheet, slot: &str) -> Result<crate::linalg::C64> {
    Ok(cis(get(sheet, slot)?))
}

fn checked(skel: &CircuitSkeleton, sheet: &DialSheet) -> Result<()> {
    skel.verify_fingerprint()?;
    sheet.validate_against(skel)
}

fn section_of<'a>(ad: &'a Adaptor, name: &str) -> Result<&'a Section> {
    ad.section(name).ok_or_else(|| Error::Validation(format!("adaptor {} lacks section {name}", ad.address)))
}

/// Rebuilds the masked generator multiplexer from the fabric and bindings.
pub fn execute_generator(skel: &CircuitSkeleton, sheet: &DialSheet) -> Result<LcuEncoding> {
    checked(skel, sheet)?;
    let n = skel.n_system;
    let mut terms = Vec::new();
    for s in 1..=skel.ell_sigma {
        let ad = skel.adaptor(BlockTag::Generator, s).ok_or_else(|| bind_err(&format!("G{s}"), "missing adaptor"))?;
        let u = bound_gates(section_of(ad, "u_prep")?, sheet)?;
        let v = bound_gates(section_of(ad, "v_prep")?, sheet)?;
        let gauge = get(sheet, &format!("G{s}.gauge"))?;
        let wl = dyad_from_gates(&u, &v, n, gauge);
        let wd = dyad_from_gates(&v, &u, n, -gauge);
        let sub = LcuEncoding::new(
            n,
            1,
            vec![
                LcuTerm { address: 0, weight: 1.0, phase: crate::linalg::I, encoding: wl },
                LcuTerm { address: 1, weight: 1.0, phase: -crate::linalg::I, encoding: wd },
            ],
        )?;
        terms.push((s, phase_of(sheet, &format!("GS.{s}"))?, sub.encoding()?));
    }
    let t = terms.iter().map(|x| x.2.ancillas).max().unwrap_or(1);
    terms.insert(0, (0, ONE, Encoding::null(n, t)));
    let angles = tree_from(sheet, "GP", skel.selector_width)?;
    let alpha = if sheet.classical_coeffs.alpha_bar > 0.0 { sheet.classical_coeffs.alpha_bar } else { 1.0 };
    LcuEncoding::from_prep(n, skel.selector_width, angles, terms, alpha)
}

/// Rebuilds the Hamiltonian multiplexer from the fabric and bindings.
pub fn execute_hamiltonian(skel: &CircuitSkeleton, sheet: &DialSheet) -> Result<LcuEncoding> {
    checked(skel, sheet)?;
    let n = skel.n_system;
    let mut terms = Vec::new();
    for ad in skel.adaptor_table.iter().filter(|a| a.block == BlockTag::Hamiltonian && a.address != usize::MAX) {
        let s = ad.address;
        let enc = match ad.kind {
            AdaptorKind::Occupation => {
                let gates = bound_gates(section_of(ad, "unladder")?, sheet)?;
                occupation_encoding_from_gates(&gates, ad.pivots[0][0], n)
            }
            AdaptorKind::Channel => {
                let gamma = sheet.classical_coeffs.gamma[s];
                let rotation = bound_gates(section_of(ad, "rotation")?, sheet)?;
                let signs = (0..n)
                    .map(|xi| get(sheet, &format!("H{s}.sign.{xi}")).map(|p| if p.cos() < 0.0 { -1.0 } else { 1.0 }))
                    .collect::<Result<Vec<_>>>()?;
                let parts = ChannelParts {
                    n,
                    index_width: skel.channel_index_width,
                    rotation,
                    prep_angles: tree_from(sheet, &format!("H{s}.prep"), skel.channel_index_width)?,
                    signs,
                    gamma,
                };
                square_encoding(&parts.linear())
            }
            _ => return Err(Error::Validation(format!("unexpected Hamiltonian adaptor at {s}"))),
        };
        terms.push((s, phase_of(sheet, &format!("HS.{s}"))?, enc));
    }
    let angles = tree_from(sheet, "HP", skel.selector_width)?;
    LcuEncoding::from_prep(n, skel.selector_width, angles, terms, sheet.classical_coeffs.alpha_h)
}

/// Chebyshev coefficients bound to the QSP scaffold.
pub fn bound_qsp_coeffs(skel: &CircuitSkeleton, sheet: &DialSheet) -> Result<Vec<crate::linalg::C64>> {
    (0..=skel.qsp_degree)
        .map(|k| Ok(crate::linalg::C64::new(get(sheet, &format!("Q.{k}.re"))?, get(sheet, &format!("Q.{k}.im"))?)))
        .collect()
}

/// Bindings whose values differ between two sheets.
pub fn binding_diff(a: &DialSheet, b: &DialSheet) -> BTreeSet<String> {
    let keys: BTreeSet<&String> =
        a.angle_bindings.keys().chain(a.phase_bindings.keys()).chain(b.angle_bindings.keys()).chain(b.phase_bindings.keys()).collect();
    keys.into_iter()
        .filter(|k| match (a.value(k), b.value(k)) {
            (Some(x), Some(y)) => (x - y).abs() > 1e-12,
            _ => true,
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::{build_hamiltonian_pool, mp2_amplitudes, nested_svd_t2};
    use crate::integrals::synth_instance;
    use crate::linalg::max_abs;
    use crate::oracle::{generator_block_encoding, hamiltonian_encoding_with};

    fn pools(seed: u64) -> (HamiltonianPool, GeneratorPool) {
        let ints = synth_instance(seed, 2, 2).unwrap();
        let ham = build_hamiltonian_pool(&ints, 1e-10, 1e-12, 0.0).unwrap();
        let (t2, _) = mp2_amplitudes(&ints).unwrap();
        (ham, nested_svd_t2(&t2, 1e-6, 1e-6))
    }

    fn tiny_spec(pivot: usize) -> SkeletonSpec {
        SkeletonSpec {
            n: 2,
            r1: 1,
            k: 0,
            ell_sigma: 1,
            generator_shape: GeneratorShape::Bilinear,
            pivots: PivotPlan { one_body: vec![pivot], generator: vec![(vec![0], vec![1])] },
            qsp_degree: 4,
            connectivity: Connectivity::AllToAll,
            selector_width: None,
        }
    }

    #[test]
    fn smallest_skeleton_is_deterministic() {
        let a = compile_skeleton(&tiny_spec(0)).unwrap();
        let b = compile_skeleton(&tiny_spec(0)).unwrap();
        assert_eq!(a.selector_width, 1);
        assert_eq!(a.fingerprint, b.fingerprint);
        assert_eq!(a.fingerprint.len(), 64);
    }

    #[test]
    fn pivot_change_alters_fingerprint() {
        let a = compile_skeleton(&tiny_spec(0)).unwrap();
        let b = compile_skeleton(&tiny_spec(1)).unwrap();
        assert_ne!(a.fingerprint, b.fingerprint);
    }

    #[test]
    fn null_branch_counts_toward_selector() {
        assert_eq!(selector_width(1, 5), 3);
        assert_eq!(selector_width(8, 7), 3);
        assert_eq!(selector_width(9, 1), 4);
        let mut spec = tiny_spec(0);
        spec.ell_sigma = 5;
        spec.pivots.generator = vec![(vec![0], vec![1]); 5];
        assert_eq!(compile_skeleton(&spec).unwrap().selector_width, 3);
    }

    #[test]
    fn forced_narrow_selector_overflows() {
        let mut spec = tiny_spec(0);
        spec.ell_sigma = 5;
        spec.pivots.generator = vec![(vec![0], vec![1]); 5];
        spec.selector_width = Some(2);
        assert!(matches!(compile_skeleton(&spec), Err(Error::Capacity { capacity: 4, .. })));
    }

    #[test]
    fn swapping_adaptor_addresses_changes_digest() {
        let mut spec = tiny_spec(0);
        spec.r1 = 2;
        spec.pivots.one_body = vec![0, 1];
        let a = compile_skeleton(&spec).unwrap();
        spec.pivots.one_body = vec![1, 0];
        let b = compile_skeleton(&spec).unwrap();
        assert_ne!(a.fingerprint, b.fingerprint);
    }

    #[test]
    fn fingerprint_ignores_connectivity_and_pool_values() {
        let (ham, gen) = pools(1);
        let spec = SkeletonSpec::from_pools(&ham, &gen, 6, Connectivity::AllToAll);
        let a = compile_skeleton(&spec).unwrap();
        let mut spec2 = spec.clone();
        spec2.connectivity = Connectivity::Grid { l: 3 };
        assert_eq!(a.fingerprint, compile_skeleton(&spec2).unwrap().fingerprint);
    }

    #[test]
    fn dial_never_touches_skeleton() {
        let (ham, gen) = pools(1);
        let skel = compile_skeleton(&SkeletonSpec::from_pools(&ham, &gen, 6, Connectivity::AllToAll)).unwrap();
        let before = skel.clone();
        let sheet = dial(&skel, &ham, &gen, &Mask::full(gen.ell_sigma)).unwrap();
        assert_eq!(skel, before);
        assert_eq!(sheet.skeleton_fingerprint, fabric_fingerprint(&skel));
    }

    #[test]
    fn generator_round_trip_matches_direct_encoding() {
        let (ham, gen) = pools(3);
        assert!(gen.ell_sigma > 0);
        let skel = compile_skeleton(&SkeletonSpec::from_pools(&ham, &gen, 6, Connectivity::AllToAll)).unwrap();
        let mask = Mask::full(gen.ell_sigma);
        let sheet = dial(&skel, &ham, &gen, &mask).unwrap();
        let run = execute_generator(&skel, &sheet).unwrap();
        let (direct, _) = generator_block_encoding(&gen, &mask, Some(skel.selector_width)).unwrap();
        assert!(max_abs(&(run.block() - direct.block())) < 1e-10);
        assert!(max_abs(&(run.unitary().unwrap() - direct.unitary().unwrap())) < 1e-10);
    }

    #[test]
    fn hamiltonian_round_trip_matches_direct_encoding() {
        let (ham, gen) = pools(2);
        let skel = compile_skeleton(&SkeletonSpec::from_pools(&ham, &gen, 6, Connectivity::AllToAll)).unwrap();
        let sheet = dial(&skel, &ham, &gen, &Mask::empty()).unwrap();
        let run = execute_hamiltonian(&skel, &sheet).unwrap();
        let direct = hamiltonian_encoding_with(&ham, skel.selector_width, Some(&skel_pivots(&skel)[..])).unwrap();
        assert!((run.alpha - direct.alpha).abs() < 1e-12);
        assert!(max_abs(&(run.block() - direct.block())) < 1e-10);
    }

    fn skel_pivots(skel: &CircuitSkeleton) -> Vec<usize> {
        (0..skel.r1).map(|s| skel.adaptor(BlockTag::Hamiltonian, s).unwrap().pivots[0][0]).collect()
    }

    #[test]
    fn masks_only_change_prep_bindings() {
        let (ham, gen) = pools(1);
        let skel = compile_skeleton(&SkeletonSpec::from_pools(&ham, &gen, 6, Connectivity::AllToAll)).unwrap();
        let full = dial(&skel, &ham, &gen, &Mask::full(gen.ell_sigma)).unwrap();
        let none = dial(&skel, &ham, &gen, &Mask::empty()).unwrap();
        let diff = binding_diff(&full, &none);
        assert!(!diff.is_empty());
        assert!(diff.iter().all(|k| k.starts_with("GP.")), "{diff:?}");
        assert_eq!(full.skeleton_fingerprint, none.skeleton_fingerprint);
    }

    #[test]
    fn coefficient_rescale_only_changes_amplitudes() {
        let (ham, gen) = pools(1);
        let mut doubled = gen.clone();
        for l in &mut doubled.ladders {
            l.coefficient *= 2.0;
        }
        doubled.alpha_bar *= 2.0;
        let skel = compile_skeleton(&SkeletonSpec::from_pools(&ham, &gen, 6, Connectivity::AllToAll)).unwrap();
        let mask = Mask::full(gen.ell_sigma);
        let worst = doubled.alpha_bar;
        let a = dial_with(&skel, &ham, &gen, &mask, Some(worst)).unwrap();
        let b = dial_with(&skel, &ham, &doubled, &mask, Some(worst)).unwrap();
        let diff = binding_diff(&a, &b);
        assert!(!diff.is_empty());
        assert!(diff.iter().all(|k| k.starts_with("GP.")), "{diff:?}");
        assert!(matches!(dial_with(&skel, &ham, &doubled, &mask, Some(gen.alpha_bar)), Err(Error::Bind { .. })));
    }

    #[test]
    fn oversized_pool_is_a_bind_error() {
        let (ham, gen) = pools(1);
        let mut spec = SkeletonSpec::from_pools(&ham, &gen, 4, Connectivity::AllToAll);
        spec.ell_sigma = 0;
        spec.pivots.generator.clear();
        let skel = compile_skeleton(&spec).unwrap();
        match dial(&skel, &ham, &gen, &Mask::empty()) {
            Err(Error::Bind { addresses, .. }) => assert_eq!(addresses[0], "G1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn smaller_pool_fits_padded_skeleton() {
        let (ham, gen) = pools(1);
        let mut spec = SkeletonSpec::from_pools(&ham, &gen, 4, Connectivity::AllToAll);
        spec.ell_sigma += 2;
        spec.k += 1;
        spec.pivots.generator.extend([(vec![0, 1], vec![2, 3]), (vec![0, 1], vec![2, 3])]);
        let skel = compile_skeleton(&spec).unwrap();
        let mask = Mask::full(gen.ell_sigma);
        let sheet = dial(&skel, &ham, &gen, &mask).unwrap();
        let run = execute_generator(&skel, &sheet).unwrap();
        let (direct, _) = generator_block_encoding(&gen, &mask, Some(skel.selector_width)).unwrap();
        assert!(max_abs(&(run.block() - direct.block())) < 1e-10);
        let h = execute_hamiltonian(&skel, &sheet).unwrap();
        let target = ham.dense() * c(1.0 / ham.alpha);
        assert!(max_abs(&(h.block() - target)) < 1e-9);
    }

    #[test]
    fn tampered_sheet_is_rejected() {
        let (ham, gen) = pools(1);
        let skel = compile_skeleton(&SkeletonSpec::from_pools(&ham, &gen, 4, Connectivity::AllToAll)).unwrap();
        let mut sheet = dial(&skel, &ham, &gen, &Mask::empty()).unwrap();
        sheet.skeleton_fingerprint = "00".repeat(32);
        assert!(matches!(execute_generator(&skel, &sheet), Err(Error::Topology { .. })));
        let mut sheet = dial(&skel, &ham, &gen, &Mask::empty()).unwrap();
        sheet.angle_bindings.insert("bogus".into(), 1.0);
        assert!(matches!(sheet.validate_against(&skel), Err(Error::Bind { .. })));
    }

    #[test]
    fn many_dials_one_fingerprint() {
        let (ham, gen) = pools(4);
        let skel = compile_skeleton(&SkeletonSpec::from_pools(&ham, &gen, 6, Connectivity::AllToAll)).unwrap();
        let l = gen.ell_sigma;
        let masks = [Mask::empty(), Mask::full(l), Mask::new("first", [1]), Mask::new("last", [l])];
        let mut sheets = Vec::new();
        let worst = gen.alpha_bar * 3.0;
        for scale in [1.0, 2.0, 3.0] {
            let mut g = gen.clone();
            for lad in &mut g.ladders {
                lad.coefficient *= scale;
            }
            g.alpha_bar *= scale;
            for m in &masks {
                sheets.push(dial_with(&skel, &ham, &g, m, Some(worst)).unwrap());
            }
        }
        let prints: BTreeSet<&String> = sheets.iter().map(|s| &s.skeleton_fingerprint).collect();
        assert_eq!(prints.len(), 1);
        assert_eq!(sheets.len(), 12);
    }
}
