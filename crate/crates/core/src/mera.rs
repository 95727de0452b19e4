//! The binary wavelet MERA: gates, hologron gauges, bulk coordinates, causal cones,
//! the core state and a statevector oracle for small chains.

use crate::engine;
use crate::error::{Error, Result};
use crate::lattice;
use crate::ops::{self, CMat, Pauli, ONE, ZERO};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Site count of the core level.
pub const CORE_LEVEL: usize = 2;
/// Deepest network the library builds.
pub const MAX_DEPTH: usize = 12;
/// Largest chain the statevector oracle materializes.
pub const STATEVECTOR_MAX_SITES: usize = 20;

/// Identity-check tolerance for gate algebra.
pub const GATE_TOL: f64 = 1e-12;

/// `w†` from its Pauli expansion.
fn analytic_w_dagger() -> CMat {
    let (s3, s2) = (3f64.sqrt(), 2f64.sqrt());
    let id = ops::identity(4);
    let zz = ops::two_site(Pauli::Z, Pauli::Z);
    let xy = ops::two_site(Pauli::X, Pauli::Y);
    let yx = ops::two_site(Pauli::Y, Pauli::X);
    ops::scale(&id, C64::new((s3 + s2) / 4.0, 0.0))
        + ops::scale(&zz, C64::new((s3 - s2) / 4.0, 0.0))
        + ops::scale(&xy, C64::new(0.0, (1.0 + s2) / 4.0))
        + ops::scale(&yx, C64::new(0.0, (1.0 - s2) / 4.0))
}

/// `u†` from its Pauli expansion.
fn analytic_u_dagger() -> CMat {
    let s3 = 3f64.sqrt();
    let id = ops::identity(4);
    let zz = ops::two_site(Pauli::Z, Pauli::Z);
    let xy = ops::two_site(Pauli::X, Pauli::Y);
    let yx = ops::two_site(Pauli::Y, Pauli::X);
    ops::scale(&id, C64::new((s3 + 2.0) / 4.0, 0.0))
        + ops::scale(&zz, C64::new((s3 - 2.0) / 4.0, 0.0))
        + ops::scale(&xy, C64::new(0.0, 0.25))
        + ops::scale(&yx, C64::new(0.0, 0.25))
}

/// Columns of a 4x4 gate with the upper local qubit fixed to `ancilla`.
fn ancilla_columns(w: &CMat, ancilla: usize) -> CMat {
    CMat::from_fn(4, 2, |r, a| w[(r, a + 2 * ancilla)])
}

/// Coarse-graining unitary `w`, disentangler `u` and the isometries they induce.
///
/// The ancilla of `w` is the upper local qubit; `v` feeds it `|0>` and `ṽ` feeds `|1>`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSet {
    w: CMat,
    u: CMat,
    v: CMat,
    v_flip: CMat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateDefects {
    pub w_unitary: f64,
    pub u_unitary: f64,
    pub v_isometry: f64,
    pub v_flip_isometry: f64,
    pub orthogonality: f64,
}

impl GateDefects {
    pub fn max(&self) -> f64 {
        [
            self.w_unitary,
            self.u_unitary,
            self.v_isometry,
            self.v_flip_isometry,
            self.orthogonality,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl GateSet {
    pub fn from_unitaries(w: CMat, u: CMat) -> Result<Self> {
        if w.nrows() != 4 || w.ncols() != 4 || u.nrows() != 4 || u.ncols() != 4 {
            return Err(Error::Parameter("gates must be 4x4".into()));
        }
        let v = ancilla_columns(&w, 0);
        let v_flip = ancilla_columns(&w, 1);
        Ok(Self { w, u, v, v_flip })
    }

    pub fn w(&self) -> &CMat {
        &self.w
    }

    pub fn u(&self) -> &CMat {
        &self.u
    }

    pub fn v(&self) -> &CMat {
        &self.v
    }

    pub fn v_flip(&self) -> &CMat {
        &self.v_flip
    }

    pub fn isometry_for(&self, flipped: bool) -> &CMat {
        if flipped {
            &self.v_flip
        } else {
            &self.v
        }
    }

    pub fn defects(&self) -> GateDefects {
        let i4 = ops::identity(4);
        let i2 = ops::identity(2);
        let gram = |a: &CMat, b: &CMat| a.adjoint() * b;
        GateDefects {
            w_unitary: ops::max_abs_diff(&gram(&self.w, &self.w), &i4),
            u_unitary: ops::max_abs_diff(&(&self.u * self.u.adjoint()), &i4),
            v_isometry: ops::max_abs_diff(&gram(&self.v, &self.v), &i2),
            v_flip_isometry: ops::max_abs_diff(&gram(&self.v_flip, &self.v_flip), &i2),
            orthogonality: ops::max_abs(&gram(&self.v, &self.v_flip)),
        }
    }

    /// Deviations from `(Z⊗Z) w (Z⊗Z) = w` and `(Y⊗X) v Y = ṽ`, with the left factor on the lower site.
    pub fn symmetric_gauge_defects(&self) -> (f64, f64) {
        let zz = ops::two_site(Pauli::Z, Pauli::Z);
        let parity = ops::max_abs_diff(&(&zz * &self.w * &zz), &self.w);
        let yx = ops::two_site(Pauli::Y, Pauli::X);
        let mapped = &yx * &self.v * Pauli::Y.matrix();
        (parity, ops::max_abs_diff(&mapped, &self.v_flip))
    }
}

/// The wavelet gates in closed form.
pub fn analytic_gates() -> GateSet {
    let w = ops::dagger(&analytic_w_dagger());
    let u = ops::dagger(&analytic_u_dagger());
    GateSet::from_unitaries(w, u).expect("analytic gates are 4x4")
}

/// Unitary freedom rotating `ṽ` while fixing `v`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HologronGauge {
    pub theta: [f64; 3],
    pub phi: f64,
}

impl HologronGauge {
    pub fn symmetric() -> Self {
        Self::default()
    }

    pub fn new(theta: [f64; 3], phi: f64) -> Self {
        Self { theta, phi }
    }

    /// Haar-random rotation and uniform phase drawn from a seeded stream.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        let [a, b, c, d] = q.map(|x| x / norm);
        let angle = a.clamp(-1.0, 1.0).acos();
        let sin = angle.sin();
        let theta = if sin.abs() < 1e-300 {
            [0.0; 3]
        } else {
            [b, c, d].map(|x| angle * x / sin)
        };
        let phi = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
        Self { theta, phi }
    }

    pub fn is_trivial(&self) -> bool {
        self.theta == [0.0; 3] && self.phi == 0.0
    }

    /// `exp(i θ·σ)` on the hologron qubit.
    pub fn rotation(&self) -> CMat {
        let gen = ops::scale(&Pauli::X.matrix(), C64::new(self.theta[0], 0.0))
            + ops::scale(&Pauli::Y.matrix(), C64::new(self.theta[1], 0.0))
            + ops::scale(&Pauli::Z.matrix(), C64::new(self.theta[2], 0.0));
        ops::expi_hermitian(&gen)
    }

    /// `G = v v† + e^{iφ} ṽ e^{iθ·σ} ṽ†`.
    pub fn matrix(&self, gates: &GateSet) -> CMat {
        let v = gates.v();
        let vt = gates.v_flip();
        let phase = C64::from_polar(1.0, self.phi);
        v * v.adjoint() + ops::scale(&(vt * self.rotation() * vt.adjoint()), phase)
    }
}

/// Applies `w -> G w`; `v` is unchanged and `ṽ` is rotated.
pub fn gauge_transform(gates: &GateSet, gauge: &HologronGauge) -> GateSet {
    let g = gauge.matrix(gates);
    GateSet::from_unitaries(&g * gates.w(), gates.u().clone()).expect("4x4 gates")
}

/// Location of a coarse-graining isometry: layer `rho` acting on parent site `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BulkCoordinate {
    pub rho: usize,
    pub s: usize,
}

impl BulkCoordinate {
    pub fn new(rho: usize, s: usize, depth: usize) -> Result<Self> {
        if rho < CORE_LEVEL || rho >= depth || s >= 1 << rho {
            return Err(Error::InvalidCoordinate { rho, s, depth });
        }
        Ok(Self { rho, s })
    }

    pub fn rho_hat(&self, depth: usize) -> usize {
        depth - self.rho
    }

    /// Next insertion outward along the ancilla-leg lineage.
    pub fn outward(&self) -> Self {
        Self {
            rho: self.rho + 1,
            s: 2 * self.s + 1,
        }
    }

    /// Coordinate at `rho` on the ancilla-leg lineage through `self`; `rho >= self.rho`.
    pub fn lineage_at(&self, rho: usize) -> Self {
        let mut x = *self;
        while x.rho < rho {
            x = x.outward();
        }
        x
    }
}

/// A validated set of bulk flips.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlipSet {
    coords: Vec<BulkCoordinate>,
}

impl FlipSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(coords: &[BulkCoordinate], depth: usize) -> Result<Self> {
        let mut sorted = Vec::with_capacity(coords.len());
        for c in coords {
            BulkCoordinate::new(c.rho, c.s, depth)?;
            if sorted.contains(c) {
                return Err(Error::DuplicateInsertion { rho: c.rho, s: c.s });
            }
            sorted.push(*c);
        }
        sorted.sort();
        Ok(Self { coords: sorted })
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[BulkCoordinate] {
        &self.coords
    }

    pub fn contains(&self, rho: usize, s: usize) -> bool {
        self.coords.iter().any(|c| c.rho == rho && c.s == s)
    }

    /// Whether any flip can influence one of `sites` at `level`.
    pub fn touches(&self, level: usize, sites: &[usize]) -> bool {
        self.coords.iter().any(|c| {
            c.rho < level && {
                let cone = cone_at(c, level);
                sites.iter().any(|&x| cone.contains(x))
            }
        })
    }
}

/// A cyclic interval of sites at one level of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeInterval {
    pub level: usize,
    pub start: usize,
    pub len: usize,
}

impl ConeInterval {
    pub fn sites_at_level(&self) -> usize {
        1 << self.level
    }

    pub fn contains(&self, site: usize) -> bool {
        let n = self.sites_at_level();
        (site + n - self.start) % n < self.len
    }

    pub fn sites(&self) -> Vec<usize> {
        let n = self.sites_at_level();
        (0..self.len).map(|k| (self.start + k) % n).collect()
    }
}

/// Forward cone of an insertion at `level > x.rho`.
pub fn cone_at(x: &BulkCoordinate, level: usize) -> ConeInterval {
    assert!(level > x.rho);
    let steps = level - x.rho;
    let n = 1usize << level;
    let width = 3 * (1usize << steps) - 2;
    if width >= n {
        return ConeInterval {
            level,
            start: 0,
            len: n,
        };
    }
    let start = ((1usize << steps) * (x.s + (1 << x.rho) - 1) + 1) % n;
    ConeInterval {
        level,
        start,
        len: width,
    }
}

/// Forward causal cone of an insertion on every level from `x.rho + 1` to the boundary.
pub fn lightcone(x: &BulkCoordinate, depth: usize) -> Result<Vec<ConeInterval>> {
    BulkCoordinate::new(x.rho, x.s, depth)?;
    Ok((x.rho + 1..=depth).map(|l| cone_at(x, l)).collect())
}

/// Per-location gate lookup; lets noisy networks assign independent gates to every tensor.
pub trait GateSource: Sync {
    /// The 4x2 isometry of layer `layer` acting on parent `parent`.
    fn isometry(&self, layer: usize, parent: usize, flipped: bool) -> &CMat;
    /// The disentangler of layer `layer` acting on child pair `(2 pair + 1, 2 pair + 2)`.
    fn disentangler(&self, layer: usize, pair: usize) -> &CMat;
}

impl GateSource for GateSet {
    fn isometry(&self, _layer: usize, _parent: usize, flipped: bool) -> &CMat {
        self.isometry_for(flipped)
    }

    fn disentangler(&self, _layer: usize, _pair: usize) -> &CMat {
        &self.u
    }
}

/// A circuit ready for contraction: depth, core state and gates.
#[derive(Clone, Copy)]
pub struct Circuit<'a> {
    pub depth: usize,
    pub core: &'a [C64],
    pub gates: &'a dyn GateSource,
}

impl<'a> Circuit<'a> {
    pub fn sites(&self) -> usize {
        1 << self.depth
    }
}

/// Per-site root applied to the raw overlap with the exact ground state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum OverlapConvention {
    Raw,
    #[default]
    PerSite,
    PerSitePair,
}

impl OverlapConvention {
    pub fn apply(&self, raw: f64, n: usize) -> f64 {
        match self {
            OverlapConvention::Raw => raw,
            OverlapConvention::PerSite => raw.powf(1.0 / n as f64),
            OverlapConvention::PerSitePair => raw.powf(2.0 / n as f64),
        }
    }
}

/// Binary MERA on `2^depth` sites with one gate set shared by every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MeraNetwork {
    depth: usize,
    base: GateSet,
    gauge: HologronGauge,
    gates: GateSet,
    core: Vec<C64>,
}

impl MeraNetwork {
    /// Analytic gates in the symmetric gauge with an optimized core.
    pub fn new(depth: usize) -> Result<Self> {
        Self::with_gauge(depth, HologronGauge::symmetric())
    }

    pub fn with_gauge(depth: usize, gauge: HologronGauge) -> Result<Self> {
        Self::from_parts(depth, analytic_gates(), gauge, None)
    }

    /// Builds a network from explicit parts; the core is optimized when not given.
    pub fn from_parts(
        depth: usize,
        base: GateSet,
        gauge: HologronGauge,
        core: Option<Vec<C64>>,
    ) -> Result<Self> {
        if !(CORE_LEVEL..=MAX_DEPTH).contains(&depth) {
            return Err(Error::Capacity(format!(
                "depth must lie in [{CORE_LEVEL}, {MAX_DEPTH}], got {depth}"
            )));
        }
        let gates = gauge_transform(&base, &gauge);
        let mut net = Self {
            depth,
            base,
            gauge,
            gates,
            core: vec![ZERO; 16],
        };
        match core {
            Some(c) => {
                if c.len() != 16 {
                    return Err(Error::Parameter("core state must have 16 amplitudes".into()));
                }
                let nrm = ops::norm(&c);
                if (nrm - 1.0).abs() > 1e-12 {
                    return Err(Error::Parameter(format!("core norm {nrm} is not 1")));
                }
                net.core = c;
            }
            None => net.core = net.optimize_core()?.state,
        }
        Ok(net)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn sites(&self) -> usize {
        1 << self.depth
    }

    pub fn gates(&self) -> &GateSet {
        &self.gates
    }

    pub fn base_gates(&self) -> &GateSet {
        &self.base
    }

    pub fn gauge(&self) -> HologronGauge {
        self.gauge
    }

    pub fn core(&self) -> &[C64] {
        &self.core
    }

    pub fn circuit(&self) -> Circuit<'_> {
        Circuit {
            depth: self.depth,
            core: &self.core,
            gates: &self.gates,
        }
    }

    /// Same network with the gauge replaced; the core is kept, the ground state is unchanged.
    pub fn regauged(&self, gauge: HologronGauge) -> Self {
        Self {
            depth: self.depth,
            base: self.base.clone(),
            gauge,
            gates: gauge_transform(&self.base, &gauge),
            core: self.core.clone(),
        }
    }

    /// Lowest eigenvector of the core effective Hamiltonian.
    pub fn optimize_core(&self) -> Result<CoreSolution> {
        let circuit = Circuit {
            depth: self.depth,
            core: &self.core,
            gates: &self.gates,
        };
        let h_eff = engine::effective_hamiltonian(&circuit, &FlipSet::empty())?;
        lowest_even_eigenvector(&h_eff)
    }

    pub fn statevector(&self, flips: &FlipSet) -> Result<Vec<C64>> {
        statevector(&self.circuit(), flips)
    }

    /// Overlap with the exact ground state under `convention`.
    pub fn overlap(&self, convention: OverlapConvention) -> Result<f64> {
        let n = self.sites();
        if n > lattice::ED_MAX_SITES {
            return Err(Error::Capacity(format!("overlap needs ED, {n} sites is too many")));
        }
        let psi = self.statevector(&FlipSet::empty())?;
        let gs = lattice::ed_ground(n)?;
        let raw = ops::inner(&gs.state, &psi).norm();
        Ok(convention.apply(raw, n))
    }

    pub fn to_document(&self) -> NetworkDocument {
        let pack = |m: &CMat| -> Vec<Vec<[f64; 2]>> {
            (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
                .collect()
        };
        NetworkDocument {
            depth: self.depth,
            w: pack(self.base.w()),
            u: pack(self.base.u()),
            gauge: self.gauge,
            core: self.core.iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn from_document(doc: &NetworkDocument) -> Result<Self> {
        let unpack = |rows: &Vec<Vec<[f64; 2]>>| -> Result<CMat> {
            if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
                return Err(Error::Parameter("gate matrices must be 4x4".into()));
            }
            Ok(CMat::from_fn(4, 4, |r, c| C64::new(rows[r][c][0], rows[r][c][1])))
        };
        let base = GateSet::from_unitaries(unpack(&doc.w)?, unpack(&doc.u)?)?;
        let core = doc.core.iter().map(|p| C64::new(p[0], p[1])).collect();
        Self::from_parts(doc.depth, base, doc.gauge, Some(core))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("network document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDocument =
            serde_json::from_str(text).map_err(|e| Error::Parameter(e.to_string()))?;
        Self::from_document(&doc)
    }
}

/// Serializable description of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub depth: usize,
    pub w: Vec<Vec<[f64; 2]>>,
    pub u: Vec<Vec<[f64; 2]>>,
    pub gauge: HologronGauge,
    pub core: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct CoreSolution {
    pub energy: f64,
    pub state: Vec<C64>,
    pub h_eff: CMat,
}

fn lowest_even_eigenvector(h_eff: &CMat) -> Result<CoreSolution> {
    let defect = ops::hermiticity_defect(h_eff);
    if defect > 1e-10 {
        return Err(Error::NonHermitian(defect));
    }
    let sym = ops::scale(&(h_eff + h_eff.adjoint()), C64::new(0.5, 0.0));
    let eig = sym
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Solver(format!("{e:?}")))?;
    let vals: Vec<f64> = (0..16).map(|i| eig.S().column_vector()[i].re).collect();
    let scale = vals[0].abs().max(1.0);
    let group: Vec<usize> = (0..16).filter(|&i| vals[i] - vals[0] < 1e-10 * scale).collect();
    let column = |i: usize| -> Vec<C64> { (0..16).map(|r| eig.U()[(r, i)]).collect() };
    let mut state = if group.len() == 1 {
        column(0)
    } else {
        even_projection(&group.iter().map(|&i| column(i)).collect::<Vec<_>>())
    };
    fix_phase(&mut state);
    let hv: Vec<C64> = (0..16)
        .map(|r| (0..16).map(|c| h_eff[(r, c)] * state[c]).sum())
        .collect();
    let energy = ops::inner(&state, &hv).re;
    Ok(CoreSolution {
        energy,
        state,
        h_eff: h_eff.clone(),
    })
}

/// Vector of the span of `basis` with the largest even-parity weight.
fn even_projection(basis: &[Vec<C64>]) -> Vec<C64> {
    let k = basis.len();
    // Gram matrix of the even projector in the given orthonormal basis
    let gram = CMat::from_fn(k, k, |i, j| {
        basis[i]
            .iter()
            .zip(&basis[j])
            .enumerate()
            .filter(|(b, _)| b.count_ones() % 2 == 0)
            .map(|(_, (x, y))| x.conj() * y)
            .sum()
    });
    let eig = gram
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("small Hermitian eigendecomposition");
    let top = k - 1;
    let mut out = vec![ZERO; 16];
    for (i, v) in basis.iter().enumerate() {
        let c = eig.U()[(i, top)];
        for (o, x) in out.iter_mut().zip(v) {
            *o += c * x;
        }
    }
    let nrm = ops::norm(&out);
    out.iter_mut().for_each(|z| *z /= nrm);
    out
}

/// Rotates the global phase so the largest amplitude is real and positive.
pub fn fix_phase(psi: &mut [C64]) {
    let (_, pivot) = psi
        .iter()
        .enumerate()
        .fold((0.0, ONE), |(best, p), (_, z)| {
            if z.norm() > best + 1e-12 {
                (z.norm(), *z)
            } else {
                (best, p)
            }
        });
    if pivot.norm() > 0.0 {
        let phase = pivot.conj() / pivot.norm();
        psi.iter_mut().for_each(|z| *z *= phase);
    }
}

/// Full boundary state by sequential application of every layer.
pub fn statevector(circuit: &Circuit<'_>, flips: &FlipSet) -> Result<Vec<C64>> {
    let n_total = circuit.sites();
    if n_total > STATEVECTOR_MAX_SITES {
        return Err(Error::Capacity(format!(
            "statevector limited to {STATEVECTOR_MAX_SITES} sites, requested {n_total}"
        )));
    }
    let mut psi = circuit.core.to_vec();
    for layer in CORE_LEVEL..circuit.depth {
        let n = 1usize << layer;
        let m = 2 * n;
        let mut next = vec![ZERO; 1 << m];
        for (b, amp) in psi.iter().enumerate() {
            if *amp == ZERO {
                continue;
            }
            let mut spread = 0usize;
            for p in 0..n {
                spread |= ((b >> p) & 1) << (2 * p);
            }
            next[spread] = *amp;
        }
        for p in 0..n {
            let iso = circuit.gates.isometry(layer, p, flips.contains(layer, p));
            let g = CMat::from_fn(4, 4, |r, c| if c < 2 { iso[(r, c)] } else { ZERO });
            ops::apply_2q(&mut next, 2 * p, 2 * p + 1, &g);
        }
        for i in 0..n {
            let (q0, q1) = (2 * i + 1, (2 * i + 2) % m);
            ops::apply_2q(&mut next, q0, q1, circuit.gates.disentangler(layer, i));
        }
        psi = next;
    }
    Ok(psi)
}

/// Dense `<psi|H|psi>` from the statevector oracle.
pub fn statevector_energy(psi: &[C64]) -> Result<f64> {
    let n = psi.len().trailing_zeros() as usize;
    let ham = lattice::ChainHamiltonian::new(n)?;
    Ok(ham.expectation(psi))
}
