//! Exact causal-cone contraction of MERA expectation values.
//!
//! Reduced density matrices are descended from the core one layer at a time. Each
//! step needs only the parents of the target sites and their disentangler partners,
//! so a three-site window always descends from a three-site window one level up.

use crate::error::{Error, Result};
use crate::lattice;
use crate::mera::{BulkCoordinate, Circuit, FlipSet, GateSource, CORE_LEVEL};
use crate::ops::{self, CMat, ONE, ZERO};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::collections::HashMap;

/// Largest boundary operator accepted by [`Engine::expectation`].
pub const MAX_OPERATOR_SITES: usize = 6;
/// Largest intermediate register allowed during descent.
const MAX_REGISTER: usize = 12;

/// Disentangler partner of child site `c` among `n` sites.
pub fn partner(c: usize, n: usize) -> usize {
    if c % 2 == 1 {
        (c + 1) % n
    } else {
        (c + n - 1) % n
    }
}

/// Index of the disentangler pair `(2i + 1, 2i + 2)` containing child `c`.
pub fn pair_index(c: usize, n: usize) -> usize {
    if c % 2 == 1 {
        (c - 1) / 2
    } else {
        (c + n - 2) % n / 2
    }
}

/// Sites involved in one descent step toward `target` at a level with `n` sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    pub target: Vec<usize>,
    /// `target` followed by the partners it lacks.
    pub extended: Vec<usize>,
    /// Parents of `extended` in order of first appearance.
    pub parents: Vec<usize>,
    pub n: usize,
}

impl Support {
    pub fn new(target: &[usize], n: usize) -> Self {
        let mut extended = target.to_vec();
        for &c in target {
            let p = partner(c, n);
            if !extended.contains(&p) {
                extended.push(p);
            }
        }
        let mut parents = Vec::new();
        for &c in &extended {
            let p = c / 2;
            if !parents.contains(&p) {
                parents.push(p);
            }
        }
        Self {
            target: target.to_vec(),
            extended,
            parents,
            n,
        }
    }

    fn position(&self, c: usize) -> Option<usize> {
        self.extended.iter().position(|&x| x == c)
    }
}

/// Kraus decomposition of the isometry layer restricted to `sup`: maps from the
/// parent register into the extended child register, one per traced sibling pattern.
fn isometry_kraus(sup: &Support, layer: usize, gates: &dyn GateSource, flips: &FlipSet) -> Vec<CMat> {
    struct Factor<'g> {
        pos0: Option<usize>,
        pos1: Option<usize>,
        iso: &'g CMat,
    }
    let factors: Vec<Factor> = sup
        .parents
        .iter()
        .map(|&p| Factor {
            pos0: sup.position(2 * p),
            pos1: sup.position(2 * p + 1),
            iso: gates.isometry(layer, p, flips.contains(layer, p)),
        })
        .collect();
    let traced: Vec<usize> = factors
        .iter()
        .enumerate()
        .filter(|(_, f)| f.pos0.is_none() || f.pos1.is_none())
        .map(|(j, _)| j)
        .collect();
    let (dim_out, dim_in) = (1usize << sup.extended.len(), 1usize << sup.parents.len());
    (0..1usize << traced.len())
        .map(|k| {
            let sibling = |j: usize| -> usize {
                let idx = traced.iter().position(|&t| t == j).unwrap();
                (k >> idx) & 1
            };
            let locals: Vec<(usize, usize)> = (0..factors.len())
                .map(|j| {
                    let f = &factors[j];
                    (if f.pos0.is_none() { sibling(j) } else { 0 }, if f.pos1.is_none() { sibling(j) } else { 0 })
                })
                .collect();
            CMat::from_fn(dim_out, dim_in, |out, inp| {
                let mut amp = ONE;
                for (j, f) in factors.iter().enumerate() {
                    let b0 = f.pos0.map_or(locals[j].0, |q| (out >> q) & 1);
                    let b1 = f.pos1.map_or(locals[j].1, |q| (out >> q) & 1);
                    amp *= f.iso[(b0 + 2 * b1, (inp >> j) & 1)];
                    if amp == ZERO {
                        break;
                    }
                }
                amp
            })
        })
        .collect()
}

/// Disentanglers acting inside the extended register, as `(q0, q1, pair)` positions.
fn inner_pairs(sup: &Support) -> Vec<(usize, usize, usize)> {
    let n = sup.n;
    let mut pairs = Vec::new();
    for &c in &sup.target {
        let i = pair_index(c, n);
        let (a, b) = (2 * i + 1, (2 * i + 2) % n);
        if let (Some(qa), Some(qb)) = (sup.position(a), sup.position(b)) {
            if !pairs.iter().any(|&(_, _, j)| j == i) {
                pairs.push((qa, qb, i));
            }
        }
    }
    pairs
}

/// Reduced density matrix on `sup.target` at the child level from the one on `sup.parents`.
pub fn descend_step(
    rho_parents: &CMat,
    sup: &Support,
    layer: usize,
    gates: &dyn GateSource,
    flips: &FlipSet,
) -> CMat {
    let e = sup.extended.len();
    let dim = 1usize << e;
    let mut rho = CMat::zeros(dim, dim);
    for t in isometry_kraus(sup, layer, gates, flips) {
        rho += &t * rho_parents * t.adjoint();
    }
    for (qa, qb, i) in inner_pairs(sup) {
        rho = ops::conjugate_2q(&rho, e, qa, qb, gates.disentangler(layer, i));
    }
    let keep: Vec<usize> = (0..sup.target.len()).collect();
    ops::partial_trace(&rho, e, &keep)
}

/// Heisenberg-picture image on `sup.parents` of an operator on `sup.target`.
pub fn ascend_step(op: &CMat, sup: &Support, layer: usize, gates: &dyn GateSource, flips: &FlipSet) -> CMat {
    let e = sup.extended.len();
    let mut big = ops::embed(op, sup.target.len(), 0, e);
    for (qa, qb, i) in inner_pairs(sup) {
        let ud = ops::dagger(gates.disentangler(layer, i));
        big = ops::conjugate_2q(&big, e, qa, qb, &ud);
    }
    let dim = 1usize << sup.parents.len();
    let mut out = CMat::zeros(dim, dim);
    for t in isometry_kraus(sup, layer, gates, flips) {
        out += t.adjoint() * &big * &t;
    }
    out
}

/// Start of a three-site window at a level with `n` sites holding every site of `set`.
pub fn containing_window(set: &[usize], n: usize) -> Option<usize> {
    let span = 3.min(n);
    for &p in set {
        for back in 0..span {
            let a = (p + n - back) % n;
            if set.iter().all(|&q| (q + n - a) % n < span) {
                return Some(a);
            }
        }
    }
    None
}

pub fn window_sites(start: usize, n: usize) -> [usize; 3] {
    [start % n, (start + 1) % n, (start + 2) % n]
}

fn positions_in(window: &[usize; 3], set: &[usize]) -> Vec<usize> {
    set.iter()
        .map(|q| window.iter().position(|w| w == q).expect("site inside window"))
        .collect()
}

/// Three-site reduced density matrices of the unflipped state on every level.
#[derive(Debug, Clone)]
pub struct GroundPyramid {
    depth: usize,
    levels: Vec<Vec<CMat>>,
}

impl GroundPyramid {
    pub fn build(circuit: &Circuit<'_>) -> Self {
        let none = FlipSet::empty();
        let mut levels: Vec<Vec<CMat>> = Vec::with_capacity(circuit.depth + 1);
        for _ in 0..CORE_LEVEL {
            levels.push(Vec::new());
        }
        let core: Vec<CMat> = (0..4)
            .map(|a| ops::reduced_density(circuit.core, 4, &window_sites(a, 4)))
            .collect();
        levels.push(core);
        for level in CORE_LEVEL + 1..=circuit.depth {
            let n = 1usize << level;
            let upper = &levels[level - 1];
            let next: Vec<CMat> = (0..n)
                .into_par_iter()
                .map(|j| {
                    let sup = Support::new(&window_sites(j, n), n);
                    let rho_p = parent_window_rdm(&sup, level, |a| upper[a].clone());
                    descend_step(&rho_p, &sup, level - 1, circuit.gates, &none)
                })
                .collect();
            levels.push(next);
        }
        Self {
            depth: circuit.depth,
            levels,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn window(&self, level: usize, start: usize) -> &CMat {
        &self.levels[level][start]
    }
}

/// RDM on `sup.parents` extracted from the containing window one level up.
fn parent_window_rdm(sup: &Support, child_level: usize, mut window: impl FnMut(usize) -> CMat) -> CMat {
    let np = 1usize << (child_level - 1);
    let a = containing_window(&sup.parents, np).expect("parents fit a three-site window");
    let rho = window(a);
    let ws = window_sites(a, np);
    ops::partial_trace(&rho, 3, &positions_in(&ws, &sup.parents))
}

/// A Hermitian operator on an ordered list of boundary sites.
#[derive(Debug, Clone)]
pub struct BoundaryOperator {
    pub sites: Vec<usize>,
    pub op: CMat,
}

impl BoundaryOperator {
    pub fn new(sites: Vec<usize>, op: CMat) -> Result<Self> {
        if sites.is_empty() || sites.len() > MAX_OPERATOR_SITES {
            return Err(Error::Capacity(format!(
                "boundary operators act on 1..={MAX_OPERATOR_SITES} sites"
            )));
        }
        if op.nrows() != 1 << sites.len() || op.ncols() != op.nrows() {
            return Err(Error::Parameter("operator dimension does not match its support".into()));
        }
        let defect = ops::hermiticity_defect(&op);
        if defect > 1e-10 {
            return Err(Error::NonHermitian(defect));
        }
        Ok(Self { sites, op })
    }

    /// Operator on the contiguous sites `start, start + 1, ...` of an `n`-site ring.
    pub fn contiguous(start: usize, op: CMat, n: usize) -> Result<Self> {
        let k = op.nrows().trailing_zeros() as usize;
        Self::new((0..k).map(|i| (start + i) % n).collect(), op)
    }
}

/// Expectation-value engine for one circuit; caches the unflipped pyramid.
pub struct Engine<'a> {
    circuit: Circuit<'a>,
    pyramid: GroundPyramid,
    term_values: Vec<f64>,
    ground_energy: f64,
}

/// Memo of flipped windows for one flip configuration.
struct FlipContext<'f> {
    flips: &'f FlipSet,
    memo: HashMap<(usize, usize), CMat>,
}

impl<'a> Engine<'a> {
    pub fn new(circuit: Circuit<'a>) -> Self {
        let pyramid = GroundPyramid::build(&circuit);
        let n = circuit.sites();
        let h = lattice::energy_density();
        let term_values: Vec<f64> = (0..n)
            .map(|s| {
                let rho = pyramid.window(circuit.depth, (s + n - 1) % n);
                ops::trace_product(rho, &h).re
            })
            .collect();
        let ground_energy = lattice::prefactor(n) * ops::pairwise_sum(&term_values);
        Self {
            circuit,
            pyramid,
            term_values,
            ground_energy,
        }
    }

    pub fn circuit(&self) -> &Circuit<'a> {
        &self.circuit
    }

    pub fn depth(&self) -> usize {
        self.circuit.depth
    }

    pub fn sites(&self) -> usize {
        self.circuit.sites()
    }

    pub fn pyramid(&self) -> &GroundPyramid {
        &self.pyramid
    }

    /// `(N / 4 pi) sum_s <h_s>` of the unflipped state.
    pub fn ground_energy(&self) -> f64 {
        self.ground_energy
    }

    /// `<h_s>` of the unflipped state for every `s`.
    pub fn term_values(&self) -> &[f64] {
        &self.term_values
    }

    fn window_rdm(&self, level: usize, start: usize, ctx: &mut FlipContext<'_>) -> CMat {
        let n = 1usize << level;
        let sites = window_sites(start, n);
        if level == CORE_LEVEL || !ctx.flips.touches(level, &sites) {
            return self.pyramid.window(level, start).clone();
        }
        if let Some(rho) = ctx.memo.get(&(level, start)) {
            return rho.clone();
        }
        let sup = Support::new(&sites, n);
        let np = n / 2;
        let a = containing_window(&sup.parents, np).expect("parents fit a window");
        let parent = self.window_rdm(level - 1, a, ctx);
        let rho_p = ops::partial_trace(&parent, 3, &positions_in(&window_sites(a, np), &sup.parents));
        let rho = descend_step(&rho_p, &sup, level - 1, self.circuit.gates, ctx.flips);
        ctx.memo.insert((level, start), rho.clone());
        rho
    }

    /// Reduced density matrix of an arbitrary ordered site set at `level`.
    fn set_rdm(&self, level: usize, sites: &[usize], ctx: &mut FlipContext<'_>) -> Result<CMat> {
        let n = 1usize << level;
        if let Some(a) = containing_window(sites, n) {
            let rho = self.window_rdm(level, a, ctx);
            return Ok(ops::partial_trace(&rho, 3, &positions_in(&window_sites(a, n), sites)));
        }
        if level == CORE_LEVEL {
            return Ok(ops::reduced_density(self.circuit.core, 4, sites));
        }
        let sup = Support::new(sites, n);
        if sup.extended.len() > MAX_REGISTER {
            return Err(Error::Capacity(format!(
                "descent register of {} sites exceeds {MAX_REGISTER}",
                sup.extended.len()
            )));
        }
        let rho_p = self.set_rdm(level - 1, &sup.parents, ctx)?;
        Ok(descend_step(&rho_p, &sup, level - 1, self.circuit.gates, ctx.flips))
    }

    /// Boundary reduced density matrix of the flipped state on `sites`.
    pub fn reduced_density(&self, flips: &FlipSet, sites: &[usize]) -> Result<CMat> {
        let n = self.sites();
        if let Some(&bad) = sites.iter().find(|&&s| s >= n) {
            return Err(Error::Index { index: bad, size: n });
        }
        let mut ctx = FlipContext {
            flips,
            memo: HashMap::new(),
        };
        self.set_rdm(self.depth(), sites, &mut ctx)
    }

    /// `<Ψ_flips| obs |Ψ_flips>`.
    pub fn expectation(&self, flips: &FlipSet, obs: &BoundaryOperator) -> Result<f64> {
        let rho = self.reduced_density(flips, &obs.sites)?;
        let value = ops::trace_product(&rho, &obs.op);
        if value.im.abs() > 1e-10 {
            return Err(Error::NonHermitian(value.im.abs()));
        }
        Ok(value.re)
    }

    /// `<h_s>` for every term touched by the flips, as `(s, value)`.
    pub fn flipped_terms(&self, flips: &FlipSet) -> Vec<(usize, f64)> {
        let depth = self.depth();
        let n = self.sites();
        let h = lattice::energy_density();
        let mut ctx = FlipContext {
            flips,
            memo: HashMap::new(),
        };
        let mut out = Vec::new();
        for s in 0..n {
            let start = (s + n - 1) % n;
            if flips.touches(depth, &window_sites(start, n)) {
                let rho = self.window_rdm(depth, start, &mut ctx);
                out.push((s, ops::trace_product(&rho, &h).re));
            }
        }
        out
    }

    /// `<Ψ_flips|H|Ψ_flips> - E_GS`, summed over the terms inside the flip cones.
    pub fn energy_shift(&self, flips: &FlipSet) -> f64 {
        let diffs: Vec<f64> = self
            .flipped_terms(flips)
            .into_iter()
            .map(|(s, v)| v - self.term_values[s])
            .collect();
        lattice::prefactor(self.sites()) * ops::pairwise_sum(&diffs)
    }

    /// `<Ψ_flips|H|Ψ_flips>`.
    pub fn energy(&self, flips: &FlipSet) -> f64 {
        self.ground_energy + self.energy_shift(flips)
    }

    /// Connected correlator `<A B> - <A><B>` of the unflipped state.
    pub fn connected(&self, a: &BoundaryOperator, b: &BoundaryOperator) -> Result<f64> {
        if a.sites.iter().any(|s| b.sites.contains(s)) {
            return Err(Error::Parameter("correlated operators overlap".into()));
        }
        let none = FlipSet::empty();
        let mut sites = a.sites.clone();
        sites.extend_from_slice(&b.sites);
        let joint = BoundaryOperator {
            sites,
            op: ops::kron(&b.op, &a.op),
        };
        let ab = self.expectation(&none, &joint)?;
        Ok(ab - self.expectation(&none, a)? * self.expectation(&none, b)?)
    }
}

/// Core-level effective Hamiltonian, including the `N / 4 pi` prefactor.
pub fn effective_hamiltonian(circuit: &Circuit<'_>, flips: &FlipSet) -> Result<CMat> {
    let depth = circuit.depth;
    let n = circuit.sites();
    let h = lattice::energy_density();
    // the term centered at s lives on the window starting at s - 1
    let mut windows: Vec<CMat> = (0..n).map(|_| h.clone()).collect();
    for level in (CORE_LEVEL + 1..=depth).rev() {
        let nc = 1usize << level;
        let np = nc / 2;
        let lifted: Vec<(usize, CMat)> = windows
            .par_iter()
            .enumerate()
            .map(|(j, op)| {
                let sup = Support::new(&window_sites(j, nc), nc);
                let up = ascend_step(op, &sup, level - 1, circuit.gates, flips);
                let a = containing_window(&sup.parents, np).expect("parents fit a window");
                let pos = positions_in(&window_sites(a, np), &sup.parents);
                (a, ops::embed_on(&up, &pos, 3))
            })
            .collect();
        let mut next: Vec<CMat> = (0..np).map(|_| CMat::zeros(8, 8)).collect();
        for (a, op) in lifted {
            next[a] += op;
        }
        windows = next;
    }
    let mut total = CMat::zeros(16, 16);
    for (a, op) in windows.iter().enumerate() {
        total += ops::embed_on(op, &window_sites(a, 4), 4);
    }
    Ok(ops::scale(&total, C64::new(lattice::prefactor(n), 0.0)))
}

/// `<core| H_eff |core>`: the energy by the ascending route.
pub fn ascending_energy(circuit: &Circuit<'_>, flips: &FlipSet) -> Result<f64> {
    let h_eff = effective_hamiltonian(circuit, flips)?;
    let core = circuit.core;
    let hv: Vec<C64> = (0..16)
        .map(|r| (0..16).map(|c| h_eff[(r, c)] * core[c]).sum())
        .collect();
    Ok(ops::inner(core, &hv).re)
}

/// Engine expectations compared against the statevector oracle.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CrossCheck {
    pub sites: usize,
    pub engine_ground: f64,
    pub oracle_ground: f64,
    pub singles: usize,
    pub pairs: usize,
    /// Largest `|engine - oracle|` over the ground state, every single and every pair insertion.
    pub max_diff: f64,
}

/// Ground energy, `E_1h` at every coordinate and `E_2h` at every pair, engine versus oracle.
pub fn crosscheck(circuit: &Circuit<'_>) -> Result<CrossCheck> {
    let depth = circuit.depth;
    let engine = Engine::new(*circuit);
    let oracle = |flips: &FlipSet| -> Result<f64> {
        crate::mera::statevector_energy(&crate::mera::statevector(circuit, flips)?)
    };
    let none = FlipSet::empty();
    let engine_ground = engine.energy(&none);
    let oracle_ground = oracle(&none)?;
    let coords: Vec<BulkCoordinate> = (CORE_LEVEL..depth)
        .flat_map(|rho| (0..1usize << rho).map(move |s| BulkCoordinate { rho, s }))
        .collect();
    let mut sets: Vec<FlipSet> = coords.iter().map(|c| FlipSet::new(&[*c], depth)).collect::<Result<_>>()?;
    let singles = sets.len();
    for (i, a) in coords.iter().enumerate() {
        for b in &coords[i + 1..] {
            sets.push(FlipSet::new(&[*a, *b], depth)?);
        }
    }
    let diffs = sets
        .par_iter()
        .map(|f| Ok((engine.energy(f) - oracle(f)?).abs()))
        .collect::<Result<Vec<f64>>>()?;
    let max_diff = diffs.into_iter().fold((engine_ground - oracle_ground).abs(), f64::max);
    Ok(CrossCheck {
        sites: circuit.sites(),
        engine_ground,
        oracle_ground,
        singles,
        pairs: sets.len() - singles,
        max_diff,
    })
}
