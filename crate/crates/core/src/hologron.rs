//! Single- and two-hologron energies, interaction potentials and the analytic overlay.

use crate::ascension::CoefficientTable;
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::lattice;
use crate::mera::{BulkCoordinate, FlipSet, CORE_LEVEL};
use crate::ops;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// `E_1h(x) = <X_x H X_x> - E_GS`.
pub fn single_energy(engine: &Engine<'_>, x: BulkCoordinate) -> Result<f64> {
    let flips = FlipSet::new(&[x], engine.depth())?;
    Ok(engine.energy_shift(&flips))
}

/// `E_2h(x1, x2) = <X_x1 X_x2 H X_x1 X_x2> - E_GS`.
pub fn pair_energy(engine: &Engine<'_>, x1: BulkCoordinate, x2: BulkCoordinate) -> Result<f64> {
    let flips = FlipSet::new(&[x1, x2], engine.depth())?;
    Ok(engine.energy_shift(&flips))
}

/// Per-term values of `<h_s>` under `flips`, restricted to the terms those flips touch.
fn touched(engine: &Engine<'_>, flips: &FlipSet) -> HashMap<usize, f64> {
    engine.flipped_terms(flips).into_iter().collect()
}

/// `E_2h - E_1h(x1) - E_1h(x2)`, summed only over terms inside both lightcones.
pub fn interaction(engine: &Engine<'_>, x1: BulkCoordinate, x2: BulkCoordinate) -> Result<f64> {
    let depth = engine.depth();
    let both = FlipSet::new(&[x1, x2], depth)?;
    let a = touched(engine, &FlipSet::new(&[x1], depth)?);
    let b = touched(engine, &FlipSet::new(&[x2], depth)?);
    let ab = touched(engine, &both);
    let ground = engine.term_values();
    let mut diffs: Vec<(usize, f64)> = ab
        .iter()
        .filter_map(|(s, v)| match (a.get(s), b.get(s)) {
            (Some(va), Some(vb)) => Some((*s, v - va - vb + ground[*s])),
            _ => None,
        })
        .collect();
    diffs.sort_by_key(|(s, _)| *s);
    let values: Vec<f64> = diffs.into_iter().map(|(_, v)| v).collect();
    Ok(lattice::prefactor(engine.sites()) * ops::pairwise_sum(&values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialPoint {
    pub x1: BulkCoordinate,
    pub x2: BulkCoordinate,
    pub e1: f64,
    pub e2: f64,
    pub pair: f64,
    pub v: f64,
    /// `V / min(E_1h(x1), E_1h(x2))`.
    pub collapsed: f64,
}

impl PotentialPoint {
    pub fn radial_separation(&self) -> usize {
        self.x1.rho.abs_diff(self.x2.rho)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialCurve {
    pub depth: usize,
    pub points: Vec<PotentialPoint>,
}

/// Memoized single-hologron energies for one engine.
pub struct SingleEnergies<'e, 'a> {
    engine: &'e Engine<'a>,
    cache: std::sync::Mutex<HashMap<BulkCoordinate, f64>>,
}

impl<'e, 'a> SingleEnergies<'e, 'a> {
    pub fn new(engine: &'e Engine<'a>) -> Self {
        Self {
            engine,
            cache: Default::default(),
        }
    }

    pub fn get(&self, x: BulkCoordinate) -> Result<f64> {
        if let Some(v) = self.cache.lock().unwrap().get(&x) {
            return Ok(*v);
        }
        let v = single_energy(self.engine, x)?;
        self.cache.lock().unwrap().insert(x, v);
        Ok(v)
    }
}

fn point(engine: &Engine<'_>, singles: &SingleEnergies<'_, '_>, x1: BulkCoordinate, x2: BulkCoordinate) -> Result<PotentialPoint> {
    let e1 = singles.get(x1)?;
    let e2 = singles.get(x2)?;
    let v = interaction(engine, x1, x2)?;
    Ok(PotentialPoint {
        x1,
        x2,
        e1,
        e2,
        pair: e1 + e2 + v,
        v,
        collapsed: v / e1.min(e2),
    })
}

/// Radial range `[lo, hi]` clamped to valid insertion radii; defaults to `[2, D - 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadialRange {
    pub lo: usize,
    pub hi: usize,
}

impl RadialRange {
    pub fn full(depth: usize) -> Self {
        Self {
            lo: CORE_LEVEL,
            hi: depth - 1,
        }
    }

    pub fn validate(&self, depth: usize) -> Result<()> {
        if self.lo < CORE_LEVEL || self.hi >= depth || self.lo > self.hi {
            return Err(Error::Parameter(format!(
                "radial range [{}, {}] is outside [{CORE_LEVEL}, {}]",
                self.lo,
                self.hi,
                depth - 1
            )));
        }
        Ok(())
    }
}

/// All pairs `rho1 < rho2` on the ancilla-leg lineage through `(2, base)`.
pub fn radial_potential(engine: &Engine<'_>, range: RadialRange, base: usize) -> Result<PotentialCurve> {
    let depth = engine.depth();
    range.validate(depth)?;
    let root = BulkCoordinate::new(CORE_LEVEL, base, depth)?;
    let pairs: Vec<(usize, usize)> = (range.lo..=range.hi)
        .flat_map(|r1| (r1 + 1..=range.hi).map(move |r2| (r1, r2)))
        .collect();
    let singles = SingleEnergies::new(engine);
    let points = pairs
        .par_iter()
        .map(|&(r1, r2)| point(engine, &singles, root.lineage_at(r1), root.lineage_at(r2)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PotentialCurve { depth, points })
}

/// Pairs `(rho, s)` and `(rho, s + ds)` for every `rho` in range.
pub fn angular_potential(engine: &Engine<'_>, range: RadialRange, ds: usize, s: usize) -> Result<PotentialCurve> {
    let depth = engine.depth();
    range.validate(depth)?;
    if ds == 0 {
        return Err(Error::Parameter("angular separation must be positive".into()));
    }
    let lo = range.lo.max(ANGULAR_MIN_RHO);
    let singles = SingleEnergies::new(engine);
    let points = (lo..=range.hi)
        .into_par_iter()
        .map(|rho| {
            let n = 1usize << rho;
            if 2 * ds >= n {
                return Err(Error::Parameter(format!("separation {ds} wraps the ring at radius {rho}")));
            }
            let x1 = BulkCoordinate::new(rho, s % n, depth)?;
            let x2 = BulkCoordinate::new(rho, (s + ds) % n, depth)?;
            point(engine, &singles, x1, x2)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PotentialCurve { depth, points })
}

/// Smallest radius whose ring is wide enough for separations up to three.
pub const ANGULAR_MIN_RHO: usize = 3;

/// Collapsed curves `Ṽ(d)` indexed by inner radius `r`, over `d = 1..=dmax`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseFamily {
    pub dmax: usize,
    pub inner: Vec<usize>,
    /// `raw[i][d - 1]` is `V(r_i, r_i + d)`.
    pub raw: Vec<Vec<f64>>,
    /// `collapsed[i][d - 1]` is `V / min(E_1h)` at `(r_i, r_i + d)`.
    pub collapsed: Vec<Vec<f64>>,
}

/// Default `dmax = floor((D - 2) / 2)` so that every family member spans the same grid.
pub fn default_dmax(depth: usize) -> usize {
    ((depth - CORE_LEVEL) / 2).max(1)
}

pub fn collapse_family(curve: &PotentialCurve, dmax: usize) -> Result<CollapseFamily> {
    let mut table: HashMap<(usize, usize), &PotentialPoint> = HashMap::new();
    for p in &curve.points {
        let (a, b) = (p.x1.rho.min(p.x2.rho), p.x1.rho.max(p.x2.rho));
        table.insert((a, b), p);
    }
    let mut inner: Vec<usize> = table.keys().map(|k| k.0).collect();
    inner.sort_unstable();
    inner.dedup();
    inner.retain(|&r| (1..=dmax).all(|d| table.contains_key(&(r, r + d))));
    if inner.len() < 2 {
        return Err(Error::Alignment(format!("fewer than two curves span d = 1..={dmax}")));
    }
    let raw = inner
        .iter()
        .map(|&r| (1..=dmax).map(|d| table[&(r, r + d)].v).collect())
        .collect();
    let collapsed = inner
        .iter()
        .map(|&r| (1..=dmax).map(|d| table[&(r, r + d)].collapsed).collect())
        .collect();
    Ok(CollapseFamily {
        dmax,
        inner,
        raw,
        collapsed,
    })
}

/// Collapsed analytic series `Σ_α C_α exp(-(Δ_α - 1) d / ℓ)` over the tabulated operators.
pub fn analytic_collapsed(coeffs: &CoefficientTable, separation: f64, ell: f64) -> f64 {
    coeffs
        .entries
        .iter()
        .map(|e| e.c * (-(e.delta - 1.0) * separation / ell).exp())
        .sum()
}

/// `b_AdS(ρ1, ρ2) Σ_α C_α exp(-(Δ_α - 1)|ρ1 - ρ2| / ℓ)` with `b_AdS = min(e^{ρ1/ℓ}, e^{ρ2/ℓ})`.
pub fn analytic_potential(coeffs: &CoefficientTable, rho1: f64, rho2: f64, ell: f64) -> f64 {
    let b = (rho1.min(rho2) / ell).exp();
    b * analytic_collapsed(coeffs, (rho1 - rho2).abs(), ell)
}
