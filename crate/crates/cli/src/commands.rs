//! One function per subcommand; each writes its artifacts and returns a JSON summary.

use crate::config::Config;
use crate::error::CliError;
use crate::output::{float, read_columns, Artifacts};
use holomera::ascension::{
    build_superoperator, cached_superoperator, coefficient_protocol, fixed_point_energy_density, FlipPlacement,
    Variant, GROUP_TOL,
};
use holomera::engine::{crosscheck, BoundaryOperator, Engine};
use holomera::fitting::{collapse_quality, fit_single_particle, fit_tail, fit_w};
use holomera::gravity::{self, AdSParams};
use holomera::hologron::{
    angular_potential, collapse_family, default_dmax, radial_potential, single_energy, PotentialCurve, RadialRange,
    ANGULAR_MIN_RHO,
};
use holomera::lattice;
use holomera::mera::{analytic_gates, gauge_transform, BulkCoordinate, GateSet, MeraNetwork, OverlapConvention, CORE_LEVEL};
use holomera::noise::{dephasing_fidelity, fidelity_estimate, noisy_potential, radial_pairs, NoiseKind, NoiseModel};
use holomera::ops::Pauli;
use serde_json::{json, Value};
use std::path::PathBuf;

/// Sites accepted by `verify-ed`.
pub const VERIFY_MAX_SITES: usize = 16;

pub const CACHE_ENV: &str = "HOLOMERA_CACHE";

pub struct Ctx {
    pub cfg: Config,
    pub out: Artifacts,
}

impl Ctx {
    fn network(&self) -> Result<MeraNetwork, CliError> {
        Ok(MeraNetwork::with_gauge(self.cfg.depth()?, self.cfg.gauge()?.gauge())?)
    }

    fn gates(&self) -> Result<GateSet, CliError> {
        Ok(gauge_transform(&analytic_gates(), &self.cfg.gauge()?.gauge()))
    }

    fn range(&self, depth: usize, lo_default: usize) -> Result<RadialRange, CliError> {
        let range = RadialRange {
            lo: self.cfg.get_or("rho_min", lo_default)?,
            hi: self.cfg.get_or("rho_max", depth - 1)?,
        };
        range.validate(depth)?;
        Ok(range)
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

pub fn gs_energy(ctx: &mut Ctx) -> Result<Value, CliError> {
    let net = ctx.network()?;
    let engine = Engine::new(net.circuit());
    let n = net.sites();
    let energy = engine.ground_energy();
    let density = energy / (lattice::prefactor(n) * n as f64);
    let s3 = build_superoperator(3, Variant::Average, net.gates())?.eigendecompose()?;
    let fixed_point = fixed_point_energy_density(&s3)?;
    let (ed_energy, ed_density, overlap) = if n <= VERIFY_MAX_SITES {
        let gs = lattice::ed_ground(n)?;
        (Some(gs.energy), Some(gs.density()), Some(net.overlap(OverlapConvention::PerSite)?))
    } else {
        (None, None, None)
    };
    let row = vec![
        net.depth().to_string(),
        n.to_string(),
        float(energy),
        float(density),
        float(fixed_point),
        opt(ed_energy),
        opt(ed_density),
        opt(overlap),
    ];
    let header = [
        "depth",
        "sites",
        "energy",
        "density",
        "fixed_point_density",
        "ed_energy",
        "ed_density",
        "overlap_per_site",
    ];
    ctx.out.csv("gs-energy.csv", &header, &[row])?;
    Ok(json!({
        "sites": n,
        "energy": energy,
        "density": density,
        "fixed_point_density": fixed_point,
        "ed_energy": ed_energy,
        "overlap_per_site": overlap,
    }))
}

pub fn correlators(ctx: &mut Ctx) -> Result<Value, CliError> {
    let net = ctx.network()?;
    let engine = Engine::new(net.circuit());
    let n = net.sites();
    let mut rows = Vec::new();
    for r in 1..=n / 2 {
        let mut row = vec![r.to_string()];
        for p in [Pauli::X, Pauli::Z] {
            let a = BoundaryOperator::new(vec![0], p.matrix())?;
            let b = BoundaryOperator::new(vec![r], p.matrix())?;
            row.push(float(engine.connected(&a, &b)?));
        }
        rows.push(row);
    }
    ctx.out.csv("correlators.csv", &["r", "xx", "zz"], &rows)?;
    Ok(json!({ "sites": n, "distances": rows.len() }))
}

pub fn spectrum(ctx: &mut Ctx) -> Result<Value, CliError> {
    let k: usize = ctx.cfg.get("k")?;
    let variant = Variant::parse(ctx.cfg.raw("variant"))?;
    let gates = ctx.gates()?;
    let sup = match std::env::var_os(CACHE_ENV) {
        Some(dir) => cached_superoperator(k, variant, &gates, &PathBuf::from(dir))?,
        None => build_superoperator(k, variant, &gates)?,
    };
    let name = format!("spectrum-k{k}-{}", variant.label());
    let header = ["index", "lambda_re", "lambda_im", "abs_lambda", "delta", "charge"];
    let mut summary = json!({ "k": k, "variant": variant.label() });
    let rows: Vec<Vec<String>> = if k <= 5 {
        let sp = sup.eigendecompose()?;
        let groups: Vec<Value> = sp
            .grouped(GROUP_TOL)
            .into_iter()
            .take(12)
            .map(|g| json!({ "delta": g.delta, "multiplicity": g.members.len() }))
            .collect();
        summary["groups"] = json!(groups);
        summary["condition"] = json!(sp.condition);
        summary["warnings"] = json!(sp.warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>());
        summary["biorthonormality_residual"] = json!(sp.biorthonormality_residual());
        sp.entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                vec![
                    i.to_string(),
                    float(e.lambda.re),
                    float(e.lambda.im),
                    float(e.lambda.norm()),
                    float(e.delta),
                    e.charge.to_string(),
                ]
            })
            .collect()
    } else {
        sup.charged_eigenvalues()?
            .into_iter()
            .enumerate()
            .map(|(i, (l, c))| {
                vec![
                    i.to_string(),
                    float(l.re),
                    float(l.im),
                    float(l.norm()),
                    float(holomera::ascension::dimension_of(l)),
                    c.to_string(),
                ]
            })
            .collect()
    };
    ctx.out.csv(&format!("{name}.csv"), &header, &rows)?;
    if ctx.cfg.flag("coefficients")? {
        if k != 5 {
            return Err(CliError::Config("coefficients are extracted from the five-site spectrum".into()));
        }
        let pl: Vec<usize> = ctx.cfg.list("placement")?;
        if pl.len() != 2 {
            return Err(CliError::Config("placement needs two offsets".into()));
        }
        let table = coefficient_protocol(
            &gates,
            FlipPlacement {
                first: pl[0],
                second: pl[1],
            },
        )?;
        let value = serde_json::to_value(&table).map_err(|e| CliError::Config(e.to_string()))?;
        ctx.out.json("coefficients.json", value.clone())?;
        summary["coefficients"] = value;
    }
    summary["eigenvalues"] = json!(rows.len());
    Ok(summary)
}

pub fn hologron_1(ctx: &mut Ctx) -> Result<Value, CliError> {
    let net = ctx.network()?;
    let depth = net.depth();
    let engine = Engine::new(net.circuit());
    let range = ctx.range(depth, CORE_LEVEL)?;
    let root = BulkCoordinate::new(CORE_LEVEL, ctx.cfg.get("base")?, depth)?;
    let mut rows = Vec::new();
    for rho in range.lo..=range.hi {
        let x = root.lineage_at(rho);
        let e = single_energy(&engine, x)?;
        rows.push(vec![rho.to_string(), x.s.to_string(), x.rho_hat(depth).to_string(), float(e)]);
    }
    ctx.out.csv("hologron-1.csv", &["rho", "s", "rho_hat", "e1h"], &rows)?;
    Ok(json!({ "depth": depth, "points": rows.len() }))
}

const PAIR_HEADER: [&str; 10] = ["rho1", "s1", "rho2", "s2", "d", "e1", "e2", "e2h", "v", "collapsed"];

fn pair_rows(curve: &PotentialCurve) -> Vec<Vec<String>> {
    curve
        .points
        .iter()
        .map(|p| {
            vec![
                p.x1.rho.to_string(),
                p.x1.s.to_string(),
                p.x2.rho.to_string(),
                p.x2.s.to_string(),
                p.radial_separation().to_string(),
                float(p.e1),
                float(p.e2),
                float(p.pair),
                float(p.v),
                float(p.collapsed),
            ]
        })
        .collect()
}

pub fn hologron_2(ctx: &mut Ctx) -> Result<Value, CliError> {
    let net = ctx.network()?;
    let depth = net.depth();
    let engine = Engine::new(net.circuit());
    match ctx.cfg.raw("mode") {
        "radial" => {
            let range = ctx.range(depth, CORE_LEVEL)?;
            let curve = radial_potential(&engine, range, ctx.cfg.get("base")?)?;
            ctx.out.csv("hologron-2-radial.csv", &PAIR_HEADER, &pair_rows(&curve))?;
            Ok(json!({ "mode": "radial", "points": curve.points.len() }))
        }
        "angular" => {
            let ds: usize = ctx.cfg.get("ds")?;
            let range = ctx.range(depth, ANGULAR_MIN_RHO.min(depth - 1))?;
            let curve = angular_potential(&engine, range, ds, ctx.cfg.get("s")?)?;
            let max_abs = curve.points.iter().map(|p| p.v.abs()).fold(0.0, f64::max);
            ctx.out
                .csv(&format!("hologron-2-angular-ds{ds}.csv"), &PAIR_HEADER, &pair_rows(&curve))?;
            Ok(json!({ "mode": "angular", "ds": ds, "points": curve.points.len(), "max_abs_v": max_abs }))
        }
        other => Err(CliError::Config(format!("mode must be radial or angular, got {other:?}"))),
    }
}

pub fn collapse(ctx: &mut Ctx) -> Result<Value, CliError> {
    let net = ctx.network()?;
    let depth = net.depth();
    let engine = Engine::new(net.circuit());
    let range = ctx.range(depth, CORE_LEVEL)?;
    let curve = radial_potential(&engine, range, ctx.cfg.get("base")?)?;
    let fam = collapse_family(&curve, ctx.cfg.get_or("dmax", default_dmax(depth))?)?;
    let quality = collapse_quality(&fam.raw, &fam.collapsed)?;
    let mut rows = Vec::new();
    for (i, r) in fam.inner.iter().enumerate() {
        for d in 1..=fam.dmax {
            rows.push(vec![
                r.to_string(),
                d.to_string(),
                float(fam.raw[i][d - 1]),
                float(fam.collapsed[i][d - 1]),
            ]);
        }
    }
    ctx.out.csv("collapse.csv", &["inner", "d", "raw", "collapsed"], &rows)?;
    let summary = json!({ "quality": quality, "dmax": fam.dmax, "inner": fam.inner });
    ctx.out.json("collapse.json", summary.clone())?;
    Ok(summary)
}

fn fixed_ell(ctx: &Ctx) -> Result<f64, CliError> {
    if !ctx.cfg.raw("ell").is_empty() {
        return ctx.cfg.get("ell");
    }
    let path = ctx.out.dir().join("fit-1p.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|_| CliError::Config("set ell or run fit --model 1p first".into()))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let names = doc["result"]["names"].as_array().cloned().unwrap_or_default();
    let idx = names
        .iter()
        .position(|n| n == "ell")
        .ok_or_else(|| CliError::Config(format!("{} has no ell parameter", path.display())))?;
    doc["result"]["params"][idx]
        .as_f64()
        .ok_or_else(|| CliError::Config(format!("{} has a malformed ell", path.display())))
}

pub fn fit(ctx: &mut Ctx) -> Result<Value, CliError> {
    let model = ctx.cfg.raw("model").to_string();
    let input = |default: &str| ctx.cfg.optional_path("input").unwrap_or_else(|| ctx.out.dir().join(default));
    let result = match model.as_str() {
        "1p" => {
            let pts = read_columns(&input("hologron-1.csv"), "rho", "e1h")?;
            let top = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            fit_single_particle(&pts, ctx.cfg.get("fit_lo")?, ctx.cfg.get_or("fit_hi", top - 1.0)?)?
        }
        "tail" | "W" => {
            let pts = read_columns(&input("hologron-2-radial.csv"), "d", "collapsed")?;
            let ell = fixed_ell(ctx)?;
            let dmax = ctx.cfg.get("fit_dmax")?;
            if model == "tail" {
                fit_tail(&pts, ell, ctx.cfg.get_or("fit_dmin", 3.0)?, dmax)?
            } else {
                fit_w(&pts, ell, ctx.cfg.get_or("fit_dmin", 1.0)?, dmax)?
            }
        }
        other => return Err(CliError::Config(format!("model must be 1p, tail or W, got {other:?}"))),
    };
    let value = serde_json::to_value(&result).map_err(|e| CliError::Config(e.to_string()))?;
    ctx.out.json(&format!("fit-{model}.json"), value.clone())?;
    Ok(value)
}

pub fn ads_predict(ctx: &mut Ctx) -> Result<Value, CliError> {
    let c = &ctx.cfg;
    let p = AdSParams::new(
        c.get("ads_ell")?,
        c.get("mass")?,
        c.get("newton_g")?,
        c.get("circumference")?,
        c.get("velocity")?,
    )?;
    let points: usize = c.get("ads_points")?;
    if points < 2 {
        return Err(CliError::Config("ads_points must be at least 2".into()));
    }
    let rho_max: f64 = c.get("ads_rho_max")?;
    let rho_ref: f64 = c.get("rho_ref")?;
    let arclength: f64 = c.get("arclength")?;
    let rows: Vec<Vec<String>> = (0..points)
        .map(|i| {
            let rho = rho_max * i as f64 / (points - 1) as f64;
            let e = gravity::one_particle_energy(&p, rho, 0.0, 0.0).ok();
            let btz = gravity::btz_energy(&p, rho, 0.0, 0.0).ok();
            vec![
                float(rho),
                opt(e),
                opt(btz),
                float(gravity::btz_energy_expansion(&p, rho)),
                float(gravity::boost_factor(&p, rho, rho_ref)),
                float(gravity::boost_factor_asymptotic(&p, rho, rho_ref)),
                float(gravity::radial_gravity_potential(&p, rho, rho_ref)),
                float(gravity::radial_gravity_potential_asymptotic(&p, rho, rho_ref)),
                float(gravity::angular_gravity_potential(&p, rho, arclength)),
            ]
        })
        .collect();
    let header = [
        "rho",
        "e_single",
        "e_btz",
        "e_btz_expansion",
        "boost",
        "boost_asymptotic",
        "v_radial",
        "v_radial_asymptotic",
        "v_angular",
    ];
    ctx.out.csv("ads-predict.csv", &header, &rows)?;
    Ok(json!({
        "c": p.c(),
        "angular_zero_crossing": gravity::angular_zero_crossing() * p.ell,
        "points": points,
    }))
}

pub fn noise_sweep(ctx: &mut Ctx) -> Result<Value, CliError> {
    let net = ctx.network()?;
    let depth = net.depth();
    let kind = ctx.cfg.noise_kind()?;
    let seed: u64 = ctx.cfg.get("seed")?;
    let samples: usize = ctx.cfg.get("samples")?;
    let fid_samples: usize = ctx.cfg.get("fidelity_samples")?;
    if samples == 0 || fid_samples == 0 {
        return Err(CliError::Config("sample counts must be positive".into()));
    }
    let range = ctx.range(depth, CORE_LEVEL)?;
    let pairs = radial_pairs(depth, range.lo, range.hi, ctx.cfg.get("base")?)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for eps in ctx.cfg.list::<f64>("epsilon")? {
        let model = NoiseModel::new(kind, eps, seed)?;
        let (f, f_se) = fidelity_estimate(&model, net.gates().u(), fid_samples);
        let f_closed = (kind == NoiseKind::Dephasing).then(|| dephasing_fidelity(eps));
        let curve = noisy_potential(&net, &model, &pairs, samples)?;
        for p in &curve.points {
            rows.push(vec![
                float(eps),
                float(f),
                p.x1.rho.to_string(),
                p.x2.rho.to_string(),
                float(p.v_mean),
                float(p.v_stderr),
                samples.to_string(),
                seed.to_string(),
                float(f_se),
                opt(f_closed),
                float(p.collapsed),
                float(p.collapsed_stderr),
            ]);
        }
        let quality = collapse_family(&curve.mean_curve(), default_dmax(depth))
            .and_then(|fam| collapse_quality(&fam.raw, &fam.collapsed))
            .ok();
        summary.push(json!({
            "epsilon": eps,
            "fidelity": f,
            "fidelity_stderr": f_se,
            "fidelity_closed_form": f_closed,
            "collapse_quality": quality,
        }));
    }
    let header = [
        "epsilon",
        "F_estimate",
        "rho1",
        "rho2",
        "V_mean",
        "V_stderr",
        "n_samples",
        "seed",
        "F_stderr",
        "F_closed",
        "collapsed",
        "collapsed_stderr",
    ];
    ctx.out.csv("noise-sweep.csv", &header, &rows)?;
    let value = json!(summary);
    ctx.out.json("noise-sweep.json", value.clone())?;
    Ok(value)
}

pub fn verify_ed(ctx: &mut Ctx) -> Result<Value, CliError> {
    let n: usize = ctx.cfg.get("n")?;
    if n > VERIFY_MAX_SITES {
        return Err(CliError::Capacity(format!(
            "verify-ed supports at most {VERIFY_MAX_SITES} sites, requested {n}"
        )));
    }
    if !n.is_power_of_two() || n < 1 << crate::config::MIN_DEPTH {
        return Err(CliError::Config(format!("n must be a power of two between 8 and {VERIFY_MAX_SITES}, got {n}")));
    }
    let tol: f64 = ctx.cfg.get("tolerance")?;
    let net = MeraNetwork::with_gauge(n.trailing_zeros() as usize, ctx.cfg.gauge()?.gauge())?;
    let report = crosscheck(&net.circuit())?;
    let ed = lattice::ed_ground(n)?;
    let overlap = net.overlap(OverlapConvention::PerSite)?;
    let value = json!({
        "sites": n,
        "engine_ground": report.engine_ground,
        "oracle_ground": report.oracle_ground,
        "singles": report.singles,
        "pairs": report.pairs,
        "max_diff": report.max_diff,
        "tolerance": tol,
        "ed_energy": ed.energy,
        "overlap_per_site": overlap,
    });
    ctx.out.json("verify-ed.json", value.clone())?;
    if !(report.max_diff < tol) {
        return Err(CliError::Check(format!(
            "engine and oracle differ by {:.3e}, above {tol:.1e}",
            report.max_diff
        )));
    }
    Ok(value)
}
