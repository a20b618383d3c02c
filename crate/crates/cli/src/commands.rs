use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use symspinor::distance::{geodesic_oracle, DiracVariant, DistanceProblem, Solver, SurfaceMesh};
use symspinor::fock::{level_charge, level_rank, CMatrix, FiberAlgebra, FiberOperator, LadderSign, C64, I};
use symspinor::geometry::ModelKind;
use symspinor::heat::{a_generic, a_kahler2d, a_kahler2d_exact, assemble_canonical, gilkey};
use symspinor::rational::{self, int};
use symspinor::spectrum::{cp1_coefficients, default_fit_grid, fit_asymptotics, heat_trace};
use symspinor::unrep::{
    casimir_operator, casimir_value, check_trace_pair, check_trace_rq, r_q, TraceMode, UnAlgebraElement,
};
use symspinor::{Error, Result};

use crate::config::RunConfig;

pub const SCHEMA: u32 = 1;
const DRAWS: usize = 10;
const A4_MARKER: &str = "not provided by paper: a4 with torsion needs the bundle curvature";

pub struct Outcome {
    pub report: Value,
    pub pass: bool,
    /// Plot-ready table written next to the JSON report.
    pub csv: Option<String>,
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

struct Checks {
    tol: f64,
    list: Vec<Value>,
    pass: bool,
}

impl Checks {
    fn push(&mut self, name: &str, n: usize, l: Option<usize>, residual: f64) {
        let ok = residual <= self.tol;
        self.pass &= ok;
        let mut entry = json!({ "name": name, "n": n, "residual": residual, "pass": ok });
        if let Some(l) = l {
            entry["l"] = json!(l);
        }
        self.list.push(entry);
    }
}

pub fn verify_algebra(cfg: &RunConfig) -> Result<Outcome> {
    let cutoff = cfg.cutoff.unwrap_or(8);
    let max_l = cfg.l.unwrap_or(3);
    let tol = cfg.tol.unwrap_or(1e-10);
    // pair traces use degree-four products, so the top traced level sits four below the cutoff
    if cutoff < max_l + 4 {
        return Err(Error::InsufficientCutoff {
            cutoff,
            required: max_l + 4,
        });
    }
    let ns: Vec<usize> = match cfg.n {
        Some(n) => vec![n],
        None => vec![1, 2, 3],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Checks {
        tol,
        list: Vec::new(),
        pass: true,
    };
    for &n in &ns {
        let alg = FiberAlgebra::with_cutoff(n, cutoff)?;
        let basis = alg.basis().clone();
        let id = FiberOperator::identity(&basis);

        let mut rank = 0.0_f64;
        for l in 0..=cutoff {
            rank = rank.max((basis.level_range(l)?.len() as f64 - level_rank(n, l) as f64).abs());
        }
        checks.push("rank", n, None, rank);

        let h = alg.hamiltonian();
        let mut spectrum = 0.0_f64;
        for l in 0..=h.guard_level().unwrap_or(0) {
            let blk = h.level_block(l)?;
            let want = CMatrix::identity(blk.nrows(), blk.nrows()) * C64::new(level_charge(n, l), 0.0);
            spectrum = spectrum.max(max_abs(&(blk - want)));
        }
        checks.push("hamiltonian-spectrum", n, None, spectrum);

        let ground = basis.basis_vector(&vec![0; n])?;
        let mut ladder = 0.0_f64;
        for j in 0..n {
            ladder = ladder.max(alg.ladder(j, LadderSign::Plus)?.apply(&ground).norm());
        }
        checks.push("ladder-annihilates-ground", n, None, ladder);

        let (mut clifford, mut homomorphism) = (0.0_f64, 0.0_f64);
        for _ in 0..DRAWS {
            let v = random_vector(&mut rng, 2 * n);
            let w = random_vector(&mut rng, 2 * n);
            let omega: f64 = (0..n).map(|j| v[j] * w[j + n] - v[j + n] * w[j]).sum();
            let lhs = alg
                .clifford_components(&v)?
                .commutator(&alg.clifford_components(&w)?);
            clifford = clifford.max(lhs.guarded_residual(&id.scale(-I * omega))?);

            let a = UnAlgebraElement::random(n, &mut rng);
            let b = UnAlgebraElement::random(n, &mut rng);
            let lhs = r_q(&alg, &a)?.commutator(&r_q(&alg, &b)?);
            homomorphism = homomorphism.max(lhs.guarded_residual(&r_q(&alg, &a.commutator(&b))?)?);
        }
        checks.push("clifford-relation", n, None, clifford);
        checks.push("rq-homomorphism", n, None, homomorphism);

        let casimir = if n >= 2 {
            Some(casimir_operator(&alg)?)
        } else {
            None
        };
        for l in 1..=max_l {
            let (mut single, mut pair) = (0.0_f64, 0.0_f64);
            for _ in 0..DRAWS {
                let a = UnAlgebraElement::random(n, &mut rng);
                let b = UnAlgebraElement::random(n, &mut rng);
                single = single.max(check_trace_rq(&alg, &a, l)?.residual);
                for mode in [TraceMode::U1, TraceMode::Traceless, TraceMode::Full] {
                    pair = pair.max(check_trace_pair(&alg, &a, &b, l, mode)?.residual);
                }
            }
            checks.push("trace-rq", n, Some(l), single);
            checks.push("trace-pair", n, Some(l), pair);
            if let Some(cas) = &casimir {
                let blk = cas.level_block(l)?;
                let c = rational::to_f64(&casimir_value(n, l)?);
                let want = CMatrix::identity(blk.nrows(), blk.nrows()) * C64::new(c, 0.0);
                checks.push("casimir", n, Some(l), max_abs(&(blk - want)));
            }
        }
    }
    Ok(Outcome {
        report: json!({
            "schema": SCHEMA,
            "command": "verify-algebra",
            "cutoff": cutoff,
            "max_level": max_l,
            "seed": cfg.seed,
            "tol": tol,
            "checks": checks.list,
            "pass": checks.pass,
        }),
        pass: checks.pass,
        csv: None,
    })
}

fn is_cp1(kind: &ModelKind) -> bool {
    *kind == ModelKind::cp1()
}

pub fn heat(cfg: &RunConfig) -> Result<Outcome> {
    let preset = cfg.preset("cp1")?;
    let model = preset.build()?;
    let n = model.n();
    let l = cfg.l.unwrap_or(0);
    let tol = cfg.tol.unwrap_or(1e-8);
    let ints = model.invariant_integrals()?;
    let (g0, g2) = a_generic(n, l, &ints);
    let two_dim = if n == 1 { a_kahler2d(l, &ints).ok() } else { None };
    let assembled = gilkey(&assemble_canonical(&model, l)?)?;

    let (a0, a2, method) = match two_dim {
        Some((k0, k2, _)) => (k0, k2, "kahler-2d"),
        None => (g0, g2, "generic"),
    };
    let a4 = two_dim.map(|t| t.2).or(assembled.a4);
    let discrepancy = (assembled.a0 - a0).abs().max((assembled.a2 - a2).abs());
    let a4_gap = match (two_dim, assembled.a4) {
        (Some((_, _, k4)), Some(s4)) => (k4 - s4).abs(),
        _ => 0.0,
    };
    let pass = discrepancy.max(a4_gap) <= tol;

    let mut report = json!({
        "schema": SCHEMA,
        "command": "heat",
        "model": preset.kind,
        "n": n,
        "l": l,
        "a0": a0,
        "a2": a2,
        "method": method,
        "paths": {
            "closed_form": { "a0": g0, "a2": g2 },
            "gilkey_assembled": { "a0": assembled.a0, "a2": assembled.a2, "a4": assembled.a4 },
        },
        "discrepancy": discrepancy.max(a4_gap),
        "tol": tol,
        "pass": pass,
    });
    match a4 {
        Some(v) => report["a4"] = json!(v),
        None => report["a4"] = json!(A4_MARKER),
    }
    if let Some((k0, k2, k4)) = two_dim {
        report["paths"]["kahler_2d"] = json!({ "a0": k0, "a2": k2, "a4": k4 });
    }
    if is_cp1(model.kind()) {
        // vol = π, ∫ρ = 8π, ∫ρ² = 64π, all in units of π
        let exact = a_kahler2d_exact(l, &int(1), &int(8), &int(64));
        report["exact"] = json!(exact.iter().map(rational::to_string).collect::<Vec<_>>());
    }
    Ok(Outcome {
        report,
        pass,
        csv: None,
    })
}

pub fn cp1(cfg: &RunConfig) -> Result<Outcome> {
    let l = cfg.l.unwrap_or(0) as u64;
    let tol = cfg.tol.unwrap_or(1e-6);
    let grid = cfg.t_grid.clone().unwrap_or_else(|| default_fit_grid(l));
    let exact = cp1_coefficients(l, 1)?;
    let exact = &exact[..3];
    let fit = fit_asymptotics(l, &grid)?;
    let fitted = fit.leading();
    let rel: Vec<f64> = fitted
        .iter()
        .zip(exact)
        .map(|(f, e)| {
            let e = rational::to_f64(e);
            (f - e).abs() / e.abs()
        })
        .collect();
    let pass = rel.iter().all(|r| *r <= tol);
    let mut csv = String::from("t,K\n");
    for &t in &grid {
        let k = heat_trace(l, t, 1e-14)?;
        csv.push_str(&format!("{t:e},{:.17e}\n", k.value));
    }
    Ok(Outcome {
        report: json!({
            "schema": SCHEMA,
            "command": "cp1",
            "l": l,
            "exact": exact.iter().map(rational::to_string).collect::<Vec<_>>(),
            "fitted": fitted,
            "rel_err": rel,
            "condition": fit.condition,
            "t_grid": grid,
            "tol": tol,
            "pass": pass,
        }),
        pass,
        csv: Some(csv),
    })
}

/// Vertex pair for a run: the nearest vertices to the requested points, or a
/// default pair that is exact on every mesh in the ladder.
fn endpoints(mesh: &SurfaceMesh, points: Option<[[f64; 2]; 2]>) -> Result<(usize, usize)> {
    match points {
        Some([p, q]) => Ok((mesh.nearest_vertex(&p)?, mesh.nearest_vertex(&q)?)),
        None if mesh.is_sphere() => {
            // antipodal pair on the offset latitude grid
            let row = mesh.rows() / 4;
            Ok((
                row * mesh.cols(),
                (mesh.rows() - 1 - row) * mesh.cols() + mesh.cols() / 2,
            ))
        }
        None => Ok((
            mesh.nearest_vertex(&[0.0, 0.0])?,
            mesh.nearest_vertex(&[0.5, 0.0])?,
        )),
    }
}

fn relative(d: f64, exact: f64) -> f64 {
    if exact > 0.0 {
        (d - exact).abs() / exact
    } else {
        (d - exact).abs()
    }
}

pub fn distance(cfg: &RunConfig) -> Result<Outcome> {
    let preset = cfg.preset("torus")?;
    let model = preset.build()?;
    if model.dim() != 2 {
        return Err(Error::UnsupportedModel(format!(
            "distance needs a surface, {} has dimension {}",
            preset.kind,
            model.dim()
        )));
    }
    let finest = cfg.mesh.unwrap_or(64);
    let tol = cfg.tol.unwrap_or(0.02);
    let mut ladder: Vec<usize> = [finest / 4, finest / 2, finest]
        .into_iter()
        .filter(|&r| r >= 4)
        .collect();
    ladder.dedup();
    if ladder.is_empty() {
        return Err(Error::Config(format!("mesh resolution {finest} is below 4")));
    }

    let mut levels = Vec::new();
    let mut top = None;
    for &res in &ladder {
        let mesh = SurfaceMesh::new(&model, res)?;
        let (x, y) = endpoints(&mesh, cfg.points)?;
        let (vx, vy) = (mesh.vertex(x), mesh.vertex(y));
        let exact = geodesic_oracle(&model, &vx, &vy)?;
        let mut problem = DistanceProblem::standard(&mesh)?;
        let mut runs = Vec::new();
        let mut by_variant = [0.0; 2];
        for (vi, variant) in [DiracVariant::Metric, DiracVariant::Symplectic]
            .into_iter()
            .enumerate()
        {
            problem.variant = variant;
            for solver in [Solver::LipschitzGraph, Solver::ProjectedAscent] {
                let d = problem.solve(x, y, solver)?.distance;
                if solver == Solver::ProjectedAscent {
                    by_variant[vi] = d;
                }
                runs.push(json!({
                    "solver": format!("{solver:?}"),
                    "variant": format!("{variant:?}"),
                    "d_spectral": d,
                    "rel_err": relative(d, exact),
                }));
            }
        }
        let variant_gap = relative(by_variant[1], by_variant[0]);
        levels.push(json!({
            "resolution": res,
            "h": mesh.spacing()[0],
            "x": vx,
            "y": vy,
            "d_geodesic": exact,
            "variant_gap": variant_gap,
            "runs": runs,
        }));
        top = Some((mesh.spacing()[0], vx, vy, by_variant[0], exact, variant_gap));
    }
    let (h, vx, vy, d, exact, gap) = top.expect("ladder is not empty");
    let rel_err = relative(d, exact);
    let pass = rel_err <= tol && gap <= 1e-3;
    Ok(Outcome {
        report: json!({
            "schema": SCHEMA,
            "command": "distance",
            "model": preset.kind,
            "h": h,
            "x": vx,
            "y": vy,
            "d_spectral": d,
            "d_geodesic": exact,
            "rel_err": rel_err,
            "tol": tol,
            "refinement": levels,
            "pass": pass,
        }),
        pass,
        csv: None,
    })
}
