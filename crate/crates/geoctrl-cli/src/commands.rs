//! Subcommand implementations.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use num_rational::BigRational;
use serde_json::json;

use geoctrl::cartan::{
    prolong as prolong_chart, verify_asymmetry, verify_duality, CartanModel, DualityOptions,
    LocalLeafSpace,
};
use geoctrl::control::{
    integrate, projection_residual, quotient as quotient_system, steer_to_target, ControlSignal,
    SteeringOptions,
};
use geoctrl::extremals::{
    integrate_abnormal_rank2, integrate_normal, pmp_residual, pmp_residual_series,
    AbnormalControlMode, BiExtremalArc, EnergyCost, OptimalControlProblem, PolyRank2,
};
use geoctrl::flags::{annihilator_basis_exact, derived_flag};
use geoctrl::Error as GeoError;

use crate::Common;
use geoctrl_cli::model::{parse_model, Model};
use geoctrl_cli::output::{write_csv, write_json};

pub fn exit_code_for(err: &GeoError) -> u8 {
    match err {
        GeoError::Parse { .. } => 2,
        GeoError::DegeneratePoint { .. } | GeoError::NotAGenericPoint { .. } => 3,
        GeoError::PreconditionViolated { .. } => 4,
        GeoError::CharacteristicDegenerate { .. } | GeoError::ChartTooLarge => 5,
        _ => 1,
    }
}

fn load_model(common: &Common) -> anyhow::Result<Model> {
    let src = fs::read_to_string(&common.model)
        .with_context(|| format!("reading {}", common.model.display()))?;
    let model = parse_model(&src)?;
    if common.jobs > 0 {
        geoctrl::par::set_jobs(common.jobs).ok();
    }
    Ok(model)
}

/// Parse "a,b,c" with exact-rational entries: integers, n/d fractions and
/// finite decimals.
fn parse_rational_vec(s: &str) -> anyhow::Result<Vec<BigRational>> {
    s.split(',')
        .map(|tok| {
            let tok = tok.trim();
            if let Some((n, d)) = tok.split_once('/') {
                let n: i64 = n.trim().parse()?;
                let d: i64 = d.trim().parse()?;
                anyhow::ensure!(d != 0, "zero denominator in `{tok}`");
                Ok(BigRational::new(n.into(), d.into()))
            } else if let Some((int, frac)) = tok.split_once('.') {
                let neg = int.trim_start().starts_with('-');
                let int_part: i64 = if int == "-" || int.is_empty() {
                    0
                } else {
                    int.parse()?
                };
                let digits: u32 = frac.len() as u32;
                let frac_part: i64 = if frac.is_empty() { 0 } else { frac.parse()? };
                let denom = 10i64.pow(digits);
                let mut v =
                    BigRational::new((int_part.abs() * denom + frac_part).into(), denom.into());
                if neg || int_part < 0 {
                    v = -v;
                }
                Ok(v)
            } else {
                let n: i64 = tok.parse()?;
                Ok(BigRational::from_integer(n.into()))
            }
        })
        .collect()
}

fn parse_f64_vec(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|tok| tok.trim().parse::<f64>().map_err(Into::into))
        .collect()
}

fn rat_to_f64(v: &[BigRational]) -> Vec<f64> {
    use num_traits::ToPrimitive;
    v.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect()
}

pub fn analyze(common: &Common, point: &str, maxdepth: usize) -> anyhow::Result<ExitCode> {
    let model = load_model(common)?;
    let frame = model.main_frame()?;
    let x = parse_rational_vec(point)?;
    anyhow::ensure!(
        x.len() == model.chart.dim(),
        "point has {} coordinates, chart has {}",
        x.len(),
        model.chart.dim()
    );
    let depth = if maxdepth == 0 {
        model.chart.dim() + 2
    } else {
        maxdepth
    };
    // A frame that drops rank at the point is a degenerate input.
    let flag = derived_flag(frame, &x, depth)?;
    if flag.growth.first().copied().unwrap_or(0) < frame.len() {
        return Err(GeoError::DegeneratePoint {
            msg: format!(
                "frame rank {} < {} at the requested point",
                flag.growth.first().copied().unwrap_or(0),
                frame.len()
            ),
        }
        .into());
    }
    let cartan = model.chart.dim() == 5 && frame.len() == 2 && flag.growth == vec![2, 3, 5];
    let generating = flag.final_rank() == model.chart.dim();
    let annihilators: Vec<usize> = (1..=flag.stages.len())
        .map(|k| {
            annihilator_basis_exact(&flag, k)
                .map(|b| b.len())
                .unwrap_or(0)
        })
        .collect();
    let report = json!({
        "model": model.file.name,
        "point": point,
        "growth": flag.growth,
        "flag_complete": flag.complete,
        "is_cartan": cartan,
        "is_bracket_generating": generating,
        "annihilator_dims": annihilators,
        "ranks_exact": true,
    });
    write_json(common.out.as_deref(), &report)?;
    Ok(ExitCode::SUCCESS)
}

fn resolve_geodesic_inputs(
    model: &Model,
    kind: &str,
    point: Option<String>,
    covector: Option<String>,
    problem: Option<String>,
    horizon: f64,
    step: f64,
) -> anyhow::Result<(Vec<f64>, Vec<f64>, f64, f64)> {
    if let Some(label) = problem {
        let block = model
            .file
            .problems
            .iter()
            .find(|p| p.label == label && p.kind == kind)
            .ok_or_else(|| anyhow::anyhow!("no `{kind}` problem block labeled `{label}`"))?;
        let cov = block
            .covector
            .clone()
            .ok_or_else(|| anyhow::anyhow!("problem block `{label}` has no covector"))?;
        return Ok((block.point.clone(), cov, block.horizon, block.step));
    }
    let x0 = parse_f64_vec(&point.ok_or_else(|| anyhow::anyhow!("--point required"))?)?;
    let p0 = parse_f64_vec(&covector.ok_or_else(|| anyhow::anyhow!("--covector required"))?)?;
    Ok((x0, p0, horizon, step))
}

pub fn geodesic(
    common: &Common,
    kind: &str,
    point: Option<String>,
    covector: Option<String>,
    problem: Option<String>,
    horizon: f64,
) -> anyhow::Result<ExitCode> {
    let model = load_model(common)?;
    let frame = model.main_frame()?.clone();
    let (x0, p0, horizon, step) =
        resolve_geodesic_inputs(&model, kind, point, covector, problem, horizon, common.step)?;
    let sys = model.control_system()?;
    let prob = OptimalControlProblem::new(sys, EnergyCost::full(frame.len()))?;
    let arc: BiExtremalArc = match kind {
        "normal" => integrate_normal(&prob, &x0, &p0, horizon, step)?,
        "abnormal" => {
            anyhow::ensure!(
                frame.len() == 2,
                "abnormal integration expects a rank-2 frame"
            );
            let rank2 = PolyRank2::new(&frame[0], &frame[1])?;
            integrate_abnormal_rank2(
                &rank2,
                &x0,
                &p0,
                horizon,
                step,
                AbnormalControlMode::Characteristic,
            )?
        }
        other => anyhow::bail!("unknown geodesic kind `{other}` (use normal|abnormal)"),
    };
    let residuals = pmp_residual(&prob, &arc)?;
    let summary = json!({
        "model": model.file.name,
        "kind": kind,
        "point": x0,
        "covector": p0,
        "horizon": horizon,
        "step": step,
        "endpoint": arc.endpoint(),
        "energy": arc.energy(&prob.cost),
        "residuals": {
            "state_eq": residuals.state_eq,
            "costate_eq": residuals.costate_eq,
            "stationarity": residuals.stationarity,
            "nontriviality": residuals.nontriviality,
        },
    });
    if let Some(out) = &common.out {
        let series = pmp_residual_series(&prob, &arc)?;
        let n = prob.system.state_dim();
        let mut header: Vec<String> = vec!["t".into()];
        header.extend(model.chart.names().iter().cloned());
        header.extend(model.chart.names().iter().map(|c| format!("p_{c}")));
        header.extend((1..=arc.controls[0].len()).map(|i| format!("u{i}")));
        header.extend(
            ["res_state", "res_costate", "res_stationarity"]
                .iter()
                .map(|s| s.to_string()),
        );
        let rows = (0..arc.len()).map(|k| {
            let mut row = Vec::with_capacity(1 + 2 * n + arc.controls[k].len() + 3);
            row.push(arc.times[k]);
            row.extend_from_slice(&arc.states[k]);
            row.extend_from_slice(&arc.costates[k]);
            row.extend_from_slice(&arc.controls[k]);
            let (se, ce, st) = series[k];
            row.extend_from_slice(&[se, ce, st]);
            row
        });
        write_csv(&with_ext(out, "csv"), &header, rows)?;
        write_json(Some(&with_ext(out, "json")), &summary)?;
    } else {
        write_json(None, &summary)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn with_ext(prefix: &std::path::Path, ext: &str) -> PathBuf {
    let mut p = prefix.to_path_buf();
    p.set_extension(ext);
    p
}

fn parse_keep(model: &Model, keep: &str) -> anyhow::Result<Vec<usize>> {
    keep.split(',')
        .map(|tok| {
            let tok = tok.trim();
            if let Some(i) = model.chart.index_of(tok) {
                Ok(i)
            } else {
                let idx: usize = tok
                    .parse()
                    .map_err(|_| anyhow::anyhow!("unknown coordinate `{tok}`"))?;
                anyhow::ensure!(
                    (1..=model.chart.dim()).contains(&idx),
                    "coordinate index {idx} out of range"
                );
                Ok(idx - 1)
            }
        })
        .collect()
}

pub fn quotient(common: &Common, keep: &str, point: &str) -> anyhow::Result<ExitCode> {
    let model = load_model(common)?;
    let sys = model.control_system()?;
    let keep_idx = parse_keep(&model, keep)?;
    let quot = quotient_system(&sys, &keep_idx)?;
    let x0 = parse_f64_vec(point)?;
    // Probe trajectory under a seeded random multi-arc control.
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(common.seed);
    let samples: Vec<Vec<f64>> = (0..4)
        .map(|_| {
            (0..sys.control_dim())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let sig = ControlSignal::new(0.0, 1.0, samples)?;
    let traj = integrate(&sys, &sig, &x0, common.step)?;
    let res = projection_residual(&sys, &quot, &keep_idx, &traj);
    let full_chart = quot.full_chart().clone();
    let frame_exprs: Vec<Vec<String>> = quot
        .frame()
        .iter()
        .map(|f| {
            f.components()[..quot.state_dim()]
                .iter()
                .map(|p| p.display_with(full_chart.names()))
                .collect()
        })
        .collect();
    let endpoint = traj.endpoint().to_vec();
    let proj_endpoint: Vec<f64> = keep_idx.iter().map(|&i| endpoint[i]).collect();
    let report = json!({
        "model": model.file.name,
        "keep": keep_idx.iter().map(|i| model.chart.names()[*i].clone()).collect::<Vec<_>>(),
        "params": quot.param_names(),
        "state_dim": quot.state_dim(),
        "control_dim": quot.control_dim(),
        "frame": frame_exprs,
        "projection_residual": res,
        "endpoint_full": endpoint,
        "endpoint_projected": proj_endpoint,
        "pass": res <= common.tol.max(1e-9),
    });
    let out_json = common.out.as_ref().map(|p| with_ext(p, "json"));
    write_json(out_json.as_deref(), &report)?;
    Ok(if res <= common.tol.max(1e-9) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cartan_model_of(model: &Model, base: &[BigRational]) -> anyhow::Result<CartanModel> {
    let frame = model.main_frame()?;
    if model.chart.dim() != 5 || frame.len() != 2 {
        return Err(GeoError::DegeneratePoint {
            msg: format!(
                "prolongation expects a rank-2 frame on a 5-dimensional chart, got rank {} on dimension {}",
                frame.len(),
                model.chart.dim()
            ),
        }
        .into());
    }
    Ok(CartanModel::new(
        model.chart.clone(),
        frame[0].clone(),
        frame[1].clone(),
        base.to_vec(),
    )?)
}

pub fn prolong(common: &Common, point: &str) -> anyhow::Result<ExitCode> {
    let model = load_model(common)?;
    let base = parse_rational_vec(point)?;
    let cartan = cartan_model_of(&model, &base)?;
    let chart = prolong_chart(&cartan)?;
    let y = rat_to_f64(&base);
    let mut rho_samples = Vec::new();
    for k in 0..8 {
        let v = k as f64 * std::f64::consts::PI / 8.0;
        rho_samples.push(json!({"v": v, "rho": chart.rho(&y, v)?}));
    }
    let mut z = y.clone();
    z.push(0.4);
    let growth = chart.growth_on_z(&z, 6, 1e-6)?;
    let report = json!({
        "model": model.file.name,
        "point": point,
        "certified_growth": [2, 3, 5],
        "rho_samples": rho_samples,
        "growth_on_line_space": growth,
        "pass": growth == vec![2, 3, 4, 5, 6],
    });
    write_json(common.out.as_deref(), &report)?;
    Ok(ExitCode::SUCCESS)
}

pub fn duality_check(
    common: &Common,
    z0: &str,
    samples: usize,
    fibers: usize,
    curve_tol: f64,
) -> anyhow::Result<ExitCode> {
    let model = load_model(common)?;
    let z0 = parse_f64_vec(z0)?;
    anyhow::ensure!(
        z0.len() == 6,
        "--z0 takes 5 base coordinates plus the fibre angle"
    );
    let base = parse_rational_vec(
        &z0[..5]
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(","),
    )?;
    // Stage 1: certification (exit 3 on failure, handled by the error map).
    let cartan = cartan_model_of(&model, &base)?;
    let stage = |name: &'static str| {
        move |e: GeoError| -> anyhow::Error {
            anyhow::Error::from(e).context(format!("stage {name}"))
        }
    };
    // Stage 2: prolongation.
    let chart = prolong_chart(&cartan).map_err(stage("prolong"))?;
    // Stage 3: leaf space.
    let ls = LocalLeafSpace::new(&chart, &z0).map_err(stage("leaf_space"))?;
    // Stage 4: asymmetry.
    let asym = verify_asymmetry(
        &chart,
        &z0,
        samples,
        common.tol,
        0.4,
        common.step,
        common.seed,
    )
    .map_err(stage("asymmetry"))?;
    // Stage 5: duality.
    let opts = DualityOptions {
        nfibers: fibers,
        tol: curve_tol,
        seed: common.seed,
        ..DualityOptions::default()
    };
    let dual = verify_duality(&chart, &ls, &opts).map_err(stage("duality"))?;

    let asym_pass = asym.all_consistent();
    let dual_pass = dual.all_matched();
    let report = json!({
        "model": model.file.name,
        "z0": z0,
        "asymmetry": {
            "arcs": asym.arcs.iter().map(|a| json!({
                "kind": format!("{:?}", a.kind),
                "tangency_vertical": a.tangency_vertical,
                "tangency_leaf": a.tangency_leaf,
                "constraint_residual": a.constraint_residual,
                "classification": format!("{:?}", a.classification),
                "consistent": a.consistent(asym.tol),
            })).collect::<Vec<_>>(),
            "tolerance": asym.tol,
            "pass": asym_pass,
        },
        "duality": {
            "fibers": dual.fibers.iter().map(|f| json!({
                "base_offset": f.base_offset,
                "curve_distances": f.curve_distances,
                "uniqueness_gap": f.uniqueness_gap,
                "leaf_image_drift": f.leaf_image_drift,
                "constraint_drift": f.constraint_drift,
            })).collect::<Vec<_>>(),
            "max_curve_distance": dual.max_curve_distance(),
            "tolerance": dual.tol,
            "pass": dual_pass,
        },
        "pass": asym_pass && dual_pass,
    });
    let out_json = common.out.as_ref().map(|p| with_ext(p, "json"));
    write_json(out_json.as_deref(), &report)?;
    Ok(if asym_pass && dual_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

pub fn steer(
    common: &Common,
    from: &str,
    to: &str,
    keep: Option<String>,
    arcs: usize,
    horizon: f64,
) -> anyhow::Result<ExitCode> {
    let model = load_model(common)?;
    let sys = model.control_system()?;
    let x0 = parse_f64_vec(from)?;
    let target = parse_f64_vec(to)?;
    let rows = match keep {
        Some(k) => parse_keep(&model, &k)?,
        None => (0..sys.state_dim()).collect(),
    };
    anyhow::ensure!(
        rows.len() == target.len(),
        "target has {} values for {} steered coordinates",
        target.len(),
        rows.len()
    );
    let opts = SteeringOptions {
        narcs: arcs,
        horizon,
        step: common.step,
        tol: common.tol,
        seed: common.seed,
        ..SteeringOptions::default()
    };
    let sig = steer_to_target(&sys, &x0, &rows, &target, &opts)?;
    let traj = integrate(&sys, &sig, &x0, common.step)?;
    let endpoint = traj.endpoint().to_vec();
    let err: f64 = rows
        .iter()
        .zip(&target)
        .map(|(&i, t)| (endpoint[i] - t).powi(2))
        .sum::<f64>()
        .sqrt();
    let report = json!({
        "model": model.file.name,
        "from": x0,
        "target": target,
        "steered_coordinates": rows.iter().map(|i| model.chart.names()[*i].clone()).collect::<Vec<_>>(),
        "arcs": arcs,
        "horizon": horizon,
        "controls": sig.samples,
        "endpoint": endpoint,
        "terminal_error": err,
        "pass": err <= common.tol * 10.0,
    });
    if let Some(out) = &common.out {
        let mut header: Vec<String> = vec!["t".into()];
        header.extend(model.chart.names().iter().cloned());
        let rows_iter = traj.times.iter().zip(&traj.states).map(|(t, s)| {
            let mut row = vec![*t];
            row.extend_from_slice(s);
            row
        });
        write_csv(&with_ext(out, "csv"), &header, rows_iter)?;
        write_json(Some(&with_ext(out, "json")), &report)?;
    } else {
        write_json(None, &report)?;
    }
    Ok(ExitCode::SUCCESS)
}
