//! Scenario execution: resolve references, run the numerics, emit artifacts.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use normform_core::examples::{
    bistable_bundle, circadian_normal_form, feedforward_bundle, BistableParams, CircadianParams,
    FeedForwardParams,
};
use normform_core::groups::StateTransformationFamily;
use normform_core::normalform::{gauge_transform, CrossSection};
use normform_core::transmissible::{find_and_classify, SearchBox, TransmissibleInput};
use normform_core::{
    equivariance_sweep, pde_residuals, rectify_group_action, simulate, simulate_normal_form,
    transform_signal, Axis, Classification, CoordinateChange, DynamicalSystem, InputSignal,
    Interpolation, NormalFormSystem, SolverOptions, SweepOptions, TransformationGroup,
};

use crate::config::{AxisDef, Scenario, ScenarioConfig, SignalDef, SystemRef};
use crate::inline;
use crate::output::{fmt_f64, line_chart, scatter_chart, Csv, Report, Series};

/// Scenario failures by exit code: configuration problems exit 2, numerical
/// or check failures exit 1.
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Run(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration error: {m}"),
            RunError::Run(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

fn cfg(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

fn run_err(e: impl std::fmt::Display) -> RunError {
    RunError::Run(e.to_string())
}

pub const BUILTIN_SYSTEMS: [&str; 2] = ["feedforward", "bistable"];
pub const BUILTIN_NORMAL_FORMS: [&str; 4] =
    ["feedforward", "bistable-1", "bistable-2", "circadian"];
pub const BUILTIN_BUNDLES: [&str; 3] = ["feedforward", "bistable-1", "bistable-2"];

fn signal(def: &SignalDef) -> Result<InputSignal, RunError> {
    match def {
        SignalDef::Constant { value } => Ok(InputSignal::constant(*value)),
        SignalDef::Sinusoid {
            offset,
            amplitude,
            omega,
            phase,
        } => Ok(InputSignal::sinusoid(*offset, *amplitude, *omega, *phase)),
        SignalDef::Ramp { offset, slope } => Ok(InputSignal::ramp(*offset, *slope)),
        SignalDef::Table { points, hold } => InputSignal::table(
            points.clone(),
            if *hold {
                Interpolation::Hold
            } else {
                Interpolation::Linear
            },
        )
        .map_err(|e| cfg(format!("bad table signal: {e}"))),
        SignalDef::DayNight { period, night, day } => {
            if !(*period > 0.0) {
                return Err(cfg("day-night period must be positive"));
            }
            Ok(InputSignal::day_night(*period, *night, *day))
        }
    }
}

fn axis(def: &AxisDef) -> Result<Axis, RunError> {
    if !(def.lo < def.hi) {
        return Err(cfg(format!("axis needs lo < hi, got [{}, {}]", def.lo, def.hi)));
    }
    if def.log {
        if def.lo <= 0.0 {
            return Err(cfg("log axis needs lo > 0"));
        }
        Ok(Axis::log(def.lo, def.hi))
    } else {
        Ok(Axis::linear(def.lo, def.hi))
    }
}

fn axes(defs: &[AxisDef]) -> Result<Vec<Axis>, RunError> {
    defs.iter().map(axis).collect()
}

struct ResolvedSystem {
    system: DynamicalSystem,
    group: TransformationGroup,
    family: Option<StateTransformationFamily>,
    state_names: Vec<String>,
}

fn resolve_system(reference: &SystemRef) -> Result<ResolvedSystem, RunError> {
    match reference {
        SystemRef::Builtin(name) => match name.as_str() {
            "feedforward" => {
                let b = feedforward_bundle(FeedForwardParams::default());
                Ok(ResolvedSystem {
                    system: b.original,
                    group: b.group,
                    family: Some(b.family),
                    state_names: vec!["x1".into(), "x2".into()],
                })
            }
            "bistable" => {
                let b = bistable_bundle(BistableParams::default());
                Ok(ResolvedSystem {
                    system: b.original,
                    group: b.group,
                    family: Some(b.family),
                    state_names: vec!["x1".into(), "x2".into(), "x3".into()],
                })
            }
            other => Err(cfg(format!(
                "unknown system '{other}'; builtins: {BUILTIN_SYSTEMS:?}"
            ))),
        },
        SystemRef::Inline(def) => {
            let system = inline::build_system(def).map_err(|e| cfg(e.to_string()))?;
            Ok(ResolvedSystem {
                system,
                group: TransformationGroup::scaling(),
                family: None,
                state_names: def.states.iter().map(|s| s.name.clone()).collect(),
            })
        }
    }
}

fn resolve_normal_form(name: &str) -> Result<NormalFormSystem, RunError> {
    match name {
        "feedforward" => Ok(feedforward_bundle(FeedForwardParams::default()).normal_form),
        "bistable-1" => Ok(bistable_bundle(BistableParams::default()).normal_form_1),
        "bistable-2" => Ok(bistable_bundle(BistableParams::default()).normal_form_2),
        "circadian" => Ok(circadian_normal_form(CircadianParams::default())),
        other => Err(cfg(format!(
            "unknown normal form '{other}'; builtins: {BUILTIN_NORMAL_FORMS:?}"
        ))),
    }
}

struct ResolvedBundle {
    family: StateTransformationFamily,
    delta: CoordinateChange,
    section: CrossSection,
    dim: usize,
}

fn resolve_bundle(name: &str) -> Result<ResolvedBundle, RunError> {
    match name {
        "feedforward" => {
            let b = feedforward_bundle(FeedForwardParams::default());
            Ok(ResolvedBundle {
                family: b.family,
                delta: b.delta,
                section: b.section,
                dim: 2,
            })
        }
        "bistable-1" => {
            let b = bistable_bundle(BistableParams::default());
            Ok(ResolvedBundle {
                family: b.family,
                delta: b.delta_1,
                section: b.section,
                dim: 3,
            })
        }
        "bistable-2" => {
            let b = bistable_bundle(BistableParams::default());
            // the second chart anchors at x1, so rectify against {x1 = 1}
            let section = CrossSection::new(
                |x: &DVector<f64>| x[0] - 1.0,
                |x: &DVector<f64>| DVector::from_vec(vec![x[0] / x[1], x[2]]),
            );
            Ok(ResolvedBundle {
                family: b.family,
                delta: b.delta_2,
                section,
                dim: 3,
            })
        }
        other => Err(cfg(format!(
            "unknown bundle '{other}'; builtins: {BUILTIN_BUNDLES:?}"
        ))),
    }
}

fn eig_string(ti: &TransmissibleInput) -> String {
    ti.eigenvalues
        .iter()
        .map(|e| format!("{}{}{}i", fmt_f64(e.re), if e.im < 0.0 { "" } else { "+" }, fmt_f64(e.im)))
        .collect::<Vec<_>>()
        .join("; ")
}

fn transmissible_csv(roots: &[TransmissibleInput], dim_z: usize) -> Csv {
    let mut header = vec!["u".to_string()];
    header.extend((1..=dim_z).map(|i| format!("z{i}")));
    header.extend([
        "classification".to_string(),
        "degenerate".to_string(),
        "residual".to_string(),
        "eigenvalues".to_string(),
    ]);
    let mut csv = Csv::with_header(header);
    for ti in roots {
        let mut row = vec![fmt_f64(ti.u_value)];
        row.extend(ti.z_star.iter().map(|v| fmt_f64(*v)));
        row.push(
            ti.classification
                .map(|c| c.to_string())
                .unwrap_or_else(|| "unclassified".into()),
        );
        row.push(ti.degenerate.to_string());
        row.push(fmt_f64(ti.residual));
        row.push(eig_string(ti));
        csv.row(row);
    }
    csv
}

fn report_transmissible(
    roots: &[TransmissibleInput],
    dim_z: usize,
    out_dir: &Path,
    report: &mut Report,
) -> Result<(), RunError> {
    let path = out_dir.join("transmissible.csv");
    transmissible_csv(roots, dim_z).write(&path).map_err(run_err)?;
    report.file(path);
    let stable = roots
        .iter()
        .filter(|r| r.classification == Some(Classification::Stable))
        .count();
    let unstable = roots
        .iter()
        .filter(|r| r.classification == Some(Classification::Unstable))
        .count();
    let marginal = roots.len() - stable - unstable;
    report.note(format!(
        "{} transmissible input(s): {stable} stable, {unstable} unstable, {marginal} marginal",
        roots.len()
    ));
    for ti in roots {
        report.note(format!(
            "  u = {} ({}), {} variable-part equilibria",
            fmt_f64(ti.u_value),
            ti.classification
                .map(|c| c.to_string())
                .unwrap_or_else(|| "unclassified".into()),
            ti.z_equilibria.len()
        ));
    }
    let max_residual = roots.iter().fold(0.0f64, |a, r| a.max(r.residual));
    report.verdict(
        "root residuals",
        max_residual <= 1e-10,
        &format!("max {max_residual:.2e}"),
    );
    Ok(())
}

/// Execute a validated scenario; returns the pass flag and the written files.
pub fn run_scenario(
    config: &ScenarioConfig,
    out_dir: &Path,
) -> Result<(bool, Vec<PathBuf>), RunError> {
    config.validate().map_err(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(run_err)?;
    let opts = SolverOptions::with_tolerances(config.rtol, config.atol);

    match &config.scenario {
        Scenario::Simulate {
            system,
            signal: sig,
            x0,
            t_span,
        } => {
            let resolved = resolve_system(system)?;
            if x0.len() != resolved.system.dim {
                return Err(cfg(format!(
                    "x0 has {} entries, system has {} states",
                    x0.len(),
                    resolved.system.dim
                )));
            }
            let u = signal(sig)?;
            let mut report = Report::new("simulate");
            let traj = simulate(
                &resolved.system,
                &DVector::from_vec(x0.clone()),
                &u,
                *t_span,
                &opts,
            )
            .map_err(run_err)?;
            let mut header = vec!["t".to_string()];
            header.extend(resolved.state_names.iter().cloned());
            header.push("y".to_string());
            let mut csv = Csv::with_header(header);
            let y = traj.channel("y").unwrap();
            for (k, t) in traj.times().iter().enumerate() {
                let mut row = vec![*t];
                row.extend(traj.states()[k].iter());
                row.push(y[k]);
                csv.numeric_row(&row);
            }
            let path = out_dir.join("timeseries.csv");
            csv.write(&path).map_err(run_err)?;
            report.file(path);
            let plot = out_dir.join("output.svg");
            line_chart(
                &plot,
                &format!("{}: output", resolved.system.label),
                &[Series {
                    label: "y",
                    points: traj.times().iter().cloned().zip(y.iter().cloned()).collect(),
                }],
            )
            .map_err(run_err)?;
            report.file(plot);
            report.note(format!(
                "integrated to t = {} in {} accepted steps",
                fmt_f64(traj.end_time()),
                traj.times().len() - 1
            ));
            report.finish(out_dir).map_err(run_err)
        }

        Scenario::SimulateNormalForm {
            normal_form,
            signal: sig,
            z0,
            p_hat0,
            t_span,
        } => {
            let nf = resolve_normal_form(normal_form)?;
            if z0.len() != nf.dim_z {
                return Err(cfg(format!(
                    "z0 has {} entries, normal form has {}",
                    z0.len(),
                    nf.dim_z
                )));
            }
            let u = signal(sig)?;
            let mut report = Report::new("simulate-normal-form");
            let traj = simulate_normal_form(
                &nf,
                &DVector::from_vec(z0.clone()),
                *p_hat0,
                &u,
                *t_span,
                &opts,
            )
            .map_err(run_err)?;
            let mut header = vec!["t".to_string()];
            header.extend((1..=nf.dim_z).map(|i| format!("z{i}")));
            header.extend(["phat", "y", "uhat", "e"].map(String::from));
            let mut csv = Csv::with_header(header);
            let (y, uhat, e) = (
                traj.channel("y").unwrap(),
                traj.channel("uhat").unwrap(),
                traj.channel("e").unwrap(),
            );
            for (k, t) in traj.times().iter().enumerate() {
                let mut row = vec![*t];
                row.extend(traj.states()[k].iter());
                row.extend([y[k], uhat[k], e[k]]);
                csv.numeric_row(&row);
            }
            let path = out_dir.join("timeseries.csv");
            csv.write(&path).map_err(run_err)?;
            report.file(path);
            let plot = out_dir.join("channels.svg");
            let times = traj.times();
            line_chart(
                &plot,
                &format!("{}: output and estimate", nf.label),
                &[
                    Series {
                        label: "y",
                        points: times.iter().cloned().zip(y.iter().cloned()).collect(),
                    },
                    Series {
                        label: "phat",
                        points: times
                            .iter()
                            .zip(traj.states())
                            .map(|(t, w)| (*t, w[nf.dim_z]))
                            .collect(),
                    },
                ],
            )
            .map_err(run_err)?;
            report.file(plot);
            report.note(format!(
                "integrated to t = {}, final phat = {}",
                fmt_f64(traj.end_time()),
                fmt_f64(traj.end_state()[nf.dim_z])
            ));
            report.finish(out_dir).map_err(run_err)
        }

        Scenario::CheckEquivariance {
            system,
            group,
            family,
            x_box,
            u_box,
            samples,
            seed,
            tolerance,
        } => {
            let resolved = resolve_system(system)?;
            let grp = match group.as_deref() {
                None => resolved.group.clone(),
                Some(name) => TransformationGroup::by_name(name)
                    .ok_or_else(|| cfg(format!("unknown group '{name}'")))?,
            };
            let fam = match (&resolved.family, family) {
                (_, Some(def)) => {
                    let SystemRef::Inline(sys) = system else {
                        return Err(cfg("an explicit family requires an inline system"));
                    };
                    inline::build_family(def, sys).map_err(|e| cfg(e.to_string()))?
                }
                (Some(f), None) => f.clone(),
                (None, None) => return Err(cfg("inline systems need a family")),
            };
            if x_box.len() != resolved.system.dim {
                return Err(cfg(format!(
                    "x_box has {} axes, system has {} states",
                    x_box.len(),
                    resolved.system.dim
                )));
            }
            let mut sweep_opts = SweepOptions::new(axes(x_box)?, axis(u_box)?);
            sweep_opts.n = *samples;
            sweep_opts.seed = *seed;
            let mut report = Report::new("check-equivariance");
            let sweep = equivariance_sweep(&resolved.system, &grp, &fam, &sweep_opts)
                .map_err(run_err)?;
            let mut header = resolved.state_names.clone();
            header.extend(["u", "p", "residual_f", "residual_h"].map(String::from));
            let mut csv = Csv::with_header(header);
            for s in &sweep.samples {
                let mut row: Vec<f64> = s.x.iter().cloned().collect();
                row.extend([s.u, s.p, s.r_f, s.r_h]);
                csv.numeric_row(&row);
            }
            let path = out_dir.join("residuals.csv");
            csv.write(&path).map_err(run_err)?;
            report.file(path);
            let tol = tolerance.unwrap_or(1e-8);
            let worst = &sweep.samples[sweep.worst];
            report.note(format!(
                "worst sample #{}: x = [{}], u = {}, p = {}",
                sweep.worst,
                worst
                    .x
                    .iter()
                    .map(|v| fmt_f64(*v))
                    .collect::<Vec<_>>()
                    .join(", "),
                fmt_f64(worst.u),
                fmt_f64(worst.p)
            ));
            report.verdict(
                "equivariance residuals",
                sweep.max_residual <= tol,
                &format!("max {:.2e}, tolerance {tol:.0e}", sweep.max_residual),
            );
            report.finish(out_dir).map_err(run_err)
        }

        Scenario::CheckPde {
            bundle,
            samples,
            seed,
            tolerance,
        } => {
            let b = resolve_bundle(bundle)?;
            let dim = b.dim;
            let sample_axes = vec![Axis::log(0.1, 10.0); dim];
            let pts = normform_core::sample::random_points(*samples, &sample_axes, *seed);
            let forward = b.delta.forward.clone();
            let delta_z = move |x: &DVector<f64>| forward(x).rows(0, dim - 1).into_owned();
            let forward = b.delta.forward.clone();
            let delta_p = move |x: &DVector<f64>| forward(x)[dim - 1];
            let mut report = Report::new("check-pde");
            let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
            header.extend(["residual_z", "residual_p"].map(String::from));
            let mut csv = Csv::with_header(header);
            let mut max_z = 0.0f64;
            let mut max_p = 0.0f64;
            for x in &pts {
                let (rz, rp) = pde_residuals(&b.family, &delta_z, &delta_p, x);
                max_z = max_z.max(rz.amax());
                max_p = max_p.max(rp.abs());
                let mut row: Vec<f64> = x.iter().cloned().collect();
                row.extend([rz.amax(), rp.abs()]);
                csv.numeric_row(&row);
            }
            let path = out_dir.join("residuals.csv");
            csv.write(&path).map_err(run_err)?;
            report.file(path);
            let tol = tolerance.unwrap_or(1e-6);
            report.verdict(
                "generator annihilates the z coordinates",
                max_z <= tol,
                &format!("max {max_z:.2e}"),
            );
            report.verdict(
                "generator moves the anchor at unit rate",
                max_p <= tol,
                &format!("max {max_p:.2e}"),
            );
            report.finish(out_dir).map_err(run_err)
        }

        Scenario::Transmissible {
            normal_form,
            z_box,
            u_box,
            n_starts,
        } => {
            let nf = resolve_normal_form(normal_form)?;
            if z_box.len() != nf.dim_z {
                return Err(cfg(format!(
                    "z_box has {} axes, normal form has {}",
                    z_box.len(),
                    nf.dim_z
                )));
            }
            let sb = SearchBox::new(axes(z_box)?, axis(u_box)?);
            let mut report = Report::new("transmissible");
            let roots = find_and_classify(&nf, &sb, *n_starts).map_err(run_err)?;
            report_transmissible(&roots, nf.dim_z, out_dir, &mut report)?;
            report.finish(out_dir).map_err(run_err)
        }

        Scenario::Gauge {
            normal_form,
            tau,
            z_box,
            u_box,
            n_starts,
        } => {
            let nf = resolve_normal_form(normal_form)?;
            if z_box.len() != nf.dim_z {
                return Err(cfg(format!(
                    "z_box has {} axes, normal form has {}",
                    z_box.len(),
                    nf.dim_z
                )));
            }
            let gauge = inline::build_gauge(tau, nf.dim_z).map_err(|e| cfg(e.to_string()))?;
            let gauged = gauge_transform(&nf, std::sync::Arc::new(gauge), None);
            let sb = SearchBox::new(axes(z_box)?, axis(u_box)?);
            let mut report = Report::new("gauge");
            report.note(format!("gauge function: {tau}"));
            let roots = find_and_classify(&gauged, &sb, *n_starts).map_err(run_err)?;
            report_transmissible(&roots, nf.dim_z, out_dir, &mut report)?;
            report.finish(out_dir).map_err(run_err)
        }

        Scenario::Rectify {
            bundle,
            points,
            tolerance,
        } => {
            let b = resolve_bundle(bundle)?;
            let mut report = Report::new("rectify");
            let mut header: Vec<String> = (1..=b.dim).map(|i| format!("x{i}")).collect();
            header.extend((1..=b.dim - 1).map(|i| format!("z{i}")));
            header.extend(["phat", "deviation"].map(String::from));
            let mut csv = Csv::with_header(header);
            let mut max_dev = 0.0f64;
            for (i, pt) in points.iter().enumerate() {
                if pt.len() != b.dim {
                    return Err(cfg(format!(
                        "query point {i} has {} entries, expected {}",
                        pt.len(),
                        b.dim
                    )));
                }
                let x = DVector::from_vec(pt.clone());
                let (z, p_hat) = rectify_group_action(&b.family, &b.section, &x)
                    .map_err(|e| RunError::Run(format!("at query point {i}: {e}")))?;
                let analytic = (b.delta.forward)(&x);
                let mut dev = (p_hat - analytic[b.dim - 1]).abs();
                for k in 0..b.dim - 1 {
                    dev = dev.max((z[k] - analytic[k]).abs());
                }
                max_dev = max_dev.max(dev);
                let mut row: Vec<f64> = pt.clone();
                row.extend(z.iter());
                row.extend([p_hat, dev]);
                csv.numeric_row(&row);
            }
            let path = out_dir.join("rectified.csv");
            csv.write(&path).map_err(run_err)?;
            report.file(path);
            let tol = tolerance.unwrap_or(1e-6);
            report.verdict(
                "rectified coordinates match the analytic chart",
                max_dev <= tol,
                &format!("max deviation {max_dev:.2e}"),
            );
            report.finish(out_dir).map_err(run_err)
        }

        Scenario::ScaledIo {
            bundle,
            signal: sig,
            x0,
            p,
            t_span,
            tolerance,
        } => {
            let resolved = resolve_system(&SystemRef::Builtin(match bundle.as_str() {
                "feedforward" | "bistable" => bundle.clone(),
                other => {
                    return Err(cfg(format!(
                        "unknown bundle '{other}'; scaled-io supports {BUILTIN_SYSTEMS:?}"
                    )))
                }
            }))?;
            if x0.len() != resolved.system.dim {
                return Err(cfg(format!(
                    "x0 has {} entries, system has {} states",
                    x0.len(),
                    resolved.system.dim
                )));
            }
            let u = signal(sig)?;
            let family = resolved.family.as_ref().expect("builtin has a family");
            let x0 = DVector::from_vec(x0.clone());
            let x0p = family.apply(*p, &x0);
            let up = transform_signal(&resolved.group, *p, &u);
            let mut report = Report::new("scaled-io");
            let a = simulate(&resolved.system, &x0, &u, *t_span, &opts).map_err(run_err)?;
            let b = simulate(&resolved.system, &x0p, &up, *t_span, &opts).map_err(run_err)?;
            let n = 400usize;
            let mut csv = Csv::new(&["t", "u", "u_transformed", "y", "y_transformed"]);
            let mut max_dev = 0.0f64;
            let mut s1 = Vec::with_capacity(n + 1);
            let mut s2 = Vec::with_capacity(n + 1);
            for k in 0..=n {
                let t = t_span.0 + (t_span.1 - t_span.0) * k as f64 / n as f64;
                let ya = resolved.system.output(&a.state_at(t));
                let yb = resolved.system.output(&b.state_at(t));
                max_dev = max_dev.max((ya - yb).abs());
                csv.numeric_row(&[t, u.eval(t).map_err(run_err)?, up.eval(t).map_err(run_err)?, ya, yb]);
                s1.push((t, ya));
                s2.push((t, yb));
            }
            let path = out_dir.join("outputs.csv");
            csv.write(&path).map_err(run_err)?;
            report.file(path);
            let plot = out_dir.join("outputs.svg");
            line_chart(
                &plot,
                &format!("{}: outputs for u and the transformed input", resolved.system.label),
                &[
                    Series {
                        label: "y(u)",
                        points: s1,
                    },
                    Series {
                        label: "y(transformed u)",
                        points: s2,
                    },
                ],
            )
            .map_err(run_err)?;
            report.file(plot);
            let tol = tolerance.unwrap_or(1e-6);
            report.verdict(
                "outputs coincide",
                max_dev <= tol,
                &format!("max deviation {max_dev:.2e} for p = {}", fmt_f64(*p)),
            );
            report.finish(out_dir).map_err(run_err)
        }

        Scenario::Nullclines {
            normal_form,
            u_hat,
            z_box,
            grid,
        } => {
            let nf = resolve_normal_form(normal_form)?;
            if nf.dim_z != 2 {
                return Err(cfg(format!(
                    "nullclines need a two-dimensional variable part, '{normal_form}' has {}",
                    nf.dim_z
                )));
            }
            if z_box.len() != 2 {
                return Err(cfg("nullclines need exactly two z axes"));
            }
            let ax = axes(z_box)?;
            let mut report = Report::new("nullclines");
            let f = |i: usize, z1: f64, z2: f64| {
                nf.f_z(&DVector::from_vec(vec![z1, z2]), *u_hat)[i]
            };
            // trace each nullcline by scanning sign changes along the grid
            let mut curves: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
            for i in 0..2 {
                for k in 0..=*grid {
                    let z1 = ax[0].lo + (ax[0].hi - ax[0].lo) * k as f64 / *grid as f64;
                    let mut prev = f(i, z1, ax[1].lo);
                    for j in 1..=*grid {
                        let z2 = ax[1].lo + (ax[1].hi - ax[1].lo) * j as f64 / *grid as f64;
                        let cur = f(i, z1, z2);
                        if prev == 0.0 {
                            curves[i].push((z1, z2));
                        } else if prev * cur < 0.0 {
                            let mut lo = z2 - (ax[1].hi - ax[1].lo) / *grid as f64;
                            let mut hi = z2;
                            for _ in 0..60 {
                                let mid = 0.5 * (lo + hi);
                                if f(i, z1, mid) * prev > 0.0 {
                                    lo = mid;
                                } else {
                                    hi = mid;
                                }
                            }
                            curves[i].push((z1, 0.5 * (lo + hi)));
                        }
                        prev = cur;
                    }
                }
            }
            let mut csv = Csv::new(&["component", "z1", "z2"]);
            for (i, curve) in curves.iter().enumerate() {
                for (z1, z2) in curve {
                    csv.row(vec![format!("{}", i + 1), fmt_f64(*z1), fmt_f64(*z2)]);
                }
            }
            let path = out_dir.join("nullclines.csv");
            csv.write(&path).map_err(run_err)?;
            report.file(path);

            // equilibria of the z subsystem: Newton from the crossings of
            // curve 1 where f_2 changes sign
            let mut equilibria: Vec<(f64, f64, bool)> = Vec::new();
            for w in curves[0].windows(2) {
                let (a, b) = (w[0], w[1]);
                if (a.0 - b.0).abs() > 2.0 * (ax[0].hi - ax[0].lo) / *grid as f64 {
                    continue; // different branch
                }
                let fa = f(1, a.0, a.1);
                let fb = f(1, b.0, b.1);
                if fa * fb < 0.0 || fa == 0.0 {
                    let mut z = DVector::from_vec(vec![0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1)]);
                    for _ in 0..50 {
                        let r = nf.f_z(&z, *u_hat);
                        if r.amax() <= 1e-13 {
                            break;
                        }
                        let jac = normform_core::fd::jacobian(
                            |z| nf.f_z(z, *u_hat),
                            &z,
                            normform_core::fd::DEFAULT_STEP,
                        );
                        match jac.lu().solve(&r) {
                            Some(step) => z -= step,
                            None => break,
                        }
                    }
                    if nf.f_z(&z, *u_hat).amax() <= 1e-10
                        && !equilibria
                            .iter()
                            .any(|(e1, e2, _)| (e1 - z[0]).abs() + (e2 - z[1]).abs() <= 1e-6)
                    {
                        let jac = normform_core::fd::jacobian(
                            |z| nf.f_z(z, *u_hat),
                            &z,
                            normform_core::fd::DEFAULT_STEP,
                        );
                        let stable = jac
                            .complex_eigenvalues()
                            .iter()
                            .all(|e| e.re < 0.0);
                        equilibria.push((z[0], z[1], stable));
                    }
                }
            }
            equilibria.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut csv = Csv::new(&["z1", "z2", "stability"]);
            for (z1, z2, stable) in &equilibria {
                csv.row(vec![
                    fmt_f64(*z1),
                    fmt_f64(*z2),
                    if *stable { "stable" } else { "unstable" }.to_string(),
                ]);
            }
            let path = out_dir.join("equilibria.csv");
            csv.write(&path).map_err(run_err)?;
            report.file(path);
            let plot = out_dir.join("nullclines.svg");
            scatter_chart(
                &plot,
                &format!("{}: nullclines at u_hat = {}", nf.label, fmt_f64(*u_hat)),
                &[
                    Series {
                        label: "dz1/dt = 0",
                        points: curves[0].clone(),
                    },
                    Series {
                        label: "dz2/dt = 0",
                        points: curves[1].clone(),
                    },
                ],
                &equilibria
                    .iter()
                    .map(|(z1, z2, stable)| (*z1, *z2, if *stable { "#2e933c" } else { "#d1495b" }))
                    .collect::<Vec<_>>(),
            )
            .map_err(run_err)?;
            report.file(plot);
            let stable = equilibria.iter().filter(|(_, _, s)| *s).count();
            report.note(format!(
                "{} equilibria of the variable part ({stable} stable)",
                equilibria.len()
            ));
            report.finish(out_dir).map_err(run_err)
        }

        Scenario::OscillatorComparison {
            normal_form,
            signal: sig,
            z0,
            p,
            horizon,
            window,
            tolerance,
        } => {
            let nf = resolve_normal_form(normal_form)?;
            if z0.len() != nf.dim_z {
                return Err(cfg(format!(
                    "z0 has {} entries, normal form has {}",
                    z0.len(),
                    nf.dim_z
                )));
            }
            let u = signal(sig)?;
            let up = transform_signal(&nf.group, *p, &u);
            let z0 = DVector::from_vec(z0.clone());
            let mut report = Report::new("oscillator-comparison");
            let a = simulate_normal_form(&nf, &z0, 0.0, &u, (0.0, *horizon), &opts)
                .map_err(run_err)?;
            let b = simulate_normal_form(&nf, &z0, 0.0, &up, (0.0, *horizon), &opts)
                .map_err(run_err)?;
            let m = nf.dim_z;
            let n = 960usize;
            let mut csv = Csv::new(&["t", "y", "y_transformed", "phat", "phat_transformed"]);
            let mut p_sum = 0.0;
            let mut count = 0usize;
            let mut max_y_dev = 0.0f64;
            let mut sy = Vec::new();
            let mut sp = Vec::new();
            for k in 0..=n {
                let t = *horizon * k as f64 / n as f64;
                let (wa, wb) = (a.state_at(t), b.state_at(t));
                let (ya, yb) = (
                    nf.h_z(&wa.rows(0, m).into_owned()),
                    nf.h_z(&wb.rows(0, m).into_owned()),
                );
                csv.numeric_row(&[t, ya, yb, wa[m], wb[m]]);
                if t >= *horizon - *window {
                    p_sum += wb[m] - wa[m];
                    count += 1;
                    max_y_dev = max_y_dev.max((ya - yb).abs());
                }
                sy.push((t, ya));
                sp.push((t, wb[m] - wa[m]));
            }
            let path = out_dir.join("comparison.csv");
            csv.write(&path).map_err(run_err)?;
            report.file(path);
            let plot = out_dir.join("comparison.svg");
            line_chart(
                &plot,
                &format!("{}: output and estimator difference", nf.label),
                &[
                    Series {
                        label: "y",
                        points: sy,
                    },
                    Series {
                        label: "phat difference",
                        points: sp,
                    },
                ],
            )
            .map_err(run_err)?;
            report.file(plot);
            let tol = tolerance.unwrap_or(1e-2);
            let p_mean = p_sum / count as f64;
            report.verdict(
                "estimator difference settles at the transformation parameter",
                (p_mean - p).abs() <= tol,
                &format!("late-window mean {} vs {}", fmt_f64(p_mean), fmt_f64(*p)),
            );
            report.verdict(
                "output channel is unchanged",
                max_y_dev <= tol,
                &format!("late-window max deviation {max_y_dev:.2e}"),
            );
            report.finish(out_dir).map_err(run_err)
        }
    }
}
