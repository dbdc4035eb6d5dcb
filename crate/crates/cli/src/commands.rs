//! Subcommand implementations.

use std::path::{Path, PathBuf};

use gwr_route::dataset::load_csv;
use gwr_route::diagnostics::{
    build_weight_matrix, global_collinearity, local_collinearity, morans_i, morans_i_permutation,
    standardized_residuals, CollinearityReport, MoranInput, MoranResult, StandardizedResiduals,
};
use gwr_route::formula::Design;
use gwr_route::synth::{generate_svc, SimulationSpec};
use gwr_route::{
    apply_transform, fit_gwr, fit_msgwr, fit_mxgwr, fit_ols, fit_sam, optimize_bandwidth,
    run_routemap, Bandwidth, BandwidthCurve, Criterion, Dataset, Distances, Fit, Formula,
    KernelSpec, ModelFit,
};
use serde::Serialize;

use crate::config::{ModelKind, RunConfig};
use crate::output::{
    write_bytes, write_curve_csv, write_geojson, write_report_json, write_surface_csv,
    write_surfaces_csv,
};
use crate::{merge_config, CliError, Command};

pub fn dispatch(command: &Command, threads: Option<usize>) -> Result<(), CliError> {
    match command {
        Command::Fit(a) => fit(&merge_config(&a.data, Some(&a.model), None, threads)?),
        Command::BwCurve(a) => bw_curve(&merge_config(&a.data, Some(&a.model), None, threads)?),
        Command::Routemap(a) => {
            let mut cfg = merge_config(&a.data, Some(&a.model), Some(&a.weights), threads)?;
            if let Some(v) = a.global_threshold {
                cfg.routemap.global_threshold = v;
            }
            if let Some(v) = a.similarity_ratio {
                cfg.routemap.local_similarity_ratio = v;
            }
            if let Some(v) = a.alpha {
                cfg.routemap.alpha = v;
            }
            routemap(&cfg)
        }
        Command::Diagnose(a) => {
            let mut cfg = merge_config(&a.data, Some(&a.model), Some(&a.weights), threads)?;
            if let Some(v) = a.permutations {
                cfg.permutations = v;
            }
            diagnose(&cfg)
        }
        Command::Simulate(a) => simulate(&a.spec, a.seed, &a.out, a.truth.as_deref()),
    }
}

/// Loads the input, applies the configured transforms and builds the
/// formula.
pub fn load(cfg: &RunConfig) -> Result<(Dataset, Formula, Distances), CliError> {
    let schema = cfg.schema()?;
    let input = cfg.input()?;
    if schema.predictors.is_empty() {
        return Err(CliError::Usage("--predictors is required".into()));
    }
    let mut ds: Dataset = load_csv(input, &schema)?;
    for step in &cfg.transforms {
        ds = apply_transform(&ds, &step.variable, step.transform)?;
    }
    let formula = Formula::new(schema.response, schema.predictors);
    let dm = Distances::new(&ds);
    if !dm.coincident_pairs().is_empty() {
        log::warn!(
            "{} pair(s) of coincident locations",
            dm.coincident_pairs().len()
        );
    }
    Ok((ds, formula, dm))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::Io(cfg.out.clone(), e))?;
    Ok(cfg.out.clone())
}

fn bandwidth(cfg: &RunConfig) -> Result<Option<Bandwidth<f64>>, CliError> {
    cfg.bandwidth
        .as_deref()
        .map(|s| {
            s.parse()
                .map_err(|e: gwr_route::Error| CliError::Usage(e.to_string()))
        })
        .transpose()
}

#[derive(Serialize)]
pub struct FitResult {
    pub model: &'static str,
    pub fit: Fit,
    pub bandwidth_curve: Option<BandwidthCurve<f64>>,
}

/// Fits the configured model.
pub fn fit_model(
    cfg: &RunConfig,
    ds: &Dataset,
    formula: &Formula,
    dm: &Distances,
) -> Result<FitResult, CliError> {
    let mut curve = None;
    let fit = match cfg.model {
        ModelKind::Ols => ModelFit::Global(fit_ols(ds, formula)?),
        ModelKind::Sam => ModelFit::Global(fit_sam(ds, formula, dm, &cfg.sam)?),
        ModelKind::Gwr => {
            let bw = match (bandwidth(cfg)?, cfg.bandwidth_search) {
                (Some(bw), None) => bw,
                (_, search) => {
                    let criterion = search.unwrap_or(Criterion::Aicc);
                    let (bw, c) = optimize_bandwidth(
                        ds,
                        formula,
                        dm,
                        cfg.kernel,
                        cfg.bandwidth_form,
                        criterion,
                    )?;
                    warn_curve(&c, bw);
                    curve = Some(c);
                    bw
                }
            };
            ModelFit::Gwr(fit_gwr(ds, formula, dm, &KernelSpec::new(cfg.kernel, bw))?)
        }
        ModelKind::Mxgwr => {
            let bw = bandwidth(cfg)?.ok_or_else(|| CliError::Usage("mxgwr needs --bw".into()))?;
            let spec = KernelSpec::new(cfg.kernel, bw);
            ModelFit::Mixed(fit_mxgwr(
                ds,
                formula,
                dm,
                &cfg.global_terms,
                &cfg.local_terms,
                &spec,
            )?)
        }
        ModelKind::Msgwr => {
            let f = fit_msgwr(ds, formula, dm, cfg.kernel, cfg.bandwidth_form, &cfg.msgwr)?;
            if !f.converged {
                log::warn!("MS-GWR did not converge in {} sweeps", cfg.msgwr.max_sweeps);
            }
            ModelFit::Multiscale(f)
        }
    };
    Ok(FitResult {
        model: fit.label(),
        fit,
        bandwidth_curve: curve,
    })
}

fn warn_curve(c: &BandwidthCurve<f64>, bw: Bandwidth<f64>) {
    if c.plateau {
        log::warn!("bandwidth curve is plateaued: a global model would likely suffice");
    }
    if c.boundary_minimum {
        log::warn!("optimal bandwidth {bw} lies on the search boundary");
    }
    if c.overfit {
        log::warn!("bandwidth {bw} indicates over-fitting");
    }
}

fn write_surfaces(fit: &Fit, dir: &Path, stem: &str, geojson: bool) -> Result<(), CliError> {
    if let (Some(coords), Some(surfaces)) = (fit.coords(), fit.surfaces()) {
        write_surfaces_csv(coords, &surfaces, &dir.join(format!("{stem}.csv")))?;
        if geojson {
            write_geojson(coords, &surfaces, &dir.join(format!("{stem}.geojson")))?;
        }
    }
    Ok(())
}

fn summary(fit: &Fit) -> String {
    let mut s = format!(
        "{}: AICc {:.2}, R2 {:.4}",
        fit.label(),
        fit.aicc(),
        fit.r_squared()
    );
    match fit {
        ModelFit::Global(g) => {
            for c in &g.coefficients {
                s.push_str(&format!(
                    "\n  {:<14} {:>12.5} (se {:.5}, p {:.4})",
                    c.term, c.estimate, c.std_error, c.p_value
                ));
            }
        }
        ModelFit::Gwr(g) => s.push_str(&format!(", bandwidth {}", g.spec.bandwidth)),
        ModelFit::Mixed(m) => s.push_str(&format!(", bandwidth {}", m.spec.bandwidth)),
        ModelFit::Multiscale(m) => {
            for (t, b) in m.terms.iter().zip(&m.bandwidths) {
                s.push_str(&format!("\n  {t:<14} {b}"));
            }
        }
    }
    s
}

fn fit(cfg: &RunConfig) -> Result<(), CliError> {
    let (ds, formula, dm) = load(cfg)?;
    let dir = out_dir(cfg)?;
    let result = fit_model(cfg, &ds, &formula, &dm)?;
    write_report_json("fit", cfg.seed, cfg, &result, &dir.join("fit.json"))?;
    write_surfaces(&result.fit, &dir, "surfaces", cfg.geojson)?;
    if let Some(c) = &result.bandwidth_curve {
        write_curve_csv(c, &dir.join("bandwidth_curve.csv"))?;
    }
    println!("{}", summary(&result.fit));
    Ok(())
}

fn bw_curve(cfg: &RunConfig) -> Result<(), CliError> {
    let (ds, formula, dm) = load(cfg)?;
    let dir = out_dir(cfg)?;
    let criterion = cfg.bandwidth_search.unwrap_or(Criterion::Aicc);
    let (bw, curve) = optimize_bandwidth(
        &ds,
        &formula,
        &dm,
        cfg.kernel,
        cfg.bandwidth_form,
        criterion,
    )?;
    warn_curve(&curve, bw);
    write_curve_csv(&curve, &dir.join("bandwidth_curve.csv"))?;
    write_report_json(
        "bw-curve",
        cfg.seed,
        cfg,
        &curve,
        &dir.join("bandwidth_curve.json"),
    )?;
    println!(
        "optimal bandwidth {bw} ({} evaluations; plateau {}, boundary {}, overfit {})",
        curve.points.len(),
        curve.plateau,
        curve.boundary_minimum,
        curve.overfit
    );
    Ok(())
}

fn routemap(cfg: &RunConfig) -> Result<(), CliError> {
    let (ds, formula, _) = load(cfg)?;
    let dir = out_dir(cfg)?;
    let report = match run_routemap(&ds, &formula, &cfg.routemap) {
        Ok(r) => r,
        Err(e) => {
            if let gwr_route::Error::RouteMap { stage, partial, .. } = &e {
                let mut text = partial.join("\n");
                text.push_str(&format!("\naborted at {stage}: {e}\n"));
                write_bytes(&dir.join("report_partial.txt"), text.as_bytes())?;
            }
            return Err(e.into());
        }
    };
    write_report_json("routemap", cfg.seed, cfg, &report, &dir.join("report.json"))?;
    let narrative = report.narrative();
    write_bytes(&dir.join("report.txt"), narrative.trim_end().as_bytes())?;
    write_surfaces(
        &ModelFit::Multiscale(report.step2.msgwr.clone()),
        &dir,
        "surfaces_msgwr",
        cfg.geojson,
    )?;
    if let Some(g) = &report.candidates.gwr {
        write_surfaces(&ModelFit::Gwr(g.clone()), &dir, "surfaces_gwr", cfg.geojson)?;
    }
    if let Some(m) = &report.candidates.mxgwr {
        write_surfaces(
            &ModelFit::Mixed(m.clone()),
            &dir,
            "surfaces_mxgwr",
            cfg.geojson,
        )?;
    }
    print!("{narrative}");
    Ok(())
}

#[derive(Serialize)]
pub struct Diagnostics {
    pub model: &'static str,
    pub moran: MoranResult<f64>,
    pub residuals: StandardizedResiduals<f64>,
    /// Absent with fewer than two predictors.
    pub collinearity: Option<CollinearityReport<f64>>,
}

fn diagnose(cfg: &RunConfig) -> Result<(), CliError> {
    let (ds, formula, dm) = load(cfg)?;
    let dir = out_dir(cfg)?;
    let result = fit_model(cfg, &ds, &formula, &dm)?;
    let fit = &result.fit;
    let w = build_weight_matrix(&dm, cfg.weights, cfg.row_standardize)?;
    let design: Design<f64> = Design::new(&ds, &formula)?;
    let input = match fit {
        ModelFit::Global(_) => MoranInput::ResidualAdjusted(&design.x),
        _ => MoranInput::Raw,
    };
    let moran = if cfg.permutations > 0 {
        morans_i_permutation(fit.residuals(), &w, input, cfg.permutations, cfg.seed)?
    } else {
        morans_i(fit.residuals(), &w, input)?
    };
    let residuals = standardized_residuals(fit);
    let collinearity = if formula.predictors.len() >= 2 {
        let local = match fit {
            ModelFit::Gwr(g) => Some(local_collinearity(&ds, &formula, &dm, &g.spec)?),
            ModelFit::Mixed(m) => Some(local_collinearity(&ds, &formula, &dm, &m.spec)?),
            _ => None,
        };
        Some(CollinearityReport {
            global: global_collinearity(&ds, &formula)?,
            local,
        })
    } else {
        None
    };

    let path = dir.join("residuals.csv");
    let csv_err = |e: csv::Error| CliError::Csv(path.clone(), e);
    let mut wtr = csv::Writer::from_path(&path).map_err(csv_err)?;
    wtr.write_record(["x", "y", "residual", "standardized", "outlier"])
        .map_err(csv_err)?;
    for (i, c) in ds.coords().iter().enumerate() {
        wtr.write_record([
            c[0].to_string(),
            c[1].to_string(),
            fit.residuals()[i].to_string(),
            residuals.values[i].to_string(),
            u8::from(residuals.outliers.contains(&i)).to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| CliError::Io(path.clone(), e))?;

    if let Some(local) = collinearity.as_ref().and_then(|c| c.local.as_ref()) {
        let path = dir.join("local_collinearity.csv");
        let csv_err = |e: csv::Error| CliError::Csv(path.clone(), e);
        let mut wtr = csv::Writer::from_path(&path).map_err(csv_err)?;
        let mut header = vec!["x".to_string(), "y".to_string(), "cn".to_string()];
        header.extend(formula.predictors.iter().map(|p| format!("vif_{p}")));
        wtr.write_record(&header).map_err(csv_err)?;
        for (i, c) in ds.coords().iter().enumerate() {
            let mut row = vec![
                c[0].to_string(),
                c[1].to_string(),
                local.condition_number[i].to_string(),
            ];
            row.extend(local.vif.iter().map(|v| v[i].to_string()));
            wtr.write_record(&row).map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| CliError::Io(path.clone(), e))?;
    }
    if !matches!(fit, ModelFit::Global(_)) {
        write_surface_csv(fit, &dir.join("surfaces.csv"))?;
    }

    let diag = Diagnostics {
        model: fit.label(),
        moran,
        residuals,
        collinearity,
    };
    write_report_json(
        "diagnose",
        cfg.seed,
        cfg,
        &diag,
        &dir.join("diagnostics.json"),
    )?;
    println!(
        "{} residual Moran's I = {:.4} (z {:.3}, p {:.4}){}; {} outlier(s)",
        diag.model,
        diag.moran.i,
        diag.moran.z,
        diag.moran.p_value,
        diag.moran
            .permutation
            .as_ref()
            .map(|p| format!(", permutation p {:.4}", p.p_value))
            .unwrap_or_default(),
        diag.residuals.outliers.len()
    );
    if let Some(c) = &diag.collinearity {
        println!(
            "condition number {:.2}{}",
            c.global.condition_number,
            if c.global.cn_flag { " (above 30)" } else { "" }
        );
    }
    Ok(())
}

/// Writes `id,u,v,y,<predictors>`; coordinates are named `u`/`v` because
/// the response is `y`.
fn simulate(
    spec_path: &Path,
    seed: Option<u64>,
    out: &Path,
    truth_path: Option<&Path>,
) -> Result<(), CliError> {
    let text =
        std::fs::read_to_string(spec_path).map_err(|e| CliError::Io(spec_path.to_path_buf(), e))?;
    let mut spec: SimulationSpec<f64> = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("spec {}: {e}", spec_path.display())))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let (ds, truth) = generate_svc(&spec)?;
    let formula = spec.formula();
    let csv_err = |p: &Path, e: csv::Error| CliError::Csv(p.to_path_buf(), e);
    let mut w = csv::Writer::from_path(out).map_err(|e| csv_err(out, e))?;
    let mut header = vec![
        "id".to_string(),
        "u".into(),
        "v".into(),
        formula.response.clone(),
    ];
    header.extend(formula.predictors.iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(out, e))?;
    let cols: Vec<&[f64]> = formula
        .predictors
        .iter()
        .map(|p| ds.variable(p))
        .collect::<Result<_, _>>()?;
    let y = ds.variable(&formula.response)?;
    for (i, c) in ds.coords().iter().enumerate() {
        let mut row = vec![
            ds.ids()[i].clone(),
            c[0].to_string(),
            c[1].to_string(),
            y[i].to_string(),
        ];
        row.extend(cols.iter().map(|col| col[i].to_string()));
        w.write_record(&row).map_err(|e| csv_err(out, e))?;
    }
    w.flush().map_err(|e| CliError::Io(out.to_path_buf(), e))?;
    if let Some(tp) = truth_path {
        let mut w = csv::Writer::from_path(tp).map_err(|e| csv_err(tp, e))?;
        let mut header = vec!["u".to_string(), "v".into()];
        header.extend(truth.terms.iter().map(|t| format!("beta_{t}")));
        w.write_record(&header).map_err(|e| csv_err(tp, e))?;
        for (i, c) in ds.coords().iter().enumerate() {
            let mut row = vec![c[0].to_string(), c[1].to_string()];
            row.extend(truth.coefficients.iter().map(|k| k[i].to_string()));
            w.write_record(&row).map_err(|e| csv_err(tp, e))?;
        }
        w.flush().map_err(|e| CliError::Io(tp.to_path_buf(), e))?;
    }
    println!("wrote {} observations (seed {})", ds.n(), spec.seed);
    Ok(())
}
