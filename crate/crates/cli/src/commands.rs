use std::io::Write;
use std::path::{Path, PathBuf};

use spca::data::{labels_of, CenterOptions, Dataset, RawData, Task};
use spca::harness::{pareto_sweep, prediction_error, run_experiment, lambda_scale, ExperimentOutcome, ExperimentPlan, ParetoPoint};
use spca::kernel::{CenteredKernel, KernelKind, KernelSpec};
use spca::method::{train, Method, TrainSettings};
use spca::model::Prediction;
use spca::solver::NuisanceMode;
use spca::synthetic::{generate, SyntheticSpec};

use crate::artifact::Artifact;
use crate::error::{CliError, CliResult};
use crate::plan::PlanFile;
use crate::table::{encode_labels, fmt_f64, load_training, read_table, write_csv};
use crate::{ExperimentArgs, FitArgs, KernelArg, ModeArg, PredictArgs, SynthArgs};

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| CliError::Data(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

fn parse_method(name: &str, task: Task) -> CliResult<Method> {
    let method: Method = name.parse().map_err(|e: spca::SpcaError| CliError::Usage(e.to_string()))?;
    if method.task() != task {
        return Err(CliError::Usage(format!("method {method} does not apply to {task:?} data")));
    }
    Ok(method)
}

fn kernel_spec(kind: KernelArg, bandwidth: Option<f64>) -> KernelSpec {
    match kind {
        KernelArg::Linear => KernelSpec::linear(),
        KernelArg::Rbf => KernelSpec { kind: KernelKind::Rbf, bandwidth },
    }
}

pub fn fit(a: &FitArgs) -> CliResult<()> {
    let task: Task = a.task.into();
    let method = parse_method(&a.method, task)?;
    let raw = load_training(&a.data, &a.response_col, task)?;
    let ds = Dataset::from_raw(&raw, CenterOptions { standardize: a.standardize })?;

    let mut s = TrainSettings::new(method, a.r);
    s.algorithm = a.algorithm.into();
    s.lr_reg = a.lr_reg;
    s.seed = a.seed;
    s.max_outer = a.max_outer;
    s.outer_tol = a.outer_tol;
    if method.is_kernel() {
        s.kernel = Some(kernel_spec(a.kernel, a.bandwidth));
    }
    s.mode = match a.mode {
        ModeArg::Mle => NuisanceMode::Mle,
        ModeArg::Cv => {
            let lambda = match a.lambda {
                Some(l) => l,
                None if method.is_supervised_pca() => {
                    let scale = match &s.kernel {
                        Some(spec) => {
                            let k = CenteredKernel::new(&ds.x, spec)?;
                            lambda_scale(&k.k_tilde, &ds.y, method.family())?
                        }
                        None => lambda_scale(&ds.x, &ds.y, method.family())?,
                    };
                    log::info!("no λ given; using the data scale {scale:e}");
                    scale
                }
                None => 1.0,
            };
            NuisanceMode::Cv { lambda }
        }
    };
    let trained = train(&ds, &s)?;
    let train_error = prediction_error(&trained.model.predict(&raw.x)?, &raw.y, task)?;

    let artifact = Artifact {
        model: trained.model.clone(),
        response_columns: response_columns_of(&a.data, &a.response_col)?,
    };
    write_atomic(&a.out, artifact.to_text()?.as_bytes())?;

    let m = &trained.model;
    let mut out = String::new();
    out.push_str(&format!("method {method}\nr {}\n", m.r()));
    if method.is_supervised_pca() {
        let mode = match a.mode {
            ModeArg::Cv => "cv",
            ModeArg::Mle => "mle",
        };
        out.push_str(&format!("mode {mode}\n"));
        out.push_str(&format!("objective {}\n", trained.objective().map_or("none".into(), fmt_f64)));
    }
    out.push_str(&format!("variation_explained {}\n", fmt_f64(trained.variation_explained)));
    out.push_str(&format!("train_error {}\n", fmt_f64(train_error)));
    if let (Some(l), Some(g)) = (m.lambda, m.gamma) {
        out.push_str(&format!("lambda {}\ngamma {}\n", fmt_f64(l), fmt_f64(g)));
    }
    if let Some(nu) = &m.nuisance {
        out.push_str(&format!("sigma_x2 {}\nalpha {}\n", fmt_f64(nu.sigma_x2), fmt_f64(nu.alpha)));
        if let Some(sy) = nu.sigma_y2 {
            out.push_str(&format!("sigma_y2 {}\n", fmt_f64(sy)));
        }
    }
    if method.is_supervised_pca() {
        out.push_str(&format!("iterations {}\nconverged {}\n", trained.iterations, trained.converged));
        if !trained.converged {
            log::warn!("stopped at the outer iteration limit before converging");
        }
    }
    print!("{out}");
    Ok(())
}

/// Header names of the response columns as the training file spells them.
fn response_columns_of(path: &Path, spec: &[String]) -> CliResult<Vec<String>> {
    let header = read_table(path)?.headers;
    if spec.is_empty() {
        return Ok(vec![header.last().cloned().unwrap_or_default()]);
    }
    spec.iter()
        .map(|s| {
            if header.contains(s) {
                Ok(s.clone())
            } else {
                s.parse::<usize>()
                    .ok()
                    .and_then(|i| header.get(i).cloned())
                    .ok_or_else(|| CliError::Usage(format!("column '{s}' not found")))
            }
        })
        .collect()
}

pub fn predict(a: &PredictArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.model)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.model.display())))?;
    let Artifact { model, response_columns } = Artifact::from_text(&text)?;
    let table = read_table(&a.data)?;
    let xcols = match &model.feature_names {
        Some(names) => {
            let missing: Vec<&String> = names.iter().filter(|n| !table.headers.contains(n)).collect();
            if !missing.is_empty() {
                return Err(CliError::Data(format!("input lacks feature columns {missing:?}")));
            }
            table.resolve(names)?
        }
        None => (0..table.headers.len())
            .filter(|c| !response_columns.contains(&table.headers[*c]))
            .collect(),
    };
    if xcols.len() != model.n_features() {
        return Err(CliError::Data(format!(
            "model expects {} features, input has {}",
            model.n_features(),
            xcols.len()
        )));
    }
    let classes = model.response_names.clone().unwrap_or_default();
    let task = model.family().task();
    let r = model.r();

    let mut headers: Vec<String> = Vec::new();
    if a.embedding {
        headers.extend((1..=r).map(|k| format!("z{k}")));
    }
    match task {
        Task::Regression => headers.extend(response_columns.iter().map(|c| format!("pred_{c}"))),
        Task::Classification => {
            headers.extend(classes.iter().map(|c| format!("prob_{c}")));
            headers.push("label".into());
        }
    }

    let x = table.numeric(&xcols)?;
    let mut rows: Vec<Vec<String>> = Vec::with_capacity(x.nrows());
    if x.nrows() > 0 {
        let z = model.embed(&x)?;
        let pred = model.predict(&x)?;
        for i in 0..x.nrows() {
            let mut row: Vec<String> = Vec::new();
            if a.embedding {
                row.extend(z.row(i).iter().map(|v| fmt_f64(*v)));
            }
            row.extend(pred.values().row(i).iter().map(|v| fmt_f64(*v)));
            if let Prediction::Classification { labels, .. } = &pred {
                row.push(classes.get(labels[i]).cloned().unwrap_or_else(|| labels[i].to_string()));
            }
            rows.push(row);
        }
        if !response_columns.is_empty() && table.has_columns(&response_columns) {
            let ycols = table.resolve(&response_columns)?;
            let y = match task {
                Task::Regression => table.numeric(&ycols)?,
                Task::Classification => {
                    let labels: Vec<String> = table.rows.iter().map(|r| r[ycols[0]].clone()).collect();
                    encode_labels(&labels, &classes)?
                }
            };
            println!("error {}", fmt_f64(prediction_error(&pred, &y, task)?));
        }
    }
    println!("rows {}", rows.len());
    write_atomic(&a.out, &write_csv(&headers, &rows)?)
}

fn resolve_data(plan_path: &Path, plan: &PlanFile, cli: &Option<PathBuf>) -> CliResult<PathBuf> {
    if let Some(d) = cli {
        return Ok(d.clone());
    }
    match &plan.data {
        Some(d) if d.is_relative() => Ok(plan_path.parent().unwrap_or(Path::new(".")).join(d)),
        Some(d) => Ok(d.clone()),
        None => Err(CliError::Usage("no data file in the plan or on the command line".into())),
    }
}

pub fn experiment(a: &ExperimentArgs) -> CliResult<()> {
    let plan_file = PlanFile::load(&a.plan)?;
    let mut plan = plan_file.to_plan()?;
    if let Some(seed) = a.seed {
        plan.split.seed = seed;
    }
    let task = plan_file.task();
    let data = resolve_data(&a.plan, &plan_file, &a.data)?;
    let raw = load_training(&data, &plan_file.response_col, task)?;
    let center = CenterOptions { standardize: plan_file.standardize };

    let outcome = run_experiment(&raw, &plan, center)?;
    std::fs::create_dir_all(&a.out)?;
    write_atomic(&a.out.join("records.ldjson"), &ldjson(&outcome.records)?)?;
    write_atomic(&a.out.join("failures.ldjson"), &ldjson(&outcome.failures)?)?;
    write_atomic(&a.out.join("summary.tsv"), summary_tsv(&outcome).as_bytes())?;
    write_atomic(&a.out.join("timings.tsv"), timings_tsv(&outcome).as_bytes())?;
    if plan_file.pareto {
        let text = pareto_tsv(&raw, &plan, center)?;
        write_atomic(&a.out.join("pareto.tsv"), text.as_bytes())?;
    }

    println!("{:<8} {:>4} {:>6} {:>12} {:>12} {:>12} {:>8}", "method", "ok", "failed", "test_error", "sd", "se", "v.e.");
    for s in &outcome.summary {
        println!(
            "{:<8} {:>4} {:>6} {:>12.6} {:>12.6} {:>12.6} {:>8.4}",
            s.method.name(),
            s.n_ok,
            s.n_failed,
            s.mean_test_error,
            s.sd_test_error,
            s.se_test_error,
            s.mean_variation_explained
        );
    }
    if !outcome.failures.is_empty() {
        eprintln!("{} cell fits failed; see failures.ldjson", outcome.failures.len());
        for f in outcome.failures.iter().take(10) {
            eprintln!("  {} repeat {} fold {:?}: {}", f.method, f.repeat, f.fold, f.error);
        }
    }
    if outcome.records.is_empty() {
        return Err(CliError::Numerical("every refit failed".into()));
    }
    Ok(())
}

fn ldjson<T: serde::Serialize>(items: &[T]) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it).map_err(|e| CliError::Data(e.to_string()))?;
        out.push(b'\n');
    }
    Ok(out)
}

fn summary_tsv(o: &ExperimentOutcome) -> String {
    let mut s = String::from(
        "method\tn_ok\tn_failed\tmean_test_error\tsd_test_error\tse_test_error\tmean_train_error\tmean_variation_explained\n",
    );
    for m in &o.summary {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            m.method,
            m.n_ok,
            m.n_failed,
            fmt_f64(m.mean_test_error),
            fmt_f64(m.sd_test_error),
            fmt_f64(m.se_test_error),
            fmt_f64(m.mean_train_error),
            fmt_f64(m.mean_variation_explained)
        ));
    }
    s
}

fn timings_tsv(o: &ExperimentOutcome) -> String {
    let mut s = String::from("method\trepeat\tseconds\n");
    for r in &o.records {
        s.push_str(&format!("{}\t{}\t{}\n", r.method, r.repeat, r.wall_time.as_secs_f64()));
    }
    s
}

fn point_rows(s: &mut String, method: Method, curve: &str, p: &ParetoPoint) {
    let lambda = p.lambda.map_or("none".to_string(), fmt_f64);
    for (set, ve, err) in [
        ("train", p.train_variation_explained, p.train_error),
        ("test", p.test_variation_explained, p.test_error),
    ] {
        s.push_str(&format!("{method}\t{curve}\t{lambda}\t{set}\t{}\t{}\n", fmt_f64(ve), fmt_f64(err)));
    }
}

/// λ sweeps on the first split of each supervised PCA method, with the
/// principal-component and reduced-rank endpoints.
fn pareto_tsv(raw: &RawData, plan: &ExperimentPlan, center: CenterOptions) -> CliResult<String> {
    let mut s = String::from("method\tcurve\tlambda\tset\tvariation_explained\terror\n");
    let split = plan.split.split(raw.n(), 0)?;
    let train_raw = raw.subset(&split.train);
    let test_raw = raw.subset(&split.test);
    let train_ds = Dataset::from_raw(&train_raw, center)?;
    let r = plan.r.values().into_iter().min().unwrap_or(1);
    for &method in plan.methods.iter().filter(|m| m.is_supervised_pca()) {
        let mut base = TrainSettings::new(method, r);
        base.algorithm = plan.algorithm;
        base.lr_reg = plan.lr_reg;
        base.seed = plan.split.seed;
        let design = if method.is_kernel() {
            let spec = match plan.kernel {
                KernelKind::Linear => KernelSpec::linear(),
                KernelKind::Rbf => KernelSpec { kind: KernelKind::Rbf, bandwidth: None },
            };
            base.kernel = Some(spec);
            CenteredKernel::new(&train_ds.x, &spec)?.k_tilde
        } else {
            train_ds.x.clone()
        };
        let lambdas = plan
            .lambda_grid
            .values()
            .iter()
            .map(|&v| plan.lambda_grid.resolve(v, &design, &train_ds.y, method.family()))
            .collect::<spca::Result<Vec<f64>>>()?;
        let sweep = pareto_sweep(&train_raw, &test_raw, &base, &lambdas, center)?;
        for (lambda, p) in sweep.lambdas.iter().zip(&sweep.points) {
            match p {
                Ok(p) => point_rows(&mut s, method, "sweep", p),
                Err(e) => eprintln!("{method} sweep at λ = {lambda:e} failed: {e}"),
            }
        }
        point_rows(&mut s, method, method.principal_component_baseline().name(), &sweep.baseline);
        if let Some(rrr) = &sweep.rrr {
            point_rows(&mut s, method, "rrr", rrr);
        }
    }
    Ok(s)
}

pub fn synth(a: &SynthArgs) -> CliResult<()> {
    let task: Task = a.task.into();
    let spec = SyntheticSpec {
        n: a.n,
        p: a.p,
        r: a.r,
        q: a.q,
        sigma_x2: a.sigma_x2,
        alpha: a.alpha,
        sigma_y2: a.sigma_y2,
        task,
        seed: a.seed,
    };
    let data = generate(&spec)?;
    let raw = &data.raw;
    let mut headers: Vec<String> = (1..=raw.p()).map(|j| format!("x{j}")).collect();
    match task {
        Task::Regression if raw.q() == 1 => headers.push("y".into()),
        Task::Regression => headers.extend((1..=raw.q()).map(|k| format!("y{k}"))),
        Task::Classification => headers.push("label".into()),
    }
    let labels = labels_of(&raw.y);
    let rows: Vec<Vec<String>> = (0..raw.n())
        .map(|i| {
            let mut row: Vec<String> = raw.x.row(i).iter().map(|v| fmt_f64(*v)).collect();
            match task {
                Task::Regression => row.extend(raw.y.row(i).iter().map(|v| fmt_f64(*v))),
                Task::Classification => row.push(labels[i].to_string()),
            }
            row
        })
        .collect();
    write_atomic(&a.out, &write_csv(&headers, &rows)?)?;
    if let Some(path) = &a.truth {
        let l = data.l_true.basis();
        let h: Vec<String> = (1..=l.ncols()).map(|k| format!("l{k}")).collect();
        let rows: Vec<Vec<String>> = l
            .row_iter()
            .map(|r| r.iter().map(|v| fmt_f64(*v)).collect())
            .collect();
        write_atomic(path, &write_csv(&h, &rows)?)?;
    }
    Ok(())
}
