use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::Serialize;

use fbia::bayes::{Arity, Engine, GibbsEstimator, IntegratedScores, PriorKind};
use fbia::data_ingest::{load_dataset, ConditionSource, Manifest, Schema};
use fbia::edge_detection::TestMethod;
use fbia::evaluation::{self, Grid, PrCurve};
use fbia::formats::{self, GraphSummary};
use fbia::pipeline::{self, EdgeChange, FitConfig, OutputOptions};
use fbia::simgen::{self, GraphKind, Lineage, SimSettings, SimulationSpec};
use fbia::ConditionedDataset;

use crate::config::{pick, ConfigFile};
use crate::{Cli, Command, EvaluateArgs, FitArgs, Format, ReportArgs, SimulateArgs};

/// Bad invocation; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn parse_flag<T: std::str::FromStr>(what: &str, value: &str) -> anyhow::Result<T> {
    value.parse().map_err(|_| usage(format!("invalid {what} '{value}'")))
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let file = ConfigFile::load(cli.config.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
    let threads = match cli.threads {
        Some(0) => return Err(usage("--threads must be at least 1")),
        Some(t) => t,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building the worker pool")?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => simulate(a, &file),
        Command::Fit(a) => fit(a, &file, threads),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => report(a),
    })
}

#[derive(Serialize)]
struct RunRecord<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    core_version: &'a str,
    threads: Option<usize>,
    seed: Option<u64>,
    inputs: Vec<String>,
    config: C,
}

fn write_run_json<C: Serialize>(
    out: &Path,
    command: &str,
    threads: Option<usize>,
    seed: Option<u64>,
    inputs: Vec<String>,
    config: C,
) -> anyhow::Result<()> {
    let record = RunRecord {
        command,
        version: env!("CARGO_PKG_VERSION"),
        core_version: fbia::VERSION,
        threads,
        seed,
        inputs,
        config,
    };
    formats::write_json(&out.join("run.json"), &record)?;
    Ok(())
}

fn simulate(a: &SimulateArgs, file: &ConfigFile) -> anyhow::Result<()> {
    let f = &file.simulate;
    let kind: GraphKind = parse_flag("kind", &pick(a.kind.clone(), f.kind.clone(), "ar2".into()))?;
    let lineage: Lineage = parse_flag("lineage", &pick(a.lineage.clone(), f.lineage.clone(), "temporal".into()))?;
    let p = pick(a.p, f.p, 50);
    let n = pick(a.n, f.n, 100);
    let k = pick(a.k, f.k, 4);
    let frac = pick(a.frac, f.frac, 0.05);
    let reps = pick(a.reps, f.reps, 1);
    let seed = pick(a.seed, f.seed, 0);
    let defaults = SimSettings::default();
    let settings = SimSettings {
        magnitude: f.magnitude.unwrap_or(defaults.magnitude),
        hub_group_size: f.hub_group_size.unwrap_or(defaults.hub_group_size),
        ridge: f.ridge.unwrap_or(defaults.ridge),
        ..defaults
    };
    if !(0.0..=1.0).contains(&frac) {
        return Err(usage(format!("--frac must lie in [0, 1], got {frac}")));
    }
    if p < 3 {
        return Err(usage("--p must be at least 3"));
    }
    if n < fbia::data_ingest::MIN_SAMPLES {
        return Err(usage(format!("--n must be at least {}", fbia::data_ingest::MIN_SAMPLES)));
    }
    if k == 0 || reps == 0 {
        return Err(usage("--k and --reps must be positive"));
    }
    if settings.hub_group_size < 2 {
        return Err(usage("hub_group_size must be at least 2"));
    }

    let width = reps.to_string().len().max(2);
    let mut specs = Vec::with_capacity(reps);
    for r in 0..reps {
        let spec = SimulationSpec {
            kind,
            p,
            n,
            k,
            lineage,
            frac,
            seed: seed.wrapping_add(r as u64),
            settings,
        };
        let dir = a.out.join(format!("rep_{:0width$}", r + 1));
        let rep = simgen::simulate(&spec).with_context(|| format!("replicate {}", r + 1))?;
        simgen::write_replicate(&dir, &rep, &spec)?;
        log::info!("wrote {}", dir.display());
        specs.push(spec);
    }
    write_run_json(&a.out, "simulate", None, Some(seed), Vec::new(), &specs)?;
    Ok(())
}

fn resolve_fit_config(a: &FitArgs, file: &ConfigFile) -> anyhow::Result<FitConfig> {
    let f = &file.fit;
    let mut cfg = FitConfig::default();
    let prior: PriorKind = parse_flag("prior", &pick(a.prior.clone(), f.prior.clone(), "temporal".into()))?;
    let arity: Arity = parse_flag("arity", &pick(a.arity, f.arity, 2).to_string())?;
    let engine: Engine = parse_flag("engine", &pick(a.engine.clone(), f.engine.clone(), "auto".into()))?;
    let method: TestMethod = parse_flag("method", &pick(a.method.clone(), f.method.clone(), "eb".into()))?;
    let screen: TestMethod =
        parse_flag("screen method", &pick(a.screen_method.clone(), f.screen_method.clone(), "eb".into()))?;

    cfg.screening.alpha1 = pick(a.alpha1, f.alpha1, cfg.screening.alpha1);
    cfg.screening.method = screen;
    cfg.screening.xi = pick(a.xi, f.xi, cfg.screening.xi);
    cfg.alpha2 = pick(a.alpha2, f.alpha2, cfg.alpha2);
    cfg.test_method = method;
    cfg.standardize = if a.no_standardize { false } else { f.standardize.unwrap_or(true) };
    cfg.psi.adjust = a.adjust_covariates || f.adjust_covariates.unwrap_or(false);
    if a.unsigned_adjusted || f.unsigned_adjusted.unwrap_or(false) {
        cfg.psi.form = fbia::psi_scores::AdjustedScoreForm::Unsigned;
    }

    let ic = &mut cfg.integration;
    ic.prior = prior;
    ic.arity = arity;
    ic.engine = engine;
    let hp = &mut ic.hyperparams;
    hp.a1 = pick(a.a1, f.a1, hp.a1);
    hp.b1 = pick(a.b1, f.b1, hp.b1);
    hp.a2 = pick(a.a2, f.a2, hp.a2);
    hp.b2 = pick(a.b2, f.b2, hp.b2);
    hp.alpha = f.dirichlet.unwrap_or(hp.alpha);
    ic.gibbs.sweeps = pick(a.sweeps, f.sweeps, ic.gibbs.sweeps);
    ic.gibbs.burn_in = pick(a.burn_in, f.burn_in, ic.gibbs.burn_in);
    ic.gibbs.estimator = match pick(a.gibbs_estimator.clone(), f.gibbs_estimator.clone(), "rao-blackwell".into()).as_str() {
        "rao-blackwell" => GibbsEstimator::RaoBlackwell,
        "frequencies" => GibbsEstimator::Frequencies,
        other => return Err(usage(format!("invalid gibbs estimator '{other}'"))),
    };
    ic.seed = pick(a.seed, f.seed, ic.seed);
    ic.weights = f.weights.clone();
    ic.pin_null_mean = a.pin_null_mean || f.pin_null_mean.unwrap_or(false);

    for (name, v) in [("alpha1", cfg.screening.alpha1), ("alpha2", cfg.alpha2)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(usage(format!("--{name} must lie in (0, 1), got {v}")));
        }
    }
    if !(cfg.screening.xi > 0.0 && cfg.screening.xi.is_finite()) {
        return Err(usage("--xi must be positive"));
    }
    if cfg.integration.gibbs.sweeps == 0 {
        return Err(usage("--sweeps must be positive"));
    }
    cfg.integration.hyperparams.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

/// Replicate directories below `dir` that contain `marker`, sorted by name.
fn replicate_dirs(dir: &Path, marker: &str) -> anyhow::Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.join(marker).is_file() {
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            out.push((name, path));
        }
    }
    out.sort();
    Ok(out)
}

fn fit(a: &FitArgs, file: &ConfigFile, threads: usize) -> anyhow::Result<()> {
    let cfg = resolve_fit_config(a, file)?;
    let two_step = a.two_step || file.fit.two_step.unwrap_or(false);
    let opts = OutputOptions {
        screening_debug: a.debug_screening,
        posterior_dumps: a.dump_posteriors,
        hubs: a.hubs,
    };
    let inputs: Vec<String>;
    match &a.manifest {
        Some(m) if m.is_dir() && !m.join("manifest.json").is_file() => {
            let reps = replicate_dirs(m, "manifest.json")?;
            if reps.is_empty() {
                bail!("{} holds no manifest.json or replicate directories", m.display());
            }
            for (name, dir) in &reps {
                let manifest = Manifest::read(&dir.join("manifest.json"))?;
                fit_one(&manifest, &cfg, two_step, a, &opts, &a.out.join(name))
                    .with_context(|| format!("replicate {name}"))?;
            }
            inputs = reps.iter().map(|(_, d)| d.display().to_string()).collect();
        }
        Some(m) => {
            let path = if m.is_dir() { m.join("manifest.json") } else { m.clone() };
            let manifest = Manifest::read(&path)?;
            fit_one(&manifest, &cfg, two_step, a, &opts, &a.out)?;
            inputs = vec![path.display().to_string()];
        }
        None => {
            if two_step {
                return Err(usage("--two-step needs a manifest with group labels"));
            }
            let conditions = a
                .files
                .iter()
                .map(|f| {
                    let s = ConditionSource::from_path(f);
                    fbia::data_ingest::ManifestCondition {
                        label: s.label,
                        data: s.data,
                        covariates: None,
                        group: None,
                        truth_edges: None,
                        precision: None,
                    }
                })
                .collect();
            let manifest = Manifest {
                conditions,
                schema: Schema::default(),
                metadata: None,
            };
            fit_one(&manifest, &cfg, false, a, &opts, &a.out)?;
            inputs = a.files.iter().map(|f| f.display().to_string()).collect();
        }
    }
    write_run_json(&a.out, "fit", Some(threads), Some(cfg.integration.seed), inputs, &cfg)?;
    Ok(())
}

fn fit_one(
    manifest: &Manifest,
    cfg: &FitConfig,
    two_step: bool,
    a: &FitArgs,
    opts: &OutputOptions,
    out: &Path,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    if two_step {
        return fit_two_step(manifest, cfg, opts, out);
    }
    let ds: ConditionedDataset = load_dataset(&manifest.sources(), &manifest.schema)?;
    if cfg.psi.adjust && !ds.has_covariates() {
        bail!("--adjust-covariates given but the inputs carry no covariates");
    }
    let cache = if a.cache {
        let d = out.join("cache");
        std::fs::create_dir_all(&d)?;
        Some(d)
    } else {
        None
    };
    let result = pipeline::fit_with_cache(&ds, cfg, cache.as_deref())?;
    pipeline::write_fit_outputs(out, &result, cfg, opts)?;
    log::info!(
        "{}: {} edges over {} conditions",
        out.display(),
        result.graph.conditions.iter().map(|c| c.edges.len()).sum::<usize>(),
        ds.k()
    );
    Ok(())
}

fn fit_two_step(manifest: &Manifest, cfg: &FitConfig, opts: &OutputOptions, out: &Path) -> anyhow::Result<()> {
    let groups = manifest.groups();
    if groups.len() != 2 || manifest.conditions.iter().any(|c| c.group.is_none()) {
        return Err(usage(format!(
            "--two-step needs every condition labelled with one of exactly two groups, found {groups:?}"
        )));
    }
    let mut sets: Vec<ConditionedDataset> = Vec::with_capacity(2);
    for g in &groups {
        let sources: Vec<ConditionSource> = manifest
            .conditions
            .iter()
            .filter(|c| c.group.as_ref() == Some(g))
            .map(|c| ConditionSource {
                label: c.label.clone(),
                data: c.data.clone(),
                covariates: c.covariates.clone(),
            })
            .collect();
        sets.push(load_dataset(&sources, &manifest.schema)?);
    }
    let res = pipeline::two_step_integration([&sets[0], &sets[1]], [&groups[0], &groups[1]], cfg)?;
    for (g, name) in groups.iter().enumerate() {
        formats::write_psi_csv(&out.join(format!("psi_scores_{name}.csv")), &res.psi[g])?;
        formats::write_integrated_csv(&out.join(format!("stage1_{name}.csv")), &res.stage1[g])?;
    }
    formats::write_integrated_csv(&out.join("integrated_scores.csv"), &res.stage2)?;
    for k in 0..res.graph.k() {
        formats::write_edges_csv(&out.join(format!("edges/cond_{}.csv", k + 1)), &res.graph, k)?;
    }
    formats::write_json(&out.join("graph_summary.json"), &formats::graph_summary(&res.graph, opts.hubs.max(1)))?;
    formats::write_json(&out.join("edge_changes.json"), &pipeline::edge_changes(&res.graph))?;
    Ok(())
}

fn parse_grid(s: &str) -> anyhow::Result<Grid> {
    if s.trim().eq_ignore_ascii_case("auto") {
        return Ok(Grid::Auto);
    }
    let values = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("bad grid threshold '{t}'"))))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(usage("grid thresholds must be finite numbers"));
    }
    Ok(Grid::Thresholds(values))
}

fn read_truth(dir: &Path) -> anyhow::Result<Vec<BTreeSet<(usize, usize)>>> {
    let path = dir.join("manifest.json");
    if !path.is_file() {
        bail!("missing truth: {} not found", path.display());
    }
    let manifest = Manifest::read(&path)?;
    manifest
        .conditions
        .iter()
        .map(|c| {
            let edges = c
                .truth_edges
                .as_ref()
                .ok_or_else(|| anyhow!("missing truth: condition '{}' lists no truth edges", c.label))?;
            Ok(formats::read_edges_csv(edges)?
                .into_iter()
                .map(|(i, j)| (i.min(j), i.max(j)))
                .collect())
        })
        .collect()
}

#[derive(Serialize)]
struct ReplicateRow {
    replicate: String,
    method: String,
    auprc: f64,
    degenerate: bool,
    precision: Option<f64>,
    recall: Option<f64>,
}

#[derive(Serialize)]
struct PowerLawRow {
    replicate: String,
    exponent: Option<f64>,
    r_squared: Option<f64>,
    note: Option<String>,
}

fn evaluate(a: &EvaluateArgs) -> anyhow::Result<()> {
    let grid = parse_grid(&a.grid)?;
    let alphas = match &a.alpha_sweep {
        None => None,
        Some(list) => {
            let v = list
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("bad alpha level '{t}'"))))
                .collect::<anyhow::Result<Vec<f64>>>()?;
            if v.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
                return Err(usage("alpha levels must lie in (0, 1)"));
            }
            Some(v)
        }
    };
    let sweep_method: TestMethod = parse_flag("method", &a.method)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let pairs: Vec<(String, PathBuf, PathBuf)> = if a.fit.join("integrated_scores.csv").is_file() {
        vec![("fit".into(), a.fit.clone(), a.truth.clone())]
    } else {
        let reps = replicate_dirs(&a.fit, "integrated_scores.csv")?;
        if reps.is_empty() {
            bail!("{} holds no fit outputs", a.fit.display());
        }
        reps.into_iter().map(|(n, d)| (n.clone(), d, a.truth.join(&n))).collect()
    };

    let mut rows = Vec::new();
    let mut power = Vec::new();
    let mut fbia_auc = Vec::new();
    let mut sep_auc = Vec::new();
    for (name, fit_dir, truth_dir) in &pairs {
        let truth = read_truth(truth_dir)?;
        let (p, scores) = formats::read_score_csv(&fit_dir.join("integrated_scores.csv"))?;
        let fbia_curve = evaluation::pr_curve(&scores, &truth, &grid)?;

        let mut estimate = Vec::with_capacity(truth.len());
        for k in 0..truth.len() {
            let path = fit_dir.join(format!("edges/cond_{}.csv", k + 1));
            estimate.push(formats::read_edges_csv(&path)?.into_iter().collect::<BTreeSet<_>>());
        }
        let conf = evaluation::confusion(&estimate, &truth, p)?;
        rows.push(ReplicateRow {
            replicate: name.clone(),
            method: "fbia".into(),
            auprc: fbia_curve.auprc,
            degenerate: fbia_curve.degenerate,
            precision: Some(conf.cumulated.precision()),
            recall: Some(conf.cumulated.recall()),
        });
        fbia_auc.push(fbia_curve.auprc);
        evaluation::write_pr_csv(&ensure(&a.out.join(format!("pr/{name}_fbia.csv")))?, &fbia_curve)?;

        if let Some(alphas) = &alphas {
            let integrated = IntegratedScores {
                edge_index: fbia::edges::EdgeIndex::new(p),
                scores: scores.clone(),
            };
            let points = pipeline::alpha_sweep_points(&integrated, &truth, alphas, sweep_method)?;
            let curve = PrCurve {
                auprc: evaluation::trapezoid_auprc(&points),
                degenerate: points.len() <= 1,
                points,
            };
            rows.push(ReplicateRow {
                replicate: name.clone(),
                method: "fbia-alpha-sweep".into(),
                auprc: curve.auprc,
                degenerate: curve.degenerate,
                precision: None,
                recall: None,
            });
            evaluation::write_pr_csv(&a.out.join(format!("pr/{name}_fbia_alpha_sweep.csv")), &curve)?;
        }

        let mut curves: Vec<(&str, &PrCurve)> = vec![("FBIA", &fbia_curve)];
        let sep_curve;
        let psi_path = fit_dir.join("psi_scores.csv");
        if psi_path.is_file() {
            let (_, psi) = formats::read_score_csv(&psi_path)?;
            sep_curve = evaluation::pr_curve(&psi, &truth, &grid)?;
            rows.push(ReplicateRow {
                replicate: name.clone(),
                method: "separated".into(),
                auprc: sep_curve.auprc,
                degenerate: sep_curve.degenerate,
                precision: None,
                recall: None,
            });
            sep_auc.push(sep_curve.auprc);
            evaluation::write_pr_csv(&a.out.join(format!("pr/{name}_separated.csv")), &sep_curve)?;
            curves.push(("separated", &sep_curve));
        }
        std::fs::write(a.out.join(format!("pr/{name}.svg")), evaluation::pr_svg(&curves))?;

        let degrees: Vec<usize> = estimate
            .iter()
            .flat_map(|set| {
                let mut d = vec![0usize; p];
                for &(i, j) in set {
                    d[i] += 1;
                    d[j] += 1;
                }
                d
            })
            .collect();
        power.push(match evaluation::powerlaw_fit(&degrees) {
            Ok(fit) => PowerLawRow {
                replicate: name.clone(),
                exponent: Some(fit.exponent),
                r_squared: Some(fit.r_squared),
                note: None,
            },
            Err(e) => PowerLawRow {
                replicate: name.clone(),
                exponent: None,
                r_squared: None,
                note: Some(e.to_string()),
            },
        });
    }

    let mut summary = vec![evaluation::summarize("fbia", &fbia_auc)];
    if !sep_auc.is_empty() {
        summary.push(evaluation::summarize("separated", &sep_auc));
    }
    match a.format {
        Format::Csv => {
            evaluation::write_summary_csv(&a.out.join("auprc_summary.csv"), &summary)?;
            std::fs::write(a.out.join("replicates.csv"), replicate_csv(&rows))?;
            std::fs::write(a.out.join("powerlaw.csv"), powerlaw_csv(&power))?;
        }
        Format::Json => {
            formats::write_json(&a.out.join("auprc_summary.json"), &summary)?;
            formats::write_json(&a.out.join("replicates.json"), &rows)?;
            formats::write_json(&a.out.join("powerlaw.json"), &power)?;
        }
    }
    for s in &summary {
        println!("{}\t{} replicates\tmean AUPRC {:.4} (sd {:.4})", s.label, s.replicates, s.mean, s.sd);
    }
    write_run_json(
        &a.out,
        "evaluate",
        None,
        None,
        vec![a.fit.display().to_string(), a.truth.display().to_string()],
        serde_json::json!({ "grid": a.grid, "format": format!("{:?}", a.format).to_lowercase() }),
    )?;
    Ok(())
}

fn ensure(path: &Path) -> anyhow::Result<PathBuf> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(path.to_path_buf())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn replicate_csv(rows: &[ReplicateRow]) -> String {
    let mut s = String::from("replicate,method,auprc,degenerate,precision,recall\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.replicate,
            r.method,
            r.auprc,
            r.degenerate,
            opt(r.precision),
            opt(r.recall)
        );
    }
    s
}

fn powerlaw_csv(rows: &[PowerLawRow]) -> String {
    let mut s = String::from("replicate,exponent,r_squared,note\n");
    for r in rows {
        let note = r.note.as_deref().unwrap_or("").replace(',', ";");
        let _ = writeln!(s, "{},{},{},{}", r.replicate, opt(r.exponent), opt(r.r_squared), note);
    }
    s
}

#[derive(Serialize)]
struct ReportRow {
    condition: String,
    edges: usize,
    density: f64,
    hubs: Vec<String>,
    new_edges: Option<usize>,
    disappearing_edges: Option<usize>,
}

fn report(a: &ReportArgs) -> anyhow::Result<()> {
    let read = |name: &str| -> anyhow::Result<String> {
        let path = a.fit.join(name);
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))
    };
    let summary: GraphSummary = serde_json::from_str(&read("graph_summary.json")?)?;
    let changes: Vec<EdgeChange> = match read("edge_changes.json") {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => Vec::new(),
    };
    let rows: Vec<ReportRow> = summary
        .conditions
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let change = k.checked_sub(1).and_then(|prev| changes.get(prev));
            ReportRow {
                condition: c.label.clone(),
                edges: c.edges,
                density: c.density,
                hubs: c
                    .hubs
                    .iter()
                    .take(a.top)
                    .map(|h| format!("{}({})", h.name, h.degree))
                    .collect(),
                new_edges: change.map(|ch| ch.new.len()),
                disappearing_edges: change.map(|ch| ch.disappearing.len()),
            }
        })
        .collect();

    let mut csv = String::from("condition,edges,density,new,disappearing,hubs\n");
    for r in &rows {
        let count = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{:.6},{},{},{}",
            r.condition,
            r.edges,
            r.density,
            count(r.new_edges),
            count(r.disappearing_edges),
            r.hubs.join(" ")
        );
    }
    let json = serde_json::to_string_pretty(&rows)? + "\n";
    let text = match a.format {
        Format::Csv => &csv,
        Format::Json => &json,
    };
    print!("{text}");
    if let Some(out) = &a.out {
        std::fs::create_dir_all(out)?;
        let name = match a.format {
            Format::Csv => "report.csv",
            Format::Json => "report.json",
        };
        std::fs::write(out.join(name), text)?;
    }
    Ok(())
}
