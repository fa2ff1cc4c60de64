use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use metasub::config::{AnalysisConfig, MetaConfig};
use metasub::meta::{checkpoint_files, load_checkpoint, save_checkpoint, AdaptedParamsMatrix, TaskDescriptor};
use metasub::numerics::SeededRng;
use metasub::pipeline::{
    analyze, collect_from_state, read_history_csv, read_spectrum_csv, save_history, train_from_config,
    write_spectrum_csv,
};
use metasub::reconstruct::{load_records, median_by_k, probe_sweep, save_records, ProbeConfig, ProbeTargets};
use metasub::subspace::{mean_abs_param_diff, pca, AnalysisMethod, IsomapFit, SpectrumReport};
use metasub::taskgen::{PrototypeFamilySpec, TaskFamily};
use rayon::prelude::*;
use serde::Serialize;

use crate::manifest::{guard, RunManifest};
use crate::svg::{self, Series};

pub const CONFIG_FILE: &str = "config.json";
pub const HISTORY_CSV: &str = "history.csv";
pub const HISTORY_SVG: &str = "history.svg";
pub const ADAPTED_STEM: &str = "adapted";
pub const REPORT_JSON: &str = "report.json";
pub const SUMMARY_TXT: &str = "summary.txt";

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub force: bool,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn out_dir(common: &Common) -> Result<PathBuf> {
    common.out.clone().ok_or_else(|| anyhow!("--out DIR is required"))
}

/// The run directories a command applies to: the sweep children when `dir`
/// is a sweep parent, otherwise `dir` itself.
fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    if RunManifest::exists(dir) {
        let m = RunManifest::load(dir)?;
        if !m.children.is_empty() {
            return Ok(m.children.iter().map(|c| dir.join(c)).collect());
        }
    }
    Ok(vec![dir.to_path_buf()])
}

fn for_each_run(dir: &Path, f: impl Fn(&Path) -> Result<()> + Sync) -> Result<()> {
    let dirs = run_dirs(dir)?;
    let results: Vec<Result<()>> = dirs
        .par_iter()
        .map(|d| f(d).with_context(|| format!("run {}", d.display())))
        .collect();
    results.into_iter().collect()
}

/// `--config` if given, else the snapshot written by `train`, else `None`.
fn run_config(common: &Common, dir: &Path) -> Result<Option<MetaConfig>> {
    let path = match &common.config {
        Some(p) => p.clone(),
        None => dir.join(CONFIG_FILE),
    };
    if common.config.is_none() && !path.is_file() {
        return Ok(None);
    }
    let cfg = MetaConfig::load(&path).with_context(|| format!("loading config {}", path.display()))?;
    Ok(Some(cfg))
}

fn finish(dir: &Path, command: &str, files: &[String], start: Instant, config: Option<&MetaConfig>) -> Result<()> {
    let mut m = RunManifest::load_or_new(dir)?;
    if let Some(cfg) = config {
        m.config = Some(serde_json::to_value(cfg)?);
    }
    m.record(dir, command, files, start.elapsed().as_secs_f64())?;
    m.save(dir)
}

// ---------------------------------------------------------------- train

pub fn train(common: &Common) -> Result<()> {
    let path = common.config.as_ref().ok_or_else(|| anyhow!("train needs --config PATH"))?;
    let mut cfg = MetaConfig::load(path).with_context(|| format!("invalid config {}", path.display()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = match (&common.out, &cfg.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => o.clone(),
        (None, None) => bail!("no output directory: pass --out DIR or set output_dir in the config"),
    };
    std::fs::create_dir_all(&out)?;
    if cfg.sweep.is_none() {
        return train_run(&out, &cfg, common.force);
    }

    let start = Instant::now();
    let children = cfg.expand()?;
    let names: Vec<String> = children.iter().map(|c| c.0.clone()).collect();
    guard(&out, &[CONFIG_FILE.to_string()], common.force)?;
    write_text(&out.join(CONFIG_FILE), &cfg.to_json()?)?;
    let results: Vec<Result<()>> = children
        .par_iter()
        .map(|(name, child)| {
            let dir = out.join(name);
            std::fs::create_dir_all(&dir)?;
            train_run(&dir, child, common.force).with_context(|| format!("sweep child {name}"))
        })
        .collect();
    results.into_iter().collect::<Result<()>>()?;
    let mut m = RunManifest::load_or_new(&out)?;
    m.children = names;
    m.config = Some(serde_json::to_value(&cfg)?);
    m.record(&out, "train", &[CONFIG_FILE.to_string()], start.elapsed().as_secs_f64())?;
    m.save(&out)
}

fn train_run(dir: &Path, cfg: &MetaConfig, force: bool) -> Result<()> {
    let start = Instant::now();
    let mut files = vec![CONFIG_FILE.to_string(), HISTORY_CSV.to_string(), HISTORY_SVG.to_string()];
    guard(dir, &files, force)?;
    write_text(&dir.join(CONFIG_FILE), &cfg.to_json()?)?;
    let (state, history) = train_from_config(cfg)?;
    save_checkpoint(dir, &state, &cfg.method(), cfg.seed, &cfg.family)?;
    save_history(&history, &dir.join(HISTORY_CSV))?;

    let rows = read_history_csv(File::open(dir.join(HISTORY_CSV))?)?;
    let mut series = vec![Series::line(
        "query loss",
        rows.iter().map(|r| (r.epoch as f64, r.mean_query_loss)).collect(),
    )];
    if rows.iter().any(|r| r.mean_query_accuracy.is_some()) {
        series.push(Series::line(
            "query accuracy",
            rows.iter().filter_map(|r| r.mean_query_accuracy.map(|a| (r.epoch as f64, a))).collect(),
        ));
    }
    write_text(&dir.join(HISTORY_SVG), &svg::plot("Meta-training", "epoch", "post-adaptation query", &series))?;

    files.extend(checkpoint_files(&state));
    finish(dir, "train", &files, start, Some(cfg))
}

// ---------------------------------------------------------------- collect

pub fn collect(common: &Common, checkpoint: Option<&Path>, n_tasks: Option<usize>) -> Result<()> {
    let out = out_dir(common)?;
    for_each_run(&out, |dir| collect_run(common, dir, checkpoint, n_tasks))
}

fn adapted_files() -> Vec<String> {
    vec![format!("{ADAPTED_STEM}.bin"), format!("{ADAPTED_STEM}.json")]
}

fn collect_run(common: &Common, dir: &Path, checkpoint: Option<&Path>, n_tasks: Option<usize>) -> Result<()> {
    let start = Instant::now();
    let files = adapted_files();
    guard(dir, &files, common.force)?;
    let ckpt = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| dir.join("checkpoint.json"));
    let (state, meta) = load_checkpoint(&ckpt).with_context(|| format!("loading checkpoint {}", ckpt.display()))?;
    let cfg = run_config(common, dir)?;
    if let Some(cfg) = &cfg {
        if cfg.layers() != meta.layers {
            return Err(metasub::Error::Format {
                path: ckpt.clone(),
                message: format!(
                    "checkpoint layers {:?} do not match the configured network {:?}",
                    meta.layers.iter().map(|l| (l.in_dim, l.out_dim)).collect::<Vec<_>>(),
                    cfg.layers().iter().map(|l| (l.in_dim, l.out_dim)).collect::<Vec<_>>()
                ),
            }
            .into());
        }
    }
    let n = n_tasks
        .or(cfg.as_ref().map(|c| c.analysis.n_collect_tasks))
        .unwrap_or(AnalysisConfig::default().n_collect_tasks);
    let seed = common.seed.unwrap_or(meta.seed);
    std::fs::create_dir_all(dir)?;
    let (points, _) = collect_from_state(&state, &meta.family, &meta.method, n, seed)?;
    points.save(dir, ADAPTED_STEM)?;
    finish(dir, "collect", &files, start, None)
}

// ---------------------------------------------------------------- analyze

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    pub matrix: Option<PathBuf>,
    pub method: Option<AnalysisMethod>,
    pub k_max: Option<usize>,
    pub n_neighbors: Option<usize>,
    pub threshold: Option<f64>,
    pub embedding: bool,
    pub paramdiff: bool,
}

fn load_matrix(matrix: Option<&Path>, dir: &Path) -> Result<AdaptedParamsMatrix> {
    let bin = matrix
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join(format!("{ADAPTED_STEM}.bin")));
    let json = bin.with_extension("json");
    AdaptedParamsMatrix::load(&bin, &json).with_context(|| format!("loading adapted parameters {}", bin.display()))
}

pub fn analyze_cmd(common: &Common, opts: &AnalyzeOptions) -> Result<()> {
    let out = match (&common.out, &opts.matrix) {
        (Some(o), _) => o.clone(),
        (None, Some(m)) => m.parent().map(Path::to_path_buf).unwrap_or_default(),
        (None, None) => bail!("pass --out DIR or --matrix PATH"),
    };
    std::fs::create_dir_all(&out)?;
    if opts.matrix.is_some() {
        analyze_run(common, &out, opts)
    } else {
        for_each_run(&out, |dir| analyze_run(common, dir, opts))
    }
}

fn spectrum_stem(method: AnalysisMethod) -> String {
    format!("spectrum_{method}")
}

fn analyze_run(common: &Common, dir: &Path, opts: &AnalyzeOptions) -> Result<()> {
    let start = Instant::now();
    let method = opts.method.unwrap_or(AnalysisMethod::Pca);
    let stem = spectrum_stem(method);
    let mut files = vec![format!("{stem}.csv"), format!("{stem}.json"), format!("{stem}.svg")];
    if opts.embedding {
        files.push(format!("embedding_{method}.csv"));
        files.push(format!("embedding_{method}.svg"));
    }
    if opts.paramdiff {
        files.extend(["paramdiff.csv", "paramdiff_layers.csv", "paramdiff.svg"].map(String::from));
    }
    guard(dir, &files, common.force)?;

    let points = load_matrix(opts.matrix.as_deref(), dir)?;
    let cfg = run_config(common, dir)?;
    let mut analysis = cfg.as_ref().map(|c| c.analysis.clone()).unwrap_or_default();
    if let Some(k) = opts.k_max {
        analysis.k_range[1] = k;
    }
    if let Some(n) = opts.n_neighbors {
        analysis.n_neighbors = n;
    }
    match (opts.threshold, method) {
        (Some(t), AnalysisMethod::Pca) => analysis.pca_threshold = t,
        (Some(t), AnalysisMethod::Isomap) => analysis.isomap_threshold = t,
        (None, _) => {}
    }
    let mut report = analyze(&points.matrix, method, &analysis)?;
    report.seed = common.seed.or(cfg.as_ref().map(|c| c.seed));

    write_spectrum_csv(&report, File::create(dir.join(format!("{stem}.csv")))?)?;
    write_text(&dir.join(format!("{stem}.json")), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    let rows = read_spectrum_csv(File::open(dir.join(format!("{stem}.csv")))?)?;
    let ylabel = match method {
        AnalysisMethod::Pca => "cumulative explained variance",
        AnalysisMethod::Isomap => "normalized reconstruction error",
    };
    write_text(
        &dir.join(format!("{stem}.svg")),
        &svg::plot(
            &format!("{method} spectrum (estimated dim {})", report.estimated_dim),
            "k",
            ylabel,
            &[Series::line(method.to_string(), rows.iter().map(|r| (r.0 as f64, r.2)).collect())],
        ),
    )?;

    if opts.embedding {
        let z = match method {
            AnalysisMethod::Pca => {
                let p = pca(&points.matrix, 2)?;
                p.project(&points.matrix, p.n_components().min(2))?
            }
            AnalysisMethod::Isomap => IsomapFit::new(&points.matrix, analysis.n_neighbors)?.embed(2)?.embedding,
        };
        let path = dir.join(format!("embedding_{method}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["z1", "z2"])?;
        for r in z.row_iter() {
            let z2 = r.get(1).copied().unwrap_or(0.0);
            w.write_record([r[0].to_string(), z2.to_string()])?;
        }
        w.flush()?;
        drop(w);
        let mut rdr = csv::Reader::from_path(&path)?;
        let pts = rdr
            .deserialize::<(f64, f64)>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        write_text(
            &dir.join(format!("embedding_{method}.svg")),
            &svg::plot(&format!("{method} embedding"), "z1", "z2", &[Series::markers("tasks", pts)]),
        )?;
    }

    if opts.paramdiff {
        write_paramdiff(dir, &points)?;
    }
    finish(dir, &format!("analyze_{method}"), &files, start, None)
}

fn write_paramdiff(dir: &Path, points: &AdaptedParamsMatrix) -> Result<()> {
    let diff = mean_abs_param_diff(&points.matrix, &points.layers)?;
    // heat-map layout: one cell per weight (row = output unit, col = input unit), biases in col -1
    let mut w = csv::Writer::from_path(dir.join("paramdiff.csv"))?;
    w.write_record(["layer", "row", "col", "value"])?;
    let mut off = 0;
    for (l, spec) in points.layers.iter().enumerate() {
        for o in 0..spec.out_dim {
            for i in 0..spec.in_dim {
                let v = diff.per_param[off + o * spec.in_dim + i];
                w.write_record([l.to_string(), o.to_string(), i.to_string(), v.to_string()])?;
            }
        }
        for o in 0..spec.out_dim {
            let v = diff.per_param[off + spec.in_dim * spec.out_dim + o];
            w.write_record([l.to_string(), o.to_string(), "-1".into(), v.to_string()])?;
        }
        off += spec.param_count();
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("paramdiff_layers.csv"))?;
    for l in &diff.per_layer {
        w.serialize(l)?;
    }
    w.flush()?;
    drop(w);
    let mut rdr = csv::Reader::from_path(dir.join("paramdiff_layers.csv"))?;
    let layers: Vec<metasub::subspace::LayerDiff> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    let bars: Vec<(String, f64)> = layers.iter().map(|l| (format!("layer {}", l.layer), l.mean)).collect();
    write_text(
        &dir.join("paramdiff.svg"),
        &svg::bars("Mean absolute parameter difference between tasks", "mean over layer", &bars),
    )
}

// ---------------------------------------------------------------- reconstruct

#[derive(Debug, Clone, Default)]
pub struct ReconstructOptions {
    pub matrix: Option<PathBuf>,
    pub k: Vec<usize>,
    pub seeds: Vec<u64>,
    pub shuffle: bool,
}

pub fn reconstruct_cmd(common: &Common, opts: &ReconstructOptions) -> Result<()> {
    let out = match (&common.out, &opts.matrix) {
        (Some(o), _) => o.clone(),
        (None, Some(m)) => m.parent().map(Path::to_path_buf).unwrap_or_default(),
        (None, None) => bail!("pass --out DIR or --matrix PATH"),
    };
    std::fs::create_dir_all(&out)?;
    if opts.matrix.is_some() {
        reconstruct_run(common, &out, opts)
    } else {
        for_each_run(&out, |dir| reconstruct_run(common, dir, opts))
    }
}

fn probe_stem(shuffle: bool) -> &'static str {
    if shuffle {
        "probe_shuffled"
    } else {
        "probe"
    }
}

fn probe_targets(points: &AdaptedParamsMatrix, family: Option<&TaskFamily>, seed: u64) -> Result<ProbeTargets> {
    match points.descriptors.first() {
        Some(TaskDescriptor::Amplitudes(_)) => Ok(ProbeTargets::from_amplitudes(&points.descriptors)?),
        Some(TaskDescriptor::Prototypes(p)) => {
            let spec = match family {
                Some(TaskFamily::Prototypes(s)) => s.clone(),
                _ => {
                    let mut s = PrototypeFamilySpec::new(p.rows());
                    s.input_dim = p.cols();
                    s
                }
            };
            Ok(ProbeTargets::sample_from_prototypes(&points.descriptors, &spec, &mut SeededRng::new(seed))?)
        }
        _ => bail!("the adapted-parameter file carries no task descriptors to reconstruct"),
    }
}

fn reconstruct_run(common: &Common, dir: &Path, opts: &ReconstructOptions) -> Result<()> {
    let start = Instant::now();
    let stem = probe_stem(opts.shuffle);
    let files = vec![format!("{stem}.csv"), format!("{stem}.svg")];
    guard(dir, &files, common.force)?;
    let points = load_matrix(opts.matrix.as_deref(), dir)?;
    let cfg = run_config(common, dir)?;
    let k_values = if opts.k.is_empty() {
        cfg.as_ref().map(|c| c.reconstruct.k_values.clone()).unwrap_or_else(|| vec![1, 2, 3, 4, 5, 6])
    } else {
        opts.k.clone()
    };
    let seeds = if opts.seeds.is_empty() {
        cfg.as_ref().map(|c| c.reconstruct.seeds.clone()).unwrap_or_else(|| (0..5).collect())
    } else {
        opts.seeds.clone()
    };
    let probe = cfg.as_ref().map(|c| c.reconstruct.probe.clone()).unwrap_or_else(ProbeConfig::default);
    let seed = common.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
    let targets = probe_targets(&points, cfg.as_ref().map(|c| &c.family), seed)?;
    let max_k = *k_values.iter().max().ok_or_else(|| anyhow!("empty k list"))?;
    let p = pca(&points.matrix, max_k)?;
    let records = probe_sweep(&points, &p, &targets, &k_values, &seeds, &probe, opts.shuffle)?;
    save_records(&records, &dir.join(format!("{stem}.csv")))?;

    let back = load_records(&dir.join(format!("{stem}.csv")))?;
    let metric = back.first().map(|r| format!("{:?}", r.metric).to_lowercase()).unwrap_or_default();
    let series = vec![
        Series::line("median", median_by_k(&back).into_iter().map(|(k, v)| (k as f64, v)).collect()),
        Series::markers("per seed", back.iter().map(|r| (r.k as f64, r.value)).collect()),
    ];
    let title = if opts.shuffle { "Probe with shuffled codes" } else { "Task reconstruction probe" };
    write_text(&dir.join(format!("{stem}.svg")), &svg::plot(title, "embedding size k", &format!("test {metric}"), &series))?;
    finish(dir, stem, &files, start, None)
}

// ---------------------------------------------------------------- report

#[derive(Debug, Serialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub final_query_loss: Option<f64>,
    pub final_query_accuracy: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct ProbeSummary {
    pub shuffled: bool,
    pub metric: String,
    pub median_by_k: Vec<(usize, f64)>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub name: String,
    pub config: Option<serde_json::Value>,
    pub training: Option<TrainingSummary>,
    pub spectra: Vec<SpectrumReport>,
    pub probes: Vec<ProbeSummary>,
    pub paramdiff_layers: Option<Vec<metasub::subspace::LayerDiff>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<RunReport>,
}

const EXPECTED: [&str; 5] = [crate::manifest::MANIFEST, CONFIG_FILE, "checkpoint.json", HISTORY_CSV, "adapted.bin"];

pub fn report(common: &Common) -> Result<()> {
    let dir = out_dir(common)?;
    let files = vec![REPORT_JSON.to_string(), SUMMARY_TXT.to_string()];
    guard(&dir, &files, common.force)?;
    let start = Instant::now();
    let rep = build_report(&dir, "run")?;
    write_text(&dir.join(REPORT_JSON), &(serde_json::to_string_pretty(&rep)? + "\n"))?;
    let summary = summary_text(&rep);
    write_text(&dir.join(SUMMARY_TXT), &summary)?;
    print!("{summary}");
    finish(&dir, "report", &files, start, None)
}

fn build_report(dir: &Path, name: &str) -> Result<RunReport> {
    if !RunManifest::exists(dir) {
        let missing: Vec<&str> = EXPECTED.iter().copied().filter(|f| !dir.join(f).exists()).collect();
        bail!("{} is not a run directory; missing artifacts: {}", dir.display(), missing.join(", "));
    }
    let manifest = RunManifest::load(dir)?;
    manifest.verify(dir)?;
    if !manifest.children.is_empty() {
        let children = manifest
            .children
            .iter()
            .map(|c| build_report(&dir.join(c), c))
            .collect::<Result<Vec<_>>>()?;
        return Ok(RunReport {
            name: name.to_string(),
            config: manifest.config,
            training: None,
            spectra: vec![],
            probes: vec![],
            paramdiff_layers: None,
            children,
        });
    }
    let listed = |f: &str| manifest.artifacts.contains_key(f);
    let training = if listed(HISTORY_CSV) {
        let rows = read_history_csv(File::open(dir.join(HISTORY_CSV))?)?;
        Some(TrainingSummary {
            epochs: rows.len(),
            final_query_loss: rows.last().map(|r| r.mean_query_loss),
            final_query_accuracy: rows.last().and_then(|r| r.mean_query_accuracy),
        })
    } else {
        None
    };
    let mut spectra = Vec::new();
    for method in [AnalysisMethod::Pca, AnalysisMethod::Isomap] {
        let f = format!("{}.json", spectrum_stem(method));
        if listed(&f) {
            let r: SpectrumReport = serde_json::from_reader(BufReader::new(File::open(dir.join(&f))?))
                .with_context(|| format!("reading {f}"))?;
            spectra.push(r);
        }
    }
    let mut probes = Vec::new();
    for shuffled in [false, true] {
        let f = format!("{}.csv", probe_stem(shuffled));
        if listed(&f) {
            let recs = load_records(&dir.join(&f))?;
            probes.push(ProbeSummary {
                shuffled,
                metric: recs.first().map(|r| format!("{:?}", r.metric).to_lowercase()).unwrap_or_default(),
                median_by_k: median_by_k(&recs),
            });
        }
    }
    let paramdiff_layers = if listed("paramdiff_layers.csv") {
        let mut rdr = csv::Reader::from_path(dir.join("paramdiff_layers.csv"))?;
        Some(rdr.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
    } else {
        None
    };
    Ok(RunReport {
        name: name.to_string(),
        config: manifest.config,
        training,
        spectra,
        probes,
        paramdiff_layers,
        children: vec![],
    })
}

fn summary_lines(rep: &RunReport, out: &mut String) {
    use std::fmt::Write;
    let _ = writeln!(out, "[{}]", rep.name);
    if let Some(t) = &rep.training {
        let _ = write!(out, "  training: {} epochs", t.epochs);
        if let Some(l) = t.final_query_loss {
            let _ = write!(out, ", final query loss {l:.4}");
        }
        if let Some(a) = t.final_query_accuracy {
            let _ = write!(out, ", accuracy {a:.3}");
        }
        out.push('\n');
    }
    for s in &rep.spectra {
        let _ = writeln!(
            out,
            "  {}: estimated_dim {}{} (threshold {})",
            s.method,
            s.estimated_dim,
            if s.saturated { " (saturated)" } else { "" },
            s.threshold
        );
    }
    for p in &rep.probes {
        let cells: Vec<String> = p.median_by_k.iter().map(|(k, v)| format!("k={k}: {v:.4}")).collect();
        let _ = writeln!(
            out,
            "  probe{} median {}: {}",
            if p.shuffled { " (shuffled)" } else { "" },
            p.metric,
            cells.join(", ")
        );
    }
    if let Some(layers) = &rep.paramdiff_layers {
        let cells: Vec<String> = layers.iter().map(|l| format!("layer {} {:.3e}", l.layer, l.mean)).collect();
        let _ = writeln!(out, "  param diff: {}", cells.join(", "));
    }
    for c in &rep.children {
        summary_lines(c, out);
    }
}

pub fn summary_text(rep: &RunReport) -> String {
    let mut s = String::new();
    summary_lines(rep, &mut s);
    s
}
