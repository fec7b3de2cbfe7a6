//! Subcommand implementations. Each returns the text it would print for
//! the chosen [`Emit`] format; `main` only handles arguments and exit codes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use csdim::agreement::{pairwise_reports, panel_report, AgreementReport, AlphaLevel};
use csdim::corpus::{parse_annotations, parse_corpus, split_corpus, Corpus, Dimension, Source, SplitSpec, NUM_DIMENSIONS};
use csdim::eval::{aggregate_runs, render_table, run_protocol, Averaging, Corpora, MeanStd, RunReport};
use csdim::model::{Checkpoint, DependencyMatrixView, CHECKPOINT_FORMAT};
use csdim::stats::{significance_summary, SignificanceSummary, TTestVariant};
use csdim::synth::{generate, SyntheticCorpus, SyntheticSpec};
use csdim::{Error, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Emit {
    #[default]
    Text,
    Jsonl,
}

pub const OUTPUT_SUBDIRS: [&str; 4] = ["reports", "checkpoints", "matrices", "logs"];

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

fn json_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("record serializes") + "\n"
}

pub fn load_corpora(cfg: &ExperimentConfig) -> Result<Corpora> {
    let load = |p: &Option<PathBuf>| p.as_deref().map(parse_corpus).transpose();
    Ok(Corpora {
        conan: load(&cfg.corpus.conan)?,
        twitter: load(&cfg.corpus.twitter)?,
        combined: load(&cfg.corpus.combined)?,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub reports: Vec<RunReport>,
    /// Mean σ(D) over seeds, per dependency-variant id.
    pub mean_matrices: BTreeMap<String, DependencyMatrixView>,
    /// Every file written, in write order.
    pub files: Vec<PathBuf>,
    pub text: String,
    pub jsonl: String,
}

impl RunOutput {
    pub fn emit(&self, emit: Emit) -> &str {
        match emit {
            Emit::Text => &self.text,
            Emit::Jsonl => &self.jsonl,
        }
    }
}

#[derive(Serialize)]
struct SummaryRecord<'a> {
    record: &'static str,
    protocol: &'a str,
    variant_id: &'a str,
    averaging: Averaging,
    cells: BTreeMap<&'static str, MeanStd>,
}

fn summary_records(reports: &[RunReport], protocol: &str) -> Result<String> {
    let mut out = String::new();
    for averaging in [Averaging::Weighted, Averaging::Macro] {
        for r in reports {
            let row = r.summary(averaging)?;
            let mut cells = BTreeMap::new();
            for (k, c) in row.cells.iter().enumerate() {
                let name = Dimension::from_index(k).map_or("macro_avg", |d| d.name());
                cells.insert(name, *c);
            }
            out.push_str(&json_line(&SummaryRecord {
                record: "summary",
                protocol,
                variant_id: &r.variant_id,
                averaging,
                cells,
            }));
        }
    }
    Ok(out)
}

fn mean_matrix(views: &[DependencyMatrixView]) -> DependencyMatrixView {
    let mut m = [[0.0; NUM_DIMENSIONS]; NUM_DIMENSIONS];
    for v in views {
        for (row, vr) in m.iter_mut().zip(&v.0) {
            for (a, b) in row.iter_mut().zip(vr) {
                *a += b / views.len() as f64;
            }
        }
    }
    DependencyMatrixView(m)
}

/// Runs every configured variant over every seed and writes the output
/// tree. Identical configs produce byte-identical files.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let protocol = cfg.protocol()?;
    let plans = cfg.variants.iter().map(|v| cfg.plan(v)).collect::<Result<Vec<_>>>()?;
    let corpora = load_corpora(cfg)?;

    let root = &cfg.output_dir;
    for sub in OUTPUT_SUBDIRS {
        create_dir(&root.join(sub))?;
    }
    let mut files = Vec::new();
    let mut put = |path: PathBuf, contents: &str| -> Result<()> {
        write(&path, contents)?;
        files.push(path);
        Ok(())
    };

    let mut reports = Vec::with_capacity(plans.len());
    let mut mean_matrices = BTreeMap::new();
    for plan in &plans {
        let out = run_protocol(
            protocol,
            &plan.id,
            &plan.model,
            &plan.encoder,
            &plan.train,
            &corpora,
            &cfg.seeds,
            cfg.workers,
        )?;
        put(root.join("reports").join(format!("{}.jsonl", plan.id)), &out.report.to_records()?)?;
        let mut views = Vec::new();
        for o in &out.outcomes {
            let stem = format!("{}_seed{}", plan.id, o.seed);
            let ckpt = serde_json::to_string_pretty(&Checkpoint::from_model(&o.model, &plan.encoder))?;
            put(root.join("checkpoints").join(format!("{stem}.json")), &ckpt)?;
            put(root.join("logs").join(format!("{stem}.jsonl")), &o.history.to_jsonl())?;
            if let Ok(view) = o.model.dependency_view() {
                put(root.join("matrices").join(format!("{stem}.tsv")), &view.to_table())?;
                views.push(view);
            }
        }
        if !views.is_empty() {
            let mean = mean_matrix(&views);
            put(root.join("matrices").join(format!("{}_mean.tsv", plan.id)), &mean.to_table())?;
            mean_matrices.insert(plan.id.clone(), mean);
        }
        reports.push(out.report);
    }

    let seeds: Vec<String> = cfg.seeds.iter().map(u64::to_string).collect();
    let mut text = format!("protocol: {protocol}\nseeds: {}\n\n", seeds.join(", "));
    text.push_str("weighted F1 (mean ± std over seeds)\n");
    text.push_str(&render_table(&reports, Averaging::Weighted)?);
    text.push_str("\nmacro F1 (mean ± std over seeds)\n");
    text.push_str(&render_table(&reports, Averaging::Macro)?);
    for (id, m) in &mean_matrices {
        text.push_str(&format!("\n{id}: mean learned dependency matrix σ(D)\n{}", m.to_table()));
    }
    let jsonl = summary_records(&reports, protocol.name())?;
    put(root.join("summary.txt"), &text)?;
    put(root.join("summary.jsonl"), &jsonl)?;
    Ok(RunOutput {
        reports,
        mean_matrices,
        files,
        text,
        jsonl,
    })
}

pub fn cmd_run(config_path: &Path) -> Result<RunOutput> {
    run_experiment(&ExperimentConfig::load(config_path)?)
}

/// Generates a synthetic corpus and writes it in the interchange format.
pub fn cmd_synth(spec: &SyntheticSpec, out: &Path) -> Result<SyntheticCorpus> {
    let generated = generate(spec)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    generated.corpus.write_jsonl(out)?;
    Ok(generated)
}

pub fn load_synth_spec(path: &Path) -> Result<SyntheticSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let spec: SyntheticSpec = toml::from_str(&text).map_err(|e| Error::invalid("synth spec", e.message().to_string()))?;
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IaaResult {
    pub file: PathBuf,
    pub panel: AgreementReport,
    pub pairs: Vec<AgreementReport>,
}

#[derive(Serialize)]
struct IaaRecord<'a> {
    record: &'static str,
    file: String,
    scope: &'static str,
    #[serde(flatten)]
    report: &'a AgreementReport,
}

/// Panel and pairwise agreement for each file and dimension.
pub fn cmd_iaa(paths: &[PathBuf], dims: &[Dimension], level: AlphaLevel) -> Result<Vec<IaaResult>> {
    if paths.is_empty() {
        return Err(Error::invalid("annotation files", "none given"));
    }
    let dims: &[Dimension] = if dims.is_empty() { &Dimension::ALL } else { dims };
    let mut out = Vec::new();
    for path in paths {
        for &dim in dims {
            let table = parse_annotations(path, dim)?;
            out.push(IaaResult {
                file: path.clone(),
                panel: panel_report(&table, level)?,
                pairs: pairwise_reports(&table, level)?,
            });
        }
    }
    Ok(out)
}

fn pair_label(r: &AgreementReport) -> String {
    r.annotators.join("&")
}

/// One grid per file: rows are dimensions, columns the panel value and
/// every annotator pair, two decimals.
pub fn render_iaa(results: &[IaaResult], emit: Emit) -> String {
    if emit == Emit::Jsonl {
        let mut out = String::new();
        for r in results {
            let file = r.file.display().to_string();
            out.push_str(&json_line(&IaaRecord {
                record: "agreement",
                file: file.clone(),
                scope: "panel",
                report: &r.panel,
            }));
            for p in &r.pairs {
                out.push_str(&json_line(&IaaRecord {
                    record: "agreement",
                    file: file.clone(),
                    scope: "pair",
                    report: p,
                }));
            }
        }
        return out;
    }
    let mut out = String::new();
    let mut current: Option<(&Path, Vec<String>)> = None;
    for r in results {
        let labels: Vec<String> = r.pairs.iter().map(pair_label).collect();
        if current.as_ref().map(|(f, l)| (*f, l)) != Some((r.file.as_path(), &labels)) {
            if current.as_ref().is_some_and(|(f, _)| *f != r.file.as_path()) {
                out.push('\n');
            }
            if current.as_ref().is_none_or(|(f, _)| *f != r.file.as_path()) {
                out.push_str(&format!("{}\n", r.file.display()));
            }
            out.push_str(&format!("{:<20}  {:<18}  {:>5}", "dimension", "metric", "panel"));
            for l in &labels {
                out.push_str(&format!("  {l:>10}"));
            }
            out.push_str("  missing\n");
            current = Some((r.file.as_path(), labels));
        }
        let mut metric = r.panel.metric.name().to_string();
        if let Some(level) = r.panel.level {
            metric.push_str(match level {
                AlphaLevel::Nominal => " (nom)",
                AlphaLevel::Ordinal => " (ord)",
            });
        }
        let flag = if r.panel.degenerate { "*" } else { "" };
        out.push_str(&format!(
            "{:<20}  {:<18}  {:>5}",
            r.panel.dimension.name(),
            metric,
            format!("{:.2}{flag}", r.panel.value)
        ));
        for p in &r.pairs {
            let flag = if p.degenerate { "*" } else { "" };
            out.push_str(&format!("  {:>10}", format!("{:.2}{flag}", p.value)));
        }
        out.push_str(&format!("  {}\n", r.panel.n_missing));
    }
    if results.iter().any(|r| r.panel.degenerate || r.pairs.iter().any(|p| p.degenerate)) {
        out.push_str("* no variation in the ratings; agreement set to 1.00\n");
    }
    out
}

pub fn load_reports(paths: &[PathBuf]) -> Result<Vec<RunReport>> {
    let mut reports = Vec::new();
    for path in paths {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        reports.extend(RunReport::from_records(&text)?);
    }
    Ok(reports)
}

/// ANOVA over all reports plus pairwise tests against `baseline` (default:
/// the report with the highest mean macro average).
pub fn cmd_stats(
    paths: &[PathBuf],
    baseline: Option<&str>,
    variant: TTestVariant,
    averaging: Averaging,
) -> Result<SignificanceSummary> {
    let reports = load_reports(paths)?;
    if reports.len() < 2 {
        return Err(Error::invalid(
            "reports",
            format!("need at least 2 run reports for ANOVA, found {}", reports.len()),
        ));
    }
    let best = match baseline {
        Some(b) => b.to_string(),
        None => {
            let mut best: Option<(f64, &str)> = None;
            for r in &reports {
                let m = aggregate_runs(&r.macro_avgs(averaging))?.mean;
                if best.is_none_or(|(bm, _)| m > bm) {
                    best = Some((m, &r.variant_id));
                }
            }
            best.expect("at least two reports").1.to_string()
        }
    };
    significance_summary(&reports, &best, variant, averaging)
}

pub fn render_stats(summary: &SignificanceSummary, emit: Emit) -> String {
    match emit {
        Emit::Text => summary.render(),
        Emit::Jsonl => {
            let mut out = json_line(&summary.anova);
            for r in &summary.pairwise {
                out.push_str(&json_line(r));
            }
            out
        }
    }
}

/// Writes `train.jsonl`, `val.jsonl` and `test.jsonl` under `out_dir`.
pub fn cmd_split(corpus_path: &Path, spec: &SplitSpec, out_dir: &Path) -> Result<(usize, usize, usize)> {
    let corpus = parse_corpus(corpus_path)?;
    let (tr, va, te) = split_corpus(&corpus, spec)?;
    create_dir(out_dir)?;
    for (name, part) in [("train", &tr), ("val", &va), ("test", &te)] {
        part.write_jsonl(&out_dir.join(format!("{name}.jsonl")))?;
    }
    Ok((tr.len(), va.len(), te.len()))
}

fn describe_corpus(c: &Corpus) -> String {
    let mut out = format!("corpus {}\npairs: {}\n", c.provenance(), c.len());
    for s in [Source::Conan, Source::Twitter] {
        out.push_str(&format!("  {s}: {}\n", c.count_by_source(s)));
    }
    let labeled: Vec<_> = c.pairs().filter_map(|p| p.labels).collect();
    out.push_str(&format!("labeled: {}\n", labeled.len()));
    for d in Dimension::ALL {
        let counts: Vec<String> = d
            .kind()
            .values()
            .map(|v| format!("{v}: {}", labeled.iter().filter(|l| l.get(d) == v).count()))
            .collect();
        out.push_str(&format!("  {:<20} {}\n", d.name(), counts.join("  ")));
    }
    out
}

fn describe_checkpoint(ckpt: Checkpoint) -> Result<String> {
    let (model, enc) = ckpt.into_model()?;
    let mut out = format!(
        "checkpoint\nvariant: {}\nparameters: {}\nfeature_dim: {}\nhidden_dim: {}\ninput_mode: {}\n",
        model.variant().name(),
        model.params.num_scalars(),
        enc.feature_dim,
        model.config.hidden_dim,
        serde_json::to_value(enc.input_mode)?.as_str().unwrap_or_default(),
    );
    if let Ok(view) = model.dependency_view() {
        out.push_str("dependency matrix σ(D), rows influenced, columns influencing\n");
        out.push_str(&view.to_table());
    }
    Ok(out)
}

/// Summarizes a corpus, checkpoint or run-report file.
pub fn cmd_inspect(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let probe: Option<serde_json::Value> = serde_json::from_str(first).ok().or_else(|| serde_json::from_str(&text).ok());
    if let Some(v) = probe {
        if v.get("format").and_then(|f| f.as_str()) == Some(CHECKPOINT_FORMAT) {
            let ckpt: Checkpoint = serde_json::from_str(&text)?;
            return describe_checkpoint(ckpt);
        }
        if v.get("record").is_some() {
            let reports = RunReport::from_records(&text)?;
            return render_table(&reports, Averaging::Weighted);
        }
    }
    Ok(describe_corpus(&parse_corpus(path)?))
}
