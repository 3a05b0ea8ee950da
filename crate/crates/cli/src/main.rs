mod config;
mod synth;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ftc_core::freelogic::{derive_counterfactual_labels, relation_form};
use ftc_core::metrics::{ftc_scores, meteor, MetricConfig};
use ftc_core::model::{CounterfactualRecord, LabelDistribution, NliLabel};
use ftc_core::modelio::cache::{CachedClassifier, CachedGenerator};
use ftc_core::modelio::mock::{MockBackend, MockConfig};
use ftc_core::modelio::protocol::{Classifier, Generator};
use ftc_core::pipeline::{config_hash, parse_jsonl, run_pipeline, Backends, HumanCounterfactual, PipelineInputs};
use ftc_core::report::{Report, RowStatus};
use ftc_core::rewrite::fsp::fsp_rewrite;
use ftc_core::rewrite::{regex_rewrite, RewriteMode};
use ftc_core::sensitivity::{sensitivity_report, AblationCondition, ConditionedExplanationSet};
use ftc_core::stats::{fleiss_kappa_from_labels, rank_sum};
use ftc_modelio_http::MockServer;
use serde::Deserialize;

use config::{Overrides, RunConfig, ENV_CACHE_DIR};

const EXIT_FATAL: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

#[derive(Parser)]
#[command(name = "ftc", version, about = "Counterfactual faithfulness scores for free-text NLI explanations")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Counterfactual construction mode.
    #[arg(long, global = true)]
    mode: Option<RewriteMode>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Tsv)]
    format: Format,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for model calls.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, env = ENV_CACHE_DIR)]
    cache_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Tsv,
    Json,
    Markdown,
}

#[derive(Subcommand)]
enum Command {
    /// Print the counterfactual label derivation table.
    Derive {
        #[arg(long)]
        label: Option<NliLabel>,
    },
    /// Build counterfactuals and write them as JSONL records.
    Rewrite {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Score predicted distributions against counterfactual labels.
    Score {
        /// Comma-separated probabilities in E,C,N order.
        #[arg(long, requires = "y_cf", conflicts_with = "input")]
        probs: Option<String>,
        #[arg(long)]
        y_cf: Option<NliLabel>,
        /// JSONL of `{"probs": {"E":..,"C":..,"N":..}, "y_cf": "E"}`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// METEOR of a candidate against one or more references.
    Meteor {
        #[arg(long)]
        candidate: String,
        #[arg(long = "reference", required = true)]
        references: Vec<String>,
    },
    /// Rank-sum test, Fleiss' kappa, or re-rendering of a saved report.
    Stats {
        #[command(subcommand)]
        which: StatsCommand,
    },
    /// Score ablated explanation sets side by side.
    Sensitivity {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// `condition=path`, one per condition.
        #[arg(long = "set")]
        sets: Vec<String>,
        /// Also report METEOR against the dataset's explanations.
        #[arg(long)]
        meteor: bool,
    },
    /// Serve the mock classifier and generator over HTTP.
    ServeMock {
        #[arg(long)]
        mock_config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: std::net::SocketAddr,
    },
    /// Full evaluation: rewrite, classify, score, aggregate.
    Run {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Write a synthetic evaluation suite with matching mock backends.
    Synth(synth::SynthArgs),
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Wilcoxon rank-sum of two whitespace-separated samples.
    Ranksum {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Fleiss' kappa over JSONL lines of label lists, e.g. `["E","E","C"]`.
    Kappa {
        #[arg(long)]
        input: PathBuf,
    },
    /// Re-render a JSON report in the chosen format.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    let g = &cli.global;
    match &cli.command {
        Command::Derive { label } => emit(g, &derive_table(*label, g.format)).map(|_| 0),
        Command::Score { probs, y_cf, input, alpha } => {
            let metric = MetricConfig::new(*alpha)?;
            let text = match (probs, input) {
                (Some(p), _) => score_table(&[(parse_probs(p)?, y_cf.expect("clap requires y_cf"))], &metric, g.format)?,
                (None, Some(path)) => score_table(&read_score_input(path)?, &metric, g.format)?,
                (None, None) => bail!("give --probs with --y-cf, or --input"),
            };
            emit(g, &text).map(|_| 0)
        }
        Command::Meteor { candidate, references } => {
            let refs: Vec<&str> = references.iter().map(String::as_str).collect();
            emit(g, &format!("{:.4}\n", meteor(candidate, &refs))).map(|_| 0)
        }
        Command::Stats { which } => stats(g, which).map(|_| 0),
        Command::ServeMock { mock_config, addr } => serve_mock(mock_config, *addr).map(|_| 0),
        Command::Synth(args) => synth::write_suite(args, g.seed).map(|_| 0),
        Command::Rewrite { dataset } => rewrite(g, load_config(g, dataset.clone())?),
        Command::Run { dataset } => run(g, load_config(g, dataset.clone())?),
        Command::Sensitivity { dataset, sets, meteor } => {
            sensitivity(g, load_config(g, dataset.clone())?, sets, *meteor).map(|_| 0)
        }
    }
}

fn load_config(g: &Global, dataset: Option<PathBuf>) -> Result<RunConfig> {
    let overrides =
        Overrides { mode: g.mode, seed: g.seed, jobs: g.jobs, cache_dir: g.cache_dir.clone(), dataset };
    RunConfig::load(g.config.as_deref(), &overrides)
}

fn emit(g: &Global, text: &str) -> Result<()> {
    match &g.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn derive_table(label: Option<NliLabel>, format: Format) -> String {
    let labels: Vec<NliLabel> = match label {
        Some(l) => vec![l],
        None => NliLabel::ALL.to_vec(),
    };
    let rows: Vec<(NliLabel, &str, String, NliLabel)> = labels
        .iter()
        .flat_map(|&l| {
            derive_counterfactual_labels(l).into_iter().map(move |(b, y)| (l, relation_form(l).formula(), b.to_string(), y))
        })
        .collect();
    match format {
        Format::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|(l, f, b, y)| serde_json::json!({"label": l, "relation": f, "branch": b, "y_cf": y}))
                .collect();
            serde_json::to_string_pretty(&v).expect("table serializes") + "\n"
        }
        Format::Markdown => {
            let mut s = String::from("| Label | Relation | Branch | y_cf |\n|---|---|---|---|\n");
            for (l, f, b, y) in &rows {
                s.push_str(&format!("| {l} | {f} | {b} | {y} |\n"));
            }
            s
        }
        Format::Tsv => {
            let mut s = String::from("label\trelation\tbranch\ty_cf\n");
            for (l, f, b, y) in &rows {
                s.push_str(&format!("{l}\t{f}\t{b}\t{y}\n"));
            }
            s
        }
    }
}

fn parse_probs(text: &str) -> Result<LabelDistribution> {
    let v: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad probability {t:?}")))
        .collect::<Result<_>>()?;
    let [e, c, n] = v[..] else { bail!("expected three probabilities E,C,N, got {}", v.len()) };
    Ok(LabelDistribution::new(e, c, n)?)
}

#[derive(Deserialize)]
struct ScoreLine {
    probs: LabelDistribution,
    y_cf: NliLabel,
}

fn read_score_input(path: &Path) -> Result<Vec<(LabelDistribution, NliLabel)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let lines: Vec<ScoreLine> = parse_jsonl(&text).with_context(|| path.display().to_string())?;
    lines
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.probs.validate().with_context(|| format!("{} entry {}", path.display(), i + 1))?;
            Ok((l.probs, l.y_cf))
        })
        .collect()
}

fn score_table(items: &[(LabelDistribution, NliLabel)], metric: &MetricConfig, format: Format) -> Result<String> {
    let scored: Vec<(NliLabel, [f64; 3])> = items
        .iter()
        .map(|(p, y)| {
            let s = ftc_scores(p, *y, ftc_core::model::BranchId::Main, metric);
            (*y, [s[0].value, s[1].value, s[2].value])
        })
        .collect();
    Ok(match format {
        Format::Json => {
            let v: Vec<_> = scored
                .iter()
                .map(|(y, s)| serde_json::json!({"y_cf": y, "ftc_delta": s[0], "ftc_kl": s[1], "ftc_w": s[2]}))
                .collect();
            serde_json::to_string_pretty(&v)? + "\n"
        }
        Format::Markdown => {
            let mut s = String::from("| y_cf | FTC-δ | FTC-K | FTC-W |\n|---|---|---|---|\n");
            for (y, v) in &scored {
                s.push_str(&format!("| {y} | {:.4} | {:.4} | {:.4} |\n", v[0], v[1], v[2]));
            }
            s
        }
        Format::Tsv => {
            let mut s = String::from("y_cf\tftc_delta\tftc_kl\tftc_w\n");
            for (y, v) in &scored {
                s.push_str(&format!("{y}\t{:.4}\t{:.4}\t{:.4}\n", v[0], v[1], v[2]));
            }
            s
        }
    })
}

fn read_sample(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.split_whitespace()
        .map(|t| t.parse::<f64>().with_context(|| format!("{}: bad number {t:?}", path.display())))
        .collect()
}

fn stats(g: &Global, which: &StatsCommand) -> Result<()> {
    let text = match which {
        StatsCommand::Ranksum { a, b } => {
            let r = rank_sum(&read_sample(a)?, &read_sample(b)?)?;
            match g.format {
                Format::Json => serde_json::to_string_pretty(&r)? + "\n",
                Format::Markdown => format!(
                    "| n_a | n_b | U | z | p | ρ |\n|---|---|---|---|---|---|\n| {} | {} | {:.4} | {:.4} | {:.4} | {:.4} |\n",
                    r.n_a, r.n_b, r.u_statistic, r.z_score, r.p_value, r.rho
                ),
                Format::Tsv => format!(
                    "n_a\tn_b\tu\tz\tp\trho\n{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\n",
                    r.n_a, r.n_b, r.u_statistic, r.z_score, r.p_value, r.rho
                ),
            }
        }
        StatsCommand::Kappa { input } => {
            let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
            let items: Vec<Vec<NliLabel>> = parse_jsonl(&text).with_context(|| input.display().to_string())?;
            let k = fleiss_kappa_from_labels(&items)?;
            match g.format {
                Format::Json => serde_json::to_string_pretty(&k)? + "\n",
                Format::Markdown => format!(
                    "| items | κ | P̄ | P_e |\n|---|---|---|---|\n| {} | {:.4} | {:.4} | {:.4} |\n",
                    items.len(),
                    k.kappa,
                    k.p_bar,
                    k.p_e
                ),
                Format::Tsv => {
                    format!("items\tkappa\tp_bar\tp_e\n{}\t{:.4}\t{:.4}\t{:.4}\n", items.len(), k.kappa, k.p_bar, k.p_e)
                }
            }
        }
        StatsCommand::Report { input } => {
            let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
            let report = Report::from_json(&text).with_context(|| format!("parsing {}", input.display()))?;
            render(&report, g.format)
        }
    };
    emit(g, &text)
}

fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Tsv => report.to_tsv(),
        Format::Json => report.to_json(),
        Format::Markdown => report.to_markdown(),
    }
}

fn serve_mock(path: &Path, addr: std::net::SocketAddr) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: MockConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let backend = MockBackend::from_config(&cfg, base)?;
    let server = MockServer::start(backend, addr).with_context(|| format!("binding {addr}"))?;
    println!("listening on {}", server.url());
    std::io::stdout().flush()?;
    server.join()?;
    Ok(())
}

fn read_jsonl<T: serde::de::DeserializeOwned>(cfg: &RunConfig, path: &Option<PathBuf>) -> Result<Vec<T>> {
    match path {
        Some(p) => parse_jsonl(&cfg.read(p)?).with_context(|| cfg.resolve(p).display().to_string()),
        None => Ok(Vec::new()),
    }
}

fn rewrite(g: &Global, cfg: RunConfig) -> Result<u8> {
    let instances = cfg.instances()?;
    let options = cfg.options();
    let (bank, prompts, templates) = cfg.rewrite_assets()?;
    let models = cfg.model_backends()?;
    let cache = cfg.open_cache()?;
    let generator = models.generator.as_deref().map(|g| CachedGenerator { inner: g, cache: &cache });
    if options.mode == RewriteMode::External {
        bail!("rewrite does not apply to external mode");
    }
    let mut out = String::new();
    let mut skipped = 0;
    for inst in &instances {
        let outcome = match (options.mode, &generator) {
            (RewriteMode::Regex, _) | (RewriteMode::Hybrid, None) => regex_rewrite(inst, &bank),
            (RewriteMode::Hybrid, Some(gen)) => {
                let o = regex_rewrite(inst, &bank);
                if o.is_skipped() {
                    fsp_rewrite(inst, gen, &prompts, &templates, &options.fsp)
                        .with_context(|| format!("instance {}", inst.id))?
                } else {
                    o
                }
            }
            (RewriteMode::Fsp, Some(gen)) => {
                fsp_rewrite(inst, gen, &prompts, &templates, &options.fsp).with_context(|| format!("instance {}", inst.id))?
            }
            (RewriteMode::Fsp, None) => bail!("few-shot rewriting needs a generator backend"),
            (RewriteMode::External, _) => unreachable!(),
        };
        if let Some(reason) = outcome.skip {
            skipped += 1;
            log::warn!("{}: skipped ({})", inst.id, reason.as_str());
        }
        for r in &outcome.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
    }
    emit(g, &out)?;
    Ok(if skipped > 0 { EXIT_PARTIAL } else { 0 })
}

fn run(g: &Global, cfg: RunConfig) -> Result<u8> {
    let instances = cfg.instances()?;
    let options = cfg.options();
    let external: Vec<CounterfactualRecord> = read_jsonl(&cfg, &cfg.external_counterfactuals)?;
    let human: Vec<HumanCounterfactual> = read_jsonl(&cfg, &cfg.human_counterfactuals)?;
    let (bank, prompts, templates) = cfg.rewrite_assets()?;
    let models = cfg.model_backends()?;
    let cache = cfg.open_cache()?;
    let classifier = CachedClassifier { inner: models.classifier()?, cache: &cache };
    let generator = models.generator.as_deref().map(|g| CachedGenerator { inner: g, cache: &cache });
    let backends = Backends {
        classifier: &classifier,
        generator: generator.as_ref().map(|g| g as &dyn Generator),
        bank: &bank,
        prompts: &prompts,
        templates: &templates,
    };
    log::info!("config hash {}", config_hash(&options, &backends));
    let report = run_pipeline(PipelineInputs { instances: &instances, external: &external, human: &human }, &options, &backends)?;
    let stats = cache.stats();
    log::info!("cache: {} hits, {} misses", stats.hits, stats.misses);
    emit(g, &render(&report, g.format))?;
    let partial = report.rows.iter().any(|r| r.status == RowStatus::Skipped);
    Ok(if partial { EXIT_PARTIAL } else { 0 })
}

fn sensitivity(g: &Global, cfg: RunConfig, set_args: &[String], with_meteor: bool) -> Result<()> {
    let instances = cfg.instances()?;
    let options = cfg.options();
    let mut paths: Vec<(AblationCondition, PathBuf)> = Vec::new();
    for (name, p) in &cfg.explanation_sets {
        paths.push((name.parse().map_err(|e: String| anyhow!(e))?, cfg.resolve(p)));
    }
    for arg in set_args {
        let (name, p) = arg.split_once('=').ok_or_else(|| anyhow!("--set expects condition=path, got {arg:?}"))?;
        let cond: AblationCondition = name.parse().map_err(|e: String| anyhow!(e))?;
        let p = PathBuf::from(p);
        if !p.is_file() {
            bail!("referenced file {} does not exist", p.display());
        }
        paths.retain(|(c, _)| *c != cond);
        paths.push((cond, p));
    }
    let sets = paths
        .iter()
        .map(|(c, p)| {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ConditionedExplanationSet::from_jsonl(*c, &text).with_context(|| p.display().to_string())
        })
        .collect::<Result<Vec<_>>>()?;
    let (bank, prompts, templates) = cfg.rewrite_assets()?;
    let models = cfg.model_backends()?;
    let cache = cfg.open_cache()?;
    let classifier = CachedClassifier { inner: models.classifier()?, cache: &cache };
    let generator = models.generator.as_deref().map(|g| CachedGenerator { inner: g, cache: &cache });
    let backends = Backends {
        classifier: &classifier as &dyn Classifier,
        generator: generator.as_ref().map(|g| g as &dyn Generator),
        bank: &bank,
        prompts: &prompts,
        templates: &templates,
    };
    let table = sensitivity_report(&instances, &sets, &options, &backends, with_meteor || cfg.meteor)?;
    let text = match g.format {
        Format::Json => table.to_json(),
        Format::Tsv => table.to_tsv(),
        Format::Markdown => {
            let mut s = String::from("| Condition | Scored | FTC-K | FTC-δ | FTC-W | LAS | LRA | METEOR |\n");
            s.push_str("|---|---|---|---|---|---|---|---|\n");
            let f = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"));
            for r in &table.rows {
                s.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} | {} | {} |\n",
                    r.condition.as_str(),
                    r.scored,
                    f(r.ftc_kl),
                    f(r.ftc_delta),
                    f(r.ftc_w),
                    f(r.las),
                    f(r.lra),
                    f(r.meteor)
                ));
            }
            s
        }
    };
    emit(g, &text)
}
