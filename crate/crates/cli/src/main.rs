use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use prtfusion::benchmark::{evaluate_head, generate_split, sequence_seed, BenchmarkConfig, Split};
use prtfusion::encoders::{associate_sequence, build_dataset, predict_all, train, AssociationMode, DatasetOptions, FusionModel, HeadKind, ModelConfig, TrainConfig};
use prtfusion::headroom::{evaluate_detections, headroom_report, simulate_detector, substitute_depths, HeadroomMetrics};
use prtfusion::io::{fmt_metric, format_kv, format_table, load_checkpoint, load_toml, read_sequence, save_checkpoint, write_sequence, Checkpoint};
use prtfusion::metrics::DepthMetrics;
use prtfusion::scenesim::Sequence;
use prtfusion::{Error, Result};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

const ARCHIVE_EXT: &str = "prtseq";

#[derive(Parser)]
#[command(name = "prtfusion", version, about = "Per-object monocular depth: simulate, track, train, evaluate")]
struct Cli {
    /// Benchmark configuration (TOML). Defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum AssocArg {
    Gt,
    Predicted,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the train and test sequence sets into archives.
    Gen {
        #[arg(long)]
        seed: u64,
        /// Output directory; `train/` and `test/` are created inside.
        #[arg(long)]
        out: PathBuf,
    },
    /// Link labeled objects into tracklets and write them as text.
    Track {
        /// Directory of sequence archives.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "predicted")]
        association: AssocArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one head and write a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// pl, rgb, pr, t, prt or rgb-temporal.
        #[arg(long)]
        head: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        association: Option<AssocArg>,
        /// Leave past patches in their own camera frames.
        #[arg(long)]
        no_compensation: bool,
    },
    /// Depth metrics of one or more checkpoints on a sequence set.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "predicted")]
        association: AssocArg,
        #[arg(long)]
        no_compensation: bool,
        /// Text report path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Key-value report path.
        #[arg(long)]
        kv: Option<PathBuf>,
    },
    /// Ground-truth attribute injection on simulated detections, plus the
    /// enhanced-depth comparison when a checkpoint is given.
    Headroom {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Depth model whose predictions replace the detector depths.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        kv: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => EXIT_USAGE,
        Error::Diverged { .. } | Error::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<BenchmarkConfig> {
    let cfg = match path {
        Some(p) => load_toml(p)?,
        None => BenchmarkConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn archive_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|x| x == ARCHIVE_EXT))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidInput(format!("no .{ARCHIVE_EXT} archives in {}", dir.display())));
    }
    Ok(paths)
}

fn load_sequences(dir: &Path) -> Result<Vec<Sequence>> {
    archive_paths(dir)?
        .iter()
        .map(|p| read_sequence(p).map_err(|e| located(p, e)))
        .collect()
}

fn located(path: &Path, e: Error) -> Error {
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        Error::Parse { line, reason } => Error::Parse { line, reason: format!("{}: {reason}", path.display()) },
        other => other,
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    print!("{text}");
    if let Some(p) = out {
        fs::write(p, text)?;
    }
    Ok(())
}

fn association_modes(a: AssocArg) -> Vec<AssociationMode> {
    match a {
        AssocArg::Gt => vec![AssociationMode::Gt],
        AssocArg::Predicted => vec![AssociationMode::Predicted],
        AssocArg::Both => vec![AssociationMode::Gt, AssociationMode::Predicted],
    }
}

fn mode_name(m: AssociationMode) -> &'static str {
    match m {
        AssociationMode::Gt => "gt",
        AssociationMode::Predicted => "predicted",
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Gen { seed, out } => gen(&cfg, seed, &out),
        Command::Track { data, association, out } => track(&cfg, &data, association, out.as_deref()),
        Command::Train { data, head, seed, out, association, no_compensation } => {
            let head: HeadKind = head.parse().map_err(|e: Error| Error::Config { field: "head".into(), reason: e.to_string() })?;
            let mut opts = cfg.dataset.clone();
            if let Some(a) = association {
                if a == AssocArg::Both {
                    return Err(Error::Config { field: "association".into(), reason: "training takes a single association mode".into() });
                }
                opts.association = association_modes(a)[0];
            }
            opts.compensate_ego_motion = !no_compensation;
            train_cmd(&cfg, &data, head, seed, &out, &opts)
        }
        Command::Eval { data, checkpoints, association, no_compensation, out, kv } => {
            eval(&cfg, &data, &checkpoints, association, no_compensation, out.as_deref(), kv.as_deref())
        }
        Command::Headroom { data, seed, checkpoint, out, kv } => headroom(&cfg, &data, seed, checkpoint.as_deref(), out.as_deref(), kv.as_deref()),
    }
}

fn gen(cfg: &BenchmarkConfig, seed: u64, out: &Path) -> Result<()> {
    for (split, name) in [(Split::Train, "train"), (Split::Test, "test")] {
        let dir = out.join(name);
        fs::create_dir_all(&dir)?;
        let seqs = generate_split(cfg, seed, split)?;
        for (i, s) in seqs.iter().enumerate() {
            write_sequence(dir.join(format!("{i:04}.{ARCHIVE_EXT}")), s)?;
        }
        let labels: usize = seqs.iter().flat_map(|s| &s.frames).map(|f| f.objects.len()).sum();
        println!(
            "{name}: {} sequences, {labels} labeled objects, first seed {}",
            seqs.len(),
            sequence_seed(seed, split, 0)
        );
    }
    Ok(())
}

fn track(cfg: &BenchmarkConfig, data: &Path, association: AssocArg, out: Option<&Path>) -> Result<()> {
    let seqs = load_sequences(data)?;
    let mut text = String::new();
    for mode in association_modes(association) {
        let mut rows = Vec::new();
        let mut summary = Vec::new();
        for (si, s) in seqs.iter().enumerate() {
            let links = associate_sequence(s, mode, &cfg.dataset.sort)?;
            let mut ids = std::collections::BTreeSet::new();
            let mut linked = 0;
            for (f, frame) in links.iter().enumerate() {
                for (k, link) in frame.iter().enumerate() {
                    let o = &s.frames[f].objects[k];
                    if let Some(id) = link {
                        ids.insert(*id);
                        linked += 1;
                    }
                    rows.push(vec![
                        si.to_string(),
                        f.to_string(),
                        o.id.to_string(),
                        link.map_or("-".into(), |id| id.to_string()),
                        format!("{:.1} {:.1} {:.1} {:.1}", o.bbox2d.x1, o.bbox2d.y1, o.bbox2d.x2, o.bbox2d.y2),
                    ]);
                }
            }
            summary.push((format!("seq{si}.tracklets"), ids.len().to_string()));
            summary.push((format!("seq{si}.linked"), linked.to_string()));
        }
        text.push_str(&format!("# association: {}\n", mode_name(mode)));
        text.push_str(&format_table(&["seq", "frame", "object", "track", "box"], &rows));
        text.push_str(&format_kv(&summary));
    }
    emit(&text, out)
}

fn train_cmd(cfg: &BenchmarkConfig, data: &Path, head: HeadKind, seed: u64, out: &Path, opts: &DatasetOptions) -> Result<()> {
    let seqs = load_sequences(data)?;
    let model_cfg = ModelConfig { seed, ..cfg.model.clone() };
    let ds = build_dataset(&seqs, opts, &model_cfg)?;
    println!("training {head} on {} samples", ds.len());
    let mut model = FusionModel::new(model_cfg)?;
    let tc = TrainConfig { seed, ..cfg.train.clone() };
    train(&mut model, head, &ds.samples, &tc, |stats, m| {
        println!("epoch {:>3}  loss {:.6}  lr {:.2e}", stats.epoch, stats.loss, stats.learning_rate);
        save_checkpoint(out, &Checkpoint { head, model: m.clone() })
    })?;
    save_checkpoint(out, &Checkpoint { head, model })?;
    println!("wrote {}", out.display());
    Ok(())
}

fn metrics_row(name: &str, m: &DepthMetrics) -> Vec<String> {
    vec![
        name.to_string(),
        fmt_metric(100.0 * m.abs_rel, 2),
        fmt_metric(m.sq_rel, 4),
        fmt_metric(m.rmse, 3),
        fmt_metric(m.rmse_log, 4),
        fmt_metric(100.0 * m.delta1, 2),
    ]
}

fn eval(
    cfg: &BenchmarkConfig,
    data: &Path,
    checkpoints: &[PathBuf],
    association: AssocArg,
    no_compensation: bool,
    out: Option<&Path>,
    kv: Option<&Path>,
) -> Result<()> {
    let seqs = load_sequences(data)?;
    let ckpts: Vec<Checkpoint> = checkpoints.iter().map(|p| load_checkpoint(p).map_err(|e| located(p, e))).collect::<Result<_>>()?;
    let mut text = String::new();
    let mut entries = Vec::new();
    for mode in association_modes(association) {
        let mut rows = Vec::new();
        for c in &ckpts {
            let opts = DatasetOptions {
                window: c.model.config().window,
                association: mode,
                compensate_ego_motion: !no_compensation,
                ..cfg.dataset.clone()
            };
            let ds = build_dataset(&seqs, &opts, c.model.config())?;
            let m = evaluate_head(&c.model, c.head, &ds)?;
            let name = c.head.name();
            rows.push(metrics_row(name, &m));
            for (k, v) in [("abs_rel", m.abs_rel), ("sq_rel", m.sq_rel), ("rmse", m.rmse), ("rmse_log", m.rmse_log), ("delta1", m.delta1)] {
                entries.push((format!("{}.{name}.{k}", mode_name(mode)), format!("{v:.6}")));
            }
        }
        text.push_str(&format!("# association: {}\n", mode_name(mode)));
        text.push_str(&format_table(&["head", "abs_rel%", "sq_rel", "rmse", "rmse_log", "delta1%"], &rows));
    }
    emit(&text, out)?;
    if let Some(p) = kv {
        fs::write(p, format_kv(&entries))?;
    }
    Ok(())
}

fn headroom_kv(prefix: &str, m: &HeadroomMetrics, e: &mut Vec<(String, String)>) {
    for (i, t) in ["0.5", "0.6", "0.7"].iter().enumerate() {
        e.push((format!("{prefix}.ap3d@{t}"), format!("{:.6}", m.ap_3d[i])));
        e.push((format!("{prefix}.apbev@{t}"), format!("{:.6}", m.ap_bev[i])));
    }
    e.push((format!("{prefix}.mota"), format!("{:.6}", m.mota)));
    e.push((format!("{prefix}.ids"), m.ids.to_string()));
}

fn headroom(cfg: &BenchmarkConfig, data: &Path, seed: u64, checkpoint: Option<&Path>, out: Option<&Path>, kv: Option<&Path>) -> Result<()> {
    let seqs = load_sequences(data)?;
    let profile = prtfusion::headroom::PerturbationProfile { seed, ..cfg.headroom };
    let dets: Vec<_> = seqs.iter().map(|s| simulate_detector(s, &profile)).collect::<Result<_>>()?;
    let report = headroom_report(&seqs, &dets, &cfg.tracker)?;
    let mut text = String::from("# ground-truth attribute injection\n");
    text.push_str(&report.render());
    let mut entries = Vec::new();
    for r in &report.rows {
        headroom_kv(&r.label.replace("+gt ", "gt_"), &r.metrics, &mut entries);
    }
    if let Some(p) = checkpoint {
        let c = load_checkpoint(p).map_err(|e| located(p, e))?;
        let opts = DatasetOptions { window: c.model.config().window, ..cfg.dataset.clone() };
        let ds = build_dataset(&seqs, &opts, c.model.config())?;
        let pred = predict_all(&c.model, c.head, &ds.samples)?;
        // (sequence, frame, label) -> predicted depth
        let mut lookup = std::collections::HashMap::new();
        for (src, z) in ds.sources.iter().zip(&pred) {
            lookup.insert((src.sequence, src.frame, src.object), *z);
        }
        let enhanced: Vec<_> = seqs
            .iter()
            .zip(&dets)
            .enumerate()
            .map(|(si, (s, d))| {
                substitute_depths(s, d, |f, label| {
                    let k = s.frames[f].objects.iter().position(|o| o.id == label.id)?;
                    lookup.get(&(si, f, k)).copied()
                })
            })
            .collect::<Result<_>>()?;
        let base = report.baseline();
        let enh = evaluate_detections(&seqs, &enhanced, &cfg.tracker)?;
        let row = |name: &str, m: &HeadroomMetrics| {
            let mut v = vec![name.to_string()];
            v.extend(m.ap_3d.iter().chain(&m.ap_bev).map(|x| fmt_metric(*x, 3)));
            v.push(fmt_metric(m.mota, 3));
            v.push(m.ids.to_string());
            v
        };
        text.push_str(&format!("# enhanced depth ({})\n", c.head.name()));
        text.push_str(&format_table(
            &["detections", "3d@0.5", "3d@0.6", "3d@0.7", "bev@0.5", "bev@0.6", "bev@0.7", "mota", "ids"],
            &[row("baseline", base), row("enhanced", &enh)],
        ));
        headroom_kv("enhanced", &enh, &mut entries);
    }
    emit(&text, out)?;
    if let Some(p) = kv {
        fs::write(p, format_kv(&entries))?;
    }
    Ok(())
}
