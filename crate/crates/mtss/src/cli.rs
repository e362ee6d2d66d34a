//! The `mtss` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mtss_core::corpus::Corpus;
use mtss_core::metrics::{gold_responses, MetricReport};
use mtss_core::models::{schema_hash, CheckpointMeta, TeacherModel};
use mtss_core::training::{
    train_student, train_teachers, Dataset, Selection, TeacherEnsemble, Vocabs,
};

use crate::chat::{run_repl, ChatSession};
use crate::config::RunConfig;
use crate::io::{self, LoadedModel, Prepared, UNIVERSAL_CHECKPOINT};
use crate::logs::{read_eval_records, write_eval_records, EpochLogger};
use crate::manifest::ManifestBuilder;
use crate::multiwoz::read_multiwoz;
use crate::parallel::worker_count;
use crate::pipeline::{self, cell_name};
use crate::report::{self, SweepRow, TeacherRow, SWEEP_GRID};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "mtss",
    version,
    about = "Multi-domain teachers distilled into one dialogue student"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run config, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run seed; also seeds the synthetic corpus.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub alpha1: Option<f64>,
    #[arg(long, global = true)]
    pub alpha2: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write corpus splits, vocabularies and per-domain turn counts.
    Prepare {
        /// MultiWOZ-format dump; without it a synthetic corpus is generated.
        #[arg(long)]
        multiwoz: Option<PathBuf>,
    },
    /// Train the universal teacher and one teacher per domain.
    TrainTeachers {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train the student against the teachers.
    TrainStudent {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        teachers: Option<PathBuf>,
        /// Run the whole (alpha1, alpha2) grid instead of one student.
        #[arg(long)]
        sweep: bool,
    },
    /// Score a checkpoint, a response file or the gold responses.
    Evaluate {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["responses", "gold"])]
        model: Option<PathBuf>,
        /// Line-delimited records: episode, turn, response.
        #[arg(long, conflicts_with = "gold")]
        responses: Option<PathBuf>,
        #[arg(long)]
        gold: bool,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
    },
    /// Train one student per cell of the (alpha1, alpha2) grid.
    Sweep {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        teachers: Option<PathBuf>,
    },
    /// Talk to a trained student.
    Chat {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Also print responses with placeholders filled from the database.
        #[arg(long)]
        lexicalize: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    let raw: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(cli, &raw, stdin, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Train(mtss_core::training::TrainError::Diverged(r)) = &e {
                eprintln!("{}", serde_json::to_string_pretty(r).unwrap_or_default());
            }
            e.exit_code()
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.synth.seed = s;
    }
    if let Some(a) = cli.alpha1 {
        cfg.alpha1 = a;
    }
    if let Some(a) = cli.alpha2 {
        cfg.alpha2 = a;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn need(path: Option<PathBuf>, fallback: Option<&PathBuf>, what: &str) -> Result<PathBuf> {
    path.or_else(|| fallback.cloned())
        .ok_or_else(|| Error::Usage(format!("no {what} directory given")))
}

pub fn execute(
    cli: Cli,
    raw: &[String],
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
) -> Result<()> {
    let cfg = resolve_config(&cli)?;
    let out = |default: &str| cli.out.clone().unwrap_or_else(|| PathBuf::from(default));
    match cli.command {
        Command::Prepare { ref multiwoz } => {
            let dir = cli
                .out
                .clone()
                .or(cfg.data_dir.clone())
                .unwrap_or_else(|| "data".into());
            cmd_prepare(&cfg, multiwoz.as_deref(), &dir, raw, stdout)
        }
        Command::TrainTeachers { ref data } => {
            let data = need(data.clone(), cfg.data_dir.as_ref(), "data")?;
            let dir = cli
                .out
                .clone()
                .or(cfg.checkpoint_dir.clone())
                .unwrap_or_else(|| "teachers".into());
            cmd_train_teachers(&cfg, &data, &dir, raw, stdout)
        }
        Command::TrainStudent {
            ref data,
            ref teachers,
            sweep,
        } => {
            let data = need(data.clone(), cfg.data_dir.as_ref(), "data")?;
            let teachers = teachers.clone().or(cfg.checkpoint_dir.clone());
            if sweep {
                let teachers =
                    teachers.ok_or_else(|| Error::Usage("no teachers directory given".into()))?;
                cmd_sweep(
                    &cfg,
                    &data,
                    &teachers,
                    &out("sweep"),
                    "train-student",
                    raw,
                    stdout,
                )
            } else {
                cmd_train_student(
                    &cfg,
                    &data,
                    teachers.as_deref(),
                    &out("student"),
                    raw,
                    stdout,
                )
            }
        }
        Command::Sweep {
            ref data,
            ref teachers,
        } => {
            let data = need(data.clone(), cfg.data_dir.as_ref(), "data")?;
            let teachers = need(teachers.clone(), cfg.checkpoint_dir.as_ref(), "teachers")?;
            cmd_sweep(&cfg, &data, &teachers, &out("sweep"), "sweep", raw, stdout)
        }
        Command::Evaluate {
            ref data,
            ref model,
            ref responses,
            gold,
            split,
        } => {
            let data = need(data.clone(), cfg.data_dir.as_ref(), "data")?;
            let source = match (model, responses, gold) {
                (Some(m), _, _) => Source::Model(m.clone()),
                (_, Some(r), _) => Source::Responses(r.clone()),
                (_, _, true) => Source::Gold,
                _ => {
                    return Err(Error::Usage(
                        "give one of --model, --responses or --gold".into(),
                    ))
                }
            };
            cmd_evaluate(&cfg, &data, source, split, &out("eval"), raw, stdout)
        }
        Command::Chat {
            ref model,
            ref data,
            lexicalize,
        } => {
            let data = need(data.clone(), cfg.data_dir.as_ref(), "data")?;
            cmd_chat(&cfg, model, &data, lexicalize, stdin, stdout)
        }
    }
}

fn write_table(
    dir: &Path,
    stem: &str,
    value: &impl Serialize,
    table: &str,
    stdout: &mut dyn Write,
) -> Result<Vec<PathBuf>> {
    let json = dir.join(format!("{stem}.json"));
    let txt = dir.join(format!("{stem}.txt"));
    io::write_json(&json, value)?;
    io::write_bytes(&txt, table.as_bytes())?;
    write!(stdout, "{table}").map_err(Error::io("<stdout>"))?;
    Ok(vec![json, txt])
}

fn cmd_prepare(
    cfg: &RunConfig,
    multiwoz: Option<&Path>,
    dir: &Path,
    raw: &[String],
    stdout: &mut dyn Write,
) -> Result<()> {
    let mut m = ManifestBuilder::start("prepare", raw, cfg);
    let prepared = match multiwoz {
        Some(src) => {
            for f in ["data.json", "valListFile.json", "testListFile.json"] {
                m.input(&src.join(f))?;
            }
            let s = read_multiwoz(src)?;
            pipeline::prepare_corpora(s.train, s.valid, s.test, cfg)?
        }
        None => pipeline::prepare_synth(cfg)?,
    };
    m.outputs(prepared.write(dir)?);
    let rows = pipeline::split_rows(&prepared);
    m.outputs(write_table(
        dir,
        "split",
        &rows,
        &report::split_table(&rows),
        stdout,
    )?);
    m.finish(dir)?;
    Ok(())
}

fn read_prepared(dir: &Path, m: &mut ManifestBuilder) -> Result<Prepared> {
    for f in Prepared::files(dir) {
        m.input(&f)?;
    }
    Prepared::read(dir)
}

fn meta_for(data: &Dataset, corpus: &Corpus) -> CheckpointMeta {
    CheckpointMeta {
        config: data.model,
        in_vocab: data.vocabs.input.clone(),
        out_vocab: data.vocabs.output.clone(),
        schema_hash: schema_hash(&corpus.schemas),
        domain: None,
    }
}

#[derive(Serialize)]
struct TeachersReport<'a> {
    rows: &'a [TeacherRow],
    selections: &'a BTreeMap<String, Selection>,
}

fn cmd_train_teachers(
    cfg: &RunConfig,
    data_dir: &Path,
    dir: &Path,
    raw: &[String],
    stdout: &mut dyn Write,
) -> Result<()> {
    let mut m = ManifestBuilder::start("train-teachers", raw, cfg);
    let p = read_prepared(data_dir, &mut m)?;
    let data = pipeline::dataset(&p, cfg)?;
    let mut logger = EpochLogger::create(&dir.join("epochs.jsonl"), true)?;
    let outcome = train_teachers(&data, &cfg.training(), &mut |l| logger.log(l))?;
    m.output(logger.finish()?);
    let meta = meta_for(&data, &p.train);
    let path = dir.join(UNIVERSAL_CHECKPOINT);
    io::write_teacher(&path, &outcome.ensemble.universal, &meta)?;
    m.output(path);
    for (b, t) in &outcome.ensemble.teachers {
        let path = dir.join(io::teacher_file(b));
        io::write_teacher(&path, t, &meta)?;
        m.output(path);
    }
    let test = pipeline::encode(&p.test, &data)?;
    let rows = pipeline::teacher_rows(
        &outcome,
        &data,
        &p.test,
        &test,
        cfg.max_response_len,
        worker_count(),
    )?;
    let rep = TeachersReport {
        rows: &rows,
        selections: &outcome.selections,
    };
    m.outputs(write_table(
        dir,
        "teachers",
        &rep,
        &report::teacher_table(&rows),
        stdout,
    )?);
    m.finish(dir)?;
    Ok(())
}

/// Universal teacher plus one teacher per bucket of `data`.
pub fn read_ensemble(
    dir: &Path,
    data: &Dataset,
    m: Option<&mut ManifestBuilder>,
) -> Result<TeacherEnsemble> {
    let hash = schema_hash(&data.train.schemas);
    let mut files = vec![dir.join(UNIVERSAL_CHECKPOINT)];
    files.extend(data.buckets().iter().map(|b| dir.join(io::teacher_file(b))));
    if let Some(m) = m {
        for f in &files {
            m.input(f)?;
        }
    }
    let universal = io::read_teacher(&files[0], Some(&hash))?;
    let mut teachers = BTreeMap::new();
    for (b, f) in data.buckets().into_iter().zip(&files[1..]) {
        teachers.insert(b, io::read_teacher(f, Some(&hash))?);
    }
    Ok(TeacherEnsemble {
        universal,
        teachers,
    })
}

fn cmd_train_student(
    cfg: &RunConfig,
    data_dir: &Path,
    teachers: Option<&Path>,
    dir: &Path,
    raw: &[String],
    stdout: &mut dyn Write,
) -> Result<()> {
    let mut m = ManifestBuilder::start("train-student", raw, cfg);
    let p = read_prepared(data_dir, &mut m)?;
    let data = pipeline::dataset(&p, cfg)?;
    let training = cfg.training();
    let ensemble = match teachers {
        Some(t) if training.distills() => read_ensemble(t, &data, Some(&mut m))?,
        None if training.distills() => {
            return Err(Error::Usage(
                "distillation needs a teachers directory".into(),
            ));
        }
        _ => TeacherEnsemble {
            universal: TeacherModel::new(data.model, 0)?,
            teachers: BTreeMap::new(),
        },
    };
    let mut logger = EpochLogger::create(&dir.join("epochs.jsonl"), true)?;
    let outcome = train_student(&data, &ensemble, &training, &mut |l| logger.log(l))?;
    m.output(logger.finish()?);
    let path = dir.join("student.ckpt");
    io::write_student(&path, &outcome.model, &meta_for(&data, &p.train))?;
    m.output(path);
    let test = pipeline::encode(&p.test, &data)?;
    let (responses, rep) = pipeline::evaluate_model(
        &outcome.model,
        &p.test,
        &test,
        &data,
        cfg.max_response_len,
        worker_count(),
    )?;
    let rpath = dir.join("responses.jsonl");
    write_eval_records(&rpath, &p.test, &responses)?;
    m.output(rpath);
    m.outputs(write_table(
        dir,
        "report",
        &rep,
        &report::metric_table(&rep),
        stdout,
    )?);
    m.finish(dir)?;
    Ok(())
}

fn cmd_sweep(
    cfg: &RunConfig,
    data_dir: &Path,
    teachers: &Path,
    dir: &Path,
    command: &str,
    raw: &[String],
    stdout: &mut dyn Write,
) -> Result<()> {
    let mut m = ManifestBuilder::start(command, raw, cfg);
    let p = read_prepared(data_dir, &mut m)?;
    let data = pipeline::dataset(&p, cfg)?;
    let ensemble = read_ensemble(teachers, &data, Some(&mut m))?;
    let test = pipeline::encode(&p.test, &data)?;
    let logs = dir.join("logs");
    let cells = pipeline::sweep(
        &data,
        &ensemble,
        &cfg.training(),
        &SWEEP_GRID,
        &p.test,
        &test,
        worker_count(),
        Some(&logs),
    )?;
    let meta = meta_for(&data, &p.train);
    let mut rows: Vec<SweepRow> = Vec::with_capacity(cells.len());
    for (row, out) in cells {
        let path = dir
            .join(cell_name(row.alpha1, row.alpha2))
            .join("student.ckpt");
        io::write_student(&path, &out.model, &meta)?;
        m.output(path);
        m.output(logs.join(format!("{}.jsonl", cell_name(row.alpha1, row.alpha2))));
        rows.push(row);
    }
    m.outputs(write_table(
        dir,
        "sweep",
        &rows,
        &report::sweep_table(&rows),
        stdout,
    )?);
    m.finish(dir)?;
    Ok(())
}

enum Source {
    Model(PathBuf),
    Responses(PathBuf),
    Gold,
}

fn cmd_evaluate(
    cfg: &RunConfig,
    data_dir: &Path,
    source: Source,
    split: Split,
    dir: &Path,
    raw: &[String],
    stdout: &mut dyn Write,
) -> Result<()> {
    let mut m = ManifestBuilder::start("evaluate", raw, cfg);
    let p = read_prepared(data_dir, &mut m)?;
    let corpus = match split {
        Split::Train => &p.train,
        Split::Valid => &p.valid,
        Split::Test => &p.test,
    };
    let rep: MetricReport = match source {
        Source::Gold => mtss_core::metrics::evaluate(corpus, &gold_responses(corpus))?,
        Source::Responses(path) => {
            m.input(&path)?;
            mtss_core::metrics::evaluate(corpus, &read_eval_records(&path, corpus)?)?
        }
        Source::Model(path) => {
            m.input(&path)?;
            let loaded = io::load_model(&path, Some(&schema_hash(&corpus.schemas)))?;
            let meta = loaded.meta().clone();
            let vocabs = Vocabs {
                input: meta.in_vocab,
                output: meta.out_vocab,
            };
            let data = Dataset::with_vocabs(p.train.clone(), corpus.clone(), vocabs, meta.config)?;
            let (responses, rep) = match &loaded {
                LoadedModel::Teacher(t, _) => pipeline::evaluate_model(
                    t,
                    corpus,
                    &data.valid_turns,
                    &data,
                    cfg.max_response_len,
                    worker_count(),
                )?,
                LoadedModel::Student(s, _) => pipeline::evaluate_model(
                    s,
                    corpus,
                    &data.valid_turns,
                    &data,
                    cfg.max_response_len,
                    worker_count(),
                )?,
            };
            let rpath = dir.join("responses.jsonl");
            write_eval_records(&rpath, corpus, &responses)?;
            m.output(rpath);
            rep
        }
    };
    m.outputs(write_table(
        dir,
        "report",
        &rep,
        &report::metric_table(&rep),
        stdout,
    )?);
    m.finish(dir)?;
    Ok(())
}

fn cmd_chat(
    cfg: &RunConfig,
    model: &Path,
    data_dir: &Path,
    lexicalize: bool,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
) -> Result<()> {
    let corpus = io::read_corpus(&data_dir.join(io::TRAIN_FILE))?;
    let (student, meta) = io::read_student(model, Some(&schema_hash(&corpus.schemas)))?;
    let mut session = ChatSession::new(
        &student,
        &meta.in_vocab,
        &meta.out_vocab,
        &corpus,
        cfg.max_response_len,
    );
    run_repl(&mut session, stdin, stdout, lexicalize).map_err(Error::io("<stdio>"))
}
