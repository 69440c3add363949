//! The `angkit` command-line front end.
//!
//! Settings come from built-in defaults, then an optional `--config` file,
//! then command-line flags. The fully resolved configuration is written to
//! `resolved.cfg` in the output directory and can be passed back with
//! `--config` to repeat a run.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 verification failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::angnet::{load_checkpoint, save_checkpoint, AngNet, AngNetConfig};
use crate::archive::{read_clip_archive, write_clip_archive, write_manifest};
use crate::encoders::{encode_many, FeatureKind, Stream};
use crate::error::Error;
use crate::io::{normalize_clip, parse_skeleton_file, write_tensor_file};
use crate::kv::KvDoc;
use crate::synth::{generate_synthetic, ClassDef, SynthSpec};
use crate::topology::SkeletonTopology;
use crate::training::{
    evaluate, evaluate_ensemble, samples_from_clips, train, write_metrics, Evaluation, Fusion, Sample, TrainConfig,
    TrainingMeta,
};
use crate::types::Clip;
use crate::verify::{end_to_end_check, primitive_checks, END_TO_END_TOL, PRIMITIVE_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

pub const RESOLVED_CONFIG: &str = "resolved.cfg";
pub const BUILTIN_SCHEMA: &str = "builtin:kinect25";

#[derive(Parser, Debug)]
#[command(name = "angkit", version, about = "Angular skeleton features and a multiscale graph network")]
struct Cli {
    /// Run configuration file (`key = value` with `[section]` headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Skeleton schema file; the built-in kinect25 schema is used otherwise.
    #[arg(long, global = true)]
    schema: Option<String>,
    /// `static` or `velocity`.
    #[arg(long, global = true)]
    stream: Option<String>,
    /// Comma list of joint, bone, angular; prefix with `ensemble:` to train one model per feature.
    #[arg(long, global = true)]
    features: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Frames per clip after padding.
    #[arg(long, global = true)]
    frames: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse skeleton capture files into a clip archive.
    Parse { inputs: Vec<PathBuf> },
    /// Encode a clip archive into feature tensors.
    Encode { clips: PathBuf },
    /// Generate the synthetic two-class dataset (`train/` and `test/` archives).
    Synth,
    /// Train a model (or one model per ensemble member) on a clip archive.
    Train {
        data: PathBuf,
        /// Continue from a checkpoint up to `--epochs`.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate one checkpoint, or an ensemble of several, on a clip archive.
    Eval {
        data: PathBuf,
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
    },
    /// Finite-difference checks of every layer and of a tiny network.
    Gradcheck {
        /// Random instances per layer.
        #[arg(long, default_value_t = 20)]
        instances: usize,
    },
}

/// A failed command: exit code plus message for stderr.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        CliError { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Every setting of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub schema: String,
    pub stream: Stream,
    pub fusion: Fusion,
    pub frames: usize,
    pub max_persons: usize,
    pub out: PathBuf,
    pub train: TrainConfig,
    pub scales: usize,
    pub channels: [usize; 3],
    pub dilations: [usize; 4],
    pub synth: SynthSpec,
    pub n_per_class: usize,
    pub test_per_class: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let desk = AngNetConfig::desk(3, 2);
        RunConfig {
            seed: 0,
            schema: BUILTIN_SCHEMA.into(),
            stream: Stream::Static,
            fusion: Fusion::Concat(vec![FeatureKind::Joint]),
            frames: 32,
            max_persons: 2,
            out: PathBuf::from("angkit-out"),
            train: TrainConfig::default(),
            scales: desk.scales,
            channels: desk.channels,
            dilations: desk.dilations,
            synth: SynthSpec::default(),
            n_per_class: 64,
            test_per_class: 32,
        }
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, Error> {
    v.split_whitespace().map(|t| t.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{t}`")))).collect()
}

fn parse_array<const N: usize>(key: &str, v: &str) -> Result<[usize; N], Error> {
    parse_list::<usize>(key, v)?.try_into().map_err(|_| Error::Config(format!("`{key}` needs exactly {N} values")))
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, Error> {
    v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn render_class(c: &ClassDef) -> String {
    format!("{}:{}:{}:{}", c.name, c.elbow_mean_deg, c.elbow_amplitude_deg, c.elbow_cycles)
}

fn parse_class(s: &str) -> Result<ClassDef, Error> {
    let parts: Vec<&str> = s.split(':').collect();
    let [name, mean, amp, cycles] = parts[..] else {
        return Err(Error::Config(format!("class `{s}` must be name:mean_deg:amplitude_deg:cycles")));
    };
    Ok(ClassDef {
        name: name.to_string(),
        elbow_mean_deg: parse_num("synth.classes", mean)?,
        elbow_amplitude_deg: parse_num("synth.classes", amp)?,
        elbow_cycles: parse_num("synth.classes", cycles)?,
    })
}

impl RunConfig {
    pub fn to_kv(&self) -> KvDoc {
        let mut d = KvDoc::new();
        d.set("seed", self.seed.to_string());
        d.set("schema", self.schema.clone());
        d.set("stream", self.stream.to_string());
        d.set("fusion", self.fusion.to_string());
        d.set("frames", self.frames.to_string());
        d.set("max_persons", self.max_persons.to_string());
        d.set("out", self.out.display().to_string());
        let t = &self.train;
        d.set("train.lr", t.base_lr.to_string());
        d.set("train.momentum", t.momentum.to_string());
        d.set("train.epochs", t.epochs.to_string());
        d.set("train.decay_epochs", join(&t.decay_epochs));
        d.set("train.decay_factor", t.decay_factor.to_string());
        d.set("train.batch_size", t.batch_size.to_string());
        d.set("model.scales", self.scales.to_string());
        d.set("model.channels", join(&self.channels));
        d.set("model.dilations", join(&self.dilations));
        let s = &self.synth;
        d.set("synth.n_per_class", self.n_per_class.to_string());
        d.set("synth.test_per_class", self.test_per_class.to_string());
        d.set("synth.persons", s.persons.to_string());
        d.set("synth.scale_min", s.scale_range.0.to_string());
        d.set("synth.scale_max", s.scale_range.1.to_string());
        d.set("synth.yaw_deg", s.yaw_range_deg.to_string());
        d.set("synth.arm_jitter_deg", s.arm_jitter_deg.to_string());
        d.set("synth.noise_sigma", s.noise_sigma.to_string());
        d.set("synth.classes", s.classes.iter().map(render_class).collect::<Vec<_>>().join(" "));
        d
    }

    /// Applies every key of `doc`; unknown keys are rejected.
    pub fn apply(&mut self, doc: &KvDoc) -> Result<(), Error> {
        for e in doc.entries() {
            let (k, v) = (e.key.as_str(), e.value.as_str());
            let at = |err: Error| match err {
                Error::Config(m) if e.line > 0 => Error::Config(format!("line {}: {m}", e.line)),
                other => other,
            };
            let r: Result<(), Error> = (|| {
                match k {
                    "seed" => self.seed = parse_num(k, v)?,
                    "schema" => self.schema = v.to_string(),
                    "stream" => self.stream = v.parse()?,
                    "fusion" => self.fusion = v.parse()?,
                    "frames" => self.frames = parse_num(k, v)?,
                    "max_persons" => self.max_persons = parse_num(k, v)?,
                    "out" => self.out = PathBuf::from(v),
                    "train.lr" => self.train.base_lr = parse_num(k, v)?,
                    "train.momentum" => self.train.momentum = parse_num(k, v)?,
                    "train.epochs" => self.train.epochs = parse_num(k, v)?,
                    "train.decay_epochs" => self.train.decay_epochs = parse_list(k, v)?,
                    "train.decay_factor" => self.train.decay_factor = parse_num(k, v)?,
                    "train.batch_size" => self.train.batch_size = parse_num(k, v)?,
                    "model.scales" => self.scales = parse_num(k, v)?,
                    "model.channels" => self.channels = parse_array(k, v)?,
                    "model.dilations" => self.dilations = parse_array(k, v)?,
                    "synth.n_per_class" => self.n_per_class = parse_num(k, v)?,
                    "synth.test_per_class" => self.test_per_class = parse_num(k, v)?,
                    "synth.persons" => self.synth.persons = parse_num(k, v)?,
                    "synth.scale_min" => self.synth.scale_range.0 = parse_num(k, v)?,
                    "synth.scale_max" => self.synth.scale_range.1 = parse_num(k, v)?,
                    "synth.yaw_deg" => self.synth.yaw_range_deg = parse_num(k, v)?,
                    "synth.arm_jitter_deg" => self.synth.arm_jitter_deg = parse_num(k, v)?,
                    "synth.noise_sigma" => self.synth.noise_sigma = parse_num(k, v)?,
                    "synth.classes" => {
                        self.synth.classes = v.split_whitespace().map(parse_class).collect::<Result<_, _>>()?
                    }
                    _ => return Err(Error::Config(format!("unknown setting `{k}`"))),
                }
                Ok(())
            })();
            r.map_err(at)?;
        }
        self.sync();
        Ok(())
    }

    /// Copies the top-level settings into the nested configs that also carry them.
    fn sync(&mut self) {
        self.train.seed = self.seed;
        self.train.stream = self.stream;
        self.train.fusion = self.fusion.clone();
        self.synth.frames = self.frames;
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.train.validate()?;
        self.synth.validate()?;
        if self.frames == 0 || self.max_persons == 0 {
            return Err(Error::Config("frames and max_persons must be at least 1".into()));
        }
        Ok(())
    }

    pub fn topology(&self) -> Result<SkeletonTopology, Error> {
        if self.schema == BUILTIN_SCHEMA {
            return Ok(SkeletonTopology::kinect25());
        }
        let path = Path::new(&self.schema);
        if !path.exists() {
            return Err(Error::Config(format!(
                "schema file `{}` does not exist; pass --schema <file> or use `{BUILTIN_SCHEMA}`",
                self.schema
            )));
        }
        SkeletonTopology::from_schema_file(path)
    }

    pub fn model_config(&self, in_channels: usize, num_classes: usize, seed: u64) -> AngNetConfig {
        AngNetConfig {
            in_channels,
            num_classes,
            scales: self.scales,
            channels: self.channels,
            dilations: self.dilations,
            seed,
        }
    }
}

fn resolve(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config file `{}`: {e}", path.display())))?;
        cfg.apply(&KvDoc::parse(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?)?;
    }
    let mut overrides = KvDoc::new();
    if let Some(v) = cli.seed {
        overrides.set("seed", v.to_string());
    }
    if let Some(v) = &cli.schema {
        overrides.set("schema", v.clone());
    }
    if let Some(v) = &cli.stream {
        overrides.set("stream", v.clone());
    }
    if let Some(v) = &cli.features {
        overrides.set("fusion", v.clone());
    }
    if let Some(v) = &cli.out {
        overrides.set("out", v.display().to_string());
    }
    if let Some(v) = cli.epochs {
        overrides.set("train.epochs", v.to_string());
    }
    if let Some(v) = cli.lr {
        overrides.set("train.lr", v.to_string());
    }
    if let Some(v) = cli.frames {
        overrides.set("frames", v.to_string());
    }
    cfg.apply(&overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_out(cfg: &RunConfig) -> CliResult<()> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::usage(format!("cannot create output directory `{}`: {e}", cfg.out.display())))?;
    fs::write(cfg.out.join(RESOLVED_CONFIG), cfg.to_kv().render()).map_err(Error::from)?;
    Ok(())
}

fn require_dir(path: &Path, what: &str, hint: &str) -> CliResult<()> {
    if !path.is_dir() {
        return Err(CliError::usage(format!("{what} `{}` is not a directory; {hint}", path.display())));
    }
    Ok(())
}

/// Action label from an NTU-style file name ending in `A<number>`, zero-based.
pub fn label_from_name(stem: &str) -> Option<usize> {
    let pos = stem.rfind('A')?;
    let digits = &stem[pos + 1..];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse::<usize>().ok()?.checked_sub(1)
}

fn cmd_parse(cfg: &RunConfig, inputs: &[PathBuf]) -> CliResult<i32> {
    if inputs.is_empty() {
        return Err(CliError::usage("no input files given; pass one or more skeleton capture files"));
    }
    let topo = cfg.topology()?;
    prepare_out(cfg)?;
    let mut clips = Vec::new();
    let mut failures = 0;
    for path in inputs {
        let result = fs::read(path)
            .map_err(Error::from)
            .and_then(|bytes| parse_skeleton_file(&bytes, &topo))
            .and_then(|raw| normalize_clip(&raw, &topo, cfg.frames, cfg.max_persons));
        let stem = path.file_stem().map_or_else(|| "clip".into(), |s| s.to_string_lossy().into_owned());
        match result {
            Ok(mut clip) => {
                clip.label = label_from_name(&stem);
                clips.push((stem, clip));
            }
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                failures += 1;
            }
        }
    }
    write_clip_archive(&cfg.out, &clips)?;
    println!("parsed {} of {} files into {}", clips.len(), inputs.len(), cfg.out.display());
    Ok(if failures > 0 { EXIT_DATA } else { EXIT_OK })
}

fn concat_features(cfg: &RunConfig) -> CliResult<Vec<FeatureKind>> {
    match &cfg.fusion {
        Fusion::Concat(f) => Ok(f.clone()),
        Fusion::Ensemble(_) => {
            Err(CliError::usage("encode writes one tensor per clip; use a plain feature list, not `ensemble:`"))
        }
    }
}

fn cmd_encode(cfg: &RunConfig, clips_dir: &Path) -> CliResult<i32> {
    require_dir(clips_dir, "clip archive", "create one with `angkit parse` or `angkit synth`")?;
    let features = concat_features(cfg)?;
    let topo = cfg.topology()?;
    let archive = read_clip_archive(clips_dir)?;
    prepare_out(cfg)?;
    let clips: Vec<Clip> = archive.iter().map(|(_, c)| c.clone()).collect();
    let encoded = encode_many(&clips, &topo, &features, cfg.stream)?;
    let mut entries = Vec::with_capacity(encoded.len());
    for ((entry, _), tensor) in archive.iter().zip(&encoded) {
        write_tensor_file(tensor, cfg.out.join(&entry.file))?;
        entries.push(entry.clone());
    }
    write_manifest(&cfg.out, &entries)?;
    let names = encoded.first().map(|t| t.channel_names().join(",")).unwrap_or_default();
    let c = encoded.first().map_or(0, |t| t.shape().c);
    println!("encoded {} clips, C={c}: {names}", encoded.len());
    Ok(EXIT_OK)
}

fn cmd_synth(cfg: &RunConfig) -> CliResult<i32> {
    prepare_out(cfg)?;
    let (n, m) = (cfg.n_per_class, cfg.test_per_class);
    let clips = generate_synthetic(&cfg.synth, n + m, cfg.seed)?;
    let (mut train_set, mut test_set) = (Vec::new(), Vec::new());
    for (i, clip) in clips.into_iter().enumerate() {
        let (class, k) = (i / (n + m), i % (n + m));
        let name = format!("c{class}_{k:04}");
        if k < n {
            train_set.push((name, clip));
        } else {
            test_set.push((name, clip));
        }
    }
    write_clip_archive(&cfg.out.join("train"), &train_set)?;
    write_clip_archive(&cfg.out.join("test"), &test_set)?;
    println!(
        "wrote {} training and {} test clips ({} classes) to {}",
        train_set.len(),
        test_set.len(),
        cfg.synth.classes.len(),
        cfg.out.display()
    );
    Ok(EXIT_OK)
}

fn load_samples(
    data: &Path,
    topo: &SkeletonTopology,
    features: &[FeatureKind],
    stream: Stream,
) -> CliResult<Vec<Sample>> {
    require_dir(data, "clip archive", "create one with `angkit parse` or `angkit synth`")?;
    let clips: Vec<Clip> = read_clip_archive(data)?.into_iter().map(|(_, c)| c).collect();
    if clips.is_empty() {
        return Err(CliError { code: EXIT_DATA, message: format!("clip archive `{}` is empty", data.display()) });
    }
    Ok(samples_from_clips(&clips, topo, features, stream)?)
}

fn member_name(features: &[FeatureKind]) -> String {
    features.iter().map(ToString::to_string).collect::<Vec<_>>().join("+")
}

fn report(ev: &Evaluation) -> String {
    let mut s = format!("accuracy={}\n", ev.accuracy);
    for (i, a) in ev.per_class.iter().enumerate() {
        match a {
            Some(a) => {
                let _ = writeln!(s, "class={i} accuracy={a}");
            }
            None => {
                let _ = writeln!(s, "class={i} accuracy=none");
            }
        }
    }
    s
}

fn cmd_train(cfg: &RunConfig, data: &Path, resume: Option<&Path>) -> CliResult<i32> {
    let topo = cfg.topology()?;
    let members = cfg.fusion.members();
    if resume.is_some() && members.len() > 1 {
        return Err(CliError::usage("--resume continues a single model; it cannot be combined with an ensemble"));
    }
    prepare_out(cfg)?;
    for (i, features) in members.iter().enumerate() {
        let samples = load_samples(data, &topo, features, cfg.stream)?;
        let classes = samples.iter().map(|s| s.label).max().unwrap_or(0) + 1;
        let mut tc = cfg.train.clone();
        tc.seed = cfg.seed.wrapping_add(i as u64);
        let (mut model, mut meta) = match resume {
            Some(path) => {
                let (model, meta) = load_checkpoint(path)?;
                if meta.features != *features || meta.stream != cfg.stream {
                    return Err(CliError::usage(format!(
                        "checkpoint `{}` was trained on {} ({}); the run asks for {} ({})",
                        path.display(),
                        member_name(&meta.features),
                        meta.stream,
                        member_name(features),
                        cfg.stream
                    )));
                }
                (model, meta)
            }
            None => {
                let mut model = AngNet::new(
                    cfg.model_config(samples[0].features.shape().c, classes.max(2), tc.seed),
                    topo.clone(),
                )?;
                model.fit_input_norm(samples.iter().map(|s| &s.features))?;
                let meta = TrainingMeta { features: features.clone(), stream: cfg.stream, ..TrainingMeta::default() };
                (model, meta)
            }
        };
        let name = if members.len() == 1 { "model".to_string() } else { format!("model_{}", member_name(features)) };
        let initial = evaluate(&model, &samples)?;
        println!("{name}: {} parameters, initial accuracy={}", model.num_params(), initial.accuracy);
        let records = train(&mut model, &samples, &tc, &mut meta, |r| println!("{name}: {r}"))?;
        let mut metrics = Vec::new();
        write_metrics(&meta.history, &mut metrics)?;
        fs::write(cfg.out.join(format!("{name}.metrics.txt")), metrics).map_err(Error::from)?;
        save_checkpoint(cfg.out.join(format!("{name}.angm")), &model, &meta)?;
        let final_eval = evaluate(&model, &samples)?;
        println!("{name}: trained {} epochs, final accuracy={}", records.len(), final_eval.accuracy);
    }
    Ok(EXIT_OK)
}

fn cmd_eval(cfg: &RunConfig, data: &Path, paths: &[PathBuf]) -> CliResult<i32> {
    let topo = cfg.topology()?;
    let mut models = Vec::new();
    let mut datasets = Vec::new();
    for path in paths {
        if !path.is_file() {
            return Err(CliError::usage(format!(
                "checkpoint `{}` not found; train one with `angkit train`",
                path.display()
            )));
        }
        let (model, meta) = load_checkpoint(path)?;
        datasets.push(load_samples(data, &topo, &meta.features, meta.stream)?);
        models.push(model);
    }
    prepare_out(cfg)?;
    let ev = if models.len() == 1 {
        evaluate(&models[0], &datasets[0])?
    } else {
        let refs: Vec<&AngNet> = models.iter().collect();
        let sets: Vec<&[Sample]> = datasets.iter().map(Vec::as_slice).collect();
        evaluate_ensemble(&refs, &sets)?
    };
    let text = report(&ev);
    fs::write(cfg.out.join("eval.txt"), &text).map_err(Error::from)?;
    fs::write(cfg.out.join("confusion.txt"), ev.confusion_grid()).map_err(Error::from)?;
    print!("{text}");
    Ok(EXIT_OK)
}

fn cmd_gradcheck(cfg: &RunConfig, instances: usize) -> CliResult<i32> {
    if instances == 0 {
        return Err(CliError::usage("--instances must be at least 1"));
    }
    prepare_out(cfg)?;
    let mut lines = String::new();
    let mut ok = true;
    for (name, r) in primitive_checks(cfg.seed, instances)? {
        let pass = r.passes(PRIMITIVE_TOL);
        ok &= pass;
        let _ = writeln!(
            lines,
            "{name} max_rel_err={:e} checked={} unresolved={} {}",
            r.max_rel_err,
            r.checked,
            r.unresolved,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    for seed in cfg.seed..cfg.seed + 3 {
        let r = end_to_end_check(seed)?;
        let pass = r.passes(END_TO_END_TOL);
        ok &= pass;
        let _ = writeln!(
            lines,
            "angnet_tiny seed={seed} max_rel_err={:e} checked={} unresolved={} {}",
            r.max_rel_err,
            r.checked,
            r.unresolved,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    fs::write(cfg.out.join("gradcheck.txt"), &lines).map_err(Error::from)?;
    print!("{lines}");
    Ok(if ok { EXIT_OK } else { EXIT_VERIFY })
}

fn dispatch(cli: Cli) -> CliResult<i32> {
    let cfg = resolve(&cli)?;
    match &cli.command {
        Command::Parse { inputs } => cmd_parse(&cfg, inputs),
        Command::Encode { clips } => cmd_encode(&cfg, clips),
        Command::Synth => cmd_synth(&cfg),
        Command::Train { data, resume } => cmd_train(&cfg, data, resume.as_deref()),
        Command::Eval { data, models } => cmd_eval(&cfg, data, models),
        Command::Gradcheck { instances } => cmd_gradcheck(&cfg, *instances),
    }
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_from_capture_names() {
        assert_eq!(label_from_name("S001C001P001R001A060"), Some(59));
        assert_eq!(label_from_name("S001C001P001R001A001"), Some(0));
        assert_eq!(label_from_name("clip"), None);
        assert_eq!(label_from_name("A000"), None);
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut cfg = RunConfig { seed: 9, fusion: "ensemble:joint,angular".parse().unwrap(), ..RunConfig::default() };
        cfg.train.decay_epochs = vec![3, 7];
        cfg.sync();
        let mut back = RunConfig::default();
        back.apply(&KvDoc::parse(&cfg.to_kv().render()).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply(&KvDoc::parse("[train]\nlrr = 1").unwrap()).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("train.lrr") && m.contains("line 2")), "{err}");
        assert!(cfg.apply(&KvDoc::parse("stream = sideways").unwrap()).is_err());
        assert!(cfg.apply(&KvDoc::parse("[model]\nchannels = 6 12").unwrap()).is_err());
    }

    #[test]
    fn clap_usage_errors_exit_one() {
        assert_eq!(run(["angkit", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["angkit", "--help"]), EXIT_OK);
        assert_eq!(run(["angkit", "parse"]), EXIT_USAGE);
    }
}
