//! `breathsim`: generate traces, extract features, train, evaluate, sweep.

mod config;
mod error;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use breathsim::channel::{ChannelConfig, DEFAULT_NOISE_SIGMA};
use breathsim::dataset::{feature_row, generate_traces, to_dataset, FeatureRow, GeneratorConfig};
use breathsim::dsp::DspConfig;
use breathsim::eval::{
    distance_label, evaluate_features, percent, plot_csv, render_report, run_distance, validate_distances, EvalReport,
    EvalRow, SweepConfig, DEFAULT_K, DEFAULT_PER_CLASS,
};
use breathsim::features::FEATURE_COUNT;
use breathsim::io::{read_feature_csv, read_traces, write_feature_csv, write_traces};
use breathsim::ml::{serialize_model, train, Classifier, FeaturesPerSplit, ModelKind, TrainConfig};
use breathsim::waveform::{BreathingClass, DEFAULT_PERIOD_JITTER};
use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use config::{overlay, FileConfig};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "breathsim",
    version,
    about = "Simulate infrared breathing sensing and classify breathing patterns"
)]
struct Cli {
    /// Base seed; every random stream is derived from it
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON run configuration; command-line flags take precedence over it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory for output files
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Print nothing on standard output
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize labelled sensor traces as JSON Lines
    Generate(GenerateArgs),
    /// Extract the feature table (CSV) from a trace file
    Features(FeaturesArgs),
    /// Train a decision tree or random forest on a feature table
    Train(TrainArgs),
    /// Cross-validate models on a feature table, per distance
    Evaluate(EvaluateArgs),
    /// Generate, extract and cross-validate at each distance; print the accuracy grid
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RecordingArgs {
    /// Recordings per class and distance
    #[arg(long, default_value_t = DEFAULT_PER_CLASS)]
    per_class: usize,
    /// Sensor distances in meters, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 1.5])]
    distances: Vec<f64>,
    /// Sensor noise standard deviation in volts
    #[arg(long, default_value_t = DEFAULT_NOISE_SIGMA)]
    noise_sigma: f64,
    /// Relative period and amplitude jitter of breathing cycles
    #[arg(long, default_value_t = DEFAULT_PERIOD_JITTER)]
    jitter: f64,
}

#[derive(Args)]
struct ModelArgs {
    /// Trees in a random forest
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Train forest trees on all rows instead of bootstrap samples
    #[arg(long)]
    no_bootstrap: bool,
    /// Features tried per forest split: sqrt, all or a count
    #[arg(long, default_value = "sqrt")]
    features_per_split: FeaturesPerSplit,
    /// Maximum tree depth
    #[arg(long, default_value_t = 12)]
    max_depth: usize,
}

#[derive(Args)]
struct GenerateArgs {
    /// "all" or a comma-separated list of class names or ids
    #[arg(long, default_value = "all")]
    classes: String,
    #[command(flatten)]
    recording: RecordingArgs,
    /// Trace file [default: <out>/traces.jsonl]
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Trace file (JSON Lines)
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Feature table [default: <out>/features.csv]
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelChoice {
    /// Decision tree
    Dt,
    /// Random forest
    Rf,
}

impl From<ModelChoice> for ModelKind {
    fn from(m: ModelChoice) -> Self {
        match m {
            ModelChoice::Dt => ModelKind::Tree,
            ModelChoice::Rf => ModelKind::Forest,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Feature table (CSV)
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    #[arg(long, value_enum)]
    model: ModelChoice,
    #[command(flatten)]
    model_args: ModelArgs,
    /// Model file [default: <out>/model.json]
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Feature table (CSV)
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Evaluate only this model [default: both]
    #[arg(long, value_enum)]
    model: Option<ModelChoice>,
    /// Cross-validation folds
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[command(flatten)]
    model_args: ModelArgs,
    /// Report file [default: <out>/report.json]
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    recording: RecordingArgs,
    /// Cross-validation folds
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[command(flatten)]
    model_args: ModelArgs,
    /// Also write the sensor traces of each distance
    #[arg(long)]
    emit_traces: bool,
    /// Write accuracy_by_distance.csv for plotting
    #[arg(long)]
    plot_data: bool,
    /// Write only the report (and plot data), no per-distance feature tables
    #[arg(long, conflicts_with = "emit_traces")]
    no_intermediates: bool,
}

/// Resolved global settings plus access to where each flag came from.
struct Run<'a> {
    matches: &'a ArgMatches,
    file: FileConfig,
    seed: u64,
    out: PathBuf,
    quiet: bool,
}

impl Run<'_> {
    fn given(&self, id: &str) -> bool {
        self.matches.value_source(id) == Some(ValueSource::CommandLine)
    }

    fn say(&self, text: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", text.as_ref());
        }
    }

    fn output_path(&self, explicit: Option<&PathBuf>, name: &str) -> Result<PathBuf, CliError> {
        match explicit {
            Some(p) => Ok(p.clone()),
            None => {
                std::fs::create_dir_all(&self.out)
                    .map_err(|e| CliError::Io(format!("cannot create {}: {e}", self.out.display())))?;
                Ok(self.out.join(name))
            }
        }
    }

    fn channel(&self, recording: &RecordingArgs) -> Result<ChannelConfig, CliError> {
        let mut channel = overlay(ChannelConfig::default(), self.file.channel.as_ref(), "channel")?;
        if self.given("noise_sigma") {
            channel.noise_sigma = recording.noise_sigma;
        }
        channel.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(channel)
    }

    fn generator(&self, recording: &RecordingArgs) -> Result<GeneratorConfig, CliError> {
        let mut generator = overlay(GeneratorConfig::default(), self.file.generator.as_ref(), "generator")?;
        if self.given("jitter") {
            generator = generator.with_jitter(recording.jitter);
        }
        generator.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(generator)
    }

    fn dsp(&self) -> Result<DspConfig, CliError> {
        overlay(DspConfig::default(), self.file.dsp.as_ref(), "dsp")
    }

    fn per_class(&self, recording: &RecordingArgs) -> usize {
        if self.given("per_class") {
            recording.per_class
        } else {
            self.file.per_class.unwrap_or(recording.per_class)
        }
    }

    fn distances(&self, recording: &RecordingArgs) -> Vec<f64> {
        if self.given("distances") {
            recording.distances.clone()
        } else {
            self.file
                .distances
                .clone()
                .unwrap_or_else(|| recording.distances.clone())
        }
    }

    fn k(&self, flag: usize) -> usize {
        if self.given("k") {
            flag
        } else {
            self.file.k.unwrap_or(flag)
        }
    }

    /// Tree and forest configs: defaults, then the config file, then flags.
    fn train_configs(&self, args: &ModelArgs) -> Result<(TrainConfig, TrainConfig), CliError> {
        let mut tree = overlay(TrainConfig::tree(), self.file.tree.as_ref(), "tree")?;
        let mut forest = overlay(TrainConfig::forest(), self.file.forest.as_ref(), "forest")?;
        if self.given("max_depth") {
            tree.max_depth = args.max_depth;
            forest.max_depth = args.max_depth;
        }
        if self.given("trees") {
            forest.n_trees = args.trees;
        }
        if self.given("no_bootstrap") {
            forest.bootstrap = false;
        }
        if self.given("features_per_split") {
            forest.features_per_split = args.features_per_split;
        }
        for c in [&tree, &forest] {
            c.validate(FEATURE_COUNT).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        Ok((tree, forest))
    }
}

fn parse_classes(items: &[String]) -> Result<Vec<BreathingClass>, CliError> {
    if items.len() == 1 && items[0].trim().eq_ignore_ascii_case("all") {
        return Ok(BreathingClass::ALL.to_vec());
    }
    let mut classes = Vec::new();
    for item in items {
        let item = item.trim();
        let class = match item.parse::<u32>() {
            Ok(id) => BreathingClass::from_id(id).map_err(|e| CliError::Usage(e.to_string()))?,
            Err(_) => BreathingClass::ALL
                .into_iter()
                .find(|c| c.name().eq_ignore_ascii_case(item))
                .ok_or_else(|| CliError::Usage(format!("unknown class {item:?}")))?,
        };
        if classes.contains(&class) {
            return Err(CliError::Usage(format!("class {class} listed twice")));
        }
        classes.push(class);
    }
    if classes.is_empty() {
        return Err(CliError::Usage("no classes given".into()));
    }
    Ok(classes)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush()
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn read_features(path: &Path) -> Result<Vec<FeatureRow>, CliError> {
    read_feature_csv(open(path)?).map_err(|e| CliError::from(e).in_file(path))
}

fn generate(run: &Run, args: &GenerateArgs) -> Result<(), CliError> {
    let classes = if run.matches.value_source("classes") == Some(ValueSource::CommandLine) {
        parse_classes(&args.classes.split(',').map(String::from).collect::<Vec<_>>())?
    } else {
        parse_classes(&run.file.classes.clone().unwrap_or_else(|| vec![args.classes.clone()]))?
    };
    let per_class = run.per_class(&args.recording);
    let distances = run.distances(&args.recording);
    let channel = run.channel(&args.recording)?;
    let generator = run.generator(&args.recording)?;
    validate_distances(&distances)?;
    if per_class == 0 {
        return Err(CliError::Usage("per-class must be >= 1".into()));
    }

    let path = run.output_path(args.output.as_ref(), "traces.jsonl")?;
    let mut w = create(&path)?;
    let mut manifest = Vec::new();
    for &d in &distances {
        let traces = generate_traces(&classes, per_class, d, &channel, &generator, run.seed)?;
        write_traces(&mut w, &traces).map_err(|e| CliError::from(e).in_file(&path))?;
        manifest.push((d, traces.len()));
    }
    finish(w, &path)?;

    let total: usize = manifest.iter().map(|(_, n)| n).sum();
    run.say(format!(
        "wrote {total} records to {} (seed {})",
        path.display(),
        run.seed
    ));
    let names: Vec<&str> = classes.iter().map(|c| c.name()).collect();
    run.say(format!("distance  {}", names.join("  ")));
    for (d, _) in &manifest {
        let counts: Vec<String> = names.iter().map(|n| format!("{per_class:>w$}", w = n.len())).collect();
        run.say(format!("{:<8}  {}", distance_label(*d), counts.join("  ")));
    }
    Ok(())
}

fn features(run: &Run, args: &FeaturesArgs) -> Result<(), CliError> {
    let dsp = run.dsp()?;
    let traces = read_traces(open(&args.input)?).map_err(|e| CliError::from(e).in_file(&args.input))?;
    if traces.is_empty() {
        eprintln!(
            "warning: {} contains no traces; writing the header only",
            args.input.display()
        );
    }
    let mut rows = Vec::with_capacity(traces.len());
    for (i, trace) in traces.iter().enumerate() {
        dsp.validate(trace.sample_rate)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let row = feature_row(trace, &dsp)
            .map_err(|e| CliError::Data(format!("{}: record {}: {e}", args.input.display(), i + 1)))?;
        rows.push(row);
    }
    let path = run.output_path(args.output.as_ref(), "features.csv")?;
    let mut w = create(&path)?;
    write_feature_csv(&mut w, &rows).map_err(|e| CliError::from(e).in_file(&path))?;
    finish(w, &path)?;
    run.say(format!("wrote {} feature rows to {}", rows.len(), path.display()));
    Ok(())
}

fn train_cmd(run: &Run, args: &TrainArgs) -> Result<(), CliError> {
    let kind = ModelKind::from(args.model);
    let (tree, forest) = run.train_configs(&args.model_args)?;
    if kind == ModelKind::Tree {
        if let Some(flag) = ["trees", "no_bootstrap", "features_per_split"]
            .into_iter()
            .find(|f| run.given(f))
        {
            return Err(CliError::Usage(format!(
                "--{} applies only to --model rf",
                flag.replace('_', "-")
            )));
        }
    }
    let config = match kind {
        ModelKind::Tree => tree,
        ModelKind::Forest => forest,
    }
    .with_seed(run.seed);

    let rows = read_features(&args.input)?;
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", args.input.display())));
    }
    let dataset = to_dataset(&rows)?;
    let model = train(&dataset, kind, &config)?;
    let mut hits = 0;
    for i in 0..dataset.len() {
        hits += (model.predict(dataset.row(i))?.class == dataset.label(i)) as usize;
    }

    let path = run.output_path(args.output.as_ref(), "model.json")?;
    write_text(&path, &serialize_model(&model))?;
    run.say(format!(
        "{} trained on {} rows; training accuracy {:.4}; model written to {}",
        kind.label(),
        dataset.len(),
        hits as f64 / dataset.len() as f64,
        path.display()
    ));
    Ok(())
}

fn evaluate(run: &Run, args: &EvaluateArgs) -> Result<(), CliError> {
    let (tree, forest) = run.train_configs(&args.model_args)?;
    let k = run.k(args.k);
    let kinds: Vec<ModelKind> = match args.model {
        Some(m) => vec![m.into()],
        None => vec![ModelKind::Tree, ModelKind::Forest],
    };
    let config = SweepConfig {
        k,
        tree,
        forest,
        seed: run.seed,
        ..SweepConfig::default()
    };
    if k < 2 {
        return Err(CliError::Usage(format!("k must be >= 2, got {k}")));
    }

    let rows = read_features(&args.input)?;
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", args.input.display())));
    }
    let mut distances: Vec<f64> = Vec::new();
    for r in &rows {
        if !distances.contains(&r.distance_m) {
            distances.push(r.distance_m);
        }
    }
    let mut results: Vec<EvalRow> = Vec::new();
    for &d in &distances {
        let subset: Vec<FeatureRow> = rows.iter().filter(|r| r.distance_m == d).copied().collect();
        results.extend(evaluate_features(&subset, d, &config, &kinds)?);
    }
    let report = EvalReport::new(k, run.seed, results);

    let path = run.output_path(args.output.as_ref(), "report.json")?;
    write_text(&path, &report.to_json())?;
    run.say(render_report(&report).trim_end());
    for r in &report.rows {
        run.say(format!(
            "{} mean accuracy at {}: {}",
            r.model_kind.label(),
            distance_label(r.distance_m),
            percent(r.mean_accuracy)
        ));
    }
    run.say(format!("report written to {}", path.display()));
    Ok(())
}

fn sweep(run: &Run, args: &SweepArgs) -> Result<(), CliError> {
    let (tree, forest) = run.train_configs(&args.model_args)?;
    let config = SweepConfig {
        distances: run.distances(&args.recording),
        per_class: run.per_class(&args.recording),
        k: run.k(args.k),
        channel: run.channel(&args.recording)?,
        generator: run.generator(&args.recording)?,
        dsp: run.dsp()?,
        tree,
        forest,
        seed: run.seed,
    };
    config.validate()?;

    let report_path = run.output_path(None, "report.json")?;
    let mut rows = Vec::new();
    for &d in &config.distances {
        let result = run_distance(&config, d)?;
        if !args.no_intermediates {
            let label = distance_label(d);
            let path = run.out.join(format!("features_{label}.csv"));
            let mut w = create(&path)?;
            write_feature_csv(&mut w, &result.features).map_err(|e| CliError::from(e).in_file(&path))?;
            finish(w, &path)?;
            if args.emit_traces {
                let path = run.out.join(format!("traces_{label}.jsonl"));
                let mut w = create(&path)?;
                write_traces(&mut w, &result.traces).map_err(|e| CliError::from(e).in_file(&path))?;
                finish(w, &path)?;
            }
        }
        rows.extend(result.rows);
    }
    let report = EvalReport::new(config.k, config.seed, rows);
    write_text(&report_path, &report.to_json())?;
    if args.plot_data {
        write_text(&run.out.join("accuracy_by_distance.csv"), &plot_csv(&report))?;
    }
    run.say(render_report(&report).trim_end());
    run.say(format!("report written to {}", report_path.display()));
    Ok(())
}

fn execute(matches: &ArgMatches) -> Result<(), CliError> {
    let cli = Cli::from_arg_matches(matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let (_, sub) = matches.subcommand().expect("a subcommand is required");
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let from_cli = |id: &str| sub.value_source(id) == Some(ValueSource::CommandLine);
    let run = Run {
        matches: sub,
        seed: if from_cli("seed") {
            cli.seed
        } else {
            file.seed.unwrap_or(cli.seed)
        },
        out: if from_cli("out") {
            cli.out.clone()
        } else {
            file.out.clone().unwrap_or(cli.out.clone())
        },
        quiet: cli.quiet || file.quiet.unwrap_or(false),
        file,
    };
    match &cli.command {
        Command::Generate(a) => generate(&run, a),
        Command::Features(a) => features(&run, a),
        Command::Train(a) => train_cmd(&run, a),
        Command::Evaluate(a) => evaluate(&run, a),
        Command::Sweep(a) => sweep(&run, a),
    }
}

fn main() -> ExitCode {
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        // Help and version exit 0; usage errors exit 2.
        Err(e) => e.exit(),
    };
    match execute(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
