//! Subcommand definitions and their execution.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use segfusion_core::segmenters::KMeansInit;
use segfusion_core::{
    adjusted_rand_index, estimate_beta, estimate_c, fit_qd, fuse, kmeans_segment, rand_index,
    BandMode, BaseDistance, Direction, DistanceModel, EarlyStop, FusionConfig, HInit, Init,
    KMeansConfig, KMeansSegmenter, Partition,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{
    absolute, load_image, load_label_map, read_json, read_raw_labels, to_json, write_file,
    write_json, write_label_map, write_raw_labels,
};
use crate::manifest::{LabelMapRecord, RunManifest};

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "SEGFUSION_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "segfusion",
    version,
    about = "Consensus fusion of image segmentations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct Common {
    /// Seed for every random choice.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Directory receiving all outputs [default: current directory].
    #[arg(long, env = OUT_DIR_ENV)]
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,

    /// Replay the run recorded in this manifest. Every other flag except
    /// --out-dir is taken from the manifest.
    #[arg(long)]
    #[serde(skip)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Cluster an image into label maps with k-means.
    Segment(SegmentArgs),
    /// Fuse an ensemble of label maps into a consensus.
    Fuse(FuseArgs),
    /// Choose the label count by the segmentation index over a grid.
    EstimateC(EstimateCArgs),
    /// Choose the forgetting factor by the beta index over a grid.
    EstimateBeta(EstimateBetaArgs),
    /// Rand index and ARI of a label map against a reference.
    Evaluate(EvaluateArgs),
    /// Convert a raster between PGM and CSV, keeping its values.
    Convert(ConvertArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Segment(_) => "segment",
            Command::Fuse(_) => "fuse",
            Command::EstimateC(_) => "estimate-c",
            Command::EstimateBeta(_) => "estimate-beta",
            Command::Evaluate(_) => "evaluate",
            Command::Convert(_) => "convert",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Segment(a) => &a.common,
            Command::Fuse(a) => &a.common,
            Command::EstimateC(a) => &a.common,
            Command::EstimateBeta(a) => &a.common,
            Command::Evaluate(a) => &a.common,
            Command::Convert(a) => &a.common,
        }
    }

    fn common_mut(&mut self) -> &mut Common {
        match self {
            Command::Segment(a) => &mut a.common,
            Command::Fuse(a) => &mut a.common,
            Command::EstimateC(a) => &mut a.common,
            Command::EstimateBeta(a) => &mut a.common,
            Command::Evaluate(a) => &mut a.common,
            Command::Convert(a) => &mut a.common,
        }
    }

    /// Rewrites input paths to absolute form so a manifest replays from any
    /// working directory.
    fn absolutize(&mut self) {
        let abs = |p: &mut PathBuf| *p = absolute(p);
        let abs_opt = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                *p = absolute(p);
            }
        };
        match self {
            Command::Segment(a) => abs_opt(&mut a.image),
            Command::Fuse(a) => {
                a.maps.iter_mut().for_each(abs);
                a.fusion.absolutize();
            }
            Command::EstimateC(a) => abs_opt(&mut a.image),
            Command::EstimateBeta(a) => {
                a.maps.iter_mut().for_each(abs);
                a.fusion.absolutize();
            }
            Command::Evaluate(a) => {
                abs_opt(&mut a.labels);
                abs_opt(&mut a.reference);
            }
            Command::Convert(a) => abs_opt(&mut a.input),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelFormat {
    #[default]
    Pgm,
    Csv,
}

impl LabelFormat {
    fn ext(self) -> &'static str {
        match self {
            LabelFormat::Pgm => "pgm",
            LabelFormat::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    #[default]
    PerBand,
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KMeansInitArg {
    #[default]
    KmeansPlusPlus,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceArg {
    #[default]
    Sdd,
    Dl,
    Qd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisArg {
    #[default]
    Sdd,
    Dl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HInitArg {
    #[default]
    Zeros,
    FullObjective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionArg {
    #[default]
    Maximize,
    Minimize,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Maximize => Direction::Maximize,
            DirectionArg::Minimize => Direction::Minimize,
        }
    }
}

/// k-means settings shared by `segment` and `estimate-c`.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct KMeansArgs {
    /// Cluster each band separately (one map per band) or the joint pixel
    /// vectors (one map).
    #[arg(long, value_enum, default_value_t = ModeArg::PerBand)]
    pub mode: ModeArg,

    /// Lloyd iteration cap.
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,

    /// Relative SSE improvement below which Lloyd iterations stop.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,

    /// Centroid seeding.
    #[arg(long = "kmeans-init", value_enum, default_value_t = KMeansInitArg::KmeansPlusPlus)]
    pub init: KMeansInitArg,

    /// Z-score every band before clustering.
    #[arg(long)]
    pub standardize: bool,
}

impl KMeansArgs {
    fn config(&self, k: usize, seed: u64) -> KMeansConfig<f64> {
        KMeansConfig {
            k,
            max_iters: self.max_iters,
            tol: self.tol,
            seed,
            init: match self.init {
                KMeansInitArg::KmeansPlusPlus => KMeansInit::KMeansPlusPlus,
                KMeansInitArg::Random => KMeansInit::Random,
            },
            mode: match self.mode {
                ModeArg::PerBand => BandMode::PerBand,
                ModeArg::Joint => BandMode::Joint,
            },
            standardize: self.standardize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SegmentArgs {
    /// JSON image manifest listing one PGM or CSV file per band.
    #[arg(long, required_unless_present = "manifest")]
    pub image: Option<PathBuf>,

    /// Number of clusters.
    #[arg(short = 'c', long = "clusters", default_value_t = 2)]
    pub clusters: usize,

    #[command(flatten)]
    pub kmeans: KMeansArgs,

    /// Output label-map format.
    #[arg(long, value_enum, default_value_t = LabelFormat::Pgm)]
    pub format: LabelFormat,

    #[command(flatten)]
    pub common: Common,
}

/// Fusion settings shared by `fuse` and `estimate-beta`.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FusionArgs {
    /// Iteration cap T.
    #[arg(long, default_value_t = 1000)]
    pub t_max: usize,

    /// Partition distance driving the fusion.
    #[arg(long, value_enum, default_value_t = DistanceArg::Sdd)]
    pub distance: DistanceArg,

    /// Trained quasi-distance model (JSON) for --distance qd.
    #[arg(long, conflicts_with = "qd_train")]
    pub qd_model: Option<PathBuf>,

    /// Label maps whose pairwise distances train the quasi-distance range.
    #[arg(long, num_args = 1..)]
    pub qd_train: Vec<PathBuf>,

    /// Base distance normalized by the quasi-distance.
    #[arg(long, value_enum, default_value_t = BasisArg::Sdd)]
    pub qd_basis: BasisArg,

    /// Initial consensus label map [default: best-of-K member].
    #[arg(long)]
    pub init: Option<PathBuf>,

    /// Initial accumulator.
    #[arg(long, value_enum, default_value_t = HInitArg::Zeros)]
    pub h_init: HInitArg,

    /// Stop after this many complete epochs without a label change.
    #[arg(long)]
    pub patience: Option<u32>,

    /// Consensus label alphabet [default: largest member alphabet].
    #[arg(long)]
    pub num_labels: Option<usize>,

    /// Return the final partition instead of the best one visited.
    #[arg(long)]
    pub no_keep_best: bool,
}

impl FusionArgs {
    fn absolutize(&mut self) {
        if let Some(p) = &mut self.qd_model {
            *p = absolute(p);
        }
        self.qd_train.iter_mut().for_each(|p| *p = absolute(p));
        if let Some(p) = &mut self.init {
            *p = absolute(p);
        }
    }

    fn distance_model(
        &self,
        n: usize,
        records: &mut Vec<LabelMapRecord>,
    ) -> Result<DistanceModel<f64>> {
        let basis = match self.qd_basis {
            BasisArg::Sdd => BaseDistance::Sdd,
            BasisArg::Dl => BaseDistance::Dl,
        };
        if self.distance != DistanceArg::Qd
            && (self.qd_model.is_some() || !self.qd_train.is_empty())
        {
            return Err(CliError::Usage(
                "--qd-model and --qd-train need --distance qd".into(),
            ));
        }
        Ok(match self.distance {
            DistanceArg::Sdd => DistanceModel::sdd(),
            DistanceArg::Dl => DistanceModel::dl(),
            DistanceArg::Qd => {
                if let Some(path) = &self.qd_model {
                    let m: DistanceModel<f64> = read_json(path)?;
                    m.validate()?;
                    m
                } else if !self.qd_train.is_empty() {
                    let maps = load_maps(&self.qd_train, records)?;
                    let mut pairs = Vec::new();
                    for i in 0..maps.len() {
                        for j in i + 1..maps.len() {
                            pairs.push((maps[i].clone(), maps[j].clone()));
                        }
                    }
                    fit_qd(&pairs, basis)?
                } else {
                    log::warn!("untrained quasi-distance: using the theoretical range");
                    DistanceModel::qd_untrained(n, basis)?
                }
            }
        })
    }

    fn config(
        &self,
        beta: f64,
        seed: u64,
        n: usize,
        records: &mut Vec<LabelMapRecord>,
    ) -> Result<FusionConfig<f64>> {
        let init = match &self.init {
            Some(path) => Init::Given(load_map(path, records)?),
            None => Init::Bok,
        };
        let cfg = FusionConfig {
            beta,
            t_max: self.t_max,
            seed,
            distance: self.distance_model(n, records)?,
            init,
            early_stop: self.patience.map_or(EarlyStop::Off, EarlyStop::Patience),
            h_init: match self.h_init {
                HInitArg::Zeros => HInit::Zeros,
                HInitArg::FullObjective => HInit::FullObjective,
            },
            num_labels: self.num_labels,
            keep_best: !self.no_keep_best,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FuseArgs {
    /// Ensemble label maps (PGM or CSV).
    #[arg(required_unless_present = "manifest", num_args = 1..)]
    pub maps: Vec<PathBuf>,

    /// Forgetting factor in [0, 1].
    #[arg(long, default_value_t = 0.9)]
    pub beta: f64,

    #[command(flatten)]
    pub fusion: FusionArgs,

    /// Consensus label-map format.
    #[arg(long, value_enum, default_value_t = LabelFormat::Pgm)]
    pub format: LabelFormat,

    /// Also write palette.json with one RGB color per consensus label.
    #[arg(long)]
    pub palette: bool,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EstimateCArgs {
    /// JSON image manifest listing one PGM or CSV file per band.
    #[arg(long, required_unless_present = "manifest")]
    pub image: Option<PathBuf>,

    /// Candidate label counts.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7,8,9,10")]
    pub c_grid: Vec<usize>,

    /// Whether the best index value is the largest or the smallest.
    #[arg(long, value_enum, default_value_t = DirectionArg::Maximize)]
    pub direction: DirectionArg,

    #[command(flatten)]
    pub kmeans: KMeansArgs,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EstimateBetaArgs {
    /// Ensemble label maps (PGM or CSV).
    #[arg(required_unless_present = "manifest", num_args = 1..)]
    pub maps: Vec<PathBuf>,

    /// Candidate forgetting factors.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,0.99"
    )]
    pub beta_grid: Vec<f64>,

    /// Whether the best index value is the largest or the smallest.
    #[arg(long, value_enum, default_value_t = DirectionArg::Maximize)]
    pub direction: DirectionArg,

    #[command(flatten)]
    pub fusion: FusionArgs,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// Label map to score.
    #[arg(long, required_unless_present = "manifest")]
    pub labels: Option<PathBuf>,

    /// Reference (ground-truth) label map.
    #[arg(long, required_unless_present = "manifest")]
    pub reference: Option<PathBuf>,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ConvertArgs {
    /// Source raster (.pgm or .csv).
    #[arg(long, required_unless_present = "manifest")]
    pub input: Option<PathBuf>,

    /// Destination file name, resolved against the output directory; the
    /// extension picks the format.
    #[arg(long, required_unless_present = "manifest")]
    pub output: Option<PathBuf>,

    /// Write ASCII (P2) instead of binary (P5) PGM.
    #[arg(long)]
    pub ascii: bool,

    #[command(flatten)]
    pub common: Common,
}

/// What a finished command wrote, relative to its output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub outputs: Vec<String>,
    /// Short JSON summary printed on stdout.
    pub summary: String,
}

fn load_map(path: &Path, records: &mut Vec<LabelMapRecord>) -> Result<Partition> {
    let (p, values) = load_label_map(path)?;
    records.push(LabelMapRecord {
        path: path.to_path_buf(),
        values,
    });
    Ok(p)
}

fn load_maps(paths: &[PathBuf], records: &mut Vec<LabelMapRecord>) -> Result<Vec<Partition>> {
    paths.iter().map(|p| load_map(p, records)).collect()
}

fn required<'a>(opt: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    opt.as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing {}", flag)))
}

/// Resolves a replay request and runs the command.
pub fn execute(cmd: Command) -> Result<Outcome> {
    let cli_common = cmd.common().clone();
    let (mut cmd, recorded_out) = match &cli_common.manifest {
        Some(path) => {
            let m: RunManifest = read_json(path)?;
            if m.invocation.name() != cmd.name() {
                return Err(CliError::Usage(format!(
                    "manifest records `{}`, not `{}`",
                    m.invocation.name(),
                    cmd.name()
                )));
            }
            (m.invocation, Some(m.out_dir))
        }
        None => (cmd, None),
    };
    cmd.absolutize();
    let out_dir = cli_common
        .out_dir
        .or(recorded_out)
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let out_dir = absolute(&out_dir);
    {
        let c = cmd.common_mut();
        c.out_dir = None;
        c.manifest = None;
    }
    let mut run = Run {
        out_dir: out_dir.clone(),
        outputs: Vec::new(),
        label_maps: Vec::new(),
    };
    let summary = match &cmd {
        Command::Segment(a) => run.segment(a)?,
        Command::Fuse(a) => run.fuse(a)?,
        Command::EstimateC(a) => run.estimate_c(a)?,
        Command::EstimateBeta(a) => run.estimate_beta(a)?,
        Command::Evaluate(a) => run.evaluate(a)?,
        Command::Convert(a) => run.convert(a)?,
    };
    let manifest_name = format!("{}.manifest.json", cmd.name());
    let manifest = RunManifest::new(
        cmd.clone(),
        out_dir.clone(),
        run.outputs.clone(),
        run.label_maps,
    );
    write_json(&out_dir.join(&manifest_name), &manifest)?;
    let mut outputs = run.outputs;
    outputs.push(manifest_name);
    Ok(Outcome {
        out_dir,
        outputs,
        summary,
    })
}

struct Run {
    out_dir: PathBuf,
    outputs: Vec<String>,
    label_maps: Vec<LabelMapRecord>,
}

#[derive(Serialize)]
struct SegmentDoc<'a> {
    maps: &'a [String],
    requested_clusters: usize,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct FuseDoc<'a> {
    ensemble: &'a [PathBuf],
    consensus_file: &'a str,
    num_labels: usize,
    beta: f64,
    t_max: usize,
    seed: u64,
    distance: &'a DistanceModel<f64>,
    #[serde(flatten)]
    report: &'a segfusion_core::FusionReport<f64>,
}

#[derive(Serialize)]
struct EvaluationDoc {
    ri: f64,
    ari: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostic: Option<String>,
}

impl Run {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn emit(&mut self, name: impl Into<String>) {
        self.outputs.push(name.into());
    }

    fn segment(&mut self, a: &SegmentArgs) -> Result<String> {
        let img = load_image(required(&a.image, "--image")?)?;
        let cfg = a.kmeans.config(a.clusters, a.common.seed);
        let seg = kmeans_segment(&img, &cfg)?;
        let mut names = Vec::new();
        for (i, p) in seg.partitions.iter().enumerate() {
            let name = format!("segment_{}.{}", i, a.format.ext());
            write_label_map(&self.path(&name), p, false)?;
            names.push(name);
        }
        let doc = SegmentDoc {
            maps: &names,
            requested_clusters: a.clusters,
            warnings: seg.warnings.iter().map(ToString::to_string).collect(),
        };
        names.iter().for_each(|n| self.emit(n.clone()));
        write_json(&self.path("segment.json"), &doc)?;
        self.emit("segment.json");
        Ok(to_json(&doc))
    }

    fn fuse(&mut self, a: &FuseArgs) -> Result<String> {
        let ensemble = load_maps(&a.maps, &mut self.label_maps)?;
        let n = ensemble.first().map_or(0, Partition::len);
        let cfg = a
            .fusion
            .config(a.beta, a.common.seed, n, &mut self.label_maps)?;
        let report = fuse(&ensemble, &cfg)?;
        log::info!("fusion finished in {:?}", report.wall_time);

        let consensus_file = format!("consensus.{}", a.format.ext());
        write_label_map(&self.path(&consensus_file), &report.consensus, false)?;
        self.emit(consensus_file.clone());

        let doc = FuseDoc {
            ensemble: &a.maps,
            consensus_file: &consensus_file,
            num_labels: report.consensus.num_labels(),
            beta: cfg.beta,
            t_max: cfg.t_max,
            seed: cfg.seed,
            distance: &cfg.distance,
            report: &report,
        };
        write_json(&self.path("report.json"), &doc)?;
        self.emit("report.json");

        let mut trace = String::from("iteration,average_sod\n");
        for t in &report.objective_trace {
            trace.push_str(&format!("{},{}\n", t.iteration, t.average_sod));
        }
        write_file(&self.path("trace.csv"), trace)?;
        self.emit("trace.csv");

        if cfg.distance.kind == segfusion_core::DistanceKind::Qd {
            write_json(&self.path("distance_model.json"), &cfg.distance)?;
            self.emit("distance_model.json");
        }
        if a.palette {
            write_json(
                &self.path("palette.json"),
                &palette(report.consensus.num_labels()),
            )?;
            self.emit("palette.json");
        }
        Ok(to_json(&serde_json::json!({
            "consensus": consensus_file,
            "objective": report.objective,
            "average_sod": report.average_sod,
            "iterations_run": report.iterations_run,
        })))
    }

    fn estimate_c(&mut self, a: &EstimateCArgs) -> Result<String> {
        let img = load_image(required(&a.image, "--image")?)?;
        let segmenter = KMeansSegmenter {
            template: a.kmeans.config(2, a.common.seed),
        };
        let grid = estimate_c(
            &img,
            &segmenter,
            &a.c_grid,
            a.common.seed,
            a.direction.into(),
        )?;
        write_json(&self.path("grid_c.json"), &grid)?;
        write_file(&self.path("grid_c.csv"), grid.to_csv())?;
        self.emit("grid_c.json");
        self.emit("grid_c.csv");
        Ok(to_json(&serde_json::json!({ "chosen": grid.chosen })))
    }

    fn estimate_beta(&mut self, a: &EstimateBetaArgs) -> Result<String> {
        let ensemble = load_maps(&a.maps, &mut self.label_maps)?;
        let n = ensemble.first().map_or(0, Partition::len);
        let template = a
            .fusion
            .config(0.0, a.common.seed, n, &mut self.label_maps)?;
        let grid = estimate_beta(&ensemble, &template, &a.beta_grid, a.direction.into())?;
        write_json(&self.path("grid_beta.json"), &grid)?;
        write_file(&self.path("grid_beta.csv"), grid.to_csv())?;
        self.emit("grid_beta.json");
        self.emit("grid_beta.csv");
        Ok(to_json(&serde_json::json!({ "chosen": grid.chosen })))
    }

    fn evaluate(&mut self, a: &EvaluateArgs) -> Result<String> {
        let p = load_map(required(&a.labels, "--labels")?, &mut self.label_maps)?;
        let q = load_map(required(&a.reference, "--reference")?, &mut self.label_maps)?;
        let ri = rand_index(&p, &q)?;
        let doc = match adjusted_rand_index(&p, &q) {
            Ok(ari) => EvaluationDoc {
                ri,
                ari: Some(ari),
                diagnostic: None,
            },
            Err(segfusion_core::Error::DegenerateMetric) => EvaluationDoc {
                ri,
                ari: None,
                diagnostic: Some("ARI undefined: both maps are the same trivial partition".into()),
            },
            Err(e) => return Err(e.into()),
        };
        write_json(&self.path("evaluation.json"), &doc)?;
        self.emit("evaluation.json");
        Ok(to_json(&doc))
    }

    fn convert(&mut self, a: &ConvertArgs) -> Result<String> {
        let input = required(&a.input, "--input")?;
        let output = required(&a.output, "--output")?;
        let (w, h, values) = read_raw_labels(input)?;
        let dest = self.out_dir.join(output);
        write_raw_labels(&dest, w, h, &values, a.ascii)?;
        let name = output.to_string_lossy().into_owned();
        self.emit(name.clone());
        Ok(to_json(&serde_json::json!({ "output": name })))
    }
}

/// Deterministic, well-separated RGB colors: hues stepped by the golden
/// angle at full saturation.
pub fn palette(n: usize) -> Vec<[u8; 3]> {
    (0..n)
        .map(|i| {
            let hue = (i as f64 * 0.618_033_988_749_895).fract() * 6.0;
            let x = 1.0 - (hue % 2.0 - 1.0).abs();
            let (r, g, b) = match hue as u32 {
                0 => (1.0, x, 0.0),
                1 => (x, 1.0, 0.0),
                2 => (0.0, 1.0, x),
                3 => (0.0, x, 1.0),
                4 => (x, 0.0, 1.0),
                _ => (1.0, 0.0, x),
            };
            let q = |v: f64| (v * 255.0).round() as u8;
            [q(r), q(g), q(b)]
        })
        .collect()
}
